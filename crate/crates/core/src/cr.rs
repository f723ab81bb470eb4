//! Crouzeix-Raviart discretization on triangulations and its flux recovery.

use nalgebra::{Matrix3, Vector3};

use crate::analysis::VectorField;
use crate::assembly::{solve_problem, DiscreteField, Discretization};
use crate::elements::LocalRtPoly;
use crate::mesh::TriMesh;
use crate::problems::ProblemSpec;
use crate::recovery::{BrokenRtField, RecoveredFlux};
use crate::sparse::{SolveReport, SolverOptions};
use crate::{Error, Point, Result, Vector};

/// Solves the CR method. Meshes that are not uniform-parallel are accepted with a warning.
pub fn solve_cr<'a>(
    mesh: &'a TriMesh,
    problem: &ProblemSpec,
    opts: &SolverOptions,
) -> Result<(DiscreteField<'a, TriMesh>, SolveReport)> {
    if problem.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: problem.dim(),
        });
    }
    if !mesh.is_uniform_parallel() {
        log::warn!("triangulation is not uniform-parallel; recovery rates are not expected to hold");
    }
    solve_problem(mesh, problem, opts)
}

/// `(x - x_K) / 2` on triangle `t`.
pub fn correction_poly(mesh: &TriMesh, t: usize) -> LocalRtPoly {
    LocalRtPoly {
        center: mesh.centroid(t),
        alpha: [0.0; 3],
        beta: [0.5, 0.5, 0.0],
    }
}

/// Element means of `a` times the (constant) broken gradient.
pub fn averaged_gradient(field: &DiscreteField<'_, TriMesh>, problem: &ProblemSpec) -> Result<Vec<Vector>> {
    let mesh = field.space;
    (0..mesh.num_triangles())
        .map(|t| {
            let rule = mesh.cell_rule(t);
            let abar = rule.integrate(|x| problem.a(x)) / rule.measure();
            let g = field.value_grad(t, &mesh.centroid(t))?.1;
            Ok([abar * g[0], abar * g[1], 0.0])
        })
        .collect()
}

/// `abar grad u_h - r * P_h(f - c u_h - b . grad u_h)` per triangle.
pub fn cr_flux(field: &DiscreteField<'_, TriMesh>, problem: &ProblemSpec) -> Result<BrokenRtField> {
    let mesh = field.space;
    let abar_grad = averaged_gradient(field, problem)?;
    let mut polys = Vec::with_capacity(mesh.num_triangles());
    for (t, flux) in abar_grad.iter().enumerate() {
        let view = field.element(t)?;
        let rule = mesh.cell_rule(t);
        let load = rule.integrate(|x| {
            let (u, g) = view.value_grad(x);
            let b = problem.b(x);
            problem.f(x) - problem.c(x) * u - (b[0] * g[0] + b[1] * g[1])
        }) / rule.measure();
        let base = LocalRtPoly::constant(mesh.centroid(t), *flux);
        polys.push(base.minus_scaled(load, &correction_poly(mesh, t)));
    }
    Ok(BrokenRtField { polys })
}

/// `grad_h u_h - fbar_K r` for an element-wise constant load.
pub fn corrected_gradient_tri(field: &DiscreteField<'_, TriMesh>, fbar: &[f64]) -> Result<BrokenRtField> {
    let mesh = field.space;
    (0..mesh.num_triangles())
        .map(|t| {
            let g = field.value_grad(t, &mesh.centroid(t))?.1;
            let base = LocalRtPoly::constant(mesh.centroid(t), g);
            Ok(base.minus_scaled(fbar[t], &correction_poly(mesh, t)))
        })
        .collect::<Result<Vec<_>>>()
        .map(|polys| BrokenRtField { polys })
}

/// Lowest-order RT interpolant on triangles from edge normal-flux means.
pub fn rt_interpolate_tri<F: Fn(&Point) -> Vector>(mesh: &TriMesh, tau: F) -> Result<BrokenRtField> {
    let flux: Vec<f64> = (0..mesh.edges().len())
        .map(|e| {
            let n = mesh.facet_normal(e);
            let rule = mesh.facet_rule(e);
            rule.integrate(|x| {
                let v = tau(x);
                v[0] * n[0] + v[1] * n[1]
            }) / rule.measure()
        })
        .collect();
    let mut polys = Vec::with_capacity(mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let c = mesh.centroid(t);
        let mut m = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for (i, &e) in mesh.triangle_edges(t).iter().enumerate() {
            let n = mesh.outward_normal(t, e);
            let fixed = mesh.facet_normal(e);
            let sign = (n[0] * fixed[0] + n[1] * fixed[1]).signum();
            let mid = mesh.edge(e).midpoint;
            m[(i, 0)] = n[0];
            m[(i, 1)] = n[1];
            m[(i, 2)] = (mid[0] - c[0]) * n[0] + (mid[1] - c[1]) * n[1];
            rhs[i] = sign * flux[e];
        }
        let s = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem(format!("RT interpolation on triangle {t}")))?;
        polys.push(LocalRtPoly {
            center: c,
            alpha: [s[0], s[1], 0.0],
            beta: [s[2], s[2], 0.0],
        });
    }
    Ok(BrokenRtField { polys })
}

fn is_parallel(mesh: &TriMesh, e1: usize, e2: usize) -> bool {
    let dir = |e: usize| {
        let edge = mesh.edge(e);
        let p = mesh.vertices()[edge.vertices[0]];
        let q = mesh.vertices()[edge.vertices[1]];
        [q[0] - p[0], q[1] - p[1]]
    };
    let (a, b) = (dir(e1), dir(e2));
    let cross = a[0] * b[1] - a[1] * b[0];
    cross.abs() <= 1e-10 * mesh.edge(e1).length * mesh.edge(e2).length
}

/// Edge-midpoint averaging of a piecewise constant field.
///
/// Interior midpoints take the plain average of the two sides. A boundary
/// midpoint is extrapolated linearly along a chain `m, m', m''` where `m'` is
/// the midpoint of another edge of the boundary triangle and `m''` the midpoint
/// of the edge of the neighbour parallel to the boundary edge. When both other
/// edges admit such a chain, the shorter one is used. If `m''` is itself on the
/// boundary, the neighbour's own value is used there.
pub fn apply_kh<'a>(mesh: &'a TriMesh, tau: &[Vector]) -> Result<RecoveredFlux<'a, TriMesh>> {
    if tau.len() != mesh.num_triangles() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_triangles(),
            found: tau.len(),
        });
    }
    let ne = mesh.edges().len();
    let mut values = vec![[0.0; 3]; ne];
    for (e, edge) in mesh.edges().iter().enumerate() {
        if let [Some(a), Some(b)] = edge.triangles {
            for j in 0..3 {
                values[e][j] = 0.5 * (tau[a][j] + tau[b][j]);
            }
        }
    }
    for (e, edge) in mesh.edges().iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let k = edge.triangles[0].expect("edge has a triangle");
        let m = edge.midpoint;
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for &e1 in mesh.triangle_edges(k) {
            if e1 == e || mesh.edge(e1).is_boundary() {
                continue;
            }
            let k1 = mesh
                .edge(e1)
                .elements()
                .find(|&t| t != k)
                .expect("interior edge has two triangles");
            for &e2 in mesh.triangle_edges(k1) {
                if e2 == e1 || !is_parallel(mesh, e, e2) {
                    continue;
                }
                let m2 = mesh.edge(e2).midpoint;
                let dist = ((m2[0] - m[0]).powi(2) + (m2[1] - m[1]).powi(2)).sqrt();
                if best.is_none_or(|(d, ..)| dist < d - 1e-12 * d) {
                    best = Some((dist, e1, k1, e2));
                }
            }
        }
        let Some((_, e1, k1, e2)) = best else {
            return Err(Error::MeshTooThin { facet: e });
        };
        let far = if mesh.edge(e2).is_boundary() {
            tau[k1]
        } else {
            values[e2]
        };
        for j in 0..3 {
            values[e][j] = 2.0 * values[e1][j] - far[j];
        }
    }
    Ok(RecoveredFlux { space: mesh, values })
}

/// Continuous piecewise linear field from area-weighted vertex averages.
#[derive(Debug, Clone)]
pub struct NodalField<'a> {
    pub mesh: &'a TriMesh,
    pub vertex_values: Vec<Vector>,
}

/// Barycentric coordinates of `x` in the triangle `c`.
pub fn barycentric(c: &[Point; 3], x: &Point) -> [f64; 3] {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let l1 = ((x[0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (x[1] - c[0][1])) / det;
    let l2 = ((c[1][0] - c[0][0]) * (x[1] - c[0][1]) - (x[0] - c[0][0]) * (c[1][1] - c[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl VectorField for NodalField<'_> {
    fn eval_element(&self, e: usize, points: &[Point]) -> Result<Vec<Vector>> {
        let corners = self.mesh.corners(e);
        let tri = self.mesh.triangles()[e];
        Ok(points
            .iter()
            .map(|x| {
                let l = barycentric(&corners, x);
                let mut v = [0.0; 3];
                for (i, &vi) in tri.iter().enumerate() {
                    for j in 0..3 {
                        v[j] += l[i] * self.vertex_values[vi][j];
                    }
                }
                v
            })
            .collect())
    }
}

/// Vertex value is the area-weighted mean of `tau` over the triangles around it.
pub fn apply_ktilde<'a>(mesh: &'a TriMesh, tau: &[Vector]) -> Result<NodalField<'a>> {
    if tau.len() != mesh.num_triangles() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_triangles(),
            found: tau.len(),
        });
    }
    let mut sums = vec![[0.0; 3]; mesh.vertices().len()];
    let mut areas = vec![0.0; mesh.vertices().len()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t);
        for &v in tri {
            areas[v] += a;
            for j in 0..3 {
                sums[v][j] += a * tau[t][j];
            }
        }
    }
    let vertex_values = sums
        .iter()
        .zip(&areas)
        .map(|(s, &a)| [s[0] / a, s[1] / a, s[2] / a])
        .collect();
    Ok(NodalField { mesh, vertex_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::VectorField;
    use crate::problems;
    use crate::recovery::jump_oracle;
    use crate::sparse::SolverKind;

    fn dense() -> SolverOptions {
        SolverOptions {
            kind: SolverKind::Dense,
            ..Default::default()
        }
    }

    #[test]
    fn constant_boundary_data_gives_constant_solution() {
        let mesh = TriMesh::uniform_parallel(2, 2).unwrap();
        let ev = problems::poisson_zero(2).unwrap();
        // u = 1 with a = 1: reuse the linear family through facet values
        let one = problems::ProblemSpec::custom(
            "one",
            2,
            problems::Evaluators {
                u: std::sync::Arc::new(|_| 1.0),
                grad_u: std::sync::Arc::new(|_| [0.0; 3]),
                laplacian_u: std::sync::Arc::new(|_| 0.0),
                ..ev.evaluators().clone()
            },
        )
        .unwrap();
        let (field, _) = solve_cr(&mesh, &one, &dense()).unwrap();
        assert!(field.dofs.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn linear_exactness() {
        let mesh = TriMesh::uniform_parallel(3, 2).unwrap();
        let p = problems::linear(2).unwrap();
        let (field, _) = solve_cr(&mesh, &p, &dense()).unwrap();
        for (e, edge) in mesh.edges().iter().enumerate() {
            assert!((field.dofs[e] - p.u(&edge.midpoint)).abs() < 1e-12);
        }
    }

    #[test]
    fn kh_preserves_constants_and_linears() {
        let mesh = TriMesh::uniform_parallel(4, 4).unwrap();
        let c = vec![[0.7, -0.2, 0.0]; mesh.num_triangles()];
        let rec = apply_kh(&mesh, &c).unwrap();
        assert!(rec.values.iter().all(|v| (v[0] - 0.7).abs() < 1e-14 && (v[1] + 0.2).abs() < 1e-14));
        let lin = |x: &Point| [1.0 + 2.0 * x[0] - x[1], 3.0 * x[1], 0.0];
        let tau: Vec<Vector> = (0..mesh.num_triangles()).map(|t| lin(&mesh.centroid(t))).collect();
        let rec = apply_kh(&mesh, &tau).unwrap();
        for (e, edge) in mesh.edges().iter().enumerate() {
            let want = lin(&edge.midpoint);
            assert!((rec.values[e][0] - want[0]).abs() < 1e-13, "edge {e}");
            assert!((rec.values[e][1] - want[1]).abs() < 1e-13, "edge {e}");
        }
    }

    #[test]
    fn kh_annihilates_correction_at_interior_midpoints() {
        let mesh = TriMesh::uniform_parallel(4, 3).unwrap();
        for edge in mesh.edges() {
            if let [Some(a), Some(b)] = edge.triangles {
                let va = correction_poly(&mesh, a).eval(&edge.midpoint);
                let vb = correction_poly(&mesh, b).eval(&edge.midpoint);
                assert!((va[0] + vb[0]).abs() < 1e-14 && (va[1] + vb[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ktilde_weights() {
        let mesh = TriMesh::uniform_parallel(2, 2).unwrap();
        let c = vec![[2.0, 5.0, 0.0]; mesh.num_triangles()];
        let nodal = apply_ktilde(&mesh, &c).unwrap();
        assert!(nodal.vertex_values.iter().all(|v| (v[0] - 2.0).abs() < 1e-14));
        // center vertex (index 4) touches six triangles of equal area
        let tau: Vec<Vector> = (0..8).map(|t| [t as f64, 0.0, 0.0]).collect();
        let nodal = apply_ktilde(&mesh, &tau).unwrap();
        let around = &mesh.vertex_triangles()[4];
        assert_eq!(around.len(), 6);
        let want = around.iter().map(|&t| t as f64).sum::<f64>() / 6.0;
        assert!((nodal.vertex_values[4][0] - want).abs() < 1e-14);
        let at = nodal.eval_element(0, &[mesh.vertices()[4]]).unwrap();
        assert!((at[0][0] - want).abs() < 1e-14);
    }

    #[test]
    fn rt_interpolant_on_triangles() {
        let mesh = TriMesh::uniform_parallel(3, 3).unwrap();
        let tau = |x: &Point| [0.5 + 2.0 * x[0], -1.0 + 2.0 * x[1], 0.0];
        let pi = rt_interpolate_tri(&mesh, tau).unwrap();
        for t in 0..mesh.num_triangles() {
            let v = pi.polys[t].eval(&[0.3, 0.6, 0.0]);
            let w = tau(&[0.3, 0.6, 0.0]);
            assert!((v[0] - w[0]).abs() < 1e-12 && (v[1] - w[1]).abs() < 1e-12);
        }
        let smooth = rt_interpolate_tri(&mesh, |x| [x[1].sin(), x[0] * x[0], 0.0]).unwrap();
        assert!(jump_oracle(&mesh, &smooth) < 1e-13);
    }

    #[test]
    fn barycentric_identity() {
        let c = [[0.1, 0.0, 0.0], [1.0, 0.2, 0.0], [0.3, 0.9, 0.0]];
        for (i, corner) in c.iter().enumerate() {
            let l = barycentric(&c, corner);
            for (j, lj) in l.iter().enumerate() {
                assert!((lj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
