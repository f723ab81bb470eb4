//! Global assembly of the nonconforming Galerkin systems.
//!
//! Both element families carry one degree of freedom per facet (edge or
//! face). Boundary facets hold prescribed Dirichlet means and are lifted to
//! the right-hand side; the unknowns are the interior facets in facet order.

use std::sync::OnceLock;

use crate::elements::{cr_basis_for, ncrt_basis_mean_for, ncrt_basis_midpoint_for, LocalBasis};
use crate::mesh::{TensorMesh, TriMesh};
use crate::problems::ProblemSpec;
use crate::quadrature::{
    gauss1d_4, map_to_box, map_to_segment, map_to_triangle, tensor_rule, triangle_rule, MappedRule,
    QuadRule,
};
use crate::sparse::{solve, SolveReport, SolverOptions, SparseMatrix};
use crate::{Point, Result, Vector};

pub(crate) fn cached_tensor_rule(dim: usize) -> &'static QuadRule {
    static RULES: OnceLock<[QuadRule; 4]> = OnceLock::new();
    &RULES.get_or_init(|| {
        [0, 1, 2, 3].map(|d| tensor_rule(d).expect("dimension in range"))
    })[dim]
}

pub(crate) fn cached_triangle_rule() -> &'static QuadRule {
    static RULE: OnceLock<QuadRule> = OnceLock::new();
    RULE.get_or_init(triangle_rule)
}

/// A mesh together with its facet-based nonconforming element.
pub trait Discretization {
    fn dim(&self) -> usize;
    fn num_elements(&self) -> usize;
    fn num_facets(&self) -> usize;
    /// Facets of element `e` in local basis order.
    fn element_facets(&self, e: usize) -> &[usize];
    fn is_boundary_facet(&self, f: usize) -> bool;
    /// Elements adjacent to facet `f`.
    fn facet_elements(&self, f: usize) -> Vec<usize>;
    fn local_basis(&self, e: usize) -> Result<LocalBasis>;
    /// Basis dual to point values at facet midpoints.
    fn midpoint_basis(&self, e: usize) -> Result<LocalBasis>;
    fn facet_midpoint(&self, f: usize) -> Point;
    /// A fixed unit normal of facet `f`.
    fn facet_normal(&self, f: usize) -> Vector;
    fn cell_rule(&self, e: usize) -> MappedRule;
    fn facet_rule(&self, f: usize) -> MappedRule;
    fn element_measure(&self, e: usize) -> f64;
    fn element_centroid(&self, e: usize) -> Point;
    /// Mesh size used for convergence fits.
    fn mesh_size(&self) -> f64;
}

impl Discretization for TensorMesh {
    fn dim(&self) -> usize {
        TensorMesh::dim(self)
    }

    fn num_elements(&self) -> usize {
        TensorMesh::num_elements(self)
    }

    fn num_facets(&self) -> usize {
        TensorMesh::num_facets(self)
    }

    fn element_facets(&self, e: usize) -> &[usize] {
        TensorMesh::element_facets(self, e)
    }

    fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet(f).is_boundary()
    }

    fn facet_elements(&self, f: usize) -> Vec<usize> {
        self.patch(f)
    }

    fn local_basis(&self, e: usize) -> Result<LocalBasis> {
        ncrt_basis_mean_for(&self.cell(e), e)
    }

    fn midpoint_basis(&self, e: usize) -> Result<LocalBasis> {
        ncrt_basis_midpoint_for(&self.cell(e), e)
    }

    fn facet_midpoint(&self, f: usize) -> Point {
        self.facet(f).centroid
    }

    fn facet_normal(&self, f: usize) -> Vector {
        let mut n = [0.0; 3];
        n[self.facet(f).axis] = 1.0;
        n
    }

    fn cell_rule(&self, e: usize) -> MappedRule {
        let c = self.cell(e);
        let axes: Vec<usize> = (0..c.dim).collect();
        map_to_box(cached_tensor_rule(c.dim), &c.lo, &c.hi, &axes)
    }

    fn facet_rule(&self, f: usize) -> MappedRule {
        let facet = self.facet(f);
        let axes: Vec<usize> = (0..self.dim()).filter(|&j| j != facet.axis).collect();
        map_to_box(
            cached_tensor_rule(axes.len()),
            &facet.bounds.lo,
            &facet.bounds.hi,
            &axes,
        )
    }

    fn element_measure(&self, e: usize) -> f64 {
        self.cell(e).volume()
    }

    fn element_centroid(&self, e: usize) -> Point {
        self.cell(e).centroid()
    }

    fn mesh_size(&self) -> f64 {
        self.h()
    }
}

impl Discretization for TriMesh {
    fn dim(&self) -> usize {
        2
    }

    fn num_elements(&self) -> usize {
        self.num_triangles()
    }

    fn num_facets(&self) -> usize {
        self.edges().len()
    }

    fn element_facets(&self, e: usize) -> &[usize] {
        self.triangle_edges(e)
    }

    fn is_boundary_facet(&self, f: usize) -> bool {
        self.edge(f).is_boundary()
    }

    fn facet_elements(&self, f: usize) -> Vec<usize> {
        self.edge(f).elements().collect()
    }

    fn local_basis(&self, e: usize) -> Result<LocalBasis> {
        cr_basis_for(&self.corners(e), e)
    }

    fn midpoint_basis(&self, e: usize) -> Result<LocalBasis> {
        cr_basis_for(&self.corners(e), e)
    }

    fn facet_midpoint(&self, f: usize) -> Point {
        self.edge(f).midpoint
    }

    fn facet_normal(&self, f: usize) -> Vector {
        let edge = self.edge(f);
        let p = self.vertices()[edge.vertices[0]];
        let q = self.vertices()[edge.vertices[1]];
        [(q[1] - p[1]) / edge.length, -(q[0] - p[0]) / edge.length, 0.0]
    }

    fn cell_rule(&self, e: usize) -> MappedRule {
        map_to_triangle(cached_triangle_rule(), &self.corners(e))
    }

    fn facet_rule(&self, f: usize) -> MappedRule {
        let edge = self.edge(f);
        let v = self.vertices();
        map_to_segment(&gauss1d_4(), &v[edge.vertices[0]], &v[edge.vertices[1]])
    }

    fn element_measure(&self, e: usize) -> f64 {
        self.area(e)
    }

    fn element_centroid(&self, e: usize) -> Point {
        self.centroid(e)
    }

    fn mesh_size(&self) -> f64 {
        self.h()
    }
}

/// Numbering of unknowns: interior facets in facet order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    facet_to_unknown: Vec<Option<usize>>,
    unknown_to_facet: Vec<usize>,
}

impl DofMap {
    pub fn new<S: Discretization + ?Sized>(space: &S) -> Self {
        let mut facet_to_unknown = vec![None; space.num_facets()];
        let mut unknown_to_facet = Vec::new();
        for (f, slot) in facet_to_unknown.iter_mut().enumerate() {
            if !space.is_boundary_facet(f) {
                *slot = Some(unknown_to_facet.len());
                unknown_to_facet.push(f);
            }
        }
        DofMap {
            facet_to_unknown,
            unknown_to_facet,
        }
    }

    pub fn num_unknowns(&self) -> usize {
        self.unknown_to_facet.len()
    }

    pub fn unknown(&self, facet: usize) -> Option<usize> {
        self.facet_to_unknown[facet]
    }

    pub fn facet(&self, unknown: usize) -> usize {
        self.unknown_to_facet[unknown]
    }
}

/// An assembled system over the interior facets.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// Prescribed means on boundary facets, zero on interior ones.
    pub boundary_values: Vec<f64>,
}

impl LinearSystem {
    /// Combines interior unknowns with the lifted boundary values into one vector per facet.
    pub fn expand(&self, unknowns: &[f64]) -> Vec<f64> {
        let mut all = self.boundary_values.clone();
        for (k, v) in unknowns.iter().enumerate() {
            all[self.dofs.facet(k)] = *v;
        }
        all
    }

    /// Restricts a full facet vector to the unknowns.
    pub fn restrict(&self, facet_values: &[f64]) -> Vec<f64> {
        (0..self.dofs.num_unknowns())
            .map(|k| facet_values[self.dofs.facet(k)])
            .collect()
    }
}

/// Facet means of `g`, computed with the facet Gauss rule, as `(facet, value)` pairs.
pub fn boundary_means<S, G>(space: &S, g: G) -> Vec<(usize, f64)>
where
    S: Discretization + ?Sized,
    G: Fn(&Point) -> f64,
{
    (0..space.num_facets())
        .filter(|&f| space.is_boundary_facet(f))
        .map(|f| {
            let rule = space.facet_rule(f);
            (f, rule.integrate(&g) / rule.measure())
        })
        .collect()
}

/// Facet means of `g` on every facet.
pub fn facet_means<S, G>(space: &S, g: G) -> Vec<f64>
where
    S: Discretization + ?Sized,
    G: Fn(&Point) -> f64,
{
    (0..space.num_facets())
        .map(|f| {
            let rule = space.facet_rule(f);
            rule.integrate(&g) / rule.measure()
        })
        .collect()
}

/// Assembles the system with the problem's synthesized load.
pub fn assemble<S: Discretization + ?Sized>(space: &S, problem: &ProblemSpec) -> Result<LinearSystem> {
    assemble_with_load(space, problem, &|_, x| problem.f(x))
}

/// Assembles with an arbitrary element-wise load `load(element, x)` in place of `f`.
pub fn assemble_with_load<S: Discretization + ?Sized>(
    space: &S,
    problem: &ProblemSpec,
    load: &dyn Fn(usize, &Point) -> f64,
) -> Result<LinearSystem> {
    let dofs = DofMap::new(space);
    let mut boundary_values = vec![0.0; space.num_facets()];
    for (f, v) in boundary_means(space, |x| problem.g(x)) {
        boundary_values[f] = v;
    }
    let n = dofs.num_unknowns();
    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(space.num_elements() * 4 * space.dim() * space.dim());
    for e in 0..space.num_elements() {
        let (local, local_rhs) = local_system(space, problem, load, e)?;
        let facets = space.element_facets(e);
        let nl = facets.len();
        for i in 0..nl {
            let Some(row) = dofs.unknown(facets[i]) else {
                continue;
            };
            rhs[row] += local_rhs[i];
            for k in 0..nl {
                match dofs.unknown(facets[k]) {
                    Some(col) => triplets.push((row, col, local[i][k])),
                    None => rhs[row] -= local[i][k] * boundary_values[facets[k]],
                }
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(n, &triplets)?;
    Ok(LinearSystem {
        matrix,
        rhs,
        dofs,
        boundary_values,
    })
}

type LocalMatrix = [[f64; 6]; 6];

/// Element matrix (row = test function) and load vector.
fn local_system<S: Discretization + ?Sized>(
    space: &S,
    problem: &ProblemSpec,
    load: &dyn Fn(usize, &Point) -> f64,
    e: usize,
) -> Result<(LocalMatrix, [f64; 6])> {
    let basis = space.local_basis(e)?;
    let rule = space.cell_rule(e);
    let nl = basis.len();
    let dim = space.dim();
    let mut mat = [[0.0; 6]; 6];
    let mut vec = [0.0; 6];
    for (x, &w) in rule.points.iter().zip(&rule.weights) {
        let ev = basis.eval(x);
        let a = problem.a(x);
        let b = problem.b(x);
        let c = problem.c(x);
        let f = load(e, x);
        for i in 0..nl {
            let phi_i = ev.values[i];
            let gi = &ev.grads[i];
            vec[i] += w * f * phi_i;
            for k in 0..nl {
                let gk = &ev.grads[k];
                let mut diff = 0.0;
                let mut conv = 0.0;
                for j in 0..dim {
                    diff += gk[j] * gi[j];
                    conv += b[j] * gk[j];
                }
                mat[i][k] += w * (a * diff + conv * phi_i + c * ev.values[k] * phi_i);
            }
        }
    }
    Ok((mat, vec))
}

/// A discrete field given by one value per facet.
#[derive(Debug, Clone)]
pub struct DiscreteField<'a, S: ?Sized> {
    pub space: &'a S,
    pub dofs: Vec<f64>,
}

/// The restriction of a [`DiscreteField`] to one element.
#[derive(Debug, Clone)]
pub struct ElementView {
    pub basis: LocalBasis,
    pub local: [f64; 6],
}

impl ElementView {
    pub fn value_grad(&self, x: &Point) -> (f64, Vector) {
        self.basis.combine(&self.local[..self.basis.len()], x)
    }
}

impl<'a, S: Discretization + ?Sized> DiscreteField<'a, S> {
    pub fn element(&self, e: usize) -> Result<ElementView> {
        let basis = self.space.local_basis(e)?;
        let mut local = [0.0; 6];
        for (l, &f) in self.space.element_facets(e).iter().enumerate() {
            local[l] = self.dofs[f];
        }
        Ok(ElementView { basis, local })
    }

    /// Value and gradient at `x`, using the polynomial of element `e`.
    pub fn value_grad(&self, e: usize, x: &Point) -> Result<(f64, Vector)> {
        Ok(self.element(e)?.value_grad(x))
    }
}

/// Wraps facet values as an element-wise evaluable field.
pub fn reconstruct_field<S: Discretization + ?Sized>(space: &S, dofs: Vec<f64>) -> DiscreteField<'_, S> {
    DiscreteField { space, dofs }
}

/// Assembles, solves and returns the discrete solution together with the solver report.
pub fn solve_problem<'a, S: Discretization + ?Sized>(
    space: &'a S,
    problem: &ProblemSpec,
    opts: &SolverOptions,
) -> Result<(DiscreteField<'a, S>, SolveReport)> {
    let system = assemble(space, problem)?;
    let (x, report) = solve(&system.matrix, &system.rhs, opts)?;
    Ok((reconstruct_field(space, system.expand(&x)), report))
}

/// Largest Galerkin residual over interior basis functions, recomputed by
/// quadrature from the reconstructed field rather than from the matrix.
pub fn galerkin_residual<S: Discretization + ?Sized>(
    field: &DiscreteField<'_, S>,
    problem: &ProblemSpec,
    load: &dyn Fn(usize, &Point) -> f64,
) -> Result<f64> {
    let space = field.space;
    let mut res = vec![0.0; space.num_facets()];
    for e in 0..space.num_elements() {
        let view = field.element(e)?;
        let rule = space.cell_rule(e);
        for (x, &w) in rule.points.iter().zip(&rule.weights) {
            let (u, gu) = view.value_grad(x);
            let ev = view.basis.eval(x);
            let a = problem.a(x);
            let b = problem.b(x);
            let c = problem.c(x);
            let mut bgu = 0.0;
            for j in 0..space.dim() {
                bgu += b[j] * gu[j];
            }
            let f = load(e, x);
            for (l, &fct) in space.element_facets(e).iter().enumerate() {
                let mut diff = 0.0;
                for j in 0..space.dim() {
                    diff += a * gu[j] * ev.grads[l][j];
                }
                res[fct] += w * (diff + (bgu + c * u - f) * ev.values[l]);
            }
        }
    }
    Ok((0..space.num_facets())
        .filter(|&f| !space.is_boundary_facet(f))
        .map(|f| res[f].abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use crate::sparse::SolverKind;

    fn dense_opts() -> SolverOptions {
        SolverOptions {
            kind: SolverKind::Dense,
            ..Default::default()
        }
    }

    #[test]
    fn poisson_matrix_is_symmetric_with_bounded_rows() {
        let mesh = TensorMesh::new(vec![vec![0.0, 0.4, 0.8, 1.0], vec![0.0, 0.7, 1.0]])
            .unwrap()
            .refine_midpoint()
            .perturb(0.2, 3)
            .unwrap();
        let p = problems::poisson_zero(2).unwrap();
        let sys = assemble(&mesh, &p).unwrap();
        let a = &sys.matrix;
        assert!(a.max_asymmetry() <= 1e-12 * a.max_abs());
        assert!(a.max_row_nnz() <= 7);
        let mesh3 = TensorMesh::uniform(3, 3).unwrap();
        let sys3 = assemble(&mesh3, &problems::problem2()).unwrap();
        assert!(sys3.matrix.max_asymmetry() <= 1e-12 * sys3.matrix.max_abs());
        assert!(sys3.matrix.max_row_nnz() <= 11);
    }

    #[test]
    fn matches_dense_pairwise_assembly() {
        // entry-by-entry oracle: A_ij = sum_K int grad phi_j . grad phi_i with global
        // basis functions evaluated through unit facet vectors
        let mesh = TensorMesh::uniform(2, 2).unwrap();
        let p = problems::poisson_zero(2).unwrap();
        let sys = assemble(&mesh, &p).unwrap();
        let n = sys.dofs.num_unknowns();
        let unit = |k: usize| {
            let mut d = vec![0.0; mesh.num_facets()];
            d[sys.dofs.facet(k)] = 1.0;
            reconstruct_field(&mesh, d)
        };
        for i in 0..n {
            let fi = unit(i);
            for j in 0..n {
                let fj = unit(j);
                let mut entry = 0.0;
                for e in 0..mesh.num_elements() {
                    let rule = mesh.cell_rule(e);
                    for (x, w) in rule.points.iter().zip(&rule.weights) {
                        let (_, gi) = fi.value_grad(e, x).unwrap();
                        let (_, gj) = fj.value_grad(e, x).unwrap();
                        entry += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    }
                }
                assert!((sys.matrix.get(i, j) - entry).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn linear_solutions_are_reproduced() {
        for mesh in [
            TensorMesh::new(vec![vec![0.0, 0.4, 0.8, 1.0], vec![0.0, 0.7, 1.0]])
                .unwrap()
                .refine_midpoint()
                .perturb(0.2, 9)
                .unwrap(),
            TensorMesh::uniform(3, 3).unwrap().perturb(0.2, 4).unwrap(),
        ] {
            let p = problems::linear(mesh.dim()).unwrap();
            let sys = assemble(&mesh, &p).unwrap();
            let exact = facet_means(&mesh, |x| p.u(x));
            let r = sys.restrict(&exact);
            let ar = sys.matrix.mul(&r);
            let res = ar.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(res < 1e-12, "residual of exact dofs {res}");
            let (field, _) = solve_problem(&mesh, &p, &dense_opts()).unwrap();
            for (got, want) in field.dofs.iter().zip(&exact) {
                assert!((got - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_mean_values() {
        let mesh = TensorMesh::new(vec![vec![0.0, 0.4, 0.45, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(boundary_means(&mesh, |_| 1.0).iter().all(|(_, v)| (v - 1.0).abs() < 1e-15));
        let bm = boundary_means(&mesh, |x| x[0]);
        // bottom edge [0, 0.4] x {0}
        let bottom = mesh
            .facets()
            .iter()
            .position(|f| f.axis == 1 && f.gridline == 0 && f.bounds.lo[0] == 0.0)
            .unwrap();
        let v = bm.iter().find(|(f, _)| *f == bottom).unwrap().1;
        assert!((v - 0.2).abs() < 1e-15);
        // mean of sin(3 pi x) on [0.4, 0.45] x {0}: (cos(1.2 pi) - cos(1.35 pi)) / (3 pi * 0.05)
        let bm = boundary_means(&mesh, |x| (3.0 * std::f64::consts::PI * x[0]).sin());
        let right = mesh
            .facets()
            .iter()
            .position(|f| f.axis == 1 && f.gridline == 0 && f.bounds.lo[0] == 0.4)
            .unwrap();
        let v = bm.iter().find(|(f, _)| *f == right).unwrap().1;
        let pi = std::f64::consts::PI;
        let exact = ((1.2 * pi).cos() - (1.35 * pi).cos()) / (3.0 * pi * 0.05);
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn reconstructed_fields() {
        let mesh = TensorMesh::uniform(2, 2).unwrap();
        let zero = reconstruct_field(&mesh, vec![0.0; mesh.num_facets()]);
        let (v, g) = zero.value_grad(1, &[0.7, 0.2, 0.0]).unwrap();
        assert_eq!((v, g), (0.0, [0.0; 3]));
        let mut d = vec![0.0; mesh.num_facets()];
        let target = mesh.element_facets(0)[1];
        d[target] = 1.0;
        let field = reconstruct_field(&mesh, d);
        for e in mesh.patch(target) {
            let rule = mesh.facet_rule(target);
            let mean = rule.integrate(|x| field.value_grad(e, x).unwrap().0) / rule.measure();
            assert!((mean - 1.0).abs() < 1e-13);
        }
        // gradient at the centroid against central differences of the evaluator
        let d: Vec<f64> = (0..mesh.num_facets()).map(|f| (f as f64 * 0.37).sin()).collect();
        let field = reconstruct_field(&mesh, d);
        let c = mesh.cell(3).centroid();
        let (_, g) = field.value_grad(3, &c).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = c;
            let mut xm = c;
            xp[j] += h;
            xm[j] -= h;
            let fd = (field.value_grad(3, &xp).unwrap().0 - field.value_grad(3, &xm).unwrap().0) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn galerkin_residual_after_solve() {
        let mesh = TensorMesh::new(vec![vec![0.0, 0.4, 0.8, 1.0], vec![0.0, 0.7, 1.0]])
            .unwrap()
            .refine_midpoint()
            .perturb(0.2, 5)
            .unwrap();
        let p = problems::problem1();
        let opts = SolverOptions {
            tol: 1e-13,
            ..Default::default()
        };
        let (field, _) = solve_problem(&mesh, &p, &opts).unwrap();
        let res = galerkin_residual(&field, &p, &|_, x| p.f(x)).unwrap();
        let fscale = (0..mesh.num_elements())
            .map(|e| mesh.cell_rule(e).integrate(|x| p.f(x).powi(2)))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-8 * fscale, "{res}");
    }

    #[test]
    fn constant_shift_of_boundary_data_shifts_solution() {
        let mesh = TensorMesh::uniform(2, 4).unwrap().perturb(0.2, 8).unwrap();
        let base = problems::smooth(2).unwrap();
        let sys = assemble(&mesh, &base).unwrap();
        let (x0, _) = solve(&sys.matrix, &sys.rhs, &dense_opts()).unwrap();
        // same operator and load, boundary data raised by 1
        let mut shifted = sys.clone();
        shifted.rhs = sys.rhs.clone();
        for e in 0..mesh.num_elements() {
            let facets = mesh.element_facets(e);
            let (local, _) = local_system(&mesh, &base, &|_, x| base.f(x), e).unwrap();
            for (i, &fi) in facets.iter().enumerate() {
                if let Some(row) = sys.dofs.unknown(fi) {
                    for (k, &fk) in facets.iter().enumerate() {
                        if sys.dofs.unknown(fk).is_none() {
                            shifted.rhs[row] -= local[i][k];
                        }
                    }
                }
            }
        }
        let (x1, _) = solve(&shifted.matrix, &shifted.rhs, &dense_opts()).unwrap();
        for (a, b) in x0.iter().zip(&x1) {
            assert!((b - a - 1.0).abs() < 1e-10);
        }
    }
}
