//! Corrected fluxes and midpoint-averaging recovery on tensor meshes.
//!
//! The pipeline is: project `a grad u_h` element by element onto the
//! gradients of the local rotated span, subtract the correction field scaled
//! by the local residual load, and average the resulting broken field at
//! facet midpoints.

use nalgebra::{DMatrix, DVector};

use crate::analysis::VectorField;
use crate::assembly::{cached_tensor_rule, DiscreteField, Discretization};
use crate::elements::LocalRtPoly;
use crate::mesh::{Cell, TensorMesh};
use crate::problems::ProblemSpec;
use crate::quadrature::{map_to_box, MappedRule};
use crate::{Error, Point, Result, Vector};

/// Centered linear field `r(x)_j = coeffs_j (x_j - center_j)` with unit divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionField {
    pub dim: usize,
    pub center: Point,
    pub coeffs: Vector,
}

impl CorrectionField {
    pub fn poly(&self) -> LocalRtPoly {
        LocalRtPoly {
            center: self.center,
            alpha: [0.0; 3],
            beta: self.coeffs,
        }
    }

    pub fn divergence(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    pub fn eval(&self, x: &Point) -> Vector {
        self.poly().eval(x)
    }
}

/// Correction field of a rectangle or box: coefficient `i` is proportional to
/// the product of the squared extents along the other axes.
pub fn correction_field(cell: &Cell) -> Result<CorrectionField> {
    let dim = cell.dim;
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidInput(format!("correction field needs dim 2 or 3, got {dim}")));
    }
    let l = cell.lengths();
    if l[..dim].iter().any(|&x| !(x > 0.0)) {
        return Err(Error::DegenerateElement {
            element: 0,
            reason: format!("zero extent {:?}", &l[..dim]),
        });
    }
    let mut prods = [0.0; 3];
    for (i, p) in prods.iter_mut().enumerate().take(dim) {
        *p = (0..dim).filter(|&j| j != i).map(|j| l[j] * l[j]).product();
    }
    let total: f64 = prods.iter().sum();
    let mut coeffs = [0.0; 3];
    for i in 0..dim {
        coeffs[i] = prods[i] / total;
    }
    Ok(CorrectionField {
        dim,
        center: cell.centroid(),
        coeffs,
    })
}

fn cell_rule(cell: &Cell) -> MappedRule {
    let axes: Vec<usize> = (0..cell.dim).collect();
    map_to_box(cached_tensor_rule(cell.dim), &cell.lo, &cell.hi, &axes)
}

/// L2 projection onto `span{e_j, grad(X_1^2 - X_j^2)}`, `X` centered at the
/// cell centroid, computed from a quadrature Gram system.
pub fn qh_project<F: Fn(&Point) -> Vector>(cell: &Cell, f: F) -> Result<LocalRtPoly> {
    let rule = cell_rule(cell);
    let samples: Vec<Vector> = rule.points.iter().map(f).collect();
    project_samples(cell, &rule, &samples)
}

fn project_samples(cell: &Cell, rule: &MappedRule, samples: &[Vector]) -> Result<LocalRtPoly> {
    let dim = cell.dim;
    let c = cell.centroid();
    let s = cell.diameter();
    let n = 2 * dim - 1;
    // span functions at x, scaled coordinates y = (x - c) / s
    let span = |x: &Point, k: usize| -> Vector {
        let mut v = [0.0; 3];
        if k < dim {
            v[k] = 1.0;
        } else {
            let j = k - dim + 1;
            v[0] = 2.0 * (x[0] - c[0]) / s;
            v[j] = -2.0 * (x[j] - c[j]) / s;
        }
        v
    };
    let dot = |a: &Vector, b: &Vector| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for ((x, &w), f) in rule.points.iter().zip(&rule.weights).zip(samples) {
        let psi: Vec<Vector> = (0..n).map(|k| span(x, k)).collect();
        for a in 0..n {
            rhs[a] += w * dot(&psi[a], f);
            for b in 0..n {
                gram[(a, b)] += w * dot(&psi[a], &psi[b]);
            }
        }
    }
    let coef = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("projection Gram matrix".into()))?;
    let mut alpha = [0.0; 3];
    let mut beta = [0.0; 3];
    alpha[..dim].copy_from_slice(&coef.as_slice()[..dim]);
    for j in 1..dim {
        let ck = coef[dim + j - 1];
        beta[0] += 2.0 * ck / s;
        beta[j] = -2.0 * ck / s;
    }
    Ok(LocalRtPoly {
        center: c,
        alpha,
        beta,
    })
}

/// One local RT polynomial per element, with no inter-element continuity.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenRtField {
    pub polys: Vec<LocalRtPoly>,
}

impl BrokenRtField {
    pub fn divergences(&self) -> Vec<f64> {
        self.polys.iter().map(|p| p.divergence()).collect()
    }
}

impl VectorField for BrokenRtField {
    fn eval_element(&self, e: usize, points: &[Point]) -> Result<Vec<Vector>> {
        let p = &self.polys[e];
        Ok(points.iter().map(|x| p.eval(x)).collect())
    }
}

/// How the residual load `f - b . grad u_h - c u_h` is sampled per element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadSample {
    /// Point value at the element centroid.
    #[default]
    Centroid,
    /// Element mean by cell quadrature.
    CellMean,
}

/// The corrected flux: projected `a grad u_h` minus the correction field
/// times the sampled residual load.
pub fn corrected_flux(
    field: &DiscreteField<'_, TensorMesh>,
    problem: &ProblemSpec,
    sample: LoadSample,
) -> Result<BrokenRtField> {
    let mesh = field.space;
    let mut polys = Vec::with_capacity(mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let cell = mesh.cell(e);
        let view = field.element(e)?;
        let rule = cell_rule(&cell);
        let residual = |x: &Point| {
            let (u, g) = view.value_grad(x);
            let b = problem.b(x);
            problem.f(x) - (b[0] * g[0] + b[1] * g[1] + b[2] * g[2]) - problem.c(x) * u
        };
        let samples: Vec<Vector> = rule
            .points
            .iter()
            .map(|x| {
                let a = problem.a(x);
                let g = view.value_grad(x).1;
                [a * g[0], a * g[1], a * g[2]]
            })
            .collect();
        let q = project_samples(&cell, &rule, &samples)?;
        let load = match sample {
            LoadSample::Centroid => residual(&cell.centroid()),
            LoadSample::CellMean => rule.integrate(residual) / rule.measure(),
        };
        let r = correction_field(&cell)?;
        polys.push(q.minus_scaled(load, &r.poly()));
    }
    Ok(BrokenRtField { polys })
}

/// `grad_h u_h - fbar_K r_h` for an element-wise constant load `fbar`.
pub fn corrected_gradient(field: &DiscreteField<'_, TensorMesh>, fbar: &[f64]) -> Result<BrokenRtField> {
    let mesh = field.space;
    let mut polys = Vec::with_capacity(mesh.num_elements());
    for (e, &fe) in fbar.iter().enumerate().take(mesh.num_elements()) {
        let view = field.element(e)?;
        let g = view.basis.gradient_poly(&view.local[..view.basis.len()]);
        let r = correction_field(&mesh.cell(e))?;
        polys.push(g.minus_scaled(fe, &r.poly()));
    }
    Ok(BrokenRtField { polys })
}

/// The broken gradient `grad_h u_h` as local RT polynomials.
pub fn broken_gradient<S: Discretization + ?Sized>(field: &DiscreteField<'_, S>) -> Result<BrokenRtField> {
    let mut polys = Vec::with_capacity(field.space.num_elements());
    for e in 0..field.space.num_elements() {
        let view = field.element(e)?;
        polys.push(view.basis.gradient_poly(&view.local[..view.basis.len()]));
    }
    Ok(BrokenRtField { polys })
}

/// Canonical RT interpolant: facet normal-flux means are taken with the facet
/// Gauss rule, once per facet, so the result is normal-continuous.
pub fn rt_interpolate<F: Fn(&Point) -> Vector>(mesh: &TensorMesh, tau: F) -> BrokenRtField {
    let means: Vec<f64> = mesh
        .facets()
        .iter()
        .enumerate()
        .map(|(f, facet)| {
            let rule = mesh.facet_rule(f);
            rule.integrate(|x| tau(x)[facet.axis]) / rule.measure()
        })
        .collect();
    let polys = (0..mesh.num_elements())
        .map(|e| {
            let cell = mesh.cell(e);
            let l = cell.lengths();
            let facets = mesh.element_facets(e);
            let mut p = LocalRtPoly {
                center: cell.centroid(),
                ..Default::default()
            };
            for j in 0..cell.dim {
                let (lo, hi) = (means[facets[2 * j]], means[facets[2 * j + 1]]);
                p.alpha[j] = 0.5 * (lo + hi);
                p.beta[j] = (hi - lo) / l[j];
            }
            p
        })
        .collect();
    BrokenRtField { polys }
}

/// Largest normal jump of a broken field over interior facets, sampled at the facet quadrature points.
pub fn jump_oracle<S: Discretization + ?Sized>(space: &S, field: &BrokenRtField) -> f64 {
    let mut worst: f64 = 0.0;
    for f in 0..space.num_facets() {
        let elems = space.facet_elements(f);
        if elems.len() != 2 {
            continue;
        }
        let n = space.facet_normal(f);
        let rule = space.facet_rule(f);
        for x in &rule.points {
            let a = field.polys[elems[0]].eval(x);
            let b = field.polys[elems[1]].eval(x);
            let jump: f64 = (0..3).map(|j| (a[j] - b[j]) * n[j]).sum();
            worst = worst.max(jump.abs());
        }
    }
    worst
}

/// A vector field with every component in the midpoint-continuous space,
/// stored as one value per facet midpoint.
#[derive(Debug, Clone)]
pub struct RecoveredFlux<'a, S: ?Sized> {
    pub space: &'a S,
    pub values: Vec<Vector>,
}

impl<S: Discretization + ?Sized> VectorField for RecoveredFlux<'_, S> {
    fn eval_element(&self, e: usize, points: &[Point]) -> Result<Vec<Vector>> {
        let basis = self.space.midpoint_basis(e)?;
        let facets = self.space.element_facets(e);
        Ok(points
            .iter()
            .map(|x| {
                let ev = basis.eval(x);
                let mut v = [0.0; 3];
                for (l, &f) in facets.iter().enumerate() {
                    for j in 0..3 {
                        v[j] += ev.values[l] * self.values[f][j];
                    }
                }
                v
            })
            .collect())
    }
}

/// Midpoint averaging on rectangles.
pub fn apply_ah<'a>(mesh: &'a TensorMesh, field: &BrokenRtField) -> Result<RecoveredFlux<'a, TensorMesh>> {
    if mesh.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: mesh.dim(),
        });
    }
    average_facets(mesh, field)
}

/// Face-midpoint averaging on boxes, with volumes as weights.
pub fn apply_ah3<'a>(mesh: &'a TensorMesh, field: &BrokenRtField) -> Result<RecoveredFlux<'a, TensorMesh>> {
    if mesh.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: mesh.dim(),
        });
    }
    average_facets(mesh, field)
}

/// [`apply_ah`] or [`apply_ah3`] according to the mesh dimension.
pub fn recover<'a>(mesh: &'a TensorMesh, field: &BrokenRtField) -> Result<RecoveredFlux<'a, TensorMesh>> {
    average_facets(mesh, field)
}

fn average_facets<'a>(mesh: &'a TensorMesh, field: &BrokenRtField) -> Result<RecoveredFlux<'a, TensorMesh>> {
    if field.polys.len() != mesh.num_elements() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_elements(),
            found: field.polys.len(),
        });
    }
    let vol: Vec<f64> = (0..mesh.num_elements()).map(|e| mesh.cell(e).volume()).collect();
    let mut values = vec![[0.0; 3]; mesh.num_facets()];
    for (f, facet) in mesh.facets().iter().enumerate() {
        if let (Some(km), Some(kp)) = (facet.minus, facet.plus) {
            let m = facet.centroid;
            let (tm, tp) = (field.polys[km].eval(&m), field.polys[kp].eval(&m));
            let (vm, vp) = (vol[km], vol[kp]);
            for j in 0..3 {
                values[f][j] = (vm * tp[j] + vp * tm[j]) / (vm + vp);
            }
        }
    }
    for (f, facet) in mesh.facets().iter().enumerate() {
        if !facet.is_boundary() {
            continue;
        }
        let k = facet.elements().next().expect("boundary facet has an element");
        let local = mesh
            .element_facets(k)
            .iter()
            .position(|&g| g == f)
            .expect("facet belongs to its element");
        let opposite = 2 * (local / 2) + (1 - local % 2);
        let f1 = mesh.element_facets(k)[opposite];
        let Some(k1) = mesh.neighbor(k, opposite) else {
            return Err(Error::MeshTooThin { facet: f });
        };
        let f2 = mesh.element_facets(k1)[opposite];
        let far = if mesh.facet(f2).is_boundary() {
            field.polys[k1].eval(&mesh.facet(f2).centroid)
        } else {
            values[f2]
        };
        let w = vol[k1] / (vol[k] + vol[k1]);
        let w1 = vol[k] / (vol[k] + vol[k1]);
        for j in 0..3 {
            values[f][j] = (values[f1][j] - w1 * far[j]) / w;
        }
    }
    Ok(RecoveredFlux { space: mesh, values })
}
