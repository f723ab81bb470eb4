//! Local bases for the rotated bilinear and Crouzeix-Raviart elements, and
//! local Raviart-Thomas type vector polynomials.
//!
//! Every basis is obtained by applying its degrees of freedom to a monomial
//! span and inverting the resulting generalized Vandermonde matrix. Monomials
//! are taken in centered, scaled coordinates `y = (x - center) / scale` to keep
//! the small dense systems well conditioned; the span is unchanged because
//! `x_1^2 - x_j^2` differs from `s^2 (y_1^2 - y_j^2)` only by affine terms.

use nalgebra::DMatrix;

use crate::mesh::Cell;
use crate::quadrature::{map_to_box, tensor_rule};
use crate::{Error, Point, Result, Vector};

/// Maximum number of local degrees of freedom (3D rotated element).
pub const MAX_LOCAL: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Rotated bilinear element with facet-mean degrees of freedom.
    NcrtMean,
    /// Rotated bilinear element with facet-midpoint values.
    NcrtMidpoint,
    /// Linear triangle with edge-midpoint values.
    CrouzeixRaviart,
}

/// A dual basis on one element.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    kind: BasisKind,
    dim: usize,
    n: usize,
    center: Point,
    scale: f64,
    /// `coeffs[m][k]`: coefficient of monomial `k` in basis function `m`.
    coeffs: [[f64; MAX_LOCAL]; MAX_LOCAL],
}

/// Values and gradients of all local basis functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEval {
    pub values: [f64; MAX_LOCAL],
    pub grads: [Vector; MAX_LOCAL],
}

/// Monomials and their `y`-gradients: rotated span for `ncrt`, linear otherwise.
fn monomials(dim: usize, ncrt: bool, y: &Point) -> ([f64; MAX_LOCAL], [Vector; MAX_LOCAL]) {
    let mut v = [0.0; MAX_LOCAL];
    let mut g = [[0.0; 3]; MAX_LOCAL];
    v[0] = 1.0;
    for j in 0..dim {
        v[1 + j] = y[j];
        g[1 + j][j] = 1.0;
    }
    if ncrt {
        for j in 1..dim {
            let k = dim + j;
            v[k] = y[0] * y[0] - y[j] * y[j];
            g[k][0] = 2.0 * y[0];
            g[k][j] = -2.0 * y[j];
        }
    }
    (v, g)
}

impl LocalBasis {
    fn from_functionals<F>(
        kind: BasisKind,
        dim: usize,
        n: usize,
        center: Point,
        scale: f64,
        element: usize,
        mut functional: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, &dyn Fn(&Point) -> [f64; MAX_LOCAL]) -> [f64; MAX_LOCAL],
    {
        let ncrt = kind != BasisKind::CrouzeixRaviart;
        let mono = move |x: &Point| {
            let mut y = [0.0; 3];
            for j in 0..dim {
                y[j] = (x[j] - center[j]) / scale;
            }
            monomials(dim, ncrt, &y).0
        };
        let mut vander = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let row = functional(i, &mono);
            for k in 0..n {
                vander[(i, k)] = row[k];
            }
        }
        let inv = vander.try_inverse().ok_or_else(|| {
            Error::SingularSystem(format!("dual system of element {element} is singular"))
        })?;
        let mut coeffs = [[0.0; MAX_LOCAL]; MAX_LOCAL];
        for (m, row) in coeffs.iter_mut().enumerate().take(n) {
            for (k, c) in row.iter_mut().enumerate().take(n) {
                *c = inv[(k, m)];
            }
        }
        Ok(LocalBasis {
            kind,
            dim,
            n,
            center,
            scale,
            coeffs,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of local basis functions.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eval(&self, x: &Point) -> BasisEval {
        let mut y = [0.0; 3];
        for j in 0..self.dim {
            y[j] = (x[j] - self.center[j]) / self.scale;
        }
        let (mv, mg) = monomials(self.dim, self.kind != BasisKind::CrouzeixRaviart, &y);
        let mut out = BasisEval {
            values: [0.0; MAX_LOCAL],
            grads: [[0.0; 3]; MAX_LOCAL],
        };
        for m in 0..self.n {
            let c = &self.coeffs[m];
            let mut val = 0.0;
            let mut grad = [0.0; 3];
            for k in 0..self.n {
                val += c[k] * mv[k];
                for j in 0..self.dim {
                    grad[j] += c[k] * mg[k][j];
                }
            }
            out.values[m] = val;
            for j in 0..self.dim {
                out.grads[m][j] = grad[j] / self.scale;
            }
        }
        out
    }

    /// Value and gradient of `sum_m dofs[m] * phi_m` at `x`.
    pub fn combine(&self, dofs: &[f64], x: &Point) -> (f64, Vector) {
        let ev = self.eval(x);
        let mut val = 0.0;
        let mut grad = [0.0; 3];
        for m in 0..self.n {
            val += dofs[m] * ev.values[m];
            for j in 0..3 {
                grad[j] += dofs[m] * ev.grads[m][j];
            }
        }
        (val, grad)
    }

    /// The gradient of `sum_m dofs[m] * phi_m` written as a local RT polynomial.
    ///
    /// Gradients of the rotated span have component `j` affine in `x_j` alone,
    /// and linear functions have constant gradients, so the conversion is exact.
    pub fn gradient_poly(&self, dofs: &[f64]) -> LocalRtPoly {
        let mut a = [0.0; MAX_LOCAL];
        for m in 0..self.n {
            for k in 0..self.n {
                a[k] += self.coeffs[m][k] * dofs[m];
            }
        }
        let mut alpha = [0.0; 3];
        let mut beta = [0.0; 3];
        for j in 0..self.dim {
            alpha[j] = a[1 + j] / self.scale;
        }
        if self.kind != BasisKind::CrouzeixRaviart {
            let s2 = self.scale * self.scale;
            for j in 1..self.dim {
                let q = a[self.dim + j];
                beta[0] += 2.0 * q / s2;
                beta[j] = -2.0 * q / s2;
            }
        }
        LocalRtPoly {
            center: self.center,
            alpha,
            beta,
        }
    }
}

fn check_cell(cell: &Cell, element: usize) -> Result<()> {
    let l = cell.lengths();
    if l[..cell.dim].iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::DegenerateElement {
            element,
            reason: format!("non-positive extent {:?}", &l[..cell.dim]),
        });
    }
    Ok(())
}

/// Rotated bilinear basis dual to the facet means, facets in the mesh's local order.
///
/// Facet means are evaluated with the tensor Gauss rule, exact for these traces.
pub fn ncrt_basis_mean(cell: &Cell) -> Result<LocalBasis> {
    ncrt_basis_mean_for(cell, 0)
}

pub(crate) fn ncrt_basis_mean_for(cell: &Cell, element: usize) -> Result<LocalBasis> {
    check_cell(cell, element)?;
    let dim = cell.dim;
    let face_rule = tensor_rule(dim - 1)?;
    LocalBasis::from_functionals(
        BasisKind::NcrtMean,
        dim,
        2 * dim,
        cell.centroid(),
        cell.diameter(),
        element,
        |i, mono| {
            let (axis, side) = (i / 2, i % 2);
            let face = cell.face(axis, side);
            let axes: Vec<usize> = (0..dim).filter(|&j| j != axis).collect();
            let rule = map_to_box(&face_rule, &face.lo, &face.hi, &axes);
            let measure = rule.measure();
            let mut row = [0.0; MAX_LOCAL];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let v = mono(p);
                for k in 0..MAX_LOCAL {
                    row[k] += w * v[k];
                }
            }
            row.iter_mut().for_each(|r| *r /= measure);
            row
        },
    )
}

/// Rotated bilinear basis dual to point values at facet centroids.
pub fn ncrt_basis_midpoint(cell: &Cell) -> Result<LocalBasis> {
    ncrt_basis_midpoint_for(cell, 0)
}

pub(crate) fn ncrt_basis_midpoint_for(cell: &Cell, element: usize) -> Result<LocalBasis> {
    check_cell(cell, element)?;
    let dim = cell.dim;
    LocalBasis::from_functionals(
        BasisKind::NcrtMidpoint,
        dim,
        2 * dim,
        cell.centroid(),
        cell.diameter(),
        element,
        |i, mono| mono(&cell.face(i / 2, i % 2).centroid()),
    )
}

/// Crouzeix-Raviart basis on a triangle; function `i` is one at the midpoint
/// of the edge opposite corner `i`.
pub fn cr_basis(corners: &[Point; 3]) -> Result<LocalBasis> {
    cr_basis_for(corners, 0)
}

pub(crate) fn cr_basis_for(corners: &[Point; 3], element: usize) -> Result<LocalBasis> {
    let center = [
        (corners[0][0] + corners[1][0] + corners[2][0]) / 3.0,
        (corners[0][1] + corners[1][1] + corners[2][1]) / 3.0,
        0.0,
    ];
    let d = |a: &Point, b: &Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let scale = d(&corners[0], &corners[1])
        .max(d(&corners[1], &corners[2]))
        .max(d(&corners[2], &corners[0]));
    if !(scale > 0.0) {
        return Err(Error::DegenerateElement {
            element,
            reason: "coincident corners".into(),
        });
    }
    LocalBasis::from_functionals(
        BasisKind::CrouzeixRaviart,
        2,
        3,
        center,
        scale,
        element,
        |i, mono| {
            let a = corners[(i + 1) % 3];
            let b = corners[(i + 2) % 3];
            mono(&[0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.0])
        },
    )
}

/// Values and gradients of every basis function at every point.
pub fn eval_basis(basis: &LocalBasis, points: &[Point]) -> Vec<BasisEval> {
    points.iter().map(|p| basis.eval(p)).collect()
}

/// A vector polynomial whose component `j` is `alpha_j + beta_j (x_j - center_j)`.
///
/// This covers the local rectangular and cubical Raviart-Thomas spaces, and,
/// with all `beta_j` equal, the triangular one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalRtPoly {
    pub center: Point,
    pub alpha: Vector,
    pub beta: Vector,
}

impl LocalRtPoly {
    pub fn constant(center: Point, value: Vector) -> Self {
        LocalRtPoly {
            center,
            alpha: value,
            beta: [0.0; 3],
        }
    }

    pub fn eval(&self, x: &Point) -> Vector {
        let mut v = [0.0; 3];
        for j in 0..3 {
            v[j] = self.alpha[j] + self.beta[j] * (x[j] - self.center[j]);
        }
        v
    }

    /// The divergence, constant on the element.
    pub fn divergence(&self) -> f64 {
        self.beta.iter().sum()
    }

    /// `self - s * other`, both centered at `self.center`.
    pub fn minus_scaled(&self, s: f64, other: &LocalRtPoly) -> LocalRtPoly {
        let shifted = other.recentered(self.center);
        let mut out = *self;
        for j in 0..3 {
            out.alpha[j] -= s * shifted.alpha[j];
            out.beta[j] -= s * shifted.beta[j];
        }
        out
    }

    /// The same polynomial expanded about a different center.
    pub fn recentered(&self, center: Point) -> LocalRtPoly {
        LocalRtPoly {
            center,
            alpha: self.eval(&center),
            beta: self.beta,
        }
    }
}

/// Evaluates a local RT polynomial at many points.
pub fn eval_rtpoly(poly: &LocalRtPoly, points: &[Point]) -> Vec<Vector> {
    points.iter().map(|p| poly.eval(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss1d_4;

    fn rect(x0: f64, y0: f64, lx: f64, ly: f64) -> Cell {
        Cell {
            dim: 2,
            lo: [x0, y0, 0.0],
            hi: [x0 + lx, y0 + ly, 0.0],
        }
    }

    fn cube(lo: Point, l: [f64; 3]) -> Cell {
        Cell {
            dim: 3,
            lo,
            hi: [lo[0] + l[0], lo[1] + l[1], lo[2] + l[2]],
        }
    }

    fn facet_mean(cell: &Cell, i: usize, f: impl Fn(&Point) -> f64) -> f64 {
        let dim = cell.dim;
        let face = cell.face(i / 2, i % 2);
        let axes: Vec<usize> = (0..dim).filter(|&j| j != i / 2).collect();
        let rule = map_to_box(&tensor_rule(dim - 1).unwrap(), &face.lo, &face.hi, &axes);
        rule.integrate(|p| f(p)) / rule.measure()
    }

    #[test]
    fn mean_basis_is_dual_2d_and_3d() {
        for cell in [rect(0.1, 0.3, 0.4, 0.7), cube([0.2, 0.0, 0.5], [0.3, 0.6, 0.45])] {
            let b = ncrt_basis_mean(&cell).unwrap();
            assert_eq!(b.len(), 2 * cell.dim);
            for m in 0..b.len() {
                for i in 0..b.len() {
                    let got = facet_mean(&cell, i, |p| b.eval(p).values[m]);
                    let want = if i == m { 1.0 } else { 0.0 };
                    assert!((got - want).abs() < 1e-12, "dof {i} of phi {m}: {got}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let cell = rect(0.0, 0.0, 0.4, 0.7);
        for b in [ncrt_basis_mean(&cell).unwrap(), ncrt_basis_midpoint(&cell).unwrap()] {
            for p in [[0.1, 0.2, 0.0], [0.35, 0.05, 0.0], [0.2, 0.35, 0.0]] {
                let ev = b.eval(&p);
                let s: f64 = ev.values[..4].iter().sum();
                assert!((s - 1.0).abs() < 1e-13);
                for j in 0..2 {
                    let g: f64 = ev.grads[..4].iter().map(|g| g[j]).sum();
                    assert!(g.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn integral_of_vertical_edge_function() {
        // vertical edge functions integrate to |K| l2^2 / (2 (l1^2 + l2^2))
        for (l1, l2) in [(0.4, 0.7), (1.0, 1.0), (0.2, 0.9)] {
            let cell = rect(0.3, -0.1, l1, l2);
            let b = ncrt_basis_mean(&cell).unwrap();
            let rule = map_to_box(&tensor_rule(2).unwrap(), &cell.lo, &cell.hi, &[0, 1]);
            let expected = l1 * l2 * l2 * l2 / (2.0 * (l1 * l1 + l2 * l2));
            for m in [0, 1] {
                let got = rule.integrate(|p| b.eval(p).values[m]);
                assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
            }
            let expected_h = l1 * l2 * l1 * l1 / (2.0 * (l1 * l1 + l2 * l2));
            for m in [2, 3] {
                let got = rule.integrate(|p| b.eval(p).values[m]);
                assert!((got - expected_h).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reproduces_span_members() {
        let cell = rect(0.0, 0.0, 1.0, 1.0);
        let b = ncrt_basis_mean(&cell).unwrap();
        let f = |p: &Point| p[0];
        let dofs: Vec<f64> = (0..4).map(|i| facet_mean(&cell, i, f)).collect();
        let rule = map_to_box(&tensor_rule(2).unwrap(), &cell.lo, &cell.hi, &[0, 1]);
        for p in &rule.points {
            assert!((b.combine(&dofs, p).0 - p[0]).abs() < 1e-13);
        }
        // midpoint interpolation of x1^2 - x2^2 is exact
        let cell = rect(0.2, 0.1, 0.4, 0.7);
        let b = ncrt_basis_midpoint(&cell).unwrap();
        let q = |p: &Point| p[0] * p[0] - p[1] * p[1];
        let dofs: Vec<f64> = (0..4).map(|i| q(&cell.face(i / 2, i % 2).centroid())).collect();
        for p in &rule.points {
            let x = [0.2 + 0.4 * p[0], 0.1 + 0.7 * p[1], 0.0];
            assert!((b.combine(&dofs, &x).0 - q(&x)).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_and_midpoint_bases_span_the_same_space() {
        let cell = cube([0.0, 0.0, 0.0], [0.25, 0.6, 0.4]);
        let mean = ncrt_basis_mean(&cell).unwrap();
        let mid = ncrt_basis_midpoint(&cell).unwrap();
        // change of basis: mid_m = sum_i mean-dof_i(mid_m) mean_i
        let mut t = DMatrix::<f64>::zeros(6, 6);
        for m in 0..6 {
            for i in 0..6 {
                t[(i, m)] = facet_mean(&cell, i, |p| mid.eval(p).values[m]);
            }
        }
        let sv = t.clone().svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        assert!(cond.is_finite() && cond < 100.0, "condition {cond}");
        for p in [[0.1, 0.2, 0.3], [0.01, 0.59, 0.05]] {
            let me = mean.eval(&p);
            let md = mid.eval(&p);
            for m in 0..6 {
                let rebuilt: f64 = (0..6).map(|i| t[(i, m)] * me.values[i]).sum();
                assert!((rebuilt - md.values[m]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let cell = cube([0.1, 0.2, 0.3], [0.3, 0.5, 0.2]);
        let b = ncrt_basis_mean(&cell).unwrap();
        let p = [0.23, 0.41, 0.37];
        let step = 1e-6;
        let ev = b.eval(&p);
        for j in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[j] += step;
            pm[j] -= step;
            let (vp, vm) = (b.eval(&pp), b.eval(&pm));
            for m in 0..6 {
                let fd = (vp.values[m] - vm.values[m]) / (2.0 * step);
                assert!((fd - ev.grads[m][j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let cell = rect(0.0, 0.0, 0.3, 0.8);
        let b = ncrt_basis_mean(&cell).unwrap();
        let (v, g) = b.combine(&[2.5; 4], &[0.1, 0.4, 0.0]);
        assert!((v - 2.5).abs() < 1e-13);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn cr_basis_matches_barycentric_identity() {
        let corners = [[0.1, 0.0, 0.0], [0.9, 0.2, 0.0], [0.3, 0.7, 0.0]];
        let b = cr_basis(&corners).unwrap();
        let bary = |p: &Point| {
            let det = (corners[1][0] - corners[0][0]) * (corners[2][1] - corners[0][1])
                - (corners[2][0] - corners[0][0]) * (corners[1][1] - corners[0][1]);
            let l1 = ((p[0] - corners[0][0]) * (corners[2][1] - corners[0][1])
                - (corners[2][0] - corners[0][0]) * (p[1] - corners[0][1]))
                / det;
            let l2 = ((corners[1][0] - corners[0][0]) * (p[1] - corners[0][1])
                - (p[0] - corners[0][0]) * (corners[1][1] - corners[0][1]))
                / det;
            [1.0 - l1 - l2, l1, l2]
        };
        for p in [[0.3, 0.2, 0.0], [0.5, 0.3, 0.0], [0.2, 0.1, 0.0]] {
            let ev = b.eval(&p);
            let l = bary(&p);
            for i in 0..3 {
                assert!((ev.values[i] - (1.0 - 2.0 * l[i])).abs() < 1e-13);
            }
            assert!((ev.values[..3].iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
        let g0 = b.eval(&[0.3, 0.2, 0.0]).grads;
        let g1 = b.eval(&[0.6, 0.3, 0.0]).grads;
        assert_eq!(g0[..3], g1[..3]);
    }

    #[test]
    fn degenerate_cells_are_rejected() {
        let flat = rect(0.0, 0.0, 0.5, 0.0);
        assert!(matches!(ncrt_basis_mean(&flat), Err(Error::DegenerateElement { .. })));
        let same = [[0.0; 3]; 3];
        assert!(cr_basis(&same).is_err());
    }

    #[test]
    fn gradient_poly_matches_pointwise_gradient() {
        let cell = cube([0.0, 0.1, 0.2], [0.4, 0.3, 0.5]);
        let b = ncrt_basis_mean(&cell).unwrap();
        let dofs = [0.3, -1.2, 0.8, 2.0, -0.4, 0.9];
        let poly = b.gradient_poly(&dofs);
        for p in [[0.1, 0.2, 0.3], [0.35, 0.38, 0.65]] {
            let (_, g) = b.combine(&dofs, &p);
            let v = poly.eval(&p);
            for j in 0..3 {
                assert!((g[j] - v[j]).abs() < 1e-11);
            }
        }
        // 3D quadratic term gradient: d/dx (x1^2 - x2^2) = (2 x1, -2 x2, 0)
        let q = |p: &Point| p[0] * p[0] - p[1] * p[1];
        let rule = gauss1d_4();
        let dofs: Vec<f64> = (0..6).map(|i| facet_mean(&cell, i, q)).collect();
        for r in &rule.points {
            let p = [r[0] * 0.4, 0.1 + r[0] * 0.3, 0.2 + 0.5 * r[0]];
            let (_, g) = b.combine(&dofs, &p);
            assert!((g[0] - 2.0 * p[0]).abs() < 1e-11);
            assert!((g[1] + 2.0 * p[1]).abs() < 1e-11);
            assert!(g[2].abs() < 1e-11);
        }
    }

    #[test]
    fn rt_poly_evaluation() {
        let c = [0.5, 0.5, 0.0];
        let k = LocalRtPoly::constant(c, [1.0, -2.0, 0.0]);
        assert_eq!(eval_rtpoly(&k, &[[0.0; 3], [3.0, 1.0, 0.0]]), vec![[1.0, -2.0, 0.0]; 2]);
        let rot = LocalRtPoly {
            center: [0.0; 3],
            alpha: [0.0; 3],
            beta: [1.0, -1.0, 0.0],
        };
        assert_eq!(rot.divergence(), 0.0);
        let r = LocalRtPoly {
            center: c,
            alpha: [0.0; 3],
            beta: [0.5, 0.5, 0.0],
        };
        assert_eq!(r.eval(&c), [0.0; 3]);
        let shifted = r.recentered([0.0; 3]);
        assert_eq!(shifted.eval(&[0.2, 0.9, 0.0]), r.eval(&[0.2, 0.9, 0.0]));
    }
}
