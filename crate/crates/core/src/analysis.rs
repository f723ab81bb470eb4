//! L2 error norms over the element quadrature and least-squares order fits.

use crate::assembly::{DiscreteField, Discretization};
use crate::problems::ProblemSpec;
use crate::{Point, Result, Vector};

/// A scalar field that can be evaluated element by element.
pub trait ScalarField {
    fn eval_element(&self, e: usize, points: &[Point]) -> Result<Vec<f64>>;
}

/// A vector field that can be evaluated element by element.
pub trait VectorField {
    fn eval_element(&self, e: usize, points: &[Point]) -> Result<Vec<Vector>>;
}

/// A scalar closure defined on the whole domain.
#[derive(Debug, Clone, Copy)]
pub struct FnScalar<F>(pub F);

/// A vector closure defined on the whole domain.
#[derive(Debug, Clone, Copy)]
pub struct FnVector<F>(pub F);

impl<F: Fn(&Point) -> f64> ScalarField for FnScalar<F> {
    fn eval_element(&self, _e: usize, points: &[Point]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|p| (self.0)(p)).collect())
    }
}

impl<F: Fn(&Point) -> Vector> VectorField for FnVector<F> {
    fn eval_element(&self, _e: usize, points: &[Point]) -> Result<Vec<Vector>> {
        Ok(points.iter().map(|p| (self.0)(p)).collect())
    }
}

impl<S: Discretization + ?Sized> ScalarField for DiscreteField<'_, S> {
    fn eval_element(&self, e: usize, points: &[Point]) -> Result<Vec<f64>> {
        let view = self.element(e)?;
        Ok(points.iter().map(|p| view.value_grad(p).0).collect())
    }
}

/// The broken flux `a grad u_h` of a discrete field.
pub struct DiscreteFlux<'a, 'b, S: ?Sized> {
    pub field: &'a DiscreteField<'b, S>,
    pub problem: &'a ProblemSpec,
}

impl<S: Discretization + ?Sized> VectorField for DiscreteFlux<'_, '_, S> {
    fn eval_element(&self, e: usize, points: &[Point]) -> Result<Vec<Vector>> {
        let view = self.field.element(e)?;
        Ok(points
            .iter()
            .map(|p| {
                let a = self.problem.a(p);
                let g = view.value_grad(p).1;
                [a * g[0], a * g[1], a * g[2]]
            })
            .collect())
    }
}

/// `||u - v||` over the domain using each element's cell rule.
pub fn l2_scalar_diff<S, U, V>(space: &S, u: &U, v: &V) -> Result<f64>
where
    S: Discretization + ?Sized,
    U: ScalarField + ?Sized,
    V: ScalarField + ?Sized,
{
    let mut sum = 0.0;
    for e in 0..space.num_elements() {
        let rule = space.cell_rule(e);
        let a = u.eval_element(e, &rule.points)?;
        let b = v.eval_element(e, &rule.points)?;
        for ((x, y), w) in a.iter().zip(&b).zip(&rule.weights) {
            sum += w * (x - y) * (x - y);
        }
    }
    Ok(sum.sqrt())
}

/// Componentwise `||u - v||` over the domain.
pub fn l2_vector_diff<S, U, V>(space: &S, u: &U, v: &V) -> Result<f64>
where
    S: Discretization + ?Sized,
    U: VectorField + ?Sized,
    V: VectorField + ?Sized,
{
    let mut sum = 0.0;
    for e in 0..space.num_elements() {
        let rule = space.cell_rule(e);
        let a = u.eval_element(e, &rule.points)?;
        let b = v.eval_element(e, &rule.points)?;
        for ((x, y), w) in a.iter().zip(&b).zip(&rule.weights) {
            let d2: f64 = (0..3).map(|j| (x[j] - y[j]).powi(2)).sum();
            sum += w * d2;
        }
    }
    Ok(sum.sqrt())
}

/// Least-squares slope of `log(err)` against `log(h)` after dropping the first
/// `skip` rows. Non-positive errors are dropped with a warning. Returns `None`
/// when fewer than two rows remain.
pub fn fit_order(h: &[f64], err: &[f64], skip: usize) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, (&hi, &ei)) in h.iter().zip(err).enumerate().skip(skip) {
        if !(ei > 0.0) || !(hi > 0.0) {
            log::warn!("row {i}: non-positive value (h = {hi}, err = {ei}) left out of the fit");
            continue;
        }
        xs.push(hi.ln());
        ys.push(ei.ln());
    }
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{facet_means, reconstruct_field};
    use crate::mesh::TensorMesh;

    #[test]
    fn exact_power_law() {
        let h: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!((fit_order(&h, &e, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((fit_order(&h, &e, 3).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_slope() {
        let (h, e) = ([0.3, 0.1], [2e-2, 1e-3]);
        let p = fit_order(&h, &e, 0).unwrap();
        assert!((p - (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).abs() < 1e-13);
    }

    #[test]
    fn bad_rows_are_dropped() {
        let h = [1.0, 0.5, 0.25, 0.125];
        let e = [0.0, 0.25, 0.0625, 0.015625];
        assert!((fit_order(&h, &e, 0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_order(&h, &[0.0, -1.0, 0.0, 1.0], 0), None);
        assert_eq!(fit_order(&h, &e, 3), None);
    }

    #[test]
    fn norm_basics() {
        let mesh = TensorMesh::uniform(2, 3).unwrap().perturb(0.2, 1).unwrap();
        let one = FnScalar(|_: &Point| 1.0);
        let zero = FnScalar(|_: &Point| 0.0);
        assert!((l2_scalar_diff(&mesh, &one, &zero).unwrap() - 1.0).abs() < 1e-14);
        let off = FnVector(|_: &Point| [3.0, 4.0, 0.0]);
        let nil = FnVector(|_: &Point| [0.0; 3]);
        assert!((l2_vector_diff(&mesh, &off, &nil).unwrap() - 5.0).abs() < 1e-13);
        assert_eq!(l2_vector_diff(&mesh, &off, &off).unwrap(), 0.0);
        // int over the unit square of (x^2 - y)^2 = 1/5 - 2 (1/3)(1/2) + 1/3
        let q = FnScalar(|x: &Point| x[0] * x[0]);
        let l = FnScalar(|x: &Point| x[1]);
        let v = l2_scalar_diff(&mesh, &q, &l).unwrap();
        assert!((v * v - 0.2).abs() < 1e-14);
    }

    #[test]
    fn interpolated_linear_has_zero_error() {
        let mesh = TensorMesh::uniform(2, 4).unwrap().perturb(0.2, 2).unwrap();
        let u = |x: &Point| 1.0 + 2.0 * x[0] - x[1];
        let field = reconstruct_field(&mesh, facet_means(&mesh, u));
        assert!(l2_scalar_diff(&mesh, &FnScalar(u), &field).unwrap() < 1e-12);
    }

    #[test]
    fn triangle_inequality_spot_checks() {
        use rand::{Rng, SeedableRng};
        let mesh = TensorMesh::uniform(2, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut d = || (0..mesh.num_facets()).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>();
            let (a, b, c) = (d(), d(), d());
            let (fa, fb, fc) = (
                reconstruct_field(&mesh, a),
                reconstruct_field(&mesh, b),
                reconstruct_field(&mesh, c),
            );
            let ab = l2_scalar_diff(&mesh, &fa, &fb).unwrap();
            let bc = l2_scalar_diff(&mesh, &fb, &fc).unwrap();
            let ac = l2_scalar_diff(&mesh, &fa, &fc).unwrap();
            assert!(ab >= 0.0 && ac <= ab + bc + 1e-14);
        }
    }
}
