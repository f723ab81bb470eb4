//! Manufactured solutions for `-div(a grad u) + b . grad u + c u = f`, `u = g` on the boundary.
//!
//! A problem supplies `u`, `grad u`, `lap u`, `a`, `grad a`, `b` and `c` in closed
//! form; the load is always synthesized as
//! `f = -a lap u - grad a . grad u + b . grad u + c u`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::{Error, Point, Result, Vector};

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> Vector + Send + Sync>;

/// Closed-form pieces of a problem, as supplied by the user.
#[derive(Clone)]
pub struct Evaluators {
    pub u: ScalarFn,
    pub grad_u: VectorFn,
    pub laplacian_u: ScalarFn,
    pub a: ScalarFn,
    pub grad_a: VectorFn,
    pub b: VectorFn,
    pub c: ScalarFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    dim: usize,
    ev: Evaluators,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

/// Points probed when checking that vector evaluators respect the dimension.
const PROBES: [Point; 3] = [[0.31, 0.47, 0.59], [0.83, 0.12, 0.26], [0.5, 0.5, 0.5]];

impl ProblemSpec {
    /// Wraps user evaluators. In 2D the vector evaluators must leave the third
    /// component at zero.
    pub fn custom(name: impl Into<String>, dim: usize, ev: Evaluators) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!("problem dimension must be 2 or 3, got {dim}")));
        }
        if dim == 2 {
            for p in PROBES {
                let q = [p[0], p[1], 0.0];
                for (what, v) in [("grad u", (ev.grad_u)(&q)), ("grad a", (ev.grad_a)(&q)), ("b", (ev.b)(&q))] {
                    if v[2] != 0.0 {
                        log::debug!("{what} has a third component in a 2D problem");
                        return Err(Error::DimensionMismatch {
                            expected: 2,
                            found: 3,
                        });
                    }
                }
            }
        }
        Ok(ProblemSpec {
            name: name.into(),
            dim,
            ev,
        })
    }

    pub fn evaluators(&self) -> &Evaluators {
        &self.ev
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn u(&self, x: &Point) -> f64 {
        (self.ev.u)(x)
    }

    pub fn grad_u(&self, x: &Point) -> Vector {
        (self.ev.grad_u)(x)
    }

    pub fn laplacian_u(&self, x: &Point) -> f64 {
        (self.ev.laplacian_u)(x)
    }

    pub fn a(&self, x: &Point) -> f64 {
        (self.ev.a)(x)
    }

    pub fn grad_a(&self, x: &Point) -> Vector {
        (self.ev.grad_a)(x)
    }

    pub fn b(&self, x: &Point) -> Vector {
        (self.ev.b)(x)
    }

    pub fn c(&self, x: &Point) -> f64 {
        (self.ev.c)(x)
    }

    /// Dirichlet data, the trace of `u`.
    pub fn g(&self, x: &Point) -> f64 {
        self.u(x)
    }

    /// The exact flux `a grad u`.
    pub fn flux(&self, x: &Point) -> Vector {
        let a = self.a(x);
        let g = self.grad_u(x);
        [a * g[0], a * g[1], a * g[2]]
    }

    pub fn f(&self, x: &Point) -> f64 {
        let gu = self.grad_u(x);
        let ga = self.grad_a(x);
        let b = self.b(x);
        let dot = |p: &Vector, q: &Vector| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
        -self.a(x) * self.laplacian_u(x) - dot(&ga, &gu) + dot(&b, &gu) + self.c(x) * self.u(x)
    }

    /// Whether `b` and `c` vanish, making the bilinear form symmetric.
    pub fn is_symmetric_form(&self) -> bool {
        PROBES.iter().all(|p| self.b(p) == [0.0; 3] && self.c(p) == 0.0)
    }
}

fn zero_vec() -> VectorFn {
    Arc::new(|_| [0.0; 3])
}

fn zero() -> ScalarFn {
    Arc::new(|_| 0.0)
}

/// `u = exp(2x+y) x^2 (x-1)^2 y^2 (y-1)^2`, `a = exp(x)`, `b = (x, y)`, `c = exp(x+y)` on the unit square.
pub fn problem1() -> ProblemSpec {
    // u = g(x) k(y), g = e^{2x} P(x), k = e^y P(y), P(t) = t^2 (t-1)^2
    fn p(t: f64) -> (f64, f64, f64) {
        (
            t * t * (t - 1.0) * (t - 1.0),
            4.0 * t * t * t - 6.0 * t * t + 2.0 * t,
            12.0 * t * t - 12.0 * t + 2.0,
        )
    }
    fn gx(x: f64) -> (f64, f64, f64) {
        let (p0, p1, p2) = p(x);
        let e = (2.0 * x).exp();
        (e * p0, e * (2.0 * p0 + p1), e * (4.0 * p0 + 4.0 * p1 + p2))
    }
    fn ky(y: f64) -> (f64, f64, f64) {
        let (p0, p1, p2) = p(y);
        let e = y.exp();
        (e * p0, e * (p0 + p1), e * (p0 + 2.0 * p1 + p2))
    }
    let ev = Evaluators {
        u: Arc::new(|x| gx(x[0]).0 * ky(x[1]).0),
        grad_u: Arc::new(|x| {
            let (g0, g1, _) = gx(x[0]);
            let (k0, k1, _) = ky(x[1]);
            [g1 * k0, g0 * k1, 0.0]
        }),
        laplacian_u: Arc::new(|x| {
            let (g0, _, g2) = gx(x[0]);
            let (k0, _, k2) = ky(x[1]);
            g2 * k0 + g0 * k2
        }),
        a: Arc::new(|x| x[0].exp()),
        grad_a: Arc::new(|x| [x[0].exp(), 0.0, 0.0]),
        b: Arc::new(|x| [x[0], x[1], 0.0]),
        c: Arc::new(|x| (x[0] + x[1]).exp()),
    };
    ProblemSpec::custom("p1", 2, ev).expect("problem 1 is two-dimensional")
}

/// `u = exp(x+y) sin(3 pi x) sin(2 pi y) sin(pi z)`, `a = exp(x+y+z)`, `b = 0`, `c = 0` on the unit cube.
pub fn problem2() -> ProblemSpec {
    // factor e^t sin(k pi t) and its first two derivatives
    fn es(t: f64, k: f64) -> (f64, f64, f64) {
        let w = k * PI;
        let (s, c) = (w * t).sin_cos();
        let e = t.exp();
        (e * s, e * (s + w * c), e * ((1.0 - w * w) * s + 2.0 * w * c))
    }
    fn sz(z: f64) -> (f64, f64, f64) {
        let (s, c) = (PI * z).sin_cos();
        (s, PI * c, -PI * PI * s)
    }
    let ev = Evaluators {
        u: Arc::new(|x| es(x[0], 3.0).0 * es(x[1], 2.0).0 * sz(x[2]).0),
        grad_u: Arc::new(|x| {
            let (a0, a1, _) = es(x[0], 3.0);
            let (b0, b1, _) = es(x[1], 2.0);
            let (c0, c1, _) = sz(x[2]);
            [a1 * b0 * c0, a0 * b1 * c0, a0 * b0 * c1]
        }),
        laplacian_u: Arc::new(|x| {
            let (a0, _, a2) = es(x[0], 3.0);
            let (b0, _, b2) = es(x[1], 2.0);
            let (c0, _, c2) = sz(x[2]);
            a2 * b0 * c0 + a0 * b2 * c0 + a0 * b0 * c2
        }),
        a: Arc::new(|x| (x[0] + x[1] + x[2]).exp()),
        grad_a: Arc::new(|x| {
            let e = (x[0] + x[1] + x[2]).exp();
            [e, e, e]
        }),
        b: zero_vec(),
        c: zero(),
    };
    ProblemSpec::custom("p2", 3, ev).expect("problem 2 is three-dimensional")
}

/// Affine `u` with constant `a`, `b = 0`, `c = 0`; every discretization here reproduces it.
pub fn linear(dim: usize) -> Result<ProblemSpec> {
    let coef: Vector = if dim == 2 { [1.0, 2.0, 0.0] } else { [1.0, 2.0, -1.0] };
    let ev = Evaluators {
        u: Arc::new(move |x| 0.5 + coef[0] * x[0] + coef[1] * x[1] + coef[2] * x[2]),
        grad_u: Arc::new(move |_| coef),
        laplacian_u: zero(),
        a: Arc::new(|_| 1.5),
        grad_a: zero_vec(),
        b: zero_vec(),
        c: zero(),
    };
    ProblemSpec::custom(format!("linear{dim}d"), dim, ev)
}

/// `u = prod sin(pi x_j)` with `a = 1 + x^2 + y^2/2 (+ z^2/4)`, `b = 0`, `c = 0`.
pub fn smooth(dim: usize) -> Result<ProblemSpec> {
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidInput(format!("problem dimension must be 2 or 3, got {dim}")));
    }
    let weights = [1.0, 0.5, 0.25];
    let u = move |x: &Point| (0..dim).map(|j| (PI * x[j]).sin()).product::<f64>();
    let ev = Evaluators {
        u: Arc::new(u),
        grad_u: Arc::new(move |x| {
            let mut g = [0.0; 3];
            for (j, gj) in g.iter_mut().enumerate().take(dim) {
                *gj = PI
                    * (PI * x[j]).cos()
                    * (0..dim).filter(|&k| k != j).map(|k| (PI * x[k]).sin()).product::<f64>();
            }
            g
        }),
        laplacian_u: Arc::new(move |x| -(dim as f64) * PI * PI * u(x)),
        a: Arc::new(move |x| 1.0 + (0..dim).map(|j| weights[j] * x[j] * x[j]).sum::<f64>()),
        grad_a: Arc::new(move |x| {
            let mut g = [0.0; 3];
            for (j, gj) in g.iter_mut().enumerate().take(dim) {
                *gj = 2.0 * weights[j] * x[j];
            }
            g
        }),
        b: zero_vec(),
        c: zero(),
    };
    ProblemSpec::custom(format!("smooth{dim}d"), dim, ev)
}

/// Laplace operator with zero solution; pair with a load override.
pub fn poisson_zero(dim: usize) -> Result<ProblemSpec> {
    let ev = Evaluators {
        u: zero(),
        grad_u: zero_vec(),
        laplacian_u: zero(),
        a: Arc::new(|_| 1.0),
        grad_a: zero_vec(),
        b: zero_vec(),
        c: zero(),
    };
    ProblemSpec::custom(format!("poisson{dim}d"), dim, ev)
}

/// Looks up a registered problem. `custom` and `linear` take the dimension of
/// the discretization they are used with.
pub fn by_name(name: &str, dim: usize) -> Result<ProblemSpec> {
    let p = match name {
        "p1" => problem1(),
        "p2" => problem2(),
        "custom" | "smooth" => smooth(dim)?,
        "linear" => linear(dim)?,
        other => return Err(Error::InvalidInput(format!("unknown problem '{other}'"))),
    };
    if p.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central differences of `u` for the gradient and Laplacian.
    fn fd(p: &ProblemSpec, x: &Point) -> (Vector, f64) {
        let h = 1e-5;
        let mut g = [0.0; 3];
        let mut lap = 0.0;
        let u0 = p.u(x);
        for j in 0..p.dim() {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let (up, um) = (p.u(&xp), p.u(&xm));
            g[j] = (up - um) / (2.0 * h);
            lap += (up - 2.0 * u0 + um) / (h * h);
        }
        (g, lap)
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [problem1(), problem2(), smooth(2).unwrap(), smooth(3).unwrap(), linear(3).unwrap()] {
            // tolerances are relative to the magnitude of each derivative over the domain
            let (mut scale_u, mut scale_lap) = (1e-3f64, 1e-3f64);
            for _ in 0..50 {
                let x = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
                scale_u = p.grad_u(&x).iter().fold(scale_u, |m, v| m.max(v.abs()));
                scale_lap = scale_lap.max(p.laplacian_u(&x).abs());
            }
            for _ in 0..100 {
                let mut x: Point = [0.0; 3];
                for xj in x.iter_mut().take(p.dim()) {
                    *xj = rng.random_range(0.01..0.99);
                }
                let (g, lap) = fd(&p, &x);
                let ge = p.grad_u(&x);
                for j in 0..3 {
                    assert!((g[j] - ge[j]).abs() <= 1e-5 * scale_u, "{} grad", p.name());
                }
                let le = p.laplacian_u(&x);
                // the second difference cannot resolve below its rounding floor eps |u| / h^2
                let floor = 8.0 * f64::EPSILON * p.u(&x).abs().max(1.0) / 1e-10;
                assert!((lap - le).abs() <= 1e-5 * scale_lap + floor, "{} lap {lap} {le}", p.name());
            }
        }
    }

    #[test]
    fn problem1_vanishes_on_boundary() {
        let p = problem1();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            for x in [[t, 0.0, 0.0], [t, 1.0, 0.0], [0.0, t, 0.0], [1.0, t, 0.0]] {
                assert_eq!(p.g(&x), 0.0);
            }
        }
        assert!(!p.is_symmetric_form());
    }

    #[test]
    fn problem2_vanishes_on_z_faces() {
        let p = problem2();
        for x in [[0.3, 0.4, 0.0], [0.7, 0.2, 1.0]] {
            assert!(p.u(&x).abs() < 1e-15);
        }
        assert!(p.is_symmetric_form());
    }

    #[test]
    fn synthesized_loads() {
        // u = x1, a = 1: f = b1 + c x1
        let ev = Evaluators {
            u: Arc::new(|x| x[0]),
            grad_u: Arc::new(|_| [1.0, 0.0, 0.0]),
            laplacian_u: zero(),
            a: Arc::new(|_| 1.0),
            grad_a: zero_vec(),
            b: Arc::new(|x| [x[1], 2.0, 0.0]),
            c: Arc::new(|_| 3.0),
        };
        let p = ProblemSpec::custom("t", 2, ev).unwrap();
        let x = [0.25, 0.5, 0.0];
        assert_eq!(p.f(&x), 0.5 + 3.0 * 0.25);
        // u = x1^2 + x2^2, a = 1: f = -4
        let ev = Evaluators {
            u: Arc::new(|x| x[0] * x[0] + x[1] * x[1]),
            grad_u: Arc::new(|x| [2.0 * x[0], 2.0 * x[1], 0.0]),
            laplacian_u: Arc::new(|_| 4.0),
            a: Arc::new(|_| 1.0),
            grad_a: zero_vec(),
            b: zero_vec(),
            c: zero(),
        };
        let p = ProblemSpec::custom("q", 2, ev).unwrap();
        assert_eq!(p.f(&x), -4.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let ev = Evaluators {
            u: zero(),
            grad_u: zero_vec(),
            laplacian_u: zero(),
            a: Arc::new(|_| 1.0),
            grad_a: zero_vec(),
            b: Arc::new(|_| [0.0, 0.0, 1.0]),
            c: zero(),
        };
        assert!(matches!(
            ProblemSpec::custom("bad", 2, ev.clone()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ProblemSpec::custom("bad", 4, ev).is_err());
        assert!(by_name("p2", 2).is_err());
        assert!(by_name("nope", 2).is_err());
    }
}
