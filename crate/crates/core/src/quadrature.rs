//! Quadrature rules on reference domains and their affine images.
//!
//! The reference interval is `[0, 1]`, the reference cell is `[0, 1]^d` and
//! the reference triangle has vertices `(0,0)`, `(1,0)`, `(0,1)`.

use crate::{Error, Point, Result};

/// Gauss-Legendre nodes on `[-1, 1]` for the 4-point rule (ascending).
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];

const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_8,
];

/// Points and positive weights on a reference domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Dimension of the reference domain.
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Largest total (simplex) or per-variable (tensor) degree integrated exactly.
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over the reference domain.
    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// The 4-point Gauss rule on `[0, 1]`; exact through degree 7.
pub fn gauss1d_4() -> QuadRule {
    let points = GL4_NODES.iter().map(|t| [0.5 * (1.0 + t), 0.0, 0.0]).collect();
    let weights = GL4_WEIGHTS.iter().map(|w| 0.5 * w).collect();
    QuadRule {
        dim: 1,
        points,
        weights,
        degree: 7,
    }
}

/// Tensor product of [`gauss1d_4`] on `[0, 1]^dim`, `4^dim` points.
///
/// `dim = 0` yields the single-point rule used for facets of 1D cells.
pub fn tensor_rule(dim: usize) -> Result<QuadRule> {
    if dim > 3 {
        return Err(Error::InvalidInput(format!(
            "tensor rule dimension must be 0..=3, got {dim}"
        )));
    }
    let base = gauss1d_4();
    let mut points = vec![[0.0; 3]];
    let mut weights = vec![1.0];
    for axis in 0..dim {
        let mut next_points = Vec::with_capacity(points.len() * 4);
        let mut next_weights = Vec::with_capacity(points.len() * 4);
        // earlier axes vary fastest
        for (q, wq) in base.points.iter().zip(&base.weights) {
            for (p, wp) in points.iter().zip(&weights) {
                let mut x = *p;
                x[axis] = q[0];
                next_points.push(x);
                next_weights.push(wp * wq);
            }
        }
        points = next_points;
        weights = next_weights;
    }
    Ok(QuadRule {
        dim,
        points,
        weights,
        degree: 7,
    })
}

/// Symmetric 7-point degree-5 rule on the reference triangle (Radon).
pub fn triangle_rule() -> QuadRule {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w0 = 9.0 / 80.0;
    let w1 = (155.0 - s15) / 2400.0;
    let w2 = (155.0 + s15) / 2400.0;
    let third = 1.0 / 3.0;
    let points = vec![
        [third, third, 0.0],
        [a1, a1, 0.0],
        [b1, a1, 0.0],
        [a1, b1, 0.0],
        [a2, a2, 0.0],
        [b2, a2, 0.0],
        [a2, b2, 0.0],
    ];
    let weights = vec![w0, w1, w1, w1, w2, w2, w2];
    QuadRule {
        dim: 2,
        points,
        weights,
        degree: 5,
    }
}

/// A rule mapped onto a physical element, edge or face.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MappedRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl MappedRule {
    pub fn integrate<F: FnMut(&Point) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Maps a tensor rule onto an axis-aligned box.
///
/// `axes` lists the physical axes spanned by the reference coordinates, in
/// order; every other coordinate is copied from `lo`. A face with normal axis
/// `j` is a box with `lo[j] == hi[j]` and `axes` omitting `j`.
pub fn map_to_box(rule: &QuadRule, lo: &Point, hi: &Point, axes: &[usize]) -> MappedRule {
    debug_assert_eq!(rule.dim, axes.len());
    let jac: f64 = axes.iter().map(|&a| hi[a] - lo[a]).product();
    let points = rule
        .points
        .iter()
        .map(|r| {
            let mut x = *lo;
            for (k, &a) in axes.iter().enumerate() {
                x[a] = lo[a] + r[k] * (hi[a] - lo[a]);
            }
            x
        })
        .collect();
    let weights = rule.weights.iter().map(|w| w * jac).collect();
    MappedRule { points, weights }
}

/// Maps a 1D rule onto the segment `a -> b`; weights scale by the length.
pub fn map_to_segment(rule: &QuadRule, a: &Point, b: &Point) -> MappedRule {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
    let points = rule
        .points
        .iter()
        .map(|r| {
            let t = r[0];
            [
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ]
        })
        .collect();
    let weights = rule.weights.iter().map(|w| w * len).collect();
    MappedRule { points, weights }
}

/// Maps the reference-triangle rule onto the planar triangle `v`.
pub fn map_to_triangle(rule: &QuadRule, v: &[Point; 3]) -> MappedRule {
    let e1 = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
    let e2 = [v[2][0] - v[0][0], v[2][1] - v[0][1]];
    let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let points = rule
        .points
        .iter()
        .map(|r| {
            [
                v[0][0] + r[0] * e1[0] + r[1] * e2[0],
                v[0][1] + r[0] * e1[1] + r[1] * e2[1],
                0.0,
            ]
        })
        .collect();
    let weights = rule.weights.iter().map(|w| w * det).collect();
    MappedRule { points, weights }
}
