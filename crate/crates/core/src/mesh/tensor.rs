use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Point, Result};

/// Default bound on element aspect ratios; exceeding it only logs a warning.
pub const DEFAULT_NONDEGENERACY: f64 = 20.0;

/// An axis-aligned box `[lo, hi]`. Unused trailing coordinates are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl Cell {
    pub fn lengths(&self) -> [f64; 3] {
        let mut l = [0.0; 3];
        for (j, lj) in l.iter_mut().enumerate().take(self.dim) {
            *lj = self.hi[j] - self.lo[j];
        }
        l
    }

    pub fn centroid(&self) -> Point {
        let mut c = [0.0; 3];
        for (j, cj) in c.iter_mut().enumerate().take(self.dim) {
            *cj = 0.5 * (self.lo[j] + self.hi[j]);
        }
        c
    }

    pub fn volume(&self) -> f64 {
        self.lengths()[..self.dim].iter().product()
    }

    /// Largest axis extent.
    pub fn diameter(&self) -> f64 {
        self.lengths()[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    pub fn aspect_ratio(&self) -> f64 {
        let l = &self.lengths()[..self.dim];
        let max = l.iter().cloned().fold(0.0, f64::max);
        let min = l.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// The face of this cell with normal `axis` on the minus (`side = 0`) or plus side.
    pub fn face(&self, axis: usize, side: usize) -> Cell {
        let mut lo = self.lo;
        let mut hi = self.hi;
        if side == 0 {
            hi[axis] = lo[axis];
        } else {
            lo[axis] = hi[axis];
        }
        Cell { dim: self.dim, lo, hi }
    }
}

/// An edge (2D) or face (3D) of a tensor mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Normal axis; the facet lies in the hyperplane `x[axis] = const`.
    pub axis: usize,
    /// Index of that hyperplane among the gridlines of `axis`.
    pub gridline: usize,
    /// The facet as a degenerate box.
    pub bounds: Cell,
    pub centroid: Point,
    /// Length (2D) or area (3D).
    pub measure: f64,
    /// Element on the `x[axis] < const` side.
    pub minus: Option<usize>,
    /// Element on the `x[axis] > const` side.
    pub plus: Option<usize>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none() || self.plus.is_none()
    }

    /// The patch of adjacent elements: two for interior facets, one on the boundary.
    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.minus.into_iter().chain(self.plus)
    }
}

/// Tensor-product rectangular (2D) or cuboid (3D) mesh.
///
/// Elements are numbered with axis 0 varying fastest. Facets are numbered by
/// normal axis first, then by the same axis-0-fastest ordering over their
/// index box. Each element lists its facets as
/// `[axis0 minus, axis0 plus, axis1 minus, axis1 plus, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMesh {
    dim: usize,
    gridlines: Vec<Vec<f64>>,
    counts: [usize; 3],
    facets: Vec<Facet>,
    element_facets: Vec<[usize; 6]>,
}

impl TensorMesh {
    /// Builds the mesh of the product of the given gridlines.
    pub fn new(gridlines: Vec<Vec<f64>>) -> Result<Self> {
        let dim = gridlines.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "tensor mesh dimension must be 1..=3, got {dim}"
            )));
        }
        for (axis, g) in gridlines.iter().enumerate() {
            if g.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "axis {axis} needs at least two gridlines"
                )));
            }
            if g.iter().any(|x| !x.is_finite()) || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(format!(
                    "gridlines on axis {axis} are not strictly increasing"
                )));
            }
        }
        let mut counts = [1; 3];
        for (axis, g) in gridlines.iter().enumerate() {
            counts[axis] = g.len() - 1;
        }
        let mut mesh = TensorMesh {
            dim,
            gridlines,
            counts,
            facets: Vec::new(),
            element_facets: Vec::new(),
        };
        mesh.build_topology();
        Ok(mesh)
    }

    /// Convenience for callers that know the dimension up front.
    pub fn build(dim: usize, gridlines: Vec<Vec<f64>>) -> Result<Self> {
        if gridlines.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: gridlines.len(),
            });
        }
        Self::new(gridlines)
    }

    /// `n` equal intervals on `[0, 1]` along every axis.
    pub fn uniform(dim: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need at least one interval".into()));
        }
        let g: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        Self::new(vec![g; dim])
    }

    fn build_topology(&mut self) {
        let dim = self.dim;
        let ne = self.num_elements();
        let mut element_facets = vec![[usize::MAX; 6]; ne];
        let mut facets = Vec::new();
        for axis in 0..dim {
            let mut box_counts = self.counts;
            box_counts[axis] += 1;
            for k2 in 0..box_counts[2] {
                for k1 in 0..box_counts[1] {
                    for k0 in 0..box_counts[0] {
                        let idx = [k0, k1, k2];
                        let k = idx[axis];
                        let minus = (k > 0).then(|| {
                            let mut m = idx;
                            m[axis] -= 1;
                            self.element_index(m)
                        });
                        let plus = (k < self.counts[axis]).then(|| self.element_index(idx));
                        let mut lo = [0.0; 3];
                        let mut hi = [0.0; 3];
                        for j in 0..dim {
                            if j == axis {
                                lo[j] = self.gridlines[j][k];
                                hi[j] = lo[j];
                            } else {
                                lo[j] = self.gridlines[j][idx[j]];
                                hi[j] = self.gridlines[j][idx[j] + 1];
                            }
                        }
                        let bounds = Cell { dim, lo, hi };
                        let measure = (0..dim)
                            .filter(|&j| j != axis)
                            .map(|j| hi[j] - lo[j])
                            .product();
                        let id = facets.len();
                        if let Some(e) = minus {
                            element_facets[e][2 * axis + 1] = id;
                        }
                        if let Some(e) = plus {
                            element_facets[e][2 * axis] = id;
                        }
                        facets.push(Facet {
                            axis,
                            gridline: k,
                            bounds,
                            centroid: bounds.centroid(),
                            measure,
                            minus,
                            plus,
                        });
                    }
                }
            }
        }
        self.facets = facets;
        self.element_facets = element_facets;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gridlines(&self, axis: usize) -> &[f64] {
        &self.gridlines[axis]
    }

    pub fn all_gridlines(&self) -> &[Vec<f64>] {
        &self.gridlines
    }

    /// Number of intervals along each axis (1 for unused axes).
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn num_elements(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    /// Local facets of element `e`, ordered `[axis0 -, axis0 +, axis1 -, ...]`.
    pub fn element_facets(&self, e: usize) -> &[usize] {
        &self.element_facets[e][..2 * self.dim]
    }

    pub fn element_index(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.counts[0] * (idx[1] + self.counts[1] * idx[2])
    }

    pub fn element_multi_index(&self, e: usize) -> [usize; 3] {
        let i0 = e % self.counts[0];
        let r = e / self.counts[0];
        [i0, r % self.counts[1], r / self.counts[1]]
    }

    pub fn cell(&self, e: usize) -> Cell {
        let idx = self.element_multi_index(e);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for j in 0..self.dim {
            lo[j] = self.gridlines[j][idx[j]];
            hi[j] = self.gridlines[j][idx[j] + 1];
        }
        Cell { dim: self.dim, lo, hi }
    }

    /// Elements sharing facet `f`.
    pub fn patch(&self, f: usize) -> Vec<usize> {
        self.facets[f].elements().collect()
    }

    /// Element across local facet `local` of element `e`, if any.
    pub fn neighbor(&self, e: usize, local: usize) -> Option<usize> {
        let f = &self.facets[self.element_facets[e][local]];
        if local % 2 == 0 {
            f.minus
        } else {
            f.plus
        }
    }

    /// Mesh size: the largest axis extent over all elements.
    pub fn h(&self) -> f64 {
        (0..self.dim)
            .map(|j| {
                self.gridlines[j]
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest element aspect ratio.
    pub fn aspect_ratio(&self) -> f64 {
        (0..self.num_elements())
            .map(|e| self.cell(e).aspect_ratio())
            .fold(1.0, f64::max)
    }

    /// Logs a warning when some element exceeds the aspect-ratio bound `c`.
    pub fn check_nondegenerate(&self, c: f64) -> bool {
        let ratio = self.aspect_ratio();
        if ratio > c {
            log::warn!("mesh aspect ratio {ratio:.3} exceeds nondegeneracy bound {c}");
            false
        } else {
            true
        }
    }

    /// Measure of the whole domain.
    pub fn domain_measure(&self) -> f64 {
        (0..self.dim)
            .map(|j| self.gridlines[j][self.counts[j]] - self.gridlines[j][0])
            .product()
    }

    /// Bisects every interval on every axis.
    pub fn refine_midpoint(&self) -> TensorMesh {
        let gridlines = self
            .gridlines
            .iter()
            .map(|g| {
                let mut out = Vec::with_capacity(2 * g.len() - 1);
                for w in g.windows(2) {
                    out.push(w[0]);
                    out.push(0.5 * (w[0] + w[1]));
                }
                out.push(g[g.len() - 1]);
                out
            })
            .collect();
        TensorMesh::new(gridlines).expect("bisection keeps gridlines increasing")
    }

    /// Moves each interior gridline by an independent uniform draw in
    /// `[-fraction * s, fraction * s]`, `s` being the smallest interval on that
    /// axis before the move. Boundary gridlines stay fixed.
    ///
    /// Draws come from ChaCha8 seeded with `seed`, consumed axis by axis and
    /// then in gridline order, so the result is a pure function of the inputs.
    pub fn perturb(&self, fraction: f64, seed: u64) -> Result<TensorMesh> {
        if !(0.0..0.5).contains(&fraction) {
            return Err(Error::InvalidInput(format!(
                "perturbation fraction must lie in [0, 0.5), got {fraction}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gridlines = self
            .gridlines
            .iter()
            .map(|g| {
                let s = g.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                let delta = fraction * s;
                let mut out = g.clone();
                let n = out.len();
                for x in &mut out[1..n - 1] {
                    let shift: f64 = rng.random_range(-1.0..=1.0);
                    *x += delta * shift;
                }
                out
            })
            .collect();
        let mesh = TensorMesh::new(gridlines)?;
        mesh.check_nondegenerate(DEFAULT_NONDEGENERACY);
        Ok(mesh)
    }
}
