use std::collections::HashMap;

use crate::{Error, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TriEdge {
    /// Endpoints, smaller index first.
    pub vertices: [usize; 2],
    pub midpoint: Point,
    pub length: f64,
    /// Adjacent triangles; the second slot is empty on the boundary.
    pub triangles: [Option<usize>; 2],
}

impl TriEdge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.triangles.iter().flatten().copied()
    }
}

/// Planar triangulation with edge topology.
///
/// Triangles are stored counter-clockwise; local edge `i` of a triangle is
/// the edge opposite its local vertex `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<TriEdge>,
    triangle_edges: Vec<[usize; 3]>,
    uniform_parallel: bool,
}

impl TriMesh {
    /// Builds topology for an arbitrary triangulation. Clockwise triangles are reoriented.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut tris = triangles;
        for (t, tri) in tris.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let a = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if a.abs() <= f64::EPSILON {
                return Err(Error::DegenerateElement {
                    element: t,
                    reason: "zero area".into(),
                });
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<TriEdge> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(tris.len());
        for (t, tri) in tris.iter().enumerate() {
            let mut local = [0; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = match lookup.get(&key) {
                    Some(&id) => {
                        if edges[id].triangles[1].is_some() {
                            return Err(Error::InvalidInput(format!(
                                "edge {key:?} shared by more than two triangles"
                            )));
                        }
                        edges[id].triangles[1] = Some(t);
                        id
                    }
                    None => {
                        let (p, q) = (vertices[key.0], vertices[key.1]);
                        let id = edges.len();
                        edges.push(TriEdge {
                            vertices: [key.0, key.1],
                            midpoint: [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.0],
                            length: ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt(),
                            triangles: [Some(t), None],
                        });
                        lookup.insert(key, id);
                        id
                    }
                };
                *slot = id;
            }
            triangle_edges.push(local);
        }
        let mut mesh = TriMesh {
            vertices,
            triangles: tris,
            edges,
            triangle_edges,
            uniform_parallel: false,
        };
        mesh.uniform_parallel = mesh.max_parallelogram_defect() <= 1e-12;
        Ok(mesh)
    }

    /// The unit square cut into `nx * ny` rectangles, each split along the
    /// diagonal from its lower-left to its upper-right corner.
    pub fn uniform_parallel(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput("nx and ny must be positive".into()));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([i as f64 / nx as f64, j as f64 / ny as f64, 0.0]);
            }
        }
        let v = |i: usize, j: usize| i + (nx + 1) * j;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
                triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn is_uniform_parallel(&self) -> bool {
        self.uniform_parallel
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> &[TriEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &TriEdge {
        &self.edges[e]
    }

    /// Local edges of triangle `t`; entry `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> &[usize; 3] {
        &self.triangle_edges[t]
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let c = self.corners(t);
        signed_area(&c[0], &c[1], &c[2])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let c = self.corners(t);
        [
            (c[0][0] + c[1][0] + c[2][0]) / 3.0,
            (c[0][1] + c[1][1] + c[2][1]) / 3.0,
            0.0,
        ]
    }

    /// Longest edge.
    pub fn h(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// Vertex of triangle `t` not on edge `e`.
    pub fn opposite_vertex(&self, t: usize, e: usize) -> Option<usize> {
        self.triangle_edges[t]
            .iter()
            .position(|&k| k == e)
            .map(|i| self.triangles[t][i])
    }

    /// Unit normal of edge `e` pointing out of triangle `t`.
    pub fn outward_normal(&self, t: usize, e: usize) -> [f64; 2] {
        let edge = &self.edges[e];
        let p = self.vertices[edge.vertices[0]];
        let q = self.vertices[edge.vertices[1]];
        let mut n = [(q[1] - p[1]) / edge.length, -(q[0] - p[0]) / edge.length];
        let c = self.centroid(t);
        if n[0] * (edge.midpoint[0] - c[0]) + n[1] * (edge.midpoint[1] - c[1]) < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    /// Triangles around each vertex, in triangle order.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Largest deviation from the parallelogram condition: across every
    /// interior edge the two opposite vertices must be reflections of each
    /// other through the edge midpoint.
    pub fn max_parallelogram_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (e, edge) in self.edges.iter().enumerate() {
            if let [Some(t0), Some(t1)] = edge.triangles {
                let a = self.vertices[self.opposite_vertex(t0, e).unwrap()];
                let b = self.vertices[self.opposite_vertex(t1, e).unwrap()];
                let m = edge.midpoint;
                worst = worst
                    .max((a[0] + b[0] - 2.0 * m[0]).abs())
                    .max((a[1] + b[1] - 2.0 * m[1]).abs());
            }
        }
        worst
    }
}

fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}
