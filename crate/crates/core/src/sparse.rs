//! Compressed sparse row matrices and solvers for the assembled systems.
//!
//! All reductions run sequentially in index order, so solves are
//! bit-reproducible for identical inputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest dimension accepted by [`dense_lu`].
pub const DENSE_LIMIT: usize = 5000;

/// Square CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// in the order they appear.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(Error::InvalidInput(format!(
                "entry ({r}, {c}) outside a {n}x{n} matrix"
            )));
        }
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..n {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps duplicate summation order deterministic
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(r, c)] = v;
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Jacobi-preconditioned BiCGStab.
    Bicgstab,
    /// Jacobi-preconditioned restarted GMRES.
    Gmres,
    /// Dense LU with partial pivoting.
    Dense,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bicgstab" => Ok(SolverKind::Bicgstab),
            "gmres" => Ok(SolverKind::Gmres),
            "dense" => Ok(SolverKind::Dense),
            other => Err(Error::Parse(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Target relative residual `|b - Ax| / |b|`.
    pub tol: f64,
    /// Iteration cap; `None` means `20 * dim`.
    pub max_iter: Option<usize>,
    /// GMRES restart length.
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Bicgstab,
            tol: 1e-10,
            max_iter: None,
            restart: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub kind: SolverKind,
    pub iterations: usize,
    /// True relative residual of the returned solution.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

fn jacobi(a: &SparseMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d == 0.0 || !d.is_finite() {
                Err(Error::SingularSystem(format!("zero diagonal entry in row {i}")))
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

/// Solves `A x = b` with the configured method.
///
/// Iterative methods stop once the relative residual drops below `tol`; the
/// returned report carries the true residual of the final iterate.
pub fn solve(a: &SparseMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("solver tolerance must be positive".into()));
    }
    let n = a.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                kind: opts.kind,
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let max_iter = opts.max_iter.unwrap_or(20 * n.max(1));
    let (x, iterations) = match opts.kind {
        SolverKind::Dense => (dense_lu(&a.to_dense(), b)?, 1),
        SolverKind::Bicgstab => bicgstab(a, b, opts.tol, max_iter)?,
        SolverKind::Gmres => gmres(a, b, opts.tol, max_iter, opts.restart.max(1))?,
    };
    let rel = norm(&residual(a, &x, b)) / bnorm;
    Ok((
        x,
        SolveReport {
            kind: opts.kind,
            iterations,
            relative_residual: rel,
        },
    ))
}

/// Jacobi-preconditioned BiCGStab. Restarts from the current iterate when the
/// recursively updated residual has drifted from the true one.
fn bicgstab(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    let dinv = jacobi(a)?;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut total = 0;
    let mut last_rel = f64::NAN;
    for _restart in 0..5 {
        let mut r = residual(a, &x, b);
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((x, total));
        }
        let r_hat = r.clone();
        let mut rho_old = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut p_hat = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut s_hat = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut breakdown = false;
        while total < max_iter {
            total += 1;
            let rho = dot(&r_hat, &r);
            if rho.abs() < 1e-300 {
                breakdown = true;
                break;
            }
            let beta = (rho / rho_old) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                p_hat[i] = dinv[i] * p[i];
            }
            a.matvec(&p_hat, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.abs() < 1e-300 {
                breakdown = true;
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / bnorm <= tol {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                break;
            }
            for i in 0..n {
                s_hat[i] = dinv[i] * s[i];
            }
            a.matvec(&s_hat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                breakdown = true;
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm(&r) / bnorm <= tol {
                break;
            }
            if omega == 0.0 {
                breakdown = true;
                break;
            }
            rho_old = rho;
        }
        let true_rel = norm(&residual(a, &x, b)) / bnorm;
        if true_rel <= tol {
            return Ok((x, total));
        }
        last_rel = true_rel;
        if total >= max_iter && !breakdown {
            break;
        }
    }
    Err(Error::NotConverged {
        method: "bicgstab",
        iterations: total,
        residual: last_rel,
    })
}

/// Jacobi right-preconditioned GMRES(m) with modified Gram-Schmidt.
fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    let dinv = jacobi(a)?;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut total = 0;
    let mut rel = 1.0;
    while total < max_iter {
        let r = residual(a, &x, b);
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return Ok((x, total));
        }
        let m = restart;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if total >= max_iter {
                break;
            }
            total += 1;
            let z: Vec<f64> = basis[k].iter().zip(&dinv).map(|(v, d)| v * d).collect();
            let mut w = a.mul(&z);
            for (i, q) in basis.iter().enumerate() {
                let h = dot(&w, q);
                hess[i][k] = h;
                for (wj, qj) in w.iter_mut().zip(q) {
                    *wj -= h * qj;
                }
            }
            let wn = norm(&w);
            hess[k + 1][k] = wn;
            for i in 0..k {
                let tmp = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = tmp;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                return Err(Error::NotConverged {
                    method: "gmres",
                    iterations: total,
                    residual: rel,
                });
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * basis[j][i] * dinv[i];
            }
        }
    }
    let rel_true = norm(&residual(a, &x, b)) / bnorm;
    if rel_true <= tol {
        return Ok((x, total));
    }
    Err(Error::NotConverged {
        method: "gmres",
        iterations: total,
        residual: rel_true.max(rel),
    })
}

/// Dense LU with partial pivoting.
pub fn dense_lu(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput("dense_lu needs a square matrix".into()));
    }
    if n > DENSE_LIMIT {
        return Err(Error::InvalidInput(format!(
            "dense LU limited to dimension {DENSE_LIMIT}, got {n}"
        )));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let lu = a.clone().lu();
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::SingularSystem("matrix is singular to working precision".into()))?;
    Ok(x.iter().copied().collect())
}
