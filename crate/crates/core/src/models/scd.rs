//! Semantic-change features: orthogonal Procrustes alignment of consecutive
//! posts and a ridge-regression forecaster of the next post.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthogonal map from one set of row vectors onto another.
#[derive(Debug, Clone, PartialEq)]
pub struct Procrustes {
    pub omega: DMatrix<f64>,
    /// `A * omega - B`, one row per vector pair.
    pub residual: DMatrix<f64>,
    /// True when the input carried no signal and `omega` is the identity.
    pub degenerate: bool,
}

/// Solves `min |A W - B|_F` over orthogonal `W` with the SVD of `A^T B`.
pub fn scd_procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Procrustes> {
    if a.shape() != b.shape() {
        return Err(Error::Alignment(format!(
            "Procrustes inputs {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let d = a.ncols();
    if d == 0 || a.nrows() == 0 {
        return Err(Error::InvalidParameter(
            "Procrustes needs at least one pair of non-empty vectors".into(),
        ));
    }
    let m = a.transpose() * b;
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.max();
    let omega = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) if top > 1e-12 && top.is_finite() => Some(u * v_t),
        _ => None,
    };
    let (omega, degenerate) = match omega {
        Some(o) if o.iter().all(|x| x.is_finite()) => (o, false),
        _ => {
            log::warn!("degenerate Procrustes input ({}x{}), using the identity", a.nrows(), d);
            (DMatrix::identity(d, d), true)
        }
    };
    let residual = a * &omega - b;
    Ok(Procrustes {
        omega,
        residual,
        degenerate,
    })
}

fn rows_to_matrix(rows: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j])
}

fn check_dims(vectors: &[Vec<f64>]) -> Result<usize> {
    let dim = vectors.first().map_or(0, Vec::len);
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Alignment("representation vectors differ in length".into()));
    }
    Ok(dim)
}

/// Per-post alignment error: one `Omega` fitted on all consecutive pairs of
/// the timeline, then `v_{i-1} Omega - v_i` for each post after the first.
/// The first post, and every post of a single-post timeline, gets zeros.
pub fn scd_op_features(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let dim = check_dims(vectors)?;
    let mut out = vec![vec![0.0; dim]; vectors.len()];
    if vectors.len() < 2 || dim == 0 {
        return Ok(out);
    }
    let n = vectors.len() - 1;
    let a = rows_to_matrix(&vectors[..n], dim);
    let b = rows_to_matrix(&vectors[1..], dim);
    let fit = scd_procrustes(&a, &b)?;
    for (i, row) in out.iter_mut().skip(1).enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = fit.residual[(i, j)];
        }
    }
    Ok(out)
}

/// `(X^T X + lambda I)^{-1} X^T Y` via Cholesky.
pub fn ridge_regression(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::Alignment(format!(
            "{} design rows vs {} targets",
            x.nrows(),
            y.nrows()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge penalty {lambda}")));
    }
    let xt = x.transpose();
    let gram = &xt * x + DMatrix::identity(x.ncols(), x.ncols()) * lambda;
    let chol = gram.cholesky().ok_or_else(|| {
        Error::SingularSystem(format!(
            "normal equations of size {} are not positive definite",
            x.ncols()
        ))
    })?;
    let w = chol.solve(&(xt * y));
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("ridge solution is not finite".into()));
    }
    Ok(w)
}

/// Linear forecaster of a post vector from the `k` preceding ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecaster {
    k: usize,
    dim: usize,
    /// `(k * dim + 1) x dim`; the last row is the intercept.
    weights: Vec<f64>,
}

fn history_row(vectors: &[Vec<f64>], i: usize, k: usize, dim: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(k * dim + 1);
    for v in &vectors[i - k..i] {
        row.extend_from_slice(v);
    }
    row.push(1.0);
    row
}

impl Forecaster {
    /// Fits on every window of `k + 1` consecutive posts of the given
    /// timelines. Timelines of `k` posts or fewer contribute nothing.
    pub fn fit<T: AsRef<[Vec<f64>]>>(timelines: &[T], k: usize, lambda: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("forecast history k must be positive".into()));
        }
        let mut dim = None;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for t in timelines {
            let t = t.as_ref();
            if t.is_empty() {
                continue;
            }
            let d = check_dims(t)?;
            if *dim.get_or_insert(d) != d {
                return Err(Error::Alignment("representation vectors differ in length".into()));
            }
            for i in k..t.len() {
                xs.push(history_row(t, i, k, d));
                ys.push(t[i].clone());
            }
        }
        let dim = dim.unwrap_or(0);
        if xs.is_empty() || dim == 0 {
            return Err(Error::InsufficientData(format!("no timeline longer than k = {k}")));
        }
        let x = rows_to_matrix(&xs, k * dim + 1);
        let y = rows_to_matrix(&ys, dim);
        let w = ridge_regression(&x, &y, lambda)?;
        Ok(Self {
            k,
            dim,
            weights: w.as_slice().to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.k * self.dim + 1, self.dim, &self.weights)
    }

    /// Per post, actual minus predicted vector; the first `k` posts get zeros.
    pub fn errors(&self, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if self.k >= vectors.len() {
            return Err(Error::InsufficientHistory {
                len: vectors.len(),
                k: self.k,
            });
        }
        if check_dims(vectors)? != self.dim {
            return Err(Error::Alignment(format!("forecaster expects {}-d vectors", self.dim)));
        }
        let w = self.weight_matrix();
        let mut out = vec![vec![0.0; self.dim]; vectors.len()];
        for i in self.k..vectors.len() {
            let h = DMatrix::from_row_slice(1, self.k * self.dim + 1, &history_row(vectors, i, self.k, self.dim));
            let pred = h * &w;
            for (j, o) in out[i].iter_mut().enumerate() {
                *o = vectors[i][j] - pred[(0, j)];
            }
        }
        Ok(out)
    }
}
