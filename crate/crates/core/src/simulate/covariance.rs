use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::funcclass::DiscretizedClass;
use crate::rng::{RngPolicy, StreamRng};

/// Relative ridges tried, in order, when the Cholesky factorization fails.
pub const RIDGE_LADDER: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

/// Covariance matrix of a Gaussian analogue together with a factor `B`
/// (`N × r`) such that `BBᵀ = Σ + repair_shift·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    sigma: DMatrix<f64>,
    /// Row-major copy of the factor.
    rows: Vec<f64>,
    rank: usize,
    lower: bool,
    repair_shift: f64,
}

impl CovarianceModel {
    /// Cholesky factor of `Σ`, adding the smallest ridge from
    /// [`RIDGE_LADDER`] (relative to `max_j Σ_jj`) that makes it succeed.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        if n == 0 || sigma.ncols() != n {
            return Err(Error::invalid("sigma", "covariance must be a non-empty square matrix"));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sigma", "non-finite covariance entry"));
        }
        let scale = sigma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let asym = (0..n)
            .flat_map(|j| (0..j).map(move |k| (j, k)))
            .map(|(j, k)| (sigma[(j, k)] - sigma[(k, j)]).abs())
            .fold(0.0, f64::max);
        if asym > 1e-10 * scale.max(1.0) {
            return Err(Error::invalid("sigma", format!("covariance not symmetric (gap {asym:e})")));
        }
        let max_diag = (0..n).map(|j| sigma[(j, j)]).fold(0.0, f64::max);
        if (0..n).any(|j| sigma[(j, j)] < 0.0) {
            return Err(Error::invalid("sigma", "negative variance"));
        }
        let sym = DMatrix::from_fn(n, n, |j, k| 0.5 * (sigma[(j, k)] + sigma[(k, j)]));
        if max_diag == 0.0 {
            return Ok(CovarianceModel {
                sigma: sym,
                rows: vec![0.0; n],
                rank: 1,
                lower: false,
                repair_shift: 0.0,
            });
        }
        for &r in &RIDGE_LADDER {
            let shift = r * max_diag;
            let mut m = sym.clone();
            for j in 0..n {
                m[(j, j)] += shift;
            }
            if let Some(ch) = m.cholesky() {
                let l = ch.l();
                let rows = (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).map(|(j, k)| l[(j, k)]).collect();
                return Ok(CovarianceModel {
                    sigma: sym,
                    rows,
                    rank: n,
                    lower: true,
                    repair_shift: shift,
                });
            }
        }
        Err(Error::BadlyConditioned {
            max_ridge: RIDGE_LADDER[RIDGE_LADDER.len() - 1],
        })
    }

    /// Model with `Σ = BBᵀ` from a given (possibly low-rank) factor.
    pub fn from_factor(factor: DMatrix<f64>) -> Result<Self> {
        let (n, r) = factor.shape();
        if n == 0 || r == 0 {
            return Err(Error::invalid("factor", "factor must be non-empty"));
        }
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("factor", "non-finite factor entry"));
        }
        let sigma = &factor * factor.transpose();
        let rows = (0..n).flat_map(|j| (0..r).map(move |k| (j, k))).map(|(j, k)| factor[(j, k)]).collect();
        Ok(CovarianceModel {
            sigma,
            rows,
            rank: r,
            lower: false,
            repair_shift: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// Number of columns of the factor (standard normals per draw).
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn factor(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.rank, &self.rows)
    }

    pub fn repair_shift(&self) -> f64 {
        self.repair_shift
    }

    /// `‖BBᵀ − (Σ + shift·I)‖_F / ‖Σ + shift·I‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let b = self.factor();
        let mut target = self.sigma.clone();
        for j in 0..self.dim() {
            target[(j, j)] += self.repair_shift;
        }
        let denom = target.norm();
        let diff = (&b * b.transpose() - &target).norm();
        if denom == 0.0 {
            diff
        } else {
            diff / denom
        }
    }

    /// `Bξ` written into `out`.
    pub fn apply(&self, xi: &[f64], out: &mut [f64]) {
        let r = self.rank;
        for (j, o) in out.iter_mut().enumerate() {
            let len = if self.lower { j + 1 } else { r };
            let row = &self.rows[j * r..j * r + len];
            *o = row.iter().zip(xi).map(|(a, b)| a * b).sum();
        }
    }

    /// `max_j (Bξ)_j`, or `max_j |(Bξ)_j|` when `abs`.
    pub fn sup_of(&self, xi: &[f64], abs: bool) -> f64 {
        let r = self.rank;
        let mut best = f64::NEG_INFINITY;
        for j in 0..self.dim() {
            let len = if self.lower { j + 1 } else { r };
            let row = &self.rows[j * r..j * r + len];
            let v: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
            best = best.max(if abs { v.abs() } else { v });
        }
        best
    }

    /// Singular values of `Σ`, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.sigma.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

/// Where the moments `P(f_j f_k)` come from.
pub enum CovarianceSource<'a, S> {
    /// A quadrature rule for `P` (weights need not be normalised).
    Rule { nodes: &'a [S], weights: &'a [f64] },
    /// Sample moments over `reps` i.i.d. draws.
    MonteCarlo {
        sampler: &'a (dyn Fn(&mut StreamRng) -> S + Sync),
        reps: usize,
        rng: RngPolicy,
    },
}

/// `Σ_jk = P(f_j f_k) − P f_j · P f_k`, factorized with ridge repair.
pub fn gaussian_covariance<S: Send + Sync>(
    class: &DiscretizedClass<S, f64>,
    source: CovarianceSource<'_, S>,
) -> Result<CovarianceModel> {
    let k = class.len();
    let evals: Vec<(f64, Vec<f64>)> = match source {
        CovarianceSource::Rule { nodes, weights } => {
            if nodes.len() != weights.len() || nodes.is_empty() {
                return Err(Error::DomainMismatch("quadrature nodes and weights differ in length".into()));
            }
            nodes
                .iter()
                .zip(weights)
                .map(|(x, &w)| {
                    let mut row = vec![0.0; k];
                    class.eval_into(x, &mut row);
                    (w, row)
                })
                .collect()
        }
        CovarianceSource::MonteCarlo { sampler, reps, rng } => {
            if reps < 2 {
                return Err(Error::invalid("reps", "need at least two draws"));
            }
            let w = 1.0 / reps as f64;
            rng.replicate(reps, |_, s| {
                let x = sampler(s);
                let mut row = vec![0.0; k];
                class.eval_into(&x, &mut row);
                (w, row)
            })
        }
    };
    let total: f64 = evals.iter().map(|(w, _)| w).sum();
    let mut mean = vec![0.0; k];
    for (w, row) in &evals {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += w * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut sigma = DMatrix::zeros(k, k);
    for (w, row) in &evals {
        for j in 0..k {
            let a = w * (row[j] - mean[j]);
            for l in j..k {
                sigma[(j, l)] += a * (row[l] - mean[l]);
            }
        }
    }
    for j in 0..k {
        for l in j..k {
            let v = sigma[(j, l)] / total;
            sigma[(j, l)] = v;
            sigma[(l, j)] = v;
        }
    }
    CovarianceModel::from_matrix(sigma)
}
