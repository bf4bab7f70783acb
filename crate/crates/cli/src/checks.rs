//! Randomized invariant suites for the smooth max and the smoothed indicator.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use supcoupling::smoothmax::{
    applied_beta, epsilon_beta_delta, q_abs_sum, smooth_max, smooth_max_derivs, IndicatorSmoothing,
};
use supcoupling::{Result, RngPolicy, StreamRng};

use crate::config::SmoothmaxParams;

/// Absolute slack for identities that hold exactly in real arithmetic but
/// accumulate rounding over a sum.
pub const ROUNDING_TOL: f64 = 1e-12;
pub const FD_GRAD_TOL: f64 = 1e-6;
pub const FD_HESS_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest amount by which a case exceeded its bound (0 when none did).
    pub max_excess: f64,
}

impl SuiteResult {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }

    fn from_excesses(suite: &str, excess: impl IntoIterator<Item = f64>) -> Self {
        let (mut cases, mut violations, mut worst) = (0, 0, 0.0f64);
        for e in excess {
            cases += 1;
            if e > 0.0 || e.is_nan() {
                violations += 1;
                worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
            }
        }
        SuiteResult {
            suite: suite.into(),
            cases,
            violations,
            max_excess: worst,
        }
    }
}

fn draw_case(rng: &mut StreamRng, max_dim: usize, [blo, bhi]: [f64; 2]) -> (Vec<f64>, f64) {
    let p = rng.random_range(1..=max_dim);
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let x = (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let beta = (blo.ln() + (bhi.ln() - blo.ln()) * rng.random::<f64>()).exp();
    (x, beta)
}

/// `max x ≤ F_β(x) ≤ max x + log p/β`, checked without tolerance.
pub fn sandwich(params: &SmoothmaxParams, rng: RngPolicy) -> Result<SuiteResult> {
    let out = rng.replicate(params.sandwich_vectors, |_, r| {
        let (x, beta) = draw_case(r, params.max_dim, params.beta_range);
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        smooth_max(&x, beta).map(|f| (m - f).max(f - (m + (x.len() as f64).ln() / beta)))
    });
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult::from_excesses("sandwich", out))
}

/// `π` on the simplex, `Σ|w| ≤ 2`, `Σ|q| ≤ 6`.
pub fn weight_bounds(params: &SmoothmaxParams, rng: RngPolicy) -> Result<Vec<SuiteResult>> {
    let max_dim = params.max_dim.min(200);
    let out = rng.replicate(params.derivative_draws, |_, r| {
        let (x, beta) = draw_case(r, max_dim, params.beta_range);
        smooth_max_derivs(&x, beta).map(|d| {
            let simplex = d.pi.iter().map(|&v| -v).fold((d.pi.iter().sum::<f64>() - 1.0).abs() - ROUNDING_TOL, f64::max);
            let w = d.w_abs_sum() - 2.0 - ROUNDING_TOL;
            let q = q_abs_sum(&d.pi) - 6.0 - ROUNDING_TOL;
            (simplex, w, q)
        })
    });
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(vec![
        SuiteResult::from_excesses("pi_simplex", out.iter().map(|t| t.0)),
        SuiteResult::from_excesses("w_abs_sum_le_2", out.iter().map(|t| t.1)),
        SuiteResult::from_excesses("q_abs_sum_le_6", out.iter().map(|t| t.2)),
    ])
}

/// Central differences of `F_β` against `π` and `βw`; errors are relative to
/// the largest entry of the exact gradient or Hessian.
pub fn finite_differences(params: &SmoothmaxParams, rng: RngPolicy) -> Result<Vec<SuiteResult>> {
    let cases = params.derivative_draws;
    let out = rng.replicate(cases, |_, r| -> Result<(f64, f64)> {
        let p = r.random_range(1..=params.fd_max_dim);
        let x: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
        let beta = (0.5f64.ln() + (5.0f64.ln() - 0.5f64.ln()) * r.random::<f64>()).exp();
        let d = smooth_max_derivs(&x, beta)?;
        let f = |y: &[f64]| smooth_max(y, beta);
        let h1 = 1e-5;
        let mut grad_err = 0.0f64;
        let mut y = x.clone();
        for j in 0..p {
            y[j] = x[j] + h1;
            let up = f(&y)?;
            y[j] = x[j] - h1;
            let dn = f(&y)?;
            y[j] = x[j];
            grad_err = grad_err.max(((up - dn) / (2.0 * h1) - d.pi[j]).abs());
        }
        let gscale = d.pi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // F minus its argmax coordinate: the dropped term is linear, and the
        // remainder is evaluated with perturbations applied to differences
        let k0 = (0..p).fold(0, |a, j| if x[j] > x[a] { j } else { a });
        let shifted = |pert: &[(usize, f64)]| {
            let at = |j: usize| pert.iter().filter(|(i, _)| *i == j).map(|(_, v)| v).sum::<f64>();
            let rest: f64 = (0..p)
                .filter(|&j| j != k0)
                .map(|j| (beta * ((x[j] - x[k0]) + (at(j) - at(k0)))).exp())
                .sum();
            rest.ln_1p() / beta
        };
        let h2 = 1e-4;
        let mut hess_err = 0.0f64;
        let mut hscale = 0.0f64;
        for j in 0..p {
            for k in 0..p {
                let at = |sj: f64, sk: f64| shifted(&[(j, sj * h2), (k, sk * h2)]);
                let fd = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h2 * h2);
                let exact = beta * d.w_at(j, k);
                hscale = hscale.max(exact.abs());
                hess_err = hess_err.max((fd - exact).abs());
            }
        }
        let grad_rel = grad_err / gscale;
        // p = 1 has a zero Hessian; compare absolutely there
        let hess_rel = if hscale > 0.0 { hess_err / hscale } else { hess_err };
        Ok((grad_rel - FD_GRAD_TOL, hess_rel - FD_HESS_TOL))
    });
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(vec![
        SuiteResult::from_excesses("fd_gradient", out.iter().map(|t| t.0)),
        SuiteResult::from_excesses("fd_hessian", out.iter().map(|t| t.1)),
    ])
}

/// `(1 − ε)1_A ≤ g ≤ ε + (1 − ε)1_{A^{3δ}}` on a grid covering `A^{5δ}`.
pub fn indicator_sandwich(params: &SmoothmaxParams) -> Result<SuiteResult> {
    let ind = &params.indicator;
    let s = IndicatorSmoothing::new(
        ind.intervals.iter().map(|&[a, b]| (a, b)).collect(),
        ind.delta,
        ind.beta,
    )?;
    let eps = s.epsilon();
    let lo = ind.intervals.iter().map(|iv| iv[0]).fold(f64::INFINITY, f64::min) - 5.0 * ind.delta;
    let hi = ind.intervals.iter().map(|iv| iv[1]).fold(f64::NEG_INFINITY, f64::max) + 5.0 * ind.delta;
    let m = ind.grid_points;
    let excess = (0..m).map(|i| {
        let t = if m == 1 { lo } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 };
        let g = s.value(t);
        let d = s.distance(t);
        let in_a = if d == 0.0 { 1.0 } else { 0.0 };
        let in_a3 = if d <= 3.0 * ind.delta { 1.0 } else { 0.0 };
        ((1.0 - eps) * in_a - g).max(g - (eps + (1.0 - eps) * in_a3)) - ROUNDING_TOL
    });
    Ok(SuiteResult::from_excesses("indicator_sandwich", excess))
}

/// `ε(β, δ) ≤ 2 log(p ∨ n)/(p ∨ n)` at `β = 2δ⁻¹ log(p ∨ n)`.
pub fn applied_epsilon(params: &SmoothmaxParams) -> Result<SuiteResult> {
    let delta = 1.0;
    let mut ex = Vec::with_capacity(params.epsilon_pairs.len());
    for &[p, n] in &params.epsilon_pairs {
        let m = p.max(n) as f64;
        let eps = epsilon_beta_delta(applied_beta(delta, p, n), delta)?;
        ex.push(eps - 2.0 * m.ln() / m);
    }
    Ok(SuiteResult::from_excesses("applied_epsilon", ex))
}

pub fn run_all(params: &SmoothmaxParams, rng: RngPolicy) -> Result<Vec<SuiteResult>> {
    let mut out = vec![sandwich(params, rng.fork("sandwich"))?];
    out.extend(weight_bounds(params, rng.fork("weights"))?);
    out.extend(finite_differences(params, rng.fork("fd"))?);
    out.push(indicator_sandwich(params)?);
    out.push(applied_epsilon(params)?);
    Ok(out)
}
