use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::kernel::{build_kernel_class, kernel_sup_sample, KernelScenario};
use super::series::{build_series_class, series_sup_sample, xi_n, SeriesScenario};
use crate::error::{Error, Result};
use crate::rng::RngPolicy;
use crate::simulate::{gaussian_sup_sample, ks_distance, SupSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Kernel(KernelScenario),
    Series(SeriesScenario),
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::Kernel(KernelScenario::default())
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioSpec::Kernel(k) => k.validate(),
            ScenarioSpec::Series(s) => s.validate(),
        }
    }

    pub fn grid_points(&self) -> usize {
        match self {
            ScenarioSpec::Kernel(k) => k.grid_points,
            ScenarioSpec::Series(s) => s.grid_points,
        }
    }

    pub fn with_grid_points(&self, m: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            ScenarioSpec::Kernel(k) => k.grid_points = m,
            ScenarioSpec::Series(s) => s.grid_points = m,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    /// `h_n` for kernel scenarios, `K_n` for series scenarios.
    pub tuning: f64,
    pub ks: f64,
    pub ks_conf: f64,
    pub predicted_rate: f64,
}

/// KS at the largest `n` on the base grid and on a grid with twice the
/// points per dimension, using the same draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRefinement {
    pub n: usize,
    pub grid_points: usize,
    pub refined_grid_points: usize,
    pub ks: f64,
    pub ks_refined: f64,
    pub difference: f64,
    pub conf_radius: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log ks` on `log n` over rows with `ks > 0`.
    pub slope_fit: f64,
    pub refinement: Option<GridRefinement>,
}

impl RateReport {
    /// Columns `n,ks,ks_conf,predicted_rate,slope_fit`; the slope repeats on every row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,ks,ks_conf,predicted_rate,slope_fit\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.n, r.ks, r.ks_conf, r.predicted_rate, self.slope_fit);
        }
        s
    }
}

/// Empirical and Gaussian sup samples for one `(spec, n)`, plus the tuning
/// value and predicted rate.
pub(crate) fn sample_pair(
    spec: &ScenarioSpec,
    n: usize,
    replications: usize,
    rng: RngPolicy,
) -> Result<(SupSample<f64>, SupSample<f64>, f64, f64)> {
    let (emp_rng, gauss_rng) = (rng.fork("empirical"), rng.fork("gaussian"));
    let ln = (n as f64).ln();
    match spec {
        ScenarioSpec::Kernel(sc) => {
            let kc = build_kernel_class(sc, n)?;
            let h = kc.bandwidth();
            let rate = (n as f64 * h.powi(sc.dim as i32)).powf(-1.0 / 6.0) * ln;
            let e = kernel_sup_sample(&kc, replications, emp_rng)?;
            let g = gaussian_sup_sample(kc.covariance(), replications, gauss_rng)?;
            Ok((e, g, h, rate))
        }
        ScenarioSpec::Series(sc) => {
            let c = build_series_class(sc, n)?;
            let k = c.order();
            let rate = (n as f64).powf(-1.0 / 6.0) * xi_n(sc, k).powf(1.0 / 3.0) * ln;
            let e = series_sup_sample(&c, replications, emp_rng)?;
            let g = gaussian_sup_sample(c.covariance(), replications, gauss_rng)?;
            Ok((e, g, k as f64, rate))
        }
    }
}

fn log_log_slope(rows: &[RateRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.ks > 0.0)
        .map(|r| ((r.n as f64).ln(), r.ks.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// KS distance between the empirical and Gaussian sup laws along `n_list`,
/// with the grid-refinement diagnostic at the largest `n`.
pub fn rate_experiment(spec: &ScenarioSpec, n_list: &[usize], replications: usize, rng: RngPolicy) -> Result<RateReport> {
    spec.validate()?;
    if n_list.len() < 3 {
        return Err(Error::invalid("n_list", "need at least three sample sizes"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_list", "sample sizes must be strictly increasing"));
    }
    if n_list[0] < 3 {
        return Err(Error::invalid("n_list", "n ≥ 3 is a standing assumption"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let (e, g, tuning, predicted_rate) = sample_pair(spec, n, replications, rng.fork(&format!("n={n}")))?;
        let ks = ks_distance(&e, &g);
        rows.push(RateRow {
            n,
            tuning,
            ks: ks.estimate,
            ks_conf: ks.conf_radius,
            predicted_rate,
        });
    }
    let last = rows[rows.len() - 1].clone();
    let m = spec.grid_points();
    let refined = spec.with_grid_points(2 * m);
    let (e, g, _, _) = sample_pair(&refined, last.n, replications, rng.fork(&format!("n={}", last.n)))?;
    let ks_refined = ks_distance(&e, &g).estimate;
    let difference = (ks_refined - last.ks).abs();
    let refinement = GridRefinement {
        n: last.n,
        grid_points: m,
        refined_grid_points: 2 * m,
        ks: last.ks,
        ks_refined,
        difference,
        conf_radius: last.ks_conf,
        stable: difference < last.ks_conf,
    };
    let slope_fit = log_log_slope(&rows);
    Ok(RateReport {
        rows,
        slope_fit,
        refinement: Some(refinement),
    })
}
