//! Uniform confidence bands from Gaussian-sup critical values, and coverage
//! experiments for the kernel scenario.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bounds::extended;
use crate::error::{Error, Result};
use crate::rng::RngPolicy;
use crate::scenarios::{build_kernel_class, KernelScenario, Normalization};
use crate::simulate::{gaussian_abs_sup_sample, gaussian_sup_sample, sup_quantile, SupSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `[Ŝ − c σ, ∞)`.
    OneSidedLower,
    /// `Ŝ ± c σ`.
    #[default]
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub x_grid: Vec<Vec<f64>>,
    pub estimate: Vec<f64>,
    pub sigma_n: Vec<f64>,
    #[serde(with = "extended")]
    pub c_alpha: f64,
    pub side: Side,
    pub alpha: f64,
    pub lower: Vec<f64>,
    /// `+∞` for one-sided bands.
    #[serde(with = "extended_vec")]
    pub upper: Vec<f64>,
}

mod extended_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::bounds::extended;

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "extended")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| W(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<W>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

impl BandResult {
    /// `c(α)·σ_n(x)` per grid point.
    pub fn half_width(&self) -> Vec<f64> {
        self.sigma_n.iter().map(|&s| half_width(self.c_alpha, s)).collect()
    }

    /// Whether `target` lies in the band at every grid point.
    pub fn contains(&self, target: &[f64]) -> bool {
        target
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(t, (lo, hi))| lo <= t && t <= hi)
    }

    /// CSV with columns `x,lower,upper` (`x1,x2,…` for several dimensions).
    pub fn to_csv(&self) -> String {
        let d = self.x_grid.first().map_or(1, Vec::len);
        let mut s = if d == 1 {
            String::from("x")
        } else {
            (1..=d).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",")
        };
        s.push_str(",lower,upper\n");
        for ((x, lo), hi) in self.x_grid.iter().zip(&self.lower).zip(&self.upper) {
            let xs = x.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            let _ = writeln!(s, "{xs},{lo},{hi}");
        }
        s
    }
}

/// `c(α)`: the empirical `(1 − α)`-quantile of a Gaussian-sup sample.
pub fn critical_value(gauss: &SupSample<f64>, alpha: f64) -> Result<f64> {
    sup_quantile(gauss, alpha)
}

fn half_width(c: f64, s: f64) -> f64 {
    // an infinite critical value on a degenerate point leaves it degenerate
    if s == 0.0 {
        0.0
    } else {
        c * s
    }
}

pub fn build_band(
    x_grid: Vec<Vec<f64>>,
    estimate: Vec<f64>,
    sigma_n: Vec<f64>,
    c_alpha: f64,
    side: Side,
    alpha: f64,
) -> Result<BandResult> {
    if estimate.len() != sigma_n.len() || estimate.len() != x_grid.len() {
        return Err(Error::DomainMismatch(format!(
            "grid {}, estimate {}, sigma_n {}",
            x_grid.len(),
            estimate.len(),
            sigma_n.len()
        )));
    }
    if let Some(s) = sigma_n.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::invalid("sigma_n", format!("negative standard deviation {s}")));
    }
    if c_alpha.is_nan() || c_alpha < 0.0 {
        return Err(Error::invalid("c_alpha", "critical value must be ≥ 0"));
    }
    let half: Vec<f64> = sigma_n.iter().map(|&s| half_width(c_alpha, s)).collect();
    let lower = estimate.iter().zip(&half).map(|(e, w)| e - w).collect();
    let upper = match side {
        Side::OneSidedLower => vec![f64::INFINITY; estimate.len()],
        Side::TwoSided => estimate.iter().zip(&half).map(|(e, w)| e + w).collect(),
    };
    Ok(BandResult {
        x_grid,
        estimate,
        sigma_n,
        c_alpha,
        side,
        alpha,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageTarget {
    /// `E Ŝ_n(x)`: removes the smoothing bias.
    #[default]
    ExactCentered,
    /// `p(x) E[g(Y) | X = x]`.
    TrueFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    pub alpha: f64,
    pub n: usize,
    pub r_outer: usize,
    pub r_inner: usize,
    pub target: CoverageTarget,
    pub side: Side,
    /// Replaces the simulated critical value.
    #[serde(with = "extended_opt")]
    pub c_override: Option<f64>,
}

mod extended_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::bounds::extended;

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "extended")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            alpha: 0.05,
            n: 2000,
            r_outer: 500,
            r_inner: 4000,
            target: CoverageTarget::ExactCentered,
            side: Side::TwoSided,
            c_override: None,
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("α = {} outside (0, 1)", self.alpha)));
        }
        if self.n < 3 {
            return Err(Error::invalid("n", "n ≥ 3 is a standing assumption"));
        }
        if self.r_outer == 0 || self.r_inner == 0 {
            return Err(Error::invalid("replications", "need at least one inner and one outer replication"));
        }
        if let Some(c) = self.c_override {
            if c.is_nan() || c < 0.0 {
                return Err(Error::invalid("c_override", "must be ≥ 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub nominal: f64,
    pub empirical: f64,
    pub binomial_se: f64,
    pub replications: usize,
    #[serde(with = "extended")]
    pub c_alpha: f64,
    pub side: Side,
    pub target: CoverageTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRun {
    pub report: CoverageReport,
    /// The band from the first outer replication.
    pub example_band: BandResult,
    /// Per-replication coverage indicators, in replication order.
    pub covered: Vec<bool>,
}

/// Outer replications simulate data and form the band with a critical value
/// from `r_inner` draws of the studentized Gaussian analogue, shared across
/// replications.
pub fn coverage_experiment(scenario: &KernelScenario, cfg: &CoverageConfig, rng: RngPolicy) -> Result<CoverageRun> {
    cfg.validate()?;
    let studentized = KernelScenario {
        normalization: Normalization::Studentized,
        ..scenario.clone()
    };
    let kc = build_kernel_class(&studentized, cfg.n)?;
    let c_alpha = match cfg.c_override {
        Some(c) => c,
        None => {
            let inner = match cfg.side {
                Side::OneSidedLower => gaussian_sup_sample(kc.covariance(), cfg.r_inner, rng.fork("inner"))?,
                Side::TwoSided => gaussian_abs_sup_sample(kc.covariance(), cfg.r_inner, rng.fork("inner"))?,
            };
            critical_value(&inner, cfg.alpha)?
        }
    };
    let target = match cfg.target {
        CoverageTarget::ExactCentered => kc.expected_estimate(),
        CoverageTarget::TrueFunction => kc.true_function(),
    };
    let sigma = kc.sigma_n(cfg.n);
    let grid: Vec<Vec<f64>> = (0..kc.len()).map(|a| kc.point(a)).collect();
    let bands = rng.fork("outer").replicate(cfg.r_outer, |i, s| {
        let sums = kc.kernel_sums(cfg.n, s);
        let est = kc.estimate_from_sums(&sums, cfg.n);
        let band = build_band(grid.clone(), est, sigma.clone(), c_alpha, cfg.side, cfg.alpha)?;
        let hit = band.contains(&target);
        Ok::<_, Error>((hit, if i == 0 { Some(band) } else { None }))
    });
    let mut covered = Vec::with_capacity(cfg.r_outer);
    let mut example = None;
    for b in bands {
        let (hit, band) = b?;
        covered.push(hit);
        if band.is_some() {
            example = band;
        }
    }
    let r = cfg.r_outer as f64;
    let empirical = covered.iter().filter(|&&c| c).count() as f64 / r;
    Ok(CoverageRun {
        report: CoverageReport {
            nominal: 1.0 - cfg.alpha,
            empirical,
            binomial_se: (empirical * (1.0 - empirical) / r).sqrt(),
            replications: cfg.r_outer,
            c_alpha,
            side: cfg.side,
            target: cfg.target,
        },
        example_band: example.expect("at least one outer replication"),
        covered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::BandwidthRule;

    fn grid(m: usize) -> Vec<Vec<f64>> {
        (0..m).map(|i| vec![i as f64]).collect()
    }

    #[test]
    fn zero_critical_value_degenerates() {
        let b = build_band(grid(3), vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3], 0.0, Side::TwoSided, 0.1).unwrap();
        assert_eq!(b.lower, b.estimate);
        assert_eq!(b.upper, b.estimate);
    }

    #[test]
    fn doubling_c_doubles_half_width() {
        let est = vec![0.5, -1.0, 2.0];
        let sd = vec![0.3, 0.7, 0.11];
        let a = build_band(grid(3), est.clone(), sd.clone(), 1.3, Side::TwoSided, 0.1).unwrap();
        let b = build_band(grid(3), est, sd, 2.6, Side::TwoSided, 0.1).unwrap();
        for (wb, wa) in b.half_width().iter().zip(a.half_width()) {
            assert_eq!(*wb, 2.0 * wa);
        }
    }

    #[test]
    fn one_sided_upper_is_infinite_and_json_safe() {
        let b = build_band(grid(2), vec![0.0, 1.0], vec![1.0, 1.0], 1.0, Side::OneSidedLower, 0.05).unwrap();
        assert!(b.upper.iter().all(|u| u.is_infinite()));
        let text = serde_json::to_string(&b).unwrap();
        let back: BandResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn rejects_negative_sigma() {
        assert!(build_band(grid(1), vec![0.0], vec![-1.0], 1.0, Side::TwoSided, 0.05).is_err());
    }

    #[test]
    fn scaling_is_equivariant() {
        let est = vec![0.5, -1.0, 2.0];
        let sd = vec![0.3, 0.7, 0.11];
        let a = build_band(grid(3), est.clone(), sd.clone(), 1.7, Side::TwoSided, 0.1).unwrap();
        let c = 4.0;
        let b = build_band(
            grid(3),
            est.iter().map(|v| v * c).collect(),
            sd.iter().map(|v| v * c).collect(),
            1.7,
            Side::TwoSided,
            0.1,
        )
        .unwrap();
        for j in 0..3 {
            assert!((b.lower[j] - c * a.lower[j]).abs() < 1e-12);
            assert!((b.upper[j] - c * a.upper[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_override_always_covers() {
        let sc = KernelScenario {
            grid_points: 8,
            ..KernelScenario::default()
        };
        let cfg = CoverageConfig {
            n: 300,
            r_outer: 20,
            r_inner: 10,
            c_override: Some(f64::INFINITY),
            ..CoverageConfig::default()
        };
        let run = coverage_experiment(&sc, &cfg, RngPolicy::new(2)).unwrap();
        assert_eq!(run.report.empirical, 1.0);
        assert_eq!(run.report.binomial_se, 0.0);
    }

    #[test]
    fn nesting_and_monotone_coverage() {
        let sc = KernelScenario {
            grid_points: 16,
            bandwidth: BandwidthRule::Power {
                c: 1.0,
                exponent: 1.0 / 3.0,
            },
            ..KernelScenario::default()
        };
        let base = CoverageConfig {
            n: 500,
            r_outer: 60,
            r_inner: 2000,
            ..CoverageConfig::default()
        };
        let rng = RngPolicy::new(11);
        let tight = coverage_experiment(&sc, &CoverageConfig { alpha: 0.25, ..base.clone() }, rng).unwrap();
        let wide = coverage_experiment(&sc, &CoverageConfig { alpha: 0.05, ..base }, rng).unwrap();
        assert!(wide.report.c_alpha >= tight.report.c_alpha);
        assert!(wide.report.empirical >= tight.report.empirical);
        let (w, t) = (&wide.example_band, &tight.example_band);
        for j in 0..w.lower.len() {
            assert!(w.lower[j] <= t.lower[j] && w.upper[j] >= t.upper[j]);
        }
    }
}
