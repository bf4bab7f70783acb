use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use crate::error::{Error, Result};
use crate::quadrature::{law_rule, DataLaw, GaussLegendre, DEFAULT_NODES};
use crate::rng::{RngPolicy, StreamRng};
use crate::simulate::{CovarianceModel, SupSample};

/// `n ↦ K_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum KRule {
    Fixed { k: usize },
    /// `K = ⌈c·n^{exponent}⌉`.
    Power { c: f64, exponent: f64 },
}

impl Default for KRule {
    fn default() -> Self {
        KRule::Power {
            c: 1.0,
            exponent: 1.0 / 3.0,
        }
    }
}

impl KRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KRule::Fixed { k: 0 } => Err(Error::invalid("k_rule.k", "K ≥ 1 required")),
            KRule::Power { c, exponent } if !(c > 0.0 && (0.0..1.0).contains(&exponent)) => {
                Err(Error::invalid("k_rule", "need c > 0 and 0 ≤ exponent < 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn at(&self, n: usize) -> usize {
        match *self {
            KRule::Fixed { k } => k,
            // shave representation error so that e.g. 8000^{1/3} gives 20
            KRule::Power { c, exponent } => ((c * (n as f64).powf(exponent) - 1e-9).ceil() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SeriesModel {
    /// `Y = θ(X) + η`, `η = σ(X)ε`, `σ(x) = noise_sd + noise_slope·x`, `ε ~ N(0, 1)`.
    MeanRegression { noise_sd: f64, noise_slope: f64 },
    /// `η ~ U(0, 1)` and `g_τ(η) = τ − 1(η ≤ τ)` for each `τ`.
    QuantileRegression { taus: Vec<f64> },
}

impl Default for SeriesModel {
    fn default() -> Self {
        SeriesModel::MeanRegression {
            noise_sd: 1.0,
            noise_slope: 0.0,
        }
    }
}

/// A series empirical process on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesScenario {
    pub basis: Basis,
    pub k_rule: KRule,
    pub x_law: DataLaw,
    pub model: SeriesModel,
    pub grid_points: usize,
    pub quad_nodes: usize,
}

impl Default for SeriesScenario {
    fn default() -> Self {
        SeriesScenario {
            basis: Basis::default(),
            k_rule: KRule::default(),
            x_law: DataLaw::default(),
            model: SeriesModel::default(),
            grid_points: 64,
            quad_nodes: DEFAULT_NODES,
        }
    }
}

impl SeriesScenario {
    pub fn validate(&self) -> Result<()> {
        self.k_rule.validate()?;
        self.x_law.validate()?;
        let (lo, hi) = self.x_law.support();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::invalid("x_law", "series bases live on [0, 1]"));
        }
        if self.grid_points == 0 {
            return Err(Error::invalid("grid_points", "need at least one grid point"));
        }
        if self.quad_nodes < 2 {
            return Err(Error::invalid("quad_nodes", "need at least two nodes"));
        }
        match &self.model {
            SeriesModel::MeanRegression { noise_sd, noise_slope } => {
                if !(noise_sd.is_finite() && noise_slope.is_finite() && *noise_sd >= 0.0 && noise_sd + noise_slope >= 0.0) {
                    return Err(Error::invalid("model", "σ(x) = noise_sd + noise_slope·x must be ≥ 0 on [0, 1]"));
                }
            }
            SeriesModel::QuantileRegression { taus } => {
                if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
                    return Err(Error::invalid("model.taus", "need a non-empty τ-grid in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let m = self.grid_points;
        if m == 1 {
            return vec![0.5];
        }
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }

    fn taus(&self) -> Vec<f64> {
        match &self.model {
            SeriesModel::QuantileRegression { taus } => taus.clone(),
            SeriesModel::MeanRegression { .. } => Vec::new(),
        }
    }

    fn noise_sd_at(&self, x: f64) -> f64 {
        match self.model {
            SeriesModel::MeanRegression { noise_sd, noise_slope } => noise_sd + noise_slope * x,
            SeriesModel::QuantileRegression { .. } => 0.0,
        }
    }
}

/// `sup_x |ψ^K(x)| ∨ 1` over 2001 equispaced points of `[0, 1]`.
pub fn xi_n(scenario: &SeriesScenario, k: usize) -> f64 {
    let mut buf = vec![0.0; k];
    (0..=2000)
        .map(|i| {
            scenario.basis.eval_into(k, i as f64 / 2000.0, &mut buf);
            buf.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .fold(1.0, f64::max)
}

/// `(V diag(√λ), V diag(√λ) Vᵀ)` of a symmetric PSD matrix, negative
/// eigenvalues clipped to zero.
fn psd_roots(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let half = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    let sym = &half * eig.eigenvectors.transpose();
    (half, sym)
}

/// Series class at a fixed `n`: normalised directions `α_n(x, τ)` on the grid
/// and the rank-`≤ K·T` Gaussian analogue.
#[derive(Debug, Clone)]
pub struct SeriesClass {
    scenario: SeriesScenario,
    n: usize,
    k: usize,
    grid: Vec<f64>,
    taus: Vec<f64>,
    gram: DMatrix<f64>,
    omega: DMatrix<f64>,
    a1: DMatrix<f64>,
    a2: Vec<DMatrix<f64>>,
    /// Row `τ·N_x + i` is `α_n(x_i, τ)`.
    alpha: DMatrix<f64>,
    covariance: CovarianceModel,
    warnings: Vec<String>,
}

/// Builds `A_1n`, `A_2n`, `Ω` by quadrature and the grid covariance
/// `Σ = αᵀ Ω α`.
pub fn build_series_class(scenario: &SeriesScenario, n: usize) -> Result<SeriesClass> {
    scenario.validate()?;
    if n < 3 {
        return Err(Error::invalid("n", "n ≥ 3 is a standing assumption"));
    }
    let sc = scenario.clone();
    let k = sc.k_rule.at(n);
    let rule = GaussLegendre::new(sc.quad_nodes)?;
    let (nodes, weights) = law_rule(&sc.x_law, &rule, &sc.basis.breakpoints(k));
    let mut gram = DMatrix::zeros(k, k);
    let mut noise = DMatrix::zeros(k, k);
    let mut psi = vec![0.0; k];
    for (&x, &w) in nodes.iter().zip(&weights) {
        sc.basis.eval_into(k, x, &mut psi);
        let s2 = sc.noise_sd_at(x).powi(2);
        for i in 0..k {
            for j in 0..k {
                let v = w * psi[i] * psi[j];
                gram[(i, j)] += v;
                noise[(i, j)] += v * s2;
            }
        }
    }
    let a1 = gram
        .clone()
        .cholesky()
        .ok_or(Error::BadlyConditioned { max_ridge: 0.0 })?
        .inverse();
    let taus = sc.taus();
    let (omega, blocks): (DMatrix<f64>, Vec<DMatrix<f64>>) = if taus.is_empty() {
        (noise.clone(), vec![noise])
    } else {
        let t = taus.len();
        let mut big = DMatrix::zeros(k * t, k * t);
        for (a, &ta) in taus.iter().enumerate() {
            for (b, &tb) in taus.iter().enumerate() {
                let c = ta.min(tb) - ta * tb;
                big.view_mut((a * k, b * k), (k, k)).copy_from(&(&gram * c));
            }
        }
        let per_tau = taus.iter().map(|&t| &gram * (t * (1.0 - t))).collect();
        (big, per_tau)
    };
    let a2: Vec<DMatrix<f64>> = blocks.iter().map(|om| psd_roots(om).1 * &a1).collect();

    let grid = sc.grid();
    let n_t = a2.len();
    let n_x = grid.len();
    let mut alpha = DMatrix::zeros(n_t * n_x, k);
    let mut warnings = Vec::new();
    for (i, &x) in grid.iter().enumerate() {
        sc.basis.eval_into(k, x, &mut psi);
        let p = DVector::from_column_slice(&psi);
        let num = &a1 * &p;
        for (t, a2t) in a2.iter().enumerate() {
            let den = (a2t * &p).norm();
            let row = t * n_x + i;
            if den > 0.0 && den.is_finite() {
                alpha.row_mut(row).copy_from(&(&num / den).transpose());
            } else {
                warnings.push(format!("|A_2 ψ(x)| = 0 at x = {x}, τ index {t}: α set to 0 (0/0 = 0)"));
            }
        }
    }

    // Z = (L_T ⊗ L_G) ξ for quantile regression, Z = L_Ω ξ for the mean model
    let factor = if taus.is_empty() {
        let (l, _) = psd_roots(&omega);
        &alpha * l
    } else {
        let t = taus.len();
        let tmat = DMatrix::from_fn(t, t, |a, b| taus[a].min(taus[b]) - taus[a] * taus[b]);
        let (lt, _) = psd_roots(&tmat);
        let (lg, _) = psd_roots(&gram);
        let mut b = DMatrix::zeros(t * n_x, t * k);
        for a in 0..t {
            let rows = alpha.rows(a * n_x, n_x) * &lg;
            for c in 0..t {
                b.view_mut((a * n_x, c * k), (n_x, k)).copy_from(&(&rows * lt[(a, c)]));
            }
        }
        b
    };
    let covariance = CovarianceModel::from_factor(factor)?;
    Ok(SeriesClass {
        scenario: sc,
        n,
        k,
        grid,
        taus,
        gram,
        omega,
        a1,
        a2,
        alpha,
        covariance,
        warnings,
    })
}

impl SeriesClass {
    pub fn scenario(&self) -> &SeriesScenario {
        &self.scenario
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Basis order `K_n`.
    pub fn order(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// `E[ψψᵀ]`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Noise covariance: `E[σ²(X)ψψᵀ]`, or `[min(τ,τ') − ττ'] ⊗ E[ψψᵀ]` stacked over `τ`.
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn a1(&self) -> &DMatrix<f64> {
        &self.a1
    }

    /// `A_2n(τ)`, one per `τ` (a single entry for mean regression).
    pub fn a2(&self) -> &[DMatrix<f64>] {
        &self.a2
    }

    /// `α_n(x, τ)` rows.
    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn covariance(&self) -> &CovarianceModel {
        &self.covariance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Smallest singular value of each `A_2n(τ)`.
    pub fn a2_min_singular(&self) -> f64 {
        self.a2
            .iter()
            .flat_map(|m| m.singular_values().iter().copied().collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest singular value of `E[ψψᵀ]`.
    pub fn gram_max_singular(&self) -> f64 {
        self.gram.singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// `Σ_i g_τ(η_i) ψ(X_i)` stacked over `τ`, from `n` fresh draws.
    pub fn score_sums(&self, n: usize, rng: &mut StreamRng) -> Vec<f64> {
        let k = self.k;
        let n_t = self.a2.len();
        let mut sums = vec![0.0; k * n_t];
        let mut psi = vec![0.0; k];
        for _ in 0..n {
            let x = self.scenario.x_law.sample(rng);
            self.scenario.basis.eval_into(k, x, &mut psi);
            if self.taus.is_empty() {
                let e: f64 = StandardNormal.sample(rng);
                let eta = self.scenario.noise_sd_at(x) * e;
                for (s, p) in sums.iter_mut().zip(&psi) {
                    *s += eta * p;
                }
            } else {
                let eta: f64 = rng.random();
                for (t, &tau) in self.taus.iter().enumerate() {
                    let g = tau - if eta <= tau { 1.0 } else { 0.0 };
                    for (s, p) in sums[t * k..(t + 1) * k].iter_mut().zip(&psi) {
                        *s += g * p;
                    }
                }
            }
        }
        sums
    }

    /// `max_{x,τ} α_n(x,τ)ᵀ sums_τ / √n`.
    pub fn statistic_from_sums(&self, sums: &[f64], n: usize) -> f64 {
        let k = self.k;
        let n_x = self.grid.len();
        let root = (n as f64).sqrt();
        (0..self.alpha.nrows())
            .map(|r| {
                let t = r / n_x;
                let s = &sums[t * k..(t + 1) * k];
                self.alpha.row(r).iter().zip(s).map(|(a, b)| a * b).sum::<f64>() / root
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One draw of `W_n = max_{x,τ} α_n(x,τ)ᵀ n^{−1/2} Σ_i g_τ(η_i) ψ(X_i)`.
pub fn series_linear_statistic(scenario: &SeriesScenario, n: usize, rng: RngPolicy) -> Result<f64> {
    let sc = build_series_class(scenario, n)?;
    let sums = sc.score_sums(n, &mut rng.stream(0));
    Ok(sc.statistic_from_sums(&sums, n))
}

/// `R` replications of the series statistic at the class's own `n`.
pub fn series_sup_sample(sc: &SeriesClass, replications: usize, rng: RngPolicy) -> Result<SupSample<f64>> {
    if replications == 0 {
        return Err(Error::invalid("R", "need at least one replication"));
    }
    let n = sc.n;
    let values = rng.replicate(replications, |_, s| {
        let sums = sc.score_sums(n, s);
        sc.statistic_from_sums(&sums, n)
    });
    SupSample::new(values, "W_n(series)", rng, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gaussian_sup_sample, ks_distance};

    fn fixed(basis: Basis, k: usize) -> SeriesScenario {
        SeriesScenario {
            basis,
            k_rule: KRule::Fixed { k },
            ..SeriesScenario::default()
        }
    }

    #[test]
    fn k_rule_rounds_cube_roots() {
        let r = KRule::default();
        assert_eq!(r.at(8000), 20);
        assert_eq!(r.at(500), 8);
        assert_eq!(r.at(2000), 13);
    }

    #[test]
    fn one_dimensional_collapse() {
        let sc = SeriesScenario {
            grid_points: 7,
            ..fixed(Basis::Legendre, 1)
        };
        let c = build_series_class(&sc, 100).unwrap();
        let s = c.covariance().sigma();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(c.alpha().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn orthonormal_homoskedastic_alpha_is_normalised_psi() {
        let sc = fixed(Basis::FourierTrig, 5);
        let c = build_series_class(&sc, 500).unwrap();
        let eye = DMatrix::<f64>::identity(5, 5);
        assert!((c.gram() - &eye).norm() < 1e-8);
        assert!((c.a1() - &eye).norm() < 1e-8);
        assert!((&c.a2()[0] - &eye).norm() < 1e-8);
        for (i, &x) in c.grid().iter().enumerate() {
            let p = Basis::FourierTrig.eval(5, x);
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (j, pj) in p.iter().enumerate() {
                assert!((c.alpha()[(i, j)] - pj / norm).abs() < 1e-8);
            }
        }
        assert!((xi_n(&sc, 5) - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn xi_n_constant_and_nested() {
        let sc = fixed(Basis::Legendre, 1);
        assert_eq!(xi_n(&sc, 1), 1.0);
        let mut prev = 0.0;
        for k in 1..12 {
            let v = xi_n(&sc, k);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn grid_covariance_has_rank_at_most_k() {
        for basis in [Basis::FourierTrig, Basis::Legendre, Basis::Bspline] {
            let sc = SeriesScenario {
                model: SeriesModel::MeanRegression {
                    noise_sd: 0.5,
                    noise_slope: 1.0,
                },
                ..fixed(basis, 6)
            };
            let c = build_series_class(&sc, 500).unwrap();
            let sv = c.covariance().singular_values();
            assert!(sv[6..].iter().all(|&s| s < 1e-8 * sv[0]), "{basis:?}");
            assert!(c.a2_min_singular() > 0.0);
            let d = c.covariance().sigma();
            for i in 0..d.nrows() {
                assert!((d[(i, i)] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_noise_statistic_vanishes_with_warning() {
        let sc = SeriesScenario {
            model: SeriesModel::MeanRegression {
                noise_sd: 0.0,
                noise_slope: 0.0,
            },
            grid_points: 5,
            ..fixed(Basis::FourierTrig, 3)
        };
        let c = build_series_class(&sc, 50).unwrap();
        assert_eq!(c.warnings().len(), 5);
        assert_eq!(series_linear_statistic(&sc, 50, RngPolicy::new(1)).unwrap(), 0.0);
    }

    #[test]
    fn quantile_summands_are_bounded_and_centred() {
        let sc = SeriesScenario {
            model: SeriesModel::QuantileRegression { taus: vec![0.5] },
            ..fixed(Basis::Legendre, 1)
        };
        let c = build_series_class(&sc, 10).unwrap();
        let mut s = RngPolicy::new(3).stream(0);
        for _ in 0..200 {
            let v = c.score_sums(1, &mut s)[0];
            assert!(v == 0.5 || v == -0.5);
        }
        let m = 20_000;
        let mean = c.score_sums(m, &mut s)[0] / m as f64;
        assert!(mean.abs() < 3.0 * 0.5 / (m as f64).sqrt());
    }

    #[test]
    fn quantile_covariance_diagonal_is_one() {
        let sc = SeriesScenario {
            model: SeriesModel::QuantileRegression {
                taus: vec![0.25, 0.5, 0.75],
            },
            grid_points: 9,
            ..fixed(Basis::Bspline, 5)
        };
        let c = build_series_class(&sc, 400).unwrap();
        let s = c.covariance().sigma();
        assert_eq!(s.nrows(), 27);
        for i in 0..27 {
            assert!((s[(i, i)] - 1.0).abs() < 1e-9);
        }
        // same x, τ = 0.25 vs 0.5: correlation (0.25 − 0.125)/sqrt(0.1875·0.25)
        let r = 0.125 / (0.1875f64 * 0.25).sqrt();
        assert!((s[(4, 9 + 4)] - r).abs() < 1e-9);
    }

    #[test]
    fn collapse_matches_gaussian_law() {
        let sc = SeriesScenario {
            grid_points: 3,
            ..fixed(Basis::FourierTrig, 1)
        };
        let c = build_series_class(&sc, 2000).unwrap();
        let e = series_sup_sample(&c, 4000, RngPolicy::new(8)).unwrap();
        let g = gaussian_sup_sample(c.covariance(), 4000, RngPolicy::new(9)).unwrap();
        let ks = ks_distance(&e, &g);
        // two-sample critical value is √2 times the one-sample radius
        assert!(ks.estimate < std::f64::consts::SQRT_2 * ks.conf_radius, "{ks:?}");
    }
}
