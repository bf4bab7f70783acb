//! Gauss–Legendre rules and the built-in one-dimensional data laws.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaDist, Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Nodes per panel used by scenario quadrature.
pub const DEFAULT_NODES: usize = 256;

/// An `m`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("nodes", "need at least one node"));
        }
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_m.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + r * x, r * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over consecutive panels of an ascending breakpoint list.
    pub fn integrate_panels(&self, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &f))
            .sum()
    }
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sorted, de-duplicated breakpoints clipped to `[lo, hi]`, always including
/// both ends.
pub fn panel_breaks(lo: f64, hi: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut b: Vec<f64> = interior.into_iter().filter(|&t| t > lo && t < hi).collect();
    b.push(lo);
    b.push(hi);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Built-in one-dimensional laws with evaluable densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DataLaw {
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
}

impl Default for DataLaw {
    fn default() -> Self {
        DataLaw::Uniform { lo: 0.0, hi: 1.0 }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

impl DataLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DataLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid("law", "uniform law needs lo < hi"));
                }
            }
            DataLaw::TruncatedNormal { mean, sd, lo, hi } => {
                if !(mean.is_finite() && sd > 0.0 && lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid("law", "truncated normal needs sd > 0 and finite lo < hi"));
                }
                if self.truncated_mass() < 1e-12 {
                    return Err(Error::invalid("law", "truncation interval carries no mass"));
                }
            }
            DataLaw::Beta { a, b } => {
                if !(a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
                    return Err(Error::invalid("law", "beta law needs a, b ≥ 1 (bounded density)"));
                }
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            DataLaw::Uniform { lo, hi } | DataLaw::TruncatedNormal { lo, hi, .. } => (lo, hi),
            DataLaw::Beta { .. } => (0.0, 1.0),
        }
    }

    fn truncated_mass(&self) -> f64 {
        match *self {
            DataLaw::TruncatedNormal { mean, sd, lo, hi } => {
                let n = std_normal();
                let (za, zb) = ((lo - mean) / sd, (hi - mean) / sd);
                if za > 0.0 {
                    n.cdf(-za) - n.cdf(-zb)
                } else {
                    n.cdf(zb) - n.cdf(za)
                }
            }
            _ => 1.0,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            DataLaw::Uniform { lo, hi } => 1.0 / (hi - lo),
            DataLaw::TruncatedNormal { mean, sd, .. } => {
                std_normal().pdf((x - mean) / sd) / (sd * self.truncated_mass())
            }
            DataLaw::Beta { a, b } => BetaDist::new(a, b).map(|d| d.pdf(x)).unwrap_or(0.0),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            DataLaw::Uniform { lo, hi } => (x - lo) / (hi - lo),
            DataLaw::TruncatedNormal { mean, sd, lo, .. } => {
                let n = std_normal();
                (n.cdf((x - mean) / sd) - n.cdf((lo - mean) / sd)) / self.truncated_mass()
            }
            DataLaw::Beta { a, b } => BetaDist::new(a, b).map(|d| d.cdf(x)).unwrap_or(0.0),
        }
    }

    /// Supremum of the density (closed form).
    pub fn pdf_sup(&self) -> f64 {
        match *self {
            DataLaw::Uniform { lo, hi } => 1.0 / (hi - lo),
            DataLaw::TruncatedNormal { mean, lo, hi, .. } => self.pdf(mean.clamp(lo, hi)),
            DataLaw::Beta { a, b } => {
                if a == 1.0 && b == 1.0 {
                    1.0
                } else {
                    self.pdf((a - 1.0) / (a + b - 2.0))
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            DataLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            DataLaw::TruncatedNormal { mean, sd, lo, hi } => {
                let n = std_normal();
                let (za, zb) = ((lo - mean) / sd, (hi - mean) / sd);
                let u: f64 = rng.random();
                // invert through the tail nearer to the interval for accuracy
                let z = if za > 0.0 {
                    let (ta, tb) = (n.cdf(-za), n.cdf(-zb));
                    -n.inverse_cdf(ta - u * (ta - tb))
                } else {
                    let (ca, cb) = (n.cdf(za), n.cdf(zb));
                    n.inverse_cdf(ca + u * (cb - ca))
                };
                (mean + sd * z).clamp(lo, hi)
            }
            DataLaw::Beta { a, b } => rand_distr::Beta::new(a, b)
                .expect("validated beta parameters")
                .sample(rng),
        }
    }
}

/// `(nodes, weights)` of a composite rule for `E_law[·]` with panels split at
/// the support ends and the supplied interior breakpoints.
pub fn law_rule(law: &DataLaw, rule: &GaussLegendre, interior: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = law.support();
    let breaks = panel_breaks(lo, hi, interior.iter().copied());
    let mut nodes = Vec::with_capacity(rule.len() * (breaks.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for w in breaks.windows(2) {
        for (x, wt) in rule.mapped(w[0], w[1]) {
            nodes.push(x);
            weights.push(wt * law.pdf(x));
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngPolicy;

    #[test]
    fn integrates_polynomials_exactly() {
        for m in [1usize, 2, 5, 16, 64, 256] {
            let gl = GaussLegendre::new(m).unwrap();
            let s: f64 = gl.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "m={m} sum={s}");
            // degree 2m-1 exact
            let deg = 2 * m - 1;
            let got = gl.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let gl = GaussLegendre::new(255).unwrap();
        assert!(gl.nodes().windows(2).all(|w| w[0] < w[1]));
        for (a, b) in gl.nodes().iter().zip(gl.nodes().iter().rev()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn smooth_integrand_spectral_accuracy() {
        let gl = GaussLegendre::new(DEFAULT_NODES).unwrap();
        let got = gl.integrate(0.0, std::f64::consts::PI, f64::sin);
        assert!((got - 2.0).abs() < 1e-13);
        let g = gl.integrate(-8.0, 8.0, |x| (-0.5 * x * x).exp());
        assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn law_densities_integrate_to_one() {
        let gl = GaussLegendre::new(DEFAULT_NODES).unwrap();
        for law in [
            DataLaw::Uniform { lo: -1.0, hi: 2.0 },
            DataLaw::TruncatedNormal { mean: 0.3, sd: 0.2, lo: 0.0, hi: 1.0 },
            DataLaw::TruncatedNormal { mean: 3.0, sd: 0.5, lo: 0.0, hi: 1.0 },
            DataLaw::Beta { a: 2.0, b: 2.0 },
            DataLaw::Beta { a: 2.5, b: 4.0 },
        ] {
            law.validate().unwrap();
            let (_, w) = law_rule(&law, &gl, &[]);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-8, "{law:?}: {total}");
            let mid = 0.5 * (law.support().0 + law.support().1);
            let (lo, _) = law.support();
            let cdf_q = gl.integrate(lo, mid, |x| law.pdf(x));
            assert!((cdf_q - law.cdf(mid)).abs() < 1e-8, "{law:?}");
        }
    }

    #[test]
    fn samplers_match_cdf() {
        let mut rng = RngPolicy::new(3).stream(0);
        for law in [
            DataLaw::TruncatedNormal { mean: 0.3, sd: 0.2, lo: 0.0, hi: 1.0 },
            DataLaw::TruncatedNormal { mean: 3.0, sd: 0.5, lo: 0.0, hi: 1.0 },
            DataLaw::Beta { a: 2.0, b: 2.0 },
            DataLaw::Uniform { lo: 2.0, hi: 5.0 },
        ] {
            let mut xs: Vec<f64> = (0..20000).map(|_| law.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let m = xs.len() as f64;
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = law.cdf(x);
                    (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.015, "{law:?}: {ks}");
        }
    }

    #[test]
    fn pdf_sup_values() {
        assert!((DataLaw::Beta { a: 2.0, b: 2.0 }.pdf_sup() - 1.5).abs() < 1e-12);
        assert_eq!(DataLaw::Uniform { lo: 0.0, hi: 2.0 }.pdf_sup(), 0.5);
    }
}
