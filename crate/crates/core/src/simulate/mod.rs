//! Monte Carlo sampling of empirical and Gaussian suprema and the
//! distributional comparisons between them.

mod covariance;

use std::fmt::Write as _;
use std::io::BufRead;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use covariance::{gaussian_covariance, CovarianceModel, CovarianceSource, RIDGE_LADDER};

use crate::error::{Error, Result};
use crate::funcclass::DiscretizedClass;
use crate::rng::{RngPolicy, StreamRng};
use crate::scalar::Scalar;

/// Sorted replications of a supremum statistic and the RNG policy that
/// produced them. `n = 0` marks a Gaussian analogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupSample<T> {
    values: Vec<T>,
    statistic_id: String,
    rng: RngPolicy,
    n: usize,
}

impl<T: Scalar> SupSample<T> {
    pub fn new(mut values: Vec<T>, statistic_id: impl Into<String>, rng: RngPolicy, n: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("sup sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("values", "NaN in sup sample"));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("NaN excluded"));
        Ok(SupSample {
            values,
            statistic_id: statistic_id.into(),
            rng,
            n,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn statistic_id(&self) -> &str {
        &self.statistic_id
    }

    pub fn rng(&self) -> RngPolicy {
        self.rng
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a + v) / T::from_usize_lossy(self.len())
    }

    /// Unbiased sample variance (zero for a single value).
    pub fn variance(&self) -> T {
        let r = self.len();
        if r < 2 {
            return T::zero();
        }
        let m = self.mean();
        self.values.iter().fold(T::zero(), |a, &v| a + (v - m) * (v - m)) / T::from_usize_lossy(r - 1)
    }

    /// Standard error of the mean.
    pub fn mean_se(&self) -> T {
        (self.variance() / T::from_usize_lossy(self.len())).sqrt()
    }

    /// CSV with header `statistic_id,seed,n,R,value`, one replication per row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("statistic_id,seed,n,R,value\n");
        let r = self.len();
        for v in &self.values {
            let _ = writeln!(s, "{},{},{},{},{}", self.statistic_id, self.rng.master_seed, self.n, r, v);
        }
        s
    }
}

impl<T: Scalar + std::str::FromStr> SupSample<T> {
    pub fn from_csv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.unwrap_or_default()).unwrap_or_default();
        if header.trim() != "statistic_id,seed,n,R,value" {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header {header:?}"),
            });
        }
        let mut id = None;
        let mut seed = 0u64;
        let mut n = 0usize;
        let mut values = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |m: &str| Error::Parse {
                line: line_no,
                message: m.to_string(),
            };
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            id.get_or_insert_with(|| f[0].to_string());
            seed = f[1].parse().map_err(|_| bad("bad seed"))?;
            n = f[2].parse().map_err(|_| bad("bad n"))?;
            values.push(f[4].parse().map_err(|_| bad("bad value"))?);
        }
        SupSample::new(values, id.unwrap_or_default(), RngPolicy::new(seed), n)
    }
}

/// How the empirical process is centred.
#[derive(Debug, Clone, PartialEq)]
pub enum Centering<T> {
    /// The class is already `P`-centred.
    Centered,
    /// Known means `P f_j`.
    AnalyticMeans(Vec<T>),
    /// Per-replication sample means (flagged: changes the statistic).
    Plugin,
}

/// `R` replications of `Z_n = max_j n^{-1/2} Σ_i (f_j(X_i) − P f_j)`.
pub fn empirical_sup_sample<S, T, F>(
    class: &DiscretizedClass<S, T>,
    sampler: F,
    n: usize,
    replications: usize,
    rng: RngPolicy,
    centering: &Centering<T>,
) -> Result<SupSample<T>>
where
    S: Send + Sync,
    T: Scalar,
    F: Fn(&mut StreamRng) -> S + Sync,
{
    if n < 3 {
        return Err(Error::invalid("n", "n ≥ 3 is a standing assumption"));
    }
    if replications == 0 {
        return Err(Error::invalid("R", "need at least one replication"));
    }
    let k = class.len();
    if let Centering::AnalyticMeans(m) = centering {
        if m.len() != k {
            return Err(Error::DomainMismatch(format!("{} means for {} functions", m.len(), k)));
        }
    }
    let nf = T::from_usize_lossy(n);
    let values = rng.replicate(replications, |_, stream| {
        let mut sums = vec![T::zero(); k];
        let mut row = vec![T::zero(); k];
        for _ in 0..n {
            let x = sampler(stream);
            class.eval_into(&x, &mut row);
            for (s, v) in sums.iter_mut().zip(&row) {
                *s = *s + *v;
            }
        }
        let shift: Box<dyn Fn(usize) -> T> = match centering {
            Centering::Centered => Box::new(|_| T::zero()),
            Centering::AnalyticMeans(m) => Box::new(move |j| nf * m[j]),
            Centering::Plugin => {
                let sums = sums.clone();
                Box::new(move |j| sums[j])
            }
        };
        (0..k)
            .map(|j| (sums[j] - shift(j)) / nf.sqrt())
            .fold(T::neg_infinity(), T::max)
    });
    let id = match centering {
        Centering::Plugin => "Z_n(plugin)",
        _ => "Z_n",
    };
    SupSample::new(values, id, rng, n)
}

fn gaussian_sample_with(cov: &CovarianceModel, replications: usize, rng: RngPolicy, abs: bool, id: &str) -> Result<SupSample<f64>> {
    if replications == 0 {
        return Err(Error::invalid("R", "need at least one replication"));
    }
    let r = cov.rank();
    let values = rng.replicate(replications, |_, stream| {
        let xi: Vec<f64> = (0..r).map(|_| StandardNormal.sample(stream)).collect();
        cov.sup_of(&xi, abs)
    });
    SupSample::new(values, id, rng, 0)
}

/// `R` replications of `max_j (Bξ)_j` with `BBᵀ` the (repaired) covariance.
pub fn gaussian_sup_sample(cov: &CovarianceModel, replications: usize, rng: RngPolicy) -> Result<SupSample<f64>> {
    gaussian_sample_with(cov, replications, rng, false, "Z_tilde")
}

/// `R` replications of `max_j |(Bξ)_j|`, the analogue for a class closed
/// under negation.
pub fn gaussian_abs_sup_sample(cov: &CovarianceModel, replications: usize, rng: RngPolicy) -> Result<SupSample<f64>> {
    gaussian_sample_with(cov, replications, rng, true, "abs_Z_tilde")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult<T> {
    pub estimate: T,
    /// `sqrt(log(2/0.05) / (2 min(R_a, R_b)))`.
    pub conf_radius: T,
}

/// Two-sample Kolmogorov distance with a distribution-free 95% radius.
pub fn ks_distance<T: Scalar>(a: &SupSample<T>, b: &SupSample<T>) -> KsResult<T> {
    let (va, vb) = (a.values(), b.values());
    let (na, nb) = (T::from_usize_lossy(va.len()), T::from_usize_lossy(vb.len()));
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = T::zero();
    while i < va.len() || j < vb.len() {
        let t = match (va.get(i), vb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < va.len() && va[i] <= t {
            i += 1;
        }
        while j < vb.len() && vb[j] <= t {
            j += 1;
        }
        let gap = (T::from_usize_lossy(i) / na - T::from_usize_lossy(j) / nb).abs();
        d = d.max(gap);
    }
    let m = T::from_usize_lossy(va.len().min(vb.len()));
    let conf_radius = ((T::lit(2.0) / T::lit(0.05)).ln() / (T::lit(2.0) * m)).sqrt();
    KsResult { estimate: d, conf_radius }
}

/// Mass of the monotone (quantile) coupling of the two empirical laws on
/// which the paired values differ by more than `delta`.
///
/// The quantile functions are stepped through jointly, so unequal sample
/// sizes are handled exactly.
pub fn quantile_coupling<T: Scalar>(a: &SupSample<T>, b: &SupSample<T>, delta: T) -> T {
    let (va, vb) = (a.values(), b.values());
    let (na, nb) = (va.len(), vb.len());
    // Work in units of 1/(na·nb) to keep the breakpoints exact.
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ca, mut cb) = (nb, na); // remaining units in current atoms
    let mut exceed: u128 = 0;
    while i < na && j < nb {
        let step = ca.min(cb);
        if (va[i] - vb[j]).abs() > delta {
            exceed += step as u128;
        }
        ca -= step;
        cb -= step;
        if ca == 0 {
            i += 1;
            ca = nb;
        }
        if cb == 0 {
            j += 1;
            cb = na;
        }
    }
    T::from_f64(exceed as f64 / (na as f64 * nb as f64)).unwrap_or_else(T::zero)
}

/// `max_x #{v : |v − x| ≤ ε} / R` over centres `x` at the sample points.
pub fn levy_concentration<T: Scalar>(a: &SupSample<T>, epsilon: T) -> T {
    let v = a.values();
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut best = 0usize;
    for &x in v {
        while v[lo] < x - epsilon {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < v.len() && v[hi] <= x + epsilon {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    T::from_usize_lossy(best) / T::from_usize_lossy(v.len())
}

/// Empirical `(1 − α)`-quantile, taking the higher order statistic at
/// position `(R − 1)(1 − α)`.
pub fn sup_quantile<T: Scalar>(a: &SupSample<T>, alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::invalid("alpha", format!("α = {alpha} outside (0, 1)")));
    }
    let r = a.len();
    let pos = (T::from_usize_lossy(r - 1) * (T::one() - alpha)).as_f64();
    // guard against representation error just above an integer
    let idx = (pos - 1e-9).ceil().max(0.0) as usize;
    Ok(a.values()[idx.min(r - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn sample(v: Vec<f64>) -> SupSample<f64> {
        SupSample::new(v, "t", RngPolicy::new(0), 0).unwrap()
    }

    fn normals(seed: u64, r: usize, sd: f64) -> Vec<f64> {
        let mut s = RngPolicy::new(seed).stream(0);
        (0..r)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut s);
                sd * z
            })
            .collect()
    }

    #[test]
    fn constant_zero_class_gives_zeros() {
        let c = DiscretizedClass::<f64, f64>::from_fns(vec![|_: &f64| 0.0], |_: &f64| 1.0).unwrap();
        let s = empirical_sup_sample(&c, |r: &mut StreamRng| r.random::<f64>(), 10, 50, RngPolicy::new(1), &Centering::Centered).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clt_single_function() {
        let c = DiscretizedClass::<f64, f64>::from_fns(vec![|x: &f64| x - 0.5], |_: &f64| 0.5).unwrap();
        let r = 2000;
        let s = empirical_sup_sample(&c, |g: &mut StreamRng| g.random::<f64>(), 2000, r, RngPolicy::new(2), &Centering::Centered).unwrap();
        let sd = (1.0f64 / 12.0).sqrt();
        assert!(s.mean().abs() < 3.0 * sd / (r as f64).sqrt());
        // variance of the sample variance for a normal: 2σ⁴/(R−1)
        let v = s.variance();
        assert!((v - 1.0 / 12.0).abs() < 4.0 * (2.0f64 / (r as f64 - 1.0)).sqrt() / 12.0, "{v}");
    }

    #[test]
    fn negation_pair_is_nonnegative() {
        let c = DiscretizedClass::<f64, f64>::from_fns(
            vec![Box::new(|x: &f64| x - 0.5) as Box<dyn Fn(&f64) -> f64 + Send + Sync>, Box::new(|x: &f64| 0.5 - x)],
            |_: &f64| 0.5,
        )
        .unwrap();
        let s = empirical_sup_sample(&c, |g: &mut StreamRng| g.random::<f64>(), 50, 200, RngPolicy::new(3), &Centering::Centered).unwrap();
        assert!(s.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn empirical_rejects_small_n() {
        let c = DiscretizedClass::<f64, f64>::from_fns(vec![|x: &f64| *x], |_: &f64| 1.0).unwrap();
        assert!(empirical_sup_sample(&c, |g: &mut StreamRng| g.random::<f64>(), 2, 5, RngPolicy::new(1), &Centering::Centered).is_err());
    }

    #[test]
    fn analytic_means_match_centred_class() {
        let c = DiscretizedClass::<f64, f64>::from_fns(vec![|x: &f64| *x], |_: &f64| 1.0).unwrap();
        let cc = DiscretizedClass::<f64, f64>::from_fns(vec![|x: &f64| *x - 0.5], |_: &f64| 1.0).unwrap();
        let a = empirical_sup_sample(&c, |g: &mut StreamRng| g.random::<f64>(), 20, 100, RngPolicy::new(4), &Centering::AnalyticMeans(vec![0.5])).unwrap();
        let b = empirical_sup_sample(&cc, |g: &mut StreamRng| g.random::<f64>(), 20, 100, RngPolicy::new(4), &Centering::Centered).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_trivial_cases() {
        let a = sample(vec![0.1, 0.5, 0.3]);
        assert_eq!(ks_distance(&a, &a).estimate, 0.0);
        assert_eq!(ks_distance(&sample(vec![0.0]), &sample(vec![1.0])).estimate, 1.0);
        let r = ks_distance(&sample(vec![1.0; 4]), &sample(vec![1.0; 9]));
        assert_eq!(r.estimate, 0.0);
        assert!((r.conf_radius - (40f64.ln() / 8.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_shifted_uniforms() {
        let r = 100_000;
        let mut s = RngPolicy::new(5).stream(0);
        let a: Vec<f64> = (0..r).map(|_| s.random::<f64>()).collect();
        let b: Vec<f64> = (0..r).map(|_| s.random::<f64>() + 0.1).collect();
        let k = ks_distance(&sample(a), &sample(b));
        assert!((k.estimate - 0.1).abs() < 2.0 * k.conf_radius, "{k:?}");
    }

    #[test]
    fn coupling_trivial_cases() {
        let a = sample(vec![0.3, -1.0, 2.0, 0.7]);
        assert_eq!(quantile_coupling(&a, &a, 1e-9), 0.0);
        let b = sample(a.values().iter().map(|v| v + 0.5).collect());
        assert_eq!(quantile_coupling(&a, &b, 0.4), 1.0);
        assert_eq!(quantile_coupling(&a, &b, 0.6), 0.0);
        // unequal sizes: {0, 1} against {0, 0, 1}; monotone coupling moves mass 1/6
        let u = sample(vec![0.0, 1.0]);
        let w = sample(vec![0.0, 0.0, 1.0]);
        assert!((quantile_coupling(&u, &w, 0.5) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn coupling_of_scaled_normals() {
        let r = 100_000;
        let a = sample(normals(6, r, 1.0));
        let b = sample(normals(7, r, 1.2));
        let e = quantile_coupling(&a, &b, 0.1);
        let p = 2.0 * Normal::new(0.0, 1.0).unwrap().cdf(-0.5);
        let se = (p * (1.0 - p) / r as f64).sqrt();
        // both quantile functions carry sampling noise; allow 3 SEs plus the
        // KS-scale perturbation of the coupling boundary
        assert!((e - p).abs() < 3.0 * se + 0.01, "{e} vs {p}");
    }

    #[test]
    fn coupling_at_zero_counts_unequal_pairs() {
        let a = sample(vec![1.0, 2.0, 3.0, 4.0]);
        let b = sample(vec![1.0, 2.5, 3.0, 5.0]);
        assert_eq!(quantile_coupling(&a, &b, 0.0), 0.5);
    }

    #[test]
    fn levy_cases() {
        assert_eq!(levy_concentration(&sample(vec![2.0; 7]), 1e-9), 1.0);
        let r = 100_000;
        let a = sample(normals(8, r, 1.0));
        let l = levy_concentration(&a, 0.1);
        let p = 2.0 * Normal::new(0.0, 1.0).unwrap().cdf(0.1) - 1.0;
        let se = (p * (1.0 - p) / r as f64).sqrt();
        // the max over centres adds a small upward bias
        assert!(l >= p - 3.0 * se && l <= p + 3.0 * se + 0.005, "{l} vs {p}");
        let mut prev = 0.0;
        for k in 1..20 {
            let v = levy_concentration(&a, k as f64 * 0.05);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn quantile_conventions() {
        let s = sample(vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(sup_quantile(&s, 0.5).unwrap(), 0.0);
        let even = sample(vec![-1.0, -0.5, 0.5, 1.0]);
        assert_eq!(sup_quantile(&even, 0.5).unwrap(), 0.5);
        assert!(sup_quantile(&s, 0.0).is_err());
        let a = sample(normals(9, 1000, 1.0));
        let mut prev = f64::INFINITY;
        for k in 1..20 {
            let q = sup_quantile(&a, k as f64 * 0.05).unwrap();
            assert!(q <= prev);
            prev = q;
        }
    }

    #[test]
    fn gaussian_identity_2x2_mean() {
        let cov = CovarianceModel::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let s = gaussian_sup_sample(&cov, 20_000, RngPolicy::new(10)).unwrap();
        let want = 1.0 / std::f64::consts::PI.sqrt();
        assert!((s.mean() - want).abs() < 3.0 * s.mean_se());
    }

    #[test]
    fn gaussian_quantile_of_two_normals() {
        let cov = CovarianceModel::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let s = gaussian_sup_sample(&cov, 100_000, RngPolicy::new(11)).unwrap();
        assert!(sup_quantile(&s, 0.75).unwrap().abs() < 0.03);
    }

    #[test]
    fn gaussian_scale_equivariance() {
        let base = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 2.0, 0.4, 0.1, 0.4, 1.5]);
        let a = CovarianceModel::from_matrix(base.clone()).unwrap();
        let b = CovarianceModel::from_matrix(base * 4.0).unwrap();
        let sa = gaussian_sup_sample(&a, 500, RngPolicy::new(12)).unwrap();
        let sb = gaussian_sup_sample(&b, 500, RngPolicy::new(12)).unwrap();
        for (x, y) in sa.values().iter().zip(sb.values()) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let s = SupSample::new(vec![0.1, 1.0 / 3.0, -2.5e-17], "Z_n", RngPolicy::new(99), 500).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("statistic_id,seed,n,R,value\nZ_n,99,500,3,"));
        let back = SupSample::<f64>::from_csv(text.as_bytes()).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.n(), 500);
        assert_eq!(back.rng().master_seed, 99);
    }
}
