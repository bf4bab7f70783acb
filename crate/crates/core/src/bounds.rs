//! Closed-form coupling, deviation and maximal bounds.
//!
//! Every universal constant left unspecified by the theory (`C`, `c`, `K(q)`,
//! `C_σ`) is a parameter, echoed back in the reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngPolicy, StreamRng};
use crate::scalar::Scalar;
use crate::smoothmax::{applied_beta, epsilon_beta_delta};

/// How an input number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Analytic,
    MonteCarlo { seed: u64, reps: usize },
}

/// Serde adapter writing infinite orders as the string `"inf"`.
pub mod extended {
    use super::Scalar;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, T: Scalar>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(v.as_f64())
        } else if *v > T::zero() {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Scalar>(d: D) -> Result<T, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(T::lit(x)),
            Repr::Text(s) => match s.trim() {
                "inf" | "infinity" | "+inf" => Ok(T::infinity()),
                "-inf" | "-infinity" => Ok(T::neg_infinity()),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }
}

/// A right-continuous step function given by ascending knots; below the
/// first knot it takes the first value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum StepProfile<T> {
    Constant(T),
    Table { knots: Vec<T>, values: Vec<T> },
}

impl<T: Scalar> StepProfile<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            StepProfile::Constant(v) => *v,
            StepProfile::Table { knots, values } => {
                let k = knots.partition_point(|&t| t <= x);
                values[k.saturating_sub(1)]
            }
        }
    }

    fn values(&self) -> &[T] {
        match self {
            StepProfile::Constant(v) => std::slice::from_ref(v),
            StepProfile::Table { values, .. } => values,
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if let StepProfile::Table { knots, values } = self {
            if knots.is_empty() || knots.len() != values.len() {
                return Err(Error::invalid(name, "table needs equally many knots and values"));
            }
            if knots.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(name, "knots must be strictly increasing"));
            }
        }
        if self.values().iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::invalid(name, "values must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values().windows(2).all(|w| w[1] <= w[0])
    }
}

/// Moment and complexity inputs of the main coupling bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct MomentInputs<T> {
    pub n: usize,
    pub p_or_n: usize,
    pub sigma: T,
    pub b: T,
    #[serde(with = "extended")]
    pub q: T,
    /// `‖F‖_{P,2}`.
    pub envelope_l2: T,
    /// `‖M‖_q` with `M = max_i F(X_i)`.
    pub m_q: T,
    /// `‖M‖_2`.
    pub m_2: T,
    pub kappa: T,
    /// `E‖G_n‖_{𝔽·𝔽}`.
    pub eg_ff: T,
    /// `ε ↦ φ_n(ε)`.
    pub phi: StepProfile<T>,
    /// `ε ↦ H_n(ε)`.
    pub h_profile: StepProfile<T>,
    /// `u ↦ P{(F/κ)³ 1(F/κ > u)}`.
    pub tail: StepProfile<T>,
    #[serde(default)]
    pub provenance: BTreeMap<String, Provenance>,
}

impl<T: Scalar> MomentInputs<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid("n", "n ≥ 3 is a standing assumption"));
        }
        if !(self.q >= T::lit(3.0)) {
            return Err(Error::invalid("q", "the main coupling bound requires q ≥ 3"));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("b", self.b),
            ("envelope_l2", self.envelope_l2),
            ("m_q", self.m_q),
            ("m_2", self.m_2),
            ("kappa", self.kappa),
            ("eg_ff", self.eg_ff),
        ] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(Error::invalid(name, format!("{v} must be finite and ≥ 0")));
            }
        }
        if self.sigma > self.b {
            return Err(Error::invalid("sigma", "σ ≤ b required"));
        }
        if self.m_2 > self.m_q {
            return Err(Error::invalid("m_2", "‖M‖_2 ≤ ‖M‖_q required for q ≥ 2"));
        }
        self.phi.validate("phi")?;
        self.h_profile.validate("h_profile")?;
        self.tail.validate("tail")?;
        let log_n = T::from_usize_lossy(self.n).ln();
        if self.h_profile.values().iter().any(|&h| h < log_n * (T::one() - T::loose_eps())) {
            return Err(Error::invalid("h_profile", "H_n(ε) ≥ log n required"));
        }
        if !self.h_profile.is_non_increasing() {
            return Err(Error::invalid("h_profile", "H_n must be non-increasing in ε"));
        }
        Ok(())
    }
}

/// Universal constants of the main coupling bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetConstants<T> {
    /// `K(q)`, multiplying `Δ_n` in the deviation threshold.
    pub k_q: T,
    /// `c` inside the tail functional.
    pub c: T,
    /// `C` in front of `log n / n`.
    pub c_prob: T,
}

impl<T: Scalar> Default for BudgetConstants<T> {
    fn default() -> Self {
        BudgetConstants {
            k_q: T::one(),
            c: T::one(),
            c_prob: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetTerms<T> {
    pub phi: T,
    pub eps_term: T,
    #[serde(rename = "Mq_term")]
    pub mq_term: T,
    #[serde(rename = "M2_term")]
    pub m2_term: T,
    #[serde(rename = "FF_term")]
    pub ff_term: T,
    pub kappa_term: T,
}

impl<T: Scalar> BudgetTerms<T> {
    pub fn as_array(&self) -> [T; 6] {
        [
            self.phi,
            self.eps_term,
            self.mq_term,
            self.m2_term,
            self.ff_term,
            self.kappa_term,
        ]
    }

    /// Left-to-right sum in declaration order.
    pub fn sum(&self) -> T {
        self.as_array().iter().fold(T::zero(), |a, &t| a + t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBudget<T> {
    pub epsilon: T,
    pub gamma: T,
    pub terms: BudgetTerms<T>,
    /// `Δ_n(ε, γ)`.
    pub delta_n: T,
    /// `K(q)·Δ_n(ε, γ)`.
    pub threshold: T,
    /// `δ_n(ε, γ)`.
    pub delta_n_tail: T,
    /// Unclamped `γ(1 + δ_n) + C log n / n`.
    pub prob_bound: T,
    pub constants_used: BTreeMap<String, T>,
}

impl<T: Scalar> CouplingBudget<T> {
    pub fn prob_bound_clamped(&self) -> T {
        clamp01(self.prob_bound)
    }
}

fn clamp01<T: Scalar>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

fn inv_order<T: Scalar>(q: T) -> T {
    if q.is_finite() {
        q.recip()
    } else {
        T::zero()
    }
}

fn check_unit_open<T: Scalar>(name: &'static str, x: T) -> Result<()> {
    if x > T::zero() && x < T::one() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{x} outside (0, 1)")))
    }
}

/// Six-term coupling budget `Δ_n(ε, γ)` with its tail and probability terms.
pub fn main_theorem_budget<T: Scalar>(
    inputs: &MomentInputs<T>,
    epsilon: T,
    gamma: T,
    constants: &BudgetConstants<T>,
) -> Result<CouplingBudget<T>> {
    inputs.validate()?;
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(Error::invalid("epsilon", format!("ε = {epsilon} outside (0, 1]")));
    }
    check_unit_open("gamma", gamma)?;
    let n = T::from_usize_lossy(inputs.n);
    let iq = inv_order(inputs.q);
    let h = inputs.h_profile.eval(epsilon);
    let half = T::lit(0.5);
    let third = T::one() / T::lit(3.0);
    let sqrt_n = n.sqrt();
    let g_q = gamma.powf(-iq);
    let terms = BudgetTerms {
        phi: inputs.phi.eval(epsilon),
        eps_term: g_q * epsilon * inputs.envelope_l2,
        mq_term: g_q * inputs.m_q / sqrt_n,
        m2_term: gamma.powf(-T::lit(2.0) * iq) * inputs.m_2 / sqrt_n,
        ff_term: n.powf(-T::lit(0.25)) * gamma.powf(-half) * inputs.eg_ff.sqrt() * h.sqrt(),
        kappa_term: n.powf(-T::one() / T::lit(6.0))
            * gamma.powf(-third)
            * inputs.kappa
            * h.powf(T::lit(2.0) * third),
    };
    let delta_n = terms.sum();
    let u = constants.c * gamma.powf(-third) * n.powf(third) * h.powf(-third);
    let delta_n_tail = T::lit(0.25) * inputs.tail.eval(u);
    let prob_bound = gamma * (T::one() + delta_n_tail) + constants.c_prob * n.ln() / n;
    let constants_used = BTreeMap::from([
        ("K_q".to_string(), constants.k_q),
        ("c".to_string(), constants.c),
        ("C".to_string(), constants.c_prob),
    ]);
    Ok(CouplingBudget {
        epsilon,
        gamma,
        terms,
        delta_n,
        threshold: constants.k_q * delta_n,
        delta_n_tail,
        prob_bound,
        constants_used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcBudget<T> {
    pub k_n: T,
    pub terms: [T; 3],
    pub total: T,
    /// Unclamped `C(γ + log n / n)`.
    pub prob_bound: T,
    pub constants_used: BTreeMap<String, T>,
}

/// Three-term coupling bound for VC-type classes.
#[allow(clippy::too_many_arguments)]
pub fn vc_class_budget<T: Scalar>(
    n: usize,
    gamma: T,
    q: T,
    b: T,
    sigma: T,
    a: T,
    v: T,
    c_const: T,
    c_prob: T,
) -> Result<VcBudget<T>> {
    if n < 3 {
        return Err(Error::invalid("n", "n ≥ 3 is a standing assumption"));
    }
    check_unit_open("gamma", gamma)?;
    if !(q >= T::lit(4.0)) {
        return Err(Error::invalid("q", "q must lie in [4, ∞]"));
    }
    if !(sigma > T::zero()) {
        return Err(Error::invalid("sigma", "σ must be positive"));
    }
    if sigma > b {
        return Err(Error::invalid("sigma", "σ ≤ b required"));
    }
    if !(a >= T::E()) || !(v >= T::one()) {
        return Err(Error::invalid("A", "need A ≥ e and v ≥ 1"));
    }
    if !(a * b / sigma >= T::E()) {
        return Err(Error::invalid("A", "need Ab/σ ≥ e"));
    }
    let nf = T::from_usize_lossy(n);
    let k_n = c_const * v * nf.ln().max((a * b / sigma).ln());
    let half = T::lit(0.5);
    let third = T::one() / T::lit(3.0);
    let t1 = b * k_n / (gamma.sqrt() * nf.powf(half - inv_order(q)));
    let t2 = (b * sigma).sqrt() * k_n.powf(T::lit(0.75)) / (gamma.sqrt() * nf.powf(T::lit(0.25)));
    let t3 = (b * sigma * sigma * k_n * k_n).powf(third)
        / (gamma.powf(third) * nf.powf(T::one() / T::lit(6.0)));
    Ok(VcBudget {
        k_n,
        terms: [t1, t2, t3],
        total: t1 + t2 + t3,
        prob_bound: c_prob * (gamma + nf.ln() / nf),
        constants_used: BTreeMap::from([("c".to_string(), c_const), ("C".to_string(), c_prob)]),
    })
}

/// Moment functionals of a triangular array `X_1..X_n ∈ ℝ^p`.
pub trait SteinMoments<T> {
    /// `E max_{j,k} |Σ_i (X_ij X_ik − E X_ij X_ik)|`.
    fn b1(&self) -> T;
    /// `E max_j Σ_i |X_ij|³`.
    fn b2(&self) -> T;
    /// `Σ_i E[max_j |X_ij|³ · 1(max_j |X_ij| > u)]`.
    fn tail3(&self, u: T) -> T;
    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
}

/// Moments given in closed form.
pub struct AnalyticStein<T> {
    pub b1: T,
    pub b2: T,
    pub tail3: Box<dyn Fn(T) -> T + Send + Sync>,
}

impl<T: Scalar> AnalyticStein<T> {
    pub fn zero() -> Self {
        AnalyticStein {
            b1: T::zero(),
            b2: T::zero(),
            tail3: Box::new(|_| T::zero()),
        }
    }

    /// Coordinates bounded by `b/√n` in absolute value, with `|X_ij| = b/√n`
    /// as the worst case: `B1 = b²·sqrt(log(1+p)/n)`, `B2 = b³/√n` and the
    /// truncated third moment `b³/√n · 1(b/√n > u)`.
    pub fn bounded_profile(n: usize, p: usize, b: T) -> Self {
        let nf = T::from_usize_lossy(n);
        let pf = T::from_usize_lossy(p);
        let level = b / nf.sqrt();
        let b2 = b * b * b / nf.sqrt();
        AnalyticStein {
            b1: b * b * ((T::one() + pf).ln() / nf).sqrt(),
            b2,
            tail3: Box::new(move |u| if level > u { b2 } else { T::zero() }),
        }
    }
}

impl<T: Scalar> SteinMoments<T> for AnalyticStein<T> {
    fn b1(&self) -> T {
        self.b1
    }
    fn b2(&self) -> T {
        self.b2
    }
    fn tail3(&self, u: T) -> T {
        (self.tail3)(u)
    }
}

/// Monte Carlo estimates of the Stein moment functionals from replicated
/// raw samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledStein {
    pub b1: f64,
    pub b1_se: f64,
    pub b2: f64,
    pub b2_se: f64,
    pub reps: usize,
    pub seed: u64,
    /// All `max_j |X_ij|` across replications, ascending.
    row_max: Vec<f64>,
    /// `suffix_cubes[k] = Σ_{m ≥ k} row_max[m]³`.
    suffix_cubes: Vec<f64>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / r;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (r - 1.0);
    (m, (v / r).sqrt())
}

impl SampledStein {
    /// `draw` fills a row-major `n × p` buffer with one replication of the
    /// array. `gram` is `Σ_i E[X_i X_iᵀ]` (row-major `p × p`); when absent
    /// it is replaced by the across-replication average.
    pub fn estimate<F>(
        n: usize,
        p: usize,
        reps: usize,
        policy: RngPolicy,
        gram: Option<&[f64]>,
        draw: F,
    ) -> Result<Self>
    where
        F: Fn(&mut StreamRng, &mut [f64]) + Sync,
    {
        if n == 0 || p == 0 || reps == 0 {
            return Err(Error::invalid("reps", "n, p and reps must be positive"));
        }
        if let Some(g) = gram {
            if g.len() != p * p {
                return Err(Error::DomainMismatch(format!("gram has {} entries, need {}", g.len(), p * p)));
            }
        }
        struct Rep {
            s: Vec<f64>,
            b2: f64,
            row_max: Vec<f64>,
        }
        let per_rep: Vec<Rep> = policy.replicate(reps, |_, rng| {
            let mut x = vec![0.0; n * p];
            draw(rng, &mut x);
            let mut s = vec![0.0; p * p];
            let mut col3 = vec![0.0; p];
            let mut row_max = Vec::with_capacity(n);
            for row in x.chunks_exact(p) {
                let mut m = 0.0f64;
                for j in 0..p {
                    let a = row[j].abs();
                    m = m.max(a);
                    col3[j] += a * a * a;
                    for k in j..p {
                        s[j * p + k] += row[j] * row[k];
                    }
                }
                row_max.push(m);
            }
            Rep {
                s,
                b2: col3.iter().copied().fold(0.0, f64::max),
                row_max,
            }
        });
        let mean_gram: Vec<f64> = match gram {
            Some(g) => g.to_vec(),
            None => {
                let mut g = vec![0.0; p * p];
                for r in &per_rep {
                    for (a, b) in g.iter_mut().zip(&r.s) {
                        *a += b;
                    }
                }
                g.iter_mut().for_each(|v| *v /= reps as f64);
                g
            }
        };
        let b1s: Vec<f64> = per_rep
            .iter()
            .map(|r| {
                let mut m = 0.0f64;
                for j in 0..p {
                    for k in j..p {
                        m = m.max((r.s[j * p + k] - mean_gram[j * p + k]).abs());
                    }
                }
                m
            })
            .collect();
        let b2s: Vec<f64> = per_rep.iter().map(|r| r.b2).collect();
        let (b1, b1_se) = mean_se(&b1s);
        let (b2, b2_se) = mean_se(&b2s);
        let mut row_max: Vec<f64> = per_rep.into_iter().flat_map(|r| r.row_max).collect();
        row_max.sort_by(f64::total_cmp);
        let mut suffix_cubes = vec![0.0; row_max.len() + 1];
        for k in (0..row_max.len()).rev() {
            suffix_cubes[k] = suffix_cubes[k + 1] + row_max[k].powi(3);
        }
        Ok(SampledStein {
            b1,
            b1_se,
            b2,
            b2_se,
            reps,
            seed: policy.master_seed,
            row_max,
            suffix_cubes,
        })
    }
}

impl SteinMoments<f64> for SampledStein {
    fn b1(&self) -> f64 {
        self.b1
    }
    fn b2(&self) -> f64 {
        self.b2
    }
    fn tail3(&self, u: f64) -> f64 {
        let k = self.row_max.partition_point(|&m| m <= u);
        self.suffix_cubes[k] / self.reps as f64
    }
    fn provenance(&self) -> Provenance {
        Provenance::MonteCarlo {
            seed: self.seed,
            reps: self.reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinCouplingTerms<T> {
    #[serde(rename = "B1")]
    pub b1: T,
    #[serde(rename = "B2")]
    pub b2: T,
    #[serde(rename = "B3")]
    pub b3: T,
    #[serde(rename = "B4")]
    pub b4: T,
    pub beta: T,
    pub delta: T,
    pub epsilon: T,
    /// `2β⁻¹ log p + 3δ`.
    pub threshold_thm41: T,
    /// Unclamped `(ε + Cβδ⁻¹{B1 + β(B2+B3)})/(1−ε)`.
    pub prob_bound_thm41: T,
    /// `16δ`.
    pub threshold_cor41: T,
    /// Unclamped `C·δ⁻²{B1 + δ⁻¹(B2+B4)L}L + log n / n`, `L = log(p ∨ n)`.
    pub prob_bound_cor41: T,
    pub c_const: T,
    pub provenance: Provenance,
}

impl<T: Scalar> SteinCouplingTerms<T> {
    pub fn clamped(&self) -> (T, T) {
        (clamp01(self.prob_bound_thm41), clamp01(self.prob_bound_cor41))
    }
}

/// Stein coupling terms at smoothing level `beta` (the applied choice
/// `2δ⁻¹ log(p ∨ n)` when `None`).
pub fn stein_coupling_terms<T: Scalar, M: SteinMoments<T> + ?Sized>(
    moments: &M,
    delta: T,
    n: usize,
    p: usize,
    beta: Option<T>,
    c_const: T,
) -> Result<SteinCouplingTerms<T>> {
    if !(delta > T::zero()) {
        return Err(Error::invalid("delta", "δ must be positive"));
    }
    if n.max(p) < 3 || n == 0 || p == 0 {
        return Err(Error::invalid("n", "p ∨ n ≥ 3 required"));
    }
    let beta = beta.unwrap_or_else(|| applied_beta(delta, p, n));
    let epsilon = epsilon_beta_delta(beta, delta)?;
    let l = T::from_usize_lossy(p.max(n)).ln();
    let two = T::lit(2.0);
    let b1 = moments.b1();
    let b2 = moments.b2();
    let b3 = moments.tail3(beta.recip() / two);
    let b4 = moments.tail3(delta / l);
    let nf = T::from_usize_lossy(n);
    let thm = (epsilon + c_const * beta / delta * (b1 + beta * (b2 + b3))) / (T::one() - epsilon);
    let cor = c_const * (b1 + (b2 + b4) * l / delta) * l / (delta * delta) + nf.ln() / nf;
    Ok(SteinCouplingTerms {
        b1,
        b2,
        b3,
        b4,
        beta,
        delta,
        epsilon,
        threshold_thm41: two * T::from_usize_lossy(p).ln() / beta + T::lit(3.0) * delta,
        prob_bound_thm41: thm,
        threshold_cor41: T::lit(16.0) * delta,
        prob_bound_cor41: cor,
        c_const,
        provenance: moments.provenance(),
    })
}

/// `B0·(1 + |log(1/B0)|/p)` with `B0 = p δ⁻³ Σ_i E|X_i|³`.
pub fn yurinskii_bound<T: Scalar>(p: usize, delta: T, sum_third_moments: T) -> Result<T> {
    if p == 0 {
        return Err(Error::invalid("p", "dimension must be positive"));
    }
    if !(delta > T::zero()) {
        return Err(Error::invalid("delta", "δ must be positive"));
    }
    if !(sum_third_moments >= T::zero()) {
        return Err(Error::invalid("sum_third_moments", "must be ≥ 0"));
    }
    let pf = T::from_usize_lossy(p);
    let b0 = pf * sum_third_moments / (delta * delta * delta);
    if b0 == T::zero() {
        return Ok(T::zero());
    }
    Ok(b0 * (T::one() + b0.recip().ln().abs() / pf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub n: usize,
    pub p: usize,
    pub cor41: f64,
    pub yurinskii: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverReport {
    pub delta: f64,
    pub exponent: f64,
    pub rows: Vec<CrossoverRow>,
    pub cor41_decreasing: bool,
    pub yurinskii_increasing: bool,
    /// First `n` at which the applied Stein bound is below Yurinskii's.
    pub crossover_n: Option<usize>,
}

/// Both coupling bounds along `p_n = ⌈exp(n^a)⌉` for bounded coordinates
/// `X_ij = x_ij/√n`, `|x_ij| ≤ 1`, where `Σ_i E|X_i|³ = p^{3/2}/√n`.
pub fn crossover_sweep(ns: &[usize], exponent: f64, delta: f64, c_const: f64) -> Result<CrossoverReport> {
    if ns.is_empty() {
        return Err(Error::Empty("sample-size list"));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let p = (n as f64).powf(exponent).exp().ceil() as usize;
        let m = AnalyticStein::bounded_profile(n, p, 1.0);
        let terms = stein_coupling_terms(&m, delta, n, p, None, c_const)?;
        let third = (p as f64).powf(1.5) / (n as f64).sqrt();
        rows.push(CrossoverRow {
            n,
            p,
            cor41: terms.prob_bound_cor41,
            yurinskii: yurinskii_bound(p, delta, third)?,
        });
    }
    let cor41_decreasing = rows.windows(2).all(|w| w[1].cor41 < w[0].cor41);
    let yurinskii_increasing = rows.windows(2).all(|w| w[1].yurinskii > w[0].yurinskii);
    let crossover_n = rows.iter().find(|r| r.cor41 < r.yurinskii).map(|r| r.n);
    Ok(CrossoverReport {
        delta,
        exponent,
        rows,
        cor41_decreasing,
        yurinskii_increasing,
        crossover_n,
    })
}

/// `(1+α)E‖G_n‖ + K_q[(σ + n^{-1/2}M_q)√t + α⁻¹n^{-1/2}M_2 t]`, a bound on
/// the `1 − t^{-q/2}` quantile of `‖G_n‖_𝔽`.
#[allow(clippy::too_many_arguments)]
pub fn deviation_bound<T: Scalar>(
    eg: T,
    sigma: T,
    m2: T,
    mq: T,
    t: T,
    alpha: T,
    q: T,
    n: usize,
    k_q: T,
) -> Result<T> {
    if !(t >= T::one()) {
        return Err(Error::invalid("t", "t ≥ 1 required"));
    }
    if !(alpha > T::zero()) {
        return Err(Error::invalid("alpha", "α must be positive"));
    }
    if !(q >= T::lit(2.0)) {
        return Err(Error::invalid("q", "q ≥ 2 required"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "n must be positive"));
    }
    let rn = T::from_usize_lossy(n).sqrt().recip();
    Ok((T::one() + alpha) * eg + k_q * ((sigma + rn * mq) * t.sqrt() + rn * m2 * t / alpha))
}

/// Confidence level `1 − t^{-q/2}` attached to [`deviation_bound`].
pub fn deviation_level<T: Scalar>(t: T, q: T) -> T {
    T::one() - t.powf(-q / T::lit(2.0))
}

/// The `t` at which [`deviation_level`] equals `level`.
pub fn deviation_t_for_level<T: Scalar>(level: T, q: T) -> Result<T> {
    check_unit_open("level", level)?;
    Ok((T::one() - level).powf(-T::lit(2.0) / q))
}

/// Constant-free maximal inequality `J(δ)‖F‖ + ‖M‖_2 J²(δ)/(δ²√n)`.
pub fn maximal_bound<T: Scalar>(j_delta: T, f_p2: T, m2: T, delta: T, n: usize) -> Result<T> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::invalid("delta", format!("δ = {delta} outside (0, 1]")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "n must be positive"));
    }
    let sqrt_n = T::from_usize_lossy(n).sqrt();
    Ok(j_delta * f_p2 + m2 * j_delta * j_delta / (delta * delta * sqrt_n))
}

/// VC-type form `sqrt(vσ² log(A‖F‖/σ)) + v‖M‖_2 log(A‖F‖/σ)/√n`.
pub fn vc_maximal_bound<T: Scalar>(sigma: T, f_p2: T, m2: T, a: T, v: T, n: usize) -> Result<T> {
    if !(sigma > T::zero() && sigma <= f_p2) {
        return Err(Error::invalid("sigma", "need 0 < σ ≤ ‖F‖_{P,2}"));
    }
    if !(a >= T::E()) || !(v >= T::one()) {
        return Err(Error::invalid("A", "need A ≥ e and v ≥ 1"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "n must be positive"));
    }
    let log_term = (a * f_p2 / sigma).ln();
    Ok((v * sigma * sigma * log_term).sqrt() + v * m2 * log_term / T::from_usize_lossy(n).sqrt())
}

/// `C_σ r1 (E Z̃ + sqrt(1 ∨ log(σ̲/r1))) + r2`.
pub fn kolmogorov_conversion<T: Scalar>(r1: T, r2: T, e_ztilde: T, sigma_low: T, c_sigma: T) -> Result<T> {
    if !(r1 > T::zero()) {
        return Err(Error::invalid("r1", "r1 must be positive"));
    }
    if !(r2 >= T::zero() && r2 <= T::one()) {
        return Err(Error::invalid("r2", "r2 must lie in [0, 1]"));
    }
    if !(sigma_low > T::zero()) {
        return Err(Error::invalid("sigma_low", "σ̲ must be positive"));
    }
    let root = (sigma_low / r1).ln().max(T::one()).sqrt();
    Ok(c_sigma * r1 * (e_ztilde + root) + r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn zero_inputs(n: usize) -> MomentInputs<f64> {
        MomentInputs {
            n,
            p_or_n: 10,
            sigma: 0.0,
            b: 0.0,
            q: 4.0,
            envelope_l2: 0.0,
            m_q: 0.0,
            m_2: 0.0,
            kappa: 0.0,
            eg_ff: 0.0,
            phi: StepProfile::Constant(0.0),
            h_profile: StepProfile::Constant((n as f64).ln()),
            tail: StepProfile::Constant(0.0),
            provenance: BTreeMap::new(),
        }
    }

    #[test]
    fn term_isolation() {
        let mut inp = zero_inputs(1000);
        inp.phi = StepProfile::Constant(0.1);
        inp.envelope_l2 = 2.0;
        let gamma: f64 = 0.2;
        let b = main_theorem_budget(&inp, 0.3, gamma, &BudgetConstants::default()).unwrap();
        let want = 0.1 + gamma.powf(-0.25) * 0.3 * 2.0;
        assert!((b.delta_n - want).abs() < 1e-15);
        assert_eq!(b.terms.mq_term, 0.0);
        assert_eq!(b.terms.ff_term, 0.0);
        assert_eq!(b.terms.kappa_term, 0.0);
    }

    #[test]
    fn hand_recomputed_terms() {
        let n = 1000usize;
        let logn = (n as f64).ln();
        let inp = MomentInputs {
            n,
            p_or_n: 50,
            sigma: 0.5,
            b: 1.0,
            q: 4.0,
            envelope_l2: 1.0,
            m_q: 2.0,
            m_2: 1.5,
            kappa: 1.0,
            eg_ff: 1.0,
            phi: StepProfile::Constant(0.0),
            h_profile: StepProfile::Constant(logn),
            tail: StepProfile::Constant(0.0),
            provenance: BTreeMap::new(),
        };
        let b = main_theorem_budget(&inp, 0.05, 0.1, &BudgetConstants::default()).unwrap();
        let nf = 1000.0f64;
        let g = 0.1f64;
        let hand = [
            0.0,
            10f64.powf(0.25) * 0.05,
            2.0 * 10f64.powf(0.25) / nf.sqrt(),
            1.5 * 10f64.sqrt() / nf.sqrt(),
            logn.sqrt() / (nf.powf(0.25) * g.sqrt()),
            logn.powf(2.0 / 3.0) / (nf.powf(1.0 / 6.0) * g.powf(1.0 / 3.0)),
        ];
        for (got, want) in b.terms.as_array().iter().zip(hand) {
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "{got} vs {want}");
        }
        assert_eq!(b.delta_n, b.terms.sum());
        assert!((b.prob_bound - (0.1 + logn / nf)).abs() < 1e-15);
    }

    #[test]
    fn budget_decreases_with_n() {
        let mk = |n: usize| {
            let mut inp = zero_inputs(n);
            inp.h_profile = StepProfile::Constant(20.0);
            inp.b = 1.0;
            inp.sigma = 0.5;
            inp.envelope_l2 = 1.0;
            inp.m_q = 2.0;
            inp.m_2 = 1.0;
            inp.kappa = 1.0;
            inp.eg_ff = 1.0;
            main_theorem_budget(&inp, 0.1, 0.1, &BudgetConstants::default()).unwrap().delta_n
        };
        assert!(mk(100) >= mk(1000) && mk(1000) >= mk(10000));
    }

    #[test]
    fn rejects_low_order_and_bad_h() {
        let mut inp = zero_inputs(100);
        inp.q = 2.5;
        assert!(main_theorem_budget(&inp, 0.1, 0.1, &BudgetConstants::default()).is_err());
        let mut inp = zero_inputs(100);
        inp.h_profile = StepProfile::Constant(1.0);
        assert!(main_theorem_budget(&inp, 0.1, 0.1, &BudgetConstants::default()).is_err());
        let mut inp = zero_inputs(100);
        inp.sigma = 2.0;
        inp.b = 1.0;
        assert!(inp.validate().is_err());
    }

    #[test]
    fn tail_functional_argument() {
        let mut inp = zero_inputs(1000);
        // tail(u) = 1 below u = 5, 0 from 5 on
        inp.tail = StepProfile::Table {
            knots: vec![0.0, 5.0],
            values: vec![1.0, 0.0],
        };
        let h = (1000f64).ln();
        // u = c γ^{-1/3} n^{1/3} H^{-1/3}
        let u = |c: f64| c * 10f64.powf(1.0 / 3.0) * 10.0 * h.powf(-1.0 / 3.0);
        assert!(u(0.1) < 5.0 && u(1.0) > 5.0);
        let small = BudgetConstants { c: 0.1, ..Default::default() };
        let b = main_theorem_budget(&inp, 0.5, 0.1, &small).unwrap();
        assert_eq!(b.delta_n_tail, 0.25);
        let b = main_theorem_budget(&inp, 0.5, 0.1, &BudgetConstants::default()).unwrap();
        assert_eq!(b.delta_n_tail, 0.0);
    }

    #[test]
    fn vc_budget_values() {
        let e = std::f64::consts::E;
        let n = 22027usize; // log n ≈ 10
        let vb = vc_class_budget(n, 0.1, 4.0, 1.0, 1.0, e, 1.0, 1.0, 1.0).unwrap();
        assert!((vb.k_n - (n as f64).ln()).abs() < 1e-12);
        assert!((vb.k_n - 10.0).abs() < 1e-4);
        let inf = vc_class_budget(n, 0.1, f64::INFINITY, 1.0, 1.0, e, 1.0, 1.0, 1.0).unwrap();
        let want = vb.k_n / (0.1f64.sqrt() * (n as f64).sqrt());
        assert!((inf.terms[0] - want).abs() < 1e-14);
        for n in [1000usize, 5000, 100000] {
            let a = vc_class_budget(n, 0.1, 4.0, 1.0, 1.0, e, 1.0, 1.0, 1.0).unwrap();
            let b = vc_class_budget(16 * n, 0.1, 4.0, 1.0, 1.0, e, 1.0, 1.0, 1.0).unwrap();
            assert!(b.total < a.total);
        }
        assert!(vc_class_budget(n, 0.1, 4.0, 1.0, 2.0, e, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_array_gives_log_n_over_n() {
        let t = stein_coupling_terms(&AnalyticStein::<f64>::zero(), 0.5, 100, 5, None, 1.0).unwrap();
        assert_eq!((t.b1, t.b2, t.b3, t.b4), (0.0, 0.0, 0.0, 0.0));
        assert!((t.prob_bound_cor41 - (100f64).ln() / 100.0).abs() < 1e-16);
    }

    #[test]
    fn rademacher_two_point_law_by_enumeration() {
        let n = 400usize;
        let p = 1usize;
        let s = (n as f64).sqrt().recip();
        let policy = RngPolicy::new(7);
        let est = SampledStein::estimate(n, p, 50, policy, Some(&[1.0]), |rng, x| {
            for v in x.iter_mut() {
                *v = if rng.random::<bool>() { s } else { -s };
            }
        })
        .unwrap();
        // X² ≡ 1/n so B1 vanishes; |X|³ ≡ n^{-3/2}
        assert!(est.b1.abs() < 1e-12);
        assert!((est.b2 - s).abs() < 1e-12);
        let beta = 1.0; // β⁻¹/2 = 0.5 > n^{-1/2}
        let t = stein_coupling_terms(&est, 2.0, n, p, Some(beta), 1.0).unwrap();
        assert_eq!(t.b3, 0.0);
        assert!((est.tail3(0.5 * s) - s).abs() < 1e-12);
    }

    #[test]
    fn b2_matches_independent_resampling() {
        let (n, p, reps) = (512usize, 8usize, 2000usize);
        let scale = (n as f64).sqrt().recip();
        let est = SampledStein::estimate(n, p, reps, RngPolicy::new(11), None, |rng, x| {
            for v in x.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = z * scale;
            }
        })
        .unwrap();
        // independent oracle: plain sequential loop on a different stream
        let mut rng = RngPolicy::new(12345).stream(0);
        let mut vals = Vec::with_capacity(reps);
        for _ in 0..reps {
            let mut col = [0.0f64; 8];
            for _ in 0..n {
                for c in col.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c += (z * scale).abs().powi(3);
                }
            }
            vals.push(col.iter().copied().fold(0.0, f64::max));
        }
        let (m, se) = mean_se(&vals);
        let tol = 3.0 * (se * se + est.b2_se * est.b2_se).sqrt();
        assert!((est.b2 - m).abs() < tol, "{} vs {} (tol {})", est.b2, m, tol);
    }

    #[test]
    fn yurinskii_values_and_monotonicity() {
        // B0 = 1
        assert!((yurinskii_bound::<f64>(2, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        for p in [1usize, 3, 10, 100] {
            let a = yurinskii_bound(p, 0.7, 0.01).unwrap();
            let b = yurinskii_bound(2 * p, 0.7, 0.01).unwrap();
            assert!(b >= a);
        }
    }

    #[test]
    fn crossover_along_exponential_dimension() {
        let ns: Vec<usize> = (8..=16).map(|k| 1usize << k).collect();
        let r = crossover_sweep(&ns, 0.2, 1.0, 1.0).unwrap();
        assert!(r.cor41_decreasing);
        assert!(r.yurinskii_increasing);
        assert!(r.crossover_n.is_some());
    }

    #[test]
    fn deviation_scaling() {
        let base = deviation_bound::<f64>(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 4.0, 100, 1.0).unwrap();
        let dbl = deviation_bound::<f64>(0.0, 1.0, 0.0, 0.0, 2.0, 1.0, 4.0, 100, 1.0).unwrap();
        assert!((dbl - base * 2f64.sqrt()).abs() < 1e-15);
        let base = deviation_bound::<f64>(0.0, 0.0, 1.0, 0.0, 1.0, 0.5, 4.0, 100, 1.0).unwrap();
        let dbl = deviation_bound::<f64>(0.0, 0.0, 1.0, 0.0, 2.0, 0.5, 4.0, 100, 1.0).unwrap();
        assert!((dbl - 2.0 * base).abs() < 1e-15);
        let noiseless = deviation_bound::<f64>(3.0, 0.0, 0.0, 0.0, 1.0, 0.7, 4.0, 10, 1.0).unwrap();
        assert!((noiseless - 1.7 * 3.0).abs() < 1e-15);
        assert!(deviation_bound::<f64>(1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 4.0, 10, 1.0).is_err());
        let t = deviation_t_for_level::<f64>(0.9, 4.0).unwrap();
        assert!((deviation_level(t, 4.0) - 0.9).abs() < 1e-14);
    }

    #[test]
    fn maximal_shapes() {
        assert_eq!(maximal_bound(0.0, 1.0, 1.0, 0.5, 10).unwrap(), 0.0);
        let big_n = 1_000_000_000_000usize;
        let j = 0.4;
        let full = maximal_bound(j, 2.0, 1.0, 0.5, big_n).unwrap();
        let second = full - j * 2.0;
        assert!(second < 1e-6 * j * 2.0);
        assert!(maximal_bound(0.1, 1.0, 1.0, 1.5, 10).is_err());
        assert!(vc_maximal_bound(0.5, 1.0, 1.0, 3.0, 1.0, 100).unwrap() > 0.0);
    }

    #[test]
    fn kolmogorov_conversion_value() {
        let v = kolmogorov_conversion(0.01, 0.05, 2.0, 1.0, 1.0).unwrap();
        let want = 0.01 * (2.0 + 100f64.ln().sqrt()) + 0.05;
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.09146).abs() < 1e-5);
        assert!(kolmogorov_conversion(1e-12, 0.0, 1.0, 1.0, 1.0).unwrap() < 1e-10);
    }

    #[test]
    fn kolmogorov_conversion_monotone() {
        let grid = [0.01, 0.1, 0.5, 1.0, 2.0];
        for &r1 in &grid {
            for &e in &grid {
                for &s in &grid {
                    let base = kolmogorov_conversion(r1, 0.1, e, s, 1.0).unwrap();
                    assert!(kolmogorov_conversion(r1 * 1.1, 0.1, e, s, 1.0).unwrap() >= base);
                    assert!(kolmogorov_conversion(r1, 0.2, e, s, 1.0).unwrap() >= base);
                    assert!(kolmogorov_conversion(r1, 0.1, e * 1.1, s, 1.0).unwrap() >= base);
                    assert!(kolmogorov_conversion(r1, 0.1, e, s * 1.1, 1.0).unwrap() >= base);
                    assert!(kolmogorov_conversion(r1, 0.1, e, s, 1.1).unwrap() >= base);
                }
            }
        }
    }

    #[test]
    fn infinite_order_roundtrips_through_serde() {
        let mut inp = zero_inputs(10);
        inp.q = f64::INFINITY;
        let s = serde_json::to_string(&inp).unwrap();
        assert!(s.contains("\"q\":\"inf\""));
        let back: MomentInputs<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inp);
    }
}
