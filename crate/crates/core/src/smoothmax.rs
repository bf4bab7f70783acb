//! The log-sum-exp smooth maximum `F_β(x) = β⁻¹ log Σ_j e^{βx_j}`, its
//! derivative weights, and a Gaussian-smoothed interval-union indicator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm_cdf, norm_pdf, Scalar};

fn check_input<T: Scalar>(x: &[T], beta: T) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("smooth-max input vector"));
    }
    if !(beta > T::zero() && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("β = {beta} must be positive")));
    }
    Ok(())
}

fn max_of<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().fold(T::neg_infinity(), T::max)
}

/// `β⁻¹ log Σ_j e^{βx_j}`, evaluated after shifting by `max_j x_j`.
pub fn smooth_max<T: Scalar>(x: &[T], beta: T) -> Result<T> {
    check_input(x, beta)?;
    let m = max_of(x);
    let s = x.iter().fold(T::zero(), |acc, &xi| acc + (beta * (xi - m)).exp());
    Ok(m + s.ln() / beta)
}

/// First and second derivative weights of `F_β` and the absolute sum of the
/// third-order weights.
///
/// `∂_j F_β = π_j`, `∂_j∂_k F_β = β w_jk`, `∂_j∂_k∂_l F_β = β² q_jkl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothMaxDerivs<T> {
    pub pi: Vec<T>,
    /// Row-major `p × p`.
    pub w: Vec<T>,
    pub q_sum: T,
}

impl<T: Scalar> SmoothMaxDerivs<T> {
    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    #[inline]
    pub fn w_at(&self, j: usize, k: usize) -> T {
        self.w[j * self.pi.len() + k]
    }

    pub fn w_abs_sum(&self) -> T {
        self.w.iter().fold(T::zero(), |a, &v| a + v.abs())
    }
}

/// Softmax weights `π = softmax(βx)`.
pub fn softmax<T: Scalar>(x: &[T], beta: T) -> Result<Vec<T>> {
    check_input(x, beta)?;
    let m = max_of(x);
    let mut e: Vec<T> = x.iter().map(|&xi| (beta * (xi - m)).exp()).collect();
    let s = e.iter().fold(T::zero(), |a, &v| a + v);
    for v in &mut e {
        *v = *v / s;
    }
    Ok(e)
}

/// `Σ_{j,k,l} |q_jkl|` in `O(p)`.
///
/// Grouping the index triples by coincidence pattern: all equal gives
/// `π_j(1−π_j)(1−2π_j)`; exactly two equal (three placements) gives
/// `−π_aπ_b(1−2π_a)` with `a` the repeated index; all distinct gives
/// `2π_jπ_kπ_l`, whose ordered sum is `12·e₃(π)`.
pub fn q_abs_sum<T: Scalar>(pi: &[T]) -> T {
    let two = T::lit(2.0);
    let mut diag = T::zero();
    let (mut e1, mut e2, mut e3) = (T::zero(), T::zero(), T::zero());
    for &p in pi {
        diag = diag + p * (T::one() - p) * (T::one() - two * p).abs();
        e3 = e3 + e2 * p;
        e2 = e2 + e1 * p;
        e1 = e1 + p;
    }
    T::lit(4.0) * diag + T::lit(12.0) * e3
}

pub fn smooth_max_derivs<T: Scalar>(x: &[T], beta: T) -> Result<SmoothMaxDerivs<T>> {
    let pi = softmax(x, beta)?;
    let p = pi.len();
    let mut w = vec![T::zero(); p * p];
    for j in 0..p {
        for k in 0..p {
            let d = if j == k { pi[j] } else { T::zero() };
            w[j * p + k] = d - pi[j] * pi[k];
        }
    }
    let q_sum = q_abs_sum(&pi);
    Ok(SmoothMaxDerivs { pi, w, q_sum })
}

/// `sqrt(e^{−α}(1+α))` with `α = β²δ² − 1`; requires `βδ > 1`.
pub fn epsilon_beta_delta<T: Scalar>(beta: T, delta: T) -> Result<T> {
    if !(beta > T::zero()) {
        return Err(Error::invalid("beta", "β must be positive"));
    }
    if !(beta * delta > T::one()) {
        return Err(Error::invalid(
            "beta*delta",
            format!("βδ = {} must exceed 1 so that α > 0", beta * delta),
        ));
    }
    let alpha = beta * beta * delta * delta - T::one();
    Ok(((-alpha).exp() * (T::one() + alpha)).sqrt())
}

/// Smoothing level `β = 2δ⁻¹ log(p ∨ n)` used by the applied coupling bound.
pub fn applied_beta<T: Scalar>(delta: T, p: usize, n: usize) -> T {
    T::lit(2.0) * T::from_usize_lossy(p.max(n)).ln() / delta
}

/// `Φ(z1) − Φ(z0)` for `z0 ≤ z1`, using the upper tail when both are
/// positive.
fn normal_mass<T: Scalar>(z0: T, z1: T) -> T {
    if z0 > T::zero() {
        norm_cdf(-z0) - norm_cdf(-z1)
    } else {
        norm_cdf(z1) - norm_cdf(z0)
    }
}

/// One affine piece of the ramp function: `h(s) = v0 + slope·(s − s0)` on `[s0, s1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece<T> {
    s0: T,
    s1: T,
    v0: T,
    slope: T,
}

/// Gaussian smoothing at scale `β⁻¹` of `h(t) = (1 − ρ(t, A^δ)/δ)₊` for a
/// finite union of closed intervals `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSmoothing<T> {
    intervals: Vec<(T, T)>,
    delta: T,
    beta: T,
    epsilon: T,
    pieces: Vec<Piece<T>>,
}

fn merge<T: Scalar>(mut iv: Vec<(T, T)>) -> Vec<(T, T)> {
    iv.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite endpoints"));
    let mut out: Vec<(T, T)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

impl<T: Scalar> IndicatorSmoothing<T> {
    pub fn new(intervals: Vec<(T, T)>, delta: T, beta: T) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Empty("interval union"));
        }
        if let Some(&(a, b)) = intervals
            .iter()
            .find(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b))
        {
            return Err(Error::invalid("set", format!("bad interval [{a}, {b}]")));
        }
        if !(delta > T::zero()) {
            return Err(Error::invalid("delta", "δ must be positive"));
        }
        let epsilon = epsilon_beta_delta(beta, delta)?;
        let intervals = merge(intervals);
        let plateaus = merge(
            intervals
                .iter()
                .map(|&(a, b)| (a - delta, b + delta))
                .collect(),
        );
        let one = T::one();
        let two = T::lit(2.0);
        let slope = one / delta;
        let mut pieces = Vec::new();
        for (i, &(l, r)) in plateaus.iter().enumerate() {
            // left ramp, shared with the previous plateau when the gap is < 2δ
            let left_start = match i.checked_sub(1).map(|k| plateaus[k].1) {
                Some(prev) if l - prev < two * delta => (prev + l) / two,
                _ => l - delta,
            };
            pieces.push(Piece {
                s0: left_start,
                s1: l,
                v0: one - (l - left_start) * slope,
                slope,
            });
            pieces.push(Piece {
                s0: l,
                s1: r,
                v0: one,
                slope: T::zero(),
            });
            let right_end = match plateaus.get(i + 1).map(|p| p.0) {
                Some(next) if next - r < two * delta => (r + next) / two,
                _ => r + delta,
            };
            pieces.push(Piece {
                s0: r,
                s1: right_end,
                v0: one,
                slope: -slope,
            });
        }
        Ok(IndicatorSmoothing {
            intervals,
            delta,
            beta,
            epsilon,
            pieces,
        })
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Distance from `t` to the set.
    pub fn distance(&self, t: T) -> T {
        self.intervals
            .iter()
            .map(|&(a, b)| {
                if t < a {
                    a - t
                } else if t > b {
                    t - b
                } else {
                    T::zero()
                }
            })
            .fold(T::infinity(), T::min)
    }

    /// The unsmoothed ramp `h(t)`.
    pub fn ramp(&self, t: T) -> T {
        (T::one() - (self.distance(t) - self.delta).max(T::zero()) / self.delta).max(T::zero())
    }

    /// `g(t) = E h(t + β⁻¹Z)`, `Z ~ N(0,1)`, in closed form.
    pub fn value(&self, t: T) -> T {
        let sigma = self.beta.recip();
        self.pieces.iter().fold(T::zero(), |acc, p| {
            let z0 = (p.s0 - t) / sigma;
            let z1 = (p.s1 - t) / sigma;
            let level = p.v0 + p.slope * (t - p.s0);
            acc + level * normal_mass(z0, z1) + p.slope * sigma * (norm_pdf(z0) - norm_pdf(z1))
        })
    }
}

pub fn smoothed_indicator<T: Scalar>(smoothing: &IndicatorSmoothing<T>, t: T) -> T {
    smoothing.value(t)
}
