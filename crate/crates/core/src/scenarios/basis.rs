use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

/// Series bases on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `1, √2 cos 2πx, √2 sin 2πx, √2 cos 4πx, …` (orthonormal under U(0,1)).
    #[default]
    FourierTrig,
    /// Shifted Legendre polynomials `√(2j+1) P_j(2x − 1)` (orthonormal under U(0,1)).
    Legendre,
    /// Clamped cubic B-splines on uniform knots (lower degree when `K < 4`).
    Bspline,
}

impl Basis {
    /// `ψ^K(x)` written into `out[..k]`.
    pub fn eval_into(self, k: usize, x: f64, out: &mut [f64]) {
        let out = &mut out[..k];
        match self {
            Basis::FourierTrig => fourier(x, out),
            Basis::Legendre => legendre(x, out),
            Basis::Bspline => bspline(x, out),
        }
    }

    pub fn eval(self, k: usize, x: f64) -> Vec<f64> {
        let mut v = vec![0.0; k];
        self.eval_into(k, x, &mut v);
        v
    }

    /// Interior points where quadrature panels should be split.
    pub fn breakpoints(self, k: usize) -> Vec<f64> {
        match self {
            Basis::Bspline => {
                let (_, interior) = bspline_shape(k);
                (1..=interior).map(|i| i as f64 / (interior + 1) as f64).collect()
            }
            // keep about eight oscillations per panel
            Basis::FourierTrig | Basis::Legendre => {
                let panels = k.div_ceil(16).max(1);
                (1..panels).map(|i| i as f64 / panels as f64).collect()
            }
        }
    }
}

fn fourier(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    let (s1, c1) = (2.0 * PI * x).sin_cos();
    let (mut s, mut c) = (s1, c1);
    let mut j = 1;
    while j < out.len() {
        out[j] = SQRT_2 * c;
        if j + 1 < out.len() {
            out[j + 1] = SQRT_2 * s;
        }
        // angle addition; exact enough for the orders used here
        let (s2, c2) = (s * c1 + c * s1, c * c1 - s * s1);
        s = s2;
        c = c2;
        j += 2;
    }
}

fn legendre(x: f64, out: &mut [f64]) {
    let t = 2.0 * x - 1.0;
    let (mut p0, mut p1) = (1.0, t);
    for (j, o) in out.iter_mut().enumerate() {
        let p = match j {
            0 => 1.0,
            1 => t,
            _ => {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        *o = (2.0 * j as f64 + 1.0).sqrt() * p;
    }
}

/// `(degree, interior knot count)` for `K` clamped B-splines.
fn bspline_shape(k: usize) -> (usize, usize) {
    let deg = 3.min(k.saturating_sub(1));
    (deg, k - deg - 1)
}

fn bspline(x: f64, out: &mut [f64]) {
    let k = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    if k == 0 {
        return;
    }
    let (deg, interior) = bspline_shape(k);
    let x = x.clamp(0.0, 1.0);
    let mut knots = vec![0.0; deg + 1];
    knots.extend((1..=interior).map(|i| i as f64 / (interior + 1) as f64));
    knots.extend(std::iter::repeat_n(1.0, deg + 1));
    // span s with knots[s] ≤ x < knots[s+1], the last span closed on the right
    let mut s = deg;
    while s < k - 1 && x >= knots[s + 1] {
        s += 1;
    }
    let mut n = vec![0.0; deg + 1];
    let mut left = vec![0.0; deg + 1];
    let mut right = vec![0.0; deg + 1];
    n[0] = 1.0;
    for j in 1..=deg {
        left[j] = x - knots[s + 1 - j];
        right[j] = knots[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let den = right[r + 1] + left[j - r];
            let tmp = if den > 0.0 { n[r] / den } else { 0.0 };
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    for (r, v) in n.into_iter().enumerate() {
        out[s - deg + r] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    fn gram(b: Basis, k: usize) -> Vec<f64> {
        let gl = GaussLegendre::new(64).unwrap();
        let mut brk = vec![0.0];
        brk.extend(b.breakpoints(k));
        brk.push(1.0);
        let mut g = vec![0.0; k * k];
        for w in brk.windows(2) {
            for (x, wt) in gl.mapped(w[0], w[1]) {
                let p = b.eval(k, x);
                for i in 0..k {
                    for j in 0..k {
                        g[i * k + j] += wt * p[i] * p[j];
                    }
                }
            }
        }
        g
    }

    #[test]
    fn fourier_and_legendre_are_orthonormal() {
        for b in [Basis::FourierTrig, Basis::Legendre] {
            let k = 9;
            let g = gram(b, k);
            for i in 0..k {
                for j in 0..k {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i * k + j] - e).abs() < 1e-10, "{b:?} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn fourier_norm_is_constant() {
        for x in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let v = Basis::FourierTrig.eval(5, x);
            let s: f64 = v.iter().map(|a| a * a).sum();
            assert!((s - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bsplines_partition_unity() {
        for k in 1..=9 {
            for i in 0..=50 {
                let x = i as f64 / 50.0;
                let v = Basis::Bspline.eval(k, x);
                assert!(v.iter().all(|&a| a >= -1e-15), "k={k} x={x}");
                let s: f64 = v.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "k={k} x={x} s={s}");
            }
        }
    }

    #[test]
    fn bspline_gram_is_nonsingular() {
        let k = 7;
        let g = gram(Basis::Bspline, k);
        let m = nalgebra::DMatrix::from_row_slice(k, k, &g);
        assert!(m.cholesky().is_some());
    }
}
