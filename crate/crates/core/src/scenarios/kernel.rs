use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcclass::{DiscretizedClass, Evaluator};
use crate::quadrature::{DataLaw, GaussLegendre, DEFAULT_NODES};
use crate::rng::{RngPolicy, StreamRng};
use crate::scalar::norm_cdf;
use crate::simulate::{CovarianceModel, SupSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `¾(1 − u²)` on `[−1, 1]`.
    #[default]
    Epanechnikov,
    /// Standard normal density truncated to `[−8, 8]`.
    Gaussian,
}

impl Kernel {
    /// Half-width of the support.
    pub fn radius(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 1.0,
            Kernel::Gaussian => 8.0,
        }
    }

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => {
                if u.abs() <= 8.0 {
                    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sup(self) -> f64 {
        self.eval(0.0)
    }

    /// `∫ k²`.
    pub fn square_integral(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.6,
            Kernel::Gaussian => 0.5 / PI.sqrt(),
        }
    }
}

/// `n ↦ h_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `h = c·n^{−exponent}`.
    Power { c: f64, exponent: f64 },
    Fixed { h: f64 },
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Power { c: 1.0, exponent: 0.2 }
    }
}

impl BandwidthRule {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            BandwidthRule::Power { c, exponent } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::invalid("bandwidth.c", "must be positive"));
                }
                if !(exponent > 0.0 && exponent < 1.0 / dim as f64) {
                    return Err(Error::invalid(
                        "bandwidth.exponent",
                        format!("need 0 < exponent < 1/d so that h → 0 and nh^d → ∞ (got {exponent})"),
                    ));
                }
            }
            BandwidthRule::Fixed { h } => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::invalid("bandwidth.h", "must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, n: usize) -> f64 {
        match *self {
            BandwidthRule::Power { c, exponent } => c * (n as f64).powf(-exponent),
            BandwidthRule::Fixed { h } => h,
        }
    }
}

/// Conditional mean of `Y` given the first coordinate of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum MeanFn {
    Linear { intercept: f64, slope: f64 },
    /// `amplitude · sin(2π · frequency · x)`.
    Sine { amplitude: f64, frequency: f64 },
}

impl MeanFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            MeanFn::Linear { intercept, slope } => intercept + slope * x,
            MeanFn::Sine { amplitude, frequency } => amplitude * (2.0 * PI * frequency * x).sin(),
        }
    }
}

/// `Y = m(X₁) + noise_sd·ε` with `ε ~ N(0, 1)` independent of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseModel {
    pub mean: MeanFn,
    pub noise_sd: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        ResponseModel {
            mean: MeanFn::Linear {
                intercept: 0.0,
                slope: 1.0,
            },
            noise_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GFamily {
    /// `g ≡ 1`.
    #[default]
    Density,
    /// `g(y) = y`.
    Regression,
    /// `g(y) = 1(y ≤ t)` for `t` on a grid.
    CondCdf { y_grid: Vec<f64> },
}

impl GFamily {
    pub fn len(&self) -> usize {
        match self {
            GFamily::CondCdf { y_grid } => y_grid.len(),
            _ => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn uses_response(&self) -> bool {
        !matches!(self, GFamily::Density)
    }

    #[inline]
    fn value(&self, gi: usize, y: f64) -> f64 {
        match self {
            GFamily::Density => 1.0,
            GFamily::Regression => y,
            GFamily::CondCdf { y_grid } => {
                if y <= y_grid[gi] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `c_n ≡ 1`.
    Unit,
    /// `c_n(x, g) = 1/sd`.
    #[default]
    Studentized,
}

/// A kernel-type local empirical process on `d ≤ 2` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelScenario {
    pub dim: usize,
    pub kernel: Kernel,
    pub bandwidth: BandwidthRule,
    /// Independent coordinate laws of `X`, one per dimension.
    pub x_laws: Vec<DataLaw>,
    pub response: ResponseModel,
    pub family: GFamily,
    pub normalization: Normalization,
    /// Grid points per dimension.
    pub grid_points: usize,
    /// `[lo, hi]` per dimension; defaults to the support with 10% trimmed at each end.
    pub region: Option<Vec<[f64; 2]>>,
    pub quad_nodes: usize,
}

impl Default for KernelScenario {
    fn default() -> Self {
        KernelScenario {
            dim: 1,
            kernel: Kernel::default(),
            bandwidth: BandwidthRule::default(),
            x_laws: vec![DataLaw::Beta { a: 2.0, b: 2.0 }],
            response: ResponseModel::default(),
            family: GFamily::default(),
            normalization: Normalization::default(),
            grid_points: 64,
            region: None,
            quad_nodes: DEFAULT_NODES,
        }
    }
}

/// One draw of `(Y, X)`; `x[1]` is unused when `d = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Obs {
    pub y: f64,
    pub x: [f64; 2],
}

impl KernelScenario {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::invalid("dim", "kernel scenarios support d ∈ {1, 2}"));
        }
        if self.x_laws.len() != self.dim {
            return Err(Error::invalid("x_laws", format!("need {} laws, got {}", self.dim, self.x_laws.len())));
        }
        for law in &self.x_laws {
            law.validate()?;
        }
        self.bandwidth.validate(self.dim)?;
        if self.grid_points == 0 {
            return Err(Error::invalid("grid_points", "need at least one grid point"));
        }
        if self.quad_nodes < 2 {
            return Err(Error::invalid("quad_nodes", "need at least two nodes"));
        }
        if let Some(region) = &self.region {
            if region.len() != self.dim {
                return Err(Error::invalid("region", "one [lo, hi] pair per dimension"));
            }
            if region.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                return Err(Error::invalid("region", "need finite lo ≤ hi"));
            }
        }
        if !(self.response.noise_sd >= 0.0 && self.response.noise_sd.is_finite()) {
            return Err(Error::invalid("response.noise_sd", "must be finite and ≥ 0"));
        }
        if let GFamily::CondCdf { y_grid } = &self.family {
            if y_grid.is_empty() || y_grid.iter().any(|y| !y.is_finite()) {
                return Err(Error::invalid("family.y_grid", "need a non-empty finite y-grid"));
            }
        }
        Ok(())
    }

    /// Grid coordinates along axis `k`.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        let [lo, hi] = match &self.region {
            Some(r) => r[k],
            None => {
                let (a, b) = self.x_laws[k].support();
                let w = b - a;
                [a + 0.1 * w, b - 0.1 * w]
            }
        };
        let m = self.grid_points;
        if m == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
    }

    pub fn sample_obs(&self, rng: &mut StreamRng) -> Obs {
        let mut o = Obs::default();
        o.x[0] = self.x_laws[0].sample(rng);
        if self.dim == 2 {
            o.x[1] = self.x_laws[1].sample(rng);
        }
        if self.family.uses_response() {
            let e: f64 = StandardNormal.sample(rng);
            o.y = self.response.mean.eval(o.x[0]) + self.response.noise_sd * e;
        }
        o
    }

    /// `E[g(Y) | X₁ = x]`.
    fn cond_first(&self, gi: usize, x: f64) -> f64 {
        let m = self.response.mean.eval(x);
        let s = self.response.noise_sd;
        match &self.family {
            GFamily::Density => 1.0,
            GFamily::Regression => m,
            GFamily::CondCdf { y_grid } => normal_cdf_at(y_grid[gi], m, s),
        }
    }

    /// `E[g(Y) g'(Y) | X₁ = x]`.
    fn cond_second(&self, gi: usize, gj: usize, x: f64) -> f64 {
        let m = self.response.mean.eval(x);
        let s = self.response.noise_sd;
        match &self.family {
            GFamily::Density => 1.0,
            GFamily::Regression => m * m + s * s,
            GFamily::CondCdf { y_grid } => normal_cdf_at(y_grid[gi].min(y_grid[gj]), m, s),
        }
    }

    /// The population target `p(x)·E[g(Y) | X = x]` estimated by `Ŝ_n`.
    pub fn true_function(&self, gi: usize, point: &[f64]) -> f64 {
        let mut v = self.x_laws[0].pdf(point[0]) * self.cond_first(gi, point[0]);
        if self.dim == 2 {
            v *= self.x_laws[1].pdf(point[1]);
        }
        v
    }
}

fn normal_cdf_at(t: f64, m: f64, s: f64) -> f64 {
    if s > 0.0 {
        norm_cdf((t - m) / s)
    } else if m <= t {
        1.0
    } else {
        0.0
    }
}

/// Quadrature tables along one axis: `cross[(a, b)] = ∫ e₂ k_a k_b p` and
/// `first[a] = ∫ e₁ k_a p`, with `a` running over (grid point, g index).
struct AxisTables {
    cross: DMatrix<f64>,
    first: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn axis_tables(
    axis: &[f64],
    n_g: usize,
    law: &DataLaw,
    kernel: Kernel,
    h: f64,
    rule: &GaussLegendre,
    first: impl Fn(usize, f64) -> f64,
    second: impl Fn(usize, usize, f64) -> f64,
) -> AxisTables {
    let m = axis.len();
    let size = m * n_g;
    let (lo, hi) = law.support();
    let reach = kernel.radius() * h;
    let idx = |i: usize, g: usize| i + m * g;
    let mut cross = DMatrix::zeros(size, size);
    let mut means = vec![0.0; size];
    for (i, &a) in axis.iter().enumerate() {
        let (s0, s1) = ((a - reach).max(lo), (a + reach).min(hi));
        for (t, w) in rule.mapped(s0, s1) {
            let base = w * kernel.eval((t - a) / h) * law.pdf(t);
            for g in 0..n_g {
                means[idx(i, g)] += base * first(g, t);
            }
        }
        for (j, &b) in axis.iter().enumerate().skip(i) {
            if (b - a).abs() >= 2.0 * reach {
                continue;
            }
            let (s0, s1) = ((a.max(b) - reach).max(lo), (a.min(b) + reach).min(hi));
            if s1 <= s0 {
                continue;
            }
            for (t, w) in rule.mapped(s0, s1) {
                let base = w * kernel.eval((t - a) / h) * kernel.eval((t - b) / h) * law.pdf(t);
                if base == 0.0 {
                    continue;
                }
                for g in 0..n_g {
                    for g2 in 0..n_g {
                        cross[(idx(i, g), idx(j, g2))] += base * second(g, g2, t);
                    }
                }
            }
            for g in 0..n_g {
                for g2 in 0..n_g {
                    cross[(idx(j, g2), idx(i, g))] = cross[(idx(i, g), idx(j, g2))];
                }
            }
        }
    }
    AxisTables { cross, first: means }
}

/// The discretized local empirical process at a fixed `n`.
///
/// Function `f_{x,g}(y, t) = c_n(x,g) h^{−d/2} (g(y) K((t − x)/h) − E[g K])`
/// with `K` the product kernel. Index order: first axis fastest, then the
/// second axis, then the `g` index.
#[derive(Clone)]
pub struct KernelClass {
    scenario: KernelScenario,
    n: usize,
    h: f64,
    axes: Vec<Vec<f64>>,
    t1: AxisTablesShared,
    t2: AxisTablesShared,
    means: Vec<f64>,
    sd: Vec<f64>,
    scale: Vec<f64>,
    class: DiscretizedClass<Obs, f64>,
    covariance: CovarianceModel,
}

type AxisTablesShared = Arc<AxisTables>;

impl std::fmt::Debug for KernelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelClass")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("len", &self.len())
            .finish_non_exhaustive()
    }
}

/// Builds the kernel class and its Gaussian-analogue covariance by quadrature.
pub fn build_kernel_class(scenario: &KernelScenario, n: usize) -> Result<KernelClass> {
    scenario.validate()?;
    if n < 3 {
        return Err(Error::invalid("n", "n ≥ 3 is a standing assumption"));
    }
    let sc = scenario.clone();
    let d = sc.dim;
    let h = sc.bandwidth.at(n);
    let rule = GaussLegendre::new(sc.quad_nodes)?;
    let n_g = sc.family.len();
    let axes: Vec<Vec<f64>> = (0..d).map(|k| sc.axis(k)).collect();
    let t1 = axis_tables(
        &axes[0],
        n_g,
        &sc.x_laws[0],
        sc.kernel,
        h,
        &rule,
        |g, t| sc.cond_first(g, t),
        |g, g2, t| sc.cond_second(g, g2, t),
    );
    let t2 = if d == 2 {
        axis_tables(&axes[1], 1, &sc.x_laws[1], sc.kernel, h, &rule, |_, _| 1.0, |_, _, _| 1.0)
    } else {
        AxisTables {
            cross: DMatrix::from_element(1, 1, 1.0),
            first: vec![1.0],
        }
    };
    let m1 = axes[0].len();
    let m2 = t2.first.len();
    let p = m1 * m2;
    let size = p * n_g;
    let split = |a: usize| {
        let g = a / p;
        let r = a % p;
        (r % m1 + m1 * g, r / m1)
    };
    let hd = h.powi(d as i32);
    let mut means = vec![0.0; size];
    for (a, m) in means.iter_mut().enumerate() {
        let (i1, i2) = split(a);
        *m = t1.first[i1] * t2.first[i2];
    }
    let mut cov = DMatrix::zeros(size, size);
    for a in 0..size {
        let (a1, a2) = split(a);
        for b in a..size {
            let (b1, b2) = split(b);
            let v = (t1.cross[(a1, b1)] * t2.cross[(a2, b2)] - means[a] * means[b]) / hd;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let point_of = |a: usize| -> Vec<f64> {
        let r = a % p;
        let mut x = vec![axes[0][r % m1]];
        if d == 2 {
            x.push(axes[1][r / m1]);
        }
        x
    };
    let mut sd = vec![0.0; size];
    for a in 0..size {
        let (a1, a2) = split(a);
        let second = t1.cross[(a1, a1)] * t2.cross[(a2, a2)] / hd;
        let var = cov[(a, a)];
        if !(var > 1e-12 * second) {
            if sc.normalization == Normalization::Studentized {
                return Err(Error::ZeroVariance {
                    index: a,
                    x: point_of(a),
                });
            }
            sd[a] = var.max(0.0).sqrt();
        } else {
            sd[a] = var.sqrt();
        }
    }
    let scale: Vec<f64> = match sc.normalization {
        Normalization::Unit => vec![1.0; size],
        Normalization::Studentized => sd.iter().map(|s| 1.0 / s).collect(),
    };
    for a in 0..size {
        for b in 0..size {
            cov[(a, b)] *= scale[a] * scale[b];
        }
    }
    if sc.normalization == Normalization::Studentized {
        for a in 0..size {
            cov[(a, a)] = 1.0;
        }
    }
    let covariance = CovarianceModel::from_matrix(cov)?;

    let hh = h.powf(-0.5 * d as f64);
    let shared = Arc::new(sc.clone());
    let mut evaluators: Vec<Evaluator<Obs, f64>> = Vec::with_capacity(size);
    let mut names = Vec::with_capacity(size);
    for a in 0..size {
        let x = point_of(a);
        let gi = a / p;
        let (mean, c) = (means[a], scale[a]);
        let s = Arc::clone(&shared);
        names.push(match d {
            1 => format!("x={},g={gi}", x[0]),
            _ => format!("x=({},{}),g={gi}", x[0], x[1]),
        });
        evaluators.push(Arc::new(move |o: &Obs| {
            let mut k = s.kernel.eval((o.x[0] - x[0]) / h);
            if s.dim == 2 {
                k *= s.kernel.eval((o.x[1] - x[1]) / h);
            }
            c * hh * (s.family.value(gi, o.y) * k - mean)
        }));
    }
    let c_max = scale.iter().fold(0.0f64, |m, &v| m.max(v));
    let mean_max = means.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let k_sup = sc.kernel.sup().powi(d as i32);
    let env_family = sc.family.clone();
    let envelope: Evaluator<Obs, f64> = Arc::new(move |o: &Obs| match env_family {
        GFamily::Regression => c_max * hh * (o.y.abs() * k_sup + mean_max),
        _ => c_max * hh * k_sup,
    });
    let class = DiscretizedClass::new(evaluators, envelope)?
        .with_names(names)?
        .centered(true);
    Ok(KernelClass {
        scenario: sc,
        n,
        h,
        axes,
        t1: Arc::new(t1),
        t2: Arc::new(t2),
        means,
        sd,
        scale,
        class,
        covariance,
    })
}

impl KernelClass {
    pub fn scenario(&self) -> &KernelScenario {
        &self.scenario
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    fn points_per_g(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    /// Grid point of class index `a`.
    pub fn point(&self, a: usize) -> Vec<f64> {
        let m1 = self.axes[0].len();
        let r = a % self.points_per_g();
        let mut x = vec![self.axes[0][r % m1]];
        if self.axes.len() == 2 {
            x.push(self.axes[1][r / m1]);
        }
        x
    }

    pub fn g_index(&self, a: usize) -> usize {
        a / self.points_per_g()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// `E[g(Y) K((X − x)/h)]` per index.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Standard deviation of `h^{−d/2} g(Y) K((X − x)/h)` per index.
    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    /// `c_n(x, g)` per index.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Uncentred cross moment `h^{−d} E[g K_a · g' K_b]` from the quadrature tables.
    pub fn cross_moment(&self, a: usize, b: usize) -> f64 {
        let p = self.points_per_g();
        let m1 = self.axes[0].len();
        let split = |a: usize| {
            let r = a % p;
            (r % m1 + m1 * (a / p), r / m1)
        };
        let (a1, a2) = split(a);
        let (b1, b2) = split(b);
        self.t1.cross[(a1, b1)] * self.t2.cross[(a2, b2)] / self.h.powi(self.axes.len() as i32)
    }

    pub fn class(&self) -> &DiscretizedClass<Obs, f64> {
        &self.class
    }

    pub fn covariance(&self) -> &CovarianceModel {
        &self.covariance
    }

    /// `Σ_i g(Y_i) K((X_i − x)/h)` per index over `n` fresh draws, touching
    /// only the grid points inside each kernel support.
    pub fn kernel_sums(&self, n: usize, rng: &mut StreamRng) -> Vec<f64> {
        let sc = &self.scenario;
        let n_g = sc.family.len();
        let p = self.points_per_g();
        let m1 = self.axes[0].len();
        let reach = sc.kernel.radius() * self.h;
        let mut sums = vec![0.0; self.len()];
        let mut g = vec![0.0; n_g];
        let mut k1 = vec![0.0; m1];
        let mut k2 = vec![1.0; self.axes.get(1).map_or(1, Vec::len)];
        let window = |axis: &[f64], t: f64| {
            let lo = axis.partition_point(|&a| a < t - reach);
            let hi = axis.partition_point(|&a| a <= t + reach);
            lo..hi
        };
        for _ in 0..n {
            let o = sc.sample_obs(rng);
            for (gi, v) in g.iter_mut().enumerate() {
                *v = sc.family.value(gi, o.y);
            }
            let r1 = window(&self.axes[0], o.x[0]);
            for i in r1.clone() {
                k1[i] = sc.kernel.eval((o.x[0] - self.axes[0][i]) / self.h);
            }
            let r2 = if self.axes.len() == 2 {
                let r = window(&self.axes[1], o.x[1]);
                for j in r.clone() {
                    k2[j] = sc.kernel.eval((o.x[1] - self.axes[1][j]) / self.h);
                }
                r
            } else {
                0..1
            };
            for (gi, &gv) in g.iter().enumerate() {
                if gv == 0.0 {
                    continue;
                }
                for j in r2.clone() {
                    let base = gi * p + j * m1;
                    let w = gv * k2[j];
                    for i in r1.clone() {
                        sums[base + i] += w * k1[i];
                    }
                }
            }
        }
        sums
    }

    /// `max_a c_a h^{−d/2} (s_a − n E[gK]_a) / √n`.
    pub fn statistic_from_sums(&self, sums: &[f64], n: usize) -> f64 {
        let nf = n as f64;
        let hh = self.h.powf(-0.5 * self.axes.len() as f64);
        sums.iter()
            .zip(&self.means)
            .zip(&self.scale)
            .map(|((s, m), c)| c * hh * (s - nf * m) / nf.sqrt())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Ŝ_n(x, g) = (n h^d)⁻¹ Σ_i g(Y_i) K((X_i − x)/h)`.
    pub fn estimate_from_sums(&self, sums: &[f64], n: usize) -> Vec<f64> {
        let denom = n as f64 * self.h.powi(self.axes.len() as i32);
        sums.iter().map(|s| s / denom).collect()
    }

    /// `E Ŝ_n(x, g)`.
    pub fn expected_estimate(&self) -> Vec<f64> {
        let hd = self.h.powi(self.axes.len() as i32);
        self.means.iter().map(|m| m / hd).collect()
    }

    /// Standard deviation of `Ŝ_n(x, g)` at sample size `n`.
    pub fn sigma_n(&self, n: usize) -> Vec<f64> {
        let f = (n as f64).sqrt() * self.h.powf(0.5 * self.axes.len() as f64);
        self.sd.iter().map(|s| s / f).collect()
    }

    /// `p(x) E[g(Y) | X = x]` per index.
    pub fn true_function(&self) -> Vec<f64> {
        (0..self.len())
            .map(|a| self.scenario.true_function(self.g_index(a), &self.point(a)))
            .collect()
    }
}

/// `R` replications of the kernel-process supremum at the class's own `n`.
pub fn kernel_sup_sample(kc: &KernelClass, replications: usize, rng: RngPolicy) -> Result<SupSample<f64>> {
    if replications == 0 {
        return Err(Error::invalid("R", "need at least one replication"));
    }
    let n = kc.n;
    let values = rng.replicate(replications, |_, s| {
        let sums = kc.kernel_sums(n, s);
        kc.statistic_from_sums(&sums, n)
    });
    SupSample::new(values, "W_n(kernel)", rng, n)
}
