use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use supcoupling::bands::CoverageConfig;
use supcoupling::bounds::{extended, BudgetConstants, MomentInputs, StepProfile};
use supcoupling::scenarios::{KernelScenario, ScenarioSpec};
use supcoupling::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Subcommand {
    SmoothmaxCheck,
    CouplingBounds,
    CouplingCrossover,
    Rate,
    Bands,
    Anticoncentration,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::SmoothmaxCheck => "smoothmax-check",
            Subcommand::CouplingBounds => "coupling-bounds",
            Subcommand::CouplingCrossover => "coupling-crossover",
            Subcommand::Rate => "rate",
            Subcommand::Bands => "bands",
            Subcommand::Anticoncentration => "anticoncentration",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub smoothmax: SmoothmaxParams,
    #[serde(default)]
    pub coupling: CouplingParams,
    #[serde(default)]
    pub crossover: CrossoverParams,
    #[serde(default)]
    pub rate: RateParams,
    #[serde(default)]
    pub bands: CoverageConfig,
    #[serde(default)]
    pub anticoncentration: AnticoncentrationParams,
}

impl RunConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        RunConfig {
            subcommand,
            seed: 0,
            output_dir: None,
            scenario: ScenarioSpec::default(),
            smoothmax: SmoothmaxParams::default(),
            coupling: CouplingParams::default(),
            crossover: CrossoverParams::default(),
            rate: RateParams::default(),
            bands: CoverageConfig::default(),
            anticoncentration: AnticoncentrationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorParams {
    pub intervals: Vec<[f64; 2]>,
    pub delta: f64,
    pub beta: f64,
    pub grid_points: usize,
}

impl Default for IndicatorParams {
    fn default() -> Self {
        IndicatorParams {
            intervals: vec![[0.0, 1.0]],
            delta: 0.2,
            beta: 10.0,
            grid_points: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothmaxParams {
    pub sandwich_vectors: usize,
    pub max_dim: usize,
    pub derivative_draws: usize,
    pub fd_max_dim: usize,
    /// `[lo, hi]`; `β` is drawn log-uniformly.
    pub beta_range: [f64; 2],
    pub indicator: IndicatorParams,
    /// `(p, n)` pairs for the applied smoothing level check.
    pub epsilon_pairs: Vec<[usize; 2]>,
}

impl Default for SmoothmaxParams {
    fn default() -> Self {
        SmoothmaxParams {
            sandwich_vectors: 100_000,
            max_dim: 1000,
            derivative_draws: 10_000,
            fd_max_dim: 6,
            beta_range: [0.1, 1000.0],
            indicator: IndicatorParams::default(),
            epsilon_pairs: vec![[1, 3], [3, 3], [10, 100], [1000, 10], [50, 5000], [100_000, 1000]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VcParams {
    pub n: usize,
    pub gamma: f64,
    #[serde(with = "extended")]
    pub q: f64,
    pub b: f64,
    pub sigma: f64,
    pub a: f64,
    pub v: f64,
    pub c_const: f64,
    pub c_prob: f64,
}

impl Default for VcParams {
    fn default() -> Self {
        VcParams {
            n: 10_000,
            gamma: 0.1,
            q: f64::INFINITY,
            b: 1.0,
            sigma: 0.5,
            a: std::f64::consts::E,
            v: 1.0,
            c_const: 1.0,
            c_prob: 1.0,
        }
    }
}

/// Where the Stein moment functionals come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SteinInput {
    /// Coordinates bounded by `b/√n`.
    Bounded { b: f64 },
    Analytic { b1: f64, b2: f64, tail3: StepProfile<f64> },
    /// Monte Carlo from `X_ij = Z_ij/√n` with i.i.d. standard normal or Rademacher `Z`.
    Sampled { law: SampledLaw, reps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampledLaw {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteinParams {
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    /// Defaults to `2δ⁻¹ log(p ∨ n)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub c_const: f64,
    pub moments: SteinInput,
}

impl Default for SteinParams {
    fn default() -> Self {
        SteinParams {
            n: 512,
            p: 8,
            delta: 0.5,
            beta: None,
            c_const: 1.0,
            moments: SteinInput::Bounded { b: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingParams {
    pub moments: MomentInputs<f64>,
    pub epsilon: f64,
    pub gamma: f64,
    pub constants: BudgetConstants<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vc: Option<VcParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stein: Option<SteinParams>,
}

impl Default for CouplingParams {
    fn default() -> Self {
        let n = 1000;
        CouplingParams {
            moments: MomentInputs {
                n,
                p_or_n: n,
                sigma: 1.0,
                b: 1.0,
                q: 4.0,
                envelope_l2: 1.0,
                m_q: 2.0,
                m_2: 1.5,
                kappa: 1.0,
                eg_ff: 1.0,
                phi: StepProfile::Constant(0.0),
                h_profile: StepProfile::Constant((n as f64).ln()),
                tail: StepProfile::Constant(0.0),
                provenance: BTreeMap::new(),
            },
            epsilon: 0.05,
            gamma: 0.1,
            constants: BudgetConstants::default(),
            vc: Some(VcParams::default()),
            stein: Some(SteinParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossoverParams {
    pub ns: Vec<usize>,
    pub exponent: f64,
    pub delta: f64,
    pub c_const: f64,
}

impl Default for CrossoverParams {
    fn default() -> Self {
        CrossoverParams {
            ns: (8..=16).map(|k| 1usize << k).collect(),
            exponent: 0.2,
            delta: 1.0,
            c_const: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateParams {
    pub n_list: Vec<usize>,
    pub replications: usize,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams {
            n_list: vec![500, 2000, 8000],
            replications: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnticoncentrationParams {
    pub n: usize,
    pub replications: usize,
    pub epsilons: Vec<f64>,
    /// Constant in `L(ε) ≤ C ε/σ̲ (E Z̃ + sqrt(1 ∨ log(σ̲/ε)))`.
    pub c_const: f64,
}

impl Default for AnticoncentrationParams {
    fn default() -> Self {
        AnticoncentrationParams {
            n: 2000,
            replications: 100_000,
            epsilons: vec![0.01, 0.02, 0.05, 0.1, 0.2],
            c_const: 3.0,
        }
    }
}

/// One validation failure, anchored to a line of the config text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.field, self.message)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Byte offset of `"key"` used as an object key at or after `from`.
fn find_key(text: &str, key: &str, from: usize) -> Option<usize> {
    let pat = format!("\"{key}\"");
    let mut start = from;
    while let Some(i) = text.get(start..).and_then(|t| t.find(&pat)) {
        let at = start + i;
        let rest = text[at + pat.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(at);
        }
        start = at + pat.len();
    }
    None
}

/// Line of the deepest key of a dotted path present in the text, falling
/// back to its nearest present ancestor.
fn locate(text: &str, path: &str) -> usize {
    let mut at = None;
    let mut from = 0;
    for key in path.split('.') {
        let key = key.split('[').next().unwrap_or(key);
        match find_key(text, key, from) {
            Some(i) => {
                at = Some(i);
                from = i;
            }
            None => break,
        }
    }
    at.map_or(1, |i| line_of(text, i))
}

struct Collector<'a> {
    text: &'a str,
    errors: Vec<ValidationError>,
}

impl Collector<'_> {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        let field = field.into();
        self.errors.push(ValidationError {
            line: locate(self.text, &field),
            field,
            message: message.into(),
        });
    }

    fn core(&mut self, prefix: &str, e: Error) {
        match e {
            Error::InvalidArgument { name, reason } => self.push(format!("{prefix}.{name}"), reason),
            other => self.push(prefix.to_string(), other.to_string()),
        }
    }

    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.push(field, message);
        }
    }
}

const N_RULE: &str = "n ≥ 3 required: the bounds involve log n and assume at least three observations";

fn check_beta_delta(c: &mut Collector<'_>, field: &str, beta: f64, delta: f64) {
    if !(beta * delta > 1.0) {
        c.push(
            field,
            format!("β·δ = {} must exceed 1: the smoothing error ε(β,δ) needs α = β²δ² − 1 > 0", beta * delta),
        );
    }
}

/// Semantic checks on a parsed config; `text` anchors messages to lines.
pub fn check(cfg: &RunConfig, text: &str) -> Vec<ValidationError> {
    let mut c = Collector {
        text,
        errors: Vec::new(),
    };

    let s = &cfg.smoothmax;
    c.check(s.sandwich_vectors > 0, "smoothmax.sandwich_vectors", "must be ≥ 1");
    c.check(s.max_dim > 0, "smoothmax.max_dim", "must be ≥ 1");
    c.check(s.derivative_draws > 0, "smoothmax.derivative_draws", "must be ≥ 1");
    c.check((1..=64).contains(&s.fd_max_dim), "smoothmax.fd_max_dim", "must lie in 1..=64");
    let [blo, bhi] = s.beta_range;
    c.check(
        blo > 0.0 && blo <= bhi && bhi.is_finite(),
        "smoothmax.beta_range",
        "need 0 < lo ≤ hi < ∞ (β must be positive)",
    );
    let ind = &s.indicator;
    c.check(ind.delta > 0.0, "smoothmax.indicator.delta", "δ must be positive");
    c.check(ind.beta > 0.0, "smoothmax.indicator.beta", "β must be positive");
    if ind.delta > 0.0 && ind.beta > 0.0 {
        check_beta_delta(&mut c, "smoothmax.indicator.beta", ind.beta, ind.delta);
    }
    c.check(
        !ind.intervals.is_empty() && ind.intervals.iter().all(|[a, b]| a.is_finite() && b.is_finite() && a <= b),
        "smoothmax.indicator.intervals",
        "need a non-empty list of finite [lo, hi] with lo ≤ hi",
    );
    c.check(ind.grid_points > 0, "smoothmax.indicator.grid_points", "must be ≥ 1");
    c.check(
        s.epsilon_pairs.iter().all(|&[p, n]| p >= 1 && n >= 1 && p.max(n) >= 3),
        "smoothmax.epsilon_pairs",
        "each (p, n) needs p, n ≥ 1 and p ∨ n ≥ 3",
    );

    let cp = &cfg.coupling;
    if cp.moments.n < 3 {
        c.push("coupling.moments.n", N_RULE);
    } else if let Err(e) = cp.moments.validate() {
        c.core("coupling.moments", e);
    }
    c.check(
        cp.epsilon > 0.0 && cp.epsilon <= 1.0,
        "coupling.epsilon",
        format!("ε = {} must lie in (0, 1]", cp.epsilon),
    );
    c.check(
        cp.gamma > 0.0 && cp.gamma < 1.0,
        "coupling.gamma",
        format!("γ = {} must lie in (0, 1)", cp.gamma),
    );
    if let Some(vc) = &cp.vc {
        c.check(vc.n >= 3, "coupling.vc.n", N_RULE);
        c.check(vc.gamma > 0.0 && vc.gamma < 1.0, "coupling.vc.gamma", "γ must lie in (0, 1)");
        c.check(vc.q >= 4.0, "coupling.vc.q", "q must lie in [4, ∞]");
        c.check(vc.sigma > 0.0, "coupling.vc.sigma", "σ must be positive");
        c.check(
            vc.sigma <= vc.b,
            "coupling.vc.sigma",
            format!("σ = {} > b = {}: σ² = sup Pf² cannot exceed the envelope scale b²", vc.sigma, vc.b),
        );
        c.check(vc.a >= std::f64::consts::E, "coupling.vc.a", "A ≥ e required by the VC entropy bound");
        c.check(vc.v >= 1.0, "coupling.vc.v", "v ≥ 1 required");
    }
    if let Some(st) = &cp.stein {
        c.check(st.n >= 3, "coupling.stein.n", N_RULE);
        c.check(st.p >= 1, "coupling.stein.p", "dimension must be ≥ 1");
        c.check(st.delta > 0.0, "coupling.stein.delta", "δ must be positive");
        if let Some(beta) = st.beta {
            c.check(beta > 0.0, "coupling.stein.beta", "β must be positive");
            check_beta_delta(&mut c, "coupling.stein.beta", beta, st.delta);
        }
        match &st.moments {
            SteinInput::Bounded { b } => c.check(*b >= 0.0, "coupling.stein.moments.b", "must be ≥ 0"),
            SteinInput::Analytic { b1, b2, tail3 } => {
                c.check(*b1 >= 0.0 && *b2 >= 0.0, "coupling.stein.moments", "B1, B2 must be ≥ 0");
                if let Err(e) = tail3.validate("tail3") {
                    c.core("coupling.stein.moments", e);
                }
            }
            SteinInput::Sampled { reps, .. } => c.check(*reps >= 2, "coupling.stein.moments.reps", "need ≥ 2 replications"),
        }
    }

    let x = &cfg.crossover;
    c.check(!x.ns.is_empty(), "crossover.ns", "need at least one sample size");
    c.check(x.ns.iter().all(|&n| n >= 3), "crossover.ns", N_RULE);
    c.check(x.exponent > 0.0, "crossover.exponent", "must be positive");
    c.check(x.delta > 0.0, "crossover.delta", "δ must be positive");

    let r = &cfg.rate;
    c.check(r.n_list.len() >= 3, "rate.n_list", "need at least three sample sizes");
    c.check(r.n_list.iter().all(|&n| n >= 3), "rate.n_list", N_RULE);
    c.check(r.n_list.windows(2).all(|w| w[0] < w[1]), "rate.n_list", "sample sizes must increase");
    c.check(r.replications >= 1, "rate.replications", "must be ≥ 1");

    let b = &cfg.bands;
    c.check(
        b.alpha > 0.0 && b.alpha < 1.0,
        "bands.alpha",
        format!("α = {} must lie in (0, 1)", b.alpha),
    );
    c.check(b.n >= 3, "bands.n", N_RULE);
    c.check(b.r_outer >= 1 && b.r_inner >= 1, "bands", "replication counts must be ≥ 1");
    if let Some(v) = b.c_override {
        c.check(v >= 0.0, "bands.c_override", "critical value must be ≥ 0");
    }

    let a = &cfg.anticoncentration;
    c.check(a.n >= 3, "anticoncentration.n", N_RULE);
    c.check(a.replications >= 1, "anticoncentration.replications", "must be ≥ 1");
    c.check(
        !a.epsilons.is_empty() && a.epsilons.iter().all(|&e| e > 0.0 && e.is_finite()),
        "anticoncentration.epsilons",
        "need positive ε values",
    );

    if let Err(e) = cfg.scenario.validate() {
        c.core("scenario", e);
    }
    if cfg.subcommand == Subcommand::Bands && !matches!(cfg.scenario, ScenarioSpec::Kernel(_)) {
        c.push("scenario.kind", "bands need a kernel scenario");
    }
    c.errors
}

/// Parses and validates config text. A manifest written by a previous run is
/// accepted through its `config` key.
pub fn validate(text: &str) -> Result<RunConfig, Vec<ValidationError>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        vec![ValidationError {
            line: e.line(),
            field: "<document>".into(),
            message: e.to_string(),
        }]
    })?;
    let parsed = match value.get("config") {
        Some(inner) if inner.is_object() => serde_json::from_value::<RunConfig>(inner.clone())
            .map_err(|e| (locate(text, "config"), e.to_string())),
        _ => serde_json::from_str::<RunConfig>(text).map_err(|e| (e.line(), e.to_string())),
    };
    let cfg = parsed.map_err(|(line, message)| {
        let field = message
            .split('`')
            .nth(1)
            .filter(|_| message.contains("field"))
            .unwrap_or("<config>")
            .to_string();
        vec![ValidationError { line, field, message }]
    })?;
    let errors = check(&cfg, text);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// The default scenario used by the kernel-only subcommands.
pub fn kernel_scenario(cfg: &RunConfig) -> Option<&KernelScenario> {
    match &cfg.scenario {
        ScenarioSpec::Kernel(k) => Some(k),
        ScenarioSpec::Series(_) => None,
    }
}
