//! Config-driven experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use supcoupling::bands::coverage_experiment;
use supcoupling::bounds::{
    crossover_sweep, main_theorem_budget, stein_coupling_terms, vc_class_budget, AnalyticStein, SampledStein,
    SteinCouplingTerms,
};
use supcoupling::scenarios::{
    build_kernel_class, build_series_class, rate_experiment, KernelScenario, Normalization, ScenarioSpec,
};
use supcoupling::simulate::{gaussian_sup_sample, levy_concentration};
use supcoupling::{Error as CoreError, RngPolicy};

pub use config::{validate, RunConfig, Subcommand, ValidationError};
use config::{SampledLaw, SteinInput, SteinParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ValidationError>),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => EXIT_VALIDATION,
            RunError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            RunError::Core(_) => EXIT_VALIDATION,
            RunError::ChecksFailed(_) => EXIT_NUMERICAL,
            RunError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    seed: u64,
    subcommand: &'static str,
    version: &'static str,
    core_version: &'static str,
    threads: usize,
    wall_time_seconds: f64,
    outputs: Vec<String>,
}

/// Files produced by a run, in write order.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
    summary: String,
}

impl Outputs {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.summary.push_str(s.as_ref());
        self.summary.push('\n');
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

pub fn default_output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("supcoupling-{}", cfg.subcommand.name())))
}

/// Computes all outputs of a validated config without touching the file system.
pub fn compute(cfg: &RunConfig) -> Result<(Outputs, bool), RunError> {
    let rng = RngPolicy::new(cfg.seed).fork(cfg.subcommand.name());
    let mut out = Outputs::default();
    let ok = match cfg.subcommand {
        Subcommand::SmoothmaxCheck => smoothmax_check(cfg, rng, &mut out)?,
        Subcommand::CouplingBounds => coupling_bounds(cfg, rng, &mut out)?,
        Subcommand::CouplingCrossover => coupling_crossover(cfg, &mut out)?,
        Subcommand::Rate => rate(cfg, rng, &mut out)?,
        Subcommand::Bands => bands(cfg, rng, &mut out)?,
        Subcommand::Anticoncentration => anticoncentration(cfg, rng, &mut out)?,
    };
    out.line(format!("status: {}", if ok { "ok" } else { "FAILED" }));
    Ok((out, ok))
}

/// Runs a config and writes its outputs plus `summary.txt` and
/// `manifest.json` under `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<Outputs, RunError> {
    let errors = config::check(cfg, "");
    if !errors.is_empty() {
        return Err(RunError::Invalid(errors));
    }
    let start = Instant::now();
    let (out, ok) = compute(cfg)?;
    let io = |path: &Path, e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut names = Vec::new();
    for (name, contents) in out.files.iter().chain([&("summary.txt".to_string(), out.summary.clone())]) {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        names.push(name.clone());
    }
    let manifest = Manifest {
        config: cfg,
        seed: cfg.seed,
        subcommand: cfg.subcommand.name(),
        version: env!("CARGO_PKG_VERSION"),
        core_version: supcoupling::VERSION,
        threads: rayon::current_num_threads(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: names,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, json(&manifest)).map_err(|e| io(&path, e))?;
    if ok {
        Ok(out)
    } else {
        let failed = out.summary.lines().filter(|l| l.contains("FAIL")).count();
        Err(RunError::ChecksFailed(failed.max(1)))
    }
}

fn smoothmax_check(cfg: &RunConfig, rng: RngPolicy, out: &mut Outputs) -> Result<bool, RunError> {
    let results = checks::run_all(&cfg.smoothmax, rng)?;
    let mut csv = String::from("suite,cases,violations,max_excess,pass\n");
    for r in &results {
        let _ = writeln!(csv, "{},{},{},{},{}", r.suite, r.cases, r.violations, r.max_excess, r.pass());
        out.line(format!(
            "{} {}: {} cases, {} violations",
            if r.pass() { "PASS" } else { "FAIL" },
            r.suite,
            r.cases,
            r.violations
        ));
    }
    out.file("smoothmax_check.csv", csv);
    Ok(results.iter().all(|r| r.pass()))
}

#[derive(Serialize)]
struct CouplingReport {
    main: supcoupling::CouplingBudget64,
    main_prob_bound_clamped: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    vc: Option<supcoupling::bounds::VcBudget<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stein: Option<SteinCouplingTerms<f64>>,
}

fn stein_terms(st: &SteinParams, rng: RngPolicy) -> Result<SteinCouplingTerms<f64>, CoreError> {
    match &st.moments {
        SteinInput::Bounded { b } => {
            let m = AnalyticStein::bounded_profile(st.n, st.p, *b);
            stein_coupling_terms(&m, st.delta, st.n, st.p, st.beta, st.c_const)
        }
        SteinInput::Analytic { b1, b2, tail3 } => {
            let tail = tail3.clone();
            let m = AnalyticStein {
                b1: *b1,
                b2: *b2,
                tail3: Box::new(move |u| tail.eval(u)),
            };
            stein_coupling_terms(&m, st.delta, st.n, st.p, st.beta, st.c_const)
        }
        SteinInput::Sampled { law, reps } => {
            let scale = 1.0 / (st.n as f64).sqrt();
            let law = *law;
            let gram: Vec<f64> = (0..st.p * st.p).map(|i| if i % (st.p + 1) == 0 { 1.0 } else { 0.0 }).collect();
            let m = SampledStein::estimate(st.n, st.p, *reps, rng.fork("stein"), Some(&gram), |r, buf| {
                for v in buf.iter_mut() {
                    *v = scale
                        * match law {
                            SampledLaw::Gaussian => r.sample::<f64, _>(StandardNormal),
                            SampledLaw::Rademacher => {
                                if r.random::<bool>() {
                                    1.0
                                } else {
                                    -1.0
                                }
                            }
                        };
                }
            })?;
            stein_coupling_terms(&m, st.delta, st.n, st.p, st.beta, st.c_const)
        }
    }
}

fn coupling_bounds(cfg: &RunConfig, rng: RngPolicy, out: &mut Outputs) -> Result<bool, RunError> {
    let c = &cfg.coupling;
    let main = main_theorem_budget(&c.moments, c.epsilon, c.gamma, &c.constants)?;
    let vc = c
        .vc
        .as_ref()
        .map(|v| vc_class_budget(v.n, v.gamma, v.q, v.b, v.sigma, v.a, v.v, v.c_const, v.c_prob))
        .transpose()?;
    let stein = c.stein.as_ref().map(|s| stein_terms(s, rng)).transpose()?;

    let mut csv = String::from("bound,term,value\n");
    let t = &main.terms;
    for (name, v) in [
        ("phi", t.phi),
        ("eps_term", t.eps_term),
        ("Mq_term", t.mq_term),
        ("M2_term", t.m2_term),
        ("FF_term", t.ff_term),
        ("kappa_term", t.kappa_term),
        ("delta_n", main.delta_n),
        ("threshold", main.threshold),
        ("delta_n_tail", main.delta_n_tail),
        ("prob_bound", main.prob_bound),
    ] {
        let _ = writeln!(csv, "main,{name},{v}");
    }
    out.line(format!(
        "main budget: threshold {} with probability bound {}",
        main.threshold,
        main.prob_bound_clamped()
    ));
    if let Some(v) = &vc {
        for (i, term) in v.terms.iter().enumerate() {
            let _ = writeln!(csv, "vc,term_{},{}", i + 1, term);
        }
        let _ = writeln!(csv, "vc,k_n,{}", v.k_n);
        let _ = writeln!(csv, "vc,total,{}", v.total);
        let _ = writeln!(csv, "vc,prob_bound,{}", v.prob_bound);
        out.line(format!("vc budget: total {} with probability bound {}", v.total, v.prob_bound));
    }
    if let Some(s) = &stein {
        for (name, v) in [
            ("B1", s.b1),
            ("B2", s.b2),
            ("B3", s.b3),
            ("B4", s.b4),
            ("beta", s.beta),
            ("epsilon", s.epsilon),
            ("threshold_thm41", s.threshold_thm41),
            ("prob_bound_thm41", s.prob_bound_thm41),
            ("threshold_cor41", s.threshold_cor41),
            ("prob_bound_cor41", s.prob_bound_cor41),
        ] {
            let _ = writeln!(csv, "stein,{name},{v}");
        }
        let (thm, cor) = s.clamped();
        out.line(format!("stein coupling: smoothed bound {thm}, applied bound {cor}"));
    }
    out.file("coupling_terms.csv", csv);
    out.file(
        "coupling_bounds.json",
        json(&CouplingReport {
            main_prob_bound_clamped: main.prob_bound_clamped(),
            main,
            vc,
            stein,
        }),
    );
    Ok(true)
}

fn coupling_crossover(cfg: &RunConfig, out: &mut Outputs) -> Result<bool, RunError> {
    let x = &cfg.crossover;
    let rep = crossover_sweep(&x.ns, x.exponent, x.delta, x.c_const)?;
    let mut csv = String::from("n,p,cor41,yurinskii\n");
    for r in &rep.rows {
        let _ = writeln!(csv, "{},{},{},{}", r.n, r.p, r.cor41, r.yurinskii);
    }
    out.file("crossover.csv", csv);
    out.file("crossover.json", json(&rep));
    out.line(format!(
        "applied Stein bound decreasing: {}; Yurinskii bound increasing: {}",
        rep.cor41_decreasing, rep.yurinskii_increasing
    ));
    match rep.crossover_n {
        Some(n) => out.line(format!("Stein bound below Yurinskii from n = {n}")),
        None => out.line("Stein bound never below Yurinskii on this grid"),
    }
    Ok(true)
}

fn rate(cfg: &RunConfig, rng: RngPolicy, out: &mut Outputs) -> Result<bool, RunError> {
    let r = &cfg.rate;
    let rep = rate_experiment(&cfg.scenario, &r.n_list, r.replications, rng)?;
    out.file("rate.csv", rep.to_csv());
    out.file("rate_report.json", json(&rep));
    for row in &rep.rows {
        out.line(format!(
            "n = {}: KS = {} (±{}), predicted rate {}",
            row.n, row.ks, row.ks_conf, row.predicted_rate
        ));
    }
    out.line(format!("log-log slope: {}", rep.slope_fit));
    if let Some(g) = &rep.refinement {
        out.line(format!(
            "grid refinement at n = {}: {} -> {} points, KS {} -> {} ({})",
            g.n,
            g.grid_points,
            g.refined_grid_points,
            g.ks,
            g.ks_refined,
            if g.stable { "stable" } else { "UNSTABLE" }
        ));
    }
    Ok(true)
}

fn bands(cfg: &RunConfig, rng: RngPolicy, out: &mut Outputs) -> Result<bool, RunError> {
    let sc = config::kernel_scenario(cfg).ok_or_else(|| {
        RunError::Invalid(vec![ValidationError {
            line: 1,
            field: "scenario.kind".into(),
            message: "bands need a kernel scenario".into(),
        }])
    })?;
    let run = coverage_experiment(sc, &cfg.bands, rng)?;
    out.file("band.csv", run.example_band.to_csv());
    out.file("coverage.json", json(&run.report));
    let r = &run.report;
    out.line(format!(
        "coverage {} (nominal {}, binomial se {}) over {} replications, c_alpha = {}",
        r.empirical, r.nominal, r.binomial_se, r.replications, r.c_alpha
    ));
    Ok(true)
}

#[derive(Serialize)]
struct AntiRow {
    epsilon: f64,
    levy: f64,
    bound: f64,
    holds: bool,
}

fn anticoncentration(cfg: &RunConfig, rng: RngPolicy, out: &mut Outputs) -> Result<bool, RunError> {
    let a = &cfg.anticoncentration;
    let cov = match &cfg.scenario {
        ScenarioSpec::Kernel(k) => {
            let sc = KernelScenario {
                normalization: Normalization::Studentized,
                ..k.clone()
            };
            build_kernel_class(&sc, a.n)?.covariance().clone()
        }
        ScenarioSpec::Series(s) => build_series_class(s, a.n)?.covariance().clone(),
    };
    let sigma_low = cov.sigma().diagonal().iter().fold(f64::INFINITY, |m, &v| m.min(v.max(0.0).sqrt()));
    if !(sigma_low > 0.0) {
        return Err(CoreError::ZeroVariance { index: 0, x: vec![] }.into());
    }
    let sample = gaussian_sup_sample(&cov, a.replications, rng.fork("gaussian"))?;
    let mean = sample.mean();
    let mut csv = String::from("epsilon,levy,bound,holds\n");
    let mut all = true;
    for &eps in &a.epsilons {
        let levy = levy_concentration(&sample, eps);
        let bound = a.c_const * eps / sigma_low * (mean + (sigma_low / eps).ln().max(1.0).sqrt());
        let row = AntiRow {
            epsilon: eps,
            levy,
            bound,
            holds: levy <= bound,
        };
        all &= row.holds;
        let _ = writeln!(csv, "{},{},{},{}", row.epsilon, row.levy, row.bound, row.holds);
        out.line(format!(
            "{} ε = {}: L(ε) = {} vs bound {}",
            if row.holds { "PASS" } else { "FAIL" },
            eps,
            levy,
            bound
        ));
    }
    out.line(format!("E sup = {mean}, σ_min = {sigma_low}"));
    out.file("anticoncentration.csv", csv);
    Ok(all)
}
