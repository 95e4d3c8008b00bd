//! Configuration-driven runner behind the `enriched` binary.
//!
//! Every command reads its inputs from a [`RunConfig`], writes its artifacts
//! into `output_dir` and returns a [`RunOutcome`] whose [`ExitCode`] encodes
//! the result:
//!
//! | code | meaning                                          |
//! |------|--------------------------------------------------|
//! | 0    | converged / certified                            |
//! | 1    | runtime or i/o failure                           |
//! | 2    | invalid input (malformed JSON, bad dimensions)   |
//! | 3    | iteration cap reached                            |
//! | 4    | iteration diverged                               |
//! | 5    | certification infeasible (incl. `--lambda auto`) |
//! | 6    | SFP converged to a non-solution (infeasible)     |
//! | 7    | VIP converged but the sampled VI residual failed |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::apps::{self, AppOptions, Instance, SfpOutcome, VipOutcome};
use crate::certify::{self, SampleSet};
use crate::error::{Error, Result};
use crate::export::{self, fmt_f64};
use crate::linalg::Vector;
use crate::mapping::MappingSpec;
use crate::solve::{self, IterationTrace, Lambda, SolveConfig, Status, StopRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Failure = 1,
    InvalidInput = 2,
    MaxIterReached = 3,
    Diverged = 4,
    CertificationInfeasible = 5,
    InfeasibleSfp = 6,
    ViResidualFailure = 7,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_status(status: Status) -> Self {
        match status {
            Status::Converged => ExitCode::Success,
            Status::MaxIterReached => ExitCode::MaxIterReached,
            Status::Diverged => ExitCode::Diverged,
        }
    }

    pub fn for_error(err: &Error) -> Self {
        match err {
            Error::Io { .. } => ExitCode::Failure,
            Error::AutoLambdaUnresolved | Error::DegenerateSample => {
                ExitCode::CertificationInfeasible
            }
            Error::Inconsistent(_) => ExitCode::Failure,
            _ => ExitCode::InvalidInput,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Certify,
    Solve,
    Sfp,
    Vip,
    Demo,
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Solve => "solve",
            Command::Sfp => "sfp",
            Command::Vip => "vip",
            Command::Demo => "demo",
            Command::Bench => "bench",
        }
    }
}

/// How witness samples are drawn.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleParams {
    /// Grid points per axis; `None` picks the default for the dimension.
    pub grid: Option<usize>,
    /// Seeded uniform points; `None` picks the default for the dimension.
    pub random: Option<usize>,
    pub seed: u64,
    /// Sampling box for maps defined on all of R^n (default `[0, 1]^n`).
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl SampleParams {
    /// 101 grid points per axis in 1-D, shrinking so that the grid stays at
    /// about 2000 points in 2-D and 3-D; higher dimensions are random-only
    /// with 2000 points.
    pub fn resolved(&self, dim: usize) -> (usize, usize) {
        let grid = self.grid.unwrap_or(match dim {
            1 => 101,
            2 | 3 => (2000f64.powf(1.0 / dim as f64).floor() as usize).min(101),
            _ => 0,
        });
        let random = self.random.unwrap_or(if dim <= 3 { 100 } else { 2000 });
        (grid, random)
    }

    pub fn build_for(&self, t: &MappingSpec) -> Result<SampleSet> {
        let d = t.domain();
        let (lower, upper) = match d.interval {
            Some((lo, hi)) => (vec![lo], vec![hi]),
            None => (
                self.lower.clone().unwrap_or_else(|| vec![0.0; d.dim]),
                self.upper.clone().unwrap_or_else(|| vec![1.0; d.dim]),
            ),
        };
        if lower.len() != d.dim || upper.len() != d.dim {
            return Err(Error::DimensionMismatch {
                expected: d.dim,
                found: lower.len().min(upper.len()),
            });
        }
        let (grid, random) = self.resolved(d.dim);
        SampleSet::grid_plus_random(&lower, &upper, grid, random, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub solver: SolveConfig,
    pub sample: SampleParams,
    pub k_grid: Vec<f64>,
    pub x0: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    /// λ values swept by `bench`.
    pub bench_lambdas: Vec<f64>,
    /// Known fixed point for `bench`; a reference solve is used otherwise.
    pub fixed_point: Option<Vec<f64>>,
    /// Record the wall-clock time in `summary.json`.
    pub timestamp: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input_path: None,
            solver: SolveConfig {
                lambda: Lambda::Auto,
                ..Default::default()
            },
            sample: SampleParams::default(),
            k_grid: default_k_grid(),
            x0: None,
            output_dir: PathBuf::from("out"),
            bench_lambdas: (1..=10).map(|i| i as f64 / 10.0).collect(),
            fixed_point: None,
            timestamp: true,
        }
    }
}

pub fn default_k_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 4.0]
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub code: ExitCode,
    /// Human-readable report printed by the binary.
    pub report: String,
}

fn path_error(path: &Path, e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let field = e.path().to_string();
    let message = if field == "." {
        e.into_inner().to_string()
    } else {
        format!("field `{field}`: {}", e.into_inner())
    };
    Error::Config {
        path: path.to_path_buf(),
        message,
    }
}

/// Reads and deserializes a JSON file, naming the offending field on failure.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: format!("cannot read file: {e}"),
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| path_error(path, e))
}

/// Input file contents: a bare mapping or an SFP/VIP instance.
#[derive(Clone, Debug)]
pub enum Input {
    Mapping(MappingSpec),
    Instance(Instance),
}

impl Input {
    /// The operator whose fixed points are sought.
    pub fn operator(&self) -> Result<MappingSpec> {
        match self {
            Input::Mapping(m) => Ok(m.clone()),
            Input::Instance(Instance::Sfp(s)) => apps::sfp_operator(s),
            Input::Instance(Instance::Vip(v)) => apps::vip_operator(v),
        }
    }
}

/// Loads a mapping, or an instance when the object has a `type` field, and
/// validates it.
pub fn load_input(path: &Path) -> Result<Input> {
    let value: Value = load_json(path)?;
    let invalid = |e: Error| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if value.get("type").is_some() {
        let inst: Instance =
            serde_path_to_error::deserialize(value).map_err(|e| path_error(path, e))?;
        match &inst {
            Instance::Sfp(s) => s.validate().map_err(invalid)?,
            Instance::Vip(v) => v.validate().map_err(invalid)?,
        }
        Ok(Input::Instance(inst))
    } else {
        let m: MappingSpec =
            serde_path_to_error::deserialize(value).map_err(|e| path_error(path, e))?;
        m.validate().map_err(invalid)?;
        Ok(Input::Mapping(m))
    }
}

fn require_input(cfg: &RunConfig) -> Result<Input> {
    let path = cfg
        .input_path
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("`{}` needs --config <path>", cfg.command.name())))?;
    load_input(path)
}

fn start_point(cfg: &RunConfig, t: &MappingSpec) -> Result<Vector> {
    let d = t.domain();
    let x0 = match &cfg.x0 {
        Some(v) => Vector::new(v.clone())?,
        None => match d.interval {
            Some((lo, _)) => Vector::scalar(lo)?,
            None => Vector::zeros(d.dim),
        },
    };
    x0.check_dim(d.dim)?;
    Ok(x0)
}

fn timestamp(cfg: &RunConfig) -> Value {
    if cfg.timestamp {
        json!(SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0))
    } else {
        Value::Null
    }
}

fn trace_summary(trace: &IterationTrace) -> Value {
    json!({
        "status": trace.status,
        "iterations": trace.iterations(),
        "lambda": trace.lambda,
        "rate": trace.rate,
        "stop_rule": trace.stop_rule,
        "final_point": trace.last(),
        "final_step": trace.step_norms.last(),
        "final_apriori": trace.apriori.as_ref().and_then(|v| v.last()),
        "final_aposteriori": trace.aposteriori.as_ref().and_then(|v| v.last()),
        "final_criterion": trace.final_criterion,
    })
}

fn write_summary(cfg: &RunConfig, mut body: Value) -> Result<()> {
    let obj = body.as_object_mut().expect("summary is an object");
    obj.insert("command".into(), json!(cfg.command.name()));
    obj.insert("seed".into(), json!(cfg.sample.seed));
    obj.insert("tol".into(), json!(cfg.solver.tol));
    obj.insert("max_iter".into(), json!(cfg.solver.max_iter));
    obj.insert("generated_unix".into(), timestamp(cfg));
    export::write_json(&cfg.output_dir.join("summary.json"), &body)
}

fn write_trace(cfg: &RunConfig, name: &str, trace: &IterationTrace) -> Result<()> {
    export::write_text(&cfg.output_dir.join(name), &export::trace_csv(trace))
}

/// Dispatches on `cfg.command`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    match cfg.command {
        Command::Certify => run_certify(cfg),
        Command::Solve => run_solve(cfg),
        Command::Sfp => run_sfp(cfg),
        Command::Vip => run_vip(cfg),
        Command::Demo => run_demo(cfg),
        Command::Bench => bench(cfg),
    }
}

fn run_certify(cfg: &RunConfig) -> Result<RunOutcome> {
    let t = require_input(cfg)?.operator()?;
    let sample = cfg.sample.build_for(&t)?;
    let kannan = certify::estimate_kannan_constants(&t, &sample, &cfg.k_grid)?;
    let bianchini = certify::estimate_bianchini_constants(&t, &sample, &cfg.k_grid)?;
    let banach = certify::estimate_banach_constant(&t, &sample)?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "sample: {} ({} points, seed {})",
        sample.description(),
        sample.len(),
        sample.seed()
    );
    let _ = writeln!(report, "k        a_min(k)               h_min(k)");
    for (ka, kb) in kannan.per_k.iter().zip(&bianchini.per_k) {
        let _ = writeln!(
            report,
            "{:<8} {:<22} {:<22}",
            ka.k,
            show(ka.rate),
            show(kb.rate)
        );
    }
    let mut certified = Vec::new();
    for (name, c) in [
        ("kannan", &kannan.best),
        ("bianchini", &bianchini.best),
        ("banach", &banach),
    ] {
        let verdict = if c.holds() { "certified" } else { "infeasible" };
        let _ = writeln!(
            report,
            "{name:<10} {:<18} k = {}, rate = {} -> {verdict}",
            c.class_tag, c.k, c.rate
        );
        if c.holds() {
            certified.push(c.class_tag);
        }
    }
    export::write_json(
        &cfg.output_dir.join("certificate.json"),
        &json!({
            "seed": cfg.sample.seed,
            "k_grid": cfg.k_grid,
            "kannan": kannan,
            "bianchini": bianchini,
            "banach": banach,
            "certified": certified,
        }),
    )?;
    let code = if certified.is_empty() {
        ExitCode::CertificationInfeasible
    } else {
        ExitCode::Success
    };
    Ok(RunOutcome { code, report })
}

fn show(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.15}"))
        .unwrap_or_else(|| "infeasible".into())
}

fn run_solve(cfg: &RunConfig) -> Result<RunOutcome> {
    let t = require_input(cfg)?.operator()?;
    let x0 = start_point(cfg, &t)?;
    let mut solver = cfg.solver.clone();
    let mut report = String::new();
    if solver.lambda == Lambda::Auto {
        let sample = cfg.sample.build_for(&t)?.extended([x0.clone()], "x0")?;
        let rc =
            certify::certify_rate(&t, &sample, &cfg.k_grid)?.ok_or(Error::AutoLambdaUnresolved)?;
        let _ = writeln!(
            report,
            "auto: {} certificate k = {}, constant = {} -> lambda = {}, rate = {}",
            rc.certificate.class_tag, rc.k, rc.certificate.rate, rc.lambda, rc.rate
        );
        solver.lambda = Lambda::Fixed(rc.lambda);
        solver.rate = solver.rate.or(Some(rc.rate));
        export::write_json(&cfg.output_dir.join("certificate.json"), &rc)?;
    }
    let trace = solve::krasnoselskij(&t, &x0, &solver)?;
    write_trace(cfg, "trace.csv", &trace)?;
    write_summary(cfg, trace_summary(&trace))?;
    let _ = writeln!(
        report,
        "{:?} after {} iterations at {:?}",
        trace.status,
        trace.iterations(),
        trace.last()
    );
    Ok(RunOutcome {
        code: ExitCode::for_status(trace.status),
        report,
    })
}

fn app_options(cfg: &RunConfig, dim: usize) -> AppOptions {
    AppOptions {
        seed: cfg.sample.seed,
        sample_points: cfg.sample.resolved(dim).1,
        k_grid: cfg.k_grid.clone(),
        ..AppOptions::default()
    }
}

fn run_sfp(cfg: &RunConfig) -> Result<RunOutcome> {
    let inst = match require_input(cfg)? {
        Input::Instance(Instance::Sfp(s)) => s,
        _ => {
            return Err(Error::invalid(
                "`sfp` expects an instance with \"type\": \"sfp\"",
            ))
        }
    };
    let dim = inst.c.dim();
    let x0 = match &cfg.x0 {
        Some(v) => Vector::new(v.clone())?,
        None => Vector::zeros(dim),
    };
    let rep = apps::solve_sfp(&inst, &cfg.solver, &x0, &app_options(cfg, dim))?;
    write_trace(cfg, "trace.csv", &rep.trace)?;
    let mut summary = trace_summary(&rep.trace);
    let obj = summary.as_object_mut().unwrap();
    obj.insert("outcome".into(), json!(rep.outcome));
    obj.insert("rho".into(), json!(rep.rho));
    obj.insert("gamma".into(), json!(rep.gamma));
    obj.insert("dist_to_C".into(), json!(rep.dist_to_c));
    obj.insert("image_residual".into(), json!(rep.image_residual));
    write_summary(cfg, summary)?;
    export::write_json(
        &cfg.output_dir.join("certificate.json"),
        &json!({ "certificate": rep.certificate, "note": rep.certificate_note }),
    )?;
    let report = format!(
        "{:?}: {:?} after {} iterations, x* = {:?}, dist(x*, C) = {:e}, dist(Ax*, Q) = {:e}\n",
        rep.outcome,
        rep.trace.status,
        rep.trace.iterations(),
        rep.solution,
        rep.dist_to_c,
        rep.image_residual
    );
    let code = match rep.outcome {
        SfpOutcome::Solved => ExitCode::Success,
        SfpOutcome::Infeasible => ExitCode::InfeasibleSfp,
        SfpOutcome::NotConverged => ExitCode::for_status(rep.trace.status),
    };
    Ok(RunOutcome { code, report })
}

fn run_vip(cfg: &RunConfig) -> Result<RunOutcome> {
    let inst = match require_input(cfg)? {
        Input::Instance(Instance::Vip(v)) => v,
        _ => {
            return Err(Error::invalid(
                "`vip` expects an instance with \"type\": \"vip\"",
            ))
        }
    };
    let dim = inst.c.dim();
    let x0 = match &cfg.x0 {
        Some(v) => Vector::new(v.clone())?,
        None => Vector::zeros(dim),
    };
    let rep = apps::solve_vip(&inst, &cfg.solver, &x0, &app_options(cfg, dim))?;
    write_trace(cfg, "trace.csv", &rep.trace)?;
    let mut summary = trace_summary(&rep.trace);
    let obj = summary.as_object_mut().unwrap();
    obj.insert("outcome".into(), json!(rep.outcome));
    obj.insert("vi_residual".into(), json!(rep.vi_residual));
    write_summary(cfg, summary)?;
    export::write_json(
        &cfg.output_dir.join("certificate.json"),
        &json!({ "bianchini": rep.certificate, "monotone": rep.monotone, "note": rep.certificate_note }),
    )?;
    let report = format!(
        "{:?}: {:?} after {} iterations, x* = {:?}, sampled VI residual = {:e}\n",
        rep.outcome,
        rep.trace.status,
        rep.trace.iterations(),
        rep.solution,
        rep.vi_residual
    );
    let code = match rep.outcome {
        VipOutcome::Solved => ExitCode::Success,
        VipOutcome::ResidualFailure => ExitCode::ViResidualFailure,
        VipOutcome::NotConverged => ExitCode::for_status(rep.trace.status),
    };
    Ok(RunOutcome { code, report })
}

/// Results of the reflection-map experiment run by `demo`.
#[derive(Clone, Debug)]
pub struct DemoResult {
    pub estimate: certify::ConstantEstimate,
    pub kannan: certify::ContractionCertificate,
    pub plain_kannan: certify::ContractionCertificate,
    pub lambda: f64,
    pub rate: f64,
    pub averaged: IterationTrace,
    pub picard: IterationTrace,
    /// Largest `‖x_n - p‖ - bound` over the averaged run, for both bounds.
    pub bound_excess: (f64, f64),
    /// `(a, claimed k, h, holds)` for both Bianchini constant pairs.
    pub bianchini_claims: Vec<(f64, f64, f64, bool)>,
}

/// The reflection `Tx = 1 - x` on `[0, 1]` with Kannan constant `a = 1/4`.
pub fn reflection_demo(sample: &SampleParams, tol: f64) -> Result<DemoResult> {
    let t = MappingSpec::Reflection1D;
    let witness = sample.build_for(&t)?;
    let estimate = certify::estimate_kannan_constants(&t, &witness, &[0.0, 0.25, 0.5, 0.75])?;

    let a = 0.25;
    let k = 1.0 - 2.0 * a;
    let kannan = certify::check_enriched_kannan(&t, k, a, &witness)?;
    let plain_kannan = certify::check_enriched_kannan(&t, 0.0, 0.49, &witness)?;

    let mut bianchini_claims = Vec::new();
    for a in [0.25, 0.1] {
        for k in [1.0 - 2.0 * a, 2.0 * (1.0 - a)] {
            let c = certify::check_enriched_bianchini(&t, k, 2.0 * a, &witness)?;
            bianchini_claims.push((a, k, 2.0 * a, c.holds()));
        }
    }

    let lambda = solve::auto_lambda(k)?;
    let rate = solve::contraction_rate_kannan(a)?;
    let averaged = solve::krasnoselskij(
        &t,
        &Vector::scalar(0.0)?,
        &SolveConfig::with_lambda(lambda).tol(tol).rate(rate),
    )?;
    let p = 0.5;
    let mut excess = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for n in 1..averaged.iterates.len() {
        let err = (averaged.iterates[n][0] - p).abs();
        excess.0 = excess
            .0
            .max(err - averaged.apriori.as_ref().unwrap()[n - 1]);
        excess.1 = excess
            .1
            .max(err - averaged.aposteriori.as_ref().unwrap()[n - 1]);
    }
    let picard = solve::krasnoselskij(
        &t,
        &Vector::scalar(0.0)?,
        &SolveConfig::with_lambda(1.0).tol(tol).max_iter(100),
    )?;

    Ok(DemoResult {
        estimate,
        kannan,
        plain_kannan,
        lambda,
        rate,
        averaged,
        picard,
        bound_excess: excess,
        bianchini_claims,
    })
}

fn run_demo(cfg: &RunConfig) -> Result<RunOutcome> {
    let d = reflection_demo(&cfg.sample, cfg.solver.tol)?;
    let mut r = String::new();
    let _ = writeln!(r, "T x = 1 - x on [0, 1]");
    let _ = writeln!(r, "estimated a_min(k) on {} points:", d.kannan.sample.len());
    for e in &d.estimate.per_k {
        let _ = writeln!(
            r,
            "  k = {:<5} a_min = {:<20} (|k - 1| / 2 = {})",
            e.k,
            show(e.rate),
            (e.k - 1.0).abs() / 2.0
        );
    }
    let _ = writeln!(
        r,
        "k = 0, a = 0.49: violated by {:e}{}",
        d.plain_kannan.max_violation,
        d.plain_kannan
            .witness_pair
            .as_ref()
            .map(|(x, y)| format!(" at x = {:?}, y = {:?}", x.as_slice(), y.as_slice()))
            .unwrap_or_default()
    );
    let _ = writeln!(
        r,
        "k = 0.5, a = 0.25: max violation {:e} -> {}",
        d.kannan.max_violation,
        if d.kannan.holds() {
            "certified"
        } else {
            "NOT certified"
        }
    );
    for (a, k, h, ok) in &d.bianchini_claims {
        let _ = writeln!(
            r,
            "Bianchini (k = {k}, h = {h}) for a = {a}: {}",
            if *ok { "holds" } else { "fails" }
        );
    }
    let _ = writeln!(
        r,
        "averaged lambda = {:.6}, rate = {:.6}: {:?} after {} iterations at {}",
        d.lambda,
        d.rate,
        d.averaged.status,
        d.averaged.iterations(),
        fmt_f64(d.averaged.last()[0])
    );
    let _ = writeln!(
        r,
        "bound excess (a priori, a posteriori): ({:e}, {:e})",
        d.bound_excess.0, d.bound_excess.1
    );
    let orbit: Vec<f64> = d.picard.iterates.iter().take(6).map(|x| x[0]).collect();
    let _ = writeln!(
        r,
        "Picard lambda = 1: {:?} after {} iterations, orbit {:?} ...",
        d.picard.status,
        d.picard.iterations(),
        orbit
    );

    write_trace(cfg, "trace.csv", &d.averaged)?;
    write_trace(cfg, "picard_trace.csv", &d.picard)?;
    write_summary(
        cfg,
        json!({
            "averaged": trace_summary(&d.averaged),
            "picard": trace_summary(&d.picard),
            "bound_excess": [d.bound_excess.0, d.bound_excess.1],
        }),
    )?;
    export::write_json(
        &cfg.output_dir.join("certificate.json"),
        &json!({ "estimate": d.estimate, "enriched_kannan": d.kannan, "kannan": d.plain_kannan }),
    )?;

    let ok = d.kannan.holds()
        && !d.plain_kannan.holds()
        && d.averaged.converged()
        && d.picard.status == Status::MaxIterReached
        && d.bound_excess.0 <= 1e-10
        && d.bound_excess.1 <= 1e-10;
    Ok(RunOutcome {
        code: if ok {
            ExitCode::Success
        } else {
            ExitCode::Failure
        },
        report: r,
    })
}

/// One row of a λ sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub lambda: f64,
    /// Iterations until `‖x_n - p‖ <= tol`; `None` if never reached.
    pub iterations: Option<usize>,
}

/// Iterations of `T_λ` from `x0` until within `tol` of `p`.
fn iterations_to(
    t: &MappingSpec,
    lambda: f64,
    x0: &Vector,
    p: &Vector,
    tol: f64,
    max_iter: usize,
) -> Option<usize> {
    let avg = t.averaged(lambda).ok()?;
    let mut x = x0.clone();
    for n in 0..=max_iter {
        if x.sub(p).ok()?.norm() <= tol {
            return Some(n);
        }
        x = avg.apply(&x).ok()?;
    }
    None
}

/// Sweeps λ and records iterations-to-tolerance, rows sorted by λ.
pub fn bench_rows(
    t: &MappingSpec,
    x0: &Vector,
    p: &Vector,
    lambdas: &[f64],
    tol: f64,
    max_iter: usize,
) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = lambdas
        .par_iter()
        .map(|&lambda| BenchRow {
            lambda,
            iterations: iterations_to(t, lambda, x0, p, tol, max_iter),
        })
        .collect();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    rows
}

/// Tight reference solve over the λ grid; the converged run with the fewest
/// iterations provides `p`.
fn reference_point(t: &MappingSpec, x0: &Vector, lambdas: &[f64]) -> Result<Vector> {
    let cfg = SolveConfig::default()
        .tol(1e-13)
        .max_iter(100_000)
        .stop_rule(StopRule::StepNorm);
    let best = lambdas
        .iter()
        .filter_map(|&l| {
            let cfg = SolveConfig {
                lambda: Lambda::Fixed(l),
                ..cfg.clone()
            };
            solve::krasnoselskij(t, x0, &cfg)
                .ok()
                .filter(|tr| tr.converged())
        })
        .min_by_key(|tr| tr.iterations())
        .ok_or_else(|| Error::invalid("no lambda in the sweep converged; pass --fixed-point"))?;
    Ok(best.last().clone())
}

pub fn bench(cfg: &RunConfig) -> Result<RunOutcome> {
    let t = require_input(cfg)?.operator()?;
    let x0 = start_point(cfg, &t)?;
    for &l in &cfg.bench_lambdas {
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::invalid(format!("bench lambda {l} outside (0, 1]")));
        }
    }
    let p = match &cfg.fixed_point {
        Some(v) => Vector::new(v.clone())?,
        None => reference_point(&t, &x0, &cfg.bench_lambdas)?,
    };
    p.check_dim(x0.dim())?;
    let rows = bench_rows(
        &t,
        &x0,
        &p,
        &cfg.bench_lambdas,
        cfg.solver.tol,
        cfg.solver.max_iter,
    );
    let mut csv = String::from("lambda,iterations,converged\n");
    let mut report = String::new();
    for row in &rows {
        let iters = row.iterations.map(|n| n.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt_f64(row.lambda),
            iters,
            row.iterations.is_some()
        );
        let _ = writeln!(
            report,
            "lambda = {:<5} {}",
            row.lambda,
            row.iterations
                .map_or("did not converge".to_string(), |n| format!(
                    "{n} iterations"
                ))
        );
    }
    export::write_text(&cfg.output_dir.join("bench.csv"), &csv)?;
    Ok(RunOutcome {
        code: ExitCode::Success,
        report,
    })
}
