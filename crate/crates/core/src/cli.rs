//! `wahba` command-line front end.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 solver did not converge
//! (`solve`) or a check failed (`verify`).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::davenport::solve_davenport;
use crate::formats::{fixed_decimal_json, fmt_f64, parse_observations, write_observations, write_trace};
use crate::model::{loss_total, HessianConvention, ObservationSet};
use crate::optim::{solve, Method, OptimizerConfig};
use crate::quat::{angular_distance, Quaternion};
use crate::sim::{generate_set, reference_case, random_unit_quaternion, substream, truth_for_seed, SimConfig, WeightScheme};
use crate::spectral::{analyze, Classification};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wahba", version, about = "Wahba attitude solver and Hessian convexity analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the attitude from an observation file.
    Solve(SolveArgs),
    /// Eigen-analysis of the loss Hessian at a quaternion.
    Hessian(HessianArgs),
    /// Sample quaternions over a norm range and classify the Hessian at each.
    Sweep(SweepArgs),
    /// Write a synthetic observation file.
    Simulate(SimulateArgs),
    /// Run the built-in reproduction and identity checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gda,
    Gna,
    Lma,
    Davenport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartPoint {
    Random,
    Fixed(Quaternion),
}

fn parse_quat(s: &str) -> Result<Quaternion, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected 4 comma-separated numbers, got {}", parts.len()));
    }
    let mut a = [0.0; 4];
    for (slot, p) in a.iter_mut().zip(parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(Quaternion::from_array(a))
}

fn parse_start(s: &str) -> Result<StartPoint, String> {
    if s.eq_ignore_ascii_case("random") {
        Ok(StartPoint::Random)
    } else {
        parse_quat(s).map(StartPoint::Fixed)
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
        return Err(format!("empty or invalid norm range [{lo}, {hi}]"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "lma")]
    pub method: MethodArg,
    /// Start quaternion `q0,q1,q2,q3` or `random`.
    #[arg(long, default_value = "random", value_parser = parse_start)]
    pub q0: StartPoint,
    /// Disable per-step quaternion normalization.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub step_size: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub kappa: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Result JSON path (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Iteration trace CSV path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HessianArgs {
    #[arg(long, required_unless_present = "builtin")]
    pub input: Option<PathBuf>,
    /// Use the built-in reference observation pair instead of a file.
    #[arg(long, conflicts_with = "input")]
    pub builtin: bool,
    /// Quaternion `q0,q1,q2,q3`.
    #[arg(long, value_parser = parse_quat, allow_hyphen_values = true)]
    pub quat: Quaternion,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, required_unless_present = "builtin")]
    pub input: Option<PathBuf>,
    #[arg(long, conflicts_with = "input")]
    pub builtin: bool,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Norm range `MIN,MAX`.
    #[arg(long, default_value = "1,2", value_parser = parse_range)]
    pub norm_range: (f64, f64),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path (stdout when omitted; the summary then goes to stderr).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 3)]
    pub pairs: usize,
    /// Per-axis Gaussian noise on body vectors.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated custom weights (uniform when omitted).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Ground-truth quaternion (derived from the seed when omitted).
    #[arg(long, value_parser = parse_quat, allow_hyphen_values = true)]
    pub truth: Option<Quaternion>,
    #[arg(long)]
    pub output: PathBuf,
    /// Metadata JSON path (defaults to `<output>.meta.json`).
    #[arg(long)]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Build H_A from the closed-form entry table instead of the second
    /// partials of C; the trace identity is expected to fail.
    #[arg(long)]
    pub entry_table_hessian: bool,
}

struct CmdError {
    code: i32,
    message: String,
}

impl CmdError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

type CmdResult = Result<i32, CmdError>;

fn read_set(path: &Path) -> Result<ObservationSet, CmdError> {
    let text = fs::read_to_string(path).map_err(|e| CmdError::input(format!("{}: {e}", path.display())))?;
    parse_observations(&text).map_err(|e| CmdError::input(format!("{}: {e}", path.display())))
}

fn load_input(input: &Option<PathBuf>, builtin: bool) -> Result<ObservationSet, CmdError> {
    match (input, builtin) {
        (_, true) => Ok(reference_case().set()),
        (Some(p), false) => read_set(p),
        (None, false) => Err(CmdError::input("--input is required")),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CmdError> {
    fs::write(path, contents).map_err(|e| CmdError::input(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, contents: &str) -> Result<(), CmdError> {
    match path {
        Some(p) => write_file(p, contents),
        None => out.write_all(contents.as_bytes()).map_err(|e| CmdError::input(e.to_string())),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct SolveOutput {
    method: &'static str,
    final_q: [f64; 4],
    final_loss: f64,
    converged: bool,
    termination_reason: String,
    iterations: usize,
    davenport_q: [f64; 4],
    davenport_lambda: f64,
    agreement_angle_rad: f64,
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> CmdResult {
    let set = read_set(&args.input)?;
    let oracle = solve_davenport(&set).map_err(|e| CmdError::input(e.to_string()))?;
    let davenport_q = oracle.quaternion.quaternion();

    let method = match args.method {
        MethodArg::Gda => Method::Gda,
        MethodArg::Gna => Method::Gna,
        MethodArg::Lma => Method::Lma,
        MethodArg::Davenport => {
            let result = SolveOutput {
                method: "davenport",
                final_q: davenport_q.to_array(),
                final_loss: loss_total(&set, &davenport_q),
                converged: true,
                termination_reason: "closed_form".into(),
                iterations: 0,
                davenport_q: davenport_q.to_array(),
                davenport_lambda: oracle.lambda_max,
                agreement_angle_rad: 0.0,
            };
            emit(out, args.output.as_deref(), &to_json(&result))?;
            return Ok(EXIT_OK);
        }
    };

    let q0 = match args.q0 {
        StartPoint::Fixed(q) => q,
        StartPoint::Random => random_unit_quaternion(&mut substream(args.seed, 0)).quaternion(),
    };
    let config = OptimizerConfig {
        method,
        step_size: args.step_size,
        kappa: args.kappa,
        normalize_each_step: !args.no_normalize,
        max_iters: args.max_iters,
        ..OptimizerConfig::default()
    };
    let res = solve(&set, &q0, &config).map_err(|e| CmdError::input(e.to_string()))?;
    let agreement = angular_distance(&res.final_q, &davenport_q).unwrap_or(f64::NAN);

    if let Some(path) = &args.trace {
        write_file(path, &write_trace(&res.trace))?;
    }
    let result = SolveOutput {
        method: match method {
            Method::Gda => "gda",
            Method::Gna => "gna",
            Method::Lma => "lma",
        },
        final_q: res.final_q.to_array(),
        final_loss: res.final_loss,
        converged: res.converged,
        termination_reason: serde_json::to_value(res.termination_reason)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        iterations: res.trace.len() - 1,
        davenport_q: davenport_q.to_array(),
        davenport_lambda: oracle.lambda_max,
        agreement_angle_rad: agreement,
    };
    emit(out, args.output.as_deref(), &to_json(&result))?;
    Ok(if res.converged { EXIT_OK } else { EXIT_FAILED })
}

#[derive(Serialize)]
struct HessianOutput {
    quaternion: [f64; 4],
    norm: f64,
    eigenvalues: Vec<Box<serde_json::value::RawValue>>,
    classification: Classification,
    rank_estimate: usize,
    lower_bound: f64,
    upper_bound: f64,
    lower_margin: f64,
    upper_margin: f64,
    bound_satisfied: bool,
}

fn cmd_hessian(args: &HessianArgs, out: &mut dyn Write) -> CmdResult {
    let set = load_input(&args.input, args.builtin)?;
    if !args.quat.is_finite() {
        return Err(CmdError::input("quaternion must be finite"));
    }
    let r = analyze(&set, &args.quat).map_err(|e| CmdError::input(e.to_string()))?;
    let result = HessianOutput {
        quaternion: args.quat.to_array(),
        norm: r.norm,
        eigenvalues: r.eigenvalues.iter().map(|l| fixed_decimal_json(*l, 15)).collect(),
        classification: r.classification,
        rank_estimate: r.rank_estimate,
        lower_bound: r.lower_bound,
        upper_bound: r.upper_bound,
        lower_margin: r.lower_margin,
        upper_margin: r.upper_margin,
        bound_satisfied: r.bound_satisfied,
    };
    emit(out, None, &to_json(&result))?;
    Ok(EXIT_OK)
}

/// One sweep sample: `(norm, min_eig, max_eig, class)`.
pub type SweepRow = (f64, f64, f64, Classification);

/// Sample `i` draws its direction and norm from substream `i` of `seed`, so
/// rows do not depend on evaluation order.
pub fn sweep_rows(set: &ObservationSet, samples: usize, range: (f64, f64), seed: u64) -> Vec<SweepRow> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let dir = random_unit_quaternion(&mut rng).quaternion();
            let norm = if range.1 > range.0 { rng.random_range(range.0..=range.1) } else { range.0 };
            let q = dir.scale(norm);
            let r = analyze(set, &q).expect("Hessian is symmetric by construction");
            (norm, r.min_eig, r.max_eig, r.classification)
        })
        .collect()
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if args.samples == 0 {
        return Err(CmdError::input("--samples must be at least 1"));
    }
    let set = load_input(&args.input, args.builtin)?;
    let rows = sweep_rows(&set, args.samples, args.norm_range, args.seed);

    let mut csv = String::from("norm,min_eig,max_eig,class\n");
    for (norm, lo, hi, class) in &rows {
        csv.push_str(&format!("{},{},{},{}\n", fmt_f64(*norm), fmt_f64(*lo), fmt_f64(*hi), class));
    }
    let outside: Vec<&SweepRow> = rows.iter().filter(|r| r.0 >= 1.0).collect();
    let convex = outside.iter().filter(|r| r.3.is_convex()).count();
    let indefinite = rows.iter().filter(|r| r.3 == Classification::Indefinite).count();
    let fraction = if outside.is_empty() {
        "n/a".to_string()
    } else {
        format!("{:.6}", convex as f64 / outside.len() as f64)
    };
    let summary = format!(
        "psd_fraction_norm_ge_1={fraction} ({convex}/{}) indefinite={indefinite}/{}\n",
        outside.len(),
        rows.len()
    );

    match &args.output {
        Some(path) => {
            write_file(path, &csv)?;
            out.write_all(summary.as_bytes()).map_err(|e| CmdError::input(e.to_string()))?;
        }
        None => {
            out.write_all(csv.as_bytes()).map_err(|e| CmdError::input(e.to_string()))?;
            err.write_all(summary.as_bytes()).map_err(|e| CmdError::input(e.to_string()))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let truth = match args.truth {
        Some(q) => crate::quat::normalize(&q).map_err(|e| CmdError::input(e.to_string()))?,
        None => truth_for_seed(args.seed),
    };
    let config = SimConfig {
        n_pairs: args.pairs,
        noise_sigma: args.noise,
        weights: args.weights.clone().map_or(WeightScheme::Uniform, WeightScheme::Custom),
        seed: args.seed,
    };
    let (set, meta) = generate_set(&truth, &config).map_err(|e| CmdError::input(e.to_string()))?;
    write_file(&args.output, &write_observations(&set))?;
    let meta_path = args.metadata.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".meta.json");
        PathBuf::from(p)
    });
    write_file(&meta_path, &to_json(&meta))?;
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let convention = if args.entry_table_hessian {
        HessianConvention::EntryTable
    } else {
        HessianConvention::SecondPartials
    };
    let report = verify::run(convention).map_err(|e| CmdError::input(e.to_string()))?;
    let mut text = String::new();
    let labels = ["|q| < 1", "|q| = 1", "|q| > 1"];
    for ((label, values), class) in labels.iter().zip(&report.eigenvalues).zip(&report.classifications) {
        let v: Vec<String> = values.iter().map(|l| format!("{l:.15}")).collect();
        text.push_str(&format!("{label:<8} [{}]  {class}\n", v.join(", ")));
    }
    text.push('\n');
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!("{status}  {:<32} {}\n", c.name, c.detail));
    }
    let passed = report.checks.iter().filter(|c| c.passed).count();
    text.push_str(&format!("\n{passed}/{} checks passed\n", report.checks.len()));
    out.write_all(text.as_bytes()).map_err(|e| CmdError::input(e.to_string()))?;
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_FAILED })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Hessian(a) => cmd_hessian(a, out),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
