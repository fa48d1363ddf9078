//! The `lfrg` command line front end.
//!
//! Settings come from an optional JSON config file and from flags; flags
//! win. The merged settings are echoed into every JSON output and CSV
//! sidecar under `"config"`, and such a document can be fed back through
//! `--config` to replay the run.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure (partial
//! results are still written), 3 I/O failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beta::{BetaMode, BetaSystem, DeSitterScale, SignMode, DEFAULT_FD_STEP};
use crate::error::Error;
use crate::fixed_points::{
    find_fixed_point, scan_fixed_points, stability_analysis_with, Axis, FixedPointReport, NewtonOptions,
};
use crate::kernels::{wick_square, Background, DeSitter, MinkowskiVacuum, MuMode, Thermal};
use crate::ode::{self, FlowProblem, FlowTrajectory};
use crate::potential::{self, PotentialFlowOptions, PotentialGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidProblem(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Tadpole,
    Beta,
    Flow,
    FixedPoint,
    Exponents,
    Scan,
    PotentialFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    MinkowskiVacuum,
    Thermal,
    ThermalHighT,
    DeSitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MuModeName {
    Fixed,
    TiedToK,
    TiedToH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BetaModeName {
    Transcribed,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SignModeName {
    PaperTranscribed,
    KernelConsistent,
}

/// `"background"` section of a config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<BackgroundKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_mode: Option<MuModeName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu2: Option<f64>,
    #[serde(rename = "H2", skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_mode: Option<SignModeName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_mode: Option<BetaModeName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k2_over_h2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_u0: Option<bool>,
}

/// `"couplings"` section: initial values, Newton guess or evaluation point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(rename = "U0", skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Newton tolerance on ‖β‖∞.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Command-specific settings that have no home in the four main sections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraSpec {
    /// Kernel evaluation point for `tadpole`.
    #[serde(rename = "M2", skip_serializing_if = "Option::is_none")]
    pub mass2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Scan grid as `name=min:max:count` entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
}

/// The full description of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default)]
    pub couplings: CouplingSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "ExtraSpec::is_empty")]
    pub extra: ExtraSpec,
}

impl ExtraSpec {
    fn is_empty(&self) -> bool {
        *self == ExtraSpec::default()
    }
}

#[derive(Debug, Parser)]
#[command(name = "lfrg", version, about = "LPA flows of the scalar effective potential with a local regulator")]
pub struct Cli {
    /// JSON config file (or a JSON output document to replay).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Suppress the summary on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the renormalized Wick square W(M²).
    Tadpole(RunArgs),
    /// Evaluate the beta functions at one point.
    Beta(RunArgs),
    /// Integrate the coupling flow.
    Flow(RunArgs),
    /// Newton search for a fixed point.
    FixedPoint(RunArgs),
    /// Stability matrix and critical exponents at a given point.
    Exponents(RunArgs),
    /// Newton searches from every node of a grid.
    Scan(RunArgs),
    /// Flow the full potential on a ρ-grid.
    PotentialFlow(RunArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub background: Option<BackgroundKind>,
    #[arg(long, value_enum)]
    pub mu_mode: Option<MuModeName>,
    #[arg(long)]
    pub mu2: Option<f64>,
    #[arg(long = "H2")]
    pub h2: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Spacetime dimension (Minkowski tadpole and potential flow only).
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long, value_enum)]
    pub sign_mode: Option<SignModeName>,
    #[arg(long, value_enum)]
    pub beta_mode: Option<BetaModeName>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Reference scale Λ, with k = Λ eᵗ.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Hold k²/H² fixed (de Sitter).
    #[arg(long)]
    pub k2_over_h2: Option<f64>,
    #[arg(long)]
    pub include_u0: bool,
    /// Couplings as `U0=..,m2=..,lambda=..`; any subset.
    #[arg(long, alias = "guess", alias = "at", value_name = "LIST")]
    pub couplings: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Comma-separated times at which steps are forced to land.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub checkpoints: Option<Vec<f64>>,
    #[arg(long = "M2", allow_hyphen_values = true)]
    pub mass2: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Scan grid, e.g. `m2=-0.5:2:20,lambda=0:50:20`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub rho_max: Option<f64>,
}

/// Parses `U0=..,m2=..,lambda=..` (any subset, any order).
pub fn parse_couplings(s: &str) -> CliResult<CouplingSpec> {
    let mut c = CouplingSpec::default();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let Some((key, val)) = item.split_once('=') else {
            return usage(format!("coupling entry `{item}` is not name=value"));
        };
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("coupling `{key}` has non-numeric value `{val}`")))?;
        match key.trim() {
            "U0" => c.u0 = Some(v),
            "m2" => c.m2 = Some(v),
            "lambda" => c.lambda = Some(v),
            other => return usage(format!("unknown coupling `{other}` (expected U0, m2, lambda)")),
        }
    }
    Ok(c)
}

fn parse_grid(s: &str) -> CliResult<[Axis; 3]> {
    let mut axes = [Axis::fixed(0.0); 3];
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let bad = || CliError::Usage(format!("grid entry `{item}` is not name=min:max:count"));
        let (key, spec) = item.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = spec.split(':').collect();
        let axis = match parts.as_slice() {
            [v] => Axis::fixed(v.parse().map_err(|_| bad())?),
            [a, b, n] => Axis::new(
                a.parse().map_err(|_| bad())?,
                b.parse().map_err(|_| bad())?,
                n.parse().map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        };
        let idx = match key.trim() {
            "U0" => 0,
            "m2" => 1,
            "lambda" => 2,
            other => return usage(format!("unknown grid coupling `{other}`")),
        };
        axes[idx] = axis;
    }
    Ok(axes)
}

/// Reads a config file. A JSON output document (with a top-level
/// `"config"` object) is accepted too, which replays that run.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let inner = match value.get("config") {
        Some(c) if value.get("result").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// Overlays flags onto `cfg`.
fn apply_args(cfg: &mut RunConfig, a: RunArgs) -> CliResult<()> {
    let b = &mut cfg.background;
    set(&mut b.kind, a.background);
    set(&mut b.mu_mode, a.mu_mode);
    set(&mut b.mu2, a.mu2);
    set(&mut b.h2, a.h2);
    set(&mut b.xi, a.xi);
    set(&mut b.beta, a.beta);
    set(&mut b.d, a.d);
    set(&mut b.sign_mode, a.sign_mode);
    set(&mut b.beta_mode, a.beta_mode);
    set(&mut b.fd_step, a.fd_step);
    set(&mut b.cutoff, a.cutoff);
    set(&mut b.k2_over_h2, a.k2_over_h2);
    if a.include_u0 {
        b.include_u0 = Some(true);
    }
    if let Some(s) = a.couplings {
        let c = parse_couplings(&s)?;
        set(&mut cfg.couplings.u0, c.u0);
        set(&mut cfg.couplings.m2, c.m2);
        set(&mut cfg.couplings.lambda, c.lambda);
    }
    let s = &mut cfg.solver;
    set(&mut s.t0, a.t0);
    set(&mut s.t1, a.t1);
    set(&mut s.rel_tol, a.rel_tol);
    set(&mut s.abs_tol, a.abs_tol);
    set(&mut s.max_steps, a.max_steps);
    set(&mut s.tol, a.tol);
    set(&mut s.max_iter, a.max_iter);
    set(&mut s.checkpoints, a.checkpoints);
    let x = &mut cfg.extra;
    set(&mut x.mass2, a.mass2);
    set(&mut x.k, a.k);
    set(&mut x.grid, a.grid);
    set(&mut x.nodes, a.nodes);
    set(&mut x.rho_max, a.rho_max);
    Ok(())
}

/// Builds the effective config from parsed flags and the optional file.
pub fn parse_config(cli: Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(cmd) = cli.command {
        let (kind, args) = match cmd {
            Command::Tadpole(a) => (CommandKind::Tadpole, a),
            Command::Beta(a) => (CommandKind::Beta, a),
            Command::Flow(a) => (CommandKind::Flow, a),
            Command::FixedPoint(a) => (CommandKind::FixedPoint, a),
            Command::Exponents(a) => (CommandKind::Exponents, a),
            Command::Scan(a) => (CommandKind::Scan, a),
            Command::PotentialFlow(a) => (CommandKind::PotentialFlow, a),
        };
        cfg.command = Some(kind);
        apply_args(&mut cfg, args)?;
    }
    set(&mut cfg.output.path, cli.out);
    set(&mut cfg.output.format, cli.format);
    validate_numbers(&cfg)?;
    Ok(cfg)
}

fn validate_numbers(cfg: &RunConfig) -> CliResult<()> {
    let b = &cfg.background;
    let s = &cfg.solver;
    let c = &cfg.couplings;
    let x = &cfg.extra;
    let named = [
        ("mu2", b.mu2),
        ("H2", b.h2),
        ("xi", b.xi),
        ("fd_step", b.fd_step),
        ("cutoff", b.cutoff),
        ("k2_over_h2", b.k2_over_h2),
        ("U0", c.u0),
        ("m2", c.m2),
        ("lambda", c.lambda),
        ("rel_tol", s.rel_tol),
        ("abs_tol", s.abs_tol),
        ("t0", s.t0),
        ("t1", s.t1),
        ("tol", s.tol),
        ("M2", x.mass2),
        ("k", x.k),
        ("rho_max", x.rho_max),
    ];
    for (name, v) in named {
        if let Some(v) = v {
            if !v.is_finite() {
                return usage(format!("`{name}` must be finite, got {v}"));
            }
        }
    }
    // β = ∞ is the vacuum and therefore allowed
    if let Some(beta) = b.beta {
        if beta.is_nan() {
            return usage("`beta` is NaN");
        }
    }
    if let Some(cp) = &s.checkpoints {
        if cp.iter().any(|v| !v.is_finite()) {
            return usage("`checkpoints` must be finite");
        }
    }
    Ok(())
}

fn mu_mode(spec: &BackgroundSpec, default: MuModeName) -> CliResult<MuMode> {
    let mode = match spec.mu_mode.unwrap_or(default) {
        MuModeName::Fixed => MuMode::Fixed {
            mu2: spec
                .mu2
                .ok_or_else(|| CliError::Usage("--mu-mode fixed needs --mu2".into()))?,
        },
        MuModeName::TiedToK => MuMode::TiedToK,
        MuModeName::TiedToH => MuMode::TiedToH,
    };
    mode.validate()?;
    Ok(mode)
}

fn kind(cfg: &RunConfig) -> CliResult<BackgroundKind> {
    cfg.background
        .kind
        .ok_or_else(|| CliError::Usage("missing required --background".into()))
}

fn desitter(spec: &BackgroundSpec) -> CliResult<DeSitter> {
    let bg = DeSitter {
        h2: spec.h2.ok_or_else(|| CliError::Usage("de-sitter needs --H2".into()))?,
        xi: spec.xi.ok_or_else(|| CliError::Usage("de-sitter needs --xi".into()))?,
        mu: mu_mode(spec, MuModeName::TiedToH)?,
    };
    bg.validate()?;
    Ok(bg)
}

/// The kernel background; `thermal-high-t` has none.
pub fn resolve_background(cfg: &RunConfig) -> CliResult<Background> {
    let spec = &cfg.background;
    let bg = match kind(cfg)? {
        BackgroundKind::MinkowskiVacuum => Background::MinkowskiVacuum(MinkowskiVacuum {
            d: spec.d.unwrap_or(4),
            mu: mu_mode(spec, MuModeName::TiedToK)?,
        }),
        BackgroundKind::Thermal => Background::Thermal(Thermal {
            beta: spec.beta.ok_or_else(|| CliError::Usage("thermal needs --beta".into()))?,
            mu: mu_mode(spec, MuModeName::TiedToK)?,
        }),
        BackgroundKind::ThermalHighT => {
            return usage("thermal-high-t is a beta system only; use --background thermal for kernels")
        }
        BackgroundKind::DeSitter => Background::DeSitter(desitter(spec)?),
    };
    bg.validate()?;
    Ok(bg)
}

/// The beta system. `frozen_default` is used for de Sitter when no k²/H²
/// is given: fixed-point commands freeze it at 0, flows let k run.
pub fn resolve_system(cfg: &RunConfig, frozen_default: bool) -> CliResult<BetaSystem> {
    let spec = &cfg.background;
    let cutoff = spec.cutoff.unwrap_or(1.0);
    let mode = match spec.beta_mode.unwrap_or(BetaModeName::Transcribed) {
        BetaModeName::Transcribed => BetaMode::Transcribed,
        BetaModeName::Kernel => BetaMode::KernelDerived {
            fd_step: spec.fd_step.unwrap_or(DEFAULT_FD_STEP),
        },
    };
    let sys = match kind(cfg)? {
        BackgroundKind::MinkowskiVacuum => {
            if spec.d.is_some_and(|d| d != 4) {
                return usage("beta systems exist for d = 4 only");
            }
            BetaSystem::MinkowskiVacuum {
                mu: mu_mode(spec, MuModeName::TiedToK)?,
                cutoff,
                mode,
            }
        }
        BackgroundKind::Thermal => BetaSystem::Thermal {
            beta: spec.beta.ok_or_else(|| CliError::Usage("thermal needs --beta".into()))?,
            mu: mu_mode(spec, MuModeName::TiedToK)?,
            cutoff,
            mode,
        },
        BackgroundKind::ThermalHighT => BetaSystem::ThermalHighT,
        BackgroundKind::DeSitter => {
            let scale = match spec.k2_over_h2 {
                Some(k2_over_h2) => DeSitterScale::Frozen { k2_over_h2 },
                None if frozen_default => DeSitterScale::Frozen { k2_over_h2: 0.0 },
                None => DeSitterScale::Running { cutoff },
            };
            BetaSystem::DeSitter {
                background: desitter(spec)?,
                scale,
                sign: match spec.sign_mode.unwrap_or(SignModeName::KernelConsistent) {
                    SignModeName::PaperTranscribed => SignMode::PaperTranscribed,
                    SignModeName::KernelConsistent => SignMode::KernelConsistent,
                },
                include_u0: spec.include_u0.unwrap_or(false),
            }
        }
    };
    sys.validate()?;
    Ok(sys)
}

fn couplings(cfg: &RunConfig) -> [f64; 3] {
    let c = &cfg.couplings;
    [c.u0.unwrap_or(0.0), c.m2.unwrap_or(0.0), c.lambda.unwrap_or(0.0)]
}

fn require_couplings(cfg: &RunConfig, flag: &str) -> CliResult<[f64; 3]> {
    let c = &cfg.couplings;
    if c.u0.is_none() && c.m2.is_none() && c.lambda.is_none() {
        return usage(format!("missing required {flag}"));
    }
    Ok(couplings(cfg))
}

fn newton_options(cfg: &RunConfig) -> NewtonOptions {
    let d = NewtonOptions::default();
    NewtonOptions {
        tol: cfg.solver.tol.unwrap_or(d.tol),
        max_iter: cfg.solver.max_iter.unwrap_or(d.max_iter),
        t: cfg.solver.t0.unwrap_or(0.0),
        ..d
    }
}

/// Number formatting for CSV: 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// What a command produced.
pub struct Outcome {
    pub csv: String,
    pub result: Value,
    /// Present when the run did not complete as requested.
    pub failure: Option<String>,
    pub summary: String,
}

fn report_value(r: &FixedPointReport) -> Value {
    let mut v = serde_json::to_value(r).expect("report serializes");
    let loc = &r.location;
    v["location"] = json!({"U0": loc[0], "m2": loc[1], "lambda": loc[2]});
    v
}

fn report_csv(reports: &[FixedPointReport]) -> String {
    let mut s = String::from("U0,m2,lambda,residual");
    for i in 1..=3 {
        let _ = write!(s, ",theta{i}_re,theta{i}_im");
    }
    s.push('\n');
    for r in reports {
        let mut row: Vec<String> = r.location.iter().map(|v| num(*v)).collect();
        row.push(num(r.residual));
        for e in &r.critical_exponents {
            row.push(num(e.re));
            row.push(num(e.im));
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let mut s = String::from("t,k,U0,m2,lambda\n");
    for smp in &traj.samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(smp.t),
            num(smp.k),
            num(smp.state[0]),
            num(smp.state[1]),
            num(smp.state[2])
        );
    }
    s
}

fn run_tadpole(cfg: &RunConfig) -> CliResult<Outcome> {
    let bg = resolve_background(cfg)?;
    let m2 = cfg.extra.mass2.ok_or_else(|| CliError::Usage("tadpole needs --M2".into()))?;
    let k = cfg.extra.k.unwrap_or(1.0);
    let w = wick_square(m2, &bg, k)?;
    Ok(Outcome {
        csv: format!("M2,k,W\n{},{},{}\n", num(m2), num(k), num(w.value)),
        result: json!({"M2": m2, "k": k, "W": w.value}),
        failure: None,
        summary: format!("W({m2}) = {:.16e}", w.value),
    })
}

fn run_beta(cfg: &RunConfig) -> CliResult<Outcome> {
    let sys = resolve_system(cfg, true)?;
    let g = require_couplings(cfg, "--couplings")?;
    let t = cfg.solver.t0.unwrap_or(0.0);
    let r = sys.rate(t, g)?;
    let k = sys.cutoff() * t.exp();
    Ok(Outcome {
        csv: format!(
            "t,k,U0,m2,lambda,beta_U0,beta_m2,beta_lambda\n{}\n",
            [t, k, g[0], g[1], g[2], r[0], r[1], r[2]].map(num).join(",")
        ),
        result: json!({"t": t, "k": k, "couplings": {"U0": g[0], "m2": g[1], "lambda": g[2]},
                       "beta": {"U0": r[0], "m2": r[1], "lambda": r[2]}}),
        failure: None,
        summary: format!("beta = [{:.6e}, {:.6e}, {:.6e}]", r[0], r[1], r[2]),
    })
}

fn run_flow(cfg: &RunConfig) -> CliResult<Outcome> {
    let sys = resolve_system(cfg, false)?;
    let g = require_couplings(cfg, "--couplings")?;
    let s = &cfg.solver;
    let t0 = s.t0.unwrap_or(0.0);
    let t1 = s.t1.ok_or_else(|| CliError::Usage("flow needs --t1".into()))?;
    let p = FlowProblem::new(sys, g.to_vec(), t0, t1)
        .cutoff(sys.cutoff())
        .tolerances(
            s.rel_tol.unwrap_or(ode::DEFAULT_REL_TOL),
            s.abs_tol.unwrap_or(ode::DEFAULT_ABS_TOL),
        )
        .max_steps(s.max_steps.unwrap_or(ode::DEFAULT_MAX_STEPS))
        .checkpoints(s.checkpoints.clone().unwrap_or_default());
    let traj = ode::integrate(&p)?;
    let samples: Vec<Value> = traj
        .samples
        .iter()
        .map(|x| json!({"t": x.t, "k": x.k, "U0": x.state[0], "m2": x.state[1], "lambda": x.state[2]}))
        .collect();
    let failure = (!traj.termination.is_complete()).then(|| format!("flow stopped early: {:?}", traj.termination));
    Ok(Outcome {
        csv: trajectory_csv(&traj),
        result: json!({"samples": samples, "termination": traj.termination, "stats": traj.stats}),
        failure,
        summary: format!(
            "{} accepted steps, {} samples, termination {:?}",
            traj.stats.accepted,
            traj.samples.len(),
            traj.termination
        ),
    })
}

fn run_fixed_point(cfg: &RunConfig) -> CliResult<Outcome> {
    let sys = resolve_system(cfg, true)?;
    let guess = require_couplings(cfg, "--guess")?;
    match find_fixed_point(&sys, &guess, &newton_options(cfg)) {
        Ok(r) => Ok(Outcome {
            csv: report_csv(std::slice::from_ref(&r)),
            summary: format!("fixed point {:?} (residual {:e})", r.location, r.residual),
            result: json!({"report": report_value(&r), "termination": "converged"}),
            failure: None,
        }),
        Err(Error::NoConvergence {
            iterate,
            residual,
            iterations,
        }) => {
            let msg = format!("Newton did not converge after {iterations} iterations (residual {residual:e})");
            let mut csv = String::from("U0,m2,lambda,residual\n");
            let _ = writeln!(csv, "{},{}", iterate.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","), num(residual));
            Ok(Outcome {
                csv,
                result: json!({"iterate": iterate, "residual": residual, "iterations": iterations,
                               "termination": "no-convergence"}),
                summary: msg.clone(),
                failure: Some(msg),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn run_exponents(cfg: &RunConfig) -> CliResult<Outcome> {
    let sys = resolve_system(cfg, true)?;
    let at = require_couplings(cfg, "--at")?;
    let r = stability_analysis_with(&sys, &at, &newton_options(cfg))?;
    Ok(Outcome {
        csv: report_csv(std::slice::from_ref(&r)),
        summary: format!(
            "eigenvalues {:?}",
            r.eigenvalues.iter().map(|e| e.re).collect::<Vec<_>>()
        ),
        result: json!({"report": report_value(&r)}),
        failure: None,
    })
}

fn run_scan(cfg: &RunConfig) -> CliResult<Outcome> {
    let sys = resolve_system(cfg, true)?;
    let grid = cfg.extra.grid.as_deref().ok_or_else(|| CliError::Usage("scan needs --grid".into()))?;
    let axes = parse_grid(grid)?;
    let out = scan_fixed_points(&sys, &axes, &newton_options(cfg))?;
    Ok(Outcome {
        csv: report_csv(&out.roots),
        summary: format!(
            "{} roots from {} starts ({} failed)",
            out.roots.len(),
            out.starts,
            out.failed_starts
        ),
        result: json!({"roots": out.roots.iter().map(report_value).collect::<Vec<_>>(),
                       "starts": out.starts, "failed_starts": out.failed_starts}),
        failure: None,
    })
}

fn run_potential_flow(cfg: &RunConfig) -> CliResult<Outcome> {
    let bg = resolve_background(cfg)?;
    let g0 = couplings(cfg);
    let s = &cfg.solver;
    let cutoff = cfg.background.cutoff.unwrap_or(1.0);
    let t0 = s.t0.unwrap_or(0.0);
    let opts = PotentialFlowOptions {
        t0,
        t_end: s.t1.ok_or_else(|| CliError::Usage("potential-flow needs --t1".into()))?,
        cutoff,
        rel_tol: s.rel_tol.unwrap_or(ode::DEFAULT_REL_TOL),
        abs_tol: s.abs_tol.unwrap_or(ode::DEFAULT_ABS_TOL),
        max_steps: s.max_steps.unwrap_or(ode::DEFAULT_MAX_STEPS),
        checkpoints: s.checkpoints.clone().unwrap_or_default(),
    };
    let rho_max = cfg
        .extra
        .rho_max
        .unwrap_or_else(|| potential::default_rho_max(g0[1], g0[2], cutoff));
    let n = cfg.extra.nodes.unwrap_or(256);
    let grid = PotentialGrid::quartic(rho_max, n, cutoff * t0.exp(), g0)?;
    let flow = potential::flow_potential(&grid, &bg, &opts)?;

    let mut csv = String::from("t,k,rho,U,M2\n");
    let mut snaps = Vec::new();
    for snap in &flow.snapshots {
        let m2 = potential::mass_squared_profile(&snap.grid);
        for (i, (u, m)) in snap.grid.values.iter().zip(&m2).enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                num(snap.t),
                num(snap.grid.k),
                num(snap.grid.rho(i)),
                num(*u),
                num(*m)
            );
        }
        let c = potential::couplings_at_origin(&snap.grid);
        snaps.push(json!({"t": snap.t, "k": snap.grid.k, "rho_max": snap.grid.rho_max,
                          "U": snap.grid.values, "M2": m2,
                          "origin": {"U0": c[0], "m2": c[1], "lambda": c[2]}}));
    }
    let failure = (!flow.termination.is_complete()).then(|| format!("flow stopped early: {:?}", flow.termination));
    Ok(Outcome {
        csv,
        summary: format!(
            "{} snapshots, {} accepted steps, termination {:?}",
            flow.snapshots.len(),
            flow.stats.accepted,
            flow.termination
        ),
        result: json!({"snapshots": snaps, "termination": flow.termination, "stats": flow.stats}),
        failure,
    })
}

/// Runs a parsed config; returns the outcome or a usage/numerical error.
pub fn execute(cfg: &RunConfig) -> CliResult<Outcome> {
    let cmd = cfg
        .command
        .ok_or_else(|| CliError::Usage("no command given (subcommand or \"command\" in the config)".into()))?;
    match cmd {
        CommandKind::Tadpole => run_tadpole(cfg),
        CommandKind::Beta => run_beta(cfg),
        CommandKind::Flow => run_flow(cfg),
        CommandKind::FixedPoint => run_fixed_point(cfg),
        CommandKind::Exponents => run_exponents(cfg),
        CommandKind::Scan => run_scan(cfg),
        CommandKind::PotentialFlow => run_potential_flow(cfg),
    }
}

fn default_format(cfg: &RunConfig) -> Format {
    if let Some(f) = cfg.output.format {
        return f;
    }
    match cfg.output.path.as_deref().and_then(Path::extension).and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        _ => match cfg.command {
            Some(CommandKind::Flow | CommandKind::PotentialFlow) => Format::Csv,
            _ => Format::Json,
        },
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, data: &str) -> CliResult<()> {
    fs::write(path, data).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs a config and writes its output; returns the exit code.
pub fn run(cfg: &RunConfig, quiet: bool) -> i32 {
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("lfrg: {e}");
            return e.exit_code();
        }
    };
    let format = default_format(cfg);
    let document = json!({
        "program": "lfrg",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "result": outcome.result,
    });
    let json_text = serde_json::to_string_pretty(&document).expect("document serializes") + "\n";
    let data = match format {
        Format::Csv => &outcome.csv,
        Format::Json => &json_text,
    };
    let written = match &cfg.output.path {
        Some(path) => write_file(path, data).and_then(|_| match format {
            Format::Csv => write_file(&sidecar_path(path), &json!({
                "program": "lfrg",
                "version": env!("CARGO_PKG_VERSION"),
                "config": cfg,
                "rows": outcome.csv.lines().count().saturating_sub(1),
                "termination": outcome.result.get("termination"),
                "stats": outcome.result.get("stats"),
            }).to_string()),
            Format::Json => Ok(()),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(data.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    };
    if let Err(e) = written {
        eprintln!("lfrg: {e}");
        return e.exit_code();
    }
    if !quiet {
        eprintln!("lfrg: {}", outcome.summary);
    }
    match outcome.failure {
        Some(msg) => {
            eprintln!("lfrg: {msg}");
            EXIT_NUMERICAL
        }
        None => EXIT_OK,
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let quiet = cli.quiet;
    match parse_config(cli) {
        Ok(cfg) => run(&cfg, quiet),
        Err(e) => {
            eprintln!("lfrg: {e}");
            e.exit_code()
        }
    }
}
