//! Command-line and JSON configuration.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "qsl", version, about = "Minimum-time control of a qubit with piecewise-constant pulses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    TwoControl,
    OneControl,
    LandauZener,
    Linear,
    Grape,
    Sweep,
    AdjointMap,
    Nmr,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::TwoControl => "two-control",
            CommandKind::OneControl => "one-control",
            CommandKind::LandauZener => "landau-zener",
            CommandKind::Linear => "linear",
            CommandKind::Grape => "grape",
            CommandKind::Sweep => "sweep",
            CommandKind::AdjointMap => "adjoint-map",
            CommandKind::Nmr => "nmr",
        }
    }

    /// Fields each subcommand reads; anything else set by the user is rejected.
    fn fields(self) -> &'static [&'static str] {
        match self {
            CommandKind::TwoControl => &["n", "mode", "period", "stream", "perturbations", "sigma", "root"],
            CommandKind::OneControl => &["n", "mode", "period", "stream", "perturbations", "sigma", "detuning"],
            CommandKind::LandauZener => &["n", "mode", "period", "stream", "perturbations", "sigma", "omega", "bound"],
            CommandKind::Linear => &["n", "omega"],
            CommandKind::Grape => &["n", "t_min", "t_max", "t_step", "starts", "stream", "method", "threshold"],
            CommandKind::Sweep => &[
                "family", "mode", "n_min", "n_max", "n_step", "period_min", "period_max", "period_count", "stream",
                "perturbations", "sigma", "detuning", "omega", "bound", "root",
            ],
            CommandKind::AdjointMap => &["n", "grid", "root", "curve_samples", "px_max"],
            CommandKind::Nmr => &["n", "mode", "nu", "dwell", "stream", "perturbations", "sigma"],
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Resonant two-control transfer (1,0,0) → (0,1,0).
    TwoControl(Params),
    /// Detuned one-control transfer between the poles.
    OneControl(Params),
    /// Detuning-controlled transfer between adiabatic states.
    LandauZener(Params),
    /// Linear oscillator reference with its closed-form discrete solution.
    Linear(Params),
    /// Fixed-time GRAPE optimization over a grid of final times.
    Grape(Params),
    /// Minimum time as a function of N or of the sampling period.
    Sweep(Params),
    /// Figure of merit over adjoint directions, with the continuous reference curve.
    AdjointMap(Params),
    /// Minimum times in microseconds for a given Rabi frequency.
    Nmr(Params),
}

impl Command {
    pub fn split(self) -> (CommandKind, Params) {
        match self {
            Command::TwoControl(p) => (CommandKind::TwoControl, p),
            Command::OneControl(p) => (CommandKind::OneControl, p),
            Command::LandauZener(p) => (CommandKind::LandauZener, p),
            Command::Linear(p) => (CommandKind::Linear, p),
            Command::Grape(p) => (CommandKind::Grape, p),
            Command::Sweep(p) => (CommandKind::Sweep, p),
            Command::AdjointMap(p) => (CommandKind::AdjointMap, p),
            Command::Nmr(p) => (CommandKind::Nmr, p),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Locked,
    FreeTail,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    TwoControl,
    OneControl,
    LandauZener,
    Linear,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Split,
    Aux,
    Pmp,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootArg {
    Maximizing,
    Positive,
    Negative,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every tunable; unset fields take per-subcommand defaults.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// JSON file supplying any of these fields; flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Number of sampling intervals.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<ModeArg>,
    /// Fixed sampling period for free-tail runs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub period: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_min: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_step: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub period_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub period_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub period_count: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<FamilyArg>,
    /// Detuning of the one-control problem.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detuning: Option<f64>,
    /// Coupling of the Landau-Zener problem, or frequency of the linear system.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omega: Option<f64>,
    /// Detuning bound of the Landau-Zener problem.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound: Option<f64>,
    /// Rabi frequency in Hz.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<f64>,
    /// Pulse digitization in seconds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dwell: Option<f64>,
    /// Seed stream id for the random generators.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stream: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perturbations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub starts: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_step: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    /// Cells per side of the adjoint map.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub curve_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub px_max: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub root: Option<RootArg>,
    /// Primary output file; the manifest goes next to it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Params {
    /// Fields given on the command line win over those from the file.
    pub fn overlay(mut self, flags: &Params) -> Params {
        overlay!(self, flags; n, mode, period, n_min, n_max, n_step, period_min, period_max, period_count,
            family, detuning, omega, bound, nu, dwell, stream, perturbations, sigma, starts, t_min, t_max,
            t_step, method, threshold, grid, curve_samples, px_max, root, out, format);
        self
    }

    fn set_fields(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }
}

pub fn load_file(path: &Path) -> Result<Params, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub params: Params,
}

impl RunConfig {
    pub fn resolve(command: CommandKind, flags: Params) -> Result<Self, ConfigError> {
        let params = match &flags.config {
            Some(path) => load_file(path)?.overlay(&flags),
            None => flags,
        };
        let params = Params { config: None, ..params };
        let allowed = command.fields();
        for f in params.set_fields() {
            if f != "out" && f != "format" && !allowed.contains(&f.as_str()) {
                return Err(ConfigError::Field { field: f, message: format!("not used by `{}`", command.name()) });
            }
        }
        let cfg = Self { command, params };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(ConfigError::Field { field: name.into(), message: format!("must be positive, got {x}") }),
            _ => Ok(()),
        };
        let at_least_one = |name: &str, v: Option<usize>| match v {
            Some(0) => Err(ConfigError::Field { field: name.into(), message: "must be at least 1".into() }),
            _ => Ok(()),
        };
        positive("period", p.period)?;
        positive("period_min", p.period_min)?;
        positive("period_max", p.period_max)?;
        positive("omega", p.omega)?;
        positive("bound", p.bound)?;
        positive("nu", p.nu)?;
        positive("dwell", p.dwell)?;
        positive("sigma", p.sigma)?;
        positive("t_min", p.t_min)?;
        positive("t_max", p.t_max)?;
        positive("t_step", p.t_step)?;
        positive("threshold", p.threshold)?;
        positive("px_max", p.px_max)?;
        at_least_one("n", p.n)?;
        at_least_one("n_min", p.n_min)?;
        at_least_one("n_step", p.n_step)?;
        at_least_one("period_count", p.period_count)?;
        at_least_one("starts", p.starts)?;
        at_least_one("grid", p.grid)?;
        at_least_one("curve_samples", p.curve_samples)?;
        if let Some(d) = p.detuning {
            if !d.is_finite() {
                return Err(ConfigError::Field { field: "detuning".into(), message: "must be finite".into() });
            }
        }
        if let (Some(a), Some(b)) = (p.n_min, p.n_max) {
            if b < a {
                return Err(ConfigError::Field { field: "n_max".into(), message: format!("{b} is below n_min = {a}") });
            }
        }
        if let (Some(a), Some(b)) = (p.period_min, p.period_max) {
            if b < a {
                return Err(ConfigError::Field { field: "period_max".into(), message: format!("{b} is below period_min = {a}") });
            }
        }
        if let (Some(a), Some(b)) = (p.t_min, p.t_max) {
            if b < a {
                return Err(ConfigError::Field { field: "t_max".into(), message: format!("{b} is below t_min = {a}") });
            }
        }
        if p.mode == Some(ModeArg::FreeTail) && p.period.is_none() && matches!(self.command, CommandKind::TwoControl | CommandKind::OneControl | CommandKind::LandauZener) {
            return Err(ConfigError::Field { field: "period".into(), message: "required with --mode free-tail".into() });
        }
        if p.family == Some(FamilyArg::Linear) && p.mode == Some(ModeArg::FreeTail) {
            return Err(ConfigError::Field { field: "mode".into(), message: "the linear family has no free-tail sweep".into() });
        }
        Ok(())
    }

    /// Primary output path, defaulting to `<command>.<format>` in the working directory.
    pub fn output_path(&self) -> PathBuf {
        self.params.out.clone().unwrap_or_else(|| {
            let ext = match self.params.format() {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            PathBuf::from(format!("{}.{ext}", self.command.name()))
        })
    }
}
