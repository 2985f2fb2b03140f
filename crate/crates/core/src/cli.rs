//! Command-line front end. Sweeps write CSV; every file starts with a `#`
//! metadata line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::effective::{analyze, Analysis};
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::observables::{
    decay_rates, hybrid_eigenstates, labeled_spectrum, w_decomposition, RelaxationRates,
    SpectrumLabel,
};
use crate::solver::{Branch, SolverConfig};
use crate::verify::{run_suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "qbridge",
    version,
    about = "Bridge-qubit mediated coupling between circuit-QED cavities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve a single point and print the report.
    Solve,
    /// J_n and Δ' over a (g, f) grid.
    Sweep,
    /// Labeled two-qubit spectrum along g = f.
    Spectrum,
    /// W-state fidelity along g = f for each n.
    Fidelity,
    /// Two-qubit relaxation rates along g = f.
    Decay,
    /// Run the property suite.
    Verify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Spectrum => "spectrum",
            Command::Fidelity => "fidelity",
            Command::Decay => "decay",
            Command::Verify => "verify",
        }
    }
}

/// Flags shared by all subcommands. Unset values fall back to the config
/// file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Qubit count(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Qubit-resonator coupling in units of Δ.
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// Resonator-bridge coupling in units of Δ.
    #[arg(long, global = true)]
    pub f: Option<f64>,
    /// a:b:steps grid for g/Δ.
    #[arg(long, global = true)]
    pub g_range: Option<String>,
    /// a:b:steps grid for f/Δ.
    #[arg(long, global = true)]
    pub f_range: Option<String>,
    #[arg(long, global = true)]
    pub omega_q: Option<f64>,
    #[arg(long, global = true)]
    pub omega_r: Option<f64>,
    /// κ/γ.
    #[arg(long, global = true)]
    pub kappa_ratio: Option<f64>,
    /// γ'/γ.
    #[arg(long, global = true)]
    pub gamma_prime_ratio: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Plain key=value file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Smaller verification suite.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Decoupling branch: large or small.
    #[arg(long, global = true)]
    pub branch: Option<String>,
    /// Offset added to solved θ in `verify`, to exercise the failure path.
    #[arg(long, global = true, hide = true)]
    pub inject_theta: Option<f64>,
}

/// Inclusive grid `a:b:steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let span = self.end - self.start;
        (0..self.steps)
            .map(|k| self.start + span * k as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

impl FromStr for Range {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("range '{s}' is not of the form a:b:steps"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if steps < 2 {
            return Err(Error::InvalidParams(format!(
                "range '{s}' needs at least 2 steps"
            )));
        }
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || end < start {
            return Err(Error::InvalidParams(format!(
                "range '{s}' must satisfy 0 <= a <= b"
            )));
        }
        Ok(Range { start, end, steps })
    }
}

impl std::fmt::Display for Range {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.steps)
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub ns: Vec<usize>,
    pub g: Option<f64>,
    pub f: Option<f64>,
    pub g_range: Range,
    pub f_range: Range,
    pub omega_q: f64,
    pub omega_r: f64,
    pub kappa_ratio: f64,
    pub gamma_prime_ratio: f64,
    pub out: Option<PathBuf>,
    pub quick: bool,
    pub theta_perturbation: f64,
    pub solver: SolverConfig,
    /// Keys whose defaults were assumed rather than given.
    pub defaulted: Vec<&'static str>,
}

const CONFIG_KEYS: &[&str] = &[
    "n",
    "g",
    "f",
    "g-range",
    "f-range",
    "omega-q",
    "omega-r",
    "kappa-ratio",
    "gamma-prime-ratio",
    "out",
    "quick",
    "branch",
];

/// Parses `key=value` lines; `#` starts a comment. Keys use the flag
/// spelling, with `_` accepted for `-`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParams(format!("config line {} has no '='", lineno + 1))
        })?;
        let key = k.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParams(format!(
                "unknown config key '{}' on line {}",
                k.trim(),
                lineno + 1
            )));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidParams(format!("invalid value '{v}' for {key}")))
}

fn parse_ns(v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_value("n", s.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidParams(format!(
            "invalid value '{v}' for {key}"
        ))),
    }
}

impl RunConfig {
    /// Merges flags over an optional config file and fills defaults.
    pub fn resolve(command: Command, opts: &Options) -> Result<Self> {
        let file = match &opts.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidParams(format!("cannot read config {}: {e}", path.display()))
                })?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let from_file = |key: &str| file.get(key).map(String::as_str);
        let mut defaulted = Vec::new();

        let ns = match (&opts.n, from_file("n")) {
            (Some(v), _) => v.clone(),
            (None, Some(v)) => parse_ns(v)?,
            (None, None) => {
                defaulted.push("n");
                match command {
                    Command::Fidelity => vec![3, 4, 5],
                    _ => vec![2],
                }
            }
        };
        let scalar = |flag: Option<f64>, key: &str| -> Result<Option<f64>> {
            match (flag, from_file(key)) {
                (Some(v), _) => Ok(Some(v)),
                (None, Some(v)) => parse_value(key, v).map(Some),
                (None, None) => Ok(None),
            }
        };
        let g = scalar(opts.g, "g")?;
        let f = scalar(opts.f, "f")?;
        let omega_q = scalar(opts.omega_q, "omega-q")?.unwrap_or(5.0);
        let omega_r = scalar(opts.omega_r, "omega-r")?.unwrap_or(4.0);
        let kappa_ratio = scalar(opts.kappa_ratio, "kappa-ratio")?.unwrap_or(12.0);
        let gamma_prime_ratio = scalar(opts.gamma_prime_ratio, "gamma-prime-ratio")?.unwrap_or(1.0);

        let default_steps = match command {
            Command::Sweep => 11,
            _ => 51,
        };
        let mut range = |flag: &Option<String>, key: &'static str| -> Result<Range> {
            match (flag, from_file(key)) {
                (Some(v), _) => v.parse(),
                (None, Some(v)) => v.parse(),
                (None, None) => {
                    defaulted.push(key);
                    Ok(Range {
                        start: 0.0,
                        end: 0.5,
                        steps: default_steps,
                    })
                }
            }
        };
        let g_range = range(&opts.g_range, "g-range")?;
        let f_range = range(&opts.f_range, "f-range")?;

        let out = opts
            .out
            .clone()
            .or_else(|| from_file("out").map(PathBuf::from));
        let quick = opts.quick
            || from_file("quick")
                .map(|v| parse_bool("quick", v))
                .transpose()?
                .unwrap_or(false);
        let branch = match (&opts.branch, from_file("branch")) {
            (Some(v), _) => v.parse()?,
            (None, Some(v)) => v.parse()?,
            (None, None) => Branch::default(),
        };

        let cfg = RunConfig {
            command,
            ns,
            g,
            f,
            g_range,
            f_range,
            omega_q,
            omega_r,
            kappa_ratio,
            gamma_prime_ratio,
            out,
            quick,
            theta_perturbation: opts.inject_theta.unwrap_or(0.0),
            solver: SolverConfig {
                branch,
                ..SolverConfig::default()
            },
            defaulted,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidParams(
                "n must be a list of positive integers".into(),
            ));
        }
        for (name, v) in [
            ("omega-q", self.omega_q),
            ("omega-r", self.omega_r),
            ("kappa-ratio", self.kappa_ratio),
            ("gamma-prime-ratio", self.gamma_prime_ratio),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.kappa_ratio < 0.0 || self.gamma_prime_ratio < 0.0 {
            return Err(Error::InvalidParams(
                "rate ratios must be non-negative".into(),
            ));
        }
        if self.omega_q == self.omega_r {
            return Err(Error::Resonant);
        }
        for (name, v) in [("g", self.g), ("f", self.f)] {
            if let Some(x) = v {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "{name} must be finite and >= 0"
                    )));
                }
            }
        }
        let single_n = matches!(
            self.command,
            Command::Sweep | Command::Spectrum | Command::Decay
        );
        if single_n && self.ns.len() != 1 {
            return Err(Error::InvalidParams(format!(
                "{} takes a single n",
                self.command.name()
            )));
        }
        if matches!(self.command, Command::Spectrum | Command::Decay) && self.ns[0] != 2 {
            return Err(Error::InvalidParams(format!(
                "{} is defined for n = 2",
                self.command.name()
            )));
        }
        if self.command == Command::Solve && (self.g.is_none() || self.f.is_none()) {
            return Err(Error::InvalidParams("solve needs --g and --f".into()));
        }
        Ok(())
    }

    fn delta(&self) -> f64 {
        self.omega_q - self.omega_r
    }

    /// Parameters at couplings given in units of |Δ|.
    pub fn params(&self, n: usize, g_over_delta: f64, f_over_delta: f64) -> SystemParams {
        let scale = self.delta().abs();
        SystemParams::new(n, g_over_delta * scale, f_over_delta * scale)
            .with_frequencies(self.omega_r, self.omega_q, self.omega_q)
            .with_rates(1.0, self.gamma_prime_ratio, self.kappa_ratio)
    }

    /// `#` metadata line echoing the configuration.
    pub fn header(&self) -> String {
        let ns: Vec<String> = self.ns.iter().map(usize::to_string).collect();
        let mut s = format!(
            "# qbridge {} command={} n={} omega_q={} omega_r={} kappa_ratio={} gamma_prime_ratio={} branch={}",
            env!("CARGO_PKG_VERSION"),
            self.command.name(),
            ns.join(","),
            self.omega_q,
            self.omega_r,
            self.kappa_ratio,
            self.gamma_prime_ratio,
            self.solver.branch,
        );
        match self.command {
            Command::Solve => {
                let _ = write!(
                    s,
                    " g={} f={}",
                    self.g.unwrap_or(f64::NAN),
                    self.f.unwrap_or(f64::NAN)
                );
            }
            Command::Sweep => {
                let _ = write!(s, " g_range={} f_range={}", self.g_range, self.f_range);
            }
            Command::Verify => {
                let _ = write!(s, " quick={}", self.quick);
            }
            _ => {
                let _ = write!(s, " g_range={} (g=f)", self.g_range);
            }
        }
        let _ = write!(s, " units=delta bridge=tuned_to_solved_delta_prime");
        if !self.defaulted.is_empty() {
            let _ = write!(s, " assumed_defaults={}", self.defaulted.join(","));
        }
        s
    }
}

/// Fixed-width scientific formatting with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn row(values: &[f64]) -> String {
    values
        .iter()
        .map(|&x| fmt_float(x))
        .collect::<Vec<_>>()
        .join(",")
}

/// Output of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub failures: usize,
    /// Lines for stderr.
    pub diagnostics: Vec<String>,
}

fn sweep_points<T: Send, F>(points: &[Point], cfg: &RunConfig, f: F) -> Vec<Result<T>>
where
    F: Fn(&Analysis) -> Result<T> + Sync,
{
    points
        .par_iter()
        .map(|&(n, g, ff)| analyze(&cfg.params(n, g, ff), &cfg.solver).and_then(|a| f(&a)))
        .collect()
}

fn collect_rows<T>(
    keys: &[Vec<f64>],
    results: Vec<Result<T>>,
    width: usize,
    values: impl Fn(&T) -> Vec<f64>,
    diagnostics: &mut Vec<String>,
) -> (Vec<String>, usize) {
    let mut failures = 0;
    let rows = keys
        .iter()
        .zip(results)
        .map(|(key, r)| {
            let mut v = key.clone();
            match r {
                Ok(t) => v.extend(values(&t)),
                Err(e) => {
                    failures += 1;
                    diagnostics.push(format!("point {key:?}: {e}"));
                    v.extend(std::iter::repeat_n(f64::NAN, width));
                }
            }
            row(&v)
        })
        .collect();
    (rows, failures)
}

fn cmd_solve(cfg: &RunConfig) -> Report {
    let (g, f) = (cfg.g.unwrap_or(0.0), cfg.f.unwrap_or(0.0));
    let mut text = cfg.header();
    text.push('\n');
    let mut failures = 0;
    let mut diagnostics = Vec::new();
    let delta = cfg.delta();
    for &n in &cfg.ns {
        match analyze(&cfg.params(n, g, f), &cfg.solver) {
            Ok(a) => {
                let m = &a.model;
                let s = &a.solution;
                let fields: Vec<(&str, String)> = vec![
                    ("n", n.to_string()),
                    ("phi", fmt_float(a.angles.phi)),
                    ("theta", fmt_float(a.angles.theta)),
                    ("q", fmt_float(a.angles.q())),
                    (
                        "delta_prime_over_delta",
                        fmt_float(a.angles.delta_prime / delta),
                    ),
                    (
                        "delta_prime_indeterminate",
                        s.delta_prime_indeterminate.to_string(),
                    ),
                    ("eta", fmt_float(m.eta)),
                    ("e_q", fmt_float(m.e_q)),
                    ("e_a", fmt_float(m.e_a)),
                    ("j_q", fmt_float(m.j_q)),
                    ("j_a", fmt_float(m.j_a)),
                    ("J_n", fmt_float(m.j_n)),
                    ("eps_nq", fmt_float(m.eps_nq)),
                    ("eps_na", fmt_float(m.eps_na)),
                    ("omega_q_eff", fmt_float(m.omega_q_eff.unwrap_or(f64::NAN))),
                    ("omega_a_eff", fmt_float(m.omega_a_eff.unwrap_or(f64::NAN))),
                    ("residual", fmt_float(s.residual)),
                    ("condition_residual", fmt_float(s.condition_residual)),
                    ("branch", s.branch.to_string()),
                    ("method", s.method.name().to_string()),
                    ("root_sign", m.root_sign.symbol().to_string()),
                    (
                        "closed_form_deviation",
                        m.closed_form_deviation
                            .map_or("unchecked".to_string(), fmt_float),
                    ),
                ];
                for (k, v) in fields {
                    let _ = writeln!(text, "{k}: {v}");
                }
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(text, "n: {n}\nerror: {e}");
                diagnostics.push(format!("n={n}: {e}"));
            }
        }
    }
    Report {
        text,
        failures,
        diagnostics,
    }
}

fn cmd_sweep(cfg: &RunConfig) -> Report {
    let n = cfg.ns[0];
    let mut keys = Vec::new();
    let mut points = Vec::new();
    for g in cfg.g_range.values() {
        for f in cfg.f_range.values() {
            keys.push(vec![g, f]);
            points.push((n, g, f));
        }
    }
    let delta = cfg.delta();
    let results = sweep_points(&points, cfg, |a| {
        Ok([
            a.angles.phi,
            a.angles.theta,
            a.angles.delta_prime / delta,
            a.model.j_q,
            a.model.j_a,
            a.model.j_n,
            a.solution.residual,
        ])
    });
    let mut diagnostics = Vec::new();
    let (rows, failures) = collect_rows(&keys, results, 7, |v| v.to_vec(), &mut diagnostics);
    csv_report(
        cfg,
        "g_over_delta,f_over_delta,phi,theta,delta_prime_over_delta,j_q,j_a,J_n,residual",
        rows,
        failures,
        diagnostics,
    )
}

fn csv_report(
    cfg: &RunConfig,
    columns: &str,
    rows: Vec<String>,
    failures: usize,
    diagnostics: Vec<String>,
) -> Report {
    let mut text = cfg.header();
    text.push('\n');
    text.push_str(columns);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    Report {
        text,
        failures,
        diagnostics,
    }
}

type Point = (usize, f64, f64);

fn diagonal_points(cfg: &RunConfig, n: usize) -> (Vec<Vec<f64>>, Vec<Point>) {
    let gs = cfg.g_range.values();
    (
        gs.iter().map(|&g| vec![g]).collect(),
        gs.iter().map(|&g| (n, g, g)).collect(),
    )
}

fn cmd_spectrum(cfg: &RunConfig) -> Report {
    let (keys, points) = diagonal_points(cfg, 2);
    let results = sweep_points(&points, cfg, |a| {
        let s = labeled_spectrum(&a.params, &a.angles)?;
        let get = |l| s.energy(l).unwrap_or(f64::NAN);
        Ok([
            get(SpectrumLabel::Resonator(1)),
            get(SpectrumLabel::Resonator(2)),
            get(SpectrumLabel::Qubit(1)),
            get(SpectrumLabel::Qubit(2)),
            get(SpectrumLabel::Bridge),
            a.model.j_n,
        ])
    });
    let mut diagnostics = Vec::new();
    let (rows, failures) = collect_rows(&keys, results, 6, |v| v.to_vec(), &mut diagnostics);
    csv_report(
        cfg,
        "g_over_delta,eps_r1,eps_r2,eps_q1,eps_q2,eps_a,J2",
        rows,
        failures,
        diagnostics,
    )
}

fn cmd_fidelity(cfg: &RunConfig) -> Report {
    let mut keys = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.ns {
        let (k, p) = diagonal_points(cfg, n);
        keys.extend(k.into_iter().map(|mut v| {
            v.insert(0, n as f64);
            v
        }));
        points.extend(p);
    }
    let results = sweep_points(&points, cfg, |a| Ok(w_decomposition(&a.angles)?.fidelity));
    let mut diagnostics = Vec::new();
    let mut failures = 0;
    let rows = keys
        .iter()
        .zip(results)
        .map(|(key, r)| {
            let fid = match r {
                Ok(v) => fmt_float(v),
                Err(e) => {
                    failures += 1;
                    diagnostics.push(format!("n={} g={}: {e}", key[0], key[1]));
                    "nan".to_string()
                }
            };
            format!("{},{},{fid}", key[0] as usize, fmt_float(key[1]))
        })
        .collect();
    csv_report(cfg, "n,g_over_delta,fidelity", rows, failures, diagnostics)
}

fn cmd_decay(cfg: &RunConfig) -> Report {
    let (keys, points) = diagonal_points(cfg, 2);
    let results = sweep_points(&points, cfg, |a| {
        let (ground, _) = hybrid_eigenstates(&a.angles)?;
        let rates = RelaxationRates::of(&a.params);
        let r = decay_rates(&ground, a.angles.phi, &rates)?;
        Ok([r.gamma_g / rates.gamma, r.gamma_e / rates.gamma])
    });
    let mut diagnostics = Vec::new();
    let (rows, failures) = collect_rows(&keys, results, 2, |v| v.to_vec(), &mut diagnostics);
    csv_report(
        cfg,
        "g_over_delta,Gamma_g_over_gamma,Gamma_e_over_gamma",
        rows,
        failures,
        diagnostics,
    )
}

fn cmd_verify(cfg: &RunConfig) -> Report {
    let results = run_suite(&VerifyOptions {
        quick: cfg.quick,
        theta_perturbation: cfg.theta_perturbation,
        solver: cfg.solver,
    });
    let mut text = cfg.header();
    text.push_str("\nproperty,max_deviation,tolerance,status\n");
    let mut failures = 0;
    for r in &results {
        if !r.passed() {
            failures += 1;
        }
        let _ = writeln!(text, "{r}");
    }
    Report {
        text,
        failures,
        diagnostics: Vec::new(),
    }
}

/// Runs a resolved configuration.
pub fn execute(cfg: &RunConfig) -> Report {
    match cfg.command {
        Command::Solve => cmd_solve(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Fidelity => cmd_fidelity(cfg),
        Command::Decay => cmd_decay(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

/// Entry point shared by the binary and the tests. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    let cfg = match RunConfig::resolve(cli.command, &cli.opts) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let report = execute(&cfg);
    for d in &report.diagnostics {
        let _ = writeln!(stderr, "{d}");
    }
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &report.text) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        }
        None => {
            let _ = stdout.write_all(report.text.as_bytes());
        }
    }
    if report.failures > 0 {
        let _ = writeln!(stderr, "{} failure(s)", report.failures);
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["qbridge"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    fn field(report: &str, key: &str) -> String {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key}: ")))
            .unwrap_or_else(|| panic!("missing {key}"))
            .to_string()
    }

    #[test]
    fn range_parsing() {
        let r: Range = "0:0.5:11".parse().unwrap();
        assert_eq!(r.values().len(), 11);
        assert_eq!(r.values()[10], 0.5);
        assert!("0:0.5:1".parse::<Range>().is_err());
        assert!("0.5:0:3".parse::<Range>().is_err());
        assert!("0:1".parse::<Range>().is_err());
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn config_file_parsing() {
        let m = parse_config_file("# comment\nn = 3\nkappa_ratio=10 # inline\n\n").unwrap();
        assert_eq!(m["n"], "3");
        assert_eq!(m["kappa-ratio"], "10");
        assert!(parse_config_file("bogus=1").is_err());
        assert!(parse_config_file("n").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "g=0.1\nf=0.2\nkappa-ratio=7\n").unwrap();
        let opts = Options {
            g: Some(0.3),
            config: Some(path),
            ..Options::default()
        };
        let cfg = RunConfig::resolve(Command::Solve, &opts).unwrap();
        assert_eq!(cfg.g, Some(0.3));
        assert_eq!(cfg.f, Some(0.2));
        assert_eq!(cfg.kappa_ratio, 7.0);
    }

    #[test]
    fn solve_reports_small_residual() {
        let (code, out, _) = run_capture(&["solve", "--n", "2", "--g", "0.3", "--f", "0.3"]);
        assert_eq!(code, 0);
        let res: f64 = field(&out, "residual").parse().unwrap();
        assert!(res < 1e-9);
    }

    #[test]
    fn solve_decoupled_bridge() {
        let (code, out, _) = run_capture(&["solve", "--n", "2", "--g", "0.3", "--f", "0"]);
        assert_eq!(code, 0);
        assert_eq!(field(&out, "J_n").parse::<f64>().unwrap(), 0.0);
        assert_eq!(field(&out, "delta_prime_indeterminate"), "true");

        let (_, out, _) = run_capture(&["solve", "--g", "0", "--f", "0"]);
        for key in ["phi", "theta", "j_q", "j_a", "J_n"] {
            assert_eq!(field(&out, key).parse::<f64>().unwrap(), 0.0, "{key}");
        }
    }

    #[test]
    fn invalid_config_exits_with_two() {
        assert_eq!(run_capture(&["solve", "--g", "0.1"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["sweep", "--g-range", "0:1:1"]).0, EXIT_CONFIG);
        assert_eq!(run_capture(&["spectrum", "--n", "3"]).0, EXIT_CONFIG);
        assert_eq!(
            run_capture(&["solve", "--g", "0.1", "--f", "0.1", "--omega-q", "4"]).0,
            EXIT_CONFIG
        );
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_CONFIG);
        assert_eq!(
            run_capture(&["solve", "--g", "0.1", "--f", "0.1", "--branch", "x"]).0,
            EXIT_CONFIG
        );
    }

    #[test]
    fn sweep_is_deterministic_and_well_formed() {
        let args = ["sweep", "--g-range", "0:0.5:4", "--f-range", "0:0.5:3"];
        let (code, a, _) = run_capture(&args);
        let (_, b, _) = run_capture(&args);
        assert_eq!(code, 0);
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert!(lines[0].starts_with("# qbridge"));
        assert_eq!(
            lines[1],
            "g_over_delta,f_over_delta,phi,theta,delta_prime_over_delta,j_q,j_a,J_n,residual"
        );
        assert_eq!(lines.len(), 2 + 12);
        let first: Vec<f64> = lines[2].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first[7], 0.0);
        let second: Vec<f64> = lines[3].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!((second[0], second[1]), (0.0, 0.25));
    }

    #[test]
    fn spectrum_degenerate_at_zero_coupling() {
        let (code, out, _) = run_capture(&["spectrum", "--g-range", "0:0.2:3"]);
        assert_eq!(code, 0);
        let row: Vec<f64> = out
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(row[4] - row[3], 0.0);
    }

    #[test]
    fn fidelity_and_decay_outputs() {
        let (code, out, _) = run_capture(&["fidelity", "--g-range", "0:0.2:3"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[1], "n,g_over_delta,fidelity");
        assert_eq!(lines.len(), 2 + 9);
        assert!(lines[2].starts_with("3,"));

        let (code, out, _) = run_capture(&["decay", "--g-range", "0:0.2:3"]);
        assert_eq!(code, 0);
        let row: Vec<f64> = out
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(row[2], 1.0);
    }

    #[test]
    fn verify_quick_and_injected() {
        let (code, out, _) = run_capture(&["verify", "--quick"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.lines().skip(2).all(|l| l.ends_with("PASS")));
        let (code, out, _) = run_capture(&["verify", "--quick", "--inject-theta", "0.01"]);
        assert_eq!(code, EXIT_PARTIAL);
        assert!(out
            .lines()
            .any(|l| l.starts_with("block_parity_residual") && l.ends_with("FAIL")));
    }

    #[test]
    fn out_flag_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let p = path.to_str().unwrap();
        let (code, out, _) = run_capture(&["decay", "--g-range", "0:0.1:2", "--out", p]);
        assert_eq!(code, 0);
        assert!(out.is_empty());
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .contains("Gamma_g_over_gamma"));
    }
}
