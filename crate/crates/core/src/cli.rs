//! Command-line front end: config resolution, experiment dispatch and output.
//!
//! Every command writes its files into `--out` together with a
//! `<command>_manifest.json`. CSV floats use 17 significant digits, so a file
//! produced from the same config and seed is byte-identical across runs and
//! worker counts.

mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use config::{parse_config, AnalysisConfig, ParameterSet, Responsivity, RunConfig, SensingConfig};

use crate::coupler::flux_responsivity;
use crate::error::{Error, Result};
use crate::experiments::{
    fit_xi_points, measure_gamma_eff_auto, plus_amplitudes, run_cycles, threshold_map, unencoded_ramsey,
    unencoded_reference, ExperimentConfig, Mode, TimeSeries, XiPoint,
};
use crate::qstate::c;
use crate::sensing::{optimal_time, sensitivity, SensitivityInputs};

#[derive(Debug, Parser)]
#[command(name = "qecmag", version, about = "QEC-protected magnetometer simulator")]
pub struct Cli {
    /// Configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Trajectory count per parameter set.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Worker threads for trajectory mode.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Deterministic,
    Trajectory,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Logical fidelity of |+bar> under damping and correction.
    Fidelity,
    /// Ramsey fringes of |0bar> under the signal.
    Ramsey,
    /// Gamma_eff over the tau_ec x p_gate grid and the xi fit.
    GammaEff,
    /// Field resolution from a rate and a responsivity.
    Sensitivity,
    /// Encoded-vs-bare verdict over the tau_ec x p_gate grid.
    Threshold,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fidelity => "fidelity",
            Command::Ramsey => "ramsey",
            Command::GammaEff => "gamma_eff",
            Command::Sensitivity => "sensitivity",
            Command::Threshold => "threshold",
        }
    }
}

/// Record of one invocation, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    /// Output file names relative to the output directory.
    pub outputs: Vec<String>,
    /// Parameter set behind each per-set output, in output order.
    pub parameter_sets: Vec<ParameterSet>,
    pub warnings: Vec<String>,
    pub duration_seconds: f64,
}

/// Process exit code for an error: 2 for bad input, 3 for numerical failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Argument(_) => 2,
        Error::Numerical(_) | Error::Fit(_) | Error::Contract(_) => 3,
        Error::Io(_) => 1,
    }
}

/// Reads the config file (if any) and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    let e = &mut cfg.experiment;
    if let Some(s) = cli.seed {
        e.seed = s;
    }
    if let Some(m) = cli.mode {
        e.mode = match m {
            ModeArg::Deterministic => Mode::Deterministic,
            ModeArg::Trajectory => Mode::Trajectory,
        };
    }
    if let Some(n) = cli.runs {
        e.n_runs = n;
    }
    if let Some(w) = cli.workers {
        e.workers = Some(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
    sets: Vec<ParameterSet>,
    warnings: Vec<String>,
}

impl Output<'_> {
    fn write(&mut self, name: String, body: String) -> Result<()> {
        std::fs::write(self.dir.join(&name), body).map_err(|e| Error::Io(format!("{name}: {e}")))?;
        self.files.push(name);
        Ok(())
    }

    fn csv(&mut self, name: String, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut body = header.join(",");
        body.push('\n');
        for row in rows {
            body.push_str(&row.join(","));
            body.push('\n');
        }
        self.write(name, body)
    }

    fn series(&mut self, name: String, value_name: &str, s: &TimeSeries, mode: Option<&str>) -> Result<()> {
        let mut header = vec!["time", value_name, "stderr"];
        header.extend(mode.map(|_| "mode"));
        let rows = (0..s.len()).map(|i| {
            let mut row =
                vec![fmt_float(s.times[i]), fmt_float(s.values[i]), fmt_float(s.stderr.get(i).copied().unwrap_or(0.0))];
            row.extend(mode.map(str::to_owned));
            row
        });
        self.csv(name, &header, rows)
    }

    fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Deterministic => "deterministic",
        Mode::Trajectory => "trajectory",
    }
}

/// Runs one command and writes its outputs and manifest.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    let start = Instant::now();
    let cfg = resolve_config(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io(format!("{}: {e}", cli.out.display())))?;
    let mut out = Output { dir: &cli.out, files: Vec::new(), sets: Vec::new(), warnings: Vec::new() };
    match cli.command {
        Command::Fidelity => fidelity(&cfg, &mut out)?,
        Command::Ramsey => ramsey(&cfg, &mut out)?,
        Command::GammaEff => gamma_eff(&cfg, &mut out)?,
        Command::Sensitivity => sensitivity_record(&cfg, &mut out)?,
        Command::Threshold => threshold(&cfg, &mut out)?,
    }
    let name = cli.command.name();
    let mut manifest = RunManifest {
        command: name.to_owned(),
        seed: cfg.experiment.seed,
        config: cfg,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        outputs: out.files,
        parameter_sets: out.sets,
        warnings: out.warnings,
        duration_seconds: 0.0,
    };
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    let path = cli.out.join(format!("{name}_manifest.json"));
    std::fs::write(&path, json + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

fn fidelity(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (a, b) = plus_amplitudes();
    for (i, set) in cfg.parameter_sets().iter().enumerate() {
        let e = cfg.experiment_for(set);
        let s = run_cycles(&e, a, b, false)?;
        out.series(format!("fidelity_{i:03}.csv"), "fidelity", &s, Some(mode_name(e.mode)))?;
        let bare = unencoded_reference(e.gamma, &s.times)?;
        out.series(format!("fidelity_{i:03}_unencoded.csv"), "fidelity", &bare, Some("unencoded"))?;
        out.sets.push(*set);
    }
    Ok(())
}

fn ramsey(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    for (i, set) in cfg.parameter_sets().iter().enumerate() {
        let e = cfg.experiment_for(set);
        let s = run_cycles(&e, c(1.0), c(0.0), true)?;
        out.series(format!("ramsey_{i:03}.csv"), "population", &s, None)?;
        let bare = unencoded_ramsey(e.gamma, e.g_s, &s.times)?;
        out.series(format!("ramsey_{i:03}_unencoded.csv"), "population", &bare, None)?;
        out.sets.push(*set);
    }
    Ok(())
}

#[derive(Serialize)]
struct XiRecord {
    xi: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    intercept: Option<f64>,
    relative_residual: Option<f64>,
    points: usize,
    warning: Option<String>,
}

fn gamma_eff(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let base = ExperimentTemplate::new(cfg);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &tau in &cfg.tau_ec {
        for &p in &cfg.p_gate {
            let e = base.at(tau, p);
            match measure_gamma_eff_auto(&e, cfg.analysis.xi_guess, cfg.analysis.max_rounds) {
                Ok(f) => {
                    points.push(XiPoint { p_gate: p, tau_ec: tau, gamma_eff: f.gamma_eff });
                    rows.push(vec![
                        fmt_float(tau),
                        fmt_float(p),
                        fmt_float(f.gamma_eff),
                        fmt_float(f.ci.0),
                        fmt_float(f.ci.1),
                        "ok".into(),
                    ]);
                }
                Err(Error::Fit(msg)) => {
                    out.warn(format!("fit failed at tau_ec={tau:e}, p_gate={p:e}: {msg}"));
                    let nan = fmt_float(f64::NAN);
                    rows.push(vec![fmt_float(tau), fmt_float(p), nan.clone(), nan.clone(), nan, "fit_failed".into()]);
                }
                Err(e) => return Err(e),
            }
        }
    }
    out.csv("gamma_eff.csv".into(), &["tau_ec", "p_gate", "gamma_eff", "ci_lo", "ci_hi", "status"], rows)?;
    let n = points.len();
    let record = match fit_xi_points(cfg.experiment.gamma, points) {
        Ok(x) => {
            if let Some(w) = &x.warning {
                out.warn(w.clone());
            }
            XiRecord {
                xi: Some(x.xi),
                ci_lo: Some(x.ci.0),
                ci_hi: Some(x.ci.1),
                intercept: Some(x.intercept),
                relative_residual: Some(x.relative_residual),
                points: n,
                warning: x.warning,
            }
        }
        Err(err) => {
            let msg = format!("xi not fitted: {err}");
            out.warn(msg.clone());
            XiRecord {
                xi: None,
                ci_lo: None,
                ci_hi: None,
                intercept: None,
                relative_residual: None,
                points: n,
                warning: Some(msg),
            }
        }
    };
    let line = serde_json::to_string(&record).map_err(|e| Error::Io(e.to_string()))?;
    out.write("gamma_eff_xi.jsonl".into(), line + "\n")
}

/// Deterministic copy of the experiment template for grid commands.
struct ExperimentTemplate(ExperimentConfig);

impl ExperimentTemplate {
    fn new(cfg: &RunConfig) -> Self {
        Self(ExperimentConfig { mode: Mode::Deterministic, ..cfg.experiment.clone() })
    }

    fn at(&self, tau_ec: f64, p_gate: f64) -> ExperimentConfig {
        ExperimentConfig { tau_ec, p_gate, ..self.0.clone() }
    }
}

fn threshold(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let base = ExperimentTemplate::new(cfg);
    let map = threshold_map(&base.0, &cfg.tau_ec, &cfg.p_gate, cfg.analysis.xi_guess)?;
    let mut rows = Vec::new();
    for row in &map.cells {
        for (j, cell) in row.iter().enumerate() {
            // boundary lies between this cell and the next larger p_gate
            let boundary = row.get(j + 1).is_some_and(|next| next.better != cell.better);
            rows.push(vec![
                fmt_float(cell.tau_ec),
                fmt_float(cell.p_gate),
                if cell.better { "better" } else { "worse" }.into(),
                fmt_float(cell.gamma_eff),
                u8::from(boundary).to_string(),
            ]);
        }
    }
    out.csv("threshold.csv".into(), &["tau_ec", "p_gate", "verdict", "gamma_eff", "boundary"], rows)?;
    let opt = |v: Option<f64>| fmt_float(v.unwrap_or(f64::NAN));
    let rows = map.boundary.iter().map(|b| vec![fmt_float(b.tau_ec), opt(b.simulated), opt(b.analytic)]);
    out.csv("threshold_boundary.csv".into(), &["tau_ec", "p_gate_simulated", "p_gate_analytic"], rows)
}

#[derive(Serialize)]
struct SensitivityRecord {
    delta_b: Option<f64>,
    delta_b_pt: Option<f64>,
    flagged: bool,
    flag: Option<String>,
    t_star: Option<f64>,
    t_star_numeric: Option<f64>,
    gamma_eff: f64,
    gamma_eff_source: &'static str,
    responsivity: f64,
    responsivity_source: &'static str,
    total_time: f64,
}

fn sensitivity_record(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (responsivity, responsivity_source) = match cfg.sensing.responsivity {
        Some(Responsivity::Value(r)) => (r, "config"),
        Some(Responsivity::Coupler) => {
            let c = cfg
                .coupler
                .as_ref()
                .ok_or_else(|| Error::Config { line: 0, message: "no [coupler] section".into() })?;
            (flux_responsivity(c)?, "coupler")
        }
        None => {
            return Err(Error::Config { line: 0, message: "sensitivity needs 'responsivity' in [sensing]".into() });
        }
    };
    let (gamma_eff, gamma_eff_source) = match cfg.sensing.gamma_eff {
        Some(g) => (g, "config"),
        None => (cfg.rate_law_gamma_eff(), "rate_law"),
    };
    let total_time = cfg.sensing.total_time.unwrap_or(cfg.experiment.total_time);
    let inputs = SensitivityInputs::new(gamma_eff, responsivity, total_time)
        .map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
    let report = sensitivity(&inputs);
    let t = (gamma_eff > 0.0).then(|| optimal_time(gamma_eff)).transpose()?;
    let flag = if report.infinite {
        Some("zero responsivity: no field can be resolved".to_owned())
    } else if gamma_eff == 0.0 {
        Some("zero decoherence rate: optimal time is unbounded".to_owned())
    } else {
        None
    };
    if let Some(f) = &flag {
        out.warn(f.clone());
    }
    let record = SensitivityRecord {
        delta_b: report.delta_b.is_finite().then_some(report.delta_b),
        delta_b_pt: report.delta_b_pt.is_finite().then_some(report.delta_b_pt),
        flagged: flag.is_some(),
        flag,
        t_star: t.map(|o| o.closed_form),
        t_star_numeric: t.map(|o| o.numeric),
        gamma_eff,
        gamma_eff_source,
        responsivity,
        responsivity_source,
        total_time,
    };
    let line = serde_json::to_string(&record).map_err(|e| Error::Io(e.to_string()))?;
    out.write("sensitivity.jsonl".into(), line + "\n")
}
