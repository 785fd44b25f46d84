//! Run configuration text format.
//!
//! ```text
//! # comment
//! [experiment]
//! gamma = 1e4 /s
//! tau_ec = 0.01, 0.05 /gamma
//! p_gate = 0.01 %
//! g_s = 10 gamma
//! ```
//!
//! Lists are comma separated and share one trailing unit. Times take `/gamma`,
//! `s`, `ms`, `us` or `ns`; rates take `gamma`, `/s`, `/ms` or `/us`; gate
//! error probabilities are bare or `%`. `gamma` itself is a rate in 1/s and may
//! be bare. Coupler frequencies are angular `MHz`, the loop area `um2`, the flux
//! responsivity `MHz/Phi0` and the field responsivity `MHz/T`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coupler::{CouplerParams, GammaRates};
use crate::error::{Error, Result};
use crate::experiments::{relaxation_bound, AbortPolicy, ExperimentConfig, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Responsivity {
    /// `|dg_s/dB|` in MHz/T.
    Value(f64),
    /// Derived from the `[coupler]` section.
    Coupler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Gate-error coefficient used to size runs and for the analytic threshold.
    pub xi_guess: f64,
    pub max_rounds: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { xi_guess: 8.4, max_rounds: 4000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    /// 1/s; falls back to the rate law on the first parameter set.
    pub gamma_eff: Option<f64>,
    /// Seconds; falls back to the experiment's total time.
    pub total_time: Option<f64>,
    pub responsivity: Option<Responsivity>,
}

/// Fully resolved configuration, all quantities in SI or in the units of
/// the coupler module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// First value of every list; the template for each parameter set.
    pub experiment: ExperimentConfig,
    pub tau_ec: Vec<f64>,
    pub p_gate: Vec<f64>,
    pub g_s: Vec<f64>,
    /// Coupler parameters when a `[coupler]` section is present.
    pub coupler: Option<CouplerParams>,
    pub include_correction: bool,
    pub analysis: AnalysisConfig,
    pub sensing: SensingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let experiment = ExperimentConfig::default();
        Self {
            tau_ec: vec![experiment.tau_ec],
            p_gate: vec![experiment.p_gate],
            g_s: vec![experiment.g_s],
            experiment,
            coupler: None,
            include_correction: false,
            analysis: AnalysisConfig::default(),
            sensing: SensingConfig::default(),
        }
    }
}

/// One entry of the cartesian product `tau_ec x p_gate x g_s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub tau_ec: f64,
    pub p_gate: f64,
    pub g_s: f64,
}

impl RunConfig {
    pub fn parameter_sets(&self) -> Vec<ParameterSet> {
        let mut out = Vec::new();
        for &tau_ec in &self.tau_ec {
            for &p_gate in &self.p_gate {
                for &g_s in &self.g_s {
                    out.push(ParameterSet { tau_ec, p_gate, g_s });
                }
            }
        }
        out
    }

    pub fn experiment_for(&self, set: &ParameterSet) -> ExperimentConfig {
        ExperimentConfig { tau_ec: set.tau_ec, p_gate: set.p_gate, g_s: set.g_s, ..self.experiment.clone() }
    }

    /// Validates every parameter set; domain errors are reported as config errors.
    pub fn validate(&self) -> Result<()> {
        for set in self.parameter_sets() {
            self.experiment_for(&set).validate().map_err(|e| config_error(0, e.to_string()))?;
        }
        if let Some(c) = &self.coupler {
            c.validate().map_err(|e| config_error(0, e.to_string()))?;
        }
        if !(self.analysis.xi_guess > 0.0) || self.analysis.max_rounds < 40 {
            return Err(config_error(0, "xi_guess must be positive and max_rounds at least 40"));
        }
        Ok(())
    }

    /// Rate-law estimate `4 gamma^2 tau + xi p / tau` for the first parameter set.
    pub fn rate_law_gamma_eff(&self) -> f64 {
        let e = &self.experiment;
        relaxation_bound(e.gamma, e.tau_ec) + self.analysis.xi_guess * e.p_gate / e.tau_ec
    }

    /// Renders the configuration back to text in absolute units.
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ");
        let mut s = String::from("[experiment]\n");
        let _ = writeln!(s, "gamma = {:e} /s", e.gamma);
        let _ = writeln!(s, "tau_ec = {} s", list(&self.tau_ec));
        let _ = writeln!(s, "p_gate = {}", list(&self.p_gate));
        let _ = writeln!(s, "g_s = {} /s", list(&self.g_s));
        let _ = writeln!(s, "total_time = {:e} s", e.total_time);
        let _ = writeln!(s, "n_runs = {}", e.n_runs);
        let _ = writeln!(s, "seed = {}", e.seed);
        let _ = writeln!(s, "mode = {}", enum_name(&e.mode));
        let _ = writeln!(s, "abort_policy = {}", enum_name(&e.abort_policy));
        let _ = writeln!(s, "delta_p = {:e}", e.delta_p);
        let _ = writeln!(s, "substeps = {}", e.substeps);
        if let Some(w) = e.workers {
            let _ = writeln!(s, "workers = {w}");
        }
        if let Some(c) = &self.coupler {
            s.push_str("\n[coupler]\n");
            let _ = writeln!(s, "g_prime = {:e} MHz", c.g_prime);
            let _ = writeln!(s, "delta = {:e} MHz", c.delta);
            let _ = writeln!(s, "alpha = {:e} MHz", c.alpha);
            let _ = writeln!(s, "g_s = {:e} MHz", c.g_s);
            let _ = writeln!(s, "dgs_dphi = {:e} MHz/Phi0", c.dgs_dphi);
            let _ = writeln!(s, "area = {:e} um2", c.area);
            let _ = writeln!(s, "gamma_down = {:e} /s", c.gamma_rates.down);
            let _ = writeln!(s, "gamma_zero = {:e} /s", c.gamma_rates.zero);
            let _ = writeln!(s, "gamma_up = {:e} /s", c.gamma_rates.up);
            let _ = writeln!(s, "hybridization_ratio = {:e}", c.hybridization_ratio);
            let _ = writeln!(s, "include_correction = {}", self.include_correction);
        }
        s.push_str("\n[analysis]\n");
        let _ = writeln!(s, "xi_guess = {:e}", self.analysis.xi_guess);
        let _ = writeln!(s, "max_rounds = {}", self.analysis.max_rounds);
        let sens = &self.sensing;
        if sens.gamma_eff.is_some() || sens.total_time.is_some() || sens.responsivity.is_some() {
            s.push_str("\n[sensing]\n");
            if let Some(g) = sens.gamma_eff {
                let _ = writeln!(s, "gamma_eff = {g:e} /s");
            }
            if let Some(t) = sens.total_time {
                let _ = writeln!(s, "total_time = {t:e} s");
            }
            match sens.responsivity {
                Some(Responsivity::Value(r)) => {
                    let _ = writeln!(s, "responsivity = {r:e} MHz/T");
                }
                Some(Responsivity::Coupler) => s.push_str("responsivity = coupler\n"),
                None => {}
            }
        }
        s
    }
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_owned)).unwrap_or_default()
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

struct Entry {
    line: usize,
    numbers: String,
    unit: Option<String>,
    raw: String,
}

impl Entry {
    fn err(&self, message: impl Into<String>) -> Error {
        config_error(self.line, message)
    }

    fn values(&self) -> Result<Vec<f64>> {
        self.numbers
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("expected a finite number, got '{t}'")))
            })
            .collect()
    }

    fn scaled(&self, units: &[(&str, f64)], bare: Option<f64>) -> Result<Vec<f64>> {
        let factor = match &self.unit {
            None => bare.ok_or_else(|| {
                let names: Vec<_> = units.iter().map(|u| u.0).collect();
                self.err(format!("missing unit suffix (one of {})", names.join(", ")))
            })?,
            Some(u) => units
                .iter()
                .find(|(n, _)| n == u)
                .map(|(_, f)| *f)
                .ok_or_else(|| self.err(format!("unknown unit '{u}'")))?,
        };
        Ok(self.values()?.into_iter().map(|v| v * factor).collect())
    }

    fn scalar(&self, units: &[(&str, f64)], bare: Option<f64>) -> Result<f64> {
        match self.scaled(units, bare)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(self.err("expected a single value")),
        }
    }

    fn integer<T: std::str::FromStr>(&self) -> Result<T> {
        self.raw.parse().map_err(|_| self.err(format!("expected a non-negative integer, got '{}'", self.raw)))
    }

    fn word(&self) -> &str {
        &self.raw
    }
}

fn split_unit(value: &str) -> (String, Option<String>) {
    match value.rsplit_once(char::is_whitespace) {
        Some((head, tail)) if tail.parse::<f64>().is_err() && !tail.ends_with(',') => {
            (head.trim().to_owned(), Some(tail.to_owned()))
        }
        _ => (value.to_owned(), None),
    }
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "experiment",
        &[
            "gamma",
            "tau_ec",
            "p_gate",
            "g_s",
            "total_time",
            "n_runs",
            "seed",
            "mode",
            "abort_policy",
            "delta_p",
            "substeps",
            "workers",
        ],
    ),
    (
        "coupler",
        &[
            "g_prime",
            "delta",
            "alpha",
            "g_s",
            "dgs_dphi",
            "area",
            "gamma_down",
            "gamma_zero",
            "gamma_up",
            "hybridization_ratio",
            "include_correction",
        ],
    ),
    ("analysis", &["xi_guess", "max_rounds"]),
    ("sensing", &["gamma_eff", "total_time", "responsivity"]),
];

fn lex(text: &str) -> Result<BTreeMap<(String, String), Entry>> {
    let mut section = String::from("experiment");
    let mut entries = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| config_error(line, "unterminated section header"))?.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(config_error(line, format!("unknown section [{name}]")));
            }
            section = name.to_owned();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_error(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS.iter().find(|(s, _)| *s == section).map(|(_, k)| k.contains(&key)).unwrap_or(false);
        if !known {
            return Err(config_error(line, format!("unknown key '{key}' in [{section}]")));
        }
        if value.is_empty() {
            return Err(config_error(line, format!("missing value for '{key}'")));
        }
        let (numbers, unit) = split_unit(value);
        let entry = Entry { line, numbers, unit, raw: value.to_owned() };
        if entries.insert((section.clone(), key.to_owned()), entry).is_some() {
            return Err(config_error(line, format!("duplicate key '{key}' in [{section}]")));
        }
    }
    Ok(entries)
}

/// Parses configuration text; errors carry the offending line number.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = lex(text)?;
    let get = |s: &str, k: &str| entries.get(&(s.to_owned(), k.to_owned()));
    let mut cfg = RunConfig::default();
    let e = &mut cfg.experiment;

    if let Some(en) = get("experiment", "gamma") {
        e.gamma = en.scalar(&[("/s", 1.0), ("/ms", 1e3), ("/us", 1e6)], Some(1.0))?;
        if !(e.gamma >= 0.0) || !e.gamma.is_finite() {
            return Err(en.err("gamma must be finite and non-negative"));
        }
    }
    let gamma = e.gamma;
    // units relative to gamma are unavailable without damping
    let relative = usize::from(gamma == 0.0);
    let times = &[("/gamma", 1.0 / gamma), ("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)][relative..];
    let rates = &[("gamma", gamma), ("/s", 1.0), ("/ms", 1e3), ("/us", 1e6)][relative..];
    let probability = [("%", 1e-2)];
    let mhz = [("MHz", 1.0)];

    if let Some(en) = get("experiment", "tau_ec") {
        cfg.tau_ec = en.scaled(times, None)?;
    }
    if let Some(en) = get("experiment", "p_gate") {
        cfg.p_gate = en.scaled(&probability, Some(1.0))?;
    }
    if let Some(en) = get("experiment", "g_s") {
        cfg.g_s = en.scaled(rates, None)?;
    }
    if let Some(en) = get("experiment", "total_time") {
        e.total_time = en.scalar(times, None)?;
    }
    if let Some(en) = get("experiment", "n_runs") {
        e.n_runs = en.integer()?;
    }
    if let Some(en) = get("experiment", "seed") {
        e.seed = en.integer()?;
    }
    if let Some(en) = get("experiment", "mode") {
        e.mode = match en.word() {
            "deterministic" => Mode::Deterministic,
            "trajectory" => Mode::Trajectory,
            w => return Err(en.err(format!("mode must be deterministic or trajectory, got '{w}'"))),
        };
    }
    if let Some(en) = get("experiment", "abort_policy") {
        e.abort_policy = match en.word() {
            "continue_uncorrected" => AbortPolicy::ContinueUncorrected,
            "discard_shot" => AbortPolicy::DiscardShot,
            w => return Err(en.err(format!("abort_policy must be continue_uncorrected or discard_shot, got '{w}'"))),
        };
    }
    if let Some(en) = get("experiment", "delta_p") {
        e.delta_p = en.scalar(&probability, Some(1.0))?;
    }
    if let Some(en) = get("experiment", "substeps") {
        e.substeps = en.integer()?;
    }
    if let Some(en) = get("experiment", "workers") {
        e.workers = Some(en.integer()?);
    }
    for (key, list) in [("tau_ec", &cfg.tau_ec), ("p_gate", &cfg.p_gate), ("g_s", &cfg.g_s)] {
        if list.is_empty() {
            let line = get("experiment", key).map_or(0, |en| en.line);
            return Err(config_error(line, format!("'{key}' needs at least one value")));
        }
    }
    e.tau_ec = cfg.tau_ec[0];
    e.p_gate = cfg.p_gate[0];
    e.g_s = cfg.g_s[0];

    if entries.keys().any(|(s, _)| s == "coupler") {
        let mut c = CouplerParams::default();
        let mut rates_in = GammaRates::default();
        for (key, slot) in
            [("g_prime", &mut c.g_prime), ("delta", &mut c.delta), ("alpha", &mut c.alpha), ("g_s", &mut c.g_s)]
        {
            if let Some(en) = get("coupler", key) {
                *slot = en.scalar(&mhz, None)?;
            }
        }
        if let Some(en) = get("coupler", "dgs_dphi") {
            c.dgs_dphi = en.scalar(&[("MHz/Phi0", 1.0)], None)?;
        }
        if let Some(en) = get("coupler", "area") {
            c.area = en.scalar(&[("um2", 1.0)], None)?;
        }
        for (key, slot) in
            [("gamma_down", &mut rates_in.down), ("gamma_zero", &mut rates_in.zero), ("gamma_up", &mut rates_in.up)]
        {
            if let Some(en) = get("coupler", key) {
                *slot = en.scalar(rates, None)?;
            }
        }
        c.gamma_rates = rates_in;
        if let Some(en) = get("coupler", "hybridization_ratio") {
            c.hybridization_ratio = en.scalar(&[], Some(1.0))?;
        }
        if let Some(en) = get("coupler", "include_correction") {
            cfg.include_correction = en.word().parse().map_err(|_| en.err("expected true or false"))?;
        }
        cfg.experiment.coupler = cfg.include_correction.then_some(c);
        cfg.coupler = Some(c);
    }

    if let Some(en) = get("analysis", "xi_guess") {
        cfg.analysis.xi_guess = en.scalar(&[], Some(1.0))?;
    }
    if let Some(en) = get("analysis", "max_rounds") {
        cfg.analysis.max_rounds = en.integer()?;
    }

    if let Some(en) = get("sensing", "gamma_eff") {
        cfg.sensing.gamma_eff = Some(en.scalar(rates, None)?);
    }
    if let Some(en) = get("sensing", "total_time") {
        cfg.sensing.total_time = Some(en.scalar(times, None)?);
    }
    if let Some(en) = get("sensing", "responsivity") {
        cfg.sensing.responsivity = Some(if en.word() == "coupler" {
            if cfg.coupler.is_none() {
                return Err(en.err("responsivity = coupler needs a [coupler] section"));
            }
            Responsivity::Coupler
        } else {
            Responsivity::Value(en.scalar(&[("MHz/T", 1.0)], None)?)
        });
    }
    Ok(cfg)
}
