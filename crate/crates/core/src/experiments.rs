//! Repeated evolve / damp / correct cycles and the analyses built on them.
//!
//! Time is measured in arbitrary units shared by `gamma`, `tau_ec`, `g_s` and
//! `total_time` (rates are angular, hbar = 1). Observables are recorded at
//! t = 0 and immediately after every frame-resolved correction.
//!
//! Deterministic mode folds one round into a 256x256 superoperator and
//! iterates it. Trajectory mode samples damping jumps, gate faults and
//! measurement outcomes on state vectors; every shot owns the ChaCha stream
//! `shot` of the master seed, so results do not depend on the worker count.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aqec4::{Branch, CodeSpec, CorrectionOptions, Corrector};
use crate::channels::damp_in_place;
use crate::coupler::{signal_hamiltonian, CouplerParams};
use crate::error::{arg, Error, Result};
use crate::qstate::{apply_local_vec, bit_of, c, gates, propagator, Matrix, C64};

mod analysis;
pub use analysis::*;

const DIM: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Deterministic,
    Trajectory,
}

/// What a trajectory does after the single-decay filter aborts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortPolicy {
    /// Keep the projected state and carry on.
    #[default]
    ContinueUncorrected,
    /// Drop the whole shot from the averages.
    DiscardShot,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub gamma: f64,
    pub tau_ec: f64,
    pub p_gate: f64,
    pub g_s: f64,
    /// When set, the signal Hamiltonian carries the dressed-state phase correction.
    pub coupler: Option<CouplerParams>,
    pub n_runs: usize,
    pub total_time: f64,
    pub seed: u64,
    pub mode: Mode,
    pub abort_policy: AbortPolicy,
    /// Miscalibration of the decay probability assumed by the correction angles.
    pub delta_p: f64,
    /// Evolve/damp slices per correction interval.
    pub substeps: usize,
    /// Rayon worker count for trajectory mode (`None`: global pool).
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            tau_ec: 0.05,
            p_gate: 0.0,
            g_s: 0.0,
            coupler: None,
            n_runs: 500,
            total_time: 1.0,
            seed: 0,
            mode: Mode::Deterministic,
            abort_policy: AbortPolicy::ContinueUncorrected,
            delta_p: 0.0,
            substeps: 1,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.gamma, self.tau_ec, self.p_gate, self.g_s, self.total_time, self.delta_p];
        if finite.iter().any(|v| !v.is_finite()) {
            return arg("configuration values must be finite");
        }
        if self.gamma < 0.0 {
            return arg(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if self.tau_ec <= 0.0 {
            return arg(format!("tau_ec must be positive, got {}", self.tau_ec));
        }
        if self.total_time < self.tau_ec {
            return arg(format!("total_time {} is shorter than tau_ec {}", self.total_time, self.tau_ec));
        }
        if !(0.0..=1.0).contains(&self.p_gate) {
            return arg(format!("p_gate must lie in [0, 1], got {}", self.p_gate));
        }
        if self.n_runs == 0 {
            return arg("n_runs must be at least 1");
        }
        if self.substeps == 0 {
            return arg("substeps must be at least 1");
        }
        if self.workers == Some(0) {
            return arg("workers must be at least 1");
        }
        if self.decay_probability() >= 0.5 {
            return arg(format!(
                "gamma * tau_ec = {} is far outside the code's working range",
                self.gamma * self.tau_ec
            ));
        }
        if let Some(cp) = &self.coupler {
            cp.validate()?;
        }
        Ok(())
    }

    /// `p = 1 - exp(-gamma tau_ec)`.
    pub fn decay_probability(&self) -> f64 {
        -(-self.gamma * self.tau_ec).exp_m1()
    }

    pub fn rounds(&self) -> usize {
        (self.total_time / self.tau_ec + 1e-9).floor() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.rounds()).map(|k| k as f64 * self.tau_ec).collect()
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TimeSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Standard error of the mean (trajectory mode); empty otherwise.
    pub stderr: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || !(stderr.is_empty() || stderr.len() == times.len()) {
            return arg("time series columns have different lengths");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return arg("time series times must be strictly increasing");
        }
        Ok(Self { label: label.into(), times, values, stderr })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at the sample closest to `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?.0;
        Some(self.values[i])
    }

    pub fn stderr_at(&self, t: f64) -> Option<f64> {
        let i = self.times.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?.0;
        self.stderr.get(i).copied()
    }
}

/// Linear observables recorded at each sampling instant.
const N_OBS: usize = 6;
// fidelity with the initial state, <0bar|rho|0bar>, logical x, y, z, fidelity just before correction
const OBS_LABELS: [&str; N_OBS] =
    ["fidelity", "population", "logical_x", "logical_y", "logical_z", "pre_correction_fidelity"];

/// Every series recorded by one run of the cycle harness.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CycleRecord {
    pub fidelity: TimeSeries,
    pub population: TimeSeries,
    pub logical_x: TimeSeries,
    pub logical_y: TimeSeries,
    pub logical_z: TimeSeries,
    /// Fidelity after the interval's damping, just before it is corrected
    /// (the first point repeats the initial fidelity).
    pub pre_correction_fidelity: TimeSeries,
    /// Shots that were kept (trajectory mode) or 1 (deterministic).
    pub shots: usize,
}

impl CycleRecord {
    /// Length of the logical Bloch vector in the `Zbar`-`Ybar` plane.
    pub fn yz_length(&self) -> TimeSeries {
        let values =
            self.logical_y.values.iter().zip(&self.logical_z.values).map(|(y, z)| (y * y + z * z).sqrt()).collect();
        TimeSeries { label: "logical_yz_length".into(), times: self.logical_y.times.clone(), values, stderr: vec![] }
    }
}

/// Single-interval dynamics shared by both modes.
struct Interval {
    unitary: Option<Matrix>,
    p_sub: f64,
    substeps: usize,
}

impl Interval {
    fn new(config: &ExperimentConfig, signal_on: bool) -> Result<Self> {
        let m = config.substeps;
        let dt = config.tau_ec / m as f64;
        let unitary = if signal_on && config.g_s != 0.0 {
            let h = match &config.coupler {
                Some(cp) => signal_hamiltonian(&CouplerParams { g_s: config.g_s, ..*cp }, true)?,
                None => {
                    signal_hamiltonian(&CouplerParams { g_s: config.g_s, g_prime: 0.0, ..Default::default() }, false)?
                }
            };
            Some(propagator(&h, dt)?.into_matrix())
        } else {
            None
        };
        Ok(Self { unitary, p_sub: -(-config.gamma * dt).exp_m1(), substeps: m })
    }

    fn apply(&self, rho: &mut Matrix) {
        for _ in 0..self.substeps {
            if let Some(u) = &self.unitary {
                *rho = u * &*rho * u.adjoint();
            }
            damp_in_place(rho, self.p_sub, &[0, 1, 2, 3], 4);
        }
    }

    fn sample<R: Rng + ?Sized>(&self, psi: &mut DVector<C64>, rng: &mut R) {
        for _ in 0..self.substeps {
            if let Some(u) = &self.unitary {
                *psi = u * &*psi;
            }
            sample_damping(psi, self.p_sub, rng);
        }
    }
}

/// Quantum-jump unraveling of independent amplitude damping on the 4 data qubits.
fn sample_damping<R: Rng + ?Sized>(psi: &mut DVector<C64>, p: f64, rng: &mut R) {
    if p == 0.0 {
        return;
    }
    for q in 0..4 {
        let bit = 1 << bit_of(q, 4);
        let excited: f64 = psi.iter().enumerate().filter(|(i, _)| i & bit != 0).map(|(_, a)| a.norm_sqr()).sum();
        if rng.gen::<f64>() < p * excited {
            apply_local_vec(psi, gates::sigma_minus().matrix(), &[q], 4);
        } else {
            let k0 = Matrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c((1.0 - p).sqrt())]));
            apply_local_vec(psi, &k0, &[q], 4);
        }
        let norm = psi.norm();
        psi.unscale_mut(norm);
    }
}

fn observables(rho: &Matrix, initial: &DVector<C64>, code: &CodeSpec) -> [f64; 5] {
    let f = initial.dotc(&(rho * initial)).re;
    let z0 = code.zero.amplitudes();
    let pop = z0.dotc(&(rho * z0)).re;
    let [x, y, z] = code.logical_bloch(rho);
    [f, pop, x, y, z]
}

fn vec_observables(psi: &DVector<C64>, initial: &DVector<C64>, code: &CodeSpec) -> [f64; 5] {
    let amp0 = code.zero.amplitudes().dotc(psi);
    let amp1 = code.one.amplitudes().dotc(psi);
    let cross = amp0 * amp1.conj();
    [initial.dotc(psi).norm_sqr(), amp0.norm_sqr(), 2.0 * cross.re, 2.0 * cross.im, amp0.norm_sqr() - amp1.norm_sqr()]
}

/// One full round (interval + correction) as a superoperator on column-major `vec(rho)`.
fn round_superoperator(interval: &Interval, corrector: &Corrector) -> Matrix {
    let mut s = Matrix::zeros(DIM * DIM, DIM * DIM);
    for k in 0..DIM * DIM {
        let mut e = Matrix::zeros(DIM, DIM);
        e[(k % DIM, k / DIM)] = c(1.0);
        interval.apply(&mut e);
        let (out, _) = corrector.apply_raw(&e);
        s.set_column(k, &DVector::from_column_slice(out.as_slice()));
    }
    s
}

fn unvec(v: &DVector<C64>) -> Matrix {
    Matrix::from_column_slice(DIM, DIM, v.as_slice())
}

fn encode(alpha: C64, beta: C64) -> Result<DVector<C64>> {
    Ok(CodeSpec::new().encode(alpha, beta)?.amplitudes().clone())
}

fn corrector_for(config: &ExperimentConfig) -> Result<Corrector> {
    Corrector::new(config.decay_probability(), CorrectionOptions { p_gate: config.p_gate, delta_p: config.delta_p })
}

fn deterministic(config: &ExperimentConfig, initial: &DVector<C64>, signal_on: bool) -> Result<Vec<[f64; N_OBS]>> {
    let code = CodeSpec::new();
    let interval = Interval::new(config, signal_on)?;
    let corrector = corrector_for(config)?;
    let s = round_superoperator(&interval, &corrector);
    let rho0 = initial * initial.adjoint();
    let mut v = DVector::from_column_slice(rho0.as_slice());
    let mut rows = Vec::with_capacity(config.rounds() + 1);
    let first = observables(&rho0, initial, &code);
    rows.push([first[0], first[1], first[2], first[3], first[4], first[0]]);
    for _ in 0..config.rounds() {
        let mut pre = unvec(&v);
        interval.apply(&mut pre);
        let pre_f = initial.dotc(&(&pre * initial)).re;
        v = &s * &v;
        let o = observables(&unvec(&v), initial, &code);
        rows.push([o[0], o[1], o[2], o[3], o[4], pre_f]);
    }
    Ok(rows)
}

/// One sampled shot; `None` when the shot is discarded.
fn shot(
    config: &ExperimentConfig,
    interval: &Interval,
    corrector: &Corrector,
    initial: &DVector<C64>,
    code: &CodeSpec,
    index: usize,
) -> Option<Vec<[f64; N_OBS]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let mut psi = initial.clone();
    let mut rows = Vec::with_capacity(config.rounds() + 1);
    let first = vec_observables(&psi, initial, code);
    rows.push([first[0], first[1], first[2], first[3], first[4], first[0]]);
    for _ in 0..config.rounds() {
        interval.sample(&mut psi, &mut rng);
        let pre_f = initial.dotc(&psi).norm_sqr();
        let (next, branch) = corrector.sample(&psi, &mut rng);
        if branch == Branch::FilterAbort && config.abort_policy == AbortPolicy::DiscardShot {
            return None;
        }
        psi = next;
        let o = vec_observables(&psi, initial, code);
        rows.push([o[0], o[1], o[2], o[3], o[4], pre_f]);
    }
    Some(rows)
}

fn trajectories(
    config: &ExperimentConfig,
    initial: &DVector<C64>,
    signal_on: bool,
) -> Result<(Vec<[f64; N_OBS]>, Vec<[f64; N_OBS]>, usize)> {
    let code = CodeSpec::new();
    let interval = Interval::new(config, signal_on)?;
    let corrector = corrector_for(config)?;
    let run = || -> Vec<Option<Vec<[f64; N_OBS]>>> {
        (0..config.n_runs).into_par_iter().map(|i| shot(config, &interval, &corrector, initial, &code, i)).collect()
    };
    let shots = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    // fixed-order reduction over pre-indexed slots
    let kept: Vec<_> = shots.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::Numerical("every trajectory was discarded".into()));
    }
    let n = kept.len() as f64;
    let points = config.rounds() + 1;
    let mut mean = vec![[0.0; N_OBS]; points];
    let mut sq = vec![[0.0; N_OBS]; points];
    for rows in &kept {
        for (k, row) in rows.iter().enumerate() {
            for j in 0..N_OBS {
                mean[k][j] += row[j];
                sq[k][j] += row[j] * row[j];
            }
        }
    }
    let mut stderr = vec![[0.0; N_OBS]; points];
    for k in 0..points {
        for j in 0..N_OBS {
            mean[k][j] /= n;
            let var = (sq[k][j] / n - mean[k][j] * mean[k][j]).max(0.0);
            stderr[k][j] = if kept.len() > 1 { (var / (n - 1.0)).sqrt() } else { 0.0 };
        }
    }
    Ok((mean, stderr, kept.len()))
}

/// Runs the cycle harness and returns every recorded observable.
pub fn run_cycles_detailed(config: &ExperimentConfig, alpha: C64, beta: C64, signal_on: bool) -> Result<CycleRecord> {
    config.validate()?;
    let initial = encode(alpha, beta)?;
    let (mean, stderr, shots) = match config.mode {
        Mode::Deterministic => (deterministic(config, &initial, signal_on)?, vec![], 1),
        Mode::Trajectory => trajectories(config, &initial, signal_on)?,
    };
    let times = config.times();
    let column = |j: usize| -> Result<TimeSeries> {
        TimeSeries::new(
            OBS_LABELS[j],
            times.clone(),
            mean.iter().map(|r| r[j]).collect(),
            stderr.iter().map(|r| r[j]).collect(),
        )
    };
    Ok(CycleRecord {
        fidelity: column(0)?,
        population: column(1)?,
        logical_x: column(2)?,
        logical_y: column(3)?,
        logical_z: column(4)?,
        pre_correction_fidelity: column(5)?,
        shots,
    })
}

/// Fidelity with the initial logical state (signal off) or the `|0bar>`
/// population (signal on), sampled after every correction.
pub fn run_cycles(config: &ExperimentConfig, alpha: C64, beta: C64, signal_on: bool) -> Result<TimeSeries> {
    let rec = run_cycles_detailed(config, alpha, beta, signal_on)?;
    Ok(if signal_on { rec.population } else { rec.fidelity })
}

/// `|+bar>` amplitudes.
pub fn plus_amplitudes() -> (C64, C64) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (c(h), c(h))
}

/// Fidelity of an unencoded damped `|+>`: `(1 + exp(-gamma t / 2)) / 2`.
pub fn unencoded_reference(gamma: f64, times: &[f64]) -> Result<TimeSeries> {
    if !(gamma >= 0.0) {
        return arg(format!("gamma must be non-negative, got {gamma}"));
    }
    let values = times.iter().map(|t| 0.5 * (1.0 + (-0.5 * gamma * t).exp())).collect();
    TimeSeries::new("unencoded_fidelity", times.to_vec(), values, vec![])
}

#[cfg(test)]
mod tests;
