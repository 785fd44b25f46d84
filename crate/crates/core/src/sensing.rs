//! Sensitivity arithmetic and correction timing.
//!
//! Times in the timing model are nanoseconds; sensitivity inputs are SI
//! (seconds, tesla) except the responsivity, which is given in MHz/T and
//! read as an angular rate `dg_s/dB` of `1e6` rad/s per tesla per unit.

use std::f64::consts::E;

use crate::aqec4::circuit::{Gate, Step, ANCILLA};
use crate::error::{arg, Error, Result};

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityInputs {
    /// Effective logical decoherence rate (1/s).
    pub gamma_eff: f64,
    /// `|dg_s/dB|` in MHz/T.
    pub responsivity: f64,
    /// Total experiment time (s).
    pub total_time: f64,
}

impl SensitivityInputs {
    pub fn new(gamma_eff: f64, responsivity: f64, total_time: f64) -> Result<Self> {
        for (name, v) in [("gamma_eff", gamma_eff), ("responsivity", responsivity), ("total_time", total_time)] {
            if !v.is_finite() || v < 0.0 {
                return arg(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if total_time == 0.0 {
            return arg("total_time must be positive");
        }
        Ok(Self { gamma_eff, responsivity: responsivity.abs(), total_time })
    }

    fn responsivity_si(&self) -> f64 {
        self.responsivity * 1e6
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SensitivityReport {
    /// `delta B` in T/sqrt(Hz); infinite when the responsivity vanishes.
    pub delta_b: f64,
    /// Same quantity in pT/sqrt(Hz).
    pub delta_b_pt: f64,
    /// True when the responsivity is zero and no field can be resolved.
    pub infinite: bool,
}

/// `delta B = sqrt(2 e Gamma / T) / |dg_s/dB|`.
pub fn sensitivity(inputs: &SensitivityInputs) -> SensitivityReport {
    let r = inputs.responsivity_si();
    if r == 0.0 {
        return SensitivityReport { delta_b: f64::INFINITY, delta_b_pt: f64::INFINITY, infinite: true };
    }
    let db = (2.0 * E * inputs.gamma_eff / inputs.total_time).sqrt() / r;
    SensitivityReport { delta_b: db, delta_b_pt: db * 1e12, infinite: false }
}

/// Flux-based form `h / (|dE/dPhi| A) * sqrt(2 e Gamma / T)`, with the coupling
/// energy responsivity `dE/dPhi` in J/Wb and the coupler loop area in m^2.
pub fn sensitivity_h_normalized(
    energy_per_flux: f64,
    area: f64,
    gamma_eff: f64,
    total_time: f64,
) -> Result<SensitivityReport> {
    if !(area > 0.0) || !(total_time > 0.0) || !(gamma_eff >= 0.0) {
        return arg("area and total_time must be positive, gamma_eff non-negative");
    }
    let resp = energy_per_flux.abs() * area;
    if resp == 0.0 {
        return Ok(SensitivityReport { delta_b: f64::INFINITY, delta_b_pt: f64::INFINITY, infinite: true });
    }
    let db = PLANCK / resp * (2.0 * E * gamma_eff / total_time).sqrt();
    Ok(SensitivityReport { delta_b: db, delta_b_pt: db * 1e12, infinite: false })
}

/// Ramsey signal `P(t) = (1 + exp(-Gamma t) cos(2 g t)) / 2`.
pub fn ramsey_probability(t: f64, gamma_eff: f64, g_s: f64) -> f64 {
    0.5 * (1.0 + (-gamma_eff * t).exp() * (2.0 * g_s * t).cos())
}

/// Projection-noise resolution of one interrogation time `t` at the fringe
/// quadrature (`P = 1/2`, `|sin(2 g t)| = 1`):
/// `delta B(t) = sqrt(P(1-P) t / T) / |dP/dB|` with `|dP/dB| = t exp(-Gamma t) |dg/dB|`.
pub fn resolution_at(t: f64, inputs: &SensitivityInputs) -> f64 {
    let p = 0.5;
    let dp_db = t * (-inputs.gamma_eff * t).exp() * inputs.responsivity_si();
    (p * (1.0 - p) * t / inputs.total_time).sqrt() / dp_db
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct OptimalTime {
    /// `1 / (2 Gamma)`.
    pub closed_form: f64,
    /// Numerical argmin of `resolution_at`.
    pub numeric: f64,
    pub relative_difference: f64,
}

/// Default grid size for the numeric minimization.
pub const OPTIMAL_TIME_GRID: usize = 10_000;

pub fn optimal_time(gamma_eff: f64) -> Result<OptimalTime> {
    optimal_time_on_grid(gamma_eff, OPTIMAL_TIME_GRID)
}

/// Grid search over `t in (0, 5/Gamma]` followed by golden-section refinement.
pub fn optimal_time_on_grid(gamma_eff: f64, points: usize) -> Result<OptimalTime> {
    if !(gamma_eff > 0.0) || !gamma_eff.is_finite() {
        return arg(format!("gamma_eff must be positive, got {gamma_eff}"));
    }
    if points < 3 {
        return arg("optimal time grid needs at least 3 points");
    }
    // the responsivity and total time only rescale delta B
    let unit = SensitivityInputs { gamma_eff, responsivity: 1.0, total_time: 1.0 };
    let f = |t: f64| resolution_at(t, &unit);
    let t_max = 5.0 / gamma_eff;
    let step = t_max / points as f64;
    let best = (1..=points).min_by(|&a, &b| f(a as f64 * step).total_cmp(&f(b as f64 * step))).unwrap_or(1);
    let (mut lo, mut hi) = ((best as f64 - 1.0).max(1e-9) * step, (best as f64 + 1.0) * step);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let numeric = 0.5 * (lo + hi);
    let closed_form = 0.5 / gamma_eff;
    Ok(OptimalTime { closed_form, numeric, relative_difference: (numeric - closed_form).abs() / closed_form })
}

/// Gate and measurement durations (ns) on the linear chain `q1 - q2 - A - q3 - q4`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimingModel {
    pub t_cphase: f64,
    pub t_measurement: f64,
    pub single_qubit_time: f64,
    /// Controlled-phase gates charged per SWAP hop.
    pub swap_overhead: usize,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self { t_cphase: 40.0, t_measurement: 200.0, single_qubit_time: 10.0, swap_overhead: 3 }
    }
}

/// Chain position of each register qubit (data 0..=3, ancilla 4).
pub fn chain_position(q: usize) -> usize {
    match q {
        0 => 0,
        1 => 1,
        ANCILLA => 2,
        2 => 3,
        _ => 4,
    }
}

/// Accounted duration of a gate sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct DurationReport {
    /// Wall-clock time (ns), gates executed sequentially.
    pub total: f64,
    /// Two-qubit gates in the circuit itself.
    pub native_two_qubit: usize,
    /// Controlled-phase gates spent on SWAP routing.
    pub swap_two_qubit: usize,
    pub single_qubit: usize,
    pub measurements: usize,
    pub resets: usize,
}

impl DurationReport {
    pub fn two_qubit_total(&self) -> usize {
        self.native_two_qubit + self.swap_two_qubit
    }

    fn merge(mut self, other: DurationReport) -> Self {
        self.total += other.total;
        self.native_two_qubit += other.native_two_qubit;
        self.swap_two_qubit += other.swap_two_qubit;
        self.single_qubit += other.single_qubit;
        self.measurements += other.measurements;
        self.resets += other.resets;
        self
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<()> {
        if [self.t_cphase, self.t_measurement, self.single_qubit_time].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return arg("timing constants must be finite and non-negative");
        }
        Ok(())
    }

    /// Cost of one step. A CNOT is a controlled phase between two Hadamards; a
    /// reset is a measurement followed by a conditional X; a non-neighbour
    /// two-qubit gate pays `swap_overhead` controlled phases per extra hop.
    pub fn step(&self, step: &Step) -> DurationReport {
        let mut r = DurationReport::default();
        match step {
            Step::Measure(_) => r.measurements = 1,
            Step::Reset(_) => {
                r.resets = 1;
                r.measurements = 1;
                r.single_qubit = 1;
            }
            Step::Gate(g) => match *g {
                Gate::H(_) | Gate::X(_) | Gate::Ry(..) => r.single_qubit = 1,
                Gate::Cnot(a, b) | Gate::Cz(a, b) => {
                    r.native_two_qubit = 1;
                    r.swap_two_qubit =
                        self.swap_overhead * chain_position(a).abs_diff(chain_position(b)).saturating_sub(1);
                    if matches!(g, Gate::Cnot(..)) {
                        r.single_qubit = 2;
                    }
                }
            },
        }
        r.total = (r.native_two_qubit + r.swap_two_qubit) as f64 * self.t_cphase
            + r.measurements as f64 * self.t_measurement
            + r.single_qubit as f64 * self.single_qubit_time;
        r
    }

    pub fn duration(&self, steps: &[Step]) -> DurationReport {
        steps.iter().map(|s| self.step(s)).fold(DurationReport::default(), DurationReport::merge)
    }
}

/// Parses a circuit description, one instruction per line:
/// `h q`, `x q`, `ry q angle`, `cnot c t`, `cz a b`, `measure q`, `reset q`.
/// Blank lines and `#` comments are ignored.
pub fn parse_circuit(text: &str) -> Result<Vec<Step>> {
    let mut steps = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Config { line: lineno + 1, message: msg };
        let mut words = line.split_whitespace();
        let name = words.next().unwrap_or_default().to_ascii_lowercase();
        let args: Vec<&str> = words.collect();
        let qubit = |i: usize| -> Result<usize> {
            let s = args.get(i).ok_or_else(|| bad(format!("`{name}` is missing operand {}", i + 1)))?;
            let q: usize = s.parse().map_err(|_| bad(format!("invalid qubit index `{s}`")))?;
            if q > ANCILLA {
                return Err(bad(format!("qubit {q} is outside the 5-qubit register")));
            }
            Ok(q)
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(bad(format!("`{name}` takes {n} operand(s), got {}", args.len())));
            }
            Ok(())
        };
        let step = match name.as_str() {
            "h" => {
                arity(1)?;
                Step::Gate(Gate::H(qubit(0)?))
            }
            "x" => {
                arity(1)?;
                Step::Gate(Gate::X(qubit(0)?))
            }
            "ry" => {
                arity(2)?;
                let a: f64 = args[1].parse().map_err(|_| bad(format!("invalid angle `{}`", args[1])))?;
                Step::Gate(Gate::Ry(qubit(0)?, a))
            }
            "cnot" | "cx" | "cz" | "cphase" => {
                arity(2)?;
                let (a, b) = (qubit(0)?, qubit(1)?);
                if a == b {
                    return Err(bad("two-qubit gate needs distinct qubits".into()));
                }
                if name == "cnot" || name == "cx" {
                    Step::Gate(Gate::Cnot(a, b))
                } else {
                    Step::Gate(Gate::Cz(a, b))
                }
            }
            "measure" => {
                arity(1)?;
                Step::Measure(qubit(0)?)
            }
            "reset" => {
                arity(1)?;
                Step::Reset(qubit(0)?)
            }
            other => return Err(bad(format!("unknown gate `{other}`"))),
        };
        steps.push(step);
    }
    Ok(steps)
}

/// Longest root-to-leaf path of a correction round under `timing`.
pub fn worst_case_round(timing: &TimingModel, p: f64) -> DurationReport {
    crate::aqec4::circuit::paths(&crate::aqec4::circuit::correction_round(p))
        .iter()
        .map(|path| timing.duration(&path.steps))
        .max_by(|a, b| a.total.total_cmp(&b.total))
        .unwrap_or_default()
}
