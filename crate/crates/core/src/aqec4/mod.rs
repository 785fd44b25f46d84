//! The four-qubit approximate amplitude-damping code.
//!
//! Codewords `|0bar> = |psi+>|psi+>` and `|1bar> = |psi->|psi->` with
//! `|psi+-> = (|00> +- |11>)/sqrt(2)`. Stabilizers `XXXX`, `ZZII`, `IIZZ`;
//! logical operators `Xbar = Z1 Z3` and `Zbar = X1 X2` (1-based labels, i.e.
//! qubits 0 and 2, and 0 and 1, in the zero-based register convention).
//!
//! A correction round measures the parities of pairs (1,2) and (3,4) into an
//! ancilla, then dispatches on the syndrome `(b1, b2)`:
//!
//! * `(0,0)`: rebalance `|0000>` against `|1111>` by `pi/4 - theta`,
//!   `theta = atan((1-p)^2)`;
//! * `(1,0)` / `(0,1)`: filter the surviving pair by `phi = acos(1-p)`, reset
//!   the decayed pair, re-encode and record a `Zbar` frame;
//! * `(1,1)`: second-order event, left untouched.

pub mod circuit;
pub(crate) mod engine;
pub mod recovery;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{arg, Error, Result};
use crate::qstate::{
    c, embed, gates, measure_projective, partial_trace_raw, ComplexOperator, DensityMatrix, Matrix, PureState, C64,
};
use crate::sensing::TimingModel;
use circuit::{correction_round, no_decay_ops, paths, single_decay_ops, Op, ANCILLA, REGISTER};
pub use circuit::{phi, theta, Side};
pub use recovery::{recovery_analysis, RecoveryAnalysis, RecoveryTerm};

pub const DATA_QUBITS: usize = 4;
const DIM: usize = 16;

/// Which corrector handled a syndrome branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Branch {
    NoDecay,
    DecayQ1orQ2,
    DecayQ3orQ4,
    Uncorrectable,
    FilterAbort,
}

/// Phase-free Pauli operator on the four data qubits (bit `q` marks qubit `q`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PauliFrame {
    x: u8,
    z: u8,
}

impl PauliFrame {
    pub const IDENTITY: PauliFrame = PauliFrame { x: 0, z: 0 };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    pub fn new(x_mask: u8, z_mask: u8) -> Result<Self> {
        if (x_mask | z_mask) >> DATA_QUBITS != 0 {
            return arg("Pauli frame acts on data qubits 0..4 only");
        }
        Ok(Self { x: x_mask, z: z_mask })
    }

    /// `Zbar = X1 X2`.
    pub fn logical_z() -> Self {
        Self { x: 0b0011, z: 0 }
    }

    /// `Xbar = Z1 Z3`.
    pub fn logical_x() -> Self {
        Self { x: 0, z: 0b0101 }
    }

    /// Group product (phases dropped).
    pub fn compose(&self, other: &PauliFrame) -> Self {
        Self { x: self.x ^ other.x, z: self.z ^ other.z }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Single-qubit factors `(qubit, matrix)` of the non-identity positions.
    pub(crate) fn factors(&self) -> Vec<(usize, Matrix)> {
        (0..DATA_QUBITS)
            .filter_map(|q| {
                let (x, z) = ((self.x >> q) & 1 == 1, (self.z >> q) & 1 == 1);
                let m = match (x, z) {
                    (false, false) => return None,
                    (true, false) => gates::pauli_x(),
                    (false, true) => gates::pauli_z(),
                    (true, true) => gates::pauli_y(),
                };
                Some((q, m.into_matrix()))
            })
            .collect()
    }

    pub fn to_operator(&self, n: usize) -> Result<ComplexOperator> {
        self.factors().into_iter().try_fold(ComplexOperator::identity(n), |acc, (q, m)| {
            acc.mul(&embed(&ComplexOperator::from_matrix(m), &[q], n)?)
        })
    }
}

impl std::fmt::Display for PauliFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for q in 0..DATA_QUBITS {
            let s = match ((self.x >> q) & 1, (self.z >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, _) => 'Z',
                _ => 'Y',
            };
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Codewords, stabilizers and logical operators of the code.
#[derive(Clone, Debug)]
pub struct CodeSpec {
    pub zero: PureState,
    pub one: PureState,
    pub stabilizers: [ComplexOperator; 3],
    pub logical_x: ComplexOperator,
    pub logical_z: ComplexOperator,
}

fn pauli_string(s: &str) -> ComplexOperator {
    s.chars()
        .map(|ch| match ch {
            'X' => gates::pauli_x(),
            'Y' => gates::pauli_y(),
            'Z' => gates::pauli_z(),
            _ => gates::identity(),
        })
        .reduce(|a, b| a.kron(&b))
        .expect("non-empty Pauli string")
}

impl Default for CodeSpec {
    fn default() -> Self {
        Self::new()
    }
}

impl CodeSpec {
    pub fn new() -> Self {
        let psi_plus = bell(1.0);
        let psi_minus = bell(-1.0);
        Self {
            zero: psi_plus.kron(&psi_plus),
            one: psi_minus.kron(&psi_minus),
            stabilizers: [pauli_string("XXXX"), pauli_string("ZZII"), pauli_string("IIZZ")],
            logical_x: pauli_string("ZIZI"),
            logical_z: pauli_string("XXII"),
        }
    }

    /// `alpha |0bar> + beta |1bar>`.
    pub fn encode(&self, alpha: C64, beta: C64) -> Result<PureState> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return arg(format!("logical amplitudes are not normalized (|a|^2+|b|^2 = {norm})"));
        }
        PureState::normalized(self.zero.amplitudes() * alpha + self.one.amplitudes() * beta)
    }

    /// `|+bar> = (|0bar> + |1bar>)/sqrt(2)`.
    pub fn plus(&self) -> PureState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        self.encode(c(h), c(h)).expect("normalized")
    }

    /// `(|0bar> + i|1bar>)/sqrt(2)`.
    pub fn plus_i(&self) -> PureState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        self.encode(c(h), C64::new(0.0, h)).expect("normalized")
    }

    pub fn codespace_projector(&self) -> ComplexOperator {
        self.zero.projector().add(&self.one.projector()).expect("same dimension")
    }

    /// Logical Bloch vector `(<X>, <Y>, <Z>)` of the codespace block of `rho`.
    /// Weight outside the codespace contributes nothing.
    pub fn logical_bloch(&self, rho: &Matrix) -> [f64; 3] {
        let z = self.zero.amplitudes();
        let o = self.one.amplitudes();
        let r00 = z.dotc(&(rho * z)).re;
        let r11 = o.dotc(&(rho * o)).re;
        let r10 = o.dotc(&(rho * z));
        [2.0 * r10.re, 2.0 * r10.im, r00 - r11]
    }
}

fn bell(sign: f64) -> PureState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    PureState::new(DVector::from_vec(vec![c(h), c(0.0), c(0.0), c(sign * h)])).expect("normalized")
}

/// Parity bits `(b1, b2)` of pairs (1,2) and (3,4) for a 4-qubit basis index.
pub fn syndrome_of_index(idx: usize) -> (u8, u8) {
    let bit = |q: usize| (idx >> (DATA_QUBITS - 1 - q)) & 1;
    ((bit(0) ^ bit(1)) as u8, (bit(2) ^ bit(3)) as u8)
}

fn parity_projector(b1: u8, b2: u8) -> ComplexOperator {
    let diag = DVector::from_fn(DIM, |i, _| c(if syndrome_of_index(i) == (b1, b2) { 1.0 } else { 0.0 }));
    ComplexOperator::from_matrix(Matrix::from_diagonal(&diag))
}

/// Weight of `rho` inside the syndrome sector `(b1, b2)`.
fn sector_weight(rho: &Matrix, b1: u8, b2: u8) -> f64 {
    (0..DIM).filter(|&i| syndrome_of_index(i) == (b1, b2)).map(|i| rho[(i, i)].re).sum()
}

/// One branch of the ideal parity measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct SyndromeOutcome {
    pub b1: u8,
    pub b2: u8,
    pub probability: f64,
    /// `None` when the branch has zero probability.
    pub post_state: Option<DensityMatrix>,
}

fn check_data_state(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != DIM {
        return arg(format!("expected a 4-qubit (16-dim) state, got dimension {}", rho.dim()));
    }
    Ok(())
}

/// Projective measurement of the two pair parities.
pub fn extract_syndrome(rho: &DensityMatrix) -> Result<Vec<SyndromeOutcome>> {
    check_data_state(rho)?;
    let keys = [(0u8, 0u8), (1, 0), (0, 1), (1, 1)];
    let projectors: Vec<_> = keys.iter().map(|&(a, b)| parity_projector(a, b)).collect();
    let branches = measure_projective(rho, &projectors)?;
    Ok(keys
        .iter()
        .zip(branches)
        .map(|(&(b1, b2), br)| SyndromeOutcome { b1, b2, probability: br.probability, post_state: br.state })
        .collect())
}

/// Result of one corrector on one syndrome branch.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionOutcome {
    pub syndrome: (u8, u8),
    pub branch: Branch,
    /// Probability of this outcome relative to the corrector's input.
    pub probability: f64,
    pub pauli_frame: PauliFrame,
    /// Normalized post-correction data state, frame not yet applied.
    pub post_state: DensityMatrix,
    /// Noiseless wall-clock duration of the path under the default timing model (ns).
    pub duration: f64,
}

/// Applies the recorded Pauli frame to the post-correction state.
pub fn frame_resolve(outcome: &CorrectionOutcome) -> DensityMatrix {
    let mut m = outcome.post_state.matrix().clone();
    engine::apply_frame(&mut m, outcome.pauli_frame, DATA_QUBITS);
    DensityMatrix::from_raw(m)
}

fn check_decay_probability(p: f64, upper: f64) -> Result<()> {
    if !(0.0..upper).contains(&p) {
        return arg(format!("decay probability must lie in [0, {upper}), got {p}"));
    }
    Ok(())
}

fn require_sector(rho: &DensityMatrix, b1: u8, b2: u8) -> Result<f64> {
    let tr = rho.trace();
    if tr <= 0.0 {
        return Err(Error::Contract("corrector input has zero weight".into()));
    }
    let inside = sector_weight(rho.matrix(), b1, b2);
    if (tr - inside).abs() > 1e-9 * tr {
        return Err(Error::Contract(format!(
            "state is not confined to syndrome branch ({b1},{b2}): weight {inside} of {tr}"
        )));
    }
    Ok(tr)
}

/// Runs a gate tree on a 4-qubit data state with a fresh ancilla; leaves keep
/// their (unnormalized) data state with the ancilla traced out.
pub(crate) fn run_on_data(ops: &[Op], rho: &Matrix, p_gate: f64) -> Vec<engine::Leaf<Matrix>> {
    engine::run_branches(ops, engine::with_ancilla(rho), REGISTER, p_gate)
        .into_iter()
        .map(|leaf| engine::Leaf { state: partial_trace_raw(&leaf.state, &[0, 1, 2, 3], REGISTER), ..leaf })
        .collect()
}

fn path_duration(ops: &[Op], branch: Branch) -> f64 {
    let timing = TimingModel::default();
    paths(ops).iter().find(|p| p.branch == Some(branch)).map(|p| timing.duration(&p.steps).total).unwrap_or(0.0)
}

/// Corrects the `(0,0)` branch (the no-decay operator `K_0000` and its
/// second-order companions). Returns the normalized corrected data state.
pub fn correct_no_decay(rho_branch: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_data_state(rho_branch)?;
    check_decay_probability(p, 1.0)?;
    let tr = require_sector(rho_branch, 0, 0)?;
    let ops = no_decay_ops(p);
    let out = run_on_data(&ops, &rho_branch.matrix().unscale(tr), 0.0)
        .into_iter()
        .fold(Matrix::zeros(DIM, DIM), |acc, leaf| acc + leaf.state);
    Ok(DensityMatrix::from_raw(out))
}

/// Corrects a single-decay branch. Returns the successful outcome and, when
/// it has non-zero weight, the filter-abort outcome.
pub fn correct_single_decay(rho_branch: &DensityMatrix, side: Side, p: f64) -> Result<Vec<CorrectionOutcome>> {
    check_data_state(rho_branch)?;
    check_decay_probability(p, 1.0)?;
    let syndrome = match side {
        Side::Q12 => (1, 0),
        Side::Q34 => (0, 1),
    };
    let tr = require_sector(rho_branch, syndrome.0, syndrome.1)?;
    let ops = single_decay_ops(p, side);
    let mut outcomes = Vec::new();
    for leaf in run_on_data(&ops, &rho_branch.matrix().unscale(tr), 0.0) {
        let weight = leaf.state.trace().re;
        if weight <= crate::qstate::ZERO_BRANCH {
            continue;
        }
        outcomes.push(CorrectionOutcome {
            syndrome,
            branch: leaf.branch,
            probability: weight,
            pauli_frame: leaf.frame,
            post_state: DensityMatrix::from_raw(leaf.state.unscale(weight)),
            duration: path_duration(&ops, leaf.branch),
        });
    }
    outcomes.sort_by_key(|o| o.branch);
    Ok(outcomes)
}

/// The `(1,1)` branch: nothing can be done, the state passes through.
pub fn correct_uncorrectable(rho_branch: &DensityMatrix) -> CorrectionOutcome {
    CorrectionOutcome {
        syndrome: (1, 1),
        branch: Branch::Uncorrectable,
        probability: 1.0,
        pauli_frame: PauliFrame::identity(),
        post_state: rho_branch.clone(),
        duration: 0.0,
    }
}

/// Noise and calibration knobs of a correction round.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorrectionOptions {
    /// Depolarizing probability after every gate, reset and before every measurement.
    pub p_gate: f64,
    /// Error in the decay probability assumed by the correction angles.
    pub delta_p: f64,
}

/// Weight of one syndrome/corrector path in a branch-summed round.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchWeight {
    pub syndrome: (u8, u8),
    pub branch: Branch,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct CorrectionReport {
    /// Frame-resolved output summed over all branches.
    pub state: DensityMatrix,
    pub branches: Vec<BranchWeight>,
}

impl CorrectionReport {
    pub fn probability_of(&self, branch: Branch) -> f64 {
        self.branches.iter().filter(|b| b.branch == branch).map(|b| b.probability).sum()
    }

    pub fn probability_of_syndrome(&self, syndrome: (u8, u8)) -> f64 {
        self.branches.iter().filter(|b| b.syndrome == syndrome).map(|b| b.probability).sum()
    }
}

/// Precompiled correction round for a fixed assumed decay probability.
#[derive(Clone, Debug)]
pub struct Corrector {
    ops: Vec<Op>,
    options: CorrectionOptions,
}

impl Corrector {
    pub fn new(p: f64, options: CorrectionOptions) -> Result<Self> {
        check_decay_probability(p, 0.5)?;
        if !(0.0..=1.0).contains(&options.p_gate) {
            return arg(format!("gate error probability must lie in [0, 1], got {}", options.p_gate));
        }
        let assumed = (p + options.delta_p).clamp(0.0, 0.999);
        Ok(Self { ops: correction_round(assumed), options })
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Branch-summed, frame-resolved round on a raw 16x16 matrix.
    pub(crate) fn apply_raw(&self, rho: &Matrix) -> (Matrix, Vec<BranchWeight>) {
        let mut sum = Matrix::zeros(DIM, DIM);
        let mut weights = Vec::new();
        for mut leaf in run_on_data(&self.ops, rho, self.options.p_gate) {
            weights.push(BranchWeight {
                syndrome: leaf.syndrome,
                branch: leaf.branch,
                probability: leaf.state.trace().re,
            });
            engine::apply_frame(&mut leaf.state, leaf.frame, DATA_QUBITS);
            sum += leaf.state;
        }
        (sum, weights)
    }

    /// One sampled round on a normalized 4-qubit state vector. The returned
    /// vector is frame-resolved.
    pub fn sample<R: Rng + ?Sized>(&self, psi: &DVector<C64>, rng: &mut R) -> (DVector<C64>, Branch) {
        let leaf = engine::run_sampled(&self.ops, engine::with_ancilla_vec(psi), REGISTER, self.options.p_gate, rng);
        let mut full = leaf.state;
        let a = engine::sample_measure(&mut full, ANCILLA, REGISTER, rng) as usize;
        let mut data = DVector::from_iterator(DIM, (0..DIM).map(|i| full[2 * i + a]));
        engine::apply_frame_vec(&mut data, leaf.frame, DATA_QUBITS);
        (data, leaf.branch)
    }
}

/// Syndrome measurement followed by the matching corrector, summed over
/// branches (deterministic mode).
pub fn full_correction(rho: &DensityMatrix, p: f64, options: CorrectionOptions) -> Result<CorrectionReport> {
    check_data_state(rho)?;
    let corrector = Corrector::new(p, options)?;
    let (state, branches) = corrector.apply_raw(rho.matrix());
    Ok(CorrectionReport { state: DensityMatrix::from_raw(state), branches })
}

#[cfg(test)]
mod tests;
