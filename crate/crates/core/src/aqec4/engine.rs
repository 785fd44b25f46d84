//! Interpreters for correction gate trees.
//!
//! `run_branches` sums over every measurement outcome on a density matrix
//! (unnormalized branches, exact). `run_sampled` follows one trajectory on a
//! state vector, drawing measurement outcomes and gate faults from `rng`.
//! Both charge the same fault locations: depolarizing noise on the targets
//! after each gate, one single-qubit fault after each reset and one before
//! each measurement.

use nalgebra::DVector;
use rand::Rng;

use super::circuit::{Gate, Op};
use super::{Branch, PauliFrame};
use crate::channels::depolarize_in_place;
use crate::qstate::{apply_local_vec, bit_of, c, conjugate_local, gates, Matrix, C64, ZERO};

pub(crate) fn gate_matrix(gate: &Gate) -> Matrix {
    match *gate {
        Gate::H(_) => gates::hadamard().into_matrix(),
        Gate::X(_) => gates::pauli_x().into_matrix(),
        Gate::Ry(_, a) => gates::ry(a).into_matrix(),
        Gate::Cnot(..) => gates::cnot().into_matrix(),
        Gate::Cz(..) => gates::cz().into_matrix(),
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Leaf<S> {
    pub syndrome: (u8, u8),
    pub branch: Branch,
    pub frame: PauliFrame,
    pub state: S,
}

#[derive(Clone, Copy)]
struct PathInfo {
    syndrome: (u8, u8),
    branch: Branch,
    frame: PauliFrame,
}

const START: PathInfo = PathInfo { syndrome: (0, 0), branch: Branch::NoDecay, frame: PauliFrame::IDENTITY };

/// Branches whose weight falls below this are dropped from the sum.
const NEGLIGIBLE: f64 = 1e-30;

fn reset_in_place(rho: &mut Matrix, q: usize, n: usize) {
    let dim = rho.nrows();
    let bit = 1 << bit_of(q, n);
    for i in (0..dim).filter(|i| i & bit == 0) {
        for j in (0..dim).filter(|j| j & bit == 0) {
            let v = rho[(i, j)] + rho[(i | bit, j | bit)];
            rho[(i, j)] = v;
            rho[(i | bit, j)] = ZERO;
            rho[(i, j | bit)] = ZERO;
            rho[(i | bit, j | bit)] = ZERO;
        }
    }
}

fn project_in_place(rho: &mut Matrix, q: usize, n: usize, outcome: u8) {
    let dim = rho.nrows();
    let bit = 1 << bit_of(q, n);
    let keep = |i: usize| ((i & bit != 0) as u8) == outcome;
    for i in 0..dim {
        for j in 0..dim {
            if !(keep(i) && keep(j)) {
                rho[(i, j)] = ZERO;
            }
        }
    }
}

/// Conjugates `rho` by the frame Pauli on the data qubits.
pub(crate) fn apply_frame(rho: &mut Matrix, frame: PauliFrame, n: usize) {
    for (q, m) in frame.factors() {
        conjugate_local(rho, &m, &[q], n);
    }
}

pub(crate) fn apply_frame_vec(psi: &mut DVector<C64>, frame: PauliFrame, n: usize) {
    for (q, m) in frame.factors() {
        apply_local_vec(psi, &m, &[q], n);
    }
}

/// Runs the tree on an `n`-qubit density matrix, summing every outcome.
pub(crate) fn run_branches(ops: &[Op], rho: Matrix, n: usize, p_gate: f64) -> Vec<Leaf<Matrix>> {
    let mut leaves = Vec::new();
    run_dm(ops, rho, n, p_gate, START, &mut leaves);
    leaves
}

fn run_dm(ops: &[Op], mut rho: Matrix, n: usize, p_gate: f64, mut info: PathInfo, out: &mut Vec<Leaf<Matrix>>) {
    for op in ops {
        match op {
            Op::Gate(gate) => {
                let targets = gate.targets();
                conjugate_local(&mut rho, &gate_matrix(gate), &targets, n);
                depolarize_in_place(&mut rho, p_gate, &targets, n);
            }
            Op::Reset(q) => {
                reset_in_place(&mut rho, *q, n);
                depolarize_in_place(&mut rho, p_gate, &[*q], n);
            }
            Op::Syndrome(a, b) => info.syndrome = (*a, *b),
            Op::Tag(b) => info.branch = *b,
            Op::Frame(f) => info.frame = info.frame.compose(f),
            Op::Measure { qubit, branches } => {
                depolarize_in_place(&mut rho, p_gate, &[*qubit], n);
                for (outcome, rest) in branches.iter().enumerate() {
                    let mut part = rho.clone();
                    project_in_place(&mut part, *qubit, n, outcome as u8);
                    // entry test rather than trace: superoperator columns are not positive
                    if part.iter().any(|z| z.norm_sqr() > NEGLIGIBLE * NEGLIGIBLE) {
                        run_dm(rest, part, n, p_gate, info, out);
                    }
                }
                return;
            }
        }
    }
    out.push(Leaf { syndrome: info.syndrome, branch: info.branch, frame: info.frame, state: rho });
}

fn random_pauli<R: Rng + ?Sized>(psi: &mut DVector<C64>, targets: &[usize], n: usize, rng: &mut R) {
    let k = targets.len();
    let code = rng.gen_range(1..4usize.pow(k as u32));
    for (pos, &q) in targets.iter().enumerate() {
        let m = match (code >> (2 * (k - 1 - pos))) & 3 {
            0 => continue,
            1 => gates::pauli_x(),
            2 => gates::pauli_y(),
            _ => gates::pauli_z(),
        };
        apply_local_vec(psi, m.matrix(), &[q], n);
    }
}

fn maybe_fault<R: Rng + ?Sized>(psi: &mut DVector<C64>, p_gate: f64, targets: &[usize], n: usize, rng: &mut R) {
    if p_gate > 0.0 && rng.gen::<f64>() < p_gate {
        random_pauli(psi, targets, n, rng);
    }
}

/// Projective Z measurement of `q`, sampled; leaves `psi` normalized.
pub(crate) fn sample_measure<R: Rng + ?Sized>(psi: &mut DVector<C64>, q: usize, n: usize, rng: &mut R) -> u8 {
    let bit = 1 << bit_of(q, n);
    let p1: f64 = psi.iter().enumerate().filter(|(i, _)| i & bit != 0).map(|(_, a)| a.norm_sqr()).sum();
    let total = psi.norm_squared();
    let outcome = (rng.gen::<f64>() * total < p1) as u8;
    for (i, a) in psi.iter_mut().enumerate() {
        if ((i & bit != 0) as u8) != outcome {
            *a = ZERO;
        }
    }
    let norm = psi.norm();
    psi.unscale_mut(norm);
    outcome
}

/// Follows one sampled path through the tree.
pub(crate) fn run_sampled<R: Rng + ?Sized>(
    ops: &[Op],
    mut psi: DVector<C64>,
    n: usize,
    p_gate: f64,
    rng: &mut R,
) -> Leaf<DVector<C64>> {
    let mut info = START;
    let mut block = ops;
    'outer: loop {
        for op in block {
            match op {
                Op::Gate(gate) => {
                    let targets = gate.targets();
                    apply_local_vec(&mut psi, &gate_matrix(gate), &targets, n);
                    maybe_fault(&mut psi, p_gate, &targets, n, rng);
                }
                Op::Reset(q) => {
                    if sample_measure(&mut psi, *q, n, rng) == 1 {
                        apply_local_vec(&mut psi, gates::pauli_x().matrix(), &[*q], n);
                    }
                    maybe_fault(&mut psi, p_gate, &[*q], n, rng);
                }
                Op::Syndrome(a, b) => info.syndrome = (*a, *b),
                Op::Tag(b) => info.branch = *b,
                Op::Frame(f) => info.frame = info.frame.compose(f),
                Op::Measure { qubit, branches } => {
                    maybe_fault(&mut psi, p_gate, &[*qubit], n, rng);
                    let outcome = sample_measure(&mut psi, *qubit, n, rng);
                    block = &branches[outcome as usize];
                    continue 'outer;
                }
            }
        }
        break;
    }
    Leaf { syndrome: info.syndrome, branch: info.branch, frame: info.frame, state: psi }
}

/// `|psi><psi|` lifted with an ancilla in `|0>` appended as the last qubit.
pub(crate) fn with_ancilla(rho: &Matrix) -> Matrix {
    let mut zero = Matrix::zeros(2, 2);
    zero[(0, 0)] = c(1.0);
    rho.kronecker(&zero)
}

pub(crate) fn with_ancilla_vec(psi: &DVector<C64>) -> DVector<C64> {
    psi.kronecker(&DVector::from_vec(vec![c(1.0), ZERO]))
}
