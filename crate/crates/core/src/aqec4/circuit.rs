//! Correction circuits as classically controlled gate trees.
//!
//! Register layout: data qubits 0..=3 (code qubits 1..=4 in the usual
//! 1-based labels) and one ancilla, qubit 4, reused for every parity check.
//!
//! Every branch is built from `H`, `X`, `Ry`, `CNOT`, reset and
//! ancilla measurement. Controlled rotations use the two-CNOT identity
//! `CNOT . Ry(a) . CNOT . Ry(a)`, which rotates the target by `Ry(2a)` when the
//! control is `|0>` and leaves it alone when the control is `|1>`.
//!
//! Conditional Pauli table (applied as a frame, never as a gate):
//!
//! | syndrome | filter | frame |
//! |----------|--------|-------|
//! | (0,0)    | -      | I     |
//! | (1,0)    | even   | Zbar = X1 X2 |
//! | (0,1)    | even   | Zbar = X1 X2 |
//! | (1,0)/(0,1) | odd (abort) | I |
//! | (1,1)    | -      | I     |
//!
//! The single-decay frame replaces the `X3X4` (or `X1X2`) coherence flip on the
//! surviving pair: commuted through the re-encoder it becomes a logical `Zbar`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use super::{Branch, PauliFrame};

pub const ANCILLA: usize = 4;
pub const REGISTER: usize = 5;

/// Elementary unitary gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    /// `exp(-i angle Y / 2)`.
    Ry(usize, f64),
    /// `Cnot(control, target)`.
    Cnot(usize, usize),
    /// Controlled phase (symmetric).
    Cz(usize, usize),
}

impl Gate {
    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Ry(q, _) => vec![q],
            Gate::Cnot(c, t) | Gate::Cz(c, t) => vec![c, t],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot(..) | Gate::Cz(..))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Gate(Gate),
    /// Trace out the qubit and replace it with `|0>`.
    Reset(usize),
    /// Z-basis measurement; the rest of the circuit continues in `branches[outcome]`.
    Measure {
        qubit: usize,
        branches: Box<[Vec<Op>; 2]>,
    },
    /// Records the syndrome bits of the current path.
    Syndrome(u8, u8),
    /// Records which corrector handled the path.
    Tag(Branch),
    /// Records a Pauli frame update for the path.
    Frame(PauliFrame),
}

/// Rotation angle of the damaged no-decay component in span{|0000>, |1111>}.
pub fn theta(p: f64) -> f64 {
    ((1.0 - p) * (1.0 - p)).atan()
}

/// Filter angle transferring part of the `|00>` amplitude to odd parity.
pub fn phi(p: f64) -> f64 {
    (1.0 - p).clamp(-1.0, 1.0).acos()
}

fn g(gate: Gate) -> Op {
    Op::Gate(gate)
}

fn measure(qubit: usize, zero: Vec<Op>, one: Vec<Op>) -> Op {
    Op::Measure { qubit, branches: Box::new([zero, one]) }
}

/// Rotates `target` by `Ry(2 half_angle)` when `control` is `|0>`.
fn controlled_on_zero_ry(control: usize, target: usize, half_angle: f64) -> Vec<Op> {
    vec![
        g(Gate::Cnot(control, target)),
        g(Gate::Ry(target, half_angle)),
        g(Gate::Cnot(control, target)),
        g(Gate::Ry(target, half_angle)),
    ]
}

/// Rotation restoring the `|0000>`/`|1111>` balance of the (0,0) branch.
pub fn no_decay_ops(p: f64) -> Vec<Op> {
    let delta = FRAC_PI_4 - theta(p);
    // fold each pair onto its inner qubit (1 and 2), then rotate |00> towards
    // |11> on that pair with a two-CNOT Givens rotation
    vec![
        Op::Tag(Branch::NoDecay),
        g(Gate::Cnot(1, 0)),
        g(Gate::Cnot(2, 3)),
        g(Gate::Ry(1, FRAC_PI_2)),
        g(Gate::Cnot(1, 2)),
        g(Gate::Ry(1, delta)),
        g(Gate::Ry(2, -delta)),
        g(Gate::Cnot(1, 2)),
        g(Gate::Ry(1, -FRAC_PI_2)),
        g(Gate::Cnot(2, 3)),
        g(Gate::Cnot(1, 0)),
    ]
}

/// Which pair of data qubits decayed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// Decay on qubit 1 or 2; logical information survives on qubits 3, 4.
    Q12,
    /// Decay on qubit 3 or 4; logical information survives on qubits 1, 2.
    Q34,
}

impl Side {
    pub fn branch(self) -> Branch {
        match self {
            Side::Q12 => Branch::DecayQ1orQ2,
            Side::Q34 => Branch::DecayQ3orQ4,
        }
    }
}

/// Filter on the surviving pair, reset of the decayed pair, re-encoding.
pub fn single_decay_ops(p: f64, side: Side) -> Vec<Op> {
    // (survivor_a, survivor_b, decayed_a, decayed_b); within each pair the
    // roles are interchangeable, so the inner qubits take the long CNOT
    let (sa, sb, da, db) = match side {
        Side::Q12 => (2, 3, 1, 0),
        Side::Q34 => (1, 0, 2, 3),
    };
    let mut ops = controlled_on_zero_ry(sb, sa, phi(p));
    let aborted = vec![Op::Tag(Branch::FilterAbort)];
    let success = vec![
        Op::Tag(side.branch()),
        Op::Reset(da),
        Op::Reset(db),
        Op::Frame(PauliFrame::logical_z()),
        // decode the surviving Bell pair onto `sa`
        g(Gate::Cnot(sa, sb)),
        // rebuild sum_{a,c} |a+c, a+c, a, a> (or mirrored) around it
        g(Gate::H(da)),
        g(Gate::Cnot(da, db)),
        g(Gate::Cnot(da, sa)),
        g(Gate::Cnot(sa, sb)),
    ];
    ops.extend([
        Op::Reset(ANCILLA),
        g(Gate::Cnot(sa, ANCILLA)),
        g(Gate::Cnot(sb, ANCILLA)),
        measure(ANCILLA, success, aborted),
    ]);
    ops
}

fn dispatch(p: f64, b1: u8, b2: u8) -> Vec<Op> {
    let mut ops = vec![Op::Syndrome(b1, b2)];
    match (b1, b2) {
        (0, 0) => ops.extend(no_decay_ops(p)),
        (1, 0) => ops.extend(single_decay_ops(p, Side::Q12)),
        (0, 1) => ops.extend(single_decay_ops(p, Side::Q34)),
        _ => ops.push(Op::Tag(Branch::Uncorrectable)),
    }
    ops
}

/// One full correction round: two ancilla parity checks and the four correctors.
/// The ancilla is left in its measured state; callers trace it out.
/// `p` is the decay probability assumed when computing rotation angles.
pub fn correction_round(p: f64) -> Vec<Op> {
    let second = |b1: u8| {
        vec![
            Op::Reset(ANCILLA),
            g(Gate::Cnot(2, ANCILLA)),
            g(Gate::Cnot(3, ANCILLA)),
            measure(ANCILLA, dispatch(p, b1, 0), dispatch(p, b1, 1)),
        ]
    };
    vec![
        Op::Reset(ANCILLA),
        g(Gate::Cnot(0, ANCILLA)),
        g(Gate::Cnot(1, ANCILLA)),
        measure(ANCILLA, second(0), second(1)),
    ]
}

/// Flattened step of one root-to-leaf path, as consumed by the timing accountant.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Gate(Gate),
    Reset(usize),
    Measure(usize),
}

/// A root-to-leaf path through a gate tree.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitPath {
    pub syndrome: Option<(u8, u8)>,
    pub branch: Option<Branch>,
    pub frame: PauliFrame,
    pub steps: Vec<Step>,
}

/// Enumerates every root-to-leaf path of a gate tree.
pub fn paths(ops: &[Op]) -> Vec<CircuitPath> {
    let mut out = Vec::new();
    walk(ops, CircuitPath { syndrome: None, branch: None, frame: PauliFrame::identity(), steps: vec![] }, &mut out);
    out
}

fn walk(ops: &[Op], mut path: CircuitPath, out: &mut Vec<CircuitPath>) {
    for (i, op) in ops.iter().enumerate() {
        match op {
            Op::Gate(gate) => path.steps.push(Step::Gate(*gate)),
            Op::Reset(q) => path.steps.push(Step::Reset(*q)),
            Op::Syndrome(a, b) => path.syndrome = Some((*a, *b)),
            Op::Tag(b) => path.branch = Some(*b),
            Op::Frame(f) => path.frame = path.frame.compose(f),
            Op::Measure { qubit, branches } => {
                debug_assert_eq!(i + 1, ops.len(), "measurement must end its block");
                path.steps.push(Step::Measure(*qubit));
                for b in branches.iter() {
                    walk(b, path.clone(), out);
                }
                return;
            }
        }
    }
    out.push(path);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_at_zero_decay() {
        assert!((theta(0.0) - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(phi(0.0), 0.0);
    }

    #[test]
    fn round_has_one_path_per_outcome() {
        let ps = paths(&correction_round(0.01));
        // (0,0), (1,1), and success/abort for each single-decay syndrome
        assert_eq!(ps.len(), 6);
        let branches: Vec<_> = ps.iter().map(|p| p.branch.unwrap()).collect();
        assert_eq!(branches.iter().filter(|b| **b == Branch::FilterAbort).count(), 2);
        assert!(branches.contains(&Branch::NoDecay));
        assert!(branches.contains(&Branch::Uncorrectable));
        for p in &ps {
            let expected = match p.branch.unwrap() {
                Branch::DecayQ1orQ2 | Branch::DecayQ3orQ4 => PauliFrame::logical_z(),
                _ => PauliFrame::identity(),
            };
            assert_eq!(p.frame, expected);
        }
    }

    #[test]
    fn gates_stay_on_register() {
        for p in paths(&correction_round(0.02)) {
            for s in &p.steps {
                if let Step::Gate(g) = s {
                    assert!(g.targets().iter().all(|&q| q < REGISTER));
                }
            }
        }
    }
}
