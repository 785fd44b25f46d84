//! Kraus-form quantum operations: amplitude damping, depolarizing gate noise,
//! application and composition.

use crate::error::{arg, Result};
use crate::qstate::{c, conjugate_local, embed, gates, ComplexOperator, DensityMatrix, Matrix, MAX_QUBITS};

/// Whether `sum K^dagger K` equals the identity or is merely bounded by it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    TracePreserving,
    Selective,
}

/// Construction record kept so derived channels can be checked against their source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    /// Product amplitude damping on `n` qubits with per-qubit decay probability `p`.
    AmplitudeDamping {
        n: usize,
        p: f64,
    },
    Depolarizing {
        p_gate: f64,
    },
    Composite,
    Custom,
}

#[derive(Clone, Debug)]
pub struct KrausChannel {
    operators: Vec<ComplexOperator>,
    /// Decay pattern `s` of each operator for damping channels (bit of qubit 0 is the most significant).
    patterns: Vec<usize>,
    label: String,
    kind: ChannelKind,
    provenance: Provenance,
}

impl KrausChannel {
    /// Builds a channel from arbitrary operators, checking the completeness relation.
    pub fn new(operators: Vec<ComplexOperator>, label: impl Into<String>, kind: ChannelKind) -> Result<Self> {
        let Some(first) = operators.first() else {
            return arg("a channel needs at least one Kraus operator");
        };
        let dim = first.dim();
        if operators.iter().any(|k| k.dim() != dim) {
            return arg("Kraus operators have different dimensions");
        }
        let ch = Self {
            patterns: (0..operators.len()).collect(),
            operators,
            label: label.into(),
            kind,
            provenance: Provenance::Custom,
        };
        let deficit = Matrix::identity(dim, dim) - ch.completeness();
        match kind {
            ChannelKind::TracePreserving => {
                if deficit.iter().any(|z| z.norm() > 1e-9) {
                    return arg("Kraus operators do not sum to the identity");
                }
            }
            ChannelKind::Selective => {
                let min = nalgebra::SymmetricEigen::new(deficit).eigenvalues.min();
                if min < -1e-9 {
                    return arg("Kraus operators exceed the identity (trace-increasing)");
                }
            }
        }
        Ok(ch)
    }

    pub fn operators(&self) -> &[ComplexOperator] {
        &self.operators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Decay patterns of the operators (only meaningful for damping channels).
    pub fn patterns(&self) -> &[usize] {
        &self.patterns
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `sum_k K_k^dagger K_k`.
    pub fn completeness(&self) -> Matrix {
        let d = self.dim();
        self.operators.iter().fold(Matrix::zeros(d, d), |acc, k| acc + k.matrix().adjoint() * k.matrix())
    }

    /// Row-major superoperator `sum_k K (x) conj(K)`.
    pub fn superoperator(&self) -> Matrix {
        let d = self.dim();
        self.operators
            .iter()
            .fold(Matrix::zeros(d * d, d * d), |acc, k| acc + k.matrix().kronecker(&k.matrix().map(|z| z.conj())))
    }
}

/// Relaxation parameters of a correction interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingParams {
    pub gamma: f64,
    pub tau_ec: f64,
}

impl DampingParams {
    pub fn new(gamma: f64, tau_ec: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return arg(format!("decay rate must be non-negative, got {gamma}"));
        }
        if !(tau_ec > 0.0 && tau_ec.is_finite()) {
            return arg(format!("correction interval must be positive, got {tau_ec}"));
        }
        Ok(Self { gamma, tau_ec })
    }

    /// Per-qubit decay probability `1 - exp(-gamma tau)`.
    pub fn p(&self) -> f64 {
        -(-self.gamma * self.tau_ec).exp_m1()
    }
}

fn damping_single(p: f64, decayed: bool) -> ComplexOperator {
    if decayed {
        gates::sigma_minus().scale(p.sqrt())
    } else {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = c(1.0);
        m[(1, 1)] = c((1.0 - p).sqrt());
        ComplexOperator::from_matrix(m)
    }
}

/// `K_s = K_{s_0} (x) ... (x) K_{s_{n-1}}` for the decay pattern `s`.
pub fn damping_operator(p: f64, n: usize, pattern: usize) -> ComplexOperator {
    (0..n).map(|q| damping_single(p, (pattern >> (n - 1 - q)) & 1 == 1)).reduce(|acc, k| acc.kron(&k)).expect("n >= 1")
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return arg(format!("{what} must lie in [0, 1], got {p}"));
    }
    Ok(())
}

/// Product amplitude damping with decay probability `p` on each of `n` qubits.
///
/// Operators that vanish identically (every decaying pattern at `p = 0`, every
/// surviving excitation at `p = 1`) are dropped.
pub fn amplitude_damping_with_probability(p: f64, n: usize) -> Result<KrausChannel> {
    check_probability(p, "decay probability")?;
    if n == 0 || n > MAX_QUBITS {
        return arg(format!("damping register size {n} outside 1..={MAX_QUBITS}"));
    }
    let (operators, patterns): (Vec<_>, Vec<_>) = (0..1usize << n)
        .filter(|&s| p > 0.0 || s == 0)
        .map(|s| (damping_operator(p, n, s), s))
        .filter(|(k, _)| k.matrix().iter().any(|z| z.norm() > 0.0))
        .unzip();
    Ok(KrausChannel {
        operators,
        patterns,
        label: format!("amplitude damping p={p} on {n} qubits"),
        kind: ChannelKind::TracePreserving,
        provenance: Provenance::AmplitudeDamping { n, p },
    })
}

pub fn amplitude_damping(params: DampingParams, n: usize) -> Result<KrausChannel> {
    amplitude_damping_with_probability(params.p(), n)
}

/// Decay patterns with at most one decay on four qubits, no-decay first.
pub const FIRST_ORDER_PATTERNS: [usize; 5] = [0b0000, 0b1000, 0b0100, 0b0010, 0b0001];

/// The five weight-at-most-one operators of the four-qubit damping channel.
pub fn first_order_operators(channel: &KrausChannel) -> Result<KrausChannel> {
    let p = match channel.provenance {
        Provenance::AmplitudeDamping { n: 4, p } => p,
        other => return arg(format!("first-order truncation needs a 4-qubit damping channel, got {other:?}")),
    };
    Ok(KrausChannel {
        operators: FIRST_ORDER_PATTERNS.iter().map(|&s| damping_operator(p, 4, s)).collect(),
        patterns: FIRST_ORDER_PATTERNS.to_vec(),
        label: format!("first-order damping p={p}"),
        kind: ChannelKind::Selective,
        provenance: channel.provenance,
    })
}

fn pauli(idx: usize) -> ComplexOperator {
    match idx {
        0 => gates::identity(),
        1 => gates::pauli_x(),
        2 => gates::pauli_y(),
        _ => gates::pauli_z(),
    }
}

/// Non-identity Paulis on `k` targets (3 for one qubit, 15 for two).
pub(crate) fn nontrivial_paulis(k: usize) -> Vec<ComplexOperator> {
    (1..4usize.pow(k as u32))
        .map(|code| {
            (0..k).map(|pos| pauli((code >> (2 * (k - 1 - pos))) & 3)).reduce(|a, b| a.kron(&b)).expect("k >= 1")
        })
        .collect()
}

/// Depolarizing noise: identity with probability `1 - p_gate`, otherwise a
/// uniformly chosen non-identity Pauli on the targets.
pub fn depolarizing(p_gate: f64, targets: &[usize], n: usize) -> Result<KrausChannel> {
    check_probability(p_gate, "gate error probability")?;
    if targets.is_empty() || targets.len() > 2 {
        return arg(format!("depolarizing noise acts on 1 or 2 qubits, got {}", targets.len()));
    }
    let paulis = nontrivial_paulis(targets.len());
    let w = (p_gate / paulis.len() as f64).sqrt();
    let mut operators =
        vec![embed(&ComplexOperator::identity(targets.len()), targets, n)?.scale((1.0 - p_gate).sqrt())];
    for p in &paulis {
        operators.push(embed(p, targets, n)?.scale(w));
    }
    Ok(KrausChannel {
        patterns: (0..operators.len()).collect(),
        operators,
        label: format!("depolarizing p={p_gate} on {targets:?}"),
        kind: ChannelKind::TracePreserving,
        provenance: Provenance::Depolarizing { p_gate },
    })
}

/// `sum_k K rho K^dagger`. Selective channels yield an unnormalized branch.
pub fn apply(channel: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if channel.dim() != rho.dim() {
        return arg(format!("channel dimension {} differs from state dimension {}", channel.dim(), rho.dim()));
    }
    let d = rho.dim();
    let out = channel
        .operators
        .iter()
        .fold(Matrix::zeros(d, d), |acc, k| acc + k.matrix() * rho.matrix() * k.matrix().adjoint());
    Ok(DensityMatrix::from_raw(out))
}

/// The channel `outer` applied after `inner`.
pub fn compose(outer: &KrausChannel, inner: &KrausChannel) -> Result<KrausChannel> {
    if outer.dim() != inner.dim() {
        return arg("cannot compose channels of different dimension");
    }
    let operators: Vec<_> = outer
        .operators
        .iter()
        .flat_map(|a| inner.operators.iter().map(move |b| ComplexOperator::from_matrix(a.matrix() * b.matrix())))
        .collect();
    let kind = if outer.kind == ChannelKind::TracePreserving && inner.kind == ChannelKind::TracePreserving {
        ChannelKind::TracePreserving
    } else {
        ChannelKind::Selective
    };
    Ok(KrausChannel {
        patterns: (0..operators.len()).collect(),
        operators,
        label: format!("{} . {}", outer.label, inner.label),
        kind,
        provenance: Provenance::Composite,
    })
}

/// In-place single-qubit amplitude damping on each of `qubits`.
pub(crate) fn damp_in_place(rho: &mut Matrix, p: f64, qubits: &[usize], n: usize) {
    if p == 0.0 {
        return;
    }
    let k0 = damping_single(p, false);
    let k1 = damping_single(p, true);
    for &q in qubits {
        let mut a = rho.clone();
        conjugate_local(&mut a, k1.matrix(), &[q], n);
        conjugate_local(rho, k0.matrix(), &[q], n);
        *rho += a;
    }
}

/// In-place depolarizing channel on one or two targets.
///
/// Uses `sum_P P rho P = 2^k tr_T(rho) (x) I_T` over all `4^k` Paulis, so the
/// non-identity part is a partial trace minus the identity term.
pub(crate) fn depolarize_in_place(rho: &mut Matrix, p_gate: f64, targets: &[usize], n: usize) {
    if p_gate == 0.0 {
        return;
    }
    let d = 4f64.powi(targets.len() as i32);
    let w = p_gate * d / (d - 1.0);
    let twirled = twirl(rho, targets, n);
    *rho *= c(1.0 - w);
    *rho += twirled.scale(w);
}

/// `tr_T(rho) (x) I_T / 2^k`, keeping the qubit order of `rho`.
fn twirl(rho: &Matrix, targets: &[usize], n: usize) -> Matrix {
    let dim = rho.nrows();
    let mask = targets.iter().fold(0usize, |m, &t| m | (1 << (n - 1 - t)));
    let k = targets.len();
    let subs: Vec<usize> = (0..dim).filter(|s| s & !mask == 0).collect();
    let mut out = Matrix::zeros(dim, dim);
    let norm = 1.0 / (1 << k) as f64;
    for i in (0..dim).filter(|i| i & mask == 0) {
        for j in (0..dim).filter(|j| j & mask == 0) {
            let v: crate::qstate::C64 = subs.iter().map(|&s| rho[(i | s, j | s)]).sum::<crate::qstate::C64>() * norm;
            for &s in &subs {
                out[(i | s, j | s)] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{PureState, C64};

    fn codeword_zero() -> PureState {
        let mut v = nalgebra::DVector::from_element(16, C64::new(0.0, 0.0));
        for idx in [0b0000, 0b0011, 0b1100, 0b1111] {
            v[idx] = C64::new(0.5, 0.0);
        }
        PureState::new(v).unwrap()
    }

    #[test]
    fn zero_decay_is_a_single_identity() {
        let ch = amplitude_damping(DampingParams::new(0.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(ch.len(), 1);
        assert!(ch.operators()[0].approx_eq(&ComplexOperator::identity(3), 0.0));
    }

    #[test]
    fn full_decay_empties_the_excited_state() {
        let ch = amplitude_damping_with_probability(1.0, 1).unwrap();
        let out = apply(&ch, &PureState::basis(&[1]).density()).unwrap();
        assert!((out.fidelity_with_pure(&PureState::basis(&[0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn damping_params_use_exact_probability() {
        let d = DampingParams::new(2.0, 0.05).unwrap();
        assert!((d.p() - (1.0 - (-0.1f64).exp())).abs() < 1e-16);
        assert!(DampingParams::new(-1.0, 1.0).is_err());
        assert!(DampingParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn damping_register_size_checked() {
        assert!(amplitude_damping_with_probability(0.1, 0).is_err());
        assert!(amplitude_damping_with_probability(0.1, 6).is_err());
    }

    #[test]
    fn second_order_weight_on_codeword_is_small() {
        // oracle: enumerate all 16 operators and sum weight of |s| >= 2
        let p = 0.01;
        let ch = amplitude_damping_with_probability(p, 4).unwrap();
        let rho = codeword_zero().density();
        let heavy: f64 = ch
            .operators()
            .iter()
            .zip(ch.patterns())
            .filter(|(_, s)| s.count_ones() >= 2)
            .map(|(k, _)| rho.conjugate(k).unwrap().trace())
            .sum();
        assert!(heavy > 0.0 && heavy <= 6.0 * p * p, "weight {heavy}");
    }

    #[test]
    fn first_order_has_five_operators() {
        for p in [0.0, 0.01, 0.3] {
            let ch = amplitude_damping_with_probability(p, 4).unwrap();
            let fo = first_order_operators(&ch).unwrap();
            assert_eq!(fo.len(), 5);
            assert_eq!(fo.kind(), ChannelKind::Selective);
        }
        let fo = first_order_operators(&amplitude_damping_with_probability(0.0, 4).unwrap()).unwrap();
        assert!(fo.operators()[0].approx_eq(&ComplexOperator::identity(4), 0.0));
        assert!(fo.operators()[1..].iter().all(|k| k.matrix().iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn first_order_discarded_weight() {
        let p = 0.04;
        let ch = amplitude_damping_with_probability(p, 4).unwrap();
        let rho = codeword_zero().density();
        // full-channel oracle: weight of every pattern of Hamming weight >= 2
        let oracle: f64 = (0..16usize)
            .filter(|s| s.count_ones() >= 2)
            .map(|s| rho.conjugate(&damping_operator(p, 4, s)).unwrap().trace())
            .sum();
        let kept = apply(&first_order_operators(&ch).unwrap(), &rho).unwrap().trace();
        let discarded = 1.0 - kept;
        assert!((discarded - oracle).abs() < 1e-14);
        assert!(discarded > 0.0 && discarded <= 6.0 * p * p);
    }

    #[test]
    fn first_order_rejects_wrong_provenance() {
        let ch = amplitude_damping_with_probability(0.1, 3).unwrap();
        assert!(first_order_operators(&ch).is_err());
        let dep = depolarizing(0.1, &[0], 4).unwrap();
        assert!(first_order_operators(&dep).is_err());
    }

    #[test]
    fn depolarizing_zero_is_identity() {
        let ch = depolarizing(0.0, &[0, 1], 2).unwrap();
        let rho = PureState::plus().kron(&PureState::basis(&[1])).density();
        let out = apply(&ch, &rho).unwrap();
        assert!((out.matrix() - rho.matrix()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn full_single_qubit_depolarizing_on_ground_state() {
        let ch = depolarizing(1.0, &[0], 1).unwrap();
        let out = apply(&ch, &PureState::basis(&[0]).density()).unwrap();
        // oracle: (X|0><0|X + Y|0><0|Y + Z|0><0|Z)/3 = (|0><0| + 2|1><1|)/3
        let m = out.matrix();
        assert!((m[(0, 0)].re - 1.0 / 3.0).abs() < 1e-15);
        assert!((m[(1, 1)].re - 2.0 / 3.0).abs() < 1e-15);
        assert!(m[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn two_qubit_depolarizing_is_unital() {
        let ch = depolarizing(0.37, &[2, 0], 3).unwrap();
        assert_eq!(ch.len(), 16);
        let mixed = DensityMatrix::maximally_mixed(3);
        let out = apply(&ch, &mixed).unwrap();
        assert!((out.matrix() - mixed.matrix()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn depolarizing_rejects_bad_input() {
        assert!(depolarizing(0.1, &[], 2).is_err());
        assert!(depolarizing(0.1, &[0, 1, 2], 3).is_err());
        assert!(depolarizing(0.1, &[0, 0], 3).is_err());
        assert!(depolarizing(1.5, &[0], 3).is_err());
    }

    #[test]
    fn damped_plus_coherence() {
        let p = 0.2;
        let ch = amplitude_damping_with_probability(p, 1).unwrap();
        let out = apply(&ch, &PureState::plus().density()).unwrap();
        assert!((out.matrix()[(0, 1)].re - (1.0 - p).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn identity_channel_and_dimension_mismatch() {
        let id = KrausChannel::new(vec![ComplexOperator::identity(1)], "id", ChannelKind::TracePreserving).unwrap();
        let rho = PureState::plus().density();
        assert_eq!(apply(&id, &rho).unwrap().matrix(), rho.matrix());
        assert!(apply(&id, &DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn constructor_checks_completeness() {
        let half = ComplexOperator::identity(1).scale(0.5);
        assert!(KrausChannel::new(vec![half.clone()], "x", ChannelKind::TracePreserving).is_err());
        assert!(KrausChannel::new(vec![half], "x", ChannelKind::Selective).is_ok());
        let double = ComplexOperator::identity(1).scale(2.0);
        assert!(KrausChannel::new(vec![double], "x", ChannelKind::Selective).is_err());
    }

    #[test]
    fn in_place_helpers_match_kraus_application() {
        let rho = crate::qstate::PureState::normalized(nalgebra::DVector::from_fn(8, |i, _| {
            C64::new((i as f64).cos(), (2.0 * i as f64).sin())
        }))
        .unwrap()
        .density();
        let mut m = rho.matrix().clone();
        damp_in_place(&mut m, 0.3, &[0, 1, 2], 3);
        let want = apply(&amplitude_damping_with_probability(0.3, 3).unwrap(), &rho).unwrap();
        assert!((&m - want.matrix()).iter().all(|z| z.norm() < 1e-14));

        let mut m = rho.matrix().clone();
        depolarize_in_place(&mut m, 0.2, &[2, 1], 3);
        let want = apply(&depolarizing(0.2, &[2, 1], 3).unwrap(), &rho).unwrap();
        assert!((&m - want.matrix()).iter().all(|z| z.norm() < 1e-14));
    }
}
