use super::*;
use crate::channels::{amplitude_damping_with_probability, apply, damping_operator};
use rand::SeedableRng;

fn logical(alpha: f64, phase: f64) -> PureState {
    let beta = (1.0 - alpha * alpha).sqrt();
    CodeSpec::new().encode(c(alpha), C64::from_polar(beta, phase)).unwrap()
}

fn damped_branch(psi: &PureState, p: f64, pattern: usize) -> DensityMatrix {
    let v = psi.apply(&damping_operator(p, 4, pattern)).unwrap();
    let rho = &v * v.adjoint();
    let tr = rho.trace().re;
    DensityMatrix::from_raw(rho.unscale(tr))
}

#[test]
fn codewords_are_stabilized() {
    let code = CodeSpec::new();
    for s in &code.stabilizers {
        for w in [&code.zero, &code.one] {
            let v = w.apply(s).unwrap();
            assert!((v - w.amplitudes()).norm() < 1e-14);
        }
    }
}

#[test]
fn logical_operators_act_on_codewords() {
    let code = CodeSpec::new();
    let x0 = code.zero.apply(&code.logical_x).unwrap();
    assert!((x0 - code.one.amplitudes()).norm() < 1e-14);
    let z1 = code.one.apply(&code.logical_z).unwrap();
    assert!((z1 + code.one.amplitudes()).norm() < 1e-14);
    let frame = PauliFrame::logical_z().to_operator(4).unwrap();
    assert!(frame.approx_eq(&code.logical_z, 1e-14));
    assert_eq!(PauliFrame::logical_z().to_string(), "XXII");
}

#[test]
fn syndromes_of_first_order_damage() {
    let psi = logical(0.6, 0.3);
    let cases = [(0b0000, (0, 0)), (0b1000, (1, 0)), (0b0100, (1, 0)), (0b0010, (0, 1)), (0b0001, (0, 1))];
    for (pattern, want) in cases {
        let rho = damped_branch(&psi, 0.05, pattern);
        let out = extract_syndrome(&rho).unwrap();
        let hit = out.iter().find(|o| (o.b1, o.b2) == want).unwrap();
        assert!((hit.probability - 1.0).abs() < 1e-12, "pattern {pattern:04b}");
    }
}

#[test]
fn no_decay_branch_restores_to_second_order() {
    for p in [0.01, 0.05] {
        let psi = logical(0.8, 1.1);
        let out = correct_no_decay(&damped_branch(&psi, p, 0), p).unwrap();
        let f = out.fidelity_with_pure(&psi).unwrap();
        assert!(1.0 - f < 2.0 * p * p, "p={p}: infidelity {}", 1.0 - f);
    }
}

#[test]
fn single_decay_branch_is_recovered() {
    let p = 0.05;
    let psi = logical(0.3, -0.7);
    for (pattern, side) in [(0b1000, Side::Q12), (0b0100, Side::Q12), (0b0010, Side::Q34), (0b0001, Side::Q34)] {
        let outcomes = correct_single_decay(&damped_branch(&psi, p, pattern), side, p).unwrap();
        let ok = outcomes.iter().find(|o| o.branch == side.branch()).unwrap();
        assert_eq!(ok.pauli_frame, PauliFrame::logical_z());
        let f = frame_resolve(ok).fidelity_with_pure(&psi).unwrap();
        assert!(f > 1.0 - 1e-10, "pattern {pattern:04b}: fidelity {f}");
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(ok.duration > 0.0);
    }
}

#[test]
fn wrong_branch_is_a_contract_error() {
    let psi = logical(1.0, 0.0);
    let rho = damped_branch(&psi, 0.05, 0b1000);
    assert!(matches!(correct_no_decay(&rho, 0.05), Err(Error::Contract(_))));
    assert!(matches!(correct_single_decay(&rho, Side::Q34, 0.05), Err(Error::Contract(_))));
}

#[test]
fn full_round_preserves_trace_and_suppresses_error() {
    let p = 0.02;
    let psi = logical(0.6, 0.4);
    let damped = apply(&amplitude_damping_with_probability(p, 4).unwrap(), &psi.density()).unwrap();
    let report = full_correction(&damped, p, CorrectionOptions::default()).unwrap();
    assert!((report.state.trace() - 1.0).abs() < 1e-12);
    let f = report.state.fidelity_with_pure(&psi).unwrap();
    assert!(1.0 - f < 5.0 * p * p, "infidelity {}", 1.0 - f);
    assert!(report.probability_of(Branch::NoDecay) > 0.9);
    let abort = report.probability_of(Branch::FilterAbort);
    assert!(abort > 0.0 && abort < 2.0 * p * p);
}

#[test]
fn gate_noise_keeps_round_trace_preserving() {
    let psi = logical(0.6, 0.4);
    let report = full_correction(&psi.density(), 0.01, CorrectionOptions { p_gate: 0.01, delta_p: 0.0 }).unwrap();
    assert!((report.state.trace() - 1.0).abs() < 1e-12);
    assert!(report.state.is_valid(1e-9, true));
}

#[test]
fn sampled_round_matches_branch_sum() {
    let p = 0.05;
    let psi = logical(0.6, 0.4);
    let opts = CorrectionOptions { p_gate: 0.02, delta_p: 0.0 };
    let corrector = Corrector::new(p, opts).unwrap();
    let exact = full_correction(&psi.density(), p, opts).unwrap().state.fidelity_with_pure(&psi).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let n = 4000;
    let mean: f64 =
        (0..n).map(|_| corrector.sample(psi.amplitudes(), &mut rng).0.dotc(psi.amplitudes()).norm_sqr()).sum::<f64>()
            / n as f64;
    let sigma = (exact * (1.0 - exact) / n as f64).sqrt().max(1e-3);
    assert!((mean - exact).abs() < 4.0 * sigma, "sampled {mean} vs exact {exact}");
}
