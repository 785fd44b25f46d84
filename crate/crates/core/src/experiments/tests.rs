use super::*;
use crate::channels::{amplitude_damping_with_probability, apply};

fn plus() -> (C64, C64) {
    plus_amplitudes()
}

#[test]
fn no_noise_keeps_fidelity_at_one() {
    for mode in [Mode::Deterministic, Mode::Trajectory] {
        let cfg = ExperimentConfig { gamma: 0.0, mode, n_runs: 20, total_time: 0.5, ..Default::default() };
        let s = run_cycles(&cfg, plus().0, plus().1, false).unwrap();
        assert!(s.values.iter().all(|f| (f - 1.0).abs() < 1e-12), "{mode:?}: {:?}", s.values);
    }
}

#[test]
fn unencoded_reference_values() {
    let s = unencoded_reference(1.0, &[0.0, 0.2, 1e4]).unwrap();
    assert_eq!(s.values[0], 1.0);
    assert!((s.values[1] - 0.5 * (1.0 + (-0.1f64).exp())).abs() < 1e-15);
    assert!((s.values[1] - 0.952419).abs() < 5e-7);
    assert!((s.values[2] - 0.5).abs() < 1e-15);
}

#[test]
fn exponential_fit_recovers_rate() {
    let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
    let values = times.iter().map(|t| (-0.03 * t).exp()).collect();
    let s = TimeSeries::new("synthetic", times, values, vec![]).unwrap();
    let f = fit_gamma_eff(&s, FitWindow::default()).unwrap();
    assert!((f.gamma_eff - 0.03).abs() < 1e-6);
    assert!(f.ci.0 <= 0.03 && 0.03 <= f.ci.1 + 1e-12);
}

#[test]
fn fit_needs_dynamic_range() {
    let s = TimeSeries::new("short", vec![0.0, 1.0, 2.0], vec![1.0, 0.9, 0.8], vec![]).unwrap();
    assert!(matches!(fit_gamma_eff(&s, FitWindow::default()), Err(Error::Fit(_))));
    let flat = TimeSeries::new("flat", (0..20).map(f64::from).collect(), vec![1.0; 20], vec![]).unwrap();
    assert!(matches!(fit_gamma_eff(&flat, FitWindow::default()), Err(Error::Fit(_))));
}

#[test]
fn time_series_rejects_bad_columns() {
    assert!(TimeSeries::new("x", vec![0.0, 1.0], vec![1.0], vec![]).is_err());
    assert!(TimeSeries::new("x", vec![1.0, 1.0], vec![1.0, 1.0], vec![]).is_err());
}

#[test]
fn config_validation() {
    let ok = ExperimentConfig::default();
    assert!(ok.validate().is_ok());
    for bad in [
        ExperimentConfig { tau_ec: 0.0, ..ok.clone() },
        ExperimentConfig { total_time: 0.01, ..ok.clone() },
        ExperimentConfig { n_runs: 0, ..ok.clone() },
        ExperimentConfig { p_gate: 1.5, ..ok.clone() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Argument(_))));
    }
}

#[test]
fn fidelity_envelope_is_non_increasing() {
    let cfg = ExperimentConfig { tau_ec: 0.05, total_time: 2.0, ..Default::default() };
    let s = run_cycles(&cfg, plus().0, plus().1, false).unwrap();
    assert!(s.values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn pre_correction_point_matches_single_interval_damping() {
    let cfg = ExperimentConfig { tau_ec: 0.05, total_time: 0.05, ..Default::default() };
    let rec = run_cycles_detailed(&cfg, plus().0, plus().1, false).unwrap();
    let psi = CodeSpec::new().plus();
    let damped =
        apply(&amplitude_damping_with_probability(cfg.decay_probability(), 4).unwrap(), &psi.density()).unwrap();
    let want = damped.fidelity_with_pure(&psi).unwrap();
    assert!((rec.pre_correction_fidelity.values[1] - want).abs() < 1e-12);
    // the correction then lifts the fidelity back up
    assert!(rec.fidelity.values[1] > want);
}

#[test]
fn trajectories_ignore_worker_count() {
    let base = ExperimentConfig {
        mode: Mode::Trajectory,
        n_runs: 64,
        p_gate: 1e-2,
        total_time: 0.3,
        seed: 9,
        ..Default::default()
    };
    let one = run_cycles(&ExperimentConfig { workers: Some(1), ..base.clone() }, plus().0, plus().1, false).unwrap();
    let two = run_cycles(&ExperimentConfig { workers: Some(2), ..base.clone() }, plus().0, plus().1, false).unwrap();
    assert_eq!(one, two);
    let other =
        run_cycles(&ExperimentConfig { seed: 10, workers: Some(1), ..base }, plus().0, plus().1, false).unwrap();
    assert_ne!(one, other);
}

#[test]
fn trajectories_agree_with_branch_sum() {
    let base = ExperimentConfig { p_gate: 5e-3, total_time: 0.5, n_runs: 2000, seed: 3, ..Default::default() };
    let exact = run_cycles(&base, plus().0, plus().1, false).unwrap();
    let sampled = run_cycles(&ExperimentConfig { mode: Mode::Trajectory, ..base }, plus().0, plus().1, false).unwrap();
    let (e, s, se) = (exact.values[10], sampled.values[10], sampled.stderr[10]);
    assert!((e - s).abs() < 4.0 * se.max(1e-3), "exact {e} sampled {s} +- {se}");
}

#[test]
fn discarding_aborted_shots_keeps_fewer_shots() {
    let base = ExperimentConfig {
        mode: Mode::Trajectory,
        tau_ec: 0.2,
        total_time: 2.0,
        n_runs: 200,
        seed: 1,
        workers: Some(1),
        ..Default::default()
    };
    let keep = run_cycles_detailed(&base, plus().0, plus().1, false).unwrap();
    let drop = run_cycles_detailed(
        &ExperimentConfig { abort_policy: AbortPolicy::DiscardShot, ..base },
        plus().0,
        plus().1,
        false,
    )
    .unwrap();
    assert_eq!(keep.shots, 200);
    assert!(drop.shots < 200 && drop.shots > 0);
}

#[test]
fn gamma_eff_at_zero_gate_error_sits_below_relaxation_bound() {
    let cfg = ExperimentConfig { tau_ec: 0.05, ..Default::default() };
    let f = measure_gamma_eff_auto(&cfg, 8.4, 4000).unwrap();
    let bound = relaxation_bound(1.0, 0.05);
    assert!(f.gamma_eff <= bound && f.gamma_eff > 0.5 * bound, "{f:?}");
}

#[test]
fn xi_vanishes_without_gate_error() {
    let x = fit_xi(&ExperimentConfig::default(), &[0.0], &[0.05, 0.075, 0.1]).unwrap();
    assert_eq!(x.xi, 0.0);
}

#[test]
fn analytic_threshold_shape() {
    assert!(analytic_threshold(1.0, 0.2, 8.4).is_none());
    let a = analytic_threshold(1.0, 0.01, 8.4).unwrap();
    let b = analytic_threshold(1.0, 0.05, 8.4).unwrap();
    assert!(b > a);
}

#[test]
fn ramsey_without_signal_does_not_oscillate() {
    let cfg = ExperimentConfig { tau_ec: 0.05, total_time: 2.0, ..Default::default() };
    let r = ramsey(&cfg).unwrap();
    assert!(r.population.values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    assert!(first_minimum(&r.population).is_none());
}

#[test]
fn crossing_helpers() {
    let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let v = t.iter().map(|x| 0.5 * (1.0 + (2.0 * x).cos())).collect();
    let s = TimeSeries::new("cos", t, v, vec![]).unwrap();
    let pi = std::f64::consts::PI;
    assert!((first_crossing(&s, 0.5).unwrap() - pi / 4.0).abs() < 0.01);
    assert!((first_minimum(&s).unwrap() - pi / 2.0).abs() <= 0.1);
}
