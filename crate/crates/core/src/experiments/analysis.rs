use super::*;

/// Fit window for exponential envelopes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitWindow {
    /// Leading samples skipped (the t = 0 point counts as one).
    pub skip: usize,
    /// Fitting stops at the first sample below this value.
    pub floor: f64,
    pub min_points: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { skip: 2, floor: 0.1, min_points: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct RateFit {
    pub gamma_eff: f64,
    /// 95% confidence interval of `gamma_eff`.
    pub ci: (f64, f64),
    pub stderr: f64,
    /// First and last time inside the fit window.
    pub window: (f64, f64),
    /// RMS residual of `ln(value)`.
    pub residual: f64,
    /// Fitted `ln(value)` at t = 0.
    pub intercept: f64,
    pub points: usize,
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, se_b, rms)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let dof = (n - 2.0).max(1.0);
    ((a), b, (ss / dof / sxx).sqrt(), (ss / n).sqrt())
}

/// Fits `value(t) ~ A exp(-Gamma t)` by least squares on `ln(value)`.
pub fn fit_gamma_eff(series: &TimeSeries, window: FitWindow) -> Result<RateFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (t, v) in series.times.iter().zip(&series.values).skip(window.skip) {
        if *v < window.floor || !(*v > 0.0) {
            break;
        }
        x.push(*t);
        y.push(v.ln());
    }
    if x.len() < window.min_points.max(3) {
        return Err(Error::Fit(format!(
            "only {} samples of `{}` lie between round {} and the floor {}; need {}",
            x.len(),
            series.label,
            window.skip,
            window.floor,
            window.min_points
        )));
    }
    let span = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 1e-12 {
        return Err(Error::Fit(format!("`{}` shows no decay inside the fit window (log span {span:e})", series.label)));
    }
    let (a, b, se, rms) = linear_fit(&x, &y);
    let gamma = -b;
    Ok(RateFit {
        gamma_eff: gamma,
        ci: (gamma - 1.96 * se, gamma + 1.96 * se),
        stderr: se,
        window: (x[0], x[x.len() - 1]),
        residual: rms,
        intercept: a,
        points: x.len(),
    })
}

/// `4 gamma^2 tau_ec`.
pub fn relaxation_bound(gamma: f64, tau_ec: f64) -> f64 {
    4.0 * gamma * gamma * tau_ec
}

/// Run length of about two e-folds of the guessed decay (at least 40 rounds).
fn adaptive_total_time(config: &ExperimentConfig, guess: f64, max_rounds: usize) -> f64 {
    let want = 2.0 / guess.max(1e-12);
    let rounds = (want / config.tau_ec).ceil().clamp(40.0, max_rounds as f64);
    rounds * config.tau_ec
}

fn half_difference(label: &str, a: &TimeSeries, b: &TimeSeries) -> TimeSeries {
    let values = a.values.iter().zip(&b.values).map(|(u, v)| 0.5 * (u - v)).collect();
    let stderr = a.stderr.iter().zip(&b.stderr).map(|(u, v)| 0.5 * u.hypot(*v)).collect();
    TimeSeries { label: label.into(), times: a.times.clone(), values, stderr }
}

/// Logical coherence with the signal off: `(<Xbar>_{+} - <Xbar>_{-}) / 2` for
/// runs started in `|+bar>` and `|-bar>`. The repeated damp/correct map has a
/// fixed point with non-zero `<Xbar>`; the difference removes it and leaves
/// the decaying part only.
pub fn logical_coherence(config: &ExperimentConfig) -> Result<TimeSeries> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = run_cycles_detailed(config, c(h), c(h), false)?;
    let minus = run_cycles_detailed(config, c(h), c(-h), false)?;
    Ok(half_difference("logical_coherence", &plus.logical_x, &minus.logical_x))
}

/// Fits `Gamma_eff` to [`logical_coherence`].
pub fn measure_gamma_eff(config: &ExperimentConfig) -> Result<RateFit> {
    fit_gamma_eff(&logical_coherence(config)?, FitWindow::default())
}

/// Length of the half-difference of the logical `(Ybar, Zbar)` components for
/// runs started in `|0bar>` and `|1bar>` (signal on): the fringe envelope with
/// the fixed-point offset removed.
pub fn fringe_envelope(config: &ExperimentConfig) -> Result<TimeSeries> {
    let zero = run_cycles_detailed(config, c(1.0), c(0.0), true)?;
    let one = run_cycles_detailed(config, c(0.0), c(1.0), true)?;
    let y = half_difference("y", &zero.logical_y, &one.logical_y);
    let z = half_difference("z", &zero.logical_z, &one.logical_z);
    let values = y.values.iter().zip(&z.values).map(|(a, b)| a.hypot(*b)).collect();
    TimeSeries::new("fringe_envelope", y.times, values, vec![])
}

/// Like [`measure_gamma_eff`], with the run length chosen from the rate model
/// (`xi_guess` for the gate term) and capped at `max_rounds`.
pub fn measure_gamma_eff_auto(config: &ExperimentConfig, xi_guess: f64, max_rounds: usize) -> Result<RateFit> {
    let guess = relaxation_bound(config.gamma, config.tau_ec) + xi_guess * config.p_gate / config.tau_ec;
    let cfg = ExperimentConfig { total_time: adaptive_total_time(config, guess, max_rounds), ..config.clone() };
    measure_gamma_eff(&cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct XiPoint {
    pub p_gate: f64,
    pub tau_ec: f64,
    pub gamma_eff: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct XiFit {
    pub xi: f64,
    pub ci: (f64, f64),
    pub intercept: f64,
    /// RMS residual relative to the RMS of the regressand.
    pub relative_residual: f64,
    pub points: Vec<XiPoint>,
    pub warning: Option<String>,
}

/// Fits `Gamma_eff - 4 gamma^2 tau_ec = xi p_gate / tau_ec + c` over a grid.
pub fn fit_xi(base: &ExperimentConfig, p_gates: &[f64], taus: &[f64]) -> Result<XiFit> {
    if p_gates.is_empty() || taus.is_empty() || p_gates.len() * taus.len() < 3 {
        return arg("xi fit needs at least three grid points");
    }
    let mut points = Vec::new();
    for &tau in taus {
        for &p in p_gates {
            let cfg = ExperimentConfig { tau_ec: tau, p_gate: p, mode: Mode::Deterministic, ..base.clone() };
            let fit = measure_gamma_eff_auto(&cfg, 8.4, 4000)?;
            points.push(XiPoint { p_gate: p, tau_ec: tau, gamma_eff: fit.gamma_eff });
        }
    }
    fit_xi_points(base.gamma, points)
}

/// The regression behind [`fit_xi`] on already measured rates.
pub fn fit_xi_points(gamma: f64, points: Vec<XiPoint>) -> Result<XiFit> {
    if points.len() < 3 {
        return arg("xi fit needs at least three grid points");
    }
    let x: Vec<f64> = points.iter().map(|q| q.p_gate / q.tau_ec).collect();
    let y: Vec<f64> = points.iter().map(|q| q.gamma_eff - relaxation_bound(gamma, q.tau_ec)).collect();
    if x.iter().all(|v| *v == x[0]) {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        return Ok(XiFit { xi: 0.0, ci: (0.0, 0.0), intercept: mean, relative_residual: 0.0, points, warning: None });
    }
    let (a, b, se, rms) = linear_fit(&x, &y);
    let scale = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt().max(1e-300);
    let relative_residual = rms / scale;
    let warning =
        (relative_residual > 0.1).then(|| format!("rate model fits poorly: relative residual {relative_residual:.3}"));
    Ok(XiFit { xi: b, ci: (b - 1.96 * se, b + 1.96 * se), intercept: a, relative_residual, points, warning })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RamseyResult {
    /// `P(t) = <0bar| rho(t) |0bar>`.
    pub population: TimeSeries,
    /// Fringe envelope, see [`fringe_envelope`].
    pub contrast: TimeSeries,
    /// `(1 + exp(-gamma t/2) cos(2 g_s t)) / 2` for a bare qubit.
    pub unencoded_population: TimeSeries,
    pub unencoded_contrast: TimeSeries,
    pub shots: usize,
}

/// Ramsey fringes of `|0bar>` under the signal Hamiltonian.
pub fn ramsey(config: &ExperimentConfig) -> Result<RamseyResult> {
    let rec = run_cycles_detailed(config, c(1.0), c(0.0), true)?;
    let times = rec.population.times.clone();
    let env: Vec<f64> = times.iter().map(|t| (-0.5 * config.gamma * t).exp()).collect();
    Ok(RamseyResult {
        contrast: TimeSeries { label: "contrast".into(), ..fringe_envelope(config)? },
        unencoded_population: unencoded_ramsey(config.gamma, config.g_s, &times)?,
        unencoded_contrast: TimeSeries::new("unencoded_contrast", times, env, vec![])?,
        population: rec.population,
        shots: rec.shots,
    })
}

/// Bare-qubit fringe `(1 + exp(-gamma t / 2) cos(2 g_s t)) / 2`.
pub fn unencoded_ramsey(gamma: f64, g_s: f64, times: &[f64]) -> Result<TimeSeries> {
    let values = times.iter().map(|t| 0.5 * (1.0 + (-0.5 * gamma * t).exp() * (2.0 * g_s * t).cos())).collect();
    TimeSeries::new("unencoded_population", times.to_vec(), values, vec![])
}

/// First time the series crosses `level` from above (linear interpolation).
pub fn first_crossing(series: &TimeSeries, level: f64) -> Option<f64> {
    series.times.windows(2).zip(series.values.windows(2)).find_map(|(t, v)| {
        (v[0] >= level && v[1] < level).then(|| t[0] + (v[0] - level) / (v[0] - v[1]) * (t[1] - t[0]))
    })
}

/// Time of the first local minimum of the series.
pub fn first_minimum(series: &TimeSeries) -> Option<f64> {
    let v = &series.values;
    (1..v.len().saturating_sub(1)).find(|&i| v[i] <= v[i - 1] && v[i] < v[i + 1]).map(|i| series.times[i])
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DephasingPoint {
    pub tau_ec: f64,
    /// Envelope rate with decays spread over the interval.
    pub rate: f64,
    /// Envelope rate when every decay sits at the end of the interval.
    pub baseline: f64,
    pub extra_rate: f64,
    /// `extra_rate / ((g_s tau_ec)^2 gamma)`.
    pub normalized: f64,
}

/// Extra envelope decay caused by not knowing when inside an interval a decay
/// happened. The sliced run (`config.substeps` slices per interval) is compared
/// against the same run with a single slice, where every decay lands right
/// before the correction and the signal phase is unaffected.
pub fn finite_tau_dephasing(config: &ExperimentConfig, taus: &[f64]) -> Result<Vec<DephasingPoint>> {
    if config.substeps < 2 {
        return arg("finite-interval dephasing needs at least two slices per interval");
    }
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let base = ExperimentConfig { tau_ec: tau, mode: Mode::Deterministic, ..config.clone() };
        let envelope = |substeps: usize| -> Result<f64> {
            let cfg = ExperimentConfig { substeps, ..base.clone() };
            Ok(fit_gamma_eff(&fringe_envelope(&cfg)?, FitWindow::default())?.gamma_eff)
        };
        let rate = envelope(config.substeps)?;
        let baseline = envelope(1)?;
        let extra = rate - baseline;
        let scale = (config.g_s * tau).powi(2) * config.gamma;
        out.push(DephasingPoint {
            tau_ec: tau,
            rate,
            baseline,
            extra_rate: extra,
            normalized: if scale > 0.0 { extra / scale } else { 0.0 },
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ThresholdCell {
    pub tau_ec: f64,
    pub p_gate: f64,
    pub gamma_eff: f64,
    /// `gamma_eff` below the bare coherence rate `gamma / 2`.
    pub better: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BoundaryPoint {
    pub tau_ec: f64,
    /// Simulated gate error at which `Gamma_eff = gamma/2` (`None`: no crossing on the grid).
    pub simulated: Option<f64>,
    /// Same from `4 gamma^2 tau + xi p / tau = gamma / 2`.
    pub analytic: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ThresholdMap {
    /// Row per `tau_ec`, column per `p_gate`.
    pub cells: Vec<Vec<ThresholdCell>>,
    pub boundary: Vec<BoundaryPoint>,
    pub xi: f64,
}

/// Analytic threshold `p* = (gamma/2 - 4 gamma^2 tau) tau / xi`.
pub fn analytic_threshold(gamma: f64, tau_ec: f64, xi: f64) -> Option<f64> {
    let p = (0.5 * gamma - relaxation_bound(gamma, tau_ec)) * tau_ec / xi;
    (p > 0.0).then_some(p)
}

pub fn threshold_map(base: &ExperimentConfig, taus: &[f64], p_gates: &[f64], xi: f64) -> Result<ThresholdMap> {
    if taus.is_empty() || p_gates.is_empty() {
        return arg("threshold map needs a non-empty grid");
    }
    if p_gates.windows(2).any(|w| !(w[1] > w[0])) {
        return arg("p_gate grid must be strictly increasing");
    }
    let limit = 0.5 * base.gamma;
    let mut cells = Vec::with_capacity(taus.len());
    let mut boundary = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut row = Vec::with_capacity(p_gates.len());
        for &p in p_gates {
            let cfg = ExperimentConfig { tau_ec: tau, p_gate: p, mode: Mode::Deterministic, ..base.clone() };
            let g = measure_gamma_eff_auto(&cfg, xi, 2000)?.gamma_eff;
            row.push(ThresholdCell { tau_ec: tau, p_gate: p, gamma_eff: g, better: g < limit });
        }
        let simulated = row.windows(2).find(|w| w[0].better && !w[1].better).map(|w| {
            let f = (limit - w[0].gamma_eff) / (w[1].gamma_eff - w[0].gamma_eff);
            w[0].p_gate + f * (w[1].p_gate - w[0].p_gate)
        });
        boundary.push(BoundaryPoint { tau_ec: tau, simulated, analytic: analytic_threshold(base.gamma, tau, xi) });
        cells.push(row);
    }
    Ok(ThresholdMap { cells, boundary, xi })
}
