//! Tunable-coupler signal term.
//!
//! Units: couplings, detunings and anharmonicities in angular MHz (hbar = 1),
//! coupler area in square micrometres, flux responsivity in MHz per flux
//! quantum. The flux quantum is fixed at [`FLUX_QUANTUM`].
//!
//! Sign convention: [`effective_zz`] returns the level-repulsion magnitude
//! `dE11 = 2g'^2/(alpha+Delta) + 2g'^2/(alpha-Delta)`; the `|11>` level itself
//! moves down by this amount when both neighbours `|20>`, `|02>` lie above it.

use nalgebra::Matrix2;

use crate::error::{arg, Result};
use crate::qstate::{embed, gates, ComplexOperator};

/// `h / 2e` in webers.
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// Default minimum of `|alpha +- Delta| / g'`.
pub const DEFAULT_HYBRIDIZATION_RATIO: f64 = 10.0;

/// Phenomenological relaxation, dephasing and excitation rates.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GammaRates {
    pub down: f64,
    pub zero: f64,
    pub up: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CouplerParams {
    pub g_prime: f64,
    pub delta: f64,
    pub alpha: f64,
    pub g_s: f64,
    /// `|dg_s/dPhi_signal|` in MHz per flux quantum.
    pub dgs_dphi: f64,
    /// Loop area in um^2.
    pub area: f64,
    pub gamma_rates: GammaRates,
    pub hybridization_ratio: f64,
}

impl Default for CouplerParams {
    fn default() -> Self {
        Self {
            g_prime: 1.0,
            delta: 500.0,
            alpha: 300.0,
            g_s: 1.0,
            dgs_dphi: 1.0,
            area: 100.0,
            gamma_rates: GammaRates::default(),
            hybridization_ratio: DEFAULT_HYBRIDIZATION_RATIO,
        }
    }
}

impl CouplerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_prime >= 0.0) {
            return arg(format!("g_prime must be non-negative, got {}", self.g_prime));
        }
        if !(self.area > 0.0) {
            return arg(format!("coupler area must be positive, got {}", self.area));
        }
        let GammaRates { down, zero, up } = self.gamma_rates;
        if [down, zero, up].iter().any(|r| !(*r >= 0.0)) {
            return arg("relaxation, dephasing and excitation rates must be non-negative");
        }
        if !(self.hybridization_ratio > 0.0) {
            return arg("hybridization ratio must be positive");
        }
        Ok(())
    }

    fn check_dispersive(&self) -> Result<()> {
        let limit = self.hybridization_ratio * self.g_prime;
        for gap in [self.alpha + self.delta, self.alpha - self.delta] {
            if gap.abs() <= limit || gap == 0.0 {
                return arg(format!(
                    "strong hybridization of |11> with |20>/|02>: |alpha +- Delta| = {} is within {} g'",
                    gap.abs(),
                    self.hybridization_ratio
                ));
            }
        }
        Ok(())
    }
}

/// Dispersive ZZ strength `2g'^2/(alpha+Delta) + 2g'^2/(alpha-Delta)`.
pub fn effective_zz(params: &CouplerParams) -> Result<f64> {
    params.validate()?;
    params.check_dispersive()?;
    let g2 = 2.0 * params.g_prime * params.g_prime;
    Ok(g2 / (params.alpha + params.delta) + g2 / (params.alpha - params.delta))
}

/// `effective_zz` at the given detuning divided by its resonant (`Delta = 0`) value.
pub fn detuned_to_resonant_ratio(params: &CouplerParams) -> Result<f64> {
    let resonant = effective_zz(&CouplerParams { delta: 0.0, ..*params })?;
    if resonant == 0.0 {
        return arg("resonant ZZ strength vanishes (g' = 0)");
    }
    Ok(effective_zz(params)? / resonant)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DressedAnalysis {
    /// Mixing `g'/(sqrt((Delta/2)^2 + g'^2) + Delta/2)`.
    pub eta: f64,
    /// Leading-order mixing `g'/Delta`.
    pub eta_leading: f64,
    /// `(lambda_plus, lambda_minus)` with `lambda_plus <= lambda_minus`.
    pub energies: (f64, f64),
    /// `true` when `energies` come from exact diagonalization (`Delta = 0`).
    pub exact: bool,
    /// Single-qubit phase correction `g'^2/Delta`.
    pub zz_correction: f64,
    pub dephasing_weight: f64,
    pub excitation_weight: f64,
}

/// Eigenvalues (ascending) of `(Delta/2) Z + g' X` by direct diagonalization.
pub fn exact_dressed_energies(g_prime: f64, delta: f64) -> (f64, f64) {
    let h = Matrix2::new(delta / 2.0, g_prime, g_prime, -delta / 2.0);
    let ev = h.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Dressed states of `(Delta/2) Z + g' X`. Energies use the expansion
/// `-+(Delta/2)(1 + 2(g'/Delta)^2)`, correct to quartic order; at `Delta = 0`
/// the expansion is undefined and the exact values are returned.
pub fn dressed_states(params: &CouplerParams) -> Result<DressedAnalysis> {
    params.validate()?;
    let (g, d) = (params.g_prime, params.delta);
    if d < 0.0 {
        return arg(format!("dressed-state expansion needs Delta >= 0, got {d}"));
    }
    let eta = if g == 0.0 { 0.0 } else { g / (((d / 2.0).powi(2) + g * g).sqrt() + d / 2.0) };
    let exact = d == 0.0;
    let (energies, eta_leading, zz_correction) = if exact {
        (exact_dressed_energies(g, d), f64::INFINITY, f64::INFINITY)
    } else {
        let r = g / d;
        let e = d / 2.0 * (1.0 + 2.0 * r * r);
        ((-e, e), r, g * g / d)
    };
    Ok(DressedAnalysis {
        eta,
        eta_leading,
        energies,
        exact,
        zz_correction,
        dephasing_weight: eta * eta,
        excitation_weight: eta.powi(4),
    })
}

/// `(eta^2 gamma_0, eta^4 gamma_up)`.
pub fn induced_dephasing_rate(analysis: &DressedAnalysis, rates: &GammaRates) -> Result<(f64, f64)> {
    if [rates.down, rates.zero, rates.up].iter().any(|r| !(*r >= 0.0)) {
        return arg("rates must be non-negative");
    }
    Ok((analysis.dephasing_weight * rates.zero, analysis.excitation_weight * rates.up))
}

/// `g_s Z1 Z3` on the 4-qubit register, plus `(g'^2/Delta)(Z1 - Z3)` when
/// `include_correction` is set (1-based labels; qubits 0 and 2 here).
pub fn signal_hamiltonian(params: &CouplerParams, include_correction: bool) -> Result<ComplexOperator> {
    params.validate()?;
    let z = gates::pauli_z();
    let zz = embed(&z.kron(&z), &[0, 2], 4)?.scale(params.g_s);
    if !include_correction || params.g_prime == 0.0 {
        return Ok(zz);
    }
    if params.delta == 0.0 {
        return arg("phase correction g'^2/Delta is undefined at Delta = 0");
    }
    let k = params.g_prime * params.g_prime / params.delta;
    let diff = embed(&z, &[0], 4)?.add(&embed(&z, &[2], 4)?.scale(-1.0))?;
    zz.add(&diff.scale(k))
}

/// `|dg_s/dB| = |dg_s/dPhi| A` in MHz/T (linear response, independent of the bias point).
pub fn flux_responsivity(params: &CouplerParams) -> Result<f64> {
    params.validate()?;
    Ok(params.dgs_dphi.abs() * params.area * 1e-12 / FLUX_QUANTUM)
}
