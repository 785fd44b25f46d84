//! Approximate recovery analysis on the codespace.
//!
//! For each Kraus operator `K_s`, `M_s = C^dag K_s^dag K_s C` (with `C` the
//! 16x2 codeword matrix) is compared with `lambda_s I`, where `lambda_s` is its
//! smallest eigenvalue; `Q_s = sqrt(M_s) - sqrt(lambda_s) I` is the part no
//! recovery can undo. The polar decomposition `K_s C = U_s sqrt(M_s)` gives
//! the isometry a recovery would rotate back onto the codespace.

use nalgebra::DMatrix;

use super::CodeSpec;
use crate::channels::KrausChannel;
use crate::error::{arg, Error, Result};
use crate::qstate::{c, Matrix};

/// Below this, `M_s` is treated as the zero matrix.
const NULL_WEIGHT: f64 = 1e-28;

#[derive(Clone, Debug)]
pub struct RecoveryTerm {
    pub pattern: usize,
    /// Smallest eigenvalue of `M_s`.
    pub lambda: f64,
    /// Operator norm of the unrecoverable distortion `Q_s = sqrt(M_s) - sqrt(lambda_s) I`.
    pub distortion: f64,
    /// 16x2 isometry `U_s`; `None` when `K_s` annihilates the codespace.
    pub isometry: Option<Matrix>,
}

#[derive(Clone, Debug)]
pub struct RecoveryAnalysis {
    pub terms: Vec<RecoveryTerm>,
}

impl RecoveryAnalysis {
    /// Worst-case entanglement fidelity guaranteed by the recovery, `sum_s lambda_s`.
    pub fn fidelity_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.lambda).sum()
    }

    pub fn term(&self, pattern: usize) -> Option<&RecoveryTerm> {
        self.terms.iter().find(|t| t.pattern == pattern)
    }
}

fn codeword_matrix(code: &CodeSpec) -> Matrix {
    let mut m = DMatrix::zeros(16, 2);
    m.set_column(0, code.zero.amplitudes());
    m.set_column(1, code.one.amplitudes());
    m
}

pub fn recovery_analysis(channel: &KrausChannel, code: &CodeSpec) -> Result<RecoveryAnalysis> {
    if channel.dim() != 16 {
        return arg(format!("recovery analysis needs a 4-qubit channel, got dimension {}", channel.dim()));
    }
    let cw = codeword_matrix(code);
    let patterns = channel.patterns();
    let mut terms = Vec::with_capacity(channel.len());
    for (k, op) in channel.operators().iter().enumerate() {
        let pattern = patterns.get(k).copied().unwrap_or(k);
        let kc = op.matrix() * &cw;
        let m = kc.adjoint() * &kc;
        let eig = m.clone().symmetric_eigen();
        let (lo, hi) =
            eig.eigenvalues.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi <= NULL_WEIGHT {
            terms.push(RecoveryTerm { pattern, lambda: 0.0, distortion: 0.0, isometry: None });
            continue;
        }
        if lo <= 1e-12 * hi {
            return Err(Error::Numerical(format!(
                "Kraus operator {pattern:#06b} is rank-deficient on the codespace (eigenvalues {lo:e}, {hi:e})"
            )));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| c(1.0 / v.sqrt())));
        let m_inv_sqrt = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
        terms.push(RecoveryTerm {
            pattern,
            lambda: lo,
            distortion: hi.sqrt() - lo.sqrt(),
            isometry: Some(kc * m_inv_sqrt),
        });
    }
    Ok(RecoveryAnalysis { terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{amplitude_damping_with_probability, first_order_operators};
    use crate::qstate::C64;

    #[test]
    fn first_order_eigenvalues() {
        let p = 0.05;
        let ch = first_order_operators(&amplitude_damping_with_probability(p, 4).unwrap()).unwrap();
        let a = recovery_analysis(&ch, &CodeSpec::new()).unwrap();
        assert!((a.term(0).unwrap().lambda - (1.0 - p).powi(2)).abs() < 1e-12);
        for s in [0b1000, 0b0100, 0b0010, 0b0001] {
            assert!((a.term(s).unwrap().lambda - 0.5 * p * (1.0 - p).powi(3)).abs() < 1e-12);
        }
        for t in &a.terms {
            let u = t.isometry.as_ref().unwrap();
            let g = u.adjoint() * u;
            assert!((g - DMatrix::<C64>::identity(2, 2)).norm() < 1e-10);
        }
    }
}
