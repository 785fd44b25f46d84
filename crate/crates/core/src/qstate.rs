//! Dense linear algebra on registers of one to five qubits.
//!
//! Qubit convention: qubit 0 is the leftmost label of a ket, i.e. the most
//! significant bit of the basis index. `|q0 q1 ... q(n-1)>` has index
//! `sum_k q_k << (n - 1 - k)`. Every module in the crate relies on this.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{arg, Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;

pub const MAX_QUBITS: usize = 5;
/// Construction tolerance for density matrices.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Tolerance used by property checks.
pub const CHECK_TOLERANCE: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Square complex matrix acting on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexOperator {
    mat: Matrix,
}

impl ComplexOperator {
    pub fn new(mat: Matrix) -> Result<Self> {
        let dim = mat.nrows();
        if mat.ncols() != dim {
            return arg(format!("operator must be square, got {}x{}", dim, mat.ncols()));
        }
        if dim < 2 || !dim.is_power_of_two() || dim > 1 << MAX_QUBITS {
            return arg(format!("operator dimension {dim} is not 2^n with 1 <= n <= {MAX_QUBITS}"));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return arg("operator has non-finite entries");
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_matrix(mat: Matrix) -> Self {
        debug_assert!(mat.nrows() == mat.ncols() && mat.nrows().is_power_of_two());
        Self { mat }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mat = Matrix::from_fn(n, n, |i, j| c(rows[i][j]));
        Self::new(mat)
    }

    pub fn identity(num_qubits: usize) -> Self {
        let d = 1 << num_qubits;
        Self { mat: Matrix::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mat: self.mat.scale(s) }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return arg("dimension mismatch in operator product");
        }
        Ok(Self { mat: &self.mat * &other.mat })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return arg("dimension mismatch in operator sum");
        }
        Ok(Self { mat: &self.mat + &other.mat })
    }

    /// Kronecker product; `self` occupies the leading (leftmost) qubits.
    pub fn kron(&self, other: &Self) -> Self {
        Self { mat: self.mat.kronecker(&other.mat) }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.mat - self.mat.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && (&self.mat - &other.mat).iter().all(|z| z.norm() <= tol)
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.mat.clone().singular_values().max()
    }
}

pub mod gates {
    //! Elementary single- and two-qubit matrices.
    use super::*;

    pub fn identity() -> ComplexOperator {
        ComplexOperator::identity(1)
    }
    pub fn pauli_x() -> ComplexOperator {
        ComplexOperator::from_matrix(Matrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }
    pub fn pauli_y() -> ComplexOperator {
        ComplexOperator::from_matrix(Matrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]))
    }
    pub fn pauli_z() -> ComplexOperator {
        ComplexOperator::from_matrix(Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]))
    }
    /// Lowering operator `|0><1|`.
    pub fn sigma_minus() -> ComplexOperator {
        ComplexOperator::from_matrix(Matrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]))
    }
    /// Raising operator `|1><0|`.
    pub fn sigma_plus() -> ComplexOperator {
        sigma_minus().adjoint()
    }
    pub fn hadamard() -> ComplexOperator {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ComplexOperator::from_matrix(Matrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)]))
    }
    /// `exp(-i angle Y / 2)`.
    pub fn ry(angle: f64) -> ComplexOperator {
        let (s, co) = (angle / 2.0).sin_cos();
        ComplexOperator::from_matrix(Matrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)]))
    }
    /// `exp(-i angle Z / 2)`.
    pub fn rz(angle: f64) -> ComplexOperator {
        let ph = C64::from_polar(1.0, -angle / 2.0);
        ComplexOperator::from_matrix(Matrix::from_row_slice(2, 2, &[ph, ZERO, ZERO, ph.conj()]))
    }
    /// Controlled-NOT with the control on the first (leftmost) qubit.
    pub fn cnot() -> ComplexOperator {
        let mut m = Matrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        ComplexOperator::from_matrix(m)
    }
    pub fn cz() -> ComplexOperator {
        ComplexOperator::from_matrix(Matrix::from_diagonal(&DVector::from_vec(vec![ONE, ONE, ONE, -ONE])))
    }
    pub fn projector(bit: u8) -> ComplexOperator {
        let mut m = Matrix::zeros(2, 2);
        m[(bit as usize, bit as usize)] = ONE;
        ComplexOperator::from_matrix(m)
    }
}

fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return arg(format!("register size {n} outside 1..={MAX_QUBITS}"));
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return arg(format!("target qubit {t} out of range for {n}-qubit register"));
        }
        if targets[..i].contains(&t) {
            return arg(format!("duplicate target qubit {t}"));
        }
    }
    Ok(())
}

/// Bit position (from the least significant end) of qubit `q` in an `n`-qubit index.
#[inline]
pub(crate) fn bit_of(q: usize, n: usize) -> usize {
    n - 1 - q
}

/// Basis indices sharing the non-target bits of `base`, ordered by the local
/// index of the targets (first target is the most significant local bit).
fn local_offsets(targets: &[usize], n: usize) -> Vec<usize> {
    let k = targets.len();
    (0..1usize << k)
        .map(|local| {
            targets.iter().enumerate().fold(0usize, |acc, (pos, &t)| {
                if (local >> (k - 1 - pos)) & 1 == 1 {
                    acc | (1 << bit_of(t, n))
                } else {
                    acc
                }
            })
        })
        .collect()
}

fn target_mask(targets: &[usize], n: usize) -> usize {
    targets.iter().fold(0, |m, &t| m | (1 << bit_of(t, n)))
}

/// Returns the `2^n`-dimensional operator acting as `op` on `targets` and as identity elsewhere.
pub fn embed(op: &ComplexOperator, targets: &[usize], n: usize) -> Result<ComplexOperator> {
    check_targets(targets, n)?;
    if op.dim() != 1 << targets.len() {
        return arg(format!("operator of dimension {} cannot act on {} targets", op.dim(), targets.len()));
    }
    let dim = 1 << n;
    let mask = target_mask(targets, n);
    let offsets = local_offsets(targets, n);
    let mut out = Matrix::zeros(dim, dim);
    for base in (0..dim).filter(|b| b & mask == 0) {
        for (li, &oi) in offsets.iter().enumerate() {
            for (lj, &oj) in offsets.iter().enumerate() {
                out[(base | oi, base | oj)] = op.mat[(li, lj)];
            }
        }
    }
    Ok(ComplexOperator { mat: out })
}

/// In-place `rho <- U rho U^dagger` for a local `U`; no validation.
pub(crate) fn conjugate_local(rho: &mut Matrix, u: &Matrix, targets: &[usize], n: usize) {
    let dim = rho.nrows();
    let mask = target_mask(targets, n);
    let offsets = local_offsets(targets, n);
    let k = offsets.len();
    let mut buf = vec![ZERO; k];
    // left multiplication, column by column
    for col in 0..dim {
        for base in (0..dim).filter(|b| b & mask == 0) {
            for (li, b) in buf.iter_mut().enumerate() {
                *b = offsets.iter().enumerate().map(|(lj, &oj)| u[(li, lj)] * rho[(base | oj, col)]).sum();
            }
            for (li, &oi) in offsets.iter().enumerate() {
                rho[(base | oi, col)] = buf[li];
            }
        }
    }
    // right multiplication by U^dagger, row by row
    for row in 0..dim {
        for base in (0..dim).filter(|b| b & mask == 0) {
            for (li, b) in buf.iter_mut().enumerate() {
                *b = offsets.iter().enumerate().map(|(lj, &oj)| rho[(row, base | oj)] * u[(li, lj)].conj()).sum();
            }
            for (li, &oi) in offsets.iter().enumerate() {
                rho[(row, base | oi)] = buf[li];
            }
        }
    }
}

/// In-place `psi <- U psi` for a local `U`; no validation.
pub(crate) fn apply_local_vec(psi: &mut DVector<C64>, u: &Matrix, targets: &[usize], n: usize) {
    let dim = psi.len();
    let mask = target_mask(targets, n);
    let offsets = local_offsets(targets, n);
    let mut buf = vec![ZERO; offsets.len()];
    for base in (0..dim).filter(|b| b & mask == 0) {
        for (li, b) in buf.iter_mut().enumerate() {
            *b = offsets.iter().enumerate().map(|(lj, &oj)| u[(li, lj)] * psi[base | oj]).sum();
        }
        for (li, &oi) in offsets.iter().enumerate() {
            psi[base | oi] = buf[li];
        }
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: DVector<C64>,
}

impl PureState {
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() || dim > 1 << MAX_QUBITS {
            return arg(format!("state dimension {dim} is not 2^n with 1 <= n <= {MAX_QUBITS}"));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return arg(format!("state is not normalized (norm {norm})"));
        }
        Ok(Self { amps })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if norm <= f64::EPSILON || !norm.is_finite() {
            return arg("cannot normalize a zero vector");
        }
        Self::new(amps.unscale(norm))
    }

    /// Computational basis state `|bits>`, qubit 0 leftmost.
    pub fn basis(bits: &[u8]) -> Self {
        let n = bits.len();
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut amps = DVector::from_element(1 << n, ZERO);
        amps[idx] = ONE;
        Self { amps }
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amps: DVector::from_vec(vec![c(h), c(h)]) }
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amps: DVector::from_vec(vec![c(h), c(-h)]) }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> ComplexOperator {
        ComplexOperator { mat: &self.amps * self.amps.adjoint() }
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { mat: &self.amps * self.amps.adjoint(), tolerance: DEFAULT_TOLERANCE }
    }

    pub fn kron(&self, other: &PureState) -> PureState {
        PureState { amps: self.amps.kronecker(&other.amps) }
    }

    pub fn apply(&self, op: &ComplexOperator) -> Result<DVector<C64>> {
        if op.dim() != self.dim() {
            return arg("dimension mismatch applying operator to state");
        }
        Ok(&op.mat * &self.amps)
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: Matrix,
    tolerance: f64,
}

impl DensityMatrix {
    pub fn new(mat: Matrix) -> Result<Self> {
        Self::with_tolerance(mat, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(mat: Matrix, tolerance: f64) -> Result<Self> {
        let rho = Self::unnormalized_with_tolerance(mat, tolerance)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > tolerance.max(1e-12) * rho.dim() as f64 {
            return arg(format!("density matrix trace {tr} differs from 1"));
        }
        Ok(rho)
    }

    /// Accepts a Hermitian PSD matrix of arbitrary trace (a selective-branch output).
    pub fn unnormalized(mat: Matrix) -> Result<Self> {
        Self::unnormalized_with_tolerance(mat, DEFAULT_TOLERANCE)
    }

    fn unnormalized_with_tolerance(mat: Matrix, tolerance: f64) -> Result<Self> {
        ComplexOperator::new(mat.clone())?;
        let scale = mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let rho = Self { mat, tolerance };
        if !rho.as_operator_ref_hermitian(tolerance * scale) {
            return arg("density matrix is not Hermitian");
        }
        let min_eig = rho.eigenvalues().min();
        if min_eig < -tolerance * scale.max(1.0) * 10.0 {
            return arg(format!("density matrix has negative eigenvalue {min_eig}"));
        }
        Ok(rho)
    }

    fn as_operator_ref_hermitian(&self, tol: f64) -> bool {
        (&self.mat - self.mat.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    pub(crate) fn from_raw(mat: Matrix) -> Self {
        Self { mat, tolerance: DEFAULT_TOLERANCE }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1 << num_qubits;
        Self::from_raw(Matrix::identity(d, d).unscale(d as f64))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(hermitian_part(&self.mat)).eigenvalues
    }

    /// Hermiticity, positivity and (optionally) unit trace at the given tolerance.
    pub fn is_valid(&self, tol: f64, require_unit_trace: bool) -> bool {
        let herm = self.as_operator_ref_hermitian(tol);
        let psd = self.eigenvalues().min() >= -tol;
        let tr = !require_unit_trace || (self.trace() - 1.0).abs() <= tol;
        herm && psd && tr
    }

    pub fn renormalized(&self) -> Option<Self> {
        let tr = self.trace();
        (tr > 0.0).then(|| Self { mat: self.mat.unscale(tr), tolerance: self.tolerance })
    }

    pub fn expectation(&self, op: &ComplexOperator) -> Result<C64> {
        if op.dim() != self.dim() {
            return arg("dimension mismatch in expectation value");
        }
        Ok((&self.mat * &op.mat).trace())
    }

    /// `<psi| rho |psi>` clamped to `[0, 1]`.
    pub fn fidelity_with_pure(&self, psi: &PureState) -> Result<f64> {
        fidelity_with_pure(self, psi)
    }

    /// Applies a unitary (or any operator) by conjugation: `A rho A^dagger`.
    pub fn conjugate(&self, op: &ComplexOperator) -> Result<Self> {
        if op.dim() != self.dim() {
            return arg("dimension mismatch in conjugation");
        }
        Ok(Self { mat: &op.mat * &self.mat * op.mat.adjoint(), tolerance: self.tolerance })
    }

    pub fn conjugate_local(&self, op: &ComplexOperator, targets: &[usize]) -> Result<Self> {
        let n = self.num_qubits();
        check_targets(targets, n)?;
        if op.dim() != 1 << targets.len() {
            return arg("operator size does not match target count");
        }
        let mut mat = self.mat.clone();
        conjugate_local(&mut mat, &op.mat, targets, n);
        Ok(Self { mat, tolerance: self.tolerance })
    }

    pub fn kron(&self, other: &DensityMatrix) -> Self {
        Self { mat: self.mat.kronecker(&other.mat), tolerance: self.tolerance }
    }

    /// Reduced state on `keep` (in the given order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.num_qubits();
        check_targets(keep, n)?;
        Ok(Self { mat: partial_trace_raw(&self.mat, keep, n), tolerance: self.tolerance })
    }
}

fn hermitian_part(m: &Matrix) -> Matrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn partial_trace_raw(mat: &Matrix, keep: &[usize], n: usize) -> Matrix {
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let keep_off = local_offsets(keep, n);
    let trace_off = local_offsets(&traced, n);
    let k = keep_off.len();
    let mut out = Matrix::zeros(k, k);
    for (i, &oi) in keep_off.iter().enumerate() {
        for (j, &oj) in keep_off.iter().enumerate() {
            out[(i, j)] = trace_off.iter().map(|&t| mat[(oi | t, oj | t)]).sum();
        }
    }
    out
}

/// `exp(-i H t) rho exp(+i H t)` computed through the eigendecomposition of `H`.
pub fn evolve_hamiltonian(rho: &DensityMatrix, h: &ComplexOperator, t: f64) -> Result<DensityMatrix> {
    if h.dim() != rho.dim() {
        return arg("Hamiltonian and state dimensions differ");
    }
    if t < 0.0 || !t.is_finite() {
        return arg(format!("evolution time must be finite and non-negative, got {t}"));
    }
    let u = propagator(h, t)?;
    rho.conjugate(&u)
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn propagator(h: &ComplexOperator, t: f64) -> Result<ComplexOperator> {
    let scale = h.mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !h.is_hermitian(1e-10 * scale) {
        return arg("Hamiltonian is not Hermitian");
    }
    let eig = SymmetricEigen::new(hermitian_part(&h.mat));
    let phases =
        DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t)));
    let v = &eig.eigenvectors;
    let mat = v * Matrix::from_diagonal(&phases) * v.adjoint();
    Ok(ComplexOperator { mat })
}

/// One outcome of a projective measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBranch {
    pub probability: f64,
    /// Conditional post-measurement state; `None` when the branch has zero probability.
    pub state: Option<DensityMatrix>,
}

/// Probability threshold below which a branch is reported as impossible.
pub const ZERO_BRANCH: f64 = 1e-14;

pub fn measure_projective(rho: &DensityMatrix, projectors: &[ComplexOperator]) -> Result<Vec<MeasurementBranch>> {
    let dim = rho.dim();
    let tol = 1e-9;
    if projectors.is_empty() {
        return arg("empty projector set");
    }
    let mut total = Matrix::zeros(dim, dim);
    for (i, p) in projectors.iter().enumerate() {
        if p.dim() != dim {
            return arg("projector dimension differs from state dimension");
        }
        if !p.is_hermitian(tol) {
            return arg(format!("projector {i} is not Hermitian"));
        }
        if !(&p.mat * &p.mat - &p.mat).iter().all(|z| z.norm() <= tol) {
            return arg(format!("projector {i} is not idempotent"));
        }
        for (j, q) in projectors.iter().enumerate().skip(i + 1) {
            if !(&p.mat * &q.mat).iter().all(|z| z.norm() <= tol) {
                return arg(format!("projectors {i} and {j} are not orthogonal"));
            }
        }
        total += &p.mat;
    }
    if !(&total - Matrix::identity(dim, dim)).iter().all(|z| z.norm() <= tol) {
        return arg("projectors do not sum to the identity");
    }
    Ok(projectors
        .iter()
        .map(|p| {
            let branch = &p.mat * &rho.mat * &p.mat;
            let prob = branch.trace().re.max(0.0);
            let state =
                (prob > ZERO_BRANCH).then(|| DensityMatrix { mat: branch.unscale(prob), tolerance: rho.tolerance });
            MeasurementBranch { probability: prob, state }
        })
        .collect())
}

pub fn fidelity_with_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return arg(format!("state dimension {} differs from vector dimension {}", rho.dim(), psi.dim()));
    }
    let v = &rho.mat * &psi.amps;
    Ok(psi.amps.dotc(&v).re.clamp(0.0, 1.0))
}

impl From<ComplexOperator> for Matrix {
    fn from(op: ComplexOperator) -> Self {
        op.mat
    }
}

impl TryFrom<Matrix> for DensityMatrix {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        DensityMatrix::new(m)
    }
}
