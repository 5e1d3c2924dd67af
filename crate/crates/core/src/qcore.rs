//! Dense complex linear algebra for registers of one to four qubits.
//!
//! Qubit 0 is the most significant bit of a basis index, so the ket `|0011⟩`
//! has qubits 0 and 1 in `|0⟩` and basis index 3. Every operator and state in
//! the crate follows this ordering.

use std::sync::{Arc, LazyLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest register handled by the kernel.
pub const MAX_QUBITS: usize = 4;
pub const MAX_DIM: usize = 1 << MAX_QUBITS;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;
const PROB_CLIP_TOL: f64 = 1e-12;
const PROB_SUM_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { dim });
    }
    let qubits = dim.trailing_zeros() as usize;
    if qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits { qubits, max: MAX_QUBITS });
    }
    Ok(qubits)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// `v · σ` for a real 3-vector.
pub fn pauli_dot(v: [f64; 3]) -> CMatrix {
    let [x, y, z] = v;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(z, 0.0),
            C64::new(x, -y),
            C64::new(x, y),
            C64::new(-z, 0.0),
        ],
    )
}

/// Kronecker product, rejected when either side of the result exceeds the
/// four-qubit dimension.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let rows = a.nrows() * b.nrows();
    let cols = a.ncols() * b.ncols();
    for d in [rows, cols] {
        if d > MAX_DIM {
            return Err(Error::TooManyQubits {
                qubits: d.trailing_zeros() as usize,
                max: MAX_QUBITS,
            });
        }
    }
    Ok(a.kronecker(b))
}

/// Kronecker product of a list of operators.
pub fn kron_all(factors: &[&CMatrix]) -> Result<CMatrix> {
    let mut acc = CMatrix::identity(1, 1);
    for f in factors {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

/// `exp(-i t (v·σ))` in closed form: `cos(|v|t) I - i sin(|v|t) (v̂·σ)`.
pub fn pauli_exponential(v: [f64; 3], t: f64) -> Unitary {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm == 0.0 {
        return Unitary::identity(1);
    }
    let angle = norm * t;
    let unit = [v[0] / norm, v[1] / norm, v[2] / norm];
    let m = identity(2) * C64::new(angle.cos(), 0.0) - pauli_dot(unit) * (I * angle.sin());
    Unitary { m }
}

/// `exp(-i t H)` for Hermitian `H` through its eigendecomposition. Used as an
/// independent reference for the closed-form exponentials.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::new(0.0, -l * t).exp()),
    );
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&phases) * v.adjoint()
}

/// Embeds an operator acting on `targets` (listed most significant first)
/// into an `n_qubits` register, with identity on the other qubits.
pub fn embed(op: &CMatrix, targets: &[usize], n_qubits: usize) -> Result<CMatrix> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits { qubits: n_qubits, max: MAX_QUBITS });
    }
    let k = targets.len();
    if op.nrows() != 1 << k || op.ncols() != 1 << k {
        return Err(Error::DimensionMismatch { expected: 1 << k, got: op.nrows() });
    }
    for (i, &q) in targets.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, qubits: n_qubits });
        }
        if targets[..i].contains(&q) {
            return Err(Error::OverlappingPairs { qubit: q });
        }
    }
    let dim = 1 << n_qubits;
    let bit = |idx: usize, q: usize| (idx >> (n_qubits - 1 - q)) & 1;
    let target_mask: usize = targets.iter().map(|&q| 1 << (n_qubits - 1 - q)).sum();
    let sub = |idx: usize| targets.iter().fold(0, |acc, &q| (acc << 1) | bit(idx, q));
    let mut out = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            if r & !target_mask == c & !target_mask {
                out[(r, c)] = op[(sub(r), sub(c))];
            }
        }
    }
    Ok(out)
}

/// A single-qubit operator.
pub type Op2 = nalgebra::Matrix2<C64>;

/// Single-qubit linear map on row-major vectorized 2×2 matrices.
pub type Superop = nalgebra::Matrix4<C64>;

/// Superoperator of `ρ → U ρ U†`.
pub fn unitary_superop(u: &Op2) -> Superop {
    kraus_superop(std::slice::from_ref(u))
}

/// Superoperator of `ρ → Σ K ρ K†`.
pub fn kraus_superop(kraus: &[Op2]) -> Superop {
    let mut s = Superop::zeros();
    for k in kraus {
        for (i, j, a, b) in (0..16).map(|x| (x >> 2, x & 3, (x >> 3) & 1, (x >> 2) & 1)) {
            let (c, d) = ((j >> 1) & 1, j & 1);
            s[(i, j)] += k[(a, c)] * k[(b, d)].conj();
        }
    }
    s
}

/// Converts a 2×2 dynamic matrix into an [`Op2`].
pub fn op2(m: &CMatrix) -> Op2 {
    assert_eq!((m.nrows(), m.ncols()), (2, 2), "single-qubit operator expected");
    Op2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Applies `op` to qubit `q` of a register stored with stride `stride`
/// between consecutive amplitudes.
fn apply_op2(data: &mut [C64], offset: usize, stride: usize, n_qubits: usize, q: usize, op: &Op2) {
    let dim = 1usize << n_qubits;
    let bit = 1usize << (n_qubits - 1 - q);
    for i in 0..dim {
        if i & bit != 0 {
            continue;
        }
        let ia = offset + i * stride;
        let ib = offset + (i | bit) * stride;
        let (a, b) = (data[ia], data[ib]);
        data[ia] = op[(0, 0)] * a + op[(0, 1)] * b;
        data[ib] = op[(1, 0)] * a + op[(1, 1)] * b;
    }
}

/// Pure state on 1–4 qubits with unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: CVector,
}

impl StateVector {
    pub fn new(amps: CVector) -> Result<Self> {
        qubits_for_dim(amps.len())?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    /// Rescales to unit norm; rejects the zero vector.
    pub fn normalized(amps: CVector) -> Result<Self> {
        qubits_for_dim(amps.len())?;
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps: amps / C64::new(norm, 0.0) })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amps))
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        qubits_for_dim(dim)?;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: index });
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = ONE;
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn kron(&self, other: &StateVector) -> Result<StateVector> {
        let m = kron(
            &CMatrix::from_column_slice(self.dim(), 1, self.amps.as_slice()),
            &CMatrix::from_column_slice(other.dim(), 1, other.amps.as_slice()),
        )?;
        Ok(StateVector { amps: CVector::from_column_slice(m.as_slice()) })
    }

    pub fn apply(&self, u: &Unitary) -> Result<StateVector> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.dim() });
        }
        Ok(StateVector { amps: &u.m * &self.amps })
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amps * self.amps.adjoint();
        DensityMatrix { m }
    }

    /// Applies unitary single-qubit operators `(qubit, U)` in order.
    pub fn apply_local(&self, ops: &[(usize, Op2)]) -> Result<StateVector> {
        let n = self.n_qubits();
        let mut amps = self.amps.clone();
        for (q, op) in ops {
            if *q >= n {
                return Err(Error::QubitOutOfRange { index: *q, qubits: n });
            }
            apply_op2(amps.as_mut_slice(), 0, 1, n, *q, op);
        }
        Ok(StateVector { amps })
    }
}

/// Mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        qubits_for_dim(m.nrows())?;
        let deviation = max_abs(&(&m - m.adjoint()));
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = m.trace().re;
        if (trace - 1.0).abs() > NORM_TOL {
            return Err(Error::BadTrace { trace });
        }
        let rho = Self { m };
        let min_eigenvalue = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(rho)
    }

    /// Internal constructor for results of trace-preserving maps; re-Hermitizes
    /// to remove round-off asymmetry.
    pub(crate) fn from_cptp_output(m: CMatrix) -> Self {
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self { m: herm }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        qubits_for_dim(dim)?;
        Ok(Self { m: identity(dim) / C64::new(dim as f64, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix { m: kron(&self.m, &other.m)? })
    }

    pub fn evolve(&self, u: &Unitary) -> Result<DensityMatrix> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.dim() });
        }
        Ok(Self::from_cptp_output(&u.m * &self.m * u.m.adjoint()))
    }

    /// `ρ → O ρ O†` with `O` acting on qubit `q`; `O` need not be unitary.
    pub fn conjugate_local(&self, q: usize, op: &Op2) -> Result<DensityMatrix> {
        let n = self.n_qubits();
        if q >= n {
            return Err(Error::QubitOutOfRange { index: q, qubits: n });
        }
        let dim = self.dim();
        let mut m = self.m.clone();
        let conj = op.map(|z| z.conj());
        // Column-major storage: columns are contiguous, rows have stride `dim`.
        for c in 0..dim {
            apply_op2(m.as_mut_slice(), c * dim, 1, n, q, op);
        }
        for r in 0..dim {
            apply_op2(m.as_mut_slice(), r, dim, n, q, &conj);
        }
        Ok(DensityMatrix { m })
    }

    /// Single-qubit Kraus channel `ρ → Σ K ρ K†` on qubit `q`.
    pub fn apply_local_kraus(&self, q: usize, kraus: &[Op2]) -> Result<DensityMatrix> {
        let mut acc = CMatrix::zeros(self.dim(), self.dim());
        for k in kraus {
            acc += self.conjugate_local(q, k)?.m;
        }
        Ok(Self::from_cptp_output(acc))
    }

    /// Applies a single-qubit superoperator on qubit `q`. `s` acts on the
    /// local block `(ρ₀₀, ρ₀₁, ρ₁₀, ρ₁₁)` of every pair of row/column
    /// indices that differ only in bit `q`.
    pub fn apply_local_superop(&self, q: usize, s: &Superop) -> Result<DensityMatrix> {
        let n = self.n_qubits();
        if q >= n {
            return Err(Error::QubitOutOfRange { index: q, qubits: n });
        }
        let dim = self.dim();
        let bit = 1usize << (n - 1 - q);
        let mut m = self.m.clone();
        for r in (0..dim).filter(|r| r & bit == 0) {
            for c in (0..dim).filter(|c| c & bit == 0) {
                let idx = [(r, c), (r, c | bit), (r | bit, c), (r | bit, c | bit)];
                let v = nalgebra::Vector4::from_fn(|k, _| self.m[idx[k]]);
                let w = s * v;
                for (k, &(i, j)) in idx.iter().enumerate() {
                    m[(i, j)] = w[k];
                }
            }
        }
        Ok(Self::from_cptp_output(m))
    }

    /// Reduced state on the qubits in `keep`, in ascending qubit order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let n = self.n_qubits();
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if let Some(&q) = kept.iter().find(|&&q| q >= n) {
            return Err(Error::QubitOutOfRange { index: q, qubits: n });
        }
        let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
        let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
        let compose = |kept_idx: usize, traced_idx: usize| {
            let mut full = 0usize;
            for (pos, &q) in kept.iter().enumerate() {
                let b = (kept_idx >> (kept.len() - 1 - pos)) & 1;
                full |= b << (n - 1 - q);
            }
            for (pos, &q) in traced.iter().enumerate() {
                let b = (traced_idx >> (traced.len() - 1 - pos)) & 1;
                full |= b << (n - 1 - q);
            }
            debug_assert!(kept.iter().all(|&q| bit(full, q) <= 1));
            full
        };
        let kd = 1usize << kept.len();
        let td = 1usize << traced.len();
        let mut out = CMatrix::zeros(kd, kd);
        for r in 0..kd {
            for c in 0..kd {
                let mut acc = ZERO;
                for t in 0..td {
                    acc += self.m[(compose(r, t), compose(c, t))];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(Self::from_cptp_output(out))
    }
}

/// Unitary operator on 1–4 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    m: CMatrix,
}

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        qubits_for_dim(m.nrows())?;
        let deviation = max_abs(&(m.adjoint() * &m - identity(m.nrows())));
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { m })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self { m: identity(1 << n_qubits) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary { m: self.m.adjoint() }
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &Unitary) -> Result<Unitary> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(Unitary { m: &self.m * &other.m })
    }

    pub fn kron(&self, other: &Unitary) -> Result<Unitary> {
        Ok(Unitary { m: kron(&self.m, &other.m)? })
    }

    pub fn pow(&self, n: u32) -> Unitary {
        Unitary { m: self.m.pow(n) }
    }

    pub fn deviation_from_unitary(&self) -> f64 {
        max_abs(&(self.m.adjoint() * &self.m - identity(self.dim())))
    }
}

/// Anything a POVM can be evaluated on.
pub trait QuantumState {
    fn dim(&self) -> usize;
    /// `Tr(ρ O)`.
    fn expectation(&self, op: &CMatrix) -> C64;
    fn density(&self) -> DensityMatrix;
    fn as_pure(&self) -> Option<&StateVector>;
}

impl QuantumState for StateVector {
    fn dim(&self) -> usize {
        self.amps.len()
    }

    fn expectation(&self, op: &CMatrix) -> C64 {
        self.amps.dotc(&(op * &self.amps))
    }

    fn density(&self) -> DensityMatrix {
        self.to_density()
    }

    fn as_pure(&self) -> Option<&StateVector> {
        Some(self)
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn expectation(&self, op: &CMatrix) -> C64 {
        (&self.m * op).trace()
    }

    fn density(&self) -> DensityMatrix {
        self.clone()
    }

    fn as_pure(&self) -> Option<&StateVector> {
        None
    }
}

/// The Bell states in the order `Φ+, Φ-, Ψ+, Ψ-`, labelled `00, 01, 10, 11`.
pub fn bell_states() -> [StateVector; 4] {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = ZERO;
    let mk = |a: [C64; 4]| StateVector { amps: CVector::from_column_slice(&a) };
    [
        mk([s, z, z, s]),
        mk([s, z, z, -s]),
        mk([z, s, s, z]),
        mk([z, s, -s, z]),
    ]
}

pub const BELL_LABELS: [&str; 4] = ["00", "01", "10", "11"];

/// A POVM with labelled elements. Rank-one elements keep their vectors so
/// pure-state probabilities cost one inner product each.
#[derive(Debug, Clone)]
pub struct PovmSet {
    elements: Vec<CMatrix>,
    labels: Labels,
    vectors: Option<Vec<CVector>>,
}

impl PovmSet {
    pub fn new(elements: Vec<CMatrix>, labels: Vec<String>) -> Result<Self> {
        Self::validated(elements, labels, None)
    }

    fn validated(
        elements: Vec<CMatrix>,
        labels: Vec<String>,
        vectors: Option<Vec<CVector>>,
    ) -> Result<Self> {
        if elements.is_empty() || elements.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: elements.len() });
        }
        let dim = elements[0].nrows();
        qubits_for_dim(dim)?;
        let mut sum = CMatrix::zeros(dim, dim);
        for e in &elements {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: e.nrows() });
            }
            let deviation = max_abs(&(e - e.adjoint()));
            if deviation > PSD_TOL {
                return Err(Error::NotHermitian { deviation });
            }
            let min_eigenvalue = e
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            if min_eigenvalue < -PSD_TOL {
                return Err(Error::NotPositive { min_eigenvalue });
            }
            sum += e;
        }
        let deviation = max_abs(&(sum - identity(dim)));
        if deviation > PSD_TOL {
            return Err(Error::IncompletePovm { deviation });
        }
        Ok(Self { elements, labels: labels.into(), vectors })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn shared_labels(&self) -> Labels {
        self.labels.clone()
    }

    /// Rank-one vectors `v_k` with `E_k = |v_k⟩⟨v_k|`, when available.
    pub fn rank_one_vectors(&self) -> Option<&[CVector]> {
        self.vectors.as_deref()
    }
}

/// Bell-basis projective measurement on one or two disjoint qubit pairs of an
/// `n_qubits` register. Labels concatenate per-pair Bell labels, first pair
/// leftmost.
pub fn bell_povm(pairs: &[(usize, usize)], n_qubits: usize) -> Result<PovmSet> {
    if pairs.is_empty() || pairs.len() > 2 {
        return Err(Error::InvalidParameter(format!(
            "Bell POVM needs one or two qubit pairs, got {}",
            pairs.len()
        )));
    }
    let mut seen = Vec::new();
    for &(a, b) in pairs {
        for q in [a, b] {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, qubits: n_qubits });
            }
            if seen.contains(&q) {
                return Err(Error::OverlappingPairs { qubit: q });
            }
            seen.push(q);
        }
    }
    let bells = bell_states();
    // Expand every pair's four Bell vectors into the full register.
    let mut vectors: Vec<(String, CVector)> = vec![(String::new(), {
        let mut v = CVector::zeros(1 << n_qubits);
        v[0] = ONE;
        v
    })];
    // Start from projectors instead: build rank-one vectors only when the
    // pairs cover the whole register, otherwise fall back to embedded projectors.
    let covers_all = seen.len() == n_qubits;
    let mut elements: Vec<(String, CMatrix)> = vec![(String::new(), identity(1 << n_qubits))];
    for &(a, b) in pairs {
        let mut next = Vec::with_capacity(elements.len() * 4);
        for (label, acc) in &elements {
            for (k, bell) in bells.iter().enumerate() {
                let proj = bell.to_density().m;
                let embedded = embed(&proj, &[a, b], n_qubits)?;
                next.push((format!("{label}{}", BELL_LABELS[k]), acc * embedded));
            }
        }
        elements = next;
    }
    let (labels, mats): (Vec<String>, Vec<CMatrix>) = elements.into_iter().unzip();
    let rank_one = if covers_all {
        // Each element is |v⟩⟨v|; recover v from its largest column.
        vectors.clear();
        for m in &mats {
            let (col, _) = (0..m.ncols())
                .map(|c| (c, m.column(c).norm()))
                .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let v = m.column(col).into_owned();
            let norm = v.norm();
            vectors.push((String::new(), v / C64::new(norm, 0.0)));
        }
        Some(vectors.into_iter().map(|(_, v)| v).collect())
    } else {
        None
    };
    PovmSet::validated(mats, labels, rank_one)
}

/// Single-pair Bell POVM on a 2-qubit register.
pub static BELL_POVM_1: LazyLock<PovmSet> =
    LazyLock::new(|| bell_povm(&[(0, 1)], 2).expect("valid Bell POVM"));

/// Two-pair Bell POVM on a 4-qubit register: pair (0,1) left, pair (2,3) right.
pub static BELL_POVM_2: LazyLock<PovmSet> =
    LazyLock::new(|| bell_povm(&[(0, 1), (2, 3)], 4).expect("valid Bell POVM"));

/// Shared outcome labels.
pub type Labels = Arc<[String]>;

/// Outcome probabilities with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    labels: Labels,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Validates and cleans raw probabilities: values in `[-1e-12, 0)` are
    /// clipped to zero and the vector renormalized; anything more negative, or
    /// a sum off by more than `1e-10`, is rejected.
    pub fn new(labels: impl Into<Labels>, probs: Vec<f64>) -> Result<Self> {
        let labels: Labels = labels.into();
        if labels.len() != probs.len() || probs.is_empty() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: probs.len() });
        }
        let mut clipped = probs;
        for (l, p) in labels.iter().zip(clipped.iter_mut()) {
            if !p.is_finite() {
                return Err(Error::Numerical(format!("non-finite probability for {l}")));
            }
            if *p < -PROB_CLIP_TOL {
                return Err(Error::NegativeProbability { label: l.clone(), value: *p });
            }
            *p = p.clamp(0.0, 1.0);
        }
        let sum: f64 = clipped.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::BadNormalization { sum });
        }
        clipped.iter_mut().for_each(|p| *p /= sum);
        Ok(Self { labels, probs: clipped })
    }

    pub fn uniform(labels: impl Into<Labels>) -> Self {
        let labels: Labels = labels.into();
        let p = 1.0 / labels.len() as f64;
        let probs = vec![p; labels.len()];
        Self { labels, probs }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn shared_labels(&self) -> Labels {
        self.labels.clone()
    }

    /// Wraps probabilities already known to be valid (non-negative, summing
    /// to one); checked only in debug builds.
    pub(crate) fn from_trusted(labels: Labels, probs: Vec<f64>) -> Self {
        debug_assert_eq!(labels.len(), probs.len());
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { labels, probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.probs[i])
    }
}

/// Born-rule probabilities of `state` under `povm`.
pub fn measure_probs<S: QuantumState + ?Sized>(
    state: &S,
    povm: &PovmSet,
) -> Result<OutcomeDistribution> {
    if state.dim() != povm.dim() {
        return Err(Error::DimensionMismatch { expected: povm.dim(), got: state.dim() });
    }
    let probs: Vec<f64> = match (state.as_pure(), &povm.vectors) {
        (Some(psi), Some(vs)) => vs.iter().map(|v| v.dotc(&psi.amps).norm_sqr()).collect(),
        _ => povm.elements.iter().map(|e| state.expectation(e).re).collect(),
    };
    OutcomeDistribution::new(povm.labels.clone(), probs)
}

/// Fidelity `F(ρ, σ) = (Tr √(√ρ σ √ρ))²`; reduces to `|⟨a|b⟩|²` for pure
/// states and `⟨a|σ|a⟩` when one side is pure.
pub fn state_fidelity<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: QuantumState + ?Sized,
    B: QuantumState + ?Sized,
{
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let f = match (a.as_pure(), b.as_pure()) {
        (Some(x), Some(y)) => x.inner(y).norm_sqr(),
        (Some(x), None) => b.expectation(&x.to_density().m).re,
        (None, Some(y)) => a.expectation(&y.to_density().m).re,
        (None, None) => {
            let sqrt_a = hermitian_sqrt(a.density().matrix());
            let inner = &sqrt_a * b.density().matrix() * &sqrt_a;
            let eig = inner.symmetric_eigen();
            let s: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
            s * s
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let roots = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)),
    );
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&roots) * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol
    }

    #[test]
    fn kron_identity_and_basis() {
        assert!(close(&kron(&identity(2), &identity(2)).unwrap(), &identity(4), 0.0));
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        let k = zero.kron(&one).unwrap();
        assert_eq!(k, StateVector::basis(2, 1).unwrap());
    }

    #[test]
    fn kron_xx_flips_both() {
        let xx = Unitary::new(kron(&pauli_x(), &pauli_x()).unwrap()).unwrap();
        let out = StateVector::basis(2, 0).unwrap().apply(&xx).unwrap();
        assert_eq!(out, StateVector::basis(2, 3).unwrap());
    }

    #[test]
    fn kron_rejects_five_qubits() {
        let four = identity(16);
        assert!(matches!(kron(&four, &identity(2)), Err(Error::TooManyQubits { .. })));
    }

    #[test]
    fn pauli_exponential_closed_forms() {
        let u = pauli_exponential([0.0, 0.0, 0.0], 7.3);
        assert!(close(u.matrix(), &identity(2), 0.0));
        let u = pauli_exponential([0.0, 0.0, 1.0], FRAC_PI_2);
        let expected = CMatrix::from_row_slice(2, 2, &[-I, ZERO, ZERO, I]);
        assert!(close(u.matrix(), &expected, 1e-15));
        for t in [0.1, 1.3, -2.7, 9.0] {
            let u = pauli_exponential([1.0, 0.0, 0.0], t);
            assert!(close(u.matrix(), &expm_hermitian(&pauli_x(), t), 1e-12));
        }
    }

    #[test]
    fn partial_trace_examples() {
        let rho = StateVector::basis(2, 0).unwrap().to_density();
        let zero = StateVector::basis(1, 0).unwrap().to_density();
        assert!(close(rho.partial_trace(&[0]).unwrap().matrix(), zero.matrix(), 1e-15));
        assert!(close(rho.partial_trace(&[1]).unwrap().matrix(), zero.matrix(), 1e-15));

        let bell = bell_states()[0].to_density();
        let half = identity(2) * C64::new(0.5, 0.0);
        assert!(close(bell.partial_trace(&[0]).unwrap().matrix(), &half, 1e-15));

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = CVector::zeros(16);
        amps[0b0011] = C64::new(s, 0.0);
        amps[0b1100] = C64::new(-s, 0.0);
        let psi0 = StateVector::new(amps).unwrap().to_density();
        let reduced = psi0.partial_trace(&[0, 1]).unwrap();
        let expected = CMatrix::from_diagonal(&CVector::from_column_slice(&[
            C64::new(0.5, 0.0),
            ZERO,
            ZERO,
            C64::new(0.5, 0.0),
        ]));
        assert!(close(reduced.matrix(), &expected, 1e-15));
        assert_eq!(rho.partial_trace(&[]), Err(Error::EmptySelection));
    }

    #[test]
    fn bell_povms_are_complete_rank_one() {
        let one = &*BELL_POVM_1;
        assert_eq!(one.len(), 4);
        let two = &*BELL_POVM_2;
        assert_eq!(two.len(), 16);
        for e in one.elements().iter().chain(two.elements()) {
            let rank = e.clone().symmetric_eigen().eigenvalues.iter().filter(|l| **l > 0.5).count();
            assert_eq!(rank, 1);
        }
        assert_eq!(two.labels()[0b0110], "0110");
        assert!(matches!(bell_povm(&[(0, 1), (1, 2)], 4), Err(Error::OverlappingPairs { qubit: 1 })));
    }

    #[test]
    fn measure_bell_and_mixed() {
        let d = measure_probs(&bell_states()[0], &BELL_POVM_1).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0, 0.0]);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let d = measure_probs(&mixed, &BELL_POVM_1).unwrap();
        for p in d.probs() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        let single = StateVector::basis(1, 0).unwrap();
        assert!(matches!(
            measure_probs(&single, &BELL_POVM_1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negative_probabilities() {
        let labels: Vec<String> = vec!["a".into(), "b".into()];
        let d = OutcomeDistribution::new(labels.clone(), vec![1.0 + 5e-13, -5e-13]).unwrap();
        assert_eq!(d.probs()[1], 0.0);
        assert!(OutcomeDistribution::new(labels, vec![1.0 + 1e-9, -1e-9]).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(state_fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(state_fidelity(&zero, &one).unwrap(), 0.0);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let f = state_fidelity(&bell_states()[0], &mixed).unwrap();
        assert!((f - 0.25).abs() < 1e-15);
        let f = state_fidelity(&mixed, &bell_states()[0].to_density()).unwrap();
        assert!((f - 0.25).abs() < 1e-10);
    }

    #[test]
    fn density_validation() {
        let not_unit = identity(2);
        assert!(matches!(DensityMatrix::new(not_unit), Err(Error::BadTrace { .. })));
        let neg = CMatrix::from_row_slice(2, 2, &[C64::new(1.5, 0.0), ZERO, ZERO, C64::new(-0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPositive { .. })));
        assert!(Unitary::new(pauli_x() * C64::new(2.0, 0.0)).is_err());
        let u = pauli_exponential([0.3, -0.2, 0.9], PI / 3.0);
        assert!(u.deviation_from_unitary() < 1e-14);
    }

    #[test]
    fn embed_matches_kron() {
        let x = pauli_x();
        let left = embed(&x, &[0], 2).unwrap();
        assert!(close(&left, &kron(&x, &identity(2)).unwrap(), 0.0));
        let right = embed(&x, &[1], 2).unwrap();
        assert!(close(&right, &kron(&identity(2), &x).unwrap(), 0.0));
    }
}
