//! Quantum and classical Fisher information, closed-form information
//! matrices and precision bounds.
//!
//! Numeric derivatives are symmetric central differences with one Richardson
//! step: `D = (4 D(h/2) − D(h)) / 3`.

mod bounds;
mod closed_form;

pub use bounds::*;
pub use closed_form::*;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::qcore::{embed, CMatrix, CVector, OutcomeDistribution, QuantumState, StateVector, C64};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;
/// Outcomes below this probability are treated as dead by the plain CFIM.
const DEAD_PROB: f64 = 1e-13;
/// Relative eigenvalue cutoff separating singular from invertible.
pub const SINGULAR_RTOL: f64 = 1e-10;

/// Real symmetric PSD information matrix with labelled axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    m: DMatrix<f64>,
    labels: Vec<String>,
}

impl FisherMatrix {
    /// Validates symmetry (`1e-10`) and positivity (eigenvalues ≥ `−1e-8`,
    /// both scaled by `max(1, ‖F‖)`), then symmetrizes exactly.
    pub fn new(m: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: m.nrows() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("information matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let deviation = (&m - m.transpose()).amax();
        if deviation > SYMMETRY_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        let sym = (&m + m.transpose()) * 0.5;
        if sym.nrows() > 0 {
            let min_eigenvalue = sym.clone().symmetric_eigen().eigenvalues.min();
            if min_eigenvalue < -PSD_TOL * scale {
                return Err(Error::NotPositive { min_eigenvalue });
            }
        }
        Ok(Self { m: sym, labels })
    }

    pub fn from_rows(rows: &[&[f64]], labels: &[&str]) -> Result<Self> {
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(m, labels.iter().map(|s| s.to_string()).collect())
    }

    pub fn diagonal(values: &[f64], labels: &[&str]) -> Result<Self> {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values));
        Self::new(m, labels.iter().map(|s| s.to_string()).collect())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { m: &self.m * factor, labels: self.labels.clone() }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    /// Sub-matrix on the given axes, in the given order.
    pub fn block(&self, axes: &[usize]) -> Self {
        let k = axes.len();
        Self {
            m: DMatrix::from_fn(k, k, |i, j| self.m[(axes[i], axes[j])]),
            labels: axes.iter().map(|&a| self.labels[a].clone()).collect(),
        }
    }

    /// Largest `|F_ij|` with `i ∈ a`, `j ∈ b`.
    pub fn cross_block_max(&self, a: &[usize], b: &[usize]) -> f64 {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .fold(0.0, |acc, (i, j)| acc.max(self.m[(i, j)].abs()))
    }

    pub fn max_abs_diff(&self, other: &FisherMatrix) -> f64 {
        (&self.m - &other.m).amax()
    }

    /// Largest entrywise difference divided by the largest entry of `other`.
    pub fn max_rel_diff(&self, other: &FisherMatrix) -> f64 {
        self.max_abs_diff(other) / other.m.amax().max(f64::MIN_POSITIVE)
    }

    /// Smallest eigenvalue of `self − other`; non-negative when `self ⪰ other`.
    pub fn min_eigenvalue_of_difference(&self, other: &FisherMatrix) -> f64 {
        (&self.m - &other.m).symmetric_eigen().eigenvalues.min()
    }
}

/// Parametrized pure states.
pub trait StateFamily: Sync {
    fn labels(&self) -> Vec<String>;
    fn state(&self, x: &[f64]) -> Result<StateVector>;
}

/// Parametrized outcome distributions.
pub trait ProbabilityFamily: Sync {
    fn labels(&self) -> Vec<String>;
    fn distribution(&self, x: &[f64]) -> Result<OutcomeDistribution>;
}

/// A state family given by a closure.
pub struct FnStateFamily<F> {
    labels: Vec<String>,
    f: F,
}

impl<F> FnStateFamily<F>
where
    F: Fn(&[f64]) -> Result<StateVector> + Sync,
{
    pub fn new(labels: &[&str], f: F) -> Self {
        Self { labels: labels.iter().map(|s| s.to_string()).collect(), f }
    }
}

impl<F> StateFamily for FnStateFamily<F>
where
    F: Fn(&[f64]) -> Result<StateVector> + Sync,
{
    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn state(&self, x: &[f64]) -> Result<StateVector> {
        (self.f)(x)
    }
}

/// A probability family given by a closure.
pub struct FnProbabilityFamily<F> {
    labels: Vec<String>,
    f: F,
}

impl<F> FnProbabilityFamily<F>
where
    F: Fn(&[f64]) -> Result<OutcomeDistribution> + Sync,
{
    pub fn new(labels: &[&str], f: F) -> Self {
        Self { labels: labels.iter().map(|s| s.to_string()).collect(), f }
    }
}

impl<F> ProbabilityFamily for FnProbabilityFamily<F>
where
    F: Fn(&[f64]) -> Result<OutcomeDistribution> + Sync,
{
    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn distribution(&self, x: &[f64]) -> Result<OutcomeDistribution> {
        (self.f)(x)
    }
}

/// Restriction of a family to some of its axes, the rest pinned at `base`.
pub struct SubFamily<'a, F: ?Sized> {
    inner: &'a F,
    base: Vec<f64>,
    free: Vec<usize>,
}

impl<'a, F: ?Sized> SubFamily<'a, F> {
    pub fn new(inner: &'a F, base: &[f64], free: &[usize]) -> Self {
        Self { inner, base: base.to_vec(), free: free.to_vec() }
    }

    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x[k];
        }
        full
    }

    /// The restricted point corresponding to `base`.
    pub fn point(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.base[i]).collect()
    }
}

impl<F: StateFamily + ?Sized> StateFamily for SubFamily<'_, F> {
    fn labels(&self) -> Vec<String> {
        let all = self.inner.labels();
        self.free.iter().map(|&i| all[i].clone()).collect()
    }

    fn state(&self, x: &[f64]) -> Result<StateVector> {
        self.inner.state(&self.full(x))
    }
}

impl<F: ProbabilityFamily + ?Sized> ProbabilityFamily for SubFamily<'_, F> {
    fn labels(&self) -> Vec<String> {
        let all = self.inner.labels();
        self.free.iter().map(|&i| all[i].clone()).collect()
    }

    fn distribution(&self, x: &[f64]) -> Result<OutcomeDistribution> {
        self.inner.distribution(&self.full(x))
    }
}

fn shifted(x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += delta;
    y
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {step}")));
    }
    Ok(())
}

fn state_derivatives<F: StateFamily + ?Sized>(
    family: &F,
    x: &[f64],
    step: f64,
) -> Result<(StateVector, Vec<CVector>)> {
    check_step(step)?;
    let psi = family.state(x)?;
    let central = |axis: usize, h: f64| -> Result<CVector> {
        let plus = family.state(&shifted(x, axis, h))?;
        let minus = family.state(&shifted(x, axis, -h))?;
        Ok((plus.amplitudes() - minus.amplitudes()) / C64::new(2.0 * h, 0.0))
    };
    let mut derivs = Vec::with_capacity(x.len());
    for axis in 0..x.len() {
        let coarse = central(axis, step)?;
        let fine = central(axis, 0.5 * step)?;
        derivs.push((fine * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0));
    }
    Ok((psi, derivs))
}

/// Gauge-covariant overlaps `⟨∂_jψ|∂_kψ⟩ − ⟨∂_jψ|ψ⟩⟨ψ|∂_kψ⟩`; the real part
/// gives the QFIM, the imaginary part the weak-commutativity residual.
fn overlap_matrix<F: StateFamily + ?Sized>(
    family: &F,
    x: &[f64],
    step: f64,
) -> Result<DMatrix<C64>> {
    let (psi, d) = state_derivatives(family, x, step)?;
    let amps = psi.amplitudes();
    let proj: Vec<C64> = d.iter().map(|dj| amps.dotc(dj)).collect();
    let n = x.len();
    Ok(DMatrix::from_fn(n, n, |j, k| d[j].dotc(&d[k]) - proj[j].conj() * proj[k]))
}

/// QFIM of a pure-state family: `4 Re(⟨∂_jψ|∂_kψ⟩ − ⟨∂_jψ|ψ⟩⟨ψ|∂_kψ⟩)`.
pub fn qfim_overlap<F: StateFamily + ?Sized>(family: &F, x: &[f64], step: f64) -> Result<FisherMatrix> {
    let g = overlap_matrix(family, x, step)?;
    let m = g.map(|z| 4.0 * z.re);
    FisherMatrix::new(m, family.labels())
}

/// `max |Im(⟨∂_jψ|∂_kψ⟩ − ⟨∂_jψ|ψ⟩⟨ψ|∂_kψ⟩)|` per pair. The subtracted term
/// is real for unitary families, so this equals the plain `Im⟨∂_jψ|∂_kψ⟩`
/// there while staying invariant under parameter-dependent global phases.
pub fn weak_commutativity_residual<F: StateFamily + ?Sized>(
    family: &F,
    x: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let g = overlap_matrix(family, x, step)?;
    Ok(g.map(|z| z.im.abs()))
}

/// QFIM from generators: `2⟨{h_j, h_k}⟩ − 4⟨h_j⟩⟨h_k⟩`. Each generator acts
/// on `targets` and is identity-padded to the probe's register.
pub fn qfim_from_generators(
    probe: &StateVector,
    generators: &[CMatrix],
    targets: &[usize],
    labels: &[&str],
) -> Result<FisherMatrix> {
    if generators.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: generators.len() });
    }
    let n_qubits = probe.n_qubits();
    let full: Vec<CMatrix> = generators
        .iter()
        .map(|h| embed(h, targets, n_qubits))
        .collect::<Result<_>>()?;
    let mean: Vec<f64> = full.iter().map(|h| probe.expectation(h).re).collect();
    let k = full.len();
    let m = DMatrix::from_fn(k, k, |i, j| {
        let anti = &full[i] * &full[j] + &full[j] * &full[i];
        2.0 * probe.expectation(&anti).re - 4.0 * mean[i] * mean[j]
    });
    FisherMatrix::new(m, labels.iter().map(|s| s.to_string()).collect())
}

fn probability_derivatives<F: ProbabilityFamily + ?Sized>(
    family: &F,
    x: &[f64],
    step: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_step(step)?;
    let p = family.distribution(x)?.probs().to_vec();
    let central = |axis: usize, h: f64| -> Result<Vec<f64>> {
        let plus = family.distribution(&shifted(x, axis, h))?;
        let minus = family.distribution(&shifted(x, axis, -h))?;
        Ok(plus
            .probs()
            .iter()
            .zip(minus.probs())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    };
    let mut derivs = Vec::with_capacity(x.len());
    for axis in 0..x.len() {
        let coarse = central(axis, step)?;
        let fine = central(axis, 0.5 * step)?;
        derivs.push(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect());
    }
    Ok((p, derivs))
}

/// Plain CFIM `Σ_i ∂_jP_i ∂_kP_i / P_i`. Outcomes with `P_i < 1e-13` are
/// dropped; use [`cfim_with_limit`] where such outcomes carry information.
pub fn cfim<F: ProbabilityFamily + ?Sized>(family: &F, x: &[f64], step: f64) -> Result<FisherMatrix> {
    let (p, d) = probability_derivatives(family, x, step)?;
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, &pi) in p.iter().enumerate() {
        if pi < DEAD_PROB {
            continue;
        }
        for j in 0..n {
            for k in j..n {
                let v = d[j][i] * d[k][i] / pi;
                m[(j, k)] += v;
                if j != k {
                    m[(k, j)] += v;
                }
            }
        }
    }
    FisherMatrix::new(m, family.labels())
}

/// How a CFIM was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitDiagnostics {
    /// Whether dead outcomes forced the displaced-limit evaluation.
    pub used_limit: bool,
    /// Relative disagreement between the two first-level Richardson estimates.
    pub spread: f64,
    pub warned: bool,
}

/// Displacements used for the 0/0 limit.
pub const LIMIT_EPSILONS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];
const LIMIT_WARN_RTOL: f64 = 1e-3;

/// CFIM with the zero-probability limit handled by displacement.
///
/// When some outcome has `P < 1e-10` at `x`, its contribution `(∂P)²/P` is a
/// 0/0 form. The CFIM is then evaluated at `x + ε d` for
/// `ε ∈ {1e-3, 5e-4, 2.5e-4}` (finite-difference step `ε/100`) and
/// Richardson-extrapolated to `ε → 0`. `direction` defaults to the
/// normalized `(1, 2, …, k)`.
pub fn cfim_with_limit<F: ProbabilityFamily + ?Sized>(
    family: &F,
    x: &[f64],
    step: f64,
    direction: Option<&[f64]>,
) -> Result<(FisherMatrix, LimitDiagnostics)> {
    let p = family.distribution(x)?;
    if p.probs().iter().all(|&v| v >= 1e-10) {
        let f = cfim(family, x, step)?;
        return Ok((f, LimitDiagnostics { used_limit: false, spread: 0.0, warned: false }));
    }
    let n = x.len();
    let d: Vec<f64> = match direction {
        Some(d) if d.len() == n => d.to_vec(),
        Some(d) => return Err(Error::DimensionMismatch { expected: n, got: d.len() }),
        None => (1..=n).map(|i| i as f64).collect(),
    };
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("displacement direction is zero".into()));
    }
    let at = |eps: f64| -> Result<DMatrix<f64>> {
        let y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + eps * di / norm).collect();
        Ok(cfim(family, &y, eps * 1e-2)?.m)
    };
    let [e0, e1, e2] = LIMIT_EPSILONS;
    let (f0, f1, f2) = (at(e0)?, at(e1)?, at(e2)?);
    let r1 = &f1 * 2.0 - &f0;
    let r2 = &f2 * 2.0 - &f1;
    let limit = (&r2 * 4.0 - &r1) / 3.0;
    let spread = (&r2 - &r1).amax() / r2.amax().max(f64::MIN_POSITIVE);
    let warned = spread > LIMIT_WARN_RTOL;
    if warned {
        log::warn!("CFIM limit extrapolation disagrees by {spread:.2e} (relative)");
    }
    let f = FisherMatrix::new(limit, family.labels())?;
    Ok((f, LimitDiagnostics { used_limit: true, spread, warned }))
}

/// Covariance lower bound `F⁻¹` with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBound {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl CovarianceBound {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }
}

/// Why an information matrix could not be inverted.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityReport {
    pub eigenvalues: Vec<f64>,
    /// Unit vectors (in label coordinates) spanning the non-identifiable subspace.
    pub null_directions: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl SingularityReport {
    /// Labels with a non-negligible weight in some null direction.
    pub fn non_identifiable(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            if self.null_directions.iter().any(|v| v[i].abs() > 1e-6) {
                out.push(l.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inversion {
    Regular(CovarianceBound),
    Singular(SingularityReport),
}

impl Inversion {
    pub fn is_singular(&self) -> bool {
        matches!(self, Inversion::Singular(_))
    }

    pub fn covariance(&self) -> Option<&CovarianceBound> {
        match self {
            Inversion::Regular(c) => Some(c),
            Inversion::Singular(_) => None,
        }
    }

    /// `Tr(F⁻¹)`, infinite for a singular matrix.
    pub fn trace(&self) -> f64 {
        self.covariance().map_or(f64::INFINITY, CovarianceBound::trace)
    }
}

/// Inverts through the eigendecomposition; eigenvalues below
/// `1e-10 × λ_max` make the matrix singular.
pub fn invert_info(f: &FisherMatrix) -> Inversion {
    let SymmetricEigen { eigenvalues, eigenvectors } = f.m.clone().symmetric_eigen();
    let lmax = eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cutoff = SINGULAR_RTOL * lmax;
    let null: Vec<usize> = (0..eigenvalues.len()).filter(|&i| eigenvalues[i] <= cutoff).collect();
    if lmax == 0.0 || !null.is_empty() {
        let null_directions = if lmax == 0.0 {
            (0..f.dim()).map(|i| (0..f.dim()).map(|j| f64::from(i == j)).collect()).collect()
        } else {
            null.iter().map(|&i| eigenvectors.column(i).iter().copied().collect()).collect()
        };
        return Inversion::Singular(SingularityReport {
            eigenvalues: eigenvalues.iter().copied().collect(),
            null_directions,
            labels: f.labels.clone(),
        });
    }
    let inv_diag = DMatrix::from_diagonal(&eigenvalues.map(|l| 1.0 / l));
    let inv = &eigenvectors * inv_diag * eigenvectors.transpose();
    let matrix = (&inv + inv.transpose()) * 0.5;
    Inversion::Regular(CovarianceBound { matrix, labels: f.labels.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generators, signal_unitary, VectorField};
    use crate::qcore::{bell_states, identity, measure_probs, Unitary, BELL_POVM_1};

    fn rs_family() -> impl StateFamily {
        FnStateFamily::new(&["B", "theta", "phi"], |x: &[f64]| {
            let f = VectorField::spherical(x[0], x[1], x[2]);
            let u = signal_unitary(&f, 1.1).kron(&Unitary::identity(1))?;
            bell_states()[0].apply(&u)
        })
    }

    #[test]
    fn invert_diag() {
        let f = FisherMatrix::diagonal(&[4.0, 16.0], &["a", "b"]).unwrap();
        let inv = invert_info(&f);
        let c = inv.covariance().unwrap();
        assert!((c.matrix[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((c.matrix[(1, 1)] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn invert_singular_names_axes() {
        let f = FisherMatrix::from_rows(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 2.0]], &["a", "b", "c"])
            .unwrap();
        match invert_info(&f) {
            Inversion::Singular(r) => assert_eq!(r.non_identifiable(), vec!["a", "b"]),
            Inversion::Regular(_) => panic!("expected singular"),
        }
    }

    #[test]
    fn rejects_non_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(FisherMatrix::new(m, vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn overlap_matches_generators_for_rs() {
        let fam = rs_family();
        let x = [0.8, 1.1, -0.6];
        let num = qfim_overlap(&fam, &x, DEFAULT_STEP).unwrap();
        let g = generators(&VectorField::spherical(x[0], x[1], x[2]), 1.1);
        let exact = qfim_from_generators(&bell_states()[0], &g.matrices(), &[0], &["B", "theta", "phi"]).unwrap();
        assert!(num.max_abs_diff(&exact) < 1e-6, "{}", num.max_abs_diff(&exact));
        let s = (0.8f64 * 1.1).sin();
        let st = 1.1f64.sin();
        let expected = [4.0 * 1.1 * 1.1, 4.0 * s * s, 4.0 * s * s * st * st];
        for (i, e) in expected.iter().enumerate() {
            assert!((exact.get(i, i) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_family_has_no_information() {
        let fam = FnStateFamily::new(&["a", "b"], |_x: &[f64]| Ok(bell_states()[1].clone()));
        let f = qfim_overlap(&fam, &[0.3, 0.4], DEFAULT_STEP).unwrap();
        assert_eq!(f.matrix().amax(), 0.0);
        let uniform = FnProbabilityFamily::new(&["a"], |_x: &[f64]| {
            Ok(OutcomeDistribution::uniform(vec!["0".into(), "1".into()]))
        });
        assert_eq!(cfim(&uniform, &[0.1], DEFAULT_STEP).unwrap().matrix().amax(), 0.0);
    }

    #[test]
    fn identity_generator_is_silent() {
        let probe = bell_states()[0].clone();
        let f = qfim_from_generators(&probe, &[identity(2), crate::qcore::pauli_z()], &[0], &["c", "z"]).unwrap();
        assert!(f.get(0, 0).abs() < 1e-14);
        assert!(f.get(0, 1).abs() < 1e-14);
        assert!((f.get(1, 1) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn eigenstate_probe_has_zero_b_information() {
        let t = 0.9;
        let f = VectorField::spherical(1.0, 0.0, 0.0);
        let probe = crate::qcore::StateVector::basis(2, 0).unwrap();
        let g = generators(&f, t);
        let q = qfim_from_generators(&probe, std::slice::from_ref(&g.b.h), &[0], &["B"]).unwrap();
        assert!(q.get(0, 0).abs() < 1e-14);
    }

    #[test]
    fn rs_cfim_saturates() {
        let t = 1.1;
        let fam = FnProbabilityFamily::new(&["B", "theta", "phi"], |x: &[f64]| {
            let f = VectorField::spherical(x[0], x[1], x[2]);
            let u = signal_unitary(&f, t).kron(&Unitary::identity(1))?;
            measure_probs(&bell_states()[0].apply(&u)?, &BELL_POVM_1)
        });
        let x = [0.7, 1.0, 0.5];
        let c = cfim(&fam, &x, DEFAULT_STEP).unwrap();
        let s = (0.7f64 * t).sin();
        let st = 1.0f64.sin();
        let q = FisherMatrix::diagonal(&[4.0 * t * t, 4.0 * s * s, 4.0 * s * s * st * st], &["B", "theta", "phi"])
            .unwrap();
        assert!(c.max_abs_diff(&q) < 1e-6);
        let residual = weak_commutativity_residual(&rs_family(), &x, DEFAULT_STEP).unwrap();
        assert!(residual.amax() < 1e-8);
    }
}
