//! Noise channels for protocol runs: phase damping, a uniform Pauli channel
//! for gate errors and per-bit readout confusion with inversion-based
//! mitigation.
//!
//! All channels here are local and unital, and the protocols only apply
//! local unitaries, so a noisy run factorizes into one single-qubit
//! superoperator per qubit, composed over all cycles and applied once to
//! the probe.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::ProtocolRun;
use crate::qcore::{
    kraus_superop, op2, unitary_superop, CMatrix, DensityMatrix, Op2, OutcomeDistribution, Superop, C64,
};

const KRAUS_TOL: f64 = 1e-10;

/// Channel `ρ → Σ K ρ K†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
}

impl KrausChannel {
    /// Rejects operator sets with `‖Σ K†K − I‖ > 1e-10`.
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let dim = operators.first().map(|k| k.nrows()).ok_or(Error::EmptySelection)?;
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &operators {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: k.nrows().max(k.ncols()) });
            }
            sum += k.adjoint() * k;
        }
        let deviation = (sum - CMatrix::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation > KRAUS_TOL {
            return Err(Error::Numerical(format!("Kraus operators are not trace preserving ({deviation:e})")));
        }
        Ok(Self { operators })
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// Applies the channel to the whole register.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let dim = rho.dim();
        if self.operators[0].nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.operators[0].nrows() });
        }
        let mut acc = CMatrix::zeros(dim, dim);
        for k in &self.operators {
            acc += k * rho.matrix() * k.adjoint();
        }
        DensityMatrix::new(acc)
    }

    /// Applies a single-qubit channel to qubit `q`.
    pub fn apply_to(&self, rho: &DensityMatrix, q: usize) -> Result<DensityMatrix> {
        rho.apply_local_kraus(q, &self.local_ops()?)
    }

    fn local_ops(&self) -> Result<Vec<Op2>> {
        if self.operators[0].nrows() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.operators[0].nrows() });
        }
        Ok(self.operators.iter().map(op2).collect())
    }

    pub fn superop(&self) -> Result<Superop> {
        Ok(kraus_superop(&self.local_ops()?))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")))
    }
}

/// Phase damping with coherence decay `λ = e^{−Γ T}`:
/// `K₀ = √((1+λ)/2) I`, `K₁ = √((1−λ)/2) Z`.
pub fn dephasing_channel(rate: f64, duration: f64) -> Result<KrausChannel> {
    check_nonneg("dephasing rate", rate)?;
    check_nonneg("duration", duration)?;
    let lambda = (-rate * duration).exp();
    let a = ((1.0 + lambda) / 2.0).sqrt();
    let b = ((1.0 - lambda) / 2.0).sqrt();
    let k0 = CMatrix::from_diagonal(&nalgebra::dvector![C64::new(a, 0.0), C64::new(a, 0.0)]);
    let k1 = CMatrix::from_diagonal(&nalgebra::dvector![C64::new(b, 0.0), C64::new(-b, 0.0)]);
    KrausChannel::new(vec![k0, k1])
}

/// `ρ → (1−ε)ρ + (ε/3)(XρX + YρY + ZρZ)`.
pub fn pauli_channel(epsilon: f64) -> Result<KrausChannel> {
    if !(0.0..=0.75).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("Pauli error {epsilon} outside [0, 3/4]")));
    }
    let a = C64::new((1.0 - epsilon).sqrt(), 0.0);
    let b = (epsilon / 3.0).sqrt();
    Ok(KrausChannel {
        operators: vec![
            CMatrix::identity(2, 2) * a,
            crate::qcore::pauli_x() * C64::new(b, 0.0),
            crate::qcore::pauli_y() * C64::new(b, 0.0),
            crate::qcore::pauli_z() * C64::new(b, 0.0),
        ],
    })
}

/// Phase damping of qubit `q` over `duration`.
pub fn dephase(rho: &DensityMatrix, q: usize, rate: f64, duration: f64) -> Result<DensityMatrix> {
    dephasing_channel(rate, duration)?.apply_to(rho, q)
}

/// Uniform Pauli error with total probability `epsilon` on qubit `q`.
pub fn pauli_noise(rho: &DensityMatrix, q: usize, epsilon: f64) -> Result<DensityMatrix> {
    pauli_channel(epsilon)?.apply_to(rho, q)
}

/// Per-bit readout confusion `C[(reported, true)]`, identical on every bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfusion {
    /// `[[P(0|0), P(0|1)], [P(1|0), P(1|1)]]`
    pub matrix: [[f64; 2]; 2],
}

impl ReadoutConfusion {
    pub fn new(matrix: [[f64; 2]; 2]) -> Result<Self> {
        let c = Self { matrix };
        c.validate()?;
        Ok(c)
    }

    pub fn identity() -> Self {
        Self { matrix: [[1.0, 0.0], [0.0, 1.0]] }
    }

    /// Symmetric bit flip with probability `p`.
    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new([[1.0 - p, p], [p, 1.0 - p]])
    }

    /// Asymmetric flips `0→1` with `p01` and `1→0` with `p10`.
    pub fn asymmetric(p01: f64, p10: f64) -> Result<Self> {
        Self::new([[1.0 - p01, p10], [p01, 1.0 - p10]])
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.matrix;
        if m.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("confusion entries must lie in [0, 1]".into()));
        }
        for col in 0..2 {
            let s = m[0][col] + m[1][col];
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("confusion column {col} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    fn as_matrix(&self) -> Matrix2<f64> {
        let m = self.matrix;
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    fn inverse(&self) -> Result<Matrix2<f64>> {
        let m = self.as_matrix();
        if m.determinant().abs() < 1e-12 {
            return Err(Error::SingularConfusion);
        }
        m.try_inverse().ok_or(Error::SingularConfusion)
    }
}

/// Applies `m` to every bit of a probability vector indexed by bitstrings.
fn apply_per_bit(probs: &[f64], m: &Matrix2<f64>) -> Result<Vec<f64>> {
    let len = probs.len();
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { dim: len });
    }
    let mut v = probs.to_vec();
    let mut bit = 1;
    while bit < len {
        for i in (0..len).filter(|i| i & bit == 0) {
            let (a, b) = (v[i], v[i | bit]);
            v[i] = m[(0, 0)] * a + m[(0, 1)] * b;
            v[i | bit] = m[(1, 0)] * a + m[(1, 1)] * b;
        }
        bit <<= 1;
    }
    Ok(v)
}

/// Left-multiplies by the tensor power of the confusion matrix. Outcome
/// labels must be bitstrings in ascending binary order.
pub fn apply_readout_error(dist: &OutcomeDistribution, c: &ReadoutConfusion) -> Result<OutcomeDistribution> {
    let v = apply_per_bit(dist.probs(), &c.as_matrix())?;
    OutcomeDistribution::new(dist.shared_labels(), v)
}

/// Inverts the confusion, clips negatives and renormalizes.
pub fn mitigate_readout(dist: &OutcomeDistribution, c: &ReadoutConfusion) -> Result<OutcomeDistribution> {
    let mut v = apply_per_bit(dist.probs(), &c.inverse()?)?;
    v.iter_mut().for_each(|p| *p = p.max(0.0));
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Numerical("mitigated distribution vanished".into()));
    }
    v.iter_mut().for_each(|p| *p /= sum);
    OutcomeDistribution::new(dist.shared_labels(), v)
}

/// Noise acting on a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// `Γ_φ`, applied to every qubit over each cycle of duration `T`.
    #[serde(default)]
    pub dephasing_rate: f64,
    /// `ε_σ` per signal or control unit on each sensor qubit.
    #[serde(default)]
    pub gate_error: f64,
    #[serde(default = "ReadoutConfusion::identity")]
    pub readout_confusion: ReadoutConfusion,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { dephasing_rate: 0.0, gate_error: 0.0, readout_confusion: ReadoutConfusion::identity() }
    }

    pub fn new(dephasing_rate: f64, gate_error: f64, readout_confusion: ReadoutConfusion) -> Result<Self> {
        let m = Self { dephasing_rate, gate_error, readout_confusion };
        m.validate()?;
        Ok(m)
    }

    pub fn dephasing(rate: f64) -> Result<Self> {
        Self::new(rate, 0.0, ReadoutConfusion::identity())
    }

    pub fn gate(epsilon: f64) -> Result<Self> {
        Self::new(0.0, epsilon, ReadoutConfusion::identity())
    }

    pub fn readout(flip: f64) -> Result<Self> {
        Self::new(0.0, 0.0, ReadoutConfusion::symmetric(flip)?)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("dephasing rate", self.dephasing_rate)?;
        if !(0.0..=0.75).contains(&self.gate_error) {
            return Err(Error::InvalidParameter(format!("gate error {} outside [0, 3/4]", self.gate_error)));
        }
        self.readout_confusion.validate()
    }

    /// True when the quantum part is noiseless (readout may still be noisy).
    pub fn is_coherent(&self) -> bool {
        self.dephasing_rate == 0.0 && self.gate_error == 0.0
    }

    pub fn is_noiseless(&self) -> bool {
        self.is_coherent() && self.readout_confusion.is_identity()
    }
}

/// Per-qubit superoperators of a noisy run over all `N` cycles.
///
/// Sensor qubit, one cycle: signal unit, Pauli error, control unit, Pauli
/// error, then dephasing over `T`. A zero control field is no unit at all
/// and draws no gate error. The ancilla only dephases.
fn run_superops(run: &ProtocolRun, noise: &NoiseModel) -> Result<Vec<Superop>> {
    let t = run.encoding.t;
    let deph = dephasing_channel(noise.dephasing_rate, t)?.superop()?;
    let pauli = pauli_channel(noise.gate_error)?.superop()?;
    let sig = run.signal_ops()?;
    let ctl = run.control_ops()?;
    let controls = run.control_fields()?;
    sig.iter()
        .zip(&ctl)
        .zip(&controls)
        .map(|((s, c), cf)| {
            let cycle = match (s, c) {
                (Some(s), Some(c)) => {
                    let mut m = pauli * unitary_superop(s);
                    if !cf.is_some_and(|f| f.b() == 0.0) {
                        m = pauli * unitary_superop(c) * m;
                    }
                    deph * m
                }
                _ => deph,
            };
            Ok(superop_pow(&cycle, run.encoding.n))
        })
        .collect()
}

fn superop_pow(m: &Superop, mut n: u32) -> Superop {
    let mut acc = Superop::identity();
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            acc = base * acc;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}

/// Final density matrix of a noisy run, before the measurement frame.
pub fn noisy_state(run: &ProtocolRun, noise: &NoiseModel) -> Result<DensityMatrix> {
    noise.validate()?;
    let mut rho = run.probe()?.to_density();
    for (q, s) in run_superops(run, noise)?.iter().enumerate() {
        rho = rho.apply_local_superop(q, s)?;
    }
    Ok(rho)
}

/// Outcome distribution of a run under `noise`. Uses the statevector path
/// when the quantum part is noiseless; readout confusion acts last.
pub fn noisy_distribution(run: &ProtocolRun, noise: &NoiseModel) -> Result<OutcomeDistribution> {
    let ideal = if noise.is_coherent() {
        run.distribution()?
    } else {
        let mut rho = noisy_state(run, noise)?;
        if let Some(frame) = run.measurement_frame() {
            for (q, op) in &frame {
                rho = rho.conjugate_local(*q, op)?;
            }
        }
        let povm = run.povm();
        let vs = povm.rank_one_vectors().ok_or_else(|| Error::Numerical("Bell POVM is rank one".into()))?;
        let m = rho.matrix();
        let probs: Vec<f64> = vs.iter().map(|v| v.dotc(&(m * v)).re.max(0.0)).collect();
        let sum: f64 = probs.iter().sum();
        OutcomeDistribution::new(povm.shared_labels(), probs.iter().map(|p| p / sum).collect())?
    };
    if noise.readout_confusion.is_identity() {
        Ok(ideal)
    } else {
        apply_readout_error(&ideal, &noise.readout_confusion)
    }
}

/// Mean squared difference of two distributions over the same outcomes.
pub fn distribution_mse(a: &OutcomeDistribution, b: &OutcomeDistribution) -> f64 {
    let n = a.len().max(1) as f64;
    a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n
}

/// Dense `C^{⊗k}` for tests and diagnostics.
pub fn confusion_tensor(c: &ReadoutConfusion, bits: usize) -> DMatrix<f64> {
    let m = c.as_matrix();
    let mut out = DMatrix::<f64>::identity(1, 1);
    for _ in 0..bits {
        out = out.kronecker(&DMatrix::from_column_slice(2, 2, m.as_slice()));
    }
    out
}
