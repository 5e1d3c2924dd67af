//! The three sensing strategies under sequential control: probes, evolution
//! and ideal Bell-basis outcome distributions.
//!
//! Registers:
//! * RS: qubit 0 senses, qubit 1 is the ancilla.
//! * NLE and LE: qubits 0,1 form module B (field `B⃗₁`), qubits 2,3 module C
//!   (field `B⃗₂`). Outcome labels put module B's Bell label on the left.
//!
//! Every cycle applies the signal `U_s(x)` and then the control
//! `U_c = U_s(x_c)†` on each sensor qubit, so `x_c = x` undoes the signal.
//! A zero control field means no control.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{rotation_frame, signal_unitary, EncodingConfig, GradientSumPair, VectorField};
use crate::fisher::{ProbabilityFamily, StateFamily};
use crate::qcore::{
    bell_states, measure_probs, op2, Labels, Op2, OutcomeDistribution, PovmSet, StateVector, Unitary,
    BELL_POVM_1, BELL_POVM_2, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "NLE")]
    Nle,
    #[serde(rename = "LE_bell")]
    LeBell,
    #[serde(rename = "LE_opt")]
    LeOpt,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Rs, Self::Nle, Self::LeBell, Self::LeOpt];

    pub fn n_qubits(self) -> usize {
        match self {
            Self::Rs => 2,
            _ => 4,
        }
    }

    /// Qubits carrying the signal.
    pub fn sensor_qubits(self) -> &'static [usize] {
        match self {
            Self::Rs => &[0],
            _ => &[0, 1, 2, 3],
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rs => "RS",
            Self::Nle => "NLE",
            Self::LeBell => "LE_bell",
            Self::LeOpt => "LE_opt",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RS" => Ok(Self::Rs),
            "NLE" => Ok(Self::Nle),
            "LE_bell" => Ok(Self::LeBell),
            "LE_opt" => Ok(Self::LeOpt),
            other => Err(Error::InvalidParameter(format!("unknown strategy `{other}`"))),
        }
    }
}

/// A strategy applied to a 2- or 3-component task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub components: usize,
}

impl Strategy {
    /// `LE_opt` has a known optimal probe only for the 2-component task.
    pub fn new(kind: StrategyKind, components: usize) -> Result<Self> {
        let ok = matches!(components, 2 | 3) && !(kind == StrategyKind::LeOpt && components == 3);
        if !ok {
            return Err(Error::UnsupportedStrategy { strategy: kind.to_string(), components });
        }
        Ok(Self { kind, components })
    }
}

/// The unknown signal: one field (RS) or one field per module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Signal {
    Single(VectorField),
    Pair(VectorField, VectorField),
}

impl Signal {
    pub fn is_pair(&self) -> bool {
        matches!(self, Signal::Pair(..))
    }

    /// Field per qubit of the strategy's register (`None` for the ancilla).
    fn per_qubit(&self, kind: StrategyKind) -> Result<Vec<Option<VectorField>>> {
        match (kind, self) {
            (StrategyKind::Rs, Signal::Single(f)) => Ok(vec![Some(*f), None]),
            (StrategyKind::Rs, Signal::Pair(..)) => Err(Error::InvalidParameter(
                "RS senses a single field; use one run per field".into(),
            )),
            (_, Signal::Pair(a, b)) => Ok(vec![Some(*a), Some(*a), Some(*b), Some(*b)]),
            (k, Signal::Single(_)) => Err(Error::InvalidParameter(format!("{k} needs a field pair"))),
        }
    }
}

/// Coordinates in which a run template is parametrized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpace {
    /// `(B, θ, φ)` of a single field.
    Spherical,
    /// `(B, φ)` with `θ = π/2`.
    Planar,
    /// `(∇Bx, ∇By, ∇Bz, ΣBx, ΣBy, ΣBz)`.
    GradSum3,
    /// `(∇Bx, ∇By, ΣBx, ΣBy)` with `B_z = 0`.
    GradSum2,
    /// `(B₁, θ₁, φ₁, B₂, θ₂, φ₂)`.
    PairSpherical,
    /// `(B₁, φ₁, B₂, φ₂)` with `θ = π/2`.
    PairPlanar,
}

impl ParamSpace {
    pub fn dim(self) -> usize {
        self.labels().len()
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Self::Spherical => &["B", "theta", "phi"],
            Self::Planar => &["B", "phi"],
            Self::GradSum3 => &["gradBx", "gradBy", "gradBz", "sumBx", "sumBy", "sumBz"],
            Self::GradSum2 => &["gradBx", "gradBy", "sumBx", "sumBy"],
            Self::PairSpherical => &["B1", "theta1", "phi1", "B2", "theta2", "phi2"],
            Self::PairPlanar => &["B1", "phi1", "B2", "phi2"],
        }
    }

    pub fn is_pair(self) -> bool {
        !matches!(self, Self::Spherical | Self::Planar)
    }

    pub fn to_signal(self, x: &[f64]) -> Result<Signal> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let sig = match self {
            Self::Spherical => Signal::Single(VectorField::spherical(x[0], x[1], x[2])),
            Self::Planar => Signal::Single(VectorField::spherical(x[0], FRAC_PI_2, x[1])),
            Self::GradSum3 => {
                let (a, b) = GradientSumPair::new([x[0], x[1], x[2]], [x[3], x[4], x[5]]).to_pair();
                Signal::Pair(a, b)
            }
            Self::GradSum2 => {
                let (a, b) = GradientSumPair::new([x[0], x[1], 0.0], [x[2], x[3], 0.0]).to_pair();
                Signal::Pair(a, b)
            }
            Self::PairSpherical => Signal::Pair(
                VectorField::spherical(x[0], x[1], x[2]),
                VectorField::spherical(x[3], x[4], x[5]),
            ),
            Self::PairPlanar => Signal::Pair(
                VectorField::spherical(x[0], FRAC_PI_2, x[1]),
                VectorField::spherical(x[2], FRAC_PI_2, x[3]),
            ),
        };
        Ok(sig)
    }

    /// Coordinates of a signal; angles come from the fields' stored values.
    pub fn from_signal(self, s: &Signal) -> Result<Vec<f64>> {
        let shape_err = || Error::InvalidParameter(format!("signal shape does not fit {self:?}"));
        match (self, s) {
            (Self::Spherical, Signal::Single(f)) => Ok(f.spherical_coords().to_vec()),
            (Self::Planar, Signal::Single(f)) => Ok(vec![f.b(), f.phi()]),
            (Self::GradSum3, Signal::Pair(a, b)) => {
                let gs = GradientSumPair::from_pair(a, b);
                Ok([gs.grad, gs.sum].concat())
            }
            (Self::GradSum2, Signal::Pair(a, b)) => {
                let gs = GradientSumPair::from_pair(a, b);
                Ok(vec![gs.grad[0], gs.grad[1], gs.sum[0], gs.sum[1]])
            }
            (Self::PairSpherical, Signal::Pair(a, b)) => {
                Ok([a.spherical_coords(), b.spherical_coords()].concat())
            }
            (Self::PairPlanar, Signal::Pair(a, b)) => Ok(vec![a.b(), a.phi(), b.b(), b.phi()]),
            _ => Err(shape_err()),
        }
    }

    /// Indices of angles that are periodic with period 2π.
    pub fn azimuth_axes(self) -> &'static [usize] {
        match self {
            Self::Spherical => &[2],
            Self::Planar => &[1],
            Self::PairSpherical => &[2, 5],
            Self::PairPlanar => &[1, 3],
            Self::GradSum3 | Self::GradSum2 => &[],
        }
    }
}

/// One sensing experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub strategy: Strategy,
    pub signal: Signal,
    pub control: Signal,
    pub encoding: EncodingConfig,
}

/// The 2-qubit Bell state `(|00⟩+|11⟩)/√2`.
fn phi_plus() -> StateVector {
    bell_states()[0].clone()
}

/// NLE probe `(|0011⟩ − |1100⟩)/√2`.
pub fn nle_probe() -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); 16];
    amps[0b0011] = C64::new(FRAC_1_SQRT_2, 0.0);
    amps[0b1100] = C64::new(-FRAC_1_SQRT_2, 0.0);
    StateVector::from_slice(&amps).expect("normalized")
}

/// Optimal 2-qubit module probe for the 2-component LE task:
/// `(U_r ⊗ U_r)|Φ−⟩` with the rotation frame of the guess field, i.e.
/// `(|+_B⟩⊗² − |−_B⟩⊗²)/√2` up to a global phase, with `|±_B⟩` the
/// eigenvectors of `h_B`.
pub fn le_opt_module_probe(guess: &VectorField, t: f64) -> StateVector {
    let r = op2(rotation_frame(guess, t).matrix());
    bell_states()[1].apply_local(&[(0, r), (1, r)]).expect("two qubits")
}

/// Probe of a strategy. `guess` supplies the guess fields of `LE_opt`.
pub fn build_probe(kind: StrategyKind, guess: Option<&Signal>, t: f64) -> Result<StateVector> {
    match kind {
        StrategyKind::Rs => Ok(phi_plus()),
        StrategyKind::Nle => Ok(nle_probe()),
        StrategyKind::LeBell => phi_plus().kron(&phi_plus()),
        StrategyKind::LeOpt => match guess {
            Some(Signal::Pair(a, b)) => le_opt_module_probe(a, t).kron(&le_opt_module_probe(b, t)),
            Some(Signal::Single(_)) => Err(Error::InvalidParameter("LE_opt needs one guess field per module".into())),
            None => Err(Error::InvalidParameter("LE_opt probe requires a guess field".into())),
        },
    }
}

/// `M^n` by repeated squaring.
fn op_pow(m: &Op2, mut n: u32) -> Op2 {
    let mut acc = Op2::identity();
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

impl ProtocolRun {
    pub fn new(strategy: Strategy, signal: Signal, control: Signal, encoding: EncodingConfig) -> Result<Self> {
        let run = Self { strategy, signal, control, encoding };
        run.signal.per_qubit(strategy.kind)?;
        run.control.per_qubit(strategy.kind)?;
        Ok(run)
    }

    /// Run without control (`U_c = I`).
    pub fn uncontrolled(strategy: Strategy, signal: Signal, encoding: EncodingConfig) -> Result<Self> {
        let control = match signal {
            Signal::Single(_) => Signal::Single(VectorField::zero()),
            Signal::Pair(..) => Signal::Pair(VectorField::zero(), VectorField::zero()),
        };
        Self::new(strategy, signal, control, encoding)
    }

    pub fn n_qubits(&self) -> usize {
        self.strategy.kind.n_qubits()
    }

    pub fn probe(&self) -> Result<StateVector> {
        build_probe(self.strategy.kind, Some(&self.control), self.encoding.t)
    }

    /// Per-qubit signal unitaries for one cycle (`None` on the ancilla).
    pub fn signal_ops(&self) -> Result<Vec<Option<Op2>>> {
        let t = self.encoding.t;
        Ok(self
            .signal
            .per_qubit(self.strategy.kind)?
            .into_iter()
            .map(|f| f.map(|f| op2(signal_unitary(&f, t).matrix())))
            .collect())
    }

    /// Per-qubit control unitaries `U_s(x_c)†` for one cycle.
    pub fn control_ops(&self) -> Result<Vec<Option<Op2>>> {
        let t = self.encoding.t;
        Ok(self
            .control
            .per_qubit(self.strategy.kind)?
            .into_iter()
            .map(|f| f.map(|f| op2(signal_unitary(&f, t).adjoint().matrix())))
            .collect())
    }

    /// Control field per qubit (`None` on the ancilla).
    pub fn control_fields(&self) -> Result<Vec<Option<VectorField>>> {
        self.control.per_qubit(self.strategy.kind)
    }

    /// Net per-qubit evolution `(U_c U_s)^N`.
    pub fn total_ops(&self) -> Result<Vec<(usize, Op2)>> {
        let sig = self.signal_ops()?;
        let ctl = self.control_ops()?;
        Ok(sig
            .into_iter()
            .zip(ctl)
            .enumerate()
            .filter_map(|(q, (s, c))| match (s, c) {
                (Some(s), Some(c)) => Some((q, op_pow(&(c * s), self.encoding.n))),
                _ => None,
            })
            .collect())
    }

    /// Final state `(U_c U_s)^N |probe⟩`.
    pub fn evolve(&self) -> Result<StateVector> {
        self.probe()?.apply_local(&self.total_ops()?)
    }

    pub fn povm(&self) -> &'static PovmSet {
        match self.strategy.kind {
            StrategyKind::Rs => &BELL_POVM_1,
            _ => &BELL_POVM_2,
        }
    }

    /// Basis change applied before the Bell measurement: for `LE_opt` the
    /// inverse rotation frame of each module's guess field, so that the
    /// measurement is the Bell basis of the rotated frame.
    pub fn measurement_frame(&self) -> Option<Vec<(usize, Op2)>> {
        match (self.strategy.kind, &self.control) {
            (StrategyKind::LeOpt, Signal::Pair(a, b)) => {
                let t = self.encoding.t;
                let ra = op2(rotation_frame(a, t).adjoint().matrix());
                let rb = op2(rotation_frame(b, t).adjoint().matrix());
                Some(vec![(0, ra), (1, ra), (2, rb), (3, rb)])
            }
            _ => None,
        }
    }

    /// Bell-basis outcome distribution of the noiseless run.
    pub fn distribution(&self) -> Result<OutcomeDistribution> {
        let mut psi = self.evolve()?;
        if let Some(frame) = self.measurement_frame() {
            psi = psi.apply_local(&frame)?;
        }
        fast_probs(&psi, self.povm())
    }
}

/// Born probabilities through the POVM's rank-one vectors.
fn fast_probs(psi: &StateVector, povm: &PovmSet) -> Result<OutcomeDistribution> {
    match povm.rank_one_vectors() {
        Some(vs) => {
            let amps = psi.amplitudes();
            let mut probs: Vec<f64> = vs.iter().map(|v| v.dotc(amps).norm_sqr()).collect();
            let sum: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= sum);
            Ok(OutcomeDistribution::from_trusted(povm.shared_labels(), probs))
        }
        None => measure_probs(psi, povm),
    }
}

/// Ideal outcome distribution of a run.
pub fn ideal_distribution(run: &ProtocolRun) -> Result<OutcomeDistribution> {
    run.distribution()
}

/// Final state of a run.
pub fn evolve_sequential(run: &ProtocolRun) -> Result<StateVector> {
    run.evolve()
}

/// A strategy with fixed control and encoding, parametrized over a
/// [`ParamSpace`]. It is both a state family and a probability family.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTemplate {
    pub strategy: Strategy,
    pub space: ParamSpace,
    pub control: Vec<f64>,
    pub encoding: EncodingConfig,
}

impl RunTemplate {
    pub fn new(strategy: Strategy, space: ParamSpace, control: Vec<f64>, encoding: EncodingConfig) -> Result<Self> {
        let pair_needed = strategy.kind != StrategyKind::Rs;
        if space.is_pair() != pair_needed {
            return Err(Error::InvalidParameter(format!(
                "{} cannot be parametrized by {space:?}",
                strategy.kind
            )));
        }
        if control.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: control.len() });
        }
        Ok(Self { strategy, space, control, encoding })
    }

    pub fn with_control(&self, control: &[f64]) -> Self {
        Self { control: control.to_vec(), ..self.clone() }
    }

    pub fn with_cycles(&self, n: u32) -> Self {
        Self { encoding: EncodingConfig { n, ..self.encoding }, ..self.clone() }
    }

    pub fn run_at(&self, x: &[f64]) -> Result<ProtocolRun> {
        self.run_with(x, &self.control)
    }

    pub fn run_with(&self, x: &[f64], control: &[f64]) -> Result<ProtocolRun> {
        ProtocolRun::new(
            self.strategy,
            self.space.to_signal(x)?,
            self.space.to_signal(control)?,
            self.encoding,
        )
    }

    pub fn distribution_with(&self, x: &[f64], control: &[f64]) -> Result<OutcomeDistribution> {
        self.run_with(x, control)?.distribution()
    }

    pub fn labels(&self) -> Vec<String> {
        self.space.labels().iter().map(|s| s.to_string()).collect()
    }

    pub fn outcome_labels(&self) -> Labels {
        match self.strategy.kind {
            StrategyKind::Rs => BELL_POVM_1.shared_labels(),
            _ => BELL_POVM_2.shared_labels(),
        }
    }
}

impl StateFamily for RunTemplate {
    fn labels(&self) -> Vec<String> {
        RunTemplate::labels(self)
    }

    fn state(&self, x: &[f64]) -> Result<StateVector> {
        self.run_at(x)?.evolve()
    }
}

impl ProbabilityFamily for RunTemplate {
    fn labels(&self) -> Vec<String> {
        RunTemplate::labels(self)
    }

    fn distribution(&self, x: &[f64]) -> Result<OutcomeDistribution> {
        self.run_at(x)?.distribution()
    }
}

/// Normalized likelihood landscape over two axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub axes: (usize, usize),
    pub grid_a: Vec<f64>,
    pub grid_b: Vec<f64>,
    /// `raw[i][j] = Σ P_ref ln P(x_ij)` at `(grid_a[i], grid_b[j])`.
    pub raw: Vec<Vec<f64>>,
    /// `raw` rescaled to `[0, 1]`; a constant landscape becomes all ones.
    pub normalized: Vec<Vec<f64>>,
    pub argmax: (usize, usize),
}

/// Probability floor inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Scans `L′ = Σ_i P_ref,i ln P_i(x)` over a grid of two axes, the other
/// coordinates pinned at `reference`, with `P_ref` the distribution at
/// `reference`.
pub fn landscape_scan(
    template: &RunTemplate,
    reference: &[f64],
    axes: (usize, usize),
    grid_a: &[f64],
    grid_b: &[f64],
) -> Result<Landscape> {
    use rayon::prelude::*;
    let dim = template.space.dim();
    if axes.0 >= dim || axes.1 >= dim || axes.0 == axes.1 {
        return Err(Error::InvalidParameter(format!("landscape axes {axes:?} invalid for {dim} parameters")));
    }
    if grid_a.is_empty() || grid_b.is_empty() {
        return Err(Error::InvalidParameter("landscape grid is empty".into()));
    }
    let p_ref = template.distribution(reference)?;
    let raw: Vec<Vec<f64>> = grid_a
        .par_iter()
        .map(|&a| {
            grid_b
                .iter()
                .map(|&b| {
                    let mut x = reference.to_vec();
                    x[axes.0] = a;
                    x[axes.1] = b;
                    let p = template.distribution(&x)?;
                    Ok(p_ref
                        .probs()
                        .iter()
                        .zip(p.probs())
                        .map(|(r, q)| if *r > 0.0 { r * q.max(PROB_FLOOR).ln() } else { 0.0 })
                        .sum())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let (mut lo, mut hi, mut argmax) = (f64::INFINITY, f64::NEG_INFINITY, (0, 0));
    for (i, row) in raw.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            lo = lo.min(v);
            if v > hi {
                hi = v;
                argmax = (i, j);
            }
        }
    }
    let span = hi - lo;
    let normalized = raw
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| if span > 1e-14 * hi.abs().max(1.0) { (v - lo) / span } else { 1.0 })
                .collect()
        })
        .collect();
    Ok(Landscape {
        axes,
        grid_a: grid_a.to_vec(),
        grid_b: grid_b.to_vec(),
        raw,
        normalized,
        argmax,
    })
}

/// Evenly spaced grid including both ends.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Composite unitary of one run as a dense matrix (reference path for tests).
pub fn dense_total_unitary(run: &ProtocolRun) -> Result<Unitary> {
    let n = run.n_qubits();
    let mut full = Unitary::identity(0);
    let ops = run.total_ops()?;
    for q in 0..n {
        let m = ops
            .iter()
            .find(|(k, _)| *k == q)
            .map(|(_, m)| crate::qcore::CMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]))
            .unwrap_or_else(|| crate::qcore::identity(2));
        full = full.kron(&Unitary::new(m)?)?;
    }
    Ok(full)
}
