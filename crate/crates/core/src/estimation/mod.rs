//! Shot sampling, likelihoods, maximum-likelihood estimation, the adaptive
//! control loop and precision statistics.

mod adaptive;
mod mle;

pub use adaptive::{adaptive_estimate, AdaptiveOptions, AdaptiveState, RoundRecord, StopReason, MAX_ROUNDS};
pub use mle::{halton_point, maximize, mle, Estimate, LocalOptimum, MleOptions};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{noisy_distribution, NoiseModel};
use crate::protocols::{ParamSpace, RunTemplate, PROB_FLOOR};
use crate::qcore::{Labels, OutcomeDistribution};

/// Counts of `n` single-shot measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotRecord {
    labels: Labels,
    counts: Vec<u64>,
    n: u64,
    seed: u64,
}

impl ShotRecord {
    pub fn new(labels: impl Into<Labels>, counts: Vec<u64>, seed: u64) -> Result<Self> {
        let labels = labels.into();
        if labels.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: counts.len() });
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidParameter("shot record is empty".into()));
        }
        Ok(Self { labels, counts, n, seed })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    pub fn to_distribution(&self) -> OutcomeDistribution {
        OutcomeDistribution::from_trusted(self.labels.clone(), self.frequencies())
    }
}

/// Multinomial draw of `n` shots as a chain of binomials, seeded with
/// ChaCha8.
pub fn sample_shots(dist: &OutcomeDistribution, n: u64, seed: u64) -> Result<ShotRecord> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one shot".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = dist.probs();
    let mut counts = vec![0u64; probs.len()];
    let (mut left, mut mass) = (n, 1.0f64);
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q)
            .map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?
            .sample(&mut rng);
        counts[i] = k;
        left -= k;
        mass -= p;
    }
    ShotRecord::new(dist.shared_labels(), counts, seed)
}

/// `Σ f_i ln max(p_i, 1e-12)` for empirical frequencies `f`.
pub fn log_likelihood_of(freqs: &[f64], probs: &[f64]) -> f64 {
    freqs
        .iter()
        .zip(probs)
        .filter(|(f, _)| **f > 0.0)
        .map(|(f, p)| f * p.max(PROB_FLOOR).ln())
        .sum()
}

/// A parametrized measurement model with an explicit control setting.
pub trait Model: Sync {
    fn space(&self) -> ParamSpace;
    fn distribution(&self, x: &[f64], control: &[f64]) -> Result<OutcomeDistribution>;
}

impl Model for RunTemplate {
    fn space(&self) -> ParamSpace {
        self.space
    }

    fn distribution(&self, x: &[f64], control: &[f64]) -> Result<OutcomeDistribution> {
        self.distribution_with(x, control)
    }
}

/// A run template evaluated under a noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyTemplate {
    pub template: RunTemplate,
    pub noise: NoiseModel,
}

impl Model for NoisyTemplate {
    fn space(&self) -> ParamSpace {
        self.template.space
    }

    fn distribution(&self, x: &[f64], control: &[f64]) -> Result<OutcomeDistribution> {
        noisy_distribution(&self.template.run_with(x, control)?, &self.noise)
    }
}

/// Likelihood of a record under `model` at guess `x` and control `x_c`.
pub fn log_likelihood<M: Model + ?Sized>(record: &ShotRecord, model: &M, x: &[f64], control: &[f64]) -> Result<f64> {
    let d = model.distribution(x, control)?;
    if d.len() != record.counts.len() {
        return Err(Error::DimensionMismatch { expected: d.len(), got: record.counts.len() });
    }
    Ok(log_likelihood_of(&record.frequencies(), d.probs()))
}

/// Box constraints on parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidParameter("bounds need finite lo < hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `B ∈ [1e-6, 2]`, `θ ∈ [0, π]`, `φ ∈ [−π, π]`, gradients in `[−1, 1]`,
    /// sums in `[−4, 4]`.
    pub fn default_for(space: ParamSpace) -> Self {
        use std::f64::consts::PI;
        let (lo, hi): (Vec<f64>, Vec<f64>) = space
            .labels()
            .iter()
            .map(|l| match *l {
                "B" | "B1" | "B2" => (1e-6, 2.0),
                "theta" | "theta1" | "theta2" => (0.0, PI),
                "phi" | "phi1" | "phi2" => (-PI, PI),
                s if s.starts_with("grad") => (-1.0, 1.0),
                _ => (-4.0, 4.0),
            })
            .unzip();
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lo).zip(&self.hi).all(|((v, l), h)| v >= l && v <= h)
    }
}

/// Sample statistics of `M` estimates around a known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub bias: Vec<f64>,
    pub variance_sum: f64,
    pub trials: usize,
}

/// Unbiased sample statistics of the rows of `estimates`.
pub fn precision_stats(estimates: &[Vec<f64>], truth: &[f64]) -> Result<PrecisionStats> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 estimates, got {m}")));
    }
    let dim = truth.len();
    if let Some(bad) = estimates.iter().find(|e| e.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let mean: Vec<f64> = (0..dim).map(|k| estimates.iter().map(|e| e[k]).sum::<f64>() / m as f64).collect();
    let var: Vec<f64> = (0..dim)
        .map(|k| estimates.iter().map(|e| (e[k] - mean[k]).powi(2)).sum::<f64>() / (m - 1) as f64)
        .collect();
    Ok(PrecisionStats {
        bias: mean.iter().zip(truth).map(|(a, t)| a - t).collect(),
        std: var.iter().map(|v| v.sqrt()).collect(),
        variance_sum: var.iter().sum(),
        mean,
        trials: m,
    })
}

/// `10 log₁₀(a / b)`.
pub fn gain_db(a: f64, b: f64) -> f64 {
    10.0 * (a / b).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::EncodingConfig;
    use crate::protocols::{Strategy, StrategyKind};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn labels4() -> Vec<String> {
        ["00", "01", "10", "11"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sampling_examples() {
        let d = OutcomeDistribution::new(labels4(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(sample_shots(&d, 37, 5).unwrap().counts(), &[37, 0, 0, 0]);
        let u = OutcomeDistribution::uniform(labels4());
        let r = sample_shots(&u, 4_000_000, 11).unwrap();
        assert!(r.frequencies().iter().all(|f| (f - 0.25).abs() < 1e-3));
        assert_eq!(sample_shots(&u, 1000, 3).unwrap(), sample_shots(&u, 1000, 3).unwrap());
        assert_ne!(sample_shots(&u, 1000, 3).unwrap(), sample_shots(&u, 1000, 4).unwrap());
        assert!(sample_shots(&u, 0, 1).is_err());
    }

    #[test]
    fn likelihood_examples() {
        assert_eq!(log_likelihood_of(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        let l = log_likelihood_of(&[0.25, 0.75], &[0.0, 1.0]);
        assert!((l - 0.25 * 1e-12f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_peaks_at_truth() {
        let s = Strategy::new(StrategyKind::Rs, 3).unwrap();
        let tpl = RunTemplate::new(s, ParamSpace::Spherical, vec![0.0; 3], EncodingConfig::new(1.0, 1).unwrap())
            .unwrap();
        let truth = [1.0, FRAC_PI_4, FRAC_PI_4];
        let rec = sample_shots(&tpl.distribution_with(&truth, &[0.0; 3]).unwrap(), 1_000_000, 9).unwrap();
        let at_truth = log_likelihood(&rec, &tpl, &truth, &[0.0; 3]).unwrap();
        for dx in [-0.05, 0.05] {
            for k in 0..3 {
                let mut x = truth;
                x[k] += dx;
                assert!(log_likelihood(&rec, &tpl, &x, &[0.0; 3]).unwrap() < at_truth);
            }
        }
    }

    #[test]
    fn stats_and_gain() {
        let s = precision_stats(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[0.5, 2.5]).unwrap();
        assert_eq!(s.std, vec![0.0, 0.0]);
        assert_eq!(s.bias, vec![0.5, -0.5]);
        assert!((gain_db(2.0, 1.0) - 3.0103).abs() < 1e-4);
        assert!(precision_stats(&[vec![1.0]], &[1.0]).is_err());
    }

    #[test]
    fn default_bounds() {
        let b = Bounds::default_for(ParamSpace::GradSum2);
        assert_eq!(b.lo, vec![-1.0, -1.0, -4.0, -4.0]);
        let b = Bounds::default_for(ParamSpace::Spherical);
        assert_eq!(b.hi, vec![2.0, PI, PI]);
    }
}
