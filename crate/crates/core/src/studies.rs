//! Monte-Carlo precision studies built from the estimation layer: CRB
//! attainment, gradient-strategy gains, Heisenberg scaling, adaptive
//! batches and noise sweeps.
//!
//! Trials are independent (seed `base ^ trial`) and run in parallel; results
//! come back in trial order, so a study is reproducible for a given seed.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimation::{
    adaptive_estimate, mle, precision_stats, sample_shots, AdaptiveOptions, Bounds, Estimate, MleOptions, Model,
    NoisyTemplate, PrecisionStats, StopReason,
};
use crate::field::{EncodingConfig, VectorField};
use crate::fisher::{invert_info, max_qfim, precision_bound};
use crate::noise::{apply_readout_error, distribution_mse, mitigate_readout, NoiseModel, ReadoutConfusion};
use crate::protocols::{ParamSpace, RunTemplate, Strategy, StrategyKind};

/// Default control offset per unit cycle. The control sits at
/// `truth + Δ/N` so that the net rotation has a known sign; exactly matched
/// control leaves only sign-blind second-order signals.
pub const CONTROL_OFFSET: [f64; 6] = [0.06, 0.12, 0.12, 0.06, 0.12, 0.12];

/// Half-width, times `N`, of the search box around the control in
/// controlled studies. Sequential control makes the likelihood periodic
/// with period `~π/(NT)`, so a global search over the default bounds would
/// hop between alias cells; the experiment's prior (its control setting)
/// confines the fit to one cell.
pub const LOCAL_WINDOW: f64 = 0.5;

/// Default bounds of `space` intersected with `center ± LOCAL_WINDOW/N`.
pub fn local_bounds(space: ParamSpace, center: &[f64], n_cycles: u32) -> Result<Bounds> {
    let d = Bounds::default_for(space);
    let w = LOCAL_WINDOW / n_cycles as f64;
    let lo = d.lo.iter().zip(center).map(|(l, c)| l.max(c - w)).collect();
    let hi = d.hi.iter().zip(center).map(|(h, c)| h.min(c + w)).collect();
    Bounds::new(lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub shots: u64,
    pub trials: usize,
    pub seed: u64,
    pub mle: MleOptions,
}

impl McConfig {
    /// Local estimator: one start at the anchor. The Cramér-Rao bound is a
    /// local statement, and near-matched control leaves approximate mirror
    /// modes next to the truth that a global search would sometimes pick.
    pub fn new(shots: u64, trials: usize, seed: u64) -> Self {
        Self { shots, trials, seed, mle: MleOptions { starts: 1, ..MleOptions::default() } }
    }
}

/// Estimates of one Monte-Carlo batch.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub estimates: Vec<Vec<f64>>,
    pub unconverged: usize,
}

/// `truth + Δ/N` with the default offset.
pub fn offset_control(truth: &[f64], n_cycles: u32) -> Vec<f64> {
    truth.iter().zip(CONTROL_OFFSET).map(|(t, d)| t + d / n_cycles as f64).collect()
}

/// Draws `trials` records at `truth` under `control` and fits each by MLE.
/// The tie-breaking anchor is `truth`, i.e. the prior knowledge that
/// places the estimate in the right alias cell. `map` converts each estimate
/// (e.g. to gradient components) before it is stored.
pub fn monte_carlo<M, F>(
    model: &M,
    truth: &[f64],
    control: &[f64],
    bounds: &Bounds,
    cfg: &McConfig,
    map: F,
) -> Result<McResult>
where
    M: Model + ?Sized,
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if cfg.trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let dist = model.distribution(truth, control)?;
    let opts = MleOptions { anchor: Some(truth.to_vec()), ..cfg.mle.clone() };
    let fits: Vec<Estimate> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let rec = sample_shots(&dist, cfg.shots, cfg.seed ^ k as u64)?;
            mle(&rec, model, control, bounds, &opts)
        })
        .collect::<Result<_>>()?;
    let unconverged = fits.iter().filter(|e| !e.converged).count();
    if unconverged > 0 {
        log::warn!("{unconverged} of {} fits did not converge", cfg.trials);
    }
    Ok(McResult { estimates: fits.iter().map(|e| map(&e.x_est)).collect(), unconverged })
}

fn identity_map(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// RS estimation of one field in `(B, θ, φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsStudy {
    pub n_cycles: u32,
    pub stats: PrecisionStats,
    /// `Tr(F_Q⁻¹)/n` of the `N`-cycle family.
    pub crb: f64,
    pub unconverged: usize,
}

/// RS template in spherical coordinates.
pub fn rs_template(t: f64, n_cycles: u32) -> Result<RunTemplate> {
    RunTemplate::new(
        Strategy::new(StrategyKind::Rs, 3)?,
        ParamSpace::Spherical,
        vec![0.0; 3],
        EncodingConfig::new(t, n_cycles)?,
    )
}

/// RS Monte-Carlo. A single cycle runs without control; `N > 1` uses the
/// offset control.
pub fn rs_study(truth: &[f64], t: f64, n_cycles: u32, cfg: &McConfig) -> Result<RsStudy> {
    let tpl = rs_template(t, n_cycles)?;
    let (control, bounds) = if n_cycles == 1 {
        (vec![0.0; 3], Bounds::default_for(ParamSpace::Spherical))
    } else {
        let c = offset_control(truth, n_cycles);
        let b = local_bounds(ParamSpace::Spherical, &c, n_cycles)?;
        (c, b)
    };
    let res = monte_carlo(&tpl, truth, &control, &bounds, cfg, identity_map)?;
    let f = VectorField::spherical(truth[0], truth[1], truth[2]);
    let q = max_qfim(&f, t).scaled((n_cycles as f64).powi(2));
    Ok(RsStudy {
        n_cycles,
        stats: precision_stats(&res.estimates, truth)?,
        crb: invert_info(&q).trace() / cfg.shots as f64,
        unconverged: res.unconverged,
    })
}

/// Least-squares slope `p` of `log v = c − p log N`.
pub fn scaling_exponent(ns: &[u32], values: &[f64]) -> Result<f64> {
    if ns.len() != values.len() || ns.len() < 2 {
        return Err(Error::InvalidParameter("need at least two matching points".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub points: Vec<RsStudy>,
    pub exponent: f64,
}

/// RS variance sums over cycle counts and their fitted exponent.
pub fn heisenberg_study(truth: &[f64], t: f64, ns: &[u32], cfg: &McConfig) -> Result<ScalingStudy> {
    let points: Vec<RsStudy> = ns.iter().map(|&n| rs_study(truth, t, n, cfg)).collect::<Result<_>>()?;
    let exponent = scaling_exponent(ns, &points.iter().map(|p| p.stats.variance_sum).collect::<Vec<_>>())?;
    Ok(ScalingStudy { points, exponent })
}

/// NLE versus LE_bell estimation of a planar gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientStudy {
    pub n_cycles: u32,
    /// Statistics of `(∇Bx, ∇By)` for each strategy.
    pub nle: PrecisionStats,
    pub le_bell: PrecisionStats,
    /// Theoretical per-shot bounds divided by `n`.
    pub nle_bound: f64,
    pub le_bell_bound: f64,
    pub gain_db: f64,
    pub bound_gain_db: f64,
}

/// NLE template over `(∇Bx, ∇By, ΣBx, ΣBy)`.
pub fn nle_template(t: f64, n_cycles: u32) -> Result<RunTemplate> {
    RunTemplate::new(
        Strategy::new(StrategyKind::Nle, 2)?,
        ParamSpace::GradSum2,
        vec![0.0; 4],
        EncodingConfig::new(t, n_cycles)?,
    )
}

/// LE_bell template over `(B₁, φ₁, B₂, φ₂)`.
pub fn le_bell_template(t: f64, n_cycles: u32) -> Result<RunTemplate> {
    RunTemplate::new(
        Strategy::new(StrategyKind::LeBell, 2)?,
        ParamSpace::PairPlanar,
        vec![0.0; 4],
        EncodingConfig::new(t, n_cycles)?,
    )
}

/// Planar gradient `B⃗₁ − B⃗₂` from `(B₁, φ₁, B₂, φ₂)`.
pub fn planar_gradient(x: &[f64]) -> Vec<f64> {
    vec![x[0] * x[1].cos() - x[2] * x[3].cos(), x[0] * x[1].sin() - x[2] * x[3].sin()]
}

/// Zero-gradient comparison at field `(b, π/2, φ)` in both modules.
pub fn gradient_study(b: f64, phi: f64, t: f64, n_cycles: u32, cfg: &McConfig) -> Result<GradientStudy> {
    let f = VectorField::spherical(b, FRAC_PI_2, phi);
    let [bx, by, _] = f.to_cartesian();

    let nle = nle_template(t, n_cycles)?;
    let nle_truth = [0.0, 0.0, 2.0 * bx, 2.0 * by];
    let nle_control = offset_control(&nle_truth, n_cycles);
    let nle_res = monte_carlo(
        &nle,
        &nle_truth,
        &nle_control,
        &local_bounds(ParamSpace::GradSum2, &nle_control, n_cycles)?,
        cfg,
        |x| x[..2].to_vec(),
    )?;

    let le = le_bell_template(t, n_cycles)?;
    let le_truth = [b, phi, b, phi];
    let le_cfg = McConfig { seed: cfg.seed.wrapping_add(0x5EED), ..cfg.clone() };
    let le_control = offset_control(&le_truth, n_cycles);
    let le_res = monte_carlo(
        &le,
        &le_truth,
        &le_control,
        &local_bounds(ParamSpace::PairPlanar, &le_control, n_cycles)?,
        &le_cfg,
        planar_gradient,
    )?;

    let nle_stats = precision_stats(&nle_res.estimates, &[0.0, 0.0])?;
    let le_stats = precision_stats(&le_res.estimates, &[0.0, 0.0])?;
    let n = cfg.shots as f64;
    let nle_bound = precision_bound(StrategyKind::Nle, 2, &f, t, n_cycles)?.total / n;
    let le_bound = precision_bound(StrategyKind::LeBell, 2, &f, t, n_cycles)?.total / n;
    Ok(GradientStudy {
        n_cycles,
        gain_db: crate::estimation::gain_db(le_stats.variance_sum, nle_stats.variance_sum),
        bound_gain_db: crate::estimation::gain_db(le_bound, nle_bound),
        nle: nle_stats,
        le_bell: le_stats,
        nle_bound,
        le_bell_bound: le_bound,
    })
}

/// Outcome of a batch of adaptive runs from random starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveBatch {
    pub finals: Vec<Vec<f64>>,
    pub starts: Vec<Vec<f64>>,
    pub rounds: Vec<usize>,
    pub converged: Vec<bool>,
    pub stats: PrecisionStats,
    /// Runs whose final estimate lies within 3 sample-std of the truth in
    /// every coordinate.
    pub within_3std: usize,
}

/// Random start inside `B ∈ [0.5, 1.5]`, `θ ∈ [0.1, π − 0.1]`, `φ ∈ [−π, π]`.
pub fn random_start(rng: &mut impl Rng) -> Vec<f64> {
    use std::f64::consts::PI;
    vec![rng.random_range(0.5..1.5), rng.random_range(0.1..PI - 0.1), rng.random_range(-PI..PI)]
}

/// `runs` adaptive RS estimations from seeded random starts.
pub fn adaptive_batch(
    truth: &[f64],
    t: f64,
    runs: usize,
    opts: &AdaptiveOptions,
    seed: u64,
) -> Result<AdaptiveBatch> {
    let tpl = rs_template(t, 1)?;
    let bounds = Bounds::default_for(ParamSpace::Spherical);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..runs).map(|_| random_start(&mut rng)).collect();
    let out: Vec<(Vec<f64>, usize, bool)> = starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let (est, st) = adaptive_estimate(&tpl, truth, x0, &bounds, opts, seed ^ (k as u64 + 1))?;
            Ok((est.x_est, st.rounds_used(), st.stop == StopReason::Converged))
        })
        .collect::<Result<_>>()?;
    let finals: Vec<Vec<f64>> = out.iter().map(|o| o.0.clone()).collect();
    let stats = precision_stats(&finals, truth)?;
    let within_3std = finals
        .iter()
        .filter(|x| x.iter().zip(truth).zip(&stats.std).all(|((a, b), s)| (a - b).abs() <= 3.0 * s))
        .count();
    Ok(AdaptiveBatch {
        rounds: out.iter().map(|o| o.1).collect(),
        converged: out.iter().map(|o| o.2).collect(),
        finals,
        starts,
        stats,
        within_3std,
    })
}

/// One-sided Mann-Whitney test with normal approximation (tie-corrected
/// ranks, no continuity correction). Returns the p-value of
/// `H₁: a tends to exceed b`.
pub fn mann_whitney_greater(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, usize)> = a.iter().map(|v| (*v, 0)).chain(b.iter().map(|v| (*v, 1))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; all.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        ranks[i..=j].iter_mut().for_each(|x| *x = r);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let ra: f64 = all.iter().zip(&ranks).filter(|(v, _)| v.1 == 0).map(|(_, r)| r).sum();
    let u = ra - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 0.5;
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    1.0 - Normal::standard().cdf(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseAxis {
    DephasingRate,
    GateError,
    ReadoutFlip,
}

impl NoiseAxis {
    pub fn model(self, level: f64) -> Result<NoiseModel> {
        match self {
            Self::DephasingRate => NoiseModel::dephasing(level),
            Self::GateError => NoiseModel::gate(level),
            Self::ReadoutFlip => NoiseModel::readout(level),
        }
    }
}

/// One noise level of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub level: f64,
    pub stats: PrecisionStats,
    /// Per-trial squared gradient errors.
    pub squared_errors: Vec<f64>,
    /// Mean-squared distance of the noisy distribution to the ideal one,
    /// before and after readout mitigation.
    pub dist_mse: f64,
    pub mitigated_mse: f64,
    /// Fits stopped by the iteration cap, mostly creeping along the weakly
    /// identified sum coordinates.
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweep {
    pub axis: NoiseAxis,
    pub points: Vec<NoisePoint>,
    /// p-values of "level k has larger errors than level k+1".
    pub decrease_p_values: Vec<f64>,
}

impl NoiseSweep {
    /// No adjacent pair shows a significant decrease at level `alpha`.
    pub fn is_non_decreasing(&self, alpha: f64) -> bool {
        self.decrease_p_values.iter().all(|p| *p >= alpha)
    }
}

/// NLE gradient estimation under increasing noise at field `(b, π/2, π/4)`.
/// The estimator fits the noise-aware model.
pub fn noise_sweep(
    axis: NoiseAxis,
    levels: &[f64],
    b: f64,
    t: f64,
    n_cycles: u32,
    cfg: &McConfig,
) -> Result<NoiseSweep> {
    let f = VectorField::spherical(b, FRAC_PI_2, FRAC_PI_4);
    let [bx, by, _] = f.to_cartesian();
    let truth = [0.0, 0.0, 2.0 * bx, 2.0 * by];
    let control = offset_control(&truth, n_cycles);
    let tpl = nle_template(t, n_cycles)?;
    let ideal = tpl.distribution_with(&truth, &control)?;
    let bounds = local_bounds(ParamSpace::GradSum2, &control, n_cycles)?;
    let points: Vec<NoisePoint> = levels
        .iter()
        .map(|&level| {
            let noise = axis.model(level)?;
            let model = NoisyTemplate { template: tpl.clone(), noise };
            let res = monte_carlo(&model, &truth, &control, &bounds, cfg, |x| {
                x[..2].to_vec()
            })?;
            let noisy = model.distribution(&truth, &control)?;
            let mitigated = if noise.readout_confusion.is_identity() {
                noisy.clone()
            } else {
                mitigate_readout(&noisy, &noise.readout_confusion)?
            };
            Ok(NoisePoint {
                level,
                stats: precision_stats(&res.estimates, &[0.0, 0.0])?,
                squared_errors: res.estimates.iter().map(|e| e[0] * e[0] + e[1] * e[1]).collect(),
                dist_mse: distribution_mse(&noisy, &ideal),
                mitigated_mse: distribution_mse(&mitigated, &ideal),
                unconverged: res.unconverged,
            })
        })
        .collect::<Result<_>>()?;
    let decrease_p_values = points
        .windows(2)
        .map(|w| mann_whitney_greater(&w[0].squared_errors, &w[1].squared_errors))
        .collect();
    Ok(NoiseSweep { axis, points, decrease_p_values })
}

/// Readout-mitigation check on sampled data: mean over `trials` of the
/// distribution MSE to the ideal distribution, raw and mitigated.
pub fn mitigation_study(
    template: &RunTemplate,
    x: &[f64],
    control: &[f64],
    flip: f64,
    shots: u64,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let conf = ReadoutConfusion::symmetric(flip)?;
    let ideal = template.distribution_with(x, control)?;
    let noisy = apply_readout_error(&ideal, &conf)?;
    let pairs: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let emp = sample_shots(&noisy, shots, seed ^ k as u64)?.to_distribution();
            let mit = mitigate_readout(&emp, &conf)?;
            Ok((distribution_mse(&emp, &ideal), distribution_mse(&mit, &ideal)))
        })
        .collect::<Result<_>>()?;
    let m = trials as f64;
    Ok((pairs.iter().map(|p| p.0).sum::<f64>() / m, pairs.iter().map(|p| p.1).sum::<f64>() / m))
}
