//! Adaptive control loop: measure under the current control, re-fit all
//! rounds jointly, move the control to the new estimate.

use serde::{Deserialize, Serialize};

use super::mle::{multi_start, Estimate, MleOptions};
use super::{log_likelihood_of, sample_shots, Bounds, Model, ShotRecord};
use crate::error::{Error, Result};

/// Hard cap on adaptive rounds.
pub const MAX_ROUNDS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOptions {
    pub shots: u64,
    pub max_rounds: usize,
    /// Stop once `‖x_c^(m+1) − x_c^(m)‖` falls below this.
    pub tol: f64,
    pub mle: MleOptions,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { shots: 600, max_rounds: MAX_ROUNDS, tol: 1e-4, mle: MleOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxRounds,
}

/// One completed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index `m`.
    pub round: usize,
    pub control: Vec<f64>,
    pub estimate: Vec<f64>,
    /// Per-round likelihoods `L_m = Σ_i P_i^exp(m) ln P_i(x̂, x_c^(m))` at the
    /// new estimate.
    pub round_likelihoods: Vec<f64>,
    /// `Π_m L_m`; its sign is `(−1)^m` since every `L_m ≤ 0`.
    pub joint_likelihood: f64,
    /// `(−1)^m Π_m L_m = Π_m |L_m| ≥ 0`.
    pub cost: f64,
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub history: Vec<(Vec<f64>, ShotRecord)>,
    pub rounds: Vec<RoundRecord>,
    pub r_iter: usize,
    pub stop: StopReason,
}

impl AdaptiveState {
    pub fn rounds_used(&self) -> usize {
        self.rounds.len()
    }
}

/// Runs the adaptive protocol against a simulated `truth`.
///
/// The estimate of round `m` maximizes `Σ_k L_k` over all rounds so far,
/// the log of the joint probability of every recorded shot. The product
/// `Π_k L_k` and its sign-corrected cost are recorded per round for
/// bookkeeping.
pub fn adaptive_estimate<M: Model + ?Sized>(
    model: &M,
    truth: &[f64],
    x_c0: &[f64],
    bounds: &Bounds,
    opts: &AdaptiveOptions,
    seed: u64,
) -> Result<(Estimate, AdaptiveState)> {
    if opts.max_rounds == 0 || opts.max_rounds > MAX_ROUNDS {
        return Err(Error::InvalidParameter(format!("rounds must be in 1..={MAX_ROUNDS}, got {}", opts.max_rounds)));
    }
    let mut control = x_c0.to_vec();
    bounds.clamp(&mut control);
    let mut history: Vec<(Vec<f64>, ShotRecord)> = Vec::new();
    let mut rounds = Vec::new();
    let mut last: Option<Estimate> = None;
    let mut stop = StopReason::MaxRounds;
    for m in 1..=opts.max_rounds {
        let dist = model.distribution(truth, &control)?;
        let round_seed = seed ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        history.push((control.clone(), sample_shots(&dist, opts.shots, round_seed)?));
        let data: Vec<(Vec<f64>, Vec<f64>)> =
            history.iter().map(|(c, r)| (c.clone(), r.frequencies())).collect();
        let per_round = |x: &[f64]| -> Vec<f64> {
            data.iter()
                .map(|(c, f)| match model.distribution(x, c) {
                    Ok(d) => log_likelihood_of(f, d.probs()),
                    Err(_) => f64::NEG_INFINITY,
                })
                .collect()
        };
        let objective = |x: &[f64]| per_round(x).iter().sum::<f64>();
        let mle_opts = MleOptions { anchor: None, ..opts.mle.clone() };
        let est = multi_start(&objective, &control, bounds, &mle_opts)?;
        let ls = per_round(&est.x_est);
        let joint: f64 = ls.iter().product();
        let update_norm = est.x_est.iter().zip(&control).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        rounds.push(RoundRecord {
            round: m,
            control: control.clone(),
            estimate: est.x_est.clone(),
            joint_likelihood: joint,
            cost: if m % 2 == 0 { joint } else { -joint },
            round_likelihoods: ls,
            update_norm,
        });
        control = est.x_est.clone();
        last = Some(est);
        if update_norm < opts.tol {
            stop = StopReason::Converged;
            break;
        }
    }
    let est = last.expect("at least one round");
    Ok((est, AdaptiveState { history, rounds, r_iter: opts.max_rounds, stop }))
}
