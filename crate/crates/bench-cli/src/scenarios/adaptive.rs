use qnetsense::estimation::{adaptive_estimate, precision_stats, AdaptiveOptions, AdaptiveState, Bounds, StopReason};
use qnetsense::studies::{random_start, rs_template};
use qnetsense::ParamSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::RunOutput;
use crate::config::AdaptiveConfig;
use crate::error::{AtPoint, CliError};
use crate::table::{num, Provenance, ResultTable};

fn stop_label(s: StopReason) -> &'static str {
    match s {
        StopReason::Converged => "converged",
        StopReason::MaxRounds => "max_rounds",
    }
}

pub fn run(cfg: &AdaptiveConfig, prov: Provenance) -> Result<RunOutput, CliError> {
    let truth = [cfg.truth.b, cfg.truth.theta, cfg.truth.phi];
    let tpl = rs_template(cfg.t, 1).at(|| format!("T = {}", cfg.t))?;
    let bounds = Bounds::default_for(ParamSpace::Spherical);
    let opts = AdaptiveOptions { shots: cfg.shots, max_rounds: cfg.max_rounds, tol: cfg.tol, ..AdaptiveOptions::default() };

    let mut starts = cfg.starts.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(prov.seed);
    starts.extend((0..cfg.random_starts).map(|_| random_start(&mut rng)));

    let runs: Vec<AdaptiveState> = starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            adaptive_estimate(&tpl, &truth, x0, &bounds, &opts, prov.seed ^ (k as u64 + 1))
                .map(|(_, st)| st)
                .at(|| format!("run {k} from start {x0:?}"))
        })
        .collect::<Result<_, _>>()?;

    let labels = ["B", "theta", "phi"];
    let mut columns = vec!["run".to_string(), "round".to_string()];
    columns.extend(labels.iter().map(|l| format!("control_{l}")));
    columns.extend(labels.iter().map(|l| format!("estimate_{l}")));
    columns.extend(["joint_likelihood", "cost", "update_norm", "stop"].map(String::from));
    let mut table = ResultTable::new(prov, columns);

    let mut finals = Vec::new();
    let mut per_run = Vec::new();
    for (k, st) in runs.iter().enumerate() {
        for (m, r) in st.rounds.iter().enumerate() {
            let mut row = vec![k.to_string(), r.round.to_string()];
            row.extend(r.control.iter().chain(&r.estimate).map(|v| num(*v)));
            row.extend([num(r.joint_likelihood), num(r.cost), num(r.update_norm)]);
            row.push(if m + 1 == st.rounds.len() { stop_label(st.stop).to_string() } else { String::new() });
            table.push(row);
        }
        let last = st.rounds.last().map(|r| r.estimate.clone()).unwrap_or_default();
        per_run.push(json!({
            "start": starts[k],
            "rounds": st.rounds_used(),
            "stop": stop_label(st.stop),
            "estimate": last,
        }));
        finals.push(last);
    }
    let converged = runs.iter().filter(|s| s.stop == StopReason::Converged).count();
    let stats = if finals.len() >= 2 { precision_stats(&finals, &truth).ok() } else { None };
    let summary = json!({
        "truth": truth,
        "T": cfg.t,
        "runs": per_run,
        "converged": converged,
        "max_rounds_used": runs.iter().map(AdaptiveState::rounds_used).max(),
        "final_stats": stats,
    });
    Ok(RunOutput { table, summary })
}
