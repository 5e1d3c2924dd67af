use qnetsense::studies::{noise_sweep, McConfig};
use serde_json::json;

use super::RunOutput;
use crate::config::NoiseSweepConfig;
use crate::error::{AtPoint, CliError};
use crate::table::{num, Provenance, ResultTable};

pub fn run(cfg: &NoiseSweepConfig, prov: Provenance) -> Result<RunOutput, CliError> {
    let mc = McConfig::new(cfg.shots, cfg.trials, prov.seed);
    let sweep = noise_sweep(cfg.axis, &cfg.levels, cfg.b, cfg.t, cfg.n, &mc)
        .at(|| format!("{:?} levels {:?}", cfg.axis, cfg.levels))?;

    let columns = [
        "level",
        "variance_sum",
        "std_gradBx",
        "std_gradBy",
        "bias_gradBx",
        "bias_gradBy",
        "dist_mse",
        "mitigated_dist_mse",
        "p_decrease_from_previous",
        "unconverged_fits",
    ];
    let mut table = ResultTable::new(prov, columns.map(String::from).to_vec());
    for (k, p) in sweep.points.iter().enumerate() {
        let p_dec = if k == 0 { String::new() } else { num(sweep.decrease_p_values[k - 1]) };
        table.push(vec![
            num(p.level),
            num(p.stats.variance_sum),
            num(p.stats.std[0]),
            num(p.stats.std[1]),
            num(p.stats.bias[0]),
            num(p.stats.bias[1]),
            num(p.dist_mse),
            num(p.mitigated_mse),
            p_dec,
            p.unconverged.to_string(),
        ]);
    }
    let summary = json!({
        "axis": cfg.axis,
        "levels": cfg.levels,
        "alpha": cfg.alpha,
        "non_decreasing": sweep.is_non_decreasing(cfg.alpha),
        "decrease_p_values": sweep.decrease_p_values,
    });
    Ok(RunOutput { table, summary })
}
