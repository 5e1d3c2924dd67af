use qnetsense::estimation::gain_db;
use qnetsense::fisher::precision_bound;
use qnetsense::studies::{gradient_study, scaling_exponent, McConfig};
use qnetsense::{StrategyKind, VectorField};
use serde_json::json;

use super::RunOutput;
use crate::config::{PrecisionSweepConfig, SweepAxis};
use crate::error::{AtPoint, CliError};
use crate::table::{num, Provenance, ResultTable, DIVERGENT};

struct Point {
    f: VectorField,
    t: f64,
    n: u32,
}

fn point(cfg: &PrecisionSweepConfig, v: f64) -> Point {
    let (mut b, mut theta, mut t, mut n) = (cfg.field.b, cfg.field.theta, cfg.t, cfg.n);
    match cfg.sweep.axis {
        SweepAxis::B => b = v,
        SweepAxis::T => t = v,
        SweepAxis::N => n = v as u32,
        SweepAxis::Bz => theta = (v / b).clamp(-1.0, 1.0).acos(),
    }
    Point { f: VectorField::spherical(b, theta, cfg.field.phi), t, n }
}

fn gain(reference: f64, nle: f64) -> String {
    if reference.is_finite() && nle.is_finite() {
        num(gain_db(reference, nle))
    } else {
        DIVERGENT.to_string()
    }
}

pub fn run(cfg: &PrecisionSweepConfig, prov: Provenance) -> Result<RunOutput, CliError> {
    let values = cfg.sweep.grid().resolve("sweep")?;
    let axis = format!("{:?}", cfg.sweep.axis);
    let nle_idx = cfg.strategies.iter().position(|s| *s == StrategyKind::Nle);

    let mut columns = vec![axis.clone()];
    columns.extend(cfg.strategies.iter().map(|s| format!("bound_{s}")));
    if nle_idx.is_some() {
        columns.extend(cfg.strategies.iter().filter(|s| **s != StrategyKind::Nle).map(|s| format!("gain_db_NLE_vs_{s}")));
    }
    if cfg.monte_carlo.is_some() {
        columns.extend(["mc_var_NLE", "mc_var_LE_bell", "mc_gain_db", "mc_NLE_over_crb"].map(String::from));
    }
    let mut table = ResultTable::new(prov.clone(), columns);

    let mut totals: Vec<Vec<f64>> = vec![Vec::new(); cfg.strategies.len()];
    let mut achievable = vec![true; cfg.strategies.len()];
    for (k, &v) in values.iter().enumerate() {
        let p = point(cfg, v);
        let here = || format!("sweep.values[{k}] ({axis} = {v})");
        let bounds = cfg
            .strategies
            .iter()
            .map(|&s| precision_bound(s, cfg.components, &p.f, p.t, p.n))
            .collect::<qnetsense::Result<Vec<_>>>()
            .at(here)?;
        let mut row = vec![num(v)];
        for (i, b) in bounds.iter().enumerate() {
            row.push(num(b.total));
            totals[i].push(b.total);
            achievable[i] &= b.achievable;
        }
        if let Some(ni) = nle_idx {
            for (i, b) in bounds.iter().enumerate() {
                if i != ni {
                    row.push(gain(b.total, bounds[ni].total));
                }
            }
        }
        if let Some(mc) = &cfg.monte_carlo {
            if bounds.iter().any(|b| b.is_divergent()) {
                row.extend(std::iter::repeat_n(DIVERGENT.to_string(), 4));
            } else {
                let [_, _, phi] = p.f.spherical_coords();
                let study = gradient_study(p.f.b(), phi, p.t, p.n, &McConfig::new(mc.shots, mc.trials, prov.seed))
                    .at(here)?;
                row.push(num(study.nle.variance_sum));
                row.push(num(study.le_bell.variance_sum));
                row.push(num(study.gain_db));
                row.push(num(study.nle.variance_sum / study.nle_bound));
            }
        }
        table.push(row);
    }

    let mut per_strategy = serde_json::Map::new();
    for (i, s) in cfg.strategies.iter().enumerate() {
        let mut entry = json!({ "achievable": achievable[i] });
        if cfg.sweep.axis == SweepAxis::N && values.len() >= 2 && totals[i].iter().all(|t| t.is_finite()) {
            let ns: Vec<u32> = values.iter().map(|v| *v as u32).collect();
            if let Ok(e) = scaling_exponent(&ns, &totals[i]) {
                entry["n_scaling_exponent"] = json!(e);
            }
        }
        per_strategy.insert(s.to_string(), entry);
    }
    let divergent = totals.iter().flatten().filter(|t| !t.is_finite()).count();
    let summary = json!({
        "axis": axis,
        "points": values.len(),
        "components": cfg.components,
        "strategies": per_strategy,
        "divergent_cells": divergent,
    });
    Ok(RunOutput { table, summary })
}
