use qnetsense::protocols::PROB_FLOOR;
use qnetsense::{EncodingConfig, OutcomeDistribution, RunTemplate, Strategy};
use rayon::prelude::*;
use serde_json::json;

use super::RunOutput;
use crate::config::LandscapeConfig;
use crate::error::{AtPoint, CliError};
use crate::table::{num, Provenance, ResultTable};

struct Cell {
    raw: f64,
    probs: OutcomeDistribution,
}

/// Index into the parameter vector, or `None` for the interrogation time.
fn axis_index(cfg: &LandscapeConfig, param: &str) -> Option<usize> {
    let space = cfg.space().expect("validated");
    space.labels().iter().position(|l| *l == param)
}

pub fn run(cfg: &LandscapeConfig, prov: Provenance) -> Result<RunOutput, CliError> {
    let space = cfg.space().expect("validated");
    let grid_a = cfg.axes[0].grid().resolve("axes[0]")?;
    let grid_b = cfg.axes[1].grid().resolve("axes[1]")?;
    let (ia, ib) = (axis_index(cfg, &cfg.axes[0].param), axis_index(cfg, &cfg.axes[1].param));
    let control = cfg.control.clone().unwrap_or_else(|| cfg.truth.clone());
    let strategy = Strategy::new(cfg.strategy, cfg.components)
        .map_err(|e| CliError::Config { path: "components".into(), message: e.to_string() })?;

    let template = |t: f64| -> qnetsense::Result<RunTemplate> {
        RunTemplate::new(strategy, space, control.clone(), EncodingConfig::new(t, cfg.n)?)
    };
    let evaluate = |a: f64, b: f64| -> qnetsense::Result<Cell> {
        let mut x = cfg.truth.clone();
        let mut t = cfg.t;
        for (idx, v) in [(ia, a), (ib, b)] {
            match idx {
                Some(i) => x[i] = v,
                None => t = v,
            }
        }
        let tpl = template(t)?;
        let reference = tpl.distribution_with(&cfg.truth, &control)?;
        let probs = tpl.distribution_with(&x, &control)?;
        let raw = reference
            .probs()
            .iter()
            .zip(probs.probs())
            .map(|(r, q)| if *r > 0.0 { r * q.max(PROB_FLOOR).ln() } else { 0.0 })
            .sum();
        Ok(Cell { raw, probs })
    };

    let cells: Vec<Vec<Cell>> = grid_a
        .par_iter()
        .map(|&a| {
            grid_b
                .iter()
                .map(|&b| {
                    evaluate(a, b).at(|| format!("{} = {a}, {} = {b}", cfg.axes[0].param, cfg.axes[1].param))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let (mut lo, mut hi, mut argmax) = (f64::INFINITY, f64::NEG_INFINITY, (0, 0));
    for (i, row) in cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            lo = lo.min(c.raw);
            if c.raw > hi {
                hi = c.raw;
                argmax = (i, j);
            }
        }
    }
    let span = hi - lo;
    let normalize = |v: f64| if span > 1e-14 * hi.abs().max(1.0) { (v - lo) / span } else { 1.0 };

    let outcomes = cells[0][0].probs.labels().to_vec();
    let mut columns = vec![cfg.axes[0].param.clone(), cfg.axes[1].param.clone(), "raw".into(), "normalized".into()];
    columns.extend(outcomes.iter().map(|o| format!("P_{o}")));
    let mut table = ResultTable::new(prov, columns);
    for (i, row) in cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let mut r = vec![num(grid_a[i]), num(grid_b[j]), num(c.raw), num(normalize(c.raw))];
            r.extend(c.probs.probs().iter().map(|p| num(*p)));
            table.push(r);
        }
    }

    // second differences of the raw landscape through the peak
    let curvature = |grid: &[f64], at: usize, f: &dyn Fn(usize) -> f64| -> Option<f64> {
        if at == 0 || at + 1 >= grid.len() {
            return None;
        }
        let h = (grid[at + 1] - grid[at - 1]) / 2.0;
        Some((f(at + 1) - 2.0 * f(at) + f(at - 1)) / (h * h))
    };
    let (pi, pj) = argmax;
    let curv_a = curvature(&grid_a, pi, &|i| cells[i][pj].raw);
    let curv_b = curvature(&grid_b, pj, &|j| cells[pi][j].raw);

    let nearest = |grid: &[f64], v: f64| {
        (0..grid.len()).min_by(|&p, &q| (grid[p] - v).abs().total_cmp(&(grid[q] - v).abs())).unwrap_or(0)
    };
    let truth_cell = match (ia, ib) {
        (Some(a), Some(b)) => Some((nearest(&grid_a, cfg.truth[a]), nearest(&grid_b, cfg.truth[b]))),
        _ => None,
    };
    let summary = json!({
        "strategy": cfg.strategy,
        "components": cfg.components,
        "axes": [cfg.axes[0].param, cfg.axes[1].param],
        "grid": [grid_a.len(), grid_b.len()],
        "argmax": { "index": [pi, pj], "at": [grid_a[pi], grid_b[pj]], "raw": hi },
        "truth_cell": truth_cell.map(|(a, b)| json!([a, b])),
        "argmax_is_truth_cell": truth_cell.map(|c| c == argmax),
        "peak_curvature": [curv_a, curv_b],
    });
    Ok(RunOutput { table, summary })
}
