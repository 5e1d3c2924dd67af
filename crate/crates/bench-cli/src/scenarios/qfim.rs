use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use qnetsense::field::signal_unitary;
use qnetsense::fisher::{
    invert_info, le_bell_qfim_2, le_bell_qfim_3, max_qfim, nle_qfim_2, nle_qfim_3, qfim_overlap, FnStateFamily,
    Inversion, DEFAULT_STEP,
};
use qnetsense::qcore::bell_states;
use qnetsense::{EncodingConfig, FisherMatrix, ParamSpace, RunTemplate, Strategy, StrategyKind, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::RunOutput;
use crate::config::{QfimConfig, QfimPoint};
use crate::error::{AtPoint, CliError};
use crate::table::{num, Provenance, ResultTable};

fn random_points(cfg: &QfimConfig, seed: u64) -> Vec<QfimPoint> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < cfg.random_points {
        let b: f64 = r.random_range(0.2..2.0);
        let t: f64 = r.random_range(0.2..3.0);
        let theta = r.random_range(0.2..PI - 0.2);
        let phi = r.random_range(-PI..PI);
        if (b * t).sin().abs() > 0.2 {
            let theta = if cfg.components == 2 { FRAC_PI_2 } else { theta };
            out.push(QfimPoint { b, theta, phi, t });
        }
    }
    out
}

fn block_diag(a: &FisherMatrix, b: &FisherMatrix, labels: &[&str]) -> qnetsense::Result<FisherMatrix> {
    let (n, m) = (a.dim(), b.dim());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a.matrix());
    out.view_mut((n, n), (m, m)).copy_from(b.matrix());
    FisherMatrix::new(out, labels.iter().map(|s| s.to_string()).collect())
}

struct Evaluated {
    numeric: FisherMatrix,
    closed: FisherMatrix,
    /// Largest entry coupling the difference and sum blocks (NLE only).
    cross_block: Option<f64>,
}

fn evaluate(kind: StrategyKind, components: usize, p: &QfimPoint) -> qnetsense::Result<Evaluated> {
    let f = VectorField::spherical(p.b, p.theta, p.phi);
    let [bx, by, bz] = f.to_cartesian();
    let enc = EncodingConfig::new(p.t, 1)?;
    match (kind, components) {
        (StrategyKind::Rs, 3) => {
            let tpl = RunTemplate::new(Strategy::new(kind, 3)?, ParamSpace::Spherical, vec![0.0; 3], enc)?;
            let numeric = qfim_overlap(&tpl, &[p.b, p.theta, p.phi], DEFAULT_STEP)?;
            Ok(Evaluated { numeric, closed: max_qfim(&f, p.t), cross_block: None })
        }
        (StrategyKind::Rs, _) => {
            let tpl = RunTemplate::new(Strategy::new(kind, 2)?, ParamSpace::Planar, vec![0.0; 2], enc)?;
            let numeric = qfim_overlap(&tpl, &[p.b, p.phi], DEFAULT_STEP)?;
            Ok(Evaluated { numeric, closed: max_qfim(&f, p.t).block(&[0, 2]), cross_block: None })
        }
        (StrategyKind::Nle, 3) => {
            let space = ParamSpace::GradSum3;
            let tpl = RunTemplate::new(Strategy::new(kind, 3)?, space, vec![0.0; 6], enc)?;
            let numeric = qfim_overlap(&tpl, &[0.0, 0.0, 0.0, 2.0 * bx, 2.0 * by, 2.0 * bz], DEFAULT_STEP)?;
            let (minus, plus) = nle_qfim_3(&f, p.t)?;
            let cross = numeric.cross_block_max(&[0, 1, 2], &[3, 4, 5]);
            Ok(Evaluated { numeric, closed: block_diag(&minus, &plus, space.labels())?, cross_block: Some(cross) })
        }
        (StrategyKind::Nle, _) => {
            let space = ParamSpace::GradSum2;
            let tpl = RunTemplate::new(Strategy::new(kind, 2)?, space, vec![0.0; 4], enc)?;
            let numeric = qfim_overlap(&tpl, &[0.0, 0.0, 2.0 * bx, 2.0 * by], DEFAULT_STEP)?;
            let (minus, plus) = nle_qfim_2(&f, p.t)?;
            let cross = numeric.cross_block_max(&[0, 1], &[2, 3]);
            Ok(Evaluated { numeric, closed: block_diag(&minus, &plus, space.labels())?, cross_block: Some(cross) })
        }
        (_, c) => {
            // one LE_bell module: a Bell pair with both qubits in the field
            let planar = c == 2;
            let labels: &[&str] = if planar { &["B", "phi"] } else { &["B", "theta", "phi"] };
            let t = p.t;
            let family = FnStateFamily::new(labels, move |y: &[f64]| {
                let g = if planar {
                    VectorField::spherical(y[0], FRAC_PI_2, y[1])
                } else {
                    VectorField::spherical(y[0], y[1], y[2])
                };
                let u = signal_unitary(&g, t);
                bell_states()[0].apply(&u.kron(&u)?)
            });
            let x: Vec<f64> = if planar { vec![p.b, p.phi] } else { vec![p.b, p.theta, p.phi] };
            let numeric = qfim_overlap(&family, &x, DEFAULT_STEP)?;
            let closed = if planar { le_bell_qfim_2(&f, t)? } else { le_bell_qfim_3(&f, t)? };
            Ok(Evaluated { numeric, closed, cross_block: None })
        }
    }
}

pub fn run(cfg: &QfimConfig, prov: Provenance) -> Result<RunOutput, CliError> {
    let mut points = cfg.points.clone();
    points.extend(random_points(cfg, prov.seed));

    let results: Vec<Evaluated> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            evaluate(cfg.strategy, cfg.components, p)
                .at(|| format!("point {i} (B={}, theta={}, phi={}, T={})", p.b, p.theta, p.phi, p.t))
        })
        .collect::<Result<_, _>>()?;

    let labels = results[0].numeric.labels().to_vec();
    let pairs: Vec<(usize, usize)> = (0..labels.len()).flat_map(|i| (i..labels.len()).map(move |j| (i, j))).collect();
    let mut columns: Vec<String> = ["point", "B", "theta", "phi", "T"].map(String::from).to_vec();
    for &(i, j) in &pairs {
        columns.push(format!("num_{}_{}", labels[i], labels[j]));
        columns.push(format!("cf_{}_{}", labels[i], labels[j]));
    }
    columns.extend(["max_abs_diff", "cross_block_max", "identifiable", "non_identifiable"].map(String::from));

    let mut table = ResultTable::new(prov, columns);
    let mut worst = 0.0f64;
    let mut worst_cross = 0.0f64;
    let mut singular = 0;
    for (k, (p, e)) in points.iter().zip(&results).enumerate() {
        let mut row = vec![k.to_string(), num(p.b), num(p.theta), num(p.phi), num(p.t)];
        for &(i, j) in &pairs {
            row.push(num(e.numeric.get(i, j)));
            row.push(num(e.closed.get(i, j)));
        }
        let diff = e.numeric.max_abs_diff(&e.closed);
        worst = worst.max(diff);
        row.push(num(diff));
        row.push(e.cross_block.map(num).unwrap_or_default());
        if let Some(c) = e.cross_block {
            worst_cross = worst_cross.max(c);
        }
        match invert_info(&e.numeric) {
            Inversion::Regular(_) => row.extend(["yes".to_string(), String::new()]),
            Inversion::Singular(rep) => {
                singular += 1;
                row.extend(["no".to_string(), rep.non_identifiable().join(";")]);
            }
        }
        table.push(row);
    }
    let summary = json!({
        "strategy": cfg.strategy,
        "components": cfg.components,
        "points": points.len(),
        "max_abs_diff": worst,
        "max_cross_block": if results[0].cross_block.is_some() { json!(worst_cross) } else { json!(null) },
        "singular_points": singular,
    });
    Ok(RunOutput { table, summary })
}
