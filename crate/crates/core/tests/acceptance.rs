//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`harness = false`) so the lines always reach stdout.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qnetsense::estimation::{gain_db, AdaptiveOptions};
use qnetsense::field::signal_unitary;
use qnetsense::fisher::{
    cfim, cfim_with_limit, invert_info, le_bell_qfim_3, le_optimal_correlations, le_variance_bound, max_qfim,
    nle_qfim_3, precision_bound, qfim_overlap, weak_commutativity_residual, FnStateFamily, WeightVector,
    DEFAULT_STEP,
};
use qnetsense::qcore::bell_states;
use qnetsense::studies::{
    adaptive_batch, gradient_study, heisenberg_study, mitigation_study, nle_template, noise_sweep, offset_control,
    rs_study, rs_template, McConfig, NoiseAxis,
};
use qnetsense::{EncodingConfig, ParamSpace, ProtocolRun, RunTemplate, Signal, Strategy, StrategyKind, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = qnetsense::Result<(bool, String)>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(B, θ, φ, T)` away from `sin(BT) = 0` and `sin θ = 0`.
fn generic_point(r: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    loop {
        let b: f64 = r.random_range(0.2..2.0);
        let th = r.random_range(0.2..PI - 0.2);
        let ph = r.random_range(-PI..PI);
        let t = r.random_range(0.2..3.0);
        if (b * t).sin().abs() > 0.2 {
            return (b, th, ph, t);
        }
    }
}

fn nle3(t: f64, n: u32) -> qnetsense::Result<RunTemplate> {
    RunTemplate::new(Strategy::new(StrategyKind::Nle, 3)?, ParamSpace::GradSum3, vec![0.0; 6], EncodingConfig::new(t, n)?)
}

/// Zero-gradient NLE coordinates for both modules seeing `f`.
fn zero_gradient(f: &VectorField) -> [f64; 6] {
    let c = f.to_cartesian();
    [0.0, 0.0, 0.0, 2.0 * c[0], 2.0 * c[1], 2.0 * c[2]]
}

fn rs_closed_form() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let b: f64 = r.random_range(0.0..2.0);
        let th = r.random_range(0.0..PI);
        let ph = r.random_range(-PI..PI);
        let t = r.random_range(0.05..4.0);
        let f = VectorField::spherical(b, th, ph);
        let run = ProtocolRun::uncontrolled(Strategy::new(StrategyKind::Rs, 3)?, Signal::Single(f), EncodingConfig::new(t, 1)?)?;
        let d = run.distribution()?;
        let (s2, c2) = ((b * t).sin().powi(2), (b * t).cos().powi(2));
        let expected = [
            c2,
            s2 * th.cos().powi(2),
            s2 * th.sin().powi(2) * ph.cos().powi(2),
            s2 * th.sin().powi(2) * ph.sin().powi(2),
        ];
        for (p, e) in d.probs().iter().zip(expected) {
            worst = worst.max((p - e).abs());
        }
    }
    Ok((worst < 1e-10, format!("max |ΔP| = {worst:.1e} over 50 points")))
}

fn max_qfim_saturation() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (b, th, ph, t) = generic_point(&mut r);
        let c = cfim(&rs_template(t, 1)?, &[b, th, ph], DEFAULT_STEP)?;
        worst = worst.max(c.max_abs_diff(&max_qfim(&VectorField::spherical(b, th, ph), t)));
    }
    Ok((worst < 1e-6, format!("max |CFIM − QFIM_max| = {worst:.1e} over 20 points")))
}

fn heisenberg_qfim() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (b, th, ph, t) = generic_point(&mut r);
        let x = [b, th, ph];
        let rs1 = qfim_overlap(&rs_template(t, 1)?.with_control(&x), &x, DEFAULT_STEP)?;
        let f = VectorField::spherical(b, th, ph);
        let nle1 = qfim_overlap(&nle3(t, 1)?.with_control(&zero_gradient(&f)), &zero_gradient(&f), DEFAULT_STEP)?;
        for n in [1u32, 2, 4, 8] {
            let n2 = f64::from(n * n);
            let rsn = qfim_overlap(&rs_template(t, n)?.with_control(&x), &x, DEFAULT_STEP)?;
            worst = worst.max(rsn.max_abs_diff(&rs1.scaled(n2)));
            let g = zero_gradient(&f);
            let nlen = qfim_overlap(&nle3(t, n)?.with_control(&g), &g, DEFAULT_STEP)?;
            worst = worst.max(nlen.max_abs_diff(&nle1.scaled(n2)));
        }
    }
    Ok((worst < 1e-8, format!("max |F(N) − N²F(1)| = {worst:.1e} (RS and NLE, N = 1, 2, 4, 8)")))
}

fn nle_trace(b: f64, bz: f64, t: f64) -> f64 {
    (4.0 * b * b - 3.0 * bz * bz) / (16.0 * b * b * t * t) + (5.0 * b * b + 3.0 * bz * bz) / (16.0 * (b * t).sin().powi(2))
}

fn nle_structure() -> Outcome {
    let mut r = rng(4);
    let (mut cross, mut trace) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let (b, th, ph, t) = generic_point(&mut r);
        let f = VectorField::spherical(b, th, ph);
        let q = qfim_overlap(&nle3(t, 1)?, &zero_gradient(&f), DEFAULT_STEP)?;
        cross = cross.max(q.cross_block_max(&[0, 1, 2], &[3, 4, 5]));
        let tr = invert_info(&q.block(&[0, 1, 2])).trace();
        trace = trace.max((tr - nle_trace(b, f.to_cartesian()[2], t)).abs());
    }
    let f = VectorField::spherical(1.0, FRAC_PI_2, 0.0);
    let spot = invert_info(&nle_qfim_3(&f, FRAC_PI_2)?.0).trace();
    let spot_ok = (spot - nle_trace(1.0, 0.0, FRAC_PI_2)).abs() < 1e-12 && (spot - 0.41376).abs() < 1e-4;
    Ok((
        cross < 1e-8 && trace < 1e-8 && spot_ok,
        format!("cross block {cross:.1e}, |ΔTr F₋⁻¹| = {trace:.1e}, spot {spot:.6}"),
    ))
}

fn zero_probability_limit() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut limited = 0;
    for _ in 0..5 {
        let (b, th, ph, t) = generic_point(&mut r);
        let x = zero_gradient(&VectorField::spherical(b, th, ph));
        let tpl = nle3(t, 1)?;
        let (c, diag) = cfim_with_limit(&tpl, &x, DEFAULT_STEP, None)?;
        limited += usize::from(diag.used_limit);
        worst = worst.max(c.max_rel_diff(&qfim_overlap(&tpl, &x, DEFAULT_STEP)?));
    }
    Ok((worst < 1e-4 && limited == 5, format!("max relative |CFIM − QFIM| = {worst:.1e}, limit used at {limited}/5 points")))
}

/// Table rows written out independently of the library.
fn table_row(kind: StrategyKind, comps: usize, f: &VectorField, t: f64) -> f64 {
    let b = f.b();
    let [bx, _, bz] = f.to_cartesian();
    let (s2, c2) = ((b * t).sin().powi(2), (b * t).cos().powi(2));
    use StrategyKind::*;
    match (kind, comps) {
        (Nle, 3) => nle_trace(b, bz, t),
        (Rs, 3) => 1.0 / (4.0 * t * t) + b * b / (2.0 * s2),
        (LeOpt, 3) => (1.0 / t + 2.0 * b / (b * t).sin().abs()).powi(2) / 16.0,
        (LeBell, 3) => {
            let q = le_bell_qfim_3(f, t).expect("closed form");
            2.0 / q.get(0, 0) + 2.0 * b * b / q.get(1, 1) + 2.0 * b * b * f.theta().sin().powi(2) / q.get(2, 2)
        }
        (Nle, 2) => 1.0 / (4.0 * t * t) + b * b / (4.0 * (1.0 + 3.0 * s2) * s2),
        (Rs, 2) => 1.0 / (4.0 * t * t) + b * b / (4.0 * s2),
        (LeOpt, 2) => 1.0 / (8.0 * t * t) + b * b / (8.0 * s2),
        (LeBell, 2) => ((b * b - c2 * bx * bx) / (t * t * bx * bx) + b * b / s2) / (8.0 * s2),
        _ => unreachable!(),
    }
}

fn strategy_table() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for comps in [2usize, 3] {
        for kind in StrategyKind::ALL {
            for _ in 0..10 {
                let (b, th, ph, t) = generic_point(&mut r);
                let th = if comps == 2 { FRAC_PI_2 } else { th };
                let f = VectorField::spherical(b, th, ph);
                let n: u32 = r.random_range(1..=8);
                let got = precision_bound(kind, comps, &f, t, n)?.total;
                let want = table_row(kind, comps, &f, t) / f64::from(n * n);
                worst = worst.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }
    let f = VectorField::spherical(1.0, FRAC_PI_2, FRAC_PI_4);
    let t = 1.5 * PI;
    let refs = [(StrategyKind::Nle, 0.073763), (StrategyKind::Rs, 0.261263), (StrategyKind::LeBell, 0.136255)];
    let mut ref_err = 0.0f64;
    for (k, v) in refs {
        ref_err = ref_err.max((precision_bound(k, 2, &f, t, 1)?.total - v).abs());
    }
    Ok((worst < 1e-12 && ref_err < 1e-5, format!("max row diff {worst:.1e}, reference points within {ref_err:.1e}")))
}

fn monte_carlo_crb() -> Outcome {
    let truth = [1.0, FRAC_PI_4, FRAC_PI_4];
    let t = 1.5 * PI;
    let rs = rs_study(&truth, t, 1, &McConfig::new(600, 600, 7))?;
    let ratio = rs.stats.variance_sum / rs.crb;

    let f = VectorField::spherical(1.0, FRAC_PI_2, FRAC_PI_4);
    let analytic = gain_db(
        precision_bound(StrategyKind::LeBell, 2, &f, t, 4)?.total,
        precision_bound(StrategyKind::Nle, 2, &f, t, 4)?.total,
    );
    let g = gradient_study(1.0, FRAC_PI_4, t, 4, &McConfig::new(600, 400, 7))?;
    let ok = (0.7..=1.3).contains(&ratio) && (analytic - 2.665).abs() < 0.01 && (g.gain_db - analytic).abs() < 1.0;
    Ok((
        ok,
        format!("RS variance/CRB = {ratio:.3}; NLE vs LE_bell gain {analytic:.4} dB analytic, {:.2} dB Monte-Carlo", g.gain_db),
    ))
}

fn heisenberg_trend() -> Outcome {
    let s = heisenberg_study(&[1.0, FRAC_PI_4, FRAC_PI_4], 1.5 * PI, &[1, 2, 4, 8], &McConfig::new(600, 300, 8))?;
    Ok(((1.8..=2.2).contains(&s.exponent), format!("fitted exponent p = {:.3}", s.exponent)))
}

fn adaptive_convergence() -> Outcome {
    let batch = adaptive_batch(&[1.0, FRAC_PI_4, FRAC_PI_4], FRAC_PI_4, 50, &AdaptiveOptions::default(), 9)?;
    let converged = batch.converged.iter().filter(|c| **c).count();
    let max_rounds = batch.rounds.iter().max().copied().unwrap_or(0);
    Ok((
        converged == 50 && max_rounds <= 40 && batch.within_3std >= 45,
        format!("{converged}/50 converged, at most {max_rounds} rounds, {}/50 within 3 std", batch.within_3std),
    ))
}

fn noise_properties() -> Outcome {
    let cfg = McConfig::new(600, 200, 10);
    let t = 1.5 * PI;
    let deph = noise_sweep(NoiseAxis::DephasingRate, &[0.0, 0.02, 0.04, 0.08], 1.0, t, 2, &cfg)?;
    let gate = noise_sweep(NoiseAxis::GateError, &[0.0, 0.005, 0.01, 0.02], 1.0, t, 2, &cfg)?;
    let min_p = |s: &qnetsense::studies::NoiseSweep| s.decrease_p_values.iter().copied().fold(1.0, f64::min);
    let f = VectorField::spherical(1.0, FRAC_PI_2, FRAC_PI_4);
    let [bx, by, _] = f.to_cartesian();
    let truth = [0.0, 0.0, 2.0 * bx, 2.0 * by];
    let control = offset_control(&truth, 2);
    let (raw, mitigated) = mitigation_study(&nle_template(t, 2)?, &truth, &control, 0.02, 600, 200, 10)?;
    Ok((
        deph.is_non_decreasing(0.05) && gate.is_non_decreasing(0.05) && mitigated < raw,
        format!(
            "min p(decrease) dephasing {:.3}, gate {:.3}; readout MSE {raw:.2e} → {mitigated:.2e} mitigated",
            min_p(&deph),
            min_p(&gate)
        ),
    ))
}

fn weak_commutativity() -> Outcome {
    let mut r = rng(11);
    let (mut rs, mut nle) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let (b, th, ph, t) = generic_point(&mut r);
        rs = rs.max(weak_commutativity_residual(&rs_template(t, 1)?, &[b, th, ph], DEFAULT_STEP)?.amax());
        let x = zero_gradient(&VectorField::spherical(b, th, ph));
        nle = nle.max(weak_commutativity_residual(&nle3(t, 1)?, &x, DEFAULT_STEP)?.amax());
    }
    Ok((rs < 1e-8 && nle < 1e-8, format!("max residual RS {rs:.1e}, NLE {nle:.1e}")))
}

fn le_singularity() -> Outcome {
    let mut r = rng(12);
    let (mut singular, mut bound_err) = (0, 0.0f64);
    for _ in 0..10 {
        let (b, th, ph, t) = generic_point(&mut r);
        let f = VectorField::spherical(b, th, ph);
        let family = FnStateFamily::new(&["B", "theta", "phi"], |y: &[f64]| {
            let u = signal_unitary(&VectorField::spherical(y[0], y[1], y[2]), t);
            bell_states()[0].apply(&u.kron(&u)?)
        });
        let numeric = qfim_overlap(&family, &[b, th, ph], DEFAULT_STEP)?;
        if invert_info(&le_bell_qfim_3(&f, t)?).is_singular() && invert_info(&numeric).is_singular() {
            singular += 1;
        }
        let w = WeightVector::cartesian(&f);
        let per_module = le_variance_bound(&w, &le_optimal_correlations(&w, &f, t)?, &f, t)?;
        let eq = (1.0 / t + 2.0 * b / (b * t).sin().abs()).powi(2) / 32.0;
        let table = precision_bound(StrategyKind::LeOpt, 3, &f, t, 1)?.total;
        bound_err = bound_err.max((per_module - eq).abs() / eq).max((table - 2.0 * eq).abs() / eq);
    }
    Ok((singular == 10 && bound_err < 1e-12, format!("{singular}/10 singular; optimal bound relative error {bound_err:.1e}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 12] = [
        ("RS closed-form probabilities", Duration::from_secs(1), rs_closed_form),
        ("max-QFIM saturation", Duration::from_secs(10), max_qfim_saturation),
        ("Heisenberg scaling of the QFIM", Duration::from_secs(10), heisenberg_qfim),
        ("NLE structure", Duration::from_secs(10), nle_structure),
        ("zero-probability CFIM limit", Duration::from_secs(30), zero_probability_limit),
        ("strategy table", Duration::from_secs(1), strategy_table),
        ("Monte-Carlo CRB attainment", Duration::from_secs(600), monte_carlo_crb),
        ("empirical Heisenberg trend", Duration::from_secs(1200), heisenberg_trend),
        ("adaptive convergence", Duration::from_secs(900), adaptive_convergence),
        ("noise properties", Duration::from_secs(1200), noise_properties),
        ("weak commutativity", Duration::from_secs(10), weak_commutativity),
        ("LE singularity and optimal bound", Duration::from_secs(5), le_singularity),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && elapsed <= *limit, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        let status = if ok { "PASS" } else { "FAIL" };
        println!("{status} {:>2} {name}: {detail} [{:.2} s, limit {} s]", i + 1, elapsed.as_secs_f64(), limit.as_secs());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
