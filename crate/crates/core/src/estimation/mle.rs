//! Multi-start bounded maximization of likelihoods.

use serde::{Deserialize, Serialize};

use super::{log_likelihood_of, Bounds, Model, ShotRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub starts: usize,
    pub max_iter: usize,
    /// Projected-gradient norm that counts as converged.
    pub grad_tol: f64,
    /// Central-difference step for gradients.
    pub fd_step: f64,
    /// Longest step per iteration as a fraction of the box diagonal, so a
    /// local run cannot leap across a valley into a neighbouring mode.
    pub max_step: f64,
    /// Point that wins likelihood ties and seeds the first start. Defaults
    /// to the control setting.
    pub anchor: Option<Vec<f64>>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { starts: 10, max_iter: 500, grad_tol: 1e-7, fd_step: 1e-6, max_step: 0.05, anchor: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub x_est: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub starts_used: usize,
    pub starts_converged: usize,
}

/// Result of one local run.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOptimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `i`-th Halton point scaled into `bounds` (index 0 is skipped).
pub fn halton_point(i: usize, bounds: &Bounds) -> Vec<f64> {
    (0..bounds.dim())
        .map(|k| {
            let u = radical_inverse(i as u64 + 1, PRIMES[k % PRIMES.len()]);
            bounds.lo[k] + u * (bounds.hi[k] - bounds.lo[k])
        })
        .collect()
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], bounds: &Bounds, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for k in 0..x.len() {
        let hi = (x[k] + h).min(bounds.hi[k]);
        let lo = (x[k] - h).max(bounds.lo[k]);
        p[k] = hi;
        let fp = f(&p);
        p[k] = lo;
        let fm = f(&p);
        p[k] = x[k];
        g[k] = (fp - fm) / (hi - lo);
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Local maximization of `f` from `x0` inside `bounds`: projected BFGS on
/// `−f` with Armijo backtracking. Converged when the projected gradient
/// norm drops below `grad_tol`; a stalled line search still counts when
/// it is below `1e-4`.
pub fn maximize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], bounds: &Bounds, opts: &MleOptions) -> LocalOptimum {
    let n = x0.len();
    let phi = |x: &[f64]| {
        let v = -f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut fx = phi(&x);
    let mut g = gradient(&phi, &x, bounds, opts.fd_step);
    let mut h = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let edge = |k: usize, x: &[f64], g: &[f64]| {
        (x[k] <= bounds.lo[k] + 1e-12 && g[k] > 0.0) || (x[k] >= bounds.hi[k] - 1e-12 && g[k] < 0.0)
    };
    for it in 0..opts.max_iter {
        let active: Vec<bool> = (0..n).map(|k| edge(k, &x, &g)).collect();
        let pg: Vec<f64> = g.iter().zip(&active).map(|(v, a)| if *a { 0.0 } else { *v }).collect();
        let pgn = norm(&pg);
        if pgn < opts.grad_tol {
            return LocalOptimum { x, value: -fx, converged: true, iterations: it };
        }
        let mut d: Vec<f64> = (0..n)
            .map(|i| if active[i] { 0.0 } else { -(0..n).filter(|j| !active[*j]).map(|j| h[(i, j)] * pg[j]).sum::<f64>() })
            .collect();
        if dot(&d, &pg) >= 0.0 {
            h.fill_with_identity();
            d = pg.iter().map(|v| -v).collect();
        }
        let cap = opts.max_step * norm(&bounds.hi.iter().zip(&bounds.lo).map(|(h, l)| h - l).collect::<Vec<_>>());
        let dn = norm(&d);
        let mut alpha = if dn > cap { cap / dn } else { 1.0 };
        let accepted = loop {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            bounds.clamp(&mut xn);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let fn_ = phi(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * dot(&g, &step) && norm(&step) > 0.0 {
                break Some((xn, fn_, step));
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                break None;
            }
        };
        let Some((xn, fnew, s)) = accepted else {
            if !fresh {
                h.fill_with_identity();
                fresh = true;
                continue;
            }
            return LocalOptimum { x, value: -fx, converged: pgn < 1e-4, iterations: it };
        };
        let gn = gradient(&phi, &xn, bounds, opts.fd_step);
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            let sv = nalgebra::DVector::from_vec(s.clone());
            let yv = nalgebra::DVector::from_vec(y);
            if fresh {
                h *= sy / yv.dot(&yv);
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho) - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
            fresh = false;
        }
        let small = norm(&s) < 1e-15 * (1.0 + norm(&x));
        x = xn;
        fx = fnew;
        g = gn;
        if small {
            let pg: Vec<f64> = (0..n).map(|k| if edge(k, &x, &g) { 0.0 } else { g[k] }).collect();
            let pgn = norm(&pg);
            return LocalOptimum { x, value: -fx, converged: pgn < 1e-4, iterations: it + 1 };
        }
    }
    let pg: Vec<f64> = (0..n).map(|k| if edge(k, &x, &g) { 0.0 } else { g[k] }).collect();
    let converged = norm(&pg) < opts.grad_tol;
    LocalOptimum { x, value: -fx, converged, iterations: opts.max_iter }
}

/// Runs `opts.starts` local maximizations (anchor first, then Halton
/// points) and keeps the best. Values within `1e-9·max(1, |L|)` of the best
/// are ties and go to the optimum nearest the anchor.
pub fn multi_start<F: Fn(&[f64]) -> f64>(f: &F, anchor: &[f64], bounds: &Bounds, opts: &MleOptions) -> Result<Estimate> {
    if opts.starts == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    if anchor.len() != bounds.dim() {
        return Err(Error::DimensionMismatch { expected: bounds.dim(), got: anchor.len() });
    }
    let runs: Vec<LocalOptimum> = (0..opts.starts)
        .map(|i| {
            let x0 = if i == 0 { anchor.to_vec() } else { halton_point(i - 1, bounds) };
            maximize(f, &x0, bounds, opts)
        })
        .collect();
    let best = runs.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Ok(Estimate {
            x_est: anchor.to_vec(),
            log_likelihood: best,
            converged: false,
            starts_used: opts.starts,
            starts_converged: 0,
        });
    }
    let tol = 1e-9 * best.abs().max(1.0);
    let dist = |x: &[f64]| x.iter().zip(anchor).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let pick = runs
        .iter()
        .filter(|r| r.value >= best - tol)
        .min_by(|a, b| dist(&a.x).total_cmp(&dist(&b.x)))
        .expect("at least one run attains the best value");
    Ok(Estimate {
        x_est: pick.x.clone(),
        log_likelihood: pick.value,
        converged: pick.converged,
        starts_used: opts.starts,
        starts_converged: runs.iter().filter(|r| r.converged).count(),
    })
}

/// Maximum-likelihood estimate from one record taken at control `x_c`.
pub fn mle<M: Model + ?Sized>(
    record: &ShotRecord,
    model: &M,
    control: &[f64],
    bounds: &Bounds,
    opts: &MleOptions,
) -> Result<Estimate> {
    let freqs = record.frequencies();
    let f = |x: &[f64]| match model.distribution(x, control) {
        Ok(d) => log_likelihood_of(&freqs, d.probs()),
        Err(_) => f64::NEG_INFINITY,
    };
    let anchor = opts.anchor.clone().unwrap_or_else(|| control.to_vec());
    let mut anchor_in = anchor;
    bounds.clamp(&mut anchor_in);
    multi_start(&f, &anchor_in, bounds, opts)
}
