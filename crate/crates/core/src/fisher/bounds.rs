//! Precision bounds for gradient estimation and the local-entanglement
//! variance bound in terms of probe correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::fisher::closed_form::le_bell_qfim_3;
use crate::protocols::StrategyKind;

/// Below this `|sin(BT)|` the bounds are reported as divergent.
pub const DIVERGENCE_TOL: f64 = 1e-12;

/// Variance-sum lower bound for one strategy, split into labelled terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionBound {
    pub strategy: StrategyKind,
    pub components: usize,
    pub terms: Vec<(String, f64)>,
    pub total: f64,
    pub achievable: bool,
}

impl PrecisionBound {
    fn new(strategy: StrategyKind, components: usize, terms: Vec<(&str, f64)>, achievable: bool) -> Self {
        let total = terms.iter().map(|(_, v)| v).sum();
        Self {
            strategy,
            components,
            terms: terms.into_iter().map(|(l, v)| (l.to_string(), v)).collect(),
            total,
            achievable,
        }
    }

    pub fn is_divergent(&self) -> bool {
        !self.total.is_finite()
    }
}

fn inv_or_inf(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den.abs() < DIVERGENCE_TOL {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Gradient-estimation bound of a strategy for `components ∈ {2, 3}`, with
/// `N` optimally controlled cycles. `f` is the field seen by each module at
/// the zero-gradient benchmark; two-component bounds assume `B_z = 0`.
pub fn precision_bound(
    strategy: StrategyKind,
    components: usize,
    f: &VectorField,
    t: f64,
    n: u32,
) -> Result<PrecisionBound> {
    if !(t > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("need T > 0 and N ≥ 1, got T={t}, N={n}")));
    }
    let b = f.b();
    let [bx, _, bz] = f.to_cartesian();
    let s = (b * t).sin();
    let c = (b * t).cos();
    let sq = if s.abs() < DIVERGENCE_TOL { 0.0 } else { s * s };
    let n2 = f64::from(n).powi(2);
    use StrategyKind::*;
    let bound = match (strategy, components) {
        (Nle, 3) => PrecisionBound::new(
            Nle,
            3,
            vec![
                ("time", (4.0 * b * b - 3.0 * bz * bz) / (16.0 * b * b * t * t)),
                ("angular", inv_or_inf(5.0 * b * b + 3.0 * bz * bz, 16.0 * sq)),
            ],
            true,
        ),
        (Rs, 3) => PrecisionBound::new(
            Rs,
            3,
            vec![("time", 1.0 / (4.0 * t * t)), ("angular", inv_or_inf(b * b, 2.0 * sq))],
            true,
        ),
        (LeOpt, 3) => {
            let v = if sq == 0.0 {
                f64::INFINITY
            } else {
                (1.0 / t + 2.0 * b / s.abs()).powi(2) / 16.0
            };
            PrecisionBound::new(LeOpt, 3, vec![("total", v)], false)
        }
        (LeBell, 3) => {
            let q = le_bell_qfim_3(f, t)?;
            let st2 = f.theta().sin().powi(2);
            PrecisionBound::new(
                LeBell,
                3,
                vec![
                    ("B", inv_or_inf(2.0, q.get(0, 0))),
                    ("theta", inv_or_inf(2.0 * b * b, q.get(1, 1))),
                    ("phi", inv_or_inf(2.0 * b * b * st2, q.get(2, 2))),
                ],
                false,
            )
        }
        (Nle, 2) => PrecisionBound::new(
            Nle,
            2,
            vec![
                ("time", 1.0 / (4.0 * t * t)),
                ("angular", inv_or_inf(b * b, 4.0 * (1.0 + 3.0 * sq) * sq)),
            ],
            true,
        ),
        (Rs, 2) => PrecisionBound::new(
            Rs,
            2,
            vec![("time", 1.0 / (4.0 * t * t)), ("angular", inv_or_inf(b * b, 4.0 * sq))],
            true,
        ),
        (LeOpt, 2) => PrecisionBound::new(
            LeOpt,
            2,
            vec![("time", 1.0 / (8.0 * t * t)), ("angular", inv_or_inf(b * b, 8.0 * sq))],
            true,
        ),
        (LeBell, 2) => PrecisionBound::new(
            LeBell,
            2,
            vec![
                ("time", inv_or_inf(b * b - c * c * bx * bx, 8.0 * sq * t * t * bx * bx)),
                ("angular", inv_or_inf(b * b, 8.0 * sq * sq)),
            ],
            true,
        ),
        (k, m) => {
            return Err(Error::UnsupportedStrategy { strategy: k.to_string(), components: m });
        }
    };
    Ok(PrecisionBound {
        terms: bound.terms.into_iter().map(|(l, v)| (l, v / n2)).collect(),
        total: bound.total / n2,
        ..bound
    })
}

/// `δBx² + δBy² + δBz² = δB² + B²δθ² + B² sin²θ δφ²`.
pub fn propagate_spherical_to_cartesian(variances: [f64; 3], f: &VectorField) -> f64 {
    let b2 = f.b() * f.b();
    variances[0] + b2 * variances[1] + b2 * f.theta().sin().powi(2) * variances[2]
}

/// Non-negative weights `(w_B, w_θ, w_φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w_b: f64,
    pub w_theta: f64,
    pub w_phi: f64,
}

impl WeightVector {
    pub fn new(w_b: f64, w_theta: f64, w_phi: f64) -> Result<Self> {
        if [w_b, w_theta, w_phi].iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be non-negative".into()));
        }
        Ok(Self { w_b, w_theta, w_phi })
    }

    /// Weights turning spherical variances into the Cartesian variance sum:
    /// `(1, B², B² sin²θ)`.
    pub fn cartesian(f: &VectorField) -> Self {
        let b2 = f.b() * f.b();
        Self { w_b: 1.0, w_theta: b2, w_phi: b2 * f.theta().sin().powi(2) }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.w_b, self.w_theta, self.w_phi]
    }
}

/// Probe correlations of a two-qubit module state in the rotation frame:
/// `r_xx = ⟨σ_x⊗σ_x⟩` with `(B, θ, φ) ↔ (z, x, y)`, and the summed local
/// expectations `s_x = ⟨σ_x⊗I⟩ + ⟨I⊗σ_x⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub r_bb: f64,
    pub r_theta: f64,
    pub r_phi: f64,
    pub s_b: f64,
    pub s_theta: f64,
    pub s_phi: f64,
}

impl Correlations {
    pub fn new(r_bb: f64, r_theta: f64, r_phi: f64) -> Self {
        Self { r_bb, r_theta, r_phi, s_b: 0.0, s_theta: 0.0, s_phi: 0.0 }
    }

    /// The four positivity constraints on `(r_xx, r_yy, r_zz)`.
    pub fn check(&self) -> Result<()> {
        let (rx, ry, rz) = (self.r_theta, self.r_phi, self.r_bb);
        let checks = [
            ("r_xx + r_yy + r_zz <= 1", rx + ry + rz),
            ("r_zz - r_xx - r_yy <= 1", rz - rx - ry),
            ("r_yy - r_xx - r_zz <= 1", ry - rx - rz),
            ("r_xx - r_yy - r_zz <= 1", rx - ry - rz),
        ];
        for (constraint, v) in checks {
            if v > 1.0 + 1e-12 {
                return Err(Error::InfeasibleCorrelations { constraint, excess: v - 1.0 });
            }
        }
        Ok(())
    }
}

/// `¼ Σ_x w_x / (c_x² (2 + 2 r_xx − s_x²))` for one module, with
/// `c_B = T`, `c_θ = sin BT`, `c_φ = sin BT sin θ`. Zero-weight terms vanish.
pub fn le_variance_bound(w: &WeightVector, r: &Correlations, f: &VectorField, t: f64) -> Result<f64> {
    r.check()?;
    let s = (f.b() * t).sin();
    let coeff = [t, s, s * f.theta().sin()];
    let rr = [r.r_bb, r.r_theta, r.r_phi];
    let ss = [r.s_b, r.s_theta, r.s_phi];
    let mut total = 0.0;
    for (i, wi) in w.as_array().into_iter().enumerate() {
        let den = coeff[i] * coeff[i] * (2.0 + 2.0 * rr[i] - ss[i] * ss[i]);
        total += 0.25 * inv_or_inf(wi, den.max(0.0));
    }
    Ok(total)
}

/// Correlations minimizing [`le_variance_bound`] with `s = 0`:
/// `r_xx = (4a_x − Σa) / Σa` with `a = (√w_B/T, √w_θ/|s|, √w_φ/|s sinθ|)`.
/// At this point the bound equals `(Σa)²/32`. Rejected when the stationary
/// point violates the positivity constraints (one weight dominating the
/// other two).
pub fn le_optimal_correlations(w: &WeightVector, f: &VectorField, t: f64) -> Result<Correlations> {
    let s = (f.b() * t).sin().abs();
    let st = f.theta().sin().abs();
    let a = [w.w_b.sqrt() / t, w.w_theta.sqrt() / s, w.w_phi.sqrt() / (s * st)];
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("optimal correlations diverge at sin(BT) sinθ = 0".into()));
    }
    let sum: f64 = a.iter().sum();
    let r = a.map(|ai| (4.0 * ai - sum) / sum);
    let c = Correlations::new(r[0], r[1], r[2]);
    c.check()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn two_component_reference_values() {
        let f = VectorField::spherical(1.0, FRAC_PI_2, FRAC_PI_4);
        let t = 1.5 * PI;
        let nle = precision_bound(StrategyKind::Nle, 2, &f, t, 1).unwrap();
        assert!((nle.total - (1.0 / (4.0 * t * t) + 1.0 / 16.0)).abs() < 1e-14);
        assert!((nle.total - 0.073763).abs() < 1e-5);
        let rs = precision_bound(StrategyKind::Rs, 2, &f, t, 1).unwrap();
        assert!((rs.total - 0.261263).abs() < 1e-5);
        let le = precision_bound(StrategyKind::LeBell, 2, &f, t, 1).unwrap();
        assert!((le.total - (2.0 / (t * t) + 1.0) / 8.0).abs() < 1e-14);
        assert!((le.total - 0.136255).abs() < 1e-5);
    }

    #[test]
    fn divergence_and_unsupported() {
        let f = VectorField::spherical(1.0, FRAC_PI_2, 0.3);
        let b = precision_bound(StrategyKind::Rs, 3, &f, PI, 1).unwrap();
        assert!(b.is_divergent());
        assert!(matches!(
            precision_bound(StrategyKind::Rs, 4, &f, 1.0, 1),
            Err(Error::UnsupportedStrategy { .. })
        ));
    }

    #[test]
    fn le_bound_examples() {
        let f = VectorField::spherical(1.0, 1.0, 0.4);
        let t = 0.7;
        let w = WeightVector::new(1.0, 0.0, 0.0).unwrap();
        let v = le_variance_bound(&w, &Correlations::new(0.0, 0.0, 0.0), &f, t).unwrap();
        assert!((v - 1.0 / (8.0 * t * t)).abs() < 1e-15);

        let w = WeightVector::cartesian(&f);
        let r = le_optimal_correlations(&w, &f, t).unwrap();
        let v = le_variance_bound(&w, &r, &f, t).unwrap();
        let s = (f.b() * t).sin().abs();
        assert!((v - (1.0 / t + 2.0 * f.b() / s).powi(2) / 32.0).abs() < 1e-12);

        let w = WeightVector::new(0.6, 0.0, 1.7).unwrap();
        let v = le_variance_bound(&w, &Correlations::new(1.0, -1.0, 1.0), &f, t).unwrap();
        let sp = s * f.theta().sin();
        let expected = 0.25 * (0.6 / (4.0 * t * t) + 1.7 / (4.0 * sp * sp));
        assert!((v - expected).abs() < 1e-12);

        let err = le_variance_bound(&w, &Correlations::new(1.0, 1.0, 1.0), &f, t).unwrap_err();
        assert!(matches!(err, Error::InfeasibleCorrelations { constraint: "r_xx + r_yy + r_zz <= 1", .. }));
    }

    #[test]
    fn propagation() {
        let f = VectorField::spherical(1.3, 0.9, 0.2);
        let t = 0.8;
        let s2 = (1.3f64 * t).sin().powi(2);
        let v = [1.0 / (4.0 * t * t), 1.0 / (4.0 * s2), 1.0 / (4.0 * s2 * 0.9f64.sin().powi(2))];
        let total = propagate_spherical_to_cartesian(v, &f);
        assert!((total - (1.0 / (4.0 * t * t) + 1.69 / (2.0 * s2))).abs() < 1e-12);
        assert_eq!(propagate_spherical_to_cartesian([0.0; 3], &f), 0.0);
    }
}
