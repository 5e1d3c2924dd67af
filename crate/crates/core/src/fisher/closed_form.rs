//! Transcribed closed-form information matrices (single cycle, no control;
//! multiply by `N²` for `N` optimally controlled cycles).

use crate::error::Result;
use crate::field::VectorField;
use crate::fisher::FisherMatrix;

pub const SPHERICAL_LABELS: [&str; 3] = ["B", "theta", "phi"];
pub const PLANAR_LABELS: [&str; 2] = ["B", "phi"];
pub const GRAD3_LABELS: [&str; 3] = ["gradBx", "gradBy", "gradBz"];
pub const SUM3_LABELS: [&str; 3] = ["sumBx", "sumBy", "sumBz"];
pub const GRAD2_LABELS: [&str; 2] = ["gradBx", "gradBy"];
pub const SUM2_LABELS: [&str; 2] = ["sumBx", "sumBy"];

/// RS maximal QFIM `4 diag(T², sin²BT, sin²BT sin²θ)`.
pub fn max_qfim(f: &VectorField, t: f64) -> FisherMatrix {
    let s2 = (f.b() * t).sin().powi(2);
    let st2 = f.theta().sin().powi(2);
    FisherMatrix::diagonal(&[4.0 * t * t, 4.0 * s2, 4.0 * s2 * st2], &SPHERICAL_LABELS)
        .expect("diagonal of squares")
}

/// NLE QFIM blocks `(F₋, F₊)` for the three-component task, at zero gradient
/// with both modules seeing the field `f`.
pub fn nle_qfim_3(f: &VectorField, t: f64) -> Result<(FisherMatrix, FisherMatrix)> {
    let b = f.b();
    let [bx, by, bz] = f.to_cartesian();
    let sq = (b * t).sin().powi(2);
    let s = (2.0 * b * t).sin();
    let b4 = b.powi(4);
    let b6 = b.powi(6);
    let (bx2, by2, bz2, b2) = (bx * bx, by * by, bz * bz, b * b);
    let rho2 = bx2 + by2;
    let k = b2 + 3.0 * bz2;

    let mxx = 4.0 / b4 * (bx2 * t * t * k + sq * (by2 + bz2 + 6.0 * bx * by * bz * t + 3.0 * by2 * sq))
        + 3.0 * bx * bz * s / b6 * (-4.0 * b * by * sq + bx * bz * (-4.0 * b * t + s));
    let myy = 4.0 / b4 * (by2 * t * t * k + sq * (bx2 + bz2 - 6.0 * bx * by * bz * t + 3.0 * bx2 * sq))
        + 3.0 * by * bz * s / b6 * (4.0 * b * bx * sq + by * bz * (-4.0 * b * t + s));
    let mzz = 4.0 / b4 * (bz2 * t * t * k + sq * rho2)
        + 3.0 * s / b6 * (4.0 * b * rho2 * bz2 * t + rho2 * rho2 * s);
    let mxy = 4.0 / b4 * (bx * by * t * t * k - sq * (4.0 * bx * by + 3.0 * bz * t * (bx2 - by2)))
        + 3.0 * s / b6
            * (2.0 * b * bz * sq * (bx2 - by2) + bx * by * (-4.0 * b * bz2 * t + (b2 + bz2) * s));
    let mxz = 4.0 * bz / b4 * (bx * t * t * k - sq * (bx - 3.0 * by * bz * t))
        + 3.0 * s / b6
            * (2.0 * b * by * sq * rho2
                + bx * bz * (2.0 * b * t * (b2 - 2.0 * bz2) - (b2 - bz2) * s));
    let myz = 4.0 * bz / b4 * (by * t * t * k - sq * (by + 3.0 * bx * bz * t))
        - 3.0 * s / b6
            * (2.0 * b * bx * sq * rho2
                - by * bz * (2.0 * b * t * (b2 - 2.0 * bz2) - (b2 - bz2) * s));
    let minus = FisherMatrix::from_rows(
        &[&[mxx, mxy, mxz], &[mxy, myy, myz], &[mxz, myz, mzz]],
        &GRAD3_LABELS,
    )?;

    let pxx = 4.0 / b4 * (bx2 * t * t * rho2 + bz * sq * (bz - 2.0 * bx * by * t))
        + s / b6
            * (4.0 * b * bx2 * bz2 * t + 4.0 * b * bx * by * bz * sq + (b2 * by2 - bx2 * bz2) * s);
    let pyy = 4.0 / b4 * (by2 * t * t * rho2 + bz * sq * (bz + 2.0 * bx * by * t))
        + s / b6
            * (4.0 * b * by2 * bz2 * t - 4.0 * b * bx * by * bz * sq + (b2 * bx2 - by2 * bz2) * s);
    // from F₊ = 4(g_x g_xᵀ + g_y g_yᵀ): the probe has Var(S_x) = Var(S_y) = 4
    // and Var(S_z) = 0 for the collective spin
    let pzz = 4.0 / b4 * rho2 * (bz2 * t * t + sq) - s / b6 * rho2 * (4.0 * b * bz2 * t + rho2 * s);
    let pxy = 4.0 * t / b4 * (bx * by * t * rho2 + bz * sq * (bx2 - by2))
        + s / b6
            * (4.0 * b * bx * by * bz2 * t
                - 2.0 * b * bz * sq * (bx2 - by2)
                - bx * by * s * (b2 + bz2));
    let pxz = 4.0 * bz / b4 * (bx * t * t * rho2 - sq * (bx + by * bz * t))
        - s / b6
            * (2.0 * b * bx * bz * t * (b2 - 2.0 * bz2)
                + rho2 * (2.0 * b * by * sq - bx * bz * s));
    let pyz = 4.0 * bz / b4 * (by * t * t * rho2 - sq * (by - bx * bz * t))
        - s / b6
            * (2.0 * b * by * bz * t * (b2 - 2.0 * bz2)
                - rho2 * (2.0 * b * bx * sq + by * bz * s));
    let plus = FisherMatrix::from_rows(
        &[&[pxx, pxy, pxz], &[pxy, pyy, pyz], &[pxz, pyz, pzz]],
        &SUM3_LABELS,
    )?;
    Ok((minus, plus))
}

/// NLE QFIM blocks `(F₋, F₊)` for the two-component task (`B_z = 0`).
pub fn nle_qfim_2(f: &VectorField, t: f64) -> Result<(FisherMatrix, FisherMatrix)> {
    let b = f.b();
    let [bx, by, _] = f.to_cartesian();
    let sq = (b * t).sin().powi(2);
    let s2 = (2.0 * b * t).sin().powi(2);
    let block = |k: f64, labels: &[&str]| {
        let b2 = b * b;
        let b4 = b2 * b2;
        let xx = 4.0 * bx * bx * t * t / b2 + by * by * k / b4;
        let yy = 4.0 * by * by * t * t / b2 + bx * bx * k / b4;
        let xy = 4.0 * bx * by * t * t / b2 - bx * by * k / b4;
        FisherMatrix::from_rows(&[&[xx, xy], &[xy, yy]], labels)
    };
    Ok((block(16.0 * sq - 3.0 * s2, &GRAD2_LABELS)?, block(s2, &SUM2_LABELS)?))
}

/// QFIM of one module's Bell probe `(|00⟩+|11⟩)/√2` with both qubits
/// sensing `f`, in `(B, θ, φ)`. This matrix is singular everywhere.
pub fn le_bell_qfim_3(f: &VectorField, t: f64) -> Result<FisherMatrix> {
    let (th, ph) = (f.theta(), f.phi());
    let bt = f.b() * t;
    let (s, c) = bt.sin_cos();
    let (s2b, c2b) = ((2.0 * bt).sin(), (2.0 * bt).cos());
    let (sth, cth) = th.sin_cos();
    let (sph, cph) = ph.sin_cos();
    let (c2th, s2th) = ((2.0 * th).cos(), (2.0 * th).sin());
    let (c2ph, s2ph) = ((2.0 * ph).cos(), (2.0 * ph).sin());
    let (sth2, sph2) = (sth * sth, sph * sph);

    let bb = 4.0 * t * t * (3.0 + c2th + 2.0 * c2ph * sth2);
    let tt = 2.0
        * s
        * s
        * (3.0 + 3.0 * c2b * c2ph + 2.0 * sph2 + c * c * (2.0 - 4.0 * c2th * sph2)
            + 4.0 * cth * s2b * s2ph);
    let pp = 2.0
        * s
        * s
        * sth2
        * (2.0 + 2.0 * s * s + 2.0 * sth2 + 2.0 * sph2 + c2b * (c2th - 3.0 * c2ph)
            + 2.0 * s * s * c2th * c2ph
            - 4.0 * s2b * cth * s2ph);
    let bt_ = 4.0 * t * (2.0 * s * s * sth * s2ph - s2b * s2th * sph2);
    let bp = -16.0 * t * s * sth2 * sph * (c * cph + s * cth * sph);
    let tp = 2.0 * s * s * (s2b * sth * ((3.0 + c2th) * c2ph + 2.0 * sth2) - 2.0 * c2b * s2th * s2ph);
    FisherMatrix::from_rows(&[&[bb, bt_, bp], &[bt_, tt, tp], &[bp, tp, pp]], &SPHERICAL_LABELS)
}

/// Same probe, two-parameter task `(B, φ)` at `θ = π/2`.
pub fn le_bell_qfim_2(f: &VectorField, t: f64) -> Result<FisherMatrix> {
    let bt = f.b() * t;
    let ph = f.phi();
    let cph2 = ph.cos().powi(2);
    let bb = 16.0 * t * t * cph2;
    let bp = -4.0 * t * (2.0 * bt).sin() * (2.0 * ph).sin();
    let pp = 7.0 - 8.0 * (2.0 * bt).cos() + 2.0 * (4.0 * bt).cos() * cph2 - (2.0 * ph).cos();
    FisherMatrix::from_rows(&[&[bb, bp], &[bp, pp]], &PLANAR_LABELS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn two_component_spot_value() {
        let f = VectorField::spherical(1.0, PI / 2.0, PI / 4.0);
        let t = 1.5 * PI;
        let (minus, _) = nle_qfim_2(&f, t).unwrap();
        assert!((minus.get(0, 0) - (2.0 * t * t + 8.0)).abs() < 1e-10);
    }

    #[test]
    fn two_component_is_restriction_of_three() {
        let f = VectorField::spherical(0.9, PI / 2.0, 0.7);
        let t = 1.3;
        let (m3, p3) = nle_qfim_3(&f, t).unwrap();
        let (m2, p2) = nle_qfim_2(&f, t).unwrap();
        assert!(m3.block(&[0, 1]).max_abs_diff(&m2) < 1e-12);
        assert!(p3.block(&[0, 1]).max_abs_diff(&p2) < 1e-12);
    }

    #[test]
    fn z_field_limit() {
        let f = VectorField::spherical(1.0, 1e-4, 0.3);
        let t = 0.8;
        let (minus, _) = nle_qfim_3(&f, t).unwrap();
        assert!((minus.get(2, 2) - 16.0 * t * t).abs() < 1e-6);
    }
}
