//! Vector-field parametrizations, signal unitaries, generators and the
//! rotation frame that diagonalizes them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{kron_all, pauli_dot, pauli_exponential, CMatrix, Unitary};

const DEGENERATE_TOL: f64 = 1e-12;

/// A static field `B⃗ = B (sinθ cosφ, sinθ sinφ, cosθ)`.
///
/// Angles are stored as given (unwrapped) so optimizers see smooth
/// coordinates; wrapping happens only when values are written out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "SphericalRepr", from = "SphericalRepr")]
pub struct VectorField {
    b: f64,
    theta: f64,
    phi: f64,
    cart: [f64; 3],
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
struct SphericalRepr {
    b: f64,
    theta: f64,
    phi: f64,
}

impl From<VectorField> for SphericalRepr {
    fn from(f: VectorField) -> Self {
        Self { b: f.b, theta: f.theta, phi: f.phi }
    }
}

impl From<SphericalRepr> for VectorField {
    fn from(r: SphericalRepr) -> Self {
        VectorField::spherical(r.b, r.theta, r.phi)
    }
}

impl VectorField {
    /// From spherical coordinates. A negative `b` is accepted and simply
    /// flips the field direction in the Cartesian view.
    pub fn spherical(b: f64, theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let cart = [b * st * cp, b * st * sp, b * ct];
        let degenerate = b.abs() < DEGENERATE_TOL || st.abs() < DEGENERATE_TOL;
        Self { b, theta, phi, cart, degenerate }
    }

    /// From Cartesian components. At `B = 0` the angles default to `(0, 0)`;
    /// on the z axis the azimuth defaults to 0. Both set the degeneracy flag.
    pub fn cartesian(v: [f64; 3]) -> Self {
        let b = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if b == 0.0 {
            return Self { b: 0.0, theta: 0.0, phi: 0.0, cart: v, degenerate: true };
        }
        let rho = v[0].hypot(v[1]);
        let theta = rho.atan2(v[2]);
        let phi = if rho == 0.0 { 0.0 } else { v[1].atan2(v[0]) };
        let degenerate = rho / b < DEGENERATE_TOL;
        Self { b, theta, phi, cart: v, degenerate }
    }

    pub fn zero() -> Self {
        Self::cartesian([0.0; 3])
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn spherical_coords(&self) -> [f64; 3] {
        [self.b, self.theta, self.phi]
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        self.cart
    }

    /// True when the azimuth (or both angles, at `B = 0`) is undefined.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Unit field direction `n`.
    pub fn direction(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// `φ` wrapped into `[-π, π)` and `θ` reflected into `[0, π]`, describing
    /// the same Cartesian vector when `B ≥ 0`.
    pub fn canonical(&self) -> Self {
        if self.b < 0.0 || self.theta < 0.0 || self.theta > std::f64::consts::PI {
            return Self::cartesian(self.cart);
        }
        Self::spherical(self.b, self.theta, wrap_angle(self.phi))
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Gradient and sum of a field pair: `∇ = B⃗₁ − B⃗₂`, `Σ = B⃗₁ + B⃗₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSumPair {
    pub grad: [f64; 3],
    pub sum: [f64; 3],
}

impl GradientSumPair {
    pub fn new(grad: [f64; 3], sum: [f64; 3]) -> Self {
        Self { grad, sum }
    }

    pub fn from_pair(f1: &VectorField, f2: &VectorField) -> Self {
        let a = f1.to_cartesian();
        let b = f2.to_cartesian();
        Self {
            grad: std::array::from_fn(|i| a[i] - b[i]),
            sum: std::array::from_fn(|i| a[i] + b[i]),
        }
    }

    /// `B⃗₁ = (Σ + ∇)/2`, `B⃗₂ = (Σ − ∇)/2`.
    pub fn to_pair(&self) -> (VectorField, VectorField) {
        let b1 = std::array::from_fn(|i| 0.5 * (self.sum[i] + self.grad[i]));
        let b2 = std::array::from_fn(|i| 0.5 * (self.sum[i] - self.grad[i]));
        (VectorField::cartesian(b1), VectorField::cartesian(b2))
    }
}

/// Encoding time per cycle and number of signal/control cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub t: f64,
    pub n: u32,
}

impl EncodingConfig {
    pub fn new(t: f64, n: u32) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("encoding time must be positive, got {t}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("cycle count N must be at least 1".into()));
        }
        Ok(Self { t, n })
    }
}

/// One generator `h = c (n·σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub coefficient: f64,
    pub axis: [f64; 3],
    pub h: CMatrix,
}

impl Generator {
    fn new(coefficient: f64, axis: [f64; 3]) -> Self {
        let h = pauli_dot(axis) * num_complex::Complex64::new(coefficient, 0.0);
        Self { coefficient, axis, h }
    }
}

/// Generators `h_x = i U_s† ∂_x U_s` for `x ∈ {B, θ, φ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    pub b: Generator,
    pub theta: Generator,
    pub phi: Generator,
    /// `∂_θ n`.
    pub n1: [f64; 3],
    /// `n × n1`.
    pub n2: [f64; 3],
    /// Set when `sin(BT) = 0` or `sin θ = 0`, where `c_θ` or `c_φ` vanish.
    pub degenerate: bool,
}

impl GeneratorSet {
    pub fn matrices(&self) -> [CMatrix; 3] {
        [self.b.h.clone(), self.theta.h.clone(), self.phi.h.clone()]
    }
}

pub fn signal_unitary(f: &VectorField, t: f64) -> Unitary {
    pauli_exponential(f.to_cartesian(), t)
}

pub fn generators(f: &VectorField, t: f64) -> GeneratorSet {
    let (st, ct) = f.theta().sin_cos();
    let (sp, cp) = f.phi().sin_cos();
    let (s, c) = (f.b() * t).sin_cos();
    let n = [st * cp, st * sp, ct];
    let n1 = [ct * cp, ct * sp, -st];
    let n2 = [-sp, cp, 0.0];
    let n_theta = std::array::from_fn(|i| c * n1[i] - s * n2[i]);
    let n_phi = std::array::from_fn(|i| s * n1[i] + c * n2[i]);
    GeneratorSet {
        b: Generator::new(t, n),
        theta: Generator::new(s, n_theta),
        phi: Generator::new(s * st, n_phi),
        n1,
        n2,
        degenerate: s.abs() < DEGENERATE_TOL || st.abs() < DEGENERATE_TOL,
    }
}

/// `U_r = e^{i(BT/2) n·σ} e^{−i(φ/2)σz} e^{−i(θ/2)σy}`, which maps
/// `σz, σx, σy` onto `n_B·σ, n_θ·σ, n_φ·σ`.
pub fn rotation_frame(f: &VectorField, t: f64) -> Unitary {
    let spin = pauli_exponential(f.direction(), -0.5 * f.b() * t);
    let rz = pauli_exponential([0.0, 0.0, 1.0], 0.5 * f.phi());
    let ry = pauli_exponential([0.0, 1.0, 0.0], 0.5 * f.theta());
    Unitary::new(spin.matrix() * rz.matrix() * ry.matrix()).expect("product of unitaries")
}

/// `U_S = U_{s1} ⊗ U_{s1} ⊗ U_{s2} ⊗ U_{s2}` on the two 2-qubit sensor modules.
pub fn nle_total_unitary(f1: &VectorField, f2: &VectorField, t: f64) -> Unitary {
    let u1 = signal_unitary(f1, t).into_matrix();
    let u2 = signal_unitary(f2, t).into_matrix();
    let m = kron_all(&[&u1, &u1, &u2, &u2]).expect("four qubits");
    Unitary::new(m).expect("product of unitaries")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{identity, pauli_x, pauli_y, pauli_z, C64};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    #[test]
    fn coordinate_examples() {
        let v = VectorField::spherical(1.0, FRAC_PI_2, 0.0).to_cartesian();
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15 && v[2].abs() < 1e-15);
        let v = VectorField::spherical(1.0, FRAC_PI_4, FRAC_PI_4).to_cartesian();
        assert!((v[0] - 0.5).abs() < 1e-12);
        assert!((v[1] - 0.5).abs() < 1e-12);
        assert!((v[2] - SQRT_2 / 2.0).abs() < 1e-12);
        let z = VectorField::cartesian([0.0; 3]);
        assert_eq!(z.b(), 0.0);
        assert!(z.is_degenerate());
        assert_eq!((z.theta(), z.phi()), (0.0, 0.0));
        let back = VectorField::cartesian([0.3, -0.4, 0.2]);
        let again = VectorField::spherical(back.b(), back.theta(), back.phi()).to_cartesian();
        for (a, b) in again.iter().zip([0.3, -0.4, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn signal_unitary_examples() {
        let u = signal_unitary(&VectorField::zero(), 1.7);
        assert!(max_diff(u.matrix(), &identity(2)) < 1e-15);
        let u = signal_unitary(&VectorField::spherical(1.0, 0.0, 0.0), PI);
        assert!(max_diff(u.matrix(), &(-identity(2))) < 1e-15);
        let f = VectorField::spherical(0.8, 1.1, -0.4);
        let u = signal_unitary(&f, 2.3);
        let h = &generators(&f, 2.3).b.h;
        let conj = u.matrix().adjoint() * h * u.matrix();
        assert!(max_diff(&conj, h) < 1e-12);
    }

    #[test]
    fn generator_coefficients() {
        let f = VectorField::spherical(1.0, FRAC_PI_2, 0.0);
        let g = generators(&f, FRAC_PI_2);
        assert!((g.theta.coefficient - 1.0).abs() < 1e-15);
        assert!((g.phi.coefficient - 1.0).abs() < 1e-15);
        let eig = g.b.h.clone().symmetric_eigen().eigenvalues;
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        assert!((e[0] + FRAC_PI_2).abs() < 1e-14 && (e[1] - FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn generators_match_finite_differences() {
        let points = [(0.7, 1.2, 0.4, 1.3), (1.6, 0.3, -2.0, 0.8), (0.2, 2.5, 3.0, 4.1)];
        let step = 1e-5;
        for (b, th, ph, t) in points {
            let g = generators(&VectorField::spherical(b, th, ph), t);
            let u = signal_unitary(&VectorField::spherical(b, th, ph), t);
            for (k, h) in g.matrices().iter().enumerate() {
                let mut plus = [b, th, ph];
                let mut minus = [b, th, ph];
                plus[k] += step;
                minus[k] -= step;
                let up = signal_unitary(&VectorField::spherical(plus[0], plus[1], plus[2]), t);
                let um = signal_unitary(&VectorField::spherical(minus[0], minus[1], minus[2]), t);
                let du = (up.matrix() - um.matrix()) / C64::new(2.0 * step, 0.0);
                let fd = u.matrix().adjoint() * du * C64::new(0.0, 1.0);
                assert!(max_diff(&fd, h) < 1e-6, "parameter {k}");
            }
        }
    }

    #[test]
    fn rotation_frame_identities() {
        let f = VectorField::spherical(1.0, FRAC_PI_2, 0.0);
        let r = rotation_frame(&f, 0.0);
        let conj = r.matrix() * pauli_z() * r.matrix().adjoint();
        assert!(max_diff(&conj, &pauli_x()) < 1e-12);

        let r = rotation_frame(&VectorField::spherical(0.9, 0.0, 0.0), 0.0);
        assert!(max_diff(&(r.matrix() * pauli_z() * r.matrix().adjoint()), &pauli_z()) < 1e-12);

        let f = VectorField::spherical(1.3, 0.7, 2.1);
        let t = 0.9;
        let g = generators(&f, t);
        let r = rotation_frame(&f, t);
        let rot = |p: CMatrix| r.matrix() * p * r.matrix().adjoint();
        assert!(max_diff(&rot(pauli_z()), &pauli_dot(g.b.axis)) < 1e-10);
        assert!(max_diff(&rot(pauli_x()), &pauli_dot(g.theta.axis)) < 1e-10);
        assert!(max_diff(&rot(pauli_y()), &pauli_dot(g.phi.axis)) < 1e-10);
    }

    #[test]
    fn gradient_sum_examples() {
        let gs = GradientSumPair::new([0.0; 3], [SQRT_2, SQRT_2, 0.0]);
        let (b1, b2) = gs.to_pair();
        for f in [b1, b2] {
            let c = f.to_cartesian();
            assert!((c[0] - SQRT_2 / 2.0).abs() < 1e-15 && (c[1] - SQRT_2 / 2.0).abs() < 1e-15);
        }
        let gs = GradientSumPair::new([0.3, 0.1, -0.2], [0.3, 0.1, -0.2]);
        assert_eq!(gs.to_pair().1.to_cartesian(), [0.0; 3]);
    }

    #[test]
    fn nle_unitary_trivial_cases() {
        let z = VectorField::zero();
        let u = nle_total_unitary(&z, &z, 3.0);
        assert!(max_diff(u.matrix(), &identity(16)) < 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-7.0, -PI, 0.0, PI, 3.5, 100.0] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w));
            assert!(((a - w) / (2.0 * PI)).round() * 2.0 * PI - (a - w) < 1e-12);
        }
    }
}
