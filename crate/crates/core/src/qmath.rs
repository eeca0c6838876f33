//! Single-qubit state and gate algebra.
//!
//! Bloch convention: `|0>` sits at `+z`, so the bright (fluorescing)
//! population is `P(|1>) = (1 - r_z) / 2`. Global phase is never tracked;
//! observable statements are made on density matrices.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

type Mat2<T> = [[Complex<T>; 2]; 2];

#[inline]
fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
fn mat_mul<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[inline]
fn dagger<T: Real>(a: &Mat2<T>) -> Mat2<T> {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

/// A normalized pure qubit state `amp0 |0> + amp1 |1>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState<T> {
    pub amp0: Complex<T>,
    pub amp1: Complex<T>,
}

impl<T: Real> PureState<T> {
    /// Builds a state, rejecting amplitudes whose squared norm is not 1.
    pub fn new(amp0: Complex<T>, amp1: Complex<T>) -> Result<Self> {
        let s = Self { amp0, amp1 };
        let n = s.norm_sqr();
        if (n - T::one()).abs() > T::EXACT_TOL {
            return Err(Error::param(
                "amplitudes",
                format!("|amp0|^2 + |amp1|^2 = {n}, expected 1"),
            ));
        }
        Ok(s)
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(amp0: Complex<T>, amp1: Complex<T>) -> Result<Self> {
        let n = (amp0.norm_sqr() + amp1.norm_sqr()).sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::param("amplitudes", "cannot normalize a zero vector"));
        }
        Ok(Self {
            amp0: amp0 / n,
            amp1: amp1 / n,
        })
    }

    pub fn zero() -> Self {
        Self {
            amp0: c(T::one(), T::zero()),
            amp1: c(T::zero(), T::zero()),
        }
    }

    pub fn one() -> Self {
        Self {
            amp0: c(T::zero(), T::zero()),
            amp1: c(T::one(), T::zero()),
        }
    }

    /// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    pub fn from_angles(theta: T, phi: T) -> Self {
        let half = theta / T::lit(2.0);
        Self {
            amp0: c(half.cos(), T::zero()),
            amp1: Complex::from_polar(half.sin(), phi),
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// Population of `|1>`, the bright state.
    pub fn prob_one(&self) -> T {
        self.amp1.norm_sqr()
    }

    pub fn bloch(&self) -> BlochVector<T> {
        let cross = self.amp0.conj() * self.amp1;
        BlochVector {
            x: T::lit(2.0) * cross.re,
            y: T::lit(2.0) * cross.im,
            z: self.amp0.norm_sqr() - self.amp1.norm_sqr(),
        }
    }

    pub fn density(&self) -> DensityMatrix<T> {
        let a = [self.amp0, self.amp1];
        let mut m = [[c(T::zero(), T::zero()); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * a[j].conj();
            }
        }
        DensityMatrix { m }
    }

    pub fn evolve(&self, u: &Unitary2<T>) -> Self {
        let m = &u.m;
        Self {
            amp0: m[0][0] * self.amp0 + m[0][1] * self.amp1,
            amp1: m[1][0] * self.amp0 + m[1][1] * self.amp1,
        }
    }
}

/// Real Bloch vector. May be unphysical (`|r| > 1`) when it comes straight
/// out of linear inversion; see [`BlochVector::is_physical`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochVector<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> BlochVector<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(&self, k: T) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn is_physical(&self) -> bool {
        self.dot(self) <= T::one() + T::PSD_TOL
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        density_from_bloch(self)
    }
}

/// A 2x2 Hermitian, unit-trace matrix. Positivity is checked separately
/// with [`DensityMatrix::is_physical`] because raw reconstructions may
/// violate it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix<T> {
    m: Mat2<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn from_entries(m: Mat2<T>) -> Result<Self> {
        let rho = Self { m };
        if !rho.is_hermitian() {
            return Err(Error::NotPhysical("matrix is not Hermitian".into()));
        }
        let tr = rho.trace();
        if (tr - T::one()).abs() > T::EXACT_TOL {
            return Err(Error::NotPhysical(format!("trace is {tr}, expected 1")));
        }
        Ok(rho)
    }

    pub fn maximally_mixed() -> Self {
        let h = T::lit(0.5);
        Self {
            m: [
                [c(h, T::zero()), c(T::zero(), T::zero())],
                [c(T::zero(), T::zero()), c(h, T::zero())],
            ],
        }
    }

    pub fn entries(&self) -> &Mat2<T> {
        &self.m
    }

    pub fn trace(&self) -> T {
        (self.m[0][0] + self.m[1][1]).re
    }

    pub fn is_hermitian(&self) -> bool {
        let tol = T::EXACT_TOL;
        self.m[0][0].im.abs() <= tol
            && self.m[1][1].im.abs() <= tol
            && (self.m[0][1] - self.m[1][0].conj()).norm() <= tol
    }

    /// Eigenvalues in ascending order, from the closed form for a 2x2
    /// Hermitian matrix.
    pub fn eigenvalues(&self) -> [T; 2] {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let half = T::lit(0.5);
        let mean = (a + d) * half;
        let diff = (a - d) * half;
        let r = (diff * diff + self.m[0][1].norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    pub fn is_physical(&self) -> bool {
        self.is_hermitian()
            && (self.trace() - T::one()).abs() <= T::PSD_TOL
            && self.eigenvalues()[0] >= -T::PSD_TOL
    }

    pub fn bloch(&self) -> BlochVector<T> {
        bloch_from_density(self)
    }

    /// Population of `|1>`.
    pub fn prob_one(&self) -> T {
        self.m[1][1].re
    }

    pub fn frobenius_distance(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                acc = acc + (self.m[i][j] - other.m[i][j]).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

/// A 2x2 unitary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unitary2<T> {
    m: Mat2<T>,
}

impl<T: Real> Unitary2<T> {
    pub fn from_entries(m: Mat2<T>) -> Result<Self> {
        let u = Self { m };
        if !u.is_unitary() {
            return Err(Error::param("unitary", "U^dagger U differs from identity"));
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        Self {
            m: [
                [c(T::one(), T::zero()), c(T::zero(), T::zero())],
                [c(T::zero(), T::zero()), c(T::one(), T::zero())],
            ],
        }
    }

    pub fn entries(&self) -> &Mat2<T> {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: dagger(&self.m) }
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn then_after(&self, rhs: &Self) -> Self {
        Self {
            m: mat_mul(&self.m, &rhs.m),
        }
    }

    pub fn is_unitary(&self) -> bool {
        let p = mat_mul(&dagger(&self.m), &self.m);
        let id = Self::identity().m;
        (0..2).all(|i| (0..2).all(|j| (p[i][j] - id[i][j]).norm() <= T::EXACT_TOL))
    }

    /// Largest entrywise distance to another unitary (phase-sensitive).
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }
}

/// `exp(-i (theta/2) (cos(phi) X + sin(phi) Y))`.
///
/// `phi = 0` is `R_x(theta)`, `phi = pi/2` is `R_y(theta)`.
pub fn rotation_gate<T: Real>(phi: T, theta: T) -> Unitary2<T> {
    let half = theta / T::lit(2.0);
    let (s, co) = half.sin_cos();
    let diag = c(co, T::zero());
    // -i s e^{-i phi} and -i s e^{i phi}
    let minus_i = c(T::zero(), -T::one());
    let upper = minus_i * Complex::from_polar(s, -phi);
    let lower = minus_i * Complex::from_polar(s, phi);
    Unitary2 {
        m: [[diag, upper], [lower, diag]],
    }
}

pub fn rx<T: Real>(theta: T) -> Unitary2<T> {
    rotation_gate(T::zero(), theta)
}

pub fn ry<T: Real>(theta: T) -> Unitary2<T> {
    rotation_gate(T::FRAC_PI_2(), theta)
}

/// `U rho U^dagger`.
pub fn apply<T: Real>(u: &Unitary2<T>, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    DensityMatrix {
        m: mat_mul(&mat_mul(&u.m, &rho.m), &dagger(&u.m)),
    }
}

pub fn bloch_from_density<T: Real>(rho: &DensityMatrix<T>) -> BlochVector<T> {
    let two = T::lit(2.0);
    let off = rho.m[0][1];
    BlochVector {
        x: two * off.re,
        y: -two * off.im,
        z: rho.m[0][0].re - rho.m[1][1].re,
    }
}

/// `(I + r . sigma) / 2`. Accepts unphysical `r`; the result is Hermitian
/// and unit-trace but may have a negative eigenvalue.
pub fn density_from_bloch<T: Real>(r: &BlochVector<T>) -> DensityMatrix<T> {
    let h = T::lit(0.5);
    DensityMatrix {
        m: [
            [c(h * (T::one() + r.z), T::zero()), c(h * r.x, -h * r.y)],
            [c(h * r.x, h * r.y), c(h * (T::one() - r.z), T::zero())],
        ],
    }
}

/// `<psi| rho |psi>` for a physical `rho`.
pub fn fidelity_pure<T: Real>(rho: &DensityMatrix<T>, psi: &PureState<T>) -> Result<T> {
    if !rho.is_physical() {
        return Err(Error::NotPhysical(format!(
            "eigenvalues {:?}",
            rho.eigenvalues()
        )));
    }
    let a = [psi.amp0, psi.amp1];
    let mut acc = c(T::zero(), T::zero());
    for i in 0..2 {
        for j in 0..2 {
            acc = acc + a[i].conj() * rho.m[i][j] * a[j];
        }
    }
    Ok(acc.re.max(T::zero()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_rotation_is_identity() {
        let u = rotation_gate(0.0_f64, 0.0);
        assert!(u.max_abs_diff(&Unitary2::identity()) < 1e-15);
    }

    #[test]
    fn pi_pulse_inverts_population() {
        let psi = PureState::<f64>::zero().evolve(&rx(PI));
        assert_abs_diff_eq!(psi.prob_one(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn half_pi_x_rotation_points_to_minus_y() {
        // R_x(pi/2)|0> = (|0> - i|1>)/sqrt(2)
        let psi = PureState::<f64>::zero().evolve(&rx(FRAC_PI_2));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(psi.amp0.re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.amp1.im, -s, epsilon = 1e-15);
        let r = psi.bloch();
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn apply_examples() {
        let rho = PureState::<f64>::zero().density();
        let id = apply(&Unitary2::identity(), &rho);
        assert!(id.frobenius_distance(&rho) < 1e-15);

        let flipped = apply(&rx(PI), &rho);
        assert!(flipped.frobenius_distance(&PureState::one().density()) < 1e-12);

        let mixed = DensityMatrix::<f64>::maximally_mixed();
        let out = apply(&ry(FRAC_PI_2), &mixed);
        assert!(out.frobenius_distance(&mixed) < 1e-15);
    }

    #[test]
    fn bloch_conversion_examples() {
        let r0 = PureState::<f64>::zero().density().bloch();
        assert_eq!(r0, BlochVector::new(0.0, 0.0, 1.0));
        let rm = DensityMatrix::<f64>::maximally_mixed().bloch();
        assert_eq!(rm, BlochVector::new(0.0, 0.0, 0.0));
        let plus = density_from_bloch(&BlochVector::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(plus.entries()[0][1].re, 0.5);
        assert_abs_diff_eq!(plus.entries()[1][0].re, 0.5);
        assert_abs_diff_eq!(plus.entries()[0][1].im, 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let psi = PureState::<f64>::from_angles(1.1, 0.4);
        assert_abs_diff_eq!(fidelity_pure(&psi.density(), &psi).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = DensityMatrix::maximally_mixed();
        assert_abs_diff_eq!(fidelity_pure(&mixed, &psi).unwrap(), 0.5, epsilon = 1e-12);
        let zero = PureState::<f64>::zero().density();
        assert_abs_diff_eq!(fidelity_pure(&zero, &PureState::one()).unwrap(), 0.0);
    }

    #[test]
    fn fidelity_rejects_unphysical() {
        let raw = density_from_bloch(&BlochVector::new(1.0, -1.0, -1.0));
        assert!(matches!(
            fidelity_pure(&raw, &PureState::<f64>::zero()),
            Err(Error::NotPhysical(_))
        ));
    }

    #[test]
    fn constructors_validate() {
        assert!(PureState::new(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)).is_err());
        assert!(PureState::<f64>::normalized(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)).is_err());
        let bad = [
            [Complex::new(0.5, 0.0), Complex::new(0.1, 0.2)],
            [Complex::new(0.1, 0.2), Complex::new(0.5, 0.0)],
        ];
        assert!(DensityMatrix::from_entries(bad).is_err());
        let not_unitary = [
            [Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)],
            [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)],
        ];
        assert!(Unitary2::from_entries(not_unitary).is_err());
        assert!(Unitary2::from_entries(*rx(0.3_f64).entries()).is_ok());
    }

    #[test]
    fn single_precision_instantiation() {
        let psi = PureState::<f32>::zero().evolve(&ry(std::f32::consts::FRAC_PI_2));
        let r = psi.bloch();
        assert!((r.x - 1.0).abs() < 1e-6);
        assert!(rx(0.7_f32).is_unitary());
        assert!(psi.density().is_physical());
    }

    fn angle() -> impl Strategy<Value = f64> {
        -10.0..10.0_f64
    }

    proptest! {
        #[test]
        fn rotation_inverse(phi in angle(), theta in angle()) {
            let prod = rotation_gate(phi, theta).then_after(&rotation_gate(phi, -theta));
            prop_assert!(prod.max_abs_diff(&Unitary2::identity()) < 1e-12);
            prop_assert!(rotation_gate(phi, theta).is_unitary());
        }

        #[test]
        fn rotation_composes_on_densities(phi in angle(), t1 in angle(), t2 in angle(),
                                          th in 0.0..PI, ph in 0.0..6.3_f64) {
            let rho = PureState::from_angles(th, ph).density();
            let a = apply(&rotation_gate(phi, t1).then_after(&rotation_gate(phi, t2)), &rho);
            let b = apply(&rotation_gate(phi, t1 + t2), &rho);
            prop_assert!(a.frobenius_distance(&b) < 1e-12);
        }

        #[test]
        fn apply_preserves_trace_and_spectrum(phi in angle(), theta in angle(),
                                              x in -0.57..0.57_f64, y in -0.57..0.57_f64, z in -0.57..0.57_f64) {
            let rho = density_from_bloch(&BlochVector::new(x, y, z));
            let out = apply(&rotation_gate(phi, theta), &rho);
            prop_assert!((out.trace() - 1.0).abs() < 1e-12);
            let (e0, e1) = (rho.eigenvalues(), out.eigenvalues());
            prop_assert!((e0[0] - e1[0]).abs() < 1e-12 && (e0[1] - e1[1]).abs() < 1e-12);
            prop_assert!(out.is_hermitian());
        }

        #[test]
        fn fidelity_is_rotation_invariant(phi in angle(), theta in angle(),
                                          th in 0.0..PI, ph in 0.0..6.3_f64,
                                          x in -0.57..0.57_f64, y in -0.57..0.57_f64, z in -0.57..0.57_f64) {
            let u = rotation_gate(phi, theta);
            let psi = PureState::from_angles(th, ph);
            let rho = density_from_bloch(&BlochVector::new(x, y, z));
            let before = fidelity_pure(&rho, &psi).unwrap();
            let after = fidelity_pure(&apply(&u, &rho), &psi.evolve(&u)).unwrap();
            prop_assert!((before - after).abs() < 1e-12);
            // closed form in Bloch coordinates
            let closed = 0.5 * (1.0 + rho.bloch().dot(&psi.bloch()));
            prop_assert!((before - closed).abs() < 1e-12);
        }

        #[test]
        fn bloch_round_trip(x in -1.0..1.0_f64, y in -1.0..1.0_f64, z in -1.0..1.0_f64) {
            let r = BlochVector::new(x, y, z);
            let back = bloch_from_density(&density_from_bloch(&r));
            prop_assert!((back.x - x).abs() < 1e-12 && (back.y - y).abs() < 1e-12 && (back.z - z).abs() < 1e-12);
        }
    }
}
