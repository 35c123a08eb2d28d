//! 2x2 complex matrix algebra for Jones calculus.
//!
//! Pauli matrices follow the optical-communications ordering
//! `sigma1 = diag(1, -1)`, `sigma2 = [[0, 1], [1, 0]]`,
//! `sigma3 = [[0, -j], [j, 0]]`, so that `p . sigma` maps a Stokes vector onto
//! the traceless Hermitian generator of a polarization rotation.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// General 2x2 complex matrix, row-major `[[m00, m01], [m10, m11]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Real> Mat2<T> {
    pub fn new(m00: Complex<T>, m01: Complex<T>, m10: Complex<T>, m11: Complex<T>) -> Self {
        Self {
            m: [[m00, m01], [m10, m11]],
        }
    }

    pub fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(z, z, z, z)
    }

    pub fn identity() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        let o = Complex::new(T::one(), T::zero());
        Self::new(o, z, z, o)
    }

    pub fn diag(d0: Complex<T>, d1: Complex<T>) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(d0, z, z, d1)
    }

    /// Outer product `u * v^H`.
    pub fn outer(u: [Complex<T>; 2], v: [Complex<T>; 2]) -> Self {
        Self::new(
            u[0] * v[0].conj(),
            u[0] * v[1].conj(),
            u[1] * v[0].conj(),
            u[1] * v[1].conj(),
        )
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.m[r][c]
    }

    /// Hermitian transpose.
    pub fn adjoint(&self) -> Self {
        Self::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn trace(&self) -> Complex<T> {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> Complex<T> {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn scale_re(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn apply(&self, v: [Complex<T>; 2]) -> [Complex<T>; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn frobenius_sq(&self) -> T {
        self.m.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    /// Squared energy of column `c`, `|m0c|^2 + |m1c|^2`.
    pub fn column_energy(&self, c: usize) -> T {
        self.m[0][c].norm_sqr() + self.m[1][c].norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Eigenvalues from the characteristic polynomial.
    pub fn eigenvalues(&self) -> [Complex<T>; 2] {
        let two = T::lit(2.0);
        let half_tr = self.trace() / two;
        let disc = (half_tr * half_tr - self.det()).sqrt();
        [half_tr + disc, half_tr - disc]
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> [T; 2] {
        let f = self.frobenius_sq();
        let d = self.det().norm();
        let root = (f * f - T::lit(4.0) * d * d).max(T::zero()).sqrt();
        let s_hi = ((f + root) / T::lit(2.0)).max(T::zero()).sqrt();
        let s_lo = ((f - root) / T::lit(2.0)).max(T::zero()).sqrt();
        [s_hi, s_lo]
    }

    /// Largest absolute entry difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.m[r][c] - other.m[r][c]).norm());
            }
        }
        worst
    }

    /// Converts to another precision.
    pub fn cast<U: Real>(&self) -> Mat2<U> {
        let cv = |z: Complex<T>| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()));
        Mat2::new(
            cv(self.m[0][0]),
            cv(self.m[0][1]),
            cv(self.m[1][0]),
            cv(self.m[1][1]),
        )
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let a = &self.m;
        let b = &rhs.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.m[0][0] + rhs.m[0][0],
            self.m[0][1] + rhs.m[0][1],
            self.m[1][0] + rhs.m[1][0],
            self.m[1][1] + rhs.m[1][1],
        )
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(
            self.m[0][0] - rhs.m[0][0],
            self.m[0][1] - rhs.m[0][1],
            self.m[1][0] - rhs.m[1][0],
            self.m[1][1] - rhs.m[1][1],
        )
    }
}

/// Pauli matrix `sigma_i`, `i` in 1..=3.
pub fn pauli<T: Real>(i: usize) -> Mat2<T> {
    let z = Complex::new(T::zero(), T::zero());
    let o = Complex::new(T::one(), T::zero());
    let j = Complex::new(T::zero(), T::one());
    match i {
        1 => Mat2::new(o, z, z, -o),
        2 => Mat2::new(z, o, o, z),
        3 => Mat2::new(z, -j, j, z),
        _ => panic!("Pauli index must be 1, 2 or 3, got {i}"),
    }
}

/// Unit Stokes vector on the Poincare sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesVector<T> {
    pub p1: T,
    pub p2: T,
    pub p3: T,
}

impl<T: Real> StokesVector<T> {
    fn tol() -> T {
        T::unit_tol().max(T::lit(1e-12))
    }

    /// Validated constructor; the components must already have unit norm.
    pub fn new(p1: T, p2: T, p3: T) -> Result<Self> {
        let s = Self { p1, p2, p3 };
        s.validate()?;
        Ok(s)
    }

    /// Scales an arbitrary nonzero vector onto the unit sphere.
    pub fn normalized(p1: T, p2: T, p3: T) -> Result<Self> {
        let n = (p1 * p1 + p2 * p2 + p3 * p3).sqrt();
        if !(n > T::epsilon()) || !n.is_finite() {
            return invalid("Stokes vector has zero or non-finite norm");
        }
        Ok(Self {
            p1: p1 / n,
            p2: p2 / n,
            p3: p3 / n,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n2 = self.norm_sq();
        if !n2.is_finite() || (n2 - T::one()).abs() > Self::tol() {
            return invalid(format!("Stokes vector must have unit norm, |p|^2 = {}", n2));
        }
        Ok(())
    }

    pub fn norm_sq(&self) -> T {
        self.p1 * self.p1 + self.p2 * self.p2 + self.p3 * self.p3
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.p1, self.p2, self.p3]
    }

    pub fn dot(&self, other: &Self) -> T {
        self.p1 * other.p1 + self.p2 * other.p2 + self.p3 * other.p3
    }

    pub fn neg(&self) -> Self {
        Self {
            p1: -self.p1,
            p2: -self.p2,
            p3: -self.p3,
        }
    }

    /// Angle to another unit vector, in radians.
    pub fn angle_to(&self, other: &Self) -> T {
        self.dot(other).max(-T::one()).min(T::one()).acos()
    }

    /// `p . sigma`.
    pub fn sigma(&self) -> Mat2<T> {
        pauli::<T>(1).scale_re(self.p1)
            + pauli::<T>(2).scale_re(self.p2)
            + pauli::<T>(3).scale_re(self.p3)
    }

    /// Uniform draw on the sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 3] = [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ];
            if let Ok(s) = Self::normalized(T::lit(v[0]), T::lit(v[1]), T::lit(v[2])) {
                return s;
            }
        }
    }
}

/// Special-unitary Jones matrix `[[a, -b*], [b, a*]]`, `|a|^2 + |b|^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesUnitary<T> {
    a: Complex<T>,
    b: Complex<T>,
}

impl<T: Real> JonesUnitary<T> {
    pub fn new(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        let n = a.norm_sqr() + b.norm_sqr();
        if !n.is_finite() || (n - T::one()).abs() > T::unit_tol().max(T::lit(1e-12)) {
            return invalid(format!("|a|^2 + |b|^2 = {n}, expected 1"));
        }
        Ok(Self { a, b })
    }

    /// Projects `(a, b)` onto the unit sphere of `C^2`.
    pub fn normalized(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !(n > T::epsilon()) || !n.is_finite() {
            return invalid("cannot normalize a zero Jones matrix");
        }
        Ok(Self { a: a / n, b: b / n })
    }

    pub fn identity() -> Self {
        Self {
            a: Complex::new(T::one(), T::zero()),
            b: Complex::new(T::zero(), T::zero()),
        }
    }

    /// `exp(-j * angle/2 * (axis . sigma))`: rotation of the Stokes vector by
    /// `angle` about `axis`.
    pub fn from_axis_angle(axis: &StokesVector<T>, angle: T) -> Self {
        let half = angle / T::lit(2.0);
        let (s, c) = half.sin_cos();
        Self {
            a: Complex::new(c, -s * axis.p1),
            b: Complex::new(s * axis.p3, -s * axis.p2),
        }
    }

    /// Haar-uniform draw from SU(2).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 4] = [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ];
            let a = Complex::new(T::lit(v[0]), T::lit(v[1]));
            let b = Complex::new(T::lit(v[2]), T::lit(v[3]));
            if let Ok(u) = Self::normalized(a, b) {
                return u;
            }
        }
    }

    pub fn a(&self) -> Complex<T> {
        self.a
    }

    pub fn b(&self) -> Complex<T> {
        self.b
    }

    pub fn matrix(&self) -> Mat2<T> {
        Mat2::new(self.a, -self.b.conj(), self.b, self.a.conj())
    }

    pub fn adjoint(&self) -> Self {
        // [[a*, b*], [-b, a]] = [[a', -b'*], [b', a'*]] with a' = a*, b' = -b
        Self {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        let m = self.matrix() * rhs.matrix();
        Self {
            a: m.m[0][0],
            b: m.m[1][0],
        }
    }

    pub fn apply(&self, v: [Complex<T>; 2]) -> [Complex<T>; 2] {
        self.matrix().apply(v)
    }
}

impl<T: Real> TryFrom<Mat2<T>> for JonesUnitary<T> {
    type Error = Error;

    /// Accepts matrices of the special-unitary form only.
    fn try_from(m: Mat2<T>) -> Result<Self> {
        let u = Self::new(m.m[0][0], m.m[1][0])?;
        let tol = T::unit_tol().max(T::lit(1e-12)) * T::lit(16.0);
        if u.matrix().max_abs_diff(&m) > tol {
            return invalid("matrix is not of the form [[a, -b*], [b, a*]]");
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    #[test]
    fn pauli_algebra() {
        for i in 1..=3 {
            let s = pauli::<f64>(i);
            assert!((s * s).max_abs_diff(&Mat2::identity()) < 1e-15);
            assert!(s.trace().norm() < 1e-15);
            assert!(s.adjoint().max_abs_diff(&s) < 1e-15);
        }
        // sigma1 sigma2 = j sigma3 in this ordering
        let prod = pauli::<f64>(1) * pauli::<f64>(2);
        let want = pauli::<f64>(3).scale(C::new(0.0, 1.0));
        assert!(prod.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn axis_angle_matches_exponential_form() {
        let p = StokesVector::normalized(0.3, -0.5, 0.8).unwrap();
        let theta: f64 = 1.1;
        let u = JonesUnitary::from_axis_angle(&p, theta);
        let want = Mat2::<f64>::identity().scale_re((theta / 2.0).cos())
            - p.sigma().scale(C::new(0.0, (theta / 2.0).sin()));
        assert!(u.matrix().max_abs_diff(&want) < 1e-15);
        assert!((u.matrix().det() - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eigenvalues_of_rotation() {
        let p = StokesVector::<f64>::new(1.0, 0.0, 0.0).unwrap();
        let u = JonesUnitary::from_axis_angle(&p, 0.8).matrix();
        let ev = u.eigenvalues();
        let mut phases = [ev[0].arg(), ev[1].arg()];
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((phases[0] + 0.4).abs() < 1e-14);
        assert!((phases[1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn singular_values_of_scaled_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = JonesUnitary::<f64>::random(&mut rng)
            .matrix()
            .scale(C::new(0.0, 2.5));
        let sv = u.singular_values();
        assert!((sv[0] - 2.5).abs() < 1e-12 && (sv[1] - 2.5).abs() < 1e-12);
        let d = Mat2::diag(C::new(3.0, 0.0), C::new(0.0, 0.5));
        let sv = d.singular_values();
        assert!((sv[0] - 3.0).abs() < 1e-12 && (sv[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_inputs_rejected() {
        assert!(StokesVector::new(1.0, 1.0, 0.0).is_err());
        assert!(JonesUnitary::new(C::new(1.0, 0.0), C::new(0.1, 0.0)).is_err());
        assert!(StokesVector::<f64>::normalized(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn adjoint_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = JonesUnitary::<f64>::random(&mut rng);
            let p = u.compose(&u.adjoint()).matrix();
            assert!(p.max_abs_diff(&Mat2::identity()) < 1e-14);
            assert_eq!(JonesUnitary::try_from(u.matrix()).unwrap(), u);
        }
    }

    #[test]
    fn single_precision_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = JonesUnitary::<f32>::random(&mut rng).matrix();
        let p = u * u.adjoint();
        assert!(p.max_abs_diff(&Mat2::identity()) < 1e-6);
    }
}
