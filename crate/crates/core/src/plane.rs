//! Planar vectors and 2×2 matrices.
//!
//! The perpendicular operator is `a⊥ = (−a₂, a₁)`, i.e. a counter-clockwise
//! quarter turn, so `⟨a⊥, b⟩ = a × b` (the scalar cross product).

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlaneError {
    #[error("non-finite component")]
    NonFinite,
    #[error("zero speed: curvature undefined")]
    ZeroSpeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x1: T,
    pub x2: T,
}

impl<T: Scalar> Vec2<T> {
    #[inline]
    pub fn new(x1: T, x2: T) -> Self {
        debug_assert!(x1.is_finite() && x2.is_finite(), "non-finite Vec2");
        Self { x1, x2 }
    }

    /// Checked constructor rejecting NaN and infinities.
    pub fn try_new(x1: T, x2: T) -> Result<Self, PlaneError> {
        if x1.is_finite() && x2.is_finite() {
            Ok(Self { x1, x2 })
        } else {
            Err(PlaneError::NonFinite)
        }
    }

    #[inline]
    pub fn zero() -> Self {
        Self { x1: T::zero(), x2: T::zero() }
    }

    /// Unit vector `(cos φ, sin φ)`.
    #[inline]
    pub fn from_angle(phi: T) -> Self {
        let (s, c) = phi.sin_cos();
        Self { x1: c, x2: s }
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// `a₁b₂ − a₂b₁`, equal to `⟨a⊥, b⟩`.
    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x1 * other.x2 - self.x2 * other.x1
    }

    #[inline]
    pub fn perp(self) -> Self {
        Self { x1: -self.x2, x2: self.x1 }
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x1.hypot(self.x2)
    }

    /// Polar angle in `(−π, π]`.
    #[inline]
    pub fn angle(self) -> T {
        self.x2.atan2(self.x1)
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    #[inline]
    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn map<U>(self, f: impl Fn(T) -> U) -> Vec2<U> {
        Vec2 { x1: f(self.x1), x2: f(self.x2) }
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self { x1: self.x1 + o.x1, x2: self.x2 + o.x2 }
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self { x1: self.x1 - o.x1, x2: self.x2 - o.x2 }
    }
}

impl<T: Scalar> SubAssign for Vec2<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { x1: -self.x1, x2: -self.x2 }
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, k: T) -> Self {
        Self { x1: self.x1 * k, x2: self.x2 * k }
    }
}

impl<T: Scalar> Div<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn div(self, k: T) -> Self {
        Self { x1: self.x1 / k, x2: self.x2 / k }
    }
}

/// Row-major 2×2 matrix; `m[i][j]` multiplies `x_j` in row `i`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2<T> {
    pub m11: T,
    pub m12: T,
    pub m21: T,
    pub m22: T,
}

impl<T: Scalar> Mat2<T> {
    #[inline]
    pub fn new(m11: T, m12: T, m21: T, m22: T) -> Self {
        debug_assert!(
            m11.is_finite() && m12.is_finite() && m21.is_finite() && m22.is_finite(),
            "non-finite Mat2"
        );
        Self { m11, m12, m21, m22 }
    }

    pub fn try_new(m11: T, m12: T, m21: T, m22: T) -> Result<Self, PlaneError> {
        let m = Self { m11, m12, m21, m22 };
        if m.is_finite() {
            Ok(m)
        } else {
            Err(PlaneError::NonFinite)
        }
    }

    pub fn from_rows(rows: [[T; 2]; 2]) -> Self {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    #[inline]
    pub fn zero() -> Self {
        Self::default()
    }

    #[inline]
    pub fn identity() -> Self {
        Self::diag(T::one(), T::one())
    }

    #[inline]
    pub fn diag(d1: T, d2: T) -> Self {
        Self { m11: d1, m12: T::zero(), m21: T::zero(), m22: d2 }
    }

    #[inline]
    pub fn transpose(self) -> Self {
        Self { m11: self.m11, m12: self.m21, m21: self.m12, m22: self.m22 }
    }

    #[inline]
    pub fn det(self) -> T {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }

    pub fn rows(self) -> [[T; 2]; 2] {
        [[self.m11, self.m12], [self.m21, self.m22]]
    }

    /// Largest absolute entry.
    pub fn max_abs(self) -> T {
        self.m11.abs().max(self.m12.abs()).max(self.m21.abs()).max(self.m22.abs())
    }
}

impl<T: Scalar> Mul<Vec2<T>> for Mat2<T> {
    type Output = Vec2<T>;
    #[inline]
    fn mul(self, v: Vec2<T>) -> Vec2<T> {
        Vec2 {
            x1: self.m11 * v.x1 + self.m12 * v.x2,
            x2: self.m21 * v.x1 + self.m22 * v.x2,
        }
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            m11: self.m11 * o.m11 + self.m12 * o.m21,
            m12: self.m11 * o.m12 + self.m12 * o.m22,
            m21: self.m21 * o.m11 + self.m22 * o.m21,
            m22: self.m21 * o.m12 + self.m22 * o.m22,
        }
    }
}

impl<T: Scalar> Mul<T> for Mat2<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self { m11: self.m11 * k, m12: self.m12 * k, m21: self.m21 * k, m22: self.m22 * k }
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            m11: self.m11 + o.m11,
            m12: self.m12 + o.m12,
            m21: self.m21 + o.m21,
            m22: self.m22 + o.m22,
        }
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            m11: self.m11 - o.m11,
            m12: self.m12 - o.m12,
            m21: self.m21 - o.m21,
            m22: self.m22 - o.m22,
        }
    }
}

/// `a⊥ = (−a₂, a₁)`.
#[inline]
pub fn perp<T: Scalar>(a: Vec2<T>) -> Vec2<T> {
    a.perp()
}

/// Unsigned curvature `|u₁″u₂′ − u₁′u₂″| / |u′|³` of a planar curve.
pub fn curvature<T: Scalar>(u_prime: Vec2<T>, u_second: Vec2<T>) -> Result<T, PlaneError> {
    let speed = u_prime.norm();
    if !(speed > T::zero()) {
        return Err(PlaneError::ZeroSpeed);
    }
    let num = (u_second.x1 * u_prime.x2 - u_prime.x1 * u_second.x2).abs();
    Ok(num / (speed * speed * speed))
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Vec2<f64>;

    #[test]
    fn perp_of_basis_vectors() {
        assert_eq!(perp(V::new(1.0, 0.0)), V::new(0.0, 1.0));
        assert_eq!(perp(V::new(0.0, 1.0)), V::new(-1.0, 0.0));
        assert_eq!(perp(perp(V::new(3.0, -2.0))), V::new(-3.0, 2.0));
    }

    #[test]
    fn cross_is_perp_inner_product() {
        let a = V::new(0.3, -1.7);
        let b = V::new(2.2, 0.9);
        assert_eq!(a.cross(b), perp(a).dot(b));
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(curvature(V::new(1.0, 0.0), V::new(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(curvature(V::new(2.0, 0.0), V::new(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(curvature(V::zero(), V::new(1.0, 0.0)), Err(PlaneError::ZeroSpeed));
    }

    // Circle of radius R traversed at angular rate ω: velocity Rω, acceleration Rω².
    // u′ = (0, 2), u″ = (−2, 0) corresponds to R = 2, ω = 1, hence κ = 1/2.
    #[test]
    fn curvature_matches_finite_difference_circle() {
        let (r, w) = (2.0_f64, 1.0_f64);
        let c = |t: f64| V::new(r * (w * t).cos(), r * (w * t).sin());
        let h = 1e-4;
        let d1 = (c(h) - c(-h)) / (2.0 * h);
        let d2 = (c(h) - c(0.0) * 2.0 + c(-h)) / (h * h);
        assert!((d1 - V::new(0.0, 2.0)).norm() < 1e-7);
        assert!((d2 - V::new(-2.0, 0.0)).norm() < 1e-6);
        let k_fd = curvature(d1, d2).unwrap();
        let k = curvature(V::new(0.0, 2.0), V::new(-2.0, 0.0)).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        assert!((k_fd - 1.0 / r).abs() < 1e-6);
    }

    #[test]
    fn try_new_rejects_nan() {
        assert_eq!(V::try_new(f64::NAN, 0.0), Err(PlaneError::NonFinite));
        assert!(Mat2::<f64>::try_new(0.0, f64::INFINITY, 0.0, 0.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let a = Vec2::<f32>::new(3.0, 4.0);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(perp(perp(a)), -a);
    }

    #[test]
    fn matrix_vector_product_and_transpose() {
        let d = Mat2::from_rows([[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(d * V::new(1.0, 1.0), V::new(3.0, 7.0));
        assert_eq!(d.transpose() * V::new(1.0, 1.0), V::new(4.0, 6.0));
        assert_eq!(d.det(), -2.0);
    }
}
