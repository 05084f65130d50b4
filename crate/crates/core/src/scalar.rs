//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar the solver is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + LowerExp
        + FromStr
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Point or vector in the plane.
pub type Point<T> = [T; 2];

/// Row-major 2x2 matrix.
pub type Mat2<T> = [[T; 2]; 2];

#[inline]
pub fn dot<T: Real>(a: Point<T>, b: Point<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm<T: Real>(a: Point<T>) -> T {
    a[0].hypot(a[1])
}

#[inline]
pub fn sub<T: Real>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add<T: Real>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale<T: Real>(c: T, a: Point<T>) -> Point<T> {
    [c * a[0], c * a[1]]
}

#[inline]
pub fn mat_vec<T: Real>(m: &Mat2<T>, v: Point<T>) -> Point<T> {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

#[inline]
pub fn mat_t_vec<T: Real>(m: &Mat2<T>, v: Point<T>) -> Point<T> {
    [m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]]
}

#[inline]
pub fn mat_mul<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut c = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

#[inline]
pub fn transpose<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

#[inline]
pub fn det<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Inverse of a 2x2 matrix, `None` when the determinant vanishes.
pub fn inverse<T: Real>(m: &Mat2<T>) -> Option<Mat2<T>> {
    let d = det(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

/// Spectral norm of a 2x2 matrix (largest singular value).
pub fn spectral_norm<T: Real>(m: &Mat2<T>) -> T {
    // singular values of a 2x2 matrix from the invariants of m^T m
    let a = m[0][0];
    let b = m[0][1];
    let c = m[1][0];
    let d = m[1][1];
    let s1 = a * a + b * b + c * c + d * d;
    let dt = (a * d - b * c).abs();
    let half = T::lit(0.5);
    let disc = (s1 * s1 - T::lit(4.0) * dt * dt).max(T::zero()).sqrt();
    (half * (s1 + disc)).sqrt()
}

#[inline]
pub fn identity<T: Real>() -> Mat2<T> {
    [[T::one(), T::zero()], [T::zero(), T::one()]]
}
