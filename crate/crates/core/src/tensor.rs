//! Small fixed-size vectors and tensors used pointwise throughout the solver.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A point or vector in the plane.
pub type Vec2 = [f64; 2];

/// Row-major 2x2 matrix; `m[a][b]` is row `a`, column `b`.
pub type Mat2 = [[f64; 2]; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn axpy(a: f64, x: Vec2, y: Vec2) -> Vec2 {
    [a * x[0] + y[0], a * x[1] + y[1]]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn mat_vec(m: &Mat2, x: Vec2) -> Vec2 {
    [
        m[0][0] * x[0] + m[0][1] * x[1],
        m[1][0] * x[0] + m[1][1] * x[1],
    ]
}

/// Symmetric traceless 2x2 tensor `[[xx, xy], [xy, -xx]]`.
///
/// Only the two independent components are stored, so the zero trace and the
/// symmetry hold by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 { xx: 0.0, xy: 0.0 };

    pub const fn new(xx: f64, xy: f64) -> Self {
        Self { xx, xy }
    }

    /// Deviatoric symmetric part of a general 2x2 matrix.
    pub fn dev_sym(m: &Mat2) -> Self {
        Self {
            xx: 0.5 * (m[0][0] - m[1][1]),
            xy: 0.5 * (m[0][1] + m[1][0]),
        }
    }

    /// Full Frobenius norm, counting both off-diagonal entries.
    pub fn norm(self) -> f64 {
        (2.0 * (self.xx * self.xx + self.xy * self.xy)).sqrt()
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(self, other: Self) -> f64 {
        2.0 * (self.xx * other.xx + self.xy * other.xy)
    }

    /// Frobenius inner product with a general matrix.
    pub fn ddot_mat(self, m: &Mat2) -> f64 {
        self.xx * (m[0][0] - m[1][1]) + self.xy * (m[0][1] + m[1][0])
    }

    pub fn to_mat(self) -> Mat2 {
        [[self.xx, self.xy], [self.xy, -self.xx]]
    }

    /// `A n`.
    pub fn apply(self, n: Vec2) -> Vec2 {
        [
            self.xx * n[0] + self.xy * n[1],
            self.xy * n[0] - self.xx * n[1],
        ]
    }

    pub fn components(self) -> [f64; 2] {
        [self.xx, self.xy]
    }

    pub fn from_components(c: [f64; 2]) -> Self {
        Self { xx: c[0], xy: c[1] }
    }

    /// `R A R^T` for the rotation by `theta`. On the stored pair this is a
    /// rotation by `2 theta`.
    pub fn rotate(self, theta: f64) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        Self {
            xx: c * self.xx - s * self.xy,
            xy: s * self.xx + c * self.xy,
        }
    }

    pub fn is_finite(self) -> bool {
        self.xx.is_finite() && self.xy.is_finite()
    }
}

impl Add for SymTensor2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy)
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, o: Self) {
        self.xx += o.xx;
        self.xy += o.xy;
    }
}

impl Sub for SymTensor2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.xx - o.xx, self.xy - o.xy)
    }
}

impl Neg for SymTensor2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.xx, -self.xy)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, a: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self * a.xx, self * a.xy)
    }
}
