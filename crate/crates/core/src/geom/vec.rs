//! Minimal fixed-size linear algebra for rigid-motion work.
//!
//! Only what the pipeline needs: 3-vectors and 3x3 matrices, generic over
//! the scalar. Heavy decompositions (SVD, least squares) live in the
//! calibration layer on top of nalgebra's dynamic matrices.

use crate::scalar::{as_f64, real, Real};
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub};

/// Column 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vector3<T>(pub [T; 3]);

impl<T: Real> Vector3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self([x, y, z])
    }

    pub fn zeros() -> Self {
        Self([T::zero(); 3])
    }

    pub fn x(&self) -> T {
        self.0[0]
    }

    pub fn y(&self) -> T {
        self.0[1]
    }

    pub fn z(&self) -> T {
        self.0[2]
    }

    pub fn dot(&self, rhs: &Self) -> T {
        self.0[0] * rhs.0[0] + self.0[1] * rhs.0[1] + self.0[2] * rhs.0[2]
    }

    pub fn cross(&self, rhs: &Self) -> Self {
        Self([
            self.0[1] * rhs.0[2] - self.0[2] * rhs.0[1],
            self.0[2] * rhs.0[0] - self.0[0] * rhs.0[2],
            self.0[0] * rhs.0[1] - self.0[1] * rhs.0[0],
        ])
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() {
            Some(*self / n)
        } else {
            None
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Componentwise minimum.
    pub fn inf(&self, rhs: &Self) -> Self {
        Self([
            self.0[0].min(rhs.0[0]),
            self.0[1].min(rhs.0[1]),
            self.0[2].min(rhs.0[2]),
        ])
    }

    /// Componentwise maximum.
    pub fn sup(&self, rhs: &Self) -> Self {
        Self([
            self.0[0].max(rhs.0[0]),
            self.0[1].max(rhs.0[1]),
            self.0[2].max(rhs.0[2]),
        ])
    }

    pub fn cast<U: Real>(&self) -> Vector3<U> {
        Vector3([
            real(as_f64(self.0[0])),
            real(as_f64(self.0[1])),
            real(as_f64(self.0[2])),
        ])
    }
}

impl<T: Real> Add for Vector3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

impl<T: Real> AddAssign for Vector3<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real> Sub for Vector3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ])
    }
}

impl<T: Real> Neg for Vector3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T: Real> Mul<T> for Vector3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Div<T> for Vector3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Self([self.0[0] / s, self.0[1] / s, self.0[2] / s])
    }
}

impl<T> Index<usize> for Vector3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vector3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix3<T>(pub [[T; 3]; 3]);

impl<T: Real> Matrix3<T> {
    pub fn from_array(m: [[T; 3]; 3]) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        let o = T::one();
        let z = T::zero();
        Self([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn zeros() -> Self {
        Self([[T::zero(); 3]; 3])
    }

    pub fn from_rows(r0: Vector3<T>, r1: Vector3<T>, r2: Vector3<T>) -> Self {
        Self([r0.0, r1.0, r2.0])
    }

    pub fn from_columns(c0: Vector3<T>, c1: Vector3<T>, c2: Vector3<T>) -> Self {
        Self([
            [c0[0], c1[0], c2[0]],
            [c0[1], c1[1], c2[1]],
            [c0[2], c1[2], c2[2]],
        ])
    }

    pub fn row(&self, i: usize) -> Vector3<T> {
        Vector3(self.0[i])
    }

    pub fn column(&self, j: usize) -> Vector3<T> {
        Vector3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Outer product a bᵀ.
    pub fn outer(a: &Vector3<T>, b: &Vector3<T>) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = a[i] * b[j];
            }
        }
        Self(m)
    }

    /// Skew-symmetric cross-product matrix `[v]x`.
    pub fn skew(v: &Vector3<T>) -> Self {
        let z = T::zero();
        Self([[z, -v[2], v[1]], [v[2], z, -v[0]], [-v[1], v[0], z]])
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - rhs.0[i][j]).abs());
            }
        }
        worst
    }

    pub fn cast<U: Real>(&self) -> Matrix3<U> {
        let mut m = [[U::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = real(as_f64(self.0[i][j]));
            }
        }
        Matrix3(m)
    }
}

impl<T: Real> Mul<Vector3<T>> for Matrix3<T> {
    type Output = Vector3<T>;
    fn mul(self, v: Vector3<T>) -> Vector3<T> {
        Vector3([
            self.row(0).dot(&v),
            self.row(1).dot(&v),
            self.row(2).dot(&v),
        ])
    }
}

impl<T: Real> Mul for Matrix3<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.row(i).dot(&rhs.column(j));
            }
        }
        Self(m)
    }
}

impl<T: Real> Add for Matrix3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.0[i][j] + rhs.0[i][j];
            }
        }
        Self(m)
    }
}

impl<T: Real> Mul<T> for Matrix3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        let mut m = self.0;
        for row in &mut m {
            for e in row {
                *e = *e * s;
            }
        }
        Self(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_follows_right_hand_rule() {
        let x = Vector3::new(1.0, 0.0, 0.0);
        let y = Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(&y), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn matrix_vector_product() {
        let m = Matrix3([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
        let v = Vector3::new(1.0, 0.0, -1.0);
        assert_eq!(m * v, Vector3::new(-2.0, -2.0, -2.0));
    }

    #[test]
    fn skew_matches_cross() {
        let a = Vector3::new(0.3, -1.2, 2.0);
        let b = Vector3::new(-0.7, 0.4, 0.9);
        let lhs = Matrix3::skew(&a) * b;
        let rhs = a.cross(&b);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn determinant_of_rotation_like_matrix() {
        let m = Matrix3::<f64>::identity();
        assert_eq!(m.determinant(), 1.0);
        assert_eq!(m.trace(), 3.0);
    }

    #[test]
    fn works_in_f32_too() {
        let v = Vector3::<f32>::new(3.0, 4.0, 0.0);
        assert!((v.norm() - 5.0).abs() < 1e-6);
    }
}
