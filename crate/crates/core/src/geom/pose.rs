//! Angle-axis rotations and rigid transforms.

use super::vec::{Matrix3, Vector3};
use crate::scalar::{as_f64, real, Real};

/// Angle-axis rotation vector: direction is the rotation axis, magnitude the
/// angle in radians. Canonical form has magnitude in `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotVec<T>(pub Vector3<T>);

impl<T: Real> RotVec<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn from_vector(v: Vector3<T>) -> Self {
        Self(v)
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn angle(&self) -> T {
        self.0.norm()
    }

    pub fn axis(&self) -> Option<Vector3<T>> {
        self.0.normalized()
    }

    /// Reduce the angle to `[0, pi]`, flipping the axis as needed. An angle of
    /// exactly `pi` keeps the lexicographically positive axis (the antipodal
    /// representative is equivalent).
    pub fn canonicalized(&self) -> Self {
        let two_pi: T = real(std::f64::consts::TAU);
        let pi: T = real(std::f64::consts::PI);
        let angle = self.angle();
        if angle == T::zero() {
            return Self::zero();
        }
        let axis = self.0 / angle;
        // Wrap into (-pi, pi], then fold negatives onto the flipped axis.
        let mut a = angle % two_pi;
        if a > pi {
            a = a - two_pi;
        }
        let (a, axis) = if a < T::zero() { (-a, -axis) } else { (a, axis) };
        if a == pi {
            return Self(lex_positive(axis) * pi);
        }
        Self(axis * a)
    }
}

fn lex_positive<T: Real>(v: Vector3<T>) -> Vector3<T> {
    for i in 0..3 {
        if v[i] > T::zero() {
            return v;
        }
        if v[i] < T::zero() {
            return -v;
        }
    }
    v
}

/// Rotation matrix from an angle-axis vector (Rodrigues' formula).
///
/// The zero vector maps to the identity. For tiny angles the Taylor limits of
/// `sin(w)/w` and `(1-cos(w))/w^2` keep the result orthonormal.
pub fn rodrigues<T: Real>(rv: RotVec<T>) -> Matrix3<T> {
    let angle = rv.angle();
    if as_f64(angle) < 1e-12 {
        // First-order expansion: I + [w]x is accurate and orthonormal to
        // within ~1e-24 here.
        return Matrix3::identity() + Matrix3::skew(&rv.0);
    }
    let axis = rv.0 / angle;
    let (s, c) = (angle.sin(), angle.cos());
    Matrix3::identity() * c
        + Matrix3::outer(&axis, &axis) * (T::one() - c)
        + Matrix3::skew(&axis) * s
}

/// Angle-axis vector of a rotation matrix (inverse of [`rodrigues`]).
///
/// Returns the canonical representative with angle in `[0, pi]`. `m` is
/// assumed orthonormal with determinant +1.
pub fn rodrigues_inverse<T: Real>(m: &Matrix3<T>) -> RotVec<T> {
    let half: T = real(0.5);
    let v = Vector3::new(
        m.0[2][1] - m.0[1][2],
        m.0[0][2] - m.0[2][0],
        m.0[1][0] - m.0[0][1],
    ) * half;
    let s = v.norm(); // sin(angle)
    let c = (m.trace() - T::one()) * half; // cos(angle)
    let angle = s.atan2(c);

    if as_f64(s) > 1e-9 {
        return RotVec((v / s) * angle);
    }
    if c > T::zero() {
        // Near zero: v already equals axis*sin(angle) ~ axis*angle.
        return RotVec(v * (angle / s.max(real(f64::MIN_POSITIVE))))
            .canonicalized_or_small(v);
    }
    // Near pi: recover the axis from the symmetric part, R = 2 w wT - I + O(pi - angle).
    let one = T::one();
    let two: T = real(2.0);
    let wx = ((m.0[0][0] + one) / two).max(T::zero()).sqrt();
    let wy = ((m.0[1][1] + one) / two).max(T::zero()).sqrt();
    let wz = ((m.0[2][2] + one) / two).max(T::zero()).sqrt();
    // Fix relative signs using the largest component as reference.
    let mut w = Vector3::new(wx, wy, wz);
    let k = (0..3)
        .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap())
        .unwrap();
    for i in 0..3 {
        if i != k && m.0[k][i] + m.0[i][k] < T::zero() {
            w[i] = -w[i];
        }
    }
    let w = w.normalized().unwrap_or(Vector3::new(one, T::zero(), T::zero()));
    RotVec(lex_positive(w) * angle)
}

impl<T: Real> RotVec<T> {
    fn canonicalized_or_small(self, fallback: Vector3<T>) -> Self {
        if self.0.is_finite() {
            self
        } else {
            Self(fallback)
        }
    }
}

/// Rigid transform `[R | t]`: maps point coordinates from the source frame to
/// the destination frame, `p_dst = R p_src + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_rotvec(rv: RotVec<T>, translation: Vector3<T>) -> Self {
        Self::new(rodrigues(rv), translation)
    }

    /// Pure rotation, zero translation.
    pub fn rotation_only(rotation: Matrix3<T>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn rotvec(&self) -> RotVec<T> {
        rodrigues_inverse(&self.rotation)
    }

    /// Composition `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Inverse transform `[Rᵀ | -Rᵀ t]`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * *p + self.translation
    }

    /// Position of this frame's origin expressed in the source frame
    /// (for a world-to-camera pose: the camera centre in world coordinates).
    pub fn origin_in_source(&self) -> Vector3<T> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Max deviation of `RᵀR` from the identity plus `|det - 1|`.
    pub fn orthonormality_error(&self) -> T {
        let rtr = self.rotation.transpose() * self.rotation;
        rtr.max_abs_diff(&Matrix3::identity()) + (self.rotation.determinant() - T::one()).abs()
    }

    /// Geodesic rotation angle between two poses, radians.
    pub fn rotation_distance(&self, other: &Self) -> T {
        let rel = self.rotation.transpose() * other.rotation;
        rodrigues_inverse(&rel).angle()
    }

    pub fn translation_distance(&self, other: &Self) -> T {
        (self.translation - other.translation).norm()
    }

    pub fn cast<U: Real>(&self) -> Pose<U> {
        Pose {
            rotation: self.rotation.cast(),
            translation: self.translation.cast(),
        }
    }
}

/// Rotation about the +y axis by `angle` radians.
pub fn rot_y<T: Real>(angle: T) -> Matrix3<T> {
    rodrigues(RotVec::new(T::zero(), angle, T::zero()))
}

/// Projection to the nearest rotation matrix (polar factor), used when
/// averaging or re-orthonormalizing numerically drifted rotations.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let n = nalgebra::Matrix3::from_fn(|i, j| m.0[i][j]);
    let svd = n.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut s = nalgebra::Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * vt;
    Matrix3([
        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit<T: Real>(v: Vector3<T>) -> Vector3<T> {
        v.normalized().unwrap()
    }

    /// Independent oracle: rotation matrix -> quaternion (Shepperd's method)
    /// -> angle-axis. Shares no code with `rodrigues_inverse`.
    fn rotvec_via_quaternion(m: &Matrix3<f64>) -> RotVec<f64> {
        let t = m.trace();
        let (w, x, y, z);
        if t > 0.0 {
            let s = (t + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m.0[2][1] - m.0[1][2]) / s;
            y = (m.0[0][2] - m.0[2][0]) / s;
            z = (m.0[1][0] - m.0[0][1]) / s;
        } else if m.0[0][0] > m.0[1][1] && m.0[0][0] > m.0[2][2] {
            let s = (1.0 + m.0[0][0] - m.0[1][1] - m.0[2][2]).sqrt() * 2.0;
            w = (m.0[2][1] - m.0[1][2]) / s;
            x = 0.25 * s;
            y = (m.0[0][1] + m.0[1][0]) / s;
            z = (m.0[0][2] + m.0[2][0]) / s;
        } else if m.0[1][1] > m.0[2][2] {
            let s = (1.0 + m.0[1][1] - m.0[0][0] - m.0[2][2]).sqrt() * 2.0;
            w = (m.0[0][2] - m.0[2][0]) / s;
            x = (m.0[0][1] + m.0[1][0]) / s;
            y = 0.25 * s;
            z = (m.0[1][2] + m.0[2][1]) / s;
        } else {
            let s = (1.0 + m.0[2][2] - m.0[0][0] - m.0[1][1]).sqrt() * 2.0;
            w = (m.0[1][0] - m.0[0][1]) / s;
            x = (m.0[0][2] + m.0[2][0]) / s;
            y = (m.0[1][2] + m.0[2][1]) / s;
            z = 0.25 * s;
        }
        let (w, x, y, z) = if w < 0.0 { (-w, -x, -y, -z) } else { (w, x, y, z) };
        let sin_half = (x * x + y * y + z * z).sqrt();
        let angle = 2.0 * sin_half.atan2(w);
        if sin_half < 1e-300 {
            return RotVec::zero();
        }
        RotVec(Vector3::new(x, y, z) * (angle / sin_half))
    }

    #[test]
    fn zero_rotation_is_identity() {
        let m = rodrigues(RotVec::<f64>::zero());
        assert!(m.max_abs_diff(&Matrix3::identity()) == 0.0);
    }

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let m = rodrigues(RotVec::new(0.0, 0.0, FRAC_PI_2));
        let y = m * Vector3::new(1.0, 0.0, 0.0);
        assert!((y - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn round_trip_against_quaternion_oracle() {
        // Deterministic pseudo-random axes; |rv| = 1.2 per the reference case
        // plus a sweep of angles across (0, pi).
        let mut seed = 0x9e3779b97f4a7c15_u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for case in 0..200 {
            let axis = unit(Vector3::new(next(), next(), next()));
            let angle = if case == 0 { 1.2 } else { 1e-5 + (PI - 2e-5) * (case as f64 / 200.0) };
            let rv = RotVec(axis * angle);
            let m = rodrigues(rv);
            // Orthonormality.
            assert!((m.transpose() * m).max_abs_diff(&Matrix3::identity()) < 1e-12);
            assert!((m.determinant() - 1.0).abs() < 1e-12);
            // Round trip against both the inverse and the quaternion oracle.
            let back = rodrigues_inverse(&m);
            let oracle = rotvec_via_quaternion(&m);
            assert!((back.0 - rv.canonicalized().0).norm() < 1e-10, "case {case}");
            assert!((back.0 - oracle.0).norm() < 1e-9, "oracle disagrees, case {case}");
        }
    }

    #[test]
    fn inverse_near_pi_recovers_axis() {
        let axis = unit(Vector3::new(0.6, -0.3, 0.74));
        for &angle in &[PI - 1e-7, PI] {
            let rv = RotVec(axis * angle);
            let m = rodrigues(rv);
            let back = rodrigues_inverse(&m);
            let expect = rv.canonicalized();
            assert!(
                (back.0 - expect.0).norm() < 1e-6 || (back.0 + expect.0).norm() < 1e-6,
                "angle {angle}"
            );
        }
    }

    #[test]
    fn canonicalization_folds_angle() {
        let rv = RotVec::new(0.0, 0.0, 3.0 * PI / 2.0).canonicalized();
        assert!((rv.angle() - FRAC_PI_2).abs() < 1e-15);
        assert!(rv.0[2] < 0.0);
    }

    #[test]
    fn compose_with_identity() {
        let p = Pose::from_rotvec(RotVec::new(0.1, -0.2, 0.3), Vector3::new(4.0, 5.0, 6.0));
        let q = Pose::identity().compose(&p);
        assert!(p.rotation.max_abs_diff(&q.rotation) == 0.0);
        assert!((p.translation - q.translation).norm() == 0.0);
    }

    #[test]
    fn inverse_is_closed_form() {
        let p = Pose::from_rotvec(RotVec::new(0.4, 0.2, -0.1), Vector3::new(1.0, -2.0, 3.0));
        let inv = p.inverse();
        let expect_t = -(p.rotation.transpose() * p.translation);
        assert!((inv.translation - expect_t).norm() < 1e-15);
        let id = p.compose(&inv);
        assert!(id.rotation.max_abs_diff(&Matrix3::identity()) < 1e-9);
        assert!(id.translation.norm() < 1e-9);
    }

    #[test]
    fn apply_hand_case() {
        // R = rot(z, 90 deg), t = (1,0,0), p = (1,0,0) -> (1,1,0).
        let p = Pose::from_rotvec(
            RotVec::new(0.0, 0.0, FRAC_PI_2),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let out = p.apply(&Vector3::new(1.0, 0.0, 0.0));
        assert!((out - Vector3::new(1.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn compose_associates_with_apply() {
        let a = Pose::from_rotvec(RotVec::new(0.3, 0.1, -0.2), Vector3::new(0.5, 1.0, -2.0));
        let b = Pose::from_rotvec(RotVec::new(-0.1, 0.8, 0.05), Vector3::new(-3.0, 0.2, 0.7));
        let x = Vector3::new(10.0, -4.0, 2.5);
        let lhs = a.compose(&b).apply(&x);
        let rhs = a.apply(&b.apply(&x));
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn nearest_rotation_fixes_drift() {
        let r = rodrigues(RotVec::new(0.2, 0.5, -0.3));
        let drifted = r * 1.0001;
        let fixed = nearest_rotation(&drifted);
        assert!((fixed.transpose() * fixed).max_abs_diff(&Matrix3::identity()) < 1e-12);
        assert!(fixed.max_abs_diff(&r) < 1e-4);
    }
}
