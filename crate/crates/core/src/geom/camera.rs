//! Pinhole camera with two-term radial distortion.

use super::vec::Vector3;
use crate::scalar::{as_f64, real, Real};

/// Intrinsic parameters `[f, c_u, c_v, d_1, d_2]`: a single focal length in
/// pixels, the principal point, and two radial distortion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub f: T,
    pub c_u: T,
    pub c_v: T,
    pub d1: T,
    pub d2: T,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectionError {
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("distortion inversion did not converge after {iterations} iterations")]
    UndistortDiverged { iterations: u32 },
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(f: T, c_u: T, c_v: T, d1: T, d2: T) -> Self {
        Self { f, c_u, c_v, d1, d2 }
    }

    /// Radial gain `1 + d1 r^2 + d2 r^4` at squared normalized radius `r2`.
    pub fn radial_gain(&self, r2: T) -> T {
        T::one() + self.d1 * r2 + self.d2 * r2 * r2
    }

    /// Project a point given in the camera frame to pixel coordinates.
    pub fn project(&self, p_cam: &Vector3<T>) -> Result<[T; 2], ProjectionError> {
        if p_cam.z() <= T::zero() {
            return Err(ProjectionError::BehindCamera {
                z: as_f64(p_cam.z()),
            });
        }
        let a = p_cam.x() / p_cam.z();
        let b = p_cam.y() / p_cam.z();
        let g = self.radial_gain(a * a + b * b);
        Ok([self.f * a * g + self.c_u, self.f * b * g + self.c_v])
    }

    /// Invert the projection: pixel -> unit-depth ray `(a, b, 1)` such that
    /// projecting the ray reproduces the pixel.
    ///
    /// Fixed-point iteration on the radial gain, capped at 20 steps with a
    /// 1e-9 step tolerance. Divergence signals a pixel outside the
    /// distortion model's validity.
    pub fn undistort(&self, pixel: [T; 2]) -> Result<Vector3<T>, ProjectionError> {
        const MAX_ITERS: u32 = 20;
        let tol: T = real(1e-9);
        let a0 = (pixel[0] - self.c_u) / self.f;
        let b0 = (pixel[1] - self.c_v) / self.f;
        let (mut a, mut b) = (a0, b0);
        for _ in 0..MAX_ITERS {
            let g = self.radial_gain(a * a + b * b);
            let (na, nb) = (a0 / g, b0 / g);
            let step = ((na - a).abs()).max((nb - b).abs());
            a = na;
            b = nb;
            if step < tol {
                return Ok(Vector3::new(a, b, T::one()));
            }
        }
        Err(ProjectionError::UndistortDiverged {
            iterations: MAX_ITERS,
        })
    }

    pub fn cast<U: Real>(&self) -> CameraIntrinsics<U> {
        CameraIntrinsics {
            f: real(as_f64(self.f)),
            c_u: real(as_f64(self.c_u)),
            c_v: real(as_f64(self.c_v)),
            d1: real(as_f64(self.d1)),
            d2: real(as_f64(self.d2)),
        }
    }
}
