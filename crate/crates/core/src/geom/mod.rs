//! Rigid-motion and camera-model algebra shared by the whole pipeline.
//!
//! All types are generic over the scalar (f32 or f64); the crate root exports
//! f64 aliases used by the calibration and reconstruction layers. Everything
//! here is a pure value type, safe to share across threads.

mod camera;
mod pose;
mod vec;

pub use camera::{CameraIntrinsics, ProjectionError};
pub use pose::{nearest_rotation, rodrigues, rodrigues_inverse, rot_y, Pose, RotVec};
pub use vec::{Matrix3, Vector3};
