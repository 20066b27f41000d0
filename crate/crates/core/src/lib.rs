//! Measurable 3D plant models from turntable image sequences.
//!
//! The pipeline mirrors a physical scanning rig: a plant on a rotating stage
//! imaged by tilting cameras. Stages, in order:
//!
//! 1. **geom** — angle-axis rotations, rigid transforms, pinhole + radial
//!    distortion camera model.
//! 2. **calib** — intrinsics and per-(camera, tilt, pan-angle) poses relative
//!    to a world frame fixed to the turntable axis.
//! 3. **silhouette** — LAB background scoring, binary masks, exact signed
//!    Euclidean distance fields.
//! 4. **carve** — bounding-box estimation, octree visual-hull carving, pot
//!    removal, marching-cubes meshing.
//! 5. **meshan** — curvature-constrained leaf segmentation and per-leaf
//!    geometry (length, width, perimeter, area).
//! 6. **synth** — ground-truth scene generator used as the test oracle and by
//!    the `synth`/`evaluate` CLI commands.
//!
//! Core math is generic over the scalar via [`scalar::Real`]; the aliases
//! below fix f64 (f32 for bulk image fields) as used by the pipeline.

pub mod calib;
pub mod carve;
pub mod config;
pub mod geom;
pub mod mesh;
pub mod meshan;
pub mod optim;
pub mod scalar;
pub mod silhouette;
pub mod synth;

/// 3-vector, world/camera coordinates in mm.
pub type Vec3 = geom::Vector3<f64>;
/// 3x3 matrix.
pub type Mat3 = geom::Matrix3<f64>;
/// Angle-axis rotation vector.
pub type RotVec = geom::RotVec<f64>;
/// Rigid transform `[R | t]`.
pub type Pose = geom::Pose<f64>;
/// Camera intrinsics `[f, c_u, c_v, d_1, d_2]`.
pub type CameraIntrinsics = geom::CameraIntrinsics<f64>;
/// Signed Euclidean distance field stored at f32 (one plane per view).
pub type Sdf = silhouette::SignedDistanceField<f32>;
