//! Ground-truth scene generation: parametric rigs, chessboard observations,
//! plant meshes with exactly-known leaf geometry, and ideal silhouettes.
//!
//! Everything is deterministic given a seed, so the full pipeline can be
//! exercised and checked against known truth without hardware.

mod leaf;
mod render;
mod scene;

pub use leaf::{make_plant_mesh, LeafSpec, PlantTruth, SceneSpec};
pub use render::{make_composite, render_silhouette, CompositeStyle};
pub use scene::{emit_scene, SceneLayout};

use crate::calib::{CornerObservations, CornerRecord, RigCalibration, RigUnit, TargetModel};
use crate::geom::rot_y;
use crate::{CameraIntrinsics, Mat3, Pose, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("target is never visible from camera {camera} (check rig geometry)")]
    TargetNeverVisible { camera: usize },
    #[error("mesh is entirely behind the camera")]
    MeshBehindCamera,
    #[error("leaf {label}: {detail}")]
    LeafShapeInfeasible { label: String, detail: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Parametric description of the physical scanning rig.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RigSpec {
    /// Ground-truth intrinsics per camera.
    pub cameras: Vec<CameraIntrinsicsSpec>,
    /// Elevation offset between consecutive cameras on the tilt frame, deg.
    pub camera_offset_deg: f64,
    /// Tilt-frame positions, deg of elevation added to every camera.
    pub tilt_angles_deg: Vec<f64>,
    /// Pan positions per revolution.
    pub pans: usize,
    /// Distance from the look-at point to each camera, mm.
    pub ring_radius_mm: f64,
    /// Height of the look-at point above the turntable, mm.
    pub look_height_mm: f64,
    pub image_width: usize,
    pub image_height: usize,
    /// Maximum angle between the target normal and the target-to-camera
    /// direction for the chessboard to count as detected, deg.
    pub facing_limit_deg: f64,
    /// Target pose in the world frame at turntable angle zero:
    /// angle-axis rotation (radians) and translation (mm).
    pub target_rotvec: [f64; 3],
    pub target_translation_mm: [f64; 3],
}

/// Serializable mirror of [`CameraIntrinsics`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsicsSpec {
    pub f: f64,
    pub c_u: f64,
    pub c_v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl From<CameraIntrinsicsSpec> for CameraIntrinsics {
    fn from(s: CameraIntrinsicsSpec) -> Self {
        CameraIntrinsics::new(s.f, s.c_u, s.c_v, s.d1, s.d2)
    }
}

impl Default for RigSpec {
    fn default() -> Self {
        // Board pitched ~35 degrees back so every tilt position sees it on
        // part of the orbit; centred a little off the axis.
        let pitch = (-35.0f64).to_radians();
        Self {
            cameras: vec![
                CameraIntrinsicsSpec {
                    f: 1200.0,
                    c_u: 516.3,
                    c_v: 508.7,
                    d1: -0.06,
                    d2: 0.012,
                },
                CameraIntrinsicsSpec {
                    f: 1180.0,
                    c_u: 510.2,
                    c_v: 514.9,
                    d1: -0.055,
                    d2: 0.010,
                },
            ],
            camera_offset_deg: 40.0,
            tilt_angles_deg: vec![0.0, 11.25, 22.5, 33.75, 45.0],
            pans: 36,
            ring_radius_mm: 500.0,
            look_height_mm: 130.0,
            image_width: 1024,
            image_height: 1024,
            facing_limit_deg: 55.0,
            target_rotvec: [pitch, 0.0, 0.0],
            target_translation_mm: [-90.0, 105.0, -15.0],
        }
    }
}

impl RigSpec {
    pub fn num_cameras(&self) -> usize {
        self.cameras.len()
    }

    pub fn pan_angle(&self, pan: usize) -> f64 {
        std::f64::consts::TAU * pan as f64 / self.pans as f64
    }

    pub fn target_pose(&self) -> Pose {
        Pose::from_rotvec(
            crate::geom::RotVec::new(
                self.target_rotvec[0],
                self.target_rotvec[1],
                self.target_rotvec[2],
            ),
            Vec3::new(
                self.target_translation_mm[0],
                self.target_translation_mm[1],
                self.target_translation_mm[2],
            ),
        )
    }

    /// Elevation of camera `cam` at tilt position `tilt`, radians.
    pub fn elevation(&self, cam: usize, tilt: usize) -> f64 {
        (self.tilt_angles_deg[tilt] + cam as f64 * self.camera_offset_deg).to_radians()
    }

    /// Ground-truth base pose (world-to-camera at angle zero) of one
    /// placement: the camera sits on a ring of radius `ring_radius_mm`
    /// around the look-at point, image y pointing down.
    pub fn base_pose(&self, cam: usize, tilt: usize) -> Pose {
        let phi = self.elevation(cam, tilt);
        let look_at = Vec3::new(0.0, self.look_height_mm, 0.0);
        let center = look_at + Vec3::new(0.0, phi.sin(), phi.cos()) * self.ring_radius_mm;
        let forward = (look_at - center).normalized().unwrap();
        let x_cam = Vec3::new(0.0, -1.0, 0.0)
            .cross(&forward)
            .normalized()
            .expect("camera must not look straight down");
        let y_cam = forward.cross(&x_cam);
        let rotation = Mat3::from_rows(x_cam, y_cam, forward);
        let translation = -(rotation * center);
        Pose::new(rotation, translation)
    }

    /// The complete ground-truth calibration for this rig.
    pub fn ground_truth(&self) -> RigCalibration {
        let mut units = Vec::new();
        for cam in 0..self.num_cameras() {
            for tilt in 0..self.tilt_angles_deg.len() {
                units.push(RigUnit {
                    camera: cam,
                    tilt,
                    base: self.base_pose(cam, tilt),
                });
            }
        }
        units.sort_by_key(|u| (u.camera, u.tilt));
        RigCalibration {
            cameras: self.cameras.iter().map(|&c| c.into()).collect(),
            units,
            target_zero: self.target_pose(),
            pan_angles: (0..self.pans).map(|i| self.pan_angle(i)).collect(),
            residual_rms: 0.0,
        }
    }
}

/// Standard-normal sample by Box-Muller.
pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Project the chessboard through the ground-truth rig.
///
/// A view is kept when the whole board faces the camera within the facing
/// limit and every corner lands inside the image with positive depth;
/// Gaussian pixel noise of `sigma_px` is then added. Returns the
/// observations plus the ground truth they were generated from.
pub fn render_corner_observations(
    spec: &RigSpec,
    target: &TargetModel,
    sigma_px: f64,
    seed: u64,
) -> Result<(CornerObservations, RigCalibration), SynthError> {
    let truth = spec.ground_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let facing_cos = spec.facing_limit_deg.to_radians().cos();
    let t0 = spec.target_pose();
    // Board normal and centre in world coordinates (fixed to the table).
    let normal_w = t0.rotation * Vec3::new(0.0, 0.0, 1.0);
    let mut center_b = Vec3::zeros();
    for c in 0..target.num_corners() {
        center_b += target.corner_position(c);
    }
    let center_w = t0.apply(&(center_b / target.num_corners() as f64));

    let mut seen_per_camera = vec![false; spec.num_cameras()];
    for unit in &truth.units {
        for pan in 0..spec.pans {
            let theta = spec.pan_angle(pan);
            let cam_pose = unit.base.compose(&Pose::rotation_only(rot_y(theta)));
            let cam_center = cam_pose.origin_in_source();
            let to_cam = (cam_center - center_w).normalized().unwrap();
            if normal_w.dot(&to_cam) < facing_cos {
                continue;
            }
            let cam_from_target = cam_pose.compose(&t0);
            let k = truth.cameras[unit.camera];
            let mut view: Vec<CornerRecord> = Vec::with_capacity(target.num_corners());
            let mut all_visible = true;
            for corner in 0..target.num_corners() {
                let p_cam = cam_from_target.apply(&target.corner_position(corner));
                let Ok(uv) = k.project(&p_cam) else {
                    all_visible = false;
                    break;
                };
                if uv[0] < 0.0
                    || uv[1] < 0.0
                    || uv[0] >= spec.image_width as f64
                    || uv[1] >= spec.image_height as f64
                {
                    all_visible = false;
                    break;
                }
                view.push(CornerRecord {
                    camera: unit.camera,
                    tilt: unit.tilt,
                    pan,
                    pan_angle: theta,
                    corner,
                    uv,
                });
            }
            if all_visible {
                seen_per_camera[unit.camera] = true;
                for mut r in view {
                    if sigma_px > 0.0 {
                        r.uv[0] += sigma_px * gaussian(&mut rng);
                        r.uv[1] += sigma_px * gaussian(&mut rng);
                    }
                    records.push(r);
                }
            }
        }
    }
    if let Some(camera) = seen_per_camera.iter().position(|&s| !s) {
        return Err(SynthError::TargetNeverVisible { camera });
    }
    Ok((CornerObservations::new(records), truth))
}

/// The screw motion about the world y-axis relating two calibrations of the
/// same rig (the gauge freedom of a turntable world frame).
#[derive(Debug, Clone, Copy)]
pub struct GaugeTransform {
    /// Rotation about +y, radians.
    pub psi: f64,
    /// Translation along +y, mm.
    pub delta: f64,
}

impl GaugeTransform {
    pub fn pose(&self) -> Pose {
        Pose::new(rot_y(self.psi), Vec3::new(0.0, self.delta, 0.0))
    }
}

/// Estimate the gauge aligning `recovered` onto `truth` from their shared
/// placements (least-squares over per-unit estimates).
pub fn align_gauge(recovered: &RigCalibration, truth: &RigCalibration) -> GaugeTransform {
    let mut sin_sum = 0.0;
    let mut cos_sum = 0.0;
    let mut delta_sum = 0.0;
    let mut count = 0.0;
    for ru in &recovered.units {
        let Ok(tu) = truth.unit(ru.camera, ru.tilt) else {
            continue;
        };
        let g = ru.base.inverse().compose(&tu.base);
        let r = &g.rotation.0;
        let psi = (r[0][2] - r[2][0]).atan2(r[0][0] + r[2][2]);
        sin_sum += psi.sin();
        cos_sum += psi.cos();
        delta_sum += g.translation[1];
        count += 1.0;
    }
    GaugeTransform {
        psi: sin_sum.atan2(cos_sum),
        delta: delta_sum / count.max(1.0),
    }
}

/// Re-express a calibration in the gauge-aligned world frame.
pub fn apply_gauge(rig: &RigCalibration, gauge: &GaugeTransform) -> RigCalibration {
    let g = gauge.pose();
    let g_inv = g.inverse();
    let mut out = rig.clone();
    for u in &mut out.units {
        u.base = u.base.compose(&g);
    }
    out.target_zero = g_inv.compose(&rig.target_zero);
    out
}
