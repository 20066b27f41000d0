//! Turntable rig calibration.
//!
//! Recovers per-camera intrinsics and the pose of every (camera, tilt)
//! placement relative to a world frame fixed to the turntable axis:
//!
//! 1. Mono calibration per physical camera (planar-target closed form, then
//!    nonlinear refinement adding radial distortion).
//! 2. Orbit-plane and circle fitting on corner trajectories to locate the
//!    rotation axis, defining the world frame (origin at the orbit centre,
//!    +y along the axis).
//! 3. Stereo chaining of the remaining placements to the reference one.
//! 4. Joint refinement of all intrinsics, placement poses, and the target's
//!    zero-angle pose against every observed corner.
//!
//! All fitting functions are pure; per-view residual evaluation runs in
//! parallel inside the optimizer.

mod axis;
mod mono;
mod obsfile;
mod refine;
mod report;
mod stereo;

pub use axis::{
    axis_alignment, derive_world_pose, fit_circle, fit_orbit_plane, target_zero_pose,
    AxisEstimate,
};
pub use mono::{calibrate_mono, MonoCalibration};
pub use obsfile::{read_corner_file, write_corner_file};
pub use refine::{refine_all, RefineReport};
pub use report::{rig_from_report, rig_to_report, CalibrationReport};
pub use stereo::{calibrate_stereo, mean_rotation, StereoResult};

use crate::geom::rot_y;
use crate::{CameraIntrinsics, Pose, Vec3};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum CalibError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("collinear points")]
    CollinearPoints,
    #[error("no shared views between placements (camera {0}, tilt {1})")]
    NoSharedViews(usize, usize),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("optimization did not converge: {0}")]
    NonConvergence(String),
    #[error("unknown (camera, tilt) placement ({0}, {1})")]
    UnknownUnit(usize, usize),
    #[error("{path}:{line}: {detail}")]
    ParseError {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Planar chessboard model: `rows x cols` corners on a Z = 0 grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TargetModel {
    pub rows: usize,
    pub cols: usize,
    pub square_mm: f64,
}

impl TargetModel {
    pub fn new(rows: usize, cols: usize, square_mm: f64) -> Self {
        assert!(rows >= 3 && cols >= 3, "target needs at least a 3x3 grid");
        assert!(square_mm > 0.0);
        Self {
            rows,
            cols,
            square_mm,
        }
    }

    pub fn num_corners(&self) -> usize {
        self.rows * self.cols
    }

    /// Corner `id` position in the target frame (mm), `id = row * cols + col`.
    pub fn corner_position(&self, id: usize) -> Vec3 {
        let row = id / self.cols;
        let col = id % self.cols;
        Vec3::new(col as f64 * self.square_mm, row as f64 * self.square_mm, 0.0)
    }
}

/// One detected corner in one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerRecord {
    pub camera: usize,
    pub tilt: usize,
    pub pan: usize,
    /// Turntable angle for this pan index, radians.
    pub pan_angle: f64,
    pub corner: usize,
    pub uv: [f64; 2],
}

/// Flat list of corner detections over the whole scan.
#[derive(Debug, Clone, Default)]
pub struct CornerObservations {
    pub records: Vec<CornerRecord>,
}

/// Identifier of one image: camera, tilt position, pan index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ViewKey {
    pub camera: usize,
    pub tilt: usize,
    pub pan: usize,
}

/// All corners of one image.
#[derive(Debug, Clone)]
pub struct ViewObs {
    pub key: ViewKey,
    pub pan_angle: f64,
    /// (corner id, pixel coordinates)
    pub corners: Vec<(usize, [f64; 2])>,
}

impl CornerObservations {
    pub fn new(records: Vec<CornerRecord>) -> Self {
        Self { records }
    }

    /// Group records into per-image views, sorted by (camera, tilt, pan).
    pub fn views(&self) -> Vec<ViewObs> {
        let mut map: BTreeMap<ViewKey, ViewObs> = BTreeMap::new();
        for r in &self.records {
            let key = ViewKey {
                camera: r.camera,
                tilt: r.tilt,
                pan: r.pan,
            };
            map.entry(key)
                .or_insert_with(|| ViewObs {
                    key,
                    pan_angle: r.pan_angle,
                    corners: Vec::new(),
                })
                .corners
                .push((r.corner, r.uv));
        }
        map.into_values().collect()
    }

    /// Check structural invariants: corner ids exist in the target and pan
    /// angles are strictly increasing along each (camera, tilt) revolution.
    pub fn validate(&self, target: &TargetModel) -> Result<(), CalibError> {
        for r in &self.records {
            if r.corner >= target.num_corners() {
                return Err(CalibError::EmptyInput(format!(
                    "corner id {} outside the {}x{} target",
                    r.corner, target.rows, target.cols
                )));
            }
        }
        let mut per_rev: BTreeMap<(usize, usize), BTreeMap<usize, f64>> = BTreeMap::new();
        for r in &self.records {
            per_rev
                .entry((r.camera, r.tilt))
                .or_default()
                .insert(r.pan, r.pan_angle);
        }
        for ((cam, tilt), angles) in per_rev {
            let mut prev: Option<(usize, f64)> = None;
            for (pan, angle) in angles {
                if let Some((ppan, pangle)) = prev {
                    if angle <= pangle {
                        return Err(CalibError::EmptyInput(format!(
                            "pan angles not strictly increasing for camera {cam} tilt {tilt}: \
                             pan {ppan} at {pangle} rad, pan {pan} at {angle} rad"
                        )));
                    }
                }
                prev = Some((pan, angle));
            }
        }
        Ok(())
    }
}

/// One calibrated camera placement.
#[derive(Debug, Clone, Copy)]
pub struct RigUnit {
    pub camera: usize,
    pub tilt: usize,
    /// World-to-camera pose at turntable angle zero.
    pub base: Pose,
}

/// Full rig calibration: everything needed to pose any image of a scan.
#[derive(Debug, Clone)]
pub struct RigCalibration {
    /// Intrinsics per physical camera id.
    pub cameras: Vec<CameraIntrinsics>,
    /// Placement poses, sorted by (camera, tilt).
    pub units: Vec<RigUnit>,
    /// Target pose in the world frame at turntable angle zero.
    pub target_zero: Pose,
    /// Turntable angle per pan index, radians.
    pub pan_angles: Vec<f64>,
    /// Reprojection RMS of the final refinement, pixels.
    pub residual_rms: f64,
}

impl RigCalibration {
    pub fn unit(&self, camera: usize, tilt: usize) -> Result<&RigUnit, CalibError> {
        self.units
            .iter()
            .find(|u| u.camera == camera && u.tilt == tilt)
            .ok_or(CalibError::UnknownUnit(camera, tilt))
    }

    /// World-to-camera pose of a placement at turntable angle `theta`:
    /// the base pose right-composed with a pure rotation about world +y.
    pub fn camera_pose_at(
        &self,
        camera: usize,
        tilt: usize,
        theta: f64,
    ) -> Result<Pose, CalibError> {
        assert!(theta.is_finite());
        let unit = self.unit(camera, tilt)?;
        Ok(unit.base.compose(&Pose::rotation_only(rot_y(theta))))
    }

    /// Camera-to-target pose predicted for a view; gauge-invariant, used by
    /// closure tests and diagnostics.
    pub fn camera_to_target(
        &self,
        camera: usize,
        tilt: usize,
        theta: f64,
    ) -> Result<Pose, CalibError> {
        Ok(self
            .camera_pose_at(camera, tilt, theta)?
            .compose(&self.target_zero))
    }
}

/// Options for the full calibration chain.
#[derive(Debug, Clone)]
pub struct CalibrateOptions {
    /// Reference placement defining the world frame; defaults to the first
    /// (camera, tilt) present.
    pub reference: Option<(usize, usize)>,
    /// Minimum shared pans for a usable stereo link.
    pub min_shared_pans: usize,
    pub lm: crate::optim::LmOptions,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self {
            reference: None,
            min_shared_pans: 1,
            lm: crate::optim::LmOptions::default(),
        }
    }
}

/// Diagnostics from the full chain.
#[derive(Debug, Clone)]
pub struct CalibrationDiagnostics {
    pub mono_rms: Vec<(usize, f64)>,
    pub stereo_spread: Vec<((usize, usize), f64)>,
    pub zero_pose_rotation_spread: f64,
    pub zero_pose_translation_spread: f64,
    pub refine: RefineReport,
}

/// Run the complete calibration chain on one scan's corner observations.
pub fn calibrate_full(
    target: &TargetModel,
    obs: &CornerObservations,
    opts: &CalibrateOptions,
) -> Result<(RigCalibration, CalibrationDiagnostics), CalibError> {
    obs.validate(target)?;
    let views = obs.views();
    if views.is_empty() {
        return Err(CalibError::EmptyInput("no views".into()));
    }

    // Pan-angle table (shared across revolutions).
    let mut pan_angles: BTreeMap<usize, f64> = BTreeMap::new();
    for v in &views {
        pan_angles.entry(v.key.pan).or_insert(v.pan_angle);
    }
    let max_pan = *pan_angles.keys().max().unwrap();
    let mut pan_table = vec![f64::NAN; max_pan + 1];
    for (pan, angle) in &pan_angles {
        pan_table[*pan] = *angle;
    }

    // 1. Mono calibration per physical camera.
    let camera_ids: Vec<usize> = {
        let mut ids: Vec<usize> = views.iter().map(|v| v.key.camera).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    if camera_ids.iter().enumerate().any(|(i, &c)| i != c) {
        return Err(CalibError::EmptyInput(
            "camera ids must be contiguous from 0".into(),
        ));
    }
    let mut cameras = Vec::new();
    let mut mono_rms = Vec::new();
    // Per-view camera-to-target poses from mono calibration.
    let mut view_poses: BTreeMap<ViewKey, Pose> = BTreeMap::new();
    for &cam in &camera_ids {
        let cam_views: Vec<&ViewObs> = views.iter().filter(|v| v.key.camera == cam).collect();
        let mono = calibrate_mono(target, &cam_views, &opts.lm)?;
        mono_rms.push((cam, mono.rms));
        cameras.push(mono.intrinsics);
        for (v, pose) in cam_views.iter().zip(&mono.view_poses) {
            view_poses.insert(v.key, *pose);
        }
    }

    // 2. Axis estimation on the reference placement.
    let unit_keys: Vec<(usize, usize)> = {
        let mut k: Vec<(usize, usize)> = views.iter().map(|v| (v.key.camera, v.key.tilt)).collect();
        k.sort_unstable();
        k.dedup();
        k
    };
    let reference = opts.reference.unwrap_or(unit_keys[0]);
    if !unit_keys.contains(&reference) {
        return Err(CalibError::UnknownUnit(reference.0, reference.1));
    }
    let ref_views: Vec<&ViewObs> = views
        .iter()
        .filter(|v| (v.key.camera, v.key.tilt) == reference)
        .collect();
    let ref_base = axis::reference_world_pose(target, &ref_views, &view_poses)?;

    // 3. Chain every other placement to the reference via stereo links.
    let bases = chain_placements(
        &unit_keys,
        reference,
        ref_base,
        &views,
        &view_poses,
        opts.min_shared_pans,
    )?;
    let mut stereo_spread = Vec::new();
    for (key, (_, spread)) in &bases {
        if *key != reference {
            stereo_spread.push((*key, *spread));
        }
    }

    // 4. Target zero pose consensus over all views.
    let mut zero_estimates = Vec::new();
    for v in &views {
        let base = bases[&(v.key.camera, v.key.tilt)].0;
        let world_target = base.inverse().compose(&view_poses[&v.key]);
        zero_estimates.push((world_target, v.pan_angle));
    }
    let (target_zero, rot_spread, trans_spread) = target_zero_pose(&zero_estimates)?;

    let units: Vec<RigUnit> = unit_keys
        .iter()
        .map(|&(camera, tilt)| RigUnit {
            camera,
            tilt,
            base: bases[&(camera, tilt)].0,
        })
        .collect();

    let rig = RigCalibration {
        cameras,
        units,
        target_zero,
        pan_angles: pan_table,
        residual_rms: f64::NAN,
    };

    // 5. Joint refinement.
    let (rig, refine_report) = refine_all(rig, target, obs, &opts.lm)?;

    let diagnostics = CalibrationDiagnostics {
        mono_rms,
        stereo_spread,
        zero_pose_rotation_spread: rot_spread,
        zero_pose_translation_spread: trans_spread,
        refine: refine_report,
    };
    Ok((rig, diagnostics))
}

type BaseMap = BTreeMap<(usize, usize), (Pose, f64)>;

/// Breadth-first stereo chaining from the reference placement.
fn chain_placements(
    unit_keys: &[(usize, usize)],
    reference: (usize, usize),
    ref_base: Pose,
    views: &[ViewObs],
    view_poses: &BTreeMap<ViewKey, Pose>,
    min_shared: usize,
) -> Result<BaseMap, CalibError> {
    let mut bases: BaseMap = BTreeMap::new();
    bases.insert(reference, (ref_base, 0.0));

    // Per-placement pan -> camera-to-target pose.
    let mut by_unit: BTreeMap<(usize, usize), BTreeMap<usize, Pose>> = BTreeMap::new();
    for v in views {
        by_unit
            .entry((v.key.camera, v.key.tilt))
            .or_default()
            .insert(v.key.pan, view_poses[&v.key]);
    }

    let mut frontier = vec![reference];
    while let Some(current) = frontier.pop() {
        let current_views = &by_unit[&current];
        let (current_base, _) = bases[&current];
        for &other in unit_keys {
            if bases.contains_key(&other) {
                continue;
            }
            let other_views = &by_unit[&other];
            let shared: Vec<usize> = current_views
                .keys()
                .filter(|p| other_views.contains_key(p))
                .copied()
                .collect();
            if shared.len() < min_shared {
                continue;
            }
            let pairs: Vec<(Pose, Pose)> = shared
                .iter()
                .map(|p| (current_views[p], other_views[p]))
                .collect();
            let stereo = calibrate_stereo(&pairs)?;
            bases.insert(
                other,
                (stereo.relative.compose(&current_base), stereo.rotation_spread),
            );
            frontier.push(other);
        }
    }

    if let Some(&(cam, tilt)) = unit_keys.iter().find(|k| !bases.contains_key(k)) {
        return Err(CalibError::NoSharedViews(cam, tilt));
    }
    Ok(bases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_corner_layout() {
        let t = TargetModel::new(7, 10, 20.0);
        assert_eq!(t.num_corners(), 70);
        assert_eq!(t.corner_position(0), Vec3::new(0.0, 0.0, 0.0));
        assert_eq!(t.corner_position(10), Vec3::new(0.0, 20.0, 0.0));
        assert_eq!(t.corner_position(9), Vec3::new(180.0, 0.0, 0.0));
    }

    #[test]
    fn views_are_grouped_and_sorted() {
        let mk = |camera, tilt, pan, corner| CornerRecord {
            camera,
            tilt,
            pan,
            pan_angle: pan as f64 * 0.1,
            corner,
            uv: [0.0, 0.0],
        };
        let obs = CornerObservations::new(vec![
            mk(1, 0, 2, 0),
            mk(0, 0, 1, 3),
            mk(0, 0, 1, 4),
            mk(0, 1, 0, 1),
        ]);
        let views = obs.views();
        assert_eq!(views.len(), 3);
        assert_eq!(views[0].key, ViewKey { camera: 0, tilt: 0, pan: 1 });
        assert_eq!(views[0].corners.len(), 2);
        assert_eq!(views[2].key.camera, 1);
    }

    #[test]
    fn validate_rejects_nonmonotone_pan_angles() {
        let mk = |pan, angle| CornerRecord {
            camera: 0,
            tilt: 0,
            pan,
            pan_angle: angle,
            corner: 0,
            uv: [0.0, 0.0],
        };
        let target = TargetModel::new(3, 3, 10.0);
        let good = CornerObservations::new(vec![mk(0, 0.0), mk(1, 0.2)]);
        assert!(good.validate(&target).is_ok());
        let bad = CornerObservations::new(vec![mk(0, 0.3), mk(1, 0.2)]);
        assert!(bad.validate(&target).is_err());
    }

    #[test]
    fn camera_pose_at_zero_and_full_turn() {
        let base = Pose::from_rotvec(
            crate::geom::RotVec::new(0.1, 0.2, -0.3),
            Vec3::new(10.0, 20.0, 500.0),
        );
        let rig = RigCalibration {
            cameras: vec![],
            units: vec![RigUnit {
                camera: 0,
                tilt: 0,
                base,
            }],
            target_zero: Pose::identity(),
            pan_angles: vec![0.0],
            residual_rms: 0.0,
        };
        let at0 = rig.camera_pose_at(0, 0, 0.0).unwrap();
        assert!(base.rotation_distance(&at0) < 1e-15);
        let full = rig.camera_pose_at(0, 0, std::f64::consts::TAU).unwrap();
        assert!(base.rotation_distance(&full) < 1e-9);
        assert!(base.translation_distance(&full) < 1e-9);
        assert!(rig.camera_pose_at(0, 1, 0.0).is_err());
    }
}
