//! Calibration report file: a TOML document with named fields that
//! round-trips losslessly through load/save.

use super::{CalibError, RigCalibration, RigUnit};
use crate::{Pose, RotVec, Vec3};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraEntry {
    pub id: usize,
    pub f: f64,
    pub c_u: f64,
    pub c_v: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoseEntry {
    /// Angle-axis rotation vector, radians.
    pub rotation_axis_angle: [f64; 3],
    pub translation_mm: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UnitEntry {
    pub camera: usize,
    pub tilt: usize,
    pub base: PoseEntry,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalibrationReport {
    pub residual_rms_px: f64,
    pub pan_angles_deg: Vec<f64>,
    pub cameras: Vec<CameraEntry>,
    pub units: Vec<UnitEntry>,
    pub target_zero: PoseEntry,
}

fn pose_entry(p: &Pose) -> PoseEntry {
    let rv = p.rotvec();
    PoseEntry {
        rotation_axis_angle: [rv.0[0], rv.0[1], rv.0[2]],
        translation_mm: [p.translation[0], p.translation[1], p.translation[2]],
    }
}

fn entry_pose(e: &PoseEntry) -> Pose {
    Pose::from_rotvec(
        RotVec::new(
            e.rotation_axis_angle[0],
            e.rotation_axis_angle[1],
            e.rotation_axis_angle[2],
        ),
        Vec3::new(e.translation_mm[0], e.translation_mm[1], e.translation_mm[2]),
    )
}

pub fn rig_to_report(rig: &RigCalibration) -> CalibrationReport {
    CalibrationReport {
        residual_rms_px: rig.residual_rms,
        pan_angles_deg: rig.pan_angles.iter().map(|a| a.to_degrees()).collect(),
        cameras: rig
            .cameras
            .iter()
            .enumerate()
            .map(|(id, k)| CameraEntry {
                id,
                f: k.f,
                c_u: k.c_u,
                c_v: k.c_v,
                d1: k.d1,
                d2: k.d2,
            })
            .collect(),
        units: rig
            .units
            .iter()
            .map(|u| UnitEntry {
                camera: u.camera,
                tilt: u.tilt,
                base: pose_entry(&u.base),
            })
            .collect(),
        target_zero: pose_entry(&rig.target_zero),
    }
}

pub fn rig_from_report(report: &CalibrationReport) -> RigCalibration {
    let mut cameras = report.cameras.clone();
    cameras.sort_by_key(|c| c.id);
    RigCalibration {
        cameras: cameras
            .iter()
            .map(|c| crate::CameraIntrinsics::new(c.f, c.c_u, c.c_v, c.d1, c.d2))
            .collect(),
        units: report
            .units
            .iter()
            .map(|u| RigUnit {
                camera: u.camera,
                tilt: u.tilt,
                base: entry_pose(&u.base),
            })
            .collect(),
        target_zero: entry_pose(&report.target_zero),
        pan_angles: report
            .pan_angles_deg
            .iter()
            .map(|a| a.to_radians())
            .collect(),
        residual_rms: report.residual_rms_px,
    }
}

impl CalibrationReport {
    pub fn save(&self, path: &Path) -> Result<(), CalibError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CalibError::NonConvergence(format!("report serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CalibError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| CalibError::ParseError {
            path: path.display().to_string(),
            line: e.span().map(|s| s.start).unwrap_or(0),
            detail: e.message().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> CalibrationReport {
        CalibrationReport {
            residual_rms_px: 0.123456789012345,
            pan_angles_deg: vec![0.0, 10.0, 20.000000000000004],
            cameras: vec![CameraEntry {
                id: 0,
                f: 1200.5,
                c_u: 516.3,
                c_v: 508.7,
                d1: -0.061234567890123,
                d2: 0.012,
            }],
            units: vec![UnitEntry {
                camera: 0,
                tilt: 0,
                base: PoseEntry {
                    rotation_axis_angle: [0.1, -0.987654321098765, 3.0e-17],
                    translation_mm: [1.0 / 3.0, -500.0, 2.0f64.sqrt()],
                },
            }],
            target_zero: PoseEntry {
                rotation_axis_angle: [0.0, 0.0, 0.0],
                translation_mm: [0.0, 150.0, -20.0],
            },
        }
    }

    #[test]
    fn report_round_trips_losslessly() {
        let dir = std::env::temp_dir().join("phenoscan_report_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("calib.toml");
        let report = sample_report();
        report.save(&path).unwrap();
        let back = CalibrationReport::load(&path).unwrap();
        assert_eq!(back, report);
        // Save again: byte-identical (no timestamps, stable ordering).
        let first = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn rig_conversion_preserves_poses_numerically() {
        let report = sample_report();
        let rig = rig_from_report(&report);
        let report2 = rig_to_report(&rig);
        let rig2 = rig_from_report(&report2);
        assert!(rig.units[0].base.rotation_distance(&rig2.units[0].base) < 1e-12);
        assert!(rig.units[0].base.translation_distance(&rig2.units[0].base) < 1e-12);
        assert_eq!(report.cameras, report2.cameras);
    }
}
