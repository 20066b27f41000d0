//! Scene directory emission: every artifact the pipeline consumes, generated
//! from specs, laid out the way the CLI expects.

use super::{make_plant_mesh, render_corner_observations, render_silhouette, RigSpec, SceneSpec, SynthError};
use crate::calib::{rig_to_report, write_corner_file, TargetModel};
use crate::geom::rot_y;
use crate::silhouette::pnm;
use crate::Pose;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Canonical file layout of a generated (or scanned) scene directory.
#[derive(Debug, Clone)]
pub struct SceneLayout {
    pub root: PathBuf,
}

impl SceneLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn corners(&self) -> PathBuf {
        self.root.join("corners.txt")
    }

    pub fn truth_calibration(&self) -> PathBuf {
        self.root.join("calibration_truth.toml")
    }

    pub fn truth_table(&self) -> PathBuf {
        self.root.join("truth.csv")
    }

    pub fn masks_dir(&self) -> PathBuf {
        self.root.join("masks")
    }

    pub fn mask_path(&self, camera: usize, tilt: usize, pan: usize) -> PathBuf {
        self.masks_dir()
            .join(format!("cam{camera}_tilt{tilt}_pan{pan:03}.pgm"))
    }

    pub fn plant_mesh(&self) -> PathBuf {
        self.root.join("plant_truth.ply")
    }
}

#[derive(Debug, Clone)]
pub struct EmitSummary {
    pub corner_records: usize,
    pub masks_written: Vec<(usize, usize, usize)>,
}

/// Generate a complete scene directory: chessboard observations over the
/// full tilt set, plant silhouette masks for the requested scan tilts, the
/// ground-truth calibration, the plant mesh, and the leaf truth table.
pub fn emit_scene(
    layout: &SceneLayout,
    rig: &RigSpec,
    scan_tilts: &[usize],
    scene: &SceneSpec,
    target: &TargetModel,
    corner_noise_px: f64,
    seed: u64,
) -> Result<EmitSummary, SynthError> {
    std::fs::create_dir_all(layout.masks_dir())?;

    let (obs, truth_rig) = render_corner_observations(rig, target, corner_noise_px, seed)?;
    write_corner_file(&layout.corners(), &obs).map_err(|e| {
        SynthError::Io(std::io::Error::other(e.to_string()))
    })?;
    rig_to_report(&truth_rig)
        .save(&layout.truth_calibration())
        .map_err(|e| SynthError::Io(std::io::Error::other(e.to_string())))?;

    let (mesh, truth) = make_plant_mesh(scene)?;
    truth.save_csv(&layout.truth_table())?;
    crate::mesh::write_ply(&layout.plant_mesh(), &mesh)
        .map_err(|e| SynthError::Io(std::io::Error::other(e.to_string())))?;

    // Every (camera, scan tilt, pan) silhouette, in parallel.
    let mut jobs = Vec::new();
    for cam in 0..rig.num_cameras() {
        for &tilt in scan_tilts {
            assert!(
                tilt < rig.tilt_angles_deg.len(),
                "scan tilt {tilt} outside the rig's tilt list"
            );
            for pan in 0..rig.pans {
                jobs.push((cam, tilt, pan));
            }
        }
    }
    let results: Vec<Result<(usize, usize, usize), SynthError>> = jobs
        .par_iter()
        .map(|&(cam, tilt, pan)| {
            let base = truth_rig.unit(cam, tilt).expect("unit exists").base;
            let pose = base.compose(&Pose::rotation_only(rot_y(rig.pan_angle(pan))));
            let mask = render_silhouette(
                &mesh,
                &pose,
                &truth_rig.cameras[cam],
                rig.image_width,
                rig.image_height,
            )?;
            pnm::write_mask(&layout.mask_path(cam, tilt, pan), &mask)
                .map_err(|e| SynthError::Io(std::io::Error::other(e.to_string())))?;
            Ok((cam, tilt, pan))
        })
        .collect();

    let mut masks_written = Vec::new();
    for r in results {
        masks_written.push(r?);
    }
    masks_written.sort_unstable();

    Ok(EmitSummary {
        corner_records: obs.records.len(),
        masks_written,
    })
}

/// Silhouette masks rendered in memory for one scan configuration, keyed by
/// (camera, tilt, pan). Used by tests and the in-process evaluation path.
pub fn render_scan_masks(
    rig: &RigSpec,
    scan_tilts: &[usize],
    mesh: &crate::mesh::TriMesh,
) -> Result<Vec<((usize, usize, usize), crate::silhouette::SilhouetteMask)>, SynthError> {
    let truth_rig = rig.ground_truth();
    let mut jobs = Vec::new();
    for cam in 0..rig.num_cameras() {
        for &tilt in scan_tilts {
            for pan in 0..rig.pans {
                jobs.push((cam, tilt, pan));
            }
        }
    }
    jobs.par_iter()
        .map(|&(cam, tilt, pan)| {
            let base = truth_rig.unit(cam, tilt).expect("unit exists").base;
            let pose = base.compose(&Pose::rotation_only(rot_y(rig.pan_angle(pan))));
            let mask = render_silhouette(
                mesh,
                &pose,
                &truth_rig.cameras[cam],
                rig.image_width,
                rig.image_height,
            )?;
            Ok(((cam, tilt, pan), mask))
        })
        .collect()
}
