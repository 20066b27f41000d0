//! Joint nonlinear refinement of the full rig.
//!
//! Optimizes per-camera intrinsics (5 each), per-placement pose 6-vectors,
//! and the target zero pose (6) against reprojection residuals of every
//! observed corner. Pan angles are trusted as exact inputs. The world-frame
//! gauge (screw motions about the turntable axis) is unobservable by
//! construction; damping handles the rank deficiency and the report counts
//! the near-null directions.

use super::mono::{push_pose, read_pose, reprojection_residual};
use super::{CalibError, CornerObservations, RigCalibration, TargetModel, ViewObs};
use crate::geom::rot_y;
use crate::optim::{self, BlockProblem, LmOptions};
use crate::{CameraIntrinsics, Pose};

#[derive(Debug, Clone)]
pub struct RefineReport {
    pub initial_rms: f64,
    pub final_rms: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    /// Near-null directions of the normal matrix (2 is the expected
    /// turntable gauge: rotation about and translation along the axis).
    pub unobservable_directions: usize,
    /// Per-view RMS, sorted by (camera, tilt, pan).
    pub per_view_rms: Vec<(super::ViewKey, f64)>,
}

struct JointProblem<'a> {
    target: &'a TargetModel,
    views: &'a [ViewObs],
    /// (camera, tilt) -> unit index, aligned with the rig's unit order.
    unit_of_view: Vec<usize>,
    num_cameras: usize,
    num_units: usize,
}

impl JointProblem<'_> {
    fn intr_at(&self, params: &[f64], camera: usize) -> CameraIntrinsics {
        let o = camera * 5;
        CameraIntrinsics::new(params[o], params[o + 1], params[o + 2], params[o + 3], params[o + 4])
    }
    fn unit_offset(&self, unit: usize) -> usize {
        self.num_cameras * 5 + unit * 6
    }
    fn t0_offset(&self) -> usize {
        self.num_cameras * 5 + self.num_units * 6
    }
}

impl BlockProblem for JointProblem<'_> {
    fn num_params(&self) -> usize {
        self.num_cameras * 5 + self.num_units * 6 + 6
    }
    fn num_blocks(&self) -> usize {
        self.views.len()
    }
    fn block_len(&self, b: usize) -> usize {
        self.views[b].corners.len() * 2
    }
    fn block_params(&self, b: usize) -> Vec<usize> {
        let v = &self.views[b];
        let mut p: Vec<usize> = (v.key.camera * 5..v.key.camera * 5 + 5).collect();
        let uo = self.unit_offset(self.unit_of_view[b]);
        p.extend(uo..uo + 6);
        let to = self.t0_offset();
        p.extend(to..to + 6);
        p
    }
    fn eval_block(&self, b: usize, params: &[f64], out: &mut [f64]) {
        let v = &self.views[b];
        let k = self.intr_at(params, v.key.camera);
        let base = read_pose(params, self.unit_offset(self.unit_of_view[b]));
        let t0 = read_pose(params, self.t0_offset());
        // Camera-from-target at this turntable angle.
        let cam_from_target = base
            .compose(&Pose::rotation_only(rot_y(v.pan_angle)))
            .compose(&t0);
        for (i, &(corner, uv)) in v.corners.iter().enumerate() {
            let p_cam = cam_from_target.apply(&self.target.corner_position(corner));
            reprojection_residual(&k, &p_cam, uv, &mut out[2 * i..2 * i + 2]);
        }
    }
}

/// Refine a full initial rig estimate in place; never increases the RMS.
pub fn refine_all(
    rig: RigCalibration,
    target: &TargetModel,
    obs: &CornerObservations,
    lm: &LmOptions,
) -> Result<(RigCalibration, RefineReport), CalibError> {
    let views = obs.views();
    if views.is_empty() {
        return Err(CalibError::EmptyInput("no observations to refine against".into()));
    }
    let unit_index = |camera: usize, tilt: usize| -> Result<usize, CalibError> {
        rig.units
            .iter()
            .position(|u| u.camera == camera && u.tilt == tilt)
            .ok_or(CalibError::UnknownUnit(camera, tilt))
    };
    let unit_of_view = views
        .iter()
        .map(|v| unit_index(v.key.camera, v.key.tilt))
        .collect::<Result<Vec<_>, _>>()?;

    let problem = JointProblem {
        target,
        views: &views,
        unit_of_view,
        num_cameras: rig.cameras.len(),
        num_units: rig.units.len(),
    };

    let mut x0 = Vec::with_capacity(problem.num_params());
    for k in &rig.cameras {
        x0.extend_from_slice(&[k.f, k.c_u, k.c_v, k.d1, k.d2]);
    }
    for u in &rig.units {
        push_pose(&mut x0, &u.base);
    }
    push_pose(&mut x0, &rig.target_zero);

    let opts = LmOptions {
        diagnose_rank: true,
        ..lm.clone()
    };
    let (x, lm_report) = optim::solve(&problem, &x0, &opts);
    let m: usize = views.iter().map(|v| v.corners.len() * 2).sum();

    let mut refined = rig;
    for (c, k) in refined.cameras.iter_mut().enumerate() {
        *k = problem.intr_at(&x, c);
    }
    for (u, unit) in refined.units.iter_mut().enumerate() {
        unit.base = read_pose(&x, problem.unit_offset(u));
    }
    refined.target_zero = read_pose(&x, problem.t0_offset());
    refined.residual_rms = optim::rms(lm_report.final_cost, m);

    // Per-view residual statistics at the solution.
    let mut per_view_rms = Vec::with_capacity(views.len());
    let mut buf = Vec::new();
    for (b, v) in views.iter().enumerate() {
        buf.resize(problem.block_len(b), 0.0);
        problem.eval_block(b, &x, &mut buf);
        per_view_rms.push((v.key, optim::rms(buf.iter().map(|r| r * r).sum(), buf.len())));
    }

    let report = RefineReport {
        initial_rms: optim::rms(lm_report.initial_cost, m),
        final_rms: refined.residual_rms,
        iterations: lm_report.iterations,
        accepted_steps: lm_report.accepted_steps,
        unobservable_directions: lm_report.unobservable_directions.unwrap_or(0),
        per_view_rms,
    };
    Ok((refined, report))
}
