//! Single-camera calibration from planar-target views.
//!
//! Closed-form initialization: per-view homographies by normalized DLT,
//! intrinsics from the homography constraints specialized to a single focal
//! length and zero skew, extrinsics from the decomposed homographies. A
//! nonlinear reprojection refinement then adds the two radial distortion
//! coefficients and polishes everything jointly.

use super::{CalibError, TargetModel, ViewObs};
use crate::geom::nearest_rotation;
use crate::optim::{self, BlockProblem, LmOptions};
use crate::{CameraIntrinsics, Mat3, Pose, RotVec, Vec3};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct MonoCalibration {
    pub intrinsics: CameraIntrinsics,
    /// Camera-from-target pose per usable input view, in input order.
    pub view_poses: Vec<Pose>,
    /// Final reprojection RMS, pixels.
    pub rms: f64,
}

/// Calibrate one physical camera from all its target views.
pub fn calibrate_mono(
    target: &TargetModel,
    views: &[&ViewObs],
    lm: &LmOptions,
) -> Result<MonoCalibration, CalibError> {
    let usable: Vec<&ViewObs> = views
        .iter()
        .copied()
        .filter(|v| v.corners.len() >= 4 && !board_points_collinear(target, v))
        .collect();
    if usable.len() < 3 {
        return Err(CalibError::DegenerateGeometry(format!(
            "only {} usable views (need >= 3 with >= 4 non-collinear corners)",
            usable.len()
        )));
    }
    if usable.len() != views.len() {
        return Err(CalibError::DegenerateGeometry(
            "views with fewer than 4 usable corners present".into(),
        ));
    }

    let homographies: Vec<Mat3> = usable
        .iter()
        .map(|v| homography_dlt(target, v))
        .collect::<Result<_, _>>()?;

    let k0 = intrinsics_from_homographies(&homographies)?;
    let poses0: Vec<Pose> = homographies
        .iter()
        .map(|h| extrinsics_from_homography(&k0, h))
        .collect::<Result<_, _>>()?;

    // Joint refinement: intrinsics + distortion + per-view poses.
    let problem = MonoProblem {
        target,
        views: &usable,
    };
    let mut x0 = vec![k0.f, k0.c_u, k0.c_v, 0.0, 0.0];
    for p in &poses0 {
        push_pose(&mut x0, p);
    }
    let (x, report) = optim::solve(&problem, &x0, lm);
    let m: usize = usable.iter().map(|v| v.corners.len() * 2).sum();
    let rms = optim::rms(report.final_cost, m);

    let intrinsics = CameraIntrinsics::new(x[0], x[1], x[2], x[3], x[4]);
    let view_poses: Vec<Pose> = (0..usable.len()).map(|i| read_pose(&x, 5 + 6 * i)).collect();

    // Every corner must sit in front of the camera.
    for (v, pose) in usable.iter().zip(&view_poses) {
        for &(corner, _) in &v.corners {
            if pose.apply(&target.corner_position(corner)).z() <= 0.0 {
                return Err(CalibError::DegenerateGeometry(
                    "refined pose places corners behind the camera".into(),
                ));
            }
        }
    }

    Ok(MonoCalibration {
        intrinsics,
        view_poses,
        rms,
    })
}

pub(crate) fn push_pose(params: &mut Vec<f64>, pose: &Pose) {
    let rv = pose.rotvec();
    params.extend_from_slice(&[
        rv.0[0],
        rv.0[1],
        rv.0[2],
        pose.translation[0],
        pose.translation[1],
        pose.translation[2],
    ]);
}

pub(crate) fn read_pose(params: &[f64], at: usize) -> Pose {
    Pose::from_rotvec(
        RotVec::new(params[at], params[at + 1], params[at + 2]),
        Vec3::new(params[at + 3], params[at + 4], params[at + 5]),
    )
}

/// Reprojection residuals with a large finite penalty for points that land
/// behind the camera during a trial step.
pub(crate) fn reprojection_residual(
    k: &CameraIntrinsics,
    p_cam: &Vec3,
    observed: [f64; 2],
    out: &mut [f64],
) {
    if p_cam.z() <= 1e-9 {
        out[0] = 1e6;
        out[1] = 1e6;
        return;
    }
    let a = p_cam.x() / p_cam.z();
    let b = p_cam.y() / p_cam.z();
    let g = k.radial_gain(a * a + b * b);
    out[0] = k.f * a * g + k.c_u - observed[0];
    out[1] = k.f * b * g + k.c_v - observed[1];
}

struct MonoProblem<'a> {
    target: &'a TargetModel,
    views: &'a [&'a ViewObs],
}

impl BlockProblem for MonoProblem<'_> {
    fn num_params(&self) -> usize {
        5 + 6 * self.views.len()
    }
    fn num_blocks(&self) -> usize {
        self.views.len()
    }
    fn block_len(&self, b: usize) -> usize {
        self.views[b].corners.len() * 2
    }
    fn block_params(&self, b: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..5).collect();
        p.extend(5 + 6 * b..5 + 6 * (b + 1));
        p
    }
    fn eval_block(&self, b: usize, params: &[f64], out: &mut [f64]) {
        let k = CameraIntrinsics::new(params[0], params[1], params[2], params[3], params[4]);
        let pose = read_pose(params, 5 + 6 * b);
        for (i, &(corner, uv)) in self.views[b].corners.iter().enumerate() {
            let p_cam = pose.apply(&self.target.corner_position(corner));
            reprojection_residual(&k, &p_cam, uv, &mut out[2 * i..2 * i + 2]);
        }
    }
}

fn board_points_collinear(target: &TargetModel, view: &ViewObs) -> bool {
    let pts: Vec<[f64; 2]> = view
        .corners
        .iter()
        .map(|&(c, _)| {
            let p = target.corner_position(c);
            [p[0], p[1]]
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for p in &pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    let tr = cxx + cyy;
    let det = cxx * cyy - cxy * cxy;
    // Smaller eigenvalue of the 2x2 scatter.
    let small = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    small <= 1e-12 * tr.max(f64::MIN_POSITIVE)
}

/// Similarity normalization for DLT: translate centroid to the origin and
/// scale the mean distance to sqrt(2).
fn normalization(points: impl Iterator<Item = [f64; 2]> + Clone) -> Mat3 {
    let mut n = 0usize;
    let mut mean = [0.0f64; 2];
    for p in points.clone() {
        mean[0] += p[0];
        mean[1] += p[1];
        n += 1;
    }
    mean[0] /= n as f64;
    mean[1] /= n as f64;
    let mut dist = 0.0;
    for p in points {
        dist += ((p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2)).sqrt();
    }
    dist /= n as f64;
    let s = if dist > 0.0 { 2f64.sqrt() / dist } else { 1.0 };
    Mat3::from_array([[s, 0.0, -s * mean[0]], [0.0, s, -s * mean[1]], [0.0, 0.0, 1.0]])
}

fn invert_similarity(t: &Mat3) -> Mat3 {
    let s = t.0[0][0];
    Mat3::from_array([
        [1.0 / s, 0.0, -t.0[0][2] / s],
        [0.0, 1.0 / s, -t.0[1][2] / s],
        [0.0, 0.0, 1.0],
    ])
}

/// Plane-to-image homography by normalized direct linear transform.
fn homography_dlt(target: &TargetModel, view: &ViewObs) -> Result<Mat3, CalibError> {
    let board: Vec<[f64; 2]> = view
        .corners
        .iter()
        .map(|&(c, _)| {
            let p = target.corner_position(c);
            [p[0], p[1]]
        })
        .collect();
    let image: Vec<[f64; 2]> = view.corners.iter().map(|&(_, uv)| uv).collect();

    let tb = normalization(board.iter().copied());
    let ti = normalization(image.iter().copied());
    let apply = |t: &Mat3, p: [f64; 2]| {
        [
            t.0[0][0] * p[0] + t.0[0][2],
            t.0[1][1] * p[1] + t.0[1][2],
        ]
    };

    let n = board.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for i in 0..n {
        let [x, y] = apply(&tb, board[i]);
        let [u, v] = apply(&ti, image[i]);
        a.row_mut(2 * i).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
        a.row_mut(2 * i + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]);
    }
    let svd = a.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| CalibError::DegenerateGeometry("homography SVD failed".into()))?;
    let h = vt.row(vt.nrows() - 1);
    let hn = Mat3::from_array([
        [h[0], h[1], h[2]],
        [h[3], h[4], h[5]],
        [h[6], h[7], h[8]],
    ]);
    let mut hom = invert_similarity(&ti) * hn * tb;

    // Fix the scale sign so points project with positive w.
    let cb = board.iter().fold([0.0f64; 2], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    let cb = [cb[0] / n as f64, cb[1] / n as f64];
    let w = hom.0[2][0] * cb[0] + hom.0[2][1] * cb[1] + hom.0[2][2];
    if w < 0.0 {
        hom = hom * -1.0;
    }
    Ok(hom)
}

/// Closed-form intrinsics assuming a single focal length and zero skew.
///
/// With `B = K^-T K^-1` constrained to `B12 = 0`, `B11 = B22`, each
/// homography contributes two linear equations in `[B11, B13, B23, B33]`.
fn intrinsics_from_homographies(homographies: &[Mat3]) -> Result<CameraIntrinsics, CalibError> {
    let vfrom = |h: &Mat3, i: usize, j: usize| -> [f64; 4] {
        let hi = h.column(i);
        let hj = h.column(j);
        [
            hi[0] * hj[0] + hi[1] * hj[1],
            hi[2] * hj[0] + hi[0] * hj[2],
            hi[2] * hj[1] + hi[1] * hj[2],
            hi[2] * hj[2],
        ]
    };
    let m = homographies.len();
    let mut a = DMatrix::<f64>::zeros(2 * m, 4);
    for (k, h) in homographies.iter().enumerate() {
        let v12 = vfrom(h, 0, 1);
        let v11 = vfrom(h, 0, 0);
        let v22 = vfrom(h, 1, 1);
        for c in 0..4 {
            a[(2 * k, c)] = v12[c];
            a[(2 * k + 1, c)] = v11[c] - v22[c];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| CalibError::DegenerateGeometry("intrinsics SVD failed".into()))?;
    let b = vt.row(vt.nrows() - 1);
    let (b11, b13, b23, b33) = (b[0], b[1], b[2], b[3]);
    if b11.abs() < 1e-18 {
        return Err(CalibError::DegenerateGeometry("B11 vanishes".into()));
    }
    let (b11, b13, b23, b33) = if b11 < 0.0 {
        (-b11, -b13, -b23, -b33)
    } else {
        (b11, b13, b23, b33)
    };
    let cu = -b13 / b11;
    let cv = -b23 / b11;
    let f2 = b33 / b11 - cu * cu - cv * cv;
    if !(f2 > 0.0) {
        return Err(CalibError::DegenerateGeometry(format!(
            "negative focal-length estimate (f^2 = {f2:.3}); views may be near-degenerate"
        )));
    }
    Ok(CameraIntrinsics::new(f2.sqrt(), cu, cv, 0.0, 0.0))
}

/// Pose of the target from its homography: `[r1 r2 t] = lambda K^-1 H`.
fn extrinsics_from_homography(k: &CameraIntrinsics, h: &Mat3) -> Result<Pose, CalibError> {
    let kinv = Mat3::from_array([
        [1.0 / k.f, 0.0, -k.c_u / k.f],
        [0.0, 1.0 / k.f, -k.c_v / k.f],
        [0.0, 0.0, 1.0],
    ]);
    let a1 = kinv * h.column(0);
    let a2 = kinv * h.column(1);
    let a3 = kinv * h.column(2);
    let lambda = 2.0 / (a1.norm() + a2.norm());
    let (r1, r2, mut t) = (a1 * lambda, a2 * lambda, a3 * lambda);
    let mut r = Mat3::from_columns(r1, r2, r1.cross(&r2));
    if t[2] < 0.0 {
        // Target must be in front of the camera; flip the homography sign.
        r = Mat3::from_columns(-r1, -r2, r1.cross(&r2));
        t = -t;
    }
    Ok(Pose::new(nearest_rotation(&r), t))
}
