//! Rotation-axis recovery from corner orbits.
//!
//! As the turntable spins, each chessboard corner traces a planar circle in
//! the (fixed) camera frame. The orbit plane's normal gives the axis
//! direction; a circle fit in the axis-aligned frame gives the centre. The
//! world frame is placed at the orbit centre with +y along the axis.

use super::{CalibError, TargetModel, ViewObs, ViewKey};
use crate::geom::{rodrigues, rot_y};
use crate::{Mat3, Pose, RotVec, Vec3};
use std::collections::BTreeMap;

/// Rotation axis estimate, expressed in the reference camera frame.
#[derive(Debug, Clone, Copy)]
pub struct AxisEstimate {
    /// Unit normal of the orbit planes (the axis direction).
    pub normal: Vec3,
    /// Orbit centre in the axis-aligned frame, mm.
    pub center: Vec3,
    /// Rotation taking `normal` onto the +y axis.
    pub alignment: RotVec,
}

/// Fit a plane to orbit points: unit normal (y-component >= 0, ties broken
/// lexicographically) and the centroid.
///
/// The normal is the eigenvector of the smallest eigenvalue of the centred
/// scatter matrix.
pub fn fit_orbit_plane(points: &[Vec3]) -> Result<(Vec3, Vec3), CalibError> {
    if points.len() < 3 {
        return Err(CalibError::EmptyInput(format!(
            "plane fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    let mut centroid = Vec3::zeros();
    for p in points {
        centroid += *p;
    }
    let centroid = centroid / points.len() as f64;

    let mut scatter = nalgebra::Matrix3::<f64>::zeros();
    for p in points {
        let d = *p - centroid;
        for i in 0..3 {
            for j in 0..3 {
                scatter[(i, j)] += d[i] * d[j];
            }
        }
    }
    let eig = scatter.symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    // Rank < 2 means the points are collinear (or coincident).
    if eig.eigenvalues[order[1]] <= 1e-18 * eig.eigenvalues[order[2]].max(f64::MIN_POSITIVE) {
        return Err(CalibError::CollinearPoints);
    }
    let col = eig.eigenvectors.column(order[0]);
    let n = Vec3::new(col[0], col[1], col[2]);
    Ok((canonical_sign(n), centroid))
}

fn canonical_sign(n: Vec3) -> Vec3 {
    if n[1] > 0.0 {
        return n;
    }
    if n[1] < 0.0 {
        return -n;
    }
    for i in [0usize, 2] {
        if n[i] > 0.0 {
            return n;
        }
        if n[i] < 0.0 {
            return -n;
        }
    }
    n
}

/// Rotation vector turning unit vector `n` onto the +y axis.
///
/// `n` parallel to +y yields the zero rotation; antiparallel yields a
/// half-turn about +x.
pub fn axis_alignment(n: &Vec3) -> RotVec {
    let y = Vec3::new(0.0, 1.0, 0.0);
    let cross = n.cross(&y);
    let s = cross.norm();
    let c = n.dot(&y);
    if s < 1e-14 {
        return if c >= 0.0 {
            RotVec::zero()
        } else {
            RotVec::new(std::f64::consts::PI, 0.0, 0.0)
        };
    }
    let angle = s.atan2(c);
    RotVec::from_vector((cross / s) * angle)
}

/// Linear least-squares circle fit to 2D points (Coope's linearization):
/// returns (centre, radius). Exact for noiseless points on a circle, also on
/// partial arcs.
pub fn fit_circle(points: &[[f64; 2]]) -> Result<([f64; 2], f64), CalibError> {
    if points.len() < 3 {
        return Err(CalibError::EmptyInput(format!(
            "circle fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    // Shift to the centroid first: keeps the linear system well-scaled for
    // distant circles.
    let mut mean = [0.0f64; 2];
    for p in points {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= points.len() as f64;
    mean[1] /= points.len() as f64;

    let mut a = nalgebra::DMatrix::<f64>::zeros(points.len(), 3);
    let mut b = nalgebra::DVector::<f64>::zeros(points.len());
    for (i, p) in points.iter().enumerate() {
        let x = p[0] - mean[0];
        let y = p[1] - mean[1];
        a[(i, 0)] = 2.0 * x;
        a[(i, 1)] = 2.0 * y;
        a[(i, 2)] = 1.0;
        b[i] = x * x + y * y;
    }
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * max_sv {
        return Err(CalibError::CollinearPoints);
    }
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| CalibError::DegenerateGeometry(e.to_string()))?;
    let r2 = sol[2] + sol[0] * sol[0] + sol[1] * sol[1];
    if r2 <= 0.0 {
        return Err(CalibError::DegenerateGeometry("negative squared radius".into()));
    }
    Ok(([sol[0] + mean[0], sol[1] + mean[1]], r2.sqrt()))
}

/// World pose of the reference camera from an axis estimate:
/// `[R_w^T | R_w^T t0]` with the world origin at the orbit centre and +y
/// along the axis.
pub fn derive_world_pose(axis: &AxisEstimate) -> Pose {
    let r_w: Mat3 = rodrigues(axis.alignment);
    let rt = r_w.transpose();
    Pose::new(rt, rt * axis.center)
}

/// Build the axis estimate from per-corner orbits with a fixed normal sign.
fn axis_estimate_with_normal(orbits: &[Vec<Vec3>], normal: Vec3) -> Result<AxisEstimate, CalibError> {
    let alignment = axis_alignment(&normal);
    let r = rodrigues(alignment);
    let mut centers: Vec<[f64; 2]> = Vec::new();
    let mut y_sum = 0.0;
    let mut y_count = 0usize;
    for orbit in orbits {
        let aligned: Vec<Vec3> = orbit.iter().map(|p| r * *p).collect();
        for q in &aligned {
            y_sum += q[1];
            y_count += 1;
        }
        let zx: Vec<[f64; 2]> = aligned.iter().map(|q| [q[2], q[0]]).collect();
        match fit_circle(&zx) {
            Ok((c, _)) => centers.push(c),
            // A single odd orbit (short arc) must not sink the estimate.
            Err(CalibError::CollinearPoints) => continue,
            Err(e) => return Err(e),
        }
    }
    if centers.is_empty() || y_count == 0 {
        return Err(CalibError::DegenerateGeometry(
            "no usable corner orbits for the circle fit".into(),
        ));
    }
    let n = centers.len() as f64;
    let z0 = centers.iter().map(|c| c[0]).sum::<f64>() / n;
    let x0 = centers.iter().map(|c| c[1]).sum::<f64>() / n;
    let y0 = y_sum / y_count as f64;
    Ok(AxisEstimate {
        normal,
        center: Vec3::new(x0, y0, z0),
        alignment,
    })
}

/// De-rotate per-view estimates of the target's world pose to angle zero and
/// average them. Returns the consensus pose plus the per-view rotation and
/// translation spread (max deviation from the consensus).
pub fn target_zero_pose(estimates: &[(Pose, f64)]) -> Result<(Pose, f64, f64), CalibError> {
    if estimates.is_empty() {
        return Err(CalibError::EmptyInput("no target pose estimates".into()));
    }
    let derotated: Vec<Pose> = estimates
        .iter()
        .map(|(pose, theta)| Pose::rotation_only(rot_y(*theta).transpose()).compose(pose))
        .collect();
    let mean_rot = super::mean_rotation(derotated.iter().map(|p| &p.rotation));
    let mut mean_t = Vec3::zeros();
    for p in &derotated {
        mean_t += p.translation;
    }
    let consensus = Pose::new(mean_rot, mean_t / derotated.len() as f64);
    let rot_spread = derotated
        .iter()
        .map(|p| consensus.rotation_distance(p))
        .fold(0.0, f64::max);
    let trans_spread = derotated
        .iter()
        .map(|p| consensus.translation_distance(p))
        .fold(0.0, f64::max);
    Ok((consensus, rot_spread, trans_spread))
}

/// Full axis chain for the reference placement: per-corner orbits from mono
/// extrinsics, plane and circle fits, and sign disambiguation by de-rotation
/// consistency (the wrong axis sign makes the zero-pose estimates disagree).
pub(crate) fn reference_world_pose(
    target: &TargetModel,
    ref_views: &[&ViewObs],
    view_poses: &BTreeMap<ViewKey, Pose>,
) -> Result<Pose, CalibError> {
    // Collect orbits: corner id -> positions in the camera frame across pans.
    let mut orbits_by_corner: BTreeMap<usize, Vec<Vec3>> = BTreeMap::new();
    for v in ref_views {
        let pose = &view_poses[&v.key];
        for &(corner, _) in &v.corners {
            orbits_by_corner
                .entry(corner)
                .or_default()
                .push(pose.apply(&target.corner_position(corner)));
        }
    }
    let orbits: Vec<Vec<Vec3>> = orbits_by_corner
        .into_values()
        .filter(|o| o.len() >= 3)
        .collect();
    if orbits.is_empty() {
        return Err(CalibError::DegenerateGeometry(
            "fewer than 3 pan positions observed; cannot estimate the axis".into(),
        ));
    }

    // Average canonical orbit normals.
    let mut n_mean = Vec3::zeros();
    for orbit in &orbits {
        match fit_orbit_plane(orbit) {
            Ok((n, _)) => n_mean += n,
            Err(CalibError::CollinearPoints) => continue,
            Err(e) => return Err(e),
        }
    }
    let n_mean = n_mean
        .normalized()
        .ok_or_else(|| CalibError::DegenerateGeometry("orbit normals cancelled out".into()))?;

    let mut best: Option<(f64, Pose)> = None;
    for flip in [false, true] {
        let n = if flip { -n_mean } else { n_mean };
        let Ok(axis) = axis_estimate_with_normal(&orbits, n) else {
            continue;
        };
        let base = derive_world_pose(&axis);
        let inv = base.inverse();
        let ests: Vec<(Pose, f64)> = ref_views
            .iter()
            .map(|v| (inv.compose(&view_poses[&v.key]), v.pan_angle))
            .collect();
        let (_, rot_spread, _) = target_zero_pose(&ests)?;
        if best.map_or(true, |(s, _)| rot_spread < s) {
            best = Some((rot_spread, base));
        }
    }
    best.map(|(_, pose)| pose)
        .ok_or_else(|| CalibError::DegenerateGeometry("axis estimation failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn circle_points(n: usize, arc: f64, center: [f64; 2], r: f64, phase: f64) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let a = phase + arc * i as f64 / n as f64;
                [center[0] + r * a.cos(), center[1] + r * a.sin()]
            })
            .collect()
    }

    #[test]
    fn plane_through_unit_circle_at_height() {
        let pts: Vec<Vec3> = (0..12)
            .map(|i| {
                let a = TAU * i as f64 / 12.0;
                Vec3::new(a.cos(), 5.0, a.sin())
            })
            .collect();
        let (n, c) = fit_orbit_plane(&pts).unwrap();
        assert!((n - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((c[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn plane_of_three_points_is_cross_product() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let (n, _) = fit_orbit_plane(&pts).unwrap();
        assert!((n - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0, 3.0)).collect();
        assert!(matches!(
            fit_orbit_plane(&pts),
            Err(CalibError::CollinearPoints)
        ));
    }

    #[test]
    fn plane_fit_with_noise_stays_accurate() {
        let mut state = 7u64;
        let mut noise = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2e-3
        };
        let pts: Vec<Vec3> = (0..24)
            .map(|i| {
                let a = TAU * i as f64 / 24.0;
                Vec3::new(a.cos() + noise(), 5.0 + noise(), a.sin() + noise())
            })
            .collect();
        let (n, _) = fit_orbit_plane(&pts).unwrap();
        let angle = n.dot(&Vec3::new(0.0, 1.0, 0.0)).min(1.0).acos();
        assert!(angle < 0.1_f64.to_radians(), "angle = {angle}");
    }

    #[test]
    fn alignment_examples() {
        assert_eq!(axis_alignment(&Vec3::new(0.0, 1.0, 0.0)).angle(), 0.0);

        let rv = axis_alignment(&Vec3::new(1.0, 0.0, 0.0));
        assert!((rv.angle() - FRAC_PI_2).abs() < 1e-15);
        assert!((rv.0 - Vec3::new(0.0, 0.0, FRAC_PI_2)).norm() < 1e-15);

        let anti = axis_alignment(&Vec3::new(0.0, -1.0, 0.0));
        assert!((anti.angle() - PI).abs() < 1e-15);
        assert!((anti.axis().unwrap() - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn alignment_sends_random_normals_to_y() {
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..100 {
            let n = Vec3::new(next(), next(), next()).normalized().unwrap();
            let r = rodrigues(axis_alignment(&n));
            assert!((r * n - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn circle_through_four_symmetric_points() {
        let pts = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let (c, r) = fit_circle(&pts).unwrap();
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_arc_is_recovered_exactly() {
        let pts = circle_points(9, FRAC_PI_2, [3.0, -2.0], 7.0, 0.4);
        let (c, r) = fit_circle(&pts).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-9, "cx = {}", c[0]);
        assert!((c[1] + 2.0).abs() < 1e-9);
        assert!((r - 7.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_arc_center_is_close() {
        let mut state = 17u64;
        let mut noise = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.02
        };
        let pts: Vec<[f64; 2]> = circle_points(40, 2.0, [3.0, -2.0], 7.0, 0.0)
            .into_iter()
            .map(|p| [p[0] + noise(), p[1] + noise()])
            .collect();
        let (c, _) = fit_circle(&pts).unwrap();
        let err = ((c[0] - 3.0).powi(2) + (c[1] + 2.0).powi(2)).sqrt();
        assert!(err < 0.05, "center error {err}");
    }

    #[test]
    fn circle_fit_collinear_is_rejected() {
        let pts = vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(fit_circle(&pts), Err(CalibError::CollinearPoints)));
    }

    #[test]
    fn circle_fit_is_rigid_motion_covariant() {
        let pts = circle_points(11, 1.9, [3.0, -2.0], 7.0, 0.7);
        let (c0, r0) = fit_circle(&pts).unwrap();
        let (ang, dx, dy) = (0.83, 14.0, -6.5);
        let moved: Vec<[f64; 2]> = pts
            .iter()
            .map(|p| {
                [
                    ang.cos() * p[0] - ang.sin() * p[1] + dx,
                    ang.sin() * p[0] + ang.cos() * p[1] + dy,
                ]
            })
            .collect();
        let (c1, r1) = fit_circle(&moved).unwrap();
        let expect = [
            ang.cos() * c0[0] - ang.sin() * c0[1] + dx,
            ang.sin() * c0[0] + ang.cos() * c0[1] + dy,
        ];
        assert!((r1 - r0).abs() < 1e-9);
        assert!((c1[0] - expect[0]).abs() < 1e-9 && (c1[1] - expect[1]).abs() < 1e-9);
    }

    #[test]
    fn derive_world_pose_aligned_axis_is_identity() {
        let axis = AxisEstimate {
            normal: Vec3::new(0.0, 1.0, 0.0),
            center: Vec3::zeros(),
            alignment: RotVec::zero(),
        };
        let pose = derive_world_pose(&axis);
        assert!(pose.rotation_distance(&Pose::identity()) < 1e-15);
        assert!(pose.translation.norm() < 1e-15);
    }

    #[test]
    fn world_pose_places_origin_at_orbit_center() {
        // Algebraic identity check: the world origin maps back to the orbit
        // centre expressed in the camera frame, which is R_w^T * t0.
        let normal = Vec3::new(0.3, 0.8, -0.4).normalized().unwrap();
        let alignment = axis_alignment(&normal);
        let center = Vec3::new(12.0, -3.0, 40.0);
        let pose = derive_world_pose(&AxisEstimate {
            normal,
            center,
            alignment,
        });
        let origin_cam = pose.apply(&Vec3::zeros());
        let expect = rodrigues(alignment).transpose() * center;
        assert!((origin_cam - expect).norm() < 1e-12);
        // And the axis direction in camera coordinates is the plane normal.
        let y_cam = pose.rotation * Vec3::new(0.0, 1.0, 0.0);
        assert!((y_cam - normal).norm() < 1e-12);
    }

    #[test]
    fn zero_pose_single_view_at_zero_is_input() {
        let p = Pose::from_rotvec(RotVec::new(0.2, -0.1, 0.4), Vec3::new(5.0, 6.0, 7.0));
        let (consensus, rs, ts) = target_zero_pose(&[(p, 0.0)]).unwrap();
        assert!(consensus.rotation_distance(&p) < 1e-12);
        assert!(consensus.translation_distance(&p) < 1e-12);
        assert!(rs < 1e-12 && ts < 1e-12);
    }

    #[test]
    fn zero_pose_derotation_consistency() {
        // Rotating a base pose by theta and de-rotating must agree exactly.
        let t0 = Pose::from_rotvec(RotVec::new(0.1, 0.7, -0.2), Vec3::new(30.0, -10.0, 4.0));
        let ests: Vec<(Pose, f64)> = (0..10)
            .map(|i| {
                let theta = TAU * i as f64 / 10.0;
                (Pose::rotation_only(rot_y(theta)).compose(&t0), theta)
            })
            .collect();
        let (consensus, rs, ts) = target_zero_pose(&ests).unwrap();
        assert!(rs < 1e-9, "rotation spread {rs}");
        assert!(ts < 1e-9, "translation spread {ts}");
        assert!(consensus.rotation_distance(&t0) < 1e-9);
        // Consensus translation is the mean of de-rotated translations.
        assert!(consensus.translation_distance(&t0) < 1e-9);
    }
}
