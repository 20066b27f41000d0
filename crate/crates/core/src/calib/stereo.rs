//! Relative pose between two camera placements from shared target views.

use super::CalibError;
use crate::geom::nearest_rotation;
use crate::{Mat3, Pose, Vec3};

/// Result of a stereo link: the pose of B relative to A plus the spread of
/// the per-view estimates (max geodesic angle to the mean, radians).
#[derive(Debug, Clone, Copy)]
pub struct StereoResult {
    pub relative: Pose,
    pub rotation_spread: f64,
    pub translation_spread: f64,
}

/// Chordal mean of rotation matrices: average then project back onto SO(3).
pub fn mean_rotation<'a>(rotations: impl Iterator<Item = &'a Mat3>) -> Mat3 {
    let mut sum = Mat3::zeros();
    let mut count = 0usize;
    for r in rotations {
        sum = sum + *r;
        count += 1;
    }
    assert!(count > 0, "mean of zero rotations");
    nearest_rotation(&(sum * (1.0 / count as f64)))
}

/// Relative pose `B_from_A` averaged over shared views.
///
/// `pairs` holds, per shared view, the camera-to-target poses of placement A
/// and placement B against the same physical target pose. Each view yields
/// an estimate `pose_B o pose_A^-1`; the result is the rotation-averaged
/// consensus with the per-view disagreement reported.
pub fn calibrate_stereo(pairs: &[(Pose, Pose)]) -> Result<StereoResult, CalibError> {
    if pairs.is_empty() {
        return Err(CalibError::EmptyInput("no shared views".into()));
    }
    let estimates: Vec<Pose> = pairs
        .iter()
        .map(|(a, b)| b.compose(&a.inverse()))
        .collect();
    let rotation = mean_rotation(estimates.iter().map(|p| &p.rotation));
    let mut t = Vec3::zeros();
    for e in &estimates {
        t += e.translation;
    }
    let relative = Pose::new(rotation, t / estimates.len() as f64);
    let rotation_spread = estimates
        .iter()
        .map(|e| relative.rotation_distance(e))
        .fold(0.0, f64::max);
    let translation_spread = estimates
        .iter()
        .map(|e| relative.translation_distance(e))
        .fold(0.0, f64::max);
    Ok(StereoResult {
        relative,
        rotation_spread,
        translation_spread,
    })
}
