//! Ideal silhouette rendering and test composites.
//!
//! Triangles are projected through the full distortion model; any triangle
//! whose projected edges exceed one pixel is subdivided in 3D first, so the
//! curved image of a straight edge is captured. A pixel is foreground when
//! its centre is covered by some projected triangle.

use super::SynthError;
use crate::mesh::TriMesh;
use crate::silhouette::{ColorImage, SilhouetteMask};
use crate::{CameraIntrinsics, Pose, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Z_NEAR_MM: f64 = 1.0;
const MAX_SPLIT_DEPTH: u32 = 18;

/// Rasterize the mesh's silhouette as seen by a camera.
///
/// `camera` is the world-to-camera pose. An empty mesh yields an empty
/// mask; a non-empty mesh entirely behind the camera is an error.
pub fn render_silhouette(
    mesh: &TriMesh,
    camera: &Pose,
    k: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> Result<SilhouetteMask, SynthError> {
    let mut mask = SilhouetteMask::empty(width, height);
    if mesh.triangles.is_empty() {
        return Ok(mask);
    }
    let cam_verts: Vec<Vec3> = mesh.vertices.iter().map(|v| camera.apply(v)).collect();
    let mut any_in_front = false;
    for tri in &mesh.triangles {
        let p = [
            cam_verts[tri[0] as usize],
            cam_verts[tri[1] as usize],
            cam_verts[tri[2] as usize],
        ];
        for clipped in clip_near(p) {
            any_in_front = true;
            subdivide_and_fill(&clipped, k, &mut mask, 0);
        }
    }
    if !any_in_front {
        return Err(SynthError::MeshBehindCamera);
    }
    Ok(mask)
}

/// Clip a camera-space triangle against z = Z_NEAR_MM; yields 0..2 triangles.
fn clip_near(p: [Vec3; 3]) -> Vec<[Vec3; 3]> {
    let inside: Vec<usize> = (0..3).filter(|&i| p[i].z() > Z_NEAR_MM).collect();
    let lerp = |a: Vec3, b: Vec3| {
        let t = (Z_NEAR_MM - a.z()) / (b.z() - a.z());
        a + (b - a) * t
    };
    match inside.len() {
        0 => Vec::new(),
        3 => vec![p],
        1 => {
            let i = inside[0];
            let (j, l) = ((i + 1) % 3, (i + 2) % 3);
            vec![[p[i], lerp(p[i], p[j]), lerp(p[i], p[l])]]
        }
        2 => {
            let out = (0..3).find(|i| !inside.contains(i)).unwrap();
            let (i, j) = ((out + 1) % 3, (out + 2) % 3);
            let a = lerp(p[j], p[out]);
            let b = lerp(p[i], p[out]);
            vec![[p[i], p[j], a], [p[i], a, b]]
        }
        _ => unreachable!(),
    }
}

fn project(k: &CameraIntrinsics, p: &Vec3) -> [f64; 2] {
    let a = p.x() / p.z();
    let b = p.y() / p.z();
    let g = k.radial_gain(a * a + b * b);
    [k.f * a * g + k.c_u, k.f * b * g + k.c_v]
}

fn subdivide_and_fill(p: &[Vec3; 3], k: &CameraIntrinsics, mask: &mut SilhouetteMask, depth: u32) {
    let uv = [project(k, &p[0]), project(k, &p[1]), project(k, &p[2])];
    // Entirely off-image? The projection of anything inside the triangle
    // stays within the convex-ish hull expanded by a pixel at this size.
    let (w, h) = (mask.width as f64, mask.height as f64);
    let min_u = uv.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
    let max_u = uv.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_v = uv.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min);
    let max_v = uv.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);

    let edge_len = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let longest = [
        edge_len(uv[0], uv[1]),
        edge_len(uv[1], uv[2]),
        edge_len(uv[2], uv[0]),
    ];
    let (which, &len) = longest
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();

    if len > 1.0 && depth < MAX_SPLIT_DEPTH {
        // Cull far-off-image subtrees once they are small enough that the
        // bounding box is trustworthy (distortion curvature < 1 px).
        if len < 32.0
            && (max_u < -2.0 || min_u > w + 2.0 || max_v < -2.0 || min_v > h + 2.0)
        {
            return;
        }
        let (i, j) = (which, (which + 1) % 3);
        let l = (which + 2) % 3;
        let mid = (p[i] + p[j]) * 0.5;
        subdivide_and_fill(&[p[i], mid, p[l]], k, mask, depth + 1);
        subdivide_and_fill(&[mid, p[j], p[l]], k, mask, depth + 1);
        return;
    }

    // Small triangle: scan its pixel bounding box.
    let x0 = min_u.floor().max(0.0) as usize;
    let x1 = (max_u.ceil() as i64).min(mask.width as i64 - 1);
    let y0 = min_v.floor().max(0.0) as usize;
    let y1 = (max_v.ceil() as i64).min(mask.height as i64 - 1);
    if x1 < x0 as i64 || y1 < y0 as i64 {
        return;
    }
    let area = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    for y in y0..=y1 as usize {
        for x in x0..=x1 as usize {
            if mask.get(x, y) {
                continue;
            }
            let q = [x as f64 + 0.5, y as f64 + 0.5];
            let w0 = area(uv[0], uv[1], q);
            let w1 = area(uv[1], uv[2], q);
            let w2 = area(uv[2], uv[0], q);
            let eps = 1e-12;
            if (w0 >= -eps && w1 >= -eps && w2 >= -eps)
                || (w0 <= eps && w1 <= eps && w2 <= eps)
            {
                mask.set(x, y, true);
            }
        }
    }
}

/// Colors and noise amplitudes for segmentation-test composites.
#[derive(Debug, Clone, Copy)]
pub struct CompositeStyle {
    pub background_rgb: [u8; 3],
    pub foreground_rgb: [u8; 3],
    /// Uniform noise amplitude added per channel, in 8-bit counts.
    pub noise_amplitude: i16,
}

impl Default for CompositeStyle {
    fn default() -> Self {
        Self {
            background_rgb: [152, 142, 128],
            foreground_rgb: [52, 108, 46],
            noise_amplitude: 3,
        }
    }
}

/// Paste foreground color over a noisy background wherever the mask is set.
/// Returns (composite frame, background frame); both carry independent
/// noise so identical-pixel shortcuts cannot pass the scoring tests.
pub fn make_composite(
    mask: &SilhouetteMask,
    style: &CompositeStyle,
    seed: u64,
) -> (ColorImage, ColorImage) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = |base: [u8; 3]| {
        let mut c = [0u8; 3];
        for i in 0..3 {
            let n: i16 = rng.gen_range(-style.noise_amplitude..=style.noise_amplitude);
            c[i] = (base[i] as i16 + n).clamp(0, 255) as u8;
        }
        c
    };
    let mut frame = Vec::with_capacity(mask.data.len());
    let mut background = Vec::with_capacity(mask.data.len());
    for &fg in &mask.data {
        background.push(noisy(style.background_rgb));
        frame.push(if fg {
            noisy(style.foreground_rgb)
        } else {
            noisy(style.background_rgb)
        });
    }
    (
        ColorImage::new(mask.width, mask.height, frame),
        ColorImage::new(mask.width, mask.height, background),
    )
}
