//! Exact signed Euclidean distance fields from binary masks.
//!
//! Two-pass lower-envelope transform over squared distances (columns, then
//! rows), run once against the background set and once against the
//! foreground set, combined with a sign: positive inside the mask.
//!
//! Conventions: everything beyond the image border counts as background, so
//! foreground touching the border still gets finite inside-distances. A mask
//! with no foreground at all yields `-(distance to the border ring)`, the
//! mirror image of the all-foreground case.

use super::SilhouetteMask;
use crate::scalar::{real, Real};

/// Per-pixel signed distance to the nearest mask boundary, in pixels.
#[derive(Debug, Clone)]
pub struct SignedDistanceField<T> {
    pub width: usize,
    pub height: usize,
    /// Row-major; positive = foreground side.
    pub data: Vec<T>,
}

impl<T: Real> SignedDistanceField<T> {
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Sample at continuous pixel coordinates (pixel (x, y) has its center
    /// at (x + 0.5, y + 0.5)).
    ///
    /// Points outside the grid are clamped to the nearest pixel center and
    /// penalized by the clamping distance, consistent with the
    /// beyond-the-border-is-background convention.
    pub fn sample_nearest(&self, u: f64, v: f64) -> f64 {
        let (w, h) = (self.width as f64, self.height as f64);
        let cu = u.clamp(0.5, w - 0.5);
        let cv = v.clamp(0.5, h - 0.5);
        let x = ((cu - 0.5).round() as usize).min(self.width - 1);
        let y = ((cv - 0.5).round() as usize).min(self.height - 1);
        let penalty = ((u - cu).powi(2) + (v - cv).powi(2)).sqrt();
        crate::scalar::as_f64(self.get(x, y)) - penalty
    }
}

const NO_SOURCE: f64 = f64::MAX / 4.0;

/// 1D squared-distance transform (lower envelope of parabolas).
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            // z[0] = -inf guarantees s > z[k] eventually; s is always finite.
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2 * (q - p)) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        d[q] = (q as f64 - p as f64).powi(2) + f[p];
    }
}

/// Squared distance from every cell to the nearest `true` cell.
/// Cells stay at `NO_SOURCE` when the grid has no sources at all.
fn squared_edt(sources: impl Fn(usize, usize) -> bool, w: usize, h: usize) -> Vec<f64> {
    let mut grid = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            grid[y * w + x] = if sources(x, y) { 0.0 } else { NO_SOURCE };
        }
    }
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    // Columns.
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        dt_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    // Rows.
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..y * w + w]);
        dt_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        grid[y * w..y * w + w].copy_from_slice(&d[..w]);
    }
    grid
}

/// Distance of pixel (x, y) to the nearest point outside the image.
fn border_distance(x: usize, y: usize, w: usize, h: usize) -> f64 {
    let dx = (x + 1).min(w - x);
    let dy = (y + 1).min(h - y);
    dx.min(dy) as f64
}

/// Exact signed Euclidean distance transform of a mask.
pub fn distance_transform<T: Real>(mask: &SilhouetteMask) -> SignedDistanceField<T> {
    let (w, h) = (mask.width, mask.height);

    // Inside distances: nearest background, with a virtual background ring
    // just outside the image. Computed on a grid padded by one.
    let (pw, ph) = (w + 2, h + 2);
    let inside_sq = squared_edt(
        |x, y| {
            if x == 0 || y == 0 || x == pw - 1 || y == ph - 1 {
                true
            } else {
                !mask.get(x - 1, y - 1)
            }
        },
        pw,
        ph,
    );

    // Outside distances: nearest foreground.
    let any_fg = mask.data.iter().any(|&m| m);
    let outside_sq = if any_fg {
        Some(squared_edt(|x, y| mask.get(x, y), w, h))
    } else {
        None
    };

    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let value = if mask.get(x, y) {
                inside_sq[(y + 1) * pw + (x + 1)].sqrt()
            } else {
                match &outside_sq {
                    Some(sq) => -sq[y * w + x].sqrt(),
                    // Empty mask: as if foreground sat just past the border.
                    None => -border_distance(x, y, w, h),
                }
            };
            data.push(real(value));
        }
    }
    SignedDistanceField {
        width: w,
        height: h,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> SilhouetteMask {
        let h = rows.len();
        let w = rows[0].len();
        let mut m = SilhouetteMask::empty(w, h);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                m.set(x, y, c == '#');
            }
        }
        m
    }

    /// Quadratic-time reference sharing no code with the implementation.
    fn brute_force(mask: &SilhouetteMask) -> Vec<f64> {
        let (w, h) = (mask.width, mask.height);
        let mut out = vec![0.0; w * h];
        let any_fg = mask.data.iter().any(|&m| m);
        for y in 0..h {
            for x in 0..w {
                let target = !mask.get(x, y);
                let mut best = f64::INFINITY;
                for yy in 0..h {
                    for xx in 0..w {
                        if mask.get(xx, yy) != target {
                            continue;
                        }
                        let d2 = ((x as f64 - xx as f64).powi(2)
                            + (y as f64 - yy as f64).powi(2))
                        .sqrt();
                        best = best.min(d2);
                    }
                }
                if mask.get(x, y) {
                    // Virtual background ring beyond the border.
                    best = best.min(border_distance(x, y, w, h));
                    out[y * w + x] = best;
                } else if any_fg {
                    out[y * w + x] = -best;
                } else {
                    out[y * w + x] = -border_distance(x, y, w, h);
                }
            }
        }
        out
    }

    #[test]
    fn single_pixel_source() {
        let m = mask_from(&[".....", "..#..", "....."]);
        let sdf = distance_transform::<f64>(&m);
        assert!(sdf.get(2, 1) > 0.0 && sdf.get(2, 1) <= 1.0);
        assert!((sdf.get(1, 1) + 1.0).abs() < 1e-12);
        assert!((sdf.get(3, 1) + 1.0).abs() < 1e-12);
        assert!((sdf.get(2, 0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn filled_disc_center_value() {
        let n = 128;
        let r = 50.0;
        let mut m = SilhouetteMask::empty(n, n);
        let c = n as f64 / 2.0;
        for y in 0..n {
            for x in 0..n {
                let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                m.set(x, y, d <= r);
            }
        }
        let sdf = distance_transform::<f64>(&m);
        let center = sdf.get(n / 2, n / 2);
        assert!((center - r).abs() <= 1.0, "center = {center}");
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        let mut state = 123456789u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 33
        };
        for case in 0..40 {
            let w = 3 + (next() % 30) as usize;
            let h = 3 + (next() % 30) as usize;
            let mut m = SilhouetteMask::empty(w, h);
            let density = (case % 10) as u64;
            for i in 0..w * h {
                m.data[i] = next() % 10 < density;
            }
            let sdf = distance_transform::<f64>(&m);
            let oracle = brute_force(&m);
            for i in 0..w * h {
                assert!(
                    (sdf.data[i] - oracle[i]).abs() < 1e-9,
                    "case {case}, pixel {i}: {} vs {}",
                    sdf.data[i],
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn uniform_masks_use_border_convention() {
        let empty = SilhouetteMask::empty(6, 4);
        let sdf = distance_transform::<f64>(&empty);
        assert!((sdf.get(0, 0) + 1.0).abs() < 1e-12);
        assert!((sdf.get(2, 1) + 2.0).abs() < 1e-12);

        let mut full = SilhouetteMask::empty(6, 4);
        full.data.iter_mut().for_each(|v| *v = true);
        let sdf = distance_transform::<f64>(&full);
        assert!((sdf.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((sdf.get(2, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_between_neighbors() {
        let m = mask_from(&[
            "........",
            ".####...",
            ".####.#.",
            ".####...",
            "........",
        ]);
        let sdf = distance_transform::<f64>(&m);
        let lim = std::f64::consts::SQRT_2 + 1e-9;
        for y in 0..m.height {
            for x in 0..m.width {
                for (dx, dy) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= m.width as i64 || ny >= m.height as i64 {
                        continue;
                    }
                    let a = sdf.get(x, y);
                    let b = sdf.get(nx as usize, ny as usize);
                    // Same-sign neighbors obey the metric bound; a sign flip
                    // adds at most the two boundary offsets.
                    let bound = if (a >= 0.0) == (b >= 0.0) { lim } else { 2.0 * lim };
                    assert!((a - b).abs() <= bound, "at {x},{y}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn sampling_outside_the_grid_is_penalized() {
        let m = mask_from(&["###", "###", "###"]);
        let sdf = distance_transform::<f64>(&m);
        let inside = sdf.sample_nearest(1.5, 1.5);
        let outside = sdf.sample_nearest(-3.0, 1.5);
        assert!(inside > 0.0);
        assert!(outside < inside - 3.0);
    }
}
