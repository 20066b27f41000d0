//! Background removal: LAB scoring against a static background image,
//! binary silhouette masks, and exact signed Euclidean distance fields.

mod edt;
mod lab;
mod pnm;
mod score;

pub use edt::{distance_transform, SignedDistanceField};
pub use pnm::{read_pgm, read_ppm, write_pgm, write_ppm, PnmError};
pub use score::{score_map, ScoreParams};

use crate::scalar::{as_f64, real, Real};

#[derive(Debug, thiserror::Error)]
pub enum SilhouetteError {
    #[error("image dimensions {0}x{1} do not match background {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("LAB planes missing; call rgb_to_lab first")]
    MissingLab,
}

/// 8-bit RGB image with optional derived CIE L*a*b* planes
/// (L in [0, 100], a and b roughly in [-128, 127]).
#[derive(Debug, Clone)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub rgb: Vec<[u8; 3]>,
    /// Row-major (L, a, b) triples, present after [`rgb_to_lab`].
    pub lab: Option<Vec<[f32; 3]>>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, rgb: Vec<[u8; 3]>) -> Self {
        assert_eq!(rgb.len(), width * height);
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            rgb,
            lab: None,
        }
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.rgb[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.rgb[y * self.width + x] = c;
        self.lab = None;
    }

    pub fn lab_planes(&self) -> Result<&[[f32; 3]], SilhouetteError> {
        self.lab.as_deref().ok_or(SilhouetteError::MissingLab)
    }
}

/// Derive the LAB planes from the RGB data (sRGB primaries, D65 white).
pub fn rgb_to_lab(img: &mut ColorImage) {
    img.lab = Some(img.rgb.iter().map(|&c| lab::srgb_to_lab(c)).collect());
}

/// Binary foreground mask, same dimensions as its source image.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteMask {
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` = foreground.
    pub data: Vec<bool>,
}

impl SilhouetteMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// In-place union with another mask of the same dimensions.
    pub fn union_with(&mut self, other: &Self) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= *b;
        }
    }
}

/// Threshold the score map and clean small speckles.
///
/// A pixel is foreground when its score exceeds `p.threshold`. Afterwards,
/// 4-connected foreground components and background holes smaller than
/// `p.min_component` pixels are flipped.
pub fn segment(
    img: &ColorImage,
    bg: &ColorImage,
    p: &ScoreParams,
) -> Result<SilhouetteMask, SilhouetteError> {
    let omega = score_map::<f64>(img, bg, p)?;
    let mut mask = SilhouetteMask {
        width: img.width,
        height: img.height,
        data: omega.iter().map(|&w| as_f64(w) > p.threshold).collect(),
    };
    if p.min_component > 1 {
        remove_small_components(&mut mask, p.min_component, true);
        remove_small_components(&mut mask, p.min_component, false);
    }
    Ok(mask)
}

/// Flip 4-connected components of `polarity` pixels smaller than `min_size`.
fn remove_small_components(mask: &mut SilhouetteMask, min_size: usize, polarity: bool) {
    let (w, h) = (mask.width, mask.height);
    let mut visited = vec![false; w * h];
    let mut component = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if visited[start] || mask.data[start] != polarity {
            continue;
        }
        component.clear();
        stack.push(start);
        visited[start] = true;
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = (i % w, i / w);
            let mut push = |j: usize| {
                if !visited[j] && mask.data[j] == polarity {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
        if component.len() < min_size {
            for &i in &component {
                mask.data[i] = !polarity;
            }
        }
    }
}

/// Score map rescaled to bytes for debugging dumps (clamped to [0, 255]).
pub fn score_to_bytes<T: Real>(omega: &[T]) -> Vec<u8> {
    omega
        .iter()
        .map(|&w| as_f64(w).clamp(0.0, 255.0).round() as u8)
        .collect()
}

/// Keep `real` linked in for the generic helpers used by submodules.
#[allow(dead_code)]
fn _anchor<T: Real>() -> T {
    real(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone(w: usize, h: usize, fg: [u8; 3], bg: [u8; 3], fg_rect: (usize, usize, usize, usize)) -> (ColorImage, ColorImage) {
        let mut img = ColorImage::filled(w, h, bg);
        let (x0, y0, x1, y1) = fg_rect;
        for y in y0..y1 {
            for x in x0..x1 {
                img.set_pixel(x, y, fg);
            }
        }
        let mut back = ColorImage::filled(w, h, bg);
        rgb_to_lab(&mut img);
        rgb_to_lab(&mut back);
        (img, back)
    }

    #[test]
    fn identical_frames_give_empty_mask() {
        let mut img = ColorImage::filled(16, 12, [90, 120, 60]);
        rgb_to_lab(&mut img);
        let mask = segment(&img, &img.clone(), &ScoreParams::default()).unwrap();
        assert_eq!(mask.foreground_count(), 0);
    }

    #[test]
    fn distinct_patch_is_segmented() {
        let params = ScoreParams {
            min_component: 1,
            ..Default::default()
        };
        let (img, bg) = two_tone(32, 32, [30, 140, 40], [140, 135, 130], (8, 8, 24, 24));
        let mask = segment(&img, &bg, &params).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let inside = (8..24).contains(&x) && (8..24).contains(&y);
                assert_eq!(mask.get(x, y), inside, "at {x},{y}");
            }
        }
    }

    #[test]
    fn small_speckles_are_removed() {
        let params = ScoreParams::default(); // min_component = 25
        // 3x3 = 9 px patch, below the cleanup threshold.
        let (img, bg) = two_tone(32, 32, [30, 140, 40], [140, 135, 130], (10, 10, 13, 13));
        let mask = segment(&img, &bg, &params).unwrap();
        assert_eq!(mask.foreground_count(), 0);
    }

    #[test]
    fn holes_are_filled() {
        let params = ScoreParams::default();
        let (mut img, bg) = two_tone(40, 40, [30, 140, 40], [140, 135, 130], (5, 5, 35, 35));
        // Poke a 2x2 background-colored hole in the middle of the patch.
        for y in 20..22 {
            for x in 20..22 {
                img.set_pixel(x, y, [140, 135, 130]);
            }
        }
        rgb_to_lab(&mut img);
        let mask = segment(&img, &bg, &params).unwrap();
        assert!(mask.get(20, 20) && mask.get(21, 21));
        assert_eq!(mask.foreground_count(), 30 * 30);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut a = ColorImage::filled(8, 8, [0, 0, 0]);
        let mut b = ColorImage::filled(8, 9, [0, 0, 0]);
        rgb_to_lab(&mut a);
        rgb_to_lab(&mut b);
        assert!(segment(&a, &b, &ScoreParams::default()).is_err());
    }
}
