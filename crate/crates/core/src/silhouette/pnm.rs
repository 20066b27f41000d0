//! Binary PPM (P6) and PGM (P5) readers/writers.
//!
//! PPM carries color frames; PGM carries masks (0 = background, 255 =
//! foreground) and score-map dumps. Headers allow `#` comments.

use super::{ColorImage, SilhouetteMask};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum PnmError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: expected magic {expected}, found {found}")]
    BadMagic {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: malformed header ({detail})")]
    BadHeader { path: String, detail: String },
    #[error("{path}: truncated pixel data")]
    Truncated { path: String },
}

fn io_err(path: &Path, source: std::io::Error) -> PnmError {
    PnmError::Io {
        path: path.display().to_string(),
        source,
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    /// Next whitespace-separated token, skipping `#` comments to end of line.
    fn token(&mut self) -> Option<&'a str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()
    }
}

fn read_header(
    path: &Path,
    bytes: &[u8],
    magic: &str,
) -> Result<(usize, usize, usize), PnmError> {
    let mut r = HeaderReader { bytes, pos: 0 };
    let found = r.token().unwrap_or("").to_string();
    if found != magic {
        return Err(PnmError::BadMagic {
            path: path.display().to_string(),
            expected: magic.to_string(),
            found,
        });
    }
    let mut dims = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        let tok = r.token().ok_or_else(|| PnmError::BadHeader {
            path: path.display().to_string(),
            detail: format!("missing {name}"),
        })?;
        dims[i] = tok.parse().map_err(|_| PnmError::BadHeader {
            path: path.display().to_string(),
            detail: format!("invalid {name} {tok:?}"),
        })?;
    }
    if dims[0] == 0 || dims[1] == 0 || dims[2] == 0 || dims[2] > 255 {
        return Err(PnmError::BadHeader {
            path: path.display().to_string(),
            detail: format!("unsupported dimensions {dims:?}"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    Ok((dims[0], dims[1], r.pos + 1))
}

pub fn write_ppm(path: &Path, img: &ColorImage) -> Result<(), PnmError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut run = || -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
        for px in &img.rgb {
            w.write_all(px)?;
        }
        w.flush()
    };
    run().map_err(|e| io_err(path, e))
}

pub fn read_ppm(path: &Path) -> Result<ColorImage, PnmError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| io_err(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| io_err(path, e))?;
    let (width, height, offset) = read_header(path, &bytes, "P6")?;
    let need = width * height * 3;
    let data = bytes.get(offset..offset + need).ok_or(PnmError::Truncated {
        path: path.display().to_string(),
    })?;
    let rgb = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(ColorImage::new(width, height, rgb))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<(), PnmError> {
    assert_eq!(data.len(), width * height);
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut run = || -> std::io::Result<()> {
        write!(w, "P5\n{width} {height}\n255\n")?;
        w.write_all(data)?;
        w.flush()
    };
    run().map_err(|e| io_err(path, e))
}

/// Read a PGM; any nonzero byte counts as foreground.
pub fn read_pgm(path: &Path) -> Result<SilhouetteMask, PnmError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| io_err(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| io_err(path, e))?;
    let (width, height, offset) = read_header(path, &bytes, "P5")?;
    let need = width * height;
    let data = bytes.get(offset..offset + need).ok_or(PnmError::Truncated {
        path: path.display().to_string(),
    })?;
    Ok(SilhouetteMask {
        width,
        height,
        data: data.iter().map(|&b| b != 0).collect(),
    })
}

/// Mask to PGM bytes: 255 foreground, 0 background.
pub fn mask_to_bytes(mask: &SilhouetteMask) -> Vec<u8> {
    mask.data.iter().map(|&m| if m { 255 } else { 0 }).collect()
}

pub fn write_mask(path: &Path, mask: &SilhouetteMask) -> Result<(), PnmError> {
    write_pgm(path, mask.width, mask.height, &mask_to_bytes(mask))
}
