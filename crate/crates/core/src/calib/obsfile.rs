//! Corner observation files.
//!
//! One record per line:
//! `camera_id, tilt_index, pan_index, pan_angle_deg, corner_id, u, v`
//! with `#` starting a comment. Angles are degrees in the file, radians in
//! memory.

use super::{CalibError, CornerObservations, CornerRecord};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn read_corner_file(path: &Path) -> Result<CornerObservations, CalibError> {
    let file = std::fs::File::open(path).map_err(|e| CalibError::ParseError {
        path: path.display().to_string(),
        line: 0,
        detail: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CalibError::ParseError {
            path: path.display().to_string(),
            line: lineno,
            detail: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(CalibError::ParseError {
                path: path.display().to_string(),
                line: lineno,
                detail: format!("expected 7 comma-separated fields, found {}", fields.len()),
            });
        }
        let parse_usize = |s: &str, name: &str| -> Result<usize, CalibError> {
            s.parse().map_err(|_| CalibError::ParseError {
                path: path.display().to_string(),
                line: lineno,
                detail: format!("invalid {name} {s:?}"),
            })
        };
        let parse_f64 = |s: &str, name: &str| -> Result<f64, CalibError> {
            let v: f64 = s.parse().map_err(|_| CalibError::ParseError {
                path: path.display().to_string(),
                line: lineno,
                detail: format!("invalid {name} {s:?}"),
            })?;
            if !v.is_finite() {
                return Err(CalibError::ParseError {
                    path: path.display().to_string(),
                    line: lineno,
                    detail: format!("non-finite {name}"),
                });
            }
            Ok(v)
        };
        records.push(CornerRecord {
            camera: parse_usize(fields[0], "camera_id")?,
            tilt: parse_usize(fields[1], "tilt_index")?,
            pan: parse_usize(fields[2], "pan_index")?,
            pan_angle: parse_f64(fields[3], "pan_angle_deg")?.to_radians(),
            corner: parse_usize(fields[4], "corner_id")?,
            uv: [parse_f64(fields[5], "u")?, parse_f64(fields[6], "v")?],
        });
    }
    Ok(CornerObservations::new(records))
}

pub fn write_corner_file(path: &Path, obs: &CornerObservations) -> Result<(), CalibError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# camera_id, tilt_index, pan_index, pan_angle_deg, corner_id, u, v")?;
    for r in &obs.records {
        writeln!(
            w,
            "{}, {}, {}, {}, {}, {}, {}",
            r.camera,
            r.tilt,
            r.pan,
            r.pan_angle.to_degrees(),
            r.corner,
            r.uv[0],
            r.uv[1]
        )?;
    }
    w.flush()?;
    Ok(())
}
