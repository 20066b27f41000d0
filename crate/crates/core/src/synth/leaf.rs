//! Parametric plant construction with exactly-known leaf geometry.
//!
//! A leaf is a ruled surface: a flat outline profile bent along its length.
//! The profile half-width is a normalized Beta-like curve
//! `h(u) = (W/2) * g(u)/g_max`, `g(u) = u^a (1-u)^b`; the exponents are
//! solved numerically so the flat leaf's area and perimeter match the
//! requested values. Bending the centreline is an isometry, so length,
//! width, perimeter and area carry over to the drooped leaf unchanged —
//! the emitted truth table holds by construction.

use super::SynthError;
use crate::geom::rot_y;
use crate::mesh::TriMesh;
use crate::{Pose, Vec3};

/// One leaf instance: the measurement targets plus a class label.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LeafSpec {
    pub label: String,
    pub length_mm: f64,
    pub width_mm: f64,
    pub perimeter_mm: f64,
    pub area_mm2: f64,
}

impl LeafSpec {
    pub fn new(label: &str, length: f64, width: f64, perimeter: f64, area: f64) -> Self {
        Self {
            label: label.to_string(),
            length_mm: length,
            width_mm: width,
            perimeter_mm: perimeter,
            area_mm2: area,
        }
    }

    /// Leaf sizes of the reference plastic plant (3 size classes).
    pub fn class_b() -> Self {
        Self::new("B", 152.6, 74.5, 350.89, 8535.6)
    }
    pub fn class_c() -> Self {
        Self::new("C", 186.9, 96.6, 436.16, 13303.4)
    }
    pub fn class_d() -> Self {
        Self::new("D", 221.0, 115.6, 519.1, 18868.0)
    }
}

/// Tapered-cylinder pot description (also reused as the removal region).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PotSpec {
    pub y_bottom_mm: f64,
    pub y_top_mm: f64,
    pub r_bottom_mm: f64,
    pub r_top_mm: f64,
}

impl Default for PotSpec {
    fn default() -> Self {
        Self {
            y_bottom_mm: -75.0,
            y_top_mm: 5.0,
            r_bottom_mm: 40.0,
            r_top_mm: 50.0,
        }
    }
}

/// Scene description: a stem-and-leaves plant in a pot.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    /// Leaf instances; the default set replicates the reference plant
    /// composition (4 x B, 2 x C, 6 x D), interleaved around the stem.
    pub leaves: Vec<LeafSpec>,
    pub stem_radius_mm: f64,
    pub stem_top_mm: f64,
    /// Attachment height of the first leaf and per-leaf increment.
    pub attach_base_mm: f64,
    pub attach_step_mm: f64,
    /// Initial leaf elevation above horizontal, degrees.
    pub elevation_deg: f64,
    /// Total droop (decrease of elevation tip-to-base), degrees.
    pub droop_deg: f64,
    pub pot: PotSpec,
    /// Tessellation: rows along the leaf, columns across.
    pub leaf_rows: usize,
    pub leaf_cols: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        let (b, c, d) = (LeafSpec::class_b, LeafSpec::class_c, LeafSpec::class_d);
        Self {
            leaves: vec![
                d(), b(), d(), b(), d(), c(), d(), b(), d(), b(), d(), c(),
            ],
            stem_radius_mm: 4.0,
            stem_top_mm: 260.0,
            attach_base_mm: 60.0,
            attach_step_mm: 12.0,
            elevation_deg: 50.0,
            droop_deg: 70.0,
            pot: PotSpec::default(),
            leaf_rows: 160,
            leaf_cols: 7,
        }
    }
}

/// Ground-truth measurements emitted with the plant mesh: one row per leaf,
/// same quantities as the measurement report.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantTruth {
    /// (label, [length, width, perimeter, area])
    pub rows: Vec<(String, [f64; 4])>,
}

impl PlantTruth {
    pub fn save_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "label,length_mm,width_mm,perimeter_mm,area_mm2")?;
        for (label, m) in &self.rows {
            writeln!(w, "{label},{},{},{},{}", m[0], m[1], m[2], m[3])?;
        }
        w.flush()
    }

    pub fn load_csv(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || i == 0 && line.starts_with("label") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: expected 5 fields", path.display(), i + 1),
                ));
            }
            let mut vals = [0.0f64; 4];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = fields[k + 1].parse().map_err(|_| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("{}:{}: bad number {:?}", path.display(), i + 1, fields[k + 1]),
                    )
                })?;
            }
            rows.push((fields[0].to_string(), vals));
        }
        Ok(Self { rows })
    }
}

/// Flat outline profile with solved exponents.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LeafProfile {
    pub length: f64,
    pub half_width: f64,
    pub a: f64,
    pub b: f64,
}

impl LeafProfile {
    /// Normalized half-width at u in [0, 1].
    fn shape(&self, u: f64) -> f64 {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let peak = self.a / (self.a + self.b);
        let g_max = peak.powf(self.a) * (1.0 - peak).powf(self.b);
        u.powf(self.a) * (1.0 - u).powf(self.b) / g_max
    }

    pub fn half_width_at(&self, u: f64) -> f64 {
        self.half_width * self.shape(u)
    }

    /// Flat area by quadrature (cosine-graded panels handle the tips).
    fn area(&self) -> f64 {
        integrate_graded(|u| 2.0 * self.half_width_at(u), 4096) * self.length
    }

    /// Flat outline perimeter (two mirrored edges) by polyline refinement.
    fn perimeter(&self) -> f64 {
        let n = 200_000;
        let mut total = 0.0;
        let mut prev = [0.0f64, 0.0f64];
        for i in 1..=n {
            let t = i as f64 / n as f64;
            let u = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
            let p = [self.length * u, self.half_width_at(u)];
            total += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
            prev = p;
        }
        2.0 * total
    }
}

/// Graded midpoint-free quadrature: Gauss-Legendre 8-point on cosine-graded
/// panels, clustering nodes at both endpoints.
fn integrate_graded(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    // 8-point Gauss-Legendre nodes/weights on [-1, 1].
    const X: [f64; 8] = [
        -0.9602898564975363,
        -0.7966664774136267,
        -0.525532409916329,
        -0.18343464249564978,
        0.18343464249564978,
        0.525532409916329,
        0.7966664774136267,
        0.9602898564975363,
    ];
    const W: [f64; 8] = [
        0.10122853629037669,
        0.22238103445337434,
        0.31370664587788705,
        0.36268378337836177,
        0.36268378337836177,
        0.31370664587788705,
        0.22238103445337434,
        0.10122853629037669,
    ];
    let grade = |t: f64| 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
    let dgrade = |t: f64| 0.5 * std::f64::consts::PI * (std::f64::consts::PI * t).sin();
    let mut sum = 0.0;
    for p in 0..panels {
        let t0 = p as f64 / panels as f64;
        let t1 = (p + 1) as f64 / panels as f64;
        let (mid, half) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        for (x, w) in X.iter().zip(&W) {
            let t = mid + half * x;
            sum += w * half * f(grade(t)) * dgrade(t);
        }
    }
    sum
}

/// Solve profile exponents so the flat leaf hits the requested area and
/// perimeter exactly (to solver tolerance).
pub(crate) fn solve_profile(spec: &LeafSpec) -> Result<LeafProfile, SynthError> {
    let mk = |a: f64, b: f64| LeafProfile {
        length: spec.length_mm,
        half_width: spec.width_mm / 2.0,
        a,
        b,
    };
    let target = [spec.area_mm2, spec.perimeter_mm];
    let eval = |a: f64, b: f64| {
        let p = mk(a, b);
        [p.area(), p.perimeter()]
    };
    // Newton with finite differences, exponents kept in a safe bracket.
    let clampab = |v: f64| v.clamp(0.55, 6.0);
    let (mut a, mut b) = (0.8, 1.0);
    for _ in 0..60 {
        let f0 = eval(a, b);
        let r = [f0[0] - target[0], f0[1] - target[1]];
        let err = (r[0] / target[0]).abs().max((r[1] / target[1]).abs());
        if err < 1e-10 {
            return Ok(mk(a, b));
        }
        let h = 1e-6;
        let fa = eval(a + h, b);
        let fb = eval(a, b + h);
        let j = [
            [(fa[0] - f0[0]) / h, (fb[0] - f0[0]) / h],
            [(fa[1] - f0[1]) / h, (fb[1] - f0[1]) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-12 {
            break;
        }
        let da = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let db = (r[1] * j[0][0] - r[0] * j[1][0]) / det;
        // Damped update.
        let scale = 1.0f64.min(0.5 / (da.abs() / a.max(0.1)).max(db.abs() / b.max(0.1)));
        a = clampab(a - scale * da);
        b = clampab(b - scale * db);
    }
    Err(SynthError::LeafShapeInfeasible {
        label: spec.label.clone(),
        detail: format!(
            "no profile exponents reach area {} and perimeter {} at {} x {}",
            spec.area_mm2, spec.perimeter_mm, spec.length_mm, spec.width_mm
        ),
    })
}

/// Drooping centreline: elevation decreases linearly with arclength.
struct Centreline {
    elevation0: f64,
    /// Elevation decrease per mm (>= 0).
    droop_rate: f64,
}

impl Centreline {
    /// Position in the leaf's vertical plane at arclength s:
    /// (radial, vertical).
    fn at(&self, s: f64) -> [f64; 2] {
        let l0 = self.elevation0;
        let k = self.droop_rate;
        if k.abs() < 1e-12 {
            return [s * l0.cos(), s * l0.sin()];
        }
        let l = l0 - k * s;
        // Integrals of cos/sin of a linearly varying angle.
        [(l0.sin() - l.sin()) / -k, (l.cos() - l0.cos()) / k]
    }
}

/// Build one leaf mesh in world coordinates.
fn leaf_mesh(
    profile: &LeafProfile,
    centre: &Centreline,
    azimuth: f64,
    attach: Vec3,
    rows: usize,
    cols: usize,
) -> TriMesh {
    assert!(rows >= 2 && cols >= 2);
    let place = Pose::new(rot_y(azimuth), Vec3::zeros());
    let mut vertices = Vec::with_capacity((rows + 1) * (cols + 1));
    for i in 0..=rows {
        let t = i as f64 / rows as f64;
        // Cosine grading keeps the narrow tips well tessellated.
        let u = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
        let s = profile.length * u;
        let [radial, vertical] = centre.at(s);
        let h = profile.half_width_at(u);
        for j in 0..=cols {
            let w = (2.0 * j as f64 / cols as f64 - 1.0) * h;
            let local = Vec3::new(w, vertical, radial);
            vertices.push(place.apply(&(local)) + attach);
        }
    }
    let mut triangles = Vec::new();
    let stride = (cols + 1) as u32;
    for i in 0..rows as u32 {
        for j in 0..cols as u32 {
            let v00 = i * stride + j;
            let v01 = v00 + 1;
            let v10 = v00 + stride;
            let v11 = v10 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut mesh = TriMesh::new(vertices, triangles);
    // Tip rows collapse to zero width; drop the resulting slivers.
    mesh.drop_degenerate_triangles(1e-9);
    mesh
}

/// Closed cylinder/frustum between two y-levels.
fn frustum_mesh(y0: f64, r0: f64, y1: f64, r1: f64, segments: usize) -> TriMesh {
    let n = segments as u32;
    let mut vertices = Vec::new();
    for (y, r) in [(y0, r0), (y1, r1)] {
        for s in 0..segments {
            let a = std::f64::consts::TAU * s as f64 / segments as f64;
            vertices.push(Vec3::new(r * a.cos(), y, r * a.sin()));
        }
    }
    vertices.push(Vec3::new(0.0, y0, 0.0));
    vertices.push(Vec3::new(0.0, y1, 0.0));
    let (c0, c1) = (2 * n, 2 * n + 1);
    let mut triangles = Vec::new();
    for s in 0..n {
        let s2 = (s + 1) % n;
        // Side wall.
        triangles.push([s, n + s, n + s2]);
        triangles.push([s, n + s2, s2]);
        // Caps (bottom faces down, top faces up).
        triangles.push([c0, s, s2]);
        triangles.push([c1, n + s2, n + s]);
    }
    TriMesh::new(vertices, triangles)
}

/// Generate the plant mesh plus its exact truth table.
///
/// Leaves are arranged around the stem at 360/n-degree steps with
/// staircase attachment heights. Logs a warning when leaf bounding boxes
/// overlap appreciably.
pub fn make_plant_mesh(spec: &SceneSpec) -> Result<(TriMesh, PlantTruth), SynthError> {
    let mut mesh = TriMesh::default();
    let mut truth_rows = Vec::new();
    let mut leaf_bounds = Vec::new();

    for (idx, leaf) in spec.leaves.iter().enumerate() {
        let profile = solve_profile(leaf)?;
        let droop_rate = spec.droop_deg.to_radians() / leaf.length_mm;
        let centre = Centreline {
            elevation0: spec.elevation_deg.to_radians(),
            droop_rate,
        };
        let azimuth = std::f64::consts::TAU * idx as f64 / spec.leaves.len() as f64;
        let attach_y = spec.attach_base_mm + spec.attach_step_mm * idx as f64;
        let attach = Vec3::new(
            spec.stem_radius_mm * 0.5 * azimuth.sin(),
            attach_y,
            spec.stem_radius_mm * 0.5 * azimuth.cos(),
        );
        let lm = leaf_mesh(
            &profile,
            &centre,
            azimuth,
            attach,
            spec.leaf_rows,
            spec.leaf_cols,
        );
        if let Some(b) = lm.bounds() {
            leaf_bounds.push(b);
        }
        mesh.append(&lm);
        truth_rows.push((
            leaf.label.clone(),
            [leaf.length_mm, leaf.width_mm, leaf.perimeter_mm, leaf.area_mm2],
        ));
    }

    // Stem and pot.
    mesh.append(&frustum_mesh(
        0.0,
        spec.stem_radius_mm,
        spec.stem_top_mm,
        spec.stem_radius_mm * 0.75,
        24,
    ));
    mesh.append(&frustum_mesh(
        spec.pot.y_bottom_mm,
        spec.pot.r_bottom_mm,
        spec.pot.y_top_mm,
        spec.pot.r_top_mm,
        48,
    ));

    // Cheap overlap diagnostic on leaf bounding boxes.
    for i in 0..leaf_bounds.len() {
        for j in i + 1..leaf_bounds.len() {
            let (alo, ahi) = leaf_bounds[i];
            let (blo, bhi) = leaf_bounds[j];
            let inter = (ahi.inf(&bhi) - alo.sup(&blo));
            if inter[0] > 0.0 && inter[1] > 0.0 && inter[2] > 0.0 {
                let vol = inter[0] * inter[1] * inter[2];
                let a_vol = (ahi - alo)[0] * (ahi - alo)[1] * (ahi - alo)[2];
                if vol > 0.5 * a_vol {
                    log::warn!("leaves {i} and {j} overlap substantially (bbox check)");
                }
            }
        }
    }

    Ok((mesh, PlantTruth { rows: truth_rows }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_matches_targets_for_all_classes() {
        for spec in [LeafSpec::class_b(), LeafSpec::class_c(), LeafSpec::class_d()] {
            let p = solve_profile(&spec).unwrap();
            assert!(
                (p.area() - spec.area_mm2).abs() / spec.area_mm2 < 1e-8,
                "{}: area {} vs {}",
                spec.label,
                p.area(),
                spec.area_mm2
            );
            assert!(
                (p.perimeter() - spec.perimeter_mm).abs() / spec.perimeter_mm < 1e-8,
                "{}: perimeter {} vs {}",
                spec.label,
                p.perimeter(),
                spec.perimeter_mm
            );
        }
    }

    #[test]
    fn flat_leaf_area_matches_quadrature_of_tessellation() {
        // Zero droop: the tessellated area must converge to the analytic one.
        let spec = LeafSpec::class_b();
        let profile = solve_profile(&spec).unwrap();
        let centre = Centreline {
            elevation0: 0.0,
            droop_rate: 0.0,
        };
        let mesh = leaf_mesh(&profile, &centre, 0.0, Vec3::zeros(), 400, 8);
        let err = (mesh.surface_area() - spec.area_mm2).abs() / spec.area_mm2;
        assert!(err < 1e-3, "tessellated area error {err}");
    }

    #[test]
    fn drooped_leaf_preserves_area() {
        let spec = LeafSpec::class_d();
        let profile = solve_profile(&spec).unwrap();
        let drooped = Centreline {
            elevation0: 50f64.to_radians(),
            droop_rate: 70f64.to_radians() / spec.length_mm,
        };
        let mesh = leaf_mesh(&profile, &drooped, 0.8, Vec3::new(0.0, 60.0, 0.0), 400, 8);
        let err = (mesh.surface_area() - spec.area_mm2).abs() / spec.area_mm2;
        assert!(err < 2e-3, "drooped area error {err}");
    }

    #[test]
    fn plant_mesh_has_pot_stem_and_12_leaves() {
        let spec = SceneSpec::default();
        let (mesh, truth) = make_plant_mesh(&spec).unwrap();
        assert_eq!(truth.rows.len(), 12);
        assert_eq!(
            truth.rows.iter().filter(|(l, _)| l == "B").count(),
            4
        );
        assert_eq!(truth.rows.iter().filter(|(l, _)| l == "C").count(), 2);
        assert_eq!(truth.rows.iter().filter(|(l, _)| l == "D").count(), 6);
        let (lo, hi) = mesh.bounds().unwrap();
        assert!(lo[1] < -70.0 && hi[1] > 250.0);
        // The plant stays inside a 230 mm radius so default rigs frame it.
        let max_r = mesh
            .vertices
            .iter()
            .map(|v| (v[0] * v[0] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max);
        assert!(max_r < 230.0, "plant radius {max_r}");
    }

    #[test]
    fn truth_csv_round_trips() {
        let dir = std::env::temp_dir().join("phenoscan_truth_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("truth.csv");
        let truth = PlantTruth {
            rows: vec![
                ("B".into(), [152.6, 74.5, 350.89, 8535.6]),
                ("D".into(), [221.0, 115.6, 519.1, 18868.0]),
            ],
        };
        truth.save_csv(&path).unwrap();
        let back = PlantTruth::load_csv(&path).unwrap();
        assert_eq!(back, truth);
    }
}
