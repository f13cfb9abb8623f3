//! Ray-aware supervision: a token is positive iff the ray through its cell
//! intersects any ground-truth box.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::RasError;
use crate::geometry::{backproject_pixel_ray, intersect_ray_obb, point_in_obb, OrientedBox3D, Ray, Vec3};
use crate::scene::{GridSpec, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Camera(usize),
    Bev,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Camera(k) => write!(f, "camera:{k}"),
            Modality::Bev => f.write_str("bev"),
        }
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "bev" {
            return Ok(Modality::Bev);
        }
        s.strip_prefix("camera:")
            .and_then(|k| k.parse().ok())
            .map(Modality::Camera)
            .ok_or_else(|| format!("unknown modality `{s}` (expected `bev` or `camera:<k>`)"))
    }
}

/// Binary per-cell supervision over one token grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupervisionMask {
    pub modality: Modality,
    pub rows: usize,
    pub cols: usize,
    values: Vec<u8>,
}

impl SupervisionMask {
    pub fn new(modality: Modality, rows: usize, cols: usize, values: Vec<u8>) -> Result<Self, RasError> {
        if values.len() != rows * cols {
            return Err(RasError::Format(format!(
                "{} values for a {rows}x{cols} grid",
                values.len()
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(RasError::Format("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            modality,
            rows,
            cols,
            values,
        })
    }

    pub fn zeros(modality: Modality, rows: usize, cols: usize) -> Self {
        Self {
            modality,
            rows,
            cols,
            values: vec![0; rows * cols],
        }
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.values[i * self.cols + j] == 1
    }

    pub fn is_positive(&self, index: usize) -> bool {
        self.values[index] == 1
    }

    pub fn count_positive(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn positive_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, &v)| v == 1).map(|(n, _)| n)
    }

    /// Elementwise OR; both masks must share a grid.
    pub fn union(&self, other: &SupervisionMask) -> SupervisionMask {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a | b).collect();
        SupervisionMask { values, ..self.clone() }
    }

    /// Text dump: `RAS <modality> <rows> <cols>` then one line of `0`/`1` per row.
    pub fn to_text(&self) -> String {
        let mut out = format!("RAS {} {} {}\n", self.modality, self.rows, self.cols);
        out.reserve(self.rows * (self.cols + 1));
        for row in self.values.chunks(self.cols.max(1)).take(self.rows) {
            out.extend(row.iter().map(|&v| if v == 1 { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RasError> {
        let fmt_err = |m: String| RasError::Format(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| fmt_err("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [magic, modality, rows, cols] = fields[..] else {
            return Err(fmt_err(format!("bad header `{header}`")));
        };
        if magic != "RAS" {
            return Err(fmt_err(format!("bad magic `{magic}`")));
        }
        let modality: Modality = modality.parse().map_err(fmt_err)?;
        let rows: usize = rows.parse().map_err(|_| fmt_err(format!("bad row count `{rows}`")))?;
        let cols: usize = cols
            .parse()
            .map_err(|_| fmt_err(format!("bad column count `{cols}`")))?;
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| fmt_err(format!("missing row {r} of {rows}")))?;
            if line.len() != cols {
                return Err(fmt_err(format!("row {r} has {} cells, expected {cols}", line.len())));
            }
            for ch in line.chars() {
                values.push(match ch {
                    '0' => 0,
                    '1' => 1,
                    other => return Err(fmt_err(format!("row {r}: unexpected character `{other}`"))),
                });
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(fmt_err("trailing data after last row".into()));
        }
        Self::new(modality, rows, cols, values)
    }
}

/// Token grid for a modality of `scene`.
pub fn grid_of(scene: &Scene, modality: Modality) -> Result<GridSpec, RasError> {
    match modality {
        Modality::Camera(k) => scene.camera(k).map(GridSpec::camera).ok_or(RasError::UnknownCamera(k)),
        Modality::Bev => Ok(GridSpec::Bev(scene.bev)),
    }
}

/// One ray per cell of the modality's grid, row-major.
pub fn cell_rays(scene: &Scene, modality: Modality) -> Result<Vec<Ray>, RasError> {
    match modality {
        Modality::Camera(k) => {
            let rig = scene.camera(k).ok_or(RasError::UnknownCamera(k))?;
            let (rows, cols) = rig.feature_grid_dims();
            Ok((0..rows * cols)
                .map(|n| backproject_pixel_ray(rig, n / cols, n % cols).expect("cell inside grid"))
                .collect())
        }
        Modality::Bev => {
            let g = &scene.bev;
            let z0 = scene.region.z_min;
            Ok((0..g.rows * g.cols)
                .map(|n| {
                    let (x, y) = g.cell_center(n / g.cols, n % g.cols);
                    Ray::new(Vec3::new(x, y, z0), Vec3::Z).expect("unit z")
                })
                .collect())
        }
    }
}

fn hits_any(ray: &Ray, boxes: &[OrientedBox3D]) -> bool {
    boxes.iter().any(|b| intersect_ray_obb(ray, b).is_some())
}

fn mask_from_rays(modality: Modality, grid: GridSpec, rays: &[Ray], boxes: &[OrientedBox3D]) -> SupervisionMask {
    let values = rays.par_iter().map(|r| u8::from(hits_any(r, boxes))).collect();
    SupervisionMask {
        modality,
        rows: grid.rows(),
        cols: grid.cols(),
        values,
    }
}

/// Analytic supervision mask for any modality.
pub fn ras_mask(scene: &Scene, modality: Modality) -> Result<SupervisionMask, RasError> {
    let grid = grid_of(scene, modality)?;
    let rays = cell_rays(scene, modality)?;
    Ok(mask_from_rays(modality, grid, &rays, &scene.boxes))
}

pub fn ras_camera_mask(scene: &Scene, rig_id: usize) -> Result<SupervisionMask, RasError> {
    ras_mask(scene, Modality::Camera(rig_id))
}

/// BEV mask from vertical rays starting at the region floor.
pub fn ras_bev_mask(scene: &Scene) -> SupervisionMask {
    ras_mask(scene, Modality::Bev).expect("BEV grid always exists")
}

/// Masks for every camera followed by the BEV mask.
pub fn ras_all_masks(scene: &Scene) -> Vec<SupervisionMask> {
    let mut masks: Vec<SupervisionMask> = scene
        .cameras
        .par_iter()
        .map(|rig| ras_camera_mask(scene, rig.id).expect("rig from scene"))
        .collect();
    masks.push(ras_bev_mask(scene));
    masks
}

/// One mask per class, each built from that class's boxes only.
pub fn ras_class_masks(scene: &Scene, modality: Modality) -> Result<Vec<SupervisionMask>, RasError> {
    let grid = grid_of(scene, modality)?;
    let rays = cell_rays(scene, modality)?;
    Ok((0..scene.num_classes())
        .map(|c| {
            let boxes: Vec<OrientedBox3D> = scene.boxes.iter().filter(|b| b.class_id == c).copied().collect();
            mask_from_rays(modality, grid, &rays, &boxes)
        })
        .collect())
}

/// For each cell, the box hit first along its ray (smallest `t_near`, then
/// lowest box index).
pub fn nearest_hits(scene: &Scene, modality: Modality) -> Result<Vec<Option<usize>>, RasError> {
    let rays = cell_rays(scene, modality)?;
    Ok(rays
        .par_iter()
        .map(|ray| {
            let mut best: Option<(f64, usize)> = None;
            for (n, b) in scene.boxes.iter().enumerate() {
                if let Some((t, _)) = intersect_ray_obb(ray, b) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, n));
                    }
                }
            }
            best.map(|(_, n)| n)
        })
        .collect())
}

/// Per cell, the longest in-box chord length over all boxes (0 on a miss).
pub fn chord_lengths(scene: &Scene, modality: Modality) -> Result<Vec<f64>, RasError> {
    let rays = cell_rays(scene, modality)?;
    Ok(rays
        .par_iter()
        .map(|ray| {
            scene
                .boxes
                .iter()
                .filter_map(|b| intersect_ray_obb(ray, b))
                .map(|(tn, tf)| tf - tn)
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Sample `t = k·step`, `0 ≤ t ≤ t_max`, and report whether any sample lies in
/// some box. Only samples inside each box's bounding sphere are evaluated; all
/// other samples are outside the box by construction.
fn march_hits(ray: &Ray, boxes: &[OrientedBox3D], step: f64, t_max: f64) -> bool {
    let d = ray.direction();
    boxes.iter().any(|b| {
        let oc = ray.origin - b.center;
        let r = b.bounding_radius();
        let half_b = oc.dot(d);
        let disc = half_b * half_b - (oc.dot(oc) - r * r);
        if disc < 0.0 {
            return false;
        }
        let root = disc.sqrt();
        let t0 = (-half_b - root).max(0.0);
        let t1 = (-half_b + root).min(t_max);
        if t1 < t0 {
            return false;
        }
        let k0 = (t0 / step).ceil() as i64;
        let k1 = (t1 / step).floor() as i64;
        (k0..=k1).any(|k| point_in_obb(ray.at(k as f64 * step), b))
    })
}

/// Brute-force mask by marching every cell ray up to the farthest region corner.
pub fn ras_oracle_mask(scene: &Scene, modality: Modality, march_step: f64) -> Result<SupervisionMask, RasError> {
    if !(march_step > 0.0 && march_step.is_finite()) {
        return Err(RasError::BadMarchStep(march_step));
    }
    let grid = grid_of(scene, modality)?;
    let rays = cell_rays(scene, modality)?;
    let values = rays
        .par_iter()
        .map(|ray| {
            let t_max = scene.region.farthest_corner_distance(ray.origin);
            u8::from(march_hits(ray, &scene.boxes, march_step, t_max))
        })
        .collect();
    Ok(SupervisionMask {
        modality,
        rows: grid.rows(),
        cols: grid.cols(),
        values,
    })
}

pub fn ras_oracle_camera_mask(scene: &Scene, rig_id: usize, march_step: f64) -> Result<SupervisionMask, RasError> {
    ras_oracle_mask(scene, Modality::Camera(rig_id), march_step)
}

/// Agreement between an analytic mask and a marching oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleComparison {
    /// Cells that disagree outside the grazing exclusion.
    pub disagreements: usize,
    /// Cells whose longest chord is shorter than two march steps.
    pub excluded: usize,
}

pub fn compare_with_oracle(
    analytic: &SupervisionMask,
    oracle: &SupervisionMask,
    chords: &[f64],
    march_step: f64,
) -> OracleComparison {
    let mut out = OracleComparison::default();
    for n in 0..analytic.len() {
        let chord = chords[n];
        if chord > 0.0 && chord < 2.0 * march_step {
            out.excluded += 1;
        } else if analytic.values[n] != oracle.values[n] {
            out.disagreements += 1;
        }
    }
    out
}

/// Runs the marching oracle for `modality` and compares it with the analytic mask.
pub fn oracle_check(
    scene: &Scene,
    modality: Modality,
    march_step: f64,
) -> Result<(SupervisionMask, OracleComparison), RasError> {
    let analytic = ras_mask(scene, modality)?;
    let oracle = ras_oracle_mask(scene, modality, march_step)?;
    let chords = chord_lengths(scene, modality)?;
    let cmp = compare_with_oracle(&analytic, &oracle, &chords, march_step);
    Ok((oracle, cmp))
}
