//! Ray positional encoding: anchors sampled along camera rays and BEV
//! verticals, mapped to a fixed sinusoidal code.
//!
//! Camera tokens get `d` anchors spaced evenly in depth along their pixel ray;
//! BEV tokens get `d` anchors stacked along z above the cell center. A query is
//! the pair of one camera ray and one BEV vertical. Coordinates are normalized
//! to the scene region and encoded with `sin`/`cos` at frequencies `π·2^-m`,
//! `m = 0..F`, which keeps code distance monotone in anchor distance.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use crate::error::RayPeError;
use crate::geometry::{Ray, Vec3};
use crate::scene::{BevGrid, SceneRegion};

pub const DEFAULT_ANCHORS: usize = 16;
pub const DEFAULT_EMBED_DIM: usize = 384;
pub const DEFAULT_D_MIN: f64 = 1.0;
pub const DEFAULT_D_MAX: f64 = 54.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorSource {
    Camera,
    Bev,
}

impl fmt::Display for AnchorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnchorSource::Camera => "camera",
            AnchorSource::Bev => "bev",
        })
    }
}

/// Ordered anchors along one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSequence {
    pub source: AnchorSource,
    pub points: Vec<Vec3>,
    /// Ray parameter for camera anchors, height for BEV anchors.
    pub params: Vec<f64>,
    /// Set where the point was clamped into the region.
    pub clamped: Vec<bool>,
}

impl AnchorSequence {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest distance between consecutive anchors.
    pub fn max_spacing(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
    }
}

fn linspace(lo: f64, hi: f64, d: usize, k: usize) -> f64 {
    lo + k as f64 * (hi - lo) / (d - 1) as f64
}

/// `d` anchors at evenly spaced depths in `[d_min, d_max]`, clamped per axis
/// into the region.
pub fn sample_camera_anchors(
    ray: &Ray,
    d: usize,
    region: &SceneRegion,
    d_min: f64,
    d_max: f64,
) -> Result<AnchorSequence, RayPeError> {
    if d < 2 {
        return Err(RayPeError::TooFewAnchors { min: 2, got: d });
    }
    if !(d_min > 0.0 && d_min < d_max && d_max.is_finite()) {
        return Err(RayPeError::BadDepthRange(d_min, d_max));
    }
    let mut seq = AnchorSequence {
        source: AnchorSource::Camera,
        points: Vec::with_capacity(d),
        params: Vec::with_capacity(d),
        clamped: Vec::with_capacity(d),
    };
    for k in 0..d {
        let t = linspace(d_min, d_max, d, k);
        let p = ray.at(t);
        let inside = region.contains(p);
        seq.points.push(if inside { p } else { region.clamp(p) });
        seq.params.push(t);
        seq.clamped.push(!inside);
    }
    Ok(seq)
}

/// `d` anchors along z over the metric cell center, spanning the region's
/// height; a single anchor sits at mid-height.
pub fn sample_bev_anchors(
    cell_center: (f64, f64),
    d: usize,
    region: &SceneRegion,
) -> Result<AnchorSequence, RayPeError> {
    if d < 1 {
        return Err(RayPeError::TooFewAnchors { min: 1, got: d });
    }
    let (x, y) = cell_center;
    let zs: Vec<f64> = if d == 1 {
        vec![(region.z_min + region.z_max) / 2.0]
    } else {
        (0..d).map(|k| linspace(region.z_min, region.z_max, d, k)).collect()
    };
    Ok(AnchorSequence {
        source: AnchorSource::Bev,
        points: zs.iter().map(|&z| Vec3::new(x, y, z)).collect(),
        params: zs,
        clamped: vec![false; d],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionalEncoding {
    pub values: Vec<f64>,
}

impl PositionalEncoding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn distance(&self, other: &PositionalEncoding) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn concat(&self, other: &PositionalEncoding) -> PositionalEncoding {
        PositionalEncoding {
            values: self.values.iter().chain(&other.values).copied().collect(),
        }
    }

    /// CSV `component,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,value\n");
        for (n, v) in self.values.iter().enumerate() {
            writeln!(out, "{n},{v}").unwrap();
        }
        out
    }
}

/// Number of frequencies per coordinate for `d` anchors at `embed_dim`.
pub fn frequency_count(embed_dim: usize, d: usize) -> usize {
    (embed_dim / (6 * d.max(1))).max(1)
}

/// Fixed sinusoidal code of the concatenated, region-normalized anchors,
/// truncated or zero-padded to `embed_dim`.
pub fn embed(
    anchors: &AnchorSequence,
    embed_dim: usize,
    region: &SceneRegion,
) -> Result<PositionalEncoding, RayPeError> {
    if embed_dim < 2 {
        return Err(RayPeError::BadEmbedDim(embed_dim));
    }
    let f = frequency_count(embed_dim, anchors.len());
    let (lo, ext) = (region.min(), region.extent());
    let mut values = Vec::with_capacity(6 * anchors.len() * f);
    'fill: for p in &anchors.points {
        for axis in 0..3 {
            let q = (p.get(axis) - lo.get(axis)) / ext.get(axis);
            for m in 0..f {
                let (s, c) = (q * PI * 0.5f64.powi(m as i32)).sin_cos();
                values.push(s);
                values.push(c);
                if values.len() >= embed_dim {
                    break 'fill;
                }
            }
        }
    }
    values.truncate(embed_dim);
    values.resize(embed_dim, 0.0);
    Ok(PositionalEncoding { values })
}

/// Anchor sequences for a query formed by a camera ray and a BEV vertical.
pub fn query_anchor_pair(
    cam_ray: &Ray,
    bev_cell: (f64, f64),
    d: usize,
    region: &SceneRegion,
    d_min: f64,
    d_max: f64,
) -> Result<(AnchorSequence, AnchorSequence), RayPeError> {
    Ok((
        sample_camera_anchors(cam_ray, d, region, d_min, d_max)?,
        sample_bev_anchors(bev_cell, d, region)?,
    ))
}

/// Camera code followed by BEV code.
pub fn query_encoding(
    pair: &(AnchorSequence, AnchorSequence),
    embed_dim: usize,
    region: &SceneRegion,
) -> Result<PositionalEncoding, RayPeError> {
    Ok(embed(&pair.0, embed_dim, region)?.concat(&embed(&pair.1, embed_dim, region)?))
}

/// Smallest distance between any camera anchor and any BEV anchor.
pub fn min_pair_distance(a: &AnchorSequence, b: &AnchorSequence) -> f64 {
    a.points
        .iter()
        .flat_map(|p| b.points.iter().map(move |q| (*p - *q).norm()))
        .fold(f64::INFINITY, f64::min)
}

/// BEV cell under the first point of `ray` at depth `>= d_min` that lies in
/// the region.
pub fn bev_cell_under_ray(ray: &Ray, region: &SceneRegion, bev: &BevGrid, d_min: f64) -> Option<(usize, usize)> {
    let d = ray.direction();
    let mut t_lo = d_min;
    let mut t_hi = f64::INFINITY;
    for axis in 0..3 {
        let (o, v) = (ray.origin.get(axis), d.get(axis));
        let (lo, hi) = (region.min().get(axis), region.max().get(axis));
        if v == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - o) / v, (hi - o) / v);
        t_lo = t_lo.max(a.min(b));
        t_hi = t_hi.min(a.max(b));
    }
    if t_lo > t_hi {
        return None;
    }
    let p = region.clamp(ray.at(t_lo));
    bev.cell_of(p.x, p.y).or_else(|| {
        // the far region edge maps to one past the last cell
        let i = (((p.y - bev.origin.y) / bev.cell_size).floor() as usize).min(bev.rows - 1);
        let j = (((p.x - bev.origin.x) / bev.cell_size).floor() as usize).min(bev.cols - 1);
        Some((i, j))
    })
}

/// CSV `source,k,x,y,z,clamped` for the given sequences.
pub fn anchors_to_csv(seqs: &[&AnchorSequence]) -> String {
    let mut out = String::from("source,k,x,y,z,clamped\n");
    for seq in seqs {
        for (k, (p, c)) in seq.points.iter().zip(&seq.clamped).enumerate() {
            writeln!(out, "{},{k},{},{},{},{}", seq.source, p.x, p.y, p.z, u8::from(*c)).unwrap();
        }
    }
    out
}

/// Counts from a successful [`check_anchor_dump`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnchorDumpSummary {
    pub camera: usize,
    pub bev: usize,
    pub clamped: usize,
}

/// Verifies the anchor invariants on a dumped CSV: indices run from 0,
/// unclamped camera anchors are collinear and advance monotonically, BEV
/// anchors share x and y with strictly increasing z.
pub fn check_anchor_dump(text: &str) -> Result<AnchorDumpSummary, RayPeError> {
    let fail = |m: String| RayPeError::Dump(m);
    let mut lines = text.lines();
    if lines.next() != Some("source,k,x,y,z,clamped") {
        return Err(fail("missing header".into()));
    }
    let mut cam: Vec<(Vec3, bool)> = Vec::new();
    let mut bev: Vec<Vec3> = Vec::new();
    for (ln, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(fail(format!("line {}: expected 6 fields", ln + 2)));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| fail(format!("line {}: bad number `{s}`", ln + 2)))
        };
        let k: usize = f[1].parse().map_err(|_| fail(format!("line {}: bad index", ln + 2)))?;
        let p = Vec3::new(num(f[2])?, num(f[3])?, num(f[4])?);
        let clamped = match f[5] {
            "0" => false,
            "1" => true,
            other => return Err(fail(format!("line {}: bad clamp flag `{other}`", ln + 2))),
        };
        let expected = match f[0] {
            "camera" => {
                cam.push((p, clamped));
                cam.len() - 1
            }
            "bev" => {
                if clamped {
                    return Err(fail(format!("line {}: BEV anchors are never clamped", ln + 2)));
                }
                bev.push(p);
                bev.len() - 1
            }
            other => return Err(fail(format!("line {}: unknown source `{other}`", ln + 2))),
        };
        if k != expected {
            return Err(fail(format!("line {}: index {k}, expected {expected}", ln + 2)));
        }
    }

    let free: Vec<Vec3> = cam.iter().filter(|(_, c)| !c).map(|(p, _)| *p).collect();
    if free.len() >= 2 {
        let axis = (free[free.len() - 1] - free[0])
            .normalized()
            .ok_or_else(|| fail("camera anchors coincide".into()))?;
        let mut last = f64::NEG_INFINITY;
        for p in &free {
            let rel = *p - free[0];
            let scale = 1.0 + rel.norm();
            if rel.cross(axis).norm() > 1e-9 * scale {
                return Err(fail(format!("camera anchor {p:?} off the ray")));
            }
            let t = rel.dot(axis);
            if t <= last {
                return Err(fail("camera anchors not strictly increasing in depth".into()));
            }
            last = t;
        }
    }
    for w in bev.windows(2) {
        if w[0].x != w[1].x || w[0].y != w[1].y {
            return Err(fail("BEV anchors change x or y".into()));
        }
        if w[1].z <= w[0].z {
            return Err(fail("BEV anchors not strictly increasing in z".into()));
        }
    }
    Ok(AnchorDumpSummary {
        camera: cam.len(),
        bev: bev.len(),
        clamped: cam.iter().filter(|(_, c)| *c).count(),
    })
}
