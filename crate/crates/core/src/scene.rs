//! Synthetic surround-view scenes: ground-truth boxes, camera rigs and the
//! BEV grid, plus their JSON file format.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SceneError;
use crate::geometry::{BoxDims, CameraIntrinsics, CameraRig, Mat3, OrientedBox3D, RigidTransform, Vec3};

/// Axis-aligned scene bounds in the LiDAR frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for SceneRegion {
    /// `[-54, 54]² × [-5, 3]`.
    fn default() -> Self {
        Self {
            x_min: -54.0,
            x_max: 54.0,
            y_min: -54.0,
            y_max: 54.0,
            z_min: -5.0,
            z_max: 3.0,
        }
    }
}

impl SceneRegion {
    pub fn validate(&self) -> Result<(), String> {
        let pairs = [
            ("x", self.x_min, self.x_max),
            ("y", self.y_min, self.y_max),
            ("z", self.z_min, self.z_max),
        ];
        for (axis, lo, hi) in pairs {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(format!("{axis} bounds [{lo}, {hi}] must be finite with min < max"));
            }
        }
        Ok(())
    }

    pub fn min(&self) -> Vec3 {
        Vec3::new(self.x_min, self.y_min, self.z_min)
    }

    pub fn max(&self) -> Vec3 {
        Vec3::new(self.x_max, self.y_max, self.z_max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max() - self.min()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (self.x_min..=self.x_max).contains(&p.x)
            && (self.y_min..=self.y_max).contains(&p.y)
            && (self.z_min..=self.z_max).contains(&p.z)
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
            p.z.clamp(self.z_min, self.z_max),
        )
    }

    /// Distance from `p` to the farthest of the eight region corners.
    pub fn farthest_corner_distance(&self, p: Vec3) -> f64 {
        let dx = (p.x - self.x_min).abs().max((p.x - self.x_max).abs());
        let dy = (p.y - self.y_min).abs().max((p.y - self.y_max).abs());
        let dz = (p.z - self.z_min).abs().max((p.z - self.z_max).abs());
        Vec3::new(dx, dy, dz).norm()
    }
}

/// Bird's-eye-view grid. Row `i` runs along +y, column `j` along +x, starting
/// at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BevGrid {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub origin: Vec3,
}

impl BevGrid {
    pub const DEFAULT_CELL_SIZE: f64 = 0.6;

    /// Grid covering the x–y extent of `region` at `cell_size`.
    pub fn covering(region: &SceneRegion, cell_size: f64) -> Self {
        let e = region.extent();
        Self {
            rows: (e.y / cell_size).round() as usize,
            cols: (e.x / cell_size).round() as usize,
            cell_size,
            origin: region.min(),
        }
    }

    /// Metric `(x, y)` of the center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.x + (j as f64 + 0.5) * self.cell_size,
            self.origin.y + (i as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing metric `(x, y)`, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let j = ((x - self.origin.x) / self.cell_size).floor();
        let i = ((y - self.origin.y) / self.cell_size).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.rows && (j as usize) < self.cols)
            .then_some((i as usize, j as usize))
    }

    fn validate(&self, region: &SceneRegion) -> Result<(), String> {
        if self.rows == 0 || self.cols == 0 {
            return Err("rows and cols must be positive".into());
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) || !self.origin.is_finite() {
            return Err(format!("cell_size {} must be positive", self.cell_size));
        }
        let e = region.extent();
        let span_x = self.cols as f64 * self.cell_size;
        let span_y = self.rows as f64 * self.cell_size;
        if (span_x - e.x).abs() > self.cell_size || (span_y - e.y).abs() > self.cell_size {
            return Err(format!(
                "grid spans {span_x} x {span_y} m but region is {} x {} m",
                e.x, e.y
            ));
        }
        Ok(())
    }
}

/// A token grid: a camera feature map or the BEV plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Camera { rig_id: usize, rows: usize, cols: usize },
    Bev(BevGrid),
}

impl GridSpec {
    pub fn camera(rig: &CameraRig) -> Self {
        let (rows, cols) = rig.feature_grid_dims();
        GridSpec::Camera {
            rig_id: rig.id,
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            GridSpec::Camera { rows, .. } => *rows,
            GridSpec::Bev(g) => g.rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            GridSpec::Camera { cols, .. } => *cols,
            GridSpec::Bev(g) => g.cols,
        }
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ground-truth boxes, sensors and grids for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub region: SceneRegion,
    pub class_names: Vec<String>,
    pub boxes: Vec<OrientedBox3D>,
    pub cameras: Vec<CameraRig>,
    pub bev: BevGrid,
}

impl Scene {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn camera(&self, id: usize) -> Option<&CameraRig> {
        self.cameras.iter().find(|c| c.id == id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.region.validate().map_err(|m| SceneError::invariant("region", m))?;
        if self.class_names.is_empty() {
            return Err(SceneError::invariant("class_names", "at least one class required"));
        }
        let classes = self.num_classes();
        for (n, b) in self.boxes.iter().enumerate() {
            let path = format!("boxes[{n}]");
            b.validate().map_err(|e| SceneError::invariant(&path, e))?;
            if b.class_id >= classes {
                return Err(SceneError::invariant(
                    format!("{path}.class_id"),
                    format!("class {} but only {classes} classes", b.class_id),
                ));
            }
            if !self.region.contains(b.center) {
                return Err(SceneError::invariant(
                    format!("{path}.center"),
                    "box center outside scene region",
                ));
            }
        }
        for (n, rig) in self.cameras.iter().enumerate() {
            rig.validate()
                .map_err(|e| SceneError::invariant(format!("cameras[{n}]"), e))?;
            if self.cameras[..n].iter().any(|o| o.id == rig.id) {
                return Err(SceneError::invariant(
                    format!("cameras[{n}].id"),
                    format!("duplicate camera id {}", rig.id),
                ));
            }
        }
        self.bev
            .validate(&self.region)
            .map_err(|m| SceneError::invariant("bev", m))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization is infallible")
    }

    /// Parses and validates a scene document.
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scene: Scene = serde_path_to_error::deserialize(de).map_err(|e| SceneError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scene::from_json(&text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    std::fs::write(path, scene.to_json() + "\n").map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Per-class ground-truth instance counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDistribution {
    pub counts: Vec<usize>,
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn gt_distribution(scene: &Scene) -> ClassDistribution {
    let mut counts = vec![0; scene.num_classes()];
    for b in &scene.boxes {
        counts[b.class_id] += 1;
    }
    ClassDistribution { counts }
}

/// Size prior for one synthetic category: `[min, max]` of length, width, height.
#[derive(Debug, Clone, Copy)]
pub struct ClassPrior {
    pub name: &'static str,
    pub length: (f64, f64),
    pub width: (f64, f64),
    pub height: (f64, f64),
}

/// Ten categories with nuScenes-like sizes. Ordered so that a two-entry class
/// mix pairs a large class with a small one.
pub const CLASS_PRIORS: [ClassPrior; 10] = [
    ClassPrior {
        name: "car",
        length: (3.9, 4.9),
        width: (1.7, 2.0),
        height: (1.4, 1.8),
    },
    ClassPrior {
        name: "traffic_cone",
        length: (0.3, 0.5),
        width: (0.3, 0.5),
        height: (0.6, 1.1),
    },
    ClassPrior {
        name: "truck",
        length: (6.0, 10.0),
        width: (2.3, 2.8),
        height: (2.5, 3.5),
    },
    ClassPrior {
        name: "bus",
        length: (10.0, 12.5),
        width: (2.8, 3.0),
        height: (3.2, 3.8),
    },
    ClassPrior {
        name: "trailer",
        length: (8.0, 12.0),
        width: (2.3, 2.9),
        height: (3.5, 4.0),
    },
    ClassPrior {
        name: "construction_vehicle",
        length: (5.0, 7.0),
        width: (2.5, 3.0),
        height: (2.8, 3.4),
    },
    ClassPrior {
        name: "pedestrian",
        length: (0.5, 0.9),
        width: (0.5, 0.8),
        height: (1.5, 1.9),
    },
    ClassPrior {
        name: "motorcycle",
        length: (1.8, 2.3),
        width: (0.7, 0.9),
        height: (1.3, 1.6),
    },
    ClassPrior {
        name: "bicycle",
        length: (1.5, 1.9),
        width: (0.5, 0.7),
        height: (1.0, 1.4),
    },
    ClassPrior {
        name: "barrier",
        length: (0.4, 0.6),
        width: (1.8, 2.8),
        height: (0.9, 1.1),
    },
];

/// Ground plane height in the LiDAR frame; boxes rest on it.
pub const GROUND_Z: f64 = -1.8;
/// Camera ring radius around the LiDAR origin.
pub const CAMERA_RING_RADIUS: f64 = 1.0;
/// Minimum gap between a box's bounding circle and the camera ring.
pub const EGO_CLEARANCE: f64 = 0.5;

/// RNG stream used for class draws; geometry uses [`GEOMETRY_STREAM`].
pub const CLASS_STREAM: u64 = 0;
pub const GEOMETRY_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub seed: u64,
    pub n_boxes: usize,
    /// Class probabilities; its length sets the class count.
    pub class_mix: Vec<f64>,
    pub n_cameras: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n_boxes: 30,
            class_mix: vec![0.1; CLASS_PRIORS.len()],
            n_cameras: 6,
        }
    }
}

/// Surround camera `k` of `n`, looking outward at yaw `2πk/n`.
pub fn surround_camera(k: usize, n: usize) -> CameraRig {
    let yaw = 2.0 * PI * k as f64 / n as f64;
    let (s, c) = yaw.sin_cos();
    let forward = Vec3::new(c, s, 0.0);
    let right = Vec3::new(s, -c, 0.0);
    let down = Vec3::new(0.0, 0.0, -1.0);
    CameraRig {
        id: k,
        intrinsics: CameraIntrinsics {
            fx: 400.0,
            fy: 400.0,
            cx: 400.0,
            cy: 160.0,
            width: 800,
            height: 320,
        },
        cam_to_lidar: RigidTransform {
            rotation: Mat3::from_cols(right, down, forward),
            translation: forward * CAMERA_RING_RADIUS,
        },
        feature_stride: 16,
    }
}

/// Index of the category drawn by uniform sample `u` from the cumulative mix.
pub fn categorical(mix: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (c, &p) in mix.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    // u landed in the rounding slack above the final cumulative sum
    mix.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Deterministic synthetic scene over the default region.
pub fn generate_scene(params: &SceneParams) -> Result<Scene, SceneError> {
    let mix = &params.class_mix;
    if mix.is_empty() {
        return Err(SceneError::Params("class mix is empty".into()));
    }
    if mix.len() > CLASS_PRIORS.len() {
        return Err(SceneError::Params(format!(
            "at most {} classes supported, got {}",
            CLASS_PRIORS.len(),
            mix.len()
        )));
    }
    if mix.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(SceneError::Params("class mix entries must be non-negative".into()));
    }
    let total: f64 = mix.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(SceneError::Params(format!("class mix sums to {total}, expected 1")));
    }
    if params.n_cameras == 0 {
        return Err(SceneError::Params("at least one camera required".into()));
    }

    let region = SceneRegion::default();
    let mut class_rng = ChaCha8Rng::seed_from_u64(params.seed);
    class_rng.set_stream(CLASS_STREAM);
    let mut geom_rng = ChaCha8Rng::seed_from_u64(params.seed);
    geom_rng.set_stream(GEOMETRY_STREAM);

    let mut boxes = Vec::with_capacity(params.n_boxes);
    for _ in 0..params.n_boxes {
        let class_id = categorical(mix, class_rng.random::<f64>());
        let prior = &CLASS_PRIORS[class_id];
        let dims = BoxDims::new(
            geom_rng.random_range(prior.length.0..=prior.length.1),
            geom_rng.random_range(prior.width.0..=prior.width.1),
            geom_rng.random_range(prior.height.0..=prior.height.1),
        );
        let yaw = geom_rng.random_range(-PI..PI);
        let mut b = OrientedBox3D::new(Vec3::ZERO, dims, yaw, class_id);
        let footprint_radius = (dims.length.hypot(dims.width)) / 2.0;
        let keep_out = CAMERA_RING_RADIUS + footprint_radius + EGO_CLEARANCE;
        loop {
            let x = geom_rng.random_range(region.x_min..region.x_max);
            let y = geom_rng.random_range(region.y_min..region.y_max);
            b.center = Vec3::new(x, y, GROUND_Z + dims.height / 2.0);
            let inside = b
                .footprint()
                .iter()
                .all(|&(fx, fy)| region.contains(Vec3::new(fx, fy, b.center.z)));
            if inside && x.hypot(y) >= keep_out {
                break;
            }
        }
        boxes.push(b);
    }

    let scene = Scene {
        region,
        class_names: CLASS_PRIORS[..mix.len()].iter().map(|p| p.name.to_string()).collect(),
        boxes,
        cameras: (0..params.n_cameras)
            .map(|k| surround_camera(k, params.n_cameras))
            .collect(),
        bev: BevGrid::covering(&region, BevGrid::DEFAULT_CELL_SIZE),
    };
    debug_assert!(scene.validate().is_ok());
    Ok(scene)
}
