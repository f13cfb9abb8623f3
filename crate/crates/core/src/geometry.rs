//! Exact 3D primitives in the LiDAR frame: vectors, rigid transforms,
//! pinhole cameras, rays and yaw-rotated boxes.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Absolute tolerance, in meters, for geometric equalities.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction; `None` for zero or non-finite input.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn get(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Row-major 3×3 matrix. Serialized as nine row-major reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 9]", into = "[f64; 9]")]
pub struct Mat3 {
    pub rows: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self { rows }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self {
            rows: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    /// Counter-clockwise rotation by `angle` radians about +z.
    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rows: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn transpose(&self) -> Mat3 {
        let r = &self.rows;
        Mat3 {
            rows: [
                [r[0][0], r[1][0], r[2][0]],
                [r[0][1], r[1][1], r[2][1]],
                [r[0][2], r[1][2], r[2][2]],
            ],
        }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Mat3 { rows }
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().mul_mat(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.rows[i][j] - target).abs());
            }
        }
        worst
    }
}

impl From<[f64; 9]> for Mat3 {
    fn from(a: [f64; 9]) -> Self {
        Mat3 {
            rows: [[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]],
        }
    }
}

impl From<Mat3> for [f64; 9] {
    fn from(m: Mat3) -> Self {
        let r = m.rows;
        [
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        ]
    }
}

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let t = Self { rotation, translation };
        t.validate()?;
        Ok(t)
    }

    /// Rotation about +z by `yaw`, then translation.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        Self {
            rotation: Mat3::rot_z(yaw),
            translation,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = self.rotation.rows.iter().flatten().all(|v| v.is_finite()) && self.translation.is_finite();
        if !finite {
            return Err(GeometryError::NonFinite("rigid transform"));
        }
        let err = self.rotation.orthonormality_error();
        if err > GEOM_EPS {
            return Err(GeometryError::NotOrthonormal(err));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > GEOM_EPS {
            return Err(GeometryError::Reflection(det));
        }
        Ok(())
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.mul_vec(v)
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -rt.mul_vec(self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.mul_mat(&other.rotation),
            translation: self.apply_point(other.translation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && (0.0..=self.width as f64).contains(&self.cx)
            && (0.0..=self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(format!("{self:?}")))
        }
    }

    /// `K⁻¹·(u, v, 1)`.
    pub fn unproject(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub id: usize,
    pub intrinsics: CameraIntrinsics,
    pub cam_to_lidar: RigidTransform,
    pub feature_stride: u32,
}

impl CameraRig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        self.intrinsics.validate()?;
        self.cam_to_lidar.validate()?;
        if self.feature_stride == 0 {
            return Err(GeometryError::InvalidStride);
        }
        Ok(())
    }

    /// Camera origin expressed in the LiDAR frame.
    pub fn optical_center(&self) -> Vec3 {
        self.cam_to_lidar.apply_point(Vec3::ZERO)
    }

    /// Feature grid `(rows, cols)` after downsampling by the stride.
    pub fn feature_grid_dims(&self) -> (usize, usize) {
        let s = self.feature_stride;
        (
            self.intrinsics.height.div_ceil(s) as usize,
            self.intrinsics.width.div_ceil(s) as usize,
        )
    }

    /// Full-resolution pixel center of feature cell `(i, j)`.
    pub fn cell_center_pixel(&self, i: usize, j: usize) -> (f64, f64) {
        let s = self.feature_stride as f64;
        (s * (j as f64 + 0.5), s * (i as f64 + 0.5))
    }

    pub fn lidar_to_cam(&self) -> RigidTransform {
        self.cam_to_lidar.inverse()
    }
}

/// Pinhole projection of a camera-frame point to pixel coordinates.
pub fn project(rig: &CameraRig, p_cam: Vec3) -> Result<(f64, f64), GeometryError> {
    if !(p_cam.z > 0.0) {
        return Err(GeometryError::BehindCamera(p_cam.z));
    }
    let k = &rig.intrinsics;
    Ok((k.fx * p_cam.x / p_cam.z + k.cx, k.fy * p_cam.y / p_cam.z + k.cy))
}

/// LiDAR-frame ray through the center of feature cell `(i, j)` (row, column).
pub fn backproject_pixel_ray(rig: &CameraRig, i: usize, j: usize) -> Result<Ray, GeometryError> {
    let (rows, cols) = rig.feature_grid_dims();
    if i >= rows || j >= cols {
        return Err(GeometryError::PixelOutOfGrid { i, j, rows, cols });
    }
    let (u, v) = rig.cell_center_pixel(i, j);
    let dir_cam = rig.intrinsics.unproject(u, v);
    Ray::new(rig.optical_center(), rig.cam_to_lidar.apply_vector(dir_cam))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        if !origin.is_finite() {
            return Err(GeometryError::NonFinite("ray origin"));
        }
        let direction = direction.normalized().ok_or(GeometryError::ZeroDirection)?;
        Ok(Self { origin, direction })
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Box extents along its local x (length), y (width) and z (height) axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct BoxDims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl BoxDims {
    pub const fn new(length: f64, width: f64, height: f64) -> Self {
        Self { length, width, height }
    }

    pub fn half(&self) -> Vec3 {
        Vec3::new(self.length / 2.0, self.width / 2.0, self.height / 2.0)
    }
}

impl From<[f64; 3]> for BoxDims {
    fn from(a: [f64; 3]) -> Self {
        BoxDims::new(a[0], a[1], a[2])
    }
}

impl From<BoxDims> for [f64; 3] {
    fn from(d: BoxDims) -> Self {
        [d.length, d.width, d.height]
    }
}

/// Ground-truth cuboid rotated by `yaw` about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3D {
    pub center: Vec3,
    pub dims: BoxDims,
    pub yaw: f64,
    pub class_id: usize,
}

impl OrientedBox3D {
    pub fn new(center: Vec3, dims: BoxDims, yaw: f64, class_id: usize) -> Self {
        Self {
            center,
            dims,
            yaw,
            class_id,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.center.is_finite() || !self.yaw.is_finite() {
            return Err(GeometryError::NonFinite("box"));
        }
        let d = self.dims;
        if !(d.length > 0.0 && d.width > 0.0 && d.height > 0.0)
            || !(d.length.is_finite() && d.width.is_finite() && d.height.is_finite())
        {
            return Err(GeometryError::InvalidBox(format!(
                "dims must be positive, got ({}, {}, {})",
                d.length, d.width, d.height
            )));
        }
        if !(-std::f64::consts::PI..std::f64::consts::PI).contains(&self.yaw) {
            return Err(GeometryError::InvalidBox(format!("yaw {} outside [-pi, pi)", self.yaw)));
        }
        Ok(())
    }

    /// Box-local → LiDAR frame.
    pub fn pose(&self) -> RigidTransform {
        RigidTransform::from_yaw(self.yaw, self.center)
    }

    pub fn to_local(&self, p: Vec3) -> Vec3 {
        Mat3::rot_z(-self.yaw).mul_vec(p - self.center)
    }

    /// The four footprint corners in the x–y plane, counter-clockwise.
    pub fn footprint(&self) -> [(f64, f64); 4] {
        let h = self.dims.half();
        let pose = self.pose();
        [(h.x, h.y), (-h.x, h.y), (-h.x, -h.y), (h.x, -h.y)].map(|(x, y)| {
            let p = pose.apply_point(Vec3::new(x, y, 0.0));
            (p.x, p.y)
        })
    }

    /// All eight corners in the LiDAR frame.
    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.dims.half();
        let pose = self.pose();
        let mut out = [Vec3::ZERO; 8];
        for (n, c) in out.iter_mut().enumerate() {
            let sx = if n & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if n & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if n & 4 == 0 { -1.0 } else { 1.0 };
            *c = pose.apply_point(Vec3::new(sx * h.x, sy * h.y, sz * h.z));
        }
        out
    }

    /// Radius of the sphere around `center` that encloses the box.
    pub fn bounding_radius(&self) -> f64 {
        self.dims.half().norm()
    }
}

/// True iff `p` lies inside the closed box.
pub fn point_in_obb(p: Vec3, b: &OrientedBox3D) -> bool {
    let local = b.to_local(p);
    let h = b.dims.half();
    local.x.abs() <= h.x && local.y.abs() <= h.y && local.z.abs() <= h.z
}

/// Parametric interval `(t_near, t_far)` of the ray inside the box.
///
/// Slab test in the box frame. Hits starting behind the origin are clamped to
/// `t_near = 0`; intervals of zero length (edge or corner grazes) are misses.
pub fn intersect_ray_obb(ray: &Ray, b: &OrientedBox3D) -> Option<(f64, f64)> {
    let to_local = Mat3::rot_z(-b.yaw);
    let o = to_local.mul_vec(ray.origin - b.center);
    let d = to_local.mul_vec(ray.direction);
    let h = b.dims.half();

    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let (oa, da, ha) = (o.get(axis), d.get(axis), h.get(axis));
        if da == 0.0 {
            if oa < -ha || oa > ha {
                return None;
            }
            continue;
        }
        let inv = 1.0 / da;
        let (mut t0, mut t1) = ((-ha - oa) * inv, (ha - oa) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
    }
    let t_near = t_near.max(0.0);
    (t_far > t_near).then_some((t_near, t_far))
}
