//! Sparse token selection for multimodal 3D detection.
//!
//! The pipeline labels camera and BEV tokens by casting rays through their
//! cells against ground-truth boxes ([`ras`]), reweights and prunes tokens
//! with class-balanced supervision ([`cbs`]) and encodes token positions from
//! anchors sampled along the same rays ([`raype`]). Scenes are synthetic
//! ([`scene`]); [`render`] and [`eval`] turn results into images and reports.

pub mod cbs;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod logits;
pub mod ras;
pub mod raype;
pub mod render;
pub mod scene;

pub use error::{CbsError, GeometryError, RasError, RayPeError, RenderError, SceneError};
pub use geometry::{
    backproject_pixel_ray, intersect_ray_obb, point_in_obb, project, BoxDims, CameraIntrinsics, CameraRig, Mat3,
    OrientedBox3D, Ray, RigidTransform, Vec3,
};
pub use scene::{generate_scene, gt_distribution, load_scene, save_scene, Scene, SceneParams};
