use std::f64::consts::PI;

use proptest::prelude::*;
use sparse_selector::geometry::{Mat3, RigidTransform};
use sparse_selector::ras::{chord_lengths, oracle_check, ras_bev_mask, ras_mask, Modality, SupervisionMask};
use sparse_selector::scene::{generate_scene, Scene, SceneParams};

fn scene(seed: u64, n_boxes: usize) -> Scene {
    generate_scene(&SceneParams {
        seed,
        n_boxes,
        class_mix: vec![0.7, 0.3],
        n_cameras: 6,
    })
    .unwrap()
}

fn modalities(s: &Scene) -> Vec<Modality> {
    s.cameras
        .iter()
        .map(|c| Modality::Camera(c.id))
        .chain([Modality::Bev])
        .collect()
}

fn wrap(yaw: f64) -> f64 {
    let y = (yaw + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Signed distance from (x, y) to the footprint boundary, negative inside.
fn footprint_distance(corners: &[(f64, f64); 4], x: f64, y: f64) -> f64 {
    let mut inside = true;
    let mut edge = f64::INFINITY;
    for k in 0..4 {
        let (ax, ay) = corners[k];
        let (bx, by) = corners[(k + 1) % 4];
        let (ex, ey) = (bx - ax, by - ay);
        let len = (ex * ex + ey * ey).sqrt();
        let cross = (ex * (y - ay) - ey * (x - ax)) / len;
        inside &= cross >= 0.0;
        let s = (((x - ax) * ex + (y - ay) * ey) / (len * len)).clamp(0.0, 1.0);
        let (px, py) = (ax + s * ex, ay + s * ey);
        edge = edge.min(((x - px).powi(2) + (y - py).powi(2)).sqrt());
    }
    if inside {
        -edge
    } else {
        edge
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adding_boxes_only_adds_positives(seed in any::<u64>(), n in 1usize..20) {
        let full = scene(seed, n);
        let mut fewer = full.clone();
        fewer.boxes.truncate(n / 2);
        let mut rest = full.clone();
        rest.boxes.drain(..n / 2);
        for m in modalities(&full) {
            let a = ras_mask(&fewer, m).unwrap();
            let b = ras_mask(&rest, m).unwrap();
            let all = ras_mask(&full, m).unwrap();
            prop_assert!(a.positive_indices().all(|i| all.is_positive(i)));
            prop_assert_eq!(a.union(&b), all);
        }
    }

    #[test]
    fn bev_mask_matches_footprint_oracle(seed in any::<u64>(), n in 0usize..40) {
        let s = scene(seed, n);
        let mask = ras_bev_mask(&s);
        let footprints: Vec<_> = s.boxes.iter().map(|b| b.footprint()).collect();
        for i in 0..s.bev.rows {
            for j in 0..s.bev.cols {
                let (x, y) = s.bev.cell_center(i, j);
                let d = footprints.iter().map(|f| footprint_distance(f, x, y)).fold(f64::INFINITY, f64::min);
                if d.abs() >= 1e-6 {
                    prop_assert_eq!(mask.get(i, j), d < 0.0, "cell ({}, {})", i, j);
                }
            }
        }
    }

    #[test]
    fn camera_masks_are_invariant_under_global_yaw(seed in any::<u64>(), n in 1usize..25, theta in -PI..PI) {
        let s = scene(seed, n);
        let r = Mat3::rot_z(theta);
        let mut rotated = s.clone();
        for b in &mut rotated.boxes {
            b.center = r.mul_vec(b.center);
            b.yaw = wrap(b.yaw + theta);
        }
        let spin = RigidTransform::from_yaw(theta, Default::default());
        for rig in &mut rotated.cameras {
            rig.cam_to_lidar = spin.compose(&rig.cam_to_lidar);
        }
        for rig in &s.cameras {
            let m = Modality::Camera(rig.id);
            let a = ras_mask(&s, m).unwrap();
            let b = ras_mask(&rotated, m).unwrap();
            let chords = chord_lengths(&s, m).unwrap();
            for (k, chord) in chords.iter().enumerate() {
                if *chord == 0.0 || *chord > 1e-6 {
                    prop_assert_eq!(a.is_positive(k), b.is_positive(k), "camera {} cell {}", rig.id, k);
                }
            }
        }
    }

    #[test]
    fn masks_agree_with_marching_oracle(seed in any::<u64>(), n in 1usize..15) {
        let s = scene(seed, n);
        for m in [Modality::Camera(seed as usize % 6), Modality::Bev] {
            let (_, cmp) = oracle_check(&s, m, 0.02).unwrap();
            prop_assert_eq!(cmp.disagreements, 0, "{}", m);
        }
    }

    #[test]
    fn mask_text_round_trips(rows in 1usize..12, cols in 1usize..12, bits in proptest::collection::vec(0u8..2, 144)) {
        let m = SupervisionMask::new(Modality::Camera(3), rows, cols, bits[..rows * cols].to_vec()).unwrap();
        prop_assert_eq!(SupervisionMask::from_text(&m.to_text()).unwrap(), m);
    }
}

#[test]
fn empty_scene_masks_are_zero() {
    let s = scene(7, 0);
    for m in modalities(&s) {
        assert_eq!(ras_mask(&s, m).unwrap().count_positive(), 0);
    }
}
