//! Browser demo: generate a scene, view ray-aware masks, run class-balanced
//! token selection, and trace ray positional-encoding anchors.
//!
//! Images are returned as RGBA bytes, one pixel per token, for direct use in
//! an `ImageData`.

use sparse_selector::cbs::{
    foreground_recall, perclass_recall_from_masks, select_tokens, select_tokens_plain, CbsConfig, TokenSet,
};
use sparse_selector::eval::scene_weights;
use sparse_selector::logits::{synthesize, SyntheticLogits};
use sparse_selector::ras::{grid_of, ras_class_masks, ras_mask, Modality, SupervisionMask};
use sparse_selector::raype::{bev_cell_under_ray, query_anchor_pair, DEFAULT_D_MAX, DEFAULT_D_MIN};
use sparse_selector::render::{KEPT_NEGATIVE, KEPT_POSITIVE, NEGATIVE, POSITIVE};
use sparse_selector::{backproject_pixel_ray, generate_scene, gt_distribution, Scene, SceneParams};
use wasm_bindgen::prelude::*;

fn js_err(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

fn modality(grid: &str) -> Result<Modality, JsError> {
    grid.parse::<Modality>().map_err(js_err)
}

fn rgba(colors: impl Iterator<Item = [u8; 3]>) -> Vec<u8> {
    colors.flat_map(|[r, g, b]| [r, g, b, 255]).collect()
}

fn mask_colors(mask: &SupervisionMask) -> Vec<u8> {
    rgba((0..mask.len()).map(|n| if mask.is_positive(n) { POSITIVE } else { NEGATIVE }))
}

fn overlay_colors(mask: &SupervisionMask, tok: &TokenSet) -> Vec<u8> {
    rgba((0..mask.len()).map(|n| match (tok.contains(n), mask.is_positive(n)) {
        (true, true) => KEPT_POSITIVE,
        (true, false) => KEPT_NEGATIVE,
        (false, true) => POSITIVE,
        (false, false) => NEGATIVE,
    }))
}

/// Selection outcome for one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub rgba: Vec<u8>,
    pub kept: usize,
    pub tokens: usize,
    pub foreground_recall: f64,
    /// Per class: (CBS recall, plain top-k recall); `None` without positives.
    pub class_recall: Vec<(Option<f64>, Option<f64>)>,
}

/// A generated scene plus the operations the page exposes.
#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

impl Demo {
    pub fn from_params(params: &SceneParams) -> Result<Demo, String> {
        Ok(Demo {
            scene: generate_scene(params).map_err(|e| e.to_string())?,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn mask(&self, m: Modality) -> Result<SupervisionMask, String> {
        ras_mask(&self.scene, m).map_err(|e| e.to_string())
    }

    pub fn selection(&self, m: Modality, rho: f64, lambda: f64, sigma: f64, seed: u64) -> Result<Selection, String> {
        let cfg = CbsConfig {
            lambda,
            rho,
            ..Default::default()
        };
        cfg.validate().map_err(|e| e.to_string())?;
        let source = if sigma > 0.0 {
            SyntheticLogits::Noisy(sigma)
        } else {
            SyntheticLogits::Perfect
        };
        let sal = synthesize(&self.scene, m, source, seed).map_err(|e| e.to_string())?;
        let w = scene_weights(&self.scene, &sal, &cfg).map_err(|e| e.to_string())?;
        let tok = select_tokens(&sal, &w, rho).map_err(|e| e.to_string())?;
        let plain = select_tokens_plain(&sal, rho).map_err(|e| e.to_string())?;
        let mask = self.mask(m)?;
        let class_masks = ras_class_masks(&self.scene, m).map_err(|e| e.to_string())?;
        let cbs = perclass_recall_from_masks(&tok, &mask, &class_masks).map_err(|e| e.to_string())?;
        let base = perclass_recall_from_masks(&plain, &mask, &class_masks).map_err(|e| e.to_string())?;
        Ok(Selection {
            rgba: overlay_colors(&mask, &tok),
            kept: tok.len(),
            tokens: sal.len(),
            foreground_recall: foreground_recall(&tok, &mask).map_err(|e| e.to_string())?,
            class_recall: cbs.into_iter().zip(base).collect(),
        })
    }

    /// Camera anchors then BEV anchors as flat `x, y, z, clamped` quadruples,
    /// plus the chosen BEV cell.
    pub fn anchors(&self, camera: usize, i: usize, j: usize, d: usize) -> Result<(Vec<f64>, (usize, usize)), String> {
        let rig = self.scene.camera(camera).ok_or_else(|| format!("no camera {camera}"))?;
        let (rows, cols) = rig.feature_grid_dims();
        if i >= rows || j >= cols {
            return Err(format!("cell ({i}, {j}) outside the {rows}x{cols} grid"));
        }
        let ray = backproject_pixel_ray(rig, i, j).map_err(|e| e.to_string())?;
        let s = &self.scene;
        let cell = bev_cell_under_ray(&ray, &s.region, &s.bev, DEFAULT_D_MIN).ok_or("ray misses the region")?;
        let (cam, bev) = query_anchor_pair(
            &ray,
            s.bev.cell_center(cell.0, cell.1),
            d,
            &s.region,
            DEFAULT_D_MIN,
            DEFAULT_D_MAX,
        )
        .map_err(|e| e.to_string())?;
        let flat = [cam, bev]
            .iter()
            .flat_map(|seq| {
                seq.points
                    .iter()
                    .zip(&seq.clamped)
                    .flat_map(|(p, c)| [p.x, p.y, p.z, f64::from(u8::from(*c))])
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok((flat, cell))
    }
}

#[wasm_bindgen]
impl Demo {
    /// Scene with `boxes` boxes over two classes, the second with share `rare`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, boxes: usize, rare: f64) -> Result<Demo, JsError> {
        let params = SceneParams {
            seed,
            n_boxes: boxes,
            class_mix: vec![1.0 - rare, rare],
            n_cameras: 6,
        };
        Demo::from_params(&params).map_err(js_err)
    }

    /// `[rows, cols]` of a grid named `bev` or `camera:<k>`.
    #[wasm_bindgen(js_name = gridDims)]
    pub fn grid_dims(&self, grid: &str) -> Result<Vec<u32>, JsError> {
        let g = grid_of(&self.scene, modality(grid)?).map_err(js_err)?;
        Ok(vec![g.rows() as u32, g.cols() as u32])
    }

    /// Per-class box counts.
    #[wasm_bindgen(js_name = classCounts)]
    pub fn class_counts(&self) -> Vec<u32> {
        gt_distribution(&self.scene).counts.iter().map(|&c| c as u32).collect()
    }

    /// Box footprints as flat `x0, y0, ..., x3, y3, class` groups.
    pub fn footprints(&self) -> Vec<f64> {
        self.scene
            .boxes
            .iter()
            .flat_map(|b| {
                let mut v: Vec<f64> = b.footprint().iter().flat_map(|&(x, y)| [x, y]).collect();
                v.push(b.class_id as f64);
                v
            })
            .collect()
    }

    /// Supervision mask as RGBA.
    #[wasm_bindgen(js_name = maskRgba)]
    pub fn mask_rgba(&self, grid: &str) -> Result<Vec<u8>, JsError> {
        Ok(mask_colors(&self.mask(modality(grid)?).map_err(js_err)?))
    }

    /// Token selection overlay as RGBA; summary via [`Demo::select_summary`].
    #[wasm_bindgen(js_name = selectRgba)]
    pub fn select_rgba(&self, grid: &str, rho: f64, lambda: f64, sigma: f64, seed: u64) -> Result<Vec<u8>, JsError> {
        Ok(self
            .selection(modality(grid)?, rho, lambda, sigma, seed)
            .map_err(js_err)?
            .rgba)
    }

    /// Text summary of the same selection.
    #[wasm_bindgen(js_name = selectSummary)]
    pub fn select_summary(&self, grid: &str, rho: f64, lambda: f64, sigma: f64, seed: u64) -> Result<String, JsError> {
        let sel = self
            .selection(modality(grid)?, rho, lambda, sigma, seed)
            .map_err(js_err)?;
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let mut out = format!(
            "kept {} of {} tokens\nforeground recall {:.3}\n",
            sel.kept, sel.tokens, sel.foreground_recall
        );
        for (name, (cbs, plain)) in self.scene.class_names.iter().zip(&sel.class_recall) {
            out.push_str(&format!("{name}: recall {} (plain top-k {})\n", fmt(*cbs), fmt(*plain)));
        }
        Ok(out)
    }

    /// Anchors for one camera cell: flat `x, y, z, clamped` quadruples, `d`
    /// camera anchors followed by `d` BEV anchors.
    #[wasm_bindgen(js_name = rayAnchors)]
    pub fn ray_anchors(&self, camera: usize, i: usize, j: usize, d: usize) -> Result<Vec<f64>, JsError> {
        Ok(self.anchors(camera, i, j, d).map_err(js_err)?.0)
    }

    /// Scene extent `[x_min, x_max, y_min, y_max]`.
    pub fn extent(&self) -> Vec<f64> {
        let r = &self.scene.region;
        vec![r.x_min, r.x_max, r.y_min, r.y_max]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Demo {
        Demo::from_params(&SceneParams {
            seed: 7,
            n_boxes: 20,
            class_mix: vec![0.8, 0.2],
            n_cameras: 6,
        })
        .unwrap()
    }

    #[test]
    fn mask_pixels_follow_the_mask() {
        let d = demo();
        let m = d.mask(Modality::Bev).unwrap();
        let px = mask_colors(&m);
        assert_eq!(px.len(), 4 * m.len());
        let white = px.chunks(4).filter(|p| p[0] == 255).count();
        assert_eq!(white, m.count_positive());
    }

    #[test]
    fn selection_counts_and_tints() {
        let d = demo();
        let sel = d.selection(Modality::Camera(0), 0.25, 1.5, 1.0, 3).unwrap();
        assert_eq!(sel.kept, 250);
        assert_eq!(sel.tokens, 1000);
        let tinted = sel
            .rgba
            .chunks(4)
            .filter(|p| p[..3] == KEPT_POSITIVE || p[..3] == KEPT_NEGATIVE)
            .count();
        assert_eq!(tinted, 250);
        assert_eq!(sel.class_recall.len(), 2);
        assert!(d.selection(Modality::Bev, 0.0, 1.5, 1.0, 3).is_err());
        assert!(d.selection(Modality::Bev, 0.5, 0.5, 1.0, 3).is_err());
    }

    #[test]
    fn anchors_are_paired() {
        let d = demo();
        let (flat, cell) = d.anchors(2, 10, 25, 16).unwrap();
        assert_eq!(flat.len(), 2 * 16 * 4);
        let (x, y) = d.scene().bev.cell_center(cell.0, cell.1);
        for k in 16..32 {
            assert_eq!((flat[4 * k], flat[4 * k + 1]), (x, y));
        }
        assert!(d.anchors(2, 20, 0, 16).is_err());
        assert!(d.anchors(9, 0, 0, 16).is_err());
    }

    #[test]
    fn footprints_have_nine_values_per_box() {
        let d = demo();
        assert_eq!(d.footprints().len(), 9 * d.scene().boxes.len());
        assert_eq!(d.class_counts().iter().sum::<u32>(), 20);
    }
}
