//! Keeping-ratio sweeps and end-to-end loss composition.

use std::fmt::Write as _;

use crate::cbs::{
    cbs_loss, combined_cbs_loss, foreground_recall, keep_count, perclass_recall_from_masks, select_tokens,
    select_tokens_plain, token_weights_for, CbsConfig, SalienceGrid, TokenSet, TokenWeights,
};
use crate::error::CbsError;
use crate::logits::owner_classes;
use crate::ras::{ras_class_masks, ras_mask, Modality, SupervisionMask};
use crate::scene::{gt_distribution, Scene};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub rho: f64,
    pub tokens_kept: usize,
    pub foreground_recall: f64,
    pub per_class_recall: Vec<Option<f64>>,
    pub flop_proxy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub modality: Modality,
    pub tokens: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// CSV with one row per keeping ratio; classes without positives print `nan`.
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("rho,tokens_kept,foreground_recall");
        for name in class_names {
            write!(out, ",recall_{name}").unwrap();
        }
        out.push_str(",flop_proxy\n");
        for r in &self.rows {
            write!(out, "{},{},{}", r.rho, r.tokens_kept, r.foreground_recall).unwrap();
            for v in &r.per_class_recall {
                match v {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push_str(",nan"),
                }
            }
            writeln!(out, ",{}", r.flop_proxy).unwrap();
        }
        out
    }
}

/// Everything needed to score token sets on one grid.
pub struct GridTruth {
    pub mask: SupervisionMask,
    pub class_masks: Vec<SupervisionMask>,
}

impl GridTruth {
    pub fn new(scene: &Scene, modality: Modality) -> Result<Self, CbsError> {
        let to_err = |e: crate::error::RasError| CbsError::Shape(e.to_string());
        Ok(Self {
            mask: ras_mask(scene, modality).map_err(to_err)?,
            class_masks: ras_class_masks(scene, modality).map_err(to_err)?,
        })
    }

    pub fn row(&self, tok: &TokenSet) -> Result<EvalRow, CbsError> {
        Ok(EvalRow {
            rho: tok.ratio,
            tokens_kept: tok.len(),
            foreground_recall: foreground_recall(tok, &self.mask)?,
            per_class_recall: perclass_recall_from_masks(tok, &self.mask, &self.class_masks)?,
            flop_proxy: tok.flop_proxy(),
        })
    }
}

/// Class-balanced weights for `sal` on `scene`, honoring the distribution source.
pub fn scene_weights(scene: &Scene, sal: &SalienceGrid, cfg: &CbsConfig) -> Result<TokenWeights, CbsError> {
    cfg.validate()?;
    token_weights_for(sal, cfg, &gt_distribution(scene))
}

/// Sweeps the keeping ratio with CBS-reweighted selection.
pub fn evaluate(
    scene: &Scene,
    modality: Modality,
    sal: &SalienceGrid,
    cfg: &CbsConfig,
    rhos: &[f64],
) -> Result<EvalReport, CbsError> {
    let truth = GridTruth::new(scene, modality)?;
    let w = scene_weights(scene, sal, cfg)?;
    let rows = rhos
        .iter()
        .map(|&rho| {
            let tok = select_tokens(sal, &w, rho)?;
            debug_assert_eq!(tok.len(), keep_count(rho, sal.len()));
            truth.row(&tok)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        modality,
        tokens: sal.len(),
        rows,
    })
}

/// Recall of `class` under CBS-reweighted selection and under plain max-logit
/// top-k at the same ratio: `(cbs, plain)`.
pub fn class_recall_vs_plain(
    truth: &GridTruth,
    scene: &Scene,
    sal: &SalienceGrid,
    cfg: &CbsConfig,
    class: usize,
) -> Result<(Option<f64>, Option<f64>), CbsError> {
    let w = scene_weights(scene, sal, cfg)?;
    let cbs = truth.row(&select_tokens(sal, &w, cfg.rho)?)?;
    let plain = truth.row(&select_tokens_plain(sal, cfg.rho)?)?;
    Ok((cbs.per_class_recall[class], plain.per_class_recall[class]))
}

/// Cross-entropy targets: the owning class on positive cells and the
/// predicted argmax elsewhere, since the class set has no background entry.
pub fn token_labels(scene: &Scene, modality: Modality, sal: &SalienceGrid) -> Result<Vec<usize>, CbsError> {
    let owners = owner_classes(scene, modality).map_err(|e| CbsError::Shape(e.to_string()))?;
    if owners.len() != sal.len() {
        return Err(CbsError::Shape(format!(
            "{} cells but {} tokens",
            owners.len(),
            sal.len()
        )));
    }
    Ok(owners
        .iter()
        .enumerate()
        .map(|(n, o)| o.unwrap_or_else(|| sal.max_logit(n).1))
        .collect())
}

/// CBS loss of one grid.
pub fn modality_loss(scene: &Scene, modality: Modality, sal: &SalienceGrid, cfg: &CbsConfig) -> Result<f64, CbsError> {
    let w = scene_weights(scene, sal, cfg)?;
    cbs_loss(sal, &token_labels(scene, modality, sal)?, &w)
}

/// Total CBS loss over every camera grid and the BEV grid.
pub fn scene_loss(
    scene: &Scene,
    camera_logits: &[SalienceGrid],
    bev_logits: &SalienceGrid,
    cfg: &CbsConfig,
) -> Result<f64, CbsError> {
    if camera_logits.len() != scene.cameras.len() {
        return Err(CbsError::Shape(format!(
            "{} camera grids for {} cameras",
            camera_logits.len(),
            scene.cameras.len()
        )));
    }
    let cams = scene
        .cameras
        .iter()
        .zip(camera_logits)
        .map(|(rig, sal)| modality_loss(scene, Modality::Camera(rig.id), sal, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let bev = modality_loss(scene, Modality::Bev, bev_logits, cfg)?;
    Ok(combined_cbs_loss(&cams, bev))
}
