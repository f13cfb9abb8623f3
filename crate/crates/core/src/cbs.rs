//! Class-balanced supervision: per-token weights, the weighted cross-entropy
//! loss and keeping-ratio token pruning.

use std::fmt::Write as _;

use crate::error::CbsError;
use crate::ras::SupervisionMask;
use crate::scene::{ClassDistribution, Scene};

/// Per-token class logits over a `rows × cols` grid, token-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SalienceGrid {
    pub rows: usize,
    pub cols: usize,
    pub classes: usize,
    logits: Vec<f64>,
}

impl SalienceGrid {
    pub fn new(rows: usize, cols: usize, classes: usize, logits: Vec<f64>) -> Result<Self, CbsError> {
        if rows * cols == 0 || classes == 0 {
            return Err(CbsError::BadSalience("grid and class count must be non-empty".into()));
        }
        if logits.len() != rows * cols * classes {
            return Err(CbsError::BadSalience(format!(
                "{} logits for {} tokens x {classes} classes",
                logits.len(),
                rows * cols
            )));
        }
        if let Some(n) = logits.iter().position(|v| !v.is_finite()) {
            return Err(CbsError::BadSalience(format!("non-finite logit at flat index {n}")));
        }
        Ok(Self {
            rows,
            cols,
            classes,
            logits,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn token(&self, n: usize) -> &[f64] {
        &self.logits[n * self.classes..(n + 1) * self.classes]
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// `(max logit, argmax class)` for token `n`; ties go to the lower class.
    pub fn max_logit(&self, n: usize) -> (f64, usize) {
        let t = self.token(n);
        let mut best = (t[0], 0);
        for (c, &v) in t.iter().enumerate().skip(1) {
            if v > best.0 {
                best = (v, c);
            }
        }
        best
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// How a selected token's weight is formed from `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// `W = λ·σ(P)`.
    #[default]
    Multiply,
    /// `W = λ`.
    Assign,
}

/// Where the per-class selection budget comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistributionSource {
    /// Counts of predicted argmax classes.
    #[default]
    Predicted,
    /// Counts of ground-truth boxes per class.
    Gt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbsConfig {
    pub lambda: f64,
    pub rho: f64,
    /// Weight of the CBS term in the full detector loss; carried, not used here.
    pub omega1: f64,
    pub weight_mode: WeightMode,
    pub distribution_source: DistributionSource,
}

impl Default for CbsConfig {
    fn default() -> Self {
        Self {
            lambda: 1.5,
            rho: 1.0,
            omega1: 1.5,
            weight_mode: WeightMode::Multiply,
            distribution_source: DistributionSource::Predicted,
        }
    }
}

impl CbsConfig {
    pub fn validate(&self) -> Result<(), CbsError> {
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return Err(CbsError::BadLambda(self.lambda));
        }
        check_ratio(self.rho)
    }
}

fn check_ratio(rho: f64) -> Result<(), CbsError> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(CbsError::BadRatio(rho))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenWeights {
    pub weights: Vec<f64>,
    /// Membership in the class-balanced selection set.
    pub selected: Vec<bool>,
}

impl TokenWeights {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(n, _)| n)
            .collect()
    }

    /// CSV `index,weight,selected`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,weight,selected\n");
        for (n, (w, s)) in self.weights.iter().zip(&self.selected).enumerate() {
            writeln!(out, "{n},{w},{}", u8::from(*s)).unwrap();
        }
        out
    }
}

/// Counts of predicted argmax classes.
pub fn predicted_bag(sal: &SalienceGrid) -> Vec<usize> {
    let mut bag = vec![0; sal.classes];
    for n in 0..sal.len() {
        bag[sal.max_logit(n).1] += 1;
    }
    bag
}

/// Weights with per-class selection budgets taken from `bag`.
///
/// Each class `c` boosts its `bag[c]` most confident tokens among those whose
/// argmax is `c`, ranked by max logit with ties to the lower token index.
pub fn token_weights_with_bag(sal: &SalienceGrid, cfg: &CbsConfig, bag: &[usize]) -> Result<TokenWeights, CbsError> {
    if !(cfg.lambda >= 1.0 && cfg.lambda.is_finite()) {
        return Err(CbsError::BadLambda(cfg.lambda));
    }
    if bag.len() != sal.classes {
        return Err(CbsError::Shape(format!(
            "bag has {} classes, grid has {}",
            bag.len(),
            sal.classes
        )));
    }
    let n_tok = sal.len();
    let peaks: Vec<(f64, usize)> = (0..n_tok).map(|n| sal.max_logit(n)).collect();
    let mut weights: Vec<f64> = peaks.iter().map(|&(p, _)| sigmoid(p)).collect();
    let mut selected = vec![false; n_tok];

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); sal.classes];
    for (n, &(_, c)) in peaks.iter().enumerate() {
        by_class[c].push(n);
    }
    for (members, &budget) in by_class.iter_mut().zip(bag) {
        if budget == 0 {
            continue;
        }
        members.sort_by(|&a, &b| peaks[b].0.total_cmp(&peaks[a].0).then(a.cmp(&b)));
        for &n in members.iter().take(budget) {
            selected[n] = true;
            weights[n] = match cfg.weight_mode {
                WeightMode::Multiply => weights[n] * cfg.lambda,
                WeightMode::Assign => cfg.lambda,
            };
        }
    }
    Ok(TokenWeights { weights, selected })
}

/// Class-balanced weights with the budget from predicted argmax counts.
pub fn token_weights(sal: &SalienceGrid, cfg: &CbsConfig) -> Result<TokenWeights, CbsError> {
    token_weights_with_bag(sal, cfg, &predicted_bag(sal))
}

/// Class-balanced weights with the budget from ground-truth instance counts.
pub fn token_weights_gt(sal: &SalienceGrid, cfg: &CbsConfig, gt: &ClassDistribution) -> Result<TokenWeights, CbsError> {
    token_weights_with_bag(sal, cfg, &gt.counts)
}

/// Dispatches on `cfg.distribution_source`.
pub fn token_weights_for(
    sal: &SalienceGrid,
    cfg: &CbsConfig,
    gt: &ClassDistribution,
) -> Result<TokenWeights, CbsError> {
    match cfg.distribution_source {
        DistributionSource::Predicted => token_weights(sal, cfg),
        DistributionSource::Gt => token_weights_gt(sal, cfg, gt),
    }
}

/// Mean weighted cross-entropy `mean(-W_n · log softmax(ŷ_n)[y_n])`.
pub fn cbs_loss(sal: &SalienceGrid, labels: &[usize], w: &TokenWeights) -> Result<f64, CbsError> {
    let n_tok = sal.len();
    if labels.len() != n_tok || w.weights.len() != n_tok {
        return Err(CbsError::Shape(format!(
            "{n_tok} tokens, {} labels, {} weights",
            labels.len(),
            w.weights.len()
        )));
    }
    let mut total = 0.0;
    for (n, (&y, &wt)) in labels.iter().zip(&w.weights).enumerate() {
        if y >= sal.classes {
            return Err(CbsError::BadLabel {
                index: n,
                label: y,
                classes: sal.classes,
            });
        }
        let t = sal.token(n);
        let m = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + t.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += wt * (lse - t[y]);
    }
    Ok(total / n_tok as f64)
}

/// Camera losses averaged over rigs, plus the BEV loss.
pub fn combined_cbs_loss(cam_losses: &[f64], bev_loss: f64) -> f64 {
    let cam = if cam_losses.is_empty() {
        0.0
    } else {
        cam_losses.iter().sum::<f64>() / cam_losses.len() as f64
    };
    cam + bev_loss
}

/// `round(ρ·N)` with halves rounded up.
pub fn keep_count(rho: f64, n: usize) -> usize {
    (rho * n as f64 + 0.5).floor() as usize
}

/// Tokens retained at keeping ratio `ratio`, sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    pub rows: usize,
    pub cols: usize,
    pub ratio: f64,
    pub kept: Vec<usize>,
    /// Ranking score of each kept token, parallel to `kept`.
    pub scores: Vec<f64>,
}

impl TokenSet {
    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.kept.binary_search(&index).is_ok()
    }

    /// Fraction of the grid retained; stands in for relative decoder cost.
    pub fn flop_proxy(&self) -> f64 {
        self.kept.len() as f64 / (self.rows * self.cols) as f64
    }

    /// CSV `index,row,col,score`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,row,col,score\n");
        for (&n, s) in self.kept.iter().zip(&self.scores) {
            writeln!(out, "{n},{},{},{s}", n / self.cols, n % self.cols).unwrap();
        }
        out
    }

    /// Parses the kept indices (and scores) of a token CSV. The grid shape and
    /// ratio are not stored in the file and must be supplied.
    pub fn from_csv(text: &str, rows: usize, cols: usize) -> Result<Self, CbsError> {
        let err = |m: String| CbsError::Format {
            what: "token CSV",
            message: m,
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("index,row,col,score") {
            return Err(err("missing `index,row,col,score` header".into()));
        }
        let mut kept = Vec::new();
        let mut scores = Vec::new();
        for (ln, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let [idx, row, col, score] = f[..] else {
                return Err(err(format!("line {}: expected 4 fields", ln + 2)));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| err(format!("line {}: bad integer `{s}`", ln + 2)))
            };
            let (idx, row, col) = (parse(idx)?, parse(row)?, parse(col)?);
            if row >= rows || col >= cols || idx != row * cols + col {
                return Err(err(format!(
                    "line {}: token {idx} ({row},{col}) outside {rows}x{cols} grid",
                    ln + 2
                )));
            }
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| err(format!("line {}: bad score", ln + 2)))?;
            kept.push(idx);
            scores.push(score);
        }
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by_key(|&k| kept[k]);
        let kept: Vec<usize> = order.iter().map(|&k| kept[k]).collect();
        if kept.windows(2).any(|w| w[0] == w[1]) {
            return Err(err("duplicate token index".into()));
        }
        let scores = order.iter().map(|&k| scores[k]).collect();
        let ratio = kept.len() as f64 / (rows * cols) as f64;
        Ok(TokenSet {
            rows,
            cols,
            ratio,
            kept,
            scores,
        })
    }
}

/// Keeps the `round(ρ·N)` highest `scores`, ties to the lower index.
pub fn select_by_scores(scores: &[f64], rows: usize, cols: usize, rho: f64) -> Result<TokenSet, CbsError> {
    check_ratio(rho)?;
    if scores.len() != rows * cols {
        return Err(CbsError::Shape(format!(
            "{} scores for a {rows}x{cols} grid",
            scores.len()
        )));
    }
    let k = keep_count(rho, scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..k].to_vec();
    kept.sort_unstable();
    let kept_scores = kept.iter().map(|&n| scores[n]).collect();
    Ok(TokenSet {
        rows,
        cols,
        ratio: rho,
        kept,
        scores: kept_scores,
    })
}

/// Reweighted salience `W_n · σ(P_n)`.
pub fn reweighted_salience(sal: &SalienceGrid, w: &TokenWeights) -> Vec<f64> {
    (0..sal.len())
        .map(|n| w.weights[n] * sigmoid(sal.max_logit(n).0))
        .collect()
}

/// Class-balanced pruning: rank tokens by reweighted salience.
pub fn select_tokens(sal: &SalienceGrid, w: &TokenWeights, rho: f64) -> Result<TokenSet, CbsError> {
    if w.weights.len() != sal.len() {
        return Err(CbsError::Shape(format!(
            "{} weights for {} tokens",
            w.weights.len(),
            sal.len()
        )));
    }
    select_by_scores(&reweighted_salience(sal, w), sal.rows, sal.cols, rho)
}

/// Baseline pruning by plain max-logit salience `σ(P_n)`.
pub fn select_tokens_plain(sal: &SalienceGrid, rho: f64) -> Result<TokenSet, CbsError> {
    let scores: Vec<f64> = (0..sal.len()).map(|n| sigmoid(sal.max_logit(n).0)).collect();
    select_by_scores(&scores, sal.rows, sal.cols, rho)
}

fn check_grid(tok: &TokenSet, mask: &SupervisionMask) -> Result<(), CbsError> {
    if (tok.rows, tok.cols) != (mask.rows, mask.cols) {
        return Err(CbsError::GridMismatch {
            tokens: (tok.rows, tok.cols),
            mask: (mask.rows, mask.cols),
        });
    }
    Ok(())
}

fn recall(tok: &TokenSet, mask: &SupervisionMask) -> Option<f64> {
    let positives = mask.count_positive();
    (positives > 0).then(|| {
        let hit = mask.positive_indices().filter(|&n| tok.contains(n)).count();
        hit as f64 / positives as f64
    })
}

/// Fraction of mask-positive tokens kept; 1 when the mask has no positives.
pub fn foreground_recall(tok: &TokenSet, mask: &SupervisionMask) -> Result<f64, CbsError> {
    check_grid(tok, mask)?;
    Ok(recall(tok, mask).unwrap_or(1.0))
}

/// Per-class recall given one mask per class. `None` for classes without
/// positive cells.
pub fn perclass_recall_from_masks(
    tok: &TokenSet,
    mask: &SupervisionMask,
    class_masks: &[SupervisionMask],
) -> Result<Vec<Option<f64>>, CbsError> {
    check_grid(tok, mask)?;
    class_masks
        .iter()
        .map(|cm| {
            check_grid(tok, cm)?;
            Ok(recall(tok, cm))
        })
        .collect()
}

/// Per-class recall over the cells each class's boxes cover in `mask`'s grid.
pub fn perclass_recall(tok: &TokenSet, mask: &SupervisionMask, scene: &Scene) -> Result<Vec<Option<f64>>, CbsError> {
    check_grid(tok, mask)?;
    let class_masks = crate::ras::ras_class_masks(scene, mask.modality).map_err(|e| CbsError::Shape(e.to_string()))?;
    perclass_recall_from_masks(tok, mask, &class_masks)
}
