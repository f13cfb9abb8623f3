//! Salience logits for a token grid: synthesized from supervision masks or
//! read from a text file.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cbs::SalienceGrid;
use crate::error::{CbsError, RasError};
use crate::ras::{grid_of, nearest_hits, Modality};
use crate::scene::Scene;

/// Logit given to the owning class of a positive cell.
pub const PERFECT_LOGIT: f64 = 10.0;

/// Synthetic logit generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticLogits {
    /// `+10` on the owning class of positive cells, 0 elsewhere.
    Perfect,
    /// Perfect logits plus i.i.d. gaussian noise with this standard deviation.
    Noisy(f64),
}

impl FromStr for SyntheticLogits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "perfect" {
            return Ok(SyntheticLogits::Perfect);
        }
        let sigma = s
            .strip_prefix("noisy:")
            .ok_or_else(|| format!("unknown logit source `{s}`"))?;
        let sigma: f64 = sigma.parse().map_err(|_| format!("bad noise level `{sigma}`"))?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(format!("noise level must be non-negative, got {sigma}"));
        }
        Ok(SyntheticLogits::Noisy(sigma))
    }
}

/// Owning class per cell: the class of the first box hit along the cell ray.
pub fn owner_classes(scene: &Scene, modality: Modality) -> Result<Vec<Option<usize>>, RasError> {
    Ok(nearest_hits(scene, modality)?
        .into_iter()
        .map(|hit| hit.map(|b| scene.boxes[b].class_id))
        .collect())
}

pub fn perfect_logits(scene: &Scene, modality: Modality) -> Result<SalienceGrid, RasError> {
    let grid = grid_of(scene, modality)?;
    let classes = scene.num_classes();
    let owners = owner_classes(scene, modality)?;
    let mut logits = vec![0.0; owners.len() * classes];
    for (n, owner) in owners.iter().enumerate() {
        if let Some(c) = owner {
            logits[n * classes + c] = PERFECT_LOGIT;
        }
    }
    Ok(SalienceGrid::new(grid.rows(), grid.cols(), classes, logits).expect("finite logits"))
}

/// Perfect logits with seeded gaussian noise added in token-major order.
pub fn noisy_logits(scene: &Scene, modality: Modality, sigma: f64, seed: u64) -> Result<SalienceGrid, RasError> {
    let clean = perfect_logits(scene, modality)?;
    let normal = Normal::new(0.0, sigma).map_err(|_| RasError::Format(format!("bad noise level {sigma}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = clean.logits().iter().map(|v| v + normal.sample(&mut rng)).collect();
    Ok(SalienceGrid::new(clean.rows, clean.cols, clean.classes, logits).expect("finite logits"))
}

pub fn synthesize(
    scene: &Scene,
    modality: Modality,
    source: SyntheticLogits,
    seed: u64,
) -> Result<SalienceGrid, RasError> {
    match source {
        SyntheticLogits::Perfect => perfect_logits(scene, modality),
        SyntheticLogits::Noisy(sigma) => noisy_logits(scene, modality, sigma, seed),
    }
}

/// Parses a logit file: one line per token (row-major), `classes`
/// comma-separated reals per line. Blank lines and `#` comments are skipped.
pub fn parse_logits(text: &str, rows: usize, cols: usize, classes: usize) -> Result<SalienceGrid, CbsError> {
    let err = |m: String| CbsError::Format {
        what: "logit file",
        message: m,
    };
    let mut logits = Vec::with_capacity(rows * cols * classes);
    let mut tokens = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = logits.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(format!("line {}: bad real `{}`", ln + 1, field.trim())))?;
            logits.push(v);
        }
        if logits.len() - before != classes {
            return Err(err(format!(
                "line {}: {} values, expected {classes}",
                ln + 1,
                logits.len() - before
            )));
        }
        tokens += 1;
    }
    if tokens != rows * cols {
        return Err(err(format!("{tokens} tokens, expected {}", rows * cols)));
    }
    SalienceGrid::new(rows, cols, classes, logits)
}

/// Inverse of [`parse_logits`].
pub fn format_logits(sal: &SalienceGrid) -> String {
    let mut out = String::new();
    for n in 0..sal.len() {
        let row: Vec<String> = sal.token(n).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ras::ras_mask;
    use crate::scene::{generate_scene, SceneParams};

    #[test]
    fn parses_sources() {
        assert_eq!("perfect".parse(), Ok(SyntheticLogits::Perfect));
        assert_eq!("noisy:1.5".parse(), Ok(SyntheticLogits::Noisy(1.5)));
        assert!("noisy:-1".parse::<SyntheticLogits>().is_err());
        assert!("noisy:x".parse::<SyntheticLogits>().is_err());
        assert!("sharp".parse::<SyntheticLogits>().is_err());
    }

    #[test]
    fn perfect_logits_follow_mask() {
        let s = generate_scene(&SceneParams {
            seed: 4,
            n_boxes: 25,
            class_mix: vec![0.5, 0.5],
            n_cameras: 6,
        })
        .unwrap();
        let sal = perfect_logits(&s, Modality::Bev).unwrap();
        let mask = ras_mask(&s, Modality::Bev).unwrap();
        for n in 0..sal.len() {
            let (p, _) = sal.max_logit(n);
            assert_eq!(p == PERFECT_LOGIT, mask.is_positive(n));
        }
    }

    #[test]
    fn noisy_logits_are_seeded() {
        let s = generate_scene(&SceneParams {
            seed: 4,
            n_boxes: 5,
            class_mix: vec![1.0],
            n_cameras: 2,
        })
        .unwrap();
        let a = noisy_logits(&s, Modality::Camera(1), 1.0, 9).unwrap();
        let b = noisy_logits(&s, Modality::Camera(1), 1.0, 9).unwrap();
        let c = noisy_logits(&s, Modality::Camera(1), 1.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn logit_file_round_trip() {
        let sal = SalienceGrid::new(2, 1, 3, vec![0.1, -2.0, 3.5, 1e-17, 0.0, 7.25]).unwrap();
        let text = format!("# two tokens\n{}", format_logits(&sal));
        assert_eq!(parse_logits(&text, 2, 1, 3).unwrap(), sal);
        assert!(parse_logits("1,2\n", 1, 1, 3).is_err());
        assert!(parse_logits("1,2,3\n", 2, 1, 3).is_err());
        assert!(parse_logits("1,2,nan\n", 1, 1, 3).is_err());
    }
}
