//! Binary PGM (P5) and PPM (P6) renders of masks and token overlays.

use crate::cbs::TokenSet;
use crate::error::RenderError;
use crate::ras::SupervisionMask;

pub const NEGATIVE: [u8; 3] = [0, 0, 0];
pub const POSITIVE: [u8; 3] = [255, 255, 255];
pub const KEPT_POSITIVE: [u8; 3] = [255, 96, 32];
pub const KEPT_NEGATIVE: [u8; 3] = [32, 96, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnmKind {
    Gray,
    Rgb,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub kind: PnmKind,
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl PnmImage {
    fn channels(&self) -> usize {
        match self.kind {
            PnmKind::Gray => 1,
            PnmKind::Rgb => 3,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = self.channels();
        let at = (y * self.width + x) * c;
        &self.data[at..at + c]
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = match self.kind {
            PnmKind::Gray => "P5",
            PnmKind::Rgb => "P6",
        };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

fn upscale(width: usize, height: usize, channels: usize, scale: usize, cell: impl Fn(usize) -> [u8; 3]) -> Vec<u8> {
    let mut data = Vec::with_capacity(width * height * scale * scale * channels);
    for i in 0..height {
        for _ in 0..scale {
            for j in 0..width {
                let px = cell(i * width + j);
                for _ in 0..scale {
                    data.extend_from_slice(&px[..channels]);
                }
            }
        }
    }
    data
}

/// Grayscale render: 0 → black, 1 → white, `scale` pixels per cell.
pub fn mask_to_pgm(mask: &SupervisionMask, scale: usize) -> PnmImage {
    let scale = scale.max(1);
    let data = upscale(mask.cols, mask.rows, 1, scale, |n| {
        let v = if mask.is_positive(n) { 255 } else { 0 };
        [v, v, v]
    });
    PnmImage {
        kind: PnmKind::Gray,
        width: mask.cols * scale,
        height: mask.rows * scale,
        data,
    }
}

/// Color render with kept tokens tinted by their mask label.
pub fn overlay_to_ppm(mask: &SupervisionMask, tokens: &TokenSet, scale: usize) -> Result<PnmImage, RenderError> {
    let n = mask.rows * mask.cols;
    if let Some(&bad) = tokens.kept.iter().find(|&&k| k >= n) {
        return Err(RenderError::TokenOutOfRange {
            index: bad,
            rows: mask.rows,
            cols: mask.cols,
        });
    }
    let mut kept = vec![false; n];
    for &k in &tokens.kept {
        kept[k] = true;
    }
    let scale = scale.max(1);
    let data = upscale(mask.cols, mask.rows, 3, scale, |n| {
        match (kept[n], mask.is_positive(n)) {
            (true, true) => KEPT_POSITIVE,
            (true, false) => KEPT_NEGATIVE,
            (false, true) => POSITIVE,
            (false, false) => NEGATIVE,
        }
    });
    Ok(PnmImage {
        kind: PnmKind::Rgb,
        width: mask.cols * scale,
        height: mask.rows * scale,
        data,
    })
}

/// Reads a binary P5/P6 image with maxval 255.
pub fn read_pnm(bytes: &[u8]) -> Result<PnmImage, RenderError> {
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        // whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(RenderError::Format("truncated header".into()));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let kind = match header[0].as_str() {
        "P5" => PnmKind::Gray,
        "P6" => PnmKind::Rgb,
        other => return Err(RenderError::Format(format!("unsupported magic `{other}`"))),
    };
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| RenderError::Format(format!("bad header field `{s}`")))
    };
    let (width, height, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if maxval != 255 {
        return Err(RenderError::Format(format!("maxval {maxval} unsupported")));
    }
    let channels = if kind == PnmKind::Gray { 1 } else { 3 };
    let len = width * height * channels;
    let data = bytes
        .get(pos..pos + len)
        .ok_or_else(|| RenderError::Format("truncated raster".into()))?
        .to_vec();
    if pos + len != bytes.len() {
        return Err(RenderError::Format("trailing bytes after raster".into()));
    }
    Ok(PnmImage {
        kind,
        width,
        height,
        data,
    })
}
