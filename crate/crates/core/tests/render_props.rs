use image::ImageFormat;
use proptest::prelude::*;
use sparse_selector::cbs::TokenSet;
use sparse_selector::ras::{Modality, SupervisionMask};
use sparse_selector::render::{mask_to_pgm, overlay_to_ppm, read_pnm, KEPT_NEGATIVE, KEPT_POSITIVE};

fn arb_case() -> impl Strategy<Value = (SupervisionMask, TokenSet, usize)> {
    (1usize..16, 1usize..16, 1usize..4).prop_flat_map(|(rows, cols, scale)| {
        let n = rows * cols;
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::btree_set(0..n, 1..=n),
        )
            .prop_map(move |(bits, kept)| {
                let mask = SupervisionMask::new(Modality::Bev, rows, cols, bits).unwrap();
                let kept: Vec<usize> = kept.into_iter().collect();
                let tok = TokenSet {
                    rows,
                    cols,
                    ratio: kept.len() as f64 / n as f64,
                    scores: vec![1.0; kept.len()],
                    kept,
                };
                (mask, tok, scale)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_matches_reference_reader((mask, _tok, scale) in arb_case()) {
        let img = mask_to_pgm(&mask, scale);
        let bytes = img.encode();
        let reference = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm).unwrap().into_luma8();
        prop_assert_eq!(reference.width() as usize, mask.cols * scale);
        prop_assert_eq!(reference.height() as usize, mask.rows * scale);
        for (x, y, px) in reference.enumerate_pixels() {
            let cell = (y as usize / scale) * mask.cols + x as usize / scale;
            prop_assert_eq!(px.0[0], if mask.is_positive(cell) { 255 } else { 0 });
        }
        prop_assert_eq!(read_pnm(&bytes).unwrap(), img);
    }

    #[test]
    fn overlay_tints_match_set_counts((mask, tok, scale) in arb_case()) {
        let img = overlay_to_ppm(&mask, &tok, scale).unwrap();
        let bytes = img.encode();
        let reference = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm).unwrap().into_rgb8();
        let count = |c: [u8; 3]| reference.pixels().filter(|p| p.0 == c).count() / (scale * scale);
        let kept_pos = tok.kept.iter().filter(|&&k| mask.is_positive(k)).count();
        prop_assert_eq!(count(KEPT_POSITIVE), kept_pos);
        prop_assert_eq!(count(KEPT_NEGATIVE), tok.len() - kept_pos);
        prop_assert_eq!(read_pnm(&bytes).unwrap(), img);
    }
}

#[test]
fn empty_mask_renders_black() {
    let mask = SupervisionMask::zeros(Modality::Camera(0), 20, 50);
    let img = mask_to_pgm(&mask, 1);
    assert_eq!((img.width, img.height), (50, 20));
    assert!(img.data.iter().all(|&v| v == 0));
}

#[test]
fn malformed_images_are_rejected() {
    for bad in [
        &b"P3\n1 1\n255\n\x00"[..],
        b"P5\n2 2\n255\n\x00",
        b"P5\n1 1\n65535\n\x00\x00",
        b"P5\n1",
    ] {
        assert!(read_pnm(bad).is_err());
    }
    assert_eq!(read_pnm(b"P5\n# comment\n1 1\n255\n\x07").unwrap().data, vec![7]);
}
