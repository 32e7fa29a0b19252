//! dHash against an independent supersampling reference.

mod common;

use common::{random_bitmap, reference_grid, reference_hash};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tarpit_escape::phash::{dhash, downsample, hamming, is_ui_similar, similarity, Bitmap, PHash};

fn checkerboard(w: u32, h: u32, square: u32) -> Bitmap {
    let px = (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| {
                if (x / square + y / square).is_multiple_of(2) {
                    255
                } else {
                    0
                }
            })
        })
        .collect();
    Bitmap::new(w, h, px).unwrap()
}

#[test]
fn matches_reference_on_random_bitmaps() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let img = random_bitmap(&mut rng);
        let expected = reference_hash(img.width() as usize, img.height() as usize, img.pixels());
        if dhash(&img).bits() != expected {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn grid_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let img = random_bitmap(&mut rng);
        let ours = downsample(&img);
        let theirs = reference_grid(img.width() as usize, img.height() as usize, img.pixels());
        for i in 0..8 {
            for j in 0..9 {
                assert_eq!(u64::from(ours[i][j]), theirs[i][j]);
            }
        }
    }
}

// Frozen from an exact-fraction reference computed outside this crate.
const CHECKERBOARD_18X16_SQ3: u64 = 0x00db_2400_db24_00db;
const CHECKERBOARD_18X16_SQ2: u64 = 0xaa55_aa55_aa55_aa55;

#[test]
fn golden_checkerboards() {
    assert_eq!(
        dhash(&checkerboard(18, 16, 3)).bits(),
        CHECKERBOARD_18X16_SQ3
    );
    assert_eq!(
        dhash(&checkerboard(18, 16, 2)).bits(),
        CHECKERBOARD_18X16_SQ2
    );
    // One-pixel squares average to a flat grey.
    assert_eq!(dhash(&checkerboard(18, 16, 1)).bits(), 0);
}

#[test]
fn uniform_and_gradients() {
    assert_eq!(dhash(&Bitmap::filled(64, 64, 128).unwrap()), PHash(0));
    let inc: Vec<u8> = (0..8).flat_map(|_| (0..9).map(|x| x as u8 * 20)).collect();
    let inc = Bitmap::new(9, 8, inc).unwrap();
    assert_eq!(dhash(&inc).bits(), 0);
    assert_eq!(dhash(&inc.inverted()).bits(), u64::MAX);
}

#[test]
fn inversion_of_tie_free_image() {
    // Each row is a rotation of distinct levels, so no neighbours tie.
    let px = (0..8u8)
        .flat_map(|i| (0..9u8).map(move |j| ((j + 2 * i) % 9) * 25 + i))
        .collect();
    let img = Bitmap::new(9, 8, px).unwrap();
    let grid = downsample(&img);
    assert!(
        grid.iter().all(|r| r.windows(2).all(|p| p[0] != p[1])),
        "fixture must be tie-free"
    );
    assert_eq!(similarity(&img, &img.inverted()), 0.0);
    assert!(!is_ui_similar(&img, &img.inverted(), 0.95).unwrap());
    assert!(is_ui_similar(&img, &img, 0.95).unwrap());
}

#[test]
fn status_strip_change_keeps_similarity() {
    // Two renders of one screen that differ only in a top strip of 5% area.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (w, h) = (180u32, 320u32);
    let base: Vec<u8> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            ((x / 20) * 23 + (y / 40) * 31) as u8
        })
        .collect();
    let mut other = base.clone();
    for px in other.iter_mut().take((w * 16) as usize) {
        *px = rng.gen();
    }
    let a = Bitmap::new(w, h, base).unwrap();
    let b = Bitmap::new(w, h, other).unwrap();
    let expected = 1.0
        - f64::from(
            (reference_hash(180, 320, a.pixels()) ^ reference_hash(180, 320, b.pixels()))
                .count_ones(),
        ) / 64.0;
    assert_eq!(similarity(&a, &b), expected);
    assert!(expected >= 0.95, "similarity {expected}");
}

#[test]
fn hamming_examples() {
    let h = PHash(0x0123_4567_89ab_cdef);
    assert_eq!(hamming(h, h), 0);
    assert_eq!(hamming(h, PHash(!h.bits())), 64);
    assert_eq!(hamming(PHash(0b0101), PHash(0b0110)), 2);
}

#[test]
fn rejects_small_images_and_bad_thresholds() {
    assert!(Bitmap::new(8, 8, vec![0; 64]).is_err());
    assert!(Bitmap::new(9, 7, vec![0; 63]).is_err());
    assert!(Bitmap::new(9, 8, vec![0; 71]).is_err());
    let img = Bitmap::filled(9, 8, 0).unwrap();
    assert!(is_ui_similar(&img, &img, 0.0).is_err());
    assert!(is_ui_similar(&img, &img, 1.01).is_err());
    assert!(is_ui_similar(&img, &img, 1.0).unwrap());
}

/// Perturbs `fraction` of the 72 downsample cells by overwriting whole blocks.
fn perturb(img: &Bitmap, fraction: f64, rng: &mut ChaCha8Rng) -> Bitmap {
    let (w, h) = (img.width(), img.height());
    let mut px = img.pixels().to_vec();
    let mut cells: Vec<(u32, u32)> = (0..8).flat_map(|i| (0..9).map(move |j| (i, j))).collect();
    let n = (fraction * cells.len() as f64).round() as usize;
    for k in 0..n {
        let pick = rng.gen_range(k..cells.len());
        cells.swap(k, pick);
        let (i, j) = cells[k];
        let value: u8 = rng.gen();
        for y in i * h / 8..(i + 1) * h / 8 {
            for x in j * w / 9..(j + 1) * w / 9 {
                px[(y * w + x) as usize] = value;
            }
        }
    }
    Bitmap::new(w, h, px).unwrap()
}

#[test]
fn noise_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut means = Vec::new();
    for fraction in [0.0, 0.25, 0.5] {
        let mut total = 0.0;
        for _ in 0..500 {
            let px = (0..72 * 64).map(|_| rng.gen()).collect();
            let img = Bitmap::new(72, 64, px).unwrap();
            total += similarity(&img, &perturb(&img, fraction, &mut rng));
        }
        means.push(total / 500.0);
    }
    assert_eq!(means[0], 1.0);
    assert!(means[0] >= means[1] && means[1] >= means[2], "{means:?}");
}

#[test]
fn pgm_fixture_round_trip() {
    let img = checkerboard(18, 16, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("board.pgm");
    img.write_pgm(&path).unwrap();
    let back = Bitmap::read_pgm(&path).unwrap();
    assert_eq!(back, img);
    assert_eq!(dhash(&back).bits(), CHECKERBOARD_18X16_SQ3);
}

proptest! {
    #[test]
    fn reflexive_symmetric_deterministic(
        w in 9u32..40, h in 8u32..40, seed_a: u64, seed_b: u64,
    ) {
        let mut ra = ChaCha8Rng::seed_from_u64(seed_a);
        let mut rb = ChaCha8Rng::seed_from_u64(seed_b);
        let a = Bitmap::new(w, h, (0..w * h).map(|_| ra.gen()).collect()).unwrap();
        let b = Bitmap::new(w, h, (0..w * h).map(|_| rb.gen()).collect()).unwrap();
        prop_assert_eq!(similarity(&a, &a), 1.0);
        prop_assert_eq!(similarity(&a, &b), similarity(&b, &a));
        let copy = Bitmap::new(w, h, a.pixels().to_vec()).unwrap();
        prop_assert_eq!(dhash(&a), dhash(&copy));
        prop_assert_eq!(dhash(&a).bits(), reference_hash(w as usize, h as usize, a.pixels()));
        let s = similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn threshold_monotone(a: u64, b: u64, t1 in 0.01f64..=1.0, t2 in 0.01f64..=1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let s = tarpit_escape::phash::hash_similarity(PHash(a), PHash(b));
        if s >= hi {
            prop_assert!(s >= lo);
        }
    }
}
