//! Independent reference implementations shared by the oracle suites.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tarpit_escape::phash::Bitmap;
use tarpit_escape::ui::{InteractionType, Rect, Widget};

/// Straight-line reference: blow every pixel up into a 9x8 block so the
/// 9x8 grid cells fall on whole super-pixels, then average each cell.
pub fn reference_grid(w: usize, h: usize, px: &[u8]) -> [[u64; 9]; 8] {
    let mut grid = [[0u64; 9]; 8];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut sum = 0u64;
            for sy in i * h..(i + 1) * h {
                for sx in j * w..(j + 1) * w {
                    sum += u64::from(px[(sy / 8) * w + sx / 9]);
                }
            }
            let area = (w * h) as u64;
            // floor(sum / area + 1/2)
            *cell = (2 * sum + area) / (2 * area);
        }
    }
    grid
}

#[allow(clippy::needless_range_loop)]
pub fn reference_hash(w: usize, h: usize, px: &[u8]) -> u64 {
    let g = reference_grid(w, h, px);
    let mut bits = 0u64;
    for i in 0..8 {
        for j in 0..8 {
            if g[i][j] > g[i][j + 1] {
                bits |= 1 << (i * 8 + j);
            }
        }
    }
    bits
}

pub fn random_bitmap(rng: &mut ChaCha8Rng) -> Bitmap {
    let w = rng.gen_range(9..=48);
    let h = rng.gen_range(8..=48);
    let px = (0..w * h).map(|_| rng.gen()).collect();
    Bitmap::new(w, h, px).unwrap()
}

/// O(n^2) occlusion check written from the rule alone.
pub fn brute_force_valid(widgets: &[Widget]) -> Vec<u32> {
    let mut keep = Vec::new();
    'outer: for a in widgets {
        if !a.enabled || a.interactions.is_empty() {
            continue;
        }
        let cx = (a.bounds.left + a.bounds.right).div_euclid(2);
        let cy = (a.bounds.top + a.bounds.bottom).div_euclid(2);
        for b in widgets {
            if std::ptr::eq(a, b) || !b.enabled || b.interactions.is_empty() {
                continue;
            }
            let inside = b.bounds.left <= cx
                && cx <= b.bounds.right
                && b.bounds.top <= cy
                && cy <= b.bounds.bottom;
            if inside {
                continue 'outer;
            }
        }
        keep.push(a.widget_id);
    }
    keep
}

pub fn widget(id: u32, l: i32, t: i32, r: i32, b: i32, interactions: &[InteractionType]) -> Widget {
    Widget {
        widget_id: id,
        bounds: Rect::new(l, t, r, b).unwrap(),
        text: None,
        resource_id: None,
        content_description: None,
        enabled: true,
        interactions: interactions.to_vec(),
    }
}

/// Up to 20 overlapping widgets on a 180x320 screen.
pub fn random_layout(rng: &mut ChaCha8Rng) -> Vec<Widget> {
    let n = rng.gen_range(0..=20);
    (0..n)
        .map(|id| {
            let l = rng.gen_range(0..170);
            let t = rng.gen_range(0..310);
            let r = rng.gen_range(l + 1..=180);
            let b = rng.gen_range(t + 1..=320);
            let mut interactions: Vec<_> = InteractionType::ALL
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.3))
                .collect();
            if interactions.is_empty() && rng.gen_bool(0.8) {
                interactions.push(InteractionType::Click);
            }
            let mut w = widget(id, l, t, r, b, &interactions);
            w.enabled = rng.gen_bool(0.9);
            w
        })
        .collect()
}
