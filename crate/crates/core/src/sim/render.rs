//! Synthetic screenshots.
//!
//! Each visual group owns a 56-bit code that fixes the brightness ordering of
//! every horizontally adjacent pair of body cells on the 9x8 hash grid.
//! Neighbouring cells differ by `STEP` grey levels while widgets are drawn
//! within `WIDGET_SPREAD` of the local background, so widgets never flip a
//! comparison: screens of one group share a body hash. Codes of different
//! groups are at least `CODE_DISTANCE` bits apart. The status strip carries
//! a clock glyph that blinks on even frames, toggling exactly one bit.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::phash::{hash_similarity, Bitmap, PHash};
use crate::sim::model::{AppModel, Screen};
use crate::ui::Widget;

pub const SCREEN_WIDTH: u32 = 180;
pub const SCREEN_HEIGHT: u32 = 320;
pub const STATUS_STRIP_HEIGHT: u32 = 16;
/// Widgets are clipped to the body, below the hash grid's first row.
pub const BODY_TOP: u32 = 40;
pub const RESTART_GROUP: u32 = 0;
pub const MAX_VISUAL_GROUP: u32 = 511;
/// Minimum similarity between screens of one visual group.
pub const SAME_GROUP_MIN: f64 = 0.97;
/// Maximum similarity between screens of different visual groups.
pub const CROSS_GROUP_MAX: f64 = 0.80;

const CELL_W: u32 = SCREEN_WIDTH / 9;
const CELL_H: u32 = SCREEN_HEIGHT / 8;
const STEP: i32 = 26;
const WIDGET_SPREAD: i32 = 8;
const CODE_DISTANCE: u32 = 16;
const STRIP_TONE: u8 = 60;
const CLOCK_TONE: u8 = 230;
const CLOCK_X: u32 = 144;
const CLOCK_Y: u32 = 3;

const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b001, 0b001, 0b001],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

/// Renders differ only through `frame % FRAME_PERIOD`.
pub const FRAME_PERIOD: u64 = 20;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn codebook() -> &'static [u64] {
    static CODES: OnceLock<Vec<u64>> = OnceLock::new();
    CODES.get_or_init(|| {
        let mut state = 0x5eed_c0de_u64;
        let mut codes: Vec<u64> = Vec::with_capacity(MAX_VISUAL_GROUP as usize + 1);
        while codes.len() <= MAX_VISUAL_GROUP as usize {
            let candidate = splitmix(&mut state) & ((1 << 56) - 1);
            if codes
                .iter()
                .all(|c| (c ^ candidate).count_ones() >= CODE_DISTANCE)
            {
                codes.push(candidate);
            }
        }
        codes
    })
}

/// Background tone of every body cell (grid rows 1..8).
fn body_tones(group: u32) -> [[u8; 9]; 7] {
    let code = codebook()[group as usize];
    let mut out = [[0u8; 9]; 7];
    for (r, row) in out.iter_mut().enumerate() {
        let mut levels = [0i32; 9];
        for j in 0..8 {
            let falling = code >> (r * 8 + j) & 1 == 1;
            levels[j + 1] = levels[j] + if falling { -STEP } else { STEP };
        }
        let lo = *levels.iter().min().unwrap();
        let hi = *levels.iter().max().unwrap();
        let shift = (255 - (hi - lo)) / 2 - lo;
        for (dst, level) in row.iter_mut().zip(levels) {
            *dst = (level + shift) as u8;
        }
    }
    out
}

fn title_tone(group: u32) -> u8 {
    80 + (group % 5) as u8 * 20
}

fn widget_offsets(widget: &Widget, salt: u64) -> (i32, i32) {
    // FNV-1a over the attributes, finished with splitmix
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    eat(&widget.widget_id.to_le_bytes());
    eat(widget.text.as_deref().unwrap_or("").as_bytes());
    eat(widget.resource_id.as_deref().unwrap_or("").as_bytes());
    eat(widget
        .content_description
        .as_deref()
        .unwrap_or("")
        .as_bytes());
    let mut state = h ^ salt;
    let span = (2 * WIDGET_SPREAD + 1) as u64;
    let fill = (splitmix(&mut state) % span) as i32 - WIDGET_SPREAD;
    let border = (splitmix(&mut state) % span) as i32 - WIDGET_SPREAD;
    (fill, border)
}

fn paint(group: u32, salt: u64, widgets: &[Widget], frame: u64) -> Bitmap {
    let (w, h) = (SCREEN_WIDTH as usize, SCREEN_HEIGHT as usize);
    let mut px = vec![0u8; w * h];
    px[..w * STATUS_STRIP_HEIGHT as usize].fill(STRIP_TONE);
    px[w * STATUS_STRIP_HEIGHT as usize..w * BODY_TOP as usize].fill(title_tone(group));

    if frame.is_multiple_of(2) {
        let glyph = DIGITS[(frame / 2 % 10) as usize];
        for (gy, bits) in glyph.iter().enumerate() {
            for gx in 0..3 {
                if bits >> (2 - gx) & 1 == 1 {
                    for dy in 0..2 {
                        let y = CLOCK_Y as usize + gy * 2 + dy;
                        let x = CLOCK_X as usize + gx * 2;
                        px[y * w + x..y * w + x + 2].fill(CLOCK_TONE);
                    }
                }
            }
        }
    }

    let tones = body_tones(group);
    for y in BODY_TOP as usize..h {
        let row = &tones[y / CELL_H as usize - 1];
        let line = &mut px[y * w..(y + 1) * w];
        for (c, chunk) in line.chunks_mut(CELL_W as usize).enumerate() {
            chunk.fill(row[c]);
        }
    }

    for widget in widgets {
        let (fill, border) = widget_offsets(widget, salt);
        let b = widget.bounds;
        let top = b.top.max(BODY_TOP as i32).max(0) as usize;
        let bottom = b.bottom.min(h as i32).max(0) as usize;
        let left = b.left.max(0) as usize;
        let right = b.right.min(w as i32).max(0) as usize;
        for y in top..bottom {
            let row = &tones[y / CELL_H as usize - 1];
            let edge_row = y == top || y + 1 == bottom;
            for x in left..right {
                let edge = edge_row || x == left || x + 1 == right;
                let offset = if edge { border } else { fill };
                let bg = i32::from(row[x / CELL_W as usize]);
                px[y * w + x] = (bg + offset).clamp(0, 255) as u8;
            }
        }
    }

    Bitmap::new(SCREEN_WIDTH, SCREEN_HEIGHT, px).expect("fixed screen size is valid")
}

/// Deterministic 180x320 screenshot of `screen` at `frame_counter`.
pub fn render(screen: &Screen, frame_counter: u64) -> Bitmap {
    paint(
        screen.def.visual_group,
        screen.def.render_salt,
        &screen.widgets,
        frame_counter,
    )
}

/// Splash shown after a crash restart; uses the reserved group.
pub fn render_restart(initial: &Screen, frame_counter: u64) -> Bitmap {
    paint(
        RESTART_GROUP,
        initial.def.render_salt,
        &initial.widgets,
        frame_counter,
    )
}

/// Checks the similarity contract for every pair of screens, across a
/// blinking and a non-blinking frame, plus the restart splash.
pub(crate) fn calibrate(model: &AppModel) -> Result<()> {
    let mut entries: Vec<(String, u32, [PHash; 2])> = model
        .screens()
        .iter()
        .map(|s| {
            (
                s.id().to_string(),
                s.def.visual_group,
                [render(s, 0).phash(), render(s, 1).phash()],
            )
        })
        .collect();
    let initial = model.screen(model.initial());
    entries.push((
        "<restart>".into(),
        RESTART_GROUP,
        [
            render_restart(initial, 0).phash(),
            render_restart(initial, 1).phash(),
        ],
    ));
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            for ha in a.2 {
                for hb in b.2 {
                    let score = hash_similarity(ha, hb);
                    if a.1 == b.1 && score < SAME_GROUP_MIN {
                        return Err(Error::Calibration {
                            a: a.0.clone(),
                            b: b.0.clone(),
                            score,
                            rule: "same visual group must be at least 0.97 similar",
                        });
                    }
                    if a.1 != b.1 && score > CROSS_GROUP_MAX {
                        return Err(Error::Calibration {
                            a: a.0.clone(),
                            b: b.0.clone(),
                            score,
                            rule: "different visual groups must be at most 0.80 similar",
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
