//! Difference hashing of grayscale screenshots.
//!
//! The hash is the canonical 64-bit dHash: the image is box-averaged onto a
//! 9x8 grid and bit `row * 8 + col` is set when a cell is strictly brighter
//! than its right-hand neighbour. All averaging is done in integer
//! arithmetic so hashes are identical on every platform.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const GRID_COLS: u32 = 9;
pub const GRID_ROWS: u32 = 8;
pub const HASH_BITS: u32 = 64;

/// Row-major 8-bit grayscale image.
#[derive(Clone)]
pub struct Bitmap {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    hash: OnceLock<PHash>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width < GRID_COLS || height < GRID_ROWS {
            return Err(Error::DimensionTooSmall { width, height });
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::PixelCountMismatch {
                width,
                height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            hash: OnceLock::new(),
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    /// Converts interleaved 8-bit RGB with integer luma
    /// `(299 R + 587 G + 114 B) / 1000`, rounded half-up.
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8]) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if rgb.len() != expected {
            return Err(Error::PixelCountMismatch {
                width,
                height,
                actual: rgb.len() / 3,
            });
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|px| {
                let luma = 299 * u32::from(px[0]) + 587 * u32::from(px[1]) + 114 * u32::from(px[2]);
                ((luma + 500) / 1000) as u8
            })
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel-wise inversion (`255 - v`).
    pub fn inverted(&self) -> Self {
        let pixels = self.pixels.iter().map(|v| 255 - v).collect();
        Self {
            width: self.width,
            height: self.height,
            pixels,
            hash: OnceLock::new(),
        }
    }

    /// The dHash of this bitmap, computed once and memoized.
    pub fn phash(&self) -> PHash {
        *self
            .hash
            .get_or_init(|| hash_pixels(self.width, self.height, &self.pixels))
    }

    pub fn parse_pgm(bytes: &[u8]) -> Result<Self> {
        pgm::parse(bytes)
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_pgm(&bytes)
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

impl PartialEq for Bitmap {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.pixels == other.pixels
    }
}

impl Eq for Bitmap {}

impl fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bitmap")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("phash", &self.phash())
            .finish()
    }
}

/// A 64-bit difference hash.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PHash(pub u64);

impl PHash {
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn bit(self, row: u32, col: u32) -> bool {
        self.0 >> (row * 8 + col) & 1 == 1
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }
}

impl fmt::Debug for PHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PHash({:016x})", self.0)
    }
}

impl fmt::Display for PHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for PHash {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(PHash)
    }
}

/// Computes the dHash of `img`.
pub fn dhash(img: &Bitmap) -> PHash {
    img.phash()
}

pub fn hamming(a: PHash, b: PHash) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// `1 - hamming / 64` between the hashes of two bitmaps.
pub fn similarity(a: &Bitmap, b: &Bitmap) -> f64 {
    hash_similarity(a.phash(), b.phash())
}

pub fn hash_similarity(a: PHash, b: PHash) -> f64 {
    1.0 - f64::from(hamming(a, b)) / f64::from(HASH_BITS)
}

/// Similarity threshold in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidThreshold(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn accepts(self, a: PHash, b: PHash) -> bool {
        hash_similarity(a, b) >= self.0
    }
}

impl TryFrom<f64> for Threshold {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

pub fn is_ui_similar(a: &Bitmap, b: &Bitmap, threshold: f64) -> Result<bool> {
    let threshold = Threshold::new(threshold)?;
    Ok(threshold.accepts(a.phash(), b.phash()))
}

/// Overlap of each source pixel with the (at most two) output cells it
/// straddles, measured in units of `1 / cells` pixel.
#[derive(Clone, Copy)]
struct Span {
    first: usize,
    first_weight: u64,
    second_weight: u64,
}

fn spans(len: u32, cells: u32) -> Vec<Span> {
    // Pixel p covers [p*cells, (p+1)*cells); cell c covers [c*len, (c+1)*len).
    let (len, cells) = (u64::from(len), u64::from(cells));
    (0..len)
        .map(|p| {
            let start = p * cells;
            let end = start + cells;
            let first = start / len;
            let boundary = (first + 1) * len;
            if end <= boundary {
                Span {
                    first: first as usize,
                    first_weight: cells,
                    second_weight: 0,
                }
            } else {
                Span {
                    first: first as usize,
                    first_weight: boundary - start,
                    second_weight: end - boundary,
                }
            }
        })
        .collect()
}

/// Box-averaged 9x8 grid, rounded half-up.
pub fn downsample(img: &Bitmap) -> [[u8; GRID_COLS as usize]; GRID_ROWS as usize] {
    downsample_raw(img.width, img.height, &img.pixels)
}

fn downsample_raw(width: u32, height: u32, pixels: &[u8]) -> [[u8; 9]; 8] {
    let cols = spans(width, GRID_COLS);
    let rows = spans(height, GRID_ROWS);
    let mut sums = [[0u64; 9]; 8];
    let mut row_cells = [0u64; 10];
    for (y, row_span) in rows.iter().enumerate() {
        row_cells.fill(0);
        let line = &pixels[y * width as usize..(y + 1) * width as usize];
        for (&px, span) in line.iter().zip(&cols) {
            let px = u64::from(px);
            row_cells[span.first] += px * span.first_weight;
            row_cells[span.first + 1] += px * span.second_weight;
        }
        for c in 0..9 {
            sums[row_span.first][c] += row_cells[c] * row_span.first_weight;
            if row_span.second_weight > 0 {
                sums[row_span.first + 1][c] += row_cells[c] * row_span.second_weight;
            }
        }
    }
    let area = u64::from(width) * u64::from(height);
    let mut grid = [[0u8; 9]; 8];
    for (r, row) in sums.iter().enumerate() {
        for (c, &sum) in row.iter().enumerate() {
            grid[r][c] = ((2 * sum + area) / (2 * area)) as u8;
        }
    }
    grid
}

fn hash_pixels(width: u32, height: u32, pixels: &[u8]) -> PHash {
    let grid = downsample_raw(width, height, pixels);
    let mut bits = 0u64;
    for (i, row) in grid.iter().enumerate() {
        for j in 0..8 {
            if row[j] > row[j + 1] {
                bits |= 1 << (i * 8 + j);
            }
        }
    }
    PHash(bits)
}

mod pgm {
    use super::Bitmap;
    use crate::error::{Error, Result};

    fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Pgm("unexpected end of header".into()));
        }
        Ok(&bytes[start..*pos])
    }

    fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
        let tok = token(bytes, pos)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm(format!("bad {what}")))
    }

    pub(super) fn parse(bytes: &[u8]) -> Result<Bitmap> {
        let mut pos = 0;
        if token(bytes, &mut pos)? != b"P5" {
            return Err(Error::Pgm("only binary P5 graymaps are supported".into()));
        }
        let width = number(bytes, &mut pos, "width")?;
        let height = number(bytes, &mut pos, "height")?;
        let maxval = number(bytes, &mut pos, "maxval")?;
        if maxval != 255 {
            return Err(Error::Pgm(format!(
                "maxval {maxval} unsupported (need 255)"
            )));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let len = width as usize * height as usize;
        let raster = bytes
            .get(pos..pos + len)
            .ok_or_else(|| Error::Pgm("truncated raster".into()))?;
        Bitmap::new(width, height, raster.to_vec())
    }
}
