//! Squared-English-Word glyph cells.
//!
//! A word of `n` characters is drawn into a square cell by arranging its
//! characters row-major in an `m × m` sub-grid, where `m` is the smallest
//! integer with `m² ≥ n`. Each character is an 8×8 bitmap scaled to
//! `⌊side / m⌋` pixels.

use crate::error::{Error, Result};

pub const INK: u8 = 0;
pub const BACKGROUND: u8 = 255;

/// Longest word drawn; extra characters are dropped before squaring.
pub const MAX_WORD_CHARS: usize = 64;

/// Side of the base bitmaps.
pub const BASE_PX: usize = 8;

/// One 8×8 glyph, one byte per row, bit 0 is the leftmost column.
pub type Bitmap = [u8; 8];

/// Hollow box drawn for characters outside printable ASCII.
const FALLBACK: Bitmap = [0x7E, 0x42, 0x42, 0x42, 0x42, 0x42, 0x7E, 0x00];

/// Printable-ASCII bitmap font with a fallback glyph.
#[derive(Debug, Clone)]
pub struct FontTable {
    glyphs: [Bitmap; 95],
    fallback: Bitmap,
}

impl Default for FontTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FontTable {
    /// The embedded public-domain 8×8 font.
    pub fn builtin() -> Self {
        let mut glyphs = [[0u8; 8]; 95];
        for (i, g) in glyphs.iter_mut().enumerate() {
            *g = font8x8::legacy::BASIC_LEGACY[0x20 + i];
        }
        FontTable {
            glyphs,
            fallback: FALLBACK,
        }
    }

    /// Total lookup: printable ASCII maps to its own glyph, anything else to
    /// the fallback.
    pub fn glyph(&self, c: char) -> &Bitmap {
        match c {
            ' '..='~' => &self.glyphs[c as usize - 0x20],
            _ => &self.fallback,
        }
    }

    pub fn fallback(&self) -> &Bitmap {
        &self.fallback
    }
}

#[inline]
fn bit(bitmap: &Bitmap, x: usize, y: usize) -> bool {
    bitmap[y] >> x & 1 == 1
}

/// Whether target pixel `(x, y)` of a `sub`-pixel character is ink.
///
/// Upscaling is nearest-neighbor. Below 8px each target pixel covers a box of
/// source pixels and is ink when any of them is, so thin strokes survive.
#[inline]
fn sample(bitmap: &Bitmap, x: usize, y: usize, sub: usize) -> bool {
    if sub >= BASE_PX {
        return bit(bitmap, x * BASE_PX / sub, y * BASE_PX / sub);
    }
    let span = |t: usize| t * BASE_PX / sub..((t + 1) * BASE_PX).div_ceil(sub);
    span(y).any(|sy| span(x).any(|sx| bit(bitmap, sx, sy)))
}

/// Square 8-bit cell holding one rendered word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphCell {
    pub side_px: usize,
    /// Row-major, `side_px * side_px` values, each [`INK`] or [`BACKGROUND`].
    pub pixels: Vec<u8>,
}

impl GlyphCell {
    pub fn blank(side_px: usize) -> Self {
        GlyphCell {
            side_px,
            pixels: vec![BACKGROUND; side_px * side_px],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.side_px + x]
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == INK).count()
    }
}

/// Smallest `m` with `m * m >= word_len`.
pub fn sew_grid_dim(word_len: usize) -> Result<usize> {
    if word_len == 0 {
        return Err(Error::InvalidArgument("word length must be positive".into()));
    }
    let mut m = (word_len as f64).sqrt() as usize;
    while m * m < word_len {
        m += 1;
    }
    while m > 1 && (m - 1) * (m - 1) >= word_len {
        m -= 1;
    }
    Ok(m)
}

/// Characters that will actually be drawn for `word`.
pub fn drawable_chars(word: &str, side_px: usize) -> Vec<char> {
    let limit = MAX_WORD_CHARS.min(side_px * side_px);
    word.chars().filter(|c| !c.is_control()).take(limit).collect()
}

/// Renders `word` into a `side_px`-square cell.
///
/// Sub-cells are placed from the top-left corner; when `m` does not divide
/// `side_px` the leftover right and bottom strips stay background.
pub fn render_word(word: &str, side_px: usize, font: &FontTable) -> Result<GlyphCell> {
    if side_px < BASE_PX {
        return Err(Error::InvalidArgument(format!(
            "cell side {side_px}px is below the {BASE_PX}px minimum"
        )));
    }
    let chars = drawable_chars(word, side_px);
    if chars.is_empty() {
        return Err(Error::Empty("word has no drawable characters"));
    }
    let m = sew_grid_dim(chars.len())?;
    let sub = side_px / m;
    let mut cell = GlyphCell::blank(side_px);
    for (i, &c) in chars.iter().enumerate() {
        let bitmap = font.glyph(c);
        let (ox, oy) = ((i % m) * sub, (i / m) * sub);
        for y in 0..sub {
            let row = &mut cell.pixels[(oy + y) * side_px + ox..][..sub];
            for (x, px) in row.iter_mut().enumerate() {
                if sample(bitmap, x, y, sub) {
                    *px = INK;
                }
            }
        }
    }
    Ok(cell)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_dim_examples() {
        assert_eq!(sew_grid_dim(1).unwrap(), 1);
        assert_eq!(sew_grid_dim(4).unwrap(), 2);
        assert!(sew_grid_dim(0).is_err());
    }

    #[test]
    fn grid_dim_matches_enumeration() {
        for n in 1..=5000usize {
            let brute = (1..).find(|m: &usize| m * m >= n).unwrap();
            assert_eq!(sew_grid_dim(n).unwrap(), brute, "n={n}");
        }
        assert_eq!(sew_grid_dim(10).unwrap(), 4);
    }

    #[test]
    fn every_printable_glyph_has_ink() {
        let font = FontTable::builtin();
        for c in '!'..='~' {
            assert!(font.glyph(c).iter().any(|&r| r != 0), "{c:?} is blank");
        }
        assert_eq!(font.glyph(' '), &[0; 8]);
        assert_eq!(font.glyph('é'), font.fallback());
        assert_eq!(font.glyph('\u{1F600}'), font.fallback());
    }

    #[test]
    fn single_char_scales_4x() {
        let font = FontTable::builtin();
        let cell = render_word("a", 32, &font).unwrap();
        let base = font.glyph('a');
        for y in 0..32 {
            for x in 0..32 {
                let expect = if bit(base, x / 4, y / 4) { INK } else { BACKGROUND };
                assert_eq!(cell.get(x, y), expect);
            }
        }
    }

    #[test]
    fn four_letter_word_uses_2x2_grid() {
        let font = FontTable::builtin();
        let cell = render_word("wife", 32, &font).unwrap();
        for (i, c) in "wife".chars().enumerate() {
            let (ox, oy) = ((i % 2) * 16, (i / 2) * 16);
            for y in 0..16 {
                for x in 0..16 {
                    let ink = bit(font.glyph(c), x / 2, y / 2);
                    assert_eq!(cell.get(ox + x, oy + y) == INK, ink, "{c} at {x},{y}");
                }
            }
        }
    }

    #[test]
    fn residual_border_is_background() {
        let font = FontTable::builtin();
        // 5 chars -> m=3, sub=9 in a 28px cell, 1px residual strip.
        let cell = render_word("hello", 28, &font).unwrap();
        for k in 0..28 {
            assert_eq!(cell.get(27, k), BACKGROUND);
            assert_eq!(cell.get(k, 27), BACKGROUND);
        }
        // unused trailing sub-cells (indices 5..9) stay blank
        for y in 9..27 {
            for x in 0..27 {
                let i = (y / 9) * 3 + x / 9;
                if i >= 5 {
                    assert_eq!(cell.get(x, y), BACKGROUND);
                }
            }
        }
    }

    #[test]
    fn ink_blocks_preserve_base_topology() {
        let font = FontTable::builtin();
        for side in [8usize, 16, 32, 64] {
            let cell = render_word("Q", side, &font).unwrap();
            let k = side / 8;
            let base_ink: usize = font.glyph('Q').iter().map(|r| r.count_ones() as usize).sum();
            assert_eq!(cell.ink_count(), base_ink * k * k);
        }
    }

    #[test]
    fn long_words_are_truncated_and_never_fail() {
        let font = FontTable::builtin();
        let w: String = std::iter::repeat_n('x', 500).collect();
        let cell = render_word(&w, 28, &font).unwrap();
        assert_eq!(drawable_chars(&w, 28).len(), MAX_WORD_CHARS);
        assert!(cell.ink_count() > 0);
        let cell8 = render_word(&w, 8, &font).unwrap();
        assert!(cell8.ink_count() > 0);
        let dots: String = std::iter::repeat_n('.', 64).collect();
        for side in [8, 12, 28] {
            let cell = render_word(&dots, side, &font).unwrap();
            assert!(cell.ink_count() > 0, "side {side}");
        }
    }

    #[test]
    fn control_only_words_and_tiny_cells_error() {
        let font = FontTable::builtin();
        assert!(render_word("\u{0}\u{7}", 32, &font).is_err());
        assert!(render_word("", 32, &font).is_err());
        assert!(render_word("a", 7, &font).is_err());
        assert_eq!(
            render_word("a\u{0}b", 32, &font).unwrap(),
            render_word("ab", 32, &font).unwrap()
        );
    }

    #[test]
    fn unicode_renders_fallback_boxes() {
        let font = FontTable::builtin();
        let cell = render_word("é", 32, &font).unwrap();
        let box_ink: usize = FALLBACK.iter().map(|r| r.count_ones() as usize).sum();
        assert_eq!(cell.ink_count(), box_ink * 16);
    }
}
