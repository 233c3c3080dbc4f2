//! 224×224 Super Characters images.
//!
//! The text occupies a grid of `N × rows` word slots of `224/N` pixels; the
//! remaining bottom strip, when a design has one, holds tabular attributes
//! drawn as values only.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::DateTime;

use crate::dataset::{tokenize, Record};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::glyph::{render_word, FontTable, GlyphCell, BACKGROUND, BASE_PX, INK};

pub const IMAGE_SIDE: usize = 224;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

pub(crate) fn builtin_font() -> &'static FontTable {
    static FONT: OnceLock<FontTable> = OnceLock::new();
    FONT.get_or_init(FontTable::builtin)
}

/// Layout geometry of a design option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    OptionOne,
    OptionTwo,
    OptionThree,
}

/// Image scheme as selected on the command line; `Four` is Option Three
/// geometry plus space-prefix augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    One,
    Two,
    Three,
    Four,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::One => "one",
            Scheme::Two => "two",
            Scheme::Three => "three",
            Scheme::Four => "four",
        }
    }

    pub fn layout(self) -> LayoutSpec {
        match self {
            Scheme::One => LayoutSpec::option_one(),
            Scheme::Two => LayoutSpec::option_two(),
            Scheme::Three | Scheme::Four => LayoutSpec::option_three(),
        }
    }

    pub fn is_augmented(self) -> bool {
        self == Scheme::Four
    }
}

impl From<Design> for Scheme {
    fn from(d: Design) -> Self {
        match d {
            Design::OptionOne => Scheme::One,
            Design::OptionTwo => Scheme::Two,
            Design::OptionThree => Scheme::Three,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "one" | "1" => Ok(Scheme::One),
            "two" | "2" => Ok(Scheme::Two),
            "three" | "3" => Ok(Scheme::Three),
            "four" | "4" => Ok(Scheme::Four),
            _ => Err(Error::InvalidArgument(format!("unknown design `{s}`"))),
        }
    }
}

/// Tabular attributes that can be drawn into an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    Author,
    Wordcount,
    CreatedUtc,
    Subreddit,
    Score,
    Nchar,
    Label,
}

impl Attribute {
    /// The value as drawn: decimal integers, `YYYY-MM-DD HH:MM:SS` timestamps,
    /// strings verbatim.
    pub fn format_value(self, record: &Record) -> String {
        match self {
            Attribute::Author => record.author.clone(),
            Attribute::Wordcount => record.wordcount.to_string(),
            Attribute::CreatedUtc => DateTime::from_timestamp(record.created_utc, 0)
                .map(|dt| dt.format("%Y-%m-%d %H:%M:%S").to_string())
                .unwrap_or_else(|| record.created_utc.to_string()),
            Attribute::Subreddit => record.subreddit.clone(),
            Attribute::Score => record.score.to_string(),
            Attribute::Nchar => record.nchar.to_string(),
            Attribute::Label => record.label.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }
}

/// One attribute and the strip it is drawn into. Values are laid out as
/// square cells of side `rect.h`, left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttributeRegion {
    pub attribute: Attribute,
    pub rect: Rect,
}

impl AttributeRegion {
    pub fn cell_capacity(&self) -> usize {
        self.rect.w / self.rect.h
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutSpec {
    pub design: Design,
    /// `N`: word slots per row.
    pub words_per_row: usize,
    pub text_rows: usize,
    pub cell_px: usize,
    /// Word slots available to full_text; later tokens are dropped.
    pub cutlength: usize,
    pub attribute_plan: Vec<AttributeRegion>,
}

fn region(attribute: Attribute, row_y: usize, cell: usize, from: usize, to: usize) -> AttributeRegion {
    AttributeRegion {
        attribute,
        rect: Rect {
            x: from * cell,
            y: row_y,
            w: (to - from) * cell,
            h: cell,
        },
    }
}

impl LayoutSpec {
    /// Validates geometry and the attribute plan.
    pub fn new(
        design: Design,
        words_per_row: usize,
        text_rows: usize,
        attribute_plan: Vec<AttributeRegion>,
    ) -> Result<Self> {
        if words_per_row == 0 || !IMAGE_SIDE.is_multiple_of(words_per_row) {
            return Err(Error::Layout(format!(
                "{words_per_row} words per row does not divide {IMAGE_SIDE}"
            )));
        }
        let cell_px = IMAGE_SIDE / words_per_row;
        if cell_px < BASE_PX {
            return Err(Error::Layout(format!("{cell_px}px cells are below the glyph minimum")));
        }
        let text_height = text_rows * cell_px;
        if text_height > IMAGE_SIDE {
            return Err(Error::Layout(format!("{text_rows} text rows exceed the image")));
        }
        for (i, r) in attribute_plan.iter().enumerate() {
            let rect = r.rect;
            if rect.h < BASE_PX || rect.w < rect.h {
                return Err(Error::Layout(format!(
                    "region for {:?} cannot hold one glyph",
                    r.attribute
                )));
            }
            if rect.x + rect.w > IMAGE_SIDE || rect.y + rect.h > IMAGE_SIDE {
                return Err(Error::Layout(format!("region for {:?} leaves the canvas", r.attribute)));
            }
            if rect.y < text_height {
                return Err(Error::Layout(format!(
                    "region for {:?} overlaps the text rows",
                    r.attribute
                )));
            }
            if attribute_plan[..i].iter().any(|o| o.rect.overlaps(&rect)) {
                return Err(Error::Layout(format!("region for {:?} overlaps another", r.attribute)));
            }
        }
        Ok(LayoutSpec {
            design,
            words_per_row,
            text_rows,
            cell_px,
            cutlength: words_per_row * text_rows,
            attribute_plan,
        })
    }

    /// Text only: 7 words per row, 7 rows, 32px cells.
    pub fn option_one() -> Self {
        Self::new(Design::OptionOne, 7, 7, Vec::new()).expect("option one geometry")
    }

    /// 8 words per row, 5 text rows of 28px; the bottom three rows carry
    /// every attribute except the two ids.
    pub fn option_two() -> Self {
        let c = IMAGE_SIDE / 8;
        let base = 5 * c;
        let plan = vec![
            region(Attribute::Author, base, c, 0, 3),
            region(Attribute::Wordcount, base, c, 3, 5),
            region(Attribute::CreatedUtc, base, c, 5, 8),
            region(Attribute::Subreddit, base + c, c, 0, 3),
            region(Attribute::Score, base + c, c, 3, 5),
            region(Attribute::Nchar, base + c, c, 5, 8),
            region(Attribute::Label, base + 2 * c, c, 0, 8),
        ];
        Self::new(Design::OptionTwo, 8, 5, plan).expect("option two geometry")
    }

    /// 7 words per row, 6 text rows of 32px; the last row carries subreddit,
    /// wordcount, score and label.
    pub fn option_three() -> Self {
        let c = IMAGE_SIDE / 7;
        let base = 6 * c;
        let plan = vec![
            region(Attribute::Subreddit, base, c, 0, 2),
            region(Attribute::Wordcount, base, c, 2, 3),
            region(Attribute::Score, base, c, 3, 4),
            region(Attribute::Label, base, c, 4, 7),
        ];
        Self::new(Design::OptionThree, 7, 6, plan).expect("option three geometry")
    }

    pub fn for_design(design: Design) -> Self {
        match design {
            Design::OptionOne => Self::option_one(),
            Design::OptionTwo => Self::option_two(),
            Design::OptionThree => Self::option_three(),
        }
    }

    /// Top-left pixel of a text slot.
    pub fn slot_origin(&self, slot: usize) -> (usize, usize) {
        (
            (slot % self.words_per_row) * self.cell_px,
            (slot / self.words_per_row) * self.cell_px,
        )
    }

    /// Height of the attribute strip below the text rows.
    pub fn attribute_height(&self) -> usize {
        self.attribute_plan
            .iter()
            .map(|r| r.rect.y + r.rect.h)
            .max()
            .map_or(0, |bottom| bottom - self.text_rows * self.cell_px)
    }
}

/// Where an image came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub record_id: String,
    pub scheme: Scheme,
    pub prefix_spaces: usize,
}

/// A 224×224 binary grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperImage {
    pub pixels: Vec<u8>,
    pub provenance: Provenance,
}

impl SuperImage {
    pub fn blank(provenance: Provenance) -> Self {
        SuperImage {
            pixels: vec![BACKGROUND; IMAGE_PIXELS],
            provenance,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * IMAGE_SIDE + x]
    }

    pub fn blit(&mut self, cell: &GlyphCell, x0: usize, y0: usize) {
        let s = cell.side_px;
        for y in 0..s {
            self.pixels[(y0 + y) * IMAGE_SIDE + x0..][..s]
                .copy_from_slice(&cell.pixels[y * s..][..s]);
        }
    }

    /// Copy of the square block at (x0, y0).
    pub fn crop(&self, x0: usize, y0: usize, side: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(side * side);
        for y in y0..y0 + side {
            out.extend_from_slice(&self.pixels[y * IMAGE_SIDE + x0..][..side]);
        }
        out
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == INK).count()
    }
}

/// Halves resolution; each output pixel is ink when any of its 2×2 sources is.
pub fn downsample_ink(pixels: &[u8], side: usize) -> Vec<u8> {
    let half = side / 2;
    let mut out = vec![BACKGROUND; half * half];
    for y in 0..half {
        for x in 0..half {
            let a = pixels[2 * y * side + 2 * x];
            let b = pixels[2 * y * side + 2 * x + 1];
            let c = pixels[(2 * y + 1) * side + 2 * x];
            let d = pixels[(2 * y + 1) * side + 2 * x + 1];
            out[y * half + x] = a.min(b).min(c).min(d);
        }
    }
    out
}

fn cell_or_blank(word: &str, side: usize, font: &FontTable) -> GlyphCell {
    // Tokens made only of control characters have nothing to draw.
    render_word(word, side, font).unwrap_or_else(|_| GlyphCell::blank(side))
}

/// Word slot contents for `record` under `spec`: `prefix_spaces` blanks,
/// then tokens in order, cut at `cutlength`.
pub fn text_slots<'a>(record: &'a Record, spec: &LayoutSpec, prefix_spaces: usize) -> Vec<Option<&'a str>> {
    let mut slots = vec![None; spec.cutlength];
    for (slot, token) in slots
        .iter_mut()
        .skip(prefix_spaces)
        .zip(tokenize(&record.full_text))
    {
        *slot = Some(token);
    }
    slots
}

/// Number of word cells `render` draws.
pub fn rendered_word_count(token_count: usize, cutlength: usize, prefix_spaces: usize) -> usize {
    token_count.min(cutlength.saturating_sub(prefix_spaces))
}

/// Draws each planned attribute's value tokens into its region.
pub fn embed_attributes(
    canvas: &mut SuperImage,
    record: &Record,
    plan: &[AttributeRegion],
    font: &FontTable,
) {
    for region in plan {
        let value = region.attribute.format_value(record);
        let side = region.rect.h;
        for (i, token) in tokenize(&value).into_iter().take(region.cell_capacity()).enumerate() {
            let cell = cell_or_blank(token, side, font);
            canvas.blit(&cell, region.rect.x + i * side, region.rect.y);
        }
    }
}

pub fn render_with_font(
    record: &Record,
    spec: &LayoutSpec,
    prefix_spaces: usize,
    font: &FontTable,
) -> SuperImage {
    let mut image = SuperImage::blank(Provenance {
        record_id: record.sentenceid.clone(),
        scheme: spec.design.into(),
        prefix_spaces,
    });
    for (slot, word) in text_slots(record, spec, prefix_spaces).into_iter().enumerate() {
        if let Some(word) = word {
            let (x, y) = spec.slot_origin(slot);
            image.blit(&cell_or_blank(word, spec.cell_px, font), x, y);
        }
    }
    embed_attributes(&mut image, record, &spec.attribute_plan, font);
    image
}

/// Renders one record with the built-in font.
pub fn render(record: &Record, spec: &LayoutSpec, prefix_spaces: usize) -> SuperImage {
    render_with_font(record, spec, prefix_spaces, builtin_font())
}

/// Prefix counts for space-prefix augmentation: `0..=cutlength − L` with
/// `L = min(tokens, cutlength)`.
pub fn augment_prefixes(token_count: usize, cutlength: usize) -> std::ops::RangeInclusive<usize> {
    0..=cutlength - token_count.min(cutlength)
}

/// Space-prefix augmentation: one image per prefix until the shifted
/// sentence reaches the last slot. Images are tagged as scheme four.
pub fn augment(record: &Record, spec: &LayoutSpec) -> Vec<SuperImage> {
    augment_prefixes(record.token_count(), spec.cutlength)
        .map(|p| {
            let mut img = render(record, spec, p);
            img.provenance.scheme = Scheme::Four;
            img
        })
        .collect()
}

/// Renders every record under a scheme. For scheme four each record expands
/// to its augmentation set, unless `include_original` is false, in which case
/// the unshifted image is dropped whenever shifted ones exist.
pub fn render_scheme(records: &[Record], scheme: Scheme, include_original: bool, exec: Exec) -> Vec<SuperImage> {
    let spec = scheme.layout();
    let per_record = exec.map(records, |r| {
        if scheme.is_augmented() {
            let mut imgs = augment(r, &spec);
            if !include_original && imgs.len() > 1 {
                imgs.remove(0);
            }
            imgs
        } else {
            vec![render(r, &spec, 0)]
        }
    });
    per_record.into_iter().flatten().collect()
}
