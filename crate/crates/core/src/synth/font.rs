//! Typefaces used by the line synthesizer.
//!
//! Two kinds are supported: TrueType/OpenType files rasterized with
//! `ab_glyph`, and procedural "builtin" faces that need no font files. The
//! builtin faces draw Latin characters from an 8×8 bitmap font and CJK
//! ideographs as deterministic pseudo-glyphs built from strokes seeded by the
//! code point. Glyph shape carries no meaning for blur assessment, so the
//! builtin faces are enough to train and test everything offline.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ab_glyph::{Font, FontVec, PxScale, ScaleFont};
use font8x8::UnicodeFonts;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anti-aliased coverage of one glyph, positioned relative to the pen.
#[derive(Clone, Debug, Default)]
pub struct GlyphBitmap {
    pub width: usize,
    pub height: usize,
    /// Row-major coverage in [0, 1].
    pub coverage: Vec<f32>,
    /// Offset of the bitmap's left edge from the pen position.
    pub left: i32,
    /// Offset of the bitmap's top edge from the baseline (negative is up).
    pub top: i32,
    pub advance: f32,
}

pub trait Typeface: Send + Sync {
    fn name(&self) -> &str;

    fn supports(&self, ch: char) -> bool;

    /// Rasterizes `ch` with an em size of `px` pixels; `None` if unsupported.
    fn glyph(&self, ch: char, px: f32) -> Option<GlyphBitmap>;
}

/// A font reference as written in configuration: `builtin:<style>` or a file path.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FontSpec {
    Builtin(BuiltinStyle),
    File(PathBuf),
}

impl FontSpec {
    pub fn load(&self) -> Result<Box<dyn Typeface>> {
        match self {
            FontSpec::Builtin(style) => Ok(Box::new(BuiltinFace::new(*style))),
            FontSpec::File(path) => Ok(Box::new(TtfFace::load(path)?)),
        }
    }

    /// The six builtin faces.
    pub fn builtin_set() -> Vec<FontSpec> {
        BuiltinStyle::ALL.iter().map(|&s| FontSpec::Builtin(s)).collect()
    }

    /// DejaVu files shipped by most Linux distributions. These cover Latin only.
    pub fn dejavu_set() -> Vec<FontSpec> {
        [
            "DejaVuSans.ttf",
            "DejaVuSans-Bold.ttf",
            "DejaVuSerif.ttf",
            "DejaVuSerif-Bold.ttf",
            "DejaVuSansMono.ttf",
            "DejaVuSansMono-Bold.ttf",
        ]
        .iter()
        .map(|f| FontSpec::File(Path::new("/usr/share/fonts/truetype/dejavu").join(f)))
        .collect()
    }
}

impl fmt::Display for FontSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FontSpec::Builtin(s) => write!(f, "builtin:{}", s.name()),
            FontSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for FontSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("builtin:") {
            Some(style) => Ok(FontSpec::Builtin(style.parse()?)),
            None if s.is_empty() => Err(Error::param("empty font path")),
            None => Ok(FontSpec::File(PathBuf::from(s))),
        }
    }
}

impl From<FontSpec> for String {
    fn from(f: FontSpec) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for FontSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BuiltinStyle {
    Sans,
    Bold,
    Italic,
    Condensed,
    Wide,
    BoldItalic,
}

impl BuiltinStyle {
    pub const ALL: [BuiltinStyle; 6] = [
        BuiltinStyle::Sans,
        BuiltinStyle::Bold,
        BuiltinStyle::Italic,
        BuiltinStyle::Condensed,
        BuiltinStyle::Wide,
        BuiltinStyle::BoldItalic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinStyle::Sans => "sans",
            BuiltinStyle::Bold => "bold",
            BuiltinStyle::Italic => "italic",
            BuiltinStyle::Condensed => "condensed",
            BuiltinStyle::Wide => "wide",
            BuiltinStyle::BoldItalic => "bold-italic",
        }
    }

    // (horizontal scale, stroke weight in em, shear)
    fn metrics(self) -> (f32, f32, f32) {
        match self {
            BuiltinStyle::Sans => (0.85, 0.0, 0.0),
            BuiltinStyle::Bold => (0.9, 0.045, 0.0),
            BuiltinStyle::Italic => (0.85, 0.0, 0.22),
            BuiltinStyle::Condensed => (0.68, 0.0, 0.0),
            BuiltinStyle::Wide => (1.1, 0.02, 0.0),
            BuiltinStyle::BoldItalic => (0.9, 0.045, 0.2),
        }
    }
}

impl FromStr for BuiltinStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinStyle::ALL
            .iter()
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::param(format!("unknown builtin font style {s:?}")))
    }
}

const SUPERSAMPLE: usize = 4;

/// Procedural face: bitmap-derived Latin glyphs and stroke-built CJK glyphs.
pub struct BuiltinFace {
    style: BuiltinStyle,
    name: String,
}

impl BuiltinFace {
    pub fn new(style: BuiltinStyle) -> Self {
        BuiltinFace {
            style,
            name: format!("builtin:{}", style.name()),
        }
    }

    fn latin(&self, rows: [u8; 8], px: f32) -> GlyphBitmap {
        let (xscale, weight, shear) = self.style.metrics();
        let used: Vec<usize> = (0..8).filter(|&c| rows.iter().any(|r| r & (1 << c) != 0)).collect();
        let (first, last) = match (used.first(), used.last()) {
            (Some(&a), Some(&b)) => (a, b),
            // Blank glyph (space): advance only.
            _ => {
                return GlyphBitmap {
                    advance: (px * 0.35 * xscale).round(),
                    ..GlyphBitmap::default()
                }
            }
        };
        let cell_h = px / 9.0;
        let cell_w = cell_h * xscale;
        let dilate = weight * px;
        let cols = (last - first + 1) as f32;
        // Rows 0..7 sit above the baseline; row 7 holds descenders.
        let ascent = 7.0 * cell_h;
        let slant_extra = shear * 8.0 * cell_h;
        let w = (cols * cell_w + 2.0 * dilate + slant_extra).ceil() as usize + 2;
        let h = (8.0 * cell_h).ceil() as usize + 2;
        let inside = |u: f32, v: f32| -> bool {
            // (u, v) in glyph pixels, origin at top-left of the cell grid.
            if v < 0.0 || v >= 8.0 * cell_h {
                return false;
            }
            let row = (v / cell_h) as usize;
            let u = u - shear * (ascent - v) - dilate;
            let bits = rows[row];
            let probe = |uu: f32| -> bool {
                if uu < 0.0 {
                    return false;
                }
                let c = (uu / cell_w) as usize + first;
                c <= last && bits & (1 << c) != 0
            };
            probe(u) || (dilate > 0.0 && (probe(u - dilate) || probe(u + dilate)))
        };
        let coverage = supersample(w, h, |u, v| inside(u - 1.0, v - 1.0));
        GlyphBitmap {
            width: w,
            height: h,
            coverage,
            left: 0,
            top: -(ascent.round() as i32) - 1,
            advance: ((cols + 1.0) * cell_w + 2.0 * dilate).round(),
        }
    }

    fn ideograph(&self, ch: char, px: f32) -> GlyphBitmap {
        let (xscale, weight, shear) = self.style.metrics();
        let strokes = ideograph_strokes(ch);
        let thickness = (0.065 + weight) * px;
        let box_w = px * xscale.clamp(0.8, 1.0);
        let ascent = 0.88 * px;
        let pad = (thickness + shear * px).ceil() as usize + 2;
        let w = box_w.ceil() as usize + 2 * pad;
        let h = px.ceil() as usize + 2 * pad;
        let half = thickness / 2.0;
        let segs: Vec<[f32; 4]> = strokes
            .iter()
            .map(|&[x0, y0, x1, y1]| {
                [
                    pad as f32 + x0 * box_w,
                    pad as f32 + y0 * px,
                    pad as f32 + x1 * box_w,
                    pad as f32 + y1 * px,
                ]
            })
            .collect();
        let coverage = supersample(w, h, |u, v| {
            let u = u - shear * (pad as f32 + ascent - v);
            segs.iter().any(|s| dist_to_segment(u, v, s) <= half)
        });
        GlyphBitmap {
            width: w,
            height: h,
            coverage,
            left: -(pad as i32),
            top: -(ascent.round() as i32) - pad as i32,
            advance: (box_w * 1.08).round(),
        }
    }
}

fn supersample(w: usize, h: usize, inside: impl Fn(f32, f32) -> bool) -> Vec<f32> {
    let n = SUPERSAMPLE;
    let step = 1.0 / n as f32;
    let norm = 1.0 / (n * n) as f32;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut hits = 0;
            for sy in 0..n {
                let v = y as f32 + (sy as f32 + 0.5) * step;
                for sx in 0..n {
                    let u = x as f32 + (sx as f32 + 0.5) * step;
                    if inside(u, v) {
                        hits += 1;
                    }
                }
            }
            out[y * w + x] = hits as f32 * norm;
        }
    }
    out
}

fn dist_to_segment(px: f32, py: f32, s: &[f32; 4]) -> f32 {
    let (dx, dy) = (s[2] - s[0], s[3] - s[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - s[0]) * dx + (py - s[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (s[0] + t * dx - px, s[1] + t * dy - py);
    (cx * cx + cy * cy).sqrt()
}

fn is_ideograph(ch: char) -> bool {
    matches!(ch as u32, 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF)
}

/// Stroke list in unit-square coordinates, derived from the code point alone.
fn ideograph_strokes(ch: char) -> Vec<[f32; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1DE0_6AA0 ^ ch as u64);
    let grid = |rng: &mut ChaCha8Rng| 0.1 + 0.8 * rng.random_range(0..=6) as f32 / 6.0;
    let n = rng.random_range(4..=9);
    let mut strokes = Vec::with_capacity(n + 4);
    if rng.random_bool(0.25) {
        // Enclosure.
        strokes.extend([
            [0.1, 0.1, 0.9, 0.1],
            [0.1, 0.1, 0.1, 0.9],
            [0.9, 0.1, 0.9, 0.9],
            [0.1, 0.9, 0.9, 0.9],
        ]);
    }
    for _ in 0..n {
        let (a, b) = (grid(&mut rng), grid(&mut rng));
        let (lo, hi) = (a.min(b), a.max(b).max(a.min(b) + 0.25).min(0.9));
        let at = grid(&mut rng);
        strokes.push(match rng.random_range(0..5) {
            0 | 1 => [lo, at, hi, at],
            2 | 3 => [at, lo, at, hi],
            _ => {
                let x = grid(&mut rng);
                if rng.random_bool(0.5) {
                    [x, lo, (x - 0.3).max(0.1), hi]
                } else {
                    [x, lo, (x + 0.3).min(0.9), hi]
                }
            }
        });
    }
    strokes
}

impl Typeface for BuiltinFace {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports(&self, ch: char) -> bool {
        is_ideograph(ch) || font8x8::BASIC_FONTS.get(ch).is_some()
    }

    fn glyph(&self, ch: char, px: f32) -> Option<GlyphBitmap> {
        if is_ideograph(ch) {
            return Some(self.ideograph(ch, px));
        }
        font8x8::BASIC_FONTS.get(ch).map(|rows| self.latin(rows, px))
    }
}

/// A font file rasterized with `ab_glyph`.
pub struct TtfFace {
    font: FontVec,
    name: String,
}

impl TtfFace {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let font = FontVec::try_from_vec(bytes)
            .map_err(|_| Error::data(format!("{} is not a usable font file", path.display())))?;
        Ok(TtfFace {
            font,
            name: path.display().to_string(),
        })
    }
}

impl Typeface for TtfFace {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports(&self, ch: char) -> bool {
        ch.is_whitespace() || self.font.glyph_id(ch).0 != 0
    }

    fn glyph(&self, ch: char, px: f32) -> Option<GlyphBitmap> {
        if !self.supports(ch) {
            return None;
        }
        let scale = PxScale::from(px);
        let id = self.font.glyph_id(ch);
        let advance = self.font.as_scaled(scale).h_advance(id);
        let glyph = id.with_scale_and_position(scale, ab_glyph::point(0.0, 0.0));
        let Some(outlined) = self.font.outline_glyph(glyph) else {
            return Some(GlyphBitmap {
                advance,
                ..GlyphBitmap::default()
            });
        };
        let bounds = outlined.px_bounds();
        let w = bounds.width().max(0.0) as usize;
        let h = bounds.height().max(0.0) as usize;
        let mut coverage = vec![0.0; w * h];
        outlined.draw(|x, y, c| {
            let (x, y) = (x as usize, y as usize);
            if x < w && y < h {
                coverage[y * w + x] = c.clamp(0.0, 1.0);
            }
        });
        Some(GlyphBitmap {
            width: w,
            height: h,
            coverage,
            left: bounds.min.x as i32,
            top: bounds.min.y as i32,
            advance,
        })
    }
}
