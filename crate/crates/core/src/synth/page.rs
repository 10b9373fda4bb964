//! Synthetic document pages with known text-line boxes and qualities.

use rand::Rng;

use super::label::quality_label;
use super::render::{stream_rng, LineSynthesizer, Script};
use crate::detect::BoundingBox;
use crate::error::{Error, Result};
use crate::imgproc::{gaussian_blur, BlurSpec, GrayImage};

/// Explicit placement of one line on a page. `(x, y)` is the ink's top-left corner.
#[derive(Clone, Debug)]
pub struct PageLineSpec {
    pub x: usize,
    pub y: usize,
    pub font: usize,
    pub font_size: u32,
    pub text: String,
    pub ink: u8,
    pub sigma: f64,
}

/// Ground truth for one composed line.
#[derive(Clone, Debug)]
pub struct PageLine {
    pub bbox: BoundingBox,
    pub sigma: f64,
    pub label: f64,
    pub font_size: u32,
}

#[derive(Clone, Debug)]
pub struct SyntheticPage {
    pub image: GrayImage,
    pub lines: Vec<PageLine>,
}

impl SyntheticPage {
    /// Area-weighted mean of the line labels.
    pub fn ground_truth_quality(&self) -> Option<f64> {
        let total: f64 = self.lines.iter().map(|l| l.bbox.area() as f64).sum();
        (total > 0.0).then(|| {
            self.lines
                .iter()
                .map(|l| l.bbox.area() as f64 * l.label)
                .sum::<f64>()
                / total
        })
    }
}

/// Draws each line sharp, blurs it on its own with its `sigma`, and merges it
/// onto a `background` page keeping the darker value.
pub fn compose_page(
    synth: &LineSynthesizer,
    width: usize,
    height: usize,
    background: u8,
    specs: &[PageLineSpec],
) -> Result<SyntheticPage> {
    if width == 0 || height == 0 {
        return Err(Error::param("page size must be positive"));
    }
    let kernel_size = synth.config().kernel_size;
    let pad = kernel_size;
    let mut page = GrayImage::new(width, height, background);
    let mut lines = Vec::with_capacity(specs.len());
    for spec in specs {
        let Some(layer) = synth.rasterize(spec.font, &spec.text, spec.font_size as f32)? else {
            continue;
        };
        let mut tile = GrayImage::new(layer.width + 2 * pad, layer.height + 2 * pad, background);
        layer.draw(&mut tile, pad as i64, pad as i64, spec.ink);
        let tile = gaussian_blur(&tile, &BlurSpec::with_kernel_size(spec.sigma, kernel_size))?;
        let (ox, oy) = (spec.x as i64 - pad as i64, spec.y as i64 - pad as i64);
        for ty in 0..tile.height() {
            let py = oy + ty as i64;
            if py < 0 || py >= height as i64 {
                continue;
            }
            for tx in 0..tile.width() {
                let px = ox + tx as i64;
                if px < 0 || px >= width as i64 {
                    continue;
                }
                let (px, py) = (px as usize, py as usize);
                page.set(px, py, page.get(px, py).min(tile.get(tx, ty)));
            }
        }
        if spec.x >= width || spec.y >= height {
            continue;
        }
        let w = layer.width.min(width - spec.x);
        let h = layer.height.min(height - spec.y);
        lines.push(PageLine {
            bbox: BoundingBox::new(spec.x, spec.y, w, h),
            sigma: spec.sigma,
            label: quality_label(spec.sigma, synth.label_fn())?,
            font_size: spec.font_size,
        });
    }
    Ok(SyntheticPage { image: page, lines })
}

/// Parameters for randomly laid-out pages.
#[derive(Clone, Debug)]
pub struct PageLayout {
    pub width: usize,
    pub height: usize,
    pub background: u8,
    pub line_count: (usize, usize),
    pub font_size: (u32, u32),
    /// Font sizes used for the occasional small line.
    pub small_font_size: (u32, u32),
    pub small_line_probability: f64,
    pub margin: usize,
    /// Vertical gap between consecutive lines, in pixels.
    pub gap: (usize, usize),
    /// Line width as a fraction of the printable width.
    pub width_fraction: (f64, f64),
}

impl Default for PageLayout {
    fn default() -> Self {
        PageLayout {
            width: 1200,
            height: 1800,
            background: 255,
            line_count: (3, 8),
            font_size: (26, 44),
            small_font_size: (13, 15),
            small_line_probability: 0.0,
            margin: 60,
            gap: (40, 120),
            width_fraction: (0.4, 0.9),
        }
    }
}

/// Picks text of roughly `target_w` pixels from the corpus.
pub fn text_for_width(
    synth: &LineSynthesizer,
    script: Script,
    font: usize,
    px: u32,
    target_w: usize,
    rng: &mut impl Rng,
) -> Result<String> {
    let face = &synth.faces()[font];
    let advance = |s: &str| -> f32 {
        s.chars()
            .filter_map(|c| face.glyph(c, px as f32))
            .map(|g| g.advance)
            .sum()
    };
    let space = advance(" ");
    let mut text = String::new();
    let mut width = 0.0;
    for _ in 0..10_000 {
        let entry = synth.sample_text(script, rng);
        for part in entry.split(' ').filter(|p| !p.is_empty()) {
            if !part.chars().all(|c| face.supports(c)) {
                continue;
            }
            let sep = if text.is_empty() || script == Script::Chinese { 0.0 } else { space };
            let w = advance(part) + sep;
            if !text.is_empty() && width + w > target_w as f32 {
                return Ok(text);
            }
            if sep > 0.0 {
                text.push(' ');
            }
            text.push_str(part);
            width += w;
        }
    }
    if text.is_empty() {
        return Err(Error::Render(format!("{} renders none of the corpus", face.name())));
    }
    Ok(text)
}

/// A random page where every line is blurred with the same `sigma`.
pub fn random_page(
    synth: &LineSynthesizer,
    layout: &PageLayout,
    sigma: f64,
    seed: u64,
) -> Result<SyntheticPage> {
    let mut rng = stream_rng(seed, 0x9A6E);
    let (lo, hi) = layout.line_count;
    if lo == 0 || lo > hi {
        return Err(Error::param("line count range must be positive and ordered"));
    }
    let n = rng.random_range(lo..=hi);
    let printable = layout.width.saturating_sub(2 * layout.margin).max(1);
    let mut specs = Vec::with_capacity(n);
    let mut y = layout.margin;
    let mut small_placed = false;
    for i in 0..n {
        let small = layout.small_line_probability > 0.0
            && (rng.random_bool(layout.small_line_probability) || (i + 1 == n && !small_placed));
        small_placed |= small;
        let (a, b) = if small { layout.small_font_size } else { layout.font_size };
        let font_size = rng.random_range(a..=b);
        if y + font_size as usize + layout.margin > layout.height {
            break;
        }
        let script = synth.pick_script(&mut rng);
        let font = rng.random_range(0..synth.faces().len());
        let frac = rng.random_range(layout.width_fraction.0..=layout.width_fraction.1);
        let target = (printable as f64 * frac) as usize;
        let text = text_for_width(synth, script, font, font_size, target, &mut rng)?;
        let x = layout.margin + rng.random_range(0..=(printable - target.min(printable)) / 2);
        let ink = rng.random_range(synth.config().ink_range.0..=synth.config().ink_range.1);
        let spec = PageLineSpec {
            x,
            y,
            font,
            font_size,
            text,
            ink,
            sigma,
        };
        // Advance by the rendered height so the gap is measured between inks.
        let h = synth
            .rasterize(font, &spec.text, font_size as f32)?
            .map(|l| l.height)
            .unwrap_or(font_size as usize);
        y += h + rng.random_range(layout.gap.0..=layout.gap.1);
        specs.push(spec);
    }
    compose_page(synth, layout.width, layout.height, layout.background, &specs)
}
