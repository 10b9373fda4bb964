//! Text-line synthesis: text sampling, rasterization, rotation and blur.

use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::TextCorpus;
use super::font::{FontSpec, Typeface};
use super::label::{quality_label, LabelFnConfig, SIGMA_MAX, SIGMA_MIN};
use crate::error::{Error, Result};
use crate::imgproc::{gaussian_blur, rotate, BlurSpec, GrayImage, DEFAULT_KERNEL_SIZE};

const TEXT_RETRIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Script {
    Chinese,
    English,
}

/// Attribute ranges for line synthesis. Ranges are inclusive `(low, high)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub fonts: Vec<FontSpec>,
    pub backgrounds: Vec<u8>,
    pub image_size: (usize, usize),
    pub sigma_range: (f64, f64),
    pub kernel_size: usize,
    pub font_size_cn: (u32, u32),
    pub font_size_en: (u32, u32),
    pub angle_cn: (f64, f64),
    pub angle_en: (f64, f64),
    pub chars_per_line_cn: usize,
    pub words_per_line_en: usize,
    pub underfill_probability: f64,
    pub chinese_probability: f64,
    pub ink_range: (u8, u8),
    pub chinese_corpus: Option<PathBuf>,
    pub english_corpus: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            fonts: FontSpec::builtin_set(),
            backgrounds: vec![205, 213, 221, 229, 237, 246, 255],
            image_size: (400, 40),
            sigma_range: (SIGMA_MIN, SIGMA_MAX),
            kernel_size: DEFAULT_KERNEL_SIZE,
            font_size_cn: (28, 35),
            font_size_en: (35, 45),
            angle_cn: (-2.0, 2.0),
            angle_en: (-1.0, 1.0),
            chars_per_line_cn: 10,
            words_per_line_en: 5,
            underfill_probability: 0.15,
            chinese_probability: 0.5,
            ink_range: (0, 60),
            chinese_corpus: None,
            english_corpus: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::param(m.to_string()));
        if self.fonts.is_empty() {
            return bad("at least one font is required");
        }
        if self.backgrounds.is_empty() {
            return bad("at least one background intensity is required");
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("image size must be positive");
        }
        let (lo, hi) = self.sigma_range;
        if !(SIGMA_MIN..=SIGMA_MAX).contains(&lo) || !(SIGMA_MIN..=SIGMA_MAX).contains(&hi) || lo > hi
        {
            return bad("sigma range must be an ordered sub-range of [0.5, 4.5]");
        }
        BlurSpec::with_kernel_size(1.0, self.kernel_size).validate()?;
        for (lo, hi) in [self.font_size_cn, self.font_size_en] {
            if lo == 0 || lo > hi {
                return bad("font size ranges must be positive and ordered");
            }
        }
        for (lo, hi) in [self.angle_cn, self.angle_en] {
            if !(lo <= hi && lo >= -45.0 && hi <= 45.0) {
                return bad("angle ranges must be ordered and within [-45, 45]");
            }
        }
        if self.chars_per_line_cn == 0 || self.words_per_line_en == 0 {
            return bad("text length targets must be positive");
        }
        for p in [self.underfill_probability, self.chinese_probability] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.ink_range.0 > self.ink_range.1 {
            return bad("ink range must be ordered");
        }
        Ok(())
    }
}

/// One synthetic, labelled text line.
#[derive(Clone, Debug)]
pub struct TextLineSample {
    pub image: GrayImage,
    pub sigma: f64,
    pub label: f64,
    pub text: String,
    pub font: String,
    pub font_size: u32,
    pub background: u8,
    pub ink: u8,
    pub angle: f64,
    pub script: Script,
}

/// Every random choice behind one sample, drawn before any pixel is touched.
#[derive(Clone, Debug, PartialEq)]
pub struct LineRecipe {
    pub script: Script,
    pub text: String,
    pub font: usize,
    pub font_size: u32,
    pub background: u8,
    pub ink: u8,
    pub angle: f64,
    pub sigma: f64,
    /// Horizontal placement as a fraction of the free margin.
    pub shift: f64,
}

/// Tight anti-aliased text coverage.
#[derive(Clone, Debug)]
pub struct InkLayer {
    pub width: usize,
    pub height: usize,
    pub coverage: Vec<f32>,
}

impl InkLayer {
    /// Blends the layer onto `img` at `(x, y)` with the given ink intensity.
    pub fn draw(&self, img: &mut GrayImage, x: i64, y: i64, ink: u8) {
        for ly in 0..self.height {
            let ty = y + ly as i64;
            if ty < 0 || ty >= img.height() as i64 {
                continue;
            }
            for lx in 0..self.width {
                let tx = x + lx as i64;
                let c = self.coverage[ly * self.width + lx];
                if c <= 0.0 || tx < 0 || tx >= img.width() as i64 {
                    continue;
                }
                let bg = f64::from(img.get(tx as usize, ty as usize));
                let v = bg + (f64::from(ink) - bg) * f64::from(c);
                img.set(tx as usize, ty as usize, v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Loaded fonts, corpus and label function, ready to render many lines.
pub struct LineSynthesizer {
    cfg: SynthConfig,
    label_fn: LabelFnConfig,
    faces: Vec<Box<dyn Typeface>>,
    corpus: TextCorpus,
}

impl LineSynthesizer {
    pub fn new(cfg: SynthConfig, label_fn: LabelFnConfig) -> Result<Self> {
        cfg.validate()?;
        label_fn.validate()?;
        let faces = cfg.fonts.iter().map(FontSpec::load).collect::<Result<Vec<_>>>()?;
        let corpus =
            TextCorpus::from_files(cfg.chinese_corpus.as_deref(), cfg.english_corpus.as_deref())?;
        Ok(LineSynthesizer {
            cfg,
            label_fn,
            faces,
            corpus,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn label_fn(&self) -> &LabelFnConfig {
        &self.label_fn
    }

    pub fn faces(&self) -> &[Box<dyn Typeface>] {
        &self.faces
    }

    pub fn pick_script(&self, rng: &mut impl Rng) -> Script {
        if rng.random_bool(self.cfg.chinese_probability) {
            Script::Chinese
        } else {
            Script::English
        }
    }

    /// Samples line text, shortened with the configured underfill probability.
    pub fn sample_text(&self, script: Script, rng: &mut impl Rng) -> String {
        let underfill = rng.random_bool(self.cfg.underfill_probability);
        match script {
            Script::Chinese => {
                let full = self.cfg.chars_per_line_cn;
                let n = if underfill {
                    rng.random_range(1..=(full / 2).max(1))
                } else {
                    rng.random_range(full.saturating_sub(2).max(1)..=full + 2)
                };
                (0..n)
                    .map(|_| self.corpus.chinese.choose(rng).map(String::as_str).unwrap_or(""))
                    .collect()
            }
            Script::English => {
                let full = self.cfg.words_per_line_en;
                let n = if underfill {
                    rng.random_range(1..=(full / 2).max(1))
                } else {
                    rng.random_range(full.saturating_sub(1).max(1)..=full + 1)
                };
                (0..n)
                    .map(|_| self.corpus.english.choose(rng).map(String::as_str).unwrap_or(""))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        }
    }

    /// Samples text the chosen font can render, retrying a bounded number of times.
    fn sample_renderable_text(
        &self,
        script: Script,
        font: usize,
        rng: &mut impl Rng,
    ) -> Result<String> {
        let face = &self.faces[font];
        for _ in 0..TEXT_RETRIES {
            let text = self.sample_text(script, rng);
            if !text.is_empty() && text.chars().all(|c| face.supports(c)) {
                return Ok(text);
            }
        }
        Err(Error::Render(format!(
            "font {} cannot render sampled {script:?} text after {TEXT_RETRIES} attempts",
            face.name()
        )))
    }

    pub fn sample_recipe(&self, rng: &mut impl Rng) -> Result<LineRecipe> {
        let cfg = &self.cfg;
        let script = self.pick_script(rng);
        let font = rng.random_range(0..self.faces.len());
        let text = self.sample_renderable_text(script, font, rng)?;
        let (size_range, angle_range) = match script {
            Script::Chinese => (cfg.font_size_cn, cfg.angle_cn),
            Script::English => (cfg.font_size_en, cfg.angle_en),
        };
        let font_size = rng.random_range(size_range.0..=size_range.1);
        let background = *cfg.backgrounds.choose(rng).expect("validated non-empty");
        let ink = rng.random_range(cfg.ink_range.0..=cfg.ink_range.1);
        let angle = rng.random_range(angle_range.0..=angle_range.1);
        let sigma = rng.random_range(cfg.sigma_range.0..=cfg.sigma_range.1);
        let shift = rng.random::<f64>();
        Ok(LineRecipe {
            script,
            text,
            font,
            font_size,
            background,
            ink,
            angle,
            sigma,
            shift,
        })
    }

    /// Rasterizes `text` and trims the result to its ink.
    ///
    /// Returns `None` when nothing visible was drawn.
    pub fn rasterize(&self, font: usize, text: &str, px: f32) -> Result<Option<InkLayer>> {
        let face = self
            .faces
            .get(font)
            .ok_or_else(|| Error::param(format!("font index {font} out of range")))?;
        let glyphs = text
            .chars()
            .map(|c| {
                face.glyph(c, px)
                    .ok_or_else(|| Error::Render(format!("{} has no glyph for {c:?}", face.name())))
            })
            .collect::<Result<Vec<_>>>()?;
        let pad = px.ceil() as i64;
        let width = (glyphs.iter().map(|g| g.advance).sum::<f32>().ceil() as i64 + 2 * pad) as usize;
        let height = (3 * pad) as usize;
        let baseline = 2 * pad;
        let mut cov = vec![0.0f32; width * height];
        let mut pen = pad as f32;
        for g in &glyphs {
            let gx = pen.round() as i64 + i64::from(g.left);
            let gy = baseline + i64::from(g.top);
            for y in 0..g.height {
                let ty = gy + y as i64;
                if ty < 0 || ty >= height as i64 {
                    continue;
                }
                for x in 0..g.width {
                    let tx = gx + x as i64;
                    if tx < 0 || tx >= width as i64 {
                        continue;
                    }
                    let slot = &mut cov[ty as usize * width + tx as usize];
                    *slot = slot.max(g.coverage[y * g.width + x]);
                }
            }
            pen += g.advance;
        }

        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..height {
            for x in 0..width {
                if cov[y * width + x] > 0.0 {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        if x0 == usize::MAX {
            return Ok(None);
        }
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut coverage = Vec::with_capacity(w * h);
        for y in y0..=y1 {
            coverage.extend_from_slice(&cov[y * width + x0..y * width + x1 + 1]);
        }
        Ok(Some(InkLayer {
            width: w,
            height: h,
            coverage,
        }))
    }

    /// Sharp, rotated line on its solid background, before blur.
    pub fn render_sharp(&self, recipe: &LineRecipe) -> Result<GrayImage> {
        let (w, h) = self.cfg.image_size;
        let mut canvas = GrayImage::new(w, h, recipe.background);
        if let Some(layer) = self.rasterize(recipe.font, &recipe.text, recipe.font_size as f32)? {
            let room = w.saturating_sub(layer.width).min(12) as f64;
            let x = 2.0_f64.min(room) + (recipe.shift * (room - 2.0).max(0.0)).floor();
            let y = (h as i64 - layer.height as i64) / 2;
            layer.draw(&mut canvas, x as i64, y, recipe.ink);
        }
        rotate(&canvas, recipe.angle, recipe.background)
    }

    pub fn realize(&self, recipe: &LineRecipe) -> Result<TextLineSample> {
        let sharp = self.render_sharp(recipe)?;
        let image = gaussian_blur(
            &sharp,
            &BlurSpec::with_kernel_size(recipe.sigma, self.cfg.kernel_size),
        )?;
        Ok(TextLineSample {
            image,
            sigma: recipe.sigma,
            label: quality_label(recipe.sigma, &self.label_fn)?,
            text: recipe.text.clone(),
            font: self.faces[recipe.font].name().to_string(),
            font_size: recipe.font_size,
            background: recipe.background,
            ink: recipe.ink,
            angle: recipe.angle,
            script: recipe.script,
        })
    }

    pub fn recipe_for_seed(&self, seed: u64) -> Result<LineRecipe> {
        self.sample_recipe(&mut stream_rng(seed, 0))
    }

    /// Renders the sample fully determined by `seed`.
    pub fn render(&self, seed: u64) -> Result<TextLineSample> {
        self.realize(&self.recipe_for_seed(seed)?)
    }

    /// Same text and attributes as `render(seed)`, blurred with `sigma` instead.
    pub fn render_with_sigma(&self, seed: u64, sigma: f64) -> Result<TextLineSample> {
        let mut recipe = self.recipe_for_seed(seed)?;
        recipe.sigma = sigma;
        self.realize(&recipe)
    }
}

/// One-shot convenience over [`LineSynthesizer::render`].
pub fn render_text_line(
    cfg: &SynthConfig,
    label_fn: &LabelFnConfig,
    seed: u64,
) -> Result<TextLineSample> {
    LineSynthesizer::new(cfg.clone(), *label_fn)?.render(seed)
}
