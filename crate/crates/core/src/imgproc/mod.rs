//! Grayscale image primitives shared by every stage of the pipeline.
//!
//! All filters compute in `f64` and quantize once, at the output boundary.

mod blur;
mod pgm;

pub use blur::{blur_real, gaussian_blur, gaussian_kernel, BlurSpec, DEFAULT_KERNEL_SIZE};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};

use crate::error::{Error, Result};

/// Height and width of the predictor input, which is also the synthetic line size.
pub const MODEL_INPUT_HEIGHT: usize = 40;
pub const MODEL_INPUT_WIDTH: usize = 400;

/// Row-major 8-bit grayscale image.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    /// A `width`×`height` image filled with `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn new(width: usize, height: usize, value: u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::param(format!(
                "pixel buffer has {} values, expected {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut img = GrayImage::new(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.pixels[y * width + x] = f(x, y);
            }
        }
        img
    }

    /// Quantizes a real-valued buffer: round to nearest, clamp to [0, 255].
    pub fn from_real(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let pixels = values.iter().map(|&v| quantize(v)).collect();
        GrayImage::from_vec(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / self.pixels.len() as f64
    }

    /// Median intensity (lower median for even pixel counts).
    pub fn median(&self) -> u8 {
        let mut hist = [0usize; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        let target = (self.pixels.len() - 1) / 2;
        let mut seen = 0;
        for (v, &count) in hist.iter().enumerate() {
            seen += count;
            if seen > target {
                return v as u8;
            }
        }
        255
    }

    pub fn min_max(&self) -> (u8, u8) {
        self.pixels
            .iter()
            .fold((255, 0), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// Copies the `w`×`h` region whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<GrayImage> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::param(format!(
                "crop ({x}, {y}, {w}, {h}) does not fit a {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            pixels.extend_from_slice(&self.pixels[start..start + w]);
        }
        GrayImage::from_vec(w, h, pixels)
    }

    /// Draws `src` with its top-left corner at `(x, y)`, clipping at the borders.
    pub fn paste(&mut self, src: &GrayImage, x: i64, y: i64) {
        for sy in 0..src.height {
            let ty = y + sy as i64;
            if ty < 0 || ty >= self.height as i64 {
                continue;
            }
            for sx in 0..src.width {
                let tx = x + sx as i64;
                if tx < 0 || tx >= self.width as i64 {
                    continue;
                }
                self.pixels[ty as usize * self.width + tx as usize] = src.get(sx, sy);
            }
        }
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Rotates about the image center with bilinear interpolation.
///
/// Positive angles turn the content counter-clockwise as displayed (y axis
/// pointing down). Samples falling outside the source take the value `fill`.
pub fn rotate(img: &GrayImage, angle_deg: f64, fill: u8) -> Result<GrayImage> {
    if !angle_deg.is_finite() || angle_deg.abs() > 45.0 {
        return Err(Error::param(format!(
            "rotation angle must lie in [-45, 45] degrees, got {angle_deg}"
        )));
    }
    if angle_deg == 0.0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width, img.height);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let cx = w as f64 / 2.0;
    let cy = h as f64 / 2.0;
    let fill_f = f64::from(fill);
    let sample = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
            fill_f
        } else {
            f64::from(img.get(xi as usize, yi as usize))
        }
    };

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let dy = y as f64 + 0.5 - cy;
        for x in 0..w {
            let dx = x as f64 + 0.5 - cx;
            // Inverse mapping: output pixel center back into the source.
            let sx = cos * dx - sin * dy + cx - 0.5;
            let sy = sin * dx + cos * dy + cy - 0.5;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let top = sample(x0, y0) * (1.0 - fx) + sample(x0 + 1, y0) * fx;
            let bottom = sample(x0, y0 + 1) * (1.0 - fx) + sample(x0 + 1, y0 + 1) * fx;
            out[y * w + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    GrayImage::from_real(w, h, &out)
}

/// Segment counts for the divide-and-conquer preprocessing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 4, ny: 6 }
    }
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Self {
        GridSpec { nx, ny }
    }

    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::param("grid segment counts must be at least 1"));
        }
        if self.nx > width || self.ny > height {
            return Err(Error::param(format!(
                "a {}x{} grid does not fit a {width}x{height} image",
                self.nx, self.ny
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// Parses `"4x6"`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::param(format!("grid must look like 4x6, got {s:?}")))?;
        let nx = a
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad grid column count in {s:?}")))?;
        let ny = b
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad grid row count in {s:?}")))?;
        if nx == 0 || ny == 0 {
            return Err(Error::param("grid segment counts must be at least 1"));
        }
        Ok(GridSpec { nx, ny })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.nx, self.ny)
    }
}

/// One tile of a divided image, with its top-left corner in source coordinates.
#[derive(Clone, Debug)]
pub struct Segment {
    pub image: GrayImage,
    pub offset: (usize, usize),
}

/// Splits `img` into `nx`×`ny` tiles with floor-based boundaries.
///
/// Tile `(i, j)` spans columns `floor(i·W/nx)..floor((i+1)·W/nx)` and the
/// analogous rows. Tiles are returned row by row, top to bottom.
pub fn divide(img: &GrayImage, grid: GridSpec) -> Result<Vec<Segment>> {
    grid.validate_for(img.width, img.height)?;
    let xb: Vec<usize> = (0..=grid.nx).map(|i| i * img.width / grid.nx).collect();
    let yb: Vec<usize> = (0..=grid.ny).map(|j| j * img.height / grid.ny).collect();
    let mut out = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let image = img.crop(xb[i], yb[j], xb[i + 1] - xb[i], yb[j + 1] - yb[j])?;
            out.push(Segment {
                image,
                offset: (xb[i], yb[j]),
            });
        }
    }
    Ok(out)
}

/// Bilinear resampling with half-pixel alignment and replicated borders.
///
/// Output pixel `i` samples the source at `(i + 0.5)·W/new_w - 0.5`.
pub fn resize_bilinear(img: &GrayImage, new_w: usize, new_h: usize) -> Result<GrayImage> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::param("resize target must be at least 1x1"));
    }
    if new_w == img.width && new_h == img.height {
        return Ok(img.clone());
    }
    let taps = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xt = taps(new_w, img.width);
    let yt = taps(new_h, img.height);
    let mut out = vec![0.0; new_w * new_h];
    for (y, &(y0, y1, fy)) in yt.iter().enumerate() {
        for (x, &(x0, x1, fx)) in xt.iter().enumerate() {
            let top = f64::from(img.get(x0, y0)) * (1.0 - fx) + f64::from(img.get(x1, y0)) * fx;
            let bot = f64::from(img.get(x0, y1)) * (1.0 - fx) + f64::from(img.get(x1, y1)) * fx;
            out[y * new_w + x] = top * (1.0 - fy) + bot * fy;
        }
    }
    GrayImage::from_real(new_w, new_h, &out)
}

/// Real-valued `channels × height × width` tensor fed to the predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl ModelInput {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::param(format!(
                "input buffer has {} values, expected {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(ModelInput {
            channels,
            height,
            width,
            data,
        })
    }

    /// Single-channel input with intensities divided by 255.
    pub fn from_image(img: &GrayImage) -> Self {
        ModelInput {
            channels: 1,
            height: img.height,
            width: img.width,
            data: img.pixels.iter().map(|&p| f32::from(p) / 255.0).collect(),
        }
    }
}

/// Brings a text-line crop to the fixed 400×40 predictor geometry.
///
/// The crop is scaled (aspect preserved) to height 40, then right-padded with
/// its median intensity or center-cropped to width 400.
pub fn normalize_for_model(crop: &GrayImage) -> ModelInput {
    ModelInput::from_image(&normalize_geometry(crop))
}

/// The 8-bit image behind [`normalize_for_model`].
pub fn normalize_geometry(crop: &GrayImage) -> GrayImage {
    let (th, tw) = (MODEL_INPUT_HEIGHT, MODEL_INPUT_WIDTH);
    let scaled_w = ((crop.width as f64 * th as f64 / crop.height as f64).round() as usize).max(1);
    let scaled = resize_bilinear(crop, scaled_w, th).expect("target size is positive");
    if scaled_w == tw {
        return scaled;
    }
    let mut canvas = GrayImage::new(tw, th, crop.median());
    if scaled_w < tw {
        canvas.paste(&scaled, 0, 0);
    } else {
        let start = (scaled_w - tw) / 2;
        canvas.paste(&scaled, -(start as i64), 0);
    }
    canvas
}

/// Variance of the 4-neighbour Laplacian over interior pixels.
pub fn laplacian_variance(img: &GrayImage) -> f64 {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut n = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = f64::from(img.get(x, y));
            let lap = f64::from(img.get(x - 1, y))
                + f64::from(img.get(x + 1, y))
                + f64::from(img.get(x, y - 1))
                + f64::from(img.get(x, y + 1))
                - 4.0 * c;
            sum += lap;
            sum_sq += lap * lap;
            n += 1.0;
        }
    }
    let mean = sum / n;
    sum_sq / n - mean * mean
}

/// Mean squared forward difference along both axes.
pub fn gradient_energy(img: &GrayImage) -> f64 {
    gradient_energy_real(&img.to_real(), img.width, img.height)
}

pub fn gradient_energy_real(values: &[f64], width: usize, height: usize) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            if x + 1 < width {
                let d = row[x + 1] - row[x];
                sum += d * d;
                n += 1;
            }
            if y + 1 < height {
                let d = values[(y + 1) * width + x] - row[x];
                sum += d * d;
                n += 1;
            }
        }
    }
    if n == 0 { 0.0 } else { sum / n as f64 }
}
