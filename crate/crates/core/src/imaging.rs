//! Pixel-level primitives used by the Action Pattern Image pipeline.
//!
//! All images store intensities as `f32` in row-major order. Every function
//! here is pure: it reads its inputs and allocates a fresh output.

use crate::error::{Error, Result};

/// Luma weights applied to (R, G, B).
pub const LUMA_WEIGHTS: [f32; 3] = [0.2989, 0.5870, 0.1141];

/// Smoothing scale used by the Canny detector.
pub const CANNY_SIGMA: f32 = std::f32::consts::SQRT_2;

/// Number of histogram bins used to pick the automatic hysteresis thresholds.
pub const CANNY_HIST_BINS: usize = 64;
/// Fraction of NMS survivors that fall below the high threshold.
pub const CANNY_NON_EDGE_FRACTION: f64 = 0.7;
/// Low threshold as a fraction of the high threshold.
pub const CANNY_LOW_RATIO: f32 = 0.4;

/// Relative slack under which two magnitudes count as tied during suppression.
pub const NMS_TIE_TOLERANCE: f32 = 1e-5;

/// Smallest width/height accepted by the edge detector.
pub const CANNY_MIN_SIZE: usize = 8;

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width * height != len {
        return Err(Error::shape(format!(
            "{width}x{height} image needs {} pixels, got {len}",
            width * height
        )));
    }
    Ok(())
}

fn check_unit(v: f32) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("intensity {v} outside [0,1]")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        for p in &pixels {
            p.iter().try_for_each(|&v| check_unit(v))?;
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    /// Multiplies every channel by `factor`, clamping into [0,1].
    pub fn scaled(&self, factor: f32) -> RgbImage {
        let pixels = self
            .pixels
            .iter()
            .map(|p| p.map(|v| (v * factor).clamp(0.0, 1.0)))
            .collect();
        RgbImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Per-channel bilinear resize, see [`resize_bilinear`].
    pub fn resized(&self, out_w: usize, out_h: usize) -> Result<RgbImage> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::invalid("resize target must be non-zero"));
        }
        if out_w == self.width && out_h == self.height {
            return Ok(self.clone());
        }
        let xs = sample_positions(self.width, out_w);
        let ys = sample_positions(self.height, out_h);
        let mut pixels = Vec::with_capacity(out_w * out_h);
        for &(y0, y1, ty) in &ys {
            for &(x0, x1, tx) in &xs {
                let p00 = self.pixels[y0 * self.width + x0];
                let p01 = self.pixels[y0 * self.width + x1];
                let p10 = self.pixels[y1 * self.width + x0];
                let p11 = self.pixels[y1 * self.width + x1];
                let mut out = [0.0f32; 3];
                for c in 0..3 {
                    out[c] = lerp2(p00[c], p01[c], p10[c], p11[c], tx, ty);
                }
                pixels.push(out);
            }
        }
        Ok(RgbImage {
            width: out_w,
            height: out_h,
            pixels,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        pixels.iter().try_for_each(|&v| check_unit(v))?;
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Internal constructor for values already known to be in range.
    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f32>) -> Self {
        debug_assert_eq!(width * height, pixels.len());
        debug_assert!(pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        if let Some(bad) = pixels.iter().find(|&&v| v > 1) {
            return Err(Error::invalid(format!("binary pixel value {bad}")));
        }
        Ok(BinaryImage {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        BinaryImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut img = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                img.pixels[y * width + x] = f(x, y) as u8;
            }
        }
        img
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

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.pixels[y * self.width + x] = on as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|&&v| v != 0).count()
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .pixels
                .iter()
                .zip(&other.pixels)
                .all(|(&a, &b)| a <= b)
    }

    /// Pixel-wise OR. Panics on mismatched dimensions.
    pub fn union(&self, other: &BinaryImage) -> BinaryImage {
        assert_eq!((self.width, self.height), (other.width, other.height));
        BinaryImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .zip(&other.pixels)
                .map(|(&a, &b)| a | b)
                .collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_raw(
            self.width,
            self.height,
            self.pixels.iter().map(|&v| v as f32).collect(),
        )
    }
}

pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let pixels = img
        .pixels
        .iter()
        .map(|&[r, g, b]| (wr * r + wg * g + wb * b).clamp(0.0, 1.0))
        .collect();
    GrayImage::from_raw(img.width, img.height, pixels)
}

// For each output coordinate: (lower source index, upper source index, weight of upper).
fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f32)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, (src - lo as f64) as f32)
        })
        .collect()
}

fn lerp2(p00: f32, p01: f32, p10: f32, p11: f32, tx: f32, ty: f32) -> f32 {
    let top = p00 + (p01 - p00) * tx;
    let bottom = p10 + (p11 - p10) * tx;
    (top + (bottom - top) * ty).clamp(0.0, 1.0)
}

/// Bilinear resize with half-pixel-centered sampling and clamped edges.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "resize target must be non-zero, got {out_w}x{out_h}"
        )));
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width, out_w);
    let ys = sample_positions(img.height, out_h);
    let w = img.width;
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            pixels.push(lerp2(
                img.pixels[y0 * w + x0],
                img.pixels[y0 * w + x1],
                img.pixels[y1 * w + x0],
                img.pixels[y1 * w + x1],
                tx,
                ty,
            ));
        }
    }
    Ok(GrayImage::from_raw(out_w, out_h, pixels))
}

/// Normalized 1-D Gaussian taps, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Result<Vec<f32>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma as f64).ceil() as i64;
    let denom = 2.0 * (sigma as f64) * (sigma as f64);
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| (t / sum) as f32).collect())
}

/// Separable Gaussian smoothing with replicated borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f32) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    Ok(GrayImage::from_raw(
        img.width,
        img.height,
        blur_plane(&img.pixels, img.width, img.height, &kernel)
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect(),
    ))
}

fn blur_plane(src: &[f32], w: usize, h: usize, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &tap) in kernel.iter().enumerate() {
                acc += tap * row[clamp(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &tap) in kernel.iter().enumerate() {
                acc += tap * tmp[clamp(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Gradient field of an image: central differences with replicated borders.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
    pub magnitude: Vec<f32>,
}

pub fn central_gradients(pixels: &[f32], width: usize, height: usize) -> Gradients {
    let n = width * height;
    let mut gx = vec![0.0f32; n];
    let mut gy = vec![0.0f32; n];
    for y in 0..height {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(height - 1);
        for x in 0..width {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(width - 1);
            let i = y * width + x;
            gx[i] = 0.5 * (pixels[y * width + right] - pixels[y * width + left]);
            gy[i] = 0.5 * (pixels[down * width + x] - pixels[up * width + x]);
        }
    }
    let magnitude = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    Gradients {
        width,
        height,
        gx,
        gy,
        magnitude,
    }
}

/// Keeps pixels whose magnitude is a local maximum along the quantized
/// gradient direction. Ties with either neighbor survive, so a symmetric
/// step yields a two-pixel ridge. Zero-magnitude pixels never survive.
pub fn non_maximum_suppression(grad: &Gradients) -> Vec<bool> {
    let (w, h) = (grad.width, grad.height);
    let mag = &grad.magnitude;
    let at = |x: isize, y: isize| -> f32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut keep = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            // Orientation in [0, 180), image y axis pointing down.
            let mut angle = grad.gy[i].atan2(grad.gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let floor = m * (1.0 + NMS_TIE_TOLERANCE);
            if floor >= at(xi + dx, yi + dy) && floor >= at(xi - dx, yi - dy) {
                keep[i] = true;
            }
        }
    }
    keep
}

/// Automatic (low, high) thresholds on magnitudes normalized to [0,1].
///
/// Returns `None` when nothing survived suppression.
pub fn hysteresis_thresholds(normalized: &[f32], survivors: &[bool]) -> Option<(f32, f32)> {
    let mut hist = [0usize; CANNY_HIST_BINS];
    let mut total = 0usize;
    for (&m, &keep) in normalized.iter().zip(survivors) {
        if keep {
            let bin = ((m * CANNY_HIST_BINS as f32) as usize).min(CANNY_HIST_BINS - 1);
            hist[bin] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    let target = CANNY_NON_EDGE_FRACTION * total as f64;
    let mut cumulative = 0usize;
    let mut high_bin = CANNY_HIST_BINS - 1;
    for (b, &count) in hist.iter().enumerate() {
        cumulative += count;
        if cumulative as f64 >= target {
            high_bin = b;
            break;
        }
    }
    let high = (high_bin + 1) as f32 / CANNY_HIST_BINS as f32;
    Some((CANNY_LOW_RATIO * high, high))
}

/// Options for [`canny`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyOptions {
    pub sigma: f32,
    /// Keep only pixels whose gradient lies within 45 degrees of horizontal.
    pub vertical_only: bool,
}

impl Default for CannyOptions {
    fn default() -> Self {
        CannyOptions {
            sigma: CANNY_SIGMA,
            vertical_only: true,
        }
    }
}

/// Full Canny detector with automatic thresholds and 8-connected hysteresis.
pub fn canny(img: &GrayImage, opts: &CannyOptions) -> Result<BinaryImage> {
    let (w, h) = (img.width, img.height);
    if w < CANNY_MIN_SIZE || h < CANNY_MIN_SIZE {
        return Err(Error::invalid(format!(
            "edge detection needs at least {CANNY_MIN_SIZE}x{CANNY_MIN_SIZE}, got {w}x{h}"
        )));
    }
    let blurred = gaussian_blur(img, opts.sigma)?;
    let grad = central_gradients(&blurred.pixels, w, h);
    let survivors = non_maximum_suppression(&grad);

    let max = grad.magnitude.iter().cloned().fold(0.0f32, f32::max);
    let mut edges = BinaryImage::zeros(w, h);
    if max <= 0.0 {
        return Ok(edges);
    }
    let normalized: Vec<f32> = grad.magnitude.iter().map(|&m| m / max).collect();
    let Some((low, high)) = hysteresis_thresholds(&normalized, &survivors) else {
        return Ok(edges);
    };

    let weak = |i: usize| survivors[i] && normalized[i] >= low;
    let mut stack: Vec<usize> = (0..w * h)
        .filter(|&i| survivors[i] && normalized[i] >= high)
        .collect();
    for &i in &stack {
        edges.pixels[i] = 1;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if edges.pixels[j] == 0 && weak(j) {
                    edges.pixels[j] = 1;
                    stack.push(j);
                }
            }
        }
    }

    if opts.vertical_only {
        for i in 0..w * h {
            if edges.pixels[i] != 0 && grad.gx[i].abs() < grad.gy[i].abs() {
                edges.pixels[i] = 0;
            }
        }
    }
    Ok(edges)
}

/// Canny followed by the vertical-edge direction filter.
pub fn canny_vertical(img: &GrayImage) -> Result<BinaryImage> {
    canny(img, &CannyOptions::default())
}
