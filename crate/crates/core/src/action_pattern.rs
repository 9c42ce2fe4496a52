//! Conversion of a frame sequence into an Action Pattern Image.
//!
//! Every frame is resized to 256x256, a temporal-median background is
//! estimated from a strided sample of the frames, and every other frame
//! (1st, 3rd, 5th, ...) is background-subtracted, normalized, gated at 0.3,
//! and run through the vertical-edge Canny detector. The edge maps are
//! summed into an [`EdgeAccumulator`] and binarized.

use crate::error::{Error, Result};
use crate::imaging::{canny, rgb_to_gray, BinaryImage, CannyOptions, GrayImage, RgbImage};

/// Side length of an Action Pattern Image.
pub const API_SIZE: usize = 256;

/// Normalized differences at or below this are treated as background.
pub const ENHANCE_THRESHOLD: f32 = 0.3;

/// Default stride between frames sampled for the background model.
pub const DEFAULT_BACKGROUND_STRIDE: usize = 5;

const MIN_BACKGROUND_SAMPLES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<RgbImage>,
}

impl FrameSequence {
    pub fn new(frames: Vec<RgbImage>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InsufficientFrames {
                needed: 2,
                got: frames.len(),
            });
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| (f.width(), f.height()) != (w, h))
        {
            return Err(Error::shape(format!(
                "frame {i} is {}x{}, expected {w}x{h}",
                f.width(),
                f.height()
            )));
        }
        Ok(FrameSequence { frames })
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    /// Every frame scaled by `factor` (global illumination change).
    pub fn scaled(&self, factor: f32) -> FrameSequence {
        FrameSequence {
            frames: self.frames.iter().map(|f| f.scaled(factor)).collect(),
        }
    }

    pub fn resized(&self, w: usize, h: usize) -> Result<FrameSequence> {
        Ok(FrameSequence {
            frames: self
                .frames
                .iter()
                .map(|f| f.resized(w, h))
                .collect::<Result<_>>()?,
        })
    }
}

/// Per-pixel temporal median of the grayscale frames `0, s, 2s, ...`.
///
/// The stride is reduced when needed so that at least three frames are
/// sampled. With an even number of samples the two middle values are
/// averaged.
pub fn background_model(seq: &FrameSequence, sample_stride: usize) -> Result<GrayImage> {
    let n = seq.len();
    if n < MIN_BACKGROUND_SAMPLES {
        return Err(Error::InsufficientFrames {
            needed: MIN_BACKGROUND_SAMPLES,
            got: n,
        });
    }
    let stride = sample_stride.max(1).min((n - 1) / (MIN_BACKGROUND_SAMPLES - 1));
    let samples: Vec<GrayImage> = seq
        .frames
        .iter()
        .step_by(stride)
        .map(rgb_to_gray)
        .collect();
    debug_assert!(samples.len() >= MIN_BACKGROUND_SAMPLES);

    let (w, h) = (seq.width(), seq.height());
    let mut column = vec![0.0f32; samples.len()];
    let mut out = Vec::with_capacity(w * h);
    for i in 0..w * h {
        for (slot, s) in column.iter_mut().zip(&samples) {
            *slot = s.pixels()[i];
        }
        column.sort_by(f32::total_cmp);
        let m = column.len();
        let median = if m % 2 == 1 {
            column[m / 2]
        } else {
            0.5 * (column[m / 2 - 1] + column[m / 2])
        };
        out.push(median);
    }
    GrayImage::new(w, h, out)
}

/// How the absolute difference image is scaled before the 0.3 gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide by the frame-wide maximum difference.
    #[default]
    FrameMax,
    /// Keep the raw difference (intensities are already in [0,1]).
    Fixed,
}

/// How accumulated edge counts become the final binary pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Outline {
    /// Every pixel hit at least once.
    #[default]
    Binarize,
    /// Boundary of the binarized region (4-neighborhood perimeter).
    Perimeter,
}

/// Maps the enhanced pixel value: zero at or below the gate, linear above.
pub fn enhance(normalized: f32) -> f32 {
    if normalized > ENHANCE_THRESHOLD {
        ((normalized - ENHANCE_THRESHOLD) / (1.0 - ENHANCE_THRESHOLD)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn subtract_and_enhance(frame: &RgbImage, background: &GrayImage) -> Result<GrayImage> {
    subtract_and_enhance_with(frame, background, Normalization::FrameMax)
}

pub fn subtract_and_enhance_with(
    frame: &RgbImage,
    background: &GrayImage,
    normalization: Normalization,
) -> Result<GrayImage> {
    if (frame.width(), frame.height()) != (background.width(), background.height()) {
        return Err(Error::invalid(format!(
            "frame is {}x{} but background is {}x{}",
            frame.width(),
            frame.height(),
            background.width(),
            background.height()
        )));
    }
    let gray = rgb_to_gray(frame);
    let diff: Vec<f32> = gray
        .pixels()
        .iter()
        .zip(background.pixels())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let scale = match normalization {
        Normalization::Fixed => 1.0,
        Normalization::FrameMax => diff.iter().cloned().fold(0.0f32, f32::max),
    };
    let out = if scale <= 0.0 {
        vec![0.0; diff.len()]
    } else {
        diff.iter().map(|&d| enhance(d / scale)).collect()
    };
    Ok(GrayImage::from_raw(frame.width(), frame.height(), out))
}

/// Per-pixel count of edge hits across processed frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeAccumulator {
    width: usize,
    height: usize,
    counts: Vec<u32>,
    frames: u32,
}

impl EdgeAccumulator {
    pub fn new(width: usize, height: usize) -> Self {
        EdgeAccumulator {
            width,
            height,
            counts: vec![0; width * height],
            frames: 0,
        }
    }

    pub fn add(&mut self, edges: &BinaryImage) -> Result<()> {
        if (edges.width(), edges.height()) != (self.width, self.height) {
            return Err(Error::shape(format!(
                "edge map {}x{} does not match accumulator {}x{}",
                edges.width(),
                edges.height(),
                self.width,
                self.height
            )));
        }
        for (c, &e) in self.counts.iter_mut().zip(edges.pixels()) {
            *c += e as u32;
        }
        self.frames += 1;
        Ok(())
    }

    /// Sums two accumulators over disjoint frame sets.
    pub fn merge(&mut self, other: &EdgeAccumulator) -> Result<()> {
        if (other.width, other.height) != (self.width, self.height) {
            return Err(Error::shape("accumulator dimensions differ"));
        }
        for (c, &o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.frames += other.frames;
        Ok(())
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn frames(&self) -> u32 {
        self.frames
    }

    pub fn outline(&self, mode: Outline) -> BinaryImage {
        let (w, h) = (self.width, self.height);
        let on = |x: usize, y: usize| self.counts[y * w + x] > 0;
        match mode {
            Outline::Binarize => BinaryImage::from_fn(w, h, on),
            Outline::Perimeter => BinaryImage::from_fn(w, h, |x, y| {
                on(x, y)
                    && (x == 0
                        || y == 0
                        || x + 1 == w
                        || y + 1 == h
                        || !on(x - 1, y)
                        || !on(x + 1, y)
                        || !on(x, y - 1)
                        || !on(x, y + 1))
            }),
        }
    }
}

/// A 256x256 binary pattern summarizing one clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionPatternImage {
    image: BinaryImage,
    pub label: Option<String>,
}

impl ActionPatternImage {
    pub fn new(image: BinaryImage) -> Result<Self> {
        if (image.width(), image.height()) != (API_SIZE, API_SIZE) {
            return Err(Error::shape(format!(
                "action pattern image must be {API_SIZE}x{API_SIZE}, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        Ok(ActionPatternImage { image, label: None })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn image(&self) -> &BinaryImage {
        &self.image
    }

    pub fn into_image(self) -> BinaryImage {
        self.image
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApiOptions {
    pub direction_filter: bool,
    pub normalization: Normalization,
    pub outline: Outline,
    pub background_stride: usize,
}

impl Default for ApiOptions {
    fn default() -> Self {
        ApiOptions {
            direction_filter: true,
            normalization: Normalization::FrameMax,
            outline: Outline::Binarize,
            background_stride: DEFAULT_BACKGROUND_STRIDE,
        }
    }
}

/// Intermediate results of one [`ApiBuilder::build_traced`] run.
#[derive(Debug, Clone)]
pub struct ApiTrace {
    /// Zero-based indices of the frames whose edges were accumulated.
    pub frames_used: Vec<usize>,
    pub background: GrayImage,
    pub accumulator: EdgeAccumulator,
}

#[derive(Debug, Clone, Default)]
pub struct ApiBuilder {
    pub options: ApiOptions,
}

impl ApiBuilder {
    pub fn new(options: ApiOptions) -> Self {
        ApiBuilder { options }
    }

    pub fn build(&self, seq: &FrameSequence) -> Result<ActionPatternImage> {
        self.build_traced(seq).map(|(api, _)| api)
    }

    pub fn build_traced(&self, seq: &FrameSequence) -> Result<(ActionPatternImage, ApiTrace)> {
        if seq.len() < MIN_BACKGROUND_SAMPLES {
            return Err(Error::InsufficientFrames {
                needed: MIN_BACKGROUND_SAMPLES,
                got: seq.len(),
            });
        }
        let seq = seq.resized(API_SIZE, API_SIZE)?;
        let background = background_model(&seq, self.options.background_stride)?;
        let canny_opts = CannyOptions {
            vertical_only: self.options.direction_filter,
            ..CannyOptions::default()
        };

        let mut accumulator = EdgeAccumulator::new(API_SIZE, API_SIZE);
        let mut frames_used = Vec::new();
        for (i, frame) in seq.frames().iter().enumerate().step_by(2) {
            let enhanced =
                subtract_and_enhance_with(frame, &background, self.options.normalization)?;
            let edges = canny(&enhanced, &canny_opts)?;
            accumulator.add(&edges)?;
            frames_used.push(i);
        }
        let api = ActionPatternImage::new(accumulator.outline(self.options.outline))?;
        Ok((
            api,
            ApiTrace {
                frames_used,
                background,
                accumulator,
            },
        ))
    }
}

/// [`ApiBuilder`] with default options.
pub fn build_api(seq: &FrameSequence) -> Result<ActionPatternImage> {
    ApiBuilder::default().build(seq)
}
