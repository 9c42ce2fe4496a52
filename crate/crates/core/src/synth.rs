//! Deterministic synthetic inputs: short videos with known foreground
//! geometry, and a labelled set of binary glyph patterns that stand in for
//! action pattern images.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action_pattern::FrameSequence;
use crate::error::{Error, Result};
use crate::imaging::{BinaryImage, RgbImage};
use crate::train::LabeledImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VideoKind {
    /// A white square sliding left to right at constant speed.
    TranslateSquare,
    /// A white vertical bar swinging sinusoidally about the centre.
    WaveBar,
    /// Background only; every frame is identical.
    Static,
}

impl std::str::FromStr for VideoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translate-square" => Ok(VideoKind::TranslateSquare),
            "wave-bar" => Ok(VideoKind::WaveBar),
            "static" => Ok(VideoKind::Static),
            _ => Err(Error::invalid(format!(
                "unknown video kind {s:?} (translate-square, wave-bar, static)"
            ))),
        }
    }
}

/// Scene background shared by all frames of a clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    Uniform(f32),
    /// `base + amplitude * u` per pixel, `u` uniform in [0,1) from the seed.
    Texture { base: f32, amplitude: f32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub width: usize,
    pub height: usize,
    pub background: Background,
    pub foreground: [f32; 3],
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            width: 256,
            height: 256,
            background: Background::Texture {
                base: 0.0,
                amplitude: 0.1,
            },
            foreground: [1.0; 3],
        }
    }
}

/// Left edge and top edge of the translating square in frame `t`, plus its side.
pub fn square_position(width: usize, height: usize, frames: usize, t: usize) -> (usize, usize, usize) {
    let side = (width.min(height) / 12).max(3);
    let margin = side;
    let travel = width.saturating_sub(2 * margin + side);
    let speed = travel / frames.saturating_sub(1).max(1);
    (margin + t * speed, (height - side) / 2, side)
}

/// Left edge and width of the waving bar in frame `t`; it spans the middle
/// half of the frame vertically.
pub fn bar_position(width: usize, t: usize) -> (usize, usize) {
    let bar = (width / 32).max(2);
    let amplitude = width as f64 / 4.0;
    let centre = width as f64 / 2.0 + amplitude * (t as f64 * std::f64::consts::TAU / 8.0).sin();
    let left = (centre - bar as f64 / 2.0).round().max(0.0) as usize;
    (left.min(width - bar), bar)
}

fn background_plane(opts: &SynthOptions, seed: u64) -> Vec<f32> {
    let n = opts.width * opts.height;
    match opts.background {
        Background::Uniform(v) => vec![v; n],
        Background::Texture { base, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| base + amplitude * rng.gen::<f32>()).collect()
        }
    }
}

pub fn synth_video(kind: VideoKind, frames: usize, seed: u64) -> Result<FrameSequence> {
    synth_video_with(kind, frames, seed, &SynthOptions::default())
}

pub fn synth_video_with(kind: VideoKind, frames: usize, seed: u64, opts: &SynthOptions) -> Result<FrameSequence> {
    let (w, h) = (opts.width, opts.height);
    if w < 32 || h < 32 {
        return Err(Error::invalid(format!("synthetic frames must be at least 32x32, got {w}x{h}")));
    }
    if frames < 2 {
        return Err(Error::InsufficientFrames { needed: 2, got: frames });
    }
    let bg = background_plane(opts, seed);
    let out = (0..frames)
        .map(|t| {
            let inside: Box<dyn Fn(usize, usize) -> bool> = match kind {
                VideoKind::TranslateSquare => {
                    let (x0, y0, side) = square_position(w, h, frames, t);
                    Box::new(move |x, y| (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y))
                }
                VideoKind::WaveBar => {
                    let (x0, bar) = bar_position(w, t);
                    Box::new(move |x, y| (x0..x0 + bar).contains(&x) && (h / 4..3 * h / 4).contains(&y))
                }
                VideoKind::Static => Box::new(|_, _| false),
            };
            RgbImage::from_fn(w, h, |x, y| {
                if inside(x, y) {
                    opts.foreground
                } else {
                    [bg[y * w + x]; 3]
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(out)
}

/// Class names of the glyph patterns, in label order.
pub const GLYPH_NAMES: [&str; 6] = ["pillars", "rails", "slash", "vee", "frame", "cross"];

type Segment = ((f64, f64), (f64, f64));

fn glyph_segments(class: usize) -> &'static [Segment] {
    const PILLARS: [Segment; 2] = [((0.3, 0.2), (0.3, 0.8)), ((0.7, 0.2), (0.7, 0.8))];
    const RAILS: [Segment; 2] = [((0.2, 0.35), (0.8, 0.35)), ((0.2, 0.65), (0.8, 0.65))];
    const SLASH: [Segment; 1] = [((0.2, 0.2), (0.8, 0.8))];
    const VEE: [Segment; 2] = [((0.2, 0.2), (0.5, 0.8)), ((0.5, 0.8), (0.8, 0.2))];
    const FRAME: [Segment; 4] = [
        ((0.3, 0.3), (0.7, 0.3)),
        ((0.7, 0.3), (0.7, 0.7)),
        ((0.7, 0.7), (0.3, 0.7)),
        ((0.3, 0.7), (0.3, 0.3)),
    ];
    const CROSS: [Segment; 2] = [((0.5, 0.2), (0.5, 0.8)), ((0.2, 0.5), (0.8, 0.5))];
    match class {
        0 => &PILLARS,
        1 => &RAILS,
        2 => &SLASH,
        3 => &VEE,
        4 => &FRAME,
        _ => &CROSS,
    }
}

fn segment_distance(p: (f64, f64), (a, b): Segment) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// One jittered sample of glyph `class`: random shift, scale and stroke
/// width, then a sprinkling of flipped pixels.
pub fn glyph(class: usize, side: usize, rng: &mut impl Rng) -> Result<BinaryImage> {
    if class >= GLYPH_NAMES.len() {
        return Err(Error::invalid(format!("glyph class {class} out of range")));
    }
    if side < 16 {
        return Err(Error::invalid(format!("glyph side must be >= 16, got {side}")));
    }
    let s = side as f64;
    let shift = s / 16.0;
    let (ox, oy) = (rng.gen_range(-shift..=shift), rng.gen_range(-shift..=shift));
    let scale = rng.gen_range(0.9..=1.1);
    let half_width = rng.gen_range(0.6..=1.2);
    let segments = glyph_segments(class);
    let mut img = BinaryImage::from_fn(side, side, |x, y| {
        // Pixel centre in glyph coordinates.
        let u = ((x as f64 + 0.5 - ox) / s - 0.5) / scale + 0.5;
        let v = ((y as f64 + 0.5 - oy) / s - 0.5) / scale + 0.5;
        segments
            .iter()
            .any(|&seg| segment_distance((u, v), seg) * s * scale <= half_width)
    });
    for _ in 0..side * side / 200 {
        let (x, y) = (rng.gen_range(0..side), rng.gen_range(0..side));
        let on = img.get(x, y);
        img.set(x, y, !on);
    }
    Ok(img)
}

/// `per_class` seeded samples of each of the first `classes` glyphs,
/// interleaved by class.
pub fn glyph_dataset(classes: usize, per_class: usize, side: usize, seed: u64) -> Result<Vec<LabeledImage>> {
    if !(2..=GLYPH_NAMES.len()).contains(&classes) {
        return Err(Error::invalid(format!(
            "glyph datasets have 2..={} classes, got {classes}",
            GLYPH_NAMES.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes * per_class);
    for _ in 0..per_class {
        for label in 0..classes {
            out.push(LabeledImage {
                image: glyph(label, side, &mut rng)?,
                label,
            });
        }
    }
    Ok(out)
}
