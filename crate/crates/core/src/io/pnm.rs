//! Binary 8-bit PGM (P5) and PPM (P6).

use std::fs;
use std::path::{Path, PathBuf};

use crate::action_pattern::{ActionPatternImage, FrameSequence};
use crate::error::{Error, Result};
use crate::imaging::{BinaryImage, GrayImage, RgbImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pnm {
    Gray { width: usize, height: usize, data: Vec<u8> },
    Rgb { width: usize, height: usize, data: Vec<u8> },
}

impl Pnm {
    pub fn width(&self) -> usize {
        match self {
            Pnm::Gray { width, .. } | Pnm::Rgb { width, .. } => *width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Pnm::Gray { height, .. } | Pnm::Rgb { height, .. } => *height,
        }
    }

    /// Bytes mapped to [0,1] by /255; gray planes are replicated.
    pub fn to_rgb(&self) -> Result<RgbImage> {
        let f = |b: u8| b as f32 / 255.0;
        let pixels = match self {
            Pnm::Gray { data, .. } => data.iter().map(|&b| [f(b); 3]).collect(),
            Pnm::Rgb { data, .. } => data.chunks_exact(3).map(|p| [f(p[0]), f(p[1]), f(p[2])]).collect(),
        };
        RgbImage::new(self.width(), self.height(), pixels)
    }

    pub fn encode(&self) -> Vec<u8> {
        let (magic, data) = match self {
            Pnm::Gray { data, .. } => ("P5", data),
            Pnm::Rgb { data, .. } => ("P6", data),
        };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width(), self.height()).into_bytes();
        out.extend_from_slice(data);
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Pnm> {
        let err = |msg: &str| Error::format(path, msg);
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err(err("truncated header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token()?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            _ => return Err(err("not a binary PGM/PPM (P5/P6)")),
        };
        let mut number = |what: &str| -> Result<usize> {
            token()?
                .parse::<usize>()
                .map_err(|_| err(&format!("bad {what}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if width == 0 || height == 0 {
            return Err(err("zero image dimension"));
        }
        if maxval != 255 {
            return Err(err(&format!("unsupported maxval {maxval}, only 255")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let start = pos + 1;
        let len = width * height * channels;
        if bytes.len() < start + len {
            return Err(err("truncated raster"));
        }
        let data = bytes[start..start + len].to_vec();
        Ok(if channels == 1 {
            Pnm::Gray { width, height, data }
        } else {
            Pnm::Rgb { width, height, data }
        })
    }
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Pnm> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Pnm::decode(&bytes, path)
}

pub fn write_pnm(path: impl AsRef<Path>, img: &Pnm) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, img.encode()).map_err(|e| Error::io(path, e))
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a gray image as P5, clamping to [0,1].
pub fn save_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let data = img.pixels().iter().map(|&v| to_byte(v)).collect();
    write_pnm(
        path,
        &Pnm::Gray {
            width: img.width(),
            height: img.height(),
            data,
        },
    )
}

fn is_pnm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
}

/// Reads every `.pgm`/`.ppm`/`.pnm` file of `dir` in lexicographic order.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && is_pnm(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::format(dir, "no PGM/PPM frames found"));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = read_pnm(p)?;
        if let Some(first) = frames.first() {
            let first: &RgbImage = first;
            if (img.width(), img.height()) != (first.width(), first.height()) {
                return Err(Error::format(
                    p,
                    format!(
                        "frame is {}x{}, earlier frames are {}x{}",
                        img.width(),
                        img.height(),
                        first.width(),
                        first.height()
                    ),
                ));
            }
        }
        frames.push(img.to_rgb()?);
    }
    if frames.len() < 2 {
        return Err(Error::InsufficientFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    FrameSequence::new(frames)
}

/// Writes `frame_0000.ppm`, `frame_0001.ppm`, ... into `dir`, creating it.
pub fn save_frames(dir: impl AsRef<Path>, seq: &FrameSequence) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in seq.frames().iter().enumerate() {
        let data = f.pixels().iter().flat_map(|p| p.map(to_byte)).collect();
        write_pnm(
            dir.join(format!("frame_{i:04}.ppm")),
            &Pnm::Rgb {
                width: f.width(),
                height: f.height(),
                data,
            },
        )?;
    }
    Ok(())
}

/// P5 with bytes 0 and 255.
pub fn save_api(path: impl AsRef<Path>, api: &ActionPatternImage) -> Result<()> {
    let img = api.image();
    let data = img.pixels().iter().map(|&b| if b != 0 { 255 } else { 0 }).collect();
    write_pnm(
        path,
        &Pnm::Gray {
            width: img.width(),
            height: img.height(),
            data,
        },
    )
}

pub fn load_api(path: impl AsRef<Path>) -> Result<ActionPatternImage> {
    let path = path.as_ref();
    let Pnm::Gray { width, height, data } = read_pnm(path)? else {
        return Err(Error::format(path, "action pattern images are P5 grayscale"));
    };
    let bits = data
        .iter()
        .map(|&b| match b {
            0 => Ok(0),
            255 => Ok(1),
            other => Err(Error::format(path, format!("pixel value {other} is neither 0 nor 255"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    let img = BinaryImage::new(width, height, bits)?;
    ActionPatternImage::new(img).map_err(|e| Error::format(path, e.to_string()))
}
