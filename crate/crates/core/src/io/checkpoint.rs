//! Binary network snapshots.
//!
//! Layout, all integers and floats little-endian:
//! `"SCNN"`, `u32` version, the network spec (input h, w, c and class count
//! as `u32`, then per layer a length-prefixed name, a kind tag and its
//! fields), the length-prefixed class labels, and finally every layer's
//! arrays in build order as a `u64` length followed by `f32` values.
//! Batchnorm layers store gamma, beta, running mean and running variance.
//! Optimizer velocities are not stored.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{BatchNormParams, LayerKind, LayerParams, LayerSpec, ParamStore};
use crate::scnn::{Network, NetworkSpec};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SCNN";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_STRING: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub labels: Vec<String>,
}

struct Writer<W> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(b)
    }

    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        let v = u32::try_from(v).map_err(|_| std::io::Error::other("value exceeds u32"))?;
        self.bytes(&v.to_le_bytes())
    }

    fn string(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes())
    }

    fn floats(&mut self, values: &[f32]) -> std::io::Result<()> {
        self.bytes(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            self.bytes(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

struct Reader<R> {
    inner: R,
}

#[derive(Debug)]
enum ReadError {
    Io(std::io::Error),
    Bad(String),
}

impl From<std::io::Error> for ReadError {
    fn from(e: std::io::Error) -> Self {
        ReadError::Io(e)
    }
}

type ReadResult<T> = std::result::Result<T, ReadError>;

fn bad<T>(msg: impl Into<String>) -> ReadResult<T> {
    Err(ReadError::Bad(msg.into()))
}

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> ReadResult<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }

    fn u32(&mut self) -> ReadResult<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn string(&mut self) -> ReadResult<String> {
        let len = self.u32()?;
        if len > MAX_STRING {
            return bad(format!("string length {len} too large"));
        }
        let mut b = vec![0u8; len];
        self.inner.read_exact(&mut b)?;
        String::from_utf8(b).or_else(|_| bad("string is not UTF-8"))
    }

    fn floats(&mut self, expected: usize) -> ReadResult<Vec<f32>> {
        let len = u64::from_le_bytes(self.array()?);
        if len != expected as u64 {
            return bad(format!("array of {len} values where {expected} are expected"));
        }
        let mut raw = vec![0u8; expected * 4];
        self.inner.read_exact(&mut raw)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

fn write_kind<W: Write>(w: &mut Writer<W>, kind: &LayerKind) -> std::io::Result<()> {
    match *kind {
        LayerKind::Conv {
            kernel: (kh, kw),
            stride,
            padding,
            out_channels,
        } => {
            w.bytes(&[0])?;
            for v in [kh, kw, stride, padding, out_channels] {
                w.u32(v)?;
            }
        }
        LayerKind::BatchNorm => w.bytes(&[1])?,
        LayerKind::Relu => w.bytes(&[2])?,
        LayerKind::MaxPool {
            kernel,
            stride,
            padding,
        } => {
            w.bytes(&[3])?;
            for v in [kernel, stride, padding] {
                w.u32(v)?;
            }
        }
        LayerKind::FullyConnected { out_units } => {
            w.bytes(&[4])?;
            w.u32(out_units)?;
        }
        LayerKind::SoftmaxXent => w.bytes(&[5])?,
    }
    Ok(())
}

fn read_kind<R: Read>(r: &mut Reader<R>) -> ReadResult<LayerKind> {
    Ok(match r.array::<1>()?[0] {
        0 => LayerKind::Conv {
            kernel: (r.u32()?, r.u32()?),
            stride: r.u32()?,
            padding: r.u32()?,
            out_channels: r.u32()?,
        },
        1 => LayerKind::BatchNorm,
        2 => LayerKind::Relu,
        3 => LayerKind::MaxPool {
            kernel: r.u32()?,
            stride: r.u32()?,
            padding: r.u32()?,
        },
        4 => LayerKind::FullyConnected { out_units: r.u32()? },
        5 => LayerKind::SoftmaxXent,
        t => return bad(format!("unknown layer tag {t}")),
    })
}

/// Array lengths a layer stores, derived from the spec alone.
fn stored_lengths(kind: &LayerKind, (h, w, c): (usize, usize, usize)) -> Vec<usize> {
    match *kind {
        LayerKind::Conv {
            kernel: (kh, kw),
            out_channels,
            ..
        } => vec![kh * kw * c * out_channels, out_channels],
        LayerKind::BatchNorm => vec![c; 4],
        LayerKind::FullyConnected { out_units } => vec![h * w * c * out_units, out_units],
        _ => vec![],
    }
}

impl Checkpoint {
    pub fn new(network: Network<f32>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != network.num_classes() {
            return Err(Error::invalid(format!(
                "{} labels for a {}-class network",
                labels.len(),
                network.num_classes()
            )));
        }
        Ok(Checkpoint { network, labels })
    }

    pub fn write_to(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = Writer { inner: out };
        let spec = &self.network.spec;
        w.bytes(CHECKPOINT_MAGIC)?;
        w.u32(CHECKPOINT_VERSION as usize)?;
        let (h, wd, c) = spec.input_shape;
        for v in [h, wd, c, spec.num_classes, spec.layers.len()] {
            w.u32(v)?;
        }
        for layer in &spec.layers {
            w.string(&layer.name)?;
            write_kind(&mut w, &layer.kind)?;
        }
        w.u32(self.labels.len())?;
        for l in &self.labels {
            w.string(l)?;
        }
        for layer in &self.network.params.layers {
            match layer {
                LayerParams::None => {}
                LayerParams::Conv { weights, bias } | LayerParams::Dense { weights, bias } => {
                    w.floats(weights)?;
                    w.floats(bias)?;
                }
                LayerParams::BatchNorm(bn) => {
                    for a in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                        w.floats(a)?;
                    }
                }
            }
        }
        w.inner.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory cannot fail");
        out
    }

    fn read_inner<R: Read>(r: &mut Reader<R>) -> ReadResult<Checkpoint> {
        if &r.array::<4>()? != CHECKPOINT_MAGIC {
            return bad("not an SCNN checkpoint");
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION as usize {
            return bad(format!("unsupported checkpoint version {version}"));
        }
        let input_shape = (r.u32()?, r.u32()?, r.u32()?);
        let num_classes = r.u32()?;
        let n_layers = r.u32()?;
        if n_layers > MAX_STRING {
            return bad(format!("{n_layers} layers"));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let name = r.string()?;
            layers.push(LayerSpec::new(name, read_kind(r)?));
        }
        let spec = NetworkSpec {
            input_shape,
            num_classes,
            layers,
        };
        let inputs = spec
            .validate()
            .and_then(|_| spec.input_shapes())
            .or_else(|e| bad(e.to_string()))?;
        let n_labels = r.u32()?;
        if n_labels != num_classes {
            return bad(format!("{n_labels} labels for {num_classes} classes"));
        }
        let labels = (0..n_labels).map(|_| r.string()).collect::<ReadResult<Vec<_>>>()?;
        let mut params = Vec::with_capacity(n_layers);
        for (layer, input) in spec.layers.iter().zip(inputs) {
            let mut arrays = stored_lengths(&layer.kind, input)
                .into_iter()
                .map(|len| r.floats(len))
                .collect::<ReadResult<Vec<_>>>()?
                .into_iter();
            let mut next = || arrays.next().expect("length list matches layer kind");
            params.push(match layer.kind {
                LayerKind::Conv { .. } => LayerParams::Conv {
                    weights: next(),
                    bias: next(),
                },
                LayerKind::FullyConnected { .. } => LayerParams::Dense {
                    weights: next(),
                    bias: next(),
                },
                LayerKind::BatchNorm => LayerParams::BatchNorm(BatchNormParams {
                    gamma: next(),
                    beta: next(),
                    running_mean: next(),
                    running_var: next(),
                }),
                _ => LayerParams::None,
            });
        }
        if r.inner.read(&mut [0u8])? != 0 {
            return bad("trailing bytes after the last array");
        }
        let network = Network::from_parts(spec, ParamStore::from_layers(params)).or_else(|e| bad(e.to_string()))?;
        Ok(Checkpoint { network, labels })
    }

    /// `path` is only used for error messages.
    pub fn read_from(input: impl Read, path: &Path) -> Result<Self> {
        let mut r = Reader { inner: input };
        Self::read_inner(&mut r).map_err(|e| match e {
            ReadError::Io(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::format(path, "truncated checkpoint")
            }
            ReadError::Io(e) => Error::io(path, e),
            ReadError::Bad(msg) => Error::format(path, msg),
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes, Path::new("<memory>"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }
}
