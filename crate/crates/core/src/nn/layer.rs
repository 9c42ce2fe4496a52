use std::fmt;

use crate::error::{Error, Result};
use crate::nn::{ConvGeometry, PoolGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv {
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        out_channels: usize,
    },
    BatchNorm,
    Relu,
    MaxPool {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    FullyConnected {
        out_units: usize,
    },
    SoftmaxXent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }

    pub fn is_learnable(&self) -> bool {
        matches!(
            self.kind,
            LayerKind::Conv { .. } | LayerKind::BatchNorm | LayerKind::FullyConnected { .. }
        )
    }

    pub(crate) fn conv_geometry(&self, c_in: usize) -> Option<ConvGeometry> {
        match self.kind {
            LayerKind::Conv {
                kernel: (kh, kw),
                stride,
                padding,
                out_channels,
            } => Some(ConvGeometry {
                kh,
                kw,
                c_in,
                c_out: out_channels,
                stride,
                padding,
            }),
            _ => None,
        }
    }

    pub(crate) fn pool_geometry(&self) -> Option<PoolGeometry> {
        match self.kind {
            LayerKind::MaxPool {
                kernel,
                stride,
                padding,
            } => Some(PoolGeometry {
                kernel,
                stride,
                padding,
            }),
            _ => None,
        }
    }

    /// Output `(h, w, c)` for an input of `(h, w, c)`.
    pub fn output_shape(&self, (h, w, c): (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        match self.kind {
            LayerKind::Conv { out_channels, .. } => {
                if out_channels == 0 {
                    return Err(Error::invalid(format!("{}: zero output channels", self.name)));
                }
                let g = self.conv_geometry(c).expect("conv layer");
                let (oh, ow) = g
                    .output_dims(h, w)
                    .map_err(|e| Error::shape(format!("{}: {e}", self.name)))?;
                Ok((oh, ow, out_channels))
            }
            LayerKind::MaxPool { .. } => {
                let g = self.pool_geometry().expect("pool layer");
                let (oh, ow) = g
                    .output_dims(h, w)
                    .map_err(|e| Error::shape(format!("{}: {e}", self.name)))?;
                Ok((oh, ow, c))
            }
            LayerKind::FullyConnected { out_units } => {
                if out_units == 0 {
                    return Err(Error::invalid(format!("{}: zero output units", self.name)));
                }
                Ok((1, 1, out_units))
            }
            LayerKind::BatchNorm | LayerKind::Relu | LayerKind::SoftmaxXent => Ok((h, w, c)),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LayerKind::Conv {
                kernel: (kh, kw),
                stride,
                padding,
                out_channels,
            } => write!(
                f,
                "{}: conv {kh}x{kw} s{stride} p{padding} -> {out_channels}",
                self.name
            ),
            LayerKind::BatchNorm => write!(f, "{}: batchnorm", self.name),
            LayerKind::Relu => write!(f, "{}: relu", self.name),
            LayerKind::MaxPool {
                kernel,
                stride,
                padding,
            } => write!(f, "{}: maxpool {kernel}x{kernel} s{stride} p{padding}", self.name),
            LayerKind::FullyConnected { out_units } => {
                write!(f, "{}: fully-connected -> {out_units}", self.name)
            }
            LayerKind::SoftmaxXent => write!(f, "{}: softmax cross-entropy", self.name),
        }
    }
}
