use crate::error::{Error, Result};
use crate::nn::{LayerKind, LayerSpec};

/// Conv channel counts of C1..C14.
pub const SCNN_CHANNELS: [usize; 14] = [
    8, 16, 32, 64, 128, 256, 512, 1024, 1024, 1024, 1024, 2048, 2048, 2048,
];
pub const SCNN_INPUT: (usize, usize, usize) = (256, 256, 1);
pub const SCNN_FC_HIDDEN: usize = 2048;

/// One conv + batchnorm + relu block, optionally followed by a 2x2/2 max pool
/// with the given padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub channels: usize,
    pub pool_padding: Option<usize>,
}

impl Stage {
    pub const fn plain(channels: usize) -> Self {
        Stage {
            channels,
            pool_padding: None,
        }
    }

    pub const fn pooled(channels: usize, padding: usize) -> Self {
        Stage {
            channels,
            pool_padding: Some(padding),
        }
    }
}

/// Ordered layer list of a strictly sequential network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_shape: (usize, usize, usize),
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// `stages` of 3x3/s1/p1 convolutions, then `FC1(fc_hidden)`, `FC2(K)` and
    /// the softmax cross-entropy head.
    pub fn series(
        input_shape: (usize, usize, usize),
        stages: &[Stage],
        fc_hidden: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let mut layers = Vec::new();
        let mut pools = 0;
        for (i, stage) in stages.iter().enumerate() {
            let n = i + 1;
            layers.push(LayerSpec::new(
                format!("C{n}"),
                LayerKind::Conv {
                    kernel: (3, 3),
                    stride: 1,
                    padding: 1,
                    out_channels: stage.channels,
                },
            ));
            layers.push(LayerSpec::new(format!("BN{n}"), LayerKind::BatchNorm));
            layers.push(LayerSpec::new(format!("ReLU{n}"), LayerKind::Relu));
            if let Some(padding) = stage.pool_padding {
                pools += 1;
                layers.push(LayerSpec::new(
                    format!("Pool{pools}"),
                    LayerKind::MaxPool {
                        kernel: 2,
                        stride: 2,
                        padding,
                    },
                ));
            }
        }
        layers.push(LayerSpec::new(
            "FC1",
            LayerKind::FullyConnected {
                out_units: fc_hidden,
            },
        ));
        layers.push(LayerSpec::new(
            "FC2",
            LayerKind::FullyConnected {
                out_units: num_classes,
            },
        ));
        layers.push(LayerSpec::new("Output", LayerKind::SoftmaxXent));
        let spec = NetworkSpec {
            input_shape,
            num_classes,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Input shape of every layer, checking that consecutive layers agree.
    pub fn input_shapes(&self) -> Result<Vec<(usize, usize, usize)>> {
        let (h, w, c) = self.input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::invalid("input dimensions must be >= 1"));
        }
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input_shape;
        for layer in &self.layers {
            shapes.push(cur);
            cur = layer.output_shape(cur)?;
        }
        Ok(shapes)
    }

    pub fn output_shapes(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut cur = self.input_shape;
        self.layers
            .iter()
            .map(|l| {
                cur = l.output_shape(cur)?;
                Ok(cur)
            })
            .collect()
    }

    /// Static shape check of the whole stack.
    pub fn validate(&self) -> Result<()> {
        let outputs = self.output_shapes()?;
        match self.layers.last() {
            Some(l) if l.kind == LayerKind::SoftmaxXent => {}
            _ => return Err(Error::invalid("last layer must be softmax cross-entropy")),
        }
        let last_learnable = self
            .layers
            .iter()
            .zip(&outputs).rfind(|(l, _)| l.is_learnable())
            .ok_or_else(|| Error::invalid("network has no learnable layer"))?;
        if *last_learnable.1 != (1, 1, self.num_classes) {
            return Err(Error::shape(format!(
                "last learnable layer outputs {:?}, expected {} units",
                last_learnable.1, self.num_classes
            )));
        }
        let mut names: Vec<&str> = self.layers.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate layer names"));
        }
        Ok(())
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name.eq_ignore_ascii_case(name))
    }

    /// Index of the last learnable layer (the classifier).
    pub fn head_index(&self) -> usize {
        self.layers
            .iter()
            .rposition(LayerSpec::is_learnable)
            .expect("validated spec has a learnable layer")
    }
}

/// The Series CNN: 14 conv/BN/ReLU stages, 8 max pools, two dense layers.
pub fn build_scnn(num_classes: usize) -> Result<NetworkSpec> {
    build_scnn_with_channels(num_classes, SCNN_INPUT.2)
}

/// [`build_scnn`] with a configurable number of input channels.
pub fn build_scnn_with_channels(num_classes: usize, channels: usize) -> Result<NetworkSpec> {
    let stages: Vec<Stage> = SCNN_CHANNELS
        .iter()
        .enumerate()
        .map(|(i, &c)| match i + 1 {
            1..=6 | 11 => Stage::pooled(c, 0),
            14 => Stage::pooled(c, 1),
            _ => Stage::plain(c),
        })
        .collect();
    NetworkSpec::series(
        (SCNN_INPUT.0, SCNN_INPUT.1, channels),
        &stages,
        SCNN_FC_HIDDEN,
        num_classes,
    )
}

/// Depth-reduced variant with the same layer kinds and the same tail
/// (unpooled block, pool to 2x2, padded final pool), for square inputs whose
/// side is a power of two >= 8. Channels grow 8, 8, 16, 16, ... capped at 64.
pub fn build_compact(side: usize, channels: usize, num_classes: usize) -> Result<NetworkSpec> {
    if side < 8 || !side.is_power_of_two() {
        return Err(Error::invalid(format!(
            "compact network needs a power-of-two side >= 8, got {side}"
        )));
    }
    let pooled = (side / 4).trailing_zeros() as usize;
    let width = |i: usize| (8usize << (i / 2)).min(64);
    let mut stages: Vec<Stage> = (0..pooled).map(|i| Stage::pooled(width(i), 0)).collect();
    let tail = width(pooled);
    stages.push(Stage::pooled(tail, 0));
    stages.push(Stage::pooled(tail, 1));
    NetworkSpec::series((side, side, channels), &stages, 64, num_classes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCount {
    pub name: String,
    pub standard: usize,
    pub paper_style: usize,
}

/// Parameter totals under two conventions.
///
/// `standard` counts every learnable value (conv `kh*kw*c_in*c_out + c_out`,
/// batchnorm `2c`, dense `(in+1)*out`). `paper_style` follows the printed
/// layer table: conv `kh*kw*c_out + c_out`, batchnorm 0, the first dense
/// layer its input size and the second `in*in`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterCount {
    pub standard: usize,
    pub paper_style: usize,
    pub per_layer: Vec<LayerCount>,
}

pub fn parameter_count(spec: &NetworkSpec) -> Result<ParameterCount> {
    let inputs = spec.input_shapes()?;
    let mut per_layer = Vec::new();
    let mut dense_seen = 0;
    for (layer, &(h, w, c)) in spec.layers.iter().zip(&inputs) {
        let (standard, paper_style) = match layer.kind {
            LayerKind::Conv {
                kernel: (kh, kw),
                out_channels,
                ..
            } => (
                kh * kw * c * out_channels + out_channels,
                kh * kw * out_channels + out_channels,
            ),
            LayerKind::BatchNorm => (2 * c, 0),
            LayerKind::FullyConnected { out_units } => {
                let fan_in = h * w * c;
                dense_seen += 1;
                let paper = if dense_seen == 1 { fan_in } else { fan_in * fan_in };
                ((fan_in + 1) * out_units, paper)
            }
            _ => continue,
        };
        per_layer.push(LayerCount {
            name: layer.name.clone(),
            standard,
            paper_style,
        });
    }
    Ok(ParameterCount {
        standard: per_layer.iter().map(|l| l.standard).sum(),
        paper_style: per_layer.iter().map(|l| l.paper_style).sum(),
        per_layer,
    })
}
