//! The Series CNN: architecture description, whole-network passes, and
//! parameter accounting.

mod network;
mod spec;

pub use network::{images_to_batch, ForwardTrace, Network, StepOutput};
pub use spec::{
    build_compact, build_scnn, build_scnn_with_channels, parameter_count, LayerCount,
    NetworkSpec, ParameterCount, Stage, SCNN_CHANNELS, SCNN_FC_HIDDEN, SCNN_INPUT,
};
