//! Dump first-layer filters and second-stage activations of a briefly
//! trained compact network as PGM mosaics.
//!
//!     cargo run --release --example inspect -- /tmp/inspect

use std::path::PathBuf;

use scnn::eval::{dump_activations, dump_filters};
use scnn::io::save_gray;
use scnn::scnn::{build_compact, Network};
use scnn::synth::glyph_dataset;
use scnn::train::{train, TrainConfig};

fn main() -> scnn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "inspect_demo".into()));
    std::fs::create_dir_all(&out).map_err(|source| scnn::Error::Io { path: out.clone(), source })?;

    let data = glyph_dataset(5, 20, 64, 0)?;
    let mut net: Network<f32> = Network::new(build_compact(64, 1, 5)?, 0)?;
    let cfg = TrainConfig {
        max_iterations: Some(20),
        ..TrainConfig::default()
    };
    train(&mut net, &data, &cfg)?;

    let filters = dump_filters(&net, "C1")?;
    save_gray(out.join("c1_filters.pgm"), &filters)?;
    let acts = dump_activations(&net, &data[0].image, "C2")?;
    save_gray(out.join("c2_activations.pgm"), &acts)?;
    println!(
        "filters {}x{}, activations {}x{} -> {}",
        filters.width(),
        filters.height(),
        acts.width(),
        acts.height(),
        out.display()
    );
    Ok(())
}
