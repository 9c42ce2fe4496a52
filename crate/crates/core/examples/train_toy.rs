//! Train the compact variant on synthetic glyphs and print the progress table.
//! Takes under a minute in release mode.
//!
//!     cargo run --release --example train_toy

use scnn::eval::confusion;
use scnn::scnn::{build_compact, Network};
use scnn::synth::{glyph_dataset, GLYPH_NAMES};
use scnn::train::{train_with, Clock, TrainConfig, LOG_HEADER};

fn main() -> scnn::Result<()> {
    let train = glyph_dataset(5, 90, 64, 0)?;
    let test = glyph_dataset(5, 40, 64, 1)?;
    let labels: Vec<String> = GLYPH_NAMES[..5].iter().map(|s| s.to_string()).collect();

    let mut net: Network<f32> = Network::new(build_compact(64, 1, 5)?, 0)?;
    let cfg = TrainConfig {
        max_iterations: Some(300),
        ..TrainConfig::default()
    };
    println!("{LOG_HEADER}");
    train_with(&mut net, &train, &cfg, Clock::Wall, |rec| println!("{rec}"))?;

    let cm = confusion(&net, &test, &labels)?;
    println!("held-out accuracy {:.1}% ({}/{})", 100.0 * cm.accuracy(), cm.trace(), cm.total());
    Ok(())
}
