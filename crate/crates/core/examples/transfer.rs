//! Grow a 5-class glyph model to 6 classes with a fifth of the old data and
//! 100 samples of the new class.
//!
//!     cargo run --release --example transfer

use scnn::eval::{confusion, render_confusion};
use scnn::imaging::BinaryImage;
use scnn::scnn::{build_compact, Network};
use scnn::synth::{glyph_dataset, GLYPH_NAMES};
use scnn::train::{train, TrainConfig};
use scnn::transfer::{transfer_train, TransferPlan};

fn main() -> scnn::Result<()> {
    let old = glyph_dataset(5, 90, 64, 0)?;
    let old_labels: Vec<String> = GLYPH_NAMES[..5].iter().map(|s| s.to_string()).collect();
    let mut source: Network<f32> = Network::new(build_compact(64, 1, 5)?, 0)?;
    let cfg = TrainConfig {
        max_iterations: Some(200),
        ..TrainConfig::default()
    };
    train(&mut source, &old, &cfg)?;

    let new: Vec<BinaryImage> = glyph_dataset(6, 120, 64, 5)?
        .into_iter()
        .filter(|s| s.label == 5)
        .map(|s| s.image)
        .collect();
    let plan = TransferPlan::new(&old_labels, GLYPH_NAMES[5]);
    let grown = transfer_train(&source, &old_labels, &old, &new, &plan, &TrainConfig::default(), Default::default(), |_| {})?;
    println!("transfer set: {} patterns, {} iterations", grown.dataset_len, grown.report.iterations);

    let test = glyph_dataset(6, 30, 64, 9)?;
    let cm = confusion(&grown.network, &test, &plan.new_classes)?;
    print!("{}", render_confusion(&cm));
    Ok(())
}
