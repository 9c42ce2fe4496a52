//! Render a confusion matrix with precision/recall margins and the
//! machine-readable records, from hand-entered counts.

use scnn::eval::{metrics, report, ConfusionMatrix};

fn main() -> scnn::Result<()> {
    let labels = ["walk", "fall", "wave"].map(String::from).to_vec();
    // rows: predicted, columns: actual
    let cm = ConfusionMatrix::from_counts(labels, vec![vec![40, 2, 1], vec![3, 47, 0], vec![7, 1, 49]])?;
    print!("{}", report(&cm, 1)?);

    let m = metrics(&cm, 1)?;
    println!(
        "fall: sensitivity {:.3}, specificity {:.3}",
        m.sensitivity.unwrap_or(f64::NAN),
        m.specificity.unwrap_or(f64::NAN)
    );
    Ok(())
}
