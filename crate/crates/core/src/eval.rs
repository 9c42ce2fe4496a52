//! Prediction, confusion matrices, one-vs-rest metrics and layer dumps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imaging::{BinaryImage, GrayImage};
use crate::nn::{softmax, LayerKind, LayerParams, Real, Tensor};
use crate::scnn::{images_to_batch, Network};
use crate::train::{argmax, LabeledImage};

/// Images per infer-mode batch during evaluation.
pub const EVAL_BATCH: usize = 16;

/// Class probabilities of each image, in input order.
pub fn predict_proba<T: Real>(network: &Network<T>, images: &[&BinaryImage]) -> Result<Vec<Vec<f64>>> {
    let channels = network.spec.input_shape.2;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(EVAL_BATCH) {
        let x: Tensor<T> = images_to_batch(chunk, channels)?;
        let probs = softmax(&network.infer(&x)?);
        let k = probs.channels();
        out.extend(
            probs
                .data()
                .chunks(k)
                .map(|row| row.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()),
        );
    }
    Ok(out)
}

/// Most probable class (lowest index on ties) and the probability vector.
pub fn predict<T: Real>(network: &Network<T>, image: &BinaryImage) -> Result<(usize, Vec<f64>)> {
    let probs = predict_proba(network, &[image])?.pop().expect("one row per image");
    Ok((argmax(&probs), probs))
}

/// Counts indexed `[predicted][target]`: rows are output classes, columns
/// are target classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::shape(format!("confusion counts must be {k}x{k}")));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn add(&mut self, predicted: usize, target: usize) -> Result<()> {
        let k = self.num_classes();
        if predicted >= k || target >= k {
            return Err(Error::invalid(format!(
                "class index out of range ({predicted}, {target}) for {k} classes"
            )));
        }
        self.counts[predicted][target] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::invalid("cannot merge matrices with different labels"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Per-target-class totals.
    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.num_classes())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total()).unwrap_or(0.0)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Classify every test item and tally the results.
pub fn confusion<T: Real>(
    network: &Network<T>,
    test: &[LabeledImage],
    labels: &[String],
) -> Result<ConfusionMatrix> {
    if labels.len() != network.num_classes() {
        return Err(Error::invalid(format!(
            "{} labels for a {}-class network",
            labels.len(),
            network.num_classes()
        )));
    }
    let mut cm = ConfusionMatrix::new(labels.to_vec());
    let images: Vec<&BinaryImage> = test.iter().map(|s| &s.image).collect();
    let probs = predict_proba(network, &images)?;
    for (sample, p) in test.iter().zip(&probs) {
        cm.add(argmax(p), sample.label)?;
    }
    Ok(cm)
}

/// Summary statistics; `None` where a denominator is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
    pub positive: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Accuracy, per-class precision/recall, and one-vs-rest sensitivity and
/// specificity for `positive`.
pub fn metrics(cm: &ConfusionMatrix, positive: usize) -> Result<Metrics> {
    let k = cm.num_classes();
    if positive >= k {
        return Err(Error::invalid(format!("positive class {positive} out of range")));
    }
    let rows = cm.row_sums();
    let cols = cm.column_sums();
    let total = cm.total();
    let tp = cm.counts[positive][positive];
    let fn_ = cols[positive] - tp;
    let fp = rows[positive] - tp;
    let tn = total - tp - fn_ - fp;
    Ok(Metrics {
        accuracy: cm.accuracy(),
        precision: (0..k).map(|i| ratio(cm.counts[i][i], rows[i])).collect(),
        recall: (0..k).map(|i| ratio(cm.counts[i][i], cols[i])).collect(),
        positive,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}%", 100.0 * x))
}

/// A rate followed by its complement, e.g. `97.0% 3.0%`.
fn pct_pair(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{} {}", pct(Some(x)), pct(Some(1.0 - x))))
}

/// Aligned table, one row per output class and one column per target
/// class. Cells show the count and its share of all items; the last column
/// holds precision, the last row recall, the corner overall accuracy, each
/// followed by its complement.
pub fn render_confusion(cm: &ConfusionMatrix) -> String {
    let k = cm.num_classes();
    let total = cm.total();
    let m = metrics(cm, 0).ok();
    let cell = |c: u64| format!("{c} {}", pct(ratio(c, total)));
    let mut grid: Vec<Vec<String>> = Vec::with_capacity(k + 2);
    let mut header = vec!["output\\target".to_string()];
    header.extend(cm.labels.iter().cloned());
    header.push("precision".into());
    grid.push(header);
    for (i, row) in cm.counts.iter().enumerate() {
        let mut line = vec![cm.labels[i].clone()];
        line.extend(row.iter().map(|&c| cell(c)));
        line.push(pct_pair(m.as_ref().and_then(|m| m.precision[i])));
        grid.push(line);
    }
    let mut last = vec!["recall".to_string()];
    last.extend((0..k).map(|j| pct_pair(m.as_ref().and_then(|m| m.recall[j]))));
    last.push(pct_pair(ratio(cm.trace(), total)));
    grid.push(last);

    let widths: Vec<usize> = (0..k + 2)
        .map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &grid {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (s, &w))| if j == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Line-oriented, tab-separated records: `label`, `cell` and `metric` lines.
pub fn confusion_records(cm: &ConfusionMatrix, m: &Metrics) -> String {
    let mut out = String::new();
    for (i, l) in cm.labels.iter().enumerate() {
        let _ = writeln!(out, "label\t{i}\t{l}");
    }
    for (i, row) in cm.counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let _ = writeln!(out, "cell\t{}\t{}\t{c}", cm.labels[i], cm.labels[j]);
        }
    }
    let num = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"));
    let _ = writeln!(out, "metric\taccuracy\t{:.6}", m.accuracy);
    let _ = writeln!(out, "metric\ttotal\t{}", cm.total());
    for (i, l) in cm.labels.iter().enumerate() {
        let _ = writeln!(out, "metric\tprecision:{l}\t{}", num(m.precision[i]));
        let _ = writeln!(out, "metric\trecall:{l}\t{}", num(m.recall[i]));
    }
    let pos = &cm.labels[m.positive];
    let _ = writeln!(out, "metric\tsensitivity:{pos}\t{}", num(m.sensitivity));
    let _ = writeln!(out, "metric\tspecificity:{pos}\t{}", num(m.specificity));
    out
}

/// Human-readable table followed by the machine-readable records.
pub fn report(cm: &ConfusionMatrix, positive: usize) -> Result<String> {
    let m = metrics(cm, positive)?;
    let mut out = render_confusion(cm);
    let _ = writeln!(
        out,
        "\naccuracy {} ({}/{})  {} sensitivity {} specificity {}\n",
        pct(Some(m.accuracy)),
        cm.trace(),
        cm.total(),
        cm.labels[positive],
        pct(m.sensitivity),
        pct(m.specificity)
    );
    out.push_str(&confusion_records(cm, &m));
    Ok(out)
}

fn normalize_tile(values: &[f64]) -> Vec<f32> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    values
        .iter()
        .map(|&v| if range > 0.0 { ((v - lo) / range) as f32 } else { 0.5 })
        .collect()
}

/// Tiles laid out row-major on a near-square grid with 1-pixel white
/// separators between neighbours.
pub fn tile_grid(tiles: &[Vec<f32>], tile_w: usize, tile_h: usize) -> Result<GrayImage> {
    if tiles.is_empty() || tile_w == 0 || tile_h == 0 {
        return Err(Error::invalid("nothing to tile"));
    }
    let cols = (tiles.len() as f64).sqrt().ceil() as usize;
    let rows = tiles.len().div_ceil(cols);
    let width = cols * (tile_w + 1) - 1;
    let height = rows * (tile_h + 1) - 1;
    let mut px = vec![1.0f32; width * height];
    for (t, tile) in tiles.iter().enumerate() {
        let (ox, oy) = ((t % cols) * (tile_w + 1), (t / cols) * (tile_h + 1));
        for y in 0..tile_h {
            let dst = (oy + y) * width + ox;
            px[dst..dst + tile_w].copy_from_slice(&tile[y * tile_w..(y + 1) * tile_w]);
        }
    }
    GrayImage::new(width, height, px)
}

/// Every `kh x kw` kernel slice of a conv layer, min-max normalized, one
/// tile per (input channel, output channel) pair ordered by output channel.
pub fn filter_tiles<T: Real>(network: &Network<T>, layer: &str) -> Result<(Vec<Vec<f32>>, usize, usize)> {
    let idx = network
        .spec
        .layer_index(layer)
        .ok_or_else(|| Error::invalid(format!("no layer named {layer}")))?;
    let (LayerKind::Conv { kernel: (kh, kw), out_channels, .. }, LayerParams::Conv { weights, .. }) =
        (&network.spec.layers[idx].kind, &network.params.layers[idx])
    else {
        return Err(Error::invalid(format!("{layer} is not a convolution layer")));
    };
    let (kh, kw, c_out) = (*kh, *kw, *out_channels);
    let c_in = weights.len() / (kh * kw * c_out);
    let mut tiles = Vec::with_capacity(c_in * c_out);
    for o in 0..c_out {
        for i in 0..c_in {
            let vals: Vec<f64> = (0..kh * kw)
                .map(|p| weights[(p * c_in + i) * c_out + o].to_f64().unwrap_or(0.0))
                .collect();
            tiles.push(normalize_tile(&vals));
        }
    }
    Ok((tiles, kw, kh))
}

pub fn dump_filters<T: Real>(network: &Network<T>, layer: &str) -> Result<GrayImage> {
    let (tiles, w, h) = filter_tiles(network, layer)?;
    tile_grid(&tiles, w, h)
}

/// Index of the layer whose output is shown for `layer`: a conv maps to the
/// ReLU of its stage, anything else to itself.
pub fn activation_layer<T>(network: &Network<T>, layer: &str) -> Result<usize> {
    let idx = network
        .spec
        .layer_index(layer)
        .ok_or_else(|| Error::invalid(format!("no layer named {layer}")))?;
    if !matches!(network.spec.layers[idx].kind, LayerKind::Conv { .. }) {
        return Ok(idx);
    }
    network.spec.layers[idx + 1..]
        .iter()
        .take_while(|l| !matches!(l.kind, LayerKind::Conv { .. } | LayerKind::FullyConnected { .. }))
        .position(|l| l.kind == LayerKind::Relu)
        .map(|p| idx + 1 + p)
        .ok_or_else(|| Error::InvalidState(format!("{layer} has no ReLU in its stage")))
}

/// Per-channel activation maps of one image, min-max normalized.
pub fn activation_tiles<T: Real>(
    network: &Network<T>,
    image: &BinaryImage,
    layer: &str,
) -> Result<(Vec<Vec<f32>>, usize, usize)> {
    let idx = activation_layer(network, layer)?;
    let x: Tensor<T> = images_to_batch(&[image], network.spec.input_shape.2)?;
    let act = network.infer_through(&x, idx)?;
    let [_, h, w, c] = act.shape();
    let tiles = (0..c)
        .map(|ch| {
            let vals: Vec<f64> = (0..h * w)
                .map(|p| act.data()[p * c + ch].to_f64().unwrap_or(0.0))
                .collect();
            normalize_tile(&vals)
        })
        .collect();
    Ok((tiles, w, h))
}

pub fn dump_activations<T: Real>(network: &Network<T>, image: &BinaryImage, layer: &str) -> Result<GrayImage> {
    let (tiles, w, h) = activation_tiles(network, image, layer)?;
    tile_grid(&tiles, w, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scnn::build_compact;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identity_metrics() {
        let cm = ConfusionMatrix::from_counts(labels(&["a", "b"]), vec![vec![3, 0], vec![0, 4]]).unwrap();
        let m = metrics(&cm, 1).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(1.0));
    }

    #[test]
    fn one_vs_rest_by_enumeration() {
        let counts = vec![vec![5, 1, 2], vec![0, 7, 3], vec![4, 0, 6]];
        let cm = ConfusionMatrix::from_counts(labels(&["a", "b", "c"]), counts.clone()).unwrap();
        for pos in 0..3 {
            let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
            for (p, row) in counts.iter().enumerate() {
                for (t, &c) in row.iter().enumerate() {
                    match (p == pos, t == pos) {
                        (true, true) => tp += c,
                        (true, false) => fp += c,
                        (false, true) => fn_ += c,
                        (false, false) => tn += c,
                    }
                }
            }
            let m = metrics(&cm, pos).unwrap();
            assert_eq!(m.sensitivity, Some(tp as f64 / (tp + fn_) as f64));
            assert_eq!(m.specificity, Some(tn as f64 / (tn + fp) as f64));
        }
        assert_eq!(metrics(&cm, 0).unwrap().accuracy, 18.0 / 28.0);
    }

    #[test]
    fn render_and_records() {
        let cm = ConfusionMatrix::from_counts(labels(&["walk", "fall"]), vec![vec![9, 0], vec![1, 10]]).unwrap();
        let text = report(&cm, 1).unwrap();
        assert!(text.contains("cell\twalk\tfall\t0"));
        assert!(text.contains("metric\tsensitivity:fall\t1.000000"));
        assert!(text.contains("95.0%"));
        let mut a = ConfusionMatrix::new(labels(&["walk", "fall"]));
        a.add(1, 0).unwrap();
        a.merge(&cm).unwrap();
        assert_eq!(a.counts[1][0], 2);
        assert!(a.add(2, 0).is_err());
    }

    #[test]
    fn filter_dump_layout() {
        let net: Network<f32> = Network::new(build_compact(16, 1, 3).unwrap(), 4).unwrap();
        let (tiles, w, h) = filter_tiles(&net, "C1").unwrap();
        assert_eq!((tiles.len(), w, h), (8, 3, 3));
        let (tiles, ..) = filter_tiles(&net, "c2").unwrap();
        assert_eq!(tiles.len(), 64);
        assert!(tiles.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        let img = dump_filters(&net, "C1").unwrap();
        assert_eq!((img.width(), img.height()), (3 * 4 - 1, 3 * 4 - 1));
        assert!(dump_filters(&net, "ReLU1").is_err());
        assert!(dump_filters(&net, "C99").is_err());
    }

    #[test]
    fn constant_kernel_is_mid_gray() {
        assert_eq!(normalize_tile(&[0.3; 9]), vec![0.5; 9]);
    }

    #[test]
    fn activations_of_blank_input_are_uniform() {
        let net: Network<f32> = Network::new(build_compact(16, 1, 3).unwrap(), 4).unwrap();
        let blank = BinaryImage::zeros(16, 16);
        let (tiles, w, h) = activation_tiles(&net, &blank, "C2").unwrap();
        assert_eq!((tiles.len(), w, h), (8, 8, 8));
        assert!(tiles.iter().all(|t| t == &tiles[0]));
    }

    #[test]
    fn prediction_is_a_distribution_and_batch_independent() {
        let net: Network<f32> = Network::new(build_compact(16, 1, 4).unwrap(), 2).unwrap();
        let imgs: Vec<BinaryImage> = (0..5).map(|i| BinaryImage::from_fn(16, 16, |x, y| (x * y + i) % 3 == 0)).collect();
        let refs: Vec<&BinaryImage> = imgs.iter().collect();
        let batch = predict_proba(&net, &refs).unwrap();
        for (img, row) in imgs.iter().zip(&batch) {
            let (label, p) = predict(&net, img).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert_eq!(label, argmax(row));
        }
    }
}
