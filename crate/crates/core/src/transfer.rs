//! Growing a trained network by new classes: every layer up to and including
//! FC1 is copied, the classifier is replaced by a freshly initialized one with
//! more outputs, and training resumes on a mix of old and new data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::BinaryImage;
use crate::nn::params::{init_layer, weight_init};
use crate::nn::{LayerKind, ParamStore, Real};
use crate::scnn::Network;
use crate::train::{train_with, Clock, LabeledImage, TrainConfig, TrainLogRecord, TrainReport};

#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    /// Old labels followed by the new ones.
    pub new_classes: Vec<String>,
    pub old_data_fraction: f64,
    /// Upper bound on new-class samples drawn from those supplied.
    pub new_class_api_count: usize,
    /// Seed for the replacement head and the data sampling.
    pub seed: u64,
}

impl TransferPlan {
    pub fn new(old_labels: &[String], new_label: impl Into<String>) -> Self {
        let mut new_classes = old_labels.to_vec();
        new_classes.push(new_label.into());
        TransferPlan {
            new_classes,
            old_data_fraction: 0.2,
            new_class_api_count: 100,
            seed: 0,
        }
    }

    pub fn validate(&self, old_labels: &[String]) -> Result<()> {
        if !(self.old_data_fraction > 0.0 && self.old_data_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "old-data fraction must be in (0,1], got {}",
                self.old_data_fraction
            )));
        }
        if self.new_classes.len() <= old_labels.len() || !self.new_classes.starts_with(old_labels) {
            return Err(Error::invalid(
                "new label list must extend the old label list",
            ));
        }
        let mut sorted = self.new_classes.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate class label"));
        }
        Ok(())
    }
}

/// Copies the source network and swaps its classifier for a `k_new`-way one.
///
/// Conv, batchnorm (including running statistics) and FC1 parameters are
/// copied bit-exact; optimizer velocities start at zero.
pub fn transplant<T: Real>(source: &Network<T>, k_new: usize, seed: u64) -> Result<Network<T>> {
    let k_old = source.num_classes();
    if k_new <= k_old {
        return Err(Error::invalid(format!(
            "transfer needs more classes than the source ({k_new} <= {k_old})"
        )));
    }
    let head = source.spec.head_index();
    let mut spec = source.spec.clone();
    match &mut spec.layers[head].kind {
        LayerKind::FullyConnected { out_units } => *out_units = k_new,
        _ => return Err(Error::InvalidState("classifier is not a dense layer".into())),
    }
    spec.num_classes = k_new;
    let inputs = spec.input_shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = source.params.layers.clone();
    layers[head] = init_layer(&spec.layers[head], inputs[head], weight_init(&spec, head), &mut rng)?;
    Network::from_parts(spec, ParamStore::from_layers(layers))
}

fn sample_count(fraction: f64, available: usize) -> usize {
    // Guard against 0.2 * 100 landing a hair above 20.
    ((fraction * available as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Seeded mix of `ceil(fraction * n_c)` samples of each old class `c` and up
/// to `new_class_api_count` new-class samples (labelled `k_old`).
pub fn build_transfer_dataset(
    old: &[LabeledImage],
    k_old: usize,
    new: &[BinaryImage],
    plan: &TransferPlan,
) -> Result<Vec<LabeledImage>> {
    if !(plan.old_data_fraction > 0.0 && plan.old_data_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "old-data fraction must be in (0,1], got {}",
            plan.old_data_fraction
        )));
    }
    if let Some(s) = old.iter().find(|s| s.label >= k_old) {
        return Err(Error::invalid(format!("old label {} >= {k_old}", s.label)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Vec::new();
    for class in 0..k_old {
        let members: Vec<&LabeledImage> = old.iter().filter(|s| s.label == class).collect();
        let take = sample_count(plan.old_data_fraction, members.len());
        out.extend(members.choose_multiple(&mut rng, take).map(|&s| s.clone()));
    }
    let take = plan.new_class_api_count.min(new.len());
    out.extend(new.choose_multiple(&mut rng, take).map(|img| LabeledImage {
        image: img.clone(),
        label: k_old,
    }));
    Ok(out)
}

pub struct TransferOutcome<T> {
    pub network: Network<T>,
    pub report: TrainReport,
    pub dataset_len: usize,
}

/// Transplant, assemble the mixed dataset, and train with `cfg` unchanged.
pub fn transfer_train<T: Real>(
    source: &Network<T>,
    old_labels: &[String],
    old: &[LabeledImage],
    new: &[BinaryImage],
    plan: &TransferPlan,
    cfg: &TrainConfig,
    clock: Clock,
    on_log: impl FnMut(&TrainLogRecord),
) -> Result<TransferOutcome<T>> {
    plan.validate(old_labels)?;
    if old_labels.len() != source.num_classes() {
        return Err(Error::invalid("old label list does not match the source network"));
    }
    if plan.new_classes.len() != old_labels.len() + 1 {
        return Err(Error::invalid("exactly one new class is supported per transfer"));
    }
    let dataset = build_transfer_dataset(old, old_labels.len(), new, plan)?;
    let mut network = transplant(source, plan.new_classes.len(), plan.seed)?;
    let report = train_with(&mut network, &dataset, cfg, clock, on_log)?;
    Ok(TransferOutcome {
        network,
        report,
        dataset_len: dataset.len(),
    })
}
