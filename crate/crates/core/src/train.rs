//! Mini-batch SGD with momentum, L2 weight decay, and a step-wise learning
//! rate schedule.

use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::BinaryImage;
use crate::nn::{Gradients, ParamRole, ParamStore, Real};
use crate::scnn::{images_to_batch, Network};

/// One training or test example: a binary pattern and its class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub image: BinaryImage,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub momentum: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub lr_drop_factor: f64,
    pub lr_drop_period_epochs: usize,
    pub max_epochs: usize,
    /// Stop once this many consecutive logged losses fall below the threshold.
    pub loss_stop_threshold: Option<f64>,
    pub loss_stop_patience: usize,
    /// Hard cap on gradient steps.
    pub max_iterations: Option<usize>,
    pub log_every: usize,
    /// Layers `0..=k` are left untouched by the optimizer.
    pub freeze_through: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 0.01,
            momentum: 0.9,
            l2_lambda: 0.004,
            batch_size: 45,
            lr_drop_factor: 0.1,
            lr_drop_period_epochs: 8,
            max_epochs: 30,
            loss_stop_threshold: None,
            loss_stop_patience: 3,
            max_iterations: None,
            log_every: 10,
            freeze_through: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial learning rate", self.initial_lr),
            ("learning-rate drop factor", self.lr_drop_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::invalid("L2 factor must be >= 0"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid(
                "batch size must be >= 2 for batch normalization",
            ));
        }
        if self.lr_drop_period_epochs == 0 || self.max_epochs == 0 || self.log_every == 0 {
            return Err(Error::invalid(
                "drop period, epoch count and log interval must be >= 1",
            ));
        }
        Ok(())
    }
}

/// Learning rate in effect during 1-based `epoch`.
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    let drops = (epoch.max(1) - 1) / cfg.lr_drop_period_epochs;
    cfg.initial_lr * cfg.lr_drop_factor.powi(drops as i32)
}

/// `v <- momentum v - lr (g + l2 w);  w <- w + v`.
pub fn sgdm_update<T: Real>(
    w: &mut [T],
    g: &[T],
    v: &mut [T],
    lr: f64,
    momentum: f64,
    l2_lambda: f64,
) -> Result<()> {
    if w.len() != g.len() || w.len() != v.len() {
        return Err(Error::shape(format!(
            "parameter {} / gradient {} / velocity {} lengths differ",
            w.len(),
            g.len(),
            v.len()
        )));
    }
    let (lr, mu, l2) = (T::of(lr), T::of(momentum), T::of(l2_lambda));
    for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = mu * *v - lr * (g + l2 * *w);
        *w += *v;
    }
    Ok(())
}

/// One optimizer step over every learnable array. L2 decay applies to conv
/// and dense weights only. Layers up to `frozen_through` are skipped.
pub fn sgdm_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &Gradients<T>,
    lr: f64,
    momentum: f64,
    l2_lambda: f64,
    frozen_through: Option<usize>,
) -> Result<()> {
    if grads.layers.len() != params.layers.len() {
        return Err(Error::shape("gradient store does not match parameters"));
    }
    for (i, (layer, (layer_grads, layer_vel))) in params
        .layers
        .iter_mut()
        .zip(grads.layers.iter().zip(params.velocity.iter_mut()))
        .enumerate()
    {
        if frozen_through.is_some_and(|f| i <= f) {
            continue;
        }
        let arrays = layer.learnable_mut();
        if arrays.len() != layer_grads.len() || arrays.len() != layer_vel.len() {
            return Err(Error::shape(format!("layer {i}: array count mismatch")));
        }
        for (((w, role), g), v) in arrays.into_iter().zip(layer_grads).zip(layer_vel.iter_mut()) {
            let decay = if role == ParamRole::Weight { l2_lambda } else { 0.0 };
            sgdm_update(w, g, v, lr, momentum, decay)?;
        }
    }
    Ok(())
}

/// One row of the training progress table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRecord {
    pub epoch: usize,
    pub iteration: usize,
    /// `None` when the run was made without a wall clock.
    pub elapsed: Option<Duration>,
    /// Fraction in [0,1] of the mini-batch classified correctly before the update.
    pub accuracy: f64,
    pub loss: f64,
    pub learning_rate: f64,
}

pub const LOG_HEADER: &str = "Epoch\tIteration\tTime Elapsed (hh:mm:ss)\tMini-batch Accuracy\tMini-batch Loss\tBase Learning Rate";

/// Fixed-point rendering with at least four decimals and two significant digits.
pub fn format_learning_rate(lr: f64) -> String {
    let decimals = if lr > 0.0 {
        ((-lr.log10()).floor() as i64 + 1).max(4) as usize
    } else {
        4
    };
    format!("{lr:.decimals$}")
}

impl fmt::Display for TrainLogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let time = match self.elapsed {
            Some(d) => {
                let s = d.as_secs();
                format!("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
            }
            None => "--:--:--".to_string(),
        };
        write!(
            f,
            "{}\t{}\t{}\t{:.2}%\t{:.4}\t{}",
            self.epoch,
            self.iteration,
            time,
            100.0 * self.accuracy,
            self.loss,
            format_learning_rate(self.learning_rate)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub log: Vec<TrainLogRecord>,
    pub iterations: usize,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
}

/// Whether log timestamps come from the wall clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    Wall,
    Off,
}

pub fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub fn train<T: Real>(network: &mut Network<T>, data: &[LabeledImage], cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(network, data, cfg, Clock::Wall, |_| {})
}

/// [`train`] with a clock choice and a callback invoked for each log record.
pub fn train_with<T: Real>(
    network: &mut Network<T>,
    data: &[LabeledImage],
    cfg: &TrainConfig,
    clock: Clock,
    mut on_log: impl FnMut(&TrainLogRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.len() < cfg.batch_size {
        return Err(Error::invalid(format!(
            "{} training samples cannot fill one batch of {}",
            data.len(),
            cfg.batch_size
        )));
    }
    let k = network.num_classes();
    if let Some(s) = data.iter().find(|s| s.label >= k) {
        return Err(Error::invalid(format!(
            "label {} out of range for {k} classes",
            s.label
        )));
    }
    let channels = network.spec.input_shape.2;
    let per_epoch = data.len() / cfg.batch_size;
    let total_cap = cfg.max_iterations.unwrap_or(usize::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::new();
    let mut iteration = 0;
    let mut below = 0;
    let mut epochs = 0;

    'epochs: for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        let lr = lr_at(cfg, epoch);
        order.shuffle(&mut rng);
        for b in 0..per_epoch {
            iteration += 1;
            let idx = &order[b * cfg.batch_size..(b + 1) * cfg.batch_size];
            let images: Vec<&BinaryImage> = idx.iter().map(|&i| &data[i].image).collect();
            let targets: Vec<usize> = idx.iter().map(|&i| data[i].label).collect();
            let x = images_to_batch::<T>(&images, channels)?;
            let step = network.loss_and_gradients(&x, &targets)?;
            let correct = step
                .logits
                .data()
                .chunks_exact(k)
                .zip(&targets)
                .filter(|(row, &t)| argmax(row) == t)
                .count();
            sgdm_step(
                &mut network.params,
                &step.grads,
                lr,
                cfg.momentum,
                cfg.l2_lambda,
                cfg.freeze_through,
            )?;

            let loss = step.loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(Error::InvalidState(format!(
                    "loss became non-finite at iteration {iteration}"
                )));
            }
            let last_of_run = iteration >= total_cap || (epoch == cfg.max_epochs && b + 1 == per_epoch);
            if iteration == 1 || iteration % cfg.log_every == 0 || last_of_run {
                let record = TrainLogRecord {
                    epoch,
                    iteration,
                    elapsed: (clock == Clock::Wall).then(|| start.elapsed()),
                    accuracy: correct as f64 / targets.len() as f64,
                    loss,
                    learning_rate: lr,
                };
                on_log(&record);
                log.push(record);
                if let Some(threshold) = cfg.loss_stop_threshold {
                    below = if loss < threshold { below + 1 } else { 0 };
                    if below >= cfg.loss_stop_patience {
                        break 'epochs;
                    }
                }
            }
            if iteration >= total_cap {
                break 'epochs;
            }
        }
    }
    Ok(TrainReport {
        log,
        iterations: iteration,
        epochs,
        iterations_per_epoch: per_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_matches_progress_table() {
        let cfg = TrainConfig::default();
        assert_eq!(format_learning_rate(lr_at(&cfg, 1)), "0.0100");
        assert_eq!(format_learning_rate(lr_at(&cfg, 10)), "0.0010");
        assert_eq!(format_learning_rate(lr_at(&cfg, 15)), "0.0010");
        assert_eq!(format_learning_rate(lr_at(&cfg, 19)), "0.00010");
        assert_eq!(lr_at(&cfg, 8), 0.01);
        assert!((lr_at(&cfg, 9) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn plain_gradient_descent_when_no_momentum() {
        let mut w = [1.0f64, -2.0];
        let mut v = [0.0; 2];
        sgdm_update(&mut w, &[0.5, 0.25], &mut v, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(w, [0.95, -2.025]);
    }

    #[test]
    fn pure_inertia() {
        let mut w = [1.0f64];
        let mut v = [0.3];
        sgdm_update(&mut w, &[0.0], &mut v, 0.1, 0.9, 0.0).unwrap();
        assert!((w[0] - 1.27).abs() < 1e-15);
        assert!(sgdm_update(&mut w, &[0.0, 1.0], &mut v, 0.1, 0.9, 0.0).is_err());
    }

    #[test]
    fn quadratic_trajectory_matches_recurrence() {
        // loss w^2/2 -> grad w. Closed form of the coupled recurrence
        // [w, v]_{t+1} = A [w, v]_t with A = [[1 - lr, mu], [-lr, mu]].
        let (lr, mu) = (0.1f64, 0.9f64);
        let a = [[1.0 - lr, mu], [-lr, mu]];
        // A = P diag(l1, l2) P^-1 with complex eigenvalues; evaluate A^t by
        // repeated squaring as an independent route.
        fn mat_pow(a: [[f64; 2]; 2], mut t: u32) -> [[f64; 2]; 2] {
            let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
                let mut r = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                    }
                }
                r
            };
            let mut result = [[1.0, 0.0], [0.0, 1.0]];
            let mut base = a;
            while t > 0 {
                if t & 1 == 1 {
                    result = mul(result, base);
                }
                base = mul(base, base);
                t >>= 1;
            }
            result
        }
        let mut w = [2.0f64];
        let mut v = [0.0f64];
        for t in 1..=50u32 {
            let g = [w[0]];
            sgdm_update(&mut w, &g, &mut v, lr, mu, 0.0).unwrap();
            let p = mat_pow(a, t);
            let expect_w = p[0][0] * 2.0;
            let expect_v = p[1][0] * 2.0;
            assert!((w[0] - expect_w).abs() < 1e-10, "t={t}");
            assert!((v[0] - expect_v).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { batch_size: 1, ..Default::default() },
            TrainConfig { momentum: 1.0, ..Default::default() },
            TrainConfig { initial_lr: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn log_line_format() {
        let r = TrainLogRecord {
            epoch: 1,
            iteration: 1,
            elapsed: Some(Duration::from_secs(36)),
            accuracy: 10.0 / 45.0,
            loss: 1.6456,
            learning_rate: 0.01,
        };
        assert_eq!(r.to_string(), "1\t1\t00:00:36\t22.22%\t1.6456\t0.0100");
        assert_eq!(LOG_HEADER.split('\t').count(), 6);
    }
}
