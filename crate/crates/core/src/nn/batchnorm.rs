//! Per-channel batch normalization over the batch and spatial axes.

use crate::error::{Error, Result};
use crate::nn::{Mode, Real, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the old value in the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Real> BatchNormParams<T> {
    pub fn new(channels: usize) -> Self {
        BatchNormParams {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Train mode normalizes with batch statistics and folds them into the
    /// running estimates; infer mode uses the running estimates only.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
        match mode {
            Mode::Infer => Ok((
                batchnorm_infer(x, &self.gamma, &self.beta, &self.running_mean, &self.running_var)?,
                None,
            )),
            Mode::Train => {
                let (y, cache) = batchnorm_train(x, &self.gamma, &self.beta)?;
                let m = BN_MOMENTUM;
                let count = cache.count as f64;
                for c in 0..self.channels() {
                    let unbiased = cache.batch_var[c] * count / (count - 1.0);
                    let rm = self.running_mean[c].to_f64().unwrap_or(0.0);
                    let rv = self.running_var[c].to_f64().unwrap_or(1.0);
                    self.running_mean[c] = T::of(m * rm + (1.0 - m) * cache.batch_mean[c]);
                    self.running_var[c] = T::of(m * rv + (1.0 - m) * unbiased);
                }
                Ok((y, Some(cache)))
            }
        }
    }
}

/// Saved state of a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub x_hat: Tensor<T>,
    pub inv_std: Vec<T>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    count: usize,
}

fn check_params<T: Real>(x: &Tensor<T>, parts: &[&[T]]) -> Result<()> {
    let c = x.channels();
    if let Some(p) = parts.iter().find(|p| p.len() != c) {
        return Err(Error::shape(format!(
            "batchnorm parameter has {} channels, input has {c}",
            p.len()
        )));
    }
    Ok(())
}

pub fn batchnorm_train<T: Real>(x: &Tensor<T>, gamma: &[T], beta: &[T]) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    if x.batch() < 2 {
        return Err(Error::InvalidState(format!(
            "batch normalization in train mode needs batch >= 2, got {}",
            x.batch()
        )));
    }
    check_params(x, &[gamma, beta])?;
    let c = x.channels();
    let count = x.len() / c;

    let mut sum = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for (s, v) in sum.iter_mut().zip(px) {
            *s += v.to_f64().unwrap_or(f64::NAN);
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for ((s, v), m) in sq.iter_mut().zip(px).zip(&mean) {
            let d = v.to_f64().unwrap_or(f64::NAN) - m;
            *s += d * d;
        }
    }
    let var: Vec<f64> = sq.iter().map(|s| s / count as f64).collect();
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();

    let mut x_hat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    for ((xp, hp), yp) in x
        .data()
        .chunks_exact(c)
        .zip(x_hat.data_mut().chunks_exact_mut(c))
        .zip(y.data_mut().chunks_exact_mut(c))
    {
        for ch in 0..c {
            let h = T::of((xp[ch].to_f64().unwrap_or(f64::NAN) - mean[ch]) * inv_std[ch]);
            hp[ch] = h;
            yp[ch] = gamma[ch] * h + beta[ch];
        }
    }
    y.debug_check_finite("batchnorm_train");
    Ok((
        y,
        BatchNormCache {
            x_hat,
            inv_std: inv_std.iter().map(|&v| T::of(v)).collect(),
            batch_mean: mean,
            batch_var: var,
            count,
        },
    ))
}

pub fn batchnorm_infer<T: Real>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
) -> Result<Tensor<T>> {
    check_params(x, &[gamma, beta, running_mean, running_var])?;
    let c = x.channels();
    let eps = T::of(BN_EPSILON);
    let scale: Vec<T> = (0..c)
        .map(|ch| gamma[ch] / (running_var[ch] + eps).sqrt())
        .collect();
    let mut y = Tensor::zeros(x.shape());
    for (xp, yp) in x.data().chunks_exact(c).zip(y.data_mut().chunks_exact_mut(c)) {
        for ch in 0..c {
            yp[ch] = (xp[ch] - running_mean[ch]) * scale[ch] + beta[ch];
        }
    }
    y.debug_check_finite("batchnorm_infer");
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_gamma: Vec<T>,
    pub grad_beta: Vec<T>,
}

/// Exact gradient of [`batchnorm_train`], including the dependence of the
/// batch mean and variance on the input.
pub fn batchnorm_backward<T: Real>(
    cache: &BatchNormCache<T>,
    gamma: &[T],
    grad_out: &Tensor<T>,
) -> Result<BatchNormGrads<T>> {
    if grad_out.shape() != cache.x_hat.shape() {
        return Err(Error::shape(format!(
            "batchnorm gradient shape {:?}, expected {:?}",
            grad_out.shape(),
            cache.x_hat.shape()
        )));
    }
    let c = gamma.len();
    let mut sum_g = vec![0.0f64; c];
    let mut sum_gh = vec![0.0f64; c];
    for (gp, hp) in grad_out
        .data()
        .chunks_exact(c)
        .zip(cache.x_hat.data().chunks_exact(c))
    {
        for ch in 0..c {
            let g = gp[ch].to_f64().unwrap_or(f64::NAN);
            sum_g[ch] += g;
            sum_gh[ch] += g * hp[ch].to_f64().unwrap_or(f64::NAN);
        }
    }
    let m = cache.count as f64;
    let coef: Vec<f64> = (0..c)
        .map(|ch| gamma[ch].to_f64().unwrap_or(f64::NAN) * cache.inv_std[ch].to_f64().unwrap_or(f64::NAN) / m)
        .collect();
    let mut grad_x = Tensor::zeros(grad_out.shape());
    for ((gp, hp), dp) in grad_out
        .data()
        .chunks_exact(c)
        .zip(cache.x_hat.data().chunks_exact(c))
        .zip(grad_x.data_mut().chunks_exact_mut(c))
    {
        for ch in 0..c {
            let g = gp[ch].to_f64().unwrap_or(f64::NAN);
            let h = hp[ch].to_f64().unwrap_or(f64::NAN);
            dp[ch] = T::of(coef[ch] * (m * g - sum_g[ch] - h * sum_gh[ch]));
        }
    }
    Ok(BatchNormGrads {
        grad_x,
        grad_gamma: sum_gh.into_iter().map(T::of).collect(),
        grad_beta: sum_g.into_iter().map(T::of).collect(),
    })
}
