use crate::error::{Error, Result};
use crate::imaging::BinaryImage;
use crate::nn::batchnorm::BatchNormCache;
use crate::nn::{
    batchnorm_backward, conv2d_backward, conv2d_forward, fc_backward, fc_forward, init_params,
    maxpool_backward, maxpool_forward, relu, relu_backward, softmax_xent, Gradients, LayerKind,
    LayerParams, Mode, ParamStore, PoolIndex, Real, Tensor,
};
use crate::scnn::NetworkSpec;

/// A network description together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    pub spec: NetworkSpec,
    pub params: ParamStore<T>,
}

/// What a train-mode forward pass keeps for the backward pass.
#[derive(Debug)]
enum LayerCache<T> {
    Conv { input: Tensor<T> },
    BatchNorm(BatchNormCache<T>),
    Relu { input: Tensor<T> },
    Pool(PoolIndex),
    Dense { input: Tensor<T> },
    Identity,
}

#[derive(Debug)]
pub struct ForwardTrace<T> {
    caches: Vec<LayerCache<T>>,
}

/// Result of one forward + backward pass on a labeled batch.
#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    pub loss: T,
    pub logits: Tensor<T>,
    pub grads: Gradients<T>,
}

impl<T: Real> Network<T> {
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let params = init_params(&spec, seed)?;
        Ok(Network { spec, params })
    }

    pub fn from_parts(spec: NetworkSpec, params: ParamStore<T>) -> Result<Self> {
        spec.validate()?;
        if params.layers.len() != spec.layers.len() {
            return Err(Error::shape(format!(
                "{} parameter entries for {} layers",
                params.layers.len(),
                spec.layers.len()
            )));
        }
        let inputs = spec.input_shapes()?;
        for ((layer, got), (h, w, c)) in spec.layers.iter().zip(&params.layers).zip(inputs) {
            let sizes: Vec<usize> = got.learnable().iter().map(|(a, _)| a.len()).collect();
            let fits = match (layer.kind, got) {
                (LayerKind::Conv { kernel: (kh, kw), out_channels, .. }, LayerParams::Conv { .. }) => {
                    sizes == [kh * kw * c * out_channels, out_channels]
                }
                (LayerKind::FullyConnected { out_units }, LayerParams::Dense { .. }) => {
                    sizes == [h * w * c * out_units, out_units]
                }
                (LayerKind::BatchNorm, LayerParams::BatchNorm(bn)) => {
                    sizes == [c, c] && bn.running_mean.len() == c && bn.running_var.len() == c
                }
                (LayerKind::Relu | LayerKind::MaxPool { .. } | LayerKind::SoftmaxXent, LayerParams::None) => true,
                _ => false,
            };
            if !fits {
                return Err(Error::shape(format!("parameters do not fit layer {}", layer.name)));
            }
        }
        Ok(Network { spec, params })
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (h, w, c) = self.spec.input_shape;
        if x.shape()[1..] != [h, w, c] {
            return Err(Error::shape(format!(
                "network expects {h}x{w}x{c} inputs, got {:?}",
                &x.shape()[1..]
            )));
        }
        Ok(())
    }

    /// Infer-mode output of layer `last` (inclusive). Pure.
    pub fn infer_through(&self, x: &Tensor<T>, last: usize) -> Result<Tensor<T>> {
        self.check_input(x)?;
        if last >= self.spec.layers.len() {
            return Err(Error::invalid(format!("layer index {last} out of range")));
        }
        let mut cur = x.clone();
        for (i, layer) in self.spec.layers.iter().enumerate().take(last + 1) {
            let c_in = cur.channels();
            cur = match (&layer.kind, &self.params.layers[i]) {
                (LayerKind::Conv { .. }, LayerParams::Conv { weights, bias }) => {
                    conv2d_forward(&cur, weights, bias, &layer.conv_geometry(c_in).expect("conv"))?
                }
                (LayerKind::BatchNorm, LayerParams::BatchNorm(bn)) => crate::nn::batchnorm_infer(
                    &cur,
                    &bn.gamma,
                    &bn.beta,
                    &bn.running_mean,
                    &bn.running_var,
                )?,
                (LayerKind::Relu, _) => relu(&cur),
                (LayerKind::MaxPool { .. }, _) => {
                    maxpool_forward(&cur, &layer.pool_geometry().expect("pool"))?.0
                }
                (LayerKind::FullyConnected { .. }, LayerParams::Dense { weights, bias }) => {
                    fc_forward(&cur, weights, bias)?
                }
                (LayerKind::SoftmaxXent, _) => cur,
                _ => return Err(Error::InvalidState(format!("parameters missing for {}", layer.name))),
            };
        }
        Ok(cur)
    }

    /// Infer-mode logits `(n, 1, 1, K)`.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.infer_through(x, self.spec.layers.len() - 1)
    }

    /// Logits in either mode; train mode updates batchnorm running statistics.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => self.forward_train(x).map(|(logits, _)| logits),
        }
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, ForwardTrace<T>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let c_in = cur.channels();
            let (next, cache) = match (&layer.kind, &mut self.params.layers[i]) {
                (LayerKind::Conv { .. }, LayerParams::Conv { weights, bias }) => {
                    let y = conv2d_forward(&cur, weights, bias, &layer.conv_geometry(c_in).expect("conv"))?;
                    (y, LayerCache::Conv { input: cur })
                }
                (LayerKind::BatchNorm, LayerParams::BatchNorm(bn)) => {
                    let (y, cache) = bn.forward(&cur, Mode::Train)?;
                    (y, LayerCache::BatchNorm(cache.expect("train mode cache")))
                }
                (LayerKind::Relu, _) => (relu(&cur), LayerCache::Relu { input: cur }),
                (LayerKind::MaxPool { .. }, _) => {
                    let (y, idx) = maxpool_forward(&cur, &layer.pool_geometry().expect("pool"))?;
                    (y, LayerCache::Pool(idx))
                }
                (LayerKind::FullyConnected { .. }, LayerParams::Dense { weights, bias }) => {
                    let y = fc_forward(&cur, weights, bias)?;
                    (y, LayerCache::Dense { input: cur })
                }
                (LayerKind::SoftmaxXent, _) => (cur, LayerCache::Identity),
                _ => return Err(Error::InvalidState(format!("parameters missing for {}", layer.name))),
            };
            caches.push(cache);
            cur = next;
        }
        Ok((cur, ForwardTrace { caches }))
    }

    /// Gradients of every learnable array given the loss gradient w.r.t. the logits.
    pub fn backward(&self, trace: ForwardTrace<T>, grad_logits: Tensor<T>) -> Result<Gradients<T>> {
        if trace.caches.len() != self.spec.layers.len() {
            return Err(Error::InvalidState("trace does not belong to this network".into()));
        }
        let mut grads = Gradients::zeros_like(&self.params);
        let mut g = grad_logits;
        for (i, cache) in trace.caches.into_iter().enumerate().rev() {
            let layer = &self.spec.layers[i];
            g = match (cache, &self.params.layers[i]) {
                (LayerCache::Conv { input }, LayerParams::Conv { weights, .. }) => {
                    let geo = layer.conv_geometry(input.channels()).expect("conv");
                    let cg = conv2d_backward(&input, weights, &g, &geo)?;
                    grads.layers[i] = vec![cg.grad_w, cg.grad_b];
                    cg.grad_x
                }
                (LayerCache::BatchNorm(cache), LayerParams::BatchNorm(bn)) => {
                    let bg = batchnorm_backward(&cache, &bn.gamma, &g)?;
                    grads.layers[i] = vec![bg.grad_gamma, bg.grad_beta];
                    bg.grad_x
                }
                (LayerCache::Relu { input }, _) => relu_backward(&input, &g)?,
                (LayerCache::Pool(idx), _) => maxpool_backward(&idx, &g)?,
                (LayerCache::Dense { input }, LayerParams::Dense { weights, .. }) => {
                    let dg = fc_backward(&input, weights, &g)?;
                    grads.layers[i] = vec![dg.grad_w, dg.grad_b];
                    dg.grad_x
                }
                (LayerCache::Identity, _) => g,
                _ => return Err(Error::InvalidState(format!("cache mismatch at {}", layer.name))),
            };
        }
        Ok(grads)
    }

    /// Train-mode forward, mean cross-entropy, and backward.
    pub fn loss_and_gradients(&mut self, x: &Tensor<T>, targets: &[usize]) -> Result<StepOutput<T>> {
        let (logits, trace) = self.forward_train(x)?;
        let (loss, grad_logits) = softmax_xent(&logits, targets)?;
        let grads = self.backward(trace, grad_logits)?;
        Ok(StepOutput { loss, logits, grads })
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            params: self.params.cast(),
        }
    }
}

/// Stacks binary images into a `(n, h, w, channels)` batch of 0/1 values,
/// replicating the single plane across channels.
pub fn images_to_batch<T: Real>(images: &[&BinaryImage], channels: usize) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::invalid("empty batch"))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(images.len() * w * h * channels);
    for img in images {
        if (img.width(), img.height()) != (w, h) {
            return Err(Error::shape("images in a batch must share dimensions"));
        }
        for &p in img.pixels() {
            let v = if p != 0 { T::one() } else { T::zero() };
            for _ in 0..channels {
                data.push(v);
            }
        }
    }
    Tensor::new([images.len(), h, w, channels], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scnn::build_compact;

    fn tiny(seed: u64) -> Network<f64> {
        Network::new(build_compact(8, 1, 3).unwrap(), seed).unwrap()
    }

    fn batch(n: usize, seed: u64) -> Tensor<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn([n, 8, 8, 1], |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn infer_rows_follow_batch_permutation() {
        let net = tiny(1);
        let x = batch(4, 2);
        let logits = net.infer(&x).unwrap();
        let perm = [2, 0, 3, 1];
        let permuted = net.infer(&x.select(&perm)).unwrap();
        assert_eq!(permuted, logits.select(&perm));
        let dup = net.infer(&x.select(&[1, 1])).unwrap();
        assert_eq!(dup.item(0), dup.item(1));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let net = tiny(1);
        assert!(net.infer(&Tensor::zeros([1, 8, 9, 1])).is_err());
    }

    #[test]
    fn fc2_bias_gradient_closed_form() {
        let mut net = tiny(3);
        let head = net.spec.head_index();
        if let LayerParams::Dense { weights, bias } = &mut net.params.layers[head] {
            weights.fill(0.0);
            bias.fill(0.0);
        }
        let x = batch(3, 4);
        let targets = [0, 2, 2];
        let out = net.loss_and_gradients(&x, &targets).unwrap();
        // Zero head -> uniform probabilities 1/3.
        let expect: Vec<f64> = (0..3)
            .map(|k| {
                targets
                    .iter()
                    .map(|&t| 1.0 / 3.0 - (t == k) as u8 as f64)
                    .sum::<f64>()
                    / 3.0
            })
            .collect();
        for (g, e) in out.grads.layers[head][1].iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_batch_keeps_mean_gradient() {
        let x = batch(3, 5);
        let targets = [0, 1, 2];
        let a = tiny(6).loss_and_gradients(&x, &targets).unwrap();
        let x2 = x.select(&[0, 1, 2, 0, 1, 2]);
        let b = tiny(6).loss_and_gradients(&x2, &[0, 1, 2, 0, 1, 2]).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-9);
        for (ga, gb) in a.grads.iter().zip(b.grads.iter()) {
            assert!((ga - gb).abs() < 1e-6, "{ga} vs {gb}");
        }
    }

    #[test]
    fn images_become_zero_one_batches() {
        let a = BinaryImage::from_fn(3, 2, |x, _| x == 1);
        let t: Tensor<f32> = images_to_batch(&[&a, &a], 3).unwrap();
        assert_eq!(t.shape(), [2, 2, 3, 3]);
        assert_eq!(t.at([1, 1, 1, 2]), 1.0);
        assert_eq!(t.at([0, 0, 0, 0]), 0.0);
    }
}
