//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scnn::action_pattern::{background_model, subtract_and_enhance, FrameSequence, DEFAULT_BACKGROUND_STRIDE};
use scnn::imaging::{canny_vertical, BinaryImage};
use scnn::nn::{
    batchnorm_backward, batchnorm_train, conv2d_backward, conv2d_forward, fc_backward, fc_forward,
    maxpool_backward, maxpool_forward, relu, relu_backward, softmax_xent, ConvGeometry, Mode,
    PoolGeometry, Tensor,
};
use scnn::scnn::{build_compact, Network};

pub const FD_STEP: f64 = 1e-3;
pub const FD_CASES: usize = 20;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Kink and tie exclusion margin, a little more than one step.
const MARGIN: f64 = 2.5e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn with_data(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::new(t.shape(), data.to_vec()).unwrap()
}

pub fn check_conv(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = r.gen_range(1..=3);
    let stride = r.gen_range(1..=2);
    let padding = r.gen_range(0..k);
    let mut dim = || {
        let mut d = r.gen_range(k.max(3)..=7);
        while (d + 2 * padding - k) % stride != 0 {
            d += 1;
        }
        d
    };
    let (h, w) = (dim(), dim());
    let g = ConvGeometry {
        kh: k,
        kw: k,
        c_in: r.gen_range(1..=3),
        c_out: r.gen_range(1..=3),
        stride,
        padding,
    };
    let n = r.gen_range(1..=2);
    let x = random_tensor(&mut r, [n, h, w, g.c_in]);
    let wt = random_vec(&mut r, g.weight_len());
    let b = random_vec(&mut r, g.c_out);
    let y = conv2d_forward(&x, &wt, &b, &g).unwrap();
    let proj = random_tensor(&mut r, y.shape());
    let grads = conv2d_backward(&x, &wt, &proj, &g).unwrap();
    let loss = |x: &Tensor<f64>, wt: &[f64], b: &[f64]| dot(conv2d_forward(x, wt, b, &g).unwrap().data(), proj.data());
    let nx = numeric_gradient(x.data(), |v| loss(&with_data(&x, v), &wt, &b));
    let nw = numeric_gradient(&wt, |v| loss(&x, v, &b));
    let nb = numeric_gradient(&b, |v| loss(&x, &wt, v));
    relative_error(grads.grad_x.data(), &nx)
        .max(relative_error(&grads.grad_w, &nw))
        .max(relative_error(&grads.grad_b, &nb))
}

pub fn check_batchnorm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [r.gen_range(2..=4), r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3)];
    let x = Tensor::from_fn(shape, |_| r.gen_range(-2.0..2.0));
    let c = shape[3];
    let gamma: Vec<f64> = (0..c).map(|_| r.gen_range(0.5..1.5)).collect();
    let beta = random_vec(&mut r, c);
    let (y, cache) = batchnorm_train(&x, &gamma, &beta).unwrap();
    let proj = random_tensor(&mut r, y.shape());
    let grads = batchnorm_backward(&cache, &gamma, &proj).unwrap();
    let loss = |x: &Tensor<f64>, g: &[f64], b: &[f64]| dot(batchnorm_train(x, g, b).unwrap().0.data(), proj.data());
    let nx = numeric_gradient(x.data(), |v| loss(&with_data(&x, v), &gamma, &beta));
    let ng = numeric_gradient(&gamma, |v| loss(&x, v, &beta));
    let nb = numeric_gradient(&beta, |v| loss(&x, &gamma, v));
    relative_error(grads.grad_x.data(), &nx)
        .max(relative_error(&grads.grad_gamma, &ng))
        .max(relative_error(&grads.grad_beta, &nb))
}

pub fn check_relu(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [r.gen_range(1..=3), r.gen_range(1..=5), r.gen_range(1..=5), r.gen_range(1..=3)];
    let x = Tensor::from_fn(shape, |_| loop {
        let v: f64 = r.gen_range(-1.0..1.0);
        if v.abs() > MARGIN {
            break v;
        }
    });
    let proj = random_tensor(&mut r, shape);
    let analytic = relu_backward(&x, &proj).unwrap();
    let numeric = numeric_gradient(x.data(), |v| dot(relu(&with_data(&x, v)).data(), proj.data()));
    relative_error(analytic.data(), &numeric)
}

/// Values of the in-bounds cells of each pooling window.
fn pool_windows(x: &Tensor<f64>, g: &PoolGeometry) -> Vec<Vec<f64>> {
    let [n, h, w, c] = x.shape();
    let (oh, ow) = g.output_dims(h, w).unwrap();
    let mut out = Vec::new();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut cells = Vec::new();
                    for ky in 0..g.kernel {
                        for kx in 0..g.kernel {
                            let y = (oy * g.stride + ky) as isize - g.padding as isize;
                            let xx = (ox * g.stride + kx) as isize - g.padding as isize;
                            if (0..h as isize).contains(&y) && (0..w as isize).contains(&xx) {
                                cells.push(x.at([b, y as usize, xx as usize, ch]));
                            }
                        }
                    }
                    out.push(cells);
                }
            }
        }
    }
    out
}

fn has_near_tie(cells: &[f64]) -> bool {
    let mut sorted = cells.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted.len() > 1 && sorted[0] - sorted[1] < MARGIN
}

pub fn check_maxpool(seed: u64) -> f64 {
    let mut r = rng(seed);
    let kernel = r.gen_range(2..=3);
    let g = PoolGeometry {
        kernel,
        stride: r.gen_range(1..=3),
        padding: r.gen_range(0..kernel),
    };
    let shape = [r.gen_range(1..=2), r.gen_range(kernel..=6), r.gen_range(kernel..=6), r.gen_range(1..=3)];
    let x = loop {
        let x = random_tensor(&mut r, shape);
        if !pool_windows(&x, &g).iter().any(|c| has_near_tie(c)) {
            break x;
        }
    };
    let (y, idx) = maxpool_forward(&x, &g).unwrap();
    let proj = random_tensor(&mut r, y.shape());
    let analytic = maxpool_backward(&idx, &proj).unwrap();
    let numeric = numeric_gradient(x.data(), |v| {
        dot(maxpool_forward(&with_data(&x, v), &g).unwrap().0.data(), proj.data())
    });
    relative_error(analytic.data(), &numeric)
}

pub fn check_dense(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3)];
    let fan_in = shape[1] * shape[2] * shape[3];
    let out = r.gen_range(1..=5);
    let x = random_tensor(&mut r, shape);
    let w = random_vec(&mut r, fan_in * out);
    let b = random_vec(&mut r, out);
    let y = fc_forward(&x, &w, &b).unwrap();
    let proj = random_tensor(&mut r, y.shape());
    let grads = fc_backward(&x, &w, &proj).unwrap();
    let loss = |x: &Tensor<f64>, w: &[f64], b: &[f64]| dot(fc_forward(x, w, b).unwrap().data(), proj.data());
    let nx = numeric_gradient(x.data(), |v| loss(&with_data(&x, v), &w, &b));
    let nw = numeric_gradient(&w, |v| loss(&x, v, &b));
    let nb = numeric_gradient(&b, |v| loss(&x, &w, v));
    relative_error(grads.grad_x.data(), &nx)
        .max(relative_error(&grads.grad_w, &nw))
        .max(relative_error(&grads.grad_b, &nb))
}

pub fn check_softmax_xent(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, k) = (r.gen_range(1..=4), r.gen_range(2..=6));
    let logits = Tensor::from_fn([n, 1, 1, k], |_| r.gen_range(-3.0..3.0));
    let targets: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
    let (_, grad) = softmax_xent(&logits, &targets).unwrap();
    let numeric = numeric_gradient(logits.data(), |v| softmax_xent(&with_data(&logits, v), &targets).unwrap().0);
    relative_error(grad.data(), &numeric)
}

/// Worst relative error over `FD_CASES` seeded cases for each layer kind.
pub fn layer_gradient_errors() -> Vec<(&'static str, f64)> {
    let checks: [(&str, fn(u64) -> f64); 6] = [
        ("conv", check_conv),
        ("batchnorm", check_batchnorm),
        ("relu", check_relu),
        ("maxpool", check_maxpool),
        ("dense", check_dense),
        ("softmax-xent", check_softmax_xent),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let worst = (0..FD_CASES as u64).map(|s| f(1000 + s)).fold(0.0, f64::max);
            (*name, worst)
        })
        .collect()
}

/// Whole-network check on a small compact variant: analytic parameter
/// gradients against central differences on a seeded subset of parameters.
pub fn check_network(seed: u64, probes: usize, step: f64) -> f64 {
    let mut r = rng(seed);
    let mut net: Network<f64> = Network::new(build_compact(8, 1, 3).unwrap(), seed).unwrap();
    let x = random_tensor(&mut r, [3, 8, 8, 1]);
    let targets: Vec<usize> = (0..3).map(|_| r.gen_range(0..3)).collect();
    let analytic = net.loss_and_gradients(&x, &targets).unwrap().grads;
    let mut picks = Vec::new();
    for (li, arrays) in analytic.layers.iter().enumerate() {
        for (ai, a) in arrays.iter().enumerate() {
            for _ in 0..probes.min(a.len()) {
                picks.push((li, ai, r.gen_range(0..a.len())));
            }
        }
    }
    let loss_with = |li: usize, ai: usize, ei: usize, delta: f64| {
        let mut probe = net.clone();
        probe.params.layers[li].learnable_mut()[ai].0[ei] += delta;
        let logits = probe.forward(&x, Mode::Train).unwrap();
        softmax_xent(&logits, &targets).unwrap().0
    };
    let (mut a, mut n) = (Vec::new(), Vec::new());
    for &(li, ai, ei) in &picks {
        a.push(analytic.layers[li][ai][ei]);
        n.push((loss_with(li, ai, ei, step) - loss_with(li, ai, ei, -step)) / (2.0 * step));
    }
    relative_error(&a, &n)
}

/// Straightforward nested-loop convolution.
pub fn naive_conv(x: &Tensor<f64>, w: &[f64], b: &[f64], g: &ConvGeometry) -> Tensor<f64> {
    let [n, h, wd, c_in] = x.shape();
    let oh = (h + 2 * g.padding - g.kh) / g.stride + 1;
    let ow = (wd + 2 * g.padding - g.kw) / g.stride + 1;
    Tensor::from_fn([n, oh, ow, g.c_out], |[bi, oy, ox, co]| {
        let mut acc = b[co];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let y = (oy * g.stride + ky) as isize - g.padding as isize;
                let xx = (ox * g.stride + kx) as isize - g.padding as isize;
                if y < 0 || xx < 0 || y >= h as isize || xx >= wd as isize {
                    continue;
                }
                for ci in 0..c_in {
                    acc += x.at([bi, y as usize, xx as usize, ci]) * w[((ky * g.kw + kx) * c_in + ci) * g.c_out + co];
                }
            }
        }
        acc
    })
}

/// A random conv setting whose stride tiles the padded input.
pub fn random_conv_case(seed: u64) -> (Tensor<f64>, Vec<f64>, Vec<f64>, ConvGeometry) {
    let mut r = rng(seed);
    let kh = r.gen_range(1..=5);
    let kw = r.gen_range(1..=5);
    let stride = r.gen_range(1..=3);
    let padding = r.gen_range(0..=2);
    let mut fit = |k: usize| {
        let mut d = r.gen_range(k.max(1)..=12);
        while d + 2 * padding < k || !(d + 2 * padding - k).is_multiple_of(stride) {
            d += 1;
        }
        d
    };
    let (h, w) = (fit(kh), fit(kw));
    let g = ConvGeometry {
        kh,
        kw,
        c_in: r.gen_range(1..=4),
        c_out: r.gen_range(1..=5),
        stride,
        padding,
    };
    let n = r.gen_range(1..=3);
    let x = random_tensor(&mut r, [n, h, w, g.c_in]);
    let wt = random_vec(&mut r, g.weight_len());
    let b = random_vec(&mut r, g.c_out);
    (x, wt, b, g)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Action pattern built step by step: median background, then vertical
/// Canny on every other enhanced frame, OR-ed together.
pub fn oracle_api(seq: &FrameSequence) -> BinaryImage {
    let bg = background_model(seq, DEFAULT_BACKGROUND_STRIDE).unwrap();
    let mut out = BinaryImage::zeros(seq.width(), seq.height());
    for frame in seq.frames().iter().step_by(2) {
        let edges = canny_vertical(&subtract_and_enhance(frame, &bg).unwrap()).unwrap();
        out = out.union(&edges);
    }
    out
}
