use proptest::prelude::*;

use scnn::eval::{metrics, ConfusionMatrix};
use scnn::imaging::{rgb_to_gray, BinaryImage, RgbImage};
use scnn::io::{Checkpoint, Pnm};
use scnn::nn::{maxpool_forward, relu, softmax, softmax_xent, PoolGeometry, Tensor};
use scnn::scnn::{build_compact, Network};
use scnn::train::{format_learning_rate, lr_at, TrainConfig};
use std::path::Path;

fn tensor(shape: [usize; 4]) -> impl Strategy<Value = Tensor<f64>> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-10.0f64..10.0, n).prop_map(move |d| Tensor::new(shape, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions(x in tensor([3, 1, 1, 7])) {
        let p = softmax(&x);
        for b in 0..3 {
            let row = p.item(b);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xent_is_nonnegative_and_gradient_rows_sum_to_zero(x in tensor([4, 1, 1, 5]), t in prop::collection::vec(0usize..5, 4)) {
        let (loss, grad) = softmax_xent(&x, &t).unwrap();
        prop_assert!(loss >= 0.0);
        for b in 0..4 {
            prop_assert!(grad.item(b).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn maxpool_picks_values_from_its_window(x in tensor([1, 6, 6, 2])) {
        let g = PoolGeometry { kernel: 2, stride: 2, padding: 0 };
        let (y, _) = maxpool_forward(&x, &g).unwrap();
        let top = x.data().iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(y.data().iter().all(|&v| v <= top && x.data().contains(&v)));
    }

    #[test]
    fn relu_is_idempotent(x in tensor([2, 3, 3, 2])) {
        let once = relu(&x);
        prop_assert_eq!(relu(&once), once.clone());
        prop_assert!(once.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gray_is_bounded_by_channels(px in prop::collection::vec(prop::array::uniform3(0.0f32..1.0), 12)) {
        let img = RgbImage::new(4, 3, px.clone()).unwrap();
        let gray = rgb_to_gray(&img);
        for (g, p) in gray.pixels().iter().zip(&px) {
            let lo = p.iter().cloned().fold(f32::MAX, f32::min);
            let hi = p.iter().cloned().fold(f32::MIN, f32::max);
            prop_assert!(*g >= lo - 1e-6 && *g <= hi + 1e-6);
        }
    }

    #[test]
    fn union_contains_both(a in prop::collection::vec(any::<bool>(), 64), b in prop::collection::vec(any::<bool>(), 64)) {
        let ia = BinaryImage::from_fn(8, 8, |x, y| a[y * 8 + x]);
        let ib = BinaryImage::from_fn(8, 8, |x, y| b[y * 8 + x]);
        let u = ia.union(&ib);
        prop_assert!(ia.is_subset_of(&u) && ib.is_subset_of(&u));
        prop_assert!(u.count_ones() <= ia.count_ones() + ib.count_ones());
    }

    #[test]
    fn pnm_round_trips(w in 1usize..9, h in 1usize..9, seed in any::<u64>(), rgb in any::<bool>()) {
        let bytes = |n: usize| (0..n).map(|i| (seed.wrapping_mul(i as u64 + 7) >> 13) as u8).collect::<Vec<u8>>();
        let img = if rgb {
            Pnm::Rgb { width: w, height: h, data: bytes(w * h * 3) }
        } else {
            Pnm::Gray { width: w, height: h, data: bytes(w * h) }
        };
        prop_assert_eq!(Pnm::decode(&img.encode(), Path::new("mem")).unwrap(), img);
    }

    #[test]
    fn learning_rate_never_rises(lr in 1e-5f64..1.0, factor in 0.01f64..1.0, period in 1usize..12) {
        let cfg = TrainConfig { initial_lr: lr, lr_drop_factor: factor, lr_drop_period_epochs: period, ..TrainConfig::default() };
        for e in 1..40 {
            prop_assert!(lr_at(&cfg, e + 1) <= lr_at(&cfg, e));
        }
        prop_assert!(format_learning_rate(lr).parse::<f64>().unwrap() > 0.0);
    }

    #[test]
    fn confusion_margins_are_consistent(counts in prop::collection::vec(prop::collection::vec(0u64..50, 4), 4)) {
        let labels: Vec<String> = (0..4).map(|i| format!("c{i}")).collect();
        let cm = ConfusionMatrix::from_counts(labels, counts).unwrap();
        prop_assert_eq!(cm.row_sums().iter().sum::<u64>(), cm.total());
        prop_assert_eq!(cm.column_sums().iter().sum::<u64>(), cm.total());
        let m = metrics(&cm, 0).unwrap();
        if cm.total() > 0 {
            prop_assert!((0.0..=1.0).contains(&m.accuracy));
        }
        for r in m.recall.iter().flatten().chain(m.precision.iter().flatten()) {
            prop_assert!((0.0..=1.0).contains(r));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), classes in 2usize..5) {
        let net: Network<f32> = Network::new(build_compact(8, 1, classes).unwrap(), seed).unwrap();
        let labels = (0..classes).map(|i| format!("k{i}")).collect();
        let ck = Checkpoint::new(net, labels).unwrap();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        prop_assert_eq!(back.to_bytes(), ck.to_bytes());
    }
}
