mod common;

use common::*;

#[test]
fn each_layer_matches_finite_differences() {
    for (name, err) in layer_gradient_errors() {
        assert!(err < FD_TOLERANCE, "{name}: {err:e}");
    }
}

#[test]
fn conv_gradients_over_many_geometries() {
    for seed in 100..130 {
        let err = check_conv(seed);
        assert!(err < FD_TOLERANCE, "seed {seed}: {err:e}");
    }
}

#[test]
fn whole_network_backprop() {
    for seed in 0..3 {
        let err = check_network(seed, 24, FD_STEP);
        assert!(err < 1e-3, "seed {seed}: {err:e}");
    }
}
