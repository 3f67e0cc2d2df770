mod common;

use tasnet::agent::Variant;

#[test]
fn double_double_arithmetic_is_accurate() {
    common::dd::self_check();
}

#[test]
fn log_policy_gradient_matches_central_differences_for_every_variant() {
    for variant in Variant::ALL {
        for seed in 0..10 {
            let err = common::policy_gradient_error(variant, 1_000 + seed);
            assert!(err <= 1e-5, "{variant} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn sampling_penalty_gradient_matches_central_differences() {
    for variant in Variant::ALL {
        for seed in 0..5 {
            let err = common::regularizer_gradient_error(variant, 2_000 + seed);
            assert!(err <= 1e-5, "{variant} seed {seed}: relative error {err:e}");
        }
    }
}
