mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let inst = common::GradInstance::random(&mut rng);
        for (name, err) in common::max_grad_errors(&inst) {
            assert!(err < 1e-4, "case {case}: {name} relative error {err:e}");
        }
    }
}
