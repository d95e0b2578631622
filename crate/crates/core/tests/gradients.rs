mod common;

use common::gradcheck::check_seed;

#[test]
fn objective_gradients_match_finite_differences() {
    for seed in 100..104 {
        for c in check_seed(seed) {
            assert!(
                c.err <= c.limit,
                "seed {seed} {}: {:.3e} > {:.0e}",
                c.name,
                c.err,
                c.limit
            );
        }
    }
}
