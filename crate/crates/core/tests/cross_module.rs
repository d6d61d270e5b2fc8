//! Checks that tie the full-configuration process to its lumped and coupled
//! descriptions.

use proptest::prelude::*;

use mixlab_core::coupling::{build_coupled_kernel, simulate_merge};
use mixlab_core::exclusion::{brute_force_tv_curve, simulate_w_trajectory};
use mixlab_core::lumped::{build_kernel, d_curve, evolve};
use mixlab_core::stats::replicate;
use mixlab_core::walk::{survival_exact, survival_monte_carlo, WalkParams};
use mixlab_core::{DistributionVector, Mode, ModelParams, StreamFactory};

#[test]
fn simulated_w_law_matches_evolution() {
    let p = ModelParams::new(20, 5).unwrap();
    let t = 30;
    let replicas = 200_000;
    let ends = replicate(StreamFactory::new(1), 0, replicas, |rng| {
        *simulate_w_trajectory(p, t, rng).last().unwrap()
    });
    let kernel = build_kernel(p).unwrap();
    let law = evolve(&DistributionVector::point_mass(6, 5).unwrap(), &kernel, t).unwrap();
    for (w, &prob) in law.probs().iter().enumerate() {
        let hits = ends.iter().filter(|&&e| e == w).count() as f64 / replicas as f64;
        let se = (prob * (1.0 - prob) / replicas as f64).sqrt();
        assert!(
            (hits - prob).abs() <= 4.0 * se + 1e-9,
            "w={w}: {hits} vs {prob}"
        );
    }
}

#[test]
fn coupling_tail_dominates_brute_force_distance() {
    let p = ModelParams::new(8, 4).unwrap();
    let brute = brute_force_tv_curve(p, Mode::Unlabeled, 40).unwrap();
    let kernel = build_coupled_kernel(p).unwrap();
    let replicas = 100_000;
    let merges = replicate(StreamFactory::new(2), 0, replicas, |rng| {
        simulate_merge(&kernel, 4, 0, 40, rng).unwrap()
    });
    for t in [0u64, 5, 10, 20, 40] {
        let alive = merges.iter().filter(|h| h.survives(t)).count() as f64 / replicas as f64;
        // binomial stderr at the larger of the two, since 0 hits gives an empirical stderr of 0
        let q = alive.max(brute[t as usize]);
        let se = (q * (1.0 - q) / replicas as f64).sqrt();
        assert!(
            brute[t as usize] <= alive + 4.0 * se + 1e-12,
            "t={t}: d={} tail={alive}",
            brute[t as usize]
        );
    }
}

#[test]
fn walk_survival_monte_carlo_matches_reflection() {
    let walk = WalkParams::new(0.2, 6).unwrap();
    let est = survival_monte_carlo(walk, 500, 100_000, StreamFactory::new(3));
    let exact = survival_exact(6, 500, 0.2);
    assert!(
        (est.value - exact).abs() <= 4.0 * est.stderr,
        "{} vs {exact}",
        est.value
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn labeled_distance_dominates_unlabeled(n in 2usize..=6, k_frac in 0.0f64..1.0, t in 0usize..30) {
        let k = 1 + ((n / 2 - 1) as f64 * k_frac).round() as usize;
        let p = ModelParams::new(n, k).unwrap();
        let lab = brute_force_tv_curve(p, Mode::Labeled, t).unwrap();
        let unl = brute_force_tv_curve(p, Mode::Unlabeled, t).unwrap();
        let lumped = d_curve(p, t).unwrap();
        prop_assert!(lab[t] >= unl[t] - 1e-12);
        prop_assert!((unl[t] - lumped.tv[t]).abs() <= 1e-12);
    }
}
