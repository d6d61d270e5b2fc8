//! Coupon-collector lower bounds on the distance to equilibrium.
//!
//! While some vertex of `{1..k}` has never been touched by a selected pair,
//! the unlabeled chain has `W ≥ 1` and the labeled chain has that particle
//! fixed. Both events are rare at equilibrium, so the tail of the collection
//! time bounds the distance from below.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exclusion::ModelParams;
use crate::lumped::equilibrium;
use crate::rng::StreamFactory;
use crate::stats::{replicate, Estimate};
use crate::walk::geometric_from_uniform;

/// Collect `k − residual` distinct sites out of `{1..k}` with uniform draws
/// from `{1..n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollectorSpec {
    n: usize,
    k: usize,
    residual: usize,
}

impl CollectorSpec {
    pub fn new(n: usize, k: usize, residual: usize) -> Result<Self> {
        if !(residual < k && k <= n) {
            return Err(Error::InvalidCollector { n, k, residual });
        }
        Ok(Self { n, k, residual })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn residual(&self) -> usize {
        self.residual
    }

    /// Number of distinct sites to collect.
    pub fn target(&self) -> usize {
        self.k - self.residual
    }
}

/// Mean and variance of the single-draw collection time
/// `τ′ = Σ_{j=K+1}^{k} G_j`, `G_j` geometric with success `j/n`.
pub fn collector_moments(spec: CollectorSpec) -> (f64, f64) {
    let n = spec.n as f64;
    (spec.residual + 1..=spec.k).fold((0.0, 0.0), |(m, v), j| {
        let p = j as f64 / n;
        (m + 1.0 / p, v + (1.0 - p) / (p * p))
    })
}

/// Single draws `X′_1, X′_2, …` until `k − K` sites of `{1..k}` are seen.
///
/// Only draws landing in `{1..k}` matter, so the gaps between them are
/// sampled as geometric(k/n) and the landing site uniformly.
pub fn simulate_draw_count<R: Rng + ?Sized>(spec: CollectorSpec, rng: &mut R) -> u64 {
    let hit = spec.k as f64 / spec.n as f64;
    let mut seen = vec![false; spec.k];
    let mut distinct = 0;
    let mut draws = 0u64;
    while distinct < spec.target() {
        draws += geometric_from_uniform(rng.random(), hit);
        let site = rng.random_range(0..spec.k);
        if !seen[site] {
            seen[site] = true;
            distinct += 1;
        }
    }
    draws
}

/// Pair-step collection time `τ = ⌈τ′/2⌉`: each step selects two sites.
pub fn simulate_collection_time<R: Rng + ?Sized>(spec: CollectorSpec, rng: &mut R) -> u64 {
    simulate_draw_count(spec, rng).div_ceil(2)
}

/// `τ′` resampled as an independent sum of geometrics with means `n/j`.
pub fn geometric_sum_draw_count<R: Rng + ?Sized>(spec: CollectorSpec, rng: &mut R) -> u64 {
    (spec.residual + 1..=spec.k)
        .map(|j| geometric_from_uniform(rng.random(), j as f64 / spec.n as f64))
        .sum()
}

/// Chebyshev lower bound on `P[τ > t] = P[τ′ > 2t]`.
pub fn chebyshev_tail_lower(spec: CollectorSpec, t: u64) -> f64 {
    let (mean, var) = collector_moments(spec);
    let slack = mean - 2.0 * t as f64;
    if slack <= 0.0 {
        return 0.0;
    }
    (1.0 - var / (slack * slack)).max(0.0)
}

/// Exact `P[τ > t] = P[τ′ > 2t]` for every `t` in `times`, which must be
/// nondecreasing. The count of distinct sites seen after `m` draws is a
/// pure-birth chain leaving `c` with probability `(k − c)/n`; cost is
/// `O((k − K)·max t)`.
pub fn collection_tail_exact(spec: CollectorSpec, times: &[u64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("times must be nondecreasing".into()));
    }
    let target = spec.target();
    let n = spec.n as f64;
    let leave: Vec<f64> = (0..target).map(|c| (spec.k - c) as f64 / n).collect();
    // mass on counts below target; absorbed mass is dropped
    let mut alive = vec![0.0; target];
    alive[0] = 1.0;
    let mut draws = 0u64;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while draws < 2 * t {
            for c in (0..target).rev() {
                let stay = alive[c] * (1.0 - leave[c]);
                alive[c] = if c > 0 {
                    stay + alive[c - 1] * leave[c - 1]
                } else {
                    stay
                };
            }
            draws += 1;
        }
        out.push(alive.iter().sum::<f64>().clamp(0.0, 1.0));
    }
    Ok(out)
}

/// `π̄(W ≥ 1)`: the unlabeled bound is `P[τ > t]` minus this.
pub fn unlabeled_penalty(params: ModelParams) -> f64 {
    unlabeled_correction(params)
}

/// `1/K`: the labeled bound is `P[τ_K > t]` minus this.
pub fn labeled_penalty(spec: CollectorSpec) -> Result<f64> {
    if spec.residual == 0 {
        return Err(Error::InvalidArgument("labeled bound needs K >= 1".into()));
    }
    Ok(1.0 / spec.residual as f64)
}

/// `replicas` pair-step collection times, for tail estimates that share
/// paths across `t`.
pub fn collection_time_samples(
    spec: CollectorSpec,
    replicas: usize,
    factory: StreamFactory,
) -> Vec<u64> {
    replicate(factory, 0xb0, replicas, |rng| {
        simulate_collection_time(spec, rng)
    })
}

pub fn tail_from_samples(samples: &[u64], t: u64) -> Estimate {
    Estimate::proportion(samples.iter().filter(|&&s| s > t).count(), samples.len())
}

/// A lower bound on a distance, in two flavours: from a simulated tail
/// (with its standard error) and from the Chebyshev tail (deterministic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub simulated: f64,
    pub stderr: f64,
    pub certified: f64,
}

fn unlabeled_correction(params: ModelParams) -> f64 {
    // π̄(W ≥ 1), exact
    (1.0 - equilibrium(params).probs()[0]).max(0.0)
}

/// `P[τ > t] − π̄(W ≥ 1)` for the unlabeled chain, clamped at 0, evaluated
/// on a shared sample of collection times.
pub fn unlabeled_bound_from_samples(
    params: ModelParams,
    samples: &[u64],
    t: u64,
) -> Result<LowerBound> {
    let spec = CollectorSpec::new(params.n(), params.k(), 0)?;
    let correction = unlabeled_correction(params);
    let tail = tail_from_samples(samples, t);
    Ok(LowerBound {
        simulated: (tail.value - correction).max(0.0),
        stderr: tail.stderr,
        certified: (chebyshev_tail_lower(spec, t) - correction).max(0.0),
    })
}

pub fn unlabeled_tv_lower_bound(
    params: ModelParams,
    t: u64,
    replicas: usize,
    factory: StreamFactory,
) -> Result<LowerBound> {
    let spec = CollectorSpec::new(params.n(), params.k(), 0)?;
    let samples = collection_time_samples(spec, replicas, factory);
    unlabeled_bound_from_samples(params, &samples, t)
}

/// `P[τ_K > t] − 1/K` for the labeled chain, where `τ_K` is the time to
/// touch `k − K` sites of `{1..k}`: before it, at least `K` labels are fixed,
/// an event of equilibrium probability at most `1/K`.
pub fn labeled_bound_from_samples(
    samples: &[u64],
    spec: CollectorSpec,
    t: u64,
) -> Result<LowerBound> {
    if spec.residual == 0 {
        return Err(Error::InvalidArgument("labeled bound needs K >= 1".into()));
    }
    let penalty = 1.0 / spec.residual as f64;
    let tail = tail_from_samples(samples, t);
    Ok(LowerBound {
        simulated: (tail.value - penalty).max(0.0),
        stderr: tail.stderr,
        certified: (chebyshev_tail_lower(spec, t) - penalty).max(0.0),
    })
}

pub fn labeled_tv_lower_bound(
    params: ModelParams,
    t: u64,
    residual: usize,
    replicas: usize,
    factory: StreamFactory,
) -> Result<LowerBound> {
    let spec = CollectorSpec::new(params.n(), params.k(), residual)?;
    let samples = collection_time_samples(spec, replicas, factory);
    labeled_bound_from_samples(&samples, spec, t)
}

/// Times of the form `⌊x⌋` that fall below zero are read as 0.
pub fn clamp_time(x: f64) -> u64 {
    x.floor().max(0.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exclusion::{brute_force_tv_curve, Mode};
    use crate::lumped::d_curve;
    use crate::stats::{ks_critical, ks_statistic, mean_and_variance};

    fn p(n: usize, k: usize) -> ModelParams {
        ModelParams::new(n, k).unwrap()
    }

    #[test]
    fn exact_tail_matches_simulation_and_moments() {
        let spec = CollectorSpec::new(200, 8, 2).unwrap();
        let times = [0u64, 50, 150, 300, 600];
        let exact = collection_tail_exact(spec, &times).unwrap();
        assert_eq!(exact[0], 1.0);
        assert!(exact.windows(2).all(|w| w[1] <= w[0]));
        let samples = collection_time_samples(spec, 100_000, StreamFactory::new(77));
        for (&t, &e) in times.iter().zip(&exact) {
            let est = tail_from_samples(&samples, t);
            let se = (e * (1.0 - e) / 100_000.0).sqrt();
            assert!(
                (est.value - e).abs() <= 4.0 * se + 1e-12,
                "t={t}: {} vs {e}",
                est.value
            );
        }
        // E[τ′] = Σ_m P[τ′ > m]; summing pair-step tails over a long horizon
        let horizon: Vec<u64> = (0..20_000).collect();
        let tails = collection_tail_exact(spec, &horizon).unwrap();
        let (mean, _) = collector_moments(spec);
        // Σ_t P[τ′ > 2t] counts every other draw, so 2·Σ lies in [E[τ′], E[τ′] + 2]
        let twice: f64 = 2.0 * tails.iter().sum::<f64>();
        assert!(
            twice >= mean - 1e-6 && twice <= mean + 2.0 + 1e-6,
            "{twice} vs {mean}"
        );
        assert!(collection_tail_exact(spec, &[5, 3]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(CollectorSpec::new(4, 2, 2).is_err());
        assert!(CollectorSpec::new(4, 5, 0).is_err());
        assert_eq!(CollectorSpec::new(4, 2, 1).unwrap().target(), 1);
        assert!(labeled_tv_lower_bound(p(10, 3), 0, 3, 10, StreamFactory::new(1)).is_err());
    }

    #[test]
    fn moments_closed_form() {
        let (m, _) = collector_moments(CollectorSpec::new(4, 2, 0).unwrap());
        assert!((m - 6.0).abs() < 1e-15);
        let (m, v) = collector_moments(CollectorSpec::new(37, 1, 0).unwrap());
        assert!((m - 37.0).abs() < 1e-12);
        assert!((v - 36.0 * 37.0).abs() < 1e-9);
    }

    #[test]
    fn simulated_moments() {
        let spec = CollectorSpec::new(1000, 10, 0).unwrap();
        let draws: Vec<f64> = replicate(StreamFactory::new(3), 0, 100_000, |r| {
            simulate_draw_count(spec, r) as f64
        });
        let (mean, _) = mean_and_variance(&draws);
        let (m, _) = collector_moments(spec);
        assert!((mean / m - 1.0).abs() < 0.02);

        let single = CollectorSpec::new(1000, 10, 9).unwrap();
        let draws: Vec<f64> = replicate(StreamFactory::new(4), 0, 100_000, |r| {
            simulate_draw_count(single, r) as f64
        });
        let (mean, _) = mean_and_variance(&draws);
        assert!((mean / 100.0 - 1.0).abs() < 0.02, "{mean}");

        let spec = CollectorSpec::new(1000, 31, 0).unwrap();
        let draws: Vec<f64> = replicate(StreamFactory::new(5), 0, 100_000, |r| {
            simulate_draw_count(spec, r) as f64
        });
        let (_, var) = mean_and_variance(&draws);
        let (_, v) = collector_moments(spec);
        assert!((var / v - 1.0).abs() < 0.05);
    }

    #[test]
    fn collection_time_floor() {
        let spec = CollectorSpec::new(20, 10, 3).unwrap();
        let times = collection_time_samples(spec, 5000, StreamFactory::new(2));
        assert!(times.iter().all(|&t| t >= 7u64.div_ceil(2)));
    }

    #[test]
    fn law_matches_geometric_sum() {
        let spec = CollectorSpec::new(200, 20, 0).unwrap();
        let a = collection_time_samples(spec, 20_000, StreamFactory::new(7));
        let b: Vec<u64> = replicate(StreamFactory::new(8), 0, 20_000, |r| {
            geometric_sum_draw_count(spec, r).div_ceil(2)
        });
        assert!(ks_statistic(&a, &b) < ks_critical(0.01, a.len(), b.len()));
    }

    #[test]
    fn unlabeled_bound_below_exact() {
        let params = p(4, 2);
        let exact = d_curve(params, 30).unwrap();
        let spec = CollectorSpec::new(4, 2, 0).unwrap();
        let samples = collection_time_samples(spec, 20_000, StreamFactory::new(1));
        for t in 0..30u64 {
            let b = unlabeled_bound_from_samples(params, &samples, t).unwrap();
            assert!(b.simulated <= exact.tv[t as usize] + 1e-12);
            assert!(b.certified <= exact.tv[t as usize] + 1e-12);
        }
        let b0 = unlabeled_bound_from_samples(params, &samples, 0).unwrap();
        assert!((b0.simulated - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_bound_small_k_regime() {
        let params = p(10_000, 10);
        let t = clamp_time(params.center_small_k() - 3.0 * 10_000.0);
        let b = unlabeled_tv_lower_bound(params, t, 100_000, StreamFactory::new(9)).unwrap();
        let exact = d_curve(params, t as usize).unwrap();
        assert!(b.simulated >= 0.5);
        assert!(b.simulated <= exact.tv[t as usize]);
    }

    #[test]
    fn unlabeled_bound_nonincreasing() {
        let params = p(2000, 20);
        let spec = CollectorSpec::new(2000, 20, 0).unwrap();
        let samples = collection_time_samples(spec, 5000, StreamFactory::new(1));
        let vals: Vec<f64> = (0..5000)
            .step_by(50)
            .map(|t| {
                unlabeled_bound_from_samples(params, &samples, t)
                    .unwrap()
                    .simulated
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn labeled_bound_below_bruteforce() {
        let params = p(4, 2);
        let brute = brute_force_tv_curve(params, Mode::Labeled, 20).unwrap();
        let b = labeled_tv_lower_bound(params, 0, 1, 10_000, StreamFactory::new(1)).unwrap();
        assert!(b.simulated <= brute[0]);
        assert!((brute[0] - 11.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_is_a_lower_bound_on_simulated_tail() {
        let spec = CollectorSpec::new(1000, 100, 0).unwrap();
        let samples = collection_time_samples(spec, 20_000, StreamFactory::new(2));
        for t in [0u64, 500, 1000, 1500, 2000] {
            let tail = tail_from_samples(&samples, t);
            assert!(chebyshev_tail_lower(spec, t) <= tail.value + 4.0 * tail.stderr);
        }
    }
}
