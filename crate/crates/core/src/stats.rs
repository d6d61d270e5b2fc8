//! Monte Carlo bookkeeping: estimates with standard errors, replica fan-out,
//! and the two-sample Kolmogorov–Smirnov statistic.

use rayon::prelude::*;

use crate::rng::{StreamFactory, StreamRng};

/// A Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn proportion(hits: usize, samples: usize) -> Self {
        assert!(samples > 0, "proportion of zero samples");
        let p = hits as f64 / samples as f64;
        Self {
            value: p,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }

    pub fn mean_of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "mean of zero samples");
        let (mean, var) = mean_and_variance(values);
        Self {
            value: mean,
            stderr: (var / values.len() as f64).sqrt(),
            samples: values.len(),
        }
    }
}

/// Sample mean and unbiased sample variance (two-pass).
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Runs `f` once per replica, each with its own stream, and returns the
/// results in replica order regardless of scheduling.
pub fn replicate<T, F>(factory: StreamFactory, tag: u64, replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync,
{
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = factory.stream(tag, r);
            f(&mut rng)
        })
        .collect()
}

/// `sup_x |F_a(x) − F_b(x)|` for two integer samples.
pub fn ks_statistic(a: &[u64], b: &[u64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}
