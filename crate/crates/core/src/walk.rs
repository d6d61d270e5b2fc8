//! Lazy nearest-neighbour walk on ℤ: from `x` it moves to `x ± 1` with
//! probability `q/2` each and stays with probability `1 − q`.
//!
//! Survival until the first visit to 0 is computed two ways: through the
//! reflection identity `Q^m[τ′ > N] = Q[X_N ∈ [−m+1, m]]` on the free walk,
//! and by dynamic programming on the half-line with 0 absorbing.

use rand::Rng;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::rng::StreamFactory;
use crate::stats::{replicate, Estimate};

/// Tail cells lighter than this are dropped from the free-walk law.
const TRIM: f64 = 1e-40;
/// Largest mass the trimming may discard in a single step.
const TRIM_LOSS_PER_STEP: f64 = 1e-14;
/// Horizon limit of the dynamic-programming oracle.
pub const BRUTEFORCE_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    q: f64,
    start: u64,
}

impl WalkParams {
    pub fn new(q: f64, start: u64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "walk move probability q = {q} not in (0,1]"
            )));
        }
        if start == 0 {
            return Err(Error::InvalidArgument(
                "walk must start at a positive site".into(),
            ));
        }
        Ok(Self { q, start })
    }

    /// Start `⌈α·s⌉` with `s² = q·n`, the scaling of the Gaussian limit.
    pub fn scaled(q: f64, n: usize, alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} must be positive"
            )));
        }
        let s = (q * n as f64).sqrt();
        Self::new(q, (alpha * s).ceil() as u64)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn start(&self) -> u64 {
        self.start
    }
}

/// `Q^m[τ′ > steps]` through the reflection identity, by exact convolution
/// of the three-point step law.
pub fn survival_exact(m: u64, steps: usize, q: f64) -> f64 {
    assert!(m >= 1, "start must be positive");
    // law of X_t started from 0, on offsets lo..lo+probs.len()
    let mut lo: i64 = 0;
    let mut probs = vec![1.0f64];
    let mut next: Vec<f64> = Vec::new();
    let (hold, side) = (1.0 - q, q / 2.0);
    for _ in 0..steps {
        let len = probs.len();
        next.clear();
        next.resize(len + 2, 0.0);
        for (j, &p) in probs.iter().enumerate() {
            next[j] += side * p;
            next[j + 1] += hold * p;
            next[j + 2] += side * p;
        }
        lo -= 1;
        let mut start = 0;
        let mut end = next.len();
        let mut lost = 0.0;
        while end - start > 1 && next[start] < TRIM {
            lost += next[start];
            start += 1;
            lo += 1;
        }
        while end - start > 1 && next[end - 1] < TRIM {
            lost += next[end - 1];
            end -= 1;
        }
        assert!(lost <= TRIM_LOSS_PER_STEP, "trimmed mass {lost} per step");
        probs.clear();
        probs.extend_from_slice(&next[start..end]);
    }
    let (a, b) = (1 - m as i64, m as i64);
    probs
        .iter()
        .enumerate()
        .filter(|(j, _)| (a..=b).contains(&(lo + *j as i64)))
        .map(|(_, p)| p)
        .sum::<f64>()
        .min(1.0)
}

/// `Q^m[τ′ > steps]` by forward dynamic programming on `{1, 2, …}` with the
/// mass reaching 0 removed.
pub fn survival_bruteforce(m: u64, steps: usize, q: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("start must be positive".into()));
    }
    if steps > BRUTEFORCE_MAX_STEPS {
        return Err(Error::InvalidArgument(format!(
            "brute-force survival limited to {BRUTEFORCE_MAX_STEPS} steps"
        )));
    }
    let width = m as usize + steps + 2;
    // index x holds the mass at site x; index 0 is the absorbed sink
    let mut cur = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    cur[m as usize] = 1.0;
    let (hold, side) = (1.0 - q, q / 2.0);
    for _ in 0..steps {
        next.iter_mut().for_each(|v| *v = 0.0);
        for x in 1..width - 1 {
            let p = cur[x];
            if p == 0.0 {
                continue;
            }
            next[x] += hold * p;
            next[x + 1] += side * p;
            if x > 1 {
                next[x - 1] += side * p;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur[1..].iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hitting {
    At(u64),
    Exceeded,
}

impl Hitting {
    pub fn time(&self) -> Option<u64> {
        match self {
            Hitting::At(t) => Some(*t),
            Hitting::Exceeded => None,
        }
    }

    /// Whether the event has not happened by time `t`.
    pub fn survives(&self, t: u64) -> bool {
        match self {
            Hitting::At(s) => *s > t,
            Hitting::Exceeded => true,
        }
    }
}

/// Holding time with success probability `p` from the uniform `u ∈ [0,1)`:
/// `m` with `u ∈ [1 − (1−p)^{m−1}, 1 − (1−p)^m)`. Smaller `p` never gives a
/// shorter time for the same `u`.
pub fn geometric_from_uniform(u: f64, p: f64) -> u64 {
    debug_assert!((0.0..1.0).contains(&u) && p > 0.0 && p <= 1.0);
    if p >= 1.0 {
        return 1;
    }
    let m = (-u).ln_1p() / (-p).ln_1p();
    if m >= u64::MAX as f64 {
        u64::MAX
    } else {
        1 + m.floor() as u64
    }
}

/// First time the walk reaches 0, or [`Hitting::Exceeded`] past `t_cap`.
/// Holding times are drawn directly, so the cost is the number of moves.
pub fn simulate_hitting<R: Rng + ?Sized>(params: WalkParams, t_cap: u64, rng: &mut R) -> Hitting {
    let mut x = params.start;
    let mut t: u64 = 0;
    loop {
        let u: f64 = rng.random();
        t = t.saturating_add(geometric_from_uniform(u, params.q));
        if t > t_cap {
            return Hitting::Exceeded;
        }
        if rng.random::<f64>() < 0.5 {
            x += 1;
        } else {
            x -= 1;
            if x == 0 {
                return Hitting::At(t);
            }
        }
    }
}

/// Monte Carlo `Q^m[τ′ > steps]`.
pub fn survival_monte_carlo(
    params: WalkParams,
    steps: u64,
    replicas: usize,
    factory: StreamFactory,
) -> Estimate {
    let alive = replicate(factory, 0x3a1c, replicas, |rng| {
        simulate_hitting(params, steps, rng).survives(steps)
    });
    Estimate::proportion(alive.iter().filter(|&&a| a).count(), replicas)
}

/// `P[|N| ≤ α/√β]` for a standard normal `N`.
pub fn gaussian_limit(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha={alpha}, beta={beta} must be positive"
        )));
    }
    Ok(erf(alpha / beta.sqrt() / std::f64::consts::SQRT_2))
}

/// `α/√β`, an upper bound on [`gaussian_limit`].
pub fn gaussian_majorant(alpha: f64, beta: f64) -> f64 {
    alpha / beta.sqrt()
}
