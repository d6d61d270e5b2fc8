//! The birth-and-death chain followed by `W`, the number of particles left in
//! the starting block `{1..k}`.
//!
//! Everything here is exact: distributions are evolved deterministically, so
//! distances, moments and mixing times carry only floating-point error.

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::exclusion::ModelParams;

/// Drift tolerated in a distribution's total mass before it is rescaled.
pub const RENORMALIZE_DRIFT: f64 = 1e-12;
/// Largest total-mass error a [`DistributionVector`] may carry.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Transition probabilities of `W` on `{0..k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathKernel {
    params: ModelParams,
    up: Vec<f64>,
    down: Vec<f64>,
    stay: Vec<f64>,
}

impl BirthDeathKernel {
    /// Assembles a kernel from explicit up/down rows; `stay` is the
    /// complement. Rejects entries outside `[0, 1]`.
    pub fn from_parts(params: ModelParams, up: Vec<f64>, down: Vec<f64>) -> Result<Self> {
        let len = params.k() + 1;
        if up.len() != len || down.len() != len {
            return Err(Error::DimensionMismatch {
                left: up.len().max(down.len()),
                right: len,
            });
        }
        let stay: Vec<f64> = up.iter().zip(&down).map(|(u, d)| 1.0 - u - d).collect();
        for i in 0..len {
            for (what, value) in [("up", up[i]), ("down", down[i]), ("stay", stay[i])] {
                if !(0.0..=1.0).contains(&value) || value.is_nan() {
                    return Err(Error::KernelOutOfRange {
                        state: i,
                        what,
                        value,
                    });
                }
            }
        }
        Ok(Self {
            params,
            up,
            down,
            stay,
        })
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    /// Number of states, `k + 1`.
    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    pub fn up(&self) -> &[f64] {
        &self.up
    }

    pub fn down(&self) -> &[f64] {
        &self.down
    }

    pub fn stay(&self) -> &[f64] {
        &self.stay
    }

    /// One step of forward evolution, `μ ↦ μP̄`, without renormalization.
    fn push_forward(&self, mu: &[f64], out: &mut [f64]) {
        let last = mu.len() - 1;
        for i in 0..=last {
            let mut v = mu[i] * self.stay[i];
            if i > 0 {
                v += mu[i - 1] * self.up[i - 1];
            }
            if i < last {
                v += mu[i + 1] * self.down[i + 1];
            }
            out[i] = v;
        }
    }
}

/// `P̄(i,i+1) = 2(k−i)²/n²`, `P̄(i,i−1) = 2i(n−2k+i)/n²`.
pub fn build_kernel(params: ModelParams) -> Result<BirthDeathKernel> {
    let n = params.n() as f64;
    let k = params.k() as f64;
    let n2 = n * n;
    if !n2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "n² overflows for n={}",
            params.n()
        )));
    }
    let up = (0..=params.k())
        .map(|i| {
            let gap = k - i as f64;
            2.0 * gap * gap / n2
        })
        .collect();
    let down = (0..=params.k())
        .map(|i| {
            let i = i as f64;
            2.0 * i * (n - 2.0 * k + i) / n2
        })
        .collect();
    BirthDeathKernel::from_parts(params, up, down)
}

/// A probability vector on `{0..k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVector {
    probs: Vec<f64>,
}

impl DistributionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "negative or non-finite mass {bad}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!("mass sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn point_mass(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(Error::InvalidArgument(format!(
                "point mass at {at} outside 0..{len}"
            )));
        }
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i * i) as f64 * p)
            .sum()
    }

    /// Central second moment, computed around the mean for stability.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = i as f64 - m;
                d * d * p
            })
            .sum()
    }

    fn renormalize_if_drifted(&mut self) {
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_DRIFT {
            self.probs.iter_mut().for_each(|p| *p /= total);
        }
    }
}

/// Law of `W` under the uniform measure on configurations: the
/// hypergeometric `C(k,m)·C(n−k,k−m)/C(n,k)`.
///
/// Built from log-ratios of consecutive binomial products so it stays finite
/// for `n` up to 10⁶; entries far in the tails underflow to zero.
pub fn equilibrium(params: ModelParams) -> DistributionVector {
    let (n, k) = (params.n() as f64, params.k() as f64);
    let mut logs = Vec::with_capacity(params.k() + 1);
    let mut acc = 0.0f64;
    logs.push(acc);
    for m in 0..params.k() {
        let m = m as f64;
        acc += 2.0 * (k - m).ln() - (m + 1.0).ln() - (n - 2.0 * k + m + 1.0).ln();
        logs.push(acc);
    }
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    DistributionVector { probs }
}

/// `dist · P̄^steps`, O(k) work per step.
pub fn evolve(
    dist: &DistributionVector,
    kernel: &BirthDeathKernel,
    steps: usize,
) -> Result<DistributionVector> {
    if dist.len() != kernel.len() {
        return Err(Error::DimensionMismatch {
            left: dist.len(),
            right: kernel.len(),
        });
    }
    let mut cur = dist.clone();
    let mut scratch = vec![0.0; cur.len()];
    for _ in 0..steps {
        kernel.push_forward(&cur.probs, &mut scratch);
        std::mem::swap(&mut cur.probs, &mut scratch);
        cur.renormalize_if_drifted();
    }
    Ok(cur)
}

/// `½ Σ |a_i − b_i|`.
pub fn tv_distance(a: &DistributionVector, b: &DistributionVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let s: f64 = a
        .probs
        .iter()
        .zip(&b.probs)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// `E[W_t] = (w0 − k²/n)(1 − 2/n)^t + k²/n`.
pub fn mean_w_closed_form(params: ModelParams, w0: usize, t: usize) -> f64 {
    let eq = dd_equilibrium_mean(params);
    ((TwoFloat::from(w0 as f64) - eq) * dd_pow(dd_contraction(params), t) + eq).into()
}

// Moments are carried in double-double so the rounded result is within an
// ulp or two even when E[W²] ~ 1e5.

fn dd_equilibrium_mean(params: ModelParams) -> TwoFloat {
    let k = params.k() as f64;
    TwoFloat::new_mul(k, k) / params.n() as f64
}

/// `1 − 2/n`
fn dd_contraction(params: ModelParams) -> TwoFloat {
    TwoFloat::from(1.0) - TwoFloat::from(2.0) / params.n() as f64
}

fn dd_pow(mut base: TwoFloat, mut exp: usize) -> TwoFloat {
    let mut acc = TwoFloat::from(1.0);
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

/// `E[W_t²]` from `W_0 = k`, via
/// `E[W²_{t+1}] = (1−2/n)²·E[W²_t] + (4k²/n² − 8k/n² + 2/n)·E[W_t] + 2k²/n²`.
pub fn second_moment_closed_form(params: ModelParams, t: usize) -> f64 {
    let n = TwoFloat::from(params.n() as f64);
    let k = TwoFloat::from(params.k() as f64);
    let n2 = n * n;
    let lambda = dd_contraction(params);
    let contraction = lambda * lambda;
    let drift = (k * k * 4.0 - k * 8.0) / n2 + TwoFloat::from(2.0) / n;
    let constant = k * k * 2.0 / n2;
    let eq = dd_equilibrium_mean(params);
    let mut excess = k - eq;
    let mut second = k * k;
    for _ in 0..t {
        second = contraction * second + drift * (excess + eq) + constant;
        excess *= lambda;
    }
    second.into()
}

/// Exact `Var(W_t)` from `W_0 = k`.
pub fn variance_at(params: ModelParams, t: usize) -> Result<f64> {
    let kernel = build_kernel(params)?;
    let start = DistributionVector::point_mass(kernel.len(), params.k())?;
    Ok(evolve(&start, &kernel, t)?.variance())
}

/// Settings for [`variance_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBoundSettings {
    /// The unspecified constant `C` in `C·k²/n + e^γ·k/√n`.
    pub constant: f64,
    /// Regime requirement `k ≥ regime·√n`.
    pub regime: f64,
}

impl Default for VarianceBoundSettings {
    fn default() -> Self {
        Self {
            constant: 10.0,
            regime: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBoundReport {
    pub t: usize,
    pub variance: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Time `⌊n/4·log n − γn/2⌋`, clamped at 0.
pub fn variance_check_time(params: ModelParams, gamma: f64) -> usize {
    let n = params.n() as f64;
    (params.center_large_k() - gamma * n / 2.0).floor().max(0.0) as usize
}

/// Compares the exact `Var(W_t)` at `t = n/4·log n − γn/2` with
/// `C·k²/n + e^γ·k/√n`.
pub fn variance_bound_check(
    params: ModelParams,
    gamma: f64,
    settings: VarianceBoundSettings,
) -> Result<VarianceBoundReport> {
    let n = params.n() as f64;
    let k = params.k() as f64;
    if k < settings.regime * n.sqrt() {
        return Err(Error::RegimeViolation(format!(
            "variance bound needs k >= {}·sqrt(n) = {:.3}, got k = {}",
            settings.regime,
            settings.regime * n.sqrt(),
            params.k()
        )));
    }
    if !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma = {gamma}")));
    }
    let t = variance_check_time(params, gamma);
    let variance = variance_at(params, t)?;
    let bound = settings.constant * k * k / n + gamma.exp() * k / n.sqrt();
    Ok(VarianceBoundReport {
        t,
        variance,
        bound,
        holds: variance <= bound,
    })
}

/// Second-moment lower bound on `‖μ − π‖`:
/// `gap² / (gap² + 2(Var_μ + Var_π))` with `gap` the difference of means.
pub fn tv_lower_bound_second_moment(
    mu: &DistributionVector,
    pi: &DistributionVector,
) -> Result<f64> {
    if mu.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            left: mu.len(),
            right: pi.len(),
        });
    }
    let gap = mu.mean() - pi.mean();
    if gap == 0.0 {
        return Ok(0.0);
    }
    let spread = 2.0 * (mu.variance() + pi.variance());
    let gap2 = gap * gap;
    Ok((gap2 / (gap2 + spread)).clamp(0.0, 1.0))
}

/// `max_i |(P̄f)(i) − λ f(i)|`, evaluated as
/// `Σ_j P̄(i,j)(f(j) − f(i)) + (1 − λ) f(i)` so that large `f` values do not
/// swamp the residual.
pub fn eigen_residual(kernel: &BirthDeathKernel, f: &[f64], lambda: f64) -> Result<f64> {
    if f.len() != kernel.len() {
        return Err(Error::DimensionMismatch {
            left: f.len(),
            right: kernel.len(),
        });
    }
    let last = f.len() - 1;
    let mut worst = 0.0f64;
    for i in 0..=last {
        let mut pf = (1.0 - lambda) * f[i];
        if i < last {
            pf += kernel.up[i] * (f[i + 1] - f[i]);
        }
        if i > 0 {
            pf += kernel.down[i] * (f[i - 1] - f[i]);
        }
        worst = worst.max(pf.abs());
    }
    Ok(worst)
}

/// Residual of `f(i) = i − k²/n` as an eigenfunction with eigenvalue `1 − 2/n`.
pub fn eigenfunction_check(kernel: &BirthDeathKernel) -> f64 {
    let params = kernel.params();
    let eq = params.equilibrium_mean();
    let f: Vec<f64> = (0..kernel.len()).map(|i| i as f64 - eq).collect();
    eigen_residual(kernel, &f, 1.0 - 2.0 / params.n() as f64).expect("dimensions match")
}

/// Worst-start distance to equilibrium sampled at `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingProfile {
    pub params: ModelParams,
    pub stride: usize,
    pub times: Vec<usize>,
    pub tv: Vec<f64>,
}

/// Outcome of reading `T_mix(ε)` off a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixTime {
    /// First sampled time with `d(t) ≤ ε`; the true value lies in
    /// `(t − stride, t]`, exact when `stride == 1`.
    Reached {
        t: usize,
        stride: usize,
    },
    NotReached,
}

impl MixTime {
    pub fn time(&self) -> Option<usize> {
        match self {
            MixTime::Reached { t, .. } => Some(*t),
            MixTime::NotReached => None,
        }
    }
}

/// `d(t) = ‖δ_k P̄^t − π̄‖` for `t = 0..=t_max`.
pub fn d_curve(params: ModelParams, t_max: usize) -> Result<MixingProfile> {
    d_curve_strided(params, t_max, 1)
}

pub fn d_curve_strided(params: ModelParams, t_max: usize, stride: usize) -> Result<MixingProfile> {
    d_curve_with_kernel(&build_kernel(params)?, t_max, stride)
}

/// As [`d_curve_strided`] but with a caller-supplied kernel.
pub fn d_curve_with_kernel(
    kernel: &BirthDeathKernel,
    t_max: usize,
    stride: usize,
) -> Result<MixingProfile> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    let params = kernel.params();
    let pi = equilibrium(params);
    let mut mu = DistributionVector::point_mass(kernel.len(), params.k())?;
    let mut times = vec![0];
    let mut tv = vec![tv_distance(&mu, &pi)?];
    let mut t = 0;
    while t + stride <= t_max {
        mu = evolve(&mu, kernel, stride)?;
        t += stride;
        times.push(t);
        tv.push(tv_distance(&mu, &pi)?);
    }
    Ok(MixingProfile {
        params,
        stride,
        times,
        tv,
    })
}

/// `T_mix(ε) = inf{t : d(t) ≤ ε}` over the sampled times.
pub fn t_mix(profile: &MixingProfile, eps: f64) -> Result<MixTime> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} not in (0,1)")));
    }
    Ok(profile
        .times
        .iter()
        .zip(&profile.tv)
        .find(|(_, &d)| d <= eps)
        .map_or(MixTime::NotReached, |(&t, _)| MixTime::Reached {
            t,
            stride: profile.stride,
        }))
}

/// Exact `T_mix(ε)` for every `ε` in `eps`, evolving step by step until the
/// smallest threshold is met or `t_cap` is passed.
pub fn mixing_times(params: ModelParams, eps: &[f64], t_cap: usize) -> Result<Vec<MixTime>> {
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::InvalidArgument(format!("eps = {bad} not in (0,1)")));
    }
    let kernel = build_kernel(params)?;
    let pi = equilibrium(params);
    let mut mu = DistributionVector::point_mass(kernel.len(), params.k())?;
    let mut out = vec![MixTime::NotReached; eps.len()];
    let mut pending = eps.len();
    let mut scratch = vec![0.0; kernel.len()];
    let mut t = 0;
    loop {
        let d = tv_distance(&mu, &pi)?;
        for (slot, &e) in out.iter_mut().zip(eps) {
            if *slot == MixTime::NotReached && d <= e {
                *slot = MixTime::Reached { t, stride: 1 };
                pending -= 1;
            }
        }
        if pending == 0 || t >= t_cap {
            return Ok(out);
        }
        kernel.push_forward(&mu.probs, &mut scratch);
        std::mem::swap(&mut mu.probs, &mut scratch);
        mu.renormalize_if_drifted();
        t += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exclusion::{brute_force_tv_curve, Mode};
    use proptest::prelude::*;

    fn p(n: usize, k: usize) -> ModelParams {
        ModelParams::new(n, k).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kernel_n4_k2() {
        // Enumeration of the 16 ordered pairs on Ω(4,2) by W.
        let kern = build_kernel(p(4, 2)).unwrap();
        assert_eq!(kern.up(), &[0.5, 0.125, 0.0]);
        assert_eq!(kern.down(), &[0.0, 0.125, 0.5]);
        assert_eq!(kern.stay(), &[0.5, 0.75, 0.5]);
        let pi = equilibrium(p(4, 2));
        assert!(close(pi.probs()[0] * kern.up()[0], 1.0 / 12.0, 1e-15));
        assert!(close(pi.probs()[1] * kern.down()[1], 1.0 / 12.0, 1e-15));
    }

    #[test]
    fn kernel_rejects_out_of_range_rows() {
        let params = p(4, 2);
        assert!(
            BirthDeathKernel::from_parts(params, vec![0.7, 0.1, 0.0], vec![0.0, 0.1, 0.5]).is_ok()
        );
        assert!(matches!(
            BirthDeathKernel::from_parts(params, vec![0.7, 0.1, 0.0], vec![0.0, 0.1, 1.5]),
            Err(Error::KernelOutOfRange { state: 2, .. })
        ));
        assert!(BirthDeathKernel::from_parts(params, vec![0.5], vec![0.0]).is_err());
    }

    #[test]
    fn equilibrium_n4_k2() {
        let pi = equilibrium(p(4, 2));
        let want = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        for (a, b) in pi.probs().iter().zip(want) {
            assert!(close(*a, b, 1e-15));
        }
        assert!(close(pi.mean(), 1.0, 1e-15));
    }

    /// Direct product of binomials in exact integer arithmetic.
    fn hypergeometric_oracle(n: u64, k: u64) -> Vec<f64> {
        fn binom(n: u64, r: u64) -> u128 {
            (0..r).fold(1u128, |c, i| c * (n - i) as u128 / (i + 1) as u128)
        }
        let total = binom(n, k) as f64;
        (0..=k)
            .map(|m| (binom(k, m) * binom(n - k, k - m)) as f64 / total)
            .collect()
    }

    #[test]
    fn equilibrium_matches_binomial_products() {
        for n in 2..=60u64 {
            for k in 1..=n / 2 {
                let pi = equilibrium(p(n as usize, k as usize));
                for (a, b) in pi.probs().iter().zip(hypergeometric_oracle(n, k)) {
                    assert!(
                        (a - b).abs() <= 1e-12 * b.max(1e-300),
                        "n={n} k={k}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        for (n, k) in [(4, 2), (10, 3), (100, 50), (1000, 31), (5000, 900)] {
            let kern = build_kernel(p(n, k)).unwrap();
            let pi = equilibrium(p(n, k));
            let next = evolve(&pi, &kern, 1).unwrap();
            for (a, b) in next.probs().iter().zip(pi.probs()) {
                assert!(close(*a, *b, 1e-12));
            }
            assert!(close(pi.mean(), p(n, k).equilibrium_mean(), 1e-9));
            let again = evolve(&pi, &kern, 25).unwrap();
            assert!(tv_distance(&again, &pi).unwrap() < 1e-12);
        }
    }

    #[test]
    fn evolve_examples() {
        let kern = build_kernel(p(4, 2)).unwrap();
        let start = DistributionVector::point_mass(3, 2).unwrap();
        let one = evolve(&start, &kern, 1).unwrap();
        assert_eq!(one.probs(), &[0.0, 0.5, 0.5]);
        assert_eq!(evolve(&start, &kern, 0).unwrap(), start);
        let wrong = DistributionVector::point_mass(4, 0).unwrap();
        assert!(matches!(
            evolve(&wrong, &kern, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tv_examples() {
        let pi = equilibrium(p(4, 2));
        let d2 = DistributionVector::point_mass(3, 2).unwrap();
        assert!(close(tv_distance(&d2, &pi).unwrap(), 5.0 / 6.0, 1e-15));
        assert_eq!(tv_distance(&pi, &pi).unwrap(), 0.0);
        let d0 = DistributionVector::point_mass(3, 0).unwrap();
        assert_eq!(tv_distance(&d0, &d2).unwrap(), 1.0);
        assert!(tv_distance(&d0, &DistributionVector::point_mass(2, 0).unwrap()).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(DistributionVector::new(vec![0.5, 0.5]).is_ok());
        assert!(DistributionVector::new(vec![0.5, 0.6]).is_err());
        assert!(DistributionVector::new(vec![-0.1, 1.1]).is_err());
        assert!(DistributionVector::new(vec![]).is_err());
    }

    #[test]
    fn mean_closed_form_examples() {
        assert_eq!(mean_w_closed_form(p(4, 2), 2, 1), 1.5);
        assert_eq!(mean_w_closed_form(p(100, 30), 17, 0), 17.0);
        assert!(close(
            mean_w_closed_form(p(100, 30), 30, 100_000),
            9.0,
            1e-12
        ));
    }

    #[test]
    fn second_moment_examples() {
        assert_eq!(second_moment_closed_form(p(4, 2), 0), 4.0);
        assert!(close(second_moment_closed_form(p(4, 2), 1), 2.5, 1e-15));
        for t in [0, 1, 3, 10, 100, 1000] {
            let params = p(200, 40);
            let m = mean_w_closed_form(params, 40, t);
            assert!(second_moment_closed_form(params, t) >= m * m - 1e-9);
        }
    }

    #[test]
    fn moments_match_exact_evolution() {
        for (n, k) in [(4, 2), (10, 5), (10, 1), (100, 17), (1000, 200)] {
            let params = p(n, k);
            let kern = build_kernel(params).unwrap();
            let start = DistributionVector::point_mass(k + 1, k).unwrap();
            for t in [0, 1, 2, 5, 10, 100] {
                let mu = evolve(&start, &kern, t).unwrap();
                let m = mean_w_closed_form(params, k, t);
                let s = second_moment_closed_form(params, t);
                assert!(
                    (mu.mean() - m).abs() <= 1e-10 * m.max(1.0),
                    "n={n} k={k} t={t}"
                );
                assert!((mu.second_moment() - s).abs() <= 1e-10 * s.max(1.0));
            }
        }
    }

    #[test]
    fn variance_bound_examples() {
        let report =
            variance_bound_check(p(1000, 200), 0.0, VarianceBoundSettings::default()).unwrap();
        assert_eq!(report.t, variance_check_time(p(1000, 200), 0.0));
        assert!(report.holds, "{report:?}");

        // later times (γ → −∞) give smaller variance once past the peak
        let a = variance_bound_check(p(1000, 200), -2.0, VarianceBoundSettings::default()).unwrap();
        let b = variance_bound_check(p(1000, 200), -6.0, VarianceBoundSettings::default()).unwrap();
        assert!(b.t > a.t);
        assert!(b.variance <= a.variance, "{a:?} {b:?}");

        assert_eq!(variance_at(p(1000, 200), 0).unwrap(), 0.0);
        assert!(matches!(
            variance_bound_check(p(1000, 10), 0.0, VarianceBoundSettings::default()),
            Err(Error::RegimeViolation(_))
        ));
    }

    #[test]
    fn second_moment_lower_bound_examples() {
        let pi = equilibrium(p(10, 3));
        assert_eq!(tv_lower_bound_second_moment(&pi, &pi).unwrap(), 0.0);
        let a = DistributionVector::point_mass(4, 0).unwrap();
        let b = DistributionVector::point_mass(4, 3).unwrap();
        assert_eq!(tv_lower_bound_second_moment(&a, &b).unwrap(), 1.0);

        let params = p(1000, 200);
        let kern = build_kernel(params).unwrap();
        let pi = equilibrium(params);
        let start = DistributionVector::point_mass(201, 200).unwrap();
        let mu = evolve(&start, &kern, params.center_large_k().floor() as usize).unwrap();
        let lb = tv_lower_bound_second_moment(&mu, &pi).unwrap();
        let tv = tv_distance(&mu, &pi).unwrap();
        assert!(lb > 0.0 && lb <= tv, "lb {lb} tv {tv}");
    }

    #[test]
    fn eigenfunction_residuals() {
        assert!(eigenfunction_check(&build_kernel(p(4, 2)).unwrap()) <= 1e-15);
        assert!(eigenfunction_check(&build_kernel(p(1000, 31)).unwrap()) <= 1e-12);
        let kern = build_kernel(p(50, 20)).unwrap();
        assert_eq!(eigen_residual(&kern, &[3.5; 21], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn d_curve_examples() {
        let prof = d_curve(p(4, 2), 50).unwrap();
        assert!(close(prof.tv[0], 5.0 / 6.0, 1e-15));
        assert!(prof.tv.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let brute = brute_force_tv_curve(p(4, 2), Mode::Unlabeled, 50).unwrap();
        for (a, b) in prof.tv.iter().zip(&brute) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn t_mix_examples() {
        let flat = MixingProfile {
            params: p(4, 2),
            stride: 1,
            times: vec![0, 1],
            tv: vec![0.0, 0.0],
        };
        assert_eq!(
            t_mix(&flat, 0.25).unwrap(),
            MixTime::Reached { t: 0, stride: 1 }
        );
        let prof = d_curve(p(4, 2), 10).unwrap();
        assert_eq!(
            t_mix(&prof, 0.9).unwrap(),
            MixTime::Reached { t: 0, stride: 1 }
        );
        let short = d_curve(p(1000, 10), 5).unwrap();
        assert_eq!(t_mix(&short, 0.25).unwrap(), MixTime::NotReached);
        assert!(t_mix(&prof, 1.5).is_err());
        assert!(t_mix(&prof, 0.0).is_err());
    }

    #[test]
    fn t_mix_small_k_near_center() {
        let params = p(1000, 10);
        let prof = d_curve(params, 6000).unwrap();
        let t = t_mix(&prof, 0.25).unwrap().time().unwrap();
        let beta = (t as f64 - params.center_small_k()).abs() / 1000.0;
        // k/√n ≈ 0.32 here, so the offset from n/2·log k is still large;
        // the exact curve gives t = 1727, i.e. β ≈ 0.576
        assert_eq!(t, 1727);
        assert!(beta <= 0.6, "t={t} beta={beta}");
        let fast = mixing_times(params, &[0.25], 6000).unwrap();
        assert_eq!(fast[0].time(), Some(t));
    }

    #[test]
    fn strided_profile_brackets() {
        let params = p(300, 40);
        let exact = mixing_times(params, &[0.3], 100_000).unwrap()[0]
            .time()
            .unwrap();
        let prof = d_curve_strided(params, 20_000, 7).unwrap();
        match t_mix(&prof, 0.3).unwrap() {
            MixTime::Reached { t, stride } => {
                assert_eq!(stride, 7);
                assert!(t >= exact && t < exact + 7);
            }
            MixTime::NotReached => panic!("not reached"),
        }
    }

    proptest! {
        #[test]
        fn kernel_rows_and_detailed_balance(n in 2usize..3000, kf in 0.0f64..1.0) {
            let k = 1 + ((n / 2 - 1) as f64 * kf) as usize;
            let params = p(n, k);
            let kern = build_kernel(params).unwrap();
            prop_assert_eq!(kern.up()[k], 0.0);
            prop_assert_eq!(kern.down()[0], 0.0);
            for i in 0..=k {
                let total = kern.up()[i] + kern.down()[i] + kern.stay()[i];
                prop_assert!((total - 1.0).abs() <= 1e-12);
                prop_assert!(kern.stay()[i] >= 0.5);
            }
            let pi = equilibrium(params);
            for i in 0..k {
                let a = pi.probs()[i] * kern.up()[i];
                let b = pi.probs()[i + 1] * kern.down()[i + 1];
                if a.max(b) > 1e-290 {
                    prop_assert!((a - b).abs() <= 1e-10 * a.max(b), "i={} {} {}", i, a, b);
                }
            }
        }

        #[test]
        fn t_mix_monotone_in_eps(n in 10usize..400, kf in 0.0f64..1.0, e1 in 0.01f64..0.99, e2 in 0.01f64..0.99) {
            let k = 1 + ((n / 2 - 1) as f64 * kf) as usize;
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let times = mixing_times(p(n, k), &[lo, hi], 1_000_000).unwrap();
            prop_assert!(times[0].time().unwrap() >= times[1].time().unwrap());
        }
    }
}
