//! Monotone coupling of two copies of the `W` chain.
//!
//! Off the diagonal exactly one coordinate moves per step, so the ordered
//! pair `w1 ≥ w2` keeps its order until the copies meet; on the diagonal
//! they move together and never separate again.
//!
//! The merge time is dominated pathwise by the hitting time of 0 of a lazy
//! symmetric walk: both are built from the same uniforms, the skeleton moves
//! from `U′` and the holding times from `U` by inverse-CDF sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exclusion::ModelParams;
use crate::lumped::{build_kernel, BirthDeathKernel};
use crate::rng::StreamFactory;
use crate::stats::{replicate, Estimate};
use crate::walk::{geometric_from_uniform, Hitting};

/// Ordered replica pair, `w1 ≥ w2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoupledState {
    pub w1: usize,
    pub w2: usize,
}

impl CoupledState {
    pub fn new(w1: usize, w2: usize) -> Result<Self> {
        if w1 < w2 {
            return Err(Error::UnorderedStart { x: w1, y: w2 });
        }
        Ok(Self { w1, w2 })
    }

    pub fn gap(&self) -> usize {
        self.w1 - self.w2
    }

    pub fn merged(&self) -> bool {
        self.w1 == self.w2
    }
}

/// Normalized interval ends of the skeleton move for one off-diagonal pair:
/// `[0,a]` w1 up, `(a,b]` w2 down, `(b,c]` w1 down, `(c,1]` w2 up. `q` is the
/// probability of moving at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonThresholds {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub q: f64,
}

/// Worst cases of the skeleton quantities over all off-diagonal pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonSummary {
    pub max_b: f64,
    pub min_q: f64,
    /// `k²/n²`, the move probability of the dominating walk.
    pub walk_q: f64,
}

/// Transition rule of the coupled pair on `{0..k}²`, `w1 ≥ w2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledKernel {
    base: BirthDeathKernel,
}

pub fn build_coupled_kernel(params: ModelParams) -> Result<CoupledKernel> {
    CoupledKernel::new(build_kernel(params)?)
}

impl CoupledKernel {
    /// Wraps `base`, checking that every off-diagonal hold
    /// `P̄(i,i) + P̄(j,j) − 1` is nonnegative.
    pub fn new(base: BirthDeathKernel) -> Result<Self> {
        let stay = base.stay();
        let k = base.len() - 1;
        // min over i > j of stay[i] + stay[j] is attained by the two smallest entries
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| stay[a].total_cmp(&stay[b]));
        if k >= 1 {
            let (i, j) = (order[0].max(order[1]), order[0].min(order[1]));
            let hold = stay[i] + stay[j] - 1.0;
            if hold < 0.0 {
                return Err(Error::NegativeCoupledEntry { i, j, value: hold });
            }
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> &BirthDeathKernel {
        &self.base
    }

    pub fn params(&self) -> ModelParams {
        self.base.params()
    }

    pub fn k(&self) -> usize {
        self.base.len() - 1
    }

    /// Outgoing transitions of `s` with positive-or-zero weights, holding
    /// last. Off the diagonal: `(i±1, j)`, `(i, j±1)`, hold. On it:
    /// `(i±1, i±1)`, hold.
    pub fn transitions(&self, s: CoupledState) -> Vec<(CoupledState, f64)> {
        let (up, down, stay) = (self.base.up(), self.base.down(), self.base.stay());
        let (i, j) = (s.w1, s.w2);
        let mut out = Vec::with_capacity(5);
        if i == j {
            if up[i] > 0.0 {
                out.push((
                    CoupledState {
                        w1: i + 1,
                        w2: i + 1,
                    },
                    up[i],
                ));
            }
            if down[i] > 0.0 {
                out.push((
                    CoupledState {
                        w1: i - 1,
                        w2: i - 1,
                    },
                    down[i],
                ));
            }
            out.push((s, stay[i]));
        } else {
            if up[i] > 0.0 {
                out.push((CoupledState { w1: i + 1, w2: j }, up[i]));
            }
            if down[i] > 0.0 {
                out.push((CoupledState { w1: i - 1, w2: j }, down[i]));
            }
            if up[j] > 0.0 {
                out.push((CoupledState { w1: i, w2: j + 1 }, up[j]));
            }
            if down[j] > 0.0 {
                out.push((CoupledState { w1: i, w2: j - 1 }, down[j]));
            }
            out.push((s, stay[i] + stay[j] - 1.0));
        }
        out
    }

    /// One step driven by a single uniform `u ∈ [0,1)`.
    pub fn step_with(&self, s: CoupledState, u: f64) -> CoupledState {
        let (up, down) = (self.base.up(), self.base.down());
        let (i, j) = (s.w1, s.w2);
        let mut acc = up[i];
        if i == j {
            if u < acc {
                return CoupledState {
                    w1: i + 1,
                    w2: i + 1,
                };
            }
            acc += down[i];
            if u < acc {
                return CoupledState {
                    w1: i - 1,
                    w2: i - 1,
                };
            }
            return s;
        }
        if u < acc {
            return CoupledState { w1: i + 1, w2: j };
        }
        acc += down[i];
        if u < acc {
            return CoupledState { w1: i - 1, w2: j };
        }
        acc += up[j];
        if u < acc {
            return CoupledState { w1: i, w2: j + 1 };
        }
        acc += down[j];
        if u < acc {
            return CoupledState { w1: i, w2: j - 1 };
        }
        s
    }

    /// Largest deviation, over every state, of a row sum from 1 and of each
    /// coordinate's marginal from the base kernel row.
    pub fn marginal_residual(&self) -> f64 {
        let k = self.k();
        let (up, down, stay) = (self.base.up(), self.base.down(), self.base.stay());
        let mut worst = 0.0f64;
        for i in 0..=k {
            for j in 0..=i {
                let s = CoupledState { w1: i, w2: j };
                let row = self.transitions(s);
                let total: f64 = row.iter().map(|(_, p)| p).sum();
                worst = worst.max((total - 1.0).abs());
                for (_, p) in &row {
                    if *p < 0.0 {
                        worst = worst.max(-p);
                    }
                }
                for coord in [0, 1] {
                    let here = if coord == 0 { i } else { j };
                    let (mut m_up, mut m_down, mut m_stay) = (0.0, 0.0, 0.0);
                    for (t, p) in &row {
                        let there = if coord == 0 { t.w1 } else { t.w2 };
                        match there as isize - here as isize {
                            1 => m_up += p,
                            -1 => m_down += p,
                            0 => m_stay += p,
                            _ => return f64::INFINITY,
                        }
                    }
                    worst = worst
                        .max((m_up - up[here]).abs())
                        .max((m_down - down[here]).abs())
                        .max((m_stay - stay[here]).abs());
                }
            }
        }
        worst
    }

    /// Skeleton thresholds for `i > j`.
    pub fn thresholds(&self, i: usize, j: usize) -> SkeletonThresholds {
        debug_assert!(i > j);
        let (up, down) = (self.base.up(), self.base.down());
        let q = up[i] + down[i] + up[j] + down[j];
        let a = up[i] / q;
        let b = a + down[j] / q;
        let c = b + down[i] / q;
        SkeletonThresholds { a, b, c, q }
    }

    /// Exhaustive worst case of `b(i,j)` and `q(i,j)` over all `i > j`.
    pub fn skeleton_summary(&self) -> SkeletonSummary {
        let k = self.k();
        let mut max_b = 0.0f64;
        let mut min_q = f64::INFINITY;
        for i in 1..=k {
            for j in 0..i {
                let th = self.thresholds(i, j);
                max_b = max_b.max(th.b);
                min_q = min_q.min(th.q);
            }
        }
        SkeletonSummary {
            max_b,
            min_q,
            walk_q: self.walk_q(),
        }
    }

    /// `k²/n²`.
    pub fn walk_q(&self) -> f64 {
        let p = self.params();
        let r = p.k() as f64 / p.n() as f64;
        r * r
    }
}

/// First meeting time of the pair started at `(x, y)`, stepping the coupled
/// kernel one unit of time at a time. `x == y` gives `At(0)`.
pub fn simulate_merge<R: Rng + ?Sized>(
    kernel: &CoupledKernel,
    x: usize,
    y: usize,
    t_cap: u64,
    rng: &mut R,
) -> Result<Hitting> {
    let mut s = CoupledState::new(x, y)?;
    if x > kernel.k() {
        return Err(Error::InvalidArgument(format!(
            "start {x} above k = {}",
            kernel.k()
        )));
    }
    if s.merged() {
        return Ok(Hitting::At(0));
    }
    for t in 1..=t_cap {
        s = kernel.step_with(s, rng.random());
        debug_assert!(s.w1 >= s.w2);
        if s.merged() {
            return Ok(Hitting::At(t));
        }
    }
    Ok(Hitting::Exceeded)
}

/// `D_t = w1 − w2` for `t = 0..=t_max` along one coupled path.
pub fn simulate_gap_path<R: Rng + ?Sized>(
    kernel: &CoupledKernel,
    x: usize,
    y: usize,
    t_max: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let mut s = CoupledState::new(x, y)?;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(s.gap() as u32);
    for _ in 0..t_max {
        if !s.merged() {
            s = kernel.step_with(s, rng.random());
        }
        out.push(s.gap() as u32);
    }
    Ok(out)
}

/// Merge time `τ` of the pair and hitting time `τ′` of the dominating walk,
/// built from one shared stream of uniforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominatedPair {
    pub tau: Hitting,
    pub tau_walk: Hitting,
    /// Skeleton moves made by the pair before merging.
    pub skeleton_moves: u64,
    /// Those of them that increased `D`.
    pub gap_increases: u64,
    /// `H_i ≥ J_i` and `X̄_i ≥ D̄_i` held at every skeleton index.
    pub dominated: bool,
}

impl DominatedPair {
    /// `τ ≤ τ′`, with an exceeded cap counting as +∞.
    pub fn ordered(&self) -> bool {
        match (self.tau, self.tau_walk) {
            (_, Hitting::Exceeded) => true,
            (Hitting::Exceeded, Hitting::At(_)) => false,
            (Hitting::At(a), Hitting::At(b)) => a <= b,
        }
    }
}

/// Jointly constructs the pair skeleton with geometric clocks and the lazy
/// walk with move probability `k²/n²` from the same `(U_i, U′_i)`.
pub fn simulate_dominated_pair<R: Rng + ?Sized>(
    kernel: &CoupledKernel,
    x: usize,
    y: usize,
    t_cap: u64,
    rng: &mut R,
) -> Result<DominatedPair> {
    let mut s = CoupledState::new(x, y)?;
    if x > kernel.k() {
        return Err(Error::InvalidArgument(format!(
            "start {x} above k = {}",
            kernel.k()
        )));
    }
    let walk_q = kernel.walk_q();
    let mut walk = s.gap() as i64;
    let (mut clock_pair, mut clock_walk) = (0u64, 0u64);
    let mut tau = if s.merged() {
        Some(Hitting::At(0))
    } else {
        None
    };
    let mut tau_walk = if walk == 0 {
        Some(Hitting::At(0))
    } else {
        None
    };
    let (mut moves, mut increases) = (0u64, 0u64);
    let mut dominated = true;

    while tau_walk.is_none() || tau.is_none() {
        let u: f64 = rng.random();
        let u_move: f64 = rng.random();
        if tau.is_none() {
            let th = kernel.thresholds(s.w1, s.w2);
            clock_pair = clock_pair.saturating_add(geometric_from_uniform(u, th.q));
            s = if u_move <= th.a {
                CoupledState {
                    w1: s.w1 + 1,
                    w2: s.w2,
                }
            } else if u_move <= th.b {
                CoupledState {
                    w1: s.w1,
                    w2: s.w2 - 1,
                }
            } else if u_move <= th.c {
                CoupledState {
                    w1: s.w1 - 1,
                    w2: s.w2,
                }
            } else {
                CoupledState {
                    w1: s.w1,
                    w2: s.w2 + 1,
                }
            };
            moves += 1;
            if u_move <= th.b {
                increases += 1;
            }
            if clock_pair > t_cap {
                tau = Some(Hitting::Exceeded);
            } else if s.merged() {
                tau = Some(Hitting::At(clock_pair));
            }
        }
        if tau_walk.is_none() {
            clock_walk = clock_walk.saturating_add(geometric_from_uniform(u, walk_q));
            walk += if u_move <= 0.5 { 1 } else { -1 };
            if clock_walk > t_cap {
                tau_walk = Some(Hitting::Exceeded);
            } else if walk == 0 {
                tau_walk = Some(Hitting::At(clock_walk));
            }
            if tau.is_none() || matches!(tau, Some(Hitting::At(t)) if t == clock_pair) {
                dominated &= clock_walk >= clock_pair && walk >= s.gap() as i64;
            }
        }
    }
    Ok(DominatedPair {
        tau: tau.expect("resolved"),
        tau_walk: tau_walk.expect("resolved"),
        skeleton_moves: moves,
        gap_increases: increases,
        dominated,
    })
}

/// Merge times of `replicas` independent pairs started at `(x, y)`.
pub fn merge_time_samples(
    kernel: &CoupledKernel,
    x: usize,
    y: usize,
    t_cap: u64,
    replicas: usize,
    factory: StreamFactory,
) -> Result<Vec<Hitting>> {
    CoupledState::new(x, y)?;
    Ok(replicate(factory, 0xc0u64, replicas, |rng| {
        simulate_merge(kernel, x, y, t_cap, rng).expect("validated start")
    }))
}

/// `P̂[τ > t]` from a fixed sample, so estimates at different `t` share paths.
pub fn tail_estimate(samples: &[Hitting], t: u64) -> Estimate {
    Estimate::proportion(
        samples.iter().filter(|h| h.survives(t)).count(),
        samples.len(),
    )
}

/// Monte Carlo estimate of `P^{k,0}[τ > t]`, an upper bound on `d(t)`.
pub fn coupling_tv_upper_bound(
    kernel: &CoupledKernel,
    t: u64,
    replicas: usize,
    factory: StreamFactory,
) -> Result<Estimate> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be >= 1".into()));
    }
    let samples = merge_time_samples(kernel, kernel.k(), 0, t, replicas, factory)?;
    Ok(tail_estimate(&samples, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lumped::{d_curve, mean_w_closed_form};
    use crate::stats::mean_and_variance;

    fn kern(n: usize, k: usize) -> CoupledKernel {
        build_coupled_kernel(ModelParams::new(n, k).unwrap()).unwrap()
    }

    #[test]
    fn example_row_n4_k2() {
        let ck = kern(4, 2);
        let row = ck.transitions(CoupledState { w1: 2, w2: 0 });
        let get = |w1, w2| {
            row.iter()
                .find(|(s, _)| *s == CoupledState { w1, w2 })
                .map_or(0.0, |(_, p)| *p)
        };
        assert_eq!(get(1, 0), 0.5);
        assert_eq!(get(2, 1), 0.5);
        assert_eq!(get(2, 0), 0.0);
    }

    #[test]
    fn diagonal_moves_together() {
        let ck = kern(30, 10);
        for i in 0..=10 {
            for (s, _) in ck.transitions(CoupledState { w1: i, w2: i }) {
                assert!(s.merged());
                assert!(s.w1.abs_diff(i) <= 1);
            }
        }
    }

    #[test]
    fn marginals_exact_small_n() {
        for n in 2..=50 {
            for k in 1..=n / 2 {
                let r = kern(n, k).marginal_residual();
                assert!(r <= 1e-15, "n={n} k={k} residual {r}");
            }
        }
    }

    #[test]
    fn rejects_unordered_and_negative() {
        let ck = kern(10, 3);
        let mut rng = StreamFactory::new(1).stream(0, 0);
        assert!(matches!(
            simulate_merge(&ck, 1, 2, 10, &mut rng),
            Err(Error::UnorderedStart { .. })
        ));
        // a base kernel whose two smallest holds sum below 1
        let params = ModelParams::new(4, 2).unwrap();
        let bad =
            BirthDeathKernel::from_parts(params, vec![0.6, 0.0, 0.0], vec![0.0, 0.0, 0.6]).unwrap();
        assert!(matches!(
            CoupledKernel::new(bad),
            Err(Error::NegativeCoupledEntry { .. })
        ));
    }

    #[test]
    fn skeleton_thresholds_bounded() {
        for (n, k) in [(4, 2), (50, 25), (200, 13), (1000, 200), (1000, 500)] {
            let summary = kern(n, k).skeleton_summary();
            assert!(summary.max_b <= 0.5, "{summary:?}");
            assert!(summary.min_q >= summary.walk_q, "{summary:?}");
        }
    }

    /// Mean merge time from (x, y) by solving the first-step equations on the
    /// off-diagonal states with Gauss–Jordan elimination.
    fn exact_mean_merge_time(ck: &CoupledKernel, x: usize, y: usize) -> f64 {
        let k = ck.k();
        let states: Vec<CoupledState> = (0..=k)
            .flat_map(|i| (0..i).map(move |j| CoupledState { w1: i, w2: j }))
            .collect();
        let idx = |s: &CoupledState| states.iter().position(|t| t == s);
        let m = states.len();
        let mut a = vec![vec![0.0f64; m + 1]; m];
        for (r, s) in states.iter().enumerate() {
            a[r][r] += 1.0;
            a[r][m] = 1.0;
            for (t, p) in ck.transitions(*s) {
                if let Some(c) = idx(&t) {
                    a[r][c] -= p;
                }
            }
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            a[col].iter_mut().for_each(|v| *v /= d);
            for r in 0..m {
                if r != col {
                    let f = a[r][col];
                    if f != 0.0 {
                        let pivot_row = a[col].clone();
                        a[r].iter_mut()
                            .zip(&pivot_row)
                            .for_each(|(v, p)| *v -= f * p);
                    }
                }
            }
        }
        a[idx(&CoupledState { w1: x, w2: y }).unwrap()][m]
    }

    #[test]
    fn mean_merge_time_matches_linear_system() {
        let ck = kern(4, 2);
        let exact = exact_mean_merge_time(&ck, 2, 0);
        let samples =
            merge_time_samples(&ck, 2, 0, 10_000, 1_000_000, StreamFactory::new(17)).unwrap();
        let times: Vec<f64> = samples.iter().map(|h| h.time().unwrap() as f64).collect();
        let (mean, var) = mean_and_variance(&times);
        let se = (var / times.len() as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "mean {mean} exact {exact} se {se}"
        );
    }

    #[test]
    fn merged_start_and_tail_monotone() {
        let ck = kern(60, 20);
        let mut rng = StreamFactory::new(2).stream(0, 0);
        assert_eq!(
            simulate_merge(&ck, 5, 5, 10, &mut rng).unwrap(),
            Hitting::At(0)
        );
        let samples = merge_time_samples(&ck, 20, 0, 5000, 2000, StreamFactory::new(3)).unwrap();
        let tails: Vec<f64> = (0..400).map(|t| tail_estimate(&samples, t).value).collect();
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(tails[0], 1.0);
    }

    #[test]
    fn gap_mean_decays_geometrically() {
        let (n, k) = (60, 20);
        let ck = kern(n, k);
        let f = StreamFactory::new(8);
        let paths = replicate(f, 1, 20_000, |r| {
            simulate_gap_path(&ck, 17, 3, 200, r).unwrap()
        });
        for t in [0, 1, 5, 20, 60, 200] {
            let vals: Vec<f64> = paths.iter().map(|p| p[t] as f64).collect();
            let e = Estimate::mean_of(&vals);
            let want = 14.0 * (1.0 - 2.0 / n as f64).powi(t as i32);
            // the same decay as the one-copy mean
            let also = mean_w_closed_form(ModelParams::new(n, k).unwrap(), 17, t)
                - mean_w_closed_form(ModelParams::new(n, k).unwrap(), 3, t);
            assert!((want - also).abs() < 1e-9);
            assert!(
                (e.value - want).abs() <= 4.0 * e.stderr.max(1e-12),
                "t={t} {e:?} want {want}"
            );
        }
    }

    #[test]
    fn dominated_pairs_are_ordered() {
        let ck = kern(50, 10);
        let f = StreamFactory::new(4);
        let out = replicate(f, 2, 20_000, |r| {
            simulate_dominated_pair(&ck, 8, 5, 2500, r).unwrap()
        });
        assert!(out.iter().all(|d| d.ordered() && d.dominated));
        let moves: u64 = out.iter().map(|d| d.skeleton_moves).sum();
        let inc: u64 = out.iter().map(|d| d.gap_increases).sum();
        assert!((inc as f64) <= 0.5 * moves as f64);
    }

    #[test]
    fn dominated_tail_ordering_large() {
        let params = ModelParams::new(1000, 200).unwrap();
        let ck = build_coupled_kernel(params).unwrap();
        let t = (params.center_large_k() + 2000.0).floor() as u64;
        let out = replicate(StreamFactory::new(6), 3, 2000, |r| {
            simulate_dominated_pair(&ck, 200, 0, t, r).unwrap()
        });
        let tau_tail = out.iter().filter(|d| d.tau.survives(t)).count();
        let walk_tail = out.iter().filter(|d| d.tau_walk.survives(t)).count();
        assert!(tau_tail <= walk_tail);
        assert!(out.iter().all(|d| d.ordered()));
    }

    #[test]
    fn coupling_bound_trivial_and_valid() {
        let params = ModelParams::new(100, 30).unwrap();
        let ck = build_coupled_kernel(params).unwrap();
        let e0 = coupling_tv_upper_bound(&ck, 0, 100, StreamFactory::new(1)).unwrap();
        assert_eq!(e0.value, 1.0);
        let d = d_curve(params, 600).unwrap();
        for t in [50u64, 150, 300, 450] {
            let e = coupling_tv_upper_bound(&ck, t, 4000, StreamFactory::new(1)).unwrap();
            assert!(
                d.tv[t as usize] <= e.value + 4.0 * e.stderr,
                "t={t} d={} e={e:?}",
                d.tv[t as usize]
            );
        }
    }
}
