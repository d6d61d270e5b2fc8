//! The six experiment kinds. Each returns a [`ResultRecord`]; only
//! `oracle-check` can report failures.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde_json::json;

use mixlab_core::bounds::{
    clamp_time, collection_tail_exact, collection_time_samples, labeled_bound_from_samples,
    labeled_penalty, unlabeled_bound_from_samples, unlabeled_penalty, CollectorSpec,
};
use mixlab_core::coupling::{
    build_coupled_kernel, merge_time_samples, tail_estimate, CoupledKernel,
};
use mixlab_core::exclusion::{state_space_size, BruteForceChain, STATE_SPACE_CAP};
use mixlab_core::lumped::{
    build_kernel, d_curve, d_curve_with_kernel, eigenfunction_check, equilibrium, evolve,
    mean_w_closed_form, second_moment_closed_form, t_mix, tv_distance,
    tv_lower_bound_second_moment,
};
use mixlab_core::walk::{
    gaussian_limit, gaussian_majorant, survival_bruteforce, survival_exact, survival_monte_carlo,
    WalkParams, BRUTEFORCE_MAX_STEPS,
};
use mixlab_core::{
    BirthDeathKernel, DistributionVector, MixTime, Mode, ModelParams, StreamFactory,
};

use crate::config::{ExperimentConfig, Fault, Kind};
use crate::record::{Cell, ResultRecord};

/// A finished experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: ResultRecord,
    /// Failed identities; nonzero only for `oracle-check`.
    pub failures: usize,
}

impl From<ResultRecord> for Outcome {
    fn from(record: ResultRecord) -> Self {
        Outcome {
            record,
            failures: 0,
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    Ok(match config.kind {
        Kind::TvCurve => run_tv_curve(config)?.into(),
        Kind::Sweep => run_sweep(config)?.into(),
        Kind::Coupling => run_coupling_experiment(config)?.into(),
        Kind::Bounds => run_bounds_report(config)?.into(),
        Kind::Hitting => run_hitting(config)?.into(),
        Kind::OracleCheck => run_oracle_check(config)?,
    })
}

/// Horizon used when the config gives no `t_max`: far enough past both
/// centers for every `ε` the runners accept by default.
pub fn default_horizon(params: ModelParams) -> usize {
    let center = params.center_large_k().max(params.center_small_k());
    (2.0 * center + 10.0 * params.n() as f64).ceil() as usize
}

fn horizon(config: &ExperimentConfig, params: ModelParams) -> usize {
    config.t_max.unwrap_or_else(|| default_horizon(params))
}

fn mix_json(params: ModelParams, eps: f64, m: MixTime) -> serde_json::Value {
    let (t, stride) = match m {
        MixTime::Reached { t, stride } => (Some(t), stride),
        MixTime::NotReached => (None, 1),
    };
    json!({ "n": params.n(), "k": params.k(), "eps": eps, "t_mix": t, "stride": stride })
}

fn centers_json(config: &ExperimentConfig) -> serde_json::Value {
    let list: Vec<_> = config
        .grid
        .iter()
        .map(|m| {
            let p = m.params();
            json!({ "n": p.n(), "k": p.k(), "center_large_k": p.center_large_k(), "center_small_k": p.center_small_k() })
        })
        .collect();
    json!(list)
}

/// `d(t)` from the worst start, with `T_mix(ε)` for each requested `ε`.
pub fn run_tv_curve(config: &ExperimentConfig) -> Result<ResultRecord> {
    let mut record = ResultRecord::new(
        config,
        vec!["n", "k", "t", "d", "center_large_k", "center_small_k"],
    );
    record.set_meta("centers", centers_json(config));
    let profiles = config
        .grid
        .par_iter()
        .map(|m| {
            mixlab_core::lumped::d_curve_strided(
                m.params(),
                horizon(config, m.params()),
                config.stride,
            )
        })
        .collect::<mixlab_core::Result<Vec<_>>>()?;
    let mut mixes = Vec::new();
    for profile in &profiles {
        let p = profile.params;
        for (&t, &d) in profile.times.iter().zip(&profile.tv) {
            if t >= config.t_min {
                record.push(vec![
                    p.n().into(),
                    p.k().into(),
                    t.into(),
                    d.into(),
                    p.center_large_k().into(),
                    p.center_small_k().into(),
                ]);
            }
        }
        for &eps in &config.eps {
            let m = t_mix(profile, eps)?;
            if m == MixTime::NotReached {
                record.warn(format!(
                    "n={} k={}: d(t) stays above eps={eps} up to t={}",
                    p.n(),
                    p.k(),
                    profile.times.last().copied().unwrap_or(0)
                ));
            }
            mixes.push(mix_json(p, eps, m));
        }
    }
    record.set_meta("t_mix", json!(mixes));
    Ok(record)
}

/// `T_mix(ε)`, `T_mix(1−ε)` and the window between them across a grid.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ResultRecord> {
    let mut record = ResultRecord::new(
        config,
        vec![
            "n",
            "k",
            "eps",
            "t_mix_eps",
            "t_mix_complement",
            "window",
            "window_over_n",
            "t_mix_half",
            "center_large_k",
            "center_small_k",
            "ratio_large_k",
            "ratio_small_k",
        ],
    );
    let per_point = config
        .grid
        .par_iter()
        .map(|m| {
            let p = m.params();
            let mut eps: Vec<f64> = vec![0.5];
            for &e in &config.eps {
                eps.push(e);
                eps.push(1.0 - e);
            }
            mixlab_core::lumped::mixing_times(p, &eps, horizon(config, p)).map(|t| (p, t))
        })
        .collect::<mixlab_core::Result<Vec<_>>>()?;
    for (p, times) in per_point {
        let n = p.n() as f64;
        let half = times[0].time();
        for (i, &eps) in config.eps.iter().enumerate() {
            let lo = times[1 + 2 * i].time();
            let hi = times[2 + 2 * i].time();
            let window = match (lo, hi) {
                (Some(a), Some(b)) => Some(a as i64 - b as i64),
                _ => None,
            };
            if lo.is_none() || hi.is_none() {
                record.warn(format!(
                    "n={} k={} eps={eps}: horizon {} too short",
                    p.n(),
                    p.k(),
                    horizon(config, p)
                ));
            }
            record.push(vec![
                p.n().into(),
                p.k().into(),
                eps.into(),
                Cell::opt_int(lo),
                Cell::opt_int(hi),
                Cell::opt_int(window),
                window.map_or(Cell::Missing, |w| Cell::Real(w as f64 / n)),
                Cell::opt_int(half),
                p.center_large_k().into(),
                p.center_small_k().into(),
                half.map_or(Cell::Missing, |h| Cell::Real(h as f64 / p.center_large_k())),
                if p.k() > 1 {
                    half.map_or(Cell::Missing, |h| Cell::Real(h as f64 / p.center_small_k()))
                } else {
                    Cell::Missing
                },
            ]);
        }
    }
    record.set_meta("centers", centers_json(config));
    Ok(record)
}

/// Exact `d(t)`, the coupling tail `P^{k,0}[τ > t]`, and the pieces of its
/// decomposition: `e^{−α}` plus the survival of the dominating walk started
/// at `⌈k·e^{−α}/√n⌉` over `n` steps.
pub fn run_coupling_experiment(config: &ExperimentConfig) -> Result<ResultRecord> {
    let mut record = ResultRecord::new(
        config,
        vec![
            "n",
            "k",
            "alpha",
            "t",
            "exact_d",
            "coupling_tail",
            "coupling_stderr",
            "first_moment",
            "walk_start",
            "walk_survival",
            "decomposition_bound",
        ],
    );
    let root = StreamFactory::new(config.seed);
    let mut regimes = Vec::new();
    for (g, m) in config.grid.iter().enumerate() {
        let p = m.params();
        let n = p.n() as f64;
        let k = p.k() as f64;
        let in_regime = k >= n.sqrt();
        regimes.push(json!({ "n": p.n(), "k": p.k(), "k_ge_sqrt_n": in_regime }));
        if !in_regime {
            record.warn(format!(
                "n={} k={}: k < sqrt(n), the decomposition bound is outside its regime",
                p.n(),
                p.k()
            ));
        }
        let kernel = build_coupled_kernel(p)?;
        let mut rows: Vec<(Option<f64>, u64)> = config
            .alpha
            .iter()
            .map(|&a| (Some(a), clamp_time(p.center_large_k() + (a + 1.0) * n)))
            .collect();
        for &t in config.t_values.iter().flatten() {
            rows.push((None, t));
        }
        let cap = rows.iter().map(|r| r.1).max().unwrap_or(0);
        let exact = d_curve(p, cap as usize)?;
        let samples = merge_time_samples(
            &kernel,
            p.k(),
            0,
            cap,
            config.replicas,
            root.derive(g as u64),
        )?;
        for (alpha, t) in rows {
            let tail = tail_estimate(&samples, t);
            let mut row = vec![
                p.n().into(),
                p.k().into(),
                alpha.map_or(Cell::Missing, Cell::Real),
                t.into(),
                exact.tv[t as usize].into(),
                tail.value.into(),
                tail.stderr.into(),
            ];
            match alpha {
                Some(a) => {
                    let start = (k * (-a).exp() / n.sqrt()).ceil() as u64;
                    let walk = survival_exact(start, p.n(), kernel.walk_q());
                    let first = (-a).exp();
                    row.extend([
                        first.into(),
                        start.into(),
                        walk.into(),
                        (first + walk).min(1.0).into(),
                    ]);
                }
                None => row.extend([Cell::Missing, Cell::Missing, Cell::Missing, Cell::Missing]),
            }
            record.push(row);
        }
    }
    record.set_meta("regime", json!(regimes));
    record.set_meta("replicas", json!(config.replicas));
    Ok(record)
}

fn kernel_for(config: &ExperimentConfig, params: ModelParams) -> Result<BirthDeathKernel> {
    let base = build_kernel(params)?;
    Ok(match config.inject_fault {
        None => base,
        Some(Fault::Kernel) => {
            let mut up = base.up().to_vec();
            up[0] *= 1.01;
            BirthDeathKernel::from_parts(params, up, base.down().to_vec())?
        }
    })
}

fn bound_times(config: &ExperimentConfig, params: ModelParams) -> Vec<u64> {
    let mut ts: Vec<u64> = config.t_values.clone().unwrap_or_default();
    if config.t_values.is_none() || config.t_max.is_some() {
        let t_max = horizon(config, params);
        ts.extend(
            (config.t_min..=t_max)
                .step_by(config.stride)
                .map(|t| t as u64),
        );
    }
    let n = params.n() as f64;
    ts.extend(
        config
            .gamma
            .iter()
            .map(|g| clamp_time(params.center_large_k() - g * n)),
    );
    ts.sort_unstable();
    ts.dedup();
    ts
}

/// Lower bounds on the distance beside the exact value.
pub fn run_bounds_report(config: &ExperimentConfig) -> Result<ResultRecord> {
    let mut record = ResultRecord::new(
        config,
        vec![
            "n",
            "k",
            "t",
            "exact_d",
            "coupon_bound",
            "coupon_stderr",
            "coupon_bound_exact",
            "coupon_certified",
            "second_moment_bound",
            "residual",
            "labeled_bound",
            "labeled_stderr",
            "labeled_bound_exact",
            "labeled_certified",
            "labeled_tv",
        ],
    );
    let root = StreamFactory::new(config.seed);
    let mut betas = Vec::new();
    for (g, m) in config.grid.iter().enumerate() {
        let p = m.params();
        let factory = root.derive(g as u64);
        let times = bound_times(config, p);
        let coupon_spec = CollectorSpec::new(p.n(), p.k(), 0)?;
        let coupon = collection_time_samples(coupon_spec, config.replicas, factory.derive(0));
        let coupon_tail = collection_tail_exact(coupon_spec, &times)?;
        let coupon_penalty = unlabeled_penalty(p);
        let residual = config
            .residual
            .unwrap_or_else(|| p.k().saturating_sub(1).min(10));
        let labeled = if residual >= 1 && residual < p.k() {
            let spec = CollectorSpec::new(p.n(), p.k(), residual)?;
            let samples = collection_time_samples(spec, config.replicas, factory.derive(1));
            let tail = collection_tail_exact(spec, &times)?;
            Some((spec, samples, tail, labeled_penalty(spec)?))
        } else {
            if config.residual.is_some() {
                bail!("residual K = {residual} needs 1 <= K < k = {}", p.k());
            }
            None
        };
        let brute = if p.n() <= 12 && BruteForceChain::new(p, Mode::Labeled).is_ok() {
            Some(BruteForceChain::new(p, Mode::Labeled)?)
        } else {
            None
        };

        let kernel = build_kernel(p)?;
        let pi = equilibrium(p);
        let mut mu = DistributionVector::point_mass(kernel.len(), p.k())?;
        let mut brute_mu = brute.as_ref().map(|b| b.start_distribution());
        let mut now = 0u64;
        let mut best_beta: Option<f64> = None;
        for (row_idx, &t) in times.iter().enumerate() {
            mu = evolve(&mu, &kernel, (t - now) as usize)?;
            if let (Some(b), Some(bm)) = (&brute, brute_mu.as_mut()) {
                for _ in now..t {
                    *bm = b.step_distribution(bm);
                }
            }
            now = t;
            let c = unlabeled_bound_from_samples(p, &coupon, t)?;
            let coupon_exact = (coupon_tail[row_idx] - coupon_penalty).max(0.0);
            if coupon_exact >= 0.9 {
                let beta = (p.center_small_k() - t as f64) / p.n() as f64;
                best_beta = Some(best_beta.map_or(beta, |b: f64| b.min(beta)));
            }
            let mut row = vec![
                p.n().into(),
                p.k().into(),
                t.into(),
                tv_distance(&mu, &pi)?.into(),
                c.simulated.into(),
                c.stderr.into(),
                coupon_exact.into(),
                c.certified.into(),
                tv_lower_bound_second_moment(&mu, &pi)?.into(),
            ];
            match &labeled {
                Some((spec, samples, tail, penalty)) => {
                    let l = labeled_bound_from_samples(samples, *spec, t)?;
                    row.extend([
                        residual.into(),
                        l.simulated.into(),
                        l.stderr.into(),
                        (tail[row_idx] - penalty).max(0.0).into(),
                        l.certified.into(),
                    ]);
                }
                None => row.extend([
                    Cell::Missing,
                    Cell::Missing,
                    Cell::Missing,
                    Cell::Missing,
                    Cell::Missing,
                ]),
            }
            row.push(match (&brute, &brute_mu) {
                (Some(b), Some(bm)) => b.tv_to_uniform(bm).into(),
                _ => Cell::Missing,
            });
            record.push(row);
        }
        betas.push(json!({ "n": p.n(), "k": p.k(), "beta": best_beta }));
    }
    // smallest β with coupon bound ≥ 0.9 at t = n/2·log k − βn among the reported t
    record.set_meta("coupon_beta_at_0.9", json!(betas));
    record.set_meta("replicas", json!(config.replicas));
    Ok(record)
}

/// Survival of the lazy walk started at `⌈α√(qn)⌉` for `⌊βn⌋` steps,
/// exact, simulated and in the Gaussian limit.
pub fn run_hitting(config: &ExperimentConfig) -> Result<ResultRecord> {
    let mut record = ResultRecord::new(
        config,
        vec![
            "n",
            "q",
            "alpha",
            "beta",
            "start",
            "steps",
            "survival_exact",
            "survival_mc",
            "survival_stderr",
            "survival_bruteforce",
            "gaussian_limit",
            "gaussian_majorant",
        ],
    );
    let n = config.walk_n.expect("validated");
    let q = config.q.expect("validated");
    let root = StreamFactory::new(config.seed);
    let mut idx = 0u64;
    for &alpha in &config.alpha {
        for &beta in &config.beta {
            let walk = WalkParams::scaled(q, n, alpha)?;
            let steps = (beta * n as f64).floor() as usize;
            let exact = survival_exact(walk.start(), steps, q);
            let mc = survival_monte_carlo(walk, steps as u64, config.replicas, root.derive(idx));
            idx += 1;
            let brute = if steps <= BRUTEFORCE_MAX_STEPS {
                Cell::Real(survival_bruteforce(walk.start(), steps, q)?)
            } else {
                Cell::Missing
            };
            record.push(vec![
                n.into(),
                q.into(),
                alpha.into(),
                beta.into(),
                walk.start().into(),
                steps.into(),
                exact.into(),
                mc.value.into(),
                mc.stderr.into(),
                brute,
                gaussian_limit(alpha, beta)?.into(),
                gaussian_majorant(alpha, beta).into(),
            ]);
        }
    }
    record.set_meta("replicas", json!(config.replicas));
    Ok(record)
}

const ORACLE_TIMES: [usize; 6] = [0, 1, 2, 5, 10, 50];
const LUMPING_HORIZON: usize = 50;

struct Check {
    identity: &'static str,
    model: Option<ModelParams>,
    detail: String,
    residual: f64,
    tolerance: f64,
}

fn model_checks(config: &ExperimentConfig, p: ModelParams) -> Result<Vec<Check>> {
    let kernel = kernel_for(config, p)?;
    let mut out = Vec::new();
    let mut push = |identity, detail: &str, residual: f64, tolerance| {
        out.push(Check {
            identity,
            model: Some(p),
            detail: detail.to_string(),
            residual,
            tolerance,
        })
    };

    let brute = BruteForceChain::new(p, Mode::Unlabeled)?.tv_curve(LUMPING_HORIZON);
    let lumped = d_curve_with_kernel(&kernel, LUMPING_HORIZON, 1)?;
    let lumping = brute
        .iter()
        .zip(&lumped.tv)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    push("lumping_identity", "t<=50", lumping, 1e-12);

    let (mut mean_res, mut second_res) = (0.0f64, 0.0f64);
    let start = DistributionVector::point_mass(kernel.len(), p.k())?;
    for t in ORACLE_TIMES {
        let mu = evolve(&start, &kernel, t)?;
        let m = mean_w_closed_form(p, p.k(), t);
        let s = second_moment_closed_form(p, t);
        mean_res = mean_res.max((mu.mean() - m).abs() / m.abs().max(1.0));
        second_res = second_res.max((mu.second_moment() - s).abs() / s.abs().max(1.0));
    }
    push("mean_identity", "t in {0,1,2,5,10,50}", mean_res, 1e-10);
    push(
        "second_moment_identity",
        "t in {0,1,2,5,10,50}",
        second_res,
        1e-10,
    );

    let pi = equilibrium(p);
    let pr = pi.probs();
    let balance = (0..p.k())
        .map(|i| (pr[i] * kernel.up()[i] - pr[i + 1] * kernel.down()[i + 1]).abs())
        .fold(0.0, f64::max);
    push("detailed_balance", "", balance, 1e-10);
    push(
        "eigenfunction",
        "lambda=1-2/n",
        eigenfunction_check(&kernel),
        1e-12,
    );

    match CoupledKernel::new(kernel) {
        Ok(coupled) => push("marginal_identity", "", coupled.marginal_residual(), 1e-12),
        // a kernel that cannot be coupled fails the identity outright
        Err(e) => push("marginal_identity", &e.to_string(), 1.0, 1e-12),
    }
    Ok(out)
}

/// Cross-validation of the chain against its oracles; any residual above its
/// tolerance is a failure.
pub fn run_oracle_check(config: &ExperimentConfig) -> Result<Outcome> {
    if config.grid.is_empty() {
        bail!("oracle-check grid is empty");
    }
    for m in &config.grid {
        let size = state_space_size(m.params(), Mode::Unlabeled);
        if size > STATE_SPACE_CAP as u128 {
            bail!(
                "n={} k={}: {size} states exceeds the brute-force cap {STATE_SPACE_CAP}",
                m.n,
                m.k
            );
        }
    }
    let mut checks = config
        .grid
        .par_iter()
        .map(|m| model_checks(config, m.params()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    if config.steps_max > BRUTEFORCE_MAX_STEPS {
        bail!(
            "steps_max {} exceeds {BRUTEFORCE_MAX_STEPS}",
            config.steps_max
        );
    }
    for q in [0.1, 0.5, 1.0] {
        let mut worst = 0.0f64;
        for m in 1..=config.m_max {
            for steps in 0..=config.steps_max {
                let exact = survival_exact(m, steps, q);
                worst = worst.max((exact - survival_bruteforce(m, steps, q)?).abs());
            }
        }
        checks.push(Check {
            identity: "reflection_identity",
            model: None,
            detail: format!("q={q} m<={} steps<={}", config.m_max, config.steps_max),
            residual: worst,
            tolerance: 1e-12,
        });
    }

    let mut record = ResultRecord::new(
        config,
        vec![
            "identity",
            "n",
            "k",
            "detail",
            "residual",
            "tolerance",
            "pass",
        ],
    );
    let mut failed = Vec::new();
    for c in checks {
        let pass = c.residual <= c.tolerance;
        if !pass {
            let at = c
                .model
                .map_or(String::new(), |p| format!(" at n={} k={}", p.n(), p.k()));
            failed.push(format!(
                "{}{at}: residual {:e} > {:e}",
                c.identity, c.residual, c.tolerance
            ));
        }
        record.push(vec![
            c.identity.into(),
            Cell::opt_int(c.model.map(|p| p.n() as i64)),
            Cell::opt_int(c.model.map(|p| p.k() as i64)),
            c.detail.as_str().into(),
            c.residual.into(),
            c.tolerance.into(),
            pass.into(),
        ]);
    }
    let failures = failed.len();
    record.set_meta("failures", json!(failed));
    Ok(Outcome { record, failures })
}
