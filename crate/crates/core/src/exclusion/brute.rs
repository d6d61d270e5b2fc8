//! Exhaustive oracle: the exact law of the full configuration chain,
//! evolved with the `n²` ordered-pair kernel and compared to uniform.

use std::collections::HashMap;

use super::{initial_configuration, Mode, ModelParams};
use crate::error::{Error, Result};

pub const STATE_SPACE_CAP: usize = 1_000_000;

/// The configuration chain on the whole of `Ω(n,k)` (or the labeled space),
/// stored as sparse rows: a hold weight plus a list of swap targets, each
/// reached with probability `2/n²`.
#[derive(Debug, Clone)]
pub struct BruteForceChain {
    params: ModelParams,
    mode: Mode,
    states: Vec<Vec<u32>>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    hold: Vec<f64>,
    start: usize,
}

pub fn state_space_size(params: ModelParams, mode: Mode) -> u128 {
    let (n, k) = (params.n() as u128, params.k() as u128);
    match mode {
        Mode::Unlabeled => {
            let mut c: u128 = 1;
            for i in 0..k {
                c = c * (n - i) / (i + 1);
            }
            c
        }
        Mode::Labeled => (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i)),
    }
}

impl BruteForceChain {
    pub fn new(params: ModelParams, mode: Mode) -> Result<Self> {
        let size = state_space_size(params, mode);
        if size > STATE_SPACE_CAP as u128 {
            return Err(Error::StateSpaceTooLarge {
                size,
                cap: STATE_SPACE_CAP,
            });
        }
        let (n, k) = (params.n(), params.k());
        let mut states = Vec::with_capacity(size as usize);
        let mut cells = vec![0u32; n];
        match mode {
            Mode::Unlabeled => enumerate_subsets(&mut cells, 0, k, &mut states),
            Mode::Labeled => {
                let mut used = vec![false; n];
                enumerate_arrangements(&mut cells, &mut used, 1, k, &mut states)
            }
        }
        debug_assert_eq!(states.len() as u128, size);

        let index: HashMap<&[u32], u32> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_slice(), i as u32))
            .collect();
        let rate = 2.0 / (n as f64 * n as f64);
        let mut offsets = Vec::with_capacity(states.len() + 1);
        let mut targets = Vec::new();
        let mut hold = Vec::with_capacity(states.len());
        let mut scratch = vec![0u32; n];
        offsets.push(0);
        for s in &states {
            let before = targets.len();
            for x in 0..n {
                for y in x + 1..n {
                    if s[x] != s[y] {
                        scratch.copy_from_slice(s);
                        scratch.swap(x, y);
                        targets.push(index[scratch.as_slice()]);
                    }
                }
            }
            hold.push(1.0 - rate * (targets.len() - before) as f64);
            offsets.push(targets.len());
        }
        let start_cells = initial_configuration(params, mode).into_cells();
        let start = index[start_cells.as_slice()] as usize;
        drop(index);
        Ok(Self {
            params,
            mode,
            states,
            offsets,
            targets,
            hold,
            start,
        })
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn start_distribution(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.len()];
        mu[self.start] = 1.0;
        mu
    }

    pub fn step_distribution(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.params.n() as f64;
        let rate = 2.0 / (n * n);
        let mut next: Vec<f64> = mu.iter().zip(&self.hold).map(|(m, h)| m * h).collect();
        for (s, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let flow = m * rate;
            for &t in &self.targets[self.offsets[s]..self.offsets[s + 1]] {
                next[t as usize] += flow;
            }
        }
        next
    }

    /// Total variation distance between `mu` and the uniform law.
    pub fn tv_to_uniform(&self, mu: &[f64]) -> f64 {
        let u = 1.0 / self.len() as f64;
        0.5 * mu.iter().map(|m| (m - u).abs()).sum::<f64>()
    }

    /// `‖μ_t − π‖` for `t = 0..=t_max` from the standard start.
    pub fn tv_curve(&self, t_max: usize) -> Vec<f64> {
        let mut mu = self.start_distribution();
        let mut out = Vec::with_capacity(t_max + 1);
        out.push(self.tv_to_uniform(&mu));
        for _ in 0..t_max {
            mu = self.step_distribution(&mu);
            out.push(self.tv_to_uniform(&mu));
        }
        out
    }
}

fn enumerate_subsets(cells: &mut [u32], from: usize, left: usize, out: &mut Vec<Vec<u32>>) {
    if left == 0 {
        out.push(cells.to_vec());
        return;
    }
    for x in from..=cells.len() - left {
        cells[x] = 1;
        enumerate_subsets(cells, x + 1, left - 1, out);
        cells[x] = 0;
    }
}

fn enumerate_arrangements(
    cells: &mut [u32],
    used: &mut [bool],
    label: usize,
    k: usize,
    out: &mut Vec<Vec<u32>>,
) {
    if label > k {
        out.push(cells.to_vec());
        return;
    }
    for x in 0..cells.len() {
        if !used[x] {
            used[x] = true;
            cells[x] = label as u32;
            enumerate_arrangements(cells, used, label + 1, k, out);
            cells[x] = 0;
            used[x] = false;
        }
    }
}

/// Exact `‖μ_t^{η_0} − π‖` on the full state space. Refuses state spaces
/// above [`STATE_SPACE_CAP`].
pub fn brute_force_tv(params: ModelParams, mode: Mode, t: usize) -> Result<f64> {
    Ok(brute_force_tv_curve(params, mode, t)?[t])
}

pub fn brute_force_tv_curve(params: ModelParams, mode: Mode, t_max: usize) -> Result<Vec<f64>> {
    Ok(BruteForceChain::new(params, mode)?.tv_curve(t_max))
}
