//! Exclusion process on the complete graph with `n` vertices and `k`
//! particles, in both unlabeled (0/1) and labeled (0..=k) form.
//!
//! Vertex indices in the public API are 1-based; storage is 0-based.

mod brute;

pub use brute::{
    brute_force_tv, brute_force_tv_curve, state_space_size, BruteForceChain, STATE_SPACE_CAP,
};

use rand::Rng;

use crate::error::{Error, Result};

/// The `(n, k)` pair of a complete-graph exclusion instance.
///
/// Construction enforces `n >= 2` and `1 <= k <= n / 2`; callers needing
/// `k > n / 2` swap particles and holes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelParams {
    n: usize,
    k: usize,
}

impl ModelParams {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams {
                n,
                k,
                rule: "n >= 2",
            });
        }
        if k < 1 {
            return Err(Error::InvalidParams {
                n,
                k,
                rule: "k >= 1",
            });
        }
        if k > n / 2 {
            return Err(Error::InvalidParams {
                n,
                k,
                rule: "k <= n/2",
            });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `n/4 · log n`, the cutoff location when `k ≫ √n`.
    pub fn center_large_k(&self) -> f64 {
        let n = self.n as f64;
        n / 4.0 * n.ln()
    }

    /// `n/2 · log k`, the cutoff location when `k ≪ √n`.
    pub fn center_small_k(&self) -> f64 {
        self.n as f64 / 2.0 * (self.k as f64).ln()
    }

    /// Equilibrium mean of W, `k²/n`.
    pub fn equilibrium_mean(&self) -> f64 {
        let k = self.k as f64;
        k * k / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Unlabeled,
    Labeled,
}

/// Occupancy of every vertex. Unlabeled cells hold 0 or 1; labeled cells hold
/// 0 (empty) or the label of the particle sitting there.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    mode: Mode,
    k: usize,
    cells: Vec<u32>,
}

impl Configuration {
    /// Validates `cells` and infers the particle count from them.
    pub fn from_cells(mode: Mode, cells: Vec<u32>) -> Result<Self> {
        let k = match mode {
            Mode::Unlabeled => {
                if let Some(bad) = cells.iter().find(|&&c| c > 1) {
                    return Err(Error::InvalidConfiguration(format!(
                        "unlabeled cell value {bad} not in {{0,1}}"
                    )));
                }
                cells.iter().filter(|&&c| c == 1).count()
            }
            Mode::Labeled => {
                let k = cells.iter().filter(|&&c| c != 0).count();
                let mut seen = vec![false; k + 1];
                for &c in cells.iter().filter(|&&c| c != 0) {
                    let c = c as usize;
                    if c > k || seen[c] {
                        return Err(Error::InvalidConfiguration(format!(
                            "labels must be exactly 1..={k}, found {c} out of place"
                        )));
                    }
                    seen[c] = true;
                }
                k
            }
        };
        Ok(Self { mode, k, cells })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<u32> {
        self.cells
    }

    /// Swaps the contents of `sel.x` and `sel.y` in place.
    pub fn apply(&mut self, sel: PairSelection) -> Result<()> {
        let n = self.n();
        for index in [sel.x, sel.y] {
            if index == 0 || index > n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        self.cells.swap(sel.x - 1, sel.y - 1);
        Ok(())
    }
}

/// Starting state: particles on vertices `1..=k`; labeled mode puts label `x`
/// on vertex `x`.
pub fn initial_configuration(params: ModelParams, mode: Mode) -> Configuration {
    let cells = (1..=params.n)
        .map(|x| match (mode, x <= params.k) {
            (_, false) => 0,
            (Mode::Unlabeled, true) => 1,
            (Mode::Labeled, true) => x as u32,
        })
        .collect();
    Configuration {
        mode,
        k: params.k,
        cells,
    }
}

/// An ordered vertex pair `(x, y)`, 1-based. `x == y` is allowed and means
/// the step does nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairSelection {
    pub x: usize,
    pub y: usize,
}

impl PairSelection {
    pub fn new(x: usize, y: usize, n: usize) -> Result<Self> {
        for index in [x, y] {
            if index == 0 || index > n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        Ok(Self { x, y })
    }
}

/// One transition: the contents of `sel.x` and `sel.y` are exchanged.
pub fn step(config: &Configuration, sel: PairSelection) -> Result<Configuration> {
    let mut next = config.clone();
    next.apply(sel)?;
    Ok(next)
}

/// Uniform ordered pair on `{1..n}²`, both coordinates independent.
pub fn draw_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PairSelection {
    PairSelection {
        x: rng.random_range(1..=n),
        y: rng.random_range(1..=n),
    }
}

/// Number of particles on the block `{1..k}`.
pub fn w_statistic(config: &Configuration) -> usize {
    config.cells[..config.k].iter().filter(|&&c| c != 0).count()
}

/// Number of labels `i` still sitting on vertex `i`.
pub fn fixed_points(config: &Configuration) -> Result<usize> {
    if config.mode != Mode::Labeled {
        return Err(Error::NotLabeled);
    }
    Ok(config.cells[..config.k]
        .iter()
        .enumerate()
        .filter(|&(i, &c)| c as usize == i + 1)
        .count())
}

/// Runs the full configuration chain from the standard start and records
/// `W_0, …, W_{t_max}`.
pub fn simulate_w_trajectory<R: Rng + ?Sized>(
    params: ModelParams,
    t_max: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut config = initial_configuration(params, Mode::Unlabeled);
    let k = params.k;
    let mut w = k;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(w);
    for _ in 0..t_max {
        let sel = draw_pair(params.n, rng);
        let (a, b) = (sel.x - 1, sel.y - 1);
        let (ca, cb) = (config.cells[a], config.cells[b]);
        if ca != cb && ((a < k) != (b < k)) {
            // the particle crosses the block boundary
            let inside = if a < k { ca } else { cb };
            if inside == 1 {
                w -= 1;
            } else {
                w += 1;
            }
        }
        config.cells.swap(a, b);
        out.push(w);
    }
    debug_assert_eq!(w, w_statistic(&config));
    out
}
