//! Wiener increments on a uniform mesh.
//!
//! Every path gets its own random stream, keyed by `(master_seed, path_index)`
//! through [`derive_path_seed`], so results do not depend on the order in
//! which paths are simulated or on how many threads simulate them. Within a
//! stream, increments are drawn row by row (step-major) from a ChaCha8
//! generator with ziggurat normal sampling and scaled by `sqrt(h)`.
//!
//! Strong errors are only meaningful when every resolution is driven by the
//! same Brownian path, so callers generate the finest grid first and derive
//! coarser grids from it with [`BrownianGrid::coarsen`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::GridError;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer.
fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream of path `path_index` under `master_seed`.
///
/// This is the `path_index`-th output (0-based) of a SplitMix64 generator
/// seeded with `master_seed`. Since the finalizer is a bijection, distinct
/// indices under one master seed always give distinct stream seeds, and
/// `derive_path_seed(0, 0)` is the reference SplitMix64 vector
/// `0xe220a8397b1dcdaf`.
pub fn derive_path_seed(master_seed: u64, path_index: u64) -> u64 {
    let state = master_seed.wrapping_add(path_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    splitmix64_mix(state)
}

/// Where a grid's random numbers came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance {
    /// Seed of the generator that produced the increments.
    pub stream_seed: u64,
    /// Set when the stream seed was derived from a master seed.
    pub path: Option<PathId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathId {
    pub master_seed: u64,
    pub path_index: u64,
}

/// Increments `ΔW_n = W_{t_{n+1}} - W_{t_n}` of an `m`-dimensional Wiener
/// process on `N` uniform steps over `[0, T]`.
///
/// Stored row-major: row `n` holds the `m` components of `ΔW_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid {
    horizon: f64,
    steps: usize,
    noise_dim: usize,
    increments: Vec<f64>,
    provenance: Provenance,
}

fn validate(steps: usize, noise_dim: usize, horizon: f64) -> Result<(), GridError> {
    if steps == 0 {
        return Err(GridError::ZeroSteps);
    }
    if noise_dim == 0 {
        return Err(GridError::ZeroNoiseDim);
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(GridError::BadHorizon(horizon));
    }
    Ok(())
}

impl BrownianGrid {
    /// Draws `steps × noise_dim` independent `Normal(0, horizon / steps)`
    /// increments from the stream seeded with `seed`.
    pub fn generate(seed: u64, steps: usize, noise_dim: usize, horizon: f64) -> Result<Self, GridError> {
        Self::generate_with(
            Provenance {
                stream_seed: seed,
                path: None,
            },
            steps,
            noise_dim,
            horizon,
        )
    }

    /// Generates the grid for one Monte Carlo path.
    pub fn for_path(
        master_seed: u64,
        path_index: u64,
        steps: usize,
        noise_dim: usize,
        horizon: f64,
    ) -> Result<Self, GridError> {
        Self::generate_with(
            Provenance {
                stream_seed: derive_path_seed(master_seed, path_index),
                path: Some(PathId {
                    master_seed,
                    path_index,
                }),
            },
            steps,
            noise_dim,
            horizon,
        )
    }

    fn generate_with(
        provenance: Provenance,
        steps: usize,
        noise_dim: usize,
        horizon: f64,
    ) -> Result<Self, GridError> {
        validate(steps, noise_dim, horizon)?;
        let scale = (horizon / steps as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(provenance.stream_seed);
        let increments = (0..steps * noise_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        Ok(Self {
            horizon,
            steps,
            noise_dim,
            increments,
            provenance,
        })
    }

    /// Builds a grid from explicit increments (row-major, `steps × noise_dim`).
    pub fn from_increments(
        increments: Vec<f64>,
        noise_dim: usize,
        horizon: f64,
    ) -> Result<Self, GridError> {
        if noise_dim == 0 {
            return Err(GridError::ZeroNoiseDim);
        }
        if !increments.len().is_multiple_of(noise_dim) {
            return Err(GridError::RaggedIncrements {
                len: increments.len(),
                noise_dim,
            });
        }
        let steps = increments.len() / noise_dim;
        validate(steps, noise_dim, horizon)?;
        Ok(Self {
            horizon,
            steps,
            noise_dim,
            increments,
            provenance: Provenance {
                stream_seed: 0,
                path: None,
            },
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Mesh width `h = T / N`.
    pub fn mesh_width(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `ΔW_n` as an `m`-slice.
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.noise_dim..(n + 1) * self.noise_dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.increments.chunks_exact(self.noise_dim)
    }

    /// Flat row-major increments.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W_T - W_0`, summed pairwise (see [`BrownianGrid::coarsen`]).
    pub fn terminal_value(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.noise_dim];
        pairwise_row_sum(&self.increments, self.noise_dim, &mut total);
        total
    }

    /// Sums consecutive blocks of `factor` rows into one coarse row.
    ///
    /// Each block is summed by recursive halving with a fixed split, so for
    /// power-of-two sizes coarsening by `a` then `b` is bitwise identical to
    /// coarsening by `a·b`, and [`terminal_value`](Self::terminal_value) is
    /// bitwise preserved.
    pub fn coarsen(&self, factor: usize) -> Result<Self, GridError> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(GridError::BadCoarsening {
                factor,
                steps: self.steps,
            });
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let m = self.noise_dim;
        let coarse_steps = self.steps / factor;
        let mut increments = vec![0.0; coarse_steps * m];
        for (block, out) in self
            .increments
            .chunks_exact(factor * m)
            .zip(increments.chunks_exact_mut(m))
        {
            pairwise_row_sum(block, m, out);
        }
        Ok(Self {
            horizon: self.horizon,
            steps: coarse_steps,
            noise_dim: m,
            increments,
            provenance: self.provenance,
        })
    }
}

/// Column sums of a row-major block, splitting the rows in half recursively.
fn pairwise_row_sum(block: &[f64], m: usize, out: &mut [f64]) {
    let rows = block.len() / m;
    for (j, o) in out.iter_mut().enumerate() {
        *o = pairwise_column(block, m, j, 0, rows);
    }
}

fn pairwise_column(block: &[f64], m: usize, j: usize, start: usize, rows: usize) -> f64 {
    if rows == 1 {
        return block[start * m + j];
    }
    let half = rows / 2;
    pairwise_column(block, m, j, start, half) + pairwise_column(block, m, j, start + half, rows - half)
}

/// Symmetric `m × m` matrix (row-major) with entries
/// `½ (dW[j1] dW[j2] - δ_{j1 j2} h)`.
///
/// Under commutative noise this replaces the iterated Itô integrals in the
/// Milstein correction.
pub fn pair_products(dw: &[f64], h: f64) -> Vec<f64> {
    let m = dw.len();
    let mut out = vec![0.0; m * m];
    pair_products_into(dw, h, &mut out);
    out
}

pub(crate) fn pair_products_into(dw: &[f64], h: f64, out: &mut [f64]) {
    let m = dw.len();
    debug_assert_eq!(out.len(), m * m);
    for j1 in 0..m {
        for j2 in 0..m {
            let mut v = dw[j1] * dw[j2];
            if j1 == j2 {
                v -= h;
            }
            out[j1 * m + j2] = 0.5 * v;
        }
    }
}
