//! Brownian sheet sampling with counter-based, thread-independent seeding.
//!
//! Every Gaussian draw is a pure function of `(seed, stream, index)`: the
//! ChaCha8 keystream for `seed` is split into independent streams, the
//! `index`-th 64-bit word pair of a stream is mapped to a uniform in (0,1),
//! and the uniform is pushed through the inverse normal CDF. Cells of a
//! sheet use their row-major cell index, so the same `(grid, seed)` gives a
//! bit-identical path no matter how replications are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

use crate::grid::{CellField, Field, Grid};

/// Stream identifiers carved out of one seed.
pub mod streams {
    pub const SHEET: u64 = 0;
    pub const PAIR_FIRST: u64 = 1;
    pub const PAIR_SECOND: u64 = 2;
    pub const INITIAL_VALUE: u64 = 3;
    pub const REPLICATION: u64 = 4;
    pub const PERTURBATION: u64 = 5;
    pub const SELECTION: u64 = 6;
}

/// Standard normal quantile.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

#[inline]
fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Sequential reader over one `(seed, stream)` keystream.
///
/// Draw `k` of a fresh stream equals `NormalStream::at(seed, stream, k)`.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NormalStream { rng }
    }

    /// Positions the stream so the next draw is draw number `index`.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(2 * index as u128);
    }

    /// Draw number `index` of the stream, independent of any other draw.
    pub fn at(seed: u64, stream: u64, index: u64) -> f64 {
        let mut s = NormalStream::new(seed, stream);
        s.seek(index);
        s.next_normal()
    }

    pub fn next_uniform(&mut self) -> f64 {
        to_open_unit(self.rng.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn next_normal(&mut self) -> f64 {
        normal_quantile(self.next_uniform())
    }
}

/// Seed of replication `index` in a campaign driven by `master`.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    let mut s = NormalStream::new(master, streams::REPLICATION);
    s.seek(index);
    s.next_u64()
}

/// One realization of a Brownian sheet on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetPath {
    /// `B` at every node; zero on both axes.
    pub values: Field,
    /// `B` over each cell, `N(0, dt dx)`.
    pub increments: CellField,
    pub seed: u64,
}

impl SheetPath {
    /// Builds the path from its cell increments.
    pub fn from_increments(increments: CellField, seed: u64) -> Self {
        let values = sum_increments(&increments);
        SheetPath { values, increments, seed }
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }
}

/// Node values of a sheet whose cell increments are given, swept row by row.
pub(crate) fn sum_increments(increments: &CellField) -> Field {
    let grid = *increments.grid();
    let mut values = Field::zeros(grid);
    for i in 0..grid.nt() {
        let mut acc = 0.0;
        for j in 0..grid.nx() {
            acc += increments.get(i, j);
            let v = values.get(i, j + 1) + acc;
            values.set(i + 1, j + 1, v);
        }
    }
    values
}

fn sample_stream(grid: Grid, seed: u64, stream: u64) -> SheetPath {
    let sd = grid.cell_area().sqrt();
    let mut normals = NormalStream::new(seed, stream);
    let mut inc = Vec::with_capacity(grid.cell_count());
    for _ in 0..grid.cell_count() {
        inc.push(sd * normals.next_normal());
    }
    let increments = CellField::from_values(grid, inc).expect("finite gaussian draws");
    SheetPath::from_increments(increments, seed)
}

/// Samples one Brownian sheet.
pub fn sample_sheet(grid: Grid, seed: u64) -> SheetPath {
    sample_stream(grid, seed, streams::SHEET)
}

/// Samples two independent sheets from disjoint sub-streams of `seed`.
pub fn sample_independent_pair(grid: Grid, seed: u64) -> (SheetPath, SheetPath) {
    (
        sample_stream(grid, seed, streams::PAIR_FIRST),
        sample_stream(grid, seed, streams::PAIR_SECOND),
    )
}
