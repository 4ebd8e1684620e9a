//! Path simulation of the signal `Y` and observation `U`, and the innovation
//! increments `N(dz)` and `M(dz) = N(dz) / D`.
//!
//! Both SPDEs are integrated with the explicit corner recursion
//! `V(i+1,j+1) = V(i+1,j) + V(i,j+1) - V(i,j) + drift(i,j) dt dx + noise(i,j)`,
//! with drift and noise coefficients taken at the cell's lower-left corner.

use crate::error::{Error, Result};
use crate::grid::{CellField, Field, Grid};
use crate::scenario::{Coefficients, Scenario};
use crate::sheet::{sample_independent_pair, streams, NormalStream, SheetPath};

/// One joint realization of signal and observation.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub y: Field,
    pub u: Field,
    /// Observation increment over each cell.
    pub du: CellField,
    pub y0_draw: f64,
    pub seed: u64,
    pub b1: SheetPath,
    pub b2: SheetPath,
}

/// Innovation increments of one filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPath {
    /// `N(dz) = U(dz) - G Yhat dz`.
    pub dn: CellField,
    /// `M(dz) = N(dz) / D`.
    pub dm: CellField,
}

/// Sums cell increments into node values, starting from `boundary` on both axes.
fn corner_sweep(grid: Grid, boundary: f64, mut increment: impl FnMut(usize, usize) -> f64) -> Field {
    let mut v = Field::constant(grid, boundary);
    for i in 0..grid.nt() {
        let mut acc = 0.0;
        for j in 0..grid.nx() {
            acc += increment(i, j);
            let below = v.get(i, j + 1);
            v.set(i + 1, j + 1, below + acc);
        }
    }
    v
}

/// Simulates one path with pre-sampled coefficients.
pub fn simulate_with(
    coeffs: &Coefficients,
    scenario: &Scenario,
    grid: Grid,
    seed: u64,
) -> PathBundle {
    let area = grid.cell_area();
    let (b1, b2) = sample_independent_pair(grid, seed);
    let y0_draw =
        scenario.mu0 + scenario.sigma0_sq.sqrt() * NormalStream::at(seed, streams::INITIAL_VALUE, 0);

    let mut y = Field::constant(grid, y0_draw);
    for i in 0..grid.nt() {
        let mut acc = 0.0;
        for j in 0..grid.nx() {
            acc += coeffs.f.get(i, j) * y.get(i, j) * area
                + coeffs.c.get(i, j) * b1.increments.get(i, j);
            let below = y.get(i, j + 1);
            y.set(i + 1, j + 1, below + acc);
        }
    }

    let mut du = CellField::zeros(grid);
    for i in 0..grid.nt() {
        for j in 0..grid.nx() {
            let inc = coeffs.g.get(i, j) * y.get(i, j) * area
                + coeffs.d.get(i, j) * b2.increments.get(i, j);
            du.set(i, j, inc);
        }
    }
    let u = corner_sweep(grid, scenario.u0, |i, j| du.get(i, j));

    PathBundle { y, u, du, y0_draw, seed, b1, b2 }
}

/// Simulates signal and observation for one seed.
pub fn simulate_paths(scenario: &Scenario, grid: Grid, seed: u64) -> Result<PathBundle> {
    scenario.ensure_valid(&grid)?;
    Ok(simulate_with(&scenario.discretize(grid), scenario, grid, seed))
}

/// Cell increments `U(i+1,j+1) - U(i+1,j) - U(i,j+1) + U(i,j)` of a stored surface.
pub fn increments_of(u: &Field) -> CellField {
    let grid = *u.grid();
    let mut du = CellField::zeros(grid);
    for i in 0..grid.nt() {
        for j in 0..grid.nx() {
            let d = u.get(i + 1, j + 1) - u.get(i + 1, j) - u.get(i, j + 1) + u.get(i, j);
            du.set(i, j, d);
        }
    }
    du
}

/// Innovation increments from observation increments and an estimate surface.
pub fn innovation_from_increments(
    coeffs: &Coefficients,
    du: &CellField,
    yhat: &Field,
) -> Result<InnovationPath> {
    let grid = *du.grid();
    if !grid.same_shape(yhat.grid()) || !grid.same_shape(coeffs.g.grid()) {
        return Err(Error::Domain("innovation inputs live on different grids".into()));
    }
    let area = grid.cell_area();
    let mut dn = CellField::zeros(grid);
    let mut dm = CellField::zeros(grid);
    for i in 0..grid.nt() {
        for j in 0..grid.nx() {
            let n = du.get(i, j) - coeffs.g.get(i, j) * yhat.get(i, j) * area;
            dn.set(i, j, n);
            dm.set(i, j, n / coeffs.d.get(i, j));
        }
    }
    Ok(InnovationPath { dn, dm })
}

/// Innovation of a simulated bundle with respect to an estimate surface.
pub fn innovation(bundle: &PathBundle, yhat: &Field, scenario: &Scenario) -> Result<InnovationPath> {
    let coeffs = scenario.discretize(*bundle.du.grid());
    innovation_from_increments(&coeffs, &bundle.du, yhat)
}
