//! The estimate surface `Yhat(z) = E[Y(z) | U on [0,z]]` from the integral equation
//!
//! `Yhat(z) = m(z) - int_[0,z] (G^2/D^2) K(u;z) S(u) Yhat(u) du + int_[0,z] (G/D^2) K(u;z) S(u) U(du)`.
//!
//! Both integrals run over the cells inside `[0,z]` with integrands at the
//! cell's lower-left corner and `U(du)` replaced by the cell increment, so a
//! row sweep computes every node from nodes already known.

use crate::error::{Error, Result};
use crate::error_surface::{solve_with, CorrectionSign, ErrorSurface};
use crate::grid::{CellField, Field, Grid, Node};
use crate::kernel::{KernelTable, KernelTruncation};
use crate::moments::MomentSet;
use crate::scenario::{Coefficients, Scenario};
use crate::simulate::{innovation_from_increments, InnovationPath};

/// Output of one filter pass.
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub yhat: Field,
    pub scenario_id: &'static str,
    pub seed: Option<u64>,
    pub surface: ErrorSurface,
    pub innovation: InnovationPath,
}

impl FilterRun {
    pub fn grid(&self) -> &Grid {
        self.yhat.grid()
    }

    pub fn estimate(&self, z: Node) -> f64 {
        self.yhat.at(z)
    }
}

/// Cell weights of the two integrals: `(G^2/D^2) S dt dx` and `(G/D^2) S`.
struct Gains {
    drift: CellField,
    obs: CellField,
}

fn gains(coeffs: &Coefficients, s: &Field) -> Gains {
    let grid = *s.grid();
    let area = grid.cell_area();
    let mut drift = CellField::zeros(grid);
    let mut obs = CellField::zeros(grid);
    for i in 0..grid.nt() {
        for j in 0..grid.nx() {
            let g = coeffs.g.get(i, j);
            let d2 = coeffs.d.get(i, j) * coeffs.d.get(i, j);
            let sv = s.get(i, j);
            drift.set(i, j, g * g / d2 * sv * area);
            obs.set(i, j, g / d2 * sv);
        }
    }
    Gains { drift, obs }
}

fn sweep(kernel: &KernelTable, gains: &Gains, m: &Field, du: &CellField) -> Field {
    let grid = *m.grid();
    let mut y = m.clone();
    if kernel.is_unit() {
        // running column sums of both integrals, updated one cell row at a time
        let mut drift_row = vec![0.0; grid.nx() + 1];
        let mut obs_row = vec![0.0; grid.nx() + 1];
        for i in 0..grid.nt() {
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..grid.nx() {
                a += gains.drift.get(i, j) * y.get(i, j);
                b += gains.obs.get(i, j) * du.get(i, j);
                drift_row[j + 1] += a;
                obs_row[j + 1] += b;
            }
            for j in 0..=grid.nx() {
                y.set(i + 1, j, m.get(i + 1, j) - drift_row[j] + obs_row[j]);
            }
        }
        return y;
    }
    for i in 1..=grid.nt() {
        for j in 1..=grid.nx() {
            let z = Node::new(i, j);
            let (mut a, mut b) = (0.0, 0.0);
            for p in 0..i {
                for q in 0..j {
                    let k = kernel.get(Node::new(p, q), z);
                    a += gains.drift.get(p, q) * k * y.get(p, q);
                    b += gains.obs.get(p, q) * k * du.get(p, q);
                }
            }
            y.set(i, j, m.get(i, j) - a + b);
        }
    }
    y
}

fn check_shapes(grid: &Grid, parts: &[&Grid]) -> Result<()> {
    if parts.iter().all(|g| grid.same_shape(g)) {
        Ok(())
    } else {
        Err(Error::Domain("filter inputs live on different grids".into()))
    }
}

/// Evaluates the filter on observation increments `du`.
pub fn run_filter(
    scenario: &Scenario,
    grid: Grid,
    du: &CellField,
    s: &ErrorSurface,
    k: &KernelTable,
    m: &Field,
) -> Result<FilterRun> {
    check_shapes(&grid, &[du.grid(), s.grid(), k.grid(), m.grid()])?;
    let coeffs = scenario.discretize(grid);
    let yhat = sweep(k, &gains(&coeffs, &s.s), m, du);
    let innovation = innovation_from_increments(&coeffs, du, &yhat)?;
    Ok(FilterRun { yhat, scenario_id: scenario.preset.name(), seed: None, surface: s.clone(), innovation })
}

/// `m(z) + int_[0,z] (G/D) K(u;z) S(u) M(du)` from the run's own innovation.
pub fn reconstruct_via_innovation(
    run: &FilterRun,
    scenario: &Scenario,
    k: &KernelTable,
    s: &ErrorSurface,
    m: &Field,
) -> Field {
    let grid = *run.grid();
    let coeffs = scenario.discretize(grid);
    let dm = &run.innovation.dm;
    let mut w = CellField::zeros(grid);
    for i in 0..grid.nt() {
        for j in 0..grid.nx() {
            let g = coeffs.g.get(i, j) / coeffs.d.get(i, j) * s.s.get(i, j);
            w.set(i, j, g * dm.get(i, j));
        }
    }
    let mut out = m.clone();
    for i in 1..=grid.nt() {
        for j in 1..=grid.nx() {
            let z = Node::new(i, j);
            let mut acc = 0.0;
            for p in 0..i {
                for q in 0..j {
                    acc += k.get(Node::new(p, q), z) * w.get(p, q);
                }
            }
            out.set(i, j, m.get(i, j) + acc);
        }
    }
    out
}

/// Everything the filter needs that does not depend on observations:
/// kernel, prior moments, error surface and cell gains.
pub struct FilterModel {
    scenario: Scenario,
    kernel: KernelTable,
    coeffs: Coefficients,
    mean: Field,
    var: Field,
    surface: ErrorSurface,
    gains: Gains,
}

impl FilterModel {
    pub fn new(scenario: &Scenario, grid: Grid, trunc: &KernelTruncation) -> Result<Self> {
        scenario.ensure_valid(&grid)?;
        let kernel = KernelTable::build(scenario, grid, trunc)?;
        let coeffs = scenario.discretize(grid);
        let (mean, var, surface) = {
            let moments = MomentSet::new(scenario, &kernel);
            let surface = solve_with(&moments, &coeffs, CorrectionSign::Minus, *trunc)?;
            (moments.mean().clone(), moments.var().clone(), surface)
        };
        let gains = gains(&coeffs, &surface.s);
        Ok(FilterModel { scenario: scenario.clone(), kernel, coeffs, mean, var, surface, gains })
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn moments(&self) -> MomentSet<'_> {
        MomentSet::new(&self.scenario, &self.kernel)
    }

    /// Prior mean `m`.
    pub fn mean(&self) -> &Field {
        &self.mean
    }

    pub fn var(&self) -> &Field {
        &self.var
    }

    pub fn surface(&self) -> &ErrorSurface {
        &self.surface
    }

    /// Estimate surface only, without the innovation bookkeeping.
    pub fn estimate(&self, du: &CellField) -> Result<Field> {
        check_shapes(self.grid(), &[du.grid()])?;
        Ok(sweep(&self.kernel, &self.gains, &self.mean, du))
    }

    pub fn run(&self, du: &CellField, seed: Option<u64>) -> Result<FilterRun> {
        let yhat = self.estimate(du)?;
        let innovation = innovation_from_increments(&self.coeffs, du, &yhat)?;
        Ok(FilterRun {
            yhat,
            scenario_id: self.scenario.preset.name(),
            seed,
            surface: self.surface.clone(),
            innovation,
        })
    }

    /// `Yhat(z) = intercept + sum_c weight_c dU_c`. The filter is affine in the
    /// increments, so the weights come from unit-vector runs.
    pub fn linear_weights(&self, z: Node) -> Result<(f64, CellField)> {
        let grid = *self.grid();
        grid.check_node(z)?;
        let mut du = CellField::zeros(grid);
        let intercept = self.estimate(&du)?.at(z);
        let mut w = CellField::zeros(grid);
        for i in 0..z.i {
            for j in 0..z.j {
                du.set(i, j, 1.0);
                w.set(i, j, self.estimate(&du)?.at(z) - intercept);
                du.set(i, j, 0.0);
            }
        }
        Ok((intercept, w))
    }
}
