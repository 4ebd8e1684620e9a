//! Grid refinement study: error surface and filter-vs-oracle distance per size.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::KernelTruncation;
use crate::oracle::{mc_compare, MAX_ORACLE_CELLS};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub s_terminal: f64,
    pub oracle_var: f64,
    pub rms: f64,
    pub mse_filter: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `rms_k / rms_{k+1}`.
    pub rms_ratios: Vec<f64>,
    /// `|S_{k+1} - S_k| / |S_{k+2} - S_{k+1}|`.
    pub s_ratios: Vec<f64>,
}

/// Runs simulate, filter and oracle on `n x n` grids over `[0,T] x [0,X]`.
pub fn convergence_study(
    scenario: &Scenario,
    sizes: &[usize],
    horizon: (f64, f64),
    reps: usize,
    seed: u64,
    trunc: &KernelTruncation,
) -> Result<ConvergenceReport> {
    if sizes.is_empty() {
        return Err(Error::Validation("no grid sizes given".into()));
    }
    for &n in sizes {
        if n < 2 || n * n > MAX_ORACLE_CELLS {
            return Err(Error::Validation(format!(
                "grid size {n} outside the supported range 2..=64"
            )));
        }
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let grid = Grid::new(horizon.0, horizon.1, n, n)?;
        let r = mc_compare(scenario, grid, reps, seed, trunc)?;
        rows.push(ConvergenceRow {
            n,
            s_terminal: r.s_terminal,
            oracle_var: r.oracle_var,
            rms: r.rms_diff,
            mse_filter: r.mse_filter,
        });
    }
    let rms_ratios = rows.windows(2).map(|w| w[0].rms / w[1].rms).collect();
    let s_ratios = rows
        .windows(3)
        .map(|w| (w[1].s_terminal - w[0].s_terminal).abs() / (w[2].s_terminal - w[1].s_terminal).abs())
        .collect();
    Ok(ConvergenceReport { rows, rms_ratios, s_ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_size_has_no_ratios() {
        let s = Scenario::sheet_signal();
        let r = convergence_study(&s, &[4], (1.0, 1.0), 5, 1, &KernelTruncation::default()).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rms_ratios.is_empty() && r.s_ratios.is_empty());
    }

    #[test]
    fn sizes_outside_guard_are_rejected() {
        let s = Scenario::sheet_signal();
        for bad in [vec![], vec![1], vec![8, 65]] {
            let r = convergence_study(&s, &bad, (1.0, 1.0), 5, 1, &KernelTruncation::default());
            assert!(matches!(r, Err(Error::Validation(_))), "{bad:?}");
        }
    }
}
