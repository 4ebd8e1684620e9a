//! Mean-square error surface `S(z) = E[(Y(z) - Yhat(z))^2]`.
//!
//! The solver works on the integral form
//!
//! `S(z) = Var Y(z) - int_[0,z] (G/D)^2(u) K(u; z)^2 S(u)^2 du`,
//!
//! which follows from `S = E[Y^2] - E[Yhat^2]` and the isometry applied to
//! the innovation representation of `Yhat`. The integrand at a cell uses `S`
//! at the cell's lower-left corner, so every node depends only on nodes that
//! precede it in the lexicographic sweep. With `F = 0` the integral form is
//! the Goursat problem `d^2 S / dtdx = C^2 - (G/D)^2 S^2`, `S = sigma0^2` on the axes.

use crate::error::{Error, Result};
use crate::grid::{mixed_difference, CellField, Field, Grid, Node};
use crate::kernel::{KernelTable, KernelTruncation};
use crate::moments::MomentSet;
use crate::scenario::{Coefficients, Scenario};

/// Tolerance below zero before the recursion is declared unstable.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Sign of the quadratic correction term.
///
/// `Minus` is the variance-reducing form used by the filter. `Plus` only
/// exists so the two can be compared against the conditioning oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionSign {
    #[default]
    Minus,
    Plus,
}

impl CorrectionSign {
    fn factor(self) -> f64 {
        match self {
            CorrectionSign::Minus => -1.0,
            CorrectionSign::Plus => 1.0,
        }
    }
}

/// Solved error surface with the settings that produced it.
#[derive(Debug, Clone)]
pub struct ErrorSurface {
    pub s: Field,
    pub scheme: &'static str,
    pub sign: CorrectionSign,
    pub truncation: KernelTruncation,
}

impl ErrorSurface {
    pub fn grid(&self) -> &Grid {
        self.s.grid()
    }

    pub fn at(&self, z: Node) -> f64 {
        self.s.at(z)
    }
}

/// Per-cell weight `(G/D)^2 dt dx`.
fn gain_weights(coeffs: &Coefficients) -> CellField {
    let grid = *coeffs.g.grid();
    let area = grid.cell_area();
    let mut w = CellField::zeros(grid);
    for i in 0..grid.nt() {
        for j in 0..grid.nx() {
            let r = coeffs.g.get(i, j) / coeffs.d.get(i, j);
            w.set(i, j, r * r * area);
        }
    }
    w
}

/// Solves the integral form from precomputed moments.
pub fn solve_with(
    moments: &MomentSet<'_>,
    coeffs: &Coefficients,
    sign: CorrectionSign,
    truncation: KernelTruncation,
) -> Result<ErrorSurface> {
    let grid = *moments.grid();
    let kernel = moments.kernel();
    let var = moments.var();
    let w = gain_weights(coeffs);
    let sgn = sign.factor();
    let mut s = var.clone();

    let check = |v: f64, i: usize, j: usize| -> Result<()> {
        if v < -NEGATIVE_TOLERANCE || !v.is_finite() {
            Err(Error::Instability { i, j, value: v })
        } else {
            Ok(())
        }
    };

    if kernel.is_unit() {
        // Q(i+1, j) = Q(i, j) + sum_{q<j} w S^2 along row i
        let mut q_row = vec![0.0; grid.nx() + 1];
        for i in 0..grid.nt() {
            let mut acc = 0.0;
            for j in 0..grid.nx() {
                let sv = s.get(i, j);
                acc += w.get(i, j) * sv * sv;
                q_row[j + 1] += acc;
            }
            for (j, &q) in q_row.iter().enumerate() {
                let v = var.get(i + 1, j) + sgn * q;
                check(v, i + 1, j)?;
                s.set(i + 1, j, v);
            }
        }
    } else {
        for i in 1..=grid.nt() {
            for j in 1..=grid.nx() {
                let z = Node::new(i, j);
                let mut acc = 0.0;
                for p in 0..i {
                    for q in 0..j {
                        let wc = w.get(p, q);
                        if wc != 0.0 {
                            let k = kernel.get(Node::new(p, q), z);
                            let sv = s.get(p, q);
                            acc += wc * k * k * sv * sv;
                        }
                    }
                }
                let v = var.get(i, j) + sgn * acc;
                check(v, i, j)?;
                s.set(i, j, v);
            }
        }
    }
    Ok(ErrorSurface { s, scheme: "integral", sign, truncation })
}

/// Error surface for a scenario on a grid.
pub fn solve_error_surface(scenario: &Scenario, grid: Grid, trunc: &KernelTruncation) -> Result<ErrorSurface> {
    solve_error_surface_signed(scenario, grid, trunc, CorrectionSign::Minus)
}

/// [`solve_error_surface`] with an explicit correction sign.
pub fn solve_error_surface_signed(
    scenario: &Scenario,
    grid: Grid,
    trunc: &KernelTruncation,
    sign: CorrectionSign,
) -> Result<ErrorSurface> {
    scenario.ensure_valid(&grid)?;
    let kernel = KernelTable::build(scenario, grid, trunc)?;
    let moments = MomentSet::new(scenario, &kernel);
    solve_with(&moments, &scenario.discretize(grid), sign, *trunc)
}

/// Residuals of `d^2 S / dtdx = C^2 -+ (G/D)^2 S^2` for `F = 0`.
#[derive(Debug, Clone)]
pub struct RiccatiReport {
    /// Residual with `S^2` taken at each cell's lower-left corner.
    pub residual: CellField,
    pub max_residual: f64,
    /// Max residual with `S^2` averaged over the four cell corners.
    pub max_residual_centered: f64,
}

/// Checks a solved surface against the differential form (requires `F = 0`).
pub fn riccati_pde_check(scenario: &Scenario, surface: &ErrorSurface) -> Result<RiccatiReport> {
    if !scenario.f.is_zero() {
        return Err(Error::Unsupported(
            "the differential-form check is only defined for F = 0".into(),
        ));
    }
    let grid = *surface.grid();
    let coeffs = scenario.discretize(grid);
    let sgn = surface.sign.factor();
    let s = &surface.s;
    let mixed = mixed_difference(s);
    let mut residual = CellField::zeros(grid);
    let mut centered: f64 = 0.0;
    for i in 0..grid.nt() {
        for j in 0..grid.nx() {
            let c = coeffs.c.get(i, j);
            let r = coeffs.g.get(i, j) / coeffs.d.get(i, j);
            let sq = |p: usize, q: usize| s.get(p, q) * s.get(p, q);
            let corner = sq(i, j);
            let mean4 = 0.25 * (sq(i, j) + sq(i + 1, j) + sq(i, j + 1) + sq(i + 1, j + 1));
            let rhs = |s2: f64| c * c + sgn * r * r * s2;
            residual.set(i, j, mixed.get(i, j) - rhs(corner));
            centered = centered.max((mixed.get(i, j) - rhs(mean4)).abs());
        }
    }
    let max_residual = residual.sup_norm();
    Ok(RiccatiReport { residual, max_residual, max_residual_centered: centered })
}
