//! Solves the error surface and checks it against the discrete Riccati equation.

use sheet_kalman::error_surface::{riccati_pde_check, solve_error_surface};
use sheet_kalman::grid::Grid;
use sheet_kalman::kernel::KernelTruncation;
use sheet_kalman::scenario::Scenario;

fn main() -> sheet_kalman::error::Result<()> {
    let s = Scenario::sheet_signal();
    for n in [8, 16, 32, 64] {
        let grid = Grid::unit(n)?;
        let surface = solve_error_surface(&s, grid, &KernelTruncation::default())?;
        let check = riccati_pde_check(&s, &surface)?;
        println!(
            "{n:>3}x{n:<3} S(1,1)={:.6}  residual={:.1e}  centred={:.1e}",
            surface.at(grid.terminal()),
            check.max_residual,
            check.max_residual_centered
        );
    }
    Ok(())
}
