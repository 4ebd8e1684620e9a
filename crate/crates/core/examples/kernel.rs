//! Resolvent kernel for F = 1: closed form, recursion and truncated series.

use sheet_kalman::grid::{Grid, Node};
use sheet_kalman::kernel::{resolvent_recursion, resolvent_series, KernelTable, KernelTruncation};
use sheet_kalman::scenario::{Coefficient, Scenario};

fn main() -> sheet_kalman::error::Result<()> {
    let grid = Grid::unit(32)?;
    let one = Coefficient::Constant(1.0);
    let s = Scenario::new(one.clone(), one.clone(), one.clone(), one, 1.0, 0.0, 0.0)?;
    let trunc = KernelTruncation::new(25, 1e-12)?;

    let table = KernelTable::build(&s, grid, &trunc)?;
    let z = grid.terminal();
    println!("closed form K(0;(1,1)) = {:.12}", table.get(Node::ORIGIN, z));

    let f = s.f.on_cells(grid);
    let rec = resolvent_recursion(Node::ORIGIN, &f);
    let ser = resolvent_series(Node::ORIGIN, &f, &trunc)?;
    println!("grid recursion         = {:.12}", rec.get(z));
    println!("grid series            = {:.12}", ser.get(z));
    println!("max |recursion - series| = {:.2e}", rec.max_abs_diff(&ser));
    Ok(())
}
