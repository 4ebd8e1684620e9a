//! Runs the filter on one simulated path and reconstructs it from the innovation.

use sheet_kalman::filter::{reconstruct_via_innovation, FilterModel};
use sheet_kalman::grid::{Grid, Node};
use sheet_kalman::kernel::KernelTruncation;
use sheet_kalman::scenario::Scenario;
use sheet_kalman::simulate::simulate_paths;

fn main() -> sheet_kalman::error::Result<()> {
    let grid = Grid::unit(32)?;
    let s = Scenario::sheet_signal();
    let fm = FilterModel::new(&s, grid, &KernelTruncation::default())?;
    let b = simulate_paths(&s, grid, 11)?;
    let run = fm.run(&b.du, Some(11))?;

    for z in [Node::new(8, 8), Node::new(16, 32), grid.terminal()] {
        println!(
            "({:.2},{:.2}) Y={:+.4} Yhat={:+.4} S={:.4}",
            grid.t(z.i),
            grid.x(z.j),
            b.y.at(z),
            run.estimate(z),
            fm.surface().at(z)
        );
    }
    let rec = reconstruct_via_innovation(&run, &s, fm.kernel(), fm.surface(), fm.mean());
    println!("innovation reconstruction error {:.1e}", rec.max_abs_diff(&run.yhat));

    // estimate as an explicit linear functional of the observation increments
    let (intercept, w) = fm.linear_weights(grid.terminal())?;
    let linear: f64 = intercept + w.values().iter().zip(b.du.values()).map(|(a, u)| a * u).sum::<f64>();
    println!("linear form at (1,1): {linear:+.4}");
    Ok(())
}
