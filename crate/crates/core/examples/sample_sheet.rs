//! Draws a Brownian sheet and checks E[B(1,1) B(0.5,1)] = 0.5 over many seeds.

use sheet_kalman::grid::{Grid, Node};
use sheet_kalman::sheet::{replication_seed, sample_sheet};

fn main() -> sheet_kalman::error::Result<()> {
    let grid = Grid::unit(16)?;
    let path = sample_sheet(grid, 42);
    println!("B(1,1) for seed 42: {:.6}", path.values.at(grid.terminal()));

    let half = Node::new(8, 16);
    let reps = 10_000;
    let cov = (0..reps)
        .map(|r| {
            let b = sample_sheet(grid, replication_seed(42, r));
            b.values.at(grid.terminal()) * b.values.at(half)
        })
        .sum::<f64>()
        / reps as f64;
    println!("E[B(1,1) B(0.5,1)] ~ {cov:.4} over {reps} sheets");
    Ok(())
}
