use sheet_kalman::grid::{Grid, Node};
use sheet_kalman::kernel::{KernelTable, KernelTruncation};
use sheet_kalman::moments::MomentSet;
use sheet_kalman::scenario::Scenario;

fn main() -> sheet_kalman::error::Result<()> {
    let grid = Grid::unit(16)?;
    for s in [Scenario::constant_signal(0.5, 1.0)?, Scenario::sheet_signal()] {
        let kernel = KernelTable::build(&s, grid, &KernelTruncation::default())?;
        let m = MomentSet::new(&s, &kernel);
        let (a, b) = (Node::new(8, 16), grid.terminal());
        println!(
            "{:>16}: mean(1,1)={:.4} var(1,1)={:.4} cov((0.5,1),(1,1))={:.4}",
            s.preset.name(),
            m.mean().at(b),
            m.var().at(b),
            m.covariance(a, b)
        );
    }
    Ok(())
}
