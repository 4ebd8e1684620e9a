use sheet_kalman::grid::Grid;
use sheet_kalman::scenario::Scenario;
use sheet_kalman::simulate::simulate_paths;

fn main() -> sheet_kalman::error::Result<()> {
    let grid = Grid::unit(32)?;
    let s = Scenario::sheet_signal();
    let b = simulate_paths(&s, grid, 7)?;
    let z = grid.terminal();
    println!("signal Y(1,1) = {:.6}", b.y.at(z));
    println!("observation U(1,1) = {:.6}", b.u.at(z));

    // the CSV layout the CLI writes
    let mut out = Vec::new();
    b.y.write_csv(&mut out)?;
    let text = String::from_utf8(out).unwrap();
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
