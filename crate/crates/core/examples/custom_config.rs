//! Loads a scenario from TOML and runs the filter on it.
//!
//! ```text
//! cargo run --example custom_config -- crates/core/examples/custom.toml
//! ```

use std::path::PathBuf;

use sheet_kalman::filter::FilterModel;
use sheet_kalman::grid::Grid;
use sheet_kalman::kernel::KernelTruncation;
use sheet_kalman::scenario::Scenario;
use sheet_kalman::simulate::simulate_paths;

fn main() -> sheet_kalman::error::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/custom.toml")));
    let (s, grid) = Scenario::from_toml_file(&path)?;
    let grid = match grid {
        Some(g) => g,
        None => Grid::unit(16)?,
    };
    let report = s.validate(&grid);
    println!("{} valid: {} {:?}", path.display(), report.is_valid(), report.violations);

    let fm = FilterModel::new(&s, grid, &KernelTruncation::default())?;
    let b = simulate_paths(&s, grid, 1)?;
    let yhat = fm.estimate(&b.du)?;
    let z = grid.terminal();
    println!("Y={:+.4} Yhat={:+.4} S={:.4} Var={:.4}", b.y.at(z), yhat.at(z), fm.surface().at(z), fm.var().at(z));
    Ok(())
}
