//! Filter against exact Gaussian conditioning on the same observations.

use sheet_kalman::grid::Grid;
use sheet_kalman::kernel::KernelTruncation;
use sheet_kalman::oracle::{mc_compare, optimality_study};
use sheet_kalman::scenario::Scenario;

fn main() -> sheet_kalman::error::Result<()> {
    let trunc = KernelTruncation::default();
    for s in [Scenario::sheet_signal(), Scenario::constant_signal(0.0, 1.0)?] {
        let r = mc_compare(&s, Grid::unit(8)?, 500, 3, &trunc)?;
        println!(
            "{}: rms(filter-oracle)={:.4} mse filter={:.4} oracle={:.4} S={:.4} oracle var={:.4}",
            s.preset.name(),
            r.rms_diff,
            r.mse_filter,
            r.mse_oracle,
            r.s_terminal,
            r.oracle_var
        );
        let o = optimality_study(&s, Grid::unit(8)?, 500, 3, 4, 0.25, &trunc)?;
        println!("  prior={:.4} raw={:.4} perturbed={:.4?}", o.mse_prior, o.mse_raw, o.mse_perturbed);
    }
    Ok(())
}
