use sheet_kalman::filter::FilterModel;
use sheet_kalman::grid::Grid;
use sheet_kalman::kernel::KernelTruncation;
use sheet_kalman::scenario::Scenario;
use sheet_kalman::validation::mc_validate;

fn main() -> sheet_kalman::error::Result<()> {
    let fm = FilterModel::new(&Scenario::sheet_signal(), Grid::unit(16)?, &KernelTruncation::default())?;
    let r = mc_validate(&fm, 1000, 5, 50)?;
    for c in &r.consistency {
        println!("{:?}: S={:.4} mse={:.4} +- {:.4}", c.node, c.s, c.mse, c.se);
    }
    let w = &r.whiteness;
    println!("bias at (1,1): {:.4} +- {:.4}", r.bias.0, r.bias.1);
    println!("innovation max |corr| {:.4} (bound {:.4}), var ratio {:.3}", w.max_abs_corr, w.bound, w.var_ratio);
    Ok(())
}
