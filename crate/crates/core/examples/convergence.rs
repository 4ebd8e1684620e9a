use sheet_kalman::convergence::convergence_study;
use sheet_kalman::kernel::KernelTruncation;
use sheet_kalman::scenario::Scenario;

fn main() -> sheet_kalman::error::Result<()> {
    let s = Scenario::sheet_signal();
    let r = convergence_study(&s, &[4, 8, 16], (1.0, 1.0), 200, 9, &KernelTruncation::default())?;
    println!("   n  S(1,1)   oracle   rms     mse");
    for row in &r.rows {
        println!("{:>4}  {:.4}  {:.4}  {:.4}  {:.4}", row.n, row.s_terminal, row.oracle_var, row.rms, row.mse_filter);
    }
    println!("S ratios {:.3?}", r.s_ratios);
    Ok(())
}
