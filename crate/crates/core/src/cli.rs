//! Command-line front end. Every subcommand writes CSV surfaces and a
//! `summary.txt` into `--out`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::convergence::convergence_study;
use crate::error::{Error, Result};
use crate::error_surface::{riccati_pde_check, solve_error_surface};
use crate::filter::FilterModel;
use crate::grid::{CellField, Field, Grid, Node};
use crate::kernel::{resolvent_from, resolvent_recursion, resolvent_series, KernelTable, KernelTruncation};
use crate::moments::MomentSet;
use crate::oracle::mc_compare;
use crate::scenario::{Preset, Scenario};
use crate::sheet::sample_sheet;
use crate::simulate::{increments_of, simulate_paths};
use crate::summary::Summary;
use crate::validation::mc_validate;

#[derive(Debug, Parser)]
#[command(name = "sheet-kalman", version, about = "Two-parameter Kalman filtering on Brownian-sheet models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one Brownian sheet path.
    SampleSheet(Common),
    /// Simulate signal and observation surfaces.
    Simulate(Common),
    /// Tabulate the resolvent kernel from the origin.
    Kernel(Common),
    /// Prior mean and variance surfaces.
    Moments(Common),
    /// Solve the mean-square error surface.
    ErrorSurface(Common),
    /// Run the filter on stored or simulated observations.
    Filter(FilterArgs),
    /// Compare the filter with the conditioning oracle over replications.
    OracleCompare(Common),
    /// Monte Carlo checks of the error surface and innovation.
    McValidate(ValidateArgs),
    /// Grid refinement study.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// constant | sheet
    #[arg(long)]
    pub preset: Option<String>,
    /// Scenario TOML file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// NTxNX, e.g. 16x16.
    #[arg(long)]
    pub grid: Option<String>,
    /// TxX, default 1x1.
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 30)]
    pub nmax: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker cap for replication loops (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// kernel: auto | recursion | series; error-surface: integral | pde-check.
    #[arg(long)]
    pub scheme: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub common: Common,
    /// Observation surface U as CSV; simulated from --seed when absent.
    #[arg(long)]
    pub observations: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of random cell pairs for the correlation check.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated grid sizes.
    #[arg(long, default_value = "8,16,32")]
    pub sizes: String,
}

/// Parses `AxB` into two values.
fn parse_pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)> {
    let bad = || Error::Validation(format!("{what} must look like AxB, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

struct Setup {
    scenario: Scenario,
    grid: Grid,
    trunc: KernelTruncation,
}

impl Common {
    fn setup(&self) -> Result<Setup> {
        let (mut scenario, cfg_grid) = match &self.config {
            Some(path) => Scenario::from_toml_file(path)?,
            None => (Scenario::preset(Preset::parse(self.preset.as_deref().unwrap_or("constant"))?)?, None),
        };
        if let (Some(p), Some(_)) = (&self.preset, &self.config) {
            let wanted = Preset::parse(p)?;
            if wanted != scenario.preset {
                scenario = Scenario::preset(wanted)?;
            }
        }
        let (nt, nx) = match (&self.grid, cfg_grid) {
            (Some(g), _) => parse_pair::<usize>(g, "--grid")?,
            (None, Some(g)) => (g.nt(), g.nx()),
            (None, None) => (16, 16),
        };
        let (t, x) = match (&self.horizon, cfg_grid) {
            (Some(h), _) => parse_pair::<f64>(h, "--horizon")?,
            (None, Some(g)) => (g.t_max(), g.x_max()),
            (None, None) => (1.0, 1.0),
        };
        if nt < 2 || nx < 2 {
            return Err(Error::Validation(format!("grid needs at least 2x2 cells, got {nt}x{nx}")));
        }
        let grid = Grid::new(t, x, nt, nx)?;
        scenario.ensure_valid(&grid)?;
        if self.reps == 0 {
            return Err(Error::Validation("--reps must be at least 1".into()));
        }
        let trunc = KernelTruncation::new(self.nmax, self.tol)?;
        Ok(Setup { scenario, grid, trunc })
    }

    fn summary(&self, command: &str, setup: &Setup) -> Summary {
        let mut s = Summary::new();
        s.put("command", command)
            .put("scenario", setup.scenario.preset.name())
            .put("config", self.config.as_ref().map_or("-".into(), |p| p.display().to_string()))
            .put("grid", format!("{}x{}", setup.grid.nt(), setup.grid.nx()))
            .put("horizon", format!("{}x{}", setup.grid.t_max(), setup.grid.x_max()))
            .put("seed", self.seed)
            .put("nmax", setup.trunc.n_max)
            .put("tol", setup.trunc.tol);
        s
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

fn write_field(dir: &Path, name: &str, f: &Field) -> Result<()> {
    f.write_csv(BufWriter::new(File::create(dir.join(name))?))
}

fn write_cells(dir: &Path, name: &str, f: &CellField) -> Result<()> {
    f.write_csv(BufWriter::new(File::create(dir.join(name))?))
}

fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    pool.install(job)
}

fn sample_sheet_cmd(a: &Common) -> Result<()> {
    let setup = a.setup()?;
    let sheet = sample_sheet(setup.grid, a.seed);
    let dir = a.out_dir()?;
    write_field(dir, "sheet.csv", &sheet.values)?;
    write_cells(dir, "increments.csv", &sheet.increments)?;
    let mut s = a.summary("sample-sheet", &setup);
    s.put("terminal_value", sheet.values.at(setup.grid.terminal()));
    s.write(&dir.join("summary.txt"))
}

fn simulate_cmd(a: &Common) -> Result<()> {
    let setup = a.setup()?;
    let b = simulate_paths(&setup.scenario, setup.grid, a.seed)?;
    let dir = a.out_dir()?;
    write_field(dir, "Y.csv", &b.y)?;
    write_field(dir, "U.csv", &b.u)?;
    let z = setup.grid.terminal();
    let mut s = a.summary("simulate", &setup);
    s.put("y0", b.y0_draw).put("y_terminal", b.y.at(z)).put("u_terminal", b.u.at(z));
    s.write(&dir.join("summary.txt"))
}

fn kernel_cmd(a: &Common) -> Result<()> {
    let setup = a.setup()?;
    let (grid, sc) = (setup.grid, &setup.scenario);
    let scheme = a.scheme.as_deref().unwrap_or("auto");
    let k = match scheme {
        "auto" => resolvent_from(Node::ORIGIN, sc, grid, &setup.trunc)?,
        "recursion" => resolvent_recursion(Node::ORIGIN, &sc.f.on_cells(grid)),
        "series" => resolvent_series(Node::ORIGIN, &sc.f.on_cells(grid), &setup.trunc)?,
        other => {
            return Err(Error::Validation(format!(
                "unknown kernel scheme {other:?} (expected auto, recursion or series)"
            )))
        }
    };
    let dir = a.out_dir()?;
    write_field(dir, "K.csv", &k.to_field(1.0))?;
    let mut s = a.summary("kernel", &setup);
    s.put("scheme", scheme).put("k_terminal", k.get(grid.terminal()));
    s.write(&dir.join("summary.txt"))
}

fn moments_cmd(a: &Common) -> Result<()> {
    let setup = a.setup()?;
    let kernel = KernelTable::build(&setup.scenario, setup.grid, &setup.trunc)?;
    let m = MomentSet::new(&setup.scenario, &kernel);
    let dir = a.out_dir()?;
    write_field(dir, "mean.csv", m.mean())?;
    write_field(dir, "var.csv", m.var())?;
    let z = setup.grid.terminal();
    let mut s = a.summary("moments", &setup);
    s.put("mean_terminal", m.mean().at(z)).put("var_terminal", m.var().at(z));
    s.write(&dir.join("summary.txt"))
}

fn error_surface_cmd(a: &Common) -> Result<()> {
    let setup = a.setup()?;
    let scheme = a.scheme.as_deref().unwrap_or("integral");
    if scheme != "integral" && scheme != "pde-check" {
        return Err(Error::Validation(format!(
            "unknown error-surface scheme {scheme:?} (expected integral or pde-check)"
        )));
    }
    let surface = solve_error_surface(&setup.scenario, setup.grid, &setup.trunc)?;
    let dir = a.out_dir()?;
    write_field(dir, "S.csv", &surface.s)?;
    let mut s = a.summary("error-surface", &setup);
    s.put("scheme", scheme).put("s_terminal", surface.at(setup.grid.terminal()));
    if scheme == "pde-check" {
        let r = riccati_pde_check(&setup.scenario, &surface)?;
        write_cells(dir, "residual.csv", &r.residual)?;
        s.put("max_residual", r.max_residual).put("max_residual_centered", r.max_residual_centered);
    }
    s.write(&dir.join("summary.txt"))
}

/// Mean, variance and nearest-neighbour correlations of `dM / sqrt(dt dx)` over one run.
fn run_whiteness(dm: &CellField) -> (f64, f64, f64, f64) {
    let grid = *dm.grid();
    let scale = 1.0 / grid.cell_area().sqrt();
    let v: Vec<f64> = dm.values().iter().map(|x| x * scale).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let corr = |di: usize, dj: usize| {
        let mut acc = 0.0;
        let mut k = 0usize;
        for i in 0..grid.nt() - di {
            for j in 0..grid.nx() - dj {
                acc += (dm.get(i, j) * scale - mean) * (dm.get(i + di, j + dj) * scale - mean);
                k += 1;
            }
        }
        acc / k as f64 / var
    };
    (mean, var, corr(1, 0), corr(0, 1))
}

fn filter_cmd(f: &FilterArgs) -> Result<()> {
    let a = &f.common;
    let setup = a.setup()?;
    let grid = setup.grid;
    let fm = FilterModel::new(&setup.scenario, grid, &setup.trunc)?;
    let z = grid.terminal();
    let (du, truth) = match &f.observations {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))?;
            (increments_of(&Field::read_csv(grid, file)?), None)
        }
        None => {
            let b = simulate_paths(&setup.scenario, grid, a.seed)?;
            (b.du, Some(b.y))
        }
    };
    let run = fm.run(&du, f.observations.is_none().then_some(a.seed))?;
    let dir = a.out_dir()?;
    write_field(dir, "Yhat.csv", &run.yhat)?;
    write_field(dir, "S.csv", &fm.surface().s)?;
    let mut s = a.summary("filter", &setup);
    s.put("observations", f.observations.as_ref().map_or("simulated".into(), |p| p.display().to_string()))
        .put("yhat_terminal", run.estimate(z))
        .put("s_terminal", fm.surface().at(z));
    if let Some(y) = truth {
        s.put("y_terminal", y.at(z)).put("sq_error_terminal", (y.at(z) - run.estimate(z)).powi(2));
    }
    let (mean, var, ct, cx) = run_whiteness(&run.innovation.dm);
    s.put("innovation_mean", mean)
        .put("innovation_var", var)
        .put("innovation_corr_t", ct)
        .put("innovation_corr_x", cx);
    s.write(&dir.join("summary.txt"))
}

fn oracle_compare_cmd(a: &Common) -> Result<()> {
    let setup = a.setup()?;
    let r = with_threads(a.threads, || mc_compare(&setup.scenario, setup.grid, a.reps, a.seed, &setup.trunc))?;
    let dir = a.out_dir()?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("errors.csv"))?));
    w.write_record(["rep", "seed", "y", "filter", "oracle"])?;
    for rec in &r.records {
        w.write_record([
            rec.rep.to_string(),
            rec.seed.to_string(),
            format!("{:.16e}", rec.y),
            format!("{:.16e}", rec.filter),
            format!("{:.16e}", rec.oracle),
        ])?;
    }
    w.flush()?;
    let mut s = a.summary("oracle-compare", &setup);
    s.put("reps", r.reps)
        .put("rms_filter_oracle", r.rms_diff)
        .put("mse_filter", r.mse_filter)
        .put("mse_oracle", r.mse_oracle)
        .put("mean_error_filter", r.mean_error_filter)
        .put("s_terminal", r.s_terminal)
        .put("oracle_var", r.oracle_var);
    s.write(&dir.join("summary.txt"))
}

fn mc_validate_cmd(v: &ValidateArgs) -> Result<()> {
    let a = &v.common;
    let setup = a.setup()?;
    let r = with_threads(a.threads, || {
        let fm = FilterModel::new(&setup.scenario, setup.grid, &setup.trunc)?;
        mc_validate(&fm, a.reps, a.seed, v.pairs)
    })?;
    let dir = a.out_dir()?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("correlations.csv"))?));
    w.write_record(["ai", "aj", "bi", "bj", "corr"])?;
    for p in &r.whiteness.pairs {
        w.write_record([
            p.a.i.to_string(),
            p.a.j.to_string(),
            p.b.i.to_string(),
            p.b.j.to_string(),
            format!("{:.16e}", p.corr),
        ])?;
    }
    w.flush()?;
    let mut s = a.summary("mc-validate", &setup);
    s.put("reps", r.reps);
    for c in &r.consistency {
        let key = format!("node_{}_{}", c.node.i, c.node.j);
        s.put(format!("{key}_s"), c.s).put(format!("{key}_mse"), c.mse).put(format!("{key}_se"), c.se);
    }
    let wh = &r.whiteness;
    s.put("bias_terminal", r.bias.0)
        .put("bias_terminal_se", r.bias.1)
        .put("pairs", wh.pairs.len())
        .put("max_abs_corr", wh.max_abs_corr)
        .put("corr_bound", wh.bound)
        .put("var_cell", format!("{}_{}", wh.var_cell.i, wh.var_cell.j))
        .put("var_ratio", wh.var_ratio)
        .put("max_mean_score", wh.max_mean_score);
    s.write(&dir.join("summary.txt"))
}

fn convergence_cmd(c: &ConvergenceArgs) -> Result<()> {
    let a = &c.common;
    let setup = a.setup()?;
    let sizes = c
        .sizes
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Validation(format!("--sizes must be a list of integers, got {:?}", c.sizes)))?;
    let horizon = (setup.grid.t_max(), setup.grid.x_max());
    let r = with_threads(a.threads, || {
        convergence_study(&setup.scenario, &sizes, horizon, a.reps, a.seed, &setup.trunc)
    })?;
    let dir = a.out_dir()?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("convergence.csv"))?));
    w.write_record(["n", "s_terminal", "oracle_var", "rms_filter_oracle", "mse_filter", "rms_ratio"])?;
    for (k, row) in r.rows.iter().enumerate() {
        let ratio = if k == 0 { String::new() } else { format!("{:.6}", r.rms_ratios[k - 1]) };
        w.write_record([
            row.n.to_string(),
            format!("{:.16e}", row.s_terminal),
            format!("{:.16e}", row.oracle_var),
            format!("{:.16e}", row.rms),
            format!("{:.16e}", row.mse_filter),
            ratio,
        ])?;
    }
    w.flush()?;
    let mut s = a.summary("convergence", &setup);
    s.put("sizes", &c.sizes).put("reps", a.reps);
    for (k, v) in r.rms_ratios.iter().enumerate() {
        s.put(format!("rms_ratio_{k}"), v);
    }
    for (k, v) in r.s_ratios.iter().enumerate() {
        s.put(format!("s_ratio_{k}"), v);
    }
    s.write(&dir.join("summary.txt"))
}

/// Executes a parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SampleSheet(a) => sample_sheet_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Kernel(a) => kernel_cmd(a),
        Command::Moments(a) => moments_cmd(a),
        Command::ErrorSurface(a) => error_surface_cmd(a),
        Command::Filter(f) => filter_cmd(f),
        Command::OracleCompare(a) => oracle_compare_cmd(a),
        Command::McValidate(v) => mc_validate_cmd(v),
        Command::Convergence(c) => convergence_cmd(c),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
