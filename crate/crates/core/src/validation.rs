//! Monte Carlo checks of a filter against its own error surface and of the
//! innovation increments against a Brownian sheet.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::FilterModel;
use crate::grid::{Grid, Node};
use crate::sheet::{replication_seed, streams, NormalStream};
use crate::simulate::{innovation_from_increments, simulate_with};

/// Empirical `E[(Y - Yhat)^2]` at one node against `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCheck {
    pub node: Node,
    pub s: f64,
    pub mse: f64,
    /// Monte Carlo standard error of `mse`.
    pub se: f64,
}

impl NodeCheck {
    /// Within `max(rel * S, 3 se)`.
    pub fn agrees(&self, rel: f64) -> bool {
        (self.mse - self.s).abs() <= (rel * self.s).max(3.0 * self.se)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCorrelation {
    pub a: Node,
    pub b: Node,
    pub corr: f64,
}

/// Statistics of the normalized increments `dM / sqrt(dt dx)`.
#[derive(Debug, Clone)]
pub struct WhitenessReport {
    pub reps: usize,
    pub pairs: Vec<PairCorrelation>,
    pub max_abs_corr: f64,
    /// `3 / sqrt(R)`.
    pub bound: f64,
    pub var_cell: Node,
    /// `Var(dN) / (dt dx D^2)` at `var_cell`.
    pub var_ratio: f64,
    /// Largest `|mean dN| / se` over all cells.
    pub max_mean_score: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub grid: Grid,
    pub reps: usize,
    pub master_seed: u64,
    pub consistency: Vec<NodeCheck>,
    /// Mean and standard error of `Yhat(Z) - Y(Z)`.
    pub bias: (f64, f64),
    pub whiteness: WhitenessReport,
}

/// Five nodes spread over the grid, the terminal node last.
pub fn consistency_nodes(grid: &Grid) -> Vec<Node> {
    let (nt, nx) = (grid.nt(), grid.nx());
    let q = |n: usize, k: usize| (n * k / 4).max(1);
    vec![
        Node::new(q(nt, 1), q(nx, 3)),
        Node::new(q(nt, 2), q(nx, 2)),
        Node::new(q(nt, 3), q(nx, 1)),
        Node::new(nt, q(nx, 2)),
        grid.terminal(),
    ]
}

/// `n` distinct unordered pairs of distinct cells, drawn from the selection stream.
pub fn random_cell_pairs(grid: &Grid, n: usize, seed: u64) -> Result<Vec<(Node, Node)>> {
    let cells = grid.cell_count();
    if cells < 2 || n > cells * (cells - 1) / 2 {
        return Err(Error::Validation(format!("cannot draw {n} distinct pairs from {cells} cells")));
    }
    let mut rng = NormalStream::new(seed, streams::SELECTION);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = (rng.next_u64() % cells as u64) as usize;
        let b = (rng.next_u64() % cells as u64) as usize;
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        let node = |k: usize| Node::new(k / grid.nx(), k % grid.nx());
        out.push((node(a), node(b)));
    }
    Ok(out)
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    let var = if n > 1.0 { v.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

struct Replication {
    sq_err: Vec<f64>,
    err_terminal: f64,
    /// `dM / sqrt(dt dx)`, row-major over cells.
    dm: Vec<f64>,
    dn_var_cell: f64,
}

/// Runs the filter on `reps` simulated paths and checks the error surface,
/// the bias at the terminal node, and the whiteness of the innovation.
pub fn mc_validate(fm: &FilterModel, reps: usize, master_seed: u64, n_pairs: usize) -> Result<ValidationReport> {
    if reps < 2 {
        return Err(Error::Validation("at least two replications are required".into()));
    }
    let grid = *fm.grid();
    let nodes = consistency_nodes(&grid);
    let pairs = random_cell_pairs(&grid, n_pairs, master_seed)?;
    let var_cell = Node::new(grid.nt() - 1, grid.nx() - 1);
    let area = grid.cell_area();
    let scale = 1.0 / area.sqrt();
    let z = grid.terminal();

    let runs: Vec<Replication> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(master_seed, rep as u64);
            let b = simulate_with(fm.coefficients(), fm.scenario(), grid, seed);
            let yhat = fm.estimate(&b.du)?;
            let inn = innovation_from_increments(fm.coefficients(), &b.du, &yhat)?;
            Ok(Replication {
                sq_err: nodes.iter().map(|&n| (b.y.at(n) - yhat.at(n)).powi(2)).collect(),
                err_terminal: yhat.at(z) - b.y.at(z),
                dm: inn.dm.values().iter().map(|v| v * scale).collect(),
                dn_var_cell: inn.dn.get(var_cell.i, var_cell.j),
            })
        })
        .collect::<Result<_>>()?;

    let rf = reps as f64;
    let consistency = nodes
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let (mse, sd) = mean_sd(runs.iter().map(|r| r.sq_err[k]));
            NodeCheck { node, s: fm.surface().at(node), mse, se: sd / rf.sqrt() }
        })
        .collect();
    let (bm, bsd) = mean_sd(runs.iter().map(|r| r.err_terminal));

    let cells = grid.cell_count();
    let stats: Vec<(f64, f64)> = (0..cells).map(|c| mean_sd(runs.iter().map(move |r| r.dm[c]))).collect();
    let idx = |n: Node| n.i * grid.nx() + n.j;
    let pair_corr: Vec<PairCorrelation> = pairs
        .iter()
        .map(|&(a, b)| {
            let (ia, ib) = (idx(a), idx(b));
            let (ma, sa) = stats[ia];
            let (mb, sb) = stats[ib];
            let cov = runs.iter().map(|r| (r.dm[ia] - ma) * (r.dm[ib] - mb)).sum::<f64>() / (rf - 1.0);
            PairCorrelation { a, b, corr: cov / (sa * sb) }
        })
        .collect();
    let max_abs_corr = pair_corr.iter().fold(0.0f64, |m, p| m.max(p.corr.abs()));
    let max_mean_score = stats.iter().fold(0.0f64, |m, &(mu, sd)| m.max(mu.abs() / (sd / rf.sqrt())));
    let d = fm.coefficients().d.get(var_cell.i, var_cell.j);
    let (_, dn_sd) = mean_sd(runs.iter().map(|r| r.dn_var_cell));

    Ok(ValidationReport {
        grid,
        reps,
        master_seed,
        consistency,
        bias: (bm, bsd / rf.sqrt()),
        whiteness: WhitenessReport {
            reps,
            pairs: pair_corr,
            max_abs_corr,
            bound: 3.0 / rf.sqrt(),
            var_cell,
            var_ratio: dn_sd * dn_sd / (area * d * d),
            max_mean_score,
        },
    })
}
