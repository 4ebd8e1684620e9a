//! Exact Gaussian conditioning on the discretized model.
//!
//! On the grid, everything observable up to `Z` is a linear function of the
//! cell increments `dU_c` for cells inside `[0,Z]`. `Y` and these increments
//! are jointly Gaussian, so the conditional mean and variance of `Y(z)` come
//! from one dense solve.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::FilterModel;
use crate::grid::{CellField, Grid, Node};
use crate::kernel::{KernelTable, KernelTruncation};
use crate::moments::MomentSet;
use crate::scenario::{Coefficients, Scenario};
use crate::sheet::{replication_seed, streams, NormalStream};
use crate::simulate::simulate_with;

/// Largest number of observation cells the oracle accepts.
pub const MAX_ORACLE_CELLS: usize = 4096;

/// Joint law of the observation increments inside `[0, horizon]` and `Y` at the query nodes.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub horizon: Node,
    /// Observation cells in lexicographic order.
    pub cells: Vec<Node>,
    pub mean_u: DVector<f64>,
    pub sigma_uu: DMatrix<f64>,
    pub queries: Vec<Node>,
    /// `Cov(Y(z), dU)` per query node.
    pub sigma_yu: Vec<DVector<f64>>,
    pub prior_mean: Vec<f64>,
    pub prior_var: Vec<f64>,
    /// `Sigma_UU^{-1} Sigma_UY` per query node.
    gains: Vec<DVector<f64>>,
    posterior_var: Vec<f64>,
}

impl JointModel {
    /// Assembles and factorizes the model from precomputed moments.
    pub fn from_moments(
        moments: &MomentSet<'_>,
        coeffs: &Coefficients,
        horizon: Node,
        queries: &[Node],
    ) -> Result<Self> {
        let grid = *moments.grid();
        grid.check_node(horizon)?;
        for &z in queries {
            if !z.le(horizon) {
                return Err(Error::Domain(format!("query node {z:?} is not inside [0, {horizon:?}]")));
            }
        }
        let n = horizon.i * horizon.j;
        if n > MAX_ORACLE_CELLS {
            return Err(Error::Size { needed: n, budget: MAX_ORACLE_CELLS });
        }
        let area = grid.cell_area();
        let cells: Vec<Node> = (0..horizon.i)
            .flat_map(|i| (0..horizon.j).map(move |j| Node::new(i, j)))
            .collect();
        let g: Vec<f64> = cells.iter().map(|c| coeffs.g.get(c.i, c.j)).collect();
        let mean = moments.mean();
        let mean_u = DVector::from_iterator(n, cells.iter().zip(&g).map(|(c, gc)| gc * mean.at(*c) * area));

        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let mut v = g[a] * g[b] * moments.covariance(cells[a], cells[b]) * area * area;
                        if a == b {
                            let d = coeffs.d.get(cells[a].i, cells[a].j);
                            v += d * d * area;
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        let sigma_uu = DMatrix::from_fn(n, n, |a, b| rows[a][b]);

        let sigma_yu: Vec<DVector<f64>> = queries
            .iter()
            .map(|&z| {
                DVector::from_iterator(
                    n,
                    cells.iter().zip(&g).map(|(c, gc)| gc * moments.covariance(z, *c) * area),
                )
            })
            .collect();
        let prior_mean: Vec<f64> = queries.iter().map(|&z| mean.at(z)).collect();
        let prior_var: Vec<f64> = queries.iter().map(|&z| moments.var().at(z)).collect();

        let (gains, posterior_var) = if n == 0 {
            (vec![DVector::zeros(0); queries.len()], prior_var.clone())
        } else {
            let chol = factorize(&sigma_uu)?;
            let gains: Vec<DVector<f64>> = sigma_yu.iter().map(|s| chol.solve(s)).collect();
            let post = prior_var
                .iter()
                .zip(sigma_yu.iter().zip(&gains))
                .map(|(v, (s, k))| v - s.dot(k))
                .collect();
            (gains, post)
        };

        Ok(JointModel {
            horizon,
            cells,
            mean_u,
            sigma_uu,
            queries: queries.to_vec(),
            sigma_yu,
            prior_mean,
            prior_var,
            gains,
            posterior_var,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn query_index(&self, z: Node) -> Result<usize> {
        self.queries
            .iter()
            .position(|&q| q == z)
            .ok_or_else(|| Error::Domain(format!("{z:?} is not a query node of this model")))
    }

    /// Observation vector of the model's cells, taken from a full-grid increment field.
    pub fn observed(&self, du: &CellField) -> Vec<f64> {
        self.cells.iter().map(|c| du.get(c.i, c.j)).collect()
    }

    /// Coefficients of the conditional mean: `mean = intercept + sum_k w_k dU_k`.
    pub fn weights(&self, z: Node) -> Result<(f64, &DVector<f64>)> {
        let k = self.query_index(z)?;
        let intercept = self.prior_mean[k] - self.gains[k].dot(&self.mean_u);
        Ok((intercept, &self.gains[k]))
    }
}

fn factorize(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| {
        let min_diag = m.diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
        Error::Numerical(format!(
            "observation covariance is not positive definite ({}x{}, smallest diagonal {min_diag:e})",
            m.nrows(),
            m.ncols()
        ))
    })
}

/// Builds the joint model for observations inside `[0, horizon]`.
pub fn build_joint_model(scenario: &Scenario, grid: Grid, horizon: Node, queries: &[Node]) -> Result<JointModel> {
    scenario.ensure_valid(&grid)?;
    let kernel = KernelTable::build(scenario, grid, &KernelTruncation::default())?;
    let moments = MomentSet::new(scenario, &kernel);
    JointModel::from_moments(&moments, &scenario.discretize(grid), horizon, queries)
}

/// Conditional mean and variance of `Y(z)` given the observed increments.
pub fn conditional(model: &JointModel, observed: &[f64], z: Node) -> Result<(f64, f64)> {
    if observed.len() != model.len() {
        return Err(Error::Domain(format!(
            "expected {} observed increments, got {}",
            model.len(),
            observed.len()
        )));
    }
    let k = model.query_index(z)?;
    let mut mean = model.prior_mean[k];
    for ((w, u), e) in model.gains[k].iter().zip(observed).zip(model.mean_u.iter()) {
        mean += w * (u - e);
    }
    Ok((mean, model.posterior_var[k]))
}

/// One replication of [`mc_compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRecord {
    pub rep: usize,
    pub seed: u64,
    pub y: f64,
    pub filter: f64,
    pub oracle: f64,
}

/// Filter against oracle at the terminal node.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub grid: Grid,
    pub reps: usize,
    pub master_seed: u64,
    pub rms_diff: f64,
    pub mse_filter: f64,
    pub mse_oracle: f64,
    pub mean_error_filter: f64,
    /// Error surface at the terminal node.
    pub s_terminal: f64,
    pub oracle_var: f64,
    pub records: Vec<CompareRecord>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs `reps` replications of simulate, filter and condition at the terminal node.
///
/// Replications run in parallel; results are collected in replication order,
/// so the report does not depend on the worker count.
pub fn mc_compare(
    scenario: &Scenario,
    grid: Grid,
    reps: usize,
    master_seed: u64,
    trunc: &KernelTruncation,
) -> Result<CompareReport> {
    if reps == 0 {
        return Err(Error::Validation("at least one replication is required".into()));
    }
    let fm = FilterModel::new(scenario, grid, trunc)?;
    let z = grid.terminal();
    let model = JointModel::from_moments(&fm.moments(), fm.coefficients(), z, &[z])?;
    let records: Vec<CompareRecord> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(master_seed, rep as u64);
            let b = simulate_with(fm.coefficients(), scenario, grid, seed);
            let filter = fm.estimate(&b.du)?.at(z);
            let (oracle, _) = conditional(&model, &model.observed(&b.du), z)?;
            Ok(CompareRecord { rep, seed, y: b.y.at(z), filter, oracle })
        })
        .collect::<Result<_>>()?;
    let rms_diff = mean(records.iter().map(|r| (r.filter - r.oracle).powi(2))).sqrt();
    Ok(CompareReport {
        grid,
        reps,
        master_seed,
        rms_diff,
        mse_filter: mean(records.iter().map(|r| (r.filter - r.y).powi(2))),
        mse_oracle: mean(records.iter().map(|r| (r.oracle - r.y).powi(2))),
        mean_error_filter: mean(records.iter().map(|r| r.filter - r.y)),
        s_terminal: fm.surface().at(z),
        oracle_var: model.posterior_var[0],
        records,
    })
}

/// Empirical MSE of competing linear estimators of `Y(Z)`.
#[derive(Debug, Clone)]
pub struct OptimalityReport {
    pub reps: usize,
    pub mse_filter: f64,
    pub mse_oracle: f64,
    pub mse_prior: f64,
    /// `m(Z) + beta (U(Z) - E U(Z))` with the best scalar `beta`.
    pub mse_raw: f64,
    /// Oracle weights scaled cellwise by `1 + scale * xi`, re-centred to stay unbiased.
    pub mse_perturbed: Vec<f64>,
    pub perturbation_scale: f64,
}

impl OptimalityReport {
    /// True when the filter beats the prior mean, the raw observation and every perturbation.
    pub fn filter_is_best(&self) -> bool {
        self.mse_filter <= self.mse_prior
            && self.mse_filter <= self.mse_raw
            && self.mse_perturbed.iter().all(|&m| self.mse_filter <= m)
    }
}

/// Compares the filter against the prior mean, the rescaled raw observation
/// and `n_perturb` perturbed linear estimators on common replications.
pub fn optimality_study(
    scenario: &Scenario,
    grid: Grid,
    reps: usize,
    master_seed: u64,
    n_perturb: usize,
    scale: f64,
    trunc: &KernelTruncation,
) -> Result<OptimalityReport> {
    if reps == 0 {
        return Err(Error::Validation("at least one replication is required".into()));
    }
    let fm = FilterModel::new(scenario, grid, trunc)?;
    let z = grid.terminal();
    let model = JointModel::from_moments(&fm.moments(), fm.coefficients(), z, &[z])?;
    let n = model.len();
    let prior = fm.mean().at(z);

    let w: Vec<f64> = model.weights(z)?.1.iter().copied().collect();
    let mut xi = NormalStream::new(master_seed, streams::PERTURBATION);
    let perturbed: Vec<(f64, Vec<f64>)> = (0..n_perturb)
        .map(|_| {
            let wp: Vec<f64> = w.iter().map(|wc| wc * (1.0 + scale * xi.next_normal())).collect();
            let intercept = prior - wp.iter().zip(model.mean_u.iter()).map(|(a, e)| a * e).sum::<f64>();
            (intercept, wp)
        })
        .collect();

    // U(Z) - E U(Z) is the sum of all centred increments
    let ones = DVector::from_element(n, 1.0);
    let var_sum = ones.dot(&(&model.sigma_uu * &ones));
    let cov_sum = model.sigma_yu[0].sum();
    let beta = if var_sum > 0.0 { cov_sum / var_sum } else { 0.0 };
    let mean_sum = model.mean_u.sum();

    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(master_seed, rep as u64);
            let b = simulate_with(fm.coefficients(), scenario, grid, seed);
            let y = b.y.at(z);
            let obs = model.observed(&b.du);
            let filter = fm.estimate(&b.du)?.at(z);
            let (oracle, _) = conditional(&model, &obs, z)?;
            let raw = prior + beta * (obs.iter().sum::<f64>() - mean_sum);
            let mut errs = vec![(filter - y).powi(2), (oracle - y).powi(2), (prior - y).powi(2), (raw - y).powi(2)];
            for (c, wp) in &perturbed {
                let est = c + wp.iter().zip(&obs).map(|(a, u)| a * u).sum::<f64>();
                errs.push((est - y).powi(2));
            }
            Ok(errs)
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| mean(rows.iter().map(|r| r[k]));
    Ok(OptimalityReport {
        reps,
        mse_filter: col(0),
        mse_oracle: col(1),
        mse_prior: col(2),
        mse_raw: col(3),
        mse_perturbed: (0..n_perturb).map(|k| col(4 + k)).collect(),
        perturbation_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Coefficient;
    use crate::simulate::simulate_paths;

    #[test]
    fn one_cell_constant_signal() {
        let g = Grid::unit(1).unwrap();
        let s = Scenario::constant_signal(0.0, 1.0).unwrap();
        let z = g.terminal();
        let m = build_joint_model(&s, g, z, &[z]).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.sigma_uu[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((m.sigma_yu[0][0] - 1.0).abs() < 1e-15);
        let (mean, var) = conditional(&m, &[0.8], z).unwrap();
        assert!((var - 0.5).abs() < 1e-15);
        assert!((mean - 0.4).abs() < 1e-15);
    }

    #[test]
    fn blind_observation_is_diagonal() {
        let g = Grid::unit(4).unwrap();
        let s = Scenario::new(
            Coefficient::Constant(0.0),
            Coefficient::Constant(1.0),
            Coefficient::Constant(0.0),
            Coefficient::Constant(2.0),
            1.0,
            0.5,
            1.0,
        )
        .unwrap();
        let z = g.terminal();
        let m = build_joint_model(&s, g, z, &[z]).unwrap();
        let a = g.cell_area();
        for r in 0..16 {
            for c in 0..16 {
                let want = if r == c { 4.0 * a } else { 0.0 };
                assert_eq!(m.sigma_uu[(r, c)], want);
            }
        }
        assert!(m.sigma_yu[0].iter().all(|&v| v == 0.0));
        let (mean, var) = conditional(&m, &[3.0; 16], z).unwrap();
        assert_eq!(mean, 0.5);
        assert!((var - 2.0).abs() < 1e-14);
    }

    #[test]
    fn empty_observation_set_returns_prior() {
        let g = Grid::unit(3).unwrap();
        let s = Scenario::sheet_signal();
        let z = Node::new(0, 3);
        let m = build_joint_model(&s, g, z, &[z]).unwrap();
        assert!(m.is_empty());
        assert_eq!(conditional(&m, &[], z).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn variance_does_not_depend_on_observations() {
        let g = Grid::unit(5).unwrap();
        let s = Scenario::sheet_signal();
        let z = g.terminal();
        let m = build_joint_model(&s, g, z, &[z, Node::new(3, 2)]).unwrap();
        let a = simulate_paths(&s, g, 1).unwrap();
        let b = simulate_paths(&s, g, 2).unwrap();
        let (ma, va) = conditional(&m, &m.observed(&a.du), z).unwrap();
        let (mb, vb) = conditional(&m, &m.observed(&b.du), z).unwrap();
        assert_ne!(ma, mb);
        assert_eq!(va, vb);
        assert!(matches!(conditional(&m, &[1.0], z), Err(Error::Domain(_))));
        assert!(matches!(conditional(&m, &m.observed(&a.du), Node::new(1, 1)), Err(Error::Domain(_))));
    }

    #[test]
    fn weights_reproduce_the_conditional_mean() {
        let g = Grid::unit(4).unwrap();
        let s = Scenario::constant_signal(0.3, 2.0).unwrap();
        let z = Node::new(4, 3);
        let m = build_joint_model(&s, g, z, &[z]).unwrap();
        let b = simulate_paths(&s, g, 9).unwrap();
        let obs = m.observed(&b.du);
        let (c, w) = m.weights(z).unwrap();
        let lin = c + w.iter().zip(&obs).map(|(a, u)| a * u).sum::<f64>();
        assert!((lin - conditional(&m, &obs, z).unwrap().0).abs() < 1e-12);
    }

    #[test]
    fn size_guard_and_query_domain() {
        let g = Grid::unit(65).unwrap();
        let s = Scenario::sheet_signal();
        let z = g.terminal();
        assert!(matches!(build_joint_model(&s, g, z, &[z]), Err(Error::Size { .. })));
        let g = Grid::unit(4).unwrap();
        assert!(matches!(
            build_joint_model(&s, g, Node::new(2, 2), &[Node::new(3, 1)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn blind_replication_filter_equals_oracle() {
        let s = Scenario::new(
            Coefficient::Constant(0.0),
            Coefficient::Constant(1.0),
            Coefficient::Constant(0.0),
            Coefficient::Constant(1.0),
            1.0,
            0.25,
            1.0,
        )
        .unwrap();
        let r = mc_compare(&s, Grid::unit(4).unwrap(), 1, 3, &KernelTruncation::default()).unwrap();
        assert_eq!(r.records[0].filter, 0.25);
        assert_eq!(r.records[0].oracle, 0.25);
        assert_eq!(r.rms_diff, 0.0);
    }
}
