//! Exact first and second moments of the signal from the kernel representation
//!
//! `Y(z) = Y0 K(0; z) + int_[0,z] K(u; z) C(u) B1(du)`,
//!
//! which gives `E[Y(z)] = mu0 K(0; z)` and
//! `Cov(Y(a), Y(b)) = sigma0^2 K(0;a) K(0;b) + int_[0, a^b] K(u;a) K(u;b) C(u)^2 du`.

use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, mixed_difference, CellField, Field, Grid, Node};
use crate::kernel::{KernelTable, KernelTruncation};
use crate::scenario::Scenario;

/// Mean, variance and two-point covariance of `Y` on a grid.
#[derive(Debug, Clone)]
pub struct MomentSet<'k> {
    kernel: &'k KernelTable,
    sigma0_sq: f64,
    c2: CellField,
    /// `int_[0,z] C^2`, used when the kernel is identically one.
    c2_cum: Field,
    k0: Field,
    mean: Field,
    var: Field,
}

impl<'k> MomentSet<'k> {
    pub fn new(scenario: &Scenario, kernel: &'k KernelTable) -> Self {
        let grid = *kernel.grid();
        let c2 = scenario.c.on_cells(grid).map(|c| c * c);
        let c2_cum = cumulative_integral(&c2);
        let k0 = kernel.from_origin();
        let mean = k0.map(|k| scenario.mu0 * k);
        let mut set = MomentSet {
            kernel,
            sigma0_sq: scenario.sigma0_sq,
            c2,
            c2_cum,
            k0,
            mean,
            var: Field::zeros(grid),
        };
        let mut var = Field::zeros(grid);
        for i in 0..=grid.nt() {
            for j in 0..=grid.nx() {
                let z = Node::new(i, j);
                var.set(i, j, set.covariance(z, z));
            }
        }
        set.var = var;
        set
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    pub fn kernel(&self) -> &KernelTable {
        self.kernel
    }

    /// `E[Y(z)]`.
    pub fn mean(&self) -> &Field {
        &self.mean
    }

    /// `Var Y(z)`.
    pub fn var(&self) -> &Field {
        &self.var
    }

    /// `E[Y(z)^2] = Var + mean^2`.
    pub fn second_moment(&self) -> Field {
        let vals = self.var.values().iter().zip(self.mean.values()).map(|(v, m)| v + m * m).collect();
        Field::from_values(*self.grid(), vals).expect("finite moments")
    }

    /// `Cov(Y(a), Y(b))`.
    pub fn covariance(&self, a: Node, b: Node) -> f64 {
        let meet = a.meet(b);
        let initial = self.sigma0_sq * (self.k0.at(a) * self.k0.at(b));
        if self.kernel.is_unit() {
            return initial + self.c2_cum.at(meet);
        }
        let area = self.grid().cell_area();
        let mut acc = 0.0;
        for i in 0..meet.i {
            for j in 0..meet.j {
                let c2 = self.c2.get(i, j);
                if c2 != 0.0 {
                    let u = Node::new(i, j);
                    acc += self.kernel.get(u, a) * self.kernel.get(u, b) * c2;
                }
            }
        }
        initial + acc * area
    }
}

/// `E[Y(z)] = mu0 K(0; z)` at every node.
pub fn mean_field(scenario: &Scenario, grid: Grid, trunc: &KernelTruncation) -> Result<Field> {
    scenario.ensure_valid(&grid)?;
    let kernel = KernelTable::build(scenario, grid, trunc)?;
    Ok(kernel.from_origin().map(|k| scenario.mu0 * k))
}

/// `Cov(Y(a), Y(b))` for one pair of nodes.
pub fn covariance(
    scenario: &Scenario,
    grid: Grid,
    trunc: &KernelTruncation,
    a: Node,
    b: Node,
) -> Result<f64> {
    grid.check_node(a)?;
    grid.check_node(b)?;
    scenario.ensure_valid(&grid)?;
    let kernel = KernelTable::build(scenario, grid, trunc)?;
    Ok(MomentSet::new(scenario, &kernel).covariance(a, b))
}

/// Outcome of [`second_moment_consistency_check`].
#[derive(Debug, Clone)]
pub struct SecondMomentReport {
    /// Mixed difference of `E[Y^2]` per cell.
    pub mixed: CellField,
    /// `max |mixed - C^2|` over cells.
    pub max_deviation: f64,
}

/// With `F = 0` the second moment solves `d^2 E[Y^2] / dtdx = C^2`; this
/// compares the mixed difference of `Var + mean^2` with `C^2` cell by cell.
pub fn second_moment_consistency_check(scenario: &Scenario, grid: Grid) -> Result<SecondMomentReport> {
    if !scenario.f.is_zero() {
        return Err(Error::Unsupported(
            "the second-moment check is only defined for F = 0".into(),
        ));
    }
    scenario.ensure_valid(&grid)?;
    let kernel = KernelTable::build(scenario, grid, &KernelTruncation::default())?;
    let moments = MomentSet::new(scenario, &kernel);
    let mixed = mixed_difference(&moments.second_moment());
    let c2 = scenario.c.on_cells(grid).map(|c| c * c);
    let max_deviation = mixed.max_abs_diff(&c2);
    Ok(SecondMomentReport { mixed, max_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Coefficient;

    fn scen(f: Coefficient, c: Coefficient, mu0: f64, s0: f64) -> Scenario {
        Scenario::new(f, c, Coefficient::Constant(1.0), Coefficient::Constant(1.0), 1.0, mu0, s0)
            .unwrap()
    }

    #[test]
    fn mean_examples() {
        let g = Grid::unit(8).unwrap();
        let trunc = KernelTruncation::default();
        let zero = Coefficient::Constant(0.0);
        let m = mean_field(&scen(Coefficient::Constant(1.0), zero.clone(), 0.0, 1.0), g, &trunc).unwrap();
        assert_eq!(m.values().iter().fold(0.0f64, |a, v| a.max(v.abs())), 0.0);
        let m = mean_field(&scen(zero.clone(), zero.clone(), 3.0, 1.0), g, &trunc).unwrap();
        assert!(m.values().iter().all(|&v| v == 3.0));
        let m = mean_field(&scen(Coefficient::Constant(1.0), zero, 1.0, 0.0), g, &trunc).unwrap();
        assert!((m.at(g.terminal()) - 2.279_585_302_336_067).abs() < 1e-9);
    }

    #[test]
    fn sheet_covariance_is_min_product() {
        let g = Grid::unit(64).unwrap();
        let s = Scenario::sheet_signal();
        let c = covariance(&s, g, &KernelTruncation::default(), Node::new(64, 64), Node::new(32, 64)).unwrap();
        assert!((c - 0.5).abs() < 5e-3);
        let kernel = KernelTable::build(&s, g, &KernelTruncation::default()).unwrap();
        let m = MomentSet::new(&s, &kernel);
        assert!((m.covariance(Node::new(10, 40), Node::new(30, 20)) - (10.0 / 64.0) * (20.0 / 64.0)).abs() < 1e-14);
    }

    #[test]
    fn pure_initial_variance() {
        let g = Grid::unit(6).unwrap();
        let zero = Coefficient::Constant(0.0);
        let s = scen(zero.clone(), zero, 0.0, 1.0);
        let kernel = KernelTable::build(&s, g, &KernelTruncation::default()).unwrap();
        let m = MomentSet::new(&s, &kernel);
        for (a, b) in [((0, 0), (6, 6)), ((2, 5), (4, 1)), ((3, 3), (3, 3))] {
            assert_eq!(m.covariance(Node::new(a.0, a.1), Node::new(b.0, b.1)), 1.0);
        }
    }

    #[test]
    fn symmetric_and_boundary_variance() {
        let g = Grid::unit(10).unwrap();
        let s = scen(
            Coefficient::Table(CellField::from_fn(g, |t, x| 0.5 - t * x)),
            Coefficient::product(&[1.0, 1.0], &[0.5]),
            0.2,
            0.7,
        );
        let kernel = KernelTable::build(&s, g, &KernelTruncation::default()).unwrap();
        let m = MomentSet::new(&s, &kernel);
        let a = Node::new(7, 3);
        let b = Node::new(4, 9);
        assert_eq!(m.covariance(a, b), m.covariance(b, a));
        assert_eq!(m.covariance(a, a), m.var().at(a));
        for k in 0..=10 {
            assert!((m.var().get(k, 0) - 0.7).abs() < 1e-15);
            assert!((m.var().get(0, k) - 0.7).abs() < 1e-15);
        }
        assert!(m.var().values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn second_moment_check_cases() {
        let g = Grid::unit(16).unwrap();
        let r = second_moment_consistency_check(&Scenario::sheet_signal(), g).unwrap();
        assert!(r.mixed.values().iter().all(|&v| (v - 1.0).abs() < 1e-10));

        let zero = Coefficient::Constant(0.0);
        let r = second_moment_consistency_check(&scen(zero.clone(), zero.clone(), 1.0, 2.0), g).unwrap();
        assert!(r.mixed.sup_norm() < 1e-12);

        let ct = scen(zero, Coefficient::product(&[0.0, 1.0], &[1.0]), 0.0, 0.0);
        let r = second_moment_consistency_check(&ct, g).unwrap();
        for i in 0..16 {
            let t = g.t(i);
            assert!((r.mixed.get(i, 5) - t * t).abs() < 1e-10);
        }
        assert!(r.max_deviation < 1e-10);

        let f1 = scen(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 0.0, 0.0);
        assert!(matches!(second_moment_consistency_check(&f1, g), Err(Error::Unsupported(_))));
    }
}
