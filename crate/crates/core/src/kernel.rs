//! Resolvent kernel of the Goursat problem `d^2k/dtdx = F k`.
//!
//! For an anchor `zeta`, `K(zeta; .)` solves
//! `k(z) = 1 + int_[zeta, z] F(u) k(u) du` and equals the series
//! `sum_n J_n F(zeta; z)` with `J_0 = 1` and
//! `J_n(zeta; z) = int_[zeta, z] F(u) J_{n-1}(zeta; u) du`.
//!
//! Three evaluation routes are provided:
//! * product form `F = f(t) g(x)`: `J_n = (int f)^n (int g)^n / (n!)^2`, summed in closed form;
//! * explicit corner recursion on the grid (left-corner rule);
//! * the discrete series, summing the iterated grid integrals term by term.
//!
//! The last two agree to the series tolerance; the first agrees with them to `O(dt + dx)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{CellField, Field, Grid, Node};
use crate::scenario::{Poly, Scenario};

/// Series cutoff: at most `n_max` terms past `J_0`, stopping once a term's
/// sup norm drops below `tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTruncation {
    pub n_max: usize,
    pub tol: f64,
}

impl Default for KernelTruncation {
    fn default() -> Self {
        KernelTruncation { n_max: 30, tol: 1e-12 }
    }
}

impl KernelTruncation {
    pub fn new(n_max: usize, tol: f64) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Validation("n_max must be at least 1".into()));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Validation(format!("tol must be positive, got {tol}")));
        }
        Ok(KernelTruncation { n_max, tol })
    }
}

/// Default cap on tabulated kernel entries (8 bytes each).
pub const DEFAULT_TABLE_BUDGET: usize = 1 << 25;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `J_n F(from; to)` for `F(t, x) = f(t) g(x)`.
pub fn jn_product_form(n: usize, f: &Poly, g: &Poly, from: (f64, f64), to: (f64, f64)) -> Result<f64> {
    if !(from.0 <= to.0 && from.1 <= to.1) {
        return Err(Error::Domain(format!(
            "J_n needs from <= to componentwise, got {from:?} and {to:?}"
        )));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let a = f.integral(from.0, to.0);
    let b = g.integral(from.1, to.1);
    let nf = factorial(n);
    Ok((a * b).powi(n as i32) / (nf * nf))
}

/// `sum_{n>=0} p^n / (n!)^2`, stopping once a term falls below `tol`.
fn product_series(p: f64, trunc: &KernelTruncation) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=trunc.n_max {
        term *= p / (n * n) as f64;
        sum += term;
        if term.abs() < trunc.tol {
            return Ok(sum);
        }
    }
    Err(Error::Truncation { terms: trunc.n_max, last_term: term.abs(), tol: trunc.tol })
}

/// Same series without the convergence report; callers check the worst case up front.
#[inline]
fn product_series_unchecked(p: f64, trunc: &KernelTruncation) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=trunc.n_max {
        term *= p / (n * n) as f64;
        sum += term;
        if term.abs() < trunc.tol {
            break;
        }
    }
    sum
}

/// `K(anchor; z)` for every node `z >= anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    grid: Grid,
    anchor: Node,
    cols: usize,
    values: Vec<f64>,
}

impl Resolvent {
    fn filled(grid: Grid, anchor: Node, value: f64) -> Self {
        let rows = grid.nt() + 1 - anchor.i;
        let cols = grid.nx() + 1 - anchor.j;
        Resolvent { grid, anchor, cols, values: vec![value; rows * cols] }
    }

    pub fn anchor(&self) -> Node {
        self.anchor
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, z: Node) -> f64 {
        debug_assert!(self.anchor.le(z));
        self.values[(z.i - self.anchor.i) * self.cols + (z.j - self.anchor.j)]
    }

    #[inline]
    fn set(&mut self, z: Node, v: f64) {
        let k = (z.i - self.anchor.i) * self.cols + (z.j - self.anchor.j);
        self.values[k] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Resolvent) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Embeds into a full-grid field; nodes outside `[anchor, terminal]` hold `outside`.
    pub fn to_field(&self, outside: f64) -> Field {
        let mut f = Field::constant(self.grid, outside);
        for i in self.anchor.i..=self.grid.nt() {
            for j in self.anchor.j..=self.grid.nx() {
                f.set(i, j, self.get(Node::new(i, j)));
            }
        }
        f
    }
}

/// `base + int_[anchor, z] F(u) src(u) du` on the rectangle, left-corner rule.
fn integrate_against(f: &CellField, src: &Resolvent, base: f64) -> Resolvent {
    let grid = *f.grid();
    let a = src.anchor;
    let area = grid.cell_area();
    let mut out = Resolvent::filled(grid, a, base);
    for i in a.i..grid.nt() {
        let mut acc = 0.0;
        for j in a.j..grid.nx() {
            acc += f.get(i, j) * src.get(Node::new(i, j)) * area;
            let below = out.get(Node::new(i, j + 1));
            out.set(Node::new(i + 1, j + 1), below + acc);
        }
    }
    out
}

/// Explicit corner recursion
/// `k(i+1,j+1) = k(i+1,j) + k(i,j+1) - k(i,j) + F(i,j) k(i,j) dt dx`, `k = 1` on the lines through the anchor.
pub fn resolvent_recursion(anchor: Node, f: &CellField) -> Resolvent {
    let grid = *f.grid();
    let area = grid.cell_area();
    let mut k = Resolvent::filled(grid, anchor, 1.0);
    for i in anchor.i..grid.nt() {
        let mut acc = 0.0;
        for j in anchor.j..grid.nx() {
            acc += f.get(i, j) * k.get(Node::new(i, j)) * area;
            let below = k.get(Node::new(i, j + 1));
            k.set(Node::new(i + 1, j + 1), below + acc);
        }
    }
    k
}

/// Discrete series terms `J_0, ..., J_n` anchored at `anchor`.
pub fn series_terms(anchor: Node, f: &CellField, n: usize) -> Vec<Resolvent> {
    let grid = *f.grid();
    let mut terms = vec![Resolvent::filled(grid, anchor, 1.0)];
    for _ in 0..n {
        let next = integrate_against(f, terms.last().unwrap(), 0.0);
        terms.push(next);
    }
    terms
}

/// Sum of the discrete series, stopping when a term's sup norm is below `tol`.
pub fn resolvent_series(anchor: Node, f: &CellField, trunc: &KernelTruncation) -> Result<Resolvent> {
    let grid = *f.grid();
    let mut term = Resolvent::filled(grid, anchor, 1.0);
    let mut sum = term.clone();
    for _ in 1..=trunc.n_max {
        term = integrate_against(f, &term, 0.0);
        for (s, t) in sum.values.iter_mut().zip(&term.values) {
            *s += t;
        }
        if term.sup_norm() < trunc.tol {
            return Ok(sum);
        }
    }
    Err(Error::Truncation { terms: trunc.n_max, last_term: term.sup_norm(), tol: trunc.tol })
}

/// Closed-form kernel for `F = f(t) g(x)`, evaluated at every node of the rectangle.
pub fn resolvent_product(
    anchor: Node,
    f: &Poly,
    g: &Poly,
    grid: Grid,
    trunc: &KernelTruncation,
) -> Result<Resolvent> {
    grid.check_node(anchor)?;
    let mut k = Resolvent::filled(grid, anchor, 1.0);
    let (s, a) = (grid.t(anchor.i), grid.x(anchor.j));
    for i in anchor.i..=grid.nt() {
        let fi = f.integral(s, grid.t(i));
        for j in anchor.j..=grid.nx() {
            let gj = g.integral(a, grid.x(j));
            k.set(Node::new(i, j), product_series(fi * gj, trunc)?);
        }
    }
    Ok(k)
}

/// `K(anchor; .)` for a scenario: closed form when `F` is of product form,
/// grid recursion otherwise.
pub fn resolvent_from(
    anchor: Node,
    scenario: &Scenario,
    grid: Grid,
    trunc: &KernelTruncation,
) -> Result<Resolvent> {
    grid.check_node(anchor)?;
    match scenario.f.product_factors() {
        Some((f, g)) => resolvent_product(anchor, &f, &g, grid, trunc),
        None => Ok(resolvent_recursion(anchor, &scenario.f.on_cells(grid))),
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// `F = 0`.
    Unit,
    /// `F = f(t) g(x)`; cumulative axis integrals `int_0^{t_i} f` and `int_0^{x_j} g`.
    Product { f_cum: Vec<f64>, g_cum: Vec<f64>, trunc: KernelTruncation },
    /// One recursion per anchor, stored back to back.
    Tabulated { offsets: Vec<usize>, values: Vec<f64> },
}

/// `K(zeta; z)` for all node pairs `zeta <= z`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid,
    repr: Repr,
}

impl KernelTable {
    pub fn build(scenario: &Scenario, grid: Grid, trunc: &KernelTruncation) -> Result<Self> {
        KernelTable::with_budget(scenario, grid, trunc, DEFAULT_TABLE_BUDGET)
    }

    /// Like [`KernelTable::build`] with an explicit cap on stored entries.
    pub fn with_budget(
        scenario: &Scenario,
        grid: Grid,
        trunc: &KernelTruncation,
        budget: usize,
    ) -> Result<Self> {
        if scenario.f.is_zero() {
            return Ok(KernelTable { grid, repr: Repr::Unit });
        }
        if let Some((f, g)) = scenario.f.product_factors() {
            let f_cum: Vec<f64> = (0..=grid.nt()).map(|i| f.integral(0.0, grid.t(i))).collect();
            let g_cum: Vec<f64> = (0..=grid.nx()).map(|j| g.integral(0.0, grid.x(j))).collect();
            let spread = |v: &[f64]| {
                let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                hi - lo
            };
            // every |J_n| is dominated by the series at the widest spread
            product_series(spread(&f_cum) * spread(&g_cum), trunc)?;
            return Ok(KernelTable { grid, repr: Repr::Product { f_cum, g_cum, trunc: *trunc } });
        }
        let tri = |n: usize| (n + 1) * (n + 2) / 2;
        let needed = tri(grid.nt()) * tri(grid.nx());
        if needed > budget {
            return Err(Error::Size { needed, budget });
        }
        let f = scenario.f.on_cells(grid);
        let anchors: Vec<Node> = (0..=grid.nt())
            .flat_map(|i| (0..=grid.nx()).map(move |j| Node::new(i, j)))
            .collect();
        let blocks: Vec<Vec<f64>> = anchors
            .par_iter()
            .map(|&a| resolvent_recursion(a, &f).values)
            .collect();
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut values = Vec::with_capacity(needed);
        for b in blocks {
            offsets.push(values.len());
            values.extend(b);
        }
        Ok(KernelTable { grid, repr: Repr::Tabulated { offsets, values } })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// True when `K` is identically one (`F = 0`).
    pub fn is_unit(&self) -> bool {
        matches!(self.repr, Repr::Unit)
    }

    /// `K(anchor; z)`; requires `anchor <= z`.
    #[inline]
    pub fn get(&self, anchor: Node, z: Node) -> f64 {
        debug_assert!(anchor.le(z), "{anchor:?} !<= {z:?}");
        match &self.repr {
            Repr::Unit => 1.0,
            Repr::Product { f_cum, g_cum, trunc } => {
                let p = (f_cum[z.i] - f_cum[anchor.i]) * (g_cum[z.j] - g_cum[anchor.j]);
                product_series_unchecked(p, trunc)
            }
            Repr::Tabulated { offsets, values } => {
                let nx = self.grid.nx();
                let base = offsets[anchor.i * (nx + 1) + anchor.j];
                let cols = nx + 1 - anchor.j;
                values[base + (z.i - anchor.i) * cols + (z.j - anchor.j)]
            }
        }
    }

    /// `K(0; z)` at every node.
    pub fn from_origin(&self) -> Field {
        let mut out = Field::zeros(self.grid);
        for i in 0..=self.grid.nt() {
            for j in 0..=self.grid.nx() {
                out.set(i, j, self.get(Node::ORIGIN, Node::new(i, j)));
            }
        }
        out
    }
}

/// Residual of `K(zeta; z) = 1 + int_[zeta, z] K(u; z) F(u) du`, the identity
/// that integrates over the anchor instead of the endpoint.
pub fn reciprocal_residual(table: &KernelTable, f: &CellField, zeta: Node, z: Node) -> f64 {
    let area = table.grid().cell_area();
    let mut integral = 0.0;
    for i in zeta.i..z.i {
        for j in zeta.j..z.j {
            integral += table.get(Node::new(i, j), z) * f.get(i, j) * area;
        }
    }
    table.get(zeta, z) - 1.0 - integral
}
