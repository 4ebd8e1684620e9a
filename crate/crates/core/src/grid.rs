//! Uniform time-space grids and the scalar surfaces that live on them.
//!
//! A [`Grid`] discretizes `[0,T] x [0,X]` into `nt x nx` cells. Node values
//! are carried by [`Field`], per-cell values (increments, integrands) by
//! [`CellField`]. A cell is indexed by its lower-left node, and every
//! integrand is evaluated there.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node `(i, j)` of a grid, i.e. the point `(i dt, j dx)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub i: usize,
    pub j: usize,
}

impl Node {
    pub const ORIGIN: Node = Node { i: 0, j: 0 };

    pub fn new(i: usize, j: usize) -> Self {
        Node { i, j }
    }

    /// Componentwise order: `self <= other` in both coordinates.
    pub fn le(self, other: Node) -> bool {
        self.i <= other.i && self.j <= other.j
    }

    /// Componentwise minimum.
    pub fn meet(self, other: Node) -> Node {
        Node::new(self.i.min(other.i), self.j.min(other.j))
    }
}

/// Uniform rectangular discretization of `[0,T] x [0,X]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(rename = "T")]
    t_max: f64,
    #[serde(rename = "X")]
    x_max: f64,
    nt: usize,
    nx: usize,
}

impl Grid {
    pub fn new(t_max: f64, x_max: f64, nt: usize, nx: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0 && x_max.is_finite() && x_max > 0.0) {
            return Err(Error::Validation(format!(
                "grid horizons must be positive and finite, got T={t_max}, X={x_max}"
            )));
        }
        if nt == 0 || nx == 0 {
            return Err(Error::Validation(format!(
                "grid needs at least one cell per axis, got {nt}x{nx}"
            )));
        }
        Ok(Grid { t_max, x_max, nt, nx })
    }

    /// `n x n` grid on the unit square.
    pub fn unit(n: usize) -> Result<Self> {
        Grid::new(1.0, 1.0, n, n)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn dt(&self) -> f64 {
        self.t_max / self.nt as f64
    }
    pub fn dx(&self) -> f64 {
        self.x_max / self.nx as f64
    }
    /// Cell area `dt * dx`.
    pub fn cell_area(&self) -> f64 {
        self.dt() * self.dx()
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.nt {
            self.t_max
        } else {
            i as f64 * self.dt()
        }
    }
    pub fn x(&self, j: usize) -> f64 {
        if j == self.nx {
            self.x_max
        } else {
            j as f64 * self.dx()
        }
    }

    pub fn node_count(&self) -> usize {
        (self.nt + 1) * (self.nx + 1)
    }
    pub fn cell_count(&self) -> usize {
        self.nt * self.nx
    }

    /// Top-right corner `(T, X)`.
    pub fn terminal(&self) -> Node {
        Node::new(self.nt, self.nx)
    }

    pub fn contains_node(&self, z: Node) -> bool {
        z.i <= self.nt && z.j <= self.nx
    }

    pub fn check_node(&self, z: Node) -> Result<()> {
        if self.contains_node(z) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "node ({}, {}) outside {}x{} grid",
                z.i, z.j, self.nt, self.nx
            )))
        }
    }

    /// Node nearest to the physical point `(t, x)`.
    pub fn node_at(&self, t: f64, x: f64) -> Result<Node> {
        let eps = 1e-9;
        if !(t >= -eps && t <= self.t_max + eps && x >= -eps && x <= self.x_max + eps) {
            return Err(Error::Domain(format!(
                "point ({t}, {x}) outside [0,{}]x[0,{}]",
                self.t_max, self.x_max
            )));
        }
        let i = (t / self.dt()).round() as usize;
        let j = (x / self.dx()).round() as usize;
        Ok(Node::new(i.min(self.nt), j.min(self.nx)))
    }

    /// Lower-left node of the cell containing `(t, x)`; points on the far
    /// edges belong to the last cell.
    pub fn cell_at(&self, t: f64, x: f64) -> Node {
        let i = ((t / self.dt()).floor().max(0.0) as usize).min(self.nt - 1);
        let j = ((x / self.dx()).floor().max(0.0) as usize).min(self.nx - 1);
        Node::new(i, j)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nt == other.nt
            && self.nx == other.nx
            && self.t_max == other.t_max
            && self.x_max == other.x_max
    }
}

/// Real values at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.node_count()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..=grid.nt {
            for j in 0..=grid.nx {
                values.push(f(grid.t(i), grid.x(j)));
            }
        }
        Field { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Domain(format!(
                "field needs {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite field value at index {k}")));
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.grid.nt && j <= self.grid.nx);
        i * (self.grid.nx + 1) + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.offset(i, j)]
    }

    #[inline]
    pub fn at(&self, z: Node) -> f64 {
        self.get(z.i, z.j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j);
        self.values[k] = v;
    }

    /// Row `i` (fixed time index), `nx + 1` values.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.grid.nx + 1;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_triples(w, (0..=self.grid.nt).flat_map(|i| {
            (0..=self.grid.nx).map(move |j| (self.grid.t(i), self.grid.x(j), self.get(i, j)))
        }))
    }

    /// Reads a node field written by [`Field::write_csv`] for the given grid.
    pub fn read_csv<R: Read>(grid: Grid, r: R) -> Result<Field> {
        let values = read_triples(grid, r, grid.nt + 1, grid.nx + 1, |t, x| grid.node_at(t, x))?;
        Field::from_values(grid, values)
    }
}

/// Real values per cell, indexed by the cell's lower-left node.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: Grid) -> Self {
        CellField::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        CellField { grid, values: vec![value; grid.cell_count()] }
    }

    /// Evaluates `f` at each cell's lower-left corner.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cell_count());
        for i in 0..grid.nt {
            for j in 0..grid.nx {
                values.push(f(grid.t(i), grid.x(j)));
            }
        }
        CellField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::Domain(format!(
                "cell field needs {} values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite cell value at index {k}")));
        }
        Ok(CellField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.grid.nt && j < self.grid.nx);
        self.values[i * self.grid.nx + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = i * self.grid.nx + j;
        self.values[k] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.grid.nx..(i + 1) * self.grid.nx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs_diff(&self, other: &CellField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_triples(w, (0..self.grid.nt).flat_map(|i| {
            (0..self.grid.nx).map(move |j| (self.grid.t(i), self.grid.x(j), self.get(i, j)))
        }))
    }

    /// Reads a cell field whose rows carry each cell's lower-left corner.
    pub fn read_csv<R: Read>(grid: Grid, r: R) -> Result<CellField> {
        let values = read_triples(grid, r, grid.nt, grid.nx, |t, x| {
            let z = grid.node_at(t, x)?;
            if z.i >= grid.nt || z.j >= grid.nx {
                return Err(Error::Domain(format!("({t}, {x}) is not a cell corner")));
            }
            Ok(z)
        })?;
        CellField::from_values(grid, values)
    }
}

#[derive(Serialize, Deserialize)]
struct Triple {
    t: String,
    x: String,
    value: String,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_triples<W: Write>(w: W, rows: impl Iterator<Item = (f64, f64, f64)>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (t, x, v) in rows {
        out.serialize(Triple { t: fmt17(t), x: fmt17(x), value: fmt17(v) })?;
    }
    out.flush()?;
    Ok(())
}

fn read_triples<R: Read>(
    grid: Grid,
    r: R,
    rows: usize,
    cols: usize,
    locate: impl Fn(f64, f64) -> Result<Node>,
) -> Result<Vec<f64>> {
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Validation(format!("bad number {s:?}: {e}")))
    };
    let mut values = vec![f64::NAN; rows * cols];
    let mut seen = vec![false; rows * cols];
    let mut rdr = csv::Reader::from_reader(r);
    for rec in rdr.deserialize::<Triple>() {
        let rec = rec?;
        let z = locate(parse(&rec.t)?, parse(&rec.x)?)?;
        if z.i >= rows || z.j >= cols {
            return Err(Error::Domain(format!("row ({}, {}) outside the grid", rec.t, rec.x)));
        }
        let k = z.i * cols + z.j;
        values[k] = parse(&rec.value)?;
        seen[k] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Validation(format!(
            "csv is missing the value at ({}, {}) for a {}x{} grid",
            k / cols,
            k % cols,
            grid.nt,
            grid.nx
        )));
    }
    Ok(values)
}

/// `dt dx` times the sum of `f` over the cells inside `[0, z]`.
pub fn integrate_rect(f: &CellField, z: Node) -> Result<f64> {
    let grid = f.grid();
    grid.check_node(z)?;
    let mut acc = 0.0;
    for p in 0..z.i {
        let mut row = 0.0;
        for &v in &f.row(p)[..z.j] {
            row += v;
        }
        acc += grid.cell_area() * row;
    }
    Ok(acc)
}

/// [`integrate_rect`] at every node, in one sweep.
///
/// Summation order matches `integrate_rect`, so the two agree bit for bit.
pub fn cumulative_integral(f: &CellField) -> Field {
    let grid = *f.grid();
    let area = grid.cell_area();
    let mut out = Field::zeros(grid);
    let mut prefix = vec![0.0; grid.nx + 1];
    for i in 0..grid.nt {
        let mut row = 0.0;
        for (j, &v) in f.row(i).iter().enumerate() {
            row += v;
            prefix[j + 1] = row;
        }
        for (j, &p) in prefix.iter().enumerate() {
            let below = out.get(i, j);
            out.set(i + 1, j, below + area * p);
        }
    }
    out
}

/// Discrete mixed derivative `d^2/dtdx` per cell.
pub fn mixed_difference(field: &Field) -> CellField {
    let grid = *field.grid();
    let area = grid.cell_area();
    let mut out = CellField::zeros(grid);
    for i in 0..grid.nt {
        for j in 0..grid.nx {
            let d = field.get(i + 1, j + 1) - field.get(i + 1, j) - field.get(i, j + 1)
                + field.get(i, j);
            out.set(i, j, d / area);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::unit(n).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(0.0, 1.0, 4, 4).is_err());
        assert!(Grid::new(1.0, 1.0, 0, 4).is_err());
        assert!(Grid::new(1.0, f64::NAN, 4, 4).is_err());
    }

    #[test]
    fn unit_integrand_gives_area() {
        let g = unit(8);
        let one = CellField::constant(g, 1.0);
        assert!((integrate_rect(&one, g.terminal()).unwrap() - 1.0).abs() < 1e-14);
        let cum = cumulative_integral(&one);
        for i in 0..=8 {
            for j in 0..=8 {
                assert!((cum.get(i, j) - g.t(i) * g.x(j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_rectangle_is_zero() {
        let g = unit(5);
        let f = CellField::from_fn(g, |t, x| 3.0 + t - x);
        for i in 0..=5 {
            assert_eq!(integrate_rect(&f, Node::new(i, 0)).unwrap(), 0.0);
            assert_eq!(integrate_rect(&f, Node::new(0, i)).unwrap(), 0.0);
        }
    }

    #[test]
    fn product_integrand_converges() {
        let g = unit(64);
        let f = CellField::from_fn(g, |t, x| t * x);
        let v = integrate_rect(&f, g.terminal()).unwrap();
        assert!((v - 0.25).abs() < 0.02, "{v}");
    }

    #[test]
    fn node_outside_grid_is_domain_error() {
        let g = unit(4);
        let f = CellField::zeros(g);
        assert!(matches!(integrate_rect(&f, Node::new(5, 0)), Err(Error::Domain(_))));
    }

    #[test]
    fn cumulative_matches_direct_sum_exactly() {
        let g = Grid::new(2.0, 3.0, 9, 7).unwrap();
        let f = CellField::from_fn(g, |t, x| (3.0 * t).sin() + x * x - 0.3);
        let cum = cumulative_integral(&f);
        let picks = [(0, 0), (9, 7), (3, 5), (9, 1), (1, 7), (4, 4), (6, 2), (8, 6), (2, 3), (5, 7)];
        for (i, j) in picks {
            let z = Node::new(i, j);
            assert_eq!(cum.at(z), integrate_rect(&f, z).unwrap());
        }
    }

    #[test]
    fn mixed_difference_of_constant_and_bilinear() {
        let g = unit(6);
        assert_eq!(mixed_difference(&Field::constant(g, 4.2)).sup_norm(), 0.0);
        let tx = Field::from_fn(g, |t, x| t * x);
        let d = mixed_difference(&tx);
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn csv_roundtrip_keeps_17_digits() {
        let g = Grid::new(1.0, 2.0, 3, 2).unwrap();
        let f = Field::from_fn(g, |t, x| (t + 1.0).ln() / 3.0 + x);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,value\n"));
        assert_eq!(text.lines().count(), 1 + g.node_count());
        let back = Field::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back, f);

        let c = CellField::from_fn(g, |t, x| t - x / 7.0);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(CellField::read_csv(g, buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn csv_missing_rows_rejected() {
        let g = unit(2);
        let text = "t,x,value\n0,0,1\n";
        assert!(Field::read_csv(g, text.as_bytes()).is_err());
    }
}
