//! Model coefficients `F, C, G, D`, the initial law of `Y0`, and the two
//! worked presets (noisy observation of a constant, noisy observation of a
//! Brownian sheet).
//!
//! Signal:      `dY = F Y dz + C B1(dz)`, `Y = Y0` on both axes.
//! Observation: `dU = G Y dz + D B2(dz)`, `U = u0` on both axes.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{CellField, Grid};

/// Polynomial with ascending coefficients, `c[0] + c[1] s + c[2] s^2 + ...`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// Exact `int_a^b p(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    fn antiderivative(&self, s: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * s + c / (k + 1) as f64)
            * s
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

/// One coefficient surface.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `f(t) g(x)` with polynomial factors.
    Product { f: Poly, g: Poly },
    /// Tabulated per cell; a point takes the value of its cell's lower-left corner.
    Table(CellField),
}

impl Coefficient {
    pub fn product(f: &[f64], g: &[f64]) -> Self {
        Coefficient::Product { f: Poly(f.to_vec()), g: Poly(g.to_vec()) }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Product { f, g } => f.eval(t) * g.eval(x),
            Coefficient::Table(cells) => {
                let z = cells.grid().cell_at(t, x);
                cells.get(z.i, z.j)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Constant(c) => *c == 0.0,
            Coefficient::Product { f, g } => f.is_zero() || g.is_zero(),
            Coefficient::Table(cells) => cells.values().iter().all(|&v| v == 0.0),
        }
    }

    /// Axis factors when the surface is of product form (constants included).
    pub fn product_factors(&self) -> Option<(Poly, Poly)> {
        match self {
            Coefficient::Constant(c) => Some((Poly::constant(*c), Poly::constant(1.0))),
            Coefficient::Product { f, g } => Some((f.clone(), g.clone())),
            Coefficient::Table(_) => None,
        }
    }

    /// Values at every cell's lower-left corner.
    pub fn on_cells(&self, grid: Grid) -> CellField {
        CellField::from_fn(grid, |t, x| self.eval(t, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientId {
    F,
    C,
    G,
    D,
}

impl fmt::Display for CoefficientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoefficientId::F => "F",
            CoefficientId::C => "C",
            CoefficientId::G => "G",
            CoefficientId::D => "D",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `dY = 0`, `Y = theta`; `dU = theta dz + B2(dz)`.
    #[serde(alias = "constant")]
    ConstantSignal,
    /// `dY = B1(dz)`, `Y = 0` on the axes; `dU = Y dz + B2(dz)`.
    #[serde(alias = "sheet")]
    SheetSignal,
    Custom,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" | "constant-signal" => Ok(Preset::ConstantSignal),
            "sheet" | "sheet-signal" => Ok(Preset::SheetSignal),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::Validation(format!(
                "unknown preset {other:?} (expected constant, sheet or custom)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::ConstantSignal => "constant-signal",
            Preset::SheetSignal => "sheet-signal",
            Preset::Custom => "custom",
        }
    }
}

/// Coefficients plus the Gaussian initial law `Y0 ~ N(mu0, sigma0_sq)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub preset: Preset,
    pub f: Coefficient,
    pub c: Coefficient,
    pub g: Coefficient,
    pub d: Coefficient,
    /// Lower bound required of `|D|`.
    pub d_min: f64,
    pub mu0: f64,
    pub sigma0_sq: f64,
    /// Observation boundary value. Cancels in every increment.
    pub u0: f64,
    /// Optional sup-norm bound checked by [`Scenario::validate`].
    pub bound: Option<f64>,
}

impl Scenario {
    pub fn new(
        f: Coefficient,
        c: Coefficient,
        g: Coefficient,
        d: Coefficient,
        d_min: f64,
        mu0: f64,
        sigma0_sq: f64,
    ) -> Result<Self> {
        if !(d_min.is_finite() && d_min > 0.0) {
            return Err(Error::Validation(format!("d_min must be positive, got {d_min}")));
        }
        if !(sigma0_sq.is_finite() && sigma0_sq >= 0.0) {
            return Err(Error::Validation(format!(
                "initial variance must be nonnegative, got {sigma0_sq}"
            )));
        }
        if !mu0.is_finite() {
            return Err(Error::Validation(format!("initial mean must be finite, got {mu0}")));
        }
        Ok(Scenario {
            preset: Preset::Custom,
            f,
            c,
            g,
            d,
            d_min,
            mu0,
            sigma0_sq,
            u0: 0.0,
            bound: None,
        })
    }

    /// Noisy observation of a Gaussian constant `theta ~ N(mu0, sigma0_sq)`.
    pub fn constant_signal(mu0: f64, sigma0_sq: f64) -> Result<Self> {
        let one = Coefficient::Constant(1.0);
        let zero = Coefficient::Constant(0.0);
        let mut s = Scenario::new(zero.clone(), zero, one.clone(), one, 1.0, mu0, sigma0_sq)?;
        s.preset = Preset::ConstantSignal;
        Ok(s)
    }

    /// Noisy observation of a Brownian sheet.
    pub fn sheet_signal() -> Self {
        let one = Coefficient::Constant(1.0);
        Scenario {
            preset: Preset::SheetSignal,
            f: Coefficient::Constant(0.0),
            c: one.clone(),
            g: one.clone(),
            d: one,
            d_min: 1.0,
            mu0: 0.0,
            sigma0_sq: 0.0,
            u0: 0.0,
            bound: None,
        }
    }

    pub fn preset(preset: Preset) -> Result<Self> {
        match preset {
            Preset::ConstantSignal => Scenario::constant_signal(0.0, 1.0),
            Preset::SheetSignal => Ok(Scenario::sheet_signal()),
            Preset::Custom => Err(Error::Validation(
                "the custom preset needs coefficients from a config file".into(),
            )),
        }
    }

    pub fn coefficient(&self, which: CoefficientId) -> &Coefficient {
        match which {
            CoefficientId::F => &self.f,
            CoefficientId::C => &self.c,
            CoefficientId::G => &self.g,
            CoefficientId::D => &self.d,
        }
    }

    pub fn evaluate(&self, which: CoefficientId, t: f64, x: f64) -> f64 {
        self.coefficient(which).eval(t, x)
    }

    /// Checks finiteness, the optional sup bound and `|D| >= d_min` at every node.
    pub fn validate(&self, grid: &Grid) -> ValidationReport {
        let mut violations = Vec::new();
        let mut sup = [0.0f64; 4];
        let ids = [CoefficientId::F, CoefficientId::C, CoefficientId::G, CoefficientId::D];
        for i in 0..=grid.nt() {
            for j in 0..=grid.nx() {
                let (t, x) = (grid.t(i), grid.x(j));
                for (k, id) in ids.iter().enumerate() {
                    let v = self.evaluate(*id, t, x);
                    if !v.is_finite() {
                        violations.push(format!("{id} is not finite at ({t}, {x})"));
                        continue;
                    }
                    sup[k] = sup[k].max(v.abs());
                    if *id == CoefficientId::D && v.abs() < self.d_min {
                        violations.push(format!(
                            "|D({t}, {x})| = {} is below d_min = {}",
                            v.abs(),
                            self.d_min
                        ));
                    }
                }
            }
        }
        if let Some(b) = self.bound {
            for (k, id) in ids.iter().enumerate() {
                if sup[k] > b {
                    violations.push(format!("sup |{id}| = {} exceeds bound {b}", sup[k]));
                }
            }
        }
        ValidationReport { violations, sup }
    }

    pub fn ensure_valid(&self, grid: &Grid) -> Result<()> {
        let report = self.validate(grid);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(report.violations.join("; ")))
        }
    }

    /// Coefficients sampled at cell corners.
    pub fn discretize(&self, grid: Grid) -> Coefficients {
        Coefficients {
            f: self.f.on_cells(grid),
            c: self.c.on_cells(grid),
            g: self.g.on_cells(grid),
            d: self.d.on_cells(grid),
            f_is_zero: self.f.is_zero(),
        }
    }

    /// Reads a scenario and its grid from a TOML file.
    pub fn from_toml_file(path: &Path) -> Result<(Scenario, Option<Grid>)> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        cfg.build(path.parent())
    }
}

/// Outcome of [`Scenario::validate`]; empty `violations` means valid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Sup norms of F, C, G, D over the nodes.
    pub sup: [f64; 4],
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-cell coefficient values on a fixed grid.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub f: CellField,
    pub c: CellField,
    pub g: CellField,
    pub d: CellField,
    pub f_is_zero: bool,
}

/// Coefficient as written in a config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CoefficientConfig {
    Value(f64),
    Constant { constant: f64 },
    Product { product: ProductConfig },
    Table { table: String },
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProductConfig {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct GridConfig {
    #[serde(rename = "T", default = "one")]
    pub t: f64,
    #[serde(rename = "X", default = "one")]
    pub x: f64,
    pub nt: usize,
    pub nx: usize,
}

fn one() -> f64 {
    1.0
}

/// Scenario keys of the configuration file. Unknown keys are left for the
/// caller (run options share the file).
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ScenarioConfig {
    pub preset: Option<String>,
    #[serde(rename = "F")]
    pub f: Option<CoefficientConfig>,
    #[serde(rename = "C")]
    pub c: Option<CoefficientConfig>,
    #[serde(rename = "G")]
    pub g: Option<CoefficientConfig>,
    #[serde(rename = "D")]
    pub d: Option<CoefficientConfig>,
    pub d_min: Option<f64>,
    pub mu0: Option<f64>,
    pub sigma0_sq: Option<f64>,
    pub u0: Option<f64>,
    pub bound: Option<f64>,
    pub grid: Option<GridConfig>,
}

impl ScenarioConfig {
    /// Builds the scenario; table paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<(Scenario, Option<Grid>)> {
        let grid = self.grid.map(|g| Grid::new(g.t, g.x, g.nt, g.nx)).transpose()?;
        let preset = match &self.preset {
            Some(p) => Preset::parse(p)?,
            None => Preset::Custom,
        };
        let coefficient = |cfg: &Option<CoefficientConfig>, name: &str| -> Result<Option<Coefficient>> {
            let Some(cfg) = cfg else { return Ok(None) };
            Ok(Some(match cfg {
                CoefficientConfig::Value(v) | CoefficientConfig::Constant { constant: v } => {
                    Coefficient::Constant(*v)
                }
                CoefficientConfig::Product { product } => {
                    Coefficient::product(&product.f, &product.g)
                }
                CoefficientConfig::Table { table } => {
                    let grid = grid.ok_or_else(|| {
                        Error::Validation(format!("{name} is tabulated but no [grid] is given"))
                    })?;
                    let path = base.map(|b| b.join(table)).unwrap_or_else(|| table.into());
                    let file = std::fs::File::open(&path).map_err(|e| {
                        Error::Validation(format!("cannot open {}: {e}", path.display()))
                    })?;
                    Coefficient::Table(CellField::read_csv(grid, file)?)
                }
            }))
        };
        let f = coefficient(&self.f, "F")?;
        let c = coefficient(&self.c, "C")?;
        let g = coefficient(&self.g, "G")?;
        let d = coefficient(&self.d, "D")?;

        let mut scenario = match preset {
            Preset::Custom => {
                let missing: Vec<&str> = [("F", &f), ("C", &c), ("G", &g), ("D", &d)]
                    .iter()
                    .filter(|(_, v)| v.is_none())
                    .map(|(n, _)| *n)
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::Validation(format!(
                        "custom scenario is missing {}",
                        missing.join(", ")
                    )));
                }
                let d_min = self
                    .d_min
                    .ok_or_else(|| Error::Validation("custom scenario needs d_min".into()))?;
                Scenario::new(
                    f.unwrap(),
                    c.unwrap(),
                    g.unwrap(),
                    d.unwrap(),
                    d_min,
                    self.mu0.unwrap_or(0.0),
                    self.sigma0_sq.unwrap_or(0.0),
                )?
            }
            Preset::ConstantSignal | Preset::SheetSignal => {
                if f.is_some() || c.is_some() || g.is_some() || d.is_some() {
                    return Err(Error::Validation(
                        "presets fix F, C, G and D; use preset = \"custom\" to set them".into(),
                    ));
                }
                let mut s = Scenario::preset(preset)?;
                if preset == Preset::ConstantSignal {
                    s = Scenario::constant_signal(
                        self.mu0.unwrap_or(s.mu0),
                        self.sigma0_sq.unwrap_or(s.sigma0_sq),
                    )?;
                } else if self.mu0.is_some_and(|v| v != 0.0)
                    || self.sigma0_sq.is_some_and(|v| v != 0.0)
                {
                    return Err(Error::Validation(
                        "the sheet-signal preset starts from Y0 = 0".into(),
                    ));
                }
                if let Some(d_min) = self.d_min {
                    if d_min.is_nan() || d_min <= 0.0 {
                        return Err(Error::Validation(format!("d_min must be positive, got {d_min}")));
                    }
                    s.d_min = d_min;
                }
                s
            }
        };
        scenario.u0 = self.u0.unwrap_or(0.0);
        scenario.bound = self.bound;
        Ok((scenario, grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_their_definitions() {
        let c = Scenario::preset(Preset::ConstantSignal).unwrap();
        assert!(c.f.is_zero() && c.c.is_zero());
        assert_eq!(c.evaluate(CoefficientId::G, 0.3, 0.9), 1.0);
        assert_eq!(c.evaluate(CoefficientId::D, 0.7, 0.1), 1.0);

        let s = Scenario::sheet_signal();
        assert!(s.f.is_zero());
        assert_eq!(s.evaluate(CoefficientId::C, 0.25, 0.5), 1.0);
        assert_eq!(s.evaluate(CoefficientId::G, 0.25, 0.5), 1.0);
        assert_eq!(s.evaluate(CoefficientId::D, 0.25, 0.5), 1.0);
        assert_eq!((s.mu0, s.sigma0_sq), (0.0, 0.0));
    }

    #[test]
    fn product_form_evaluation() {
        let f = Coefficient::product(&[0.0, 1.0], &[1.0]);
        assert_eq!(f.eval(0.5, 0.123), 0.5);
        assert_eq!(f.eval(0.5, 7.0), 0.5);
        let p = Poly(vec![1.0, -2.0, 3.0]);
        assert!((p.integral(0.5, 2.0) - (2.0 - 4.0 + 8.0 - (0.5 - 0.25 + 0.125))).abs() < 1e-14);
    }

    #[test]
    fn table_evaluates_at_lower_left_corner() {
        let g = Grid::unit(4).unwrap();
        let cells = CellField::from_fn(g, |t, x| 10.0 * t + x);
        let coef = Coefficient::Table(cells);
        assert_eq!(coef.eval(0.3, 0.6), 10.0 * 0.25 + 0.5);
        assert_eq!(coef.eval(1.0, 1.0), 10.0 * 0.75 + 0.75);
    }

    #[test]
    fn validation_reports() {
        let g = Grid::unit(8).unwrap();
        let mut ok = Scenario::constant_signal(0.0, 1.0).unwrap();
        ok.d_min = 0.5;
        assert!(ok.validate(&g).is_valid());

        let bad = Scenario::new(
            Coefficient::Constant(0.0),
            Coefficient::Constant(1.0),
            Coefficient::Constant(1.0),
            Coefficient::product(&[0.0, 1.0], &[1.0]),
            1e-6,
            0.0,
            0.0,
        )
        .unwrap();
        let report = bad.validate(&g);
        assert!(!report.is_valid());
        assert!(report.violations[0].contains("d_min"));
        assert!(bad.ensure_valid(&g).is_err());

        let mut bounded = Scenario::new(
            Coefficient::product(&[0.0, 1.0], &[0.0, 1.0]),
            Coefficient::Constant(0.0),
            Coefficient::Constant(1.0),
            Coefficient::Constant(1.0),
            1.0,
            0.0,
            0.0,
        )
        .unwrap();
        bounded.bound = Some(1.0);
        assert!(bounded.validate(&g).is_valid());
        bounded.bound = Some(0.9);
        assert!(!bounded.validate(&g).is_valid());
    }

    #[test]
    fn constructor_rejects_bad_initial_law() {
        let z = Coefficient::Constant(0.0);
        assert!(Scenario::new(z.clone(), z.clone(), z.clone(), z.clone(), 0.0, 0.0, 0.0).is_err());
        assert!(Scenario::new(z.clone(), z.clone(), z.clone(), z, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::unit(2).unwrap();
        let table = CellField::from_values(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        table.write_csv(std::fs::File::create(dir.path().join("c.csv")).unwrap()).unwrap();
        let cfg = r#"
            preset = "custom"
            F = { product = { f = [0.0, 1.0], g = [2.0] } }
            C = { table = "c.csv" }
            G = 1.0
            D = { constant = 2.0 }
            d_min = 1.5
            mu0 = 0.25
            sigma0_sq = 0.5
            [grid]
            T = 1.0
            X = 1.0
            nt = 2
            nx = 2
        "#;
        let path = dir.path().join("s.toml");
        std::fs::write(&path, cfg).unwrap();
        let (s, grid) = Scenario::from_toml_file(&path).unwrap();
        assert_eq!(grid, Some(g));
        assert_eq!(s.evaluate(CoefficientId::F, 0.5, 0.1), 1.0);
        assert_eq!(s.evaluate(CoefficientId::C, 0.6, 0.1), 3.0);
        assert_eq!(s.evaluate(CoefficientId::D, 0.6, 0.1), 2.0);
        assert_eq!((s.mu0, s.sigma0_sq, s.d_min), (0.25, 0.5, 1.5));
    }

    #[test]
    fn config_preset_overrides() {
        let cfg: ScenarioConfig = toml::from_str("preset = \"constant\"\nsigma0_sq = 2.0").unwrap();
        let (s, grid) = cfg.build(None).unwrap();
        assert_eq!(s.preset, Preset::ConstantSignal);
        assert_eq!(s.sigma0_sq, 2.0);
        assert!(grid.is_none());

        let cfg: ScenarioConfig = toml::from_str("preset = \"sheet\"\nF = 1.0").unwrap();
        assert!(cfg.build(None).is_err());
        let cfg: ScenarioConfig = toml::from_str("preset = \"custom\"\nF = 1.0").unwrap();
        assert!(cfg.build(None).is_err());
    }
}
