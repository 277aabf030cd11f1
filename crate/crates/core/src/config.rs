//! TOML run configuration with sections `model`, `grid`, `solver`, `laminate`
//! and `epochs`. Every key has a default except `model.alpha`, `model.beta`
//! and `model.initial`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::solver::{DtPolicy, SolverOptions, Stepping};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    Constant {
        value: f64,
    },
    /// `mean + amplitude cos(mode pi x / L)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        mode: usize,
    },
    /// `base + amplitude cos^(2 power)(pi (x/L - center))`, a bump of height
    /// `amplitude` at `center`.
    Bump {
        base: f64,
        amplitude: f64,
        #[serde(default = "eight")]
        power: i32,
        #[serde(default = "half")]
        center: f64,
    },
    /// Cell values; length must equal `grid.cells`.
    Samples {
        values: Vec<f64>,
    },
}

fn one() -> usize {
    1
}
fn eight() -> i32 {
    8
}
fn half() -> f64 {
    0.5
}

impl InitialDatum {
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let l = grid.length;
        Ok(match self {
            InitialDatum::Constant { value } => vec![*value; grid.cells],
            InitialDatum::Cosine { mean, amplitude, mode } => {
                grid.sample(|x| mean + amplitude * (*mode as f64 * PI * x / l).cos())
            }
            InitialDatum::Bump { base, amplitude, power, center } => {
                grid.sample(|x| base + amplitude * (PI * (x / l - center)).cos().powi(2 * power))
            }
            InitialDatum::Samples { values } => {
                if values.len() != grid.cells {
                    return Err(Error::Config(format!("{} samples for {} cells", values.len(), grid.cells)));
                }
                values.clone()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "unit")]
    pub length: f64,
    pub initial: InitialDatum,
    /// Force a case label instead of dispatching on the datum.
    #[serde(default)]
    pub case: Option<String>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn default_cells() -> usize {
    200
}

impl Default for GridSection {
    fn default() -> Self {
        Self { cells: default_cells() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_stepping")]
    pub stepping: Stepping,
    /// Constant step; overrides the geometric schedule when set.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_dt0")]
    pub dt0: f64,
    #[serde(default = "default_growth")]
    pub growth: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    /// Final time of classical runs; defaults depend on the case.
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Give-up time for threshold searches; default `50 L^2 / theta0`.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
}

fn default_stepping() -> Stepping {
    Stepping::Implicit
}
fn default_dt0() -> f64 {
    1e-5
}
fn default_growth() -> f64 {
    1.05
}
fn default_dt_max() -> f64 {
    0.05
}
fn default_newton_tol() -> f64 {
    1e-14
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            stepping: default_stepping(),
            dt: None,
            dt0: default_dt0(),
            growth: default_growth(),
            dt_max: default_dt_max(),
            t_end: None,
            t_max: None,
            newton_tol: default_newton_tol(),
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        let policy = match self.dt {
            Some(dt) => DtPolicy::Fixed { dt },
            None => DtPolicy::Geometric { dt0: self.dt0, growth: self.growth, dt_max: self.dt_max },
        };
        SolverOptions { policy, stepping: self.stepping, newton_tol: self.newton_tol, max_newton: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminateSection {
    /// Flux window; defaults are placed inside the admissible range of the case.
    #[serde(default)]
    pub r1: Option<f64>,
    #[serde(default)]
    pub r2: Option<f64>,
    /// Strips per grid cell, `h / delta`.
    #[serde(default = "default_strips")]
    pub strips_per_cell: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Closeness target; default `5 delta d0`.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Sub-cells per strip in CSV output of laminates.
    #[serde(default = "default_csv_resolution")]
    pub csv_subcells_per_strip: usize,
}

fn default_strips() -> usize {
    4
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_csv_resolution() -> usize {
    1
}

impl Default for LaminateSection {
    fn default() -> Self {
        Self {
            r1: None,
            r2: None,
            strips_per_cell: default_strips(),
            seeds: default_seeds(),
            eps: None,
            csv_subcells_per_strip: default_csv_resolution(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochSection {
    /// Limit flux level; defaults to the middle of `(rho(s0+), r*)`.
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default = "default_epochs")]
    pub count: usize,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default = "unit")]
    pub length: f64,
}

fn default_epochs() -> usize {
    4
}

impl Default for EpochSection {
    fn default() -> Self {
        Self { r0: None, count: default_epochs(), c1: None, c2: None, length: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub laminate: LaminateSection,
    #[serde(default)]
    pub epochs: EpochSection,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.model.length, self.grid.cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let c = ScenarioConfig::from_toml(
            r#"
            [model]
            alpha = 0.9
            beta = 1.0
            initial = { kind = "cosine", mean = 0.6, amplitude = 0.2 }
            "#,
        )
        .unwrap();
        assert_eq!(c.grid.cells, 200);
        assert_eq!(c.laminate.seeds, vec![1, 2, 3]);
        assert_eq!(c.epochs.count, 4);
        let g = c.grid().unwrap();
        let u = c.model.initial.sample(&g).unwrap();
        assert!((u[0] - (0.6 + 0.2 * (PI * g.center(0)).cos())).abs() < 1e-15);
        let back = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_rejected() {
        let r = ScenarioConfig::from_toml(
            "[model]\nalpha = 0.9\nbeta = 1.0\ninitial = { kind = \"constant\", value = 0.2 }\n[grid]\ncell = 10\n",
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn bump_peak_and_samples_length() {
        let g = Grid::new(1.0, 101).unwrap();
        let b = InitialDatum::Bump { base: 0.03, amplitude: 0.42, power: 8, center: 0.5 };
        let u = b.sample(&g).unwrap();
        assert!((u[50] - 0.45).abs() < 1e-12);
        let s = InitialDatum::Samples { values: vec![0.1; 10] };
        assert!(s.sample(&g).is_err());
    }
}
