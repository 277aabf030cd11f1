//! Uniform cell grid on `(0, L)` and space-time fields sampled on it.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParams(format!("length {length} must be positive")));
        }
        if cells < MIN_CELLS {
            return Err(Error::InvalidParams(format!("need at least {MIN_CELLS} cells, got {cells}")));
        }
        Ok(Self { length, cells })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    /// Left edge of cell `j`; `face(cells) = L`.
    #[inline]
    pub fn face(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.cells).map(|i| f(self.center(i))).collect()
    }

    /// `2N` grid with the same length.
    pub fn refined(&self) -> Self {
        Self { length: self.length, cells: 2 * self.cells }
    }
}

/// Cell values at a strictly increasing list of times. Level `n >= 1`
/// represents the interval `(t_{n-1}, t_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid, t0: f64, u0: Vec<f64>) -> Result<Self> {
        if u0.len() != grid.cells {
            return Err(Error::GridMismatch(format!("{} values for {} cells", u0.len(), grid.cells)));
        }
        Ok(Self { grid, times: vec![t0], values: vec![u0] })
    }

    pub fn push(&mut self, t: f64, u: Vec<f64>) {
        debug_assert!(t > *self.times.last().unwrap());
        debug_assert_eq!(u.len(), self.grid.cells);
        self.times.push(t);
        self.values.push(u);
    }

    pub fn levels(&self) -> usize {
        self.times.len()
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn mass(&self, n: usize) -> f64 {
        self.grid.h() * self.values[n].iter().sum::<f64>()
    }

    /// Keep levels `0..=n`.
    pub fn truncated(&self, n: usize) -> Self {
        Self { grid: self.grid, times: self.times[..=n].to_vec(), values: self.values[..=n].to_vec() }
    }

    /// Append `other`, whose first level must coincide with this field's last.
    pub fn append(&mut self, other: &SpaceTimeField) -> Result<()> {
        if other.grid != self.grid {
            return Err(Error::GridMismatch("cannot glue fields on different grids".into()));
        }
        if (other.times[0] - self.t_end()).abs() > 1e-12 * self.t_end().abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "glue time {} does not match end {}",
                other.times[0],
                self.t_end()
            )));
        }
        for n in 1..other.levels() {
            self.push(other.times[n], other.values[n].clone());
        }
        Ok(())
    }

    /// Rows `t,x,u`; `every` thins the time levels (the last level is always kept).
    pub fn write_csv<W: Write>(&self, mut w: W, every: usize) -> Result<()> {
        writeln!(w, "t,x,u")?;
        let every = every.max(1);
        let last = self.levels() - 1;
        for n in (0..self.levels()).filter(|&n| n % every == 0 || n == last) {
            for (i, u) in self.values[n].iter().enumerate() {
                writeln!(w, "{:e},{:e},{:e}", self.times[n], self.grid.center(i), u)?;
            }
        }
        Ok(())
    }

    /// Inverse of [`write_csv`]; rows must be grouped by time with cells in order.
    pub fn read_csv<R: BufRead>(r: R, length: f64) -> Result<Self> {
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("line {}: {e}", k + 1)))?;
            if cols.len() != 3 {
                return Err(Error::Config(format!("line {}: expected t,x,u", k + 1)));
            }
            if times.last() != Some(&cols[0]) {
                times.push(cols[0]);
                values.push(Vec::new());
            }
            values.last_mut().unwrap().push(cols[2]);
        }
        let cells = values.first().map(|v| v.len()).unwrap_or(0);
        if values.iter().any(|v| v.len() != cells) {
            return Err(Error::GridMismatch("ragged time levels".into()));
        }
        Ok(Self { grid: Grid::new(length, cells)?, times, values })
    }
}
