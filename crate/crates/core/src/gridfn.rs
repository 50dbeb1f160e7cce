//! Piecewise-linear vector-valued functions on a uniform grid.
//!
//! A [`GridFunction`] stores `m + 1` node values at `t_start + j h`,
//! `j = 0..=m`, and is the computational stand-in for the Lipschitz
//! functions that approximate solutions live in.

use std::io::{Read, Write};

use thiserror::Error;

use crate::problem::{IvpProblem, ProblemError};
use crate::{fmt_f64, max_norm};

/// Relative tolerance used when comparing grid geometry.
const GRID_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("t={t} is outside the grid domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("grid mismatch: {0}")]
    Mismatch(String),

    #[error("grid domain does not match the problem: {0}")]
    DomainMismatch(String),

    #[error(transparent)]
    Problem(#[from] ProblemError),

    #[error("trajectory csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("trajectory csv row {row}: {message}")]
    CsvContent { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    t_start: f64,
    step: f64,
    dim: usize,
    /// Node values, row-major: node `j` occupies `data[j*dim .. (j+1)*dim]`.
    data: Vec<f64>,
}

impl GridFunction {
    pub fn new(t_start: f64, step: f64, values: Vec<Vec<f64>>) -> Result<Self, GridError> {
        let dim = values.first().map_or(0, Vec::len);
        if values.iter().any(|v| v.len() != dim) {
            return Err(GridError::Invalid("node values have differing lengths".into()));
        }
        Self::from_flat(t_start, step, dim, values.concat())
    }

    pub fn from_flat(t_start: f64, step: f64, dim: usize, data: Vec<f64>) -> Result<Self, GridError> {
        if dim == 0 {
            return Err(GridError::Invalid("dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) || data.len() / dim < 2 {
            return Err(GridError::Invalid("need at least two nodes".into()));
        }
        if !(step > 0.0 && step.is_finite()) || !t_start.is_finite() {
            return Err(GridError::Invalid(format!("bad step {step} or start {t_start}")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { node: pos / dim });
        }
        Ok(GridFunction {
            t_start,
            step,
            dim,
            data,
        })
    }

    /// Samples `f` at the `m + 1` nodes of `[t_start, t_start + length]`.
    pub fn sample<F>(t_start: f64, length: f64, m: usize, dim: usize, mut f: F) -> Result<Self, GridError>
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        if m == 0 {
            return Err(GridError::Invalid("need at least one step".into()));
        }
        let step = length / m as f64;
        let mut data = Vec::with_capacity((m + 1) * dim);
        for j in 0..=m {
            let v = f(t_start + j as f64 * step);
            if v.len() != dim {
                return Err(GridError::Invalid(format!(
                    "sampler returned {} components, expected {dim}",
                    v.len()
                )));
            }
            data.extend(v);
        }
        Self::from_flat(t_start, step, dim, data)
    }

    pub fn constant(t_start: f64, length: f64, m: usize, value: &[f64]) -> Result<Self, GridError> {
        Self::sample(t_start, length, m, value.len(), |_| value.to_vec())
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps `m`; there are `m + 1` nodes.
    pub fn steps(&self) -> usize {
        self.data.len() / self.dim - 1
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn span(&self) -> f64 {
        self.steps() as f64 * self.step
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.step
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Values of component `i` (0-based) at every node.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.nodes().map(|v| v[i]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Linear interpolation. Times up to half a step outside the grid are
    /// clamped to the nearest endpoint; node times return stored values.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, GridError> {
        let m = self.steps();
        let lo = self.t_start - 0.5 * self.step;
        let hi = self.t_end() + 0.5 * self.step;
        if !(t >= lo && t <= hi) {
            return Err(GridError::OutOfDomain { t, lo, hi });
        }
        let s = ((t - self.t_start) / self.step).clamp(0.0, m as f64);
        let nearest = s.round();
        if (s - nearest).abs() <= 1e-9 {
            return Ok(self.node(nearest as usize).to_vec());
        }
        let j = (s.floor() as usize).min(m - 1);
        let lambda = s - j as f64;
        let (a, b) = (self.node(j), self.node(j + 1));
        Ok(a.iter().zip(b).map(|(x, y)| x + lambda * (y - x)).collect())
    }

    /// `max_j ||v_{j+1} - v_j|| / h`, the exact Lipschitz constant of the
    /// interpolant in the max norm.
    pub fn lipschitz_constant(&self) -> f64 {
        self.slopes().fold(0.0, f64::max)
    }

    /// `||slope||` of every cell.
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.data
            .chunks_exact(self.dim)
            .zip(self.data.chunks_exact(self.dim).skip(1))
            .map(move |(a, b)| {
                a.iter()
                    .zip(b)
                    .fold(0.0f64, |acc, (x, y)| acc.max((y - x).abs()))
                    / self.step
            })
    }

    /// Membership in the Lipschitz class: starts exactly at `y0` and has
    /// Lipschitz constant at most `L + slack` on `[t0, t0 + c]`.
    pub fn in_set_a(&self, problem: &IvpProblem, slack: f64) -> Result<bool, GridError> {
        let domain = problem.effective_interval()?;
        self.check_domain(problem, domain.t_end())?;
        Ok(self.node(0) == problem.y0() && self.lipschitz_constant() <= domain.bound.value + slack)
    }

    /// Errors unless the grid starts at `t0`, ends at `t_end` and has the
    /// problem's dimension.
    pub fn check_domain(&self, problem: &IvpProblem, t_end: f64) -> Result<(), GridError> {
        if self.dim != problem.dim() {
            return Err(GridError::DomainMismatch(format!(
                "dimension {} vs problem dimension {}",
                self.dim,
                problem.dim()
            )));
        }
        let scale = 1.0f64.max(t_end.abs());
        if (self.t_start - problem.t0()).abs() > GRID_RTOL * scale
            || (self.t_end() - t_end).abs() > GRID_RTOL * scale
        {
            return Err(GridError::DomainMismatch(format!(
                "grid covers [{}, {}], expected [{}, {}]",
                self.t_start,
                self.t_end(),
                problem.t0(),
                t_end
            )));
        }
        Ok(())
    }

    /// Exact integral of the interpolant over the grid, componentwise.
    pub fn integral(&self) -> Vec<f64> {
        let m = self.steps();
        (0..self.dim)
            .map(|i| {
                let interior: f64 = (1..m).map(|j| self.node(j)[i]).sum();
                self.step * (interior + 0.5 * (self.node(0)[i] + self.node(m)[i]))
            })
            .collect()
    }

    /// `max_j ||g1(t_j) - g2(t_j)||` on a shared grid.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64, GridError> {
        self.check_same_grid(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<(), GridError> {
        if self.dim != other.dim {
            return Err(GridError::Mismatch(format!("dimensions {} and {}", self.dim, other.dim)));
        }
        if self.steps() != other.steps() {
            return Err(GridError::Mismatch(format!(
                "{} and {} steps",
                self.steps(),
                other.steps()
            )));
        }
        let scale = 1.0f64.max(self.t_start.abs()).max(self.t_end().abs());
        if (self.t_start - other.t_start).abs() > GRID_RTOL * scale
            || (self.step - other.step).abs() > GRID_RTOL * self.step
        {
            return Err(GridError::Mismatch(format!(
                "start/step ({}, {}) vs ({}, {})",
                self.t_start, self.step, other.t_start, other.step
            )));
        }
        Ok(())
    }

    /// Nodewise combination `f(a, b)` of two functions on a shared grid.
    pub fn zip_with<F>(&self, other: &GridFunction, f: F) -> Result<GridFunction, GridError>
    where
        F: Fn(f64, f64) -> f64,
    {
        self.check_same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        GridFunction::from_flat(self.t_start, self.step, self.dim, data)
    }

    /// Resamples the interpolant onto `m` uniform steps over the same span.
    pub fn resample(&self, m: usize) -> Result<GridFunction, GridError> {
        let t_end = self.t_end();
        let last = self.node(self.steps()).to_vec();
        GridFunction::sample(self.t_start, self.span(), m, self.dim, |t| {
            if t >= t_end {
                last.clone()
            } else {
                self.eval(t).expect("resample stays inside the grid")
            }
        })
    }

    /// Header `t,y1,...,yn`, one row per node, shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GridError> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("y{i}")));
        out.write_record(&header)?;
        for j in 0..=self.steps() {
            let mut row = vec![fmt_f64(self.time(j))];
            row.extend(self.node(j).iter().map(|v| fmt_f64(*v)));
            out.write_record(&row)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Reads a trajectory written by [`GridFunction::write_csv`]. Times must
    /// be uniform; the step is recovered from the first and last rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, GridError> {
        let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = input.headers()?.clone();
        let dim = header.len().saturating_sub(1);
        let expected: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=dim).map(|i| format!("y{i}")))
            .collect();
        if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(GridError::CsvContent {
                row: 1,
                message: format!("header must be {}", expected.join(",")),
            });
        }
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (i, record) in input.records().enumerate() {
            let record = record?;
            let row = i + 2;
            let parse = |field: &str| {
                field.parse::<f64>().map_err(|_| GridError::CsvContent {
                    row,
                    message: format!("not a number: {field:?}"),
                })
            };
            times.push(parse(&record[0])?);
            for field in record.iter().skip(1) {
                data.push(parse(field)?);
            }
        }
        if times.len() < 2 {
            return Err(GridError::CsvContent {
                row: times.len() + 1,
                message: "need at least two rows".into(),
            });
        }
        let m = times.len() - 1;
        let t_start = times[0];
        let step = (times[m] - t_start) / m as f64;
        let scale = 1.0f64.max(times[m].abs()).max(t_start.abs());
        for (j, t) in times.iter().enumerate() {
            if (t - (t_start + j as f64 * step)).abs() > GRID_RTOL * scale {
                return Err(GridError::CsvContent {
                    row: j + 2,
                    message: format!("time {t} breaks the uniform grid"),
                });
            }
        }
        Self::from_flat(t_start, step, dim, data)
    }
}

/// `||a - b||` in the max norm.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_norm(&diff)
}
