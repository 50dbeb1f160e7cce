//! Built-in problems with closed-form solutions.

use thiserror::Error;

use crate::gridfn::{GridError, GridFunction};
use crate::problem::{IvpProblem, ProblemError};

pub const NAMES: [&str; 6] = [
    "peano_cubed",
    "peano_family",
    "blowup_tan",
    "linear_unit",
    "uncoupled_system",
    "oscillating_system",
];

const PEANO_RHS: &str = "3*cbrt(y1)^2";

/// `phi'(cbrt(y1))` for `phi(x) = x^3 sin(1/x)`, with `1/x` regularized as
/// `x / (x^2 + 1e-12)` so the expression stays finite at `y1 = 0`.
const OSCILLATING_RHS: &str = "3*cbrt(y1)^2*sin(cbrt(y1)/(cbrt(y1)^2+1e-12)) \
                               - cbrt(y1)*cos(cbrt(y1)/(cbrt(y1)^2+1e-12))";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown corpus problem '{name}'; available: {}", NAMES.join(", "))]
    Unknown { name: String },

    #[error("oracle '{oracle}' parameter {value} outside [{lo}, {hi}]")]
    Parameter {
        oracle: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("oracle '{0}' takes no parameter")]
    NoParameter(&'static str),

    #[error("oracle '{0}' needs a parameter")]
    MissingParameter(&'static str),

    #[error(transparent)]
    Problem(#[from] ProblemError),

    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Uniform grid `t_start + j * length / m`, `j = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t_start: f64,
    pub length: f64,
    pub m: usize,
}

impl GridSpec {
    /// `m` steps over the effective interval `[t0, t0 + c]`.
    pub fn effective(problem: &IvpProblem, m: usize) -> Result<Self, ProblemError> {
        let domain = problem.effective_interval()?;
        Ok(GridSpec {
            t_start: problem.t0(),
            length: domain.c,
            m,
        })
    }
}

type OracleFn = fn(param: f64, t: f64) -> Vec<f64>;

/// A closed-form solution, or a one-parameter family of them.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub name: &'static str,
    /// Admissible parameter range for families.
    pub parameter: Option<(f64, f64)>,
    eval: OracleFn,
}

impl Oracle {
    pub fn value(&self, param: Option<f64>, t: f64) -> Result<Vec<f64>, CorpusError> {
        let p = self.check(param)?;
        Ok((self.eval)(p, t))
    }

    pub fn sample(&self, param: Option<f64>, grid: GridSpec) -> Result<GridFunction, CorpusError> {
        let p = self.check(param)?;
        let dim = (self.eval)(p, grid.t_start).len();
        Ok(GridFunction::sample(grid.t_start, grid.length, grid.m, dim, |t| {
            (self.eval)(p, t)
        })?)
    }

    fn check(&self, param: Option<f64>) -> Result<f64, CorpusError> {
        match (self.parameter, param) {
            (None, None) => Ok(0.0),
            (None, Some(_)) => Err(CorpusError::NoParameter(self.name)),
            (Some(_), None) => Err(CorpusError::MissingParameter(self.name)),
            (Some((lo, hi)), Some(v)) => {
                if v >= lo && v <= hi {
                    Ok(v)
                } else {
                    Err(CorpusError::Parameter {
                        oracle: self.name,
                        value: v,
                        lo,
                        hi,
                    })
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub problem: IvpProblem,
    pub oracles: Vec<Oracle>,
    pub notes: &'static str,
}

impl CorpusEntry {
    pub fn oracle(&self, name: &str) -> Option<&Oracle> {
        self.oracles.iter().find(|o| o.name == name)
    }
}

fn delayed_cube(t2: f64, t: f64) -> f64 {
    (t - t2).max(0.0).powi(3)
}

fn peano_problem(label: &str) -> IvpProblem {
    IvpProblem::from_sources(label, 0.0, vec![0.0], 1.0, 1.0, Some(3.0), &[PEANO_RHS])
        .expect("corpus problem is valid")
}

pub fn get(name: &str) -> Result<CorpusEntry, CorpusError> {
    let third = 1.0 / 3.0;
    let entry = match name {
        "peano_cubed" => CorpusEntry {
            name: "peano_cubed",
            problem: peano_problem(name),
            oracles: vec![
                Oracle {
                    name: "zero",
                    parameter: None,
                    eval: |_, _| vec![0.0],
                },
                Oracle {
                    name: "cube",
                    parameter: None,
                    eval: |_, t| vec![t.max(0.0).powi(3)],
                },
            ],
            notes: "y' = 3 y^(2/3), y(0) = 0; least solution 0, greatest t^3 for t >= 0",
        },
        "peano_family" => CorpusEntry {
            name: "peano_family",
            problem: peano_problem(name),
            oracles: vec![Oracle {
                name: "family",
                parameter: Some((0.0, third)),
                eval: |t2, t| vec![delayed_cube(t2, t)],
            }],
            notes: "solutions 0 on [0, t2] and (t - t2)^3 afterwards, for every t2 in [0, c]",
        },
        "blowup_tan" => CorpusEntry {
            name: "blowup_tan",
            problem: IvpProblem::from_sources(
                name,
                0.0,
                vec![0.0],
                std::f64::consts::PI,
                1.0,
                Some(2.0),
                &["1+y1^2"],
            )?,
            oracles: vec![Oracle {
                name: "tan",
                parameter: None,
                eval: |_, t| vec![t.tan()],
            }],
            notes: "y' = 1 + y^2, y(0) = 0; solution tan t blows up at pi/2, so no solution \
                    exists on [0, pi] although 0 is a lower solution there",
        },
        "linear_unit" => CorpusEntry {
            name: "linear_unit",
            problem: IvpProblem::from_sources(name, 0.0, vec![0.0], 1.0, f64::INFINITY, Some(1.0), &["1"])?,
            oracles: vec![Oracle {
                name: "line",
                parameter: None,
                eval: |_, t| vec![t],
            }],
            notes: "y' = 1, y(0) = 0; unique solution t",
        },
        "uncoupled_system" => CorpusEntry {
            name: "uncoupled_system",
            problem: IvpProblem::from_sources(
                name,
                0.0,
                vec![0.0, 0.0],
                1.0,
                1.0,
                Some(3.0),
                &[PEANO_RHS, "-y1"],
            )?,
            oracles: vec![Oracle {
                name: "family",
                parameter: Some((0.0, third)),
                eval: |a, t| vec![delayed_cube(a, t), -(t - a).max(0.0).powi(4) / 4.0],
            }],
            notes: "y1' = 3 y1^(2/3), y2' = -y1; a larger first component gives a smaller \
                    second one, so no solution is greatest in both components",
        },
        "oscillating_system" => CorpusEntry {
            name: "oscillating_system",
            problem: IvpProblem::from_sources(
                name,
                0.0,
                vec![0.0, 0.0],
                1.0,
                1.0,
                Some(4.0),
                &[PEANO_RHS, OSCILLATING_RHS],
            )?,
            oracles: Vec::new(),
            notes: "y1' = 3 y1^(2/3), y2' = phi'(y1^(1/3)) with phi(x) = x^3 sin(1/x); second \
                    components of distinct solutions cross, so none is greatest. Regularized \
                    near y1 = 0; demonstration only, no oracle",
        },
        _ => return Err(CorpusError::Unknown { name: name.to_string() }),
    };
    Ok(entry)
}

/// `0` on `[0, t2]`, `(t - t2)^3` afterwards, on the given grid.
pub fn peano_family(t2: f64, grid: GridSpec) -> Result<GridFunction, CorpusError> {
    let entry = get("peano_family")?;
    entry.oracles[0].sample(Some(t2), grid)
}

/// The two-component solution switching on at `a_switch`.
pub fn uncoupled_family(a_switch: f64, grid: GridSpec) -> Result<GridFunction, CorpusError> {
    let entry = get("uncoupled_system")?;
    entry.oracles[0].sample(Some(a_switch), grid)
}
