//! The initial value problem `y' = f(t, y)`, `y(t0) = y0` on the box
//! `[t0, t0 + a] x { ||y - y0|| <= b }` (max norm), together with the bound
//! `L` on `||f||` and the effective interval `[t0, t0 + c]`, `c = min(a, b/L)`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::max_norm;
use crate::rhs_lang::{EvalError, Expr, Function, ParseError};

/// Safety factor applied to the sampled maximum of `||f||`.
pub const BOUND_SAFETY_FACTOR: f64 = 1.05;

/// Samples per axis used when a problem carries no bound of its own.
pub const DEFAULT_BOUND_SAMPLES: usize = 33;

const MAX_BOUND_SAMPLES: u64 = 20_000_000;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem: {0}")]
    Invalid(String),

    #[error("rhs component {component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },

    #[error("rhs evaluation failed at t={t}, y={y:?}: {source}")]
    Eval {
        t: f64,
        y: Vec<f64>,
        #[source]
        source: EvalError,
    },

    #[error("an infinite box radius requires an explicit bound L")]
    MissingBound,

    #[error("cannot sample a bound on an unbounded box; supply L")]
    UnboundedBox,

    #[error("problem file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where the bound `L` came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    /// True when `value` comes from sampling rather than from the problem.
    pub estimated: bool,
}

/// The effective domain `[t0, t0 + c] x [box_lo, box_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainBox {
    pub t0: f64,
    pub c: f64,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub bound: Bound,
}

impl DomainBox {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvpProblem {
    label: String,
    t0: f64,
    y0: Vec<f64>,
    horizon: f64,
    radius: f64,
    bound: Option<f64>,
    rhs: Vec<Expr>,
}

impl IvpProblem {
    /// `horizon` is `a`, `radius` is `b` (may be `f64::INFINITY`), `bound` is `L`.
    pub fn new(
        label: impl Into<String>,
        t0: f64,
        y0: Vec<f64>,
        horizon: f64,
        radius: f64,
        bound: Option<f64>,
        rhs: Vec<Expr>,
    ) -> Result<Self, ProblemError> {
        let n = y0.len();
        let invalid = |msg: String| Err(ProblemError::Invalid(msg));
        if n == 0 {
            return invalid("y0 must have at least one component".into());
        }
        if !t0.is_finite() || y0.iter().any(|v| !v.is_finite()) {
            return invalid("t0 and y0 must be finite".into());
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return invalid(format!("a must be positive and finite, got {horizon}"));
        }
        if !(radius > 0.0) {
            return invalid(format!("b must be positive, got {radius}"));
        }
        if let Some(l) = bound {
            if !(l > 0.0 && l.is_finite()) {
                return invalid(format!("L must be positive and finite, got {l}"));
            }
        }
        if radius.is_infinite() && bound.is_none() {
            return Err(ProblemError::MissingBound);
        }
        if rhs.len() != n {
            return invalid(format!("rhs has {} components but y0 has {n}", rhs.len()));
        }
        for (i, e) in rhs.iter().enumerate() {
            if e.max_state_index() > n {
                return invalid(format!(
                    "rhs component {} references y{} but n = {n}",
                    i + 1,
                    e.max_state_index()
                ));
            }
        }
        Ok(IvpProblem {
            label: label.into(),
            t0,
            y0,
            horizon,
            radius,
            bound,
            rhs,
        })
    }

    /// Same as [`IvpProblem::new`] with the right-hand side given as source text.
    pub fn from_sources(
        label: impl Into<String>,
        t0: f64,
        y0: Vec<f64>,
        horizon: f64,
        radius: f64,
        bound: Option<f64>,
        rhs: &[&str],
    ) -> Result<Self, ProblemError> {
        let exprs = rhs
            .iter()
            .enumerate()
            .map(|(i, src)| {
                Expr::parse(src).map_err(|source| ProblemError::Parse {
                    component: i + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(label, t0, y0, horizon, radius, bound, exprs)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    /// `a`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `b`, possibly infinite.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `L` as given by the problem, if any.
    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    /// Copy of the problem with a user-supplied `L`.
    pub fn with_bound(&self, bound: f64) -> Result<Self, ProblemError> {
        Self::new(
            self.label.clone(),
            self.t0,
            self.y0.clone(),
            self.horizon,
            self.radius,
            Some(bound),
            self.rhs.clone(),
        )
    }

    /// Writes `f(t, y)` into `out`.
    pub fn eval_rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (slot, e) in out.iter_mut().zip(&self.rhs) {
            *slot = e.eval(t, y)?;
        }
        Ok(())
    }

    pub fn rhs_at(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_rhs(t, y, &mut out).map_err(|source| ProblemError::Eval {
            t,
            y: y.to_vec(),
            source,
        })?;
        Ok(out)
    }

    /// `1.05 * max ||f||` over a tensor grid of `[t0, t0 + a] x box` with
    /// `samples_per_axis` points per axis (endpoints included).
    pub fn estimate_bound(&self, samples_per_axis: usize) -> Result<f64, ProblemError> {
        if self.radius.is_infinite() {
            return Err(ProblemError::UnboundedBox);
        }
        if samples_per_axis < 2 {
            return Err(ProblemError::Invalid(
                "samples_per_axis must be at least 2".into(),
            ));
        }
        let n = self.dim();
        let axes = n + 1;
        let total = (samples_per_axis as u64)
            .checked_pow(axes as u32)
            .filter(|&total| total <= MAX_BOUND_SAMPLES)
            .ok_or_else(|| {
                ProblemError::Invalid(format!(
                    "{samples_per_axis}^{axes} bound samples is too many; supply L instead"
                ))
            })?;
        let s = samples_per_axis;
        let coord = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * (i as f64) / ((s - 1) as f64);

        let mut index = vec![0usize; axes];
        let mut y = vec![0.0; n];
        let mut fy = vec![0.0; n];
        let mut best = 0.0f64;
        for _ in 0..total {
            let t = coord(self.t0, self.t0 + self.horizon, index[0]);
            for j in 0..n {
                y[j] = coord(self.y0[j] - self.radius, self.y0[j] + self.radius, index[j + 1]);
            }
            self.eval_rhs(t, &y, &mut fy)
                .map_err(|source| ProblemError::Eval {
                    t,
                    y: y.clone(),
                    source,
                })?;
            best = best.max(max_norm(&fy));
            for slot in index.iter_mut() {
                *slot += 1;
                if *slot < s {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(BOUND_SAFETY_FACTOR * best)
    }

    /// The problem's own `L`, or a sampled estimate flagged as such.
    pub fn resolved_bound(&self) -> Result<Bound, ProblemError> {
        match self.bound {
            Some(value) => Ok(Bound {
                value,
                estimated: false,
            }),
            None => Ok(Bound {
                value: self.estimate_bound(DEFAULT_BOUND_SAMPLES)?,
                estimated: true,
            }),
        }
    }

    /// `c = min(a, b/L)`, or `c = a` when `b` is infinite.
    pub fn effective_interval(&self) -> Result<DomainBox, ProblemError> {
        let bound = self.resolved_bound()?;
        let c = if self.radius.is_infinite() {
            self.horizon
        } else {
            self.horizon.min(self.radius / bound.value)
        };
        Ok(DomainBox {
            t0: self.t0,
            c,
            box_lo: self.y0.iter().map(|v| v - self.radius).collect(),
            box_hi: self.y0.iter().map(|v| v + self.radius).collect(),
            bound,
        })
    }

    /// The globally defined problem `y' = f(t, clamp(y))` with the clamp
    /// taken componentwise onto `[y0 - b, y0 + b]`. The result lives on
    /// `[t0, t0 + c]` of this problem, has `b = inf` and the same `L`.
    pub fn truncate_rhs(&self) -> Result<IvpProblem, ProblemError> {
        if self.radius.is_infinite() {
            return Err(ProblemError::UnboundedBox);
        }
        let domain = self.effective_interval()?;
        let clamps: Vec<Expr> = (0..self.dim())
            .map(|j| {
                let inner = Expr::Call(
                    Function::Min,
                    vec![Expr::State(j + 1), Expr::constant(domain.box_hi[j])],
                );
                Expr::Call(Function::Max, vec![Expr::constant(domain.box_lo[j]), inner])
            })
            .collect();
        IvpProblem::new(
            format!("{} (truncated)", self.label),
            self.t0,
            self.y0.clone(),
            domain.c,
            f64::INFINITY,
            Some(domain.bound.value),
            self.rhs.iter().map(|e| e.substitute_states(&clamps)).collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let file: ProblemFile = serde_json::from_str(text)?;
        file.into_problem()
    }

    pub fn to_json(&self) -> String {
        let file = ProblemFile {
            label: self.label.clone(),
            t0: self.t0,
            y0: self.y0.clone(),
            a: self.horizon,
            b: if self.radius.is_infinite() {
                RadiusField::Named("inf".into())
            } else {
                RadiusField::Finite(self.radius)
            },
            bound: self.bound,
            rhs: self.rhs.iter().map(|e| e.to_string()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("problem file serialization")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProblemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    label: String,
    t0: f64,
    y0: Vec<f64>,
    a: f64,
    b: RadiusField,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
    rhs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusField {
    Finite(f64),
    Named(String),
}

impl ProblemFile {
    fn into_problem(self) -> Result<IvpProblem, ProblemError> {
        let radius = match self.b {
            RadiusField::Finite(b) => b,
            RadiusField::Named(name) if name == "inf" => f64::INFINITY,
            RadiusField::Named(name) => {
                return Err(ProblemError::Invalid(format!(
                    "b must be a number or \"inf\", got {name:?}"
                )))
            }
        };
        let sources: Vec<&str> = self.rhs.iter().map(String::as_str).collect();
        IvpProblem::from_sources(
            self.label,
            self.t0,
            self.y0,
            self.a,
            radius,
            self.bound,
            &sources,
        )
    }
}
