//! Minimizing sequences for the residual functional.
//!
//! [`tonelli`] integrates the delayed problem
//! `g(t) = y0` on `[t0, t0 + c/k]`,
//! `g(t) = y0 + int_{t0}^{t - c/k} f(s, g(s)) ds` afterwards,
//! whose residual is at most `L c / k`. [`euler_polygon`] is the forward
//! Euler-Cauchy polygon on the same kind of grid.
//!
//! Both integrators watch the hypotheses as they go: leaving the box, or
//! meeting `||f|| > L`, stops the run with an error that names the node.

use serde::Serialize;
use thiserror::Error;

use crate::gridfn::{GridError, GridFunction};
use crate::max_norm;
use crate::problem::{DomainBox, IvpProblem, ProblemError};
use crate::residual::{residual_functional, ResidualError};
use crate::rhs_lang::EvalError;

/// Relative headroom for the box and bound consistency checks.
const CHECK_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Problem(#[from] ProblemError),

    #[error(transparent)]
    Grid(#[from] GridError),

    #[error(transparent)]
    Residual(#[from] ResidualError),

    #[error("rhs evaluation failed at node {node} (t={t}): {source}")]
    Eval {
        node: usize,
        t: f64,
        #[source]
        source: EvalError,
    },

    #[error(
        "trajectory left the box at node {node} (t={t}): ||y - y0|| = {distance} > b = {radius}; \
         the bound L = {bound} is too small"
    )]
    BoxExit {
        node: usize,
        t: f64,
        distance: f64,
        radius: f64,
        bound: f64,
    },

    #[error(
        "claimed bound violated at node {node} (t={t}): ||f|| = {norm} > L = {bound}; \
         the hypotheses fail on this interval"
    )]
    BoundExceeded {
        node: usize,
        t: f64,
        norm: f64,
        bound: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TonelliParams {
    k: usize,
    m: usize,
}

impl TonelliParams {
    /// `k >= 2` is the delay divisor, `m` the number of grid steps; `m` must
    /// be a multiple of `k` with at least two steps per delay.
    pub fn new(k: usize, m: usize) -> Result<Self, IntegratorError> {
        if k < 2 {
            return Err(IntegratorError::InvalidParams(format!("k must be >= 2, got {k}")));
        }
        if !m.is_multiple_of(k) || m / k < 2 {
            return Err(IntegratorError::InvalidParams(format!(
                "grid steps m = {m} must be a multiple of k = {k} with m/k >= 2"
            )));
        }
        Ok(TonelliParams { k, m })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Grid steps per delay `c/k`.
    pub fn delay_steps(&self) -> usize {
        self.m / self.k
    }
}

/// Consistency checks applied at every node.
struct Watch<'a> {
    domain: &'a DomainBox,
    y0: &'a [f64],
    radius: f64,
    bound: f64,
}

impl Watch<'_> {
    fn state(&self, node: usize, t: f64, y: &[f64]) -> Result<(), IntegratorError> {
        if self.radius.is_finite() {
            let distance = crate::gridfn::distance(y, self.y0);
            if distance > self.radius * (1.0 + CHECK_RTOL) {
                return Err(IntegratorError::BoxExit {
                    node,
                    t,
                    distance,
                    radius: self.radius,
                    bound: self.domain.bound.value,
                });
            }
        }
        Ok(())
    }

    fn slope(&self, node: usize, t: f64, f: &[f64]) -> Result<(), IntegratorError> {
        let norm = max_norm(f);
        if norm > self.bound * (1.0 + CHECK_RTOL) {
            return Err(IntegratorError::BoundExceeded {
                node,
                t,
                norm,
                bound: self.bound,
            });
        }
        Ok(())
    }
}

fn eval_at(
    problem: &IvpProblem,
    node: usize,
    t: f64,
    y: &[f64],
    drift: f64,
    out: &mut [f64],
) -> Result<(), IntegratorError> {
    problem
        .eval_rhs(t, y, out)
        .map_err(|source| IntegratorError::Eval { node, t, source })?;
    if drift != 0.0 {
        out.iter_mut().for_each(|v| *v += drift);
    }
    Ok(())
}

/// The Tonelli delayed approximation on `[t0, t0 + c]`.
pub fn tonelli(problem: &IvpProblem, params: TonelliParams) -> Result<GridFunction, IntegratorError> {
    let domain = problem.effective_interval()?;
    let watch = Watch {
        domain: &domain,
        y0: problem.y0(),
        radius: problem.radius(),
        bound: domain.bound.value,
    };
    let n = problem.dim();
    let m = params.m();
    let delay = params.delay_steps();
    let h = domain.c / m as f64;

    let mut values = vec![0.0; (m + 1) * n];
    // integral of f(s, g(s)) from t0 to t_j, by trapezoid on the nodes
    let mut cumulative = vec![0.0; (m + 1) * n];
    let mut f_prev = vec![0.0; n];
    let mut f_cur = vec![0.0; n];

    for j in 0..=m {
        let t = problem.t0() + j as f64 * h;
        let node = &mut values[j * n..(j + 1) * n];
        if j <= delay {
            node.copy_from_slice(problem.y0());
        } else {
            let lag = (j - delay) * n;
            for i in 0..n {
                node[i] = problem.y0()[i] + cumulative[lag + i];
            }
        }
        watch.state(j, t, node)?;
        eval_at(problem, j, t, node, 0.0, &mut f_cur)?;
        watch.slope(j, t, &f_cur)?;
        if j > 0 {
            for i in 0..n {
                cumulative[j * n + i] = cumulative[(j - 1) * n + i] + 0.5 * h * (f_prev[i] + f_cur[i]);
            }
        }
        std::mem::swap(&mut f_prev, &mut f_cur);
    }
    Ok(GridFunction::from_flat(problem.t0(), h, n, values)?)
}

/// Forward Euler-Cauchy polygon with `m` steps on `[t0, t0 + c]`.
pub fn euler_polygon(problem: &IvpProblem, m: usize) -> Result<GridFunction, IntegratorError> {
    euler_with_drift(problem, m, 0.0)
}

/// Forward Euler for `y' = f(t, y) + drift` (the drift is added to every
/// component) on the effective interval of the unperturbed problem. The
/// bound check uses `L + |drift|`.
pub fn euler_with_drift(
    problem: &IvpProblem,
    m: usize,
    drift: f64,
) -> Result<GridFunction, IntegratorError> {
    if m < 2 {
        return Err(IntegratorError::InvalidParams(format!("grid steps m must be >= 2, got {m}")));
    }
    let domain = problem.effective_interval()?;
    let watch = Watch {
        domain: &domain,
        y0: problem.y0(),
        radius: problem.radius(),
        bound: domain.bound.value + drift.abs(),
    };
    let n = problem.dim();
    let h = domain.c / m as f64;
    let mut values = Vec::with_capacity((m + 1) * n);
    values.extend_from_slice(problem.y0());
    let mut slope = vec![0.0; n];
    for j in 0..m {
        let t = problem.t0() + j as f64 * h;
        let node = &values[j * n..(j + 1) * n];
        eval_at(problem, j, t, node, drift, &mut slope)?;
        watch.slope(j, t, &slope)?;
        let next: Vec<f64> = node.iter().zip(&slope).map(|(y, s)| y + h * s).collect();
        watch.state(j + 1, t + h, &next)?;
        values.extend(next);
    }
    Ok(GridFunction::from_flat(problem.t0(), h, n, values)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tonelli,
    Euler,
}

/// Self-describing summary of an integrator run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveCertificate {
    pub label: String,
    pub method: Method,
    pub k: Option<usize>,
    pub m: usize,
    pub c: f64,
    #[serde(rename = "L")]
    pub bound: f64,
    pub bound_estimated: bool,
    pub residual: f64,
    pub argmax_t: f64,
    /// `L c / k`; present for Tonelli runs only.
    #[serde(rename = "bound_Lc_over_k")]
    pub bound_lc_over_k: Option<f64>,
    pub quadrature_slack: f64,
    /// `residual <= L c / k + quadrature_slack` for Tonelli runs.
    pub certified: Option<bool>,
}

/// Runs one of the integrators and measures its residual.
pub fn solve(
    problem: &IvpProblem,
    method: Method,
    k: usize,
    m: usize,
) -> Result<(GridFunction, SolveCertificate), IntegratorError> {
    let domain = problem.effective_interval()?;
    let (trajectory, k) = match method {
        Method::Tonelli => (tonelli(problem, TonelliParams::new(k, m)?)?, Some(k)),
        Method::Euler => (euler_polygon(problem, m)?, None),
    };
    let report = residual_functional(problem, &trajectory)?;
    let bound_lc_over_k = k.map(|k| domain.bound.value * domain.c / k as f64);
    let certificate = SolveCertificate {
        label: problem.label().to_string(),
        method,
        k,
        m,
        c: domain.c,
        bound: domain.bound.value,
        bound_estimated: domain.bound.estimated,
        residual: report.value,
        argmax_t: report.argmax_t,
        bound_lc_over_k,
        quadrature_slack: report.quadrature_slack,
        certified: bound_lc_over_k.map(|b| report.value <= b + report.quadrature_slack),
    };
    Ok((trajectory, certificate))
}
