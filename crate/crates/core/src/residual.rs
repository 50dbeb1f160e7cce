//! The residual functional
//! `F(g) = max_t || g(t) - y0 - int_{t0}^{t} f(s, g(s)) ds ||`,
//! evaluated on the grid nodes with a cumulative trapezoid rule.
//!
//! `F(g) = 0` exactly when `g` solves the problem; the report also carries a
//! slack term bounding what the node-only trapezoid evaluation can miss.

use serde::Serialize;
use thiserror::Error;

use crate::gridfn::{GridError, GridFunction};
use crate::max_norm;
use crate::problem::IvpProblem;
use crate::rhs_lang::EvalError;

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error(transparent)]
    Grid(#[from] GridError),

    #[error("rhs evaluation failed along the trajectory at node {node} (t={t}): {source}")]
    Eval {
        node: usize,
        t: f64,
        #[source]
        source: EvalError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub value: f64,
    pub argmax_t: f64,
    pub node_residuals: Vec<f64>,
    pub quadrature_slack: f64,
}

/// `f(t_j, g(t_j))` at every node, flattened like the grid's own storage.
pub fn sample_rhs(problem: &IvpProblem, g: &GridFunction) -> Result<Vec<f64>, ResidualError> {
    let n = g.dim();
    let mut q = vec![0.0; (g.steps() + 1) * n];
    for (j, out) in q.chunks_exact_mut(n).enumerate() {
        let t = g.time(j);
        problem
            .eval_rhs(t, g.node(j), out)
            .map_err(|source| ResidualError::Eval { node: j, t, source })?;
    }
    Ok(q)
}

/// Trapezoid slack for integrating the node samples `q` (flat, `dim` wide)
/// over `span` with step `h`: the classical `span * h * W / 8` term, `W` the
/// sampled second difference over `h^2`, plus `h^2 D / 8` for the deviation
/// of the residual from its node values inside a cell, `D` the sampled first
/// difference over `h`, plus a floating-point summation term
/// `(m + 1) eps span max|q|`.
pub fn quadrature_slack(q: &[f64], dim: usize, h: f64, span: f64) -> f64 {
    let rows: Vec<&[f64]> = q.chunks_exact(dim).collect();
    let mut second = 0.0f64;
    let mut first = 0.0f64;
    let magnitude = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for w in rows.windows(2) {
        for (a, b) in w[0].iter().zip(w[1]) {
            first = first.max((b - a).abs());
        }
    }
    for w in rows.windows(3) {
        for ((a, b), c) in w[0].iter().zip(w[1]).zip(w[2]) {
            second = second.max((c - 2.0 * b + a).abs());
        }
    }
    let w = second / (h * h);
    let d = first / h;
    let rounding = rows.len() as f64 * f64::EPSILON * span * magnitude;
    span * h * w / 8.0 + h * h * d / 8.0 + rounding
}

pub fn residual_functional(
    problem: &IvpProblem,
    g: &GridFunction,
) -> Result<ResidualReport, ResidualError> {
    g.check_domain(problem, g.t_end())?;
    let n = g.dim();
    let h = g.step();
    let q = sample_rhs(problem, g)?;
    let y0 = problem.y0();

    let mut integral = vec![0.0; n];
    let mut gap = vec![0.0; n];
    let mut node_residuals = Vec::with_capacity(g.steps() + 1);
    for j in 0..=g.steps() {
        if j > 0 {
            for i in 0..n {
                integral[i] += 0.5 * h * (q[(j - 1) * n + i] + q[j * n + i]);
            }
        }
        for i in 0..n {
            gap[i] = g.node(j)[i] - y0[i] - integral[i];
        }
        node_residuals.push(max_norm(&gap));
    }

    let (argmax, value) = node_residuals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, r)| if r > best.1 { (j, r) } else { best });
    Ok(ResidualReport {
        value,
        argmax_t: g.time(argmax),
        node_residuals,
        quadrature_slack: quadrature_slack(&q, n, h, g.span()),
    })
}

/// True iff `F(g) <= tol`. Meaningful only for `tol` above the report's
/// quadrature slack.
pub fn is_solution(problem: &IvpProblem, g: &GridFunction, tol: f64) -> Result<bool, ResidualError> {
    Ok(residual_functional(problem, g)?.value <= tol)
}
