//! Least and greatest solutions of scalar problems.
//!
//! The greatest solution is approached from above by the solutions of
//! `y' = f(t, y) + 1/k`, the least from below by `y' = f(t, y) - 1/k`. Each
//! rung is a forward Euler polygon on a grid shared by the whole ladder.

use serde::Serialize;
use thiserror::Error;

use crate::gridfn::{GridError, GridFunction};
use crate::integrators::{euler_with_drift, IntegratorError};
use crate::problem::{IvpProblem, ProblemError};
use crate::residual::{residual_functional, ResidualError};

#[derive(Debug, Error)]
pub enum ExtremalError {
    #[error("extremal solutions are computed for scalar problems only (dimension {0})")]
    NotScalar(usize),

    #[error("invalid k schedule: {0}")]
    Schedule(String),

    #[error("ladder rung k={k}: {source}")]
    Rung {
        k: usize,
        #[source]
        source: IntegratorError,
    },

    #[error(
        "ladder not monotone between k={k_prev} and k={k}: violation {violation} at t={t} \
         exceeds 10*tol = {limit}; the grid is too coarse"
    )]
    NonMonotone {
        k_prev: usize,
        k: usize,
        violation: f64,
        t: f64,
        limit: f64,
    },

    #[error(transparent)]
    Problem(#[from] ProblemError),

    #[error(transparent)]
    Grid(#[from] GridError),

    #[error(transparent)]
    Residual(#[from] ResidualError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Least,
    Greatest,
}

impl Side {
    /// Sign of the perturbation `+-1/k`.
    fn sign(self) -> f64 {
        match self {
            Side::Greatest => 1.0,
            Side::Least => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalResult {
    pub side: Side,
    pub approx: GridFunction,
    pub ladder: Vec<(usize, GridFunction)>,
    pub integrals: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
    pub monotonicity_violation: f64,
}

pub fn greatest_solution(
    problem: &IvpProblem,
    k_schedule: &[usize],
    m: usize,
    tol: f64,
) -> Result<ExtremalResult, ExtremalError> {
    ladder(problem, Side::Greatest, k_schedule, m, tol)
}

pub fn least_solution(
    problem: &IvpProblem,
    k_schedule: &[usize],
    m: usize,
    tol: f64,
) -> Result<ExtremalResult, ExtremalError> {
    ladder(problem, Side::Least, k_schedule, m, tol)
}

/// Rung `k` of the ladder on `side`: the Euler polygon of `y' = f +- 1/k`.
pub fn rung(problem: &IvpProblem, side: Side, k: usize, m: usize) -> Result<GridFunction, ExtremalError> {
    euler_with_drift(problem, m, side.sign() / k as f64)
        .map_err(|source| ExtremalError::Rung { k, source })
}

/// Powers of two from `kmin` to `kmax` inclusive.
pub fn doubling_schedule(kmin: usize, kmax: usize) -> Result<Vec<usize>, ExtremalError> {
    if kmin < 2 || kmax < kmin {
        return Err(ExtremalError::Schedule(format!("need 2 <= kmin <= kmax, got {kmin}..{kmax}")));
    }
    let mut out = Vec::new();
    let mut k = kmin;
    while k <= kmax {
        out.push(k);
        match k.checked_mul(2) {
            Some(next) => k = next,
            None => break,
        }
    }
    Ok(out)
}

fn check_schedule(k_schedule: &[usize]) -> Result<(), ExtremalError> {
    if k_schedule.is_empty() {
        return Err(ExtremalError::Schedule("empty".into()));
    }
    if let Some(k) = k_schedule.iter().find(|&&k| k < 2) {
        return Err(ExtremalError::Schedule(format!("every k must be >= 2, got {k}")));
    }
    if k_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExtremalError::Schedule(format!(
            "must be strictly increasing, got {k_schedule:?}"
        )));
    }
    Ok(())
}

fn ladder(
    problem: &IvpProblem,
    side: Side,
    k_schedule: &[usize],
    m: usize,
    tol: f64,
) -> Result<ExtremalResult, ExtremalError> {
    if problem.dim() != 1 {
        return Err(ExtremalError::NotScalar(problem.dim()));
    }
    check_schedule(k_schedule)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ExtremalError::Schedule(format!("tol must be positive, got {tol}")));
    }

    let mut rungs: Vec<(usize, GridFunction)> = Vec::new();
    let mut integrals = Vec::new();
    let mut violation = 0.0f64;
    let mut converged = false;
    for &k in k_schedule {
        let current = rung(problem, side, k, m)?;
        integrals.push(current.integral()[0]);
        if let Some((k_prev, prev)) = rungs.last() {
            // greatest: rungs decrease with k; least: they increase
            let (worst, at) = (0..=m)
                .map(|j| (side.sign() * (current.node(j)[0] - prev.node(j)[0]), j))
                .fold((0.0f64, 0), |best, x| if x.0 > best.0 { x } else { best });
            if worst > 10.0 * tol {
                return Err(ExtremalError::NonMonotone {
                    k_prev: *k_prev,
                    k,
                    violation: worst,
                    t: current.time(at),
                    limit: 10.0 * tol,
                });
            }
            violation = violation.max(worst);
            let gap = current.sup_distance(prev)?;
            rungs.push((k, current));
            if gap <= tol {
                converged = true;
                break;
            }
        } else {
            rungs.push((k, current));
        }
    }

    let approx = rungs.last().expect("schedule is not empty").1.clone();
    let final_residual = residual_functional(problem, &approx)?.value;
    Ok(ExtremalResult {
        side,
        approx,
        ladder: rungs,
        integrals,
        final_residual,
        converged,
        monotonicity_violation: violation,
    })
}

/// Candidates ranked by `I(g) = int g`, largest first; ties keep input order.
pub fn integral_rank(
    problem: &IvpProblem,
    candidates: &[GridFunction],
) -> Result<Vec<(usize, f64)>, ExtremalError> {
    if problem.dim() != 1 {
        return Err(ExtremalError::NotScalar(problem.dim()));
    }
    if let Some(first) = candidates.first() {
        for g in candidates {
            first.check_same_grid(g)?;
        }
        if first.dim() != 1 {
            return Err(ExtremalError::NotScalar(first.dim()));
        }
    }
    let mut ranked: Vec<(usize, f64)> =
        candidates.iter().map(|g| g.integral()[0]).enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}
