//! Lower and upper solutions.
//!
//! `alpha` is a lower solution when `alpha(t0) <= y0` and
//! `alpha' <= f(t, alpha)`; an upper solution reverses both inequalities.
//! Candidates are piecewise linear, so derivatives are cell slopes compared
//! against `f` at the cell midpoints.
//!
//! Between an ordered pair `alpha <= beta` the module builds approximate
//! solutions by chaining short segments, each pinned at its left end and
//! chosen by bisection so that it satisfies the integral equation at its
//! right end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gridfn::{GridError, GridFunction};
use crate::problem::{IvpProblem, ProblemError};
use crate::residual::{quadrature_slack, residual_functional, ResidualError, ResidualReport};
use crate::rhs_lang::EvalError;

pub const DEFAULT_DELTA_STRICT: f64 = 1e-9;
pub const DEFAULT_TOL_G: f64 = 1e-10;
pub const DEFAULT_MAX_BISECTIONS: usize = 200;

/// Absolute allowance, relative to `max(1, L)`, for rounding in slopes of
/// exact candidates when checking the nonstrict inequalities.
const ROUNDING: f64 = 1e-12;

/// Node-matching tolerance, in steps, for segment endpoints.
const NODE_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("lower/upper solutions are handled for scalar problems only (dimension {0})")]
    NotScalar(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Problem(#[from] ProblemError),

    #[error(transparent)]
    Grid(#[from] GridError),

    #[error(transparent)]
    Residual(#[from] ResidualError),

    #[error("rhs evaluation failed at t={t}: {source}")]
    Eval {
        t: f64,
        #[source]
        source: EvalError,
    },

    #[error(
        "envelopes do not bracket a root on [{t1}, {t2}]: G(lower) = {g_lower}, G(upper) = {g_upper} \
         (allowance {allowance}); the envelopes are not lower/upper solutions or L is underestimated"
    )]
    Bracket {
        t1: f64,
        t2: f64,
        g_lower: f64,
        g_upper: f64,
        allowance: f64,
    },

    #[error("bisection on [{t1}, {t2}] stopped after {iterations} steps with |G| = {best} > {tol}")]
    Bisection {
        t1: f64,
        t2: f64,
        iterations: usize,
        best: f64,
        tol: f64,
    },

    #[error("chain segment [{t1}, {t2}]: {source}")]
    Segment {
        t1: f64,
        t2: f64,
        #[source]
        source: Box<BoundsError>,
    },

    #[error("quasimonotonicity sampling needs a finite box")]
    InfiniteBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub kind: BoundKind,
    pub strict: bool,
    pub initial_margin: f64,
    pub worst_margin: f64,
    pub worst_t: f64,
    pub step: f64,
    pub delta_strict: f64,
    pub verdict: bool,
}

fn scalar(problem: &IvpProblem) -> Result<(), BoundsError> {
    match problem.dim() {
        1 => Ok(()),
        n => Err(BoundsError::NotScalar(n)),
    }
}

fn rhs(problem: &IvpProblem, t: f64, y: f64) -> Result<f64, BoundsError> {
    let mut out = [0.0];
    problem
        .eval_rhs(t, &[y], &mut out)
        .map_err(|source| BoundsError::Eval { t, source })?;
    Ok(out[0])
}

/// Candidates must start at `t0` and stay inside `[t0, t0 + a]`.
fn check_span(problem: &IvpProblem, g: &GridFunction) -> Result<(), BoundsError> {
    if g.dim() != 1 {
        return Err(BoundsError::NotScalar(g.dim()));
    }
    let t_end = problem.t0() + problem.horizon();
    let scale = 1.0f64.max(t_end.abs());
    if (g.t_start() - problem.t0()).abs() > 1e-9 * scale {
        return Err(GridError::DomainMismatch(format!(
            "candidate starts at {}, expected t0 = {}",
            g.t_start(),
            problem.t0()
        ))
        .into());
    }
    if g.t_end() > t_end + 1e-9 * scale {
        return Err(GridError::DomainMismatch(format!(
            "candidate ends at {}, beyond t0 + a = {t_end}",
            g.t_end()
        ))
        .into());
    }
    Ok(())
}

/// Certifies `g` as a lower or upper solution. Strictness applies to the
/// differential inequality, which must hold with margin above
/// `delta_strict`; the initial inequality is always the nonstrict one.
pub fn verify(
    problem: &IvpProblem,
    g: &GridFunction,
    kind: BoundKind,
    strict: bool,
    delta_strict: f64,
) -> Result<BoundCertificate, BoundsError> {
    scalar(problem)?;
    check_span(problem, g)?;
    let y0 = problem.y0()[0];
    let sign = match kind {
        BoundKind::Lower => 1.0,
        BoundKind::Upper => -1.0,
    };
    let initial_margin = sign * (y0 - g.node(0)[0]);
    let h = g.step();
    let mut worst_margin = f64::INFINITY;
    let mut worst_t = g.t_start();
    for j in 0..g.steps() {
        let (a, b) = (g.node(j)[0], g.node(j + 1)[0]);
        let t = g.time(j) + 0.5 * h;
        let margin = sign * (rhs(problem, t, 0.5 * (a + b))? - (b - a) / h);
        if margin < worst_margin {
            worst_margin = margin;
            worst_t = t;
        }
    }
    let rounding = ROUNDING * problem.resolved_bound()?.value.max(1.0);
    let verdict = initial_margin >= 0.0
        && if strict {
            worst_margin > delta_strict
        } else {
            worst_margin >= -rounding
        };
    Ok(BoundCertificate {
        kind,
        strict,
        initial_margin,
        worst_margin,
        worst_t,
        step: h,
        delta_strict,
        verdict,
    })
}

/// The envelopes `y0 -+ L (t - t0)` on `[t0, t0 + c]`, lower and upper
/// solutions of the truncated problem.
pub fn linear_envelopes(
    problem: &IvpProblem,
    m: usize,
) -> Result<(GridFunction, GridFunction), BoundsError> {
    scalar(problem)?;
    let domain = problem.effective_interval()?;
    let (t0, y0, l) = (problem.t0(), problem.y0()[0], domain.bound.value);
    let alpha = GridFunction::sample(t0, domain.c, m, 1, |t| vec![y0 - l * (t - t0)])?;
    let beta = GridFunction::sample(t0, domain.c, m, 1, |t| vec![y0 + l * (t - t0)])?;
    Ok((alpha, beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ordering {
    pub ordered: bool,
    /// `min_j (beta - alpha)(t_j)`.
    pub worst_gap: f64,
    pub worst_t: f64,
    /// The same minimum over nodes after the first.
    pub interior_gap: f64,
}

pub fn check_ordering(alpha: &GridFunction, beta: &GridFunction) -> Result<Ordering, BoundsError> {
    alpha.check_same_grid(beta)?;
    let gap = |j: usize| {
        alpha
            .node(j)
            .iter()
            .zip(beta.node(j))
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min)
    };
    let (mut worst_gap, mut worst_t) = (gap(0), alpha.time(0));
    let mut interior_gap = f64::INFINITY;
    for j in 1..=alpha.steps() {
        let v = gap(j);
        interior_gap = interior_gap.min(v);
        if v < worst_gap {
            worst_gap = v;
            worst_t = alpha.time(j);
        }
    }
    Ok(Ordering {
        ordered: worst_gap >= -1e-12,
        worst_gap,
        worst_t,
        interior_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentOptions {
    pub tol_g: f64,
    pub max_bisections: usize,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            tol_g: DEFAULT_TOL_G,
            max_bisections: DEFAULT_MAX_BISECTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// The segment on the nodes of `[t1, t2]`.
    pub trajectory: GridFunction,
    pub lambda: f64,
    /// `G = gamma(t2) - y1 - int_{t1}^{t2} f(s, gamma(s)) ds` at the returned
    /// segment.
    pub g_value: f64,
    pub iterations: usize,
}

fn node_index(g: &GridFunction, t: f64) -> Result<usize, BoundsError> {
    let s = (t - g.t_start()) / g.step();
    let j = s.round();
    if (s - j).abs() > NODE_RTOL * s.abs().max(1.0) || j < 0.0 || j > g.steps() as f64 {
        return Err(BoundsError::Invalid(format!("t = {t} is not a node of the envelope grid")));
    }
    Ok(j as usize)
}

/// Shared state for the segment search on nodes `j1..=j2`.
struct SegmentSearch<'a> {
    problem: &'a IvpProblem,
    times: Vec<f64>,
    h: f64,
    y1: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SegmentSearch<'_> {
    fn f_samples(&self, values: &[f64]) -> Result<Vec<f64>, BoundsError> {
        self.times.iter().zip(values).map(|(&t, &y)| rhs(self.problem, t, y)).collect()
    }

    fn g_of(&self, values: &[f64]) -> Result<(f64, Vec<f64>), BoundsError> {
        let q = self.f_samples(values)?;
        let inner: f64 = q.windows(2).map(|w| 0.5 * self.h * (w[0] + w[1])).sum();
        Ok((values[values.len() - 1] - self.y1 - inner, q))
    }

    fn blend(&self, lambda: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        v[0] = self.y1;
        v
    }
}

/// One segment through `(t1, y1)` on `[t1, t2]` between the envelopes
/// `alpha <= beta`. `t1` and `t2` must be nodes of the envelopes' grid.
///
/// The envelopes are first rerouted through `(t1, y1)` with slope `-+L`
/// escape lines; the search then runs over the convex combinations of the
/// two rerouted envelopes.
pub fn lemma_segment(
    problem: &IvpProblem,
    t1: f64,
    t2: f64,
    y1: f64,
    alpha: &GridFunction,
    beta: &GridFunction,
    options: SegmentOptions,
) -> Result<Segment, BoundsError> {
    scalar(problem)?;
    alpha.check_same_grid(beta)?;
    if alpha.dim() != 1 {
        return Err(BoundsError::NotScalar(alpha.dim()));
    }
    if !(t1 < t2) {
        return Err(BoundsError::Invalid(format!("need t1 < t2, got {t1} and {t2}")));
    }
    let (j1, j2) = (node_index(alpha, t1)?, node_index(alpha, t2)?);
    let (a1, b1) = (alpha.node(j1)[0], beta.node(j1)[0]);
    if !(a1 <= y1 && y1 <= b1) {
        return Err(BoundsError::Invalid(format!(
            "y1 = {y1} is outside [alpha(t1), beta(t1)] = [{a1}, {b1}]"
        )));
    }
    let l = problem.resolved_bound()?.value;
    let times: Vec<f64> = (j1..=j2).map(|j| alpha.time(j)).collect();
    let lower = (j1..=j2)
        .map(|j| (y1 - l * (alpha.time(j) - t1)).max(alpha.node(j)[0]))
        .collect();
    let upper = (j1..=j2)
        .map(|j| (y1 + l * (alpha.time(j) - t1)).min(beta.node(j)[0]))
        .collect();
    let search = SegmentSearch {
        problem,
        times,
        h: alpha.step(),
        y1,
        lower,
        upper,
    };

    let (g_lower, q_lower) = search.g_of(&search.blend(0.0))?;
    let (g_upper, q_upper) = search.g_of(&search.blend(1.0))?;
    let span = t2 - t1;
    let allowance = options.tol_g
        + quadrature_slack(&q_lower, 1, search.h, span).max(quadrature_slack(&q_upper, 1, search.h, span));
    if g_lower > allowance || g_upper < -allowance {
        return Err(BoundsError::Bracket {
            t1,
            t2,
            g_lower,
            g_upper,
            allowance,
        });
    }

    // pure bisection over interior points; the endpoints only validate the bracket
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = f64::INFINITY;
    for iterations in 1..=options.max_bisections {
        let lambda = 0.5 * (lo + hi);
        let values = search.blend(lambda);
        let (g, _) = search.g_of(&values)?;
        best = best.min(g.abs());
        if g.abs() <= options.tol_g {
            return Ok(Segment {
                trajectory: GridFunction::from_flat(t1, search.h, 1, values)?,
                lambda,
                g_value: g,
                iterations,
            });
        }
        if g < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    Err(BoundsError::Bisection {
        t1,
        t2,
        iterations: options.max_bisections,
        best,
        tol: options.tol_g,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub trajectory: GridFunction,
    /// Partition points `t0 < t1 < ... < t0 + c`.
    pub partition: Vec<f64>,
    pub mesh: f64,
    /// `max(L, Lip alpha, Lip beta)`, the constant used for the mesh.
    pub lipschitz: f64,
    /// Largest `|G|` over the segments.
    pub max_segment_defect: f64,
    pub residual: ResidualReport,
}

/// Chains segments from `(t0, y0)` across `[t0, t0 + c]` between the lower
/// and upper solutions `alpha <= beta`, on a partition of mesh below
/// `eps / (2 Lip)`, so that the residual of the result stays below `eps`.
pub fn goodman_chain(
    problem: &IvpProblem,
    alpha: &GridFunction,
    beta: &GridFunction,
    eps: f64,
    options: SegmentOptions,
) -> Result<Chain, BoundsError> {
    scalar(problem)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(BoundsError::Invalid(format!("eps must be positive, got {eps}")));
    }
    alpha.check_same_grid(beta)?;
    let domain = problem.effective_interval()?;
    alpha.check_domain(problem, domain.t_end())?;
    let ordering = check_ordering(alpha, beta)?;
    if !ordering.ordered {
        return Err(BoundsError::Invalid(format!(
            "alpha > beta at t = {} (gap {})",
            ordering.worst_t, ordering.worst_gap
        )));
    }

    let lipschitz = domain
        .bound
        .value
        .max(alpha.lipschitz_constant())
        .max(beta.lipschitz_constant());
    let bound = eps / (2.0 * lipschitz);
    let h = alpha.step();
    let m = alpha.steps();
    let mut per_piece = (bound / h).floor() as usize;
    if per_piece as f64 * h >= bound {
        per_piece -= 1;
    }
    if per_piece == 0 {
        return Err(BoundsError::Invalid(format!(
            "grid step {h} is too coarse for mesh < {bound}"
        )));
    }

    let mut values = vec![0.0; m + 1];
    values[0] = problem.y0()[0];
    let mut partition = vec![alpha.time(0)];
    let mut max_segment_defect = 0.0f64;
    let mut j0 = 0;
    while j0 < m {
        let j1 = (j0 + per_piece).min(m);
        let (t1, t2) = (alpha.time(j0), alpha.time(j1));
        let segment = lemma_segment(problem, t1, t2, values[j0], alpha, beta, options)
            .map_err(|e| BoundsError::Segment {
                t1,
                t2,
                source: Box::new(e),
            })?;
        values[j0..=j1].copy_from_slice(segment.trajectory.as_flat());
        max_segment_defect = max_segment_defect.max(segment.g_value.abs());
        partition.push(t2);
        j0 = j1;
    }
    let trajectory = GridFunction::from_flat(alpha.t_start(), h, 1, values)?;
    let residual = residual_functional(problem, &trajectory)?;
    Ok(Chain {
        trajectory,
        partition,
        mesh: per_piece as f64 * h,
        lipschitz,
        max_segment_defect,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiWitness {
    /// 1-based component whose right-hand side decreases.
    pub component: usize,
    pub t: f64,
    pub y: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub f_y: f64,
    pub f_y_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiReport {
    /// `true` means no violation was found among the checked pairs.
    pub verdict: bool,
    pub samples_checked: usize,
    pub seed: u64,
    pub witness: Option<QuasiWitness>,
}

struct PairCheck<'a> {
    problem: &'a IvpProblem,
    fy: Vec<f64>,
    fbar: Vec<f64>,
    checked: usize,
}

impl PairCheck<'_> {
    /// Compares component `i` at `(t, y)` and `(t, y_bar)`.
    fn decreases(&mut self, i: usize, t: f64, y: &[f64], y_bar: &[f64]) -> Result<Option<QuasiWitness>, BoundsError> {
        self.checked += 1;
        self.problem
            .eval_rhs(t, y, &mut self.fy)
            .map_err(|source| BoundsError::Eval { t, source })?;
        self.problem
            .eval_rhs(t, y_bar, &mut self.fbar)
            .map_err(|source| BoundsError::Eval { t, source })?;
        let (a, b) = (self.fy[i], self.fbar[i]);
        if b < a - 1e-12 * (1.0 + a.abs()) {
            return Ok(Some(QuasiWitness {
                component: i + 1,
                t,
                y: y.to_vec(),
                y_bar: y_bar.to_vec(),
                f_y: a,
                f_y_bar: b,
            }));
        }
        Ok(None)
    }
}

/// Searches for a violation of quasimonotonicity: `y <= y_bar` with
/// `y_i = y_bar_i` but `f_i(t, y_bar) < f_i(t, y)`. A grid pass over the
/// box comes first, then seeded random pairs up to `samples` comparisons.
pub fn check_quasimonotone(problem: &IvpProblem, samples: usize, seed: u64) -> Result<QuasiReport, BoundsError> {
    let n = problem.dim();
    if n == 1 {
        return Ok(QuasiReport {
            verdict: true,
            samples_checked: 0,
            seed,
            witness: None,
        });
    }
    let radius = problem.radius();
    if !radius.is_finite() || !problem.horizon().is_finite() {
        return Err(BoundsError::InfiniteBox);
    }
    let y0 = problem.y0();
    let (t0, a) = (problem.t0(), problem.horizon());
    let mut check = PairCheck {
        problem,
        fy: vec![0.0; n],
        fbar: vec![0.0; n],
        checked: 0,
    };
    let report = |checked, witness: Option<QuasiWitness>| QuasiReport {
        verdict: witness.is_none(),
        samples_checked: checked,
        seed,
        witness,
    };

    // grid pass: three levels per axis, raising one other coordinate to the top
    let levels = [-1.0, 0.0, 1.0];
    let grid_budget = samples / 2;
    let bases = 3usize.saturating_pow(n as u32);
    'grid: for tl in [0.0, 0.5, 1.0] {
        let t = t0 + tl * a;
        for code in 0..bases {
            let mut y = y0.to_vec();
            let mut c = code;
            for v in y.iter_mut() {
                *v += levels[c % 3] * radius;
                c /= 3;
            }
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    if y[j] >= y0[j] + radius {
                        continue;
                    }
                    if check.checked >= grid_budget {
                        break 'grid;
                    }
                    let mut y_bar = y.clone();
                    y_bar[j] = y0[j] + radius;
                    if let Some(w) = check.decreases(i, t, &y, &y_bar)? {
                        return Ok(report(check.checked, Some(w)));
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while check.checked < samples {
        let t = t0 + rng.gen::<f64>() * a;
        let y: Vec<f64> = y0.iter().map(|c| c + radius * rng.gen_range(-1.0..=1.0)).collect();
        let i = rng.gen_range(0..n);
        let y_bar: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j == i {
                    v
                } else {
                    v + rng.gen::<f64>() * (y0[j] + radius - v)
                }
            })
            .collect();
        if let Some(w) = check.decreases(i, t, &y, &y_bar)? {
            return Ok(report(check.checked, Some(w)));
        }
    }
    Ok(report(check.checked, None))
}
