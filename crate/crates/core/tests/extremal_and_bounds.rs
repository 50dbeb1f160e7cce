use peano_core::bounds::{
    check_ordering, goodman_chain, linear_envelopes, verify, SegmentOptions, DEFAULT_DELTA_STRICT,
};
use peano_core::corpus::{self, GridSpec};
use peano_core::extremal::{doubling_schedule, greatest_solution, integral_rank, least_solution, rung};
use peano_core::gridfn::GridFunction;
use peano_core::integrators::euler_with_drift;
use peano_core::residual::residual_functional;
use peano_core::{BoundKind, IvpProblem, Side};

const M: usize = 4096;
const TOL: f64 = 1e-3;

fn peano() -> IvpProblem {
    corpus::get("peano_cubed").unwrap().problem
}

fn extremals(p: &IvpProblem, m: usize) -> (GridFunction, GridFunction) {
    let schedule = doubling_schedule(4, 1024).unwrap();
    let g = greatest_solution(p, &schedule, m, TOL).unwrap().approx;
    let l = least_solution(p, &schedule, m, TOL).unwrap().approx;
    (g, l)
}

#[test]
fn family_is_sandwiched_and_ranked_between_extremals() {
    let p = peano();
    let (greatest, least) = extremals(&p, M);
    let tol_total = TOL + 2e-2;
    let grid = GridSpec::effective(&p, M).unwrap();
    let top = greatest.integral()[0];
    let bottom = least.integral()[0];
    for t2 in [0.0, 0.05, 0.1, 0.2, 0.3, 1.0 / 3.0] {
        let s = corpus::peano_family(t2, grid).unwrap();
        for j in 0..=M {
            let v = s.node(j)[0];
            assert!(least.node(j)[0] - tol_total <= v && v <= greatest.node(j)[0] + tol_total);
        }
        let i = s.integral()[0];
        assert!(bottom - 1e-12 <= i && i <= top + tol_total * grid.length, "t2 = {t2}");
    }
}

#[test]
fn ladders_collapse_for_unique_solutions() {
    for name in ["linear_unit", "blowup_tan"] {
        let p = corpus::get(name).unwrap().problem;
        let (greatest, least) = extremals(&p, 2048);
        let gap = greatest.sup_distance(&least).unwrap();
        assert!(gap <= 2.0 * (TOL + 2e-2), "{name}: {gap}");
    }
}

#[test]
fn rungs_are_strict_with_half_drift_margin() {
    let p = peano();
    for k in [4usize, 8, 16, 32, 64, 128, 256] {
        let upper = rung(&p, Side::Greatest, k, M).unwrap();
        let lower = rung(&p, Side::Least, k, M).unwrap();
        let cu = verify(&p, &upper, BoundKind::Upper, true, DEFAULT_DELTA_STRICT).unwrap();
        let cl = verify(&p, &lower, BoundKind::Lower, true, DEFAULT_DELTA_STRICT).unwrap();
        let half = 0.5 / k as f64;
        assert!(cu.verdict && cu.worst_margin >= half, "upper k={k}: {}", cu.worst_margin);
        assert!(cl.verdict && cl.worst_margin >= half, "lower k={k}: {}", cl.worst_margin);
        let order = check_ordering(&lower, &upper).unwrap();
        assert!(order.ordered && order.interior_gap > 0.0, "k={k}");
    }
}

#[test]
fn genuine_solutions_certify_both_ways() {
    let p = peano();
    let grid = GridSpec::effective(&p, 2000).unwrap();
    for t2 in [0.0, 0.1, 1.0 / 3.0] {
        let s = corpus::peano_family(t2, grid).unwrap();
        let slack = residual_functional(&p, &s).unwrap().quadrature_slack;
        for kind in [BoundKind::Lower, BoundKind::Upper] {
            let cert = verify(&p, &s, kind, false, DEFAULT_DELTA_STRICT).unwrap();
            // midpoint slopes of a cubic are off by h^2 f''' / 24
            assert!(cert.worst_margin >= -(slack + 1e-5), "t2 {t2} {kind:?}: {}", cert.worst_margin);
            assert_eq!(cert.initial_margin, 0.0);
        }
    }
}

#[test]
fn chain_between_zero_and_rung() {
    let p = peano();
    let m = M;
    let beta = rung(&p, Side::Greatest, 8, m).unwrap();
    let alpha = GridFunction::constant(0.0, 1.0 / 3.0, m, &[0.0]).unwrap();
    for eps in [0.2, 0.1, 0.05] {
        let chain = goodman_chain(&p, &alpha, &beta, eps, SegmentOptions::default()).unwrap();
        let tol_chain = chain.residual.quadrature_slack + 1e-9;
        assert!(chain.residual.value < eps + tol_chain);
        assert!(chain.mesh < eps / (2.0 * chain.lipschitz));
        for j in 0..=m {
            let v = chain.trajectory.node(j)[0];
            assert!(v >= -1e-9 && v <= beta.node(j)[0] + 1e-9);
        }
        assert!(chain.trajectory.in_set_a(&p, chain.lipschitz - 3.0 + 1e-9).unwrap());
    }
}

#[test]
fn chain_for_unit_field_between_shifted_envelopes() {
    let p = corpus::get("linear_unit").unwrap().problem;
    let (alpha, beta) = linear_envelopes(&p, 1000).unwrap();
    let chain = goodman_chain(&p, &alpha, &beta, 0.1, SegmentOptions::default()).unwrap();
    assert!(chain.residual.value < 0.1);
    let line = GridFunction::sample(0.0, 1.0, 1000, 1, |t| vec![t]).unwrap();
    assert!(chain.trajectory.sup_distance(&line).unwrap() < 1e-6);
}

/// Lower solutions from `y' = f - delta`, clamped to the envelopes.
fn clamped_drift(p: &IvpProblem, drift: f64) -> GridFunction {
    let (alpha, beta) = linear_envelopes(&p.truncate_rhs().unwrap(), M).unwrap();
    let raw = euler_with_drift(p, M, drift).unwrap();
    let low = raw.zip_with(&alpha, f64::max).unwrap();
    low.zip_with(&beta, f64::min).unwrap()
}

#[test]
fn extremals_dominate_generated_lower_and_upper_solutions() {
    let p = peano();
    let (greatest, least) = extremals(&p, M);
    for delta in [0.05, 0.1, 0.2] {
        let lower = clamped_drift(&p, -delta);
        assert!(verify(&p, &lower, BoundKind::Lower, false, DEFAULT_DELTA_STRICT).unwrap().verdict);
        let upper = clamped_drift(&p, delta);
        assert!(verify(&p, &upper, BoundKind::Upper, false, DEFAULT_DELTA_STRICT).unwrap().verdict);
        for j in 0..=M {
            assert!(greatest.node(j)[0] >= lower.node(j)[0] - 2e-2);
            assert!(least.node(j)[0] <= upper.node(j)[0] + 2e-2);
        }
    }
}

#[test]
fn integral_rank_matches_hand_values() {
    let p = peano();
    let grid = GridSpec::effective(&p, 6000).unwrap();
    let t2s = [0.0, 1.0 / 12.0, 1.0 / 6.0, 0.25, 1.0 / 3.0];
    let family: Vec<GridFunction> = t2s.iter().map(|&t2| corpus::peano_family(t2, grid).unwrap()).collect();
    let ranked = integral_rank(&p, &family).unwrap();
    let order: Vec<usize> = ranked.iter().map(|r| r.0).collect();
    assert_eq!(order, vec![0, 1, 2, 3, 4]);
    assert!(ranked.windows(2).all(|w| w[0].1 > w[1].1));
    for (index, value) in ranked {
        let hand = (1.0 / 3.0 - t2s[index]).powi(4) / 4.0;
        assert!((value - hand).abs() <= 1e-6, "t2 = {}: {value} vs {hand}", t2s[index]);
    }
}

#[test]
fn family_is_nonincreasing_in_t2() {
    let grid = GridSpec::effective(&peano(), 900).unwrap();
    let members: Vec<GridFunction> =
        (0..=10).map(|i| corpus::peano_family(i as f64 / 30.0, grid).unwrap()).collect();
    for pair in members.windows(2) {
        assert!(check_ordering(&pair[1], &pair[0]).unwrap().ordered);
    }
}

#[test]
fn every_oracle_is_a_solution() {
    for name in corpus::NAMES {
        let entry = corpus::get(name).unwrap();
        for oracle in &entry.oracles {
            let params: Vec<Option<f64>> = match oracle.parameter {
                None => vec![None],
                Some((lo, hi)) => (0..=4).map(|i| Some(lo + (hi - lo) * i as f64 / 4.0)).collect(),
            };
            for m in [500, 2000] {
                let grid = GridSpec::effective(&entry.problem, m).unwrap();
                for &param in &params {
                    let g = oracle.sample(param, grid).unwrap();
                    let report = residual_functional(&entry.problem, &g).unwrap();
                    assert!(
                        report.value <= 2.0 * report.quadrature_slack,
                        "{name}/{} {param:?} m={m}: {} > 2 * {}",
                        oracle.name,
                        report.value,
                        report.quadrature_slack
                    );
                }
            }
        }
    }
}
