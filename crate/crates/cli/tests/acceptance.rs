//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::panic;
use std::process::Command;

use peano_core::bounds::{
    check_ordering, check_quasimonotone, goodman_chain, linear_envelopes, verify, SegmentOptions,
    DEFAULT_DELTA_STRICT,
};
use peano_core::corpus::{self, GridSpec};
use peano_core::extremal::{doubling_schedule, greatest_solution, integral_rank, least_solution};
use peano_core::gridfn::GridFunction;
use peano_core::integrators::{euler_with_drift, solve, Method};
use peano_core::residual::{is_solution, residual_functional};
use peano_core::rhs_lang::{BinaryOp, Function};
use peano_core::{BoundKind, Expr, IvpProblem};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const KS: [usize; 6] = [2, 4, 8, 16, 32, 64];
const EXTREMAL_GRID: usize = 4096;
const EXTREMAL_TOL: f64 = 1e-3;

fn ensure(cond: bool, message: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn peano() -> IvpProblem {
    corpus::get("peano_cubed").unwrap().problem
}

fn extremal_pair() -> (peano_core::ExtremalResult, peano_core::ExtremalResult) {
    let schedule = doubling_schedule(4, 1024).unwrap();
    let p = peano();
    (
        greatest_solution(&p, &schedule, EXTREMAL_GRID, EXTREMAL_TOL).unwrap(),
        least_solution(&p, &schedule, EXTREMAL_GRID, EXTREMAL_TOL).unwrap(),
    )
}

fn tonelli_certificate() -> Outcome {
    let mut worst_ratio = 0.0f64;
    for name in ["linear_unit", "peano_cubed", "blowup_tan"] {
        let p = corpus::get(name).unwrap().problem;
        for k in KS {
            let (_, cert) = solve(&p, Method::Tonelli, k, 100 * k).map_err(|e| e.to_string())?;
            let bound = cert.bound_lc_over_k.unwrap();
            ensure(
                cert.residual <= bound + cert.quadrature_slack,
                format!("{name} k={k}: residual {} > {bound} + {}", cert.residual, cert.quadrature_slack),
            )?;
            if name == "linear_unit" {
                let exact = cert.c / k as f64;
                ensure(
                    (cert.residual - exact).abs() <= 1e-12,
                    format!("linear_unit k={k}: residual {} vs c/k = {exact}", cert.residual),
                )?;
            }
            worst_ratio = worst_ratio.max(cert.residual / (bound + cert.quadrature_slack));
        }
    }
    Ok(format!("18 runs, largest residual / (Lc/k + slack) = {worst_ratio:.4}"))
}

fn extremal_reproduction() -> Outcome {
    let (greatest, least) = extremal_pair();
    let c = 1.0 / 3.0;
    let cube = GridFunction::sample(0.0, c, EXTREMAL_GRID, 1, |t| vec![t * t * t]).unwrap();
    let zero = GridFunction::constant(0.0, c, EXTREMAL_GRID, &[0.0]).unwrap();
    let dg = greatest.approx.sup_distance(&cube).unwrap();
    let dl = least.approx.sup_distance(&zero).unwrap();
    let violation = greatest.monotonicity_violation.max(least.monotonicity_violation);
    ensure(dg <= 2e-2, format!("greatest is {dg} from t^3"))?;
    ensure(dl <= 2e-2, format!("least is {dl} from 0"))?;
    ensure(violation <= 1e-6, format!("ladder monotonicity violation {violation}"))?;
    Ok(format!(
        "|greatest - t^3| = {dg:.5}, |least - 0| = {dl:.2e}, violation = {violation:e} (k = 4..1024, m = {EXTREMAL_GRID})"
    ))
}

fn integral_characterization() -> Outcome {
    let p = peano();
    let grid = GridSpec::effective(&p, EXTREMAL_GRID).unwrap();
    let t2s = [0.0, 1.0 / 12.0, 1.0 / 6.0, 0.25, 1.0 / 3.0];
    let family: Vec<GridFunction> = t2s.iter().map(|&t2| corpus::peano_family(t2, grid).unwrap()).collect();
    let ranked = integral_rank(&p, &family).map_err(|e| e.to_string())?;
    ensure(
        ranked.iter().map(|r| r.0).eq(0..t2s.len()),
        format!("rank order {:?}", ranked.iter().map(|r| r.0).collect::<Vec<_>>()),
    )?;
    ensure(ranked.windows(2).all(|w| w[0].1 > w[1].1), "integrals not strictly decreasing")?;
    let mut worst = 0.0f64;
    for &(i, value) in &ranked {
        let hand = (1.0 / 3.0 - t2s[i]).powi(4) / 4.0;
        worst = worst.max((value - hand).abs());
    }
    ensure(worst <= 1e-6, format!("integral off the hand value by {worst}"))?;
    Ok(format!("order t2 = 0 < 1/12 < 1/6 < 1/4 < 1/3, max |I - (1/3 - t2)^4/4| = {worst:.2e}"))
}

fn first_time_in_message(stderr: &str) -> Option<f64> {
    let start = stderr.find("t=")? + 2;
    let rest = &stderr[start..];
    let end = rest.find([')', ':', ' ']).unwrap_or(rest.len());
    rest[..end].parse().ok()
}

fn blowup_nonexistence() -> Outcome {
    let p = corpus::get("blowup_tan").unwrap().problem;
    let (g, _) = solve(&p, Method::Tonelli, 64, 6400).map_err(|e| e.to_string())?;
    let terminal = g.node(g.steps())[0];
    let error = (terminal - 0.5f64.tan()).abs();
    let part_a = error <= 5e-3;

    let dir = tempfile::tempdir().unwrap();
    let limit = std::f64::consts::FRAC_PI_2 + 0.1;
    let mut latest = 0.0f64;
    let mut part_b = Ok(());
    'runs: for bound in [2.0, 10.0, 1e3, 1e6, 1e100] {
        let path = dir.path().join(format!("tan_{bound:e}.json"));
        let text = format!(
            r#"{{"label":"tan_unbounded","t0":0,"y0":[0],"a":{},"b":"inf","L":{bound:e},"rhs":["1+y1^2"]}}"#,
            std::f64::consts::PI
        );
        std::fs::write(&path, text).unwrap();
        let variants: [&[&str]; 2] = [
            &["--method", "euler", "--grid", "6400"],
            &["--method", "tonelli", "--k", "1024", "--grid", "10240"],
        ];
        for args in variants {
            let out = Command::new(env!("CARGO_BIN_EXE_peano"))
                .arg("solve")
                .arg("--problem")
                .arg(&path)
                .args(args)
                .arg("--out")
                .arg(dir.path().join("traj.csv"))
                .arg("--report")
                .arg(dir.path().join("report.json"))
                .output()
                .unwrap();
            let stderr = String::from_utf8_lossy(&out.stderr);
            let t = first_time_in_message(&stderr);
            if out.status.code() != Some(3) || t.is_none_or(|t| t >= limit) {
                part_b = Err(format!(
                    "L={bound:e} {}: status {:?}, stopped at {t:?}: {}",
                    args[1],
                    out.status.code(),
                    stderr.trim()
                ));
                break 'runs;
            }
            latest = latest.max(t.unwrap());
        }
    }
    let detail = format!(
        "k=64 terminal {terminal:.6} vs tan(0.5) = 0.546302: error {error:.5} (limit 5e-3); \
         unbounded box: exit 3 by t = {latest:.4} < pi/2 + 0.1"
    );
    match (part_a, part_b) {
        (true, Ok(())) => Ok(detail),
        (_, Err(e)) => Err(format!("{detail}; {e}")),
        (false, Ok(())) => {
            let larger: Vec<String> = [128usize, 256]
                .iter()
                .map(|&k| {
                    let (g, _) = solve(&p, Method::Tonelli, k, 100 * k).unwrap();
                    format!("k={k}: {:.5}", (g.node(g.steps())[0] - 0.5f64.tan()).abs())
                })
                .collect();
            Err(format!("{detail}; error halves with k ({})", larger.join(", ")))
        }
    }
}

fn bracketing() -> Outcome {
    let p = peano();
    let m = EXTREMAL_GRID;
    let beta = euler_with_drift(&p, m, 1.0 / 8.0).unwrap();
    let alpha = GridFunction::constant(0.0, 1.0 / 3.0, m, &[0.0]).unwrap();
    let mut residuals = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let chain = goodman_chain(&p, &alpha, &beta, eps, SegmentOptions::default()).map_err(|e| e.to_string())?;
        let tol_chain = chain.residual.quadrature_slack + 1e-9;
        ensure(
            chain.residual.value < eps + tol_chain,
            format!("eps {eps}: residual {} >= eps + {tol_chain}", chain.residual.value),
        )?;
        for j in 0..=m {
            let v = chain.trajectory.node(j)[0];
            ensure(
                v >= alpha.node(j)[0] - 1e-9 && v <= beta.node(j)[0] + 1e-9,
                format!("eps {eps}: chain leaves [alpha, beta] at t = {}", chain.trajectory.time(j)),
            )?;
        }
        residuals.push(chain.residual.value);
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    ensure(
        ratios.iter().all(|r| (1.5..=2.5).contains(r)),
        format!("residuals {residuals:?}, halving ratios {ratios:?}"),
    )?;
    Ok(format!(
        "residuals {:.5} {:.5} {:.5}, halving ratios {:.3} {:.3}",
        residuals[0], residuals[1], residuals[2], ratios[0], ratios[1]
    ))
}

fn certificates() -> Outcome {
    let truncated = peano().truncate_rhs().unwrap();
    let (alpha, beta) = linear_envelopes(&truncated, 1000).unwrap();
    let cl = verify(&truncated, &alpha, BoundKind::Lower, false, DEFAULT_DELTA_STRICT).map_err(|e| e.to_string())?;
    let cu = verify(&truncated, &beta, BoundKind::Upper, false, DEFAULT_DELTA_STRICT).map_err(|e| e.to_string())?;
    ensure(cl.verdict && cu.verdict, "-+L t envelopes fail to verify")?;

    let p = peano();
    let (greatest, least) = extremal_pair();
    let mut worst_excess = f64::INFINITY;
    let mut passing_upper = Vec::new();
    let mut passing_lower = Vec::new();
    for (result, kind, store) in [
        (&greatest, BoundKind::Upper, &mut passing_upper),
        (&least, BoundKind::Lower, &mut passing_lower),
    ] {
        for (k, rung) in &result.ladder {
            let cert = verify(&p, rung, kind, true, DEFAULT_DELTA_STRICT).map_err(|e| e.to_string())?;
            let half = 0.5 / *k as f64;
            ensure(
                cert.verdict && cert.worst_margin >= half,
                format!("{kind:?} rung k={k}: verdict {} margin {} < {half}", cert.verdict, cert.worst_margin),
            )?;
            worst_excess = worst_excess.min(cert.worst_margin * 2.0 * *k as f64);
            store.push(rung.clone());
        }
    }
    let mut pairs = 0;
    let mut smallest_gap = f64::INFINITY;
    for lower in &passing_lower {
        for upper in &passing_upper {
            let order = check_ordering(lower, upper).map_err(|e| e.to_string())?;
            ensure(order.interior_gap > 0.0, format!("strict pair with gap {}", order.interior_gap))?;
            smallest_gap = smallest_gap.min(order.interior_gap);
            pairs += 1;
        }
    }
    Ok(format!(
        "envelopes verify; {} rungs strict with margin >= {:.3} / (2k); {pairs} strict pairs ordered, min gap {smallest_gap:.2e}",
        passing_lower.len() + passing_upper.len(),
        worst_excess
    ))
}

fn dominance() -> Outcome {
    let p = peano();
    let (greatest, least) = extremal_pair();
    let (alpha, beta) = linear_envelopes(&p.truncate_rhs().unwrap(), EXTREMAL_GRID).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for delta in [0.05, 0.1, 0.2] {
        for (sign, kind) in [(-1.0, BoundKind::Lower), (1.0, BoundKind::Upper)] {
            let raw = euler_with_drift(&p, EXTREMAL_GRID, sign * delta).map_err(|e| e.to_string())?;
            let clamped = raw.zip_with(&alpha, f64::max).unwrap().zip_with(&beta, f64::min).unwrap();
            let cert = verify(&p, &clamped, kind, false, DEFAULT_DELTA_STRICT).map_err(|e| e.to_string())?;
            ensure(cert.verdict, format!("generated {kind:?} solution (delta {delta}) fails to verify"))?;
            let extremal = if kind == BoundKind::Lower { &greatest.approx } else { &least.approx };
            for j in 0..=EXTREMAL_GRID {
                // excess of the generated solution beyond the extremal one
                let excess = -sign * (clamped.node(j)[0] - extremal.node(j)[0]);
                worst = worst.max(excess);
                ensure(excess <= 2e-2, format!("{kind:?} delta {delta}: excess {excess} at node {j}"))?;
            }
        }
    }
    Ok(format!("6 generated solutions dominated, largest excess {worst:.2e}"))
}

fn quasimonotone_counterexample() -> Outcome {
    let entry = corpus::get("uncoupled_system").unwrap();
    let report = check_quasimonotone(&entry.problem, 10_000, 0).map_err(|e| e.to_string())?;
    let witness = report.witness.ok_or("no violation found")?;
    ensure(!report.verdict && witness.component == 2, format!("witness in component {}", witness.component))?;
    let c = 1.0 / 3.0;
    let grid = GridSpec::effective(&entry.problem, 3000).unwrap();
    let early = corpus::uncoupled_family(0.05, grid).unwrap();
    let late = corpus::uncoupled_family(0.15, grid).unwrap();
    let mut nodes = 0;
    for j in (0..=grid.m).filter(|&j| early.time(j) > 0.15 && early.time(j) <= c) {
        ensure(
            early.node(j)[0] > late.node(j)[0] && early.node(j)[1] < late.node(j)[1],
            format!("members comparable at t = {}", early.time(j)),
        )?;
        nodes += 1;
    }
    Ok(format!(
        "witness in component 2 after {} samples; members 0.05 and 0.15 cross-ordered on {nodes} nodes",
        report.samples_checked
    ))
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Number(n as f64 / 16.0)),
        Just(Expr::Time),
        (1usize..=3).prop_map(Expr::State),
    ];
    leaf.prop_recursive(6, 64, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop_oneof![Just(BinaryOp::Add), Just(BinaryOp::Sub), Just(BinaryOp::Mul), Just(BinaryOp::Div)],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (inner.clone(), -3i32..=4).prop_map(|(e, n)| Expr::Pow(Box::new(e), n)),
            (prop::sample::select(Function::ALL.to_vec()), prop::collection::vec(inner, 1..=3)).prop_map(
                |(f, mut args)| {
                    if f.is_variadic() {
                        if args.len() < 2 {
                            args.push(Expr::Time);
                        }
                    } else {
                        args.truncate(1);
                    }
                    Expr::Call(f, args)
                }
            ),
        ]
    })
}

fn oracle_soundness() -> Outcome {
    let mut checked = 0;
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
                    let g = oracle.sample(param, grid).map_err(|e| e.to_string())?;
                    let slack = residual_functional(&entry.problem, &g).map_err(|e| e.to_string())?.quadrature_slack;
                    ensure(
                        is_solution(&entry.problem, &g, 2.0 * slack).map_err(|e| e.to_string())?,
                        format!("{name}/{} {param:?} m={m} is not a solution", oracle.name),
                    )?;
                    checked += 1;
                }
            }
        }
    }

    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&expr_strategy(), |e| {
            let text = e.to_string();
            let back = Expr::parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
            prop_assert_eq!(back, e);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;
    Ok(format!("{checked} oracle samples are solutions; 1000 parse-print round trips"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("Tonelli residual certificate", tonelli_certificate),
        ("extremal solutions of y' = 3 y^(2/3)", extremal_reproduction),
        ("greatest-integral ranking", integral_characterization),
        ("blow-up and hypothesis failure", blowup_nonexistence),
        ("bracketed chain", bracketing),
        ("lower/upper certificates", certificates),
        ("dominance of generated lower/upper solutions", dominance),
        ("quasimonotone counterexample", quasimonotone_counterexample),
        ("oracle soundness and round trip", oracle_soundness),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(check).unwrap_or_else(|payload| {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {title}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {title}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
