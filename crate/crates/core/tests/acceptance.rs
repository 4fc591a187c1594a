//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use dpgstar::acoustics::{AcousticsConfig, Goal};
use dpgstar::error_measures::{estimate_alpha_h, field_l2_error};
use dpgstar::experiments::{hconv, identity_suite, pde_checks, table1, Table1Row};
use dpgstar::lsq::{alpha_sweep, assemble_lsq, solve_lsq};
use dpgstar::mixed_core::{solve_mixed, IDENTITY_TOL};
use dpgstar::solver::{self, monolithic_system, Discretization, Method};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Reference values for the two-wavelength 2×2, p = 3 study: DPG `L²`,
/// DPG* `L²` and DPG* graph-norm errors in percent, dp = 0..6.
const TABLE1_REFERENCE: [[f64; 3]; 7] = [
    [40.57, 31.57, 284.28],
    [33.77, 17.03, 77.65],
    [33.51, 18.50, 33.04],
    [36.44, 34.58, 39.32],
    [37.20, 39.47, 42.17],
    [37.32, 40.45, 42.78],
    [37.38, 40.72, 42.96],
];

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

fn table1_criterion() -> Outcome {
    let rows = table1(
        AcousticsConfig::new(2.0, 40.0, 3, 0),
        2,
        2,
        &[0, 1, 2, 3, 4, 5, 6],
    )
    .map_err(|e| e.to_string())?;
    let dpg: Vec<f64> = rows.iter().map(|r| r.dpg_l2_pct).collect();
    let star: Vec<f64> = rows.iter().map(|r| r.dpgstar_l2_pct).collect();
    let graph: Vec<f64> = rows.iter().map(|r| r.dpgstar_graph_pct).collect();

    let mut failures = Vec::new();
    let dpg_min = argmin(&dpg);
    if !(1..=3).contains(&dpg_min) {
        failures.push(format!("DPG minimum at dp={dpg_min}"));
    }
    if (dpg[6] - 37.38).abs() > 3.0 {
        failures.push(format!("DPG dp=6 {:.2}", dpg[6]));
    }
    let star_min = argmin(&star);
    if !(1..=2).contains(&star_min) || star[star_min] > 22.0 {
        failures.push(format!(
            "DPG* minimum {:.2} at dp={star_min}",
            star[star_min]
        ));
    }
    if star[4..].iter().any(|&v| v < 1.7 * star[star_min]) {
        failures.push("DPG* dp>=4 below 1.7x minimum".into());
    }
    if (star[6] - 40.72).abs() > 4.0 {
        failures.push(format!("DPG* dp=6 {:.2}", star[6]));
    }
    if !(graph[0] > 150.0 && graph[1] < graph[0] && graph[2] < graph[1] && graph[2] < 40.0) {
        failures.push(format!(
            "graph column {:.2} {:.2} {:.2}",
            graph[0], graph[1], graph[2]
        ));
    }
    if (graph[6] - 42.96).abs() > 4.0 {
        failures.push(format!("graph dp=6 {:.2}", graph[6]));
    }

    let mut soft = 0;
    for (r, reference) in rows.iter().zip(TABLE1_REFERENCE) {
        let ours = [r.dpg_l2_pct, r.dpgstar_l2_pct, r.dpgstar_graph_pct];
        let dev: Vec<f64> = ours.iter().zip(reference).map(|(a, b)| a - b).collect();
        let within = dev.iter().all(|d| d.abs() <= 4.0);
        soft += within as usize;
        print_row(r, &dev, within);
    }
    let msg = format!(
        "DPG min dp={dpg_min}, DPG* min {:.2} at dp={star_min}, dp=6 {:.2}/{:.2}/{:.2}; {soft}/7 rows within 4 points (soft)",
        star[star_min], dpg[6], star[6], graph[6]
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", failures.join("; ")))
    }
}

fn print_row(r: &Table1Row, dev: &[f64], within: bool) {
    println!(
        "    dp={} dpg {:6.2} ({:+.2})  dpg* {:6.2} ({:+.2})  graph {:7.2} ({:+.2}) {}",
        r.dp,
        r.dpg_l2_pct,
        dev[0],
        r.dpgstar_l2_pct,
        dev[1],
        r.dpgstar_graph_pct,
        dev[2],
        if within { "" } else { "[outside 4 points]" }
    );
}

fn ten_wavelengths() -> Outcome {
    let mut errs = Vec::new();
    for dp in 1..=3 {
        let disc = Discretization::new(AcousticsConfig::new(10.0, 40.0, 3, dp), 10, 10)
            .map_err(|e| e.to_string())?;
        let (dpg, star) =
            solver::run_pair(&disc, &Goal::Manufactured, 0).map_err(|e| e.to_string())?;
        let a = field_l2_error(&disc, &dpg)
            .map_err(|e| e.to_string())?
            .l2_rel_pct;
        let b = field_l2_error(&disc, &star)
            .map_err(|e| e.to_string())?
            .l2_rel_pct;
        errs.push((a, b));
    }
    let (d1, s1) = errs[0];
    let (d2, s2) = errs[1];
    let (_, s3) = errs[2];
    let ok = s2 < d2
        && (s2 - 36.0).abs() <= 6.0
        && (d2 - 46.0).abs() <= 6.0
        && (s1 - 53.0).abs() <= 6.0
        && (d1 - 58.0).abs() <= 6.0
        && s3 >= s2 + 15.0;
    check(
        ok,
        format!("dp=1 dpg {d1:.2} dpg* {s1:.2}; dp=2 dpg {d2:.2} dpg* {s2:.2}; dp=3 dpg* {s3:.2}"),
    )
}

fn h_convergence() -> Outcome {
    let rows = hconv(
        AcousticsConfig::new(1.0, 40.0, 1, 1),
        &[1, 2, 3, 4],
        &[1],
        &[2, 4, 8, 16],
        Method::Dpg,
        40,
    )
    .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in 1..=4 {
        let series: Vec<_> = rows.iter().filter(|r| r.p == p).collect();
        let last = series.last().unwrap();
        let rate = last.rate_h.unwrap();
        if p <= 2 {
            ok &= rate >= p as f64 - 0.3 && rate <= p as f64 + 0.5;
            parts.push(format!("p={p} rate {rate:.2}"));
        } else {
            let cond = last.condition.ok_or("missing condition estimate")?;
            parts.push(format!("p={p} rate {rate:.2} (cond {cond:.2e})"));
        }
    }
    check(ok, parts.join(", "))
}

fn identity_criterion() -> Outcome {
    let rel = identity_suite(20240601, 100, 40).map_err(|e| e.to_string())?;
    let worst = rel
        .iter()
        .map(|r| r.worst_relative_violation)
        .fold(0.0, f64::max);
    let bad: Vec<&str> = rel
        .iter()
        .filter(|r| !r.passed || r.worst_relative_violation > IDENTITY_TOL)
        .map(|r| r.name)
        .collect();
    check(
        bad.is_empty() && rel.iter().all(|r| r.checks == 100),
        format!(
            "{} relations x 100 systems, worst relative violation {worst:.1e}; failing: {bad:?}",
            rel.len()
        ),
    )
}

fn pde_invariants() -> Outcome {
    let checks =
        pde_checks(AcousticsConfig::new(2.0, 40.0, 3, 1), 2, 11).map_err(|e| e.to_string())?;
    let bad: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    check(
        bad.is_empty(),
        format!("{} checks; failing: {bad:?}", checks.len()),
    )
}

fn alpha_h_mechanism() -> Outcome {
    let mut alphas = Vec::new();
    for dp in 0..=3 {
        let disc = Discretization::new(AcousticsConfig::new(2.0, 40.0, 3, dp), 2, 2)
            .map_err(|e| e.to_string())?;
        alphas.push(estimate_alpha_h(&disc).map_err(|e| e.to_string())?);
    }
    let ok = alphas.windows(2).all(|w| w[1] <= w[0]) && alphas[3] < alphas[0];
    check(ok, format!("alpha_h over dp=0..3: {alphas:.4?}"))
}

fn lsq_bridge() -> Outcome {
    let disc = Discretization::new(AcousticsConfig::new(2.0, 40.0, 3, 3), 2, 2)
        .map_err(|e| e.to_string())?;
    let rows = alpha_sweep(&disc, &[1.0, 0.1, 0.01, 0.001]).map_err(|e| e.to_string())?;
    let dist: Vec<f64> = rows.iter().map(|r| r.dist_to_lsq_l2).collect();
    let lsq = solve_lsq(&assemble_lsq(&disc, true).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let ok = dist.windows(2).all(|w| w[1] <= w[0])
        && lsq.constraint_residual <= 1e-9 * lsq.constraint_scale;
    check(
        ok,
        format!(
            "distances {dist:.4?}, constraint residual {:.1e} (scale {:.1e})",
            lsq.constraint_residual, lsq.constraint_scale
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let disc = Discretization::new(AcousticsConfig::new(2.0, 40.0, 1, 1), 1, 1)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for method in [Method::Dpg, Method::DpgStar] {
        let sys =
            monolithic_system(&disc, method, &Goal::Manufactured).map_err(|e| e.to_string())?;
        let mono = solve_mixed(&sys).map_err(|e| e.to_string())?;
        let b = solver::run(&disc, method, &Goal::Manufactured).map_err(|e| e.to_string())?;
        let psi = dpgstar::lsq::flatten_psi(&b.psi);
        worst = worst
            .max((&b.u - &mono.u).norm() / mono.u.norm())
            .max((&psi - &mono.psi).norm() / mono.psi.norm());
    }
    check(
        worst <= 1e-9,
        format!("max relative difference {worst:.1e}"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("table1", table1_criterion),
        ("ten_wavelengths", ten_wavelengths),
        ("h_convergence", h_convergence),
        ("identity_suite", identity_criterion),
        ("pde_invariants", pde_invariants),
        ("alpha_h", alpha_h_mechanism),
        ("lsq_bridge", lsq_bridge),
        ("oracle_equivalence", oracle_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {} {name}: PASS ({secs:.1}s) {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.1}s) {msg}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
