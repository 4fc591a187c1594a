//! Batch experiments behind the command-line interface.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::acoustics::{AcousticsConfig, Goal};
use crate::error::{Error, Result};
use crate::error_measures::{self, ErrorReport};
use crate::linalg::{self, CVec};
use crate::mixed_core::{self, random, IdentityReport, MixedSystem, RelationKind, RELATION_NAMES};
use crate::solver::{self, Discretization, Method, SolutionBundle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Row {
    pub dp: usize,
    pub dpg_l2_pct: f64,
    pub dpgstar_l2_pct: f64,
    pub dpgstar_graph_pct: f64,
}

/// DPG and DPG* errors for each enrichment `dp`.
pub fn table1(
    base: AcousticsConfig,
    nx: usize,
    ny: usize,
    dps: &[usize],
) -> Result<Vec<Table1Row>> {
    dps.iter()
        .map(|&dp| {
            let disc = Discretization::new(base.with_dp(dp), nx, ny)?;
            let (dpg, star) = solver::run_pair(&disc, &Goal::Manufactured, 0)?;
            let e_star = error_measures::field_l2_error(&disc, &star)?;
            Ok(Table1Row {
                dp,
                dpg_l2_pct: error_measures::field_l2_error(&disc, &dpg)?.l2_rel_pct,
                dpgstar_l2_pct: e_star.l2_rel_pct,
                dpgstar_graph_pct: e_star.graph_rel_pct.unwrap_or(f64::NAN),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HconvRow {
    pub p: usize,
    pub dp: usize,
    pub nx: usize,
    pub ndof_trial: usize,
    pub l2_err_pct: f64,
    /// Empty on the first row of each `(p, dp)` series.
    pub rate_h: Option<f64>,
    #[serde(skip)]
    pub condition: Option<f64>,
}

/// Uniform refinement study; rows in `(p, dp, nx)` order. The condition
/// estimate of `S` is computed when `condition_iterations > 0`.
pub fn hconv(
    base: AcousticsConfig,
    ps: &[usize],
    dps: &[usize],
    nxs: &[usize],
    method: Method,
    condition_iterations: usize,
) -> Result<Vec<HconvRow>> {
    if nxs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("mesh sizes must increase".into()));
    }
    let mut rows = Vec::new();
    for &p in ps {
        for &dp in dps {
            let mut prev: Option<(f64, f64)> = None;
            for &nx in nxs {
                let cfg = AcousticsConfig { p, dp, ..base };
                let disc = Discretization::new(cfg, nx, nx)?;
                let (dpg, star) =
                    solver::run_pair(&disc, &Goal::Manufactured, condition_iterations)?;
                let bundle = if method == Method::Dpg { &dpg } else { &star };
                let err = error_measures::field_l2_error(&disc, bundle)?.l2_rel_pct;
                let h = 1.0 / nx as f64;
                let rate_h = prev.map(|(h0, e0)| (e0 / err).ln() / (h0 / h).ln());
                prev = Some((h, err));
                rows.push(HconvRow {
                    p,
                    dp,
                    nx,
                    ndof_trial: disc.trial.total,
                    l2_err_pct: err,
                    rate_h,
                    condition: dpg.condition.map(|c| c.condition()),
                });
            }
        }
    }
    Ok(rows)
}

/// Worst case of one relation over the random systems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationSummary {
    pub name: &'static str,
    pub kind: RelationKind,
    pub checks: usize,
    pub worst_relative_violation: f64,
    pub passed: bool,
}

/// A PDE-level check `value ≤ tolerance · scale`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeCheck {
    pub name: String,
    pub value: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PdeCheck {
    fn new(name: impl Into<String>, value: f64, scale: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            scale,
            tolerance,
            passed: value <= tolerance * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitiesReport {
    pub seed: u64,
    pub systems: usize,
    pub max_dim: usize,
    pub relations: Vec<RelationSummary>,
    pub pde_checks: Vec<PdeCheck>,
    pub all_passed: bool,
}

/// Every relation of [`RELATION_NAMES`] evaluated on one random system.
pub fn random_system_report(rng: &mut ChaCha8Rng, max_dim: usize) -> Result<IdentityReport> {
    use rand::Rng;
    let (n, m) = random::dims(rng, max_dim);
    let sys = random::system(rng, n, m);
    let sol = mixed_core::solve_mixed(&sys)?;
    let mut report = mixed_core::verify_fundamental_identity(&sys, &sol)?;
    report.extend(mixed_core::verify_stability_bounds(&sys, &sol)?);

    let eps = rng.random_range(0.01..1.0);
    let psi_h = &sol.psi + random::vector(rng, n) * num_complex::Complex64::new(eps, 0.0);
    let u_h = &sol.u + random::vector(rng, m) * num_complex::Complex64::new(eps, 0.0);
    report.extend(mixed_core::aposteriori_bounds(&sys, &sol, &psi_h, &u_h)?);

    let u0 = random::vector(rng, m);
    let gram = random::gram(rng, n);
    let b = random::full_rank(rng, n, m);
    let load = &b * u0;
    let fine = MixedSystem::new(gram, b, load, CVec::zeros(m))?;
    let mc = rng.random_range(1..=m);
    let nc = rng.random_range(mc..=n);
    let coarse_trial = random::full_rank(rng, m, mc);
    let coarse_test = random::full_rank(rng, n, nc);
    report.extend(mixed_core::energy_error_identity(&fine, &coarse_trial, &coarse_test)?.report);
    Ok(report)
}

/// Random-system property suite.
pub fn identity_suite(seed: u64, systems: usize, max_dim: usize) -> Result<Vec<RelationSummary>> {
    if max_dim < 2 {
        return Err(Error::InvalidInput("max_dim must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<RelationSummary> = Vec::new();
    for _ in 0..systems {
        let report = random_system_report(&mut rng, max_dim)?;
        for r in report.records {
            let v = r.relative_violation();
            match out.iter_mut().find(|s| s.name == r.name) {
                Some(s) => {
                    s.checks += 1;
                    s.worst_relative_violation = s.worst_relative_violation.max(v);
                    s.passed &= r.passed;
                }
                None => out.push(RelationSummary {
                    name: r.name,
                    kind: r.kind,
                    checks: 1,
                    worst_relative_violation: v,
                    passed: r.passed,
                }),
            }
        }
    }
    out.sort_by_key(|s| RELATION_NAMES.iter().position(|n| *n == s.name));
    Ok(out)
}

fn random_goal(n: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random::vector(&mut rng, n)
}

/// Consistency, stiffness sharing, adjoint-load support, both discrete
/// equations and goal orthogonality for three goals.
pub fn pde_checks(cfg: AcousticsConfig, nx: usize, seed: u64) -> Result<Vec<PdeCheck>> {
    let disc = Discretization::new(cfg, nx, nx)?;
    let mut checks = Vec::new();

    let (worst, scale) = error_measures::consistency_residual(&disc)?;
    checks.push(PdeCheck::new("consistency", worst, scale, 1e-8));

    let manufactured = disc.adjoint_load(&Goal::Manufactured)?;
    let mask = disc.boundary_trace_mask();
    let off_support = manufactured
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| !m)
        .fold(0.0f64, |a, (v, _)| a.max(v.norm()));
    checks.push(PdeCheck::new(
        "adjoint_load_support",
        off_support,
        linalg::max_abs_vec(&manufactured),
        1e-10,
    ));

    let elements = solver::condense_all(&disc)?;
    let dpg = solver::assemble_global(
        &disc.trial,
        Arc::clone(&elements),
        &manufactured,
        Method::Dpg,
    )?;
    let other = solver::assemble_global(
        &disc.trial,
        solver::condense_all(&disc)?,
        &manufactured,
        Method::DpgStar,
    )?;
    let s = dpg.stiffness_dense();
    let s_other = other.stiffness_dense();
    let identical = s
        .iter()
        .zip(s_other.iter())
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    checks.push(PdeCheck::new(
        "stiffness_sharing",
        if identical { 0.0 } else { 1.0 },
        1.0,
        0.0,
    ));
    checks.push(PdeCheck::new(
        "stiffness_hermitian",
        linalg::hermitian_defect(&s),
        linalg::max_abs(&s),
        1e-12,
    ));

    let f = dpg.factorize()?;
    let primal = solver::solve_system(&dpg, &f, 0);
    checks.push(PdeCheck::new(
        "solve_residual",
        primal.residuals.stiffness_rel,
        1.0,
        1e-10,
    ));
    let (r, sc) = solver::first_equation_residual(&dpg, &primal);
    checks.push(PdeCheck::new("galerkin_orthogonality", r, sc, 1e-9));

    let goals = [
        ("manufactured", manufactured.clone()),
        (
            "uniform_pressure",
            disc.adjoint_load(&Goal::UniformPressure)?,
        ),
        ("random", random_goal(disc.trial.total, seed)),
    ];
    for (name, g) in goals {
        let gs = dpg.with_method(&disc.trial, Method::DpgStar, &g)?;
        let dual = solver::solve_system(&gs, &f, 0);
        checks.push(PdeCheck::new(
            format!("discrete_constraint_{name}"),
            dual.residuals.constraint_abs,
            dual.residuals.constraint_scale,
            1e-9,
        ));
        let o = error_measures::goal_orthogonality_check(&disc, &primal, &dual)?;
        checks.push(PdeCheck::new(
            format!("goal_b_{name}"),
            o.b_value,
            o.b_scale,
            1e-8,
        ));
        checks.push(PdeCheck::new(
            format!("goal_v_{name}"),
            o.v_value,
            o.v_scale,
            1e-8,
        ));
    }
    Ok(checks)
}

/// Full identity report: random-system suite plus PDE checks on the
/// two-wavelength 2×2, `p = 3`, `dp = 1` configuration.
pub fn identities(seed: u64, systems: usize, max_dim: usize) -> Result<IdentitiesReport> {
    let relations = identity_suite(seed, systems, max_dim)?;
    let pde = pde_checks(AcousticsConfig::new(2.0, 40.0, 3, 1), 2, seed)?;
    let all_passed = relations.iter().all(|r| r.passed) && pde.iter().all(|c| c.passed);
    Ok(IdentitiesReport {
        seed,
        systems,
        max_dim,
        relations,
        pde_checks: pde,
        all_passed,
    })
}

pub const SAMPLE_HEADER_DPG: [&str; 8] =
    ["x", "y", "re_p", "im_p", "re_u1", "im_u1", "re_u2", "im_u2"];
pub const SAMPLE_HEADER_DPGSTAR: [&str; 8] =
    ["x", "y", "re_q", "im_q", "re_v1", "im_v1", "re_v2", "im_v2"];

pub fn sample_header(method: Method) -> [&'static str; 8] {
    match method {
        Method::Dpg => SAMPLE_HEADER_DPG,
        Method::DpgStar => SAMPLE_HEADER_DPGSTAR,
    }
}

/// The approximated variable on an `n × n` uniform grid over the closed
/// unit square, `x` fastest.
pub fn sample_solution(
    disc: &Discretization,
    bundle: &SolutionBundle,
    n: usize,
) -> Result<Vec<[f64; 8]>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "sample grid must be at least 2, got {n}"
        )));
    }
    let step = 1.0 / (n - 1) as f64;
    let mut rows = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = [i as f64 * step, j as f64 * step];
            let v = bundle
                .primary_at(disc, x)
                .ok_or_else(|| Error::InvalidInput(format!("point {x:?} outside the mesh")))?;
            rows.push([
                x[0], x[1], v[0].re, v[0].im, v[1].re, v[1].im, v[2].re, v[2].im,
            ]);
        }
    }
    Ok(rows)
}

/// One solve with its error report.
pub fn solve(
    disc: &Discretization,
    method: Method,
    goal: &Goal,
) -> Result<(SolutionBundle, ErrorReport)> {
    let bundle = solver::run(disc, method, goal)?;
    let report = error_measures::field_l2_error(disc, &bundle)?;
    Ok((bundle, report))
}
