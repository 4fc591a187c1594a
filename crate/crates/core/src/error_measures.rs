//! Error norms, convergence rates, the discrete boundedness-below constant
//! and goal-orientation checks.
//!
//! Relative errors are in percent of the exact-solution norm over the unit
//! square, which is `√2` both in `L²` and in the adjoint graph norm.

use num_complex::Complex64;
use serde::Serialize;

use crate::acoustics::{self, TensorBasis, TestBasis, TestNorm, TestValue};
use crate::error::{Error, Result};
use crate::linalg::{self, CVec};
use crate::lsq;
use crate::solver::{self, Discretization, Method, SolutionBundle};
use crate::spaces::gauss_rule;

/// `‖(p*, u*)‖` over the unit square in `L²` and in the adjoint graph norm.
pub const EXACT_NORM: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub l2_rel_pct: f64,
    /// DPG* only.
    pub graph_rel_pct: Option<f64>,
    /// Absolute `L²` errors of the three components.
    pub components: [f64; 3],
    pub l2_denominator: f64,
}

/// `100 ‖exact − discrete‖ / ‖exact‖` over `Ω` for any discrete triple given
/// per element at reference coordinates.
pub fn l2_error_of<F>(disc: &Discretization, discrete: F) -> Result<ErrorReport>
where
    F: Fn(usize, f64, f64) -> [Complex64; 3],
{
    let wave = disc.cfg.plane_wave();
    let mut comps = [0.0; 3];
    for (k, el) in disc.mesh.elements.iter().enumerate() {
        let rule = gauss_rule(disc.cfg.oscillatory_points(el.diameter()))?.tensor();
        let jac = el.size[0] * el.size[1];
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let x = el.map(pt[0], pt[1]);
            let u = wave.velocity(x);
            let exact = [wave.pressure(x), u[0], u[1]];
            let d = discrete(k, pt[0], pt[1]);
            for c in 0..3 {
                comps[c] += w * jac * (exact[c] - d[c]).norm_sqr();
            }
        }
    }
    let total = comps.iter().sum::<f64>().sqrt();
    Ok(ErrorReport {
        l2_rel_pct: 100.0 * total / EXACT_NORM,
        graph_rel_pct: None,
        components: comps.map(f64::sqrt),
        l2_denominator: EXACT_NORM,
    })
}

/// `L²` error of per-element test-space coefficients against the plane wave.
pub fn psi_l2_error(disc: &Discretization, psi: &[CVec]) -> Result<f64> {
    let basis = TestBasis::new(&disc.test);
    Ok(l2_error_of(disc, |k, xi, eta| {
        let el = &disc.mesh.elements[k];
        solver::test_combination(&acoustics::test_basis_values(&basis, el, xi, eta), &psi[k]).l2()
    })?
    .l2_rel_pct)
}

/// Field error for DPG (`p, u`) or `ψ_h` error for DPG* (`q, v`).
pub fn field_l2_error(disc: &Discretization, bundle: &SolutionBundle) -> Result<ErrorReport> {
    match bundle.method {
        Method::Dpg => {
            let basis = TensorBasis::new(disc.cfg.p - 1);
            l2_error_of(disc, |k, xi, eta| {
                let el = &disc.mesh.elements[k];
                solver::field_values(&bundle.u, &disc.trial, &basis, k, xi, eta, el.size)
            })
        }
        Method::DpgStar => {
            let basis = TestBasis::new(&disc.test);
            let mut r = l2_error_of(disc, |k, xi, eta| {
                let el = &disc.mesh.elements[k];
                solver::test_combination(
                    &acoustics::test_basis_values(&basis, el, xi, eta),
                    &bundle.psi[k],
                )
                .l2()
            })?;
            r.graph_rel_pct = Some(graph_norm_error_of(disc, &bundle.psi)?);
            Ok(r)
        }
    }
}

/// `100 ‖ψ* − ψ_h‖_V / ‖ψ*‖_V` in the broken adjoint graph norm.
pub fn graph_norm_error_of(disc: &Discretization, psi: &[CVec]) -> Result<f64> {
    graph_error_with(disc, |k, xi, eta, basis| {
        let el = &disc.mesh.elements[k];
        solver::test_combination(&acoustics::test_basis_values(basis, el, xi, eta), &psi[k])
    })
}

fn graph_error_with<F>(disc: &Discretization, discrete: F) -> Result<f64>
where
    F: Fn(usize, f64, f64, &TestBasis) -> TestValue,
{
    let wave = disc.cfg.plane_wave();
    let basis = TestBasis::new(&disc.test);
    let omega = disc.cfg.omega;
    let mut sum = 0.0;
    for (k, el) in disc.mesh.elements.iter().enumerate() {
        let rule = gauss_rule(disc.cfg.oscillatory_points(el.diameter()))?.tensor();
        let jac = el.size[0] * el.size[1];
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let e = wave.as_test(el.map(pt[0], pt[1]));
            let d = discrete(k, pt[0], pt[1], &basis);
            let (ae, ad) = (e.adjoint(omega), d.adjoint(omega));
            let (le, ld) = (e.l2(), d.l2());
            let s: f64 = (0..3)
                .map(|c| (ae[c] - ad[c]).norm_sqr() + (le[c] - ld[c]).norm_sqr())
                .sum();
            sum += w * jac * s;
        }
    }
    Ok(100.0 * sum.sqrt() / EXACT_NORM)
}

/// Graph-norm error of a DPG* run.
pub fn graph_norm_error(disc: &Discretization, bundle: &SolutionBundle) -> Result<f64> {
    if bundle.method != Method::DpgStar {
        return Err(Error::Precondition(
            "graph-norm error needs a dpgstar run".into(),
        ));
    }
    graph_norm_error_of(disc, &bundle.psi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rates {
    /// `log(e_i/e_{i+1}) / log(h_i/h_{i+1})`
    pub h: Vec<f64>,
    /// `log(e_i/e_{i+1}) / log(N_{i+1}/N_i)`
    pub dof: Vec<f64>,
    pub h_least_squares: f64,
    pub dof_least_squares: f64,
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Rates from `(h, N, error)` triples ordered by decreasing `h`.
pub fn convergence_rates(series: &[(f64, usize, f64)]) -> Result<Rates> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("rates need at least two points".into()));
    }
    if series
        .iter()
        .any(|&(h, n, e)| !(h > 0.0 && e > 0.0 && n > 0))
    {
        return Err(Error::InvalidInput(
            "h, N and errors must be positive".into(),
        ));
    }
    if series.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidInput("h must strictly decrease".into()));
    }
    let rate = |a: f64, b: f64, ea: f64, eb: f64| (ea / eb).ln() / (a / b).ln();
    let h = series
        .windows(2)
        .map(|w| rate(w[0].0, w[1].0, w[0].2, w[1].2))
        .collect();
    let dof = series
        .windows(2)
        .map(|w| rate(w[1].1 as f64, w[0].1 as f64, w[0].2, w[1].2))
        .collect();
    let le: Vec<f64> = series.iter().map(|s| s.2.ln()).collect();
    let lh: Vec<f64> = series.iter().map(|s| s.0.ln()).collect();
    let ln: Vec<f64> = series.iter().map(|s| (s.1 as f64).ln()).collect();
    Ok(Rates {
        h,
        dof,
        h_least_squares: ls_slope(&lh, &le),
        dof_least_squares: -ls_slope(&ln, &le),
    })
}

/// `b(𝔲* − 𝔲_h, φ_h)` and `(ψ_h, φ_h)_V` with their natural scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoalOrthogonality {
    pub b_value: f64,
    pub b_scale: f64,
    pub v_value: f64,
    pub v_scale: f64,
}

impl GoalOrthogonality {
    pub fn within(&self, tol: f64) -> bool {
        self.b_value <= tol * self.b_scale && self.v_value <= tol * self.v_scale
    }
}

/// `primal` must be a DPG run and `dual` a DPG* run on `disc`.
pub fn goal_orthogonality_check(
    disc: &Discretization,
    primal: &SolutionBundle,
    dual: &SolutionBundle,
) -> Result<GoalOrthogonality> {
    if primal.method != Method::Dpg || dual.method != Method::DpgStar {
        return Err(Error::Precondition(
            "expected a dpg primal and a dpgstar dual run".into(),
        ));
    }
    let ne = disc.mesh.n_elements();
    if primal.u.len() != disc.trial.total || dual.psi.len() != ne || primal.psi.len() != ne {
        return Err(Error::Precondition(
            "runs do not match the discretization".into(),
        ));
    }
    let mut b_sum = Complex64::new(0.0, 0.0);
    let mut b_scale = 0.0;
    let mut v_sum = Complex64::new(0.0, 0.0);
    let (mut psi_sq, mut phi_sq) = (0.0, 0.0);
    for k in 0..ne {
        let el = &disc.mesh.elements[k];
        let b = acoustics::assemble_element_b(&disc.cfg, &disc.mesh, k, &disc.trial, &disc.test)?;
        let g = acoustics::assemble_element_gram(&disc.cfg, el, &disc.test)?;
        let c = acoustics::exact_trial_action(&disc.cfg, &disc.mesh, k, &disc.test)?;
        let dofs = &disc.trial.elements[k];
        let uk = CVec::from_iterator(dofs.len(), dofs.global.iter().map(|&j| primal.u[j]));
        let bu = &b * uk;
        let phi = &dual.psi[k];
        if phi.len() != c.len() {
            return Err(Error::Precondition(
                "runs do not match the discretization".into(),
            ));
        }
        b_sum += phi.dotc(&(&c - &bu));
        b_scale += phi
            .iter()
            .zip(c.iter().zip(bu.iter()))
            .map(|(f, (ci, bi))| f.norm() * (ci.norm() + bi.norm()))
            .sum::<f64>();
        let gpsi = &g * &primal.psi[k];
        v_sum += phi.dotc(&gpsi);
        psi_sq += primal.psi[k].dotc(&gpsi).re;
        phi_sq += phi.dotc(&(&g * phi)).re;
    }
    Ok(GoalOrthogonality {
        b_value: b_sum.norm(),
        b_scale,
        v_value: v_sum.norm(),
        v_scale: (psi_sq.max(0.0) * phi_sq.max(0.0)).sqrt(),
    })
}

/// `max_i |l(v_i) − b(𝔲*, v_i)|` and the scale `max_i |l(v_i)|`.
pub fn consistency_residual(disc: &Discretization) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..disc.mesh.n_elements() {
        let l = acoustics::assemble_load_primal(&disc.cfg, &disc.mesh, k, &disc.test)?;
        let c = acoustics::exact_trial_action(&disc.cfg, &disc.mesh, k, &disc.test)?;
        worst = worst.max(linalg::max_abs_vec(&(&l - &c)));
        scale = scale
            .max(linalg::max_abs_vec(&l))
            .max(linalg::max_abs_vec(&c));
    }
    Ok((worst, scale))
}

/// Pure graph Gram, `L²` Gram and an orthonormal basis of the weakly
/// conforming test functions (null space of `Tᴴ`).
pub struct WeakConformity {
    pub graph: linalg::CMat,
    pub mass: linalg::CMat,
    pub null_basis: linalg::CMat,
}

pub fn weak_conformity(disc: &Discretization) -> Result<WeakConformity> {
    let graph = lsq::global_gram(disc, Some(TestNorm::PureGraph))?;
    let mass = lsq::global_gram(disc, None)?;
    let t = lsq::constraint_matrix(disc)?;
    let null_basis = linalg::adjoint_null_space(&t)?;
    if null_basis.ncols() == 0 {
        return Err(Error::Precondition(
            "no weakly conforming test functions".into(),
        ));
    }
    Ok(WeakConformity {
        graph,
        mass,
        null_basis,
    })
}

/// `α_h = min ‖A*(q,v)‖ / ‖(q,v)‖` over weakly conforming discrete test functions.
pub fn estimate_alpha_h(disc: &Discretization) -> Result<f64> {
    let wc = weak_conformity(disc)?;
    let n = &wc.null_basis;
    let a = n.adjoint() * &wc.graph * n;
    let m = n.adjoint() * &wc.mass * n;
    Ok(linalg::min_generalized_eigenvalue(&a, &m)?.max(0.0).sqrt())
}
