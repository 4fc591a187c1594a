//! Weakly conforming least squares.
//!
//! Minimize `‖A*ψ − g‖²` over the broken test space subject to orthogonality
//! of the jumps to the trace space:
//!
//! ```text
//! [ G₀  T ] [ψ]   [ (g, A*φ) ]
//! [ Tᴴ  0 ] [û] = [    c     ]
//! ```
//!
//! `G₀` is the pure graph Gram, `T` the trace columns of `B`. DPG* with the
//! scaled graph norm `‖A*·‖² + α‖·‖²` approaches this problem as `α → 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::acoustics::{self, Goal, TestBasis, TestNorm};
use crate::error::{Error, Result, StageExt};
use crate::linalg::{self, CMat, CVec};
use crate::solver::{self, Discretization, Method};
use crate::spaces::gauss_rule;

/// Global trace pairing matrix `T` (test × trace DOFs): the `p̂` and `û·n`
/// columns of `B`, assembled by the same element routine.
pub fn constraint_matrix(disc: &Discretization) -> Result<CMat> {
    let n_trace = disc.trial.total - disc.trial.n_fields();
    let blocks = disc.exec.try_map(disc.mesh.n_elements(), |k| {
        acoustics::assemble_element_b(&disc.cfg, &disc.mesh, k, &disc.trial, &disc.test)
    })?;
    let mut t = CMat::zeros(disc.test.total(), n_trace);
    for (k, b) in blocks.iter().enumerate() {
        let dofs = &disc.trial.elements[k];
        let off = disc.test.offset(k);
        for (j, &g) in dofs.global.iter().enumerate().skip(dofs.n_fields) {
            let col = g - disc.trial.n_fields();
            for i in 0..b.nrows() {
                t[(off + i, col)] += b[(i, j)];
            }
        }
    }
    Ok(t)
}

/// Block-diagonal global Gram of the given test norm.
pub fn global_gram(disc: &Discretization, norm: Option<TestNorm>) -> Result<CMat> {
    let blocks = disc.exec.try_map(disc.mesh.n_elements(), |k| {
        let el = &disc.mesh.elements[k];
        match norm {
            Some(n) => acoustics::assemble_element_gram(&disc.cfg.with_norm(n), el, &disc.test),
            None => acoustics::assemble_element_mass(&disc.cfg, el, &disc.test),
        }
    })?;
    let n = disc.test.total();
    let mut g = CMat::zeros(n, n);
    for (k, b) in blocks.iter().enumerate() {
        let off = disc.test.offset(k);
        g.view_mut((off, off), b.shape()).copy_from(b);
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct LsqSystem {
    pub g0: CMat,
    pub t: CMat,
    pub rhs_top: CVec,
    pub c: CVec,
}

/// `(A*ψ*, A*φ_i)` summed over elements with the plane-wave `ψ*`.
fn manufactured_rhs_top(disc: &Discretization) -> Result<CVec> {
    let wave = disc.cfg.plane_wave();
    let basis = TestBasis::new(&disc.test);
    let omega = disc.cfg.omega;
    let mut out = CVec::zeros(disc.test.total());
    for (k, el) in disc.mesh.elements.iter().enumerate() {
        let rule = gauss_rule(disc.cfg.oscillatory_points(el.diameter()))?.tensor();
        let jac = el.size[0] * el.size[1];
        let off = disc.test.offset(k);
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let a = wave.as_test(el.map(pt[0], pt[1])).adjoint(omega);
            for (i, tv) in acoustics::test_basis_values(&basis, el, pt[0], pt[1])
                .iter()
                .enumerate()
            {
                let ai = tv.adjoint(omega);
                let s: Complex64 = (0..3).map(|c| a[c] * ai[c].conj()).sum();
                out[off + i] += s * (w * jac);
            }
        }
    }
    Ok(out)
}

/// Saddle system for the manufactured plane wave (`manufactured = true`) or
/// with zero data.
pub fn assemble_lsq(disc: &Discretization, manufactured: bool) -> Result<LsqSystem> {
    let g0 = global_gram(disc, Some(TestNorm::PureGraph))?;
    let t = constraint_matrix(disc)?;
    let (rhs_top, c) = if manufactured {
        let g = disc.adjoint_load(&Goal::Manufactured)?;
        let nf = disc.trial.n_fields();
        (
            manufactured_rhs_top(disc)?,
            CVec::from_iterator(g.len() - nf, g.iter().skip(nf).copied()),
        )
    } else {
        (CVec::zeros(t.nrows()), CVec::zeros(t.ncols()))
    };
    Ok(LsqSystem { g0, t, rhs_top, c })
}

/// Eigenvalue sign counts of a Hermitian matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone)]
pub struct LsqSolution {
    /// Global test-space coefficients.
    pub psi: CVec,
    pub multiplier: CVec,
    pub constraint_residual: f64,
    pub constraint_scale: f64,
    pub inertia: Inertia,
}

impl LsqSystem {
    pub fn saddle(&self) -> CMat {
        let (n, m) = self.t.shape();
        let mut k = CMat::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&self.g0);
        k.view_mut((0, n), (n, m)).copy_from(&self.t);
        k.view_mut((n, 0), (m, n)).copy_from(&self.t.adjoint());
        k
    }
}

pub fn inertia(a: &CMat) -> Inertia {
    let ev = linalg::hermitian_eigenvalues(a);
    let tol = 1e-12 * ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Inertia {
        positive: ev.iter().filter(|&&v| v > tol).count(),
        negative: ev.iter().filter(|&&v| v < -tol).count(),
        zero: ev.iter().filter(|&&v| v.abs() <= tol).count(),
    }
}

pub fn solve_lsq(ls: &LsqSystem) -> Result<LsqSolution> {
    let (n, m) = ls.t.shape();
    let k = ls.saddle();
    let inertia = inertia(&k);
    if inertia.positive != n || inertia.negative != m {
        return Err(Error::Singular(format!(
            "saddle inertia ({}, {}, {}) differs from ({n}, {m}, 0)",
            inertia.positive, inertia.negative, inertia.zero
        )));
    }
    let mut rhs = CVec::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&ls.rhs_top);
    rhs.rows_mut(n, m).copy_from(&ls.c);
    let x = DMatrix::lu(k)
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("least-squares saddle system".into()))?;
    let psi = x.rows(0, n).into_owned();
    let multiplier = x.rows(n, m).into_owned();
    let r = ls.t.adjoint() * &psi - &ls.c;
    let scale = (0..m)
        .map(|j| {
            ls.t.column(j)
                .iter()
                .zip(psi.iter())
                .map(|(t, p)| t.norm() * p.norm())
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max)
        .max(linalg::max_abs_vec(&ls.c));
    Ok(LsqSolution {
        psi,
        multiplier,
        constraint_residual: linalg::max_abs_vec(&r),
        constraint_scale: scale,
        inertia,
    })
}

/// Concatenates per-element test coefficients in global test order.
pub fn flatten_psi(psi: &[CVec]) -> CVec {
    CVec::from_iterator(
        psi.iter().map(|p| p.len()).sum(),
        psi.iter().flat_map(|p| p.iter().copied()),
    )
}

/// Splits global test coefficients per element.
pub fn split_psi(disc: &Discretization, psi: &CVec) -> Vec<CVec> {
    let n = disc.test.per_element();
    (0..disc.mesh.n_elements())
        .map(|k| psi.rows(disc.test.offset(k), n).into_owned())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    /// `‖ψ_α − ψ_lsq‖_{L²}`
    pub dist_to_lsq_l2: f64,
    pub dpgstar_l2_err_pct: f64,
    pub lsq_l2_err_pct: f64,
}

/// DPG* with the scaled graph norm for each `α`, compared with least squares.
pub fn alpha_sweep(disc: &Discretization, alphas: &[f64]) -> Result<Vec<AlphaRow>> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidInput(
            "alphas must be positive and finite".into(),
        ));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(
            "alphas must be strictly descending".into(),
        ));
    }
    let ls = assemble_lsq(disc, true)?;
    let lsq = solve_lsq(&ls).stage("least squares")?;
    let mass = global_gram(disc, None)?;
    let lsq_split = split_psi(disc, &lsq.psi);
    let lsq_err = crate::error_measures::psi_l2_error(disc, &lsq_split)?;
    alphas
        .iter()
        .map(|&alpha| {
            let d = Discretization {
                cfg: disc.cfg.with_norm(TestNorm::ScaledGraph(alpha)),
                ..disc.clone()
            };
            let b = solver::run(&d, Method::DpgStar, &Goal::Manufactured)?;
            let diff = flatten_psi(&b.psi) - &lsq.psi;
            let dist = diff.dotc(&(&mass * &diff)).re.max(0.0).sqrt();
            Ok(AlphaRow {
                alpha,
                dist_to_lsq_l2: dist,
                dpgstar_l2_err_pct: crate::error_measures::psi_l2_error(disc, &b.psi)?,
                lsq_l2_err_pct: lsq_err,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::AcousticsConfig;

    fn disc(nx: usize, p: usize, dp: usize) -> Discretization {
        Discretization::new(AcousticsConfig::new(2.0, 40.0, p, dp), nx, nx).unwrap()
    }

    #[test]
    fn single_element_has_no_flux_columns() {
        let d = disc(1, 2, 1);
        let t = constraint_matrix(&d).unwrap();
        assert_eq!(t.ncols(), d.trial.n_traces());
        assert_eq!(d.trial.n_fluxes(), 0);
    }

    #[test]
    fn manufactured_data_structure() {
        let d = disc(2, 3, 1);
        let ls = assemble_lsq(&d, true).unwrap();
        let scale = linalg::max_abs(&ls.g0);
        assert!(linalg::max_abs_vec(&ls.rhs_top) <= 1e-10 * scale);
        let cmax = linalg::max_abs_vec(&ls.c);
        let mesh = &d.mesh;
        let nf = d.trial.n_fields();
        for e in mesh.interior_edges() {
            for g in d.trial.edge_flux_dofs(e).unwrap() {
                assert!(ls.c[g - nf].norm() <= 1e-10 * cmax);
            }
        }
        assert!(linalg::hermitian_defect(&ls.saddle()) == 0.0);
    }

    #[test]
    fn zero_data_and_linearity() {
        let d = disc(2, 2, 1);
        let ls = assemble_lsq(&d, false).unwrap();
        let s = solve_lsq(&ls).unwrap();
        assert!(s.psi.iter().all(|v| v.norm() == 0.0));
        let mut ls = assemble_lsq(&d, true).unwrap();
        let s1 = solve_lsq(&ls).unwrap();
        assert!(s1.constraint_residual <= 1e-9 * s1.constraint_scale);
        ls.c *= Complex64::new(2.0, 0.0);
        ls.rhs_top *= Complex64::new(2.0, 0.0);
        let s2 = solve_lsq(&ls).unwrap();
        let diff = (&s2.psi - &s1.psi * Complex64::new(2.0, 0.0)).norm();
        assert!(diff <= 1e-9 * s2.psi.norm());
    }

    #[test]
    fn sweep_rejects_bad_alphas() {
        let d = disc(1, 1, 0);
        assert!(alpha_sweep(&d, &[0.1, 1.0]).is_err());
        assert!(alpha_sweep(&d, &[]).is_err());
        assert!(alpha_sweep(&d, &[1.0, -1.0]).is_err());
    }
}
