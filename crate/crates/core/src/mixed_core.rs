//! The abstract mixed problem
//!
//! ```text
//!   G Ψ + B U = L
//!   Bᴴ Ψ      = Ĝ
//! ```
//!
//! as dense matrices, together with the norms it induces and the identities
//! and estimates its solution satisfies. Here `G` is the Gram (Riesz) matrix
//! of the test inner product, `B_ij = b(u_j, v_i)`, `L_i = l(v_i)` and
//! `Ĝ_j = g(u_j)`. The block matrix `[[G, B], [Bᴴ, 0]]` is Hermitian.
//!
//! Norms used below, all computed exactly through factorizations:
//!
//! - `‖f‖_{V'}  = sqrt(fᴴ G⁻¹ f)` (dual test norm),
//! - `‖w‖_E     = ‖B w‖_{V'}` (energy norm on trial coefficients),
//! - `‖g‖_{U'}  = sqrt(gᴴ S⁻¹ g)`, `S = Bᴴ G⁻¹ B` (its dual).

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, Cholesky};
use crate::Complex64;

/// Relative tolerance for identities and inequalities.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Hermitian positive definite test-space Gram matrix.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: CMat,
}

impl GramMatrix {
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension("Gram matrix must be square".into()));
        }
        let defect = linalg::hermitian_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "Gram matrix is not Hermitian (relative defect {defect:e})"
            )));
        }
        Cholesky::factor(&matrix)?;
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMat::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn factor(&self) -> Result<Cholesky> {
        Cholesky::factor(&self.matrix)
    }

    /// `‖x‖_G = sqrt(xᴴ G x)`.
    pub fn norm(&self, x: &CVec) -> f64 {
        quadratic(&self.matrix, x).max(0.0).sqrt()
    }
}

fn quadratic(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

#[derive(Debug, Clone)]
pub struct MixedSystem {
    pub gram: GramMatrix,
    pub b_matrix: CMat,
    pub load_l: CVec,
    pub load_g: CVec,
}

impl MixedSystem {
    pub fn new(gram: GramMatrix, b_matrix: CMat, load_l: CVec, load_g: CVec) -> Result<Self> {
        let n = gram.dim();
        let m = b_matrix.ncols();
        if b_matrix.nrows() != n {
            return Err(Error::Dimension(format!(
                "B has {} rows, Gram has dimension {n}",
                b_matrix.nrows()
            )));
        }
        if m > n {
            return Err(Error::Dimension(format!(
                "trial dimension {m} exceeds test dimension {n}"
            )));
        }
        if load_l.len() != n || load_g.len() != m {
            return Err(Error::Dimension(format!(
                "loads have lengths ({}, {}), expected ({n}, {m})",
                load_l.len(),
                load_g.len()
            )));
        }
        Ok(Self {
            gram,
            b_matrix,
            load_l,
            load_g,
        })
    }

    pub fn test_dim(&self) -> usize {
        self.gram.dim()
    }

    pub fn trial_dim(&self) -> usize {
        self.b_matrix.ncols()
    }

    /// Factorizations of `G` and of the Schur complement `S = Bᴴ G⁻¹ B`.
    pub fn factors(&self) -> Result<MixedFactors> {
        let gram = self.gram.factor()?;
        let g_inv_b = gram.solve_mat(&self.b_matrix);
        let mut schur = self.b_matrix.adjoint() * &g_inv_b;
        linalg::hermitize(&mut schur);
        let schur_chol = Cholesky::factor(&schur).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot, value } => Error::DiscreteInfSup { pivot, value },
            other => other,
        })?;
        Ok(MixedFactors {
            gram,
            g_inv_b,
            schur,
            schur_chol,
        })
    }
}

/// Cached factorizations for one [`MixedSystem`].
#[derive(Debug, Clone)]
pub struct MixedFactors {
    pub gram: Cholesky,
    /// `G⁻¹ B`
    pub g_inv_b: CMat,
    /// `S = Bᴴ G⁻¹ B`
    pub schur: CMat,
    pub schur_chol: Cholesky,
}

impl MixedFactors {
    /// Spectral condition number of `S`, a proxy for the discrete inf-sup
    /// constant in the energy norm.
    pub fn schur_condition(&self) -> f64 {
        let ev = linalg::hermitian_eigenvalues(&self.schur);
        match (ev.first(), ev.last()) {
            (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub psi: CVec,
    pub u: CVec,
    /// `max |GΨ + BU − L|`
    pub res1: f64,
    /// `max |BᴴΨ − Ĝ|`
    pub res2: f64,
}

impl MixedSolution {
    /// Residual tolerance scaled by the magnitudes entering each equation.
    pub fn residuals_within(&self, sys: &MixedSystem, tol: f64) -> bool {
        let mg = linalg::max_abs(sys.gram.matrix());
        let mb = linalg::max_abs(&sys.b_matrix);
        let mp = linalg::max_abs_vec(&self.psi);
        let mu = linalg::max_abs_vec(&self.u);
        let s1 = linalg::max_abs_vec(&sys.load_l) + mg * mp + mb * mu;
        let s2 = linalg::max_abs_vec(&sys.load_g) + mb * mp;
        self.res1 <= tol * s1.max(f64::MIN_POSITIVE) && self.res2 <= tol * s2.max(f64::MIN_POSITIVE)
    }
}

/// Solves the mixed system through the normal equation
/// `S U = Bᴴ G⁻¹ L − Ĝ`, then `Ψ = G⁻¹ (L − B U)`.
pub fn solve_mixed(sys: &MixedSystem) -> Result<MixedSolution> {
    let f = sys.factors()?;
    Ok(solve_with(sys, &f))
}

pub fn solve_with(sys: &MixedSystem, f: &MixedFactors) -> MixedSolution {
    let g_inv_l = f.gram.solve_vec(&sys.load_l);
    let rhs = sys.b_matrix.adjoint() * &g_inv_l - &sys.load_g;
    let u = f.schur_chol.solve_vec(&rhs);
    let psi = g_inv_l - &f.g_inv_b * &u;
    let r1 = sys.gram.matrix() * &psi + &sys.b_matrix * &u - &sys.load_l;
    let r2 = sys.b_matrix.adjoint() * &psi - &sys.load_g;
    MixedSolution {
        res1: linalg::max_abs_vec(&r1),
        res2: linalg::max_abs_vec(&r2),
        psi,
        u,
    }
}

/// `‖f‖_{V'} = sqrt(fᴴ G⁻¹ f)`.
pub fn dual_norm(gram: &GramMatrix, f: &CVec) -> Result<f64> {
    Ok(gram.factor()?.inverse_quadratic_form(f).sqrt())
}

/// `‖w‖_E = ‖B w‖_{V'}`.
pub fn energy_norm(sys: &MixedSystem, w: &CVec) -> Result<f64> {
    dual_norm(&sys.gram, &(&sys.b_matrix * w))
}

/// `‖g‖_{U'} = sqrt(gᴴ S⁻¹ g)`, the norm dual to [`energy_norm`].
pub fn dual_energy_norm(sys: &MixedSystem, g: &CVec) -> Result<f64> {
    Ok(sys.factors()?.schur_chol.inverse_quadratic_form(g).sqrt())
}

/// `Ψ = Ψ₀ + Ψ⊥` with `Ψ₀ ∈ null(Bᴴ)` and `Ψ⊥ ∈ G⁻¹ range(B)`, orthogonal in
/// the `G` inner product.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    pub psi0: CVec,
    pub psi_perp: CVec,
}

pub fn kernel_decompose(sys: &MixedSystem, psi: &CVec) -> Result<KernelSplit> {
    let f = sys.factors()?;
    Ok(kernel_decompose_with(sys, &f, psi))
}

fn kernel_decompose_with(sys: &MixedSystem, f: &MixedFactors, psi: &CVec) -> KernelSplit {
    let y = f.schur_chol.solve_vec(&(sys.b_matrix.adjoint() * psi));
    let psi_perp = &f.g_inv_b * y;
    KernelSplit {
        psi0: psi - &psi_perp,
        psi_perp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    /// `lhs = rhs`
    Identity,
    /// `lhs ≤ rhs`
    Inequality,
}

/// One checked relation. All quantities are in the units the relation is
/// stated in (squared norms for the quadratic ones).
#[derive(Debug, Clone, Serialize)]
pub struct IdentityRecord {
    pub name: &'static str,
    pub kind: RelationKind,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|` for identities, 0 otherwise.
    pub gap: f64,
    /// `rhs − lhs` for inequalities, 0 otherwise.
    pub slack: f64,
    /// Lower bound on the scale violations are measured against.
    pub data_scale: f64,
    pub passed: bool,
}

impl IdentityRecord {
    fn identity(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self::identity_scaled(name, lhs, rhs, 0.0)
    }

    /// Identity whose sides may both vanish; `scale` is the size of the data
    /// the two sides are built from.
    fn identity_scaled(name: &'static str, lhs: f64, rhs: f64, scale: f64) -> Self {
        let gap = (lhs - rhs).abs();
        Self {
            name,
            kind: RelationKind::Identity,
            lhs,
            rhs,
            gap,
            slack: 0.0,
            data_scale: scale,
            passed: gap <= IDENTITY_TOL * lhs.abs().max(rhs.abs()).max(scale),
        }
    }

    fn inequality(name: &'static str, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name,
            kind: RelationKind::Inequality,
            lhs,
            rhs,
            gap: 0.0,
            slack,
            data_scale: 0.0,
            passed: slack >= -IDENTITY_TOL * lhs.abs().max(rhs.abs()),
        }
    }

    /// Gap (identity) or deficit (inequality) relative to the larger side,
    /// floored by `data_scale`.
    pub fn relative_violation(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs()).max(self.data_scale);
        let v = match self.kind {
            RelationKind::Identity => self.gap,
            RelationKind::Inequality => (-self.slack).max(0.0),
        };
        if scale == 0.0 {
            v
        } else {
            v / scale
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IdentityReport {
    pub records: Vec<IdentityRecord>,
}

impl IdentityReport {
    pub fn get(&self, name: &str) -> Option<&IdentityRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn extend(&mut self, other: IdentityReport) {
        self.records.extend(other.records);
    }
}

/// Names of every relation checked by this module, in report order.
pub const RELATION_NAMES: [&str; 10] = [
    "pythagoras",
    "dual_norm",
    "fundamental",
    "combined_bound",
    "combined_aposteriori",
    "energy_bound",
    "energy_aposteriori",
    "psi_bound",
    "psi_aposteriori",
    "nested_energy",
];

/// Norms of the data and of a solution that every check below is built from.
struct SolutionNorms {
    l: f64,
    g: f64,
    psi: f64,
    bu: f64,
}

fn solution_norms(sys: &MixedSystem, f: &MixedFactors, sol: &MixedSolution) -> SolutionNorms {
    SolutionNorms {
        l: f.gram.inverse_quadratic_form(&sys.load_l).sqrt(),
        g: f.schur_chol.inverse_quadratic_form(&sys.load_g).sqrt(),
        psi: sys.gram.norm(&sol.psi),
        bu: f
            .gram
            .inverse_quadratic_form(&(&sys.b_matrix * &sol.u))
            .sqrt(),
    }
}

/// Checks the Pythagoras relation `‖Ψ₀‖² + ‖BU‖²_{V'} = ‖L − GΨ⊥‖²_{V'}`,
/// the dual-norm identity `‖Ĝ‖_{U'} = ‖Ψ⊥‖_G` and their sum
/// `‖Ψ‖² + ‖BU‖²_{V'} = ‖L − GΨ⊥‖²_{V'} + ‖Ĝ‖²_{U'}`.
pub fn verify_fundamental_identity(
    sys: &MixedSystem,
    sol: &MixedSolution,
) -> Result<IdentityReport> {
    let f = sys.factors()?;
    let split = kernel_decompose_with(sys, &f, &sol.psi);
    let n = solution_norms(sys, &f, sol);
    let psi0_sq = sys.gram.norm(&split.psi0).powi(2);
    let perp = sys.gram.norm(&split.psi_perp);
    let shifted = &sys.load_l - sys.gram.matrix() * &split.psi_perp;
    let shifted_sq = f.gram.inverse_quadratic_form(&shifted);
    let data = n.l + n.g;

    Ok(IdentityReport {
        records: vec![
            IdentityRecord::identity_scaled(
                "pythagoras",
                psi0_sq + n.bu * n.bu,
                shifted_sq,
                data * data,
            ),
            IdentityRecord::identity_scaled("dual_norm", n.g, perp, data),
            IdentityRecord::identity(
                "fundamental",
                n.psi * n.psi + n.bu * n.bu,
                shifted_sq + n.g * n.g,
            ),
        ],
    })
}

/// A-priori stability bounds of the exact solution in terms of the data.
pub fn verify_stability_bounds(sys: &MixedSystem, sol: &MixedSolution) -> Result<IdentityReport> {
    let f = sys.factors()?;
    let n = solution_norms(sys, &f, sol);
    Ok(IdentityReport {
        records: vec![
            IdentityRecord::inequality(
                "combined_bound",
                n.psi * n.psi + n.bu * n.bu,
                (n.l + n.g).powi(2) + n.g * n.g,
            ),
            IdentityRecord::inequality("energy_bound", n.bu, n.l + n.g),
            IdentityRecord::inequality("psi_bound", n.psi * n.psi, n.l * n.l + n.g * n.g),
        ],
    })
}

/// A-posteriori estimates for an arbitrary approximation `(Ψ_h, U_h)` of the
/// exact solution `sol`, in terms of the residuals of both equations.
pub fn aposteriori_bounds(
    sys: &MixedSystem,
    sol: &MixedSolution,
    psi_h: &CVec,
    u_h: &CVec,
) -> Result<IdentityReport> {
    if psi_h.len() != sys.test_dim() || u_h.len() != sys.trial_dim() {
        return Err(Error::Dimension("approximation has wrong shape".into()));
    }
    let f = sys.factors()?;
    let r1 = &sys.load_l - sys.gram.matrix() * psi_h - &sys.b_matrix * u_h;
    let r2 = &sys.load_g - sys.b_matrix.adjoint() * psi_h;
    let r1 = f.gram.inverse_quadratic_form(&r1).sqrt();
    let r2 = f.schur_chol.inverse_quadratic_form(&r2).sqrt();
    let e_psi = sys.gram.norm(&(&sol.psi - psi_h));
    let e_u = f
        .gram
        .inverse_quadratic_form(&(&sys.b_matrix * (&sol.u - u_h)))
        .sqrt();
    Ok(IdentityReport {
        records: vec![
            IdentityRecord::inequality(
                "combined_aposteriori",
                e_psi * e_psi + e_u * e_u,
                (r1 + r2).powi(2) + r2 * r2,
            ),
            IdentityRecord::inequality("energy_aposteriori", e_u, r1 + r2),
            IdentityRecord::inequality("psi_aposteriori", e_psi * e_psi, r1 * r1 + r2 * r2),
        ],
    })
}

/// Result of a coarse (nested) solve used by [`energy_error_identity`].
#[derive(Debug, Clone)]
pub struct NestedSolve {
    /// Coarse `Ψ_h` expressed in fine test coordinates.
    pub psi_h: CVec,
    /// Coarse `U_h` expressed in fine trial coordinates.
    pub u_h: CVec,
    pub report: IdentityReport,
}

/// For a fine system whose exact `Ψ` vanishes (`Ĝ = 0`, `L ∈ range(B)`),
/// solves the mixed problem on the subspaces spanned by the columns of
/// `coarse_trial` (m × m_c) and `coarse_test` (n × n_c), and checks
///
/// `‖B(U − U_h)‖²_{V'} = ‖L − GΨ_h − BU_h‖²_{V'} + ‖Ψ_h‖²_G`
///
/// with all norms taken in the fine spaces.
pub fn energy_error_identity(
    fine: &MixedSystem,
    coarse_trial: &CMat,
    coarse_test: &CMat,
) -> Result<NestedSolve> {
    if coarse_trial.nrows() != fine.trial_dim() || coarse_test.nrows() != fine.test_dim() {
        return Err(Error::Dimension(
            "coarse bases do not match fine spaces".into(),
        ));
    }
    let ff = fine.factors()?;
    let exact = solve_with(fine, &ff);
    let l_norm = ff.gram.inverse_quadratic_form(&fine.load_l).sqrt();
    let psi_norm = fine.gram.norm(&exact.psi);
    if linalg::max_abs_vec(&fine.load_g) > 0.0
        || psi_norm > IDENTITY_TOL * l_norm.max(f64::MIN_POSITIVE)
    {
        return Err(Error::Precondition(format!(
            "fine solution has nonzero error representation (‖Ψ‖ = {psi_norm:e}, ‖L‖ = {l_norm:e}); \
             requires Ĝ = 0 and L in range(B)"
        )));
    }
    let coarse = MixedSystem::new(
        GramMatrix {
            matrix: coarse_test.adjoint() * fine.gram.matrix() * coarse_test,
        },
        coarse_test.adjoint() * &fine.b_matrix * coarse_trial,
        coarse_test.adjoint() * &fine.load_l,
        CVec::zeros(coarse_trial.ncols()),
    )?;
    let cs = solve_mixed(&coarse)?;
    let psi_h = coarse_test * &cs.psi;
    let u_h = coarse_trial * &cs.u;

    let err = ff
        .gram
        .inverse_quadratic_form(&(&fine.b_matrix * (&exact.u - &u_h)));
    let resid = &fine.load_l - fine.gram.matrix() * &psi_h - &fine.b_matrix * &u_h;
    let resid = ff.gram.inverse_quadratic_form(&resid);
    let psi_sq = fine.gram.norm(&psi_h).powi(2);
    Ok(NestedSolve {
        psi_h,
        u_h,
        report: IdentityReport {
            records: vec![IdentityRecord::identity_scaled(
                "nested_energy",
                err,
                resid + psi_sq,
                l_norm * l_norm,
            )],
        },
    })
}

/// Random valid mixed systems for property checks.
pub mod random {
    use super::*;

    fn entry<R: Rng>(rng: &mut R) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    pub fn vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| entry(rng))
    }

    pub fn matrix<R: Rng>(rng: &mut R, n: usize, m: usize) -> CMat {
        CMat::from_fn(n, m, |_, _| entry(rng))
    }

    /// `G = MᴴM + n·I`.
    pub fn gram<R: Rng>(rng: &mut R, n: usize) -> GramMatrix {
        let m = matrix(rng, n, n);
        let mut g = m.adjoint() * &m + CMat::identity(n, n) * Complex64::new(n as f64, 0.0);
        linalg::hermitize(&mut g);
        GramMatrix { matrix: g }
    }

    /// An `n × m` matrix whose smallest singular value exceeds `1e-6`.
    pub fn full_rank<R: Rng>(rng: &mut R, n: usize, m: usize) -> CMat {
        loop {
            let b = matrix(rng, n, m);
            let ev = linalg::hermitian_eigenvalues(&(b.adjoint() * &b));
            if ev.first().is_none_or(|&l| l.max(0.0).sqrt() > 1e-6) {
                return b;
            }
        }
    }

    pub fn system<R: Rng>(rng: &mut R, n: usize, m: usize) -> MixedSystem {
        let gram = gram(rng, n);
        let b = full_rank(rng, n, m);
        let l = vector(rng, n);
        let g = vector(rng, m);
        MixedSystem::new(gram, b, l, g).expect("consistent shapes")
    }

    /// Random dimensions with `2 ≤ n ≤ max_n` and `1 ≤ m < n`.
    pub fn dims<R: Rng>(rng: &mut R, max_n: usize) -> (usize, usize) {
        let n = rng.random_range(2..=max_n);
        let m = rng.random_range(1..n);
        (n, m)
    }
}
