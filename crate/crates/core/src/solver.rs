//! Static condensation, global solve and back-substitution.
//!
//! The error representation `ψ` is eliminated element by element, giving the
//! Hermitian stiffness `S = Σ scatter(B_Kᴴ G_K⁻¹ B_K)` over all trial DOFs.
//! `S` is kept in element-block form. The factorization eliminates the
//! element-private field DOFs of every block and factors the remaining
//! skeleton system densely, which is an exact block Cholesky of `S`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::acoustics::{
    self, AcousticsConfig, ElementContribution, Goal, TensorBasis, TestBasis, TestValue,
};
use crate::error::{Error, Result, StageExt};
use crate::linalg::{self, CMat, CVec, Cholesky};
use crate::mesh::{build_mesh, Point, StructuredMesh};
use crate::par::Execution;
use crate::spaces::{build_test_layout_with, build_trial_layout, TestDofLayout, TrialDofLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Load in the first equation, `Ĝ = 0`.
    Dpg,
    /// Load in the second equation, `l = 0`.
    DpgStar,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dpg => "dpg",
            Method::DpgStar => "dpgstar",
        }
    }
}

/// Configuration, mesh and both DOF layouts.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub cfg: AcousticsConfig,
    pub mesh: StructuredMesh,
    pub trial: TrialDofLayout,
    pub test: TestDofLayout,
    pub exec: Execution,
}

impl Discretization {
    pub fn new(cfg: AcousticsConfig, nx: usize, ny: usize) -> Result<Self> {
        cfg.validate()?;
        let mesh = build_mesh(nx, ny)?;
        let trial = build_trial_layout(&mesh, cfg.p)?;
        let test = build_test_layout_with(&mesh, cfg.p, cfg.dp, cfg.test_family)?;
        Ok(Self {
            cfg,
            mesh,
            trial,
            test,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Element contributions (Gram, `B`, primal load) for every element.
    pub fn contributions(&self) -> Result<Vec<ElementContribution>> {
        self.exec.try_map(self.mesh.n_elements(), |k| {
            acoustics::assemble_element(&self.cfg, &self.mesh, k, &self.trial, &self.test, true)
        })
    }

    pub fn adjoint_load(&self, goal: &Goal) -> Result<CVec> {
        acoustics::assemble_load_adjoint(&self.cfg, &self.mesh, &self.trial, goal)
    }

    /// Marks the `p̂` DOFs on boundary edges (vertices included), indexed by
    /// global trial index.
    pub fn boundary_trace_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.trial.total];
        for e in self.mesh.boundary_edges() {
            for g in self.trial.edge_trace_dofs(&self.mesh, e) {
                mask[g] = true;
            }
        }
        mask
    }

    /// Number of elements whose local test space is smaller than the local
    /// trial space (the element Gram then cannot control all local trial DOFs).
    pub fn deficient_elements(&self) -> usize {
        self.trial
            .elements
            .iter()
            .filter(|e| e.len() > self.test.per_element())
            .count()
    }
}

/// One element after elimination of `ψ_K`.
#[derive(Debug, Clone)]
pub struct CondensedElement {
    pub element: usize,
    pub trial_map: Vec<usize>,
    pub test_offset: usize,
    pub gram: CMat,
    pub gram_chol: Cholesky,
    pub b_block: CMat,
    pub load_l: CVec,
    /// `S_K = B_Kᴴ G_K⁻¹ B_K`
    pub stiffness: CMat,
    /// `r_K = B_Kᴴ G_K⁻¹ l_K`
    pub rhs: CVec,
}

/// `S_K = B_Kᴴ G_K⁻¹ B_K` and `r_K = B_Kᴴ G_K⁻¹ l_K`.
pub fn condense_element(contrib: &ElementContribution) -> Result<CondensedElement> {
    let chol = Cholesky::factor(&contrib.gram).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value } => Error::ElementGram {
            element: contrib.element,
            pivot,
            value,
        },
        other => other,
    })?;
    let w = chol.forward_mat(&contrib.b_block);
    let mut stiffness = w.adjoint() * &w;
    linalg::hermitize(&mut stiffness);
    let mut y = contrib.load_l.clone();
    chol.forward_in_place(y.as_mut_slice());
    let rhs = w.adjoint() * y;
    Ok(CondensedElement {
        element: contrib.element,
        trial_map: contrib.trial_map.clone(),
        test_offset: contrib.test_offset,
        gram: contrib.gram.clone(),
        gram_chol: chol,
        b_block: contrib.b_block.clone(),
        load_l: contrib.load_l.clone(),
        stiffness,
        rhs,
    })
}

/// Condensed stiffness and right-hand side for one method.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub method: Method,
    pub n_trial: usize,
    /// Global indices below this are element-private field DOFs.
    pub n_fields: usize,
    pub elements: Arc<Vec<CondensedElement>>,
    pub rhs: CVec,
    pub load_g: CVec,
    pub exec: Execution,
}

/// Builds the global system; `load_g` is ignored (taken as zero) for DPG.
pub fn assemble_global(
    trial: &TrialDofLayout,
    elements: Arc<Vec<CondensedElement>>,
    load_g: &CVec,
    method: Method,
) -> Result<GlobalSystem> {
    let n = trial.total;
    if load_g.len() != n {
        return Err(Error::Dimension(format!(
            "Ĝ has length {}, trial space has {n}",
            load_g.len()
        )));
    }
    if elements.len() != trial.n_elements {
        return Err(Error::Dimension(format!(
            "{} condensed elements for {} mesh elements",
            elements.len(),
            trial.n_elements
        )));
    }
    let nf = trial.fields_per_element();
    for (k, el) in elements.iter().enumerate() {
        let expected = &trial.elements[k].global;
        if el.element != k || &el.trial_map != expected || el.stiffness.nrows() != expected.len() {
            return Err(Error::InvalidInput(format!(
                "index map of element {k} is inconsistent"
            )));
        }
        if el.trial_map[..nf]
            .iter()
            .enumerate()
            .any(|(i, &g)| g != k * nf + i)
            || el.trial_map[nf..].iter().any(|&g| g < trial.n_fields())
        {
            return Err(Error::InvalidInput(format!(
                "element {k} does not own its field block"
            )));
        }
    }
    let mut rhs = CVec::zeros(n);
    let load_g = match method {
        Method::Dpg => CVec::zeros(n),
        Method::DpgStar => load_g.clone(),
    };
    if method == Method::Dpg {
        for el in elements.iter() {
            for (i, &g) in el.trial_map.iter().enumerate() {
                rhs[g] += el.rhs[i];
            }
        }
    }
    rhs -= &load_g;
    Ok(GlobalSystem {
        method,
        n_trial: n,
        n_fields: trial.n_fields(),
        elements,
        rhs,
        load_g,
        exec: Execution::default(),
    })
}

impl GlobalSystem {
    /// `S x`.
    pub fn apply(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.n_trial);
        for el in self.elements.iter() {
            let local = CVec::from_iterator(el.trial_map.len(), el.trial_map.iter().map(|&g| x[g]));
            let sy = &el.stiffness * local;
            for (i, &g) in el.trial_map.iter().enumerate() {
                y[g] += sy[i];
            }
        }
        y
    }

    /// Dense `S`; only sensible for small meshes.
    pub fn stiffness_dense(&self) -> CMat {
        let mut s = CMat::zeros(self.n_trial, self.n_trial);
        for el in self.elements.iter() {
            for (j, &gj) in el.trial_map.iter().enumerate() {
                for (i, &gi) in el.trial_map.iter().enumerate() {
                    s[(gi, gj)] += el.stiffness[(i, j)];
                }
            }
        }
        s
    }

    pub fn factorize(&self) -> Result<Factorization> {
        Factorization::new(self)
    }

    /// Same stiffness, other method.
    pub fn with_method(
        &self,
        trial: &TrialDofLayout,
        method: Method,
        load_g: &CVec,
    ) -> Result<GlobalSystem> {
        Ok(
            assemble_global(trial, Arc::clone(&self.elements), load_g, method)?
                .with_execution(self.exec),
        )
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

/// Block factorization of `S`: per element a Cholesky factor of the field
/// block and `L_f⁻¹ S_ft`, plus a dense Cholesky of the skeleton Schur complement.
#[derive(Debug, Clone)]
pub struct Factorization {
    n_trial: usize,
    n_fields: usize,
    blocks: Vec<FieldBlock>,
    skeleton: Cholesky,
}

#[derive(Debug, Clone)]
struct FieldBlock {
    fields: std::ops::Range<usize>,
    skeleton_map: Vec<usize>,
    chol: Cholesky,
    coupling: CMat,
}

fn inf_sup(e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot, value } => Error::DiscreteInfSup { pivot, value },
        other => other,
    }
}

impl Factorization {
    fn new(gs: &GlobalSystem) -> Result<Self> {
        let n_skel = gs.n_trial - gs.n_fields;
        let partial: Vec<(FieldBlock, CMat)> = gs.exec.try_map(gs.elements.len(), |k| {
            let el = &gs.elements[k];
            let nf = el
                .trial_map
                .iter()
                .take_while(|&&g| g < gs.n_fields)
                .count();
            let nl = el.trial_map.len();
            let c = el.stiffness.view((0, 0), (nf, nf)).into_owned();
            let e = el.stiffness.view((0, nf), (nf, nl - nf)).into_owned();
            let chol =
                Cholesky::factor(&c).map_err(|e| inf_sup(e).at_stage("field elimination"))?;
            let coupling = chol.forward_mat(&e);
            let local =
                el.stiffness.view((nf, nf), (nl - nf, nl - nf)) - coupling.adjoint() * &coupling;
            let block = FieldBlock {
                fields: el.trial_map[0]..el.trial_map[0] + nf,
                skeleton_map: el.trial_map[nf..]
                    .iter()
                    .map(|&g| g - gs.n_fields)
                    .collect(),
                chol,
                coupling,
            };
            Ok((block, local))
        })?;
        let mut skel = CMat::zeros(n_skel, n_skel);
        let mut blocks = Vec::with_capacity(partial.len());
        for (block, local) in partial {
            for (j, &gj) in block.skeleton_map.iter().enumerate() {
                for (i, &gi) in block.skeleton_map.iter().enumerate() {
                    skel[(gi, gj)] += local[(i, j)];
                }
            }
            blocks.push(block);
        }
        linalg::hermitize(&mut skel);
        let skeleton =
            Cholesky::factor(&skel).map_err(|e| inf_sup(e).at_stage("skeleton factorization"))?;
        Ok(Self {
            n_trial: gs.n_trial,
            n_fields: gs.n_fields,
            blocks,
            skeleton,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_trial
    }

    /// Solves `S x = b`.
    pub fn solve(&self, b: &CVec) -> CVec {
        let mut t = CVec::from_iterator(
            self.n_trial - self.n_fields,
            b.iter().skip(self.n_fields).copied(),
        );
        let ys: Vec<CVec> = self
            .blocks
            .iter()
            .map(|blk| {
                let mut y = CVec::from_iterator(blk.fields.len(), blk.fields.clone().map(|g| b[g]));
                blk.chol.forward_in_place(y.as_mut_slice());
                let c = blk.coupling.adjoint() * &y;
                for (i, &g) in blk.skeleton_map.iter().enumerate() {
                    t[g] -= c[i];
                }
                y
            })
            .collect();
        self.skeleton.solve_in_place(t.as_mut_slice());
        let mut x = CVec::zeros(self.n_trial);
        for (blk, mut y) in self.blocks.iter().zip(ys) {
            let xt = CVec::from_iterator(
                blk.skeleton_map.len(),
                blk.skeleton_map.iter().map(|&g| t[g]),
            );
            y -= &blk.coupling * xt;
            blk.chol.backward_in_place(y.as_mut_slice());
            for (i, g) in blk.fields.clone().enumerate() {
                x[g] = y[i];
            }
        }
        for (i, v) in t.iter().enumerate() {
            x[self.n_fields + i] = *v;
        }
        x
    }
}

/// Solves `S U = rhs`.
pub fn solve_global(gs: &GlobalSystem) -> Result<CVec> {
    Ok(gs.factorize()?.solve(&gs.rhs))
}

/// `Ψ_K = G_K⁻¹(l_K − B_K U_K)` with `l_K = 0` for DPG*.
pub fn back_substitute(gs: &GlobalSystem, u: &CVec) -> Vec<CVec> {
    gs.elements
        .iter()
        .map(|el| {
            let local = CVec::from_iterator(el.trial_map.len(), el.trial_map.iter().map(|&g| u[g]));
            let mut r = -(&el.b_block * local);
            if gs.method == Method::Dpg {
                r += &el.load_l;
            }
            el.gram_chol.solve_in_place(r.as_mut_slice());
            r
        })
        .collect()
}

/// Largest and smallest eigenvalue estimates of `S` and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl ConditionEstimate {
    pub fn condition(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

fn start_vector(n: usize) -> CVec {
    CVec::from_iterator(
        n,
        (0..n).map(|i| Complex64::new(1.0 + (i % 7) as f64 / 7.0, (i % 3) as f64 / 5.0)),
    )
}

fn power_iteration(n: usize, iterations: usize, op: impl Fn(&CVec) -> CVec) -> f64 {
    let mut x = start_vector(n);
    x /= Complex64::new(x.norm(), 0.0);
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let y = op(&x);
        lambda = x.dotc(&y).re;
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / Complex64::new(norm, 0.0);
    }
    lambda
}

/// Power iteration on `S` and on `S⁻¹`.
pub fn condition_estimate(
    gs: &GlobalSystem,
    f: &Factorization,
    iterations: usize,
) -> ConditionEstimate {
    let lambda_max = power_iteration(gs.n_trial, iterations, |x| gs.apply(x));
    let inv = power_iteration(gs.n_trial, iterations, |x| f.solve(x));
    ConditionEstimate {
        lambda_max,
        lambda_min: 1.0 / inv,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `‖S U − rhs‖ / ‖rhs‖` (zero when `rhs = 0`).
    pub stiffness_rel: f64,
    /// `max_j |Σ_K conj(b(w_j, ψ_K)) − g_j|`.
    pub constraint_abs: f64,
    /// Scale of the terms summed in the constraint.
    pub constraint_scale: f64,
}

#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub method: Method,
    pub u: CVec,
    pub psi: Vec<CVec>,
    pub condition: Option<ConditionEstimate>,
    pub residuals: Residuals,
}

/// Global `Bᴴ Ψ` and the scale `Σ |B||Ψ|` of the same sums.
pub fn adjoint_action(gs: &GlobalSystem, psi: &[CVec]) -> (CVec, f64) {
    let mut out = CVec::zeros(gs.n_trial);
    let mut mag = vec![0.0; gs.n_trial];
    for (el, p) in gs.elements.iter().zip(psi) {
        let local = el.b_block.adjoint() * p;
        let abs_p: Vec<f64> = p.iter().map(|v| v.norm()).collect();
        for (j, &g) in el.trial_map.iter().enumerate() {
            out[g] += local[j];
            mag[g] += el
                .b_block
                .column(j)
                .iter()
                .zip(&abs_p)
                .map(|(b, a)| b.norm() * a)
                .sum::<f64>();
        }
    }
    (out, mag.into_iter().fold(0.0, f64::max))
}

fn residuals(gs: &GlobalSystem, u: &CVec, psi: &[CVec]) -> Residuals {
    let r = gs.apply(u) - &gs.rhs;
    let rn = gs.rhs.norm();
    let (bpsi, scale) = adjoint_action(gs, psi);
    let constraint_abs = linalg::max_abs_vec(&(bpsi - &gs.load_g));
    Residuals {
        stiffness_rel: if rn > 0.0 { r.norm() / rn } else { r.norm() },
        constraint_abs,
        constraint_scale: scale.max(linalg::max_abs_vec(&gs.load_g)),
    }
}

/// `max_i |l(v_i) − (ψ_h, v_i)_V − b(u_h, v_i)|` over all test functions
/// (with `l = 0` for DPG*) and the scale of the summed terms.
pub fn first_equation_residual(gs: &GlobalSystem, bundle: &SolutionBundle) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (el, psi) in gs.elements.iter().zip(&bundle.psi) {
        let local = CVec::from_iterator(
            el.trial_map.len(),
            el.trial_map.iter().map(|&j| bundle.u[j]),
        );
        let gpsi = &el.gram * psi;
        let bu = &el.b_block * local;
        let l = match gs.method {
            Method::Dpg => el.load_l.clone(),
            Method::DpgStar => CVec::zeros(psi.len()),
        };
        worst = worst.max(linalg::max_abs_vec(&(&l - &gpsi - &bu)));
        scale = scale
            .max(linalg::max_abs_vec(&l))
            .max(linalg::max_abs_vec(&gpsi))
            .max(linalg::max_abs_vec(&bu));
    }
    (worst, scale)
}

/// Solves, back-substitutes and records residuals for an assembled system.
pub fn solve_system(
    gs: &GlobalSystem,
    f: &Factorization,
    condition_iterations: usize,
) -> SolutionBundle {
    let u = f.solve(&gs.rhs);
    let psi = back_substitute(gs, &u);
    let residuals = residuals(gs, &u, &psi);
    let condition =
        (condition_iterations > 0).then(|| condition_estimate(gs, f, condition_iterations));
    SolutionBundle {
        method: gs.method,
        u,
        psi,
        condition,
        residuals,
    }
}

/// Condenses every element of a discretization.
pub fn condense_all(disc: &Discretization) -> Result<Arc<Vec<CondensedElement>>> {
    let contribs = disc.contributions().stage("element assembly")?;
    let condensed = disc
        .exec
        .try_map(contribs.len(), |k| condense_element(&contribs[k]))
        .stage("condensation")?;
    Ok(Arc::new(condensed))
}

/// The uncondensed global mixed system with block-diagonal Gram matrix.
/// Dense, so only meant for small meshes.
pub fn monolithic_system(
    disc: &Discretization,
    method: Method,
    goal: &Goal,
) -> Result<crate::mixed_core::MixedSystem> {
    let (nt, nu) = (disc.test.total(), disc.trial.total);
    let mut gram = CMat::zeros(nt, nt);
    let mut b = CMat::zeros(nt, nu);
    let mut l = CVec::zeros(nt);
    for c in disc.contributions()? {
        let o = c.test_offset;
        let n = c.gram.nrows();
        gram.view_mut((o, o), (n, n)).copy_from(&c.gram);
        for (j, &g) in c.trial_map.iter().enumerate() {
            let mut col = b.view_mut((o, g), (n, 1));
            col += c.b_block.column(j);
        }
        if method == Method::Dpg {
            l.rows_mut(o, n).copy_from(&c.load_l);
        }
    }
    let g = match method {
        Method::Dpg => CVec::zeros(nu),
        Method::DpgStar => disc.adjoint_load(goal)?,
    };
    crate::mixed_core::MixedSystem::new(crate::mixed_core::GramMatrix::new(gram)?, b, l, g)
}

/// Full pipeline for one method.
pub fn run(disc: &Discretization, method: Method, goal: &Goal) -> Result<SolutionBundle> {
    let elements = condense_all(disc)?;
    let load_g = match method {
        Method::Dpg => CVec::zeros(disc.trial.total),
        Method::DpgStar => disc.adjoint_load(goal).stage("adjoint load")?,
    };
    let gs = assemble_global(&disc.trial, elements, &load_g, method)?.with_execution(disc.exec);
    let f = gs.factorize()?;
    Ok(solve_system(&gs, &f, 0))
}

/// DPG and DPG* sharing one condensation and one factorization.
pub fn run_pair(
    disc: &Discretization,
    goal: &Goal,
    condition_iterations: usize,
) -> Result<(SolutionBundle, SolutionBundle)> {
    let elements = condense_all(disc)?;
    let load_g = disc.adjoint_load(goal).stage("adjoint load")?;
    let dpg =
        assemble_global(&disc.trial, elements, &load_g, Method::Dpg)?.with_execution(disc.exec);
    let star = dpg.with_method(&disc.trial, Method::DpgStar, &load_g)?;
    let f = dpg.factorize()?;
    Ok((
        solve_system(&dpg, &f, condition_iterations),
        solve_system(&star, &f, 0),
    ))
}

/// Evaluation of discrete solutions at physical points.
impl SolutionBundle {
    /// Discrete field triple `(p, u₁, u₂)` at `x` from the trial coefficients.
    pub fn fields_at(&self, disc: &Discretization, x: Point) -> Option<[Complex64; 3]> {
        let k = disc.mesh.locate(x)?;
        let el = &disc.mesh.elements[k];
        let basis = TensorBasis::new(disc.cfg.p - 1);
        let (xi, eta) = (
            (x[0] - el.origin[0]) / el.size[0],
            (x[1] - el.origin[1]) / el.size[1],
        );
        Some(field_values(
            &self.u,
            &disc.trial,
            &basis,
            k,
            xi,
            eta,
            el.size,
        ))
    }

    /// `ψ_h = (q, v₁, v₂)` at `x`.
    pub fn psi_at(&self, disc: &Discretization, x: Point) -> Option<[Complex64; 3]> {
        let k = disc.mesh.locate(x)?;
        let el = &disc.mesh.elements[k];
        let basis = TestBasis::new(&disc.test);
        let (xi, eta) = (
            (x[0] - el.origin[0]) / el.size[0],
            (x[1] - el.origin[1]) / el.size[1],
        );
        let tv = test_combination(
            &acoustics::test_basis_values(&basis, el, xi, eta),
            &self.psi[k],
        );
        Some(tv.l2())
    }

    /// The variable the method approximates: fields for DPG, `ψ_h` for DPG*.
    pub fn primary_at(&self, disc: &Discretization, x: Point) -> Option<[Complex64; 3]> {
        match self.method {
            Method::Dpg => self.fields_at(disc, x),
            Method::DpgStar => self.psi_at(disc, x),
        }
    }
}

/// `(p, u₁, u₂)` of element `k` at reference point `(ξ, η)`.
pub fn field_values(
    u: &CVec,
    trial: &TrialDofLayout,
    basis: &TensorBasis,
    k: usize,
    xi: f64,
    eta: f64,
    size: [f64; 2],
) -> [Complex64; 3] {
    let (v, _) = basis.eval(xi, eta, size);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = v
            .iter()
            .enumerate()
            .map(|(i, &b)| u[trial.field(k, c, i)] * b)
            .sum();
    }
    out
}

/// `Σ_i c_i φ_i` of test basis values.
pub fn test_combination(values: &[TestValue], coeffs: &CVec) -> TestValue {
    let mut out = TestValue::zero();
    for (tv, &c) in values.iter().zip(coeffs.iter()) {
        out.q += tv.q * c;
        out.v[0] += tv.v[0] * c;
        out.v[1] += tv.v[1] * c;
        out.grad_q[0] += tv.grad_q[0] * c;
        out.grad_q[1] += tv.grad_q[1] * c;
        out.div_v += tv.div_v * c;
    }
    out
}
