//! Ultraweak time-harmonic acoustics on the unit square.
//!
//! Trial group `𝔲 = (p, u, p̂, û·n)`, broken test pair `𝔳 = (q, v)`:
//!
//! ```text
//! b(𝔲, 𝔳) = (p, iωq + div v) + (u, iωv + ∇q)
//!          + ⟨û·n, q⟩_{interior skeleton} + ⟨p̂, v·n⟩_{skeleton} + ⟨p̂, q⟩_{boundary}
//! ```
//!
//! with `(a, b) = ∫ a·conj(b)` and element-wise derivatives. The boundary
//! flux is eliminated through the impedance condition `p − u·n = g`.
//!
//! Under this conjugation convention the trace unknowns of the exact
//! solution are `p̂ = −p` and `û·n = −u·n` (global normal), and the load is
//! `l(𝔳) = −⟨g, q⟩_Γ`. [`exact_trial_action`] evaluates `b(𝔲*, ·)` for the
//! plane wave and is the consistency check for all of these signs.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, Cholesky};
use crate::mesh::{Element, Point, Side, StructuredMesh};
use crate::spaces::{
    gauss_rule, ElementTrialDofs, NodalBasis, QuadratureRule, TensorRule, TestDofLayout,
    TestFamily, TrialDofLayout,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Test inner product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestNorm {
    /// `‖A*(q,v)‖² + ‖(q,v)‖²`
    AdjointGraph,
    /// `‖q‖² + ‖∇q‖² + ‖v‖² + ‖div v‖²`
    Mathematician,
    /// `‖A*(q,v)‖² + α‖(q,v)‖²`
    ScaledGraph(f64),
    /// `‖A*(q,v)‖²` only; semidefinite on broken spaces.
    PureGraph,
}

impl TestNorm {
    fn parts(self) -> NormParts {
        match self {
            TestNorm::AdjointGraph => NormParts::Graph { l2_weight: 1.0 },
            TestNorm::ScaledGraph(a) => NormParts::Graph { l2_weight: a },
            TestNorm::PureGraph => NormParts::Graph { l2_weight: 0.0 },
            TestNorm::Mathematician => NormParts::Mathematician,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum NormParts {
    Graph { l2_weight: f64 },
    Mathematician,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcousticsConfig {
    /// Angular frequency (radians per unit length).
    pub omega: f64,
    pub angle_deg: f64,
    /// Trial order (fields are order `p − 1`, `p̂` order `p`).
    pub p: usize,
    /// Test enrichment: test functions are of order `p + dp`.
    pub dp: usize,
    pub norm: TestNorm,
    /// Extra Gauss points per direction on top of the default rules.
    pub quad_boost: usize,
    pub test_family: TestFamily,
}

impl AcousticsConfig {
    /// `ω = 2π · wavelengths`, adjoint graph norm.
    pub fn new(wavelengths: f64, angle_deg: f64, p: usize, dp: usize) -> Self {
        Self {
            omega: 2.0 * PI * wavelengths,
            angle_deg,
            p,
            dp,
            norm: TestNorm::AdjointGraph,
            quad_boost: 0,
            test_family: TestFamily::default(),
        }
    }

    pub fn with_norm(mut self, norm: TestNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_test_family(mut self, family: TestFamily) -> Self {
        self.test_family = family;
        self
    }

    pub fn with_dp(mut self, dp: usize) -> Self {
        self.dp = dp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(0.0..360.0).contains(&self.angle_deg) {
            return Err(Error::InvalidInput(format!(
                "angle must lie in [0, 360), got {}",
                self.angle_deg
            )));
        }
        if self.p == 0 {
            return Err(Error::InvalidInput("p must be at least 1".into()));
        }
        if let TestNorm::ScaledGraph(a) = self.norm {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "scaled-graph weight must be positive, got {a}"
                )));
            }
        }
        Ok(())
    }

    pub fn plane_wave(&self) -> PlaneWave {
        PlaneWave::new(self.omega, self.angle_deg)
    }

    pub fn test_order(&self) -> usize {
        self.p + self.dp
    }

    /// Gauss points per direction for polynomial integrands.
    pub fn polynomial_points(&self) -> usize {
        self.p + self.dp + 2 + self.quad_boost
    }

    /// Gauss points per direction for integrands containing the plane wave
    /// on elements of diameter `h`.
    pub fn oscillatory_points(&self, h: f64) -> usize {
        self.polynomial_points() + (self.omega * h).ceil() as usize + 2
    }
}

/// `p*(x) = exp(iω d·x)`, `u*(x) = −d p*(x)` with `d = (cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub omega: f64,
    pub direction: [f64; 2],
}

/// Values of a test pair and of `A*` applied to it at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestValue {
    pub q: Complex64,
    pub v: [Complex64; 2],
    pub grad_q: [Complex64; 2],
    pub div_v: Complex64,
}

impl TestValue {
    pub fn zero() -> Self {
        Self {
            q: ZERO,
            v: [ZERO; 2],
            grad_q: [ZERO; 2],
            div_v: ZERO,
        }
    }

    /// `(iωq + div v, iωv₁ + ∂ₓq, iωv₂ + ∂ᵧq)`.
    pub fn adjoint(&self, omega: f64) -> [Complex64; 3] {
        let iw = I * omega;
        [
            iw * self.q + self.div_v,
            iw * self.v[0] + self.grad_q[0],
            iw * self.v[1] + self.grad_q[1],
        ]
    }

    pub fn l2(&self) -> [Complex64; 3] {
        [self.q, self.v[0], self.v[1]]
    }

    fn mathematician(&self) -> [Complex64; 6] {
        [
            self.q,
            self.grad_q[0],
            self.grad_q[1],
            self.v[0],
            self.v[1],
            self.div_v,
        ]
    }

    fn normal_v(&self, n: Point) -> Complex64 {
        self.v[0] * n[0] + self.v[1] * n[1]
    }
}

impl PlaneWave {
    pub fn new(omega: f64, angle_deg: f64) -> Self {
        let t = angle_deg.to_radians();
        Self {
            omega,
            direction: [t.cos(), t.sin()],
        }
    }

    pub fn pressure(&self, x: Point) -> Complex64 {
        let phase = self.omega * (self.direction[0] * x[0] + self.direction[1] * x[1]);
        Complex64::from_polar(1.0, phase)
    }

    pub fn velocity(&self, x: Point) -> [Complex64; 2] {
        let p = self.pressure(x);
        [-p * self.direction[0], -p * self.direction[1]]
    }

    /// Impedance datum `g = p* − u*·n`.
    pub fn impedance(&self, x: Point, n: Point) -> Complex64 {
        let u = self.velocity(x);
        self.pressure(x) - (u[0] * n[0] + u[1] * n[1])
    }

    /// The plane wave seen as a test pair `(q, v) = (p*, u*)`.
    pub fn as_test(&self, x: Point) -> TestValue {
        let p = self.pressure(x);
        let [d0, d1] = self.direction;
        let iw = I * self.omega;
        TestValue {
            q: p,
            v: [-d0 * p, -d1 * p],
            grad_q: [iw * d0 * p, iw * d1 * p],
            div_v: -(iw * (d0 * d0 + d1 * d1)) * p,
        }
    }
}

/// Evaluates the pressure, velocity and impedance datum (when a normal is given).
pub fn plane_wave_eval(
    cfg: &AcousticsConfig,
    x: Point,
    normal: Option<Point>,
) -> (Complex64, [Complex64; 2], Option<Complex64>) {
    let w = cfg.plane_wave();
    (
        w.pressure(x),
        w.velocity(x),
        normal.map(|n| w.impedance(x, n)),
    )
}

/// Tensor-product nodal basis on one element.
#[derive(Debug, Clone)]
pub struct TensorBasis {
    basis: NodalBasis,
}

impl TensorBasis {
    pub fn new(order: usize) -> Self {
        Self {
            basis: NodalBasis::new(order),
        }
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    /// Number of functions `(order + 1)²`.
    pub fn len(&self) -> usize {
        self.basis.len() * self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values and physical gradients at reference point `(ξ, η)` of an
    /// element of size `size`. Function `(a, b)` is stored at `a + b·(order+1)`.
    pub fn eval(&self, xi: f64, eta: f64, size: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (vx, dx) = self.basis.eval(xi);
        let (vy, dy) = self.basis.eval(eta);
        let n = vx.len();
        let mut v = Vec::with_capacity(n * n);
        let mut g = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                v.push(vx[a] * vy[b]);
                g.push([dx[a] * vy[b] / size[0], vx[a] * dy[b] / size[1]]);
            }
        }
        (v, g)
    }

    /// One-dimensional nodal basis.
    pub fn line(&self) -> &NodalBasis {
        &self.basis
    }
}

/// Broken test basis: `q`, `v₁`, `v₂` blocks, each a tensor product of
/// one-dimensional nodal bases with its own orders.
#[derive(Debug, Clone)]
pub struct TestBasis {
    components: [[NodalBasis; 2]; 3],
}

impl TestBasis {
    pub fn new(test: &TestDofLayout) -> Self {
        let o = test.component_orders();
        let line = |c: usize| [NodalBasis::new(o[c][0]), NodalBasis::new(o[c][1])];
        Self {
            components: [line(0), line(1), line(2)],
        }
    }

    pub fn len(&self) -> usize {
        self.components.iter().map(|[x, y]| x.len() * y.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Evaluates every test basis function (`q` block, `v₁` block, `v₂` block)
/// at a reference point. Function `(a, b)` of a block is stored at `a + b·(x order + 1)`.
pub fn test_basis_values(basis: &TestBasis, el: &Element, xi: f64, eta: f64) -> Vec<TestValue> {
    let mut out = Vec::with_capacity(basis.len());
    for (c, [bx, by]) in basis.components.iter().enumerate() {
        let (vx, dx) = bx.eval(xi);
        let (vy, dy) = by.eval(eta);
        for b in 0..vy.len() {
            for a in 0..vx.len() {
                let phi = Complex64::new(vx[a] * vy[b], 0.0);
                let gx = Complex64::new(dx[a] * vy[b] / el.size[0], 0.0);
                let gy = Complex64::new(vx[a] * dy[b] / el.size[1], 0.0);
                let mut tv = TestValue::zero();
                match c {
                    0 => {
                        tv.q = phi;
                        tv.grad_q = [gx, gy];
                    }
                    1 => {
                        tv.v[0] = phi;
                        tv.div_v = gx;
                    }
                    _ => {
                        tv.v[1] = phi;
                        tv.div_v = gy;
                    }
                }
                out.push(tv);
            }
        }
    }
    out
}

/// Rows `3·k + c` hold component `c` of the chosen norm integrand at point `k`.
fn norm_rows(
    parts: NormParts,
    omega: f64,
    basis: &TestBasis,
    el: &Element,
    rule: &TensorRule,
) -> (CMat, Vec<f64>) {
    let n_test = basis.len();
    let jac = el.size[0] * el.size[1];
    let comps = match parts {
        NormParts::Graph { l2_weight } if l2_weight > 0.0 => 6,
        NormParts::Graph { .. } | NormParts::L2 => 3,
        NormParts::Mathematician => 6,
    };
    let nq = rule.points.len();
    let mut phi = CMat::zeros(nq * comps, n_test);
    let mut w = Vec::with_capacity(nq * comps);
    for (k, (pt, wt)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let vals = test_basis_values(basis, el, pt[0], pt[1]);
        let base = k * comps;
        match parts {
            NormParts::Graph { l2_weight } => {
                for (i, tv) in vals.iter().enumerate() {
                    let a = tv.adjoint(omega);
                    for c in 0..3 {
                        phi[(base + c, i)] = a[c];
                    }
                    if comps == 6 {
                        let l = tv.l2();
                        for c in 0..3 {
                            phi[(base + 3 + c, i)] = l[c];
                        }
                    }
                }
                w.extend([wt * jac; 3]);
                if comps == 6 {
                    w.extend([wt * jac * l2_weight; 3]);
                }
            }
            NormParts::L2 => {
                for (i, tv) in vals.iter().enumerate() {
                    let l = tv.l2();
                    for c in 0..3 {
                        phi[(base + c, i)] = l[c];
                    }
                }
                w.extend([wt * jac; 3]);
            }
            NormParts::Mathematician => {
                for (i, tv) in vals.iter().enumerate() {
                    let m = tv.mathematician();
                    for c in 0..6 {
                        phi[(base + c, i)] = m[c];
                    }
                }
                w.extend([wt * jac; 6]);
            }
        }
    }
    (phi, w)
}

fn gram_from_parts(
    parts: NormParts,
    cfg: &AcousticsConfig,
    el: &Element,
    test: &TestDofLayout,
) -> Result<CMat> {
    let basis = TestBasis::new(test);
    let rule = gauss_rule(cfg.polynomial_points())?.tensor();
    let (phi, w) = norm_rows(parts, cfg.omega, &basis, el, &rule);
    let mut g = linalg::weighted_inner(&phi, &w, &phi);
    linalg::hermitize(&mut g);
    Ok(g)
}

/// Element Gram matrix `G_ij = (v_j, v_i)_V` of the configured test norm.
///
/// Fails when the result is not positive definite, except for
/// [`TestNorm::PureGraph`] which may be semidefinite.
pub fn assemble_element_gram(
    cfg: &AcousticsConfig,
    el: &Element,
    test: &TestDofLayout,
) -> Result<CMat> {
    let g = gram_from_parts(cfg.norm.parts(), cfg, el, test)?;
    if cfg.norm != TestNorm::PureGraph {
        Cholesky::factor(&g)?;
    }
    Ok(g)
}

/// Element L² Gram matrix of the test pair `(q, v)`.
pub fn assemble_element_mass(
    cfg: &AcousticsConfig,
    el: &Element,
    test: &TestDofLayout,
) -> Result<CMat> {
    gram_from_parts(NormParts::L2, cfg, el, test)
}

/// Field trial values at a point: rows are `(p, u₁, u₂)` components.
fn field_trial_rows(
    field: &TensorBasis,
    el: &Element,
    xi: f64,
    eta: f64,
    out: &mut CMat,
    row: usize,
) {
    let (v, _) = field.eval(xi, eta, el.size);
    let nc = v.len();
    for k in 0..nc {
        let val = Complex64::new(v[k], 0.0);
        out[(row, k)] = val;
        out[(row + 1, nc + k)] = val;
        out[(row + 2, 2 * nc + k)] = val;
    }
}

/// `b(w_j, φ_i)` for every element-local trial function `w_j` and every
/// function `φ_i` of a test set evaluated by `test_at`.
///
/// `n_set` is the size of the test set, `volume` and `edge` the quadrature
/// rules to use.
#[allow(clippy::too_many_arguments)]
fn b_rows<F>(
    cfg: &AcousticsConfig,
    mesh: &StructuredMesh,
    el: &Element,
    dofs: &ElementTrialDofs,
    n_set: usize,
    test_at: F,
    volume: &TensorRule,
    edge: &QuadratureRule,
) -> CMat
where
    F: Fn(f64, f64) -> Vec<TestValue>,
{
    let p = cfg.p;
    let field = TensorBasis::new(p - 1);
    let nq = volume.points.len();
    let jac = el.size[0] * el.size[1];

    let mut phi = CMat::zeros(3 * nq, n_set);
    let mut trial = CMat::zeros(3 * nq, dofs.n_fields);
    let mut w = Vec::with_capacity(3 * nq);
    for (k, (pt, wt)) in volume.points.iter().zip(&volume.weights).enumerate() {
        let vals = test_at(pt[0], pt[1]);
        for (i, tv) in vals.iter().enumerate() {
            let a = tv.adjoint(cfg.omega);
            for c in 0..3 {
                phi[(3 * k + c, i)] = a[c];
            }
        }
        field_trial_rows(&field, el, pt[0], pt[1], &mut trial, 3 * k);
        w.extend([wt * jac; 3]);
    }
    // rows of `b` are test functions: B = Φᴴ W T
    let vol = linalg::weighted_inner(&phi, &w, &trial);
    let mut out = CMat::zeros(n_set, dofs.len());
    out.columns_mut(0, dofs.n_fields).copy_from(&vol);

    let trace_basis = NodalBasis::new(p);
    let flux_basis = NodalBasis::new(p - 1);
    for s in el.sides {
        let e = &mesh.edges[s.edge];
        let n_out = s.side.outward_normal();
        let len = e.length();
        let trace_local = &dofs.trace_nodes[s.side.index()];
        let flux_local = dofs.flux_nodes[s.side.index()].as_ref();
        for (&t, &wt) in edge.points.iter().zip(&edge.weights) {
            let x = e.point(t);
            let (xi, eta) = reference(el, x);
            let vals = test_at(xi, eta);
            let ds = wt * len;
            let tr = trace_basis.values(t);
            for (i, tv) in vals.iter().enumerate() {
                let vn = tv.normal_v(n_out).conj();
                let q = tv.q.conj();
                let trace_test = if e.is_boundary { vn + q } else { vn };
                for (k, &col) in trace_local.iter().enumerate() {
                    out[(i, col)] += trace_test * (ds * tr[k]);
                }
                if let Some(flux_local) = flux_local {
                    let fl = flux_basis.values(t);
                    let sq = q * (ds * s.sign as f64);
                    for (k, &col) in flux_local.iter().enumerate() {
                        out[(i, col)] += sq * fl[k];
                    }
                }
            }
        }
    }
    out
}

fn reference(el: &Element, x: Point) -> (f64, f64) {
    (
        (x[0] - el.origin[0]) / el.size[0],
        (x[1] - el.origin[1]) / el.size[1],
    )
}

/// Element block `B_ij = b(w_j, v_i)` (test × element-local trial).
pub fn assemble_element_b(
    cfg: &AcousticsConfig,
    mesh: &StructuredMesh,
    element: usize,
    trial: &TrialDofLayout,
    test: &TestDofLayout,
) -> Result<CMat> {
    let el = element_ref(mesh, element)?;
    let basis = TestBasis::new(test);
    let n = cfg.polynomial_points();
    let rule = gauss_rule(n)?;
    Ok(b_rows(
        cfg,
        mesh,
        el,
        &trial.elements[element],
        test.per_element(),
        |xi, eta| test_basis_values(&basis, el, xi, eta),
        &rule.tensor(),
        &rule,
    ))
}

fn element_ref(mesh: &StructuredMesh, element: usize) -> Result<&Element> {
    mesh.elements
        .get(element)
        .ok_or_else(|| Error::InvalidInput(format!("element {element} out of range")))
}

/// Primal load `l(v_i) = −⟨g, q_i⟩_Γ` on one element (zero for interior elements).
pub fn assemble_load_primal(
    cfg: &AcousticsConfig,
    mesh: &StructuredMesh,
    element: usize,
    test: &TestDofLayout,
) -> Result<CVec> {
    let el = element_ref(mesh, element)?;
    let wave = cfg.plane_wave();
    let basis = TestBasis::new(test);
    let rule = gauss_rule(cfg.oscillatory_points(el.diameter()))?;
    let mut load = CVec::zeros(test.per_element());
    for s in el.sides {
        let e = &mesh.edges[s.edge];
        if !e.is_boundary {
            continue;
        }
        let n = s.side.outward_normal();
        for (&t, &wt) in rule.points.iter().zip(&rule.weights) {
            let x = e.point(t);
            let (xi, eta) = reference(el, x);
            let g = wave.impedance(x, n) * (wt * e.length());
            for (i, tv) in test_basis_values(&basis, el, xi, eta).iter().enumerate() {
                load[i] -= g * tv.q.conj();
            }
        }
    }
    Ok(load)
}

/// `b(𝔲*, v_i)` for the exact plane-wave group
/// `𝔲* = (p*, u*, −p*, −u*·n)` on one element.
pub fn exact_trial_action(
    cfg: &AcousticsConfig,
    mesh: &StructuredMesh,
    element: usize,
    test: &TestDofLayout,
) -> Result<CVec> {
    let el = element_ref(mesh, element)?;
    let wave = cfg.plane_wave();
    let basis = TestBasis::new(test);
    let rule = gauss_rule(cfg.oscillatory_points(el.diameter()))?;
    let jac = el.size[0] * el.size[1];
    let mut out = CVec::zeros(test.per_element());
    for (pt, wt) in rule.tensor().points.iter().zip(&rule.tensor().weights) {
        let x = el.map(pt[0], pt[1]);
        let p = wave.pressure(x);
        let u = wave.velocity(x);
        let exact = [p, u[0], u[1]];
        for (i, tv) in test_basis_values(&basis, el, pt[0], pt[1])
            .iter()
            .enumerate()
        {
            let a = tv.adjoint(cfg.omega);
            let s: Complex64 = (0..3).map(|c| exact[c] * a[c].conj()).sum();
            out[i] += s * (wt * jac);
        }
    }
    for s in el.sides {
        let e = &mesh.edges[s.edge];
        let n_out = s.side.outward_normal();
        for (&t, &wt) in rule.points.iter().zip(&rule.weights) {
            let x = e.point(t);
            let (xi, eta) = reference(el, x);
            let ds = wt * e.length();
            let p_hat = -wave.pressure(x);
            let u = wave.velocity(x);
            // −u*·n_K: the flux unknown times the element sign
            let flux = -(u[0] * n_out[0] + u[1] * n_out[1]);
            for (i, tv) in test_basis_values(&basis, el, xi, eta).iter().enumerate() {
                let mut v = p_hat * tv.normal_v(n_out).conj();
                if e.is_boundary {
                    v += p_hat * tv.q.conj();
                } else {
                    v += flux * tv.q.conj();
                }
                out[i] += v * ds;
            }
        }
    }
    Ok(out)
}

/// Which load goes into the second equation for DPG*.
#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    /// `Ĝ_j = conj(b(w_j, ψ*))` with `ψ* = (p*, u*)`; the exact adjoint
    /// solution is the plane wave itself.
    Manufactured,
    /// `Ĝ_j = ∫_Ω (w_j)_p` on pressure field DOFs, zero elsewhere.
    UniformPressure,
    /// An explicit global trial-space vector.
    Custom(CVec),
}

/// Global second-equation load `Ĝ` (length = trial dimension).
pub fn assemble_load_adjoint(
    cfg: &AcousticsConfig,
    mesh: &StructuredMesh,
    trial: &TrialDofLayout,
    goal: &Goal,
) -> Result<CVec> {
    let mut g = CVec::zeros(trial.total);
    match goal {
        Goal::Custom(v) => {
            if v.len() != trial.total {
                return Err(Error::Dimension(format!(
                    "custom goal has length {}, trial space has {}",
                    v.len(),
                    trial.total
                )));
            }
            g.copy_from(v);
        }
        Goal::UniformPressure => {
            let field = NodalBasis::new(cfg.p - 1);
            let rule = gauss_rule(cfg.p + 1)?;
            let moments: Vec<f64> = (0..field.len())
                .map(|a| rule.integrate(|x| field.values(x)[a]))
                .collect();
            let n1 = field.len();
            for (id, el) in mesh.elements.iter().enumerate() {
                let area = el.size[0] * el.size[1];
                for b in 0..n1 {
                    for a in 0..n1 {
                        g[trial.field(id, 0, a + b * n1)] =
                            Complex64::new(area * moments[a] * moments[b], 0.0);
                    }
                }
            }
        }
        Goal::Manufactured => {
            let wave = cfg.plane_wave();
            for (id, el) in mesh.elements.iter().enumerate() {
                let rule = gauss_rule(cfg.oscillatory_points(el.diameter()))?;
                let dofs = &trial.elements[id];
                let row = b_rows(
                    cfg,
                    mesh,
                    el,
                    dofs,
                    1,
                    |xi, eta| vec![wave.as_test(el.map(xi, eta))],
                    &rule.tensor(),
                    &rule,
                );
                for (j, &gj) in dofs.global.iter().enumerate() {
                    g[gj] += row[(0, j)].conj();
                }
            }
        }
    }
    Ok(g)
}

/// Everything one element contributes to the global mixed system.
#[derive(Debug, Clone)]
pub struct ElementContribution {
    pub element: usize,
    pub gram: CMat,
    pub b_block: CMat,
    pub load_l: CVec,
    /// Element-local trial index → global trial index.
    pub trial_map: Vec<usize>,
    /// First global test index of this element.
    pub test_offset: usize,
}

/// Gram, `B` block and (optionally) primal load of one element.
pub fn assemble_element(
    cfg: &AcousticsConfig,
    mesh: &StructuredMesh,
    element: usize,
    trial: &TrialDofLayout,
    test: &TestDofLayout,
    with_primal_load: bool,
) -> Result<ElementContribution> {
    let el = element_ref(mesh, element)?;
    let gram = gram_from_parts(cfg.norm.parts(), cfg, el, test)?;
    let b_block = assemble_element_b(cfg, mesh, element, trial, test)?;
    let load_l = if with_primal_load {
        assemble_load_primal(cfg, mesh, element, test)?
    } else {
        CVec::zeros(test.per_element())
    };
    Ok(ElementContribution {
        element,
        gram,
        b_block,
        load_l,
        trial_map: trial.elements[element].global.clone(),
        test_offset: test.offset(element),
    })
}

/// Which side of an element an edge is, if any.
pub fn side_of(el: &Element, edge: usize) -> Option<Side> {
    el.sides.iter().find(|s| s.edge == edge).map(|s| s.side)
}
