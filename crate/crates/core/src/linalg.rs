//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` column-major `DMatrix<Complex64>`. The Hermitian
//! Cholesky factorization is implemented here because callers need the index
//! of the failing pivot (it doubles as the discrete inf-sup diagnostic).

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const BLOCK: usize = 48;
#[cfg(feature = "parallel")]
const PARALLEL_MIN_DIM: usize = 384;

/// Hermitian positive definite factorization `A = L Lᴴ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Column-major lower factor; the strict upper triangle is garbage.
    l: Vec<Complex64>,
}

impl Cholesky {
    /// Factors the Hermitian matrix `a`, reading only its lower triangle.
    ///
    /// A pivot is rejected when it is not larger than `n·ε·max_i |a_ii|`.
    pub fn factor(a: &CMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "cholesky of non-square {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let mut l: Vec<Complex64> = a.as_slice().to_vec();
        let max_diag = (0..n).map(|i| l[i + i * n].re.abs()).fold(0.0, f64::max);
        let floor = (n.max(1) as f64) * f64::EPSILON * max_diag;

        let mut k0 = 0;
        while k0 < n {
            let k1 = (k0 + BLOCK).min(n);
            // Panel: columns k0..k1 already carry the updates from columns < k0.
            for k in k0..k1 {
                for j in k0..k {
                    let f = l[k + j * n].conj();
                    if f == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let (src, dst) = l.split_at_mut(k * n);
                    let src = &src[j * n + k..j * n + n];
                    let dst = &mut dst[k..n];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= s * f;
                    }
                }
                let d = l[k + k * n].re;
                if !(d > floor) || !d.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: k, value: d });
                }
                let s = d.sqrt();
                l[k + k * n] = Complex64::new(s, 0.0);
                let inv = 1.0 / s;
                for v in &mut l[k * n + k + 1..k * n + n] {
                    *v *= inv;
                }
            }
            if k1 < n {
                let (panel, trailing) = l.split_at_mut(k1 * n);
                let panel = &panel[k0 * n..];
                let update = |offset: usize, col: &mut [Complex64]| {
                    let j = k1 + offset;
                    for k in 0..(k1 - k0) {
                        let pcol = &panel[k * n..(k + 1) * n];
                        let f = pcol[j].conj();
                        if f == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for (d, s) in col[j..].iter_mut().zip(&pcol[j..]) {
                            *d -= s * f;
                        }
                    }
                };
                #[cfg(feature = "parallel")]
                {
                    if n >= PARALLEL_MIN_DIM {
                        use rayon::prelude::*;
                        trailing
                            .par_chunks_mut(n)
                            .enumerate()
                            .for_each(|(o, c)| update(o, c));
                    } else {
                        trailing
                            .chunks_mut(n)
                            .enumerate()
                            .for_each(|(o, c)| update(o, c));
                    }
                }
                #[cfg(not(feature = "parallel"))]
                trailing
                    .chunks_mut(n)
                    .enumerate()
                    .for_each(|(o, c)| update(o, c));
            }
            k0 = k1;
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal entries of `L` (square roots of the pivots).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.l[i + i * self.n].re).collect()
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            let col = &self.l[j * n..(j + 1) * n];
            let yj = b[j] / col[j].re;
            b[j] = yj;
            if yj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in j + 1..n {
                b[i] -= col[i] * yj;
            }
        }
    }

    /// Solves `Lᴴ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [Complex64]) {
        let n = self.n;
        for j in (0..n).rev() {
            let col = &self.l[j * n..(j + 1) * n];
            let mut s = y[j];
            for i in j + 1..n {
                s -= col[i].conj() * y[i];
            }
            y[j] = s / col[j].re;
        }
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        self.forward_in_place(b);
        self.backward_in_place(b);
    }

    pub fn solve_vec(&self, b: &CVec) -> CVec {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        x
    }

    /// `L⁻¹ B`, column by column.
    pub fn forward_mat(&self, b: &CMat) -> CMat {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.forward_in_place(col.as_mut_slice());
        }
        x
    }

    /// `bᴴ A⁻¹ b`, always real and non-negative.
    pub fn inverse_quadratic_form(&self, b: &CVec) -> f64 {
        let mut y = b.clone();
        self.forward_in_place(y.as_mut_slice());
        y.iter().map(|v| v.norm_sqr()).sum()
    }
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn max_abs_vec(a: &CVec) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `max |A − Aᴴ| / max |A|` (0 for the zero matrix).
pub fn hermitian_defect(a: &CMat) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut d: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d / scale
}

/// Replaces `a` by `(A + Aᴴ)/2`.
pub fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)].im = 0.0;
        for i in j + 1..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// `Aᴴ diag(w) B`, evaluated with four real matrix products.
pub fn weighted_inner(a: &CMat, w: &[f64], b: &CMat) -> CMat {
    assert_eq!(a.nrows(), w.len());
    assert_eq!(b.nrows(), w.len());
    let (ar, ai) = split(a, None);
    let (br, bi) = split(b, Some(w));
    let mut re = DMatrix::<f64>::zeros(a.ncols(), b.ncols());
    let mut im = DMatrix::<f64>::zeros(a.ncols(), b.ncols());
    re.gemm_tr(1.0, &ar, &br, 0.0);
    re.gemm_tr(1.0, &ai, &bi, 1.0);
    im.gemm_tr(1.0, &ar, &bi, 0.0);
    im.gemm_tr(-1.0, &ai, &br, 1.0);
    CMat::from_fn(a.ncols(), b.ncols(), |i, j| {
        Complex64::new(re[(i, j)], im[(i, j)])
    })
}

fn split(a: &CMat, w: Option<&[f64]>) -> (DMatrix<f64>, DMatrix<f64>) {
    let scale = |i: usize| w.map_or(1.0, |w| w[i]);
    (
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re * scale(i)),
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].im * scale(i)),
    )
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut h = a.clone();
    hermitize(&mut h);
    let eig = SymmetricEigen::new(h);
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

/// Orthonormal basis (as columns) of `null(Tᴴ)`, the Euclidean orthogonal
/// complement of `range(T)`. Requires `T` of full column rank.
pub fn adjoint_null_space(t: &CMat) -> Result<CMat> {
    let (n, k) = t.shape();
    if k > n {
        return Err(Error::Dimension(format!(
            "constraint matrix {n}x{k} has more columns than rows"
        )));
    }
    if k == 0 {
        return Ok(CMat::identity(n, n));
    }
    let qr = QR::new(t.clone());
    let r = qr.r();
    let rmax = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    if let Some(i) = (0..k).find(|&i| r[(i, i)].norm() <= 1e-12 * rmax) {
        return Err(Error::Singular(format!(
            "constraint matrix is column-rank deficient at column {i}"
        )));
    }
    // Applying Qᴴ to the identity yields the full unitary factor (adjointed).
    let mut qh = CMat::identity(n, n);
    qr.q_tr_mul(&mut qh);
    let q = qh.adjoint();
    Ok(q.columns(k, n - k).into_owned())
}

/// Smallest eigenvalue λ of the Hermitian pencil `A x = λ M x` with `M`
/// positive definite.
pub fn min_generalized_eigenvalue(a: &CMat, m: &CMat) -> Result<f64> {
    let chol = Cholesky::factor(m)?;
    // C = L⁻¹ A L⁻ᴴ
    let x = chol.forward_mat(a);
    let c = chol.forward_mat(&x.adjoint());
    hermitian_eigenvalues(&c)
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidInput("empty pencil".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hpd(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CMat::from_fn(n, n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        m.adjoint() * &m + CMat::identity(n, n) * c(n as f64, 0.0)
    }

    #[test]
    fn cholesky_reconstructs() {
        for &n in &[1, 5, 47, 48, 49, 130] {
            let a = random_hpd(n, n as u64);
            let ch = Cholesky::factor(&a).unwrap();
            let mut l = CMat::zeros(n, n);
            for j in 0..n {
                for i in j..n {
                    l[(i, j)] = ch.l[i + j * n];
                }
            }
            let err = max_abs(&(&l * l.adjoint() - &a));
            assert!(err < 1e-11 * max_abs(&a), "n={n} err={err}");
        }
    }

    #[test]
    fn cholesky_solves() {
        let a = random_hpd(60, 3);
        let ch = Cholesky::factor(&a).unwrap();
        let b = CVec::from_fn(60, |i, _| c(i as f64, 1.0));
        let x = ch.solve_vec(&b);
        assert!(max_abs_vec(&(&a * &x - &b)) < 1e-10);
        let q = ch.inverse_quadratic_form(&b);
        let direct = (b.adjoint() * &x)[(0, 0)];
        assert!((q - direct.re).abs() < 1e-10 * q);
        assert!(direct.im.abs() < 1e-10 * q);
    }

    #[test]
    fn cholesky_reports_pivot() {
        let mut a = CMat::identity(3, 3);
        a[(2, 2)] = c(-1.0, 0.0);
        match Cholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
        let singular = CMat::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(
            Cholesky::factor(&singular),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn weighted_inner_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = CMat::from_fn(7, 3, |_, _| c(rng.random(), rng.random()));
        let b = CMat::from_fn(7, 4, |_, _| c(rng.random(), rng.random()));
        let w: Vec<f64> = (0..7).map(|i| 0.5 + i as f64).collect();
        let wd = CMat::from_diagonal(&CVec::from_iterator(7, w.iter().map(|&x| c(x, 0.0))));
        let direct = a.adjoint() * wd * &b;
        assert!(max_abs(&(weighted_inner(&a, &w, &b) - direct)) < 1e-13);
    }

    #[test]
    fn null_space_is_orthonormal_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = CMat::from_fn(9, 3, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let n = adjoint_null_space(&t).unwrap();
        assert_eq!(n.shape(), (9, 6));
        assert!(max_abs(&(t.adjoint() * &n)) < 1e-13);
        assert!(max_abs(&(n.adjoint() * &n - CMat::identity(6, 6))) < 1e-13);
    }

    #[test]
    fn generalized_eigenvalue_diagonal() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(9.0, 0.0)]));
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(4.0, 0.0), c(1.0, 0.0)]));
        let l = min_generalized_eigenvalue(&a, &m).unwrap();
        assert!((l - 0.5).abs() < 1e-14);
    }
}
