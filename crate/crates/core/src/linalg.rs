//! Dense complex helpers shared by the positivity and decomposition code.
//!
//! Everything here is deterministic: eigenpairs come back sorted by ascending
//! eigenvalue, and every eigenvector is phase-normalized so that its first
//! non-negligible component is real and positive.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;

/// Components below this fraction of the vector norm are skipped when fixing
/// the eigenvector phase.
const PHASE_EPS: f64 = 1e-10;

/// Sorted Hermitian eigendecomposition.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, aligned with `values`.
    pub vectors: DMatrix<C64>,
}

impl Eigh {
    pub fn vector(&self, i: usize) -> DVector<C64> {
        self.vectors.column(i).into_owned()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("nonempty spectrum")
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn real(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// `(m - m*) / 2i`, the Hermitian matrix `K` with `m = H + iK`.
pub fn skew_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m - m.adjoint()) * c(0.0, -0.5)
}

pub fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Makes the first component whose modulus exceeds `PHASE_EPS * ||v||` real positive.
pub fn fix_phase(v: &mut DVector<C64>) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    if let Some(z) = v.iter().copied().find(|z| z.norm() > PHASE_EPS * norm) {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Eigendecomposition of the Hermitian part of `m`.
pub fn eigh(m: &DMatrix<C64>) -> Eigh {
    let h = hermitian_part(m);
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut v);
        vectors.set_column(dst, &v);
    }
    Eigh { values, vectors }
}

/// Lower Cholesky factor of the Hermitian part of `m`, or `None` when it is
/// not positive definite.
///
/// nalgebra takes complex square roots of negative pivots, so the pivots are
/// checked explicitly.
pub fn cholesky_lower(m: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let l = hermitian_part(m).cholesky()?.l();
    let ok = l
        .diagonal()
        .iter()
        .all(|z| z.re.is_finite() && z.re > 0.0 && z.im.abs() <= 1e-12 * z.re);
    ok.then_some(l)
}

/// Generalized eigenproblem `B x = λ C x` for Hermitian `B` and positive
/// definite `C`. Returns `None` if `C` admits no Cholesky factor.
///
/// Eigenvectors are `C`-orthonormal: `x* C x = 1`.
pub fn pencil(b: &DMatrix<C64>, cmat: &DMatrix<C64>) -> Option<Eigh> {
    let l = cholesky_lower(cmat)?;
    // L⁻¹ B L⁻*
    let linv_b = l.solve_lower_triangular(&hermitian_part(b))?;
    let reduced = l.solve_lower_triangular(&linv_b.adjoint())?.adjoint();
    let inner = eigh(&reduced);
    let lt = l.adjoint();
    let mut vectors = lt.solve_upper_triangular(&inner.vectors)?;
    for j in 0..vectors.ncols() {
        let mut v = vectors.column(j).into_owned();
        fix_phase(&mut v);
        vectors.set_column(j, &v);
    }
    Some(Eigh {
        values: inner.values,
        vectors,
    })
}

pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<C64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank: number of singular values above `tol * σ_max`.
pub fn rank(m: &DMatrix<C64>, tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > tol * smax).count(),
        _ => 0,
    }
}

/// Least-squares coefficients `x` minimizing `||basis x - target||`.
pub fn least_squares(basis: &DMatrix<C64>, target: &DVector<C64>) -> DVector<C64> {
    let svd = basis.clone().svd(true, true);
    svd.solve(target, 0.0)
        .expect("svd computed with both factors")
}

/// Kronecker product `x ⊗ y`.
pub fn kron(x: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<C64> {
    x.kronecker(y)
}
