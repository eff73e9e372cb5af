//! Superoperators on `S₂`.
//!
//! Two interchangeable representations are kept: an [`LRSum`] of
//! left-right multiplications `η ↦ Σ aₙ η bₙ`, and the dense
//! [`LiouvilleMatrix`] acting on column-stacked matrices, where
//! `vec(a η b) = (bᵀ ⊗ a) vec(η)`. The matrix unit `ε_nm` sits at vec index
//! `m·d + n`, so `⟨ε_nk, A ε_mj⟩₂` is the single entry `M[(k·d + n, j·d + m)]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hs::{self, HSMatrix, PositivityReport};
use crate::linalg::{self, c, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct LRTerm {
    pub a: HSMatrix,
    pub b: HSMatrix,
}

impl LRTerm {
    pub fn new(a: HSMatrix, b: HSMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        Ok(LRTerm { a, b })
    }
}

/// The superoperator `η ↦ Σₙ aₙ η bₙ`. An empty term list is the zero operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LRSum {
    dim: usize,
    terms: Vec<LRTerm>,
}

impl LRSum {
    pub fn new(dim: usize, terms: Vec<LRTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        for t in &terms {
            for m in [&t.a, &t.b] {
                if m.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: m.dim(),
                    });
                }
            }
        }
        Ok(LRSum { dim, terms })
    }

    /// Builds a sum from `(a, b)` pairs; the dimension is taken from the first pair.
    pub fn from_pairs(pairs: Vec<(HSMatrix, HSMatrix)>) -> Result<Self> {
        let dim = pairs.first().map(|(a, _)| a.dim()).ok_or_else(|| {
            Error::InvalidParameter("empty term list needs an explicit dimension".into())
        })?;
        let terms = pairs
            .into_iter()
            .map(|(a, b)| LRTerm::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, terms)
    }

    pub(crate) fn from_terms_unchecked(dim: usize, terms: Vec<LRTerm>) -> Self {
        LRSum { dim, terms }
    }

    pub fn zero(dim: usize) -> Self {
        LRSum {
            dim,
            terms: Vec::new(),
        }
    }

    /// The identity superoperator `η ↦ I η I`.
    pub fn identity(dim: usize) -> Self {
        let i = HSMatrix::identity(dim);
        LRSum {
            dim,
            terms: vec![LRTerm { a: i.clone(), b: i }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[LRTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn lefts(&self) -> impl Iterator<Item = &HSMatrix> {
        self.terms.iter().map(|t| &t.a)
    }

    pub fn rights(&self) -> impl Iterator<Item = &HSMatrix> {
        self.terms.iter().map(|t| &t.b)
    }

    /// `η ↦ (A(ηᵀ))ᵀ = Σ bₙᵀ η aₙᵀ`, which swaps the roles of the left and
    /// right factors while preserving the quadratic form.
    pub fn transposed(&self) -> LRSum {
        LRSum {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| LRTerm {
                    a: t.b.transpose(),
                    b: t.a.transpose(),
                })
                .collect(),
        }
    }

    pub fn scaled(&self, x: f64) -> LRSum {
        LRSum {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| LRTerm {
                    a: t.a.scale_real(x),
                    b: t.b.clone(),
                })
                .collect(),
        }
    }
}

/// Dense `d² × d²` matrix of a superoperator in the column-stacking basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleMatrix {
    dim: usize,
    mat: DMatrix<C64>,
}

impl LiouvilleMatrix {
    pub fn new(dim: usize, mat: DMatrix<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        let n = dim * dim;
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if mat.nrows() != n {
                    mat.nrows()
                } else {
                    mat.ncols()
                },
            });
        }
        if !mat.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(LiouvilleMatrix { dim, mat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.mat)
    }

    /// `||self − other||_F`.
    pub fn distance(&self, other: &LiouvilleMatrix) -> f64 {
        linalg::frobenius(&(&self.mat - &other.mat))
    }

    /// `||self − other||_F / max(1, ||self||_F)`.
    pub fn relative_distance(&self, other: &LiouvilleMatrix) -> f64 {
        self.distance(other) / self.frobenius().max(1.0)
    }

    pub fn adjoint(&self) -> LiouvilleMatrix {
        LiouvilleMatrix {
            dim: self.dim,
            mat: self.mat.adjoint(),
        }
    }

    pub fn apply(&self, eta: &HSMatrix) -> Result<HSMatrix> {
        check_dim(self.dim, eta.dim())?;
        HSMatrix::unvec(self.dim, &(&self.mat * eta.vec()))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `Σₙ aₙ η bₙ`.
pub fn apply(s: &LRSum, eta: &HSMatrix) -> Result<HSMatrix> {
    check_dim(s.dim, eta.dim())?;
    let mut out = DMatrix::zeros(s.dim, s.dim);
    for t in &s.terms {
        out += t.a.as_matrix() * eta.as_matrix() * t.b.as_matrix();
    }
    HSMatrix::new(out)
}

pub fn to_liouville(s: &LRSum) -> LiouvilleMatrix {
    let n = s.dim * s.dim;
    let mut mat = DMatrix::zeros(n, n);
    for t in &s.terms {
        mat += linalg::kron(&t.b.as_matrix().transpose(), t.a.as_matrix());
    }
    LiouvilleMatrix { dim: s.dim, mat }
}

/// Which side of the basis decomposition carries the matrix units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisVariant {
    /// `A η = Σ_{n,m} ε_nm η a_nm`.
    LeftEps,
    /// `A η = Σ_{n,m} â_nm η ε_nm`.
    RightEps,
}

/// Coefficient operator `a_nm = Σ_{j,k} ⟨ε_nk, A ε_mj⟩₂ ε_jk`.
pub(crate) fn left_coefficient(m: &LiouvilleMatrix, n: usize, mm: usize) -> HSMatrix {
    let d = m.dim;
    HSMatrix::from_fn(d, |j, k| m.mat[(k * d + n, j * d + mm)])
}

/// Coefficient operator `â_nm = Σ_{j,k} ⟨ε_jm, A ε_kn⟩₂ ε_jk`.
pub(crate) fn right_coefficient(m: &LiouvilleMatrix, n: usize, mm: usize) -> HSMatrix {
    let d = m.dim;
    HSMatrix::from_fn(d, |j, k| m.mat[(mm * d + j, n * d + k)])
}

/// Basis decomposition of a superoperator: `d²` terms ordered by `(n, m)`
/// with `n` outermost.
pub fn from_liouville(m: &LiouvilleMatrix, variant: BasisVariant) -> LRSum {
    let d = m.dim;
    let mut terms = Vec::with_capacity(d * d);
    for n in 0..d {
        for mm in 0..d {
            let unit = hs::basis_eps(d, n, mm).expect("indices in range");
            let term = match variant {
                BasisVariant::LeftEps => LRTerm {
                    a: unit,
                    b: left_coefficient(m, n, mm),
                },
                BasisVariant::RightEps => LRTerm {
                    a: right_coefficient(m, n, mm),
                    b: unit,
                },
            };
            terms.push(term);
        }
    }
    LRSum { dim: d, terms }
}

/// `Σ aₙ* η bₙ*`.
pub fn adjoint(s: &LRSum) -> LRSum {
    LRSum {
        dim: s.dim,
        terms: s
            .terms
            .iter()
            .map(|t| LRTerm {
                a: t.a.adjoint(),
                b: t.b.adjoint(),
            })
            .collect(),
    }
}

/// Selects a maximal linearly independent subset of `mats` (greedy, in
/// order) and expresses every other matrix over it.
///
/// Returns `(kept, coefficients)` where `coefficients[j]` holds, for each
/// dropped index `j`, the coefficients over `kept`.
fn independent_subset(mats: &[&HSMatrix], tol: f64) -> (Vec<usize>, Vec<(usize, DVector<C64>)>) {
    if mats.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let rows = mats[0].dim() * mats[0].dim();
    let all = DMatrix::from_fn(rows, mats.len(), |r, j| mats[j].as_matrix().as_slice()[r]);
    let smax = linalg::op_norm(&all);
    if smax == 0.0 {
        return (
            Vec::new(),
            (0..mats.len()).map(|j| (j, DVector::zeros(0))).collect(),
        );
    }

    let column = |j: usize| DVector::from_column_slice(mats[j].as_matrix().as_slice());
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..mats.len() {
        let mut cols: Vec<DVector<C64>> = kept.iter().map(|&k| column(k)).collect();
        cols.push(column(j));
        let candidate = DMatrix::from_columns(&cols);
        // more vectors than dimensions are always dependent
        let smin = if cols.len() > rows {
            0.0
        } else {
            linalg::singular_values(&candidate)
                .last()
                .copied()
                .unwrap_or(0.0)
        };
        if smin > tol * smax {
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }

    let basis = DMatrix::from_columns(&kept.iter().map(|&k| column(k)).collect::<Vec<_>>());
    let coeffs = dropped
        .into_iter()
        .map(|j| {
            if kept.is_empty() {
                (j, DVector::zeros(0))
            } else {
                (j, linalg::least_squares(&basis, &column(j)))
            }
        })
        .collect();
    (kept, coeffs)
}

/// Folds linearly dependent left factors into the right factors, keeping
/// the Liouville matrix.
fn fold_left(terms: &[LRTerm], tol: f64) -> Vec<LRTerm> {
    let lefts: Vec<&HSMatrix> = terms.iter().map(|t| &t.a).collect();
    let (kept, coeffs) = independent_subset(&lefts, tol);
    let mut out: Vec<LRTerm> = kept.iter().map(|&k| terms[k].clone()).collect();
    for (j, alpha) in coeffs {
        for (slot, &z) in alpha.iter().enumerate() {
            out[slot].b = &out[slot].b + terms[j].b.scale(z);
        }
    }
    out
}

fn swap_sides(terms: Vec<LRTerm>) -> Vec<LRTerm> {
    terms
        .into_iter()
        .map(|t| LRTerm { a: t.b, b: t.a })
        .collect()
}

/// Rewrites `S` so that both the left and the right factors are linearly
/// independent. Rank decisions threshold singular values at `tol · σ_max`.
pub fn reduce_li(s: &LRSum, tol: f64) -> LRSum {
    let pass1 = fold_left(&s.terms, tol);
    // Same elimination on the right factors, folding into the lefts.
    let pass2 = swap_sides(fold_left(&swap_sides(pass1), tol));
    LRSum {
        dim: s.dim,
        terms: pass2,
    }
}

/// Rank of the span of the left (or right) factors.
pub fn factor_rank<'a>(mats: impl Iterator<Item = &'a HSMatrix>, tol: f64) -> usize {
    let cols: Vec<DVector<C64>> = mats.map(|m| m.vec()).collect();
    if cols.is_empty() {
        return 0;
    }
    linalg::rank(&DMatrix::from_columns(&cols), tol)
}

/// Relative Hermiticity defect `||M − M*||_F / max(1, ||M||_F)`.
pub fn selfadjoint_defect(m: &LiouvilleMatrix) -> f64 {
    linalg::frobenius(&(&m.mat - m.mat.adjoint())) / m.frobenius().max(1.0)
}

/// Decomposition of a selfadjoint superoperator into Hermitian factors:
/// term `(n, m)` is `(ε̂_nm, ((1−i)/2) a_nm + ((1+i)/2) a_mn)` where `a_nm`
/// are the left basis coefficients.
///
/// The coefficients are read from the Hermitian part of the Liouville
/// matrix so that every returned factor is Hermitian to rounding.
pub fn selfadjoint_decompose(s: &LRSum, tol: f64) -> Result<LRSum> {
    selfadjoint_decompose_liouville(&to_liouville(s), tol)
}

pub(crate) fn selfadjoint_decompose_liouville(m: &LiouvilleMatrix, tol: f64) -> Result<LRSum> {
    let defect = selfadjoint_defect(m);
    if defect > tol {
        return Err(Error::NotSelfadjoint { defect });
    }
    let herm = LiouvilleMatrix {
        dim: m.dim,
        mat: linalg::hermitian_part(&m.mat),
    };
    let d = m.dim;
    let w_nm = c(0.5, -0.5);
    let w_mn = c(0.5, 0.5);
    let mut terms = Vec::with_capacity(d * d);
    for n in 0..d {
        for mm in 0..d {
            let a_nm = left_coefficient(&herm, n, mm);
            let a_mn = left_coefficient(&herm, mm, n);
            let right = a_nm.scale(w_nm) + a_mn.scale(w_mn);
            terms.push(LRTerm {
                a: hs::basis_hat_eps(d, n, mm).expect("indices in range"),
                b: right,
            });
        }
    }
    Ok(LRSum { dim: d, terms })
}

/// Positivity of `S` as an operator on `S₂`; `lambda_min` is its greatest
/// lower bound when Hermitian.
pub fn superop_classify(s: &LRSum, tol: f64) -> PositivityReport {
    hs::classify_matrix(to_liouville(s).matrix(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hs::{basis_eps, PositivityClass};
    use crate::linalg::real;

    fn eps(d: usize, n: usize, m: usize) -> HSMatrix {
        basis_eps(d, n, m).unwrap()
    }

    fn sample(d: usize, seed: u64) -> HSMatrix {
        // small deterministic LCG, enough for unit-test fixtures
        let mut x = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        HSMatrix::from_fn(d, |_, _| {
            let mut next = || {
                x = x
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            };
            c(next(), next())
        })
    }

    #[test]
    fn identity_superop() {
        let s = LRSum::identity(2);
        let eta = sample(2, 3);
        assert_eq!(apply(&s, &eta).unwrap(), eta);
        let m = to_liouville(&s);
        assert_eq!(m.matrix(), &DMatrix::<C64>::identity(4, 4));
    }

    #[test]
    fn relaxation_operator_kills_off_diagonal() {
        let s = LRSum::from_pairs(vec![(eps(2, 0, 0), eps(2, 0, 0))]).unwrap();
        assert!(apply(&s, &eps(2, 0, 1)).unwrap().is_zero());
        let m = to_liouville(&s);
        // ε₁₁ has vec index 0
        assert_eq!(m.matrix()[(0, 0)], real(1.0));
        assert_eq!(m.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn apply_matches_liouville() {
        let s =
            LRSum::from_pairs((0..3).map(|k| (sample(3, k), sample(3, 10 + k))).collect()).unwrap();
        let eta = sample(3, 99);
        let direct = apply(&s, &eta).unwrap();
        let via = to_liouville(&s).apply(&eta).unwrap();
        assert!(hs::frob_norm(&(direct - via)) < 1e-12);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let r = apply(&LRSum::identity(2), &HSMatrix::identity(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn from_liouville_reconstructs_both_variants() {
        let s = LRSum::from_pairs(vec![(sample(3, 1), sample(3, 2))]).unwrap();
        let m = to_liouville(&s);
        for v in [BasisVariant::LeftEps, BasisVariant::RightEps] {
            let dec = from_liouville(&m, v);
            assert_eq!(dec.len(), 9);
            assert!(to_liouville(&dec).distance(&m) <= 1e-10);
        }
    }

    #[test]
    fn from_liouville_identity_left() {
        let m = to_liouville(&LRSum::identity(2));
        let dec = from_liouville(&m, BasisVariant::LeftEps);
        // a_nm = δ_nm I
        for (idx, t) in dec.terms().iter().enumerate() {
            let (n, mm) = (idx / 2, idx % 2);
            assert_eq!(t.a, eps(2, n, mm));
            if n == mm {
                assert_eq!(t.b, HSMatrix::identity(2));
            } else {
                assert!(t.b.is_zero());
            }
        }
        assert_eq!(to_liouville(&dec), m);
    }

    #[test]
    fn from_liouville_zero() {
        let m = to_liouville(&LRSum::zero(2));
        let dec = from_liouville(&m, BasisVariant::LeftEps);
        assert!(dec.rights().all(HSMatrix::is_zero));
        assert!(apply(&dec, &sample(2, 5)).unwrap().is_zero());
    }

    #[test]
    fn adjoint_of_units() {
        let s = LRSum::from_pairs(vec![(eps(2, 0, 1), eps(2, 0, 1))]).unwrap();
        let a = adjoint(&s);
        assert_eq!(a.terms()[0].a, eps(2, 1, 0));
        assert_eq!(a.terms()[0].b, eps(2, 1, 0));
        assert_eq!(adjoint(&LRSum::identity(2)), LRSum::identity(2));
    }

    #[test]
    fn reduce_li_merges_dependent_left() {
        let a = sample(2, 1);
        let b = sample(2, 2);
        let cc = sample(2, 3);
        let s = LRSum::from_pairs(vec![
            (a.clone(), b.clone()),
            (a.scale_real(2.0), cc.clone()),
        ])
        .unwrap();
        let r = reduce_li(&s, 1e-9);
        assert_eq!(r.len(), 1);
        assert_eq!(r.terms()[0].a, a);
        assert!(hs::frob_norm(&(&r.terms()[0].b - (b + cc.scale_real(2.0)))) < 1e-12);
        assert!(to_liouville(&r).distance(&to_liouville(&s)) < 1e-10);
    }

    #[test]
    fn reduce_li_keeps_independent_and_empty() {
        let s = LRSum::from_pairs(vec![
            (sample(3, 1), sample(3, 2)),
            (sample(3, 3), sample(3, 4)),
        ])
        .unwrap();
        assert_eq!(reduce_li(&s, 1e-9).len(), 2);
        assert!(reduce_li(&LRSum::zero(3), 1e-9).is_empty());
    }

    #[test]
    fn reduce_li_right_side_dependence() {
        let b = sample(2, 7);
        let s = LRSum::from_pairs(vec![
            (sample(2, 1), b.clone()),
            (sample(2, 2), b.scale(c(0.0, 3.0))),
            (sample(2, 3), sample(2, 4)),
        ])
        .unwrap();
        let r = reduce_li(&s, 1e-9);
        assert_eq!(r.len(), 2);
        assert_eq!(factor_rank(r.lefts(), 1e-9), 2);
        assert_eq!(factor_rank(r.rights(), 1e-9), 2);
        assert!(to_liouville(&r).relative_distance(&to_liouville(&s)) < 1e-10);
    }

    #[test]
    fn selfadjoint_decompose_identity() {
        let out = selfadjoint_decompose(&LRSum::identity(2), 1e-9).unwrap();
        for t in out.terms() {
            assert!(t.a.hermitian_defect() < 1e-12);
            assert!(t.b.hermitian_defect() < 1e-12);
        }
        assert!(to_liouville(&out).distance(&to_liouville(&LRSum::identity(2))) < 1e-12);
    }

    #[test]
    fn selfadjoint_decompose_rejects_non_selfadjoint() {
        let s = LRSum::from_pairs(vec![(eps(2, 0, 1), eps(2, 0, 1))]).unwrap();
        assert!(matches!(
            selfadjoint_decompose(&s, 1e-9),
            Err(Error::NotSelfadjoint { .. })
        ));
    }

    #[test]
    fn classify_identity_and_relaxation() {
        let r = superop_classify(&LRSum::identity(3), 1e-9);
        assert_eq!(r.class, PositivityClass::PositiveDefinite);
        assert!((r.lambda_min - 1.0).abs() < 1e-12);

        let s = LRSum::from_pairs((0..2).map(|n| (eps(2, n, n), eps(2, n, n))).collect()).unwrap();
        let r = superop_classify(&s, 1e-9);
        assert_eq!(r.class, PositivityClass::PsdSingular);
        assert_eq!(r.kernel_dim, 2);
    }

    #[test]
    fn transposed_preserves_quadratic_form() {
        let s = LRSum::from_pairs(vec![
            (sample(3, 1), sample(3, 2)),
            (sample(3, 3), sample(3, 4)),
        ])
        .unwrap();
        let t = s.transposed();
        let eta = sample(3, 8);
        let q1 = hs::frob_inner(&eta, &apply(&s, &eta).unwrap()).unwrap();
        let q2 = hs::frob_inner(&eta.transpose(), &apply(&t, &eta.transpose()).unwrap()).unwrap();
        assert!((q1 - q2).norm() < 1e-12);
    }

    #[test]
    fn reduce_li_overcomplete_family() {
        // five left factors in a four-dimensional space
        let pairs = (0..5)
            .map(|i| (sample(2, 40 + i), sample(2, 80 + i)))
            .collect();
        let s = LRSum::from_pairs(pairs).unwrap();
        let out = reduce_li(&s, 1e-9);
        assert!(out.len() <= 4);
        assert!(to_liouville(&out).relative_distance(&to_liouville(&s)) < 1e-9);
        let scalars = LRSum::from_pairs(vec![
            (sample(1, 1), sample(1, 2)),
            (sample(1, 3), sample(1, 4)),
        ])
        .unwrap();
        assert_eq!(reduce_li(&scalars, 1e-9).len(), 1);
    }
}
