//! The finite-dimensional Hilbert space `H = C^d` and the Hilbert–Schmidt
//! space `S₂` of `d × d` complex matrices.
//!
//! Matrices are stored column-major, so the column-stacking vectorization
//! used by [`crate::superop`] is the raw storage order. Indices in this API
//! are 0-based: `basis_eps(d, n, m)` is the matrix unit `|e_n⟩⟨e_m|`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, C64};

/// An element of `H = C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct HVector(DVector<C64>);

impl HVector {
    pub fn new(v: DVector<C64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidParameter(
                "vector dimension must be >= 1".into(),
            ));
        }
        if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(HVector(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn entries(&self) -> &[C64] {
        self.0.as_slice()
    }
}

/// A `d × d` complex matrix: an element of `S₂`, or an operator on `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HSMatrix(DMatrix<C64>);

impl HSMatrix {
    /// Wraps a square matrix with finite entries.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "matrix dimension must be >= 1".into(),
            ));
        }
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(HSMatrix(m))
    }

    pub fn zeros(d: usize) -> Self {
        HSMatrix(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        HSMatrix(DMatrix::identity(d, d))
    }

    pub fn from_fn(d: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        HSMatrix(DMatrix::from_fn(d, d, f))
    }

    /// Builds a matrix from row-major nested entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(d, d, |r, col| rows[r][col]))
    }

    /// Inverse of [`HSMatrix::vec`]: reads `d²` entries as stacked columns.
    pub fn unvec(d: usize, v: &DVector<C64>) -> Result<Self> {
        if v.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: v.len(),
            });
        }
        Self::new(DMatrix::from_column_slice(d, d, v.as_slice()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|col| self.0[(r, col)]).collect())
            .collect()
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> DVector<C64> {
        DVector::from_column_slice(self.0.as_slice())
    }

    pub fn adjoint(&self) -> Self {
        HSMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        HSMatrix(self.0.transpose())
    }

    pub fn scale(&self, z: C64) -> Self {
        HSMatrix(&self.0 * z)
    }

    pub fn scale_real(&self, x: f64) -> Self {
        HSMatrix(self.0.scale(x))
    }

    /// `(T + T*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        HSMatrix(linalg::hermitian_part(&self.0))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    /// `||T − T*||_F`.
    pub fn hermitian_defect(&self) -> f64 {
        linalg::frobenius(&(&self.0 - self.0.adjoint()))
    }

    /// Quadratic form `⟨f, T f⟩`.
    pub fn quadratic(&self, f: &DVector<C64>) -> C64 {
        f.dotc(&(&self.0 * f))
    }

    fn check_dim(&self, other: &HSMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for HSMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|col| {
                    let z = self.0[(r, col)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&HSMatrix> for &HSMatrix {
            type Output = HSMatrix;
            fn $method(self, rhs: &HSMatrix) -> HSMatrix {
                HSMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $tr<HSMatrix> for HSMatrix {
            type Output = HSMatrix;
            fn $method(self, rhs: HSMatrix) -> HSMatrix {
                HSMatrix(self.0 $op rhs.0)
            }
        }
        impl $tr<&HSMatrix> for HSMatrix {
            type Output = HSMatrix;
            fn $method(self, rhs: &HSMatrix) -> HSMatrix {
                HSMatrix(self.0 $op &rhs.0)
            }
        }
        impl $tr<HSMatrix> for &HSMatrix {
            type Output = HSMatrix;
            fn $method(self, rhs: HSMatrix) -> HSMatrix {
                HSMatrix(&self.0 $op rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);

impl Neg for &HSMatrix {
    type Output = HSMatrix;
    fn neg(self) -> HSMatrix {
        HSMatrix(-&self.0)
    }
}

impl Neg for HSMatrix {
    type Output = HSMatrix;
    fn neg(self) -> HSMatrix {
        HSMatrix(-self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PositivityClass {
    NonHermitian,
    Indefinite,
    PsdSingular,
    PositiveDefinite,
}

impl PositivityClass {
    pub fn is_hermitian(self) -> bool {
        self != PositivityClass::NonHermitian
    }

    /// PSD within tolerance (singular or definite).
    pub fn is_psd(self) -> bool {
        matches!(
            self,
            PositivityClass::PsdSingular | PositivityClass::PositiveDefinite
        )
    }

    pub fn is_pd(self) -> bool {
        self == PositivityClass::PositiveDefinite
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PositivityClass::NonHermitian => "NonHermitian",
            PositivityClass::Indefinite => "Indefinite",
            PositivityClass::PsdSingular => "PsdSingular",
            PositivityClass::PositiveDefinite => "PositiveDefinite",
        }
    }
}

impl fmt::Display for PositivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of [`classify_hermitian`].
///
/// For Hermitian inputs `lambda_min` is the greatest lower bound
/// `inf ⟨f, T f⟩` over unit `f` and `witness` attains it. For non-Hermitian
/// inputs `lambda_min` is taken from the Hermitian part and `witness` is a
/// unit vector with `Im ⟨f, T f⟩ ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub class: PositivityClass,
    pub lambda_min: f64,
    pub kernel_dim: usize,
    pub witness: HVector,
}

/// `tr(η* τ)`, conjugate-linear in `eta`.
pub fn frob_inner(eta: &HSMatrix, tau: &HSMatrix) -> Result<C64> {
    eta.check_dim(tau)?;
    Ok(eta
        .0
        .iter()
        .zip(tau.0.iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

pub fn frob_norm(eta: &HSMatrix) -> f64 {
    linalg::frobenius(&eta.0)
}

/// Largest singular value of an operator on `H`.
pub fn op_norm(a: &HSMatrix) -> f64 {
    linalg::op_norm(&a.0)
}

fn check_index(d: usize, n: usize, m: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if n >= d || m >= d {
        return Err(Error::IndexOutOfRange {
            row: n,
            col: m,
            dim: d,
        });
    }
    Ok(())
}

/// The matrix unit `ε_nm = |e_n⟩⟨e_m|`.
pub fn basis_eps(d: usize, n: usize, m: usize) -> Result<HSMatrix> {
    check_index(d, n, m)?;
    let mut out = DMatrix::zeros(d, d);
    out[(n, m)] = c(1.0, 0.0);
    Ok(HSMatrix(out))
}

/// The Hermitian basis element `((1+i)/2) ε_nm + ((1−i)/2) ε_mn`.
///
/// The family `{ε̂_nm}` is orthonormal in `S₂` and `ε̂_nn = ε_nn`.
pub fn basis_hat_eps(d: usize, n: usize, m: usize) -> Result<HSMatrix> {
    check_index(d, n, m)?;
    let mut out = DMatrix::zeros(d, d);
    if n == m {
        out[(n, n)] = c(1.0, 0.0);
    } else {
        out[(n, m)] = c(0.5, 0.5);
        out[(m, n)] = c(0.5, -0.5);
    }
    Ok(HSMatrix(out))
}

/// Positivity classification of `T` relative to `tol · max(1, ||T||_F)`.
pub fn classify_hermitian(t: &HSMatrix, tol: f64) -> PositivityReport {
    classify_matrix(&t.0, tol)
}

/// [`classify_hermitian`] for a square matrix of any size; used on
/// Liouville matrices as well as on operators on `H`.
pub fn classify_matrix(t: &DMatrix<C64>, tol: f64) -> PositivityReport {
    let norm = linalg::frobenius(t);
    let scale = norm.max(1.0);
    let threshold = tol * scale;
    let defect = linalg::frobenius(&(t - t.adjoint()));
    let eig = linalg::eigh(t);
    let lambda_min = eig.min();
    let kernel_dim = eig.values.iter().filter(|l| l.abs() <= threshold).count();

    if defect > tol * norm {
        let skew = linalg::eigh(&linalg::skew_part(t));
        let idx = if skew.min().abs() >= skew.max().abs() {
            0
        } else {
            skew.values.len() - 1
        };
        return PositivityReport {
            class: PositivityClass::NonHermitian,
            lambda_min,
            kernel_dim,
            witness: HVector(skew.vector(idx)),
        };
    }

    let class = if lambda_min < -threshold {
        PositivityClass::Indefinite
    } else if lambda_min <= threshold {
        PositivityClass::PsdSingular
    } else {
        PositivityClass::PositiveDefinite
    };
    PositivityReport {
        class,
        lambda_min,
        kernel_dim,
        witness: HVector(eig.vector(0)),
    }
}
