#![allow(dead_code)]

pub mod cli;

use hs_superop::superop::{self, from_liouville};
use hs_superop::{BasisVariant, HSMatrix, LRSum, LRTerm, LiouvilleMatrix, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cplx(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn raw(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| cplx(rng))
}

pub fn matrix(rng: &mut impl Rng, d: usize) -> HSMatrix {
    HSMatrix::new(raw(rng, d, d)).unwrap()
}

pub fn vector(rng: &mut impl Rng, d: usize) -> DVector<C64> {
    DVector::from_fn(d, |_, _| cplx(rng))
}

pub fn hermitian(rng: &mut impl Rng, d: usize) -> HSMatrix {
    matrix(rng, d).hermitian_part()
}

/// Haar-like unitary from the QR factor of a random matrix.
pub fn unitary(rng: &mut impl Rng, d: usize) -> DMatrix<C64> {
    let qr = raw(rng, d, d).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q.clone();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 {
            z / z.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..d {
            u[(i, j)] = q[(i, j)] * phase;
        }
    }
    u
}

/// `X X*` with `X` of size `d × rank`.
pub fn psd(rng: &mut impl Rng, d: usize, rank: usize) -> HSMatrix {
    let x = raw(rng, d, rank);
    HSMatrix::new(&x * x.adjoint()).unwrap().hermitian_part()
}

/// `X X* + δ I` with `δ ∈ [0.1, 1)`.
pub fn pd(rng: &mut impl Rng, d: usize) -> HSMatrix {
    let delta = rng.random_range(0.1..1.0);
    psd(rng, d, d) + HSMatrix::identity(d).scale_real(delta)
}

pub fn lrsum(rng: &mut impl Rng, d: usize, terms: usize) -> LRSum {
    let terms = (0..terms)
        .map(|_| LRTerm::new(matrix(rng, d), matrix(rng, d)).unwrap())
        .collect();
    LRSum::new(d, terms).unwrap()
}

pub fn liouville(rng: &mut impl Rng, d: usize) -> LiouvilleMatrix {
    LiouvilleMatrix::new(d, raw(rng, d * d, d * d)).unwrap()
}

/// Random positive definite superoperator: Liouville matrix `X X* + δ I`
/// written over the matrix-unit basis.
pub fn pd_superop(rng: &mut impl Rng, d: usize) -> LRSum {
    let n = d * d;
    let x = raw(rng, n, n);
    let delta = rng.random_range(0.05..0.5);
    let m = &x * x.adjoint() + DMatrix::identity(n, n).scale(delta);
    from_liouville(&LiouvilleMatrix::new(d, m).unwrap(), BasisVariant::LeftEps)
}

pub fn hermitian_superop(rng: &mut impl Rng, d: usize) -> LRSum {
    let n = d * d;
    let x = raw(rng, n, n);
    let m = &x + x.adjoint();
    from_liouville(&LiouvilleMatrix::new(d, m).unwrap(), BasisVariant::LeftEps)
}

/// Relative Liouville distance between two sums.
pub fn rel_dist(a: &LRSum, b: &LRSum) -> f64 {
    superop::to_liouville(a).relative_distance(&superop::to_liouville(b))
}

pub fn lambda_min(m: &HSMatrix) -> f64 {
    let h = m.hermitian_part().into_matrix();
    h.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Rank of the vertical stack of `mats`.
pub fn stacked_rank(mats: &[&HSMatrix], tol: f64) -> usize {
    let d = mats[0].dim();
    let m = DMatrix::from_fn(d * mats.len(), d, |r, c| mats[r / d].get(r % d, c));
    let s = m.svd(false, false).singular_values;
    let smax = s.max();
    s.iter().filter(|&&x| x > tol * smax).count()
}
