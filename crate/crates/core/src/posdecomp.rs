//! Positivity-structured decompositions of superoperators.
//!
//! Every constructive routine is split into a parameter search and a pure
//! builder. The search records its choices in a [`DecompositionTrace`]; the
//! matching `replay_*` function feeds those recorded values back through the
//! builder and reproduces the output without searching again.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hs::{self, classify_hermitian, HSMatrix, PositivityClass, PositivityReport};
use crate::linalg::{self, c, real, C64};
use crate::superop::{self, LRSum, LRTerm, LiouvilleMatrix};

/// Initial relative backoff `ε` for the `t = (1 − ε) t₀` searches.
pub const EPS_START: f64 = 0.125;
/// Smallest backoff tried before giving up.
pub const EPS_FLOOR: f64 = 9.094947017729282e-13; // 2⁻⁴⁰

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedTerm {
    pub sign: Sign,
    pub a: HSMatrix,
    pub b: HSMatrix,
}

/// `η ↦ Σ sₙ aₙ η bₙ` with at most one negative sign, always on the first term.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedLRSum {
    dim: usize,
    terms: Vec<SignedTerm>,
}

impl SignedLRSum {
    pub fn new(dim: usize, terms: Vec<SignedTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            for m in [&t.a, &t.b] {
                if m.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: m.dim(),
                    });
                }
            }
            if t.sign == Sign::Minus && i != 0 {
                return Err(Error::ShapeMismatch(format!(
                    "negative term must come first, found one at index {i}"
                )));
            }
        }
        Ok(SignedLRSum { dim, terms })
    }

    /// All-positive signed sum with the same terms.
    pub fn from_lrsum(s: &LRSum) -> Self {
        SignedLRSum {
            dim: s.dim(),
            terms: s
                .terms()
                .iter()
                .map(|t| SignedTerm {
                    sign: Sign::Plus,
                    a: t.a.clone(),
                    b: t.b.clone(),
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[SignedTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_negative_lead(&self) -> bool {
        self.terms.first().is_some_and(|t| t.sign == Sign::Minus)
    }

    /// The same superoperator with signs folded into the left factors.
    pub fn to_lrsum(&self) -> LRSum {
        let terms = self
            .terms
            .iter()
            .map(|t| LRTerm {
                a: t.a.scale_real(t.sign.value()),
                b: t.b.clone(),
            })
            .collect();
        LRSum::from_terms_unchecked(self.dim, terms)
    }

    pub fn to_liouville(&self) -> LiouvilleMatrix {
        superop::to_liouville(&self.to_lrsum())
    }

    /// Swaps the roles of the left and right factors; see [`LRSum::transposed`].
    pub fn transposed(&self) -> SignedLRSum {
        SignedLRSum {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| SignedTerm {
                    sign: t.sign,
                    a: t.b.transpose(),
                    b: t.a.transpose(),
                })
                .collect(),
        }
    }
}

/// Positive scalars `ζ₂, ζ₃, …`, one per term after the negative one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaCertificate {
    zetas: Vec<f64>,
}

impl ZetaCertificate {
    pub fn new(zetas: Vec<f64>) -> Result<Self> {
        if let Some(z) = zetas.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "zeta values must be positive, got {z}"
            )));
        }
        Ok(ZetaCertificate { zetas })
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zetas
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexedValue {
    pub n: usize,
    pub m: usize,
    pub value: f64,
}

/// One recorded choice of a constructive decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TraceStep {
    /// `â = α a`, `b̂ = b / α` with `α = ⟨f₀, b f₀⟩`.
    OneSum {
        f0: Vec<[f64; 2]>,
        alpha: [f64; 2],
        skew_fallback: bool,
    },
    /// Linear-independence reduction of the input terms.
    Reduce { terms_in: usize, terms_out: usize },
    /// The input collapsed to a single term; the one-sum result is split in half.
    SplitSingle,
    /// Rewrites term `target` so that its right factor becomes positive definite.
    Fold {
        target: usize,
        already_pd: bool,
        g0: Vec<[f64; 2]>,
        alpha_target: [f64; 2],
        alpha_other: [f64; 2],
    },
    /// Pencil shift `t = (1 − ε) t₀`; the margins are `λ_min(b₂ − t b₁)`
    /// and `λ_min(a₁ + t a₂)`.
    Shift {
        t0: f64,
        t: f64,
        epsilon: f64,
        shrinks: u32,
        right_margin: f64,
        left_margin: f64,
    },
    /// Final left-side shift making the first left factor semidefinite.
    Mirror { s_min: f64, s: f64 },
    /// One-dimensional `S₂`: `A = λ·id` written as `−η λ + η 2λ`.
    Scalar { lambda: f64 },
    /// First approximation: pencil of the first two diagonal blocks.
    Stage1 {
        t0: f64,
        t: f64,
        epsilon: f64,
        shrinks: u32,
        f: Vec<[f64; 2]>,
        gamma: Vec<IndexedValue>,
    },
    /// `β_nm` making `β_nm a₂₂ + a_nm` positive definite.
    Beta {
        values: Vec<IndexedValue>,
        minimal: Vec<IndexedValue>,
    },
    /// `α` making `α b₁₁ − b₂₂` positive definite.
    Alpha { minimal: f64, alpha: f64 },
    /// `λ_nm` making `ε̂_nm + λ_nm c₁₁` semidefinite.
    Lambda {
        values: Vec<IndexedValue>,
        minimal: Vec<IndexedValue>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecompositionTrace {
    pub steps: Vec<TraceStep>,
}

impl DecompositionTrace {
    fn push(&mut self, step: TraceStep) {
        self.steps.push(step);
    }

    fn into_no_progress(self, stage: &str) -> Error {
        Error::NoProgress {
            stage: stage.to_string(),
            trace: Box::new(self),
        }
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpair(p: [f64; 2]) -> C64 {
    c(p[0], p[1])
}

fn vec_pairs(v: &DVector<C64>) -> Vec<[f64; 2]> {
    v.iter().copied().map(pair).collect()
}

fn is_pd(m: &HSMatrix, tol: f64) -> bool {
    classify_hermitian(m, tol).class.is_pd()
}

fn is_psd(m: &HSMatrix, tol: f64) -> bool {
    classify_hermitian(m, tol).class.is_psd()
}

fn check_dims(ms: &[&HSMatrix]) -> Result<usize> {
    let d = ms[0].dim();
    for m in ms {
        if m.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.dim(),
            });
        }
    }
    Ok(d)
}

/// Smallest generalized eigenvalue of `(x, y)` for positive definite `y`.
fn pencil_min(x: &HSMatrix, y: &HSMatrix) -> Option<f64> {
    linalg::pencil(x.as_matrix(), y.as_matrix()).map(|e| e.min())
}

fn pencil_max(x: &HSMatrix, y: &HSMatrix) -> Option<f64> {
    linalg::pencil(x.as_matrix(), y.as_matrix()).map(|e| e.max())
}

/// A unit vector `f` with `⟨f, m f⟩ ≠ 0`: the extreme eigenvector of the
/// Hermitian part, or of the skew part when the Hermitian part vanishes.
fn nonvanishing_direction(m: &HSMatrix) -> Option<(DVector<C64>, C64, bool)> {
    let norm = hs::frob_norm(m);
    if norm == 0.0 {
        return None;
    }
    for (part, skew) in [
        (linalg::hermitian_part(m.as_matrix()), false),
        (linalg::skew_part(m.as_matrix()), true),
    ] {
        let e = linalg::eigh(&part);
        let idx = if e.min().abs() >= e.max().abs() {
            0
        } else {
            e.values.len() - 1
        };
        if e.values[idx].abs() > 1e-14 * norm {
            let f = e.vector(idx);
            let q = m.quadratic(&f);
            return Some((f, q, skew));
        }
    }
    None
}

fn check_pd_superop(s: &LRSum, tol: f64) -> Result<PositivityReport> {
    let rep = superop::superop_classify(s, tol);
    if !rep.class.is_pd() {
        return Err(Error::NotPositiveDefinite {
            class: rep.class,
            lambda_min: rep.lambda_min,
        });
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// one summand

fn one_sum_build(a: &HSMatrix, b: &HSMatrix, alpha: C64) -> (HSMatrix, HSMatrix) {
    let ah = a.scale(alpha).hermitian_part();
    let bh = b.scale(alpha.inv()).hermitian_part();
    (ah, bh)
}

/// Rewrites a nonzero positive superoperator `η ↦ a η b` as `â η b̂` with
/// `â, b̂ ≥ 0`, both definite when the superoperator is.
pub fn one_sum_positive(
    a: &HSMatrix,
    b: &HSMatrix,
    tol: f64,
) -> Result<(HSMatrix, HSMatrix, DecompositionTrace)> {
    check_dims(&[a, b])?;
    let s = LRSum::from_pairs(vec![(a.clone(), b.clone())])?;
    let liou = superop::to_liouville(&s);
    let rep = hs::classify_matrix(liou.matrix(), tol);
    if !rep.class.is_psd() || liou.frobenius() <= tol {
        return Err(Error::NotPositive {
            class: rep.class,
            lambda_min: rep.lambda_min,
        });
    }
    if a.is_zero() || b.is_zero() {
        return Err(Error::DegenerateFactor(
            "zero factor in a nonzero one-term sum".into(),
        ));
    }
    let (f0, alpha, skew_fallback) = nonvanishing_direction(b).ok_or_else(|| {
        Error::DegenerateFactor("right factor has vanishing numerical range".into())
    })?;

    let mut trace = DecompositionTrace::default();
    trace.push(TraceStep::OneSum {
        f0: vec_pairs(&f0),
        alpha: pair(alpha),
        skew_fallback,
    });
    let (ah, bh) = one_sum_build(a, b, alpha);

    let want_pd = rep.class.is_pd();
    let ok = |m: &HSMatrix| {
        if want_pd {
            is_pd(m, tol)
        } else {
            is_psd(m, tol)
        }
    };
    if !(ok(&ah) && ok(&bh)) {
        return Err(trace.into_no_progress("one-sum normalization"));
    }
    Ok((ah, bh, trace))
}

pub fn replay_one_sum(
    a: &HSMatrix,
    b: &HSMatrix,
    trace: &DecompositionTrace,
) -> Result<(HSMatrix, HSMatrix)> {
    match trace.steps.first() {
        Some(TraceStep::OneSum { alpha, .. }) => Ok(one_sum_build(a, b, unpair(*alpha))),
        _ => Err(Error::ShapeMismatch(
            "trace does not start with a one-sum step".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// two summands

#[derive(Clone)]
struct Pair {
    a: HSMatrix,
    b: HSMatrix,
}

/// `(a_t/α_t, α_t b_t + α_o b_o)` and `(a_o − (α_o/α_t) a_t, b_o)`.
fn fold(terms: &mut [Pair; 2], target: usize, alpha_t: C64, alpha_o: C64) {
    let other = 1 - target;
    let (t, o) = (terms[target].clone(), terms[other].clone());
    terms[target] = Pair {
        a: t.a.scale(alpha_t.inv()),
        b: (t.b.scale(alpha_t) + o.b.scale(alpha_o)).hermitian_part(),
    };
    terms[other] = Pair {
        a: o.a - t.a.scale(alpha_o / alpha_t),
        b: o.b,
    };
}

struct Shifted {
    p_a: HSMatrix,
    p_b: HSMatrix,
    q_a: HSMatrix,
    q_b: HSMatrix,
}

fn shift(terms: &[Pair; 2], t: f64) -> Shifted {
    let [first, second] = terms;
    Shifted {
        p_a: (&first.a + second.a.scale_real(t)).hermitian_part(),
        p_b: first.b.clone(),
        q_a: second.a.hermitian_part(),
        q_b: (&second.b - first.b.scale_real(t)).hermitian_part(),
    }
}

fn mirror(sh: &Shifted, s: f64) -> SignedLRSum {
    let terms = vec![
        SignedTerm {
            sign: Sign::Plus,
            a: (&sh.q_a + sh.p_a.scale_real(s)).hermitian_part(),
            b: sh.q_b.clone(),
        },
        SignedTerm {
            sign: Sign::Plus,
            a: sh.p_a.clone(),
            b: (&sh.p_b - sh.q_b.scale_real(s)).hermitian_part(),
        },
    ];
    SignedLRSum {
        dim: sh.p_a.dim(),
        terms,
    }
}

fn split_single(dim: usize, ah: HSMatrix, bh: HSMatrix) -> SignedLRSum {
    let half = bh.scale_real(0.5);
    SignedLRSum {
        dim,
        terms: vec![
            SignedTerm {
                sign: Sign::Plus,
                a: ah.clone(),
                b: half.clone(),
            },
            SignedTerm {
                sign: Sign::Plus,
                a: ah,
                b: half,
            },
        ],
    }
}

/// Rewrites a positive definite `η ↦ a₁ η b₁ + a₂ η b₂` as
/// `â₁ η b̂₁ + â₂ η b̂₂` with `â₁ ≥ 0`, `â₂ > 0` and `b̂₁, b̂₂ > 0`.
///
/// Steps: reduce to linearly independent factors; fold so that both right
/// factors are positive definite; shift along the `(b₂, b₁)` pencil
/// (`t = (1 − ε) t₀`) so that `a₁ + t a₂` is positive definite; finally
/// shift the left factors by the smallest `s ≥ 0` that makes `a₂ + s(a₁ + t a₂)`
/// semidefinite.
pub fn two_sum_pd(
    a1: &HSMatrix,
    b1: &HSMatrix,
    a2: &HSMatrix,
    b2: &HSMatrix,
    tol: f64,
) -> Result<(SignedLRSum, DecompositionTrace)> {
    let d = check_dims(&[a1, b1, a2, b2])?;
    let s = LRSum::from_pairs(vec![(a1.clone(), b1.clone()), (a2.clone(), b2.clone())])?;
    check_pd_superop(&s, tol)?;

    let mut trace = DecompositionTrace::default();
    let reduced = superop::reduce_li(&s, tol);
    trace.push(TraceStep::Reduce {
        terms_in: 2,
        terms_out: reduced.len(),
    });
    match reduced.len() {
        0 => {
            return Err(Error::DegenerateFactor(
                "positive definite operator reduced to zero terms".into(),
            ))
        }
        1 => {
            let t = &reduced.terms()[0];
            let (ah, bh, sub) = one_sum_positive(&t.a, &t.b, tol)?;
            trace.steps.extend(sub.steps);
            trace.push(TraceStep::SplitSingle);
            return Ok((split_single(d, ah, bh), trace));
        }
        _ => {}
    }

    let mut terms = [
        Pair {
            a: reduced.terms()[0].a.clone(),
            b: reduced.terms()[0].b.clone(),
        },
        Pair {
            a: reduced.terms()[1].a.clone(),
            b: reduced.terms()[1].b.clone(),
        },
    ];

    for target in 0..2 {
        if is_pd(&terms[target].b, tol) {
            terms[target].b = terms[target].b.hermitian_part();
            trace.push(TraceStep::Fold {
                target,
                already_pd: true,
                g0: Vec::new(),
                alpha_target: [1.0, 0.0],
                alpha_other: [0.0, 0.0],
            });
            continue;
        }
        let (g0, alpha_t, _) = nonvanishing_direction(&terms[target].a)
            .ok_or_else(|| Error::DegenerateFactor(format!("left factor {target} vanishes")))?;
        let alpha_o = terms[1 - target].a.quadratic(&g0);
        trace.push(TraceStep::Fold {
            target,
            already_pd: false,
            g0: vec_pairs(&g0),
            alpha_target: pair(alpha_t),
            alpha_other: pair(alpha_o),
        });
        fold(&mut terms, target, alpha_t, alpha_o);
    }
    for t in terms.iter_mut() {
        t.a = t.a.hermitian_part();
    }
    if !(is_pd(&terms[0].b, tol) && is_pd(&terms[1].b, tol)) {
        return Err(trace.into_no_progress("two-sum fold"));
    }

    let t0 = pencil_min(&terms[1].b, &terms[0].b).ok_or_else(|| {
        Error::DegenerateFactor("right factor lost definiteness after folding".into())
    })?;
    let mut epsilon = EPS_START;
    let mut shrinks = 0;
    let (t, shifted, margins) = loop {
        let t = (1.0 - epsilon) * t0;
        let sh = shift(&terms, t);
        let right = classify_hermitian(&sh.q_b, tol);
        let left = classify_hermitian(&sh.p_a, tol);
        let margins = (right.lambda_min, left.lambda_min);
        if right.class.is_pd() && left.class.is_pd() {
            break (t, sh, margins);
        }
        epsilon *= 0.5;
        shrinks += 1;
        if epsilon < EPS_FLOOR {
            trace.push(TraceStep::Shift {
                t0,
                t,
                epsilon,
                shrinks,
                right_margin: margins.0,
                left_margin: margins.1,
            });
            return Err(trace.into_no_progress("two-sum pencil shift"));
        }
    };
    trace.push(TraceStep::Shift {
        t0,
        t,
        epsilon,
        shrinks,
        right_margin: margins.0,
        left_margin: margins.1,
    });

    let s_min = -pencil_min(&shifted.q_a, &shifted.p_a)
        .ok_or_else(|| Error::DegenerateFactor("shifted left factor is not definite".into()))?;
    let s_shift = s_min.max(0.0);
    trace.push(TraceStep::Mirror { s_min, s: s_shift });
    let out = mirror(&shifted, s_shift);

    let [t1, t2] = [&out.terms[0], &out.terms[1]];
    if !(is_psd(&t1.a, tol) && is_pd(&t2.a, tol) && is_pd(&t1.b, tol) && is_pd(&t2.b, tol)) {
        return Err(trace.into_no_progress("two-sum final shift"));
    }
    Ok((out, trace))
}

pub fn replay_two_sum(
    a1: &HSMatrix,
    b1: &HSMatrix,
    a2: &HSMatrix,
    b2: &HSMatrix,
    tol: f64,
    trace: &DecompositionTrace,
) -> Result<SignedLRSum> {
    let d = check_dims(&[a1, b1, a2, b2])?;
    let s = LRSum::from_pairs(vec![(a1.clone(), b1.clone()), (a2.clone(), b2.clone())])?;
    let reduced = superop::reduce_li(&s, tol);
    let bad = || Error::ShapeMismatch("trace does not match a two-sum decomposition".into());

    if reduced.len() == 1 {
        let t = &reduced.terms()[0];
        let alpha = trace
            .steps
            .iter()
            .find_map(|st| match st {
                TraceStep::OneSum { alpha, .. } => Some(unpair(*alpha)),
                _ => None,
            })
            .ok_or_else(bad)?;
        let (ah, bh) = one_sum_build(&t.a, &t.b, alpha);
        return Ok(split_single(d, ah, bh));
    }
    if reduced.len() != 2 {
        return Err(bad());
    }
    let mut terms = [
        Pair {
            a: reduced.terms()[0].a.clone(),
            b: reduced.terms()[0].b.clone(),
        },
        Pair {
            a: reduced.terms()[1].a.clone(),
            b: reduced.terms()[1].b.clone(),
        },
    ];
    let mut t_shift = None;
    let mut s_shift = None;
    for st in &trace.steps {
        match st {
            TraceStep::Fold {
                target,
                already_pd,
                alpha_target,
                alpha_other,
                ..
            } => {
                if *already_pd {
                    terms[*target].b = terms[*target].b.hermitian_part();
                } else {
                    fold(
                        &mut terms,
                        *target,
                        unpair(*alpha_target),
                        unpair(*alpha_other),
                    );
                }
            }
            TraceStep::Shift { t, .. } => t_shift = Some(*t),
            TraceStep::Mirror { s, .. } => s_shift = Some(*s),
            _ => {}
        }
    }
    for t in terms.iter_mut() {
        t.a = t.a.hermitian_part();
    }
    let shifted = shift(&terms, t_shift.ok_or_else(bad)?);
    Ok(mirror(&shifted, s_shift.ok_or_else(bad)?))
}

// ---------------------------------------------------------------------------
// diagonal blocks

/// Diagonal coefficient operators `a_nn` of the left basis decomposition,
/// each with its positivity report. For a positive definite `A` every
/// `a_nn` is positive definite with `m_{a_nn} ≥ m_A`.
pub fn diag_blocks(s: &LRSum, tol: f64) -> Result<Vec<(HSMatrix, PositivityReport)>> {
    let liou = superop::to_liouville(s);
    let rep = hs::classify_matrix(liou.matrix(), tol);
    if !rep.class.is_hermitian() {
        return Err(Error::NotSelfadjoint {
            defect: superop::selfadjoint_defect(&liou),
        });
    }
    Ok((0..s.dim())
        .map(|n| {
            let block = superop::left_coefficient(&liou, n, n);
            let r = classify_hermitian(&block, tol);
            (block, r)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// negative-leading-term decomposition

/// Off-diagonal-and-lower index set `(n, m) ∉ {(0,0), (1,1)}` in row order.
fn rest_indices(d: usize) -> Vec<(usize, usize)> {
    (0..d)
        .flat_map(|n| (0..d).map(move |m| (n, m)))
        .filter(|&(n, m)| !(n == m && n < 2))
        .collect()
}

/// Hermitian coefficients `â_nm = ((1−i)/2) a_nm + ((1+i)/2) a_mn` of
/// `A η = Σ ε̂_nm η â_nm`, indexed `[n][m]`.
fn hat_coefficients(liou: &LiouvilleMatrix) -> Vec<Vec<HSMatrix>> {
    let d = liou.dim();
    let herm = LiouvilleMatrix::new(d, linalg::hermitian_part(liou.matrix())).expect("finite");
    let w_nm = c(0.5, -0.5);
    let w_mn = c(0.5, 0.5);
    (0..d)
        .map(|n| {
            (0..d)
                .map(|m| {
                    let a_nm = superop::left_coefficient(&herm, n, m);
                    let a_mn = superop::left_coefficient(&herm, m, n);
                    (a_nm.scale(w_nm) + a_mn.scale(w_mn)).hermitian_part()
                })
                .collect()
        })
        .collect()
}

fn hat_eps(d: usize, n: usize, m: usize) -> HSMatrix {
    hs::basis_hat_eps(d, n, m).expect("indices in range")
}

/// `γ₁₁ (ε₁₁ + t ε₂₂) + Σ_rest γ_nm ε̂_nm`.
fn combined_left(d: usize, gamma11: f64, t: f64, gamma_rest: &[(usize, usize, f64)]) -> HSMatrix {
    let mut g = (hat_eps(d, 0, 0) + hat_eps(d, 1, 1).scale_real(t)).scale_real(gamma11);
    for &(n, m, gm) in gamma_rest {
        g = g + hat_eps(d, n, m).scale_real(gm);
    }
    g.hermitian_part()
}

/// Parameters of the negative-leading-term construction.
struct PdParams {
    t: f64,
    gamma11: f64,
    gamma_rest: Vec<(usize, usize, f64)>,
    beta: Vec<(usize, usize, f64)>,
    alpha: f64,
    lambda: Vec<(usize, usize, f64)>,
}

/// First-stage rewrite `A η = L₁₁ η R₁₁ + ε₂₂ η R₂₂ + Σ_rest ε̂_nm η R_nm`.
struct FirstApprox {
    left11: HSMatrix,
    right11: HSMatrix,
    right22: HSMatrix,
    rest: Vec<(usize, usize, HSMatrix)>,
}

fn first_approx(
    hat: &[Vec<HSMatrix>],
    t: f64,
    gamma11: f64,
    gamma_rest: &[(usize, usize, f64)],
) -> FirstApprox {
    let d = hat.len();
    let b1 = &hat[0][0];
    let b2 = &hat[1][1];
    FirstApprox {
        left11: combined_left(d, gamma11, t, gamma_rest),
        right11: b1.scale_real(1.0 / gamma11),
        right22: (b2 - b1.scale_real(t)).hermitian_part(),
        rest: gamma_rest
            .iter()
            .map(|&(n, m, gm)| {
                (
                    n,
                    m,
                    (&hat[n][m] - b1.scale_real(gm / gamma11)).hermitian_part(),
                )
            })
            .collect(),
    }
}

/// Second-stage quantities: `c₁₁ = α L₁₁ − b₂₂`, `b₂₂ = ε₂₂ − Σ β_nm ε̂_nm`,
/// `R'_nm = β_nm R₂₂ + R_nm`.
struct SecondStage {
    c11: HSMatrix,
    right_rest: Vec<(usize, usize, HSMatrix)>,
}

fn b22_of(d: usize, beta: &[(usize, usize, f64)]) -> HSMatrix {
    let mut b22 = hat_eps(d, 1, 1);
    for &(n, m, bv) in beta {
        b22 = b22 - hat_eps(d, n, m).scale_real(bv);
    }
    b22
}

fn second_stage(fa: &FirstApprox, beta: &[(usize, usize, f64)], alpha: f64) -> SecondStage {
    let d = fa.left11.dim();
    let b22 = b22_of(d, beta);
    let c11 = (fa.left11.scale_real(alpha) - b22).hermitian_part();
    let right_rest = fa
        .rest
        .iter()
        .zip(beta)
        .map(|((n, m, r), &(_, _, bv))| (*n, *m, (fa.right22.scale_real(bv) + r).hermitian_part()))
        .collect();
    SecondStage { c11, right_rest }
}

fn pd_build(hat: &[Vec<HSMatrix>], p: &PdParams) -> SignedLRSum {
    let d = hat.len();
    let fa = first_approx(hat, p.t, p.gamma11, &p.gamma_rest);
    let st = second_stage(&fa, &p.beta, p.alpha);

    let lambda_of = |n: usize, m: usize| {
        p.lambda
            .iter()
            .find(|&&(ln, lm, _)| ln == n && lm == m)
            .map(|&(_, _, l)| l)
    };
    let mut right1 = fa.right22.clone();
    for (n, m, r) in &st.right_rest {
        if let Some(l) = lambda_of(*n, *m) {
            right1 = right1 + r.scale_real(l);
        }
    }

    let mut terms = vec![
        SignedTerm {
            sign: Sign::Minus,
            a: st.c11.clone(),
            b: right1.hermitian_part(),
        },
        SignedTerm {
            sign: Sign::Plus,
            a: fa.left11.clone(),
            b: (&fa.right11 + fa.right22.scale_real(p.alpha)).hermitian_part(),
        },
    ];
    for (n, m, r) in &st.right_rest {
        if let Some(l) = lambda_of(*n, *m) {
            terms.push(SignedTerm {
                sign: Sign::Plus,
                a: (hat_eps(d, *n, *m) + st.c11.scale_real(l)).hermitian_part(),
                b: r.clone(),
            });
        }
    }
    for (n, m, r) in &st.right_rest {
        if n == m {
            terms.push(SignedTerm {
                sign: Sign::Plus,
                a: hat_eps(d, *n, *n),
                b: r.clone(),
            });
        }
    }
    SignedLRSum { dim: d, terms }
}

fn scalar_case(lambda: f64) -> SignedLRSum {
    let one = HSMatrix::identity(1);
    SignedLRSum {
        dim: 1,
        terms: vec![
            SignedTerm {
                sign: Sign::Minus,
                a: one.clone(),
                b: one.scale_real(lambda),
            },
            SignedTerm {
                sign: Sign::Plus,
                a: one.clone(),
                b: one.scale_real(2.0 * lambda),
            },
        ],
    }
}

fn indexed(values: &[(usize, usize, f64)]) -> Vec<IndexedValue> {
    values
        .iter()
        .map(|&(n, m, value)| IndexedValue { n, m, value })
        .collect()
}

fn unindexed(values: &[IndexedValue]) -> Vec<(usize, usize, f64)> {
    values.iter().map(|v| (v.n, v.m, v.value)).collect()
}

/// Doubling rule for the "large enough" constants: twice the minimal
/// feasible value, never below `floor`.
fn with_margin(minimal: f64, floor: f64) -> f64 {
    2.0 * minimal.max(floor)
}

/// Negative-leading-term decomposition of a positive definite superoperator:
/// `A η = −a₁ η b₁ + Σ_{n≥2} aₙ η bₙ` with `a₁, a₂ > 0`, `a₃, … ≥ 0` and
/// every `bₙ > 0`.
///
/// With `d` the dimension the output has `d²` terms: the negative term, the
/// combined positive term, one term per off-diagonal pair `(n, m)` and one
/// per diagonal index `n ≥ 3`.
pub fn pd_decompose(s: &LRSum, tol: f64) -> Result<(SignedLRSum, DecompositionTrace)> {
    let rep = check_pd_superop(s, tol)?;
    let liou = superop::to_liouville(s);
    let d = s.dim();
    let mut trace = DecompositionTrace::default();

    if d == 1 {
        let lambda = liou.matrix()[(0, 0)].re;
        trace.push(TraceStep::Scalar { lambda });
        return Ok((scalar_case(lambda), trace));
    }

    let hat = hat_coefficients(&liou);
    let b1 = &hat[0][0];
    let b2 = &hat[1][1];
    let pen = linalg::pencil(b2.as_matrix(), b1.as_matrix()).ok_or(Error::NotPositiveDefinite {
        class: rep.class,
        lambda_min: rep.lambda_min,
    })?;
    let t0 = pen.min();
    let mut f = pen.vector(0);
    f /= real(f.norm());
    let gamma11 = b1.quadratic(&f).re;
    let rest = rest_indices(d);
    let gamma_rest: Vec<(usize, usize, f64)> = rest
        .iter()
        .map(|&(n, m)| (n, m, hat[n][m].quadratic(&f).re))
        .collect();

    let mut epsilon = EPS_START;
    let mut shrinks = 0;
    let t = loop {
        let t = (1.0 - epsilon) * t0;
        let shifted_right = (b2 - b1.scale_real(t)).hermitian_part();
        if is_pd(&shifted_right, tol) && is_pd(&combined_left(d, gamma11, t, &gamma_rest), tol) {
            break t;
        }
        epsilon *= 0.5;
        shrinks += 1;
        if epsilon < EPS_FLOOR {
            break f64::NAN;
        }
    };
    let mut gamma = vec![IndexedValue {
        n: 0,
        m: 0,
        value: gamma11,
    }];
    gamma.extend(indexed(&gamma_rest));
    trace.push(TraceStep::Stage1 {
        t0,
        t,
        epsilon,
        shrinks,
        f: vec_pairs(&f),
        gamma,
    });
    if t.is_nan() {
        return Err(trace.into_no_progress("first approximation"));
    }

    let fa = first_approx(&hat, t, gamma11, &gamma_rest);
    let mut beta = Vec::with_capacity(rest.len());
    let mut beta_min = Vec::with_capacity(rest.len());
    for (n, m, r) in &fa.rest {
        let minimal = match pencil_min(r, &fa.right22) {
            Some(l) => -l,
            None => return Err(trace.into_no_progress("beta selection")),
        };
        beta_min.push((*n, *m, minimal));
        beta.push((*n, *m, with_margin(minimal, 0.5)));
    }
    trace.push(TraceStep::Beta {
        values: indexed(&beta),
        minimal: indexed(&beta_min),
    });

    let b22 = b22_of(d, &beta);
    let alpha_min = match pencil_max(&b22, &fa.left11) {
        Some(l) => l,
        None => return Err(trace.into_no_progress("alpha selection")),
    };
    let alpha = with_margin(alpha_min, f64::MIN_POSITIVE);
    trace.push(TraceStep::Alpha {
        minimal: alpha_min,
        alpha,
    });

    let st = second_stage(&fa, &beta, alpha);
    let mut lambda = Vec::new();
    let mut lambda_min = Vec::new();
    for &(n, m) in rest.iter().filter(|(n, m)| n != m) {
        let minimal = match pencil_min(&hat_eps(d, n, m), &st.c11) {
            Some(l) => -l,
            None => return Err(trace.into_no_progress("lambda selection")),
        };
        lambda_min.push((n, m, minimal));
        lambda.push((n, m, with_margin(minimal, 0.0)));
    }
    trace.push(TraceStep::Lambda {
        values: indexed(&lambda),
        minimal: indexed(&lambda_min),
    });

    let params = PdParams {
        t,
        gamma11,
        gamma_rest,
        beta,
        alpha,
        lambda,
    };
    let out = pd_build(&hat, &params);
    if !negative_lead_structure_ok(&out, tol) {
        return Err(trace.into_no_progress("final positivity check"));
    }
    Ok((out, trace))
}

/// Checks the sign and positivity pattern of a negative-leading-term
/// decomposition: `a₁, a₂ > 0`, `a₃, … ≥ 0`, all `bₙ > 0`.
pub fn negative_lead_structure_ok(out: &SignedLRSum, tol: f64) -> bool {
    out.len() >= 2
        && out.has_negative_lead()
        && out.terms.iter().skip(1).all(|t| t.sign == Sign::Plus)
        && out.terms.iter().all(|t| is_pd(&t.b, tol))
        && out.terms.iter().take(2).all(|t| is_pd(&t.a, tol))
        && out.terms.iter().skip(2).all(|t| is_psd(&t.a, tol))
}

pub fn replay_pd_decompose(s: &LRSum, trace: &DecompositionTrace) -> Result<SignedLRSum> {
    let bad = || {
        Error::ShapeMismatch("trace does not match a negative-leading-term decomposition".into())
    };
    if let Some(TraceStep::Scalar { lambda }) = trace.steps.first() {
        return Ok(scalar_case(*lambda));
    }
    let mut t = None;
    let mut gamma = None;
    let mut beta = None;
    let mut alpha = None;
    let mut lambda = None;
    for st in &trace.steps {
        match st {
            TraceStep::Stage1 {
                t: tv, gamma: g, ..
            } => {
                t = Some(*tv);
                gamma = Some(g.clone());
            }
            TraceStep::Beta { values, .. } => beta = Some(unindexed(values)),
            TraceStep::Alpha { alpha: a, .. } => alpha = Some(*a),
            TraceStep::Lambda { values, .. } => lambda = Some(unindexed(values)),
            _ => {}
        }
    }
    let gamma = gamma.ok_or_else(bad)?;
    let (g11, g_rest) = gamma.split_first().ok_or_else(bad)?;
    let params = PdParams {
        t: t.ok_or_else(bad)?,
        gamma11: g11.value,
        gamma_rest: unindexed(g_rest),
        beta: beta.ok_or_else(bad)?,
        alpha: alpha.ok_or_else(bad)?,
        lambda: lambda.ok_or_else(bad)?,
    };
    let liou = superop::to_liouville(s);
    if liou.dim() < 2 || params.gamma_rest.len() != rest_indices(liou.dim()).len() {
        return Err(bad());
    }
    Ok(pd_build(&hat_coefficients(&liou), &params))
}

// ---------------------------------------------------------------------------
// ζ-certificates

/// Margins of a ζ-certificate check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaReport {
    pub valid: bool,
    /// `λ_min(bₙ − ζₙ b₁)` for `n ≥ 2`.
    pub right_margins: Vec<f64>,
    pub right_classes: Vec<PositivityClass>,
    /// `λ_min(−a₁ + Σ ζₙ aₙ)`.
    pub left_margin: f64,
    pub left_class: PositivityClass,
}

fn check_zeta_shape(dec: &SignedLRSum, z: &ZetaCertificate) -> Result<()> {
    if !dec.has_negative_lead() {
        return Err(Error::ShapeMismatch(
            "decomposition has no negative leading term".into(),
        ));
    }
    if z.zetas.len() + 1 != dec.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} zeta values for {} non-negative terms",
            z.zetas.len(),
            dec.len() - 1
        )));
    }
    Ok(())
}

fn zeta_left(dec: &SignedLRSum, z: &ZetaCertificate) -> HSMatrix {
    let mut left = -&dec.terms[0].a;
    for (t, &zeta) in dec.terms[1..].iter().zip(&z.zetas) {
        left = left + t.a.scale_real(zeta);
    }
    left
}

/// Checks that every `bₙ − ζₙ b₁` is positive definite and that
/// `−a₁ + Σ ζₙ aₙ` is semidefinite.
pub fn zeta_check(dec: &SignedLRSum, z: &ZetaCertificate, tol: f64) -> Result<ZetaReport> {
    check_zeta_shape(dec, z)?;
    let b1 = &dec.terms[0].b;
    let rights: Vec<PositivityReport> = dec.terms[1..]
        .iter()
        .zip(&z.zetas)
        .map(|(t, &zeta)| classify_hermitian(&(&t.b - b1.scale_real(zeta)), tol))
        .collect();
    let left = classify_hermitian(&zeta_left(dec, z), tol);
    let valid = rights.iter().all(|r| r.class.is_pd()) && left.class.is_psd();
    Ok(ZetaReport {
        valid,
        right_margins: rights.iter().map(|r| r.lambda_min).collect(),
        right_classes: rights.iter().map(|r| r.class).collect(),
        left_margin: left.lambda_min,
        left_class: left.class,
    })
}

/// All-positive rewrite `(−a₁ + Σ ζₙ aₙ) η b₁ + Σ aₙ η (bₙ − ζₙ b₁)`.
pub fn zeta_transform(dec: &SignedLRSum, z: &ZetaCertificate, tol: f64) -> Result<LRSum> {
    if !zeta_check(dec, z, tol)?.valid {
        return Err(Error::CertificateInvalid);
    }
    let b1 = &dec.terms[0].b;
    let mut terms = vec![LRTerm {
        a: zeta_left(dec, z),
        b: b1.clone(),
    }];
    for (t, &zeta) in dec.terms[1..].iter().zip(&z.zetas) {
        terms.push(LRTerm {
            a: t.a.clone(),
            b: &t.b - b1.scale_real(zeta),
        });
    }
    Ok(LRSum::from_terms_unchecked(dec.dim, terms))
}

/// Searches `ζₙ = (1 − δ) uₙ` with `uₙ = λ_min` of the `(bₙ, b₁)` pencil,
/// halving `δ` from 1/2 down to 2⁻⁴⁰. When every `aₙ` (n ≥ 2) is
/// semidefinite the left condition is monotone in each `ζₙ`, so approaching
/// the upper corner of the feasible box is the best available move.
pub fn find_zeta(dec: &SignedLRSum, tol: f64) -> Option<ZetaCertificate> {
    if !dec.has_negative_lead() || dec.len() < 2 {
        return None;
    }
    let b1 = &dec.terms[0].b;
    let upper: Vec<f64> = dec.terms[1..]
        .iter()
        .map(|t| pencil_min(&t.b, b1))
        .collect::<Option<Vec<_>>>()?;
    if upper.iter().any(|&u| u.is_nan() || u <= 0.0) {
        return None;
    }
    let mut delta = 0.5;
    while delta >= EPS_FLOOR {
        let z = ZetaCertificate {
            zetas: upper.iter().map(|u| (1.0 - delta) * u).collect(),
        };
        if zeta_check(dec, &z, tol).map(|r| r.valid).unwrap_or(false) {
            return Some(z);
        }
        delta *= 0.5;
    }
    None
}

// ---------------------------------------------------------------------------
// fixture

/// The `d = 2` operator
/// `A η = (η₁₁ + (1−t)η₂₂) ε₁₁ + t η₁₂ ε₁₂ + t η₂₁ ε₂₁ + (η₂₂ + (1−t)η₁₁) ε₂₂`
/// for `t ∈ (0, 1/2)`. It is positive definite with `λ_min = t`.
///
/// Each coefficient read `η_bc ε_ad` is realized as `ε_ab η ε_cd`.
pub fn counterexample_superop(t: f64) -> Result<LRSum> {
    if !(t > 0.0 && t < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "t must lie in (0, 1/2), got {t}"
        )));
    }
    let e = |n, m| hs::basis_eps(2, n, m).expect("indices in range");
    let s = 1.0 - t;
    LRSum::from_pairs(vec![
        (e(0, 0), e(0, 0)),
        (e(0, 1).scale_real(s), e(1, 0)),
        (e(0, 0).scale_real(t), e(1, 1)),
        (e(1, 1).scale_real(t), e(0, 0)),
        (e(1, 1), e(1, 1)),
        (e(1, 0).scale_real(s), e(0, 1)),
    ])
}
