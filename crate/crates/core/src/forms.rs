//! Sesquilinear forms `φ(η, τ) = tr(η* A τ)` on `S₂`.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Hypothesis, Result};
use crate::hs::{self, classify_hermitian, HSMatrix, PositivityClass};
use crate::linalg::{self, C64};
use crate::superop::{self, LRSum, LiouvilleMatrix};

/// A sesquilinear form represented by the superoperator `op`.
#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    pub op: LRSum,
}

impl Form {
    pub fn new(op: LRSum) -> Self {
        Form { op }
    }

    /// The Frobenius inner product on `S₂` of dimension `d`.
    pub fn frobenius(d: usize) -> Self {
        Form {
            op: LRSum::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn liouville(&self) -> LiouvilleMatrix {
        superop::to_liouville(&self.op)
    }

    /// Forms are equal when their Liouville matrices agree to `1e-10` relative.
    pub fn same_as(&self, other: &Form) -> bool {
        self.dim() == other.dim() && self.liouville().relative_distance(&other.liouville()) <= 1e-10
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormKind {
    General,
    Hermitian,
    /// Positive form. In finite dimension every positive form on `S₂` is
    /// definite, so [`form_classify`] reports [`FormKind::DefiniteInnerProduct`].
    InnerProduct,
    DefiniteInnerProduct,
}

impl FormKind {
    pub fn is_inner_product(self) -> bool {
        matches!(
            self,
            FormKind::InnerProduct | FormKind::DefiniteInnerProduct
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FormKind::General => "General",
            FormKind::Hermitian => "Hermitian",
            FormKind::InnerProduct => "InnerProduct",
            FormKind::DefiniteInnerProduct => "DefiniteInnerProduct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormClass {
    pub kind: FormKind,
    pub lambda_min: f64,
}

pub fn eval_form(phi: &Form, eta: &HSMatrix, tau: &HSMatrix) -> Result<C64> {
    let a_tau = superop::apply(&phi.op, tau)?;
    hs::frob_inner(eta, &a_tau)
}

/// A semidefinite form with a kernel is only [`FormKind::Hermitian`]: some
/// nonzero `η` has `φ(η, η) = 0`.
pub fn form_classify(phi: &Form, tol: f64) -> FormClass {
    let rep = superop::superop_classify(&phi.op, tol);
    let kind = match rep.class {
        PositivityClass::NonHermitian => FormKind::General,
        PositivityClass::Indefinite | PositivityClass::PsdSingular => FormKind::Hermitian,
        PositivityClass::PositiveDefinite => FormKind::DefiniteInnerProduct,
    };
    FormClass {
        kind,
        lambda_min: rep.lambda_min,
    }
}

/// Norm of the form with a maximizing pair of unit vectors.
#[derive(Debug, Clone)]
pub struct FormNorm {
    pub norm: f64,
    pub eta: HSMatrix,
    pub tau: HSMatrix,
}

/// `||φ|| = sup |φ(η, τ)|` over unit `η, τ`, attained by the top singular pair.
pub fn form_norm(phi: &Form) -> FormNorm {
    let d = phi.dim();
    let m = phi.liouville().into_matrix();
    let svd = m.svd(true, true);
    let idx = svd.singular_values.imax();
    let u = svd
        .u
        .as_ref()
        .expect("left vectors")
        .column(idx)
        .into_owned();
    let v = svd.v_t.as_ref().expect("right vectors").row(idx).adjoint();
    FormNorm {
        norm: svd.singular_values[idx],
        eta: HSMatrix::unvec(d, &u).expect("d² vector"),
        tau: HSMatrix::unvec(d, &v).expect("d² vector"),
    }
}

fn check_lists(a_list: &[HSMatrix], b_list: &[HSMatrix]) -> Result<usize> {
    if a_list.is_empty() || a_list.len() != b_list.len() {
        return Err(Error::HypothesisViolated {
            index: None,
            reason: Hypothesis::Arity,
        });
    }
    let d = a_list[0].dim();
    for m in a_list.iter().chain(b_list) {
        if m.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.dim(),
            });
        }
    }
    Ok(d)
}

/// Semidefinite factors whose kernels meet only in `0`, checked by the rank
/// of the vertically stacked factors.
fn check_psd_family(mats: &[HSMatrix], tol: f64) -> Result<()> {
    for (i, m) in mats.iter().enumerate() {
        if !classify_hermitian(m, tol).class.is_psd() {
            return Err(Error::HypothesisViolated {
                index: Some(i),
                reason: Hypothesis::NotPsd,
            });
        }
    }
    let d = mats[0].dim();
    let stacked =
        nalgebra::DMatrix::from_fn(d * mats.len(), d, |r, col| mats[r / d].get(r % d, col));
    if linalg::rank(&stacked, tol) < d {
        return Err(Error::HypothesisViolated {
            index: None,
            reason: Hypothesis::KernelIntersection,
        });
    }
    Ok(())
}

fn check_pd_family(mats: &[HSMatrix], tol: f64) -> Result<()> {
    for (i, m) in mats.iter().enumerate() {
        if !classify_hermitian(m, tol).class.is_pd() {
            return Err(Error::HypothesisViolated {
                index: Some(i),
                reason: Hypothesis::NotPd,
            });
        }
    }
    Ok(())
}

/// `φ(η, τ) = Σ tr(η* aₙ τ bₙ)` for semidefinite `aₙ` without a common
/// kernel vector and positive definite `bₙ`. The result is a definite inner
/// product.
pub fn build_inner_product(a_list: &[HSMatrix], b_list: &[HSMatrix], tol: f64) -> Result<Form> {
    let _ = check_lists(a_list, b_list)?;
    check_psd_family(a_list, tol)?;
    check_pd_family(b_list, tol)?;
    from_lists(a_list, b_list)
}

/// [`build_inner_product`] with the conditions on the two sides interchanged:
/// positive definite `aₙ`, semidefinite `bₙ` without a common kernel vector.
pub fn build_inner_product_mirrored(
    a_list: &[HSMatrix],
    b_list: &[HSMatrix],
    tol: f64,
) -> Result<Form> {
    let _ = check_lists(a_list, b_list)?;
    check_pd_family(a_list, tol)?;
    check_psd_family(b_list, tol)?;
    from_lists(a_list, b_list)
}

fn from_lists(a_list: &[HSMatrix], b_list: &[HSMatrix]) -> Result<Form> {
    let pairs = a_list.iter().cloned().zip(b_list.iter().cloned()).collect();
    Ok(Form::new(LRSum::from_pairs(pairs)?))
}

/// Constants with `c_lo ||η||₁ ≤ ||η||₂ ≤ c_hi ||η||₁`.
#[derive(Debug, Clone)]
pub struct Equivalence {
    pub c_lo: f64,
    pub c_hi: f64,
    /// Attains the lower bound.
    pub witness_lo: HSMatrix,
    /// Attains the upper bound.
    pub witness_hi: HSMatrix,
    /// `||T₁||^{-1/2}` where `φ₁(η, τ) = φ₂(η, T₁ τ)`, the norm taken in the `φ₂` geometry.
    pub operator_lo: f64,
    /// `||T₂||^{1/2}` where `φ₂(η, τ) = φ₁(η, T₂ τ)`, the norm taken in the `φ₁` geometry.
    pub operator_hi: f64,
}

/// `||T||` in the geometry of the positive definite `metric`, for
/// `T = metric⁻¹ other`: the spectral norm of `L⁻¹ other L⁻*` with `metric = L L*`.
fn relative_operator_norm(other: &LiouvilleMatrix, metric: &LiouvilleMatrix) -> Option<f64> {
    let l = linalg::cholesky_lower(metric.matrix())?;
    let x = l.solve_lower_triangular(&linalg::hermitian_part(other.matrix()))?;
    let y = l.solve_lower_triangular(&x.adjoint())?;
    Some(linalg::op_norm(&y))
}

/// Tight norm-equivalence constants between two inner products, from the
/// pencil of their Liouville matrices.
pub fn equivalence_constants(phi1: &Form, phi2: &Form, tol: f64) -> Result<Equivalence> {
    if phi1.dim() != phi2.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi1.dim(),
            found: phi2.dim(),
        });
    }
    for (which, phi) in [(1, phi1), (2, phi2)] {
        if !form_classify(phi, tol).kind.is_inner_product() {
            return Err(Error::NotInnerProduct { which });
        }
    }
    let d = phi1.dim();
    let (m1, m2) = (phi1.liouville(), phi2.liouville());
    let pen =
        linalg::pencil(m2.matrix(), m1.matrix()).ok_or(Error::NotInnerProduct { which: 1 })?;
    let witness = |i: usize| -> HSMatrix {
        let mut v: DVector<C64> = pen.vector(i);
        let n = v.norm();
        v /= linalg::real(n);
        HSMatrix::unvec(d, &v).expect("d² vector")
    };
    let t1 = relative_operator_norm(&m1, &m2).ok_or(Error::NotInnerProduct { which: 2 })?;
    let t2 = relative_operator_norm(&m2, &m1).ok_or(Error::NotInnerProduct { which: 1 })?;
    Ok(Equivalence {
        c_lo: pen.min().max(0.0).sqrt(),
        c_hi: pen.max().max(0.0).sqrt(),
        witness_lo: witness(0),
        witness_hi: witness(pen.values.len() - 1),
        operator_lo: t1.powf(-0.5),
        operator_hi: t2.sqrt(),
    })
}

/// `sqrt(Re φ(η, η))`.
pub fn form_norm_of(phi: &Form, eta: &HSMatrix) -> Result<f64> {
    Ok(eval_form(phi, eta, eta)?.re.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hs::basis_eps;
    use crate::linalg::real;
    use crate::posdecomp::counterexample_superop;

    fn eps(d: usize, n: usize, m: usize) -> HSMatrix {
        basis_eps(d, n, m).unwrap()
    }

    #[test]
    fn identity_form_is_frobenius() {
        let phi = Form::frobenius(2);
        let eta = eps(2, 0, 1) + eps(2, 1, 1).scale(linalg::c(0.0, 2.0));
        let tau = eps(2, 0, 1).scale_real(3.0) + eps(2, 1, 0);
        assert_eq!(
            eval_form(&phi, &eta, &tau).unwrap(),
            hs::frob_inner(&eta, &tau).unwrap()
        );
        let cls = form_classify(&phi, 1e-9);
        assert_eq!(cls.kind, FormKind::DefiniteInnerProduct);
        assert!((cls.lambda_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counterexample_form() {
        let phi = Form::new(counterexample_superop(0.25).unwrap());
        let v = eval_form(&phi, &eps(2, 0, 1), &eps(2, 0, 1)).unwrap();
        assert!((v - real(0.25)).norm() < 1e-15);
        let cls = form_classify(&phi, 1e-9);
        assert_eq!(cls.kind, FormKind::DefiniteInnerProduct);
        assert!((cls.lambda_min - 0.25).abs() < 1e-12);
    }

    #[test]
    fn relaxation_operator_is_not_inner_product() {
        let op = LRSum::from_pairs(vec![
            (eps(2, 0, 0), eps(2, 0, 0)),
            (eps(2, 1, 1), eps(2, 1, 1)),
        ])
        .unwrap();
        let phi = Form::new(op);
        assert_eq!(form_classify(&phi, 1e-9).kind, FormKind::Hermitian);
        assert_eq!(
            eval_form(&phi, &eps(2, 0, 1), &eps(2, 0, 1)).unwrap(),
            real(0.0)
        );
    }

    #[test]
    fn build_checks_hypotheses() {
        let id = HSMatrix::identity(2);
        let ok = build_inner_product(
            &[eps(2, 0, 0), eps(2, 1, 1)],
            &[id.clone(), id.scale_real(2.0)],
            1e-9,
        )
        .unwrap();
        assert_eq!(
            form_classify(&ok, 1e-9).kind,
            FormKind::DefiniteInnerProduct
        );

        let err = build_inner_product(
            &[eps(2, 0, 0), eps(2, 0, 0)],
            &[id.clone(), id.clone()],
            1e-9,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::HypothesisViolated {
                index: None,
                reason: Hypothesis::KernelIntersection
            }
        ));
        let err = build_inner_product(
            &[id.clone(), id.scale_real(-1.0)],
            &[id.clone(), id.clone()],
            1e-9,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::HypothesisViolated {
                index: Some(1),
                reason: Hypothesis::NotPsd
            }
        ));
        let err = build_inner_product(std::slice::from_ref(&id), &[eps(2, 0, 0)], 1e-9).unwrap_err();
        assert!(matches!(
            err,
            Error::HypothesisViolated {
                index: Some(0),
                reason: Hypothesis::NotPd
            }
        ));
        let err = build_inner_product(std::slice::from_ref(&id), &[], 1e-9).unwrap_err();
        assert!(matches!(
            err,
            Error::HypothesisViolated {
                index: None,
                reason: Hypothesis::Arity
            }
        ));
        assert!(build_inner_product_mirrored(
            &[id.clone(), id.clone()],
            &[eps(2, 0, 0), eps(2, 1, 1)],
            1e-9
        )
        .is_ok());
    }

    #[test]
    fn equivalence_of_scaled_forms() {
        let phi1 = Form::frobenius(2);
        let e = equivalence_constants(&phi1, &phi1, 1e-9).unwrap();
        assert!((e.c_lo - 1.0).abs() < 1e-12 && (e.c_hi - 1.0).abs() < 1e-12);
        let phi2 = Form::new(LRSum::identity(2).scaled(4.0));
        let e = equivalence_constants(&phi1, &phi2, 1e-9).unwrap();
        assert!((e.c_lo - 2.0).abs() < 1e-12 && (e.c_hi - 2.0).abs() < 1e-12);
        let bad = Form::new(LRSum::identity(2).scaled(-1.0));
        assert!(matches!(
            equivalence_constants(&phi1, &bad, 1e-9),
            Err(Error::NotInnerProduct { which: 2 })
        ));
    }

    #[test]
    fn counterexample_equivalence() {
        let phi1 = Form::frobenius(2);
        let phi2 = Form::new(counterexample_superop(0.25).unwrap());
        let e = equivalence_constants(&phi1, &phi2, 1e-9).unwrap();
        assert!((e.c_lo - 0.5).abs() < 1e-12);
        // eigenvalues t, t, t, 2 − t
        assert!((e.c_hi - 1.75f64.sqrt()).abs() < 1e-12);
        assert!((e.operator_lo - e.c_lo).abs() < 1e-10);
        assert!((e.operator_hi - e.c_hi).abs() < 1e-10);
        let ratio = form_norm_of(&phi2, &e.witness_hi).unwrap()
            / form_norm_of(&phi1, &e.witness_hi).unwrap();
        assert!((ratio - e.c_hi).abs() < 1e-12);
    }

    #[test]
    fn norm_attained_by_singular_pair() {
        let phi = Form::new(counterexample_superop(0.1).unwrap());
        let n = form_norm(&phi);
        assert!((n.norm - 1.9).abs() < 1e-12);
        let v = eval_form(&phi, &n.eta, &n.tau).unwrap();
        assert!((v.norm() - n.norm).abs() < 1e-12);
    }
}
