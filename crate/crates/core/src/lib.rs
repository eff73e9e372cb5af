//! Bounded operators on the Hilbert–Schmidt space `S₂ = C^{d×d}` written as
//! sums of left-right multiplications `η ↦ Σ aₙ η bₙ`, together with the
//! positivity machinery built on top of them:
//!
//! * [`hs`]: Frobenius geometry, the matrix-unit bases and the Hermitian
//!   positivity classifier.
//! * [`superop`]: LR-sums, Liouville matrices, basis and selfadjoint
//!   decompositions, adjoints and linear-independence reduction.
//! * [`posdecomp`]: one-sum and two-sum positive normalizations, diagonal
//!   blocks, the negative-leading-term decomposition of positive definite
//!   superoperators and the ζ-transform.
//! * [`forms`]: sesquilinear forms `tr(η* A τ)`, inner-product construction
//!   and norm-equivalence constants.
//! * [`io`] and [`cli`]: JSON formats, canonical digests and the `hsop`
//!   command line.

pub mod cli;
pub mod error;
pub mod forms;
pub mod hs;
pub mod io;
pub mod linalg;
pub mod posdecomp;
pub mod superop;

pub use error::{Error, Result};
pub use forms::{Form, FormClass, FormKind};
pub use hs::{HSMatrix, HVector, PositivityClass, PositivityReport};
pub use linalg::C64;
pub use posdecomp::{DecompositionTrace, Sign, SignedLRSum, SignedTerm, ZetaCertificate};
pub use superop::{BasisVariant, LRSum, LRTerm, LiouvilleMatrix};

/// Default relative positivity tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
