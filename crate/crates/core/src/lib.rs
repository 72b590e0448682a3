//! Numerical pseudo-differential calculus on two computable group backends:
//! the abelian group R^n and the Heisenberg group H^1.
//!
//! The crate provides, over a quadrature grid on the unitary dual:
//!
//! * symbol classes with seminorms, difference operators and quantization
//!   ([`symbol`], [`backend`]);
//! * ellipticity and parameter-ellipticity diagnostics, resolvents and the
//!   parametrix recursion ([`elliptic`]);
//! * a holomorphic functional calculus by keyhole-contour quadrature with
//!   complex powers and square roots ([`funcalc`]);
//! * constructive certification of the lower bound
//!   Re(Op(a)u, u) >= C1 ||u||_{m/2}^2 - C2 ||u||^2 ([`garding`]);
//! * diffusion-equation solvers with energy-estimate fits ([`diffusion`]).

// validations use `!(x > 0.0)` so that NaN parameters are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod cell;
pub mod diffusion;
pub mod elliptic;
pub mod error;
pub mod funcalc;
pub mod garding;
pub mod linalg;
pub mod oscillator;
pub mod quadrature;
pub mod symbol;

pub use backend::{
    make_abelian_backend, make_heisenberg_backend, Backend, FourierField, GroupBackend, GroupKind,
    RepGrid,
};
pub use error::{Error, Result};
pub use symbol::{
    extract_symbol, multiplier_symbol, rockland_symbol, sobolev_weight, ClassReport, Symbol,
};
