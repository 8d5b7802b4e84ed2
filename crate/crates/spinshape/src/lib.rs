//! Bound states of a spin-1/2 particle on a line in coupled scalar and
//! magnetic fields, built from a pair of factorized matrix Hamiltonians
//! H∓ = A±A∓ with A± = ∓d/dz + W(z)·1 + V(z)·S.
//!
//! The crate has two independent routes to the spectrum:
//!
//! * closed forms from the shape-invariance parameter flow
//!   (γₙ = γ−n, βₙ = γβ/γₙ), in [`analytic`] and [`fields`];
//! * a from-scratch banded symmetric eigensolver on adjoint-exact
//!   discretizations of H∓, in [`numerics`].
//!
//! [`zeromode`] integrates the two-dimensional kernel of A⁻, [`ladder`]
//! climbs the excited-state chain with the discrete A⁺, and [`symmetry`]
//! verifies the degeneracy algebra (T = parity×σ_y, complex conjugation R,
//! and the N=2 supercharges).

#![allow(clippy::needless_range_loop)] // indexed loops read better in the stencil math
#![allow(clippy::neg_cmp_op_on_partial_ord)] // !(x > 0) deliberately rejects NaN
#![allow(clippy::manual_is_multiple_of)]

pub mod analytic;
pub mod error;
pub mod fields;
pub mod ladder;
pub mod numerics;
pub mod symmetry;
pub mod zeromode;

pub use error::{Error, Result};

/// Complex scalar used for spinor components.
pub type C64 = num_complex::Complex64;
