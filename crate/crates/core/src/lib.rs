//! q-analogues of multiple zeta functions.
//!
//! The crate evaluates the Schlesinger–Zudilin (SZ) q-multiple zeta function
//!
//! ```text
//! zeta_q(s_1, ..., s_r) = sum_{k_1 > ... > k_r >= 1} prod_i q^{k_i s_i} / [k_i]^{s_i}
//! ```
//!
//! together with its star, Bradley–Zhao and general `f_q` relatives on their
//! convergence domains, continues the SZ model meromorphically to all of
//! `C^r` through its translation formula and the associated infinite
//! triangular matrices, and locates poles and residues.
//!
//! Modules, bottom-up:
//!
//! - [`kernel`]: q-brackets, complex powers of positive reals, rising
//!   factorials, the pole factors `q_i(t) = q^{-(t+i)} - 1`.
//! - [`series`]: direct summation with domain predicates and tail bounds.
//! - [`coefficients`]: partitions with parts >= 2, the `L_n(t)` coefficients,
//!   determinant oracles and the closed-form matrix entries.
//! - [`matrix`]: truncated `M`, `N`, `M^{-1}`, `H` blocks, translation-formula
//!   checks and the continuation evaluator.
//! - [`poles`]: pole-locus membership and residues along every hyperplane.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod coefficients;
mod error;
pub mod kernel;
pub mod matrix;
pub mod poles;
pub mod series;

pub use error::{Error, Result};
pub use kernel::{ArgVector, Complex, QParam};
