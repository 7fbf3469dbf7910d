//! Sketches of simulated pure quantum states and the approximate database
//! operations that run on top of them.
//!
//! Two summaries are supported:
//!
//! * **vector sketches**: the `k`-outcome distribution of a random
//!   Clifford (or, at small `d`, Haar) measurement. Scaled `ℓ1`/`ℓ2`
//!   distances between sketches track the trace distance of the states, which
//!   drives equality tests, LSH search and joins.
//! * **shadow seeds**: `N x n` matrices of randomized Pauli measurement
//!   records from which expectation values of local observables are estimated,
//!   either classically or by re-encoding the seeds as product states.
//!
//! Every estimator can be audited against the exact routines in [`oracle`] and
//! [`statevector`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod engine;
pub mod error;
pub mod io;
pub mod lsh;
pub mod measurement;
pub mod observable;
pub mod oracle;
pub mod rng;
pub mod shadow;
pub mod sketch;
pub mod stats;
pub mod statevector;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
