//! Detection-induced coherent errors in planar surface codes.
//!
//! Imperfect controlled-Z gates inside syndrome-extraction CNOTs leave a
//! coherent residue after every stabilizer round. This crate provides the
//! pieces needed to study it:
//!
//! - [`statevector`]: dense simulation with ideal and imperfect gates.
//! - [`pauli_algebra`]: exact first-order deviation operators with
//!   κ-polynomial coefficients.
//! - [`surface_code`]: lattice geometry, stabilizers, logicals, preparation.
//! - [`qec_cycle`]: exact d=3 syndrome cycles, decoding and trajectories.
//! - [`worst_case`]: closed-form worst-case fidelity and infidelity scaling.
//! - [`aqec`]: dressed codewords, Knill–Laflamme scans, gate fidelity.

// Index loops over amplitude blocks and lattice grids read better than zipped iterators.
#![allow(clippy::needless_range_loop)]

pub mod aqec;
pub mod error;
pub mod exec;
pub mod pauli_algebra;
pub mod qec_cycle;
pub mod statevector;
pub mod surface_code;
pub mod worst_case;

pub use error::{Error, Result};
pub use exec::Execution;
