// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Geometric diabatic-adiabatic pulse shaping for multi-level quantum systems.
//!
//! The pipeline is: a [`models::ModelSpec`] gives `H(ε)` and `∂H/∂ε`;
//! [`spectral::eigendecompose`] diagonalizes it; [`diad`] turns the spectrum
//! into the di-ad tensor; [`pulse`] integrates the tensor's arc length into a
//! constant-speed control pulse; [`evolution`] propagates the Schrödinger
//! equation under that pulse and scores transfer fidelities; [`optimize`]
//! searches the four exponents for the best transfer.

pub mod cli;
pub mod diad;
pub mod error;
pub mod evolution;
pub mod models;
pub mod optimize;
pub mod pulse;
pub mod spectral;
pub mod table;

pub use error::{DiadError, Result};
