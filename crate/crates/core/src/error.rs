// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = DiadError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DiadError {
    /// Malformed or inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument violated an operation's precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A component with a positive gap exponent hit a (near-)degenerate pair.
    #[error("gap singularity between levels {m} and {n} (gap = {gap:e})")]
    GapSingularity { m: usize, n: usize, gap: f64 },

    #[error("pulse generation failed: {0}")]
    Pulse(String),

    #[error("geodesic integration failed at tau = {tau}: {reason} (x = {x:?})")]
    Geodesic {
        tau: f64,
        x: Vec<f64>,
        reason: String,
    },

    #[error("propagation failed: {0}")]
    Propagation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DiadError {
    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, DiadError::Config(_) | DiadError::Validation(_))
    }
}
