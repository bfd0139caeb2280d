// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Quantum metric and the generalized diabatic-adiabatic ("di-ad") tensor.
//!
//! For an ordered level pair `(m, n)` and exponents `(a, b)` the component is
//!
//! ```text
//! G^{nm,(a,b)}_{μν} = Re[(⟨ψ_m|∂_μH|ψ_n⟩⟨ψ_n|∂_νH|ψ_m⟩)^{b/2}] / |E_n − E_m|^a
//! ```
//!
//! The product inside the power is gauge invariant; for `μ = ν` it equals
//! `|⟨ψ_m|∂H|ψ_n⟩|²`, so the diagonal components reduce to
//! `|⟨ψ_m|∂H|ψ_n⟩|^b / |E_n − E_m|^a`. Off-diagonal components take the
//! principal branch of the product's power.
//!
//! The tensor sums components over all ordered pairs `m ≠ n`, using the
//! adiabatic exponents `(α, β)` where the transition matrix `ξ_mn = 0` and the
//! diabatic exponents `(α̂, β̂)` where `ξ_mn = 1`. Each unordered pair therefore
//! contributes twice; with `ξ ≡ 0` and `α = β = 2` the tensor equals the sum of
//! the quantum metrics of all levels.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{DiadError, Result};
use crate::models::HermitianMatrix;
use crate::spectral::Spectrum;

/// Relative gap under which a pair of levels is treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Relative floor for matrix elements raised to a negative power.
pub const ELEMENT_FLOOR: f64 = 1e-12;

/// Exponents `(α, β; α̂, β̂)` of the di-ad tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiadExponents {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

impl DiadExponents {
    pub fn new(alpha: f64, beta: f64, alpha_hat: f64, beta_hat: f64) -> Result<Self> {
        let e = DiadExponents {
            alpha,
            beta,
            alpha_hat,
            beta_hat,
        };
        if e.as_array().iter().all(|v| v.is_finite()) {
            Ok(e)
        } else {
            Err(DiadError::Validation(format!(
                "exponents must be finite: {e:?}"
            )))
        }
    }

    /// The same `(n, n)` pair for both the adiabatic and diabatic exponents.
    /// For the two-level crossing this is the pulse family labelled `n_+ = n`.
    pub fn uniform(n: f64) -> Self {
        DiadExponents {
            alpha: n,
            beta: n,
            alpha_hat: n,
            beta_hat: n,
        }
    }

    pub fn from_array(theta: [f64; 4]) -> Result<Self> {
        Self::new(theta[0], theta[1], theta[2], theta[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.alpha_hat, self.beta_hat]
    }

    pub fn n_plus(&self) -> f64 {
        0.5 * (self.alpha + self.beta)
    }

    pub fn n_plus_hat(&self) -> f64 {
        0.5 * (self.alpha_hat + self.beta_hat)
    }
}

/// Symmetric 0/1 matrix marking the level pairs traversed diabatically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    dim: usize,
    entries: Vec<bool>,
}

impl TransitionMatrix {
    /// All pairs adiabatic.
    pub fn zeros(dim: usize) -> Self {
        TransitionMatrix {
            dim,
            entries: vec![false; dim * dim],
        }
    }

    /// Ones exactly on the given pairs (and their mirrors).
    pub fn from_pairs(dim: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut xi = Self::zeros(dim);
        for &(m, n) in pairs {
            if m >= dim || n >= dim {
                return Err(DiadError::Validation(format!(
                    "diabatic pair ({m},{n}) out of range for dimension {dim}"
                )));
            }
            if m == n {
                return Err(DiadError::Validation(format!(
                    "diabatic pair ({m},{n}) lies on the diagonal"
                )));
            }
            xi.entries[m * dim + n] = true;
            xi.entries[n * dim + m] = true;
        }
        Ok(xi)
    }

    /// From a dense 0/1 matrix; must be symmetric with zero diagonal.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let dim = rows.len();
        let mut pairs = Vec::new();
        for (m, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(DiadError::Validation(
                    "transition matrix must be square".into(),
                ));
            }
            for (n, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 if m == n => {
                        return Err(DiadError::Validation(
                            "transition matrix must have a zero diagonal".into(),
                        ))
                    }
                    1 => pairs.push((m, n)),
                    _ => {
                        return Err(DiadError::Validation(
                            "transition matrix entries must be 0 or 1".into(),
                        ))
                    }
                }
                if rows[n].get(m) != Some(&v) {
                    return Err(DiadError::Validation(
                        "transition matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Self::from_pairs(dim, &pairs)
    }

    /// Same dimension, ones exactly on `pairs`.
    pub fn subspace_restrict(&self, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::from_pairs(self.dim, pairs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_diabatic(&self, m: usize, n: usize) -> bool {
        self.entries[m * self.dim + n]
    }

    /// Diabatic pairs with `m < n`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for m in 0..self.dim {
            for n in (m + 1)..self.dim {
                if self.is_diabatic(m, n) {
                    out.push((m, n));
                }
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.dim)
            .map(|m| {
                (0..self.dim)
                    .map(|n| self.is_diabatic(m, n) as u8)
                    .collect()
            })
            .collect()
    }
}

/// Options for [`diad_tensor_with`].
#[derive(Debug, Clone, Default)]
pub struct DiadOptions {
    /// Restricts the outer sum over `m` to these levels. `None` sums all levels.
    pub restrict_levels: Option<Vec<usize>>,
}

/// A di-ad tensor together with evaluation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiadEvaluation {
    pub tensor: DMatrix<f64>,
    /// Number of matrix elements lifted to the floor before a negative power.
    pub clamped_elements: usize,
}

/// Gradient matrices in the eigenbasis: `⟨ψ_m|∂_μH|ψ_n⟩`.
fn eigenbasis_elements(spec: &Spectrum, dh: &HermitianMatrix) -> DMatrix<Complex64> {
    let v = spec.states();
    v.adjoint() * dh.as_matrix() * v
}

fn frobenius(h: &HermitianMatrix) -> f64 {
    h.as_matrix()
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn check_pair(spec: &Spectrum, m: usize, n: usize) -> Result<()> {
    let d = spec.dim();
    if m >= d || n >= d {
        return Err(DiadError::Validation(format!(
            "level pair ({m},{n}) out of range for dimension {d}"
        )));
    }
    if m == n {
        return Err(DiadError::Validation(format!(
            "component requires distinct levels, got ({m},{n})"
        )));
    }
    Ok(())
}

/// `|E_n − E_m|`, or a gap-singularity error when degenerate and `a > 0`.
fn pair_gap(spec: &Spectrum, m: usize, n: usize, a: f64) -> Result<f64> {
    let gap = (spec.energy(n) - spec.energy(m)).abs();
    if a > 0.0 && gap <= DEGENERACY_TOL * spec.energy_scale() {
        return Err(DiadError::GapSingularity { m, n, gap });
    }
    Ok(gap)
}

/// `Re[z^{b/2}] · gap^{−a}` with the element floor applied for `b < 0`.
///
/// `z` is the gauge-invariant product of the two matrix elements and `floor2`
/// the squared element floor. Returns the value and whether it was clamped.
fn power_term(z: Complex64, gap: f64, a: f64, b: f64, floor2: f64, diagonal: bool) -> (f64, bool) {
    let mut z = z;
    let mut clamped = false;
    if b < 0.0 && z.norm() < floor2 {
        z = if z.norm() > 0.0 {
            z * (floor2 / z.norm())
        } else {
            Complex64::new(floor2, 0.0)
        };
        clamped = true;
    }
    let num = if b == 2.0 {
        z.re
    } else if diagonal {
        z.re.max(0.0).powf(0.5 * b)
    } else {
        z.powf(0.5 * b).re
    };
    (num * gap.powf(-a), clamped)
}

/// Single diagonal component `|⟨ψ_m|dH|ψ_n⟩|^b / |E_n − E_m|^a`.
pub fn component(
    spec: &Spectrum,
    dh: &HermitianMatrix,
    m: usize,
    n: usize,
    a: f64,
    b: f64,
) -> Result<f64> {
    check_pair(spec, m, n)?;
    let gap = pair_gap(spec, m, n, a)?;
    let elements = eigenbasis_elements(spec, dh);
    let floor = ELEMENT_FLOOR * frobenius(dh);
    let z = Complex64::new(elements[(m, n)].norm_sqr(), 0.0);
    Ok(power_term(z, gap, a, b, floor * floor, true).0)
}

/// Quantum metric of level `m` over the parameters whose gradients are `dh_list`.
pub fn quantum_metric(
    spec: &Spectrum,
    dh_list: &[HermitianMatrix],
    m: usize,
) -> Result<DMatrix<f64>> {
    let d = spec.dim();
    if m >= d {
        return Err(DiadError::Validation(format!(
            "level {m} out of range for dimension {d}"
        )));
    }
    let p = dh_list.len();
    let elements: Vec<_> = dh_list
        .iter()
        .map(|dh| eigenbasis_elements(spec, dh))
        .collect();
    let mut g = DMatrix::zeros(p, p);
    for n in (0..d).filter(|&n| n != m) {
        let gap = pair_gap(spec, m, n, 2.0)?;
        let inv = 1.0 / (gap * gap);
        for mu in 0..p {
            for nu in mu..p {
                let v = (elements[mu][(m, n)] * elements[nu][(n, m)]).re * inv;
                g[(mu, nu)] += v;
                if mu != nu {
                    g[(nu, mu)] += v;
                }
            }
        }
    }
    Ok(g)
}

/// The di-ad tensor over the parameters whose gradients are `dh_list`.
pub fn diad_tensor(
    spec: &Spectrum,
    dh_list: &[HermitianMatrix],
    exps: &DiadExponents,
    xi: &TransitionMatrix,
) -> Result<DMatrix<f64>> {
    diad_tensor_with(spec, dh_list, exps, xi, &DiadOptions::default()).map(|e| e.tensor)
}

/// [`diad_tensor`] with options and clamping diagnostics.
pub fn diad_tensor_with(
    spec: &Spectrum,
    dh_list: &[HermitianMatrix],
    exps: &DiadExponents,
    xi: &TransitionMatrix,
    options: &DiadOptions,
) -> Result<DiadEvaluation> {
    let d = spec.dim();
    if xi.dim() != d {
        return Err(DiadError::Validation(format!(
            "transition matrix dimension {} does not match spectrum dimension {d}",
            xi.dim()
        )));
    }
    if let Some(levels) = &options.restrict_levels {
        if let Some(&bad) = levels.iter().find(|&&m| m >= d) {
            return Err(DiadError::Validation(format!(
                "restricted level {bad} out of range for dimension {d}"
            )));
        }
    }
    let p = dh_list.len();
    let elements: Vec<_> = dh_list
        .iter()
        .map(|dh| eigenbasis_elements(spec, dh))
        .collect();
    let floors: Vec<f64> = dh_list
        .iter()
        .map(|dh| ELEMENT_FLOOR * frobenius(dh))
        .collect();

    let mut tensor = DMatrix::zeros(p, p);
    let mut clamped_elements = 0;
    let levels: Vec<usize> = match &options.restrict_levels {
        Some(l) => l.clone(),
        None => (0..d).collect(),
    };
    for &m in &levels {
        for n in (0..d).filter(|&n| n != m) {
            let (a, b) = if xi.is_diabatic(m, n) {
                (exps.alpha_hat, exps.beta_hat)
            } else {
                (exps.alpha, exps.beta)
            };
            let gap = pair_gap(spec, m, n, a)?;
            for mu in 0..p {
                for nu in mu..p {
                    let diagonal = mu == nu;
                    let z = if diagonal {
                        Complex64::new(elements[mu][(m, n)].norm_sqr(), 0.0)
                    } else {
                        elements[mu][(m, n)] * elements[nu][(n, m)]
                    };
                    let (v, clamped) = power_term(z, gap, a, b, floors[mu] * floors[nu], diagonal);
                    clamped_elements += clamped as usize;
                    tensor[(mu, nu)] += v;
                    if !diagonal {
                        tensor[(nu, mu)] += v;
                    }
                }
            }
        }
    }
    Ok(DiadEvaluation {
        tensor,
        clamped_elements,
    })
}
