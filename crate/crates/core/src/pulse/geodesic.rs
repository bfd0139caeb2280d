// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Geodesics of a metric on a multi-parameter control space.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::diad::{diad_tensor, DiadExponents, TransitionMatrix};
use crate::error::{DiadError, Result};
use crate::models::HermitianMatrix;
use crate::spectral::eigendecompose;

/// Metrics with condition number at or above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Relative step of the centered differences behind the Christoffel symbols.
pub const FD_STEP: f64 = 1e-5;

/// A symmetric metric `g_{μν}(x)` on a parameter space.
pub trait MetricField {
    fn dim(&self) -> usize;
    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

/// Metric given by a closure.
pub struct FnMetricField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> DMatrix<f64>> FnMetricField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnMetricField { dim, f }
    }
}

impl<F: Fn(&[f64]) -> DMatrix<f64>> MetricField for FnMetricField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok((self.f)(x))
    }
}

type HamiltonianFn<'a> = Box<dyn Fn(&[f64]) -> HermitianMatrix + 'a>;
type GradientFn<'a> = Box<dyn Fn(&[f64]) -> Vec<HermitianMatrix> + 'a>;

/// The di-ad tensor of a Hamiltonian family `H(x)` with gradients `∂_μ H(x)`.
pub struct DiadMetricField<'a> {
    dim: usize,
    hamiltonian: HamiltonianFn<'a>,
    gradients: GradientFn<'a>,
    exps: DiadExponents,
    xi: TransitionMatrix,
}

impl<'a> DiadMetricField<'a> {
    pub fn new(
        dim: usize,
        hamiltonian: impl Fn(&[f64]) -> HermitianMatrix + 'a,
        gradients: impl Fn(&[f64]) -> Vec<HermitianMatrix> + 'a,
        exps: DiadExponents,
        xi: TransitionMatrix,
    ) -> Self {
        DiadMetricField {
            dim,
            hamiltonian: Box::new(hamiltonian),
            gradients: Box::new(gradients),
            exps,
            xi,
        }
    }
}

impl MetricField for DiadMetricField<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let spec = eigendecompose(&(self.hamiltonian)(x));
        diad_tensor(&spec, &(self.gradients)(x), &self.exps, &self.xi)
    }
}

/// A sampled geodesic on `τ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub tau: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// `g_{μν} ẋ^μ ẋ^ν` at each sample.
    pub speeds: Vec<f64>,
}

impl GeodesicPath {
    pub fn initial_velocity(&self) -> &[f64] {
        &self.velocities[0]
    }

    /// Largest relative deviation of the squared speed from its initial value.
    pub fn speed_drift(&self) -> f64 {
        let s0 = self.speeds[0];
        self.speeds
            .iter()
            .fold(0.0, |d, s| d.max((s - s0).abs() / s0.abs()))
    }
}

fn geodesic_error(x: &[f64], tau: f64, reason: String) -> DiadError {
    DiadError::Geodesic {
        tau,
        x: x.to_vec(),
        reason,
    }
}

fn checked_inverse(g: &DMatrix<f64>, x: &[f64], tau: f64) -> Result<DMatrix<f64>> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(geodesic_error(x, tau, "metric is not finite".into()));
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(max * 1.0 / SINGULAR_CONDITION < min) {
        return Err(geodesic_error(
            x,
            tau,
            format!("metric condition number {:e}", max / min),
        ));
    }
    sym.try_inverse()
        .ok_or_else(|| geodesic_error(x, tau, "metric is not invertible".into()))
}

/// Christoffel symbols `Γ^μ_{αβ}` at `x`, indexed `[μ][α * p + β]`.
pub fn christoffel(field: &dyn MetricField, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    christoffel_at(field, x, f64::NAN)
}

fn christoffel_at(field: &dyn MetricField, x: &[f64], tau: f64) -> Result<Vec<Vec<f64>>> {
    let p = field.dim();
    let ginv = checked_inverse(&field.metric(x)?, x, tau)?;
    // dg[λ] = ∂_λ g
    let mut dg = Vec::with_capacity(p);
    let mut probe = x.to_vec();
    for l in 0..p {
        let h = FD_STEP * x[l].abs().max(1.0);
        probe[l] = x[l] + h;
        let plus = field.metric(&probe)?;
        probe[l] = x[l] - h;
        let minus = field.metric(&probe)?;
        probe[l] = x[l];
        dg.push((plus - minus) / (2.0 * h));
    }
    let mut gamma = vec![vec![0.0; p * p]; p];
    for a in 0..p {
        for b in a..p {
            for (mu, row) in gamma.iter_mut().enumerate() {
                let mut v = 0.0;
                for l in 0..p {
                    v += ginv[(mu, l)] * (dg[a][(l, b)] + dg[b][(l, a)] - dg[l][(a, b)]);
                }
                row[a * p + b] = 0.5 * v;
                row[b * p + a] = 0.5 * v;
            }
        }
    }
    Ok(gamma)
}

fn acceleration(field: &dyn MetricField, x: &[f64], v: &[f64], tau: f64) -> Result<Vec<f64>> {
    let p = x.len();
    let gamma = christoffel_at(field, x, tau)?;
    Ok((0..p)
        .map(|mu| {
            let mut s = 0.0;
            for a in 0..p {
                for b in 0..p {
                    s += gamma[mu][a * p + b] * v[a] * v[b];
                }
            }
            -s
        })
        .collect())
}

fn speed(field: &dyn MetricField, x: &[f64], v: &[f64]) -> Result<f64> {
    let g = field.metric(x)?;
    let mut s = 0.0;
    for a in 0..x.len() {
        for b in 0..x.len() {
            s += g[(a, b)] * v[a] * v[b];
        }
    }
    Ok(s)
}

/// Integrates `ẍ^μ + Γ^μ_{αβ} ẋ^α ẋ^β = 0` on `τ ∈ [0, 1]` with classical RK4.
pub fn geodesic_integrate(
    field: &dyn MetricField,
    x0: &[f64],
    v0: &[f64],
    steps: usize,
) -> Result<GeodesicPath> {
    let p = field.dim();
    if x0.len() != p || v0.len() != p {
        return Err(DiadError::Validation(format!(
            "initial point and velocity must have {p} components"
        )));
    }
    if steps == 0 {
        return Err(DiadError::Validation(
            "geodesic needs at least one step".into(),
        ));
    }
    let h = 1.0 / steps as f64;
    let axpy = |a: &[f64], c: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + c * y).collect()
    };

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut path = GeodesicPath {
        tau: vec![0.0],
        points: vec![x.clone()],
        velocities: vec![v.clone()],
        speeds: vec![speed(field, &x, &v)?],
    };
    for k in 0..steps {
        let tau = k as f64 * h;
        let k1x = v.clone();
        let k1v = acceleration(field, &x, &v, tau)?;
        let x2 = axpy(&x, 0.5 * h, &k1x);
        let v2 = axpy(&v, 0.5 * h, &k1v);
        let k2v = acceleration(field, &x2, &v2, tau + 0.5 * h)?;
        let x3 = axpy(&x, 0.5 * h, &v2);
        let v3 = axpy(&v, 0.5 * h, &k2v);
        let k3v = acceleration(field, &x3, &v3, tau + 0.5 * h)?;
        let x4 = axpy(&x, h, &v3);
        let v4 = axpy(&v, h, &k3v);
        let k4v = acceleration(field, &x4, &v4, tau + h)?;
        for i in 0..p {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(geodesic_error(&x, tau + h, "state diverged".into()));
        }
        path.tau.push(if k + 1 == steps {
            1.0
        } else {
            (k + 1) as f64 * h
        });
        path.speeds.push(speed(field, &x, &v)?);
        path.points.push(x.clone());
        path.velocities.push(v.clone());
    }
    Ok(path)
}
