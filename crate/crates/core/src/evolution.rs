// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Time evolution under a control pulse and the transfer fidelities built on it.
//!
//! The propagator is a product of exact exponentials of the Hamiltonian
//! sampled at each step midpoint, `U = Π_k exp(−i H(ε(t_k + Δt/2)) Δt)`, with
//! ħ = 1. Every model family is affine in its control, so steps rebuild
//! `H(ε) = H(0) + ε ∂H` directly and use a real eigensolver whenever the
//! Hamiltonian is real.

use std::io::Write;

use nalgebra::allocator::Allocator;
use nalgebra::{
    DMatrix, DefaultAllocator, DimDiff, DimSub, Dyn, OMatrix, SymmetricEigen, U1, U2, U4, U5,
};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::diad::{DiadExponents, TransitionMatrix};
use crate::error::{DiadError, Result};
use crate::models::{HermitianMatrix, ModelSpec};
use crate::pulse::{generate_pulse, PulseProfile, TimeSeries};
use crate::spectral::{eigendecompose, Spectrum};
use crate::table::write_table;

/// Smallest step count accepted for model propagation.
pub const MIN_STEPS: usize = 100;

/// Floor of the default step count.
pub const DEFAULT_MIN_STEPS: usize = 1000;

/// Default steps per unit of `t_f ‖H‖`.
pub const STEPS_PER_PHASE: f64 = 20.0;

/// A control trajectory `ε(t)` on `[0, t_f]`.
pub trait Schedule {
    fn duration(&self) -> f64;
    fn control(&self, t: f64) -> f64;
}

/// A normalized pulse played over total time `t_f`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledPulse<'a> {
    pub profile: &'a PulseProfile,
    pub t_f: f64,
}

impl Schedule for ScaledPulse<'_> {
    fn duration(&self) -> f64 {
        self.t_f
    }

    fn control(&self, t: f64) -> f64 {
        self.profile.control_at(t / self.t_f)
    }
}

/// Sampled pulses are read by linear interpolation.
impl Schedule for TimeSeries {
    fn duration(&self) -> f64 {
        self.t_f()
    }

    fn control(&self, t: f64) -> f64 {
        let n = self.times.len();
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.controls[k - 1] + w * (self.controls[k] - self.controls[k - 1])
    }
}

fn spectral_norm(h: &HermitianMatrix) -> f64 {
    eigendecompose(h).energy_scale()
}

/// `max(1000, ceil(20 t_f ‖H‖))`, with `‖H‖` the largest spectral norm over
/// the control range. For an affine family that maximum sits at an endpoint.
pub fn default_steps(model: &ModelSpec, t_f: f64) -> usize {
    let [a, b] = model.control_range();
    let norm = spectral_norm(&model.hamiltonian(a)).max(spectral_norm(&model.hamiltonian(b)));
    ((STEPS_PER_PHASE * t_f * norm).ceil() as usize).max(DEFAULT_MIN_STEPS)
}

/// `exp(−i H dt) U` for real symmetric `H`.
fn apply_real(h: DMatrix<f64>, dt: f64, u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let mut w = v.transpose() * u;
    for (k, mut row) in w.row_iter_mut().enumerate() {
        row *= Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt);
    }
    v * w
}

/// `exp(−i H dt) U` for Hermitian `H`.
fn apply_complex(h: DMatrix<Complex64>, dt: f64, u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let mut w = v.adjoint() * u;
    for (k, mut row) in w.row_iter_mut().enumerate() {
        row *= Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt);
    }
    v * w
}

/// `H(ε) = H(0) + ε ∂H` split into real storage when possible.
enum Affine {
    Real(DMatrix<f64>, DMatrix<f64>),
    Complex(DMatrix<Complex64>, DMatrix<Complex64>),
}

impl Affine {
    fn of(model: &ModelSpec) -> Self {
        let h0 = model.hamiltonian(0.0).into_matrix();
        let h1 = model.hamiltonian_gradient(0.0).into_matrix();
        if h0.iter().chain(h1.iter()).all(|z| z.im == 0.0) {
            Affine::Real(h0.map(|z| z.re), h1.map(|z| z.re))
        } else {
            Affine::Complex(h0, h1)
        }
    }

    fn dim(&self) -> usize {
        match self {
            Affine::Real(h, _) => h.nrows(),
            Affine::Complex(h, _) => h.nrows(),
        }
    }

    fn apply(&self, eps: f64, dt: f64, u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        match self {
            Affine::Real(h0, h1) => apply_real(h0 + h1 * eps, dt, u),
            Affine::Complex(h0, h1) => apply_complex(h0 + h1 * Complex64::new(eps, 0.0), dt, u),
        }
    }
}

fn check_time(t_f: f64, steps: usize, min_steps: usize) -> Result<()> {
    if !(t_f > 0.0) || !t_f.is_finite() {
        return Err(DiadError::Validation(format!(
            "t_f must be positive and finite, got {t_f}"
        )));
    }
    if steps < min_steps {
        return Err(DiadError::Validation(format!(
            "need at least {min_steps} steps, got {steps}"
        )));
    }
    Ok(())
}

fn check_control(eps: f64, t: f64) -> Result<()> {
    if eps.is_finite() {
        Ok(())
    } else {
        Err(DiadError::Propagation(format!(
            "control is {eps} at t = {t}"
        )))
    }
}

/// Propagator of an arbitrary Hamiltonian `H(t)` over `[0, t_f]`.
pub fn propagate_with<F>(mut hamiltonian: F, t_f: f64, steps: usize) -> Result<DMatrix<Complex64>>
where
    F: FnMut(f64) -> HermitianMatrix,
{
    check_time(t_f, steps, 1)?;
    let dt = t_f / steps as f64;
    let mut u: Option<DMatrix<Complex64>> = None;
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let h = hamiltonian(t).into_matrix();
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DiadError::Propagation(format!(
                "non-finite Hamiltonian at t = {t}"
            )));
        }
        let cur = u
            .take()
            .unwrap_or_else(|| DMatrix::identity(h.nrows(), h.ncols()));
        u = Some(apply_complex(h, dt, &cur));
    }
    Ok(u.unwrap())
}

/// Steps `U ← exp(−i H(ε_k) dt) U` for `k < steps` in fixed-size storage.
fn run_steps<D>(
    affine: &Affine,
    steps: usize,
    dt: f64,
    control: &dyn Fn(usize) -> Result<f64>,
) -> Result<DMatrix<Complex64>>
where
    D: DimSub<U1>,
    DefaultAllocator: Allocator<D, D> + Allocator<D> + Allocator<DimDiff<D, U1>>,
{
    let d = affine.dim();
    let dim = D::from_usize(d);
    let mut u = OMatrix::<Complex64, D, D>::identity_generic(dim, dim);
    let phase = |e: f64| Complex64::from_polar(1.0, -e * dt);
    match affine {
        Affine::Real(h0, h1) => {
            let h0 = OMatrix::<f64, D, D>::from_iterator_generic(dim, dim, h0.iter().copied());
            let h1 = OMatrix::<f64, D, D>::from_iterator_generic(dim, dim, h1.iter().copied());
            for k in 0..steps {
                let eig = SymmetricEigen::new(&h0 + &h1 * control(k)?);
                let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
                let mut w = v.transpose() * &u;
                for (i, mut row) in w.row_iter_mut().enumerate() {
                    row *= phase(eig.eigenvalues[i]);
                }
                u = v * w;
            }
        }
        Affine::Complex(h0, h1) => {
            let h0 =
                OMatrix::<Complex64, D, D>::from_iterator_generic(dim, dim, h0.iter().copied());
            let h1 =
                OMatrix::<Complex64, D, D>::from_iterator_generic(dim, dim, h1.iter().copied());
            for k in 0..steps {
                let eig = SymmetricEigen::new(&h0 + &h1 * Complex64::new(control(k)?, 0.0));
                let v = eig.eigenvectors;
                let mut w = v.adjoint() * &u;
                for (i, mut row) in w.row_iter_mut().enumerate() {
                    row *= phase(eig.eigenvalues[i]);
                }
                u = v * w;
            }
        }
    }
    Ok(DMatrix::from_iterator(d, d, u.iter().copied()))
}

/// Propagator of `model` driven by `schedule` with `steps` midpoint steps.
pub fn propagate(
    model: &ModelSpec,
    schedule: &dyn Schedule,
    steps: usize,
) -> Result<DMatrix<Complex64>> {
    let t_f = schedule.duration();
    check_time(t_f, steps, MIN_STEPS)?;
    let affine = Affine::of(model);
    let dt = t_f / steps as f64;
    let control = |k: usize| {
        let t = (k as f64 + 0.5) * dt;
        let eps = schedule.control(t);
        check_control(eps, t).map(|_| eps)
    };
    match affine.dim() {
        2 => run_steps::<U2>(&affine, steps, dt, &control),
        4 => run_steps::<U4>(&affine, steps, dt, &control),
        5 => run_steps::<U5>(&affine, steps, dt, &control),
        _ => run_steps::<Dyn>(&affine, steps, dt, &control),
    }
}

/// `max |U†U − I|` over entries.
pub fn unitarity_residual(u: &DMatrix<Complex64>) -> f64 {
    let g = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

fn overlap(u: &DMatrix<Complex64>, initial: &Spectrum, fin: &Spectrum, m: usize, n: usize) -> f64 {
    let psi = u * initial.states().column(m);
    fin.states().column(n).dotc(&psi).norm_sqr()
}

/// `|⟨ψ_n(t_f)| U |ψ_m(0)⟩|²`.
pub fn transfer_fidelity(
    u: &DMatrix<Complex64>,
    initial: &Spectrum,
    fin: &Spectrum,
    m: usize,
    n: usize,
) -> Result<f64> {
    let d = initial.dim();
    if fin.dim() != d || u.nrows() != d || u.ncols() != d {
        return Err(DiadError::Validation(
            "propagator and spectra dimensions differ".into(),
        ));
    }
    if m >= d || n >= d {
        return Err(DiadError::Validation(format!(
            "levels ({m}, {n}) out of range for dimension {d}"
        )));
    }
    Ok(overlap(u, initial, fin, m, n))
}

/// Effective X-gate fidelity on the two lowest levels,
/// `(1 + Σ_j |⟨ψ_{1−j}(t_f)| U |ψ_j(0)⟩|²) / 3`.
pub fn gate_fidelity_x(u: &DMatrix<Complex64>, initial: &Spectrum, fin: &Spectrum) -> Result<f64> {
    if initial.dim() < 2 {
        return Err(DiadError::Validation(
            "gate fidelity needs at least two levels".into(),
        ));
    }
    let a = transfer_fidelity(u, initial, fin, 0, 1)?;
    let b = transfer_fidelity(u, initial, fin, 1, 0)?;
    Ok((1.0 + a + b) / 3.0)
}

/// Eigensystems at the start and end of a model's control range.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoints {
    pub initial: Spectrum,
    pub fin: Spectrum,
}

impl Endpoints {
    pub fn of(model: &ModelSpec) -> Self {
        Endpoints {
            initial: eigendecompose(&model.hamiltonian(model.control_start())),
            fin: eigendecompose(&model.hamiltonian(model.control_end())),
        }
    }

    pub fn fidelity(&self, u: &DMatrix<Complex64>, m: usize, n: usize) -> Result<f64> {
        transfer_fidelity(u, &self.initial, &self.fin, m, n)
    }

    pub fn gate_fidelity_x(&self, u: &DMatrix<Complex64>) -> Result<f64> {
        gate_fidelity_x(u, &self.initial, &self.fin)
    }
}

/// Instantaneous-eigenbasis populations `|⟨ψ_k(t)|ψ(t)⟩|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrace {
    pub times: Vec<f64>,
    /// `populations[step][k]`.
    pub populations: Vec<Vec<f64>>,
}

/// Populations after each step for a state starting in level `m0`.
pub fn population_trace(
    model: &ModelSpec,
    schedule: &dyn Schedule,
    steps: usize,
    m0: usize,
) -> Result<PopulationTrace> {
    let t_f = schedule.duration();
    check_time(t_f, steps, MIN_STEPS)?;
    let d = model.dim();
    if m0 >= d {
        return Err(DiadError::Validation(format!(
            "level {m0} out of range for dimension {d}"
        )));
    }
    let affine = Affine::of(model);
    let dt = t_f / steps as f64;
    let populations_at = |t: f64, psi: &DMatrix<Complex64>| -> Result<Vec<f64>> {
        let eps = schedule.control(t);
        check_control(eps, t)?;
        let s = eigendecompose(&model.hamiltonian(eps));
        Ok((0..d)
            .map(|k| s.states().column(k).dotc(&psi.column(0)).norm_sqr())
            .collect())
    };
    let start = eigendecompose(&model.hamiltonian(schedule.control(0.0)));
    let mut psi: DMatrix<Complex64> = start.states().columns(m0, 1).into_owned();
    let mut trace = PopulationTrace {
        times: vec![0.0],
        populations: vec![populations_at(0.0, &psi)?],
    };
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let eps = schedule.control(t);
        check_control(eps, t)?;
        psi = affine.apply(eps, dt, &psi);
        let t_end = if k + 1 == steps {
            t_f
        } else {
            (k + 1) as f64 * dt
        };
        trace.times.push(t_end);
        trace.populations.push(populations_at(t_end, &psi)?);
    }
    Ok(trace)
}

/// One propagation scored for a transfer `m → n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub propagator: DMatrix<Complex64>,
    pub t_f: f64,
    pub steps: usize,
    pub fidelity: f64,
    pub populations: Option<PopulationTrace>,
}

impl TransferResult {
    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.propagator)
    }
}

/// Plays `profile` over `t_f` and scores `m → n`; `steps` defaults to
/// [`default_steps`].
pub fn transfer(
    model: &ModelSpec,
    profile: &PulseProfile,
    t_f: f64,
    m: usize,
    n: usize,
    steps: Option<usize>,
) -> Result<TransferResult> {
    let steps = steps.unwrap_or_else(|| default_steps(model, t_f));
    let u = propagate(model, &ScaledPulse { profile, t_f }, steps)?;
    let fidelity = Endpoints::of(model).fidelity(&u, m, n)?;
    Ok(TransferResult {
        propagator: u,
        t_f,
        steps,
        fidelity,
        populations: None,
    })
}

/// Spacing of a generated time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// `count` times from `min` to `max`, endpoints included.
pub fn time_grid(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>> {
    let bad = |msg: &str| Err(DiadError::Validation(format!("time grid {msg}")));
    if count == 0 {
        return bad("needs at least one point");
    }
    if !(min.is_finite() && max.is_finite()) || min > max || min < 0.0 {
        return bad("needs finite 0 ≤ min ≤ max");
    }
    if count == 1 {
        return Ok(vec![max]);
    }
    if min == max {
        return bad("needs min < max for more than one point");
    }
    let last = (count - 1) as f64;
    let grid = match spacing {
        Spacing::Linear => (0..count)
            .map(|k| min + (max - min) * k as f64 / last)
            .collect::<Vec<_>>(),
        Spacing::Log => {
            if min <= 0.0 {
                return bad("with log spacing needs min > 0");
            }
            let (a, b) = (min.ln(), max.ln());
            (0..count)
                .map(|k| (a + (b - a) * k as f64 / last).exp())
                .collect()
        }
    };
    let mut grid = grid;
    grid[0] = min;
    grid[count - 1] = max;
    Ok(grid)
}

/// Scores of one profile over a grid of total times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScan {
    pub t_f: Vec<f64>,
    pub infidelity: Vec<f64>,
    pub best_t_f: f64,
    pub min_infidelity: f64,
    /// Grid entries at `t_f = 0` that were skipped.
    pub skipped_zero: usize,
}

fn check_time_grid(t_f_grid: &[f64]) -> Result<()> {
    if t_f_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DiadError::Validation(
            "t_f grid must be strictly increasing".into(),
        ));
    }
    if !t_f_grid.iter().any(|&t| t > 0.0) {
        return Err(DiadError::Validation(
            "t_f grid has no positive entries".into(),
        ));
    }
    Ok(())
}

/// Plays `profile` at every positive `t_f` and records `1 − score(U)`.
pub fn scan_times<S>(
    model: &ModelSpec,
    profile: &PulseProfile,
    t_f_grid: &[f64],
    steps: Option<usize>,
    score: S,
) -> Result<TimeScan>
where
    S: Fn(&DMatrix<Complex64>) -> Result<f64>,
{
    check_time_grid(t_f_grid)?;
    let skipped_zero = t_f_grid.iter().filter(|&&t| t == 0.0).count();
    let times: Vec<f64> = t_f_grid.iter().copied().filter(|&t| t != 0.0).collect();
    let mut infidelity = Vec::with_capacity(times.len());
    let (mut best_t_f, mut min_infidelity) = (f64::NAN, f64::INFINITY);
    for &t_f in &times {
        let n_steps = steps.unwrap_or_else(|| default_steps(model, t_f));
        let u = propagate(model, &ScaledPulse { profile, t_f }, n_steps)?;
        let inf = 1.0 - score(&u)?;
        if inf < min_infidelity {
            min_infidelity = inf;
            best_t_f = t_f;
        }
        infidelity.push(inf);
    }
    Ok(TimeScan {
        t_f: times,
        infidelity,
        best_t_f,
        min_infidelity,
        skipped_zero,
    })
}

/// Smallest `1 − F(m → n)` over `t_f_grid`; ties go to the smaller `t_f`.
pub fn min_infidelity_over_times(
    model: &ModelSpec,
    profile: &PulseProfile,
    t_f_grid: &[f64],
    m: usize,
    n: usize,
    steps: Option<usize>,
) -> Result<TimeScan> {
    let ends = Endpoints::of(model);
    scan_times(model, profile, t_f_grid, steps, |u| ends.fidelity(u, m, n))
}

/// One `(θ, t_f)` cell of an exponent sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub theta: [f64; 4],
    pub t_f: f64,
    pub fidelity: f64,
}

/// Result of sweeping exponent combinations over a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Exponent combinations whose pulse or propagation failed.
    pub failures: Vec<([f64; 4], String)>,
}

/// Best cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SweepSummary {
    pub theta: [f64; 4],
    pub t_f: f64,
    pub min_infidelity: f64,
}

impl Sweep {
    /// Lowest infidelity; ties resolve to the earliest row.
    pub fn best(&self) -> Option<SweepSummary> {
        let mut best: Option<SweepSummary> = None;
        for r in &self.rows {
            let inf = 1.0 - r.fidelity;
            if best.is_none_or(|b| inf < b.min_infidelity) {
                best = Some(SweepSummary {
                    theta: r.theta,
                    t_f: r.t_f,
                    min_infidelity: inf,
                });
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, w: W, comments: &[String]) -> std::io::Result<()> {
        let rows = self.rows.iter().map(|r| {
            let [a, b, ah, bh] = r.theta;
            vec![a, b, ah, bh, r.t_f, r.fidelity]
        });
        write_table(
            w,
            comments,
            &["alpha", "beta", "alpha_hat", "beta_hat", "t_f", "fidelity"],
            rows,
        )
    }
}

/// Pulse-generation and propagation settings shared by sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub grid_points: usize,
    pub steps: Option<usize>,
}

/// Evaluates `score` for every `θ` and `t_f`; `θ` run in parallel.
pub fn sweep_exponents<S>(
    model: &ModelSpec,
    thetas: &[[f64; 4]],
    xi: &TransitionMatrix,
    t_f_grid: &[f64],
    settings: &SweepSettings,
    score: S,
) -> Result<Sweep>
where
    S: Fn(&DMatrix<Complex64>) -> Result<f64> + Sync,
{
    check_time_grid(t_f_grid)?;
    let outcomes: Vec<Result<TimeScan>> = thetas
        .par_iter()
        .map(|&theta| {
            let exps = DiadExponents::from_array(theta)?;
            let profile = generate_pulse(model, &exps, xi, settings.grid_points)?;
            scan_times(model, &profile, t_f_grid, settings.steps, &score)
        })
        .collect();
    let mut sweep = Sweep {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (theta, outcome) in thetas.iter().zip(outcomes) {
        match outcome {
            Ok(scan) => {
                sweep
                    .rows
                    .extend(
                        scan.t_f
                            .iter()
                            .zip(&scan.infidelity)
                            .map(|(&t_f, &inf)| SweepRow {
                                theta: *theta,
                                t_f,
                                fidelity: 1.0 - inf,
                            }),
                    )
            }
            Err(e) => sweep.failures.push((*theta, e.to_string())),
        }
    }
    Ok(sweep)
}
