// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Constant-speed control pulses from the di-ad tensor.
//!
//! For a single control ε the pulse satisfies `G_εε(ε) (dε/dτ)² = L²` on
//! `τ ∈ [0, 1]`. The equation is separable: the cumulative arc length
//! `s(ε) = ∫ √G_εε dε` is tabulated by the trapezoid rule and inverted,
//! `ε(τ) = s⁻¹(τ L)`, with a monotone cubic through the table. Multi-parameter
//! geodesics live in [`geodesic`].

pub mod geodesic;
pub mod interp;

use std::io::Write;

use crate::diad::{diad_tensor_with, DiadExponents, DiadOptions, TransitionMatrix};
use crate::error::{DiadError, Result};
use crate::models::ModelSpec;
use crate::spectral::eigendecompose;
use crate::table::write_table;

pub use geodesic::{geodesic_integrate, DiadMetricField, FnMetricField, GeodesicPath, MetricField};
pub use interp::MonotoneCubic;

/// Smallest accepted number of quadrature intervals.
pub const MIN_GRID_POINTS: usize = 64;

/// Default number of quadrature intervals.
pub const DEFAULT_GRID_POINTS: usize = 2048;

/// Cumulative arc length `s(ε)` on a uniform control grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLengthTable {
    controls: Vec<f64>,
    sqrt_metric: Vec<f64>,
    cumulative: Vec<f64>,
    clamped_elements: usize,
}

impl ArcLengthTable {
    /// Grid of control values, from the start of the range to its end.
    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    /// `√G_εε` at each grid control.
    pub fn sqrt_metric(&self) -> &[f64] {
        &self.sqrt_metric
    }

    /// `s` at each grid control; starts at 0.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Total path length `L`.
    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Matrix elements raised to the clamp floor while building the table.
    pub fn clamped_elements(&self) -> usize {
        self.clamped_elements
    }
}

/// `G_εε` of the di-ad tensor at one control value, with the clamp count.
pub fn diad_metric_at(
    model: &ModelSpec,
    exps: &DiadExponents,
    xi: &TransitionMatrix,
    control: f64,
) -> Result<(f64, usize)> {
    let spec = eigendecompose(&model.hamiltonian(control));
    let dh = [model.hamiltonian_gradient(control)];
    let eval = diad_tensor_with(&spec, &dh, exps, xi, &DiadOptions::default())?;
    Ok((eval.tensor[(0, 0)], eval.clamped_elements))
}

/// Arc-length table of the di-ad metric of `model` over its control range.
pub fn arc_length_table(
    model: &ModelSpec,
    exps: &DiadExponents,
    xi: &TransitionMatrix,
    grid_points: usize,
) -> Result<ArcLengthTable> {
    if xi.dim() != model.dim() {
        return Err(DiadError::Validation(format!(
            "transition matrix dimension {} does not match model dimension {}",
            xi.dim(),
            model.dim()
        )));
    }
    arc_length_table_from(
        |eps| diad_metric_at(model, exps, xi, eps),
        model.control_range(),
        grid_points,
    )
}

/// Arc-length table of an arbitrary metric `G(ε)`; the closure returns the
/// metric value and the number of clamped elements behind it.
pub fn arc_length_table_from<F>(
    mut metric: F,
    range: [f64; 2],
    grid_points: usize,
) -> Result<ArcLengthTable>
where
    F: FnMut(f64) -> Result<(f64, usize)>,
{
    if grid_points < MIN_GRID_POINTS {
        return Err(DiadError::Validation(format!(
            "grid_points must be at least {MIN_GRID_POINTS}, got {grid_points}"
        )));
    }
    let [start, end] = range;
    if !(start.is_finite() && end.is_finite()) || start == end {
        return Err(DiadError::Validation(format!(
            "control range [{start}, {end}] must be finite with distinct endpoints"
        )));
    }
    let n = grid_points;
    let step = (end - start) / n as f64;
    let mut controls = Vec::with_capacity(n + 1);
    let mut sqrt_metric = Vec::with_capacity(n + 1);
    let mut clamped_elements = 0;
    for k in 0..=n {
        let eps = if k == n { end } else { start + k as f64 * step };
        let (g, clamped) = metric(eps)?;
        if !g.is_finite() || g < 0.0 {
            return Err(DiadError::Pulse(format!("metric is {g} at control {eps}")));
        }
        controls.push(eps);
        sqrt_metric.push(g.sqrt());
        clamped_elements += clamped;
    }
    let h = step.abs();
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    for k in 0..n {
        let ds = 0.5 * h * (sqrt_metric[k] + sqrt_metric[k + 1]);
        if !(ds > 0.0) || !ds.is_finite() {
            return Err(DiadError::Pulse(format!(
                "arc length does not increase between controls {} and {}",
                controls[k],
                controls[k + 1]
            )));
        }
        cumulative.push(cumulative[k] + ds);
    }
    if !cumulative[n].is_finite() {
        return Err(DiadError::Pulse("path length overflowed".into()));
    }
    Ok(ArcLengthTable {
        controls,
        sqrt_metric,
        cumulative,
        clamped_elements,
    })
}

/// A solved pulse `ε(τ)` on normalized time `τ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseProfile {
    tau_grid: Vec<f64>,
    control_values: Vec<f64>,
    length: f64,
    clamped_elements: usize,
    curve: MonotoneCubic,
}

impl PulseProfile {
    /// Inverts an arc-length table into a constant-speed pulse.
    pub fn from_table(table: &ArcLengthTable) -> Self {
        let length = table.length();
        let n = table.controls.len() - 1;
        let u: Vec<f64> = table.cumulative.iter().map(|s| s / length).collect();
        let direction = (table.controls[n] - table.controls[0]).signum();
        // dε/du = L / √G exactly at each knot.
        let slopes: Vec<f64> = table
            .sqrt_metric
            .iter()
            .map(|&r| direction * length / r)
            .collect();
        let curve = if slopes.iter().all(|s| s.is_finite()) {
            MonotoneCubic::with_slopes(u, table.controls.clone(), slopes)
        } else {
            MonotoneCubic::new(u, table.controls.clone())
        };
        let tau_grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let control_values = tau_grid.iter().map(|&t| curve.eval(t)).collect();
        PulseProfile {
            tau_grid,
            control_values,
            length,
            clamped_elements: table.clamped_elements,
            curve,
        }
    }

    /// Uniform samples of `τ`, `N + 1` of them.
    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }

    /// `ε` at each entry of [`tau_grid`](Self::tau_grid).
    pub fn control_values(&self) -> &[f64] {
        &self.control_values
    }

    /// Path length `L` in metric units.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Adiabaticity `δ = L / t_f`.
    pub fn delta_for(&self, t_f: f64) -> f64 {
        self.length / t_f
    }

    /// `ε(τ)`; `τ` is clamped to `[0, 1]`.
    pub fn control_at(&self, tau: f64) -> f64 {
        self.curve.eval(tau)
    }

    pub fn control_start(&self) -> f64 {
        self.control_values[0]
    }

    pub fn control_end(&self) -> f64 {
        *self.control_values.last().unwrap()
    }

    pub fn clamped_elements(&self) -> usize {
        self.clamped_elements
    }
}

/// Constant-speed pulse for the di-ad metric of `model`.
pub fn generate_pulse(
    model: &ModelSpec,
    exps: &DiadExponents,
    xi: &TransitionMatrix,
    grid_points: usize,
) -> Result<PulseProfile> {
    arc_length_table(model, exps, xi, grid_points).map(|t| PulseProfile::from_table(&t))
}

/// Constant-speed pulse for an arbitrary metric `G(ε)`.
pub fn generate_pulse_from<F>(
    metric: F,
    range: [f64; 2],
    grid_points: usize,
) -> Result<PulseProfile>
where
    F: FnMut(f64) -> f64,
{
    let mut metric = metric;
    arc_length_table_from(|e| Ok((metric(e), 0)), range, grid_points)
        .map(|t| PulseProfile::from_table(&t))
}

/// Largest relative deviation of `G(ε(τ)) (dε/dτ)²` from `L²`, measured with
/// centered differences at the midpoints of `samples` uniform τ intervals.
pub fn constant_speed_residual<F>(
    profile: &PulseProfile,
    mut metric: F,
    samples: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let h = 1.0 / samples as f64;
    let l2 = profile.length * profile.length;
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let a = profile.control_at(k as f64 * h);
        let b = profile.control_at((k + 1) as f64 * h);
        let mid = profile.control_at((k as f64 + 0.5) * h);
        let v = (b - a) / h;
        worst = worst.max((metric(mid)? * v * v / l2 - 1.0).abs());
    }
    Ok(worst)
}

/// A pulse resampled in physical time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub controls: Vec<f64>,
}

impl TimeSeries {
    pub fn t_f(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Samples `ε(t)` uniformly on `[0, t_f]`, endpoints included.
pub fn time_domain(profile: &PulseProfile, t_f: f64, samples: usize) -> Result<TimeSeries> {
    if !(t_f > 0.0) || !t_f.is_finite() {
        return Err(DiadError::Validation(format!(
            "t_f must be positive and finite, got {t_f}"
        )));
    }
    if samples < 2 {
        return Err(DiadError::Validation(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let last = samples - 1;
    let mut times = Vec::with_capacity(samples);
    let mut controls = Vec::with_capacity(samples);
    for k in 0..samples {
        let tau = if k == last {
            1.0
        } else {
            k as f64 / last as f64
        };
        times.push(if k == last { t_f } else { tau * t_f });
        controls.push(profile.control_at(tau));
    }
    Ok(TimeSeries { times, controls })
}

/// Writes a sampled pulse as a two-column `t,epsilon` CSV.
pub fn write_pulse_csv<W: Write>(
    w: W,
    model: &ModelSpec,
    exps: &DiadExponents,
    series: &TimeSeries,
) -> std::io::Result<()> {
    let [a, b, ah, bh] = exps.as_array();
    let header = format!(
        "model={} alpha={a} beta={b} alpha_hat={ah} beta_hat={bh} t_f={}",
        model.tag(),
        series.t_f()
    );
    let rows = series
        .times
        .iter()
        .zip(&series.controls)
        .map(|(&t, &e)| vec![t, e]);
    write_table(w, &[header], &["t", "epsilon"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BucketBrigadeParams, DqdParams};
    use crate::table::read_table;
    use proptest::prelude::*;

    fn lz(n: f64) -> (ModelSpec, DiadExponents, TransitionMatrix) {
        let xi = if n < 0.0 {
            TransitionMatrix::from_pairs(2, &[(0, 1)]).unwrap()
        } else {
            TransitionMatrix::zeros(2)
        };
        let exps = if n < 0.0 {
            DiadExponents::new(2.0, 2.0, n, n).unwrap()
        } else {
            DiadExponents::uniform(n)
        };
        (
            ModelSpec::landau_zener(1.0, [-10.0, 10.0]).unwrap(),
            exps,
            xi,
        )
    }

    #[test]
    fn constant_metrics() {
        let t = arc_length_table_from(|_| Ok((1.0, 0)), [0.0, 1.0], 64).unwrap();
        assert!((t.length() - 1.0).abs() < 1e-14);
        for (e, s) in t.controls().iter().zip(t.cumulative()) {
            assert!((e - s).abs() < 1e-14);
        }
        let t = arc_length_table_from(|_| Ok((4.0, 0)), [0.0, 1.0], 64).unwrap();
        assert!((t.length() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_metric_gives_linear_ramp() {
        let p = generate_pulse_from(|_| 3.0, [2.0, -1.0], 128).unwrap();
        for (&tau, &e) in p.tau_grid().iter().zip(p.control_values()) {
            assert!((e - (2.0 - 3.0 * tau)).abs() < 1e-13);
        }
        assert_eq!(p.control_start(), 2.0);
        assert_eq!(p.control_end(), -1.0);
    }

    #[test]
    fn rejects_small_grids_and_bad_metrics() {
        assert!(matches!(
            arc_length_table_from(|_| Ok((1.0, 0)), [0.0, 1.0], 63),
            Err(DiadError::Validation(_))
        ));
        assert!(matches!(
            arc_length_table_from(|_| Ok((f64::NAN, 0)), [0.0, 1.0], 64),
            Err(DiadError::Pulse(_))
        ));
        assert!(matches!(
            arc_length_table_from(|_| Ok((0.0, 0)), [0.0, 1.0], 64),
            Err(DiadError::Pulse(_))
        ));
    }

    #[test]
    fn landau_zener_n0_is_linear() {
        let (m, e, xi) = lz(0.0);
        let p = generate_pulse(&m, &e, &xi, 256).unwrap();
        for (&tau, &z) in p.tau_grid().iter().zip(p.control_values()) {
            assert!((z - (-10.0 + 20.0 * tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn landau_zener_diabatic_steepens_at_crossing() {
        let (m, e, xi) = lz(-2.0);
        let p = generate_pulse(&m, &e, &xi, 2048).unwrap();
        let h = 1e-3;
        let slope = |t: f64| (p.control_at(t + h) - p.control_at(t - h)) / (2.0 * h);
        let mid = slope(0.5);
        assert!(mid > slope(h));
        assert!(mid > slope(1.0 - h));
        assert!(p.control_at(0.5).abs() < 1e-9);
    }

    #[test]
    fn landau_zener_adiabatic_slows_at_crossing() {
        let (m, e, xi) = lz(2.0);
        let p = generate_pulse(&m, &e, &xi, 2048).unwrap();
        let h = 1e-3;
        let slope = |t: f64| (p.control_at(t + h) - p.control_at(t - h)) / (2.0 * h);
        assert!(slope(0.5) < slope(h));
    }

    #[test]
    fn landau_zener_length_matches_fine_quadrature() {
        let (m, e, xi) = lz(2.0);
        let coarse = arc_length_table(&m, &e, &xi, 2048).unwrap().length();
        let fine = arc_length_table(&m, &e, &xi, 20480).unwrap().length();
        // G = x² / (2 (z² + x²)²), so L = √2 atan(10) at x = 1.
        let exact = 2.0f64.sqrt() * 10.0f64.atan();
        assert!((coarse - fine).abs() / fine < 1e-6);
        assert!((fine - exact).abs() / exact < 1e-8, "{fine} vs {exact}");
    }

    #[test]
    fn constant_speed_on_finer_grid() {
        let (m, e, xi) = lz(-2.0);
        let n = 512;
        let p = generate_pulse(&m, &e, &xi, n).unwrap();
        let r =
            constant_speed_residual(&p, |z| diad_metric_at(&m, &e, &xi, z).map(|v| v.0), 10 * n)
                .unwrap();
        assert!(r < 1e-2, "residual {r}");
    }

    #[test]
    fn grid_convergence_on_reference_models() {
        let dqd = ModelSpec::dqd_init(DqdParams::reference(), [15.0, 0.0]).unwrap();
        let dqd_xi = TransitionMatrix::from_pairs(5, &[(0, 1)]).unwrap();
        let bb =
            ModelSpec::bucket_brigade(BucketBrigadeParams::reference(), [-10.0, 10.0]).unwrap();
        let cases = [
            (
                dqd,
                DiadExponents::uniform(2.0),
                TransitionMatrix::zeros(5),
            ),
            (dqd, DiadExponents::new(2.0, 2.0, 0.0, 0.0).unwrap(), dqd_xi),
            (bb, DiadExponents::uniform(2.0), TransitionMatrix::zeros(4)),
        ];
        for (m, e, xi) in cases {
            let a = arc_length_table(&m, &e, &xi, 4096).unwrap().length();
            let b = arc_length_table(&m, &e, &xi, 8192).unwrap().length();
            assert!((a - b).abs() / b < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn dqd_pulse_runs_downward() {
        let m = ModelSpec::dqd_init(DqdParams::reference(), [15.0, 0.0]).unwrap();
        let p = generate_pulse(
            &m,
            &DiadExponents::uniform(2.0),
            &TransitionMatrix::zeros(5),
            512,
        )
        .unwrap();
        assert_eq!(p.control_start(), 15.0);
        assert_eq!(p.control_end(), 0.0);
        assert!(p.control_values().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn time_domain_examples() {
        let p = generate_pulse_from(|_| 1.0, [0.0, 1.0], 64).unwrap();
        let s = time_domain(&p, 2.0, 101).unwrap();
        for (t, e) in s.times.iter().zip(&s.controls) {
            assert!((e - t / 2.0).abs() < 1e-13);
        }
        let s = time_domain(&p, 2.0, 2).unwrap();
        assert_eq!(s.times, vec![0.0, 2.0]);
        assert_eq!(s.controls, vec![0.0, 1.0]);
        assert!(matches!(
            time_domain(&p, 0.0, 10),
            Err(DiadError::Validation(_))
        ));

        let (m, e, xi) = lz(2.0);
        let p = generate_pulse(&m, &e, &xi, 1024).unwrap();
        let a = time_domain(&p, 10.0, 501).unwrap();
        let b = time_domain(&p, 100.0, 501).unwrap();
        let dev = a
            .controls
            .iter()
            .zip(&b.controls)
            .fold(0.0f64, |d, (x, y)| d.max((x - y).abs()));
        assert!(dev < 1e-9);
        assert!((p.delta_for(10.0) - 10.0 * p.delta_for(100.0)).abs() < 1e-12);
    }

    #[test]
    fn pulse_csv_round_trip() {
        let (m, e, xi) = lz(2.0);
        let p = generate_pulse(&m, &e, &xi, 128).unwrap();
        let s = time_domain(&p, 5.0, 33).unwrap();
        let mut buf = Vec::new();
        write_pulse_csv(&mut buf, &m, &e, &s).unwrap();
        let t = read_table(buf.as_slice()).unwrap();
        assert_eq!(
            t.comments[0],
            "model=landau_zener alpha=2 beta=2 alpha_hat=2 beta_hat=2 t_f=5"
        );
        assert_eq!(t.columns, vec!["t", "epsilon"]);
        assert_eq!(t.column("epsilon").unwrap(), s.controls);
    }

    fn exponents() -> impl Strategy<Value = [f64; 4]> {
        [-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scale_invariance(c in 1e-3f64..1e3, theta in exponents()) {
            let (m, _, _) = lz(1.0);
            let e = DiadExponents::from_array(theta).unwrap();
            let xi = TransitionMatrix::from_pairs(2, &[(0, 1)]).unwrap();
            let base = generate_pulse(&m, &e, &xi, 256).unwrap();
            let scaled = generate_pulse_from(
                |z| c * diad_metric_at(&m, &e, &xi, z).unwrap().0, m.control_range(), 256).unwrap();
            for (a, b) in base.control_values().iter().zip(scaled.control_values()) {
                prop_assert!((a - b).abs() <= 1e-10 * 20.0);
            }
            prop_assert!((scaled.length() / base.length() - c.sqrt()).abs() < 1e-10 * c.sqrt());
        }

        #[test]
        fn reparametrization_invariance(theta in exponents()) {
            // Traversing the range backwards yields the time-reversed pulse.
            let (m, _, _) = lz(1.0);
            let e = DiadExponents::from_array(theta).unwrap();
            let xi = TransitionMatrix::zeros(2);
            let fwd = generate_pulse(&m, &e, &xi, 256).unwrap();
            let rev = generate_pulse(&m.with_control_range([10.0, -10.0]).unwrap(), &e, &xi, 256).unwrap();
            prop_assert!((fwd.length() - rev.length()).abs() < 1e-10 * fwd.length());
            for k in 0..=50 {
                let t = k as f64 / 50.0;
                prop_assert!((fwd.control_at(t) - rev.control_at(1.0 - t)).abs() < 1e-8);
            }
        }

        #[test]
        fn strictly_monotone(theta in exponents(), family in 0usize..3) {
            let e = DiadExponents::from_array(theta).unwrap();
            let (m, xi) = match family {
                0 => (lz(1.0).0, TransitionMatrix::from_pairs(2, &[(0, 1)]).unwrap()),
                1 => (ModelSpec::dqd_init(DqdParams::reference(), [15.0, 0.0]).unwrap(),
                      TransitionMatrix::from_pairs(5, &[(0, 1)]).unwrap()),
                _ => (ModelSpec::bucket_brigade(BucketBrigadeParams::reference(), [-10.0, 10.0]).unwrap(),
                      TransitionMatrix::from_pairs(4, &[(1, 2)]).unwrap()),
            };
            let p = generate_pulse(&m, &e, &xi, 128).unwrap();
            let sign = (m.control_end() - m.control_start()).signum();
            for w in p.control_values().windows(2) {
                prop_assert!(sign * (w[1] - w[0]) > 0.0);
            }
            prop_assert_eq!(p.control_start(), m.control_start());
            prop_assert_eq!(p.control_end(), m.control_end());
        }
    }
}
