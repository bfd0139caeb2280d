// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Derivative-free search over the exponents `θ = (α, β, α̂, β̂)`.
//!
//! All three searches share an objective cache keyed by `θ` rounded to 1e-9,
//! and budgets count distinct evaluations. A coordinate whose bounds coincide
//! is held fixed.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diad::{DiadExponents, TransitionMatrix};
use crate::error::{DiadError, Result};
use crate::evolution::transfer;
use crate::models::ModelSpec;
use crate::pulse::generate_pulse;
use crate::table::write_table;

pub type Theta = [f64; 4];

/// Cache resolution per coordinate.
pub const CACHE_QUANTUM: f64 = 1e-9;

/// Nelder-Mead reflection, expansion, contraction and shrink coefficients.
pub const NM_COEFFICIENTS: (f64, f64, f64, f64) = (1.0, 2.0, 0.5, 0.5);

/// Bounds used for exponent searches: `α, β ∈ [0, 5]`, `α̂, β̂ ∈ [−3, 3]`.
pub const EXPONENT_BOUNDS: [[f64; 2]; 4] = [[0.0, 5.0], [0.0, 5.0], [-3.0, 3.0], [-3.0, 3.0]];

/// An objective with box bounds, an evaluation budget and a seed.
pub struct OptimizationProblem<F> {
    objective: F,
    bounds: [[f64; 2]; 4],
    budget: usize,
    seed: u64,
}

impl<F> OptimizationProblem<F>
where
    F: Fn(&Theta) -> Result<f64> + Sync,
{
    pub fn new(objective: F, bounds: [[f64; 2]; 4], budget: usize, seed: u64) -> Result<Self> {
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(DiadError::Validation(format!(
                    "bounds for coordinate {i} must be finite with lower <= upper, got [{lo}, {hi}]"
                )));
            }
        }
        if budget == 0 {
            return Err(DiadError::Validation("budget must be at least 1".into()));
        }
        Ok(OptimizationProblem {
            objective,
            bounds,
            budget,
            seed,
        })
    }

    pub fn bounds(&self) -> &[[f64; 2]; 4] {
        &self.bounds
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn free_axes(&self) -> Vec<usize> {
        (0..4)
            .filter(|&i| self.bounds[i][0] < self.bounds[i][1])
            .collect()
    }

    fn clip(&self, theta: &mut Theta) {
        for (x, [lo, hi]) in theta.iter_mut().zip(&self.bounds) {
            *x = x.clamp(*lo, *hi);
        }
    }

    fn contains(&self, theta: &Theta) -> bool {
        theta
            .iter()
            .zip(&self.bounds)
            .all(|(x, [lo, hi])| lo <= x && x <= hi)
    }

    /// Objective value, or 1 with the failure flag set if it errored.
    fn score(&self, theta: &Theta) -> (f64, bool) {
        match (self.objective)(theta) {
            Ok(v) if v.is_finite() => (v, false),
            _ => (1.0, true),
        }
    }
}

/// One distinct objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub index: usize,
    pub theta: Theta,
    pub infidelity: f64,
    /// The objective failed and `infidelity` was recorded as 1.
    pub failed: bool,
}

/// Outcome of a search: the best evaluation and the full trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Evaluation,
    pub trace: Vec<Evaluation>,
}

impl SearchResult {
    fn from_trace(trace: Vec<Evaluation>) -> Self {
        let mut best = trace[0];
        for e in &trace[1..] {
            if e.infidelity < best.infidelity {
                best = *e;
            }
        }
        SearchResult { best, trace }
    }

    /// Writes the trace as CSV.
    pub fn write_trace_csv<W: Write>(&self, w: W, comments: &[String]) -> std::io::Result<()> {
        let rows = self.trace.iter().map(|e| {
            let [a, b, ah, bh] = e.theta;
            vec![e.index as f64, a, b, ah, bh, e.infidelity]
        });
        write_table(
            w,
            comments,
            &[
                "eval_index",
                "alpha",
                "beta",
                "alpha_hat",
                "beta_hat",
                "infidelity",
            ],
            rows,
        )
    }
}

fn cache_key(theta: &Theta) -> [i64; 4] {
    theta.map(|x| (x / CACHE_QUANTUM).round() as i64)
}

/// Budgeted, cached evaluator.
struct Evaluator<'p, F> {
    problem: &'p OptimizationProblem<F>,
    cache: HashMap<[i64; 4], f64>,
    trace: Vec<Evaluation>,
}

impl<'p, F> Evaluator<'p, F>
where
    F: Fn(&Theta) -> Result<f64> + Sync,
{
    fn new(problem: &'p OptimizationProblem<F>) -> Self {
        Evaluator {
            problem,
            cache: HashMap::new(),
            trace: Vec::new(),
        }
    }

    fn exhausted(&self) -> bool {
        self.trace.len() >= self.problem.budget
    }

    /// `None` once the budget is spent and `theta` is not cached.
    fn eval(&mut self, theta: &Theta) -> Option<f64> {
        let key = cache_key(theta);
        if let Some(&v) = self.cache.get(&key) {
            return Some(v);
        }
        if self.exhausted() {
            return None;
        }
        let (v, failed) = self.problem.score(theta);
        self.cache.insert(key, v);
        self.trace.push(Evaluation {
            index: self.trace.len(),
            theta: *theta,
            infidelity: v,
            failed,
        });
        Some(v)
    }
}

/// Tensor grid in lexicographic order; fixed axes contribute one point and
/// free axes `resolution[i]` evenly spaced points, endpoints included.
pub fn grid_points(bounds: &[[f64; 2]; 4], resolution: [usize; 4]) -> Result<Vec<Theta>> {
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(4);
    for (i, &[lo, hi]) in bounds.iter().enumerate() {
        if lo == hi {
            axes.push(vec![lo]);
            continue;
        }
        let n = resolution[i];
        if n < 2 {
            return Err(DiadError::Validation(format!(
                "swept axis {i} needs a resolution of at least 2, got {n}"
            )));
        }
        let mut axis: Vec<f64> = (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect();
        axis[n - 1] = hi;
        axes.push(axis);
    }
    let mut points = Vec::new();
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                for &d in &axes[3] {
                    points.push([a, b, c, d]);
                }
            }
        }
    }
    Ok(points)
}

/// Exhaustive search on a tensor grid; `resolution[i]` points per free axis.
///
/// Points run in lexicographic order of `θ` and ties keep the earliest, so
/// the argmin is the lexicographically smallest minimizer. The budget is not
/// applied.
pub fn grid_sweep<F>(
    problem: &OptimizationProblem<F>,
    resolution: [usize; 4],
) -> Result<SearchResult>
where
    F: Fn(&Theta) -> Result<f64> + Sync,
{
    let points = grid_points(&problem.bounds, resolution)?;
    let scores: Vec<(f64, bool)> = points.par_iter().map(|t| problem.score(t)).collect();
    let trace = points
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (&theta, (infidelity, failed)))| Evaluation {
            index,
            theta,
            infidelity,
            failed,
        })
        .collect();
    Ok(SearchResult::from_trace(trace))
}

/// Uniform samples within the bounds; sample `i` draws from its own stream of
/// the seeded generator, so results do not depend on thread count and nested
/// budgets share their prefix.
pub fn random_search<F>(problem: &OptimizationProblem<F>) -> Result<SearchResult>
where
    F: Fn(&Theta) -> Result<f64> + Sync,
{
    let points: Vec<Theta> = (0..problem.budget)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
            rng.set_stream(i as u64);
            let mut theta = [0.0; 4];
            for (x, [lo, hi]) in theta.iter_mut().zip(&problem.bounds) {
                *x = if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                };
            }
            theta
        })
        .collect();
    let scores: Vec<(f64, bool)> = points.par_iter().map(|t| problem.score(t)).collect();
    let trace = points
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (&theta, (infidelity, failed)))| Evaluation {
            index,
            theta,
            infidelity,
            failed,
        })
        .collect();
    Ok(SearchResult::from_trace(trace))
}

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Initial simplex edge as a fraction of each free axis' range.
    pub initial_step: f64,
    /// Stop when the simplex spread in `f` is at most this...
    pub f_tol: f64,
    /// ...and its spread in every coordinate is at most this.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            initial_step: 0.1,
            f_tol: 1e-12,
            x_tol: 1e-8,
        }
    }
}

/// Nelder-Mead simplex search from `initial` over the free coordinates.
///
/// Trial points are clipped to the bounds. Returns the best evaluation seen;
/// running out of budget is not an error.
pub fn nelder_mead<F>(
    problem: &OptimizationProblem<F>,
    initial: Theta,
    options: &NelderMeadOptions,
) -> Result<SearchResult>
where
    F: Fn(&Theta) -> Result<f64> + Sync,
{
    if !problem.contains(&initial) {
        return Err(DiadError::Validation(format!(
            "initial point {initial:?} is outside the bounds"
        )));
    }
    let (rho, chi, gamma, sigma) = NM_COEFFICIENTS;
    let free = problem.free_axes();
    let mut ev = Evaluator::new(problem);
    let f0 = ev.eval(&initial).unwrap();
    if free.is_empty() {
        return Ok(SearchResult::from_trace(ev.trace));
    }

    let mut simplex: Vec<(Theta, f64)> = vec![(initial, f0)];
    for &i in &free {
        let [lo, hi] = problem.bounds[i];
        let h = options.initial_step * (hi - lo);
        let mut v = initial;
        v[i] = if initial[i] + h <= hi {
            initial[i] + h
        } else {
            initial[i] - h
        };
        match ev.eval(&v) {
            Some(f) => simplex.push((v, f)),
            None => return Ok(SearchResult::from_trace(ev.trace)),
        }
    }

    let n = free.len();
    let combine = |a: &Theta, b: &Theta, t: f64| -> Theta {
        let mut out = *a;
        for &i in &free {
            out[i] = a[i] + t * (b[i] - a[i]);
        }
        out
    };
    loop {
        // Stable sort keeps earlier vertices first on ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_spread = simplex[n].1 - simplex[0].1;
        let x_spread = free
            .iter()
            .map(|&i| {
                simplex
                    .iter()
                    .map(|v| (v.0[i] - simplex[0].0[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (f_spread <= options.f_tol && x_spread <= options.x_tol)
            || x_spread <= CACHE_QUANTUM
            || ev.exhausted()
        {
            break;
        }

        let mut centroid = simplex[0].0;
        for &i in &free {
            centroid[i] = simplex[..n].iter().map(|v| v.0[i]).sum::<f64>() / n as f64;
        }
        let (worst, f_worst) = simplex[n];
        let trial = |ev: &mut Evaluator<F>, t: f64| -> Option<(Theta, f64)> {
            let mut p = combine(&centroid, &worst, -t);
            problem.clip(&mut p);
            ev.eval(&p).map(|f| (p, f))
        };

        let Some((xr, fr)) = trial(&mut ev, rho) else {
            break;
        };
        if fr < simplex[0].1 {
            let Some((xe, fe)) = trial(&mut ev, rho * chi) else {
                simplex[n] = (xr, fr);
                break;
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let contracted = if fr < f_worst {
            trial(&mut ev, rho * gamma).map(|(x, f)| (x, f, f <= fr))
        } else {
            trial(&mut ev, -gamma).map(|(x, f)| (x, f, f < f_worst))
        };
        let Some((xc, fc, accepted)) = contracted else {
            break;
        };
        if accepted {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            let p = combine(&best, &v.0, sigma);
            match ev.eval(&p) {
                Some(f) => *v = (p, f),
                None => return Ok(SearchResult::from_trace(ev.trace)),
            }
        }
    }
    Ok(SearchResult::from_trace(ev.trace))
}

/// `θ ↦ 1 − F(m → n)` for `model` played over a fixed `t_f`.
pub fn transfer_objective<'a>(
    model: &'a ModelSpec,
    xi: &'a TransitionMatrix,
    t_f: f64,
    levels: (usize, usize),
    grid_points: usize,
    steps: Option<usize>,
) -> impl Fn(&Theta) -> Result<f64> + Sync + 'a {
    move |theta: &Theta| {
        let exps = DiadExponents::from_array(*theta)?;
        let profile = generate_pulse(model, &exps, xi, grid_points)?;
        Ok(1.0 - transfer(model, &profile, t_f, levels.0, levels.1, steps)?.fidelity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sphere(t: &Theta) -> Result<f64> {
        Ok(t.iter().map(|x| x * x).sum())
    }

    fn wide() -> [[f64; 2]; 4] {
        [[-5.0, 5.0]; 4]
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(OptimizationProblem::new(sphere, [[1.0, 0.0]; 4], 10, 0).is_err());
        assert!(OptimizationProblem::new(sphere, wide(), 0, 0).is_err());
        let p = OptimizationProblem::new(sphere, wide(), 10, 0).unwrap();
        assert!(nelder_mead(&p, [6.0, 0.0, 0.0, 0.0], &Default::default()).is_err());
        assert!(grid_sweep(&p, [1, 2, 2, 2]).is_err());
    }

    #[test]
    fn grid_of_one_point() {
        let p = OptimizationProblem::new(
            sphere,
            [[1.0, 1.0], [2.0, 2.0], [0.0, 0.0], [-1.0, -1.0]],
            1,
            0,
        )
        .unwrap();
        let r = grid_sweep(&p, [1, 1, 1, 1]).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best.theta, [1.0, 2.0, 0.0, -1.0]);
        assert_eq!(r.best.infidelity, 6.0);
    }

    #[test]
    fn grid_finds_contained_minimum() {
        let target = [1.0, -0.5, 2.0, 0.0];
        let f = |t: &Theta| Ok(t.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum());
        let p =
            OptimizationProblem::new(f, [[-1.0, 3.0], [-1.0, 1.0], [0.0, 4.0], [-2.0, 2.0]], 1, 0)
                .unwrap();
        let r = grid_sweep(&p, [5, 5, 5, 5]).unwrap();
        assert_eq!(r.trace.len(), 625);
        assert_eq!(r.best.theta, target);
    }

    #[test]
    fn grid_ties_go_lexicographically_first() {
        let p = OptimizationProblem::new(
            |_: &Theta| Ok(0.5),
            [[0.0, 1.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]],
            1,
            0,
        )
        .unwrap();
        assert_eq!(grid_sweep(&p, [3, 3, 1, 1]).unwrap().best.theta, [0.0; 4]);
    }

    #[test]
    fn grid_records_failures() {
        let f = |t: &Theta| {
            if t[0] > 0.5 {
                Err(DiadError::Pulse("boom".into()))
            } else {
                Ok(0.25)
            }
        };
        let p = OptimizationProblem::new(f, [[0.0, 1.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], 1, 0)
            .unwrap();
        let r = grid_sweep(&p, [2, 1, 1, 1]).unwrap();
        assert!(!r.trace[0].failed);
        assert!(r.trace[1].failed);
        assert_eq!(r.trace[1].infidelity, 1.0);
        assert_eq!(r.best.theta[0], 0.0);
    }

    #[test]
    fn nelder_mead_solves_sphere() {
        let p = OptimizationProblem::new(sphere, wide(), 200, 0).unwrap();
        let r = nelder_mead(&p, [1.0; 4], &Default::default()).unwrap();
        assert!(r.trace.len() <= 200);
        assert!(r.best.theta.iter().all(|x| x.abs() < 1e-4), "{:?}", r.best);
    }

    #[test]
    fn nelder_mead_constant_objective_keeps_start() {
        let p = OptimizationProblem::new(|_: &Theta| Ok(3.0), wide(), 500, 0).unwrap();
        let r = nelder_mead(&p, [0.5, 0.5, 0.5, 0.5], &Default::default()).unwrap();
        assert_eq!(r.best.theta, [0.5; 4]);
        assert!(r.trace.len() < 500);
    }

    #[test]
    fn nelder_mead_respects_budget_and_fixed_axes() {
        let p = OptimizationProblem::new(
            sphere,
            [[-5.0, 5.0], [2.0, 2.0], [-5.0, 5.0], [-5.0, 5.0]],
            7,
            0,
        )
        .unwrap();
        let r = nelder_mead(&p, [3.0, 2.0, 3.0, 3.0], &Default::default()).unwrap();
        assert_eq!(r.trace.len(), 7);
        assert!(r.trace.iter().all(|e| e.theta[1] == 2.0));
    }

    #[test]
    fn nelder_mead_clips_to_bounds() {
        // Minimum outside the box sits on the boundary.
        let f = |t: &Theta| Ok((t[0] - 10.0).powi(2) + t[1] * t[1]);
        let p =
            OptimizationProblem::new(f, [[0.0, 1.0], [-1.0, 1.0], [0.0, 0.0], [0.0, 0.0]], 200, 0)
                .unwrap();
        let r = nelder_mead(&p, [0.5, 0.5, 0.0, 0.0], &Default::default()).unwrap();
        assert!((r.best.theta[0] - 1.0).abs() < 1e-6);
        assert!(r.trace.iter().all(|e| p.contains(&e.theta)));
    }

    #[test]
    fn random_search_single_sample_and_determinism() {
        let p = OptimizationProblem::new(sphere, EXPONENT_BOUNDS, 1, 42).unwrap();
        let r = random_search(&p).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best, r.trace[0]);
        let p = OptimizationProblem::new(sphere, EXPONENT_BOUNDS, 50, 42).unwrap();
        let a = random_search(&p).unwrap();
        let b = random_search(&p).unwrap();
        assert_eq!(a, b);
        let other = OptimizationProblem::new(sphere, EXPONENT_BOUNDS, 50, 43).unwrap();
        assert_ne!(random_search(&other).unwrap().trace, a.trace);
    }

    #[test]
    fn random_search_is_thread_count_independent() {
        let p = OptimizationProblem::new(sphere, EXPONENT_BOUNDS, 64, 9).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| random_search(&p)).unwrap();
        let b = four.install(|| random_search(&p)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_csv_round_trips() {
        let p = OptimizationProblem::new(sphere, EXPONENT_BOUNDS, 5, 1).unwrap();
        let r = random_search(&p).unwrap();
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf, &["seed=1".into()]).unwrap();
        let t = crate::table::read_table(buf.as_slice()).unwrap();
        assert_eq!(
            t.column("infidelity").unwrap(),
            r.trace.iter().map(|e| e.infidelity).collect::<Vec<_>>()
        );
        assert_eq!(
            t.column("eval_index").unwrap(),
            vec![0.0, 1.0, 2.0, 3.0, 4.0]
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn results_stay_in_bounds(seed in any::<u64>(), start in prop::array::uniform4(0.0f64..1.0)) {
            let f = |t: &Theta| Ok((t[0] - 7.0).powi(2) + (t[2] + 9.0).powi(2) + t[1].sin() + t[3]);
            let p = OptimizationProblem::new(f, EXPONENT_BOUNDS, 60, seed).unwrap();
            let init = [5.0 * start[0], 5.0 * start[1], 6.0 * start[2] - 3.0, 6.0 * start[3] - 3.0];
            for r in [random_search(&p).unwrap(), nelder_mead(&p, init, &Default::default()).unwrap()] {
                prop_assert!(r.trace.iter().all(|e| p.contains(&e.theta)));
            }
        }

        #[test]
        fn nested_budgets_never_worsen(seed in any::<u64>(), small in 1usize..30, extra in 0usize..30) {
            let small_p = OptimizationProblem::new(sphere, EXPONENT_BOUNDS, small, seed).unwrap();
            let large_p = OptimizationProblem::new(sphere, EXPONENT_BOUNDS, small + extra, seed).unwrap();
            let a = random_search(&small_p).unwrap();
            let b = random_search(&large_p).unwrap();
            prop_assert!(b.best.infidelity <= a.best.infidelity);
            prop_assert_eq!(&b.trace[..small], &a.trace[..]);
            let na = nelder_mead(&small_p, [1.0, 1.0, 0.0, 0.0], &Default::default()).unwrap();
            let nb = nelder_mead(&large_p, [1.0, 1.0, 0.0, 0.0], &Default::default()).unwrap();
            prop_assert!(nb.best.infidelity <= na.best.infidelity);
        }
    }
}
