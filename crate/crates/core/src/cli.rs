// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! The `diad` command line: TOML run configs in, CSV tables and JSON out.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::diad::{DiadExponents, TransitionMatrix};
use crate::error::{DiadError, Result};
use crate::evolution::{
    population_trace, sweep_exponents, time_grid, transfer, Endpoints, ScaledPulse, Spacing,
    SweepSettings,
};
use crate::models::{BucketBrigadeParams, DqdParams, ModelKind, ModelSpec};
use crate::optimize::{
    grid_points, grid_sweep, nelder_mead, random_search, transfer_objective, NelderMeadOptions,
    OptimizationProblem, Theta, EXPONENT_BOUNDS,
};
use crate::pulse::{generate_pulse, time_domain, write_pulse_csv, DEFAULT_GRID_POINTS};
use crate::spectral::eigendecompose;
use crate::table::write_table;

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "diad",
    version,
    about = "Geometric diabatic-adiabatic pulse shaping"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy levels across the control range (CSV).
    Spectrum(CommonArgs),
    /// A di-ad pulse sampled in time (CSV).
    Pulse(CommonArgs),
    /// Transfer fidelity of one pulse (JSON, optional population CSV).
    Evolve(CommonArgs),
    /// Fidelity over an exponent grid and a time grid (CSV + JSON summary).
    Sweep(CommonArgs),
    /// Exponent optimization at fixed total time (trace CSV + JSON).
    Optimize(CommonArgs),
    /// Median pulse-generation time (JSON).
    Bench(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output path for CSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and random search.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides `optimize.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Spectrum(a)
            | Command::Pulse(a)
            | Command::Evolve(a)
            | Command::Sweep(a)
            | Command::Optimize(a)
            | Command::Bench(a) => a,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub diad: DiadSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    pub optimize: Option<OptimizeSection>,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub control_range: Option<[f64; 2]>,
    pub landau_zener: Option<LandauZenerSection>,
    pub dqd_init: Option<DqdParams>,
    pub bucket_brigade: Option<BucketBrigadeParams>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandauZenerSection {
    pub x: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiadSection {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub diabatic_pairs: Vec<[usize; 2]>,
}

impl Default for DiadSection {
    fn default() -> Self {
        DiadSection {
            alpha: 2.0,
            beta: 2.0,
            alpha_hat: 0.0,
            beta_hat: 0.0,
            diabatic_pairs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSection {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub grid_points: usize,
    pub t_f: Option<f64>,
    pub t_f_grid: Option<TimeGridSection>,
    /// Time samples in pulse CSVs.
    pub samples: usize,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            grid_points: DEFAULT_GRID_POINTS,
            t_f: None,
            t_f_grid: None,
            samples: 1001,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub steps: Option<usize>,
    pub initial: usize,
    pub target: usize,
    /// Write instantaneous-eigenbasis populations from `evolve`.
    pub populations: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Grid,
    NelderMead,
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub method: Method,
    #[serde(default = "default_bounds")]
    pub bounds: [[f64; 2]; 4],
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Grid points per free axis for `grid` and for `sweep`.
    #[serde(default = "default_resolution")]
    pub resolution: [usize; 4],
    /// Nelder-Mead start; defaults to the center of the bounds.
    pub initial: Option<Theta>,
}

fn default_bounds() -> [[f64; 2]; 4] {
    EXPONENT_BOUNDS
}

fn default_budget() -> usize {
    100
}

fn default_resolution() -> [usize; 4] {
    [11, 11, 7, 7]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub samples: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { samples: 501 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub repeats: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { repeats: 100 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DiadError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DiadError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            DiadError::Config(msg) => DiadError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The model, with the family's default control range when none is given.
    pub fn model(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let present = [
            m.landau_zener.is_some(),
            m.dqd_init.is_some(),
            m.bucket_brigade.is_some(),
        ];
        if present.iter().filter(|&&p| p).count() != 1 {
            return Err(DiadError::Config(
                "model: exactly one of [model.landau_zener], [model.dqd_init], [model.bucket_brigade] is required"
                    .into(),
            ));
        }
        let (kind, default_range) = if let Some(lz) = &m.landau_zener {
            (
                ModelKind::LandauZener { x: lz.x },
                [-10.0 * lz.x, 10.0 * lz.x],
            )
        } else if let Some(p) = m.dqd_init {
            (ModelKind::DqdInit(p), [15.0 * p.t_c, 0.0])
        } else {
            let p = m.bucket_brigade.unwrap();
            (
                ModelKind::BucketBrigade(p),
                [-10.0 * p.delta_l, 10.0 * p.delta_l],
            )
        };
        ModelSpec::new(kind, m.control_range.unwrap_or(default_range)).map_err(as_config("model"))
    }

    pub fn exponents(&self) -> Result<DiadExponents> {
        let d = &self.diad;
        DiadExponents::new(d.alpha, d.beta, d.alpha_hat, d.beta_hat).map_err(as_config("diad"))
    }

    pub fn transitions(&self, dim: usize) -> Result<TransitionMatrix> {
        let pairs: Vec<(usize, usize)> = self
            .diad
            .diabatic_pairs
            .iter()
            .map(|p| (p[0], p[1]))
            .collect();
        TransitionMatrix::from_pairs(dim, &pairs).map_err(as_config("diad.diabatic_pairs"))
    }

    fn levels(&self, dim: usize) -> Result<(usize, usize)> {
        let e = &self.evolution;
        for (name, v) in [("initial", e.initial), ("target", e.target)] {
            if v >= dim {
                return Err(DiadError::Config(format!(
                    "evolution.{name} = {v} is out of range for dimension {dim}"
                )));
            }
        }
        if let Some(s) = e.steps {
            if s < crate::evolution::MIN_STEPS {
                return Err(DiadError::Config(format!(
                    "evolution.steps must be at least {}",
                    crate::evolution::MIN_STEPS
                )));
            }
        }
        Ok((e.initial, e.target))
    }

    fn t_f(&self) -> Result<f64> {
        match self.pulse.t_f {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(DiadError::Config(format!(
                "pulse.t_f must be positive, got {t}"
            ))),
            None => Err(DiadError::Config(
                "pulse.t_f is required for this command".into(),
            )),
        }
    }

    fn t_f_grid(&self) -> Result<Vec<f64>> {
        match (&self.pulse.t_f_grid, self.pulse.t_f) {
            (Some(g), _) => {
                time_grid(g.min, g.max, g.count, g.spacing).map_err(as_config("pulse.t_f_grid"))
            }
            (None, Some(_)) => Ok(vec![self.t_f()?]),
            (None, None) => Err(DiadError::Config(
                "pulse.t_f or pulse.t_f_grid is required".into(),
            )),
        }
    }

    fn optimize_section(&self) -> Result<&OptimizeSection> {
        self.optimize.as_ref().ok_or_else(|| {
            DiadError::Config("[optimize] section is required for this command".into())
        })
    }

    /// Every entry that could be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        self.exponents()?;
        self.transitions(model.dim())?;
        self.levels(model.dim())?;
        if self.pulse.grid_points < crate::pulse::MIN_GRID_POINTS {
            return Err(DiadError::Config(format!(
                "pulse.grid_points must be at least {}",
                crate::pulse::MIN_GRID_POINTS
            )));
        }
        if self.pulse.samples < 2 {
            return Err(DiadError::Config("pulse.samples must be at least 2".into()));
        }
        if self.spectrum.samples < 2 {
            return Err(DiadError::Config(
                "spectrum.samples must be at least 2".into(),
            ));
        }
        if self.bench.repeats < 3 {
            return Err(DiadError::Config("bench.repeats must be at least 3".into()));
        }
        if self.pulse.t_f.is_some() {
            self.t_f()?;
        }
        if self.pulse.t_f_grid.is_some() {
            self.t_f_grid()?;
        }
        Ok(())
    }
}

fn as_config(section: &'static str) -> impl Fn(DiadError) -> DiadError {
    move |e| match e {
        DiadError::Validation(msg) | DiadError::Config(msg) => {
            DiadError::Config(format!("{section}: {msg}"))
        }
        other => other,
    }
}

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| DiadError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Writes a CSV to `out`, or to stdout when there is none.
fn emit_csv(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match out {
        Some(p) => f(&mut open_out(p)?)?,
        None => f(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn emit_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| DiadError::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

fn header(model: &ModelSpec) -> String {
    let [a, b] = model.control_range();
    format!("model={} control_range=[{a},{b}]", model.tag())
}

pub fn cmd_spectrum(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let model = cfg.model()?;
    let n = cfg.spectrum.samples;
    let [a, b] = model.control_range();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let eps = if k + 1 == n {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            };
            let mut row = vec![eps];
            row.extend_from_slice(eigendecompose(&model.hamiltonian(eps)).energies());
            row
        })
        .collect();
    let mut columns = vec!["control".to_string()];
    columns.extend((0..model.dim()).map(|k| format!("E_{k}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    emit_csv(out, |w| write_table(w, &[header(&model)], &cols, rows))
}

pub fn cmd_pulse(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let model = cfg.model()?;
    let exps = cfg.exponents()?;
    let xi = cfg.transitions(model.dim())?;
    let t_f = cfg.t_f()?;
    let profile = generate_pulse(&model, &exps, &xi, cfg.pulse.grid_points)?;
    let series = time_domain(&profile, t_f, cfg.pulse.samples)?;
    emit_csv(out, |w| write_pulse_csv(w, &model, &exps, &series))
}

pub fn cmd_evolve(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let model = cfg.model()?;
    let exps = cfg.exponents()?;
    let xi = cfg.transitions(model.dim())?;
    let (m, n) = cfg.levels(model.dim())?;
    let t_f = cfg.t_f()?;
    let profile = generate_pulse(&model, &exps, &xi, cfg.pulse.grid_points)?;
    let r = transfer(&model, &profile, t_f, m, n, cfg.evolution.steps)?;
    if cfg.evolution.populations {
        let path = out.ok_or_else(|| {
            DiadError::Config("evolution.populations needs an output path".into())
        })?;
        let trace = population_trace(
            &model,
            &ScaledPulse {
                profile: &profile,
                t_f,
            },
            r.steps,
            m,
        )?;
        let mut columns = vec!["t".to_string()];
        columns.extend((0..model.dim()).map(|k| format!("P_{k}")));
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let rows = trace.times.iter().zip(&trace.populations).map(|(&t, p)| {
            let mut row = vec![t];
            row.extend_from_slice(p);
            row
        });
        write_table(open_out(path)?, &[header(&model)], &cols, rows)?;
    }
    emit_json(&json!({
        "fidelity": r.fidelity,
        "t_f": r.t_f,
        "unitarity_residual": r.unitarity_residual(),
    }))
}

fn exponent_grid(cfg: &RunConfig) -> Result<Vec<Theta>> {
    match &cfg.optimize {
        Some(o) => grid_points(&o.bounds, o.resolution).map_err(as_config("optimize")),
        None => Ok(vec![cfg.exponents()?.as_array()]),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let model = cfg.model()?;
    let xi = cfg.transitions(model.dim())?;
    let (m, n) = cfg.levels(model.dim())?;
    let thetas = exponent_grid(cfg)?;
    let grid = cfg.t_f_grid()?;
    let ends = Endpoints::of(&model);
    let settings = SweepSettings {
        grid_points: cfg.pulse.grid_points,
        steps: cfg.evolution.steps,
    };
    let sweep = sweep_exponents(&model, &thetas, &xi, &grid, &settings, |u| {
        ends.fidelity(u, m, n)
    })?;
    if let Some(p) = out {
        sweep.write_csv(
            open_out(p)?,
            &[header(&model), format!("initial={m} target={n}")],
        )?;
    }
    let best = sweep.best().ok_or_else(|| {
        DiadError::Pulse(format!("every grid point failed: {:?}", sweep.failures))
    })?;
    emit_json(&json!({
        "theta": best.theta,
        "t_f": best.t_f,
        "min_infidelity": best.min_infidelity,
        "failed_points": sweep.failures.len(),
    }))
}

pub fn cmd_optimize(cfg: &RunConfig, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let model = cfg.model()?;
    let xi = cfg.transitions(model.dim())?;
    let levels = cfg.levels(model.dim())?;
    let t_f = cfg.t_f()?;
    let o = cfg.optimize_section()?;
    let seed = seed.unwrap_or(o.seed);
    let objective = transfer_objective(
        &model,
        &xi,
        t_f,
        levels,
        cfg.pulse.grid_points,
        cfg.evolution.steps,
    );
    let problem = OptimizationProblem::new(objective, o.bounds, o.budget, seed)
        .map_err(as_config("optimize"))?;
    let result = match o.method {
        Method::Grid => grid_sweep(&problem, o.resolution).map_err(as_config("optimize"))?,
        Method::Random => random_search(&problem)?,
        Method::NelderMead => {
            let initial = o
                .initial
                .unwrap_or_else(|| o.bounds.map(|[lo, hi]| 0.5 * (lo + hi)));
            nelder_mead(&problem, initial, &NelderMeadOptions::default())
                .map_err(as_config("optimize.initial"))?
        }
    };
    if let Some(p) = out {
        result.write_trace_csv(
            open_out(p)?,
            &[header(&model), format!("t_f={t_f} seed={seed}")],
        )?;
    }
    emit_json(&json!({
        "method": format!("{:?}", o.method).to_lowercase(),
        "theta": result.best.theta,
        "infidelity": result.best.infidelity,
        "evaluations": result.trace.len(),
    }))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<()> {
    let model = cfg.model()?;
    let xi = cfg.transitions(model.dim())?;
    let mut results = Vec::new();
    for theta in exponent_grid(cfg)? {
        let exps = DiadExponents::from_array(theta)?;
        let mut timings = Vec::with_capacity(cfg.bench.repeats);
        for _ in 0..cfg.bench.repeats {
            let start = Instant::now();
            std::hint::black_box(generate_pulse(&model, &exps, &xi, cfg.pulse.grid_points)?);
            timings.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
        }
        let med = median(&mut timings.clone());
        results.push(json!({
            "theta": theta,
            "timings_seconds": timings,
            "median_pulse_generation_seconds": med,
        }));
    }
    emit_json(&json!({ "repeats": cfg.bench.repeats, "results": results }))
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    let args = cli.command.args();
    let cfg = RunConfig::load(&args.config)?;
    cfg.validate()?;
    let out = args.out.clone().or_else(|| cfg.output.path.clone());
    let out = out.as_deref();
    let go = || match &cli.command {
        Command::Spectrum(_) => cmd_spectrum(&cfg, out),
        Command::Pulse(_) => cmd_pulse(&cfg, out),
        Command::Evolve(_) => cmd_evolve(&cfg, out),
        Command::Sweep(_) => cmd_sweep(&cfg, out),
        Command::Optimize(_) => cmd_optimize(&cfg, out, args.seed),
        Command::Bench(_) => cmd_bench(&cfg),
    };
    match args.threads {
        Some(0) => Err(DiadError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| DiadError::Config(e.to_string()))?
            .install(go),
        None => go(),
    }
}

/// Exit status for an error.
pub fn exit_code(e: &DiadError) -> i32 {
    if e.is_config() || matches!(e, DiadError::Io(_)) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
