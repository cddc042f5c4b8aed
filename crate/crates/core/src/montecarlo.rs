//! Ensemble execution and write-error statistics.

use crate::conduction::{Drive, DriveKind};
use crate::error::{MtjError, Result};
use crate::model::Model;
use crate::fields::h_thermal_sample;
use crate::rng::{derived_seed, AuxStream, NoiseStream};
use crate::solvers::{simulate_run, Side, SolverConfig};
use crate::state::MagState;
use crate::vec3::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::Write;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// How each member's initial magnetization is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// The same state for every run.
    Explicit { theta: f64, phi: f64 },
    /// Tilted by `scale`·θ₀ from the chosen pole, φ = 0.
    Cone {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "up")]
        pole: Side,
    },
    /// Small-angle Boltzmann draw around the chosen pole: θ² exponential
    /// with mean 1/Δ, φ uniform.
    Thermalized {
        #[serde(default = "up")]
        pole: Side,
    },
}

fn one() -> f64 {
    1.0
}

fn up() -> Side {
    Side::Up
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Cone {
            scale: 1.0,
            pole: Side::Up,
        }
    }
}

fn around_pole(theta: f64, phi: f64, pole: Side) -> MagState {
    match pole {
        Side::Up => MagState::new(theta, phi),
        Side::Down => MagState::new(PI - theta, phi),
    }
}

impl InitialCondition {
    /// State of run `run_index`; draws come from the run's auxiliary stream.
    pub fn resolve(&self, model: &Model, master_seed: u64, run_index: u64) -> MagState {
        match *self {
            InitialCondition::Explicit { theta, phi } => MagState::new(theta, phi),
            InitialCondition::Cone { scale, pole } => around_pole(scale * model.derived.theta0, 0.0, pole),
            InitialCondition::Thermalized { pole } => {
                let mut aux = AuxStream::new(master_seed, run_index);
                let mean = 1.0 / model.derived.delta_thermal;
                let theta = (-mean * aux.uniform_open().ln()).sqrt();
                let phi = TAU * aux.uniform();
                around_pole(theta, phi, pole)
            }
        }
    }
}

/// The Brownian field sequence drawn by a stochastic Heun run on stream
/// (`master_seed`, `run`) with step `dt`, as piecewise-constant `(t, H)`
/// entries for [`Drive::with_field`]. Replaying it through a deterministic
/// solver reproduces that run's noise realization.
pub fn frozen_thermal_field(model: &Model, master_seed: u64, run: u64, dt: f64, t_end: f64) -> Result<Vec<(f64, Vec3)>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MtjError::InvalidStep(dt));
    }
    let mut noise = NoiseStream::new(master_seed, run);
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as u64;
    let sigma_full = model.thermal_sigma(dt)?;
    let mut out = Vec::with_capacity(n as usize);
    for k in 0..n {
        let t0 = k as f64 * dt;
        let h = ((k + 1) as f64 * dt).min(t_end) - t0;
        let sigma = if h == dt { sigma_full } else { model.thermal_sigma(h)? };
        out.push((t0, h_thermal_sample(&mut noise, k, sigma)));
    }
    Ok(out)
}

/// Device, stimulus and integration settings shared by every member.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: Model,
    pub solver: SolverConfig,
    pub initial: InitialCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_runs: 1000,
            master_seed: 1,
            workers: 0,
        }
    }
}

/// Per-member summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub switched: bool,
    /// Switching event time (s) when switched.
    pub switch_time: Option<f64>,
    pub final_mz: f64,
    pub initial_theta: f64,
    pub theta_sq_mean: Option<f64>,
}

/// Nearest-rank switching-time percentiles (s). Unswitched runs count as
/// infinitely slow, so a percentile landing on them is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p1: Option<f64>,
    pub p5: Option<f64>,
    pub p50: Option<f64>,
    pub p95: Option<f64>,
    pub p99: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    /// P(no switch) at the end of the run.
    pub wer: f64,
    /// Wilson 95% interval on `wer`.
    pub wer_ci: (f64, f64),
    pub switch_times: Percentiles,
    /// Ensemble mean of each run's time-averaged squared polar deviation.
    pub theta_sq_mean: Option<f64>,
    pub n_switched: usize,
    pub n_total: usize,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub stats: EnsembleStats,
    pub runs: Vec<RunOutcome>,
    /// SHA-256 of the scenario description and per-run outcomes.
    pub digest: String,
    pub master_seed: u64,
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Nearest-rank percentile of `sorted` (ascending, +∞ for missing values):
/// the value of rank ⌈q·n⌉.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let v = sorted[rank - 1];
    v.is_finite().then_some(v)
}

/// Switching times sorted ascending with unswitched runs as +∞.
pub fn sorted_switch_times(runs: &[RunOutcome]) -> Vec<f64> {
    let mut v: Vec<f64> = runs.iter().map(|r| r.switch_time.unwrap_or(f64::INFINITY)).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn summarize(runs: &[RunOutcome]) -> EnsembleStats {
    let n_total = runs.len();
    let n_switched = runs.iter().filter(|r| r.switched).count();
    let sorted = sorted_switch_times(runs);
    let moments: Vec<f64> = runs.iter().filter_map(|r| r.theta_sq_mean).collect();
    let theta_sq_mean = (!moments.is_empty()).then(|| moments.iter().sum::<f64>() / moments.len() as f64);
    let failures = n_total - n_switched;
    EnsembleStats {
        wer: if n_total == 0 { 0.0 } else { failures as f64 / n_total as f64 },
        wer_ci: wilson_interval(failures, n_total, Z95),
        switch_times: Percentiles {
            p1: nearest_rank(&sorted, 0.01),
            p5: nearest_rank(&sorted, 0.05),
            p50: nearest_rank(&sorted, 0.50),
            p95: nearest_rank(&sorted, 0.95),
            p99: nearest_rank(&sorted, 0.99),
        },
        theta_sq_mean,
        n_switched,
        n_total,
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build()
        .map_err(|e| MtjError::InvalidSolver(format!("cannot start worker pool: {e}")))
}

/// Runs `cfg.n_runs` independent members. Member `i` uses noise stream
/// (master_seed, i); results are gathered in run order, so the outcome does
/// not depend on `workers`.
pub fn run_ensemble(scenario: &Scenario, cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    if cfg.n_runs == 0 {
        return Err(MtjError::InvalidSolver("n_runs must be >= 1".into()));
    }
    let solver = SolverConfig {
        seed: cfg.master_seed,
        ..scenario.solver.clone()
    };
    solver.validate()?;
    let results: Vec<Result<RunOutcome>> = pool(cfg.workers)?.install(|| {
        (0..cfg.n_runs)
            .into_par_iter()
            .map(|i| {
                let init = scenario.initial.resolve(&scenario.model, cfg.master_seed, i as u64);
                let tr = simulate_run(&scenario.model, &solver, init, i as u64)?;
                let switched = tr.switched();
                Ok(RunOutcome {
                    run: i,
                    switched,
                    switch_time: tr.switch_time(),
                    final_mz: tr.last_state().map_or(f64::NAN, |s| s.mz()),
                    initial_theta: init.theta(),
                    theta_sq_mean: tr.theta_sq_mean,
                })
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(cfg.n_runs);
    let mut failures = Vec::new();
    let mut first_error = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => runs.push(o),
            Err(e) => {
                failures.push((i, derived_seed(cfg.master_seed, i as u64)));
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if !failures.is_empty() {
        return Err(MtjError::Ensemble {
            failures,
            first_error: first_error.unwrap_or_default(),
        });
    }
    let stats = summarize(&runs);
    let digest = digest(scenario, cfg, &runs);
    Ok(EnsembleResult {
        stats,
        runs,
        digest,
        master_seed: cfg.master_seed,
    })
}

fn digest(scenario: &Scenario, cfg: &EnsembleConfig, runs: &[RunOutcome]) -> String {
    let mut h = Sha256::new();
    // worker count does not affect results and is left out
    h.update(format!("{:?}|{:?}|{:?}|{}|{}", scenario.model, scenario.solver, scenario.initial, cfg.n_runs, cfg.master_seed));
    for r in runs {
        h.update(r.switch_time.unwrap_or(f64::INFINITY).to_le_bytes());
        h.update(r.final_mz.to_le_bytes());
    }
    let mut s = String::with_capacity(64);
    for b in h.finalize() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

const SUMMARY_HEADER: &str = "n_total,n_switched,wer,wer_lo,wer_hi,p1,p5,p50,p95,p99,theta_sq_mean";

fn summary_fields(s: &EnsembleStats) -> String {
    let p = &s.switch_times;
    format!(
        "{},{},{:e},{:e},{:e},{},{},{},{},{},{}",
        s.n_total,
        s.n_switched,
        s.wer,
        s.wer_ci.0,
        s.wer_ci.1,
        opt(p.p1),
        opt(p.p5),
        opt(p.p50),
        opt(p.p95),
        opt(p.p99),
        opt(s.theta_sq_mean)
    )
}

/// One-row summary CSV (times in s; empty cells for undefined values).
pub fn write_summary_csv<W: Write>(mut w: W, stats: &EnsembleStats) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    writeln!(w, "{}", summary_fields(stats))?;
    Ok(())
}

/// Per-run CSV: `run,switched,switch_time,final_mz,initial_theta,theta_sq_mean`.
pub fn write_runs_csv<W: Write>(mut w: W, runs: &[RunOutcome]) -> Result<()> {
    writeln!(w, "run,switched,switch_time,final_mz,initial_theta,theta_sq_mean")?;
    for r in runs {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{}",
            r.run,
            r.switched as u8,
            opt(r.switch_time),
            r.final_mz,
            r.initial_theta,
            opt(r.theta_sq_mean)
        )?;
    }
    Ok(())
}

/// Reads per-run outcomes written by [`write_runs_csv`].
pub fn read_runs_csv<R: std::io::Read>(r: R) -> Result<Vec<RunOutcome>> {
    #[derive(Deserialize)]
    struct Row {
        run: usize,
        switched: u8,
        switch_time: Option<f64>,
        final_mz: f64,
        initial_theta: f64,
        theta_sq_mean: Option<f64>,
    }
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        out.push(RunOutcome {
            run: row.run,
            switched: row.switched != 0,
            switch_time: row.switch_time,
            final_mz: row.final_mz,
            initial_theta: row.initial_theta,
            theta_sq_mean: row.theta_sq_mean,
        });
    }
    Ok(out)
}

/// What a WER sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    PulseWidth,
    Amplitude,
}

/// A single write pulse whose width or amplitude is swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub start: f64,
    pub width: f64,
    /// A or V depending on the drive kind.
    pub amplitude: f64,
    #[serde(default)]
    pub edge: f64,
    #[serde(default)]
    pub kind: DriveKind,
}

impl PulseSpec {
    pub fn drive(&self) -> Result<Drive> {
        Drive::pulses(self.kind, &[(self.start, self.width, self.amplitude)], self.edge)
    }
}

#[derive(Debug, Clone)]
pub struct WerPoint {
    pub value: f64,
    pub stats: EnsembleStats,
}

#[derive(Debug, Clone)]
pub struct WerCurve {
    pub kind: SweepKind,
    pub points: Vec<WerPoint>,
    /// Grid points where the WER rose beyond the confidence slack.
    pub warnings: Vec<String>,
}

/// One ensemble per grid value; the scenario's drive is replaced by the
/// swept pulse (its external field is kept).
pub fn wer_curve(
    scenario: &Scenario,
    cfg: &EnsembleConfig,
    pulse: &PulseSpec,
    kind: SweepKind,
    grid: &[f64],
) -> Result<WerCurve> {
    if grid.is_empty() {
        return Err(MtjError::EmptyGrid);
    }
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut p = *pulse;
        match kind {
            SweepKind::PulseWidth => p.width = value,
            SweepKind::Amplitude => p.amplitude = value,
        }
        let drive = p.drive()?.with_field(scenario.model.drive.h_ext.clone());
        let sc = Scenario {
            model: scenario.model.with_drive(drive)?,
            ..scenario.clone()
        };
        let stats = run_ensemble(&sc, cfg)?.stats;
        points.push(WerPoint { value, stats });
    }
    let warnings = monotonicity_warnings(kind, &points);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(WerCurve { kind, points, warnings })
}

/// The WER should not grow with a stronger write (longer pulse, larger
/// |amplitude|); flags steps where it does beyond both intervals.
fn monotonicity_warnings(kind: SweepKind, points: &[WerPoint]) -> Vec<String> {
    let strength = |v: f64| match kind {
        SweepKind::PulseWidth => v,
        SweepKind::Amplitude => v.abs(),
    };
    let mut order: Vec<&WerPoint> = points.iter().collect();
    order.sort_by(|a, b| strength(a.value).total_cmp(&strength(b.value)));
    order
        .windows(2)
        .filter(|w| w[1].stats.wer_ci.0 > w[0].stats.wer_ci.1)
        .map(|w| {
            format!(
                "WER rises from {:.3e} at {:e} to {:.3e} at {:e} despite a stronger write",
                w[0].stats.wer, w[0].value, w[1].stats.wer, w[1].value
            )
        })
        .collect()
}

/// Sweep CSV: `value` followed by the summary columns.
pub fn write_wer_curve_csv<W: Write>(mut w: W, curve: &WerCurve) -> Result<()> {
    writeln!(w, "value,{SUMMARY_HEADER}")?;
    for p in &curve.points {
        writeln!(w, "{:e},{}", p.value, summary_fields(&p.stats))?;
    }
    Ok(())
}
