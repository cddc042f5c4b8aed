//! Fitting the deterministic thermal surrogates to ensemble statistics.
//!
//! For each corner, a scalar coefficient (c_f for the fictitious field, c_w
//! for the window) is bisected until the deterministic switching time equals
//! a percentile of the stochastic switching-time distribution.

use crate::error::{MtjError, Result};
use crate::fields::ThermalMode;
use crate::model::Model;
use crate::montecarlo::{nearest_rank, sorted_switch_times, RunOutcome};
use crate::solvers::{simulate, Side, SolverConfig};
use crate::state::MagState;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const MAX_BISECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Window,
    Fictitious,
}

/// A named switching-time percentile to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerTarget {
    pub name: String,
    /// In (0, 1).
    pub percentile: f64,
}

impl CornerTarget {
    pub fn new(name: impl Into<String>, percentile: f64) -> Result<Self> {
        if !(percentile > 0.0 && percentile < 1.0) {
            return Err(MtjError::InvalidParams(format!(
                "corner percentile must lie in (0, 1), got {percentile}"
            )));
        }
        Ok(CornerTarget {
            name: name.into(),
            percentile,
        })
    }

    pub fn mean() -> Self {
        CornerTarget {
            name: "mean".into(),
            percentile: 0.5,
        }
    }

    pub fn best() -> Self {
        CornerTarget {
            name: "best".into(),
            percentile: 0.01,
        }
    }

    pub fn worst() -> Self {
        CornerTarget {
            name: "worst".into(),
            percentile: 0.99,
        }
    }

    /// Corner whose switching time is exceeded by a fraction `wer` of runs.
    /// The label is made identifier-safe (`1e-3` becomes `1e_3`).
    pub fn wer(label: &str, wer: f64) -> Result<Self> {
        let safe: String = label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        Self::new(format!("wer_{safe}"), 1.0 - wer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationOptions {
    /// Coefficient bracket searched by bisection.
    pub bracket: (f64, f64),
    /// Relative switching-time mismatch at which bisection stops early.
    pub rel_tol: f64,
    /// Largest acceptable final mismatch.
    pub accept_tol: f64,
}

impl CalibrationOptions {
    pub fn defaults_for(kind: SurrogateKind) -> Self {
        CalibrationOptions {
            bracket: match kind {
                SurrogateKind::Fictitious => (0.0, 0.5),
                SurrogateKind::Window => (0.05, 4.0),
            },
            rel_tol: 1e-4,
            accept_tol: 1e-2,
        }
    }
}

/// Where the target statistics came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub ensemble_digest: String,
    pub master_seed: u64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerFit {
    pub coefficient: f64,
    pub percentile: f64,
    /// Ensemble switching time at the percentile (s).
    pub target_time: f64,
    /// Deterministic switching time at `coefficient` (s).
    pub achieved_time: f64,
    /// (achieved − target)/target.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationResult {
    pub kind: SurrogateKind,
    pub provenance: Provenance,
    pub corners: BTreeMap<String, CornerFit>,
}

impl CalibrationResult {
    pub fn coefficients(&self) -> BTreeMap<String, f64> {
        self.corners.iter().map(|(k, v)| (k.clone(), v.coefficient)).collect()
    }

    pub fn residuals(&self) -> BTreeMap<String, f64> {
        self.corners.iter().map(|(k, v)| (k.clone(), v.residual)).collect()
    }

    pub fn corner(&self, name: &str) -> Result<&CornerFit> {
        self.corners.get(name).ok_or_else(|| MtjError::MissingCorner(name.into()))
    }
}

/// The deterministic counterpart of a stochastic scenario for one surrogate.
#[derive(Debug, Clone)]
pub struct DeterministicCorner {
    pub base: Model,
    pub solver: SolverConfig,
    pub kind: SurrogateKind,
    /// Pole the write starts from.
    pub pole: Side,
}

impl DeterministicCorner {
    /// Model and initial state for coefficient `c`. Fictitious runs start
    /// exactly on the pole and are pushed off it by the fictitious field;
    /// window runs start on the window edge c·θ₀, where relaxation parks them.
    pub fn instance(&self, c: f64) -> Result<(Model, MagState)> {
        let theta0 = self.base.derived.theta0;
        let (model, tilt) = match self.kind {
            SurrogateKind::Fictitious => (self.base.with_mode(ThermalMode::fictitious(c), None)?, 0.0),
            SurrogateKind::Window => (self.base.with_mode(ThermalMode::off(), Some(c))?, c * theta0),
        };
        let init = match self.pole {
            Side::Up => MagState::new(tilt, 0.0),
            Side::Down => MagState::new(PI - tilt, 0.0),
        };
        Ok((model, init))
    }

    /// Deterministic switching time at coefficient `c`; +∞ if it never switches.
    pub fn switching_time(&self, c: f64) -> Result<f64> {
        let (model, init) = self.instance(c)?;
        let solver = SolverConfig {
            average_from: None,
            ..self.solver.clone()
        };
        let tr = simulate(&model, &solver, init)?;
        Ok(tr.switch_time().unwrap_or(f64::INFINITY))
    }
}

/// Bisects each corner's coefficient against the ensemble outcomes `runs`.
pub fn calibrate(
    corner: &DeterministicCorner,
    targets: &[CornerTarget],
    runs: &[RunOutcome],
    provenance: Provenance,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if targets.is_empty() {
        return Err(MtjError::InvalidParams("no calibration targets".into()));
    }
    let sorted = sorted_switch_times(runs);
    let switched = sorted.iter().filter(|t| t.is_finite()).count();
    let goals: Vec<(String, f64, f64)> = targets
        .iter()
        .map(|t| {
            CornerTarget::new(t.name.clone(), t.percentile)?;
            let time = nearest_rank(&sorted, t.percentile).ok_or(MtjError::UndefinedPercentile {
                percentile: t.percentile,
                switched,
                total: runs.len(),
            })?;
            Ok((t.name.clone(), t.percentile, time))
        })
        .collect::<Result<_>>()?;
    let fits: Vec<Result<(String, CornerFit)>> = goals
        .par_iter()
        .map(|(name, percentile, target)| {
            let fit = bisect(corner, name, *target, opts)?;
            Ok((name.clone(), CornerFit { percentile: *percentile, ..fit }))
        })
        .collect();
    let mut corners = BTreeMap::new();
    for f in fits {
        let (name, fit) = f?;
        corners.insert(name, fit);
    }
    Ok(CalibrationResult {
        kind: corner.kind,
        provenance,
        corners,
    })
}

fn bisect(corner: &DeterministicCorner, name: &str, target: f64, opts: &CalibrationOptions) -> Result<CornerFit> {
    let (mut lo, mut hi) = opts.bracket;
    let t_lo = corner.switching_time(lo)?;
    let t_hi = corner.switching_time(hi)?;
    let (mut g_lo, g_hi) = (t_lo - target, t_hi - target);
    let unreachable = || MtjError::CornerUnreachable {
        corner: name.into(),
        lo: opts.bracket.0,
        hi: opts.bracket.1,
        t_lo,
        t_hi,
        target,
    };
    if g_lo == 0.0 || g_hi == 0.0 {
        let (c, t) = if g_lo == 0.0 { (lo, t_lo) } else { (hi, t_hi) };
        return Ok(fit(c, target, t, 0));
    }
    if (g_lo < 0.0) == (g_hi < 0.0) {
        return Err(unreachable());
    }
    let mut best = if g_lo.abs() < g_hi.abs() { (lo, t_lo) } else { (hi, t_hi) };
    for it in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let t_mid = corner.switching_time(mid)?;
        let g = t_mid - target;
        if (g.abs()) < (best.1 - target).abs() {
            best = (mid, t_mid);
        }
        if (g / target).abs() <= opts.rel_tol {
            return Ok(fit(mid, target, t_mid, it));
        }
        if (g < 0.0) == (g_lo < 0.0) {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    let f = fit(best.0, target, best.1, MAX_BISECTIONS);
    if f.residual.abs() <= opts.accept_tol {
        Ok(f)
    } else {
        Err(MtjError::NoConvergence(name.into()))
    }
}

fn fit(c: f64, target: f64, achieved: f64, iterations: usize) -> CornerFit {
    CornerFit {
        coefficient: c,
        percentile: f64::NAN,
        target_time: target,
        achieved_time: achieved,
        residual: (achieved - target) / target,
        iterations,
    }
}

/// Corner parameter file: one independent section per surrogate kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerLibrary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fictitious: Option<CornerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<CornerSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerSection {
    pub provenance: Provenance,
    pub corners: BTreeMap<String, CornerFit>,
}

impl CornerLibrary {
    /// Stores `result` in its own section, leaving the other one untouched.
    pub fn insert(&mut self, result: &CalibrationResult) {
        let section = CornerSection {
            provenance: result.provenance.clone(),
            corners: result.corners.clone(),
        };
        match result.kind {
            SurrogateKind::Fictitious => self.fictitious = Some(section),
            SurrogateKind::Window => self.window = Some(section),
        }
    }

    pub fn section(&self, kind: SurrogateKind) -> Option<&CornerSection> {
        match kind {
            SurrogateKind::Fictitious => self.fictitious.as_ref(),
            SurrogateKind::Window => self.window.as_ref(),
        }
    }

    pub fn result(&self, kind: SurrogateKind) -> Option<CalibrationResult> {
        self.section(kind).map(|s| CalibrationResult {
            kind,
            provenance: s.provenance.clone(),
            corners: s.corners.clone(),
        })
    }

    /// Coefficient of corner `name` for `kind`.
    pub fn coefficient(&self, kind: SurrogateKind, name: &str) -> Result<f64> {
        self.section(kind)
            .and_then(|s| s.corners.get(name))
            .map(|c| c.coefficient)
            .ok_or_else(|| MtjError::MissingCorner(name.into()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MtjError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| MtjError::Config(e.to_string()))
    }
}

/// Exports a single result as a corner file.
pub fn corner_library_export(result: &CalibrationResult) -> Result<String> {
    let mut lib = CornerLibrary::default();
    lib.insert(result);
    lib.to_toml()
}
