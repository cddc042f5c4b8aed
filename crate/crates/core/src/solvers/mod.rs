//! Time integration.
//!
//! Four schemes share one driver, [`simulate`]:
//!
//! * `NaiveEuler`: fixed-step explicit Euler on (θ, φ), kept to show its
//!   error growth;
//! * `StochasticHeun`: fixed-step Heun on the Cartesian vector with one
//!   thermal sample held over predictor and corrector (Stratonovich);
//! * `AdaptiveRk`: Dormand–Prince 5(4) on (θ, φ) with dense output;
//! * `FixedRk4`: classical RK4, used at femtosecond steps as the reference.
//!
//! φ is wrapped into `[0, 2π)` after every step.

mod adaptive;
mod fixed;
mod trajectory;

pub use trajectory::{rmse_mz, Side, SolverStats, SwitchDetector, SwitchEvent, Trajectory, SWITCH_BAND};

use crate::error::{MtjError, Result};
use crate::fields::ThermalKind;
use crate::model::Model;
use crate::state::MagState;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    NaiveEuler,
    StochasticHeun,
    #[default]
    AdaptiveRk,
    FixedRk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Step of the fixed-step schemes (s).
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Record every n-th step (fixed-step schemes, or adaptive with no
    /// `record_interval`).
    pub record_stride: usize,
    /// Adaptive scheme only: record on this uniform grid from dense output
    /// (s); 0 records accepted steps.
    pub record_interval: f64,
    /// Start of the window over which the squared polar deviation is
    /// time-averaged (s); `None` disables the average.
    pub average_from: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::AdaptiveRk,
            dt: 1e-12,
            dt_min: 1e-18,
            dt_max: 1e-9,
            rel_tol: 1e-3,
            abs_tol: 1e-6,
            t_end: 30e-9,
            seed: 0,
            record_stride: 1,
            record_interval: 0.0,
            average_from: None,
        }
    }
}

impl SolverConfig {
    pub fn adaptive(t_end: f64) -> Self {
        SolverConfig {
            t_end,
            ..Self::default()
        }
    }

    pub fn fixed(scheme: Scheme, dt: f64, t_end: f64) -> Self {
        SolverConfig {
            scheme,
            dt,
            t_end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MtjError::InvalidSolver(m));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        match self.scheme {
            Scheme::AdaptiveRk => {
                if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
                    return bad(format!(
                        "need 0 < dt_min <= dt_max, got {} and {}",
                        self.dt_min, self.dt_max
                    ));
                }
                if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
                    return bad("tolerances must be positive".into());
                }
                if !(self.record_interval >= 0.0 && self.record_interval.is_finite()) {
                    return bad("record_interval must be >= 0".into());
                }
            }
            _ => {
                if !(self.dt > 0.0 && self.dt.is_finite()) {
                    return Err(MtjError::InvalidStep(self.dt));
                }
            }
        }
        if self.record_stride == 0 {
            return bad("record_stride must be >= 1".into());
        }
        Ok(())
    }
}

/// Integrates `model` from `init` over `[0, cfg.t_end]`, using noise stream
/// (`cfg.seed`, run 0).
pub fn simulate(model: &Model, cfg: &SolverConfig, init: MagState) -> Result<Trajectory> {
    simulate_run(model, cfg, init, 0)
}

/// As [`simulate`] with an explicit ensemble run index selecting the noise stream.
pub fn simulate_run(model: &Model, cfg: &SolverConfig, init: MagState, run_index: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let stochastic = model.thermal.mode == ThermalKind::Stochastic;
    match cfg.scheme {
        Scheme::StochasticHeun if !stochastic => {
            return Err(MtjError::InvalidSolver(
                "stochastic_heun requires the stochastic thermal mode".into(),
            ))
        }
        Scheme::StochasticHeun if model.window.enabled => {
            return Err(MtjError::InvalidSolver(
                "the window is a deterministic surrogate; disable it for stochastic runs".into(),
            ))
        }
        Scheme::NaiveEuler | Scheme::AdaptiveRk | Scheme::FixedRk4 if stochastic => {
            return Err(MtjError::InvalidSolver(format!(
                "{:?} is deterministic; the stochastic thermal mode needs stochastic_heun",
                cfg.scheme
            )))
        }
        _ => {}
    }
    let mut rec = Recorder::new(model, cfg, init);
    match cfg.scheme {
        Scheme::NaiveEuler => fixed::naive_euler(model, cfg, init, &mut rec)?,
        Scheme::StochasticHeun => fixed::stochastic_heun(model, cfg, init, run_index, &mut rec)?,
        Scheme::FixedRk4 => fixed::rk4(model, cfg, init, &mut rec)?,
        Scheme::AdaptiveRk => adaptive::dopri5(model, cfg, init, &mut rec)?,
    }
    Ok(rec.finish())
}

/// Single explicit Euler step in spherical coordinates.
pub fn step_naive_euler(state: &MagState, rates: (f64, f64), dt: f64) -> MagState {
    MagState::new(state.theta() + rates.0 * dt, state.phi() + rates.1 * dt)
}

/// (dθ/dt, dφ/dt) at raw, possibly out-of-range coordinates: a θ beyond
/// a pole is the reflected state with the θ-rate reversed.
pub(crate) fn rhs_raw(model: &Model, t: f64, theta: f64, phi: f64) -> Result<(f64, f64)> {
    let s = MagState::new(theta, phi);
    let (dth, dph) = model.rhs_spherical(t, &s, None)?;
    if theta.rem_euclid(TAU) > std::f64::consts::PI {
        Ok((-dth, dph))
    } else {
        Ok((dth, dph))
    }
}

pub(crate) fn non_finite(t: f64, theta: f64, phi: f64, dt: f64) -> MtjError {
    let m = MagState::new(
        if theta.is_finite() { theta } else { 0.0 },
        if phi.is_finite() { phi } else { 0.0 },
    )
    .cartesian();
    MtjError::NonFinite {
        t,
        mx: if theta.is_finite() && phi.is_finite() { m.x } else { f64::NAN },
        my: if theta.is_finite() && phi.is_finite() { m.y } else { f64::NAN },
        mz: if theta.is_finite() { theta.cos() } else { f64::NAN },
        dt,
    }
}

/// Collects samples, events and the θ² time average during integration.
pub(crate) struct Recorder<'a> {
    model: &'a Model,
    traj: Trajectory,
    detector: SwitchDetector,
    average_from: Option<f64>,
    sq_sum: f64,
    sq_time: f64,
}

impl<'a> Recorder<'a> {
    fn new(model: &'a Model, cfg: &SolverConfig, init: MagState) -> Self {
        let mut r = Recorder {
            model,
            traj: Trajectory::default(),
            detector: SwitchDetector::new(),
            average_from: cfg.average_from,
            sq_sum: 0.0,
            sq_time: 0.0,
        };
        r.traj.initial_side = Side::of_mz(init.mz());
        r.detector.feed(0.0, init.mz());
        r.record(0.0, init);
        r
    }

    pub(crate) fn record(&mut self, t: f64, state: MagState) {
        let d = self.model.sample(t, &state);
        self.traj.push(t, state, d.resistance, d.current);
    }

    /// Feeds the detector; `polar_dev` is the state's angle to the nearest
    /// pole at the end of a step covering `[t - dt, t]`.
    pub(crate) fn observe(&mut self, t: f64, dt: f64, mz: f64, polar_dev: f64) {
        self.detector.feed(t, mz);
        if let Some(t0) = self.average_from {
            if t - dt >= t0 {
                self.sq_sum += polar_dev * polar_dev * dt;
                self.sq_time += dt;
            }
        }
    }

    /// Feeds an intermediate detector sample (level crossings inside a step).
    pub(crate) fn observe_point(&mut self, t: f64, mz: f64) {
        self.detector.feed(t, mz);
    }

    pub(crate) fn averaging(&self) -> bool {
        self.average_from.is_some()
    }

    pub(crate) fn stats(&mut self) -> &mut SolverStats {
        &mut self.traj.stats
    }

    fn finish(mut self) -> Trajectory {
        self.traj.final_side = self.detector.side();
        self.traj.events = self.detector.into_events();
        if self.sq_time > 0.0 {
            self.traj.theta_sq_mean = Some(self.sq_sum / self.sq_time);
        }
        self.traj
    }
}
