//! Electrical model of the junction and the stimulus driving it.

use crate::error::{MtjError, Result};
use crate::fields::{DriveSample, FieldVector};
use crate::state::MagState;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Piecewise-linear table with strictly increasing abscissae, clamped at
/// both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LookupTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(MtjError::InvalidParams("lookup table is empty".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(MtjError::InvalidParams("lookup table has non-finite entries".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(MtjError::InvalidParams(
                "lookup table abscissae must be strictly increasing".into(),
            ));
        }
        let (x, y) = points.into_iter().unzip();
        Ok(LookupTable { x, y })
    }

    /// Reads a two-column CSV (header row, then `abscissa,value` rows).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let mut points = Vec::new();
        for rec in rdr.deserialize() {
            let (x, y): (f64, f64) = rec?;
            points.push((x, y));
        }
        Self::new(points)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= x);
        let (x0, x1, y0, y1) = (self.x[i - 1], self.x[i], self.y[i - 1], self.y[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConductionKind {
    /// Conductance linear in cos θ between G_p and G_ap.
    #[default]
    CosineTmr,
    /// Resistance tabulated against θ (rad).
    TableLookup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductionModel {
    pub kind: ConductionKind,
    pub r_p: f64,
    pub r_ap: f64,
    /// R(θ) table, required for `TableLookup`.
    pub r_table: Option<LookupTable>,
    /// Multiplier on R against |bias voltage| (V).
    pub v_dep: Option<LookupTable>,
    /// Multiplier on R against temperature (K).
    pub t_dep: Option<LookupTable>,
}

impl ConductionModel {
    pub fn cosine(r_p: f64, r_ap: f64) -> Result<Self> {
        let m = ConductionModel {
            kind: ConductionKind::CosineTmr,
            r_p,
            r_ap,
            r_table: None,
            v_dep: None,
            t_dep: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_ap > self.r_p && self.r_p > 0.0 && self.r_ap.is_finite()) {
            return Err(MtjError::InvalidParams(format!(
                "need r_ap > r_p > 0, got r_p = {}, r_ap = {}",
                self.r_p, self.r_ap
            )));
        }
        if self.kind == ConductionKind::TableLookup {
            let table = self.r_table.as_ref().ok_or_else(|| {
                MtjError::InvalidParams("table_lookup conduction needs an R(θ) table".into())
            })?;
            if table.points().any(|(_, r)| r <= 0.0) {
                return Err(MtjError::InvalidParams("R(θ) table must be positive".into()));
            }
        }
        for (name, hook) in [("voltage", &self.v_dep), ("temperature", &self.t_dep)] {
            if let Some(h) = hook {
                if h.points().any(|(_, f)| f <= 0.0) {
                    return Err(MtjError::InvalidParams(format!(
                        "{name} multiplier table must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Angle-only resistance, before hooks.
    pub fn base_resistance(&self, state: &MagState) -> f64 {
        match self.kind {
            ConductionKind::CosineTmr => {
                let (gp, gap) = (1.0 / self.r_p, 1.0 / self.r_ap);
                let g = 0.5 * (gp + gap) + 0.5 * (gp - gap) * state.mz();
                1.0 / g
            }
            ConductionKind::TableLookup => self
                .r_table
                .as_ref()
                .map_or(self.r_p, |t| t.eval(state.theta())),
        }
    }
}

/// Instantaneous resistance (Ω) at bias `v_bias` (V) and `temperature` (K).
pub fn resistance(state: &MagState, model: &ConductionModel, v_bias: f64, temperature: f64) -> f64 {
    let mut r = model.base_resistance(state);
    if let Some(h) = &model.v_dep {
        r *= h.eval(v_bias.abs());
    }
    if let Some(h) = &model.t_dep {
        r *= h.eval(temperature);
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveKind {
    #[default]
    Current,
    Voltage,
}

/// Time-dependent stimulus: a piecewise-linear source waveform (A or V) and
/// a piecewise-constant external field (A/m).
///
/// Repeated waveform times encode jumps; at the jump instant the later value
/// applies. Outside the waveform's span the end values are held.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Drive {
    pub kind: DriveKind,
    pub waveform: Vec<(f64, f64)>,
    /// (t, H) pairs; H holds from t until the next entry. Zero before the first.
    pub h_ext: Vec<(f64, FieldVector)>,
}

impl Drive {
    pub fn zero() -> Self {
        Drive::default()
    }

    pub fn constant_current(i: f64) -> Self {
        Drive {
            kind: DriveKind::Current,
            waveform: vec![(0.0, i)],
            h_ext: Vec::new(),
        }
    }

    pub fn constant_voltage(v: f64) -> Self {
        Drive {
            kind: DriveKind::Voltage,
            waveform: vec![(0.0, v)],
            h_ext: Vec::new(),
        }
    }

    /// Trapezoidal pulses `(start, width, amplitude)` with linear edges of
    /// duration `edge` (0 for ideal steps); zero between pulses.
    pub fn pulses(kind: DriveKind, pulses: &[(f64, f64, f64)], edge: f64) -> Result<Self> {
        let mut w = vec![(0.0, 0.0)];
        for &(start, width, amp) in pulses {
            if !(width > 2.0 * edge && start >= w.last().map_or(0.0, |p| p.0)) {
                return Err(MtjError::InvalidDrive(format!(
                    "pulse at {start:e} s (width {width:e} s) overlaps or is shorter than its edges"
                )));
            }
            w.push((start, 0.0));
            w.push((start + edge, amp));
            w.push((start + width - edge, amp));
            w.push((start + width, 0.0));
        }
        let d = Drive {
            kind,
            waveform: w,
            h_ext: Vec::new(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_field(mut self, h_ext: Vec<(f64, FieldVector)>) -> Self {
        self.h_ext = h_ext;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.waveform.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(MtjError::InvalidDrive("waveform has non-finite entries".into()));
        }
        if self.waveform.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(MtjError::InvalidDrive("waveform times must be nondecreasing".into()));
        }
        if self.h_ext.iter().any(|(t, h)| !t.is_finite() || !h.is_finite()) {
            return Err(MtjError::InvalidDrive("h_ext has non-finite entries".into()));
        }
        if self.h_ext.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(MtjError::InvalidDrive("h_ext times must be nondecreasing".into()));
        }
        Ok(())
    }

    /// Source value (A or V) at `t`.
    pub fn source(&self, t: f64) -> f64 {
        let w = &self.waveform;
        if w.is_empty() {
            return 0.0;
        }
        // first index with time > t
        let i = w.partition_point(|p| p.0 <= t);
        if i == 0 {
            return w[0].1;
        }
        if i == w.len() {
            return w[i - 1].1;
        }
        let (t0, v0) = w[i - 1];
        let (t1, v1) = w[i];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn field(&self, t: f64) -> FieldVector {
        let i = self.h_ext.partition_point(|p| p.0 <= t);
        if i == 0 {
            Vec3::ZERO
        } else {
            self.h_ext[i - 1].1
        }
    }

    /// Instants where the drive is not smooth, sorted and deduplicated.
    /// Integrators must not step across these.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .waveform
            .iter()
            .map(|p| p.0)
            .chain(self.h_ext.iter().map(|p| p.0))
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Resolves current, resistance and field at `t` for the state `state`.
    pub fn sample(&self, t: f64, state: &MagState, model: &ConductionModel, temperature: f64) -> DriveSample {
        let (current, resistance) = instantaneous_current(self.kind, self.source(t), state, model, temperature);
        DriveSample {
            current,
            resistance,
            h_ext: self.field(t),
        }
    }
}

/// Current (A) through the junction and the resistance (Ω) used.
///
/// A current source fixes I; the bias seen by the voltage hook is then
/// I·R(θ) before the hook. A voltage source gives I = V/R(θ, V).
pub fn instantaneous_current(
    kind: DriveKind,
    source: f64,
    state: &MagState,
    model: &ConductionModel,
    temperature: f64,
) -> (f64, f64) {
    match kind {
        DriveKind::Current => {
            let v = source * model.base_resistance(state);
            (source, resistance(state, model, v, temperature))
        }
        DriveKind::Voltage => {
            let r = resistance(state, model, source, temperature);
            (source / r, r)
        }
    }
}
