use crate::error::{MtjError, Result};
use crate::state::{state_from_cartesian, MagState};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// |m_z| hysteresis level of the switching detector.
pub const SWITCH_BAND: f64 = 0.5;

/// Settled hemisphere: `Up` is m_z ≥ 0.5, `Down` is m_z ≤ −0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Up,
    Down,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Up => Side::Down,
            Side::Down => Side::Up,
        }
    }

    pub fn of_mz(mz: f64) -> Option<Side> {
        if mz >= SWITCH_BAND {
            Some(Side::Up)
        } else if mz <= -SWITCH_BAND {
            Some(Side::Down)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Last m_z = 0 crossing before the new band was reached (s).
    pub t: f64,
    pub from: Side,
    pub to: Side,
    /// Last exit from the old band (s).
    pub t_leave: f64,
    /// Entry into the new band (s).
    pub t_arrive: f64,
}

impl SwitchEvent {
    /// Time spent crossing between the two bands.
    pub fn transition_time(&self) -> f64 {
        self.t_arrive - self.t_leave
    }
}

/// Schmitt-trigger event detector on m_z samples, linearly interpolated
/// between fed points.
#[derive(Debug, Clone, Default)]
pub struct SwitchDetector {
    side: Option<Side>,
    prev: Option<(f64, f64)>,
    last_zero: Option<f64>,
    t_leave: Option<f64>,
    events: Vec<SwitchEvent>,
}

fn cross(t0: f64, z0: f64, t1: f64, z1: f64, level: f64) -> f64 {
    if z1 == z0 {
        t1
    } else {
        t0 + (level - z0) * (t1 - t0) / (z1 - z0)
    }
}

impl SwitchDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn side(&self) -> Option<Side> {
        self.side
    }

    pub fn events(&self) -> &[SwitchEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<SwitchEvent> {
        self.events
    }

    pub fn feed(&mut self, t: f64, mz: f64) {
        let Some((t0, z0)) = self.prev else {
            self.prev = Some((t, mz));
            self.side = Side::of_mz(mz);
            return;
        };
        self.prev = Some((t, mz));
        if (z0 < 0.0) != (mz < 0.0) {
            self.last_zero = Some(cross(t0, z0, t, mz, 0.0));
        }
        match self.side {
            None => {
                self.side = Side::of_mz(mz);
            }
            Some(side) => {
                let sign = if side == Side::Up { 1.0 } else { -1.0 };
                let (a0, a1) = (sign * z0, sign * mz);
                if a0 >= SWITCH_BAND && a1 < SWITCH_BAND {
                    self.t_leave = Some(cross(t0, z0, t, mz, sign * SWITCH_BAND));
                } else if a1 >= SWITCH_BAND {
                    // back inside the own band: discard the excursion
                    self.t_leave = None;
                    self.last_zero = None;
                }
                if a1 <= -SWITCH_BAND {
                    let t_arrive = cross(t0, z0, t, mz, -sign * SWITCH_BAND);
                    let t_leave = self.t_leave.unwrap_or_else(|| cross(t0, z0, t, mz, sign * SWITCH_BAND));
                    self.events.push(SwitchEvent {
                        t: self.last_zero.unwrap_or(t_arrive),
                        from: side,
                        to: side.opposite(),
                        t_leave,
                        t_arrive,
                    });
                    self.side = Some(side.opposite());
                    self.t_leave = None;
                    self.last_zero = None;
                }
            }
        }
    }
}

/// Counters and the accepted-step log of one integration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub rhs_evals: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// (t at step start, accepted step size), adaptive schemes only.
    pub step_log: Vec<(f64, f64)>,
}

/// Recorded samples of one run plus its switching events.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MagState>,
    pub resistance: Vec<f64>,
    pub current: Vec<f64>,
    pub events: Vec<SwitchEvent>,
    /// Hemisphere at the end of the run per the detector.
    pub final_side: Option<Side>,
    /// Hemisphere at the start of the run.
    pub initial_side: Option<Side>,
    /// Time average of the squared polar deviation over the averaging window.
    pub theta_sq_mean: Option<f64>,
    pub stats: SolverStats,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    mx: f64,
    my: f64,
    mz: f64,
    #[serde(default)]
    theta: Option<f64>,
    #[serde(default)]
    phi: Option<f64>,
    #[serde(rename = "R", default)]
    r: Option<f64>,
    #[serde(rename = "I", default)]
    i: Option<f64>,
    #[serde(rename = "V", default)]
    v: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, state: MagState, resistance: f64, current: f64) {
        self.times.push(t);
        self.states.push(state);
        self.resistance.push(resistance);
        self.current.push(current);
    }

    pub fn mz(&self) -> Vec<f64> {
        self.states.iter().map(MagState::mz).collect()
    }

    pub fn last_state(&self) -> Option<MagState> {
        self.states.last().copied()
    }

    /// Whether the run ended settled on the side opposite to where it began.
    pub fn switched(&self) -> bool {
        matches!((self.initial_side, self.final_side), (Some(a), Some(b)) if a != b)
    }

    /// Time of the first switching event, if any.
    pub fn first_switch(&self) -> Option<f64> {
        self.events.first().map(|e| e.t)
    }

    /// Time of the last event ending on the final side, `None` if the run
    /// did not switch.
    pub fn switch_time(&self) -> Option<f64> {
        if !self.switched() {
            return None;
        }
        self.events.iter().rev().find(|e| Some(e.to) == self.final_side).map(|e| e.t)
    }

    /// m_z linearly interpolated at `t`; `None` outside the recorded span.
    pub fn mz_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 || self.times[i] == t {
            return Some(self.states[i].mz());
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (z0, z1) = (self.states[i - 1].mz(), self.states[i].mz());
        Some(z0 + (z1 - z0) * (t - t0) / (t1 - t0))
    }

    /// Writes `t,mx,my,mz,theta,phi,R,I,V`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for k in 0..self.len() {
            let s = self.states[k];
            let m = s.cartesian();
            let (r, i) = (self.resistance[k], self.current[k]);
            wtr.serialize(CsvRow {
                t: self.times[k],
                mx: m.x,
                my: m.y,
                mz: m.z,
                theta: Some(s.theta()),
                phi: Some(s.phi()),
                r: Some(r),
                i: Some(i),
                v: Some(i * r),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a trace in the export schema. Only `t,mx,my,mz` are required;
    /// the state is rebuilt from the Cartesian columns.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut tr = Trajectory::default();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            if tr.times.last().is_some_and(|&t| row.t <= t) {
                return Err(MtjError::InvalidParams(format!(
                    "trace times must be strictly increasing (t = {})",
                    row.t
                )));
            }
            let s = state_from_cartesian(Vec3::new(row.mx, row.my, row.mz))?;
            tr.push(row.t, s, row.r.unwrap_or(f64::NAN), row.i.unwrap_or(f64::NAN));
        }
        let mut det = SwitchDetector::new();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            det.feed(*t, s.mz());
        }
        tr.initial_side = tr.states.first().and_then(|s| Side::of_mz(s.mz()));
        tr.final_side = det.side();
        tr.events = det.into_events();
        Ok(tr)
    }
}

/// Root-mean-square m_z difference, with `candidate` linearly interpolated
/// onto every reference time inside its span.
pub fn rmse_mz(candidate: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (t, s) in reference.times.iter().zip(&reference.states) {
        if let Some(z) = candidate.mz_at(*t) {
            let d = z - s.mz();
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MtjError::EmptyGrid);
    }
    Ok((sum / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(det: &mut SwitchDetector, pts: &[(f64, f64)]) {
        for &(t, z) in pts {
            det.feed(t, z);
        }
    }

    #[test]
    fn clean_switch() {
        let mut d = SwitchDetector::new();
        run(&mut d, &[(0.0, 1.0), (1.0, 0.6), (2.0, 0.4), (3.0, 0.2), (4.0, -0.2), (5.0, -0.6), (6.0, -1.0)]);
        assert_eq!(d.events().len(), 1);
        let e = d.events()[0];
        assert_eq!((e.from, e.to), (Side::Up, Side::Down));
        assert!((e.t - 3.5).abs() < 1e-12);
        assert!((e.t_leave - 1.5).abs() < 1e-12);
        assert!((e.t_arrive - 4.75).abs() < 1e-12);
        assert!((e.transition_time() - 3.25).abs() < 1e-12);
        assert_eq!(d.side(), Some(Side::Down));
    }

    #[test]
    fn jitter_around_zero_is_debounced() {
        let mut d = SwitchDetector::new();
        run(
            &mut d,
            &[(0.0, 0.9), (1.0, 0.1), (2.0, -0.1), (3.0, 0.1), (4.0, -0.1), (5.0, 0.3), (6.0, -0.3), (7.0, -0.9)],
        );
        assert_eq!(d.events().len(), 1);
        // last zero crossing, not the first
        assert!((d.events()[0].t - 5.5).abs() < 1e-12);
    }

    #[test]
    fn failed_excursion_leaves_no_event() {
        let mut d = SwitchDetector::new();
        run(&mut d, &[(0.0, 0.9), (1.0, -0.3), (2.0, 0.9), (3.0, 0.95)]);
        assert!(d.events().is_empty());
        assert_eq!(d.side(), Some(Side::Up));
    }

    #[test]
    fn two_switches() {
        let mut d = SwitchDetector::new();
        run(&mut d, &[(0.0, 1.0), (1.0, -1.0), (2.0, -1.0), (3.0, 1.0)]);
        let e = d.events();
        assert_eq!(e.len(), 2);
        assert_eq!(e[1].to, Side::Up);
        assert!((e[1].t - 2.5).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let mut tr = Trajectory::default();
        for k in 0..20 {
            let th = 0.15 * k as f64;
            tr.push(k as f64 * 1e-12, MagState::new(th, 0.3 * k as f64), 2e3 + k as f64, -35e-6);
        }
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,mx,my,mz,theta,phi,R,I,V\n"));
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 20);
        for k in 0..20 {
            assert_eq!(back.times[k], tr.times[k]);
            assert!((back.states[k].mz() - tr.states[k].mz()).abs() < 1e-12);
        }
        assert_eq!(back.events.len(), 1);
        assert!(back.switched());
    }

    #[test]
    fn minimal_trace_import() {
        let csv = "t,mx,my,mz\n0,0,0,1\n1e-9,1,0,0\n";
        let tr = Trajectory::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(tr.len(), 2);
        assert!(tr.resistance[0].is_nan());
        assert!(Trajectory::read_csv("t,mx,my,mz\n1,0,0,1\n0,0,0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn rmse_against_itself_and_offset() {
        let mut a = Trajectory::default();
        let mut b = Trajectory::default();
        for k in 0..=10 {
            let t = k as f64;
            a.push(t, MagState::new(0.1 * t, 0.0), 1.0, 0.0);
        }
        for k in 0..=20 {
            let t = 0.5 * k as f64;
            b.push(t, MagState::new(0.1 * t, 0.0), 1.0, 0.0);
        }
        assert!(rmse_mz(&a, &a).unwrap() == 0.0);
        // linear interpolation of cos between 0.1-rad nodes is accurate to ~1e-3
        assert!(rmse_mz(&a, &b).unwrap() < 2e-3);
        let empty = Trajectory::default();
        assert!(matches!(rmse_mz(&empty, &a), Err(MtjError::EmptyGrid)));
    }
}
