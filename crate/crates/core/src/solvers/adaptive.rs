//! Dormand–Prince 5(4) with Hairer's continuous extension.

use super::{non_finite, rhs_raw, Recorder, SolverConfig};
use crate::error::{MtjError, Result};
use crate::model::Model;
use crate::state::MagState;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// θ of the detector levels m_z = 0.5, 0, −0.5.
const LEVELS: [f64; 3] = [FRAC_PI_3, FRAC_PI_2, 2.0 * FRAC_PI_3];

type Pair = (f64, f64);

fn axpy(y: Pair, h: f64, terms: &[(f64, Pair)]) -> Pair {
    let (mut a, mut b) = y;
    for &(c, k) in terms {
        a += h * c * k.0;
        b += h * c * k.1;
    }
    (a, b)
}

/// Quartic interpolant over one accepted step.
struct Dense {
    t0: f64,
    h: f64,
    r: [Pair; 5],
}

impl Dense {
    fn eval(&self, t: f64) -> Pair {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let f = |i: usize| {
            let r = |j: usize| if i == 0 { self.r[j].0 } else { self.r[j].1 };
            r(0) + s * (r(1) + s1 * (r(2) + s * (r(3) + s1 * r(4))))
        };
        (f(0), f(1))
    }
}

/// Scaled RMS norm on (θ, φ·sin θ).
fn scaled_norm(dth: f64, dph: f64, sin_t: f64, sc_th: f64, sc_ph: f64) -> f64 {
    let a = dth / sc_th;
    let b = dph * sin_t / sc_ph;
    ((a * a + b * b) / 2.0).sqrt()
}

fn initial_step(model: &Model, cfg: &SolverConfig, y0: Pair, f0: Pair, rec: &mut Recorder) -> Result<f64> {
    let sin0 = y0.0.sin().abs();
    let sc_th = cfg.abs_tol + cfg.rel_tol * y0.0.abs();
    let sc_ph = cfg.abs_tol + cfg.rel_tol;
    let d0 = scaled_norm(y0.0, 1.0, sin0.max(1e-3), sc_th, sc_ph);
    let d1 = scaled_norm(f0.0, f0.1, sin0, sc_th, sc_ph);
    if !(d1 > 0.0) {
        return Ok(cfg.dt_max);
    }
    let h0 = (0.01 * d0 / d1).clamp(cfg.dt_min, cfg.dt_max);
    let y1 = (y0.0 + h0 * f0.0, y0.1 + h0 * f0.1);
    let f1 = rhs_raw(model, h0, y1.0, y1.1)?;
    rec.stats().rhs_evals += 1;
    let d2 = scaled_norm(f1.0 - f0.0, f1.1 - f0.1, sin0, sc_th, sc_ph) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6 * h0)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).clamp(cfg.dt_min, cfg.dt_max))
}

/// Bisection on the dense θ for a crossing of `level` inside `[ta, tb]`.
fn locate(dense: &Dense, level: f64, mut ta: f64, mut tb: f64) -> f64 {
    let mut ga = dense.eval(ta).0 - level;
    for _ in 0..60 {
        let tm = 0.5 * (ta + tb);
        let gm = dense.eval(tm).0 - level;
        if (gm < 0.0) == (ga < 0.0) {
            ta = tm;
            ga = gm;
        } else {
            tb = tm;
        }
    }
    0.5 * (ta + tb)
}

pub(super) fn dopri5(model: &Model, cfg: &SolverConfig, init: MagState, rec: &mut Recorder) -> Result<()> {
    let t_end = cfg.t_end;
    let mut stops: Vec<f64> = model
        .drive
        .breakpoints()
        .into_iter()
        .filter(|&b| b > 0.0 && b < t_end)
        .collect();
    stops.push(t_end);
    let mut next_stop = 0usize;

    let mut t = 0.0;
    let mut y: Pair = (init.theta(), init.phi());
    let mut k1 = rhs_raw(model, t, y.0, y.1)?;
    rec.stats().rhs_evals += 1;
    let mut h = initial_step(model, cfg, y, k1, rec)?;
    let mut last_rejected = false;
    let mut next_record = 1u64;
    let mut steps_since_record = 0usize;

    while t < t_end {
        while stops[next_stop] <= t {
            next_stop += 1;
        }
        let t_stop = stops[next_stop];
        let h_try = h.min(cfg.dt_max);
        let mut hh = h_try;
        let lands = t + hh >= t_stop - 1e-6 * hh;
        if lands {
            hh = t_stop - t;
        }

        let y2 = axpy(y, hh, &[(A21, k1)]);
        let k2 = rhs_raw(model, t + C2 * hh, y2.0, y2.1)?;
        let y3 = axpy(y, hh, &[(A31, k1), (A32, k2)]);
        let k3 = rhs_raw(model, t + C3 * hh, y3.0, y3.1)?;
        let y4 = axpy(y, hh, &[(A41, k1), (A42, k2), (A43, k3)]);
        let k4 = rhs_raw(model, t + C4 * hh, y4.0, y4.1)?;
        let y5 = axpy(y, hh, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        let k5 = rhs_raw(model, t + C5 * hh, y5.0, y5.1)?;
        let y6 = axpy(y, hh, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        let t_new = if lands { t_stop } else { t + hh };
        // the end stages see the left limit of a drive discontinuity
        let t_end_stage = if lands { t_stop.next_down() } else { t_new };
        let k6 = rhs_raw(model, t_end_stage, y6.0, y6.1)?;
        let y_new = axpy(y, hh, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        let k7 = rhs_raw(model, t_end_stage, y_new.0, y_new.1)?;
        rec.stats().rhs_evals += 6;
        if !(y_new.0.is_finite() && y_new.1.is_finite()) {
            return Err(non_finite(t_new, y_new.0, y_new.1, hh));
        }

        let e = axpy((0.0, 0.0), hh, &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)]);
        let sc_th = cfg.abs_tol + cfg.rel_tol * y.0.abs().max(y_new.0.abs());
        let sc_ph = cfg.abs_tol + cfg.rel_tol;
        let sin_t = y.0.sin().abs().max(y_new.0.sin().abs());
        let err = scaled_norm(e.0, e.1, sin_t, sc_th, sc_ph);

        if !err.is_finite() || err > 1.0 {
            rec.stats().rejected += 1;
            if hh <= cfg.dt_min * (1.0 + 1e-9) {
                let s = MagState::new(y.0, y.1);
                return Err(MtjError::ToleranceUnattainable {
                    t,
                    theta: s.theta(),
                    phi: s.phi(),
                    dt: hh,
                });
            }
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h = (hh * fac).max(cfg.dt_min);
            last_rejected = true;
            continue;
        }

        // accepted
        {
            let st = rec.stats();
            st.accepted += 1;
            st.step_log.push((t, hh));
        }
        let ydiff = (y_new.0 - y.0, y_new.1 - y.1);
        let r3 = (hh * k1.0 - ydiff.0, hh * k1.1 - ydiff.1);
        let r4 = (ydiff.0 - hh * k7.0 - r3.0, ydiff.1 - hh * k7.1 - r3.1);
        let r5 = axpy((0.0, 0.0), hh, &[(D1, k1), (D3, k3), (D4, k4), (D5, k5), (D6, k6), (D7, k7)]);
        let dense = Dense {
            t0: t,
            h: t_new - t,
            r: [y, ydiff, r3, r4, r5],
        };

        // exact detector samples at the band and zero levels inside the step
        let mut marks: Vec<(f64, f64)> = Vec::new();
        const PROBES: usize = 4;
        let probe_t = |i: usize| t + (t_new - t) * i as f64 / PROBES as f64;
        let probe_th: Vec<f64> = (0..=PROBES).map(|i| MagState::new(dense.eval(probe_t(i)).0, 0.0).theta()).collect();
        for i in 0..PROBES {
            for &level in &LEVELS {
                let (a, b) = (probe_th[i] - level, probe_th[i + 1] - level);
                if (a < 0.0) != (b < 0.0) {
                    let tc = locate(&dense, level, probe_t(i), probe_t(i + 1));
                    marks.push((tc, level.cos()));
                }
            }
        }
        marks.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (tc, mz) in marks {
            rec.observe_point(tc, mz);
        }

        // uniform recording grid from dense output
        if cfg.record_interval > 0.0 {
            loop {
                let mut tr = next_record as f64 * cfg.record_interval;
                // a grid point within rounding of the end is the end
                if (tr - t_end).abs() <= 1e-9 * cfg.record_interval {
                    tr = t_end;
                }
                if tr > t_new || tr > t_end {
                    break;
                }
                let yr = dense.eval(tr);
                rec.record(tr, MagState::new(yr.0, yr.1));
                next_record += 1;
            }
        }

        let s_new = MagState::new(y_new.0, y_new.1);
        let reflected = y_new.0.rem_euclid(std::f64::consts::TAU) > PI;
        rec.observe(t_new, t_new - t, s_new.mz(), s_new.polar_deviation());
        let at_end = t_new >= t_end;
        if cfg.record_interval > 0.0 {
            let last_grid = (next_record - 1) as f64 * cfg.record_interval;
            if at_end && last_grid < t_end - 1e-9 * cfg.record_interval {
                rec.record(t_end, s_new);
            }
        } else {
            steps_since_record += 1;
            if steps_since_record >= cfg.record_stride || at_end {
                rec.record(t_new, s_new);
                steps_since_record = 0;
            }
        }

        t = t_new;
        y = (s_new.theta(), s_new.phi());
        if lands {
            // derivative may jump at a drive breakpoint: no FSAL reuse
            k1 = rhs_raw(model, t, y.0, y.1)?;
            rec.stats().rhs_evals += 1;
        } else {
            k1 = if reflected { (-k7.0, k7.1) } else { k7 };
        }
        let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = hh * fac;
        if lands && hh < h_try {
            // a step shortened to hit a breakpoint says little about the next one
            h = h.max(h_try);
        }
        h = h.clamp(cfg.dt_min, cfg.dt_max);
    }
    Ok(())
}
