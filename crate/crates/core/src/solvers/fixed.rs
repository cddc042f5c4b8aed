use super::{non_finite, rhs_raw, step_naive_euler, Recorder, SolverConfig};
use crate::error::{MtjError, Result};
use crate::fields::{h_thermal_sample, ThermalKind};
use crate::model::Model;
use crate::rng::NoiseStream;
use crate::state::{state_from_cartesian, MagState};
use crate::vec3::Vec3;

fn step_count(cfg: &SolverConfig) -> u64 {
    (cfg.t_end / cfg.dt - 1e-9).ceil().max(1.0) as u64
}

/// (start, end) of step `k`; the last step is shortened to land on t_end.
fn step_bounds(cfg: &SolverConfig, k: u64) -> (f64, f64) {
    let t0 = k as f64 * cfg.dt;
    let t1 = ((k + 1) as f64 * cfg.dt).min(cfg.t_end);
    (t0, t1)
}

fn record_due(cfg: &SolverConfig, k: u64, n: u64) -> bool {
    (k + 1).is_multiple_of(cfg.record_stride as u64) || k + 1 == n
}

fn polar_dev(m: Vec3) -> f64 {
    m.x.hypot(m.y).atan2(m.z.abs())
}

fn renormalize(v: Vec3, t: f64, dt: f64) -> Result<Vec3> {
    match v.normalized() {
        Some(u) if u.is_finite() => Ok(u),
        _ => Err(MtjError::NonFinite {
            t,
            mx: v.x,
            my: v.y,
            mz: v.z,
            dt,
        }),
    }
}

pub(super) fn naive_euler(model: &Model, cfg: &SolverConfig, init: MagState, rec: &mut Recorder) -> Result<()> {
    let n = step_count(cfg);
    let mut s = init;
    for k in 0..n {
        let (t0, t1) = step_bounds(cfg, k);
        let h = t1 - t0;
        let rates = model.rhs_spherical(t0, &s, None)?;
        let theta = s.theta() + rates.0 * h;
        let phi = s.phi() + rates.1 * h;
        if !(theta.is_finite() && phi.is_finite()) {
            return Err(non_finite(t1, theta, phi, h));
        }
        s = step_naive_euler(&s, rates, h);
        let st = rec.stats();
        st.rhs_evals += 1;
        st.accepted += 1;
        rec.observe(t1, h, s.mz(), s.polar_deviation());
        if record_due(cfg, k, n) {
            rec.record(t1, s);
        }
    }
    Ok(())
}

pub(super) fn stochastic_heun(
    model: &Model,
    cfg: &SolverConfig,
    init: MagState,
    run_index: u64,
    rec: &mut Recorder,
) -> Result<()> {
    let n = step_count(cfg);
    let mut noise = NoiseStream::new(cfg.seed, run_index);
    let sigma_full = model.thermal_sigma(cfg.dt)?;
    let averaging = rec.averaging();
    let mut m = init.cartesian();
    for k in 0..n {
        let (t0, t1) = step_bounds(cfg, k);
        let h = t1 - t0;
        let sigma = if h == cfg.dt { sigma_full } else { model.thermal_sigma(h)? };
        let hs = h_thermal_sample(&mut noise, k, sigma);
        let f0 = model.rhs_cartesian(t0, m, hs)?;
        let pred = renormalize(m + f0 * h, t1, h)?;
        let f1 = model.rhs_cartesian(t1, pred, hs)?;
        m = renormalize(m + (f0 + f1) * (0.5 * h), t1, h)?;
        let st = rec.stats();
        st.rhs_evals += 2;
        st.accepted += 1;
        rec.observe(t1, h, m.z, if averaging { polar_dev(m) } else { 0.0 });
        if record_due(cfg, k, n) {
            rec.record(t1, state_from_cartesian(m)?);
        }
    }
    Ok(())
}

/// Classical RK4. Cartesian with renormalization when the model has no
/// spherical-only terms; otherwise on (θ, φ).
pub(super) fn rk4(model: &Model, cfg: &SolverConfig, init: MagState, rec: &mut Recorder) -> Result<()> {
    let cartesian = model.thermal.mode == ThermalKind::Off && !model.window.enabled;
    let n = step_count(cfg);
    let mut m = init.cartesian();
    let mut s = init;
    for k in 0..n {
        let (t0, t1) = step_bounds(cfg, k);
        let h = t1 - t0;
        let tm = t0 + 0.5 * h;
        if cartesian {
            let z = Vec3::ZERO;
            let k1 = model.rhs_cartesian(t0, m, z)?;
            let k2 = model.rhs_cartesian(tm, m + k1 * (0.5 * h), z)?;
            let k3 = model.rhs_cartesian(tm, m + k2 * (0.5 * h), z)?;
            let k4 = model.rhs_cartesian(t1, m + k3 * h, z)?;
            m = renormalize(m + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0), t1, h)?;
            let st = rec.stats();
            st.rhs_evals += 4;
            st.accepted += 1;
            rec.observe(t1, h, m.z, polar_dev(m));
            if record_due(cfg, k, n) {
                rec.record(t1, state_from_cartesian(m)?);
            }
        } else {
            let (th, ph) = (s.theta(), s.phi());
            let k1 = rhs_raw(model, t0, th, ph)?;
            let k2 = rhs_raw(model, tm, th + 0.5 * h * k1.0, ph + 0.5 * h * k1.1)?;
            let k3 = rhs_raw(model, tm, th + 0.5 * h * k2.0, ph + 0.5 * h * k2.1)?;
            let k4 = rhs_raw(model, t1, th + h * k3.0, ph + h * k3.1)?;
            let th1 = th + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            let ph1 = ph + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            if !(th1.is_finite() && ph1.is_finite()) {
                return Err(non_finite(t1, th1, ph1, h));
            }
            s = MagState::new(th1, ph1);
            let st = rec.stats();
            st.rhs_evals += 4;
            st.accepted += 1;
            rec.observe(t1, h, s.mz(), s.polar_deviation());
            if record_due(cfg, k, n) {
                rec.record(t1, s);
            }
        }
    }
    Ok(())
}
