//! Right-hand side of the s-LLGS equation.
//!
//! The implicit Gilbert form
//!
//! ```text
//! dm/dt = −γμ0 m×H + α m×dm/dt + γμ0 β ε m×(m_p×m) − γμ0 β ε′ m×m_p
//! ```
//!
//! is solved for dm/dt by crossing both sides with m. Writing
//! `a = m×(m_p×m) = m_p − (m·m_p) m` and `b = m×m_p` (so `m×a = b`,
//! `m×b = −a`), the explicit Landau-Lifshitz form is
//!
//! ```text
//! dm/dt = γ′ [ −m×H − α m×(m×H) + β (ε + αε′) a − β (ε′ − αε) b ]
//! ```
//!
//! with `γ′ = γμ0/(1+α²)` applied once.

use crate::constants::PhysicalConstants;
use crate::device::{DerivedQuantities, DeviceParams};
use crate::error::{MtjError, Result};
use crate::fields::FieldVector;
use crate::state::MagState;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Floor of sin θ in the dφ/dt denominator.
pub const THETA_MIN: f64 = 1e-8;

/// Spin-transfer magnitudes at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueTerms {
    /// β = |ħ/(μ0 e)| I/(V M_s), in A/m.
    pub beta: f64,
    /// Primary efficiency ε.
    pub epsilon: f64,
    /// Secondary term ε′, copied from the device.
    pub eps_prime: f64,
}

impl TorqueTerms {
    pub const ZERO: TorqueTerms = TorqueTerms {
        beta: 0.0,
        epsilon: 0.0,
        eps_prime: 0.0,
    };
}

/// β and ε for a current `i_mtj` (A) and magnetization `m`.
pub fn stt_coefficients_at(
    i_mtj: f64,
    m: Vec3,
    params: &DeviceParams,
    c: &PhysicalConstants,
) -> Result<TorqueTerms> {
    let beta = c.stt_prefactor() * i_mtj / (params.volume * params.ms);
    let l2 = params.lambda_stt * params.lambda_stt;
    let m_dot_p = m.dot(params.m_p);
    let denominator = (l2 + 1.0) + (l2 - 1.0) * m_dot_p;
    if !(denominator > 1e-300) {
        return Err(MtjError::DegenerateTorque {
            denominator,
            m_dot_p,
            lambda: params.lambda_stt,
        });
    }
    Ok(TorqueTerms {
        beta,
        epsilon: params.p * l2 / denominator,
        eps_prime: params.eps_prime,
    })
}

pub fn stt_coefficients(
    i_mtj: f64,
    state: &MagState,
    params: &DeviceParams,
    c: &PhysicalConstants,
) -> Result<TorqueTerms> {
    stt_coefficients_at(i_mtj, state.cartesian(), params, c)
}

/// Explicit dm/dt (1/s) for a unit vector `m`.
pub fn llgs_rhs_cartesian(
    m: Vec3,
    h: FieldVector,
    torque: &TorqueTerms,
    params: &DeviceParams,
    derived: &DerivedQuantities,
) -> Vec3 {
    let gp = derived.gamma_prime;
    let alpha = params.alpha;
    let mxh = m.cross(h);
    let mut rhs = -gp * mxh - (alpha * gp) * m.cross(mxh);
    if torque.beta != 0.0 {
        let mp = params.m_p;
        let a = mp - m * m.dot(mp);
        let b = m.cross(mp);
        let (eps, epsp) = (torque.epsilon, torque.eps_prime);
        let k = gp * torque.beta;
        rhs += a * (k * (eps + alpha * epsp)) - b * (k * (epsp - alpha * eps));
    }
    rhs
}

/// Which θ motion the window taper applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowGate {
    /// Every θ rate is tapered. Once a state sits in the zero cone it can
    /// never leave, so a later write against it fails.
    Both,
    /// Only motion toward the nearest pole is tapered; spin torque pushing
    /// out of the cone acts at full strength.
    #[default]
    PoleWard,
}

/// Thermal-emulation window around the poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub enabled: bool,
    pub c_w: f64,
    /// θ′₀ = c_w θ₀ (rad).
    pub theta0_prime: f64,
    pub gate: WindowGate,
}

impl WindowConfig {
    pub fn disabled() -> Self {
        WindowConfig {
            enabled: false,
            c_w: 0.0,
            theta0_prime: 0.0,
            gate: WindowGate::default(),
        }
    }

    pub fn new(c_w: f64, theta0: f64) -> Result<Self> {
        let theta0_prime = c_w * theta0;
        if !(theta0_prime > 0.0 && theta0_prime < FRAC_PI_2) {
            return Err(MtjError::InvalidParams(format!(
                "window edge c_w·θ₀ = {c_w}·{theta0} = {theta0_prime} must lie in (0, π/2)"
            )));
        }
        Ok(WindowConfig {
            enabled: true,
            c_w,
            theta0_prime,
            gate: WindowGate::default(),
        })
    }

    pub fn with_gate(self, gate: WindowGate) -> Self {
        WindowConfig { gate, ..self }
    }

    pub fn weight(&self, theta: f64) -> f64 {
        if self.enabled {
            tukey_weight(theta, self.theta0_prime)
        } else {
            1.0
        }
    }

    /// dθ/dt after the taper.
    pub fn apply(&self, theta: f64, dtheta: f64) -> f64 {
        if !self.enabled {
            return dtheta;
        }
        let poleward = if theta > FRAC_PI_2 { dtheta > 0.0 } else { dtheta < 0.0 };
        match self.gate {
            WindowGate::PoleWard if !poleward => dtheta,
            _ => dtheta * tukey_weight(theta, self.theta0_prime),
        }
    }
}

/// Tukey taper: 0 inside the cone θ < θ′₀, a raised-cosine ramp over
/// `[θ′₀, 1.25 θ′₀]`, 1 beyond; mirrored about π/2.
pub fn tukey_weight(theta: f64, theta0_prime: f64) -> f64 {
    let t = if theta > FRAC_PI_2 { PI - theta } else { theta };
    if t < theta0_prime {
        0.0
    } else if t - theta0_prime < 0.25 * theta0_prime {
        0.5 - 0.5 * (4.0 * PI * (t - theta0_prime) / theta0_prime).cos()
    } else {
        1.0
    }
}

/// (dθ/dt, dφ/dt) in rad/s: projection of the Cartesian RHS on the local
/// frame, with sin θ floored at sin(THETA_MIN) in the φ equation and the
/// window weight applied to dθ/dt only.
pub fn llgs_rhs_spherical(
    state: &MagState,
    h: FieldVector,
    torque: &TorqueTerms,
    params: &DeviceParams,
    derived: &DerivedQuantities,
    window: &WindowConfig,
) -> (f64, f64) {
    let rhs = llgs_rhs_cartesian(state.cartesian(), h, torque, params, derived);
    let dtheta = window.apply(state.theta(), rhs.dot(state.theta_hat()));
    let sin_t = state.theta().sin().max(THETA_MIN.sin());
    let dphi = rhs.dot(state.phi_hat()) / sin_t;
    (dtheta, dphi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CODATA_2018;
    use crate::device::derive;
    use crate::fields::h_eff_cartesian;
    use crate::fields::DriveSample;
    use proptest::prelude::*;

    fn setup() -> (DeviceParams, DerivedQuantities) {
        let p = DeviceParams::validation_cylinder();
        let d = derive(&p, &CODATA_2018).unwrap();
        (p, d)
    }

    fn unit(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z).normalized().unwrap()
    }

    /// Fixed-point solution of the implicit Gilbert form, independent of the
    /// explicit algebra above.
    fn implicit_oracle(m: Vec3, h: Vec3, beta: f64, eps: f64, epsp: f64, p: &DeviceParams) -> Vec3 {
        let g0 = p.gamma * CODATA_2018.mu0;
        let mp = p.m_p;
        let src = -g0 * m.cross(h) + g0 * beta * eps * m.cross(mp.cross(m)) - g0 * beta * epsp * m.cross(mp);
        let mut x = src;
        for _ in 0..200 {
            x = src + p.alpha * m.cross(x);
        }
        x
    }

    #[test]
    fn beta_by_hand() {
        let (p, _) = setup();
        let t = stt_coefficients(35e-6, &MagState::north(), &p, &CODATA_2018).unwrap();
        let v = PI * 25e-9 * 25e-9 * 1e-9;
        let hbar_mu0_e = 1.054_571_817e-34 / (1.256_637_062_12e-6 * 1.602_176_634e-19);
        let expected = hbar_mu0_e * 35e-6 / (v * 1.2e6);
        assert!((t.beta - expected).abs() / expected < 1e-12);
        assert!((t.beta - 7785.0).abs() < 5.0);
        assert_eq!(stt_coefficients(0.0, &MagState::north(), &p, &CODATA_2018).unwrap().beta, 0.0);
    }

    #[test]
    fn lambda_one_gives_half_p() {
        let (p, _) = setup();
        for th in [0.0, 0.7, 2.0, PI] {
            let t = stt_coefficients(1e-5, &MagState::new(th, 1.0), &p, &CODATA_2018).unwrap();
            assert!((t.epsilon - p.p / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn asymmetric_lambda_and_degenerate_case() {
        let (mut p, _) = setup();
        p.lambda_stt = 2.0;
        // m ∥ m_p: den = 2Λ²; antiparallel: den = 2
        let par = stt_coefficients(1e-5, &MagState::north(), &p, &CODATA_2018).unwrap();
        let anti = stt_coefficients(1e-5, &MagState::south(), &p, &CODATA_2018).unwrap();
        assert!((par.epsilon - 0.75 / 2.0).abs() < 1e-15);
        assert!((anti.epsilon - 0.75 * 4.0 / 2.0).abs() < 1e-15);
        p.lambda_stt = 0.0;
        assert!(matches!(
            stt_coefficients(1e-5, &MagState::north(), &p, &CODATA_2018),
            Err(MtjError::DegenerateTorque { .. })
        ));
    }

    #[test]
    fn matches_implicit_form() {
        let (mut p, d0) = setup();
        for (alpha, epsp) in [(0.01, 0.0), (0.3, 0.2), (0.05, -0.4)] {
            p.alpha = alpha;
            p.eps_prime = epsp;
            p.m_p = unit(0.2, -0.1, 1.0);
            let d = DerivedQuantities {
                gamma_prime: p.gamma * CODATA_2018.mu0 / (1.0 + alpha * alpha),
                ..d0
            };
            for (m, h) in [
                (unit(0.3, 0.4, 0.8), Vec3::new(1e4, -3e4, 2e5)),
                (unit(-0.9, 0.1, -0.2), Vec3::new(-5e5, 2e3, 7e4)),
                (unit(0.0, 0.0, -1.0), Vec3::new(1e3, 1e3, -1e5)),
            ] {
                let t = stt_coefficients_at(50e-6, m, &p, &CODATA_2018).unwrap();
                let got = llgs_rhs_cartesian(m, h, &t, &p, &d);
                let want = implicit_oracle(m, h, t.beta, t.epsilon, t.eps_prime, &p);
                assert!((got - want).norm() <= 1e-8 * want.norm(), "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn parallel_field_is_equilibrium() {
        let (p, d) = setup();
        let m = unit(0.2, 0.3, 0.9);
        let r = llgs_rhs_cartesian(m, m * 3e5, &TorqueTerms::ZERO, &p, &d);
        assert!(r.norm() < 1e-14 * d.gamma_prime * 3e5);
    }

    #[test]
    fn undamped_precession_is_conservative() {
        let (mut p, mut d) = setup();
        p.alpha = 0.0;
        d.gamma_prime = p.gamma * CODATA_2018.mu0;
        let m = unit(0.5, -0.2, 0.7);
        let h = Vec3::new(1e4, 2e4, 3e5);
        let r = llgs_rhs_cartesian(m, h, &TorqueTerms::ZERO, &p, &d);
        assert!(r.dot(m).abs() < 1e-9 * r.norm());
        assert!(r.dot(h).abs() < 1e-9 * r.norm() * h.norm());
    }

    #[test]
    fn equator_precession_rate() {
        let (mut p, mut d) = setup();
        p.alpha = 0.0;
        d.gamma_prime = p.gamma * CODATA_2018.mu0;
        let hz = 1.0e5;
        let s = MagState::new(FRAC_PI_2, 0.4);
        let (dt, dp) = llgs_rhs_spherical(&s, Vec3::new(0.0, 0.0, hz), &TorqueTerms::ZERO, &p, &d, &WindowConfig::disabled());
        assert!(dt.abs() < 1e-6 * d.gamma_prime * hz);
        // m×H = −H φ̂ at the equator, so −γ′ m×H advances φ at +γ′H
        assert!((dp - d.gamma_prime * hz).abs() < 1e-9 * d.gamma_prime * hz);
    }

    #[test]
    fn pole_asymptote_in_phi_rate() {
        let (p, d) = setup();
        // fixed transverse field: the φ̂ component of the torque stays O(|h|)
        // while sin θ → 0, so dφ/dt scales like 1/θ
        let h = Vec3::new(0.0, 2e3, 0.0);
        let rate = |theta: f64| {
            let s = MagState::new(theta, 0.0);
            llgs_rhs_spherical(&s, h, &TorqueTerms::ZERO, &p, &d, &WindowConfig::disabled()).1
        };
        let (r3, r4) = (rate(1e-3), rate(1e-4));
        assert!((r4 / r3 - 10.0).abs() < 0.01, "ratio {}", r4 / r3);
        // guard: finite at the pole itself
        assert!(rate(0.0).is_finite());
        assert!(rate(1e-12).is_finite());
    }

    #[test]
    fn poles_are_fixed_points_without_current() {
        let (p, d) = setup();
        for s in [MagState::north(), MagState::south(), MagState::new(PI, 2.0)] {
            let h = h_eff_cartesian(s.cartesian(), &DriveSample::default(), &p, &CODATA_2018, Vec3::ZERO);
            let (dt, _) = llgs_rhs_spherical(&s, h, &TorqueTerms::ZERO, &p, &d, &WindowConfig::disabled());
            assert_eq!(dt, 0.0);
        }
    }

    #[test]
    fn tukey_examples() {
        let tp = 0.1;
        assert_eq!(tukey_weight(tp / 2.0, tp), 0.0);
        assert_eq!(tukey_weight(tp, tp), 0.0);
        assert!((tukey_weight(tp * 1.125, tp) - 0.5).abs() < 1e-12);
        assert_eq!(tukey_weight(tp * 1.25, tp), 1.0);
        assert_eq!(tukey_weight(FRAC_PI_2, tp), 1.0);
        assert_eq!(tukey_weight(PI - tp / 2.0, tp), 0.0);
    }

    #[test]
    fn window_zeroes_theta_rate_at_edge() {
        let (p, d) = setup();
        let w = WindowConfig::new(1.0, d.theta0).unwrap().with_gate(WindowGate::Both);
        let s = MagState::new(w.theta0_prime, 0.3);
        let t = stt_coefficients(-35e-6, &s, &p, &CODATA_2018).unwrap();
        let (dt, dp) = llgs_rhs_spherical(&s, Vec3::new(5e4, 1e4, 2e5), &t, &p, &d, &w);
        assert_eq!(dt, 0.0);
        assert!(dp != 0.0);
        assert!(WindowConfig::new(20.0, d.theta0).is_err());
        assert!(WindowConfig::new(0.0, d.theta0).is_err());
    }

    #[test]
    fn poleward_gate_only_blocks_collapse() {
        let (p, d) = setup();
        let w = WindowConfig::new(1.0, d.theta0).unwrap();
        let h = Vec3::new(0.0, 0.0, d.h_k_eff);
        for theta in [w.theta0_prime, PI - w.theta0_prime] {
            let s = MagState::new(theta, 0.3);
            // relaxation toward the pole is frozen at the edge
            let (relax, _) = llgs_rhs_spherical(&s, h * s.mz(), &TorqueTerms::ZERO, &p, &d, &w);
            assert_eq!(relax, 0.0);
            // a write current away from that pole acts in full
            let i = if theta < FRAC_PI_2 { -100e-6 } else { 100e-6 };
            let t = stt_coefficients(i, &s, &p, &CODATA_2018).unwrap();
            let (gated, _) = llgs_rhs_spherical(&s, h * s.mz(), &t, &p, &d, &w);
            let (free, _) = llgs_rhs_spherical(&s, h * s.mz(), &t, &p, &d, &WindowConfig::disabled());
            assert!(free.abs() > 0.0);
            assert_eq!(gated, free);
        }
    }

    proptest! {
        #[test]
        fn tangency(th in 0.0..PI, ph in 0.0..std::f64::consts::TAU, hx in -1e6..1e6, hy in -1e6..1e6, hz in -1e6..1e6, i in -1e-4..1e-4) {
            let (p, d) = setup();
            let s = MagState::new(th, ph);
            let m = s.cartesian();
            let t = stt_coefficients(i, &s, &p, &CODATA_2018).unwrap();
            let r = llgs_rhs_cartesian(m, Vec3::new(hx, hy, hz), &t, &p, &d);
            prop_assert!(r.dot(m).abs() <= 1e-10 * r.norm() + 1e-300);
        }

        #[test]
        fn spherical_maps_back_to_cartesian(th in 1e-3..(PI - 1e-3), ph in 0.0..std::f64::consts::TAU, hx in -1e6..1e6, hy in -1e6..1e6, hz in -1e6..1e6, i in -1e-4..1e-4) {
            let (p, d) = setup();
            let s = MagState::new(th, ph);
            let t = stt_coefficients(i, &s, &p, &CODATA_2018).unwrap();
            let h = Vec3::new(hx, hy, hz);
            let cart = llgs_rhs_cartesian(s.cartesian(), h, &t, &p, &d);
            let (dt, dp) = llgs_rhs_spherical(&s, h, &t, &p, &d, &WindowConfig::disabled());
            let back = s.theta_hat() * dt + s.phi_hat() * (dp * th.sin());
            prop_assert!((back - cart).norm() <= 1e-8 * cart.norm() + 1e-300);
        }

        #[test]
        fn damping_pulls_towards_nearest_pole(th in 0.0..PI, ph in 0.0..std::f64::consts::TAU) {
            let (p, d) = setup();
            let s = MagState::new(th, ph);
            let h = h_eff_cartesian(s.cartesian(), &DriveSample::default(), &p, &CODATA_2018, Vec3::ZERO);
            let r = llgs_rhs_cartesian(s.cartesian(), h, &TorqueTerms::ZERO, &p, &d);
            // d(m_z²)/dt = 2 m_z dm_z/dt
            prop_assert!(s.mz() * r.z >= -1e-6);
        }

        #[test]
        fn tukey_is_bounded_and_symmetric(th in 0.0..PI, tp in 1e-3..1.2) {
            let w = tukey_weight(th, tp);
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!((w - tukey_weight(PI - th, tp)).abs() < 1e-9);
        }

        #[test]
        fn tukey_is_continuous(th in 0.0..1.5, tp in 1e-2..1.0) {
            // Lipschitz constant of the ramp is 2π/θ′₀
            let e = 1e-9;
            let lip = 2.0 * PI / tp;
            prop_assert!((tukey_weight(th + e, tp) - tukey_weight(th, tp)).abs() <= lip * e * 1.01 + 1e-15);
        }
    }
}
