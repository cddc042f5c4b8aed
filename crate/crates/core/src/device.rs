//! Device parameterization: material, geometry and torque constants.

use crate::constants::PhysicalConstants;
use crate::error::{MtjError, Result};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Material, geometry and spin-torque constants of a single free layer. SI throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Saturation magnetization (A/m).
    pub ms: f64,
    /// Gilbert damping.
    pub alpha: f64,
    /// Gyromagnetic ratio (rad·s⁻¹·T⁻¹).
    pub gamma: f64,
    /// Spin polarization factor P.
    pub p: f64,
    /// Slonczewski asymmetry Λ of the primary spin-transfer term.
    pub lambda_stt: f64,
    /// Secondary (field-like) spin-transfer term ε′.
    pub eps_prime: f64,
    /// Interfacial anisotropy energy (J/m²).
    pub ki: f64,
    /// VCMA coefficient (J·V⁻¹·m⁻¹).
    pub xi: f64,
    pub t_fl: f64,
    pub t_ox: f64,
    pub diameter: f64,
    /// Free-layer volume (m³).
    pub volume: f64,
    /// Diagonal of the demagnetization tensor.
    pub demag: Vec3,
    /// Pinned-layer polarization direction (unit).
    pub m_p: Vec3,
    /// Temperature (K).
    pub temperature: f64,
    pub r_p: f64,
    pub r_ap: f64,
}

impl DeviceParams {
    /// Cylindrical free layer with volume and demagnetization factors derived
    /// from `diameter` and `t_fl`. The remaining fields keep the values given.
    #[allow(clippy::too_many_arguments)]
    pub fn cylinder(
        ms: f64,
        alpha: f64,
        gamma: f64,
        p: f64,
        ki: f64,
        t_fl: f64,
        t_ox: f64,
        diameter: f64,
        temperature: f64,
    ) -> Self {
        DeviceParams {
            ms,
            alpha,
            gamma,
            p,
            lambda_stt: 1.0,
            eps_prime: 0.0,
            ki,
            xi: 0.0,
            t_fl,
            t_ox,
            diameter,
            volume: cylinder_volume(diameter, t_fl),
            demag: cylinder_demag(diameter, t_fl),
            m_p: Vec3::Z,
            temperature,
            r_p: 2.0e3,
            r_ap: 4.0e3,
        }
    }

    /// The 50 nm × 1 nm CoFeB-like cylinder used for solver validation and
    /// the calibration studies (M_s = 1.2e6 A/m, K_i = 1e-3 J/m², P = 0.75,
    /// α = 0.01, γ = 1.76e11 rad/s/T, 300 K).
    pub fn validation_cylinder() -> Self {
        Self::cylinder(1.2e6, 0.01, 1.76e11, 0.75, 1.0e-3, 1.0e-9, 1.0e-9, 50.0e-9, 300.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MtjError::InvalidParams(msg));
        let finite = [
            ("ms", self.ms),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("p", self.p),
            ("lambda_stt", self.lambda_stt),
            ("eps_prime", self.eps_prime),
            ("ki", self.ki),
            ("xi", self.xi),
            ("t_fl", self.t_fl),
            ("t_ox", self.t_ox),
            ("diameter", self.diameter),
            ("volume", self.volume),
            ("temperature", self.temperature),
            ("r_p", self.r_p),
            ("r_ap", self.r_ap),
        ];
        if let Some((name, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{name} is not finite ({v})"));
        }
        if self.alpha <= 0.0 {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if self.ms <= 0.0 {
            return bad(format!("ms must be > 0, got {}", self.ms));
        }
        if self.volume <= 0.0 {
            return bad(format!("volume must be > 0, got {}", self.volume));
        }
        if self.t_fl <= 0.0 || self.t_ox <= 0.0 {
            return bad(format!(
                "t_fl and t_ox must be > 0, got {} and {}",
                self.t_fl, self.t_ox
            ));
        }
        if self.temperature < 0.0 {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        let n = self.demag;
        if !n.is_finite() || n.x < 0.0 || n.y < 0.0 || n.z < 0.0 {
            return bad(format!("demag factors must be finite and >= 0, got {n:?}"));
        }
        if (n.x + n.y + n.z - 1.0).abs() > 1e-9 {
            return bad(format!(
                "demag factors must sum to 1, got {}",
                n.x + n.y + n.z
            ));
        }
        if (self.m_p.norm() - 1.0).abs() > 1e-12 {
            return bad(format!("|m_p| must be 1, got {}", self.m_p.norm()));
        }
        if !(self.r_ap > self.r_p && self.r_p > 0.0) {
            return bad(format!(
                "need r_ap > r_p > 0, got r_p = {}, r_ap = {}",
                self.r_p, self.r_ap
            ));
        }
        Ok(())
    }

    /// Coefficient of m_z in the interfacial uniaxial field, 2K_i/(t_fl μ0 M_s) (A/m).
    pub fn h_uniaxial_coeff(&self, c: &PhysicalConstants) -> f64 {
        2.0 * self.ki / (self.t_fl * c.mu0 * self.ms)
    }

    /// Net perpendicular anisotropy field at θ = 0: uniaxial minus the
    /// demagnetizing contrast between the axial and (mean) in-plane factors.
    pub fn h_k_eff(&self, c: &PhysicalConstants) -> f64 {
        let n_inplane = 0.5 * (self.demag.x + self.demag.y);
        self.h_uniaxial_coeff(c) - self.ms * (self.demag.z - n_inplane)
    }
}

pub fn cylinder_volume(diameter: f64, thickness: f64) -> f64 {
    PI * (0.5 * diameter).powi(2) * thickness
}

/// Magnetometric demagnetization factors (N_x, N_y, N_z) of a uniformly
/// magnetized circular cylinder with its axis along z.
///
/// Closed form in complete elliptic integrals of parameter m = 1/(1 + τ²),
/// τ = thickness/diameter:
///
/// ```text
/// N_z = 1 + 4/(3πτ) · [1 − √(1+τ²) · ((1 − τ²) E(m) + τ² K(m))]
/// ```
///
/// For τ below 1e-4 the bracket cancels catastrophically and the thin-film
/// expansion N_z ≈ 1 − (2τ/π)(ln(4/τ) − 1/2) is used instead.
pub fn cylinder_demag(diameter: f64, thickness: f64) -> Vec3 {
    let tau = thickness / diameter;
    let nz = if tau < 1e-4 {
        1.0 - (2.0 * tau / PI) * ((4.0 / tau).ln() - 0.5)
    } else {
        let m = 1.0 / (1.0 + tau * tau);
        let (k, e) = elliptic_ke(m);
        let s = (1.0 + tau * tau).sqrt();
        1.0 + 4.0 / (3.0 * PI * tau) * (1.0 - s * ((1.0 - tau * tau) * e + tau * tau * k))
    };
    let nt = 0.5 * (1.0 - nz);
    Vec3::new(nt, nt, nz)
}

/// Complete elliptic integrals K(m), E(m) of parameter m ∈ [0, 1) via the
/// arithmetic-geometric mean.
pub fn elliptic_ke(m: f64) -> (f64, f64) {
    assert!((0.0..1.0).contains(&m), "elliptic parameter out of range: {m}");
    let mut a = 1.0_f64;
    let mut b = (1.0 - m).sqrt();
    let mut c2_sum = 0.5 * m; // 2^{-1} c_0², c_0² = m
    let mut pow2 = 0.5_f64;
    for _ in 0..64 {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow2 *= 2.0;
        c2_sum += pow2 * c * c;
        if c.abs() <= f64::EPSILON * a {
            break;
        }
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - c2_sum))
}

/// Quantities derived once from the device and constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    /// γ′ = γ μ0/(1 + α²) (m·A⁻¹·s⁻¹).
    pub gamma_prime: f64,
    /// Net perpendicular anisotropy field (A/m).
    pub h_k_eff: f64,
    /// Thermal stability factor Δ; infinite at T = 0.
    pub delta_thermal: f64,
    /// RMS equilibrium cone angle θ₀ = 1/√Δ (rad); zero at T = 0.
    pub theta0: f64,
}

pub fn derive(params: &DeviceParams, c: &PhysicalConstants) -> Result<DerivedQuantities> {
    let gamma_prime = params.gamma * c.mu0 / (1.0 + params.alpha * params.alpha);
    let h_k_eff = params.h_k_eff(c);
    if h_k_eff <= 0.0 || !h_k_eff.is_finite() {
        return Err(MtjError::NotPma { h_k_eff });
    }
    let (delta_thermal, theta0) = if params.temperature == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let delta = c.mu0 * params.ms * h_k_eff * params.volume / (2.0 * c.kb * params.temperature);
        (delta, (1.0 / delta).sqrt())
    };
    Ok(DerivedQuantities {
        gamma_prime,
        h_k_eff,
        delta_thermal,
        theta0,
    })
}
