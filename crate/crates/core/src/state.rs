//! Magnetization state in spherical coordinates.
//!
//! θ is the polar angle from +z, φ the azimuth from +x. The spherical pair is
//! the integrated representation; the Cartesian view is derived on demand and
//! is unit-norm by construction.

use crate::error::{MtjError, Result};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Wraps an angle into `[0, 2π)`.
///
/// This is the circular integration contract for φ: the azimuth never grows
/// without bound, whatever the integrator produced.
pub fn wrap_phi(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagState {
    theta: f64,
    phi: f64,
}

impl MagState {
    /// Builds a canonical state from arbitrary (θ, φ): θ is reflected into
    /// `[0, π]` (shifting φ by π for each reflection) and φ wrapped.
    pub fn new(theta: f64, phi: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        let mut p = phi;
        if t > PI {
            t = TAU - t;
            p += PI;
        }
        MagState {
            theta: t,
            phi: wrap_phi(p),
        }
    }

    pub fn north() -> Self {
        MagState { theta: 0.0, phi: 0.0 }
    }

    pub fn south() -> Self {
        MagState { theta: PI, phi: 0.0 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mz(&self) -> f64 {
        self.theta.cos()
    }

    /// (sin θ, cos θ), exact at both poles (sin π would otherwise be 1.2e-16).
    fn sin_cos_theta(&self) -> (f64, f64) {
        if self.theta == PI {
            (0.0, -1.0)
        } else {
            self.theta.sin_cos()
        }
    }

    pub fn cartesian(&self) -> Vec3 {
        let (st, ct) = self.sin_cos_theta();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }

    /// Local unit vector along increasing θ.
    pub fn theta_hat(&self) -> Vec3 {
        let (st, ct) = self.sin_cos_theta();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(ct * cp, ct * sp, -st)
    }

    /// Local unit vector along increasing φ.
    pub fn phi_hat(&self) -> Vec3 {
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(-sp, cp, 0.0)
    }

    /// Angle to the nearest pole, in `[0, π/2]`.
    pub fn polar_deviation(&self) -> f64 {
        self.theta.min(PI - self.theta)
    }
}

/// Normalizes `v` and returns its spherical angles; exact poles get φ = 0.
pub fn state_from_cartesian(v: Vec3) -> Result<MagState> {
    let u = v.normalized().ok_or(MtjError::ZeroVector)?;
    let rho = u.x.hypot(u.y);
    if rho == 0.0 {
        return Ok(if u.z > 0.0 {
            MagState::north()
        } else {
            MagState::south()
        });
    }
    // atan2 keeps accuracy near both poles, unlike acos(z)
    let theta = rho.atan2(u.z);
    let phi = wrap_phi(u.y.atan2(u.x));
    Ok(MagState { theta, phi })
}
