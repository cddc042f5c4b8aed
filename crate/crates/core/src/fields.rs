//! Effective-field assembly.
//!
//! `H_eff = H_ext + H_uni + H_demag − H_vcma + H_thermal`, every term in A/m.
//! The thermal term is one of: nothing, a Brownian sample held for one step,
//! or the deterministic surrogate `c_f · σ(dt_ref) · φ̂`.

use crate::constants::PhysicalConstants;
use crate::device::{DerivedQuantities, DeviceParams};
use crate::error::{MtjError, Result};
use crate::rng::NoiseStream;
use crate::state::MagState;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};

/// A field in A/m, Cartesian components.
pub type FieldVector = Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalKind {
    #[default]
    Off,
    Stochastic,
    Fictitious,
}

/// Radicand convention of the thermal-field magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalConvention {
    /// σ² = 2 k_B T α / (γ′ μ0 M_s V dt): field in A/m.
    #[default]
    Mu0Consistent,
    /// σ² = 2 k_B T α / (γ′ M_s V dt), without μ0 in the radicand.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalMode {
    pub mode: ThermalKind,
    /// Fictitious-field coefficient; only read in `Fictitious` mode.
    pub c_f: f64,
    /// Reference step freezing the surrogate magnitude (s).
    pub dt_ref: f64,
    pub convention: ThermalConvention,
}

impl Default for ThermalMode {
    fn default() -> Self {
        ThermalMode {
            mode: ThermalKind::Off,
            c_f: 0.0,
            dt_ref: 1.0e-12,
            convention: ThermalConvention::Mu0Consistent,
        }
    }
}

impl ThermalMode {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn stochastic() -> Self {
        ThermalMode {
            mode: ThermalKind::Stochastic,
            ..Self::default()
        }
    }

    pub fn fictitious(c_f: f64) -> Self {
        ThermalMode {
            mode: ThermalKind::Fictitious,
            c_f,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c_f.is_finite() {
            return Err(MtjError::InvalidParams(format!("c_f must be finite, got {}", self.c_f)));
        }
        if !(self.dt_ref > 0.0 && self.dt_ref.is_finite()) {
            return Err(MtjError::InvalidStep(self.dt_ref));
        }
        Ok(())
    }
}

/// Per-step resolved thermal contribution handed to [`h_eff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalField {
    None,
    /// A Brownian sample, held fixed over the whole step.
    Sample(FieldVector),
    /// Deterministic surrogate magnitude (A/m) along the local φ̂.
    Fictitious(f64),
}

/// Interfacial uniaxial field, `(0, 0, 2K_i/(t_fl μ0 M_s) · m_z)`.
pub fn h_uniaxial(state: &MagState, params: &DeviceParams, c: &PhysicalConstants) -> FieldVector {
    Vec3::new(0.0, 0.0, params.h_uniaxial_coeff(c) * state.mz())
}

/// Shape-anisotropy self field, `−M_s N·m`.
pub fn h_demag(state: &MagState, params: &DeviceParams) -> FieldVector {
    -params.ms * params.demag.hadamard(state.cartesian())
}

/// VCMA field magnitude term `2ξ I R/(t_fl t_ox μ0 M_s) · m_z ẑ`, returned with
/// the sign it has before being subtracted in `H_eff`.
pub fn h_vcma(
    state: &MagState,
    i_mtj: f64,
    r_mtj: f64,
    params: &DeviceParams,
    c: &PhysicalConstants,
) -> FieldVector {
    let k = 2.0 * params.xi * i_mtj * r_mtj / (params.t_fl * params.t_ox * c.mu0 * params.ms);
    Vec3::new(0.0, 0.0, k * state.mz())
}

/// Standard deviation of each Cartesian thermal-field component for a step `dt`.
pub fn thermal_sigma(
    params: &DeviceParams,
    derived: &DerivedQuantities,
    c: &PhysicalConstants,
    dt: f64,
    convention: ThermalConvention,
) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MtjError::InvalidStep(dt));
    }
    let mu0 = match convention {
        ThermalConvention::Mu0Consistent => c.mu0,
        ThermalConvention::Literal => 1.0,
    };
    let num = 2.0 * c.kb * params.temperature * params.alpha;
    let den = derived.gamma_prime * mu0 * params.ms * params.volume * dt;
    Ok((num / den).sqrt())
}

/// Draws the Brownian field for step `step` of a noise stream.
pub fn h_thermal_sample(noise: &mut NoiseStream, step: u64, sigma: f64) -> FieldVector {
    if sigma == 0.0 {
        return Vec3::ZERO;
    }
    noise.normals3(step) * sigma
}

/// Deterministic thermal surrogate `c_f σ(dt_ref) φ̂` at the current state.
pub fn h_fictitious(
    params: &DeviceParams,
    derived: &DerivedQuantities,
    c: &PhysicalConstants,
    mode: &ThermalMode,
    state: &MagState,
) -> Result<FieldVector> {
    let sigma = thermal_sigma(params, derived, c, mode.dt_ref, mode.convention)?;
    Ok(state.phi_hat() * (mode.c_f * sigma))
}

/// Drive quantities sampled at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveSample {
    pub current: f64,
    pub resistance: f64,
    pub h_ext: FieldVector,
}

/// Total effective field.
pub fn h_eff(
    state: &MagState,
    drive: &DriveSample,
    params: &DeviceParams,
    c: &PhysicalConstants,
    thermal: ThermalField,
) -> FieldVector {
    let mut h = drive.h_ext + h_uniaxial(state, params, c) + h_demag(state, params);
    if params.xi != 0.0 && drive.current != 0.0 {
        h = h - h_vcma(state, drive.current, drive.resistance, params, c);
    }
    match thermal {
        ThermalField::None => h,
        ThermalField::Sample(s) => h + s,
        ThermalField::Fictitious(mag) => h + state.phi_hat() * mag,
    }
}

/// Same as [`h_eff`] but from a Cartesian unit vector, for the Cartesian
/// integrators. Fictitious fields are not supported here (they need φ̂).
pub fn h_eff_cartesian(
    m: Vec3,
    drive: &DriveSample,
    params: &DeviceParams,
    c: &PhysicalConstants,
    sample: FieldVector,
) -> FieldVector {
    let huni = Vec3::new(0.0, 0.0, params.h_uniaxial_coeff(c) * m.z);
    let hdem = -params.ms * params.demag.hadamard(m);
    let mut h = drive.h_ext + huni + hdem + sample;
    if params.xi != 0.0 && drive.current != 0.0 {
        let k = 2.0 * params.xi * drive.current * drive.resistance
            / (params.t_fl * params.t_ox * c.mu0 * params.ms);
        h = h - Vec3::new(0.0, 0.0, k * m.z);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CODATA_2018;
    use crate::device::derive;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn dev() -> DeviceParams {
        DeviceParams::validation_cylinder()
    }

    #[test]
    fn uniaxial_examples() {
        let c = CODATA_2018;
        let p = dev();
        // cos(π/2) is 6e-17 in floating point, not 0
        assert!(h_uniaxial(&MagState::new(FRAC_PI_2, 0.3), &p, &c).norm() < 1e-9);
        // independent hand arithmetic: 2e-3 / (1e-9 · μ0 · 1.2e6)
        let expected: f64 = 2.0e-3 / (1.0e-9 * 1.256_637_062_12e-6 * 1.2e6);
        assert!((expected - 1.326e6).abs() / 1.326e6 < 1e-3);
        let north = h_uniaxial(&MagState::north(), &p, &c);
        assert!((north.z - expected).abs() / expected < 1e-14);
        assert_eq!((north.x, north.y), (0.0, 0.0));
        let south = h_uniaxial(&MagState::south(), &p, &c);
        assert!((south.z + expected).abs() / expected < 1e-14);
    }

    #[test]
    fn demag_examples() {
        let mut p = dev();
        p.demag = Vec3::Z;
        let h = h_demag(&MagState::north(), &p);
        assert_eq!(h, Vec3::new(0.0, 0.0, -p.ms));

        p.demag = Vec3::new(1.0, 1.0, 1.0) / 3.0;
        for (t, f) in [(0.3, 1.0), (2.0, 4.0), (FRAC_PI_2, 0.0)] {
            let s = MagState::new(t, f);
            let h = h_demag(&s, &p);
            assert!((h + s.cartesian() * (p.ms / 3.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn vcma_examples() {
        let c = CODATA_2018;
        let mut p = dev();
        assert_eq!(h_vcma(&MagState::north(), 0.0, 2e3, &p, &c).z, 0.0);
        assert_eq!(h_vcma(&MagState::north(), 35e-6, 2e3, &p, &c).z, 0.0);
        p.xi = 1.0e-4;
        let h = h_vcma(&MagState::north(), 35e-6, 2e3, &p, &c);
        let expected = 2.0 * 1.0e-4 * 35e-6 * 2e3 / (1e-9 * 1e-9 * c.mu0 * 1.2e6);
        assert!((h.z - expected).abs() / expected < 1e-14);
        // subtracted inside H_eff
        let s = MagState::north();
        let drive = DriveSample { current: 35e-6, resistance: 2e3, h_ext: Vec3::ZERO };
        let full = h_eff(&s, &drive, &p, &c, ThermalField::None);
        let nov = h_eff(&s, &DriveSample { current: 0.0, ..drive }, &p, &c, ThermalField::None);
        assert!(((nov - full).z - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn h_eff_at_pole_is_axial() {
        let c = CODATA_2018;
        let p = dev();
        let h = h_eff(&MagState::north(), &DriveSample::default(), &p, &c, ThermalField::None);
        let expected = p.h_uniaxial_coeff(&c) - p.ms * p.demag.z;
        assert_eq!((h.x, h.y), (0.0, 0.0));
        assert!((h.z - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn external_field_superposes() {
        let c = CODATA_2018;
        let p = dev();
        let s = MagState::new(0.7, 1.1);
        let base = h_eff(&s, &DriveSample::default(), &p, &c, ThermalField::None);
        let d = DriveSample { h_ext: Vec3::new(0.0, 0.0, 1234.5), ..Default::default() };
        let with = h_eff(&s, &d, &p, &c, ThermalField::None);
        assert_eq!(with - base, Vec3::new(0.0, 0.0, 1234.5));
    }

    #[test]
    fn superposition_of_components() {
        let c = CODATA_2018;
        let mut p = dev();
        p.xi = 3.0e-5;
        let s = MagState::new(1.2, 4.0);
        let d = DriveSample { current: -40e-6, resistance: 3.1e3, h_ext: Vec3::new(10.0, -20.0, 5.0) };
        let th = Vec3::new(1.0, 2.0, 3.0);
        let sum = d.h_ext + h_uniaxial(&s, &p, &c) + h_demag(&s, &p)
            - h_vcma(&s, d.current, d.resistance, &p, &c)
            + th;
        let h = h_eff(&s, &d, &p, &c, ThermalField::Sample(th));
        assert!((h - sum).norm() <= 1e-9 * sum.norm());
        let hc = h_eff_cartesian(s.cartesian(), &d, &p, &c, th);
        assert!((hc - sum).norm() <= 1e-9 * sum.norm());
    }

    #[test]
    fn zero_temperature_thermal_is_silent() {
        let c = CODATA_2018;
        let mut p = dev();
        p.temperature = 0.0;
        let d = derive(&p, &c).unwrap();
        let sigma = thermal_sigma(&p, &d, &c, 1e-12, ThermalConvention::Mu0Consistent).unwrap();
        assert_eq!(sigma, 0.0);
        let mut noise = NoiseStream::new(7, 0);
        let s = MagState::new(0.4, 0.1);
        let sample = h_thermal_sample(&mut noise, 0, sigma);
        assert_eq!(sample, Vec3::ZERO);
        let off = h_eff(&s, &DriveSample::default(), &p, &c, ThermalField::None);
        let sto = h_eff(&s, &DriveSample::default(), &p, &c, ThermalField::Sample(sample));
        assert_eq!(off, sto);
    }

    #[test]
    fn thermal_step_must_be_positive() {
        let c = CODATA_2018;
        let p = dev();
        let d = derive(&p, &c).unwrap();
        assert!(thermal_sigma(&p, &d, &c, 0.0, ThermalConvention::Mu0Consistent).is_err());
        assert!(thermal_sigma(&p, &d, &c, -1e-12, ThermalConvention::Mu0Consistent).is_err());
    }

    #[test]
    fn literal_convention_drops_mu0() {
        let c = CODATA_2018;
        let p = dev();
        let d = derive(&p, &c).unwrap();
        let a = thermal_sigma(&p, &d, &c, 1e-12, ThermalConvention::Mu0Consistent).unwrap();
        let b = thermal_sigma(&p, &d, &c, 1e-12, ThermalConvention::Literal).unwrap();
        assert!((b / a - c.mu0.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fictitious_field_examples() {
        let c = CODATA_2018;
        let p = dev();
        let d = derive(&p, &c).unwrap();
        let s = MagState::new(0.3, 2.0);
        assert_eq!(h_fictitious(&p, &d, &c, &ThermalMode::fictitious(0.0), &s).unwrap().norm(), 0.0);
        let mode = ThermalMode::fictitious(0.25);
        let h = h_fictitious(&p, &d, &c, &mode, &s).unwrap();
        let sigma = thermal_sigma(&p, &d, &c, 1e-12, ThermalConvention::Mu0Consistent).unwrap();
        assert!((h.norm() - 0.25 * sigma).abs() < 1e-12 * sigma);
    }

    #[test]
    fn fields_finite_at_poles() {
        let c = CODATA_2018;
        let mut p = dev();
        p.xi = 1e-4;
        let d = derive(&p, &c).unwrap();
        let mode = ThermalMode::fictitious(0.5);
        for s in [MagState::north(), MagState::south(), MagState::new(PI, 1.0)] {
            let mag = mode.c_f * thermal_sigma(&p, &d, &c, mode.dt_ref, mode.convention).unwrap();
            let drive = DriveSample { current: 50e-6, resistance: 3e3, h_ext: Vec3::X };
            assert!(h_eff(&s, &drive, &p, &c, ThermalField::Fictitious(mag)).is_finite());
        }
    }

    proptest::proptest! {
        #[test]
        fn fictitious_field_is_tangent(theta in 0.0..PI, phi in 0.0..std::f64::consts::TAU, cf in -2.0..2.0f64) {
            let c = CODATA_2018;
            let p = dev();
            let d = derive(&p, &c).unwrap();
            let s = MagState::new(theta, phi);
            let h = h_fictitious(&p, &d, &c, &ThermalMode::fictitious(cf), &s).unwrap();
            proptest::prop_assert!(h.dot(s.cartesian()).abs() <= 1e-10 * h.norm().max(1.0));
        }
    }
}
