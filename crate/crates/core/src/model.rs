//! A device under a stimulus, bundled for right-hand-side evaluation.

use crate::conduction::{instantaneous_current, ConductionModel, Drive, DriveKind};
use crate::constants::PhysicalConstants;
use crate::device::{derive, DerivedQuantities, DeviceParams};
use crate::dynamics::{llgs_rhs_cartesian, llgs_rhs_spherical, stt_coefficients_at, WindowConfig, WindowGate};
use crate::error::{MtjError, Result};
use crate::fields::{h_eff, h_eff_cartesian, thermal_sigma, DriveSample, ThermalField, ThermalKind, ThermalMode};
use crate::state::{state_from_cartesian, MagState};
use crate::vec3::Vec3;

#[derive(Debug, Clone)]
pub struct Model {
    pub params: DeviceParams,
    pub constants: PhysicalConstants,
    pub derived: DerivedQuantities,
    pub conduction: ConductionModel,
    pub drive: Drive,
    pub thermal: ThermalMode,
    pub window: WindowConfig,
    /// Fictitious-field magnitude c_f σ(dt_ref), A/m; zero unless in that mode.
    h_fth: f64,
}

impl Model {
    /// Validates every part and resolves derived quantities. `window_c_w`
    /// enables the Tukey window with edge c_w θ₀; it cannot be combined with
    /// the fictitious field.
    pub fn new(
        params: DeviceParams,
        constants: PhysicalConstants,
        conduction: ConductionModel,
        drive: Drive,
        thermal: ThermalMode,
        window_c_w: Option<f64>,
    ) -> Result<Self> {
        params.validate()?;
        conduction.validate()?;
        drive.validate()?;
        thermal.validate()?;
        if params.lambda_stt == 0.0 {
            return Err(MtjError::DegenerateTorque {
                denominator: 0.0,
                m_dot_p: 1.0,
                lambda: 0.0,
            });
        }
        let derived = derive(&params, &constants)?;
        let window = match window_c_w {
            Some(c_w) => {
                if thermal.mode == ThermalKind::Fictitious {
                    return Err(MtjError::InvalidParams(
                        "the window and the fictitious field are mutually exclusive".into(),
                    ));
                }
                WindowConfig::new(c_w, derived.theta0)?
            }
            None => WindowConfig::disabled(),
        };
        let h_fth = if thermal.mode == ThermalKind::Fictitious {
            thermal.c_f * thermal_sigma(&params, &derived, &constants, thermal.dt_ref, thermal.convention)?
        } else {
            0.0
        };
        Ok(Model {
            params,
            constants,
            derived,
            conduction,
            drive,
            thermal,
            window,
            h_fth,
        })
    }

    /// Cosine-TMR conduction from the device's own r_p/r_ap.
    pub fn simple(params: DeviceParams, drive: Drive, thermal: ThermalMode, window_c_w: Option<f64>) -> Result<Self> {
        let conduction = ConductionModel::cosine(params.r_p, params.r_ap)?;
        Self::new(params, PhysicalConstants::default(), conduction, drive, thermal, window_c_w)
    }

    pub fn with_drive(&self, drive: Drive) -> Result<Self> {
        drive.validate()?;
        Ok(Model { drive, ..self.clone() })
    }

    pub fn with_window_gate(mut self, gate: WindowGate) -> Self {
        self.window.gate = gate;
        self
    }

    /// Same device and drive in a different thermal/window mode; the window
    /// gate carries over.
    pub fn with_mode(&self, thermal: ThermalMode, window_c_w: Option<f64>) -> Result<Self> {
        let m = Model::new(
            self.params.clone(),
            self.constants,
            self.conduction.clone(),
            self.drive.clone(),
            thermal,
            window_c_w,
        )?;
        Ok(m.with_window_gate(self.window.gate))
    }

    pub fn fictitious_magnitude(&self) -> f64 {
        self.h_fth
    }

    /// Per-component thermal-field standard deviation for a step `dt`.
    pub fn thermal_sigma(&self, dt: f64) -> Result<f64> {
        thermal_sigma(&self.params, &self.derived, &self.constants, dt, self.thermal.convention)
    }

    pub fn sample(&self, t: f64, state: &MagState) -> DriveSample {
        self.drive.sample(t, state, &self.conduction, self.params.temperature)
    }

    /// (dθ/dt, dφ/dt). `noise` is a held Brownian sample, if any.
    pub fn rhs_spherical(&self, t: f64, state: &MagState, noise: Option<Vec3>) -> Result<(f64, f64)> {
        let drive = self.sample(t, state);
        let thermal = match noise {
            Some(s) => ThermalField::Sample(s),
            None if self.h_fth != 0.0 => ThermalField::Fictitious(self.h_fth),
            None => ThermalField::None,
        };
        let m = state.cartesian();
        let h = h_eff(state, &drive, &self.params, &self.constants, thermal);
        let torque = stt_coefficients_at(drive.current, m, &self.params, &self.constants)?;
        Ok(llgs_rhs_spherical(state, h, &torque, &self.params, &self.derived, &self.window))
    }

    /// dm/dt for a Cartesian unit vector. The fictitious field and window are
    /// defined in the spherical frame and are not available here.
    pub fn rhs_cartesian(&self, t: f64, m: Vec3, noise: Vec3) -> Result<Vec3> {
        let source = self.drive.source(t);
        let needs_r = self.drive.kind == DriveKind::Voltage || self.params.xi != 0.0;
        let (current, resistance) = if needs_r {
            let s = state_from_cartesian(m)?;
            instantaneous_current(self.drive.kind, source, &s, &self.conduction, self.params.temperature)
        } else {
            (source, 0.0)
        };
        let drive = DriveSample {
            current,
            resistance,
            h_ext: self.drive.field(t),
        };
        let h = h_eff_cartesian(m, &drive, &self.params, &self.constants, noise);
        let torque = stt_coefficients_at(current, m, &self.params, &self.constants)?;
        Ok(llgs_rhs_cartesian(m, h, &torque, &self.params, &self.derived))
    }
}
