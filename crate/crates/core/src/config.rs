//! Scenario files (TOML) and dotted-path overrides.
//!
//! Every section rejects unknown keys. Relative CSV paths are resolved
//! against the directory of the config file when it is loaded, so a
//! resolved config written elsewhere still points at the same data.

use crate::calibration::{CalibrationOptions, CornerTarget, SurrogateKind};
use crate::conduction::{ConductionKind, ConductionModel, Drive, DriveKind, LookupTable};
use crate::constants::PhysicalConstants;
use crate::device::DeviceParams;
use crate::dynamics::WindowGate;
use crate::error::{MtjError, Result};
use crate::fields::ThermalMode;
use crate::model::Model;
use crate::montecarlo::{EnsembleConfig, InitialCondition, PulseSpec, Scenario, SweepKind};
use crate::solvers::{Side, SolverConfig};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Free-layer description. Volume and demagnetization factors default to
/// those of a cylinder of `diameter` × `t_fl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub ms: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub p: f64,
    pub ki: f64,
    pub t_fl: f64,
    pub t_ox: f64,
    pub diameter: f64,
    pub temperature: f64,
    #[serde(default = "one")]
    pub lambda_stt: f64,
    #[serde(default)]
    pub eps_prime: f64,
    #[serde(default)]
    pub xi: f64,
    #[serde(default = "default_r_p")]
    pub r_p: f64,
    #[serde(default = "default_r_ap")]
    pub r_ap: f64,
    #[serde(default = "default_m_p")]
    pub m_p: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demag: Option<[f64; 3]>,
}

fn one() -> f64 {
    1.0
}
fn default_r_p() -> f64 {
    2.0e3
}
fn default_r_ap() -> f64 {
    4.0e3
}
fn default_m_p() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl DeviceSection {
    pub fn validation_cylinder() -> Self {
        let p = DeviceParams::validation_cylinder();
        DeviceSection {
            ms: p.ms,
            alpha: p.alpha,
            gamma: p.gamma,
            p: p.p,
            ki: p.ki,
            t_fl: p.t_fl,
            t_ox: p.t_ox,
            diameter: p.diameter,
            temperature: p.temperature,
            lambda_stt: p.lambda_stt,
            eps_prime: p.eps_prime,
            xi: p.xi,
            r_p: p.r_p,
            r_ap: p.r_ap,
            m_p: [p.m_p.x, p.m_p.y, p.m_p.z],
            volume: None,
            demag: None,
        }
    }

    pub fn params(&self) -> Result<DeviceParams> {
        let mut p = DeviceParams::cylinder(
            self.ms,
            self.alpha,
            self.gamma,
            self.p,
            self.ki,
            self.t_fl,
            self.t_ox,
            self.diameter,
            self.temperature,
        );
        p.lambda_stt = self.lambda_stt;
        p.eps_prime = self.eps_prime;
        p.xi = self.xi;
        p.r_p = self.r_p;
        p.r_ap = self.r_ap;
        p.m_p = Vec3::new(self.m_p[0], self.m_p[1], self.m_p[2]);
        if let Some(v) = self.volume {
            p.volume = v;
        }
        if let Some(n) = self.demag {
            p.demag = Vec3::new(n[0], n[1], n[2]);
        }
        p.validate()?;
        Ok(p)
    }
}

/// Stimulus. At most one of `constant`, `pulses` and `waveform` may be set;
/// none means no source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    #[serde(default)]
    pub kind: DriveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// `[start, width, amplitude]` triples.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pulses: Vec<[f64; 3]>,
    #[serde(default)]
    pub edge: f64,
    /// `[t, value]` piecewise-linear points.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waveform: Vec<[f64; 2]>,
    /// `[t, hx, hy, hz]` piecewise-constant external field (A/m).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_ext: Vec<[f64; 4]>,
}

impl DriveSection {
    pub fn drive(&self) -> Result<Drive> {
        let set = [self.constant.is_some(), !self.pulses.is_empty(), !self.waveform.is_empty()];
        if set.iter().filter(|&&b| b).count() > 1 {
            return Err(MtjError::Config(
                "drive: set only one of constant, pulses, waveform".into(),
            ));
        }
        let mut d = if let Some(v) = self.constant {
            Drive {
                kind: self.kind,
                waveform: vec![(0.0, v)],
                h_ext: Vec::new(),
            }
        } else if !self.pulses.is_empty() {
            let p: Vec<(f64, f64, f64)> = self.pulses.iter().map(|x| (x[0], x[1], x[2])).collect();
            Drive::pulses(self.kind, &p, self.edge)?
        } else {
            Drive {
                kind: self.kind,
                waveform: self.waveform.iter().map(|x| (x[0], x[1])).collect(),
                h_ext: Vec::new(),
            }
        };
        d.h_ext = self.h_ext.iter().map(|x| (x[0], Vec3::new(x[1], x[2], x[3]))).collect();
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub enabled: bool,
    pub c_w: f64,
    pub gate: WindowGate,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection {
            enabled: false,
            c_w: 1.0,
            gate: WindowGate::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConductionSection {
    pub kind: ConductionKind,
    /// CSV of (θ rad, R Ω); required for `table_lookup`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_table: Option<String>,
    /// CSV of (|V| V, multiplier).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_dep: Option<String>,
    /// CSV of (T K, multiplier).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_dep: Option<String>,
}

impl ConductionSection {
    pub fn model(&self, params: &DeviceParams) -> Result<ConductionModel> {
        let load = |p: &Option<String>| p.as_ref().map(LookupTable::from_csv).transpose();
        let m = ConductionModel {
            kind: self.kind,
            r_p: params.r_p,
            r_ap: params.r_ap,
            r_table: load(&self.r_table)?,
            v_dep: load(&self.v_dep)?,
            t_dep: load(&self.t_dep)?,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WerSweepSection {
    pub pulse: PulseSpec,
    pub kind: SweepKind,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub surrogates: Vec<SurrogateKind>,
    pub targets: Vec<CornerTarget>,
    /// Replaces the per-surrogate default bracket when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fictitious_bracket: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_bracket: Option<(f64, f64)>,
    pub rel_tol: f64,
    pub accept_tol: f64,
    /// Pole the write leaves.
    pub pole: Side,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            surrogates: vec![SurrogateKind::Fictitious, SurrogateKind::Window],
            targets: vec![CornerTarget::best(), CornerTarget::mean(), CornerTarget::worst()],
            fictitious_bracket: None,
            window_bracket: None,
            rel_tol: 1e-4,
            accept_tol: 1e-2,
            pole: Side::Up,
        }
    }
}

impl CalibrationSection {
    pub fn options(&self, kind: SurrogateKind) -> CalibrationOptions {
        let mut o = CalibrationOptions::defaults_for(kind);
        let b = match kind {
            SurrogateKind::Fictitious => self.fictitious_bracket,
            SurrogateKind::Window => self.window_bracket,
        };
        if let Some(b) = b {
            o.bracket = b;
        }
        o.rel_tol = self.rel_tol;
        o.accept_tol = self.accept_tol;
        o
    }
}

/// Solver comparison against a reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Reference CSV (t, mx, my, mz, ...); computed with fixed-step RK4 at
    /// `reference_dt` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub reference_dt: f64,
    pub solvers: Vec<SolverConfig>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            reference: None,
            reference_dt: 1e-15,
            solvers: vec![SolverConfig::default()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodegenSection {
    pub module_name: String,
    pub surrogate: SurrogateKind,
    /// Corner file from `calibrate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corner_file: Option<String>,
    pub corner: String,
    pub theta_abstol: f64,
    pub phi_abstol: f64,
}

impl Default for CodegenSection {
    fn default() -> Self {
        CodegenSection {
            module_name: "mtj_sllgs".into(),
            surrogate: SurrogateKind::Fictitious,
            corner_file: None,
            corner: "mean".into(),
            theta_abstol: 1e-6,
            phi_abstol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub device: DeviceSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub thermal: ThermalMode,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub conduction: ConductionSection,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wer_sweep: Option<WerSweepSection>,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub codegen: CodegenSection,
}

/// Sets `path` (dotted) in `root` to `raw`, parsed as a TOML value when it
/// parses and as a bare string otherwise. Missing tables are created.
pub fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> Result<()> {
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(MtjError::Config(format!("bad override key '{path}'")));
    }
    let mut cur = root;
    for k in &keys[..keys.len() - 1] {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| MtjError::Config(format!("override '{path}': '{k}' is not inside a table")))?;
        cur = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| MtjError::Config(format!("override '{path}': parent is not a table")))?;
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| MtjError::Config(format!("override '{s}' is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl Config {
    /// Parses `text`, applies `overrides` in order, then deserializes.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut root: toml::Value = toml::from_str::<toml::Table>(text)
            .map(toml::Value::Table)
            .map_err(|e| MtjError::Config(e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut root, k, v)?;
        }
        let cfg: Config = root.try_into().map_err(|e: toml::de::Error| MtjError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config file; relative CSV paths become absolute.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MtjError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<String>| {
            if let Some(s) = p {
                let pb = PathBuf::from(&*s);
                if pb.is_relative() {
                    let abs = base.join(pb);
                    *s = std::path::absolute(&abs).unwrap_or(abs).to_string_lossy().into_owned();
                }
            }
        };
        fix(&mut self.conduction.r_table);
        fix(&mut self.conduction.v_dep);
        fix(&mut self.conduction.t_dep);
        fix(&mut self.validate.reference);
        fix(&mut self.codegen.corner_file);
    }

    fn check(&self) -> Result<()> {
        self.device.params()?;
        self.drive.drive()?;
        self.thermal.validate()?;
        self.solver.validate()?;
        if self.window.enabled && !(self.window.c_w > 0.0) {
            return Err(MtjError::Config(format!("window.c_w must be > 0, got {}", self.window.c_w)));
        }
        if self.ensemble.n_runs == 0 {
            return Err(MtjError::Config("ensemble.n_runs must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MtjError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<DeviceParams> {
        self.device.params()
    }

    pub fn model(&self) -> Result<Model> {
        let params = self.params()?;
        let conduction = self.conduction.model(&params)?;
        let window = self.window.enabled.then_some(self.window.c_w);
        let m = Model::new(
            params,
            PhysicalConstants::default(),
            conduction,
            self.drive.drive()?,
            self.thermal,
            window,
        )?;
        Ok(m.with_window_gate(self.window.gate))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            model: self.model()?,
            solver: self.solver.clone(),
            initial: self.initial,
        })
    }
}
