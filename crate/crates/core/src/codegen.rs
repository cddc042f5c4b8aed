//! Verilog-A emission of the spherical compact model.
//!
//! The emitted module integrates θ with `idt` under a parameterized absolute
//! tolerance and φ with a single `idtmod` wrapping at 2π. Correctness is
//! checked structurally: [`lint`] and [`parse_parameters`] read the text back.

use crate::calibration::{CalibrationResult, SurrogateKind};
use crate::conduction::{ConductionKind, ConductionModel, LookupTable};
use crate::constants::PhysicalConstants;
use crate::device::DeviceParams;
use crate::dynamics::{WindowGate, THETA_MIN};
use crate::error::{MtjError, Result};
use crate::fields::ThermalConvention;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    #[default]
    SphericalIdt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateOptions {
    pub window: bool,
    pub fictitious: bool,
    pub window_gate: WindowGate,
    pub vcma: bool,
    pub conduction: ConductionModel,
    pub convention: ThermalConvention,
    /// Reference step frozen into the fictitious-field magnitude (s).
    pub dt_ref: f64,
    /// Corner selected by default.
    pub corner: String,
    pub theta_abstol: f64,
    pub phi_abstol: f64,
    /// Initial state.
    pub theta_init: f64,
    pub phi_init: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTemplate {
    pub id: TemplateId,
    pub module_name: String,
    pub options: TemplateOptions,
}

impl ModelTemplate {
    /// Spherical template for `kind` with cosine conduction from the device.
    pub fn for_surrogate(kind: SurrogateKind, params: &DeviceParams, corner: &str) -> Result<Self> {
        Ok(ModelTemplate {
            id: TemplateId::SphericalIdt,
            module_name: "mtj_sllgs".into(),
            options: TemplateOptions {
                window: kind == SurrogateKind::Window,
                fictitious: kind == SurrogateKind::Fictitious,
                window_gate: WindowGate::default(),
                vcma: params.xi != 0.0,
                conduction: ConductionModel::cosine(params.r_p, params.r_ap)?,
                convention: ThermalConvention::default(),
                dt_ref: 1e-12,
                corner: corner.into(),
                theta_abstol: 1e-6,
                phi_abstol: 1e-6,
                theta_init: 0.0,
                phi_init: 0.0,
            },
        })
    }

    pub fn surrogate(&self) -> Result<SurrogateKind> {
        match (self.options.window, self.options.fictitious) {
            (true, false) => Ok(SurrogateKind::Window),
            (false, true) => Ok(SurrogateKind::Fictitious),
            _ => Err(MtjError::InvalidTemplate(
                "exactly one thermal surrogate (window or fictitious) must be enabled".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.surrogate()?;
        self.options.conduction.validate()?;
        let o = &self.options;
        if !is_identifier(&self.module_name) {
            return Err(MtjError::InvalidTemplate(format!("bad module name '{}'", self.module_name)));
        }
        for (name, v) in [("dt_ref", o.dt_ref), ("theta_abstol", o.theta_abstol), ("phi_abstol", o.phi_abstol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MtjError::InvalidTemplate(format!("{name} must be positive, got {v}")));
            }
        }
        if !(o.theta_init.is_finite() && o.phi_init.is_finite()) {
            return Err(MtjError::InvalidTemplate("initial state must be finite".into()));
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

/// Shortest round-trip text for a real parameter.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Names of the emitted device parameters, in emission order.
pub const DEVICE_PARAMETERS: [&str; 21] = [
    "ms", "alpha", "gamma", "p_pol", "lambda_stt", "eps_prime", "ki", "xi", "t_fl", "t_ox", "diameter",
    "volume", "demag_x", "demag_y", "demag_z", "mp_x", "mp_y", "mp_z", "temperature", "r_p", "r_ap",
];

fn device_values(p: &DeviceParams) -> [f64; 21] {
    [
        p.ms,
        p.alpha,
        p.gamma,
        p.p,
        p.lambda_stt,
        p.eps_prime,
        p.ki,
        p.xi,
        p.t_fl,
        p.t_ox,
        p.diameter,
        p.volume,
        p.demag.x,
        p.demag.y,
        p.demag.z,
        p.m_p.x,
        p.m_p.y,
        p.m_p.z,
        p.temperature,
        p.r_p,
        p.r_ap,
    ]
}

fn emit_pwl_function(out: &mut String, name: &str, table: &LookupTable) {
    let pts: Vec<(f64, f64)> = table.points().collect();
    let _ = writeln!(out, "  analog function real {name};");
    let _ = writeln!(out, "    input x;");
    let _ = writeln!(out, "    real x;");
    let _ = writeln!(out, "    begin");
    let (x0, y0) = pts[0];
    let _ = writeln!(out, "      if (x <= {}) {name} = {};", num(x0), num(y0));
    for w in pts.windows(2) {
        let ((xa, ya), (xb, yb)) = (w[0], w[1]);
        let _ = writeln!(
            out,
            "      else if (x <= {}) {name} = {} + ({}) * (x - {}) / ({});",
            num(xb),
            num(ya),
            num(yb - ya),
            num(xa),
            num(xb - xa)
        );
    }
    let (_, yl) = pts[pts.len() - 1];
    let _ = writeln!(out, "      else {name} = {};", num(yl));
    let _ = writeln!(out, "    end");
    let _ = writeln!(out, "  endfunction");
    out.push('\n');
}

/// Renders the compact model. Output depends only on the inputs.
pub fn emit_model(params: &DeviceParams, corners: &CalibrationResult, template: &ModelTemplate) -> Result<String> {
    emit_model_with(params, &PhysicalConstants::default(), corners, template)
}

pub fn emit_model_with(
    params: &DeviceParams,
    constants: &PhysicalConstants,
    corners: &CalibrationResult,
    template: &ModelTemplate,
) -> Result<String> {
    params.validate()?;
    template.validate()?;
    let kind = template.surrogate()?;
    if corners.corners.is_empty() {
        return Err(MtjError::InvalidTemplate("no calibrated corners".into()));
    }
    if corners.kind != kind {
        return Err(MtjError::InvalidTemplate(format!(
            "template uses the {kind:?} surrogate but the corners were calibrated for {:?}",
            corners.kind
        )));
    }
    let o = &template.options;
    let names: Vec<&String> = corners.corners.keys().collect();
    let selected = names
        .iter()
        .position(|n| **n == o.corner)
        .ok_or_else(|| MtjError::MissingCorner(o.corner.clone()))?;
    for n in &names {
        if !is_identifier(n) {
            return Err(MtjError::InvalidTemplate(format!("corner name '{n}' is not an identifier")));
        }
    }
    let coef = match kind {
        SurrogateKind::Window => "c_w",
        SurrogateKind::Fictitious => "c_f",
    };

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "// {}: macrospin MTJ, s-LLGS in spherical coordinates", template.module_name);
    let _ = writeln!(w, "// generated by mtj-core {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(w, "// device digest:  sha256:{}", sha256_hex(format!("{params:?}|{constants:?}").as_bytes()));
    let _ = writeln!(w, "// corners digest: sha256:{}", sha256_hex(format!("{corners:?}").as_bytes()));
    let _ = writeln!(w, "// corners calibrated against ensemble {}", corners.provenance.ensemble_digest);
    let _ = writeln!(
        w,
        "// thermal surrogate: {}",
        match kind {
            SurrogateKind::Window => "tukey window",
            SurrogateKind::Fictitious => "fictitious field",
        }
    );
    w.push('\n');
    let _ = writeln!(w, "`include \"constants.vams\"");
    let _ = writeln!(w, "`include \"disciplines.vams\"");
    w.push('\n');
    let _ = writeln!(w, "module {}(p, n);", template.module_name);
    let _ = writeln!(w, "  inout p, n;");
    let _ = writeln!(w, "  electrical p, n;");
    w.push('\n');
    let _ = writeln!(w, "  // device (SI)");
    for (name, v) in DEVICE_PARAMETERS.iter().zip(device_values(params)) {
        let _ = writeln!(w, "  parameter real {name} = {};", num(v));
    }
    w.push('\n');
    let _ = writeln!(w, "  // physical constants");
    let _ = writeln!(w, "  parameter real hbar = {};", num(constants.hbar));
    let _ = writeln!(w, "  parameter real mu0 = {};", num(constants.mu0));
    let _ = writeln!(w, "  parameter real q_e = {};", num(constants.e));
    let _ = writeln!(w, "  parameter real k_b = {};", num(constants.kb));
    w.push('\n');
    let _ = writeln!(w, "  // external field (A/m)");
    let _ = writeln!(w, "  parameter real hext_x = 0.0;");
    let _ = writeln!(w, "  parameter real hext_y = 0.0;");
    let _ = writeln!(w, "  parameter real hext_z = 0.0;");
    w.push('\n');
    let _ = writeln!(w, "  // integration");
    let _ = writeln!(w, "  parameter real theta_abstol = {};", num(o.theta_abstol));
    let _ = writeln!(w, "  parameter real phi_abstol = {};", num(o.phi_abstol));
    let _ = writeln!(w, "  parameter real theta_min = {};", num(THETA_MIN));
    let _ = writeln!(w, "  parameter real theta_init = {};", num(o.theta_init));
    let _ = writeln!(w, "  parameter real phi_init = {};", num(o.phi_init));
    if o.fictitious {
        let _ = writeln!(w, "  parameter real dt_ref = {};", num(o.dt_ref));
    }
    w.push('\n');
    let _ = writeln!(w, "  // calibrated corners");
    for (i, (name, fit)) in corners.corners.iter().enumerate() {
        let _ = writeln!(
            w,
            "  parameter real {coef}_{name} = {}; // {i}: p{} of switching time",
            num(fit.coefficient),
            fit.percentile * 100.0
        );
    }
    let _ = writeln!(
        w,
        "  parameter integer corner = {selected} from [0:{}];",
        names.len() - 1
    );
    w.push('\n');

    let _ = writeln!(w, "  real theta, phi, st, ct, sp, cp, mx, my, mz;");
    let _ = writeln!(w, "  real r_mtj, v_mtj, i_mtj;");
    let _ = writeln!(w, "  real hx, hy, hz, h_phi, {coef}_sel;");
    let _ = writeln!(w, "  real gp, l2, mdotp, beta, eps, ka, kb_;");
    let _ = writeln!(w, "  real mxh_x, mxh_y, mxh_z, mmh_x, mmh_y, mmh_z;");
    let _ = writeln!(w, "  real a_x, a_y, a_z, b_x, b_y, b_z, f_x, f_y, f_z;");
    let _ = writeln!(w, "  real dtheta, dphi;");
    w.push('\n');

    if o.window {
        let _ = writeln!(w, "  analog function real tukey;");
        let _ = writeln!(w, "    input th, th0p;");
        let _ = writeln!(w, "    real th, th0p, t;");
        let _ = writeln!(w, "    begin");
        let _ = writeln!(w, "      t = (th > `M_PI / 2) ? `M_PI - th : th;");
        let _ = writeln!(w, "      if (t < th0p) tukey = 0.0;");
        let _ = writeln!(
            w,
            "      else if (t - th0p < 0.25 * th0p) tukey = 0.5 - 0.5 * cos(4 * `M_PI * (t - th0p) / th0p);"
        );
        let _ = writeln!(w, "      else tukey = 1.0;");
        let _ = writeln!(w, "    end");
        let _ = writeln!(w, "  endfunction");
        w.push('\n');
    }
    let c = &o.conduction;
    if c.kind == ConductionKind::TableLookup {
        let table = c
            .r_table
            .as_ref()
            .ok_or_else(|| MtjError::InvalidTemplate("table conduction without a table".into()))?;
        emit_pwl_function(w, "r_theta", table);
    }
    if let Some(t) = &c.v_dep {
        emit_pwl_function(w, "r_vdep", t);
    }
    if let Some(t) = &c.t_dep {
        emit_pwl_function(w, "r_tdep", t);
    }

    let _ = writeln!(w, "  analog begin");
    let _ = writeln!(w, "    // corner select");
    let _ = writeln!(w, "    case (corner)");
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(w, "      {i}: {coef}_sel = {coef}_{name};");
    }
    let _ = writeln!(w, "      default: {coef}_sel = {coef}_{};", names[selected]);
    let _ = writeln!(w, "    endcase");
    w.push('\n');
    let _ = writeln!(w, "    st = sin(theta);");
    let _ = writeln!(w, "    ct = cos(theta);");
    let _ = writeln!(w, "    sp = sin(phi);");
    let _ = writeln!(w, "    cp = cos(phi);");
    let _ = writeln!(w, "    mx = st * cp;");
    let _ = writeln!(w, "    my = st * sp;");
    let _ = writeln!(w, "    mz = ct;");
    w.push('\n');
    let _ = writeln!(w, "    // conduction");
    let _ = writeln!(w, "    v_mtj = V(p, n);");
    match c.kind {
        ConductionKind::CosineTmr => {
            let _ = writeln!(
                w,
                "    r_mtj = 1.0 / (0.5 * (1.0 / r_p + 1.0 / r_ap) + 0.5 * (1.0 / r_p - 1.0 / r_ap) * mz);"
            );
        }
        ConductionKind::TableLookup => {
            let _ = writeln!(w, "    r_mtj = r_theta(theta);");
        }
    }
    if c.v_dep.is_some() {
        let _ = writeln!(w, "    r_mtj = r_mtj * r_vdep(abs(v_mtj));");
    }
    if c.t_dep.is_some() {
        let _ = writeln!(w, "    r_mtj = r_mtj * r_tdep(temperature);");
    }
    let _ = writeln!(w, "    i_mtj = v_mtj / r_mtj;");
    let _ = writeln!(w, "    I(p, n) <+ i_mtj;");
    w.push('\n');
    let _ = writeln!(w, "    // effective field (A/m)");
    let _ = writeln!(w, "    hx = hext_x - ms * demag_x * mx;");
    let _ = writeln!(w, "    hy = hext_y - ms * demag_y * my;");
    let _ = writeln!(w, "    hz = hext_z + 2 * ki / (t_fl * mu0 * ms) * mz - ms * demag_z * mz;");
    if o.vcma {
        let _ = writeln!(w, "    hz = hz - 2 * xi * v_mtj / (t_fl * t_ox * mu0 * ms) * mz;");
    }
    if o.fictitious {
        let radicand = match o.convention {
            ThermalConvention::Mu0Consistent => "2 * k_b * temperature * alpha / (gp * mu0 * ms * volume * dt_ref)",
            ThermalConvention::Literal => "2 * k_b * temperature * alpha / (gp * ms * volume * dt_ref)",
        };
        let _ = writeln!(w, "    gp = gamma * mu0 / (1 + alpha * alpha);");
        let _ = writeln!(w, "    h_phi = {coef}_sel * sqrt({radicand});");
        let _ = writeln!(w, "    hx = hx - h_phi * sp;");
        let _ = writeln!(w, "    hy = hy + h_phi * cp;");
    } else {
        let _ = writeln!(w, "    gp = gamma * mu0 / (1 + alpha * alpha);");
        let _ = writeln!(w, "    h_phi = 0.0;");
    }
    w.push('\n');
    let _ = writeln!(w, "    // spin transfer");
    let _ = writeln!(w, "    l2 = lambda_stt * lambda_stt;");
    let _ = writeln!(w, "    mdotp = mx * mp_x + my * mp_y + mz * mp_z;");
    let _ = writeln!(w, "    beta = abs(hbar / (mu0 * q_e)) * i_mtj / (volume * ms);");
    let _ = writeln!(w, "    eps = p_pol * l2 / ((l2 + 1) + (l2 - 1) * mdotp);");
    let _ = writeln!(w, "    ka = gp * beta * (eps + alpha * eps_prime);");
    let _ = writeln!(w, "    kb_ = gp * beta * (eps_prime - alpha * eps);");
    w.push('\n');
    let _ = writeln!(w, "    // explicit Landau-Lifshitz right-hand side");
    let _ = writeln!(w, "    mxh_x = my * hz - mz * hy;");
    let _ = writeln!(w, "    mxh_y = mz * hx - mx * hz;");
    let _ = writeln!(w, "    mxh_z = mx * hy - my * hx;");
    let _ = writeln!(w, "    mmh_x = my * mxh_z - mz * mxh_y;");
    let _ = writeln!(w, "    mmh_y = mz * mxh_x - mx * mxh_z;");
    let _ = writeln!(w, "    mmh_z = mx * mxh_y - my * mxh_x;");
    let _ = writeln!(w, "    a_x = mp_x - mdotp * mx;");
    let _ = writeln!(w, "    a_y = mp_y - mdotp * my;");
    let _ = writeln!(w, "    a_z = mp_z - mdotp * mz;");
    let _ = writeln!(w, "    b_x = my * mp_z - mz * mp_y;");
    let _ = writeln!(w, "    b_y = mz * mp_x - mx * mp_z;");
    let _ = writeln!(w, "    b_z = mx * mp_y - my * mp_x;");
    let _ = writeln!(w, "    f_x = -gp * mxh_x - alpha * gp * mmh_x + ka * a_x - kb_ * b_x;");
    let _ = writeln!(w, "    f_y = -gp * mxh_y - alpha * gp * mmh_y + ka * a_y - kb_ * b_y;");
    let _ = writeln!(w, "    f_z = -gp * mxh_z - alpha * gp * mmh_z + ka * a_z - kb_ * b_z;");
    w.push('\n');
    let _ = writeln!(w, "    // projection on the local frame");
    let _ = writeln!(w, "    dtheta = f_x * ct * cp + f_y * ct * sp - f_z * st;");
    let _ = writeln!(w, "    dphi = (-f_x * sp + f_y * cp) / max(abs(st), sin(theta_min));");
    if o.window {
        let th0p = "c_w_sel * sqrt(2 * k_b * temperature / (mu0 * ms * (2 * ki / (t_fl * mu0 * ms) - ms * (demag_z - 0.5 * (demag_x + demag_y))) * volume))";
        match o.window_gate {
            WindowGate::Both => {
                let _ = writeln!(w, "    dtheta = dtheta * tukey(theta, {th0p});");
            }
            WindowGate::PoleWard => {
                let _ = writeln!(w, "    if ((theta > `M_PI / 2) ? (dtheta > 0) : (dtheta < 0))");
                let _ = writeln!(w, "      dtheta = dtheta * tukey(theta, {th0p});");
            }
        }
    }
    w.push('\n');
    let _ = writeln!(w, "    theta = idt(dtheta, theta_init, 0, theta_abstol);");
    let _ = writeln!(w, "    phi = idtmod(dphi, phi_init, 2 * `M_PI, 0, phi_abstol);");
    let _ = writeln!(w, "  end");
    let _ = writeln!(w, "endmodule");
    Ok(out)
}

/// Every `parameter real|integer NAME = VALUE` in `text`.
pub fn parse_parameters(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let l = line.trim();
        let rest = match l.strip_prefix("parameter real ").or_else(|| l.strip_prefix("parameter integer ")) {
            Some(r) => r,
            None => continue,
        };
        let (name, value) = rest
            .split_once('=')
            .ok_or_else(|| MtjError::InvalidTemplate(format!("malformed parameter line: {l}")))?;
        let value = value.split(';').next().unwrap_or("").trim();
        let value = value.split(" from ").next().unwrap_or("").trim();
        let v: f64 = value
            .parse()
            .map_err(|_| MtjError::InvalidTemplate(format!("unparsable value in: {l}")))?;
        out.insert(name.trim().to_string(), v);
    }
    Ok(out)
}

/// Rebuilds the device from an emitted parameter block.
pub fn params_from_emitted(text: &str) -> Result<DeviceParams> {
    let map = parse_parameters(text)?;
    let get = |k: &str| map.get(k).copied().ok_or_else(|| MtjError::InvalidTemplate(format!("parameter {k} missing")));
    Ok(DeviceParams {
        ms: get("ms")?,
        alpha: get("alpha")?,
        gamma: get("gamma")?,
        p: get("p_pol")?,
        lambda_stt: get("lambda_stt")?,
        eps_prime: get("eps_prime")?,
        ki: get("ki")?,
        xi: get("xi")?,
        t_fl: get("t_fl")?,
        t_ox: get("t_ox")?,
        diameter: get("diameter")?,
        volume: get("volume")?,
        demag: Vec3::new(get("demag_x")?, get("demag_y")?, get("demag_z")?),
        m_p: Vec3::new(get("mp_x")?, get("mp_y")?, get("mp_z")?),
        temperature: get("temperature")?,
        r_p: get("r_p")?,
        r_ap: get("r_ap")?,
    })
}

const KEYWORDS: &[&str] = &[
    "module", "endmodule", "inout", "input", "output", "electrical", "parameter", "real", "integer", "from",
    "analog", "begin", "end", "if", "else", "case", "endcase", "default", "function", "endfunction", "include",
    "sin", "cos", "sqrt", "abs", "max", "min", "exp", "ln", "idt", "idtmod", "V", "I", "inf",
];

/// Fixed-timestep constructs the model must not contain.
pub const FORBIDDEN: &[&str] = &["$bound_step", "bound_step(", "timer(", "$abstime"];

/// Structural problems found by [`lint`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LintReport {
    pub undeclared: Vec<String>,
    pub forbidden: Vec<String>,
    pub idtmod_count: usize,
    /// True when θ is integrated with `idt`.
    pub theta_idt: bool,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.undeclared.is_empty() && self.forbidden.is_empty() && self.idtmod_count == 1 && self.theta_idt
    }
}

fn strip_comment(line: &str) -> &str {
    line.split("//").next().unwrap_or("")
}

fn identifiers(code: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev = ' ';
    let mut in_string = false;
    let mut skip = false;
    for ch in code.chars().chain(std::iter::once(' ')) {
        if ch == '"' {
            in_string = !in_string;
        }
        if in_string {
            prev = ch;
            continue;
        }
        if ch.is_ascii_alphanumeric() || ch == '_' || ch == '$' {
            if cur.is_empty() {
                // macros and numeric literals (exponent letters included) are not symbols
                skip = prev == '`' || ch.is_ascii_digit() || prev == '.' || (prev.is_ascii_digit() && ch == 'e');
            }
            cur.push(ch);
        } else {
            if !cur.is_empty() && !skip && !cur.starts_with('$') {
                out.push(std::mem::take(&mut cur));
            }
            cur.clear();
        }
        prev = ch;
    }
    out
}

/// Checks declarations, integrator usage and forbidden constructs.
pub fn lint(text: &str) -> LintReport {
    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut report = LintReport::default();
    for raw in text.lines() {
        let line = strip_comment(raw).trim();
        let decl = ["parameter real ", "parameter integer ", "real ", "integer ", "electrical ", "inout ", "input "]
            .iter()
            .find_map(|p| line.strip_prefix(p));
        if let Some(rest) = decl {
            let names = rest.split('=').next().unwrap_or("").trim_end_matches(';');
            for n in names.split(',') {
                let n = n.trim().trim_end_matches(';');
                if !n.is_empty() {
                    declared.insert(n.to_string());
                }
            }
        }
        if let Some(rest) = line.strip_prefix("analog function real ") {
            declared.insert(rest.trim_end_matches(';').trim().to_string());
        }
        if let Some(rest) = line.strip_prefix("module ") {
            declared.insert(rest.split('(').next().unwrap_or("").trim().to_string());
        }
    }
    let mut undeclared = BTreeSet::new();
    for raw in text.lines() {
        let line = strip_comment(raw);
        for f in FORBIDDEN {
            if line.contains(f) {
                report.forbidden.push(f.to_string());
            }
        }
        report.idtmod_count += line.matches("idtmod(").count();
        let t = line.trim();
        if t.starts_with("theta") && t.contains("= idt(") {
            report.theta_idt = true;
        }
        if t.starts_with('`') {
            continue;
        }
        for id in identifiers(line) {
            if !KEYWORDS.contains(&id.as_str()) && !declared.contains(&id) {
                undeclared.insert(id);
            }
        }
    }
    report.undeclared = undeclared.into_iter().collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{CornerFit, Provenance};

    fn corners(kind: SurrogateKind) -> CalibrationResult {
        let mut c = BTreeMap::new();
        for (name, q, v) in [("best", 0.01, 0.05), ("mean", 0.5, 0.016), ("worst", 0.99, 0.0018)] {
            c.insert(
                name.to_string(),
                CornerFit {
                    coefficient: v,
                    percentile: q,
                    target_time: 1e-8,
                    achieved_time: 1e-8,
                    residual: 0.0,
                    iterations: 1,
                },
            );
        }
        CalibrationResult {
            kind,
            provenance: Provenance {
                ensemble_digest: "00".into(),
                master_seed: 1,
                n_runs: 10,
            },
            corners: c,
        }
    }

    #[test]
    fn identifier_scan_skips_literals_and_macros() {
        let ids = identifiers("x = 1.5e-3 * `M_PI + foo_2 * 2e6 + $abstime;");
        assert_eq!(ids, vec!["x", "foo_2"]);
    }

    #[test]
    fn lint_flags_undeclared_and_forbidden() {
        let text = "module m(p);\n electrical p;\n real a;\n analog begin\n a = b + 1;\n $bound_step(1e-12);\n end\nendmodule\n";
        let r = lint(text);
        assert_eq!(r.undeclared, vec!["b"]);
        assert_eq!(r.forbidden, vec!["$bound_step".to_string(), "bound_step(".to_string()]);
        assert!(!r.is_clean());
    }

    #[test]
    fn both_surrogates_rejected() {
        let p = DeviceParams::validation_cylinder();
        let mut t = ModelTemplate::for_surrogate(SurrogateKind::Window, &p, "mean").unwrap();
        t.options.fictitious = true;
        assert!(matches!(emit_model(&p, &corners(SurrogateKind::Window), &t), Err(MtjError::InvalidTemplate(_))));
        t.options.window = false;
        t.options.fictitious = false;
        assert!(t.validate().is_err());
    }

    #[test]
    fn missing_corner() {
        let p = DeviceParams::validation_cylinder();
        let t = ModelTemplate::for_surrogate(SurrogateKind::Fictitious, &p, "wer_1e-9").unwrap();
        assert!(matches!(
            emit_model(&p, &corners(SurrogateKind::Fictitious), &t),
            Err(MtjError::MissingCorner(_))
        ));
    }

    #[test]
    fn window_and_table_variants_lint_clean() {
        let p = DeviceParams::validation_cylinder();
        let mut t = ModelTemplate::for_surrogate(SurrogateKind::Window, &p, "worst").unwrap();
        t.options.vcma = true;
        t.options.conduction.kind = ConductionKind::TableLookup;
        t.options.conduction.r_table =
            Some(LookupTable::new(vec![(0.0, 2000.0), (1.5, 3000.0), (std::f64::consts::PI, 4000.0)]).unwrap());
        t.options.conduction.v_dep = Some(LookupTable::new(vec![(0.0, 1.0), (0.5, 0.8)]).unwrap());
        let text = emit_model(&p, &corners(SurrogateKind::Window), &t).unwrap();
        let r = lint(&text);
        assert!(r.is_clean(), "{r:?}");
        assert!(text.contains("r_theta(theta)"));
        assert!(text.contains("tukey("));
        assert!(text.contains("parameter integer corner = 2 from [0:2];"));
    }
}
