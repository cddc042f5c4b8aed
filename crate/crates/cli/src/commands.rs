use crate::Invocation;
use mtj_core::calibration::{calibrate, CornerLibrary, DeterministicCorner, Provenance, SurrogateKind};
use mtj_core::codegen::{emit_model_with, ModelTemplate, TemplateId, TemplateOptions};
use mtj_core::config::{parse_override, Config};
use mtj_core::fields::{ThermalKind, ThermalMode};
use mtj_core::montecarlo::{
    run_ensemble, wer_curve, write_runs_csv, write_summary_csv, write_wer_curve_csv, EnsembleConfig,
    EnsembleResult, Scenario,
};
use mtj_core::solvers::{rmse_mz, simulate, simulate_run, Scheme, SolverConfig, Trajectory};
use mtj_core::{MtjError, Result};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

/// Loads the config with CLI flags folded in as overrides, so the resolved
/// config alone reproduces the run.
fn load(inv: &Invocation) -> Result<Config> {
    let mut overrides = inv
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = inv.seed {
        overrides.push(("solver.seed".into(), seed.to_string()));
        overrides.push(("ensemble.master_seed".into(), seed.to_string()));
    }
    if let Some(w) = inv.workers {
        overrides.push(("ensemble.workers".into(), w.to_string()));
    }
    if !inv.config.is_file() {
        return Err(MtjError::Config(format!("config file {} not found", inv.config.display())));
    }
    let mut cfg = Config::load(&inv.config, &overrides)?;
    if inv.command == "transient" {
        if let Some(name) = &inv.corner {
            apply_corner(&mut cfg, name)?;
        }
    }
    if inv.command == "emit-model" {
        if let Some(name) = &inv.corner {
            cfg.codegen.corner = name.clone();
        }
    }
    Ok(cfg)
}

fn corner_library(cfg: &Config) -> Result<CornerLibrary> {
    let path = cfg
        .codegen
        .corner_file
        .as_ref()
        .ok_or_else(|| MtjError::Config("codegen.corner_file is not set".into()))?;
    let text = fs::read_to_string(path).map_err(|e| MtjError::Config(format!("cannot read {path}: {e}")))?;
    CornerLibrary::from_toml(&text)
}

/// Switches the scenario to the deterministic surrogate at corner `name`.
fn apply_corner(cfg: &mut Config, name: &str) -> Result<()> {
    let lib = corner_library(cfg)?;
    let kind = cfg.codegen.surrogate;
    let c = lib.coefficient(kind, name)?;
    match kind {
        SurrogateKind::Fictitious => {
            cfg.thermal = ThermalMode {
                c_f: c,
                mode: ThermalKind::Fictitious,
                ..cfg.thermal
            };
            cfg.window.enabled = false;
        }
        SurrogateKind::Window => {
            cfg.thermal.mode = ThermalKind::Off;
            cfg.window.enabled = true;
            cfg.window.c_w = c;
        }
    }
    Ok(())
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    fn new(inv: &Invocation, cfg: &Config) -> Self {
        let mut m = Manifest { entries: Vec::new() };
        m.add("command", inv.command);
        m.add("tool_version", env!("CARGO_PKG_VERSION"));
        m.add("config", "config.resolved.toml");
        m.add("rerun", &format!("mtjsim {} --config config.resolved.toml", inv.command));
        m.add("solver_seed", &cfg.solver.seed.to_string());
        m.add("master_seed", &cfg.ensemble.master_seed.to_string());
        m
    }

    fn add(&mut self, k: &str, v: &str) {
        self.entries.push((k.to_string(), v.to_string()));
    }

    fn write(&self, out: &Path) -> Result<()> {
        let mut t = toml::Table::new();
        for (k, v) in &self.entries {
            t.insert(k.clone(), toml::Value::String(v.clone()));
        }
        let text = toml::to_string(&t).map_err(|e| MtjError::Config(e.to_string()))?;
        fs::write(out.join("manifest.toml"), text)?;
        Ok(())
    }
}

pub fn run(inv: &Invocation) -> Result<()> {
    let cfg = load(inv)?;
    fs::create_dir_all(&inv.out)?;
    fs::write(inv.out.join("config.resolved.toml"), cfg.to_toml()?)?;
    let mut manifest = Manifest::new(inv, &cfg);
    match inv.command {
        "transient" => transient(&cfg, &inv.out, &mut manifest)?,
        "ensemble" => ensemble(&cfg, &inv.out, &mut manifest)?,
        "wer-sweep" => sweep(&cfg, &inv.out, &mut manifest)?,
        "calibrate" => calibration(&cfg, &inv.out, &mut manifest)?,
        "validate" => validate(&cfg, &inv.out, &mut manifest)?,
        "emit-model" => emit(&cfg, &inv.out, &mut manifest)?,
        other => return Err(MtjError::Config(format!("unknown command {other}"))),
    }
    manifest.write(&inv.out)
}

fn transient(cfg: &Config, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let sc = cfg.scenario()?;
    let init = sc.initial.resolve(&sc.model, sc.solver.seed, 0);
    let tr = simulate_run(&sc.model, &sc.solver, init, 0)?;
    tr.write_csv(create(out, "trajectory.csv")?)?;
    write_events(&tr, create(out, "events.csv")?)?;
    manifest.add("outputs", "trajectory.csv events.csv");
    manifest.add("rhs_evals", &tr.stats.rhs_evals.to_string());
    println!(
        "{} samples, {} events, {} accepted / {} rejected steps",
        tr.len(),
        tr.events.len(),
        tr.stats.accepted,
        tr.stats.rejected
    );
    Ok(())
}

fn write_events<W: Write>(tr: &Trajectory, mut w: W) -> Result<()> {
    writeln!(w, "t,from,to,t_leave,t_arrive,transition_time")?;
    for e in &tr.events {
        writeln!(
            w,
            "{:e},{:?},{:?},{:e},{:e},{:e}",
            e.t,
            e.from,
            e.to,
            e.t_leave,
            e.t_arrive,
            e.transition_time()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn ensemble_cfg(cfg: &Config) -> EnsembleConfig {
    cfg.ensemble
}

fn print_stats(res: &EnsembleResult) {
    let s = &res.stats;
    println!(
        "WER {:.4e} [{:.4e}, {:.4e}], {} of {} switched, median switching time {}",
        s.wer,
        s.wer_ci.0,
        s.wer_ci.1,
        s.n_switched,
        s.n_total,
        s.switch_times.p50.map_or("undefined".into(), |t| format!("{t:e} s"))
    );
}

fn ensemble(cfg: &Config, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let sc = cfg.scenario()?;
    let res = run_ensemble(&sc, &ensemble_cfg(cfg))?;
    write_summary_csv(create(out, "summary.csv")?, &res.stats)?;
    write_runs_csv(create(out, "runs.csv")?, &res.runs)?;
    manifest.add("outputs", "summary.csv runs.csv");
    manifest.add("ensemble_digest", &res.digest);
    print_stats(&res);
    Ok(())
}

fn sweep(cfg: &Config, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let ws = cfg
        .wer_sweep
        .as_ref()
        .ok_or_else(|| MtjError::Config("wer-sweep needs a [wer_sweep] section".into()))?;
    let sc = cfg.scenario()?;
    let curve = wer_curve(&sc, &ensemble_cfg(cfg), &ws.pulse, ws.kind, &ws.grid)?;
    write_wer_curve_csv(create(out, "wer.csv")?, &curve)?;
    manifest.add("outputs", "wer.csv");
    for p in &curve.points {
        println!("{:e}: WER {:.4e} [{:.4e}, {:.4e}]", p.value, p.stats.wer, p.stats.wer_ci.0, p.stats.wer_ci.1);
    }
    Ok(())
}

fn calibration(cfg: &Config, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let sc = cfg.scenario()?;
    let ens = ensemble_cfg(cfg);
    let res = run_ensemble(&sc, &ens)?;
    write_runs_csv(create(out, "runs.csv")?, &res.runs)?;
    print_stats(&res);
    let provenance = Provenance {
        ensemble_digest: res.digest.clone(),
        master_seed: ens.master_seed,
        n_runs: ens.n_runs,
    };
    let base = sc.model.with_mode(ThermalMode::off(), None)?;
    let solver = SolverConfig::adaptive(sc.solver.t_end);
    let mut lib = CornerLibrary::default();
    for &kind in &cfg.calibration.surrogates {
        let corner = DeterministicCorner {
            base: base.clone(),
            solver: solver.clone(),
            kind,
            pole: cfg.calibration.pole,
        };
        let result = calibrate(
            &corner,
            &cfg.calibration.targets,
            &res.runs,
            provenance.clone(),
            &cfg.calibration.options(kind),
        )?;
        for (name, fit) in &result.corners {
            println!(
                "{kind:?} {name}: coefficient {:.6e}, target {:e} s, achieved {:e} s, residual {:+.2e}",
                fit.coefficient, fit.target_time, fit.achieved_time, fit.residual
            );
        }
        lib.insert(&result);
    }
    fs::write(out.join("corners.toml"), lib.to_toml()?)?;
    manifest.add("outputs", "runs.csv corners.toml");
    manifest.add("ensemble_digest", &res.digest);
    Ok(())
}

fn validate(cfg: &Config, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let sc: Scenario = cfg.scenario()?;
    if sc.model.thermal.mode == ThermalKind::Stochastic {
        return Err(MtjError::Config("validate needs a deterministic thermal mode".into()));
    }
    let init = sc.initial.resolve(&sc.model, sc.solver.seed, 0);
    let t_end = sc.solver.t_end;
    let reference = match &cfg.validate.reference {
        Some(path) => Trajectory::read_csv(File::open(path)?)?,
        None => {
            let dt = cfg.validate.reference_dt;
            let stride = ((1e-12 / dt).round() as usize).max(1);
            let rc = SolverConfig {
                record_stride: stride,
                ..SolverConfig::fixed(Scheme::FixedRk4, dt, t_end)
            };
            let r = simulate(&sc.model, &rc, init)?;
            r.write_csv(create(out, "reference.csv")?)?;
            r
        }
    };
    let mut table = String::from("scheme,dt,rel_tol,abs_tol,rhs_evals,accepted,rejected,rmse_mz\n");
    for s in &cfg.validate.solvers {
        let solver = SolverConfig { t_end, ..s.clone() };
        let tr = simulate(&sc.model, &solver, init)?;
        let rmse = rmse_mz(&tr, &reference)?;
        println!(
            "{:?}: rhs_evals {} accepted {} rejected {} rmse_mz {:.6e}",
            solver.scheme, tr.stats.rhs_evals, tr.stats.accepted, tr.stats.rejected, rmse
        );
        let _ = writeln!(
            table,
            "{:?},{:e},{:e},{:e},{},{},{},{:e}",
            solver.scheme,
            solver.dt,
            solver.rel_tol,
            solver.abs_tol,
            tr.stats.rhs_evals,
            tr.stats.accepted,
            tr.stats.rejected,
            rmse
        );
    }
    fs::write(out.join("validate.csv"), table)?;
    manifest.add("outputs", "validate.csv");
    Ok(())
}

fn emit(cfg: &Config, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let model = cfg.model()?;
    let lib = corner_library(cfg)?;
    let kind = cfg.codegen.surrogate;
    let corners = lib
        .result(kind)
        .ok_or_else(|| MtjError::Config(format!("corner file has no {kind:?} section")))?;
    let cg = &cfg.codegen;
    let template = ModelTemplate {
        id: TemplateId::SphericalIdt,
        module_name: cg.module_name.clone(),
        options: TemplateOptions {
            window: kind == SurrogateKind::Window,
            fictitious: kind == SurrogateKind::Fictitious,
            window_gate: cfg.window.gate,
            vcma: model.params.xi != 0.0,
            conduction: model.conduction.clone(),
            convention: cfg.thermal.convention,
            dt_ref: cfg.thermal.dt_ref,
            corner: cg.corner.clone(),
            theta_abstol: cg.theta_abstol,
            phi_abstol: cg.phi_abstol,
            theta_init: 0.0,
            phi_init: 0.0,
        },
    };
    let text = emit_model_with(&model.params, &model.constants, &corners, &template)?;
    fs::write(out.join("model.va"), &text)?;
    manifest.add("outputs", "model.va");
    println!("wrote model.va ({} lines)", text.lines().count());
    Ok(())
}
