//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the lines are always printed; exits nonzero on any failure.

use mtj_core::calibration::{calibrate, CornerTarget, DeterministicCorner, Provenance, SurrogateKind, CalibrationOptions};
use mtj_core::codegen::{emit_model, lint, params_from_emitted, ModelTemplate};
use mtj_core::conduction::{Drive, DriveKind};
use mtj_core::fields::{h_thermal_sample, thermal_sigma, ThermalConvention, ThermalMode};
use mtj_core::model::Model;
use mtj_core::montecarlo::{frozen_thermal_field, run_ensemble, EnsembleConfig, InitialCondition, Scenario};
use mtj_core::rng::NoiseStream;
use mtj_core::solvers::{rmse_mz, simulate, Scheme, Side, SolverConfig, Trajectory};
use mtj_core::{derive, DeviceParams, MagState, CODATA_2018};
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const WRITE_CURRENT: f64 = -35e-6;

fn device() -> DeviceParams {
    DeviceParams::validation_cylinder()
}

fn write_model(thermal: ThermalMode) -> Model {
    Model::simple(device(), Drive::constant_current(WRITE_CURRENT), thermal, None).unwrap()
}

fn tilted_start(m: &Model) -> MagState {
    MagState::new(m.derived.theta0, 0.0)
}

/// 1 fs RK4 on the write scenario, recorded every picosecond.
fn reference(m: &Model, t_end: f64) -> Trajectory {
    let cfg = SolverConfig {
        record_stride: 1000,
        ..SolverConfig::fixed(Scheme::FixedRk4, 1e-15, t_end)
    };
    simulate(m, &cfg, tilted_start(m)).unwrap()
}

fn adaptive_write(m: &Model, t_end: f64) -> (Trajectory, Duration) {
    let cfg = SolverConfig {
        record_interval: 1e-12,
        ..SolverConfig::adaptive(t_end)
    };
    let t0 = Instant::now();
    let tr = simulate(m, &cfg, tilted_start(m)).unwrap();
    (tr, t0.elapsed())
}

fn criteria_1_2() -> (Outcome, Outcome) {
    let t_end = 30e-9;
    let m = write_model(ThermalMode::off());
    let reference = reference(&m, t_end);
    let (ad, elapsed) = adaptive_write(&m, t_end);
    let ad_rmse = rmse_mz(&ad, &reference).unwrap();
    let switched = ad.events.first().map(|e| (e.from, e.to)) == Some((Side::Up, Side::Down));
    let c1 = check(
        switched && ad_rmse < 0.01 && elapsed.as_secs_f64() < 60.0,
        format!(
            "P->AP at {:.3} ns, RMSE(m_z) {ad_rmse:.2e} < 1e-2 vs 1 fs RK4, runtime {:.3} s < 60 s",
            ad.switch_time().unwrap_or(f64::NAN) * 1e9,
            elapsed.as_secs_f64()
        ),
    );
    let eu_cfg = SolverConfig {
        record_stride: 1,
        ..SolverConfig::fixed(Scheme::NaiveEuler, 1e-12, t_end)
    };
    let eu = simulate(&m, &eu_cfg, tilted_start(&m)).unwrap();
    let eu_rmse = rmse_mz(&eu, &reference).unwrap();
    let ratio = eu.stats.rhs_evals as f64 / ad.stats.rhs_evals as f64;
    let c2 = check(
        ratio >= 100.0 && eu_rmse > ad_rmse,
        format!(
            "Euler 1 ps: {} evals vs adaptive {} ({ratio:.0}x >= 100x); RMSE {eu_rmse:.2e} > {ad_rmse:.2e}",
            eu.stats.rhs_evals, ad.stats.rhs_evals
        ),
    );
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let t_end = 5e-9;
    let noise_model = Model::simple(device(), Drive::zero(), ThermalMode::stochastic(), None).unwrap();
    let cfg = SolverConfig::adaptive(t_end);
    // closest pole passage among 32 frozen realizations
    let mut best: Option<(u64, f64, Trajectory)> = None;
    for run in 0..32u64 {
        let field = frozen_thermal_field(&noise_model, 5, run, 1e-12, t_end).unwrap();
        let m = noise_model
            .with_drive(Drive::zero().with_field(field))
            .unwrap()
            .with_mode(ThermalMode::fictitious(0.016), None)
            .unwrap();
        let tr = match simulate(&m, &cfg, tilted_start(&m)) {
            Ok(tr) => tr,
            Err(e) => return check(false, format!("run {run}: {e}")),
        };
        let th_min = tr.states.iter().map(|s| s.theta()).fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| th_min < b.1) {
            best = Some((run, th_min, tr));
        }
    }
    let (run, th_min, tr) = best.unwrap();
    let log = &tr.stats.step_log;
    let skip = 5; // start-up steps
    let mut hs: Vec<f64> = log[skip..].iter().map(|x| x.1).collect();
    hs.sort_by(f64::total_cmp);
    let typical = hs[hs.len() / 2];
    let (i_min, &(t_min, h_min)) = log
        .iter()
        .enumerate()
        .skip(skip)
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap();
    let after = &log[(i_min + 1).min(log.len())..];
    let recovered = after.iter().take(500).any(|x| x.1 >= 0.5 * typical);
    let reduction = typical / h_min;
    check(
        reduction >= 10.0 && recovered,
        format!(
            "run {run}: min θ {th_min:.2e} rad, step {typical:.2e} s -> {h_min:.2e} s at {:.3} ns ({reduction:.0}x >= 10x), recovered: {recovered}, no tolerance failure",
            t_min * 1e9
        ),
    )
}

fn criterion_4() -> Outcome {
    let m = Model::simple(device(), Drive::zero(), ThermalMode::stochastic(), None).unwrap();
    let solver = SolverConfig {
        record_stride: usize::MAX,
        average_from: Some(10e-9),
        ..SolverConfig::fixed(Scheme::StochasticHeun, 1e-12, 50e-9)
    };
    let sc = Scenario {
        model: m.clone(),
        solver,
        initial: InitialCondition::Explicit { theta: 0.0, phi: 0.0 },
    };
    let res = run_ensemble(&sc, &EnsembleConfig { n_runs: 10_000, master_seed: 4, workers: 0 }).unwrap();
    let got = res.stats.theta_sq_mean.unwrap();
    let want = 1.0 / m.derived.delta_thermal;
    let rel = (got - want) / want;
    check(
        rel.abs() <= 0.10,
        format!("<θ²> = {got:.5e} vs 1/Δ = {want:.5e} ({:+.2}%, limit 10%), 10^4 runs x 50 ns", rel * 100.0),
    )
}

fn criterion_5() -> Outcome {
    let p = device();
    let d = derive(&p, &CODATA_2018).unwrap();
    let n = 100_000u64;
    let mut stds = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, dt) in [1e-12, 4e-12].into_iter().enumerate() {
        let sigma = thermal_sigma(&p, &d, &CODATA_2018, dt, ThermalConvention::Mu0Consistent).unwrap();
        let mut noise = NoiseStream::new(55, k as u64);
        let (mut s, mut s2) = (0.0, 0.0);
        for step in 0..n {
            let h = h_thermal_sample(&mut noise, step, sigma);
            for c in [h.x, h.y, h.z] {
                s += c;
                s2 += c * c;
            }
        }
        let m = 3.0 * n as f64;
        let var = s2 / m - (s / m).powi(2);
        worst = worst.max((var / (sigma * sigma) - 1.0).abs());
        stds.push(var.sqrt());
    }
    let ratio = stds[0] / stds[1];
    check(
        worst <= 0.03 && (ratio - 2.0).abs() <= 0.1,
        format!("variance within {:.2}% of σ² (limit 3%), σ(1 ps)/σ(4 ps) = {ratio:.4} (2 ± 5%)", worst * 100.0),
    )
}

fn criterion_6() -> Outcome {
    let (i, w, gap) = (100e-6, 10e-9, 5e-9);
    let drive = Drive::pulses(DriveKind::Current, &[(0.0, w, -i), (w + gap, w, i)], 0.0).unwrap();
    let t_end = 2.0 * w + gap + 5e-9;
    let cfg = SolverConfig::adaptive(t_end);
    let off = Model::simple(device(), drive.clone(), ThermalMode::off(), None).unwrap();
    let tr_off = simulate(&off, &cfg, tilted_start(&off)).unwrap();
    let on = Model::simple(device(), drive, ThermalMode::off(), Some(1.0)).unwrap();
    let tr_on = simulate(&on, &cfg, MagState::new(on.window.theta0_prime, 0.0)).unwrap();
    let off_ok = tr_off.events.len() == 1;
    let on_ok = tr_on.events.len() == 2;
    let mismatch = if on_ok {
        let (a, b) = (tr_on.events[0].transition_time(), tr_on.events[1].transition_time());
        (b - a).abs() / a
    } else {
        f64::INFINITY
    };
    check(
        off_ok && on_ok && mismatch <= 0.02,
        format!(
            "window off: {} switch(es) (second fails); window on: {} switches, transition times differ by {:.3}% (limit 2%)",
            tr_off.events.len(),
            tr_on.events.len(),
            mismatch * 100.0
        ),
    )
}

fn criterion_7() -> Outcome {
    let t_end = 40e-9;
    let m = write_model(ThermalMode::stochastic());
    let sc = Scenario {
        model: m.clone(),
        solver: SolverConfig {
            record_stride: usize::MAX,
            ..SolverConfig::fixed(Scheme::StochasticHeun, 1e-12, t_end)
        },
        initial: InitialCondition::Thermalized { pole: Side::Up },
    };
    let ens = EnsembleConfig { n_runs: 10_000, master_seed: 7, workers: 0 };
    let res = run_ensemble(&sc, &ens).unwrap();
    let p50 = res.stats.switch_times.p50.unwrap();
    let prov = Provenance { ensemble_digest: res.digest.clone(), master_seed: 7, n_runs: 10_000 };
    let base = m.with_mode(ThermalMode::off(), None).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in [SurrogateKind::Fictitious, SurrogateKind::Window] {
        let corner = DeterministicCorner { base: base.clone(), solver: SolverConfig::adaptive(t_end), kind, pole: Side::Up };
        match calibrate(&corner, &[CornerTarget::mean()], &res.runs, prov.clone(), &CalibrationOptions::defaults_for(kind)) {
            Ok(r) => {
                let c = r.corner("mean").unwrap().coefficient;
                // independent replay at the fitted coefficient
                let t = corner.switching_time(c).unwrap();
                let rel = (t - p50) / p50;
                pass &= rel.abs() <= 0.05;
                parts.push(format!("{kind:?} c = {c:.5} -> {:.3} ns ({:+.3}%)", t * 1e9, rel * 100.0));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{kind:?}: {e}"));
            }
        }
    }
    check(pass, format!("MC p50 {:.3} ns (10^4 runs); {} (limit 5%)", p50 * 1e9, parts.join("; ")))
}

fn criterion_8() -> Outcome {
    let sc = Scenario {
        model: write_model(ThermalMode::stochastic()),
        solver: SolverConfig {
            record_stride: usize::MAX,
            average_from: Some(0.0),
            ..SolverConfig::fixed(Scheme::StochasticHeun, 1e-12, 20e-9)
        },
        initial: InitialCondition::Thermalized { pole: Side::Up },
    };
    let results: Vec<_> = [1, 4, 16]
        .iter()
        .map(|&w| run_ensemble(&sc, &EnsembleConfig { n_runs: 300, master_seed: 8, workers: w }).unwrap())
        .collect();
    let same = results.windows(2).all(|p| {
        p[0].digest == p[1].digest
            && format!("{:?}", p[0].stats) == format!("{:?}", p[1].stats)
            && p[0].runs.iter().zip(&p[1].runs).all(|(a, b)| {
                a.switch_time.map(f64::to_bits) == b.switch_time.map(f64::to_bits)
                    && a.final_mz.to_bits() == b.final_mz.to_bits()
            })
    });
    check(same, format!("workers 1/4/16 -> digest {}", &results[0].digest[..16]))
}

fn criterion_9() -> Outcome {
    let p = device();
    let mut corners = std::collections::BTreeMap::new();
    for (name, q, c) in [("best", 0.01, 0.0529), ("mean", 0.5, 0.0160), ("worst", 0.99, 0.00176)] {
        corners.insert(
            name.to_string(),
            mtj_core::calibration::CornerFit {
                coefficient: c,
                percentile: q,
                target_time: 1e-8,
                achieved_time: 1e-8,
                residual: 0.0,
                iterations: 0,
            },
        );
    }
    let result = mtj_core::calibration::CalibrationResult {
        kind: SurrogateKind::Fictitious,
        provenance: Provenance { ensemble_digest: "acceptance".into(), master_seed: 0, n_runs: 0 },
        corners,
    };
    let t = ModelTemplate::for_surrogate(SurrogateKind::Fictitious, &p, "mean").unwrap();
    let a = emit_model(&p, &result, &t).unwrap();
    let b = emit_model(&p, &result, &t).unwrap();
    let report = lint(&a);
    let back = params_from_emitted(&a).unwrap();
    let pairs = [
        (p.ms, back.ms),
        (p.alpha, back.alpha),
        (p.gamma, back.gamma),
        (p.p, back.p),
        (p.lambda_stt, back.lambda_stt),
        (p.ki, back.ki),
        (p.t_fl, back.t_fl),
        (p.t_ox, back.t_ox),
        (p.diameter, back.diameter),
        (p.volume, back.volume),
        (p.demag.x, back.demag.x),
        (p.demag.y, back.demag.y),
        (p.demag.z, back.demag.z),
        (p.m_p.z, back.m_p.z),
        (p.temperature, back.temperature),
        (p.r_p, back.r_p),
        (p.r_ap, back.r_ap),
    ];
    let worst = pairs
        .iter()
        .map(|(x, y)| if *x == 0.0 { y.abs() } else { ((x - y) / x).abs() })
        .fold(0.0, f64::max);
    let exact = back == p;
    check(
        report.is_clean() && worst <= 1e-12 && exact && a == b,
        format!(
            "lint clean: {}, one idtmod: {}, parameter round-trip max rel err {worst:.1e} (<= 1e-12), re-emission identical: {}",
            report.is_clean(),
            report.idtmod_count == 1,
            a == b
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let (c1, c2) = criteria_1_2();
    results.push((1, "deterministic switching replication", c1));
    results.push((2, "solver accuracy vs cost", c2));
    results.push((3, "phi acceleration near the pole", criterion_3()));
    results.push((4, "thermal equilibrium", criterion_4()));
    results.push((5, "noise scaling", criterion_5()));
    results.push((6, "damping artifact and window", criterion_6()));
    results.push((7, "calibration closure", criterion_7()));
    results.push((8, "ensemble determinism", criterion_8()));
    results.push((9, "compact model emission", criterion_9()));
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("criterion 10 [EXCLUDED] 1-Mb macro CPU/RAM figures: needs an extracted netlist and a commercial analog simulator");
    println!("{} of {} criteria passed in {:.1} s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
