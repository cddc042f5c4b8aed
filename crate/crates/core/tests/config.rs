use mtj_core::config::{parse_override, Config};
use mtj_core::solvers::Scheme;
use mtj_core::DeviceParams;
use std::path::PathBuf;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_configs_load_and_build() {
    for name in ["validation_cylinder.toml", "thermal_write.toml", "double_write.toml"] {
        let cfg = Config::load(&shipped(name), &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
        let sc = cfg.scenario().unwrap_or_else(|e| panic!("{name}: {e}"));
        sc.solver.validate().unwrap();
        // resolved form parses back to the same configuration
        let again = Config::from_toml_str(&cfg.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(again.to_toml().unwrap(), cfg.to_toml().unwrap(), "{name}");
    }
}

#[test]
fn validation_config_is_the_reference_device() {
    let cfg = Config::load(&shipped("validation_cylinder.toml"), &[]).unwrap();
    assert_eq!(cfg.params().unwrap(), DeviceParams::validation_cylinder());
    assert_eq!(cfg.solver.scheme, Scheme::AdaptiveRk);
}

#[test]
fn overrides_reach_nested_tables() {
    let o = vec![
        parse_override("solver.rel_tol=1e-5").unwrap(),
        parse_override("device.alpha=0.02").unwrap(),
        parse_override("ensemble.n_runs=7").unwrap(),
    ];
    let cfg = Config::load(&shipped("thermal_write.toml"), &o).unwrap();
    assert_eq!(cfg.solver.rel_tol, 1e-5);
    assert_eq!(cfg.params().unwrap().alpha, 0.02);
    assert_eq!(cfg.ensemble.n_runs, 7);
    assert!(Config::load(&shipped("thermal_write.toml"), &[parse_override("solver.nope=1").unwrap()]).is_err());
}

#[test]
fn missing_file_is_a_config_error() {
    let e = Config::load(&shipped("does_not_exist.toml"), &[]).unwrap_err();
    assert!(matches!(e, mtj_core::MtjError::Config(_)), "{e}");
}
