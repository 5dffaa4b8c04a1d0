use std::path::PathBuf;

use pal::{AgentKind, ExperimentConfig, Setup};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn every_shipped_config_validates() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::from_file(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn ablation_config_swaps_agent_one() {
    let cfg = ExperimentConfig::from_file(&configs_dir().join("ablation.toml")).unwrap();
    assert_eq!(cfg.setup, Setup::PalDifferentRewards);
    assert_eq!(cfg.agent_kind(0), AgentKind::ObliviousPal);
    assert_eq!(cfg.agent_kind(1), AgentKind::FullPal);
    assert_eq!(cfg.torque_limit(), 10.0);
}

#[test]
fn readme_config_example_parses() {
    let readme = std::fs::read_to_string(configs_dir().join("../README.md")).unwrap();
    let block = readme
        .split("```toml\n")
        .nth(1)
        .and_then(|rest| rest.split("```").next())
        .expect("README has a toml block");
    let cfg = ExperimentConfig::from_toml_str(block).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.setup, Setup::Pal);
    assert_eq!(cfg.agent_kind(0), AgentKind::ObliviousPal);
}
