use std::path::PathBuf;
use std::process::Command;

use coregret::algorithms::ScheduleTheorem;
use coregret::harness::config::{ScheduleChoice, TopologyChoice};
use coregret::harness::report::trace_file_name;
use coregret::harness::{run_horizon, ExperimentConfig};
use coregret::topology::TopologyKind;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&configs().join(name)).unwrap()
}

#[test]
fn cli_traces_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_coregret"))
            .args(["run", "--config"])
            .arg(configs().join("dinoco.conf"))
            .args(["--seed", "4", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join(trace_file_name(4))).unwrap();
    let (a, b) = (read(&dirs[0]), read(&dirs[1]));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn complete_graph_no_worse_than_ring() {
    let base = ExperimentConfig {
        horizon: 5000,
        seeds: (1..=20).collect(),
        schedule: ScheduleChoice::Theorem(ScheduleTheorem::OcgdConvexStatic),
        ..config("strongly_convex.conf")
    };
    for n in [4, 8] {
        let regret = |kind: TopologyKind| {
            let cfg = ExperimentConfig {
                n_agents: n,
                topology: TopologyChoice::Kind(kind),
                ..base.clone()
            };
            run_horizon(&cfg, cfg.horizon).unwrap().sc_regret
        };
        let complete = regret(TopologyKind::Complete);
        let ring = regret(TopologyKind::Ring);
        assert!(
            complete.mean <= ring.mean + 2.0 * ring.se,
            "N={n}: complete {complete:?} vs ring {ring:?}"
        );
    }
}

#[test]
fn stationary_start_at_minimizer() {
    let cfg = ExperimentConfig {
        heterogeneity: 0.0,
        base_center: 0.0,
        horizon: 300,
        seeds: vec![1, 2],
        ..config("strongly_convex.conf")
    };
    let result = run_horizon(&cfg, cfg.horizon).unwrap();
    for run in &result.runs {
        assert!(run.summary.sc_regret.abs() <= 1e-9);
        assert!(run.ledger.records().iter().all(|r| r.network_loss == 0.0));
    }
}

#[test]
fn every_shipped_config_verifies() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        if cfg.horizon > 2000 {
            continue;
        }
        let checks = coregret::harness::invariants::verify(&cfg).unwrap();
        for c in checks {
            assert!(c.pass, "{}: {} ({})", path.display(), c.name, c.detail);
        }
    }
}
