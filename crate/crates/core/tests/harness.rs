use std::path::Path;
use std::process::Command;

use co4_core::harness::{
    parse_config, recompute_from_dumps, run_grid, ExperimentConfig, GridCell, RunError,
    REPORT_FILE, TRAJECTORY_DIR,
};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::shipped();
    cfg.grid = vec![
        GridCell { s_r: 25, s_c: 50 },
        GridCell { s_r: 100, s_c: 50 },
    ];
    cfg.seeds = vec![0, 7];
    cfg.track.horizon = 150;
    cfg
}

#[test]
fn shipped_config_file_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.json");
    assert_eq!(parse_config(path).unwrap(), ExperimentConfig::shipped());
}

#[test]
fn single_cell_single_seed_gives_one_pair() {
    let mut cfg = small();
    cfg.grid.truncate(1);
    cfg.seeds.truncate(1);
    let dir = tempfile::tempdir().unwrap();
    let report = run_grid(&cfg, dir.path(), 1).unwrap();
    assert_eq!(report.cells.len(), 1);
    assert_eq!(report.cells[0].seeds, 1);
    assert!(report.cells[0].co4_wins <= 1);
    assert_eq!(report.episodes.len(), 2);
    assert!(dir.path().join(REPORT_FILE).exists());
    assert_eq!(
        std::fs::read_dir(dir.path().join(TRAJECTORY_DIR))
            .unwrap()
            .count(),
        2
    );
}

#[test]
fn reruns_match_modulo_timestamp() {
    let cfg = small();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_grid(&cfg, a.path(), 1).unwrap();
    let rb = run_grid(&cfg, b.path(), 3).unwrap();
    assert_eq!(ra.canonical_json(), rb.canonical_json());
    assert_eq!(ra.provenance.config_hash, cfg.hash());
    assert_eq!(ra.provenance.seeds, cfg.seeds);
}

#[test]
fn report_is_recomputable_from_dumps() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let report = run_grid(&cfg, dir.path(), 0).unwrap();
    let (episodes, cells) = recompute_from_dumps(&cfg, dir.path()).unwrap();
    assert_eq!(episodes, report.episodes);
    assert_eq!(cells, report.cells);
    let on_disk: co4_core::harness::RunReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap())
            .unwrap();
    assert_eq!(on_disk, report);
}

#[test]
fn unwritable_output_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("out");
    assert!(matches!(
        run_grid(&small(), &out, 1),
        Err(RunError::Unwritable { .. })
    ));
    assert!(!out.exists());
}

fn co4() -> Command {
    Command::new(env!("CARGO_BIN_EXE_co4"))
}

#[test]
fn cli_ratio_and_exit_codes() {
    let out = co4()
        .args(["ratio", "--sc", "1", "--sr", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.25") && text.contains("Overload"), "{text}");
    assert!(!co4()
        .args(["ratio", "--sc", "0", "--sr", "4"])
        .status()
        .unwrap()
        .success());
}

#[test]
fn cli_verify_reports_injected_fault() {
    let ok = co4()
        .args(["verify", "--suite", "oracle"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let bad = co4()
        .args([
            "verify",
            "--suite",
            "invariants",
            "--instances",
            "50",
            "--inject-fault",
        ])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.contains("FAIL precision bounds (seed 25)"), "{text}");
}

#[test]
fn cli_simulate_honours_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let mut cfg = small();
    cfg.seeds.truncate(1);
    cfg.output_dir = Some(dir.path().join("ignored"));
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("from-env");
    let status = co4()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .env("CO4_OUT_DIR", &out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join(REPORT_FILE).exists());
    assert!(!dir.path().join("ignored").exists());

    std::fs::write(&cfg_path, r#"{"grid": []"#).unwrap();
    let bad = co4()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("malformed"));
}
