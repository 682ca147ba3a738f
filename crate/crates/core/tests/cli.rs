use std::path::Path;
use std::process::{Command, Output};

use polyflow::coupling::RunConfig;
use polyflow::diagnostics::DiagnosticsRecord;
use polyflow::io::{dump_config, parse_config, read_series, Snapshot};

fn polyflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyflow"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, dump_config(cfg)).unwrap();
    p.to_str().unwrap().to_string()
}

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    c.grid.nx = 10;
    c.grid.ny = 10;
    c.grid.nr = 32;
    c.time.t_final = 0.1;
    c
}

#[test]
fn validate_defaults_passes() {
    let o = polyflow(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    for a in ["A1", "A2", "A3", "A4", "A5", "A6"] {
        assert!(text.contains(a), "{text}");
    }
}

#[test]
fn dump_defaults_parses_back() {
    let o = polyflow(&["dump-defaults"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(parse_config(&stdout(&o)).unwrap(), RunConfig::default());
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = polyflow(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[coefficients]\nr0 = -1.0\n").unwrap();
    let o = polyflow(&["validate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("r0 > 0"));
    std::fs::write(&p, "[grid]\nnx = \"many\"\n").unwrap();
    let o = polyflow(&["run", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn run_with_zero_final_time_writes_one_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small();
    c.time.t_final = 0.0;
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    let o = polyflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let snaps: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "pflow"))
        .collect();
    assert_eq!(snaps.len(), 1);
    let s = Snapshot::read(&snaps[0].path()).unwrap();
    assert_eq!(s.step, 0);
    assert_eq!(s.field("psi").unwrap().len(), 10 * 10 * 32);
}

#[test]
fn run_outputs_are_byte_stable_and_replay_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = polyflow(&[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--seed",
            "5",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    for name in ["series.csv", "report.txt"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let series = a.join("series.csv");
    let o = polyflow(&["check-invariants", "--config", &cfg, series.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn injected_max_principle_breach_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small());
    let out = dir.path().join("out");
    let o = polyflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut rows = read_series(&out.join("series.csv")).unwrap();
    let k2 = 100.0;
    rows.last_mut().unwrap().phi_max = k2 * (1.0 + 1e-6);
    let mut text = DiagnosticsRecord::COLUMNS.join(",") + "\n";
    for r in &rows {
        text += &polyflow::io::timeseries::format_row(r);
        text += "\n";
    }
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, text).unwrap();
    let o = polyflow(&["check-invariants", "--config", &cfg, bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("phi-max-principle"), "{}", stdout(&o));
}

#[test]
fn zero_dim_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::default();
    c.zero_dim.nr = 128;
    c.zero_dim.t_final = 1.0;
    c.zero_dim.sample_every = 10;
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("zd");
    let o = polyflow(&["zero-dim", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(out.join("zero_dim.csv")).unwrap();
    assert!(csv.starts_with("t,phi,m0,m1,mass,psi_min\n"));
    assert!(csv.lines().count() > 2);
}
