use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qmarl_cli::compare::COMPARE_FILE;
use qmarl_cli::run::{METRICS_FILE, METRICS_HEADER};
use qmarl_cli::{parse_config_str, run_train, RunManifest, RunStatus, SeedSource};

fn qmarl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmarl"))
        .args(args)
        .env_remove("QMARL_SEED")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    let out = dir.join(format!("run-{name}"));
    std::fs::write(&path, format!("output_dir = {:?}\n{body}", out.to_str().unwrap())).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const BANDIT1: &str = "seed = 3\n[env]\nkind = \"bandit\"\nk = 1\n[train]\nepochs = 10\n";

#[test]
fn out_of_range_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[env]\nkind = \"bandit\"\nk = 3\n");
    let o = qmarl(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`env.k`"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.toml", "[env]\nkind = \"factory\"\n[agnet]\nkind = \"quantum\"\n");
    let o = qmarl(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("agnet"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "nested.toml", "[env]\nkind = \"factory\"\n[train]\nepoch = 3\n");
    let o = qmarl(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`train.epoch`"), "{}", stderr(&o));
}

#[test]
fn train_writes_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.toml", BANDIT1);
    let o = qmarl(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let run = dir.path().join("run-b.toml");
    let csv = std::fs::read_to_string(run.join(METRICS_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[0], METRICS_HEADER.join(","));
    assert!(lines[1..].iter().all(|l| l.ends_with(",0")));

    let m = RunManifest::read(&run).unwrap();
    assert_eq!(m.status, RunStatus::Finished);
    assert_eq!(m.epochs_completed, 10);
    assert_eq!(m.seed_source, SeedSource::Config);
    assert!(m.defaults_applied.contains_key("train.learning_rate"));
    assert_eq!(m.param_total, m.param_counts.iter().map(|p| p.count).sum::<usize>());
    assert!(m.final_mean_reward.is_some());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = "seed = 11\n[env]\nkind = \"factory\"\n[agent]\nkind = \"quantum\"\n[train]\nepochs = 3\n";
    let cfg = write_config(dir.path(), "f.toml", body);
    let metrics = || {
        let o = qmarl(&["train", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(dir.path().join("run-f.toml").join(METRICS_FILE)).unwrap()
    };
    assert_eq!(metrics(), metrics());
}

#[test]
fn seed_variable_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", BANDIT1);
    let o = Command::new(env!("CARGO_BIN_EXE_qmarl"))
        .args(["train", "--config", cfg.to_str().unwrap()])
        .env("QMARL_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m = RunManifest::read(&dir.path().join("run-s.toml")).unwrap();
    assert_eq!(m.config.seed, 99);
    assert_eq!(m.seed_source, SeedSource::Environment);

    let o = Command::new(env!("CARGO_BIN_EXE_qmarl"))
        .args(["train", "--config", cfg.to_str().unwrap()])
        .env("QMARL_SEED", "-1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reference_quantum_config_has_110_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "q.toml",
        "[env]\nkind = \"factory\"\n[agent]\nkind = \"quantum\"\n[train]\nepochs = 1\n",
    );
    assert_eq!(qmarl(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let m = RunManifest::read(&dir.path().join("run-q.toml")).unwrap();
    assert_eq!(m.param_total, 110);
    assert_eq!(m.seed_source, SeedSource::Default);
}

#[test]
fn gradcheck_exit_codes() {
    let o = qmarl(&["gradcheck", "--trials", "100", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("trial")).count(), 100);

    let o = qmarl(&["gradcheck", "--trials", "5", "--shift", "1.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("failing instance: {"));

    assert_eq!(qmarl(&["gradcheck", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn compare_tabulates_runs() {
    let dir = tempfile::tempdir().unwrap();
    let q = write_config(dir.path(), "q.toml", &format!("{BANDIT1}[agent]\nkind = \"quantum\"\n"));
    let r = write_config(dir.path(), "r.toml", &format!("{BANDIT1}[agent]\nkind = \"random\"\n"));
    let out = dir.path().join("cmp");
    let o = qmarl(&["compare", "--configs", q.to_str().unwrap(), r.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join(COMPARE_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("quantum,"));
    assert!(lines[2].starts_with("random,0,2,"));
    assert!(out.join("0-quantum").join(METRICS_FILE).exists());
    assert!(stdout(&o).starts_with("agent_kind"));
}

#[test]
fn compare_reports_infeasible_budget() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[env]\nkind = \"bandit\"\nk = 16\n[train]\nepochs = 2\n";
    let c = write_config(dir.path(), "c.toml", &format!("{base}[agent]\nkind = \"classical110\"\n"));
    let i = write_config(dir.path(), "i.toml", &format!("{base}[agent]\nkind = \"iql\"\n"));
    let out = dir.path().join("cmp");
    let o = qmarl(&["compare", "--configs", c.to_str().unwrap(), i.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join(COMPARE_FILE)).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("infeasible"), "{csv}");
    assert!(stderr(&o).contains("infeasible"));

    let o = qmarl(&["train", "--config", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_rejects_mismatched_environments() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.toml", BANDIT1);
    let b = write_config(dir.path(), "b.toml", "[env]\nkind = \"factory\"\n");
    let o = qmarl(&["compare", "--configs", a.to_str().unwrap(), b.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn aborted_run_leaves_partial_metrics_and_unfinished_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("abort");
    let text = format!("output_dir = {:?}\n{BANDIT1}", out.to_str().unwrap());
    let loaded = parse_config_str(&text).unwrap();
    let err = run_train(&loaded, |row| {
        if row.epoch == 2 {
            Err(qmarl::Error::Data("interrupted".into()))
        } else {
            Ok(())
        }
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let csv = std::fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.status, RunStatus::Unfinished);
    assert_eq!(m.epochs_completed, 3);
    assert!(m.error.unwrap().contains("interrupted"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            qmarl_cli::parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 10);
}
