use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn npclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npclust"))
        .args(args)
        .env_remove("NPCLUST_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.json")
}

/// Every file in `dir` except the manifest, with its bytes.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn stats_prints_uniform_growth() {
    let out = npclust(&["stats", "--process", "up", "--theta", "2", "--n", "10000"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().next(), Some("expected_k 200"));
}

#[test]
fn stats_closed_forms() {
    let out = npclust(&["stats", "--process", "dp", "--theta", "10", "--n", "1000", "--m", "5"]);
    let text = stdout(&out);
    assert!(text.contains("expected_h_5 2\n"), "{text}");
    let out = npclust(&["stats", "--process", "py", "--theta", "1", "--alpha", "0.5", "--n", "100"]);
    assert_eq!(code(&out), 0);
    let out = npclust(&["stats", "--process", "py", "--theta", "1", "--n", "100"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_flags_exit_two() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("x");
    for args in [
        vec!["simulate", "--replicates", "0"],
        vec!["simulate", "--theta", "-1"],
        vec!["simulate", "--bogus"],
        vec!["cluster", "--prior", "py"],
        vec!["cluster", "--sweeps", "10", "--burn-in", "10"],
        vec!["evaluate", "--trained", "somewhere"],
        vec!["--jobs", "0", "stats"],
    ] {
        let mut a = args.clone();
        a.extend(["--out", path_str(&out_dir)]);
        if a[0] == "--jobs" {
            a.truncate(3);
        }
        let out = npclust(&a);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    assert!(!out_dir.join("manifest.json").exists());
}

#[test]
fn runtime_failures_exit_one() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.txt");
    let out = npclust(&["cluster", "--corpus", path_str(&missing), "--out", path_str(tmp.path())]);
    assert_eq!(code(&out), 1);
    let empty = tmp.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let out = npclust(&["cluster", "--corpus", path_str(&empty), "--out", path_str(tmp.path())]);
    assert_eq!(code(&out), 1);
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn manifest_is_not_overwritten_without_force() {
    let tmp = TempDir::new().unwrap();
    let dir = path_str(tmp.path());
    let args = ["simulate", "--process", "dp", "--theta", "1", "--n", "10", "--replicates", "3", "--out", dir];
    assert_eq!(code(&npclust(&args)), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["outputs"], serde_json::json!(["k_growth.csv", "cluster_sizes.csv"]));
    assert_eq!(code(&npclust(&args)), 1);
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&npclust(&forced)), 0);
}

#[test]
fn simulate_csv_schema() {
    let tmp = TempDir::new().unwrap();
    let dir = path_str(tmp.path());
    let out = npclust(&[
        "simulate", "--process", "dp,py,up", "--theta", "2", "--alpha", "0.3,0.6", "--n", "50,500", "--replicates",
        "20", "--max-m", "4", "--seed", "1", "--out", dir,
    ]);
    assert_eq!(code(&out), 0);
    let growth = fs::read_to_string(tmp.path().join("k_growth.csv")).unwrap();
    let lines: Vec<&str> = growth.lines().collect();
    assert_eq!(lines[0], "process,theta,alpha,n,replicates,mean_k,se_k");
    // dp, py(0.3), py(0.6), up at two sizes
    assert_eq!(lines.len(), 1 + 4 * 2);
    assert!(lines[3].starts_with("py,2,0.3,50,20,"));
    let sizes = fs::read_to_string(tmp.path().join("cluster_sizes.csv")).unwrap();
    assert_eq!(sizes.lines().next(), Some("process,theta,alpha,n,M,mean_h"));
    assert_eq!(sizes.lines().count(), 1 + 4 * 2 * 4);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("cfg.json");
    fs::write(
        &config,
        r#"{"simulate": {"process": ["up"], "theta": [3.0], "n": [20], "replicates": 5, "seed": 11}}"#,
    )
    .unwrap();
    let dir = tmp.path().join("a");
    let out = npclust(&["--config", path_str(&config), "simulate", "--n", "30", "--out", path_str(&dir)]);
    assert_eq!(code(&out), 0);
    let growth = fs::read_to_string(dir.join("k_growth.csv")).unwrap();
    assert!(growth.lines().nth(1).unwrap().starts_with("up,3,0,30,5,"));
    let manifest = fs::read_to_string(dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 11"));

    fs::write(&config, r#"{"simulate": {"replicate": 5}}"#).unwrap();
    assert_eq!(code(&npclust(&["--config", path_str(&config), "simulate"])), 2);
}

#[test]
fn seed_from_environment() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str, env: Option<&str>, extra: &[&str]| {
        let dir = tmp.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_npclust"));
        cmd.args(["simulate", "--process", "up", "--theta", "1", "--n", "200", "--replicates", "4"])
            .args(extra)
            .args(["--out", path_str(&dir)])
            .env_remove("NPCLUST_SEED");
        if let Some(v) = env {
            cmd.env("NPCLUST_SEED", v);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(dir.join("k_growth.csv")).unwrap()
    };
    assert_eq!(run("env", Some("42"), &[]), run("flag", None, &["--seed", "42"]));
    assert_eq!(run("flag_wins", Some("1"), &["--seed", "42"]), run("flag2", None, &["--seed", "42"]));
    assert_ne!(run("other", Some("43"), &[]), run("flag3", None, &["--seed", "42"]));
}

#[test]
fn default_config_sections_parse() {
    let cfg = default_config();
    let out = npclust(&["--config", path_str(&cfg), "stats"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("expected_k 447.2"));
    let tmp = TempDir::new().unwrap();
    let out = npclust(&[
        "--config",
        path_str(&cfg),
        "exchangeability",
        "--theta",
        "1",
        "--chains",
        "2",
        "--orderings",
        "3",
        "--sweeps",
        "2",
        "--burn-in",
        "1",
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cluster_then_evaluate() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("train.txt");
    fs::write(
        &corpus,
        "carbon nanotube growth\ncarbon nanotube array\npolymer film coating\npolymer coating layer\nnanotube carbon \
         fiber\n\nfilm polymer resin\n",
    )
    .unwrap();
    let run = tmp.path().join("run1");
    let out = npclust(&[
        "cluster", "--prior", "up", "--theta", "5", "--corpus", path_str(&corpus), "--sweeps", "40", "--burn-in", "20",
        "--chains", "5", "--seed", "3", "--out", path_str(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..5 {
        assert!(run.join(format!("chain_{i}.json")).exists());
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["chains"].as_array().unwrap().len(), 5);
    assert_eq!(summary["documents"], 7);

    let test = tmp.path().join("test.txt");
    fs::write(&test, "carbon nanotube film\ngraphene sheet polymer\n").unwrap();
    let eval = tmp.path().join("eval");
    let out = npclust(&[
        "evaluate", "--trained", path_str(&run), "--test", path_str(&test), "--particles", "50", "--permutations",
        "20", "--out", path_str(&eval),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(eval.join("heldout.json")).unwrap()).unwrap();
    assert_eq!(report["test_documents"], 2);
    assert_eq!(report["new_words"], 2);
    assert!(report["heldout_logprob_mean"].as_f64().unwrap() < 0.0);
    assert_eq!(report["chains"][0]["estimate"]["per_permutation"].as_array().unwrap().len(), 20);

    // a checkpoint from another corpus is rejected
    fs::write(&corpus, "something else entirely\n").unwrap();
    let other = tmp.path().join("run2");
    let out = npclust(&[
        "cluster", "--corpus", path_str(&corpus), "--sweeps", "2", "--burn-in", "1", "--chains", "1", "--out",
        path_str(&other),
    ]);
    assert_eq!(code(&out), 0);
    fs::copy(other.join("corpus.json"), run.join("corpus.json")).unwrap();
    let out = npclust(&[
        "evaluate", "--trained", path_str(&run), "--test", path_str(&test), "--out", path_str(&tmp.path().join("e2")),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn outputs_identical_across_runs_and_job_counts() {
    let tmp = TempDir::new().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--process", "dp,py,up", "--theta", "1,10", "--n", "100,1000", "--replicates", "30"],
        vec!["stats", "--process", "up", "--theta", "2", "--n", "1000", "--m", "2"],
        vec!["exchangeability", "--theta", "1,5", "--chains", "3", "--orderings", "20", "--sweeps", "6", "--burn-in", "3"],
        vec!["cluster", "--prior", "dp", "--theta", "1", "--chains", "3", "--sweeps", "6", "--burn-in", "3"],
        vec!["evaluate", "--theta", "1", "--chains", "2", "--sweeps", "4", "--burn-in", "2", "--particles", "10", "--permutations", "3"],
    ];
    for (i, cmd) in commands.iter().enumerate() {
        let mut results = Vec::new();
        for (run, jobs) in [(0, "1"), (1, "1"), (2, "8")] {
            let dir = tmp.path().join(format!("{i}_{run}"));
            let mut args = vec!["--jobs", jobs];
            args.extend(cmd.iter().copied());
            args.extend(["--seed", "5", "--out", path_str(&dir)]);
            let out = npclust(&args);
            assert_eq!(code(&out), 0, "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
            results.push((stdout(&out), outputs(&dir)));
        }
        assert!(!results[0].1.is_empty(), "{cmd:?} wrote nothing");
        assert_eq!(results[0], results[1], "{cmd:?} differs between runs");
        assert_eq!(results[0], results[2], "{cmd:?} differs between job counts");
    }
}
