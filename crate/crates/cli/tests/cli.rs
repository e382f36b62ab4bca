use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roadcell::evalbench::ErrorReport;
use roadcell::forecast::FeatureSet;

fn roadcell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadcell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_corridor(dir: &Path, sites: &[(&str, &str, f64)]) -> PathBuf {
    let mut text = String::new();
    for (bs, det, range) in sites {
        text.push_str(&format!(
            "[[site]]\nbs_id = \"{bs}\"\ndetector_id = \"{det}\"\nrange_miles = {range}\n\n"
        ));
    }
    let path = dir.join("corridor.toml");
    fs::write(&path, text).unwrap();
    path
}

/// Two-site synthetic experiment that trains in a second or two.
fn quick_config(dir: &Path, sites: &[(&str, &str, f64)], history: usize) -> PathBuf {
    write_corridor(dir, sites);
    let text = format!(
        "corridor = \"corridor.toml\"\nfeature_sets = [\"C\", \"FSC\"]\nseeds = [1]\n\
         split = \"1:1:1\"\nhistory = {history}\n\
         [road.synthetic]\nweeks = 3\nseed = 5\n\
         [training]\nmax_epochs = 3\npatience = 3\nhidden_size = 4\n"
    );
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path
}

const TWO_SITES: [(&str, &str, f64); 2] = [("A", "da", 3.0), ("B", "db", 2.0)];

#[test]
fn synth_road_writes_one_file_per_site() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("road");
    let r = roadcell(&["synth-road", "--weeks", "2", "--sites", "3", "--seed", "7", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 3);
    for f in &files {
        let rows = fs::read_to_string(f).unwrap().lines().count() - 1;
        assert_eq!(rows, 2 * 5 * 288);
    }
    assert_eq!(stdout(&r).lines().count(), 3);

    let again = tmp.path().join("again");
    roadcell(&["synth-road", "--weeks", "2", "--sites", "3", "--seed", "7", "--out", p(&again)]);
    for f in &files {
        let twin = again.join(f.file_name().unwrap());
        assert_eq!(fs::read(f).unwrap(), fs::read(twin).unwrap());
    }
}

#[test]
fn synth_road_rejects_zero_weeks() {
    let tmp = tempfile::tempdir().unwrap();
    let r = roadcell(&["synth-road", "--weeks", "0", "--out", p(tmp.path())]);
    assert_eq!(code(&r), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&roadcell(&["no-such-command"])), 1);
    assert_eq!(code(&roadcell(&["run"])), 1);
    assert_eq!(code(&roadcell(&["run", "--config", "/nonexistent/x.toml"])), 1);
    assert_eq!(code(&roadcell(&["--help"])), 0);
}

#[test]
fn generate_zero_flow_gives_zero_series() {
    let tmp = tempfile::tempdir().unwrap();
    let corridor = write_corridor(tmp.path(), &TWO_SITES);
    let road = tmp.path().join("road");
    let r = roadcell(&[
        "synth-road", "--corridor", p(&corridor), "--weeks", "1", "--profile", "flat", "--flow", "0",
        "--out", p(&road),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let out = tmp.path().join("gen");
    let r = roadcell(&["generate", "--corridor", p(&corridor), "--road-dir", p(&road), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    for bs in ["A", "B"] {
        let text = fs::read_to_string(out.join("cells").join(format!("{bs}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("slot_index,new_calls,handover_calls,total_calls"));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 5 * 288 - 1);
        assert!(rows.iter().all(|l| l.ends_with(",0,0,0")));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["generation"]["seed"], 0);
    assert!(manifest["defaults_applied"].as_array().unwrap().iter().any(|v| v == "seed"));
    assert_eq!(fs::read_to_string(out.join("calls.jsonl")).unwrap(), "");
}

#[test]
fn generate_reports_missing_detector() {
    let tmp = tempfile::tempdir().unwrap();
    let corridor = write_corridor(tmp.path(), &TWO_SITES);
    let road = tmp.path().join("road");
    roadcell(&["synth-road", "--corridor", p(&corridor), "--weeks", "1", "--out", p(&road)]);
    fs::remove_file(road.join("db.csv")).unwrap();
    let r = roadcell(&["generate", "--corridor", p(&corridor), "--road-dir", p(&road), "--out", p(tmp.path())]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("db"), "{}", stderr(&r));
}

#[test]
fn ingest_validate_fills_gaps_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let corridor = write_corridor(tmp.path(), &TWO_SITES);
    let road = tmp.path().join("road");
    roadcell(&["synth-road", "--corridor", p(&corridor), "--weeks", "1", "--out", p(&road)]);
    // Drop two rows from one detector; they are short enough to interpolate.
    let path = road.join("da.csv");
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .enumerate()
        .filter(|(i, _)| *i != 100 && *i != 101)
        .map(|(_, l)| l)
        .collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();

    let out = tmp.path().join("clean");
    let r = roadcell(&[
        "ingest-validate", "--corridor", p(&corridor), "--road-dir", p(&road), "--out", p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("da: 1440 slots after alignment, 2 filled"), "{}", stdout(&r));
    assert_eq!(fs::read_to_string(out.join("da.csv")).unwrap().lines().count(), 1441);
    assert!(out.join("validation.json").is_file());

    fs::write(&path, "timestamp,flow,speed\n2022-03-28T00:00:00,abc,60\n").unwrap();
    let r = roadcell(&["ingest-validate", "--corridor", p(&corridor), "--road-dir", p(&road)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains(":2:"), "{}", stderr(&r));
}

#[test]
fn run_writes_reports_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), &TWO_SITES, 6);
    let out = tmp.path().join("run");
    let r = roadcell(&[
        "run", "--config", p(&cfg), "--out", p(&out), "--seeds", "1,2", "--feature-sets", "C,FSC",
        "--noise", "0.05", "--jobs", "1",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("C->FSC"));
    for f in ["report.json", "report.txt", "manifest.json", "improvement_C_FSC.csv", "noise_improvement_C_FSC.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report = ErrorReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.sites.len(), 2);
    for site in &report.sites {
        assert_eq!(site.row(FeatureSet::FSC).unwrap().runs.len(), 2);
    }
    assert!(report.noise.is_some());
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), stdout(&r));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    // (C, FSC clean + FSC noisy) x 2 sites x 2 seeds.
    assert_eq!(manifest["models_trained"], 12);
    let defaults: Vec<&str> = manifest["defaults_applied"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(defaults.contains(&"training.learning_rate"));
    assert!(defaults.contains(&"generation.lambda_per_min"));
    assert!(!defaults.contains(&"seeds"));
    assert_eq!(manifest["config"]["seeds"], serde_json::json!([1, 2]));
}

#[test]
fn training_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), &TWO_SITES, 6);
    let text = fs::read_to_string(&cfg).unwrap().replace("[training]\n", "[training]\nlearning_rate = 1e300\n");
    fs::write(&cfg, text).unwrap();
    let r = roadcell(&["run", "--config", p(&cfg), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    let err = stderr(&r);
    assert!(err.contains("diverged") && err.contains("feature set") && err.contains("seed 1"), "{err}");
}

#[test]
fn report_merges_and_checks_compatibility() {
    let tmp = tempfile::tempdir().unwrap();
    let a_dir = tmp.path().join("a");
    let b_dir = tmp.path().join("b");
    let c_dir = tmp.path().join("c");
    for d in [&a_dir, &b_dir, &c_dir] {
        fs::create_dir_all(d).unwrap();
    }
    let cfg_a = quick_config(&a_dir, &[("A", "da", 3.0)], 6);
    let cfg_b = quick_config(&b_dir, &[("B", "db", 2.0)], 6);
    let cfg_c = quick_config(&c_dir, &[("C", "dc", 2.0)], 4);
    let mut printed = String::new();
    for (cfg, dir) in [(&cfg_a, &a_dir), (&cfg_b, &b_dir), (&cfg_c, &c_dir)] {
        let r = roadcell(&["run", "--config", p(cfg), "--out", p(&dir.join("out"))]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        if dir == &a_dir {
            printed = stdout(&r);
        }
    }

    let single = roadcell(&["report", p(&a_dir.join("out"))]);
    assert_eq!(code(&single), 0);
    assert_eq!(stdout(&single), printed);

    let merged_dir = tmp.path().join("merged");
    let merged = roadcell(&["report", p(&a_dir.join("out")), p(&b_dir.join("out")), "--out", p(&merged_dir)]);
    assert_eq!(code(&merged), 0, "{}", stderr(&merged));
    let report = ErrorReport::from_json(&fs::read_to_string(merged_dir.join("report.json")).unwrap()).unwrap();
    let ids: Vec<&str> = report.sites.iter().map(|s| s.bs_id.as_str()).collect();
    assert_eq!(ids, ["A", "B"]);

    let again = roadcell(&["report", p(&merged_dir)]);
    assert_eq!(stdout(&again), stdout(&merged));

    let clash = roadcell(&["report", p(&a_dir.join("out")), p(&c_dir.join("out"))]);
    assert_eq!(code(&clash), 1);
    assert!(stderr(&clash).contains("history"), "{}", stderr(&clash));
}
