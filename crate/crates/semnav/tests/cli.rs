use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semnav"))
}

fn tiny_config(dir: &Path, threads: usize) -> PathBuf {
    let cfg = serde_json::json!({
        "output_dir": dir.join("run"),
        "world": {"width": 32, "height": 32},
        "observation": {"crop_size": 9, "range": 4.0},
        "arch": {"crop_size": 9, "base_channels": 2},
        "ensemble_size": 2,
        "seeds": {"train": [0, 1], "eval": [100, 101]},
        "budgets": {"offline": 40, "active": 20},
        "map_eval": {"sequences": 4},
        "episodes": {"count": 4, "hard_count": 2},
        "nav": {"config": {"max_steps": 30}},
        "threads": threads
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> std::process::Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["results", "logs"] {
        let mut entries: Vec<_> = fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.extension().is_some_and(|e| e == "csv" || e == "json") {
                out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    out
}

#[test]
fn verbs_run_in_sequence_and_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), 1);
    let out = tmp.path().join("run");

    // later stages need earlier outputs
    let early = run(&["train"], &cfg);
    assert_eq!(early.status.code(), Some(2), "{}", String::from_utf8_lossy(&early.stderr));
    assert!(String::from_utf8_lossy(&early.stderr).contains("offline.snds"));

    for verb in ["gen-worlds", "collect-offline", "train", "collect-active", "finetune", "eval-map", "eval-nav"] {
        let o = run(&[verb], &cfg);
        assert!(o.status.success(), "{verb}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "worlds/train_0.world",
        "worlds/eval_101.world",
        "episodes/easy.json",
        "episodes/hard.json",
        "data/offline.snds",
        "data/active_bald.snds",
        "models/offline.ckpt",
        "models/active_variance.ckpt",
        "logs/train_offline.csv",
        "logs/navigation_goals.csv",
        "logs/navigation_trajectories.csv",
        "results/map_prediction.csv",
        "results/active_training.csv",
        "results/navigation.csv",
        "results/ablation.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let nav = fs::read_to_string(out.join("results/navigation.csv")).unwrap();
    let methods: Vec<&str> = nav.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["random_walk", "fbe", "upper", "lower", "mixed", "mean"]);
    let ablation = fs::read_to_string(out.join("results/ablation.csv")).unwrap();
    assert_eq!(ablation.lines().count(), 5);

    let report = run(&["report"], &cfg);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("== Navigation ==") && text.contains("multi_view"));

    let render = bin().args(["render", "--episodes", "1", "--config"]).arg(&cfg).output().unwrap();
    assert!(render.status.success(), "{}", String::from_utf8_lossy(&render.stderr));
    assert!(out.join("renders/world_100.png").exists());
    assert!(out.join("renders/upper_ep0_belief.png").exists());
    let png = image::open(out.join("renders/world_100.png")).unwrap();
    assert_eq!(png.width(), 32 * 4);
}

#[test]
fn parallel_and_sequential_runs_match() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, 1), (&b, 0)] {
        let o = run(&["run"], &tiny_config(dir.path(), threads));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (csv_files(&a.path().join("run")), csv_files(&b.path().join("run")));
    assert!(!fa.is_empty());
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs");
    }
}

#[test]
fn config_errors_exit_with_code_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");

    fs::write(&bad, r#"{"seeds": {"train": [1, 2], "eval": [2]}}"#).unwrap();
    let o = run(&["gen-worlds"], &bad);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eval seed 2"));

    fs::write(&bad, r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(run(&["gen-worlds"], &bad).status.code(), Some(1));

    fs::write(&bad, r#"{"observation": {"crop_size": 9}}"#).unwrap();
    assert_eq!(run(&["gen-worlds"], &bad).status.code(), Some(1));

    assert_eq!(run(&["gen-worlds"], &tmp.path().join("missing.json")).status.code(), Some(1));
    assert_eq!(bin().arg("no-such-verb").output().unwrap().status.code(), Some(1));
}

#[test]
fn default_config_round_trips_through_the_loader() {
    let o = bin().arg("default-config").output().unwrap();
    assert!(o.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.json");
    fs::write(&path, &o.stdout).unwrap();
    let loaded = semnav::RunConfig::load(&path).unwrap();
    assert_eq!(loaded, semnav::RunConfig::default());
}
