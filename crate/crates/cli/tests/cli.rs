use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nvsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvsim"))
        .args(args)
        .env_remove("NVSIM_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_every_listed_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = nvsim(&[
        "run",
        "--model",
        "a",
        "--seed",
        "1",
        "--t-max",
        "300",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 301);

    let manifest = json(&out.join("manifest.json"));
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    for f in ["trace.csv", "summary.json", "config.toml", "manifest.json"] {
        assert!(files.contains(&f), "{f} not listed");
    }
    let mut on_disk: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = files.iter().map(|s| s.to_string()).collect();
    listed.sort();
    assert_eq!(on_disk, listed, "no stray temp files, nothing unlisted");

    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["config_hash"], manifest["config_hash"]);
    assert_eq!(summary["t_max"], 300);
}

#[test]
fn model_b_summary_has_cycle_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvsim(&[
        "run",
        "--model",
        "b-coupled",
        "--t-max",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["cycle"].is_object());
    assert!(summary["cycle"].get("period").is_some());
    assert!(summary["calcium"]["enqueued"].as_u64().is_some());
    for f in ["astro.csv", "plasticity.csv"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn missing_config_is_io_error_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvsim(&[
        "run",
        "--model",
        "a",
        "--config",
        "/no/such/cfg.toml",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/cfg.toml"));
}

#[test]
fn invalid_config_reports_all_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "t_max = 0\nneuron.init_fire_a = 2.0\ncapillary.d_c = 0\n",
    )
    .unwrap();
    let o = nvsim(&[
        "run",
        "--model",
        "a",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for key in ["t_max", "neuron.init_fire_a", "capillary.d_c"] {
        assert!(err.contains(key), "missing {key} in:\n{err}");
    }
    assert!(
        !dir.path().join("o").exists(),
        "nothing written on validation failure"
    );
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "capillary.n_fring = 3\n").unwrap();
    let o = nvsim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_fring"));
}

#[test]
fn env_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nvsim"))
        .args([
            "run",
            "--config",
            &repo_config("fig2.toml"),
            "--t-max",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("NVSIM_CAPILLARY__N_FIRING", "33")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(cfg.contains("n_firing = 33"), "{cfg}");
}

#[test]
fn runs_are_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for (k, workers) in ["1", "1", "4"].iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let o = nvsim(&[
            "run",
            "--config",
            &repo_config("fig5.toml"),
            "--seed",
            "9",
            "--t-max",
            "120",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        traces.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert_eq!(traces[0], traces[2]);
}

fn check_golden(config: &str, expected: &str) {
    let dir = tempfile::tempdir().unwrap();
    let o = nvsim(&[
        "run",
        "--config",
        golden(config).to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let want = std::fs::read_to_string(golden(expected)).unwrap();
    assert_eq!(got, want, "trace schema or numerics drifted for {config}");
}

#[test]
fn golden_model_a_trace() {
    check_golden("small_a.toml", "small_a_trace.csv");
}

#[test]
fn golden_model_b_trace() {
    check_golden("small_b.toml", "small_b_trace.csv");
}

#[test]
fn sweep_counts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvsim(&[
        "sweep",
        "--model",
        "a",
        "--t-max",
        "20",
        "--param",
        "capillary.n_firing=20:40:3",
        "--seeds",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("cell,seed,capillary.n_firing,mean_firing_fraction"));
    assert!(lines[1].starts_with("0,1,"));
    assert!(lines[6].starts_with("2,2,"));
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for (k, jobs) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let o = nvsim(&[
            "sweep",
            "--model",
            "b-pure",
            "--t-max",
            "30",
            "--param",
            "neuron.phi_b=1:1.4:3",
            "--seeds",
            "2",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(std::fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn sweep_rejects_unknown_and_duplicate_keys() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = nvsim(&[
        "sweep",
        "--model",
        "a",
        "--param",
        "capillary.nope=0:1:2",
        "--out",
        d,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("capillary.nope"));
    assert!(err.contains("capillary.n_firing"), "valid keys listed");

    let o = nvsim(&[
        "sweep",
        "--model",
        "a",
        "--param",
        "synapse.mu=0:0.1:2",
        "--param",
        "synapse.mu=0:0.2:2",
        "--out",
        d,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    for (model, out) in [("a", "a"), ("b-pure", "pure"), ("b-coupled", "coupled")] {
        let o = nvsim(&["run", "--model", model, "--t-max", "60", "--out", &p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for fig in ["2", "3"] {
        let svg = p(&format!("fig{fig}.svg"));
        let o = nvsim(&[
            "plot",
            "--trace",
            &p("a/trace.csv"),
            "--figure",
            fig,
            "--out",
            &svg,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    }
    let svg = p("fig5.svg");
    let o = nvsim(&[
        "plot",
        "--trace",
        &p("pure/trace.csv"),
        "--trace",
        &p("coupled/trace.csv"),
        "--figure",
        "5",
        "--out",
        &svg,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("</svg>"));

    let o = nvsim(&[
        "plot",
        "--trace",
        &p("coupled/trace.csv"),
        "--figure",
        "3",
        "--out",
        &p("bad.svg"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`cmp`"));

    let o = nvsim(&[
        "plot",
        "--trace",
        &p("a/trace.csv"),
        "--figure",
        "5",
        "--out",
        &p("bad.svg"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`row_1`"));
}
