use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_mobo-pc");

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SCHAFFER: &str = r#"
iterations = 20
initial_design = 5
seed = 4
preferences = [[0, 1]]

[objective]
benchmark = "schaffer_n1"

[sampling]
acquisition_samples = 200
prob_samples = 300
"#;

fn run(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_all_outputs_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "schaffer.toml", SCHAFFER);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &[]).status.success());
    for file in ["trace.csv", "pareto.json", "summary.json", "timings.csv"] {
        assert!(a.join(file).exists(), "{file}");
    }
    assert_eq!(fs::read(a.join("pareto.json")).unwrap(), fs::read(b.join("pareto.json")).unwrap());
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());

    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "run,t,phase,x_0,y_0,y_1,s_x,acquisition,hv");
    assert_eq!(lines.count(), 25);

    // re-ingesting pareto.json reproduces the reported hypervolume
    let out = Command::new(BIN).args(["hv", "--points"]).arg(a.join("pareto.json")).output().unwrap();
    let hv: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    let reported = summary(&a)["final_hypervolume"].as_f64().unwrap();
    assert!((hv - reported).abs() <= 1e-9 * reported.max(1.0));
}

#[test]
fn hv_of_csv_with_explicit_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let points = write_config(tmp.path(), "points.csv", "a,b\n1,2\n2,1\n");
    let out = Command::new(BIN).args(["hv", "--points"]).arg(&points).args(["--z", "-1,-1"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let hv: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    // Boxes 2x3 and 3x2 overlap in a 2x2 box.
    assert!((hv - 8.0).abs() < 1e-12, "{hv}");
}

#[test]
fn constrained_run_is_more_compliant_than_unconstrained() {
    let tmp = tempfile::tempdir().unwrap();
    let constrained = write_config(tmp.path(), "c.toml", SCHAFFER);
    let plain = write_config(
        tmp.path(),
        "p.toml",
        &SCHAFFER.replace("preferences = [[0, 1]]", "compliance_preferences = [[0, 1]]"),
    );
    let (a, b) = (tmp.path().join("c"), tmp.path().join("p"));
    assert!(run(&constrained, &a, &[]).status.success());
    assert!(run(&plain, &b, &[]).status.success());
    let frac = |d: &Path| summary(d)["compliance"]["fraction"].as_f64().unwrap();
    assert!(frac(&a) > frac(&b), "{} vs {}", frac(&a), frac(&b));

    let out = Command::new(BIN)
        .args(["compliance", "--benchmark", "schaffer_n1", "--tuple", "0,1", "--trace"])
        .arg(a.join("trace.csv"))
        .output()
        .unwrap();
    let recomputed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(recomputed["fraction"].as_f64().unwrap(), frac(&a));
}

#[test]
fn overrides_and_merge() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "schaffer.toml", SCHAFFER);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &["--iterations", "2", "--seed", "9"]).status.success());
    assert!(run(&cfg, &b, &["--iterations", "2", "--seed", "10"]).status.success());
    assert_eq!(summary(&a)["seed"].as_u64().unwrap(), 9);
    assert_eq!(summary(&a)["evaluations"].as_u64().unwrap(), 7);
    let merged = tmp.path().join("m");
    let out = Command::new(BIN).arg("merge").arg(&a).arg(&b).arg("--out").arg(&merged).output().unwrap();
    assert!(out.status.success());
    assert!(merged.join("pareto.json").exists());
}

#[test]
fn invalid_configs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write_config(tmp.path(), "u.toml", &format!("{SCHAFFER}\ncolour = \"red\"\n"));
    let bad_bench = write_config(tmp.path(), "b.toml", &SCHAFFER.replace("schaffer_n1", "zdt9"));
    let bad_tuple = write_config(tmp.path(), "t.toml", &SCHAFFER.replace("[[0, 1]]", "[[0, 5]]"));
    for cfg in [unknown, bad_bench, bad_tuple, tmp.path().join("missing.toml")] {
        let out = run(&cfg, &tmp.path().join("o"), &[]);
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn dataset_paths_resolve_against_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("study");
    fs::create_dir(&sub).unwrap();
    let mut csv = String::from("tbumper,thood,HIC,Mass\n");
    for i in 0..9 {
        let (a, b) = (1.0 + i as f64 * 0.2, 2.5 - i as f64 * 0.15);
        csv.push_str(&format!("{a},{b},{},{}\n", 500.0 + 40.0 * (a - 1.8).powi(2) + 20.0 * b, 1.5 * a + b));
    }
    fs::write(sub.join("crash.csv"), csv).unwrap();
    let cfg = write_config(
        &sub,
        "crash.toml",
        "iterations = 2\npreferences = [[0, 1]]\nout = \"results\"\n[objective]\ndataset = \"crash.csv\"\n[sampling]\nacquisition_samples = 50\nprob_samples = 50\n",
    );
    let out = Command::new(BIN).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(&sub.join("results"))["compliance"]["source"], "gp");
}

#[test]
fn bundled_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let exp = mobo_pc::cli::load_experiment(&path, None, None, None).unwrap();
            assert!(exp.out.starts_with(&dir), "{}", exp.out.display());
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
