use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 7
[data]
length = 200
[plant]
kind = "polynomial"
order = 1
terms = [
    { coeff = 0.5, y_exps = [1] },
    { coeff = 0.3, u_exps = [1] },
    { coeff = 0.1, u_exps = [3] },
]
[identification]
max_order = 2
[[scenario]]
name = "sine"
horizon = 200
reference = { kind = "sinusoid", amplitude = 0.2, period = 40.0 }
[[scenario]]
name = "steps"
horizon = 100
reference = { kind = "steps", levels = [0.1, -0.1], period = 20 }
"#;

fn nic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nic"))
        .args(args)
        .env("NIC_LOG", "error")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    (dir, cfg, out)
}

fn run(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    nic(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_pipeline_succeeds() {
    let (_dir, cfg, out) = setup(CONFIG);
    for cmd in ["generate-data", "identify", "validate", "simulate"] {
        let o = run(cmd, &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    for f in [
        "data.csv",
        "model.toml",
        "identify_report.toml",
        "validation.toml",
        "metrics.toml",
        "trajectory_sine.csv",
        "trajectory_steps.csv",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let data = fs::read_to_string(out.join("data.csv")).unwrap();
    assert!(data.starts_with("t,u,y\n"));
    assert_eq!(data.lines().count(), 201);
    let traj = fs::read_to_string(out.join("trajectory_sine.csv")).unwrap();
    assert!(traj.starts_with("t,r,y,u,xi,J,saturated\n"));
    assert_eq!(traj.lines().count(), 201);
    let metrics = fs::read_to_string(out.join("metrics.toml")).unwrap();
    assert!(metrics.contains("rms_error") && metrics.contains("saturation_duty"));
    let model = fs::read_to_string(out.join("model.toml")).unwrap();
    assert!(model.starts_with("version = 1"));
}

#[test]
fn generated_data_is_deterministic_per_seed() {
    let (_dir, cfg, out) = setup(CONFIG);
    let read = |seed: &str, name: &str| {
        let o = run("generate-data", &cfg, &out.join(name), &["--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join(name).join("data.csv")).unwrap()
    };
    assert_eq!(read("3", "a"), read("3", "b"));
    assert_ne!(read("3", "a"), read("4", "c"));
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(nic(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(nic(&["identify", "--seed", "abc"]).status.code(), Some(2));

    let (_dir, cfg, out) = setup("[controller]\nmu_max = 3\n");
    let o = run("generate-data", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mu_max"), "{}", stderr(&o));
}

#[test]
fn empty_csv_reports_file_and_line() {
    let (dir, cfg, out) = setup("[data]\npath = \"empty.csv\"\n");
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = run("identify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("empty.csv") && err.contains("line 1"), "{err}");
}

#[test]
fn malformed_row_is_located() {
    let (dir, cfg, out) = setup("[data]\npath = \"bad.csv\"\n");
    fs::write(dir.path().join("bad.csv"), "t,u,y\n0,0.1,0\n1,x,0.2\n").unwrap();
    let o = run("identify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn validate_refuses_models_without_margin() {
    let (_dir, cfg, out) = setup(CONFIG);
    assert_eq!(run("generate-data", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(run("identify", &cfg, &out, &[]).status.code(), Some(0));
    let path = out.join("model.toml");
    let text = fs::read_to_string(&path).unwrap();
    let patched: String = text
        .lines()
        .map(|l| {
            if l.starts_with("gamma_y") {
                "gamma_y = 1.5".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&path, patched).unwrap();
    let o = run("validate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma_y"), "{}", stderr(&o));
}

#[test]
fn unstable_verdict_exits_with_1_and_writes_report() {
    let config = format!("{CONFIG}\n[controller]\nu_lo = -0.02\nu_hi = 0.02\n");
    let (_dir, cfg, out) = setup(&config);
    assert_eq!(run("generate-data", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(run("identify", &cfg, &out, &[]).status.code(), Some(0));
    let path = out.join("model.toml");
    let text = fs::read_to_string(&path).unwrap();
    let patched: String = text
        .lines()
        .map(|l| {
            if l.starts_with("gamma_y") {
                "gamma_y = 0.999".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&path, patched).unwrap();
    let o = run("validate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("validation.toml")).unwrap();
    assert!(report.contains("validated-unstable"), "{report}");
}

#[test]
fn unknown_model_fields_are_rejected() {
    let (_dir, cfg, out) = setup(CONFIG);
    assert_eq!(run("generate-data", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(run("identify", &cfg, &out, &[]).status.code(), Some(0));
    let path = out.join("model.toml");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, format!("solver = \"x\"\n{text}")).unwrap();
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver"), "{}", stderr(&o));
}

#[test]
fn scenario_problems_are_listed_together() {
    let config = r#"
[[scenario]]
name = "a"
horizon = 0
reference = { kind = "constant", value = 0.1 }
[[scenario]]
name = "a"
horizon = 10
reference = { kind = "sinusoid", amplitude = 0.1, period = -1.0 }
"#;
    let (_dir, cfg, out) = setup(config);
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("horizon") && err.contains("period") && err.contains("more than once"),
        "{err}"
    );
}

#[test]
fn simulate_without_model_is_a_usage_error() {
    let (_dir, cfg, out) = setup(CONFIG);
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.toml"), "{}", stderr(&o));
}
