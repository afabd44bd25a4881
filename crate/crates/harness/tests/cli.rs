use std::process::Command;

fn iacv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iacv"))
}

const CONFIG: &str = r#"
solver = "proxgd"
n = 30
p = 3
sparsity = 2
lambda_coef = 1e-3
iterations = 20
trials = 2
seed = 5
methods = ["exact", "iacv", "ns", "ij", "baseline"]
output_dir = "placeholder"

[cadence]
kind = "log"
points = 6
"#;

#[test]
fn run_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let status = iacv().args(["run", "--config"]).arg(&cfg).arg("--output-dir").arg(&out).status().unwrap();
    assert!(status.success());
    for f in ["metrics.csv", "summary.csv", "timing.csv", "checksum.sha256"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("trial,method,t,err_approx,err_cv,rel_err_cv,cv_loss,cum_wall_time_seconds,note\n"));

    for (input, name) in [("summary.csv", "s.svg"), ("metrics.csv", "m.svg")] {
        let svg = dir.path().join(name);
        let status = iacv().arg("plot").arg("--input").arg(out.join(input)).arg("--out").arg(&svg).status().unwrap();
        assert!(status.success(), "{input}");
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") && text.matches("<polyline").count() >= 4, "{input}");
    }
}

#[test]
fn compare_runtime_reports_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = iacv().args(["compare-runtime", "--iterations", "5", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("speedup exact / (iacv + full)"), "{text}");
    assert!(text.contains("exact 870 gradients"), "{text}");
}

#[test]
fn gen_data_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let args = ["gen-data", "--n", "12", "--p", "3", "--s", "1", "--seed", "4", "--out"];
    assert!(iacv().args(args).arg(&path).status().unwrap().success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.starts_with("y,x_1,x_2,x_3\n"));
}

#[test]
fn bad_config_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, format!("{CONFIG}\nmomentum = 0.9\n")).unwrap();
    let out = iacv().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("momentum"));
}
