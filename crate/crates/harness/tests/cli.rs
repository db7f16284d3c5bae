use std::process::Command;

fn adavaw() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adavaw"))
}

fn configs() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn seed_is_mandatory() {
    let out = adavaw()
        .args(["generate", "--config"])
        .arg(configs().join("stream.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_then_run_on_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let st = adavaw()
        .args(["generate", "--seed", "5", "--n", "300", "--config"])
        .arg(configs().join("stream.json"))
        .arg("--output")
        .arg(&series)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&series).unwrap();
    assert!(text.starts_with("t,theta,y\n"));
    assert_eq!(text.lines().count(), 301);

    // reorder the columns into the input format t,y,theta
    let mut input = String::from("t,y,theta\n");
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        input.push_str(&format!("{},{},{}\n", f[0], f[2], f[1]));
    }
    let input_path = dir.path().join("input.csv");
    std::fs::write(&input_path, input).unwrap();
    let out_dir = dir.path().join("run");
    let out = adavaw()
        .args(["run", "--seed", "1", "--sigma", "0.2", "--k", "0", "--emit-plot-data", "--config"])
        .arg(configs().join("run.json"))
        .arg("--input")
        .arg(&input_path)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n"], 300);
    assert_eq!(report["k"], 0);
    assert!(out_dir.join("trace.csv").exists());
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("plot_data.csv").exists());
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"policies\": []}").unwrap();
    let st = adavaw().args(["sweep", "--seed", "0", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let empty = dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"generator": {"kind": "constant", "value": 0.0, "bound": 1.0},
            "noise": {"sigma": 0.1}, "policies": [{"kind": "ada_vaw", "k": 0}],
            "n_grid": [], "seeds": [0], "output_dir": null}"#,
    )
    .unwrap();
    let st = adavaw().args(["sweep", "--seed", "0", "--config"]).arg(&empty).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"generator": {"kind": "holder", "k": 1, "radius": 10.0, "bound": 1e-6},
            "noise": {"sigma": 0.1}, "policies": [{"kind": "ada_vaw", "k": 0}],
            "n_grid": [64], "seeds": [0], "output_dir": null}"#,
    )
    .unwrap();
    let st = adavaw().args(["sweep", "--seed", "0", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(3));
}

#[test]
fn sweep_writes_summary_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = adavaw()
        .args(["sweep", "--seed", "10", "--n", "128", "256", "--emit-plot-data", "--config"])
        .arg(configs().join("sweep_tv0.json"))
        .arg("--output")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 5 * 2 * 8);
    let plot = std::fs::read_to_string(dir.path().join("plot_data.csv")).unwrap();
    assert!(plot.starts_with("policy,n,seed,metric,value\n"));
    assert_eq!(plot.lines().count(), 1 + 3 * 5 * 2 * 8);
    assert!(dir.path().join("ada_vaw_k0/n128/seed10/report.json").exists());
}

#[test]
fn padding_demo_prints_json() {
    let out = adavaw()
        .args(["padding-demo", "--seed", "0", "--length", "48", "--k", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["padded_length"], 64);
    assert!(v["zero_pad_tv"].as_f64().unwrap() > v["packed_tv"].as_f64().unwrap());
}

#[test]
fn bench_prints_a_row_per_horizon() {
    let out = adavaw()
        .args(["bench", "--seed", "0", "--k", "1", "--n", "256", "512"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("n,k,seconds,ratio\n256,1,"));
}
