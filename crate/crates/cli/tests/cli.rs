use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DAR: &str = r#"{"variant":"dar1","rho":0.5,"alpha":1.0,"beta":0.5}"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nlirf-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn nlirf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlirf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap()
}

/// Body of a stamped CSV, with its stamp checked against the manifest.
fn csv_body(dir: &Path, out: &str, file: &str) -> Vec<String> {
    let manifest: serde_json::Value = serde_json::from_str(&read(dir, &format!("{out}/manifest.json"))).unwrap();
    let hash = manifest["config_sha256"].as_str().unwrap();
    let text = read(dir, &format!("{out}/{file}"));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# manifest-sha256: {hash}"));
    lines.map(str::to_string).collect()
}

fn assert_error_line(o: &Output, kind: &str) -> String {
    assert!(!o.status.success());
    let err = stderr(o);
    let line = err.trim_end();
    assert_eq!(line.lines().count(), 1, "{err}");
    assert!(line.starts_with(&format!("error: kind={kind} message=\"")), "{err}");
    line.to_string()
}

#[test]
fn simulate_writes_trajectory_density_and_manifest() {
    let dir = scratch("simulate");
    let cfg = write(
        &dir,
        "c.json",
        &format!(r#"{{"version":"1","seed":5,"data":{{"model":{DAR},"t_len":200,"y0":[0.2]}},"simulate":{{"density_points":50}}}}"#),
    );
    let o = nlirf(&["simulate", "--config", &cfg, "--out", "o"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = csv_body(&dir, "o", "trajectory.csv");
    assert_eq!(traj[0], "t,y1");
    assert_eq!(traj.len(), 201);
    let dens = csv_body(&dir, "o", "density.csv");
    assert_eq!(dens[0], "x,density_y1");
    assert_eq!(dens.len(), 51);

    let manifest: serde_json::Value = serde_json::from_str(&read(&dir, "o/manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_overrides_config_and_changes_draws() {
    let dir = scratch("seed");
    let cfg = write(&dir, "c.json", &format!(r#"{{"version":"1","data":{{"model":{DAR},"t_len":50}}}}"#));
    assert!(nlirf(&["simulate", "--config", &cfg, "--out", "a", "--seed", "1"], &dir).status.success());
    assert!(nlirf(&["simulate", "--config", &cfg, "--out", "b", "--seed", "2"], &dir).status.success());
    assert_ne!(read(&dir, "a/trajectory.csv"), read(&dir, "b/trajectory.csv"));
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir, "b/manifest.json")).unwrap();
    assert_eq!(manifest["config"]["seed"], 2);
}

#[test]
fn manifest_replay_is_bitwise_identical() {
    let dir = scratch("replay");
    let cfg = write(
        &dir,
        "c.json",
        &format!(
            r#"{{"version":"1","seed":11,"data":{{"model":{DAR},"t_len":1500}},
               "irf":{{"y0":0.2,"horizons":3,"replications":300}}}}"#
        ),
    );
    assert!(nlirf(&["irf", "--config", &cfg, "--out", "first"], &dir).status.success());
    let o = nlirf(&["irf", "--config", "first/manifest.json", "--out", "second"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    for entry in fs::read_dir(dir.join("first")).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap();
        assert_eq!(
            fs::read(dir.join("first").join(name)).unwrap(),
            fs::read(dir.join("second").join(name)).unwrap(),
            "{name} differs"
        );
    }
    let o = nlirf(&["qmle", "--config", "first/manifest.json", "--out", "third"], &dir);
    assert_error_line(&o, "config");
}

#[test]
fn irf_writes_one_file_per_shock_with_all_routes() {
    let dir = scratch("irf");
    let cfg = write(
        &dir,
        "c.json",
        &format!(
            r#"{{"version":"1","seed":2,"data":{{"model":{DAR},"t_len":1500}},
               "irf":{{"y0":0.2,"horizons":4,"replications":200}}}}"#
        ),
    );
    let o = nlirf(&["irf", "--config", &cfg, "--out", "o"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    for delta in ["-1", "-0.5", "0.5", "1"] {
        let body = csv_body(&dir, "o", &format!("irf_delta_{delta}.csv"));
        assert_eq!(body[0], "horizon,route,delta,value,mc_se,rejected_reps");
        assert_eq!(body.len(), 1 + 3 * 4);
        for route in ["true", "direct", "lp"] {
            assert_eq!(body.iter().filter(|l| l.split(',').nth(1) == Some(route)).count(), 4);
        }
        // the two routes coincide at h = 1
        let first = |route: &str| {
            body.iter()
                .find(|l| l.starts_with("1,") && l.split(',').nth(1) == Some(route))
                .unwrap()
                .split(',')
                .nth(3)
                .unwrap()
                .to_string()
        };
        assert_eq!(first("direct"), first("lp"));
    }
}

#[test]
fn decompose_has_coefficient_and_summary_rows() {
    let dir = scratch("decompose");
    let cfg = write(
        &dir,
        "c.json",
        &format!(
            r#"{{"version":"1","data":{{"model":{DAR},"t_len":1500}},
               "decompose":{{"y0":0.2,"horizons":2,"degree":3,"replications":500}}}}"#
        ),
    );
    let o = nlirf(&["decompose", "--config", &cfg, "--out", "o"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let body = csv_body(&dir, "o", "decompose.csv");
    assert_eq!(body[0], "h,delta,degree,coefficient,contribution");
    // per horizon: degrees 0..=3 plus linear, nonlinear, total, irf
    assert_eq!(body.len(), 1 + 2 * 8);
    for label in ["linear", "nonlinear", "total", "irf"] {
        assert_eq!(body.iter().filter(|l| l.split(',').nth(2) == Some(label)).count(), 2);
    }
    let table = csv_body(&dir, "o", "decompose_table.csv");
    assert_eq!(table[0], "quantity,h,value,se");
}

#[test]
fn qmle_reads_a_csv_written_by_simulate() {
    let dir = scratch("qmle");
    let cfg = write(&dir, "c.json", &format!(r#"{{"version":"1","data":{{"model":{DAR},"t_len":300}}}}"#));
    assert!(nlirf(&["simulate", "--config", &cfg, "--out", "sim"], &dir).status.success());
    let cfg = write(&dir, "q.json", r#"{"version":"1","data":{"input":"sim/trajectory.csv"}}"#);
    let o = nlirf(&["qmle", "--config", &cfg, "--out", "o"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&read(&dir, "o/qmle.json")).unwrap();
    assert!(v["result"]["params"]["rho"].as_f64().unwrap() > 0.0);
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir, "o/manifest.json")).unwrap();
    assert_eq!(manifest["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn identify_recovers_a_mixing_matrix() {
    // y = D x with independent AR(1) sources x, written as a VAR(1): A = D L D^-1.
    let (a12, a21, l1, l2) = (0.5, 0.3, 0.9, 0.2);
    let det = 1.0 - a12 * a21;
    let a = [
        [(l1 - a12 * a21 * l2) / det, a12 * (l2 - l1) / det],
        [a21 * (l1 - l2) / det, (l2 - a12 * a21 * l1) / det],
    ];
    let dir = scratch("identify");
    let cfg = write(
        &dir,
        "c.json",
        &format!(
            r#"{{"version":"1","seed":4,"data":{{"model":{{"variant":"gaussian_var1","a":[[{},{}],[{},{}]],"d":[[1.0,{a12}],[{a21},1.0]]}},"t_len":40000,"burn_in":100}}}}"#,
            a[0][0], a[0][1], a[1][0], a[1][1]
        ),
    );
    let o = nlirf(&["identify", "--config", &cfg, "--out", "o"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&read(&dir, "o/identify.json")).unwrap();
    let cands = v["result"]["candidates"].as_array().unwrap();
    assert!(cands.iter().any(|c| {
        (c["a12"].as_f64().unwrap() - a12).abs() < 0.05 && (c["a21"].as_f64().unwrap() - a21).abs() < 0.05
    }), "{cands:?}");
    assert_eq!(csv_body(&dir, "o", "sources.csv")[0], "t,y1,y2");
}

#[test]
fn markov_test_emits_a_verdict() {
    let dir = scratch("markov");
    let cfg = write(
        &dir,
        "c.json",
        r#"{"version":"1","data":{"model":{"variant":"gaussian_ar1","rho":0.5,"sigma":1.0},"t_len":1000},"markov_test":{"reps":100}}"#,
    );
    let o = nlirf(&["markov-test", "--config", &cfg, "--out", "o"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&read(&dir, "o/markov_test.json")).unwrap();
    assert_eq!(v["result"]["degrees_of_freedom"], 4);
    assert!(v["result"]["reject"].is_boolean());
}

#[test]
fn bench_writes_records_and_summary() {
    let dir = scratch("bench");
    let cfg = write(
        &dir,
        "c.json",
        r#"{"version":"1","bench":{"model":{"variant":"gaussian_ar1","rho":0.5,"sigma":1.0},
            "sample_sizes":[200,800],"seeds":10,"target":{"kind":"cond_cdf","points":[[0.0,0.0],[0.5,0.5]]}}}"#,
    );
    let o = nlirf(&["bench", "--config", &cfg, "--out", "o"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = csv_body(&dir, "o", "bench_records.csv");
    assert_eq!(records[0], "T,seed,route,target,estimate,oracle,abs_err");
    assert_eq!(records.len(), 1 + 2 * 10 * 2);
    let summary = csv_body(&dir, "o", "bench_summary.csv");
    assert!(summary.iter().any(|l| l.starts_with("slope,kernel,,")));
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let dir = scratch("errors");
    let unknown = write(&dir, "u.json", r#"{"version":"1","sede":1}"#);
    let line = assert_error_line(&nlirf(&["qmle", "--config", &unknown], &dir), "config");
    assert!(line.contains("unknown field"), "{line}");

    let version = write(&dir, "v.json", r#"{"version":"9"}"#);
    assert_error_line(&nlirf(&["qmle", "--config", &version], &dir), "config");

    write(&dir, "nan.csv", "t,y1\n1,0.1\n2,0.2\n3,NaN\n");
    let nan = write(&dir, "n.json", r#"{"version":"1","data":{"input":"nan.csv"}}"#);
    let line = assert_error_line(&nlirf(&["qmle", "--config", &nan], &dir), "parse");
    assert!(line.contains("line 4"), "{line}");

    write(&dir, "empty.csv", "t,y1\n");
    let empty = write(&dir, "e.json", r#"{"version":"1","data":{"input":"empty.csv"}}"#);
    let line = assert_error_line(&nlirf(&["qmle", "--config", &empty], &dir), "parse");
    assert!(line.contains("empty series"), "{line}");

    let missing = write(&dir, "m.json", r#"{"version":"1","data":{"input":"nope.csv"}}"#);
    assert_error_line(&nlirf(&["qmle", "--config", &missing], &dir), "io");

    assert_error_line(&nlirf(&["qmle"], &dir), "config");
    let o = nlirf(&["frobnicate"], &dir);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "usage");

    let explosive = write(
        &dir,
        "x.json",
        r#"{"version":"1","data":{"model":{"variant":"gaussian_ar1","rho":1.5,"sigma":1.0}}}"#,
    );
    assert_error_line(&nlirf(&["simulate", "--config", &explosive], &dir), "invalid_model");
}
