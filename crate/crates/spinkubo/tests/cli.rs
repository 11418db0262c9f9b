use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_KM: &str = r#"
[model]
t = 1.0
lambda_v = 0.1
lambda_so = 0.06
lambda_r = 0.05

[numerics]
m = 12
r = 4
l_max = 11
oracle_sides = [9]
"#;

fn spinkubo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinkubo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn first_line(p: &Path) -> String {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn atomic_limit_reports_zero_spin_conductivity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.toml",
        "[model]\nlambda_v = 1.0\n[numerics]\nm = 12\nr = 4\n",
    );
    let out = tmp.path().join("out");
    let o = spinkubo(&["sigma", &cfg, "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("sigma.json"));
    assert_eq!(report["sigma_k"]["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn every_subcommand_writes_its_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "km.toml", SMALL_KM);
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    for cmd in [
        "bands",
        "gap",
        "projector",
        "sigma",
        "torque",
        "conductance",
        "chern",
        "decomposition",
        "oracle-check",
    ] {
        let o = spinkubo(&[cmd, &cfg, "--output-dir", out_s, "--threads", "2"]);
        assert!(
            o.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let summary: Value = serde_json::from_slice(&o.stdout).expect("summary is JSON");
        assert!(summary.is_object(), "{cmd}");
    }
    assert_eq!(first_line(&out.join("bands.csv")), "k1,k2,e1,e2,e3,e4");
    assert_eq!(
        first_line(&out.join("conductance.csv")),
        "L,GK_re,GK_im,tail_bound"
    );
    assert_eq!(
        first_line(&out.join("g_b_series.csv")),
        "L,value_re,value_im,tail_bound"
    );
    assert_eq!(
        fs::read_to_string(out.join("bands.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 144
    );
    let dump = read_json(&out.join("projector_kernel.json"));
    assert_eq!(dump["radius"], 4);
    assert_eq!(dump["blocks"].as_array().unwrap().len(), 81);
    let torque = read_json(&out.join("torque.json"));
    assert!(torque["tau"]["bound"].is_number());
    let gap = read_json(&out.join("gap.json"));
    assert!(gap["width"].as_f64().unwrap() > 0.0);
}

#[test]
fn outputs_are_bit_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "km.toml", SMALL_KM);
    let dirs = [tmp.path().join("one"), tmp.path().join("many")];
    for (dir, threads) in dirs.iter().zip(["1", "4"]) {
        for cmd in ["conductance", "projector", "sigma"] {
            let o = spinkubo(&[
                cmd,
                &cfg,
                "--output-dir",
                dir.to_str().unwrap(),
                "--threads",
                threads,
            ]);
            assert!(o.status.success());
        }
    }
    for name in [
        "conductance.csv",
        "conductance.json",
        "projector_kernel.json",
        "projector.json",
        "sigma.json",
    ] {
        assert_eq!(
            fs::read(dirs[0].join(name)).unwrap(),
            fs::read(dirs[1].join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        "bad.toml",
        "[model]\nt = 1.0\n[numerics]\nm = 10\nr = 5\n",
    );
    let o = spinkubo(&["sigma", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "ConfigInvalid");
    assert_eq!(err["exit_code"], 2);

    let o = spinkubo(&["sigma", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = spinkubo(&["nonsense", &bad]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn closed_gap_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "g.toml",
        "[model]\nt = 1.0\n[numerics]\nm = 12\nr = 4\n",
    );
    let o = spinkubo(&[
        "torque",
        &cfg,
        "--output-dir",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "GapClosed");
}

#[test]
fn sweep_tracks_the_staggering_transition() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        r#"
[model]
t = 1.0
lambda_so = 0.1

[numerics]
m = 24
r = 10

[sweep]
first = { parameter = "lambda_v", start = 0.1, stop = 1.3, steps = 3 }
"#,
    );
    let out = tmp.path().join("o");
    let o = spinkubo(&["sweep", &cfg, "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "lambda_v",
            "status",
            "gap_lower",
            "gap_upper",
            "sigma_K",
            "sigma_K_bound",
            "tau",
            "tau_bound",
            "chern_up",
            "chern_down"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let sigma = |r: &csv::StringRecord| r[4].parse::<f64>().unwrap();
    assert!((sigma(&rows[0]).abs() - 1.0).abs() < 1e-2);
    assert!(sigma(&rows[2]).abs() < 1e-2);
    assert_eq!(&rows[0][8], "1");
    assert_eq!(&rows[2][8], "0");
}
