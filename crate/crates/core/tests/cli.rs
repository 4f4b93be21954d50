use std::path::Path;
use std::process::{Command, Output};

use racetrack_fe::io::csv::{read_eigen_csv, read_field_table, read_sweep_csv};
use racetrack_fe::io::meta::Metadata;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racetrack-fe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RACETRACK_FE_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_subcommand_prints_usage_and_exits_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_racetrack-fe")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8_lossy(&o.stderr).to_string() + &stdout(&o);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn invalid_config_exits_2_naming_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nsigma = 0.5\n").unwrap();
    let o = run(&["stability", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));

    std::fs::write(&cfg, "[model]\nsgima = 3.0\n").unwrap();
    let o = run(&["stability", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stability_lists_twenty_modes_and_flags_sign_changes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stability", "--tau", "0.8"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_eigen_csv(&dir.path().join("eigenvalues.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), (1..=20).collect::<Vec<_>>());
    assert!(rows[0].gamma < 0.0 && rows[1].gamma > 0.0);
    let text = stdout(&o);
    assert!(text.contains("Z*"), "{text}");
    assert!(text.contains('*') || text.contains("sign change"), "{text}");
    assert!(dir.path().join("stability.svg").exists());
    assert!(dir.path().join("stability.json").exists());
}

#[test]
fn both_signs_duplicates_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stability", "--k-max", "6", "--both-signs"], dir.path());
    assert!(o.status.success());
    let rows = read_eigen_csv(&dir.path().join("eigenvalues.csv")).unwrap();
    assert_eq!(rows.len(), 12);
    for r in rows.iter().filter(|r| r.k > 0) {
        let mirror = rows.iter().find(|m| m.k == -r.k).unwrap();
        assert_eq!(mirror.gamma, r.gamma);
        assert_eq!(mirror.z, r.z);
    }
}

#[test]
fn sweep_csv_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, "grid_size = 31\n[numerics]\nmax_steps = 50\n").unwrap();
    let o = run(
        &["sweep-tau", "--config", cfg.to_str().unwrap(), "--values", "1.6,0.9,0.2", "--workers", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_sweep_csv(&dir.path().join("sweep_tau.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.1).collect::<Vec<_>>(), vec![1.6, 0.9, 0.2]);
    assert!(rows.iter().all(|r| r.0 == "tau" && !r.3 && r.2.is_none()));
    let text = std::fs::read_to_string(dir.path().join("sweep_tau.csv")).unwrap();
    assert!(text.lines().any(|l| l == "param_name,param_value,spike_count,converged,steps"));
}

#[test]
fn outputs_carry_reproducible_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--grid", "17", "--seed", "9", "--max-steps", "10"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (theta, values, meta) = read_field_table(&dir.path().join("lambda_final.csv")).unwrap();
    assert_eq!(theta.len(), 17);
    assert_eq!(values.len(), 17);
    for key in ["version", "seed", "grid_size", "mu", "sigma", "tau", "Lambda", "Phi", "F", "v", "rho", "dt"] {
        assert!(meta.get(key).is_some(), "missing {key}");
    }
    assert_eq!(meta.get("seed"), Some("9"));
    assert_eq!(meta.get("grid_size"), Some("17"));

    let svg = std::fs::read_to_string(dir.path().join("simulate.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let header: String = svg.lines().filter(|l| l.contains("seed=")).collect();
    assert!(Metadata::parse_header(&header).get("seed").is_some() || svg.contains("seed=9"));
}

#[test]
fn equilibrium_reads_a_written_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--grid", "33", "--max-steps", "5"], dir.path());
    assert!(o.status.success());
    let input = dir.path().join("lambda_final.csv");
    let eq_dir = dir.path().join("eq");
    let o = run(&["equilibrium", "--lambda", input.to_str().unwrap()], &eq_dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["wage.csv", "price_index.csv", "income.csv", "real_wage.csv"] {
        let (theta, _, _) = read_field_table(&eq_dir.join(name)).unwrap();
        assert_eq!(theta.len(), 33);
    }
}

#[test]
fn diagnostics_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["diagnostics", "--tau", "0.01", "--sigma", "2.5", "--b", "0.1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert!(v["metadata"].is_object());
    assert!(v["theory"].is_object() || v["report"].is_object());
}

#[test]
fn bad_lambda_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "theta,value\n0.0,1.0\n1.0,-2.0\n2.0,1.0\n").unwrap();
    let o = run(&["equilibrium", "--lambda", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
