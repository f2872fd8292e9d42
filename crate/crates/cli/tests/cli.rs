use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use jumpdual_cli::RunConfig;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn jumpdual(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_jumpdual"))
        .args(args)
        .env("JUMPDUAL_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Data rows of a CSV written by the tool, split on commas.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn cell(v: &str) -> Option<f64> {
    (!v.is_empty()).then(|| v.parse().unwrap())
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["fig1.toml", "fig3.toml", "regime.toml"] {
        let cfg = RunConfig::load(&config(name)).unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg, "{name}");
        cfg.resolve().unwrap();
    }
}

#[test]
fn optimize_reports_case_four_for_fig1() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(&["optimize", "-c", config("fig1.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("pi_hat = 1.0288992667, case = 4"), "{}", out.stdout);
    assert!(out.stdout.contains("zeta_hat = -0.0050000000"), "{}", out.stdout);
}

#[test]
fn optimize_reports_case_one_for_fig3() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(&["optimize", "-c", config("fig3.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("pi_hat = -9.2293544664, case = 1"), "{}", out.stdout);
}

#[test]
fn gamma_flag_overrides_the_utility() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(
        &["optimize", "-c", config("fig1.toml").to_str().unwrap(), "--gamma", "0"],
        tmp.path(),
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("utility: log"));
    assert!(out.stdout.contains("pi_hat = 0.7460618540, case = 2"), "{}", out.stdout);
}

#[test]
fn borrowing_below_lending_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(config("fig1.toml")).unwrap().replace("borrow_rate = 0.05", "borrow_rate = 0.04");
    let path = write_config(tmp.path(), "bad.toml", &text);
    let out = jumpdual(&["optimize", "-c", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("model.regimes[0].borrow_rate"), "{}", out.stderr);
}

#[test]
fn unknown_keys_and_bad_flags_are_validation_errors() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(config("fig1.toml")).unwrap().replace("[mc]", "[mc]\nthreads = 4");
    let path = write_config(tmp.path(), "bad.toml", &text);
    let out = jumpdual(&["optimize", "-c", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("threads"), "{}", out.stderr);
    let out = jumpdual(&["figures", "5", "-c", config("fig1.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 1);
}

#[test]
fn infeasible_models_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
horizon = 1.0
wealth = 1.0
[model]
[[model.regimes]]
rate = 0.03
drift = 0.08
intensity = 0.0
jumps = { kind = "exponential_positive", rate = 10.0 }
[utility]
kind = "log"
[constraint]
margin = "frictionless"
"#;
    let path = write_config(tmp.path(), "unbounded.toml", text);
    let out = jumpdual(&["optimize", "-c", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 2, "{}{}", out.stdout, out.stderr);
    assert!(out.stderr.contains("infeasible"), "{}", out.stderr);

    // Power utility needs deterministic coefficients.
    let regime = config("regime.toml");
    let out = jumpdual(&["simulate", "-c", regime.to_str().unwrap(), "--gamma", "0.5"], tmp.path());
    assert_eq!(out.code, 2, "{}", out.stderr);
}

#[test]
fn figure1_anchor_row_and_provenance() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(&["figures", "1", "-c", config("fig1.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 0, "{}", out.stderr);
    let path = tmp.path().join("figure1.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# jumpdual figures 1 config_sha256="), "{header}");
    assert!(header.ends_with(" seed=1"), "{header}");
    let hash = header.split("config_sha256=").nth(1).unwrap().split(' ').next().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(lines.next().unwrap(), "pi,h_gamma0,h_gamma0.25,h_gamma0.5,h_gamma0.75,h_gamma0.9");

    let data = rows(&path);
    assert_eq!(data.len(), 500);
    assert_eq!(cell(&data[0][0]), Some(0.0));
    for v in &data[0][1..] {
        assert!((cell(v).unwrap() - 0.0611111).abs() < 1e-7, "{v}");
    }
    // 17 significant digits.
    assert_eq!(data[1][0].split('e').next().unwrap().len(), 18, "{}", data[1][0]);
    // h is strictly decreasing in pi for every exponent.
    for col in 1..6 {
        assert!(data.windows(2).all(|w| cell(&w[1][col]).unwrap() < cell(&w[0][col]).unwrap()));
    }
}

#[test]
fn figure_window_flags_mark_infeasible_cells() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(
        &["figures", "3", "-c", config("fig3.toml").to_str().unwrap(), "--pi-min", "-1", "--pi-max", "2"],
        tmp.path(),
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let path = tmp.path().join("figure3.csv");
    let data = rows(&path);
    for row in &data {
        let pi = cell(&row[0]).unwrap();
        assert_eq!(row[1].is_empty(), pi > 1.0, "pi = {pi}");
    }
    let footnote = fs::read_to_string(&path).unwrap().lines().last().unwrap().to_string();
    assert!(footnote.starts_with("# ") && footnote.contains("empty cell"), "{footnote}");
}

#[test]
fn figure2_sweep_is_nondecreasing() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(&["figures", "2", "-c", config("fig1.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 0, "{}", out.stderr);
    let data = rows(&tmp.path().join("figure2.csv"));
    assert_eq!(data.len(), 200);
    assert_eq!(cell(&data[199][0]), Some(0.99));
    let pi: Vec<f64> = data.iter().map(|r| cell(&r[1]).unwrap()).collect();
    assert!(pi.windows(2).all(|w| w[1] >= w[0]));
    assert!((pi[0] - 0.7460618540).abs() < 1e-9);
}

#[test]
fn figure4_stays_inside_no_borrowing() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(&["figures", "4", "-c", config("fig3.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 0, "{}", out.stderr);
    let data = rows(&tmp.path().join("figure4.csv"));
    assert_eq!(data.len(), 200);
    assert!(data.iter().all(|r| cell(&r[1]).unwrap() <= 1.0));
}

#[test]
fn value_with_symmetric_regimes_is_start_independent() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(config("fig1.toml")).unwrap();
    let regime = text
        .split("[[model.regimes]]")
        .nth(1)
        .unwrap()
        .split("[utility]")
        .next()
        .unwrap();
    let text = text.replace(regime, &format!("{regime}[[model.regimes]]{regime}"));
    let path = write_config(tmp.path(), "symmetric.toml", &text);
    let out = jumpdual(
        &["value", "-c", path.to_str().unwrap(), "--gamma", "0", "--paths", "2000"],
        tmp.path(),
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let field = |line: &str, key: &str| -> f64 {
        let rest = line.split(&format!("{key} = ")).nth(1).unwrap();
        rest.split([',', ' ']).next().unwrap().parse().unwrap()
    };
    let lines: Vec<&str> = out.stdout.lines().filter(|l| l.starts_with("start regime")).collect();
    assert_eq!(lines.len(), 2);
    for key in ["semi-analytic", "corollary", "monte carlo"] {
        assert_eq!(field(lines[0], key), field(lines[1], key), "{key}");
    }
}

#[test]
fn value_needs_log_utility() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(&["value", "-c", config("fig1.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("utility.kind"), "{}", out.stderr);
}

#[test]
fn simulate_without_jumps_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(config("fig1.toml")).unwrap().replace("intensity = 1.0", "intensity = 0.0");
    let path = write_config(tmp.path(), "calm.toml", &text);
    let out = jumpdual(&["simulate", "-c", path.to_str().unwrap(), "--gamma", "0", "--count", "3"], tmp.path());
    assert_eq!(out.code, 0, "{}", out.stderr);
    let dir = tmp.path().join("simulate");
    let first = rows(&dir.join("path_00000.csv"));
    assert!(first.iter().all(|r| r[1] == "0"));
    for k in 1..3 {
        assert_eq!(rows(&dir.join(format!("path_{k:05}.csv"))), first);
    }
    // Constant drift: ln S is linear in t.
    let s: Vec<(f64, f64)> = first.iter().map(|r| (cell(&r[0]).unwrap(), cell(&r[2]).unwrap().ln())).collect();
    let slope = s.last().unwrap().1 / s.last().unwrap().0;
    assert!(s.iter().all(|&(t, ls)| (ls - slope * t).abs() < 1e-12));
    assert!((slope + 0.05).abs() < 1e-12);
}

#[test]
fn output_dir_flag_beats_the_environment() {
    let env_dir = TempDir::new().unwrap();
    let flag_dir = TempDir::new().unwrap();
    let out = jumpdual(
        &[
            "figures",
            "2",
            "-c",
            config("fig1.toml").to_str().unwrap(),
            "--output-dir",
            flag_dir.path().to_str().unwrap(),
        ],
        env_dir.path(),
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(flag_dir.path().join("figure2.csv").exists());
    assert!(!env_dir.path().join("figure2.csv").exists());
}

#[test]
fn verify_passes_on_fig1() {
    let tmp = TempDir::new().unwrap();
    let out = jumpdual(&["verify", "-c", config("fig1.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.code, 0, "{}{}", out.stdout, out.stderr);
    assert!(!out.stdout.contains("FAIL"));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(tmp.path().join("verify.csv"))
        .unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert!(records.len() >= 5);
    assert!(records.iter().all(|r| &r[4] == "true"));
}
