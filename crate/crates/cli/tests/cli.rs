use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn ipoperf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipoperf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn csv_rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    read(dir, name)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eventstudy_on_the_fixture_writes_five_tables() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture("eventstudy/run.cfg");
    let o = ipoperf(&[
        "eventstudy",
        "--config",
        path_arg(&cfg),
        "--out",
        path_arg(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(!text(&o.stderr).contains("error"));
    for name in [
        "table_raw.csv",
        "table_adjusted.csv",
        "table_hpr.csv",
        "table_wr.csv",
        "table_first_day.csv",
    ] {
        assert!(out.path().join(name).is_file(), "{name} missing");
    }
    for g in 1..=5 {
        assert_eq!(
            csv_rows(out.path(), &format!("plot_grade_{g}.csv")).len(),
            36
        );
    }
    let raw = csv_rows(out.path(), "table_raw.csv");
    assert_eq!(raw.len(), 5);
    assert!(raw.iter().all(|r| r[1] == "3" && r[3] == "36"));
}

#[test]
fn missing_roster_is_an_input_error_naming_the_path() {
    let out = tempfile::tempdir().unwrap();
    let dir = fixture("eventstudy");
    let missing = out.path().join("nowhere/roster.csv");
    let o = ipoperf(&[
        "eventstudy",
        "--prices",
        path_arg(&dir.join("prices.csv")),
        "--benchmark",
        path_arg(&dir.join("benchmark.csv")),
        "--roster",
        path_arg(&missing),
        "--out",
        path_arg(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        text(&o.stderr).contains(path_arg(&missing)),
        "{}",
        text(&o.stderr)
    );
}

#[test]
fn months_flag_shortens_the_paths() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture("eventstudy/run.cfg");
    let o = ipoperf(&[
        "eventstudy",
        "--config",
        path_arg(&cfg),
        "--months",
        "12",
        "--out",
        path_arg(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    for g in 1..=5 {
        let rows = csv_rows(out.path(), &format!("plot_grade_{g}.csv"));
        assert_eq!(rows.len(), 12);
        assert_eq!(rows.last().unwrap()[0], "12");
    }
    assert!(read(out.path(), "config-eventstudy.txt").contains("months=12\n"));
}

#[test]
fn garch_fixture_finds_the_two_planted_effects() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture("garch/run.cfg");
    let o = ipoperf(&[
        "garch",
        "--config",
        path_arg(&cfg),
        "--out",
        path_arg(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(
        stdout.contains("2 out of 10 dummy coefficients significant"),
        "{stdout}"
    );
    let fits = csv_rows(out.path(), "garch_fits.csv");
    let significant: Vec<&str> = fits
        .iter()
        .filter(|r| r[17] == "significant")
        .map(|r| r[0].as_str())
        .collect();
    assert_eq!(significant, ["SYN01", "SYN02"]);
    let table = read(out.path(), "table_garch.csv");
    assert!(table.ends_with("*Indicates statistical significance at 5% level\n"));
}

#[test]
fn empty_dividends_make_every_dummy_inert() {
    let out = tempfile::tempdir().unwrap();
    let empty = out.path().join("dividends.csv");
    fs::write(&empty, "symbol,event_date,amount\n").unwrap();
    let cfg = fixture("garch/run.cfg");
    let o = ipoperf(&[
        "garch",
        "--config",
        path_arg(&cfg),
        "--dividends",
        path_arg(&empty),
        "--out",
        path_arg(&out.path().join("run")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("no dividend events"));
    let table = read(&out.path().join("run"), "table_garch.csv");
    let rows: Vec<&str> = table
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("SYN"))
        .collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        assert!(row.contains("indeterminate or zero-effect"), "{row}");
        assert!(row.contains(",0.0000(na),"), "{row}");
    }
    assert!(text(&o.stdout).contains("0 out of 10"));
}

#[test]
fn constrained_fits_report_no_explosive_persistence() {
    let out = tempfile::tempdir().unwrap();
    let dir = fixture("eventstudy");
    let o = ipoperf(&[
        "garch",
        "--config",
        path_arg(&dir.join("run.cfg")),
        "--constrained",
        "--out",
        path_arg(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let fits = csv_rows(out.path(), "garch_fits.csv");
    assert_eq!(fits.len(), 15);
    for r in fits {
        let alpha: f64 = r[8].parse().unwrap();
        let beta: f64 = r[10].parse().unwrap();
        assert!(alpha + beta < 1.0, "{}: {alpha} + {beta}", r[0]);
        assert_eq!(r[16], "true");
    }
}

fn manifest(dir: &Path, command: &str) -> String {
    read(dir, &format!("manifest-{command}.json"))
}

#[test]
fn repeated_runs_and_config_echo_reproduce_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixture("garch/run.cfg");
    for dir in [a.path(), b.path()] {
        for cmd in ["eventstudy", "garch"] {
            let o = ipoperf(&[cmd, "--config", path_arg(&cfg), "--out", path_arg(dir)]);
            assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
        }
    }
    for cmd in ["eventstudy", "garch"] {
        assert_eq!(manifest(a.path(), cmd), manifest(b.path(), cmd));
    }

    let echo = a.path().join("config-garch.txt");
    let c = tempfile::tempdir().unwrap();
    let o = ipoperf(&[
        "garch",
        "--config",
        path_arg(&echo),
        "--out",
        path_arg(c.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert_eq!(manifest(a.path(), "garch"), manifest(c.path(), "garch"));
}

fn rmse_column(dir: &Path) -> Vec<f64> {
    csv_rows(dir, "simulation_report.csv")
        .iter()
        .map(|r| r[4].parse().unwrap())
        .collect()
}

#[test]
fn simulate_reports_six_rows_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let o = ipoperf(&["simulate", "--seed", "8", "--out", path_arg(dir)]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    }
    let rows = csv_rows(a.path(), "simulation_report.csv");
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["c1", "c2", "c3", "c4", "c5", "c6"]);
    assert_eq!(
        read(a.path(), "simulation_report.csv"),
        read(b.path(), "simulation_report.csv")
    );
    assert_eq!(
        manifest(a.path(), "simulate"),
        manifest(b.path(), "simulate")
    );
}

#[test]
fn simulate_rmse_falls_when_the_series_doubles() {
    let short = tempfile::tempdir().unwrap();
    let long = tempfile::tempdir().unwrap();
    for (dir, t) in [(short.path(), "1000"), (long.path(), "2000")] {
        let o = ipoperf(&[
            "simulate",
            "--length",
            t,
            "--seed",
            "3",
            "--out",
            path_arg(dir),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    }
    for (i, (s, l)) in rmse_column(short.path())
        .into_iter()
        .zip(rmse_column(long.path()))
        .enumerate()
    {
        assert!(l < s, "c{}: {l} vs {s}", i + 1);
    }
}

#[test]
fn infeasible_truth_is_an_input_error() {
    let out = tempfile::tempdir().unwrap();
    let o = ipoperf(&["simulate", "--c3", "-1", "--out", path_arg(out.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
    assert!(text(&o.stderr).starts_with("error:"));
}

#[test]
fn bad_config_and_usage_are_input_errors() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("bad.cfg");
    fs::write(&cfg, "months=twelve\n").unwrap();
    let o = ipoperf(&["eventstudy", "--config", path_arg(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("bad.cfg:1"));
    assert_eq!(ipoperf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        ipoperf(&["eventstudy", "--months", "0"]).status.code(),
        Some(2)
    );
}
