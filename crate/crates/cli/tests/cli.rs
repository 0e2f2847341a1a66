use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dyncovar(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyncovar"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&dyncovar(&["simulate", "--n", "500", "--out", "sim.csv", "--seed", "3"], d));
    assert_eq!(data_rows(&d.join("sim.csv")), 500);

    let stdout = ok(&dyncovar(
        &["fit", "--input", "sim.csv", "--variant", "SAV_diag", "--beta", "0.9", "--alpha", "0.9", "--out", "fit.csv"],
        d,
    ));
    assert!(stdout.contains("SAV-diag"));
    let report = fs::read_to_string(d.join("fit.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "equation,parameter,estimate,std_error");
    assert_eq!(lines.len() - 1, 6);
    assert_eq!(lines.iter().filter(|l| l.starts_with("VaR,")).count(), 3);
    assert_eq!(lines.iter().filter(|l| l.starts_with("CoVaR,")).count(), 3);
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.csv", "b.csv"] {
        ok(&dyncovar(&["--seed", "11", "simulate", "--n", "300", "--out", name], d));
    }
    ok(&dyncovar(&["--seed", "12", "simulate", "--n", "300", "--out", "c.csv"], d));
    let read = |n: &str| fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn forecast_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&dyncovar(&["simulate", "--n", "520", "--out", "sim.csv"], d));
    for (model, out) in [("SAV-diag", "base.csv"), ("AS-pos", "alt.csv")] {
        ok(&dyncovar(
            &[
                "forecast", "--input", "sim.csv", "--model", model, "--beta", "0.9", "--alpha", "0.9", "--window", "400",
                "--refit-every", "60", "--restarts", "3", "--out", out, "--plot-dir", "plots",
            ],
            d,
        ));
        assert_eq!(data_rows(&d.join(out)), 120);
    }
    assert_eq!(data_rows(&d.join("plots/var_plot.csv")), 120);
    assert_eq!(data_rows(&d.join("plots/covar_plot.csv")), 120);

    let stdout = ok(&dyncovar(
        &["compare", "--base", "base.csv", "--alt", "alt.csv", "--beta", "0.9", "--alpha", "0.9", "--out", "cmp.csv"],
        d,
    ));
    assert!(stdout.contains("baseline"), "{stdout}");
    let cmp = fs::read_to_string(d.join("cmp.csv")).unwrap();
    let alt_row = cmp.lines().nth(2).unwrap();
    let zone = alt_row.split(',').nth(6).unwrap();
    assert!(["red", "grey", "orange", "green", "yellow"].contains(&zone), "{alt_row}");
    let p_var: f64 = alt_row.split(',').nth(7).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&p_var));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "n = 250\nout = from_config.csv\nseed = 5\n").unwrap();
    ok(&dyncovar(&["--config", "run.cfg", "simulate"], d));
    assert_eq!(data_rows(&d.join("from_config.csv")), 250);
    ok(&dyncovar(&["--config", "run.cfg", "simulate", "--n", "40"], d));
    assert_eq!(data_rows(&d.join("from_config.csv")), 40);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(dyncovar(&["fit", "--input", "missing.csv"], d).status.code(), Some(1));
    assert_eq!(dyncovar(&["simulate", "--n", "10", "--out", "x.csv", "--rho", "2"], d).status.code(), Some(1));
    assert_eq!(dyncovar(&["frobnicate"], d).status.code(), Some(1));
    fs::write(d.join("bad.csv"), "x,y\n1,2\n3,oops\n").unwrap();
    let out = dyncovar(&["fit", "--input", "bad.csv"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    // Too few VaR exceedances for the CoVaR stage is a numerical failure.
    ok(&dyncovar(&["simulate", "--n", "300", "--out", "s.csv"], d));
    let out = dyncovar(&["fit", "--input", "s.csv", "--beta", "0.99", "--alpha", "0.9"], d);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(dyncovar(&["--help"], d).status.code(), Some(0));
}
