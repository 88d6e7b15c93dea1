use std::fs;
use std::path::Path;

use pita_core::harness::{
    cmd_euler_study, cmd_exact, cmd_optimize_q, cmd_parareal, run_pipeline, ConfigBuilder,
    ExperimentConfig,
};
use pita_core::propagators::{explicit_euler_propagate, implicit_euler_endpoint};
use pita_core::LtiSystem;

fn config(out: &Path, overrides: &[&str]) -> ExperimentConfig {
    let mut b = ConfigBuilder::new();
    b.preset("paper-sigma").unwrap();
    for o in overrides {
        b.assign(o).unwrap();
    }
    b.set("out", out.display().to_string());
    b.build().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn exact_csv() {
    let dir = tempfile::tempdir().unwrap();
    cmd_exact(&config(dir.path(), &[])).unwrap();
    let text = fs::read_to_string(dir.path().join("exact.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,x2");
    assert_eq!(lines[1], "0,0,1");
    assert!(lines.last().unwrap().starts_with("0.9,"));

    cmd_exact(&config(dir.path(), &["grid.Tf = 20", "grid.N = 20"])).unwrap();
    let (_, rows) = read_csv(&dir.path().join("exact.csv"));
    let last = rows.last().unwrap();
    assert_eq!(last[0], 20.0);
    assert!((last[1] - 1.923077).abs() < 1e-6 && (last[2] - 0.384615).abs() < 1e-6);
}

#[test]
fn euler_study_single_entry_is_the_coarse_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    cmd_euler_study(&config(dir.path(), &["study.deltas = [1]"])).unwrap();
    let (header, rows) = read_csv(&dir.path().join("psi_1.csv"));
    assert_eq!(header, ["t", "x1", "x2"]);
    let sys = LtiSystem::damped_oscillator();
    let coarse = explicit_euler_propagate(&sys, &sys.y0(), 0.0, 0.9, 0.1).unwrap();
    assert_eq!(rows.len(), coarse.len());
    for (row, (t, y)) in rows.iter().zip(coarse.times().iter().zip(coarse.states())) {
        assert_eq!(row[0], *t);
        assert_eq!(&row[1..], y.as_slice());
    }
}

#[test]
fn euler_study_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &[
            "study.deltas = [1, 2, 4, 8, 16, 32, 64, 128, 200, 256, 400, 512]",
            "study.accelerate = true",
        ],
    );
    let files = cmd_euler_study(&cfg).unwrap();
    assert_eq!(files.len(), 12 + 2);
    let (header, rows) = read_csv(&dir.path().join("omega_err.csv"));
    assert_eq!(header, ["k0", "delta", "err"]);
    assert_eq!(rows.len(), 9 * 12);
    for k0 in 1..=9 {
        let errs: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r[0] == k0 as f64)
            .map(|r| (r[1], r[2]))
            .collect();
        for w in errs.windows(2).filter(|w| w[0].0 >= 2.0) {
            assert!(w[1].1 < w[0].1, "k0 = {k0}, delta {}", w[1].0);
        }
        if k0 == 1 {
            let at = |d: f64| errs.iter().find(|e| e.0 == d).unwrap().1;
            let half = at(400.0) / at(200.0);
            assert!((half - 0.5).abs() <= 0.125, "{half}");
        }
    }
    assert!(dir.path().join("omega_accel.csv").exists());
}

#[test]
fn classic_with_coarse_equal_to_fine_reproduces_the_fine_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &[
            "mode = parareal-classic",
            "grid.Tf = 0.4",
            "grid.N = 4",
            "parareal.fine_step = 0.005",
            "parareal.coarse_steps = 20",
        ],
    );
    cmd_parareal(&cfg).unwrap();
    let (_, rows) = read_csv(&dir.path().join("solution.csv"));
    let sys = LtiSystem::damped_oscillator();
    for row in rows {
        let seq = implicit_euler_endpoint(&sys, &sys.y0(), 0.0, row[0], 0.005).unwrap();
        let got = [row[1], row[2]];
        let err = ((got[0] - seq[0]).powi(2) + (got[1] - seq[1]).powi(2)).sqrt();
        assert!(err <= 1e-10 * seq.norm(), "t = {}: {err}", row[0]);
    }
}

#[test]
fn parareal_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["anneal.steps = 300"]);
    cmd_parareal(&cfg).unwrap();

    let (header, rows) = read_csv(&dir.path().join("omega_err_para.csv"));
    assert_eq!(header, ["j", "k", "err"]);
    assert_eq!(rows.len(), 9 * 7);
    for j in 1..=9 {
        let per: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == j as f64).collect();
        assert_eq!(per.first().unwrap()[1], 2.0);
        assert_eq!(per.last().unwrap()[1], 8.0);
        assert!(
            per.last().unwrap()[2] < per.first().unwrap()[2],
            "slice {j}"
        );
    }

    let (_, solution) = read_csv(&dir.path().join("solution.csv"));
    assert_eq!(solution.len(), 9);
    assert!((solution[8][0] - 0.9).abs() < 1e-15);

    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "# errors in units of 1e-4");
    assert_eq!(lines[1], "j  q_opt  err_vs_omega_lim  err_vs_exact");
    assert_eq!(lines.len(), 11);
    for (i, line) in lines[2..].iter().enumerate() {
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(cols[0], (i + 1) as f64);
        assert!(cols[1] > 0.0 && cols[2] >= 0.0 && cols[3] >= 0.0);
    }
}

#[test]
fn refresh_recalibrates_on_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &["calibration.refresh_interval = 3", "anneal.steps = 100"],
    );
    let out = run_pipeline(&cfg).unwrap();
    let at: Vec<usize> = out.calibrations.iter().map(|c| c.0).collect();
    assert_eq!(at, [1, 4, 7]);
    for row in &out.rows {
        let owner = out
            .calibrations
            .iter()
            .rev()
            .find(|c| c.0 <= row.j)
            .unwrap();
        assert_eq!(row.q_opt, owner.1.q_opt);
    }
}

#[test]
fn optimize_q_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["anneal.steps = 200"]);
    cmd_optimize_q(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("calibration.txt")).unwrap();
    let q: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("q_opt = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((1e-10..=10.0).contains(&q));
    let (header, rows) = read_csv(&dir.path().join("objective_scan.csv"));
    assert_eq!(header, ["q", "objective"]);
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r[1] >= 0.0));
}

#[test]
fn euler_study_mode_rejects_parareal_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["mode = euler-study"]);
    assert_eq!(
        cmd_parareal(&cfg).unwrap_err().class(),
        pita_core::ErrorClass::Config
    );
}
