use std::fmt::Write as _;
use std::path::PathBuf;

use super::config::{ExperimentConfig, Mode, ReferenceKind};
use super::output::{ensure_dir, fmt_f64, state_header, state_row, write_csv, write_text};
use crate::accel::{vector_accelerate, AccelSpec};
use crate::error::{PitaError, Result};
use crate::exec::par_map;
use crate::omega::{build_psi_set, omega_error_curve, omega_from_psi};
use crate::optimize::{
    anneal_q_chains, bootstrap_reference, periodic_refresh, propagate_calibration, AnnealConfig,
    CalibrationProblem, CalibrationResult,
};
use crate::parareal::{extrapolated_solution_with, run_parareal, ParerealMode, ParerealResult};
use crate::propagators::exact_solution;
use crate::StateVector;

/// One line of `report.txt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReportRow {
    pub j: usize,
    pub q_opt: f64,
    pub err_vs_omega_lim: f64,
    pub err_vs_exact: f64,
}

/// Everything the Parareal pipeline produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub result: ParerealResult,
    /// Calibration at each refresh slice (1-based).
    pub calibrations: Vec<(usize, CalibrationResult)>,
    /// Bootstrap limit at every boundary `t_1..t_N`.
    pub omega_lim: Vec<StateVector>,
    pub exact: Vec<StateVector>,
    pub rows: Vec<ErrorReportRow>,
}

impl PipelineOutput {
    pub fn solution(&self) -> &[StateVector] {
        self.result
            .final_solution()
            .expect("pipeline always extrapolates")
    }
}

fn exact_at(cfg: &ExperimentConfig, t: f64) -> Result<StateVector> {
    exact_solution(&cfg.system, t - cfg.grid.t0())
}

/// Exact states at the coarse instants `t_0..t_N`.
pub fn exact_rows(cfg: &ExperimentConfig) -> Result<Vec<(f64, StateVector)>> {
    cfg.grid
        .boundaries()
        .into_iter()
        .map(|t| Ok((t, exact_at(cfg, t)?)))
        .collect()
}

pub fn cmd_exact(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rows = exact_rows(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let path = write_csv(
        cfg.out_dir.join("exact.csv"),
        &state_header(cfg.system.dim()),
        rows.iter().map(|(t, y)| state_row(*t, y)),
    )?;
    Ok(vec![path])
}

/// Psi trajectories per ladder entry, `omega_err.csv` and optionally
/// `omega_accel.csv` (best raw term against the epsilon extrapolant,
/// without auxiliary series).
pub fn cmd_euler_study(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let ladder = &cfg.study.ladder;
    let t0 = cfg.grid.t0();
    let span = cfg.grid.tf() - t0;
    let psi = build_psi_set(&cfg.system, ladder, span)?;
    let series = omega_from_psi(&psi, ladder)?;
    let exact: Vec<StateVector> = series
        .iter()
        .map(|om| exact_solution(&cfg.system, om.anchor_time()))
        .collect::<Result<_>>()?;

    ensure_dir(&cfg.out_dir)?;
    let mut written = Vec::new();
    let header = state_header(cfg.system.dim());
    for (delta, traj) in ladder.deltas().iter().zip(&psi) {
        written.push(write_csv(
            cfg.out_dir.join(format!("psi_{delta}.csv")),
            &header,
            traj.times()
                .iter()
                .zip(traj.states())
                .map(|(t, y)| state_row(t + t0, y)),
        )?);
    }

    let mut rows = Vec::new();
    for (k0, (om, y)) in series.iter().zip(&exact).enumerate() {
        for (delta, err) in ladder.deltas().iter().zip(omega_error_curve(om, y)?) {
            rows.push(vec![(k0 + 1).to_string(), delta.to_string(), fmt_f64(err)]);
        }
    }
    let header: Vec<String> = ["k0", "delta", "err"].map(String::from).to_vec();
    written.push(write_csv(cfg.out_dir.join("omega_err.csv"), &header, rows)?);

    if cfg.study.accelerate {
        let spec = cfg.accel.with_aux(None);
        let mut rows = Vec::new();
        for (k0, (om, y)) in series.iter().zip(&exact).enumerate() {
            let best = omega_error_curve(om, y)?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let accel = vector_accelerate(&spec, om.terms())?.distance(y);
            rows.push(vec![(k0 + 1).to_string(), fmt_f64(best), fmt_f64(accel)]);
        }
        let header: Vec<String> = ["k0", "err_best_raw", "err_accel"]
            .map(String::from)
            .to_vec();
        written.push(write_csv(
            cfg.out_dir.join("omega_accel.csv"),
            &header,
            rows,
        )?);
    }
    Ok(written)
}

fn ensure_parareal(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.mode == Mode::EulerStudy {
        return Err(PitaError::config(
            "mode",
            "parareal commands need parareal-semi or parareal-classic",
        ));
    }
    Ok(())
}

fn delta_bounds(cfg: &ExperimentConfig) -> Option<(f64, f64)> {
    match cfg.parareal.mode() {
        ParerealMode::SemiExplicit { schedule } => Some(schedule.bounds()),
        ParerealMode::Classic { .. } => None,
    }
}

fn calibrate(
    cfg: &ExperimentConfig,
    result: &ParerealResult,
    j: usize,
    reference: StateVector,
) -> Result<CalibrationResult> {
    let omega = result.omega_per_slice()[j - 1].clone();
    let problem = CalibrationProblem::new(omega, reference, cfg.accel, delta_bounds(cfg))?;
    let acfg = AnnealConfig {
        seed: cfg
            .anneal
            .seed
            .wrapping_add(((j - 1) * cfg.calibration.chains) as u64),
        ..cfg.anneal
    };
    anneal_q_chains(&problem, &acfg, cfg.calibration.chains)
}

/// Parareal, calibration of `q` on the refresh slices, extrapolation and
/// error rows. No files are written.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    ensure_parareal(cfg)?;
    let sys = &cfg.system;
    let mut result = run_parareal(sys, &cfg.parareal)?;
    let times = result.times().to_vec();
    let t0 = cfg.grid.t0();
    let n = cfg.grid.slices();

    let h_tiny = cfg.calibration.h_tiny;
    let omega_lim: Vec<StateVector> = par_map(times[1..].to_vec(), |t| {
        bootstrap_reference(sys, t - t0, h_tiny)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let exact: Vec<StateVector> = times[1..]
        .iter()
        .map(|&t| exact_at(cfg, t))
        .collect::<Result<_>>()?;

    let mut calibrations = Vec::new();
    for j in periodic_refresh(cfg.calibration.refresh_interval, n)? {
        let reference = match cfg.calibration.reference {
            ReferenceKind::Bootstrap => omega_lim[j - 1].clone(),
            ReferenceKind::Exact => exact[j - 1].clone(),
        };
        calibrations.push((j, calibrate(cfg, &result, j, reference)?));
    }

    let mut specs: Vec<AccelSpec> = Vec::with_capacity(n);
    let mut q_per_slice = Vec::with_capacity(n);
    let mut current = 0;
    for j in 1..=n {
        if current + 1 < calibrations.len() && calibrations[current + 1].0 <= j {
            current += 1;
        }
        let cal = &calibrations[current].1;
        specs.push(propagate_calibration(cal, &cfg.accel)?);
        q_per_slice.push(cal.q_opt);
    }
    let solution = extrapolated_solution_with(&mut result, |j| specs[j - 1])?;

    let rows = (0..n)
        .map(|i| ErrorReportRow {
            j: i + 1,
            q_opt: q_per_slice[i],
            err_vs_omega_lim: solution[i].distance(&omega_lim[i]),
            err_vs_exact: solution[i].distance(&exact[i]),
        })
        .collect();
    Ok(PipelineOutput {
        result,
        calibrations,
        omega_lim,
        exact,
        rows,
    })
}

/// Fixed-width table, errors in units of `10^-scale_exponent`.
pub fn format_report(rows: &[ErrorReportRow], scale_exponent: i32) -> String {
    let scale = 10f64.powi(scale_exponent);
    let mut out = String::new();
    let _ = writeln!(out, "# errors in units of 1e-{scale_exponent}");
    let _ = writeln!(out, "j  q_opt  err_vs_omega_lim  err_vs_exact");
    for r in rows {
        let _ = writeln!(
            out,
            "{}  {:.4e}  {:.4}  {:.4}",
            r.j,
            r.q_opt,
            r.err_vs_omega_lim * scale,
            r.err_vs_exact * scale
        );
    }
    out
}

fn omega_err_rows(out: &PipelineOutput) -> Vec<Vec<String>> {
    let iterates = out.result.iterates();
    let mut rows = Vec::new();
    for (i, y) in out.exact.iter().enumerate() {
        let j = i + 1;
        for (k, it) in iterates.iter().enumerate().skip(2) {
            rows.push(vec![
                j.to_string(),
                k.to_string(),
                fmt_f64(it[j].distance(y)),
            ]);
        }
    }
    rows
}

pub fn cmd_parareal(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = run_pipeline(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let header: Vec<String> = ["j", "k", "err"].map(String::from).to_vec();
    let mut written = vec![write_csv(
        cfg.out_dir.join("omega_err_para.csv"),
        &header,
        omega_err_rows(&out),
    )?];
    let times = &out.result.times()[1..];
    written.push(write_csv(
        cfg.out_dir.join("solution.csv"),
        &state_header(cfg.system.dim()),
        times
            .iter()
            .zip(out.solution())
            .map(|(t, y)| state_row(*t, y)),
    )?);
    written.push(write_text(
        cfg.out_dir.join("report.txt"),
        &format_report(&out.rows, cfg.scale_exponent),
    )?);
    Ok(written)
}

/// Calibration on the first slice only: `calibration.txt` and the
/// objective on a logarithmic `q` grid in `objective_scan.csv`.
pub fn cmd_optimize_q(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    ensure_parareal(cfg)?;
    let sys = &cfg.system;
    let result = run_parareal(sys, &cfg.parareal)?;
    let t1 = result.times()[1] - cfg.grid.t0();
    let reference = match cfg.calibration.reference {
        ReferenceKind::Bootstrap => bootstrap_reference(sys, t1, cfg.calibration.h_tiny)?,
        ReferenceKind::Exact => exact_solution(sys, t1)?,
    };
    let cal = calibrate(cfg, &result, 1, reference.clone())?;
    let problem = CalibrationProblem::new(
        result.omega_per_slice()[0].clone(),
        reference,
        cfg.accel,
        delta_bounds(cfg),
    )?;

    let (lo, hi) = (cfg.anneal.q_min.log10(), cfg.anneal.q_max.log10());
    let points = 201;
    let qs: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect();
    let scan = par_map(qs, |q| problem.objective(q).map(|f| (q, f)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut text = String::new();
    let _ = writeln!(text, "q_opt = {}", fmt_f64(cal.q_opt));
    let _ = writeln!(text, "objective_at_opt = {}", fmt_f64(cal.objective_at_opt));
    let _ = writeln!(text, "q_initial = {}", fmt_f64(cal.q_initial));
    let _ = writeln!(
        text,
        "objective_at_initial = {}",
        fmt_f64(cal.objective_at_initial)
    );
    let _ = writeln!(text, "evaluations = {}", cal.evaluations);
    let _ = writeln!(text, "seed = {}", cfg.anneal.seed);
    let reference: Vec<String> = cal.reference_limit.iter().map(|&v| fmt_f64(v)).collect();
    let _ = writeln!(text, "reference_limit = {}", reference.join(" "));

    ensure_dir(&cfg.out_dir)?;
    let header: Vec<String> = ["q", "objective"].map(String::from).to_vec();
    Ok(vec![
        write_text(cfg.out_dir.join("calibration.txt"), &text)?,
        write_csv(
            cfg.out_dir.join("objective_scan.csv"),
            &header,
            scan.iter().map(|(q, f)| vec![fmt_f64(*q), fmt_f64(*f)]),
        )?,
    ])
}
