//! Browser bindings for three interactive views: the phase portrait of the
//! damped oscillator under explicit Euler, epsilon extrapolation of a typed
//! sequence, and per-slice Parareal error curves.
//!
//! The `*_data` functions are plain Rust and are what the bindings call.

use pita_core::accel::{EpsilonTable, DEFAULT_GUARD};
use pita_core::omega::build_psi;
use pita_core::parareal::{run_parareal, DeltaSchedule, ParerealConfig, ParerealMode};
use pita_core::propagators::{exact_solution, stability_radius};
use pita_core::{LtiSystem, TimeGrid};
use wasm_bindgen::prelude::*;

/// Exact and explicit Euler (step `h0 / delta`) trajectories of the damped
/// oscillator at `samples + 1` instants over `[0, tf]`, flattened as
/// `[t, exact_x1, exact_x2, euler_x1, euler_x2]` per instant.
pub fn phase_portrait_data(tf: f64, samples: usize, delta: usize) -> Result<Vec<f64>, String> {
    if samples == 0 || samples > 100_000 {
        return Err(format!("samples = {samples} must lie in 1..=100000"));
    }
    let sys = LtiSystem::damped_oscillator();
    let h0 = tf / samples as f64;
    let psi = build_psi(&sys, h0, delta, tf).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(5 * psi.len());
    for (t, y) in psi.times().iter().zip(psi.states()) {
        let exact = exact_solution(&sys, *t).map_err(|e| e.to_string())?;
        out.extend_from_slice(&[*t, exact[0], exact[1], y[0], y[1]]);
    }
    Ok(out)
}

/// Spectral radius of the explicit Euler amplification at step `h`.
pub fn stability_radius_data(h: f64) -> f64 {
    stability_radius(&LtiSystem::damped_oscillator(), h)
}

/// Every even column of the epsilon table, concatenated with a leading
/// length per column: `[len_0, col_0..., len_2, col_2..., ...]`.
pub fn epsilon_table_data(terms: &[f64]) -> Result<Vec<f64>, String> {
    let table = EpsilonTable::build(terms, DEFAULT_GUARD).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    let mut k = 0;
    while let Some(col) = table.even_column(k) {
        out.push(col.len() as f64);
        out.extend_from_slice(col);
        k += 2;
    }
    Ok(out)
}

/// Errors of the semi-explicit iterates against the exact solution on the
/// 9-slice grid over `[0, 0.9]`, row-major `[k][j]` for `k = 0..=passes`,
/// `j = 1..=9`.
pub fn parareal_errors_data(delta_base: f64, passes: usize) -> Result<Vec<f64>, String> {
    if !(2..=40).contains(&passes) {
        return Err(format!("passes = {passes} must lie in 2..=40"));
    }
    let sys = LtiSystem::damped_oscillator();
    let schedule = DeltaSchedule::new(delta_base, 1.0, 0.5, 2.0).map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(0.0, 0.9, 9).map_err(|e| e.to_string())?;
    let cfg = ParerealConfig::new(grid, passes, ParerealMode::SemiExplicit { schedule })
        .map_err(|e| e.to_string())?;
    let res = run_parareal(&sys, &cfg).map_err(|e| e.to_string())?;
    let exact: Vec<_> = res.times()[1..]
        .iter()
        .map(|&t| exact_solution(&sys, t))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok(res
        .iterates()
        .iter()
        .flat_map(|it| it[1..].iter().zip(&exact).map(|(u, y)| u.distance(y)))
        .collect())
}

#[wasm_bindgen]
pub fn phase_portrait(tf: f64, samples: usize, delta: usize) -> Result<Vec<f64>, JsValue> {
    phase_portrait_data(tf, samples, delta).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn euler_stability_radius(h: f64) -> f64 {
    stability_radius_data(h)
}

#[wasm_bindgen]
pub fn epsilon_table(terms: Vec<f64>) -> Result<Vec<f64>, JsValue> {
    epsilon_table_data(&terms).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn parareal_errors(delta_base: f64, passes: usize) -> Result<Vec<f64>, JsValue> {
    parareal_errors_data(delta_base, passes).map_err(|e| JsValue::from_str(&e))
}
