//! Classic and semi-explicit Parareal.
//!
//! Both modes share one predictor-corrector engine. Iterate `U^0` is a
//! sequential implicit coarse sweep. Pass `p = 1..=K` then computes
//!
//! ```text
//! U^p_{j+1} = G_pred(U^p_j) + F_p(U^{p-1}_j) - G_sub(U^{p-1}_j)
//! ```
//!
//! where the `F_p - G_sub` corrections of a pass are independent across
//! slices and evaluated as a parallel map, and the `G_pred` sweep is
//! sequential.
//!
//! In semi-explicit mode `G_pred` is explicit Euler, `G_sub` is implicit
//! Euler on the first pass (it must cancel the implicit seed) and explicit
//! afterwards, and `F_p` is explicit Euler with `delta_p` steps per coarse
//! step, `delta_p` following a constant-increment schedule.

use nalgebra::DVector;

use crate::accel::{vector_accelerate, AccelSpec};
use crate::error::{PitaError, Result};
use crate::exec::par_map;
use crate::model::{LtiSystem, StateVector, TimeGrid};
use crate::omega::OmegaSeries;
use crate::propagators::{step_count, ExplicitMap, ImplicitSolver, PropagatorKind, STEP_COUNT_TOL};

/// Fine-step refinement schedule `delta_k = base + (k - 1) * step`, with
/// consecutive distances required to stay inside `(delta1, delta2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSchedule {
    delta_base: f64,
    delta_step: f64,
    delta1: f64,
    delta2: f64,
}

impl DeltaSchedule {
    pub fn new(delta_base: f64, delta_step: f64, delta1: f64, delta2: f64) -> Result<Self> {
        if !(delta_base > 0.0) || !delta_base.is_finite() {
            return Err(PitaError::InvalidArgument(format!(
                "delta_base = {delta_base} must be positive"
            )));
        }
        if !(delta1 > 0.0 && delta1 < delta2) || !delta2.is_finite() {
            return Err(PitaError::InvalidArgument(format!(
                "delta bounds need 0 < delta1 < delta2, got ({delta1}, {delta2})"
            )));
        }
        check_distance(delta_step, delta1, delta2)?;
        Ok(DeltaSchedule {
            delta_base,
            delta_step,
            delta1,
            delta2,
        })
    }

    pub fn delta_base(&self) -> f64 {
        self.delta_base
    }

    pub fn delta_step(&self) -> f64 {
        self.delta_step
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.delta1, self.delta2)
    }

    /// Nominal `delta_k` for pass `k >= 1`.
    pub fn delta(&self, pass: usize) -> f64 {
        self.delta_base + (pass.max(1) - 1) as f64 * self.delta_step
    }

    /// Fine steps per coarse step at pass `k`: `delta_k` rounded to the
    /// nearest integer (at least 1), so slices end exactly on boundaries.
    pub fn realized_steps(&self, pass: usize) -> usize {
        (self.delta(pass).round() as usize).max(1)
    }
}

pub(crate) fn check_distance(distance: f64, lower: f64, upper: f64) -> Result<()> {
    let d = distance.abs();
    if d > lower && d < upper {
        Ok(())
    } else {
        Err(PitaError::ScheduleViolation {
            distance: d,
            lower,
            upper,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParerealMode {
    /// Fixed fine step; coarse and fine propagator kinds are configurable.
    Classic {
        fine_step: f64,
        coarse: PropagatorKind,
        fine: PropagatorKind,
    },
    SemiExplicit {
        schedule: DeltaSchedule,
    },
}

impl ParerealMode {
    /// Classic Parareal with implicit coarse and fine propagators.
    pub fn classic(fine_step: f64) -> Self {
        ParerealMode::Classic {
            fine_step,
            coarse: PropagatorKind::ImplicitEuler,
            fine: PropagatorKind::ImplicitEuler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParerealConfig {
    grid: TimeGrid,
    iterations: usize,
    mode: ParerealMode,
    coarse_steps: usize,
}

impl ParerealConfig {
    /// `iterations` is the number of correction passes `K >= 2`. The coarse
    /// propagator takes one step per slice.
    pub fn new(grid: TimeGrid, iterations: usize, mode: ParerealMode) -> Result<Self> {
        Self::with_coarse_steps(grid, iterations, mode, 1)
    }

    pub fn with_coarse_steps(
        grid: TimeGrid,
        iterations: usize,
        mode: ParerealMode,
        coarse_steps: usize,
    ) -> Result<Self> {
        if iterations < 2 {
            return Err(PitaError::InvalidArgument(format!(
                "need at least 2 iterations, got {iterations}"
            )));
        }
        if coarse_steps == 0 {
            return Err(PitaError::InvalidArgument(
                "coarse steps per slice must be >= 1".into(),
            ));
        }
        let cfg = ParerealConfig {
            grid,
            iterations,
            mode,
            coarse_steps,
        };
        match mode {
            ParerealMode::Classic { fine_step, .. } => {
                let h_g = grid.slice_len();
                if !(fine_step > 0.0 && fine_step < h_g) {
                    return Err(PitaError::InvalidArgument(format!(
                        "fine step {fine_step} must be positive and below the slice length {h_g}"
                    )));
                }
                if cfg.coarse_step() < fine_step * (1.0 - STEP_COUNT_TOL) {
                    return Err(PitaError::InvalidArgument(format!(
                        "coarse step {} is finer than fine step {fine_step}",
                        cfg.coarse_step()
                    )));
                }
                step_count(0.0, grid.slice_len(), fine_step)?;
            }
            ParerealMode::SemiExplicit { schedule } => {
                let (lo, hi) = schedule.bounds();
                for pass in 1..iterations {
                    let a = schedule.realized_steps(pass) as f64;
                    let b = schedule.realized_steps(pass + 1) as f64;
                    check_distance(b - a, lo, hi)?;
                }
            }
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn mode(&self) -> &ParerealMode {
        &self.mode
    }

    pub fn coarse_steps(&self) -> usize {
        self.coarse_steps
    }

    /// Coarse step `h_g`.
    pub fn coarse_step(&self) -> f64 {
        self.grid.slice_len() / self.coarse_steps as f64
    }
}

/// Output of a Parareal run.
#[derive(Debug, Clone, PartialEq)]
pub struct ParerealResult {
    times: Vec<f64>,
    iterates: Vec<Vec<StateVector>>,
    omega_per_slice: Vec<OmegaSeries>,
    fine_labels: Vec<f64>,
    final_solution: Option<Vec<StateVector>>,
}

impl ParerealResult {
    /// Slice boundaries `t_0 ..= t_N`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `iterates()[k][j] = U^k_j` for `k = 0..=K`, `j = 0..=N`.
    pub fn iterates(&self) -> &[Vec<StateVector>] {
        &self.iterates
    }

    /// `Omega_j = (U^2_j, ..., U^K_j)` for `j = 1..=N` (index `j - 1`).
    pub fn omega_per_slice(&self) -> &[OmegaSeries] {
        &self.omega_per_slice
    }

    /// Label of every pass `1..=K`: the realized fine subdivision in
    /// semi-explicit mode, the pass number in classic mode.
    pub fn pass_labels(&self) -> &[f64] {
        &self.fine_labels
    }

    pub fn final_solution(&self) -> Option<&[StateVector]> {
        self.final_solution.as_deref()
    }

    pub fn last_iterate(&self) -> &[StateVector] {
        self.iterates.last().expect("at least the seed iterate")
    }
}

/// A prepared Euler propagator over one slice: `steps` steps of size `h`.
enum SlicePropagator {
    Explicit {
        map: ExplicitMap,
        steps: usize,
        h: f64,
    },
    Implicit {
        solver: ImplicitSolver,
        steps: usize,
        h: f64,
    },
}

impl SlicePropagator {
    fn new(sys: &LtiSystem, kind: PropagatorKind, steps: usize, h: f64) -> Result<Self> {
        Ok(match kind {
            PropagatorKind::ExplicitEuler => SlicePropagator::Explicit {
                map: ExplicitMap::new(sys, h),
                steps,
                h,
            },
            PropagatorKind::ImplicitEuler => SlicePropagator::Implicit {
                solver: ImplicitSolver::new(sys, h)?,
                steps,
                h,
            },
        })
    }

    fn advance(&self, y: &DVector<f64>, t_start: f64) -> Result<DVector<f64>> {
        let (steps, h) = match self {
            SlicePropagator::Explicit { steps, h, .. }
            | SlicePropagator::Implicit { steps, h, .. } => (*steps, *h),
        };
        let mut y = y.clone();
        for i in 1..=steps {
            y = match self {
                SlicePropagator::Explicit { map, .. } => map.apply(&y),
                SlicePropagator::Implicit { solver, .. } => solver
                    .apply(&y)
                    .ok_or(PitaError::SingularMatrix { h, det: 0.0 })?,
            };
            if y.iter().any(|x| !x.is_finite()) {
                return Err(PitaError::NonFiniteResult {
                    step: i,
                    time: t_start + i as f64 * h,
                });
            }
        }
        Ok(y)
    }
}

struct Pass {
    predict: SlicePropagator,
    subtract: SlicePropagator,
    fine: SlicePropagator,
}

fn wrap(iteration: usize, slice: usize) -> impl FnOnce(PitaError) -> PitaError {
    move |e| PitaError::Propagation {
        iteration,
        slice,
        source: Box::new(e),
    }
}

/// The shared predictor-corrector loop. Returns `U^0 ..= U^K`.
fn run_engine(
    sys: &LtiSystem,
    grid: &TimeGrid,
    seed: &SlicePropagator,
    passes: usize,
    plan: impl Fn(usize) -> Result<Pass>,
) -> Result<Vec<Vec<StateVector>>> {
    let n = grid.slices();
    let times = grid.boundaries();

    let mut seed_sweep = Vec::with_capacity(n + 1);
    seed_sweep.push(sys.y0().into_vector());
    for j in 0..n {
        let next = seed.advance(&seed_sweep[j], times[j]).map_err(wrap(0, j))?;
        seed_sweep.push(next);
    }
    let mut iterates = vec![seed_sweep];

    for pass in 1..=passes {
        let p = plan(pass)?;
        let prev = &iterates[pass - 1];
        let corrections: Vec<DVector<f64>> = par_map((0..n).collect(), |j| {
            let fine = p.fine.advance(&prev[j], times[j])?;
            let coarse = p.subtract.advance(&prev[j], times[j])?;
            Ok(fine - coarse)
        })
        .into_iter()
        .enumerate()
        .map(|(j, r): (usize, Result<DVector<f64>>)| r.map_err(wrap(pass, j)))
        .collect::<Result<_>>()?;

        let mut next = Vec::with_capacity(n + 1);
        next.push(sys.y0().into_vector());
        for j in 0..n {
            let predicted = p
                .predict
                .advance(&next[j], times[j])
                .map_err(wrap(pass, j))?;
            let value = predicted + &corrections[j];
            if value.iter().any(|x| !x.is_finite()) {
                return Err(wrap(pass, j)(PitaError::NonFiniteResult {
                    step: 0,
                    time: times[j + 1],
                }));
            }
            next.push(value);
        }
        iterates.push(next);
    }

    Ok(iterates
        .into_iter()
        .map(|it| {
            it.into_iter()
                .map(StateVector::from_vector_unchecked)
                .collect()
        })
        .collect())
}

fn assemble(
    grid: &TimeGrid,
    iterates: Vec<Vec<StateVector>>,
    pass_labels: Vec<f64>,
) -> Result<ParerealResult> {
    let times = grid.boundaries();
    let passes = iterates.len() - 1;
    let omega_per_slice = (1..=grid.slices())
        .map(|j| {
            let terms = (2..=passes).map(|k| iterates[k][j].clone()).collect();
            let labels = pass_labels[1..].to_vec();
            OmegaSeries::new(times[j], terms, labels)
        })
        .collect::<Result<_>>()?;
    Ok(ParerealResult {
        times,
        iterates,
        omega_per_slice,
        fine_labels: pass_labels,
        final_solution: None,
    })
}

/// Endpoint of the coarse propagator of `kind` over one slice.
pub fn coarse_g(
    kind: PropagatorKind,
    sys: &LtiSystem,
    t_j: f64,
    t_j1: f64,
    u: &StateVector,
    h_g: f64,
) -> Result<StateVector> {
    sys.check_state(u)?;
    let steps = step_count(t_j, t_j1, h_g)?;
    let prop = SlicePropagator::new(sys, kind, steps, h_g)?;
    prop.advance(u.as_vector(), t_j)
        .map(StateVector::from_vector_unchecked)
}

/// Explicit Euler endpoint over one slice at the fine step.
pub fn fine_f(
    sys: &LtiSystem,
    t_j: f64,
    t_j1: f64,
    u: &StateVector,
    h_fine: f64,
) -> Result<StateVector> {
    coarse_g(PropagatorKind::ExplicitEuler, sys, t_j, t_j1, u, h_fine)
}

/// Classic Parareal.
pub fn classic_parareal(sys: &LtiSystem, cfg: &ParerealConfig) -> Result<ParerealResult> {
    let ParerealMode::Classic {
        fine_step,
        coarse,
        fine,
    } = cfg.mode
    else {
        return Err(PitaError::InvalidArgument(
            "classic_parareal needs a classic-mode config".into(),
        ));
    };
    let h_g = cfg.coarse_step();
    let fine_steps = step_count(0.0, cfg.grid.slice_len(), fine_step)?;
    let seed = SlicePropagator::new(sys, PropagatorKind::ImplicitEuler, cfg.coarse_steps, h_g)?;
    let iterates = run_engine(sys, &cfg.grid, &seed, cfg.iterations, |_| {
        Ok(Pass {
            predict: SlicePropagator::new(sys, coarse, cfg.coarse_steps, h_g)?,
            subtract: SlicePropagator::new(sys, coarse, cfg.coarse_steps, h_g)?,
            fine: SlicePropagator::new(sys, fine, fine_steps, fine_step)?,
        })
    })?;
    let labels = (1..=cfg.iterations).map(|k| k as f64).collect();
    assemble(&cfg.grid, iterates, labels)
}

/// Semi-explicit Parareal with per-pass fine-step refinement.
pub fn semi_explicit_parareal(sys: &LtiSystem, cfg: &ParerealConfig) -> Result<ParerealResult> {
    let ParerealMode::SemiExplicit { schedule } = cfg.mode else {
        return Err(PitaError::InvalidArgument(
            "semi_explicit_parareal needs a semi-explicit config".into(),
        ));
    };
    let h_g = cfg.coarse_step();
    let c = cfg.coarse_steps;
    let seed = SlicePropagator::new(sys, PropagatorKind::ImplicitEuler, c, h_g)?;
    let iterates = run_engine(sys, &cfg.grid, &seed, cfg.iterations, |pass| {
        let delta = schedule.realized_steps(pass);
        let subtract = if pass == 1 {
            PropagatorKind::ImplicitEuler
        } else {
            PropagatorKind::ExplicitEuler
        };
        Ok(Pass {
            predict: SlicePropagator::new(sys, PropagatorKind::ExplicitEuler, c, h_g)?,
            subtract: SlicePropagator::new(sys, subtract, c, h_g)?,
            fine: SlicePropagator::new(
                sys,
                PropagatorKind::ExplicitEuler,
                c * delta,
                cfg.grid.slice_len() / (c * delta) as f64,
            )?,
        })
    })?;
    let labels = (1..=cfg.iterations)
        .map(|k| schedule.realized_steps(k) as f64)
        .collect();
    assemble(&cfg.grid, iterates, labels)
}

/// Runs whichever mode the config selects.
pub fn run_parareal(sys: &LtiSystem, cfg: &ParerealConfig) -> Result<ParerealResult> {
    match cfg.mode {
        ParerealMode::Classic { .. } => classic_parareal(sys, cfg),
        ParerealMode::SemiExplicit { .. } => semi_explicit_parareal(sys, cfg),
    }
}

/// Extrapolated limit of every `Omega_j`, stored in the result and
/// returned.
pub fn extrapolated_solution(
    result: &mut ParerealResult,
    spec: &AccelSpec,
) -> Result<Vec<StateVector>> {
    extrapolated_solution_with(result, |_| *spec)
}

/// As [`extrapolated_solution`] with a per-slice spec (`j` is 1-based).
pub fn extrapolated_solution_with(
    result: &mut ParerealResult,
    spec_for: impl Fn(usize) -> AccelSpec,
) -> Result<Vec<StateVector>> {
    for (i, om) in result.omega_per_slice.iter().enumerate() {
        let required = spec_for(i + 1).terms_needed();
        if om.len() < required {
            return Err(PitaError::UnderfilledSlice {
                slice: i + 1,
                required,
                available: om.len(),
            });
        }
    }
    let solution: Vec<StateVector> = result
        .omega_per_slice
        .iter()
        .enumerate()
        .map(|(i, om)| vector_accelerate(&spec_for(i + 1), om.terms()))
        .collect::<Result<_>>()?;
    result.final_solution = Some(solution.clone());
    Ok(solution)
}
