//! Coarse and fine building blocks: explicit and implicit Euler, the
//! closed-form explicit Euler induction, the exact reference solution and
//! the explicit stability radius.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{PitaError, Result};
use crate::expm::{expm, one_norm};
use crate::model::{LtiSystem, StateVector, Trajectory};

/// Relative tolerance on `(t_end - t_start) / h` being an integer.
pub const STEP_COUNT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropagatorKind {
    ExplicitEuler,
    ImplicitEuler,
}

/// Number of steps of size `h` covering `[t_start, t_end]`.
pub fn step_count(t_start: f64, t_end: f64, h: f64) -> Result<usize> {
    if !(t_end > t_start) {
        return Err(PitaError::InvalidArgument(format!(
            "interval end {t_end} must exceed start {t_start}"
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(PitaError::InvalidArgument(format!(
            "step {h} must be positive"
        )));
    }
    let span = t_end - t_start;
    let ratio = span / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > STEP_COUNT_TOL * n.max(1.0) {
        return Err(PitaError::NonIntegralSteps {
            span,
            step: h,
            ratio,
        });
    }
    Ok(n as usize)
}

fn check_step(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(PitaError::InvalidArgument(format!(
            "step {h} must be non-negative"
        )))
    }
}

fn finite_state(v: DVector<f64>, step: usize, time: f64) -> Result<DVector<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(PitaError::NonFiniteResult { step, time })
    }
}

/// The affine map `y -> (I + hA) y + h B u` of one explicit Euler step.
#[derive(Debug, Clone)]
pub(crate) struct ExplicitMap {
    amplification: DMatrix<f64>,
    forcing: DVector<f64>,
}

impl ExplicitMap {
    pub(crate) fn new(sys: &LtiSystem, h: f64) -> Self {
        let d = sys.dim();
        ExplicitMap {
            amplification: DMatrix::identity(d, d) + sys.a() * h,
            forcing: sys.drift() * h,
        }
    }

    #[inline]
    pub(crate) fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.amplification * y + &self.forcing
    }
}

/// LU factorization of `I - hA`, reused across implicit steps.
pub(crate) struct ImplicitSolver {
    lu: LU<f64, Dyn, Dyn>,
    forcing: DVector<f64>,
}

impl ImplicitSolver {
    pub(crate) fn new(sys: &LtiSystem, h: f64) -> Result<Self> {
        let d = sys.dim();
        let m = DMatrix::identity(d, d) - sys.a() * h;
        let scale = one_norm(&m).powi(d as i32);
        let lu = m.lu();
        let det = lu.determinant();
        if !(det.abs() > 1e-12 * scale) {
            return Err(PitaError::SingularMatrix { h, det });
        }
        Ok(ImplicitSolver {
            lu,
            forcing: sys.drift() * h,
        })
    }

    pub(crate) fn apply(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        self.lu.solve(&(y + &self.forcing))
    }
}

/// One explicit Euler step: `(I + hA) y + h B u`.
pub fn explicit_euler_step(sys: &LtiSystem, y: &StateVector, h: f64) -> Result<StateVector> {
    sys.check_state(y)?;
    check_step(h)?;
    let next = ExplicitMap::new(sys, h).apply(y.as_vector());
    finite_state(next, 1, h).map(StateVector::from_vector_unchecked)
}

/// Explicit Euler trajectory over `[t_start, t_end]` with step `h`,
/// including the starting point.
pub fn explicit_euler_propagate(
    sys: &LtiSystem,
    y_start: &StateVector,
    t_start: f64,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    sys.check_state(y_start)?;
    let n = step_count(t_start, t_end, h)?;
    let map = ExplicitMap::new(sys, h);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t_start);
    states.push(y_start.clone());
    let mut y = y_start.as_vector().clone();
    for i in 1..=n {
        let t = if i == n {
            t_end
        } else {
            t_start + i as f64 * h
        };
        y = finite_state(map.apply(&y), i, t)?;
        times.push(t);
        states.push(StateVector::from_vector_unchecked(y.clone()));
    }
    Trajectory::new(times, states)
}

/// Endpoint of [`explicit_euler_propagate`] without storing the path.
pub fn explicit_euler_endpoint(
    sys: &LtiSystem,
    y_start: &StateVector,
    t_start: f64,
    t_end: f64,
    h: f64,
) -> Result<StateVector> {
    sys.check_state(y_start)?;
    let n = step_count(t_start, t_end, h)?;
    explicit_steps(sys, y_start, n, h, t_start)
}

/// `n` explicit steps of size `h` from `y_start` (at time `t_start`).
pub(crate) fn explicit_steps(
    sys: &LtiSystem,
    y_start: &StateVector,
    n: usize,
    h: f64,
    t_start: f64,
) -> Result<StateVector> {
    let map = ExplicitMap::new(sys, h);
    let mut y = y_start.as_vector().clone();
    for i in 1..=n {
        y = finite_state(map.apply(&y), i, t_start + i as f64 * h)?;
    }
    Ok(StateVector::from_vector_unchecked(y))
}

/// Closed form of `k0` explicit Euler steps:
/// `(I + hA)^k0 y + sum_{j<k0} (I + hA)^j h B u`.
///
/// The power is carried as a running matrix product and the forcing sum by
/// Horner accumulation, independently of the step-by-step loop.
pub fn closed_form_explicit(
    sys: &LtiSystem,
    y_start: &StateVector,
    k0: usize,
    h: f64,
) -> Result<StateVector> {
    sys.check_state(y_start)?;
    check_step(h)?;
    let map = ExplicitMap::new(sys, h);
    let d = sys.dim();
    let mut power = DMatrix::<f64>::identity(d, d);
    let mut forced = DVector::<f64>::zeros(d);
    for _ in 0..k0 {
        power = &map.amplification * &power;
        forced = &map.amplification * &forced + &map.forcing;
    }
    let y = power * y_start.as_vector() + forced;
    finite_state(y, k0, k0 as f64 * h).map(StateVector::from_vector_unchecked)
}

/// One implicit Euler step: solves `(I - hA) z = y + h B u`.
pub fn implicit_euler_step(sys: &LtiSystem, y: &StateVector, h: f64) -> Result<StateVector> {
    sys.check_state(y)?;
    check_step(h)?;
    let solver = ImplicitSolver::new(sys, h)?;
    let z = solver
        .apply(y.as_vector())
        .ok_or(PitaError::SingularMatrix { h, det: 0.0 })?;
    finite_state(z, 1, h).map(StateVector::from_vector_unchecked)
}

/// Implicit Euler trajectory; `I - hA` is factored once.
pub fn implicit_euler_propagate(
    sys: &LtiSystem,
    y_start: &StateVector,
    t_start: f64,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    sys.check_state(y_start)?;
    let n = step_count(t_start, t_end, h)?;
    let solver = ImplicitSolver::new(sys, h)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t_start);
    states.push(y_start.clone());
    let mut y = y_start.as_vector().clone();
    for i in 1..=n {
        let t = if i == n {
            t_end
        } else {
            t_start + i as f64 * h
        };
        let z = solver
            .apply(&y)
            .ok_or(PitaError::SingularMatrix { h, det: 0.0 })?;
        y = finite_state(z, i, t)?;
        times.push(t);
        states.push(StateVector::from_vector_unchecked(y.clone()));
    }
    Trajectory::new(times, states)
}

/// Endpoint of [`implicit_euler_propagate`] without storing the path.
pub fn implicit_euler_endpoint(
    sys: &LtiSystem,
    y_start: &StateVector,
    t_start: f64,
    t_end: f64,
    h: f64,
) -> Result<StateVector> {
    sys.check_state(y_start)?;
    let n = step_count(t_start, t_end, h)?;
    let solver = ImplicitSolver::new(sys, h)?;
    let mut y = y_start.as_vector().clone();
    for i in 1..=n {
        let z = solver
            .apply(&y)
            .ok_or(PitaError::SingularMatrix { h, det: 0.0 })?;
        y = finite_state(z, i, t_start + i as f64 * h)?;
    }
    Ok(StateVector::from_vector_unchecked(y))
}

/// Endpoint of either Euler scheme over `[t_start, t_end]`.
pub fn propagate_endpoint(
    kind: PropagatorKind,
    sys: &LtiSystem,
    y_start: &StateVector,
    t_start: f64,
    t_end: f64,
    h: f64,
) -> Result<StateVector> {
    match kind {
        PropagatorKind::ExplicitEuler => explicit_euler_endpoint(sys, y_start, t_start, t_end, h),
        PropagatorKind::ImplicitEuler => implicit_euler_endpoint(sys, y_start, t_start, t_end, h),
    }
}

/// Exact flow of the system over a duration `t` starting from `y`:
/// `e^{At} y + int_0^t e^{A(t-s)} B u ds`.
///
/// Both terms come from one exponential of the augmented matrix
/// `[[A, Bu], [0, 0]]`, so `A` need not be invertible.
pub fn exact_flow(sys: &LtiSystem, y: &StateVector, t: f64) -> Result<StateVector> {
    sys.check_state(y)?;
    if !t.is_finite() {
        return Err(PitaError::InvalidArgument(format!(
            "time {t} must be finite"
        )));
    }
    let d = sys.dim();
    let mut aug = DMatrix::<f64>::zeros(d + 1, d + 1);
    aug.view_mut((0, 0), (d, d)).copy_from(sys.a());
    aug.view_mut((0, d), (d, 1)).copy_from(sys.drift());
    let e = expm(&(aug * t));
    let out = e.view((0, 0), (d, d)) * y.as_vector() + e.view((0, d), (d, 1)).column(0);
    finite_state(out, 0, t).map(StateVector::from_vector_unchecked)
}

/// Exact solution at time `t` from the system's own initial state.
pub fn exact_solution(sys: &LtiSystem, t: f64) -> Result<StateVector> {
    if t < 0.0 {
        return Err(PitaError::InvalidArgument(format!(
            "time {t} must be non-negative"
        )));
    }
    exact_flow(sys, &sys.y0(), t)
}

/// Spectral radius of the explicit Euler amplification matrix `I + hA`.
pub fn stability_radius(sys: &LtiSystem, h: f64) -> f64 {
    let d = sys.dim();
    let m = DMatrix::<f64>::identity(d, d) + sys.a() * h;
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
