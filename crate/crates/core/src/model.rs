//! Core domain types: state vectors, the linear time-invariant system,
//! uniform time grids and trajectories.
//!
//! Every type here is validated on construction and immutable afterwards.

use std::ops::Index;

use nalgebra::{DMatrix, DVector};

use crate::error::{PitaError, Result};

/// A finite, non-empty state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(components))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(PitaError::DimensionMismatch {
                field: "state",
                expected: 1,
                found: 0,
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(PitaError::NonFiniteEntry { field: "state" });
        }
        Ok(StateVector(v))
    }

    /// Wraps a vector already known to be finite and non-empty.
    pub(crate) fn from_vector_unchecked(v: DVector<f64>) -> Self {
        debug_assert!(!v.is_empty() && v.iter().all(|x| x.is_finite()));
        StateVector(v)
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Index<usize> for StateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `y' = A y + B u` with constant `A`, `B`, `u` and initial state `y0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    u: DVector<f64>,
    y0: DVector<f64>,
    drift: DVector<f64>,
}

impl LtiSystem {
    /// Builds and validates a system. See [`validate_system`].
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        u: DVector<f64>,
        y0: DVector<f64>,
    ) -> Result<Self> {
        check_shapes(&a, &b, &u, &y0)?;
        let drift = &b * &u;
        Ok(LtiSystem { a, b, u, y0, drift })
    }

    /// Row-major convenience constructor.
    pub fn from_rows(a: &[Vec<f64>], b: &[Vec<f64>], u: &[f64], y0: &[f64]) -> Result<Self> {
        let a = matrix_from_rows("A", a)?;
        let b = matrix_from_rows("B", b)?;
        Self::new(
            a,
            b,
            DVector::from_column_slice(u),
            DVector::from_column_slice(y0),
        )
    }

    /// The damped oscillator `A = [[-1, 5], [-5, -1]]`, `B = [0, 1]^T`,
    /// `u = 10`, `y0 = [0, 1]` used throughout the examples.
    pub fn damped_oscillator() -> Self {
        Self::from_rows(
            &[vec![-1.0, 5.0], vec![-5.0, -1.0]],
            &[vec![0.0], vec![1.0]],
            &[10.0],
            &[0.0, 1.0],
        )
        .expect("built-in system is valid")
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn y0(&self) -> StateVector {
        StateVector::from_vector_unchecked(self.y0.clone())
    }

    /// The constant forcing term `B u`.
    pub fn drift(&self) -> &DVector<f64> {
        &self.drift
    }

    pub(crate) fn check_state(&self, y: &StateVector) -> Result<()> {
        if y.dim() != self.dim() {
            return Err(PitaError::DimensionMismatch {
                field: "state",
                expected: self.dim(),
                found: y.dim(),
            });
        }
        Ok(())
    }
}

/// Re-checks every shape and finiteness invariant and returns the system
/// unchanged. Idempotent.
pub fn validate_system(sys: &LtiSystem) -> Result<LtiSystem> {
    check_shapes(&sys.a, &sys.b, &sys.u, &sys.y0)?;
    Ok(sys.clone())
}

fn check_shapes(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    u: &DVector<f64>,
    y0: &DVector<f64>,
) -> Result<()> {
    let d = a.nrows();
    if d == 0 {
        return Err(PitaError::DimensionMismatch {
            field: "A",
            expected: 1,
            found: 0,
        });
    }
    if a.ncols() != d {
        return Err(PitaError::DimensionMismatch {
            field: "A",
            expected: d,
            found: a.ncols(),
        });
    }
    if b.nrows() != d {
        return Err(PitaError::DimensionMismatch {
            field: "B",
            expected: d,
            found: b.nrows(),
        });
    }
    if u.len() != b.ncols() {
        return Err(PitaError::DimensionMismatch {
            field: "u",
            expected: b.ncols(),
            found: u.len(),
        });
    }
    if y0.len() != d {
        return Err(PitaError::DimensionMismatch {
            field: "y0",
            expected: d,
            found: y0.len(),
        });
    }
    let finite = |field: &'static str, mut it: std::slice::Iter<'_, f64>| {
        if it.all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(PitaError::NonFiniteEntry { field })
        }
    };
    finite("A", a.as_slice().iter())?;
    finite("B", b.as_slice().iter())?;
    finite("u", u.as_slice().iter())?;
    finite("y0", y0.as_slice().iter())?;
    Ok(())
}

fn matrix_from_rows(field: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(PitaError::DimensionMismatch {
            field,
            expected: ncols,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Uniform partition of `[t0, tf]` into `slices` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    slices: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, slices: usize) -> Result<Self> {
        if !t0.is_finite() || !tf.is_finite() {
            return Err(PitaError::InvalidArgument(
                "grid bounds must be finite".into(),
            ));
        }
        if tf <= t0 {
            return Err(PitaError::InvalidArgument(format!(
                "grid end {tf} must exceed start {t0}"
            )));
        }
        if slices == 0 {
            return Err(PitaError::InvalidArgument(
                "grid needs at least one slice".into(),
            ));
        }
        Ok(TimeGrid { t0, tf, slices })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    /// Slice length `(tf - t0) / N`.
    pub fn slice_len(&self) -> f64 {
        (self.tf - self.t0) / self.slices as f64
    }

    /// Boundary `t_j`; `t_N` is exactly `tf`.
    pub fn boundary(&self, j: usize) -> f64 {
        if j >= self.slices {
            self.tf
        } else {
            self.t0 + j as f64 * self.slice_len()
        }
    }

    pub fn boundaries(&self) -> Vec<f64> {
        slice_boundaries(self)
    }
}

/// The `N + 1` slice boundaries. The last one is `tf` itself, not an
/// accumulated sum.
pub fn slice_boundaries(grid: &TimeGrid) -> Vec<f64> {
    (0..=grid.slices).map(|j| grid.boundary(j)).collect()
}

/// Time-stamped states produced by a propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(PitaError::DimensionMismatch {
                field: "trajectory",
                expected: times.len(),
                found: states.len(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PitaError::InvalidArgument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if let Some(first) = states.first() {
            if let Some(bad) = states.iter().find(|s| s.dim() != first.dim()) {
                return Err(PitaError::DimensionMismatch {
                    field: "trajectory",
                    expected: first.dim(),
                    found: bad.dim(),
                });
            }
        }
        Ok(Trajectory { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &StateVector)> {
        self.times.last().copied().zip(self.states.last())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_oscillator_is_accepted() {
        let sys = LtiSystem::damped_oscillator();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.drift().as_slice(), &[0.0, 10.0]);
    }

    #[test]
    fn mismatched_b_is_rejected() {
        let err = LtiSystem::from_rows(
            &[vec![-1.0, 5.0], vec![-5.0, -1.0]],
            &[vec![0.0], vec![1.0], vec![2.0]],
            &[10.0],
            &[0.0, 1.0],
        )
        .unwrap_err();
        assert!(
            matches!(err, PitaError::DimensionMismatch { field: "B", .. }),
            "{err}"
        );
    }

    #[test]
    fn nan_in_a_is_rejected() {
        let err = LtiSystem::from_rows(
            &[vec![f64::NAN, 5.0], vec![-5.0, -1.0]],
            &[vec![0.0], vec![1.0]],
            &[10.0],
            &[0.0, 1.0],
        )
        .unwrap_err();
        assert!(matches!(err, PitaError::NonFiniteEntry { field: "A" }));
    }

    #[test]
    fn validate_is_idempotent() {
        let sys = LtiSystem::damped_oscillator();
        let once = validate_system(&sys).unwrap();
        let twice = validate_system(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(sys, twice);
    }

    #[test]
    fn boundaries_quarter_grid() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert_eq!(slice_boundaries(&g), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn boundaries_end_exactly_at_tf() {
        let g = TimeGrid::new(0.0, 0.9, 9).unwrap();
        let b = slice_boundaries(&g);
        assert_eq!(b.len(), 10);
        assert_eq!(b[9], 0.9);
        for (j, t) in b.iter().enumerate() {
            assert!((t - 0.1 * j as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn single_slice_grid() {
        let g = TimeGrid::new(0.5, 2.0, 1).unwrap();
        assert_eq!(slice_boundaries(&g), vec![0.5, 2.0]);
    }

    #[test]
    fn bad_grids() {
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn trajectory_rejects_unsorted_times() {
        let s = StateVector::new(vec![1.0]).unwrap();
        assert!(Trajectory::new(vec![0.0, 0.0], vec![s.clone(), s]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn last_boundary_is_tf(t0 in -10.0..10.0f64, len in 1e-3..50.0f64, n in 1usize..500) {
            let g = TimeGrid::new(t0, t0 + len, n).unwrap();
            let b = slice_boundaries(&g);
            proptest::prop_assert_eq!(b.len(), n + 1);
            proptest::prop_assert_eq!(b[n].to_bits(), (t0 + len).to_bits());
            proptest::prop_assert!(b.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
