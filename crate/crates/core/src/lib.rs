//! Parallel-in-time integration of linear time-invariant ODE systems.
//!
//! The crate combines a semi-explicit Parareal sweep (implicit coarse seed,
//! explicit coarse and fine propagators with a fine step refined on every
//! iteration) with Wynn's epsilon algorithm. Each slice boundary collects
//! its successive Parareal iterates into an Omega-series, whose limit is
//! extrapolated after coupling with an auxiliary alternating series whose
//! damping exponent `q` is calibrated by simulated annealing on the first
//! slice.
//!
//! Modules, bottom-up:
//!
//! * [`model`]: systems, grids, trajectories.
//! * [`propagators`]: Euler schemes, exact reference, stability radius.
//! * [`accel`]: Shanks transform, epsilon table, auxiliary series coupling.
//! * [`omega`]: single-solver subdivision study.
//! * [`parareal`]: classic and semi-explicit Parareal.
//! * [`optimize`]: calibration of `q`.
//! * [`harness`]: configuration, experiment commands, CSV and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod error;
mod exec;
pub mod expm;
pub mod harness;
pub mod model;
pub mod omega;
pub mod optimize;
pub mod parareal;
pub mod propagators;

pub use error::{ErrorClass, PitaError, Result};
pub use model::{LtiSystem, StateVector, TimeGrid, Trajectory};
