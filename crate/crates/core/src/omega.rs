//! Single-solver subdivision study: explicit Euler trajectories at steps
//! `h0 / delta`, sampled at the coarse instants `k0 * h0`, and the
//! per-instant Omega-series collecting one value per subdivision.

use crate::error::{PitaError, Result};
use crate::exec::par_map;
use crate::model::{LtiSystem, StateVector, Trajectory};
use crate::propagators::{explicit_steps, step_count, ExplicitMap};

/// Reference step `h0` and a strictly increasing ladder of integer
/// subdivision factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdivisionSet {
    h0: f64,
    deltas: Vec<usize>,
}

impl SubdivisionSet {
    pub fn new(h0: f64, deltas: Vec<usize>) -> Result<Self> {
        if !(h0 > 0.0) || !h0.is_finite() {
            return Err(PitaError::InvalidArgument(format!(
                "h0 = {h0} must be positive"
            )));
        }
        if deltas.is_empty() {
            return Err(PitaError::InvalidArgument("delta ladder is empty".into()));
        }
        if deltas[0] == 0 {
            return Err(PitaError::InvalidArgument(
                "subdivision factors must be >= 1".into(),
            ));
        }
        if deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PitaError::InvalidArgument(
                "subdivision factors must be strictly increasing".into(),
            ));
        }
        Ok(SubdivisionSet { h0, deltas })
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn deltas(&self) -> &[usize] {
        &self.deltas
    }
}

/// Successive approximations of the state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSeries {
    anchor_time: f64,
    terms: Vec<StateVector>,
    labels: Vec<f64>,
}

impl OmegaSeries {
    pub fn new(anchor_time: f64, terms: Vec<StateVector>, labels: Vec<f64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(PitaError::InsufficientTerms {
                required: 1,
                available: 0,
            });
        }
        if terms.len() != labels.len() {
            return Err(PitaError::DimensionMismatch {
                field: "labels",
                expected: terms.len(),
                found: labels.len(),
            });
        }
        if labels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PitaError::InvalidArgument(
                "Omega-series labels must be strictly increasing".into(),
            ));
        }
        let d = terms[0].dim();
        if let Some(bad) = terms.iter().find(|t| t.dim() != d) {
            return Err(PitaError::DimensionMismatch {
                field: "terms",
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(OmegaSeries {
            anchor_time,
            terms,
            labels,
        })
    }

    pub fn anchor_time(&self) -> f64 {
        self.anchor_time
    }

    pub fn terms(&self) -> &[StateVector] {
        &self.terms
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn last(&self) -> &StateVector {
        self.terms.last().expect("non-empty by construction")
    }
}

/// Explicit Euler at step `h0 / delta` over `[0, tf]`, keeping only the
/// coarse instants `k0 * h0`. The fine path is never stored.
pub fn build_psi(sys: &LtiSystem, h0: f64, delta: usize, tf: f64) -> Result<Trajectory> {
    if delta == 0 {
        return Err(PitaError::InvalidArgument("delta must be >= 1".into()));
    }
    let coarse = step_count(0.0, tf, h0)?;
    let h = h0 / delta as f64;
    let map = ExplicitMap::new(sys, h);
    let mut times = Vec::with_capacity(coarse + 1);
    let mut states = Vec::with_capacity(coarse + 1);
    let mut y = sys.y0().into_vector();
    times.push(0.0);
    states.push(sys.y0());
    for k0 in 1..=coarse {
        for _ in 0..delta {
            y = map.apply(&y);
        }
        let t = if k0 == coarse { tf } else { k0 as f64 * h0 };
        let state =
            StateVector::from_vector(y.clone()).map_err(|_| PitaError::NonFiniteResult {
                step: k0 * delta,
                time: t,
            })?;
        times.push(t);
        states.push(state);
    }
    Trajectory::new(times, states)
}

/// One Psi trajectory per ladder entry, built concurrently and returned in
/// ladder order.
pub fn build_psi_set(sys: &LtiSystem, sub: &SubdivisionSet, tf: f64) -> Result<Vec<Trajectory>> {
    let h0 = sub.h0;
    par_map(sub.deltas.clone(), |delta| build_psi(sys, h0, delta, tf))
        .into_iter()
        .collect()
}

/// `Omega_k0`: the value at `k0 * h0` from every ladder entry, in ladder
/// order.
pub fn build_omega_series(
    sys: &LtiSystem,
    sub: &SubdivisionSet,
    k0: usize,
    tf: f64,
) -> Result<OmegaSeries> {
    let coarse = step_count(0.0, tf, sub.h0)?;
    if k0 == 0 || k0 > coarse {
        return Err(PitaError::InvalidArgument(format!(
            "k0 = {k0} outside 1..={coarse}"
        )));
    }
    let h0 = sub.h0;
    let y0 = sys.y0();
    let terms: Vec<StateVector> = par_map(sub.deltas.clone(), |delta| {
        explicit_steps(sys, &y0, k0 * delta, h0 / delta as f64, 0.0)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let labels = sub.deltas.iter().map(|&d| d as f64).collect();
    OmegaSeries::new(anchor(k0, coarse, h0, tf), terms, labels)
}

/// Every `Omega_k0`, `k0 = 1..=tf/h0`, from an already built Psi set.
pub fn omega_from_psi(psi: &[Trajectory], sub: &SubdivisionSet) -> Result<Vec<OmegaSeries>> {
    let coarse = psi.first().map_or(0, |p| p.len().saturating_sub(1));
    if psi.len() != sub.deltas.len() || psi.iter().any(|p| p.len() != coarse + 1) {
        return Err(PitaError::DimensionMismatch {
            field: "psi",
            expected: sub.deltas.len(),
            found: psi.len(),
        });
    }
    let labels: Vec<f64> = sub.deltas.iter().map(|&d| d as f64).collect();
    (1..=coarse)
        .map(|k0| {
            let terms = psi.iter().map(|p| p.states()[k0].clone()).collect();
            OmegaSeries::new(psi[0].times()[k0], terms, labels.clone())
        })
        .collect()
}

fn anchor(k0: usize, coarse: usize, h0: f64, tf: f64) -> f64 {
    if k0 == coarse {
        tf
    } else {
        k0 as f64 * h0
    }
}

/// Euclidean error of every term against `exact`.
pub fn omega_error_curve(series: &OmegaSeries, exact: &StateVector) -> Result<Vec<f64>> {
    series
        .terms
        .iter()
        .map(|t| {
            if t.dim() != exact.dim() {
                Err(PitaError::DimensionMismatch {
                    field: "exact",
                    expected: t.dim(),
                    found: exact.dim(),
                })
            } else {
                Ok(t.distance(exact))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::{explicit_euler_propagate, explicit_euler_step};

    fn sigma() -> LtiSystem {
        LtiSystem::damped_oscillator()
    }

    #[test]
    fn delta_one_is_coarse_trajectory() {
        let sys = sigma();
        let psi = build_psi(&sys, 0.1, 1, 0.9).unwrap();
        let coarse = explicit_euler_propagate(&sys, &sys.y0(), 0.0, 0.9, 0.1).unwrap();
        assert_eq!(psi, coarse);
    }

    #[test]
    fn delta_two_first_sample() {
        let sys = sigma();
        let psi = build_psi(&sys, 0.1, 2, 0.5).unwrap();
        let half = explicit_euler_step(&sys, &sys.y0(), 0.05).unwrap();
        let full = explicit_euler_step(&sys, &half, 0.05).unwrap();
        assert_eq!(psi.states()[1], full);
    }

    #[test]
    fn psi_point_count_is_independent_of_delta() {
        let sys = sigma();
        for delta in [1, 3, 17] {
            assert_eq!(build_psi(&sys, 0.1, delta, 0.7).unwrap().len(), 8);
        }
        assert!(matches!(
            build_psi(&sys, 0.1, 2, 0.75),
            Err(PitaError::NonIntegralSteps { .. })
        ));
    }

    #[test]
    fn single_entry_ladder() {
        let sys = sigma();
        let sub = SubdivisionSet::new(0.1, vec![1]).unwrap();
        let om = build_omega_series(&sys, &sub, 3, 0.5).unwrap();
        assert_eq!(om.len(), 1);
        let coarse = build_psi(&sys, 0.1, 1, 0.5).unwrap();
        assert_eq!(om.terms()[0], coarse.states()[3]);
        assert_eq!(om.anchor_time(), 3.0 * 0.1);
    }

    #[test]
    fn series_matches_psi_samples_bitwise() {
        let sys = sigma();
        let sub = SubdivisionSet::new(0.1, vec![1, 2, 5, 8]).unwrap();
        let psi = build_psi_set(&sys, &sub, 0.5).unwrap();
        let all = omega_from_psi(&psi, &sub).unwrap();
        for k0 in 1..=5 {
            let direct = build_omega_series(&sys, &sub, k0, 0.5).unwrap();
            assert_eq!(direct, all[k0 - 1]);
        }
    }

    #[test]
    fn ladder_validation() {
        assert!(SubdivisionSet::new(0.1, vec![1, 1]).is_err());
        assert!(SubdivisionSet::new(0.1, vec![0, 2]).is_err());
        assert!(SubdivisionSet::new(0.0, vec![1]).is_err());
        let sub = SubdivisionSet::new(0.1, vec![1, 2]).unwrap();
        assert!(build_omega_series(&sigma(), &sub, 0, 0.5).is_err());
        assert!(build_omega_series(&sigma(), &sub, 6, 0.5).is_err());
    }

    #[test]
    fn error_curve_trivial_cases() {
        let y = StateVector::new(vec![1.0, 2.0]).unwrap();
        let om = OmegaSeries::new(0.1, vec![y.clone(), y.clone()], vec![1.0, 2.0]).unwrap();
        assert_eq!(omega_error_curve(&om, &y).unwrap(), vec![0.0, 0.0]);

        let shifted = StateVector::new(vec![4.0, 6.0]).unwrap();
        let single = OmegaSeries::new(0.1, vec![y], vec![1.0]).unwrap();
        assert_eq!(omega_error_curve(&single, &shifted).unwrap(), vec![5.0]);
    }
}
