//! Calibration of the auxiliary series damping exponent `q`.
//!
//! A reference limit for the first slice is bootstrapped with a very small
//! explicit Euler step, then `q` is chosen by simulated annealing so that
//! the coupled extrapolation of `Omega_1` lands as close as possible to
//! that reference. The resulting `q` is reused for the other slices, or
//! refreshed every few slices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::accel::{vector_accelerate, AccelSpec, AuxSeriesParams};
use crate::error::{PitaError, Result};
use crate::exec::par_map;
use crate::model::{LtiSystem, StateVector};
use crate::omega::OmegaSeries;
use crate::parareal::check_distance;
use crate::propagators::{explicit_euler_endpoint, stability_radius};

/// Relative margin below which a lower objective counts as roundoff.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

/// Simulated annealing settings. `q` is searched in log10 space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealConfig {
    pub q_min: f64,
    pub q_max: f64,
    /// Starting point; the log-midpoint of the bounds when absent.
    pub q_init: Option<f64>,
    /// Starting temperature; the objective at `q_init` when absent.
    pub initial_temp: Option<f64>,
    pub cooling: f64,
    pub steps: usize,
    /// Standard deviation of proposals, in decades.
    pub proposal_scale: f64,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            q_min: 1e-10,
            q_max: 10.0,
            q_init: None,
            initial_temp: None,
            cooling: 0.95,
            steps: 2000,
            proposal_scale: 0.5,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PitaError::InvalidArgument(m));
        if !(self.q_min > 0.0 && self.q_min < self.q_max) || !self.q_max.is_finite() {
            return bad(format!(
                "q bounds need 0 < q_min < q_max, got [{}, {}]",
                self.q_min, self.q_max
            ));
        }
        if let Some(q) = self.q_init {
            if !(q >= self.q_min && q <= self.q_max) {
                return bad(format!(
                    "q_init = {q} outside [{}, {}]",
                    self.q_min, self.q_max
                ));
            }
        }
        if let Some(t) = self.initial_temp {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("initial temperature {t} must be positive"));
            }
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return bad(format!("cooling {} must lie in (0, 1)", self.cooling));
        }
        if self.steps == 0 {
            return bad("annealing needs at least one step".into());
        }
        if !(self.proposal_scale > 0.0) || !self.proposal_scale.is_finite() {
            return bad(format!(
                "proposal scale {} must be positive",
                self.proposal_scale
            ));
        }
        Ok(())
    }

    fn start(&self) -> f64 {
        self.q_init
            .unwrap_or_else(|| 10f64.powf(0.5 * (self.q_min.log10() + self.q_max.log10())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub q_opt: f64,
    pub objective_at_opt: f64,
    pub q_initial: f64,
    pub objective_at_initial: f64,
    pub reference_limit: StateVector,
    pub evaluations: usize,
}

/// Sequential explicit Euler over `[0, t1]` with a very small step, used as
/// the reference limit of the first slice.
pub fn bootstrap_reference(sys: &LtiSystem, t1: f64, h_tiny: f64) -> Result<StateVector> {
    let radius = stability_radius(sys, h_tiny);
    if radius >= 1.0 {
        return Err(PitaError::Unstable { h: h_tiny, radius });
    }
    explicit_euler_endpoint(sys, &sys.y0(), 0.0, t1, h_tiny)
}

/// One Omega-series and its reference, validated once; `objective` can
/// then be evaluated for any `q`.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    omega: OmegaSeries,
    reference: StateVector,
    base: AccelSpec,
    aux: AuxSeriesParams,
}

impl CalibrationProblem {
    /// `delta_bounds`, when given, are checked against the spacing of the
    /// series labels. A spec without auxiliary series gets `S_b0 = 0`.
    pub fn new(
        omega: OmegaSeries,
        reference: StateVector,
        base: AccelSpec,
        delta_bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        if let Some((lo, hi)) = delta_bounds {
            for w in omega.labels().windows(2) {
                check_distance(w[1] - w[0], lo, hi)?;
            }
        }
        if reference.dim() != omega.last().dim() {
            return Err(PitaError::DimensionMismatch {
                field: "reference",
                expected: omega.last().dim(),
                found: reference.dim(),
            });
        }
        let required = base.terms_needed();
        if omega.len() < required {
            return Err(PitaError::InsufficientTerms {
                required,
                available: omega.len(),
            });
        }
        let aux = match base.aux() {
            Some(a) => *a,
            None => AuxSeriesParams::new(0.0, 1.0)?,
        };
        Ok(CalibrationProblem {
            omega,
            reference,
            base,
            aux,
        })
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    pub fn spec_for(&self, q: f64) -> Result<AccelSpec> {
        Ok(self.base.with_aux(Some(self.aux.with_q(q)?)))
    }

    /// The accelerated limit for damping exponent `q`.
    pub fn accelerated(&self, q: f64) -> Result<StateVector> {
        vector_accelerate(&self.spec_for(q)?, self.omega.terms())
    }

    /// Euclidean distance between the accelerated limit and the reference.
    pub fn objective(&self, q: f64) -> Result<f64> {
        Ok(self.accelerated(q)?.distance(&self.reference))
    }
}

/// One-shot objective: validates the label spacing, then evaluates `q`.
pub fn objective(
    q: f64,
    omega1: &OmegaSeries,
    reference: &StateVector,
    rho: f64,
    base_spec: &AccelSpec,
    delta_bounds: Option<(f64, f64)>,
) -> Result<f64> {
    let spec = base_spec.with_rho(rho)?;
    CalibrationProblem::new(omega1.clone(), reference.clone(), spec, delta_bounds)?.objective(q)
}

/// Simulated annealing over `log10 q` with Gaussian proposals reflected
/// into the bounds, Metropolis acceptance at temperature
/// `T_i = T_0 * cooling^i`, and best-so-far tracking. Deterministic for a
/// given seed.
pub fn anneal_q(problem: &CalibrationProblem, acfg: &AnnealConfig) -> Result<CalibrationResult> {
    acfg.validate()?;
    let (lo, hi) = (acfg.q_min.log10(), acfg.q_max.log10());
    let eval = |q: f64| -> Result<f64> {
        let f = problem.objective(q)?;
        Ok(if f.is_finite() { f } else { f64::INFINITY })
    };

    let q0 = acfg.start();
    let f0 = eval(q0)?;
    let t0 = acfg.initial_temp.unwrap_or(f0);
    let mut rng = ChaCha8Rng::seed_from_u64(acfg.seed);
    let proposal = Normal::new(0.0, acfg.proposal_scale)
        .map_err(|e| PitaError::InvalidArgument(e.to_string()))?;

    let (mut x, mut f) = (q0.log10(), f0);
    let (mut best_q, mut best_f) = (q0, f0);
    let mut temp = t0;
    for _ in 0..acfg.steps {
        let x_new = reflect(x + proposal.sample(&mut rng), lo, hi);
        let q_new = 10f64.powf(x_new).clamp(acfg.q_min, acfg.q_max);
        let f_new = eval(q_new)?;
        let u: f64 = rng.random();
        let accept =
            f_new <= f || (temp.is_finite() && temp > 0.0 && u < (-(f_new - f) / temp).exp());
        if accept {
            x = x_new;
            f = f_new;
        }
        if improves(f_new, best_f) {
            best_q = q_new;
            best_f = f_new;
        }
        temp *= acfg.cooling;
    }

    Ok(CalibrationResult {
        q_opt: best_q,
        objective_at_opt: best_f,
        q_initial: q0,
        objective_at_initial: f0,
        reference_limit: problem.reference.clone(),
        evaluations: acfg.steps + 1,
    })
}

/// Independent chains with seeds `seed, seed + 1, ...`, run concurrently;
/// the best result wins, ties going to the lowest seed.
pub fn anneal_q_chains(
    problem: &CalibrationProblem,
    acfg: &AnnealConfig,
    chains: usize,
) -> Result<CalibrationResult> {
    let configs: Vec<AnnealConfig> = (0..chains.max(1) as u64)
        .map(|i| AnnealConfig {
            seed: acfg.seed.wrapping_add(i),
            ..*acfg
        })
        .collect();
    let results = par_map(configs, |c| anneal_q(problem, &c))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let mut best = results
        .into_iter()
        .reduce(|a, b| {
            if improves(b.objective_at_opt, a.objective_at_opt) {
                b
            } else {
                a
            }
        })
        .expect("at least one chain");
    best.evaluations = evaluations;
    Ok(best)
}

fn improves(candidate: f64, best: f64) -> bool {
    candidate < best - IMPROVEMENT_TOL * best.abs().max(f64::MIN_POSITIVE)
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let mut x = x;
    if x > hi {
        x = 2.0 * hi - x;
    }
    if x < lo {
        x = 2.0 * lo - x;
    }
    x.clamp(lo, hi)
}

/// `spec` with `q := q_opt`; a missing auxiliary series is created with
/// `S_b0 = 0`.
pub fn propagate_calibration(result: &CalibrationResult, spec: &AccelSpec) -> Result<AccelSpec> {
    let aux = match spec.aux() {
        Some(a) => a.with_q(result.q_opt)?,
        None => AuxSeriesParams::new(0.0, result.q_opt)?,
    };
    Ok(spec.with_aux(Some(aux)))
}

/// Slices (1-based) at which the calibration is re-run: `1, 1 + interval,
/// ...` up to `slices`.
pub fn periodic_refresh(interval: usize, slices: usize) -> Result<Vec<usize>> {
    if interval == 0 {
        return Err(PitaError::InvalidArgument(
            "refresh interval must be >= 1".into(),
        ));
    }
    Ok((1..=slices).step_by(interval).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::{exact_solution, explicit_euler_step};

    fn constant_omega(v: &[f64], len: usize) -> OmegaSeries {
        let terms = vec![StateVector::new(v.to_vec()).unwrap(); len];
        OmegaSeries::new(0.1, terms, (0..len).map(|i| 100.0 + i as f64).collect()).unwrap()
    }

    #[test]
    fn bootstrap_close_to_exact() {
        let sys = LtiSystem::damped_oscillator();
        let r = bootstrap_reference(&sys, 0.1, 1e-5).unwrap();
        assert!(r.distance(&exact_solution(&sys, 0.1).unwrap()) < 1e-4);
    }

    #[test]
    fn bootstrap_single_step_and_instability() {
        let sys = LtiSystem::from_rows(&[vec![-2.0]], &[vec![1.0]], &[1.0], &[1.0]).unwrap();
        let r = bootstrap_reference(&sys, 0.25, 0.25).unwrap();
        assert_eq!(r, explicit_euler_step(&sys, &sys.y0(), 0.25).unwrap());

        let err = bootstrap_reference(&LtiSystem::damped_oscillator(), 0.1, 0.1).unwrap_err();
        match err {
            PitaError::Unstable { radius, .. } => assert!((radius - 1.029_563).abs() < 1e-6),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn objective_is_zero_at_its_own_value() {
        let om = OmegaSeries::new(
            0.1,
            (0..7)
                .map(|i| {
                    StateVector::new(vec![2.0 - 0.5f64.powi(i), 1.0 + 0.3f64.powi(i)]).unwrap()
                })
                .collect(),
            (0..7).map(|i| 10.0 + i as f64).collect(),
        )
        .unwrap();
        let dummy = StateVector::zeros(2);
        let p = CalibrationProblem::new(om.clone(), dummy, AccelSpec::default(), None).unwrap();
        let value = p.accelerated(0.8).unwrap();
        let f = objective(
            0.8,
            &om,
            &value,
            1.0,
            &AccelSpec::default(),
            Some((0.5, 2.0)),
        )
        .unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn constant_series_objective_ignores_q() {
        let om = constant_omega(&[1.0, 2.0], 7);
        let reference = StateVector::new(vec![1.0, 2.5]).unwrap();
        let p = CalibrationProblem::new(om, reference, AccelSpec::default(), None).unwrap();
        for q in [1e-6, 0.01, 1.0, 7.0] {
            assert!((p.objective(q).unwrap() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn label_spacing_is_validated() {
        let om = constant_omega(&[1.0], 7);
        let reference = StateVector::new(vec![1.0]).unwrap();
        let err = CalibrationProblem::new(om, reference, AccelSpec::default(), Some((2.0, 5.0)))
            .unwrap_err();
        assert!(matches!(err, PitaError::ScheduleViolation { .. }));
    }

    #[test]
    fn anneal_on_constant_objective_keeps_initial_point() {
        let om = constant_omega(&[1.0, 2.0], 7);
        let reference = StateVector::new(vec![1.0, 2.5]).unwrap();
        let p = CalibrationProblem::new(om, reference, AccelSpec::default(), None).unwrap();
        let acfg = AnnealConfig {
            q_init: Some(0.3),
            steps: 50,
            ..Default::default()
        };
        let r = anneal_q(&p, &acfg).unwrap();
        assert_eq!(r.q_opt, 0.3);
        assert!((r.objective_at_opt - r.objective_at_initial).abs() < 1e-9);
        assert_eq!(r.evaluations, 51);
    }

    #[test]
    fn anneal_single_step() {
        let om = OmegaSeries::new(
            0.1,
            (0..7)
                .map(|i| StateVector::new(vec![2.0 - 0.5f64.powi(i)]).unwrap())
                .collect(),
            (0..7).map(|i| i as f64).collect(),
        )
        .unwrap();
        let p = CalibrationProblem::new(
            om,
            StateVector::new(vec![2.0]).unwrap(),
            AccelSpec::default(),
            None,
        )
        .unwrap();
        let acfg = AnnealConfig {
            steps: 1,
            seed: 9,
            ..Default::default()
        };
        let r = anneal_q(&p, &acfg).unwrap();
        let f_init = p.objective(r.q_initial).unwrap();
        assert!(r.objective_at_opt <= f_init);
        if r.q_opt != r.q_initial {
            assert_eq!(r.objective_at_opt, p.objective(r.q_opt).unwrap());
        }
    }

    #[test]
    fn anneal_config_validation() {
        let bad = [
            AnnealConfig {
                q_min: 0.0,
                ..Default::default()
            },
            AnnealConfig {
                q_max: 1e-12,
                ..Default::default()
            },
            AnnealConfig {
                cooling: 1.0,
                ..Default::default()
            },
            AnnealConfig {
                steps: 0,
                ..Default::default()
            },
            AnnealConfig {
                q_init: Some(100.0),
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(AnnealConfig::default().validate().is_ok());
    }

    #[test]
    fn propagation_sets_q() {
        let r = CalibrationResult {
            q_opt: 0.0035,
            objective_at_opt: 0.0,
            q_initial: 1.0,
            objective_at_initial: 1.0,
            reference_limit: StateVector::zeros(1),
            evaluations: 1,
        };
        let with_aux = AccelSpec::default().with_aux(Some(AuxSeriesParams::new(0.5, 1.0).unwrap()));
        let once = propagate_calibration(&r, &with_aux).unwrap();
        assert_eq!(once.aux().unwrap().q(), 0.0035);
        assert_eq!(once.aux().unwrap().s_b0(), 0.5);
        assert_eq!(propagate_calibration(&r, &once).unwrap(), once);

        let created = propagate_calibration(&r, &AccelSpec::default()).unwrap();
        assert_eq!(created.aux().unwrap().s_b0(), 0.0);
        assert_eq!(created.aux().unwrap().q(), 0.0035);
        assert_eq!(created.k(), 4);
    }

    #[test]
    fn refresh_schedules() {
        assert_eq!(periodic_refresh(9, 9).unwrap(), vec![1]);
        assert_eq!(periodic_refresh(1, 4).unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(periodic_refresh(3, 9).unwrap(), vec![1, 4, 7]);
        assert!(periodic_refresh(0, 9).is_err());
    }
}
