use nalgebra::{DMatrix, DVector};
use pita_core::propagators::{
    closed_form_explicit, exact_flow, exact_solution, explicit_euler_endpoint,
    implicit_euler_endpoint, stability_radius,
};
use pita_core::{LtiSystem, StateVector};
use proptest::prelude::*;

fn sigma() -> LtiSystem {
    LtiSystem::damped_oscillator()
}

/// Hand-derived solution: `y_ss + e^{-t} R(5t) (y0 - y_ss)` with
/// `R` the clockwise rotation and `y_ss = (25/13, 5/13)`.
fn oscillator_oracle(t: f64) -> [f64; 2] {
    let (ss0, ss1) = (25.0 / 13.0, 5.0 / 13.0);
    let (d0, d1) = (0.0 - ss0, 1.0 - ss1);
    let (s, c) = (5.0 * t).sin_cos();
    let e = (-t).exp();
    [ss0 + e * (c * d0 + s * d1), ss1 + e * (-s * d0 + c * d1)]
}

#[test]
fn exact_matches_hand_derived_solution() {
    for t in [0.0, 0.05, 0.3, 0.9, 2.5, 7.0] {
        let y = exact_solution(&sigma(), t).unwrap();
        let o = oscillator_oracle(t);
        assert!(
            (y[0] - o[0]).abs() < 1e-12 && (y[1] - o[1]).abs() < 1e-12,
            "t = {t}"
        );
    }
}

#[test]
fn explicit_euler_is_first_order() {
    let sys = sigma();
    let exact = exact_solution(&sys, 1.0).unwrap();
    let err = |h: f64| {
        explicit_euler_endpoint(&sys, &sys.y0(), 0.0, 1.0, h)
            .unwrap()
            .distance(&exact)
    };
    let ratio = err(1.0 / 200.0) / err(1.0 / 400.0);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn implicit_euler_is_first_order() {
    let sys = sigma();
    let exact = exact_solution(&sys, 1.0).unwrap();
    let err = |h: f64| {
        implicit_euler_endpoint(&sys, &sys.y0(), 0.0, 1.0, h)
            .unwrap()
            .distance(&exact)
    };
    let ratio = err(1.0 / 200.0) / err(1.0 / 400.0);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn ode_residual_of_exact_solution() {
    let sys = sigma();
    let eps = 1e-5;
    for t in [0.1, 0.45, 0.9, 3.0] {
        let y = exact_solution(&sys, t).unwrap();
        let fd = (exact_solution(&sys, t + eps).unwrap().into_vector()
            - exact_solution(&sys, t - eps).unwrap().into_vector())
            / (2.0 * eps);
        let rhs = sys.a() * y.as_vector() + sys.drift();
        assert!((fd - rhs).norm() < 1e-5, "t = {t}");
    }
}

#[test]
fn semigroup_property() {
    let sys = sigma();
    for (s, t) in [(0.1, 0.2), (0.45, 0.45), (1.0, 2.5)] {
        let two_step = exact_flow(&sys, &exact_solution(&sys, s).unwrap(), t).unwrap();
        let direct = exact_solution(&sys, s + t).unwrap();
        assert!(two_step.distance(&direct) < 1e-10);
    }
}

#[test]
fn stability_radius_oracles() {
    assert!((stability_radius(&sigma(), 0.1) - 1.06f64.sqrt()).abs() < 1e-12);
    assert!((stability_radius(&sigma(), 0.1) - 1.029563).abs() < 1e-5);
    assert!((stability_radius(&sigma(), 1.0 / 13.0) - 1.0).abs() < 1e-12);
}

fn stable_system(entries: Vec<f64>, b: Vec<f64>, y0: Vec<f64>, d: usize) -> LtiSystem {
    let mut a = DMatrix::from_vec(d, d, entries);
    for i in 0..d {
        a[(i, i)] -= 2.0 * d as f64;
    }
    LtiSystem::new(
        a,
        DMatrix::from_vec(d, 1, b),
        DVector::from_vec(vec![1.5]),
        DVector::from_vec(y0),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_loop(
        d in 1usize..5,
        seed in proptest::collection::vec(-1.0f64..1.0, 16 + 4 + 4),
        k0 in 1usize..60,
    ) {
        let sys = stable_system(seed[..d * d].to_vec(), seed[16..16 + d].to_vec(), seed[20..20 + d].to_vec(), d);
        let h = 0.01;
        let looped = explicit_euler_endpoint(&sys, &sys.y0(), 0.0, k0 as f64 * h, h).unwrap();
        let closed = closed_form_explicit(&sys, &sys.y0(), k0, h).unwrap();
        let scale = 1.0 + looped.norm();
        prop_assert!(looped.distance(&closed) <= 1e-10 * scale);
    }

    #[test]
    fn euler_schemes_agree_with_exact_to_first_order(
        d in 1usize..4,
        seed in proptest::collection::vec(-1.0f64..1.0, 9 + 3 + 3),
    ) {
        let sys = stable_system(seed[..d * d].to_vec(), seed[9..9 + d].to_vec(), seed[12..12 + d].to_vec(), d);
        let exact = exact_solution(&sys, 0.5).unwrap();
        let coarse = explicit_euler_endpoint(&sys, &sys.y0(), 0.0, 0.5, 1e-3).unwrap().distance(&exact);
        let fine = explicit_euler_endpoint(&sys, &sys.y0(), 0.0, 0.5, 5e-4).unwrap().distance(&exact);
        prop_assume!(coarse > 1e-9);
        prop_assert!((fine / coarse - 0.5).abs() < 0.1);
    }

    #[test]
    fn exact_flow_zero_time_is_identity(y in proptest::collection::vec(-5.0f64..5.0, 2)) {
        let y = StateVector::new(y).unwrap();
        prop_assert_eq!(exact_flow(&sigma(), &y, 0.0).unwrap(), y);
    }
}
