use lure_contract::library::{self, reference};
use lure_contract::matlin::{self, Matrix, SymMatrix};
use lure_contract::model::{close_loop, ClosedLoop, Gains, NonlinearityClass, TimeDomain};
use lure_contract::nonlin::SampleScheme;
use lure_contract::verify::{self, Certificate, TrialScheme};
use proptest::prelude::*;

/// `e^{M}` by scaling and squaring a 20-term Taylor series.
fn expm(m: &Matrix) -> Matrix {
    let norm = m.norm_one();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m.scale(0.5f64.powi(squarings));
    let n = m.rows();
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..=20 {
        term = (&term * &a).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn ct_loop(a: Matrix, b_cl: Matrix, c: Matrix) -> ClosedLoop {
    ClosedLoop::new(a, b_cl, c, TimeDomain::Continuous).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn rk4_matches_scalar_exponential() {
    let cl = ct_loop(Matrix::identity(2).scale(-1.0), Matrix::zeros(2, 1), Matrix::identity(2));
    let t = verify::simulate_ct(&cl, &library::zero(2, 1), &[1.0, -2.0], 2.0, 1e-2).unwrap();
    let last = t.states.last().unwrap();
    let exact = [(-2.0f64).exp(), -2.0 * (-2.0f64).exp()];
    assert!(dist(last, &exact) < 1e-9);
}

#[test]
fn rk4_matches_matrix_exponential_with_folded_linear_feedback() {
    let a = Matrix::from_rows(&[[-0.5, 1.0, 0.0], [-1.0, -0.3, 0.2], [0.0, 0.4, -1.0]]).unwrap();
    let b = Matrix::column(&[0.0, 1.0, 0.5]);
    let c = Matrix::from_rows(&[[1.0, 0.0, 1.0]]).unwrap();
    let gamma = Matrix::diag(&[-0.7]);
    let cl = ct_loop(a.clone(), b.clone(), c.clone());
    let x0 = [1.0, 0.5, -1.0];
    let t = verify::simulate_ct(&cl, &library::linear(gamma.clone()), &x0, 1.5, 1e-3).unwrap();
    let folded = &a + &(&(&b * &gamma) * &c);
    let exact = expm(&folded.scale(1.5)).mul_vec(&x0);
    assert!(dist(t.states.last().unwrap(), &exact) < 1e-11, "{:?} vs {exact:?}", t.states.last());
}

#[test]
fn rk4_error_shrinks_sixteenfold_when_step_halves() {
    let a = Matrix::from_rows(&[[-1.0, 2.0], [-2.0, -0.5]]).unwrap();
    let cl = ct_loop(a, Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(), Matrix::identity(2));
    let psi = library::tanh(2);
    let end = |dt: f64| verify::simulate_ct(&cl, &psi, &[2.0, -1.0], 2.0, dt).unwrap().states.last().unwrap().clone();
    let (x1, x2, x3) = (end(0.1), end(0.05), end(0.025));
    let ratio = dist(&x1, &x2) / dist(&x2, &x3);
    assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
}

#[test]
fn dt_constant_input_reaches_linear_fixed_point() {
    let cl = close_loop(&reference::system(), &reference::gains()).unwrap();
    let c = 2.5;
    let t = verify::simulate_dt(&cl, &library::constant(2, vec![c]), &[1.0, -3.0, 4.0], 400).unwrap();
    let eye = Matrix::identity(3);
    let rhs = cl.b_cl.scale(c);
    let fixed = matlin::solve(&(&eye - &cl.a_cl), &rhs).unwrap().col_vec(0);
    assert!(dist(t.states.last().unwrap(), &fixed) < 1e-12);
}

#[test]
fn dt_runs_are_bitwise_reproducible() {
    let cl = close_loop(&reference::system(), &reference::gains()).unwrap();
    for psi in reference::nonlinearities() {
        let a = verify::simulate_dt(&cl, &psi, &[0.3, -0.2, 5.0], 50).unwrap();
        let b = verify::simulate_dt(&cl, &psi, &[0.3, -0.2, 5.0], 50).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn reference_certificate_passes_empirically() {
    let sys = reference::system();
    let (x1, x2) = reference::initial_pair();
    let trials = TrialScheme {
        pairs: vec![(x1, x2)],
        random_pairs: 10,
        class_check: SampleScheme::default().with_count(2000),
        ..TrialScheme::default()
    };
    let cert = Certificate { p: reference::certificate(), eta: reference::ETA };
    let r = verify::certify_empirically(
        &sys,
        &reference::gains(),
        &NonlinearityClass::Lipschitz(reference::lipschitz()),
        &reference::nonlinearities(),
        &cert,
        &trials,
    )
    .unwrap();
    assert!(r.passed, "{r:?}");
    assert_eq!(r.runs.len(), 33);
}

#[test]
fn lowered_rate_fails_exactly_when_an_observed_ratio_exceeds_it() {
    let sys = reference::system();
    let (x1, x2) = reference::initial_pair();
    let cl = close_loop(&sys, &reference::gains()).unwrap();
    let psi = library::example_log_cosh();
    let observed = verify::rate_estimate(
        &verify::simulate_dt(&cl, &psi, &x1, 10).unwrap(),
        &verify::simulate_dt(&cl, &psi, &x2, 10).unwrap(),
        &reference::certificate(),
    )
    .unwrap()
    .max_ratio;
    let trials = TrialScheme {
        pairs: vec![(x1, x2)],
        random_pairs: 0,
        class_check: SampleScheme::default().with_count(500),
        ..TrialScheme::default()
    };
    let cert = Certificate { p: reference::certificate(), eta: 0.5 };
    let r = verify::certify_empirically(
        &sys,
        &reference::gains(),
        &NonlinearityClass::Lipschitz(reference::lipschitz()),
        &[psi],
        &cert,
        &trials,
    )
    .unwrap();
    assert_eq!(r.passed, observed <= 0.5 * (1.0 + verify::RATIO_TOLERANCE));
    assert!(!r.passed);
}

#[test]
fn open_loop_reference_plant_fails_any_contraction_claim() {
    let sys = reference::system();
    let trials = TrialScheme { random_pairs: 4, steps: 30, class_check: SampleScheme::default().with_count(200), ..TrialScheme::default() };
    for eta in [0.5, 0.9, 0.99] {
        let cert = Certificate { p: SymMatrix::identity(3), eta };
        let r = verify::certify_empirically(
            &sys,
            &Gains::zero(&sys),
            &NonlinearityClass::Lipschitz(reference::lipschitz()),
            &[library::zero(2, 1)],
            &cert,
            &trials,
        )
        .unwrap();
        assert!(!r.passed);
    }
}

#[test]
fn class_violations_are_refused_before_simulation() {
    let sys = reference::system();
    let bad = lure_contract::NonlinearFn::new("steep", 2, 1, |y| vec![3.0 * y[1]]);
    let cert = Certificate { p: reference::certificate(), eta: 0.9 };
    let trials = TrialScheme { class_check: SampleScheme::default().with_count(200), ..TrialScheme::default() };
    let err = verify::certify_empirically(
        &sys,
        &reference::gains(),
        &NonlinearityClass::Lipschitz(reference::lipschitz()),
        &[bad],
        &cert,
        &trials,
    )
    .unwrap_err();
    assert!(matches!(err, lure_contract::Error::Precondition(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(x0 in prop::collection::vec(-1e3..1e3f64, 3), steps in 1usize..30, ct in any::<bool>()) {
        let t = if ct {
            let cl = ct_loop(Matrix::identity(3).scale(-0.3), Matrix::column(&[1.0, 0.0, -1.0]), Matrix::identity(3));
            verify::simulate_ct(&cl, &lure_contract::NonlinearFn::new("s", 3, 1, |y| vec![y[0].sin()]), &x0, steps as f64 * 0.01, 0.01).unwrap()
        } else {
            let cl = close_loop(&reference::system(), &reference::gains()).unwrap();
            verify::simulate_dt(&cl, &library::example_logistic(), &x0, steps).unwrap()
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = verify::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.domain, t.domain);
        prop_assert_eq!(back.times, t.times);
        prop_assert_eq!(back.states, t.states);
    }

    #[test]
    fn weighted_distance_is_a_norm(
        a in prop::collection::vec(-5.0..5.0f64, 3),
        b in prop::collection::vec(-5.0..5.0f64, 3),
        c in prop::collection::vec(-5.0..5.0f64, 3),
    ) {
        let p = reference::certificate();
        let d = |u: &[f64], v: &[f64]| {
            let diff: Vec<f64> = u.iter().zip(v).map(|(x, y)| x - y).collect();
            matlin::weighted_norm(&diff, &p)
        };
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(a == b || d(&a, &b) > 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn half_loop_ratios_are_exact(x1 in prop::collection::vec(-5.0..5.0f64, 3), x2 in prop::collection::vec(-5.0..5.0f64, 3)) {
        prop_assume!(dist(&x1, &x2) > 1e-6);
        let cl = ClosedLoop::new(Matrix::identity(3).scale(0.5), Matrix::zeros(3, 1), Matrix::identity(3), TimeDomain::Discrete).unwrap();
        let psi = library::zero(3, 1);
        let r = verify::rate_estimate(
            &verify::simulate_dt(&cl, &psi, &x1, 8).unwrap(),
            &verify::simulate_dt(&cl, &psi, &x2, 8).unwrap(),
            &SymMatrix::identity(3),
        ).unwrap();
        for ratio in r.ratios.iter().flatten() {
            prop_assert!((ratio - 0.5).abs() < 1e-14);
        }
    }
}
