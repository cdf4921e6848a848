use lure_contract::library::{self, reference};
use lure_contract::matlin::{self, Matrix, SymMatrix};
use lure_contract::model::{NonlinearFn, SectorBound};
use lure_contract::nonlin::{self, SampleScheme, Verdict, Witness};
use proptest::prelude::*;

fn spd(v: &[f64], n: usize) -> SymMatrix {
    let m = Matrix::from_row_slice(n, n, &v[..n * n]).unwrap();
    SymMatrix::from_matrix(&(&(&m * &m.transpose()) + &Matrix::identity(n).scale(0.1))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lemma3_sides_agree(n in 1usize..=6, s in prop::collection::vec(-2.0..2.0f64, 36), g in prop::collection::vec(-1.5..1.5f64, 36)) {
        let gamma = spd(&g, n);
        let s = SymMatrix::from_matrix(&Matrix::from_row_slice(n, n, &s[..n * n]).unwrap()).unwrap();
        let (lhs, rhs) = nonlin::lemma3_equivalence(&s, &gamma).unwrap();
        // brute-force oracle on both sides
        let inside = s.lambda_min().unwrap() >= 0.0 && gamma.sub(&s).lambda_min().unwrap() >= 0.0;
        let prod = &(s.as_matrix() * &matlin::inverse(gamma.as_matrix()).unwrap()) * &(s.as_matrix() - gamma.as_matrix());
        let nsd = SymMatrix::from_matrix(&prod).unwrap().lambda_max().unwrap() <= 0.0;
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(inside, nsd);
    }

    #[test]
    fn fd_jacobian_is_second_order(y in prop::collection::vec(-2.0..2.0f64, 2)) {
        // Ψ(y) = y₁³ + y₁ y₂²: truncation error of a central difference is h²/6 · ∂³Ψ.
        let psi = NonlinearFn::new("cubic", 2, 1, |y| vec![y[0].powi(3) + y[0] * y[1] * y[1]]);
        let exact = [3.0 * y[0] * y[0] + y[1] * y[1], 2.0 * y[0] * y[1]];
        let err = |h: f64| {
            let j = nonlin::jacobian_fd(&psi, &y, h).unwrap();
            (j[(0, 0)] - exact[0]).abs().max((j[(0, 1)] - exact[1]).abs())
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        prop_assume!(e1 > 1e-9);
        let ratio = e1 / e2;
        prop_assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }
}

#[test]
fn incremental_and_differential_verdicts_agree_on_examples() {
    let sch = SampleScheme::default().with_count(5000);
    for psi in reference::nonlinearities() {
        let inc = nonlin::check_lipschitz_incremental(&psi, &reference::lipschitz(), &sch).unwrap();
        let dif = nonlin::check_lipschitz_differential(&psi, &reference::lipschitz(), &sch).unwrap();
        assert_eq!(inc.verdict, dif.verdict, "{}", psi.name());
        // ρ = 0.1 is below every example's gradient bound (Ψ₂ needs ρ ≥ 0.13)
        let tight = lure_contract::Lipschitz::new(0.1, SymMatrix::diag(&[4.0, 1.0]), SymMatrix::identity(1)).unwrap();
        let inc = nonlin::check_lipschitz_incremental(&psi, &tight, &sch).unwrap();
        let dif = nonlin::check_lipschitz_differential(&psi, &tight, &sch).unwrap();
        assert_eq!(inc.verdict, Verdict::Violated, "{}", psi.name());
        assert_eq!(dif.verdict, Verdict::Violated, "{}", psi.name());
    }
}

#[test]
fn cos_sin_bound_is_tight() {
    let sch = SampleScheme { bounds: vec![(-0.01, 0.01)], ..SampleScheme::default() };
    let r = nonlin::check_lipschitz_differential(&library::example_cos_sin(), &reference::lipschitz(), &sch).unwrap();
    assert!(r.passed());
    assert!(r.worst_margin > -1e-3, "{}", r.worst_margin);
}

#[test]
fn violation_witnesses_reproduce() {
    let sch = SampleScheme::default().with_count(500);
    let unit = lure_contract::Lipschitz::new(1.0, SymMatrix::identity(2), SymMatrix::identity(2)).unwrap();
    let psi = library::double(2);
    let r = nonlin::check_lipschitz_incremental(&psi, &unit, &sch).unwrap();
    let Some(Witness::Pair { y1, y2 }) = r.witness else { panic!("no witness") };
    let d: Vec<f64> = psi.eval(&y1).unwrap().iter().zip(psi.eval(&y2).unwrap()).map(|(a, b)| a - b).collect();
    let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
    let lhs: f64 = d.iter().map(|v| v * v).sum();
    let rhs: f64 = dy.iter().map(|v| v * v).sum();
    assert!(lhs > rhs);
}

/// Gradient maps of separable and coupled scalar potentials.
fn symmetric_maps() -> Vec<(NonlinearFn, SymMatrix)> {
    let eye2 = SymMatrix::identity(2);
    let g = SymMatrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
    vec![
        (library::tanh(2), eye2.clone()),
        (library::tanh(3), SymMatrix::identity(3)),
        (library::tanh(2), eye2.scale(0.5)),
        (library::zero(2, 2), eye2.clone()),
        (library::identity(2), eye2.clone()),
        (library::double(2), eye2.clone()),
        (library::linear(g.as_matrix().clone()), g.clone()),
        (library::linear(Matrix::identity(2).scale(-1.0)), eye2.clone()),
        (
            // ∇ of log cosh(y₁ + y₂): J = sech²(y₁+y₂)·[[1,1],[1,1]], eigenvalues in [0, 2]
            NonlinearFn::new("grad-logcosh-sum", 2, 2, |y| vec![(y[0] + y[1]).tanh(); 2]),
            eye2.scale(2.0),
        ),
        (NonlinearFn::new("grad-logcosh-sum", 2, 2, |y| vec![(y[0] + y[1]).tanh(); 2]), eye2.clone()),
        (
            // ∇ of ¼ Σ sin²: J = diag(½ cos 2yᵢ), indefinite
            NonlinearFn::new("grad-sin2", 2, 2, |y| y.iter().map(|v| 0.25 * (2.0 * v).sin()).collect()),
            eye2.clone(),
        ),
    ]
}

#[test]
fn monotone_and_weighted_sector_verdicts_coincide() {
    let sch = SampleScheme::default().with_count(3000);
    for (psi, gamma) in symmetric_maps() {
        assert!(nonlin::check_symmetry(&psi, &sch).unwrap().passed(), "{}", psi.name());
        let mono = nonlin::check_monotone(&psi, &gamma, &sch).unwrap();
        let theta = SymMatrix::from_matrix(&matlin::inverse(gamma.as_matrix()).unwrap()).unwrap();
        let sector = SectorBound::new(gamma.as_matrix().clone(), theta).unwrap();
        let diff = nonlin::check_sector_differential(&psi, &sector, &sch).unwrap();
        assert_eq!(mono.verdict, diff.verdict, "{} with Γ = {gamma:?}", psi.name());
    }
}
