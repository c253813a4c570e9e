use approx::assert_relative_eq;
use logratio::analysis::{identity_defects, taylor_jet, Target, IDENTITY_TOL};
use logratio::eval::{evaluate, evaluate_real, CutPlanePoint, FunctionId};
use logratio::jet::factorial;
use logratio::opmon::{
    check_operator_monotone, hermitian_eig, matrix_apply, random_unitary, trial_rng, HermitianMatrix, Matrix,
    MatrixFn, DEFAULT_SPECTRUM, DEFAULT_TOL,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = CutPlanePoint> {
    (-3.0f64..3.0, 0.05f64..3.0).prop_map(|(lr, th)| {
        let r = lr.exp();
        CutPlanePoint::new(r * th.cos(), r * th.sin()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_symmetry(z in point()) {
        for id in FunctionId::ALL {
            let (Ok(a), Ok(b)) = (evaluate(id, z), evaluate(id, z.conj())) else { continue };
            let scale = a.norm().max(1e-300);
            prop_assert!((a.conj() - b).norm() <= 1e-13 * scale, "{id} at {z:?}: {a} vs {b}");
        }
    }

    #[test]
    fn reciprocal_identity_on_the_axis(lx in -12.0f64..12.0) {
        let d = identity_defects(lx.exp()).unwrap();
        prop_assert!(d.iter().all(|&v| v <= IDENTITY_TOL), "{d:?}");
    }

    #[test]
    fn reciprocal_identity_off_the_axis(lr in -2.0f64..2.0, th in -1.0f64..1.0) {
        let z = Complex64::from_polar(lr.exp(), th);
        let (Ok(p), Ok(q)) = (CutPlanePoint::from_complex(z), CutPlanePoint::from_complex(z.inv())) else {
            return Ok(());
        };
        if let (Ok(a), Ok(b)) = (evaluate(FunctionId::H, p), evaluate(FunctionId::H, q)) {
            prop_assert!((a * b - 1.0).norm() <= 1e-11, "{z}: {}", a * b);
        }
    }

    #[test]
    fn real_values_match_complex_values(lx in -6.0f64..6.0) {
        let x = lx.exp();
        for id in FunctionId::ALL {
            let r = evaluate_real(id, x).unwrap();
            let c = evaluate(id, CutPlanePoint::real(x).unwrap()).unwrap();
            prop_assert!(c.im == 0.0);
            prop_assert!((r - c.re).abs() <= 1e-14 * r.abs());
        }
    }

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = trial_rng(seed, 0);
        let u = random_unitary(n, &mut rng);
        let d: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7 + seed as f64 % 5.0).sin() * 3.0).collect();
        let a = HermitianMatrix::hermitize(&Matrix::from_spectrum(&u, &d)).unwrap();
        let e = hermitian_eig(&a).unwrap();
        let back = Matrix::from_spectrum(&e.vectors, &e.values);
        prop_assert!(back.sub(a.matrix()).frobenius() <= 1e-12 * a.matrix().frobenius().max(1.0));
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let mut sorted = d.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in e.values.iter().zip(&sorted) {
            prop_assert!((x - y).abs() <= 1e-12 * 3.0);
        }
    }

    #[test]
    fn matrix_function_is_unitarily_covariant(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = trial_rng(seed, 1);
        let u = random_unitary(n, &mut rng);
        let d: Vec<f64> = (0..n).map(|i| 0.1 + i as f64 * 0.9).collect();
        let a = HermitianMatrix::diagonal(&d).unwrap();
        let fa = matrix_apply(MatrixFn::Function(FunctionId::X2H), &a).unwrap();
        let conj = matrix_apply(MatrixFn::Function(FunctionId::X2H), &a.conjugate_by(&u).unwrap()).unwrap();
        let expected = fa.conjugate_by(&u).unwrap();
        prop_assert!(conj.sub(&expected).unwrap().matrix().frobenius() <= 1e-12 * fa.matrix().frobenius());
    }
}

#[test]
fn unitary_is_unitary() {
    let mut rng = trial_rng(7, 3);
    let u = random_unitary(6, &mut rng);
    let err = u.adjoint().matmul(&u).sub(&Matrix::identity(6)).frobenius();
    assert!(err < 1e-13, "{err}");
}

#[test]
fn jets_agree_with_finite_differences() {
    // five-point stencils for the first two derivatives
    for id in [FunctionId::H, FunctionId::G, FunctionId::InvXH, FunctionId::X2H] {
        for x in [0.03, 0.5, 0.999, 1.0, 1.2, 2.4142, 40.0] {
            let jet = taylor_jet(&Target::function(id), x, 4).unwrap();
            let f = |t: f64| evaluate_real(id, t).unwrap();
            let h = 1e-3 * x;
            let d1 = (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
            let d2 = (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h))
                / (12.0 * h * h);
            assert_relative_eq!(jet.coeffs[0], f(x), max_relative = 1e-13);
            assert_relative_eq!(jet.coeffs[1], d1, max_relative = 1e-8, epsilon = 1e-12);
            assert_relative_eq!(jet.coeffs[2] * factorial(2), d2, max_relative = 1e-5, epsilon = 1e-9);
        }
    }
}

#[test]
fn jet_of_h_is_smooth_across_one() {
    let target = Target::function(FunctionId::H);
    let at = taylor_jet(&target, 1.0, 8).unwrap();
    let near = taylor_jet(&target, 1.0 + 1e-9, 8).unwrap();
    for (a, b) in at.coeffs.iter().zip(&near.coeffs) {
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn scalar_case_reduces_to_monotonicity() {
    // in dimension 1 the Loewner order is the order of the reals
    for id in [FunctionId::X2H, FunctionId::InvXH] {
        let r = check_operator_monotone(MatrixFn::Function(id), 1, 100, 5, DEFAULT_TOL, DEFAULT_SPECTRUM).unwrap();
        assert!(r.report.pass, "{id}");
    }
    let r = check_operator_monotone(MatrixFn::Function(FunctionId::H), 1, 100, 5, DEFAULT_TOL, DEFAULT_SPECTRUM).unwrap();
    assert!(!r.report.pass, "H is decreasing");
}

#[test]
fn opmon_trials_are_reproducible() {
    let f = MatrixFn::Function(FunctionId::InvXH);
    let a = check_operator_monotone(f, 4, 30, 99, DEFAULT_TOL, DEFAULT_SPECTRUM).unwrap();
    let b = check_operator_monotone(f, 4, 30, 99, DEFAULT_TOL, DEFAULT_SPECTRUM).unwrap();
    assert_eq!(a.trials, b.trials);
}
