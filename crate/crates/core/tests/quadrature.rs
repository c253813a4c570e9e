use approx::assert_relative_eq;
use logratio::eval::CutPlanePoint;
use logratio::quadrature::{laplace_transform, laplace_transform_complex, stieltjes_transform, FnDensity, Tol};
use num_complex::Complex64;

#[test]
fn stieltjes_of_inverse_square() {
    // int 1/((1+t)^2 (t+z)) dt = 1/(z-1) - ln z/(z-1)^2
    let d = FnDensity::new(|t: f64| (1.0 + t).powi(-2));
    for (re, im) in [(2.0, 0.0), (0.3, 0.0), (-1.5, 0.7), (4.0, -3.0), (1e-3, 1e-3)] {
        let z = Complex64::new(re, im);
        let exact = 1.0 / (z - 1.0) - z.ln() / ((z - 1.0) * (z - 1.0));
        let got = stieltjes_transform(&d, CutPlanePoint::new(re, im).unwrap(), Tol::rel(1e-12)).unwrap();
        assert!(got.converged());
        assert!((got.value - exact).norm() <= 1e-10 * exact.norm(), "{z}: {} vs {exact}", got.value);
    }
}

#[test]
fn laplace_of_exponential_and_power() {
    let e = FnDensity::new(|t: f64| (-t).exp());
    let p = FnDensity::new(|t: f64| t.powf(-0.5));
    for s in [0.01, 0.5, 1.0, 7.0, 300.0] {
        let a = laplace_transform(&e, s, Tol::rel(1e-12)).unwrap();
        assert_relative_eq!(a.value, 1.0 / (1.0 + s), max_relative = 1e-10);
        let b = laplace_transform(&p, s, Tol::rel(1e-12)).unwrap();
        assert_relative_eq!(b.value, (std::f64::consts::PI / s).sqrt(), max_relative = 1e-9);
    }
}

#[test]
fn laplace_in_the_right_half_plane() {
    let e = FnDensity::new(|t: f64| (-t).exp());
    for s in [Complex64::new(0.5, 2.0), Complex64::new(3.0, -10.0)] {
        let got = laplace_transform_complex(&e, s, Tol::rel(1e-12)).unwrap();
        let exact = 1.0 / (1.0 + s);
        assert!((got.value - exact).norm() <= 1e-10 * exact.norm(), "{s}");
    }
}

#[test]
fn laplace_rejects_the_left_half_plane() {
    let e = FnDensity::new(|t: f64| (-t).exp());
    assert!(laplace_transform(&e, 0.0, Tol::rel(1e-8)).is_err());
    assert!(laplace_transform_complex(&e, Complex64::new(-1.0, 1.0), Tol::rel(1e-8)).is_err());
}
