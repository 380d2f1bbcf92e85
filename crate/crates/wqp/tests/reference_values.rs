//! Frozen reference values computed by independent high-precision routes
//! (direct lattice sums, direct infinite products, 50-digit arithmetic),
//! printed to 17 significant digits and pinned here.

use num_complex::Complex64;
use wqp::params::AlgebraParams;
use wqp::rmatrix::{kappa_inv, tau_n, weight_w};
use wqp::theta::{multi_pochhammer, theta_char, theta_std, Nome, ThetaChar, TruncationPolicy};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn policy() -> TruncationPolicy {
    TruncationPolicy::default()
}

fn assert_close(got: Complex64, want: Complex64, rel: f64) {
    let scale = want.norm().max(1.0);
    assert!(
        (got - want).norm() <= rel * scale,
        "got {got}, want {want} (diff {:.3e}, scale {scale:.3e})",
        (got - want).norm()
    );
}

#[test]
fn pochhammer_single_base_reference() {
    let got = multi_pochhammer(c(0.5, 0.0), &[c(0.3, 0.0)], &policy()).unwrap();
    assert_close(got, Complex64::new(3.98082204301877685e-01, 0.0), 1e-14);
}

#[test]
fn theta_std_reference() {
    let got = theta_std(c(0.4, 0.1), Nome::new(c(0.25, 0.0)).unwrap(), &policy()).unwrap();
    assert_close(
        got,
        Complex64::new(1.26989081177386581e-01, 2.53859320696428296e-02),
        1e-14,
    );
}

#[test]
fn theta_char_reference() {
    let gamma = ThetaChar::half_shifted(1, 2, 3);
    let got = theta_char(gamma, c(0.31, 0.17), c(0.05, 0.35), &policy()).unwrap();
    assert_close(
        got,
        Complex64::new(-2.05455767941510103e-01, -2.77793956583436474e-01),
        1e-14,
    );
}

#[test]
fn lattice_weight_reference() {
    let params = AlgebraParams::new(3, c(0.4, 0.0), c(0.09, 0.0), c(0.0, 0.0)).unwrap();
    let (zeta, tau) = params.additive();
    let xi = c(1.1, 0.2).ln() / (Complex64::i() * std::f64::consts::PI);
    let got = weight_w((1, 2), xi, zeta, tau, 3, &policy()).unwrap();
    assert_close(
        got,
        Complex64::new(2.66677391793228247e-01, 9.75463413568315556e-03),
        1e-13,
    );
}

#[test]
fn normalization_factor_reference() {
    let params = AlgebraParams::new(2, c(0.4, 0.0), c(0.09, 0.0), c(0.0, 0.0)).unwrap();
    let z = c(1.3, 0.0);
    let got = kappa_inv(z * z, &params, &policy()).unwrap();
    assert_close(got, Complex64::new(9.03851545395531586e-01, 0.0), 1e-13);
}

#[test]
fn scalar_period_factor_reference() {
    let params = AlgebraParams::new(3, c(0.5, 0.0), c(0.09, 0.0), c(0.0, 0.0)).unwrap();
    let got = tau_n(c(1.2, 0.3), &params, &policy()).unwrap();
    assert_close(
        got,
        Complex64::new(1.11793332266050011e-01, -4.98893518994983298e-01),
        1e-13,
    );
}
