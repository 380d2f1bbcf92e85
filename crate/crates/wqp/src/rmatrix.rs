//! Construction of the elliptic vertex-type R-matrix and its gauged,
//! normalized variants.
//!
//! The raw matrix is assembled from a lattice-weighted sum of unitary
//! one-site operators, an elliptic scalar normalization, and a theta-ratio
//! prefactor.  A diagonal gauge rotation produces the variant whose
//! symmetry properties are verified in [`crate::verify`], and a scalar
//! normalization produces the "hatted" matrices entering traces and
//! exchange functions.  Principal branches are used for every fractional
//! power.

use num_complex::Complex64;

use crate::error::{Result, WqpError};
use crate::params::{AlgebraParams, GaugeMatrices};
use crate::tensor::ComplexTensor4;
use crate::theta::{
    multi_pochhammer, theta_char, theta_std, ThetaChar, TruncationPolicy, I, ONE, PI,
};

/// Relative floor below which a theta denominator is declared degenerate.
pub const THETA_DEGENERACY_FLOOR: f64 = 1e-13;

/// Lattice weight
/// `W_(a1, a2) = theta[1/2 + a1/n, 1/2 + a2/n](xi + zeta/n, tau)
///            / (n theta[1/2 + a1/n, 1/2 + a2/n](zeta/n, tau))`.
pub fn weight_w(
    alpha: (i64, i64),
    xi: Complex64,
    zeta: Complex64,
    tau: Complex64,
    n: u32,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let gamma = ThetaChar::half_shifted(alpha.0, alpha.1, n);
    let nf = f64::from(n);
    let num = theta_char(gamma, xi + zeta / nf, tau, policy)?;
    let den = theta_char(gamma, zeta / nf, tau, policy)?;
    let floor = THETA_DEGENERACY_FLOOR * num.norm().max(1.0);
    if den.norm() < floor {
        return Err(WqpError::ThetaZeroDenominator {
            modulus: den.norm(),
        });
    }
    Ok(num / (den * nf))
}

/// Weighted sum `S = sum_alpha W_alpha I_alpha ⊗ I_alpha^{-1}` over the
/// finite Heisenberg pair group, with `I_(a1, a2) = g^{a2} h^{a1}`.
///
/// Elements conserve the total site label mod `n`; the nonzero entries are
/// `⟨o1 o2| S |i1 i2⟩ = sum_s W_(i1-o1, s) omega^{(o1-i2) s}` whenever
/// `o1 + o2 = i1 + i2 (mod n)`.
pub fn build_s(
    xi: Complex64,
    zeta: Complex64,
    tau: Complex64,
    n: u32,
    policy: &TruncationPolicy,
) -> Result<ComplexTensor4> {
    let nu = n as usize;
    let mut weights = vec![Complex64::new(0.0, 0.0); nu * nu];
    for a1 in 0..nu {
        for a2 in 0..nu {
            weights[a1 * nu + a2] = weight_w((a1 as i64, a2 as i64), xi, zeta, tau, n, policy)?;
        }
    }
    let omega_phase = |e: i64| -> Complex64 {
        Complex64::new(0.0, 2.0 * PI * e as f64 / f64::from(n)).exp()
    };
    let mut s = ComplexTensor4::zeros(nu);
    for o1 in 0..nu {
        for o2 in 0..nu {
            for i1 in 0..nu {
                for i2 in 0..nu {
                    if (o1 + o2) % nu != (i1 + i2) % nu {
                        continue;
                    }
                    let a1 = (i1 + nu - o1) % nu;
                    let e = o1 as i64 - i2 as i64;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a2 in 0..nu {
                        acc += weights[a1 * nu + a2] * omega_phase(e * a2 as i64);
                    }
                    s.set(o1, o2, i1, i2, acc);
                }
            }
        }
    }
    Ok(s)
}

/// The same weighted sum assembled literally as operators: each group
/// label contributes `W_alpha` times the Kronecker product of the
/// one-site unitary `I_(a1, a2) = g^{a2} h^{a1}` with its inverse.
/// Mathematically identical to [`build_s`]; kept as an independent route
/// for cross-validation.
pub fn build_s_operator_sum(
    xi: Complex64,
    zeta: Complex64,
    tau: Complex64,
    n: u32,
    policy: &TruncationPolicy,
) -> Result<ComplexTensor4> {
    let gm = GaugeMatrices::new(n);
    let nu = n as usize;
    let matpow = |m: &nalgebra::DMatrix<Complex64>, e: usize| {
        let mut acc = nalgebra::DMatrix::<Complex64>::identity(nu, nu);
        for _ in 0..e {
            acc = &acc * m;
        }
        acc
    };
    let mut total = ComplexTensor4::zeros(nu);
    for a1 in 0..nu {
        for a2 in 0..nu {
            let w = weight_w((a1 as i64, a2 as i64), xi, zeta, tau, n, policy)?;
            let i_op = matpow(&gm.g, a2) * matpow(&gm.hshift, a1);
            // I^{-1} = h^{-a1} g^{-a2}, with negative powers folded mod n.
            let i_inv = matpow(&gm.hshift, (nu - a1) % nu) * matpow(&gm.g, (nu - a2) % nu);
            total = total.add(&ComplexTensor4::from_kron(&i_op, &i_inv).scale(w));
        }
    }
    Ok(total)
}

/// Closed product form of the independent weighted-sum elements: with
/// input pair `(0, a+b)` and output pair `(a, b)`,
///
/// `S^(ab) = theta[(b-a)/n + 1/2, 1/2](xi + zeta, n tau)
///           / theta[-a/n + 1/2, 1/2](zeta, n tau)
///         * prod_{k != b} theta[k/n + 1/2, 1/2](xi, n tau)
///           / prod_{k >= 1} theta[k/n + 1/2, 1/2](0, n tau)`.
///
/// Every other element follows from label conservation and simultaneous
/// shift invariance.
pub fn s_element_closed(
    a: u32,
    b: u32,
    xi: Complex64,
    zeta: Complex64,
    tau: Complex64,
    n: u32,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if a >= n || b >= n {
        return Err(WqpError::IndexOutOfRange {
            i: a as usize,
            j: b as usize,
            max: (n - 1) as usize,
        });
    }
    let ntau = f64::from(n) * tau;
    let chi = |k: i64| ThetaChar::half_shifted(k, 0, n);
    let num1 = theta_char(chi(i64::from(b) - i64::from(a)), xi + zeta, ntau, policy)?;
    let den1 = theta_char(chi(-i64::from(a)), zeta, ntau, policy)?;
    if den1.norm() < THETA_DEGENERACY_FLOOR * num1.norm().max(1.0) {
        return Err(WqpError::ThetaZeroDenominator {
            modulus: den1.norm(),
        });
    }
    let mut acc = num1 / den1;
    for k in 0..n {
        if k == b {
            continue;
        }
        acc *= theta_char(chi(i64::from(k)), xi, ntau, policy)?;
    }
    for k in 1..n {
        let d = theta_char(chi(i64::from(k)), Complex64::new(0.0, 0.0), ntau, policy)?;
        if d.norm() < THETA_DEGENERACY_FLOOR * acc.norm().max(1.0) {
            return Err(WqpError::ThetaZeroDenominator { modulus: d.norm() });
        }
        acc /= d;
    }
    Ok(acc)
}

/// Scalar elliptic normalization `1/kappa(z^2)` expressed through
/// double-base infinite products in the bases `(p, q^{2n})`:
///
/// `1/kappa(v) = (q^{2n}/v)(q^2 v)(p/v)(p q^{2n-2} v)
///             / [(q^{2n} v)(q^2/v)(p v)(p q^{2n-2}/v)]`.
pub fn kappa_inv(z2: Complex64, params: &AlgebraParams, policy: &TruncationPolicy) -> Result<Complex64> {
    let p = params.p_nome()?.value();
    let q = params.q;
    let q2n = params.q2n_nome()?.value();
    let bases = [p, q2n];
    if z2.norm() == 0.0 || !z2.is_finite() {
        return Err(WqpError::InvalidParameter(format!(
            "kappa argument must be finite and nonzero, got {z2}"
        )));
    }
    let v = z2;
    let vi = z2.inv();
    let q2 = q * q;
    let qpow = q2n / q2; // q^{2n-2}
    let num = [q2n * vi, q2 * v, p * vi, p * qpow * v];
    let den = [q2n * v, q2 * vi, p * v, p * qpow * vi];
    let mut acc = ONE;
    for y in num {
        acc *= multi_pochhammer(y, &bases, policy)?;
    }
    for y in den {
        let d = multi_pochhammer(y, &bases, policy)?;
        if d.norm() < THETA_DEGENERACY_FLOOR {
            return Err(WqpError::PoleHit {
                context: format!("normalization denominator vanished at argument {y}"),
            });
        }
        acc /= d;
    }
    Ok(acc)
}

/// The raw (ungauged) R-matrix at spectral point `z`:
///
/// `Rt(z) = z^{2/n - 2} (1/kappa(z^2))
///          [theta[1/2,1/2](zeta, tau) / theta[1/2,1/2](xi + zeta, tau)] S(xi, zeta, tau)`
///
/// with `z = e^{i pi xi}`, `q = e^{i pi zeta}`, `p = e^{2 i pi tau}`
/// resolved through principal logarithms.
pub fn build_rtilde(
    z: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<ComplexTensor4> {
    if z.norm() == 0.0 || !z.is_finite() {
        return Err(WqpError::InvalidParameter(format!(
            "spectral point must be finite and nonzero, got {z}"
        )));
    }
    params.p_nome()?;
    let (zeta, tau) = params.additive();
    let xi = z.ln() / (I * PI);
    let n = params.n;
    let half = ThetaChar::half_half();
    let num = theta_char(half, zeta, tau, policy)?;
    let den = theta_char(half, xi + zeta, tau, policy)?;
    if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::ThetaZeroDenominator {
            modulus: den.norm(),
        });
    }
    let power = ((2.0 / f64::from(n) - 2.0) * z.ln()).exp();
    let kinv = kappa_inv(z * z, params, policy)?;
    let s = build_s(xi, zeta, tau, n, policy)?;
    Ok(s.scale(power * kinv * num / den))
}

/// Diagonal gauge rotation `R = (g^{1/2} ⊗ g^{1/2}) Rt (g^{-1/2} ⊗ g^{-1/2})`.
pub fn gauge_transform(rt: &ComplexTensor4, gm: &GaugeMatrices) -> ComplexTensor4 {
    let left = ComplexTensor4::from_kron(&gm.g_half, &gm.g_half);
    let right = ComplexTensor4::from_kron(&gm.g_half_inv(), &gm.g_half_inv());
    left.matmul(rt).matmul(&right)
}

/// The gauged R-matrix at spectral point `z` (convenience wrapper).
pub fn build_r(
    z: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<ComplexTensor4> {
    let rt = build_rtilde(z, params, policy)?;
    Ok(gauge_transform(&rt, &GaugeMatrices::new(params.n)))
}

/// Scalar normalization factor
/// `tau_n(z) = z^{2/n - 2} Theta_{q^{2n}}(q z^2) / Theta_{q^{2n}}(q z^{-2})`.
pub fn tau_n(z: Complex64, params: &AlgebraParams, policy: &TruncationPolicy) -> Result<Complex64> {
    if z.norm() == 0.0 || !z.is_finite() {
        return Err(WqpError::InvalidParameter(format!(
            "spectral point must be finite and nonzero, got {z}"
        )));
    }
    let q2n = params.q2n_nome()?;
    let q = params.q;
    let num = theta_std(q * z * z, q2n, policy)?;
    let den = theta_std(q / (z * z), q2n, policy)?;
    if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::ThetaZeroDenominator {
            modulus: den.norm(),
        });
    }
    let power = ((2.0 / f64::from(params.n) - 2.0) * z.ln()).exp();
    Ok(power * num / den)
}

/// Normalized ("hatted") R-matrix `Rhat(z) = tau_n(q^{1/2} z^{-1}) R(z)`.
pub fn build_rhat(
    z: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<ComplexTensor4> {
    let scalar = tau_n(params.q.sqrt() / z, params, policy)?;
    Ok(build_r(z, params, policy)?.scale(scalar))
}

/// Normalized R-matrix built from the shifted nome `p* = p q^{-2c}`.
pub fn build_rhat_star(
    z: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<ComplexTensor4> {
    let star = params.with_star_nome()?;
    build_rhat(z, &star, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_params() -> AlgebraParams {
        AlgebraParams::new(
            3,
            Complex64::new(0.4, 0.0),
            Complex64::new(0.09, 0.0),
            Complex64::new(-3.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn s_matrix_conserves_total_label() {
        let params = test_params();
        let (zeta, tau) = params.additive();
        let z = Complex64::new(1.1, 0.2);
        let xi = z.ln() / (I * PI);
        let policy = TruncationPolicy::default();
        let s = build_s(xi, zeta, tau, params.n, &policy).unwrap();
        let n = s.dim();
        for o1 in 0..n {
            for o2 in 0..n {
                for i1 in 0..n {
                    for i2 in 0..n {
                        if (o1 + o2) % n != (i1 + i2) % n {
                            assert_eq!(s.get(o1, o2, i1, i2).norm(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn shift_invariance_of_s_elements() {
        // Simultaneous unit shifts of all four labels leave elements fixed.
        let params = test_params();
        let (zeta, tau) = params.additive();
        let xi = Complex64::new(0.1, -0.05);
        let policy = TruncationPolicy::default();
        let s = build_s(xi, zeta, tau, params.n, &policy).unwrap();
        let n = s.dim();
        for o1 in 0..n {
            for o2 in 0..n {
                for i1 in 0..n {
                    for i2 in 0..n {
                        let a = s.get(o1, o2, i1, i2);
                        let b = s.get(
                            (o1 + 1) % n,
                            (o2 + 1) % n,
                            (i1 + 1) % n,
                            (i2 + 1) % n,
                        );
                        assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn operator_sum_route_matches_indexed_assembly() {
        let policy = TruncationPolicy::default();
        for n in [2u32, 3] {
            let params = AlgebraParams::new(
                n,
                Complex64::new(0.4, 0.0),
                Complex64::new(0.09, 0.0),
                Complex64::new(-(f64::from(n)), 0.0),
            )
            .unwrap();
            let (zeta, tau) = params.additive();
            let xi = Complex64::new(0.1, -0.05);
            let fast = build_s(xi, zeta, tau, n, &policy).unwrap();
            let literal = build_s_operator_sum(xi, zeta, tau, n, &policy).unwrap();
            let scale = fast.max_abs().max(1.0);
            assert!(
                fast.sub(&literal).max_abs() <= 1e-10 * scale,
                "n = {n}: operator-sum route deviates"
            );
        }
    }

    #[test]
    fn closed_product_form_matches_weighted_sum() {
        let policy = TruncationPolicy::default();
        for n in [2u32, 3, 4] {
            let params = AlgebraParams::new(
                n,
                Complex64::new(0.4, 0.0),
                Complex64::new(0.09, 0.0),
                Complex64::new(-(f64::from(n)), 0.0),
            )
            .unwrap();
            let (zeta, tau) = params.additive();
            let xi = Complex64::new(0.13, -0.04);
            let s = build_s(xi, zeta, tau, n, &policy).unwrap();
            for a in 0..n {
                for b in 0..n {
                    let closed = s_element_closed(a, b, xi, zeta, tau, n, &policy).unwrap();
                    let direct =
                        s.get(a as usize, b as usize, 0, ((a + b) % n) as usize);
                    assert!(
                        (closed - direct).norm() <= 1e-10 * direct.norm().max(1.0),
                        "n = {n}, a = {a}, b = {b}: closed {closed} vs direct {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn tau_n_inversion_antisymmetry() {
        // tau_n(1/z) tau_n(z) = 1.
        let params = test_params();
        let policy = TruncationPolicy::default();
        let z = Complex64::new(1.07, 0.13);
        let a = tau_n(z, &params, &policy).unwrap();
        let b = tau_n(z.inv(), &params, &policy).unwrap();
        assert!((a * b - ONE).norm() < 1e-12);
    }

    #[test]
    fn tau_n_periodicity_in_qn() {
        // tau_n(q^n z) = tau_n(z).
        let params = test_params();
        let policy = TruncationPolicy::default();
        let z = Complex64::new(0.93, -0.21);
        let shift = params.q.powu(params.n);
        let a = tau_n(z, &params, &policy).unwrap();
        let b = tau_n(shift * z, &params, &policy).unwrap();
        assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
    }
}
