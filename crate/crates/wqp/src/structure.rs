//! Scalar structure functions of the exchange and Poisson algebras.
//!
//! This module houses the scalar data extracted from the operator
//! exchange relations: the trace normalization `T(x)`, the matrix
//! `M(x)` whose criticality is verified at `c = -N`, the Poisson
//! structure function `f(x)` at the critical level, the quasi-periodicity
//! factor `F(M, x)`, the quadratic exchange function `Y(x)` on the
//! constraint surface, its Abelian-limit derivatives `f_h(x)`, and the
//! factorized quantum exchange function together with its factored
//! product representation.

use num_complex::Complex64;

use crate::error::{Result, WqpError};
use crate::params::{minus_sqrt_p, AlgebraParams, SurfaceSigma};
use crate::rmatrix::{build_r, tau_n, THETA_DEGENERACY_FLOOR};
use crate::tensor::ComplexTensor4;
use crate::theta::{theta_std, Nome, TruncationPolicy, ONE};

/// Relative margin used to declare a simple-fraction term on a pole.
const POLE_EPS: f64 = 1e-12;

/// `G(u) = u/(1-u)`, with a pole guard.
pub(crate) fn g_term(u: Complex64) -> Result<Complex64> {
    let d = ONE - u;
    if d.norm() < POLE_EPS * u.norm().max(1.0) {
        return Err(WqpError::PoleHit {
            context: format!("simple-fraction term at u = {u} has vanishing denominator 1 - u"),
        });
    }
    Ok(u / d)
}

/// Trace normalization ratio
/// `T(x) = tau_n(q^{1/2} x^{-1}) tau_n(q^{1/2-c} x)
///       / (tau_n(q^{1/2} x) tau_n(q^{1/2-c} x^{-1}))`.
///
/// Identically 1 at the critical value `c = -n`.
pub fn big_t(x: Complex64, params: &AlgebraParams, policy: &TruncationPolicy) -> Result<Complex64> {
    let qh = params.q.sqrt();
    let qhc = ((Complex64::new(0.5, 0.0) - params.c) * params.q.ln()).exp();
    let num = tau_n(qh / x, params, policy)? * tau_n(qhc * x, params, policy)?;
    let den = tau_n(qh * x, params, policy)? * tau_n(qhc / x, params, policy)?;
    if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::PoleHit {
            context: format!("trace normalization denominator vanished at x = {x}"),
        });
    }
    Ok(num / den)
}

/// The matrix
/// `M(x) = ((R21(x) R21(q^{c+n} x)^{-1} R12(x^{-1})^{-1})^{t2}
///          R12(q^c x^{-1})^{t2})^{t2}`.
///
/// Reduces to `1 ⊗ 1` at the critical value `c = -n`.
pub fn big_m_matrix(
    x: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<ComplexTensor4> {
    let qc = (params.c * params.q.ln()).exp();
    let qcn = ((params.c + f64::from(params.n)) * params.q.ln()).exp();
    let r21 = |y: Complex64| -> Result<ComplexTensor4> { Ok(build_r(y, params, policy)?.swap_sites()) };
    let a = r21(x)?;
    let b_inv = r21(qcn * x)?.inverse_with_condition()?.0;
    let c_inv = build_r(x.inv(), params, policy)?.inverse_with_condition()?.0;
    let d = build_r(qc / x, params, policy)?.transpose_second();
    let inner = a.matmul(&b_inv).matmul(&c_inv).transpose_second();
    Ok(inner.matmul(&d).transpose_second())
}

/// Logarithmic derivative of the theta product: `u d/du ln Theta_Q(u)`
/// summed over the two one-sided families of product factors.
fn theta_log_deriv(u: Complex64, base: Nome, policy: &TruncationPolicy) -> Result<Complex64> {
    let bq = base.value();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut fwd = u; // u Q^k
    let mut bwd = bq / u; // Q^{k+1}/u
    for _ in 0..policy.max_terms {
        if fwd.norm() < policy.eps_trunc && bwd.norm() < policy.eps_trunc {
            return Ok(acc);
        }
        acc += g_term(bwd)? - g_term(fwd)?;
        fwd *= bq;
        bwd *= bq;
    }
    Err(WqpError::TruncationBudgetExceeded {
        terms: policy.max_terms,
        max_terms: policy.max_terms,
    })
}

/// `z d/dz ln tau_n(z)`, assembled analytically from the factor-wise
/// logarithmic derivatives of the two theta products.
pub fn tau_log_deriv(
    z: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let q2n = params.q2n_nome()?;
    let q = params.q;
    let pref = Complex64::new(2.0 / f64::from(params.n) - 2.0, 0.0);
    Ok(pref
        + 2.0 * theta_log_deriv(q * z * z, q2n, policy)?
        + 2.0 * theta_log_deriv(q / (z * z), q2n, policy)?)
}

/// Analytic form of `d ln T / dc` at the critical level:
/// `-ln q (x d/dx ln tau_n(q^{1/2} x) - x^{-1} d/dx^{-1} ln tau_n(q^{1/2} x^{-1}))`.
///
/// Coincides with [`f_classical`]; the two are independent evaluation
/// routes for the same structure function.
pub fn dln_t_dc_critical(
    x: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let qh = params.q.sqrt();
    let fwd = tau_log_deriv(qh * x, params, policy)?;
    let bwd = tau_log_deriv(qh / x, params, policy)?;
    Ok(-params.q.ln() * (fwd - bwd))
}

/// One symmetric three-fraction group
/// `2 G(v q^s) - G(v q^{s+2}) - G(v q^{s-2})` at `v q^s = base`.
fn triple(base: Complex64, q2: Complex64) -> Result<Complex64> {
    Ok(2.0 * g_term(base)? - g_term(base * q2)? - g_term(base / q2)?)
}

/// Half of the critical structure-function series (the `x` family;
/// the caller subtracts the reciprocal family):
/// `sum_{l>=0} (2G(v q^{2nl}) - G(v q^{2nl+2}) - G(v q^{2nl-2}))
///  - G(v) + (1/2) G(v q^2) + (1/2) G(v q^{-2})`.
fn classical_half(v: Complex64, params: &AlgebraParams, policy: &TruncationPolicy) -> Result<Complex64> {
    let q2 = params.q * params.q;
    let step = q2.powu(params.n); // q^{2n}
    let mut acc = -0.5 * triple(v, q2)?;
    let mut base = v;
    for _ in 0..policy.max_terms {
        if base.norm() < policy.eps_trunc {
            return Ok(acc);
        }
        acc += triple(base, q2)?;
        base *= step;
    }
    Err(WqpError::TruncationBudgetExceeded {
        terms: policy.max_terms,
        max_terms: policy.max_terms,
    })
}

/// The critical-level Poisson structure function `f(x)`: an explicit
/// difference of geometric-fraction series between the `x` and `x^{-1}`
/// families, scaled by `-2 ln q`.
pub fn f_classical(
    x: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if x.norm() == 0.0 || !x.is_finite() {
        return Err(WqpError::InvalidParameter(format!(
            "argument must be finite and nonzero, got {x}"
        )));
    }
    let fwd = classical_half(x * x, params, policy)?;
    let bwd = classical_half((x * x).inv(), params, policy)?;
    Ok(-2.0 * params.q.ln() * (fwd - bwd))
}

/// Single-step quasi-periodicity factor
/// `F(x) = q^{2-2/n} Theta(x^2) Theta(x^{-2}) / (Theta(q^2 x^2) Theta(q^2 x^{-2}))`
/// with all thetas in base `q^{2n}`; equals
/// `tau_n(q^{1/2} x)^{-1} tau_n(q^{1/2} x^{-1})^{-1}`.
pub fn big_f_single(
    x: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let q2n = params.q2n_nome()?;
    let q2 = params.q * params.q;
    let x2 = x * x;
    let num = theta_std(x2, q2n, policy)? * theta_std(x2.inv(), q2n, policy)?;
    let den = theta_std(q2 * x2, q2n, policy)? * theta_std(q2 / x2, q2n, policy)?;
    if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::PoleHit {
            context: format!("quasi-periodicity factor denominator vanished at x = {x}"),
        });
    }
    let pref = ((2.0 - 2.0 / f64::from(params.n)) * params.q.ln()).exp();
    Ok(pref * num / den)
}

/// Closed finite-product form of the iterated quasi-periodicity factor
/// `F(M, x)` for either sign of `M`.
pub fn big_f_m(
    m_int: i64,
    x: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if m_int == 0 {
        return Err(WqpError::InvalidParameter(
            "winding integer must be nonzero".into(),
        ));
    }
    let n = i64::from(params.n);
    let q2n = params.q2n_nome()?;
    let q2 = params.q * params.q;
    let p = params.p;
    let x2 = x * x;
    let mut num = ONE;
    let mut den = ONE;
    if m_int > 0 {
        for k in 0..(n * m_int) {
            let pk = p.powi(k as i32);
            num *= theta_std(x2.inv() / pk, q2n, policy)? * theta_std(x2 * pk, q2n, policy)?;
            den *= theta_std(x2.inv() * q2 / pk, q2n, policy)?
                * theta_std(x2 * q2 * pk, q2n, policy)?;
        }
    } else {
        for k in 1..=(n * m_int.abs()) {
            let pk = p.powi(k as i32);
            num *= theta_std(x2.inv() * q2 * pk, q2n, policy)?
                * theta_std(x2 * q2 / pk, q2n, policy)?;
            den *= theta_std(x2.inv() * pk, q2n, policy)? * theta_std(x2 / pk, q2n, policy)?;
        }
    }
    if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::PoleHit {
            context: format!("iterated factor denominator vanished at x = {x}"),
        });
    }
    let pref = ((2 * m_int * (n - 1)) as f64 * params.q.ln()).exp();
    Ok(pref * num / den)
}

/// Iterated-product route for `F(M, x)`: a product of single-step
/// factors at arguments scaled by powers of `-p^{1/2}`.
pub fn big_f_m_iterated(
    m_int: i64,
    x: Complex64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if m_int == 0 {
        return Err(WqpError::InvalidParameter(
            "winding integer must be nonzero".into(),
        ));
    }
    let n = i64::from(params.n);
    let msq = minus_sqrt_p(params.p);
    let mut acc = ONE;
    if m_int > 0 {
        for k in 0..(n * m_int) {
            acc *= big_f_single(msq.powi(k as i32) * x, params, policy)?;
        }
    } else {
        for k in 1..=(n * m_int.abs()) {
            acc /= big_f_single(msq.powi(-(k as i32)) * x, params, policy)?;
        }
    }
    Ok(acc)
}

/// The quadratic exchange function `Y(x)` on the constraint surface:
/// a finite product of theta ratios in base `q^{2n}` over `p`-power
/// shifted arguments.
pub fn big_y(
    m_int: i64,
    x: Complex64,
    surface: &SurfaceSigma,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if m_int != surface.m_int {
        return Err(WqpError::InvalidParameter(format!(
            "winding integer {m_int} disagrees with the surface winding {}",
            surface.m_int
        )));
    }
    let residual = surface.residual();
    if residual > 1e-9 {
        return Err(WqpError::SurfaceViolated { residual });
    }
    let params = &surface.params;
    let n = i64::from(params.n);
    let q2n = params.q2n_nome()?;
    let q2 = params.q * params.q;
    let p = params.p;
    let x2 = x * x;
    let k_max = if m_int > 0 { n * m_int } else { n * m_int.abs() - 1 };
    let mut num = ONE;
    let mut den = ONE;
    for k in 1..=k_max {
        let pk = p.powi(k as i32);
        let a = theta_std(x2 / pk, q2n, policy)?;
        let b = theta_std(x2 * pk, q2n, policy)?;
        num *= a * a * theta_std(x2 * q2 * pk, q2n, policy)? * theta_std(x2 / q2 * pk, q2n, policy)?;
        den *= b * b * theta_std(x2 * q2 / pk, q2n, policy)? * theta_std(x2 / q2 / pk, q2n, policy)?;
    }
    if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::PoleHit {
            context: format!("exchange function denominator vanished at x = {x}"),
        });
    }
    Ok(num / den)
}

/// Ratio route for the exchange function:
/// `Y(x) = F(M, q^c x) / F(M, -p^{1/2} x)`.
pub fn big_y_ratio_route(
    m_int: i64,
    x: Complex64,
    surface: &SurfaceSigma,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let params = &surface.params;
    let qc = (params.c * params.q.ln()).exp();
    let num = big_f_m(m_int, qc * x, params, policy)?;
    let den = big_f_m(m_int, minus_sqrt_p(params.p) * x, params, policy)?;
    if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::PoleHit {
            context: format!("ratio-route denominator vanished at x = {x}"),
        });
    }
    Ok(num / den)
}

/// Floor of `a / 2` as the integer-part convention for half-integers.
fn floor_half(a: i64) -> i64 {
    a.div_euclid(2)
}

/// The two integer-part weights of the odd-exponent Abelian limit:
/// `e1 = E(v/2)(E(v/2)+1)` and `e2 = E((v+1)/2)^2` for `v = n m`, with
/// `E` the floor of the half-integer argument.
pub fn e_pair(v: i64) -> (i64, i64) {
    let e1 = floor_half(v) * (floor_half(v) + 1);
    let e2 = {
        let e = floor_half(v + 1);
        e * e
    };
    (e1, e2)
}

/// The Abelian-limit structure function `f_h(x)` for nonzero integer `h`,
/// with parity-dependent form: the odd case carries two fraction families
/// (one shifted by `q^n`) weighted by integer-part coefficients; the even
/// case is proportional to the critical structure function.
pub fn f_h(
    x: Complex64,
    h: i64,
    m_int: i64,
    params: &AlgebraParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if h == 0 {
        return Err(WqpError::InvalidParameter(
            "limit exponent h must be nonzero".into(),
        ));
    }
    if m_int == 0 {
        return Err(WqpError::InvalidParameter(
            "winding integer must be nonzero".into(),
        ));
    }
    if x.norm() == 0.0 || !x.is_finite() {
        return Err(WqpError::InvalidParameter(format!(
            "argument must be finite and nonzero, got {x}"
        )));
    }
    let n = i64::from(params.n);
    let nm = n * m_int;
    let lnq = params.q.ln();
    if h.rem_euclid(2) == 0 {
        let pref = ((n * n * m_int * (nm + 1) * h) as f64) * lnq;
        let fwd = classical_half(x * x, params, policy)?;
        let bwd = classical_half((x * x).inv(), params, policy)?;
        return Ok(pref * (fwd - bwd));
    }
    let (e1i, e2i) = e_pair(nm);
    let (e1, e2) = (e1i as f64, e2i as f64);
    let q2 = params.q * params.q;
    let step = q2.powu(params.n); // q^{2n}
    let qn = params.q.powu(params.n);
    let half = |v: Complex64| -> Result<Complex64> {
        let mut acc = -0.5 * e1 * triple(v, q2)?;
        let mut base = v;
        for _ in 0..policy.max_terms {
            if base.norm() < policy.eps_trunc && (base * qn).norm() < policy.eps_trunc {
                return Ok(acc);
            }
            acc += e1 * triple(base, q2)? + e2 * triple(base * qn, q2)?;
            base *= step;
        }
        Err(WqpError::TruncationBudgetExceeded {
            terms: policy.max_terms,
            max_terms: policy.max_terms,
        })
    };
    let pref = ((2 * n * h) as f64) * lnq;
    Ok(pref * (half(x * x)? - half((x * x).inv())?))
}

/// A factored meromorphic function of `x^2`: the product of
/// `(1 - C x^2)^e` over stored `(C, e)` pairs with integer exponents.
///
/// This is the working representation of the factorized quantum exchange
/// function: zeros and poles are read off directly from the exponent
/// signs, which is what the sector-correction machinery needs.
#[derive(Debug, Clone)]
pub struct MeromorphicProduct {
    factors: Vec<(Complex64, i32)>,
}

impl MeromorphicProduct {
    /// Builds from explicit `(C, e)` factors, dropping `e = 0` entries.
    pub fn from_factors(factors: Vec<(Complex64, i32)>) -> Self {
        MeromorphicProduct {
            factors: factors.into_iter().filter(|&(_, e)| e != 0).collect(),
        }
    }

    /// The stored `(C, e)` pairs.
    pub fn factors(&self) -> &[(Complex64, i32)] {
        &self.factors
    }

    /// Evaluates the product at `x`.
    pub fn eval(&self, x: Complex64) -> Result<Complex64> {
        let x2 = x * x;
        let mut acc = ONE;
        for &(cc, e) in &self.factors {
            let f = ONE - cc * x2;
            if e < 0 && f.norm() < POLE_EPS * (cc * x2).norm().max(1.0) {
                return Err(WqpError::PoleHit {
                    context: format!("factored product pole factor vanished at x = {x}"),
                });
            }
            acc *= f.powi(e);
        }
        if !acc.is_finite() {
            return Err(WqpError::NonconvergentSeries {
                context: format!("factored product overflowed at x = {x}"),
            });
        }
        Ok(acc)
    }

    /// Number of stored factors.
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    /// True when no factors are stored (the constant function 1).
    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Number of `k`-layers in the factorized quantum exchange function:
/// `n m` for positive winding, `n |m| - 1` for negative winding.
pub fn quantum_layer_count(n: u32, m_int: i64) -> i64 {
    let n = i64::from(n);
    if m_int > 0 {
        n * m_int
    } else {
        n * m_int.abs() - 1
    }
}

/// Checks the factorization hypothesis `|p| < 1`, `|q| < 1`,
/// `|p|^{S+1} > |q|^2` for the surface's layer count `S`.
pub fn quantum_hypothesis_check(surface: &SurfaceSigma) -> Result<i64> {
    let params = &surface.params;
    let s = quantum_layer_count(params.n, surface.m_int);
    let pn = params.p.norm();
    let qn = params.q.norm();
    let lhs = pn.powi(s as i32 + 1);
    let rhs = qn * qn;
    if pn >= 1.0 || qn >= 1.0 || lhs <= rhs {
        return Err(WqpError::HypothesisViolated { lhs, rhs });
    }
    Ok(s)
}

/// Builds the factored-product representation of the quantum exchange
/// factorizer: for each layer `k = 1..=S`, one `(1-x^2)^2` factor and six
/// geometric families of simple factors, truncated when the coefficient
/// modulus falls below the policy cutoff.
pub fn quantum_product(
    surface: &SurfaceSigma,
    policy: &TruncationPolicy,
) -> Result<MeromorphicProduct> {
    quantum_hypothesis_check(surface)?;
    quantum_product_unchecked(surface, policy)
}

/// Same construction as [`quantum_product`] but without the convergence
/// hypothesis gate: the factor list is still a well-defined finite object
/// whenever `|p| < 1` and `|q| < 1`, and the formal Taylor machinery may
/// consume it even when pointwise evaluation on the unit circle would not
/// converge to the exchange function.
pub fn quantum_product_unchecked(
    surface: &SurfaceSigma,
    policy: &TruncationPolicy,
) -> Result<MeromorphicProduct> {
    let params = &surface.params;
    if params.p.norm() >= 1.0 || params.q.norm() >= 1.0 {
        return Err(WqpError::InvalidParameter(format!(
            "factor families only terminate for |p| < 1 and |q| < 1, got |p| = {}, |q| = {}",
            params.p.norm(),
            params.q.norm()
        )));
    }
    if surface.m_int == 0 {
        return Err(WqpError::InvalidParameter(
            "winding integer must be nonzero".into(),
        ));
    }
    let s = quantum_layer_count(params.n, surface.m_int);
    let p = params.p;
    let q = params.q;
    let q2 = q * q;
    let q2n = q.powu(2 * params.n);
    let mut factors: Vec<(Complex64, i32)> = Vec::new();
    if s > 0 {
        factors.push((ONE, 2 * s as i32));
    }
    for k in 1..=s {
        let pk = p.powi(k as i32);
        let pmk = pk.inv();
        // (coefficient at n = 0, exponent); each advances by q^{2n} per step.
        let families: [(Complex64, i32); 6] = [
            (pmk * q2n, 2),        // (1 - x^2 p^{-k} q^{2n(1+nu)})^2
            (pk * q2, 1),          // (1 - x^2 p^k q^{2+2n nu})
            (pk * q2n / q2, 1),    // (1 - x^2 p^k q^{-2+2n(1+nu)})
            (pk, -2),              // (1 - x^2 p^k q^{2n nu})^{-2}
            (pmk * q2n / q2, -1),  // (1 - x^2 p^{-k} q^{-2+2n(1+nu)})^{-1}
            (pmk * q2, -1),        // (1 - x^2 p^{-k} q^{2+2n nu})^{-1}
        ];
        for (start, e) in families {
            let mut coeff = start;
            let mut spent = 0usize;
            while coeff.norm() >= policy.eps_trunc {
                factors.push((coeff, e));
                coeff *= q2n;
                spent += 1;
                if spent > policy.max_terms {
                    return Err(WqpError::TruncationBudgetExceeded {
                        terms: spent,
                        max_terms: policy.max_terms,
                    });
                }
            }
        }
    }
    Ok(MeromorphicProduct::from_factors(factors))
}

/// Pointwise evaluation of the factorized quantum exchange function,
/// gated by the factorization hypothesis.
pub fn f_quantum(
    x: Complex64,
    surface: &SurfaceSigma,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    quantum_product(surface, policy)?.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theta::I;

    fn params(n: u32, q: f64, p: f64, c: f64) -> AlgebraParams {
        AlgebraParams::new(
            n,
            Complex64::new(q, 0.0),
            Complex64::new(p, 0.0),
            Complex64::new(c, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn big_t_is_one_at_critical_level() {
        let pr = params(3, 0.4, 0.09, -3.0);
        let policy = TruncationPolicy::default();
        for &x in &[
            Complex64::new(1.1, 0.2),
            Complex64::new(0.87, -0.31),
            Complex64::new(1.2, 0.05),
        ] {
            let t = big_t(x, &pr, &policy).unwrap();
            assert!((t - ONE).norm() < 1e-11, "T = {t} at x = {x}");
        }
    }

    #[test]
    fn big_t_matches_reference_value() {
        let pr = params(3, 0.4, 0.09, -2.3);
        let policy = TruncationPolicy::default();
        let t = big_t(Complex64::new(1.1, 0.2), &pr, &policy).unwrap();
        let expect = Complex64::new(-6.44039828756933720e-2, 5.14587233844916937e-1);
        assert!((t - expect).norm() < 1e-13, "T = {t}");
    }

    #[test]
    fn f_classical_reference_and_antisymmetry() {
        let pr = params(3, 0.5, 0.09, -3.0);
        let policy = TruncationPolicy::default();
        let x = Complex64::new(0.7, 0.1);
        let f = f_classical(x, &pr, &policy).unwrap();
        let expect = Complex64::new(4.58636335134982431, 5.58797053986633818e-1);
        assert!((f - expect).norm() < 1e-12, "f = {f}");
        let fr = f_classical(x.inv(), &pr, &policy).unwrap();
        assert!((f + fr).norm() < 1e-12);
    }

    #[test]
    fn f_classical_agrees_with_log_derivative_route() {
        let pr = params(4, 0.45, 0.09, -4.0);
        let policy = TruncationPolicy::default();
        for &x in &[
            Complex64::new(0.9, 0.2),
            Complex64::new(1.1, -0.15),
            Complex64::new(0.82, 0.4),
        ] {
            let a = f_classical(x, &pr, &policy).unwrap();
            let b = dln_t_dc_critical(x, &pr, &policy).unwrap();
            assert!((a - b).norm() < 1e-11 * a.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn f_classical_sum_rule() {
        let pr = params(3, 0.55, 0.09, -3.0);
        let policy = TruncationPolicy::default();
        let x = Complex64::new(1.05, 0.17);
        let mut acc = Complex64::new(0.0, 0.0);
        for u in 1..=3 {
            acc += f_classical(pr.q.powu(u) * x, &pr, &policy).unwrap();
        }
        assert!(acc.norm() < 1e-12, "sum rule violated: {acc}");
    }

    #[test]
    fn big_f_single_reference_symmetry_and_tau_route() {
        let pr = params(3, 0.5, 0.09, -3.0);
        let policy = TruncationPolicy::default();
        let x = Complex64::new(0.9, 0.3);
        let f = big_f_single(x, &pr, &policy).unwrap();
        let expect = Complex64::new(2.52851105018166220e-1, 6.72660156645623685e-2);
        assert!((f - expect).norm() < 1e-13, "F = {f}");
        let fr = big_f_single(x.inv(), &pr, &policy).unwrap();
        assert!((f - fr).norm() < 1e-13);
        let qh = pr.q.sqrt();
        let tau_route =
            (tau_n(qh * x, &pr, &policy).unwrap() * tau_n(qh / x, &pr, &policy).unwrap()).inv();
        assert!((f - tau_route).norm() < 1e-12 * f.norm().max(1.0));
    }

    #[test]
    fn big_f_m_reference_values_and_iterated_route() {
        let policy = TruncationPolicy::default();
        let pr2 = params(2, 0.55, 0.2, -2.0);
        let x = Complex64::new(1.07, 0.0);
        let fp = big_f_m(1, x, &pr2, &policy).unwrap();
        assert!((fp - Complex64::new(2.20009115587733495e-1, 0.0)).norm() < 1e-13);
        let fm = big_f_m(-1, x, &pr2, &policy).unwrap();
        assert!((fm - Complex64::new(7.71272446826300001e-2, 0.0)).norm() < 1e-13);
        let pr3 = params(3, 0.6, 0.15, -3.0);
        let xc = Complex64::new(0.95, 0.1);
        let fm2 = big_f_m(-2, xc, &pr3, &policy).unwrap();
        let expect = Complex64::new(2.90861713453482311e-1, -5.48900754100590775e-2);
        assert!((fm2 - expect).norm() < 1e-12);
        for (m, pr, xx) in [(1i64, &pr2, x), (-1, &pr2, x), (-2, &pr3, xc), (2, &pr3, xc)] {
            let closed = big_f_m(m, xx, pr, &policy).unwrap();
            let iter = big_f_m_iterated(m, xx, pr, &policy).unwrap();
            assert!(
                (closed - iter).norm() < 1e-11 * closed.norm().max(1.0),
                "M = {m}: {closed} vs {iter}"
            );
        }
    }

    #[test]
    fn big_y_reference_ratio_route_and_cocycle() {
        let policy = TruncationPolicy::default();
        let s1 = SurfaceSigma::new(2, 1, Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.0)).unwrap();
        let x = Complex64::new(1.1, 0.1);
        let y = big_y(1, x, &s1, &policy).unwrap();
        let expect = Complex64::new(-1.75707985510241485e-1, 7.88960231884133800e-1);
        assert!((y - expect).norm() < 1e-12, "Y = {y}");
        let ratio = big_y_ratio_route(1, x, &s1, &policy).unwrap();
        assert!((y - ratio).norm() < 1e-11 * y.norm().max(1.0));
        let yr = big_y(1, x.inv(), &s1, &policy).unwrap();
        assert!((y * yr - ONE).norm() < 1e-11);
        let s2 =
            SurfaceSigma::new(3, -1, Complex64::new(0.45, 0.0), Complex64::new(0.25, 0.0)).unwrap();
        let y2 = big_y(-1, Complex64::new(0.97, 0.0), &s2, &policy).unwrap();
        assert!((y2 - Complex64::new(4.02668718179126755e-1, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn f_h_reference_values() {
        let policy = TruncationPolicy::default();
        let pr2 = params(2, 0.6, 0.09, -2.0);
        let v = f_h(Complex64::new(1.13, 0.0), 1, 1, &pr2, &policy).unwrap();
        assert!((v - Complex64::new(1.84031155972993295e1, 0.0)).norm() < 1e-11);
        let vc = f_h(Complex64::new(0.93, 0.21), 1, 1, &pr2, &policy).unwrap();
        let expect = Complex64::new(-2.20524410406739362, -6.40708072759205474);
        assert!((vc - expect).norm() < 1e-12);
        let pr3 = params(3, 0.6, 0.09, -3.0);
        let v3 = f_h(Complex64::new(1.13, 0.0), 1, -1, &pr3, &policy).unwrap();
        assert!((v3 - Complex64::new(5.98825878432134786e1, 0.0)).norm() < 1e-10);
        let pr3b = params(3, 0.55, 0.09, -3.0);
        let v4 = f_h(Complex64::new(1.21, 0.0), 2, 1, &pr3b, &policy).unwrap();
        assert!((v4 - Complex64::new(2.53691393875537315e2, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn f_h_even_is_proportional_to_f_classical() {
        let policy = TruncationPolicy::default();
        let pr = params(3, 0.55, 0.09, -3.0);
        let x = Complex64::new(1.21, 0.3);
        let (h, m) = (2i64, 1i64);
        let fh = f_h(x, h, m, &pr, &policy).unwrap();
        let f = f_classical(x, &pr, &policy).unwrap();
        let n = i64::from(pr.n);
        let scale = -((n * n * m * (n * m + 1) * h) as f64) / 2.0;
        assert!((fh - scale * f).norm() < 1e-10 * fh.norm().max(1.0));
    }

    #[test]
    fn f_quantum_is_one_at_zero_and_factorizes_y() {
        let policy = TruncationPolicy::default();
        let s =
            SurfaceSigma::new(2, 1, Complex64::new(0.4, 0.0), Complex64::new(0.75, 0.0)).unwrap();
        let f0 = f_quantum(Complex64::new(0.0, 0.0), &s, &policy).unwrap();
        assert!((f0 - ONE).norm() < 1e-14);
        for &x in &[Complex64::new(1.05, 0.1), Complex64::new(0.94, -0.2)] {
            let y = big_y(1, x, &s, &policy).unwrap();
            let ratio = f_quantum(x, &s, &policy).unwrap() / f_quantum(x.inv(), &s, &policy).unwrap();
            assert!((y - ratio).norm() < 1e-10 * y.norm().max(1.0), "{y} vs {ratio}");
        }
    }

    #[test]
    fn f_quantum_rejects_hypothesis_violation() {
        let policy = TruncationPolicy::default();
        let s = SurfaceSigma::new(2, 1, Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.0)).unwrap();
        let err = f_quantum(Complex64::new(0.5, 0.0), &s, &policy).unwrap_err();
        assert!(matches!(err, WqpError::HypothesisViolated { .. }));
    }

    #[test]
    fn big_m_is_identity_at_critical_level() {
        let pr = params(2, 0.4, 0.09, -2.0);
        let policy = TruncationPolicy::default();
        let x = Complex64::new(1.07, 0.13);
        let m = big_m_matrix(x, &pr, &policy).unwrap();
        let id = ComplexTensor4::identity(2);
        assert!(m.sub(&id).frobenius() < 1e-9, "||M - 1|| = {}", m.sub(&id).frobenius());
    }

    #[test]
    fn pole_guard_reports_pole_hit() {
        let pr = params(3, 0.5, 0.09, -3.0);
        let policy = TruncationPolicy::default();
        let err = f_classical(Complex64::new(1.0, 0.0), &pr, &policy).unwrap_err();
        assert!(matches!(err, WqpError::PoleHit { .. }));
        let _ = I; // silence unused import in configurations without it
    }
}
