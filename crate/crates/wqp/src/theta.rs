//! Theta functions, infinite products and balanced `q`-numbers.
//!
//! Two evaluation routes are provided for the theta function with
//! characteristics: a peak-centred lattice sum ([`theta_char`]) and a
//! triple-product route ([`theta_char_via_product`]) that factors the sum
//! through the standard multiplicative theta function [`theta_std`].  The
//! two routes agree to near machine precision on their common domain and
//! serve as independent cross-checks of one another.
//!
//! All principal powers are taken with the principal branch of the
//! complex logarithm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WqpError};

/// Imaginary unit.
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);
/// π as `f64`.
pub(crate) const PI: f64 = std::f64::consts::PI;

pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A multiplicative nome restricted to the punctured open unit disc
/// `0 < |value| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nome(Complex64);

impl Nome {
    /// Validates and wraps a nome value.
    pub fn new(value: Complex64) -> Result<Self> {
        let r = value.norm();
        if !r.is_finite() || r <= 0.0 || r >= 1.0 {
            return Err(WqpError::InvalidParameter(format!(
                "nome must satisfy 0 < |value| < 1, got {value} with modulus {r:.6e}"
            )));
        }
        Ok(Nome(value))
    }

    /// The wrapped complex value.
    pub fn value(self) -> Complex64 {
        self.0
    }

    /// Modulus of the wrapped value.
    pub fn modulus(self) -> f64 {
        self.0.norm()
    }
}

/// Characteristics `(g1, g2)` labelling a theta function with
/// characteristics.  Values are kept as plain floats: the shift rules hold
/// for arbitrary real characteristics, and the half-integer-plus-rational
/// combinations used by the weight lattice do not reduce to a common
/// denominator for every rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaChar {
    /// First characteristic (multiplies the modular parameter direction).
    pub g1: f64,
    /// Second characteristic (shifts the argument).
    pub g2: f64,
}

impl ThetaChar {
    /// Plain constructor.
    pub fn new(g1: f64, g2: f64) -> Self {
        ThetaChar { g1, g2 }
    }

    /// The odd characteristic `(1/2, 1/2)`.
    pub fn half_half() -> Self {
        ThetaChar::new(0.5, 0.5)
    }

    /// Characteristic `(1/2 + a/n, 1/2 + b/n)` indexed by a pair of
    /// residues; this is the combination used by lattice weight factors.
    pub fn half_shifted(a: i64, b: i64, n: u32) -> Self {
        let nf = f64::from(n);
        ThetaChar::new(0.5 + a as f64 / nf, 0.5 + b as f64 / nf)
    }
}

/// Truncation policy shared by every series and product evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Relative tail threshold at which infinite sums and products stop.
    pub eps_trunc: f64,
    /// Hard cap on the number of retained terms before giving up.
    pub max_terms: usize,
    /// Default half-width of Laurent windows produced by expansions.
    pub series_rmax: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            eps_trunc: 1e-16,
            max_terms: 1_000_000,
            series_rmax: 16,
        }
    }
}

impl TruncationPolicy {
    /// Checks the invariants `0 < eps_trunc < 1` and `max_terms >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 1.0) {
            return Err(WqpError::InvalidParameter(format!(
                "eps_trunc must lie in (0, 1), got {}",
                self.eps_trunc
            )));
        }
        if self.max_terms < 1 {
            return Err(WqpError::InvalidParameter(
                "max_terms must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Balanced `q`-number `[r] = (q^r - q^{-r}) / (q - q^{-1})`.
///
/// Returns exactly zero for `r = 0`; fails with [`WqpError::DegenerateQ`]
/// when `q` is zero or so close to `±1` that the denominator underflows.
pub fn qnum(r: i64, q: Complex64) -> Result<Complex64> {
    if q.norm() == 0.0 || !q.is_finite() {
        return Err(WqpError::DegenerateQ { q });
    }
    let denom = q - q.inv();
    if denom.norm() < 1e-14 {
        return Err(WqpError::DegenerateQ { q });
    }
    if r == 0 {
        return Ok(ZERO);
    }
    let qr = q.powi(r as i32);
    Ok((qr - qr.inv()) / denom)
}

/// Multi-base infinite product `prod_{n_1,...,n_m >= 0} (1 - z b_1^{n_1} ... b_m^{n_m})`.
///
/// Factors are visited in graded order (total degree `n_1 + ... + n_m`,
/// lexicographic within a grade).  Every base must lie in the punctured
/// open unit disc.  With no bases the product degenerates to the single
/// factor `1 - z`.  An exactly vanishing factor short-circuits to zero.
pub fn multi_pochhammer(
    z: Complex64,
    bases: &[Complex64],
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    policy.validate()?;
    for &b in bases {
        let r = b.norm();
        if !r.is_finite() || r <= 0.0 || r >= 1.0 {
            return Err(WqpError::InvalidParameter(format!(
                "product base {b} must lie in the punctured open unit disc"
            )));
        }
    }
    if bases.is_empty() {
        return Ok(ONE - z);
    }
    let m = bases.len();
    let p_max = bases.iter().map(|b| b.norm()).fold(0.0f64, f64::max);
    let z_norm = z.norm();

    let mut product = ONE;
    let mut terms = 0usize;
    let mut tuple = vec![0u32; m];

    for grade in 0u32.. {
        // Enumerate all m-tuples of the given total degree, lexicographically.
        let mut done_grade = false;
        init_composition(&mut tuple, grade);
        while !done_grade {
            terms += 1;
            if terms > policy.max_terms {
                return Err(WqpError::TruncationBudgetExceeded {
                    terms,
                    max_terms: policy.max_terms,
                });
            }
            let mut w = z;
            for (idx, &e) in tuple.iter().enumerate() {
                w *= bases[idx].powu(e);
            }
            let factor = ONE - w;
            if factor.norm() == 0.0 {
                return Ok(ZERO);
            }
            product *= factor;
            done_grade = !next_composition(&mut tuple);
        }
        // Tail bound: every factor of grade >= g+1 differs from one by at
        // most |z| p_max^{g+1}; the number of tuples per grade grows like
        // (g+2)^{m-1}, and grades themselves sum geometrically.
        let tail = z_norm * p_max.powi(grade as i32 + 1) * ((grade + 2) as f64).powi(m as i32 - 1)
            / (1.0 - p_max);
        if tail < policy.eps_trunc {
            break;
        }
    }
    if !product.is_finite() {
        return Err(WqpError::NonconvergentSeries {
            context: format!("infinite product overflowed for argument {z}"),
        });
    }
    Ok(product)
}

/// Resets `tuple` to the lexicographically first composition of `grade`.
fn init_composition(tuple: &mut [u32], grade: u32) {
    let m = tuple.len();
    for slot in tuple.iter_mut() {
        *slot = 0;
    }
    tuple[m - 1] = grade;
}

/// Advances `tuple` to the next composition of the same total degree,
/// in lexicographic order; returns `false` after the last one.
fn next_composition(tuple: &mut [u32]) -> bool {
    let m = tuple.len();
    if m == 1 {
        return false;
    }
    // Find the rightmost position (excluding the last) that can donate to
    // its right; standard colex successor on the reversed weak composition.
    let last = tuple[m - 1];
    if last > 0 {
        tuple[m - 2] += 1;
        tuple[m - 1] = 0;
        // Everything donated to position m-2 must be re-spread: the
        // remainder (last - 1) goes back to the last slot.
        tuple[m - 1] = last - 1;
        return true;
    }
    // Last slot empty: carry further left.
    for pos in (1..m - 1).rev() {
        if tuple[pos] > 0 {
            let moved = tuple[pos] - 1;
            tuple[pos] = 0;
            tuple[pos - 1] += 1;
            tuple[m - 1] = moved;
            return true;
        }
    }
    false
}

/// Standard multiplicative theta function
/// `theta(z; p) = (z; p) (p/z; p) (p; p)` with all products single-base.
pub fn theta_std(z: Complex64, p: Nome, policy: &TruncationPolicy) -> Result<Complex64> {
    if z.norm() == 0.0 || !z.is_finite() {
        return Err(WqpError::InvalidParameter(format!(
            "theta argument must be finite and nonzero, got {z}"
        )));
    }
    let pv = p.value();
    let bases = [pv];
    let a = multi_pochhammer(z, &bases, policy)?;
    let b = multi_pochhammer(pv / z, &bases, policy)?;
    let c = multi_pochhammer(pv, &bases, policy)?;
    Ok(a * b * c)
}

/// Theta function with characteristics, evaluated as a lattice sum:
///
/// `theta[g1, g2](xi, tau) = sum_m exp(i pi (m+g1)^2 tau + 2 i pi (m+g1)(xi+g2))`.
///
/// The sum is centred on the index of the largest term and extended
/// outwards on both sides until two consecutive terms fall below the
/// relative truncation threshold.
pub fn theta_char(
    gamma: ThetaChar,
    xi: Complex64,
    tau: Complex64,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    policy.validate()?;
    if !(tau.im > 0.0) || !tau.is_finite() {
        return Err(WqpError::NonconvergentTau { tau });
    }
    if !xi.is_finite() {
        return Err(WqpError::InvalidParameter(format!(
            "theta argument must be finite, got {xi}"
        )));
    }
    let shifted = xi + Complex64::new(gamma.g2, 0.0);
    let term = |m: i64| -> Complex64 {
        let a = m as f64 + gamma.g1;
        let expo = Complex64::new(0.0, PI * a * a) * tau + Complex64::new(0.0, 2.0 * PI * a) * shifted;
        expo.exp()
    };
    // The term modulus is log-concave in m; centring on its peak keeps the
    // two-sided walk short and avoids adding huge and tiny terms together.
    let m_peak = (-gamma.g1 - shifted.im / tau.im).round() as i64;

    let centre = term(m_peak);
    if !centre.is_finite() {
        return Err(WqpError::NonconvergentSeries {
            context: format!("lattice sum overflowed at its peak term (xi = {xi}, tau = {tau})"),
        });
    }
    let mut sum = centre;
    let mut scale = centre.norm();
    for dir in [1i64, -1] {
        let mut consecutive_small = 0u32;
        let mut k = 1i64;
        loop {
            if k as usize > policy.max_terms {
                return Err(WqpError::TruncationBudgetExceeded {
                    terms: k as usize,
                    max_terms: policy.max_terms,
                });
            }
            let t = term(m_peak + dir * k);
            if !t.is_finite() {
                return Err(WqpError::NonconvergentSeries {
                    context: format!(
                        "lattice sum overflowed {} terms from its peak (xi = {xi}, tau = {tau})",
                        k
                    ),
                });
            }
            sum += t;
            scale = scale.max(t.norm());
            if t.norm() <= policy.eps_trunc * scale.max(f64::MIN_POSITIVE) {
                consecutive_small += 1;
                if consecutive_small >= 2 {
                    break;
                }
            } else {
                consecutive_small = 0;
            }
            k += 1;
        }
    }
    Ok(sum)
}

/// Theta function with characteristics through the triple-product route:
///
/// `theta[g1, g2](xi, tau) = e^{2 i pi (g1 g2 + tau g1^2 / 2 + xi g1)}
///  theta(-e^{2 i pi (g2 + tau (g1 + 1/2) + xi)}; p)` with `p = e^{2 i pi tau}`.
///
/// All powers of `p` and of `z = e^{i pi xi}` are assembled in exponential
/// form so that no branch mismatch can occur between the prefactor and the
/// product argument.
pub fn theta_char_via_product(
    gamma: ThetaChar,
    xi: Complex64,
    tau: Complex64,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if !(tau.im > 0.0) || !tau.is_finite() {
        return Err(WqpError::NonconvergentTau { tau });
    }
    let p = (Complex64::new(0.0, 2.0 * PI) * tau).exp();
    let p_nome = Nome::new(p)?;
    let g1 = Complex64::new(gamma.g1, 0.0);
    let g2 = Complex64::new(gamma.g2, 0.0);
    let prefactor = (Complex64::new(0.0, 2.0 * PI) * (g1 * g2 + tau * g1 * g1 * 0.5 + xi * g1)).exp();
    let argument = -(Complex64::new(0.0, 2.0 * PI) * (g2 + tau * (g1 + 0.5) + xi)).exp();
    Ok(prefactor * theta_std(argument, p_nome, policy)?)
}
