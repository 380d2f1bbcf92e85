//! Parameter bundles: algebra data, gauge matrices, constraint surfaces
//! and classical-limit prescriptions, plus the deterministic sampler used
//! by property verification.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WqpError};
use crate::theta::{Nome, ONE, PI, ZERO};

/// Parameters of the three-parameter elliptic algebra: rank label `n`,
/// deformation parameter `q`, elliptic nome `p` and central value `c`.
///
/// Only `q` is constrained at construction time (`0 < |q| < 1` and away
/// from `±1`); `p` must merely be finite and nonzero.  Routines that
/// expand in powers of `p` or of derived nomes check the relevant modulus
/// conditions at their own call sites, because several supported regimes
/// (negative winding surfaces in particular) place `p` outside the unit
/// disc on purpose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraParams {
    /// Site dimension (`n >= 2`).
    pub n: u32,
    /// Deformation parameter.
    pub q: Complex64,
    /// Elliptic nome.
    pub p: Complex64,
    /// Central value.
    pub c: Complex64,
}

impl AlgebraParams {
    /// Validates and bundles the parameters.
    pub fn new(n: u32, q: Complex64, p: Complex64, c: Complex64) -> Result<Self> {
        if n < 2 {
            return Err(WqpError::InvalidParameter(format!(
                "site dimension must be at least 2, got {n}"
            )));
        }
        let qn = q.norm();
        if !qn.is_finite() || qn <= 0.0 || qn >= 1.0 {
            return Err(WqpError::InvalidParameter(format!(
                "q must satisfy 0 < |q| < 1, got {q}"
            )));
        }
        if (q - ONE).norm() < 1e-12 || (q + ONE).norm() < 1e-12 {
            return Err(WqpError::DegenerateQ { q });
        }
        if !p.is_finite() || p.norm() == 0.0 {
            return Err(WqpError::InvalidParameter(format!(
                "p must be finite and nonzero, got {p}"
            )));
        }
        if !c.is_finite() {
            return Err(WqpError::InvalidParameter(format!(
                "c must be finite, got {c}"
            )));
        }
        Ok(AlgebraParams { n, q, p, c })
    }

    /// Primitive `n`-th root of unity `exp(2 i pi / n)`.
    pub fn omega(&self) -> Complex64 {
        Complex64::new(0.0, 2.0 * PI / f64::from(self.n)).exp()
    }

    /// The shifted nome `p* = p q^{-2c}` (principal power).
    pub fn p_star(&self) -> Complex64 {
        self.p * (-2.0 * self.c * self.q.ln()).exp()
    }

    /// The shifted nome as a validated [`Nome`]; fails with
    /// [`WqpError::StarNomeOutOfDomain`] when it leaves the punctured disc.
    pub fn p_star_nome(&self) -> Result<Nome> {
        let ps = self.p_star();
        Nome::new(ps).map_err(|_| WqpError::StarNomeOutOfDomain {
            modulus: ps.norm(),
        })
    }

    /// The nome `p` as a validated [`Nome`] (required by routines that
    /// expand in powers of `p`).
    pub fn p_nome(&self) -> Result<Nome> {
        Nome::new(self.p)
    }

    /// The nome `q^{2n}` used by the single-variable theta factors.
    pub fn q2n_nome(&self) -> Result<Nome> {
        Nome::new(self.q.powu(2 * self.n))
    }

    /// Same parameters with the nome replaced by the shifted nome.
    pub fn with_star_nome(&self) -> Result<AlgebraParams> {
        let ps = self.p_star_nome()?;
        Ok(AlgebraParams {
            p: ps.value(),
            ..*self
        })
    }

    /// Multiplicative parameters `(zeta, tau, omega)` in additive form:
    /// `q = e^{i pi zeta}`, `p = e^{2 i pi tau}` through principal logs.
    pub fn additive(&self) -> (Complex64, Complex64) {
        let zeta = self.q.ln() / Complex64::new(0.0, PI);
        let tau = self.p.ln() / Complex64::new(0.0, 2.0 * PI);
        (zeta, tau)
    }
}

/// The diagonal and cyclic-shift gauge matrices for site dimension `n`,
/// together with the principal square root of the diagonal one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeMatrices {
    /// Diagonal matrix `g` with entries `omega^k`.
    pub g: DMatrix<Complex64>,
    /// Cyclic shift `h` with entries `h[k, l] = delta_{k+1, l mod n}`.
    pub hshift: DMatrix<Complex64>,
    /// Principal square root of `g` (entries `exp(i pi k / n)`).
    pub g_half: DMatrix<Complex64>,
}

impl GaugeMatrices {
    /// Builds the gauge matrices for site dimension `n`.
    pub fn new(n: u32) -> Self {
        let nf = f64::from(n);
        let nu = n as usize;
        let mut g = DMatrix::from_element(nu, nu, ZERO);
        let mut h = DMatrix::from_element(nu, nu, ZERO);
        let mut g_half = DMatrix::from_element(nu, nu, ZERO);
        for k in 0..nu {
            g[(k, k)] = Complex64::new(0.0, 2.0 * PI * k as f64 / nf).exp();
            g_half[(k, k)] = Complex64::new(0.0, PI * k as f64 / nf).exp();
            h[(k, (k + 1) % nu)] = ONE;
        }
        GaugeMatrices {
            g,
            hshift: h,
            g_half,
        }
    }

    /// Inverse of the diagonal gauge matrix.
    pub fn g_inv(&self) -> DMatrix<Complex64> {
        let n = self.g.nrows();
        DMatrix::from_fn(n, n, |r, c| if r == c { self.g[(r, r)].inv() } else { ZERO })
    }

    /// Inverse of the principal square root of `g`.
    pub fn g_half_inv(&self) -> DMatrix<Complex64> {
        let n = self.g.nrows();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                self.g_half[(r, r)].inv()
            } else {
                ZERO
            }
        })
    }

    /// The combination `g^{1/2} h g^{1/2}` appearing in quasi-periodicity.
    pub fn g_half_h_g_half(&self) -> DMatrix<Complex64> {
        &(&self.g_half * &self.hshift) * &self.g_half
    }

    /// Checks the defining relations `g^n = h^n = 1` and `(g^{1/2})^2 = g`
    /// to the stated tolerance; used by construction tests.
    pub fn check_relations(&self, tol: f64) -> bool {
        let n = self.g.nrows();
        let id = DMatrix::from_fn(n, n, |r, c| if r == c { ONE } else { ZERO });
        let mut gp = id.clone();
        let mut hp = id.clone();
        for _ in 0..n {
            gp = &gp * &self.g;
            hp = &hp * &self.hshift;
        }
        let sq = &self.g_half * &self.g_half;
        crate::tensor::dmatrix_max_abs(&(&gp - &id)) < tol
            && crate::tensor::dmatrix_max_abs(&(&hp - &id)) < tol
            && crate::tensor::dmatrix_max_abs(&(&sq - &self.g)) < tol
    }
}

/// A constraint surface fixing the central value in terms of an integer
/// winding number `m_int`: the central value is derived from
/// `(-p^{1/2})^{n m_int} = q^{-c-n}` with `-p^{1/2}` meaning minus the
/// principal square root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSigma {
    /// Winding number.
    pub m_int: i64,
    /// Full parameter set with the derived central value.
    pub params: AlgebraParams,
}

impl SurfaceSigma {
    /// Builds the surface from `(n, m_int, q, p)`, deriving `c`.
    pub fn new(n: u32, m_int: i64, q: Complex64, p: Complex64) -> Result<Self> {
        let base = AlgebraParams::new(n, q, p, ZERO)?;
        let msp = minus_sqrt_p(p);
        let nm = f64::from(n) * m_int as f64;
        // c = -n - n m_int Log(-p^{1/2}) / Log q  (principal logarithms).
        let c = -Complex64::new(f64::from(n), 0.0) - msp.ln() * nm / q.ln();
        let params = AlgebraParams { c, ..base };
        let surface = SurfaceSigma { m_int, params };
        let residual = surface.residual();
        if !(residual < 1e-9) {
            return Err(WqpError::SurfaceViolated { residual });
        }
        Ok(surface)
    }

    /// Residual `|(-p^{1/2})^{n m_int} - q^{-c-n}|` of the defining
    /// constraint (principal powers).
    pub fn residual(&self) -> f64 {
        let p = self.params.p;
        let q = self.params.q;
        let n = f64::from(self.params.n);
        let lhs = (minus_sqrt_p(p).ln() * (n * self.m_int as f64)).exp();
        let rhs = ((-self.params.c - Complex64::new(n, 0.0)) * q.ln()).exp();
        (lhs - rhs).norm()
    }

    /// Minus the principal square root of the nome.
    pub fn minus_sqrt_p(&self) -> Complex64 {
        minus_sqrt_p(self.params.p)
    }
}

/// Minus the principal square root.
pub fn minus_sqrt_p(p: Complex64) -> Complex64 {
    -p.sqrt()
}

/// Prescription for approaching a Poisson limit along `q^{nh} = p^{1-beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLimitSpec {
    /// Nonzero integer exponent labelling the limit family.
    pub h: i64,
    /// Limit parameter, kept in `(0, 0.1]`.
    pub beta: f64,
}

impl ClassicalLimitSpec {
    /// Validates the limit prescription.
    pub fn new(h: i64, beta: f64) -> Result<Self> {
        if h == 0 {
            return Err(WqpError::InvalidParameter(
                "limit label h must be a nonzero integer".into(),
            ));
        }
        if !(beta > 0.0 && beta <= 0.1) {
            return Err(WqpError::InvalidParameter(format!(
                "beta must lie in (0, 0.1], got {beta}"
            )));
        }
        Ok(ClassicalLimitSpec { h, beta })
    }

    /// The nome at this point of the approach, derived from `q`:
    /// `p = q^{nh/(1-beta)}` (principal power).
    pub fn p_of(&self, n: u32, q: Complex64) -> Complex64 {
        let expo = f64::from(n) * self.h as f64 / (1.0 - self.beta);
        (q.ln() * expo).exp()
    }

    /// The limiting nome `p = q^{nh}` reached at `beta = 0`.
    pub fn p_limit(n: u32, h: i64, q: Complex64) -> Complex64 {
        (q.ln() * (f64::from(n) * h as f64)).exp()
    }
}

/// Deterministic sampling plan for property verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// Number of admissible sample points (or point pairs).
    pub count: usize,
    /// Seed for the ChaCha8 stream; the plan is reproducible byte-for-byte.
    pub seed: u64,
    /// Execution strategy for the per-sample sweep.
    #[serde(skip)]
    pub exec: crate::exec::Exec,
}

impl SamplePlan {
    /// Plan with the default execution strategy.
    pub fn new(count: usize, seed: u64) -> Self {
        SamplePlan {
            count,
            seed,
            exec: crate::exec::Exec::default(),
        }
    }
}

/// Half-plane restriction applied when drawing spectral points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgWindow {
    /// Argument in `(-pi + 0.1, pi - 0.1)`: only the branch-cut
    /// neighbourhood is excluded.
    OffCut,
    /// Argument in `(-pi + 0.2, -0.2)`: the point and its negative both
    /// stay clear of the cut, as required by sign-flip identities.
    LowerHalf,
}

/// Draws an admissible spectral point: modulus log-uniform in
/// `(0.8, 1.25)`, argument uniform in the selected window.
pub fn sample_point(rng: &mut ChaCha8Rng, window: ArgWindow) -> Complex64 {
    let lo = 0.8f64.ln();
    let hi = 1.25f64.ln();
    let r = (rng.gen_range(lo..hi)).exp();
    let arg = match window {
        ArgWindow::OffCut => rng.gen_range(-PI + 0.1..PI - 0.1),
        ArgWindow::LowerHalf => rng.gen_range(-PI + 0.2..-0.2),
    };
    Complex64::from_polar(r, arg)
}

/// Derives the per-sample RNG for item `index` of a plan.  Mixing the
/// index into the seed keeps parallel and sequential sweeps identical.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .rotate_left(17)
        ^ 0xD1B5_4A32_D192_ED03;
    ChaCha8Rng::seed_from_u64(mixed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauge_relations_hold() {
        for n in 2..=5 {
            let gm = GaugeMatrices::new(n);
            assert!(gm.check_relations(1e-12), "relations fail for n = {n}");
        }
    }

    #[test]
    fn surface_residual_is_tiny() {
        let s = SurfaceSigma::new(3, 1, Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.0))
            .unwrap();
        assert!(s.residual() < 1e-12);
        let s_neg =
            SurfaceSigma::new(2, -1, Complex64::new(0.45, 0.0), Complex64::new(0.2, 0.0))
                .unwrap();
        assert!(s_neg.residual() < 1e-12);
    }

    #[test]
    fn classical_limit_nome_approaches_the_limit() {
        let q = Complex64::new(0.6, 0.0);
        let lim = ClassicalLimitSpec::p_limit(2, 1, q);
        let near = ClassicalLimitSpec::new(1, 1e-3).unwrap().p_of(2, q);
        assert!((near - lim).norm() < 2e-3 * lim.norm());
    }

    #[test]
    fn sampler_respects_windows() {
        let mut rng = sample_rng(42, 0);
        for _ in 0..200 {
            let z = sample_point(&mut rng, ArgWindow::OffCut);
            let r = z.norm();
            assert!(r > 0.8 && r < 1.25);
            assert!(z.arg().abs() < PI - 0.09);
            let w = sample_point(&mut rng, ArgWindow::LowerHalf);
            assert!(w.arg() < -0.19 && w.arg() > -PI + 0.19);
        }
    }

    #[test]
    fn sample_rng_streams_are_index_stable() {
        let a: u64 = sample_rng(7, 3).gen();
        let b: u64 = sample_rng(7, 3).gen();
        let c: u64 = sample_rng(7, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
