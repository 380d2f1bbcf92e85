//! Random-sample verification sweeps for the exchange-matrix identities.
//!
//! Each property draws spectral points from a seeded stream, evaluates the
//! two sides of its defining relation, and aggregates Frobenius residuals
//! into a [`CheckReport`].  Points that land on numerical degeneracies
//! (theta zeros in denominators, poles, singular inverses) are skipped and
//! counted rather than failing the sweep; every other error propagates.
//!
//! Suites bundle related checks: [`suite_rmatrix`] runs the eight matrix
//! and weight-sum identities, [`suite_critical`] checks the collapse of
//! the exchange structure at the critical level, and [`suite_etasum`]
//! cross-validates the double-sum mode coefficients against their closed
//! form.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, WqpError};
use crate::exec;
use crate::modes::{coeff_k0_s, eta_double_sum};
use crate::params::{
    sample_point, sample_rng, AlgebraParams, ArgWindow, GaugeMatrices, SamplePlan,
};
use crate::report::{CheckReport, VerificationReport};
use crate::rmatrix::{build_r, build_rhat, s_element_closed, THETA_DEGENERACY_FLOOR};
use crate::structure::{big_m_matrix, big_t, dln_t_dc_critical, f_classical};
use crate::tensor::ComplexTensor4;
use crate::theta::{theta_char, ThetaChar, TruncationPolicy, I, PI, ZERO};

/// Default pass threshold for the identity sweeps.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// The verifiable identities of the exchange matrix and its lattice-weight
/// building blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropertyId {
    /// Three-site braid consistency on the triple tensor product.
    Ybe,
    /// The two-site product with inverted argument is the identity.
    Unitarity,
    /// Partial-transpose product with the shifted inverse argument is the
    /// identity.
    Crossing,
    /// Sign alternation under argument negation, up to conjugation by the
    /// diagonal gauge and a root-of-unity prefactor.
    Antisymmetry,
    /// Behaviour of the normalized matrix under a half-period shift of the
    /// argument, conjugated by the gauge-shift sandwich.
    Quasiperiodicity,
    /// Exchange rule between inversion and partial transposition under a
    /// full-period shift.
    InvTranspose,
    /// First orthogonality sum of the lattice weights.
    SIdentity1,
    /// Second orthogonality sum of the lattice weights.
    SIdentity2,
}

impl PropertyId {
    /// All properties in canonical report order.
    pub const ALL: [PropertyId; 8] = [
        PropertyId::Ybe,
        PropertyId::Unitarity,
        PropertyId::Crossing,
        PropertyId::Antisymmetry,
        PropertyId::Quasiperiodicity,
        PropertyId::InvTranspose,
        PropertyId::SIdentity1,
        PropertyId::SIdentity2,
    ];

    /// Stable identifier used in reports and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            PropertyId::Ybe => "YBE",
            PropertyId::Unitarity => "UNITARITY",
            PropertyId::Crossing => "CROSSING",
            PropertyId::Antisymmetry => "ANTISYMMETRY",
            PropertyId::Quasiperiodicity => "QUASIPERIODICITY",
            PropertyId::InvTranspose => "INV_TRANSPOSE",
            PropertyId::SIdentity1 => "S_IDENTITY_1",
            PropertyId::SIdentity2 => "S_IDENTITY_2",
        }
    }

    /// Inverse of [`PropertyId::name`], case-insensitive.
    pub fn parse(text: &str) -> Option<PropertyId> {
        let upper = text.to_ascii_uppercase();
        PropertyId::ALL.iter().copied().find(|id| id.name() == upper)
    }

    /// Sampling window: checks that also evaluate at the negated point keep
    /// the draw and its negation clear of the branch cut of the logarithm.
    fn window(self) -> ArgWindow {
        match self {
            PropertyId::Antisymmetry | PropertyId::Quasiperiodicity => ArgWindow::LowerHalf,
            _ => ArgWindow::OffCut,
        }
    }
}

/// Result of evaluating one property at one sample point.
struct SampleOutcome {
    residual: f64,
    condition: Option<f64>,
    /// Residual of the sign-flipped variant, for the alternation check.
    alt_residual: Option<f64>,
}

/// Margin (radians) kept between analytically continued arguments and the
/// branch cut of the principal logarithm when screening sample points.
const BRANCH_MARGIN: f64 = 0.05;

/// Reject a draw whose analytically continued argument would wrap past the
/// principal branch: the fractional-power prefactor would then be evaluated
/// on different sheets on the two sides of a shift identity.
fn require_branch_safe(analytic_arg: f64, context: &str) -> Result<()> {
    if analytic_arg.abs() >= std::f64::consts::PI - BRANCH_MARGIN {
        return Err(WqpError::SamplePointDegenerate {
            context: format!(
                "{context}: continued argument {analytic_arg:.4} wraps the branch cut"
            ),
        });
    }
    Ok(())
}

/// Errors that mark the drawn point (not the configuration) as bad.
fn is_degenerate_sample(err: &WqpError) -> bool {
    matches!(
        err,
        WqpError::ThetaZeroDenominator { .. }
            | WqpError::PoleHit { .. }
            | WqpError::SamplePointDegenerate { .. }
    )
}

/// Frobenius norm of a dense complex matrix.
fn dfrob(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Reduce an integer combination of indices into `0..n`.
fn modn(v: i64, n: u32) -> u32 {
    v.rem_euclid(i64::from(n)) as u32
}

/// Theta with both characteristics one half.
fn theta_hh(arg: Complex64, tau: Complex64, policy: &TruncationPolicy) -> Result<Complex64> {
    theta_char(ThetaChar::half_half(), arg, tau, policy)
}

/// All lattice-weight matrix elements `S^{a b}` at one argument, indexed
/// `[a][b]`, via the closed product form.
fn s_table(
    xi: Complex64,
    zeta: Complex64,
    tau: Complex64,
    n: u32,
    policy: &TruncationPolicy,
) -> Result<Vec<Vec<Complex64>>> {
    let mut table = vec![vec![ZERO; n as usize]; n as usize];
    for a in 0..n {
        for b in 0..n {
            table[a as usize][b as usize] = s_element_closed(a, b, xi, zeta, tau, n, policy)?;
        }
    }
    Ok(table)
}

/// Evaluate one property at the sample point drawn for index `idx`.
fn sample_outcome(
    id: PropertyId,
    params: &AlgebraParams,
    idx: usize,
    seed: u64,
    policy: &TruncationPolicy,
) -> Result<SampleOutcome> {
    let mut rng = sample_rng(seed, idx);
    let z = sample_point(&mut rng, id.window());
    let dim = params.n as usize;
    match id {
        PropertyId::Ybe => {
            let w = sample_point(&mut rng, ArgWindow::OffCut);
            require_branch_safe(w.arg() - z.arg(), "three-site quotient")?;
            let r12 = build_r(z, params, policy)?.embed12();
            let r13 = build_r(w, params, policy)?.embed13();
            let r23 = build_r(w / z, params, policy)?.embed23();
            let lhs = &r12 * &r13 * &r23;
            let rhs = &r23 * &r13 * &r12;
            Ok(SampleOutcome {
                residual: dfrob(&(lhs - rhs)),
                condition: None,
                alt_residual: None,
            })
        }
        PropertyId::Unitarity => {
            let direct = build_r(z, params, policy)?;
            let mirrored = build_r(z.inv(), params, policy)?.swap_sites();
            let product = direct.matmul(&mirrored);
            let residual = product.sub(&ComplexTensor4::identity(dim)).frobenius();
            let (_, condition) = direct.inverse_with_condition()?;
            Ok(SampleOutcome {
                residual,
                condition: Some(condition),
                alt_residual: None,
            })
        }
        PropertyId::Crossing => {
            require_branch_safe(
                z.arg() + f64::from(params.n) * params.q.arg(),
                "crossing shift",
            )?;
            let qn = params.q.powu(params.n);
            let left = build_r(z, params, policy)?.transpose_second();
            let right = build_r((z * qn).inv(), params, policy)?
                .swap_sites()
                .transpose_second();
            let residual = left
                .matmul(&right)
                .sub(&ComplexTensor4::identity(dim))
                .frobenius();
            Ok(SampleOutcome {
                residual,
                condition: None,
                alt_residual: None,
            })
        }
        PropertyId::Antisymmetry => {
            let gauges = GaugeMatrices::new(params.n);
            let site_id = DMatrix::<Complex64>::identity(dim, dim);
            let left = ComplexTensor4::from_kron(&gauges.g_inv(), &site_id);
            let right = ComplexTensor4::from_kron(&gauges.g, &site_id);
            let conjugated = left.matmul(&build_r(z, params, policy)?).matmul(&right);
            let negated = build_r(-z, params, policy)?;
            let omega = params.omega();
            let residual = negated.sub(&conjugated.scale(omega)).frobenius();
            let alt = negated.sub(&conjugated.scale(omega.inv())).frobenius();
            Ok(SampleOutcome {
                residual,
                condition: None,
                alt_residual: Some(alt),
            })
        }
        PropertyId::Quasiperiodicity => {
            let drift = z.arg() + params.p.arg() / 2.0;
            if !(drift > -std::f64::consts::PI + BRANCH_MARGIN && drift < -BRANCH_MARGIN) {
                return Err(WqpError::SamplePointDegenerate {
                    context: format!(
                        "half-period shift: continued argument {drift:.4} leaves the lower sheet"
                    ),
                });
            }
            let gauges = GaugeMatrices::new(params.n);
            let site_id = DMatrix::<Complex64>::identity(dim, dim);
            let sandwich = gauges.g_half_h_g_half();
            let sandwich_inv =
                sandwich
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| WqpError::SamplePointDegenerate {
                        context: "gauge sandwich is numerically singular".into(),
                    })?;
            let conj = ComplexTensor4::from_kron(&sandwich, &site_id);
            let conj_inv = ComplexTensor4::from_kron(&sandwich_inv, &site_id);
            let lhs = build_rhat(-(params.p.sqrt() * z), params, policy)?;
            let (inner_inv, condition) = build_rhat(z.inv(), params, policy)?
                .swap_sites()
                .inverse_with_condition()?;
            let rhs = conj_inv.matmul(&inner_inv).matmul(&conj);
            Ok(SampleOutcome {
                residual: lhs.sub(&rhs).frobenius(),
                condition: Some(condition),
                alt_residual: None,
            })
        }
        PropertyId::InvTranspose => {
            require_branch_safe(
                z.arg() + f64::from(params.n) * params.q.arg(),
                "inverse-transpose shift",
            )?;
            let (left_inv, cond_left) = build_r(z, params, policy)?
                .transpose_second()
                .inverse_with_condition()?;
            let qn = params.q.powu(params.n);
            let (shift_inv, cond_shift) =
                build_r(qn * z, params, policy)?.inverse_with_condition()?;
            let residual = left_inv.sub(&shift_inv.transpose_second()).frobenius();
            Ok(SampleOutcome {
                residual,
                condition: Some(cond_left.max(cond_shift)),
                alt_residual: None,
            })
        }
        PropertyId::SIdentity1 => {
            let (zeta, tau) = params.additive();
            let xi = z.ln() / (I * PI);
            let n = i64::from(params.n);
            let forward = s_table(xi, zeta, tau, params.n, policy)?;
            let backward = s_table(-xi, zeta, tau, params.n, policy)?;
            let den = theta_hh(zeta, tau, policy)?;
            let num = theta_hh(xi + zeta, tau, policy)? * theta_hh(-xi + zeta, tau, policy)?;
            if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
                return Err(WqpError::ThetaZeroDenominator { modulus: den.norm() });
            }
            let diagonal = num / (den * den);
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let mut lhs = ZERO;
                    for k in 0..n {
                        let a = forward[modn(-i - k, params.n) as usize]
                            [modn(i - k, params.n) as usize];
                        let b = backward[modn(-j - k, params.n) as usize]
                            [modn(k - j, params.n) as usize];
                        lhs += a * b;
                    }
                    let rhs = if i == j { diagonal } else { ZERO };
                    worst = worst.max((lhs - rhs).norm());
                }
            }
            Ok(SampleOutcome {
                residual: worst,
                condition: None,
                alt_residual: None,
            })
        }
        PropertyId::SIdentity2 => {
            let (zeta, tau) = params.additive();
            let xi = z.ln() / (I * PI);
            let n = i64::from(params.n);
            let shifted = -xi - f64::from(params.n) * zeta;
            let forward = s_table(xi, zeta, tau, params.n, policy)?;
            let backward = s_table(shifted, zeta, tau, params.n, policy)?;
            let den = theta_hh(zeta, tau, policy)?;
            let num = theta_hh(xi, tau, policy)? * theta_hh(shifted, tau, policy)?;
            if den.norm() < THETA_DEGENERACY_FLOOR * num.norm().max(1.0) {
                return Err(WqpError::ThetaZeroDenominator { modulus: den.norm() });
            }
            let diagonal = num / (den * den);
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let mut lhs = ZERO;
                    for k in 0..n {
                        let a = forward[modn(i - k, params.n) as usize][0];
                        let b = backward[modn(j - k, params.n) as usize][0];
                        lhs += a * b;
                    }
                    let rhs = if i == j { diagonal } else { ZERO };
                    worst = worst.max((lhs - rhs).norm());
                }
            }
            Ok(SampleOutcome {
                residual: worst,
                condition: None,
                alt_residual: None,
            })
        }
    }
}

/// Sweep one property over the plan's sample stream and aggregate the
/// residuals.  Degenerate draws are skipped and counted; the check passes
/// iff at least one sample was admissible and the largest residual stays
/// below `tolerance`.
pub fn verify_property(
    id: PropertyId,
    params: &AlgebraParams,
    plan: &SamplePlan,
    policy: &TruncationPolicy,
    tolerance: f64,
) -> Result<CheckReport> {
    let outcomes = exec::try_map_indexed(plan.exec, plan.count, |idx| {
        match sample_outcome(id, params, idx, plan.seed, policy) {
            Ok(outcome) => Ok(Some(outcome)),
            Err(err) if is_degenerate_sample(&err) => Ok(None),
            Err(err) => Err(err),
        }
    })?;
    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let admitted: Vec<SampleOutcome> = outcomes.into_iter().flatten().collect();
    let residuals: Vec<f64> = admitted.iter().map(|o| o.residual).collect();
    let conditions: Vec<f64> = admitted.iter().filter_map(|o| o.condition).collect();
    let mut report = CheckReport::from_samples(id.name(), &residuals, skipped, tolerance, &conditions);
    if id == PropertyId::Antisymmetry {
        let alt_max = admitted
            .iter()
            .filter_map(|o| o.alt_residual)
            .fold(0.0, f64::max);
        report.sign_flip_suspected =
            Some(!report.pass && !admitted.is_empty() && alt_max < tolerance);
    }
    Ok(report)
}

/// Sweep a scalar residual function over the plan's sample stream.
fn sweep_scalar<F>(
    name: &str,
    plan: &SamplePlan,
    window: ArgWindow,
    tolerance: f64,
    eval: F,
) -> Result<CheckReport>
where
    F: Fn(Complex64) -> Result<f64> + Send + Sync,
{
    let outcomes = exec::try_map_indexed(plan.exec, plan.count, |idx| {
        let mut rng = sample_rng(plan.seed, idx);
        let z = sample_point(&mut rng, window);
        match eval(z) {
            Ok(residual) => Ok(Some(residual)),
            Err(err) if is_degenerate_sample(&err) => Ok(None),
            Err(err) => Err(err),
        }
    })?;
    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let residuals: Vec<f64> = outcomes.into_iter().flatten().collect();
    Ok(CheckReport::from_samples(name, &residuals, skipped, tolerance, &[]))
}

/// Run all eight identity checks against one parameter set.
pub fn suite_rmatrix(
    params: &AlgebraParams,
    plan: &SamplePlan,
    policy: &TruncationPolicy,
    tolerance: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("rmatrix", params.n, plan.seed);
    for id in PropertyId::ALL {
        report.push(verify_property(id, params, plan, policy, tolerance)?);
    }
    Ok(report)
}

/// Finite-difference step for the level derivative of `ln T`.
const LEVEL_FD_STEP: f64 = 1e-5;

/// Checks of the critical-level collapse: the quadratic exchange scalar is
/// one, the exchange kernel is the identity, the level derivative of
/// `ln T` matches its analytic form, and the two evaluation routes of the
/// structure function agree.  Requires `c = -n`.
pub fn suite_critical(
    params: &AlgebraParams,
    plan: &SamplePlan,
    policy: &TruncationPolicy,
) -> Result<VerificationReport> {
    let critical_level = Complex64::new(-f64::from(params.n), 0.0);
    if (params.c - critical_level).norm() > 1e-12 {
        return Err(WqpError::InvalidParameter(format!(
            "critical suite requires c = -n, got c = {}",
            params.c
        )));
    }
    let mut report = VerificationReport::new("critical", params.n, plan.seed);
    report.push(sweep_scalar("T_IS_UNITY", plan, ArgWindow::OffCut, 1e-9, |z| {
        Ok((big_t(z, params, policy)? - 1.0).norm())
    })?);
    let dim = params.n as usize;
    report.push(sweep_scalar("M_IS_IDENTITY", plan, ArgWindow::OffCut, 1e-8, |z| {
        Ok(big_m_matrix(z, params, policy)?
            .sub(&ComplexTensor4::identity(dim))
            .frobenius())
    })?);
    let step = Complex64::new(LEVEL_FD_STEP, 0.0);
    let upper = AlgebraParams::new(params.n, params.q, params.p, params.c + step)?;
    let lower = AlgebraParams::new(params.n, params.q, params.p, params.c - step)?;
    report.push(sweep_scalar(
        "DLNT_DC_MATCHES",
        plan,
        ArgWindow::OffCut,
        1e-6,
        |z| {
            let fd = (big_t(z, &upper, policy)?.ln() - big_t(z, &lower, policy)?.ln())
                / (2.0 * LEVEL_FD_STEP);
            let analytic = dln_t_dc_critical(z, params, policy)?;
            Ok((fd - analytic).norm())
        },
    )?);
    report.push(sweep_scalar(
        "F_DUAL_ROUTE",
        plan,
        ArgWindow::OffCut,
        1e-9,
        |z| Ok((dln_t_dc_critical(z, params, policy)? - f_classical(z, params, policy)?).norm()),
    )?);
    Ok(report)
}

/// Cross-validate the double-sum mode coefficients against the closed
/// form, relatively, over every index pair and `0 < |r| <= r_max`.
pub fn suite_etasum(
    n: u32,
    q: Complex64,
    r_max: usize,
    policy: &TruncationPolicy,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("etasum", n, 0);
    let mut residuals = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let table = eta_double_sum(n, q, i, j, r_max, policy)?;
            for r in 1..=r_max as i64 {
                for signed in [r, -r] {
                    let closed = coeff_k0_s(n, q, i, j, -signed)?;
                    let diff = (table.coeff(signed) - closed).norm();
                    let relative = if closed.norm() > 0.0 {
                        diff / closed.norm()
                    } else {
                        diff
                    };
                    residuals.push(relative);
                }
            }
        }
    }
    report.push(CheckReport::from_samples(
        "ETA_DOUBLE_SUM",
        &residuals,
        0,
        1e-10,
        &[],
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmatrix::build_rhat_star;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    fn params(n: u32, q: Complex64, p: Complex64, c_level: Complex64) -> AlgebraParams {
        AlgebraParams::new(n, q, p, c_level).unwrap()
    }

    #[test]
    fn property_names_round_trip() {
        for id in PropertyId::ALL {
            assert_eq!(PropertyId::parse(id.name()), Some(id));
        }
        assert_eq!(PropertyId::parse("ybe"), Some(PropertyId::Ybe));
        assert_eq!(PropertyId::parse("s_identity_2"), Some(PropertyId::SIdentity2));
        assert_eq!(PropertyId::parse("nope"), None);
    }

    #[test]
    fn full_sweep_passes_for_small_ranks() {
        for (n, q) in [(2u32, c(0.4, 0.0)), (3u32, c(0.4, 0.05))] {
            let params = params(n, q, c(0.09, 0.0), c(0.0, 0.0));
            let plan = SamplePlan::new(4, 7);
            let report = suite_rmatrix(&params, &plan, &policy(), DEFAULT_TOLERANCE).unwrap();
            assert!(report.pass, "n={n}: {}", report.render_human());
            for check in &report.checks {
                assert_eq!(check.samples + check.skipped, 4, "lost draw in {}", check.name);
                assert!(check.samples >= 1, "no admissible draw in {}", check.name);
            }
            assert_eq!(report.checks.len(), 8);
        }
    }

    #[test]
    fn unitarity_example_point_is_tight() {
        let params = params(2, c(0.4, 0.0), c(0.09, 0.0), c(0.0, 0.0));
        let z = c(1.3, 0.0);
        let direct = build_r(z, &params, &policy()).unwrap();
        let mirrored = build_r(z.inv(), &params, &policy()).unwrap().swap_sites();
        let residual = direct
            .matmul(&mirrored)
            .sub(&ComplexTensor4::identity(2))
            .frobenius();
        assert!(residual < 1e-9, "residual {residual:e}");
    }

    #[test]
    fn normalized_matrix_obeys_the_inverse_transpose_rule() {
        for (n, q) in [(2u32, c(0.45, 0.0)), (3u32, c(0.4, 0.05))] {
            let params = params(n, q, c(0.09, 0.0), c(0.0, 0.0));
            let qn = q.powu(n);
            for &z in &[c(1.07, 0.21), c(0.91, -0.33)] {
                let (left_inv, _) = build_rhat(z, &params, &policy())
                    .unwrap()
                    .transpose_second()
                    .inverse_with_condition()
                    .unwrap();
                let (shift_inv, _) = build_rhat(qn * z, &params, &policy())
                    .unwrap()
                    .inverse_with_condition()
                    .unwrap();
                let diff = left_inv.sub(&shift_inv.transpose_second()).frobenius();
                assert!(diff < 1e-8, "n={n} z={z}: diff {diff:e}");
            }
        }
    }

    #[test]
    fn star_matrix_at_zero_level_matches_plain() {
        let params = params(2, c(0.4, 0.0), c(0.09, 0.0), c(0.0, 0.0));
        for &z in &[c(1.12, 0.18), c(0.88, -0.27)] {
            let plain = build_rhat(z, &params, &policy()).unwrap();
            let star = build_rhat_star(z, &params, &policy()).unwrap();
            let diff = plain.sub(&star).max_abs();
            assert!(diff < 1e-12, "z={z}: diff {diff:e}");
        }
    }

    #[test]
    fn antisymmetry_pass_reports_no_sign_flip() {
        let params = params(3, c(0.4, 0.0), c(0.09, 0.0), c(0.0, 0.0));
        let plan = SamplePlan::new(4, 21);
        let report =
            verify_property(PropertyId::Antisymmetry, &params, &plan, &policy(), 1e-8).unwrap();
        assert!(report.pass);
        assert_eq!(report.sign_flip_suspected, Some(false));
    }

    #[test]
    fn critical_suite_passes_at_the_critical_level() {
        let params = params(2, c(0.4, 0.0), c(0.09, 0.0), c(-2.0, 0.0));
        let plan = SamplePlan::new(4, 3);
        let report = suite_critical(&params, &plan, &policy()).unwrap();
        assert!(report.pass, "{}", report.render_human());
        let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            ["T_IS_UNITY", "M_IS_IDENTITY", "DLNT_DC_MATCHES", "F_DUAL_ROUTE"]
        );
    }

    #[test]
    fn critical_suite_rejects_off_critical_level() {
        let params = params(2, c(0.4, 0.0), c(0.09, 0.0), c(-1.5, 0.0));
        let plan = SamplePlan::new(2, 3);
        assert!(suite_critical(&params, &plan, &policy()).is_err());
    }

    #[test]
    fn branch_wrapped_draws_are_skipped_not_failed() {
        // A three-site quotient whose continued argument exceeds pi sits on
        // the wrong sheet of the fractional-power prefactor; the screen must
        // reject it before it poisons the sweep.
        let err = require_branch_safe(5.8, "three-site quotient").unwrap_err();
        assert!(is_degenerate_sample(&err));
        assert!(require_branch_safe(2.9, "three-site quotient").is_ok());
    }

    #[test]
    fn etasum_suite_passes() {
        let report = suite_etasum(3, c(0.45, 0.0), 6, &policy()).unwrap();
        assert!(report.pass, "{}", report.render_human());
        assert_eq!(report.checks[0].samples, 4 * 12);
    }
}
