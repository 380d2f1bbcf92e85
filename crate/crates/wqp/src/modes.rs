//! Mode-coefficient tables for the exchange algebra.
//!
//! The deformed generators close on quadratic relations whose structure
//! functions are meromorphic in the ratio variable `x`.  Expanding a
//! structure function on an annulus between two consecutive pole rungs
//! yields a Laurent table, and each table induces the coefficients of the
//! corresponding mode-space bracket.  This module provides:
//!
//! * exact term-by-term Laurent expansion of the classical structure
//!   functions (critical level and Abelian-limit families) in any sector,
//!   with the averaged treatment of poles sitting on the unit circle;
//! * closed-form mode coefficients as balanced `q`-number ratios, used as
//!   independent oracles for the expansions;
//! * pole ladders (sorted rung lists) for both the classical fraction
//!   series and the factorized quantum exchange function;
//! * sector-correction formulas describing how Laurent coefficients jump
//!   when the expansion annulus crosses a pole rung, for simple poles,
//!   double poles, and arbitrary finite order;
//! * the quantum Taylor machinery for factored products and the assembly
//!   of full mode-coefficient tables in every regime.
//!
//! All expansions here are exact finite algebra plus geometric-series
//! resummation: no numerical truncation enters a Laurent coefficient, so
//! oracle comparisons can be pinned at near machine precision.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{Result, WqpError};
use crate::exec::{self, Exec};
use crate::structure::{e_pair, g_term, MeromorphicProduct};
use crate::theta::{qnum, TruncationPolicy, ONE, PI, ZERO};

/// Relative tolerance for merging coincident product factors.
const FACTOR_MERGE_TOL: f64 = 1e-12;

/// Relative tolerance for grouping pole moduli into one rung.
const RUNG_GROUP_TOL: f64 = 1e-9;

/// Floor below which a resummation denominator counts as degenerate.
const DEGEN_FLOOR: f64 = 1e-12;

/// Relative margin for declaring a deflated factor singular at a pole.
const DEFLATION_TOL: f64 = 1e-10;

/// `q^e` for a (possibly negative) integer exponent.
fn qpow(q: Complex64, e: i64) -> Result<Complex64> {
    let e32 = i32::try_from(e).map_err(|_| {
        WqpError::InvalidParameter(format!("integer exponent {e} exceeds the supported range"))
    })?;
    Ok(q.powi(e32))
}

// ---------------------------------------------------------------------------
// Trapezoidal weight profile
// ---------------------------------------------------------------------------

/// Trapezoidal overlap profile of two composite generators.
///
/// The generator with label `i` is a product of `i` elementary factors at
/// equally spaced shifts, so the bracket of generators `i` and `j` collapses
/// onto a single shift sum weighted by the overlap count
/// `eta(u) = max(0, min(min(i,j), (i+j)/2 - |u|))`
/// over half-integer offsets `u`.  Offsets are handled in doubled form
/// `u2 = 2u`, which keeps everything in integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EtaTrapezoid {
    i: u32,
    j: u32,
}

impl EtaTrapezoid {
    /// Validates `1 <= i, j <= n-1` and builds the profile.
    pub fn new(i: u32, j: u32, n: u32) -> Result<Self> {
        if n < 2 || i == 0 || j == 0 || i > n - 1 || j > n - 1 {
            return Err(WqpError::IndexOutOfRange {
                i: i as usize,
                j: j as usize,
                max: n.saturating_sub(1) as usize,
            });
        }
        Ok(EtaTrapezoid { i, j })
    }

    /// First generator label.
    pub fn i(&self) -> u32 {
        self.i
    }

    /// Second generator label.
    pub fn j(&self) -> u32 {
        self.j
    }

    /// Height at doubled offset `u2 = 2u`; zero off the parity lattice and
    /// outside the support `|u2| <= i + j - 2`.
    pub fn height(&self, u2: i64) -> i64 {
        let ij = i64::from(self.i) + i64::from(self.j);
        if (u2 - ij).rem_euclid(2) != 0 {
            return 0;
        }
        let slope = (ij - u2.abs()) / 2;
        slope.max(0).min(i64::from(self.i.min(self.j)))
    }

    /// The doubled offsets carrying nonzero weight, in increasing order.
    pub fn support(&self) -> Vec<i64> {
        let ij = i64::from(self.i) + i64::from(self.j);
        let mut out = Vec::new();
        let mut u2 = 2 - ij;
        while u2 <= ij - 2 {
            out.push(u2);
            u2 += 2;
        }
        out
    }

    /// Total weight: equals `i * j`.
    pub fn weight_sum(&self) -> i64 {
        self.support().iter().map(|&u2| self.height(u2)).sum()
    }
}

// ---------------------------------------------------------------------------
// Term tables: weighted simple-fraction families
// ---------------------------------------------------------------------------

/// A classical structure function represented as a weighted family of
/// simple fractions `G(x^2 q^s) = x^2 q^s / (1 - x^2 q^s)`, minus the same
/// family in `x^{-2}`.
///
/// The function is `prefactor * (sum_base + sum_tail - mirror)` where the
/// base terms appear once, and each tail term at exponent `s` repeats at
/// `s + 2 n l` for every `l >= 1`.  Weights are split into a standard
/// family and a shifted family with independent multipliers `e1`, `e2`:
/// a rung is considered structurally present when either family carries a
/// nonzero weight, so accidental cancellations between the two (which
/// depend on the integer-part multipliers) never drop a rung.
#[derive(Debug, Clone)]
pub struct TermTable {
    n: u32,
    q: Complex64,
    prefactor: Complex64,
    e1: f64,
    e2: f64,
    std_base: BTreeMap<i64, f64>,
    std_tail: BTreeMap<i64, f64>,
    shift_base: BTreeMap<i64, f64>,
    shift_tail: BTreeMap<i64, f64>,
}

fn add_weight(map: &mut BTreeMap<i64, f64>, s: i64, w: f64) {
    *map.entry(s).or_insert(0.0) += w;
}

fn drop_zeros(map: &mut BTreeMap<i64, f64>) {
    map.retain(|_, w| *w != 0.0);
}

fn build_terms(
    n: u32,
    q: Complex64,
    i: u32,
    j: u32,
    with_shift: bool,
    e1: f64,
    e2: f64,
) -> Result<TermTable> {
    let qn = q.norm();
    if !qn.is_finite() || qn <= 0.0 || qn >= 1.0 {
        return Err(WqpError::DegenerateQ { q });
    }
    let eta = EtaTrapezoid::new(i, j, n)?;
    let mut std_base = BTreeMap::new();
    let mut std_tail = BTreeMap::new();
    let mut shift_base = BTreeMap::new();
    let mut shift_tail = BTreeMap::new();
    let nn = i64::from(n);
    for u2 in eta.support() {
        let h = eta.height(u2) as f64;
        if h == 0.0 {
            continue;
        }
        add_weight(&mut std_base, u2, h);
        add_weight(&mut std_base, u2 + 2, -h / 2.0);
        add_weight(&mut std_base, u2 - 2, -h / 2.0);
        add_weight(&mut std_tail, u2, 2.0 * h);
        add_weight(&mut std_tail, u2 + 2, -h);
        add_weight(&mut std_tail, u2 - 2, -h);
        if with_shift {
            for (s, w) in [
                (nn + u2, 2.0 * h),
                (nn + u2 + 2, -h),
                (nn + u2 - 2, -h),
            ] {
                add_weight(&mut shift_base, s, w);
                add_weight(&mut shift_tail, s, w);
            }
        }
    }
    drop_zeros(&mut std_base);
    drop_zeros(&mut std_tail);
    drop_zeros(&mut shift_base);
    drop_zeros(&mut shift_tail);
    Ok(TermTable {
        n,
        q,
        prefactor: -2.0 * q.ln(),
        e1,
        e2,
        std_base,
        std_tail,
        shift_base,
        shift_tail,
    })
}

/// Term table of the critical-level structure function for the generator
/// pair `(i, j)`: the trapezoid-weighted shift sum of the elementary
/// fraction series.
pub fn critical_terms(n: u32, q: Complex64, i: u32, j: u32) -> Result<TermTable> {
    build_terms(n, q, i, j, false, 1.0, 0.0)
}

/// Term table of the odd-exponent Abelian-limit structure function for
/// the pair `(i, j)`, in the reabsorbed normalization that shares the
/// `-2 ln q` prefactor with the critical table.  The two fraction families
/// carry the integer-part weights `e_pair(n * m_int)`.
pub fn limit_odd_terms(n: u32, q: Complex64, i: u32, j: u32, m_int: i64) -> Result<TermTable> {
    if m_int == 0 {
        return Err(WqpError::InvalidParameter(
            "winding integer must be nonzero".into(),
        ));
    }
    let (a, b) = e_pair(i64::from(n) * m_int);
    build_terms(n, q, i, j, true, a as f64, b as f64)
}

impl TermTable {
    /// Site dimension.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Deformation parameter.
    pub fn q(&self) -> Complex64 {
        self.q
    }

    /// Global prefactor `-2 ln q`.
    pub fn prefactor(&self) -> Complex64 {
        self.prefactor
    }

    fn weight_base(&self, s: i64) -> f64 {
        self.e1 * self.std_base.get(&s).copied().unwrap_or(0.0)
            + self.e2 * self.shift_base.get(&s).copied().unwrap_or(0.0)
    }

    fn weight_tail(&self, s: i64) -> f64 {
        self.e1 * self.std_tail.get(&s).copied().unwrap_or(0.0)
            + self.e2 * self.shift_tail.get(&s).copied().unwrap_or(0.0)
    }

    fn base_support(&self) -> BTreeSet<i64> {
        self.std_base
            .keys()
            .chain(self.shift_base.keys())
            .copied()
            .collect()
    }

    fn tail_support(&self) -> BTreeSet<i64> {
        self.std_tail
            .keys()
            .chain(self.shift_tail.keys())
            .copied()
            .collect()
    }

    /// True when a structurally present term sits at exponent zero, i.e.
    /// the function carries a pole pair on the unit circle.
    pub fn has_unit_rung(&self) -> bool {
        self.base_support().contains(&0)
    }

    /// The first `count` positive doubled pole exponents `b`, sorted
    /// increasingly.  The corresponding rungs sit at `|x| = |q|^{-b/2}`
    /// outward and mirror to `|q|^{b/2}` inward.
    pub(crate) fn boundary_exponents(&self, count: usize) -> Vec<i64> {
        let mut set: BTreeSet<i64> = BTreeSet::new();
        for &s in &self.base_support() {
            if s != 0 {
                set.insert(s.abs());
            }
        }
        let tails: Vec<i64> = self.tail_support().into_iter().collect();
        if let Some(&s0min) = tails.iter().min() {
            let n2 = 2 * i64::from(self.n);
            let mut l = 1i64;
            loop {
                for &s0 in &tails {
                    let v = s0 + n2 * l;
                    if v != 0 {
                        set.insert(v.abs());
                    }
                }
                if set.len() >= count {
                    let kth = *set.iter().nth(count - 1).expect("length checked");
                    if s0min + n2 * (l + 1) > kth {
                        break;
                    }
                }
                l += 1;
                if l > 100_000 {
                    break;
                }
            }
        }
        set.into_iter().take(count).collect()
    }

    /// Net weight of the rung at doubled exponent `b >= 0`: base terms at
    /// `s = +-b` (counted once for `b = 0`) plus every tail instance
    /// landing on that exponent.
    pub(crate) fn rung_weight(&self, b: i64) -> f64 {
        let mut w = self.weight_base(b);
        if b != 0 {
            w += self.weight_base(-b);
        }
        let n2 = 2 * i64::from(self.n);
        let targets: &[i64] = if b == 0 { &[0] } else { &[b, -b] };
        for &s0 in &self.tail_support() {
            for &t in targets {
                let d = t - s0;
                if d >= n2 && d % n2 == 0 {
                    w += self.weight_tail(s0);
                }
            }
        }
        w
    }

    /// Direct pointwise evaluation of the represented function, truncating
    /// the tail families once they fall below the policy threshold.
    pub fn eval(&self, x: Complex64, policy: &TruncationPolicy) -> Result<Complex64> {
        policy.validate()?;
        if x.norm() == 0.0 || !x.is_finite() {
            return Err(WqpError::InvalidParameter(format!(
                "argument must be finite and nonzero, got {x}"
            )));
        }
        let v = x * x;
        let half = |v: Complex64| -> Result<Complex64> {
            let mut acc = ZERO;
            for &s in &self.base_support() {
                let w = self.weight_base(s);
                if w == 0.0 {
                    continue;
                }
                acc += w * g_term(v * qpow(self.q, s)?)?;
            }
            let step = qpow(self.q, 2 * i64::from(self.n))?;
            let tails: Vec<(i64, f64)> = self
                .tail_support()
                .into_iter()
                .map(|s| (s, self.weight_tail(s)))
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let mut scale = step;
            for _ in 0..policy.max_terms {
                let mut maxmag: f64 = 0.0;
                for &(s, w) in &tails {
                    let u = v * scale * qpow(self.q, s)?;
                    maxmag = maxmag.max(u.norm());
                    acc += w * g_term(u)?;
                }
                if maxmag < policy.eps_trunc {
                    return Ok(acc);
                }
                scale *= step;
            }
            Err(WqpError::TruncationBudgetExceeded {
                terms: policy.max_terms,
                max_terms: policy.max_terms,
            })
        };
        Ok(self.prefactor * (half(v)? - half(v.inv())?))
    }
}

// ---------------------------------------------------------------------------
// Laurent tables and sector expansion
// ---------------------------------------------------------------------------

/// Laurent coefficients of a structure function over one expansion
/// annulus: `f(x) = sum_r coeffs[r] * x^{2r}` for `|x|` strictly inside
/// `annulus`.  For sector `0` of a function with a unit-circle pole pair
/// the table is the two-sided average across that pole (a formal object
/// whose mode coefficients are still well defined), and the recorded
/// annulus degenerates to the inner rim.
#[derive(Debug, Clone)]
pub struct LaurentTable {
    /// Coefficient of `x^{2r}`, keyed by `r`.
    pub coeffs: BTreeMap<i64, Complex64>,
    /// Sector index the expansion belongs to.
    pub sector: usize,
    /// Open annulus of `|x|` on which the partial sums converge to the
    /// function (inner representation for sectors `>= 1`).
    pub annulus: (f64, f64),
}

impl LaurentTable {
    /// Coefficient of `x^{2r}`, zero when outside the stored window.
    pub fn coeff(&self, r: i64) -> Complex64 {
        self.coeffs.get(&r).copied().unwrap_or(ZERO)
    }

    /// Largest stored index.
    pub fn r_max(&self) -> i64 {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    /// Partial sum `sum_r coeffs[r] x^{2r}`.
    pub fn eval(&self, x: Complex64) -> Complex64 {
        let v = x * x;
        let mut acc = ZERO;
        for (&r, &c) in &self.coeffs {
            acc += c * v.powi(r as i32);
        }
        acc
    }

    /// Largest `|coeffs[r] + coeffs[-r]|` over the stored window: zero for
    /// an expansion antisymmetric under `r -> -r`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&r, &c) in &self.coeffs {
            let mirror = self.coeff(-r);
            worst = worst.max((c + mirror).norm());
        }
        worst
    }
}

/// Which geometric expansion a fraction term takes on a given annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Inside,
    Outside,
    Averaged,
}

fn classify_direct(sector: usize, pos_b: &[i64], s: i64) -> Result<Side> {
    if sector == 0 {
        return Ok(if s >= 1 {
            Side::Inside
        } else if s <= -1 {
            Side::Outside
        } else {
            Side::Averaged
        });
    }
    let b_out = pos_b[sector - 1];
    let b_in = pos_b[sector];
    if s >= -b_out {
        Ok(Side::Inside)
    } else if s <= -b_in {
        Ok(Side::Outside)
    } else {
        Err(WqpError::NonconvergentSeries {
            context: format!("exponent {s} falls strictly between sector boundaries"),
        })
    }
}

fn classify_inverse(sector: usize, pos_b: &[i64], s: i64) -> Result<Side> {
    if sector == 0 {
        return Ok(if s >= 1 {
            Side::Inside
        } else if s <= -1 {
            Side::Outside
        } else {
            Side::Averaged
        });
    }
    let b_out = pos_b[sector - 1];
    let b_in = pos_b[sector];
    if s <= b_out {
        Ok(Side::Outside)
    } else if s >= b_in {
        Ok(Side::Inside)
    } else {
        Err(WqpError::NonconvergentSeries {
            context: format!("exponent {s} falls strictly between sector boundaries"),
        })
    }
}

/// Raw (prefactor-free) Laurent coefficient of `x^{2r}` for the table's
/// sector-`k` annulus.
fn sector_coefficient(table: &TermTable, sector: usize, pos_b: &[i64], r: i64) -> Result<Complex64> {
    let q = table.q;
    let n2 = 2 * i64::from(table.n);
    let mut acc = ZERO;
    for &s in &table.base_support() {
        let w = table.weight_base(s);
        if w == 0.0 {
            continue;
        }
        // Direct family G(x^2 q^s) with weight w.
        match classify_direct(sector, pos_b, s)? {
            Side::Inside => {
                if r >= 1 {
                    acc += w * qpow(q, s * r)?;
                }
            }
            Side::Outside => {
                if r <= 0 {
                    acc -= w * qpow(q, s * r)?;
                }
            }
            Side::Averaged => {
                if r >= 1 {
                    acc += 0.5 * w;
                } else {
                    acc -= 0.5 * w;
                }
            }
        }
        // Inverse family G(x^{-2} q^s) with weight -w.
        match classify_inverse(sector, pos_b, s)? {
            Side::Inside => {
                if r <= -1 {
                    acc -= w * qpow(q, -s * r)?;
                }
            }
            Side::Outside => {
                if r >= 0 {
                    acc += w * qpow(q, -s * r)?;
                }
            }
            Side::Averaged => {
                if r >= 0 {
                    acc += 0.5 * w;
                } else {
                    acc -= 0.5 * w;
                }
            }
        }
    }
    for &s0 in &table.tail_support() {
        let w = table.weight_tail(s0);
        if w == 0.0 {
            continue;
        }
        // Direct tail instances all sit at positive exponents: inside.
        if r >= 1 {
            let t = qpow(q, n2 * r)?;
            let denom = ONE - t;
            if denom.norm() < DEGEN_FLOOR * t.norm().max(1.0) {
                return Err(WqpError::DegenerateQ { q });
            }
            acc += w * qpow(q, s0 * r)? * t / denom;
        }
        // Inverse tail: the instances up to the sector's outer boundary
        // have been crossed (outside), the rest resum geometrically.
        let l_out = if sector == 0 {
            0
        } else {
            (pos_b[sector - 1] - s0).div_euclid(n2).max(0)
        };
        if r >= 0 {
            for l in 1..=l_out {
                acc += w * qpow(q, -(s0 + n2 * l) * r)?;
            }
        }
        if r <= -1 {
            let start = l_out + 1;
            let t = qpow(q, -n2 * r)?;
            let denom = ONE - t;
            if denom.norm() < DEGEN_FLOOR * t.norm().max(1.0) {
                return Err(WqpError::DegenerateQ { q });
            }
            acc -= w * qpow(q, -(s0 + n2 * start) * r)? / denom;
        }
    }
    Ok(acc)
}

/// Exact Laurent table of a classical term table on its sector-`k`
/// annulus, for `|r| <= r_max`.
///
/// Sector `0` straddles the unit circle; terms whose pole sits exactly on
/// it contribute the two-sided average of their inner and outer
/// expansions, which is the symmetrized-contour prescription.  Sectors
/// `k >= 1` are honest annuli between consecutive pole rungs, counted
/// moving inward from the unit circle; the mirrored outward tables follow
/// from the antisymmetry of the function under `x -> 1/x`.
pub fn sector_laurent(
    table: &TermTable,
    sector: usize,
    r_max: usize,
    policy: &TruncationPolicy,
) -> Result<LaurentTable> {
    policy.validate()?;
    let pos_b = table.boundary_exponents(sector + 2);
    if pos_b.len() < sector + 2 {
        return Err(WqpError::SectorOutOfRange {
            k: sector,
            max: pos_b.len().saturating_sub(2),
        });
    }
    let mut coeffs = BTreeMap::new();
    let rm = r_max as i64;
    for r in -rm..=rm {
        let a = sector_coefficient(table, sector, &pos_b, r)?;
        let val = table.prefactor * a;
        if !val.is_finite() {
            return Err(WqpError::NonconvergentSeries {
                context: format!("sector {sector} coefficient overflowed at r = {r}"),
            });
        }
        coeffs.insert(r, val);
    }
    let modq = table.q.norm();
    let annulus = if sector == 0 {
        if table.has_unit_rung() {
            (modq.powf(pos_b[0] as f64 / 2.0), 1.0)
        } else {
            (
                modq.powf(pos_b[0] as f64 / 2.0),
                modq.powf(-(pos_b[0] as f64) / 2.0),
            )
        }
    } else {
        (
            modq.powf(pos_b[sector] as f64 / 2.0),
            modq.powf(pos_b[sector - 1] as f64 / 2.0),
        )
    };
    Ok(LaurentTable {
        coeffs,
        sector,
        annulus,
    })
}

/// The trapezoid-weighted double-sum expansion of the critical structure
/// function for the pair `(i, j)` on the sector-0 annulus.
///
/// The closed form appears with mirrored index: the coefficient of
/// `x^{2r}` equals the closed-form mode coefficient evaluated at `-r`.
pub fn eta_double_sum(
    n: u32,
    q: Complex64,
    i: u32,
    j: u32,
    r_max: usize,
    policy: &TruncationPolicy,
) -> Result<LaurentTable> {
    let table = critical_terms(n, q, i, j)?;
    sector_laurent(&table, 0, r_max, policy)
}

// ---------------------------------------------------------------------------
// Closed-form mode coefficients
// ---------------------------------------------------------------------------

/// Closed-form critical mode coefficient for the elementary generator:
/// `-2 ln q (q - q^{-1}) [(n-1) r][r] / [n r]`, vanishing at `r = 0`.
pub fn coeff_k0_t(n: u32, q: Complex64, r: i64) -> Result<Complex64> {
    coeff_k0_s(n, q, 1, 1, r)
}

/// Closed-form critical mode coefficient for the generator pair `(i, j)`:
/// `-2 ln q (q - q^{-1}) [(n - max) r][min r] / [n r]`, vanishing at
/// `r = 0` by the analytic limit.
pub fn coeff_k0_s(n: u32, q: Complex64, i: u32, j: u32, r: i64) -> Result<Complex64> {
    EtaTrapezoid::new(i, j, n)?;
    if r == 0 {
        return Ok(ZERO);
    }
    let mx = i64::from(i.max(j));
    let mn = i64::from(i.min(j));
    let nn = i64::from(n);
    let num = qnum((nn - mx) * r, q)? * qnum(mn * r, q)?;
    let den = qnum(nn * r, q)?;
    if den.norm() < DEGEN_FLOOR * num.norm().max(1.0) {
        return Err(WqpError::DegenerateQ { q });
    }
    let pref = -2.0 * q.ln() * (q - q.inv());
    Ok(pref * num / den)
}

/// Closed-form Abelian-limit mode coefficient for the pair `(i, j)` at
/// nonzero integer exponent `h`, in the reabsorbed normalization.
///
/// Even `h` reduces exactly to the critical table.  Odd `h` carries the
/// two integer-part weights of `e_pair(n * m_int)`; for `i + j > n` an
/// extra balanced-number term without the `[n r]` denominator appears,
/// vanishing continuously at `i + j = n`.
pub fn coeff_h(
    n: u32,
    q: Complex64,
    m_int: i64,
    h: i64,
    i: u32,
    j: u32,
    r: i64,
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
    if h.rem_euclid(2) == 0 {
        return coeff_k0_s(n, q, i, j, r);
    }
    EtaTrapezoid::new(i, j, n)?;
    if r == 0 {
        return Ok(ZERO);
    }
    let (e1, e2) = e_pair(i64::from(n) * m_int);
    let (e1, e2) = (e1 as f64, e2 as f64);
    let nn = i64::from(n);
    let mx = i64::from(i.max(j));
    let mn = i64::from(i.min(j));
    let den = qnum(nn * r, q)?;
    let num1 = qnum((nn - mx) * r, q)? * qnum(mn * r, q)?;
    let num2 = qnum(i64::from(i) * r, q)? * qnum(i64::from(j) * r, q)?;
    if den.norm() < DEGEN_FLOOR * num1.norm().max(num2.norm()).max(1.0) {
        return Err(WqpError::DegenerateQ { q });
    }
    let mut val = (e1 * num1 - e2 * num2) / den;
    if i64::from(i) + i64::from(j) > nn {
        val -= e2 * qnum((nn - i64::from(i) - i64::from(j)) * r, q)?;
    }
    let pref = -2.0 * q.ln() * (q - q.inv());
    Ok(pref * val)
}

/// Proportionality constant between the literal even-exponent limit
/// function and the critical structure function:
/// `-n^2 m (n m + 1) h / 2`.  The reabsorbed tables divide it out.
pub fn limit_even_scale(n: u32, m_int: i64, h: i64) -> f64 {
    let nn = i64::from(n);
    -((nn * nn * m_int * (nn * m_int + 1) * h) as f64) / 2.0
}

// ---------------------------------------------------------------------------
// Pole ladders
// ---------------------------------------------------------------------------

/// One pole of a structure function, located in the `x^2` plane.
#[derive(Debug, Clone)]
pub struct PoleEntry {
    /// Location in the `x^2` variable.
    pub position: Complex64,
    /// Order of the pole.
    pub order: u32,
}

/// All poles sharing one `|x|` modulus.
#[derive(Debug, Clone)]
pub struct PoleRung {
    /// Common modulus of the rung in the `x` variable.
    pub modulus: f64,
    /// Poles on the rung; crossing it applies all their corrections
    /// simultaneously.
    pub poles: Vec<PoleEntry>,
}

/// A sorted ladder of pole rungs delimiting the expansion sectors.
///
/// Mirror ladders (classical structure functions, which are odd under
/// `x -> 1/x`) list rungs outward from the unit circle; each listed rung
/// has an implicit inward image.  Disk ladders (factored quantum
/// products) list every rung by increasing modulus starting from the
/// Taylor disk around the origin.
#[derive(Debug, Clone)]
pub struct PoleLadder {
    rungs: Vec<PoleRung>,
    mirror: bool,
}

impl PoleLadder {
    /// Builds a ladder from explicit rungs, sorting by modulus.
    pub fn from_rungs(mut rungs: Vec<PoleRung>, mirror: bool) -> Self {
        rungs.sort_by(|a, b| a.modulus.total_cmp(&b.modulus));
        PoleLadder { rungs, mirror }
    }

    /// The sorted rungs.
    pub fn rungs(&self) -> &[PoleRung] {
        &self.rungs
    }

    /// Number of rungs.
    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    /// True when the ladder stores no rungs.
    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    /// Whether rungs mirror through the unit circle.
    pub fn mirror(&self) -> bool {
        self.mirror
    }

    /// The open annulus of `|x|` labelled by `sector`, in the outward
    /// orientation for mirror ladders and outward from the origin for
    /// disk ladders.
    pub fn annulus(&self, sector: usize) -> Result<(f64, f64)> {
        let mut bounds: Vec<f64> = Vec::with_capacity(self.rungs.len() + 1);
        if self.mirror {
            if self
                .rungs
                .first()
                .map(|r| (r.modulus - 1.0).abs() <= RUNG_GROUP_TOL)
                .unwrap_or(false)
            {
                // unit rung present: it is itself the first boundary
            } else if let Some(first) = self.rungs.first() {
                bounds.push(1.0 / first.modulus);
            }
        } else {
            bounds.push(0.0);
        }
        bounds.extend(self.rungs.iter().map(|r| r.modulus));
        if sector + 1 >= bounds.len() {
            return Err(WqpError::SectorOutOfRange {
                k: sector,
                max: bounds.len().saturating_sub(2),
            });
        }
        Ok((bounds[sector], bounds[sector + 1]))
    }
}

/// Pole ladder of a classical structure function for the pair `(i, j)`:
/// simple poles at `x^2 = q^{-b}` for every structurally present doubled
/// exponent `b`, listed outward.  With `h_odd` the shifted fraction
/// family of the odd Abelian limit contributes its rungs as well,
/// independently of the integer-part weights (which may vanish for
/// particular windings without moving the generic rung positions).
pub fn pole_ladder_classical(
    n: u32,
    q: Complex64,
    i: u32,
    j: u32,
    h_odd: bool,
    rung_count: usize,
) -> Result<PoleLadder> {
    let table = build_terms(n, q, i, j, h_odd, 1.0, 1.0)?;
    let modq = q.norm();
    let mut rungs = Vec::new();
    if table.has_unit_rung() && rungs.len() < rung_count {
        rungs.push(PoleRung {
            modulus: 1.0,
            poles: vec![PoleEntry {
                position: ONE,
                order: 1,
            }],
        });
    }
    let remaining = rung_count.saturating_sub(rungs.len());
    for b in table.boundary_exponents(remaining) {
        rungs.push(PoleRung {
            modulus: modq.powf(-(b as f64) / 2.0),
            poles: vec![PoleEntry {
                position: qpow(q, -b)?,
                order: 1,
            }],
        });
    }
    Ok(PoleLadder::from_rungs(rungs, true))
}

/// Merges coincident factors of a factored product, summing exponents.
fn merge_factors(f: &MeromorphicProduct) -> Vec<(Complex64, i32)> {
    let mut merged: Vec<(Complex64, i32)> = Vec::new();
    for &(c, e) in f.factors() {
        let mut found = false;
        for entry in merged.iter_mut() {
            let scale = entry.0.norm().max(c.norm()).max(1e-300);
            if (entry.0 - c).norm() <= FACTOR_MERGE_TOL * scale {
                entry.1 += e;
                found = true;
                break;
            }
        }
        if !found {
            merged.push((c, e));
        }
    }
    merged.retain(|&(_, e)| e != 0);
    merged
}

/// Pole ladder of a factored product: merged factors with net negative
/// exponent become poles of that order at `x^2 = 1/c`, grouped into rungs
/// of equal `|x|` modulus and sorted increasingly from the origin.
pub fn pole_ladder_quantum(f: &MeromorphicProduct) -> Result<PoleLadder> {
    let mut poles: Vec<(f64, PoleEntry)> = Vec::new();
    for (c, e) in merge_factors(f) {
        if e < 0 && c.norm() > 0.0 {
            let modulus = c.norm().powf(-0.5);
            poles.push((
                modulus,
                PoleEntry {
                    position: c.inv(),
                    order: (-e) as u32,
                },
            ));
        }
    }
    poles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rungs: Vec<PoleRung> = Vec::new();
    for (modulus, entry) in poles {
        match rungs.last_mut() {
            Some(last) if modulus <= last.modulus * (1.0 + RUNG_GROUP_TOL) => {
                last.poles.push(entry);
            }
            _ => rungs.push(PoleRung {
                modulus,
                poles: vec![entry],
            }),
        }
    }
    Ok(PoleLadder { rungs, mirror: false })
}

// ---------------------------------------------------------------------------
// Classical sector corrections
// ---------------------------------------------------------------------------

/// Laurent-level correction accumulated when moving the classical
/// expansion from the sector-0 table to the sector-`k` table: for each
/// crossed rung of doubled exponent `b` the coefficient of `x^{2r}` jumps
/// by `prefactor * W(b) * q^{-b r}`, where `W(b)` is the rung's net term
/// weight.  Crossing a unit-circle rung contributes its `W(0)` once,
/// turning the averaged table into the honest inner expansion.  Crossing
/// down and back up cancels exactly, and the sum over the first `k` rungs
/// telescopes the sector tables into one another.
pub fn delta_correction_classical(
    ladder: &PoleLadder,
    k: usize,
    source: &TermTable,
    r: i64,
) -> Result<Complex64> {
    if k == 0 {
        return Ok(ZERO);
    }
    let unit = source.has_unit_rung();
    let crossed = k + usize::from(unit);
    if ladder.rungs.len() < crossed {
        return Err(WqpError::SectorOutOfRange {
            k,
            max: ladder.rungs.len().saturating_sub(usize::from(unit)),
        });
    }
    let pos_b = source.boundary_exponents(k);
    if pos_b.len() < k {
        return Err(WqpError::SectorOutOfRange { k, max: pos_b.len() });
    }
    let modq = source.q.norm();
    let check = |rung_idx: usize, expected: f64| -> Result<()> {
        let got = ladder.rungs[rung_idx].modulus;
        if (got - expected).abs() > RUNG_GROUP_TOL * expected.max(1.0) {
            return Err(WqpError::InvalidParameter(format!(
                "ladder rung {rung_idx} at modulus {got} does not match the source term table \
                 (expected {expected})"
            )));
        }
        Ok(())
    };
    let mut acc = ZERO;
    if unit {
        check(0, 1.0)?;
        acc += Complex64::new(source.rung_weight(0), 0.0);
    }
    for (m, &b) in pos_b.iter().enumerate().take(k) {
        check(m + usize::from(unit), modq.powf(-(b as f64) / 2.0))?;
        acc += source.rung_weight(b) * qpow(source.q, -b * r)?;
    }
    Ok(source.prefactor * acc)
}

// ---------------------------------------------------------------------------
// Quantum Taylor machinery and sector corrections
// ---------------------------------------------------------------------------

/// Exact Taylor coefficients of a factored product around `x = 0`:
/// `f(x) = sum_l a_l x^{2l}` with `a_0 = 1`, computed by repeated exact
/// series multiplication and division in the `x^2` variable.
pub fn quantum_taylor(
    f: &MeromorphicProduct,
    l_max: usize,
    policy: &TruncationPolicy,
) -> Result<LaurentTable> {
    policy.validate()?;
    let mut a = vec![ZERO; l_max + 1];
    a[0] = ONE;
    for &(c, e) in f.factors() {
        if e > 0 {
            for _ in 0..e {
                for l in (1..=l_max).rev() {
                    let prev = a[l - 1];
                    a[l] -= c * prev;
                }
            }
        } else {
            for _ in 0..(-e) {
                for l in 1..=l_max {
                    let prev = a[l - 1];
                    a[l] += c * prev;
                }
            }
        }
    }
    let mut coeffs = BTreeMap::new();
    for (l, &v) in a.iter().enumerate() {
        if !v.is_finite() {
            return Err(WqpError::NonconvergentSeries {
                context: format!("Taylor coefficient overflowed at l = {l}"),
            });
        }
        coeffs.insert(l as i64, v);
    }
    let ladder = pole_ladder_quantum(f)?;
    let upper = ladder
        .rungs
        .first()
        .map(|r| r.modulus)
        .unwrap_or(f64::INFINITY);
    Ok(LaurentTable {
        coeffs,
        sector: 0,
        annulus: (0.0, upper),
    })
}

/// Binomial `C(l + t - 1, t - 1)` in its polynomial extension to any
/// integer `l`: the product `(l+1)(l+2)...(l+t-1) / (t-1)!`.
fn poly_binom(l: i64, t: usize) -> f64 {
    let mut num = 1.0;
    for u in 1..t {
        num *= (l + u as i64) as f64;
    }
    let mut den = 1.0;
    for u in 1..t {
        den *= u as f64;
    }
    num / den
}

/// Laurent-coefficient jump from crossing one pole of the factored
/// product outward: the singular part at the pole is re-expanded on the
/// far side, and the difference contributes `-alpha^r` times a
/// polynomial-binomial combination of the deflated derivatives.
fn pole_jump(merged: &[(Complex64, i32)], pole: &PoleEntry, r: i64) -> Result<Complex64> {
    let v0 = pole.position;
    let alpha = v0.inv();
    let m = pole.order as usize;
    let mut cluster_e = 0i32;
    let mut others: Vec<(Complex64, i32)> = Vec::new();
    for &(c, e) in merged {
        let scale = c.norm().max(alpha.norm()).max(1e-300);
        if (c - alpha).norm() <= FACTOR_MERGE_TOL * scale {
            cluster_e += e;
        } else {
            others.push((c, e));
        }
    }
    if cluster_e >= 0 || (-cluster_e) as usize != m {
        return Err(WqpError::PoleOrderMisclassified {
            position: v0,
            value: (-cluster_e) as f64,
            order: m,
        });
    }
    // Deflated function g = product over the remaining factors.  Any
    // remaining factor vanishing at the pole position means the claimed
    // order is wrong: a coincident zero lowers it, a coincident pole
    // raises it.
    let mut g0 = ONE;
    let mut scale: f64 = 1.0;
    for &(c, e) in &others {
        let fv = ONE - c * v0;
        if e != 0 && fv.norm() < DEFLATION_TOL * (c * v0).norm().max(1.0) {
            return Err(WqpError::PoleOrderMisclassified {
                position: v0,
                value: fv.norm(),
                order: m,
            });
        }
        g0 *= fv.powi(e);
        scale = scale.max(g0.norm());
    }
    if !g0.is_finite() || g0.norm() < DEGEN_FLOOR * scale {
        return Err(WqpError::PoleOrderMisclassified {
            position: v0,
            value: g0.norm(),
            order: m,
        });
    }
    // Logarithmic-derivative recursion for g^{(0..m-1)}(v0).
    let mut lder = vec![ZERO; m.max(1)];
    for (d, slot) in lder.iter_mut().enumerate() {
        let mut sum = ZERO;
        let mut dfact = 1.0;
        for u in 1..=d {
            dfact *= u as f64;
        }
        for &(c, e) in &others {
            let fv = ONE - c * v0;
            sum += (e as f64) * (-c) * dfact * c.powi(d as i32) / fv.powi(d as i32 + 1);
        }
        *slot = sum;
    }
    let mut gder = vec![g0];
    for s in 0..m.saturating_sub(1) {
        let mut next = ZERO;
        let mut binom = 1.0;
        for d in 0..=s {
            next += binom * gder[s - d] * lder[d];
            binom *= (s - d) as f64 / (d as f64 + 1.0);
        }
        gder.push(next);
    }
    // Singular-part weights B_t = g^{(m-t)}(v0) / (m-t)! * (-1/alpha)^{m-t}.
    let mut sum = ZERO;
    for t in 1..=m {
        let s = m - t;
        let mut fact = 1.0;
        for u in 1..=s {
            fact *= u as f64;
        }
        let b_t = gder[s] / fact * (-alpha.inv()).powi(s as i32);
        sum += poly_binom(r, t) * b_t;
    }
    let jump = -alpha.powi(r as i32) * sum;
    if !jump.is_finite() {
        return Err(WqpError::NonconvergentSeries {
            context: format!("pole-crossing jump overflowed at r = {r}"),
        });
    }
    Ok(jump)
}

/// Total correction turning the Taylor coefficients of a factored product
/// into its sector-`j0` Laurent coefficients: the sum of the crossing
/// jumps over the first `j0` rungs of the ladder.
pub fn sector_correction_quantum(
    f: &MeromorphicProduct,
    ladder: &PoleLadder,
    j0: usize,
    r: i64,
) -> Result<Complex64> {
    if j0 == 0 {
        return Ok(ZERO);
    }
    if j0 > ladder.rungs.len() {
        return Err(WqpError::SectorOutOfRange {
            k: j0,
            max: ladder.rungs.len(),
        });
    }
    let merged = merge_factors(f);
    let mut acc = ZERO;
    for rung in &ladder.rungs[..j0] {
        for pole in &rung.poles {
            acc += pole_jump(&merged, pole, r)?;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Exchange-relation mode tables
// ---------------------------------------------------------------------------

/// Regime label of a mode-coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Critical level.
    Critical,
    /// Odd-exponent Abelian limit.
    LimitOdd,
    /// Even-exponent Abelian limit (identical to critical after
    /// reabsorption).
    LimitEven,
    /// Factorized quantum exchange function.
    Quantum,
}

/// Input parameters selecting the regime of an exchange-relation table.
#[derive(Debug, Clone)]
pub enum ExchangeRegime<'a> {
    /// Critical level at deformation `q`.
    Critical {
        /// Deformation parameter.
        q: Complex64,
    },
    /// Odd-exponent Abelian limit.
    LimitOdd {
        /// Deformation parameter.
        q: Complex64,
        /// Winding integer.
        m_int: i64,
        /// Odd nonzero limit exponent.
        h: i64,
    },
    /// Even-exponent Abelian limit.
    LimitEven {
        /// Deformation parameter.
        q: Complex64,
        /// Winding integer.
        m_int: i64,
        /// Even nonzero limit exponent.
        h: i64,
    },
    /// Quantum regime with the two factored exchange functions of the
    /// ordered relation (they coincide for identical fields).
    Quantum {
        /// Factored function multiplying the direct ordering.
        minus: &'a MeromorphicProduct,
        /// Factored function multiplying the reversed ordering.
        plus: &'a MeromorphicProduct,
    },
}

/// Mode coefficients of one exchange relation in one sector.
///
/// Classical regimes store the antisymmetrized bracket table
/// `c_r = (a_{-r} - a_r) / 2` built from the sector Laurent expansion;
/// the `symmetrized` flag records whether the symmetrized-contour
/// prescription was actually needed (it is for coincident generators in
/// sector 0, where a pole pair sits on the unit circle).  The quantum
/// regime stores the sector-corrected Taylor families of the two factored
/// functions; `coeffs_plus` is `None` when both orderings share one
/// function.
#[derive(Debug, Clone)]
pub struct ModeCoeffTable {
    /// Regime the table belongs to.
    pub regime: Regime,
    /// Site dimension.
    pub n: u32,
    /// First generator label.
    pub i: u32,
    /// Second generator label.
    pub j: u32,
    /// Sector index of the underlying expansion.
    pub sector: usize,
    /// Winding integer for the limit regimes.
    pub m_int: Option<i64>,
    /// Limit exponent for the limit regimes.
    pub h: Option<i64>,
    /// Main coefficient family, keyed by the mode index `r`.
    pub coeffs: BTreeMap<i64, Complex64>,
    /// Second family for the quantum regime with distinct functions.
    pub coeffs_plus: Option<BTreeMap<i64, Complex64>>,
    /// Whether the symmetrized-contour prescription entered the table.
    pub symmetrized: bool,
    /// For quantum tables: whether every pole rung lies outside the unit
    /// circle (the regime in which the factorization hypothesis holds).
    pub poles_outside_unit: Option<bool>,
}

impl ModeCoeffTable {
    /// Coefficient at mode index `r` (zero outside the stored window).
    pub fn coeff(&self, r: i64) -> Complex64 {
        self.coeffs.get(&r).copied().unwrap_or(ZERO)
    }

    /// Largest `|c_r + c_{-r}|` over the stored window of the main family.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&r, &c) in &self.coeffs {
            let mirror = self.coeff(-r);
            worst = worst.max((c + mirror).norm());
        }
        worst
    }
}

fn products_equal(a: &MeromorphicProduct, b: &MeromorphicProduct) -> bool {
    let mut ma = merge_factors(a);
    let mut mb = merge_factors(b);
    if ma.len() != mb.len() {
        return false;
    }
    let key = |c: &Complex64| (c.norm(), c.re, c.im);
    ma.sort_by(|x, y| key(&x.0).partial_cmp(&key(&y.0)).expect("finite factors"));
    mb.sort_by(|x, y| key(&x.0).partial_cmp(&key(&y.0)).expect("finite factors"));
    ma.iter().zip(mb.iter()).all(|(x, y)| {
        let scale = x.0.norm().max(y.0.norm()).max(1e-300);
        x.1 == y.1 && (x.0 - y.0).norm() <= FACTOR_MERGE_TOL * scale
    })
}

fn quantum_family(
    prod: &MeromorphicProduct,
    own_ladder: &PoleLadder,
    crossed: usize,
    r_max: usize,
    policy: &TruncationPolicy,
) -> Result<BTreeMap<i64, Complex64>> {
    let taylor = quantum_taylor(prod, r_max, policy)?;
    let rm = r_max as i64;
    let mut map = BTreeMap::new();
    for r in -rm..=rm {
        let base = if r >= 0 { taylor.coeff(r) } else { ZERO };
        let corr = sector_correction_quantum(prod, own_ladder, crossed, r)?;
        map.insert(r, base + corr);
    }
    Ok(map)
}

/// Number of rungs of `own` lying at or below the given modulus cutoff.
fn crossed_below(own: &PoleLadder, cutoff: f64) -> usize {
    own.rungs
        .iter()
        .take_while(|r| r.modulus <= cutoff * (1.0 + RUNG_GROUP_TOL))
        .count()
}

/// Assembles the mode-coefficient table of one exchange relation.
///
/// Classical regimes expand the corresponding term table in the requested
/// sector and antisymmetrize; the sector-0 critical table reproduces the
/// closed-form coefficients, and deeper sectors equal the closed form
/// plus the antisymmetrized rung corrections.  The quantum regime (only
/// available for the elementary pair `i = j = 1`) merges the pole rungs
/// of both factored functions into one sector ladder, corrects each
/// Taylor family across the rungs it has crossed, and reduces to a single
/// family when both orderings carry the same function.
pub fn exchange_relation_coeffs(
    regime: &ExchangeRegime<'_>,
    n: u32,
    i: u32,
    j: u32,
    sector: usize,
    r_max: usize,
    policy: &TruncationPolicy,
) -> Result<ModeCoeffTable> {
    match regime {
        ExchangeRegime::Critical { q } => {
            let table = critical_terms(n, *q, i, j)?;
            classical_mode_table(Regime::Critical, &table, n, i, j, sector, r_max, policy, None, None)
        }
        ExchangeRegime::LimitEven { q, m_int, h } => {
            if *h == 0 || h.rem_euclid(2) != 0 {
                return Err(WqpError::InvalidParameter(format!(
                    "even-limit exponent must be a nonzero even integer, got {h}"
                )));
            }
            let table = critical_terms(n, *q, i, j)?;
            classical_mode_table(
                Regime::LimitEven,
                &table,
                n,
                i,
                j,
                sector,
                r_max,
                policy,
                Some(*m_int),
                Some(*h),
            )
        }
        ExchangeRegime::LimitOdd { q, m_int, h } => {
            if h.rem_euclid(2) != 1 {
                return Err(WqpError::InvalidParameter(format!(
                    "odd-limit exponent must be odd, got {h}"
                )));
            }
            let table = limit_odd_terms(n, *q, i, j, *m_int)?;
            classical_mode_table(
                Regime::LimitOdd,
                &table,
                n,
                i,
                j,
                sector,
                r_max,
                policy,
                Some(*m_int),
                Some(*h),
            )
        }
        ExchangeRegime::Quantum { minus, plus } => {
            if i != 1 || j != 1 {
                return Err(WqpError::IndexOutOfRange {
                    i: i as usize,
                    j: j as usize,
                    max: 1,
                });
            }
            let lad_minus = pole_ladder_quantum(minus)?;
            let lad_plus = pole_ladder_quantum(plus)?;
            let same = products_equal(minus, plus);
            // Combined rung moduli delimit the sectors.
            let mut moduli: Vec<f64> = lad_minus
                .rungs
                .iter()
                .chain(lad_plus.rungs.iter())
                .map(|r| r.modulus)
                .collect();
            moduli.sort_by(f64::total_cmp);
            moduli.dedup_by(|a, b| *a <= *b * (1.0 + RUNG_GROUP_TOL));
            if sector > moduli.len() {
                return Err(WqpError::SectorOutOfRange {
                    k: sector,
                    max: moduli.len(),
                });
            }
            let (crossed_minus, crossed_plus) = if sector == 0 {
                (0, 0)
            } else {
                let cutoff = moduli[sector - 1];
                (
                    crossed_below(&lad_minus, cutoff),
                    crossed_below(&lad_plus, cutoff),
                )
            };
            let coeffs = quantum_family(minus, &lad_minus, crossed_minus, r_max, policy)?;
            let coeffs_plus = if same {
                None
            } else {
                Some(quantum_family(plus, &lad_plus, crossed_plus, r_max, policy)?)
            };
            let outside = moduli.first().map(|&m| m > 1.0).unwrap_or(true);
            Ok(ModeCoeffTable {
                regime: Regime::Quantum,
                n,
                i,
                j,
                sector,
                m_int: None,
                h: None,
                coeffs,
                coeffs_plus,
                symmetrized: false,
                poles_outside_unit: Some(outside),
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn classical_mode_table(
    regime: Regime,
    table: &TermTable,
    n: u32,
    i: u32,
    j: u32,
    sector: usize,
    r_max: usize,
    policy: &TruncationPolicy,
    m_int: Option<i64>,
    h: Option<i64>,
) -> Result<ModeCoeffTable> {
    let lt = sector_laurent(table, sector, r_max, policy)?;
    let rm = r_max as i64;
    let mut coeffs = BTreeMap::new();
    for r in -rm..=rm {
        coeffs.insert(r, 0.5 * (lt.coeff(-r) - lt.coeff(r)));
    }
    let symmetrized = if sector == 0 {
        table.has_unit_rung()
    } else {
        true
    };
    Ok(ModeCoeffTable {
        regime,
        n,
        i,
        j,
        sector,
        m_int,
        h,
        coeffs,
        coeffs_plus: None,
        symmetrized,
        poles_outside_unit: None,
    })
}

// ---------------------------------------------------------------------------
// Contour quadrature
// ---------------------------------------------------------------------------

/// Laurent coefficients of `f` in `x^2` on the circle `|x| = radius` via
/// the trapezoidal rule with `nodes` points, offset half a step so the
/// real axis is never sampled: `c_r ~ (1/K) sum_k f(x_k) x_k^{-2r}`.
pub fn contour_laurent<F>(
    f: &F,
    radius: f64,
    r_max: usize,
    nodes: usize,
) -> Result<BTreeMap<i64, Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(WqpError::InvalidParameter(format!(
            "contour radius must be positive and finite, got {radius}"
        )));
    }
    if nodes < 4 {
        return Err(WqpError::InvalidParameter(format!(
            "contour quadrature needs at least 4 nodes, got {nodes}"
        )));
    }
    let vals = exec::try_map_indexed(Exec::default(), nodes, |k| {
        let ang = 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
        let x = radius * Complex64::new(ang.cos(), ang.sin());
        f(x)
    })?;
    let rm = r_max as i64;
    let mut out = BTreeMap::new();
    for r in -rm..=rm {
        let mut acc = ZERO;
        for (k, v) in vals.iter().enumerate() {
            let ang = -2.0 * (r as f64) * 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
            acc += v * Complex64::new(ang.cos(), ang.sin());
        }
        let c = acc / nodes as f64 * radius.powi(-2 * r as i32);
        if !c.is_finite() {
            return Err(WqpError::NonconvergentSeries {
                context: format!("contour coefficient overflowed at r = {r}"),
            });
        }
        out.insert(r, c);
    }
    Ok(out)
}

/// Contour Laurent coefficients with the node-doubling check: evaluates
/// at 2048 and 4096 nodes and returns the finer table together with the
/// largest relative coefficient difference between the two (each entry
/// scaled by `1 + |c|`, so small and large coefficients are compared on
/// an equal footing).
pub fn contour_laurent_checked<F>(
    f: &F,
    radius: f64,
    r_max: usize,
) -> Result<(BTreeMap<i64, Complex64>, f64)>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let coarse = contour_laurent(f, radius, r_max, 2048)?;
    let fine = contour_laurent(f, radius, r_max, 4096)?;
    let mut diff: f64 = 0.0;
    for (r, c) in &fine {
        let o = coarse.get(r).copied().unwrap_or(ZERO);
        diff = diff.max((c - o).norm() / (1.0 + c.norm().max(o.norm())));
    }
    Ok((fine, diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SurfaceSigma;
    use crate::structure::{
        f_classical, f_h, quantum_product, quantum_product_unchecked,
    };
    use crate::params::AlgebraParams;

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
    }

    #[test]
    fn trapezoid_heights_and_total_weight() {
        let eta = EtaTrapezoid::new(2, 3, 5).unwrap();
        assert_eq!(eta.support(), vec![-3, -1, 1, 3]);
        assert_eq!(eta.height(-3), 1);
        assert_eq!(eta.height(-1), 2);
        assert_eq!(eta.height(1), 2);
        assert_eq!(eta.height(3), 1);
        assert_eq!(eta.height(5), 0);
        assert_eq!(eta.height(0), 0, "off-parity offsets carry no weight");
        assert_eq!(eta.weight_sum(), 6);
        let unit = EtaTrapezoid::new(1, 1, 2).unwrap();
        assert_eq!(unit.support(), vec![0]);
        assert_eq!(unit.weight_sum(), 1);
    }

    #[test]
    fn trapezoid_validates_indices() {
        assert!(EtaTrapezoid::new(0, 1, 3).is_err());
        assert!(EtaTrapezoid::new(1, 3, 3).is_err());
        assert!(EtaTrapezoid::new(3, 1, 3).is_err());
        assert!(EtaTrapezoid::new(1, 1, 3).is_ok());
    }

    #[test]
    fn elementary_mode_coefficient_matches_pair_form() {
        let q = c(0.47, 0.06);
        for n in 2..=4u32 {
            for r in [-5i64, -1, 0, 1, 2, 7] {
                let a = coeff_k0_t(n, q, r).unwrap();
                let b = coeff_k0_s(n, q, 1, 1, r).unwrap();
                assert!(close(a, b, 1e-15));
            }
        }
    }

    #[test]
    fn pair_mode_coefficients_reference_values() {
        // Independently computed balanced-number ratios, frozen.
        let q = c(0.45, 0.0);
        let vals = [
            (1i64, -5.50552793472955160e-01),
            (2, -3.09613756036853149e-01),
            (3, -1.44309646488034932e-01),
        ];
        for (r, want) in vals {
            let got = coeff_k0_s(4, q, 1, 2, r).unwrap();
            assert!(
                close(got, c(want, 0.0), 1e-14),
                "r = {r}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn mode_coefficients_vanish_at_zero_index() {
        let q = c(0.5, 0.1);
        assert_eq!(coeff_k0_t(3, q, 0).unwrap(), ZERO);
        assert_eq!(coeff_k0_s(4, q, 2, 3, 0).unwrap(), ZERO);
        assert_eq!(coeff_h(3, q, 1, 1, 1, 2, 0).unwrap(), ZERO);
    }

    #[test]
    fn even_limit_equals_critical_coefficients() {
        let q = c(0.52, 0.03);
        for r in [-4i64, 1, 3] {
            let a = coeff_h(3, q, -1, 2, 1, 2, r).unwrap();
            let b = coeff_k0_s(3, q, 1, 2, r).unwrap();
            assert!(close(a, b, 1e-15));
        }
    }

    #[test]
    fn even_limit_scale_matches_pointwise_functions() {
        let params = AlgebraParams::new(3, c(0.55, 0.0), c(0.1, 0.0), ZERO).unwrap();
        let x = c(1.13, 0.21);
        let lhs = f_h(x, 2, 1, &params, &policy()).unwrap();
        let rhs = f_classical(x, &params, &policy()).unwrap();
        let scale = limit_even_scale(3, 1, 2);
        assert!(close(lhs, scale * rhs, 1e-12));
    }

    #[test]
    fn odd_limit_extra_term_joins_continuously() {
        // At i + j = n the extra balanced-number term vanishes, so the
        // two branch formulas agree there.
        let q = c(0.48, 0.0);
        let n = 4u32;
        let (e1, e2) = e_pair(i64::from(n) * 1);
        for r in [1i64, 2, 5] {
            let got = coeff_h(n, q, 1, 1, 2, 2, r).unwrap();
            let den = qnum(4 * r, q).unwrap();
            let num1 = qnum(2 * r, q).unwrap() * qnum(2 * r, q).unwrap();
            let num2 = qnum(2 * r, q).unwrap() * qnum(2 * r, q).unwrap();
            let pref = -2.0 * q.ln() * (q - q.inv());
            let want = pref * (e1 as f64 * num1 - e2 as f64 * num2) / den;
            assert!(close(got, want, 1e-14));
        }
    }

    #[test]
    fn double_sum_matches_closed_form_with_mirrored_index() {
        for &q in &[c(0.5, 0.0), c(0.45, 0.08)] {
            for n in 2..=4u32 {
                for i in 1..n {
                    for j in 1..n {
                        let lt = eta_double_sum(n, q, i, j, 8, &policy()).unwrap();
                        for r in -8i64..=8 {
                            let want = coeff_k0_s(n, q, i, j, -r).unwrap();
                            let got = lt.coeff(r);
                            assert!(
                                close(got, want, 1e-12),
                                "n={n} i={i} j={j} r={r}: got {got}, want {want}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sector_zero_tables_are_antisymmetric() {
        let q = c(0.43, 0.11);
        for (i, j) in [(1u32, 1u32), (1, 2), (2, 2)] {
            let lt = eta_double_sum(3, q, i, j, 10, &policy()).unwrap();
            assert!(lt.antisymmetry_defect() < 1e-14);
        }
    }

    #[test]
    fn laurent_partial_sums_match_direct_evaluation() {
        // Distinct labels: no unit-circle pole, so the sector-0 table is
        // an honest Laurent expansion across the unit circle.
        let q = c(0.5, 0.0);
        let table = critical_terms(3, q, 1, 2).unwrap();
        let lt = sector_laurent(&table, 0, 64, &policy()).unwrap();
        for &x in &[c(0.92, 0.35), c(1.04, -0.2), c(0.93, 0.0)] {
            let direct = table.eval(x, &policy()).unwrap();
            let summed = lt.eval(x);
            assert!(
                close(direct, summed, 1e-9),
                "x = {x}: direct {direct}, summed {summed}"
            );
        }
    }

    #[test]
    fn classical_sector_tables_telescope_and_match_contours() {
        let q = c(0.5, 0.0);
        let table = critical_terms(3, q, 1, 1).unwrap();
        let ladder = pole_ladder_classical(3, q, 1, 1, false, 6).unwrap();
        let s0 = sector_laurent(&table, 0, 6, &policy()).unwrap();
        let s1 = sector_laurent(&table, 1, 6, &policy()).unwrap();
        let s2 = sector_laurent(&table, 2, 6, &policy()).unwrap();
        for r in -6i64..=6 {
            let d1 = delta_correction_classical(&ladder, 1, &table, r).unwrap();
            let d2 = delta_correction_classical(&ladder, 2, &table, r).unwrap();
            assert!(close(s1.coeff(r), s0.coeff(r) + d1, 1e-12));
            assert!(close(s2.coeff(r), s0.coeff(r) + d2, 1e-12));
        }
        // Independent oracle: direct contour quadrature inside each
        // annulus of the re-expanded function.
        let eval = |x: Complex64| table.eval(x, &policy());
        for (sector, lt) in [(1usize, &s1), (2, &s2)] {
            let radius = (lt.annulus.0 * lt.annulus.1).sqrt();
            let (ctab, diff) = contour_laurent_checked(&eval, radius, 6).unwrap();
            assert!(diff < 1e-9, "sector {sector} quadrature unstable: {diff}");
            for r in -6i64..=6 {
                assert!(
                    close(lt.coeff(r), ctab[&r], 1e-9),
                    "sector {sector} r {r}: table {} vs contour {}",
                    lt.coeff(r),
                    ctab[&r]
                );
            }
        }
    }

    #[test]
    fn odd_limit_tables_match_closed_form() {
        let q = c(0.55, 0.0);
        // Includes a pair with i + j > n, exercising the extra term.
        for (n, m_int, i, j) in [(3u32, 1i64, 1u32, 1u32), (3, 1, 1, 2), (3, 1, 2, 2), (2, -1, 1, 1)] {
            let regime = ExchangeRegime::LimitOdd { q, m_int, h: 1 };
            let t = exchange_relation_coeffs(&regime, n, i, j, 0, 8, &policy()).unwrap();
            for r in -8i64..=8 {
                let want = coeff_h(n, q, m_int, 1, i, j, r).unwrap();
                let got = t.coeff(r);
                assert!(
                    close(got, want, 1e-10),
                    "n={n} m={m_int} i={i} j={j} r={r}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn critical_exchange_tables_reduce_to_closed_form_plus_corrections() {
        let q = c(0.5, 0.0);
        let n = 3u32;
        for (i, j) in [(1u32, 2u32), (1, 1)] {
            let table = critical_terms(n, q, i, j).unwrap();
            let ladder = pole_ladder_classical(n, q, i, j, false, 8).unwrap();
            for sector in 0..=2usize {
                let regime = ExchangeRegime::Critical { q };
                let t = exchange_relation_coeffs(&regime, n, i, j, sector, 6, &policy()).unwrap();
                for r in -6i64..=6 {
                    let base = coeff_k0_s(n, q, i, j, r).unwrap();
                    let dm = delta_correction_classical(&ladder, sector, &table, -r).unwrap();
                    let dp = delta_correction_classical(&ladder, sector, &table, r).unwrap();
                    let want = base + 0.5 * (dm - dp);
                    assert!(
                        close(t.coeff(r), want, 1e-12),
                        "i={i} j={j} sector={sector} r={r}"
                    );
                }
            }
        }
    }

    #[test]
    fn classical_ladders_list_expected_rungs() {
        let q = c(0.5, 0.0);
        let lad = pole_ladder_classical(3, q, 1, 1, false, 4).unwrap();
        let moduli: Vec<f64> = lad.rungs().iter().map(|r| r.modulus).collect();
        let want = [1.0, 2.0, 4.0, 8.0];
        for (got, want) in moduli.iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
        assert_eq!(lad.annulus(0).unwrap(), (1.0, 2.0));
        assert_eq!(lad.annulus(1).unwrap(), (2.0, 4.0));

        let lad = pole_ladder_classical(3, q, 1, 2, false, 3).unwrap();
        let moduli: Vec<f64> = lad.rungs().iter().map(|r| r.modulus).collect();
        let s2 = 2.0f64.sqrt();
        let want = [s2, s2 * 2.0, s2 * 4.0];
        for (got, want) in moduli.iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
        let (lo, hi) = lad.annulus(0).unwrap();
        assert!((lo - 1.0 / s2).abs() < 1e-12 && (hi - s2).abs() < 1e-12);
        assert!(matches!(
            lad.annulus(5),
            Err(WqpError::SectorOutOfRange { .. })
        ));
    }

    #[test]
    fn odd_limit_ladder_reaches_unit_circle_for_small_n() {
        // The shifted family of the odd limit at n = 2 puts a pole pair
        // on the unit circle even for distinct fraction weights.
        let q = c(0.5, 0.0);
        let lad = pole_ladder_classical(2, q, 1, 1, true, 3).unwrap();
        assert!((lad.rungs()[0].modulus - 1.0).abs() < 1e-12);
        let lad_plain = pole_ladder_classical(2, q, 1, 1, false, 3).unwrap();
        assert!((lad_plain.rungs()[0].modulus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toy_simple_pole_crossing_is_exact() {
        let alpha = c(0.25, 0.0);
        let f = MeromorphicProduct::from_factors(vec![(alpha, -1)]);
        let taylor = quantum_taylor(&f, 6, &policy()).unwrap();
        for l in 0..=6i64 {
            assert!(close(taylor.coeff(l), alpha.powi(l as i32), 1e-15));
        }
        let ladder = pole_ladder_quantum(&f).unwrap();
        assert_eq!(ladder.len(), 1);
        assert!((ladder.rungs()[0].modulus - 2.0).abs() < 1e-12);
        for r in -5i64..=5 {
            let jump = sector_correction_quantum(&f, &ladder, 1, r).unwrap();
            assert!(close(jump, -alpha.powi(r as i32), 1e-15));
            let corrected = if r >= 0 { taylor.coeff(r) } else { ZERO } + jump;
            let want = if r >= 0 { ZERO } else { -alpha.powi(r as i32) };
            assert!(close(corrected, want, 1e-15), "r = {r}");
        }
    }

    #[test]
    fn double_pole_crossing_matches_hand_expansion() {
        let alpha = c(0.4, 0.1);
        let f = MeromorphicProduct::from_factors(vec![(alpha, -2)]);
        let ladder = pole_ladder_quantum(&f).unwrap();
        let taylor = quantum_taylor(&f, 8, &policy()).unwrap();
        for l in 0..=8i64 {
            let want = (l + 1) as f64 * alpha.powi(l as i32);
            assert!(close(taylor.coeff(l), want, 1e-14));
        }
        for r in -6i64..=6 {
            let jump = sector_correction_quantum(&f, &ladder, 1, r).unwrap();
            let inside = if r >= 0 {
                (r + 1) as f64 * alpha.powi(r as i32)
            } else {
                ZERO
            };
            let outside = if r <= -2 {
                (-r - 1) as f64 * alpha.powi(r as i32)
            } else {
                ZERO
            };
            assert!(close(inside + jump, outside, 1e-14), "r = {r}");
        }
    }

    #[test]
    fn synthetic_high_order_crossing_matches_contour() {
        // Triple pole with a zero and a further simple pole: the crossing
        // corrections must re-expand the function in the next annulus.
        let f = MeromorphicProduct::from_factors(vec![
            (c(0.9, 0.0), 1),
            (c(0.5, 0.05), -3),
            (c(0.2, 0.0), -1),
        ]);
        let ladder = pole_ladder_quantum(&f).unwrap();
        assert_eq!(ladder.len(), 2);
        assert_eq!(ladder.rungs()[0].poles[0].order, 3);
        let taylor = quantum_taylor(&f, 6, &policy()).unwrap();
        // A radius close to the crossed rung keeps the quadrature
        // amplification of the far Laurent tails mild.
        let radius = 1.55;
        assert!(radius > ladder.rungs()[0].modulus && radius < ladder.rungs()[1].modulus);
        let eval = |x: Complex64| f.eval(x);
        let (ctab, diff) = contour_laurent_checked(&eval, radius, 6).unwrap();
        assert!(diff < 1e-9);
        for r in -6i64..=6 {
            let base = if r >= 0 { taylor.coeff(r) } else { ZERO };
            let corr = sector_correction_quantum(&f, &ladder, 1, r).unwrap();
            assert!(
                close(base + corr, ctab[&r], 1e-9),
                "r = {r}: corrected {} vs contour {}",
                base + corr,
                ctab[&r]
            );
        }
    }

    #[test]
    fn misclassified_pole_orders_are_rejected() {
        let f = MeromorphicProduct::from_factors(vec![(c(0.5, 0.0), -2)]);
        let fake = PoleLadder::from_rungs(
            vec![PoleRung {
                modulus: 2.0f64.sqrt(),
                poles: vec![PoleEntry {
                    position: c(2.0, 0.0),
                    order: 1,
                }],
            }],
            false,
        );
        assert!(matches!(
            sector_correction_quantum(&f, &fake, 1, 0),
            Err(WqpError::PoleOrderMisclassified { .. })
        ));
        // A nearby unmerged factor annihilating the deflated value is
        // also detected.
        let g = MeromorphicProduct::from_factors(vec![
            (c(0.5, 0.0), -1),
            (c(0.50000000001, 0.0), 1),
        ]);
        let ladder = pole_ladder_quantum(&g).unwrap();
        assert!(matches!(
            sector_correction_quantum(&g, &ladder, 1, 0),
            Err(WqpError::PoleOrderMisclassified { .. })
        ));
    }

    #[test]
    fn quantum_taylor_reference_values() {
        // Frozen from an independent series expansion of the factored
        // product at n = 2, winding 1, p = 0.3, q = 0.5.
        let surface = SurfaceSigma::new(2, 1, c(0.5, 0.0), c(0.3, 0.0)).unwrap();
        let prod = quantum_product_unchecked(&surface, &policy()).unwrap();
        let lt = quantum_taylor(&prod, 8, &policy()).unwrap();
        let want = [
            1.0,
            2.40177777777777779e0,
            8.89235655482933929e0,
            2.98731019632269827e1,
            9.72058077269848866e1,
            3.09533465738630014e2,
            9.69598227130067812e2,
            2.99828797703593546e3,
            9.17569033129428317e3,
        ];
        for (l, w) in want.iter().enumerate() {
            let got = lt.coeff(l as i64);
            assert!(
                close(got, c(*w, 0.0), 1e-12),
                "l = {l}: got {got}, want {w}"
            );
        }
        // These parameters violate the factorization hypothesis, so the
        // first pole rung dips inside the unit circle.
        let ladder = pole_ladder_quantum(&prod).unwrap();
        assert!((ladder.rungs()[0].modulus - 0.6) < 1e-9);
        assert!(ladder.rungs()[0].modulus < 1.0);
    }

    #[test]
    fn quantum_sector_tables_match_contours() {
        // Hypothesis-satisfying surface: all poles outside the unit disk.
        let surface = SurfaceSigma::new(2, 1, c(0.4, 0.0), c(0.75, 0.0)).unwrap();
        let prod = quantum_product(&surface, &policy()).unwrap();
        let ladder = pole_ladder_quantum(&prod).unwrap();
        assert!(ladder.rungs()[0].modulus > 1.0);
        let taylor = quantum_taylor(&prod, 6, &policy()).unwrap();
        let eval = |x: Complex64| prod.eval(x);
        // Sector 0: Taylor disk.
        let r0 = 0.9 * ladder.rungs()[0].modulus;
        let (c0, d0) = contour_laurent_checked(&eval, r0, 6).unwrap();
        assert!(d0 < 1e-12);
        for l in 0..=6i64 {
            assert!(close(taylor.coeff(l), c0[&l], 1e-10), "l = {l}");
        }
        for l in -6i64..=-1 {
            assert!(c0[&l].norm() < 1e-10 * taylor.coeff(0).norm().max(1.0));
        }
        // Sector 1: between the first two rungs.
        let r1 = (ladder.rungs()[0].modulus * ladder.rungs()[1].modulus).sqrt();
        let (c1, d1) = contour_laurent_checked(&eval, r1, 6).unwrap();
        assert!(d1 < 1e-12);
        for r in -6i64..=6 {
            let base = if r >= 0 { taylor.coeff(r) } else { ZERO };
            let corr = sector_correction_quantum(&prod, &ladder, 1, r).unwrap();
            assert!(
                close(base + corr, c1[&r], 1e-9),
                "r = {r}: corrected {} vs contour {}",
                base + corr,
                c1[&r]
            );
        }
    }

    #[test]
    fn quantum_exchange_tables_assemble_both_families() {
        let surface = SurfaceSigma::new(2, 1, c(0.4, 0.0), c(0.75, 0.0)).unwrap();
        let prod = quantum_product(&surface, &policy()).unwrap();
        let regime = ExchangeRegime::Quantum {
            minus: &prod,
            plus: &prod,
        };
        let t0 = exchange_relation_coeffs(&regime, 2, 1, 1, 0, 6, &policy()).unwrap();
        assert!(t0.coeffs_plus.is_none(), "identical functions share one family");
        assert_eq!(t0.poles_outside_unit, Some(true));
        let taylor = quantum_taylor(&prod, 6, &policy()).unwrap();
        for r in -6i64..=6 {
            let want = if r >= 0 { taylor.coeff(r) } else { ZERO };
            assert!(close(t0.coeff(r), want, 1e-14));
        }
        // Distinct toy functions: the combined ladder counts each
        // family's own crossings.
        let fa = MeromorphicProduct::from_factors(vec![(c(0.25, 0.0), -1)]);
        let fb = MeromorphicProduct::from_factors(vec![(c(0.3, 0.0), -1)]);
        let regime = ExchangeRegime::Quantum {
            minus: &fa,
            plus: &fb,
        };
        let t1 = exchange_relation_coeffs(&regime, 2, 1, 1, 1, 5, &policy()).unwrap();
        let plus = t1.coeffs_plus.as_ref().expect("distinct pair keeps two families");
        let ta = quantum_taylor(&fa, 5, &policy()).unwrap();
        let alpha_b = c(0.3, 0.0);
        for r in -5i64..=5 {
            // First combined rung is the pole of `fb` at |x| ~ 1.83; `fa`
            // has crossed nothing there.
            let want_minus = if r >= 0 { ta.coeff(r) } else { ZERO };
            assert!(close(t1.coeff(r), want_minus, 1e-14), "minus r = {r}");
            let want_plus = if r < 0 { -alpha_b.powi(r as i32) } else { ZERO };
            assert!(
                close(plus.get(&r).copied().unwrap_or(ZERO), want_plus, 1e-14),
                "plus r = {r}"
            );
        }
        // Index restriction: composite labels have no factored form here.
        assert!(exchange_relation_coeffs(&regime, 3, 1, 2, 0, 4, &policy()).is_err());
    }

    #[test]
    fn quantum_limit_reproduces_classical_tables() {
        // Winding surfaces approaching the Abelian limit: the ordered
        // exchange function tends to 1, and the first-order coefficient
        // tables must land on the classical mode tables with the
        // documented integer prefactors.  The approach is linear in the
        // deviation parameter with a steep slope for even exponents, so
        // the limit is read off by quadratic extrapolation over a
        // halving ladder of deviations.
        let n = 2u32;
        let q = c(0.45, 0.0);
        let mode_combo = |h: i64, beta: f64, r_max: usize| -> BTreeMap<i64, Complex64> {
            let expo = f64::from(n) * h as f64 / (1.0 - beta);
            let p = (q.ln() * expo).exp();
            let surface = SurfaceSigma::new(n, 1, q, p).unwrap();
            let prod = quantum_product_unchecked(&surface, &policy()).unwrap();
            let phi = |x: Complex64| -> Result<Complex64> {
                let y = prod.eval(x)? / prod.eval(x.inv())?;
                Ok((y - ONE) / beta)
            };
            let tab = contour_laurent(&phi, 1.0, r_max, 4096).unwrap();
            let mut out = BTreeMap::new();
            for r in -(r_max as i64)..=(r_max as i64) {
                out.insert(r, -(tab[&r] - tab[&(-r)]));
            }
            out
        };
        for h in [1i64, 2] {
            let m0 = mode_combo(h, 0.01, 4);
            let m1 = mode_combo(h, 0.005, 4);
            let m2 = mode_combo(h, 0.0025, 4);
            for r in 1i64..=4 {
                let extrap = (8.0 * m2[&r] - 6.0 * m1[&r] + m0[&r]) / 3.0;
                let target = if h % 2 == 1 {
                    let scale = -2.0 * f64::from(n) * h as f64;
                    scale * coeff_h(n, q, 1, h, 1, 1, r).unwrap()
                } else {
                    let scale = 2.0 * limit_even_scale(n, 1, h);
                    scale * coeff_k0_s(n, q, 1, 1, r).unwrap()
                };
                assert!(
                    close(extrap, target, 1e-2),
                    "h = {h}, r = {r}: extrapolated {extrap}, target {target}"
                );
                // Each halving must move the raw value toward the target.
                assert!(
                    (m2[&r] - target).norm() < (m1[&r] - target).norm()
                        && (m1[&r] - target).norm() < (m0[&r] - target).norm(),
                    "h = {h}, r = {r}: no convergence toward the classical table"
                );
            }
        }
    }
}
