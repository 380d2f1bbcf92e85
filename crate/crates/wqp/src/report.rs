//! Serializable summaries of verification sweeps.
//!
//! A [`CheckReport`] aggregates one named check over a sweep of random
//! sample points; a [`VerificationReport`] bundles the checks of a suite
//! together with the inputs needed to reproduce it.  Reports are plain
//! data: given the same seed and flags the JSON rendering is
//! byte-identical between runs, and the CSV rendering encodes the same
//! numbers (floats print in shortest round-trip form in both).

use serde::{Deserialize, Serialize};

/// Version stamp carried by every serialized payload.
pub const SCHEMA_VERSION: u32 = 1;

/// Aggregate outcome of one named check across a sample sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    /// Identifier of the relation being checked.
    pub name: String,
    /// Admissible samples that entered the aggregates below.
    pub samples: usize,
    /// Samples skipped because the drawn point was numerically degenerate.
    pub skipped: usize,
    /// Largest residual over the admissible samples.
    pub max_residual: f64,
    /// Mean residual over the admissible samples.
    pub mean_residual: f64,
    /// Pass threshold the maximum residual is held against.
    pub tolerance: f64,
    /// `true` iff at least one sample was admissible and the maximum
    /// residual stayed below the tolerance.
    pub pass: bool,
    /// Largest condition number met while forming matrix inverses, when
    /// the check needs any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_condition: Option<f64>,
    /// Present only for the sign-alternation check: `true` when the check
    /// fails as stated but would pass with the opposite root-of-unity
    /// prefactor, so a silent sign flip is reported distinctly instead of
    /// being absorbed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sign_flip_suspected: Option<bool>,
}

impl CheckReport {
    /// Aggregate per-sample residuals (with optional condition numbers)
    /// into a report.  `residuals` holds only the admissible samples.
    pub fn from_samples(
        name: impl Into<String>,
        residuals: &[f64],
        skipped: usize,
        tolerance: f64,
        conditions: &[f64],
    ) -> CheckReport {
        let samples = residuals.len();
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        let mean_residual = if samples == 0 {
            0.0
        } else {
            residuals.iter().sum::<f64>() / samples as f64
        };
        let max_condition = conditions.iter().copied().fold(None, |acc: Option<f64>, c| {
            Some(acc.map_or(c, |a| a.max(c)))
        });
        CheckReport {
            name: name.into(),
            samples,
            skipped,
            max_residual,
            mean_residual,
            tolerance,
            pass: samples > 0 && max_residual < tolerance,
            max_condition,
            sign_flip_suspected: None,
        }
    }

    /// One human-readable line, aligned for terminal output.
    pub fn render_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{verdict}  {:<18} samples={:<3} skipped={:<2} max={:.3e} mean={:.3e} tol={:.1e}",
            self.name, self.samples, self.skipped, self.max_residual, self.mean_residual, self.tolerance
        );
        if let Some(cond) = self.max_condition {
            line.push_str(&format!(" cond={cond:.2e}"));
        }
        if self.sign_flip_suspected == Some(true) {
            line.push_str(" [sign-flipped variant would pass]");
        }
        line
    }
}

/// A suite of checks together with the inputs that reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Payload schema version.
    pub schema: u32,
    /// Name of the suite that produced the report.
    pub suite: String,
    /// Rank parameter the suite ran at.
    pub n: u32,
    /// Seed of the deterministic sample stream.
    pub seed: u64,
    /// Per-check aggregates, in suite order.
    pub checks: Vec<CheckReport>,
    /// `true` iff every check passed.
    pub pass: bool,
}

impl VerificationReport {
    /// Empty report for a named suite; push checks into it.
    pub fn new(suite: impl Into<String>, n: u32, seed: u64) -> VerificationReport {
        VerificationReport {
            schema: SCHEMA_VERSION,
            suite: suite.into(),
            n,
            seed,
            checks: Vec::new(),
            pass: true,
        }
    }

    /// Append a check, folding its verdict into the suite verdict.
    pub fn push(&mut self, check: CheckReport) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    /// Pretty JSON rendering; field order is fixed by the struct layout,
    /// so equal reports serialize to equal bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// CSV rendering with one row per check.  Floats use shortest
    /// round-trip notation, matching the JSON number encoding exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "name,samples,skipped,max_residual,mean_residual,tolerance,pass,max_condition,sign_flip_suspected\n",
        );
        for check in &self.checks {
            let cond = check
                .max_condition
                .map_or(String::new(), |c| c.to_string());
            let flip = check
                .sign_flip_suspected
                .map_or(String::new(), |f| f.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                check.name,
                check.samples,
                check.skipped,
                check.max_residual,
                check.mean_residual,
                check.tolerance,
                check.pass,
                cond,
                flip
            ));
        }
        out
    }

    /// Multi-line human rendering: a header, one line per check, and a
    /// final suite verdict.
    pub fn render_human(&self) -> String {
        let mut out = format!("suite {} (n = {}, seed = {})\n", self.suite, self.n, self.seed);
        for check in &self.checks {
            out.push_str(&check.render_line());
            out.push('\n');
        }
        out.push_str(if self.pass { "suite: PASS\n" } else { "suite: FAIL\n" });
        out
    }
}
