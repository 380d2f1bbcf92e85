//! Command-line driver for the `wqp` library: verification suites,
//! pointwise evaluation with cross-checks, exchange-mode coefficient
//! tables, and pole-ladder listings.
//!
//! Exit codes: `0` success, `1` verification failure or runtime
//! evaluation failure (pole hits, truncation exhaustion), `2` usage or
//! parameter-domain errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use wqp::error::WqpError;
use wqp::exec::Exec;
use wqp::modes::{
    contour_laurent_checked, critical_terms, exchange_relation_coeffs, limit_even_scale,
    limit_odd_terms, pole_ladder_classical, pole_ladder_quantum, sector_laurent,
    ExchangeRegime, ModeCoeffTable, PoleLadder, Regime, TermTable,
};
use wqp::params::{AlgebraParams, SamplePlan, SurfaceSigma};
use wqp::report::{VerificationReport, SCHEMA_VERSION};
use wqp::rmatrix::tau_n;
use wqp::structure::{
    big_f_m, big_f_m_iterated, big_t, big_y, big_y_ratio_route, dln_t_dc_critical, f_classical,
    f_h, quantum_product, MeromorphicProduct,
};
use wqp::theta::{theta_std, Nome, TruncationPolicy};
use wqp::verify::{suite_critical, suite_etasum, suite_rmatrix, DEFAULT_TOLERANCE};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Registered function names accepted by `eval` (case-sensitive).
const EVAL_REGISTRY: [&str; 8] = ["f", "f_h", "Y", "F", "T", "tau_N", "theta", "f_quantum"];

/// Tolerance applied to the `--check` contour cross-check.
const CHECK_TOLERANCE: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "wqp",
    version,
    about = "Deformed exchange-algebra toolkit: verification suites, evaluation, mode tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and report per-check residuals.
    Verify(VerifyArgs),
    /// Evaluate a registered function at a point, with a cross-check route.
    Eval(EvalArgs),
    /// Emit the mode-coefficient table of one exchange relation.
    Table(TableArgs),
    /// List the pole ladder delimiting the expansion sectors.
    Ladder(LadderArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// Aligned plain-text rendering.
    Human,
    /// Pretty-printed JSON with a `schema` tag.
    Json,
    /// Comma-separated rows with `#` metadata lines.
    Csv,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
    output: OutputFormat,
    /// Write the rendered output to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Suite {
    /// Exchange-matrix identity sweep.
    Rmatrix,
    /// Critical-level degeneration checks.
    Critical,
    /// Mode-sum closed-form comparison.
    Etasum,
    /// All suites in sequence.
    All,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run.
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    /// Site rank N.
    #[arg(short = 'N', value_name = "N")]
    n: u32,
    /// Deformation parameter (complex, e.g. 0.4+0.05i).
    #[arg(short, value_parser = parse_complex, default_value = "0.4+0i", allow_hyphen_values = true)]
    q: Complex64,
    /// Elliptic nome (complex).
    #[arg(short, value_parser = parse_complex, default_value = "0.09+0i", allow_hyphen_values = true)]
    p: Complex64,
    /// Level parameter; defaults to 0 (rmatrix) or -N (critical).
    #[arg(short, value_parser = parse_complex, allow_hyphen_values = true)]
    c: Option<Complex64>,
    /// Seed for the sample stream.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Sample points per check.
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Mode window for the etasum suite.
    #[arg(long, default_value_t = 12)]
    rmax: usize,
    /// Residual tolerance for the rmatrix suite.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Force sequential execution of the sample sweep.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Function name: f, f_h, Y, F, T, tau_N, theta, f_quantum (case-sensitive).
    function: String,
    /// Site rank N (theta ignores it).
    #[arg(short = 'N', value_name = "N")]
    n: u32,
    /// Deformation parameter.
    #[arg(short, value_parser = parse_complex, default_value = "0.4+0i", allow_hyphen_values = true)]
    q: Complex64,
    /// Elliptic nome (the nome itself for theta).
    #[arg(short, value_parser = parse_complex, default_value = "0.09+0i", allow_hyphen_values = true)]
    p: Complex64,
    /// Evaluation point.
    #[arg(short = 'x', value_parser = parse_complex, default_value = "1.07+0.21i", allow_hyphen_values = true)]
    x: Complex64,
    /// Winding integer for f_h, Y, F, f_quantum.
    #[arg(short = 'M', value_name = "M", default_value_t = 1, allow_hyphen_values = true)]
    m_int: i64,
    /// Limit exponent for f_h.
    #[arg(long = "h", value_name = "H", default_value_t = 1, allow_hyphen_values = true)]
    h: i64,
    /// Level parameter override (T defaults to the critical level -N).
    #[arg(short, value_parser = parse_complex, allow_hyphen_values = true)]
    c: Option<Complex64>,
    /// Evaluate the shift-orbit sum of f instead of a single value.
    #[arg(long)]
    at_sum_rule: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    /// Critical level.
    Critical,
    /// Odd-exponent Abelian limit.
    Odd,
    /// Even-exponent Abelian limit.
    Even,
    /// Factorized quantum exchange function.
    Quantum,
}

#[derive(Args)]
struct TableArgs {
    /// Expansion regime.
    #[arg(long, value_enum)]
    regime: RegimeArg,
    /// Site rank N.
    #[arg(short = 'N', value_name = "N")]
    n: u32,
    /// First generator label.
    #[arg(short = 'i', default_value_t = 1)]
    i: u32,
    /// Second generator label.
    #[arg(short = 'j', default_value_t = 1)]
    j: u32,
    /// Sector index (0 = innermost annulus).
    #[arg(long, default_value_t = 0)]
    sector: usize,
    /// Largest mode index tabulated.
    #[arg(long, default_value_t = 8)]
    rmax: usize,
    /// Deformation parameter.
    #[arg(short, value_parser = parse_complex, default_value = "0.4+0i", allow_hyphen_values = true)]
    q: Complex64,
    /// Elliptic nome (quantum regime only).
    #[arg(short, value_parser = parse_complex, default_value = "0.09+0i", allow_hyphen_values = true)]
    p: Complex64,
    /// Winding integer (limit and quantum regimes).
    #[arg(short = 'M', value_name = "M", default_value_t = 1, allow_hyphen_values = true)]
    m_int: i64,
    /// Limit exponent (defaults to 1 in the odd regime, 2 in the even).
    #[arg(long = "h", value_name = "H", allow_hyphen_values = true)]
    h: Option<i64>,
    /// Cross-check the table against a numerical contour oracle.
    #[arg(long)]
    check: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum LadderRegimeArg {
    /// Critical-level term table (also delimits the even limit).
    Critical,
    /// Odd-exponent limit term table.
    Odd,
    /// Factorized quantum exchange function.
    Quantum,
}

#[derive(Args)]
struct LadderArgs {
    /// Expansion regime.
    #[arg(long, value_enum)]
    regime: LadderRegimeArg,
    /// Site rank N.
    #[arg(short = 'N', value_name = "N")]
    n: u32,
    /// First generator label.
    #[arg(short = 'i', default_value_t = 1)]
    i: u32,
    /// Second generator label.
    #[arg(short = 'j', default_value_t = 1)]
    j: u32,
    /// Deformation parameter.
    #[arg(short, value_parser = parse_complex, default_value = "0.4+0i", allow_hyphen_values = true)]
    q: Complex64,
    /// Elliptic nome (quantum regime only).
    #[arg(short, value_parser = parse_complex, default_value = "0.09+0i", allow_hyphen_values = true)]
    p: Complex64,
    /// Winding integer (quantum regime only).
    #[arg(short = 'M', value_name = "M", default_value_t = 1, allow_hyphen_values = true)]
    m_int: i64,
    /// Number of rungs listed for classical ladders.
    #[arg(long, default_value_t = 8)]
    rungs: usize,
    #[command(flatten)]
    output: OutputArgs,
}

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

enum CliError {
    Lib(WqpError),
    Io(std::io::Error),
    Config(String),
}

impl From<WqpError> for CliError {
    fn from(err: WqpError) -> Self {
        CliError::Lib(err)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(err) => write!(f, "{err}"),
            CliError::Io(err) => write!(f, "{err}"),
            CliError::Config(msg) => write!(f, "{msg}"),
        }
    }
}

/// Maps an error to the process exit code: parameter-domain and usage
/// problems exit 2, runtime evaluation failures exit 1.
fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Config(_) => 2,
        CliError::Io(_) => 1,
        CliError::Lib(lib) => match lib {
            WqpError::DegenerateQ { .. }
            | WqpError::NonconvergentTau { .. }
            | WqpError::StarNomeOutOfDomain { .. }
            | WqpError::SurfaceViolated { .. }
            | WqpError::HypothesisViolated { .. }
            | WqpError::SectorOutOfRange { .. }
            | WqpError::IndexOutOfRange { .. }
            | WqpError::InvalidParameter(_) => 2,
            _ => 1,
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(args) => run_verify(args),
        Command::Eval(args) => run_eval(args),
        Command::Table(args) => run_table(args),
        Command::Ladder(args) => run_ladder(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

// ---------------------------------------------------------------------------
// Shared parsing and rendering helpers
// ---------------------------------------------------------------------------

/// Parses a complex literal in the `a+bi` form (no spaces); a bare real is
/// also accepted, as are `i`, `-i`, and `2i` style pure imaginaries.
fn parse_complex(raw: &str) -> Result<Complex64, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    let Some(body) = s.strip_suffix(['i', 'I']) else {
        let re: f64 = s
            .parse()
            .map_err(|e| format!("bad real literal {s:?}: {e}"))?;
        return Ok(Complex64::new(re, 0.0));
    };
    // Split the real part from the imaginary part at the last sign that is
    // not an exponent sign.
    let bytes = body.as_bytes();
    let mut split = None;
    for idx in (1..bytes.len()).rev() {
        let ch = bytes[idx];
        if (ch == b'+' || ch == b'-') && bytes[idx - 1] != b'e' && bytes[idx - 1] != b'E' {
            split = Some(idx);
            break;
        }
    }
    let (re_text, im_text) = match split {
        Some(idx) => (&body[..idx], &body[idx..]),
        None => ("", body),
    };
    let re: f64 = if re_text.is_empty() {
        0.0
    } else {
        re_text
            .parse()
            .map_err(|e| format!("bad real part {re_text:?}: {e}"))?
    };
    let im: f64 = match im_text {
        "" | "+" => 1.0,
        "-" => -1.0,
        _ => im_text
            .parse()
            .map_err(|e| format!("bad imaginary part {im_text:?}: {e}"))?,
    };
    Ok(Complex64::new(re, im))
}

/// Renders a complex number in the same `a+bi` grammar the flags accept.
fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Writes rendered output to `--out` or stdout; data never goes to stderr.
fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(CliError::Io)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn run_verify(args: VerifyArgs) -> Result<u8, CliError> {
    let policy = TruncationPolicy::default();
    let mut plan = SamplePlan::new(args.points, args.seed);
    if args.sequential {
        plan.exec = Exec::Sequential;
    }
    let critical_level = Complex64::new(-f64::from(args.n), 0.0);
    if matches!(args.suite, Suite::Critical | Suite::All) {
        if let Some(c) = args.c {
            if (c - critical_level).norm() > 1e-12 {
                return Err(CliError::Config(format!(
                    "the critical suite runs at c = -N = {}; got c = {}",
                    format_complex(critical_level),
                    format_complex(c)
                )));
            }
        }
    }

    let label = match args.suite {
        Suite::Rmatrix => "rmatrix",
        Suite::Critical => "critical",
        Suite::Etasum => "etasum",
        Suite::All => "all",
    };
    let mut report = VerificationReport::new(label, args.n, args.seed);

    if matches!(args.suite, Suite::Rmatrix | Suite::All) {
        let params = AlgebraParams::new(args.n, args.q, args.p, args.c.unwrap_or(ZERO))?;
        let sub = suite_rmatrix(&params, &plan, &policy, args.tolerance)?;
        for check in sub.checks {
            report.push(check);
        }
    }
    if matches!(args.suite, Suite::Critical | Suite::All) {
        let params = AlgebraParams::new(args.n, args.q, args.p, critical_level)?;
        let sub = suite_critical(&params, &plan, &policy)?;
        for check in sub.checks {
            report.push(check);
        }
    }
    if matches!(args.suite, Suite::Etasum | Suite::All) {
        let sub = suite_etasum(args.n, args.q, args.rmax, &policy)?;
        for check in sub.checks {
            report.push(check);
        }
    }

    let rendered = match args.output.output {
        OutputFormat::Human => report.render_human(),
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    };
    emit(&rendered, args.output.out.as_deref())?;
    Ok(if report.pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EvalPayload {
    schema: u32,
    function: String,
    n: u32,
    q: [f64; 2],
    p: [f64; 2],
    x: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sum_rule: Option<bool>,
    value: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    surface_residual: Option<f64>,
}

/// Everything a single `eval` invocation produces.
struct EvalOutcome {
    value: Complex64,
    residual: Option<f64>,
    residual_kind: Option<&'static str>,
    /// Level parameter actually used, when the function depends on one.
    level: Option<Complex64>,
    surface_residual: Option<f64>,
    uses_m: bool,
    uses_h: bool,
}

fn run_eval(args: EvalArgs) -> Result<u8, CliError> {
    if !EVAL_REGISTRY.contains(&args.function.as_str()) {
        return Err(CliError::Config(format!(
            "unknown function {:?}; registered names are {}",
            args.function,
            EVAL_REGISTRY.join(", ")
        )));
    }
    if args.at_sum_rule && args.function != "f" {
        return Err(CliError::Config(
            "--at-sum-rule applies only to the function f".into(),
        ));
    }
    let policy = TruncationPolicy::default();
    let outcome = match evaluate(&args, &policy) {
        Ok(outcome) => outcome,
        Err(CliError::Lib(WqpError::PoleHit { context })) => {
            eprintln!("error: evaluation point sits on a pole: {context}");
            if let Some(hint) = pole_hint(&args, &policy) {
                eprintln!("{hint}");
            }
            return Ok(1);
        }
        Err(err) => return Err(err),
    };

    let payload = EvalPayload {
        schema: SCHEMA_VERSION,
        function: args.function.clone(),
        n: args.n,
        q: pair(args.q),
        p: pair(args.p),
        x: pair(args.x),
        m: outcome.uses_m.then_some(args.m_int),
        h: outcome.uses_h.then_some(args.h),
        c: outcome.level.map(pair),
        sum_rule: args.at_sum_rule.then_some(true),
        value: pair(outcome.value),
        residual: outcome.residual,
        residual_kind: outcome.residual_kind.map(str::to_owned),
        surface_residual: outcome.surface_residual,
    };

    let rendered = match args.output.output {
        OutputFormat::Human => render_eval_human(&args, &payload),
        OutputFormat::Json => {
            let mut text = serde_json::to_string_pretty(&payload).expect("eval payload is a tree");
            text.push('\n');
            text
        }
        OutputFormat::Csv => render_eval_csv(&payload),
    };
    emit(&rendered, args.output.out.as_deref())?;
    Ok(0)
}

fn evaluate(args: &EvalArgs, policy: &TruncationPolicy) -> Result<EvalOutcome, CliError> {
    let x = args.x;
    let outcome = match args.function.as_str() {
        "f" => {
            let params = AlgebraParams::new(args.n, args.q, args.p, ZERO)?;
            if args.at_sum_rule {
                let mut sum = ZERO;
                for u in 1..=args.n as i32 {
                    sum += f_classical(args.q.powi(u) * x, &params, policy)?;
                }
                EvalOutcome {
                    value: sum,
                    residual: Some(sum.norm()),
                    residual_kind: Some("shift-orbit sum magnitude"),
                    level: None,
                    surface_residual: None,
                    uses_m: false,
                    uses_h: false,
                }
            } else {
                let direct = f_classical(x, &params, policy)?;
                let alt = dln_t_dc_critical(x, &params, policy)?;
                EvalOutcome {
                    value: direct,
                    residual: Some((direct - alt).norm()),
                    residual_kind: Some("dual-route"),
                    level: None,
                    surface_residual: None,
                    uses_m: false,
                    uses_h: false,
                }
            }
        }
        "f_h" => {
            let params = AlgebraParams::new(args.n, args.q, args.p, ZERO)?;
            let value = f_h(x, args.h, args.m_int, &params, policy)?;
            // The even-exponent limit is proportional to f; report the
            // deviation from that proportionality as the cross-check.
            let residual = if args.h.rem_euclid(2) == 0 {
                let scale = limit_even_scale(args.n, args.m_int, args.h);
                let base = f_classical(x, &params, policy)?;
                Some((value - base * scale).norm())
            } else {
                None
            };
            EvalOutcome {
                value,
                residual,
                residual_kind: residual.map(|_| "even-limit proportionality"),
                level: None,
                surface_residual: None,
                uses_m: true,
                uses_h: true,
            }
        }
        "Y" => {
            let surface = SurfaceSigma::new(args.n, args.m_int, args.q, args.p)?;
            let direct = big_y(args.m_int, x, &surface, policy)?;
            let ratio = big_y_ratio_route(args.m_int, x, &surface, policy)?;
            EvalOutcome {
                value: direct,
                residual: Some((direct - ratio).norm()),
                residual_kind: Some("ratio-route"),
                level: Some(surface.params.c),
                surface_residual: Some(surface.residual()),
                uses_m: true,
                uses_h: false,
            }
        }
        "F" => {
            let params = AlgebraParams::new(args.n, args.q, args.p, args.c.unwrap_or(ZERO))?;
            let direct = big_f_m(args.m_int, x, &params, policy)?;
            let iterated = big_f_m_iterated(args.m_int, x, &params, policy)?;
            EvalOutcome {
                value: direct,
                residual: Some((direct - iterated).norm()),
                residual_kind: Some("iterated-route"),
                level: Some(params.c),
                surface_residual: None,
                uses_m: true,
                uses_h: false,
            }
        }
        "T" => {
            let level = args
                .c
                .unwrap_or(Complex64::new(-f64::from(args.n), 0.0));
            let params = AlgebraParams::new(args.n, args.q, args.p, level)?;
            let value = big_t(x, &params, policy)?;
            EvalOutcome {
                value,
                residual: None,
                residual_kind: None,
                level: Some(level),
                surface_residual: None,
                uses_m: false,
                uses_h: false,
            }
        }
        "tau_N" => {
            let params = AlgebraParams::new(args.n, args.q, args.p, args.c.unwrap_or(ZERO))?;
            let value = tau_n(x, &params, policy)?;
            let inv = tau_n(x.inv(), &params, policy)?;
            EvalOutcome {
                value,
                residual: Some((value * inv - 1.0).norm()),
                residual_kind: Some("inversion identity"),
                level: None,
                surface_residual: None,
                uses_m: false,
                uses_h: false,
            }
        }
        "theta" => {
            let nome = Nome::new(args.p)?;
            let value = theta_std(x, nome, policy)?;
            let mirrored = theta_std(args.p / x, nome, policy)?;
            EvalOutcome {
                value,
                residual: Some((value - mirrored).norm()),
                residual_kind: Some("argument-inversion identity"),
                level: None,
                surface_residual: None,
                uses_m: false,
                uses_h: false,
            }
        }
        "f_quantum" => {
            let surface = SurfaceSigma::new(args.n, args.m_int, args.q, args.p)?;
            let prod = quantum_product(&surface, policy)?;
            let value = prod.eval(x)?;
            // Cross-check: the ratio against the mirrored argument must
            // reproduce the surface exchange function.
            let residual = match (prod.eval(x.inv()), big_y(args.m_int, x, &surface, policy)) {
                (Ok(mirror), Ok(y)) if mirror.norm() > 0.0 => Some((value / mirror - y).norm()),
                _ => None,
            };
            EvalOutcome {
                value,
                residual,
                residual_kind: residual.map(|_| "exchange-ratio"),
                level: Some(surface.params.c),
                surface_residual: Some(surface.residual()),
                uses_m: true,
                uses_h: false,
            }
        }
        _ => unreachable!("registry is checked before dispatch"),
    };
    Ok(outcome)
}

/// Builds a nearest-pole hint for the function family being evaluated.
fn pole_hint(args: &EvalArgs, policy: &TruncationPolicy) -> Option<String> {
    let ladder = match args.function.as_str() {
        "f" | "T" | "F" => pole_ladder_classical(args.n, args.q, 1, 1, false, 24).ok()?,
        "f_h" => {
            let odd = args.h.rem_euclid(2) == 1;
            pole_ladder_classical(args.n, args.q, 1, 1, odd, 24).ok()?
        }
        "Y" | "f_quantum" => {
            let surface = SurfaceSigma::new(args.n, args.m_int, args.q, args.p).ok()?;
            let prod = quantum_product(&surface, policy).ok()?;
            pole_ladder_quantum(&prod).ok()?
        }
        _ => return None,
    };
    nearest_rung_hint(&ladder, args.x)
}

fn nearest_rung_hint(ladder: &PoleLadder, x: Complex64) -> Option<String> {
    let lx = x.norm().ln();
    let mut best: Option<(f64, f64, usize)> = None;
    for (idx, rung) in ladder.rungs().iter().enumerate() {
        let mut moduli = vec![rung.modulus];
        if ladder.mirror() && rung.modulus != 0.0 {
            moduli.push(1.0 / rung.modulus);
        }
        for m in moduli {
            let d = (lx - m.ln()).abs();
            if best.map_or(true, |(bd, _, _)| d < bd) {
                best = Some((d, m, idx));
            }
        }
    }
    let (_, modulus, idx) = best?;
    let rung = &ladder.rungs()[idx];
    let poles = rung
        .poles
        .iter()
        .take(3)
        .map(|p| format!("x^2 = {} (order {})", format_complex(p.position), p.order))
        .collect::<Vec<_>>()
        .join(", ");
    Some(format!(
        "nearest pole rung: |x| = {modulus} carrying {poles}"
    ))
}

fn render_eval_human(args: &EvalArgs, payload: &EvalPayload) -> String {
    let mut text = String::new();
    let value = Complex64::new(payload.value[0], payload.value[1]);
    if payload.sum_rule == Some(true) {
        let _ = writeln!(
            text,
            "sum of f over the shift orbit u = 1..{} at x = {}: {}",
            payload.n,
            format_complex(args.x),
            format_complex(value)
        );
    } else {
        let _ = writeln!(
            text,
            "{}({}) = {}",
            payload.function,
            format_complex(args.x),
            format_complex(value)
        );
    }
    if let (Some(residual), Some(kind)) = (payload.residual, payload.residual_kind.as_deref()) {
        let _ = writeln!(text, "  {kind} residual = {residual:.3e}");
    }
    let mut context = format!(
        "  N = {}  q = {}  p = {}",
        payload.n,
        format_complex(args.q),
        format_complex(args.p)
    );
    if let Some(m) = payload.m {
        let _ = write!(context, "  M = {m}");
    }
    if let Some(h) = payload.h {
        let _ = write!(context, "  h = {h}");
    }
    if let Some(c) = payload.c {
        let _ = write!(context, "  c = {}", format_complex(Complex64::new(c[0], c[1])));
    }
    if let Some(sr) = payload.surface_residual {
        let _ = write!(context, "  surface residual = {sr:.3e}");
    }
    let _ = writeln!(text, "{context}");
    text
}

fn render_eval_csv(payload: &EvalPayload) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "# schema = {}", payload.schema);
    let _ = writeln!(text, "# function = {}", payload.function);
    let _ = writeln!(text, "# N = {}", payload.n);
    let _ = writeln!(
        text,
        "# q = {}",
        format_complex(Complex64::new(payload.q[0], payload.q[1]))
    );
    let _ = writeln!(
        text,
        "# p = {}",
        format_complex(Complex64::new(payload.p[0], payload.p[1]))
    );
    if let Some(m) = payload.m {
        let _ = writeln!(text, "# M = {m}");
    }
    if let Some(h) = payload.h {
        let _ = writeln!(text, "# h = {h}");
    }
    if let Some(c) = payload.c {
        let _ = writeln!(
            text,
            "# c = {}",
            format_complex(Complex64::new(c[0], c[1]))
        );
    }
    if payload.sum_rule == Some(true) {
        let _ = writeln!(text, "# sum_rule = true");
    }
    if let Some(sr) = payload.surface_residual {
        let _ = writeln!(text, "# surface_residual = {sr}");
    }
    text.push_str("x_re,x_im,value_re,value_im,residual,residual_kind\n");
    let _ = writeln!(
        text,
        "{},{},{},{},{},{}",
        payload.x[0],
        payload.x[1],
        payload.value[0],
        payload.value[1],
        payload
            .residual
            .map(|r| r.to_string())
            .unwrap_or_default(),
        payload.residual_kind.as_deref().unwrap_or_default()
    );
    text
}

// ---------------------------------------------------------------------------
// table
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TableRow {
    r: i64,
    re: f64,
    im: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    re_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    im_plus: Option<f64>,
}

#[derive(Serialize)]
struct CheckPayload {
    method: String,
    radius: f64,
    doubling_rel_diff: f64,
    max_rel_diff: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct TablePayload {
    schema: u32,
    regime: String,
    n: u32,
    i: u32,
    j: u32,
    sector: usize,
    r_max: usize,
    q: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    symmetrized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    poles_outside_unit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    annulus: Option<[f64; 2]>,
    rows: Vec<TableRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<CheckPayload>,
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::Critical => "critical",
        Regime::LimitOdd => "odd",
        Regime::LimitEven => "even",
        Regime::Quantum => "quantum",
    }
}

fn run_table(args: TableArgs) -> Result<u8, CliError> {
    let policy = TruncationPolicy::default();
    let h = args.h.unwrap_or(match args.regime {
        RegimeArg::Odd => 1,
        RegimeArg::Even => 2,
        _ => 0,
    });

    // The quantum product must outlive the regime borrow.
    let quantum_prod: Option<MeromorphicProduct> = if args.regime == RegimeArg::Quantum {
        let surface = SurfaceSigma::new(args.n, args.m_int, args.q, args.p)?;
        Some(quantum_product(&surface, &policy)?)
    } else {
        None
    };
    let regime = match args.regime {
        RegimeArg::Critical => ExchangeRegime::Critical { q: args.q },
        RegimeArg::Odd => ExchangeRegime::LimitOdd {
            q: args.q,
            m_int: args.m_int,
            h,
        },
        RegimeArg::Even => ExchangeRegime::LimitEven {
            q: args.q,
            m_int: args.m_int,
            h,
        },
        RegimeArg::Quantum => {
            let prod = quantum_prod.as_ref().expect("built above");
            ExchangeRegime::Quantum {
                minus: prod,
                plus: prod,
            }
        }
    };

    let table = exchange_relation_coeffs(
        &regime,
        args.n,
        args.i,
        args.j,
        args.sector,
        args.rmax,
        &policy,
    )?;

    // Annulus metadata and, when requested, the contour cross-check.
    let terms: Option<TermTable> = match args.regime {
        RegimeArg::Critical | RegimeArg::Even => {
            Some(critical_terms(args.n, args.q, args.i, args.j)?)
        }
        RegimeArg::Odd => Some(limit_odd_terms(args.n, args.q, args.i, args.j, args.m_int)?),
        RegimeArg::Quantum => None,
    };
    let annulus = match (&terms, &quantum_prod) {
        (Some(t), _) => Some(sector_laurent(t, args.sector, args.rmax, &policy)?.annulus),
        (None, Some(prod)) => quantum_annulus(prod, args.sector)?,
        _ => None,
    };
    let check = if args.check {
        Some(match (&terms, &quantum_prod) {
            (Some(t), _) => classical_contour_check(
                &table,
                t,
                annulus.expect("classical sectors are bounded"),
                args.rmax,
                &policy,
            )?,
            (None, Some(prod)) => quantum_contour_check(&table, prod, args.rmax)?,
            _ => unreachable!("one source exists per regime"),
        })
    } else {
        None
    };

    let scale = (table.regime == Regime::LimitEven)
        .then(|| limit_even_scale(args.n, args.m_int, h));
    let rows = table_rows(&table, args.rmax);
    let payload = TablePayload {
        schema: SCHEMA_VERSION,
        regime: regime_name(table.regime).to_owned(),
        n: args.n,
        i: args.i,
        j: args.j,
        sector: args.sector,
        r_max: args.rmax,
        q: pair(args.q),
        p: (args.regime == RegimeArg::Quantum).then(|| pair(args.p)),
        m: table.m_int.or((args.regime == RegimeArg::Quantum).then_some(args.m_int)),
        h: table.h,
        scale,
        symmetrized: table.symmetrized,
        poles_outside_unit: table.poles_outside_unit,
        annulus: annulus.map(|(a, b)| [a, b]),
        rows,
        check,
    };

    let failed = payload.check.as_ref().is_some_and(|c| !c.pass);
    let rendered = match args.output.output {
        OutputFormat::Human => render_table_human(&payload),
        OutputFormat::Json => {
            let mut text =
                serde_json::to_string_pretty(&payload).expect("table payload is a tree");
            text.push('\n');
            text
        }
        OutputFormat::Csv => render_table_csv(&payload),
    };
    emit(&rendered, args.output.out.as_deref())?;
    Ok(if failed { 1 } else { 0 })
}

fn table_rows(table: &ModeCoeffTable, r_max: usize) -> Vec<TableRow> {
    let rm = r_max as i64;
    (-rm..=rm)
        .map(|r| {
            let c = table.coeff(r);
            let plus = table
                .coeffs_plus
                .as_ref()
                .map(|m| m.get(&r).copied().unwrap_or(ZERO));
            TableRow {
                r,
                re: c.re,
                im: c.im,
                re_plus: plus.map(|v| v.re),
                im_plus: plus.map(|v| v.im),
            }
        })
        .collect()
}

/// Sector annulus of a factorized quantum function: rung moduli delimit
/// the sectors; the outermost sector is unbounded (`None`).
fn quantum_annulus(
    prod: &MeromorphicProduct,
    sector: usize,
) -> Result<Option<(f64, f64)>, CliError> {
    let ladder = pole_ladder_quantum(prod)?;
    let moduli: Vec<f64> = ladder.rungs().iter().map(|r| r.modulus).collect();
    if sector > moduli.len() {
        return Err(CliError::Lib(WqpError::SectorOutOfRange {
            k: sector,
            max: moduli.len(),
        }));
    }
    Ok(if sector == 0 {
        moduli.first().map(|&m| (0.0, m))
    } else if sector < moduli.len() {
        Some((moduli[sector - 1], moduli[sector]))
    } else {
        None
    })
}

/// Compares the antisymmetrized classical table against a trapezoid
/// contour expansion of the underlying term table.  Antisymmetrization
/// makes the comparison insensitive to which side of an on-circle pole
/// pair the contour runs, so a single interior radius suffices.
fn classical_contour_check(
    table: &ModeCoeffTable,
    terms: &TermTable,
    annulus: (f64, f64),
    r_max: usize,
    policy: &TruncationPolicy,
) -> Result<CheckPayload, CliError> {
    let radius = (annulus.0 * annulus.1).sqrt();
    let inner_policy = policy.clone();
    let (coeffs, doubling) =
        contour_laurent_checked(&|z| terms.eval(z, &inner_policy), radius, r_max)?;
    let scale = 1.0
        + table
            .coeffs
            .values()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max);
    let mut max_rel = 0.0_f64;
    for r in 0..=r_max as i64 {
        let want = table.coeff(r);
        let a_neg = coeffs.get(&-r).copied().unwrap_or(ZERO);
        let a_pos = coeffs.get(&r).copied().unwrap_or(ZERO);
        let got = 0.5 * (a_neg - a_pos);
        max_rel = max_rel.max((got - want).norm() / scale);
    }
    Ok(CheckPayload {
        method: "contour".to_owned(),
        radius,
        doubling_rel_diff: doubling,
        max_rel_diff: max_rel,
        tolerance: CHECK_TOLERANCE,
        pass: max_rel < CHECK_TOLERANCE,
    })
}

/// Compares a sector-corrected quantum family against a direct contour
/// expansion of the factorized function inside the same sector.
fn quantum_contour_check(
    table: &ModeCoeffTable,
    prod: &MeromorphicProduct,
    r_max: usize,
) -> Result<CheckPayload, CliError> {
    let ladder = pole_ladder_quantum(prod)?;
    let moduli: Vec<f64> = ladder.rungs().iter().map(|r| r.modulus).collect();
    let radius = if table.sector == 0 {
        moduli.first().map_or(0.9, |&m| 0.75 * m)
    } else if table.sector < moduli.len() {
        (moduli[table.sector - 1] * moduli[table.sector]).sqrt()
    } else {
        moduli[table.sector - 1] * 1.3
    };
    let (coeffs, doubling) = contour_laurent_checked(&|z| prod.eval(z), radius, r_max)?;
    let scale = 1.0
        + table
            .coeffs
            .values()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max);
    let rm = r_max as i64;
    let mut max_rel = 0.0_f64;
    for r in -rm..=rm {
        let want = table.coeff(r);
        let got = coeffs.get(&r).copied().unwrap_or(ZERO);
        max_rel = max_rel.max((got - want).norm() / scale);
    }
    Ok(CheckPayload {
        method: "contour".to_owned(),
        radius,
        doubling_rel_diff: doubling,
        max_rel_diff: max_rel,
        tolerance: CHECK_TOLERANCE,
        pass: max_rel < CHECK_TOLERANCE,
    })
}

fn table_metadata_lines(payload: &TablePayload) -> Vec<String> {
    let mut lines = vec![
        format!("schema = {}", payload.schema),
        format!("regime = {}", payload.regime),
        format!("N = {}", payload.n),
        format!("(i, j) = ({}, {})", payload.i, payload.j),
        format!("sector = {}", payload.sector),
        format!("r_max = {}", payload.r_max),
        format!(
            "q = {}",
            format_complex(Complex64::new(payload.q[0], payload.q[1]))
        ),
    ];
    if let Some(p) = payload.p {
        lines.push(format!(
            "p = {}",
            format_complex(Complex64::new(p[0], p[1]))
        ));
    }
    if let Some(m) = payload.m {
        lines.push(format!("M = {m}"));
    }
    if let Some(h) = payload.h {
        lines.push(format!("h = {h}"));
    }
    if let Some(scale) = payload.scale {
        lines.push(format!("even-limit scale = {scale}"));
    }
    lines.push(format!("symmetrized = {}", payload.symmetrized));
    if let Some(outside) = payload.poles_outside_unit {
        lines.push(format!("poles_outside_unit = {outside}"));
    }
    if let Some([a, b]) = payload.annulus {
        lines.push(format!("annulus = ({a}, {b})"));
    }
    lines
}

fn check_summary(check: &CheckPayload) -> String {
    format!(
        "check: {} oracle at radius {} -> max rel diff {:.3e} (doubling {:.3e}, tol {:.1e}) {}",
        check.method,
        check.radius,
        check.max_rel_diff,
        check.doubling_rel_diff,
        check.tolerance,
        if check.pass { "PASS" } else { "FAIL" }
    )
}

fn render_table_human(payload: &TablePayload) -> String {
    let mut text = String::new();
    for line in table_metadata_lines(payload) {
        let _ = writeln!(text, "# {line}");
    }
    let has_plus = payload.rows.iter().any(|r| r.re_plus.is_some());
    if has_plus {
        let _ = writeln!(
            text,
            "{:>6}  {:>24}  {:>24}  {:>24}  {:>24}",
            "r", "Re(c_r^-)", "Im(c_r^-)", "Re(c_r^+)", "Im(c_r^+)"
        );
    } else {
        let _ = writeln!(text, "{:>6}  {:>24}  {:>24}", "r", "Re(c_r)", "Im(c_r)");
    }
    for row in &payload.rows {
        if has_plus {
            let _ = writeln!(
                text,
                "{:>6}  {:>24}  {:>24}  {:>24}  {:>24}",
                row.r,
                row.re,
                row.im,
                row.re_plus.unwrap_or(0.0),
                row.im_plus.unwrap_or(0.0)
            );
        } else {
            let _ = writeln!(text, "{:>6}  {:>24}  {:>24}", row.r, row.re, row.im);
        }
    }
    if let Some(check) = &payload.check {
        let _ = writeln!(text, "{}", check_summary(check));
    }
    text
}

fn render_table_csv(payload: &TablePayload) -> String {
    let mut text = String::new();
    for line in table_metadata_lines(payload) {
        let _ = writeln!(text, "# {line}");
    }
    let has_plus = payload.rows.iter().any(|r| r.re_plus.is_some());
    if has_plus {
        text.push_str("r,re,im,re_plus,im_plus\n");
    } else {
        text.push_str("r,re,im\n");
    }
    for row in &payload.rows {
        if has_plus {
            let _ = writeln!(
                text,
                "{},{},{},{},{}",
                row.r,
                row.re,
                row.im,
                row.re_plus.unwrap_or(0.0),
                row.im_plus.unwrap_or(0.0)
            );
        } else {
            let _ = writeln!(text, "{},{},{}", row.r, row.re, row.im);
        }
    }
    if let Some(check) = &payload.check {
        let _ = writeln!(text, "# {}", check_summary(check));
    }
    text
}

// ---------------------------------------------------------------------------
// ladder
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PolePayload {
    re: f64,
    im: f64,
    order: u32,
}

#[derive(Serialize)]
struct RungPayload {
    index: usize,
    modulus: f64,
    poles: Vec<PolePayload>,
}

#[derive(Serialize)]
struct LadderPayload {
    schema: u32,
    regime: String,
    n: u32,
    i: u32,
    j: u32,
    q: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<i64>,
    mirror: bool,
    rungs: Vec<RungPayload>,
}

fn run_ladder(args: LadderArgs) -> Result<u8, CliError> {
    let policy = TruncationPolicy::default();
    let (ladder, regime, is_quantum) = match args.regime {
        LadderRegimeArg::Critical => (
            pole_ladder_classical(args.n, args.q, args.i, args.j, false, args.rungs)?,
            "critical",
            false,
        ),
        LadderRegimeArg::Odd => (
            pole_ladder_classical(args.n, args.q, args.i, args.j, true, args.rungs)?,
            "odd",
            false,
        ),
        LadderRegimeArg::Quantum => {
            if args.i != 1 || args.j != 1 {
                return Err(CliError::Lib(WqpError::IndexOutOfRange {
                    i: args.i as usize,
                    j: args.j as usize,
                    max: 1,
                }));
            }
            let surface = SurfaceSigma::new(args.n, args.m_int, args.q, args.p)?;
            let prod = quantum_product(&surface, &policy)?;
            (pole_ladder_quantum(&prod)?, "quantum", true)
        }
    };

    let payload = LadderPayload {
        schema: SCHEMA_VERSION,
        regime: regime.to_owned(),
        n: args.n,
        i: args.i,
        j: args.j,
        q: pair(args.q),
        p: is_quantum.then(|| pair(args.p)),
        m: is_quantum.then_some(args.m_int),
        mirror: ladder.mirror(),
        rungs: ladder
            .rungs()
            .iter()
            .enumerate()
            .map(|(index, rung)| RungPayload {
                index,
                modulus: rung.modulus,
                poles: rung
                    .poles
                    .iter()
                    .map(|p| PolePayload {
                        re: p.position.re,
                        im: p.position.im,
                        order: p.order,
                    })
                    .collect(),
            })
            .collect(),
    };

    let rendered = match args.output.output {
        OutputFormat::Human => render_ladder_human(&payload),
        OutputFormat::Json => {
            let mut text =
                serde_json::to_string_pretty(&payload).expect("ladder payload is a tree");
            text.push('\n');
            text
        }
        OutputFormat::Csv => render_ladder_csv(&payload),
    };
    emit(&rendered, args.output.out.as_deref())?;
    Ok(0)
}

fn ladder_metadata_lines(payload: &LadderPayload) -> Vec<String> {
    let mut lines = vec![
        format!("schema = {}", payload.schema),
        format!("regime = {}", payload.regime),
        format!("N = {}", payload.n),
        format!("(i, j) = ({}, {})", payload.i, payload.j),
        format!(
            "q = {}",
            format_complex(Complex64::new(payload.q[0], payload.q[1]))
        ),
    ];
    if let Some(p) = payload.p {
        lines.push(format!(
            "p = {}",
            format_complex(Complex64::new(p[0], p[1]))
        ));
    }
    if let Some(m) = payload.m {
        lines.push(format!("M = {m}"));
    }
    if payload.mirror {
        lines.push("mirror = true (poles repeat at the reciprocal moduli)".to_owned());
    } else {
        lines.push("mirror = false".to_owned());
    }
    lines.push("pole positions are in the x^2 plane".to_owned());
    lines
}

fn render_ladder_human(payload: &LadderPayload) -> String {
    let mut text = String::new();
    for line in ladder_metadata_lines(payload) {
        let _ = writeln!(text, "# {line}");
    }
    let _ = writeln!(text, "{:>5}  {:>22}  poles (position, order)", "rung", "|x|");
    for rung in &payload.rungs {
        let poles = rung
            .poles
            .iter()
            .map(|p| {
                format!(
                    "({}, {})",
                    format_complex(Complex64::new(p.re, p.im)),
                    p.order
                )
            })
            .collect::<Vec<_>>()
            .join("  ");
        let _ = writeln!(text, "{:>5}  {:>22}  {}", rung.index, rung.modulus, poles);
    }
    text
}

fn render_ladder_csv(payload: &LadderPayload) -> String {
    let mut text = String::new();
    for line in ladder_metadata_lines(payload) {
        let _ = writeln!(text, "# {line}");
    }
    text.push_str("rung,modulus,position_re,position_im,order\n");
    for rung in &payload.rungs {
        for p in &rung.poles {
            let _ = writeln!(
                text,
                "{},{},{},{},{}",
                rung.index, rung.modulus, p.re, p.im, p.order
            );
        }
    }
    text
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
