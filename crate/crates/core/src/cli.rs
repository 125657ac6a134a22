//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 precondition violation,
//! 3 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::acceptance::CRITERIA;
use crate::bounds::{
    abs_cube_bound, corollary_bound, cube_plus_bound, optimize_corollary, round_significant, theorem_bound, Constraints,
};
use crate::error::Error;
use crate::function_class::F3Function;
use crate::mixture::{mixture_expectation, MixtureParams};
use crate::verification::{
    check_spec, exact_expectation, extremal_spec, random_valid_spec, sweep_seeds, DistributionSpec, SweepReport,
    DEFAULT_THRESHOLDS, MAX_RANDOM_VARS,
};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "rosenthal3", version, about = "Third-moment bounds for sums of independent random variables")]
struct Cli {
    #[arg(long, value_enum, default_value = "human", global = true)]
    format: Format,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct FunctionArgs {
    /// Function term: hinge:c,t,alpha | exp:c,lambda | affine:a,b (repeatable, summed)
    #[arg(long = "f", value_name = "TERM", allow_hyphen_values = true)]
    f: Vec<String>,
    /// JSON function document, added to any --f terms
    #[arg(long, value_name = "PATH")]
    f_file: Option<PathBuf>,
}

impl FunctionArgs {
    fn is_empty(&self) -> bool {
        self.f.is_empty() && self.f_file.is_none()
    }

    fn load(&self) -> Result<F3Function, CliError> {
        let mut f = F3Function::from_literals(&self.f)?;
        if let Some(path) = &self.f_file {
            let text = read(path)?;
            let doc: F3Function = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            f = f + doc;
        }
        Ok(f)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Main bound for a function, and the shifted / absolute cube bounds at --x
    Bound {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        /// sum E|X_i|^3; adds the absolute cube bound (zero-mean summands)
        #[arg(long)]
        sum_abs3: Option<f64>,
    },
    /// Positive-part moment bound; optimizes a when --a is omitted
    Corollary {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
    /// Gaussian/centered-Poisson mixture expectation at truncation level y
    Mixture {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
    },
    /// Check the inequalities on a spec document or on random specs
    Verify {
        #[arg(long, value_name = "PATH", conflicts_with = "random")]
        spec: Option<PathBuf>,
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Largest number of variables per random spec
        #[arg(long, default_value_t = 8)]
        n_vars: usize,
        /// Declared beta for --spec (default: the spec's own)
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long = "x", allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    /// Spike-plus-filler spec and its ratio to the shifted cube bound
    Extremal {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        y: f64,
        #[arg(long)]
        n_spikes: usize,
        #[arg(long)]
        n_fillers: usize,
        #[arg(long)]
        filler_scale: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
    },
    /// Run the acceptance suite
    Selftest,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
    /// Already reported; exit with this code.
    Exit(i32),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::NonFinite { .. } | Error::InvalidFunction(_) | Error::InvalidSpec(_) => EXIT_USAGE,
                _ => EXIT_PRECONDITION,
            },
            CliError::Exit(code) => *code,
        }
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                CliError::Usage(m) => {
                    let _ = writeln!(err, "error: {m}");
                }
                CliError::Lib(l) => {
                    let _ = writeln!(err, "error: {l}");
                }
                CliError::Exit(_) => {}
            }
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let (command, body) = match &cli.command {
        Command::Bound {
            function,
            beta,
            x,
            sum_abs3,
        } => ("bound", bound(function, *beta, *x, *sum_abs3)?),
        Command::Corollary { p, a, beta } => ("corollary", corollary(*p, *a, *beta)?),
        Command::Mixture {
            function,
            beta,
            y,
            eps,
        } => ("mixture", mixture(function, *beta, *y, *eps)?),
        Command::Verify {
            spec,
            random,
            count,
            n_vars,
            beta,
            x,
        } => return verify(cli, spec.as_ref(), *random, *count, *n_vars, *beta, x, out, err),
        Command::Extremal {
            beta,
            y,
            n_spikes,
            n_fillers,
            filler_scale,
            x,
        } => ("extremal", extremal(*beta, *y, *n_spikes, *n_fillers, *filler_scale, *x)?),
        Command::Selftest => return selftest(cli.format, out, err),
    };
    emit(cli, command, body, out)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn emit(cli: &Cli, command: &str, body: Value, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Usage(format!("cannot write output: {e}"));
    match cli.format {
        Format::Structured => {
            let doc = json!({
                "version": VERSION,
                "command": command,
                "seed": cli.seed,
                "result": body,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable")).map_err(io)
        }
        Format::Human => {
            let mut lines = Vec::new();
            flatten("", &body, &mut lines);
            for line in lines {
                writeln!(out, "{line}").map_err(io)?;
            }
            Ok(())
        }
    }
}

fn flatten(prefix: &str, v: &Value, lines: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, lines);
            }
        }
        Value::Array(items) if items.iter().any(|i| i.is_object() || i.is_array()) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, lines);
            }
        }
        Value::String(s) => lines.push(format!("{prefix}: {s}")),
        other => lines.push(format!("{prefix}: {other}")),
    }
}

fn bound(function: &FunctionArgs, beta: f64, x: Option<f64>, sum_abs3: Option<f64>) -> Result<Value, CliError> {
    if function.is_empty() && x.is_none() {
        return Err(CliError::Usage("bound needs a function (--f / --f-file) or a threshold --x".into()));
    }
    if sum_abs3.is_some() && x.is_none() {
        return Err(CliError::Usage("--sum-abs3 needs --x".into()));
    }
    let c = Constraints::new(beta)?;
    let mut body = Map::new();
    if !function.is_empty() {
        let f = function.load()?;
        body.insert("function".into(), Value::String(f.to_string()));
        body.insert("theorem".into(), to_value(&theorem_bound(&f, &c)?));
    }
    if let Some(x) = x {
        body.insert("cube_plus".into(), to_value(&cube_plus_bound(x, &c)?));
        if let Some(s) = sum_abs3 {
            body.insert("abs_cube".into(), to_value(&abs_cube_bound(x, s, &c.with_zero_means())?));
        }
    }
    Ok(Value::Object(body))
}

fn corollary(p: f64, a: Option<f64>, beta: f64) -> Result<Value, CliError> {
    let c = Constraints::new(beta)?;
    let (a_star, optimized, r) = match a {
        Some(a) => (a, false, corollary_bound(p, a, &c)?),
        None => {
            let (a, r) = optimize_corollary(p, &c)?;
            (a, true, r)
        }
    };
    let constant = r.parameters["constant"];
    let coefficient = r.parameters["coefficient"];
    Ok(json!({
        "a": a_star,
        "optimized": optimized,
        "bound": r,
        "rounded": {
            "constant": round_significant(constant, 3),
            "coefficient": round_significant(coefficient, 3),
        },
    }))
}

fn mixture(function: &FunctionArgs, beta: f64, y: f64, eps: f64) -> Result<Value, CliError> {
    if function.is_empty() {
        return Err(CliError::Usage("mixture needs a function (--f / --f-file)".into()));
    }
    let f = function.load()?;
    let mp = MixtureParams::new(beta, y)?;
    let r = mixture_expectation(&f, &mp, eps)?;
    Ok(json!({ "function": f.to_string(), "bound": r }))
}

#[allow(clippy::too_many_arguments)]
fn verify(
    cli: &Cli,
    spec_path: Option<&PathBuf>,
    random: bool,
    count: usize,
    n_vars: usize,
    beta: Option<f64>,
    x: &[f64],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let thresholds: Vec<f64> = if x.is_empty() { DEFAULT_THRESHOLDS.to_vec() } else { x.to_vec() };
    let report = match (spec_path, random) {
        (Some(path), false) => {
            let text = read(path)?;
            let spec: DistributionSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            check_spec(&spec, beta, &thresholds, 0)?
        }
        (None, true) => {
            if n_vars == 0 || n_vars > MAX_RANDOM_VARS {
                return Err(CliError::Usage(format!("--n-vars must lie in 1..={MAX_RANDOM_VARS}")));
            }
            let mut total: Option<SweepReport> = None;
            for (i, (s, n)) in sweep_seeds(cli.seed, count, n_vars).into_iter().enumerate() {
                let (spec, achieved) = random_valid_spec(s, n, 0.0)?;
                let r = check_spec(&spec, Some(beta.unwrap_or(0.0).max(achieved)), &thresholds, i)?;
                total = Some(match total {
                    None => r,
                    Some(mut t) => {
                        t.merge(r);
                        t
                    }
                });
            }
            total.ok_or_else(|| CliError::Usage("--count must be positive".into()))?
        }
        _ => return Err(CliError::Usage("verify needs exactly one of --spec <path> or --random".into())),
    };
    let specs_passed = report.specs - report.failed_specs();
    let body = json!({
        "specs": report.specs,
        "specs_passed": specs_passed,
        "checks": report.checks,
        "checks_passed": report.passed,
        "min_margin": report.min_margin,
        "by_inequality": report.by_inequality,
    });
    if cli.format == Format::Human {
        let _ = writeln!(out, "{specs_passed}/{} specs pass", report.specs);
    }
    emit(cli, "verify", body, out)?;
    if !report.all_passed() {
        let _ = writeln!(
            err,
            "verification failure: {} violated checks; offending fixtures follow",
            report.violations.len()
        );
        let _ = writeln!(err, "{}", serde_json::to_string_pretty(&report.violations).expect("serializable"));
        return Err(CliError::Exit(EXIT_VERIFICATION));
    }
    Ok(())
}

fn extremal(beta: f64, y: f64, n_spikes: usize, n_fillers: usize, filler_scale: f64, x: f64) -> Result<Value, CliError> {
    let e = extremal_spec(beta, y, n_spikes, n_fillers, filler_scale)?;
    let exact = exact_expectation(&e.spec, &F3Function::cube_plus(x)?)?;
    let bound = cube_plus_bound(x, &Constraints::new(e.effective_beta)?)?;
    let b = bound.value.to_f64();
    Ok(json!({
        "q": e.q,
        "h": e.h,
        "filler_prob": e.filler_prob,
        "leakage": e.leakage,
        "effective_beta": e.effective_beta,
        "variance_total": e.variance_total,
        "exact": exact,
        "bound": bound,
        "ratio": exact / b,
    }))
}

fn selftest(format: Format, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut outcomes = Vec::new();
    for c in &CRITERIA {
        let o = c.run();
        match format {
            Format::Human => {
                let _ = writeln!(out, "{}", o.line());
            }
            Format::Structured => {
                let _ = writeln!(err, "{}", o.line());
            }
        }
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    match format {
        Format::Human => {
            let _ = writeln!(out, "{passed}/{} criteria pass", outcomes.len());
        }
        Format::Structured => {
            let doc = json!({
                "version": VERSION,
                "command": "selftest",
                "result": { "passed": passed, "total": outcomes.len(), "criteria": outcomes },
            });
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
    }
    if passed == outcomes.len() {
        Ok(())
    } else {
        Err(CliError::Exit(EXIT_VERIFICATION))
    }
}
