//! Command-line front end.
//!
//! Every command reads a JSON envelope `{"schema": 1, "spec": …}` (except
//! `appbound`, which takes flags only) and writes one JSON or CSV artifact
//! to stdout or atomically to `--output`. Exit codes: 0 success or SOUND,
//! 1 usage or configuration error, 2 VIOLATION.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::applications::{self, MetricForm};
use crate::bounds::{invert_denominator, tail, BoundKind, Inversion, ProxyProfile, TailBoundResult};
use crate::dist::DistributionSpec;
use crate::entropy::{self, FiniteDist, ProductTable};
use crate::error::Error;
use crate::functions::{proxy_profile_at, FunctionSpec, L2P_ORDER};
use crate::orlicz::{self, Alpha, GridOptions};
use crate::verify::{self, config_digest, BoundSeries, Verdict, VerificationReport, VerifyConfig, TOOL_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "concentration", version, about = "Compute, invert and falsify concentration inequalities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON envelope `{"schema": 1, "spec": …}`
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write here (atomically) instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override a spec field: `path.to.field=value` (value parsed as JSON, else string)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ψ₁ or ψ₂ norm of a distribution
    Norms {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        alpha: u8,
        #[arg(long, default_value_t = 256.0)]
        p_max: f64,
    },
    /// Entropy identities and bounds on a finite distribution or product table
    EntropyCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Tail bounds on a grid for a function spec or a proxy profile
    Bound {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bounds: BoundArgs,
        #[arg(long = "t-grid", value_name = "LO:HI:STEPS")]
        t_grid: String,
    },
    /// Deviation at confidence 1 − δ
    Invert {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bounds: BoundArgs,
        #[arg(long)]
        delta: f64,
    },
    /// Closed-form application bounds
    Appbound {
        #[command(subcommand)]
        app: AppCommand,
        #[arg(long, global = true)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo soundness check of bounds
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Tightness table of several bounds against one Monte-Carlo estimate
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Comma-separated bound kinds
    #[arg(long, value_delimiter = ',', default_value = "thm2")]
    pub bounds: Vec<BoundKind>,
    /// Moment order of the L_{2p} proxies
    #[arg(long)]
    pub p: Option<f64>,
    /// Use the L·Δ denominator for thm6
    #[arg(long)]
    pub proof_consistent: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub bounds: BoundArgs,
    #[arg(long = "t-grid", value_name = "LO:HI:STEPS")]
    pub t_grid: String,
    /// Monte-Carlo sample count
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    /// Add a halved thm2 column that the harness must flag
    #[arg(long)]
    pub negative_control: bool,
}

#[derive(Debug, Subcommand)]
pub enum AppCommand {
    VectorI {
        #[arg(long, value_delimiter = ',', required = true)]
        psi1: Vec<f64>,
        #[arg(long)]
        delta: f64,
    },
    VectorIi {
        #[arg(long)]
        psi1: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    VectorIii {
        #[arg(long)]
        l2p: f64,
        #[arg(long)]
        psi1: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    Psa {
        #[arg(long)]
        psi2: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    Rademacher {
        #[arg(long)]
        rad: f64,
        #[arg(long)]
        lipschitz: f64,
        #[arg(long)]
        psi1: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    Regression {
        #[arg(long)]
        lipschitz: f64,
        #[arg(long)]
        psi1_x: f64,
        #[arg(long)]
        psi1_z: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
    Metric {
        #[arg(long)]
        lipschitz: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        diameters: Vec<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        proof_consistent: bool,
    },
}

/// Failure of a CLI run, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Library(Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    schema: u32,
    spec: Value,
}

fn apply_override(spec: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = spec;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.get_mut(*part)
                    .ok_or_else(|| CliError::Usage(format!("override path `{key}`: no field `{part}`")))?
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::Usage(format!("override path `{key}`: `{part}` is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Usage(format!("override path `{key}`: index {idx} out of range")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::Usage(format!("override path `{key}`: `{part}` is not a container"))),
        };
    }
    Err(CliError::Usage(format!("override path `{key}` is empty")))
}

/// The spec value after schema check and overrides.
fn load_spec_value(common: &Common) -> CliResult<Value> {
    let text = fs::read_to_string(&common.spec)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", common.spec.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let env: Envelope = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Usage(format!("{}: at `{}`: {}", common.spec.display(), e.path(), e.inner())))?;
    if env.schema != SCHEMA_VERSION {
        return Err(CliError::Usage(format!("unsupported schema {}, expected {SCHEMA_VERSION}", env.schema)));
    }
    let mut spec = env.spec;
    for o in &common.overrides {
        apply_override(&mut spec, o)?;
    }
    Ok(spec)
}

/// Depth-first search for the first object holding `key`.
fn find_key(v: &Value, key: &str, path: &mut Vec<String>) -> bool {
    match v {
        Value::Object(map) => {
            if map.contains_key(key) {
                return true;
            }
            map.iter().any(|(k, child)| {
                path.push(k.clone());
                let found = find_key(child, key, path);
                if !found {
                    path.pop();
                }
                found
            })
        }
        Value::Array(items) => items.iter().enumerate().any(|(i, child)| {
            path.push(format!("[{i}]"));
            let found = find_key(child, key, path);
            if !found {
                path.pop();
            }
            found
        }),
        _ => false,
    }
}

/// Depth-first search for the first nested distribution that fails to parse.
fn find_bad_distribution(v: &Value, path: &mut Vec<String>) -> bool {
    let children: Vec<(String, &Value)> = match v {
        Value::Object(map) => map.iter().map(|(k, c)| (k.clone(), c)).collect(),
        Value::Array(items) => items.iter().enumerate().map(|(i, c)| (format!("[{i}]"), c)).collect(),
        _ => return false,
    };
    for (k, child) in children {
        path.push(k);
        if find_bad_distribution(child, path) {
            return true;
        }
        path.pop();
    }
    if v.get("kind").is_some() {
        if let Err(e) = serde_json::from_value::<DistributionSpec>(v.clone()) {
            return !e.to_string().starts_with("unknown variant");
        }
    }
    false
}

fn join_path(parts: &[String]) -> String {
    let mut s = String::from("spec");
    for p in parts {
        if !p.starts_with('[') {
            s.push('.');
        }
        s.push_str(p);
    }
    s
}

/// Internally tagged enums buffer their content, which hides the path of
/// an error inside them; recover it by searching the value.
fn error_location(value: &Value, path: &str, message: &str) -> String {
    if path != "." && !path.is_empty() {
        return format!("spec.{path}");
    }
    let mut parts = Vec::new();
    if let Some(field) = message.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
        if find_key(value, field, &mut parts) {
            return format!("{}.{field}", join_path(&parts));
        }
    }
    parts.clear();
    if find_bad_distribution(value, &mut parts) {
        return join_path(&parts);
    }
    "spec".into()
}

fn parse_value<T: DeserializeOwned>(value: &Value, what: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let at = error_location(value, &e.path().to_string(), &e.inner().to_string());
        CliError::Usage(format!("invalid {what} at `{at}`: {}", e.inner()))
    })
}

fn parse_t_grid(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("--t-grid `{s}` is not LO:HI:STEPS"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    Ok(verify::linear_grid(lo, hi, steps)?)
}

fn metric_form(proof_consistent: bool) -> MetricForm {
    if proof_consistent {
        MetricForm::ProofConsistent
    } else {
        MetricForm::Statement
    }
}

/// Temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp.{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn emit(output: Option<&Path>, contents: &str) -> CliResult<()> {
    match output {
        Some(p) => write_atomic(p, contents.as_bytes()).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

/// Standard wrapper for non-report outputs.
fn wrap(command: &str, config: &Value, seed: u64, result: Value) -> CliResult<Value> {
    Ok(json!({
        "tool_version": TOOL_VERSION,
        "command": command,
        "config_digest": config_digest(config)?,
        "seed": seed,
        "result": result,
    }))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result serializes")
}

fn require_json(common: &Common, command: &str) -> CliResult<()> {
    if common.format == Format::Csv {
        return Err(CliError::Usage(format!("`{command}` supports --format json only")));
    }
    Ok(())
}

fn run_norms(common: &Common, alpha: u8, p_max: f64) -> CliResult<i32> {
    require_json(common, "norms")?;
    let spec_value = load_spec_value(common)?;
    let spec: DistributionSpec = parse_value(&spec_value, "distribution")?;
    let alpha = Alpha::try_from(alpha)?;
    let est = orlicz::psi_norm(&spec, alpha, GridOptions { p_max, ..GridOptions::default() })?;
    let config = json!({"command": "norms", "spec": spec_value, "alpha": u8::from(alpha), "p_max": p_max});
    emit(common.output.as_deref(), &pretty(&wrap("norms", &config, common.seed, to_value(&est))?))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum EntropyInput {
    Finite {
        dist: FiniteDist,
        #[serde(default = "default_betas")]
        betas: Vec<f64>,
        #[serde(default = "default_holder_p")]
        holder_p: f64,
    },
    Product {
        table: ProductTable,
        #[serde(default = "default_gammas")]
        gammas: Vec<f64>,
    },
}

fn default_betas() -> Vec<f64> {
    vec![-1.0, 0.5, 2.0]
}

fn default_holder_p() -> f64 {
    2.0
}

fn default_gammas() -> Vec<f64> {
    vec![0.1, 1.0, 2.0]
}

/// Identity checks within this relative tolerance.
const IDENTITY_TOL: f64 = 1e-8;
const INEQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
    lhs: f64,
    rhs: f64,
    /// `None` when the hypothesis does not hold and the check is skipped
    holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

impl Check {
    fn identity(name: &'static str, param: Option<f64>, lhs: f64, rhs: f64) -> Self {
        let holds = (lhs - rhs).abs() <= IDENTITY_TOL * lhs.abs().max(1.0);
        Check { name, param, lhs, rhs, holds: Some(holds), note: None }
    }

    fn at_most(name: &'static str, param: Option<f64>, lhs: f64, rhs: f64) -> Self {
        Check { name, param, lhs, rhs, holds: Some(lhs <= rhs + INEQUALITY_TOL), note: None }
    }

    fn from_bound(name: &'static str, param: Option<f64>, r: crate::Result<entropy::EntropyBound>) -> CliResult<Self> {
        match r {
            Ok(b) => Ok(Check::at_most(name, param, b.s, b.bound)),
            Err(Error::HypothesisNotMet(m)) => {
                Ok(Check { name, param, lhs: f64::NAN, rhs: f64::NAN, holds: None, note: Some(m) })
            }
            Err(e) => Err(e.into()),
        }
    }
}

fn run_entropy_check(common: &Common) -> CliResult<i32> {
    require_json(common, "entropy-check")?;
    let spec_value = load_spec_value(common)?;
    let input: EntropyInput = parse_value(&spec_value, "entropy input")?;
    let mut checks = Vec::new();
    let summary = match &input {
        EntropyInput::Finite { dist, betas, holder_p } => {
            for &b in betas {
                let (direct, integral) = entropy::log_mgf_via_entropy(dist, b, 1e-12)?;
                checks.push(Check::identity("log-mgf-via-entropy", Some(b), direct, integral));
                let sg = entropy::entropy_bound_subgaussian(dist, b)?;
                checks.push(Check::at_most("entropy-subgaussian", Some(b), sg.s, sg.bound));
            }
            checks.push(Check::identity("fluctuation-entropy", None, entropy::entropy(dist), entropy::fluctuation_entropy(dist, 1e-12)?));
            let c = dist.centered();
            checks.push(Check::from_bound("entropy-subexponential", None, entropy::entropy_bound_subexponential(&c))?);
            checks.push(Check::from_bound("entropy-holder-psi1", Some(*holder_p), entropy::entropy_bound_holder(&c, *holder_p, Alpha::Psi1))?);
            checks.push(Check::from_bound("entropy-holder-psi2", Some(*holder_p), entropy::entropy_bound_holder(&c, *holder_p, Alpha::Psi2))?);
            json!({"entropy": entropy::entropy(dist), "log_mgf": entropy::log_mgf(dist)})
        }
        EntropyInput::Product { table, gammas } => {
            for &g in gammas {
                let gap = entropy::subadditivity_gap(table, g)?;
                checks.push(Check { name: "subadditivity-gap", param: Some(g), lhs: gap, rhs: 0.0, holds: Some(gap >= -1e-12), note: None });
            }
            json!({"cardinality": table.cardinality(), "mean": table.mean()})
        }
    };
    let violated = checks.iter().any(|c| c.holds == Some(false));
    let result = json!({
        "summary": summary,
        "checks": checks,
        "verdict": if violated { Verdict::Violation } else { Verdict::Sound },
    });
    let config = json!({"command": "entropy-check", "spec": spec_value});
    emit(common.output.as_deref(), &pretty(&wrap("entropy-check", &config, common.seed, result)?))?;
    Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
}

/// A bound target: a catalogue function (has `kind`) or a bare profile.
enum Target {
    Function(FunctionSpec),
    Profile(ProxyProfile),
}

fn parse_target(v: &Value) -> CliResult<Target> {
    if v.get("kind").is_some() {
        Ok(Target::Function(parse_value(v, "function")?))
    } else {
        let p: ProxyProfile = parse_value(v, "proxy profile")?;
        p.validate()?;
        Ok(Target::Profile(p))
    }
}

fn target_series(target: &Target, args: &BoundArgs, t_grid: &[f64]) -> CliResult<Vec<BoundSeries>> {
    match target {
        Target::Function(f) => Ok(verify::bound_series(f, &args.bounds, t_grid, args.p, metric_form(args.proof_consistent))?),
        Target::Profile(profile) => args
            .bounds
            .iter()
            .map(|&kind| {
                let p = if kind.needs_p() { Some(args.p.unwrap_or(L2P_ORDER)) } else { None };
                let results = t_grid.iter().map(|&t| tail(kind, profile, p, t)).collect::<crate::Result<Vec<TailBoundResult>>>()?;
                Ok(BoundSeries::new(kind, results))
            })
            .collect(),
    }
}

fn bound_config(command: &str, spec: &Value, args: &BoundArgs, extra: Value) -> Value {
    json!({
        "command": command,
        "spec": spec,
        "bounds": args.bounds.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
        "p": args.p,
        "metric_form": metric_form(args.proof_consistent),
        "extra": extra,
    })
}

fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

fn run_bound(common: &Common, args: &BoundArgs, t_grid: &str) -> CliResult<i32> {
    let spec_value = load_spec_value(common)?;
    let target = parse_target(&spec_value)?;
    let grid = parse_t_grid(t_grid)?;
    let series = target_series(&target, args, &grid)?;
    let config = bound_config("bound", &spec_value, args, json!({"t_grid": grid}));
    let digest = config_digest(&config)?;
    let text = match common.format {
        Format::Json => pretty(&wrap("bound", &config, common.seed, to_value(&series))?),
        Format::Csv => {
            let mut out = format!("# concentration {TOOL_VERSION} config_digest={digest} seed={}\nt", common.seed);
            for s in &series {
                out.push(',');
                out.push_str(&s.label);
            }
            out.push('\n');
            for (j, t) in grid.iter().enumerate() {
                out.push_str(&fmt_float(*t));
                for s in &series {
                    out.push(',');
                    out.push_str(&fmt_float(s.results[j].prob));
                }
                out.push('\n');
            }
            out
        }
    };
    emit(common.output.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn run_invert(common: &Common, args: &BoundArgs, delta: f64) -> CliResult<i32> {
    require_json(common, "invert")?;
    let spec_value = load_spec_value(common)?;
    let target = parse_target(&spec_value)?;
    let p = args.p.unwrap_or(L2P_ORDER);
    let inversions: Vec<Inversion> = args
        .bounds
        .iter()
        .map(|&kind| -> CliResult<Inversion> {
            let den = match (&target, kind) {
                (Target::Function(FunctionSpec::MetricLipschitz { lipschitz, coordinate_dists, .. }), BoundKind::Thm6) => {
                    let diam: Vec<f64> = coordinate_dists
                        .iter()
                        .map(|c| Ok(applications::psi_diameter(c, Alpha::Psi1)?.value))
                        .collect::<crate::Result<_>>()?;
                    Some(applications::metric_denominator(*lipschitz, &diam, metric_form(args.proof_consistent))?)
                }
                (Target::Function(f), _) => crate::bounds::denominator(kind, &proxy_profile_at(f, p)?, kind.needs_p().then_some(p))?,
                (Target::Profile(profile), _) => crate::bounds::denominator(kind, profile, kind.needs_p().then_some(p))?,
            };
            let den = den.ok_or_else(|| Error::Precondition(format!("{kind}: {}", crate::bounds::INAPPLICABLE_NOTE)))?;
            Ok(invert_denominator(kind, den, delta)?)
        })
        .collect::<CliResult<_>>()?;
    let config = bound_config("invert", &spec_value, args, json!({"delta": delta}));
    emit(common.output.as_deref(), &pretty(&wrap("invert", &config, common.seed, to_value(&inversions))?))?;
    Ok(EXIT_OK)
}

fn run_appbound(app: &AppCommand, output: Option<&Path>) -> CliResult<i32> {
    use applications::*;
    let (name, inputs, value): (&str, Value, Value) = match app {
        AppCommand::VectorI { psi1, delta } => {
            ("vector-i", json!({"psi1": psi1, "delta": delta}), json!(vector_bound_i(psi1, *delta)?))
        }
        AppCommand::VectorIi { psi1, n, delta } => {
            ("vector-ii", json!({"psi1": psi1, "n": n, "delta": delta}), json!(vector_bound_ii(*psi1, *n, *delta)?))
        }
        AppCommand::VectorIii { l2p, psi1, p, n, delta } => (
            "vector-iii",
            json!({"l2p": l2p, "psi1": psi1, "p": p, "n": n, "delta": delta}),
            json!(vector_bound_iii(*l2p, *psi1, *p, *n, *delta)?),
        ),
        AppCommand::Psa { psi2, d, n, delta } => {
            ("psa", json!({"psi2": psi2, "d": d, "n": n, "delta": delta}), json!(psa_bound(*psi2, *d, *n, *delta)?))
        }
        AppCommand::Rademacher { rad, lipschitz, psi1, n, delta } => (
            "rademacher",
            json!({"rad": rad, "lipschitz": lipschitz, "psi1": psi1, "n": n, "delta": delta}),
            json!(rademacher_generalization_bound(*rad, *lipschitz, *psi1, *n, *delta)?),
        ),
        AppCommand::Regression { lipschitz, psi1_x, psi1_z, n, delta } => (
            "regression",
            json!({"lipschitz": lipschitz, "psi1_x": psi1_x, "psi1_z": psi1_z, "n": n, "delta": delta}),
            json!(regression_bound(*lipschitz, *psi1_x, *psi1_z, *n, *delta)?),
        ),
        AppCommand::Metric { lipschitz, diameters, t, proof_consistent } => (
            "metric",
            json!({"lipschitz": lipschitz, "diameters": diameters, "t": t, "metric_form": metric_form(*proof_consistent)}),
            to_value(&metric_tail(*lipschitz, diameters, *t, metric_form(*proof_consistent))?),
        ),
    };
    let config = json!({"command": "appbound", "application": name, "inputs": inputs});
    let out = json!({
        "tool_version": TOOL_VERSION,
        "command": "appbound",
        "config_digest": config_digest(&config)?,
        "application": name,
        "inputs": inputs,
        "value": value,
    });
    emit(output, &pretty(&out))?;
    Ok(EXIT_OK)
}

fn verify_config(common: &Common, run: &RunArgs) -> CliResult<VerifyConfig> {
    let spec_value = load_spec_value(common)?;
    Ok(VerifyConfig {
        function: parse_value(&spec_value, "function")?,
        bounds: run.bounds.bounds.clone(),
        t_grid: parse_t_grid(&run.t_grid)?,
        n: run.n,
        seed: common.seed,
        p: run.bounds.p,
        metric_form: metric_form(run.bounds.proof_consistent),
        negative_control: run.negative_control,
    })
}

fn report_csv_header(r: &VerificationReport) -> String {
    format!(
        "# concentration {} config_digest={} seed={}\n",
        r.tool_version,
        r.config_digest,
        r.seed.map(|s| s.to_string()).unwrap_or_default()
    )
}

fn exit_for(r: &VerificationReport) -> i32 {
    if r.verdict == Verdict::Violation {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}

fn run_verify(common: &Common, run: &RunArgs) -> CliResult<i32> {
    let cfg = verify_config(common, run)?;
    let report = verify::run_verification(&cfg, common.threads)?;
    let text = match common.format {
        Format::Json => report.to_json(),
        Format::Csv => report_csv_header(&report) + &report.to_csv(),
    };
    emit(common.output.as_deref(), &text)?;
    Ok(exit_for(&report))
}

/// Columns `t, empirical, cp_lo, cp_hi`, then `ln(bound/empirical)` per bound.
fn comparison_csv(r: &VerificationReport) -> String {
    let mut out = report_csv_header(r);
    out.push_str("t,empirical,cp_lo,cp_hi");
    for l in &r.bound_labels {
        out.push_str(",ln_ratio_");
        out.push_str(l);
    }
    out.push('\n');
    for row in &r.rows {
        let mut cols = vec![fmt_float(row.t), fmt_float(row.empirical), fmt_float(row.cp_lower), fmt_float(row.cp_upper)];
        cols.extend(row.bounds.iter().map(|c| c.log_tightness.map(fmt_float).unwrap_or_else(|| "inf".into())));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

fn run_compare(common: &Common, run: &RunArgs) -> CliResult<i32> {
    let cfg = verify_config(common, run)?;
    let report = verify::run_verification(&cfg, common.threads)?;
    let text = match common.format {
        Format::Json => report.to_json(),
        Format::Csv => comparison_csv(&report),
    };
    emit(common.output.as_deref(), &text)?;
    Ok(exit_for(&report))
}

pub fn run(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Norms { common, alpha, p_max } => run_norms(common, *alpha, *p_max),
        Command::EntropyCheck { common } => run_entropy_check(common),
        Command::Bound { common, bounds, t_grid } => run_bound(common, bounds, t_grid),
        Command::Invert { common, bounds, delta } => run_invert(common, bounds, *delta),
        Command::Appbound { app, output } => run_appbound(app, output.as_deref()),
        Command::Verify { common, run } => run_verify(common, run),
        Command::Compare { common, run } => run_compare(common, run),
    }
}

/// Parse arguments, run, report errors on stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
