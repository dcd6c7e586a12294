//! Command-line front end. Every command yields one JSON report carrying
//! `"schema": "1"`; exit status 0 means computed (whatever the verdicts),
//! 1 a usage error, 2 a failed mathematical precondition.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::{Float, Rational};
use serde_json::{json, Map, Value};

use crate::affine::{self, Verdict, DEFAULT_VANISHING_TOLERANCE};
use crate::cr::{self, PdeInit, PDE_INIT_KEYS};
use crate::error::Error;
use crate::expr::{self, Backend};
use crate::io::{coeffs_to_json, jet_from_json, jet_to_json};
use crate::jet::Jet;
use crate::scalar::{check_precision, Scalar};
use crate::transform::{self, AffineMap, Law, NormVerdict};

pub const SCHEMA: &str = "1";
pub const DEFAULT_PRECISION: u32 = 256;

#[derive(Parser, Debug)]
#[command(name = "tubejet", version, about = "Affine and CR invariants of graphed curves and surfaces, on exact jets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Every invariant applicable to the input's dimension.
    Invariants(Compute),
    /// Vanishing verdicts and the resulting classification.
    Classify(Compute),
    /// Image of the input graph under an affine map.
    Transform {
        #[command(flatten)]
        compute: Compute,
        #[command(flatten)]
        map: MapSource,
    },
    /// Normalize a rank-one Hessian surface to u = x^2/(1-y).
    Normalize(Compute),
    /// Fill a jet from eight initial values with the flat-model PDE system.
    Propagate {
        /// F, F_x, F_xx, F_xxx, F_xxxx, F_y, F_xy, F_xxy at the origin.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        init: Vec<String>,
        #[command(flatten)]
        numeric: Numeric,
    },
    /// Residuals of the transformation laws on random near-identity maps.
    VerifyLaws {
        #[command(flatten)]
        compute: Compute,
        /// Law names; defaults to every law valid for the input's dimension.
        #[arg(long = "law")]
        laws: Vec<String>,
        #[arg(long, default_value_t = 10)]
        maps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Built-in models.
    Models {
        #[arg(long)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a JSON array of argument lists; entries run independently.
    Batch {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Graphing function, e.g. "x^2/(1-y)".
    #[arg(long)]
    pub expr: Option<String>,
    /// Built-in model name (see `models --list`).
    #[arg(long)]
    pub model: Option<String>,
    /// Jet JSON file.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Compute {
    #[command(flatten)]
    pub source: Source,
    /// Comma-separated variable names for --expr.
    #[arg(long, value_delimiter = ',')]
    pub vars: Option<Vec<String>>,
    /// Number of graphing variables.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated base point.
    #[arg(long, allow_hyphen_values = true)]
    pub base: Option<String>,
    #[command(flatten)]
    pub numeric: Numeric,
}

#[derive(Args, Debug, Clone)]
pub struct Numeric {
    #[arg(long, default_value_t = 8)]
    pub order: u32,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Float precision in bits.
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: u32,
    /// Absolute vanishing threshold for float verdicts.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct MapSource {
    /// `{"matrix": [[...]], "translation": [...]}` with rational strings.
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub map_file: Option<PathBuf>,
    /// Random near-identity map from this seed.
    #[arg(long)]
    pub random_map: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendArg {
    Exact,
    Float,
}

/// Result of one command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Option<Value>,
    /// Help text or a usage message.
    pub message: Option<String>,
    pub out: Option<PathBuf>,
}

impl Outcome {
    /// The report as written to stdout or `--out`.
    pub fn rendered(&self) -> Option<String> {
        self.report
            .as_ref()
            .map(|r| serde_json::to_string_pretty(r).expect("JSON values serialize") + "\n")
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Hypothesis(_)
        | Error::NonUnit
        | Error::Domain { .. }
        | Error::ImplicitNotZero(_)
        | Error::ImplicitDegenerate(_)
        | Error::SingularMap => 2,
        _ => 1,
    }
}

fn error_kind(code: i32) -> &'static str {
    if code == 2 {
        "precondition"
    } else {
        "usage"
    }
}

/// Parses `argv` (without the program name) and runs the command.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args: Vec<String> = std::iter::once("tubejet".to_string())
        .chain(argv.into_iter().map(Into::into))
        .collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return Outcome {
                code,
                report: None,
                message: Some(e.render().to_string()),
                out: None,
            };
        }
    };
    execute(&cli.command)
}

pub fn execute(cmd: &Command) -> Outcome {
    let name = command_name(cmd);
    let out = match cmd {
        Command::Invariants(c) | Command::Classify(c) | Command::Normalize(c) => c.numeric.out.clone(),
        Command::Transform { compute, .. } | Command::VerifyLaws { compute, .. } => compute.numeric.out.clone(),
        Command::Propagate { numeric, .. } => numeric.out.clone(),
        Command::Models { out, .. } | Command::Batch { out, .. } => out.clone(),
    };
    let result = match cmd {
        Command::Models { .. } => Ok(models_report()),
        Command::Batch { file, .. } => batch(file),
        Command::Propagate { init, numeric } => propagate(init, numeric),
        _ => dispatch(cmd),
    };
    match result {
        Ok(mut report) => {
            report.insert("schema".into(), json!(SCHEMA));
            Outcome {
                code: 0,
                report: Some(Value::Object(reorder(report))),
                message: None,
                out,
            }
        }
        Err(e) => {
            let code = exit_code(&e);
            let mut report = Map::new();
            report.insert("schema".into(), json!(SCHEMA));
            report.insert("command".into(), json!(name));
            report.insert("error".into(), json!({"kind": error_kind(code), "message": e.to_string()}));
            Outcome {
                code,
                report: Some(Value::Object(report)),
                message: Some(e.to_string()),
                out,
            }
        }
    }
}

/// `schema` and `command` first, the rest in insertion order.
fn reorder(mut m: Map<String, Value>) -> Map<String, Value> {
    let mut out = Map::new();
    for k in ["schema", "command"] {
        if let Some(v) = m.shift_remove(k) {
            out.insert(k.into(), v);
        }
    }
    out.extend(m);
    out
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Invariants(_) => "invariants",
        Command::Classify(_) => "classify",
        Command::Transform { .. } => "transform",
        Command::Normalize(_) => "normalize",
        Command::Propagate { .. } => "propagate",
        Command::VerifyLaws { .. } => "verify-laws",
        Command::Models { .. } => "models",
        Command::Batch { .. } => "batch",
    }
}

type Report = Map<String, Value>;

// ---------------------------------------------------------------------------
// Inputs

struct Input<S: Scalar> {
    jet: Jet<S>,
    describe: Value,
}

fn default_vars(dim: usize) -> Vec<String> {
    match dim {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        n => (1..=n).map(|i| format!("x{i}")).collect(),
    }
}

fn parse_base<S: Scalar>(text: &str, n: usize, ctx: &S::Ctx) -> crate::Result<Vec<S>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(Error::Invalid(format!("--base needs {n} value(s), got {}", parts.len())));
    }
    parts.iter().map(|p| S::parse(ctx, p)).collect()
}

fn load<S: Scalar>(c: &Compute, ctx: &S::Ctx) -> crate::Result<Input<S>> {
    let order = c.numeric.order;
    let check_dim = |n: usize| -> crate::Result<()> {
        match c.dim {
            Some(d) if d != n => Err(Error::Invalid(format!("--dim {d} but the input has {n} variable(s)"))),
            _ => Ok(()),
        }
    };
    if let Some(text) = &c.source.expr {
        let e = expr::parse(text)?;
        let vars = match (&c.vars, c.dim) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => default_vars(d),
            (None, None) => {
                let used = e.variables();
                if used.iter().all(|v| v == "x" || v == "y") {
                    default_vars(if used.iter().any(|v| v == "y") { 2 } else { 1 })
                } else {
                    used
                }
            }
        };
        check_dim(vars.len())?;
        let base = match &c.base {
            Some(b) => parse_base(b, vars.len(), ctx)?,
            None => vec![S::zero(ctx); vars.len()],
        };
        let jet = expr::eval_jet(&e, &vars, &base, order, ctx)?;
        let describe = json!({
            "expr": e.to_string(),
            "vars": vars,
            "base": base.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        });
        return Ok(Input { jet, describe });
    }
    if let Some(name) = &c.source.model {
        let m = expr::model(name).ok_or_else(|| Error::Invalid(format!("unknown model `{name}`")))?;
        check_dim(m.vars.len())?;
        let base = match &c.base {
            Some(b) => parse_base(b, m.vars.len(), ctx)?,
            None => m.base_as::<S>(ctx),
        };
        let jet = expr::eval_jet(&m.parsed(), &m.vars, &base, order, ctx)?;
        let describe = json!({
            "model": m.name,
            "expr": m.expr,
            "vars": m.vars,
            "base": base.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        });
        return Ok(Input { jet, describe });
    }
    let path = c.source.file.as_ref().expect("clap enforces one source");
    let text = fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let jet: Jet<S> = jet_from_json(&value, ctx)?;
    check_dim(jet.nvars())?;
    if jet.order() < order {
        return Err(Error::OrderTooLow {
            what: "jet file".into(),
            needed: order,
            got: jet.order(),
        });
    }
    let jet = jet.truncate(order);
    let describe = json!({"file": path.display().to_string(), "vars": jet.vars()});
    Ok(Input { jet, describe })
}

fn backend_of(c: &Compute) -> Backend {
    match c.numeric.backend {
        Some(BackendArg::Exact) => Backend::Exact,
        Some(BackendArg::Float) => Backend::Float,
        None => c
            .source
            .model
            .as_deref()
            .and_then(expr::model)
            .map_or(Backend::Exact, |m| m.backend),
    }
}

fn min_order(cmd: &Command, dim: usize) -> u32 {
    match cmd {
        Command::Invariants(_) | Command::Classify(_) => match dim {
            1 | 2 => 6,
            _ => 2,
        },
        Command::Normalize(_) => 6,
        Command::VerifyLaws { .. } => match dim {
            1 => 5,
            _ => 4,
        },
        _ => 0,
    }
}

fn dispatch(cmd: &Command) -> crate::Result<Report> {
    let c = match cmd {
        Command::Invariants(c) | Command::Classify(c) | Command::Normalize(c) => c,
        Command::Transform { compute, .. } | Command::VerifyLaws { compute, .. } => compute,
        _ => unreachable!("handled by execute"),
    };
    match backend_of(c) {
        Backend::Exact => dispatch_on::<Rational>(cmd, c, &()),
        Backend::Float => {
            let prec = check_precision(c.numeric.precision)?;
            dispatch_on::<Float>(cmd, c, &prec)
        }
    }
}

fn header<S: Scalar>(cmd: &Command, c: &Compute, input: &Input<S>, ctx: &S::Ctx, tol: f64) -> Report {
    let mut r = Map::new();
    r.insert("command".into(), json!(command_name(cmd)));
    r.insert("input".into(), input.describe.clone());
    r.insert("order".into(), json!(c.numeric.order));
    r.insert("backend".into(), json!(S::BACKEND));
    let mut t = Map::new();
    if S::EXACT {
        t.insert("vanishing".into(), json!("exact"));
    } else {
        t.insert("vanishing".into(), json!(tol));
        t.insert("precision_bits".into(), json!(c.numeric.precision));
        t.insert("unit_test".into(), json!(S::default_tolerance(ctx)));
    }
    r.insert("tolerance".into(), Value::Object(t));
    r
}

fn dispatch_on<S: Scalar>(cmd: &Command, c: &Compute, ctx: &S::Ctx) -> crate::Result<Report> {
    let tol = if S::EXACT {
        0.0
    } else {
        c.numeric.tolerance.unwrap_or(DEFAULT_VANISHING_TOLERANCE)
    };
    let input = load::<S>(c, ctx)?;
    let need = min_order(cmd, input.jet.nvars());
    if c.numeric.order < need {
        return Err(Error::OrderTooLow {
            what: format!("`{}`", command_name(cmd)),
            needed: need,
            got: c.numeric.order,
        });
    }
    let mut r = header(cmd, c, &input, ctx, tol);
    let f = &input.jet;
    match cmd {
        Command::Invariants(_) => invariants(&mut r, f, tol),
        Command::Classify(_) => classify(&mut r, f, tol),
        Command::Transform { map, .. } => transform_cmd(&mut r, f, map, ctx, tol)?,
        Command::Normalize(_) => normalize(&mut r, f)?,
        Command::VerifyLaws { laws, maps, seed, .. } => verify_laws(&mut r, f, laws, *maps, *seed, tol)?,
        _ => unreachable!("handled by execute"),
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Commands

fn jet_value<S: Scalar>(j: &Jet<S>, tol: f64) -> Value {
    let mut m = Map::new();
    m.insert("verdict".into(), json!(affine::verdict(j, tol).as_str()));
    m.insert("order".into(), json!(j.order()));
    m.insert("at_base".into(), json!(j.constant_term().to_string()));
    if !S::EXACT {
        m.insert("max_abs".into(), json!(j.max_abs_f64()));
    }
    m.insert("coeffs".into(), coeffs_to_json(j));
    Value::Object(m)
}

fn invariants<S: Scalar>(r: &mut Report, f: &Jet<S>, tol: f64) {
    let rep = affine::report(f, tol);
    let mut inv = Map::new();
    for e in &rep.entries {
        let v = match (&e.value, &e.message) {
            (Some(j), _) => jet_value(j, tol),
            (None, msg) => json!({"verdict": e.verdict.as_str(), "message": msg}),
        };
        inv.insert(e.name.clone(), v);
    }
    r.insert("invariants".into(), Value::Object(inv));
    if let Some(s) = rep.signature {
        r.insert("hessian_signature".into(), json!(s));
    }
}

fn verdict_of<S: Scalar>(res: crate::Result<Jet<S>>, tol: f64) -> (Verdict, Option<String>) {
    match res {
        Ok(j) => (affine::verdict(&j, tol), None),
        Err(e) => (Verdict::PreconditionFailed, Some(e.to_string())),
    }
}

fn classify<S: Scalar>(r: &mut Report, f: &Jet<S>, tol: f64) {
    let mut verdicts = Map::new();
    let mut messages = Map::new();
    let mut put = |name: &str, res: crate::Result<Jet<S>>| -> Verdict {
        let (v, msg) = verdict_of(res, tol);
        verdicts.insert(name.into(), json!(v.as_str()));
        if let Some(m) = msg {
            messages.insert(name.into(), json!(m));
        }
        v
    };
    let mut class = match f.nvars() {
        1 => {
            let cartan = put("cartan_tube", affine::cartan_tube(f));
            let halphen = put("halphen", affine::halphen(f));
            let monge = put("monge", affine::monge(f));
            json!({
                "tube_spherical": cartan.vanishes(),
                "affinely_parabola": halphen.vanishes(),
                "on_nondegenerate_conic": monge.vanishes(),
            })
        }
        2 => {
            let hess = put("hessian_det", affine::hessian_det(f));
            let w = put("w_aff_numerator", affine::w_aff_numerator(f));
            let m = put("monge_x", affine::monge(f));
            let two_nondeg = affine::s_aff_numerator(f)
                .map(|s| !s.constant_term().negligible(S::default_tolerance(f.ctx())))
                .unwrap_or(false);
            let fxx = affine::require_fxx(f).is_ok();
            let in_class = hess.vanishes() && fxx && two_nondeg;
            let flat = in_class && w.vanishes() && m.vanishes();
            json!({
                "levi_rank_one": hess.vanishes() && fxx,
                "two_nondegenerate": two_nondeg,
                "cr_flat": flat,
                "affinely_equivalent_to_model": flat,
            })
        }
        _ => {
            put("hessian_det", affine::hessian_det(f));
            json!({})
        }
    };
    let sig = affine::hessian_signature(f).ok();
    class["hessian_definite"] = json!(sig.map(|s| s.is_definite()));
    r.insert("verdicts".into(), Value::Object(verdicts));
    if !messages.is_empty() {
        r.insert("messages".into(), Value::Object(messages));
    }
    r.insert("classification".into(), class);
}

fn load_map<S: Scalar>(src: &MapSource, dim: usize, ctx: &S::Ctx) -> crate::Result<AffineMap<S>> {
    if let Some(seed) = src.random_map {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(AffineMap::from_rational(&transform::random_near_identity(&mut rng, dim), ctx));
    }
    let text = match (&src.map, &src.map_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => fs::read_to_string(p).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", p.display())))?,
        _ => unreachable!("clap enforces one map source"),
    };
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("map JSON: {e}")))?;
    let g = AffineMap::from_json(&v, ctx)?;
    if g.dim() != dim {
        return Err(Error::Invalid(format!("need a {dim}x{dim} map, got {0}x{0}", g.dim())));
    }
    Ok(g)
}

fn transform_cmd<S: Scalar>(r: &mut Report, f: &Jet<S>, src: &MapSource, ctx: &S::Ctx, tol: f64) -> crate::Result<()> {
    let g = load_map::<S>(src, f.nvars() + 1, ctx)?;
    let fp = transform::transform_graph(&g, f)?;
    let fac = transform::factors(&g, f, &fp)?;
    let back = transform::transform_graph(&g.inverse()?, &fp)?;
    r.insert("map".into(), g.to_json());
    r.insert("near_identity".into(), json!(g.is_near_identity(transform::NEAR_IDENTITY_RADIUS)));
    r.insert("image".into(), jet_to_json(&fp));
    let mut fm = Map::new();
    fm.insert("delta".into(), json!(fac.delta.to_string()));
    fm.insert("lambda".into(), jet_to_json(&fac.lambda));
    fm.insert("mu".into(), jet_to_json(&fac.mu));
    if let Some(u) = &fac.upsilon {
        fm.insert("upsilon".into(), jet_to_json(u));
    }
    r.insert("factors".into(), Value::Object(fm));
    r.insert("round_trip".into(), json!(affine::verdict(&back.try_sub(f)?, tol).as_str()));
    Ok(())
}

fn normalize<S: Scalar>(r: &mut Report, f: &Jet<S>) -> crate::Result<()> {
    if !S::EXACT {
        return Err(Error::Invalid("normalize runs on the exact backend only".into()));
    }
    // Exact backend: S is Rational; round-trip through JSON keeps this generic.
    let fq: Jet<Rational> = jet_from_json(&jet_to_json(f), &())?;
    let res = transform::normalize_to_model(&fq, f.order())?;
    let verdict = match &res.verdict {
        NormVerdict::EquivalentToModel => json!("equivalent-to-model"),
        NormVerdict::Obstruction(o) => json!({"obstruction": o.to_json()}),
    };
    r.insert("verdict".into(), verdict);
    r.insert("map".into(), res.map.to_json());
    let steps: Vec<Value> = res
        .steps
        .iter()
        .map(|s| json!({"step": s.step, "action": s.action, "map": s.map.as_ref().map(AffineMap::to_json)}))
        .collect();
    r.insert("steps".into(), Value::Array(steps));
    r.insert("normalized".into(), jet_to_json(&res.jet));
    if let Some(res) = &res.residual {
        r.insert("residual".into(), json!(affine::verdict(res, 0.0).as_str()));
    }
    Ok(())
}

fn verify_laws<S: Scalar>(r: &mut Report, f: &Jet<S>, names: &[String], maps: usize, seed: u64, tol: f64) -> crate::Result<()> {
    let dim = f.nvars() + 1;
    let laws: Vec<Law> = if names.is_empty() {
        Law::valid_for(dim)
    } else {
        names
            .iter()
            .map(|n| Law::parse(n).ok_or_else(|| Error::Invalid(format!("unknown law `{n}`"))))
            .collect::<crate::Result<_>>()?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gs: Vec<AffineMap<S>> = (0..maps)
        .map(|_| AffineMap::from_rational(&transform::random_near_identity(&mut rng, dim), f.ctx()))
        .collect();
    let mut out = Map::new();
    for law in laws {
        let mut worst = Verdict::ExactZero;
        let mut failures = 0usize;
        let mut message = None;
        let mut max_abs = 0f64;
        for g in &gs {
            match transform::verify_law(law, g, f) {
                Ok(res) => {
                    max_abs = max_abs.max(res.max_abs_f64());
                    let v = if S::EXACT {
                        if res.is_zero() {
                            Verdict::ExactZero
                        } else {
                            Verdict::Nonzero
                        }
                    } else if res.is_negligible(tol) {
                        Verdict::BelowTolerance
                    } else {
                        Verdict::Nonzero
                    };
                    if v == Verdict::Nonzero {
                        failures += 1;
                    }
                    if rank(v) > rank(worst) {
                        worst = v;
                    }
                }
                Err(e) => {
                    worst = Verdict::PreconditionFailed;
                    message = Some(e.to_string());
                    break;
                }
            }
        }
        let mut m = Map::new();
        m.insert("verdict".into(), json!(worst.as_str()));
        m.insert("maps".into(), json!(gs.len()));
        m.insert("nonzero_maps".into(), json!(failures));
        if !S::EXACT {
            m.insert("max_abs".into(), json!(max_abs));
        }
        if let Some(msg) = message {
            m.insert("message".into(), json!(msg));
        }
        out.insert(law.name().into(), Value::Object(m));
    }
    r.insert("seed".into(), json!(seed));
    r.insert("laws".into(), Value::Object(out));
    Ok(())
}

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::ExactZero => 0,
        Verdict::BelowTolerance => 1,
        Verdict::Nonzero => 2,
        Verdict::PreconditionFailed => 3,
    }
}

fn propagate(init: &[String], numeric: &Numeric) -> crate::Result<Report> {
    if numeric.backend == Some(BackendArg::Float) {
        return Err(Error::Invalid("propagate runs on the exact backend only".into()));
    }
    let values: Vec<Rational> = init.iter().map(|t| <Rational as Scalar>::parse(&(), t)).collect::<crate::Result<_>>()?;
    let values: [Rational; 8] = values
        .try_into()
        .map_err(|_| Error::Invalid("--init needs exactly 8 values".into()))?;
    let init = PdeInit::new(values);
    let order = numeric.order;
    let jet = cr::pde_propagate(&init, order)?;
    let compat = cr::compatibility_check(&init, order)?;
    let residuals = cr::pde_residuals(&jet)?;
    let mut r = Map::new();
    r.insert("command".into(), json!("propagate"));
    let init_map: Map<String, Value> = PDE_INIT_KEYS
        .iter()
        .zip(init.values.iter())
        .map(|(k, v)| (k.to_string(), json!(v.to_string())))
        .collect();
    r.insert("init".into(), Value::Object(init_map));
    r.insert("order".into(), json!(order));
    r.insert("backend".into(), json!("exact"));
    r.insert("tolerance".into(), json!({"vanishing": "exact"}));
    r.insert("jet".into(), jet_to_json(&jet));
    r.insert(
        "compatibility".into(),
        json!({
            "checked": compat.checked,
            "routes": compat.routes,
            "symbolic_mismatches": compat.symbolic_mismatches,
            "max_residual": compat.max_residual.to_string(),
        }),
    );
    let names = ["hessian", "w_aff", "monge"];
    let res: Map<String, Value> = names
        .iter()
        .zip(&residuals)
        .map(|(n, j)| (n.to_string(), json!({"verdict": affine::verdict(j, 0.0).as_str(), "order": j.order()})))
        .collect();
    r.insert("pde_residuals".into(), Value::Object(res));
    Ok(r)
}

fn models_report() -> Report {
    let list: Vec<Value> = expr::models()
        .iter()
        .map(|m| {
            json!({
                "name": m.name,
                "expr": m.expr,
                "vars": m.vars,
                "base": m.base.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
                "backend": m.backend.name(),
                "check": m.check.name(),
                "note": m.note,
            })
        })
        .collect();
    let mut r = Map::new();
    r.insert("command".into(), json!("models"));
    r.insert("models".into(), Value::Array(list));
    r
}

fn batch(file: &PathBuf) -> crate::Result<Report> {
    let text = fs::read_to_string(file).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", file.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", file.display())))?;
    let entries = value
        .as_array()
        .ok_or_else(|| Error::Invalid("batch file must hold a JSON array".into()))?;
    let argvs: Vec<crate::Result<Vec<String>>> = entries
        .iter()
        .map(|e| {
            let arr = e.get("args").unwrap_or(e);
            arr.as_array()
                .and_then(|a| a.iter().map(|s| s.as_str().map(str::to_string)).collect::<Option<Vec<_>>>())
                .ok_or_else(|| Error::Invalid("each batch entry is an array of strings or {\"args\": [...]}".into()))
        })
        .collect();
    let results: Vec<Value> = argvs
        .into_par_iter()
        .map(|argv| match argv {
            Err(e) => json!({"exit": 1, "error": e.to_string()}),
            Ok(argv) if argv.first().map(String::as_str) == Some("batch") => {
                json!({"exit": 1, "error": "nested batch is not supported"})
            }
            Ok(argv) => {
                let o = run(argv.clone());
                let mut m = Map::new();
                m.insert("args".into(), json!(argv));
                m.insert("exit".into(), json!(o.code));
                match o.report {
                    Some(rep) => {
                        m.insert("report".into(), rep);
                    }
                    None => {
                        m.insert("error".into(), json!(o.message));
                    }
                }
                Value::Object(m)
            }
        })
        .collect();
    let mut r = Map::new();
    r.insert("command".into(), json!("batch"));
    r.insert("results".into(), Value::Array(results));
    Ok(r)
}
