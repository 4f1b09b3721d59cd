use std::io::{Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use padic_lift::lift_checker::{leading_term_report, normalize_lift, LiftChecker, LiftSpec, LiftSpecJson, Verdict};
use padic_lift::lubin_log::{eigen_check, logarithm};
use padic_lift::lubin_tate::{cyclotomic_lift, endomorphism, lubin_tate_guard, lubin_tate_lift, FrobeniusSeries};
use padic_lift::newton::{fixed_point, newton_polygon};
use padic_lift::norm_op::norm_op_with;
use padic_lift::series::SeriesJson;
use padic_lift::weights::{circulant_det, classify_weights, search_singular_nonconstant, WeightVector};
use padic_lift::{Error, Execution, FieldDesc, PadicField, TruncSeries};

mod selftest;

#[derive(Parser, Debug)]
#[command(name = "padic-lift", version, about = "Check and construct lifts of Frobenius-commuting group actions on p-adic power series")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Output rendering.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Lower the working precision N of the input field.
    #[arg(long = "precision", global = true)]
    precision: Option<u32>,
    /// Process independent items one at a time.
    #[arg(long, global = true)]
    sequential: bool,
    /// Progress messages on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Human,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Verify a lift specification.
    Check(Input),
    /// Move the fixed point of P to 0 and report leading terms.
    Normalize(Input),
    /// Lubin–Tate endomorphisms [a](T), or a full lift specification.
    LubinTate(LubinTateArgs),
    /// Cyclotomic lift specification (1+T)^c - 1.
    Cyclotomic(CyclotomicArgs),
    /// Logarithm A with A(P) = P'(0)·A.
    Log(Input),
    /// Norm operator of a series relative to P.
    Norm(Input),
    /// Small fixed point of P.
    FixedPoint(Input),
    /// Newton polygon of a series.
    NewtonPolygon(Input),
    /// Circulant determinant of a weight vector.
    Circulant(WeightArgs),
    /// Image of Σ a_h·h for a cyclic group of prime order.
    ClassifyWeights(WeightArgs),
    /// Smallest non-constant weight vector with singular circulant.
    SearchSingular(SearchArgs),
    /// Randomized consistency checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct Input {
    /// Path, inline JSON, or `-` for standard input (the default).
    input: Option<String>,
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Work over Q_p
    #[arg(long)]
    p: Option<u64>,
    /// Working precision in ϖ-digits.
    #[arg(long = "n", default_value_t = 8)]
    n: u32,
    /// Number of series coefficients.
    #[arg(long = "m", default_value_t = 32)]
    m: usize,
    /// Full field descriptor as JSON (overrides --p).
    #[arg(long)]
    field: Option<String>,
}

#[derive(Args, Debug)]
struct LubinTateArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Frobenius series coefficients from degree 0 (default ϖT + T^q).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    frobenius: Option<Vec<i64>>,
    /// Compute the single series [a].
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Build a lift specification from these integers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sample: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct CyclotomicArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    exponents: Vec<String>,
}

#[derive(Args, Debug)]
struct WeightArgs {
    /// Expected length of the weight vector.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    weights: Vec<u64>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    bound: u64,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    cases: usize,
}

/// A failure with its exit code and machine-readable body.
struct Failure {
    code: u8,
    body: Value,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Failure {
        Failure { code: 2, body: json!({"error": {"kind": "Usage", "message": msg.into()}}) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::PrecisionExhausted(_) | Error::PrecisionAmbiguous(_) => 4,
            _ => 2,
        };
        let kind = format!("{e:?}");
        let kind = kind.split(['(', ' ']).next().unwrap_or("Error").to_string();
        Failure { code, body: json!({"error": {"kind": kind, "message": e.to_string()}}) }
    }
}

type Outcome = std::result::Result<(Value, u8), Failure>;

fn read_input(src: &Option<String>) -> std::result::Result<String, Failure> {
    match src.as_deref() {
        None | Some("-") => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::usage(format!("reading stdin: {e}")))?;
            Ok(s)
        }
        Some(s) if s.trim_start().starts_with('{') || s.trim_start().starts_with('[') => Ok(s.to_string()),
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("reading {path}: {e}"))),
    }
}

/// Deserializes with JSON-pointer error locations.
fn parse<T: DeserializeOwned>(text: &str) -> std::result::Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer: String = e
            .path()
            .iter()
            .map(|seg| {
                use serde_path_to_error::Segment::*;
                match seg {
                    Seq { index } => format!("/{index}"),
                    Map { key } => format!("/{}", key.replace('~', "~0").replace('/', "~1")),
                    Enum { variant } => format!("/{variant}"),
                    Unknown => "/?".to_string(),
                }
            })
            .collect();
        Failure {
            code: 2,
            body: json!({"error": {"kind": "Schema", "pointer": pointer, "message": e.inner().to_string()}}),
        }
    })
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn apply_precision(field: &mut FieldDesc, g: &Global) -> std::result::Result<(), Failure> {
    if let Some(n) = g.precision {
        if n > field.n {
            return Err(Failure::usage(format!("--precision {n} exceeds the field's N = {}", field.n)));
        }
        field.n = n;
    }
    Ok(())
}

fn exec_of(g: &Global) -> Execution {
    if g.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn log(g: &Global, msg: &str) {
    if g.verbose > 0 {
        eprintln!("padic-lift: {msg}");
    }
}

fn load_spec(input: &Input, g: &Global) -> std::result::Result<LiftSpec, Failure> {
    let text = read_input(&input.input)?;
    let mut j: LiftSpecJson = parse(&text)?;
    apply_precision(&mut j.field, g)?;
    Ok(LiftSpec::from_json(&j)?)
}

fn check(input: &Input, g: &Global) -> Outcome {
    let spec = load_spec(input, g)?;
    log(g, &format!("checking {} elements, {} products", spec.elements.len(), spec.products.len()));
    let report = LiftChecker::new(&spec.p)?.with_execution(exec_of(g)).check(&spec)?;
    let code = match report.verdict {
        Verdict::Accept => 0,
        Verdict::Reject => 3,
        Verdict::Inconclusive => 4,
    };
    Ok((to_value(&report), code))
}

fn normalize(input: &Input, g: &Global) -> Outcome {
    let spec = load_spec(input, g)?;
    let norm = normalize_lift(&spec)?;
    let leading = leading_term_report(&norm.spec)?;
    let n = spec.field.n();
    Ok((
        json!({
            "a": norm.a.with_prec(n).to_json(),
            "fixed_point_residual": norm.fixed_point_residual,
            "constant_terms": norm.constant_terms,
            "constant_terms_ok": norm.constant_terms_ok,
            "leading_terms": leading,
            "spec": norm.spec.to_json(),
        }),
        if norm.constant_terms_ok { 0 } else { 3 },
    ))
}

fn field_from_args(a: &FieldArgs, m_guard: Option<u32>) -> std::result::Result<std::sync::Arc<PadicField>, Failure> {
    let mut desc = match (&a.field, a.p) {
        (Some(j), _) => parse::<FieldDesc>(j)?,
        (None, Some(p)) => FieldDesc::qp(p, a.n),
        (None, None) => return Err(Failure::usage("give --p or --field")),
    };
    if let Some(gd) = m_guard {
        if desc.guard.is_none() {
            desc.guard = Some(gd);
        }
    }
    desc.m_max = Some(desc.m_max.unwrap_or(0).max(a.m));
    Ok(PadicField::new(&desc)?)
}

fn parse_ints(v: &[String]) -> std::result::Result<Vec<BigInt>, Failure> {
    v.iter()
        .map(|s| s.trim().parse::<BigInt>().map_err(|_| Failure::usage(format!("not an integer: {s:?}"))))
        .collect()
}

fn lubin_tate(a: &LubinTateArgs, g: &Global) -> Outcome {
    let e = match &a.field.field {
        Some(j) => parse::<FieldDesc>(j)?.e,
        None => 1,
    };
    let field = field_from_args(&a.field, Some(lubin_tate_guard(e, a.field.m)))?;
    let m = a.field.m;
    let f = match &a.frobenius {
        Some(c) => FrobeniusSeries::new(TruncSeries::from_i64s(&field, c, m))?,
        None => FrobeniusSeries::standard(&field, m)?,
    };
    match (&a.a, &a.sample) {
        (Some(x), None) => {
            let x = parse_ints(std::slice::from_ref(x))?.remove(0);
            log(g, &format!("computing [{x}] to order {m}"));
            let s = endomorphism(&f, &field.from_bigint(&x), m)?;
            Ok((json!({"field": field.desc(), "series": s.to_json()}), 0))
        }
        (None, Some(v)) => {
            let spec = lubin_tate_lift(&f, &parse_ints(v)?, m)?;
            Ok((to_value(&spec.to_json()), 0))
        }
        _ => Err(Failure::usage("give exactly one of --a or --sample")),
    }
}

fn cyclotomic(a: &CyclotomicArgs) -> Outcome {
    let field = field_from_args(&a.field, None)?;
    let spec = cyclotomic_lift(&field, &parse_ints(&a.exponents)?, a.field.m)?;
    Ok((to_value(&spec.to_json()), 0))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PJob {
    field: FieldDesc,
    #[serde(rename = "P")]
    p: SeriesJson,
    #[serde(rename = "M", default)]
    m: Option<usize>,
    /// For `log`: series `F` with their characters, checked against `A`.
    #[serde(default)]
    eigen: Vec<EigenJob>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EigenJob {
    #[serde(rename = "F")]
    f: SeriesJson,
    f1: padic_lift::padic::ElemJson,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NormJob {
    field: FieldDesc,
    #[serde(rename = "P")]
    p: SeriesJson,
    h: SeriesJson,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolygonJob {
    field: FieldDesc,
    series: SeriesJson,
    #[serde(default)]
    degree_cap: Option<usize>,
}

fn p_job(input: &Input, g: &Global) -> std::result::Result<(PJob, std::sync::Arc<PadicField>, TruncSeries), Failure> {
    let mut job: PJob = parse(&read_input(&input.input)?)?;
    apply_precision(&mut job.field, g)?;
    let field = PadicField::new(&job.field)?;
    let p = TruncSeries::from_json(&field, &job.p)?;
    Ok((job, field, p))
}

fn log_cmd(input: &Input, g: &Global) -> Outcome {
    let (job, field, p) = p_job(input, g)?;
    let m = job.m.unwrap_or(p.order());
    let a = logarithm(&p, m)?;
    let residual = a.residual(&p)?;
    let mut eigen = vec![];
    for e in &job.eigen {
        let f = TruncSeries::from_json(&field, &e.f)?;
        let f1 = padic_lift::PadicElem::from_json(&field, &e.f1)?;
        eigen.push(to_value(&eigen_check(&a, &f, &f1)?));
    }
    let mut out = to_value(&a.to_json(residual));
    out["denominators_ok"] = json!(a.denominators_ok());
    out["eigen"] = Value::Array(eigen);
    Ok((out, 0))
}

fn norm_cmd(input: &Input, g: &Global) -> Outcome {
    let mut job: NormJob = parse(&read_input(&input.input)?)?;
    apply_precision(&mut job.field, g)?;
    let field = PadicField::new(&job.field)?;
    let p = TruncSeries::from_json(&field, &job.p)?;
    let h = TruncSeries::from_json(&field, &job.h)?;
    let n = norm_op_with(&h, &p, exec_of(g))?;
    Ok((json!({"norm": n.to_json()}), 0))
}

fn fixed_point_cmd(input: &Input, g: &Global) -> Outcome {
    let (_, field, p) = p_job(input, g)?;
    let fp = fixed_point(&p)?;
    Ok((
        json!({
            "point": fp.point.with_prec(field.n()).to_json(),
            "residual": fp.residual,
            "iterations": fp.iterations,
        }),
        0,
    ))
}

fn polygon_cmd(input: &Input, g: &Global) -> Outcome {
    let mut job: PolygonJob = parse(&read_input(&input.input)?)?;
    apply_precision(&mut job.field, g)?;
    let field = PadicField::new(&job.field)?;
    let s = TruncSeries::from_json(&field, &job.series)?;
    let poly = newton_polygon(&s, job.degree_cap.unwrap_or(s.order()))?;
    let segs: Vec<Value> = poly
        .segments()
        .iter()
        .map(|s| json!({"slope": format!("{}/{}", s.slope.numer(), s.slope.denom()), "length": s.length}))
        .collect();
    Ok((json!({"vertices": poly.to_json(), "segments": segs}), 0))
}

fn weights_of(a: &WeightArgs) -> std::result::Result<WeightVector, Failure> {
    if let Some(d) = a.d {
        if d != a.weights.len() {
            return Err(Failure::usage(format!("--d {d} but {} weights given", a.weights.len())));
        }
    }
    Ok(WeightVector::new(a.weights.clone())?)
}

fn circulant(a: &WeightArgs) -> Outcome {
    let w = weights_of(a)?;
    let det = circulant_det(&w);
    let class = classify_weights(&w).ok();
    Ok((json!({"d": w.d(), "weights": w.a, "determinant": det.to_string(), "class": class}), 0))
}

fn classify(a: &WeightArgs) -> Outcome {
    let w = weights_of(a)?;
    let class = classify_weights(&w)?;
    Ok((json!({"d": w.d(), "weights": w.a, "class": class}), 0))
}

fn search(a: &SearchArgs, g: &Global) -> Outcome {
    let found = search_singular_nonconstant(a.d, a.bound, exec_of(g))?;
    Ok((json!({"d": a.d, "bound": a.bound, "found": found.map(|w| w.a)}), 0))
}

fn render_human(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match x {
                    Value::Object(_) | Value::Array(_) if !is_flat(x) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_human(x, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}{k}: {}\n", flat(x))),
                }
            }
        }
        Value::Array(a) => {
            for x in a {
                if is_flat(x) {
                    out.push_str(&format!("{pad}- {}\n", flat(x)));
                } else {
                    out.push_str(&format!("{pad}-\n"));
                    render_human(x, indent + 1, out);
                }
            }
        }
        x => out.push_str(&format!("{pad}{}\n", flat(x))),
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(|x| !x.is_object() && !x.is_array()),
        Value::Object(_) => false,
        _ => true,
    }
}

fn flat(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(a) => format!("[{}]", a.iter().map(flat).collect::<Vec<_>>().join(", ")),
        x => x.to_string(),
    }
}

fn emit(v: &Value, format: Format) {
    let s = match format {
        Format::Json => serde_json::to_string_pretty(v).expect("serializable") + "\n",
        Format::Human => {
            let mut s = String::new();
            render_human(v, 0, &mut s);
            s
        }
    };
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(s.as_bytes());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = &cli.global;
    let res = match &cli.cmd {
        Cmd::Check(i) => check(i, g),
        Cmd::Normalize(i) => normalize(i, g),
        Cmd::LubinTate(a) => lubin_tate(a, g),
        Cmd::Cyclotomic(a) => cyclotomic(a),
        Cmd::Log(i) => log_cmd(i, g),
        Cmd::Norm(i) => norm_cmd(i, g),
        Cmd::FixedPoint(i) => fixed_point_cmd(i, g),
        Cmd::NewtonPolygon(i) => polygon_cmd(i, g),
        Cmd::Circulant(a) => circulant(a),
        Cmd::ClassifyWeights(a) => classify(a),
        Cmd::SearchSingular(a) => search(a, g),
        Cmd::Selftest(a) => selftest::run(a.seed, a.cases, exec_of(g)).map_err(Failure::from),
    };
    match res {
        Ok((v, code)) => {
            emit(&v, g.format);
            ExitCode::from(code)
        }
        Err(f) => {
            emit(&f.body, g.format);
            if let Some(m) = f.body["error"]["message"].as_str() {
                eprintln!("padic-lift: {m}");
            }
            ExitCode::from(f.code)
        }
    }
}
