//! `spherisym` command line: evaluate, sweep, classify, fit and verify.

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use spherisym::families::{self, FamilyId, PointRecord, DEFAULT_TOL};
use spherisym::sampling::{GridSpec, Range};
use spherisym::verify::{self, VerifyOptions};
use spherisym::{catalog_list, parse_phi, Config, Error, ModelSpec, PhiModel};

const SCHEMA_VERSION: u32 = 1;
const DEFAULT_GRID: &str = "0.5:2:4,-0.8:0.8:5";

#[derive(Parser)]
#[command(name = "spherisym", version, about = "Verification toolkit for spherically symmetric Finsler metrics F = u phi(r, s)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// All scalars and tensor norms at one configuration.
    Eval(EvalArgs),
    /// Per-point records over a grid.
    Grid(GridArgs),
    /// Riemannian / Berwald / Landsberg verdicts over a grid.
    Classify(GridArgs),
    /// Fit the model's spray to a canonical family at each grid radius.
    Fit(FitArgs),
    /// Run the named verification checks.
    Verify(VerifyArgs),
    /// List the built-in metric families and their parameters.
    Catalog(OutputArgs),
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    /// φ(r, s) as an expression
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// catalog family name (see `catalog`)
    #[arg(long)]
    metric: Option<String>,
    /// homogeneous profile h(v)
    #[arg(long, allow_hyphen_values = true)]
    h: Option<String>,
    /// ψ-family profile ψ(v)
    #[arg(long, allow_hyphen_values = true)]
    psi: Option<String>,
    /// ψ-family coefficient c0(r)
    #[arg(long, allow_hyphen_values = true)]
    c0: Option<String>,
    /// Riemannian factor a(r)
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Riemannian constant c1
    #[arg(long, allow_hyphen_values = true)]
    c1: Option<f64>,
    /// Riemannian constant c3
    #[arg(long, allow_hyphen_values = true)]
    c3: Option<f64>,
    /// ball radius
    #[arg(long)]
    r0: Option<f64>,
}

#[derive(Args, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// omit timestamp and timing, for byte-comparable output
    #[arg(long)]
    no_meta: bool,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// dimension; defaults to the length of --x
    #[arg(long)]
    n: Option<usize>,
    /// position, comma separated
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// direction, comma separated
    #[arg(long, allow_hyphen_values = true)]
    y: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `rlo:rhi:rcount,flo:fhi:fcount` with s = f r
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// dimension
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// seeds the frame and |y| drawn at each grid point
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// residual threshold for the verdicts [default: 1e-7]
    #[arg(long)]
    tol: Option<f64>,
    /// JSON file with `model`, `grid` and `tol` entries
    #[arg(long)]
    config: Option<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// landsberg_n3, berwald_surface or berwald_n3
    #[arg(long)]
    family: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// replace the tolerance of every upper-bound check
    #[arg(long)]
    tol: Option<f64>,
    /// seeds the random cases of every check
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    /// run only the named check (repeatable)
    #[arg(long)]
    only: Vec<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: Option<ModelSpec>,
    grid: Option<GridEntry>,
    tol: Option<f64>,
}

/// Either the `--grid` text or the full structure.
#[derive(Deserialize)]
#[serde(untagged)]
enum GridEntry {
    Text(String),
    Spec(GridSpec),
}

// ---------------------------------------------------------------------------
// Failures and exit codes

enum Failure {
    Usage(String),
    Lib(Error),
    /// Already rendered message with its source (parse errors).
    Rendered(String, u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn report(&self) -> u8 {
        let (msg, code) = match self {
            Failure::Usage(m) => (m.clone(), 2),
            Failure::Rendered(m, c) => (m.clone(), *c),
            Failure::Lib(e) => (e.to_string(), if e.is_domain() { 3 } else { 2 }),
        };
        eprintln!("error: {msg}");
        code
    }
}

type CmdResult = Result<u8, Failure>;

// ---------------------------------------------------------------------------
// Output

// JSON with every float in 17 significant digits; non-finite values become null.
fn write_json(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_json(item, out);
            }
            out.push('}');
        }
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

struct Meta {
    start: Instant,
    threads: usize,
}

fn emit_json(command: &str, mut body: serde_json::Map<String, Value>, out: &OutputArgs, meta: &Meta) -> io::Result<()> {
    body.insert("schema_version".into(), json!(SCHEMA_VERSION));
    body.insert("tool".into(), json!({"name": "spherisym", "version": env!("CARGO_PKG_VERSION")}));
    body.insert("command".into(), json!(command));
    if !out.no_meta {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        body.insert(
            "meta".into(),
            json!({"unix_time": ts, "elapsed_seconds": meta.start.elapsed().as_secs_f64(), "threads": meta.threads}),
        );
    }
    let mut text = String::new();
    write_json(&Value::Object(body), &mut text);
    text.push('\n');
    io::stdout().write_all(text.as_bytes())
}

fn emit_csv(header: &[&str], rows: Vec<Vec<String>>) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

const RECORD_HEADER: [&str; 17] = [
    "index",
    "r",
    "s",
    "u",
    "P",
    "Q",
    "H",
    "K",
    "C1",
    "C2",
    "landsberg",
    "surface_berwald",
    "mean_berwald_trace",
    "max_berwald",
    "max_mean_berwald",
    "error",
    "ok",
];

fn record_row(index: usize, rec: Option<&PointRecord>, error: Option<&str>) -> Vec<String> {
    let mut row = vec![index.to_string()];
    match rec {
        Some(p) => {
            for v in [
                p.r,
                p.s,
                p.u,
                p.p,
                p.q,
                p.h,
                p.k,
                p.c1,
                p.c2,
                p.landsberg,
                p.surface_berwald,
                p.mean_berwald_trace,
                p.max_berwald,
                p.max_mean_berwald,
            ] {
                row.push(fmt_f64(v));
            }
        }
        None => row.extend(std::iter::repeat(String::new()).take(14)),
    }
    row.push(error.unwrap_or("").to_string());
    row.push((error.is_none()).to_string());
    row
}

// ---------------------------------------------------------------------------
// Inputs

fn model_spec(m: &ModelArgs) -> ModelSpec {
    ModelSpec {
        metric: m.metric.clone(),
        phi: m.phi.clone(),
        h: m.h.clone(),
        psi: m.psi.clone(),
        c0: m.c0.clone(),
        a: m.a.clone(),
        c1: m.c1,
        c3: m.c3,
        r0: m.r0,
        s_safety: None,
    }
}

fn build_model(spec: &ModelSpec) -> Result<PhiModel, Failure> {
    if spec.metric.is_some() && spec.phi.is_some() {
        return Err(Failure::Usage("give either --phi or --metric, not both".into()));
    }
    // parse each source first so errors point into the text the user wrote
    for (flag, src) in [("phi", &spec.phi), ("h", &spec.h), ("psi", &spec.psi), ("c0", &spec.c0), ("a", &spec.a)] {
        if let Some(src) = src {
            if let Err(e) = parse_phi(src) {
                return Err(Failure::Rendered(format!("--{flag}: {}", e.render(src)), 2));
            }
        }
    }
    spec.build().map_err(Failure::from)
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("--{flag}: `{t}` is not a number"))))
        .collect()
}

fn load_config(path: &Option<String>) -> Result<ConfigFile, Failure> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("--config {p}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("--config {p}: {e}")))
        }
    }
}

struct GridInputs {
    model: PhiModel,
    grid: GridSpec,
    tol: f64,
}

fn grid_inputs(args: &GridArgs) -> Result<GridInputs, Failure> {
    let cfg = load_config(&args.config)?;
    let flag_spec = model_spec(&args.model);
    let spec = if flag_spec == ModelSpec::default() {
        cfg.model.clone().ok_or_else(|| Failure::Usage("give --phi, --metric or a config file with a model".into()))?
    } else {
        flag_spec
    };
    let model = build_model(&spec)?;
    let grid = match (&args.grid, cfg.grid) {
        (Some(text), _) => parse_grid(text, args.n, args.seed)?,
        (None, Some(GridEntry::Spec(g))) => g,
        (None, Some(GridEntry::Text(text))) => parse_grid(&text, args.n, args.seed)?,
        (None, None) => parse_grid(DEFAULT_GRID, args.n, args.seed)?,
    };
    let tol = args.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    Ok(GridInputs { model, grid, tol })
}

// a bare `lo:hi:count` is an r range with the default s fractions
fn parse_grid(text: &str, n: usize, seed: u64) -> Result<GridSpec, Failure> {
    let g = if text.contains(',') {
        GridSpec::parse(text, n, seed)
    } else {
        Range::parse(text).map(|r| GridSpec::new(r, Range::new(-0.8, 0.8, 5), n, seed))
    };
    g.map_err(|e| Failure::Usage(e.to_string()))
}

fn init_threads(out: &OutputArgs) -> Result<Meta, Failure> {
    if let Some(t) = out.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    Ok(Meta { start: Instant::now(), threads: rayon::current_num_threads() })
}

fn io_fail(e: io::Error) -> Failure {
    Failure::Rendered(format!("writing output: {e}"), 2)
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    let meta = init_threads(&args.out)?;
    let model = build_model(&model_spec(&args.model))?;
    let x = parse_list("x", &args.x)?;
    let y = parse_list("y", &args.y)?;
    let n = args.n.unwrap_or(x.len());
    if x.len() != n || y.len() != n {
        return Err(Failure::Usage(format!("--x and --y need {n} components, got {} and {}", x.len(), y.len())));
    }
    let cfg = Config::new(x, y).map_err(|e| Failure::Usage(e.to_string()))?;
    let rec = families::point_record(&model, &cfg)?;
    let reg = model.regularity_check(cfg.r(), cfg.s())?;
    match args.out.format {
        Format::Csv => emit_csv(&RECORD_HEADER, vec![record_row(0, Some(&rec), None)]).map_err(io_fail)?,
        Format::Json => {
            let mut body = serde_json::Map::new();
            body.insert("input".into(), json!({"model": to_value(&model.echo()), "n": n, "x": cfg.x(), "y": cfg.y()}));
            body.insert("record".into(), to_value(&rec));
            body.insert("regularity".into(), to_value(&reg));
            emit_json("eval", body, &args.out, &meta).map_err(io_fail)?;
        }
    }
    Ok(0)
}

fn cmd_grid(args: &GridArgs, classify: bool) -> CmdResult {
    let meta = init_threads(&args.out)?;
    let inp = grid_inputs(args)?;
    inp.grid.validate(&inp.model).map_err(|e| Failure::Usage(e.to_string()))?;
    let (points, cls) = if classify {
        let cls = families::classify(&inp.model, &inp.grid, inp.tol)?;
        (cls.points.clone(), Some(cls))
    } else {
        (families::evaluate_grid(&inp.model, &inp.grid)?, None)
    };
    match args.out.format {
        Format::Csv => {
            let rows = points.iter().map(|p| record_row(p.index, p.record.as_ref(), p.error.as_deref())).collect();
            emit_csv(&RECORD_HEADER, rows).map_err(io_fail)?;
        }
        Format::Json => {
            let mut body = serde_json::Map::new();
            body.insert(
                "input".into(),
                json!({"model": to_value(&inp.model.echo()), "grid": to_value(&inp.grid), "tol": inp.tol}),
            );
            body.insert("records".into(), to_value(&points));
            match &cls {
                Some(c) => {
                    body.insert(
                        "summary".into(),
                        json!({
                            "verdict": {"riemannian": c.riemannian, "berwald": c.berwald, "landsberg": c.landsberg},
                            "residuals": to_value(&c.residuals),
                            "fitted_family": to_value(&c.fitted_family),
                            "errors": c.errors,
                        }),
                    );
                }
                None => {
                    let errors: Vec<_> = points.iter().filter_map(|p| p.error.clone()).collect();
                    body.insert("summary".into(), json!({"points": points.len(), "errors": errors}));
                }
            }
            emit_json(if classify { "classify" } else { "grid" }, body, &args.out, &meta).map_err(io_fail)?;
        }
    }
    Ok(0)
}

fn cmd_fit(args: &FitArgs) -> CmdResult {
    let meta = init_threads(&args.grid.out)?;
    let family: FamilyId = args.family.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let inp = grid_inputs(&args.grid)?;
    inp.grid.validate(&inp.model).map_err(|e| Failure::Usage(e.to_string()))?;
    let fits = families::fit_model(&inp.model, family, &inp.grid.r_values(), inp.tol)?;
    let member = fits.iter().all(|f| f.member);
    match args.grid.out.format {
        Format::Csv => {
            let mut header = vec!["r"];
            header.extend(family.coefficient_names());
            header.extend(["residual", "member"]);
            let rows = fits
                .iter()
                .map(|f| {
                    let mut row = vec![fmt_f64(f.r)];
                    row.extend(f.coefficients.iter().map(|(_, v)| fmt_f64(*v)));
                    row.push(fmt_f64(f.residual));
                    row.push(f.member.to_string());
                    row
                })
                .collect();
            emit_csv(&header, rows).map_err(io_fail)?;
        }
        Format::Json => {
            let curves: serde_json::Map<String, Value> = family
                .coefficient_names()
                .iter()
                .map(|&name| {
                    let vals: Vec<f64> = fits.iter().map(|f| f.coefficient(name).unwrap_or(f64::NAN)).collect();
                    (name.to_string(), json!(vals))
                })
                .collect();
            let residual = fits.iter().map(|f| f.residual).fold(0.0, f64::max);
            let mut body = serde_json::Map::new();
            body.insert(
                "input".into(),
                json!({"model": to_value(&inp.model.echo()), "family": family, "r": inp.grid.r_values(), "tol": inp.tol}),
            );
            body.insert("fits".into(), to_value(&fits));
            body.insert(
                "summary".into(),
                json!({"member": member, "max_residual": residual, "coefficients": Value::Object(curves)}),
            );
            emit_json("fit", body, &args.grid.out, &meta).map_err(io_fail)?;
        }
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let meta = init_threads(&args.out)?;
    if let Some(t) = args.tol {
        if !(t > 0.0) {
            return Err(Failure::Usage("--tol must be positive".into()));
        }
    }
    let opts = VerifyOptions { tol: args.tol, seed: args.seed, only: args.only.clone() };
    let results = verify::run(&opts).map_err(|e| Failure::Usage(e.to_string()))?;
    let pass = results.iter().all(|r| r.pass);
    // per-check lines go to stderr so stdout stays machine readable
    for r in &results {
        eprintln!("{}", r.line());
    }
    match args.out.format {
        Format::Csv => {
            let rows = results
                .iter()
                .map(|r| {
                    vec![
                        r.name.clone(),
                        r.pass.to_string(),
                        fmt_f64(r.worst),
                        fmt_f64(r.tol),
                        format!("{:?}", r.bound).to_lowercase(),
                        r.cases.to_string(),
                        r.detail.clone(),
                    ]
                })
                .collect();
            emit_csv(&["check", "pass", "worst", "tol", "bound", "cases", "detail"], rows).map_err(io_fail)?;
        }
        Format::Json => {
            let mut checks = to_value(&results);
            if args.out.no_meta {
                if let Value::Array(items) = &mut checks {
                    for item in items {
                        if let Value::Object(m) = item {
                            m.remove("seconds");
                        }
                    }
                }
            }
            let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
            let mut body = serde_json::Map::new();
            body.insert("input".into(), json!({"seed": args.seed, "tol": args.tol, "only": args.only}));
            body.insert("checks".into(), checks);
            body.insert("summary".into(), json!({"pass": pass, "checks": results.len(), "failed": failed}));
            emit_json("verify", body, &args.out, &meta).map_err(io_fail)?;
        }
    }
    Ok(if pass { 0 } else { 1 })
}

fn cmd_catalog(out: &OutputArgs) -> CmdResult {
    let meta = Meta { start: Instant::now(), threads: rayon::current_num_threads() };
    let list = catalog_list();
    match out.format {
        Format::Csv => {
            let rows = list
                .iter()
                .flat_map(|e| {
                    let base = vec![e.name.to_string(), e.description.to_string()];
                    if e.params.is_empty() {
                        vec![[base.clone(), vec![String::new(), String::new()]].concat()]
                    } else {
                        e.params
                            .iter()
                            .map(|p| [base.clone(), vec![p.name.to_string(), p.default.to_string()]].concat())
                            .collect()
                    }
                })
                .collect();
            emit_csv(&["metric", "description", "param", "default"], rows).map_err(io_fail)?;
        }
        Format::Json => {
            let mut body = serde_json::Map::new();
            body.insert("catalog".into(), to_value(&list));
            body.insert("families".into(), json!(FamilyId::ALL.iter().map(|f| f.as_str()).collect::<Vec<_>>()));
            body.insert(
                "checks".into(),
                json!(verify::CHECKS.iter().map(|c| json!({"name": c.name, "about": c.about})).collect::<Vec<_>>()),
            );
            emit_json("catalog", body, out, &meta).map_err(io_fail)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Grid(a) => cmd_grid(a, false),
        Command::Classify(a) => cmd_grid(a, true),
        Command::Fit(a) => cmd_fit(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Catalog(a) => cmd_catalog(a),
    };
    ExitCode::from(match result {
        Ok(code) => code,
        Err(f) => f.report(),
    })
}
