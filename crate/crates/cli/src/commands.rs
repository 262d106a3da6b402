use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmz_core::coefficients::{hessenberg_det, CoeffTable};
use qmz_core::matrix::{
    build_block_with, continue_eval_report, BlockKind, ContinuationPlan, InverseMethod,
};
use qmz_core::poles::{
    numeric_residue, pole_locus, residue_h1, residue_hjk, HyperplaneId, LocusModel, ResidueResult,
    DEFAULT_H_SEQ, ON_HYPERPLANE_TOL,
};
use qmz_core::series::{eval_series, EvalResult, ModelKind, SumBudget};
use qmz_core::{kernel::cabs, ArgVector, Complex, QParam};
use serde_json::{json, Value};

use crate::cache::{cache_key, Cache, CacheRecord};
use crate::check::{self, Suite};
use crate::complex_arg::{format_list, parse_complex, parse_list};
use crate::error::{exit, hyperplane_json, CliError};

/// Environment variable that overrides `--cache-path`.
pub const CACHE_ENV: &str = "QMZ_CACHE";

#[derive(Debug, Parser)]
#[command(
    name = "qmz",
    version,
    about = "q-analogues of multiple zeta functions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sum a model's series on its convergence domain.
    Eval(EvalArgs),
    /// Evaluate the SZ model anywhere off its poles by analytic continuation.
    Continue(ContinueArgs),
    /// Residue of the SZ model along a pole hyperplane.
    Residue(ResidueArgs),
    /// Pole hyperplanes through (or near) a point.
    Poles(PolesArgs),
    /// The coefficient L_n(t) and the first-row entries built from it.
    Coeff(CoeffArgs),
    /// A truncated block of one of the triangular matrices.
    Matrix(MatrixArgs),
    /// Run built-in verification suites.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Sz,
    SzStar,
    Bz,
    Fq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    pub q: f64,
    /// Comma-separated complex arguments, e.g. "2,1" or "1.5+0.2i,1".
    #[arg(long, allow_hyphen_values = true)]
    pub args: String,
    /// Numerator exponents for `--model fq`.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<String>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Largest outer summation index.
    #[arg(long, default_value_t = 10_000)]
    pub max_terms: usize,
    #[arg(long)]
    pub cache_path: Option<PathBuf>,
    /// Sweep Re(s_1) over `start:end:count` (replaces the first argument).
    #[arg(long, allow_hyphen_values = true)]
    pub grid_re: Option<String>,
    /// Sweep Im(s_1) over `start:end:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_im: Option<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ContinueArgs {
    #[arg(long)]
    pub q: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub args: String,
    /// Block size at the top node; the default is chosen from the arguments.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Target accuracy of every tail series.
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResidueMethod {
    Closed,
    Numeric,
    Both,
}

#[derive(Debug, Args)]
pub struct ResidueArgs {
    #[arg(long)]
    pub q: f64,
    /// The point on the hyperplane (all r arguments).
    #[arg(long, allow_hyphen_values = true)]
    pub args: String,
    /// Hyperplane s_1 + ... + s_j = -k.
    #[arg(long)]
    pub j: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = ResidueMethod::Closed)]
    pub method: ResidueMethod,
    /// Block size for j >= 2 (must exceed k; default k + 1).
    #[arg(long = "K")]
    pub block: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoleModel {
    Sz,
    Bz,
}

#[derive(Debug, Args)]
pub struct PolesArgs {
    #[arg(long, value_enum, default_value_t = PoleModel::Sz)]
    pub model: PoleModel,
    #[arg(long)]
    pub q: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub args: String,
    /// Distance (on the partial sums) within which a hyperplane counts.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct CoeffArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub t: String,
    #[arg(long)]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "M")]
    M,
    #[value(name = "N")]
    N,
    #[value(name = "MInv")]
    MInv,
    #[value(name = "H")]
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InverseRoute {
    Closed,
    Backsub,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    #[arg(long, allow_hyphen_values = true)]
    pub t: String,
    #[arg(long = "K")]
    pub k: usize,
    /// Extra columns to the right of the square block.
    #[arg(long = "J", default_value_t = 0)]
    pub j: usize,
    #[arg(long)]
    pub q: f64,
    /// How `MInv` is formed.
    #[arg(long, value_enum, default_value_t = InverseRoute::Closed)]
    pub inverse: InverseRoute,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiply every case tolerance by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub tol_scale: f64,
}

/// What a command produced: a document to print and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub body: Body,
    pub code: i32,
}

#[derive(Debug)]
pub enum Body {
    Json(Value),
    Csv(String),
}

impl Outcome {
    fn ok(v: Value) -> Self {
        Self {
            body: Body::Json(v),
            code: exit::OK,
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Continue(a) => cmd_continue(a).map(Outcome::ok),
        Command::Residue(a) => cmd_residue(a).map(Outcome::ok),
        Command::Poles(a) => cmd_poles(a).map(Outcome::ok),
        Command::Coeff(a) => cmd_coeff(a).map(Outcome::ok),
        Command::Matrix(a) => cmd_matrix(a).map(Outcome::ok),
        Command::Check(a) => cmd_check(a),
    }
}

fn complex_json(z: Complex) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// Plain number when the imaginary part is exactly zero, else `{re, im}`.
fn scalar_json(z: Complex) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        complex_json(z)
    }
}

fn args_of(text: &str) -> Result<ArgVector, CliError> {
    Ok(ArgVector::new(parse_list(text)?)?)
}

fn model_kind(
    model: Model,
    t: Option<&str>,
    depth: usize,
) -> Result<(ModelKind, String), CliError> {
    Ok(match model {
        Model::Sz => (ModelKind::Sz, "sz".into()),
        Model::SzStar => (ModelKind::SzStar, "sz-star".into()),
        Model::Bz => (ModelKind::Bz, "bz".into()),
        Model::Fq => {
            let t = t.ok_or_else(|| CliError::Usage("--model fq needs --t".into()))?;
            let t = args_of(t)?;
            if t.depth() != depth {
                return Err(qmz_core::Error::DepthMismatch {
                    expected: depth,
                    got: t.depth(),
                }
                .into());
            }
            let name = format!("fq[{}]", format_list(t.as_slice()));
            (ModelKind::FqGeneral(t), name)
        }
    })
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("grid {spec:?} must look like start:end:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| {
            if n == 1 {
                a
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect())
}

struct EvalCtx {
    kind: ModelKind,
    name: String,
    q: QParam,
    budget: SumBudget,
    cache: Option<Cache>,
}

impl EvalCtx {
    fn eval(&mut self, s: &ArgVector) -> Result<EvalResult, CliError> {
        let key = cache_key(
            &self.name,
            self.q.value(),
            &format_list(s.as_slice()),
            self.budget.tol,
        );
        if let Some(rec) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(EvalResult {
                value: Complex::new(rec.value_re, rec.value_im),
                err_est: rec.err_est,
                terms_used: rec.terms,
                converged: true,
            });
        }
        let r = eval_series(&self.kind, s, &self.q, self.budget)?;
        if !r.converged {
            return Err(CliError::Unconverged {
                terms: r.terms_used,
                err_est: r.err_est,
            });
        }
        if let Some(cache) = self.cache.as_mut() {
            cache.insert(CacheRecord::new(
                key,
                r.value.re,
                r.value.im,
                r.err_est,
                r.terms_used,
            ))?;
        }
        Ok(r)
    }
}

fn eval_json(r: &EvalResult) -> Value {
    json!({
        "value": complex_json(r.value),
        "err_est": r.err_est,
        "terms": r.terms_used,
        "converged": r.converged,
    })
}

fn cmd_eval(a: EvalArgs) -> Result<Outcome, CliError> {
    let q = QParam::new(a.q)?;
    let base = parse_list(&a.args)?;
    let (kind, name) = model_kind(a.model, a.t.as_deref(), base.len())?;
    let budget = SumBudget::new(a.max_terms, a.tol)?;
    let cache_path = std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .or(a.cache_path);
    let cache = cache_path.as_deref().map(Cache::open).transpose()?;
    let mut ctx = EvalCtx {
        kind,
        name,
        q,
        budget,
        cache,
    };

    let grid = a.grid_re.is_some() || a.grid_im.is_some();
    if !grid {
        let s = ArgVector::new(base)?;
        let r = ctx.eval(&s)?;
        return Ok(match a.output {
            OutputFormat::Json => Outcome::ok(eval_json(&r)),
            OutputFormat::Csv => Outcome {
                body: Body::Csv(csv_header(s.depth()) + &csv_row(&s, Ok(&r))),
                code: exit::OK,
            },
        });
    }

    let res = match &a.grid_re {
        Some(g) => parse_grid(g)?,
        None => vec![base[0].re],
    };
    let ims = match &a.grid_im {
        Some(g) => parse_grid(g)?,
        None => vec![base[0].im],
    };
    let mut code = exit::OK;
    let mut rows = Vec::new();
    let mut csv = csv_header(base.len());
    for &re in &res {
        for &im in &ims {
            let mut point = base.clone();
            point[0] = Complex::new(re, im);
            let s = ArgVector::new(point)?;
            let r = ctx.eval(&s);
            if let Err(e) = &r {
                if code == exit::OK {
                    code = e.exit_code();
                }
            }
            match a.output {
                OutputFormat::Csv => csv.push_str(&csv_row(&s, r.as_ref())),
                OutputFormat::Json => {
                    let mut row = match &r {
                        Ok(v) => eval_json(v),
                        Err(e) => e.to_json(),
                    };
                    row["args"] = json!(format_list(s.as_slice()));
                    rows.push(row);
                }
            }
        }
    }
    let body = match a.output {
        OutputFormat::Csv => Body::Csv(csv),
        OutputFormat::Json => Body::Json(json!({ "points": rows })),
    };
    Ok(Outcome { body, code })
}

fn csv_header(depth: usize) -> String {
    let mut cols: Vec<String> = (1..=depth)
        .flat_map(|j| [format!("re(s{j})"), format!("im(s{j})")])
        .collect();
    cols.extend(["re(value)", "im(value)", "err_est"].map(String::from));
    cols.join(",") + "\n"
}

/// Failed points keep their coordinates and leave the value columns empty.
fn csv_row(s: &ArgVector, r: Result<&EvalResult, &CliError>) -> String {
    let mut cols: Vec<String> = s
        .as_slice()
        .iter()
        .flat_map(|z| [format!("{:?}", z.re), format!("{:?}", z.im)])
        .collect();
    match r {
        Ok(v) => cols.extend([v.value.re, v.value.im, v.err_est].map(|x| format!("{x:?}"))),
        Err(_) => cols.extend([String::new(), String::new(), String::new()]),
    }
    cols.join(",") + "\n"
}

fn cmd_continue(a: ContinueArgs) -> Result<Value, CliError> {
    let q = QParam::new(a.q)?;
    let s = args_of(&a.args)?;
    let plan = ContinuationPlan {
        k: a.k,
        tail_tol: a.tol,
        tail_max_terms: a.max_terms,
        ..ContinuationPlan::default()
    };
    let rep = continue_eval_report(&s, &q, plan)?;
    let mut out = eval_json(&rep.result);
    out["K"] = json!(rep.k);
    out["stats"] = json!({
        "nodes": rep.nodes,
        "memo_hits": rep.memo_hits,
        "series_calls": rep.series_calls,
        "max_recursion": rep.max_recursion,
    });
    Ok(out)
}

fn cmd_residue(a: ResidueArgs) -> Result<Value, CliError> {
    let q = QParam::new(a.q)?;
    let s = args_of(&a.args)?;
    if a.j == 0 || a.j > s.depth() {
        return Err(CliError::Usage(format!(
            "--j must lie in 1..={}",
            s.depth()
        )));
    }
    let hp = HyperplaneId {
        j: a.j,
        k: a.k as i64,
        m: 0,
    };
    if cabs(s.partial_sum(a.j) + a.k as f64) > ON_HYPERPLANE_TOL {
        return Err(qmz_core::Error::Domain(format!("point is not on the hyperplane {hp}")).into());
    }
    let closed = || -> Result<ResidueResult, CliError> {
        Ok(if a.j == 1 {
            residue_h1(a.k, &s.as_slice()[1..], &q)?
        } else {
            residue_hjk(a.j, a.k, &s, &q, a.block.unwrap_or(a.k + 1))?
        })
    };
    let numeric =
        || -> Result<ResidueResult, CliError> { Ok(numeric_residue(hp, &s, &q, &DEFAULT_H_SEQ)?) };
    let mut out = json!({ "hyperplane": hyperplane_json(&hp) });
    match a.method {
        ResidueMethod::Closed => {
            out["value"] = complex_json(closed()?.value);
            out["method"] = json!("closed_form");
        }
        ResidueMethod::Numeric => {
            out["value"] = complex_json(numeric()?.value);
            out["method"] = json!("numeric_limit");
        }
        ResidueMethod::Both => {
            let c = closed()?.value;
            let n = numeric()?.value;
            out["value"] = complex_json(c);
            out["method"] = json!("closed_form");
            out["numeric_value"] = complex_json(n);
            out["rel_diff"] = json!(cabs(c - n) / cabs(n).max(f64::MIN_POSITIVE));
        }
    }
    Ok(out)
}

fn cmd_poles(a: PolesArgs) -> Result<Value, CliError> {
    let q = QParam::new(a.q)?;
    let s = args_of(&a.args)?;
    if a.tol.is_nan() || a.tol < 0.0 {
        return Err(CliError::Usage("--tol must be non-negative".into()));
    }
    let model = match a.model {
        PoleModel::Sz => LocusModel::Sz,
        PoleModel::Bz => LocusModel::Bz,
    };
    let hits = pole_locus(model, &s, &q, a.tol);
    Ok(json!({
        "on_locus": !hits.is_empty(),
        "poles": hits.iter().map(hyperplane_json).collect::<Vec<_>>(),
    }))
}

fn cmd_coeff(a: CoeffArgs) -> Result<Value, CliError> {
    let q = QParam::new(a.q)?;
    let t = parse_complex(&a.t)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let table = CoeffTable::l_only(t, &q, a.n)?;
    let mut out = json!({
        "n": a.n,
        "L_n": scalar_json(table.l(a.n)),
        "R_1n": scalar_json(table.r_entry(a.n)),
    });
    // H_{1,n} also divides by q_{n-1}(t), which may vanish where L_n is fine
    out["H_1n"] = match CoeffTable::new(t, &q, a.n).and_then(|full| full.h_entry(a.n)) {
        Ok(h) => scalar_json(h),
        Err(_) => Value::Null,
    };
    if a.n >= 2 {
        out["D_1n"] = scalar_json(hessenberg_det(a.n, t, &q)?);
    }
    Ok(out)
}

fn cmd_matrix(a: MatrixArgs) -> Result<Value, CliError> {
    let q = QParam::new(a.q)?;
    let t = parse_complex(&a.t)?;
    let kind = match a.which {
        Which::M => BlockKind::M,
        Which::N => BlockKind::N,
        Which::MInv => BlockKind::MInv,
        Which::H => BlockKind::H,
    };
    let method = match a.inverse {
        InverseRoute::Closed => InverseMethod::ClosedForm,
        InverseRoute::Backsub => InverseMethod::BackSubstitution,
    };
    let block = build_block_with(kind, t, a.k, a.j, &q, method)?;
    let rows: Vec<Value> = (1..=a.k)
        .map(|r| {
            Value::Array(
                (1..=a.k + a.j)
                    .map(|c| scalar_json(block.entry(r, c)))
                    .collect(),
            )
        })
        .collect();
    Ok(Value::Array(rows))
}

fn cmd_check(a: CheckArgs) -> Result<Outcome, CliError> {
    if !(a.tol_scale > 0.0 && a.tol_scale.is_finite()) {
        return Err(CliError::Usage(
            "--tol-scale must be positive and finite".into(),
        ));
    }
    let report = check::run(a.suite, a.samples, a.seed, a.tol_scale);
    let code = if report.ok {
        exit::OK
    } else {
        exit::SUITE_FAILED
    };
    let body = serde_json::to_value(&report).expect("report serialises");
    Ok(Outcome {
        body: Body::Json(body),
        code,
    })
}
