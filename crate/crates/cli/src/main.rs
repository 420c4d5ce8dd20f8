//! `hodisc`: generating matrices, point sets, t-values, Haar tables, norms and
//! scaling studies from the command line.

mod json;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hodisc_core::genmat::{self, GeneratingMatrixSet, MatrixKind};
use hodisc_core::haar::{build_table, HaarTable};
use hodisc_core::netquality;
use hodisc_core::norms::{self, Arithmetic, NormKind, NormReport};
use hodisc_core::points::{self, DyadicPointSet};
use hodisc_core::studies::{self, StudyNorm};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Internal(String),
}

impl From<hodisc_core::Error> for CliError {
    fn from(e: hodisc_core::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "hodisc", version, about = "Higher-order digital sequences and their discrepancy norms")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HODISC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a set of generating matrices.
    Genmat(GenmatArgs),
    /// Generate points of the digital sequence.
    Points(PointsArgs),
    /// Minimal or checked t-value of the nets or the sequence.
    Tvalue(TvalueArgs),
    /// Exact Haar coefficients of the discrepancy function.
    Haar(HaarArgs),
    /// Evaluate a discrepancy norm.
    Norm(NormArgs),
    /// Normalized norms over prefixes N = 2^nmin .. 2^nmax.
    Study(StudyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Identity,
    Tezuka,
    TezukaInterlaced,
}

impl From<KindArg> for MatrixKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Identity => MatrixKind::Identity,
            KindArg::Tezuka => MatrixKind::Tezuka,
            KindArg::TezukaInterlaced => MatrixKind::TezukaInterlaced,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct GenmatArgs {
    #[arg(long, value_enum)]
    #[serde(skip)]
    kind: KindArg,
    /// Dimension of the resulting point set.
    #[arg(long)]
    dim: usize,
    /// Columns n (supports 2^n points).
    #[arg(long)]
    cols: usize,
    /// Rows q (precision in bits).
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PointFormat {
    Csv,
    Binary,
}

#[derive(Args, Debug, Serialize)]
struct PointsArgs {
    #[arg(long)]
    genmat: PathBuf,
    #[arg(long)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    start: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: PointFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TvalueArgs {
    #[arg(long)]
    genmat: PathBuf,
    #[arg(long, default_value_t = 1)]
    alpha: usize,
    /// Net size exponent (default: number of columns).
    #[arg(long)]
    n: Option<usize>,
    /// Check this t instead of searching for the minimum.
    #[arg(long)]
    t: Option<usize>,
    /// Check every prefix net up to `--nmax`.
    #[arg(long)]
    sequence: bool,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct HaarArgs {
    #[arg(long)]
    points: PathBuf,
    /// Levels j_i < J are stored (default: point precision).
    #[arg(long)]
    box_limit: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Auto,
    Warnock,
    Parseval,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ArithArg {
    Auto,
    Exact,
    Float,
}

impl From<ArithArg> for Arithmetic {
    fn from(a: ArithArg) -> Self {
        match a {
            ArithArg::Auto => Arithmetic::Auto,
            ArithArg::Exact => Arithmetic::Exact,
            ArithArg::Float => Arithmetic::Float,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct NormParamsArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// BMO test boxes have |a| <= depth (default: ceil(ld N)).
    #[arg(long)]
    depth: Option<u32>,
    /// Grid cells per axis before refinement by the points.
    #[arg(long, default_value_t = 256)]
    resolution: u32,
    /// Comma-separated exponent grid for the Orlicz estimate.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug, Serialize)]
struct NormArgs {
    #[arg(long)]
    points: PathBuf,
    /// Precomputed Haar table (CSV from `hodisc haar`).
    #[arg(long)]
    haar: Option<PathBuf>,
    #[arg(long)]
    kind: String,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "auto")]
    arith: ArithArg,
    #[command(flatten)]
    params: NormParamsArgs,
    /// Append `N,d,kind,p,q,s,beta,value,tail,method` to this CSV.
    #[arg(long)]
    emit_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct StudyArgs {
    #[arg(long)]
    genmat: PathBuf,
    #[arg(long)]
    norm: String,
    #[command(flatten)]
    params: NormParamsArgs,
    #[arg(long, default_value_t = 4)]
    nmin: u32,
    #[arg(long, default_value_t = 12)]
    nmax: u32,
    #[arg(long)]
    out: PathBuf,
}

/// Files read and written by one run, for the manifest.
#[derive(Default)]
struct Io {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Io {
    fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        self.inputs.push(path.to_path_buf());
        Ok(bytes)
    }

    fn read_text(&mut self, path: &Path) -> CliResult<String> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| CliError::Invalid(format!("{}: not UTF-8 text", path.display())))
    }

    /// Writes to `path`, or stdout when `None`.
    fn write(&mut self, path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
        match path {
            Some(p) => {
                fs::write(p, bytes).map_err(|e| io_err(p, e))?;
                self.outputs.push(p.to_path_buf());
            }
            None => std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Internal(format!("stdout: {e}")))?,
        }
        Ok(())
    }

    fn append(&mut self, path: &Path, header: &str, row: &str) -> CliResult<()> {
        let fresh = !path.exists();
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        if fresh {
            writeln!(f, "{header}").map_err(|e| io_err(path, e))?;
        }
        writeln!(f, "{row}").map_err(|e| io_err(path, e))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }
}

fn sha256_hex(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn write_manifest(subcommand: &str, params: Value, io: &Io, seconds: f64) -> CliResult<()> {
    let Some(primary) = io.outputs.first() else {
        return Ok(());
    };
    let digests = |paths: &[PathBuf]| -> CliResult<Vec<Value>> {
        paths
            .iter()
            .map(|p| Ok(json!({ "path": p.display().to_string(), "sha256": sha256_hex(p)? })))
            .collect()
    };
    let manifest = json!({
        "tool": "hodisc",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "parameters": params,
        "inputs": digests(&io.inputs)?,
        "outputs": digests(&io.outputs)?,
        "wall_time_seconds": seconds,
    });
    let mut path = primary.clone().into_os_string();
    path.push(".manifest.json");
    let path = PathBuf::from(path);
    fs::write(&path, json::to_string_pretty(&manifest)).map_err(|e| io_err(&path, e))
}

fn load_genmat(io: &mut Io, path: &Path) -> CliResult<GeneratingMatrixSet> {
    Ok(GeneratingMatrixSet::from_text(&io.read_text(path)?)?)
}

/// Reads CSV or the binary layout, whichever the file holds.
fn load_points(io: &mut Io, path: &Path) -> CliResult<DyadicPointSet> {
    let bytes = io.read(path)?;
    if bytes.starts_with(b"k,") {
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::Invalid(format!("{}: not UTF-8 text", path.display())))?;
        Ok(DyadicPointSet::from_csv(&text)?)
    } else {
        Ok(DyadicPointSet::read_binary(&bytes[..])?)
    }
}

fn load_or_build_table(io: &mut Io, haar: Option<&Path>, p: &DyadicPointSet) -> CliResult<HaarTable> {
    match haar {
        Some(path) => {
            let t = HaarTable::from_csv(&io.read_text(path)?)?;
            if t.n_points() != p.len() as u64 || t.dim() != p.dim() {
                return Err(CliError::Invalid(format!(
                    "Haar table ({} points, d={}) does not match the point set ({} points, d={})",
                    t.n_points(),
                    t.dim(),
                    p.len(),
                    p.dim()
                )));
            }
            Ok(t)
        }
        None => Ok(build_table(p, None)?),
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = json::to_string_pretty(v);
    s.push('\n');
    s.into_bytes()
}

fn run_genmat(a: &GenmatArgs, io: &mut Io) -> CliResult<Value> {
    let g = genmat::build(a.kind.into(), a.dim, a.cols, a.rows)?;
    io.write(a.out.as_deref(), g.to_text().as_bytes())?;
    let mut params = to_value(a)?;
    params["kind"] = json!(MatrixKind::from(a.kind).as_str());
    Ok(params)
}

fn run_points(a: &PointsArgs, io: &mut Io) -> CliResult<Value> {
    let g = load_genmat(io, &a.genmat)?;
    let p = points::range(&g, a.start, a.count)?;
    let bytes = match a.format {
        PointFormat::Csv => p.to_csv().into_bytes(),
        PointFormat::Binary => {
            let mut buf = Vec::new();
            p.write_binary(&mut buf)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            buf
        }
    };
    io.write(a.out.as_deref(), &bytes)?;
    to_value(a)
}

fn run_tvalue(a: &TvalueArgs, io: &mut Io) -> CliResult<Value> {
    let g = load_genmat(io, &a.genmat)?;
    let report = if a.sequence {
        let n_max = a.nmax.or(a.n).unwrap_or(g.n_cols());
        match a.t {
            Some(t) => to_value(&netquality::is_order_alpha_sequence_prefix(&g, n_max, a.alpha, t)?)?,
            None => to_value(&netquality::minimal_sequence_t(&g, n_max, a.alpha)?)?,
        }
    } else {
        let n = a.n.unwrap_or(g.n_cols());
        let sub = g.restrict(a.alpha * n, n)?;
        match a.t {
            Some(t) => {
                let w = netquality::find_violation(&sub, n, a.alpha, t)?;
                json!({ "alpha": a.alpha, "n": n, "d": g.dim(), "t": t, "passed": w.is_none(), "witness": to_value(&w)? })
            }
            None => to_value(&netquality::minimal_t(&sub, n, a.alpha, None)?)?,
        }
    };
    io.write(a.out.as_deref(), &json_bytes(&report))?;
    to_value(a)
}

fn run_haar(a: &HaarArgs, io: &mut Io) -> CliResult<Value> {
    let p = load_points(io, &a.points)?;
    let t = build_table(&p, a.box_limit)?;
    io.write(Some(&a.out), t.to_csv().as_bytes())?;
    to_value(a)
}

fn param(v: Option<f64>, name: &str, default: Option<f64>) -> CliResult<f64> {
    v.or(default)
        .ok_or_else(|| CliError::Invalid(format!("--{name} is required for this norm")))
}

fn default_depth(n: u64) -> u32 {
    (n.max(1) as f64).log2().ceil() as u32
}

fn evaluate_norm(a: &NormArgs, io: &mut Io) -> CliResult<Vec<NormReport>> {
    let kind: NormKind = a.kind.parse()?;
    let p = load_points(io, &a.points)?;
    let arith: Arithmetic = a.arith.into();
    let pr = &a.params;
    let haar = a.haar.as_deref();
    Ok(match kind {
        NormKind::L2 => match a.method {
            MethodArg::Warnock | MethodArg::Auto if haar.is_none() => vec![norms::l2_warnock(&p, arith)?],
            _ => vec![norms::l2_parseval(&load_or_build_table(io, haar, &p)?, arith)?],
        },
        NormKind::Lp => vec![norms::lp_grid(&p, param(pr.p, "p", None)?, pr.resolution)?],
        NormKind::LinfStar => vec![norms::star_discrepancy_exact(&p)?],
        NormKind::BmoDyadic => {
            let t = load_or_build_table(io, haar, &p)?;
            let depth = pr.depth.unwrap_or_else(|| default_depth(p.len() as u64));
            vec![norms::bmo_dyadic(&t, depth, arith)?]
        }
        NormKind::D0Projection => vec![norms::d0_projection_norm(&load_or_build_table(io, haar, &p)?, arith)?],
        NormKind::Besov => {
            let t = load_or_build_table(io, haar, &p)?;
            vec![norms::besov_quasinorm(
                &t,
                param(pr.p, "p", None)?,
                param(pr.q, "q", None)?,
                param(pr.s, "s", Some(0.0))?,
            )?]
        }
        NormKind::TriebelBracket => {
            let t = load_or_build_table(io, haar, &p)?;
            let (lo, hi) = norms::triebel_bracket(
                &t,
                param(pr.p, "p", None)?,
                param(pr.q, "q", None)?,
                param(pr.s, "s", Some(0.0))?,
            )?;
            vec![lo, hi]
        }
        NormKind::OrliczExp => vec![norms::orlicz_exp_estimate(
            &p,
            param(pr.beta, "beta", None)?,
            pr.p_grid.as_deref(),
            pr.resolution,
        )?],
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(json::fmt_f64).unwrap_or_default()
}

fn run_norm(a: &NormArgs, io: &mut Io) -> CliResult<Value> {
    let reports = evaluate_norm(a, io)?;
    let out = match reports.as_slice() {
        [one] => to_value(one)?,
        [lo, hi] => json!({ "lower": to_value(lo)?, "upper": to_value(hi)? }),
        _ => return Err(CliError::Internal("unexpected report count".into())),
    };
    io.write(a.out.as_deref(), &json_bytes(&out))?;
    if let Some(csv) = &a.emit_csv {
        for r in &reports {
            let row = format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.n_points,
                r.dim,
                r.kind,
                opt(r.params.p),
                opt(r.params.q),
                opt(r.params.s),
                opt(r.params.beta),
                json::fmt_f64(r.value),
                json::fmt_f64(r.truncation.map_or(0.0, |t| t.tail)),
                r.method
            );
            io.append(csv, "N,d,kind,p,q,s,beta,value,tail,method", &row)?;
        }
    }
    to_value(a)
}

fn study_norm(name: &str, pr: &NormParamsArgs) -> CliResult<StudyNorm> {
    let kind: NormKind = name.parse()?;
    Ok(match kind {
        NormKind::L2 => StudyNorm::L2,
        NormKind::Lp => StudyNorm::Lp {
            p: param(pr.p, "p", None)?,
            resolution: pr.resolution,
        },
        NormKind::LinfStar => StudyNorm::Star,
        NormKind::BmoDyadic => StudyNorm::BmoDyadic { depth: pr.depth },
        NormKind::D0Projection => StudyNorm::D0Projection,
        NormKind::Besov => StudyNorm::Besov {
            p: param(pr.p, "p", None)?,
            q: param(pr.q, "q", None)?,
            s: param(pr.s, "s", Some(0.0))?,
        },
        NormKind::OrliczExp => StudyNorm::Orlicz {
            beta: param(pr.beta, "beta", None)?,
            resolution: pr.resolution,
        },
        NormKind::TriebelBracket => {
            return Err(CliError::Invalid(
                "studies take a single norm; run besov with min(p,q) and max(p,q)".into(),
            ))
        }
    })
}

fn run_study(a: &StudyArgs, io: &mut Io) -> CliResult<Value> {
    if a.nmin == 0 || a.nmin > a.nmax {
        return Err(CliError::Invalid(format!("need 1 <= nmin <= nmax (got {}..{})", a.nmin, a.nmax)));
    }
    let g = load_genmat(io, &a.genmat)?;
    let norm = study_norm(&a.norm, &a.params)?;
    let exps: Vec<u32> = (a.nmin..=a.nmax).collect();
    let rows = studies::scaling_study(&g, norm, &exps)?;
    io.write(Some(&a.out), studies::study_csv(&rows).as_bytes())?;
    to_value(a)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let started = Instant::now();
    let mut io = Io::default();
    let (name, params) = match &cli.command {
        Command::Genmat(a) => ("genmat", run_genmat(a, &mut io)?),
        Command::Points(a) => ("points", run_points(a, &mut io)?),
        Command::Tvalue(a) => ("tvalue", run_tvalue(a, &mut io)?),
        Command::Haar(a) => ("haar", run_haar(a, &mut io)?),
        Command::Norm(a) => ("norm", run_norm(a, &mut io)?),
        Command::Study(a) => ("study", run_study(a, &mut io)?),
    };
    write_manifest(name, params, &io, started.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("hodisc: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("hodisc: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("hodisc: internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
