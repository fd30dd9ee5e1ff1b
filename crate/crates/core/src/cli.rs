//! Command-line front end shared by the `msp` binary and the integration tests.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::apps::{solve_krr, solve_least_squares, KernelKind, KernelSpec, KrrConfig, LeastSquaresConfig};
use crate::config::MspConfig;
use crate::error::{MspError, Result};
use crate::general::GeneralSolveConfig;
use crate::harness::{gen_instance, run_compare, BenchmarkReport, CompareOptions, GeneratorKind, InstanceSpec, SolverKind};
use crate::io::{read_matrix, read_points, read_vector, write_matrix, write_vector};
use crate::linalg::{Matrix, Symmetry};
use crate::psd::PsdSolveConfig;
use crate::report::SolveReport;

// Writes to stdout, ignoring errors such as a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "msp", version, about = "Multi-level sketched preconditioning for regularized linear systems")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for kernel-level parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write the machine-readable report here.
    #[arg(long, global = true, value_name = "PATH")]
    pub json_out: Option<PathBuf>,
    /// TOML file of `key = value` overrides for sketch and budget constants.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a test instance and write it to disk.
    Gen(GenArgs),
    /// Solve one system read from disk.
    Solve(SolveArgs),
    /// Generate an instance and compare solvers on it.
    Bench(BenchArgs),
    /// Compare solvers on a system read from disk.
    Compare(CompareArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long, value_enum, default_value = "k-large-psd")]
    pub kind: GeneratorKind,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 1e4)]
    pub ratio: f64,
    /// Hidden-rotation indices as `i,j` (0-based).
    #[arg(long, value_parser = parse_pair)]
    pub rotation: Option<(usize, usize)>,
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0.3)]
    pub spread: f64,
    /// Input file for `--kind mtx-file`.
    #[arg(long)]
    pub path: Option<PathBuf>,
}

impl InstanceArgs {
    fn spec(&self, seed: u64) -> InstanceSpec {
        InstanceSpec {
            kind: self.kind,
            n: self.n,
            m: self.m,
            k: self.k,
            ratio: self.ratio,
            rotation: self.rotation,
            bandwidth: self.bandwidth,
            dim: self.dim,
            clusters: self.clusters,
            spread: self.spread,
            path: self.path.clone(),
            seed,
            ..InstanceSpec::default()
        }
    }
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected i,j but got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Matrix output (`.mtx`, or `.mspm` for the binary format). Sidecars
    /// `<stem>.rhs.txt` and, when known, `<stem>.sol.txt` are written next to it.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    MspPsd,
    MspGeneral,
    PlainLanczos,
    DenseDirect,
    Krr,
    LeastSquares,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Points for `--method krr` (one per line); the RBF kernel is built from them.
    #[arg(long, conflicts_with = "matrix")]
    pub points: Option<PathBuf>,
    /// Right-hand side; all ones when omitted.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "msp-psd")]
    pub method: Method,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 32)]
    pub l: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
    /// Fixed level-1 iteration count instead of the adaptive budget.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub solution_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareFlags {
    /// Comma-separated; defaults to every solver applicable to the system.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 32)]
    pub l: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub no_warmup: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub compare: CompareFlags,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    /// Treat the matrix as symmetric PSD.
    #[arg(long)]
    pub psd: bool,
    #[command(flatten)]
    pub compare: CompareFlags,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Some(t) = cli.threads {
        // A global pool can only be installed once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let tuning = match &cli.config {
        Some(p) => MspConfig::from_file(p)?,
        None => MspConfig::default(),
    };
    match &cli.command {
        Command::Gen(a) => cmd_gen(cli, a),
        Command::Solve(a) => cmd_solve(cli, a, &tuning),
        Command::Bench(a) => {
            let spec = a.instance.spec(cli.seed);
            let inst = gen_instance(&spec)?;
            let instance = serde_json::to_value(&spec).unwrap_or_default();
            cmd_compare(cli, &inst.a, &inst.b, instance, &a.compare, &tuning)
        }
        Command::Compare(a) => {
            let mut m = read_matrix(&a.matrix)?;
            if a.psd {
                m = m.into_symmetric_psd()?;
            }
            let b = load_rhs(a.rhs.as_deref(), m.rows())?;
            let instance = serde_json::json!({ "matrix": a.matrix, "rhs": a.rhs });
            cmd_compare(cli, &m, &b, instance, &a.compare, &tuning)
        }
        Command::Selftest => {
            let checks = crate::harness::run_selftest(cli.seed);
            for c in &checks {
                out!("{} {:<30} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            write_json(cli, &serde_json::to_value(&checks).unwrap_or_default())?;
            Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<i32> {
    let spec = a.instance.spec(cli.seed);
    let inst = gen_instance(&spec)?;
    write_matrix(&a.out, &inst.a)?;
    let rhs = sidecar(&a.out, "rhs.txt");
    write_vector(&rhs, &inst.b)?;
    let mut summary = serde_json::json!({
        "spec": spec,
        "matrix": a.out,
        "rhs": rhs,
        "rows": inst.a.rows(),
        "cols": inst.a.cols(),
    });
    if let Some(x) = &inst.x_true {
        let sol = sidecar(&a.out, "sol.txt");
        write_vector(&sol, x)?;
        summary["solution"] = serde_json::json!(sol);
    }
    if let Some(s) = &inst.spectrum {
        summary["spectrum"] = serde_json::json!(s.values());
    }
    out!("{}\n", serde_json::to_string_pretty(&summary).unwrap_or_default());
    write_json(cli, &summary)?;
    Ok(EXIT_OK)
}

fn load_rhs(path: Option<&Path>, len: usize) -> Result<Vec<f64>> {
    match path {
        Some(p) => {
            let v = read_vector(p)?;
            if v.len() != len {
                return Err(MspError::DimensionMismatch(format!(
                    "right-hand side has {} entries, expected {len}",
                    v.len()
                )));
            }
            Ok(v)
        }
        None => Ok(vec![1.0; len]),
    }
}

fn cmd_solve(cli: &Cli, a: &SolveArgs, tuning: &MspConfig) -> Result<i32> {
    let m = match (&a.matrix, &a.points) {
        (Some(p), _) => read_matrix(p)?,
        (None, Some(p)) => KernelSpec::new(KernelKind::Rbf { bandwidth: a.bandwidth }, read_points(p)?)?.matrix()?,
        (None, None) => return Err(MspError::Domain("solve needs --matrix or --points".into())),
    };
    let b = load_rhs(a.rhs.as_deref(), m.rows())?;
    let report = match a.method {
        Method::MspPsd => {
            let m = if m.symmetry() == Symmetry::SymmetricPsd { m } else { m.into_symmetric_psd()? };
            let mut cfg = PsdSolveConfig::new(a.l, a.lambda, a.eps).with_seed(cli.seed);
            cfg.delta = a.delta;
            cfg.t_max_override = a.max_iters;
            cfg.tuning = tuning.clone();
            crate::psd::solve_psd(&m, &b, &cfg)?
        }
        Method::MspGeneral => {
            let mut cfg = GeneralSolveConfig::new(a.l, a.lambda, a.eps).with_seed(cli.seed);
            cfg.delta = a.delta;
            cfg.t_max_override = a.max_iters;
            cfg.tuning = tuning.clone();
            if a.lambda == 0.0 && m.rows() == m.cols() {
                crate::general::solve_square(&m, &b, &cfg)?
            } else {
                crate::general::solve_normal(&m, &m.apply_transpose(&b), &cfg)?
            }
        }
        Method::PlainLanczos | Method::DenseDirect => {
            let kind = if a.method == Method::PlainLanczos { SolverKind::PlainLanczos } else { SolverKind::DenseDirect };
            let opts = CompareOptions {
                solvers: vec![kind],
                eps: a.eps,
                l: a.l,
                lambda: a.lambda,
                delta: a.delta,
                seed: cli.seed,
                max_iters: a.max_iters.unwrap_or(CompareOptions::default().max_iters),
                warmup: false,
                tuning: tuning.clone(),
            };
            let mut bench = run_compare(&m, &b, serde_json::Value::Null, &opts);
            if let Some(err) = bench.rows[0].error.take() {
                return Err(MspError::Domain(err));
            }
            bench.reports.remove(0)
        }
        Method::Krr => {
            let m = if m.symmetry() == Symmetry::SymmetricPsd { m } else { m.into_symmetric_psd()? };
            let mut cfg = KrrConfig::new(a.lambda, a.eps).with_seed(cli.seed);
            cfg.delta = a.delta;
            solve_krr(&m, &b, &cfg)?
        }
        Method::LeastSquares => {
            let mut cfg = LeastSquaresConfig::new(a.eps, a.l).with_seed(cli.seed);
            cfg.delta = a.delta;
            cfg.tuning = tuning.clone();
            solve_least_squares(&m, &b, &cfg)?
        }
    };
    emit_report(cli, &report)?;
    if let Some(p) = &a.solution_out {
        write_vector(p, &report.x)?;
    }
    Ok(if report.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn emit_report(cli: &Cli, report: &SolveReport) -> Result<()> {
    out!("{}\n", report.to_json());
    write_json(cli, &report.to_json_with_solution())
}

fn write_json(cli: &Cli, value: &serde_json::Value) -> Result<()> {
    if let Some(p) = &cli.json_out {
        std::fs::write(p, serde_json::to_string_pretty(value).unwrap_or_default())?;
    }
    Ok(())
}

fn cmd_compare(
    cli: &Cli,
    a: &Matrix,
    b: &[f64],
    instance: serde_json::Value,
    flags: &CompareFlags,
    tuning: &MspConfig,
) -> Result<i32> {
    if b.len() != a.rows() {
        return Err(MspError::DimensionMismatch(format!(
            "right-hand side has {} entries, expected {}",
            b.len(),
            a.rows()
        )));
    }
    let solvers = if flags.solvers.is_empty() {
        SolverKind::ALL
            .into_iter()
            .filter(|s| *s != SolverKind::MspPsd || a.symmetry() == Symmetry::SymmetricPsd)
            .collect()
    } else {
        flags.solvers.clone()
    };
    let opts = CompareOptions {
        solvers,
        eps: flags.eps,
        l: flags.l,
        lambda: flags.lambda,
        seed: cli.seed,
        warmup: !flags.no_warmup,
        tuning: tuning.clone(),
        ..CompareOptions::default()
    };
    let report: BenchmarkReport = run_compare(a, b, instance, &opts);
    out!("{}", report.table());
    write_json(cli, &serde_json::to_value(&report).unwrap_or_default())?;
    Ok(if report.all_converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
