//! `lloydlab`: run Lloyd's method on perturbed instances, sweep parameter
//! grids, check structural properties and verify probability bounds.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error, 3 an invariant or
//! bound check failed.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lloydlab::engine::{audit, detect_epochs, run, write_trace, InitMethod, RunConfig, DEFAULT_MAX_ITERATIONS};
use lloydlab::harness::{run_sweep, write_results, SweepConfig};
use lloydlab::io::{load_points, read_instance_file, InstanceFile};
use lloydlab::oracles::{
    mc_delta_bound, mc_separation_bound, mc_single_point_bisector, mc_spreaded_bound, LemmaCheck, SinglePointSetup,
};
use lloydlab::perturbation::{hypercube_d, tail_probability_check, MeanGenerator, DEFAULT_KAPPA};
use lloydlab::props::{
    check_delta_sparse, check_eps_separated, check_eps_spreaded, drop_lower_bounds, max_separated_eps,
    max_spreaded_eps, DropBoundKind, DropContext, LemmaConstants, SeparationOptions, SparseCaps,
};
use lloydlab::{Exec, Instance, LabError, Point};
use serde_json::json;

const EXIT_ERROR: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lloydlab",
    version,
    about = "Instrumented Lloyd's method on Gaussian-perturbed instances"
)]
struct Cli {
    /// Worker threads for data-parallel loops.
    #[arg(long, global = true, env = "LLOYDLAB_THREADS")]
    threads: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Lloyd's method on one instance.
    Run(RunArgs),
    /// Run a parameter sweep described by a TOML config.
    Sweep(SweepArgs),
    /// Check a structural property of a point set.
    Props(PropsArgs),
    /// Monte Carlo check of a probability bound.
    Verify(VerifyArgs),
    /// Print the lemma constants for a parameter set.
    Constants(ConstantsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Instance file or bare JSON array of realized points.
    #[arg(long, conflicts_with_all = ["means", "sigma"], required_unless_present = "means")]
    points: Option<PathBuf>,
    /// Instance file or bare JSON array of means to perturb.
    #[arg(long, requires = "sigma")]
    means: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Perturbation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "uniform-points", value_parser = ["uniform-points", "first-k"])]
    init: String,
    /// JSON array of initial centers; overrides --init.
    #[arg(long)]
    centers: Option<PathBuf>,
    /// Seed for the initial centers.
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iters: usize,
    /// Write the per-iteration trace here (JSON lines).
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results CSV; defaults to the config's `output`, else standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-run traces; overrides the config.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Separated,
    Sparse,
    Spreaded,
}

#[derive(Args)]
struct PropsArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long, value_enum)]
    check: Property,
    /// Radius for `separated`/`spreaded`; without it the supremum is reported.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, required_if_eq("check", "sparse"))]
    delta: Option<f64>,
    #[arg(long, default_value_t = 4)]
    s_cap: u64,
    #[arg(long, default_value_t = 2)]
    t_cap: u64,
    #[arg(long, default_value_t = 2)]
    size_cap: usize,
    /// Largest number of key-value sums compared.
    #[arg(long)]
    budget: Option<u64>,
    /// Largest number of point subsets enumerated for d >= 3.
    #[arg(long)]
    subset_budget: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    Tail,
    SpreadedProb,
    SeparationProb,
    DeltaBound,
    SinglePoint,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    lemma: Lemma,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Tail width for `tail`.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Mean for `tail`.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Points already in the cluster, for `single-point`.
    #[arg(long, default_value_t = 0)]
    ell: usize,
    /// Comma-separated coordinates of `o`, for `single-point`.
    #[arg(long, value_delimiter = ',')]
    o: Option<Vec<f64>>,
    /// Comma-separated coordinates of `p`, for `single-point`.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Mean of the random point; defaults to `o`.
    #[arg(long, value_delimiter = ',')]
    r_mean: Option<Vec<f64>>,
    #[arg(long, default_value = "uniform-grid", value_parser = ["uniform-grid", "uniform-random"])]
    means: String,
    /// Trials (or samples, for `tail`).
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    a: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
    /// Hypercube half-width; derived from the other parameters when absent.
    #[arg(long = "D", id = "radius")]
    radius: Option<f64>,
    /// Sparseness radius for the δ-sparse drop bound.
    #[arg(long)]
    delta: Option<f64>,
    /// Separation/spreadedness radius for those drop bounds.
    #[arg(long)]
    eps: Option<f64>,
    /// Smallest center distance for the close-centers drop bound.
    #[arg(long)]
    min_center_distance: Option<f64>,
}

fn io_err(path: &Path, e: io::Error) -> LabError {
    LabError::Io(format!("{}: {e}", path.display()))
}

/// Points from an instance file or a bare JSON array.
fn read_points_or_instance(path: &Path) -> Result<Result<Vec<Point>, InstanceFile>, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if text.trim_start().starts_with('[') {
        Ok(Ok(serde_json::from_str(&text)?))
    } else {
        read_instance_file(path).map(Err)
    }
}

fn load_run_instance(args: &RunArgs) -> Result<Instance, LabError> {
    if let Some(path) = &args.points {
        return match read_points_or_instance(path)? {
            Ok(points) => Instance::new(points),
            Err(file) => file.realize(None, None),
        };
    }
    let path = args.means.as_ref().ok_or(LabError::MissingField("means"))?;
    let file = match read_points_or_instance(path)? {
        Ok(means) => InstanceFile::means_only(means),
        Err(mut file) => {
            file.points = None;
            file
        }
    };
    file.realize(args.sigma, Some(args.seed))
}

fn cmd_run(args: RunArgs, exec: Exec) -> Result<u8, LabError> {
    let instance = load_run_instance(&args)?;
    let init = match &args.centers {
        Some(path) => InitMethod::Explicit(load_points(path)?),
        None => args.init.parse()?,
    };
    let cfg = RunConfig::new(args.k, init, args.init_seed)
        .max_iterations(args.max_iters)
        .exec(exec);
    let trace = run(&instance, &cfg)?;
    if let Some(path) = &args.trace_out {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        write_trace(BufWriter::new(file), &instance, &trace)?;
    }
    let report = audit(&trace);
    let summary = json!({
        "n": instance.n(),
        "d": instance.dim(),
        "k": args.k,
        "iterations": trace.iterations(),
        "termination": trace.termination.to_string(),
        "final_potential": trace.final_potential(),
        "min_delta": trace.min_delta(),
        "max_epoch": detect_epochs(&trace.records).iter().map(|e| e.len()).max().unwrap_or(0),
        "audit": report,
    });
    println!("{summary}");
    if report.is_clean() {
        Ok(0)
    } else {
        eprintln!("invariant violated: {}", report.describe());
        Ok(EXIT_CHECK_FAILED)
    }
}

fn cmd_sweep(args: SweepArgs, exec: Exec) -> Result<u8, LabError> {
    let mut config = SweepConfig::load(&args.config)?;
    if args.trace_dir.is_some() {
        config.trace_dir = args.trace_dir;
    }
    let result = run_sweep(&config, exec)?;
    match args.out.or(config.output) {
        Some(path) => {
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            write_results(BufWriter::new(file), &result.rows)?;
        }
        None => write_results(io::stdout().lock(), &result.rows)?,
    }
    for d in &result.diagnostics {
        eprintln!(
            "invariant violated in n={} k={} d={} sigma={} trial {}: {}",
            d.cell.n, d.cell.k, d.cell.d, d.cell.sigma, d.trial, d.message
        );
    }
    Ok(if result.diagnostics.is_empty() {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

fn cmd_props(args: PropsArgs, exec: Exec) -> Result<u8, LabError> {
    let instance = match read_points_or_instance(&args.points)? {
        Ok(points) => Instance::new(points)?,
        Err(file) => file.realize(None, None)?,
    };
    let out = match args.check {
        Property::Separated => match args.eps {
            Some(eps) => {
                let mut opts = SeparationOptions {
                    exec,
                    ..SeparationOptions::default()
                };
                if let Some(b) = args.subset_budget {
                    opts.subset_budget = b;
                }
                json!({"property": "separated", "eps": eps, "verdict": check_eps_separated(&instance, eps, opts)?})
            }
            None => json!({"property": "separated", "max_eps": max_separated_eps(&instance, exec)?}),
        },
        Property::Spreaded => match args.eps {
            Some(eps) => json!({"property": "spreaded", "eps": eps, "verdict": check_eps_spreaded(&instance, eps)?}),
            None => json!({"property": "spreaded", "max_eps": max_spreaded_eps(&instance)?}),
        },
        Property::Sparse => {
            let delta = args.delta.ok_or(LabError::MissingField("delta"))?;
            let mut caps = SparseCaps::new(args.s_cap, args.t_cap, args.size_cap);
            if let Some(b) = args.budget {
                caps.budget = b;
            }
            json!({"property": "sparse", "delta": delta, "verdict": check_delta_sparse(&instance, delta, caps, exec)?})
        }
    };
    println!("{out}");
    Ok(0)
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64, LabError> {
    v.ok_or(LabError::MissingField(name))
}

fn cmd_verify(args: VerifyArgs, exec: Exec) -> Result<u8, LabError> {
    let means: MeanGenerator = args.means.parse()?;
    let check = match args.lemma {
        Lemma::Tail => {
            let c = tail_probability_check(args.sigma, args.t, args.mu, args.trials, args.seed, exec)?;
            if c.out_of_range {
                eprintln!("warning: parameters lie outside the stated range of the tail bound");
            }
            LemmaCheck {
                lemma: "tail",
                params: format!("sigma={} t={} mu={}", args.sigma, args.t, args.mu),
                check: c,
                warning: None,
            }
        }
        Lemma::SpreadedProb => mc_spreaded_bound(
            args.n,
            args.sigma,
            need(args.eps, "eps")?,
            args.trials,
            args.seed,
            &means,
            exec,
        )?,
        Lemma::SeparationProb => mc_separation_bound(
            args.n,
            args.d,
            args.sigma,
            need(args.eps, "eps")?,
            args.trials,
            args.seed,
            &means,
            exec,
        )?,
        Lemma::DeltaBound => mc_delta_bound(
            args.n,
            args.d,
            args.k,
            args.sigma,
            need(args.delta, "delta")?,
            args.trials,
            args.seed,
            &InitMethod::UniformPoints,
            &means,
            exec,
        )?,
        Lemma::SinglePoint => {
            let o = args.o.clone().ok_or(LabError::MissingField("o"))?;
            let setup = SinglePointSetup {
                n: args.n,
                ell: args.ell,
                sigma: args.sigma,
                delta: need(args.delta, "delta")?,
                eps: need(args.eps, "eps")?,
                r_mean: args.r_mean.clone().unwrap_or_else(|| o.clone()),
                p: args.p.clone().ok_or(LabError::MissingField("p"))?,
                o,
            };
            mc_single_point_bisector(&setup, args.trials, args.seed, exec)?
        }
    };
    if let Some(w) = &check.warning {
        eprintln!("warning: {w}");
    }
    let mut out = csv::Writer::from_writer(io::stdout().lock());
    out.write_record(["lemma", "params", "empirical", "bound", "margin", "verdict"])?;
    out.write_record([
        check.lemma.to_string(),
        check.params.clone(),
        check.check.empirical.to_string(),
        check.check.bound.to_string(),
        check.check.margin().to_string(),
        check.verdict().to_string(),
    ])?;
    out.flush()?;
    Ok(if check.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "underflow".to_string(), |v| format!("{v:e}"))
}

fn cmd_constants(args: ConstantsArgs) -> Result<u8, LabError> {
    let c = LemmaConstants::compute(args.n, args.d, args.k, args.a, args.sigma, args.kappa, args.radius)?;
    let mut out = io::stdout().lock();
    let w = |out: &mut io::StdoutLock, line: String| writeln!(out, "{line}").map_err(LabError::from);
    w(&mut out, format!("W_log {}", c.w_log))?;
    w(&mut out, format!("ln_eps {}", c.eps_log))?;
    w(&mut out, format!("eps {}", fmt_value(c.epsilon())))?;
    let derived = hypercube_d(args.n, args.d, args.k, args.sigma, args.kappa)?;
    w(
        &mut out,
        format!(
            "D {} (derived {}{})",
            c.hypercube,
            derived.value,
            if derived.clamped { ", clamped" } else { "" }
        ),
    )?;
    let ctx = DropContext {
        n: Some(args.n),
        d: Some(args.d),
        k: Some(args.k),
        a: Some(args.a),
        delta: args.delta,
        eps: args.eps,
        min_center_distance: args.min_center_distance,
        hypercube: Some(c.hypercube),
    };
    for kind in DropBoundKind::ALL {
        let ctx = if kind == DropBoundKind::CloseCenters {
            // the close-centers bound uses the lemma radius, not --eps
            DropContext {
                eps: c.epsilon(),
                ..ctx.clone()
            }
        } else {
            ctx.clone()
        };
        let name = serde_json::to_value(kind)?;
        let name = name.as_str().unwrap_or_default();
        match drop_lower_bounds(&ctx, &[kind]) {
            Ok(b) => w(
                &mut out,
                format!("drop_{name} {} (ln {})", fmt_value(b[0].value), b[0].log_value),
            )?,
            Err(LabError::MissingField(f)) => {
                w(&mut out, format!("drop_{name} n/a (needs --{})", f.replace('_', "-")))?
            }
            Err(e) => return Err(e),
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        lloydlab::exec::init_threads(t);
    }
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a, exec),
        Command::Sweep(a) => cmd_sweep(a, exec),
        Command::Props(a) => cmd_props(a, exec),
        Command::Verify(a) => cmd_verify(a, exec),
        Command::Constants(a) => cmd_constants(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
