//! Command-line driver: synthetic matrices, Hessian preprocessing, single
//! decompositions, and parameter sweeps.
//!
//! Exit codes: 0 success, 1 I/O, 2 parameter domain, 3 file format,
//! 4 shape mismatch, 5 regime, 6 factorization failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use caldera_core::caldera::{evaluate_bounds, UpdateOrder};
use caldera_core::hessian::HessianContext;
use caldera_core::io::{read_cmat, write_cmat, HessianMeta, RunReport, REPORT_SCHEMA_VERSION};
use caldera_core::synth::SpectrumKind;
use caldera_core::{caldera_decompose, DecompositionConfig, Error, Matrix};

#[derive(Parser)]
#[command(name = "caldera", version, about = "Calibration-aware low-precision + low-rank matrix decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic matrix with a controlled singular-value profile.
    Synth(SynthArgs),
    /// Build the calibration Hessian from an activation matrix.
    Hessian(HessianArgs),
    /// Decompose a matrix as Q + L·R and write the triple plus a report.
    Decompose(DecomposeArgs),
    /// Run a grid of decompositions and collect one CSV row per cell.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    DecayingPower,
    DecayingExp,
    LowrankPlusNoise,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: SynthKind,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Power-law exponent (decaying-power).
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Geometric decay base (decaying-exp).
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Exact rank (lowrank-plus-noise).
    #[arg(long, default_value_t = 4)]
    rank: usize,
    /// Noise level (lowrank-plus-noise).
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HessianArgs {
    /// Activation matrix (CMAT, m×d).
    #[arg(long)]
    activations: PathBuf,
    /// Diagonal regularization; defaults to 1e-6·trace(H)/d.
    #[arg(long)]
    delta: Option<f64>,
    /// Output Hessian (CMAT).
    #[arg(long)]
    out: PathBuf,
    /// Output metadata (JSON); defaults to `<out>.json`.
    #[arg(long)]
    out_meta: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Matrix to decompose (CMAT).
    #[arg(long)]
    weights: PathBuf,
    /// Precomputed Hessian (CMAT) with its metadata sidecar.
    #[arg(long, conflicts_with = "activations")]
    hessian: Option<PathBuf>,
    #[arg(long)]
    hessian_meta: Option<PathBuf>,
    /// Activation matrix (CMAT); the Hessian is built on the fly.
    #[arg(long)]
    activations: Option<PathBuf>,
    /// Regularization when building from activations.
    #[arg(long)]
    delta: Option<f64>,
    /// Decomposition configuration (JSON, all fields optional).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Record wall-clock timings in the report (off keeps reports
    /// byte-reproducible across runs).
    #[arg(long, default_value_t = false)]
    timings: bool,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct ConfigOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    b_q: Option<u32>,
    #[arg(long)]
    b_l: Option<u32>,
    #[arg(long)]
    b_r: Option<u32>,
    #[arg(long)]
    t_out: Option<usize>,
    #[arg(long)]
    t_in: Option<usize>,
    /// Apply the randomized Hadamard preprocessing.
    #[arg(long)]
    rht: bool,
    /// Enable the Hessian deflation heuristic for the backbone quantizer.
    #[arg(long)]
    hessian_update: bool,
    #[arg(long, value_enum)]
    update_order: Option<OrderArg>,
    /// Return the zero factor pair when a factor quantizer saturates.
    #[arg(long)]
    strict_fallback: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    QFirst,
    LrFirst,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, conflicts_with = "activations")]
    hessian: Option<PathBuf>,
    #[arg(long)]
    hessian_meta: Option<PathBuf>,
    #[arg(long)]
    activations: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    /// Grid file (JSON): lists of k, b_q, b_l, b_r, seeds, plus optional
    /// t_out/t_in scalars.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Deserialize)]
struct SweepGrid {
    k: Vec<usize>,
    b_q: Vec<u32>,
    b_l: Vec<u32>,
    b_r: Vec<u32>,
    seeds: Vec<u64>,
    #[serde(default)]
    t_out: Option<usize>,
    #[serde(default)]
    t_in: Option<usize>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 1,
        Error::Domain(_) | Error::NonFinite(_) => 2,
        Error::Format { .. } => 3,
        Error::Shape(_) => 4,
        Error::Regime(_) => 5,
        Error::NotPositiveDefinite { .. } => 6,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CALDERA_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Hessian(args) => cmd_hessian(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let kind = match args.kind {
        SynthKind::DecayingPower => SpectrumKind::DecayingPower { p: args.p },
        SynthKind::DecayingExp => SpectrumKind::DecayingExp { rho: args.rho },
        SynthKind::LowrankPlusNoise => SpectrumKind::LowRankPlusNoise {
            rank: args.rank,
            tau: args.tau,
        },
    };
    let w = caldera_core::synth_matrix(args.rows, args.cols, kind, args.seed)?;
    write_cmat(&args.out, &w)?;
    println!("wrote {}x{} matrix to {}", args.rows, args.cols, args.out.display());
    Ok(())
}

fn cmd_hessian(args: HessianArgs) -> Result<(), Error> {
    let x = read_cmat(&args.activations)?;
    let delta = args.delta.unwrap_or_else(|| HessianContext::default_delta(&x));
    let ctx = HessianContext::from_activations(&x, delta)?;
    write_cmat(&args.out, ctx.h())?;
    let meta = HessianMeta {
        schema_version: 1,
        rows: ctx.rows(),
        dim: ctx.dim(),
        delta: ctx.delta(),
        lambda_max: ctx.lambda_max(),
        lambda_min: ctx.lambda_min(),
    };
    let meta_path = args
        .out_meta
        .unwrap_or_else(|| args.out.with_extension("json"));
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap())?;
    println!(
        "wrote hessian ({}x{}, m={}, delta={:e}) to {} + {}",
        ctx.dim(),
        ctx.dim(),
        ctx.rows(),
        ctx.delta(),
        args.out.display(),
        meta_path.display()
    );
    Ok(())
}

fn load_context(
    hessian: &Option<PathBuf>,
    hessian_meta: &Option<PathBuf>,
    activations: &Option<PathBuf>,
    delta: Option<f64>,
) -> Result<HessianContext, Error> {
    match (hessian, activations) {
        (Some(h_path), None) => {
            let h = read_cmat(h_path)?;
            let meta_path = hessian_meta
                .clone()
                .unwrap_or_else(|| h_path.with_extension("json"));
            let meta: HessianMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)
                .map_err(|e| Error::Format {
                    offset: 0,
                    reason: format!("{}: {e}", meta_path.display()),
                })?;
            HessianContext::from_hessian(&h, meta.rows, meta.delta)
        }
        (None, Some(x_path)) => {
            let x = read_cmat(x_path)?;
            let delta = delta.unwrap_or_else(|| HessianContext::default_delta(&x));
            HessianContext::from_activations(&x, delta)
        }
        _ => Err(Error::domain(
            "provide exactly one of --hessian or --activations",
        )),
    }
}

fn load_config(path: &Option<PathBuf>, ov: &ConfigOverrides) -> Result<DecompositionConfig, Error> {
    let mut cfg: DecompositionConfig = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Format {
            offset: 0,
            reason: format!("{}: {e}", p.display()),
        })?,
        None => DecompositionConfig::default(),
    };
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = ov.k {
        cfg.k = v;
    }
    if let Some(v) = ov.b_q {
        cfg.b_q = v;
    }
    if let Some(v) = ov.b_l {
        cfg.b_l = v;
    }
    if let Some(v) = ov.b_r {
        cfg.b_r = v;
    }
    if let Some(v) = ov.t_out {
        cfg.t_out = v;
    }
    if let Some(v) = ov.t_in {
        cfg.t_in = v;
    }
    if ov.rht {
        cfg.use_rht = true;
    }
    if ov.hessian_update {
        cfg.use_hessian_update = true;
    }
    if let Some(order) = ov.update_order {
        cfg.update_order = match order {
            OrderArg::QFirst => UpdateOrder::QFirst,
            OrderArg::LrFirst => UpdateOrder::LrFirst,
        };
    }
    if ov.strict_fallback {
        cfg.strict_fallback = true;
    }
    Ok(cfg)
}

fn run_report(
    w: &Matrix,
    ctx: &HessianContext,
    cfg: &DecompositionConfig,
    res: &caldera_core::CalderaResult,
    keep_timings: bool,
) -> RunReport {
    let bounds = evaluate_bounds(w, ctx, cfg).ok();
    RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        shape: (w.nrows(), w.ncols()),
        best_error: res.best_error,
        error_trace: res.error_trace.clone(),
        saturation: res.saturation,
        fallback_events: res.fallback_events,
        bounds,
        timings: if keep_timings {
            res.timings
        } else {
            Default::default()
        },
    }
}

fn cmd_decompose(args: DecomposeArgs) -> Result<(), Error> {
    let w = read_cmat(&args.weights)?;
    let ctx = load_context(&args.hessian, &args.hessian_meta, &args.activations, args.delta)?;
    let cfg = load_config(&args.config, &args.overrides)?;

    let res = caldera_decompose(&w, &ctx, &cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_cmat(args.out_dir.join("q.cmat"), &res.q)?;
    write_cmat(args.out_dir.join("l.cmat"), &res.l)?;
    write_cmat(args.out_dir.join("r.cmat"), &res.r)?;
    if let Some(rht) = &res.rht {
        std::fs::write(
            args.out_dir.join("rht.json"),
            serde_json::to_string_pretty(rht).unwrap(),
        )?;
    }
    let report = run_report(&w, &ctx, &cfg, &res, args.timings);
    std::fs::write(args.out_dir.join("report.json"), report.to_json())?;
    println!(
        "best error {:.6e} after {} rounds; outputs in {}",
        res.best_error,
        res.error_trace.len(),
        args.out_dir.display()
    );
    Ok(())
}

#[derive(Debug)]
struct SweepRow {
    k: usize,
    b_q: u32,
    b_l: u32,
    b_r: u32,
    seed: u64,
    best_error: f64,
    quip_trace_bound: f64,
    caldera_bound_exact: f64,
    caldera_bound_mp: f64,
    sat_backbone: usize,
    sat_left: usize,
    sat_right: usize,
    fallback_events: usize,
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let w = read_cmat(&args.weights)?;
    let ctx = load_context(&args.hessian, &args.hessian_meta, &args.activations, args.delta)?;
    let grid: SweepGrid =
        serde_json::from_str(&std::fs::read_to_string(&args.grid)?).map_err(|e| Error::Format {
            offset: 0,
            reason: format!("{}: {e}", args.grid.display()),
        })?;
    if grid.k.is_empty() || grid.b_q.is_empty() || grid.b_l.is_empty() || grid.b_r.is_empty() || grid.seeds.is_empty()
    {
        return Err(Error::domain("sweep grid must list k, b_q, b_l, b_r, seeds"));
    }

    let mut cells = Vec::new();
    for &k in &grid.k {
        for &b_q in &grid.b_q {
            for &b_l in &grid.b_l {
                for &b_r in &grid.b_r {
                    for &seed in &grid.seeds {
                        cells.push((k, b_q, b_l, b_r, seed));
                    }
                }
            }
        }
    }

    let run_cell = |&(k, b_q, b_l, b_r, seed): &(usize, u32, u32, u32, u64)| -> Result<SweepRow, Error> {
        let cfg = DecompositionConfig {
            k,
            b_q,
            b_l,
            b_r,
            seed,
            t_out: grid.t_out.unwrap_or(DecompositionConfig::default().t_out),
            t_in: grid.t_in.unwrap_or(DecompositionConfig::default().t_in),
            ..DecompositionConfig::default()
        };
        let res = caldera_decompose(&w, &ctx, &cfg)?;
        let bounds = evaluate_bounds(&w, &ctx, &cfg)?;
        Ok(SweepRow {
            k,
            b_q,
            b_l,
            b_r,
            seed,
            best_error: res.best_error,
            quip_trace_bound: bounds.quip_trace_bound,
            caldera_bound_exact: bounds.caldera_bound_exact,
            caldera_bound_mp: bounds.caldera_bound_mp,
            sat_backbone: res.saturation.backbone,
            sat_left: res.saturation.factor_left,
            sat_right: res.saturation.factor_right,
            fallback_events: res.fallback_events,
        })
    };

    let mut rows: Vec<SweepRow> = if args.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            cells.par_iter().map(run_cell).collect::<Result<Vec<_>, _>>()
        })?
    } else {
        cells.iter().map(run_cell).collect::<Result<Vec<_>, _>>()?
    };

    rows.sort_by_key(|r| (r.k, r.b_q, r.b_l, r.b_r, r.seed));

    let mut writer = csv::Writer::from_path(&args.out).map_err(csv_err)?;
    writer
        .write_record([
            "k",
            "b_q",
            "b_l",
            "b_r",
            "seed",
            "best_error",
            "quip_trace_bound",
            "caldera_bound_exact",
            "caldera_bound_mp",
            "sat_backbone",
            "sat_left",
            "sat_right",
            "fallback_events",
        ])
        .map_err(csv_err)?;
    for r in &rows {
        writer
            .write_record([
                r.k.to_string(),
                r.b_q.to_string(),
                r.b_l.to_string(),
                r.b_r.to_string(),
                r.seed.to_string(),
                format!("{:?}", r.best_error),
                format!("{:?}", r.quip_trace_bound),
                format!("{:?}", r.caldera_bound_exact),
                format!("{:?}", r.caldera_bound_mp),
                r.sat_backbone.to_string(),
                r.sat_left.to_string(),
                r.sat_right.to_string(),
                r.fallback_events.to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format {
        offset: 0,
        reason: format!("csv: {e}"),
    }
}
