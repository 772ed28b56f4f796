use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qprecond::encoding::{self, DiscretizationGrid};
use qprecond::harness::{self, BatteryConfig, BatteryReport, Format, HarnessError, Mode};
use qprecond::objectives;

#[derive(Parser)]
#[command(name = "qprecond", version, about = "Quantum-preconditioned global optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trial battery and write the report.
    Run(RunArgs),
    /// Exhaustively scan the discretized objective and print its lowest grid points.
    Scan {
        #[arg(long, default_value = "himmelblau")]
        objective: String,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(long, default_value_t = 5)]
        qubits: usize,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<String>,
    /// Comma-separated list or inclusive range such as `2-10`.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// Comma-separated quantum evaluation budgets.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    /// `hybrid`, `classical` or `both`.
    #[arg(long)]
    mode: Option<String>,
    /// Classical baseline swarm size.
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    hybrid_particles: Option<usize>,
    #[arg(long)]
    pso_iterations: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta_base: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; the summary goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_list(s: &str) -> Result<Vec<usize>, HarnessError> {
    let bad = || HarnessError::Config(format!("cannot parse list {s:?}"));
    if let Some((a, b)) = s.split_once('-') {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn build_config(args: &RunArgs) -> Result<BatteryConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(p) => BatteryConfig::load(p)?,
        None => BatteryConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = args.$field.clone() { cfg.$field = v; } )* };
    }
    set!(objective, qubits, layers, trials, batches, particles, hybrid_particles, pso_iterations, beta, delta_base, gamma, alpha, shots, seed, jobs);
    if let Some(d) = &args.dims {
        cfg.dims = parse_list(d)?;
    }
    if let Some(b) = &args.budget {
        cfg.budgets = parse_list(b)?;
    }
    if let Some(m) = &args.mode {
        cfg.modes = match m.as_str() {
            "both" => vec![Mode::Hybrid, Mode::Classical],
            other => vec![other.parse()?],
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &BatteryReport) {
    for c in &report.cells {
        let median = c.median_bfgs_correct().map_or("-".to_string(), |m| format!("{m:.1}"));
        let volume = c.volume.as_ref().map_or(String::new(), |v| {
            format!(" v_pre={:.4e} reduction={:.4e} minima_pre={:?}", v.v_pre, v.reduction, v.minima_pre)
        });
        println!(
            "{:<9} {} D={:<2} budget={:<6} correct={}/{} bfgs_median={}{}",
            c.mode.as_str(),
            c.objective,
            c.dims,
            c.budget,
            c.n_correct,
            c.trials,
            median,
            volume
        );
    }
}

fn run(args: RunArgs) -> Result<(), HarnessError> {
    let format: Format = args.format.parse()?;
    let cfg = build_config(&args)?;
    let report = harness::run_battery(&cfg)?;
    match &args.out {
        Some(path) => harness::emit_report(&report, path, format)?,
        None => print_summary(&report),
    }
    Ok(())
}

fn scan(objective: &str, dims: usize, qubits: usize, top: usize) -> Result<(), HarnessError> {
    let cfg_err = |e: &dyn std::fmt::Display| HarnessError::Config(e.to_string());
    let obj = objectives::by_name(objective, dims).map_err(|e| cfg_err(&e))?;
    let grids = obj
        .bounds()
        .iter()
        .map(|&(lo, hi)| DiscretizationGrid::new(lo, hi, qubits))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| cfg_err(&e))?;
    let h = encoding::build_diagonal(&obj, grids).map_err(|e| cfg_err(&e))?;
    let mut points: Vec<(f64, u64)> = (0..1u64 << h.width()).map(|b| (h.energy(b), b)).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (e, b) in points.into_iter().take(top) {
        println!("{}", json!({ "index": b, "x": h.coordinates(b), "energy": e }));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Scan { objective, dims, qubits, top } => scan(&objective, dims, qubits, top),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::from(if matches!(e, HarnessError::Config(_)) { 2 } else { 1 })
        }
    }
}
