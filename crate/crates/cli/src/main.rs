use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chargesite_core::demand::ChargeClass;
use chargesite_core::io::{
    load_case, read_plan, write_json, write_operations_csv, write_plan, write_stations_csv, write_summary_csv,
    write_sweep_csv, SummaryRow,
};
use chargesite_core::planner::{evaluate_plan, search_settings, solve, sweep, verify_plan, CaseInputs, Variant};
use chargesite_core::sim::{validation_grid, write_grid_csv, SimMode};
use chargesite_core::CoreError;
use clap::{Args, Parser, Subcommand};

const THREADS_ENV: &str = "CHARGESITE_THREADS";

#[derive(Parser)]
#[command(name = "chargesite", version, about = "Fast-charging station siting and sizing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the planning model for a case bundle.
    Plan {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Plan JSON output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stations_csv: Option<PathBuf>,
        #[arg(long)]
        operations_csv: Option<PathBuf>,
        /// Print branch-and-bound progress to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Re-solve operations with a plan's investment decisions fixed.
    Evaluate {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        operations_csv: Option<PathBuf>,
    },
    /// Plan the base case and its sharing, traffic and range variants.
    Sweep {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Comparison table CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo validation of station sizing.
    Simulate {
        /// Service levels to size for, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.8")]
        alpha: Vec<f64>,
        /// Total arrival rates per hour, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "100")]
        lambda: Vec<f64>,
        /// Class charging durations in hours; classes share the rate equally.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        durations: Vec<f64>,
        /// Use this spot count instead of the sizing rule.
        #[arg(long)]
        spots: Option<u64>,
        #[arg(long, default_value = "fifo")]
        mode: SimMode,
        #[arg(long, default_value_t = 1000.0)]
        horizon_hours: f64,
        #[arg(long, default_value_t = 20)]
        replications: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize plan files into one comparison table.
    Report {
        /// Plan JSON files; each row is labelled by file stem.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Overrides applied on top of the case's own options.
#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    speed_kmh: Option<f64>,
    #[arg(long, overrides_with = "no_share")]
    share: bool,
    #[arg(long, overrides_with = "share")]
    no_share: bool,
}

impl RunFlags {
    fn apply(&self, case: &mut CaseInputs) -> Result<(), CoreError> {
        let o = &mut case.options;
        if let Some(a) = self.alpha {
            o.alpha = a;
        }
        if let Some(g) = self.gap {
            o.rel_gap = g;
        }
        if let Some(s) = self.seed {
            o.seed = s;
        }
        if let Some(v) = self.speed_kmh {
            o.speed_kmh = v;
        }
        if self.share {
            o.share_choices = true;
        }
        if self.no_share {
            o.share_choices = false;
        }
        case.validate()
    }
}

fn load(case: &Path, run: &RunFlags) -> anyhow::Result<CaseInputs> {
    let mut c = load_case(case)?;
    run.apply(&mut c)?;
    Ok(c)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CoreError::Io { path: path.display().to_string(), source: e })?))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Plan { case, run, out, stations_csv, operations_csv, verbose } => {
            let inst = load(&case, &run)?.instance()?;
            let mut settings = search_settings(&inst);
            settings.verbose = verbose;
            let outcome = solve(&inst, Some(settings))?;
            let violations = verify_plan(&inst, &outcome.plan);
            if !violations.is_empty() {
                return Err(CoreError::Solver(format!("returned plan fails checks: {}", violations.join("; "))).into());
            }
            write_plan(&out, &outcome.plan)?;
            if let Some(p) = stations_csv {
                write_stations_csv(create(&p)?, &outcome.plan)?;
            }
            if let Some(p) = operations_csv {
                write_operations_csv(create(&p)?, &outcome.plan.operations)?;
            }
            let p = &outcome.plan;
            println!(
                "stations {} spots {} total {:.6} M$/yr gap {:.2e} nodes {}",
                p.built_stations(),
                p.total_spots_int(),
                p.costs.total,
                p.solver.as_ref().map(|s| s.gap).unwrap_or(0.0),
                outcome.nodes
            );
        }
        Command::Evaluate { case, plan, run, out, operations_csv } => {
            let inst = load(&case, &run)?.instance()?;
            let plan = read_plan(&plan)?;
            let report = evaluate_plan(&inst, &plan)?;
            write_json(&out, &report)?;
            if let Some(p) = operations_csv {
                write_operations_csv(create(&p)?, &report.operations)?;
            }
            println!(
                "total {:.6} M$/yr unsatisfied {:.4} losses {:.3} MWh/yr",
                report.costs.total, report.unsatisfied_ratio, report.expected_losses_mwh
            );
        }
        Command::Sweep { case, run, out } => {
            let case = load(&case, &run)?;
            let rows = sweep(&case, &Variant::standard_grid())?;
            write_sweep_csv(create(&out)?, &rows)?;
            for r in &rows {
                println!("{:<16} stations {:>3} spots {:>5} total {:.6}", r.label, r.stations, r.spots_int, r.total);
            }
        }
        Command::Simulate { alpha, lambda, durations, spots, mode, horizon_hours, replications, seed, out } => {
            let shape: Vec<ChargeClass> = durations.iter().map(|&t| ChargeClass::new(t, 1.0)).collect();
            let cells = validation_grid(&shape, &alpha, &lambda, spots, mode, horizon_hours, replications, seed)?;
            write_grid_csv(create(&out)?, &cells)?;
            for c in &cells {
                println!(
                    "alpha {:.2} lambda {:>6.1} spots {:>4} service {:.4} ± {:.4}",
                    c.alpha, c.lambda_per_h, c.spots, c.service_level, c.service_half_width
                );
            }
        }
        Command::Report { inputs, out } => {
            let mut rows = Vec::with_capacity(inputs.len());
            for p in &inputs {
                let plan = read_plan(p)?;
                let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                rows.push(SummaryRow::from_plan(&label, &plan));
            }
            write_summary_csv(create(&out)?, &rows)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<CoreError>().map(|e| e.exit_code() as u8).unwrap_or(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads = v.parse::<usize>().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"));
        match threads {
            Ok(n) => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
