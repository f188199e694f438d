use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smat_cli::{
    cmd_analyze, cmd_eval_offline, cmd_export_plots, cmd_train, init_threads, AnalyzeArgs, CliError, OfflineArgs,
    RunConfig, TrainArgs,
};
use smat_core::curriculum::Preset;
use smat_core::gait::OneEuroParams;

#[derive(Parser)]
#[command(name = "smat", version, about = "Staged human-exoskeleton training and gait analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one stage or the whole plan of a preset.
    Train(TrainCmd),
    /// Run a checkpoint's exo actor on recorded hip kinematics.
    EvalOffline(OfflineCmd),
    /// Torque and power metrics of gait traces.
    Analyze(AnalyzeCmd),
    /// Plot-ready CSVs from a run directory.
    ExportPlots(ExportCmd),
    /// Print or check run configurations.
    Config(ConfigCmd),
}

#[derive(Args)]
struct TrainCmd {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "stage")]
    all: bool,
    #[arg(long)]
    stage: Option<u8>,
    /// full-smat, stage3-only, stage4-only or stage4-no-rexo.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding source-stage checkpoints (defaults to the output directory).
    #[arg(long)]
    source_dir: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct OfflineCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Per-hip torque limit in Nm.
    #[arg(long)]
    torque_limit: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = smat_core::rewards::CONTROL_DT)]
    control_dt: f64,
}

#[derive(Args)]
struct AnalyzeCmd {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Analyze raw torque and velocity without smoothing.
    #[arg(long)]
    no_filter: bool,
    #[arg(long, default_value_t = OneEuroParams::default().min_cutoff)]
    min_cutoff: f64,
    #[arg(long, default_value_t = OneEuroParams::default().beta)]
    beta: f64,
    #[arg(long, default_value_t = OneEuroParams::default().d_cutoff)]
    d_cutoff: f64,
}

#[derive(Args)]
struct ExportCmd {
    run_dir: PathBuf,
    /// Defaults to <run_dir>/plots.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigCmd {
    #[arg(long, conflicts_with = "check")]
    print_defaults: bool,
    /// With --print-defaults, print the small-budget desktop variant.
    #[arg(long, requires = "print_defaults")]
    desk: bool,
    #[arg(long)]
    check: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Train(c) => {
            let cfg = match &c.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            let args = TrainArgs {
                stage: c.stage,
                all: c.all,
                preset: c.preset,
                resume: c.resume,
                output_dir: c.out,
                source_dir: c.source_dir,
                quiet: c.quiet,
            };
            for o in cmd_train(&cfg, &args)? {
                println!(
                    "stage {}: {} steps, {} updates -> {}",
                    o.stage,
                    o.steps,
                    o.updates,
                    o.checkpoint.display()
                );
            }
        }
        Command::EvalOffline(c) => {
            let args = OfflineArgs {
                control_dt: c.control_dt,
                ..OfflineArgs::new(c.checkpoint, c.trace, c.torque_limit, c.out.clone())
            };
            let run = cmd_eval_offline(&args)?;
            for (name, side) in ["right", "left"].iter().zip(&run.sides) {
                match side {
                    Some(a) => println!(
                        "{name}: {} cycles, tau_rms {:.3} Nm, mpp {:.3} W, phase lag {}",
                        a.cycles.len(),
                        a.metrics.tau_rms,
                        a.metrics.mpp,
                        a.phase_lag.map_or("n/a".to_string(), |l| format!("{l:.1} %"))
                    ),
                    None => println!("{name}: no gait cycles found"),
                }
            }
            println!("outputs in {}", c.out.display());
        }
        Command::Analyze(c) => {
            let filter = (!c.no_filter).then_some(OneEuroParams {
                min_cutoff: c.min_cutoff,
                beta: c.beta,
                d_cutoff: c.d_cutoff,
            });
            let reports = cmd_analyze(&AnalyzeArgs {
                traces: c.traces,
                output_dir: c.out.clone(),
                filter,
            })?;
            for r in &reports {
                println!(
                    "{}: tau_rms {:.3} Nm, tau_max {:.3} Nm, mpp {:.3} W, mnp {:.3} W, neg {:.3}",
                    r.name, r.metrics.tau_rms, r.metrics.tau_max, r.metrics.mpp, r.metrics.mnp, r.metrics.neg_fraction
                );
            }
            println!("outputs in {}", c.out.display());
        }
        Command::ExportPlots(c) => {
            let out = c.out.unwrap_or_else(|| c.run_dir.join("plots"));
            let s = cmd_export_plots(&c.run_dir, &out)?;
            for f in &s.files {
                println!("{}", f.display());
            }
        }
        Command::Config(c) => {
            if c.print_defaults {
                let cfg = if c.desk { RunConfig::desk() } else { RunConfig::default() };
                println!("{}", cfg.to_json());
            } else if let Some(p) = c.check {
                RunConfig::load(&p)?;
                println!("{}: ok", p.display());
            } else {
                return Err(CliError::Config("pass --print-defaults or --check FILE".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
