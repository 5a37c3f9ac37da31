use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thermolim::harness::config::GridFormat;
use thermolim::harness::{run_sweep, ScenarioConfig, Study};

#[derive(Parser)]
#[command(
    name = "thermolim",
    version,
    about = "Field/atom-ensemble dynamics studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical spin moments against brute force.
    SpinClassical(RunArgs),
    /// Evolved cat state against exact evolution.
    Cat(RunArgs),
    /// Fock superposition against exact evolution.
    Fock(RunArgs),
    /// Wigner grids, visibility and fringe averaging.
    Wigner(RunArgs),
    /// Dyson correction amplitudes against exact evolution.
    DysonScaling(RunArgs),
    /// Krylov and cutoff convergence diagnostics.
    Convergence(RunArgs),
    /// Runs the study named in the config over its sweep axes.
    Sweep(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    WignerBin,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Format of Wigner grid files.
    #[arg(long, value_enum)]
    emit: Option<Emit>,
}

fn run(study: Option<Study>, args: RunArgs) -> thermolim::Result<ExitCode> {
    let mut config = ScenarioConfig::from_file(&args.config)?;
    if let Some(s) = study {
        if !config.sweep.values().all(Vec::is_empty) {
            return Err(thermolim::Error::Config {
                field: "sweep".into(),
                reason: format!(
                    "config declares sweep axes; run `thermolim sweep --config {}`",
                    args.config.display()
                ),
            });
        }
        config.study = Some(s);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(emit) = args.emit {
        config.grid.format = match emit {
            Emit::Csv => GridFormat::Csv,
            Emit::WignerBin => GridFormat::WignerBin,
        };
    }
    let out = args.out.or_else(|| config.output.clone());
    let result = run_sweep(&config, out.as_deref(), args.workers)?;
    for p in &result.points {
        let axes: Vec<String> = p.axes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let label = if axes.is_empty() {
            "run".to_string()
        } else {
            axes.join(" ")
        };
        match &p.outcome {
            Ok(r) if r.flags.is_empty() => eprintln!("{label}: ok"),
            Ok(r) => eprintln!("{label}: flagged [{}]", r.flags.join(", ")),
            Err(e) => eprintln!("{label}: failed: {e}"),
        }
    }
    for f in &result.fits {
        eprintln!(
            "fit {} vs N: exponent {:.4} ± {:.4}",
            f.key, f.fit.exponent, f.fit.exponent_stderr
        );
    }
    if out.is_none() {
        print!("{}", result.aggregate_csv);
    }
    Ok(if result.partial {
        ExitCode::FAILURE
    } else if result.converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (study, args) = match cli.command {
        Command::SpinClassical(a) => (Some(Study::SpinClassical), a),
        Command::Cat(a) => (Some(Study::Cat), a),
        Command::Fock(a) => (Some(Study::Fock), a),
        Command::Wigner(a) => (Some(Study::Wigner), a),
        Command::DysonScaling(a) => (Some(Study::DysonScaling), a),
        Command::Convergence(a) => (Some(Study::Convergence), a),
        Command::Sweep(a) => (None, a),
    };
    match run(study, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
