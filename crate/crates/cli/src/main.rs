//! `hankel`: command-line laboratory for the direct and inverse spectral maps.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    ApArgs, ArcArgs, Context, DiagnoseArgs, DirectArgs, FlowArgs, InverseArgs, KappaArgs, Outcome, RoundtripArgs,
    StabilityArgs,
};
use output::{render_error, write_file, CliError};

#[derive(Parser, Debug)]
#[command(name = "hankel", version, about = "Spectral maps of anti-linear Hankel operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write `(series, x, y)` CSV rows for plotting.
    #[arg(long, global = true)]
    emit_plot_data: Option<PathBuf>,
    /// Worker threads for ladders and sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Symbol to spectral datum.
    Direct(DirectArgs),
    /// Spectral datum to symbol.
    Inverse(InverseArgs),
    /// Inverse and forward maps composed.
    Roundtrip(RoundtripArgs),
    /// Decay of powers of the model contraction.
    Stability(StabilityArgs),
    /// Defect case, unitarity of W and the spectral-type probe.
    Diagnose(DiagnoseArgs),
    /// Density governing the two-projection arc.
    Kappa(KappaArgs),
    /// Eigenphases of the sign-data product against the predicted arc.
    ArcExperiment(ArcArgs),
    /// Cubic Szegő flow on spectral data and on Fourier coefficients.
    Flow(FlowArgs),
    /// Time averages of the squared Fourier transform of the pushforward measure.
    Apcheck(ApArgs),
}

fn dispatch(command: &Command, ctx: &mut Context) -> Result<Outcome, CliError> {
    match command {
        Command::Direct(a) => commands::direct(a, ctx),
        Command::Inverse(a) => commands::inverse(a, ctx),
        Command::Roundtrip(a) => commands::roundtrip_cmd(a, ctx),
        Command::Stability(a) => commands::stability(a, ctx),
        Command::Diagnose(a) => commands::diagnose_cmd(a, ctx),
        Command::Kappa(a) => commands::kappa_cmd(a, ctx),
        Command::ArcExperiment(a) => commands::arc_experiment(a, ctx),
        Command::Flow(a) => commands::flow(a, ctx),
        Command::Apcheck(a) => commands::apcheck(a, ctx),
    }
}

fn run(cli: &Cli, ctx: &mut Context) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::InvalidArgument { name: "--jobs", message: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::InvalidArgument { name: "--jobs", message: e.to_string() })?;
    }
    let outcome = dispatch(&cli.command, ctx)?;
    match &cli.out {
        Some(path) => write_file(path, &outcome.json)?,
        None => print!("{}", outcome.json),
    }
    if let Some(path) = &cli.emit_plot_data {
        write_file(path, &outcome.plot.to_csv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut ctx = Context { seed: cli.seed, provenance: None };
    match run(&cli, &mut ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("hankel: {err}");
            print!("{}", render_error(ctx.provenance.as_ref(), &err));
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
