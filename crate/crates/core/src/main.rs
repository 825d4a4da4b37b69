use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fasuav::cli::{parse_config, run, Command};
use fasuav::Error;

#[derive(Debug, Parser)]
#[command(name = "fasuav", version, about = "Short-packet BLER analysis and energy-efficiency optimization for UAV relaying to fluid-antenna receivers")]
struct Args {
    /// Experiment to run.
    #[arg(value_parser = command_name)]
    command: Command,
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; a `.meta` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

fn command_name(s: &str) -> Result<Command, String> {
    Command::from_name(s).ok_or_else(|| {
        let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn execute(args: Args) -> Result<(), Error> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&args.config).map_err(|source| Error::Io {
        path: args.config.clone(),
        source,
    })?;
    let had_command = text
        .lines()
        .any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("command"));
    let mut spec = parse_config(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", args.config.display())))?;
    if had_command && spec.command != args.command {
        return Err(Error::InvalidConfig(format!(
            "{} declares command `{}` but `{}` was requested",
            args.config.display(),
            spec.command.name(),
            args.command.name()
        )));
    }
    spec.command = args.command;
    if spec.command == Command::Validate || args.seed.is_some() {
        let mc = spec.mc.get_or_insert_with(Default::default);
        if let Some(seed) = args.seed {
            mc.seed = seed;
        }
    }
    if let Some(out) = args.out {
        spec.output_path = Some(out);
    }
    let report = run(&spec)?;
    eprintln!(
        "wrote {} rows to {} ({})",
        report.rows,
        report.csv_path.display(),
        report.meta_path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
