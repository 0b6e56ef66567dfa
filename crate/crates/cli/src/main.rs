mod args;
mod commands;
mod error;
mod manifest;

use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

use args::{expand_config, Cli, Command};
use error::CliError;
use manifest::Manifest;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run(std::env::args().collect()) {
        Ok(()) => 0,
        Err(Exit::Clap(e)) => {
            let _ = e.print();
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            }
        }
        Err(Exit::Cli(e)) => {
            eprintln!("tssn: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

enum Exit {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<CliError> for Exit {
    fn from(e: CliError) -> Self {
        Exit::Cli(e)
    }
}

fn run(argv: Vec<String>) -> Result<(), Exit> {
    let argv = expand_config(argv).map_err(CliError::Usage)?;
    let cli = Cli::try_parse_from(&argv).map_err(Exit::Clap)?;
    if let Command::Rerun { manifest, out } = &cli.command {
        let recorded = Manifest::read(manifest)?;
        if recorded.command == "rerun" {
            return Err(CliError::Data("a manifest cannot record a rerun".into()).into());
        }
        return run(recorded.replay_argv(out.as_deref()));
    }
    let common = common(&cli.command);
    if common.threads > 0 {
        // Fails only if a pool already exists, which then keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global();
    }
    let outcome = commands::execute(&cli.command)?;
    let record = Manifest {
        command: cli.command.name().to_string(),
        argv: manifest::recorded_argv(&argv),
        config: serde_json::to_value(&cli.command).map_err(|e| CliError::Runtime(e.to_string()))?,
        seed: common.seed,
        inputs: manifest::hash_inputs(&outcome.inputs)?,
        artifacts: manifest::hash_artifacts(&common.out, &outcome.artifacts)?,
    };
    let path = record.write(&common.out)?;
    for name in &outcome.artifacts {
        eprintln!("wrote {}", Path::new(&common.out).join(name).display());
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn common(cmd: &Command) -> &args::Common {
    match cmd {
        Command::Ingest { common, .. }
        | Command::Stats { common, .. }
        | Command::Build { common, .. }
        | Command::Walk { common, .. }
        | Command::Embed { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Sweep { common, .. }
        | Command::FitClassifier { common, .. }
        | Command::Recommend { common, .. }
        | Command::Synth { common, .. } => common,
        Command::Rerun { .. } => unreachable!("rerun has no common flags"),
    }
}
