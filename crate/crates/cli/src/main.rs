use std::path::PathBuf;
use std::process::ExitCode;

use aqml_cli::{env_output_root, list_experiments, run, validate};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aqml",
    version,
    about = "Run analog quantum machine learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and run an experiment config.
    Run {
        config: PathBuf,
        /// Root for relative output directories; overrides AQML_OUTPUT_ROOT.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List the experiment names accepted in configs.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output_root,
        } => {
            let root = output_root.or_else(env_output_root);
            run(&config, root.as_deref()).map(|o| {
                print!("{}", o.summary);
                println!(
                    "wrote {} files to {} in {:.1}s",
                    o.manifest.outputs.len() + 1,
                    o.output_dir.display(),
                    o.manifest.wall_time_s
                );
            })
        }
        Command::Validate { config } => validate(&config).map(|r| print!("{}", r.render())),
        Command::ListExperiments => {
            print!("{}", list_experiments());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
