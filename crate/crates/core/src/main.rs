use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use roadfuzz::cli::{cmd_replay, cmd_report, cmd_run, cmd_seed_generate, CliError};
use roadfuzz::network::DEMO_TOWN;

#[derive(Parser)]
#[command(
    name = "roadfuzz",
    version,
    about = "Search-based scenario testing for driving agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate single-ego seed scenarios on a bundled map.
    SeedGenerate {
        #[arg(long, default_value_t = 10)]
        num: usize,
        #[arg(long, default_value = DEMO_TOWN)]
        town: String,
        #[arg(long, default_value_t = 50.0)]
        min_length: f64,
        #[arg(long, default_value_t = 200.0)]
        max_length: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "seeds")]
        out: PathBuf,
    },
    /// Run a search from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a trace as SVG frames plus a summary frame.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        stride: u64,
    },
    /// Summarize a run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

// Closed stdout (e.g. piped into `head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::SeedGenerate {
            num,
            town,
            min_length,
            max_length,
            seed,
            out,
        } => {
            for (_, line) in cmd_seed_generate(num, &town, min_length, max_length, seed, &out)? {
                say!("{line}");
            }
        }
        Command::Run { config } => {
            let done = cmd_run(&config, true)?;
            say!(
                "run directory: {} ({} executed, {} violating)",
                done.run_dir.display(),
                done.report.executions(),
                done.report.violating.len()
            );
        }
        Command::Replay { trace, out, stride } => {
            let files = cmd_replay(&trace, &out, stride)?;
            say!("wrote {} frames and a summary to {}", files.len() - 1, out.display());
        }
        Command::Report { run_dir } => {
            say!("{}", cmd_report(&run_dir)?.text.trim_end());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
