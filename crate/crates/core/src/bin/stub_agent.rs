//! Reference external agent: serves a built-in agent over the line protocol.
//!
//! ```text
//! roadfuzz-stub-agent [--agent builtin:safe_follower] [--mode normal|crash-at=N|hang-at=N|garbage|silent]
//! ```

use clap::Parser;
use roadfuzz::agents::{serve_stdio, StubMode};

#[derive(Parser)]
#[command(version, about = "Built-in agent behind the external agent protocol")]
struct Args {
    #[arg(long, default_value = "builtin:safe_follower")]
    agent: String,
    #[arg(long, default_value = "normal")]
    mode: StubMode,
}

fn main() {
    let args = Args::parse();
    if let Err(e) = serve_stdio(&args.agent, args.mode) {
        eprintln!("stub agent: {e}");
        std::process::exit(2);
    }
}
