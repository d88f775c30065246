//! ddahash — train, encode, index, retrieve, and evaluate binary image
//! codes from the command line.
//!
//! Every text output starts with a `#`-prefixed fingerprint header naming
//! the tool and the full configuration (no timestamps), so a rerun with
//! the same flags and seed produces byte-identical files. Timing
//! measurements go to sidecar files (`<out>.latency`, `<out>.time`) and
//! to the diagnostic stream, never into the primary outputs.

mod common;
mod data_cmds;
mod model_cmds;
mod query_cmds;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ddahash",
    version,
    about = "Binary image codes: autoencoder hashing, Radon barcodes, Hamming retrieval"
)]
struct Cli {
    /// Seed for every random draw in the run (recorded in all outputs).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads for parallel sections; 1 keeps everything on one
    /// core, which is what latency measurements should use.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset of shape images.
    Synth(data_cmds::SynthArgs),
    /// Compute Radon projections, optionally with Radon barcodes.
    Radon(data_cmds::RadonArgs),
    /// Train an autoencoder hasher on images or projections.
    Train(model_cmds::TrainArgs),
    /// Encode images or projections into binary codes with a trained model.
    Encode(model_cmds::EncodeArgs),
    /// Build the 16-bit hash index and report bucket statistics.
    Index(data_cmds::IndexArgs),
    /// First-hit retrieval under a chosen strategy.
    Retrieve(query_cmds::RetrieveArgs),
    /// Score retrieval results with the hierarchical IRMA error.
    Evaluate(query_cmds::EvaluateArgs),
    /// Time retrieval strategies over repeated runs.
    Bench(query_cmds::BenchArgs),
}

fn run(cli: &Cli) -> ddahash::Result<()> {
    match &cli.command {
        Command::Synth(args) => data_cmds::synth(cli.seed, cli.threads, args),
        Command::Radon(args) => data_cmds::radon(cli.seed, cli.threads, args),
        Command::Train(args) => model_cmds::train(cli.seed, cli.threads, args),
        Command::Encode(args) => model_cmds::encode(cli.seed, cli.threads, args),
        Command::Index(args) => data_cmds::index(cli.seed, cli.threads, args),
        Command::Retrieve(args) => query_cmds::retrieve(cli.seed, cli.threads, args),
        Command::Evaluate(args) => query_cmds::evaluate(cli.seed, cli.threads, args),
        Command::Bench(args) => query_cmds::bench(cli.seed, cli.threads, args),
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return std::process::ExitCode::FAILURE;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!(
            "error: cannot configure {} worker threads: {e}",
            cli.threads
        );
        return std::process::ExitCode::FAILURE;
    }
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
