use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use priorseg_cli::{cmd_bench, cmd_moments, cmd_segment, Options};

#[derive(Parser, Debug)]
#[command(
    name = "priorseg",
    version,
    about = "Level-set segmentation with noise and shape priors"
)]
struct Args {
    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    /// More logging; repeat for trace level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Log every k-th outer iteration (0 disables).
    #[arg(long, global = true, default_value_t = 10)]
    trace_every: usize,

    /// Record wall-clock milliseconds in trace.csv (makes it non-reproducible).
    #[arg(long, global = true)]
    timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment one image or phantom described by a config file.
    Segment { config: PathBuf },
    /// Print or save the Legendre moment vector of a binary mask.
    Moments {
        mask: PathBuf,
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a matrix of segmentations.
    Bench {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet {
        log::LevelFilter::Error
    } else {
        match args.verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    let opts = Options {
        trace_every: args.trace_every,
        timings: args.timings,
    };
    let code = match &args.command {
        Command::Segment { config } => cmd_segment(config, &opts),
        Command::Moments {
            mask,
            order,
            output,
        } => cmd_moments(mask, *order, output.as_ref()),
        Command::Bench { config, jobs } => cmd_bench(config, *jobs, &opts),
    };
    ExitCode::from(code as u8)
}
