use clap::{Args, Parser, Subcommand, ValueEnum};
use cohpath_cli::config::Task;
use cohpath_cli::emit::Format;
use cohpath_cli::failure::{Failure, EXIT_SCHEMA};
use cohpath_cli::Invocation;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "cohpath", version, about = "Coherent-state path integrals for open quantum systems")]
struct Cli {
    #[command(subcommand)]
    task: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in identity and oracle suites and print a pass/fail table.
    Verify(Common),
    /// Reduced partition function Z_S over the size ladder.
    Partition(Common),
    /// System two-point functions on contour points.
    Correlator(Common),
    /// Coupling energy and bath currents on the Keldysh contour.
    Current(Common),
    /// Dressed environment Green's function of one bath mode.
    Green(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    JsonLines,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (optional for verify).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; inferred from the extension of --out otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            print!("{e}");
            return;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", Failure::new(EXIT_SCHEMA, "cli", msg.trim()).to_json());
            std::process::exit(EXIT_SCHEMA);
        }
    };
    let (task, c) = match cli.task {
        Command::Verify(c) => (Task::Verify, c),
        Command::Partition(c) => (Task::Partition, c),
        Command::Correlator(c) => (Task::Correlator, c),
        Command::Current(c) => (Task::Current, c),
        Command::Green(c) => (Task::Green, c),
    };
    let inv = Invocation {
        config: c.config,
        out: c.out,
        format: c.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::JsonLines => Format::JsonLines,
        }),
        threads: c.threads,
    };
    std::process::exit(cohpath_cli::run(task, &inv));
}
