use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ebigame::emit::{emit, Format};
use ebigame::run::{run, with_seed};
use ebigame::scenario::{parse_scenario, parse_str, Scenario, ScenarioError};
use ebigame::{exit, DEMO_SCENARIO};

#[derive(Parser)]
#[command(name = "ebigame", version, about = "Batch runs of the equity-incentive game lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report.
    Run {
        /// Scenario file (TOML)
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        /// Scenario file (TOML)
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the bundled demo scenario.
    Demo {
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory, created if missing
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace the scenario seed
    #[arg(long)]
    seed_override: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(exit::INVALID as u8);
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    ExitCode::from(dispatch(cli.command) as u8)
}

fn dispatch(command: Command) -> i32 {
    match command {
        Command::Validate { scenario } => match parse_scenario(&scenario) {
            Ok(s) => {
                println!("{}: ok ({} block(s))", scenario.display(), block_count(&s));
                exit::OK
            }
            Err(e) => report_invalid(&e),
        },
        Command::Run { scenario, output } => match parse_scenario(&scenario) {
            Ok(s) => execute(&s, &output),
            Err(e) => report_invalid(&e),
        },
        Command::Demo { output } => match parse_str(DEMO_SCENARIO, "demo.toml") {
            Ok(s) => execute(&s, &output),
            Err(e) => report_invalid(&e),
        },
    }
}

fn block_count(s: &Scenario) -> usize {
    [s.stage1.is_some(), s.stage2.is_some(), s.coalition.is_some(), s.equilibrium.is_some(), s.prodfn.is_some()]
        .iter()
        .filter(|&&b| b)
        .count()
}

fn report_invalid(e: &ScenarioError) -> i32 {
    eprintln!("error: {e}");
    exit::INVALID
}

fn execute(scenario: &Scenario, output: &OutputArgs) -> i32 {
    let scenario = with_seed(scenario, output.seed_override);
    if let Err(errors) = check(&scenario) {
        return report_invalid(&errors);
    }
    let report = match run(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::NUMERICAL;
        }
    };
    eprintln!("wall time: {:.3} s", report.wall_time.as_secs_f64());
    match emit(&report, output.format, &output.out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            exit::OK
        }
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", output.out.display());
            exit::NUMERICAL
        }
    }
}

/// Re-validates after a seed override.
fn check(s: &Scenario) -> Result<(), ScenarioError> {
    let errors = s.validate();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ScenarioError::Invalid(errors))
    }
}
