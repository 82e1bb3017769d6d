use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;
mod error;
mod output;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pqscreen", version, about = "Early PD screening from patient-questionnaire data")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "PQSCREEN_JOBS")]
    jobs: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort calibrated to the published group moments.
    Synth(cmd::synth::Args),
    /// Repeated nested cross-validation.
    Cv(cmd::cv::Args),
    /// Fit a model on a full cohort and write an artifact.
    Train(cmd::train::Args),
    /// Score one observation with a model artifact.
    Score(cmd::score::Args),
    /// Permutation importance of a trained forest.
    Importance(cmd::importance::Args),
    /// ANOVA and Tukey-Kramer comparison of cross-validation reports.
    Compare(cmd::compare::Args),
    /// Spearman correlation of features with HY stage.
    Correlate(cmd::correlate::Args),
    /// HTTP scoring service.
    Serve(cmd::serve::Args),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(a) => cmd::synth::run(a),
        Command::Cv(a) => cmd::cv::run(a),
        Command::Train(a) => cmd::train::run(a),
        Command::Score(a) => cmd::score::run(a),
        Command::Importance(a) => cmd::importance::run(a),
        Command::Compare(a) => cmd::compare::run(a),
        Command::Correlate(a) => cmd::correlate::run(a),
        Command::Serve(a) => cmd::serve::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion)
                || e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            {
                e.exit();
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage msg={first}");
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} msg={}", e.kind(), e.message().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
