use std::path::PathBuf;

use pqscreen::eval::baseline::write_correlations_csv;
use pqscreen::eval::correlation_with_hy;

use crate::error::CliError;
use crate::output::say;
use crate::output::{load_cohort, path_string, write_csv, RunConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Cohort CSV with an HY column.
    #[arg(long)]
    data: PathBuf,
    /// Correlation table CSV.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: Args) -> Result<(), CliError> {
    let cohort = load_cohort(&a.data)?;
    let rows = correlation_with_hy(&cohort)?;
    let mut run = RunConfig::new("correlate");
    run.inputs = vec![path_string(&a.data)];
    run.outputs = vec![path_string(&a.out)];
    write_csv(&a.out, &run, |buf| Ok(write_correlations_csv(&rows, buf)?))?;
    say!("{:<10} {:>6} {:>8} {:>10}", "variable", "n", "rho", "p");
    for r in &rows {
        say!("{:<10} {:>6} {:>8.4} {:>10.3e}", r.variable, r.n, r.rho, r.p_value);
    }
    Ok(())
}
