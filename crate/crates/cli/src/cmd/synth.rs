use std::path::PathBuf;

use pqscreen::cohort::{moments_report, synthesize_cohort, write_cohort, GroupMoments, SynthConfig};

use crate::error::CliError;
use crate::output::say;
use crate::output::{path_string, write_csv, write_sidecar, RunConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Healthy-normal subjects.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    normals: u64,
    /// Early-PD subjects.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    pd: u64,
    /// Mean visits per normal subject.
    #[arg(long, default_value_t = 5.06)]
    visits_normal: f64,
    /// Mean visits per PD subject.
    #[arg(long, default_value_t = 9.92)]
    visits_pd: f64,
    #[arg(long)]
    seed: u64,
    /// Cohort CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Achieved-vs-target moments CSV [default: <out stem>.moments.csv].
    #[arg(long)]
    moments_out: Option<PathBuf>,
}

pub fn run(a: Args) -> Result<(), CliError> {
    if !(a.visits_normal >= 1.0 && a.visits_pd >= 1.0) {
        return Err(CliError::Usage("mean visit counts must be at least 1".into()));
    }
    let moments_out = a.moments_out.clone().unwrap_or_else(|| a.out.with_extension("moments.csv"));
    let config = SynthConfig {
        n_normal_subjects: a.normals as usize,
        n_pd_subjects: a.pd as usize,
        visits_normal: a.visits_normal,
        visits_pd: a.visits_pd,
        seed: a.seed,
    };
    let mut run = RunConfig::new("synth")
        .param("normals", a.normals)
        .param("pd", a.pd)
        .param("visits_normal", a.visits_normal)
        .param("visits_pd", a.visits_pd)
        .param("moments", "table2");
    run.seed = Some(a.seed);
    run.outputs = vec![path_string(&a.out), path_string(&moments_out)];

    let moments = GroupMoments::table2();
    let cohort = synthesize_cohort(&moments, &config)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| crate::output::io_error(dir, e))?;
    }
    write_cohort(&cohort, &a.out)?;
    write_sidecar(&a.out, &run)?;
    let rows = moments_report(&cohort, &moments);
    write_csv(&moments_out, &run, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| crate::output::io_error(&moments_out, e))?;
        Ok(())
    })?;
    say!(
        "wrote {} observations ({} subjects) to {}",
        cohort.len(),
        a.normals + a.pd,
        a.out.display()
    );
    Ok(())
}
