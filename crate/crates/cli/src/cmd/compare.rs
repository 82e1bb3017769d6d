use std::path::PathBuf;

use pqscreen::eval::compare::{write_pairwise_csv, write_summary_csv};
use pqscreen::eval::{compare_classifiers, Metric};

use crate::cmd::cv::read_report;
use crate::error::CliError;
use crate::output::say;
use crate::output::{path_string, write_csv, RunConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Report files written by `cv`.
    #[arg(long, num_args = 2.., required = true)]
    reports: Vec<PathBuf>,
    /// accuracy, sensitivity, specificity, auc or all.
    #[arg(long, default_value = "all")]
    metric: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Summary table CSV.
    #[arg(long)]
    out: PathBuf,
    /// Pairwise Tukey-Kramer CSV [default: <out stem>.pairwise.csv].
    #[arg(long)]
    pairwise_out: Option<PathBuf>,
}

pub fn run(a: Args) -> Result<(), CliError> {
    let metrics: Vec<Metric> = if a.metric == "all" {
        Metric::ALL.to_vec()
    } else {
        a.metric
            .split(',')
            .map(|s| s.trim().parse().map_err(|e: pqscreen::Error| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    let pairwise_out = a.pairwise_out.clone().unwrap_or_else(|| a.out.with_extension("pairwise.csv"));
    let reports = a.reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>, _>>()?;
    let comparisons = metrics
        .iter()
        .map(|&m| compare_classifiers(&reports, m, a.alpha))
        .collect::<Result<Vec<_>, _>>()?;

    let mut run = RunConfig::new("compare")
        .param("alpha", a.alpha)
        .param("metrics", metrics.iter().map(|m| m.name()).collect::<Vec<_>>());
    run.inputs = a.reports.iter().map(|p| path_string(p)).collect();
    run.outputs = vec![path_string(&a.out), path_string(&pairwise_out)];
    run.scheme = Some(reports[0].config.scheme.name().into());
    write_csv(&a.out, &run, |buf| Ok(write_summary_csv(&reports, &comparisons, buf)?))?;
    write_csv(&pairwise_out, &run, |buf| Ok(write_pairwise_csv(&comparisons, buf)?))?;

    for c in &comparisons {
        say!("{}: ANOVA F={:.4} p={:.4e}", c.metric.name(), c.anova_f, c.anova_p);
        for (i, m) in c.methods.iter().enumerate() {
            let mark = if i == c.best {
                "best"
            } else if m.in_best_set {
                "~"
            } else {
                ""
            };
            say!("  {:<20} {:.4} [{:.4},{:.4}] {mark}", m.label, m.mean, m.ci_low, m.ci_high);
        }
    }
    Ok(())
}
