use std::path::PathBuf;

use pqscreen::learn::{data_fingerprint, permutation_importance, Model, ModelArtifact};

use crate::error::CliError;
use crate::output::say;
use crate::output::{load_cohort, path_string, write_csv, RunConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Forest artifact path.
    #[arg(long)]
    model: String,
    /// Training cohort [default: the artifact's recorded training data].
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Per-feature scores CSV.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: Args) -> Result<(), CliError> {
    let artifact = ModelArtifact::resolve(&a.model)?;
    let Model::Forest(forest) = &artifact.model else {
        return Err(CliError::Usage(format!(
            "importance needs a forest artifact, {} is {}",
            artifact.model_id,
            artifact.model.kind()
        )));
    };
    let data = match (&a.data, artifact.training.as_ref().and_then(|t| t.data_path.as_ref())) {
        (Some(d), _) => d.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(CliError::MissingData(format!(
                "artifact {} has no training data reference; pass --data <cohort.csv>",
                artifact.model_id
            )))
        }
    };
    let cohort = load_cohort(&data)?;
    if let Some(t) = &artifact.training {
        if data_fingerprint(&cohort)? != t.data_fingerprint {
            return Err(CliError::Core(pqscreen::Error::Artifact(format!(
                "{} is not the cohort the forest was trained on (fingerprint mismatch)",
                data.display()
            ))));
        }
    }
    let x = cohort.design_matrix::<f64>();
    let z = match &artifact.selector {
        Some(s) => s.apply(x.view())?,
        None => x,
    };
    let scores = permutation_importance(forest, z.view(), &cohort.labels(), a.seed)?;
    let names = artifact.model_input_names();
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&i, &j| scores.scores[j].total_cmp(&scores.scores[i]).then(i.cmp(&j)));

    let mut run = RunConfig::new("importance");
    run.inputs = vec![a.model.clone(), path_string(&data)];
    run.outputs = vec![path_string(&a.out)];
    run.model = Some("forest".into());
    run.seed = Some(a.seed);
    write_csv(&a.out, &run, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["feature", "score", "rank"])?;
        for (rank, &i) in order.iter().enumerate() {
            w.write_record([names[i].clone(), scores.scores[i].to_string(), (rank + 1).to_string()])?;
        }
        w.flush().map_err(|e| crate::output::io_error(&a.out, e))?;
        Ok(())
    })?;
    for (rank, &i) in order.iter().enumerate() {
        say!("{:>2} {:<8} {:>8.3}", rank + 1, names[i], scores.scores[i]);
    }
    Ok(())
}
