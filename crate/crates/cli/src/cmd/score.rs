use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use pqscreen::cohort::PQ_ITEMS;
use pqscreen::learn::{ModelArtifact, PAPER_EQ1_ID};
use pqscreen_serve::{parse_request, score, ScoreResponse};

use crate::error::CliError;
use crate::output::say;
use crate::output::RunConfig;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Built-in model name or artifact path.
    #[arg(long, default_value = PAPER_EQ1_ID)]
    model: String,
    /// Item severity, e.g. `--set P2_TRMR=4`; unset items are 0.
    #[arg(long = "set", value_name = "ITEM=SEVERITY")]
    set: Vec<String>,
    #[arg(long)]
    age: Option<f64>,
    #[arg(long)]
    gender: Option<u8>,
    /// Observation as JSON (`{"features": {...}, "age": .., "gender": ..}`).
    #[arg(long, conflicts_with = "input")]
    json: Option<String>,
    /// File holding the observation JSON.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Serialize)]
struct Output<'a> {
    #[serde(flatten)]
    response: ScoreResponse,
    toolkit_version: &'a str,
    run_config: Value,
}

fn merge(base: &mut Map<String, Value>, partial: Value) -> Result<(), CliError> {
    let Value::Object(obj) = partial else {
        return Err(CliError::Usage("observation JSON must be an object".into()));
    };
    for (k, v) in obj {
        if k == "features" {
            match (base.get_mut("features"), v) {
                (Some(Value::Object(items)), Value::Object(given)) => items.extend(given),
                (_, other) => {
                    base.insert(k, other);
                }
            }
        } else {
            base.insert(k, v);
        }
    }
    Ok(())
}

pub fn run(a: Args) -> Result<(), CliError> {
    let artifact = ModelArtifact::resolve(&a.model)?;
    let mut features = Map::new();
    for name in PQ_ITEMS {
        features.insert(name.to_string(), 0.into());
    }
    let mut body = Map::new();
    body.insert("features".into(), Value::Object(features));
    body.insert("age".into(), 0.into());
    body.insert("gender".into(), 0.into());

    let given = match (&a.json, &a.input) {
        (Some(text), _) => Some(text.clone()),
        (None, Some(path)) => {
            Some(std::fs::read_to_string(path).map_err(|e| crate::output::io_error(path, e))?)
        }
        (None, None) => None,
    };
    if let Some(text) = given {
        merge(&mut body, serde_json::from_str(&text)?)?;
    }
    for s in &a.set {
        let (name, value) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects ITEM=SEVERITY, got {s:?}")))?;
        let v: i64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("severity for {name} is not an integer: {value:?}")))?;
        body.get_mut("features")
            .and_then(Value::as_object_mut)
            .expect("features object")
            .insert(name.trim().to_string(), v.into());
    }
    if let Some(age) = a.age {
        body.insert("age".into(), age.into());
    }
    if let Some(g) = a.gender {
        body.insert("gender".into(), g.into());
    }
    let body = Value::Object(body);
    let fv = parse_request(&body).map_err(CliError::Validation)?;
    let response = score(&artifact, &fv)?;

    let mut run = RunConfig::new("score")
        .param("observation", &body);
    run.inputs = vec![a.model.clone()];
    run.model = Some(artifact.model.kind().name().to_string());
    run.threshold = Some(artifact.model.threshold());
    let out = Output {
        response,
        toolkit_version: pqscreen::VERSION,
        run_config: run.to_value(),
    };
    say!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
