use std::net::{IpAddr, SocketAddr};

use pqscreen::learn::{ModelArtifact, PAPER_EQ1_ID};

use crate::error::CliError;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Built-in model name or artifact path.
    #[arg(long, default_value = PAPER_EQ1_ID)]
    model: String,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = pqscreen_serve::DEFAULT_PORT)]
    port: u16,
}

pub fn run(a: Args) -> Result<(), CliError> {
    let artifact = ModelArtifact::resolve(&a.model)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Serve(pqscreen_serve::ServeError::Io(e)))?;
    let addr = SocketAddr::new(a.host, a.port);
    eprintln!("serving {} on http://{addr}", artifact.model_id);
    runtime.block_on(pqscreen_serve::run(artifact, addr))?;
    Ok(())
}
