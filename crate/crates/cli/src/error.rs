use pqscreen_serve::ServeError;

#[derive(Debug)]
pub enum CliError {
    Core(pqscreen::Error),
    Serve(ServeError),
    Usage(String),
    MissingData(String),
    Validation(Vec<pqscreen_serve::FieldError>),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Serve(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::MissingData(_) => "missing_data",
            CliError::Validation(_) => "validation",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Serve(e) => e.to_string(),
            CliError::Usage(m) | CliError::MissingData(m) => m.clone(),
            CliError::Validation(fields) => fields
                .iter()
                .map(|f| format!("{}: {}", f.field, f.message))
                .collect::<Vec<_>>()
                .join("; "),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<pqscreen::Error> for CliError {
    fn from(e: pqscreen::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        CliError::Serve(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}
