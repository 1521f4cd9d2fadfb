use tal_core::{AggregateError, AnalysisError, CorpusError, TxHash};
use tal_ingest::IngestError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("ingestion: {0}")]
    Ingest(#[from] IngestError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("aggregation: {0}")]
    Aggregate(#[from] AggregateError),
    #[error("transaction {tx_hash} lacks its {missing} trace")]
    MissingPair { tx_hash: TxHash, missing: &'static str },
    #[error("transaction {0} has no declared-list record")]
    MissingDeclared(TxHash),
    #[error("transaction {0} has no block timestamp")]
    MissingTimestamp(TxHash),
    #[error("writing output: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit status: 2 configuration, 3 ingestion or corpus input,
    /// 4 analysis, 5 output.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ingest(_) | CliError::Corpus(_) | CliError::MissingDeclared(_) => 3,
            CliError::Analysis(_)
            | CliError::Aggregate(_)
            | CliError::MissingPair { .. }
            | CliError::MissingTimestamp(_) => 4,
            CliError::Output(_) => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
