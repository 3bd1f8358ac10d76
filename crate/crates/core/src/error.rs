use thiserror::Error;

/// Errors raised anywhere in the stitching and search pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {layer}: {detail}")]
    Shape { layer: String, detail: String },

    #[error("graph contains a cycle through [{}]", nodes.join(", "))]
    Cycle { nodes: Vec<String> },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("format error at {context}: {message}")]
    Format { context: String, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("singular least-squares system: {0}")]
    Singular(String),

    #[error("non-finite loss while training {0}")]
    NonFinite(String),

    #[error("invalid genotype: {0}")]
    Genotype(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            layer: layer.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}
