use thiserror::Error;

/// Residuals of a subspace certificate for one coupling operator.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorResidual {
    pub operator: &'static str,
    pub invariance: f64,
    pub low_rank: f64,
    pub threshold: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("subspace certificate failed ({})", describe(.residuals))]
    Certificate { residuals: Vec<OperatorResidual> },

    #[error("integration blew up at t = {time}: {detail}")]
    Integration { time: f64, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

fn describe(residuals: &[OperatorResidual]) -> String {
    residuals
        .iter()
        .map(|r| {
            format!(
                "{}: invariance {:.3e}, low-rank {:.3e}, threshold {:.3e}",
                r.operator, r.invariance, r.low_rank, r.threshold
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
