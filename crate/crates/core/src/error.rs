use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter for {what}: {detail}")]
    InvalidParameter { what: &'static str, detail: String },

    #[error("matrix is not positive definite: pivot {pivot} is {value}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("log-density is not concave near x = {abscissa}: chord exceeds function by {excess:.3e}")]
    NotLogConcave { abscissa: f64, excess: f64 },

    #[error("adaptive rejection sampling exceeded {max_refinements} hull refinements")]
    ArsMaxRefinements { max_refinements: usize },

    #[error("data validation: {0}")]
    Data(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("sampler failed at iteration {iteration}, block {block}: {source}")]
    Sampler {
        iteration: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_block(self, iteration: usize, block: &'static str) -> Self {
        Error::Sampler {
            iteration,
            block,
            source: Box::new(self),
        }
    }
}
