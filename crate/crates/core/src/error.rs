use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("records span several years: {0:?}")]
    MixedYears(Vec<i32>),

    #[error("no usable records")]
    NoRecords,

    #[error("unknown country `{0}`")]
    UnknownCountry(String),

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("empty sample")]
    EmptySample,

    #[error("sample contains a non-positive or non-finite value: {0}")]
    NonPositiveValue(f64),

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("degenerate sample (σ=0)")]
    DegenerateSample,

    #[error("fitness entry {index} is non-positive ({value})")]
    NonPositiveFitness { index: usize, value: f64 },

    #[error("missing indicator `{indicator}` for countries: {countries:?}")]
    MissingIndicator {
        indicator: String,
        countries: Vec<String>,
    },

    #[error("indicator table: {0}")]
    Indicator(String),

    #[error("empty synthetic sample (country `{0}`)")]
    EmptySyntheticSample(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("country `{country}`: {source}")]
    Country {
        country: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_country(self, country: &str) -> Self {
        Error::Country {
            country: country.to_string(),
            source: Box::new(self),
        }
    }
}
