//! Matched-pair trend analysis of predicted glass transition temperatures.

pub mod dist;
mod hypothesis;
mod records;

use thiserror::Error;

pub use hypothesis::{
    apply_holm, holm_adjust, mann_whitney_exact_p, mann_whitney_null_counts, mann_whitney_statistics, mann_whitney_u,
    mean, one_sample_t_test, sample_sd, t_confidence_interval, TestMethod, TestResult, MWU_EXACT_LIMIT,
};
pub use records::{
    analyze, canonical_substitution_key, match_pairs, read_predictions, summarize_families, write_analysis,
    write_predictions, write_summaries, Analysis, AnalysisRow, Comparison, Family, FamilySummary, MatchedPair,
    Modification, PairMatch, PredictionRecord, DEFAULT_CI_LEVEL,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least two values, got {0}")]
    TooFew(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("empty sample")]
    EmptySample,
    #[error("p-value {0} outside [0, 1]")]
    PValue(f64),
    #[error("confidence level {0} outside (0, 1)")]
    Level(f64),
    #[error("unknown family {0:?}")]
    Family(String),
    #[error("bad substitution key {0:?}")]
    Key(String),
    #[error("duplicate substitution key {key:?} in family {family}")]
    DuplicateKey { family: String, key: String },
    #[error("{comparison}: {source}")]
    Comparison {
        comparison: String,
        #[source]
        source: Box<StatsError>,
    },
    #[error("predictions csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for StatsError {
    fn from(e: csv::Error) -> Self {
        StatsError::Csv(e.to_string())
    }
}
