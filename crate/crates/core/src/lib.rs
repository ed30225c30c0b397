//! Periodic Vietoris–Rips filtrations of polymer repeating units, Forman
//! curvature features, a reference hierarchical simplicial message-passing
//! forward pass, and the matched-pair statistics used to read trends out of
//! its predictions.
//!
//! ```no_run
//! use periodic_rips::pipeline::{featurize_unit, FeaturizeOptions};
//! use periodic_rips::polymer::parse_repeating_unit;
//!
//! let unit = parse_repeating_unit(&std::fs::read("unit.json")?)?;
//! let features = featurize_unit(&unit, &FeaturizeOptions::default())?;
//! assert_eq!(features.levels[0].vertex.cols(), 75);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

mod canon;
pub mod curvature;
pub mod features;
pub mod hsmp;
pub mod metric;
pub mod pipeline;
pub mod polymer;
pub mod rips;
pub mod stats;
pub mod tensor;

use thiserror::Error;

/// Crate-level error wrapping each stage's error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Polymer(#[from] polymer::PolymerError),
    #[error(transparent)]
    Metric(#[from] metric::MetricError),
    #[error(transparent)]
    Rips(#[from] rips::RipsError),
    #[error(transparent)]
    Curvature(#[from] curvature::CurvatureError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Model(#[from] hsmp::ModelError),
    #[error(transparent)]
    Container(#[from] tensor::ContainerError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Validation(String),
    #[error("version mismatch: {0}")]
    Version(String),
}

/// Coarse error class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unreadable or syntactically malformed input.
    Parse,
    /// Well-formed input violating a precondition.
    Validation,
    /// Schema or format version disagreement.
    Version,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use hsmp::ModelError as M;
        match self {
            Error::Polymer(polymer::PolymerError::Malformed(_)) => ErrorKind::Parse,
            Error::Metric(metric::MetricError::BadFile(_)) => ErrorKind::Parse,
            Error::Container(_) | Error::Io(_) => ErrorKind::Parse,
            Error::Model(M::SchemaMismatch { .. }) | Error::Version(_) => ErrorKind::Version,
            Error::Model(M::Container(_)) => ErrorKind::Parse,
            Error::Stats(stats::StatsError::Csv(_)) => ErrorKind::Parse,
            _ => ErrorKind::Validation,
        }
    }
}
