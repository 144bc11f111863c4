//! The metamorphic engine: the transform suite, campaigns that compare SUT
//! outputs across rendered views and mutated images, inconsistency counting
//! and rank-correlation analysis.

mod campaign;
mod report;
mod stats;
mod suite;

use thiserror::Error;

pub use campaign::{index_homography, run_campaign, CampaignConfig};
pub use report::{
    correlation_table, count_inconsistencies, eps_label, summary_table, write_report, Arm, CampaignReport,
    CorrelationEntry, CountRow, IncRecord, QualityRow, IMAGE_METRICS,
};
pub use stats::{average_ranks, spearman, StatsError};
pub use suite::{aim_point, build_suite, TransformSuite};

pub const DEFAULT_EPSILONS: [f64; 3] = [0.1, 0.2, 0.5];

#[derive(Debug, Error)]
pub enum MtError {
    #[error("dataset has no scene sidecar")]
    MissingSidecar,
    #[error("invalid transform suite: {0}")]
    InvalidSuite(String),
    #[error("invalid campaign configuration: {0}")]
    InvalidConfig(String),
    #[error("no eval frames to test")]
    NoFrames,
    #[error("not enough data for correlation: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Quality(#[from] crate::imqual::QualityError),
    #[error(transparent)]
    Mutation(#[from] crate::mutate::MutationError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
