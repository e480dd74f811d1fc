//! Animal-grouped evaluation: splitting, tuning, metrics and reports.

pub mod experiment;
pub mod kappa;
pub mod metrics;
pub mod report;
pub mod split;
pub mod tune;

pub use kappa::cohens_kappa;
pub use metrics::{compute_metrics, ClassMetrics, MetricsReport};
pub use split::{grouped_stratified_split, ClassProfile, GroupedSplit, SplitSpec};
pub use tune::{tune, TuneResult, TuneSpec};
