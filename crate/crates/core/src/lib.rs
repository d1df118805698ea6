//! Fine-grained evaluation of point cloud semantic segmentation.
//!
//! Predictions are reduced to integer confusion counts per (cloud, category)
//! and per ground-truth instance ([`stats`]), from which [`metrics`] derives
//! IoU and accuracy at the dataset, cloud-first, category-first and instance
//! levels plus overall accuracy. [`report`] assembles and compares methods,
//! [`ingest`] reads manifests and label files, and [`synth`] builds seeded
//! datasets with controlled imbalance.

#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod stats;
pub mod synth;

pub use config::{AccMode, InstanceTnMode, MetricConfig, NullMode};
pub use error::{Error, Result};
pub use metrics::{Level, LevelResult, MetricKind, MetricValue};
pub use report::{MethodReport, RankComparison};
pub use stats::{ConfusionCell, DatasetStats, InstanceStats};
