//! Dataset-, cloud- and instance-level IoU and accuracy.
//!
//! Four aggregation levels are computed for each [`MetricKind`]:
//!
//! * dataset level: counts are summed over clouds before the per-category ratio;
//! * cloud first: per-cloud means over present categories, then a mean over clouds;
//! * category first: per-category means over clouds where the category is present,
//!   then a mean over categories;
//! * instance level: one ratio per ground-truth instance, with the cloud-level
//!   false positives of its category split among instances in proportion to size.
//!
//! Ratios of absent categories are NULL ([`MetricValue::NULL`]) and every mean
//! skips them. All reductions run in ascending category/cloud/instance order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{AccMode, InstanceTnMode, MetricConfig, NullMode};
use crate::error::{Error, Result};
use crate::stats::{ConfusionCell, DatasetStats, InstanceStats};

/// A ratio in `[0, 1]`, or NULL when the quantity is undefined for the input.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricValue(Option<f64>);

impl MetricValue {
    pub const NULL: MetricValue = MetricValue(None);

    pub fn new(value: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&value), "metric value {value} outside [0, 1]");
        MetricValue(Some(value))
    }

    pub fn get(self) -> Option<f64> {
        self.0
    }

    pub fn is_null(self) -> bool {
        self.0.is_none()
    }

    /// Mean of the non-NULL values; NULL if there are none.
    pub fn mean<I: IntoIterator<Item = MetricValue>>(values: I) -> MetricValue {
        let (sum, count) = values
            .into_iter()
            .filter_map(MetricValue::get)
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if count == 0 {
            MetricValue::NULL
        } else {
            MetricValue(Some(sum / count as f64))
        }
    }
}

impl From<Option<f64>> for MetricValue {
    fn from(value: Option<f64>) -> Self {
        MetricValue(value)
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("NULL"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    IoU,
    Acc,
}

impl MetricKind {
    pub fn prefix(self) -> &'static str {
        match self {
            MetricKind::IoU => "mIoU",
            MetricKind::Acc => "mAcc",
        }
    }
}

/// The four aggregation orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Dataset,
    CloudFirst,
    CategoryFirst,
    Instance,
}

impl Level {
    pub const ALL: [Level; 4] = [
        Level::Dataset,
        Level::CloudFirst,
        Level::CategoryFirst,
        Level::Instance,
    ];

    pub fn suffix(self) -> &'static str {
        match self {
            Level::Dataset => "D",
            Level::CloudFirst => "P",
            Level::CategoryFirst => "C",
            Level::Instance => "I",
        }
    }
}

/// Column name of a summary, e.g. `mIoU^C`.
pub fn summary_name(kind: MetricKind, level: Level) -> String {
    format!("{}^{}", kind.prefix(), level.suffix())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelResult {
    pub per_category: Vec<MetricValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_cloud: Option<Vec<MetricValue>>,
    pub summary: MetricValue,
}

fn is_absent(cell: &ConfusionCell, mode: NullMode) -> bool {
    match mode {
        NullMode::GtAbsent => cell.gt_points() == 0,
        NullMode::UnionAbsent => cell.union() == 0,
    }
}

fn ratio(num: f64, den: f64) -> MetricValue {
    if den == 0.0 {
        MetricValue::NULL
    } else {
        MetricValue::new(num / den)
    }
}

/// IoU or accuracy of a single confusion cell.
pub fn cell_metric(kind: MetricKind, cell: &ConfusionCell, config: &MetricConfig) -> MetricValue {
    if is_absent(cell, config.null_mode) {
        return MetricValue::NULL;
    }
    let ConfusionCell { tp, fp, fn_, tn } = *cell;
    match (kind, config.acc_mode) {
        (MetricKind::IoU, _) => ratio(tp as f64, (tp + fp + fn_) as f64),
        (MetricKind::Acc, AccMode::Paper) => ratio((tp + tn) as f64, (tp + fp + fn_ + tn) as f64),
        (MetricKind::Acc, AccMode::Recall) => ratio(tp as f64, (tp + fn_) as f64),
    }
}

fn require_clouds(stats: &DatasetStats) -> Result<()> {
    if stats.is_empty() {
        Err(Error::EmptyDataset)
    } else {
        Ok(())
    }
}

fn categories(stats: &DatasetStats) -> std::ops::Range<usize> {
    0..stats.num_categories() as usize
}

/// Ratios over counts summed across the whole dataset.
pub fn metric_dataset_level(
    kind: MetricKind,
    stats: &DatasetStats,
    config: &MetricConfig,
) -> Result<LevelResult> {
    require_clouds(stats)?;
    let per_category: Vec<_> = categories(stats)
        .map(|c| cell_metric(kind, &stats.category_total(c), config))
        .collect();
    Ok(LevelResult {
        summary: MetricValue::mean(per_category.iter().copied()),
        per_category,
        per_cloud: None,
    })
}

/// Mean over categories within each cloud, then mean over clouds.
///
/// `per_category` holds the category-first values so that both orders can be
/// read side by side; the defining collection here is `per_cloud`.
pub fn metric_cloud_first(
    kind: MetricKind,
    stats: &DatasetStats,
    config: &MetricConfig,
) -> Result<LevelResult> {
    require_clouds(stats)?;
    let per_cloud: Vec<_> = stats
        .clouds()
        .iter()
        .map(|cloud| MetricValue::mean(cloud.cells.iter().map(|cell| cell_metric(kind, cell, config))))
        .collect();
    Ok(LevelResult {
        summary: MetricValue::mean(per_cloud.iter().copied()),
        per_category: category_first_values(kind, stats, config),
        per_cloud: Some(per_cloud),
    })
}

fn category_first_values(kind: MetricKind, stats: &DatasetStats, config: &MetricConfig) -> Vec<MetricValue> {
    categories(stats)
        .map(|c| {
            MetricValue::mean(
                stats
                    .clouds()
                    .iter()
                    .map(|cloud| cell_metric(kind, &cloud.cells[c], config)),
            )
        })
        .collect()
}

/// Mean over clouds within each category, then mean over categories.
pub fn metric_category_first(
    kind: MetricKind,
    stats: &DatasetStats,
    config: &MetricConfig,
) -> Result<LevelResult> {
    require_clouds(stats)?;
    let per_category = category_first_values(kind, stats, config);
    Ok(LevelResult {
        summary: MetricValue::mean(per_category.iter().copied()),
        per_category,
        per_cloud: None,
    })
}

/// Split a cloud-level count among instances in proportion to their sizes.
pub fn allocate_fp(instances: &[InstanceStats], fp: u64) -> Result<Vec<f64>> {
    allocate(instances, fp as f64)
}

fn allocate(instances: &[InstanceStats], amount: f64) -> Result<Vec<f64>> {
    if instances.is_empty() {
        return Err(Error::EmptyInstances);
    }
    let total = instances.iter().map(InstanceStats::size).sum::<u64>() as f64;
    Ok(instances
        .iter()
        .map(|inst| inst.size() as f64 / total * amount)
        .collect())
}

/// Per-instance ratios pooled over all clouds, averaged per category.
pub fn metric_instance_level(
    kind: MetricKind,
    stats: &DatasetStats,
    config: &MetricConfig,
) -> Result<LevelResult> {
    require_clouds(stats)?;
    let per_category: Vec<_> = categories(stats)
        .map(|c| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for cloud in stats.clouds() {
                let instances = &cloud.instances[c];
                if instances.is_empty() {
                    continue;
                }
                let cell = &cloud.cells[c];
                let fp_shares = allocate(instances, cell.fp as f64)?;
                let tn_shares = match config.instance_tn_mode {
                    InstanceTnMode::CloudLevel => None,
                    InstanceTnMode::Allocated => Some(allocate(instances, cell.tn as f64)?),
                };
                for (i, inst) in instances.iter().enumerate() {
                    let tp = inst.tp as f64;
                    let fn_ = inst.fn_ as f64;
                    let fp = fp_shares[i];
                    let value = match (kind, config.acc_mode) {
                        (MetricKind::IoU, _) => tp / (tp + fn_ + fp),
                        (MetricKind::Acc, AccMode::Recall) => tp / (tp + fn_),
                        (MetricKind::Acc, AccMode::Paper) => {
                            let tn = tn_shares.as_ref().map_or(cell.tn as f64, |s| s[i]);
                            (tp + tn) / (tp + fn_ + tn + fp)
                        }
                    };
                    sum += value;
                    count += 1;
                }
            }
            Ok(if count == 0 {
                MetricValue::NULL
            } else {
                MetricValue::new(sum / count as f64)
            })
        })
        .collect::<Result<_>>()?;
    Ok(LevelResult {
        summary: MetricValue::mean(per_category.iter().copied()),
        per_category,
        per_cloud: None,
    })
}

pub fn metric_level(
    kind: MetricKind,
    level: Level,
    stats: &DatasetStats,
    config: &MetricConfig,
) -> Result<LevelResult> {
    match level {
        Level::Dataset => metric_dataset_level(kind, stats, config),
        Level::CloudFirst => metric_cloud_first(kind, stats, config),
        Level::CategoryFirst => metric_category_first(kind, stats, config),
        Level::Instance => metric_instance_level(kind, stats, config),
    }
}

/// Fraction of valid points predicted correctly.
pub fn overall_accuracy(stats: &DatasetStats) -> Result<f64> {
    let valid = stats.valid_points();
    if valid == 0 {
        return Err(Error::NoValidPoints);
    }
    let correct: u64 = stats.clouds().iter().map(|c| c.correct_points()).sum();
    Ok(correct as f64 / valid as f64)
}

/// Counts of inputs the metrics had to skip or could not fully use.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// (cloud, category) pairs whose ratio is NULL.
    pub null_cells: u64,
    /// Categories NULL at the dataset level.
    pub null_categories: u64,
    /// Clouds that are NULL in the cloud-first mean for IoU.
    pub skipped_clouds: u64,
    /// (cloud, category) pairs with false positives but no instance to absorb them.
    pub unattributed_fp_pairs: u64,
    /// False-positive points in those pairs.
    pub unattributed_fp_points: u64,
    /// Ground-truth points without an instance id while instances were supplied.
    pub uncovered_instance_points: u64,
    /// Instances seen across the dataset.
    pub instances: u64,
}

pub fn diagnostics(stats: &DatasetStats, config: &MetricConfig) -> Diagnostics {
    let mut d = Diagnostics::default();
    for cloud in stats.clouds() {
        let mut all_null = true;
        for (cell, instances) in cloud.cells.iter().zip(&cloud.instances) {
            if is_absent(cell, config.null_mode) {
                d.null_cells += 1;
            } else {
                all_null = false;
            }
            if instances.is_empty() && cell.fp > 0 {
                d.unattributed_fp_pairs += 1;
                d.unattributed_fp_points += cell.fp;
            }
            d.instances += instances.len() as u64;
        }
        if all_null {
            d.skipped_clouds += 1;
        }
        d.uncovered_instance_points += cloud.uncovered_points;
    }
    d.null_categories = categories(stats)
        .filter(|&c| is_absent(&stats.category_total(c), config.null_mode))
        .count() as u64;
    d
}
