//! Confusion and instance counting for labeled point clouds.
//!
//! Everything the metrics read lives in integer counters, one [`ConfusionCell`]
//! per (cloud, category) plus per-instance TP/FN pairs. Counters are built in a
//! single pass over the label streams and combine by [`DatasetStats::merge`],
//! so clouds can be accumulated independently and in any order.

use std::collections::HashMap;
use std::ops::{AddAssign, Deref};

use crate::config::MetricConfig;
use crate::error::{Error, Result};

/// Instance id marking a point that belongs to no instance.
pub const NO_INSTANCE: u32 = u32::MAX;

/// Per-point category ids of one cloud.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelArray(pub Vec<u32>);

/// Per-point instance ids aligned with a ground-truth [`LabelArray`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceArray(pub Vec<u32>);

macro_rules! slice_newtype {
    ($ty:ident) => {
        impl Deref for $ty {
            type Target = [u32];

            fn deref(&self) -> &[u32] {
                &self.0
            }
        }

        impl From<Vec<u32>> for $ty {
            fn from(values: Vec<u32>) -> Self {
                Self(values)
            }
        }
    };
}

slice_newtype!(LabelArray);
slice_newtype!(InstanceArray);

/// Binary confusion counts of one category within one cloud.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCell {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCell {
    pub const fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Ground-truth points of the category.
    pub fn gt_points(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Points that are the category in either ground truth or prediction.
    pub fn union(&self) -> u64 {
        self.tp + self.fp + self.fn_
    }
}

impl AddAssign for ConfusionCell {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
        self.tn += rhs.tn;
    }
}

/// TP/FN counts of a single ground-truth instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InstanceStats {
    pub instance_id: u32,
    pub tp: u64,
    pub fn_: u64,
}

impl InstanceStats {
    /// Ground-truth point count of the instance (always at least one).
    pub fn size(&self) -> u64 {
        self.tp + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudStats {
    pub cloud_id: String,
    pub valid_points: u64,
    /// One cell per category.
    pub cells: Vec<ConfusionCell>,
    /// Per category, instances in ascending id order.
    pub instances: Vec<Vec<InstanceStats>>,
    /// Valid ground-truth points that carried no instance id although an
    /// instance stream was supplied. They count in `cells` only.
    pub uncovered_points: u64,
}

impl CloudStats {
    pub fn correct_points(&self) -> u64 {
        self.cells.iter().map(|c| c.tp).sum()
    }
}

/// Single-pass accumulator for one cloud. Label streams may be fed in chunks.
#[derive(Debug)]
pub struct CloudAccumulator {
    cloud_id: String,
    num_categories: u32,
    ignore_id: u32,
    seen: u64,
    valid: u64,
    tp: Vec<u64>,
    fp: Vec<u64>,
    fn_: Vec<u64>,
    // (category, instance id) -> (tp, fn)
    instances: HashMap<(u32, u32), (u64, u64)>,
    uncovered: u64,
}

impl CloudAccumulator {
    pub fn new(cloud_id: impl Into<String>, num_categories: u32, ignore_id: u32) -> Self {
        let n = num_categories as usize;
        Self {
            cloud_id: cloud_id.into(),
            num_categories,
            ignore_id,
            seen: 0,
            valid: 0,
            tp: vec![0; n],
            fp: vec![0; n],
            fn_: vec![0; n],
            instances: HashMap::new(),
            uncovered: 0,
        }
    }

    pub fn cloud_id(&self) -> &str {
        &self.cloud_id
    }

    /// Points consumed so far, ignored ones included.
    pub fn points_seen(&self) -> u64 {
        self.seen
    }

    /// Feed the next aligned chunk of the cloud's streams.
    pub fn push(&mut self, gt: &[u32], pred: &[u32], inst: Option<&[u32]>) -> Result<()> {
        if gt.len() != pred.len() {
            return Err(Error::LengthMismatch {
                cloud: self.cloud_id.clone(),
                gt: self.seen + gt.len() as u64,
                pred: self.seen + pred.len() as u64,
            });
        }
        if let Some(inst) = inst {
            if inst.len() != gt.len() {
                return Err(Error::InstanceLengthMismatch {
                    cloud: self.cloud_id.clone(),
                    gt: self.seen + gt.len() as u64,
                    inst: self.seen + inst.len() as u64,
                });
            }
        }

        for (offset, (&g, &q)) in gt.iter().zip(pred).enumerate() {
            let index = self.seen + offset as u64;
            let instance = inst.map(|ids| ids[offset]);
            if g == self.ignore_id {
                if let Some(id) = instance.filter(|&id| id != NO_INSTANCE) {
                    return Err(Error::InstanceOnIgnored {
                        cloud: self.cloud_id.clone(),
                        index,
                        instance: id,
                    });
                }
                continue;
            }
            self.check_label("ground-truth", index, g)?;
            if q == self.ignore_id {
                return Err(Error::PredictedIgnore {
                    cloud: self.cloud_id.clone(),
                    index,
                    ignore_id: self.ignore_id,
                });
            }
            self.check_label("predicted", index, q)?;

            self.valid += 1;
            let correct = g == q;
            if correct {
                self.tp[g as usize] += 1;
            } else {
                self.fn_[g as usize] += 1;
                self.fp[q as usize] += 1;
            }
            match instance {
                Some(NO_INSTANCE) => self.uncovered += 1,
                Some(id) => {
                    let entry = self.instances.entry((g, id)).or_default();
                    if correct {
                        entry.0 += 1;
                    } else {
                        entry.1 += 1;
                    }
                }
                None => {}
            }
        }
        self.seen += gt.len() as u64;
        Ok(())
    }

    fn check_label(&self, array: &'static str, index: u64, label: u32) -> Result<()> {
        if label >= self.num_categories {
            return Err(Error::LabelOutOfRange {
                cloud: self.cloud_id.clone(),
                array,
                index,
                label,
                num_categories: self.num_categories,
            });
        }
        Ok(())
    }

    pub fn finish(self) -> CloudStats {
        let n = self.num_categories as usize;
        let cells = (0..n)
            .map(|c| {
                let (tp, fp, fn_) = (self.tp[c], self.fp[c], self.fn_[c]);
                ConfusionCell::new(tp, fp, fn_, self.valid - tp - fp - fn_)
            })
            .collect();

        let mut instances = vec![Vec::new(); n];
        for ((category, instance_id), (tp, fn_)) in self.instances {
            instances[category as usize].push(InstanceStats {
                instance_id,
                tp,
                fn_,
            });
        }
        for list in &mut instances {
            list.sort_unstable_by_key(|s| s.instance_id);
        }

        CloudStats {
            cloud_id: self.cloud_id,
            valid_points: self.valid,
            cells,
            instances,
            uncovered_points: self.uncovered,
        }
    }
}

/// Confusion cells (one per category) of a single cloud.
pub fn count_confusion(
    cloud_id: &str,
    gt: &[u32],
    pred: &[u32],
    config: &MetricConfig,
    num_categories: u32,
) -> Result<Vec<ConfusionCell>> {
    let mut acc = CloudAccumulator::new(cloud_id, num_categories, config.ignore_id);
    acc.push(gt, pred, None)?;
    Ok(acc.finish().cells)
}

/// Per-category instance statistics of a single cloud, ascending by instance id.
pub fn count_instances(
    cloud_id: &str,
    gt: &[u32],
    pred: &[u32],
    inst: &[u32],
    config: &MetricConfig,
    num_categories: u32,
) -> Result<Vec<Vec<InstanceStats>>> {
    let mut acc = CloudAccumulator::new(cloud_id, num_categories, config.ignore_id);
    acc.push(gt, pred, Some(inst))?;
    Ok(acc.finish().instances)
}

/// Full statistics of one in-memory cloud.
pub fn accumulate_cloud(
    cloud_id: &str,
    gt: &[u32],
    pred: &[u32],
    inst: Option<&[u32]>,
    config: &MetricConfig,
    num_categories: u32,
) -> Result<CloudStats> {
    let mut acc = CloudAccumulator::new(cloud_id, num_categories, config.ignore_id);
    acc.push(gt, pred, inst)?;
    Ok(acc.finish())
}

/// Statistics of a whole dataset: clouds kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStats {
    num_categories: u32,
    ignore_id: u32,
    clouds: Vec<CloudStats>,
}

impl DatasetStats {
    pub fn new(num_categories: u32, ignore_id: u32) -> Result<Self> {
        if num_categories == 0 {
            return Err(Error::ConfigMismatch(
                "number of categories must be at least 1".into(),
            ));
        }
        Ok(Self {
            num_categories,
            ignore_id,
            clouds: Vec::new(),
        })
    }

    pub fn num_categories(&self) -> u32 {
        self.num_categories
    }

    pub fn ignore_id(&self) -> u32 {
        self.ignore_id
    }

    pub fn clouds(&self) -> &[CloudStats] {
        &self.clouds
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    pub fn valid_points(&self) -> u64 {
        self.clouds.iter().map(|c| c.valid_points).sum()
    }

    /// Cells of one category summed over every cloud.
    pub fn category_total(&self, category: usize) -> ConfusionCell {
        let mut total = ConfusionCell::default();
        for cloud in &self.clouds {
            total += cloud.cells[category];
        }
        total
    }

    pub fn has_instances(&self) -> bool {
        self.clouds
            .iter()
            .any(|c| c.instances.iter().any(|list| !list.is_empty()))
    }

    pub fn push(&mut self, cloud: CloudStats) -> Result<()> {
        if cloud.cells.len() != self.num_categories as usize
            || cloud.instances.len() != self.num_categories as usize
        {
            return Err(Error::ConfigMismatch(format!(
                "cloud {:?} has {} categories, dataset has {}",
                cloud.cloud_id,
                cloud.cells.len(),
                self.num_categories
            )));
        }
        match self
            .clouds
            .binary_search_by(|c| c.cloud_id.as_str().cmp(&cloud.cloud_id))
        {
            Ok(_) => Err(Error::DuplicateCloud(cloud.cloud_id)),
            Err(at) => {
                self.clouds.insert(at, cloud);
                Ok(())
            }
        }
    }

    /// Union of two datasets with disjoint cloud ids.
    pub fn merge(mut self, other: DatasetStats) -> Result<DatasetStats> {
        if self.num_categories != other.num_categories {
            return Err(Error::ConfigMismatch(format!(
                "cannot merge datasets with {} and {} categories",
                self.num_categories, other.num_categories
            )));
        }
        if self.ignore_id != other.ignore_id {
            return Err(Error::ConfigMismatch(format!(
                "cannot merge datasets with ignore ids {} and {}",
                self.ignore_id, other.ignore_id
            )));
        }
        self.clouds.extend(other.clouds);
        self.clouds.sort_by(|a, b| a.cloud_id.cmp(&b.cloud_id));
        if let Some(dup) = self
            .clouds
            .windows(2)
            .find(|w| w[0].cloud_id == w[1].cloud_id)
        {
            return Err(Error::DuplicateCloud(dup[0].cloud_id.clone()));
        }
        Ok(self)
    }
}
