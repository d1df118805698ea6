//! Seeded synthetic datasets with category-frequency and instance-size imbalance.
//!
//! Every cloud draws from its own ChaCha8 generator seeded with
//! `seed ^ cloud_index`; generation uses stream 0 and corruption stream 1, so
//! any cloud can be regenerated alone and results do not depend on scheduling.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{MetricConfig, DEFAULT_IGNORE_ID};
use crate::error::{Error, Result};
use crate::ingest::{self, CloudEntry, Manifest, INSTANCE_MAGIC, LABEL_MAGIC};
use crate::stats::{accumulate_cloud, DatasetStats};

/// Instance sizes follow `min + floor((max - min + 1) * u^skew)` for uniform `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeLaw {
    pub min: u32,
    pub max: u32,
    pub skew: f64,
}

impl SizeLaw {
    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.random();
        let span = (self.max - self.min + 1) as f64;
        let offset = (span * u.powf(self.skew)).floor() as u32;
        (self.min + offset).min(self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Per category, probability that a point is mislabeled.
    pub miss_rate: Vec<f64>,
    /// Per category, the label a mislabeled point receives.
    pub confusion_target: Vec<u32>,
    /// When set, the `n` largest instances of every (cloud, category) are never
    /// corrupted and only the remaining instances see `miss_rate`.
    #[serde(default)]
    pub spare_largest: Option<usize>,
}

impl ErrorModel {
    /// No corruption at all.
    pub fn exact(num_categories: u32) -> Self {
        Self {
            miss_rate: vec![0.0; num_categories as usize],
            confusion_target: (0..num_categories).collect(),
            spare_largest: None,
        }
    }

    fn validate(&self, num_categories: u32) -> Result<()> {
        let c = num_categories as usize;
        if self.miss_rate.len() != c || self.confusion_target.len() != c {
            return Err(Error::Spec(format!(
                "error model has {} miss rates and {} confusion targets for {c} categories",
                self.miss_rate.len(),
                self.confusion_target.len()
            )));
        }
        if let Some(r) = self.miss_rate.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Spec(format!("miss rate {r} outside [0, 1]")));
        }
        if let Some(t) = self.confusion_target.iter().find(|&&t| t >= num_categories) {
            return Err(Error::Spec(format!(
                "confusion target {t} is not a category (have {num_categories})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub num_clouds: u32,
    pub num_categories: u32,
    /// Per category, probability of appearing in a given cloud.
    pub category_frequency: Vec<f64>,
    pub instance_size: SizeLaw,
    /// Instances per present category are uniform in `1..=max_instances`.
    pub max_instances: u32,
    pub error_model: ErrorModel,
}

impl SynthSpec {
    /// Uniform presence, uniform sizes in `[min, max]`, no errors.
    pub fn uniform(seed: u64, num_clouds: u32, num_categories: u32) -> Self {
        Self {
            seed,
            num_clouds,
            num_categories,
            category_frequency: vec![0.5; num_categories as usize],
            instance_size: SizeLaw {
                min: 10,
                max: 100,
                skew: 1.0,
            },
            max_instances: 3,
            error_model: ErrorModel::exact(num_categories),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clouds == 0 || self.num_categories == 0 {
            return Err(Error::Spec("need at least one cloud and one category".into()));
        }
        if self.category_frequency.len() != self.num_categories as usize {
            return Err(Error::Spec(format!(
                "{} category frequencies for {} categories",
                self.category_frequency.len(),
                self.num_categories
            )));
        }
        if let Some(p) = self.category_frequency.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Spec(format!("category frequency {p} outside [0, 1]")));
        }
        let law = &self.instance_size;
        if law.min == 0 || law.min > law.max {
            return Err(Error::Spec(format!(
                "instance size range [{}, {}] is invalid",
                law.min, law.max
            )));
        }
        if !(law.skew.is_finite() && law.skew >= 0.0) {
            return Err(Error::Spec(format!("skew exponent {} must be finite and >= 0", law.skew)));
        }
        if self.max_instances == 0 {
            return Err(Error::Spec("max_instances must be at least 1".into()));
        }
        self.error_model.validate(self.num_categories)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCloud {
    pub cloud_id: String,
    pub gt: Vec<u32>,
    pub instances: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthDataset {
    pub num_categories: u32,
    pub clouds: Vec<SynthCloud>,
}

fn cloud_rng(seed: u64, index: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
    rng.set_stream(stream);
    rng
}

/// Ground truth with instance ids; instance ids are unique within each cloud.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let width = spec.num_clouds.to_string().len();
    let clouds = (0..spec.num_clouds as usize)
        .map(|index| {
            let mut rng = cloud_rng(spec.seed, index, 0);
            let mut gt = Vec::new();
            let mut instances = Vec::new();
            let mut next_id = 0u32;
            for (category, &presence) in spec.category_frequency.iter().enumerate() {
                if !rng.random_bool(presence) {
                    continue;
                }
                let count = rng.random_range(1..=spec.max_instances);
                for _ in 0..count {
                    let size = spec.instance_size.sample(&mut rng) as usize;
                    gt.extend(std::iter::repeat_n(category as u32, size));
                    instances.extend(std::iter::repeat_n(next_id, size));
                    next_id += 1;
                }
            }
            SynthCloud {
                cloud_id: format!("cloud_{index:0width$}"),
                gt,
                instances,
            }
        })
        .collect();
    Ok(SynthDataset {
        num_categories: spec.num_categories,
        clouds,
    })
}

/// Predictions derived from the ground truth by per-point relabeling.
pub fn corrupt(dataset: &SynthDataset, model: &ErrorModel, seed: u64) -> Result<Vec<Vec<u32>>> {
    model.validate(dataset.num_categories)?;
    Ok(dataset
        .clouds
        .iter()
        .enumerate()
        .map(|(index, cloud)| {
            let mut rng = cloud_rng(seed, index, 1);
            let spared = model
                .spare_largest
                .map(|n| largest_instances(cloud, dataset.num_categories, n))
                .unwrap_or_default();
            cloud
                .gt
                .iter()
                .zip(&cloud.instances)
                .map(|(&label, &instance)| {
                    let c = label as usize;
                    if spared.binary_search(&instance).is_ok() {
                        return label;
                    }
                    if rng.random_bool(model.miss_rate[c]) {
                        model.confusion_target[c]
                    } else {
                        label
                    }
                })
                .collect()
        })
        .collect())
}

/// Ids of the `n` largest instances of each category, sorted. Ties go to the lower id.
fn largest_instances(cloud: &SynthCloud, num_categories: u32, n: usize) -> Vec<u32> {
    let mut sizes: std::collections::BTreeMap<(u32, u32), usize> = Default::default();
    for (&label, &instance) in cloud.gt.iter().zip(&cloud.instances) {
        *sizes.entry((label, instance)).or_default() += 1;
    }
    let mut spared = Vec::new();
    for category in 0..num_categories {
        let mut ranked: Vec<_> = sizes
            .iter()
            .filter(|((c, _), _)| *c == category)
            .map(|(&(_, id), &size)| (id, size))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        spared.extend(ranked.into_iter().take(n).map(|(id, _)| id));
    }
    spared.sort_unstable();
    spared
}

/// One cloud, one real category: a large instance that is always right and
/// `count` small instances that are always relabeled to the spare category 1.
pub fn bias_scenario(large: u32, small: u32, count: u32) -> (SynthDataset, ErrorModel) {
    let mut gt = Vec::new();
    let mut instances = Vec::new();
    for (id, size) in std::iter::once(large)
        .chain(std::iter::repeat_n(small, count as usize))
        .enumerate()
    {
        gt.extend(std::iter::repeat_n(0, size as usize));
        instances.extend(std::iter::repeat_n(id as u32, size as usize));
    }
    let dataset = SynthDataset {
        num_categories: 2,
        clouds: vec![SynthCloud {
            cloud_id: "scenario".into(),
            gt,
            instances,
        }],
    };
    let model = ErrorModel {
        miss_rate: vec![1.0, 0.0],
        confusion_target: vec![1, 1],
        spare_largest: Some(1),
    };
    (dataset, model)
}

/// Accumulate a synthetic dataset with its predictions. Empty clouds are skipped.
pub fn to_stats(dataset: &SynthDataset, predictions: &[Vec<u32>], config: &MetricConfig) -> Result<DatasetStats> {
    let mut stats = DatasetStats::new(dataset.num_categories, config.ignore_id)?;
    for (cloud, pred) in dataset.clouds.iter().zip(predictions) {
        if cloud.gt.is_empty() {
            continue;
        }
        stats.push(accumulate_cloud(
            &cloud.cloud_id,
            &cloud.gt,
            pred,
            Some(&cloud.instances),
            config,
            dataset.num_categories,
        )?)?;
    }
    Ok(stats)
}

/// Write binary label files and a manifest into `dir`; returns the manifest path.
pub fn emit(dataset: &SynthDataset, predictions: &[Vec<u32>], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_owned(),
        source,
    })?;
    let mut clouds = Vec::with_capacity(dataset.clouds.len());
    for (cloud, pred) in dataset.clouds.iter().zip(predictions) {
        let name = |suffix: &str| PathBuf::from(format!("{}.{suffix}.bin", cloud.cloud_id));
        let entry = CloudEntry {
            cloud_id: cloud.cloud_id.clone(),
            gt_path: name("gt"),
            pred_path: name("pred"),
            instance_path: Some(name("inst")),
        };
        ingest::write_labels_binary(dir.join(&entry.gt_path), LABEL_MAGIC, &cloud.gt)?;
        ingest::write_labels_binary(dir.join(&entry.pred_path), LABEL_MAGIC, pred)?;
        ingest::write_labels_binary(
            dir.join(entry.instance_path.as_ref().unwrap()),
            INSTANCE_MAGIC,
            &cloud.instances,
        )?;
        clouds.push(entry);
    }
    let manifest = Manifest {
        num_categories: dataset.num_categories,
        ignore_id: DEFAULT_IGNORE_ID,
        clouds,
        category_names: None,
    };
    let path = dir.join(format!("synth{}", ingest::MANIFEST_EXTENSION));
    ingest::write_manifest(&manifest, &path)?;
    Ok(path)
}
