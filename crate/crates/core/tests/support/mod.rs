//! Test-only reference implementation and dataset fixtures.
//!
//! The oracle works from raw per-point arrays and evaluates every formula
//! literally: each count is a sum of per-point indicators, each instance is
//! found by scanning points, and each mean is written out in full. It shares
//! nothing with the library except the configuration enums.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use segeval::stats::{accumulate_cloud, DatasetStats, NO_INSTANCE};
use segeval::{AccMode, InstanceTnMode, MetricConfig, NullMode};

#[derive(Debug, Clone)]
pub struct RawCloud {
    pub id: String,
    pub gt: Vec<u32>,
    pub pred: Vec<u32>,
    pub inst: Option<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct RawDataset {
    pub num_categories: u32,
    pub clouds: Vec<RawCloud>,
}

impl RawDataset {
    pub fn stats(&self, config: &MetricConfig) -> DatasetStats {
        let mut stats = DatasetStats::new(self.num_categories, config.ignore_id).unwrap();
        for cloud in &self.clouds {
            let cs = accumulate_cloud(
                &cloud.id,
                &cloud.gt,
                &cloud.pred,
                cloud.inst.as_deref(),
                config,
                self.num_categories,
            )
            .unwrap();
            stats.push(cs).unwrap();
        }
        stats
    }
}

/// Per-category, optional per-cloud and summary values of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleLevel {
    pub per_category: Vec<Option<f64>>,
    pub per_cloud: Option<Vec<Option<f64>>>,
    pub summary: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub oa: Option<f64>,
    /// Index 0 = IoU, 1 = Acc; then D, P, C, I.
    pub levels: [[OracleLevel; 4]; 2],
    /// Every allocated FP share, grouped per (cloud, category) with its FP count.
    pub fp_shares: Vec<(u64, Vec<f64>)>,
}

#[derive(Clone, Copy)]
struct Counts {
    tp: f64,
    fp: f64,
    fn_: f64,
    tn: f64,
}

pub fn oracle(data: &RawDataset, config: &MetricConfig) -> OracleResult {
    let c_count = data.num_categories as usize;
    let ignore = config.ignore_id;
    let mut clouds: Vec<&RawCloud> = data.clouds.iter().collect();
    clouds.sort_by(|a, b| a.id.cmp(&b.id));

    let valid = |cloud: &RawCloud, i: usize| cloud.gt[i] != ignore;
    let count = |cloud: &RawCloud, pred: &dyn Fn(u32, u32) -> bool| -> f64 {
        (0..cloud.gt.len())
            .filter(|&i| valid(cloud, i) && pred(cloud.gt[i], cloud.pred[i]))
            .count() as f64
    };
    let counts = |cloud: &RawCloud, c: u32| Counts {
        tp: count(cloud, &|g, p| g == c && p == c),
        fp: count(cloud, &|g, p| g != c && p == c),
        fn_: count(cloud, &|g, p| g == c && p != c),
        tn: count(cloud, &|g, p| g != c && p != c),
    };
    let cells: Vec<Vec<Counts>> = clouds
        .iter()
        .map(|cloud| (0..c_count as u32).map(|c| counts(cloud, c)).collect())
        .collect();

    let is_null = |k: &Counts| match config.null_mode {
        NullMode::GtAbsent => k.tp + k.fn_ == 0.0,
        NullMode::UnionAbsent => k.tp + k.fp + k.fn_ == 0.0,
    };
    let value = |kind: usize, k: &Counts| -> Option<f64> {
        if is_null(k) {
            return None;
        }
        let (num, den) = match (kind, config.acc_mode) {
            (0, _) => (k.tp, k.tp + k.fp + k.fn_),
            (_, AccMode::Paper) => (k.tp + k.tn, k.tp + k.fp + k.fn_ + k.tn),
            (_, AccMode::Recall) => (k.tp, k.tp + k.fn_),
        };
        // 0/0 is NULL (only reachable with union-absent + recall)
        (den != 0.0).then(|| num / den)
    };
    let indicator_mean = |values: &[Option<f64>]| -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for v in values {
            let ind = if v.is_some() { 1.0 } else { 0.0 };
            num += ind * v.unwrap_or(0.0);
            den += ind;
        }
        if den == 0.0 {
            None
        } else {
            Some(num / den)
        }
    };

    // Instance discovery: (cloud index, category) -> [(id, tp, fn)] ascending id.
    let mut instances: Vec<Vec<Vec<(u32, f64, f64)>>> = Vec::new();
    for cloud in &clouds {
        let mut per_cat = vec![Vec::new(); c_count];
        if let Some(inst) = &cloud.inst {
            for c in 0..c_count as u32 {
                let mut ids: Vec<u32> = (0..cloud.gt.len())
                    .filter(|&i| valid(cloud, i) && cloud.gt[i] == c && inst[i] != NO_INSTANCE)
                    .map(|i| inst[i])
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                for id in ids {
                    let members: Vec<usize> = (0..cloud.gt.len())
                        .filter(|&i| valid(cloud, i) && cloud.gt[i] == c && inst[i] == id)
                        .collect();
                    let tp = members.iter().filter(|&&i| cloud.pred[i] == c).count() as f64;
                    let fn_ = members.iter().filter(|&&i| cloud.pred[i] != c).count() as f64;
                    per_cat[c as usize].push((id, tp, fn_));
                }
            }
        }
        instances.push(per_cat);
    }

    let mut fp_shares = Vec::new();
    for (p, per_cat) in instances.iter().enumerate() {
        for (c, list) in per_cat.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let total: f64 = list.iter().map(|(_, tp, fn_)| tp + fn_).sum();
            let fp = cells[p][c].fp;
            let shares = list.iter().map(|(_, tp, fn_)| (tp + fn_) / total * fp).collect();
            fp_shares.push((fp as u64, shares));
        }
    }

    let level_set = |kind: usize| -> [OracleLevel; 4] {
        // dataset level
        let d_per_cat: Vec<Option<f64>> = (0..c_count)
            .map(|c| {
                let mut sum = Counts { tp: 0.0, fp: 0.0, fn_: 0.0, tn: 0.0 };
                for cloud_cells in &cells {
                    let k = cloud_cells[c];
                    sum.tp += k.tp;
                    sum.fp += k.fp;
                    sum.fn_ += k.fn_;
                    sum.tn += k.tn;
                }
                value(kind, &sum)
            })
            .collect();
        let dataset = OracleLevel {
            summary: indicator_mean(&d_per_cat),
            per_category: d_per_cat,
            per_cloud: None,
        };

        // pc[p][c]
        let pc: Vec<Vec<Option<f64>>> = cells
            .iter()
            .map(|row| row.iter().map(|k| value(kind, k)).collect())
            .collect();
        let per_cloud: Vec<Option<f64>> = pc.iter().map(|row| indicator_mean(row)).collect();
        let c_per_cat: Vec<Option<f64>> = (0..c_count)
            .map(|c| indicator_mean(&pc.iter().map(|row| row[c]).collect::<Vec<_>>()))
            .collect();
        let cloud_first = OracleLevel {
            summary: indicator_mean(&per_cloud),
            per_category: c_per_cat.clone(),
            per_cloud: Some(per_cloud),
        };
        let category_first = OracleLevel {
            summary: indicator_mean(&c_per_cat),
            per_category: c_per_cat,
            per_cloud: None,
        };

        let i_per_cat: Vec<Option<f64>> = (0..c_count)
            .map(|c| {
                let mut num = 0.0;
                let mut den = 0.0;
                for (p, per_cat) in instances.iter().enumerate() {
                    let list = &per_cat[c];
                    let total_size: f64 = list.iter().map(|(_, tp, fn_)| tp + fn_).sum();
                    let k = cells[p][c];
                    for &(_, tp, fn_) in list {
                        let size = tp + fn_;
                        let fp_i = size / total_size * k.fp;
                        let tn_i = match config.instance_tn_mode {
                            InstanceTnMode::CloudLevel => k.tn,
                            InstanceTnMode::Allocated => size / total_size * k.tn,
                        };
                        let v = match (kind, config.acc_mode) {
                            (0, _) => tp / (tp + fn_ + fp_i),
                            (_, AccMode::Paper) => (tp + tn_i) / (tp + fn_ + tn_i + fp_i),
                            (_, AccMode::Recall) => tp / (tp + fn_),
                        };
                        num += v;
                        den += 1.0;
                    }
                }
                if den == 0.0 {
                    None
                } else {
                    Some(num / den)
                }
            })
            .collect();
        let instance = OracleLevel {
            summary: indicator_mean(&i_per_cat),
            per_category: i_per_cat,
            per_cloud: None,
        };
        [dataset, cloud_first, category_first, instance]
    };

    let correct: usize = clouds
        .iter()
        .map(|cl| (0..cl.gt.len()).filter(|&i| valid(cl, i) && cl.gt[i] == cl.pred[i]).count())
        .sum();
    let total: usize = clouds
        .iter()
        .map(|cl| (0..cl.gt.len()).filter(|&i| valid(cl, i)).count())
        .sum();

    OracleResult {
        oa: (total > 0).then(|| correct as f64 / total as f64),
        levels: [level_set(0), level_set(1)],
        fp_shares,
    }
}

/// Two clouds over categories A=0 and B=1 with hand-checked counts.
pub fn toy_dataset() -> RawDataset {
    let x = NO_INSTANCE;
    RawDataset {
        num_categories: 2,
        clouds: vec![
            RawCloud {
                id: "1".into(),
                gt: vec![0, 0, 0, 0, 1, 1, 1, 1],
                pred: vec![0, 0, 0, 0, 1, 1, 0, 0],
                inst: Some(vec![x, x, x, x, 0, 0, 1, 1]),
            },
            RawCloud {
                id: "2".into(),
                gt: vec![0; 5],
                pred: vec![0, 0, 0, 0, 1],
                inst: Some(vec![2; 5]),
            },
        ],
    }
}

pub fn random_config(rng: &mut impl Rng, num_categories: u32) -> MetricConfig {
    MetricConfig {
        ignore_id: if rng.random_bool(0.5) { num_categories } else { u32::MAX },
        null_mode: if rng.random_bool(0.5) { NullMode::GtAbsent } else { NullMode::UnionAbsent },
        acc_mode: if rng.random_bool(0.5) { AccMode::Paper } else { AccMode::Recall },
        instance_tn_mode: if rng.random_bool(0.5) {
            InstanceTnMode::CloudLevel
        } else {
            InstanceTnMode::Allocated
        },
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RandomShape {
    pub max_clouds: usize,
    pub max_categories: u32,
    pub max_points: usize,
    pub max_instances: u32,
    /// Probability that a point is predicted correctly; `None` draws one per dataset.
    pub accuracy: Option<f64>,
    /// Emit exactly one instance per (cloud, category), covering every point.
    pub single_instance: bool,
}

impl Default for RandomShape {
    fn default() -> Self {
        Self {
            max_clouds: 5,
            max_categories: 4,
            max_points: 200,
            max_instances: 3,
            accuracy: None,
            single_instance: false,
        }
    }
}

/// Random small dataset plus a matching random config.
pub fn random_dataset(seed: u64, shape: RandomShape) -> (RawDataset, MetricConfig) {
    let mut rng = StdRng::seed_from_u64(seed);
    let num_categories = rng.random_range(1..=shape.max_categories);
    let config = random_config(&mut rng, num_categories);
    let num_clouds = rng.random_range(1..=shape.max_clouds);
    let accuracy = shape.accuracy.unwrap_or_else(|| rng.random_range(0.0..=1.0));
    let skew: f64 = rng.random_range(0.3..3.0);
    let ignore_rate = if rng.random_bool(0.5) { 0.05 } else { 0.0 };

    let clouds = (0..num_clouds)
        .map(|p| {
            let n = rng.random_range(0..=shape.max_points);
            // Biased category draw so some categories are rare or absent.
            let gt: Vec<u32> = (0..n)
                .map(|_| {
                    if ignore_rate > 0.0 && rng.random_bool(ignore_rate) {
                        config.ignore_id
                    } else {
                        let u: f64 = rng.random();
                        ((u.powf(skew) * num_categories as f64) as u32).min(num_categories - 1)
                    }
                })
                .collect();
            let pred: Vec<u32> = gt
                .iter()
                .map(|&g| {
                    if g != config.ignore_id && rng.random_bool(accuracy) {
                        g
                    } else {
                        rng.random_range(0..num_categories)
                    }
                })
                .collect();
            let with_instances = shape.single_instance || rng.random_bool(0.8);
            let partial = !shape.single_instance && rng.random_bool(0.2);
            let inst = with_instances.then(|| {
                let per_cat: Vec<u32> = (0..num_categories)
                    .map(|_| {
                        if shape.single_instance {
                            1
                        } else {
                            rng.random_range(0..=shape.max_instances)
                        }
                    })
                    .collect();
                gt.iter()
                    .map(|&g| {
                        if g == config.ignore_id {
                            return NO_INSTANCE;
                        }
                        let k = per_cat[g as usize];
                        if k == 0 || (partial && rng.random_bool(0.1)) {
                            NO_INSTANCE
                        } else {
                            // ids repeat across categories on purpose
                            10 + rng.random_range(0..k)
                        }
                    })
                    .collect()
            });
            RawCloud {
                id: format!("cloud-{p}"),
                gt,
                pred,
                inst,
            }
        })
        .collect();
    (
        RawDataset {
            num_categories,
            clouds,
        },
        config,
    )
}

pub fn assert_close(actual: Option<f64>, expected: Option<f64>, tol: f64, what: &str) {
    match (actual, expected) {
        (None, None) => {}
        (Some(a), Some(e)) => assert!((a - e).abs() <= tol, "{what}: {a} vs oracle {e}"),
        _ => panic!("{what}: {actual:?} vs oracle {expected:?}"),
    }
}

fn kind_index(kind: segeval::MetricKind) -> usize {
    match kind {
        segeval::MetricKind::IoU => 0,
        segeval::MetricKind::Acc => 1,
    }
}

fn level_index(level: segeval::Level) -> usize {
    match level {
        segeval::Level::Dataset => 0,
        segeval::Level::CloudFirst => 1,
        segeval::Level::CategoryFirst => 2,
        segeval::Level::Instance => 3,
    }
}

/// Check every value the library produces against the oracle; returns the number of values checked.
pub fn compare_with_oracle(data: &RawDataset, config: &MetricConfig, tol: f64) -> Result<usize, String> {
    use segeval::metrics::{metric_level, overall_accuracy};
    use segeval::{Level, MetricKind};

    let stats = data.stats(config);
    let expected = oracle(data, config);
    let mut checked = 0;
    let close = |a: Option<f64>, e: Option<f64>, what: String| -> Result<(), String> {
        match (a, e) {
            (None, None) => Ok(()),
            (Some(a), Some(e)) if (a - e).abs() <= tol => Ok(()),
            _ => Err(format!("{what}: {a:?} vs oracle {e:?}")),
        }
    };

    close(overall_accuracy(&stats).ok(), expected.oa, "OA".into())?;
    checked += 1;
    for kind in [MetricKind::IoU, MetricKind::Acc] {
        for level in Level::ALL {
            let got = metric_level(kind, level, &stats, config).map_err(|e| e.to_string())?;
            let want = &expected.levels[kind_index(kind)][level_index(level)];
            let name = segeval::metrics::summary_name(kind, level);
            close(got.summary.get(), want.summary, format!("{name} summary"))?;
            checked += 1;
            if got.per_category.len() != want.per_category.len() {
                return Err(format!("{name}: per-category length"));
            }
            for (c, (g, w)) in got.per_category.iter().zip(&want.per_category).enumerate() {
                close(g.get(), *w, format!("{name} category {c}"))?;
                checked += 1;
            }
            match (&got.per_cloud, &want.per_cloud) {
                (None, None) => {}
                (Some(g), Some(w)) if g.len() == w.len() => {
                    for (p, (g, w)) in g.iter().zip(w).enumerate() {
                        close(g.get(), *w, format!("{name} cloud {p}"))?;
                        checked += 1;
                    }
                }
                _ => return Err(format!("{name}: per-cloud shape")),
            }
        }
    }
    Ok(checked)
}
