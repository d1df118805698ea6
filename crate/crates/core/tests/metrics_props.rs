mod support;

use proptest::prelude::*;
use segeval::metrics::{self, metric_level, overall_accuracy};
use segeval::{Level, MetricConfig, MetricKind};
use support::{compare_with_oracle, oracle, random_dataset, toy_dataset, RandomShape};

const KINDS: [MetricKind; 2] = [MetricKind::IoU, MetricKind::Acc];

#[test]
fn toy_matches_frozen_values() {
    let data = toy_dataset();
    let config = MetricConfig::default();
    let expected = oracle(&data, &config);
    // Frozen from the oracle; the closed forms are in the comments.
    let iou = &expected.levels[0];
    assert!((iou[0].summary.unwrap() - 0.5636363636363636).abs() < 1e-15); // (8/11 + 2/5) / 2
    assert!((iou[1].summary.unwrap() - 0.6916666666666667).abs() < 1e-15); // ((4/6 + 1/2) / 2 + 4/5) / 2
    assert!((iou[2].summary.unwrap() - 0.6166666666666667).abs() < 1e-15); // ((4/6 + 4/5) / 2 + 1/2) / 2
    assert!((iou[3].summary.unwrap() - 0.65).abs() < 1e-15); // (4/5 + (1 + 0) / 2) / 2
    assert!((expected.oa.unwrap() - 10.0 / 13.0).abs() < 1e-15);
    let acc = &expected.levels[1];
    assert!((acc[0].per_category[0].unwrap() - 10.0 / 13.0).abs() < 1e-15);
    assert!((acc[0].per_category[1].unwrap() - 10.0 / 13.0).abs() < 1e-15);
    assert_eq!(iou[1].per_cloud.as_ref().unwrap()[1], Some(0.8));

    compare_with_oracle(&data, &config, 1e-12).unwrap();
}

#[test]
fn toy_union_absent_differs_in_cloud_two() {
    let data = toy_dataset();
    let config = MetricConfig {
        null_mode: segeval::NullMode::UnionAbsent,
        ..MetricConfig::default()
    };
    let stats = data.stats(&config);
    let r = metric_level(MetricKind::IoU, Level::CloudFirst, &stats, &config).unwrap();
    // cloud 2 now averages A=0.8 with B=0
    assert_eq!(r.per_cloud.unwrap()[1].get(), Some(0.4));
    compare_with_oracle(&data, &config, 1e-12).unwrap();
}

fn single_cloud_copy(data: &support::RawDataset) -> support::RawDataset {
    let mut out = data.clone();
    out.clouds.truncate(1);
    out
}

fn summaries(data: &support::RawDataset, config: &MetricConfig) -> Vec<Option<f64>> {
    let stats = data.stats(config);
    let mut out = vec![overall_accuracy(&stats).ok()];
    for kind in KINDS {
        for level in Level::ALL {
            out.push(metric_level(kind, level, &stats, config).unwrap().summary.get());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_oracle(seed in any::<u64>()) {
        let (data, config) = random_dataset(seed, RandomShape::default());
        prop_assert!(compare_with_oracle(&data, &config, 1e-12).is_ok(),
            "{:?}", compare_with_oracle(&data, &config, 1e-12));
    }

    #[test]
    fn values_stay_in_unit_interval(seed in any::<u64>()) {
        let (data, config) = random_dataset(seed, RandomShape::default());
        let stats = data.stats(&config);
        for kind in KINDS {
            for level in Level::ALL {
                let r = metric_level(kind, level, &stats, &config).unwrap();
                let all = r.per_category.iter().chain(r.per_cloud.iter().flatten()).chain([&r.summary]);
                for v in all.filter_map(|v| v.get()) {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn perfect_predictions_score_one(seed in any::<u64>()) {
        let shape = RandomShape { accuracy: Some(1.0), ..RandomShape::default() };
        let (data, config) = random_dataset(seed, shape);
        let stats = data.stats(&config);
        for kind in KINDS {
            for level in Level::ALL {
                let r = metric_level(kind, level, &stats, &config).unwrap();
                for v in r.per_category.iter().chain(r.per_cloud.iter().flatten()).chain([&r.summary]) {
                    prop_assert!(v.get().is_none_or(|x| x == 1.0), "{kind:?} {level:?} {v}");
                }
            }
        }
        if let Ok(oa) = overall_accuracy(&stats) {
            prop_assert_eq!(oa, 1.0);
        }
    }

    #[test]
    fn one_cloud_collapses_orders(seed in any::<u64>()) {
        let (data, config) = random_dataset(seed, RandomShape::default());
        let data = single_cloud_copy(&data);
        let stats = data.stats(&config);
        for kind in KINDS {
            let p = metric_level(kind, Level::CloudFirst, &stats, &config).unwrap().summary.get();
            let c = metric_level(kind, Level::CategoryFirst, &stats, &config).unwrap().summary.get();
            support::assert_close(p, c, 1e-12, "P vs C");
        }
    }

    #[test]
    fn single_instance_matches_category_first(seed in any::<u64>()) {
        let shape = RandomShape { single_instance: true, ..RandomShape::default() };
        let (data, config) = random_dataset(seed, shape);
        let stats = data.stats(&config);
        // With instances covering every ground-truth point, only IoU and
        // cloud-level-TN accuracy collapse exactly.
        let kinds: &[MetricKind] = if config.instance_tn_mode == segeval::InstanceTnMode::CloudLevel {
            &KINDS
        } else {
            &KINDS[..1]
        };
        for &kind in kinds {
            let config = MetricConfig { null_mode: segeval::NullMode::GtAbsent, ..config };
            let i = metric_level(kind, Level::Instance, &stats, &config).unwrap();
            let c = metric_level(kind, Level::CategoryFirst, &stats, &config).unwrap();
            for (a, b) in i.per_category.iter().zip(&c.per_category) {
                support::assert_close(a.get(), b.get(), 1e-12, "instance vs category-first");
            }
        }
    }

    #[test]
    fn duplicating_clouds_changes_nothing(seed in any::<u64>()) {
        let (data, config) = random_dataset(seed, RandomShape::default());
        let mut doubled = data.clone();
        for cloud in &data.clouds {
            let mut copy = cloud.clone();
            copy.id = format!("{}-copy", cloud.id);
            doubled.clouds.push(copy);
        }
        for (a, b) in summaries(&data, &config).into_iter().zip(summaries(&doubled, &config)) {
            support::assert_close(b, a, 1e-12, "duplicated");
        }
    }

    #[test]
    fn fp_shares_are_conserved(seed in any::<u64>()) {
        let (data, config) = random_dataset(seed, RandomShape::default());
        let stats = data.stats(&config);
        for cloud in stats.clouds() {
            for (cell, instances) in cloud.cells.iter().zip(&cloud.instances) {
                if instances.is_empty() {
                    continue;
                }
                let shares = metrics::allocate_fp(instances, cell.fp).unwrap();
                let total: f64 = shares.iter().sum();
                let fp = cell.fp as f64;
                prop_assert!((total - fp).abs() <= 1e-9 * fp.max(1.0));
            }
        }
    }
}

#[test]
fn bias_scenario_closed_form() {
    // one instance of 1000 points right, four of 10 points relabeled, no FP for category 0
    let mut gt = vec![0u32; 1040];
    let mut pred = vec![0u32; 1040];
    let mut inst = vec![0u32; 1040];
    for (k, chunk) in (1000..1040).collect::<Vec<_>>().chunks(10).enumerate() {
        for &i in chunk {
            pred[i] = 1;
            inst[i] = k as u32 + 1;
        }
    }
    gt.truncate(1040);
    let data = support::RawDataset {
        num_categories: 2,
        clouds: vec![support::RawCloud { id: "s".into(), gt, pred, inst: Some(inst) }],
    };
    let config = MetricConfig::default();
    let o = oracle(&data, &config);
    assert!((o.levels[0][0].summary.unwrap() - 1000.0 / 1040.0).abs() < 1e-15);
    assert!((o.levels[0][3].summary.unwrap() - 0.2).abs() < 1e-15);
    compare_with_oracle(&data, &config, 1e-12).unwrap();
}
