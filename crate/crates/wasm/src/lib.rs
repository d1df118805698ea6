//! Browser bindings for the segeval demo page.
//!
//! Each operation has a plain Rust function returning JSON (tested natively)
//! and a thin `#[wasm_bindgen]` wrapper that turns errors into JS exceptions.

use segeval::metrics::{metric_level, overall_accuracy};
use segeval::report::{rank_methods, ValueTable};
use segeval::synth::{self, ErrorModel, SizeLaw, SynthSpec};
use segeval::{Level, MetricConfig, MetricKind};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Published summary tables, keyed by file stem.
pub const PUBLISHED_TABLES: [(&str, &str); 6] = [
    ("table1_scannet_miou", include_str!("../../../data/published/table1_scannet_miou.csv")),
    ("table2_s3dis_miou", include_str!("../../../data/published/table2_s3dis_miou.csv")),
    ("table3_semantic3d_miou", include_str!("../../../data/published/table3_semantic3d_miou.csv")),
    ("table4_scannet_macc", include_str!("../../../data/published/table4_scannet_macc.csv")),
    ("table5_s3dis_macc", include_str!("../../../data/published/table5_s3dis_macc.csv")),
    ("table6_semantic3d_macc", include_str!("../../../data/published/table6_semantic3d_macc.csv")),
];

/// Synthetic-dataset parameters exposed by the page.
#[derive(Debug, Clone, Copy)]
pub struct ExplorerParams {
    pub seed: u64,
    pub clouds: u32,
    pub categories: u32,
    pub frequency: f64,
    pub size_min: u32,
    pub size_max: u32,
    pub skew: f64,
    pub miss_rate: f64,
    pub spare_largest: u32,
}

#[derive(Serialize)]
struct Summaries {
    points: usize,
    clouds: usize,
    oa: Option<f64>,
    iou: Vec<(String, Option<f64>)>,
    acc: Vec<(String, Option<f64>)>,
}

fn summarize(dataset: &synth::SynthDataset, model: &ErrorModel, seed: u64) -> Result<Summaries, String> {
    let pred = synth::corrupt(dataset, model, seed).map_err(|e| e.to_string())?;
    let config = MetricConfig::default();
    let stats = synth::to_stats(dataset, &pred, &config).map_err(|e| e.to_string())?;
    let mut out = Summaries {
        points: dataset.clouds.iter().map(|c| c.gt.len()).sum(),
        clouds: stats.clouds().len(),
        oa: overall_accuracy(&stats).ok(),
        iou: Vec::new(),
        acc: Vec::new(),
    };
    for kind in [MetricKind::IoU, MetricKind::Acc] {
        for level in Level::ALL {
            let r = metric_level(kind, level, &stats, &config).map_err(|e| e.to_string())?;
            let entry = (segeval::metrics::summary_name(kind, level), r.summary.get());
            match kind {
                MetricKind::IoU => out.iou.push(entry),
                MetricKind::Acc => out.acc.push(entry),
            }
        }
    }
    Ok(out)
}

/// One large instance predicted perfectly, `count` small ones entirely missed.
pub fn bias_json(large: u32, small: u32, count: u32) -> Result<String, String> {
    if large == 0 || small == 0 || count == 0 {
        return Err("sizes and count must be positive".into());
    }
    let (data, model) = synth::bias_scenario(large, small, count);
    let s = summarize(&data, &model, 0)?;
    serde_json::to_string(&s).map_err(|e| e.to_string())
}

pub fn explore_json(p: ExplorerParams) -> Result<String, String> {
    let c = p.categories as usize;
    let spec = SynthSpec {
        seed: p.seed,
        num_clouds: p.clouds,
        num_categories: p.categories,
        category_frequency: vec![p.frequency; c],
        instance_size: SizeLaw {
            min: p.size_min,
            max: p.size_max,
            skew: p.skew,
        },
        max_instances: 4,
        error_model: ErrorModel {
            miss_rate: vec![p.miss_rate; c],
            confusion_target: (0..p.categories).map(|k| (k + 1) % p.categories).collect(),
            spare_largest: (p.spare_largest > 0).then_some(p.spare_largest as usize),
        },
    };
    spec.validate().map_err(|e| e.to_string())?;
    let points = p.clouds as u64 * p.categories as u64 * 4 * p.size_max as u64;
    if points > 20_000_000 {
        return Err(format!("up to {points} points requested; the demo caps at 20000000"));
    }
    let data = synth::generate(&spec).map_err(|e| e.to_string())?;
    let s = summarize(&data, &spec.error_model, spec.seed)?;
    serde_json::to_string(&s).map_err(|e| e.to_string())
}

/// Rank methods in a CSV value table by two summary columns.
pub fn rank_json(csv: &str, metric_a: &str, metric_b: &str) -> Result<String, String> {
    let table = ValueTable::parse_csv(csv.as_bytes()).map_err(|e| e.to_string())?;
    let cmp = rank_methods(&table, metric_a, metric_b).map_err(|e| e.to_string())?;
    serde_json::to_string(&cmp).map_err(|e| e.to_string())
}

pub fn published_table(name: &str) -> Option<&'static str> {
    PUBLISHED_TABLES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[wasm_bindgen]
pub fn bias(large: u32, small: u32, count: u32) -> Result<String, JsError> {
    bias_json(large, small, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn explore(
    seed: u32,
    clouds: u32,
    categories: u32,
    frequency: f64,
    size_min: u32,
    size_max: u32,
    skew: f64,
    miss_rate: f64,
    spare_largest: u32,
) -> Result<String, JsError> {
    let p = ExplorerParams {
        seed: seed as u64,
        clouds,
        categories,
        frequency,
        size_min,
        size_max,
        skew,
        miss_rate,
        spare_largest,
    };
    explore_json(p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rank(csv: &str, metric_a: &str, metric_b: &str) -> Result<String, JsError> {
    rank_json(csv, metric_a, metric_b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn table_names() -> String {
    serde_json::to_string(&PUBLISHED_TABLES.map(|(n, _)| n)).unwrap_or_default()
}

#[wasm_bindgen]
pub fn table_csv(name: &str) -> Result<String, JsError> {
    published_table(name)
        .map(str::to_owned)
        .ok_or_else(|| JsError::new(&format!("no table named {name}")))
}
