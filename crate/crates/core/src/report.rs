//! Per-method reports, cross-method rank comparison and report serialization.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::MetricConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, Diagnostics, Level, LevelResult, MetricKind, MetricValue};
use crate::stats::DatasetStats;

/// How ranks are assigned and compared; echoed into every comparison.
pub const TIE_POLICY: &str = "ranks by descending value, tied values share the average rank; Kendall tau-b";

/// Column order of CSV and table output.
pub const SUMMARY_COLUMNS: [&str; 9] = [
    "OA", "mIoU^D", "mIoU^P", "mIoU^C", "mIoU^I", "mAcc^D", "mAcc^P", "mAcc^C", "mAcc^I",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelSet {
    pub dataset: LevelResult,
    pub cloud_first: LevelResult,
    pub category_first: LevelResult,
    pub instance: LevelResult,
}

impl LevelSet {
    pub fn get(&self, level: Level) -> &LevelResult {
        match level {
            Level::Dataset => &self.dataset,
            Level::CloudFirst => &self.cloud_first,
            Level::CategoryFirst => &self.category_first,
            Level::Instance => &self.instance,
        }
    }

    fn compute(kind: MetricKind, stats: &DatasetStats, config: &MetricConfig) -> Result<Self> {
        Ok(Self {
            dataset: metrics::metric_dataset_level(kind, stats, config)?,
            cloud_first: metrics::metric_cloud_first(kind, stats, config)?,
            category_first: metrics::metric_category_first(kind, stats, config)?,
            instance: metrics::metric_instance_level(kind, stats, config)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub config_fingerprint: String,
    pub config: MetricConfig,
    pub num_categories: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_names: Option<Vec<String>>,
    pub cloud_ids: Vec<String>,
    pub oa: f64,
    pub iou: LevelSet,
    pub acc: LevelSet,
    pub diagnostics: Diagnostics,
}

impl MethodReport {
    pub fn levels(&self, kind: MetricKind) -> &LevelSet {
        match kind {
            MetricKind::IoU => &self.iou,
            MetricKind::Acc => &self.acc,
        }
    }

    /// Summary by column name (`OA`, `mIoU^D`, ... `mAcc^I`).
    pub fn summary(&self, name: &str) -> Option<MetricValue> {
        if name == "OA" {
            return Some(MetricValue::new(self.oa));
        }
        let (prefix, suffix) = name.split_once('^')?;
        let kind = [MetricKind::IoU, MetricKind::Acc]
            .into_iter()
            .find(|k| k.prefix() == prefix)?;
        let level = Level::ALL.into_iter().find(|l| l.suffix() == suffix)?;
        Some(self.levels(kind).get(level).summary)
    }

    pub fn with_category_names(mut self, names: Option<Vec<String>>) -> Self {
        self.category_names = names;
        self
    }
}

/// Evaluate every metric level for one method.
pub fn build_report(method: &str, stats: &DatasetStats, config: &MetricConfig) -> Result<MethodReport> {
    let config = MetricConfig {
        ignore_id: stats.ignore_id(),
        ..*config
    };
    let diagnostics = metrics::diagnostics(stats, &config);
    if !stats.has_instances() {
        log::warn!("{method}: no instance annotations, instance-level metrics are NULL");
    }
    if diagnostics.null_categories > 0 {
        log::warn!(
            "{method}: {} categories absent from the whole dataset are skipped in dataset-level means",
            diagnostics.null_categories
        );
    }
    Ok(MethodReport {
        method: method.to_owned(),
        config_fingerprint: config.fingerprint(),
        config,
        num_categories: stats.num_categories(),
        category_names: None,
        cloud_ids: stats.clouds().iter().map(|c| c.cloud_id.clone()).collect(),
        oa: metrics::overall_accuracy(stats)?,
        iou: LevelSet::compute(MetricKind::IoU, stats, &config)?,
        acc: LevelSet::compute(MetricKind::Acc, stats, &config)?,
        diagnostics,
    })
}

fn check_fingerprints(reports: &[MethodReport]) -> Result<()> {
    if let Some(first) = reports.first() {
        if let Some(other) = reports.iter().find(|r| r.config_fingerprint != first.config_fingerprint) {
            return Err(Error::ConfigMismatch(format!(
                "{:?} was evaluated with {:?} but {:?} with {:?}",
                first.method, first.config_fingerprint, other.method, other.config_fingerprint
            )));
        }
    }
    Ok(())
}

/// Method-by-metric values, either from reports or from a published table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl ValueTable {
    pub fn from_reports(reports: &[MethodReport]) -> Result<Self> {
        check_fingerprints(reports)?;
        Ok(Self {
            columns: SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows: reports
                .iter()
                .map(|r| {
                    let values = SUMMARY_COLUMNS
                        .iter()
                        .map(|c| r.summary(c).and_then(MetricValue::get))
                        .collect();
                    (r.method.clone(), values)
                })
                .collect(),
        })
    }

    /// CSV with a header row; the first column names the method, `NULL` marks missing values.
    pub fn parse_csv(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let comparison = |e: csv::Error| Error::Comparison(format!("reading value table: {e}"));
        let header = rdr.headers().map_err(comparison)?.clone();
        if header.len() < 2 {
            return Err(Error::Comparison("value table needs a method column and at least one metric".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(comparison)?;
            let method = record[0].to_owned();
            let values = record
                .iter()
                .skip(1)
                .map(|cell| match cell {
                    "" | "NULL" => Ok(None),
                    s => s.parse::<f64>().map(Some).map_err(|_| {
                        Error::Comparison(format!("row {} ({method}): {s:?} is not a number", line + 2))
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((method, values));
        }
        Ok(Self { columns, rows })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(file)
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Comparison(format!("metric {name:?} is not in the table")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: String,
    pub value_a: f64,
    pub value_b: f64,
    pub rank_a: f64,
    pub rank_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub metric_a: String,
    pub metric_b: String,
    pub entries: Vec<RankEntry>,
    pub kendall_tau: f64,
    pub discordant_pairs: Vec<(String, String)>,
    pub top_a: Vec<String>,
    pub top_b: Vec<String>,
    pub tie_policy: String,
}

/// 1-based ranks by descending value; tied values share their average rank.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Tie-adjusted Kendall rank correlation (tau-b).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Comparison(format!(
            "rankings have different lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Comparison("need at least two ranked items".into()));
    }
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            match (da, db) {
                (0, 0) => {
                    ties_a += 1;
                    ties_b += 1;
                }
                (0, _) => ties_a += 1,
                (_, 0) => ties_b += 1,
                _ if da == db => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let pairs = (a.len() * (a.len() - 1) / 2) as i64;
    let denom = (((pairs - ties_a) * (pairs - ties_b)) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Comparison("tau is undefined when one ranking is constant".into()));
    }
    Ok(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}

/// Compare how two metrics order the same methods.
pub fn rank_methods(table: &ValueTable, metric_a: &str, metric_b: &str) -> Result<RankComparison> {
    if table.rows.len() < 2 {
        return Err(Error::Comparison("need at least two methods".into()));
    }
    let (ia, ib) = (table.column(metric_a)?, table.column(metric_b)?);
    let mut methods = Vec::with_capacity(table.rows.len());
    let (mut va, mut vb) = (Vec::new(), Vec::new());
    for (method, values) in &table.rows {
        for (index, name) in [(ia, metric_a), (ib, metric_b)] {
            if values.get(index).copied().flatten().is_none() {
                return Err(Error::Comparison(format!("method {method:?} has no value for {name}")));
            }
        }
        methods.push(method.clone());
        va.push(values[ia].unwrap());
        vb.push(values[ib].unwrap());
    }
    let (ra, rb) = (rank_descending(&va), rank_descending(&vb));
    let kendall_tau = kendall_tau(&ra, &rb)?;

    let mut discordant_pairs = Vec::new();
    for i in 0..methods.len() {
        for j in i + 1..methods.len() {
            let da = ra[i].total_cmp(&ra[j]) as i8;
            let db = rb[i].total_cmp(&rb[j]) as i8;
            if da * db < 0 {
                discordant_pairs.push((methods[i].clone(), methods[j].clone()));
            }
        }
    }
    let top = |ranks: &[f64]| -> Vec<String> {
        let best = ranks.iter().copied().fold(f64::INFINITY, f64::min);
        methods
            .iter()
            .zip(ranks)
            .filter(|(_, &r)| r == best)
            .map(|(m, _)| m.clone())
            .collect()
    };
    let (top_a, top_b) = (top(&ra), top(&rb));
    let entries = methods
        .iter()
        .enumerate()
        .map(|(i, m)| RankEntry {
            method: m.clone(),
            value_a: va[i],
            value_b: vb[i],
            rank_a: ra[i],
            rank_b: rb[i],
        })
        .collect();
    Ok(RankComparison {
        metric_a: metric_a.to_owned(),
        metric_b: metric_b.to_owned(),
        entries,
        kendall_tau,
        discordant_pairs,
        top_a,
        top_b,
        tie_policy: TIE_POLICY.to_owned(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(format!("unknown format {other:?}, expected json, csv or table")),
        }
    }
}

fn percent(value: Option<MetricValue>) -> String {
    match value.and_then(MetricValue::get) {
        Some(v) => format!("{:.1}", v * 100.0),
        None => "NULL".into(),
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// Render reports; all must share one configuration fingerprint.
pub fn render_report(reports: &[MethodReport], format: ReportFormat) -> Result<String> {
    check_fingerprints(reports)?;
    Ok(match format {
        ReportFormat::Json => match reports {
            [single] => to_json(single),
            many => to_json(many),
        },
        ReportFormat::Csv => {
            let mut out = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["Method"];
            header.extend(SUMMARY_COLUMNS);
            out.write_record(&header).expect("in-memory csv");
            for r in reports {
                let mut row = vec![r.method.clone()];
                row.extend(
                    SUMMARY_COLUMNS
                        .iter()
                        .map(|c| r.summary(c).unwrap_or_default().to_string()),
                );
                out.write_record(&row).expect("in-memory csv");
            }
            String::from_utf8(out.into_inner().expect("in-memory csv")).expect("utf-8 csv")
        }
        ReportFormat::Table => {
            // Level summaries first, then OA, as in published comparison tables.
            let columns: Vec<&str> = SUMMARY_COLUMNS[1..].iter().chain(&SUMMARY_COLUMNS[..1]).copied().collect();
            let name_width = reports.iter().map(|r| r.method.len()).chain([6]).max().unwrap();
            let widths: Vec<usize> = columns.iter().map(|c| c.len().max(5)).collect();
            let mut out = String::new();
            let mut line = format!("{:<name_width$}", "Method");
            for (c, w) in columns.iter().zip(&widths) {
                write!(line, "  {c:>w$}").unwrap();
            }
            out.push_str(line.trim_end());
            out.push('\n');
            for r in reports {
                let mut line = format!("{:<name_width$}", r.method);
                for (c, w) in columns.iter().zip(&widths) {
                    write!(line, "  {:>w$}", percent(r.summary(c))).unwrap();
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
            out
        }
    })
}

/// Write rendered reports to `path`, or to standard output when `path` is `None`.
pub fn write_report(reports: &[MethodReport], format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let text = render_report(reports, format)?;
    write_text(&text, path)
}

pub(crate) fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    use std::io::Write;
    match path {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Write {
            path: path.to_owned(),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Write {
                path: "<stdout>".into(),
                source,
            }),
    }
}

/// Read a report file holding one report object or an array of them.
pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<MethodReport>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_reports(&text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn parse_reports(text: &str) -> serde_json::Result<Vec<MethodReport>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Box<MethodReport>),
        Many(Vec<MethodReport>),
    }
    Ok(match serde_json::from_str(text)? {
        OneOrMany::One(r) => vec![*r],
        OneOrMany::Many(v) => v,
    })
}

/// Rank comparisons as JSON or as a plain-text table per comparison.
pub fn render_comparisons(comparisons: &[RankComparison], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(comparisons),
        ReportFormat::Csv => {
            let mut out = csv::Writer::from_writer(Vec::new());
            out.write_record(["metric_a", "metric_b", "method", "value_a", "value_b", "rank_a", "rank_b"])
                .expect("in-memory csv");
            for cmp in comparisons {
                for e in &cmp.entries {
                    out.write_record([
                        cmp.metric_a.clone(),
                        cmp.metric_b.clone(),
                        e.method.clone(),
                        e.value_a.to_string(),
                        e.value_b.to_string(),
                        e.rank_a.to_string(),
                        e.rank_b.to_string(),
                    ])
                    .expect("in-memory csv");
                }
            }
            String::from_utf8(out.into_inner().expect("in-memory csv")).expect("utf-8 csv")
        }
        ReportFormat::Table => {
            let mut out = String::new();
            for cmp in comparisons {
                let w = cmp.entries.iter().map(|e| e.method.len()).chain([6]).max().unwrap();
                writeln!(out, "{} vs {}", cmp.metric_a, cmp.metric_b).unwrap();
                writeln!(out, "{:<w$}  {:>8}  {:>8}  {:>6}  {:>6}", "Method", cmp.metric_a, cmp.metric_b, "rank", "rank").unwrap();
                for e in &cmp.entries {
                    writeln!(
                        out,
                        "{:<w$}  {:>8}  {:>8}  {:>6}  {:>6}",
                        e.method, e.value_a, e.value_b, e.rank_a, e.rank_b
                    )
                    .unwrap();
                }
                writeln!(out, "top by {}: {}", cmp.metric_a, cmp.top_a.join(", ")).unwrap();
                writeln!(out, "top by {}: {}", cmp.metric_b, cmp.top_b.join(", ")).unwrap();
                writeln!(out, "kendall tau-b: {:.4}", cmp.kendall_tau).unwrap();
                for (x, y) in &cmp.discordant_pairs {
                    writeln!(out, "discordant: {x} / {y}").unwrap();
                }
                out.push('\n');
            }
            out
        }
    }
}
