//! Dataset manifests and label files.
//!
//! Binary label files are `SGL1`, a little-endian `u32` point count, then that
//! many little-endian `u32` labels. Instance files use the magic `SGI1` and
//! [`NO_INSTANCE`](crate::stats::NO_INSTANCE) for points outside any instance.
//! Text files hold one decimal integer per line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::MetricConfig;
use crate::error::{Error, Result};
use crate::stats::{CloudAccumulator, CloudStats, DatasetStats, LabelArray};

pub const LABEL_MAGIC: [u8; 4] = *b"SGL1";
pub const INSTANCE_MAGIC: [u8; 4] = *b"SGI1";
pub const MANIFEST_EXTENSION: &str = ".segm.json";

const HEADER_LEN: u64 = 8;
/// Values per read when streaming label files.
pub const CHUNK_LEN: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudEntry {
    pub cloud_id: String,
    pub gt_path: PathBuf,
    pub pred_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub num_categories: u32,
    pub ignore_id: u32,
    pub clouds: Vec<CloudEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_names: Option<Vec<String>>,
}

impl Manifest {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.num_categories == 0 {
            return Err("num_categories must be at least 1".into());
        }
        if let Some(names) = &self.category_names {
            if names.len() != self.num_categories as usize {
                return Err(format!(
                    "category_names has {} entries but num_categories is {}",
                    names.len(),
                    self.num_categories
                ));
            }
        }
        let mut seen = HashSet::new();
        for (i, cloud) in self.clouds.iter().enumerate() {
            if cloud.cloud_id.is_empty() {
                return Err(format!("clouds[{i}].cloud_id is empty"));
            }
            if !seen.insert(cloud.cloud_id.as_str()) {
                return Err(format!("duplicate cloud id {:?} at clouds[{i}]", cloud.cloud_id));
            }
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        for cloud in &mut self.clouds {
            for path in [&mut cloud.gt_path, &mut cloud.pred_path]
                .into_iter()
                .chain(cloud.instance_path.as_mut())
            {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }
}

/// Parse and validate a manifest; relative label paths resolve against its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    manifest.validate().map_err(|message| Error::Manifest {
        path: path.to_owned(),
        message,
    })?;
    manifest.resolve_paths(path.parent().unwrap_or(Path::new("")));
    Ok(manifest)
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelFormat {
    #[default]
    Auto,
    Text,
    Binary,
}

impl FromStr for LabelFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(LabelFormat::Auto),
            "text" => Ok(LabelFormat::Text),
            "binary" => Ok(LabelFormat::Binary),
            other => Err(format!("unknown label format {other:?}, expected auto, text or binary")),
        }
    }
}

/// Chunked reader over a text or binary label file.
pub struct LabelStream {
    path: PathBuf,
    reader: BufReader<File>,
    state: StreamState,
}

enum StreamState {
    Binary { declared: u64, read: u64 },
    Text { line: u64, buf: String },
}

impl LabelStream {
    pub fn open(path: impl AsRef<Path>, format: LabelFormat) -> Result<Self> {
        let path = path.as_ref().to_owned();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut reader = BufReader::with_capacity(1 << 20, file);

        let binary = match format {
            LabelFormat::Binary => true,
            LabelFormat::Text => false,
            LabelFormat::Auto => {
                let head = reader.fill_buf().map_err(|e| Error::io(&path, e))?;
                head.len() >= 4 && (head[..4] == LABEL_MAGIC || head[..4] == INSTANCE_MAGIC)
            }
        };

        let state = if binary {
            let mut header = [0u8; HEADER_LEN as usize];
            let got = read_full(&mut reader, &mut header).map_err(|e| Error::io(&path, e))?;
            if got < header.len() {
                return Err(parse_error(&path, format!("byte {got}"), "truncated header"));
            }
            if header[..4] != LABEL_MAGIC && header[..4] != INSTANCE_MAGIC {
                return Err(parse_error(&path, "byte 0", "bad magic, expected SGL1 or SGI1"));
            }
            let declared = u32::from_le_bytes(header[4..8].try_into().unwrap()) as u64;
            StreamState::Binary { declared, read: 0 }
        } else {
            StreamState::Text {
                line: 0,
                buf: String::new(),
            }
        };
        Ok(Self {
            path,
            reader,
            state,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Replace `out` with up to `max` further values. Returns false at end of stream.
    pub fn next_chunk(&mut self, out: &mut Vec<u32>, max: usize) -> Result<bool> {
        out.clear();
        match &mut self.state {
            StreamState::Binary { declared, read } => {
                let want = (*declared - *read).min(max as u64) as usize;
                if want == 0 {
                    let mut probe = [0u8; 1];
                    let extra = self.reader.read(&mut probe).map_err(|e| Error::io(&self.path, e))?;
                    if extra > 0 {
                        let at = HEADER_LEN + *declared * 4;
                        return Err(parse_error(
                            &self.path,
                            format!("byte {at}"),
                            format!("trailing data after the {declared} declared values"),
                        ));
                    }
                    return Ok(false);
                }
                let mut bytes = vec![0u8; want * 4];
                let got = read_full(&mut self.reader, &mut bytes).map_err(|e| Error::io(&self.path, e))?;
                if got < bytes.len() {
                    let at = HEADER_LEN + *read * 4 + got as u64;
                    return Err(parse_error(
                        &self.path,
                        format!("byte {at}"),
                        format!("truncated payload, header declares {declared} values"),
                    ));
                }
                out.extend(
                    bytes
                        .chunks_exact(4)
                        .map(|b| u32::from_le_bytes(b.try_into().unwrap())),
                );
                *read += want as u64;
                Ok(true)
            }
            StreamState::Text { line, buf } => {
                while out.len() < max {
                    buf.clear();
                    let n = self.reader.read_line(buf).map_err(|e| Error::io(&self.path, e))?;
                    if n == 0 {
                        break;
                    }
                    *line += 1;
                    let token = buf.strip_suffix('\n').unwrap_or(buf);
                    let token = token.strip_suffix('\r').unwrap_or(token);
                    let value = token.parse::<u32>().map_err(|_| {
                        parse_error(
                            &self.path,
                            format!("line {line}"),
                            format!("expected a nonnegative integer, found {token:?}"),
                        )
                    })?;
                    out.push(value);
                }
                Ok(!out.is_empty())
            }
        }
    }
}

fn parse_error(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        location: location.into(),
        message: message.into(),
    }
}

fn read_full(reader: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Read a whole label or instance file.
pub fn read_labels(path: impl AsRef<Path>, format: LabelFormat) -> Result<LabelArray> {
    let mut stream = LabelStream::open(path, format)?;
    let mut values = Vec::new();
    let mut chunk = Vec::with_capacity(CHUNK_LEN);
    while stream.next_chunk(&mut chunk, CHUNK_LEN)? {
        values.extend_from_slice(&chunk);
    }
    Ok(LabelArray(values))
}

pub fn write_labels_binary(path: impl AsRef<Path>, magic: [u8; 4], values: &[u32]) -> Result<()> {
    let path = path.as_ref();
    let count = u32::try_from(values.len()).map_err(|_| Error::Write {
        path: path.to_owned(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "more than u32::MAX values"),
    })?;
    write_with(path, |w| {
        w.write_all(&magic)?;
        w.write_all(&count.to_le_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn write_labels_text(path: impl AsRef<Path>, values: &[u32]) -> Result<()> {
    write_with(path.as_ref(), |w| {
        for v in values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    })
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let wrap = |source| Error::Write {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    let mut writer = BufWriter::new(file);
    body(&mut writer).map_err(wrap)?;
    writer.flush().map_err(wrap)
}

/// Stream one cloud's files through a [`CloudAccumulator`].
pub fn accumulate_entry(entry: &CloudEntry, num_categories: u32, config: &MetricConfig) -> Result<CloudStats> {
    let mut gt = LabelStream::open(&entry.gt_path, LabelFormat::Auto)?;
    let mut pred = LabelStream::open(&entry.pred_path, LabelFormat::Auto)?;
    let mut inst = entry
        .instance_path
        .as_ref()
        .map(|p| LabelStream::open(p, LabelFormat::Auto))
        .transpose()?;

    let mut acc = CloudAccumulator::new(entry.cloud_id.clone(), num_categories, config.ignore_id);
    let (mut g, mut p, mut i) = (Vec::new(), Vec::new(), Vec::new());
    loop {
        let more_gt = gt.next_chunk(&mut g, CHUNK_LEN)?;
        let more_pred = pred.next_chunk(&mut p, CHUNK_LEN)?;
        let seen = acc.points_seen();
        if g.len() != p.len() {
            // One stream ended early; the true lengths are found by draining.
            let gt_len = seen + g.len() as u64 + drain(&mut gt)?;
            let pred_len = seen + p.len() as u64 + drain(&mut pred)?;
            return Err(Error::LengthMismatch {
                cloud: entry.cloud_id.clone(),
                gt: gt_len,
                pred: pred_len,
            });
        }
        let inst_chunk = match inst.as_mut() {
            Some(stream) => {
                stream.next_chunk(&mut i, CHUNK_LEN)?;
                if i.len() != g.len() {
                    let gt_len = seen + g.len() as u64 + drain(&mut gt)?;
                    let inst_len = seen + i.len() as u64 + drain(stream)?;
                    return Err(Error::InstanceLengthMismatch {
                        cloud: entry.cloud_id.clone(),
                        gt: gt_len,
                        inst: inst_len,
                    });
                }
                Some(i.as_slice())
            }
            None => None,
        };
        if !more_gt && !more_pred {
            break;
        }
        acc.push(&g, &p, inst_chunk)?;
    }
    Ok(acc.finish())
}

fn drain(stream: &mut LabelStream) -> Result<u64> {
    let mut buf = Vec::new();
    let mut n = 0;
    while stream.next_chunk(&mut buf, CHUNK_LEN)? {
        n += buf.len() as u64;
    }
    Ok(n)
}

/// Accumulate every cloud of a manifest, in parallel on the current rayon pool.
///
/// The manifest's `ignore_id` is used; clouds without valid points are skipped.
pub fn build_stats(manifest: &Manifest, config: &MetricConfig) -> Result<DatasetStats> {
    let config = MetricConfig {
        ignore_id: manifest.ignore_id,
        ..*config
    };
    let clouds = manifest
        .clouds
        .par_iter()
        .map(|entry| accumulate_entry(entry, manifest.num_categories, &config))
        .collect::<Result<Vec<_>>>()?;

    let mut stats = DatasetStats::new(manifest.num_categories, config.ignore_id)?;
    for cloud in clouds {
        if cloud.valid_points == 0 {
            log::warn!("cloud {:?} has no valid points, skipped", cloud.cloud_id);
            continue;
        }
        if cloud.uncovered_points > 0 {
            log::warn!(
                "cloud {:?}: {} ground-truth points carry no instance id",
                cloud.cloud_id,
                cloud.uncovered_points
            );
        }
        stats.push(cloud)?;
    }
    Ok(stats)
}
