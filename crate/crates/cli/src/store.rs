//! On-disk layout of an experiment directory.
//!
//! ```text
//! <root>/manifest.json        configuration, hash and per-instance index
//! <root>/instances/<id>.json  generated instances
//! <root>/records.jsonl        one line per (instance, iteration)
//! <root>/summary.csv          flat per-record table
//! <root>/ensemble.json        per-point aggregates
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use wsqaoa::graphs::{gen_random_cubic, Graph};
use wsqaoa::portfolio::{gen_instance, PortfolioInstance};
use wsqaoa::seed::derive_seed;
use wsqaoa::warmstart::{IterationRecord, MaxCutProblem, PortfolioProblem, Problem};

use crate::config::{ExperimentConfig, ProblemKind};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const RECORDS: &str = "records.jsonl";
pub const SUMMARY: &str = "summary.csv";
pub const ENSEMBLE: &str = "ensemble.json";
pub const INSTANCE_DIR: &str = "instances";

const STREAM_MAXCUT: u64 = 101;
const STREAM_DGMVP: u64 = 102;
const STREAM_RUN: u64 = 7;

/// Where an instance sits in the experiment: graph size, or assets and bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.l {
            Some(l) => write!(f, "n={} l={l}", self.n),
            None => write!(f, "N={}", self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSpec {
    pub id: String,
    pub seed: u64,
    pub problem: ProblemKind,
    pub point: Point,
}

impl InstanceSpec {
    pub fn run_seed(&self) -> u64 {
        derive_seed(self.seed, STREAM_RUN, 0)
    }

    pub fn file_name(&self) -> PathBuf {
        Path::new(INSTANCE_DIR).join(format!("{}.json", self.id))
    }
}

/// Instances of `cfg` in canonical order: by point, then by index.
pub fn plan_instances(cfg: &ExperimentConfig) -> Vec<InstanceSpec> {
    let points: Vec<(Point, String, u64, u64)> = match cfg.problem {
        ProblemKind::Maxcut => cfg
            .sizes
            .iter()
            .map(|&n| {
                (
                    Point { n, l: None },
                    format!("maxcut-N{n:02}"),
                    STREAM_MAXCUT,
                    n as u64,
                )
            })
            .collect(),
        ProblemKind::Dgmvp => cfg
            .grid
            .iter()
            .map(|&(n, l)| {
                (
                    Point { n, l: Some(l) },
                    format!("dgmvp-n{n}-l{l}"),
                    STREAM_DGMVP,
                    (n as u64) << 16 | l as u64,
                )
            })
            .collect(),
    };
    points
        .into_iter()
        .flat_map(|(point, prefix, stream, key)| {
            let base = derive_seed(cfg.master_seed, stream, key);
            (0..cfg.instances).map(move |i| InstanceSpec {
                id: format!("{prefix}-{i:03}"),
                seed: derive_seed(base, 0, i as u64),
                problem: cfg.problem,
                point,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub id: String,
    pub seed: u64,
    pub problem: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<Graph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portfolio: Option<PortfolioInstance>,
}

impl InstanceFile {
    pub fn generate(spec: &InstanceSpec) -> Result<Self, CliError> {
        let mut file = Self {
            id: spec.id.clone(),
            seed: spec.seed,
            problem: spec.problem,
            graph: None,
            portfolio: None,
        };
        match (spec.problem, spec.point.l) {
            (ProblemKind::Maxcut, _) => {
                file.graph = Some(gen_random_cubic(spec.point.n, spec.seed)?)
            }
            (ProblemKind::Dgmvp, Some(l)) => {
                file.portfolio = Some(gen_instance(spec.point.n, l, spec.seed)?)
            }
            (ProblemKind::Dgmvp, None) => {
                return Err(CliError::Runtime(format!("{}: missing bit count", spec.id)))
            }
        }
        Ok(file)
    }

    pub fn problem(&self, initial_asset: usize) -> Result<Problem, CliError> {
        let missing = || {
            CliError::Runtime(format!(
                "instance {} has no {:?} payload",
                self.id, self.problem
            ))
        };
        Ok(match self.problem {
            ProblemKind::Maxcut => {
                Problem::MaxCut(MaxCutProblem::new(self.graph.clone().ok_or_else(missing)?)?)
            }
            ProblemKind::Dgmvp => Problem::Portfolio(PortfolioProblem::new(
                self.portfolio.clone().ok_or_else(missing)?,
                initial_asset,
            )?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: PathBuf,
    pub seed: u64,
    pub point: Point,
    pub status: EntryStatus,
    pub records: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    /// Seconds since the Unix epoch.
    pub created: u64,
    pub updated: u64,
    pub config: ExperimentConfig,
    pub instances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        let now = unix_now();
        Self {
            config_hash: config.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            created: now,
            updated: now,
            config: config.clone(),
            instances: Vec::new(),
        }
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.instances.iter().find(|e| e.id == id)
    }

    pub fn is_completed(&self, id: &str) -> bool {
        self.entry(id)
            .is_some_and(|e| e.status == EntryStatus::Completed)
    }

    pub fn upsert(&mut self, entry: ManifestEntry) {
        match self.instances.iter_mut().find(|e| e.id == entry.id) {
            Some(slot) => *slot = entry,
            None => self.instances.push(entry),
        }
        self.updated = unix_now();
    }

    pub fn load(root: &Path) -> Result<Option<Self>, CliError> {
        let path = root.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn save(&self, root: &Path) -> Result<(), CliError> {
        write_json(&root.join(MANIFEST), self)
    }
}

/// One JSONL line: the iteration record tagged with its instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub instance_id: String,
    pub seed: u64,
    #[serde(flatten)]
    pub record: IterationRecord,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline, written through a temporary file so
/// readers never observe a half-written document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Reads `records.jsonl`, skipping (and reporting) lines that do not parse,
/// such as a line cut short by an interrupted write.
pub fn read_records(root: &Path) -> Result<Vec<RecordLine>, CliError> {
    let path = root.join(RECORDS);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let mut out = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RecordLine>(&line) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!(
                "{}:{}: skipping unreadable record: {e}",
                path.display(),
                no + 1
            ),
        }
    }
    Ok(out)
}

pub fn record_line_bytes(line: &RecordLine) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec(line).map_err(|e| CliError::Runtime(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Rewrites `records.jsonl` with the given lines.
pub fn write_records(root: &Path, lines: &[RecordLine]) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    for line in lines {
        bytes.extend(record_line_bytes(line)?);
    }
    write_atomic(&root.join(RECORDS), &bytes)
}

pub struct RecordAppender {
    path: PathBuf,
    file: fs::File,
}

impl RecordAppender {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        let path = root.join(RECORDS);
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        Ok(Self { path, file })
    }

    pub fn append(&mut self, lines: &[RecordLine]) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        for line in lines {
            bytes.extend(record_line_bytes(line)?);
        }
        self.file
            .write_all(&bytes)
            .and_then(|_| self.file.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }
}

/// Records of a finished experiment grouped by instance, in manifest order.
pub struct Results {
    pub manifest: Manifest,
    pub runs: Vec<(ManifestEntry, Vec<IterationRecord>)>,
}

impl Results {
    pub fn load(root: &Path) -> Result<Self, CliError> {
        let manifest = Manifest::load(root)?
            .ok_or_else(|| CliError::Usage(format!("no {MANIFEST} in {}", root.display())))?;
        let mut grouped: BTreeMap<String, Vec<IterationRecord>> = BTreeMap::new();
        for line in read_records(root)? {
            grouped
                .entry(line.instance_id)
                .or_default()
                .push(line.record);
        }
        let runs = manifest
            .instances
            .iter()
            .filter(|e| e.status == EntryStatus::Completed)
            .map(|e| (e.clone(), grouped.remove(&e.id).unwrap_or_default()))
            .collect();
        Ok(Self { manifest, runs })
    }

    /// Runs grouped by point, points in first-seen order.
    pub fn by_point(&self) -> Vec<(Point, Vec<Vec<IterationRecord>>)> {
        let mut out: Vec<(Point, Vec<Vec<IterationRecord>>)> = Vec::new();
        for (entry, recs) in &self.runs {
            match out.iter_mut().find(|(p, _)| *p == entry.point) {
                Some((_, v)) => v.push(recs.clone()),
                None => out.push((entry.point, vec![recs.clone()])),
            }
        }
        out
    }

    pub fn max_iter(&self) -> usize {
        self.runs
            .iter()
            .flat_map(|(_, r)| r.iter().map(|x| x.iter))
            .max()
            .unwrap_or(0)
    }
}
