//! Trace files: CSV with a `deps` column of `;`-separated task ids, or one
//! JSON object per line.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
#[cfg(test)]
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTask {
    pub dag_id: String,
    pub task_id: String,
    #[serde(default)]
    pub deps: Vec<String>,
    pub cores: f64,
    /// Fraction of one machine's memory.
    pub memory_fraction: f64,
    pub duration: f64,
    pub submit_time: f64,
}

/// Tasks of one DAG in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDag {
    pub dag_id: String,
    /// Earliest submit time over the DAG's tasks.
    pub submit_time: f64,
    pub tasks: Vec<TraceTask>,
}

impl TraceDag {
    pub fn edges(&self) -> Vec<(String, String)> {
        self.tasks
            .iter()
            .flat_map(|t| t.deps.iter().map(move |d| (d.clone(), t.task_id.clone())))
            .collect()
    }
}

/// DAGs ordered by (submit time, id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub dags: Vec<TraceDag>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    dag_id: String,
    task_id: String,
    deps: String,
    cores: f64,
    memory_fraction: f64,
    duration: f64,
    submit_time: f64,
}

impl Trace {
    /// Groups tasks by DAG and checks ids, dependencies and values. `lines`
    /// gives the source line of each task for error messages.
    pub fn from_tasks(tasks: Vec<TraceTask>) -> Result<Self> {
        let lines: Vec<u64> = (1..=tasks.len() as u64).collect();
        Self::build(tasks, &lines, Path::new("<memory>"))
    }

    fn build(tasks: Vec<TraceTask>, lines: &[u64], path: &Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut groups: BTreeMap<String, Vec<(u64, TraceTask)>> = BTreeMap::new();
        for (t, &line) in tasks.into_iter().zip(lines) {
            let ok = |v: f64| v.is_finite();
            if !(ok(t.cores) && t.cores > 0.0) {
                return Err(parse_err(line, format!("cores must be positive, got {}", t.cores)));
            }
            if !(ok(t.memory_fraction) && (0.0..=1.0).contains(&t.memory_fraction)) {
                return Err(parse_err(
                    line,
                    format!("memory_fraction must lie in [0, 1], got {}", t.memory_fraction),
                ));
            }
            if !(ok(t.duration) && t.duration > 0.0) {
                return Err(parse_err(
                    line,
                    format!("duration must be positive, got {}", t.duration),
                ));
            }
            if !(ok(t.submit_time) && t.submit_time >= 0.0) {
                return Err(parse_err(
                    line,
                    format!("submit_time must be non-negative, got {}", t.submit_time),
                ));
            }
            groups.entry(t.dag_id.clone()).or_default().push((line, t));
        }
        let mut dags = Vec::with_capacity(groups.len());
        for (dag_id, rows) in groups {
            let mut seen = HashSet::new();
            for (line, t) in &rows {
                if !seen.insert(t.task_id.as_str()) {
                    return Err(parse_err(*line, format!("duplicate task {dag_id}/{}", t.task_id)));
                }
            }
            for (line, t) in &rows {
                if let Some(d) = t.deps.iter().find(|d| !seen.contains(d.as_str())) {
                    return Err(parse_err(
                        *line,
                        format!("task {dag_id}/{} depends on unknown task `{d}`", t.task_id),
                    ));
                }
            }
            let submit_time = rows.iter().map(|(_, t)| t.submit_time).fold(f64::INFINITY, f64::min);
            dags.push(TraceDag {
                dag_id,
                submit_time,
                tasks: rows.into_iter().map(|(_, t)| t).collect(),
            });
        }
        dags.sort_by(|a, b| {
            a.submit_time
                .total_cmp(&b.submit_time)
                .then_with(|| a.dag_id.cmp(&b.dag_id))
        });
        Ok(Self { dags })
    }

    pub fn task_count(&self) -> usize {
        self.dags.iter().map(|d| d.tasks.len()).sum()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TraceTask> {
        self.dags.iter().flat_map(|d| d.tasks.iter())
    }

    /// SHA-256 over the canonical CSV rendering, hex encoded.
    pub fn hash(&self) -> String {
        let mut buf = Vec::new();
        write_trace_csv(self, &mut buf).expect("writing to memory");
        hex::encode(Sha256::digest(&buf))
    }
}

pub fn read_trace_csv<R: Read>(reader: R, path: &Path) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut tasks = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: CsvRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        lines.push(line);
        tasks.push(TraceTask {
            dag_id: row.dag_id,
            task_id: row.task_id,
            deps: row
                .deps
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
            cores: row.cores,
            memory_fraction: row.memory_fraction,
            duration: row.duration,
            submit_time: row.submit_time,
        });
    }
    Trace::build(tasks, &lines, path)
}

pub fn read_trace_jsonl<R: Read>(reader: R, path: &Path) -> Result<Trace> {
    let mut tasks = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TraceTask = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        tasks.push(t);
        lines.push(i as u64 + 1);
    }
    Trace::build(tasks, &lines, path)
}

/// Reads a trace, choosing JSON lines for `.jsonl`/`.json` and CSV otherwise.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| crate::error::io_at(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "json") => read_trace_jsonl(file, path),
        _ => read_trace_csv(file, path),
    }
}

pub fn write_trace_csv<W: Write>(trace: &Trace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in trace.tasks() {
        w.serialize(CsvRow {
            dag_id: t.dag_id.clone(),
            task_id: t.task_id.clone(),
            deps: t.deps.join(";"),
            cores: t.cores,
            memory_fraction: t.memory_fraction,
            duration: t.duration,
            submit_time: t.submit_time,
        })?;
    }
    // an empty trace still gets its header
    if trace.dags.is_empty() {
        w.write_record([
            "dag_id",
            "task_id",
            "deps",
            "cores",
            "memory_fraction",
            "duration",
            "submit_time",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_jsonl<W: Write>(trace: &Trace, mut writer: W) -> Result<()> {
    for t in trace.tasks() {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) fn unknown_path() -> PathBuf {
    PathBuf::from("<memory>")
}
