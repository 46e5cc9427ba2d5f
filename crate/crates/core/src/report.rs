//! Plot-ready output: Gantt rows, method tables, CDF points.

use std::io::Write;
use std::path::Path;

use crate::baselines::MethodResult;
use crate::error::Result;
use crate::model::{Problem, Schedule};
use crate::tracesim::Comparison;

/// One row per task: ids, start, end, option label and the demand on every
/// capacity resource. Rows are sorted by start time, then by DAG and task id.
pub fn emit_gantt(p: &Problem, s: &Schedule) -> Result<String> {
    let resources: Vec<_> = p.capacities.keys().collect();
    let mut rows: Vec<(f64, &str, &str, usize)> = p
        .tasks()
        .enumerate()
        .map(|(i, (d, t))| (s.starts[i], d.dag_id.as_str(), t.task_id.as_str(), i))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dag_id", "task_id", "start", "end", "option"];
    header.extend(resources.iter().map(|r| r.as_str()));
    w.write_record(&header)?;
    for (start, dag, task, i) in rows {
        let opt = s.assignment.option(p, i);
        let mut rec = vec![
            dag.to_string(),
            task.to_string(),
            start.to_string(),
            s.end(p, i).to_string(),
            opt.label(),
        ];
        rec.extend(
            resources
                .iter()
                .map(|r| opt.demands.get(*r).copied().unwrap_or(0.0).to_string()),
        );
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

pub fn methods_csv(rows: &[MethodResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["method", "weight", "makespan", "cost", "energy"])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

pub fn cdf_csv(c: &Comparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["improvement", "fraction"])?;
    for p in &c.cdf {
        w.write_record([p.improvement.to_string(), p.fraction.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
