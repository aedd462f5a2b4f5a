//! Run files: trajectory and diagnostics CSVs, an event log and JSON reports.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`, so reading a file reproduces the in-memory samples bitwise.
//!
//! ```
//! use csflock::export::{read_trajectory_csv, write_trajectory_csv};
//! use csflock::integrator::Trajectory;
//!
//! let mut traj = Trajectory::new(1, 1);
//! for k in 0..3 {
//!     let t = k as f64 / 3.0;
//!     traj.push(t, vec![0.1 * t], vec![0.1]);
//! }
//! let mut buf = Vec::new();
//! write_trajectory_csv(&mut buf, &traj).unwrap();
//! assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 4);
//! assert_eq!(read_trajectory_csv(&buf[..]).unwrap(), traj);
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::config::SimConfig;
use crate::diagnostics::DiagnosticsSeries;
use crate::integrator::{EventKind, EventRecord, RunArtifacts, Trajectory};
use crate::verify::VerificationReport;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl ExportError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        ExportError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        ExportError::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

/// Shortest round-trip decimal form; `inf`, `-inf` and `NaN` otherwise.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| format!("bad number `{s}`: {e}"))
}

pub fn trajectory_header(n: usize, dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for p in ["x", "v"] {
        for i in 0..n {
            for c in 0..dim {
                h.push(format!("{p}_{i}_{c}"));
            }
        }
    }
    h
}

pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(traj.n_particles, traj.dim))?;
    for k in 0..traj.len() {
        let row = std::iter::once(traj.times[k])
            .chain(traj.positions[k].iter().copied())
            .chain(traj.velocities[k].iter().copied())
            .map(fmt_f64);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a trajectory file; particle count and dimension come from the header.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let last = header
        .iter().rfind(|h| h.starts_with("x_"))
        .ok_or("header has no position columns")?;
    let mut parts = last.split('_').skip(1);
    let mut next = || -> Result<usize, String> {
        parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad column `{last}`"))
    };
    let (n, dim) = (next()? + 1, next()? + 1);
    let expected = trajectory_header(n, dim);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err("header does not match `t, x_<i>_<c>, v_<i>_<c>`".into());
    }
    let mut traj = Trajectory::new(n, dim);
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let vals = rec.iter().map(parse_f64).collect::<Result<Vec<_>, _>>()?;
        let nd = n * dim;
        traj.push(vals[0], vals[1..1 + nd].to_vec(), vals[1 + nd..].to_vec());
    }
    Ok(traj)
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventLine {
    pub t: f64,
    pub kind: EventKind,
    pub members: Vec<usize>,
}

impl From<&EventRecord> for EventLine {
    fn from(e: &EventRecord) -> Self {
        EventLine {
            t: e.t,
            kind: e.kind,
            members: e.members.clone(),
        }
    }
}

pub fn write_events_jsonl<W: Write>(mut out: W, events: &[EventRecord]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, &EventLine::from(e))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_events_jsonl(text: &str) -> Result<Vec<EventLine>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", k + 1)))
        .collect()
}

pub fn write_diagnostics_csv<W: Write>(out: W, series: &DiagnosticsSeries) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "r".into(), "R".into()];
    header.extend((0..series.dim).map(|c| format!("momentum_{c}")));
    header.push("max_speed".into());
    w.write_record(&header)?;
    for k in 0..series.len() {
        let row = [series.times[k], series.r[k], series.big_r[k]]
            .into_iter()
            .chain(series.momentum[k].iter().copied())
            .chain(std::iter::once(series.max_speed[k]))
            .map(fmt_f64);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of `summary.json`.
pub fn summary(
    run: &RunArtifacts,
    config: &SimConfig,
    report: &VerificationReport,
    build_id: &str,
) -> serde_json::Value {
    json!({
        "build": build_id,
        "config": config.to_value(),
        "stats": run.stats,
        "events": {
            "collision": run.collision_events().count(),
            "sticking": run.sticking_events().count(),
        },
        "samples": run.trajectory.len(),
        "final_clusters": run.final_state.partition().clusters(),
        "verification_passed": report.passed,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, ExportError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| ExportError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), ExportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ExportError::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| ExportError::io(path, e))
}

/// Writes every run file into `dir`, creating it if needed.
pub fn export_run(
    dir: &Path,
    run: &RunArtifacts,
    config: &SimConfig,
    report: &VerificationReport,
    build_id: &str,
) -> Result<(), ExportError> {
    fs::create_dir_all(dir).map_err(|e| ExportError::io(dir, e))?;
    let p = dir.join(TRAJECTORY_FILE);
    write_trajectory_csv(create(&p)?, &run.trajectory).map_err(|e| ExportError::format(&p, e))?;
    let p = dir.join(EVENTS_FILE);
    write_events_jsonl(create(&p)?, &run.events).map_err(|e| ExportError::io(&p, e))?;
    let p = dir.join(DIAGNOSTICS_FILE);
    write_diagnostics_csv(create(&p)?, &run.diagnostics).map_err(|e| ExportError::format(&p, e))?;
    write_json(&dir.join(REPORT_FILE), report)?;
    write_json(&dir.join(SUMMARY_FILE), &summary(run, config, report, build_id))?;
    Ok(())
}

/// Files of an exported run directory, read back.
#[derive(Debug, Clone)]
pub struct ExportedRun {
    pub config: SimConfig,
    pub trajectory: Trajectory,
    pub events: Vec<EventLine>,
    pub build: String,
}

/// Reads the configuration, trajectory and events of an exported run.
pub fn read_run(dir: &Path) -> Result<ExportedRun, ExportError> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| ExportError::io(&p, e))
    };
    let p = dir.join(SUMMARY_FILE);
    let summary: serde_json::Value =
        serde_json::from_str(&read(SUMMARY_FILE)?).map_err(|e| ExportError::format(&p, e))?;
    let config = SimConfig::from_value(summary["config"].clone())
        .map_err(|e| ExportError::format(&p, e))?;
    let build = summary["build"].as_str().unwrap_or_default().to_string();
    let p = dir.join(TRAJECTORY_FILE);
    let trajectory =
        read_trajectory_csv(read(TRAJECTORY_FILE)?.as_bytes()).map_err(|e| ExportError::format(&p, e))?;
    let p = dir.join(EVENTS_FILE);
    let events = read_events_jsonl(&read(EVENTS_FILE)?).map_err(|e| ExportError::format(&p, e))?;
    Ok(ExportedRun {
        config,
        trajectory,
        events,
        build,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, f64::MIN_POSITIVE, 0.0, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(parse_f64(&s).unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(parse_f64("inf").unwrap(), f64::INFINITY);
    }

    #[test]
    fn trajectory_header_layout() {
        assert_eq!(
            trajectory_header(2, 2),
            ["t", "x_0_0", "x_0_1", "x_1_0", "x_1_1", "v_0_0", "v_0_1", "v_1_0", "v_1_1"]
        );
    }

    #[test]
    fn trajectory_round_trip_is_bitwise() {
        let mut traj = Trajectory::new(2, 2);
        for k in 0..5 {
            let t = 0.1 * k as f64;
            traj.push(
                t,
                vec![t.sin(), t.cos(), 1.0 / 3.0 + t, -t * t],
                vec![t.exp(), 1e-17 * t, 0.0, -1.0],
            );
        }
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        assert_eq!(read_trajectory_csv(&buf[..]).unwrap(), traj);
    }

    #[test]
    fn events_lines() {
        let e = EventRecord {
            t: 0.75,
            kind: EventKind::Sticking,
            members: vec![0, 1],
            t_detect: 0.7,
            relative_speed: 0.1,
            excess_speed: -0.2,
        };
        let mut buf = Vec::new();
        write_events_jsonl(&mut buf, std::slice::from_ref(&e)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "{\"t\":0.75,\"kind\":\"sticking\",\"members\":[0,1]}\n");
        assert_eq!(read_events_jsonl(&text).unwrap(), vec![EventLine::from(&e)]);
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(read_trajectory_csv("t,a,b\n0,1,2\n".as_bytes()).is_err());
    }
}
