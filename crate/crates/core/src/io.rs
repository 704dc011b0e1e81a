//! File formats: trajectory tables, plot-data tables and JSON documents.
//!
//! Trajectory table: header `t,q1,...,qn`, optionally followed by
//! `dq1,...,dqn` joint velocities; one sample per row, seconds and radians,
//! uniform sample period. All writes go through a temporary file in the
//! destination directory followed by a rename.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::segmentation::JointTrajectory;

/// Version tag carried by every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance on the spacing of trajectory time stamps (s).
pub const DT_TOLERANCE: f64 = 1e-9;

/// A trajectory together with the time stamp of its first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub start_time: f64,
    pub trajectory: JointTrajectory,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Trajectory(e.to_string())
}

/// Parses a trajectory table.
pub fn parse_trajectory<R: Read>(reader: R) -> Result<TrajectoryFile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"t") {
        return Err(Error::Trajectory("first column must be `t`".into()));
    }
    let n = cols[1..].iter().take_while(|c| c.starts_with('q')).count();
    if n == 0 {
        return Err(Error::Trajectory("no joint columns `q1..qn`".into()));
    }
    for (i, c) in cols[1..=n].iter().enumerate() {
        if *c != format!("q{}", i + 1) {
            return Err(Error::Trajectory(format!("column {} is `{c}`, expected `q{}`", i + 2, i + 1)));
        }
    }
    let extra = &cols[n + 1..];
    let has_vel = match extra.len() {
        0 => false,
        m if m == n => {
            for (i, c) in extra.iter().enumerate() {
                if *c != format!("dq{}", i + 1) {
                    return Err(Error::Trajectory(format!("unexpected column `{c}`")));
                }
            }
            true
        }
        _ => return Err(Error::Trajectory(format!("unexpected columns after q{n}"))),
    };

    let mut times = Vec::new();
    let mut positions = Vec::new();
    let mut velocities = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let vals = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Trajectory(format!("row {}: `{s}` is not a number", row + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::Trajectory(format!("row {}: non-finite value", row + 1)));
        }
        times.push(vals[0]);
        positions.push(DVector::from_column_slice(&vals[1..=n]));
        if has_vel {
            velocities.push(DVector::from_column_slice(&vals[n + 1..]));
        }
    }
    if times.len() < 2 {
        return Err(Error::Trajectory("at least two samples are required".into()));
    }
    let steps = (times.len() - 1) as f64;
    let dt = (times[times.len() - 1] - times[0]) / steps;
    if !(dt > 0.0) {
        return Err(Error::Trajectory("time stamps must increase".into()));
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > DT_TOLERANCE {
            return Err(Error::Trajectory(format!(
                "non-uniform sampling between rows {} and {}: step {} vs period {dt}",
                k + 1,
                k + 2,
                w[1] - w[0]
            )));
        }
    }
    let mut trajectory = JointTrajectory::new(dt, positions)?;
    if has_vel {
        trajectory = trajectory.with_velocities(velocities)?;
    }
    Ok(TrajectoryFile {
        start_time: times[0],
        trajectory,
    })
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryFile> {
    let file = fs::File::open(path).map_err(|e| with_path(e, path))?;
    parse_trajectory(std::io::BufReader::new(file))
}

/// Renders a trajectory table; velocities are included when present.
pub fn format_trajectory(traj: &JointTrajectory, start_time: f64) -> Result<String> {
    let n = traj.dof();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    if traj.velocities().is_some() {
        header.extend((1..=n).map(|i| format!("dq{i}")));
    }
    let rows = (0..traj.len()).map(|k| {
        let mut row = vec![start_time + traj.time(k)];
        row.extend(traj.positions()[k].iter());
        if let Some(v) = traj.velocities() {
            row.extend(v[k].iter());
        }
        row
    });
    format_table(&header, rows)
}

/// Renders a numeric table with the given header. Numbers use the shortest
/// representation that parses back to the same value.
pub fn format_table<I>(header: &[String], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|x| x.to_string())).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Trajectory(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Renders a table whose cells may be missing; missing cells are left empty.
pub fn format_sparse_table(header: &[String], rows: &[(String, Vec<Option<f64>>)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for (label, cells) in rows {
        let mut rec = vec![label.clone()];
        rec.extend(cells.iter().map(|c| c.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Trajectory(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Pretty JSON with a trailing newline.
pub fn format_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Document(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes `contents` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(with_path(e, path));
    }
    Ok(())
}

pub fn write_trajectory(path: &Path, traj: &JointTrajectory, start_time: f64) -> Result<()> {
    write_atomic(path, format_trajectory(traj, start_time)?.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, format_json(value)?.as_bytes())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(e, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> JointTrajectory {
        let q = (0..5)
            .map(|k| DVector::from_column_slice(&[0.1 * k as f64, (k as f64).sin(), -1.0 / 3.0]))
            .collect();
        JointTrajectory::new(0.01, q).unwrap()
    }

    #[test]
    fn trajectory_round_trip() {
        let t = sample();
        let text = format_trajectory(&t, 2.0).unwrap();
        assert!(text.starts_with("t,q1,q2,q3\n"));
        let back = parse_trajectory(text.as_bytes()).unwrap();
        assert_eq!(back.start_time, 2.0);
        assert_eq!(back.trajectory.positions(), t.positions());
        assert!((back.trajectory.dt() - 0.01).abs() < 1e-12);
        assert!(back.trajectory.velocities().is_none());
    }

    #[test]
    fn velocities_round_trip() {
        let t = sample();
        let v: Vec<_> = t.positions().iter().map(|q| q * 2.0).collect();
        let t = t.with_velocities(v).unwrap();
        let text = format_trajectory(&t, 0.0).unwrap();
        assert!(text.starts_with("t,q1,q2,q3,dq1,dq2,dq3\n"));
        let back = parse_trajectory(text.as_bytes()).unwrap();
        assert_eq!(back.trajectory.velocities(), t.velocities());
    }

    #[test]
    fn rejects_bad_tables() {
        let bad = [
            "x,q1\n0,1\n0.1,2\n",
            "t,q2\n0,1\n0.1,2\n",
            "t\n0\n0.1\n",
            "t,q1\n0,1\n",
            "t,q1\n0,1\n0.1,abc\n",
            "t,q1\n0,1\n0.1,2\n0.3,3\n",
            "t,q1\n0,1\n0,2\n",
            "t,q1,q2,dq1\n0,1,2,3\n0.1,1,2,3\n",
        ];
        for text in bad {
            assert!(parse_trajectory(text.as_bytes()).is_err(), "{text:?}");
        }
        assert!(parse_trajectory("t,q1\n0,1\n0.1,2\n0.2,3\n".as_bytes()).is_ok());
    }

    #[test]
    fn tolerates_tiny_jitter() {
        let text = "t,q1\n0,1\n0.1000000000001,2\n0.2,3\n";
        assert!(parse_trajectory(text.as_bytes()).is_ok());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("geosyn-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("out.json");
        write_json(&p, &serde_json::json!({"schema_version": SCHEMA_VERSION})).unwrap();
        write_json(&p, &serde_json::json!({"schema_version": SCHEMA_VERSION, "a": 1})).unwrap();
        let text = read_to_string(&p).unwrap();
        assert!(text.contains("\"a\": 1"));
        let leftovers: Vec<_> = fs::read_dir(&dir).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_trajectory(Path::new("/nonexistent/motion.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/motion.csv"));
    }
}
