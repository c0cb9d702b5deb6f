//! CSV exchange format for traces, arrivals and error series. Floats are
//! written with 17 significant digits so every value round-trips exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use thiserror::Error;

use super::{ArrivalRecord, ErrorSample, PoseTrace, TraceSource};

pub const TRACE_HEADER: [&str; 6] = ["t", "robot_id", "source", "x", "y", "z"];
pub const ARRIVAL_HEADER: [&str; 6] = ["robot_id", "setpoint_id", "arrival_t", "x", "y", "z"];
pub const ERROR_HEADER: [&str; 3] = ["t", "robot_id", "error"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: ::csv::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    Format { path: PathBuf, line: u64, reason: String },
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<::csv::Writer<BufWriter<File>>, CsvError> {
    let f = File::create(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(f)))
}

fn finish(mut w: ::csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), CsvError> {
    w.flush().map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let inner = w.into_inner().map_err(|e| CsvError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    inner
        .into_inner()
        .map_err(|e| CsvError::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?
        .sync_all()
        .map_err(|source| CsvError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_err(path: &Path) -> impl Fn(::csv::Error) -> CsvError + '_ {
    move |source| CsvError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes traces one after another, in the order given.
pub fn write_traces(path: &Path, traces: &[PoseTrace]) -> Result<(), CsvError> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(TRACE_HEADER).map_err(&e)?;
    for tr in traces {
        let id = tr.robot_id.to_string();
        for s in tr.samples() {
            w.write_record([
                fmt(s.t).as_str(),
                &id,
                tr.source.as_str(),
                &fmt(s.position.x),
                &fmt(s.position.y),
                &fmt(s.position.z),
            ])
            .map_err(&e)?;
        }
    }
    finish(w, path)
}

fn reader(path: &Path) -> Result<::csv::Reader<File>, CsvError> {
    let f = File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(::csv::Reader::from_reader(f))
}

fn check_header(r: &mut ::csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<(), CsvError> {
    let h = r.headers().map_err(csv_err(path))?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(CsvError::Format {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &::csv::StringRecord, i: usize, path: &Path) -> Result<T, CsvError> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).ok_or_else(|| CsvError::Format {
        path: path.to_path_buf(),
        line,
        reason: format!("missing column {}", i + 1),
    })?;
    raw.parse().map_err(|_| CsvError::Format {
        path: path.to_path_buf(),
        line,
        reason: format!("cannot parse {raw:?} in column {}", i + 1),
    })
}

/// Reads traces, grouped by (source, robot_id) in ascending order.
pub fn read_traces(path: &Path) -> Result<Vec<PoseTrace>, CsvError> {
    let mut r = reader(path)?;
    check_header(&mut r, path, &TRACE_HEADER)?;
    let mut out: BTreeMap<(TraceSource, u32), PoseTrace> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let t: f64 = field(&rec, 0, path)?;
        let robot: u32 = field(&rec, 1, path)?;
        let src_raw: String = field(&rec, 2, path)?;
        let source = TraceSource::parse(&src_raw).ok_or_else(|| CsvError::Format {
            path: path.to_path_buf(),
            line,
            reason: format!("unknown source {src_raw:?}"),
        })?;
        let p = Vector3::new(field(&rec, 3, path)?, field(&rec, 4, path)?, field(&rec, 5, path)?);
        let tr = out
            .entry((source, robot))
            .or_insert_with(|| PoseTrace::new(robot, source));
        if tr.samples().last().is_some_and(|s| s.t >= t) {
            return Err(CsvError::Format {
                path: path.to_path_buf(),
                line,
                reason: "time must strictly increase per robot".into(),
            });
        }
        tr.push(t, p);
    }
    Ok(out.into_values().collect())
}

pub fn write_arrivals(path: &Path, arrivals: &[ArrivalRecord]) -> Result<(), CsvError> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(ARRIVAL_HEADER).map_err(&e)?;
    for a in arrivals {
        w.write_record([
            a.robot_id.to_string(),
            a.setpoint_id.to_string(),
            fmt(a.arrival_t),
            fmt(a.position.x),
            fmt(a.position.y),
            fmt(a.position.z),
        ])
        .map_err(&e)?;
    }
    finish(w, path)
}

pub fn read_arrivals(path: &Path) -> Result<Vec<ArrivalRecord>, CsvError> {
    let mut r = reader(path)?;
    check_header(&mut r, path, &ARRIVAL_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(ArrivalRecord {
            robot_id: field(&rec, 0, path)?,
            setpoint_id: field(&rec, 1, path)?,
            arrival_t: field(&rec, 2, path)?,
            position: Vector3::new(field(&rec, 3, path)?, field(&rec, 4, path)?, field(&rec, 5, path)?),
        });
    }
    Ok(out)
}

/// Same-time error series, one row per planner sample.
pub fn write_error_series(path: &Path, series: &[(u32, Vec<ErrorSample>)]) -> Result<(), CsvError> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(ERROR_HEADER).map_err(&e)?;
    for (robot, s) in series {
        let id = robot.to_string();
        for x in s {
            w.write_record([fmt(x.t).as_str(), &id, &fmt(x.error)]).map_err(&e)?;
        }
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let mut a = PoseTrace::new(1, TraceSource::Planner);
        let mut b = PoseTrace::new(2, TraceSource::Twin);
        for i in 0..20 {
            let t = i as f64 / 125.0;
            a.push(t, Vector3::new(0.1 * t, -1.0 / 3.0, std::f64::consts::PI * t));
            b.push(t, Vector3::new(1e-300, 2.0f64.sqrt(), -t));
        }
        write_traces(&path, &[a.clone(), b.clone()]).unwrap();
        let back = read_traces(&path).unwrap();
        assert_eq!(back, vec![a, b]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,robot_id,source,x,y,z\n"));
    }

    #[test]
    fn bad_header_is_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let err = read_traces(&path).unwrap_err().to_string();
        assert!(err.contains("bad.csv"), "{err}");
    }
}
