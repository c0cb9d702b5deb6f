use std::path::{Path, PathBuf};

use serde_json::json;

use super::{ExperimentConfig, ExperimentError};
use crate::metrics::{
    build_report, error_series, read_arrivals, read_traces, write_arrivals, write_error_series, write_traces,
    ErrorReport, ErrorSample, PoseTrace, TraceSource, DEFAULT_WINDOW,
};
use crate::planner::PlannerLog;
use crate::scenecam::write_ply;
use crate::twin::TwinLog;

pub const PLANNER_TRACE: &str = "planner_trace.csv";
pub const TWIN_TRACE: &str = "twin_trace.csv";
pub const ARRIVALS: &str = "arrivals.csv";
pub const CAPTURES: &str = "captures.csv";
pub const MANIFEST: &str = "capture_manifest.json";
pub const CLOUD: &str = "cloud.ply";
pub const REPORT: &str = "report.json";
pub const ERRORS: &str = "errors.csv";

/// Paths of the files a run wrote (images excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub planner_trace: PathBuf,
    pub twin_trace: PathBuf,
    pub arrivals: PathBuf,
    pub captures: PathBuf,
    pub manifest: PathBuf,
    pub cloud: PathBuf,
    pub report: PathBuf,
    pub errors: PathBuf,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::io(path, e)
}

fn metrics_err(e: crate::metrics::CsvError) -> ExperimentError {
    ExperimentError::Io(e.to_string())
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_captures(path: &Path, log: &TwinLog) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| ExperimentError::io(path, e))?;
    let e = |err: csv::Error| ExperimentError::io(path, err);
    w.write_record([
        "robot_id",
        "seq",
        "setpoint_id",
        "trigger_t",
        "t",
        "rgb",
        "seg",
        "depth",
    ])
    .map_err(e)?;
    for c in &log.captures {
        w.write_record([
            c.robot_id.to_string(),
            c.seq.to_string(),
            c.setpoint_id.to_string(),
            f(c.trigger_t),
            f(c.t),
            c.files[0].clone(),
            c.files[1].clone(),
            c.files[2].clone(),
        ])
        .map_err(e)?;
    }
    w.flush().map_err(io(path))
}

fn output_files(out: &Path) -> OutputFiles {
    OutputFiles {
        planner_trace: out.join(PLANNER_TRACE),
        twin_trace: out.join(TWIN_TRACE),
        arrivals: out.join(ARRIVALS),
        captures: out.join(CAPTURES),
        manifest: out.join(MANIFEST),
        cloud: out.join(CLOUD),
        report: out.join(REPORT),
        errors: out.join(ERRORS),
    }
}

/// Writes the planner trace and the arrival times.
pub fn write_planner_outputs(out: &Path, planner: &PlannerLog) -> Result<(), ExperimentError> {
    let files = output_files(out);
    write_traces(&files.planner_trace, &planner.traces).map_err(metrics_err)?;
    write_arrivals(&files.arrivals, &planner.arrivals).map_err(metrics_err)
}

/// Writes the twin trace, the capture index and manifest, and the fused cloud.
pub fn write_twin_outputs(out: &Path, cfg: &ExperimentConfig, twin: &TwinLog) -> Result<(), ExperimentError> {
    let files = output_files(out);
    write_traces(&files.twin_trace, &twin.traces).map_err(metrics_err)?;
    write_captures(&files.captures, twin)?;
    let intr = cfg.camera.intrinsics;
    let manifest = json!({
        "captures": twin.captures.len(),
        "images_per_capture": ["rgb.ppm", "seg.ppm", "depth.pfm"],
        "intrinsics": intr,
        "depth": {
            "mode": cfg.camera.depth_mode.as_str(),
            "units": "m",
            "no_hit": "inf",
            "pfm_row_order": "bottom-up",
        },
        "seed": cfg.seed,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&files.manifest, text).map_err(io(&files.manifest))?;
    write_ply(&twin.cloud, &files.cloud)?;
    Ok(())
}

/// Writes the report and the same-time error series.
pub fn write_report(
    out: &Path,
    report: &ErrorReport,
    series: &[(u32, Vec<ErrorSample>)],
) -> Result<(), ExperimentError> {
    let files = output_files(out);
    std::fs::write(&files.report, report.to_json()).map_err(io(&files.report))?;
    write_error_series(&files.errors, series).map_err(metrics_err)
}

/// Writes every output of a combined run.
pub fn write_outputs(
    out: &Path,
    cfg: &ExperimentConfig,
    planner: &PlannerLog,
    twin: &TwinLog,
    report: &ErrorReport,
) -> Result<OutputFiles, ExperimentError> {
    write_planner_outputs(out, planner)?;
    write_twin_outputs(out, cfg, twin)?;
    write_report(out, report, &error_series(&planner.traces, &twin.traces))?;
    Ok(output_files(out))
}

type Loaded = (Vec<PoseTrace>, Vec<PoseTrace>, Vec<crate::metrics::ArrivalRecord>);

fn load_dir(dir: &Path) -> Result<Loaded, ExperimentError> {
    let planner = read_traces(&dir.join(PLANNER_TRACE)).map_err(metrics_err)?;
    let twin = read_traces(&dir.join(TWIN_TRACE)).map_err(metrics_err)?;
    let arrivals = read_arrivals(&dir.join(ARRIVALS)).map_err(metrics_err)?;
    if planner.iter().any(|t| t.source != TraceSource::Planner) || twin.iter().any(|t| t.source != TraceSource::Twin) {
        return Err(ExperimentError::Io(format!(
            "{}: trace files mix sources",
            dir.display()
        )));
    }
    Ok((planner, twin, arrivals))
}

/// Recomputes the report from the trace and arrival CSVs in `dir`.
pub fn analyze_dir(dir: &Path) -> Result<ErrorReport, ExperimentError> {
    let (planner, twin, arrivals) = load_dir(dir)?;
    Ok(build_report(&planner, &twin, &arrivals, DEFAULT_WINDOW))
}

/// As [`analyze_dir`], then rewrites `report.json` and `errors.csv` in `dir`.
pub fn analyze_and_write(dir: &Path) -> Result<ErrorReport, ExperimentError> {
    let (planner, twin, arrivals) = load_dir(dir)?;
    let report = build_report(&planner, &twin, &arrivals, DEFAULT_WINDOW);
    write_report(dir, &report, &error_series(&planner, &twin))?;
    Ok(report)
}
