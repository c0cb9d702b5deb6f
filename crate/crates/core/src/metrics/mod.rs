//! Tracking-error statistics between the planning and rendering twins.
//!
//! Both traces are sampled on the same simulated clock; alignment is by
//! timestamp with linear interpolation, never by cross-correlation.

mod csv;

pub use self::csv::{read_arrivals, read_traces, write_arrivals, write_error_series, write_traces, CsvError};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Default analysis window after arrival, seconds.
pub const DEFAULT_WINDOW: f64 = 1.0;
/// Setpoints whose window coverage falls below this are excluded from aggregates.
pub const MIN_COVERAGE: f64 = 0.9;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Planner,
    Twin,
}

impl TraceSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceSource::Planner => "planner",
            TraceSource::Twin => "twin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "planner" => Some(TraceSource::Planner),
            "twin" => Some(TraceSource::Twin),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub position: Vector3<f64>,
}

/// End-effector world positions of one robot from one twin.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrace {
    pub robot_id: u32,
    pub source: TraceSource,
    samples: Vec<TraceSample>,
}

impl PoseTrace {
    pub fn new(robot_id: u32, source: TraceSource) -> Self {
        Self {
            robot_id,
            source,
            samples: Vec::new(),
        }
    }

    /// Appends a sample; panics if `t` does not strictly increase.
    pub fn push(&mut self, t: f64, position: Vector3<f64>) {
        if let Some(last) = self.samples.last() {
            assert!(t > last.t, "trace time must strictly increase ({} after {})", t, last.t);
        }
        self.samples.push(TraceSample { t, position });
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Linearly interpolated position; `None` outside the sampled range.
    pub fn position_at(&self, t: f64) -> Option<Vector3<f64>> {
        let (t0, t1) = self.time_range()?;
        if t < t0 - TIME_EPS || t > t1 + TIME_EPS {
            return None;
        }
        let k = self.samples.partition_point(|s| s.t < t);
        if k == 0 {
            return Some(self.samples[0].position);
        }
        if k == self.samples.len() {
            return Some(self.samples[k - 1].position);
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        if b.t == t {
            return Some(b.position);
        }
        let s = (t - a.t) / (b.t - a.t);
        Some(a.position + (b.position - a.position) * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    pub error: f64,
}

/// Distance between `a` and `b` at every sample time of `a` inside the
/// overlap of the two traces, with `b` interpolated.
pub fn same_time_error(a: &PoseTrace, b: &PoseTrace) -> Vec<ErrorSample> {
    let (Some((a0, a1)), Some((b0, b1))) = (a.time_range(), b.time_range()) else {
        log::warn!("same-time error over an empty trace");
        return Vec::new();
    };
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi {
        log::warn!("traces do not overlap in time: [{a0}, {a1}] vs [{b0}, {b1}]");
        return Vec::new();
    }
    a.samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .filter_map(|s| {
            b.position_at(s.t).map(|pb| ErrorSample {
                t: s.t,
                error: (s.position - pb).norm(),
            })
        })
        .collect()
}

/// When a robot reached a setpoint, as recorded by the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalRecord {
    pub robot_id: u32,
    pub setpoint_id: usize,
    pub arrival_t: f64,
    pub position: Vector3<f64>,
}

/// Distance from the interpolated twin position at each arrival time to the
/// setpoint; `None` where the arrival lies outside the trace.
pub fn setpoint_errors(twin: &PoseTrace, arrivals: &[ArrivalRecord]) -> Vec<Option<f64>> {
    arrivals
        .iter()
        .map(|a| twin.position_at(a.arrival_t).map(|p| (p - a.position).norm()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub mean: f64,
    pub max: f64,
    /// Fraction of the window covered by the series, in [0, 1].
    pub coverage: f64,
}

/// Mean and max of the error over `[start, start + window]`.
///
/// The mean is the time average of the piecewise-linear series (trapezoidal
/// rule over the uniform ticks), so it converges to the continuous mean
/// rather than being biased by the inclusive end points.
pub fn window_stats(series: &[ErrorSample], start: f64, window: f64) -> Option<WindowStats> {
    assert!(window > 0.0, "window must be positive");
    let end = start + window;
    let lo = series.partition_point(|s| s.t < start - TIME_EPS);
    let hi = series.partition_point(|s| s.t <= end + TIME_EPS);
    let w = &series[lo..hi];
    let first = w.first()?;
    let last = w.last()?;
    let max = w.iter().map(|s| s.error).fold(0.0, f64::max);
    let span = last.t - first.t;
    let mean = if span > 0.0 {
        w.windows(2)
            .map(|p| 0.5 * (p[0].error + p[1].error) * (p[1].t - p[0].t))
            .sum::<f64>()
            / span
    } else {
        first.error
    };
    let coverage = ((last.t.min(end) - first.t.max(start)) / window).clamp(0.0, 1.0);
    Some(WindowStats { mean, max, coverage })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointReport {
    pub id: usize,
    pub robot_id: u32,
    pub arrival_t: f64,
    /// Metres; `None` if the arrival lies outside the twin trace.
    pub arrival_error: Option<f64>,
    pub window_mean: Option<f64>,
    pub window_max: Option<f64>,
    pub coverage: f64,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub same_time_mean: f64,
    pub same_time_max: f64,
    pub setpoint_mean: f64,
    pub setpoint_max: f64,
    pub window_mean: f64,
    pub window_max: f64,
    pub included: usize,
    /// Setpoint ids left out of the aggregates.
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub window: f64,
    pub setpoints: Vec<SetpointReport>,
    pub global: GlobalStats,
}

fn mean_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for v in values {
        sum += v;
        max = max.max(v);
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (sum / n as f64, max)
    }
}

/// Same-time error series of every robot, planner as reference.
pub fn error_series(planner: &[PoseTrace], twin: &[PoseTrace]) -> Vec<(u32, Vec<ErrorSample>)> {
    planner
        .iter()
        .filter_map(|p| {
            let t = twin.iter().find(|t| t.robot_id == p.robot_id)?;
            Some((p.robot_id, same_time_error(p, t)))
        })
        .collect()
}

/// Per-setpoint statistics first, then the arithmetic mean and max over the
/// setpoints whose window coverage is at least [`MIN_COVERAGE`].
pub fn build_report(planner: &[PoseTrace], twin: &[PoseTrace], arrivals: &[ArrivalRecord], window: f64) -> ErrorReport {
    let series = error_series(planner, twin);
    let mut setpoints = Vec::with_capacity(arrivals.len());
    for a in arrivals {
        let trace = twin.iter().find(|t| t.robot_id == a.robot_id);
        let arrival_error = trace
            .and_then(|t| t.position_at(a.arrival_t))
            .map(|p| (p - a.position).norm());
        let stats = series
            .iter()
            .find(|(id, _)| *id == a.robot_id)
            .and_then(|(_, s)| window_stats(s, a.arrival_t, window));
        let coverage = stats.map_or(0.0, |s| s.coverage);
        setpoints.push(SetpointReport {
            id: a.setpoint_id,
            robot_id: a.robot_id,
            arrival_t: a.arrival_t,
            arrival_error,
            window_mean: stats.map(|s| s.mean),
            window_max: stats.map(|s| s.max),
            coverage,
            included: arrival_error.is_some() && stats.is_some() && coverage >= MIN_COVERAGE,
        });
    }
    let excluded: Vec<usize> = setpoints.iter().filter(|s| !s.included).map(|s| s.id).collect();
    if !excluded.is_empty() {
        log::warn!("{} setpoints excluded from aggregates: {:?}", excluded.len(), excluded);
    }
    let inc = || setpoints.iter().filter(|s| s.included);
    let (setpoint_mean, setpoint_max) = mean_max(inc().filter_map(|s| s.arrival_error));
    let (window_mean, _) = mean_max(inc().filter_map(|s| s.window_mean));
    let (_, window_max) = mean_max(inc().filter_map(|s| s.window_max));
    let (same_time_mean, same_time_max) = mean_max(series.iter().flat_map(|(_, s)| s.iter().map(|e| e.error)));
    let included = inc().count();
    ErrorReport {
        window,
        setpoints,
        global: GlobalStats {
            same_time_mean,
            same_time_max,
            setpoint_mean,
            setpoint_max,
            window_mean,
            window_max,
            included,
            excluded,
        },
    }
}

impl ErrorReport {
    /// Human-readable summary in millimetres.
    pub fn summary(&self) -> String {
        let g = &self.global;
        let mm = |m: f64| format!("{:.3}", m * 1e3);
        let mut out = String::new();
        out.push_str(&format!("{:<22}{:>12}{:>12}\n", "error (mm)", "mean", "max"));
        out.push_str(&format!(
            "{:<22}{:>12}{:>12}\n",
            "same-time",
            mm(g.same_time_mean),
            mm(g.same_time_max)
        ));
        out.push_str(&format!(
            "{:<22}{:>12}{:>12}\n",
            "at setpoint",
            mm(g.setpoint_mean),
            mm(g.setpoint_max)
        ));
        out.push_str(&format!(
            "{:<22}{:>12}{:>12}\n",
            format!("{}-second window", self.window),
            mm(g.window_mean),
            mm(g.window_max)
        ));
        out.push_str(&format!(
            "setpoints included: {} of {}\n",
            g.included,
            self.setpoints.len()
        ));
        out
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
