//! Tracking-error metrics against closed-form synthetic traces.

use nalgebra::Vector3;
use proptest::prelude::*;
use twinlink::metrics::{
    build_report, same_time_error, setpoint_errors, window_stats, ArrivalRecord, ErrorSample, PoseTrace, TraceSource,
};

fn trace(robot_id: u32, source: TraceSource, hz: f64, n: usize, f: impl Fn(f64) -> Vector3<f64>) -> PoseTrace {
    let mut t = PoseTrace::new(robot_id, source);
    for k in 0..n {
        let time = k as f64 / hz;
        t.push(time, f(time));
    }
    t
}

#[test]
fn delayed_constant_speed_trace_lags_by_v_dt() {
    let v = Vector3::new(0.12, -0.05, 0.03);
    let dt_lag = 0.032;
    let path = |t: f64| Vector3::new(0.2, 0.1, 0.9) + v * t;
    let planner = trace(1, TraceSource::Planner, 125.0, 500, path);
    let twin = trace(1, TraceSource::Twin, 250.0, 1000, |t| path(t - dt_lag));
    let series = same_time_error(&planner, &twin);
    assert_eq!(series.len(), 500);
    for e in &series {
        assert!((e.error - v.norm() * dt_lag).abs() < 1e-12, "{}", e.error);
    }
}

#[test]
fn constant_offset_gives_constant_error() {
    let d = Vector3::new(0.003, 0.0, 0.0);
    let path = |t: f64| Vector3::new(t.sin(), t.cos(), 0.5 * t);
    let a = trace(1, TraceSource::Planner, 125.0, 300, path);
    let b = trace(1, TraceSource::Twin, 125.0, 300, |t| path(t) + d);
    let series = same_time_error(&a, &b);
    assert!(series.iter().all(|e| (e.error - 0.003).abs() < 1e-15));
    let s = window_stats(&series, 0.6, 1.0).unwrap();
    assert!((s.mean - 0.003).abs() < 1e-15 && (s.max - 0.003).abs() < 1e-15);
    assert!((s.coverage - 1.0).abs() < 1e-12, "{}", s.coverage);
}

#[test]
fn first_order_arrival_error_matches_closed_form() {
    let (tau, hz): (f64, f64) = (0.05, 1000.0);
    let (p0, p1) = (Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.3, -0.1, 1.2));
    let gap = (p1 - p0).norm();
    // the twin chases p1 from p0 with a discrete first-order update
    let gain = 1.0 - (-1.0 / (hz * tau)).exp();
    let mut twin = PoseTrace::new(1, TraceSource::Twin);
    let mut x = p0;
    for k in 0..2000 {
        twin.push(k as f64 / hz, x);
        x += (p1 - x) * gain;
    }
    let arrivals: Vec<ArrivalRecord> = [0.0, 0.01, 0.05, 0.123, 0.3]
        .iter()
        .enumerate()
        .map(|(i, &t)| ArrivalRecord {
            robot_id: 1,
            setpoint_id: i,
            arrival_t: t,
            position: p1,
        })
        .collect();
    let errs = setpoint_errors(&twin, &arrivals);
    for (a, e) in arrivals.iter().zip(&errs) {
        let closed = gap * (-a.arrival_t / tau).exp();
        assert!(
            (e.unwrap() - closed).abs() < 1e-6,
            "t={} {} vs {closed}",
            a.arrival_t,
            e.unwrap()
        );
    }
    let late = ArrivalRecord {
        arrival_t: 5.0,
        ..arrivals[0]
    };
    assert_eq!(setpoint_errors(&twin, &[late]), [None]);
}

#[test]
fn exponential_window_mean_matches_integral() {
    let (tau, e0, hz): (f64, f64, f64) = (0.05, 0.002, 240.0);
    let series: Vec<ErrorSample> = (0..=480)
        .map(|k| {
            let t = k as f64 / hz;
            ErrorSample {
                t,
                error: e0 * (-t / tau).exp(),
            }
        })
        .collect();
    let s = window_stats(&series, 0.0, 1.0).unwrap();
    let closed = e0 * tau * (1.0 - (-1.0f64 / tau).exp());
    let rel = (s.mean - closed).abs() / closed;
    println!("window mean {} vs closed form {closed} ({:.3}%)", s.mean, rel * 100.0);
    assert!(rel < 0.02);
    assert_eq!(s.max, e0);
    assert_eq!(s.coverage, 1.0);
    // strictly decreasing error: the window mean sits below the arrival error
    assert!(s.mean < series[0].error);
}

#[test]
fn constant_windows_and_partial_coverage() {
    let zero: Vec<ErrorSample> = (0..=250)
        .map(|k| ErrorSample {
            t: k as f64 * 0.004,
            error: 0.0,
        })
        .collect();
    let s = window_stats(&zero, 0.0, 1.0).unwrap();
    assert_eq!((s.mean, s.max), (0.0, 0.0));
    let c: Vec<ErrorSample> = (0..=125)
        .map(|k| ErrorSample {
            t: k as f64 * 0.004,
            error: 0.7,
        })
        .collect();
    let s = window_stats(&c, 0.0, 1.0).unwrap();
    assert!((s.mean - 0.7).abs() < 1e-15 && s.max == 0.7);
    assert!((s.coverage - 0.5).abs() < 1e-12);
    assert!(window_stats(&c, 2.0, 1.0).is_none());
}

fn synthetic_run(offset: Vector3<f64>) -> (Vec<PoseTrace>, Vec<PoseTrace>, Vec<ArrivalRecord>) {
    let path = |t: f64| offset + Vector3::new(0.3 * (1.3 * t).sin(), 0.2 * t.cos(), 0.8 + 0.05 * t);
    let planner = vec![
        trace(1, TraceSource::Planner, 125.0, 1250, path),
        trace(2, TraceSource::Planner, 125.0, 1250, |t| {
            path(t) * 1.0 + Vector3::new(1.0, 0.0, 0.0)
        }),
    ];
    let twin = vec![
        trace(1, TraceSource::Twin, 250.0, 2500, |t| path(t - 0.02)),
        trace(2, TraceSource::Twin, 250.0, 2500, |t| {
            path(t - 0.05) + Vector3::new(1.0, 0.0, 0.0)
        }),
    ];
    let arrivals = (0..10)
        .map(|i| {
            let robot_id = 1 + (i % 2) as u32;
            let t = 0.8 + i as f64;
            let extra = if robot_id == 2 {
                Vector3::new(1.0, 0.0, 0.0)
            } else {
                Vector3::zeros()
            };
            ArrivalRecord {
                robot_id,
                setpoint_id: i,
                arrival_t: t,
                position: path(t) + extra,
            }
        })
        .collect();
    (planner, twin, arrivals)
}

#[test]
fn aggregates_are_built_from_per_setpoint_values() {
    let (p, t, a) = synthetic_run(Vector3::zeros());
    let r = build_report(&p, &t, &a, 1.0);
    let inc: Vec<_> = r.setpoints.iter().filter(|s| s.included).collect();
    // the last arrival's window runs past the end of the traces
    assert_eq!(r.global.excluded, [9]);
    assert_eq!(inc.len(), 9);
    let n = inc.len() as f64;
    let mean = |f: &dyn Fn(&&twinlink::metrics::SetpointReport) -> f64| inc.iter().map(f).sum::<f64>() / n;
    let max = |f: &dyn Fn(&&twinlink::metrics::SetpointReport) -> f64| inc.iter().map(f).fold(0.0, f64::max);
    assert!((r.global.setpoint_mean - mean(&|s| s.arrival_error.unwrap())).abs() < 1e-15);
    assert_eq!(r.global.setpoint_max, max(&|s| s.arrival_error.unwrap()));
    assert!((r.global.window_mean - mean(&|s| s.window_mean.unwrap())).abs() < 1e-15);
    assert_eq!(r.global.window_max, max(&|s| s.window_max.unwrap()));
    let all: Vec<f64> = twinlink::metrics::error_series(&p, &t)
        .iter()
        .flat_map(|(_, s)| s.iter().map(|e| e.error))
        .collect();
    assert_eq!(r.global.same_time_max, all.iter().cloned().fold(0.0, f64::max));
    assert!((r.global.same_time_mean - all.iter().sum::<f64>() / all.len() as f64).abs() < 1e-15);
    let json: twinlink::metrics::ErrorReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json, r);
    assert!(r.summary().contains("setpoints included: 9 of 10"));
}

#[test]
fn statistics_are_invariant_under_translation() {
    let (p, t, a) = synthetic_run(Vector3::zeros());
    let r0 = build_report(&p, &t, &a, 1.0);
    let (p, t, a) = synthetic_run(Vector3::new(12.5, -3.25, 7.0));
    let r1 = build_report(&p, &t, &a, 1.0);
    let close = |x: f64, y: f64| (x - y).abs() < 1e-9;
    let (g0, g1) = (&r0.global, &r1.global);
    assert!(close(g0.same_time_mean, g1.same_time_mean) && close(g0.same_time_max, g1.same_time_max));
    assert!(close(g0.setpoint_mean, g1.setpoint_mean) && close(g0.setpoint_max, g1.setpoint_max));
    assert!(close(g0.window_mean, g1.window_mean) && close(g0.window_max, g1.window_max));
    assert_eq!(g0.excluded, g1.excluded);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn window_mean_lies_between_extremes(
        errs in prop::collection::vec(0.0f64..1.0, 2..400),
        start in 0.0f64..0.5,
        window in 0.05f64..2.0,
    ) {
        let series: Vec<ErrorSample> = errs.iter().enumerate().map(|(k, &e)| ErrorSample { t: k as f64 * 0.004, error: e }).collect();
        if let Some(s) = window_stats(&series, start, window) {
            let inside: Vec<f64> = series.iter().filter(|e| e.t >= start - 1e-9 && e.t <= start + window + 1e-9).map(|e| e.error).collect();
            let lo = inside.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(s.mean >= lo - 1e-12 && s.mean <= s.max + 1e-12);
            prop_assert_eq!(s.max, inside.iter().cloned().fold(0.0, f64::max));
            prop_assert!((0.0..=1.0).contains(&s.coverage));
        }
    }

    #[test]
    fn same_time_error_is_symmetric_on_shared_ticks(
        pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..50),
        shift in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let mut a = PoseTrace::new(1, TraceSource::Planner);
        let mut b = PoseTrace::new(1, TraceSource::Twin);
        let s = Vector3::from(shift);
        for (k, p) in pts.iter().enumerate() {
            a.push(k as f64 * 0.008, Vector3::from(*p));
            b.push(k as f64 * 0.008, Vector3::from(*p) * 0.5 + s);
        }
        let ab = same_time_error(&a, &b);
        let ba = same_time_error(&b, &a);
        prop_assert_eq!(ab.len(), ba.len());
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x.error - y.error).abs() < 1e-12);
        }
    }
}
