//! Rendering twin: lag model against closed forms, transport delay as a pure
//! time shift, capture accounting and open-loop independence of the planner.

use proptest::prelude::*;
use twinlink::experiment::{plan, simulate_loopback, ExperimentConfig, ExperimentPlan, RobotSetpoints};
use twinlink::kinematics::JointConfig;
use twinlink::metrics::{write_arrivals, write_traces};
use twinlink::planner::{plan_robot, Robot};
use twinlink::scenecam::Scene;
use twinlink::twin::{lag_step, CaptureSettings, LagParams, Twin, TwinRobot, TwinState};

fn cfg6(v: [f64; 6]) -> JointConfig {
    JointConfig::new(v).unwrap()
}

#[test]
fn first_order_residual_is_exponential() {
    let start = cfg6([0.0, -1.0, 0.5, 0.2, -0.3, 1.0]);
    let target = cfg6([0.4, -1.3, 0.9, 0.0, 0.1, 0.7]);
    let p = LagParams {
        tau: 0.1,
        rate_limit: None,
        transport_delay: 0.0,
    };
    for &dt in &[0.004f64, 0.001, 0.01] {
        let mut s = TwinState {
            q: start,
            q_target: target,
            t: 0.0,
        };
        let mut prev_err = f64::INFINITY;
        let steps = (1.0 / dt).round() as usize;
        for k in 1..=steps {
            s = lag_step(&s, dt, &p);
            let err = s.q.max_abs_diff(&target);
            assert!(err < prev_err, "error must shrink every tick");
            prev_err = err;
            let t = k as f64 * dt;
            if (t - 0.1).abs() < 1e-9 {
                for j in 0..6 {
                    let e0 = target[j] - start[j];
                    let residual = (target[j] - s.q[j]) / e0;
                    assert!((residual - (-1.0f64).exp()).abs() < 1e-6, "dt {dt}: {residual}");
                }
            }
            for j in 0..6 {
                let closed = (target[j] - start[j]) * (-t / 0.1).exp();
                assert!(((target[j] - s.q[j]) - closed).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn rate_limit_caps_one_step() {
    let s = TwinState {
        q: cfg6([0.0; 6]),
        q_target: cfg6([1.0, -1.0, 0.05, 0.0, 2.0, -0.1]),
        t: 0.0,
    };
    let p = LagParams {
        tau: 0.0,
        rate_limit: Some(1.0),
        transport_delay: 0.0,
    };
    let n = lag_step(&s, 0.1, &p);
    let expected = [0.1, -0.1, 0.05, 0.0, 0.1, -0.1];
    for (j, (got, want)) in n.q.angles().iter().zip(expected).enumerate() {
        assert!((got - want).abs() < 1e-15, "joint {j}: {got}");
    }
}

fn small_plan(cfg: &ExperimentConfig, n: usize) -> ExperimentPlan {
    let home = JointConfig::new(cfg.robots[0].home).unwrap();
    let robot = Robot::new("robot1", cfg.chain(0).unwrap(), home).unwrap();
    let sps = cfg.setpoints()[0].setpoints[..n].to_vec();
    let p = plan_robot(&robot, &sps, &cfg.motion, &cfg.collision_boxes(), 0.0).unwrap();
    ExperimentPlan {
        robots: vec![robot],
        setpoints: vec![RobotSetpoints {
            robot: "robot1".into(),
            setpoints: sps,
        }],
        plans: vec![p],
    }
}

fn twin_for(cfg: &ExperimentConfig, plan: &ExperimentPlan, lag: LagParams, capture: Option<CaptureSettings>) -> Twin {
    let robots = vec![TwinRobot {
        name: "robot1".into(),
        chain: cfg.chain(0).unwrap(),
        initial: plan.robots[0].home,
        capture_ids: plan.plans[0].arrivals.iter().map(|a| a.setpoint_id).collect(),
    }];
    Twin::new(
        robots,
        cfg.collision_boxes(),
        lag,
        250,
        Scene::desk(&cfg.scene, cfg.seed),
        capture,
    )
    .unwrap()
}

#[test]
fn transport_delay_is_a_pure_time_shift() {
    let cfg = ExperimentConfig::bundled();
    let plan = small_plan(&cfg, 2);
    let lag = LagParams {
        tau: 0.0,
        rate_limit: None,
        transport_delay: 0.04,
    };
    let twin = twin_for(&cfg, &plan, lag, None);
    let (p, t) = simulate_loopback(&plan, 125, Some(twin), 250).unwrap();
    let (p, t) = (&p.traces[0], &t.unwrap().traces[0]);
    let ps = p.samples();
    let mut checked = 0;
    for s in t.samples() {
        // zero-order hold of the planner samples published at least 40 ms ago
        let k = ((s.t - 0.04) * 125.0 + 1e-9).floor();
        let expected = if k < 0.0 {
            ps[0].position
        } else {
            ps[(k as usize).min(ps.len() - 1)].position
        };
        assert!((s.position - expected).norm() < 1e-6, "t={}", s.t);
        if k >= 0.0 && ((s.t - 0.04) * 125.0 - k).abs() < 1e-9 {
            // on a planner tick the shift is exact in interpolated time too
            let shifted = p.position_at(s.t - 0.04).unwrap();
            assert!((s.position - shifted).norm() < 1e-6);
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn two_triggers_write_six_files() {
    let mut cfg = ExperimentConfig::bundled();
    cfg.set_resolution(64, 36);
    let plan = small_plan(&cfg, 2);
    let dir = tempfile::tempdir().unwrap();
    let capture = CaptureSettings {
        out_dir: dir.path().to_path_buf(),
        intrinsics: cfg.camera.intrinsics,
        depth_mode: cfg.camera.depth_mode,
        camera_offset: cfg.camera_offset(),
        cloud_points: 100,
    };
    let twin = twin_for(&cfg, &plan, cfg.twin.lag, Some(capture));
    let (_, log) = simulate_loopback(&plan, 125, Some(twin), 250).unwrap();
    let log = log.unwrap();
    assert_eq!(log.captures.len(), 2);
    let files: Vec<_> = std::fs::read_dir(dir.path().join("robot1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files.len(), 6, "{files:?}");
    for c in &log.captures {
        for f in &c.files {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        assert!(c.t >= c.trigger_t + cfg.twin.lag.transport_delay - 1e-9);
    }
    assert!(log.captures.windows(2).all(|w| w[0].t < w[1].t));
}

fn planner_bytes(log: &twinlink::planner::PlannerLog) -> (Vec<u8>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("t.csv"), dir.path().join("a.csv"));
    write_traces(&a, &log.traces).unwrap();
    write_arrivals(&b, &log.arrivals).unwrap();
    (std::fs::read(a).unwrap(), std::fs::read(b).unwrap())
}

#[test]
fn planner_output_does_not_depend_on_the_twin() {
    let mut cfg = ExperimentConfig::bundled();
    cfg.fast_mode();
    let plan = plan(&cfg).unwrap();
    let (alone, none) = simulate_loopback(&plan, 125, None, 250).unwrap();
    assert!(none.is_none());
    let heavy = LagParams {
        tau: 0.2,
        rate_limit: Some(0.5),
        transport_delay: 0.1,
    };
    let twin = twinlink::experiment::build_twin(&cfg, &plan, None).unwrap();
    let (with_twin, _) = simulate_loopback(&plan, 125, Some(twin), 250).unwrap();
    let slow = {
        let mut c = cfg.clone();
        c.twin.lag = heavy;
        twinlink::experiment::build_twin(&c, &plan, None).unwrap()
    };
    let (with_slow, _) = simulate_loopback(&plan, 125, Some(slow), 250).unwrap();
    assert_eq!(alone, with_twin);
    assert_eq!(alone, with_slow);
    assert_eq!(planner_bytes(&alone), planner_bytes(&with_twin));
    assert_eq!(planner_bytes(&alone), planner_bytes(&with_slow));
}

#[test]
fn twin_trace_is_monotone_in_time() {
    let cfg = ExperimentConfig::bundled();
    let plan = small_plan(&cfg, 3);
    let twin = twin_for(&cfg, &plan, cfg.twin.lag, None);
    let (_, t) = simulate_loopback(&plan, 125, Some(twin), 250).unwrap();
    let trace = &t.unwrap().traces[0];
    assert!(trace.samples().windows(2).all(|w| w[1].t > w[0].t));
    assert!(((trace.samples()[1].t - trace.samples()[0].t) - 0.004).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lag_step_never_overshoots(
        q in prop::array::uniform6(-3.0f64..3.0),
        target in prop::array::uniform6(-3.0f64..3.0),
        tau in 0.0f64..0.5,
        rate in prop::option::of(0.01f64..10.0),
        dt in 0.001f64..0.05,
    ) {
        let s = TwinState { q: cfg6(q), q_target: cfg6(target), t: 0.0 };
        let p = LagParams { tau, rate_limit: rate, transport_delay: 0.0 };
        let n = lag_step(&s, dt, &p);
        let before = s.q.delta_to(&s.q_target);
        let after = n.q.delta_to(&s.q_target);
        for j in 0..6 {
            prop_assert!(after[j].abs() <= before[j].abs() + 1e-12);
            prop_assert!(after[j] * before[j] >= -1e-24, "joint {} crossed the target", j);
            if let Some(r) = rate {
                prop_assert!(s.q.delta_to(&n.q)[j].abs() <= r * dt + 1e-12);
            }
        }
        prop_assert!((n.t - dt).abs() < 1e-15);
    }
}
