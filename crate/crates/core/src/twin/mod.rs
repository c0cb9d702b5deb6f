//! Rendering twin: follows published joint states open-loop through a lag
//! model (transport delay, first-order response, rate limit), records its
//! end-effector trace, and captures images on trigger.

mod runner;

pub use runner::{run_twin_ws, CaptureRecord, CaptureSettings, Event, Twin, TwinError, TwinLog, TwinRobot};

use serde::{Deserialize, Serialize};

use crate::kinematics::JointConfig;

/// Default rendering-twin tick rate. A multiple of the default 125 Hz
/// publish rate, so every joint-state stamp falls on a twin tick.
pub const DEFAULT_TICK_HZ: u32 = 250;

/// Lag between a published joint state and the rendered arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagParams {
    /// First-order time constant, seconds; 0 follows the target at once.
    pub tau: f64,
    /// Per-joint speed limit, rad/s; `None` is unlimited.
    pub rate_limit: Option<f64>,
    /// Delay before a published target takes effect, seconds.
    pub transport_delay: f64,
}

impl Default for LagParams {
    fn default() -> Self {
        Self::ideal()
    }
}

impl LagParams {
    /// The ideal follower.
    pub fn ideal() -> Self {
        Self {
            tau: 0.0,
            rate_limit: None,
            transport_delay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(format!("tau must be a finite value >= 0, got {}", self.tau));
        }
        if let Some(r) = self.rate_limit {
            if !(r > 0.0) {
                return Err(format!("rate_limit must be > 0, got {r}"));
            }
        }
        if !(self.transport_delay >= 0.0 && self.transport_delay.is_finite()) {
            return Err(format!(
                "transport_delay must be a finite value >= 0, got {}",
                self.transport_delay
            ));
        }
        Ok(())
    }

    pub fn delay_ns(&self) -> i64 {
        (self.transport_delay * 1e9).round() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinState {
    pub q: JointConfig,
    /// Latest target whose transport delay has elapsed.
    pub q_target: JointConfig,
    pub t: f64,
}

/// Advances one tick: per joint, first-order tracking of the target along the
/// shortest arc, then clamping the step to `rate_limit·dt`.
pub fn lag_step(state: &TwinState, dt: f64, params: &LagParams) -> TwinState {
    assert!(dt > 0.0, "dt must be positive");
    let gain = if params.tau == 0.0 {
        1.0
    } else {
        -(-dt / params.tau).exp_m1()
    };
    let max_step = params.rate_limit.map_or(f64::INFINITY, |r| r * dt);
    let delta = state.q.delta_to(&state.q_target);
    let mut exact = true;
    let q: [f64; 6] = std::array::from_fn(|j| {
        let step = (delta[j] * gain).clamp(-max_step, max_step);
        if step == delta[j] {
            state.q_target[j]
        } else {
            exact = false;
            state.q[j] + step
        }
    });
    TwinState {
        q: if exact {
            state.q_target
        } else {
            JointConfig::new(q).expect("finite step")
        },
        q_target: state.q_target,
        t: state.t + dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: f64) -> JointConfig {
        JointConfig::new([v; 6]).unwrap()
    }

    #[test]
    fn ideal_follower_is_exact() {
        let s = TwinState {
            q: cfg(0.0),
            q_target: JointConfig::new([0.1, -2.0, 3.0, 0.3, 1e-17, -3.1]).unwrap(),
            t: 0.0,
        };
        let n = lag_step(&s, 0.004, &LagParams::ideal());
        assert_eq!(n.q, s.q_target);
    }

    #[test]
    fn rate_clamp_gives_exact_step() {
        let s = TwinState {
            q: cfg(0.0),
            q_target: cfg(1.0),
            t: 0.0,
        };
        let p = LagParams {
            tau: 0.0,
            rate_limit: Some(1.0),
            transport_delay: 0.0,
        };
        let n = lag_step(&s, 0.1, &p);
        assert!((n.q[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn clamp_follows_the_short_way_round() {
        let s = TwinState {
            q: cfg(3.0),
            q_target: cfg(-3.0),
            t: 0.0,
        };
        let p = LagParams {
            tau: 0.0,
            rate_limit: Some(0.1),
            transport_delay: 0.0,
        };
        let n = lag_step(&s, 1.0, &p);
        assert!((n.q[0] - 3.1).abs() < 1e-12, "{}", n.q[0]);
    }

    #[test]
    fn validation() {
        assert!(LagParams::ideal().validate().is_ok());
        let bad = LagParams {
            tau: -1.0,
            ..LagParams::ideal()
        };
        assert!(bad.validate().is_err());
        let bad = LagParams {
            rate_limit: Some(0.0),
            ..LagParams::ideal()
        };
        assert!(bad.validate().is_err());
    }
}
