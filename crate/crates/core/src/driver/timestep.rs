use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adaptive timestep controller parameters, in days and bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimestepController {
    pub dt0: f64,
    pub dt_max: f64,
    pub dt_mult: f64,
    /// Target pressure change per step.
    pub dp_target: f64,
    pub n_steps: usize,
    /// Optional end time; the run stops once it is reached.
    pub t_end: Option<f64>,
}

impl Default for TimestepController {
    fn default() -> Self {
        Self { dt0: 0.1, dt_max: 10.0, dt_mult: 1.1, dp_target: 5.0, n_steps: 20, t_end: None }
    }
}

impl TimestepController {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.dt0) || !pos(self.dt_max) || !pos(self.dp_target) || !(self.dt_mult >= 1.0) {
            return Err(Error::Config(format!(
                "timestep controller needs positive dt0, dt_max, dp_target and dt_mult >= 1: {self:?}"
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be >= 1".into()));
        }
        Ok(())
    }

    /// Step following one of size `dt` with maximum pressure change `dp_max`.
    pub fn next(&self, dt: f64, dp_max: f64) -> f64 {
        next_dt(dt, self.dt_max, self.dt_mult, self.dp_target, dp_max)
    }
}

/// `min(dt * min(dt_mult, dp_target / dp_max), dt_max)`; `dp_max = 0` gives
/// an infinite ratio.
pub fn next_dt(dt: f64, dt_max: f64, dt_mult: f64, dp_target: f64, dp_max: f64) -> f64 {
    let ratio = if dp_max == 0.0 { f64::INFINITY } else { dp_target / dp_max };
    (dt * dt_mult.min(ratio)).min(dt_max)
}
