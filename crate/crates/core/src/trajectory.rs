//! Load-position references sampled on the control grid.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Waypoints of the benchmark profile, rad.
pub const BENCHMARK_WAYPOINTS: [f64; 6] = [0.0, 1.0, -0.5, 0.75, -1.0, 0.0];
/// Times at which the benchmark profile visits its waypoints, s.
pub const BENCHMARK_TIMES: [f64; 6] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
pub const BENCHMARK_NAME: &str = "benchmark";

/// Grid spacing tolerance, s.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Rest-to-rest quintic from `p0` to `p1` over `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quintic {
    pub p0: f64,
    pub p1: f64,
    pub duration: f64,
}

impl Quintic {
    /// Position, velocity and acceleration at local time `t` (clamped to the
    /// segment).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let t = t.clamp(0.0, self.duration);
        let d = self.p1 - self.p0;
        let tau = t / self.duration;
        let tau2 = tau * tau;
        let tau3 = tau2 * tau;
        // s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5
        let s = tau3 * (10.0 - 15.0 * tau + 6.0 * tau2);
        let ds = 30.0 * tau2 * (1.0 - 2.0 * tau + tau2);
        let dds = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * tau2);
        (
            self.p0 + d * s,
            d * ds / self.duration,
            d * dds / (self.duration * self.duration),
        )
    }
}

/// Piecewise quintic profile through waypoints, at rest at every waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointProfile {
    times: Vec<f64>,
    segments: Vec<Quintic>,
}

impl WaypointProfile {
    pub fn new(times: &[f64], positions: &[f64]) -> Result<Self> {
        if times.len() != positions.len() || times.len() < 2 {
            return Err(invalid("waypoints", "need at least two (time, position) pairs"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("waypoints", "times must be strictly increasing"));
        }
        let segments = times
            .windows(2)
            .zip(positions.windows(2))
            .map(|(t, p)| Quintic { p0: p[0], p1: p[1], duration: t[1] - t[0] })
            .collect();
        Ok(Self { times: times.to_vec(), segments })
    }

    pub fn benchmark() -> Self {
        Self::new(&BENCHMARK_TIMES, &BENCHMARK_WAYPOINTS).expect("benchmark waypoints are valid")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let idx = self.times[1..self.times.len() - 1]
            .iter()
            .position(|&tb| t < tb)
            .unwrap_or(self.segments.len() - 1);
        self.segments[idx].eval(t - self.times[idx])
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub name: String,
    /// Generator parameters as `key=value` pairs.
    pub params: Vec<(String, String)>,
    /// Derivative columns were computed by finite differences.
    pub synthesized_derivatives: bool,
}

/// Reference `theta*(t)` with its first and second derivatives on a uniform
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub theta_ref: Vec<f64>,
    pub dtheta_ref: Vec<f64>,
    pub ddtheta_ref: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Samples a waypoint profile on `[0, end]` with spacing `h`.
    pub fn sample(profile: &WaypointProfile, h: f64, name: &str) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("h_ctrl", "must be finite and positive"));
        }
        let end = profile.end_time();
        let steps = libm::round(end / h) as usize;
        if libm::fabs(steps as f64 * h - end) > GRID_TOLERANCE {
            return Err(invalid("h_ctrl", "must divide the trajectory duration"));
        }
        let n = steps + 1;
        let mut traj = Self {
            t: Vec::with_capacity(n),
            theta_ref: Vec::with_capacity(n),
            dtheta_ref: Vec::with_capacity(n),
            ddtheta_ref: Vec::with_capacity(n),
            meta: TrajectoryMeta {
                name: name.to_string(),
                params: alloc::vec![("h".to_string(), alloc::format!("{h}"))],
                synthesized_derivatives: false,
            },
        };
        for k in 0..n {
            let t = k as f64 * h;
            let (p, v, a) = profile.eval(t);
            traj.t.push(t);
            traj.theta_ref.push(p);
            traj.dtheta_ref.push(v);
            traj.ddtheta_ref.push(a);
        }
        Ok(traj)
    }

    /// Builds a trajectory from raw columns. Missing derivative columns are
    /// synthesized with centered differences (one-sided at the ends).
    pub fn from_columns(
        t: Vec<f64>,
        theta_ref: Vec<f64>,
        derivatives: Option<(Vec<f64>, Vec<f64>)>,
        name: &str,
    ) -> Result<Self> {
        if t.len() < 2 || theta_ref.len() != t.len() {
            return Err(Error::Format("need at least two rows with matching column lengths".into()));
        }
        if t.iter().chain(theta_ref.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite value".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("time column is not strictly increasing".into()));
        }
        let h = t[1] - t[0];
        for (k, w) in t.windows(2).enumerate() {
            if libm::fabs((w[1] - w[0]) - h) > GRID_TOLERANCE {
                return Err(Error::Format(alloc::format!("non-uniform grid at row {}", k + 1)));
            }
        }
        let (dtheta_ref, ddtheta_ref, synthesized) = match derivatives {
            Some((d1, d2)) => {
                if d1.len() != t.len() || d2.len() != t.len() {
                    return Err(Error::Format("derivative column length mismatch".into()));
                }
                (d1, d2, false)
            }
            None => {
                let d1 = finite_difference(&theta_ref, h);
                let d2 = finite_difference(&d1, h);
                (d1, d2, true)
            }
        };
        Ok(Self {
            t,
            theta_ref,
            dtheta_ref,
            ddtheta_ref,
            meta: TrajectoryMeta {
                name: name.to_string(),
                params: Vec::new(),
                synthesized_derivatives: synthesized,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn step(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn end_time(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }
}

/// Benchmark multi-reversal profile on `[0, 10]` s.
pub fn benchmark_trajectory(h_ctrl: f64) -> Result<Trajectory> {
    if !(h_ctrl.is_finite() && h_ctrl > 0.0 && h_ctrl <= 0.01) {
        return Err(invalid("h_ctrl", "must lie in (0, 0.01] s"));
    }
    Trajectory::sample(&WaypointProfile::benchmark(), h_ctrl, BENCHMARK_NAME)
}

fn finite_difference(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                (y[1] - y[0]) / h
            } else if k == n - 1 {
                (y[n - 1] - y[n - 2]) / h
            } else {
                (y[k + 1] - y[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}
