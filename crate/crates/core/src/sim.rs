//! Closed-loop simulation and tracking metrics.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Normal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, Measurement, References};
use crate::error::{invalid, Error, Result};
use crate::plant::{Plant, PlantParams};
use crate::trajectory::{benchmark_trajectory, Trajectory, BENCHMARK_NAME};

pub const DEFAULT_H_CTRL: f64 = 1e-3;
pub const DEFAULT_H_PLANT: f64 = 5e-5;
pub const DEFAULT_T_END: f64 = 10.0;
pub const DEFAULT_W_U: f64 = 1e-4;

/// Penalty base assigned to diverged runs by the tuner.
pub const DIVERGENCE_PENALTY: f64 = 1e6;

/// Where the reference comes from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TrajectorySource {
    #[default]
    Benchmark,
    Samples(Trajectory),
}

/// Optional additive Gaussian measurement noise (standard deviations).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields, default))]
pub struct MeasurementNoise {
    /// Load angle noise, rad.
    pub theta_std: f64,
    /// Motor speed noise, rad/s.
    pub omega_std: f64,
}

impl MeasurementNoise {
    pub fn is_off(&self) -> bool {
        self.theta_std == 0.0 && self.omega_std == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub trajectory: TrajectorySource,
    pub h_ctrl: f64,
    pub h_plant: f64,
    pub t_end: f64,
    pub w_u: f64,
    pub seed: u64,
    pub noise: MeasurementNoise,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            plant: PlantParams::default(),
            controller: ControllerConfig::default(),
            trajectory: TrajectorySource::Benchmark,
            h_ctrl: DEFAULT_H_CTRL,
            h_plant: DEFAULT_H_PLANT,
            t_end: DEFAULT_T_END,
            w_u: DEFAULT_W_U,
            seed: 0,
            noise: MeasurementNoise::default(),
        }
    }
}

impl Scenario {
    /// Number of plant substeps per control period.
    pub fn substeps(&self) -> Result<usize> {
        if !(self.h_ctrl.is_finite() && self.h_ctrl > 0.0) {
            return Err(invalid("h_ctrl", "must be finite and positive"));
        }
        if !(self.h_plant.is_finite() && self.h_plant > 0.0) {
            return Err(invalid("h_plant", "must be finite and positive"));
        }
        let ratio = self.h_ctrl / self.h_plant;
        let n = libm::round(ratio);
        if n < 1.0 || libm::fabs(ratio - n) > 1e-9 * ratio {
            return Err(invalid("h_plant", "must divide h_ctrl exactly"));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.substeps()?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid("t_end", "must be finite and positive"));
        }
        if !(self.w_u.is_finite() && self.w_u >= 0.0) {
            return Err(invalid("w_u", "must be finite and non-negative"));
        }
        if !(self.noise.theta_std >= 0.0 && self.noise.omega_std >= 0.0) {
            return Err(invalid("noise", "standard deviations must be non-negative"));
        }
        self.plant.validate()?;
        self.controller.validate()
    }

    /// Reference resolved on the control grid.
    pub fn resolve_trajectory(&self) -> Result<Trajectory> {
        match &self.trajectory {
            TrajectorySource::Benchmark => benchmark_trajectory(self.h_ctrl),
            TrajectorySource::Samples(tr) => {
                if libm::fabs(tr.step() - self.h_ctrl) > 1e-9 {
                    return Err(invalid("trajectory", "grid spacing must equal h_ctrl"));
                }
                Ok(tr.clone())
            }
        }
    }

    pub fn trajectory_name(&self) -> &str {
        match &self.trajectory {
            TrajectorySource::Benchmark => BENCHMARK_NAME,
            TrajectorySource::Samples(tr) => &tr.meta.name,
        }
    }
}

/// One control instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Record {
    pub t: f64,
    pub theta_ref: f64,
    pub theta_l: f64,
    pub omega_m: f64,
    pub omega_l: f64,
    pub u1: f64,
    pub u2: f64,
    pub f_hat_outer: f64,
    pub f_hat_inner: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub series: Vec<Record>,
    pub itae: f64,
    pub iau: f64,
    pub j: f64,
    pub diverged: bool,
    /// Time of the last recorded sample.
    pub t_final: f64,
    pub saturation_count: usize,
}

impl RunResult {
    /// Criterion with the divergence penalty applied: diverged runs get
    /// `1e6` plus the unsimulated fraction of the horizon.
    pub fn penalized_j(&self, t_end: f64) -> f64 {
        if self.diverged || !self.j.is_finite() {
            DIVERGENCE_PENALTY * (1.0 + (t_end - self.t_final).max(0.0) / t_end)
        } else {
            self.j
        }
    }
}

/// Trapezoidal integral of `t |theta_l - theta_ref|` over the series.
pub fn itae(series: &[Record], h: f64) -> f64 {
    let weighted: Vec<f64> = series.iter().map(|r| r.t * libm::fabs(r.theta_l - r.theta_ref)).collect();
    trapezoid(&weighted, h)
}

/// Trapezoidal integral of `|u2|` over the series.
pub fn iau(series: &[Record], h: f64) -> f64 {
    let effort: Vec<f64> = series.iter().map(|r| libm::fabs(r.u2)).collect();
    trapezoid(&effort, h)
}

/// Uniform-grid trapezoid rule.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Runs the closed loop: the controller acts at `h_ctrl`, its current is
/// held over `h_ctrl / h_plant` plant substeps, and measurements are taken at
/// control instants.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let substeps = scenario.substeps()?;
    let traj = scenario.resolve_trajectory()?;
    let steps = libm::round(scenario.t_end / scenario.h_ctrl) as usize;
    if steps + 1 > traj.len() {
        return Err(invalid("t_end", "trajectory is shorter than the simulated horizon"));
    }

    let mut plant = Plant::new(scenario.plant, scenario.h_plant)?;
    let mut controller = scenario.controller.build(&scenario.plant, scenario.h_ctrl)?;
    let mut noise = NoiseSource::new(&scenario.noise, scenario.seed)?;

    let mut series = Vec::with_capacity(steps + 1);
    let mut diverged = false;
    let mut saturation_count = 0;
    let (mut theta_l, mut omega_m, mut omega_l) = (0.0, 0.0, 0.0);

    for k in 0..=steps {
        let refs = References {
            theta: traj.theta_ref[k],
            dtheta: traj.dtheta_ref[k],
            domega_l: traj.ddtheta_ref[k],
        };
        let meas = Measurement {
            theta_l: theta_l + noise.theta(),
            omega_m: omega_m + noise.omega(),
        };
        let out = controller.step(meas, refs);
        if out.saturated {
            saturation_count += 1;
        }
        series.push(Record {
            t: k as f64 * scenario.h_ctrl,
            theta_ref: refs.theta,
            theta_l,
            omega_m,
            omega_l,
            u1: out.u1,
            u2: out.u2,
            f_hat_outer: out.f_hat_outer,
            f_hat_inner: out.f_hat_inner,
            saturated: out.saturated,
        });
        if k == steps {
            break;
        }
        for _ in 0..substeps {
            match plant.step(out.u2) {
                Ok(o) => {
                    theta_l = o.theta_l;
                    omega_m = o.omega_m;
                    omega_l = o.omega_l;
                }
                Err(Error::Diverged { step }) => {
                    log::warn!("plant diverged at substep {step} (t = {})", series.last().map_or(0.0, |r| r.t));
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if diverged {
            break;
        }
    }
    if saturation_count > 0 {
        log::debug!("current command saturated on {saturation_count} control steps");
    }

    let itae = itae(&series, scenario.h_ctrl);
    let iau = iau(&series, scenario.h_ctrl);
    let j = itae + scenario.w_u * iau;
    let t_final = series.last().map_or(0.0, |r| r.t);
    Ok(RunResult { series, itae, iau, j, diverged, t_final, saturation_count })
}

struct NoiseSource {
    rng: Option<ChaCha8Rng>,
    theta: Option<Normal<f64>>,
    omega: Option<Normal<f64>>,
}

impl NoiseSource {
    fn new(cfg: &MeasurementNoise, seed: u64) -> Result<Self> {
        if cfg.is_off() {
            return Ok(Self { rng: None, theta: None, omega: None });
        }
        let dist = |std: f64| -> Result<Option<Normal<f64>>> {
            if std == 0.0 {
                Ok(None)
            } else {
                Normal::new(0.0, std).map(Some).map_err(|_| invalid("noise", "invalid standard deviation"))
            }
        };
        Ok(Self {
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
            theta: dist(cfg.theta_std)?,
            omega: dist(cfg.omega_std)?,
        })
    }

    fn theta(&mut self) -> f64 {
        match (self.rng.as_mut(), self.theta.as_ref()) {
            (Some(rng), Some(d)) => d.sample(rng),
            _ => 0.0,
        }
    }

    fn omega(&mut self) -> f64 {
        match (self.rng.as_mut(), self.omega.as_ref()) {
            (Some(rng), Some(d)) => d.sample(rng),
            _ => 0.0,
        }
    }
}
