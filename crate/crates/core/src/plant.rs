//! Nonlinear two-mass drive-train.
//!
//! Signal chain: commanded current `i` minus the friction current gives the
//! torque-producing current `i_r`; the torque block feeds the motor-speed
//! block `B_s`, whose output drives the load-speed block `C_s`. Angles are
//! integrated with the trapezoidal rule and the load angle passes through a
//! symmetric play operator (backlash).
//!
//! The linear part (torque block, `B_s`, `C_s`) is stepped as one joint
//! state-space model discretized exactly under zero-order hold. Friction is
//! evaluated once per step from the previous load speed, which keeps every
//! step explicit.

use core::f64::consts::PI;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{ContinuousSs, DiscreteSs, Mat, Vector};

/// Wear-related parameters: first natural frequency and damping ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct WearParams {
    /// First natural frequency, Hz.
    pub f1: f64,
    /// First damping ratio.
    #[cfg_attr(feature = "serde", serde(rename = "D1"))]
    pub d1: f64,
}

impl WearParams {
    pub const F1_RANGE: (f64, f64) = (30.0, 70.0);
    pub const D1_RANGE: (f64, f64) = (0.08, 0.15);

    /// Stiff, well-damped corner of the operating domain.
    pub const SIGMA_1: WearParams = WearParams { f1: 70.0, d1: 0.15 };
    /// Soft, lightly damped corner of the operating domain.
    pub const SIGMA_2: WearParams = WearParams { f1: 30.0, d1: 0.08 };

    pub const fn new(f1: f64, d1: f64) -> Self {
        Self { f1, d1 }
    }

    pub fn in_domain(&self) -> bool {
        (Self::F1_RANGE.0..=Self::F1_RANGE.1).contains(&self.f1)
            && (Self::D1_RANGE.0..=Self::D1_RANGE.1).contains(&self.d1)
    }

    /// Rejects values outside the operating domain when `strict`; otherwise
    /// only physically meaningless values (`f1 <= 0`, `D1` outside `(0, 1)`)
    /// are errors and out-of-domain values are logged.
    pub fn validate(&self, strict: bool) -> Result<()> {
        if !self.f1.is_finite() || self.f1 <= 0.0 {
            return Err(invalid("f1", "must be finite and positive"));
        }
        if !self.d1.is_finite() || self.d1 <= 0.0 || self.d1 >= 1.0 {
            return Err(invalid("D1", "must lie in (0, 1)"));
        }
        if !self.in_domain() {
            if strict {
                return Err(invalid(
                    "f1/D1",
                    alloc::format!(
                        "({}, {}) outside the operating domain 30 <= f1 <= 70, 0.08 <= D1 <= 0.15",
                        self.f1,
                        self.d1
                    ),
                ));
            }
            log::warn!("wear parameters f1={} D1={} outside the operating domain", self.f1, self.d1);
        }
        Ok(())
    }
}

impl Default for WearParams {
    fn default() -> Self {
        Self { f1: 55.0, d1: 0.13 }
    }
}

/// Interpretation of the current-to-torque block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum TorqueMode {
    /// `M_m = K_t * i_r`.
    #[default]
    Static,
    /// `M_m = K_t / (J_m s) * i_r`.
    Integrator,
}

/// Damping term used in the denominator of the load-speed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum CsDenominator {
    /// `s^2 + 2 D1 w02 s + w01^2`.
    #[default]
    AsPrinted,
    /// `s^2 + 2 D1 w01 s + w01^2`.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(deny_unknown_fields, default)
)]
pub struct PlantParams {
    pub wear: WearParams,
    /// Motor inertia, kg m^2.
    pub jm: f64,
    /// Load inertia, kg m^2.
    pub jl: f64,
    /// Torque constant, N m / A.
    pub kt: f64,
    /// Coulomb friction level, N m.
    pub fc: f64,
    /// Viscous friction coefficient, N m s / rad.
    pub fv: f64,
    /// Total dead-band width at the load, rad.
    pub backlash_width: f64,
    /// Speed scale of the `tanh` sign regularization, rad/s.
    pub sgn_epsilon: f64,
    pub a_s_mode: TorqueMode,
    pub cs_denominator: CsDenominator,
    /// Reject wear parameters outside the operating domain.
    pub strict: bool,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            wear: WearParams::default(),
            jm: 1.0e-3,
            jl: 1.0e-3,
            kt: 1.0,
            fc: 0.05,
            fv: 5.0e-4,
            backlash_width: 1.0e-3,
            sgn_epsilon: 1.0e-3,
            a_s_mode: TorqueMode::Static,
            cs_denominator: CsDenominator::AsPrinted,
            strict: false,
        }
    }
}

impl PlantParams {
    pub fn with_wear(mut self, wear: WearParams) -> Self {
        self.wear = wear;
        self
    }

    /// Friction-free, backlash-free copy (linear plant).
    pub fn linear(mut self) -> Self {
        self.fc = 0.0;
        self.fv = 0.0;
        self.backlash_width = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, "must be finite and positive"))
            }
        }
        fn non_negative(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(field, "must be finite and non-negative"))
            }
        }
        positive("jm", self.jm)?;
        positive("jl", self.jl)?;
        positive("kt", self.kt)?;
        non_negative("fc", self.fc)?;
        non_negative("fv", self.fv)?;
        non_negative("backlash_width", self.backlash_width)?;
        positive("sgn_epsilon", self.sgn_epsilon)?;
        self.wear.validate(self.strict)
    }

    /// `(Jm + Jl) / Kt`, the inertial current per unit load acceleration.
    pub fn inertial_gain(&self) -> f64 {
        (self.jm + self.jl) / self.kt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub w01: f64,
    pub w02: f64,
    pub d2: f64,
    pub k_shaft: f64,
    pub b_shaft: f64,
}

/// Resonance quantities implied by the wear parameters and inertias.
pub fn derive_params(p: &PlantParams) -> Result<DerivedParams> {
    if !(p.jm.is_finite() && p.jm > 0.0) {
        return Err(invalid("jm", "inertia must be positive"));
    }
    if !(p.jl.is_finite() && p.jl > 0.0) {
        return Err(invalid("jl", "inertia must be positive"));
    }
    let ratio = libm::sqrt((p.jm + p.jl) / p.jm);
    let w01 = 2.0 * PI * p.wear.f1;
    let w02 = w01 * ratio;
    let d2 = ratio * p.wear.d1;
    let k_shaft = p.jl * w01 * w01;
    let b_shaft = 2.0 * p.wear.d1 * k_shaft / w02;
    Ok(DerivedParams { w01, w02, d2, k_shaft, b_shaft })
}

/// Friction current `(Fc * sgn_eps(w) + Fv * w) / Kt` with
/// `sgn_eps(w) = tanh(w / sgn_epsilon)`.
pub fn friction_current(omega_l: f64, p: &PlantParams) -> f64 {
    (p.fc * libm::tanh(omega_l / p.sgn_epsilon) + p.fv * omega_l) / p.kt
}

/// Symmetric play operator: the output holds while the input moves inside
/// the band `prev_out +- width/2` and is dragged along at the band edge.
pub fn play(theta_in: f64, prev_out: f64, width: f64) -> f64 {
    let half = 0.5 * width;
    prev_out.clamp(theta_in - half, theta_in + half)
}

/// Stateful play operator driven sample by sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backlash {
    width: f64,
    output: f64,
}

impl Backlash {
    /// Starts centered: the first output equals `theta0`.
    pub fn new(width: f64, theta0: f64) -> Self {
        Self { width, output: theta0 }
    }

    pub fn update(&mut self, theta_in: f64) -> f64 {
        self.output = play(theta_in, self.output, self.width);
        self.output
    }

    pub fn output(&self) -> f64 {
        self.output
    }

    pub fn offset(&self, theta_in: f64) -> f64 {
        theta_in - self.output
    }
}

/// Continuous-time realization of the motor-speed block (torque to `w_m`).
pub fn motor_speed_block(p: &PlantParams, d: &DerivedParams) -> ContinuousSs<3> {
    let num = [d.w01 * d.w01 / p.jm, 2.0 * p.wear.d1 * d.w01 / p.jm, 1.0 / p.jm];
    let den = [0.0, d.w02 * d.w02, 2.0 * d.d2 * d.w02];
    ContinuousSs::controllable_canonical(&num, &den)
}

/// Continuous-time realization of the load-speed block (`w_m` to `w_l`).
pub fn load_speed_block(p: &PlantParams, d: &DerivedParams) -> ContinuousSs<2> {
    let damping_freq = match p.cs_denominator {
        CsDenominator::AsPrinted => d.w02,
        CsDenominator::Symmetric => d.w01,
    };
    let num = [d.w01 * d.w01, 2.0 * p.wear.d1 * d.w01];
    let den = [d.w01 * d.w01, 2.0 * p.wear.d1 * damping_freq];
    ContinuousSs::controllable_canonical(&num, &den)
}

/// Full plant state. The shaft torque is exposed through [`Plant::shaft_torque`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub x_b: [f64; 3],
    pub x_c: [f64; 2],
    /// Torque integrator state; only used in [`TorqueMode::Integrator`].
    pub torque: f64,
    pub theta_m: f64,
    /// Load angle before the play operator.
    pub theta_l_free: f64,
    /// Load angle after the play operator.
    pub theta_l: f64,
    pub backlash_offset: f64,
    pub last_if: f64,
    pub omega_m: f64,
    pub omega_l: f64,
}

impl PlantState {
    fn is_sane(&self) -> bool {
        const LIMIT: f64 = 1e9;
        let ok = |v: f64| v.is_finite() && libm::fabs(v) <= LIMIT;
        self.x_b.iter().chain(self.x_c.iter()).all(|v| ok(*v))
            && [
                self.torque,
                self.theta_m,
                self.theta_l_free,
                self.theta_l,
                self.omega_m,
                self.omega_l,
                self.last_if,
            ]
            .iter()
            .all(|v| ok(*v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOutput {
    pub omega_m: f64,
    pub theta_l: f64,
    pub omega_l: f64,
}

const JOINT: usize = 6;
const JOINT_AUG: usize = JOINT + 1;

/// Discretized drive-train stepper.
#[derive(Debug, Clone)]
pub struct Plant {
    params: PlantParams,
    derived: DerivedParams,
    h: f64,
    motor_block: ContinuousSs<3>,
    load_block: ContinuousSs<2>,
    load_block_discrete: DiscreteSs<2>,
    /// Joint state `[torque, x_b, x_c]`.
    joint_a: Mat<JOINT>,
    joint_b: Vector<JOINT>,
    state: PlantState,
    play: Backlash,
    steps: usize,
}

impl Plant {
    /// Builds the stepper for a fixed plant step `h_plant`.
    pub fn new(params: PlantParams, h_plant: f64) -> Result<Self> {
        params.validate()?;
        if !(h_plant.is_finite() && h_plant > 0.0) {
            return Err(invalid("h_plant", "must be finite and positive"));
        }
        if h_plant > 1.0 / (10.0 * params.wear.f1) {
            log::warn!(
                "h_plant={} under-resolves the {} Hz resonance (limit {})",
                h_plant,
                params.wear.f1,
                1.0 / (10.0 * params.wear.f1)
            );
        }
        let derived = derive_params(&params)?;
        let motor_block = motor_speed_block(&params, &derived);
        let load_block = load_speed_block(&params, &derived);
        let load_block_discrete = load_block.discretize_zoh::<3>(h_plant);

        let mut a = [[0.0; JOINT]; JOINT];
        let mut b = [0.0; JOINT];
        for i in 0..3 {
            for j in 0..3 {
                a[1 + i][1 + j] = motor_block.a[i][j];
            }
        }
        match params.a_s_mode {
            TorqueMode::Static => {
                for i in 0..3 {
                    b[1 + i] = motor_block.b[i] * params.kt;
                }
            }
            TorqueMode::Integrator => {
                b[0] = params.kt / params.jm;
                for i in 0..3 {
                    a[1 + i][0] = motor_block.b[i];
                }
            }
        }
        for i in 0..2 {
            for j in 0..3 {
                a[4 + i][1 + j] = load_block.b[i] * motor_block.c[j];
            }
            for j in 0..2 {
                a[4 + i][4 + j] = load_block.a[i][j];
            }
        }
        let (joint_a, joint_b) = crate::linalg::zoh::<JOINT, JOINT_AUG>(&a, &b, h_plant);

        Ok(Self {
            params,
            derived,
            h: h_plant,
            motor_block,
            load_block,
            load_block_discrete,
            joint_a,
            joint_b,
            state: PlantState::default(),
            play: Backlash::new(params.backlash_width, 0.0),
            steps: 0,
        })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn motor_block(&self) -> &ContinuousSs<3> {
        &self.motor_block
    }

    pub fn load_block(&self) -> &ContinuousSs<2> {
        &self.load_block
    }

    pub fn load_block_discrete(&self) -> &DiscreteSs<2> {
        &self.load_block_discrete
    }

    /// Overwrites the linear states; angles and backlash are reset to zero.
    pub fn set_linear_state(&mut self, x_b: [f64; 3], x_c: [f64; 2]) {
        self.state = PlantState { x_b, x_c, ..PlantState::default() };
        self.state.omega_m = crate::linalg::dot(&self.motor_block.c, &x_b);
        self.state.omega_l = crate::linalg::dot(&self.load_block.c, &x_c);
        self.play = Backlash::new(self.params.backlash_width, 0.0);
    }

    /// Interconnecting shaft torque `K (theta_m - theta_l) + B (w_m - w_l)`,
    /// using the load angle before the play operator.
    pub fn shaft_torque(&self) -> f64 {
        let s = &self.state;
        self.derived.k_shaft * (s.theta_m - s.theta_l_free)
            + self.derived.b_shaft * (s.omega_m - s.omega_l)
    }

    /// Advances the plant by one step `h_plant` with the current command
    /// held constant.
    pub fn step(&mut self, i_cmd: f64) -> Result<PlantOutput> {
        let step = self.steps;
        if !i_cmd.is_finite() {
            return Err(Error::Diverged { step });
        }
        let i_f = friction_current(self.state.omega_l, &self.params);
        let i_r = i_cmd - i_f;

        let mut z = [0.0; JOINT];
        z[0] = self.state.torque;
        z[1..4].copy_from_slice(&self.state.x_b);
        z[4..6].copy_from_slice(&self.state.x_c);
        let mut next = crate::linalg::matvec(&self.joint_a, &z);
        for (n, b) in next.iter_mut().zip(self.joint_b.iter()) {
            *n += b * i_r;
        }

        let x_b = [next[1], next[2], next[3]];
        let x_c = [next[4], next[5]];
        let omega_m = crate::linalg::dot(&self.motor_block.c, &x_b);
        let omega_l = crate::linalg::dot(&self.load_block.c, &x_c);

        let s = &mut self.state;
        s.theta_m += 0.5 * self.h * (s.omega_m + omega_m);
        s.theta_l_free += 0.5 * self.h * (s.omega_l + omega_l);
        s.theta_l = self.play.update(s.theta_l_free);
        s.backlash_offset = self.play.offset(s.theta_l_free);
        s.torque = next[0];
        s.x_b = x_b;
        s.x_c = x_c;
        s.omega_m = omega_m;
        s.omega_l = omega_l;
        s.last_if = i_f;
        self.steps += 1;

        if !s.is_sane() {
            return Err(Error::Diverged { step });
        }
        Ok(PlantOutput { omega_m, theta_l: s.theta_l, omega_l })
    }
}
