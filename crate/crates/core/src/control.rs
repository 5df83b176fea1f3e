//! Cascade position/speed controllers.
//!
//! Both cascades share the same structure: an outer loop on the load angle
//! produces the motor-speed reference `u1`, and an inner loop on the motor
//! speed produces the current command `u2`. The classical variant uses P
//! outside and PI inside; the model-free variant closes both loops with
//! intelligent proportional (iP) controllers built on the ultra-local model
//! `dy/dt = F + alpha * u`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::plant::PlantParams;

pub const DEFAULT_WINDOW: usize = 5;
pub const MIN_WINDOW: usize = 2;
pub const MAX_WINDOW: usize = 21;

/// Gains of the P (position) / PI (speed) cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields, default))]
pub struct PpiGains {
    /// Outer proportional gain, 1/s.
    pub kp_o: f64,
    /// Inner proportional gain, A s / rad.
    pub kp_i: f64,
    /// Inner integral gain, A / rad.
    pub ki_i: f64,
    /// Saturation of the integral contribution, A.
    pub integrator_limit: f64,
}

impl Default for PpiGains {
    /// Stand-in for vendor-supplied gains: adequate on a stiff axis and
    /// noticeably under-damped on a soft one.
    fn default() -> Self {
        Self { kp_o: 150.0, kp_i: 0.3, ki_i: 15.0, integrator_limit: 10.0 }
    }
}

impl PpiGains {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("kp_o", self.kp_o), ("kp_i", self.kp_i), ("ki_i", self.ki_i)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(field, "gain must be finite and non-negative"));
            }
        }
        if !(self.integrator_limit.is_finite() && self.integrator_limit > 0.0) {
            return Err(invalid("integrator_limit", "must be finite and positive"));
        }
        Ok(())
    }
}

/// Gains of the iP / iP cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields, default))]
pub struct IpGains {
    pub alpha1: f64,
    pub alpha2: f64,
    pub kp_o_star: f64,
    pub kp_i_star: f64,
}

impl Default for IpGains {
    fn default() -> Self {
        Self { alpha1: 14.0, alpha2: 500.0, kp_o_star: 100.0, kp_i_star: 800.0 }
    }
}

impl IpGains {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !v.is_finite() || v == 0.0 {
                return Err(invalid(field, "must be finite and nonzero"));
            }
        }
        for (field, v) in [("kp_o_star", self.kp_o_star), ("kp_i_star", self.kp_i_star)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(field, "gain must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Feedforward selection.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields, default))]
pub struct FfConfig {
    /// Add the reference velocity to the speed reference.
    pub kinematic_outer: bool,
    /// Add `(Jm + Jl) / Kt` times the reference acceleration to the current.
    pub kinematic_inner: bool,
    /// Add the resonance-inverting anticipatory term.
    pub model_based: bool,
    /// Natural frequency assumed by the anticipatory term, Hz.
    pub ff_f1: f64,
    /// Damping ratio assumed by the anticipatory term.
    #[cfg_attr(feature = "serde", serde(rename = "ff_D1"))]
    pub ff_d1: f64,
}

impl Default for FfConfig {
    fn default() -> Self {
        Self { kinematic_outer: true, kinematic_inner: true, model_based: false, ff_f1: 55.0, ff_d1: 0.13 }
    }
}

impl FfConfig {
    pub fn none() -> Self {
        Self { kinematic_outer: false, kinematic_inner: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ff_f1.is_finite() && self.ff_f1 > 0.0) {
            return Err(invalid("ff_f1", "must be finite and positive"));
        }
        if !(self.ff_d1 > 0.0 && self.ff_d1 < 1.0) {
            return Err(invalid("ff_D1", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Least-squares slope of a straight line through uniformly spaced samples
/// (oldest first). Two samples give the backward difference.
pub fn derivative_estimate(window: &[f64], h: f64) -> Result<f64> {
    let n = window.len();
    if n < MIN_WINDOW {
        return Err(Error::NotReady { have: n, need: MIN_WINDOW });
    }
    let center = 0.5 * (n as f64 - 1.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, y) in window.iter().enumerate() {
        let d = k as f64 - center;
        num += d * y;
        den += d * d;
    }
    Ok(num / (den * h))
}

/// Causal sliding-window differentiator.
#[derive(Debug, Clone)]
pub struct Differentiator {
    samples: VecDeque<f64>,
    len: usize,
    h: f64,
}

impl Differentiator {
    pub fn new(len: usize, h: f64) -> Result<Self> {
        if !(MIN_WINDOW..=MAX_WINDOW).contains(&len) {
            return Err(invalid("window", "must lie in 2..=21"));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("h_ctrl", "must be finite and positive"));
        }
        Ok(Self { samples: VecDeque::with_capacity(len), len, h })
    }

    pub fn push(&mut self, y: f64) {
        if self.samples.len() == self.len {
            self.samples.pop_front();
        }
        self.samples.push_back(y);
    }

    pub fn is_ready(&self) -> bool {
        self.samples.len() == self.len
    }

    /// Slope over the full window; not ready until `len` samples arrived.
    pub fn estimate(&self) -> Result<f64> {
        if !self.is_ready() {
            return Err(Error::NotReady { have: self.samples.len(), need: self.len });
        }
        let (a, b) = self.samples.as_slices();
        if b.is_empty() {
            derivative_estimate(a, self.h)
        } else {
            let mut buf = [0.0; MAX_WINDOW];
            buf[..a.len()].copy_from_slice(a);
            buf[a.len()..a.len() + b.len()].copy_from_slice(b);
            derivative_estimate(&buf[..self.len], self.h)
        }
    }

    pub fn window(&self) -> usize {
        self.len
    }
}

/// Online estimate of the lumped term `F` of the ultra-local model
/// `dy/dt = F + alpha * u`.
///
/// The output slope is the window least-squares slope and the input term is
/// averaged over the same window: `F_hat = slope(y) - alpha * slope(int u)`.
/// With a held input or a two-sample window this is exactly
/// `dy/dt_hat(t_k) - alpha * u(t_{k-1})`.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    output: Differentiator,
    input_integral: Differentiator,
    integral: f64,
    h: f64,
    last_u: f64,
    f_hat: f64,
}

impl EstimatorState {
    pub fn new(window: usize, h: f64) -> Result<Self> {
        Ok(Self {
            output: Differentiator::new(window, h)?,
            input_integral: Differentiator::new(window, h)?,
            integral: 0.0,
            h,
            last_u: 0.0,
            f_hat: 0.0,
        })
    }

    /// Feeds the new output sample and the control held over the last
    /// period. On `NotReady` the estimate stays at zero.
    pub fn update(&mut self, y: f64, u_prev: f64, alpha: f64) -> Result<f64> {
        if self.output.samples.is_empty() {
            self.integral = 0.0;
        } else {
            self.integral += self.h * u_prev;
        }
        self.output.push(y);
        self.input_integral.push(self.integral);
        self.last_u = u_prev;
        let dy = self.output.estimate()?;
        let mean_u = self.input_integral.estimate()?;
        self.f_hat = dy - alpha * mean_u;
        Ok(self.f_hat)
    }

    pub fn f_hat(&self) -> f64 {
        self.f_hat
    }

    pub fn last_u(&self) -> f64 {
        self.last_u
    }

    pub fn is_ready(&self) -> bool {
        self.output.is_ready()
    }
}

/// Intelligent proportional law `u = (Kp e + dy_ref - F_hat) / alpha`,
/// with `e = y_ref - y`. Substituted into `dy/dt = F + alpha u` with an
/// exact estimate it leaves `de/dt = -Kp e`.
pub fn ip_law(e: f64, dy_ref: f64, f_hat: f64, kp: f64, alpha: f64) -> f64 {
    (kp * e + dy_ref - f_hat) / alpha
}

/// Reference samples consumed by a cascade at one control instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct References {
    pub theta: f64,
    pub dtheta: f64,
    /// Load-speed reference derivative, taken equal to the second derivative
    /// of the position reference.
    pub domega_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement {
    pub theta_l: f64,
    pub omega_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CascadeOutput {
    pub u1: f64,
    pub u2: f64,
    pub f_hat_outer: f64,
    pub f_hat_inner: f64,
    pub saturated: bool,
}

/// Second-order biproper section discretized with the bilinear transform,
/// run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    dc: f64,
    s1: f64,
    s2: f64,
}

impl Biquad {
    /// `(s^2 + n1 s + n0) / (s^2 + d1 s + d0)` at sample period `h`.
    pub fn tustin(n1: f64, n0: f64, d1: f64, d0: f64, h: f64) -> Self {
        let k = 2.0 / h;
        let k2 = k * k;
        let (bn2, bn1, bn0) = (k2 + n1 * k + n0, 2.0 * (n0 - k2), k2 - n1 * k + n0);
        let (ad2, ad1, ad0) = (k2 + d1 * k + d0, 2.0 * (d0 - k2), k2 - d1 * k + d0);
        // The bilinear map fixes s = 0, so the DC gain is n0 / d0; summing the
        // discrete coefficients instead loses precision at small h.
        Self {
            b: [bn2 / ad2, bn1 / ad2, bn0 / ad2],
            a: [ad1 / ad2, ad0 / ad2],
            dc: n0 / d0,
            s1: 0.0,
            s2: 0.0,
        }
    }

    pub fn dc_gain(&self) -> f64 {
        self.dc
    }

    pub fn filter(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }

    /// Sets the internal state to the steady state for a constant input.
    pub fn settle(&mut self, x: f64) {
        let y = self.dc_gain() * x;
        self.s2 = self.b[2] * x - self.a[1] * y;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
    }
}

/// Anticipatory filter inverting the resonance/anti-resonance pair of the
/// motor-speed block:
/// `(s^2 + 2 D2 w02 s + w02^2) / (s^2 + 2 D1 w01 s + w01^2)`,
/// with `(w01, w02, D2)` derived from the assumed `(f1, D1)` and `Jl / Jm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelFeedforward {
    section: Biquad,
}

impl ModelFeedforward {
    pub fn new(ff_f1: f64, ff_d1: f64, inertia_ratio: f64, h: f64) -> Result<Self> {
        if !(ff_f1.is_finite() && ff_f1 > 0.0) {
            return Err(invalid("ff_f1", "must be finite and positive"));
        }
        if !(ff_d1 > 0.0 && ff_d1 < 1.0) {
            return Err(invalid("ff_D1", "must lie in (0, 1)"));
        }
        if !(inertia_ratio.is_finite() && inertia_ratio > 0.0) {
            return Err(invalid("inertia_ratio", "must be finite and positive"));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("h_ctrl", "must be finite and positive"));
        }
        let scale = libm::sqrt(1.0 + inertia_ratio);
        let w01 = 2.0 * PI * ff_f1;
        let w02 = w01 * scale;
        let d2 = ff_d1 * scale;
        let section = Biquad::tustin(2.0 * d2 * w02, w02 * w02, 2.0 * ff_d1 * w01, w01 * w01, h);
        Ok(Self { section })
    }

    pub fn dc_gain(&self) -> f64 {
        self.section.dc_gain()
    }

    pub fn filter(&mut self, x: f64) -> f64 {
        self.section.filter(x)
    }
}

/// Filters a whole reference series through [`ModelFeedforward`].
pub fn model_ff(input: &[f64], ff_f1: f64, ff_d1: f64, inertia_ratio: f64, h: f64) -> Result<Vec<f64>> {
    let mut f = ModelFeedforward::new(ff_f1, ff_d1, inertia_ratio, h)?;
    Ok(input.iter().map(|x| f.filter(*x)).collect())
}

fn saturate(u: f64, limit: f64) -> (f64, bool) {
    if u > limit {
        (limit, true)
    } else if u < -limit {
        (-limit, true)
    } else {
        (u, false)
    }
}

/// Current feedforward shared by both cascades.
///
/// Without the model-based term this is `(Jm + Jl)/Kt * domega_l`. With it,
/// the reference acceleration is shaped by [`ModelFeedforward`] and scaled by
/// `Jm / Kt`; at low frequency both coincide.
#[derive(Debug, Clone)]
struct CurrentFeedforward {
    kinematic: bool,
    inertial_gain: f64,
    motor_gain: f64,
    model: Option<ModelFeedforward>,
}

impl CurrentFeedforward {
    fn new(ff: &FfConfig, plant: &PlantParams, h: f64) -> Result<Self> {
        let model = if ff.model_based {
            Some(ModelFeedforward::new(ff.ff_f1, ff.ff_d1, plant.jl / plant.jm, h)?)
        } else {
            None
        };
        Ok(Self {
            kinematic: ff.kinematic_inner,
            inertial_gain: plant.inertial_gain(),
            motor_gain: plant.jm / plant.kt,
            model,
        })
    }

    fn current(&mut self, domega_l: f64) -> f64 {
        match self.model.as_mut() {
            Some(m) => self.motor_gain * m.filter(domega_l),
            None if self.kinematic => self.inertial_gain * domega_l,
            None => 0.0,
        }
    }
}

/// Classical cascade: P on the load angle, PI on the motor speed.
#[derive(Debug, Clone)]
pub struct PpiCascade {
    gains: PpiGains,
    ff: FfConfig,
    current_ff: CurrentFeedforward,
    i_max: f64,
    h: f64,
    integral: f64,
}

impl PpiCascade {
    pub fn new(gains: PpiGains, ff: FfConfig, plant: &PlantParams, i_max: f64, h: f64) -> Result<Self> {
        gains.validate()?;
        ff.validate()?;
        check_step_and_limit(h, i_max)?;
        Ok(Self { gains, ff, current_ff: CurrentFeedforward::new(&ff, plant, h)?, i_max, h, integral: 0.0 })
    }

    /// Integral contribution `Ki * int(e_m)`, clamped to the limit.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn step(&mut self, meas: Measurement, refs: References) -> CascadeOutput {
        let g = &self.gains;
        let ff_speed = if self.ff.kinematic_outer { refs.dtheta } else { 0.0 };
        let u1 = ff_speed + g.kp_o * (refs.theta - meas.theta_l);
        let e_m = u1 - meas.omega_m;
        let lim = g.integrator_limit;
        self.integral = (self.integral + g.ki_i * e_m * self.h).clamp(-lim, lim);
        let raw = self.current_ff.current(refs.domega_l) + g.kp_i * e_m + self.integral;
        let (u2, saturated) = saturate(raw, self.i_max);
        CascadeOutput { u1, u2, f_hat_outer: 0.0, f_hat_inner: 0.0, saturated }
    }
}

/// Model-free cascade: iP on the load angle, iP on the motor speed.
///
/// Each iP treats the feedforward added around it as part of the unknown
/// dynamics, so the `u` fed to its estimator is its own feedback output.
/// Both reference derivatives in the iP laws (position reference outside,
/// speed reference inside) go through the same window fit as the measured
/// outputs, so `F_hat` and the reference slope refer to the same instant.
#[derive(Debug, Clone)]
pub struct IpipCascade {
    gains: IpGains,
    ff: FfConfig,
    current_ff: CurrentFeedforward,
    i_max: f64,
    outer: EstimatorState,
    inner: EstimatorState,
    speed_ref: Differentiator,
    position_ref: Differentiator,
    phi1_prev: f64,
    phi2_prev: f64,
}

impl IpipCascade {
    pub fn new(
        gains: IpGains,
        ff: FfConfig,
        plant: &PlantParams,
        window: usize,
        i_max: f64,
        h: f64,
    ) -> Result<Self> {
        gains.validate()?;
        ff.validate()?;
        check_step_and_limit(h, i_max)?;
        Ok(Self {
            gains,
            ff,
            current_ff: CurrentFeedforward::new(&ff, plant, h)?,
            i_max,
            outer: EstimatorState::new(window, h)?,
            inner: EstimatorState::new(window, h)?,
            speed_ref: Differentiator::new(window, h)?,
            position_ref: Differentiator::new(window, h)?,
            phi1_prev: 0.0,
            phi2_prev: 0.0,
        })
    }

    pub fn step(&mut self, meas: Measurement, refs: References) -> CascadeOutput {
        let g = self.gains;

        let e1 = refs.theta - meas.theta_l;
        self.position_ref.push(refs.theta);
        let phi1 = match (self.outer.update(meas.theta_l, self.phi1_prev, g.alpha1), self.position_ref.estimate()) {
            (Ok(f_hat), Ok(dtheta_ref)) => ip_law(e1, dtheta_ref, f_hat, g.kp_o_star, g.alpha1),
            _ => g.kp_o_star * e1 / g.alpha1,
        };
        let ff_speed = if self.ff.kinematic_outer { refs.dtheta } else { 0.0 };
        let u1 = ff_speed + phi1;

        self.speed_ref.push(u1);
        let e_m = u1 - meas.omega_m;
        let ff_current = self.current_ff.current(refs.domega_l);
        let phi2 = match (self.inner.update(meas.omega_m, self.phi2_prev, g.alpha2), self.speed_ref.estimate()) {
            (Ok(f_hat), Ok(dspeed_ref)) => ip_law(e_m, dspeed_ref, f_hat, g.kp_i_star, g.alpha2),
            _ => g.kp_i_star * e_m / g.alpha2,
        };
        let (u2, saturated) = saturate(ff_current + phi2, self.i_max);

        self.phi1_prev = phi1;
        // The estimator must see the current that was actually applied.
        self.phi2_prev = u2 - ff_current;
        CascadeOutput {
            u1,
            u2,
            f_hat_outer: self.outer.f_hat(),
            f_hat_inner: self.inner.f_hat(),
            saturated,
        }
    }
}

fn check_step_and_limit(h: f64, i_max: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("h_ctrl", "must be finite and positive"));
    }
    if !(i_max.is_finite() && i_max > 0.0) {
        return Err(invalid("i_max", "must be finite and positive"));
    }
    Ok(())
}

/// Tagged controller selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerKind {
    Ppi { gains: PpiGains },
    Ipip { gains: IpGains, window: usize },
}

/// Serialized as `{"kind": "ppi" | "ipip", "gains": {...}, "window": n,
/// "ff": {...}, "i_max": x}`; omitted gains keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(try_from = "repr::ControllerRepr", into = "repr::ControllerRepr")
)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub ff: FfConfig,
    /// Drive current limit, A.
    pub i_max: f64,
}

pub const DEFAULT_I_MAX: f64 = 20.0;

#[cfg(feature = "serde")]
mod repr {
    use alloc::collections::BTreeMap;
    use alloc::format;
    use alloc::string::{String, ToString};

    use serde::{Deserialize, Serialize};

    use super::{ControllerConfig, ControllerKind, FfConfig, IpGains, PpiGains, DEFAULT_I_MAX, DEFAULT_WINDOW};

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "snake_case")]
    pub enum KindName {
        Ppi,
        Ipip,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ControllerRepr {
        kind: KindName,
        #[serde(default)]
        gains: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
        #[serde(default)]
        ff: FfConfig,
        #[serde(default = "default_i_max")]
        i_max: f64,
    }

    fn default_i_max() -> f64 {
        DEFAULT_I_MAX
    }

    fn unknown(key: &str, kind: &str, expected: &str) -> String {
        format!("unknown field `{key}` in controller.gains for kind {kind}, expected one of {expected}")
    }

    impl TryFrom<ControllerRepr> for ControllerConfig {
        type Error = String;

        fn try_from(r: ControllerRepr) -> Result<Self, String> {
            let kind = match r.kind {
                KindName::Ppi => {
                    if r.window.is_some() {
                        return Err("`window` only applies to kind ipip".to_string());
                    }
                    let mut g = PpiGains::default();
                    for (k, v) in r.gains {
                        match k.as_str() {
                            "kp_o" => g.kp_o = v,
                            "kp_i" => g.kp_i = v,
                            "ki_i" => g.ki_i = v,
                            "integrator_limit" => g.integrator_limit = v,
                            other => return Err(unknown(other, "ppi", "kp_o, kp_i, ki_i, integrator_limit")),
                        }
                    }
                    ControllerKind::Ppi { gains: g }
                }
                KindName::Ipip => {
                    let mut g = IpGains::default();
                    for (k, v) in r.gains {
                        match k.as_str() {
                            "alpha1" => g.alpha1 = v,
                            "alpha2" => g.alpha2 = v,
                            "kp_o_star" => g.kp_o_star = v,
                            "kp_i_star" => g.kp_i_star = v,
                            other => {
                                return Err(unknown(other, "ipip", "alpha1, alpha2, kp_o_star, kp_i_star"))
                            }
                        }
                    }
                    ControllerKind::Ipip { gains: g, window: r.window.unwrap_or(DEFAULT_WINDOW) }
                }
            };
            Ok(ControllerConfig { kind, ff: r.ff, i_max: r.i_max })
        }
    }

    impl From<ControllerConfig> for ControllerRepr {
        fn from(c: ControllerConfig) -> Self {
            let mut gains = BTreeMap::new();
            let (kind, window) = match c.kind {
                ControllerKind::Ppi { gains: g } => {
                    gains.insert("kp_o".to_string(), g.kp_o);
                    gains.insert("kp_i".to_string(), g.kp_i);
                    gains.insert("ki_i".to_string(), g.ki_i);
                    gains.insert("integrator_limit".to_string(), g.integrator_limit);
                    (KindName::Ppi, None)
                }
                ControllerKind::Ipip { gains: g, window } => {
                    gains.insert("alpha1".to_string(), g.alpha1);
                    gains.insert("alpha2".to_string(), g.alpha2);
                    gains.insert("kp_o_star".to_string(), g.kp_o_star);
                    gains.insert("kp_i_star".to_string(), g.kp_i_star);
                    (KindName::Ipip, Some(window))
                }
            };
            ControllerRepr { kind, gains, window, ff: c.ff, i_max: c.i_max }
        }
    }
}

impl ControllerConfig {
    pub fn ppi(gains: PpiGains) -> Self {
        Self { kind: ControllerKind::Ppi { gains }, ff: FfConfig::default(), i_max: DEFAULT_I_MAX }
    }

    pub fn ipip(gains: IpGains) -> Self {
        Self {
            kind: ControllerKind::Ipip { gains, window: DEFAULT_WINDOW },
            ff: FfConfig::default(),
            i_max: DEFAULT_I_MAX,
        }
    }

    pub fn with_ff(mut self, ff: FfConfig) -> Self {
        self.ff = ff;
        self
    }

    pub fn build(&self, plant: &PlantParams, h: f64) -> Result<Controller> {
        Ok(match self.kind {
            ControllerKind::Ppi { gains } => Controller::Ppi(PpiCascade::new(gains, self.ff, plant, self.i_max, h)?),
            ControllerKind::Ipip { gains, window } => {
                Controller::Ipip(IpipCascade::new(gains, self.ff, plant, window, self.i_max, h)?)
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.ff.validate()?;
        match self.kind {
            ControllerKind::Ppi { gains } => gains.validate()?,
            ControllerKind::Ipip { gains, window } => {
                gains.validate()?;
                if !(MIN_WINDOW..=MAX_WINDOW).contains(&window) {
                    return Err(invalid("window", "must lie in 2..=21"));
                }
            }
        }
        check_step_and_limit(1.0, self.i_max)
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::ppi(PpiGains::default())
    }
}

#[derive(Debug, Clone)]
pub enum Controller {
    Ppi(PpiCascade),
    Ipip(IpipCascade),
}

impl Controller {
    pub fn step(&mut self, meas: Measurement, refs: References) -> CascadeOutput {
        match self {
            Controller::Ppi(c) => c.step(meas, refs),
            Controller::Ipip(c) => c.step(meas, refs),
        }
    }
}
