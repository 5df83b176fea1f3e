//! Gain optimization against `J = ITAE + w_u * IAU` and the Monte Carlo
//! robustness sweep over the wear parameters.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Normal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, ControllerKind, IpGains, PpiGains};
use crate::error::{invalid, Error, Result};
use crate::plant::WearParams;
use crate::sim::{run, Scenario};

pub const DEFAULT_MAX_EVALS: usize = 400;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Logistic coordinates are clamped so every mapped point stays strictly
/// inside its box.
const Z_LIMIT: f64 = 30.0;

/// A free parameter with its box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct FreeParam {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl FreeParam {
    pub fn new(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.to_string(), lower, upper }
    }

    fn to_unbounded(&self, x: f64) -> f64 {
        let s = (x - self.lower) / (self.upper - self.lower);
        libm::log(s / (1.0 - s)).clamp(-Z_LIMIT, Z_LIMIT)
    }

    fn to_bounded(&self, z: f64) -> f64 {
        let z = z.clamp(-Z_LIMIT, Z_LIMIT);
        self.lower + (self.upper - self.lower) / (1.0 + libm::exp(-z))
    }
}

/// Options of the bounded simplex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Total objective evaluations, restart included.
    pub max_evals: usize,
    /// Stop when `(J_worst - J_best) <= tol * |J_best|` over the simplex.
    pub tol: f64,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_scale: f64,
    /// Edge fraction for the single restart from the best point.
    pub restart_scale: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_evals: DEFAULT_MAX_EVALS, tol: DEFAULT_TOL, initial_scale: 0.1, restart_scale: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub log: Vec<Evaluation>,
}

/// Minimizes `f` over a box with Nelder-Mead on logistic-transformed
/// coordinates, then restarts once from the best point with a smaller
/// simplex. The result is the best point ever evaluated, so it never exceeds
/// `f(x0)`.
pub fn minimize_bounded<F>(mut f: F, params: &[FreeParam], x0: &[f64], opts: &SimplexOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = params.len();
    if n == 0 || x0.len() != n {
        return Err(invalid("x0", "must have one entry per free parameter"));
    }
    for (p, x) in params.iter().zip(x0) {
        if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
            return Err(invalid("bounds", "need finite bounds with lower < upper"));
        }
        if !(*x > p.lower && *x < p.upper) {
            return Err(invalid("x0", "must lie strictly inside the bounds"));
        }
    }
    if opts.max_evals < n + 1 {
        return Err(invalid("max_evals", "budget smaller than the initial simplex"));
    }

    let mut log: Vec<Evaluation> = Vec::new();
    let mut eval = |z: &[f64], log: &mut Vec<Evaluation>| -> f64 {
        let x: Vec<f64> = params.iter().zip(z).map(|(p, zi)| p.to_bounded(*zi)).collect();
        let v = f(&x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        log.push(Evaluation { x, value: v });
        v
    };

    let z0: Vec<f64> = params.iter().zip(x0).map(|(p, x)| p.to_unbounded(*x)).collect();
    let mut start = z0;
    for (round, scale) in [opts.initial_scale, opts.restart_scale].into_iter().enumerate() {
        let budget = opts.max_evals.saturating_sub(log.len());
        if budget < n + 1 {
            break;
        }
        // Edge of `scale` box widths measured in x, mapped to z.
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(start.clone());
        for i in 0..n {
            let mut v = start.clone();
            let p = &params[i];
            let x = p.to_bounded(start[i]);
            let width = p.upper - p.lower;
            let mut stepped = x + scale * width;
            if stepped >= p.upper {
                stepped = x - scale * width;
            }
            let stepped = stepped.clamp(p.lower + 1e-9 * width, p.upper - 1e-9 * width);
            v[i] = p.to_unbounded(stepped);
            if v[i] == start[i] {
                v[i] += if round == 0 { 0.5 } else { 0.1 };
            }
            simplex.push(v);
        }
        nelder_mead(&mut simplex, &mut |z| eval(z, &mut log), budget, opts.tol);
        let best = best_index(&log).expect("at least one evaluation");
        start = params.iter().zip(&log[best].x).map(|(p, x)| p.to_unbounded(*x)).collect();
    }

    let best = best_index(&log).ok_or_else(|| Error::OptimizationFailed("no evaluations".into()))?;
    if !log[best].value.is_finite() {
        return Err(Error::OptimizationFailed("no finite objective value within the budget".into()));
    }
    Ok(Minimum { x: log[best].x.clone(), value: log[best].value, log })
}

fn best_index(log: &[Evaluation]) -> Option<usize> {
    log.iter()
        .enumerate()
        .min_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap_or(core::cmp::Ordering::Equal))
        .map(|(i, _)| i)
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) for at most `budget` evaluations.
fn nelder_mead(simplex: &mut [Vec<f64>], objective: &mut dyn FnMut(&[f64]) -> f64, budget: usize, tol: f64) {
    let n = simplex.len() - 1;
    let used = core::cell::Cell::new(0usize);
    let mut f = |x: &[f64]| {
        used.set(used.get() + 1);
        objective(x)
    };
    let count = || used.get();
    let end = budget;
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    for v in simplex.iter() {
        if count() >= end {
            return;
        }
        values.push(f(v));
    }

    let point = |c: &[f64], d: &[f64], t: f64| -> Vec<f64> { c.iter().zip(d).map(|(a, b)| a + t * (b - a)).collect() };

    while count() < end {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(core::cmp::Ordering::Equal));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        let spread = values[worst] - values[best];
        if values[best].is_finite() && spread.is_finite() && spread <= tol * libm::fabs(values[best]) {
            return;
        }

        let mut centroid = alloc::vec![0.0; simplex[0].len()];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v / n as f64;
            }
        }

        let reflected = point(&centroid, &simplex[worst], -1.0);
        let fr = f(&reflected);
        if fr < values[best] {
            if count() >= end {
                replace(simplex, &mut values, worst, reflected, fr);
                return;
            }
            let expanded = point(&centroid, &simplex[worst], -2.0);
            let fe = f(&expanded);
            if fe < fr {
                replace(simplex, &mut values, worst, expanded, fe);
            } else {
                replace(simplex, &mut values, worst, reflected, fr);
            }
            continue;
        }
        if fr < values[second] {
            replace(simplex, &mut values, worst, reflected, fr);
            continue;
        }
        if count() >= end {
            return;
        }
        let (contracted, fc) = if fr < values[worst] {
            let c = point(&centroid, &reflected, 0.5);
            let v = f(&c);
            (c, v)
        } else {
            let c = point(&centroid, &simplex[worst], 0.5);
            let v = f(&c);
            (c, v)
        };
        if fc < values[worst].min(fr) {
            replace(simplex, &mut values, worst, contracted, fc);
            continue;
        }
        for &i in &order[1..] {
            if count() >= end {
                return;
            }
            let shrunk = point(&simplex[best], &simplex[i], 0.5);
            values[i] = f(&shrunk);
            simplex[i] = shrunk;
        }
    }
}

fn replace(simplex: &mut [Vec<f64>], values: &mut [f64], i: usize, x: Vec<f64>, v: f64) {
    simplex[i] = x;
    values[i] = v;
}

/// Controller family whose gains are tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainFamily {
    Ppi,
    Ipip,
}

impl GainFamily {
    pub fn of(config: &ControllerConfig) -> Self {
        match config.kind {
            ControllerKind::Ppi { .. } => GainFamily::Ppi,
            ControllerKind::Ipip { .. } => GainFamily::Ipip,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            GainFamily::Ppi => &["kp_o", "kp_i", "ki_i"],
            GainFamily::Ipip => &["alpha1", "alpha2", "kp_o_star", "kp_i_star"],
        }
    }

    /// Default search box.
    pub fn default_bounds(&self) -> Vec<FreeParam> {
        match self {
            GainFamily::Ppi => alloc::vec![
                FreeParam::new("kp_o", 1.0, 400.0),
                FreeParam::new("kp_i", 0.01, 2.0),
                FreeParam::new("ki_i", 0.1, 300.0),
            ],
            GainFamily::Ipip => alloc::vec![
                FreeParam::new("alpha1", 1.0, 50.0),
                FreeParam::new("alpha2", 200.0, 5000.0),
                FreeParam::new("kp_o_star", 1.0, 1000.0),
                FreeParam::new("kp_i_star", 10.0, 3000.0),
            ],
        }
    }
}

/// Reads the free parameters out of a controller configuration.
pub fn get_gains(config: &ControllerConfig) -> Vec<f64> {
    match config.kind {
        ControllerKind::Ppi { gains } => alloc::vec![gains.kp_o, gains.kp_i, gains.ki_i],
        ControllerKind::Ipip { gains, .. } => {
            alloc::vec![gains.alpha1, gains.alpha2, gains.kp_o_star, gains.kp_i_star]
        }
    }
}

/// Writes the free parameters into a copy of `config`.
pub fn set_gains(config: &ControllerConfig, x: &[f64]) -> ControllerConfig {
    let mut out = *config;
    out.kind = match config.kind {
        ControllerKind::Ppi { gains } => ControllerKind::Ppi {
            gains: PpiGains { kp_o: x[0], kp_i: x[1], ki_i: x[2], ..gains },
        },
        ControllerKind::Ipip { window, .. } => ControllerKind::Ipip {
            gains: IpGains { alpha1: x[0], alpha2: x[1], kp_o_star: x[2], kp_i_star: x[3] },
            window,
        },
    };
    out
}

/// Tuning problem: the controller inside `scenario` is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneSpec {
    pub scenario: Scenario,
    pub free_params: Vec<FreeParam>,
    pub x0: Vec<f64>,
    pub options: SimplexOptions,
}

impl TuneSpec {
    /// Default box for the scenario's controller family, starting from its
    /// current gains.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let family = GainFamily::of(&scenario.controller);
        let x0 = get_gains(&scenario.controller);
        Self { free_params: family.default_bounds(), x0, scenario, options: SimplexOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let family = GainFamily::of(&self.scenario.controller);
        let names = family.param_names();
        if self.free_params.len() != names.len() || self.free_params.iter().zip(names).any(|(p, n)| p.name != *n) {
            return Err(invalid("free_params", "must list the gains of the controller family in order"));
        }
        if self.x0.len() != names.len() {
            return Err(invalid("x0", "must have one entry per free parameter"));
        }
        self.scenario.validate()
    }
}

/// One row of the tuning log.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneRecord {
    pub eval: usize,
    pub params: Vec<f64>,
    pub itae: f64,
    pub iau: f64,
    pub j: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub controller: ControllerConfig,
    pub best_params: Vec<f64>,
    pub best_j: f64,
    pub initial_j: f64,
    pub log: Vec<TuneRecord>,
}

/// Optimizes the controller gains of `spec.scenario` against the penalized
/// criterion.
pub fn tune(spec: &TuneSpec) -> Result<TuneResult> {
    spec.validate()?;
    let mut records: Vec<TuneRecord> = Vec::new();
    let template = spec.scenario.clone();
    let t_end = template.t_end;
    let objective = |x: &[f64]| -> f64 {
        let mut sc = template.clone();
        sc.controller = set_gains(&template.controller, x);
        let eval = records.len();
        match run(&sc) {
            Ok(res) => {
                let j = res.penalized_j(t_end);
                records.push(TuneRecord {
                    eval,
                    params: x.to_vec(),
                    itae: res.itae,
                    iau: res.iau,
                    j,
                    diverged: res.diverged,
                });
                j
            }
            Err(e) => {
                log::debug!("evaluation {eval} rejected: {e}");
                records.push(TuneRecord {
                    eval,
                    params: x.to_vec(),
                    itae: f64::NAN,
                    iau: f64::NAN,
                    j: f64::INFINITY,
                    diverged: true,
                });
                f64::INFINITY
            }
        }
    };
    let min = minimize_bounded(objective, &spec.free_params, &spec.x0, &spec.options)?;
    let initial_j = records.first().map_or(f64::INFINITY, |r| r.j);
    if min.value >= crate::sim::DIVERGENCE_PENALTY {
        return Err(Error::OptimizationFailed("every evaluated gain set diverged".into()));
    }
    Ok(TuneResult {
        controller: set_gains(&spec.scenario.controller, &min.x),
        best_params: min.x,
        best_j: min.value,
        initial_j,
        log: records,
    })
}

/// Distribution of the wear parameters for the robustness sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields, default))]
pub struct MonteCarloSpec {
    pub n_draws: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    #[cfg_attr(feature = "serde", serde(rename = "D1_mean"))]
    pub d1_mean: f64,
    #[cfg_attr(feature = "serde", serde(rename = "D1_std"))]
    pub d1_std: f64,
    pub seed: u64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { n_draws: 200, f1_mean: 55.0, f1_std: 4.0, d1_mean: 0.13, d1_std: 0.01, seed: 1 }
    }
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(invalid("n_draws", "must be at least 1"));
        }
        for (field, v) in [("f1_std", self.f1_std), ("D1_std", self.d1_std)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, "must be finite and positive"));
            }
        }
        if !(self.f1_mean.is_finite() && self.f1_mean > 0.0) {
            return Err(invalid("f1_mean", "must be finite and positive"));
        }
        if !(self.d1_mean > 0.0 && self.d1_mean < 1.0) {
            return Err(invalid("D1_mean", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Draw `index` of the sweep. Each draw owns a ChaCha stream selected by its
/// index, so draws can be produced in any order or in parallel.
pub fn sample_draw(spec: &MonteCarloSpec, index: usize) -> Result<WearParams> {
    spec.validate()?;
    let f1 = Normal::new(spec.f1_mean, spec.f1_std).map_err(|_| invalid("f1_std", "invalid"))?;
    let d1 = Normal::new(spec.d1_mean, spec.d1_std).map_err(|_| invalid("D1_std", "invalid"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    loop {
        let w = WearParams::new(f1.sample(&mut rng), d1.sample(&mut rng));
        if w.f1 > 0.0 && w.d1 > 0.0 && w.d1 < 1.0 {
            return Ok(w);
        }
    }
}

/// All draws of the sweep in index order.
pub fn sample_params(spec: &MonteCarloSpec) -> Result<Vec<WearParams>> {
    (0..spec.n_draws).map(|i| sample_draw(spec, i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub index: usize,
    pub wear: WearParams,
    pub itae_a: f64,
    pub itae_b: f64,
    /// `itae_a - itae_b`; NaN when either run diverged.
    pub delta: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub draws: Vec<Draw>,
    pub fraction_positive: f64,
    pub diverged_count: usize,
}

impl MonteCarloResult {
    /// Aggregates draws, sorting them by index.
    pub fn from_draws(mut draws: Vec<Draw>) -> Self {
        draws.sort_by_key(|d| d.index);
        let n = draws.len();
        let positive = draws.iter().filter(|d| d.delta > 0.0).count();
        let diverged_count = draws.iter().filter(|d| d.diverged).count();
        let fraction_positive = if n == 0 { 0.0 } else { positive as f64 / n as f64 };
        Self { draws, fraction_positive, diverged_count }
    }
}

/// The pair compared at every draw; `a` is the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub template: Scenario,
    pub a: ControllerConfig,
    pub b: ControllerConfig,
}

/// Runs both controllers at draw `index`.
pub fn evaluate_draw(spec: &MonteCarloSpec, cmp: &Comparison, index: usize) -> Result<Draw> {
    let wear = sample_draw(spec, index)?;
    let mut sc = cmp.template.clone();
    sc.plant.wear = wear;
    sc.plant.strict = false;
    sc.controller = cmp.a;
    let ra = run(&sc)?;
    sc.controller = cmp.b;
    let rb = run(&sc)?;
    let diverged = ra.diverged || rb.diverged;
    let delta = if diverged { f64::NAN } else { ra.itae - rb.itae };
    Ok(Draw { index, wear, itae_a: ra.itae, itae_b: rb.itae, delta, diverged })
}

/// Serial sweep. Gains are fixed for the whole sweep.
pub fn monte_carlo(spec: &MonteCarloSpec, cmp: &Comparison) -> Result<MonteCarloResult> {
    spec.validate()?;
    let draws = (0..spec.n_draws).map(|i| evaluate_draw(spec, cmp, i)).collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloResult::from_draws(draws))
}
