//! Scenario files: strict JSON documents with the sections `plant`,
//! `controller`, `trajectory`, `sim`, `tuning` and `montecarlo`.

use std::path::{Path, PathBuf};

use mfc_core::control::{ControllerConfig, IpGains};
use mfc_core::plant::PlantParams;
use mfc_core::sim::{MeasurementNoise, Scenario, TrajectorySource, DEFAULT_H_CTRL, DEFAULT_H_PLANT, DEFAULT_T_END, DEFAULT_W_U};
use mfc_core::trajectory::BENCHMARK_NAME;
use mfc_core::tuning::{FreeParam, GainFamily, MonteCarloSpec, SimplexOptions, TuneSpec, DEFAULT_MAX_EVALS, DEFAULT_TOL};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::read_trajectory_csv;
use crate::Failure;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub plant: PlantParams,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloSection>,
}

/// Either a named preset or a CSV file (relative paths are resolved against
/// the scenario file's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self { preset: Some(BENCHMARK_NAME.to_string()), file: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub h_ctrl: f64,
    pub h_plant: f64,
    pub t_end: f64,
    pub w_u: f64,
    pub seed: u64,
    pub noise: MeasurementNoise,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            h_ctrl: DEFAULT_H_CTRL,
            h_plant: DEFAULT_H_PLANT,
            t_end: DEFAULT_T_END,
            w_u: DEFAULT_W_U,
            seed: 0,
            noise: MeasurementNoise::default(),
        }
    }
}

/// Optimizer settings. The starting point is the gain set of the
/// `controller` section; `free_params` defaults to the family's box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    pub max_evals: usize,
    pub tol: f64,
    pub initial_scale: f64,
    pub restart_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_params: Option<Vec<FreeParam>>,
}

impl Default for TuningSection {
    fn default() -> Self {
        let o = SimplexOptions::default();
        Self {
            max_evals: DEFAULT_MAX_EVALS,
            tol: DEFAULT_TOL,
            initial_scale: o.initial_scale,
            restart_scale: o.restart_scale,
            free_params: None,
        }
    }
}

impl TuningSection {
    pub fn options(&self) -> SimplexOptions {
        SimplexOptions {
            max_evals: self.max_evals,
            tol: self.tol,
            initial_scale: self.initial_scale,
            restart_scale: self.restart_scale,
        }
    }

    /// Tuning problem for `scenario`, starting from its controller gains.
    pub fn spec_for(&self, scenario: Scenario) -> TuneSpec {
        let mut spec = TuneSpec::for_scenario(scenario);
        if let Some(params) = &self.free_params {
            spec.free_params = params.clone();
        }
        spec.options = self.options();
        spec
    }
}

/// Wear distribution plus the compared pair: `a` is the baseline (default
/// P-PI), `b` the challenger (default iP-iP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub n_draws: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    #[serde(rename = "D1_mean")]
    pub d1_mean: f64,
    #[serde(rename = "D1_std")]
    pub d1_std: f64,
    pub seed: u64,
    pub a: ControllerConfig,
    pub b: ControllerConfig,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        let s = MonteCarloSpec::default();
        Self {
            n_draws: s.n_draws,
            f1_mean: s.f1_mean,
            f1_std: s.f1_std,
            d1_mean: s.d1_mean,
            d1_std: s.d1_std,
            seed: s.seed,
            a: ControllerConfig::default(),
            b: ControllerConfig::ipip(IpGains::default()),
        }
    }
}

impl MonteCarloSection {
    pub fn spec(&self) -> MonteCarloSpec {
        MonteCarloSpec {
            n_draws: self.n_draws,
            f1_mean: self.f1_mean,
            f1_std: self.f1_std,
            d1_mean: self.d1_mean,
            d1_std: self.d1_std,
            seed: self.seed,
        }
    }
}

/// A parsed scenario file together with its resolved simulation scenario.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ScenarioFile,
    pub scenario: Scenario,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Validation(format!("scenario: {e}")))
    }

    /// Applies a command-line seed to every seeded section.
    pub fn override_seed(&mut self, seed: u64) {
        self.sim.seed = seed;
        if let Some(mc) = self.montecarlo.as_mut() {
            mc.seed = seed;
        }
    }

    /// Builds and validates the simulation scenario. `base_dir` anchors
    /// relative trajectory paths.
    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario, Failure> {
        let trajectory = match (&self.trajectory.preset, &self.trajectory.file) {
            (Some(_), Some(_)) => {
                return Err(Failure::Validation("trajectory: give either `preset` or `file`, not both".into()))
            }
            (None, None) => TrajectorySource::Benchmark,
            (Some(name), None) if name == BENCHMARK_NAME => TrajectorySource::Benchmark,
            (Some(name), None) => {
                return Err(Failure::Validation(format!(
                    "trajectory.preset: unknown preset `{name}` (known: `{BENCHMARK_NAME}`)"
                )))
            }
            (None, Some(file)) => {
                let path = if file.is_absolute() { file.clone() } else { base_dir.join(file) };
                TrajectorySource::Samples(read_trajectory_csv(&path)?)
            }
        };
        let scenario = Scenario {
            plant: self.plant,
            controller: self.controller,
            trajectory,
            h_ctrl: self.sim.h_ctrl,
            h_plant: self.sim.h_plant,
            t_end: self.sim.t_end,
            w_u: self.sim.w_u,
            seed: self.sim.seed,
            noise: self.sim.noise,
        };
        scenario.validate()?;
        if let Some(mc) = &self.montecarlo {
            mc.spec().validate()?;
            mc.a.validate()?;
            mc.b.validate()?;
        }
        Ok(scenario)
    }
}

/// Reads, seeds and resolves a scenario file.
pub fn load(path: &Path, seed: Option<u64>) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read scenario {}: {e}", path.display())))?;
    let mut file = ScenarioFile::parse(&text)?;
    if let Some(seed) = seed {
        file.override_seed(seed);
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let scenario = file.resolve(base)?;
    Ok(Loaded { file, scenario })
}

/// Scenario document with every section present and every key at its
/// default value.
pub fn defaults_document() -> ScenarioFile {
    ScenarioFile {
        tuning: Some(TuningSection::default()),
        montecarlo: Some(MonteCarloSection::default()),
        ..ScenarioFile::default()
    }
}

/// Flattened `section.key = default` listing for the given sections.
pub fn key_reference(sections: &[&str]) -> String {
    let doc = serde_json::to_value(defaults_document()).expect("defaults serialize");
    let mut out = String::from("Scenario keys (dotted path = default):\n");
    for section in sections {
        if *section == "controller" {
            flatten("controller", &doc["controller"], &mut out);
            let ipip = serde_json::to_value(ControllerConfig::ipip(IpGains::default())).expect("serialize");
            out.push_str("  controller.kind = \"ipip\" alternative:\n");
            flatten("controller.gains", &ipip["gains"], &mut out);
            out.push_str(&format!("  controller.window = {}\n", ipip["window"]));
        } else if *section == "tuning" {
            flatten("tuning", &doc["tuning"], &mut out);
            for family in [GainFamily::Ppi, GainFamily::Ipip] {
                let names: Vec<String> = family
                    .default_bounds()
                    .iter()
                    .map(|p| format!("{} in ({}, {})", p.name, p.lower, p.upper))
                    .collect();
                out.push_str(&format!("  tuning.free_params default box: {}\n", names.join(", ")));
            }
        } else if *section == "trajectory" {
            out.push_str(&format!("  trajectory.preset = \"{BENCHMARK_NAME}\"\n"));
            out.push_str("  trajectory.file = <CSV path with header t,theta_ref[,dtheta_ref,ddtheta_ref]>\n");
        } else {
            flatten(section, &doc[*section], &mut out);
        }
    }
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&format!("{prefix}.{k}"), child, out);
            }
        }
        other => out.push_str(&format!("  {prefix} = {other}\n")),
    }
}
