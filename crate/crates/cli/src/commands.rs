//! The subcommands. Each returns the text to print on success; artifacts are
//! written once, at the end, from the calling thread.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mfc_core::control::{ControllerConfig, ControllerKind, IpGains, PpiGains};
use mfc_core::plant::WearParams;
use mfc_core::sim::{run, RunResult, Scenario};
use mfc_core::tuning::{evaluate_draw, monte_carlo, tune, Comparison, GainFamily, MonteCarloResult, TuneResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::io::{self, json_bytes, num, write_file};
use crate::scenario::{load, ScenarioFile, TuningSection};
use crate::svg;
use crate::Failure;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Worker threads for the Monte Carlo sweep; `Some(1)` runs serially.
    pub threads: Option<usize>,
}

pub const CACHE_FILE: &str = "tuned_gains_cache.json";

/// Row labels of `comparison.csv`, in order.
pub const COMPARE_ROWS: [&str; 5] = ["ppi_nominal", "ppi_optimized", "ipip", "ipip_ff", "ipip_ff_wrong"];

/// Single closed-loop run: `series.csv`, `metrics.json`,
/// `tracking_error.svg`. A diverged run still writes its partial series.
pub fn simulate(scenario_path: &Path, opts: &RunOptions) -> Result<String, Failure> {
    let loaded = load(scenario_path, opts.seed)?;
    let res = run(&loaded.scenario)?;
    write_run_artifacts(&opts.out, &loaded.scenario, &res)?;
    let text = format!("itae = {}\niau = {}\nj = {}\n", num(res.itae), num(res.iau), num(res.j));
    if res.diverged {
        return Err(Failure::Diverged(format!(
            "simulation diverged at t = {} s; partial series written to {}",
            num(res.t_final),
            opts.out.display()
        )));
    }
    Ok(text)
}

fn write_run_artifacts(out: &Path, scenario: &Scenario, res: &RunResult) -> anyhow::Result<()> {
    write_file(&out.join("series.csv"), &io::series_csv(&res.series)?)?;
    write_file(&out.join("metrics.json"), &io::metrics_json(scenario, res)?)?;
    let t: Vec<f64> = res.series.iter().map(|r| r.t).collect();
    let e: Vec<f64> = res.series.iter().map(|r| r.theta_l - r.theta_ref).collect();
    let plot = svg::line_plot("Load position tracking error", "t [s]", "theta_l - theta_ref [rad]", &t, &e);
    write_file(&out.join("tracking_error.svg"), plot.as_bytes())
}

/// Gain optimization: `tuned_gains.json` and `tuning_log.csv`.
pub fn tune_cmd(scenario_path: &Path, opts: &RunOptions) -> Result<String, Failure> {
    let loaded = load(scenario_path, opts.seed)?;
    let section = loaded
        .file
        .tuning
        .clone()
        .ok_or_else(|| Failure::Validation("tuning: section missing from the scenario".into()))?;
    let spec = section.spec_for(loaded.scenario.clone());
    let names: Vec<String> = spec.free_params.iter().map(|p| p.name.clone()).collect();
    let res = tune(&spec)?;
    write_file(&opts.out.join("tuning_log.csv"), &io::tuning_log_csv(&names, &res.log)?)?;
    let params: serde_json::Map<String, serde_json::Value> =
        names.iter().cloned().zip(res.best_params.iter().map(|v| json!(v))).collect();
    let doc = json!({
        "controller": res.controller,
        "params": params,
        "best_j": res.best_j,
        "initial_j": res.initial_j,
        "evaluations": res.log.len(),
        "f1": loaded.scenario.plant.wear.f1,
        "D1": loaded.scenario.plant.wear.d1,
    });
    write_file(&opts.out.join("tuned_gains.json"), &json_bytes(&doc)?)?;
    let mut text = format!("initial j = {}\nbest j = {}\n", num(res.initial_j), num(res.best_j));
    for (n, v) in names.iter().zip(&res.best_params) {
        let _ = writeln!(text, "{n} = {}", num(*v));
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    controller: ControllerConfig,
    best_j: f64,
}

/// Tuned gains keyed by everything that determines the tuning outcome.
#[derive(Debug, Default, Serialize, Deserialize)]
struct TuneCache {
    entries: BTreeMap<String, CacheEntry>,
}

impl TuneCache {
    fn read(path: &Path) -> Self {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_else(|e| {
                log::warn!("ignoring unreadable tuning cache {}: {e}", path.display());
                Self::default()
            }),
            Err(_) => Self::default(),
        }
    }

    fn key(file: &ScenarioFile, start: &ControllerConfig, tuning: &TuningSection) -> String {
        json!({
            "plant": file.plant,
            "trajectory": file.trajectory,
            "sim": file.sim,
            "tuning": tuning,
            "start": start,
        })
        .to_string()
    }
}

/// Swaps the two named operating conditions: a plant nearer `Sigma_1` gets
/// the `Sigma_2` parameters in its feedforward and vice versa.
pub fn wrong_wear(actual: WearParams) -> WearParams {
    let dist = |s: WearParams| {
        let (fr, dr) = (WearParams::F1_RANGE, WearParams::D1_RANGE);
        ((actual.f1 - s.f1) / (fr.1 - fr.0)).powi(2) + ((actual.d1 - s.d1) / (dr.1 - dr.0)).powi(2)
    };
    if dist(WearParams::SIGMA_1) <= dist(WearParams::SIGMA_2) {
        WearParams::SIGMA_2
    } else {
        WearParams::SIGMA_1
    }
}

/// The five rows of the comparison table, computed from already tuned
/// gains.
pub fn comparison_configs(
    nominal: ControllerConfig,
    ppi_tuned: ControllerConfig,
    ipip_tuned: ControllerConfig,
    wear: WearParams,
) -> [ControllerConfig; 5] {
    let with_model_ff = |w: WearParams| {
        let mut c = ipip_tuned;
        c.ff.model_based = true;
        c.ff.ff_f1 = w.f1;
        c.ff.ff_d1 = w.d1;
        c
    };
    [nominal, ppi_tuned, ipip_tuned, with_model_ff(wear), with_model_ff(wrong_wear(wear))]
}

/// Five-configuration table `comparison.csv`. Tuned gains are taken from
/// the cache in the output directory when their inputs match.
pub fn compare(scenario_path: &Path, opts: &RunOptions) -> Result<String, Failure> {
    let loaded = load(scenario_path, opts.seed)?;
    let tuning = loaded.file.tuning.clone().unwrap_or_default();
    let base = &loaded.scenario;
    let wear = base.plant.wear;

    let mut nominal = match base.controller.kind {
        ControllerKind::Ppi { .. } => base.controller,
        ControllerKind::Ipip { .. } => ControllerConfig::ppi(PpiGains::default()),
    };
    nominal.ff.model_based = false;
    let mut ipip_start = match base.controller.kind {
        ControllerKind::Ipip { .. } => base.controller,
        ControllerKind::Ppi { .. } => ControllerConfig::ipip(IpGains::default()),
    };
    ipip_start.ff.model_based = false;

    let cache_path = opts.out.join(CACHE_FILE);
    let mut cache = TuneCache::read(&cache_path);
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let mut diverged = Vec::new();
    let run_row = |cfg: ControllerConfig| -> Result<RunResult, Failure> {
        let mut sc = base.clone();
        sc.controller = cfg;
        Ok(run(&sc)?)
    };
    let mut record = |rows: &mut Vec<(String, f64, f64)>, label: &str, res: &RunResult| {
        if res.diverged {
            diverged.push(label.to_string());
        }
        rows.push((label.to_string(), res.itae, res.iau));
    };

    let res = run_row(nominal)?;
    record(&mut rows, COMPARE_ROWS[0], &res);

    let mut tuned = Vec::new();
    for start in [nominal, ipip_start] {
        let key = TuneCache::key(&loaded.file, &start, &tuning);
        let cfg = match cache.entries.get(&key) {
            Some(entry) => entry.controller,
            None => {
                let mut sc = base.clone();
                sc.controller = start;
                let outcome: Result<TuneResult, _> = tune(&tuning.spec_for(sc));
                match outcome {
                    Ok(r) => {
                        cache.entries.insert(key, CacheEntry { controller: r.controller, best_j: r.best_j });
                        r.controller
                    }
                    Err(e) => {
                        write_file(&opts.out.join("comparison.csv"), &io::comparison_csv(&rows)?)?;
                        write_file(&cache_path, &json_bytes(&cache)?)?;
                        let family = GainFamily::of(&start);
                        return Err(Failure::Tuning(format!("tuning {family:?} gains failed: {e}")));
                    }
                }
            }
        };
        tuned.push(cfg);
    }
    write_file(&cache_path, &json_bytes(&cache)?)?;

    let configs = comparison_configs(nominal, tuned[0], tuned[1], wear);
    for (label, cfg) in COMPARE_ROWS.iter().zip(configs).skip(1) {
        let res = run_row(cfg)?;
        record(&mut rows, label, &res);
    }
    write_file(&opts.out.join("comparison.csv"), &io::comparison_csv(&rows)?)?;

    let mut text = String::from("config           itae                     iau\n");
    for (label, itae, iau) in &rows {
        let _ = writeln!(text, "{label:<16} {:<24} {}", num(*itae), num(*iau));
    }
    if !diverged.is_empty() {
        return Err(Failure::Diverged(format!("diverged configurations: {}", diverged.join(", "))));
    }
    Ok(text)
}

/// Runs the sweep serially for `Some(1)` and on a rayon pool otherwise.
/// Draws own their random streams, so both paths agree exactly.
pub fn run_sweep(
    spec: &mfc_core::tuning::MonteCarloSpec,
    cmp: &Comparison,
    threads: Option<usize>,
) -> Result<MonteCarloResult, Failure> {
    if threads == Some(1) {
        return Ok(monte_carlo(spec, cmp)?);
    }
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Io(e.into()))?;
    let draws = pool.install(|| {
        (0..spec.n_draws).into_par_iter().map(|i| evaluate_draw(spec, cmp, i)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(MonteCarloResult::from_draws(draws))
}

/// Robustness sweep: `montecarlo.csv`, `stem.svg`, `histograms.svg`.
pub fn montecarlo_cmd(scenario_path: &Path, opts: &RunOptions) -> Result<String, Failure> {
    let loaded = load(scenario_path, opts.seed)?;
    let section = loaded
        .file
        .montecarlo
        .clone()
        .ok_or_else(|| Failure::Validation("montecarlo: section missing from the scenario".into()))?;
    let spec = section.spec();
    let cmp = Comparison { template: loaded.scenario.clone(), a: section.a, b: section.b };
    let res = run_sweep(&spec, &cmp, opts.threads)?;

    write_file(&opts.out.join("montecarlo.csv"), &io::montecarlo_csv(&res)?)?;
    let deltas: Vec<f64> = res.draws.iter().map(|d| d.delta).collect();
    let stem = svg::stem_plot("ITAE difference per draw (baseline minus challenger)", "delta ITAE", &deltas);
    write_file(&opts.out.join("stem.svg"), stem.as_bytes())?;
    let f1: Vec<f64> = res.draws.iter().map(|d| d.wear.f1).collect();
    let d1: Vec<f64> = res.draws.iter().map(|d| d.wear.d1).collect();
    let hist = svg::histograms("Sampled wear parameters", &[("f1 [Hz]", &f1), ("D1", &d1)], 20);
    write_file(&opts.out.join("histograms.svg"), hist.as_bytes())?;

    Ok(format!(
        "fraction_positive = {:.3}\ndraws = {}\ndiverged = {}\n",
        res.fraction_positive,
        res.draws.len(),
        res.diverged_count
    ))
}

/// Writes the resolved reference as `trajectory.csv`.
pub fn trajectory_cmd(scenario_path: &Path, opts: &RunOptions) -> Result<String, Failure> {
    let loaded = load(scenario_path, opts.seed)?;
    let tr = loaded.scenario.resolve_trajectory()?;
    write_file(&opts.out.join("trajectory.csv"), &io::trajectory_csv(&tr)?)?;
    Ok(format!("samples = {}\n", tr.len()))
}
