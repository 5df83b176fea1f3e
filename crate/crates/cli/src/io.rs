//! CSV and JSON artifacts. Numbers are written in their shortest
//! representation that parses back to the same `f64`.

use std::fs;
use std::path::Path;

use anyhow::Context;
use mfc_core::sim::{Record, RunResult, Scenario};
use mfc_core::trajectory::Trajectory;
use mfc_core::tuning::{MonteCarloResult, TuneRecord};
use serde::Serialize;

use crate::Failure;

pub const SERIES_HEADER: [&str; 10] =
    ["t", "theta_ref", "theta_l", "omega_m", "omega_l", "u1", "u2", "f_hat_outer", "f_hat_inner", "saturated"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "theta_ref", "dtheta_ref", "ddtheta_ref"];
pub const MONTECARLO_HEADER: [&str; 6] = ["draw", "f1", "D1", "itae_ppi", "itae_ipip", "delta"];

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn series_csv(series: &[Record]) -> anyhow::Result<Vec<u8>> {
    csv_bytes(
        &SERIES_HEADER,
        series.iter().map(|r| {
            vec![
                num(r.t),
                num(r.theta_ref),
                num(r.theta_l),
                num(r.omega_m),
                num(r.omega_l),
                num(r.u1),
                num(r.u2),
                num(r.f_hat_outer),
                num(r.f_hat_inner),
                u8::from(r.saturated).to_string(),
            ]
        }),
    )
}

#[derive(Serialize)]
struct Metrics<'a> {
    controller: &'a str,
    f1: f64,
    #[serde(rename = "D1")]
    d1: f64,
    itae: f64,
    iau: f64,
    j: f64,
    w_u: f64,
    diverged: bool,
    t_final: f64,
    saturation_count: usize,
    trajectory: &'a str,
}

pub fn controller_label(scenario: &Scenario) -> &'static str {
    match mfc_core::tuning::GainFamily::of(&scenario.controller) {
        mfc_core::tuning::GainFamily::Ppi => "ppi",
        mfc_core::tuning::GainFamily::Ipip => "ipip",
    }
}

/// Flat key-value metrics document.
pub fn metrics_json(scenario: &Scenario, res: &RunResult) -> anyhow::Result<Vec<u8>> {
    let m = Metrics {
        controller: controller_label(scenario),
        f1: scenario.plant.wear.f1,
        d1: scenario.plant.wear.d1,
        itae: res.itae,
        iau: res.iau,
        j: res.j,
        w_u: scenario.w_u,
        diverged: res.diverged,
        t_final: res.t_final,
        saturation_count: res.saturation_count,
        trajectory: scenario.trajectory_name(),
    };
    json_bytes(&m)
}

pub fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn tuning_log_csv(param_names: &[String], log: &[TuneRecord]) -> anyhow::Result<Vec<u8>> {
    let mut header: Vec<&str> = vec!["eval"];
    header.extend(param_names.iter().map(String::as_str));
    header.extend(["itae", "iau", "j"]);
    csv_bytes(
        &header,
        log.iter().map(|r| {
            let mut row = vec![r.eval.to_string()];
            row.extend(r.params.iter().map(|v| num(*v)));
            row.extend([num(r.itae), num(r.iau), num(r.j)]);
            row
        }),
    )
}

pub fn montecarlo_csv(res: &MonteCarloResult) -> anyhow::Result<Vec<u8>> {
    csv_bytes(
        &MONTECARLO_HEADER,
        res.draws.iter().map(|d| {
            vec![d.index.to_string(), num(d.wear.f1), num(d.wear.d1), num(d.itae_a), num(d.itae_b), num(d.delta)]
        }),
    )
}

pub fn comparison_csv(rows: &[(String, f64, f64)]) -> anyhow::Result<Vec<u8>> {
    csv_bytes(&["config", "itae", "iau"], rows.iter().map(|(name, itae, iau)| vec![name.clone(), num(*itae), num(*iau)]))
}

pub fn trajectory_csv(tr: &Trajectory) -> anyhow::Result<Vec<u8>> {
    csv_bytes(
        &TRAJECTORY_HEADER,
        (0..tr.len()).map(|k| vec![num(tr.t[k]), num(tr.theta_ref[k]), num(tr.dtheta_ref[k]), num(tr.ddtheta_ref[k])]),
    )
}

/// Loads a reference trajectory. The derivative columns are optional; when
/// absent they are synthesized by finite differences.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory, Failure> {
    let fail = |msg: String| Failure::Validation(format!("trajectory {}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| fail(e.to_string()))?;
    let header: Vec<String> = reader.headers().map_err(|e| fail(e.to_string()))?.iter().map(str::to_string).collect();
    let with_derivatives = match header.len() {
        2 if header == TRAJECTORY_HEADER[..2] => false,
        4 if header == TRAJECTORY_HEADER => true,
        _ => return Err(fail(format!("header must be `{}` or `t,theta_ref`", TRAJECTORY_HEADER.join(",")))),
    };
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        for (col, field) in cols.iter_mut().zip(rec.iter()) {
            let v: f64 = field.parse().map_err(|_| fail(format!("row {}: `{field}` is not a number", row + 1)))?;
            col.push(v);
        }
    }
    let mut cols = cols.into_iter();
    let t = cols.next().unwrap_or_default();
    let theta = cols.next().unwrap_or_default();
    let derivatives = if with_derivatives {
        Some((cols.next().unwrap_or_default(), cols.next().unwrap_or_default()))
    } else {
        None
    };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Trajectory::from_columns(t, theta, derivatives, &name)?)
}
