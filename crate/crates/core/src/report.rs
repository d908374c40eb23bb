//! CSV tables and JSON summaries.
//!
//! Floats in CSV are written with 17 significant digits so that files are
//! byte-identical across runs and round-trip exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cut::CutRecord;
use crate::error::{Error, Result};
use crate::focal::FocalScan;
use crate::scenario::Scenario;

/// `x` with 17 significant digits; `inf`, `-inf`, `nan` for non-finite values.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Scenario(format!("write failed: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(io)?;
    String::from_utf8(bytes).map_err(io)
}

/// One row per focal record.
pub fn focal_csv(scan: &FocalScan, chart_dim: usize, coord_dim: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["ray".into()];
    header.extend(names("u", chart_dim));
    header.extend(
        [
            "time",
            "k",
            "i",
            "regular",
            "localform",
            "delta_radial_derivative",
            "kernel_angle",
        ]
        .map(String::from),
    );
    header.extend(names("x", coord_dim));
    header.extend((1..=scan.max_j).map(|j| format!("lambda_{j}")));
    w.write_record(&header).map_err(io)?;
    for ray in &scan.rays {
        for r in &ray.records {
            let mut row = vec![ray.index.to_string()];
            row.extend(ray.u.iter().map(|x| fmt(*x)));
            row.push(fmt(r.time));
            row.push(r.multiplicity.to_string());
            row.push(r.order.to_string());
            row.push(r.regular.to_string());
            row.push(r.localform.as_str().into());
            row.push(fmt(r.det_radial_derivative));
            row.push(fmt(r.kernel_angle));
            row.extend(r.point.iter().map(|x| fmt(*x)));
            row.extend(ray.lambdas.iter().map(|x| fmt(*x)));
            w.write_record(&row).map_err(io)?;
        }
    }
    finish(w)
}

/// One row per ray with the focal times `λ_1..λ_J`.
pub fn lambda_csv(scan: &FocalScan, chart_dim: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["ray".into()];
    header.extend(names("u", chart_dim));
    header.extend((1..=scan.max_j).map(|j| format!("lambda_{j}")));
    w.write_record(&header).map_err(io)?;
    for ray in &scan.rays {
        let mut row = vec![ray.index.to_string()];
        row.extend(ray.u.iter().map(|x| fmt(*x)));
        row.extend(ray.lambdas.iter().map(|x| fmt(*x)));
        w.write_record(&row).map_err(io)?;
    }
    finish(w)
}

/// `separating+focal` style tag list of a cut record.
pub fn cut_reasons(r: &CutRecord) -> String {
    let tags: Vec<&str> = [(r.separating, "separating"), (r.focal, "focal"), (r.horizon, "horizon")]
        .iter()
        .filter(|(b, _)| *b)
        .map(|(_, s)| *s)
        .collect();
    if tags.is_empty() {
        r.reason.as_str().into()
    } else {
        tags.join("+")
    }
}

/// One row per ray.
pub fn cut_csv(records: &[CutRecord], chart_dim: usize, coord_dim: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["ray".into()];
    header.extend(names("u", chart_dim));
    header.extend(["rho", "lambda_1", "reason", "separating", "focal", "horizon"].map(String::from));
    header.extend(names("x", coord_dim));
    header.push("witness_side".into());
    header.extend(names("witness_u", chart_dim));
    header.push("witness_t".into());
    w.write_record(&header).map_err(io)?;
    for r in records {
        let mut row = vec![r.index.to_string()];
        row.extend(r.u.iter().map(|x| fmt(*x)));
        row.push(fmt(r.rho));
        row.push(fmt(r.lambda1));
        row.push(cut_reasons(r));
        row.push(r.separating.to_string());
        row.push(r.focal.to_string());
        row.push(r.horizon.to_string());
        if r.point.len() == coord_dim {
            row.extend(r.point.iter().map(|x| fmt(*x)));
        } else {
            row.extend(std::iter::repeat_n(String::new(), coord_dim));
        }
        match &r.witness {
            Some(f) => {
                row.push(f.side.to_string());
                row.extend(f.u.iter().map(|x| fmt(*x)));
                row.push(fmt(f.t));
            }
            None => row.extend(std::iter::repeat_n(String::new(), chart_dim + 2)),
        }
        w.write_record(&row).map_err(io)?;
    }
    finish(w)
}

/// JSON summary written next to every output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub status: String,
    pub files: Vec<String>,
    pub results: BTreeMap<String, serde_json::Value>,
}

impl Summary {
    pub fn new(command: &str, scenario: &Scenario, hash: &str) -> Self {
        let mut tolerances = BTreeMap::new();
        tolerances.insert("time".into(), scenario.tolerances.time);
        tolerances.insert("ode_rtol".into(), scenario.tolerances.ode_rtol);
        tolerances.insert("ode_atol".into(), scenario.tolerances.ode_atol);
        tolerances.insert("cut_slack".into(), scenario.cut.slack);
        tolerances.insert("cut_bisect".into(), scenario.cut.bisect_tol);
        tolerances.insert("cut_focal".into(), scenario.cut.focal_tol);
        tolerances.insert("witness_delta".into(), scenario.cut.witness_delta);
        tolerances.insert("witness_tol".into(), scenario.cut.witness_tol);
        tolerances.insert("t_max".into(), scenario.scan.t_max);
        Summary {
            tool: "finsler-focal".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario: scenario.name.clone(),
            scenario_hash: hash.into(),
            seed: scenario.seed,
            tolerances,
            status: "ok".into(),
            files: Vec::new(),
            results: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.results.insert(key.into(), v);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap_or_default();
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 7.0, std::f64::consts::PI * 1e12] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mant: String = s
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(|c| c.is_ascii_digit())
                .collect();
            assert_eq!(mant.len(), 17);
        }
        assert_eq!(fmt(f64::INFINITY), "inf");
    }
}
