//! Verification suites run against a scenario.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cut::{closure_check, rho_le_lambda_report, t3_not_cut_check, DistanceOracle};
use crate::error::{Error, Result};
use crate::focal::{
    detect_focal_times, focal_derivative_fd, focal_derivative_formula, focal_scan, focal_time, morse_index_from,
    non_injectivity_witness, FocalScan, FocalTime,
};
use crate::jacobi::JacobiFrame;
use crate::oracle::index_form_matrix;
use crate::scenario::{MetricSpec, Scenario, SubmanifoldSpec};
use crate::submanifold::NormalBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Adjoint,
    Index,
    Warner,
    Closure,
    NonInjectivity,
    DerivativeReport,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Adjoint,
        Suite::Index,
        Suite::Warner,
        Suite::Closure,
        Suite::NonInjectivity,
        Suite::DerivativeReport,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Adjoint => "adjoint",
            Suite::Index => "index",
            Suite::Warner => "warner",
            Suite::Closure => "closure",
            Suite::NonInjectivity => "noninjectivity",
            Suite::DerivativeReport => "derivative-report",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Scenario(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Bound the value is compared against (`value <= threshold` unless the
    /// name says otherwise).
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteReport {
    pub suite: String,
    pub scenario: String,
    pub status: Status,
    pub checks: Vec<Check>,
    pub rows: Vec<BTreeMap<String, f64>>,
}

impl SuiteReport {
    fn new(suite: Suite, sc: &Scenario) -> Self {
        SuiteReport {
            suite: suite.name().into(),
            scenario: sc.name.clone(),
            status: Status::Pass,
            checks: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, threshold, value <= threshold);
    }

    fn at_least(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, threshold, value >= threshold);
    }

    fn push(&mut self, name: &str, value: f64, threshold: f64, pass: bool) {
        if !pass && self.status == Status::Pass {
            self.status = Status::Fail;
        }
        self.checks.push(Check {
            name: name.into(),
            value,
            threshold,
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    /// Rows as CSV (columns in key order of the first row).
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let Some(first) = self.rows.first() else {
            return Ok(String::new());
        };
        let keys: Vec<&String> = first.keys().collect();
        let err = |e: csv::Error| Error::Scenario(e.to_string());
        w.write_record(&keys).map_err(err)?;
        for r in &self.rows {
            w.write_record(
                keys.iter()
                    .map(|k| crate::report::fmt(r.get(*k).copied().unwrap_or(f64::NAN))),
            )
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Scenario(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Scenario(e.to_string()))
    }
}

fn row(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn run_suite(sc: &Scenario, suite: Suite) -> Result<SuiteReport> {
    let bundle = sc.bundle()?;
    match suite {
        Suite::Adjoint => adjoint(sc, &bundle),
        Suite::Index => index(sc, &bundle),
        Suite::Warner => warner(sc, &bundle),
        Suite::Closure => closure(sc, &bundle),
        Suite::NonInjectivity => noninjectivity(sc, &bundle),
        Suite::DerivativeReport => derivative_report(sc, &bundle),
    }
}

fn adjoint(sc: &Scenario, b: &NormalBundle) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Adjoint, sc);
    let mut worst: f64 = 0.0;
    for (i, u) in b.ray_grid(sc.verify.rays).iter().enumerate() {
        let d = JacobiFrame::new(b, u, sc.scan.t_max)?.max_adjoint_defect(50)?;
        rep.rows.push(row(&[("ray", i as f64), ("defect", d)]));
        worst = worst.max(d);
    }
    rep.at_most("max_relative_defect", worst, 1e-7);
    Ok(rep)
}

fn near_focal(zeros: &[FocalTime], t: f64, margin: f64) -> bool {
    zeros.iter().any(|z| (z.time - t).abs() < margin)
}

/// Clearance from focal times used when sampling horizons.
const MARGIN: f64 = 0.05;

fn index(sc: &Scenario, b: &NormalBundle) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Index, sc);
    let rays = b.ray_grid(sc.verify.rays);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let (t_max, tol) = (sc.scan.t_max, sc.tolerances.time);
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    let mut attempts = 0usize;
    while pairs < sc.verify.index_pairs && attempts < 50 * sc.verify.index_pairs.max(1) {
        attempts += 1;
        let ri = rng.random_range(0..rays.len());
        let t = t_max * rng.random_range(0.05..0.95);
        let frame = JacobiFrame::new(b, &rays[ri], t_max)?;
        let zeros = detect_focal_times(&frame, t_max, tol)?;
        if near_focal(&zeros, t, MARGIN) {
            continue;
        }
        let morse = morse_index_from(&zeros, t, tol)?;
        let mesh = sc.mesh(t);
        let coarse = index_form_matrix(&frame, t, mesh)?.negative_count();
        let fine = index_form_matrix(&frame, t, 2 * mesh)?.negative_count();
        let (c, f) = match (coarse, fine) {
            (Ok(c), Ok(f)) => (c as f64, f as f64),
            (Err(Error::MeshTooCoarse(_)), _) | (_, Err(Error::MeshTooCoarse(_))) => (f64::NAN, f64::NAN),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if c != morse as f64 || f != morse as f64 {
            mismatches += 1;
        }
        pairs += 1;
        rep.rows.push(row(&[
            ("ray", ri as f64),
            ("t", t),
            ("morse_index", morse as f64),
            ("index_form", c),
            ("index_form_half_mesh", f),
        ]));
    }
    rep.at_least("pairs", pairs as f64, sc.verify.index_pairs as f64);
    rep.at_most("index_mismatches", mismatches as f64, 0.0);

    let r = sc.verify.constancy_radius;
    let mut unstable = 0usize;
    let mut probes = 0usize;
    attempts = 0;
    while probes < sc.verify.constancy_probes && attempts < 50 * sc.verify.constancy_probes.max(1) {
        attempts += 1;
        let u = &rays[rng.random_range(0..rays.len())];
        let t = t_max * rng.random_range(0.05..0.95);
        let zeros = detect_focal_times(&JacobiFrame::new(b, u, t_max)?, t_max, tol)?;
        if near_focal(&zeros, t, MARGIN) {
            continue;
        }
        let base = morse_index_from(&zeros, t, tol)?;
        let mut same = true;
        for _ in 0..20 {
            let dir: Vec<f64> = u.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let s = r * rng.random_range(0.0..1.0);
            let up: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + s * d / n).collect();
            let z = detect_focal_times(&JacobiFrame::new(b, &up, t)?, t, tol)?;
            if morse_index_from(&z, t, tol)? != base {
                same = false;
            }
        }
        probes += 1;
        if !same {
            unstable += 1;
        }
    }
    rep.at_least("constancy_probes", probes as f64, sc.verify.constancy_probes as f64);
    rep.at_most("constancy_failures", unstable as f64, 0.0);
    Ok(rep)
}

fn warner(sc: &Scenario, b: &NormalBundle) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Warner, sc);
    let mut s = sc.focal_settings();
    s.classify = true;
    let scan = focal_scan(b, &b.ray_grid(sc.verify.rays), &s)?;
    let mut fails = 0usize;
    let mut total = 0usize;
    for ray in &scan.rays {
        for (r, w) in ray.records.iter().zip(&ray.warner) {
            let Some(w) = w else { continue };
            total += 1;
            let ok = w.passes(r.multiplicity);
            if !ok {
                fails += 1;
            }
            rep.rows.push(row(&[
                ("ray", ray.index as f64),
                ("time", r.time),
                ("k", r.multiplicity as f64),
                ("r1_defect", (w.r1_norm - w.r1_expected).abs()),
                ("r2_rank", w.r2_rank as f64),
                ("r2_sigma_ratio", w.r2_sigma_ratio),
                ("r3_min", w.r3_counts.iter().copied().min().unwrap_or(0) as f64),
                ("r3_max", w.r3_counts.iter().copied().max().unwrap_or(0) as f64),
                ("pass", ok as u8 as f64),
            ]));
        }
    }
    rep.push("focal_points", total as f64, 0.0, true);
    rep.at_most("warner_failures", fails as f64, 0.0);
    Ok(rep)
}

/// Nearest-neighbour spacing of a ray grid in chart distance.
pub fn grid_spacing(b: &NormalBundle, rays: &[Vec<f64>]) -> f64 {
    if rays.len() < 2 {
        return f64::INFINITY;
    }
    rays[1..]
        .iter()
        .map(|r| b.chart_distance(&rays[0], r))
        .fold(f64::INFINITY, f64::min)
}

fn closure(sc: &Scenario, b: &NormalBundle) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Closure, sc);
    let rays = sc.rays()?;
    let oracle = DistanceOracle::new(b, sc.cut_settings())?;
    let cuts = oracle.cut_scan(&rays)?;
    let eps = 2.0 * grid_spacing(b, &rays);
    let frac = closure_check(b, &cuts, eps);
    rep.at_least("closure_fraction", frac, 1.0);
    let excess = rho_le_lambda_report(&cuts);
    rep.at_most("max_rho_minus_lambda1", excess.max(-1e300), sc.cut.focal_tol);
    let focal = focal_scan(b, &rays, &sc.focal_settings())?;
    let t3 = t3_not_cut_check(&focal, &cuts, sc.cut.focal_tol);
    rep.push("t3_records", t3.t3_records as f64, 0.0, true);
    rep.at_most("t3_cut_coincidences", t3.coinciding.len() as f64, 0.0);
    for r in &cuts {
        rep.rows.push(row(&[
            ("ray", r.index as f64),
            ("rho", r.rho),
            ("lambda_1", r.lambda1),
            ("separating", r.separating as u8 as f64),
            ("focal", r.focal as u8 as f64),
        ]));
    }
    Ok(rep)
}

fn noninjectivity(sc: &Scenario, b: &NormalBundle) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::NonInjectivity, sc);
    let scan: FocalScan = focal_scan(b, &b.ray_grid(sc.verify.rays), &sc.focal_settings())?;
    let (mut found, mut total) = (0usize, 0usize);
    for ray in &scan.rays {
        for r in ray.records.iter().filter(|r| r.regular) {
            total += 1;
            let frame = JacobiFrame::from_normal(b, ray.normal.clone(), r.time)?;
            let (dist, sep) = match non_injectivity_witness(&frame, r.time, 1e-2, 1e-3) {
                Ok(w) => (w.image_distance, w.separation),
                Err(_) => (f64::INFINITY, 0.0),
            };
            let ok = dist <= 1e-6 && sep >= 1e-3;
            found += ok as usize;
            rep.rows.push(row(&[
                ("ray", ray.index as f64),
                ("time", r.time),
                ("image_distance", dist),
                ("separation", sep),
                ("found", ok as u8 as f64),
            ]));
        }
    }
    let frac = if total == 0 { 1.0 } else { found as f64 / total as f64 };
    rep.push("regular_focal_points", total as f64, 0.0, true);
    rep.at_least("witness_fraction", frac, 0.95);
    Ok(rep)
}

/// `dλ_1/dθ` of the inward Euclidean ellipse `(a cos θ, b sin θ)`.
pub fn ellipse_lambda_derivative(a: f64, b: f64, th: f64) -> f64 {
    let q = a * a * th.sin().powi(2) + b * b * th.cos().powi(2);
    3.0 * (a * a - b * b) * th.sin() * th.cos() * q.sqrt() / (a * b)
}

fn derivative_report(sc: &Scenario, b: &NormalBundle) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::DerivativeReport, sc);
    rep.status = Status::Report;
    let analytic = match (&sc.metric, &sc.submanifold, sc.side) {
        (MetricSpec::Euclidean { .. }, SubmanifoldSpec::Ellipse { a, b, .. }, 1) => Some((*a, *b)),
        _ => None,
    };
    let c = b.chart_dim();
    if c == 0 {
        return Ok(rep);
    }
    let mut x = vec![0.0; c];
    x[0] = 1.0;
    for (i, u) in b.ray_grid(sc.verify.derivative_rays).iter().enumerate() {
        let frame = JacobiFrame::new(b, u, sc.scan.t_max)?;
        let lam = focal_time(&detect_focal_times(&frame, sc.scan.t_max, sc.tolerances.time)?, 1);
        if !lam.is_finite() {
            continue;
        }
        let fd = focal_derivative_fd(b, u, 1, &x, 1e-3, sc.scan.t_max)?;
        let formula = focal_derivative_formula(b, u, lam, &x)?;
        let mut r = row(&[
            ("ray", i as f64),
            ("u0", u[0]),
            ("lambda_1", lam),
            ("fd", fd.value),
            ("fd_coarse", fd.coarse),
            ("fd_fine", fd.fine),
            ("fd_self_consistency", fd.self_consistency),
            ("paper_formula", formula),
            ("discrepancy", fd.value - formula),
        ]);
        if let Some((ea, eb)) = analytic {
            r.insert("analytic".into(), ellipse_lambda_derivative(ea, eb, u[0]));
        }
        rep.rows.push(r);
    }
    Ok(rep)
}
