//! Distance from N, cut times, separating tangent cut points and the
//! closure and `ρ ≤ λ_1` checks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::focal::{detect_focal_times, focal_time, FocalScan, LocalForm, TIME_TOL};
use crate::geodesic::{GeodesicSystem, Vector};
use crate::jacobi::JacobiFrame;
use crate::shooting::{endpoint, solve_endpoint};
use crate::submanifold::{NormalBundle, Submanifold};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutSettings {
    /// Start rays per side of N.
    pub starts: usize,
    /// Starts refined by Gauss–Newton per query.
    pub refine: usize,
    pub t_max: f64,
    /// Slack of the predicate `d(N, 𝓔(t û)) ≥ t - slack`.
    pub slack: f64,
    /// Width at which bisection on the predicate stops.
    pub bisect_tol: f64,
    /// `|ρ - λ_1|` below which a cut point is tagged focal.
    pub focal_tol: f64,
    /// Radius (chart units) of the ball around `û` excluded from witness search.
    pub witness_delta: f64,
    /// Arrival-time tolerance for a second foot.
    pub witness_tol: f64,
    /// Residual at which a shot counts as converged.
    pub position_tol: f64,
}

impl Default for CutSettings {
    fn default() -> Self {
        CutSettings {
            starts: 64,
            refine: 6,
            t_max: 5.0,
            slack: 1e-10,
            bisect_tol: 1e-8,
            focal_tol: 1e-6,
            witness_delta: 5e-3,
            witness_tol: 1e-6,
            position_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Foot {
    /// Index of the side (bundle) the foot belongs to.
    pub side: usize,
    pub u: Vec<f64>,
    pub t: f64,
    pub base: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    pub distance: f64,
    pub feet: Vec<Foot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutReason {
    Separating,
    Focal,
    Horizon,
}

impl CutReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            CutReason::Separating => "separating",
            CutReason::Focal => "focal",
            CutReason::Horizon => "horizon",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutRecord {
    pub index: usize,
    pub u: Vec<f64>,
    /// `∞` when the predicate holds through `t_max`.
    pub rho: f64,
    pub lambda1: f64,
    pub reason: CutReason,
    pub separating: bool,
    pub focal: bool,
    pub horizon: bool,
    pub witness: Option<Foot>,
    pub point: Vector,
}

struct CachedRay {
    side: usize,
    u: Vec<f64>,
    samples: Vec<(f64, Vector)>,
}

/// Multi-start distance oracle for one submanifold; start rays are integrated once.
pub struct DistanceOracle {
    sides: Vec<NormalBundle>,
    rays: Vec<CachedRay>,
    settings: CutSettings,
    /// Minimum chart separation between cached starts of one query.
    spread: f64,
}

/// Bracket width at which bisection hands over to the secant crossing.
const COARSE_BRACKET: f64 = 1e-3;

/// Largest chart move of a foot between two continuation steps.
const FAMILY_STEP: f64 = 0.5;

/// Largest time step when marching a foot family towards a crossing.
const MARCH_STEP: f64 = 0.05;
const MIN_MARCH_STEP: f64 = 1e-9;
const MARCH_LIMIT: usize = 400;

/// Restarts of the secant crossing from earlier-crossing foot families.
const DESCENTS: usize = 8;

/// Offsets `1e-3 · 1.6^k` of the local start ring around `û`.
const RING_OFFSETS: i32 = 13;

/// Half-width (chart units) of the pencil searched for feet near a focal point.
const PENCIL_RADIUS: f64 = 0.3;

/// Relative distance below `λ_1` at which the pencil search is switched on.
const PENCIL_WINDOW: f64 = 0.02;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl DistanceOracle {
    /// Both sides of N in codimension one; `bundle`'s side is index 0.
    pub fn new(bundle: &NormalBundle, settings: CutSettings) -> Result<Self> {
        let mut sides = vec![bundle.clone()];
        if bundle.codim() == 1 {
            sides.push(bundle.flipped());
        }
        let jobs: Vec<(usize, Vec<f64>)> = sides
            .iter()
            .enumerate()
            .flat_map(|(s, b)| b.ray_grid(settings.starts).into_iter().map(move |u| (s, u)))
            .collect();
        let samples = ((40.0 * settings.t_max).ceil() as usize).max(100);
        let rays = jobs
            .par_iter()
            .map(|(s, u)| {
                let b = &sides[*s];
                let un = b.unit_normal(u)?;
                let path = b.system().integrate_geodesic(&un.base, &un.vector, settings.t_max)?;
                let samples = (0..=samples)
                    .map(|i| {
                        let t = settings.t_max * i as f64 / samples as f64;
                        (t, path.position(t))
                    })
                    .collect();
                Ok(CachedRay {
                    side: *s,
                    u: u.clone(),
                    samples,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let b = &sides[0];
        let spacing = rays
            .iter()
            .filter(|r| r.side == 0)
            .map(|r| {
                rays.iter()
                    .filter(|o| o.side == 0 && !std::ptr::eq(*o, r))
                    .map(|o| b.chart_distance(&r.u, &o.u))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        let spread = if spacing.is_finite() { 2.5 * spacing } else { 0.0 };
        Ok(DistanceOracle {
            sides,
            rays,
            settings,
            spread,
        })
    }

    pub fn settings(&self) -> &CutSettings {
        &self.settings
    }

    pub fn bundle(&self) -> &NormalBundle {
        &self.sides[0]
    }

    fn foot(&self, side: usize, u: Vec<f64>, t: f64) -> Result<Foot> {
        let base = self.sides[side].unit_normal(&u)?.base;
        Ok(Foot { side, u, t, base })
    }

    /// Converged shots from the best cached starts, then from `extra` starts.
    ///
    /// Cached starts are picked nearest first but at least `spread` apart, so
    /// that a pencil of rays focusing near `q` does not hide a distant foot.
    fn shots(&self, q: &[f64], extra: &[(usize, Vec<f64>, f64)], stop: Option<&dyn Fn(&Foot) -> bool>) -> Vec<Foot> {
        let mut cands: Vec<(f64, usize, &[f64], f64)> = self
            .rays
            .iter()
            .map(|r| {
                let (t, d) = r
                    .samples
                    .iter()
                    .map(|(t, x)| (*t, dist(x, q)))
                    .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
                (d, r.side, r.u.as_slice(), t)
            })
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut starts: Vec<(usize, Vec<f64>, f64)> = Vec::new();
        for (_, side, u, t) in cands {
            if starts.len() >= self.settings.refine {
                break;
            }
            let b = &self.sides[side];
            if starts
                .iter()
                .any(|s| s.0 == side && b.chart_distance(&s.1, u) < self.spread)
            {
                continue;
            }
            starts.push((side, u.to_vec(), t));
        }
        starts.extend(extra.iter().cloned());
        let mut feet: Vec<Foot> = Vec::new();
        for (side, u, t) in starts {
            if let Some(stop) = stop {
                if feet.iter().any(stop) {
                    break;
                }
            }
            let b = &self.sides[side];
            let Ok(shot) = solve_endpoint(b, &u, t, q, 0.01 * self.settings.position_tol, 40) else {
                continue;
            };
            if shot.residual > self.settings.position_tol || shot.t <= 0.0 {
                continue;
            }
            let dup = feet
                .iter()
                .any(|f| f.side == side && b.chart_distance(&f.u, &shot.u) < 1e-7);
            if !dup {
                if let Ok(f) = self.foot(side, shot.u, shot.t) {
                    feet.push(f);
                }
            }
        }
        feet
    }

    /// `d(N, q)` and the feet within `1e-6` of it.
    pub fn distance_to_point(&self, q: &[f64]) -> Result<DistanceResult> {
        let on_n = self.near_n(q);
        if let Some(foot) = on_n {
            return Ok(DistanceResult {
                distance: 0.0,
                feet: vec![foot],
            });
        }
        let feet = self.shots(q, &[], None);
        finish(feet, q)
    }

    /// Points of N closer than the position tolerance.
    fn near_n(&self, q: &[f64]) -> Option<Foot> {
        let r = self
            .rays
            .iter()
            .min_by(|a, b| dist(&a.samples[0].1, q).total_cmp(&dist(&b.samples[0].1, q)))?;
        let b = &self.sides[r.side];
        let sub = b.submanifold();
        let m = sub.dim();
        // Gauss–Newton for the closest parameter
        let mut th = r.u[..m].to_vec();
        for _ in 0..50 {
            let p = sub.point_at(&th);
            let tg = sub.tangents(&th);
            let mut moved = 0.0;
            for a in 0..m {
                let tt: f64 = tg[a].iter().map(|c| c * c).sum();
                let step = tg[a]
                    .iter()
                    .zip(q.iter().zip(&p))
                    .map(|(t, (x, y))| t * (x - y))
                    .sum::<f64>()
                    / tt;
                th[a] += step;
                moved += step.abs();
            }
            if moved < 1e-15 {
                break;
            }
        }
        let p = sub.point_at(&th);
        if dist(&p, q) < self.settings.position_tol {
            let mut u = th;
            u.extend_from_slice(&r.u[m..]);
            Some(Foot {
                side: r.side,
                u,
                t: 0.0,
                base: p,
            })
        } else {
            None
        }
    }

    /// A foot of `𝓔(t û)` reached earlier than `t - slack`, if any.
    ///
    /// `hint` is a foot found at a nearby time and is tried first; the pencil
    /// search runs only when `near_focal`.
    pub fn shorter_foot(&self, u: &[f64], t: f64, hint: Option<&Foot>, near_focal: bool) -> Result<Option<Foot>> {
        let q = endpoint(&self.sides[0], u, t)?;
        let mut extra: Vec<(usize, Vec<f64>, f64)> = hint.map(|f| (f.side, f.u.clone(), f.t)).into_iter().collect();
        extra.extend(self.ring(u, t));
        let lim = t - self.settings.slack;
        let b = &self.sides[0];
        let shorter = |f: &Foot| f.t < lim && (f.side != 0 || b.chart_distance(&f.u, u) > self.settings.witness_delta);
        let mut feet = self.shots(&q, &extra, Some(&shorter));
        if near_focal && !feet.iter().any(shorter) {
            feet.extend(self.pencil_feet(u, t, &q));
        }
        Ok(feet.into_iter().filter(shorter).min_by(|a, b| a.t.total_cmp(&b.t)))
    }

    /// Whether `𝓔(t û)` is still reached first along `û` (up to `slack`).
    fn predicate(&self, u: &[f64], t: f64, hint: Option<&Foot>, near_focal: bool) -> Result<bool> {
        Ok(self.shorter_foot(u, t, hint, near_focal)?.is_none())
    }

    /// Feet of `q = 𝓔(t û)` on the rays `û(u + s)` of a one-parameter family
    /// on a surface, `|s| ≤ PENCIL_RADIUS`, bracketed by sign changes of the
    /// signed miss distance and polished by shooting.
    ///
    /// Near a focal point the least-squares shots started next to `û` tend to
    /// fall back onto `û`; bracketing does not.
    fn pencil_feet(&self, u: &[f64], t: f64, q: &[f64]) -> Vec<Foot> {
        let b = &self.sides[0];
        let sys = b.system();
        if u.len() != 1 || sys.dim() != 2 {
            return Vec::new();
        }
        let t_end = 1.01 * t;
        let Ok(own) = b
            .unit_normal(u)
            .and_then(|n| sys.integrate_geodesic(&n.base, &n.vector, t_end))
        else {
            return Vec::new();
        };
        let w = own.velocity(t);
        let wn = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        let lateral = sys
            .tangent_basis(q)
            .into_iter()
            .map(|e| {
                let c = e.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / (wn * wn);
                e.iter().zip(&w).map(|(a, b)| a - c * b).collect::<Vector>()
            })
            .max_by(|a, b| {
                let na = a.iter().map(|c| c * c).sum::<f64>();
                let nb = b.iter().map(|c| c * c).sum::<f64>();
                na.total_cmp(&nb)
            });
        let Some(lateral) = lateral else {
            return Vec::new();
        };
        // signed miss and closest-approach time of the ray at offset `s`
        let miss = |s: f64| -> Option<(f64, f64)> {
            let n = b.unit_normal(&[u[0] + s]).ok()?;
            let path = sys.integrate_geodesic(&n.base, &n.vector, t_end).ok()?;
            let d2 = |tau: f64| {
                let x = path.position(tau);
                x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            };
            let k = 64;
            let h = t_end / k as f64;
            let i = (0..=k).min_by(|&i, &j| d2(i as f64 * h).total_cmp(&d2(j as f64 * h)))?;
            let (mut lo, mut hi) = (((i as f64) - 1.0).max(0.0) * h, ((i + 1) as f64 * h).min(t_end));
            for _ in 0..60 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if d2(m1) < d2(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let tau = 0.5 * (lo + hi);
            let x = path.position(tau);
            let g: f64 = q.iter().zip(&x).zip(&lateral).map(|((a, b), l)| (a - b) * l).sum();
            Some((g, tau))
        };
        let mut offsets: Vec<f64> = (0..8).map(|k| 1e-3 * 1.6f64.powi(k)).collect();
        let mut s = 0.03;
        while s <= PENCIL_RADIUS + 1e-12 {
            offsets.push(s);
            s += 0.01;
        }
        let mut feet = Vec::new();
        for sign in [1.0, -1.0] {
            let pts: Vec<(f64, Option<(f64, f64)>)> = offsets.iter().map(|o| (sign * o, miss(sign * o))).collect();
            for pair in pts.windows(2) {
                let ((mut a, Some((mut ga, _))), (mut c, Some((mut gc, _)))) = (pair[0], pair[1]) else {
                    continue;
                };
                if ga * gc > 0.0 {
                    continue;
                }
                let mut root = (a, 0.0);
                for _ in 0..40 {
                    let x = if gc != ga {
                        c - gc * (c - a) / (gc - ga)
                    } else {
                        0.5 * (a + c)
                    };
                    let x = if (x - a) * (x - c) < 0.0 { x } else { 0.5 * (a + c) };
                    let Some((gx, tau)) = miss(x) else {
                        break;
                    };
                    root = (x, tau);
                    if gx.abs() < 1e-13 || (c - a).abs() < 1e-14 {
                        break;
                    }
                    if gx * ga < 0.0 {
                        (c, gc) = (x, gx);
                        ga *= 0.5;
                    } else {
                        (a, ga) = (x, gx);
                        gc *= 0.5;
                    }
                }
                let start = [u[0] + root.0];
                let Ok(shot) = solve_endpoint(b, &start, root.1, q, 0.01 * self.settings.position_tol, 40) else {
                    continue;
                };
                if shot.residual <= self.settings.position_tol
                    && shot.t > 0.0
                    && b.chart_distance(&shot.u, u) > self.settings.witness_delta
                {
                    if let Ok(f) = self.foot(0, shot.u, shot.t) {
                        feet.push(f);
                    }
                }
            }
        }
        feet
    }

    /// Root of `t - τ(t)` in `[lo, hi)`, `τ` being the arrival time of the
    /// foot family through `foot` (followed by continuation), and the foot there.
    ///
    /// The family is marched down from `hi` in steps of at most `MARCH_STEP`
    /// until the sign changes, then the bracket is closed by regula falsi.
    fn crossing(&self, u: &[f64], lo: Option<f64>, hi: f64, foot: &Foot) -> Option<(f64, Foot)> {
        let b = &self.sides[foot.side];
        let tol = 0.01 * self.settings.position_tol;
        let mut cur = (foot.u.clone(), foot.t);
        let mut gap = |t: f64| -> Option<f64> {
            let q = endpoint(&self.sides[0], u, t).ok()?;
            let shot = solve_endpoint(b, &cur.0, cur.1, &q, tol, 40).ok()?;
            if shot.residual > self.settings.position_tol {
                return None;
            }
            if foot.side == 0 && self.sides[0].chart_distance(&shot.u, u) <= self.settings.witness_delta {
                return None;
            }
            if b.chart_distance(&shot.u, &cur.0) > FAMILY_STEP {
                return None;
            }
            cur = (shot.u, shot.t);
            Some(t - cur.1)
        };
        let floor = lo.unwrap_or(0.0);
        if !(floor < hi) {
            return None;
        }
        let (mut a, mut fa) = (hi, gap(hi)?);
        if !(fa > 0.0) {
            return None;
        }
        let mut step = (0.5 * fa).clamp(MIN_MARCH_STEP, MARCH_STEP);
        let (mut c, mut fc) = (a, fa);
        for _ in 0..MARCH_LIMIT {
            c = (a - step).max(floor);
            fc = gap(c)?;
            if fc <= 0.0 || c <= floor {
                break;
            }
            let predicted = fc * (a - c) / (fa - fc).max(1e-300);
            step = (1.2 * predicted).min(2.0 * step).clamp(MIN_MARCH_STEP, MARCH_STEP);
            (a, fa) = (c, fc);
        }
        if fc > 0.0 {
            return None;
        }
        // Illinois regula falsi on [c, a] with fc <= 0 < fa
        let mut side = 0;
        for _ in 0..60 {
            let x = (c - fc * (a - c) / (fa - fc)).clamp(c, a);
            let fx = gap(x)?;
            if fx.abs() < 1e-14 || a - c < 1e-13 {
                if x >= hi - self.settings.bisect_tol {
                    return None;
                }
                return self.foot(foot.side, cur.0, cur.1).ok().map(|f| (x, f));
            }
            if fx > 0.0 {
                (a, fa) = (x, fx);
                if side == 1 {
                    fc *= 0.5;
                }
                side = 1;
            } else {
                (c, fc) = (x, fx);
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            }
        }
        None
    }

    fn ring(&self, u: &[f64], t: f64) -> Vec<(usize, Vec<f64>, f64)> {
        let mut out = Vec::new();
        for off in (0..RING_OFFSETS).map(|k| 1e-3 * 1.6f64.powi(k)) {
            for a in 0..u.len() {
                for s in [off, -off] {
                    let mut v = u.to_vec();
                    v[a] += s;
                    out.push((0, v, t));
                }
            }
        }
        out
    }

    /// Second foot of `q = 𝓔(ρ û)` outside the `witness_delta` ball around `û`.
    pub fn separating_witness(
        &self,
        u: &[f64],
        rho: f64,
        hint: Option<&Foot>,
        near_focal: bool,
    ) -> Result<Option<Foot>> {
        if !rho.is_finite() {
            return Ok(None);
        }
        let q = endpoint(&self.sides[0], u, rho)?;
        let mut extra: Vec<(usize, Vec<f64>, f64)> = hint.map(|f| (f.side, f.u.clone(), f.t)).into_iter().collect();
        extra.extend(self.ring(u, rho));
        if self.sides.len() > 1 {
            extra.push((1, u.to_vec(), rho));
        }
        let mut feet = self.shots(&q, &extra, None);
        if near_focal {
            feet.extend(self.pencil_feet(u, rho, &q));
        }
        let b = &self.sides[0];
        Ok(feet
            .into_iter()
            .filter(|f| f.side != 0 || b.chart_distance(&f.u, u) > self.settings.witness_delta)
            .filter(|f| (f.t - rho).abs() <= self.settings.witness_tol.max(10.0 * self.settings.bisect_tol))
            .min_by(|a, b| a.t.total_cmp(&b.t)))
    }

    /// Cut time along `û(u)` by bisection on the minimisation predicate.
    pub fn cut_time(&self, index: usize, u: &[f64]) -> Result<CutRecord> {
        let s = &self.settings;
        let b = &self.sides[0];
        let frame = JacobiFrame::new(b, u, s.t_max)?;
        let lambda1 = focal_time(&detect_focal_times(&frame, s.t_max, TIME_TOL)?, 1);
        let hi0 = lambda1.min(s.t_max);
        let near = |t: f64| lambda1.is_finite() && t >= (1.0 - PENCIL_WINDOW) * lambda1;
        let mut last: Option<Foot> = None;
        let (rho, horizon) = match self.shorter_foot(u, hi0, None, near(hi0))? {
            None => (hi0, !lambda1.is_finite() || lambda1 > s.t_max),
            Some(mut foot) => {
                // follow foot families down from `hi0`; each failed check below a
                // root yields an earlier-crossing family
                let mut top = hi0;
                let mut direct = None;
                for _ in 0..DESCENTS {
                    let Some((t, f)) = self.crossing(u, None, top, &foot) else {
                        break;
                    };
                    match self.shorter_foot(u, t - s.bisect_tol, Some(&f), near(t))? {
                        None => {
                            direct = Some((t, f));
                            break;
                        }
                        Some(g) => {
                            top = t - s.bisect_tol;
                            foot = g;
                        }
                    }
                }
                if let Some((t, f)) = direct {
                    last = Some(f);
                    (t, false)
                } else {
                    let (mut lo, mut hi) = (0.0, top);
                    while hi - lo > COARSE_BRACKET.max(s.bisect_tol) {
                        let mid = 0.5 * (lo + hi);
                        match self.shorter_foot(u, mid, Some(&foot), near(mid))? {
                            None => lo = mid,
                            Some(f) => {
                                hi = mid;
                                foot = f;
                            }
                        }
                    }
                    let refined = self.crossing(u, Some(lo), hi, &foot).filter(|(t, _)| {
                        self.predicate(u, t - s.bisect_tol, Some(&foot), near(*t))
                            .unwrap_or(false)
                    });
                    let r = match refined {
                        Some((t, f)) => {
                            foot = f;
                            t
                        }
                        None => {
                            while hi - lo > s.bisect_tol {
                                let mid = 0.5 * (lo + hi);
                                match self.shorter_foot(u, mid, Some(&foot), near(mid))? {
                                    None => lo = mid,
                                    Some(f) => {
                                        hi = mid;
                                        foot = f;
                                    }
                                }
                            }
                            0.5 * (lo + hi)
                        }
                    };
                    last = Some(foot);
                    (r, false)
                }
            }
        };
        let focal = lambda1.is_finite() && (rho - lambda1).abs() <= s.focal_tol;
        let witness = if horizon {
            None
        } else {
            self.separating_witness(u, rho, last.as_ref(), near(rho))?
        };
        let separating = witness.is_some();
        let reason = if separating {
            CutReason::Separating
        } else if focal {
            CutReason::Focal
        } else {
            CutReason::Horizon
        };
        let point = frame.flow().position(rho.min(s.t_max));
        Ok(CutRecord {
            index,
            u: u.to_vec(),
            rho: if horizon { f64::INFINITY } else { rho },
            lambda1,
            reason,
            separating,
            focal,
            horizon,
            witness,
            point,
        })
    }

    pub fn cut_scan(&self, rays: &[Vec<f64>]) -> Result<Vec<CutRecord>> {
        rays.par_iter().enumerate().map(|(i, u)| self.cut_time(i, u)).collect()
    }
}

fn finish(mut feet: Vec<Foot>, q: &[f64]) -> Result<DistanceResult> {
    if feet.is_empty() {
        return Err(Error::NoConvergentFoot(format!("no start converged to {q:?}")));
    }
    let d = feet.iter().map(|f| f.t).fold(f64::INFINITY, f64::min);
    feet.retain(|f| f.t <= d + 1e-6);
    feet.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(DistanceResult { distance: d, feet })
}

/// A pair of points with `d(p, q) ≠ d(q, p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymmetryWitness {
    pub p: Vector,
    pub q: Vector,
    pub d_pq: f64,
    pub d_qp: f64,
}

impl AsymmetryWitness {
    pub fn gap(&self) -> f64 {
        (self.d_pq - self.d_qp).abs()
    }
}

/// `d(p, q)` by shooting from the point source `p`.
pub fn point_distance(sys: &Arc<GeodesicSystem>, p: &[f64], q: &[f64], settings: CutSettings) -> Result<f64> {
    let b = NormalBundle::new(sys.clone(), Arc::new(Submanifold::point(p)), 1.0)?;
    Ok(DistanceOracle::new(&b, settings)?.distance_to_point(q)?.distance)
}

/// The candidate pair with the largest `|d(p, q) - d(q, p)|`.
pub fn asymmetry_witness(
    sys: &Arc<GeodesicSystem>,
    pairs: &[(Vector, Vector)],
    settings: CutSettings,
) -> Result<Option<AsymmetryWitness>> {
    let mut best: Option<AsymmetryWitness> = None;
    for (p, q) in pairs {
        let w = AsymmetryWitness {
            p: p.clone(),
            q: q.clone(),
            d_pq: point_distance(sys, p, q, settings)?,
            d_qp: point_distance(sys, q, p, settings)?,
        };
        if best.as_ref().is_none_or(|b| w.gap() > b.gap()) {
            best = Some(w);
        }
    }
    Ok(best)
}

/// Fraction of finite tangent cut points within `eps` (in `(u, t)`) of a separating one.
pub fn closure_check(bundle: &NormalBundle, records: &[CutRecord], eps: f64) -> f64 {
    let finite: Vec<&CutRecord> = records.iter().filter(|r| r.rho.is_finite()).collect();
    if finite.is_empty() {
        return 1.0;
    }
    let sep: Vec<&CutRecord> = finite.iter().copied().filter(|r| r.separating).collect();
    let close = finite
        .iter()
        .filter(|r| {
            r.separating
                || sep.iter().any(|s| {
                    let du = bundle.chart_distance(&r.u, &s.u);
                    (du * du + (r.rho - s.rho).powi(2)).sqrt() <= eps
                })
        })
        .count();
    close as f64 / finite.len() as f64
}

/// `max(ρ - λ_1)` over rays with finite `ρ` (`-∞` if none).
pub fn rho_le_lambda_report(records: &[CutRecord]) -> f64 {
    records
        .iter()
        .filter(|r| r.rho.is_finite() && r.lambda1.is_finite())
        .map(|r| r.rho - r.lambda1)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct T3Report {
    pub t3_records: usize,
    /// T3 records whose focal time coincides with the cut time.
    pub coinciding: Vec<(usize, f64, f64)>,
}

/// T3 focal points that are also tangent cut points (there should be none).
pub fn t3_not_cut_check(focal: &FocalScan, cuts: &[CutRecord], tol: f64) -> T3Report {
    let mut t3 = 0;
    let mut coinciding = Vec::new();
    for ray in &focal.rays {
        for rec in ray.records.iter().filter(|r| r.localform == LocalForm::T3) {
            t3 += 1;
            if let Some(c) = cuts.iter().find(|c| c.index == ray.index) {
                if c.rho.is_finite() && (c.rho - rec.time).abs() <= tol {
                    coinciding.push((ray.index, rec.time, c.rho));
                }
            }
        }
    }
    T3Report {
        t3_records: t3,
        coinciding,
    }
}
