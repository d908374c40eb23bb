//! Grid-graph distance from a curve or point in a 2D chart.
//!
//! Nodes of a regular grid are joined by a 16-neighbour stencil with directed
//! weights `F(p_mid, Δ)`; single-source Dijkstra runs from a band of nodes
//! around sampled points of N. With `any_angle` set, each relaxation also
//! tries the straight segment from the predecessor's parent (Theta*), which
//! removes the stencil's angular bias.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::metric::MetricModel;
use crate::submanifold::Submanifold;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    /// Nodes per axis.
    pub resolution: usize,
    /// Explicit box `[x_lo, y_lo, x_hi, y_hi]`; otherwise the bounding box
    /// of N padded by `margin`.
    pub bounds: Option<[f64; 4]>,
    pub margin: f64,
    pub any_angle: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            resolution: 600,
            bounds: None,
            margin: 0.5,
            any_angle: true,
        }
    }
}

const STENCIL: [(i64, i64); 16] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
    (1, 2),
    (2, 1),
    (-1, 2),
    (-2, 1),
    (1, -2),
    (2, -1),
    (-1, -2),
    (-2, -1),
];

#[derive(Debug, Clone, Copy)]
struct Parent {
    at: [f64; 2],
    g: f64,
}

#[derive(Debug, Clone)]
pub struct GridOracle {
    metric: MetricModel,
    lo: [f64; 2],
    hi: [f64; 2],
    res: usize,
    h: [f64; 2],
    dist: Vec<f64>,
    parent: Vec<Parent>,
}

struct Key(f64);
impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl GridOracle {
    pub fn build(metric: &MetricModel, sub: &Submanifold, settings: &GridSettings) -> Result<Self> {
        if metric.is_embedded() || metric.coord_dim() != 2 || sub.coord_dim() != 2 {
            return Err(Error::InvalidMetric("grid oracle needs a 2D chart metric".into()));
        }
        let res = settings.resolution.max(3);
        let samples = sample_submanifold(sub, 2000);
        let [xl, yl, xh, yh] = match settings.bounds {
            Some(b) => b,
            None => {
                let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
                for p in &samples {
                    b[0] = b[0].min(p[0]);
                    b[1] = b[1].min(p[1]);
                    b[2] = b[2].max(p[0]);
                    b[3] = b[3].max(p[1]);
                }
                let pad = settings.margin.max(1e-3);
                [b[0] - pad, b[1] - pad, b[2] + pad, b[3] + pad]
            }
        };
        let lo = [xl, yl];
        let hi = [xh, yh];
        let h = [(xh - xl) / (res - 1) as f64, (yh - yl) / (res - 1) as f64];
        let mut oracle = GridOracle {
            metric: metric.clone(),
            lo,
            hi,
            res,
            h,
            dist: vec![f64::INFINITY; res * res],
            parent: vec![Parent { at: [0.0; 2], g: 0.0 }; res * res],
        };
        let hmax = h[0].max(h[1]);
        let length: f64 = samples
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum();
        let count = ((4.0 * length / hmax).ceil() as usize).max(2000);
        let sources = if sub.dim() == 0 {
            samples
        } else {
            sample_submanifold(sub, count)
        };
        oracle.run(&sources, settings.any_angle);
        Ok(oracle)
    }

    pub fn bounds(&self) -> [f64; 4] {
        [self.lo[0], self.lo[1], self.hi[0], self.hi[1]]
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.lo[0] + i as f64 * self.h[0], self.lo[1] + j as f64 * self.h[1]]
    }

    fn f(&self, x: [f64; 2], d: [f64; 2]) -> f64 {
        self.metric.f2::<f64>(&x, &d).max(0.0).sqrt()
    }

    /// Finsler length of the straight segment `a → b` (midpoint rule).
    fn segment(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = [b[0] - a[0], b[1] - a[1]];
        if self.metric.is_flat() {
            return self.f(a, d);
        }
        let steps = ((d[0].abs() / self.h[0]).max(d[1].abs() / self.h[1]) / 2.0)
            .ceil()
            .clamp(1.0, 16.0) as usize;
        let s = 1.0 / steps as f64;
        (0..steps)
            .map(|k| {
                let t = (k as f64 + 0.5) * s;
                self.f([a[0] + t * d[0], a[1] + t * d[1]], [d[0] * s, d[1] * s])
            })
            .sum()
    }

    fn run(&mut self, sources: &[Vec<f64>], any_angle: bool) {
        let res = self.res;
        let mut heap = BinaryHeap::new();
        let reach = 2.5;
        for p in sources {
            let pc = [p[0], p[1]];
            let fi = (pc[0] - self.lo[0]) / self.h[0];
            let fj = (pc[1] - self.lo[1]) / self.h[1];
            let span = |f: f64| -> std::ops::Range<usize> {
                let a = (f - reach).ceil().max(0.0) as usize;
                let b = (f + reach).floor().min((res - 1) as f64);
                if b < 0.0 {
                    0..0
                } else {
                    a..b as usize + 1
                }
            };
            for i in span(fi) {
                for j in span(fj) {
                    let c = self.segment(pc, self.node(i, j));
                    let idx = i * res + j;
                    if c < self.dist[idx] {
                        self.dist[idx] = c;
                        self.parent[idx] = Parent { at: pc, g: 0.0 };
                        heap.push(Reverse((Key(c), idx)));
                    }
                }
            }
        }
        let mut done = vec![false; res * res];
        while let Some(Reverse((Key(du), u))) = heap.pop() {
            if done[u] || du > self.dist[u] {
                continue;
            }
            done[u] = true;
            let (ui, uj) = (u / res, u % res);
            let pu = self.node(ui, uj);
            let par = self.parent[u];
            for (di, dj) in STENCIL {
                let (wi, wj) = (ui as i64 + di, uj as i64 + dj);
                if wi < 0 || wj < 0 || wi >= res as i64 || wj >= res as i64 {
                    continue;
                }
                let w = wi as usize * res + wj as usize;
                if done[w] {
                    continue;
                }
                let pw = self.node(wi as usize, wj as usize);
                let mut best = du + self.segment(pu, pw);
                let mut bp = Parent { at: pu, g: du };
                if any_angle {
                    let c = par.g + self.segment(par.at, pw);
                    if c < best {
                        best = c;
                        bp = par;
                    }
                }
                if best < self.dist[w] {
                    self.dist[w] = best;
                    self.parent[w] = bp;
                    heap.push(Reverse((Key(best), w)));
                }
            }
        }
    }

    /// Distance from N to `q`.
    pub fn grid_distance(&self, q: &[f64]) -> Result<f64> {
        if q.len() != 2 || !(q[0] >= self.lo[0] && q[0] <= self.hi[0] && q[1] >= self.lo[1] && q[1] <= self.hi[1]) {
            return Err(Error::OutOfBox(q.to_vec()));
        }
        let qc = [q[0], q[1]];
        let fi = ((q[0] - self.lo[0]) / self.h[0]).floor() as i64;
        let fj = ((q[1] - self.lo[1]) / self.h[1]).floor() as i64;
        let mut best = f64::INFINITY;
        for i in (fi - 1)..=(fi + 2) {
            for j in (fj - 1)..=(fj + 2) {
                if i < 0 || j < 0 || i >= self.res as i64 || j >= self.res as i64 {
                    continue;
                }
                let idx = i as usize * self.res + j as usize;
                if !self.dist[idx].is_finite() {
                    continue;
                }
                let pn = self.node(i as usize, j as usize);
                let par = self.parent[idx];
                best = best
                    .min(self.dist[idx] + self.segment(pn, qc))
                    .min(par.g + self.segment(par.at, qc));
            }
        }
        Ok(best)
    }
}

/// Points of N on a uniform parameter grid (closed axes periodic).
fn sample_submanifold(sub: &Submanifold, count: usize) -> Vec<Vec<f64>> {
    if sub.dim() == 0 {
        return vec![sub.point_at(&[])];
    }
    let (lo, hi) = sub.ranges()[0];
    let closed = sub.periods()[0].is_some();
    let steps = if closed { count } else { count - 1 };
    (0..count)
        .map(|k| sub.point_at(&[lo + (hi - lo) * k as f64 / steps as f64]))
        .collect()
}
