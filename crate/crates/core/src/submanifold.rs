//! The closed submanifold N, its unit normal bundle, second fundamental form
//! and shape operator.
//!
//! Unit normals are parametrised by `u = (θ, φ)`: `θ ∈ R^m` are parameters of
//! the embedding and `φ ∈ R^(c-1)` are angles on the sphere of annihilating
//! covectors (`c = n - m`). A covector `ξ(u)` annihilating `dι(T_θ)` is built
//! from a basis that depends smoothly on θ and pushed through the inverse
//! Legendre map, then normalised. For codimension one the sphere is just the
//! sign `side`; `side = +1` is the left normal of a plane curve (inward for
//! counter-clockwise closed curves).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geodesic::{GeodesicSystem, Vector};
use crate::scalar::{Jet, Scalar};

#[derive(Debug, Clone)]
pub enum SubmanifoldKind {
    /// Circle in the `x0, x1` plane through `center`.
    Circle {
        center: Vec<f64>,
        radius: f64,
    },
    /// Ellipse `center + (a cos θ, b sin θ)` in the `x0, x1` plane.
    Ellipse {
        center: Vec<f64>,
        a: f64,
        b: f64,
    },
    Line {
        point: Vec<f64>,
        direction: Vec<f64>,
    },
    Point {
        coords: Vec<f64>,
    },
    /// Coordinate expressions in `u0..` (or `t` for curves).
    Parametric {
        coords: Vec<Expr>,
        m: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Submanifold {
    kind: SubmanifoldKind,
    d: usize,
    m: usize,
    periods: Vec<Option<f64>>,
    ranges: Vec<(f64, f64)>,
}

impl Submanifold {
    pub fn circle(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || center.len() < 2 {
            return Err(Error::Scenario(
                "circle needs radius > 0 and a centre with ≥ 2 coordinates".into(),
            ));
        }
        Ok(Submanifold {
            kind: SubmanifoldKind::Circle {
                center: center.to_vec(),
                radius,
            },
            d: center.len(),
            m: 1,
            periods: vec![Some(std::f64::consts::TAU)],
            ranges: vec![(0.0, std::f64::consts::TAU)],
        })
    }

    pub fn ellipse(center: &[f64], a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || center.len() < 2 {
            return Err(Error::Scenario("ellipse needs a, b > 0".into()));
        }
        Ok(Submanifold {
            kind: SubmanifoldKind::Ellipse {
                center: center.to_vec(),
                a,
                b,
            },
            d: center.len(),
            m: 1,
            periods: vec![Some(std::f64::consts::TAU)],
            ranges: vec![(0.0, std::f64::consts::TAU)],
        })
    }

    pub fn line(point: &[f64], direction: &[f64]) -> Result<Self> {
        if point.len() != direction.len() || direction.iter().all(|c| *c == 0.0) {
            return Err(Error::Scenario(
                "line needs a nonzero direction of matching length".into(),
            ));
        }
        Ok(Submanifold {
            kind: SubmanifoldKind::Line {
                point: point.to_vec(),
                direction: direction.to_vec(),
            },
            d: point.len(),
            m: 1,
            periods: vec![None],
            ranges: vec![(-1.0, 1.0)],
        })
    }

    pub fn point(coords: &[f64]) -> Self {
        Submanifold {
            kind: SubmanifoldKind::Point {
                coords: coords.to_vec(),
            },
            d: coords.len(),
            m: 0,
            periods: Vec::new(),
            ranges: Vec::new(),
        }
    }

    /// `coords` are expressions in `u0..u{m-1}`; for `m = 1` the names `t`
    /// and `s` may be used as well.
    pub fn parametric(coords: &[String], m: usize, periods: Vec<Option<f64>>) -> Result<Self> {
        let mut names: Vec<String> = (0..m).map(|i| format!("u{i}")).collect();
        if m == 1 {
            names.push("t".into());
            names.push("s".into());
        }
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let coords = coords
            .iter()
            .map(|c| Expr::parse(c, &refs))
            .collect::<Result<Vec<_>>>()?;
        if periods.len() != m {
            return Err(Error::Scenario("one period entry per parameter".into()));
        }
        let ranges = periods.iter().map(|p| (0.0, p.unwrap_or(1.0))).collect();
        Ok(Submanifold {
            d: coords.len(),
            kind: SubmanifoldKind::Parametric { coords, m },
            m,
            periods,
            ranges,
        })
    }

    pub fn kind(&self) -> &SubmanifoldKind {
        &self.kind
    }

    /// Dimension m of N.
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn coord_dim(&self) -> usize {
        self.d
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    /// Parameter range used for ray grids (one period for periodic parameters).
    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn with_range(mut self, a: usize, lo: f64, hi: f64) -> Result<Self> {
        if a >= self.m || !(hi > lo) {
            return Err(Error::Scenario(format!("bad range for parameter {a}")));
        }
        self.ranges[a] = (lo, hi);
        Ok(self)
    }

    /// Compact parameter domain or periodic in every parameter.
    pub fn is_closed(&self) -> bool {
        self.periods.iter().all(|p| p.is_some())
    }

    pub fn embed<S: Scalar>(&self, th: &[S]) -> Vec<S> {
        match &self.kind {
            SubmanifoldKind::Circle { center, radius } => {
                let mut out: Vec<S> = center.iter().map(|&c| S::from_f64(c)).collect();
                out[0] = out[0] + th[0].cos() * *radius;
                out[1] = out[1] + th[0].sin() * *radius;
                out
            }
            SubmanifoldKind::Ellipse { center, a, b } => {
                let mut out: Vec<S> = center.iter().map(|&c| S::from_f64(c)).collect();
                out[0] = out[0] + th[0].cos() * *a;
                out[1] = out[1] + th[0].sin() * *b;
                out
            }
            SubmanifoldKind::Line { point, direction } => {
                point.iter().zip(direction).map(|(&p, &v)| th[0] * v + p).collect()
            }
            SubmanifoldKind::Point { coords } => coords.iter().map(|&c| S::from_f64(c)).collect(),
            SubmanifoldKind::Parametric { coords, m } => {
                let mut vars: Vec<S> = th[..*m].to_vec();
                if *m == 1 {
                    vars.push(th[0]);
                    vars.push(th[0]);
                }
                coords.iter().map(|c| c.eval(&vars)).collect()
            }
        }
    }

    pub fn point_at(&self, th: &[f64]) -> Vector {
        self.embed(th)
    }

    /// Columns `∂ι/∂θ_a`.
    pub fn tangents(&self, th: &[f64]) -> Vec<Vector> {
        (0..self.m)
            .map(|a| {
                let ts: Vec<Jet> = (0..self.m)
                    .map(|k| Jet::seeded(th[k], &[(k == a) as u8 as f64]))
                    .collect();
                self.embed(&ts).iter().map(|j| j.coeff(1)).collect()
            })
            .collect()
    }

    /// `∂²ι(x, y)` for parameter directions `x, y`.
    pub fn second_derivative(&self, th: &[f64], x: &[f64], y: &[f64]) -> Vector {
        let ts: Vec<Jet> = (0..self.m).map(|k| Jet::seeded(th[k], &[x[k], y[k]])).collect();
        self.embed(&ts).iter().map(|j| j.coeff(0b11)).collect()
    }
}

/// A unit normal vector `v ∈ S(ν_p)`, `p = ι(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitNormal {
    /// Chart coordinates `(θ, φ)` on the unit normal bundle.
    pub u: Vec<f64>,
    pub base: Vector,
    pub vector: Vector,
}

impl UnitNormal {
    pub fn param(&self, m: usize) -> &[f64] {
        &self.u[..m]
    }
}

/// The unit normal bundle `S(ν)` of a submanifold, with one side selected
/// when the codimension is one.
#[derive(Debug, Clone)]
pub struct NormalBundle {
    sys: Arc<GeodesicSystem>,
    sub: Arc<Submanifold>,
    side: f64,
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut s = S::zero();
    for (x, y) in a.iter().zip(b) {
        s = s + *x * *y;
    }
    s
}

/// Generalised cross product: the covector `ξ_i = det[v_1 … v_{d-1} e_i]`.
fn cross<S: Scalar>(vs: &[Vec<S>], d: usize) -> Vec<S> {
    (0..d)
        .map(|i| {
            let rows: Vec<usize> = (0..d).filter(|&r| r != i).collect();
            let sign = if (d - 1 + i) % 2 == 0 { 1.0 } else { -1.0 };
            let mut m: Vec<Vec<S>> = rows.iter().map(|&r| vs.iter().map(|v| v[r]).collect()).collect();
            det(&mut m) * sign
        })
        .collect()
}

fn det<S: Scalar>(m: &mut [Vec<S>]) -> S {
    let n = m.len();
    match n {
        0 => S::one(),
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            // Laplace expansion along the first row (dimensions are tiny)
            let mut s = S::zero();
            for c in 0..n {
                let mut minor: Vec<Vec<S>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != c)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let t = m[0][c] * det(&mut minor);
                s = if c % 2 == 0 { s + t } else { s - t };
            }
            s
        }
    }
}

/// Point on `S^(c-1)` from `c - 1` hyperspherical angles.
fn sphere_point<S: Scalar>(phi: &[S], c: usize, side: f64) -> Vec<S> {
    if c == 1 {
        return vec![S::from_f64(side)];
    }
    let mut out = Vec::with_capacity(c);
    let mut prod = S::one();
    for k in 0..c - 1 {
        out.push(prod * phi[k].cos());
        prod = prod * phi[k].sin();
    }
    out.push(prod);
    out
}

impl NormalBundle {
    pub fn new(sys: Arc<GeodesicSystem>, sub: Arc<Submanifold>, side: f64) -> Result<Self> {
        if sub.coord_dim() != sys.coord_dim() {
            return Err(Error::Scenario(format!(
                "submanifold has {} coordinates, metric expects {}",
                sub.coord_dim(),
                sys.coord_dim()
            )));
        }
        if sub.dim() >= sys.dim() {
            return Err(Error::Scenario(
                "submanifold dimension must be below the manifold's".into(),
            ));
        }
        Ok(NormalBundle {
            sys,
            sub,
            side: if side < 0.0 { -1.0 } else { 1.0 },
        })
    }

    pub fn system(&self) -> &Arc<GeodesicSystem> {
        &self.sys
    }
    pub fn submanifold(&self) -> &Arc<Submanifold> {
        &self.sub
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    /// Same bundle, other side (codimension one).
    pub fn flipped(&self) -> Self {
        NormalBundle {
            side: -self.side,
            ..self.clone()
        }
    }
    pub fn n(&self) -> usize {
        self.sys.dim()
    }
    pub fn m(&self) -> usize {
        self.sub.dim()
    }
    pub fn codim(&self) -> usize {
        self.n() - self.m()
    }
    /// Dimension of `S(ν)`, i.e. length of `u`.
    pub fn chart_dim(&self) -> usize {
        self.n() - 1
    }

    /// Period of each chart coordinate (`None` for non-periodic ones).
    pub fn chart_periods(&self) -> Vec<Option<f64>> {
        let c = self.codim();
        let mut out = self.sub.periods().to_vec();
        for k in 0..c.saturating_sub(1) {
            out.push(if k + 2 == c { Some(std::f64::consts::TAU) } else { None });
        }
        out
    }

    /// Distance between chart points, wrapping periodic coordinates.
    pub fn chart_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.chart_periods()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(p, (x, y))| {
                let mut d = x - y;
                if let Some(p) = p {
                    d = d.rem_euclid(*p);
                    d = d.min(p - d);
                }
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// About `count` chart points covering `S(ν)` (the selected side in codimension one).
    pub fn ray_grid(&self, count: usize) -> Vec<Vec<f64>> {
        let mut axes: Vec<(f64, f64, bool)> = self
            .sub
            .ranges()
            .iter()
            .zip(self.sub.periods())
            .map(|(r, p)| (r.0, r.1, p.is_some()))
            .collect();
        let c = self.codim();
        for k in 0..c.saturating_sub(1) {
            if k + 2 == c {
                axes.push((0.0, std::f64::consts::TAU, true));
            } else {
                axes.push((0.0, std::f64::consts::PI, false));
            }
        }
        if axes.is_empty() {
            return vec![Vec::new()];
        }
        let per = (count as f64).powf(1.0 / axes.len() as f64).round().max(1.0) as usize;
        let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
        for (lo, hi, periodic) in axes {
            let pts: Vec<f64> = (0..per)
                .map(|i| {
                    if periodic {
                        lo + (hi - lo) * i as f64 / per as f64
                    } else {
                        lo + (hi - lo) * (i as f64 + 0.5) / per as f64
                    }
                })
                .collect();
            grid = grid
                .into_iter()
                .flat_map(|g| {
                    pts.iter().map(move |x| {
                        let mut h = g.clone();
                        h.push(*x);
                        h
                    })
                })
                .collect();
        }
        grid
    }

    /// Basis of covectors annihilating `T_pN` (tangent vectors orthogonal to
    /// `T_pN` on a hypersurface), as dual numbers along `dth`.
    fn annihilator(&self, th: &[f64], dth: &[f64]) -> Result<(Vector, Vector, Vec<Vec<Jet>>)> {
        let d = self.sys.coord_dim();
        let m = self.m();
        let c = self.codim();
        let ts: Vec<Jet> = (0..m).map(|k| Jet::seeded(th[k], &[dth[k]])).collect();
        let p_dual = self.sub.embed(&ts);
        let p: Vector = p_dual.iter().map(|j| j.re()).collect();
        // tangent columns as duals: ∂ι/∂θ_a and its derivative along dth
        let tangents: Vec<Vec<Jet>> = (0..m)
            .map(|a| {
                let ts: Vec<Jet> = (0..m)
                    .map(|k| Jet::from_coeffs(&[th[k], dth[k], (k == a) as u8 as f64, 0.0], 2))
                    .collect();
                self.sub
                    .embed(&ts)
                    .iter()
                    .map(|j| Jet::seeded(j.coeff(0b10), &[j.coeff(0b11)]))
                    .collect()
            })
            .collect();
        let mut constraints = tangents.clone();
        if let Some(level) = self.sys.metric().level() {
            let grad: Vec<Jet> = (0..d)
                .map(|i| {
                    let xs: Vec<Jet> = (0..d)
                        .map(|k| Jet::from_coeffs(&[p[k], p_dual[k].coeff(1), (k == i) as u8 as f64, 0.0], 2))
                        .collect();
                    let e = level.eval(&xs);
                    Jet::seeded(e.coeff(0b10), &[e.coeff(0b11)])
                })
                .collect();
            constraints.insert(0, grad);
        }
        let basis = if c == 1 {
            vec![cross(&constraints, d)]
        } else {
            // Gram–Schmidt of the standard basis against the constraints
            let mut ortho: Vec<Vec<Jet>> = Vec::new();
            for v in &constraints {
                let mut w = v.clone();
                for b in &ortho {
                    let cc = dot(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= cc * *bi;
                    }
                }
                let nw = dot(&w, &w).sqrt();
                if nw.re() < 1e-12 {
                    return Err(Error::DegenerateTangent(th.to_vec()));
                }
                ortho.push(w.iter().map(|x| *x / nw).collect());
            }
            let mut out: Vec<Vec<Jet>> = Vec::new();
            for i in 0..d {
                let mut w: Vec<Jet> = (0..d).map(|k| Jet::constant((k == i) as u8 as f64)).collect();
                for b in ortho.iter().chain(out.iter()) {
                    let cc = dot(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= cc * *bi;
                    }
                }
                let nw = dot(&w, &w).sqrt();
                if nw.re() > 0.3 {
                    out.push(w.iter().map(|x| *x / nw).collect());
                }
                if out.len() == c {
                    break;
                }
            }
            out
        };
        if basis.len() != c || basis[0].iter().map(|j| j.re().abs()).fold(0.0, f64::max) < 1e-12 {
            return Err(Error::DegenerateTangent(th.to_vec()));
        }
        let dp = p_dual.iter().map(|j| j.coeff(1)).collect();
        Ok((p, dp, basis))
    }

    /// `ξ(u)` with its derivative along `du`.
    fn covector(&self, u: &[f64], du: &[f64]) -> Result<(Vector, Vector, Vec<Jet>)> {
        let m = self.m();
        let c = self.codim();
        let (p, dp, basis) = self.annihilator(&u[..m], &du[..m])?;
        let phi: Vec<Jet> = (m..u.len()).map(|k| Jet::seeded(u[k], &[du[k]])).collect();
        let s = sphere_point(&phi, c, self.side);
        let d = p.len();
        let mut xi = vec![Jet::constant(0.0); d];
        for (sb, b) in s.iter().zip(&basis) {
            for i in 0..d {
                xi[i] += *sb * b[i];
            }
        }
        Ok((p, dp, xi))
    }

    /// The unit normal at chart coordinates `u = (θ, φ)`.
    pub fn unit_normal(&self, u: &[f64]) -> Result<UnitNormal> {
        let zeros = vec![0.0; u.len()];
        let (p, _, xi) = self.covector(u, &zeros)?;
        let xi: Vector = xi.iter().map(|j| j.re()).collect();
        let v = self.normalise(&p, &xi)?;
        Ok(UnitNormal {
            u: u.to_vec(),
            base: p,
            vector: v,
        })
    }

    fn normalise(&self, p: &[f64], xi: &[f64]) -> Result<Vector> {
        if self.sys.is_embedded() {
            let n = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
            return Ok(xi.iter().map(|c| c / n).collect());
        }
        let w = self.sys.metric().legendre_inverse(p, xi)?;
        let f = self.sys.metric().norm(p, w.as_slice())?;
        Ok(w.iter().map(|c| c / f).collect())
    }

    /// Unit normal from an explicit fiber covector at parameter `th`; the
    /// covector is projected onto the annihilator of `T_pN` if needed.
    pub fn unit_normal_from_covector(&self, th: &[f64], xi: &[f64]) -> Result<UnitNormal> {
        let m = self.m();
        let (p, _, basis) = self.annihilator(th, &vec![0.0; m])?;
        let basis: Vec<Vector> = basis.iter().map(|b| b.iter().map(|j| j.re()).collect()).collect();
        let tangents = self.sub.tangents(th);
        let mut xi = xi.to_vec();
        if self.sys.is_embedded() {
            xi = self.sys.project_tangent(&p, &xi);
        }
        let defect = tangents
            .iter()
            .map(|t| t.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let scale = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        if defect > 1e-12 * scale.max(1.0) {
            log::warn!("fiber covector does not annihilate T_pN (defect {defect:e}); projecting");
            let gram = DMatrix::from_fn(basis.len(), basis.len(), |i, j| {
                basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum::<f64>()
            });
            let rhs = DVector::from_iterator(
                basis.len(),
                basis.iter().map(|b| b.iter().zip(&xi).map(|(a, c)| a * c).sum::<f64>()),
            );
            let coef = gram
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::DegenerateTangent(th.to_vec()))?;
            xi = vec![0.0; p.len()];
            for (cb, b) in coef.iter().zip(&basis) {
                for i in 0..p.len() {
                    xi[i] += cb * b[i];
                }
            }
        }
        let v = self.normalise(&p, &xi)?;
        // recover the fiber angles of v for the chart coordinates
        let coords: Vec<f64> = basis
            .iter()
            .map(|b| b.iter().zip(&xi).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let mut u = th.to_vec();
        u.extend(angles_of(&coords));
        Ok(UnitNormal { u, base: p, vector: v })
    }

    /// `∂û/∂u_a` for every chart direction `a`.
    pub fn normal_derivatives(&self, u: &[f64]) -> Result<Vec<Vector>> {
        let k = u.len();
        let un = self.unit_normal(u)?;
        let p = &un.base;
        let v = &un.vector;
        (0..k)
            .map(|a| {
                let du: Vec<f64> = (0..k).map(|i| (i == a) as u8 as f64).collect();
                let (_, dp, xi) = self.covector(u, &du)?;
                let mut dxi: Vector = xi.iter().map(|j| j.coeff(1)).collect();
                if self.sys.is_embedded() {
                    let xr: Vector = xi.iter().map(|j| j.re()).collect();
                    let nx = xr.iter().map(|c| c * c).sum::<f64>().sqrt();
                    let vd: f64 = v.iter().zip(&dxi).map(|(a, b)| a * b).sum();
                    return Ok(dxi.iter().zip(v).map(|(dx, vi)| (dx - vi * vd) / nx).collect());
                }
                // v = w / F(p, w), ℒ_p(w) = ξ:
                // dw = g_w⁻¹ (dξ - ∂_p ℒ dp),  dF = (ξ(dw) + ½ ∂_p F²(w) dp) / F
                let xr: Vector = xi.iter().map(|j| j.re()).collect();
                let w = self.sys.metric().legendre_inverse(p, &xr)?;
                for i in 0..p.len() {
                    let xs: Vec<Jet> = (0..p.len()).map(|k| Jet::seeded(p[k], &[dp[k]])).collect();
                    let ys: Vec<Jet> = (0..p.len())
                        .map(|k| Jet::from_coeffs(&[w[k], 0.0, (k == i) as u8 as f64, 0.0], 2))
                        .collect();
                    dxi[i] -= 0.5 * self.sys.metric().f2(&xs, &ys).coeff(0b11);
                }
                let f = self.sys.metric().norm(p, w.as_slice())?;
                let g = self.sys.metric().fundamental_tensor(p, w.as_slice())?;
                let dw = g
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite)?
                    .solve(&DVector::from_column_slice(&dxi));
                let xs: Vec<Jet> = (0..p.len()).map(|k| Jet::seeded(p[k], &[dp[k]])).collect();
                let ws: Vec<Jet> = w.iter().map(|c| Jet::constant(*c)).collect();
                let dpf2 = self.sys.metric().f2(&xs, &ws).coeff(1);
                let df = (xr.iter().zip(dw.iter()).map(|(a, b)| a * b).sum::<f64>() + 0.5 * dpf2) / f;
                Ok((0..p.len()).map(|i| dw[i] / f - w[i] * df / (f * f)).collect())
            })
            .collect()
    }

    /// `g_n`-orthogonal projection onto `T_pN`, as coefficients in the basis `∂ι/∂θ_a`.
    pub fn tangent_coefficients(&self, p: &[f64], n: &[f64], w: &[f64], tangents: &[Vector]) -> Result<DVector<f64>> {
        let m = tangents.len();
        let gm = DMatrix::from_fn(m, m, |a, b| self.sys.inner(p, n, &tangents[a], &tangents[b]));
        let rhs = DVector::from_iterator(m, tangents.iter().map(|t| self.sys.inner(p, n, t, w)));
        gm.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::DegenerateTangent(p.to_vec()))
    }

    /// Shape operator `A_n` of the normal `n = scale · û(u)` as an m×m matrix
    /// acting on coefficients in the basis `∂ι/∂θ_a`, via
    /// `A x = (∂ñ/∂s + N(n) dι x)^⊤`.
    pub fn shape_operator(&self, u: &[f64], scale: f64) -> Result<DMatrix<f64>> {
        let m = self.m();
        let un = self.unit_normal(u)?;
        let n: Vector = un.vector.iter().map(|c| c * scale).collect();
        let dn = self.normal_derivatives(u)?;
        let tangents = self.sub.tangents(&u[..m]);
        let mut a = DMatrix::zeros(m, m);
        for col in 0..m {
            let conn = self.sys.connection(&un.base, &n, &tangents[col]);
            let w: Vector = (0..n.len()).map(|i| scale * dn[col][i] + conn[i]).collect();
            let c = self.tangent_coefficients(&un.base, &n, &w, &tangents)?;
            a.set_column(col, &c);
        }
        Ok(a)
    }

    /// `Π^n(x, y) = -(∇^ñ_X Y)^{⊥_n}` for parameter directions `x, y`.
    pub fn second_fundamental_form(&self, u: &[f64], scale: f64, x: &[f64], y: &[f64]) -> Result<Vector> {
        let m = self.m();
        let th = &u[..m];
        let un = self.unit_normal(u)?;
        let n: Vector = un.vector.iter().map(|c| c * scale).collect();
        let p = &un.base;
        let d = p.len();
        let tangents = self.sub.tangents(th);
        let xv: Vector = (0..d).map(|i| (0..m).map(|a| x[a] * tangents[a][i]).sum()).collect();
        let yv: Vector = (0..d).map(|i| (0..m).map(|a| y[a] * tangents[a][i]).sum()).collect();
        let mut cov = self.sub.second_derivative(th, x, y);
        if self.sys.is_embedded() {
            cov = self.sys.project_tangent(p, &cov);
        } else {
            let gam = self.sys.chern_christoffel(p, &n)?;
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        cov[i] += gam[(i * d + j) * d + k] * xv[j] * yv[k];
                    }
                }
            }
        }
        let c = self.tangent_coefficients(p, &n, &cov, &tangents)?;
        Ok((0..d)
            .map(|i| -(cov[i] - (0..m).map(|a| c[a] * tangents[a][i]).sum::<f64>()))
            .collect())
    }

    /// Shape operator from its definition `g_n(A x, y) = g_n(n, Π^n(x, y))`.
    pub fn shape_operator_from_second_form(&self, u: &[f64], scale: f64) -> Result<DMatrix<f64>> {
        let m = self.m();
        let un = self.unit_normal(u)?;
        let n: Vector = un.vector.iter().map(|c| c * scale).collect();
        let tangents = self.sub.tangents(&u[..m]);
        let e = |a: usize| -> Vector { (0..m).map(|k| (k == a) as u8 as f64).collect() };
        let mut b = DMatrix::zeros(m, m);
        for a in 0..m {
            for c in 0..m {
                let pi = self.second_fundamental_form(u, scale, &e(a), &e(c))?;
                b[(a, c)] = self.sys.inner(&un.base, &n, &n, &pi);
            }
        }
        let gm = DMatrix::from_fn(m, m, |a, c| self.sys.inner(&un.base, &n, &tangents[a], &tangents[c]));
        gm.lu().solve(&b).ok_or_else(|| Error::DegenerateTangent(u.to_vec()))
    }
}

/// Hyperspherical angles of a nonzero vector (inverse of `sphere_point`).
fn angles_of(c: &[f64]) -> Vec<f64> {
    let k = c.len();
    if k <= 1 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(k - 1);
    for i in 0..k - 1 {
        let tail = c[i + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if i == k - 2 {
            out.push(c[k - 1].atan2(c[k - 2]));
        } else {
            out.push(tail.atan2(c[i]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricModel;
    use std::f64::consts::PI;

    fn plane(metric: MetricModel, sub: Submanifold, side: f64) -> NormalBundle {
        NormalBundle::new(Arc::new(GeodesicSystem::new(metric)), Arc::new(sub), side).unwrap()
    }

    fn circle() -> NormalBundle {
        plane(
            MetricModel::euclidean(2).unwrap(),
            Submanifold::circle(&[0.0, 0.0], 1.0).unwrap(),
            1.0,
        )
    }

    fn randers_circle() -> NormalBundle {
        let m = MetricModel::randers(
            &["1".into(), "0".into(), "0".into(), "1".into()],
            &["0.3".into(), "0".into()],
        )
        .unwrap();
        plane(m, Submanifold::circle(&[0.0, 0.0], 1.0).unwrap(), 1.0)
    }

    fn equator() -> NormalBundle {
        let m = MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 - 1", 2).unwrap();
        plane(m, Submanifold::circle(&[0.0, 0.0, 0.0], 1.0).unwrap(), 1.0)
    }

    #[test]
    fn inward_circle_normal() {
        let b = circle();
        for k in 0..8 {
            let th = 0.7 * k as f64;
            let v = b.unit_normal(&[th]).unwrap().vector;
            assert!((v[0] + th.cos()).abs() < 1e-14 && (v[1] + th.sin()).abs() < 1e-14);
        }
        let out = b.flipped().unit_normal(&[0.3]).unwrap().vector;
        assert!((out[0] - 0.3f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn randers_normal_is_g_orthogonal_and_unit() {
        let b = randers_circle();
        let sys = b.system().clone();
        for k in 0..16 {
            let th = 0.4 * k as f64;
            let un = b.unit_normal(&[th]).unwrap();
            let t = b.submanifold().tangents(&[th]);
            let f = sys.metric().norm(&un.base, &un.vector).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
            assert!(sys.inner(&un.base, &un.vector, &un.vector, &t[0]).abs() < 1e-10);
        }
        let un = b.unit_normal(&[0.0]).unwrap();
        // at θ = 0 the Euclidean inward normal is (-1, 0) and is g-orthogonal by symmetry
        assert!((un.vector[0] + 1.0 / 0.7).abs() < 1e-12);
        let un = b.unit_normal(&[PI / 2.0]).unwrap();
        assert!(un.vector[0].abs() > 1e-3, "Randers normal must tilt: {:?}", un.vector);
    }

    #[test]
    fn covector_constructor_matches_chart() {
        let b = randers_circle();
        let th = 1.1;
        let un = b.unit_normal(&[th]).unwrap();
        let via = b.unit_normal_from_covector(&[th], &[-th.cos(), -th.sin()]).unwrap();
        for i in 0..2 {
            assert!((un.vector[i] - via.vector[i]).abs() < 1e-12);
        }
        // a covector with a tangential component is projected
        let via = b
            .unit_normal_from_covector(&[th], &[-th.cos() - 0.1 * th.sin(), -th.sin() + 0.1 * th.cos()])
            .unwrap();
        for i in 0..2 {
            assert!((un.vector[i] - via.vector[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_derivatives_match_differences() {
        let warped = plane(
            MetricModel::randers(
                &["1 + 0.1*x1^2".into(), "0".into(), "0".into(), "1".into()],
                &["0.2*cos(x1)".into(), "0.1".into()],
            )
            .unwrap(),
            Submanifold::ellipse(&[0.0, 0.0], 2.0, 1.0).unwrap(),
            1.0,
        );
        for b in [randers_circle(), equator(), warped] {
            let u = [0.8];
            let d = b.normal_derivatives(&u).unwrap();
            let h = 1e-5;
            let p = b.unit_normal(&[u[0] + h]).unwrap().vector;
            let q = b.unit_normal(&[u[0] - h]).unwrap().vector;
            for i in 0..p.len() {
                assert!((d[0][i] - (p[i] - q[i]) / (2.0 * h)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn circle_shape_operator_is_minus_identity_inward() {
        let b = circle();
        let a = b.shape_operator(&[0.3], 1.0).unwrap();
        assert!((a[(0, 0)] + 1.0).abs() < 1e-12);
        let a2 = b.shape_operator_from_second_form(&[0.3], 1.0).unwrap();
        assert!((a2[(0, 0)] + 1.0).abs() < 1e-12);
        let a3 = b.shape_operator(&[0.3], 3.0).unwrap();
        assert!((a3[(0, 0)] + 3.0).abs() < 1e-12);
        let pi = b.second_fundamental_form(&[0.3], 1.0, &[1.0], &[1.0]).unwrap();
        assert!(((pi[0] * pi[0] + pi[1] * pi[1]).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_is_totally_geodesic() {
        let m = MetricModel::minkowski("sqrt(v0^2 + v1^2) + 0.2*v1", 2).unwrap();
        let b = plane(m, Submanifold::line(&[0.0, 0.0], &[1.0, 0.5]).unwrap(), 1.0);
        assert!(b.shape_operator(&[0.4], 1.0).unwrap()[(0, 0)].abs() < 1e-12);
        let pi = b.second_fundamental_form(&[0.4], 1.0, &[1.0], &[1.0]).unwrap();
        assert!(pi.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn both_routes_agree_on_randers_ellipse_and_sphere() {
        let m = MetricModel::randers(
            &["1 + 0.1*x1^2".into(), "0".into(), "0".into(), "1".into()],
            &["0.2*cos(x1)".into(), "0.1".into()],
        )
        .unwrap();
        let b = plane(m, Submanifold::ellipse(&[0.0, 0.0], 2.0, 1.0).unwrap(), 1.0);
        for th in [0.0, 0.5, 2.0, 4.0] {
            let a1 = b.shape_operator(&[th], 1.0).unwrap();
            let a2 = b.shape_operator_from_second_form(&[th], 1.0).unwrap();
            assert!((a1[(0, 0)] - a2[(0, 0)]).abs() < 1e-8, "{a1} {a2}");
        }
        let e = equator();
        let a = e.shape_operator(&[0.3], 1.0).unwrap();
        assert!(a[(0, 0)].abs() < 1e-12);
        let a2 = e.shape_operator_from_second_form(&[0.3], 1.0).unwrap();
        assert!(a2[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn sphere_point_source_fiber_is_a_great_circle_of_directions() {
        let m = MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 - 1", 2).unwrap();
        let b = plane(m, Submanifold::point(&[0.0, 0.0, 1.0]), 1.0);
        assert_eq!(b.chart_dim(), 1);
        let v0 = b.unit_normal(&[0.0]).unwrap().vector;
        let v1 = b.unit_normal(&[PI / 2.0]).unwrap().vector;
        assert!(v0[2].abs() < 1e-14 && v1[2].abs() < 1e-14);
        assert!((v0[0] * v1[0] + v0[1] * v1[1]).abs() < 1e-14);
    }

    #[test]
    fn s3_point_source_has_two_fiber_angles() {
        let m = MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 + x3^2 - 1", 3).unwrap();
        let b = plane(m, Submanifold::point(&[0.0, 0.0, 0.0, 1.0]), 1.0);
        assert_eq!(b.chart_dim(), 2);
        let un = b.unit_normal(&[1.0, 0.5]).unwrap();
        let n: f64 = un.vector.iter().map(|c| c * c).sum();
        assert!((n - 1.0).abs() < 1e-14 && un.vector[3].abs() < 1e-14);
        let via = b.unit_normal_from_covector(&[], &un.vector).unwrap();
        assert!((via.u[0] - 1.0).abs() < 1e-12 && (via.u[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn warped_metric_agrees_with_weingarten_oracle() {
        // Riemannian g = diag(1 + x1², 1); unit normal field coded directly and
        // differentiated by differences, Levi-Civita symbols by differences of g.
        let gfun = |p: &[f64]| [[1.0 + p[1] * p[1], 0.0], [0.0, 1.0]];
        let m = MetricModel::riemannian(&["1 + x1^2".into(), "0".into(), "0".into(), "1".into()]).unwrap();
        let b = plane(m, Submanifold::circle(&[0.0, 0.0], 1.0).unwrap(), 1.0);
        let normal = |th: f64| -> [f64; 2] {
            let p = [th.cos(), th.sin()];
            let g = gfun(&p);
            // covector (-cos, -sin) raised with g⁻¹ and normalised
            let w = [-th.cos() / g[0][0], -th.sin() / g[1][1]];
            let f = (g[0][0] * w[0] * w[0] + g[1][1] * w[1] * w[1]).sqrt();
            [w[0] / f, w[1] / f]
        };
        let th = 0.9;
        let p = [th.cos(), th.sin()];
        let h = 1e-5;
        let (np, nm) = (normal(th + h), normal(th - h));
        let dn = [(np[0] - nm[0]) / (2.0 * h), (np[1] - nm[1]) / (2.0 * h)];
        let n = normal(th);
        let x = [-th.sin(), th.cos()];
        // Γ^i_jk from differences of g
        let dg = |k: usize| {
            let mut pp = p;
            let mut pm = p;
            pp[k] += h;
            pm[k] -= h;
            let (a, c) = (gfun(&pp), gfun(&pm));
            [
                [(a[0][0] - c[0][0]) / (2.0 * h), 0.0],
                [0.0, (a[1][1] - c[1][1]) / (2.0 * h)],
            ]
        };
        let g = gfun(&p);
        let ginv = [1.0 / g[0][0], 1.0 / g[1][1]];
        let mut cov = dn;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let gam = 0.5 * ginv[i] * (dg(k)[i][j] + dg(j)[i][k] - dg(i)[j][k]);
                    cov[i] += gam * x[j] * n[k];
                }
            }
        }
        let gxx = g[0][0] * x[0] * x[0] + g[1][1] * x[1] * x[1];
        let oracle = (g[0][0] * x[0] * cov[0] + g[1][1] * x[1] * cov[1]) / gxx;
        let a = b.shape_operator(&[th], 1.0).unwrap()[(0, 0)];
        assert!((a - oracle).abs() < 1e-6, "{a} vs {oracle}");
    }
}
