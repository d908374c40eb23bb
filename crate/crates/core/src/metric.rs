//! Finsler metrics and the tensors obtained from F² by fiber differentiation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::scalar::{Jet, Scalar};

/// Vectors shorter than this (in the Euclidean coordinate norm) are treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum MetricKind {
    Euclidean,
    /// `g` is row-major n×n in the position variables `x0..`.
    Riemannian {
        g: Vec<Expr>,
    },
    /// `F = sqrt(a(v,v)) + b(v)`.
    Randers {
        a: Vec<Expr>,
        b: Vec<Expr>,
    },
    /// `F(x, v)` given directly; variables `x0.. v0..`.
    Minkowski {
        norm: Expr,
    },
    /// Level set `{phi = 0}` in R^(n+1) with the induced Euclidean metric.
    EmbeddedHypersurface {
        level: Expr,
    },
}

#[derive(Debug, Clone)]
pub struct MetricModel {
    kind: MetricKind,
    /// Coordinate dimension: n for chart metrics, n+1 for hypersurfaces.
    coords: usize,
    flat: bool,
    reversed: bool,
}

pub fn position_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

pub fn phase_names(d: usize) -> Vec<String> {
    (0..d)
        .map(|i| format!("x{i}"))
        .chain((0..d).map(|i| format!("v{i}")))
        .collect()
}

fn parse_all(src: &[String], vars: &[String]) -> Result<Vec<Expr>> {
    let names: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    src.iter().map(|s| Expr::parse(s, &names)).collect()
}

impl MetricModel {
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::build(MetricKind::Euclidean, n)
    }

    /// `g` row-major n×n, expressions in `x0..x{n-1}`.
    pub fn riemannian(g: &[String]) -> Result<Self> {
        let n = (g.len() as f64).sqrt().round() as usize;
        if n * n != g.len() {
            return Err(Error::InvalidMetric("g must be square".into()));
        }
        let g = parse_all(g, &position_names(n))?;
        Self::build(MetricKind::Riemannian { g }, n)
    }

    pub fn randers(a: &[String], b: &[String]) -> Result<Self> {
        let n = b.len();
        if a.len() != n * n {
            return Err(Error::InvalidMetric("a must be n×n with n = len(b)".into()));
        }
        let vars = position_names(n);
        let a = parse_all(a, &vars)?;
        let b = parse_all(b, &vars)?;
        Self::build(MetricKind::Randers { a, b }, n)
    }

    /// `norm` in variables `x0..x{n-1}, v0..v{n-1}`.
    pub fn minkowski(norm: &str, n: usize) -> Result<Self> {
        let vars = phase_names(n);
        let names: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        let norm = Expr::parse(norm, &names)?;
        Self::build(MetricKind::Minkowski { norm }, n)
    }

    /// Level function in `x0..x{n}`; the manifold has dimension n.
    pub fn embedded_hypersurface(level: &str, n: usize) -> Result<Self> {
        let vars = position_names(n + 1);
        let names: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        let level = Expr::parse(level, &names)?;
        Self::build(MetricKind::EmbeddedHypersurface { level }, n + 1)
    }

    fn build(kind: MetricKind, coords: usize) -> Result<Self> {
        if coords < 2 {
            return Err(Error::InvalidMetric("dimension must be at least 2".into()));
        }
        let flat = match &kind {
            MetricKind::Euclidean => true,
            MetricKind::Riemannian { g } => g.iter().all(|e| e.as_constant().is_some()),
            MetricKind::Randers { a, b } => a.iter().chain(b).all(|e| e.as_constant().is_some()),
            MetricKind::Minkowski { norm } => (0..coords).all(|i| !norm.uses(i)),
            MetricKind::EmbeddedHypersurface { .. } => false,
        };
        let m = MetricModel {
            kind,
            coords,
            flat,
            reversed: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// The reverse metric `F̄(v) = F(-v)`.
    pub fn reversed(&self) -> Self {
        let mut m = self.clone();
        m.reversed = !m.reversed;
        m
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    /// Number of coordinates of a point.
    pub fn coord_dim(&self) -> usize {
        self.coords
    }

    /// Manifold dimension.
    pub fn dim(&self) -> usize {
        match self.kind {
            MetricKind::EmbeddedHypersurface { .. } => self.coords - 1,
            _ => self.coords,
        }
    }

    /// Position independent (geodesics are straight lines).
    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn is_embedded(&self) -> bool {
        matches!(self.kind, MetricKind::EmbeddedHypersurface { .. })
    }

    pub fn is_riemannian(&self) -> bool {
        match &self.kind {
            MetricKind::Euclidean | MetricKind::Riemannian { .. } | MetricKind::EmbeddedHypersurface { .. } => true,
            MetricKind::Randers { b, .. } => b.iter().all(|e| e.as_constant() == Some(0.0)),
            MetricKind::Minkowski { .. } => false,
        }
    }

    pub fn level(&self) -> Option<&Expr> {
        match &self.kind {
            MetricKind::EmbeddedHypersurface { level } => Some(level),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.coords;
        // probe grid on [-1.5, 1.5]^d (3 points per axis), plus the origin
        let mut probes = vec![vec![0.0; d]];
        if !self.flat {
            let count = 3usize.pow(d as u32);
            for k in 0..count {
                let mut r = k;
                let p: Vec<f64> = (0..d)
                    .map(|_| {
                        let c = (r % 3) as f64 - 1.0;
                        r /= 3;
                        1.5 * c
                    })
                    .collect();
                probes.push(p);
            }
        }
        match &self.kind {
            MetricKind::Randers { a, b } => {
                for p in &probes {
                    let am = eval_matrix(a, p, d);
                    let bv = DVector::from_iterator(d, b.iter().map(|e| e.eval(p)));
                    let chol = am
                        .clone()
                        .cholesky()
                        .ok_or_else(|| Error::InvalidMetric(format!("a not positive definite at {p:?}")))?;
                    let bn = bv.dot(&chol.solve(&bv)).sqrt();
                    if !(bn < 1.0) {
                        return Err(Error::InvalidMetric(format!(
                            "Randers drift has |b|_a = {bn} >= 1 at {p:?}"
                        )));
                    }
                }
            }
            MetricKind::Riemannian { g } => {
                for p in &probes {
                    let gm = eval_matrix(g, p, d);
                    if (&gm - gm.transpose()).amax() > 1e-12 * gm.amax() {
                        return Err(Error::InvalidMetric("g is not symmetric".into()));
                    }
                    if gm.cholesky().is_none() {
                        return Err(Error::InvalidMetric(format!("g not positive definite at {p:?}")));
                    }
                }
            }
            MetricKind::Minkowski { .. } => {
                for p in &probes {
                    for k in 0..16 {
                        let a = k as f64 * std::f64::consts::PI / 8.0 + 0.1;
                        let mut v = vec![0.0; d];
                        v[0] = a.cos();
                        v[1] = a.sin();
                        if d > 2 {
                            v[2] = 0.3 * (2.0 * a).sin();
                        }
                        let f = self.norm(p, &v)?;
                        if !(f > 0.0) {
                            return Err(Error::InvalidMetric(format!("F <= 0 at {p:?}, {v:?}")));
                        }
                        self.fundamental_tensor(p, &v)?;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// F² generic over the scalar type.
    pub fn f2<S: Scalar>(&self, x: &[S], v: &[S]) -> S {
        let d = self.coords;
        let neg: Vec<S>;
        let v = if self.reversed {
            neg = v.iter().map(|&c| -c).collect();
            &neg[..]
        } else {
            v
        };
        match &self.kind {
            MetricKind::Euclidean | MetricKind::EmbeddedHypersurface { .. } => {
                let mut s = S::zero();
                for &c in v {
                    s = s + c * c;
                }
                s
            }
            MetricKind::Riemannian { g } => quad(g, x, v, d),
            MetricKind::Randers { a, b } => {
                let alpha = quad(a, x, v, d).sqrt();
                let mut beta = S::zero();
                for i in 0..d {
                    beta = beta + b[i].eval(x) * v[i];
                }
                let f = alpha + beta;
                f * f
            }
            MetricKind::Minkowski { norm } => {
                let mut vars = Vec::with_capacity(2 * d);
                vars.extend_from_slice(x);
                vars.extend_from_slice(v);
                let f = norm.eval(&vars);
                f * f
            }
        }
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n >= ZERO_TOL) {
            return Err(Error::ZeroVector(n));
        }
        Ok(())
    }

    /// F(p, v).
    pub fn norm(&self, p: &[f64], v: &[f64]) -> Result<f64> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n == 0.0 {
            return Ok(0.0);
        }
        Ok(self.f2(p, v).max(0.0).sqrt())
    }

    /// `g_v`, the fundamental tensor (coordinate matrix; identity for hypersurfaces).
    pub fn fundamental_tensor(&self, p: &[f64], v: &[f64]) -> Result<DMatrix<f64>> {
        self.check_vector(v)?;
        let g = self.fundamental_tensor_unchecked(p, v);
        if g.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(g)
    }

    pub(crate) fn fundamental_tensor_unchecked(&self, p: &[f64], v: &[f64]) -> DMatrix<f64> {
        let d = self.coords;
        match &self.kind {
            MetricKind::Euclidean | MetricKind::EmbeddedHypersurface { .. } => return DMatrix::identity(d, d),
            MetricKind::Riemannian { g } => {
                return eval_matrix(g, p, d);
            }
            _ => {}
        }
        let xs: Vec<Jet> = p.iter().map(|&c| Jet::constant(c)).collect();
        let mut g = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let vs: Vec<Jet> = (0..d)
                    .map(|k| Jet::seeded(v[k], &[(k == i) as u8 as f64, (k == j) as u8 as f64]))
                    .collect();
                let gij = 0.5 * self.f2(&xs, &vs).coeff(0b11);
                g[(i, j)] = gij;
                g[(j, i)] = gij;
            }
        }
        g
    }

    /// `C_v(x, y, z) = ¼ D³F²(v)[x, y, z]`.
    pub fn cartan_tensor(&self, p: &[f64], v: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        self.check_vector(v)?;
        let xs: Vec<Jet> = p.iter().map(|&c| Jet::constant(c)).collect();
        let vs: Vec<Jet> = (0..self.coords)
            .map(|k| Jet::seeded(v[k], &[x[k], y[k], z[k]]))
            .collect();
        Ok(0.25 * self.f2(&xs, &vs).coeff(0b111))
    }

    /// All components `C_ijk` (row-major).
    pub fn cartan_components(&self, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let d = self.coords;
        let mut c = vec![0.0; d * d * d];
        let e = |i: usize| -> Vec<f64> { (0..d).map(|k| (k == i) as u8 as f64).collect() };
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let val = self.cartan_tensor(p, v, &e(i), &e(j), &e(k))?;
                    for (a, b, cc) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        c[(a * d + b) * d + cc] = val;
                    }
                }
            }
        }
        Ok(c)
    }

    /// `ℒ(v) = g_v(v, ·)`, computed as the fiber gradient of F²/2.
    pub fn legendre(&self, p: &[f64], v: &[f64]) -> Result<DVector<f64>> {
        self.check_vector(v)?;
        Ok(self.legendre_unchecked(p, v))
    }

    fn legendre_unchecked(&self, p: &[f64], v: &[f64]) -> DVector<f64> {
        let d = self.coords;
        let xs: Vec<Jet> = p.iter().map(|&c| Jet::constant(c)).collect();
        DVector::from_iterator(
            d,
            (0..d).map(|i| {
                let vs: Vec<Jet> = (0..d).map(|k| Jet::seeded(v[k], &[(k == i) as u8 as f64])).collect();
                0.5 * self.f2(&xs, &vs).coeff(1)
            }),
        )
    }

    /// Solve `g_u(u, ·) = ξ` by damped Newton (the Jacobian of `u ↦ g_u u` is `g_u`).
    pub fn legendre_inverse(&self, p: &[f64], xi: &[f64]) -> Result<DVector<f64>> {
        self.check_vector(xi)?;
        let d = self.coords;
        let xi = DVector::from_column_slice(xi);
        let xnorm = xi.norm();
        // start from the inverse of the tensor at the covector direction itself
        let mut u = match self.fundamental_tensor(p, xi.as_slice()) {
            Ok(g) => g.cholesky().map(|c| c.solve(&xi)).unwrap_or_else(|| xi.clone()),
            Err(_) => xi.clone(),
        };
        let residual = |u: &DVector<f64>| (self.legendre_unchecked(p, u.as_slice()) - &xi).norm();
        let mut r = residual(&u);
        let max_iter = 100;
        for _ in 0..max_iter {
            if r <= 1e-13 * xnorm {
                return Ok(u);
            }
            let g = self.fundamental_tensor_unchecked(p, u.as_slice());
            let rhs = &xi - self.legendre_unchecked(p, u.as_slice());
            let step = match g.lu().solve(&rhs) {
                Some(s) => s,
                None => break,
            };
            let mut lambda = 1.0;
            loop {
                let cand = &u + lambda * &step;
                let rc = if cand.norm() > ZERO_TOL {
                    residual(&cand)
                } else {
                    f64::INFINITY
                };
                if rc < r || lambda < 1e-6 {
                    u = cand;
                    r = rc;
                    break;
                }
                lambda *= 0.5;
            }
            if u.len() != d || !r.is_finite() {
                break;
            }
        }
        if r <= 1e-10 * xnorm {
            return Ok(u);
        }
        Err(Error::NewtonDivergence {
            iterations: max_iter,
            residual: r,
        })
    }

    /// `E = F²/2` and the spray data `(G, r)` with `G a = r`, plus their
    /// derivatives along the state variation `(dx, dy)`.
    ///
    /// `G_ij = ∂²E/∂y^i∂y^j`, `r_i = ∂E/∂x^i − (∂²E/∂y^i∂x^j) y^j`.
    pub(crate) fn spray_terms(&self, x: &[f64], y: &[f64], dx: &[f64], dy: &[f64]) -> SprayTerms {
        let d = self.coords;
        let mut t = SprayTerms {
            g: DMatrix::zeros(d, d),
            dg: DMatrix::zeros(d, d),
            r: DVector::zeros(d),
            dr: DVector::zeros(d),
        };
        let delta = |k: usize, i: usize| (k == i) as u8 as f64;
        for i in 0..d {
            for j in i..d {
                let xs: Vec<Jet> = (0..d).map(|k| Jet::seeded(x[k], &[dx[k], 0.0, 0.0])).collect();
                let vs: Vec<Jet> = (0..d)
                    .map(|k| Jet::seeded(y[k], &[dy[k], delta(k, i), delta(k, j)]))
                    .collect();
                let e = self.f2(&xs, &vs);
                let (gv, dgv) = (0.5 * e.coeff(0b110), 0.5 * e.coeff(0b111));
                t.g[(i, j)] = gv;
                t.g[(j, i)] = gv;
                t.dg[(i, j)] = dgv;
                t.dg[(j, i)] = dgv;
            }
        }
        if self.flat {
            return t;
        }
        for i in 0..d {
            let xs: Vec<Jet> = (0..d).map(|k| Jet::seeded(x[k], &[dx[k], delta(k, i)])).collect();
            let vs: Vec<Jet> = (0..d).map(|k| Jet::seeded(y[k], &[dy[k], 0.0])).collect();
            let e = self.f2(&xs, &vs);
            t.r[i] += 0.5 * e.coeff(0b10);
            t.dr[i] += 0.5 * e.coeff(0b11);

            let xs: Vec<Jet> = (0..d)
                .map(|k| Jet::from_coeffs(&[x[k], dx[k], y[k], dy[k]], 3))
                .collect();
            let vs: Vec<Jet> = (0..d).map(|k| Jet::seeded(y[k], &[dy[k], 0.0, delta(k, i)])).collect();
            let e = self.f2(&xs, &vs);
            t.r[i] -= 0.5 * e.coeff(0b110);
            t.dr[i] -= 0.5 * e.coeff(0b111);
        }
        t
    }

    /// Spatial derivatives `∂_k g_ij` at `(p, v)`, index `(i*d + j)*d + k`.
    pub fn tensor_gradient(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.coords;
        let mut out = vec![0.0; d * d * d];
        if self.flat {
            return out;
        }
        let delta = |k: usize, i: usize| (k == i) as u8 as f64;
        for kk in 0..d {
            for i in 0..d {
                for j in i..d {
                    let xs: Vec<Jet> = (0..d).map(|k| Jet::seeded(p[k], &[0.0, 0.0, delta(k, kk)])).collect();
                    let vs: Vec<Jet> = (0..d)
                        .map(|k| Jet::seeded(v[k], &[delta(k, i), delta(k, j), 0.0]))
                        .collect();
                    let val = 0.5 * self.f2(&xs, &vs).coeff(0b111);
                    out[(i * d + j) * d + kk] = val;
                    out[(j * d + i) * d + kk] = val;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SprayTerms {
    pub g: DMatrix<f64>,
    pub dg: DMatrix<f64>,
    pub r: DVector<f64>,
    pub dr: DVector<f64>,
}

fn eval_matrix(m: &[Expr], p: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| m[i * d + j].eval(p))
}

fn quad<S: Scalar>(m: &[Expr], x: &[S], v: &[S], d: usize) -> S {
    let mut s = S::zero();
    for i in 0..d {
        for j in 0..d {
            s = s + m[i * d + j].eval(x) * v[i] * v[j];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    pub(crate) fn flat_randers(bx: f64) -> MetricModel {
        MetricModel::randers(&s(&["1", "0", "0", "1"]), &[format!("{bx}"), "0".into()]).unwrap()
    }

    /// Closed-form Randers fundamental tensor; used as an oracle.
    fn randers_g_closed(a: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let alpha = y.dot(&(a * y)).sqrt();
        let f = alpha + b.dot(y);
        let ay = a * y / alpha;
        let d = y.len();
        DMatrix::from_fn(d, d, |i, j| {
            (f / alpha) * (a[(i, j)] - ay[i] * ay[j]) + (b[i] + ay[i]) * (b[j] + ay[j])
        })
    }

    #[test]
    fn euclidean_tensor_is_identity() {
        let m = MetricModel::euclidean(2).unwrap();
        let g = m.fundamental_tensor(&[0.3, 0.1], &[1.0, 2.0]).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
        let l = m.legendre(&[0.0, 0.0], &[1.5, -2.0]).unwrap();
        assert_relative_eq!(l[0], 1.5, epsilon = 1e-14);
        assert_relative_eq!(l[1], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn randers_euler_homogeneity_value() {
        let m = flat_randers(0.3);
        let g = m.fundamental_tensor(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.69, epsilon = 1e-13);
    }

    #[test]
    fn degenerate_randers_matches_riemannian() {
        let a = s(&["1 + x0^2", "0.2", "0.2", "2"]);
        let r = MetricModel::randers(&a, &s(&["0", "0"])).unwrap();
        let g = MetricModel::riemannian(&a).unwrap();
        let p = [0.4, -0.2];
        let v = [0.3, 0.8];
        let d = r.fundamental_tensor(&p, &v).unwrap() - g.fundamental_tensor(&p, &v).unwrap();
        assert!(d.amax() < 1e-12);
    }

    #[test]
    fn randers_tensor_matches_closed_form() {
        let m = MetricModel::randers(&s(&["1", "0.1", "0.1", "1.5"]), &s(&["0.2", "-0.3"])).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.5]);
        let b = DVector::from_vec(vec![0.2, -0.3]);
        for k in 0..12 {
            let t = 0.5 * k as f64;
            let y = DVector::from_vec(vec![t.cos(), t.sin()]);
            let g = m.fundamental_tensor(&[0.0, 0.0], y.as_slice()).unwrap();
            let want = randers_g_closed(&a, &b, &y);
            assert!((g - want).amax() < 1e-12);
        }
    }

    #[test]
    fn randers_cartan_matches_difference_of_closed_form() {
        // C_ijk = ½ ∂g_ij/∂y^k, the closed-form g differentiated by central differences
        let m = flat_randers(0.3);
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![0.3, 0.0]);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let e1 = DVector::from_vec(vec![0.0, 1.0]);
        let h = 1e-4;
        let gp = randers_g_closed(&a, &b, &(&v + h * &e1));
        let gm = randers_g_closed(&a, &b, &(&v - h * &e1));
        let oracle = 0.5 * (gp[(1, 1)] - gm[(1, 1)]) / (2.0 * h);
        let c = m
            .cartan_tensor(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0])
            .unwrap();
        assert!((c - oracle).abs() < 1e-6, "{c} vs {oracle}");
        // both vanish here by reflection symmetry v_y -> -v_y; use a generic direction too
        let v = DVector::from_vec(vec![0.6, 0.8]);
        let gp = randers_g_closed(&a, &b, &(&v + h * &e1));
        let gm = randers_g_closed(&a, &b, &(&v - h * &e1));
        let oracle = 0.5 * (gp[(0, 1)] - gm[(0, 1)]) / (2.0 * h);
        let c = m
            .cartan_tensor(&[0.0, 0.0], v.as_slice(), &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0])
            .unwrap();
        assert!(oracle.abs() > 1e-3);
        assert!((c - oracle).abs() < 1e-6, "{c} vs {oracle}");
    }

    #[test]
    fn riemannian_cartan_vanishes() {
        let m = MetricModel::riemannian(&s(&["1 + x1^2", "0", "0", "1"])).unwrap();
        let c = m
            .cartan_tensor(&[0.2, 0.5], &[1.0, 0.3], &[0.1, 1.0], &[1.0, 1.0], &[0.0, 2.0])
            .unwrap();
        assert!(c.abs() < 1e-12);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let m = flat_randers(0.3);
        assert!(matches!(
            m.fundamental_tensor(&[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::ZeroVector(_))
        ));
        assert!(m.legendre_inverse(&[0.0, 0.0], &[0.0, 1e-14]).is_err());
    }

    #[test]
    fn randers_drift_too_strong_is_rejected() {
        let e = MetricModel::randers(&s(&["1", "0", "0", "1"]), &s(&["0.8*x0", "0"]));
        assert!(matches!(e, Err(Error::InvalidMetric(_))));
    }

    #[test]
    fn legendre_inverse_of_randers_covector() {
        let m = flat_randers(0.3);
        let u = m.legendre_inverse(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let back = m.legendre(&[0.0, 0.0], u.as_slice()).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-12 && back[1].abs() < 1e-12);
        // ξ(u) = F(u)² and the dual norm of ξ is F(u)
        let f = m.norm(&[0.0, 0.0], u.as_slice()).unwrap();
        assert_relative_eq!(u[0], f * f, epsilon = 1e-12);
        // dual norm of ξ = (1, 0) for F = |v| + 0.3 v_x is 1/(1+0.3)
        assert_relative_eq!(f, 1.0 / 1.3, epsilon = 1e-12);
    }

    #[test]
    fn reversed_metric_flips_the_drift() {
        let m = flat_randers(0.3);
        let r = m.reversed();
        assert_relative_eq!(r.norm(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.7, epsilon = 1e-14);
        assert_relative_eq!(m.norm(&[0.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.7, epsilon = 1e-14);
    }

    #[test]
    fn spray_terms_vanish_for_flat_metrics() {
        let m = flat_randers(0.3);
        let t = m.spray_terms(&[0.1, 0.2], &[1.0, 0.5], &[0.0; 2], &[0.0; 2]);
        assert_eq!(t.r, DVector::zeros(2));
        assert!((t.g - m.fundamental_tensor(&[0.0; 2], &[1.0, 0.5]).unwrap()).amax() < 1e-13);
    }
}
