//! Geodesics, their linearisation, and parallel transport.
//!
//! Two backends share one interface. Chart metrics integrate the spray of
//! `E = F²/2` in coordinates. Hypersurfaces `{φ = 0} ⊂ R^(n+1)` integrate
//! `ẍ = -(ẋᵀHẋ / |∇φ|²) ∇φ` in ambient coordinates and are projected back onto
//! the level set after every accepted step.
//!
//! Along a geodesic the state `(x, y)` is augmented with variational fields
//! `(J, J̇)` (coordinate derivatives) and transported vectors `e`. For a chart
//! metric the covariant derivative of a field along `γ` with reference `γ̇` is
//! `D J = J̇ + N J`, with nonlinear connection `N = -½ ∂a/∂y` for the spray
//! acceleration `a`; on a hypersurface it is the tangential projection of `J̇`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metric::{MetricModel, ZERO_TOL};
use crate::ode::{integrate, DenseSolution, OdeOptions, OdeSystem};
use crate::scalar::{Jet, Scalar};

#[derive(Debug, Clone)]
pub struct GeodesicSystem {
    metric: MetricModel,
    opts: OdeOptions,
}

pub type Vector = Vec<f64>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl GeodesicSystem {
    pub fn new(metric: MetricModel) -> Self {
        GeodesicSystem {
            metric,
            opts: OdeOptions::default(),
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.opts.rtol = rtol;
        self.opts.atol = atol;
        self
    }

    pub fn options(&self) -> &OdeOptions {
        &self.opts
    }

    pub fn metric(&self) -> &MetricModel {
        &self.metric
    }

    pub fn coord_dim(&self) -> usize {
        self.metric.coord_dim()
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn is_flat(&self) -> bool {
        self.metric.is_flat()
    }

    pub fn is_embedded(&self) -> bool {
        self.metric.is_embedded()
    }

    // ---- level-set helpers -------------------------------------------------

    pub fn level_value(&self, x: &[f64]) -> f64 {
        self.metric.level().map_or(0.0, |l| l.eval(x))
    }

    pub fn level_gradient(&self, x: &[f64]) -> Vector {
        let level = match self.metric.level() {
            Some(l) => l,
            None => return vec![0.0; x.len()],
        };
        let d = x.len();
        (0..d)
            .map(|i| {
                let xs: Vec<Jet> = (0..d).map(|k| Jet::seeded(x[k], &[(k == i) as u8 as f64])).collect();
                level.eval(&xs).coeff(1)
            })
            .collect()
    }

    /// `H_φ(x)(u, w)`.
    pub fn level_hessian(&self, x: &[f64], u: &[f64], w: &[f64]) -> f64 {
        let level = match self.metric.level() {
            Some(l) => l,
            None => return 0.0,
        };
        let xs: Vec<Jet> = (0..x.len())
            .map(|k| Jet::from_coeffs(&[x[k], u[k], w[k], 0.0], 2))
            .collect();
        level.eval(&xs).coeff(0b11)
    }

    /// Orthogonal projection onto `T_x` (identity for chart metrics).
    pub fn project_tangent(&self, x: &[f64], w: &[f64]) -> Vector {
        let mut out = w.to_vec();
        if self.is_embedded() {
            let g = self.level_gradient(x);
            let c = dot(&g, w) / dot(&g, &g);
            axpy(-c, &g, &mut out);
        }
        out
    }

    /// Newton projection of a point onto the level set.
    pub fn project_point(&self, x: &mut [f64]) {
        if !self.is_embedded() {
            return;
        }
        for _ in 0..8 {
            let phi = self.level_value(x);
            if phi.abs() < 1e-15 {
                break;
            }
            let g = self.level_gradient(x);
            let c = phi / dot(&g, &g);
            axpy(-c, &g, x);
        }
    }

    /// Orthonormal (Euclidean) basis of `T_x`: the standard basis for chart
    /// metrics, Gram–Schmidt of the projected standard basis on a hypersurface.
    pub fn tangent_basis(&self, x: &[f64]) -> Vec<Vector> {
        let d = self.coord_dim();
        let std_basis = (0..d).map(|i| (0..d).map(|k| (k == i) as u8 as f64).collect::<Vector>());
        if !self.is_embedded() {
            return std_basis.collect();
        }
        let mut out: Vec<Vector> = Vec::new();
        for e in std_basis {
            let mut w = self.project_tangent(x, &e);
            for b in &out {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
            let nw = dot(&w, &w).sqrt();
            if nw > 1e-6 {
                w.iter_mut().for_each(|c| *c /= nw);
                out.push(w);
            }
            if out.len() == self.dim() {
                break;
            }
        }
        out
    }

    // ---- metric along a curve ---------------------------------------------

    /// `g_y(u, w)`.
    pub fn inner(&self, x: &[f64], y: &[f64], u: &[f64], w: &[f64]) -> f64 {
        if self.is_embedded() {
            return dot(u, w);
        }
        let g = self.metric.fundamental_tensor_unchecked(x, y);
        let u = DVector::from_column_slice(u);
        let w = DVector::from_column_slice(w);
        u.dot(&(g * w))
    }

    pub fn tensor(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        self.metric.fundamental_tensor_unchecked(x, y)
    }

    pub fn speed(&self, x: &[f64], y: &[f64]) -> f64 {
        self.metric.norm(x, y).unwrap_or(0.0)
    }

    // ---- spray ------------------------------------------------------------

    /// Geodesic acceleration `a(p, v)` with `γ̈ = a(γ, γ̇)`.
    pub fn spray_acceleration(&self, p: &[f64], v: &[f64]) -> Result<Vector> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n < ZERO_TOL {
            return Err(Error::ZeroVector(n));
        }
        Ok(self.accel_var(p, v, &vec![0.0; p.len()], &vec![0.0; p.len()]).0)
    }

    /// Acceleration and its derivative along the state variation `(dx, dy)`.
    pub fn accel_var(&self, x: &[f64], y: &[f64], dx: &[f64], dy: &[f64]) -> (Vector, Vector) {
        let d = x.len();
        if self.is_flat() {
            return (vec![0.0; d], vec![0.0; d]);
        }
        if let Some(level) = self.metric.level() {
            let mut grad = Vec::with_capacity(d);
            for i in 0..d {
                let xs: Vec<Jet> = (0..d)
                    .map(|k| Jet::seeded(x[k], &[dx[k], (k == i) as u8 as f64]))
                    .collect();
                let e = level.eval(&xs);
                grad.push(Jet::seeded(e.coeff(0b10), &[e.coeff(0b11)]));
            }
            let xs: Vec<Jet> = (0..d)
                .map(|k| Jet::from_coeffs(&[x[k], dx[k], y[k], dy[k], y[k], dy[k], 0.0, 0.0], 3))
                .collect();
            let e = level.eval(&xs);
            let q = Jet::seeded(e.coeff(0b110), &[e.coeff(0b111)]);
            let mut g2 = Jet::constant(0.0);
            for g in &grad {
                g2 += *g * *g;
            }
            let c = q / g2;
            let a: Vec<Jet> = grad.iter().map(|g| -(c * *g)).collect();
            return (
                a.iter().map(|j| j.re()).collect(),
                a.iter().map(|j| j.coeff(1)).collect(),
            );
        }
        let t = self.metric.spray_terms(x, y, dx, dy);
        let chol = match t.g.clone().cholesky() {
            Some(c) => c,
            None => return (vec![f64::NAN; d], vec![f64::NAN; d]),
        };
        let a = chol.solve(&t.r);
        let da = chol.solve(&(&t.dr - &t.dg * &a));
        (a.as_slice().to_vec(), da.as_slice().to_vec())
    }

    /// `N(y) w = -½ (∂a/∂y) w` (chart metrics; zero on hypersurfaces, where the
    /// covariant derivative is a projection instead).
    pub fn connection(&self, x: &[f64], y: &[f64], w: &[f64]) -> Vector {
        if self.is_flat() || self.is_embedded() {
            return vec![0.0; x.len()];
        }
        let (_, da) = self.accel_var(x, y, &vec![0.0; x.len()], w);
        da.iter().map(|c| -0.5 * c).collect()
    }

    /// Matrix `N^i_j(x, y)`.
    pub fn connection_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let mut n = DMatrix::zeros(d, d);
        for k in 0..d {
            let e: Vector = (0..d).map(|i| (i == k) as u8 as f64).collect();
            let col = self.connection(x, y, &e);
            for i in 0..d {
                n[(i, k)] = col[i];
            }
        }
        n
    }

    /// Christoffel symbols of the Chern connection with reference vector `y`,
    /// index `(i*d + j)*d + k` for `Γ^i_jk`:
    /// `Γ^i_jk = γ^i_jk - g^il (C_ljs N^s_k - C_jks N^s_l + C_kls N^s_j)`.
    pub fn chern_christoffel(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        if self.is_embedded() {
            return Err(Error::Unsupported(
                "Christoffel symbols of a hypersurface backend".into(),
            ));
        }
        let d = x.len();
        let g = self.metric.fundamental_tensor(x, y)?;
        let ginv = g.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
        let dg = self.metric.tensor_gradient(x, y);
        let c = self.metric.cartan_components(x, y)?;
        let nm = self.connection_matrix(x, y);
        let dgi = |i: usize, j: usize, k: usize| dg[(i * d + j) * d + k];
        let ci = |i: usize, j: usize, k: usize| c[(i * d + j) * d + k];
        let mut out = vec![0.0; d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        let gamma_l = 0.5 * (dgi(l, j, k) + dgi(l, k, j) - dgi(j, k, l));
                        let mut corr = 0.0;
                        for q in 0..d {
                            corr += ci(l, j, q) * nm[(q, k)] - ci(j, k, q) * nm[(q, l)] + ci(k, l, q) * nm[(q, j)];
                        }
                        s += ginv[(i, l)] * (gamma_l - corr);
                    }
                    out[(i * d + j) * d + k] = s;
                }
            }
        }
        Ok(out)
    }

    /// `D_γ̇ J` from the coordinate derivative `J̇`.
    pub fn covariant_from_coordinate(&self, x: &[f64], y: &[f64], j: &[f64], jd: &[f64]) -> Vector {
        if self.is_embedded() {
            return self.project_tangent(x, jd);
        }
        let nj = self.connection(x, y, j);
        jd.iter().zip(&nj).map(|(a, b)| a + b).collect()
    }

    /// Coordinate derivative `J̇` from `D_γ̇ J` (inverse of the above).
    pub fn coordinate_from_covariant(&self, x: &[f64], y: &[f64], j: &[f64], dj: &[f64]) -> Vector {
        if self.is_embedded() {
            let g = self.level_gradient(x);
            let mut out = self.project_tangent(x, dj);
            let c = self.level_hessian(x, y, j) / dot(&g, &g);
            axpy(-c, &g, &mut out);
            return out;
        }
        let nj = self.connection(x, y, j);
        dj.iter().zip(&nj).map(|(a, b)| a - b).collect()
    }

    fn transport_rate(&self, x: &[f64], y: &[f64], e: &[f64]) -> Vector {
        if self.is_embedded() {
            let g = self.level_gradient(x);
            let c = self.level_hessian(x, y, e) / dot(&g, &g);
            return g.iter().map(|gi| -c * gi).collect();
        }
        self.connection(x, y, e).iter().map(|c| -c).collect()
    }

    // ---- integration ------------------------------------------------------

    pub fn integrate_geodesic(self: &Arc<Self>, p: &[f64], v: &[f64], t_max: f64) -> Result<Flow> {
        self.flow(p, v, &[], &[], t_max)
    }

    /// `exp_p(t v)`.
    pub fn exponential(self: &Arc<Self>, p: &[f64], v: &[f64], t: f64) -> Result<Vector> {
        if t == 0.0 {
            return Ok(p.to_vec());
        }
        Ok(self.integrate_geodesic(p, v, t)?.position(t))
    }

    /// Integrate the geodesic with initial data `(p, v)` together with
    /// variational fields (initial `(J, J̇)` in coordinates) and transported
    /// vectors, on `[0, t_max]`.
    pub fn flow(
        self: &Arc<Self>,
        p: &[f64],
        v: &[f64],
        fields: &[(Vector, Vector)],
        frame: &[Vector],
        t_max: f64,
    ) -> Result<Flow> {
        let d = self.coord_dim();
        let nv = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if nv < ZERO_TOL {
            return Err(Error::ZeroVector(nv));
        }
        let mut flow = Flow {
            sys: Arc::clone(self),
            d,
            nf: fields.len(),
            ne: frame.len(),
            t_end: t_max,
            repr: Repr::Linear { y0: Vec::new() },
        };
        let mut y0 = Vec::with_capacity(d * (2 + 2 * fields.len() + frame.len()));
        y0.extend_from_slice(p);
        y0.extend_from_slice(v);
        for (j, jd) in fields {
            y0.extend_from_slice(j);
            y0.extend_from_slice(jd);
        }
        for e in frame {
            y0.extend_from_slice(e);
        }
        if self.is_flat() {
            flow.repr = Repr::Linear { y0 };
            return Ok(flow);
        }
        let ode = FlowOde {
            sys: self,
            d,
            nf: fields.len(),
            ne: frame.len(),
        };
        if self.is_embedded() {
            ode.project(&mut y0);
        }
        let sol = integrate(&ode, 0.0, &y0, t_max, &self.opts)?;
        if self.is_embedded() {
            let defect = self.level_value(&sol.y_end()[..d]).abs();
            if defect > 1e-8 {
                return Err(Error::ConstraintDrift { t: t_max, defect });
            }
        }
        flow.repr = Repr::Dense(sol);
        Ok(flow)
    }
}

struct FlowOde<'a> {
    sys: &'a GeodesicSystem,
    d: usize,
    nf: usize,
    ne: usize,
}

impl OdeSystem for FlowOde<'_> {
    fn dim(&self) -> usize {
        self.d * (2 + 2 * self.nf + self.ne)
    }

    fn rhs(&self, _t: f64, s: &[f64], ds: &mut [f64]) {
        let d = self.d;
        let (x, y) = (&s[..d], &s[d..2 * d]);
        ds[..d].copy_from_slice(y);
        let zeros = vec![0.0; d];
        let (a, _) = self.sys.accel_var(x, y, &zeros, &zeros);
        ds[d..2 * d].copy_from_slice(&a);
        for f in 0..self.nf {
            let o = 2 * d + 2 * d * f;
            let (j, jd) = (&s[o..o + d], &s[o + d..o + 2 * d]);
            let (_, da) = self.sys.accel_var(x, y, j, jd);
            ds[o..o + d].copy_from_slice(jd);
            ds[o + d..o + 2 * d].copy_from_slice(&da);
        }
        for k in 0..self.ne {
            let o = 2 * d + 2 * d * self.nf + d * k;
            let rate = self.sys.transport_rate(x, y, &s[o..o + d]);
            ds[o..o + d].copy_from_slice(&rate);
        }
    }

    fn project(&self, s: &mut [f64]) -> bool {
        if !self.sys.is_embedded() {
            return false;
        }
        let d = self.d;
        self.sys.project_point(&mut s[..d]);
        let x = s[..d].to_vec();
        let g = self.sys.level_gradient(&x);
        let g2 = dot(&g, &g);
        let tangent = |w: &mut [f64]| {
            let c = dot(&g, w) / g2;
            axpy(-c, &g, w);
        };
        tangent(&mut s[d..2 * d]);
        let y = s[d..2 * d].to_vec();
        for f in 0..self.nf {
            let o = 2 * d + 2 * d * f;
            tangent(&mut s[o..o + d]);
            let j = s[o..o + d].to_vec();
            let target = -self.sys.level_hessian(&x, &y, &j);
            let c = (dot(&g, &s[o + d..o + 2 * d]) - target) / g2;
            axpy(-c, &g, &mut s[o + d..o + 2 * d]);
        }
        for k in 0..self.ne {
            let o = 2 * d + 2 * d * self.nf + d * k;
            tangent(&mut s[o..o + d]);
        }
        true
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// Position-independent metric: straight lines, linear fields, constant frame.
    Linear {
        y0: Vec<f64>,
    },
    Dense(DenseSolution),
}

/// A geodesic together with variational fields and transported vectors.
#[derive(Debug, Clone)]
pub struct Flow {
    sys: Arc<GeodesicSystem>,
    d: usize,
    nf: usize,
    ne: usize,
    t_end: f64,
    repr: Repr,
}

/// Everything carried by a [`Flow`] at one time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub x: Vector,
    pub y: Vector,
    /// `(J, J̇)` with `J̇` the coordinate derivative.
    pub fields: Vec<(Vector, Vector)>,
    pub frame: Vec<Vector>,
}

/// A geodesic without attached fields.
pub type GeodesicPath = Flow;

impl Flow {
    pub fn system(&self) -> &Arc<GeodesicSystem> {
        &self.sys
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn n_fields(&self) -> usize {
        self.nf
    }
    pub fn n_frame(&self) -> usize {
        self.ne
    }
    pub fn steps(&self) -> usize {
        match &self.repr {
            Repr::Linear { .. } => 1,
            Repr::Dense(s) => s.steps(),
        }
    }

    fn raw(&self, t: f64) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(sol) => sol.eval(t),
            Repr::Linear { y0 } => {
                let d = self.d;
                let mut s = y0.clone();
                for i in 0..d {
                    s[i] += t * y0[d + i];
                }
                for f in 0..self.nf {
                    let o = 2 * d + 2 * d * f;
                    for i in 0..d {
                        s[o + i] += t * y0[o + d + i];
                    }
                }
                s
            }
        }
    }

    pub fn state(&self, t: f64) -> FlowState {
        let s = self.raw(t);
        let d = self.d;
        let fields = (0..self.nf)
            .map(|f| {
                let o = 2 * d + 2 * d * f;
                (s[o..o + d].to_vec(), s[o + d..o + 2 * d].to_vec())
            })
            .collect();
        let frame = (0..self.ne)
            .map(|k| {
                let o = 2 * d + 2 * d * self.nf + d * k;
                s[o..o + d].to_vec()
            })
            .collect();
        FlowState {
            t,
            x: s[..d].to_vec(),
            y: s[d..2 * d].to_vec(),
            fields,
            frame,
        }
    }

    pub fn position(&self, t: f64) -> Vector {
        self.raw(t)[..self.d].to_vec()
    }

    pub fn velocity(&self, t: f64) -> Vector {
        self.raw(t)[self.d..2 * self.d].to_vec()
    }

    pub fn initial(&self) -> (Vector, Vector) {
        let s = self.raw(0.0);
        (s[..self.d].to_vec(), s[self.d..2 * self.d].to_vec())
    }

    /// Field `f` at time `t` with its covariant derivative.
    pub fn field_covariant(&self, st: &FlowState, f: usize) -> (Vector, Vector) {
        let (j, jd) = &st.fields[f];
        (j.clone(), self.sys.covariant_from_coordinate(&st.x, &st.y, j, jd))
    }
}

/// `D_γ̇ X` for a field sampled at increasing times along `path`.
///
/// `Ẋ` is taken from a 5-point local polynomial fit (Fornberg weights), then
/// corrected by the connection term.
pub fn covariant_derivative_along(path: &Flow, samples: &[(f64, Vector)]) -> Result<Vec<(f64, Vector)>> {
    let m = samples.len();
    if m < 5 {
        return Err(Error::InsufficientSamples { need: 5, got: m });
    }
    let sys = path.system();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let lo = i.saturating_sub(2).min(m - 5);
        let nodes: Vec<f64> = samples[lo..lo + 5].iter().map(|s| s.0).collect();
        let w = fornberg_first_derivative(samples[i].0, &nodes);
        let d = samples[i].1.len();
        let mut xd = vec![0.0; d];
        for (k, wk) in w.iter().enumerate() {
            axpy(*wk, &samples[lo + k].1, &mut xd);
        }
        let st = path.state(samples[i].0);
        out.push((
            samples[i].0,
            sys.covariant_from_coordinate(&st.x, &st.y, &samples[i].1, &xd),
        ));
    }
    Ok(out)
}

/// Weights of the first derivative at `z` for the Lagrange interpolant on `x`.
pub(crate) fn fornberg_first_derivative(z: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> Arc<GeodesicSystem> {
        let m = MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 - 1", 2).unwrap();
        Arc::new(GeodesicSystem::new(m).with_tolerances(1e-11, 1e-11))
    }

    #[test]
    fn euclidean_lines_are_exact() {
        let sys = Arc::new(GeodesicSystem::new(MetricModel::euclidean(2).unwrap()));
        let p = sys.integrate_geodesic(&[0.5, -1.0], &[0.3, 0.4], 7.0).unwrap();
        let x = p.position(7.0);
        assert!((x[0] - 2.6).abs() < 1e-12 && (x[1] - 1.8).abs() < 1e-12);
        assert_eq!(
            sys.exponential(&[0.5, -1.0], &[0.3, 0.4], 0.0).unwrap(),
            vec![0.5, -1.0]
        );
    }

    #[test]
    fn sphere_spray_is_minus_position() {
        let sys = sphere();
        let p = [0.6, 0.0, 0.8];
        let v = [0.8, 0.0, -0.6];
        let a = sys.spray_acceleration(&p, &v).unwrap();
        for i in 0..3 {
            assert!((a[i] + p[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn great_circles_close_after_two_pi() {
        let sys = sphere();
        let p = [1.0, 0.0, 0.0];
        let v = [0.0, 0.6, 0.8];
        let path = sys.integrate_geodesic(&p, &v, 2.0 * std::f64::consts::PI).unwrap();
        let x = path.position(2.0 * std::f64::consts::PI);
        for i in 0..3 {
            assert!((x[i] - p[i]).abs() < 1e-7);
        }
        for k in 0..20 {
            let t = 0.3 * k as f64;
            let (x, y) = (path.position(t), path.velocity(t));
            assert!((sys.speed(&x, &y) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn warped_metric_matches_christoffel_symbols() {
        // g = diag(1, 1 + r²) in coordinates (r, θ):
        // Γ^r_θθ = -r, Γ^θ_rθ = r / (1 + r²)  ⇒  a = (r θ̇², -2 r ṙ θ̇ / (1 + r²)).
        let m = MetricModel::riemannian(&["1".into(), "0".into(), "0".into(), "1 + x0^2".into()]).unwrap();
        let sys = GeodesicSystem::new(m);
        let (p, v) = ([1.7, 0.4], [0.3, -0.9]);
        let a = sys.spray_acceleration(&p, &v).unwrap();
        assert!((a[0] - p[0] * v[1] * v[1]).abs() < 1e-12);
        assert!((a[1] + 2.0 * p[0] * v[0] * v[1] / (1.0 + p[0] * p[0])).abs() < 1e-12);
    }

    #[test]
    fn connection_times_velocity_is_minus_acceleration() {
        let m = MetricModel::randers(
            &["1 + 0.1*x1^2".into(), "0".into(), "0".into(), "1".into()],
            &["0.2*cos(x0)".into(), "0.1".into()],
        )
        .unwrap();
        let sys = GeodesicSystem::new(m);
        let (p, v) = ([0.3, 0.5], [0.8, -0.4]);
        let a = sys.spray_acceleration(&p, &v).unwrap();
        let nv = sys.connection(&p, &v, &v);
        for i in 0..2 {
            assert!((nv[i] + a[i]).abs() < 1e-12, "{nv:?} {a:?}");
        }
    }

    #[test]
    fn chern_symbols_contract_to_the_connection() {
        let m = MetricModel::randers(
            &["1 + 0.1*x1^2".into(), "0.05*x0".into(), "0.05*x0".into(), "1".into()],
            &["0.2*cos(x0)".into(), "0.1*x1".into()],
        )
        .unwrap();
        let sys = GeodesicSystem::new(m);
        let (p, v) = ([0.3, 0.5], [0.8, -0.4]);
        let gam = sys.chern_christoffel(&p, &v).unwrap();
        let nm = sys.connection_matrix(&p, &v);
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|k| gam[(i * 2 + j) * 2 + k] * v[k]).sum();
                assert!((s - nm[(i, j)]).abs() < 1e-10, "{s} vs {}", nm[(i, j)]);
                // torsion free
                assert!((gam[(i * 2 + j) * 2] - gam[(i * 2) * 2 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transported_frame_keeps_its_gram_matrix() {
        let m = MetricModel::randers(
            &["1 + 0.2*x1^2".into(), "0".into(), "0".into(), "1".into()],
            &["0.2*sin(x1)".into(), "0".into()],
        )
        .unwrap();
        let sys = Arc::new(GeodesicSystem::new(m));
        let (p, v) = (vec![0.1, 0.2], vec![0.6, 0.7]);
        let frame = vec![vec![1.0, 0.0], vec![0.3, 1.0]];
        let flow = sys.flow(&p, &v, &[], &frame, 3.0).unwrap();
        let gram = |t: f64| {
            let st = flow.state(t);
            DMatrix::from_fn(2, 2, |i, j| sys.inner(&st.x, &st.y, &st.frame[i], &st.frame[j]))
        };
        let g0 = gram(0.0);
        for k in 1..=10 {
            assert!((gram(0.3 * k as f64) - &g0).amax() < 1e-7);
        }
    }

    #[test]
    fn fornberg_weights_differentiate_quartics_exactly() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let w = fornberg_first_derivative(0.2, &x);
        let f = |t: f64| t.powi(4) - 2.0 * t;
        let d: f64 = w.iter().zip(&x).map(|(wi, xi)| wi * f(*xi)).sum();
        assert!((d - (4.0 * 0.008 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn covariant_derivative_of_velocity_vanishes() {
        let sys = sphere();
        let path = sys.integrate_geodesic(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 2.0).unwrap();
        let h = 1e-2;
        let samples: Vec<(f64, Vector)> = (0..50).map(|k| (k as f64 * h, path.velocity(k as f64 * h))).collect();
        let dx = covariant_derivative_along(&path, &samples).unwrap();
        for (_, v) in dx {
            assert!(v.iter().all(|c| c.abs() < 1e-7));
        }
        let tx: Vec<(f64, Vector)> = samples
            .iter()
            .map(|(t, v)| (*t, v.iter().map(|c| c * t).collect()))
            .collect();
        for ((t, dv), (_, v)) in covariant_derivative_along(&path, &tx).unwrap().iter().zip(&samples) {
            let _ = t;
            for i in 0..3 {
                assert!((dv[i] - v[i]).abs() < 1e-7);
            }
        }
        assert!(covariant_derivative_along(&path, &samples[..3]).is_err());
    }
}
