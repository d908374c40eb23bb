//! N-Jacobi fields and the differential of the normal exponential map.
//!
//! Along the unit-speed normal geodesic `γ(t) = 𝓔(t û)` a [`JacobiFrame`]
//! integrates `n` N-Jacobi fields together with a parallel frame. The first
//! `m` fields start tangentially, `(J, DJ)(0) = (∂ι/∂θ_a, A_û ∂ι/∂θ_a)`, the
//! remaining `n - m` start at zero with `DJ(0)` running through a
//! `g_û`-orthonormal basis of the `g_û`-orthogonal complement of `T_pN`,
//! beginning with `û` itself (the radial field `t γ̇`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::{Flow, GeodesicSystem, Vector};
use crate::submanifold::{NormalBundle, UnitNormal};

/// Rank tolerance: `σ_i < RANK_TOL · σ_1` counts as zero.
pub const RANK_TOL: f64 = 1e-7;

/// Initial data of an N-Jacobi field; `dj0` is the covariant derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiPair {
    pub j0: Vector,
    pub dj0: Vector,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `g_v`-orthonormal basis of `T_pM` extending `T_pN`, with `v` in position `m`.
fn adapted_frame(sys: &GeodesicSystem, p: &[f64], v: &[f64], tangents: &[Vector]) -> Result<Vec<Vector>> {
    let n = sys.dim();
    let mut out: Vec<Vector> = Vec::with_capacity(n);
    let candidates = tangents
        .iter()
        .cloned()
        .chain(std::iter::once(v.to_vec()))
        .chain(sys.tangent_basis(p));
    for (k, c) in candidates.enumerate() {
        let mut w = c;
        for _ in 0..2 {
            for b in &out {
                let s = sys.inner(p, v, b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= s * bi;
                }
            }
        }
        let nw = sys.inner(p, v, &w, &w).max(0.0).sqrt();
        if k <= tangents.len() {
            if nw < 1e-10 {
                return Err(Error::DegenerateTangent(p.to_vec()));
            }
        } else if nw < 0.3 {
            continue;
        }
        out.push(w.iter().map(|x| x / nw).collect());
        if out.len() == n {
            break;
        }
    }
    Ok(out)
}

/// The spanning set of N-Jacobi initial data along `γ_û`, and the adapted
/// `g_û`-orthonormal frame used as the parallel frame.
pub fn n_jacobi_basis(bundle: &NormalBundle, normal: &UnitNormal) -> Result<(Vec<JacobiPair>, Vec<Vector>)> {
    let sys = bundle.system();
    let m = bundle.m();
    let th = &normal.u[..m];
    let (p, v) = (&normal.base, &normal.vector);
    let tangents = bundle.submanifold().tangents(th);
    let frame = adapted_frame(sys, p, v, &tangents)?;
    let a = if m > 0 {
        bundle.shape_operator(&normal.u, 1.0)?
    } else {
        DMatrix::zeros(0, 0)
    };
    let d = p.len();
    let mut pairs = Vec::with_capacity(sys.dim());
    for col in 0..m {
        let ae: Vector = (0..d)
            .map(|i| (0..m).map(|r| a[(r, col)] * tangents[r][i]).sum())
            .collect();
        pairs.push(JacobiPair {
            j0: tangents[col].clone(),
            dj0: ae,
        });
    }
    for w in &frame[m..] {
        pairs.push(JacobiPair {
            j0: vec![0.0; d],
            dj0: w.clone(),
        });
    }
    Ok((pairs, frame))
}

/// A single N-Jacobi field: a linear combination of the fields carried by a flow.
#[derive(Debug, Clone)]
pub struct NJacobiField {
    flow: Arc<Flow>,
    coeffs: Vec<f64>,
}

impl NJacobiField {
    pub fn flow(&self) -> &Arc<Flow> {
        &self.flow
    }

    /// `(J(t), D_γ̇ J(t))` in coordinates.
    pub fn at(&self, t: f64) -> (Vector, Vector) {
        let st = self.flow.state(t);
        let d = st.x.len();
        let mut j = vec![0.0; d];
        let mut dj = vec![0.0; d];
        for (f, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let (a, b) = self.flow.field_covariant(&st, f);
            for i in 0..d {
                j[i] += c * a[i];
                dj[i] += c * b[i];
            }
        }
        (j, dj)
    }

    /// Initial data `(J(0), DJ(0))`.
    pub fn initial(&self) -> JacobiPair {
        let (j0, dj0) = self.at(0.0);
        JacobiPair { j0, dj0 }
    }
}

/// Integrate one N-Jacobi field along `γ_v` on `[0, t_max]`.
pub fn integrate_njacobi(
    sys: &Arc<GeodesicSystem>,
    p: &[f64],
    v: &[f64],
    pair: &JacobiPair,
    t_max: f64,
) -> Result<NJacobiField> {
    let jd = sys.coordinate_from_covariant(p, v, &pair.j0, &pair.dj0);
    let flow = sys.flow(p, v, &[(pair.j0.clone(), jd)], &[], t_max)?;
    Ok(NJacobiField {
        flow: Arc::new(flow),
        coeffs: vec![1.0],
    })
}

/// `g_γ̇(J, DK) - g_γ̇(DJ, K)` at time `t`.
pub fn adjoint_defect(j: &NJacobiField, k: &NJacobiField, t: f64) -> Result<f64> {
    if !Arc::ptr_eq(&j.flow, &k.flow) {
        return Err(Error::PathMismatch);
    }
    let sys = j.flow.system();
    let (x, y) = (j.flow.position(t), j.flow.velocity(t));
    let (jj, dj) = j.at(t);
    let (kk, dk) = k.at(t);
    Ok(sys.inner(&x, &y, &jj, &dk) - sys.inner(&x, &y, &dj, &kk))
}

/// `D(t)` with singular values; columns are the frame fields in the parallel frame.
#[derive(Debug, Clone)]
pub struct ExpDifferential {
    pub t: f64,
    pub matrix: DMatrix<f64>,
    /// Frame coordinates of `DJ_i(t)`.
    pub derivative: DMatrix<f64>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub determinant: f64,
}

impl ExpDifferential {
    /// Number of singular values below `RANK_TOL · σ_1`.
    pub fn nullity(&self) -> usize {
        let s1 = self.singular_values[0];
        self.singular_values.iter().filter(|s| **s < RANK_TOL * s1).count()
    }

    pub fn is_singular(&self) -> bool {
        self.nullity() > 0
    }

    /// Orthonormal basis (in field coefficients) of the kernel.
    pub fn kernel(&self) -> Vec<DVector<f64>> {
        kernel_basis(&self.matrix, self.nullity())
    }
}

pub(crate) fn kernel_basis(m: &DMatrix<f64>, k: usize) -> Vec<DVector<f64>> {
    if k == 0 {
        return Vec::new();
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    idx[..k].iter().map(|&i| vt.row(i).transpose()).collect()
}

pub(crate) fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// The N-Jacobi frame along one normal geodesic.
#[derive(Debug, Clone)]
pub struct JacobiFrame {
    bundle: NormalBundle,
    normal: UnitNormal,
    flow: Arc<Flow>,
    pairs: Vec<JacobiPair>,
    /// Column `a` holds the frame-field coefficients of the chart field
    /// `∂/∂u_a 𝓔(t û(u))`; the last column is the radial field.
    chart: DMatrix<f64>,
}

impl JacobiFrame {
    pub fn new(bundle: &NormalBundle, u: &[f64], t_max: f64) -> Result<Self> {
        let normal = bundle.unit_normal(u)?;
        Self::from_normal(bundle, normal, t_max)
    }

    pub fn from_normal(bundle: &NormalBundle, normal: UnitNormal, t_max: f64) -> Result<Self> {
        let sys = bundle.system();
        let (pairs, frame) = n_jacobi_basis(bundle, &normal)?;
        let (p, v) = (&normal.base, &normal.vector);
        let fields: Vec<(Vector, Vector)> = pairs
            .iter()
            .map(|pr| (pr.j0.clone(), sys.coordinate_from_covariant(p, v, &pr.j0, &pr.dj0)))
            .collect();
        let flow = sys.flow(p, v, &fields, &frame, t_max)?;
        let chart = chart_coefficients(bundle, &normal, &pairs, &frame)?;
        Ok(JacobiFrame {
            bundle: bundle.clone(),
            normal,
            flow: Arc::new(flow),
            pairs,
            chart,
        })
    }

    pub fn bundle(&self) -> &NormalBundle {
        &self.bundle
    }
    pub fn normal(&self) -> &UnitNormal {
        &self.normal
    }
    pub fn flow(&self) -> &Arc<Flow> {
        &self.flow
    }
    pub fn t_max(&self) -> f64 {
        self.flow.t_end()
    }
    pub fn pairs(&self) -> &[JacobiPair] {
        &self.pairs
    }
    pub fn n(&self) -> usize {
        self.pairs.len()
    }
    pub fn m(&self) -> usize {
        self.bundle.m()
    }

    /// Frame field `i`.
    pub fn field(&self, i: usize) -> NJacobiField {
        let mut coeffs = vec![0.0; self.n()];
        coeffs[i] = 1.0;
        NJacobiField {
            flow: Arc::clone(&self.flow),
            coeffs,
        }
    }

    /// Field with the given coefficients in the frame basis.
    pub fn combination(&self, coeffs: &[f64]) -> NJacobiField {
        NJacobiField {
            flow: Arc::clone(&self.flow),
            coeffs: coeffs.to_vec(),
        }
    }

    /// Chart-coordinate Jacobi fields `∂/∂u_a 𝓔(t û)` and `γ̇` as frame coefficients.
    pub fn chart_coefficients(&self) -> &DMatrix<f64> {
        &self.chart
    }

    fn frame_coords(&self, st: &crate::geodesic::FlowState, w: &[f64]) -> DVector<f64> {
        let sys = self.flow.system();
        let n = self.n();
        if sys.is_embedded() {
            return DVector::from_iterator(n, st.frame.iter().map(|e| dot(e, w)));
        }
        let e = DMatrix::from_fn(w.len(), n, |i, k| st.frame[k][i]);
        e.lu()
            .solve(&DVector::from_column_slice(w))
            .unwrap_or_else(|| DVector::from_element(n, f64::NAN))
    }

    /// `D(t)` and `Ḋ(t)` in the parallel frame.
    pub fn differential(&self, t: f64) -> ExpDifferential {
        let n = self.n();
        let st = self.flow.state(t);
        let mut d = DMatrix::zeros(n, n);
        let mut dd = DMatrix::zeros(n, n);
        for f in 0..n {
            let (j, dj) = self.flow.field_covariant(&st, f);
            d.set_column(f, &self.frame_coords(&st, &j));
            dd.set_column(f, &self.frame_coords(&st, &dj));
        }
        let singular_values = sorted_singular_values(&d);
        let determinant = d.determinant();
        ExpDifferential {
            t,
            matrix: d,
            derivative: dd,
            singular_values,
            determinant,
        }
    }

    /// `D(t)` with the fiber columns divided by `t`; nonsingular near `t = 0`.
    pub fn scaled_matrix(&self, t: f64) -> DMatrix<f64> {
        let mut d = self.differential(t).matrix;
        let m = self.m();
        if t > 0.0 {
            for c in m..self.n() {
                let col = d.column(c) / t;
                d.set_column(c, &col);
            }
        }
        d
    }

    /// Coordinate Jacobian of `(u, t) ↦ 𝓔(t û(u))` at time `t`.
    pub fn chart_jacobian(&self, t: f64) -> DMatrix<f64> {
        let st = self.flow.state(t);
        let d = st.x.len();
        let n = self.n();
        let mut fields = DMatrix::zeros(d, n);
        for (f, (j, _)) in st.fields.iter().enumerate() {
            fields.set_column(f, &DVector::from_column_slice(j));
        }
        let mut out = &fields * &self.chart;
        out.set_column(n - 1, &DVector::from_column_slice(&st.y));
        out
    }

    /// Frame coefficients of the field whose initial data is `pair`.
    pub fn coefficients_of(&self, pair: &JacobiPair) -> Result<DVector<f64>> {
        let n = self.n();
        let d = pair.j0.len();
        let mut init = DMatrix::zeros(2 * d, n);
        for (f, pr) in self.pairs.iter().enumerate() {
            for i in 0..d {
                init[(i, f)] = pr.j0[i];
                init[(d + i, f)] = pr.dj0[i];
            }
        }
        let rhs = DVector::from_iterator(2 * d, pair.j0.iter().chain(&pair.dj0).copied());
        let svd = init.svd(true, true);
        let c = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::OracleFailure(e.to_string()))?;
        let res = (&self.initial_matrix() * &c - &rhs).norm();
        if res > 1e-8 * rhs.norm().max(1.0) {
            return Err(Error::NotInKernel(res));
        }
        Ok(c)
    }

    fn initial_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let d = self.pairs[0].j0.len();
        DMatrix::from_fn(2 * d, n, |r, f| {
            if r < d {
                self.pairs[f].j0[r]
            } else {
                self.pairs[f].dj0[r - d]
            }
        })
    }

    /// Largest `|adjoint_defect|` over all pairs of frame fields on an
    /// `samples`-point grid of `[0, t_max]`, relative to the field scale.
    pub fn max_adjoint_defect(&self, samples: usize) -> Result<f64> {
        let n = self.n();
        let mut worst: f64 = 0.0;
        let sys = self.flow.system();
        for s in 0..samples {
            let t = self.t_max() * s as f64 / (samples - 1).max(1) as f64;
            let st = self.flow.state(t);
            let cov: Vec<(Vector, Vector)> = (0..n).map(|f| self.flow.field_covariant(&st, f)).collect();
            for a in 0..n {
                for b in a + 1..n {
                    let (ja, da) = &cov[a];
                    let (jb, db) = &cov[b];
                    let def = sys.inner(&st.x, &st.y, ja, db) - sys.inner(&st.x, &st.y, da, jb);
                    let nrm = |w: &[f64]| sys.inner(&st.x, &st.y, w, w).max(0.0).sqrt();
                    let scale = (nrm(ja) * nrm(db)).max(nrm(da) * nrm(jb)).max(1e-300);
                    worst = worst.max(def.abs() / scale.max(1.0));
                }
            }
        }
        Ok(worst)
    }
}

/// Frame coefficients of the chart fields `∂/∂u_a 𝓔(t û(u))` plus the radial field.
fn chart_coefficients(
    bundle: &NormalBundle,
    normal: &UnitNormal,
    pairs: &[JacobiPair],
    frame: &[Vector],
) -> Result<DMatrix<f64>> {
    let sys = bundle.system();
    let m = bundle.m();
    let n = pairs.len();
    let (p, v) = (&normal.base, &normal.vector);
    let tangents = bundle.submanifold().tangents(&normal.u[..m]);
    let dn = bundle.normal_derivatives(&normal.u)?;
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n - 1 {
        let dp: Vector = if a < m { tangents[a].clone() } else { vec![0.0; p.len()] };
        let w = sys.covariant_from_coordinate(p, v, &dp, &dn[a]);
        let c = if a < m {
            bundle.tangent_coefficients(p, v, &dp, &tangents)?
        } else {
            DVector::zeros(m)
        };
        let mut rest = w.clone();
        for (k, ck) in c.iter().enumerate() {
            for i in 0..rest.len() {
                rest[i] -= ck * pairs[k].dj0[i];
            }
            out[(k, a)] = *ck;
        }
        for (b, e) in frame[m..].iter().enumerate() {
            out[(m + b, a)] = sys.inner(p, v, e, &rest);
        }
    }
    out[(m, n - 1)] = 1.0;
    Ok(out)
}

/// Result of comparing the mixed second difference of `𝓔` with `J̇_x`.
#[derive(Debug, Clone)]
pub struct SecondOrderCheck {
    pub fd_value: Vector,
    pub jdot_value: Vector,
    pub defect: f64,
}

/// Mixed second difference of `(s1, s2) ↦ 𝓔((1 + s1)(t* û(u + s2 δu)))`
/// against `t* J̇_x(t*)` modulo the image of `d𝓔`, for a kernel vector `x`
/// given as chart-field coefficients `(δu, δr)` of the frame at `t_star`.
pub fn second_order_check(frame: &JacobiFrame, t_star: f64, x: &[f64], h: f64) -> Result<SecondOrderCheck> {
    let n = frame.n();
    let bundle = frame.bundle();
    let sys = bundle.system();
    let jac = frame.chart_jacobian(t_star);
    let image_at = jac.clone() * DVector::from_column_slice(x);
    let scale = jac.norm().max(1.0);
    let resid = image_at.norm();
    if resid > 1e-6 * scale * DVector::from_column_slice(x).norm() {
        return Err(Error::NotInKernel(resid));
    }
    let (du, dr) = (&x[..n - 1], x[n - 1]);
    let u0 = frame.normal().u.clone();
    let point = |s1: f64, s2: f64| -> Result<Vector> {
        let u: Vec<f64> = u0.iter().zip(du).map(|(a, b)| a + s2 * b).collect();
        let un = bundle.unit_normal(&u)?;
        let t = (1.0 + s1) * (t_star + s2 * dr);
        sys.exponential(&un.base, &un.vector, t)
    };
    let mixed = |h: f64| -> Result<Vector> {
        let (a, b, c, d) = (point(h, h)?, point(h, -h)?, point(-h, h)?, point(-h, -h)?);
        Ok((0..a.len())
            .map(|i| (a[i] - b[i] - c[i] + d[i]) / (4.0 * h * h))
            .collect())
    };
    let (f1, f2) = (mixed(h)?, mixed(h / 2.0)?);
    let fd: Vector = f1.iter().zip(&f2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    // t* Σ δu_a J̇_a(t*) + δr (γ̇ + t* γ̈)
    let st = frame.flow().state(t_star);
    let mut xu = x.to_vec();
    xu[n - 1] = 0.0;
    let coeffs = frame.chart_coefficients() * DVector::from_column_slice(&xu);
    let d = st.x.len();
    let acc = sys.accel_var(&st.x, &st.y, &vec![0.0; d], &vec![0.0; d]).0;
    let jdot: Vector = (0..d)
        .map(|i| {
            let ju: f64 = st.fields.iter().zip(coeffs.iter()).map(|((_, jd), c)| c * jd[i]).sum();
            t_star * ju + dr * (st.y[i] + t_star * acc[i])
        })
        .collect();
    // project out Im d𝓔 (columns of the chart Jacobian)
    let svd = jac.svd(true, false);
    let uu = svd.u.expect("u requested");
    let smax = svd.singular_values.max();
    let mut diff = DVector::from_iterator(d, fd.iter().zip(&jdot).map(|(a, b)| a - b));
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > RANK_TOL * smax {
            let col = uu.column(k);
            let c = col.dot(&diff);
            diff -= c * col;
        }
    }
    if sys.is_embedded() {
        let g = sys.level_gradient(&st.x);
        let g2 = dot(&g, &g);
        let c = diff.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / g2;
        for i in 0..d {
            diff[i] -= c * g[i];
        }
    }
    Ok(SecondOrderCheck {
        fd_value: fd,
        jdot_value: jdot,
        defect: diff.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricModel;
    use crate::submanifold::Submanifold;
    use std::f64::consts::PI;

    fn bundle(metric: MetricModel, sub: Submanifold) -> NormalBundle {
        NormalBundle::new(Arc::new(GeodesicSystem::new(metric)), Arc::new(sub), 1.0).unwrap()
    }

    fn circle() -> NormalBundle {
        bundle(
            MetricModel::euclidean(2).unwrap(),
            Submanifold::circle(&[0.0, 0.0], 1.0).unwrap(),
        )
    }

    fn sphere(sub: Submanifold) -> NormalBundle {
        bundle(
            MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 - 1", 2).unwrap(),
            sub,
        )
    }

    #[test]
    fn plane_curve_has_one_tangential_and_one_radial_pair() {
        let b = circle();
        let (pairs, frame) = n_jacobi_basis(&b, &b.unit_normal(&[0.4]).unwrap()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(frame.len(), 2);
        assert!(pairs[1].j0.iter().all(|c| *c == 0.0));
        let v = b.unit_normal(&[0.4]).unwrap().vector;
        assert!((pairs[1].dj0[0] - v[0]).abs() < 1e-14);
    }

    #[test]
    fn circle_tangential_field_is_one_minus_t() {
        let b = circle();
        let f = JacobiFrame::new(&b, &[0.4], 3.0).unwrap();
        for t in [0.0, 0.3, 1.0, 2.5] {
            let d = f.differential(t);
            assert!((d.matrix[(0, 0)] - (1.0 - t)).abs() < 1e-12);
            assert!((d.matrix[(1, 1)] - t).abs() < 1e-12);
            assert!(d.matrix[(1, 0)].abs() < 1e-12 && d.matrix[(0, 1)].abs() < 1e-12);
        }
        let d = f.differential(1.0);
        assert_eq!(d.nullity(), 1);
        let k = &d.kernel()[0];
        assert!(k[1].abs() < 1e-12);
        assert!(!f.differential(0.5).is_singular());
    }

    #[test]
    fn radial_field_is_t_gamma_dot() {
        let b = sphere(Submanifold::circle(&[0.0, 0.0, 0.0], 1.0).unwrap());
        let f = JacobiFrame::new(&b, &[0.2], 4.0).unwrap();
        let radial = f.field(b.m());
        for t in [0.5, 1.7, 3.9] {
            let (j, _) = radial.at(t);
            let y = f.flow().velocity(t);
            for i in 0..3 {
                assert!((j[i] - t * y[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn equator_tangential_field_is_cosine() {
        let b = sphere(Submanifold::circle(&[0.0, 0.0, 0.0], 1.0).unwrap());
        let f = JacobiFrame::new(&b, &[0.7], 5.0).unwrap();
        for t in [0.3, PI / 2.0, 2.0, 3.0 * PI / 2.0, 4.5] {
            let d = f.differential(t);
            assert!((d.matrix[(0, 0)] - t.cos()).abs() < 1e-8, "{t}: {}", d.matrix);
        }
    }

    #[test]
    fn point_source_on_sphere_is_sine() {
        let b = sphere(Submanifold::point(&[0.0, 0.0, 1.0]));
        let f = JacobiFrame::new(&b, &[0.3], 4.0).unwrap();
        for t in [0.5, PI, 3.5] {
            let d = f.differential(t);
            assert!((d.matrix[(1, 1)].abs() - t.sin().abs()).abs() < 1e-8, "{}", d.matrix);
        }
    }

    #[test]
    fn line_fields_never_vanish() {
        let b = bundle(
            MetricModel::euclidean(2).unwrap(),
            Submanifold::line(&[0.0, 0.0], &[1.0, 0.0]).unwrap(),
        );
        let f = JacobiFrame::new(&b, &[0.0], 50.0).unwrap();
        for t in [1.0, 10.0, 50.0] {
            assert!((f.differential(t).matrix[(0, 0)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_defects_vanish() {
        let b = circle();
        let f = JacobiFrame::new(&b, &[0.4], 3.0).unwrap();
        assert!(f.max_adjoint_defect(50).unwrap() < 1e-8);
        let j = f.field(0);
        assert_eq!(adjoint_defect(&j, &j, 1.3).unwrap(), 0.0);
        let other = JacobiFrame::new(&b, &[0.5], 3.0).unwrap();
        assert_eq!(adjoint_defect(&j, &other.field(0), 1.0), Err(Error::PathMismatch));
        let s = sphere(Submanifold::circle(&[0.0, 0.0, 0.0], 1.0).unwrap());
        let f = JacobiFrame::new(&s, &[1.1], 5.0).unwrap();
        assert!(f.max_adjoint_defect(50).unwrap() < 1e-7);
    }

    #[test]
    fn chart_jacobian_matches_differences() {
        let m = MetricModel::randers(
            &["1 + 0.1*x1^2".into(), "0".into(), "0".into(), "1".into()],
            &["0.2*cos(x1)".into(), "0.1".into()],
        )
        .unwrap();
        let b = bundle(m, Submanifold::ellipse(&[0.0, 0.0], 2.0, 1.0).unwrap());
        let f = JacobiFrame::new(&b, &[0.6], 0.8).unwrap();
        let jac = f.chart_jacobian(0.8);
        let sys = b.system();
        let e = |th: f64| {
            let un = b.unit_normal(&[th]).unwrap();
            sys.exponential(&un.base, &un.vector, 0.8).unwrap()
        };
        let h = 1e-5;
        let (a, c) = (e(0.6 + h), e(0.6 - h));
        for i in 0..2 {
            assert!(
                (jac[(i, 0)] - (a[i] - c[i]) / (2.0 * h)).abs() < 1e-6,
                "{jac} {:?}",
                (a[i] - c[i]) / (2.0 * h)
            );
        }
    }

    #[test]
    fn second_order_identity_on_the_circle() {
        let b = circle();
        let f = JacobiFrame::new(&b, &[0.4], 2.0).unwrap();
        let chk = second_order_check(&f, 1.0, &[1.0, 0.0], 1e-3).unwrap();
        assert!(chk.defect < 1e-5, "{chk:?}");
        let chk2 = second_order_check(&f, 1.0, &[2.0, 0.0], 1e-3).unwrap();
        for i in 0..2 {
            assert!((chk2.jdot_value[i] - 2.0 * chk.jdot_value[i]).abs() < 1e-12);
        }
        assert!(matches!(
            second_order_check(&f, 1.0, &[0.0, 1.0], 1e-3),
            Err(Error::NotInKernel(_))
        ));
    }
}
