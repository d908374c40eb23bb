//! Finite-element discretisation of the N-index form
//!
//! `𝓘(X, Y) = ∫ g(DX, DY) - g(R(X, γ̇)γ̇, Y) dt + g_v(A X(0), Y(0))`
//!
//! on piecewise-linear hat functions times the parallel frame, with
//! `X(0) ∈ T_pN` and `X(T) = 0`. The curvature term is read off the
//! variational flow: for a parallel field `E`, the Jacobi field with
//! `J = E`, `DJ = 0` at time `t` has `D²J = -R(E, γ̇)γ̇`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geodesic::{FlowState, GeodesicSystem, Vector};
use crate::jacobi::JacobiFrame;
use crate::submanifold::NormalBundle;

const GAUSS: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// The assembled index form on `[0, T]`.
#[derive(Debug, Clone)]
pub struct IndexFormMatrix {
    pub t: f64,
    pub mesh: usize,
    /// Boundary degrees of freedom (`dim N`).
    pub m: usize,
    pub n: usize,
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl IndexFormMatrix {
    pub fn step(&self) -> f64 {
        self.t / self.mesh as f64
    }

    /// Eigenvalues closer to zero than this are not resolved by the mesh.
    pub fn band(&self) -> f64 {
        self.step().powi(3)
    }

    pub fn negative_count(&self) -> Result<usize> {
        let band = self.band();
        if let Some(l) = self.eigenvalues.iter().find(|l| l.abs() < band) {
            return Err(Error::MeshTooCoarse(*l));
        }
        Ok(self.eigenvalues.iter().filter(|l| **l < 0.0).count())
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Coefficient vector of the interpolant with the given nodal values
    /// (frame coordinates at `t_i = i T / mesh`, `i = 0..=mesh`).
    pub fn interpolant(&self, nodal: &[DVector<f64>]) -> DVector<f64> {
        let mut x = DVector::zeros(self.matrix.nrows());
        for k in 0..self.m {
            x[k] = nodal[0][k];
        }
        for i in 1..self.mesh {
            for k in 0..self.n {
                x[self.m + (i - 1) * self.n + k] = nodal[i][k];
            }
        }
        x
    }

    /// `𝓘(X, X)` for the interpolant of `nodal`.
    pub fn quadratic(&self, nodal: &[DVector<f64>]) -> f64 {
        let x = self.interpolant(nodal);
        x.dot(&(&self.matrix * &x))
    }
}

fn dof(m: usize, n: usize, node: usize, k: usize) -> Option<usize> {
    match node {
        0 if k < m => Some(k),
        0 => None,
        _ => Some(m + (node - 1) * n + k),
    }
}

fn unit_gradient(sys: &GeodesicSystem, x: &[f64]) -> Vector {
    let g = sys.level_gradient(x);
    let r = g.iter().map(|c| c * c).sum::<f64>().sqrt();
    g.iter().map(|c| c / r).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `K_jk(t) = g(R(E_j, γ̇)γ̇, E_k)` in the parallel frame.
fn curvature_matrix(frame: &JacobiFrame, t: f64) -> DMatrix<f64> {
    let flow = frame.flow();
    let sys = flow.system();
    let n = frame.n();
    let st: FlowState = flow.state(t);
    let (x, y) = (&st.x, &st.y);
    let d = x.len();
    let mut k = DMatrix::zeros(n, n);
    if sys.is_flat() {
        return k;
    }
    let ddj: Vec<Vector> = if sys.is_embedded() {
        let nu = unit_gradient(sys, x);
        let h = 1e-5;
        let xp: Vector = x.iter().zip(y).map(|(a, b)| a + h * b).collect();
        let xm: Vector = x.iter().zip(y).map(|(a, b)| a - h * b).collect();
        let (np, nm) = (unit_gradient(sys, &xp), unit_gradient(sys, &xm));
        let nd: Vector = np.iter().zip(&nm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        st.frame
            .iter()
            .map(|e| {
                let s = -dot(&nd, e);
                let jd: Vector = nu.iter().map(|c| s * c).collect();
                let (_, jdd) = sys.accel_var(x, y, e, &jd);
                let r: Vector = (0..d).map(|i| jdd[i] - s * nd[i]).collect();
                sys.project_tangent(x, &r)
            })
            .collect()
    } else {
        let nmat = sys.connection_matrix(x, y);
        let h = 1e-5 * t.max(1.0);
        let (ta, tb) = ((t - h).max(0.0), (t + h).min(flow.t_end()));
        let (sa, sb) = (flow.state(ta), flow.state(tb));
        let ndot = (sys.connection_matrix(&sb.x, &sb.y) - sys.connection_matrix(&sa.x, &sa.y)) / (tb - ta);
        st.frame
            .iter()
            .map(|e| {
                let ev = DVector::from_column_slice(e);
                let ne = &nmat * &ev;
                let jd: Vector = ne.iter().map(|c| -c).collect();
                let (_, jdd) = sys.accel_var(x, y, e, &jd);
                let r = DVector::from_vec(jdd) + &ndot * &ev - &nmat * &ne;
                r.as_slice().to_vec()
            })
            .collect()
    };
    for j in 0..n {
        for l in 0..n {
            k[(j, l)] = -sys.inner(x, y, &st.frame[l], &ddj[j]);
        }
    }
    (&k + k.transpose()) * 0.5
}

/// `g_v(A E_k, E_l)` for the first `m` frame vectors.
fn boundary_block(frame: &JacobiFrame) -> Result<DMatrix<f64>> {
    let m = frame.m();
    if m == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let bundle: &NormalBundle = frame.bundle();
    let normal = frame.normal();
    let sys = bundle.system();
    let (p, v) = (&normal.base, &normal.vector);
    let a = bundle.shape_operator(&normal.u, 1.0)?;
    let tangents = bundle.submanifold().tangents(&normal.u[..m]);
    let st = frame.flow().state(0.0);
    let d = p.len();
    let tm = DMatrix::from_fn(d, m, |i, c| tangents[c][i]);
    let em = DMatrix::from_fn(d, m, |i, c| st.frame[c][i]);
    let coeffs = (tm.transpose() * &tm)
        .lu()
        .solve(&(tm.transpose() * &em))
        .ok_or_else(|| Error::DegenerateTangent(p.clone()))?;
    let ae = &tm * (&a * &coeffs);
    let mut b = DMatrix::zeros(m, m);
    for k in 0..m {
        let col: Vector = ae.column(k).iter().copied().collect();
        for l in 0..m {
            b[(k, l)] = sys.inner(p, v, &col, &st.frame[l]);
        }
    }
    Ok((&b + b.transpose()) * 0.5)
}

/// Assemble the index form along the frame's geodesic on `[0, t]` with
/// `mesh` elements. The frame must cover `[0, t]`.
pub fn index_form_matrix(frame: &JacobiFrame, t: f64, mesh: usize) -> Result<IndexFormMatrix> {
    if !(t > 0.0) || t > frame.t_max() + 1e-12 {
        return Err(Error::HorizonTooSmall(t));
    }
    let mesh = mesh.max(2);
    let (n, m) = (frame.n(), frame.m());
    let size = m + (mesh - 1) * n;
    let h = t / mesh as f64;
    let mut mat = DMatrix::zeros(size, size);
    for e in 0..mesh {
        let (t0, t1) = (e as f64 * h, (e + 1) as f64 * h);
        // Local shape functions φ_0 = (t1 - s)/h, φ_1 = (s - t0)/h.
        for (xi, w) in GAUSS {
            let s = 0.5 * (t0 + t1) + 0.5 * h * xi;
            let wq = 0.5 * h * w;
            let phi = [(t1 - s) / h, (s - t0) / h];
            let dphi = [-1.0 / h, 1.0 / h];
            let kq = curvature_matrix(frame, s);
            for a in 0..2 {
                for b in 0..2 {
                    for k in 0..n {
                        let Some(ia) = dof(m, n, e + a, k).filter(|_| e + a < mesh) else {
                            continue;
                        };
                        for l in 0..n {
                            let Some(ib) = dof(m, n, e + b, l).filter(|_| e + b < mesh) else {
                                continue;
                            };
                            let mut v = -phi[a] * phi[b] * kq[(k, l)];
                            if k == l {
                                v += dphi[a] * dphi[b];
                            }
                            mat[(ia, ib)] += wq * v;
                        }
                    }
                }
            }
        }
    }
    let bb = boundary_block(frame)?;
    for k in 0..m {
        for l in 0..m {
            mat[(k, l)] += bb[(k, l)];
        }
    }
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(mat.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(IndexFormMatrix {
        t,
        mesh,
        m,
        n,
        matrix: mat,
        eigenvalues,
    })
}

/// Number of negative eigenvalues of the index form along `γ_û(u)` on `[0, t]`.
pub fn index_form_negative_count(bundle: &NormalBundle, u: &[f64], t: f64, mesh: usize) -> Result<usize> {
    let frame = JacobiFrame::new(bundle, u, t)?;
    index_form_matrix(&frame, t, mesh)?.negative_count()
}

/// Default mesh: elements of length at most 0.02.
pub fn default_mesh(t: f64) -> usize {
    ((t / 0.02).ceil() as usize).max(50)
}
