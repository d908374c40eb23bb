//! Endpoint map `(u, t) ↦ 𝓔(t û(u))` and a damped Gauss–Newton solver for it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::Vector;
use crate::jacobi::JacobiFrame;
use crate::submanifold::NormalBundle;

/// `𝓔(t û(u))`.
pub fn endpoint(bundle: &NormalBundle, u: &[f64], t: f64) -> Result<Vector> {
    let un = bundle.unit_normal(u)?;
    bundle.system().exponential(&un.base, &un.vector, t)
}

/// Endpoint and its Jacobian in `(u, t)`.
pub fn endpoint_jacobian(bundle: &NormalBundle, u: &[f64], t: f64) -> Result<(Vector, DMatrix<f64>)> {
    let frame = JacobiFrame::new(bundle, u, t.max(1e-12))?;
    Ok((frame.flow().position(t), frame.chart_jacobian(t)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub u: Vec<f64>,
    pub t: f64,
    pub point: Vector,
    /// `|𝓔(t û) - q|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `𝓔(t û(u)) = q` starting from `(u0, t0)` by Levenberg–Marquardt.
pub fn solve_endpoint(
    bundle: &NormalBundle,
    u0: &[f64],
    t0: f64,
    q: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Shot> {
    let k = u0.len();
    let mut z: Vec<f64> = u0.iter().copied().chain(std::iter::once(t0.max(1e-9))).collect();
    let eval = |z: &[f64]| endpoint_jacobian(bundle, &z[..k], z[k]);
    let (mut p, mut jac) = eval(&z)?;
    let res = |p: &[f64]| DVector::from_iterator(q.len(), p.iter().zip(q).map(|(a, b)| a - b));
    let mut r = res(&p);
    let mut mu = 1e-3;
    let mut it = 0;
    while it < max_iter && r.norm() > tol {
        it += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let scale = jtj.diagonal().max().max(1e-12);
        let mut accepted = false;
        for _ in 0..12 {
            let lhs = &jtj + DMatrix::identity(k + 1, k + 1) * (mu * scale);
            let Some(step) = lhs.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let mut cand: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if cand[k] <= 0.0 {
                cand[k] = 0.5 * z[k];
            }
            match eval(&cand) {
                Ok((pc, jc)) => {
                    let rc = res(&pc);
                    if rc.norm() < r.norm() {
                        z = cand;
                        p = pc;
                        jac = jc;
                        r = rc;
                        mu = (mu * 0.3).max(1e-12);
                        accepted = true;
                        break;
                    }
                }
                Err(Error::ZeroVector(_) | Error::DegenerateTangent(_)) => {}
                Err(e) => return Err(e),
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(Shot {
        u: z[..k].to_vec(),
        t: z[k],
        point: p,
        residual: r.norm(),
        iterations: it,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::GeodesicSystem;
    use crate::metric::MetricModel;
    use crate::submanifold::Submanifold;
    use std::sync::Arc;

    #[test]
    fn shoots_to_an_interior_point_of_the_disc() {
        let b = NormalBundle::new(
            Arc::new(GeodesicSystem::new(MetricModel::euclidean(2).unwrap())),
            Arc::new(Submanifold::circle(&[0.0, 0.0], 1.0).unwrap()),
            1.0,
        )
        .unwrap();
        let s = solve_endpoint(&b, &[0.3], 0.5, &[0.3, 0.0], 1e-12, 50).unwrap();
        assert!(s.residual < 1e-12);
        assert!((s.t - 0.7).abs() < 1e-12 && s.u[0].abs() < 1e-10);
    }

    #[test]
    fn shoots_on_the_sphere() {
        let b = NormalBundle::new(
            Arc::new(GeodesicSystem::new(
                MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 - 1", 2).unwrap(),
            )),
            Arc::new(Submanifold::circle(&[0.0, 0.0, 0.0], 1.0).unwrap()),
            1.0,
        )
        .unwrap();
        let q = [0.4f64.cos(), 0.0, 0.4f64.sin()];
        let s = solve_endpoint(&b, &[0.2], 0.3, &q, 1e-11, 50).unwrap();
        assert!(s.residual < 1e-11, "{s:?}");
        assert!((s.t - 0.4).abs() < 1e-9);
    }
}
