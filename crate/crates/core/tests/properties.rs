//! Invariants checked on random inputs.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use finsler_focal::cut::{CutSettings, DistanceOracle};
use finsler_focal::focal::{detect_focal_times, focal_time, morse_index_from};
use finsler_focal::geodesic::GeodesicSystem;
use finsler_focal::jacobi::JacobiFrame;
use finsler_focal::metric::MetricModel;
use finsler_focal::scenario::Scenario;
use finsler_focal::submanifold::{NormalBundle, Submanifold};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn randers(bx: f64, by: f64) -> MetricModel {
    let s = |x: f64| format!("{x}");
    MetricModel::randers(&[s(1.0), s(0.0), s(0.0), s(1.0)], &[s(bx), s(by)]).unwrap()
}

fn ellipse() -> NormalBundle {
    let sys = Arc::new(GeodesicSystem::new(MetricModel::euclidean(2).unwrap()));
    NormalBundle::new(sys, Arc::new(Submanifold::ellipse(&[0.0, 0.0], 2.0, 1.0).unwrap()), 1.0).unwrap()
}

fn ellipse_oracle() -> &'static (NormalBundle, DistanceOracle) {
    static O: OnceLock<(NormalBundle, DistanceOracle)> = OnceLock::new();
    O.get_or_init(|| {
        let b = ellipse();
        let settings = CutSettings {
            t_max: 3.0,
            ..CutSettings::default()
        };
        let o = DistanceOracle::new(&b, settings).unwrap();
        (b, o)
    })
}

/// Curvature radius of the ellipse `(2 cos θ, sin θ)`.
fn ellipse_radius(th: f64) -> f64 {
    let (a, b) = (2.0, 1.0);
    (a * a * th.sin().powi(2) + b * b * th.cos().powi(2)).powf(1.5) / (a * b)
}

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    (0.0..2.0 * PI, 0.1..3.0f64).prop_map(|(a, r)| [r * a.cos(), r * a.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn norm_is_positively_homogeneous(v in vec2(), s in 0.01..10.0f64, bx in -0.9..0.9f64) {
        let m = randers(bx, 0.0);
        let p = [0.3, -0.2];
        let a = m.norm(&p, &[s * v[0], s * v[1]]).unwrap();
        let b = s * m.norm(&p, &v).unwrap();
        prop_assert!((a - b).abs() <= TOL * b.max(1.0));
    }

    #[test]
    fn fundamental_tensor_reproduces_norm(v in vec2(), bx in -0.9..0.9f64, by in -0.3..0.3f64) {
        let m = randers(bx, by);
        let p = [0.0, 0.0];
        let g = m.fundamental_tensor(&p, &v).unwrap();
        prop_assert!((g[(0, 1)] - g[(1, 0)]).abs() <= TOL);
        let f = m.norm(&p, &v).unwrap();
        let gvv = v[0] * (g[(0, 0)] * v[0] + g[(0, 1)] * v[1]) + v[1] * (g[(1, 0)] * v[0] + g[(1, 1)] * v[1]);
        prop_assert!((gvv - f * f).abs() <= 1e-8 * f * f);
        prop_assert!(g.determinant() > 0.0 && g[(0, 0)] > 0.0);
    }

    #[test]
    fn cartan_tensor_vanishes_along_v(v in vec2(), x in vec2(), y in vec2(), bx in -0.9..0.9f64) {
        let m = randers(bx, 0.1);
        let c = m.cartan_tensor(&[0.0, 0.0], &v, &v, &x, &y).unwrap();
        prop_assert!(c.abs() <= 1e-7 * (1.0 + x[0].hypot(x[1]) * y[0].hypot(y[1])));
    }

    #[test]
    fn legendre_map_inverts(v in vec2(), bx in -0.9..0.9f64) {
        let m = randers(bx, -0.2);
        let p = [0.5, 0.5];
        let xi = m.legendre(&p, &v).unwrap();
        let w = m.legendre_inverse(&p, xi.as_slice()).unwrap();
        prop_assert!((w[0] - v[0]).abs() + (w[1] - v[1]).abs() <= 1e-7 * v[0].hypot(v[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ellipse_first_focal_time_is_curvature_radius(th in 0.0..2.0 * PI) {
        let b = ellipse();
        let frame = JacobiFrame::new(&b, &[th], 4.5).unwrap();
        let zeros = detect_focal_times(&frame, 4.5, 1e-10).unwrap();
        let l1 = focal_time(&zeros, 1);
        prop_assert!((l1 - ellipse_radius(th)).abs() <= 1e-6 * ellipse_radius(th), "{l1}");
    }

    #[test]
    fn jacobi_frame_is_self_adjoint(th in 0.0..2.0 * PI, bx in -0.5..0.5f64) {
        let sys = Arc::new(GeodesicSystem::new(randers(bx, 0.0)));
        let b = NormalBundle::new(sys, Arc::new(Submanifold::circle(&[0.0, 0.0], 1.0).unwrap()), 1.0).unwrap();
        let frame = JacobiFrame::new(&b, &[th], 1.5).unwrap();
        prop_assert!(frame.max_adjoint_defect(16).unwrap() <= 1e-8);
    }

    #[test]
    fn morse_index_is_monotone(th in 0.0..2.0 * PI, t1 in 0.05..2.9f64, t2 in 0.05..2.9f64) {
        let b = ellipse();
        let frame = JacobiFrame::new(&b, &[th], 3.0).unwrap();
        let zeros = detect_focal_times(&frame, 3.0, 1e-10).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if let (Ok(a), Ok(c)) = (morse_index_from(&zeros, lo, 1e-10), morse_index_from(&zeros, hi, 1e-10)) {
            prop_assert!(a <= c);
        }
    }

    #[test]
    fn cut_time_bounds_minimality(th in 0.0..2.0 * PI, s in 0.05..0.95f64) {
        let (_, o) = ellipse_oracle();
        let rec = o.cut_time(0, &[th]).unwrap();
        prop_assert!(rec.rho <= rec.lambda1 + 1e-9);
        // before the cut point the ray realises the distance, after it something is shorter
        let before = o.shorter_foot(&[th], s * rec.rho, None, false).unwrap();
        prop_assert!(before.is_none(), "{:?}", before);
        let after = rec.rho + s * (3.0 - rec.rho);
        if after - rec.rho > 1e-2 {
            prop_assert!(o.shorter_foot(&[th], after, None, false).unwrap().is_some());
        }
    }

    #[test]
    fn scenario_round_trips_through_json(rays in 1usize..2000, t_max in 0.1..100.0f64, seed in any::<u64>()) {
        let text = format!(
            "name = 'p'\nseed = {seed}\n[metric]\nkind = 'euclidean'\ndim = 2\n[submanifold]\nkind = 'circle'\ncenter = [0, 0]\nradius = 1\n[scan]\nrays = {rays}\nt_max = {t_max:e}\n"
        );
        let sc = Scenario::parse(&text).unwrap();
        let back = Scenario::parse(&serde_json::to_string(&sc).unwrap()).unwrap();
        prop_assert_eq!(sc, back);
    }
}
