//! Tangent focal points along normal rays: detection, multiplicities, Morse
//! index, focal times `λ_j`, Warner's regularity conditions, local form
//! classification, focal-time derivatives and non-injectivity witnesses.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::Vector;
use crate::jacobi::{kernel_basis, sorted_singular_values, JacobiFrame, RANK_TOL};
use crate::shooting::{endpoint, solve_endpoint};
use crate::submanifold::{NormalBundle, UnitNormal};

/// Default time tolerance for refined focal times.
pub const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocalTime {
    pub time: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LocalForm {
    T1,
    T2,
    T3,
    Unclassified,
}

impl LocalForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            LocalForm::T1 => "T1",
            LocalForm::T2 => "T2",
            LocalForm::T3 => "T3",
            LocalForm::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalRecord {
    pub direction: UnitNormal,
    pub time: f64,
    pub multiplicity: usize,
    pub order: usize,
    pub regular: bool,
    pub localform: LocalForm,
    pub det_radial_derivative: f64,
    /// Angle in degrees between the kernel and the fitted focal tangent plane.
    pub kernel_angle: f64,
    /// `𝓔(time · v)`.
    pub point: Vector,
}

fn ratio(s: &[f64]) -> f64 {
    s[s.len() - 1] / s[0]
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Zeros of `det D(t)` on `(0, t_max]`, with multiplicities.
///
/// Sign changes are bisected; zeros without a sign change are found as
/// local minima of `σ_min/σ_1` refined by golden-section search.
pub fn detect_focal_times(frame: &JacobiFrame, t_max: f64, tol: f64) -> Result<Vec<FocalTime>> {
    let t_max = t_max.min(frame.t_max());
    let steps = ((100.0 * t_max).ceil() as usize).max(200);
    let h = t_max / steps as f64;
    let eval = |t: f64| -> (f64, f64) {
        let d = frame.scaled_matrix(t);
        let s = sorted_singular_values(&d);
        (d.determinant(), ratio(&s))
    };
    let samples: Vec<(f64, f64, f64)> = (1..=steps)
        .map(|i| {
            let t = h * i as f64;
            let (det, r) = eval(t);
            (t, det, r)
        })
        .collect();
    let mut roots: Vec<f64> = Vec::new();
    for w in samples.windows(2) {
        let (t0, d0, _) = w[0];
        let (t1, d1, _) = w[1];
        if d0 == 0.0 {
            roots.push(t0);
        } else if d0.signum() != d1.signum() && d1 != 0.0 {
            let (mut a, mut b, mut fa) = (t0, t1, d0);
            while b - a > 0.01 * tol {
                let c = 0.5 * (a + b);
                let fc = eval(c).0;
                if fc == 0.0 {
                    a = c;
                    b = c;
                    break;
                }
                if fc.signum() == fa.signum() {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    let rf = |t: f64| eval(t).1;
    for i in 1..samples.len().saturating_sub(1) {
        let (t, _, r) = samples[i];
        if r <= samples[i - 1].2 && r <= samples[i + 1].2 && r < 0.05 {
            if roots.iter().any(|x| (x - t).abs() <= 1.5 * h) {
                continue;
            }
            let (tm, rm) = golden_min(&rf, samples[i - 1].0, samples[i + 1].0, 0.01 * tol);
            if rm < RANK_TOL {
                roots.push(tm);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    for w in roots.windows(2) {
        if w[1] - w[0] < 10.0 * tol {
            return Err(Error::UnresolvedZeroCluster(w[0]));
        }
    }
    Ok(roots
        .into_iter()
        .map(|t| {
            let s = sorted_singular_values(&frame.scaled_matrix(t));
            let k = s.iter().filter(|x| **x < RANK_TOL * s[0]).count().max(1);
            FocalTime {
                time: t,
                multiplicity: k,
            }
        })
        .collect())
}

/// Sum of multiplicities of focal times in `(0, t)`.
pub fn morse_index_from(zeros: &[FocalTime], t: f64, tol: f64) -> Result<usize> {
    if zeros.iter().any(|z| (z.time - t).abs() <= 10.0 * tol) {
        return Err(Error::EndpointIsFocal(t));
    }
    Ok(zeros.iter().filter(|z| z.time < t).map(|z| z.multiplicity).sum())
}

/// Index of `γ|_[0, t]` counted from the frame's focal points.
pub fn morse_index(frame: &JacobiFrame, t: f64, tol: f64) -> Result<usize> {
    if t > frame.t_max() {
        return Err(Error::HorizonTooSmall(frame.t_max()));
    }
    let zeros = detect_focal_times(frame, frame.t_max(), tol)?;
    morse_index_from(&zeros, t, tol)
}

/// `λ_j`, or `∞` when the accumulated multiplicity stays below `j`.
pub fn focal_time(zeros: &[FocalTime], j: usize) -> f64 {
    let mut acc = 0;
    for z in zeros {
        acc += z.multiplicity;
        if acc >= j {
            return z.time;
        }
    }
    f64::INFINITY
}

/// Elementary symmetric polynomial `e_r` of `xs`.
fn elementary_symmetric(xs: &[f64], r: usize) -> f64 {
    let mut e = vec![0.0; r + 1];
    e[0] = 1.0;
    for &x in xs {
        for k in (1..=r).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e[r]
}

/// `Δ = e_{n-k+1}(σ(D(t))) · sign det D(t)`.
pub fn delta_value(frame: &JacobiFrame, t: f64, k: usize) -> f64 {
    let d = frame.differential(t);
    let n = d.singular_values.len();
    let r = (n + 1).saturating_sub(k);
    elementary_symmetric(&d.singular_values, r) * d.determinant.signum()
}

/// `dΔ/dt` by a central difference.
pub fn delta_radial_derivative(frame: &JacobiFrame, t: f64, k: usize) -> f64 {
    let h = 1e-5 * t.max(1.0);
    let hi = (t + h).min(frame.t_max());
    let lo = t - h;
    (delta_value(frame, hi, k) - delta_value(frame, lo, k)) / (hi - lo)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub u: Vec<f64>,
    /// Focal times inside the probe window.
    pub window_zeros: Vec<FocalTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarnerReport {
    /// `F(d𝓔_v(v))` and the expected value `F(v) = t*`.
    pub r1_norm: f64,
    pub r1_expected: f64,
    pub r2_rank: usize,
    /// `σ_min/σ_max` of the projected `J̇` matrix.
    pub r2_sigma_ratio: f64,
    /// Multiplicity-weighted counts on each probe ray.
    pub r3_counts: Vec<usize>,
    pub window: f64,
    pub probes: Vec<Probe>,
}

impl WarnerReport {
    pub fn passes(&self, k: usize) -> bool {
        (self.r1_norm - self.r1_expected).abs() <= 1e-6 * self.r1_expected.max(1.0)
            && self.r2_rank == k
            && self.r2_sigma_ratio >= 1e-6
            && self.r3_counts.iter().all(|c| *c == k)
    }
}

/// Probe offsets of radius `r` in a chart of dimension `c`.
fn probe_offsets(c: usize, r: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for a in 0..c {
        for s in [r, -r, 0.5 * r, -0.5 * r] {
            let mut o = vec![0.0; c];
            o[a] = s;
            out.push(o);
        }
    }
    if c >= 2 {
        let q = r / 2f64.sqrt();
        for a in 0..c {
            for b in a + 1..c {
                for (sa, sb) in [(q, q), (q, -q), (-q, q), (-q, -q)] {
                    let mut o = vec![0.0; c];
                    o[a] = sa;
                    o[b] = sb;
                    out.push(o);
                }
            }
        }
    }
    out
}

/// Half the gap to the nearest other focal time, or `t*/2`.
pub fn probe_window(zeros: &[FocalTime], t_star: f64) -> f64 {
    let gap = zeros
        .iter()
        .filter(|z| (z.time - t_star).abs() > 10.0 * TIME_TOL)
        .map(|z| (z.time - t_star).abs())
        .fold(f64::INFINITY, f64::min);
    let w = if gap.is_finite() { 0.5 * gap } else { 0.5 * t_star };
    w.min(0.5 * t_star)
}

pub fn probe_rays(bundle: &NormalBundle, u: &[f64], t_star: f64, window: f64, radius: f64) -> Result<Vec<Probe>> {
    probe_offsets(u.len(), radius)
        .into_iter()
        .map(|o| {
            let up: Vec<f64> = u.iter().zip(&o).map(|(a, b)| a + b).collect();
            let f = JacobiFrame::new(bundle, &up, t_star + window)?;
            let zeros = detect_focal_times(&f, t_star + window, TIME_TOL)?;
            Ok(Probe {
                u: up,
                window_zeros: zeros.into_iter().filter(|z| (z.time - t_star).abs() < window).collect(),
            })
        })
        .collect()
}

/// Warner's conditions at the focal time `t_star` of `frame`.
pub fn warner_checks(frame: &JacobiFrame, zeros: &[FocalTime], t_star: f64, radius: f64) -> Result<WarnerReport> {
    let bundle = frame.bundle();
    let sys = bundle.system();
    let m = frame.m();
    let st = frame.flow().state(t_star);
    // R1: radial field J = t γ̇ at t*, i.e. d𝓔_v(v) for v = t* û
    let (jr, _) = frame.field(m).at(t_star);
    let r1 = sys.metric().norm(&st.x, &jr)?;
    // R2: J̇ on the kernel modulo the image
    let d = frame.differential(t_star);
    let k = d.nullity().max(1);
    let ker = kernel_basis(&d.matrix, k);
    let svd = d.matrix.clone().svd(true, false);
    let uu = svd.u.expect("u requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    let coker = DMatrix::from_fn(d.matrix.nrows(), k, |i, c| uu[(i, idx[c])]);
    let kmat = DMatrix::from_fn(d.matrix.ncols(), k, |i, c| ker[c][i]);
    let proj = coker.transpose() * &d.derivative * kmat;
    let s = sorted_singular_values(&proj);
    let smax = s[0].max(1e-300);
    let r2_rank = s.iter().filter(|x| **x > 1e-6 * smax).count();
    // R3: multiplicity-weighted counts on probe rays
    let window = probe_window(zeros, t_star);
    let probes = probe_rays(bundle, &frame.normal().u, t_star, window, radius)?;
    let r3_counts = probes
        .iter()
        .map(|p| p.window_zeros.iter().map(|z| z.multiplicity).sum())
        .collect();
    Ok(WarnerReport {
        r1_norm: r1,
        r1_expected: t_star,
        r2_rank,
        r2_sigma_ratio: s[s.len() - 1] / smax,
        r3_counts,
        window,
        probes,
    })
}

/// Angle (degrees) between the kernel of `d𝓔` at `t* û` and the tangent plane
/// of the focal set `r = λ(u)` fitted from probe rays, in `(u, r)` coordinates.
pub fn kernel_plane_angle(frame: &JacobiFrame, t_star: f64, k: usize, probes: &[Probe], radius: f64) -> Option<f64> {
    let c = frame.normal().u.len();
    let u0 = &frame.normal().u;
    let mut grad = vec![0.0; c];
    for a in 0..c {
        let find = |s: f64| {
            probes.iter().find(|p| {
                p.u.iter()
                    .zip(u0)
                    .enumerate()
                    .all(|(i, (x, y))| ((x - y) - if i == a { s } else { 0.0 }).abs() < 1e-12)
            })
        };
        let (plus, minus) = (find(radius)?, find(-radius)?);
        let time = |p: &Probe| p.window_zeros.first().map(|z| z.time);
        grad[a] = (time(plus)? - time(minus)?) / (2.0 * radius);
    }
    let jac = frame.chart_jacobian(t_star);
    let ker = kernel_basis(&jac, k);
    let normal = DVector::from_iterator(c + 1, grad.iter().map(|g| -g).chain(std::iter::once(1.0)));
    let nn = normal.norm();
    let mut worst: f64 = 0.0;
    for x in ker {
        let s = (x.dot(&normal) / (x.norm() * nn)).abs().min(1.0);
        worst = worst.max(s.asin().to_degrees());
    }
    Some(worst)
}

/// Kernel-to-plane angles (degrees) below which the kernel counts as tangent
/// to the focal locus, and above which it counts as transverse. The probe
/// gradient is accurate to about `1e-5` degrees.
pub const ANGLE_TANGENT: f64 = 1e-3;
pub const ANGLE_TRANSVERSE: f64 = 1e-2;

/// Regularity and local form from probe data.
pub fn classify_regularity(
    frame: &JacobiFrame,
    t_star: f64,
    k: usize,
    probes: &[Probe],
    radius: f64,
) -> Result<(bool, LocalForm, f64)> {
    if probes.is_empty() {
        return Err(Error::InsufficientNeighbors(0));
    }
    let regular = probes
        .iter()
        .all(|p| p.window_zeros.len() == 1 && p.window_zeros[0].multiplicity == k);
    let angle = kernel_plane_angle(frame, t_star, k, probes, radius);
    let form = if k >= 2 {
        LocalForm::T1
    } else {
        match angle {
            Some(a) if a < ANGLE_TANGENT => LocalForm::T2,
            Some(a) if a > ANGLE_TRANSVERSE => LocalForm::T3,
            _ => LocalForm::Unclassified,
        }
    };
    Ok((regular, form, angle.unwrap_or(f64::NAN)))
}

/// The printed formula `g_v(v, A_v dπ x) / √λ_j` with `v = λ_j û`.
pub fn focal_derivative_formula(bundle: &NormalBundle, u: &[f64], lambda: f64, x: &[f64]) -> Result<f64> {
    let m = bundle.m();
    if m == 0 {
        return Ok(0.0);
    }
    let un = bundle.unit_normal(u)?;
    let sys = bundle.system();
    let v: Vec<f64> = un.vector.iter().map(|c| lambda * c).collect();
    let a = bundle.shape_operator(u, lambda)?;
    let tangents = bundle.submanifold().tangents(&u[..m]);
    let dpi = DVector::from_column_slice(&x[..m]);
    let ax = a * dpi;
    let w: Vec<f64> = (0..v.len())
        .map(|i| (0..m).map(|r| ax[r] * tangents[r][i]).sum())
        .collect();
    Ok(sys.inner(&un.base, &v, &v, &w) / lambda.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdDerivative {
    /// Richardson-extrapolated value.
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
    /// `|fine - coarse|`.
    pub self_consistency: f64,
}

/// `λ_j` along `u + s x` by central differences with steps `h` and `h/2`.
pub fn focal_derivative_fd(
    bundle: &NormalBundle,
    u: &[f64],
    j: usize,
    x: &[f64],
    h: f64,
    t_max: f64,
) -> Result<FdDerivative> {
    let lam = |s: f64| -> Result<f64> {
        let us: Vec<f64> = u.iter().zip(x).map(|(a, b)| a + s * b).collect();
        let f = JacobiFrame::new(bundle, &us, t_max)?;
        let l = focal_time(&detect_focal_times(&f, t_max, TIME_TOL)?, j);
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::HorizonTooSmall(t_max))
        }
    };
    let cd = |h: f64| -> Result<f64> { Ok((lam(h)? - lam(-h)?) / (2.0 * h)) };
    let coarse = cd(h)?;
    let fine = cd(0.5 * h)?;
    Ok(FdDerivative {
        value: (4.0 * fine - coarse) / 3.0,
        coarse,
        fine,
        self_consistency: (fine - coarse).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub u1: Vec<f64>,
    pub t1: f64,
    pub u2: Vec<f64>,
    pub t2: f64,
    pub image_distance: f64,
    pub separation: f64,
}

/// Two distinct points of `ν̂` near `t* û(u)` with the same image under `𝓔`.
pub fn non_injectivity_witness(frame: &JacobiFrame, t_star: f64, eps: f64, delta: f64) -> Result<Witness> {
    let bundle = frame.bundle();
    let u0 = frame.normal().u.clone();
    let c = u0.len();
    let jac = frame.chart_jacobian(t_star);
    let ker = kernel_basis(&jac, 1);
    let kv = ker
        .first()
        .ok_or_else(|| Error::WitnessNotFound("empty kernel".into()))?;
    let mut tried = Vec::new();
    for s in [0.5 * eps, eps, 0.25 * eps] {
        let z1: Vec<f64> = (0..=c)
            .map(|i| if i < c { u0[i] } else { t_star } + s * kv[i])
            .collect();
        let q = endpoint(bundle, &z1[..c], z1[c])?;
        let start: Vec<f64> = (0..=c)
            .map(|i| if i < c { u0[i] } else { t_star } - s * kv[i])
            .collect();
        let shot = solve_endpoint(bundle, &start[..c], start[c], &q, 1e-13, 60)?;
        let sep = shot
            .u
            .iter()
            .chain(std::iter::once(&shot.t))
            .zip(&z1)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        tried.push(format!(
            "s={s:e}: residual {:.3e}, separation {:.3e}",
            shot.residual, sep
        ));
        if shot.residual <= 1e-6 && sep >= delta {
            return Ok(Witness {
                u1: z1[..c].to_vec(),
                t1: z1[c],
                u2: shot.u,
                t2: shot.t,
                image_distance: shot.residual,
                separation: sep,
            });
        }
    }
    Err(Error::WitnessNotFound(tried.join("; ")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalSettings {
    pub t_max: f64,
    pub max_j: usize,
    pub tol: f64,
    pub probe_radius: f64,
    pub classify: bool,
}

impl Default for FocalSettings {
    fn default() -> Self {
        FocalSettings {
            t_max: 5.0,
            max_j: 2,
            tol: TIME_TOL,
            probe_radius: 1e-3,
            classify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayFocal {
    pub index: usize,
    pub u: Vec<f64>,
    pub normal: UnitNormal,
    pub zeros: Vec<FocalTime>,
    pub records: Vec<FocalRecord>,
    pub lambdas: Vec<f64>,
    pub warner: Vec<Option<WarnerReport>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalScan {
    pub t_max: f64,
    pub max_j: usize,
    pub rays: Vec<RayFocal>,
}

/// Focal data along one ray.
pub fn scan_ray(bundle: &NormalBundle, index: usize, u: &[f64], s: &FocalSettings) -> Result<RayFocal> {
    let frame = JacobiFrame::new(bundle, u, s.t_max)?;
    let zeros = detect_focal_times(&frame, s.t_max, s.tol)?;
    let mut records = Vec::new();
    let mut warner = Vec::new();
    let mut acc = 0;
    for z in &zeros {
        let (regular, form, angle, rep) = if s.classify {
            let rep = warner_checks(&frame, &zeros, z.time, s.probe_radius)?;
            let (reg, form, angle) = classify_regularity(&frame, z.time, z.multiplicity, &rep.probes, s.probe_radius)?;
            (reg, form, angle, Some(rep))
        } else {
            (false, LocalForm::Unclassified, f64::NAN, None)
        };
        records.push(FocalRecord {
            direction: frame.normal().clone(),
            time: z.time,
            multiplicity: z.multiplicity,
            order: acc + 1,
            regular,
            localform: form,
            det_radial_derivative: delta_radial_derivative(&frame, z.time, z.multiplicity),
            kernel_angle: angle,
            point: frame.flow().position(z.time),
        });
        warner.push(rep);
        acc += z.multiplicity;
    }
    let lambdas = (1..=s.max_j).map(|j| focal_time(&zeros, j)).collect();
    Ok(RayFocal {
        index,
        u: u.to_vec(),
        normal: frame.normal().clone(),
        zeros,
        records,
        lambdas,
        warner,
    })
}

/// Focal scan over the given rays, in parallel; results ordered by ray index.
pub fn focal_scan(bundle: &NormalBundle, rays: &[Vec<f64>], s: &FocalSettings) -> Result<FocalScan> {
    let rays: Vec<RayFocal> = rays
        .par_iter()
        .enumerate()
        .map(|(i, u)| scan_ray(bundle, i, u, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(FocalScan {
        t_max: s.t_max,
        max_j: s.max_j,
        rays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::GeodesicSystem;
    use crate::metric::MetricModel;
    use crate::submanifold::Submanifold;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn bundle(metric: MetricModel, sub: Submanifold, side: f64) -> NormalBundle {
        NormalBundle::new(Arc::new(GeodesicSystem::new(metric)), Arc::new(sub), side).unwrap()
    }

    fn circle(side: f64) -> NormalBundle {
        bundle(
            MetricModel::euclidean(2).unwrap(),
            Submanifold::circle(&[0.0, 0.0], 1.0).unwrap(),
            side,
        )
    }

    fn ellipse() -> NormalBundle {
        bundle(
            MetricModel::euclidean(2).unwrap(),
            Submanifold::ellipse(&[0.0, 0.0], 2.0, 1.0).unwrap(),
            1.0,
        )
    }

    fn sphere(sub: Submanifold) -> NormalBundle {
        bundle(
            MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 - 1", 2).unwrap(),
            sub,
            1.0,
        )
    }

    #[test]
    fn circle_focuses_once_at_radius() {
        let f = JacobiFrame::new(&circle(1.0), &[0.3], 3.0).unwrap();
        let z = detect_focal_times(&f, 3.0, TIME_TOL).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0].time - 1.0).abs() < 1e-9 && z[0].multiplicity == 1);
        let out = JacobiFrame::new(&circle(-1.0), &[0.3], 30.0).unwrap();
        assert!(detect_focal_times(&out, 30.0, TIME_TOL).unwrap().is_empty());
        assert!(focal_time(&[], 1).is_infinite());
    }

    #[test]
    fn equator_focal_times() {
        let f = JacobiFrame::new(
            &sphere(Submanifold::circle(&[0.0, 0.0, 0.0], 1.0).unwrap()),
            &[0.3],
            5.0,
        )
        .unwrap();
        let z = detect_focal_times(&f, 5.0, TIME_TOL).unwrap();
        assert_eq!(z.len(), 2);
        assert!((focal_time(&z, 1) - PI / 2.0).abs() < 1e-7);
        assert!((focal_time(&z, 2) - 1.5 * PI).abs() < 1e-7);
        assert_eq!(morse_index_from(&z, 2.0, TIME_TOL).unwrap(), 1);
    }

    #[test]
    fn point_source_index() {
        let f = JacobiFrame::new(&sphere(Submanifold::point(&[0.0, 0.0, 1.0])), &[0.3], 1.6 * PI).unwrap();
        assert_eq!(morse_index(&f, 1.5 * PI, TIME_TOL).unwrap(), 1);
        assert_eq!(morse_index(&f, 0.5, TIME_TOL).unwrap(), 0);
        assert!(matches!(morse_index(&f, PI, TIME_TOL), Err(Error::EndpointIsFocal(_))));
    }

    #[test]
    fn double_focal_point_in_three_dimensions() {
        let m = MetricModel::embedded_hypersurface("x0^2 + x1^2 + x2^2 + x3^2 - 1", 3).unwrap();
        let b = bundle(m, Submanifold::point(&[0.0, 0.0, 0.0, 1.0]), 1.0);
        let f = JacobiFrame::new(&b, &[1.0, 0.7], 4.0).unwrap();
        let z = detect_focal_times(&f, 4.0, TIME_TOL).unwrap();
        assert_eq!(z.len(), 1);
        assert_eq!(z[0].multiplicity, 2);
        assert!((z[0].time - PI).abs() < 1e-7);
    }

    #[test]
    fn ellipse_index_and_focal_time() {
        let f = JacobiFrame::new(&ellipse(), &[0.0], 3.0).unwrap();
        assert_eq!(morse_index(&f, 1.0, TIME_TOL).unwrap(), 1);
        let f = JacobiFrame::new(&ellipse(), &[PI / 4.0], 3.0).unwrap();
        let z = detect_focal_times(&f, 3.0, TIME_TOL).unwrap();
        let exact = (1.0f64 + 3.0 * 0.5).powf(1.5) / 2.0;
        assert!((z[0].time - exact).abs() < 1e-9);
    }

    #[test]
    fn delta_vanishes_at_focal_time() {
        let f = JacobiFrame::new(&circle(1.0), &[0.3], 3.0).unwrap();
        assert!(delta_value(&f, 1.0, 1).abs() < 1e-8);
        assert!(delta_value(&f, 0.5, 1).abs() > 0.1);
        assert!(delta_radial_derivative(&f, 1.0, 1).abs() > 0.5);
        assert!((delta_value(&f, 0.5, 3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circle_warner_and_classification() {
        let f = JacobiFrame::new(&circle(1.0), &[0.3], 3.0).unwrap();
        let z = detect_focal_times(&f, 3.0, TIME_TOL).unwrap();
        let rep = warner_checks(&f, &z, z[0].time, 1e-3).unwrap();
        assert!(rep.passes(1), "{rep:?}");
        let (reg, form, _) = classify_regularity(&f, z[0].time, 1, &rep.probes, 1e-3).unwrap();
        assert!(reg);
        assert_eq!(form, LocalForm::T2);
    }

    #[test]
    fn ellipse_fold_is_t3_with_witness() {
        let b = ellipse();
        let f = JacobiFrame::new(&b, &[PI / 4.0], 3.0).unwrap();
        let z = detect_focal_times(&f, 3.0, TIME_TOL).unwrap();
        let rep = warner_checks(&f, &z, z[0].time, 1e-3).unwrap();
        assert!(rep.passes(1), "{rep:?}");
        let (reg, form, angle) = classify_regularity(&f, z[0].time, 1, &rep.probes, 1e-3).unwrap();
        assert!(reg && form == LocalForm::T3, "{angle}");
        let w = non_injectivity_witness(&f, z[0].time, 1e-2, 1e-3).unwrap();
        assert!(w.image_distance <= 1e-6 && w.separation >= 1e-3, "{w:?}");
    }

    #[test]
    fn ellipse_focal_derivative() {
        let b = ellipse();
        let d = focal_derivative_fd(&b, &[PI / 4.0], 1, &[1.0], 1e-3, 3.0).unwrap();
        assert!((d.value - 3.5575554).abs() < 1e-4, "{d:?}");
        let p = focal_derivative_formula(&b, &[PI / 4.0], 1.9764235, &[1.0]).unwrap();
        assert!(p.abs() < 1e-12);
        let c = focal_derivative_fd(&circle(1.0), &[0.4], 1, &[1.0], 1e-3, 3.0).unwrap();
        assert!(c.value.abs() < 1e-6);
    }
}
