//! Dormand–Prince 5(4) with Hairer's 4th-order-accurate continuous extension.
//!
//! Written here rather than pulled from a crate because geodesics on level sets
//! need a projection hook between accepted steps and every caller needs the
//! dense interpolant.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    /// Pull an accepted state back onto a constraint set. Returns true when
    /// the state was modified.
    fn project(&self, _y: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 200_000,
            h_max: f64::INFINITY,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Piecewise quintic-in-time dense solution.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t0: f64,
    /// Step start times, plus the final time as last entry.
    knots: Vec<f64>,
    /// Five continuous-extension coefficient blocks per step.
    coeffs: Vec<f64>,
    y_end: Vec<f64>,
    n_rhs: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn t_start(&self) -> f64 {
        self.t0
    }
    pub fn t_end(&self) -> f64 {
        *self.knots.last().unwrap()
    }
    pub fn steps(&self) -> usize {
        self.knots.len() - 1
    }
    pub fn rhs_evaluations(&self) -> usize {
        self.n_rhs
    }
    pub fn y_end(&self) -> &[f64] {
        &self.y_end
    }

    /// Evaluate at `t`, clamped to the integration span.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let t = t.clamp(self.t0, self.t_end());
        let nsteps = self.steps();
        if nsteps == 0 {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let k = match self.knots[..nsteps].binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let t_a = self.knots[k];
        let h = self.knots[k + 1] - t_a;
        let th = (t - t_a) / h;
        let th1 = 1.0 - th;
        let d = self.dim;
        let base = k * 5 * d;
        let r = &self.coeffs[base..base + 5 * d];
        for i in 0..d {
            out[i] = r[i] + th * (r[d + i] + th1 * (r[2 * d + i] + th * (r[3 * d + i] + th1 * r[4 * d + i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let mut s = 0.0;
    for i in 0..y0.len() {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        s += (err[i] / sc).powi(2);
    }
    (s / y0.len() as f64).sqrt()
}

/// Integrate `sys` from `(t0, y0)` to `t1 > t0`.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
) -> Result<DenseSolution> {
    let d = sys.dim();
    assert_eq!(y0.len(), d);
    let mut y = y0.to_vec();
    sys.project(&mut y);
    let mut sol = DenseSolution {
        dim: d,
        t0,
        knots: vec![t0],
        coeffs: Vec::new(),
        y_end: y.clone(),
        n_rhs: 0,
    };
    if t1 <= t0 {
        return Ok(sol);
    }
    let span = t1 - t0;
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut k5 = vec![0.0; d];
    let mut k6 = vec![0.0; d];
    let mut k7 = vec![0.0; d];
    let mut ys = vec![0.0; d];
    let mut y1 = vec![0.0; d];
    let mut err = vec![0.0; d];
    let mut t = t0;
    sys.rhs(t, &y, &mut k1);
    sol.n_rhs += 1;

    // initial step (Hairer, Norsett & Wanner, II.4)
    let mut h = {
        let sc = |i: usize| opts.atol + opts.rtol * y[i].abs();
        let d0 = (0..d).map(|i| (y[i] / sc(i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..d).map(|i| (k1[i] / sc(i)).powi(2)).sum::<f64>().sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for i in 0..d {
            ys[i] = y[i] + h0 * k1[i];
        }
        sys.rhs(t + h0, &ys, &mut k2);
        sol.n_rhs += 1;
        let d2 = (0..d).map(|i| ((k2[i] - k1[i]) / sc(i)).powi(2)).sum::<f64>().sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(opts.h_max)
    };

    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let mut steps = 0;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::TooManySteps(steps));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        let last = t + h >= t1 - 1e-14 * span;
        if last {
            h = t1 - t;
        }
        steps += 1;
        for i in 0..d {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, &ys, &mut k2);
        for i in 0..d {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, &ys, &mut k3);
        for i in 0..d {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, &ys, &mut k4);
        for i in 0..d {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, &ys, &mut k5);
        for i in 0..d {
            ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, &ys, &mut k6);
        for i in 0..d {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + h, &y1, &mut k7);
        sol.n_rhs += 6;
        for i in 0..d {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&y, &y1, &err, opts);
        // PI step control with the usual DOPRI5 constants
        let fac11 = en.powf(0.2 - 0.04 * 0.75);
        let mut fac = fac11 / facold.powf(0.04);
        fac = (fac / 0.9).clamp(1.0 / 10.0, 1.0 / 0.2);
        let hnew = h / fac;
        if en <= 1.0 {
            facold = en.max(1e-4);
            let base = sol.coeffs.len();
            sol.coeffs.resize(base + 5 * d, 0.0);
            let r = &mut sol.coeffs[base..];
            for i in 0..d {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                r[i] = y[i];
                r[d + i] = ydiff;
                r[2 * d + i] = bspl;
                r[3 * d + i] = ydiff - h * k7[i] - bspl;
                r[4 * d + i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            t = if last { t1 } else { t + h };
            sol.knots.push(t);
            y.copy_from_slice(&y1);
            if sys.project(&mut y) {
                sys.rhs(t, &y, &mut k1);
                sol.n_rhs += 1;
            } else {
                k1.copy_from_slice(&k7);
            }
            let hnew = if reject { hnew.min(h) } else { hnew };
            reject = false;
            h = hnew.min(opts.h_max);
        } else {
            reject = true;
            h /= (fac11 / 0.9).min(1.0 / 0.2);
        }
    }
    sol.y_end = y;
    Ok(sol)
}
