//! Scalars for generic evaluation of metric and level-set expressions.
//!
//! Everything that the metric layer differentiates is written once against
//! [`Scalar`] and evaluated either on plain `f64` or on a [`Jet`]. A jet is an
//! element of the truncated algebra `R[e0, e1, e2, e3] / (e_i^2)`: every
//! generator squares to zero, so the coefficient of `e0*e1` after evaluating
//! `f(x + e0*u + e1*w)` is exactly the mixed directional second derivative
//! `D^2 f(x)[u, w]`, with no truncation error.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Number of nilpotent generators carried by a [`Jet`].
pub const MAX_GENERATORS: usize = 4;
const WIDTH: usize = 1 << MAX_GENERATORS;

pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Real part (the value at the expansion point).
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn atan(self) -> Self;
    fn tanh(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn powi(self, n: i32) -> Self;
    /// `|x|`, smooth away from zero; the sign of the real part decides the branch.
    fn abs(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Truncated Taylor jet in up to four nilpotent generators.
///
/// Coefficient `c[mask]` multiplies the monomial `prod_{i in mask} e_i`.
/// `active` is the number of generators in use; arithmetic only touches the
/// first `2^active` coefficients.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; WIDTH],
    active: u8,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet").field("c", &&self.c[..1 << self.active]).finish()
    }
}

impl Jet {
    pub fn constant(x: f64) -> Self {
        let mut c = [0.0; WIDTH];
        c[0] = x;
        Jet { c, active: 0 }
    }

    /// `x + sum_i d[i] * e_i`.
    pub fn seeded(x: f64, d: &[f64]) -> Self {
        assert!(d.len() <= MAX_GENERATORS);
        let mut j = Jet::constant(x);
        for (i, &di) in d.iter().enumerate() {
            j.c[1 << i] = di;
        }
        j.active = d.len() as u8;
        j
    }

    /// Jet with explicit leading coefficients `c[mask]`.
    pub fn from_coeffs(c: &[f64], active: usize) -> Self {
        assert!(active <= MAX_GENERATORS && c.len() <= 1 << active);
        let mut j = Jet::constant(0.0);
        j.c[..c.len()].copy_from_slice(c);
        j.active = active as u8;
        j
    }

    /// Coefficient of the monomial indexed by `mask` (bit i = generator i).
    pub fn coeff(&self, mask: usize) -> f64 {
        self.c[mask]
    }

    pub fn active(&self) -> usize {
        self.active as usize
    }

    fn width(self, other: &Jet) -> (u8, usize) {
        let a = self.active.max(other.active);
        (a, 1 << a)
    }

    /// Compose an analytic function given its derivatives `d[m] = f^(m)(x0)`.
    fn compose(self, d: [f64; MAX_GENERATORS + 1]) -> Self {
        let w = 1usize << self.active;
        let mut nil = self;
        nil.c[0] = 0.0;
        let mut out = Jet::constant(d[0]);
        out.active = self.active;
        // power = nil^m / m!
        let mut power = Jet::constant(1.0);
        power.active = self.active;
        for (m, dm) in d.iter().enumerate().skip(1) {
            if m > self.active as usize {
                break;
            }
            power *= nil;
            let inv = 1.0 / factorial(m);
            for k in 1..w {
                out.c[k] += dm * power.c[k] * inv;
            }
        }
        out
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let (active, w) = self.width(&rhs);
        let mut c = self.c;
        for k in 0..w {
            c[k] += rhs.c[k];
        }
        Jet { c, active }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let (active, w) = self.width(&rhs);
        let mut c = self.c;
        for k in 0..w {
            c[k] -= rhs.c[k];
        }
        Jet { c, active }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let (active, w) = self.width(&rhs);
        let mut c = [0.0; WIDTH];
        for i in 0..w {
            let a = self.c[i];
            if a == 0.0 {
                continue;
            }
            let free = (w - 1) & !i;
            // iterate over all submasks j of `free`
            let mut j = free;
            loop {
                c[i | j] += a * rhs.c[j];
                if j == 0 {
                    break;
                }
                j = (j - 1) & free;
            }
        }
        Jet { c, active }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut c = self.c;
        for v in c.iter_mut() {
            *v = -*v;
        }
        Jet { c, active: self.active }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for v in self.c.iter_mut() {
            *v *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Jet {
    pub fn recip(self) -> Jet {
        let x = self.c[0];
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r.powi(4), 24.0 * r.powi(5)])
    }
}

impl Scalar for Jet {
    fn from_f64(x: f64) -> Self {
        Jet::constant(x)
    }
    fn re(&self) -> f64 {
        self.c[0]
    }
    fn sqrt(self) -> Self {
        let x = self.c[0];
        let s = x.sqrt();
        self.compose([
            s,
            0.5 / s,
            -0.25 / (x * s),
            0.375 / (x * x * s),
            -0.9375 / (x * x * x * s),
        ])
    }
    fn exp(self) -> Self {
        let e = self.c[0].exp();
        self.compose([e; 5])
    }
    fn ln(self) -> Self {
        let x = self.c[0];
        let r = 1.0 / x;
        self.compose([x.ln(), r, -r * r, 2.0 * r.powi(3), -6.0 * r.powi(4)])
    }
    fn sin(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c, s])
    }
    fn cos(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s, c])
    }
    fn tan(self) -> Self {
        self.sin() / self.cos()
    }
    fn atan(self) -> Self {
        let x = self.c[0];
        let q = 1.0 + x * x;
        self.compose([
            x.atan(),
            1.0 / q,
            -2.0 * x / (q * q),
            (6.0 * x * x - 2.0) / q.powi(3),
            24.0 * x * (1.0 - x * x) / q.powi(4),
        ])
    }
    fn tanh(self) -> Self {
        let t = self.c[0].tanh();
        let s = 1.0 - t * t;
        self.compose([
            t,
            s,
            -2.0 * t * s,
            s * (6.0 * t * t - 2.0),
            s * t * (16.0 - 24.0 * t * t),
        ])
    }
    fn powf(self, p: f64) -> Self {
        let x = self.c[0];
        let mut d = [0.0; 5];
        let mut coef = 1.0;
        for (m, dm) in d.iter_mut().enumerate() {
            *dm = coef * x.powf(p - m as f64);
            coef *= p - m as f64;
        }
        self.compose(d)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => {
                let mut one = Jet::constant(1.0);
                one.active = self.active;
                one
            }
            1 => self,
            2 => self * self,
            n if n < 0 => self.powi(-n).recip(),
            n => {
                let half = self.powi(n / 2);
                let sq = half * half;
                if n % 2 == 1 {
                    sq * self
                } else {
                    sq
                }
            }
        }
    }
    fn abs(self) -> Self {
        if self.c[0] < 0.0 {
            -self
        } else {
            self
        }
    }
}
