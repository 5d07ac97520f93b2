//! Double-double arithmetic (about 32 significant digits).
//!
//! Only the handful of operations needed to evaluate badly cancelling finite
//! sums accurately: the repeated-pole coefficients of high-order Laguerre
//! filters and the extended-precision reference sums used by the tests.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn new(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Square root by one Newton step on the f64 estimate.
    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::new(self.hi.sqrt());
        }
        let x = self.hi.sqrt();
        let xx = Dd::new(x) * Dd::new(x);
        let corr = (self - xx).to_f64() / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, corr);
        Dd { hi, lo }
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut acc = Dd::ONE;
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::new(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::new(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub const ZERO: DdComplex = DdComplex {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };

    pub fn new(re: Dd, im: Dd) -> Self {
        DdComplex { re, im }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn scale(self, s: Dd) -> Self {
        DdComplex {
            re: self.re * s,
            im: self.im * s,
        }
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn recip(self) -> Self {
        let d = self.norm_sqr();
        DdComplex {
            re: self.re / d,
            im: -(self.im / d),
        }
    }
}

impl From<Complex64> for DdComplex {
    fn from(z: Complex64) -> Self {
        DdComplex {
            re: Dd::new(z.re),
            im: Dd::new(z.im),
        }
    }
}

impl Add for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        DdComplex {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Sub for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        DdComplex {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl Neg for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn neg(self) -> Self {
        DdComplex {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for DdComplex {
    type Output = DdComplex;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        DdComplex {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

impl Div for DdComplex {
    type Output = DdComplex;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_bits_lost_in_f64() {
        // (1 + 2^-60) - 1 vanishes in f64
        let a = Dd::new(1.0) + Dd::new(2f64.powi(-60));
        let d = a - Dd::ONE;
        assert_eq!(d.to_f64(), 2f64.powi(-60));
    }

    #[test]
    fn division_and_sqrt_round_trip() {
        let x = Dd::new(2.0).sqrt();
        let back = x * x;
        assert!((back - Dd::new(2.0)).to_f64().abs() < 1e-30);
        let third = Dd::ONE / Dd::new(3.0);
        let r = third * Dd::new(3.0) - Dd::ONE;
        assert!(r.to_f64().abs() < 1e-31);
    }

    #[test]
    fn complex_reciprocal() {
        let z = DdComplex::from(Complex64::new(2.0, 3.0));
        let w = z * z.recip();
        assert!((w.re - Dd::ONE).to_f64().abs() < 1e-30);
        assert!(w.im.to_f64().abs() < 1e-30);
    }
}
