//! Orthonormal Laguerre functions
//! `l_p(t) = sqrt(2a) * (-1)^p * L_p(2at) * exp(-at)` and their transforms.
//!
//! The Laplace transform has a single repeated pole at `-a`:
//! `l~_p(s) = sum_k b_p(k) / (s + a)^(k+1)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::dd::{Dd, DdComplex};
use crate::numeric::{binomial, ln_factorials};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaguerreBasis {
    /// Damping rate (1/s).
    pub a: f64,
    /// Highest order, inclusive.
    pub order: usize,
}

impl LaguerreBasis {
    pub fn new(a: f64, order: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Laguerre rate must be positive, got {a}"
            )));
        }
        Ok(LaguerreBasis { a, order })
    }

    /// Number of basis functions, `order + 1`.
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check_order(&self, p: usize) -> Result<()> {
        if p > self.order {
            return Err(Error::InvalidParameter(format!(
                "order {p} exceeds basis order {}",
                self.order
            )));
        }
        Ok(())
    }

    /// Values `l_0(t) .. l_p(t)` at a single time, by three-term recurrence.
    pub fn eval_upto(&self, p: usize, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let x = 2.0 * self.a * t;
        let scale = (2.0 * self.a).sqrt();
        let mut out = Vec::with_capacity(p + 1);
        // phi_n = L_n(x) e^{-x/2}
        let mut prev = 0.0;
        let mut cur = (-0.5 * x).exp();
        for n in 0..=p {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            out.push(sign * scale * cur);
            let nf = n as f64;
            let next = ((2.0 * nf + 1.0 - x) * cur - nf * prev) / (nf + 1.0);
            prev = cur;
            cur = next;
        }
        Ok(out)
    }

    /// `l_p` on a time grid.
    pub fn eval_time(&self, p: usize, times: &[f64]) -> Result<Vec<f64>> {
        self.check_order(p)?;
        times
            .iter()
            .map(|&t| self.eval_upto(p, t).map(|v| v[p]))
            .collect()
    }

    /// Matrix with one row per time and one column per order `0..=order`.
    pub fn eval_matrix(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(times.len(), self.len());
        for (i, &t) in times.iter().enumerate() {
            let row = self.eval_upto(self.order, t)?;
            for (j, v) in row.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Repeated-pole coefficients `b_p(k) = (-1)^(p-k) C(p,k) (2a)^(k+1/2)`, `k = 0..=p`.
    pub fn laplace_coeffs(&self, p: usize) -> Result<Vec<f64>> {
        self.check_order(p)?;
        let lf = ln_factorials(p);
        let ln2a = (2.0 * self.a).ln();
        Ok((0..=p)
            .map(|k| {
                let mag = (lf[p] - lf[k] - lf[p - k] + (k as f64 + 0.5) * ln2a).exp();
                if (p - k) % 2 == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect())
    }

    /// `b_p(k)` in double-double precision (exact binomials).
    pub fn laplace_coeffs_dd(&self, p: usize) -> Result<Vec<Dd>> {
        self.check_order(p)?;
        let two_a = Dd::new(2.0 * self.a);
        let root = two_a.sqrt();
        Ok((0..=p)
            .map(|k| {
                let v = Dd::new(binomial(p, k)) * two_a.powi(k as u32) * root;
                if (p - k) % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect())
    }

    /// `l~_p(s)` summed from the repeated-pole expansion in double-double.
    ///
    /// The expansion cancels heavily for large `p`; plain f64 summation loses
    /// about `log10(C(p, p/2))` digits.
    pub fn pole_expansion(&self, p: usize, s: Complex64) -> Result<Complex64> {
        let b = self.laplace_coeffs_dd(p)?;
        let inv = (DdComplex::from(s) + DdComplex::from(Complex64::new(self.a, 0.0))).recip();
        let mut acc = DdComplex::ZERO;
        // Horner in 1/(s+a)
        for bk in b.iter().rev() {
            acc = (acc + DdComplex::new(*bk, Dd::ZERO)) * inv;
        }
        Ok(acc.to_c64())
    }

    /// Gram matrix `int_0^T l_p l_q dt` by the trapezoid rule with the
    /// first Euler-Maclaurin endpoint correction. The horizon grows with
    /// order, `T = (40 + 10 * order) / a`.
    pub fn gram_matrix(&self, dt: f64) -> Result<DMatrix<f64>> {
        let horizon = (40.0 + 10.0 * self.order as f64) / self.a;
        let n = (horizon / dt).ceil() as usize;
        let r = self.len();
        let mut g = DMatrix::<f64>::zeros(r, r);
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let v = self.eval_upto(self.order, i as f64 * dt)?;
            for p in 0..r {
                let wp = w * v[p];
                for q in p..r {
                    g[(p, q)] += wp * v[q];
                }
            }
        }
        // l_p'(0) = -(-1)^p sqrt(2a) a (2p+1); the far end has decayed
        let scale = (2.0 * self.a).sqrt();
        let d0: Vec<f64> = (0..r)
            .map(|p| {
                let s = if p % 2 == 0 { 1.0 } else { -1.0 };
                -s * scale * self.a * (2 * p + 1) as f64
            })
            .collect();
        let l0: Vec<f64> = (0..r)
            .map(|p| if p % 2 == 0 { scale } else { -scale })
            .collect();
        for p in 0..r {
            for q in p..r {
                let deriv0 = d0[p] * l0[q] + l0[p] * d0[q];
                let v = g[(p, q)] * dt + dt * dt / 12.0 * deriv0;
                g[(p, q)] = v;
                g[(q, p)] = v;
            }
        }
        Ok(g)
    }

    /// `l~_p(s)` in the factored form `sqrt(2a)/(s+a) * ((a-s)/(s+a))^p`.
    pub fn laplace(&self, p: usize, s: Complex64) -> Complex64 {
        let a = Complex64::new(self.a, 0.0);
        let d = s + a;
        (2.0 * self.a).sqrt() / d * ((a - s) / d).powu(p as u32)
    }

    /// `l~_p(i w)` on a frequency grid.
    pub fn eval_frequency(&self, p: usize, omegas: &[f64]) -> Result<Vec<Complex64>> {
        self.check_order(p)?;
        Ok(omegas
            .iter()
            .map(|&w| self.laplace(p, Complex64::new(0.0, w)))
            .collect())
    }

    /// All orders at one complex frequency `s`, by repeated multiplication.
    pub fn laplace_all(&self, s: Complex64) -> Vec<Complex64> {
        let a = Complex64::new(self.a, 0.0);
        let d = s + a;
        let ratio = (a - s) / d;
        let mut cur = (2.0 * self.a).sqrt() / d;
        let mut out = Vec::with_capacity(self.len());
        for _ in 0..=self.order {
            out.push(cur);
            cur *= ratio;
        }
        out
    }
}
