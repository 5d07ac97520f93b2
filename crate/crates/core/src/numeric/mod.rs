//! Small numerical helpers shared across modules.

pub mod dd;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Root-mean-square of a series (0 for an empty slice).
pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// RMS of `a - b`.
pub fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "series length mismatch");
    if a.is_empty() {
        return 0.0;
    }
    (a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64)
        .sqrt()
}

/// RMS of `a - reference` divided by RMS of `reference`.
pub fn relative_rms(a: &[f64], reference: &[f64]) -> f64 {
    let den = rms(reference);
    let num = rms_diff(a, reference);
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Uniform grid `t_k = k * dt` for `k = 0..n`.
pub fn uniform_grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

/// Composite trapezoidal rule on uniformly spaced samples.
pub fn trapezoid(y: &[f64], dt: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => dt * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1])),
    }
}

/// Causal trapezoidal convolution `(h * f)(t_n) ~ int_0^{t_n} h(tau) f(t_n - tau) dtau`
/// for uniformly sampled `h` and `f` starting at t = 0, evaluated via FFT.
///
/// Returns one value per sample of `f`. Samples of `h` beyond the length of
/// `f` are never needed.
pub fn causal_trapezoid_convolution(h: &[f64], f: &[f64], dt: f64) -> Vec<f64> {
    let n = f.len();
    if n == 0 {
        return Vec::new();
    }
    let h = &h[..h.len().min(n)];
    let full = linear_convolution(h, f);
    (0..n)
        .map(|k| {
            let mut s = full[k];
            // endpoint half-weights of the trapezoid
            s -= 0.5 * h[0] * f[k];
            let hk = if k < h.len() { h[k] } else { 0.0 };
            s -= 0.5 * hk * f[0];
            if k == 0 {
                0.0
            } else {
                dt * s
            }
        })
        .collect()
}

/// Full linear convolution of two real sequences via zero-padded FFT.
pub fn linear_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex64> = a
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut fb: Vec<Complex64> = b
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.iter().take(len).map(|z| z.re * scale).collect()
}

/// Log-factorials `ln(k!)` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact binomial coefficient as f64 (exact while the value fits in 53 bits).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}
