//! Reference solutions: time-stepping integration of the oscillator ODE and
//! direct discrete Volterra convolution.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::evaluate_total;
use crate::error::{Error, Result};
use crate::excitation::{sinusoid_poles, SampledSignal};
use crate::frf::{reconstruct_kernel, KernelCoefficients, OscillatorParams};
use crate::numeric::causal_trapezoid_convolution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with per-step error control.
    Rk45 {
        rtol: f64,
        atol: f64,
        min_step: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Output covers `[0, horizon)`.
    pub horizon: f64,
    pub output_dt: f64,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, horizon: f64, output_dt: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4 { dt },
            horizon,
            output_dt,
        }
    }

    pub fn rk45(rtol: f64, atol: f64, horizon: f64, output_dt: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk45 {
                rtol,
                atol,
                min_step: 1e-12,
            },
            horizon,
            output_dt,
        }
    }

    fn validate(&self) -> Result<usize> {
        if !(self.horizon > 0.0 && self.output_dt > 0.0) {
            return Err(Error::InvalidParameter(
                "integrator needs a positive horizon and output step".into(),
            ));
        }
        match self.method {
            Method::Rk4 { dt } if !(dt > 0.0) => {
                return Err(Error::InvalidParameter(format!("RK4 step must be positive, got {dt}")))
            }
            Method::Rk45 { rtol, atol, .. } if !(rtol > 0.0 && atol > 0.0) => {
                return Err(Error::InvalidParameter("RK45 tolerances must be positive".into()))
            }
            _ => {}
        }
        Ok((self.horizon / self.output_dt - 1e-9).ceil() as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
}

impl Trajectory {
    /// Columns `t, y, v`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y,v")?;
        for i in 0..self.times.len() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", self.times[i], self.y[i], self.v[i])?;
        }
        Ok(())
    }
}

fn rk4_step<const N: usize>(
    rhs: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    x: &[f64; N],
    h: f64,
) -> [f64; N] {
    let add = |a: &[f64; N], k: &[f64; N], s: f64| {
        let mut o = *a;
        for i in 0..N {
            o[i] += s * k[i];
        }
        o
    };
    let k1 = rhs(t, x);
    let k2 = rhs(t + 0.5 * h, &add(x, &k1, 0.5 * h));
    let k3 = rhs(t + 0.5 * h, &add(x, &k2, 0.5 * h));
    let k4 = rhs(t + h, &add(x, &k3, h));
    let mut o = *x;
    for i in 0..N {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

/// Fixed-step RK4 from rest, recording every `stride`-th step.
fn run_rk4<const N: usize>(
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
    dt: f64,
    output_dt: f64,
    n_out: usize,
) -> Result<Vec<[f64; N]>> {
    let stride = (output_dt / dt).round();
    if stride < 1.0 || (stride * dt - output_dt).abs() > 1e-9 * output_dt {
        return Err(Error::InvalidParameter(format!(
            "output step {output_dt} is not a multiple of the RK4 step {dt}"
        )));
    }
    let stride = stride as usize;
    let mut x = [0.0; N];
    let mut out = Vec::with_capacity(n_out);
    let mut step = 0usize;
    for k in 0..n_out {
        while step < k * stride {
            x = rk4_step(&rhs, step as f64 * dt, &x, dt);
            step += 1;
        }
        out.push(x);
    }
    Ok(out)
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince from rest; steps are clipped to land on output times.
fn run_rk45<const N: usize>(
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
    rtol: f64,
    atol: f64,
    min_step: f64,
    output_dt: f64,
    n_out: usize,
) -> Result<Vec<[f64; N]>> {
    let mut x = [0.0; N];
    let mut t = 0.0;
    let mut h = output_dt.min(1e-3);
    let mut out = Vec::with_capacity(n_out);
    out.push(x);
    for k in 1..n_out {
        let target = k as f64 * output_dt;
        while t < target - 1e-12 * target {
            let step = h.min(target - t);
            let mut ks = [[0.0; N]; 7];
            for s in 0..7 {
                let mut xs = x;
                for (j, kj) in ks.iter().enumerate().take(s) {
                    for i in 0..N {
                        xs[i] += step * DP_A[s][j] * kj[i];
                    }
                }
                ks[s] = rhs(t + DP_C[s] * step, &xs);
            }
            let mut x5 = x;
            let mut err: f64 = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for (sx, k) in ks.iter().enumerate() {
                    // the 5th-order weights are the last stage row (FSAL)
                    let b5 = if sx < 6 { DP_A[6][sx] } else { 0.0 };
                    x5[i] += step * b5 * k[i];
                    e += step * (b5 - DP_B4[sx]) * k[i];
                }
                let sc = atol + rtol * x[i].abs().max(x5[i].abs());
                err = err.max((e / sc).abs());
            }
            if err <= 1.0 {
                t += step;
                x = x5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
            if h < min_step {
                return Err(Error::StepUnderflow { t, min_step });
            }
        }
        out.push(x);
    }
    Ok(out)
}

fn oscillator_rhs<'a>(
    p: &'a OscillatorParams,
    f: &'a impl Fn(f64) -> f64,
) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + 'a {
    move |t, s| {
        let y = s[0];
        let v = s[1];
        [v, (f(t) - p.c * v - p.k1 * y - p.k2 * y * y - p.k3 * y * y * y) / p.m]
    }
}

/// Integrates `m y'' + c y' + k1 y + k2 y^2 + k3 y^3 = f(t)` from rest.
pub fn integrate(
    p: &OscillatorParams,
    f: impl Fn(f64) -> f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let n = cfg.validate()?;
    let rhs = oscillator_rhs(p, &f);
    let states = match cfg.method {
        Method::Rk4 { dt } => run_rk4(rhs, dt, cfg.output_dt, n)?,
        Method::Rk45 {
            rtol,
            atol,
            min_step,
        } => run_rk45(rhs, rtol, atol, min_step, cfg.output_dt, n)?,
    };
    Ok(Trajectory {
        times: (0..n).map(|k| k as f64 * cfg.output_dt).collect(),
        y: states.iter().map(|s| s[0]).collect(),
        v: states.iter().map(|s| s[1]).collect(),
    })
}

/// Exact Volterra orders `y1, y2, y3` from the perturbation hierarchy
/// `L y1 = f`, `L y2 = -k2 y1^2`, `L y3 = -2 k2 y1 y2 - k3 y1^3`
/// with `L = m d^2/dt^2 + c d/dt + k1`, integrated by RK4.
pub fn integrate_orders(
    p: &OscillatorParams,
    f: impl Fn(f64) -> f64,
    dt: f64,
    horizon: f64,
    output_dt: f64,
) -> Result<(Vec<f64>, [Vec<f64>; 3])> {
    let cfg = IntegratorConfig::rk4(dt, horizon, output_dt);
    let n = cfg.validate()?;
    let op = |y: f64, v: f64, force: f64| (force - p.c * v - p.k1 * y) / p.m;
    let rhs = |t: f64, s: &[f64; 6]| {
        let (y1, y2, y3) = (s[0], s[2], s[4]);
        [
            s[1],
            op(y1, s[1], f(t)),
            s[3],
            op(y2, s[3], -p.k2 * y1 * y1),
            s[5],
            op(y3, s[5], -2.0 * p.k2 * y1 * y2 - p.k3 * y1 * y1 * y1),
        ]
    };
    let states = run_rk4(rhs, dt, output_dt, n)?;
    let times = (0..n).map(|k| k as f64 * output_dt).collect();
    let col = |i: usize| states.iter().map(|s| s[i]).collect::<Vec<f64>>();
    Ok((times, [col(0), col(2), col(4)]))
}

/// Trapezoidal discrete Volterra convolution of orders 1 and (optionally) 2.
///
/// `h1[i] = h1(i dt)`; `h2` is row-major `h2(i dt, j dt)` of side `h2_side`.
/// Kernels must cover the record. Returns `[y1, y2]` (y2 zero without `h2`).
pub fn volterra_convolve(
    h1: &[f64],
    h2: Option<(&[f64], usize)>,
    f: &SampledSignal,
) -> Result<[Vec<f64>; 2]> {
    let n = f.len();
    if h1.len() < n {
        return Err(Error::HorizonOverflow(format!(
            "first-order kernel has {} samples, record has {n}",
            h1.len()
        )));
    }
    let dt = f.dt;
    let y1 = causal_trapezoid_convolution(h1, &f.samples, dt);
    let mut y2 = vec![0.0; n];
    if let Some((h2, side)) = h2 {
        if side < n || h2.len() != side * side {
            return Err(Error::HorizonOverflow(format!(
                "second-order kernel side {side} does not cover {n} samples"
            )));
        }
        let mut g = vec![0.0; n];
        for (k, y) in y2.iter_mut().enumerate().skip(1) {
            for i in 0..=k {
                let w = if i == 0 || i == k { 0.5 } else { 1.0 };
                g[i] = w * f.samples[k - i];
            }
            let mut acc = 0.0;
            for i in 0..=k {
                let row = &h2[i * side..i * side + k + 1];
                let inner: f64 = row.iter().zip(&g[..=k]).map(|(h, x)| h * x).sum();
                acc += g[i] * inner;
            }
            *y = acc * dt * dt;
        }
    }
    Ok([y1, y2])
}

/// One benchmark measurement; `seconds` is `None` when the configuration was skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub length: f64,
    pub points: usize,
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub lengths: Vec<f64>,
    pub output_dt: f64,
    pub rk4_dt: f64,
    /// Series order of the closed-form path.
    pub order: usize,
    /// Convolution (orders 1 and 2) is cubic in the point count; longer records are skipped.
    pub convolution_max_points: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            lengths: vec![10.0, 50.0, 100.0, 200.0, 400.0],
            output_dt: 0.01,
            rk4_dt: 1e-4,
            order: 3,
            convolution_max_points: 2000,
        }
    }
}

/// Wall-clock of the closed-form path, RK4 and discrete convolution for the
/// sinusoid `amplitude * sin(omega t)` over each length.
///
/// The closed-form time covers excitation residues, filter evaluation and
/// contraction with the given kernel coefficients.
pub fn benchmark(
    p: &OscillatorParams,
    coeffs: &[KernelCoefficients],
    amplitude: f64,
    omega: f64,
    cfg: &BenchConfig,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &len in &cfg.lengths {
        let n = (len / cfg.output_dt - 1e-9).ceil() as usize;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * cfg.output_dt).collect();

        let start = Instant::now();
        let exc = sinusoid_poles(amplitude, omega, len)?;
        let y = evaluate_total(coeffs, &exc, cfg.order, &times)?;
        let closed = start.elapsed().as_secs_f64();
        std::hint::black_box(&y);
        rows.push(BenchRow {
            method: "closed_form".into(),
            length: len,
            points: n,
            seconds: Some(closed),
        });

        let start = Instant::now();
        let traj = integrate(
            p,
            |t| amplitude * (omega * t).sin(),
            &IntegratorConfig::rk4(cfg.rk4_dt, len, cfg.output_dt),
        )?;
        std::hint::black_box(&traj);
        rows.push(BenchRow {
            method: "rk4".into(),
            length: len,
            points: n,
            seconds: Some(start.elapsed().as_secs_f64()),
        });

        let seconds = if n <= cfg.convolution_max_points && coeffs.len() >= 2 {
            let h1 = reconstruct_kernel(&coeffs[0], &times)?;
            let h2 = reconstruct_kernel(&coeffs[1], &times)?;
            let f = SampledSignal::from_fn(n, cfg.output_dt, |t| amplitude * (omega * t).sin())?;
            let start = Instant::now();
            let y = volterra_convolve(&h1, Some((&h2, n)), &f)?;
            std::hint::black_box(&y);
            Some(start.elapsed().as_secs_f64())
        } else {
            None
        };
        rows.push(BenchRow {
            method: "convolution".into(),
            length: len,
            points: n,
            seconds,
        });
    }
    Ok(rows)
}

/// Report rows `method,length,points,seconds` (empty seconds when skipped).
pub fn write_benchmark<W: Write>(rows: &[BenchRow], mut w: W) -> Result<()> {
    writeln!(w, "method,length,points,seconds")?;
    for r in rows {
        match r.seconds {
            Some(s) => writeln!(w, "{},{:e},{},{:.6e}", r.method, r.length, r.points, s)?,
            None => writeln!(w, "{},{:e},{},", r.method, r.length, r.points)?,
        }
    }
    Ok(())
}
