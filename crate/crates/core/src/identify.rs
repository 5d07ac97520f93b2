//! Least-squares identification of first- and second-order Laguerre
//! coefficients from an input/output record.
//!
//! The model is `y = sum_p c_p x_p + sum_{p,q} c_pq x_p x_q` with `x_p` the
//! input filtered by `l_p`. Each unordered pair `p < q` gets one design column
//! `x_p x_q` whose fitted weight is `2 c_pq`; it is split evenly between
//! `c_pq` and `c_qp` so the tensor is symmetric and comparable entry-wise with
//! projected coefficients.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use serde::{Deserialize, Serialize};

use crate::engine::{evaluate_response, ResponseSeries};
use crate::error::{Error, Result};
use crate::excitation::{
    prony_ss, read_numeric_columns, uniform_step, white_noise, ExponentialSignal, PronyFit,
    RankSelection, SampledSignal,
};
use crate::frf::{KernelCoefficients, OscillatorParams};
use crate::laguerre::LaguerreBasis;
use crate::numeric::{causal_trapezoid_convolution, rms};
use crate::oracle::{integrate, IntegratorConfig};

/// Simultaneous input and output samples on a uniform grid from t = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct IoRecord {
    pub input: SampledSignal,
    pub output: Vec<f64>,
}

impl IoRecord {
    pub fn new(input: SampledSignal, output: Vec<f64>) -> Result<Self> {
        if input.len() != output.len() {
            return Err(Error::LengthMismatch(format!(
                "{} input samples but {} output samples",
                input.len(),
                output.len()
            )));
        }
        if output.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite output sample".into()));
        }
        Ok(IoRecord { input, output })
    }

    pub fn dt(&self) -> f64 {
        self.input.dt
    }

    pub fn len(&self) -> usize {
        self.output.len()
    }

    pub fn is_empty(&self) -> bool {
        self.output.is_empty()
    }

    /// Three-column `t,f,y` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,f,y")?;
        for (k, (f, y)) in self.input.samples.iter().zip(&self.output).enumerate() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", k as f64 * self.dt(), f, y)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let cols = read_numeric_columns(r, 3)?;
        let dt = uniform_step(&cols[0])?;
        IoRecord::new(SampledSignal::new(cols[1].clone(), dt)?, cols[2].clone())
    }
}

/// `x_p(t_i)` for `p = 0..=R` by trapezoidal causal convolution; one column per order.
pub fn regressors(f: &SampledSignal, basis: &LaguerreBasis) -> Result<DMatrix<f64>> {
    let l = basis.eval_matrix(&f.times())?;
    let mut x = DMatrix::zeros(f.len(), basis.len());
    for p in 0..basis.len() {
        let col: Vec<f64> = l.column(p).iter().copied().collect();
        let conv = causal_trapezoid_convolution(&col, &f.samples, f.dt);
        x.set_column(p, &DVector::from_vec(conv));
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Series order, 1 or 2.
    pub order: usize,
    /// Tikhonov weight on the equilibrated coefficients; 0 is plain least squares.
    pub ridge: f64,
    /// Relative pivot size below which the design counts as rank deficient.
    pub rank_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            order: 2,
            ridge: 0.0,
            rank_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// `coeffs[n]` has order `n + 1`.
    pub coeffs: Vec<KernelCoefficients>,
    pub residual_rms: f64,
    /// Residual RMS over output RMS.
    pub relative_residual: f64,
}

/// Design matrix: `x_p` columns, then `x_p x_q` for `p <= q` (order 2 only).
pub fn design_matrix(x: &DMatrix<f64>, order: usize) -> DMatrix<f64> {
    let r = x.ncols();
    let quad = if order >= 2 { r * (r + 1) / 2 } else { 0 };
    let mut d = DMatrix::zeros(x.nrows(), r + quad);
    d.columns_mut(0, r).copy_from(x);
    let mut j = r;
    if order >= 2 {
        for p in 0..r {
            for q in p..r {
                let col = x.column(p).component_mul(&x.column(q));
                d.set_column(j, &col);
                j += 1;
            }
        }
    }
    d
}

/// Fits orders 1..=`opts.order` to the record by column-equilibrated QR.
pub fn fit(record: &IoRecord, basis: &LaguerreBasis, opts: FitOptions) -> Result<FitResult> {
    if opts.order == 0 || opts.order > 2 {
        return Err(Error::OrderMismatch(format!(
            "identification supports orders 1 and 2, got {}",
            opts.order
        )));
    }
    let x = regressors(&record.input, basis)?;
    let mut d = design_matrix(&x, opts.order);
    let cols = d.ncols();
    if record.len() < 2 * cols {
        return Err(Error::InvalidParameter(format!(
            "{} samples are too few for {cols} unknowns",
            record.len()
        )));
    }
    let norms: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
    if norms.iter().all(|&n| n == 0.0) {
        // no excitation: only the zero model is consistent with any output
        if record.output.iter().any(|v| *v != 0.0) {
            return Err(Error::RankDeficient { rank: 0, cols });
        }
        return Ok(FitResult {
            coeffs: unpack(&vec![0.0; cols], basis, opts.order),
            residual_rms: 0.0,
            relative_residual: 0.0,
        });
    }
    for (j, &n) in norms.iter().enumerate() {
        if n > 0.0 {
            d.column_mut(j).scale_mut(1.0 / n);
        }
    }
    let mut rhs = DVector::from_column_slice(&record.output);
    if opts.ridge > 0.0 {
        let n = d.nrows();
        d = d.insert_rows(n, cols, 0.0);
        for j in 0..cols {
            d[(n + j, j)] = opts.ridge.sqrt();
        }
        rhs = rhs.insert_rows(n, cols, 0.0);
    }
    let qr = d.qr();
    let r = qr.r();
    let pivots: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let top = pivots.iter().copied().fold(0.0, f64::max);
    let rank = pivots.iter().filter(|&&v| v > opts.rank_tol * top).count();
    if rank < cols {
        return Err(Error::RankDeficient { rank, cols });
    }
    qr.q_tr_mul(&mut rhs);
    let mut theta = r
        .solve_upper_triangular(&rhs.rows(0, cols).into_owned())
        .ok_or(Error::RankDeficient { rank, cols })?;
    for (j, &n) in norms.iter().enumerate() {
        theta[j] = if n > 0.0 { theta[j] / n } else { 0.0 };
    }
    let dx = design_matrix(&x, opts.order);
    let fitted = &dx * &theta;
    let resid: Vec<f64> = fitted.iter().zip(&record.output).map(|(a, b)| a - b).collect();
    let residual_rms = rms(&resid);
    let out_rms = rms(&record.output);
    Ok(FitResult {
        coeffs: unpack(theta.as_slice(), basis, opts.order),
        residual_rms,
        relative_residual: if out_rms > 0.0 { residual_rms / out_rms } else { 0.0 },
    })
}

fn unpack(theta: &[f64], basis: &LaguerreBasis, order: usize) -> Vec<KernelCoefficients> {
    let r = basis.len();
    let mut c1 = KernelCoefficients::zeros_uniform(*basis, 1);
    c1.data.copy_from_slice(&theta[..r]);
    let mut out = vec![c1];
    if order >= 2 {
        let mut c2 = KernelCoefficients::zeros_uniform(*basis, 2);
        let mut j = r;
        for p in 0..r {
            for q in p..r {
                if p == q {
                    c2.set(&[p, p], theta[j]);
                } else {
                    c2.set(&[p, q], 0.5 * theta[j]);
                    c2.set(&[q, p], 0.5 * theta[j]);
                }
                j += 1;
            }
        }
        out.push(c2);
    }
    out
}

/// Model output `sum c_p x_p + sum c_pq x_p x_q` from sampled regressors.
pub fn synthesize(x: &DMatrix<f64>, coeffs: &[KernelCoefficients]) -> Vec<f64> {
    let mut y = vec![0.0; x.nrows()];
    for c in coeffs {
        match c.order {
            1 => {
                let v = x * DVector::from_column_slice(&c.data);
                for (a, b) in y.iter_mut().zip(v.iter()) {
                    *a += b;
                }
            }
            2 => {
                let m = c.as_matrix().expect("order-2 tensor");
                let xc = x * m;
                for (i, a) in y.iter_mut().enumerate() {
                    *a += xc.row(i).dot(&x.row(i));
                }
            }
            _ => {}
        }
    }
    y
}

/// Closed-form response of fitted coefficients to an excitation in pole-residue form.
pub fn predict(
    coeffs: &[KernelCoefficients],
    exc: &ExponentialSignal,
    times: &[f64],
) -> Result<ResponseSeries> {
    evaluate_response(coeffs, exc, coeffs.len(), times)
}

/// Prony-decomposes a sampled input and predicts on its sample grid.
pub fn predict_sampled(
    coeffs: &[KernelCoefficients],
    f: &SampledSignal,
    rank: RankSelection,
) -> Result<(PronyFit, ResponseSeries)> {
    let fit = prony_ss(f, rank)?;
    let series = predict(coeffs, &fit.signal, &f.times())?;
    Ok((fit, series))
}

/// White-noise excitation record for identification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecordConfig {
    /// Two-sided spectral height.
    pub s0: f64,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    /// RK4 step; the input is linearly interpolated between samples.
    pub integrator_dt: f64,
}

impl Default for NoiseRecordConfig {
    fn default() -> Self {
        NoiseRecordConfig {
            s0: 0.001,
            dt: 0.01,
            duration: 200.0,
            seed: 0,
            integrator_dt: 1e-3,
        }
    }
}

/// Drives the oscillator from rest with seeded white noise and records `(f, y)`.
pub fn simulate_noise_record(p: &OscillatorParams, cfg: &NoiseRecordConfig) -> Result<IoRecord> {
    let n = (cfg.duration / cfg.dt - 1e-9).ceil() as usize;
    let f = white_noise(cfg.s0, cfg.dt, n, cfg.seed)?;
    let traj = integrate(
        p,
        |t| f.interpolate(t),
        &IntegratorConfig::rk4(cfg.integrator_dt, cfg.duration, cfg.dt),
    )?;
    IoRecord::new(f, traj.y)
}
