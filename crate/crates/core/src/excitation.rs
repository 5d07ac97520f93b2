//! Excitation models in pole-residue form `f(t) = sum_l alpha_l exp(lambda_l t)`,
//! analytic generators, and Prony-SS decomposition of sampled records.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::rms;
use crate::polyexp::{real_with_tripwire, PoleTag, PolyExpSum, PolyExpTerm, TagSet};

/// One exponential component `alpha * exp(lambda * t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub alpha: Complex64,
    pub lambda: Complex64,
}

impl Component {
    pub fn new(alpha: Complex64, lambda: Complex64) -> Self {
        Component { alpha, lambda }
    }
}

/// Excitation in pole-residue form, valid on `[0, horizon)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialSignal {
    pub components: Vec<Component>,
    pub horizon: f64,
    /// Sample interval of the record this was fitted from, if any.
    pub dt: Option<f64>,
}

impl ExponentialSignal {
    pub fn new(components: Vec<Component>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "signal horizon must be positive, got {horizon}"
            )));
        }
        for c in &components {
            let ok = [c.alpha.re, c.alpha.im, c.lambda.re, c.lambda.im]
                .iter()
                .all(|v| v.is_finite());
            if !ok {
                return Err(Error::InvalidParameter(
                    "non-finite excitation component".into(),
                ));
            }
        }
        Ok(ExponentialSignal {
            components,
            horizon,
            dt: None,
        })
    }

    pub fn zero(horizon: f64) -> Self {
        ExponentialSignal {
            components: Vec::new(),
            horizon,
            dt: None,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Complex value without a horizon check.
    pub fn value(&self, t: f64) -> Complex64 {
        self.components
            .iter()
            .map(|c| c.alpha * (c.lambda * t).exp())
            .sum()
    }

    /// Real part of the value without a horizon check (for integrators).
    pub fn value_real(&self, t: f64) -> f64 {
        self.value(t).re
    }

    pub fn evaluate(&self, times: &[f64]) -> Result<Vec<Complex64>> {
        times
            .iter()
            .map(|&t| {
                if !(t >= 0.0 && t < self.horizon) {
                    Err(Error::OutsideHorizon {
                        t,
                        horizon: self.horizon,
                    })
                } else {
                    Ok(self.value(t))
                }
            })
            .collect()
    }

    pub fn evaluate_real(&self, times: &[f64], tolerance: f64) -> Result<Vec<f64>> {
        real_with_tripwire(&self.evaluate(times)?, tolerance)
    }

    pub fn scaled(&self, s: f64) -> Self {
        ExponentialSignal {
            components: self
                .components
                .iter()
                .map(|c| Component::new(c.alpha * s, c.lambda))
                .collect(),
            horizon: self.horizon,
            dt: self.dt,
        }
    }

    /// One term per component, tagged with its excitation index.
    pub fn to_polyexp(&self) -> PolyExpSum {
        let terms = self
            .components
            .iter()
            .enumerate()
            .map(|(l, c)| {
                let tags: TagSet = [PoleTag::excitation(l as u32)].into_iter().collect();
                PolyExpTerm::new(c.alpha, 0, c.lambda, tags)
            })
            .collect();
        PolyExpSum::from_terms(terms, self.horizon)
    }

    /// Components closed under `(alpha, lambda) -> (conj alpha, conj lambda)`.
    pub fn is_conjugate_closed(&self, rtol: f64) -> bool {
        let scale = self
            .components
            .iter()
            .map(|c| c.alpha.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        self.components.iter().all(|a| {
            self.components.iter().any(|b| {
                (b.lambda - a.lambda.conj()).norm() <= rtol * (1.0 + a.lambda.norm())
                    && (b.alpha - a.alpha.conj()).norm() <= rtol * scale
            })
        })
    }

    /// Writes `alpha_re,alpha_im,lambda_re,lambda_im` rows after a `#` metadata line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match self.dt {
            Some(dt) => writeln!(w, "# horizon={:e} dt={:e}", self.horizon, dt)?,
            None => writeln!(w, "# horizon={:e}", self.horizon)?,
        }
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["alpha_re", "alpha_im", "lambda_re", "lambda_im"])?;
        for c in &self.components {
            wr.write_record([
                format!("{:.17e}", c.alpha.re),
                format!("{:.17e}", c.alpha.im),
                format!("{:.17e}", c.lambda.re),
                format!("{:.17e}", c.lambda.im),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut text = String::new();
        BufReader::new(r).read_to_string(&mut text)?;
        let mut horizon = f64::INFINITY;
        let mut dt = None;
        for line in text.lines().filter(|l| l.starts_with('#')) {
            for kv in line.trim_start_matches('#').split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    let v: f64 = v
                        .parse()
                        .map_err(|_| Error::Format(format!("bad metadata value {kv}")))?;
                    match k {
                        "horizon" => horizon = v,
                        "dt" => dt = Some(v),
                        _ => {}
                    }
                }
            }
        }
        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut components = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Format(format!(
                    "expected 4 columns, found {}",
                    rec.len()
                )));
            }
            let v: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Format(format!("not a number: {s}")))
                })
                .collect::<Result<_>>()?;
            components.push(Component::new(
                Complex64::new(v[0], v[1]),
                Complex64::new(v[2], v[3]),
            ));
        }
        let mut s = ExponentialSignal::new(components, horizon)?;
        s.dt = dt;
        Ok(s)
    }
}

/// Uniformly sampled real record starting at t = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    pub samples: Vec<f64>,
    pub dt: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample interval must be positive, got {dt}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample".into()));
        }
        Ok(SampledSignal { samples, dt })
    }

    /// Samples `f(k dt)` for `k = 0..n`.
    pub fn from_fn(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        SampledSignal::new((0..n).map(|k| f(k as f64 * dt)).collect(), dt)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// End of the sampled window, `len * dt`.
    pub fn horizon(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Linear interpolation, zero outside the record.
    pub fn interpolate(&self, t: f64) -> f64 {
        if t < 0.0 || self.samples.is_empty() {
            return 0.0;
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.samples.len() {
            return if k + 1 == self.samples.len() && (x - k as f64) < 1e-9 {
                self.samples[k]
            } else {
                0.0
            };
        }
        let w = x - k as f64;
        self.samples[k] * (1.0 - w) + self.samples[k + 1] * w
    }

    pub fn scaled(&self, s: f64) -> Self {
        SampledSignal {
            samples: self.samples.iter().map(|v| v * s).collect(),
            dt: self.dt,
        }
    }

    /// Two-column `t,f` CSV with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "f"])?;
        for (k, v) in self.samples.iter().enumerate() {
            wr.write_record([format!("{:.17e}", k as f64 * self.dt), format!("{v:.17e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `t,f` rows (header optional); sampling must be uniform.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let cols = read_numeric_columns(r, 2)?;
        let (t, f) = (&cols[0], &cols[1]);
        let dt = uniform_step(t)?;
        SampledSignal::new(f.clone(), dt)
    }
}

/// Reads a CSV of at least `ncols` numeric columns; a non-numeric first row is a header.
pub fn read_numeric_columns<R: Read>(r: R, ncols: usize) -> Result<Vec<Vec<f64>>> {
    let mut cols = vec![Vec::new(); ncols];
    let rd = BufReader::new(r);
    for (i, line) in rd.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() < ncols {
            return Err(Error::Format(format!(
                "line {}: expected {ncols} columns, found {}",
                i + 1,
                fields.len()
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            fields[..ncols].iter().map(|s| s.parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                for (c, x) in cols.iter_mut().zip(v) {
                    c.push(x);
                }
            }
            Err(_) if cols[0].is_empty() => continue,
            Err(_) => {
                return Err(Error::Format(format!("line {}: not numeric", i + 1)));
            }
        }
    }
    Ok(cols)
}

/// Step of a uniform time column starting at zero.
pub fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::Format("need at least two samples".into()));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) || t[0].abs() > 1e-9 * dt.max(1.0) {
        return Err(Error::Format("time column must start at 0 and increase".into()));
    }
    for (k, v) in t.iter().enumerate() {
        if (v - k as f64 * dt).abs() > 1e-6 * dt {
            return Err(Error::Format(format!(
                "non-uniform sampling at row {k}: t = {v}"
            )));
        }
    }
    Ok(dt)
}

/// `A sin(Omega t)` exactly: poles `+-i Omega`, residues `-+ i A / 2`.
pub fn sinusoid_poles(amplitude: f64, omega: f64, horizon: f64) -> Result<ExponentialSignal> {
    if !(amplitude >= 0.0 && omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sinusoid needs A >= 0 and Omega > 0, got A={amplitude}, Omega={omega}"
        )));
    }
    ExponentialSignal::new(
        vec![
            Component::new(Complex64::new(0.0, -amplitude / 2.0), Complex64::new(0.0, omega)),
            Component::new(Complex64::new(0.0, amplitude / 2.0), Complex64::new(0.0, -omega)),
        ],
        horizon,
    )
}

/// A cosine component `A cos(Omega t + theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

/// Sum of cosines, both sampled on `n` points and in exact pole-residue form.
///
/// A zero-frequency tone contributes a single real component.
pub fn multitone(tones: &[Tone], n: usize, dt: f64) -> Result<(SampledSignal, ExponentialSignal)> {
    let mut comps = Vec::with_capacity(2 * tones.len());
    for t in tones {
        if t.omega == 0.0 {
            comps.push(Component::new(
                Complex64::new(t.amplitude * t.phase.cos(), 0.0),
                Complex64::new(0.0, 0.0),
            ));
        } else {
            let half = Complex64::from_polar(t.amplitude / 2.0, t.phase);
            comps.push(Component::new(half, Complex64::new(0.0, t.omega)));
            comps.push(Component::new(half.conj(), Complex64::new(0.0, -t.omega)));
        }
    }
    let sampled = SampledSignal::from_fn(n, dt, |x| {
        tones
            .iter()
            .map(|t| t.amplitude * (t.omega * x + t.phase).cos())
            .sum()
    })?;
    let mut exact = ExponentialSignal::new(comps, n as f64 * dt)?;
    exact.dt = Some(dt);
    Ok((sampled, exact))
}

/// Equal-amplitude tones at `omegas` with phases uniform on `[0, 2 pi)`.
pub fn random_phase_tones(amplitude: f64, omegas: &[f64], seed: u64) -> Vec<Tone> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    omegas
        .iter()
        .map(|&omega| Tone {
            amplitude,
            omega,
            phase: rng.random_range(0.0..2.0 * PI),
        })
        .collect()
}

/// Gaussian white noise with flat two-sided spectrum `s0`: variance `s0 * pi / dt`.
pub fn white_noise(s0: f64, dt: f64, n: usize, seed: u64) -> Result<SampledSignal> {
    if !(s0 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spectral height must be non-negative, got {s0}"
        )));
    }
    let sd = (s0 * PI / dt).sqrt();
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SampledSignal::new((0..n).map(|_| normal.sample(&mut rng)).collect(), dt)
}

/// How many singular directions Prony-SS keeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSelection {
    Fixed(usize),
    /// Keep singular values above this fraction of the largest.
    Threshold(f64),
}

impl Default for RankSelection {
    fn default() -> Self {
        RankSelection::Threshold(1e-8)
    }
}

/// Prony-SS result with fit diagnostics.
#[derive(Clone, Debug)]
pub struct PronyFit {
    pub signal: ExponentialSignal,
    pub requested_rank: Option<usize>,
    /// Rank actually used; a fixed request is capped at the numerical rank.
    pub effective_rank: usize,
    pub singular_values: Vec<f64>,
    pub fit_rms: f64,
    /// `fit_rms` over the RMS of the record.
    pub relative_fit_rms: f64,
    /// Largest `|Im lambda| * dt / pi`; values near 1 sit at the Nyquist limit.
    pub nyquist_fraction: f64,
}

impl PronyFit {
    pub fn near_nyquist(&self) -> bool {
        self.nyquist_fraction > 0.8
    }
}

/// Decomposes a sampled record into `sum alpha_l exp(lambda_l t)` on its window.
pub fn prony_ss(x: &SampledSignal, rank: RankSelection) -> Result<PronyFit> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParameter("Prony-SS needs at least two samples".into()));
    }
    let rows = n / 2 + 1;
    let cols = n - rows + 1;
    let max_rank = rows.min(cols).saturating_sub(1).max(1);
    if let RankSelection::Fixed(r) = rank {
        if r == 0 {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        if r > max_rank || 2 * r > n {
            return Err(Error::RankTooLarge { rank: r, max: max_rank });
        }
    }
    let hankel = DMatrix::from_fn(rows, cols, |i, j| x.samples[i + j]);
    let svd = hankel.svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);

    let rms_x = rms(&x.samples);
    if smax == 0.0 {
        let mut signal = ExponentialSignal::new(Vec::new(), x.horizon())?;
        signal.dt = Some(x.dt);
        return Ok(PronyFit {
            signal,
            requested_rank: match rank {
                RankSelection::Fixed(r) => Some(r),
                _ => None,
            },
            effective_rank: 0,
            singular_values: sigma,
            fit_rms: 0.0,
            relative_fit_rms: 0.0,
            nyquist_fraction: 0.0,
        });
    }
    let numerical = sigma
        .iter()
        .take_while(|&&s| s > rows.max(cols) as f64 * f64::EPSILON * smax)
        .count();
    let (requested, r) = match rank {
        RankSelection::Fixed(r) => (Some(r), r.min(numerical).min(max_rank)),
        RankSelection::Threshold(tol) => (
            None,
            sigma
                .iter()
                .take_while(|&&s| s > tol * smax)
                .count()
                .min(max_rank),
        ),
    };
    if let Some(req) = requested {
        if r < req {
            log::warn!("requested rank {req} exceeds the numerical rank; using {r}");
        }
    }

    let u = svd.u.as_ref().expect("left singular vectors requested");
    let ur = DMatrix::from_fn(rows, r, |i, j| u[(i, order[j])]);
    let u1 = ur.rows(0, rows - 1).into_owned();
    let u2 = ur.rows(1, rows - 1).into_owned();
    let a = u1
        .svd(true, true)
        .solve(&u2, 1e-14)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mu = a.complex_eigenvalues();
    if mu.iter().any(|m| m.norm() == 0.0) {
        return Err(Error::ZeroSignalPole);
    }
    let lambdas: Vec<Complex64> = mu.iter().map(|m| m.ln() / x.dt).collect();
    let lambdas = symmetrize_poles(&lambdas);

    let times = x.times();
    let alphas = fit_residues(&lambdas, &times, &x.samples)?;
    let mut components: Vec<Component> = lambdas
        .iter()
        .zip(&alphas)
        .map(|(&l, &a)| Component::new(a, l))
        .collect();
    symmetrize_residues(&mut components);
    components.sort_by(|p, q| {
        p.lambda
            .im
            .abs()
            .total_cmp(&q.lambda.im.abs())
            .then(q.lambda.im.total_cmp(&p.lambda.im))
    });

    let mut signal = ExponentialSignal::new(components, x.horizon())?;
    signal.dt = Some(x.dt);
    let recon: Vec<f64> = times.iter().map(|&t| signal.value_real(t)).collect();
    let fit_rms = crate::numeric::rms_diff(&recon, &x.samples);
    let nyquist_fraction = signal
        .components
        .iter()
        .map(|c| c.lambda.im.abs() * x.dt / PI)
        .fold(0.0, f64::max);
    if nyquist_fraction > 0.8 {
        log::warn!(
            "recovered frequency at {:.0}% of the Nyquist limit; consider a finer sample interval",
            100.0 * nyquist_fraction
        );
    }
    Ok(PronyFit {
        signal,
        requested_rank: requested,
        effective_rank: r,
        singular_values: sigma,
        fit_rms,
        relative_fit_rms: if rms_x > 0.0 { fit_rms / rms_x } else { 0.0 },
        nyquist_fraction,
    })
}

/// Complex least-squares residues for fixed poles on all samples.
pub fn fit_residues(lambdas: &[Complex64], times: &[f64], y: &[f64]) -> Result<Vec<Complex64>> {
    let mut v = DMatrix::from_fn(times.len(), lambdas.len(), |i, j| (lambdas[j] * times[i]).exp());
    // equilibrate columns; growing and decaying exponentials differ by many decades
    let scales: Vec<f64> = (0..v.ncols())
        .map(|j| {
            let n = v.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scales.iter().enumerate() {
        v.column_mut(j).unscale_mut(*s);
    }
    let b = DMatrix::from_fn(y.len(), 1, |i, _| Complex64::new(y[i], 0.0));
    let qr = v.qr();
    let qtb = qr.q().adjoint() * b;
    let r = qr.r();
    let sol = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::InvalidParameter("singular Vandermonde system".into()))?;
    Ok(sol
        .column(0)
        .iter()
        .zip(&scales)
        .map(|(x, s)| x / *s)
        .collect())
}

fn symmetrize_poles(lambdas: &[Complex64]) -> Vec<Complex64> {
    let mut out = lambdas.to_vec();
    let mut done = vec![false; out.len()];
    for i in 0..out.len() {
        if done[i] {
            continue;
        }
        done[i] = true;
        let li = out[i];
        let tol = 1e-9 * (1.0 + li.norm());
        if li.im.abs() <= tol {
            out[i] = Complex64::new(li.re, 0.0);
            continue;
        }
        let partner = (0..out.len())
            .filter(|&j| !done[j])
            .min_by(|&a, &b| {
                (out[a] - li.conj())
                    .norm()
                    .total_cmp(&(out[b] - li.conj()).norm())
            });
        if let Some(j) = partner {
            if (out[j] - li.conj()).norm() <= 1e-6 * (1.0 + li.norm()) {
                let avg = 0.5 * (li + out[j].conj());
                out[i] = avg;
                out[j] = avg.conj();
                done[j] = true;
            }
        }
    }
    out
}

fn symmetrize_residues(components: &mut [Component]) {
    let n = components.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        done[i] = true;
        let li = components[i].lambda;
        if li.im == 0.0 {
            components[i].alpha = Complex64::new(components[i].alpha.re, 0.0);
            continue;
        }
        if let Some(j) = (0..n).find(|&j| !done[j] && components[j].lambda == li.conj()) {
            let avg = 0.5 * (components[i].alpha + components[j].alpha.conj());
            components[i].alpha = avg;
            components[j].alpha = avg.conj();
            done[j] = true;
        }
    }
}
