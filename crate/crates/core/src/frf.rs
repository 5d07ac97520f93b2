//! Harmonic-probing frequency response functions of the polynomial oscillator
//! `m y'' + c y' + k1 y + k2 y^2 + k3 y^3 = f`, their time-domain Volterra
//! kernels, and the Laguerre coefficients `c_{p1..pn}` of those kernels.
//!
//! Frequency grids are two-sided, `w_j = (j - M) dw` for `j = 0..2M`. Inverse
//! transforms are `h(t) = (dw / 2 pi)^n sum H(w) exp(i sum w t)` with the
//! scaling applied explicitly; the FFT routine's own normalization is unused.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laguerre::LaguerreBasis;
use crate::polyexp::{real_with_tripwire, IMAG_TRIPWIRE};
use crate::tensor::{read_tensor, write_tensor, Dtype, TensorHeader};

/// Physical parameters of the oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub m: f64,
    pub c: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        OscillatorParams {
            m: 1.0,
            c: 1.0,
            k1: 10.0,
            k2: 20.0,
            k3: 20.0,
        }
    }
}

impl OscillatorParams {
    /// The same oscillator without its nonlinear springs.
    pub fn linear_part(&self) -> Self {
        OscillatorParams {
            k2: 0.0,
            k3: 0.0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.k1 > 0.0 && self.c > 0.0) {
            return Err(Error::InvalidParameter(
                "oscillator needs m > 0, c > 0 and k1 > 0".into(),
            ));
        }
        if self.zeta() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "oscillator must be underdamped, damping ratio is {:.3}",
                self.zeta()
            )));
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        (self.k1 / self.m).sqrt()
    }

    pub fn zeta(&self) -> f64 {
        self.c / (2.0 * self.m * self.omega0())
    }

    pub fn omega_d(&self) -> f64 {
        self.omega0() * (1.0 - self.zeta().powi(2)).sqrt()
    }

    /// `1 / (k1 - m w^2 + i c w)`.
    pub fn h1(&self, w: f64) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.k1 - self.m * w * w, self.c * w)
    }

    pub fn h2(&self, w1: f64, w2: f64) -> Complex64 {
        -self.k2 * self.h1(w1) * self.h1(w2) * self.h1(w1 + w2)
    }

    /// Third-order FRF. The quadratic-spring feedback enters as `2 k2 y1 y2`,
    /// which symmetrizes to the factor `2 k2 / 3` on each `H1 H2` pairing.
    pub fn h3(&self, w1: f64, w2: f64, w3: f64) -> Complex64 {
        let (a, b, c) = (self.h1(w1), self.h1(w2), self.h1(w3));
        let mixed = a * self.h2(w2, w3) + b * self.h2(w1, w3) + c * self.h2(w1, w2);
        -(2.0 * self.k2 / 3.0 * mixed + self.k3 * a * b * c) * self.h1(w1 + w2 + w3)
    }

    /// Linear impulse response `exp(-zeta w0 t) sin(wd t) / (m wd)` for `t >= 0`.
    pub fn h1_impulse(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let wd = self.omega_d();
        (-self.zeta() * self.omega0() * t).exp() * (wd * t).sin() / (self.m * wd)
    }
}

/// Two-sided uniform frequency grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dw: f64,
    /// `M`; the grid has `2M + 1` points per axis.
    pub half_width: usize,
}

impl GridSpec {
    /// `dw = 0.1`, cutoff `+-102.4` (2049 points per axis).
    pub const LOW_ORDER: GridSpec = GridSpec {
        dw: 0.1,
        half_width: 1024,
    };
    /// `dw = 0.4`, cutoff `+-51.2` (257 points per axis).
    pub const THIRD_ORDER: GridSpec = GridSpec {
        dw: 0.4,
        half_width: 128,
    };

    pub fn new(dw: f64, half_width: usize) -> Result<Self> {
        if !(dw > 0.0 && dw.is_finite()) || half_width == 0 {
            return Err(Error::InvalidParameter(format!(
                "frequency grid needs dw > 0 and M > 0, got dw={dw}, M={half_width}"
            )));
        }
        Ok(GridSpec { dw, half_width })
    }

    /// Grid with the given cutoff `M dw`.
    pub fn from_cutoff(dw: f64, cutoff: f64) -> Result<Self> {
        GridSpec::new(dw, (cutoff / dw).round() as usize)
    }

    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cutoff(&self) -> f64 {
        self.half_width as f64 * self.dw
    }

    pub fn omega(&self, j: usize) -> f64 {
        (j as f64 - self.half_width as f64) * self.dw
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.omega(j)).collect()
    }

    /// Time step of the inverse transform, `2 pi / (N dw)`.
    pub fn dt(&self) -> f64 {
        2.0 * PI / (self.len() as f64 * self.dw)
    }

    /// Same cutoff, half the spacing.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            dw: self.dw / 2.0,
            half_width: 2 * self.half_width,
        }
    }
}

/// `H1` on `k dw` for `k = -reach..=reach`, so sums of grid indices are lookups.
struct H1Table {
    reach: i64,
    vals: Vec<Complex64>,
    k2: f64,
    k3: f64,
}

impl H1Table {
    fn new(p: &OscillatorParams, dw: f64, reach: usize) -> Self {
        let reach = reach as i64;
        H1Table {
            reach,
            vals: (-reach..=reach).map(|k| p.h1(k as f64 * dw)).collect(),
            k2: p.k2,
            k3: p.k3,
        }
    }

    #[inline]
    fn h1(&self, k: i64) -> Complex64 {
        self.vals[(k + self.reach) as usize]
    }

    #[inline]
    fn h2(&self, a: i64, b: i64) -> Complex64 {
        -self.k2 * self.h1(a) * self.h1(b) * self.h1(a + b)
    }

    #[inline]
    fn h3(&self, a: i64, b: i64, c: i64) -> Complex64 {
        let (ha, hb, hc) = (self.h1(a), self.h1(b), self.h1(c));
        let mixed = ha * self.h2(b, c) + hb * self.h2(a, c) + hc * self.h2(a, b);
        -(2.0 * self.k2 / 3.0 * mixed + self.k3 * ha * hb * hc) * self.h1(a + b + c)
    }
}

/// A sampled FRF of order 1, 2 or 3 on the full tensor grid (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct FrfGrid {
    pub order: usize,
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

const MAX_DENSE: usize = 60_000_000;

/// `H1` on the grid.
pub fn frf1(p: &OscillatorParams, spec: GridSpec) -> FrfGrid {
    FrfGrid {
        order: 1,
        spec,
        values: spec.omegas().iter().map(|&w| p.h1(w)).collect(),
    }
}

/// `H2` on the full two-dimensional grid, with `H1` at sum frequencies
/// evaluated analytically.
pub fn frf2(p: &OscillatorParams, spec: GridSpec) -> FrfGrid {
    let m = spec.half_width as i64;
    let t = H1Table::new(p, spec.dw, 2 * spec.half_width);
    let mut values = Vec::with_capacity(spec.len() * spec.len());
    for a in -m..=m {
        for b in -m..=m {
            values.push(t.h2(a, b));
        }
    }
    FrfGrid {
        order: 2,
        spec,
        values,
    }
}

/// `H3` on the full three-dimensional grid; refused when the tensor would be huge.
pub fn frf3(p: &OscillatorParams, spec: GridSpec) -> Result<FrfGrid> {
    let n = spec.len();
    if n * n * n > MAX_DENSE {
        return Err(Error::InvalidParameter(format!(
            "a dense {n}^3 third-order grid is too large; use the streaming projection"
        )));
    }
    let m = spec.half_width as i64;
    let t = H1Table::new(p, spec.dw, 3 * spec.half_width);
    let mut values = Vec::with_capacity(n * n * n);
    for a in -m..=m {
        for b in -m..=m {
            for c in -m..=m {
                values.push(t.h3(a, b, c));
            }
        }
    }
    Ok(FrfGrid {
        order: 3,
        spec,
        values,
    })
}

/// `H3(w, w, w)`.
pub fn frf3_diagonal(p: &OscillatorParams, omegas: &[f64]) -> Vec<Complex64> {
    omegas.iter().map(|&w| p.h3(w, w, w)).collect()
}

/// `H3(w, w, -w)`.
pub fn frf3_mixed_diagonal(p: &OscillatorParams, omegas: &[f64]) -> Vec<Complex64> {
    omegas.iter().map(|&w| p.h3(w, w, -w)).collect()
}

impl FrfGrid {
    pub fn shape(&self) -> Vec<usize> {
        vec![self.spec.len(); self.order]
    }

    /// Checks tensor size and conjugate symmetry `H(-w) = conj H(w)`.
    pub fn check_symmetry(&self) -> Result<()> {
        let n = self.spec.len();
        let expected = n.pow(self.order as u32);
        if self.values.len() != expected {
            return Err(Error::AsymmetricGrid(format!(
                "{} values for a {}-dimensional grid of {n} points per axis",
                self.values.len(),
                self.order
            )));
        }
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (i, v) in self.values.iter().enumerate() {
            // mirrored flat index: every axis index j -> n-1-j
            let mirror = expected - 1 - i;
            if (self.values[mirror] - v.conj()).norm() > 1e-12 * scale {
                return Err(Error::AsymmetricGrid(format!(
                    "H(-w) != conj H(w) at flat index {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut h = TensorHeader::new("frf", Dtype::C64, self.shape());
        h.order = Some(self.order);
        h.dw = Some(self.spec.dw);
        h.half_width = Some(self.spec.half_width);
        let data: Vec<f64> = self.values.iter().flat_map(|z| [z.re, z.im]).collect();
        write_tensor(w, &h, &data)
    }

    pub fn read_binary<R: BufRead>(r: R) -> Result<Self> {
        let (h, data) = read_tensor(r)?;
        if h.kind != "frf" || h.dtype != Dtype::C64 {
            return Err(Error::Format(format!("expected a complex frf tensor, found {}", h.kind)));
        }
        let spec = GridSpec::new(
            h.dw.ok_or_else(|| Error::Format("frf header lacks dw".into()))?,
            h.half_width
                .ok_or_else(|| Error::Format("frf header lacks half_width".into()))?,
        )?;
        let order = h.shape.len();
        if h.shape.iter().any(|&s| s != spec.len()) {
            return Err(Error::AsymmetricGrid("shape does not match half_width".into()));
        }
        Ok(FrfGrid {
            order,
            spec,
            values: data
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        })
    }
}

/// Real kernel samples on a uniform time grid starting at 0.
///
/// Orders 1 and 2 hold the full causal block (shape `[n]` or `[n, n]`,
/// row-major); order 3 holds only the diagonal `h3(t, t, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledKernel {
    pub order: usize,
    pub dt: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl SampledKernel {
    pub fn times(&self) -> Vec<f64> {
        (0..self.shape[0]).map(|k| k as f64 * self.dt).collect()
    }

    /// Order-2 block as a matrix.
    pub fn as_matrix(&self) -> Option<DMatrix<f64>> {
        (self.order == 2)
            .then(|| DMatrix::from_row_slice(self.shape[0], self.shape[1], &self.values))
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut h = TensorHeader::new("kernel", Dtype::F64, self.shape.clone());
        h.order = Some(self.order);
        h.dt = Some(self.dt);
        write_tensor(w, &h, &self.values)
    }
}

/// Inverse transform along one axis of length `2M+1`, keeping `t_k = k dt` for `k = 0..=M`.
struct AxisIdft {
    fft: Arc<dyn Fft<f64>>,
    phase: Vec<Complex64>,
    keep: usize,
}

impl AxisIdft {
    fn new(spec: GridSpec) -> Self {
        let n = spec.len();
        let m = spec.half_width as f64;
        let scale = spec.dw / (2.0 * PI);
        AxisIdft {
            fft: FftPlanner::new().plan_fft_inverse(n),
            // exp(i (j - M) dw k dt) = exp(-2 pi i M k / N) exp(2 pi i j k / N)
            phase: (0..n)
                .map(|k| Complex64::from_polar(scale, -2.0 * PI * m * k as f64 / n as f64))
                .collect(),
            keep: spec.half_width + 1,
        }
    }

    fn apply(&self, buf: &mut [Complex64]) {
        self.fft.process(buf);
        for (v, ph) in buf.iter_mut().zip(&self.phase) {
            *v *= ph;
        }
    }
}

/// Time-domain kernel by inverse DFT. Orders 1 and 2 return the causal block
/// `t in [0, M dt]`; order 3 returns the diagonal `h3(t,t,t)` on the same times.
pub fn kernel_time(grid: &FrfGrid) -> Result<SampledKernel> {
    grid.check_symmetry()?;
    let spec = grid.spec;
    let n = spec.len();
    let idft = AxisIdft::new(spec);
    let keep = idft.keep;
    match grid.order {
        1 => {
            let mut buf = grid.values.clone();
            idft.apply(&mut buf);
            let z = &buf[..keep];
            Ok(SampledKernel {
                order: 1,
                dt: spec.dt(),
                shape: vec![keep],
                values: real_with_tripwire(z, IMAG_TRIPWIRE)?,
            })
        }
        2 => {
            let mut rows = grid.values.clone();
            for row in rows.chunks_exact_mut(n) {
                idft.apply(row);
            }
            let mut out = Vec::with_capacity(keep * keep);
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            let mut block = vec![Complex64::new(0.0, 0.0); keep * keep];
            for k2 in 0..keep {
                for (j1, c) in col.iter_mut().enumerate() {
                    *c = rows[j1 * n + k2];
                }
                idft.apply(&mut col);
                for k1 in 0..keep {
                    block[k1 * keep + k2] = col[k1];
                }
            }
            out.extend(real_with_tripwire(&block, IMAG_TRIPWIRE)?);
            Ok(SampledKernel {
                order: 2,
                dt: spec.dt(),
                shape: vec![keep, keep],
                values: out,
            })
        }
        3 => {
            let m = spec.half_width as i64;
            let mut sums = vec![Complex64::new(0.0, 0.0); 6 * spec.half_width + 1];
            let mut i = 0;
            for a in -m..=m {
                for b in -m..=m {
                    for c in -m..=m {
                        sums[(a + b + c + 3 * m) as usize] += grid.values[i];
                        i += 1;
                    }
                }
            }
            let times: Vec<f64> = (0..keep).map(|k| k as f64 * spec.dt()).collect();
            Ok(SampledKernel {
                order: 3,
                dt: spec.dt(),
                shape: vec![keep],
                values: diagonal_from_index_sums(&sums, spec, &times)?,
            })
        }
        n => Err(Error::OrderMismatch(format!("kernel order {n} is not supported"))),
    }
}

/// `h3(t,t,t)` straight from the oscillator, without materializing the 3-D grid.
pub fn kernel3_diagonal(p: &OscillatorParams, spec: GridSpec, times: &[f64]) -> Result<Vec<f64>> {
    let m = spec.half_width as i64;
    let t = H1Table::new(p, spec.dw, 3 * spec.half_width);
    let mut sums = vec![Complex64::new(0.0, 0.0); 6 * spec.half_width + 1];
    for a in -m..=m {
        for b in -m..=m {
            for c in -m..=m {
                sums[(a + b + c + 3 * m) as usize] += t.h3(a, b, c);
            }
        }
    }
    diagonal_from_index_sums(&sums, spec, times)
}

fn diagonal_from_index_sums(sums: &[Complex64], spec: GridSpec, times: &[f64]) -> Result<Vec<f64>> {
    let reach = (sums.len() as i64 - 1) / 2;
    let scale = (spec.dw / (2.0 * PI)).powi(3);
    let z: Vec<Complex64> = times
        .iter()
        .map(|&t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, g) in sums.iter().enumerate() {
                let s = (i as i64 - reach) as f64;
                acc += g * Complex64::from_polar(1.0, s * spec.dw * t);
            }
            acc * scale
        })
        .collect();
    real_with_tripwire(&z, IMAG_TRIPWIRE)
}

/// Laguerre coefficients of an order-`n` kernel, one basis per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCoefficients {
    pub order: usize,
    pub bases: Vec<LaguerreBasis>,
    /// Row-major tensor of shape `bases[i].len()`.
    pub data: Vec<f64>,
}

impl KernelCoefficients {
    pub fn zeros(bases: Vec<LaguerreBasis>) -> Self {
        let len = bases.iter().map(|b| b.len()).product();
        KernelCoefficients {
            order: bases.len(),
            bases,
            data: vec![0.0; len],
        }
    }

    /// Same basis on every axis.
    pub fn zeros_uniform(basis: LaguerreBasis, order: usize) -> Self {
        KernelCoefficients::zeros(vec![basis; order])
    }

    pub fn shape(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.len()).collect()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.bases)
            .fold(0, |acc, (&i, b)| acc * b.len() + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let i = self.flat(idx);
        self.data[i] = v;
    }

    /// Order-2 tensor as a matrix.
    pub fn as_matrix(&self) -> Option<DMatrix<f64>> {
        (self.order == 2).then(|| {
            let s = self.shape();
            DMatrix::from_row_slice(s[0], s[1], &self.data)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest deviation from permutation symmetry (0 for order 1).
    pub fn max_asymmetry(&self) -> f64 {
        let s = self.shape();
        let mut worst: f64 = 0.0;
        match self.order {
            2 => {
                for p in 0..s[0] {
                    for q in 0..s[1].min(s[0]) {
                        worst = worst.max((self.get(&[p, q]) - self.get(&[q, p])).abs());
                    }
                }
            }
            3 => {
                let n = s[0].min(s[1]).min(s[2]);
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            let v = self.get(&[p, q, r]);
                            for w in [[q, p, r], [p, r, q], [r, q, p]] {
                                worst = worst.max((v - self.get(&w)).abs());
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        worst
    }

    /// Max |c| over each shell `p1 + ... + pn = s`.
    pub fn shell_maxima(&self) -> Vec<f64> {
        let s = self.shape();
        let top: usize = s.iter().map(|v| v - 1).sum();
        let mut out = vec![0.0f64; top + 1];
        let mut idx = vec![0usize; self.order];
        for v in &self.data {
            let shell: usize = idx.iter().sum();
            out[shell] = out[shell].max(v.abs());
            for ax in (0..self.order).rev() {
                idx[ax] += 1;
                if idx[ax] < s[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        out
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut h = TensorHeader::new("kernel_coefficients", Dtype::F64, self.shape());
        h.order = Some(self.order);
        h.a = Some(self.bases.iter().map(|b| b.a).collect());
        h.r = Some(self.bases.iter().map(|b| b.order).collect());
        write_tensor(w, &h, &self.data)
    }

    pub fn read_binary<R: BufRead>(r: R) -> Result<Self> {
        let (h, data) = read_tensor(r)?;
        if h.kind != "kernel_coefficients" || h.dtype != Dtype::F64 {
            return Err(Error::Format(format!(
                "expected a kernel_coefficients tensor, found {}",
                h.kind
            )));
        }
        let a = h.a.ok_or_else(|| Error::Format("coefficient header lacks a".into()))?;
        let r = h.r.ok_or_else(|| Error::Format("coefficient header lacks r".into()))?;
        if a.len() != r.len() || a.len() != h.shape.len() {
            return Err(Error::Format("inconsistent basis metadata".into()));
        }
        let bases = a
            .iter()
            .zip(&r)
            .map(|(&a, &r)| LaguerreBasis::new(a, r))
            .collect::<Result<Vec<_>>>()?;
        if bases.iter().map(|b| b.len()).collect::<Vec<_>>() != h.shape {
            return Err(Error::Format("shape does not match basis orders".into()));
        }
        Ok(KernelCoefficients {
            order: bases.len(),
            bases,
            data,
        })
    }
}

/// `l~_p(-i w_j)`, one row per order, one column per grid point.
fn conj_basis_matrix(basis: &LaguerreBasis, spec: GridSpec) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(basis.len(), spec.len());
    for j in 0..spec.len() {
        let col = basis.laplace_all(Complex64::new(0.0, -spec.omega(j)));
        for (p, v) in col.into_iter().enumerate() {
            m[(p, j)] = v;
        }
    }
    m
}

/// Projection output with the largest imaginary residue relative to the coefficients.
#[derive(Clone, Debug)]
pub struct Projection {
    pub coeffs: KernelCoefficients,
    pub imag_ratio: f64,
}

fn finish_projection(bases: &[LaguerreBasis], z: Vec<Complex64>) -> Result<Projection> {
    let re_max = z.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let im_max = z.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let imag_ratio = if re_max > 0.0 { im_max / re_max } else { 0.0 };
    if imag_ratio > IMAG_TRIPWIRE {
        return Err(Error::ImaginaryResidue {
            ratio: imag_ratio,
            tolerance: IMAG_TRIPWIRE,
        });
    }
    Ok(Projection {
        coeffs: KernelCoefficients {
            order: bases.len(),
            bases: bases.to_vec(),
            data: z.iter().map(|v| v.re).collect(),
        },
        imag_ratio,
    })
}

/// `c_{p1..pn} = (dw/2pi)^n sum H_n(w) prod_i l~_{p_i}(-i w_i)` by mode-wise
/// contraction. Order 3 streams over the first axis and never holds the 3-D grid.
pub fn project_coefficients(
    p: &OscillatorParams,
    spec: GridSpec,
    bases: &[LaguerreBasis],
) -> Result<Projection> {
    let n = spec.len();
    let m = spec.half_width as i64;
    let scale = spec.dw / (2.0 * PI);
    let lc: Vec<DMatrix<Complex64>> = bases.iter().map(|b| conj_basis_matrix(b, spec)).collect();
    match bases.len() {
        1 => {
            let h = DMatrix::from_iterator(n, 1, spec.omegas().iter().map(|&w| p.h1(w)));
            let c = &lc[0] * h * Complex64::new(scale, 0.0);
            finish_projection(bases, c.iter().copied().collect())
        }
        2 => {
            let t = H1Table::new(p, spec.dw, 2 * spec.half_width);
            // column-major fill: entry (j1, j2)
            let h = DMatrix::from_fn(n, n, |j1, j2| t.h2(j1 as i64 - m, j2 as i64 - m));
            let c = &lc[0] * h * lc[1].transpose() * Complex64::new(scale * scale, 0.0);
            let z: Vec<Complex64> = (0..c.nrows())
                .flat_map(|i| (0..c.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| c[(i, j)])
                .collect();
            finish_projection(bases, z)
        }
        3 => {
            let t = H1Table::new(p, spec.dw, 3 * spec.half_width);
            let (r1, r2, r3) = (bases[0].len(), bases[1].len(), bases[2].len());
            let mut acc = vec![Complex64::new(0.0, 0.0); r1 * r2 * r3];
            let mut slice = DMatrix::<Complex64>::zeros(n, n);
            let l3t = lc[2].transpose();
            for j1 in 0..n {
                let a = j1 as i64 - m;
                for j3 in 0..n {
                    for j2 in 0..n {
                        slice[(j2, j3)] = t.h3(a, j2 as i64 - m, j3 as i64 - m);
                    }
                }
                let inner = &lc[1] * &slice * &l3t;
                for p1 in 0..r1 {
                    let w = lc[0][(p1, j1)];
                    let base = p1 * r2 * r3;
                    for q in 0..r2 {
                        for r in 0..r3 {
                            acc[base + q * r3 + r] += w * inner[(q, r)];
                        }
                    }
                }
            }
            let s3 = Complex64::new(scale.powi(3), 0.0);
            finish_projection(bases, acc.into_iter().map(|v| v * s3).collect())
        }
        k => Err(Error::OrderMismatch(format!("kernel order {k} is not supported"))),
    }
}

/// Projection of a stored FRF grid (any order whose dense grid is available).
pub fn project_grid(grid: &FrfGrid, bases: &[LaguerreBasis]) -> Result<Projection> {
    if bases.len() != grid.order {
        return Err(Error::OrderMismatch(format!(
            "{} bases for an order-{} grid",
            bases.len(),
            grid.order
        )));
    }
    grid.check_symmetry()?;
    let spec = grid.spec;
    let n = spec.len();
    let scale = spec.dw / (2.0 * PI);
    let lc: Vec<DMatrix<Complex64>> = bases.iter().map(|b| conj_basis_matrix(b, spec)).collect();
    match grid.order {
        1 => {
            let h = DMatrix::from_column_slice(n, 1, &grid.values);
            let c = &lc[0] * h * Complex64::new(scale, 0.0);
            finish_projection(bases, c.iter().copied().collect())
        }
        2 => {
            let h = DMatrix::from_row_slice(n, n, &grid.values);
            let c = &lc[0] * h * lc[1].transpose() * Complex64::new(scale * scale, 0.0);
            let z = (0..c.nrows())
                .flat_map(|i| (0..c.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| c[(i, j)])
                .collect();
            finish_projection(bases, z)
        }
        _ => {
            let (r1, r2, r3) = (bases[0].len(), bases[1].len(), bases[2].len());
            let mut acc = vec![Complex64::new(0.0, 0.0); r1 * r2 * r3];
            let l3t = lc[2].transpose();
            for j1 in 0..n {
                let slice = DMatrix::from_row_slice(n, n, &grid.values[j1 * n * n..(j1 + 1) * n * n]);
                let inner = &lc[1] * slice * &l3t;
                for p1 in 0..r1 {
                    let w = lc[0][(p1, j1)];
                    for q in 0..r2 {
                        for r in 0..r3 {
                            acc[(p1 * r2 + q) * r3 + r] += w * inner[(q, r)];
                        }
                    }
                }
            }
            let s3 = Complex64::new(scale.powi(3), 0.0);
            finish_projection(bases, acc.into_iter().map(|v| v * s3).collect())
        }
    }
}

/// One spot of a quadrature convergence check.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceSpot {
    pub index: Vec<usize>,
    pub coarse: f64,
    pub fine: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub spots: Vec<ConvergenceSpot>,
    /// Largest `|coarse - fine|` relative to the largest coarse coefficient.
    pub max_relative_change: f64,
    pub converged: bool,
}

/// Recomputes selected coefficients on a grid with half the spacing (same
/// cutoff) and compares. Logs a warning with both values when they disagree
/// by more than `rtol` of the largest coefficient.
pub fn convergence_check(
    p: &OscillatorParams,
    spec: GridSpec,
    coeffs: &KernelCoefficients,
    spots: &[Vec<usize>],
    rtol: f64,
) -> Result<ConvergenceReport> {
    let fine = spec.refined();
    let m = fine.half_width as i64;
    let n = fine.len();
    let scale = fine.dw / (2.0 * PI);
    let t = H1Table::new(p, fine.dw, coeffs.order * fine.half_width);
    let rows: Vec<Vec<Vec<Complex64>>> = coeffs
        .bases
        .iter()
        .map(|b| {
            (0..n)
                .map(|j| b.laplace_all(Complex64::new(0.0, -fine.omega(j))))
                .collect()
        })
        .collect();
    let cmax = coeffs.max_abs().max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for idx in spots {
        if idx.len() != coeffs.order {
            return Err(Error::OrderMismatch("spot index has the wrong rank".into()));
        }
        let l = |ax: usize, j: usize| rows[ax][j][idx[ax]];
        let v = match coeffs.order {
            1 => (0..n).map(|j| t.h1(j as i64 - m) * l(0, j)).sum::<Complex64>() * scale,
            2 => {
                let mut acc = Complex64::new(0.0, 0.0);
                for j1 in 0..n {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for j2 in 0..n {
                        inner += t.h2(j1 as i64 - m, j2 as i64 - m) * l(1, j2);
                    }
                    acc += inner * l(0, j1);
                }
                acc * scale * scale
            }
            _ => {
                let mut acc = Complex64::new(0.0, 0.0);
                for j1 in 0..n {
                    let mut s2 = Complex64::new(0.0, 0.0);
                    for j2 in 0..n {
                        let mut s3 = Complex64::new(0.0, 0.0);
                        for j3 in 0..n {
                            s3 += t.h3(j1 as i64 - m, j2 as i64 - m, j3 as i64 - m) * l(2, j3);
                        }
                        s2 += s3 * l(1, j2);
                    }
                    acc += s2 * l(0, j1);
                }
                acc * scale.powi(3)
            }
        };
        let coarse = coeffs.get(idx);
        let change = (coarse - v.re).abs() / cmax;
        if change > rtol {
            log::warn!(
                "coefficient {idx:?} not converged in dw: {coarse:.6e} at dw={} vs {:.6e} at dw={}",
                spec.dw,
                v.re,
                fine.dw
            );
        }
        worst = worst.max(change);
        out.push(ConvergenceSpot {
            index: idx.clone(),
            coarse,
            fine: v.re,
        });
    }
    Ok(ConvergenceReport {
        spots: out,
        max_relative_change: worst,
        converged: worst <= rtol,
    })
}

/// Separable synthesis `h = sum c prod l_{p_i}(t_i)`. Order 1 and 2 give the
/// full block on `times`; order 3 gives the diagonal `h3(t,t,t)`.
pub fn reconstruct_kernel(coeffs: &KernelCoefficients, times: &[f64]) -> Result<Vec<f64>> {
    let mats: Vec<DMatrix<f64>> = coeffs
        .bases
        .iter()
        .map(|b| b.eval_matrix(times))
        .collect::<Result<_>>()?;
    let s = coeffs.shape();
    match coeffs.order {
        1 => {
            let c = DMatrix::from_column_slice(s[0], 1, &coeffs.data);
            Ok((&mats[0] * c).iter().copied().collect())
        }
        2 => {
            let c = DMatrix::from_row_slice(s[0], s[1], &coeffs.data);
            let h = &mats[0] * c * mats[1].transpose();
            let n = times.len();
            Ok((0..n * n).map(|i| h[(i / n, i % n)]).collect())
        }
        3 => Ok((0..times.len())
            .map(|k| {
                let mut acc = 0.0;
                for p in 0..s[0] {
                    let lp = mats[0][(k, p)];
                    for q in 0..s[1] {
                        let lpq = lp * mats[1][(k, q)];
                        let base = (p * s[1] + q) * s[2];
                        for r in 0..s[2] {
                            acc += coeffs.data[base + r] * lpq * mats[2][(k, r)];
                        }
                    }
                }
                acc
            })
            .collect()),
        k => Err(Error::OrderMismatch(format!("kernel order {k} is not supported"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{rms, rms_diff, trapezoid};
    use proptest::prelude::*;

    fn paper() -> OscillatorParams {
        OscillatorParams::default()
    }

    #[test]
    fn static_gains() {
        let p = paper();
        assert!((p.h1(0.0) - Complex64::new(0.1, 0.0)).norm() < 1e-15);
        assert!((p.h2(0.0, 0.0) - Complex64::new(-0.02, 0.0)).norm() < 1e-15);
        // y = f/k1 - k2 f^2/k1^3 + (2 k2^2/k1^5 - k3/k1^4) f^3 + ...
        assert!((p.h3(0.0, 0.0, 0.0) - Complex64::new(0.006, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn static_series_matches_root_of_the_cubic() {
        // for constant force f, y solves k1 y + k2 y^2 + k3 y^3 = f
        let p = paper();
        let f = 1e-3;
        let mut y = f / p.k1;
        for _ in 0..50 {
            let g = p.k1 * y + p.k2 * y * y + p.k3 * y * y * y - f;
            let dg = p.k1 + 2.0 * p.k2 * y + 3.0 * p.k3 * y * y;
            y -= g / dg;
        }
        let series = p.h1(0.0).re * f + p.h2(0.0, 0.0).re * f * f + p.h3(0.0, 0.0, 0.0).re * f.powi(3);
        assert!((series - y).abs() < 1e-13, "{series} vs {y}");
    }

    #[test]
    fn linear_peak_and_phase() {
        let p = paper();
        let spec = GridSpec::LOW_ORDER;
        let g = frf1(&p, spec);
        let (jmax, _) = g
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!((spec.omega(jmax).abs() - p.omega0()).abs() <= spec.dw);
        let mut last = 0.0;
        for j in spec.half_width..spec.len() {
            let ph = g.values[j].arg();
            assert!(ph <= last + 1e-15 && ph > -PI);
            last = ph;
        }
    }

    #[test]
    fn grids_are_conjugate_symmetric() {
        let p = paper();
        let spec = GridSpec::new(0.5, 20).unwrap();
        frf1(&p, spec).check_symmetry().unwrap();
        frf2(&p, spec).check_symmetry().unwrap();
        frf3(&p, spec).unwrap().check_symmetry().unwrap();
        let mut bad = frf1(&p, spec);
        bad.values[3] += Complex64::new(0.0, 1e-3);
        assert!(matches!(bad.check_symmetry(), Err(Error::AsymmetricGrid(_))));
        bad.values.pop();
        assert!(kernel_time(&bad).is_err());
    }

    #[test]
    fn second_order_grid_is_symmetric_in_its_arguments() {
        let p = paper();
        let spec = GridSpec::new(0.3, 30).unwrap();
        let g = frf2(&p, spec);
        let n = spec.len();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (g.values[i * n + j], g.values[j * n + i]);
                assert!((a - b).norm() <= 1e-15 * a.norm());
            }
        }
    }

    #[test]
    fn impulse_response_from_inverse_transform() {
        let p = paper();
        let k = kernel_time(&frf1(&p, GridSpec::LOW_ORDER)).unwrap();
        let times = k.times();
        let (t10, h10): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&k.values)
            .filter(|(t, _)| **t <= 10.0)
            .map(|(t, h)| (*t, *h))
            .unzip();
        let exact: Vec<f64> = t10.iter().map(|&t| p.h1_impulse(t)).collect();
        assert!(rms_diff(&h10, &exact) <= 1e-3, "{}", rms_diff(&h10, &exact));
        assert!(k.values[0].abs() < 5e-3);
    }

    #[test]
    fn second_order_kernel_is_symmetric() {
        let p = paper();
        let k = kernel_time(&frf2(&p, GridSpec::new(0.2, 200).unwrap())).unwrap();
        let h = k.as_matrix().unwrap();
        assert!((&h - h.transpose()).amax() <= 1e-12 * h.amax());
    }

    #[test]
    fn diagonal_from_dense_grid_matches_streaming() {
        let p = paper();
        let spec = GridSpec::new(0.8, 24).unwrap();
        let dense = kernel_time(&frf3(&p, spec).unwrap()).unwrap();
        let stream = kernel3_diagonal(&p, spec, &dense.times()).unwrap();
        for (a, b) in dense.values.iter().zip(&stream) {
            assert!((a - b).abs() <= 1e-12 * dense.peak());
        }
    }

    #[test]
    fn first_order_projection_matches_time_quadrature() {
        let p = paper();
        let basis = LaguerreBasis::new(2.0, 24).unwrap();
        // the band limit leaves an O(1/W^2) tail, so widen the default cutoff eightfold
        let proj = project_coefficients(&p, GridSpec::new(0.1, 8192).unwrap(), &[basis]).unwrap();
        let dt = 1e-3;
        let times: Vec<f64> = (0..=20_000).map(|k| k as f64 * dt).collect();
        let h: Vec<f64> = times.iter().map(|&t| p.h1_impulse(t)).collect();
        let l = basis.eval_matrix(&times).unwrap();
        let cmax = proj.coeffs.max_abs();
        for q in 0..=24 {
            let prod: Vec<f64> = (0..times.len()).map(|i| h[i] * l[(i, q)]).collect();
            let direct = trapezoid(&prod, dt);
            let c = proj.coeffs.get(&[q]);
            assert!((c - direct).abs() <= 1e-4 * cmax, "p={q}: {c} vs {direct}");
        }
    }

    #[test]
    fn grid_projection_agrees_with_streamed_projection() {
        let p = paper();
        let spec = GridSpec::new(0.5, 40).unwrap();
        let b = LaguerreBasis::new(2.0, 5).unwrap();
        for order in 1..=3 {
            let bases = vec![b; order];
            let a = project_coefficients(&p, spec, &bases).unwrap().coeffs;
            let grid = match order {
                1 => frf1(&p, spec),
                2 => frf2(&p, spec),
                _ => frf3(&p, spec).unwrap(),
            };
            let g = project_grid(&grid, &bases).unwrap().coeffs;
            for (x, y) in a.data.iter().zip(&g.data) {
                assert!((x - y).abs() <= 1e-12 * a.max_abs());
            }
        }
    }

    #[test]
    fn projected_tensors_are_symmetric() {
        let p = paper();
        let b = LaguerreBasis::new(2.0, 8).unwrap();
        let c2 = project_coefficients(&p, GridSpec::new(0.2, 256).unwrap(), &[b, b]).unwrap();
        assert!(c2.coeffs.max_asymmetry() <= 1e-12 * c2.coeffs.max_abs());
        let c3 = project_coefficients(&p, GridSpec::new(0.8, 32).unwrap(), &[b, b, b]).unwrap();
        assert!(c3.coeffs.max_asymmetry() <= 1e-12 * c3.coeffs.max_abs());
    }

    #[test]
    fn zero_coefficients_give_zero_kernel() {
        let b = LaguerreBasis::new(2.0, 4).unwrap();
        let t = [0.0, 0.5, 1.0];
        for order in 1..=3 {
            let c = KernelCoefficients::zeros_uniform(b, order);
            assert!(reconstruct_kernel(&c, &t).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn convergence_check_reports_both_values() {
        let p = paper();
        let b = LaguerreBasis::new(2.0, 6).unwrap();
        let spec = GridSpec::new(0.1, 1024).unwrap();
        let c = project_coefficients(&p, spec, &[b]).unwrap().coeffs;
        let rep = convergence_check(&p, spec, &c, &[vec![0], vec![6]], 1e-6).unwrap();
        assert!(rep.converged, "{rep:?}");
        let coarse = GridSpec::new(1.6, 64).unwrap();
        let c = project_coefficients(&p, coarse, &[b]).unwrap().coeffs;
        let rep = convergence_check(&p, coarse, &c, &[vec![0]], 1e-6).unwrap();
        assert!(!rep.converged);
        assert_ne!(rep.spots[0].coarse, rep.spots[0].fine);
    }

    #[test]
    fn coefficient_files_round_trip() {
        let b = LaguerreBasis::new(2.0, 3).unwrap();
        let mut c = KernelCoefficients::zeros_uniform(b, 2);
        c.set(&[1, 2], 0.25);
        c.set(&[2, 1], 0.25);
        let mut buf = Vec::new();
        c.write_binary(&mut buf).unwrap();
        assert_eq!(KernelCoefficients::read_binary(buf.as_slice()).unwrap(), c);

        let g = frf2(&paper(), GridSpec::new(1.0, 3).unwrap());
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(FrfGrid::read_binary(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn shell_maxima_cover_every_entry() {
        let b = LaguerreBasis::new(2.0, 2).unwrap();
        let mut c = KernelCoefficients::zeros_uniform(b, 2);
        c.set(&[2, 2], -3.0);
        c.set(&[0, 1], 1.0);
        assert_eq!(c.shell_maxima(), vec![0.0, 1.0, 0.0, 0.0, 3.0]);
        assert!(rms(&c.data) > 0.0);
    }

    proptest! {
        #[test]
        fn frfs_are_conjugate_symmetric_pointwise(w1 in -50.0f64..50.0, w2 in -50.0f64..50.0, w3 in -50.0f64..50.0) {
            let p = paper();
            prop_assert!((p.h1(-w1) - p.h1(w1).conj()).norm() <= 1e-15 * p.h1(w1).norm());
            prop_assert!((p.h2(-w1, -w2) - p.h2(w1, w2).conj()).norm() <= 1e-14 * p.h2(w1, w2).norm());
            let h = p.h3(w1, w2, w3);
            prop_assert!((p.h3(-w1, -w2, -w3) - h.conj()).norm() <= 1e-14 * h.norm());
            prop_assert!((p.h3(w2, w3, w1) - h).norm() <= 1e-13 * h.norm());
            prop_assert!((p.h3(w1, w3, w2) - h).norm() <= 1e-13 * h.norm());
        }
    }
}
