//! Closed-form Volterra responses in pole-residue form.
//!
//! A Laguerre filter driven by `f(t) = sum_l alpha_l exp(lambda_l t)` gives
//!
//! `x_p(t) = sum_k beta_{p,k} t^k / k! exp(-a t) + sum_l gamma_{p,l} exp(lambda_l t)`
//!
//! and the order-`n` response is `y_n = sum c_{p1..pn} x_{p1} ... x_{pn}`.
//! Responses are produced twice: symbolically as a [`PolyExpSum`] (for export
//! and structural queries) and numerically through a stable factored
//! evaluation (for time series).

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::excitation::ExponentialSignal;
use crate::frf::KernelCoefficients;
use crate::laguerre::LaguerreBasis;
use crate::numeric::dd::{Dd, DdComplex};
use crate::polyexp::{
    Accumulator, Classified, PoleOrigin, PoleTag, PolyExpSum, PolyExpTerm, TagSet,
    IMAG_TRIPWIRE,
};

/// Smallest admissible `|lambda + a|`.
pub const COLLISION_TOL: f64 = 1e-6;

fn check_collisions(basis: &LaguerreBasis, exc: &ExponentialSignal) -> Result<()> {
    for c in &exc.components {
        let distance = (c.lambda + basis.a).norm();
        if distance < COLLISION_TOL {
            return Err(Error::PoleCollision {
                lambda: c.lambda,
                a: basis.a,
                distance,
            });
        }
    }
    Ok(())
}

/// `gamma_{p,l} = alpha_l * l~_p(lambda_l)`, one per excitation component.
pub fn residues_gamma(
    basis: &LaguerreBasis,
    p: usize,
    exc: &ExponentialSignal,
) -> Result<Vec<Complex64>> {
    if p > basis.order {
        return Err(Error::InvalidParameter(format!(
            "order {p} exceeds basis order {}",
            basis.order
        )));
    }
    check_collisions(basis, exc)?;
    Ok(exc
        .components
        .iter()
        .map(|c| c.alpha * basis.laplace(p, c.lambda))
        .collect())
}

/// Per-component `beta_{p,k}` for unit residue, `k = 0..=p`, in double-double.
///
/// With `mu = lambda + a`, `beta_p = -b_p / mu` and
/// `beta_k = (beta_{k+1} - b_k) / mu`.
fn beta_unit(b: &[Dd], mu: Complex64) -> Vec<Complex64> {
    let inv = DdComplex::from(mu).recip();
    let mut out = vec![Complex64::new(0.0, 0.0); b.len()];
    let mut acc = DdComplex::ZERO;
    for k in (0..b.len()).rev() {
        acc = (acc - DdComplex::new(b[k], Dd::ZERO)) * inv;
        out[k] = acc.to_c64();
    }
    out
}

/// `beta_{p,k}` for `k = 0..=p`, summed over excitation components.
pub fn coeffs_beta(
    basis: &LaguerreBasis,
    p: usize,
    exc: &ExponentialSignal,
) -> Result<Vec<Complex64>> {
    check_collisions(basis, exc)?;
    let b = basis.laplace_coeffs_dd(p)?;
    let mut out = vec![Complex64::new(0.0, 0.0); p + 1];
    for c in &exc.components {
        for (o, v) in out.iter_mut().zip(beta_unit(&b, c.lambda + basis.a)) {
            *o += c.alpha * v;
        }
    }
    Ok(out)
}

/// `x_p` in closed form.
#[derive(Clone, Debug)]
pub struct FilteredInput {
    pub p: usize,
    pub beta: Vec<Complex64>,
    pub gamma: Vec<Complex64>,
    pub sum: PolyExpSum,
}

/// Closed-form `x_p` with the basis pole tagged as system pole 0.
pub fn filtered_input(
    basis: &LaguerreBasis,
    p: usize,
    exc: &ExponentialSignal,
) -> Result<FilteredInput> {
    FilterBank::new(*basis, exc, 0)?.filtered_input(p)
}

/// All filtered inputs `x_0..x_R` of one basis for one excitation.
#[derive(Clone, Debug)]
pub struct FilterBank {
    pub basis: LaguerreBasis,
    pub tag: u32,
    excitation: ExponentialSignal,
    /// Row `p`, column `k`; zero for `k > p`.
    beta: DMatrix<Complex64>,
    /// Row `p`, column `l`.
    gamma: DMatrix<Complex64>,
}

/// One basis monomial `t^k exp(lambda t)` of a filter bank.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub power: u32,
    pub exponent: Complex64,
    pub tag: PoleTag,
}

impl FilterBank {
    pub fn new(basis: LaguerreBasis, exc: &ExponentialSignal, tag: u32) -> Result<Self> {
        check_collisions(&basis, exc)?;
        let r = basis.len();
        let nl = exc.len();
        let mut beta = DMatrix::zeros(r, r);
        let mut gamma = DMatrix::zeros(r, nl);
        for p in 0..r {
            let b = basis.laplace_coeffs_dd(p)?;
            for c in exc.components.iter() {
                for (k, v) in beta_unit(&b, c.lambda + basis.a).into_iter().enumerate() {
                    beta[(p, k)] += c.alpha * v;
                }
            }
        }
        for (l, c) in exc.components.iter().enumerate() {
            for (p, v) in basis.laplace_all(c.lambda).into_iter().enumerate() {
                gamma[(p, l)] = c.alpha * v;
            }
        }
        Ok(FilterBank {
            basis,
            tag,
            excitation: exc.clone(),
            beta,
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.excitation.horizon
    }

    /// `t^k e^{-at}` for `k = 0..=R`, then `e^{lambda_l t}` per component.
    pub fn monomials(&self) -> Vec<Monomial> {
        let sys = (0..self.len()).map(|k| Monomial {
            power: k as u32,
            exponent: Complex64::new(-self.basis.a, 0.0),
            tag: PoleTag::system(self.tag),
        });
        let exc = self.excitation.components.iter().enumerate().map(|(l, c)| Monomial {
            power: 0,
            exponent: c.lambda,
            tag: PoleTag::excitation(l as u32),
        });
        sys.chain(exc).collect()
    }

    /// Coefficients of every `x_p` on [`monomials`](Self::monomials), one row per `p`.
    pub fn monomial_matrix(&self) -> DMatrix<Complex64> {
        let r = self.len();
        let nl = self.excitation.len();
        let mut fact = 1.0;
        let mut inv_fact = Vec::with_capacity(r);
        for k in 0..r {
            if k > 0 {
                fact *= k as f64;
            }
            inv_fact.push(1.0 / fact);
        }
        DMatrix::from_fn(r, r + nl, |p, u| {
            if u < r {
                self.beta[(p, u)] * inv_fact[u]
            } else {
                self.gamma[(p, u - r)]
            }
        })
    }

    pub fn filtered_input(&self, p: usize) -> Result<FilteredInput> {
        if p > self.basis.order {
            return Err(Error::InvalidParameter(format!(
                "order {p} exceeds basis order {}",
                self.basis.order
            )));
        }
        let row = self.monomial_matrix().row(p).clone_owned();
        let terms = self
            .monomials()
            .into_iter()
            .zip(row.iter())
            .filter(|(m, _)| m.tag.origin == PoleOrigin::Excitation || m.power as usize <= p)
            .map(|(m, c)| {
                let tags: TagSet = [m.tag].into_iter().collect();
                PolyExpTerm::new(*c, m.power, m.exponent, tags)
            })
            .collect();
        Ok(FilteredInput {
            p,
            beta: (0..=p).map(|k| self.beta[(p, k)]).collect(),
            gamma: self.gamma.row(p).iter().copied().collect(),
            sum: PolyExpSum::from_terms(terms, self.horizon()),
        })
    }

    /// Natural and forced parts of every `x_p` on `times`, each `times x (R+1)`.
    ///
    /// The forced part is `sum_l gamma_{p,l} e^{lambda_l t}`. The natural part
    /// is not summed from `beta` (the polynomial terms cancel heavily for large
    /// `p` and `t`); per unit residue it obeys
    /// `mu J_p = -l_p(t) + 2a S_p`, `S_0 = 0`, `S_{p+1} = J_p - S_p`.
    pub fn evaluate(&self, times: &[f64]) -> Result<FilterSeries> {
        let r = self.len();
        let nt = times.len();
        let two_a = 2.0 * self.basis.a;
        // an exact conjugate partner is folded into its mate as twice the real part
        let cs = &self.excitation.components;
        let mut comps: Vec<(usize, f64)> = Vec::with_capacity(cs.len());
        let mut folded = vec![false; cs.len()];
        for i in 0..cs.len() {
            if folded[i] {
                continue;
            }
            let mate = (i + 1..cs.len()).find(|&j| {
                !folded[j]
                    && cs[i].lambda.im != 0.0
                    && cs[j].lambda == cs[i].lambda.conj()
                    && cs[j].alpha == cs[i].alpha.conj()
            });
            match mate {
                Some(j) => {
                    folded[j] = true;
                    comps.push((i, 2.0));
                }
                None => comps.push((i, 1.0)),
            }
        }
        let comps: Vec<(Complex64, Complex64, Complex64, usize, f64)> = comps
            .into_iter()
            .map(|(i, w)| {
                let c = cs[i];
                (c.alpha, c.lambda, 1.0 / (c.lambda + self.basis.a), i, w)
            })
            .collect();
        let mut natural = DMatrix::zeros(nt, r);
        let mut forced = DMatrix::zeros(nt, r);
        let mut nat = vec![Complex64::new(0.0, 0.0); r];
        let mut frc = vec![Complex64::new(0.0, 0.0); r];
        let mut im_max: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if !(t >= 0.0 && t < self.horizon()) {
                return Err(Error::OutsideHorizon {
                    t,
                    horizon: self.horizon(),
                });
            }
            let l = self.basis.eval_upto(self.basis.order, t)?;
            nat.fill(Complex64::new(0.0, 0.0));
            frc.fill(Complex64::new(0.0, 0.0));
            for &(alpha, lambda, inv_mu, li, w) in &comps {
                let mut s = Complex64::new(0.0, 0.0);
                let e = (lambda * t).exp();
                let g = self.gamma.column(li);
                for p in 0..r {
                    let j = (two_a * s - l[p]) * inv_mu;
                    s = j - s;
                    let (n, f) = (alpha * j, g[p] * e);
                    if w == 1.0 {
                        nat[p] += n;
                        frc[p] += f;
                    } else {
                        nat[p].re += w * n.re;
                        frc[p].re += w * f.re;
                    }
                }
            }
            for p in 0..r {
                natural[(i, p)] = nat[p].re;
                forced[(i, p)] = frc[p].re;
                im_max = im_max.max(nat[p].im.abs()).max(frc[p].im.abs());
            }
        }
        let scale = (natural.norm_squared() + forced.norm_squared()).sqrt()
            / ((2 * nt * r).max(1) as f64).sqrt();
        if im_max > IMAG_TRIPWIRE * scale && im_max > 1e-14 {
            return Err(Error::ImaginaryResidue {
                ratio: im_max / scale,
                tolerance: IMAG_TRIPWIRE,
            });
        }
        Ok(FilterSeries { natural, forced })
    }
}

/// Sampled filtered inputs split by pole origin.
#[derive(Clone, Debug)]
pub struct FilterSeries {
    pub natural: DMatrix<f64>,
    pub forced: DMatrix<f64>,
}

impl FilterSeries {
    pub fn total(&self) -> DMatrix<f64> {
        &self.natural + &self.forced
    }
}

/// Symbolic per-order responses and their sum.
#[derive(Clone, Debug)]
pub struct SymbolicResponse {
    pub orders: Vec<PolyExpSum>,
    pub total: PolyExpSum,
}

fn check_orders(coeffs: &[KernelCoefficients], order: usize) -> Result<()> {
    if order == 0 || order > 3 {
        return Err(Error::OrderMismatch(format!(
            "series order must be 1, 2 or 3, got {order}"
        )));
    }
    if coeffs.len() < order {
        return Err(Error::OrderMismatch(format!(
            "order {order} requested but only {} coefficient tensors given",
            coeffs.len()
        )));
    }
    for (i, c) in coeffs.iter().take(order).enumerate() {
        if c.order != i + 1 {
            return Err(Error::OrderMismatch(format!(
                "tensor {} has order {}, expected {}",
                i,
                c.order,
                i + 1
            )));
        }
    }
    Ok(())
}

/// One filter bank per distinct basis; `axes[n][i]` indexes the bank of axis `i` of order `n+1`.
struct Banks {
    banks: Vec<FilterBank>,
    axes: Vec<Vec<usize>>,
}

impl Banks {
    fn new(coeffs: &[KernelCoefficients], exc: &ExponentialSignal, order: usize) -> Result<Self> {
        let mut banks: Vec<FilterBank> = Vec::new();
        let mut axes = Vec::new();
        for c in coeffs.iter().take(order) {
            let mut ax = Vec::new();
            for b in &c.bases {
                let i = match banks.iter().position(|k| k.basis == *b) {
                    Some(i) => i,
                    None => {
                        banks.push(FilterBank::new(*b, exc, banks.len() as u32)?);
                        banks.len() - 1
                    }
                };
                ax.push(i);
            }
            axes.push(ax);
        }
        Ok(Banks { banks, axes })
    }
}

/// `D[u1..un] = sum c_{p1..pn} X1[p1,u1] ... Xn[pn,un]`, row-major over `u`.
fn contract_symbolic(c: &KernelCoefficients, xs: &[DMatrix<Complex64>]) -> Vec<Complex64> {
    let shape = c.shape();
    let mut cur: Vec<Complex64> = c.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut dims = shape.clone();
    // contract the last axis first; after each step the new axis moves to the front
    for ax in (0..shape.len()).rev() {
        let x = &xs[ax];
        let (p, u) = (x.nrows(), x.ncols());
        let outer: usize = dims[..dims.len() - 1].iter().product();
        let mut next = vec![Complex64::new(0.0, 0.0); u * outer];
        for o in 0..outer {
            for pi in 0..p {
                let v = cur[o * p + pi];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for ui in 0..u {
                    next[ui * outer + o] += v * x[(pi, ui)];
                }
            }
        }
        dims.pop();
        dims.insert(0, u);
        cur = next;
    }
    cur
}

/// Symbolic `y_1..y_N` and their total.
pub fn assemble_response(
    coeffs: &[KernelCoefficients],
    exc: &ExponentialSignal,
    order: usize,
) -> Result<SymbolicResponse> {
    check_orders(coeffs, order)?;
    let banks = Banks::new(coeffs, exc, order)?;
    let horizon = exc.horizon;
    let mut orders = Vec::with_capacity(order);
    for (n, c) in coeffs.iter().take(order).enumerate() {
        let ax = &banks.axes[n];
        let xs: Vec<DMatrix<Complex64>> =
            ax.iter().map(|&b| banks.banks[b].monomial_matrix()).collect();
        let monos: Vec<Vec<Monomial>> = ax.iter().map(|&b| banks.banks[b].monomials()).collect();
        let d = contract_symbolic(c, &xs);
        let dims: Vec<usize> = xs.iter().map(|x| x.ncols()).collect();
        let mut acc = Accumulator::new(horizon);
        let mut idx = vec![0usize; dims.len()];
        for v in d {
            if v != Complex64::new(0.0, 0.0) {
                let mut tags = TagSet::new();
                let mut power = 0;
                let mut exponent = Complex64::new(0.0, 0.0);
                for (a, &i) in idx.iter().enumerate() {
                    let m = &monos[a][i];
                    tags.push(m.tag);
                    power += m.power;
                    exponent += m.exponent;
                }
                acc.push(PolyExpTerm::new(v, power, exponent, tags));
            }
            for a in (0..dims.len()).rev() {
                idx[a] += 1;
                if idx[a] < dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        let y = acc.finish();
        let bound: usize = dims.iter().product();
        if y.len() > bound {
            return Err(Error::TermCountExceeded {
                count: y.len(),
                bound,
            });
        }
        orders.push(y);
    }
    let mut acc = Accumulator::new(horizon);
    for y in &orders {
        acc.add_scaled(y, Complex64::new(1.0, 0.0));
    }
    Ok(SymbolicResponse {
        orders,
        total: acc.finish(),
    })
}

/// Natural, cross and forced parts of a symbolic response.
pub fn decompose_response(y: &PolyExpSum) -> Result<Classified> {
    y.classify()
}

/// One order of a sampled response with its natural/cross/forced split.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderSeries {
    pub total: Vec<f64>,
    pub natural: Vec<f64>,
    pub cross: Vec<f64>,
    pub forced: Vec<f64>,
}

/// Sampled closed-form response.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseSeries {
    pub times: Vec<f64>,
    /// `orders[n]` is `y_{n+1}`.
    pub orders: Vec<OrderSeries>,
}

impl ResponseSeries {
    fn sum_of(&self, f: impl Fn(&OrderSeries) -> &Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.times.len()];
        for o in &self.orders {
            for (a, b) in out.iter_mut().zip(f(o)) {
                *a += b;
            }
        }
        out
    }

    pub fn total(&self) -> Vec<f64> {
        self.sum_of(|o| &o.total)
    }

    pub fn natural(&self) -> Vec<f64> {
        self.sum_of(|o| &o.natural)
    }

    pub fn cross(&self) -> Vec<f64> {
        self.sum_of(|o| &o.cross)
    }

    pub fn forced(&self) -> Vec<f64> {
        self.sum_of(|o| &o.forced)
    }

    /// Columns `t, y1, y2, y3, total, y_s, y_c, y_f`; missing orders are zero.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y1,y2,y3,total,y_s,y_c,y_f")?;
        let zero = vec![0.0; self.times.len()];
        let y: Vec<&Vec<f64>> = (0..3)
            .map(|n| self.orders.get(n).map(|o| &o.total).unwrap_or(&zero))
            .collect();
        let (tot, nat, cro, frc) = (self.total(), self.natural(), self.cross(), self.forced());
        for (i, t) in self.times.iter().enumerate() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                t, y[0][i], y[1][i], y[2][i], tot[i], nat[i], cro[i], frc[i]
            )?;
        }
        Ok(())
    }
}

/// `sum c_{p1..pn} A1[t,p1] ... An[t,pn]` for every row `t`.
///
/// The last axis is contracted by one matrix product; the remaining axes are
/// applied column by column so every pass runs over contiguous time samples.
fn contract_rows(c: &KernelCoefficients, a: &[&DMatrix<f64>]) -> Vec<f64> {
    let s = c.shape();
    let nt = a[0].nrows();
    let same_inputs = a.iter().all(|m| std::ptr::eq(*m, a[0]));
    let symmetric = c.order >= 2 && same_inputs && c.max_asymmetry() <= 1e-12 * c.max_abs();
    let mut out = vec![0.0; nt];
    match c.order {
        1 => {
            let cv = DMatrix::from_column_slice(s[0], 1, &c.data);
            out.copy_from_slice((a[0] * cv).as_slice());
        }
        2 => {
            // V[:, p] = sum_q c[p,q] A2[:, q]
            let v = a[1] * DMatrix::from_row_slice(s[0], s[1], &c.data).transpose();
            for p in 0..s[0] {
                axpy_product(&mut out, v.column(p).as_slice(), a[0].column(p).as_slice(), None);
            }
        }
        _ if symmetric => {
            // sorted triples p <= q <= k with permutation multiplicities,
            // accumulated over blocks of contiguous time samples
            let r = s[0];
            let mut w = Vec::with_capacity(r * (r + 1) * (r + 2) / 6);
            for p in 0..r {
                for q in p..r {
                    for k in q..r {
                        let mult = match (p == q, q == k) {
                            (true, true) => 1.0,
                            (false, false) => 6.0,
                            _ => 3.0,
                        };
                        w.push(mult * c.get(&[p, q, k]));
                    }
                }
            }
            const BLOCK: usize = 256;
            let x = a[0];
            let mut tmp = [0.0; BLOCK];
            let mut u = [0.0; BLOCK];
            for b0 in (0..nt).step_by(BLOCK) {
                let b1 = (b0 + BLOCK).min(nt);
                let len = b1 - b0;
                let col = |k: usize| &x.as_slice()[k * nt + b0..k * nt + b1];
                let mut off = 0;
                for p in 0..r {
                    u[..len].fill(0.0);
                    for q in p..r {
                        tmp[..len].fill(0.0);
                        for k in q..r {
                            let wk = w[off];
                            off += 1;
                            for (t, xk) in tmp[..len].iter_mut().zip(col(k)) {
                                *t += wk * xk;
                            }
                        }
                        for ((uu, t), xq) in u[..len].iter_mut().zip(&tmp[..len]).zip(col(q)) {
                            *uu += t * xq;
                        }
                    }
                    for ((o, uu), xp) in out[b0..b1].iter_mut().zip(&u[..len]).zip(col(p)) {
                        *o += uu * xp;
                    }
                }
            }
        }
        _ => {
            // V[:, (p,q)] = sum_k c[p,q,k] A3[:, k]
            let cm = DMatrix::from_row_slice(s[0] * s[1], s[2], &c.data);
            let v = a[2] * cm.transpose();
            for p in 0..s[0] {
                for q in 0..s[1] {
                    axpy_product(
                        &mut out,
                        v.column(p * s[1] + q).as_slice(),
                        a[0].column(p).as_slice(),
                        Some(a[1].column(q).as_slice()),
                    );
                }
            }
        }
    }
    out
}

/// `out += v * x` or `out += v * x * z`, elementwise.
fn axpy_product(out: &mut [f64], v: &[f64], x: &[f64], z: Option<&[f64]>) {
    match z {
        None => {
            for ((o, v), x) in out.iter_mut().zip(v).zip(x) {
                *o += v * x;
            }
        }
        Some(z) => {
            for (((o, v), x), z) in out.iter_mut().zip(v).zip(x).zip(z) {
                *o += v * x * z;
            }
        }
    }
}

/// Sampled `y_1..y_N` with natural/cross/forced parts, by factored evaluation.
///
/// Natural and forced parts contract only the natural or only the forced
/// filter series; the cross part is the remainder.
pub fn evaluate_response(
    coeffs: &[KernelCoefficients],
    exc: &ExponentialSignal,
    order: usize,
    times: &[f64],
) -> Result<ResponseSeries> {
    check_orders(coeffs, order)?;
    let banks = Banks::new(coeffs, exc, order)?;
    let series: Vec<FilterSeries> = banks
        .banks
        .iter()
        .map(|b| b.evaluate(times))
        .collect::<Result<_>>()?;
    let totals: Vec<DMatrix<f64>> = series.iter().map(|s| s.total()).collect();
    let naturals: Vec<&DMatrix<f64>> = series.iter().map(|s| &s.natural).collect();
    let forceds: Vec<&DMatrix<f64>> = series.iter().map(|s| &s.forced).collect();
    let totals: Vec<&DMatrix<f64>> = totals.iter().collect();
    let mut orders = Vec::with_capacity(order);
    for (n, c) in coeffs.iter().take(order).enumerate() {
        let ax = &banks.axes[n];
        let pick = |m: &[&DMatrix<f64>]| {
            let mats: Vec<&DMatrix<f64>> = ax.iter().map(|&b| m[b]).collect();
            contract_rows(c, &mats)
        };
        let total = pick(&totals);
        let natural = pick(&naturals);
        let forced = pick(&forceds);
        let cross = if n == 0 {
            vec![0.0; times.len()]
        } else {
            total
                .iter()
                .zip(&natural)
                .zip(&forced)
                .map(|((t, s), f)| t - s - f)
                .collect()
        };
        orders.push(OrderSeries {
            total,
            natural,
            cross,
            forced,
        });
    }
    Ok(ResponseSeries {
        times: times.to_vec(),
        orders,
    })
}

/// Sampled total `y_1 + ... + y_N` without the component split.
pub fn evaluate_total(
    coeffs: &[KernelCoefficients],
    exc: &ExponentialSignal,
    order: usize,
    times: &[f64],
) -> Result<Vec<f64>> {
    check_orders(coeffs, order)?;
    let banks = Banks::new(coeffs, exc, order)?;
    let totals: Vec<DMatrix<f64>> = banks
        .banks
        .iter()
        .map(|b| b.evaluate(times).map(|s| s.total()))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; times.len()];
    for (n, c) in coeffs.iter().take(order).enumerate() {
        let mats: Vec<&DMatrix<f64>> = banks.axes[n].iter().map(|&b| &totals[b]).collect();
        for (o, v) in out.iter_mut().zip(contract_rows(c, &mats)) {
            *o += v;
        }
    }
    Ok(out)
}
