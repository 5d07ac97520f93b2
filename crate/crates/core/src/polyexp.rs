//! Polynomial-exponential sums `sum_j c_j t^{k_j} e^{lambda_j t}`.
//!
//! Every closed-form response quantity (filtered inputs, per-order responses,
//! their natural/cross/forced parts) is one of these sums. Each exponential
//! factor that went into a term is remembered as a [`PoleTag`], which makes the
//! split into natural, cross and forced parts a purely structural operation
//! that works for any series order.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::numeric::rms;

/// Relative tolerance under which two exponents of the same class and power are merged.
pub const MERGE_RTOL: f64 = 1e-12;

/// Default tolerance for the imaginary-residue tripwire on physical outputs.
pub const IMAG_TRIPWIRE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleOrigin {
    /// The repeated pole `-a` of a Laguerre filter.
    SystemBasis,
    /// A pole `lambda_l` of the excitation.
    Excitation,
}

/// Provenance of one exponential factor of a term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoleTag {
    pub origin: PoleOrigin,
    pub index: u32,
}

impl PoleTag {
    pub fn system(index: u32) -> Self {
        PoleTag {
            origin: PoleOrigin::SystemBasis,
            index,
        }
    }

    pub fn excitation(index: u32) -> Self {
        PoleTag {
            origin: PoleOrigin::Excitation,
            index,
        }
    }
}

/// Sorted multiset of tags. Inline storage covers products of up to three factors.
pub type TagSet = SmallVec<[PoleTag; 3]>;

fn union_tags(a: &TagSet, b: &TagSet) -> TagSet {
    let mut out = TagSet::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Which part of a response a term belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseClass {
    /// Only system (basis) poles.
    Natural,
    /// Both system and excitation poles.
    Cross,
    /// Only excitation poles.
    Forced,
}

/// One term `coefficient * t^power * exp(exponent * t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyExpTerm {
    pub coefficient: Complex64,
    pub power: u32,
    pub exponent: Complex64,
    pub tags: TagSet,
}

impl PolyExpTerm {
    pub fn new(coefficient: Complex64, power: u32, exponent: Complex64, tags: TagSet) -> Self {
        let mut tags = tags;
        tags.sort_unstable();
        PolyExpTerm {
            coefficient,
            power,
            exponent,
            tags,
        }
    }

    /// `None` for an untagged term.
    pub fn class(&self) -> Option<ResponseClass> {
        if self.tags.is_empty() {
            return None;
        }
        let sys = self
            .tags
            .iter()
            .filter(|t| t.origin == PoleOrigin::SystemBasis)
            .count();
        Some(if sys == self.tags.len() {
            ResponseClass::Natural
        } else if sys == 0 {
            ResponseClass::Forced
        } else {
            ResponseClass::Cross
        })
    }

    /// Value at time `t`, switching to log-magnitude form when `t^k` or the
    /// exponential leaves the f64 range.
    pub fn eval(&self, t: f64) -> Complex64 {
        let e = (self.exponent * t).exp();
        if self.power == 0 {
            return self.coefficient * e;
        }
        if t == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let tk = t.powi(self.power as i32);
        let en = e.norm();
        if tk.is_finite() && en.is_finite() && en > 0.0 {
            let v = self.coefficient * e * tk;
            if v.re.is_finite() && v.im.is_finite() {
                return v;
            }
        }
        if self.coefficient == Complex64::new(0.0, 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        let ln = self.coefficient.ln()
            + Complex64::new(self.power as f64 * t.ln(), 0.0)
            + self.exponent * t;
        ln.exp()
    }

    fn key(&self) -> (u32, TagSet) {
        (self.power, self.tags.clone())
    }
}

/// Finite sum of [`PolyExpTerm`]s valid on `[0, horizon)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyExpSum {
    terms: Vec<PolyExpTerm>,
    horizon: f64,
}

/// Result of [`PolyExpSum::classify`].
#[derive(Clone, Debug, PartialEq)]
pub struct Classified {
    pub natural: PolyExpSum,
    pub cross: PolyExpSum,
    pub forced: PolyExpSum,
}

impl PolyExpSum {
    /// Empty sum (identically zero).
    pub fn zero(horizon: f64) -> Self {
        PolyExpSum {
            terms: Vec::new(),
            horizon,
        }
    }

    /// The multiplicative identity: a single untagged constant term.
    pub fn unit(horizon: f64) -> Self {
        PolyExpSum {
            terms: vec![PolyExpTerm::new(
                Complex64::new(1.0, 0.0),
                0,
                Complex64::new(0.0, 0.0),
                TagSet::new(),
            )],
            horizon,
        }
    }

    /// Builds a canonical sum: like terms are merged.
    pub fn from_terms(terms: Vec<PolyExpTerm>, horizon: f64) -> Self {
        let mut acc = Accumulator::new(horizon);
        for t in terms {
            acc.push(t);
        }
        acc.finish()
    }

    pub fn terms(&self) -> &[PolyExpTerm] {
        &self.terms
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::OutsideHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Value at a single time.
    pub fn evaluate_at(&self, t: f64) -> Result<Complex64> {
        self.check_time(t)?;
        Ok(self.terms.iter().map(|term| term.eval(t)).sum())
    }

    /// Pointwise values on a time grid. Every time must lie in `[0, horizon)`.
    pub fn evaluate(&self, times: &[f64]) -> Result<Vec<Complex64>> {
        times.iter().map(|&t| self.evaluate_at(t)).collect()
    }

    /// Real part of [`evaluate`](Self::evaluate), rejecting outputs whose
    /// imaginary residue exceeds `tolerance` times the RMS of the real part.
    pub fn evaluate_real(&self, times: &[f64], tolerance: f64) -> Result<Vec<f64>> {
        let z = self.evaluate(times)?;
        real_with_tripwire(&z, tolerance)
    }

    /// Product of two sums; exponents add, powers add, tag multisets unite.
    pub fn multiply(&self, other: &PolyExpSum) -> PolyExpSum {
        let mut acc = Accumulator::new(self.horizon.min(other.horizon));
        acc.add_product(self, other, Complex64::new(1.0, 0.0));
        acc.finish()
    }

    pub fn add(&self, other: &PolyExpSum) -> PolyExpSum {
        let mut acc = Accumulator::new(self.horizon.min(other.horizon));
        acc.add_scaled(self, Complex64::new(1.0, 0.0));
        acc.add_scaled(other, Complex64::new(1.0, 0.0));
        acc.finish()
    }

    pub fn scale(&self, factor: Complex64) -> PolyExpSum {
        PolyExpSum {
            terms: self
                .terms
                .iter()
                .map(|t| PolyExpTerm {
                    coefficient: t.coefficient * factor,
                    ..t.clone()
                })
                .collect(),
            horizon: self.horizon,
        }
    }

    /// Partition into natural, cross and forced parts by tag provenance.
    pub fn classify(&self) -> Result<Classified> {
        let mut natural = Vec::new();
        let mut cross = Vec::new();
        let mut forced = Vec::new();
        for (index, term) in self.terms.iter().enumerate() {
            match term.class().ok_or(Error::UntaggedTerm { index })? {
                ResponseClass::Natural => natural.push(term.clone()),
                ResponseClass::Cross => cross.push(term.clone()),
                ResponseClass::Forced => forced.push(term.clone()),
            }
        }
        let h = self.horizon;
        Ok(Classified {
            natural: PolyExpSum {
                terms: natural,
                horizon: h,
            },
            cross: PolyExpSum {
                terms: cross,
                horizon: h,
            },
            forced: PolyExpSum {
                terms: forced,
                horizon: h,
            },
        })
    }

    /// Every term has a partner with conjugated coefficient and exponent and
    /// the same power (self-conjugate terms are their own partner).
    pub fn is_conjugate_closed(&self, rtol: f64) -> bool {
        let scale = self
            .terms
            .iter()
            .map(|t| t.coefficient.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut used = vec![false; self.terms.len()];
        for i in 0..self.terms.len() {
            if used[i] {
                continue;
            }
            let a = &self.terms[i];
            let target_c = a.coefficient.conj();
            let target_l = a.exponent.conj();
            let close = |b: &PolyExpTerm| {
                b.power == a.power
                    && (b.exponent - target_l).norm() <= rtol * (1.0 + target_l.norm())
                    && (b.coefficient - target_c).norm() <= rtol * scale
            };
            if close(a) {
                used[i] = true;
                continue;
            }
            let partner = (i + 1..self.terms.len()).find(|&j| !used[j] && close(&self.terms[j]));
            match partner {
                Some(j) => {
                    used[i] = true;
                    used[j] = true;
                }
                None => return false,
            }
        }
        true
    }

    /// Drops terms whose coefficient magnitude is at most `abs_tol`.
    pub fn prune(&self, abs_tol: f64) -> PolyExpSum {
        PolyExpSum {
            terms: self
                .terms
                .iter()
                .filter(|t| t.coefficient.norm() > abs_tol)
                .cloned()
                .collect(),
            horizon: self.horizon,
        }
    }

    /// Distinct exponents present (after merging), in the stored order.
    pub fn exponents(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for t in &self.terms {
            if !out
                .iter()
                .any(|e| (*e - t.exponent).norm() <= MERGE_RTOL * (1.0 + e.norm()))
            {
                out.push(t.exponent);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SerializedSum::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<PolyExpSum> {
        let s: SerializedSum = serde_json::from_str(text)?;
        s.try_into()
    }
}

/// Takes real parts, failing when the imaginary residue is not negligible.
pub fn real_with_tripwire(z: &[Complex64], tolerance: f64) -> Result<Vec<f64>> {
    let re: Vec<f64> = z.iter().map(|v| v.re).collect();
    let im_max = z.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let scale = rms(&re);
    if im_max > 0.0 {
        let ratio = if scale > 0.0 { im_max / scale } else { f64::INFINITY };
        // a vanishing output with round-off imaginary parts is still zero
        if ratio > tolerance && im_max > 1e-300 && !(scale == 0.0 && im_max < 1e-14) {
            return Err(Error::ImaginaryResidue { ratio, tolerance });
        }
    }
    Ok(re)
}

/// Accumulates scaled sums and products with canonical like-term merging.
///
/// Terms are first merged exactly on `(power, tags)` (tags determine the
/// exponent by construction); [`finish`](Self::finish) then coalesces
/// numerically coincident exponents of the same class and power.
#[derive(Debug)]
pub struct Accumulator {
    index: HashMap<(u32, TagSet), usize>,
    terms: Vec<PolyExpTerm>,
    horizon: f64,
}

impl Accumulator {
    pub fn new(horizon: f64) -> Self {
        Accumulator {
            index: HashMap::new(),
            terms: Vec::new(),
            horizon,
        }
    }

    pub fn push(&mut self, term: PolyExpTerm) {
        match self.index.get(&term.key()) {
            Some(&i) => self.terms[i].coefficient += term.coefficient,
            None => {
                self.index.insert(term.key(), self.terms.len());
                self.terms.push(term);
            }
        }
    }

    pub fn add_scaled(&mut self, s: &PolyExpSum, factor: Complex64) {
        self.horizon = self.horizon.min(s.horizon);
        for t in &s.terms {
            self.push(PolyExpTerm {
                coefficient: t.coefficient * factor,
                ..t.clone()
            });
        }
    }

    /// Adds `factor * a * b`.
    pub fn add_product(&mut self, a: &PolyExpSum, b: &PolyExpSum, factor: Complex64) {
        self.horizon = self.horizon.min(a.horizon).min(b.horizon);
        for ta in &a.terms {
            let ca = ta.coefficient * factor;
            for tb in &b.terms {
                let tags = union_tags(&ta.tags, &tb.tags);
                let power = ta.power + tb.power;
                let coefficient = ca * tb.coefficient;
                match self.index.get(&(power, tags.clone())) {
                    Some(&i) => self.terms[i].coefficient += coefficient,
                    None => {
                        self.index.insert((power, tags.clone()), self.terms.len());
                        self.terms.push(PolyExpTerm {
                            coefficient,
                            power,
                            exponent: ta.exponent + tb.exponent,
                            tags,
                        });
                    }
                }
            }
        }
    }

    pub fn finish(self) -> PolyExpSum {
        let mut terms = self.terms;
        // coalesce coincident exponents inside each (class, power) group
        terms.sort_by(|a, b| {
            a.class()
                .cmp(&b.class())
                .then(a.power.cmp(&b.power))
                .then(a.exponent.re.total_cmp(&b.exponent.re))
                .then(a.exponent.im.total_cmp(&b.exponent.im))
        });
        let mut out: Vec<PolyExpTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            if let Some(last) = out.last_mut() {
                let tol = MERGE_RTOL * last.exponent.norm().max(t.exponent.norm());
                if last.class() == t.class()
                    && last.power == t.power
                    && (last.exponent - t.exponent).norm() <= tol
                {
                    last.coefficient += t.coefficient;
                    continue;
                }
            }
            out.push(t);
        }
        PolyExpSum {
            terms: out,
            horizon: self.horizon,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SerializedTerm {
    re: f64,
    im: f64,
    k: u32,
    lambda_re: f64,
    lambda_im: f64,
    tags: Vec<PoleTag>,
}

#[derive(Serialize, Deserialize)]
struct SerializedSum {
    /// `None` encodes an unbounded validity window.
    horizon: Option<f64>,
    terms: Vec<SerializedTerm>,
}

impl From<&PolyExpSum> for SerializedSum {
    fn from(s: &PolyExpSum) -> Self {
        SerializedSum {
            horizon: s.horizon.is_finite().then_some(s.horizon),
            terms: s
                .terms
                .iter()
                .map(|t| SerializedTerm {
                    re: t.coefficient.re,
                    im: t.coefficient.im,
                    k: t.power,
                    lambda_re: t.exponent.re,
                    lambda_im: t.exponent.im,
                    tags: t.tags.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<SerializedSum> for PolyExpSum {
    type Error = Error;

    fn try_from(s: SerializedSum) -> Result<Self> {
        let horizon = s.horizon.unwrap_or(f64::INFINITY);
        if horizon <= 0.0 || horizon.is_nan() {
            return Err(Error::Format(format!("invalid horizon {horizon}")));
        }
        let mut terms = Vec::with_capacity(s.terms.len());
        for t in s.terms {
            let c = Complex64::new(t.re, t.im);
            let l = Complex64::new(t.lambda_re, t.lambda_im);
            if !(c.re.is_finite() && c.im.is_finite() && l.re.is_finite() && l.im.is_finite()) {
                return Err(Error::Format("non-finite coefficient or exponent".into()));
            }
            terms.push(PolyExpTerm::new(c, t.k, l, t.tags.into_iter().collect()));
        }
        Ok(PolyExpSum { terms, horizon })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(coef: Complex64, k: u32, lambda: Complex64, tag: PoleTag) -> PolyExpSum {
        PolyExpSum::from_terms(
            vec![PolyExpTerm::new(coef, k, lambda, [tag].into_iter().collect())],
            f64::INFINITY,
        )
    }

    #[test]
    fn constant_term_evaluates_to_one() {
        let s = PolyExpSum::unit(f64::INFINITY);
        for t in [0.0, 0.5, 17.0] {
            assert_eq!(s.evaluate_at(t).unwrap(), c(1.0, 0.0));
        }
    }

    #[test]
    fn linear_times_decay() {
        let s = single(c(1.0, 0.0), 1, c(-2.0, 0.0), PoleTag::system(0));
        let v = s.evaluate_at(1.0).unwrap();
        assert!((v.re - (-2.0f64).exp()).abs() < 1e-15);
        assert!((v.re - 0.1353).abs() < 1e-4);
    }

    #[test]
    fn evaluation_beyond_horizon_is_rejected() {
        let s = PolyExpSum::unit(2.0);
        assert!(s.evaluate_at(1.999).is_ok());
        assert!(matches!(
            s.evaluate_at(2.0),
            Err(Error::OutsideHorizon { .. })
        ));
        assert!(s.evaluate_at(-0.1).is_err());
    }

    #[test]
    fn log_form_handles_huge_powers() {
        // 500^120 overflows f64 on its own
        let s = single(c(1.0, 0.0), 120, c(-1.0, 0.0), PoleTag::system(0));
        let v = s.evaluate_at(500.0).unwrap();
        let expected = (120.0 * 500f64.ln() - 500.0).exp();
        assert!(v.re.is_finite());
        assert!((v.re / expected - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exponents_add_under_multiplication() {
        let l1 = c(-0.1, 2.0);
        let l2 = c(0.0, -0.7);
        let a = single(c(1.0, 0.0), 0, l1, PoleTag::excitation(0));
        let b = single(c(1.0, 0.0), 0, l2, PoleTag::excitation(1));
        let p = a.multiply(&b);
        assert_eq!(p.len(), 1);
        assert_eq!(p.terms()[0].exponent, l1 + l2);
        assert_eq!(p.terms()[0].tags.len(), 2);
    }

    #[test]
    fn unit_is_multiplicative_identity() {
        let s = PolyExpSum::from_terms(
            vec![
                PolyExpTerm::new(c(2.0, 1.0), 3, c(-1.0, 4.0), [PoleTag::system(0)].into_iter().collect()),
                PolyExpTerm::new(c(0.5, 0.0), 0, c(0.0, 1.0), [PoleTag::excitation(2)].into_iter().collect()),
            ],
            f64::INFINITY,
        );
        let u = PolyExpSum::unit(f64::INFINITY);
        let p = s.multiply(&u);
        for t in [0.0, 0.3, 2.0] {
            assert!((p.evaluate_at(t).unwrap() - s.evaluate_at(t).unwrap()).norm() < 1e-15);
        }
        assert_eq!(p.len(), s.len());
    }

    #[test]
    fn classification_by_provenance() {
        let beta = single(c(1.0, 0.0), 2, c(-2.0, 0.0), PoleTag::system(0));
        let gamma = single(c(0.0, -0.5), 0, c(0.0, 1.0), PoleTag::excitation(0));
        let cl = beta.classify().unwrap();
        assert_eq!(cl.natural.len(), 1);
        assert!(cl.cross.is_empty() && cl.forced.is_empty());

        let prod = beta.multiply(&gamma).classify().unwrap();
        assert!(prod.natural.is_empty() && prod.forced.is_empty());
        assert_eq!(prod.cross.len(), 1);
    }

    #[test]
    fn untagged_terms_cannot_be_classified() {
        let u = PolyExpSum::unit(1.0);
        assert!(matches!(u.classify(), Err(Error::UntaggedTerm { index: 0 })));
    }

    #[test]
    fn coincident_exponents_merge_within_class() {
        // e^{i w t} e^{-i w t} from two different pairings lands on lambda = 0
        let w = 1.3;
        let s = PolyExpSum::from_terms(
            vec![
                PolyExpTerm::new(c(1.0, 0.0), 0, c(0.0, w), [PoleTag::excitation(0)].into_iter().collect()),
                PolyExpTerm::new(c(1.0, 0.0), 0, c(0.0, -w), [PoleTag::excitation(1)].into_iter().collect()),
            ],
            f64::INFINITY,
        );
        let sq = s.multiply(&s);
        // {0,0}, {0,1}, {1,1} tag sets; e^{2iwt}, 2 e^{0}, e^{-2iwt}
        assert_eq!(sq.len(), 3);
        let dc = sq
            .terms()
            .iter()
            .find(|t| t.exponent.norm() < 1e-15)
            .unwrap();
        assert_eq!(dc.coefficient, c(2.0, 0.0));
    }

    #[test]
    fn json_round_trip_keeps_unbounded_horizon() {
        let s = single(c(1.5, -2.0), 4, c(-2.0, 0.25), PoleTag::system(3));
        let back = PolyExpSum::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(back.horizon().is_infinite());
    }

    #[test]
    fn conjugate_closure_detected() {
        let s = PolyExpSum::from_terms(
            vec![
                PolyExpTerm::new(c(0.0, -0.5), 0, c(0.0, 2.0), [PoleTag::excitation(0)].into_iter().collect()),
                PolyExpTerm::new(c(0.0, 0.5), 0, c(0.0, -2.0), [PoleTag::excitation(1)].into_iter().collect()),
                PolyExpTerm::new(c(3.0, 0.0), 2, c(-2.0, 0.0), [PoleTag::system(0)].into_iter().collect()),
            ],
            f64::INFINITY,
        );
        assert!(s.is_conjugate_closed(1e-12));
        let broken = s.add(&single(c(0.0, 1.0), 0, c(0.0, 5.0), PoleTag::excitation(4)));
        assert!(!broken.is_conjugate_closed(1e-12));
        let sq = s.multiply(&s);
        assert!(sq.is_conjugate_closed(1e-12));
    }

    fn arb_sum(tag_base: u32) -> impl Strategy<Value = PolyExpSum> {
        prop::collection::vec(
            (
                -2.0f64..2.0,
                -2.0f64..2.0,
                0u32..4,
                -1.0f64..0.2,
                -5.0f64..5.0,
                any::<bool>(),
            ),
            5,
        )
        .prop_map(move |v| {
            let terms = v
                .into_iter()
                .enumerate()
                .map(|(i, (cr, ci, k, lr, li, sys))| {
                    let tag = if sys {
                        PoleTag::system(tag_base + i as u32)
                    } else {
                        PoleTag::excitation(tag_base + i as u32)
                    };
                    PolyExpTerm::new(c(cr, ci), k, c(lr, li), [tag].into_iter().collect())
                })
                .collect();
            PolyExpSum::from_terms(terms, f64::INFINITY)
        })
    }

    proptest! {
        #[test]
        fn evaluation_is_a_ring_homomorphism(a in arb_sum(0), b in arb_sum(10), ts in prop::collection::vec(0.0f64..6.0, 100)) {
            let p = a.multiply(&b);
            let q = b.multiply(&a);
            for &t in &ts {
                let lhs = p.evaluate_at(t).unwrap();
                let rhs = a.evaluate_at(t).unwrap() * b.evaluate_at(t).unwrap();
                let scale = a.terms().iter().map(|x| x.eval(t).norm()).sum::<f64>()
                    * b.terms().iter().map(|x| x.eval(t).norm()).sum::<f64>();
                prop_assert!((lhs - rhs).norm() <= 1e-10 * scale.max(1e-300));
                prop_assert!((lhs - q.evaluate_at(t).unwrap()).norm() <= 1e-12 * scale.max(1e-300));
            }
        }

        #[test]
        fn multiplication_is_associative(a in arb_sum(0), b in arb_sum(10), d in arb_sum(20), t in 0.0f64..4.0) {
            let l = a.multiply(&b).multiply(&d);
            let r = a.multiply(&b.multiply(&d));
            let scale = l.terms().iter().map(|x| x.eval(t).norm()).sum::<f64>().max(1e-300);
            prop_assert!((l.evaluate_at(t).unwrap() - r.evaluate_at(t).unwrap()).norm() <= 1e-11 * scale);
            prop_assert_eq!(l.len(), r.len());
        }

        #[test]
        fn classification_partitions_the_sum(a in arb_sum(0), b in arb_sum(10), t in 0.0f64..4.0) {
            let p = a.multiply(&b);
            let cl = p.classify().unwrap();
            prop_assert_eq!(cl.natural.len() + cl.cross.len() + cl.forced.len(), p.len());
            let parts = cl.natural.evaluate_at(t).unwrap() + cl.cross.evaluate_at(t).unwrap() + cl.forced.evaluate_at(t).unwrap();
            let total = p.evaluate_at(t).unwrap();
            let scale = p.terms().iter().map(|x| x.eval(t).norm()).sum::<f64>().max(1e-300);
            prop_assert!((parts - total).norm() <= 1e-12 * scale);
        }
    }
}
