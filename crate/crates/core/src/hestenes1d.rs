//! One-dimensional Hestenes operators: finite sums of `φ(t)·f(Φ(t))` with an
//! affine `Φ(t) = ±t + b`.
//!
//! Functions are evaluators and operators act pointwise, so every operator
//! identity here is exact up to rounding; quadrature only enters through
//! [`average_translates`] and the inner products used in tests.

use std::fmt;
use std::sync::Arc;

use crate::bell::BellFunction;
use crate::error::{param, Error, Result};
use crate::quadrature::PanelRule;

/// Smooth scalar coefficient of a simple term.
pub type Coeff = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed interval, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn shifted(&self, k: f64) -> Interval {
        Interval::new(self.lo + k, self.hi + k)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `t ↦ sign·t + shift` with `sign = ±1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub sign: f64,
    pub shift: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap { sign: 1.0, shift: 0.0 };

    /// Reflection `t ↦ 2c - t`.
    pub fn reflection(center: f64) -> Self {
        Self {
            sign: -1.0,
            shift: 2.0 * center,
        }
    }

    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        self.sign * t + self.shift
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            sign: self.sign * inner.sign,
            shift: self.sign * inner.shift + self.shift,
        }
    }

    /// Preimage of an interval.
    pub fn preimage(&self, iv: &Interval) -> Interval {
        let a = (iv.lo - self.shift) * self.sign;
        let b = (iv.hi - self.shift) * self.sign;
        Interval::new(a.min(b), a.max(b))
    }
}

/// `coeff(t)·f(map(t))`, with `coeff` vanishing off `support`.
#[derive(Clone)]
pub struct SimpleTerm1D {
    pub coeff: Coeff,
    pub map: AffineMap,
    pub support: Interval,
}

impl fmt::Debug for SimpleTerm1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimpleTerm1D")
            .field("map", &self.map)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

/// Finite linear combination of simple terms, with a localization interval
/// `K`: images are supported in `K`, and functions vanishing on `K` are
/// annihilated.
#[derive(Clone, Debug)]
pub struct Operator1D {
    terms: Vec<SimpleTerm1D>,
    localization: Interval,
}

impl Operator1D {
    pub fn new(terms: Vec<SimpleTerm1D>, localization: Interval) -> Self {
        Self { terms, localization }
    }

    pub fn zero() -> Self {
        Self {
            terms: Vec::new(),
            localization: Interval::new(0.0, 0.0),
        }
    }

    pub fn identity() -> Self {
        Self::multiplier(Arc::new(|_| 1.0), Interval::REAL_LINE)
    }

    pub fn multiplier(coeff: Coeff, support: Interval) -> Self {
        Self {
            terms: vec![SimpleTerm1D {
                coeff,
                map: AffineMap::IDENTITY,
                support,
            }],
            localization: support,
        }
    }

    pub fn terms(&self) -> &[SimpleTerm1D] {
        &self.terms
    }

    pub fn localization(&self) -> Interval {
        self.localization
    }

    /// Same terms with a declared localization interval.
    pub fn with_localization(mut self, localization: Interval) -> Self {
        self.localization = localization;
        self
    }

    /// Nonzero `(coefficient, argument)` pairs at `t`, so that
    /// `apply(f, t) = Σ c·f(arg)`.
    pub fn expand_into(&self, t: f64, out: &mut Vec<(f64, f64)>) {
        for term in &self.terms {
            if term.support.contains(t) {
                let c = (term.coeff)(t);
                if c != 0.0 {
                    out.push((c, term.map.apply(t)));
                }
            }
        }
    }

    pub fn expand(&self, t: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.terms.len());
        self.expand_into(t, &mut out);
        out
    }

    /// Pointwise application `(Tf)(t)`.
    pub fn apply<F: Fn(f64) -> f64 + ?Sized>(&self, f: &F, t: f64) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            if term.support.contains(t) {
                let c = (term.coeff)(t);
                if c != 0.0 {
                    acc += c * f(term.map.apply(t));
                }
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let c = t.coeff.clone();
                SimpleTerm1D {
                    coeff: Arc::new(move |x| factor * c(x)),
                    map: t.map,
                    support: t.support,
                }
            })
            .collect();
        Self {
            terms,
            localization: self.localization,
        }
    }

    /// `self + other`.
    pub fn add(&self, other: &Operator1D) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let localization = match (self.terms.is_empty(), other.terms.is_empty()) {
            (true, _) => other.localization,
            (_, true) => self.localization,
            _ => self.localization.hull(&other.localization),
        };
        Self { terms, localization }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Operator1D) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// `self ∘ inner`, expanded term by term.
    pub fn compose(&self, inner: &Operator1D) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * inner.terms.len());
        for a in &self.terms {
            for b in &inner.terms {
                let pre = a.map.preimage(&b.support);
                let support = Interval::new(a.support.lo.max(pre.lo), a.support.hi.min(pre.hi));
                if support.lo > support.hi {
                    continue;
                }
                let (ca, cb, ma) = (a.coeff.clone(), b.coeff.clone(), a.map);
                terms.push(SimpleTerm1D {
                    coeff: Arc::new(move |t| {
                        let x = ca(t);
                        if x == 0.0 {
                            0.0
                        } else {
                            x * cb(ma.apply(t))
                        }
                    }),
                    map: b.map.after(&a.map),
                    support,
                });
            }
        }
        let localization = if self.terms.is_empty() || inner.terms.is_empty() {
            Interval::new(0.0, 0.0)
        } else {
            self.localization.hull(&inner.localization)
        };
        Self { terms, localization }
    }

    /// `T_k ∘ self ∘ T_{-k}` with `T_k f(x) = f(x - k)`.
    pub fn translate_conjugate(&self, k: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let c = t.coeff.clone();
                SimpleTerm1D {
                    coeff: Arc::new(move |x| c(x - k)),
                    map: AffineMap {
                        sign: t.map.sign,
                        shift: t.map.shift + k - t.map.sign * k,
                    },
                    support: t.support.shifted(k),
                }
            })
            .collect();
        Self {
            terms,
            localization: self.localization.shifted(k),
        }
    }
}

/// Free-function forms of the operator algebra.
pub fn op_add(a: &Operator1D, b: &Operator1D) -> Operator1D {
    a.add(b)
}

pub fn op_compose(a: &Operator1D, b: &Operator1D) -> Operator1D {
    a.compose(b)
}

pub fn op_apply<F: Fn(f64) -> f64 + ?Sized>(op: &Operator1D, f: &F, t: f64) -> f64 {
    op.apply(f, t)
}

pub fn translate_conjugate(op: &Operator1D, k: f64) -> Operator1D {
    op.translate_conjugate(k)
}

/// Parameters of the smooth projection onto `[alpha, beta]`.
#[derive(Debug, Clone)]
pub struct IntervalProjectionSpec {
    pub alpha: f64,
    pub beta: f64,
    pub bell: BellFunction,
}

impl IntervalProjectionSpec {
    pub fn new(alpha: f64, beta: f64, bell: BellFunction) -> Result<Self> {
        let spec = Self { alpha, beta, bell };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta - self.alpha > 2.0 * self.bell.delta()) {
            return Err(param(format!(
                "projection onto [{}, {}] needs beta - alpha > 2 delta = {}",
                self.alpha,
                self.beta,
                2.0 * self.bell.delta()
            )));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.bell.delta()
    }

    /// `[alpha - delta, beta + delta]`.
    pub fn localization(&self) -> Interval {
        Interval::new(self.alpha - self.delta(), self.beta + self.delta())
    }

    /// The multiplier profile `m`: `s²(t-α)` near α, `1` inside, `s²(β-t)` near β.
    pub fn multiplier_value(&self, t: f64) -> f64 {
        let d = self.delta();
        if t < self.alpha - d || t > self.beta + d {
            0.0
        } else if t <= self.alpha + d {
            self.bell.sq(t - self.alpha)
        } else if t < self.beta - d {
            1.0
        } else {
            self.bell.sq(self.beta - t)
        }
    }
}

/// `R_c f(t) = s(t-c)s(c-t) f(2c-t)`.
pub fn reflection_term(bell: &BellFunction, center: f64) -> Operator1D {
    let b = bell.clone();
    let d = bell.delta();
    let support = Interval::new(center - d, center + d);
    Operator1D::new(
        vec![SimpleTerm1D {
            coeff: Arc::new(move |t| b.cross(t - center)),
            map: AffineMap::reflection(center),
            support,
        }],
        support,
    )
}

/// Multiplier `M`, and the reflections `R_α`, `R_β` with `P = M + R_α - R_β`.
pub fn decompose_mr(spec: &IntervalProjectionSpec) -> Result<(Operator1D, Operator1D, Operator1D)> {
    spec.validate()?;
    let s = spec.clone();
    let m = Operator1D::multiplier(Arc::new(move |t| s.multiplier_value(t)), spec.localization());
    Ok((
        m,
        reflection_term(&spec.bell, spec.alpha),
        reflection_term(&spec.bell, spec.beta),
    ))
}

/// The smooth orthogonal projection `P_[α,β]`, localized on `[α-δ, β+δ]`.
pub fn projection_interval(spec: &IntervalProjectionSpec) -> Result<Operator1D> {
    let (m, ra, rb) = decompose_mr(spec)?;
    let mut op = m.add(&ra).sub(&rb);
    op.localization = spec.localization();
    Ok(op)
}

/// `∫ P_[ξ+α, ξ+β] f(t) dξ` by Gauss–Legendre panels over `xi_range`.
///
/// The integrand vanishes off `[t-β-δ, t-α+δ]`; `xi_range` must cover it.
pub fn average_translates<F: Fn(f64) -> f64 + ?Sized>(
    spec: &IntervalProjectionSpec,
    f: &F,
    t: f64,
    xi_range: (f64, f64),
    rule: &PanelRule,
) -> Result<f64> {
    let p = projection_interval(spec)?;
    let d = spec.delta();
    let need = (t - spec.beta - d, t - spec.alpha + d);
    if xi_range.0 > need.0 || xi_range.1 < need.1 {
        return Err(Error::Coverage {
            lo: xi_range.0,
            hi: xi_range.1,
            need_lo: need.0,
            need_hi: need.1,
        });
    }
    let breaks = [
        t - spec.beta - d,
        t - spec.beta + d,
        t - spec.alpha - d,
        t - spec.alpha + d,
    ];
    // T_ξ P T_{-ξ} f(t) = (P f(· + ξ))(t - ξ).
    Ok(rule.integrate(need.0, need.1, &breaks, |xi| {
        p.apply(&|x: f64| f(x + xi), t - xi)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::make_bell;

    fn spec(a: f64, b: f64, d: f64) -> IntervalProjectionSpec {
        IntervalProjectionSpec::new(a, b, make_bell(d).unwrap()).unwrap()
    }

    #[test]
    fn rejects_narrow_interval() {
        let bell = make_bell(0.5).unwrap();
        assert!(IntervalProjectionSpec::new(0.0, 1.0, bell.clone()).is_err());
        assert!(IntervalProjectionSpec::new(0.0, 1.01, bell).is_ok());
    }

    #[test]
    fn branch_values() {
        let sp = spec(0.0, 1.0, 0.2);
        let p = projection_interval(&sp).unwrap();
        let one = |_: f64| 1.0;
        assert_eq!(p.apply(&one, 0.5), 1.0);
        assert_eq!(p.apply(&one, -0.3), 0.0);
        assert_eq!(p.apply(&one, 1.3), 0.0);
        let id = |x: f64| x;
        let s = &sp.bell;
        let expect = s.sq(0.1) * 0.1 + s.eval(0.1) * s.eval(-0.1) * (-0.1);
        assert!((p.apply(&id, 0.1) - expect).abs() < 1e-15);
        // Branch at β: s²(β-t) f(t) - s(t-β)s(β-t) f(2β-t).
        let t = 0.93;
        let expect = s.sq(1.0 - t) * t - s.eval(t - 1.0) * s.eval(1.0 - t) * (2.0 - t);
        assert!((p.apply(&id, t) - expect).abs() < 1e-15);
    }

    #[test]
    fn decomposition_matches_branch_formula() {
        let sp = spec(-0.4, 1.3, 0.3);
        let (m, ra, rb) = decompose_mr(&sp).unwrap();
        let p = projection_interval(&sp).unwrap();
        let f = |x: f64| (3.0 * x).sin() + x * x;
        for i in 0..100 {
            let t = -1.0 + 3.0 * i as f64 / 99.0;
            let lhs = m.apply(&f, t) + ra.apply(&f, t) - rb.apply(&f, t);
            assert!((lhs - p.apply(&f, t)).abs() < 1e-14);
        }
        // Middle zone: only the multiplier is active.
        assert_eq!(m.apply(&|_| 1.0, 0.5), 1.0);
        assert_eq!(ra.apply(&f, 0.5), 0.0);
        assert_eq!(rb.apply(&f, 0.5), 0.0);
    }

    #[test]
    fn reflection_twice() {
        let sp = spec(0.0, 2.0, 0.4);
        let (_, ra, _) = decompose_mr(&sp).unwrap();
        let rr = ra.compose(&ra);
        let f = |x: f64| x.exp();
        let s = &sp.bell;
        for t in [-0.3, -0.1, 0.05, 0.25] {
            let c = s.eval(t) * s.eval(-t);
            assert!((rr.apply(&f, t) - c * c * f(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn translation_conjugate_matches_shifted_projection() {
        let p = projection_interval(&spec(0.0, 1.0, 0.2)).unwrap();
        let q = p.translate_conjugate(2.0);
        let direct = projection_interval(&spec(2.0, 3.0, 0.2)).unwrap();
        assert_eq!(q.localization(), Interval::new(1.8, 3.2));
        let f = |x: f64| (x * 1.7).cos() + 0.3 * x;
        for i in 0..100 {
            let t = 1.5 + 2.0 * i as f64 / 99.0;
            assert!((q.apply(&f, t) - direct.apply(&f, t)).abs() < 1e-14);
        }
        let same = p.translate_conjugate(0.0);
        for i in 0..50 {
            let t = -0.5 + 2.0 * i as f64 / 49.0;
            assert_eq!(same.apply(&f, t), p.apply(&f, t));
        }
    }

    #[test]
    fn sum_rule_and_idempotence() {
        let d = 0.15;
        let a = projection_interval(&spec(0.0, 0.7, d)).unwrap();
        let b = projection_interval(&spec(0.7, 1.6, d)).unwrap();
        let ab = projection_interval(&spec(0.0, 1.6, d)).unwrap();
        let sum = op_add(&a, &b);
        let pp = op_compose(&ab, &ab);
        let f = |x: f64| (2.0 * x).sin() + 1.0;
        for i in 0..200 {
            let t = -0.5 + 2.6 * i as f64 / 199.0;
            assert!((sum.apply(&f, t) - ab.apply(&f, t)).abs() < 1e-14);
            assert!((pp.apply(&f, t) - ab.apply(&f, t)).abs() < 1e-13);
        }
        assert_eq!(Operator1D::zero().apply(&f, 0.3), 0.0);
    }

    #[test]
    fn average_translates_constants() {
        let rule = PanelRule::new(32, 4);
        let sp = spec(0.0, 1.0, 0.2);
        let v = average_translates(&sp, &|_| 1.0, 0.3, (-5.0, 5.0), &rule).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
        let sp = spec(0.0, std::f64::consts::PI, 0.3);
        let v = average_translates(&sp, &f64::cos, 0.0, (-10.0, 10.0), &rule).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-9, "{v}");
        let v = average_translates(&sp, &|_| 0.0, 0.0, (-10.0, 10.0), &rule).unwrap();
        assert_eq!(v, 0.0);
        assert!(matches!(
            average_translates(&sp, &|_| 1.0, 0.0, (-1.0, 1.0), &rule),
            Err(Error::Coverage { .. })
        ));
    }
}
