//! The smooth cutoff `s` underlying every projection in the crate.
//!
//! `s` vanishes on `(-∞, -δ]`, equals one on `[δ, ∞)` and satisfies
//! `s²(t) + s²(-t) = 1`. It is realized as `s(t) = sin(π/2 · θ(t/δ))` for a
//! ramp `θ: [-1, 1] → [0, 1]` with `θ(-x) = 1 - θ(x)`. For `t > 0` the value
//! is evaluated as `cos(π/2 · θ(-t/δ))`, which makes the polarity identity
//! hold to rounding regardless of how accurately `θ` itself is computed.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::error::{param, Result};
use crate::quadrature::{adaptive, GaussLegendre};

/// Shape of the ramp `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ramp {
    /// Normalized integral of the bump `exp(-1/(1-u²))`; `panels` is the size
    /// of the precomputed cumulative table on `[-1, 0]`.
    BumpIntegral { panels: usize },
    /// Closed form `h(1+x) / (h(1+x) + h(1-x))` with `h(y) = exp(-1/y)`.
    ExpQuotient,
    /// Normalized integral of `(1-u²)^r`; only `C^r` smooth.
    Polynomial(u32),
}

impl Default for Ramp {
    fn default() -> Self {
        Ramp::BumpIntegral { panels: 64 }
    }
}

#[derive(Debug)]
struct BumpTable {
    panels: usize,
    /// `cumulative[j] = ∫_{-1}^{-1 + j/panels} w`.
    cumulative: Vec<f64>,
    total: f64,
    rule: GaussLegendre,
}

/// The cutoff `s` with transition half-width `delta`.
#[derive(Debug, Clone)]
pub struct BellFunction {
    delta: f64,
    ramp: Ramp,
    table: Option<Arc<BumpTable>>,
    poly_rule: Option<Arc<GaussLegendre>>,
}

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

fn exp_edge(y: f64) -> f64 {
    if y > 0.0 {
        (-1.0 / y).exp()
    } else {
        0.0
    }
}

/// Builds the default bell (bump-integral ramp) with half-width `delta`.
pub fn make_bell(delta: f64) -> Result<BellFunction> {
    BellFunction::new(delta, Ramp::default())
}

impl BellFunction {
    pub fn new(delta: f64, ramp: Ramp) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(param(format!("bell delta must be positive and finite, got {delta}")));
        }
        let mut bell = Self {
            delta,
            ramp,
            table: None,
            poly_rule: None,
        };
        match ramp {
            Ramp::BumpIntegral { panels } => {
                if panels == 0 {
                    return Err(param("bell table needs at least one panel"));
                }
                let h = 1.0 / panels as f64;
                let mut cumulative = Vec::with_capacity(panels + 1);
                cumulative.push(0.0);
                let mut acc = 0.0;
                for j in 0..panels {
                    let lo = -1.0 + h * j as f64;
                    acc += adaptive(bump, lo, lo + h, 1e-18);
                    cumulative.push(acc);
                }
                bell.table = Some(Arc::new(BumpTable {
                    panels,
                    total: 2.0 * acc,
                    cumulative,
                    rule: GaussLegendre::new(16),
                }));
            }
            Ramp::Polynomial(r) => {
                if r == 0 {
                    return Err(param("polynomial ramp order must be positive"));
                }
                bell.poly_rule = Some(Arc::new(GaussLegendre::new(r as usize + 1)));
            }
            Ramp::ExpQuotient => {}
        }
        Ok(bell)
    }

    /// The same ramp rebuilt at another half-width.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(delta, self.ramp)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ramp(&self) -> Ramp {
        self.ramp
    }

    /// Smoothness class of the ramp; `None` means `C^∞`.
    pub fn ramp_order(&self) -> Option<u32> {
        match self.ramp {
            Ramp::Polynomial(r) => Some(r),
            _ => None,
        }
    }

    /// Ramp `θ(x)` for `x ∈ [-1, 0]`.
    fn theta_left(&self, x: f64) -> f64 {
        match self.ramp {
            Ramp::BumpIntegral { .. } => {
                let tab = self.table.as_ref().expect("bump table");
                let pos = (x + 1.0) * tab.panels as f64;
                let j = (pos.floor() as usize).min(tab.panels - 1);
                let lo = -1.0 + j as f64 / tab.panels as f64;
                let partial = if x > lo { tab.rule.integrate(lo, x, bump) } else { 0.0 };
                (tab.cumulative[j] + partial) / tab.total
            }
            Ramp::ExpQuotient => {
                let a = exp_edge(1.0 + x);
                let b = exp_edge(1.0 - x);
                a / (a + b)
            }
            Ramp::Polynomial(r) => {
                let rule = self.poly_rule.as_ref().expect("poly rule");
                let w = |u: f64| (1.0 - u * u).powi(r as i32);
                let total = 2.0 * rule.integrate(-1.0, 0.0, w);
                rule.integrate(-1.0, x, w) / total
            }
        }
    }

    /// `s(t)`; exactly `0` for `t ≤ -δ` and exactly `1` for `t ≥ δ`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= -self.delta {
            0.0
        } else if t >= self.delta {
            1.0
        } else {
            let x = t / self.delta;
            if x <= 0.0 {
                (FRAC_PI_2 * self.theta_left(x)).sin()
            } else {
                (FRAC_PI_2 * self.theta_left(-x)).cos()
            }
        }
    }

    /// `s²(t)`.
    pub fn sq(&self, t: f64) -> f64 {
        let v = self.eval(t);
        v * v
    }

    /// `s(t)·s(-t)`, the reflection coefficient; zero outside `(-δ, δ)`.
    pub fn cross(&self, t: f64) -> f64 {
        if t.abs() >= self.delta {
            0.0
        } else {
            self.eval(t) * self.eval(-t)
        }
    }
}

/// `eval_bell` in free-function form.
pub fn eval_bell(s: &BellFunction, t: f64) -> f64 {
    s.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ramps() -> Vec<Ramp> {
        vec![Ramp::default(), Ramp::ExpQuotient, Ramp::Polynomial(3)]
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(make_bell(0.0).is_err());
        assert!(make_bell(-0.1).is_err());
        assert!(make_bell(f64::NAN).is_err());
    }

    #[test]
    fn spot_values() {
        let s = make_bell(0.5).unwrap();
        assert_eq!(s.eval(-0.5), 0.0);
        assert!((s.eval(0.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.sq(0.2) + s.sq(-0.2) - 1.0).abs() < 1e-12);
        assert_eq!(s.eval(10.0), 1.0);
        assert_eq!(s.eval(-10.0), 0.0);
    }

    #[test]
    fn polarity_monotone_and_clamped_on_grid() {
        for ramp in all_ramps() {
            for delta in [0.05, 0.3, 1.7] {
                let s = BellFunction::new(delta, ramp).unwrap();
                let n = 1000;
                let mut prev = -1.0;
                for i in 0..=n {
                    let t = -2.0 * delta + 4.0 * delta * i as f64 / n as f64;
                    let v = s.eval(t);
                    assert!((0.0..=1.0).contains(&v));
                    assert!((s.sq(t) + s.sq(-t) - 1.0).abs() < 1e-12);
                    assert!(v >= prev - 1e-14, "{ramp:?} not monotone at {t}");
                    prev = v;
                    if t <= -delta {
                        assert_eq!(v.to_bits(), 0.0f64.to_bits());
                    }
                    if t >= delta {
                        assert_eq!(v.to_bits(), 1.0f64.to_bits());
                    }
                }
            }
        }
    }

    /// Independent ramp: midpoint rule with 10⁴ nodes on the bump integral.
    fn oracle_bell(delta: f64, t: f64) -> f64 {
        let n = 10_000;
        let ramp = |x: f64| {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let u = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                let w = bump(u);
                den += w;
                if u <= x {
                    num += w;
                }
            }
            num / den
        };
        if t <= -delta {
            0.0
        } else if t >= delta {
            1.0
        } else {
            (FRAC_PI_2 * ramp(t / delta)).sin()
        }
    }

    #[test]
    fn matches_oracle_ramp() {
        let s = make_bell(0.3).unwrap();
        let v = s.eval(0.1);
        let o = oracle_bell(0.3, 0.1);
        let o_neg = oracle_bell(0.3, -0.1);
        assert!((v - o).abs() < 1e-3, "{v} vs oracle {o}");
        assert!((o * o + o_neg * o_neg - 1.0).abs() < 1e-3);
        assert!((v * v + s.eval(-0.1).powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_refinement_is_converged() {
        let coarse = BellFunction::new(1.0, Ramp::BumpIntegral { panels: 64 }).unwrap();
        let fine = BellFunction::new(1.0, Ramp::BumpIntegral { panels: 256 }).unwrap();
        for i in 0..200 {
            let t = -1.0 + 2.0 * i as f64 / 199.0;
            assert!((coarse.eval(t) - fine.eval(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn ramps_differ() {
        let a = BellFunction::new(1.0, Ramp::default()).unwrap();
        let b = BellFunction::new(1.0, Ramp::ExpQuotient).unwrap();
        assert!((a.eval(-0.5) - b.eval(-0.5)).abs() > 1e-3);
    }
}
