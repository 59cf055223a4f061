//! Operators on `S¹` obtained by wrapping 1-D Hestenes operators, and their
//! averages over rotations.
//!
//! Points of `S¹` and rotations `z ∈ SO(2)` are both carried as angles; a
//! function on the circle is an evaluator of a `2π`-periodic angle. The
//! embedding into the plane used by the sphere code is `t ↦ (sin t, cos t)`.

use std::f64::consts::TAU;

use crate::bell::BellFunction;
use crate::error::{param, Result};
use crate::hestenes1d::{decompose_mr, projection_interval, IntervalProjectionSpec, Operator1D};
use crate::quadrature::PanelRule;

/// Reduces an angle to `[0, 2π)`.
pub fn normalize_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A 1-D operator localized on an interval of length `< 2π`, read on the
/// circle through the chart window `[rho, rho + 2π)`.
#[derive(Clone, Debug)]
pub struct CircleOperator {
    base: Operator1D,
    rho: f64,
}

impl CircleOperator {
    pub fn new(base: Operator1D, rho: f64) -> Result<Self> {
        let loc = base.localization();
        if !(loc.width() < TAU) {
            return Err(param(format!(
                "circle operator needs a localization shorter than 2π, got [{}, {}]",
                loc.lo, loc.hi
            )));
        }
        if !(rho < loc.lo && loc.hi < rho + TAU) {
            return Err(param(format!(
                "anchor {rho} must satisfy rho < {} and {} < rho + 2π",
                loc.lo, loc.hi
            )));
        }
        Ok(Self { base, rho })
    }

    pub fn base(&self) -> &Operator1D {
        &self.base
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Same operator read through a different admissible anchor.
    pub fn with_anchor(&self, rho: f64) -> Result<Self> {
        Self::new(self.base.clone(), rho)
    }

    /// Chart coordinate of an angle inside `[rho, rho + 2π)`.
    #[inline]
    pub fn chart(&self, angle: f64) -> f64 {
        self.rho + (angle - self.rho).rem_euclid(TAU)
    }

    /// `(c, angle')` pairs with `P̃f(angle) = Σ c·f(angle')`.
    pub fn expand_into(&self, angle: f64, out: &mut Vec<(f64, f64)>) {
        self.base.expand_into(self.chart(angle), out);
    }

    pub fn apply<F: Fn(f64) -> f64 + ?Sized>(&self, f: &F, angle: f64) -> f64 {
        self.base.apply(f, self.chart(angle))
    }

    /// End points of all term supports, i.e. where the action may be non-smooth.
    pub fn seams(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.base.terms() {
            for e in [t.support.lo, t.support.hi] {
                if e.is_finite() {
                    out.push(e);
                }
            }
        }
        out
    }
}

/// Arc `Ψ₁([alpha, beta])` with the transition width of `bell`.
#[derive(Debug, Clone)]
pub struct ArcSpec {
    pub alpha: f64,
    pub beta: f64,
    pub bell: BellFunction,
}

impl ArcSpec {
    pub fn new(alpha: f64, beta: f64, bell: BellFunction) -> Result<Self> {
        let spec = Self { alpha, beta, bell };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.beta - self.alpha;
        if !(len > 0.0 && len < TAU) {
            return Err(param(format!("arc length beta - alpha = {len} must lie in (0, 2π)")));
        }
        let d = self.bell.delta();
        if !(2.0 * d < len.min(TAU - len)) {
            return Err(param(format!(
                "arc needs 2 delta < min(beta - alpha, 2π - (beta - alpha)); delta = {d}, length = {len}"
            )));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.beta - self.alpha
    }

    /// Average constant `(β - α)/2π`.
    pub fn constant(&self) -> f64 {
        self.length() / TAU
    }

    fn interval_spec(&self) -> IntervalProjectionSpec {
        IntervalProjectionSpec {
            alpha: self.alpha,
            beta: self.beta,
            bell: self.bell.clone(),
        }
    }

    /// Anchor in the middle of the gap left by the enlarged arc.
    fn default_anchor(&self) -> f64 {
        let d = self.bell.delta();
        let gap = TAU - self.length() - 2.0 * d;
        self.alpha - d - 0.5 * gap
    }
}

/// `P_Q`, the wrap of `P_[α,β]` onto the circle.
pub fn circle_projection(spec: &ArcSpec) -> Result<CircleOperator> {
    spec.validate()?;
    let p = projection_interval(&spec.interval_spec())?;
    CircleOperator::new(p, spec.default_anchor())
}

/// Wrapped reflection `R̃_α` of the decomposition `P_Q = M̃ + R̃_α - R̃_β`.
pub fn circle_reflection_alpha(spec: &ArcSpec) -> Result<CircleOperator> {
    spec.validate()?;
    let (_, ra, _) = decompose_mr(&spec.interval_spec())?;
    CircleOperator::new(ra, spec.default_anchor())
}

/// `τ_z P̃ τ_{z⁻¹}` for `z = e^{iu}`, built as the wrap of `T_u P T_{-u}`.
pub fn rotate_conjugate(op: &CircleOperator, angle: f64) -> CircleOperator {
    CircleOperator {
        base: op.base.translate_conjugate(angle),
        rho: op.rho + angle,
    }
}

/// `τ_z P̃ τ_{z⁻¹} f(w)` evaluated straight from the definition of `τ`.
pub fn rotate_conjugate_apply<F: Fn(f64) -> f64 + ?Sized>(
    op: &CircleOperator,
    angle: f64,
    f: &F,
    w: f64,
) -> f64 {
    op.apply(&|x: f64| f(x + angle), w - angle)
}

/// Rotation angles `u ∈ [0, 2π)` at which `u ↦ τ_z P̃ τ_{z⁻¹} f(w)` may lose
/// smoothness: the point `w - u` crosses a term seam.
fn average_breaks(op: &CircleOperator, w: f64) -> Vec<f64> {
    op.seams().into_iter().map(|e| normalize_angle(w - e)).collect()
}

/// Normalized rotation average `(1/2π)∫₀^{2π} τ_z P̃ τ_{z⁻¹} f(w) du`.
pub fn marcinkiewicz_average_s1<F: Fn(f64) -> f64 + ?Sized>(
    op: &CircleOperator,
    f: &F,
    w: f64,
    rule: &PanelRule,
) -> f64 {
    let breaks = average_breaks(op, w);
    rule.integrate(0.0, TAU, &breaks, |u| rotate_conjugate_apply(op, u, f, w)) / TAU
}

/// Average with a panel count doubled until two successive estimates agree
/// within `tol`. Returns `(value, estimate of the error, panels used)`.
pub fn marcinkiewicz_average_s1_converged<F: Fn(f64) -> f64 + ?Sized>(
    op: &CircleOperator,
    f: &F,
    w: f64,
    order: usize,
    tol: f64,
) -> (f64, f64, usize) {
    let mut panels = 1;
    let mut prev = marcinkiewicz_average_s1(op, f, w, &PanelRule::new(order, panels));
    loop {
        panels *= 2;
        let next = marcinkiewicz_average_s1(op, f, w, &PanelRule::new(order, panels));
        let est = (next - prev).abs();
        if est < tol || panels >= 1024 {
            return (next, est, panels);
        }
        prev = next;
    }
}

/// The multiplier profile `m_Q` on the circle.
pub fn mq_profile(spec: &ArcSpec) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    let s = spec.clone();
    move |angle: f64| {
        let d = s.bell.delta();
        let start = s.alpha - d;
        let t = start + (angle - start).rem_euclid(TAU);
        if t <= s.alpha + d {
            s.bell.sq(t - s.alpha)
        } else if t < s.beta - d {
            1.0
        } else if t <= s.beta + d {
            s.bell.sq(s.beta - t)
        } else {
            0.0
        }
    }
}

/// `(1/2π)∫ m_Q`, by panels split at the profile's transitions.
pub fn mq_integral(spec: &ArcSpec, rule: &PanelRule) -> f64 {
    let m = mq_profile(spec);
    let d = spec.bell.delta();
    let lo = spec.alpha - d;
    let breaks = [spec.alpha + d, spec.beta - d, spec.beta + d];
    rule.integrate(lo, lo + TAU, &breaks, m) / TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::make_bell;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn arc(a: f64, b: f64, d: f64) -> ArcSpec {
        ArcSpec::new(a, b, make_bell(d).unwrap()).unwrap()
    }

    #[test]
    fn arc_constraints() {
        let bell = make_bell(0.5).unwrap();
        assert!(ArcSpec::new(0.0, 0.9, bell.clone()).is_err());
        assert!(ArcSpec::new(0.0, TAU - 0.9, bell.clone()).is_err());
        assert!(ArcSpec::new(0.0, 3.0, bell.clone()).is_ok());
        assert!(ArcSpec::new(1.0, 1.0, bell).is_err());
    }

    #[test]
    fn projection_values_and_idempotence() {
        let sp = arc(0.3, 2.0, 0.2);
        let p = circle_projection(&sp).unwrap();
        assert_eq!(p.apply(&|_| 1.0, 1.0), 1.0);
        assert_eq!(p.apply(&|_| 1.0, 4.0), 0.0);
        // Same point seen as another representative angle.
        assert_eq!(p.apply(&|_| 1.0, 1.0 + TAU), 1.0);
        let f = |t: f64| (3.0 * t).sin() + t.cos();
        for i in 0..200 {
            let w = TAU * i as f64 / 200.0;
            let pf = |x: f64| p.apply(&f, x);
            assert!((p.apply(&pf, w) - p.apply(&f, w)).abs() < 1e-13);
        }
    }

    #[test]
    fn anchor_independence() {
        let sp = arc(0.3, 2.0, 0.2);
        let p = circle_projection(&sp).unwrap();
        let q = p.with_anchor(-3.0).unwrap();
        assert!(p.with_anchor(0.2).is_err());
        let f = |t: f64| (2.0 * t).cos() + 0.5 * t.sin();
        for i in 0..100 {
            let w = -7.0 + 14.0 * i as f64 / 99.0;
            assert!((p.apply(&f, w) - q.apply(&f, w)).abs() <= 1e-14);
        }
    }

    #[test]
    fn rotation_conjugation_two_ways() {
        let sp = arc(0.0, 2.0, 0.25);
        let p = circle_projection(&sp).unwrap();
        let u = PI / 3.0;
        let wrapped = rotate_conjugate(&p, u);
        let direct = circle_projection(&arc(u, 2.0 + u, 0.25)).unwrap();
        let f = |t: f64| (t - 0.2).sin().powi(2) + (2.0 * t).cos();
        for i in 0..100 {
            let w = TAU * i as f64 / 100.0;
            let a = wrapped.apply(&f, w);
            assert!((a - direct.apply(&f, w)).abs() <= 1e-14);
            assert!((a - rotate_conjugate_apply(&p, u, &f, w)).abs() <= 1e-14);
        }
        let ident = rotate_conjugate(&p, 0.0);
        assert_eq!(ident.apply(&f, 1.0), p.apply(&f, 1.0));
        let twice = rotate_conjugate(&rotate_conjugate(&p, 0.7), 1.1);
        let once = rotate_conjugate(&p, 1.8);
        for i in 0..50 {
            let w = TAU * i as f64 / 50.0;
            assert!((twice.apply(&f, w) - once.apply(&f, w)).abs() <= 1e-14);
        }
    }

    #[test]
    fn average_constants() {
        let rule = PanelRule::new(32, 4);
        let sp = arc(0.0, FRAC_PI_2, 0.1);
        let p = circle_projection(&sp).unwrap();
        let v = marcinkiewicz_average_s1(&p, &|_| 1.0, 0.4, &rule);
        assert!((v - 0.25).abs() < 1e-10, "{v}");
        let sp = arc(0.0, PI, 0.2);
        let p = circle_projection(&sp).unwrap();
        let v = marcinkiewicz_average_s1(&p, &f64::cos, 0.0, &rule);
        assert!((v - 0.5).abs() < 1e-10, "{v}");
        assert_eq!(marcinkiewicz_average_s1(&p, &|_| 0.0, 0.0, &rule), 0.0);
        let (v, est, _) = marcinkiewicz_average_s1_converged(&p, &f64::sin, 1.0, 32, 1e-12);
        assert!(est < 1e-12);
        assert!((v - 0.5 * 1f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn profile_values_and_mass() {
        let sp = arc(0.0, FRAC_PI_2, 0.1);
        let m = mq_profile(&sp);
        assert_eq!(m(0.5), 1.0);
        assert_eq!(m(-0.1), 0.0);
        assert_eq!(m(3.0), 0.0);
        let mass = mq_integral(&sp, &PanelRule::new(32, 4));
        assert!((mass - 0.25).abs() < 1e-12, "{mass}");
    }

    #[test]
    fn reflection_terms_cancel_under_haar_invariance() {
        // ∫ τ_z R̃_α τ_{z⁻¹} f(w) dμ(z) = ∫ τ_{zv} R̃_α τ_{(zv)⁻¹} f(w) dμ(z), v = e^{i(β-α)}.
        let sp = arc(0.2, 2.4, 0.3);
        let r = circle_reflection_alpha(&sp).unwrap();
        let v = sp.length();
        let f = |t: f64| (t + 0.3).cos().exp();
        let rule = PanelRule::new(32, 8);
        for w in [0.0, 1.3, 4.4] {
            let breaks: Vec<f64> = r.seams().iter().flat_map(|e| [normalize_angle(w - e), normalize_angle(w - e - v)]).collect();
            let lhs = rule.integrate(0.0, TAU, &breaks, |u| rotate_conjugate_apply(&r, u, &f, w));
            let rhs = rule.integrate(0.0, TAU, &breaks, |u| rotate_conjugate_apply(&r, u + v, &f, w));
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} {rhs}");
            assert!(lhs.abs() > 1e-3);
        }
    }
}
