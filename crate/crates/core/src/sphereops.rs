//! Operators on `S^k`: multipliers, latitudinal operators `P^#`, lifted
//! operators `Û`, rotation conjugates, sums and compositions, together with
//! the projections `U`, `P_Ω`, `P_B` and their rotation averages.
//!
//! Every operator is applied through a finite expansion
//! `P f(x) = Σ c_i(x) f(y_i(x))`, exactly as for the one-dimensional case.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::bell::BellFunction;
use crate::circle::{circle_projection, ArcSpec, CircleOperator};
use crate::error::{param, Error, Result};
use crate::hestenes1d::{AffineMap, Interval, Operator1D, SimpleTerm1D};
use crate::lattice::Point;
use crate::quadrature::{ordered_par_sum, PanelRule};
use crate::spheregeom::{
    circle_angle, norm, polar, psi_angles, sphere_box_quadrature, Measure, QuadratureRule, Rotation,
    SpherePoint,
};

/// A function on the sphere, evaluated on unit vectors.
pub type SphereFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// What a lifted operator acts with on each latitude slice.
#[derive(Clone, Debug)]
pub enum LiftInner {
    Circle(CircleOperator),
    Sphere(Box<SphereOperator>),
}

#[derive(Clone)]
pub enum SphereOperator {
    /// `f ↦ ψ f` on `S^k`.
    Multiplier { psi: SphereFn, k: usize },
    /// `P^#`: a 1-D operator acting on the polar angle.
    Latitudinal { op: Operator1D, k: usize },
    /// `Û`: acts on each slice `f^t`; zero at the poles.
    Lifted { inner: LiftInner, k: usize },
    /// `T_η P T_{η⁻¹}`.
    Conjugated { inner: Box<SphereOperator>, rot: Rotation },
    /// `Σ a_i P_i`.
    Sum(Vec<(f64, SphereOperator)>),
    /// `outer ∘ inner`.
    Compose(Box<SphereOperator>, Box<SphereOperator>),
}

impl fmt::Debug for SphereOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SphereOperator::Multiplier { k, .. } => write!(f, "Multiplier(S^{k})"),
            SphereOperator::Latitudinal { k, op } => write!(f, "Latitudinal(S^{k}, {} terms)", op.terms().len()),
            SphereOperator::Lifted { inner, k } => f.debug_tuple("Lifted").field(k).field(inner).finish(),
            SphereOperator::Conjugated { inner, .. } => f.debug_tuple("Conjugated").field(inner).finish(),
            SphereOperator::Sum(v) => f.debug_list().entries(v.iter().map(|(_, o)| o)).finish(),
            SphereOperator::Compose(a, b) => f.debug_tuple("Compose").field(a).field(b).finish(),
        }
    }
}

impl SphereOperator {
    pub fn multiplier(psi: SphereFn, k: usize) -> Self {
        SphereOperator::Multiplier { psi, k }
    }

    pub fn conjugated(&self, rot: &Rotation) -> Self {
        SphereOperator::Conjugated { inner: Box::new(self.clone()), rot: rot.clone() }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SphereOperator) -> Self {
        SphereOperator::Compose(Box::new(self.clone()), Box::new(inner.clone()))
    }

    /// `self - other`.
    pub fn sub(&self, other: &SphereOperator) -> Self {
        SphereOperator::Sum(vec![(1.0, self.clone()), (-1.0, other.clone())])
    }

    pub fn add(&self, other: &SphereOperator) -> Self {
        SphereOperator::Sum(vec![(1.0, self.clone()), (1.0, other.clone())])
    }

    /// Dimension `k` of the sphere `S^k` acted on.
    pub fn k(&self) -> usize {
        match self {
            SphereOperator::Multiplier { k, .. }
            | SphereOperator::Latitudinal { k, .. }
            | SphereOperator::Lifted { k, .. } => *k,
            SphereOperator::Conjugated { rot, .. } => rot.dim() - 1,
            SphereOperator::Sum(v) => v.first().map(|(_, o)| o.k()).unwrap_or(2),
            SphereOperator::Compose(a, _) => a.k(),
        }
    }

    /// Appends `(c, y)` with `P f(x) = Σ c f(y)`; zero coefficients are dropped.
    pub fn expand_into(&self, x: &[f64], out: &mut Vec<(f64, Point)>) {
        match self {
            SphereOperator::Multiplier { psi, .. } => {
                let c = psi(x);
                if c != 0.0 {
                    out.push((c, x.iter().copied().collect()));
                }
            }
            SphereOperator::Latitudinal { op, .. } => {
                let (t, xi) = polar(x);
                let mut buf = Vec::new();
                op.expand_into(t, &mut buf);
                for (c, s) in buf {
                    out.push((c, SpherePoint::from_polar(s, &xi).into_vec()));
                }
            }
            SphereOperator::Lifted { inner, .. } => {
                let k = x.len() - 1;
                if norm(&x[..k]) == 0.0 {
                    return;
                }
                let (t, xi) = polar(x);
                match inner {
                    LiftInner::Circle(c) => {
                        let mut buf = Vec::new();
                        c.expand_into(circle_angle(xi[0], xi[1]), &mut buf);
                        for (a, ang) in buf {
                            let (s, co) = ang.sin_cos();
                            out.push((a, SpherePoint::from_polar(t, &[s, co]).into_vec()));
                        }
                    }
                    LiftInner::Sphere(op) => {
                        let mut buf = Vec::new();
                        op.expand_into(&xi, &mut buf);
                        for (a, y) in buf {
                            out.push((a, SpherePoint::from_polar(t, &y).into_vec()));
                        }
                    }
                }
            }
            SphereOperator::Conjugated { inner, rot } => {
                let y = rot.apply_inverse(x);
                let start = out.len();
                inner.expand_into(&y, out);
                for (_, p) in &mut out[start..] {
                    *p = rot.apply(p);
                }
            }
            SphereOperator::Sum(parts) => {
                for (a, op) in parts {
                    let start = out.len();
                    op.expand_into(x, out);
                    for (c, _) in &mut out[start..] {
                        *c *= a;
                    }
                }
            }
            SphereOperator::Compose(outer, inner) => {
                let mut first = Vec::new();
                outer.expand_into(x, &mut first);
                for (c, y) in first {
                    let start = out.len();
                    inner.expand_into(&y, out);
                    for (d, _) in &mut out[start..] {
                        *d *= c;
                    }
                }
            }
        }
    }

    /// Expansion with coincident points merged and zero terms dropped.
    pub fn expand(&self, x: &[f64]) -> Vec<(f64, Point)> {
        let mut out = Vec::new();
        self.expand_into(x, &mut out);
        merge_terms(&mut out);
        out
    }

    pub fn apply<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F, x: &[f64]) -> f64 {
        let mut buf = Vec::new();
        self.expand_into(x, &mut buf);
        merge_terms(&mut buf);
        buf.iter().map(|(c, y)| c * f(y)).sum()
    }

    /// Coordinate box outside of which images vanish, with the seams where
    /// the expansion may lose smoothness. Only available on `S²`.
    pub fn region(&self) -> Option<ChartRegion> {
        if self.k() != 2 {
            return None;
        }
        Some(self.region_k2())
    }

    fn region_k2(&self) -> ChartRegion {
        match self {
            SphereOperator::Multiplier { .. } => ChartRegion::whole(),
            SphereOperator::Latitudinal { op, .. } => {
                let loc = op.localization();
                let mut r = ChartRegion::whole();
                r.t = (loc.lo.max(0.0), loc.hi.min(PI));
                r.t_breaks = seams(op);
                r.t_maps = op.terms().iter().map(|t| t.map).collect();
                r
            }
            SphereOperator::Lifted { inner: LiftInner::Circle(c), .. } => {
                let loc = c.base().localization();
                let mut r = ChartRegion::whole();
                r.lon = Some((loc.lo, loc.hi));
                r.lon_breaks = c.seams();
                r.lon_maps = c.base().terms().iter().map(|t| t.map).collect();
                r
            }
            SphereOperator::Lifted { .. } => ChartRegion::whole(),
            SphereOperator::Conjugated { inner, rot } => {
                let mut r = inner.region_k2();
                r.frame = rot.compose(&r.frame);
                r
            }
            SphereOperator::Sum(parts) => {
                let regions: Vec<ChartRegion> = parts.iter().map(|(_, o)| o.region_k2()).collect();
                let mut it = regions.into_iter();
                let first = it.next().unwrap_or_else(ChartRegion::whole);
                it.fold(first, |a, b| a.union(&b))
            }
            SphereOperator::Compose(outer, inner) => outer.region_k2().compose(&inner.region_k2()),
        }
    }
}

fn seams(op: &Operator1D) -> Vec<f64> {
    let mut v = Vec::new();
    for t in op.terms() {
        for e in [t.support.lo, t.support.hi] {
            if e.is_finite() {
                v.push(e);
            }
        }
    }
    v
}

/// Region `frame · Ψ₂([t₀, t₁] × [λ₀, λ₁])` of `S²`, with seams in both
/// coordinates; `lon = None` is the full circle.
#[derive(Clone, Debug)]
pub struct ChartRegion {
    pub frame: Rotation,
    pub t: (f64, f64),
    pub t_breaks: Vec<f64>,
    pub lon: Option<(f64, f64)>,
    pub lon_breaks: Vec<f64>,
    t_maps: Vec<AffineMap>,
    lon_maps: Vec<AffineMap>,
}

fn same_frame(a: &Rotation, b: &Rotation) -> bool {
    a.matrix().iter().zip(b.matrix()).all(|(x, y)| (x - y).abs() <= 1e-15)
}

fn moves(maps: &[AffineMap]) -> bool {
    maps.iter().any(|m| *m != AffineMap::IDENTITY)
}

fn pulled_back(maps: &[AffineMap], breaks: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for m in maps {
        for &b in breaks {
            out.push((b - m.shift) * m.sign);
        }
    }
    out
}

impl ChartRegion {
    pub fn whole() -> Self {
        Self {
            frame: Rotation::identity(3),
            t: (0.0, PI),
            t_breaks: Vec::new(),
            lon: None,
            lon_breaks: Vec::new(),
            t_maps: vec![AffineMap::IDENTITY],
            lon_maps: vec![AffineMap::IDENTITY],
        }
    }

    fn union(&self, other: &ChartRegion) -> ChartRegion {
        if !same_frame(&self.frame, &other.frame) {
            return ChartRegion::whole();
        }
        let lon = match (self.lon, other.lon) {
            (Some(a), Some(b)) if (a.1.max(b.1) - a.0.min(b.0)) < TAU => Some((a.0.min(b.0), a.1.max(b.1))),
            _ => None,
        };
        ChartRegion {
            frame: self.frame.clone(),
            t: (self.t.0.min(other.t.0), self.t.1.max(other.t.1)),
            t_breaks: [self.t_breaks.clone(), other.t_breaks.clone()].concat(),
            lon,
            lon_breaks: [self.lon_breaks.clone(), other.lon_breaks.clone()].concat(),
            t_maps: [self.t_maps.clone(), other.t_maps.clone()].concat(),
            lon_maps: [self.lon_maps.clone(), other.lon_maps.clone()].concat(),
        }
    }

    /// Region of `outer ∘ inner` where `self` describes `outer`.
    fn compose(&self, inner: &ChartRegion) -> ChartRegion {
        if !same_frame(&self.frame, &inner.frame) {
            return ChartRegion::whole();
        }
        let t = if moves(&self.t_maps) {
            self.t
        } else {
            (self.t.0.max(inner.t.0), self.t.1.min(inner.t.1))
        };
        let lon = if moves(&self.lon_maps) {
            self.lon
        } else {
            match (self.lon, inner.lon) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => Some((a.0.max(b.0), a.1.min(b.1))),
            }
        };
        let mut t_breaks = [self.t_breaks.clone(), inner.t_breaks.clone()].concat();
        t_breaks.extend(pulled_back(&self.t_maps, &inner.t_breaks));
        let mut lon_breaks = [self.lon_breaks.clone(), inner.lon_breaks.clone()].concat();
        lon_breaks.extend(pulled_back(&self.lon_maps, &inner.lon_breaks));
        let mut t_maps = Vec::new();
        for a in &self.t_maps {
            for b in &inner.t_maps {
                t_maps.push(b.after(a));
            }
        }
        let mut lon_maps = Vec::new();
        for a in &self.lon_maps {
            for b in &inner.lon_maps {
                lon_maps.push(b.after(a));
            }
        }
        ChartRegion { frame: self.frame.clone(), t, t_breaks, lon, lon_breaks, t_maps, lon_maps }
    }

    /// Closed membership in the chart coordinates of the region.
    pub fn contains(&self, x: &[f64]) -> bool {
        let y = self.frame.apply_inverse(x);
        let a = psi_angles(&y);
        if a[0] < self.t.0 || a[0] > self.t.1 {
            return false;
        }
        match self.lon {
            None => true,
            Some((lo, hi)) => (a[1] - lo).rem_euclid(TAU) <= hi - lo,
        }
    }

    /// Patch-aligned rule over the region, nodes mapped through the frame.
    pub fn quadrature(&self, rule: &PanelRule, measure: Measure) -> Result<QuadratureRule<Point>> {
        let lon = self.lon.unwrap_or((0.0, TAU));
        let mut lb = self.lon_breaks.clone();
        for b in self.lon_breaks.iter() {
            lb.push(b + TAU);
            lb.push(b - TAU);
        }
        let mut q = sphere_box_quadrature(self.t, &self.t_breaks, lon, &lb, rule, measure)?;
        for p in &mut q.nodes {
            *p = self.frame.apply(p);
        }
        Ok(q)
    }
}

/// Parameters of the latitudinal projection `U` at angle `ϑ` on `S^k`.
#[derive(Clone, Debug)]
pub struct LatitudinalSpec {
    pub theta: f64,
    pub k: usize,
    pub bell: BellFunction,
}

impl LatitudinalSpec {
    pub fn new(theta: f64, k: usize, bell: BellFunction) -> Result<Self> {
        let s = Self { theta, k, bell };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(param("latitudinal operators need k >= 2"));
        }
        let d = self.delta();
        if !(0.0 < self.theta - d && self.theta + d < FRAC_PI_2) {
            return Err(param(format!(
                "need 0 < theta - delta < theta + delta < pi/2 (theta = {}, delta = {d})",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.bell.delta()
    }
}

/// Reflection `t ↦ 2ϑ - t` weighted by `s(t-ϑ)s(ϑ-t)(sin(2ϑ-t)/sin t)^{(k-1)/2}`.
pub fn l_theta(theta: f64, k: usize, bell: &BellFunction) -> Result<Operator1D> {
    let d = bell.delta();
    if !(0.0 < theta - d && theta + d < PI) {
        return Err(param(format!("transition band around {theta} must lie inside (0, pi)")));
    }
    let b = bell.clone();
    let p = 0.5 * (k as f64 - 1.0);
    let support = Interval::new(theta - d, theta + d);
    Ok(Operator1D::new(
        vec![SimpleTerm1D {
            coeff: Arc::new(move |t| {
                let c = b.cross(t - theta);
                if c == 0.0 {
                    0.0
                } else {
                    c * ((2.0 * theta - t).sin() / t.sin()).powf(p)
                }
            }),
            map: AffineMap::reflection(theta),
            support,
        }],
        support,
    ))
}

/// `E_ϑ g(t) = s²(t-ϑ) g(t) + L_ϑ g(t)`, equal to `g` beyond `ϑ + δ` and 0 before `ϑ - δ`.
pub fn aww_operator_at(theta: f64, k: usize, bell: &BellFunction) -> Result<Operator1D> {
    let l = l_theta(theta, k, bell)?;
    let b = bell.clone();
    let d = bell.delta();
    let m = Operator1D::multiplier(Arc::new(move |t| b.sq(t - theta)), Interval::new(theta - d, PI));
    Ok(m.add(&l).with_localization(Interval::new(theta - d, PI)))
}

pub fn aww_operator(spec: &LatitudinalSpec) -> Result<Operator1D> {
    spec.validate()?;
    aww_operator_at(spec.theta, spec.k, &spec.bell)
}

/// `ρ g(t) = g(π - t)`.
pub fn rho_op() -> Operator1D {
    Operator1D::new(
        vec![SimpleTerm1D {
            coeff: Arc::new(|_| 1.0),
            map: AffineMap { sign: -1.0, shift: PI },
            support: Interval::new(0.0, PI),
        }],
        Interval::new(0.0, PI),
    )
}

/// The profile `ψ_ϑ`: `s²(t-ϑ)`, then 1, then `s²(π-ϑ-t)`.
pub fn psi_theta(spec: &LatitudinalSpec) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    let b = spec.bell.clone();
    let th = spec.theta;
    move |t: f64| {
        let d = b.delta();
        if t < th - d || t > PI - th + d {
            0.0
        } else if t <= th + d {
            b.sq(t - th)
        } else if t < PI - th - d {
            1.0
        } else {
            b.sq(PI - th - t)
        }
    }
}

/// `ψ^#_ϑ` on `S^k`.
pub fn psi_sharp(spec: &LatitudinalSpec) -> SphereFn {
    let psi = psi_theta(spec);
    Arc::new(move |x: &[f64]| psi(crate::spheregeom::polar_angle(x)))
}

/// `K_ϑ = L_ϑ - ρ L_ϑ ρ`.
pub fn k_theta(spec: &LatitudinalSpec) -> Result<Operator1D> {
    spec.validate()?;
    let l = l_theta(spec.theta, spec.k, &spec.bell)?;
    let r = rho_op();
    let d = spec.delta();
    Ok(l.sub(&r.compose(&l).compose(&r)).with_localization(Interval::new(spec.theta - d, PI - spec.theta + d)))
}

/// `P_ϑ = M_ψ + L_ϑ - L_{π-ϑ}` as a 1-D operator.
pub fn p_theta(spec: &LatitudinalSpec) -> Result<Operator1D> {
    spec.validate()?;
    let d = spec.delta();
    let loc = Interval::new(spec.theta - d, PI - spec.theta + d);
    let m = Operator1D::multiplier(Arc::new(psi_theta(spec)), loc);
    let l1 = l_theta(spec.theta, spec.k, &spec.bell)?;
    let l2 = l_theta(PI - spec.theta, spec.k, &spec.bell)?;
    Ok(m.add(&l1).sub(&l2).with_localization(loc))
}

/// `U = E_ϑ^# - E_{π-ϑ}^#` as a 1-D operator on the polar angle.
pub fn u_operator_1d(spec: &LatitudinalSpec) -> Result<Operator1D> {
    spec.validate()?;
    let d = spec.delta();
    let e1 = aww_operator_at(spec.theta, spec.k, &spec.bell)?;
    let e2 = aww_operator_at(PI - spec.theta, spec.k, &spec.bell)?;
    Ok(e1.sub(&e2).with_localization(Interval::new(spec.theta - d, PI - spec.theta + d)))
}

/// `P^#` on `S^k`, after checking that `P` keeps functions vanishing at `0`
/// and `π` vanishing there.
pub fn latitudinal_lift(op: &Operator1D, k: usize) -> Result<SphereOperator> {
    if k < 2 {
        return Err(param("latitudinal operators need k >= 2"));
    }
    let witnesses: [fn(f64) -> f64; 4] = [
        |t| t.sin(),
        |t| t.sin() * (1.0 + t * t),
        |t| t * (PI - t),
        |t| (2.0 * t).sin() * t.cos().exp(),
    ];
    for (i, w) in witnesses.iter().enumerate() {
        for end in [0.0, PI] {
            let v = op.apply(w, end);
            if v.abs() > 1e-14 {
                return Err(Error::Contract(format!(
                    "operator does not preserve functions vanishing at 0 and pi: witness {i} gives {v} at t = {end}"
                )));
            }
        }
    }
    Ok(SphereOperator::Latitudinal { op: op.clone(), k })
}

/// The latitudinal projection `U` on `S^k`.
pub fn latitudinal_projection_u(spec: &LatitudinalSpec) -> Result<SphereOperator> {
    latitudinal_lift(&u_operator_1d(spec)?, spec.k)
}

/// `ρ^#`: `f(ξ₁, …, ξ_k, ξ_{k+1}) ↦ f(ξ₁, …, ξ_k, -ξ_{k+1})`.
pub fn rho_sharp(k: usize) -> SphereOperator {
    SphereOperator::Latitudinal { op: rho_op(), k }
}

/// `max |T_η L^# T_{η⁻¹} f - Q f|` over `points`, where `Q = L^#` when `η`
/// fixes `𝟏` and `Q = ρ^# L^# ρ^#` when `η` swaps the poles.
pub fn conjugation_identity_check<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    l: &Operator1D,
    eta: &Rotation,
    f: &F,
    points: &[Point],
) -> Result<f64> {
    let k = eta.dim() - 1;
    let pole = SpherePoint::north(k);
    let image = eta.apply(pole.as_slice());
    let sign = image[k];
    if (sign.abs() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("rotation must map the north pole to a pole".into()));
    }
    let lsharp = SphereOperator::Latitudinal { op: l.clone(), k };
    let lhs = lsharp.conjugated(eta);
    let rhs = if sign > 0.0 {
        lsharp
    } else {
        let r = rho_sharp(k);
        r.compose(&lsharp).compose(&r)
    };
    Ok(points.iter().map(|x| (lhs.apply(f, x) - rhs.apply(f, x)).abs()).fold(0.0, f64::max))
}

/// `Û` for an operator on `S¹`.
pub fn lift_operator(op: &CircleOperator) -> SphereOperator {
    SphereOperator::Lifted { inner: LiftInner::Circle(op.clone()), k: 2 }
}

/// `Û` for an operator on `S^{k-1}`, `k ≥ 3`.
pub fn lift_sphere_operator(op: &SphereOperator) -> SphereOperator {
    SphereOperator::Lifted { inner: LiftInner::Sphere(Box::new(op.clone())), k: op.k() + 1 }
}

/// Symmetric interior patch `Ψ_k([ϑ_1^k, ϑ_2^k] × ⋯ × [ϑ_1^1, ϑ_2^1])`, the
/// intervals listed in that order, with enlargement `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSpec {
    pub intervals: Vec<(f64, f64)>,
    pub delta: f64,
}

impl PatchSpec {
    pub fn new(intervals: Vec<(f64, f64)>, delta: f64) -> Result<Self> {
        let p = Self { intervals, delta };
        p.validate()?;
        Ok(p)
    }

    /// Sphere dimension `k`.
    pub fn k(&self) -> usize {
        self.intervals.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k < 2 {
            return Err(param("a patch needs at least two angular intervals"));
        }
        let d = self.delta;
        if !(d > 0.0) {
            return Err(param("patch enlargement delta must be positive"));
        }
        for (i, &(lo, hi)) in self.intervals[..k - 1].iter().enumerate() {
            let j = k - i;
            if !(0.0 < lo && lo < hi && hi < PI) {
                return Err(param(format!("angle {j}: need 0 < lower < upper < pi")));
            }
            if (hi - (PI - lo)).abs() > 1e-12 {
                return Err(param(format!("angle {j}: interval must be symmetric about pi/2")));
            }
            if !(lo - d > 0.0 && lo + d < FRAC_PI_2) {
                return Err(param(format!(
                    "angle {j}: need 0 < theta - delta < theta + delta < pi/2 (theta = {lo}, delta = {d})"
                )));
            }
        }
        let (lo, hi) = self.intervals[k - 1];
        if !(0.0 < lo && lo < hi && hi < TAU) {
            return Err(param("angle 1: need 0 < lower < upper < 2 pi"));
        }
        let len = hi - lo;
        if !(2.0 * d < len.min(TAU - len)) {
            return Err(param(format!(
                "angle 1: need 2 delta < min(length, 2 pi - length) (length = {len}, delta = {d})"
            )));
        }
        Ok(())
    }

    /// The patch with each interval shrunk by `amount` on both sides.
    pub fn shrunk(&self, amount: f64) -> Result<Self> {
        Self::new(self.intervals.iter().map(|&(a, b)| (a + amount, b - amount)).collect(), self.delta)
    }

    /// Membership in `Ω_δ` (or `Ω` with `enlarge = 0`) through the coordinates `Ψ_k`.
    pub fn contains(&self, x: &[f64], enlarge: f64) -> bool {
        let a = psi_angles(x);
        a.iter().zip(&self.intervals).all(|(v, &(lo, hi))| *v >= lo - enlarge && *v <= hi + enlarge)
    }
}

fn arc_of(patch: &PatchSpec, bell: &BellFunction) -> Result<ArcSpec> {
    let (lo, hi) = patch.intervals[patch.k() - 1];
    ArcSpec::new(lo, hi, bell.with_delta(patch.delta)?)
}

/// `P_Ω = U^k ∘ Û_{(k-1)}`, built recursively down to the arc projection on `S¹`.
/// Only the ramp of `bell` is used; the transition width is `patch.delta`.
pub fn patch_projection(patch: &PatchSpec, bell: &BellFunction) -> Result<SphereOperator> {
    patch.validate()?;
    let b = bell.with_delta(patch.delta)?;
    let k = patch.k();
    let mut inner = lift_operator(&circle_projection(&arc_of(patch, bell)?)?);
    for j in 2..=k {
        let (lo, _) = patch.intervals[k - j];
        let u = latitudinal_projection_u(&LatitudinalSpec::new(lo, j, b.clone())?)?;
        let p = u.compose(&inner);
        if j == k {
            return Ok(p);
        }
        inner = lift_sphere_operator(&p);
    }
    unreachable!("k >= 2 returns inside the loop")
}

/// `C(ψ^#_ϑ) = ∫ ψ^#_ϑ dσ = ∫ψ_ϑ sin^{k-1} / ∫ sin^{k-1}`.
pub fn constant_of_u(spec: &LatitudinalSpec, rule: &PanelRule) -> Result<f64> {
    spec.validate()?;
    let psi = psi_theta(spec);
    let d = spec.delta();
    let th = spec.theta;
    let breaks = [th - d, th + d, PI - th - d, PI - th + d];
    let p = spec.k as i32 - 1;
    let num = rule.integrate(0.0, PI, &breaks, |t| psi(t) * t.sin().powi(p));
    let den = rule.integrate(0.0, PI, &[], |t| t.sin().powi(p));
    Ok(num / den)
}

/// `c(U^k) ⋯ c(U^2) · (ϑ_2^1 - ϑ_1^1)/2π`.
pub fn patch_constant_product(patch: &PatchSpec, bell: &BellFunction, rule: &PanelRule) -> Result<f64> {
    patch.validate()?;
    let b = bell.with_delta(patch.delta)?;
    let k = patch.k();
    let (lo, hi) = patch.intervals[k - 1];
    let mut c = (hi - lo) / TAU;
    for j in 2..=k {
        let (t, _) = patch.intervals[k - j];
        c *= constant_of_u(&LatitudinalSpec::new(t, j, b.clone())?, rule)?;
    }
    Ok(c)
}

/// `c(P) = ∫ P1 dσ` (normalized), integrated over the operator's region.
pub fn constant_direct(op: &SphereOperator, rule: &PanelRule) -> Result<f64> {
    let region = op.region().ok_or_else(|| param("direct constant is available on S^2 only"))?;
    let q = region.quadrature(rule, Measure::SphereNormalized)?;
    Ok(q.integrate(|x| op.apply(&|_: &[f64]| 1.0, x)))
}

/// `P_B = T_a P_{Ω_δ} T_{a⁻¹}` with the patch chosen from the radius.
#[derive(Clone, Debug)]
pub struct BallProjection {
    pub op: SphereOperator,
    pub patch: PatchSpec,
    pub rotation: Rotation,
    pub center: SpherePoint,
    pub radius: f64,
}

impl BallProjection {
    /// Whether `x` lies in the closed geodesic ball.
    pub fn ball_contains(&self, x: &[f64]) -> bool {
        let c: f64 = self.center.as_slice().iter().zip(x).map(|(a, b)| a * b).sum();
        c.clamp(-1.0, 1.0).acos() <= self.radius
    }
}

/// Center of the reference patch, `Ψ₂(π/2, π/2) = (1, 0, 0)`.
pub const PATCH_CENTER: [f64; 3] = [1.0, 0.0, 0.0];

/// Projection localized in the geodesic ball `B(center, radius)` on `S²`:
/// `δ = r/16`, patch edge `r/4` centered on the equator, rotated onto `center`.
pub fn ball_projection(center: &SpherePoint, radius: f64, bell: &BellFunction) -> Result<BallProjection> {
    if center.k() != 2 {
        return Err(param("ball projections are built on S^2"));
    }
    if !(radius > 0.0 && radius <= PI) {
        return Err(param(format!("ball radius {radius} must lie in (0, pi]")));
    }
    let delta = radius / 16.0;
    if delta < 1e-6 {
        return Err(param(format!("ball radius {radius} is below the smallest supported transition")));
    }
    let h = radius / 8.0;
    let m = FRAC_PI_2;
    let patch = PatchSpec::new(vec![(m - h, m + h), (m - h, m + h)], delta)?;
    let p = patch_projection(&patch, bell)?;
    let rotation = match Rotation::taking(&PATCH_CENTER, center.as_slice()) {
        Ok(r) => r,
        Err(_) => Rotation::about_z(PI),
    };
    Ok(BallProjection { op: p.conjugated(&rotation), patch, rotation, center: center.clone(), radius })
}

/// Quadrature for rotation averages.
#[derive(Clone, Debug)]
pub enum So3Rule {
    /// Direct product rule in Euler angles.
    Euler(QuadratureRule<Rotation>),
    /// Sphere × stabilizer decomposition with the sphere part aligned to the
    /// operator's region.
    Fibered(FiberedRule),
}

/// Gauss–Legendre panels of `order` nodes in both chart coordinates and
/// `circle_nodes` equispaced stabilizer angles.
#[derive(Clone, Copy, Debug)]
pub struct FiberedRule {
    pub order: usize,
    pub panels: usize,
    pub circle_nodes: usize,
}

impl FiberedRule {
    pub fn new(order: usize) -> Self {
        Self { order, panels: 1, circle_nodes: 2 * order }
    }
}

/// Composite expansions repeat a point with opposite coefficients wherever the
/// factors cancel; rounding in the rotations would otherwise leave residues of
/// order 1e-16 there. Points closer than `MERGE_TOL` are treated as equal.
pub(crate) fn merge_terms(terms: &mut Vec<(f64, Point)>) {
    const MERGE_TOL: f64 = 1e-12;
    let mut merged: Vec<(f64, Point)> = Vec::with_capacity(terms.len());
    for (c, y) in terms.drain(..) {
        if c == 0.0 {
            continue;
        }
        match merged.iter_mut().find(|(_, z)| z.iter().zip(y.iter()).all(|(a, b)| (a - b).abs() <= MERGE_TOL)) {
            Some(t) => t.0 += c,
            None => merged.push((c, y)),
        }
    }
    merged.retain(|t| t.0 != 0.0);
    *terms = merged;
}

/// `S(P) f(ξ) = ∫_{SO(3)} T_b P T_{b⁻¹} f(ξ) dμ(b)`.
pub fn marcinkiewicz_average_s2<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    op: &SphereOperator,
    f: &F,
    xi: &[f64],
    rule: &So3Rule,
) -> Result<f64> {
    match rule {
        So3Rule::Euler(q) => Ok(q.integrate(|b| {
            // (P T_{b⁻¹} f)(b⁻¹ξ) with T_{b⁻¹} f(y) = f(b y).
            let mut buf = Vec::new();
            op.expand_into(&b.apply_inverse(xi), &mut buf);
            merge_terms(&mut buf);
            buf.iter().map(|(c, y)| c * f(&b.apply(y))).sum()
        })),
        So3Rule::Fibered(fr) => fibered_average(op, f, xi, fr),
    }
}

/// With `b = (b_x a b_ξ⁻¹)⁻¹` the average becomes
/// `∫_{S²} ∫_H Σ_i c_i(x) f(b_ξ a⁻¹ b_x⁻¹ y_i(x)) da dσ(x)`, and `x` only
/// needs to range over the region where `P` acts.
fn fibered_average<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    op: &SphereOperator,
    f: &F,
    xi: &[f64],
    fr: &FiberedRule,
) -> Result<f64> {
    let region = op.region().ok_or_else(|| param("fibered averages are available on S^2 only"))?;
    let q = region.quadrature(&PanelRule::new(fr.order, fr.panels), Measure::SphereNormalized)?;
    let bxi = Rotation::b_x(xi);
    let m = fr.circle_nodes.max(1);
    let stab: Vec<Rotation> = (0..m).map(|j| bxi.compose(&Rotation::about_z(TAU * j as f64 / m as f64))).collect();
    Ok(ordered_par_sum(q.len(), |i| {
        let x = &q.nodes[i];
        let mut buf = Vec::new();
        op.expand_into(x, &mut buf);
        merge_terms(&mut buf);
        if buf.is_empty() {
            return 0.0;
        }
        let bx = Rotation::b_x(x);
        let ws: Vec<(f64, Point)> = buf.iter().map(|(c, y)| (*c, bx.apply_inverse(y))).collect();
        let mut acc = 0.0;
        for r in &stab {
            for (c, w) in &ws {
                acc += c * f(&r.apply(w));
            }
        }
        q.weights[i] * acc / m as f64
    }))
}

/// `(S(M_ψ) f(ξ), C(ψ))`, the second by the sphere product rule of `sphere_order`.
pub fn multiplier_average<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    psi: &SphereFn,
    f: &F,
    xi: &[f64],
    so3: &QuadratureRule<Rotation>,
    sphere_order: usize,
) -> Result<(f64, f64)> {
    let op = SphereOperator::multiplier(psi.clone(), xi.len() - 1);
    let avg = marcinkiewicz_average_s2(&op, f, xi, &So3Rule::Euler(so3.clone()))?;
    let c = crate::spheregeom::sphere_quadrature(sphere_order, Measure::SphereNormalized)?.integrate(|x| psi(x));
    Ok((avg, c))
}

/// `S(K_ϑ^#) f(ξ)`, which vanishes identically.
pub fn antisymmetric_average_check<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    spec: &LatitudinalSpec,
    f: &F,
    xi: &[f64],
    rule: &So3Rule,
) -> Result<f64> {
    let op = SphereOperator::Latitudinal { op: k_theta(spec)?, k: spec.k };
    marcinkiewicz_average_s2(&op, f, xi, rule)
}

/// `(S(P̂_Q ∘ L^#) f(ξ), c(P_Q) S(L^#) f(ξ))` with `c(P_Q) = (1/2π) ∫ P_Q 1`.
pub fn lifting_average_identity_check<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    pq: &CircleOperator,
    l: &Operator1D,
    f: &F,
    xi: &[f64],
    rule: &So3Rule,
) -> Result<(f64, f64)> {
    let lsharp = latitudinal_lift(l, 2)?;
    let lhs = marcinkiewicz_average_s2(&lift_operator(pq).compose(&lsharp), f, xi, rule)?;
    let seams = pq.seams();
    let c = PanelRule::new(32, 2).integrate(pq.rho(), pq.rho() + TAU, &seams, |t| pq.apply(&|_| 1.0, t)) / TAU;
    let rhs = c * marcinkiewicz_average_s2(&lsharp, f, xi, rule)?;
    Ok((lhs, rhs))
}

/// `max_x |P(Pf)(x) - Pf(x)|`.
pub fn idempotence_error<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(op: &SphereOperator, f: &F, points: &[Point]) -> f64 {
    use rayon::prelude::*;
    points
        .par_iter()
        .map(|x| {
            let pf = |y: &[f64]| op.apply(f, y);
            (op.apply(&pf, x) - op.apply(f, x)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// `|⟨Pf, g⟩ - ⟨f, Pg⟩|` in surface measure, integrated over the operator's region.
pub fn self_adjoint_error<F, G>(op: &SphereOperator, f: &F, g: &G, rule: &PanelRule) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
    G: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let region = op.region().ok_or_else(|| param("self-adjointness check is available on S^2 only"))?;
    let q = region.quadrature(rule, Measure::SphereSurface)?;
    Ok(q.integrate(|x| op.apply(f, x) * g(x) - f(x) * op.apply(g, x)).abs())
}
