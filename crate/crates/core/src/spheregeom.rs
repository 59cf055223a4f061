//! Spherical coordinates, rotations and quadrature on `S^k` and `SO(3)`.
//!
//! Coordinates follow `Φ_k(t, ξ) = (ξ sin t, cos t)` with the pole
//! `𝟏 = (0, …, 0, 1)`, and recursively `Ψ₁(t) = (sin t, cos t)`,
//! `Ψ_{k+1}(t, x) = Φ_{k+1}(t, Ψ_k(x))`.

use std::f64::consts::{PI, TAU};

use smallvec::{smallvec, SmallVec};

use crate::error::{param, Result};
use crate::lattice::Point;
use crate::quadrature::{ordered_par_sum, GaussLegendre, PanelRule};

/// Points within this distance of `±𝟏` are treated as poles.
pub const POLE_TOL: f64 = 1e-8;

/// Unit vector in `ℝ^{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    v: Point,
}

/// Which pole, if any, a point sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pole {
    North,
    South,
}

impl SpherePoint {
    /// Accepts vectors of norm 1 within `1e-12` and renormalizes them.
    pub fn new(v: &[f64]) -> Result<Self> {
        if v.len() < 2 {
            return Err(param("a sphere point needs at least two coordinates"));
        }
        let n = norm(v);
        if !((n - 1.0).abs() <= 1e-12) {
            return Err(param(format!("vector of norm {n} is not on the unit sphere")));
        }
        Ok(Self { v: v.iter().map(|x| x / n).collect() })
    }

    pub fn north(k: usize) -> Self {
        let mut v = Point::from_elem(0.0, k + 1);
        v[k] = 1.0;
        Self { v }
    }

    /// `Φ_k(t, ξ)`.
    pub fn from_polar(t: f64, xi: &[f64]) -> Self {
        let (s, c) = t.sin_cos();
        let mut v: Point = xi.iter().map(|x| x * s).collect();
        v.push(c);
        Self { v }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn into_vec(self) -> Point {
        self.v
    }

    /// Sphere dimension `k` for a point of `S^k`.
    pub fn k(&self) -> usize {
        self.v.len() - 1
    }

    pub fn pole(&self) -> Option<Pole> {
        pole_of(&self.v)
    }

    /// `(t, ξ)` with `Φ_k(t, ξ) = x`; at a pole `ξ = 𝟏^{k-1}`.
    pub fn polar(&self) -> (f64, Point) {
        polar(&self.v)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn pole_of(v: &[f64]) -> Option<Pole> {
    let k = v.len() - 1;
    let r = norm(&v[..k]);
    if r <= POLE_TOL {
        Some(if v[k] > 0.0 { Pole::North } else { Pole::South })
    } else {
        None
    }
}

/// Polar angle of a unit vector.
#[inline]
pub fn polar_angle(v: &[f64]) -> f64 {
    let k = v.len() - 1;
    norm(&v[..k]).atan2(v[k])
}

/// `(t, ξ)` for a unit vector; `ξ = 𝟏^{k-1}` when the vector is a pole.
pub fn polar(v: &[f64]) -> (f64, Point) {
    let k = v.len() - 1;
    let r = norm(&v[..k]);
    let t = r.atan2(v[k]);
    if r == 0.0 {
        let mut xi = Point::from_elem(0.0, k);
        xi[k - 1] = 1.0;
        (t, xi)
    } else {
        (t, v[..k].iter().map(|x| x / r).collect())
    }
}

/// Angle `t` with `Ψ₁(t) = (sin t, cos t) = (x, y)`, in `[0, 2π)`.
#[inline]
pub fn circle_angle(x: f64, y: f64) -> f64 {
    let a = x.atan2(y);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// `Ψ_k(θ_k, …, θ₁)` with `angles = [θ_k, …, θ₂, θ₁]`.
pub fn psi_coords(angles: &[f64]) -> SpherePoint {
    assert!(!angles.is_empty());
    let n = angles.len();
    let (s, c) = angles[n - 1].sin_cos();
    let mut v: Point = smallvec![s, c];
    for &t in angles[..n - 1].iter().rev() {
        let (s, c) = t.sin_cos();
        for x in v.iter_mut() {
            *x *= s;
        }
        v.push(c);
    }
    SpherePoint { v }
}

/// Inverse of [`psi_coords`], away from the coordinate singularities.
pub fn psi_angles(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() - 1);
    let mut w: Point = v.iter().copied().collect();
    while w.len() > 2 {
        let (t, xi) = polar(&w);
        out.push(t);
        w = xi;
    }
    out.push(circle_angle(w[0], w[1]));
    out
}

/// `J_{d-1} = |sin^{k-1} θ_k ⋯ sin θ₂|` for `angles = [θ_k, …, θ₁]`.
pub fn jacobian(angles: &[f64]) -> f64 {
    let k = angles.len();
    angles[..k - 1]
        .iter()
        .enumerate()
        .map(|(i, t)| t.sin().abs().powi((k - 1 - i) as i32))
        .product()
}

/// Rotation of `ℝ^n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    n: usize,
    m: SmallVec<[f64; 16]>,
}

impl Rotation {
    pub fn identity(n: usize) -> Self {
        let mut m = SmallVec::from_elem(0.0, n * n);
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        Self { n, m }
    }

    /// Accepts a row-major orthogonal matrix with determinant `+1`.
    pub fn from_matrix(n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(param("rotation matrix has the wrong size"));
        }
        let r = Self { n, m: rows.iter().copied().collect() };
        let err = r.orthogonality_error();
        if !(err <= 1e-12) {
            return Err(param(format!("matrix is not orthogonal (error {err})")));
        }
        let det = nalgebra::DMatrix::from_row_slice(n, n, rows).determinant();
        if !((det - 1.0).abs() <= 1e-12) {
            return Err(param(format!("matrix has determinant {det}, not +1")));
        }
        Ok(r)
    }

    /// `R_z(a) R_y(b) R_z(c)`.
    pub fn euler_zyz(a: f64, b: f64, c: f64) -> Self {
        Self::about_z(a).compose(&Self::about_y(b)).compose(&Self::about_z(c))
    }

    pub fn about_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self { n: 3, m: smallvec![c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0] }
    }

    pub fn about_y(b: f64) -> Self {
        let (s, c) = b.sin_cos();
        Self { n: 3, m: smallvec![c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c] }
    }

    pub fn about_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self { n: 3, m: smallvec![1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c] }
    }

    /// Rotation by `angle` in the plane `(e_i, e_j)`, taking `e_i` towards `e_j`.
    pub fn plane(n: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut r = Self::identity(n);
        let (s, c) = angle.sin_cos();
        r.m[i * n + i] = c;
        r.m[j * n + j] = c;
        r.m[j * n + i] = s;
        r.m[i * n + j] = -s;
        r
    }

    /// `b_x`: rotation in the plane spanned by `𝟏` and `x` taking `𝟏` to `x`.
    /// At `x = 𝟏` it is the identity, at `x = -𝟏` the rotation by `π` in the
    /// plane of the first and last axes.
    pub fn b_x(x: &[f64]) -> Self {
        let n = x.len();
        let k = n - 1;
        match pole_of(x) {
            Some(Pole::North) => return Self::identity(n),
            Some(Pole::South) => return Self::plane(n, k, 0, PI),
            None => {}
        }
        let c = x[k];
        let r = norm(&x[..k]);
        let s = r;
        // u is the unit vector orthogonal to 𝟏 in the direction of x.
        let u: Point = (0..n).map(|i| if i == k { 0.0 } else { x[i] / r }).collect();
        let mut m = Self::identity(n);
        for i in 0..n {
            let ei = if i == k { 1.0 } else { 0.0 };
            for j in 0..n {
                let ej = if j == k { 1.0 } else { 0.0 };
                m.m[i * n + j] += (c - 1.0) * (ei * ej + u[i] * u[j]) + s * (u[i] * ej - ei * u[j]);
            }
        }
        m
    }

    /// Rotation in the plane of the unit vectors `from` and `to` taking one to
    /// the other; the identity if they coincide.
    pub fn taking(from: &[f64], to: &[f64]) -> Result<Self> {
        let n = from.len();
        if to.len() != n {
            return Err(param("points live in different dimensions"));
        }
        let c: f64 = from.iter().zip(to).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
        let perp: Point = to.iter().zip(from).map(|(b, a)| b - c * a).collect();
        let s = norm(&perp);
        if s <= 1e-15 {
            if c > 0.0 {
                return Ok(Self::identity(n));
            }
            return Err(param("antipodal points do not determine a plane"));
        }
        let u: Point = perp.iter().map(|v| v / s).collect();
        let mut m = Self::identity(n);
        for i in 0..n {
            for j in 0..n {
                m.m[i * n + j] += (c - 1.0) * (from[i] * from[j] + u[i] * u[j]) + s * (u[i] * from[j] - from[i] * u[j]);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[f64] {
        &self.m
    }

    #[inline]
    pub fn apply(&self, x: &[f64]) -> Point {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|j| self.m[i * n + j] * x[j]).sum()).collect()
    }

    /// `b⁻¹x = bᵀx`.
    #[inline]
    pub fn apply_inverse(&self, x: &[f64]) -> Point {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|j| self.m[j * n + i] * x[j]).sum()).collect()
    }

    pub fn inverse(&self) -> Self {
        let n = self.n;
        let mut m = self.m.clone();
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.m[j * n + i];
            }
        }
        Self { n, m }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Rotation) -> Self {
        let n = self.n;
        let mut m = SmallVec::from_elem(0.0, n * n);
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|l| self.m[i * n + l] * other.m[l * n + j]).sum();
            }
        }
        Self { n, m }
    }

    /// `max |RᵀR - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n;
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d: f64 = (0..n).map(|l| self.m[l * n + i] * self.m[l * n + j]).sum();
                e = e.max((d - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        e
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }
}

pub fn rotate_point(b: &Rotation, x: &[f64]) -> Point {
    b.apply(x)
}

/// `T_b f = f ∘ b⁻¹`.
pub fn rotate_function<'a, F: Fn(&[f64]) -> f64 + ?Sized>(
    b: &'a Rotation,
    f: &'a F,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |x: &[f64]| f(&b.apply_inverse(x))
}

/// Measure a [`QuadratureRule`] integrates against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    LebesgueInterval,
    CircleNormalized,
    SphereNormalized,
    SphereSurface,
    So3HaarNormalized,
}

/// Nodes with weights for a stated measure.
#[derive(Clone, Debug)]
pub struct QuadratureRule<N> {
    pub nodes: Vec<N>,
    pub weights: Vec<f64>,
    pub measure: Measure,
}

impl<N: Sync> QuadratureRule<N> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Deterministic parallel `Σ w_i f(node_i)`.
    pub fn integrate<F: Fn(&N) -> f64 + Sync>(&self, f: F) -> f64 {
        ordered_par_sum(self.nodes.len(), |i| self.weights[i] * f(&self.nodes[i]))
    }
}

/// Surface area of `S²`.
pub const SPHERE_AREA: f64 = 4.0 * PI;

fn sphere_scale(measure: Measure) -> Result<f64> {
    match measure {
        Measure::SphereNormalized => Ok(1.0 / SPHERE_AREA),
        Measure::SphereSurface => Ok(1.0),
        other => Err(param(format!("{other:?} is not a sphere measure"))),
    }
}

/// Product rule on `S²`: Gauss–Legendre in `cos t` with `order` nodes and
/// `2·order` equispaced longitudes.
pub fn sphere_quadrature(order: usize, measure: Measure) -> Result<QuadratureRule<Point>> {
    if order == 0 {
        return Err(param("quadrature order must be positive"));
    }
    let scale = sphere_scale(measure)?;
    let g = GaussLegendre::new(order);
    let m = 2 * order;
    let mut nodes = Vec::with_capacity(order * m);
    let mut weights = Vec::with_capacity(order * m);
    for (z, w) in g.nodes().iter().zip(g.weights()) {
        let t = z.acos();
        for j in 0..m {
            let p = TAU * j as f64 / m as f64;
            nodes.push(psi_coords(&[t, p]).into_vec());
            weights.push(scale * w * TAU / m as f64);
        }
    }
    Ok(QuadratureRule { nodes, weights, measure })
}

/// Coordinate-box rule on `S²`: panels of Gauss–Legendre in the polar angle
/// `t ∈ [t_lo, t_hi]` (weight `sin t`) and in the longitude, split at the
/// given breakpoints. Meant for integrands that are smooth between them.
pub fn sphere_box_quadrature(
    t_range: (f64, f64),
    t_breaks: &[f64],
    lon_range: (f64, f64),
    lon_breaks: &[f64],
    rule: &PanelRule,
    measure: Measure,
) -> Result<QuadratureRule<Point>> {
    let scale = sphere_scale(measure)?;
    if !(0.0 <= t_range.0 && t_range.0 < t_range.1 && t_range.1 <= PI) {
        return Err(param("polar range must lie in [0, π]"));
    }
    let tn = rule.nodes(t_range.0, t_range.1, t_breaks);
    let pn = rule.nodes(lon_range.0, lon_range.1, lon_breaks);
    let mut nodes = Vec::with_capacity(tn.len() * pn.len());
    let mut weights = Vec::with_capacity(tn.len() * pn.len());
    for &(t, wt) in &tn {
        let st = t.sin();
        for &(p, wp) in &pn {
            nodes.push(psi_coords(&[t, p]).into_vec());
            weights.push(scale * wt * wp * st);
        }
    }
    Ok(QuadratureRule { nodes, weights, measure })
}

/// Normalized Haar rule on `SO(3)`: `R_z(a)R_y(b)R_z(c)` with density
/// `sin b/(8π²)`, `2·order` uniform nodes in `a` and `c`, Gauss–Legendre in `cos b`.
pub fn so3_quadrature(order: usize) -> Result<QuadratureRule<Rotation>> {
    if order == 0 {
        return Err(param("quadrature order must be positive"));
    }
    let g = GaussLegendre::new(order);
    let m = 2 * order;
    let mut nodes = Vec::with_capacity(m * m * order);
    let mut weights = Vec::with_capacity(m * m * order);
    let za: Vec<Rotation> = (0..m).map(|i| Rotation::about_z(TAU * i as f64 / m as f64)).collect();
    for (z, w) in g.nodes().iter().zip(g.weights()) {
        let yb = Rotation::about_y(z.acos());
        let wb = 0.5 * w / (m * m) as f64;
        for ra in &za {
            let ab = ra.compose(&yb);
            for rc in &za {
                nodes.push(ab.compose(rc));
                weights.push(wb);
            }
        }
    }
    Ok(QuadratureRule { nodes, weights, measure: Measure::So3HaarNormalized })
}

/// Both sides of the fiber decomposition
/// `∫_{SO(3)} F dμ = ∫_{S²} ∫_H F(b_x a) dμ_H(a) dσ(x)`, `H` the stabilizer of `𝟏`.
pub fn weyl_decompose_check<F: Fn(&Rotation) -> f64 + Sync>(
    f: F,
    so3_order: usize,
    sphere_order: usize,
    circle_nodes: usize,
) -> Result<(f64, f64)> {
    let left = so3_quadrature(so3_order)?.integrate(&f);
    let sphere = sphere_quadrature(sphere_order, Measure::SphereNormalized)?;
    let stab: Vec<Rotation> = (0..circle_nodes)
        .map(|i| Rotation::about_z(TAU * i as f64 / circle_nodes as f64))
        .collect();
    let right = sphere.integrate(|x| {
        let bx = Rotation::b_x(x);
        stab.iter().map(|a| f(&bx.compose(a))).sum::<f64>() / circle_nodes as f64
    });
    Ok((left, right))
}
