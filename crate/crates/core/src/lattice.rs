//! Projections on `ℝ^d`: tensor products of interval projections, shifted
//! sums over cube tilings of a fundamental domain, and the decomposition of
//! identity `Σ_γ T_γ P T_{-γ} = I` over a lattice `Γ = Mℤ^d`.
//!
//! A general lattice is handled by pulling the problem back to `ℤ^d`:
//! `(P f)(x) = (P' D_M f)(M⁻¹x)` with `D_M f(y) = f(My)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::bell::BellFunction;
use crate::error::{param, Error, Result};
use crate::hestenes1d::{projection_interval, IntervalProjectionSpec, Operator1D};

/// A point of `ℝ^d` for small `d`.
pub type Point = SmallVec<[f64; 4]>;

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn shifted(&self, k: &[f64]) -> Self {
        Self {
            lo: self.lo.iter().zip(k).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(k).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn hull(&self, other: &BoxRegion) -> Self {
        Self {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn dilated(&self, eps: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|v| v - eps).collect(),
            hi: self.hi.iter().map(|v| v + eps).collect(),
        }
    }

    /// Every corner of the box, `2^d` of them.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }

    /// Bounding box of the image under the linear map `a`.
    pub fn linear_image(&self, a: &DMatrix<f64>) -> Self {
        let mut out: Option<BoxRegion> = None;
        for c in self.corners() {
            let y = mat_vec(a, &c);
            let b = BoxRegion::new(y.to_vec(), y.to_vec());
            out = Some(match out {
                None => b,
                Some(o) => o.hull(&b),
            });
        }
        out.expect("a box has at least one corner")
    }
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Point {
    let d = a.nrows();
    (0..d)
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

/// Operator on functions on `ℝ^d`, applied through a finite pointwise expansion.
#[derive(Clone, Debug)]
pub enum OperatorRd {
    /// `P₁ ⊗ … ⊗ P_d`.
    Tensor(Vec<Operator1D>),
    /// `Σ_k T_k inner T_{-k}`.
    Shifted {
        inner: Box<OperatorRd>,
        shifts: Vec<Point>,
    },
    /// `(P f)(x) = (inner D_M f)(M⁻¹x)`.
    Dilated {
        inner: Box<OperatorRd>,
        m: DMatrix<f64>,
        m_inv: DMatrix<f64>,
    },
}

impl OperatorRd {
    pub fn dim(&self) -> usize {
        match self {
            OperatorRd::Tensor(f) => f.len(),
            OperatorRd::Shifted { inner, .. } => inner.dim(),
            OperatorRd::Dilated { m, .. } => m.nrows(),
        }
    }

    /// Box outside of which every image vanishes.
    pub fn localization(&self) -> BoxRegion {
        match self {
            OperatorRd::Tensor(f) => BoxRegion::new(
                f.iter().map(|o| o.localization().lo).collect(),
                f.iter().map(|o| o.localization().hi).collect(),
            ),
            OperatorRd::Shifted { inner, shifts } => {
                let b = inner.localization();
                let mut it = shifts.iter().map(|k| b.shifted(k));
                match it.next() {
                    None => b,
                    Some(first) => it.fold(first, |acc, x| acc.hull(&x)),
                }
            }
            OperatorRd::Dilated { inner, m, .. } => inner.localization().linear_image(m),
        }
    }

    /// Appends `(c, y)` pairs with `P f(x) = Σ c·f(y)`; zero coefficients are dropped.
    pub fn expand_into(&self, x: &[f64], out: &mut Vec<(f64, Point)>) {
        match self {
            OperatorRd::Tensor(factors) => {
                let start = out.len();
                out.push((1.0, Point::new()));
                let mut axis = Vec::new();
                for (i, op) in factors.iter().enumerate() {
                    axis.clear();
                    op.expand_into(x[i], &mut axis);
                    let prev: Vec<(f64, Point)> = out.drain(start..).collect();
                    for (c, p) in &prev {
                        for &(a, y) in &axis {
                            let mut q = p.clone();
                            q.push(y);
                            out.push((c * a, q));
                        }
                    }
                }
            }
            OperatorRd::Shifted { inner, shifts } => {
                let b = inner.localization();
                let mut y: Point = x.iter().copied().collect();
                for k in shifts {
                    for i in 0..x.len() {
                        y[i] = x[i] - k[i];
                    }
                    if !b.contains(&y) {
                        continue;
                    }
                    let start = out.len();
                    inner.expand_into(&y, out);
                    for (_, p) in &mut out[start..] {
                        for i in 0..p.len() {
                            p[i] += k[i];
                        }
                    }
                }
            }
            OperatorRd::Dilated { inner, m, m_inv } => {
                let y = mat_vec(m_inv, x);
                let start = out.len();
                inner.expand_into(&y, out);
                for (_, p) in &mut out[start..] {
                    *p = mat_vec(m, p);
                }
            }
        }
    }

    pub fn expand(&self, x: &[f64]) -> Vec<(f64, Point)> {
        let mut out = Vec::new();
        self.expand_into(x, &mut out);
        out
    }

    pub fn apply<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F, x: &[f64]) -> f64 {
        let mut buf = Vec::new();
        self.expand_into(x, &mut buf);
        buf.iter().map(|(c, y)| c * f(y)).sum()
    }

    /// `T_k P T_{-k}`.
    pub fn translate_conjugate(&self, k: &[f64]) -> OperatorRd {
        OperatorRd::Shifted {
            inner: Box::new(self.clone()),
            shifts: vec![k.iter().copied().collect()],
        }
    }

    /// Pulls `self` (acting on the `ℤ^d` picture) forward to the lattice `Mℤ^d`.
    pub fn dilated(&self, lattice: &Lattice) -> OperatorRd {
        OperatorRd::Dilated {
            inner: Box::new(self.clone()),
            m: lattice.m.clone(),
            m_inv: lattice.m_inv.clone(),
        }
    }
}

/// `P_{I₁} ⊗ … ⊗ P_{I_d}`, one spec per axis.
pub fn tensor_projection(specs: &[IntervalProjectionSpec]) -> Result<OperatorRd> {
    if specs.is_empty() {
        return Err(param("tensor projection needs at least one axis"));
    }
    let factors = specs.iter().map(projection_interval).collect::<Result<Vec<_>>>()?;
    Ok(OperatorRd::Tensor(factors))
}

/// Full-rank lattice `Γ = Mℤ^d`, generated by the columns of `M`.
#[derive(Clone, Debug)]
pub struct Lattice {
    m: DMatrix<f64>,
    m_inv: DMatrix<f64>,
}

impl Lattice {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(param("lattice generator must be a nonempty square matrix"));
        }
        let det = m.determinant();
        if !(det.abs() > 1e-14) {
            return Err(param(format!("lattice generator is singular (det = {det})")));
        }
        let m_inv = m.clone().try_inverse().ok_or_else(|| param("lattice generator is not invertible"))?;
        Ok(Self { m, m_inv })
    }

    pub fn integer(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is invertible")
    }

    /// The lattice spanned by `w₁ = (0, √3)` and `w₂ = (3/2, √3/2)`, for which
    /// the regular hexagon of circumradius 1 is a fundamental domain.
    pub fn hexagonal() -> Self {
        let r3 = 3f64.sqrt();
        Self::new(DMatrix::from_column_slice(2, 2, &[0.0, r3, 1.5, 0.5 * r3])).expect("hexagonal lattice is regular")
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.m_inv
    }

    pub fn covolume(&self) -> f64 {
        self.m.determinant().abs()
    }

    pub fn point(&self, j: &[i64]) -> Point {
        let v: Vec<f64> = j.iter().map(|&x| x as f64).collect();
        mat_vec(&self.m, &v)
    }
}

type Indicator = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
enum DomainShape {
    Box,
    Polygon(Vec<[f64; 2]>),
    Indicator(Indicator),
}

/// Precompact set given by a membership test and a bounding box.
#[derive(Clone)]
pub struct FundamentalDomain {
    shape: DomainShape,
    bbox: BoxRegion,
}

impl std::fmt::Debug for FundamentalDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.shape {
            DomainShape::Box => "box".to_string(),
            DomainShape::Polygon(v) => format!("polygon({} vertices)", v.len()),
            DomainShape::Indicator(_) => "indicator".to_string(),
        };
        f.debug_struct("FundamentalDomain").field("shape", &kind).field("bbox", &self.bbox).finish()
    }
}

fn point_in_polygon(v: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (xi, yi) = (v[i][0], v[i][1]);
        let (xj, yj) = (v[j][0], v[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Signed shoelace area.
pub fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

/// Vertices `p_j = (cos(π(j-1)/3), sin(π(j-1)/3))`, `j = 1..6`.
pub fn hexagon_vertices() -> Vec<[f64; 2]> {
    (0..6)
        .map(|j| {
            let a = std::f64::consts::PI * j as f64 / 3.0;
            [a.cos(), a.sin()]
        })
        .collect()
}

impl FundamentalDomain {
    pub fn unit_cube(d: usize) -> Self {
        Self::boxed(BoxRegion::new(vec![0.0; d], vec![1.0; d]))
    }

    pub fn boxed(b: BoxRegion) -> Self {
        Self { shape: DomainShape::Box, bbox: b }
    }

    /// Counter-clockwise polygon in the plane.
    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(param("a polygon needs at least three vertices"));
        }
        if !(polygon_area(&vertices) > 0.0) {
            return Err(param("polygon vertices must be listed counter-clockwise with positive area"));
        }
        let lo = vec![
            vertices.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
            vertices.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
        ];
        let hi = vec![
            vertices.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
            vertices.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
        ];
        Ok(Self { shape: DomainShape::Polygon(vertices), bbox: BoxRegion::new(lo, hi) })
    }

    pub fn hexagon() -> Self {
        Self::polygon(hexagon_vertices()).expect("hexagon is a valid polygon")
    }

    pub fn from_indicator(indicator: Indicator, bbox: BoxRegion) -> Self {
        Self { shape: DomainShape::Indicator(indicator), bbox }
    }

    /// Parses one `x y` vertex per line; blank lines and `#` comments are skipped.
    pub fn parse_polygon(text: &str) -> Result<Self> {
        let mut v = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| param(format!("polygon line {}: {e}", no + 1)))?;
            if nums.len() != 2 {
                return Err(param(format!("polygon line {}: expected two numbers", no + 1)));
            }
            v.push([nums[0], nums[1]]);
        }
        Self::polygon(v)
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn bounding_box(&self) -> &BoxRegion {
        &self.bbox
    }

    pub fn vertices(&self) -> Option<&[[f64; 2]]> {
        match &self.shape {
            DomainShape::Polygon(v) => Some(v),
            _ => None,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            DomainShape::Box => self.bbox.contains(x),
            DomainShape::Polygon(v) => point_in_polygon(v, x[0], x[1]),
            DomainShape::Indicator(f) => self.bbox.contains(x) && f(x),
        }
    }

    /// Image `A·K` under an invertible linear map.
    pub fn linear_image(&self, a: &DMatrix<f64>) -> Result<Self> {
        let bbox = self.bbox.linear_image(a);
        match &self.shape {
            DomainShape::Polygon(v) => {
                let mut w: Vec<[f64; 2]> = v
                    .iter()
                    .map(|p| {
                        let y = mat_vec(a, p);
                        [y[0], y[1]]
                    })
                    .collect();
                if polygon_area(&w) < 0.0 {
                    w.reverse();
                }
                Self::polygon(w)
            }
            _ => {
                let inv = a.clone().try_inverse().ok_or_else(|| param("linear image needs an invertible map"))?;
                let me = self.clone();
                let ind: Indicator = Arc::new(move |x: &[f64]| me.contains(&mat_vec(&inv, x)));
                Ok(Self::from_indicator(ind, bbox))
            }
        }
    }

    /// Whether the cell `n⁻¹([0,1]^d + j)` meets the domain, judged on `8^d`
    /// regular sub-samples and the cell center.
    pub fn cell_intersects(&self, j: &[i64], n: u32) -> bool {
        let d = j.len();
        let h = 1.0 / n as f64;
        let center: Vec<f64> = j.iter().map(|&v| (v as f64 + 0.5) * h).collect();
        if self.contains(&center) {
            return true;
        }
        let m = 8usize;
        let total = m.pow(d as u32);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for i in 0..d {
                let s = r % m;
                r /= m;
                x[i] = (j[i] as f64 + (s as f64 + 0.5) / m as f64) * h;
            }
            if self.contains(&x) {
                return true;
            }
        }
        false
    }
}

/// Selected cubes: `F0` meets the domain, `F1` keeps one representative per
/// class modulo `ℤ^d`. Cell `j` is `n⁻¹([0,1]^d + j)`.
#[derive(Clone, Debug)]
pub struct CubeTiling {
    pub n: u32,
    pub dim: usize,
    pub f0: Vec<Vec<i64>>,
    pub f1: Vec<Vec<i64>>,
    /// Every scanned cell with its `F0` membership.
    pub scanned: Vec<(Vec<i64>, bool)>,
}

impl CubeTiling {
    /// Lower corner `j/n` of a cell.
    pub fn corner(&self, j: &[i64]) -> Point {
        j.iter().map(|&v| v as f64 / self.n as f64).collect()
    }

    pub fn class_of(&self, j: &[i64]) -> Vec<i64> {
        j.iter().map(|&v| v.rem_euclid(self.n as i64)).collect()
    }
}

/// Cube selection on the grid `n⁻¹ℤ^d` for a domain `K` of `ℤ^d`, requiring
/// `(√d + 2)/n < eps`.
pub fn select_tiling(k: &FundamentalDomain, n: u32, eps: f64) -> Result<CubeTiling> {
    if n == 0 {
        return Err(param("grid scale n must be positive"));
    }
    let d = k.dim();
    let need = ((d as f64).sqrt() + 2.0) / n as f64;
    if !(need < eps) {
        return Err(param(format!(
            "grid too coarse: (sqrt(d) + 2)/n = {need} is not below eps = {eps}"
        )));
    }
    let b = k.bounding_box().dilated(eps);
    let nf = n as f64;
    let lo: Vec<i64> = b.lo.iter().map(|v| (v * nf).floor() as i64 - 1).collect();
    let hi: Vec<i64> = b.hi.iter().map(|v| (v * nf).ceil() as i64).collect();
    let mut cells = Vec::new();
    let mut j = lo.clone();
    loop {
        cells.push(j.clone());
        let mut i = 0;
        loop {
            if i == d {
                break;
            }
            j[i] += 1;
            if j[i] <= hi[i] {
                break;
            }
            j[i] = lo[i];
            i += 1;
        }
        if i == d {
            break;
        }
    }
    // Lexicographic order on the integer index.
    cells.sort();
    let scanned: Vec<(Vec<i64>, bool)> = cells
        .into_par_iter()
        .map(|j| {
            let hit = k.cell_intersects(&j, n);
            (j, hit)
        })
        .collect();
    let f0: Vec<Vec<i64>> = scanned.iter().filter(|(_, h)| *h).map(|(j, _)| j.clone()).collect();
    if f0.is_empty() {
        return Err(Error::Domain("no grid cell meets the domain".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut f1 = Vec::new();
    for j in &f0 {
        let class: Vec<i64> = j.iter().map(|&v| v.rem_euclid(n as i64)).collect();
        if seen.insert(class) {
            f1.push(j.clone());
        }
    }
    Ok(CubeTiling { n, dim: d, f0, f1, scanned })
}

/// Projection onto the cell `n⁻¹[0,1]^d` with transition `0.25/n`.
pub fn cell_projection(n: u32, d: usize, bell: &BellFunction) -> Result<OperatorRd> {
    let h = 1.0 / n as f64;
    let b = bell.with_delta(0.25 * h)?;
    let spec = IntervalProjectionSpec::new(0.0, h, b)?;
    tensor_projection(&vec![spec; d])
}

/// `P' = Σ_{k∈F1} T_k P_cell T_{-k}` acting in the `ℤ^d` picture. Only the
/// ramp of `bell` is used; the transition width is fixed by the grid.
pub fn build_domain_projection(tiling: &CubeTiling, bell: &BellFunction) -> Result<OperatorRd> {
    let cell = cell_projection(tiling.n, tiling.dim, bell)?;
    Ok(OperatorRd::Shifted {
        inner: Box::new(cell),
        shifts: tiling.f1.iter().map(|j| tiling.corner(j)).collect(),
    })
}

/// Domain projection for `K` and the lattice `Mℤ^d`, returned together with
/// the tiling of `M⁻¹K`.
pub fn lattice_domain_projection(
    k: &FundamentalDomain,
    lattice: &Lattice,
    n: u32,
    eps: f64,
    bell: &BellFunction,
) -> Result<(OperatorRd, CubeTiling)> {
    let pulled = k.linear_image(lattice.inverse())?;
    let tiling = select_tiling(&pulled, n, eps)?;
    let p = build_domain_projection(&tiling, bell)?;
    Ok((p.dilated(lattice), tiling))
}

/// Outcome of a partition-of-identity check.
#[derive(Clone, Debug, Default)]
pub struct PartitionCheck {
    pub max_error: f64,
    /// Largest `|γ|` that contributed a shift.
    pub max_shift_norm: f64,
    /// Total number of shifted operators evaluated.
    pub shift_evaluations: usize,
}

/// Lattice indices `j` whose shift `γ = Mj` keeps `x - γ` inside `loc`.
fn shifts_touching(lattice: &Lattice, loc: &BoxRegion, x: &[f64]) -> Vec<Vec<i64>> {
    let d = x.len();
    let rel = BoxRegion::new(
        (0..d).map(|i| x[i] - loc.hi[i]).collect(),
        (0..d).map(|i| x[i] - loc.lo[i]).collect(),
    );
    let jb = rel.linear_image(lattice.inverse());
    let lo: Vec<i64> = jb.lo.iter().map(|v| v.floor() as i64).collect();
    let hi: Vec<i64> = jb.hi.iter().map(|v| v.ceil() as i64).collect();
    let mut out = Vec::new();
    let mut j = lo.clone();
    loop {
        let g = lattice.point(&j);
        let y: Vec<f64> = (0..d).map(|i| x[i] - g[i]).collect();
        if loc.contains(&y) {
            out.push(j.clone());
        }
        let mut i = 0;
        loop {
            if i == d {
                break;
            }
            j[i] += 1;
            if j[i] <= hi[i] {
                break;
            }
            j[i] = lo[i];
            i += 1;
        }
        if i == d {
            break;
        }
    }
    out
}

/// `Σ_γ T_γ P T_{-γ} f(x) = Σ_γ (P f(· + γ))(x - γ)`, summed over exactly the
/// shifts for which `x - γ` lies in the localization box of `P`.
pub fn partition_sum<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    p: &OperatorRd,
    lattice: &Lattice,
    f: &F,
    x: &[f64],
) -> (f64, usize, f64) {
    let loc = p.localization();
    let d = x.len();
    let mut total = 0.0;
    let mut count = 0;
    let mut maxn: f64 = 0.0;
    let mut buf = Vec::new();
    for j in shifts_touching(lattice, &loc, x) {
        let g = lattice.point(&j);
        let y: Vec<f64> = (0..d).map(|i| x[i] - g[i]).collect();
        buf.clear();
        p.expand_into(&y, &mut buf);
        let mut z: Point = Point::from_elem(0.0, d);
        for (c, q) in &buf {
            for i in 0..d {
                z[i] = q[i] + g[i];
            }
            total += c * f(&z);
        }
        count += 1;
        maxn = maxn.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    (total, count, maxn)
}

/// `max_x |Σ_γ T_γ P T_{-γ} f(x) - f(x)|` over `points`.
pub fn verify_partition<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    p: &OperatorRd,
    lattice: &Lattice,
    f: &F,
    points: &[Point],
) -> PartitionCheck {
    points
        .par_iter()
        .map(|x| {
            let (v, c, m) = partition_sum(p, lattice, f, x);
            PartitionCheck { max_error: (v - f(x)).abs(), max_shift_norm: m, shift_evaluations: c }
        })
        .reduce(PartitionCheck::default, |a, b| PartitionCheck {
            max_error: a.max_error.max(b.max_error),
            max_shift_norm: a.max_shift_norm.max(b.max_shift_norm),
            shift_evaluations: a.shift_evaluations + b.shift_evaluations,
        })
}

/// `max_x |T_k P T_{-k}(T_l P T_{-l} f)(x)|` over distinct shift pairs and points.
pub fn cross_orthogonality<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    p: &OperatorRd,
    pairs: &[(Point, Point)],
    f: &F,
    points: &[Point],
) -> f64 {
    pairs
        .par_iter()
        .map(|(k, l)| {
            let a = p.translate_conjugate(k);
            let b = p.translate_conjugate(l);
            points
                .iter()
                .map(|x| a.apply(&|y: &[f64]| b.apply(f, y), x).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `Σ_{k∈ℤ^d} T_k P' T_{-k}` acting on `ℤ^d`-periodic functions.
#[derive(Clone, Debug)]
pub struct TorusOperator {
    inner: OperatorRd,
    n: u32,
}

/// Periodizes `p_prime`, which must be localized in a ball of radius below `1/(2√d)`.
pub fn periodize_projection(p_prime: &OperatorRd, n: u32) -> Result<TorusOperator> {
    if n == 0 {
        return Err(param("n must be positive"));
    }
    let loc = p_prime.localization();
    let d = loc.dim();
    let radius = 0.5
        * loc.lo.iter().zip(&loc.hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt();
    let limit = 0.5 / (d as f64).sqrt();
    if !(radius < limit) {
        return Err(param(format!(
            "localization ball radius {radius} is not below 1/(2 sqrt(d)) = {limit}"
        )));
    }
    Ok(TorusOperator { inner: p_prime.clone(), n })
}

impl TorusOperator {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// `P f(x)` for periodic `f`: only the copies `k` with `x - k` in the
    /// localization box contribute.
    pub fn apply<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F, x: &[f64]) -> f64 {
        let d = x.len();
        let loc = self.inner.localization();
        let lo: Vec<i64> = (0..d).map(|i| (x[i] - loc.hi[i]).floor() as i64).collect();
        let hi: Vec<i64> = (0..d).map(|i| (x[i] - loc.lo[i]).ceil() as i64).collect();
        let mut j = lo.clone();
        let mut total = 0.0;
        let mut y = vec![0.0; d];
        loop {
            for i in 0..d {
                y[i] = x[i] - j[i] as f64;
            }
            if loc.contains(&y) {
                total += self.inner.apply(f, &y);
            }
            let mut i = 0;
            loop {
                if i == d {
                    break;
                }
                j[i] += 1;
                if j[i] <= hi[i] {
                    break;
                }
                j[i] = lo[i];
                i += 1;
            }
            if i == d {
                break;
            }
        }
        total
    }

    /// `Σ_{g∈G} T_g P T_{-g} f(x)` with `G = (n⁻¹ℤ^d)/ℤ^d`.
    pub fn group_sum<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F, x: &[f64]) -> f64 {
        let d = x.len();
        let n = self.n as usize;
        let h = 1.0 / self.n as f64;
        let mut total = 0.0;
        let mut y = vec![0.0; d];
        for idx in 0..n.pow(d as u32) {
            let mut r = idx;
            let mut g = [0.0f64; 8];
            for i in 0..d {
                g[i] = (r % n) as f64 * h;
                r /= n;
            }
            for i in 0..d {
                y[i] = x[i] - g[i];
            }
            let shifted = |z: &[f64]| {
                let w: Point = z.iter().zip(&g).map(|(a, b)| a + b).collect();
                f(&w)
            };
            total += self.apply(&shifted, &y);
        }
        total
    }

    /// `max_x |Σ_{g∈G} T_g P T_{-g} f(x) - f(x)|`.
    pub fn verify<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(&self, f: &F, points: &[Point]) -> f64 {
        points.par_iter().map(|x| (self.group_sum(f, x) - f(x)).abs()).reduce(|| 0.0, f64::max)
    }
}

/// `m × m` grid over a box, row-major with the first coordinate fastest.
pub fn grid_points(b: &BoxRegion, m: usize) -> Vec<Point> {
    let d = b.dim();
    let total = m.pow(d as u32);
    (0..total)
        .map(|idx| {
            let mut r = idx;
            (0..d)
                .map(|i| {
                    let s = r % m;
                    r /= m;
                    let u = if m == 1 { 0.5 } else { s as f64 / (m - 1) as f64 };
                    b.lo[i] + u * (b.hi[i] - b.lo[i])
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::make_bell;

    fn bump(x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum();
        (-r2).exp() * (1.0 + x[0] * x.last().unwrap())
    }

    #[test]
    fn tensor_of_separable_function() {
        let bell = make_bell(0.15).unwrap();
        let s1 = IntervalProjectionSpec::new(0.0, 1.0, bell.clone()).unwrap();
        let s2 = IntervalProjectionSpec::new(-0.5, 0.7, bell).unwrap();
        let p = tensor_projection(&[s1.clone(), s2.clone()]).unwrap();
        let p1 = projection_interval(&s1).unwrap();
        let p2 = projection_interval(&s2).unwrap();
        let f1 = |t: f64| (2.0 * t).sin() + 0.3;
        let f2 = |t: f64| t * t - t;
        for i in 0..100 {
            let x = [-0.3 + 1.6 * (i as f64 * 0.618).fract(), -0.8 + 1.8 * (i as f64 * 0.414).fract()];
            let v = p.apply(&|y: &[f64]| f1(y[0]) * f2(y[1]), &x);
            let w = p1.apply(&f1, x[0]) * p2.apply(&f2, x[1]);
            assert!((v - w).abs() <= 1e-14, "{v} {w}");
        }
        assert_eq!(p.apply(&|_: &[f64]| 1.0, &[0.5, 0.1]), 1.0);
        assert_eq!(p.apply(&|_: &[f64]| 1.0, &[1.5, 0.1]), 0.0);
    }

    #[test]
    fn unit_square_tiling_and_partition() {
        let bell = make_bell(0.1).unwrap();
        let k = FundamentalDomain::unit_cube(2);
        let t = select_tiling(&k, 1, 3.5).unwrap();
        assert_eq!(t.f1, vec![vec![0, 0]]);
        let lat = Lattice::integer(2);
        let (p, t) = lattice_domain_projection(&k, &lat, 10, 0.4, &bell).unwrap();
        assert_eq!(t.f1.len(), 100);
        let pts = grid_points(&BoxRegion::new(vec![-1.0, -1.0], vec![2.0, 2.0]), 20);
        let chk = verify_partition(&p, &lat, &bump, &pts);
        assert!(chk.max_error < 1e-12, "{:?}", chk);
        assert_eq!(verify_partition(&p, &lat, &|_: &[f64]| 0.0, &pts).max_error, 0.0);
    }

    #[test]
    fn hexagon_tiling() {
        let hex = FundamentalDomain::hexagon();
        let lat = Lattice::hexagonal();
        let area = polygon_area(hex.vertices().unwrap());
        assert!((area - 1.5 * 3f64.sqrt()).abs() < 1e-14);
        assert!((lat.covolume() - area).abs() < 1e-13);
        let bell = make_bell(0.1).unwrap();
        let (p, t) = lattice_domain_projection(&hex, &lat, 10, 0.4, &bell).unwrap();
        assert_eq!(t.f1.len(), 100);
        for j in &t.f1 {
            assert!(t.f0.contains(j));
        }
        let classes: std::collections::BTreeSet<_> = t.f1.iter().map(|j| t.class_of(j)).collect();
        assert_eq!(classes.len(), t.f1.len());
        let pts = grid_points(&BoxRegion::new(vec![-1.5, -1.5], vec![1.5, 1.5]), 15);
        let chk = verify_partition(&p, &lat, &bump, &pts);
        assert!(chk.max_error < 1e-12, "{:?}", chk);
    }

    #[test]
    fn cells_orthogonal() {
        let bell = make_bell(0.1).unwrap();
        let cell = cell_projection(4, 2, &bell).unwrap();
        let h = 0.25;
        let pairs = vec![
            (Point::from_slice(&[0.0, 0.0]), Point::from_slice(&[h, 0.0])),
            (Point::from_slice(&[0.0, 0.0]), Point::from_slice(&[h, h])),
            (Point::from_slice(&[h, 0.0]), Point::from_slice(&[0.0, h])),
        ];
        let pts = grid_points(&BoxRegion::new(vec![-0.2, -0.2], vec![0.7, 0.7]), 15);
        assert!(cross_orthogonality(&cell, &pairs, &bump, &pts) <= 1e-14);
    }

    #[test]
    fn coarse_grid_rejected() {
        let k = FundamentalDomain::unit_cube(2);
        assert!(select_tiling(&k, 2, 0.5).is_err());
    }

    #[test]
    fn polygon_parsing() {
        let d = FundamentalDomain::parse_polygon("# square\n0 0\n1 0\n1 1\n0 1\n").unwrap();
        assert!(d.contains(&[0.5, 0.5]));
        assert!(!d.contains(&[1.5, 0.5]));
        assert!(FundamentalDomain::parse_polygon("0 0\n0 1\n1 1\n1 0\n").is_err());
        assert!(FundamentalDomain::parse_polygon("0 0 1\n").is_err());
    }

    #[test]
    fn torus_reconstruction() {
        let bell = make_bell(0.1).unwrap();
        let cell = cell_projection(4, 1, &bell).unwrap();
        let t = periodize_projection(&cell, 4).unwrap();
        let f = |x: &[f64]| (std::f64::consts::TAU * x[0]).sin();
        let pts: Vec<Point> = (0..100).map(|i| Point::from_slice(&[i as f64 / 37.0 - 1.0])).collect();
        assert!(t.verify(&f, &pts) < 1e-12);
        assert!(t.verify(&|_: &[f64]| 1.0, &pts) < 1e-14);
        let big = cell_projection(1, 1, &bell).unwrap();
        assert!(periodize_projection(&big, 1).is_err());
    }
}
