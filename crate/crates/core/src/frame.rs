//! Local Parseval frames on the cube, their transfer to a sphere patch, and
//! the rotated family `T_{b⁻¹} P φ_t` on `S²`.
//!
//! The local family is `φ·e_n`, with `{e_n}` the real trigonometric
//! orthonormal basis of `[-1-2ε₀, 1+2ε₀]^k` truncated to `|n_i| ≤ N`, and `φ`
//! a bell-built cutoff equal to 1 on `[-1, 1]^k`.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::bell::BellFunction;
use crate::error::{param, Error, Result};
use crate::lattice::Point;
use crate::quadrature::PanelRule;
use crate::spheregeom::{psi_angles, psi_coords, sphere_quadrature, Measure, QuadratureRule, Rotation};
use crate::sphereops::{constant_direct, patch_constant_product, patch_projection, PatchSpec, SphereFn, SphereOperator};

/// Truncated local Parseval frame on `ℝ^k`.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    k: usize,
    n: usize,
    eps0: f64,
    cutoff: BellFunction,
}

impl LocalFrame {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Truncation `N`.
    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// Half-width of the box carrying the trigonometric basis.
    pub fn half_width(&self) -> f64 {
        1.0 + 2.0 * self.eps0
    }

    /// Number of one-dimensional modes, `2N + 1`.
    pub fn modes(&self) -> usize {
        2 * self.n + 1
    }

    /// Number of members, `(2N + 1)^k`.
    pub fn len(&self) -> usize {
        self.modes().pow(self.k as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Orthonormal mode `m` on `[-L, L]`: the constant, then `cos(πjx/L)`, `sin(πjx/L)`.
    pub fn basis_1d(&self, m: usize, x: f64) -> f64 {
        let l = self.half_width();
        if m == 0 {
            return 1.0 / (2.0 * l).sqrt();
        }
        let j = m.div_ceil(2) as f64;
        let a = PI * j * x / l;
        let v = if m % 2 == 1 { a.cos() } else { a.sin() };
        v / l.sqrt()
    }

    /// One factor of the cutoff: 1 on `[-1, 1]`, 0 beyond `1 + ε₀`.
    pub fn cutoff_1d(&self, x: f64) -> f64 {
        self.cutoff.eval(1.0 + 0.5 * self.eps0 - x.abs())
    }

    pub fn cutoff(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.cutoff_1d(v)).product()
    }

    /// Multi-index of member `t`.
    pub fn index(&self, t: usize) -> SmallVec<[usize; 4]> {
        let m = self.modes();
        let mut rest = t;
        let mut out: SmallVec<[usize; 4]> = SmallVec::from_elem(0, self.k);
        for i in (0..self.k).rev() {
            out[i] = rest % m;
            rest /= m;
        }
        out
    }

    /// `ψ_t(x) = φ(x) e_{n(t)}(x)`.
    pub fn member(&self, t: usize, x: &[f64]) -> f64 {
        let idx = self.index(t);
        self.cutoff(x) * idx.iter().zip(x).map(|(&m, &v)| self.basis_1d(m, v)).product::<f64>()
    }

    /// Rows `φ(x_g) e_m(x_g)` over a one-dimensional node list.
    fn axis_matrix(&self, nodes: &[f64]) -> Vec<f64> {
        let g = nodes.len();
        let mut out = vec![0.0; self.modes() * g];
        for m in 0..self.modes() {
            for (j, &x) in nodes.iter().enumerate() {
                out[m * g + j] = self.cutoff_1d(x) * self.basis_1d(m, x);
            }
        }
        out
    }
}

/// Builds `{φ e_n : |n_i| ≤ N}` on `ℝ^k`; `bell` supplies only the ramp.
pub fn build_local_frame(k: usize, n: usize, eps0: f64, bell: &BellFunction) -> Result<LocalFrame> {
    if k == 0 {
        return Err(param("frame dimension must be positive"));
    }
    if n < 1 {
        return Err(param("truncation N must be at least 1"));
    }
    if !(eps0 > 0.0) {
        return Err(param("eps0 must be positive"));
    }
    Ok(LocalFrame { k, n, eps0, cutoff: bell.with_delta(0.5 * eps0)? })
}

/// Tensor grid of one-dimensional node/weight lists.
#[derive(Clone, Debug)]
pub struct TensorGrid {
    pub axes: Vec<Vec<(f64, f64)>>,
}

impl TensorGrid {
    /// Panel rule on `[lo, hi]` in every axis, split at `breaks[i]` in axis `i`.
    pub fn new(lo: f64, hi: f64, breaks: &[Vec<f64>], rule: &PanelRule) -> Self {
        Self { axes: breaks.iter().map(|b| rule.nodes(lo, hi, b)).collect() }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point and weight of flat index `i` (last axis fastest).
    pub fn point(&self, i: usize) -> (Point, f64) {
        let mut rest = i;
        let mut p: Point = SmallVec::from_elem(0.0, self.axes.len());
        let mut w = 1.0;
        for a in (0..self.axes.len()).rev() {
            let n = self.axes[a].len();
            let (x, wx) = self.axes[a][rest % n];
            p[a] = x;
            w *= wx;
            rest /= n;
        }
        (p, w)
    }
}

/// Contracts a row-major tensor of shape `dims` along every axis with the
/// `modes × dims[a]` matrices, returning the `modes^k` coefficients.
fn contract(values: &[f64], dims: &[usize], mats: &[Vec<f64>], modes: usize) -> Vec<f64> {
    let mut cur = values.to_vec();
    let mut shape = dims.to_vec();
    for (a, mat) in mats.iter().enumerate() {
        let before: usize = shape[..a].iter().product();
        let n = shape[a];
        let after: usize = shape[a + 1..].iter().product();
        let mut next = vec![0.0; before * modes * after];
        for b in 0..before {
            for m in 0..modes {
                let row = &mat[m * n..(m + 1) * n];
                let dst = &mut next[(b * modes + m) * after..(b * modes + m + 1) * after];
                for (j, &r) in row.iter().enumerate() {
                    if r == 0.0 {
                        continue;
                    }
                    let src = &cur[(b * n + j) * after..(b * n + j + 1) * after];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += r * s;
                    }
                }
            }
        }
        cur = next;
        shape[a] = modes;
    }
    cur
}

impl LocalFrame {
    /// `⟨f, ψ_t⟩` for all `t`, with `f` sampled on the grid (weights applied here).
    pub fn coefficients(&self, grid: &TensorGrid, values: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = (0..grid.len()).map(|i| values[i] * grid.point(i).1).collect();
        let dims: Vec<usize> = grid.axes.iter().map(Vec::len).collect();
        let mats: Vec<Vec<f64>> =
            grid.axes.iter().map(|ax| self.axis_matrix(&ax.iter().map(|p| p.0).collect::<Vec<_>>())).collect();
        contract(&weighted, &dims, &mats, self.modes())
    }

    /// `(Σ_t |⟨f, ψ_t⟩|², ‖f‖²)` for `f` supported in `[-1, 1]^k`.
    pub fn parseval_sums<F: Fn(&[f64]) -> f64>(&self, f: F, rule: &PanelRule) -> (f64, f64) {
        let grid = TensorGrid::new(-1.0, 1.0, &vec![Vec::new(); self.k], rule);
        let values: Vec<f64> = (0..grid.len()).map(|i| f(&grid.point(i).0)).collect();
        let norm2: f64 = (0..grid.len()).map(|i| grid.point(i).1 * values[i] * values[i]).sum();
        let sum = self.coefficients(&grid, &values).iter().map(|c| c * c).sum();
        (sum, norm2)
    }

    /// `1 - Σ_t |⟨f, ψ_t⟩|² / ‖f‖²`.
    pub fn parseval_defect<F: Fn(&[f64]) -> f64>(&self, f: F, rule: &PanelRule) -> f64 {
        let (s, n) = self.parseval_sums(f, rule);
        1.0 - s / n
    }
}

/// `exp(-1/(1-x²))` inside `(-1, 1)`, zero elsewhere.
pub fn bump_1d(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Tensor product of [`bump_1d`].
pub fn reference_bump(x: &[f64]) -> f64 {
    x.iter().map(|&v| bump_1d(v)).product()
}

/// A local frame moved onto the patch `Ω = Ψ₂(Θ)` through
/// `Y(u) = mid + half·u` and the chart isometry dividing by `√J`.
#[derive(Clone, Debug)]
pub struct PatchFrame {
    pub local: LocalFrame,
    pub patch: PatchSpec,
    mid: [f64; 2],
    half: [f64; 2],
}

/// Transfers `local` to `patch` on `S²`.
pub fn transfer_to_patch(local: &LocalFrame, patch: &PatchSpec) -> Result<PatchFrame> {
    patch.validate()?;
    if patch.k() != 2 || local.k() != 2 {
        return Err(param("frames are transferred to patches of S^2 only"));
    }
    let (lo, hi) = patch.intervals[1];
    if !(lo - patch.delta > 0.0 && hi + patch.delta < TAU) {
        return Err(param("patch enlargement crosses the longitude seam of the chart"));
    }
    let mut mid = [0.0; 2];
    let mut half = [0.0; 2];
    for (i, &(a, b)) in patch.intervals.iter().enumerate() {
        mid[i] = 0.5 * (a + b);
        half[i] = 0.5 * (b - a);
        if local.eps0() * half[i] > patch.delta {
            return Err(param(format!(
                "eps0 = {} maps outside the enlarged patch (need eps0 <= {})",
                local.eps0(),
                patch.delta / half[i]
            )));
        }
    }
    Ok(PatchFrame { local: local.clone(), patch: patch.clone(), mid, half })
}

impl PatchFrame {
    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `Y(u)`.
    pub fn chart(&self, u: &[f64]) -> [f64; 2] {
        [self.mid[0] + self.half[0] * u[0], self.mid[1] + self.half[1] * u[1]]
    }

    /// `Y⁻¹(θ)`.
    pub fn chart_inverse(&self, theta: &[f64]) -> [f64; 2] {
        [(theta[0] - self.mid[0]) / self.half[0], (theta[1] - self.mid[1]) / self.half[1]]
    }

    /// `|det Y|`.
    pub fn det(&self) -> f64 {
        self.half[0] * self.half[1]
    }

    /// `φ_t(x) = ψ_t(Y⁻¹Ψ⁻¹x) / √(J(Ψ⁻¹x)·|det Y|)`.
    pub fn member(&self, t: usize, x: &[f64]) -> f64 {
        let a = psi_angles(x);
        let u = self.chart_inverse(&a);
        let h = self.local.half_width();
        if u[0].abs() >= h || u[1].abs() >= h {
            return 0.0;
        }
        let v = self.local.member(t, &u);
        if v == 0.0 {
            0.0
        } else {
            v / (a[0].sin() * self.det()).sqrt()
        }
    }

    /// Surface-measure rule over `Ω_δ`, for checks on the sphere side.
    pub fn enlarged_rule(&self, rule: &PanelRule) -> Result<QuadratureRule<Point>> {
        let d = self.patch.delta;
        let (t0, t1) = self.patch.intervals[0];
        let (l0, l1) = self.patch.intervals[1];
        let e = self.local.eps0();
        let tb: Vec<f64> = [-1.0 - e, -1.0, 1.0, 1.0 + e].iter().map(|&u| self.mid[0] + self.half[0] * u).collect();
        let lb: Vec<f64> = [-1.0 - e, -1.0, 1.0, 1.0 + e].iter().map(|&u| self.mid[1] + self.half[1] * u).collect();
        crate::spheregeom::sphere_box_quadrature((t0 - d, t1 + d), &tb, (l0 - d, l1 + d), &lb, rule, Measure::SphereSurface)
    }
}

/// `max_t |‖φ_t‖_{L²(S²)} - ‖ψ_t‖_{L²}|` and the largest change of a pairwise
/// inner product, over the listed members.
pub fn transfer_isometry_error(frame: &PatchFrame, members: &[usize], rule: &PanelRule) -> Result<(f64, f64)> {
    let q = frame.enlarged_rule(rule)?;
    let e = frame.local.eps0();
    let br = vec![vec![-1.0, 1.0]; 2];
    let grid = TensorGrid::new(-1.0 - e, 1.0 + e, &br, rule);
    let sphere: Vec<Vec<f64>> = members.iter().map(|&t| q.nodes.iter().map(|x| frame.member(t, x)).collect()).collect();
    let flat: Vec<Vec<f64>> =
        members.iter().map(|&t| (0..grid.len()).map(|i| frame.local.member(t, &grid.point(i).0)).collect()).collect();
    let ip_s = |a: &[f64], b: &[f64]| -> f64 { q.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum() };
    let ip_f = |a: &[f64], b: &[f64]| -> f64 { (0..grid.len()).map(|i| grid.point(i).1 * a[i] * b[i]).sum() };
    let mut norm_err: f64 = 0.0;
    let mut pair_err: f64 = 0.0;
    for i in 0..members.len() {
        norm_err = norm_err.max((ip_s(&sphere[i], &sphere[i]).sqrt() - ip_f(&flat[i], &flat[i]).sqrt()).abs());
        for j in 0..i {
            pair_err = pair_err.max((ip_s(&sphere[i], &sphere[j]) - ip_f(&flat[i], &flat[j])).abs());
        }
    }
    Ok((norm_err, pair_err))
}

/// Precomputed data for `Σ_t |⟨f, T_{b⁻¹} P φ_t⟩|²`.
///
/// The coefficients are evaluated as `⟨P T_b f, φ_t⟩`, pulled back to the
/// cube where `φ_t` is separable.
pub struct GlobalFrame {
    pub frame: PatchFrame,
    pub op: SphereOperator,
    /// `c(P) = ∫ P1 dσ`, quadratured directly.
    pub constant: f64,
    /// `c(P)` as the product of the one-dimensional constants.
    pub constant_product: f64,
    grid: TensorGrid,
    dims: Vec<usize>,
    mats: Vec<Vec<f64>>,
    /// `(grid node, c_i · w · √(J |det Y|), y_i)` over all expansion terms.
    terms: Vec<(usize, f64, [f64; 3])>,
}

impl std::fmt::Debug for GlobalFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlobalFrame")
            .field("members", &self.frame.len())
            .field("nodes", &self.grid.len())
            .field("terms", &self.terms.len())
            .finish()
    }
}

impl GlobalFrame {
    /// `P` is the patch projection over the shrunk patch `Θ_{-δ}`, localized on `Ω`.
    /// The cube grid must resolve the top retained mode.
    pub fn new(frame: &PatchFrame, bell: &BellFunction, rule: &PanelRule) -> Result<Self> {
        let shrunk = frame.patch.shrunk(frame.patch.delta)?;
        let op = patch_projection(&shrunk, bell)?;
        let constant_product = patch_constant_product(&shrunk, bell, &PanelRule::new(40, 2))?;
        let constant = constant_direct(&op, &PanelRule::new(32, 1))?;
        let region = op.region().ok_or_else(|| param("frame checks run on S^2"))?;
        let tb: Vec<f64> = region.t_breaks.iter().map(|&t| frame.chart_inverse(&[t, frame.mid[1]])[0]).collect();
        let lb: Vec<f64> = region.lon_breaks.iter().map(|&l| frame.chart_inverse(&[frame.mid[0], l])[1]).collect();
        let grid = TensorGrid::new(-1.0, 1.0, &[tb, lb], rule);
        let dims: Vec<usize> = grid.axes.iter().map(Vec::len).collect();
        let mats: Vec<Vec<f64>> = grid
            .axes
            .iter()
            .map(|ax| frame.local.axis_matrix(&ax.iter().map(|p| p.0).collect::<Vec<_>>()))
            .collect();
        let per_node: Vec<Vec<(usize, f64, [f64; 3])>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (u, w) = grid.point(i);
                let th = frame.chart(&u);
                let x = psi_coords(&th);
                let scale = w * (th[0].sin() * frame.det()).sqrt();
                op.expand(x.as_slice()).into_iter().map(|(c, y)| (i, c * scale, [y[0], y[1], y[2]])).collect()
            })
            .collect();
        let terms = per_node.into_iter().flatten().collect();
        Ok(Self { frame: frame.clone(), op, constant, constant_product, grid, dims, mats, terms })
    }

    /// `⟨P T_b f, φ_t⟩` for all `t` and each `f`, with `T_b f(y) = f(b⁻¹y)`.
    pub fn coefficients_batch(&self, fs: &[SphereFn], b: &Rotation) -> Vec<Vec<f64>> {
        let m = b.matrix();
        let mut values = vec![vec![0.0; self.grid.len()]; fs.len()];
        for (i, c, y) in &self.terms {
            let z = [
                m[0] * y[0] + m[3] * y[1] + m[6] * y[2],
                m[1] * y[0] + m[4] * y[1] + m[7] * y[2],
                m[2] * y[0] + m[5] * y[1] + m[8] * y[2],
            ];
            for (v, f) in values.iter_mut().zip(fs) {
                v[*i] += c * f(&z);
            }
        }
        if self.dims.len() == 2 {
            // C = E₀ V E₁ᵀ, one matrix product per axis.
            let (g0, g1) = (self.dims[0], self.dims[1]);
            let m = self.frame.local.modes();
            let e0 = DMatrix::from_row_slice(m, g0, &self.mats[0]);
            let e1 = DMatrix::from_row_slice(m, g1, &self.mats[1]);
            return values
                .iter()
                .map(|v| {
                    let c = &e0 * DMatrix::from_row_slice(g0, g1, v) * e1.transpose();
                    c.transpose().as_slice().to_vec()
                })
                .collect();
        }
        values.iter().map(|v| contract(v, &self.dims, &self.mats, self.frame.local.modes())).collect()
    }

    pub fn coefficients(&self, f: &SphereFn, b: &Rotation) -> Vec<f64> {
        self.coefficients_batch(std::slice::from_ref(f), b).pop().unwrap_or_default()
    }

    /// `Σ_t |⟨f, T_{b⁻¹} P φ_t⟩|²` for each `f`.
    pub fn energies(&self, fs: &[SphereFn], b: &Rotation) -> Vec<f64> {
        self.coefficients_batch(fs, b).iter().map(|c| c.iter().map(|v| v * v).sum()).collect()
    }

    /// `∫_{SO(3)} Σ_t |⟨f_j, T_{b⁻¹} P φ_t⟩|² dμ(b)` for each `f_j`, summed in a fixed order.
    pub fn lhs_batch(&self, fs: &[SphereFn], so3: &QuadratureRule<Rotation>) -> Vec<f64> {
        const CHUNK: usize = 256;
        let n = so3.len();
        let partial: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![0.0; fs.len()];
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    for (a, e) in acc.iter_mut().zip(self.energies(fs, &so3.nodes[i])) {
                        *a += so3.weights[i] * e;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; fs.len()];
        for p in partial {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out
    }
}

/// `‖f‖²` in surface measure.
pub fn surface_norm2<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(f: &F, order: usize) -> Result<f64> {
    Ok(sphere_quadrature(order, Measure::SphereSurface)?.integrate(|x| f(x) * f(x)))
}

/// One function's outcome in the global identity.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GlobalCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `lhs = ∫ Σ_t |⟨f, T_{b⁻¹}Pφ_t⟩|² dμ(b)` against `rhs = c(P)‖f‖²`.
pub fn global_frame_check(global: &GlobalFrame, fs: &[SphereFn], so3: &QuadratureRule<Rotation>) -> Result<Vec<GlobalCheck>> {
    let lhs = global.lhs_batch(fs, so3);
    fs.iter()
        .zip(lhs)
        .map(|(f, l)| {
            let rhs = global.constant * surface_norm2(f.as_ref(), 32)?;
            let ratio = if rhs == 0.0 { if l == 0.0 { 1.0 } else { f64::INFINITY } } else { l / rhs };
            Ok(GlobalCheck { lhs: l, rhs, ratio })
        })
        .collect()
}

/// Frame-bound estimates of the rescaled family `c(P)^{-1/2} T_{b⁻¹}Pφ_t`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct FrameBounds {
    pub a_hat: f64,
    pub b_hat: f64,
    pub used: usize,
    pub warnings: Vec<String>,
}

/// `min`/`max` of `lhs / (c(P)‖f‖²)` over the family; zero-norm members are
/// skipped with a warning, and a family with none left is an error.
pub fn frame_bounds_scan(global: &GlobalFrame, fs: &[SphereFn], so3: &QuadratureRule<Rotation>) -> Result<FrameBounds> {
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let n = surface_norm2(f.as_ref(), 32)?;
        if n <= 1e-300 {
            warnings.push(format!("member {i} has zero norm and was skipped"));
        } else {
            kept.push((f.clone(), n));
        }
    }
    if kept.is_empty() {
        return Err(Error::Precondition("frame bound scan needs a function of nonzero norm".into()));
    }
    let funcs: Vec<SphereFn> = kept.iter().map(|(f, _)| f.clone()).collect();
    let lhs = global.lhs_batch(&funcs, so3);
    let ratios: Vec<f64> = lhs.iter().zip(&kept).map(|(l, (_, n))| l / (global.constant * n)).collect();
    Ok(FrameBounds {
        a_hat: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        b_hat: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        used: ratios.len(),
        warnings,
    })
}

/// Polynomials of total degree `≤ degree` in `(x₁, x₂, x₃)`, stored by their
/// monomial coefficients. The space is rotation invariant, which the
/// frame-bound scan exploits.
#[derive(Clone, Debug)]
pub struct PolynomialFamily {
    degree: usize,
    exps: Vec<[usize; 3]>,
    coeffs: Vec<Vec<f64>>,
}

impl PolynomialFamily {
    /// `count` members with coefficients uniform in `[-1, 1]`.
    pub fn random(count: usize, degree: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exps = monomials(degree);
        let coeffs = (0..count).map(|_| exps.iter().map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        Self { degree, exps, coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn functions(&self) -> Vec<SphereFn> {
        self.coeffs
            .iter()
            .map(|c| {
                let (c, exps, degree) = (c.clone(), self.exps.clone(), self.degree);
                let f: SphereFn = std::sync::Arc::new(move |x: &[f64]| {
                    let pows: SmallVec<[[f64; 3]; 8]> = (0..=degree)
                        .scan([1.0; 3], |p, _| {
                            let cur = *p;
                            *p = [p[0] * x[0], p[1] * x[1], p[2] * x[2]];
                            Some(cur)
                        })
                        .collect();
                    c.iter().zip(&exps).map(|(a, e)| a * pows[e[0]][0] * pows[e[1]][1] * pows[e[2]][2]).sum()
                });
                f
            })
            .collect()
    }

    /// The monomials `y ↦ y^e` themselves.
    fn monomial_functions(&self) -> Vec<SphereFn> {
        self.exps
            .iter()
            .map(|&e| {
                let f: SphereFn = std::sync::Arc::new(move |y: &[f64]| {
                    y[0].powi(e[0] as i32) * y[1].powi(e[1] as i32) * y[2].powi(e[2] as i32)
                });
                f
            })
            .collect()
    }

    /// `table[i·n + j]`: index of the product of monomials `i` and `j`, if within degree.
    fn product_table(&self) -> Vec<Option<usize>> {
        let n = self.exps.len();
        (0..n * n)
            .map(|k| {
                let (a, b) = (self.exps[k / n], self.exps[k % n]);
                let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                self.exps.iter().position(|x| *x == e)
            })
            .collect()
    }

    /// Monomial coefficients of `y ↦ (Mᵀy)^e` for every exponent `e`, with `M`
    /// row-major.
    fn rotated_monomials(&self, m: &[f64], table: &[Option<usize>]) -> Vec<Vec<f64>> {
        let n = self.exps.len();
        let mul = |a: &[f64], b: &[f64]| {
            let mut out = vec![0.0; n];
            for (i, &ai) in a.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                for (j, &bj) in b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    if let Some(k) = table[i * n + j] {
                        out[k] += ai * bj;
                    }
                }
            }
            out
        };
        let index = |e: [usize; 3]| self.exps.iter().position(|x| *x == e);
        // The constant monomial is listed first.
        let mut one = vec![0.0; n];
        one[0] = 1.0;
        // powers[i][k] = (Mᵀy)_i^k, with (Mᵀy)_i = Σ_j m[3j+i] y_j.
        let powers: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|i| {
                let mut lin = vec![0.0; n];
                for j in 0..3 {
                    let mut e = [0; 3];
                    e[j] = 1;
                    if let Some(k) = index(e) {
                        lin[k] = m[3 * j + i];
                    }
                }
                let mut out = vec![one.clone()];
                for k in 1..=self.degree {
                    let next = mul(&out[k - 1], &lin);
                    out.push(next);
                }
                out
            })
            .collect();
        self.exps.iter().map(|e| mul(&mul(&powers[0][e[0]], &powers[1][e[1]]), &powers[2][e[2]])).collect()
    }
}

fn monomials(degree: usize) -> Vec<[usize; 3]> {
    let mut exps = Vec::new();
    for a in 0..=degree {
        for b in 0..=degree - a {
            for c in 0..=degree - a - b {
                exps.push([a, b, c]);
            }
        }
    }
    exps
}

/// Random polynomials of total degree `≤ degree`, coefficients uniform in `[-1, 1]`.
pub fn band_limited_family(count: usize, degree: usize, seed: u64) -> PolynomialFamily {
    PolynomialFamily::random(count, degree, seed)
}

/// `frame_bounds_scan` for a polynomial family. Coefficients are linear in
/// `f`, and `T_b` maps the family's space into itself, so with `G_e` the
/// coefficient vector of the monomial `y^e` and `α(b)` the monomial
/// coefficients of the rotated member, the energy is `α(b)ᵀ (GᵀG) α(b)`.
pub fn frame_bounds_scan_polynomial(
    global: &GlobalFrame,
    family: &PolynomialFamily,
    so3: &QuadratureRule<Rotation>,
) -> Result<FrameBounds> {
    let fs = family.functions();
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let n = surface_norm2(f.as_ref(), 32)?;
        if n <= 1e-300 {
            warnings.push(format!("member {i} has zero norm and was skipped"));
        } else {
            kept.push((i, n));
        }
    }
    if kept.is_empty() {
        return Err(Error::Precondition("frame bound scan needs a function of nonzero norm".into()));
    }
    let g = global.coefficients_batch(&family.monomial_functions(), &Rotation::identity(3));
    let nm = g.len();
    let gram: Vec<f64> =
        (0..nm * nm).map(|k| g[k / nm].iter().zip(&g[k % nm]).map(|(a, b)| a * b).sum()).collect();
    let table = family.product_table();
    let mut lhs = vec![0.0; kept.len()];
    for (b, w) in so3.nodes.iter().zip(&so3.weights) {
        let rot = family.rotated_monomials(b.matrix(), &table);
        for (l, (i, _)) in lhs.iter_mut().zip(&kept) {
            let c = &family.coeffs[*i];
            let alpha: Vec<f64> = (0..nm).map(|k| c.iter().zip(&rot).map(|(a, r)| a * r[k]).sum()).collect();
            let mut e = 0.0;
            for (p, ap) in alpha.iter().enumerate() {
                e += ap * gram[p * nm..(p + 1) * nm].iter().zip(&alpha).map(|(h, aq)| h * aq).sum::<f64>();
            }
            *l += w * e;
        }
    }
    let ratios: Vec<f64> = lhs.iter().zip(&kept).map(|(l, (_, n))| l / (global.constant * n)).collect();
    Ok(FrameBounds {
        a_hat: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        b_hat: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        used: ratios.len(),
        warnings,
    })
}

/// The default reference patch: polar `[π/3, 2π/3]`, longitude `[π/2 - 0.4, π/2 + 0.4]`, `δ = 0.05`.
pub fn reference_patch() -> PatchSpec {
    PatchSpec {
        intervals: vec![(PI / 3.0, 2.0 * PI / 3.0), (PI / 2.0 - 0.4, PI / 2.0 + 0.4)],
        delta: 0.05,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::make_bell;
    use crate::spheregeom::so3_quadrature;
    use std::sync::Arc;

    fn bell() -> BellFunction {
        make_bell(0.1).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        let fr = build_local_frame(1, 6, 0.05, &bell()).unwrap();
        let l = fr.half_width();
        let rule = PanelRule::new(40, 4);
        for a in 0..fr.modes() {
            for b in 0..fr.modes() {
                let ip = rule.integrate(-l, l, &[], |x| fr.basis_1d(a, x) * fr.basis_1d(b, x));
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-13, "{a} {b} {ip}");
            }
        }
    }

    #[test]
    fn members_supported_in_box() {
        let fr = build_local_frame(2, 4, 0.1, &bell()).unwrap();
        for t in [0, 7, 40, fr.len() - 1] {
            assert_eq!(fr.member(t, &[1.1 + 1e-9, 0.3]), 0.0);
            assert_eq!(fr.member(t, &[0.0, -1.2]), 0.0);
        }
        assert_eq!(fr.cutoff(&[1.0, -1.0]), 1.0);
        assert_eq!(fr.cutoff(&[0.2, 0.9]), 1.0);
    }

    #[test]
    fn local_parseval_spectral() {
        let rule = PanelRule::new(64, 8);
        let fr = build_local_frame(1, 32, 0.05, &bell()).unwrap();
        let d32 = fr.parseval_defect(|x| bump_1d(x[0]), &rule);
        assert!(d32.abs() < 1e-6, "{d32}");
        let oracle = build_local_frame(1, 256, 0.05, &bell()).unwrap();
        let d256 = oracle.parseval_defect(|x| bump_1d(x[0]), &PanelRule::new(64, 32));
        assert!(d256.abs() < 1e-13, "{d256}");
        // Above the retained band everything is lost.
        let fr4 = build_local_frame(1, 4, 0.05, &bell()).unwrap();
        let l = fr4.half_width();
        let hf = |x: &[f64]| (PI * 40.0 * x[0] / l).cos() * if x[0].abs() <= 1.0 { 1.0 } else { 0.0 };
        let (s, n) = fr4.parseval_sums(hf, &rule);
        assert!(s / n < 0.02 && n > 0.5);
    }

    #[test]
    fn transfer_constraints_and_isometry() {
        let local = build_local_frame(2, 8, 0.05, &bell()).unwrap();
        let pf = transfer_to_patch(&local, &reference_patch()).unwrap();
        let (n, p) = transfer_isometry_error(&pf, &[0, 5, 17, 120, 288], &PanelRule::new(32, 2)).unwrap();
        assert!(n < 1e-10 && p < 1e-9, "{n} {p}");
        let wide = build_local_frame(2, 8, 0.5, &bell()).unwrap();
        assert!(transfer_to_patch(&wide, &reference_patch()).is_err());
        let seam = PatchSpec { intervals: vec![(1.0, PI - 1.0), (0.02, 0.6)], delta: 0.05 };
        assert!(transfer_to_patch(&local, &seam).is_err());
        // Members vanish off the enlarged patch.
        let x = psi_coords(&[PI / 2.0, 0.3]);
        assert_eq!(pf.member(3, x.as_slice()), 0.0);
    }

    #[test]
    fn global_coefficients_match_literal_form() {
        let local = build_local_frame(2, 4, 0.05, &bell()).unwrap();
        let pf = transfer_to_patch(&local, &reference_patch()).unwrap();
        let g = GlobalFrame::new(&pf, &bell(), &PanelRule::new(20, 1)).unwrap();
        let f = |x: &[f64]| 1.0 + x[0] * x[2] + 0.5 * x[1];
        let b = Rotation::euler_zyz(0.3, 1.1, -0.4);
        let fast = g.coefficients(&(Arc::new(f) as SphereFn), &b);
        assert!((g.constant - g.constant_product).abs() < 1e-12);
        // ⟨f, T_{b⁻¹}Pφ_t⟩ = ∫ f(x) (Pφ_t)(b x) dσ(x), integrated over b⁻¹Ω.
        let region = g.op.region().unwrap();
        let q = region.quadrature(&PanelRule::new(20, 1), Measure::SphereSurface).unwrap();
        for t in [0, 4, 31, 80] {
            let lit = q.integrate(|y| {
                let x = b.apply_inverse(y);
                f(&x) * g.op.apply(&|z: &[f64]| pf.member(t, z), y)
            });
            assert!((lit - fast[t]).abs() < 1e-9, "{t} {lit} {}", fast[t]);
        }
    }

    #[test]
    fn global_identity_small() {
        let local = build_local_frame(2, 8, 0.05, &bell()).unwrap();
        let pf = transfer_to_patch(&local, &reference_patch()).unwrap();
        let g = GlobalFrame::new(&pf, &bell(), &PanelRule::new(12, 1)).unwrap();
        let so3 = so3_quadrature(4).unwrap();
        let zero: SphereFn = Arc::new(|_: &[f64]| 0.0);
        let one: SphereFn = Arc::new(|_: &[f64]| 1.0);
        let r = global_frame_check(&g, &[zero.clone(), one.clone()], &so3).unwrap();
        assert_eq!(r[0].lhs, 0.0);
        assert!((r[1].ratio - 1.0).abs() < 5e-2, "{:?}", r[1]);
        assert!(frame_bounds_scan(&g, &[zero.clone()], &so3).is_err());
        let s = frame_bounds_scan(&g, &[zero, one], &so3).unwrap();
        assert_eq!(s.a_hat, s.b_hat);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn polynomial_scan_matches_direct_scan() {
        let patch = reference_patch();
        let b = make_bell(patch.delta).unwrap();
        let local = build_local_frame(2, 6, 0.05, &b).unwrap();
        let pf = transfer_to_patch(&local, &patch).unwrap();
        let g = GlobalFrame::new(&pf, &b, &PanelRule::new(12, 1)).unwrap();
        let so3 = so3_quadrature(3).unwrap();
        let fam = band_limited_family(4, 3, 3);
        let fast = frame_bounds_scan_polynomial(&g, &fam, &so3).unwrap();
        let slow = frame_bounds_scan(&g, &fam.functions(), &so3).unwrap();
        assert!((fast.a_hat - slow.a_hat).abs() < 1e-12 * slow.a_hat, "{} {}", fast.a_hat, slow.a_hat);
        assert!((fast.b_hat - slow.b_hat).abs() < 1e-12 * slow.b_hat);
        let r = Rotation::euler_zyz(0.3, 1.1, -0.4);
        let rot = fam.rotated_monomials(r.matrix(), &fam.product_table());
        let f = &fam.functions()[1];
        let y = [0.48, 0.6, 0.64];
        let direct = f(&r.apply_inverse(&y));
        let mono = fam.monomial_functions();
        let via: f64 = (0..fam.exps.len())
            .map(|k| fam.coeffs[1].iter().zip(&rot).map(|(a, r)| a * r[k]).sum::<f64>() * mono[k](&y))
            .sum();
        assert!((direct - via).abs() < 1e-13);
    }
}
