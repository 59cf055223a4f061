//! Gauss–Legendre rules and the composite/adaptive integrators built on them.
//!
//! Every integral in the crate is reduced to these one-dimensional rules;
//! product rules on the sphere and on SO(3) live in [`crate::spheregeom`].

use rayon::prelude::*;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre recurrence.
    ///
    /// Exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi's initial guess for the i-th largest root.
            let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
            let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule with `panels` equal subintervals of `[a, b]`.
    pub fn composite<F: Fn(f64) -> f64>(&self, a: f64, b: f64, panels: usize, f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                let hi = if p + 1 == panels { b } else { lo + h };
                self.integrate(lo, hi, &f)
            })
            .sum()
    }

    /// Composite rule over consecutive pieces `[breaks[i], breaks[i+1]]`,
    /// `panels` panels per piece. Empty pieces are skipped.
    pub fn piecewise<F: Fn(f64) -> f64>(&self, breaks: &[f64], panels: usize, f: F) -> f64 {
        breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| self.composite(w[0], w[1], panels, &f))
            .sum()
    }

    /// Node/weight list of [`piecewise`](Self::piecewise).
    pub fn piecewise_nodes(&self, breaks: &[f64], panels: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in breaks.windows(2).filter(|w| w[1] > w[0]) {
            let h = (w[1] - w[0]) / panels as f64;
            for p in 0..panels {
                let lo = w[0] + h * p as f64;
                let hi = if p + 1 == panels { w[1] } else { lo + h };
                out.extend(self.mapped(lo, hi));
            }
        }
        out
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Adaptive bisection with a pair of Gauss–Legendre rules.
///
/// Panels are accepted once the 16-point and the doubled 16-point estimates
/// agree to `tol` (absolute, scaled by the panel fraction).
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = GaussLegendre::new(16);
    fn go<F: Fn(f64) -> f64>(
        rule: &GaussLegendre,
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = rule.integrate(a, m, f);
        let right = rule.integrate(m, b, f);
        let refined = left + right;
        if depth >= 40 || (refined - whole).abs() <= tol {
            refined
        } else {
            go(rule, f, a, m, left, 0.5 * tol, depth + 1)
                + go(rule, f, m, b, right, 0.5 * tol, depth + 1)
        }
    }
    let whole = rule.integrate(a, b, &f);
    go(&rule, &f, a, b, whole, tol, 0)
}

/// Sum of `f(0) + ... + f(n-1)` evaluated in parallel but reduced in a fixed
/// order, so the result does not depend on the worker count.
pub fn ordered_par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    const CHUNK: usize = 512;
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}


/// A Gauss–Legendre rule applied panel-wise between breakpoints.
#[derive(Debug, Clone)]
pub struct PanelRule {
    rule: GaussLegendre,
    panels: usize,
}

impl PanelRule {
    pub fn new(order: usize, panels: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order),
            panels: panels.max(1),
        }
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// Integrates `f` over `[lo, hi]`, splitting additionally at every
    /// breakpoint that falls strictly inside.
    pub fn integrate<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, breaks: &[f64], f: F) -> f64 {
        self.rule.piecewise(&split_points(lo, hi, breaks), self.panels, f)
    }

    pub fn nodes(&self, lo: f64, hi: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
        self.rule.piecewise_nodes(&split_points(lo, hi, breaks), self.panels)
    }
}

/// Sorted `[lo, b_1, ..., hi]` keeping only breakpoints strictly inside.
pub fn split_points(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);
    pts
}
