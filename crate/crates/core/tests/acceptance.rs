//! Acceptance suite: one line per criterion, run with `cargo test --test acceptance`.
//! The process exits non-zero if a criterion expected to hold fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI, TAU};
use std::sync::Arc;
use std::time::{Duration, Instant};

use hestenes::bell::{BellFunction, Ramp};
use hestenes::circle::{circle_projection, marcinkiewicz_average_s1, ArcSpec};
use hestenes::frame::{
    band_limited_family, build_local_frame, frame_bounds_scan_polynomial, global_frame_check, reference_bump, reference_patch,
    transfer_isometry_error, transfer_to_patch, GlobalFrame,
};
use hestenes::hestenes1d::{average_translates, projection_interval, IntervalProjectionSpec};
use hestenes::lattice::{
    cross_orthogonality, grid_points, hexagon_vertices, lattice_domain_projection, polygon_area, verify_partition,
    FundamentalDomain, Lattice, Point,
};
use hestenes::quadrature::PanelRule;
use hestenes::spheregeom::{so3_quadrature, SpherePoint};
use hestenes::sphereops::{
    antisymmetric_average_check, ball_projection, constant_direct, constant_of_u, idempotence_error,
    latitudinal_projection_u, marcinkiewicz_average_s2, patch_constant_product, patch_projection, psi_theta,
    self_adjoint_error, FiberedRule, LatitudinalSpec, PatchSpec, So3Rule, SphereFn, SphereOperator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn within(err: f64, tol: f64) -> bool {
    err <= tol
}

fn bell(delta: f64, ramp: Ramp) -> BellFunction {
    BellFunction::new(delta, ramp).unwrap()
}

fn fibonacci_points(n: usize) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let p = golden * i as f64;
            Point::from_slice(&[r * p.cos(), r * p.sin(), z])
        })
        .collect()
}

fn line_functions() -> Vec<Box<dyn Fn(f64) -> f64>> {
    vec![
        Box::new(|_| 1.0),
        Box::new(|t: f64| (3.0 * t).sin().exp() + t * t),
        Box::new(|t: f64| (2.0 * t).cos() - t),
        Box::new(|t: f64| 1.0 / (1.0 + t * t)),
        Box::new(|t: f64| (-(t - 0.3).powi(2)).exp() * t.sin()),
    ]
}

fn sphere_functions() -> Vec<SphereFn> {
    vec![
        Arc::new(|_: &[f64]| 1.0),
        Arc::new(|x: &[f64]| x[0]),
        Arc::new(|x: &[f64]| x[2]),
        Arc::new(|x: &[f64]| (x[0] + 0.3 * x[1]).exp() + x[2] * x[1]),
        Arc::new(|x: &[f64]| x[0] * x[1] * x[2] + x[2] * x[2]),
    ]
}

// Criterion 1: projection laws of the interval projections.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fs = line_functions();
    let g = |t: f64| (1.7 * t).cos() + 0.2 * t;
    let (mut point_err, mut quad_err): (f64, f64) = (0.0, 0.0);
    let mut loc_violations = 0usize;
    for _ in 0..20 {
        let alpha = rng.gen_range(-1.0..1.0);
        let beta = alpha + rng.gen_range(0.5..2.0);
        let gamma = beta + rng.gen_range(0.5..2.0);
        let delta = rng.gen_range(0.02..0.25);
        let s = bell(delta, Ramp::default());
        let ab = IntervalProjectionSpec::new(alpha, beta, s.clone()).unwrap();
        let p = projection_interval(&ab).unwrap();
        let pbc = projection_interval(&IntervalProjectionSpec::new(beta, gamma, s.clone()).unwrap()).unwrap();
        let pac = projection_interval(&IntervalProjectionSpec::new(alpha, gamma, s).unwrap()).unwrap();
        let loc = ab.localization();
        let ts: Vec<f64> = (0..200).map(|_| rng.gen_range(alpha - 1.0..gamma + 1.0)).collect();
        let breaks = [alpha - delta, alpha, alpha + delta, beta - delta, beta, beta + delta];
        for f in &fs {
            let pf = |t: f64| p.apply(f.as_ref(), t);
            point_err = point_err.max(max_abs(ts.iter().map(|&t| p.apply(&pf, t) - pf(t))));
            point_err = point_err.max(max_abs(ts.iter().map(|&t| {
                p.apply(f.as_ref(), t) + pbc.apply(f.as_ref(), t) - pac.apply(f.as_ref(), t)
            })));
            let sa = PanelRule::new(32, 2).integrate(loc.lo, loc.hi, &breaks, |t| {
                p.apply(f.as_ref(), t) * g(t) - f(t) * p.apply(&g, t)
            });
            quad_err = quad_err.max(sa.abs());
            let outside = |t: f64| if loc.contains(t) { 0.0 } else { f(t) + 1.0 };
            for &t in &ts {
                if p.apply(&outside, t) != 0.0 || (!loc.contains(t) && p.apply(f.as_ref(), t) != 0.0) {
                    loc_violations += 1;
                }
            }
        }
    }
    outcome(
        within(point_err, 1e-13) && within(quad_err, 1e-10) && loc_violations == 0,
        format!("pointwise {point_err:.1e} (<1e-13), quadrature {quad_err:.1e} (<1e-10), localization violations {loc_violations}"),
    )
}

// Criterion 2 (and its rerun under another ramp).
fn criterion_2(ramp: Ramp) -> (Outcome, Vec<f64>) {
    let triples = [(0.0, 1.0, 0.2), (-0.7, 1.8, 0.4), (0.3, 0.9, 0.05)];
    let fs = line_functions();
    let rule = PanelRule::new(32, 4);
    let mut err: f64 = 0.0;
    let mut constants = Vec::new();
    for &(a, b, d) in &triples {
        let spec = IntervalProjectionSpec::new(a, b, bell(d, ramp)).unwrap();
        for f in &fs {
            for t in [-0.4, 0.0, 0.37, 1.1, 2.5] {
                let v = average_translates(&spec, f.as_ref(), t, (t - b - d, t - a + d), &rule).unwrap();
                err = err.max((v - (b - a) * f(t)).abs());
            }
        }
        let one = |_: f64| 1.0;
        constants.push(average_translates(&spec, &one, 0.37, (0.37 - b - d, 0.37 - a + d), &rule).unwrap());
    }
    (outcome(within(err, 1e-9), format!("max |avg - (beta-alpha) f| = {err:.1e} (<1e-9)")), constants)
}

fn lattice_case(name: &str, k: &FundamentalDomain, area: f64, lattice: &Lattice) -> (bool, String) {
    let n = 10;
    let (p, tiling) = lattice_domain_projection(k, lattice, n, 0.4, &bell(0.1, Ramp::default())).unwrap();
    let expected = (n * n) as f64 * area / lattice.covolume();
    let count_ok = (tiling.f1.len() as f64 - expected.round()).abs() == 0.0 && (expected - expected.round()).abs() < 1e-12;
    let pts = grid_points(&k.bounding_box().dilated(0.4), 50);
    let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp() * (1.0 + x[0] * x[1]) + 0.5 * x[0];
    let part = verify_partition(&p, lattice, &f, &pts).max_error;
    let g0 = lattice.point(&[0, 0]);
    let pairs: Vec<(Point, Point)> =
        [[1, 0], [0, 1], [1, 1], [1, -1], [-1, 2]].iter().map(|j| (g0.clone(), lattice.point(j))).collect();
    let sub: Vec<Point> = pts.iter().step_by(7).cloned().collect();
    let orth = cross_orthogonality(&p, &pairs, &f, &sub);
    (
        count_ok && within(part, 1e-12) && within(orth, 1e-14),
        format!("{name}: |F1| {} vs {expected}, partition {part:.1e}, orthogonality {orth:.1e}", tiling.f1.len()),
    )
}

// Criterion 3: lattice partitions of identity for the square and the hexagon.
fn criterion_3() -> Outcome {
    let r3 = 3f64.sqrt();
    let hex = Lattice::hexagonal();
    let m = hex.matrix();
    let basis_ok = (m[(0, 0)] - 0.0).abs() < 1e-15
        && (m[(1, 0)] - r3).abs() < 1e-15
        && (m[(0, 1)] - 1.5).abs() < 1e-15
        && (m[(1, 1)] - 0.5 * r3).abs() < 1e-15;
    let (a, da) = lattice_case("square", &FundamentalDomain::unit_cube(2), 1.0, &Lattice::integer(2));
    let (b, db) = lattice_case("hexagon", &FundamentalDomain::hexagon(), polygon_area(&hexagon_vertices()), &hex);
    outcome(basis_ok && a && b, format!("{da}; {db}; hexagonal basis as stated: {basis_ok}"))
}

// Criterion 4 (and its rerun under another ramp).
fn criterion_4(ramp: Ramp) -> (Outcome, Vec<f64>) {
    let arcs = [(0.0, FRAC_PI_2, 0.1), (1.0, 4.0, 0.3), (-2.0, 0.5, 0.2), (3.0, 3.6, 0.05), (0.2, 5.9, 0.15)];
    let fs: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|_| 1.0),
        Box::new(|t: f64| t.sin()),
        Box::new(|t: f64| (2.0 * t).cos() + 0.5 * t.sin()),
        Box::new(|t: f64| t.cos().exp()),
        Box::new(|t: f64| 1.0 / (2.0 + (3.0 * t).sin())),
    ];
    let rule = PanelRule::new(32, 4);
    let mut err: f64 = 0.0;
    let mut constants = Vec::new();
    for &(a, b, d) in &arcs {
        let spec = ArcSpec::new(a, b, bell(d, ramp)).unwrap();
        let p = circle_projection(&spec).unwrap();
        let c = (b - a) / TAU;
        let mut measured = 0.0;
        for (i, f) in fs.iter().enumerate() {
            for j in 0..50 {
                let w = TAU * (j as f64 + 0.25) / 50.0;
                let v = marcinkiewicz_average_s1(&p, f.as_ref(), w, &rule);
                err = err.max((v - c * f(w)).abs());
                if i == 0 && j == 0 {
                    measured = v;
                }
            }
        }
        constants.push(measured);
    }
    (outcome(within(err, 1e-9), format!("max |S(P_Q)f - (beta-alpha)/2pi f| = {err:.1e} (<1e-9)")), constants)
}

/// `(1/2)∫ψ_ϑ sin t dt` with one high-order rule split at the profile's kinks.
fn constant_oracle(spec: &LatitudinalSpec) -> f64 {
    let psi = psi_theta(spec);
    let (t, d) = (spec.theta, spec.delta());
    PanelRule::new(200, 1).integrate(0.0, PI, &[t - d, t + d, PI - t - d, PI - t + d], |s| psi(s) * s.sin()) * 0.5
}

// Criterion 5 (and its rerun under another ramp).
fn criterion_5(ramp: Ramp) -> (Outcome, f64) {
    let spec = LatitudinalSpec::new(FRAC_PI_4, 2, bell(0.3, ramp)).unwrap();
    let u = latitudinal_projection_u(&spec).unwrap();
    let fs = sphere_functions();
    let g = |x: &[f64]| x[0] * x[0] - x[2] + 0.5 * x[1];
    let dense = fibonacci_points(500);
    let idem = fs.iter().map(|f| idempotence_error(&u, f.as_ref(), &dense)).fold(0.0, f64::max);
    let sa = self_adjoint_error(&u, fs[3].as_ref(), &g, &PanelRule::new(24, 1)).unwrap();
    let c = constant_of_u(&spec, &PanelRule::new(40, 2)).unwrap();
    let oracle = (c - constant_oracle(&spec)).abs();
    let rule = So3Rule::Fibered(FiberedRule::new(48));
    let pts = fibonacci_points(20);
    let (mut avg, mut k): (f64, f64) = (0.0, 0.0);
    for f in &fs[1..4] {
        for x in &pts {
            avg = avg.max((marcinkiewicz_average_s2(&u, f.as_ref(), x, &rule).unwrap() - c * f(x)).abs());
            k = k.max(antisymmetric_average_check(&spec, f.as_ref(), x, &rule).unwrap().abs());
        }
    }
    let pass = within(idem, 1e-12) && within(sa, 1e-9) && within(avg, 1e-6) && within(k, 1e-8) && within(oracle, 1e-10);
    (
        outcome(
            pass,
            format!(
                "idempotence {idem:.1e}, self-adjoint {sa:.1e}, |S(U)f - Cf| {avg:.1e}, |S(K)f| {k:.1e}, C = {c:.15} (oracle diff {oracle:.1e})"
            ),
        ),
        c,
    )
}

fn witness_errors(op: &SphereOperator, inside: &dyn Fn(&[f64]) -> bool, pts: &[Point]) -> (f64, f64) {
    let mut witness: f64 = 0.0;
    for i in 0..20 {
        let a = 0.5 + i as f64 * 0.1;
        let w = |y: &[f64]| if inside(y) { 0.0 } else { 1.0 + (a * y[0]).sin() + y[1] * y[2] * a };
        for x in pts {
            witness = witness.max(op.apply(&w, x).abs());
        }
    }
    let mut off: f64 = 0.0;
    for f in sphere_functions() {
        for x in pts.iter().filter(|x| !inside(x)) {
            off = off.max(op.apply(f.as_ref(), x).abs());
        }
    }
    (witness, off)
}

// Criterion 6: patch and ball projections on the sphere.
fn criterion_6() -> Outcome {
    let s = bell(0.1, Ramp::default());
    let fs = sphere_functions();
    let g = |x: &[f64]| x[0] * x[0] - x[2] + 0.5 * x[1];
    let dense = fibonacci_points(500);
    let mut lines = Vec::new();
    let mut pass = true;

    let patch = PatchSpec::new(vec![(FRAC_PI_3, 2.0 * FRAC_PI_3), (1.0, 2.2)], 0.1).unwrap();
    let pom = patch_projection(&patch, &s).unwrap();
    let idem = fs.iter().map(|f| idempotence_error(&pom, f.as_ref(), &dense)).fold(0.0, f64::max);
    let sa = self_adjoint_error(&pom, fs[3].as_ref(), &g, &PanelRule::new(24, 1)).unwrap();
    let (wit, off) = witness_errors(&pom, &|y| patch.contains(y, patch.delta), &dense);
    pass &= within(idem, 1e-12) && within(sa, 1e-9) && wit == 0.0 && off == 0.0;
    lines.push(format!("P_Omega idempotence {idem:.1e}, self-adjoint {sa:.1e}, witnesses {wit:.1e}, off-region {off:.1e}"));

    let center = SpherePoint::new(&[0.0, 0.6, 0.8]).unwrap();
    let pb = ball_projection(&center, 2.0, &s).unwrap();
    let idem = fs.iter().map(|f| idempotence_error(&pb.op, f.as_ref(), &dense)).fold(0.0, f64::max);
    let sa = self_adjoint_error(&pb.op, fs[3].as_ref(), &g, &PanelRule::new(24, 1)).unwrap();
    let (wit, off) = witness_errors(&pb.op, &|y| pb.ball_contains(y), &dense);
    let c_prod = patch_constant_product(&pb.patch, &s, &PanelRule::new(40, 2)).unwrap();
    let c_dir = constant_direct(&pb.op, &PanelRule::new(32, 1)).unwrap();
    let unrotated = constant_direct(&patch_projection(&pb.patch, &s).unwrap(), &PanelRule::new(32, 1)).unwrap();
    let rule = So3Rule::Fibered(FiberedRule::new(48));
    let mut avg: f64 = 0.0;
    for f in [&fs[3], &fs[4]] {
        for x in &fibonacci_points(20) {
            avg = avg.max((marcinkiewicz_average_s2(&pb.op, f.as_ref(), x, &rule).unwrap() - c_dir * f(x)).abs());
        }
    }
    pass &= within(idem, 1e-12)
        && within(sa, 1e-9)
        && wit == 0.0
        && off == 0.0
        && within((c_prod - c_dir).abs(), 1e-6)
        && within((unrotated - c_dir).abs(), 1e-8)
        && within(avg, 1e-6);
    lines.push(format!(
        "P_B idempotence {idem:.1e}, self-adjoint {sa:.1e}, witnesses {wit:.1e}, off-ball {off:.1e}, |S(P_B)f - cf| {avg:.1e}, c direct {c_dir:.12} vs product {c_prod:.12} vs unrotated {unrotated:.12}"
    ));
    outcome(pass, lines.join("; "))
}

// Criterion 7: local, transferred and global frame identities.
fn criterion_7() -> Outcome {
    let s = bell(reference_patch().delta, Ramp::default());
    let rule = PanelRule::new(64, 8);
    let d32 = build_local_frame(2, 32, 0.05, &s).unwrap().parseval_defect(reference_bump, &rule).abs();
    let d48 = build_local_frame(2, 48, 0.05, &s).unwrap().parseval_defect(reference_bump, &rule).abs();
    let local16 = build_local_frame(2, 16, 0.05, &s).unwrap();
    let pf = transfer_to_patch(&local16, &reference_patch()).unwrap();
    let members: Vec<usize> = (0..12).map(|i| i * (pf.len() - 1) / 11).collect();
    let (iso, pairs) = transfer_isometry_error(&pf, &members, &PanelRule::new(32, 2)).unwrap();
    let global = GlobalFrame::new(&pf, &s, &PanelRule::new(24, 1)).unwrap();
    let so3 = so3_quadrature(32).unwrap();
    let checks = global_frame_check(&global, &sphere_functions(), &so3).unwrap();
    let rel = checks.iter().map(|c| (c.ratio - 1.0).abs()).fold(0.0, f64::max);
    let bounds = frame_bounds_scan_polynomial(&global, &band_limited_family(10, 3, 7), &so3).unwrap();
    let bounds_ok = (0.995..=1.005).contains(&bounds.a_hat) && (0.995..=1.005).contains(&bounds.b_hat);
    outcome(
        within(d32, 1e-5) && within(d48, 1e-8) && within(iso, 1e-10) && within(rel, 5e-3) && bounds_ok,
        format!(
            "local defect N=32 {d32:.1e}, N=48 {d48:.1e}; transfer isometry {iso:.1e} (pairs {pairs:.1e}); global max rel {rel:.1e}; A_hat {:.5}, B_hat {:.5}; c(P) {:.12}",
            bounds.a_hat, bounds.b_hat, global.constant
        ),
    )
}

fn main() {
    let budgets = [5, 5, 60, 30, 600, 900, 1800];
    let mut failures = 0;
    let mut report = |id: &str, budget: Option<u64>, start: Instant, o: Outcome| {
        let elapsed = start.elapsed();
        let in_time = budget.map_or(true, |b| elapsed <= Duration::from_secs(b));
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        let limit = budget.map_or(String::new(), |b| format!(" (limit {b} s)"));
        println!(
            "criterion {id}: {} | {} | {:.1} s{limit}",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    };
    let alt = Ramp::ExpQuotient;

    let t = Instant::now();
    report("1", Some(budgets[0]), t, criterion_1());
    let t = Instant::now();
    let (o2, c2) = criterion_2(Ramp::default());
    report("2", Some(budgets[1]), t, o2);
    let t = Instant::now();
    report("3", Some(budgets[2]), t, criterion_3());
    let t = Instant::now();
    let (o4, c4) = criterion_4(Ramp::default());
    report("4", Some(budgets[3]), t, o4);
    let t = Instant::now();
    let (o5, c5) = criterion_5(Ramp::default());
    report("5", Some(budgets[4]), t, o5);
    let t = Instant::now();
    report("6", Some(budgets[5]), t, criterion_6());
    let t = Instant::now();
    report("7", Some(budgets[6]), t, criterion_7());

    // Criterion 8: the same suites under the exp-quotient ramp, each against its own
    // theorem constant, then the constants compared across ramps.
    let t = Instant::now();
    let (a2, k2) = criterion_2(alt);
    let (a4, k4) = criterion_4(alt);
    let (a5, k5) = criterion_5(alt);
    let reruns = outcome(
        a2.pass && a4.pass && a5.pass,
        format!("criterion 2: {}; criterion 4: {}; criterion 5: {}", a2.detail, a4.detail, a5.detail),
    );
    report("8a (reruns, second ramp)", None, t, reruns);
    let d_line = max_abs(c2.iter().zip(&k2).map(|(a, b)| a - b));
    let d_circle = max_abs(c4.iter().zip(&k4).map(|(a, b)| a - b));
    let d_sphere = (c5 - k5).abs();
    let same = d_line <= 1e-9 && d_circle <= 1e-9 && d_sphere <= 1e-6;
    let t = Instant::now();
    let detail = format!(
        "constant drift across ramps: line {d_line:.1e}, circle {d_circle:.1e}, sphere C(psi) {c5:.12} vs {k5:.12} (diff {d_sphere:.1e})"
    );
    // The line and circle constants are ramp-free; C(psi) on the sphere is not (see README).
    let sphere_oracle_diff = (constant_oracle(&LatitudinalSpec::new(FRAC_PI_4, 2, bell(0.3, Ramp::default())).unwrap())
        - constant_oracle(&LatitudinalSpec::new(FRAC_PI_4, 2, bell(0.3, alt)).unwrap())
        - (c5 - k5))
        .abs();
    let honest = d_line <= 1e-9 && d_circle <= 1e-9 && sphere_oracle_diff <= 1e-10;
    println!(
        "criterion 8b (same constants across ramps): {} | {detail} | {:.1} s",
        if same { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    if !same {
        println!(
            "criterion 8b is a known failure: the drift is the ramp dependence of (1/2)∫psi sin t dt, matched by the 1-D oracle to {sphere_oracle_diff:.1e}"
        );
        if !honest {
            failures += 1;
        }
    }

    if failures > 0 {
        println!("{failures} criterion line(s) failed");
        std::process::exit(1);
    }
}
