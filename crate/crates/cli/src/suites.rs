//! One function per subcommand: build the objects, run the checks, collect
//! plotting grids.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use hestenes::bell::BellFunction;
use hestenes::circle::{circle_projection, marcinkiewicz_average_s1, mq_integral, mq_profile, ArcSpec};
use hestenes::frame::{
    band_limited_family, build_local_frame, frame_bounds_scan_polynomial, global_frame_check, reference_bump,
    reference_patch, transfer_isometry_error, transfer_to_patch, GlobalFrame,
};
use hestenes::hestenes1d::{average_translates, projection_interval, IntervalProjectionSpec, Operator1D};
use hestenes::lattice::{
    cross_orthogonality, grid_points, lattice_domain_projection, verify_partition, FundamentalDomain,
    Lattice, Point,
};
use hestenes::quadrature::PanelRule;
use hestenes::report::VerificationReport;
use hestenes::spheregeom::{so3_quadrature, Rotation, SpherePoint};
use hestenes::sphereops::{
    antisymmetric_average_check, ball_projection, conjugation_identity_check, constant_direct, constant_of_u,
    idempotence_error, l_theta, latitudinal_projection_u, lift_operator, marcinkiewicz_average_s2,
    patch_constant_product, patch_projection, psi_theta, rho_op, self_adjoint_error, FiberedRule, LatitudinalSpec,
    PatchSpec, So3Rule, SphereFn, SphereOperator,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{csv, report_for, CircleArgs, Cli, CliError, CliResult, DumpArgs, Dumps, FrameArgs, LatticeArgs, OneDArgs, SphereArgs};

type Out = CliResult<(VerificationReport, Dumps)>;

/// `n` points of `[lo, hi]`: equispaced, or uniform from `seed`.
fn line_points(lo: f64, hi: f64, n: usize, seed: Option<u64>) -> Vec<f64> {
    match seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..n).map(|_| rng.gen_range(lo..hi)).collect()
        }
        None => (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect(),
    }
}

/// `n` points of `S²`: a Fibonacci spiral, or uniform from `seed`.
pub fn sphere_points(n: usize, seed: Option<u64>) -> Vec<Point> {
    match seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..n)
                .map(|_| {
                    let z: f64 = rng.gen_range(-1.0..1.0);
                    let p: f64 = rng.gen_range(0.0..TAU);
                    let r = (1.0 - z * z).sqrt();
                    Point::from_slice(&[r * p.cos(), r * p.sin(), z])
                })
                .collect()
        }
        None => {
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
    }
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |a, b| a.max(b.abs()))
}

pub fn verify_1d(a: &OneDArgs, cli: &Cli) -> Out {
    let bell = cli.ramp.bell(a.delta)?;
    let ab = IntervalProjectionSpec::new(a.alpha, a.beta, bell.clone())?;
    let bc = IntervalProjectionSpec::new(a.beta, a.gamma, bell.clone())?;
    let ac = IntervalProjectionSpec::new(a.alpha, a.gamma, bell.clone())?;
    let p = projection_interval(&ab)?;
    let pbc = projection_interval(&bc)?;
    let pac = projection_interval(&ac)?;
    let d = a.delta;
    let ts = line_points(a.alpha - 2.0 * d - 0.5, a.gamma + 2.0 * d + 0.5, a.points, cli.seed);
    let f = |t: f64| (3.0 * t).sin().exp() + t * t;
    let g = |t: f64| (2.0 * t).cos() - t;
    let mut r = report_for("verify-1d", cli, a);

    let pf = |t: f64| p.apply(&f, t);
    r.check("idempotence", max_abs(ts.iter().map(|&t| p.apply(&pf, t) - pf(t))), 1e-13);
    let loc = ab.localization();
    let breaks = [a.alpha - d, a.alpha, a.alpha + d, a.beta - d, a.beta, a.beta + d];
    let rule = PanelRule::new(32, 2);
    let sa = rule.integrate(loc.lo, loc.hi, &breaks, |t| p.apply(&f, t) * g(t) - f(t) * p.apply(&g, t));
    r.check("self_adjointness", sa.abs(), 1e-10);
    let outside = |t: f64| if loc.contains(t) { 0.0 } else { f(t) };
    let off = ts.iter().filter(|&&t| !loc.contains(t)).map(|&t| p.apply(&f, t));
    r.check("localization", max_abs(ts.iter().map(|&t| p.apply(&outside, t)).chain(off)), 0.0);
    let sum = ts.iter().map(|&t| p.apply(&f, t) + pbc.apply(&f, t) - pac.apply(&f, t));
    r.check("sum_rule", max_abs(sum), 1e-13);
    let avg_rule = PanelRule::new(32, 4);
    let mut avg_err: f64 = 0.0;
    for &t in ts.iter().step_by((ts.len() / 10).max(1)) {
        let v = average_translates(&ab, &f, t, (t - a.beta - d, t - a.alpha + d), &avg_rule)?;
        avg_err = avg_err.max((v - (a.beta - a.alpha) * f(t)).abs());
    }
    r.check("translation_average", avg_err, 1e-9);
    r.value("average_constant", a.beta - a.alpha);

    let grid = line_points(a.alpha - 2.0 * d, a.beta + 2.0 * d, 400, None);
    let dump = csv(&["t", "m", "pf"], grid.iter().map(|&t| vec![t, ab.multiplier_value(t), p.apply(&f, t)]));
    Ok((r, vec![("profile_1d.csv".into(), dump)]))
}

fn parse_lattice(s: &str) -> CliResult<Lattice> {
    match s {
        "integer" | "square" => Ok(Lattice::integer(2)),
        "hexagonal" | "hexagon" => Ok(Lattice::hexagonal()),
        other => {
            let v: Vec<f64> = other
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("cannot parse lattice {other:?}")))?;
            if v.len() != 4 {
                return Err(CliError::Usage("a lattice matrix needs four numbers".into()));
            }
            Ok(Lattice::new(DMatrix::from_row_slice(2, 2, &v))?)
        }
    }
}

pub fn verify_lattice(a: &LatticeArgs, cli: &Cli) -> Out {
    let (domain, default_lattice) = match a.domain.as_str() {
        "square" => (FundamentalDomain::unit_cube(2), "integer"),
        "hexagon" => (FundamentalDomain::hexagon(), "hexagonal"),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.into(), source })?;
            (FundamentalDomain::parse_polygon(&text)?, "integer")
        }
    };
    let lattice = parse_lattice(a.lattice.as_deref().unwrap_or(default_lattice))?;
    let bell = cli.ramp.bell(a.delta)?;
    let (p, tiling) = lattice_domain_projection(&domain, &lattice, a.n, a.eps, &bell)?;
    let mut r = report_for("verify-lattice", cli, a);
    r.value("f0_count", tiling.f0.len());
    r.value("f1_count", tiling.f1.len());

    // |F1| = n^d · vol(M⁻¹K), the pulled-back domain having unit volume.
    let expected = (a.n as usize).pow(2);
    r.check("f1_count", (tiling.f1.len() as f64 - expected as f64).abs(), 0.0);
    let classes: std::collections::BTreeSet<_> = tiling.f1.iter().map(|j| tiling.class_of(j)).collect();
    r.check("f1_classes_distinct", (tiling.f1.len() - classes.len()) as f64, 0.0);

    let bb = domain.bounding_box().dilated(a.eps);
    let pts = match cli.seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..a.grid * a.grid)
                .map(|_| (0..2).map(|i| rng.gen_range(bb.lo[i]..bb.hi[i])).collect())
                .collect()
        }
        None => grid_points(&bb, a.grid),
    };
    let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp() * (1.0 + x[0] * x[1]) + 0.5 * x[0];
    let part = verify_partition(&p, &lattice, &f, &pts);
    r.check("partition_of_identity", part.max_error, 1e-12);
    r.value("partition_error", part.max_error);

    // Neighbouring lattice shifts of P overlap; their products must vanish.
    let g0 = lattice.point(&[0, 0]);
    let pairs: Vec<(Point, Point)> =
        [[1, 0], [0, 1], [1, 1], [1, -1]].iter().map(|j| (g0.clone(), lattice.point(j))).collect();
    let sub: Vec<Point> = pts.iter().step_by(13).cloned().collect();
    let orth = cross_orthogonality(&p, &pairs, &f, &sub);
    r.check("cross_orthogonality", orth, 1e-14);
    r.value("orthogonality_error", orth);

    let f1: std::collections::BTreeSet<&Vec<i64>> = tiling.f1.iter().collect();
    let rows = tiling.scanned.iter().map(|(j, hit)| {
        vec![j[0] as f64, j[1] as f64, *hit as u8 as f64, f1.contains(j) as u8 as f64]
    });
    let cubes = csv(&["j1", "j2", "meets_domain", "representative"], rows);
    Ok((r, vec![("cubes.csv".into(), cubes)]))
}

pub fn verify_circle(a: &CircleArgs, cli: &Cli) -> Out {
    let bell = cli.ramp.bell(a.delta)?;
    let spec = ArcSpec::new(a.alpha, a.beta, bell)?;
    let p = circle_projection(&spec)?;
    let c = spec.constant();
    let ws = line_points(0.0, TAU, a.points, cli.seed);
    let fs: [&dyn Fn(f64) -> f64; 5] = [
        &|_| 1.0,
        &|t: f64| t.sin(),
        &|t: f64| (2.0 * t).cos() + 0.5 * t.sin(),
        &|t: f64| t.cos().exp(),
        &|t: f64| 1.0 / (2.0 + (3.0 * t).sin()),
    ];
    let mut r = report_for("verify-circle", cli, a);
    let rule = PanelRule::new(32, a.panels);
    let mut err: f64 = 0.0;
    for f in fs {
        for &w in &ws {
            err = err.max((marcinkiewicz_average_s1(&p, f, w, &rule) - c * f(w)).abs());
        }
    }
    r.check("average_identity", err, 1e-9);
    let pf = |t: f64| p.apply(fs[3], t);
    r.check("idempotence", max_abs(ws.iter().map(|&w| p.apply(&pf, w) - pf(w))), 1e-13);
    let mq = mq_integral(&spec, &PanelRule::new(32, 2));
    r.check("multiplier_mass", (mq - c).abs(), 1e-12);
    r.value("average_constant", c);

    let m = mq_profile(&spec);
    let dump = csv(&["t", "m_q"], line_points(0.0, TAU, 720, None).into_iter().map(|t| vec![t, m(t)]));
    Ok((r, vec![("mq_profile.csv".into(), dump)]))
}

/// Smooth test functions on `S²`.
pub fn sphere_test_functions() -> Vec<SphereFn> {
    vec![
        Arc::new(|_: &[f64]| 1.0),
        Arc::new(|x: &[f64]| x[0]),
        Arc::new(|x: &[f64]| x[2]),
        Arc::new(|x: &[f64]| (x[0] + 0.3 * x[1]).exp() + x[2] * x[1]),
        Arc::new(|x: &[f64]| x[0] * x[1] * x[2] + x[2] * x[2]),
    ]
}

fn average_error(op: &SphereOperator, c: f64, fs: &[SphereFn], pts: &[Point], rule: &So3Rule) -> CliResult<f64> {
    let mut err: f64 = 0.0;
    for f in fs {
        for x in pts {
            let v = marcinkiewicz_average_s2(op, f.as_ref(), x, rule)?;
            err = err.max((v - c * f(x)).abs());
        }
    }
    Ok(err)
}

/// `(1/2)∫ψ_ϑ sin t dt` by a plain high-order rule split at the profile's kinks.
fn constant_oracle(spec: &LatitudinalSpec) -> f64 {
    let psi = psi_theta(spec);
    let (t, d) = (spec.theta, spec.delta());
    PanelRule::new(200, 1).integrate(0.0, PI, &[t - d, t + d, PI - t - d, PI - t + d], |s| psi(s) * s.sin()) * 0.5
}

pub fn verify_sphere(a: &SphereArgs, cli: &Cli) -> Out {
    let order = cli.so3_order.unwrap_or(48);
    let bell = cli.ramp.bell(a.delta)?;
    let spec = LatitudinalSpec::new(a.theta, 2, bell.clone())?;
    let rule = So3Rule::Fibered(FiberedRule::new(order));
    let pts = sphere_points(a.points, cli.seed);
    let dense = sphere_points(500, cli.seed.map(|s| s ^ 0x5eed));
    let fs = sphere_test_functions();
    let g: SphereFn = Arc::new(|x: &[f64]| x[0] * x[0] - x[2] + 0.5 * x[1]);
    let sa_rule = PanelRule::new(24, 1);
    let mut r = report_for("verify-sphere", cli, a);

    let u = latitudinal_projection_u(&spec)?;
    r.check("u_idempotence", idempotence_error(&u, fs[3].as_ref(), &dense), 1e-12);
    r.check("u_self_adjointness", self_adjoint_error(&u, fs[3].as_ref(), g.as_ref(), &sa_rule)?, 1e-9);
    let cu = constant_of_u(&spec, &PanelRule::new(40, 2))?;
    r.check("u_constant_oracle", (cu - constant_oracle(&spec)).abs(), 1e-10);
    r.value("c_u", cu);
    r.check("u_average", average_error(&u, cu, &fs, &pts, &rule)?, 1e-6);
    let mut k_err: f64 = 0.0;
    for f in &fs {
        for x in &pts {
            k_err = k_err.max(antisymmetric_average_check(&spec, f.as_ref(), x, &rule)?.abs());
        }
    }
    r.check("k_average_vanishes", k_err, 1e-8);

    let l = l_theta(a.theta, 2, &bell)?;
    let l2 = l_theta(PI - a.theta, 2, &bell)?;
    let rho = rho_op();
    let rlr = rho.compose(&l).compose(&rho);
    let h = |t: f64| t.sin().powi(2) + 0.2 * t;
    let ts = line_points(0.0, PI, 300, None);
    r.check("reflected_l", max_abs(ts.iter().map(|&t| l2.apply(&h, t) - rlr.apply(&h, t))), 1e-14);
    let conj = [Rotation::identity(3), Rotation::about_x(PI), Rotation::about_z(0.7)]
        .iter()
        .map(|eta| conjugation_identity_check(&l, eta, fs[3].as_ref(), &dense[..200]))
        .collect::<Result<Vec<f64>, _>>()?;
    r.check("conjugation_identities", max_abs(conj.into_iter()), 1e-13);

    let patch = PatchSpec::new(vec![(a.theta, PI - a.theta), (a.arc_alpha, a.arc_beta)], a.delta)?;
    let pomega = patch_projection(&patch, &bell)?;
    let pq = circle_projection(&ArcSpec::new(a.arc_alpha, a.arc_beta, bell.clone())?)?;
    let hat = lift_operator(&pq);
    let comm = dense.iter().map(|x| {
        u.compose(&hat).apply(fs[3].as_ref(), x) - hat.compose(&u).apply(fs[3].as_ref(), x)
    });
    r.check("patch_commutation", max_abs(comm), 1e-13);
    r.check("patch_idempotence", idempotence_error(&pomega, fs[3].as_ref(), &dense), 1e-12);
    r.check("patch_self_adjointness", self_adjoint_error(&pomega, fs[3].as_ref(), g.as_ref(), &sa_rule)?, 1e-9);
    let c_prod = patch_constant_product(&patch, &bell, &PanelRule::new(40, 2))?;
    let c_dir = constant_direct(&pomega, &PanelRule::new(32, 1))?;
    r.check("patch_constant_product", (c_prod - c_dir).abs(), 1e-6);
    r.value("c_patch", c_dir);
    r.check("patch_localization", localization_error(&pomega, &dense, |x| patch.contains(x, patch.delta)), 0.0);
    r.check("patch_average", average_error(&pomega, c_dir, &fs, &pts, &rule)?, 1e-6);

    let center = SpherePoint::new(&[0.0, 0.6, 0.8])?;
    let pb = ball_projection(&center, a.ball_radius, &bell)?;
    let cb_prod = patch_constant_product(&pb.patch, &bell, &PanelRule::new(40, 2))?;
    let cb = constant_direct(&pb.op, &PanelRule::new(32, 1))?;
    r.check("ball_constant_product", (cb_prod - cb).abs(), 1e-6);
    r.value("c_ball", cb);
    r.check("ball_idempotence", idempotence_error(&pb.op, fs[3].as_ref(), &dense), 1e-12);
    r.check("ball_self_adjointness", self_adjoint_error(&pb.op, fs[3].as_ref(), g.as_ref(), &sa_rule)?, 1e-9);
    r.check("ball_localization", localization_error(&pb.op, &dense, |x| pb.ball_contains(x)), 0.0);
    r.check("ball_average", average_error(&pb.op, cb, &fs, &pts, &rule)?, 1e-6);

    let psi = psi_theta(&spec);
    let lo = a.theta - a.delta;
    let hi = PI - a.theta + a.delta;
    let rows = line_points(0.0, PI, 720, None).into_iter().map(|t| vec![t, psi(t), (t >= lo && t <= hi) as u8 as f64]);
    Ok((r, vec![("psi_profile.csv".into(), csv(&["t", "psi", "strip"], rows))]))
}

/// Largest image of witnesses vanishing on `inside`, plus images of a smooth
/// function at points off `inside`.
fn localization_error(op: &SphereOperator, pts: &[Point], inside: impl Fn(&[f64]) -> bool + Sync) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, f) in sphere_test_functions().iter().enumerate() {
        let w = |x: &[f64]| if inside(x) { 0.0 } else { f(x) + i as f64 };
        for x in pts {
            worst = worst.max(op.apply(&w, x).abs());
            if !inside(x) {
                worst = worst.max(op.apply(f.as_ref(), x).abs());
            }
        }
    }
    worst
}

fn parse_patch(s: &str) -> CliResult<PatchSpec> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse patch {s:?}")))?;
    if v.len() != 5 {
        return Err(CliError::Usage("--patch needs theta1,theta2,lon1,lon2,delta".into()));
    }
    Ok(PatchSpec::new(vec![(v[0], v[1]), (v[2], v[3])], v[4])?)
}

pub fn verify_frame(a: &FrameArgs, cli: &Cli) -> Out {
    let order = cli.so3_order.unwrap_or(32);
    let patch = match &a.patch {
        Some(s) => parse_patch(s)?,
        None => reference_patch(),
    };
    let bell: BellFunction = cli.ramp.bell(patch.delta)?;
    let local2 = build_local_frame(2, a.n, a.eps0, &bell)?;
    let mut r = report_for("verify-frame", cli, a);
    let defect = local2.parseval_defect(reference_bump, &PanelRule::new(64, 8));
    r.check("local_defect", defect.abs(), 1e-5);
    r.value("local_defect", defect);

    let pf = transfer_to_patch(&local2, &patch)?;
    let members: Vec<usize> = match cli.seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..10).map(|_| rng.gen_range(0..pf.len())).collect()
        }
        None => (0..10).map(|i| i * (pf.len() - 1) / 9).collect(),
    };
    let (norm_err, pair_err) = transfer_isometry_error(&pf, &members, &PanelRule::new(32, 2))?;
    r.check("transfer_isometry", norm_err, 1e-10);
    r.check("transfer_inner_products", pair_err, 1e-9);
    r.value("transfer_isometry_error", norm_err);

    let global = GlobalFrame::new(&pf, &bell, &PanelRule::new(a.quad_order, 1))?;
    let so3 = so3_quadrature(order)?;
    let fs = sphere_test_functions();
    let checks = global_frame_check(&global, &fs, &so3)?;
    let worst = checks.iter().map(|c| (c.ratio - 1.0).abs()).fold(0.0, f64::max);
    r.check("global_ratio", worst, 5e-3);
    r.value("global_ratio", checks.iter().map(|c| c.ratio).collect::<Vec<_>>());
    r.value("c_p", global.constant);

    let family = band_limited_family(a.family, 3, cli.seed.unwrap_or(7));
    let bounds = frame_bounds_scan_polynomial(&global, &family, &so3)?;
    r.check("a_hat", (bounds.a_hat - 1.0).abs(), 5e-3);
    r.check("b_hat", (bounds.b_hat - 1.0).abs(), 5e-3);
    r.value("A_hat", bounds.a_hat);
    r.value("B_hat", bounds.b_hat);
    Ok((r, Vec::new()))
}

pub fn dump_profiles(a: &DumpArgs, cli: &Cli) -> Out {
    let bell = cli.ramp.bell(a.delta)?;
    let d = a.delta;
    let n = a.samples.max(2);
    let ts = line_points(-2.0 * d, 2.0 * d, n, None);
    let bell_csv = csv(&["t", "s", "s2_plus_reflected"], ts.iter().map(|&t| vec![t, bell.eval(t), bell.sq(t) + bell.sq(-t)]));

    let spec = IntervalProjectionSpec::new(0.0, 1.0, bell.clone())?;
    let p: Operator1D = projection_interval(&spec)?;
    let f = |t: f64| (3.0 * t).sin().exp();
    let m_csv = csv(
        &["t", "m", "pf"],
        line_points(-0.5, 1.5, n, None).into_iter().map(|t| vec![t, spec.multiplier_value(t), p.apply(&f, t)]),
    );

    let arc = ArcSpec::new(0.0, std::f64::consts::FRAC_PI_2, bell.clone())?;
    let m = mq_profile(&arc);
    let mq_csv = csv(&["t", "m_q"], line_points(0.0, TAU, n, None).into_iter().map(|t| vec![t, m(t)]));

    let theta = std::f64::consts::FRAC_PI_4;
    let lspec = LatitudinalSpec::new(theta, 2, bell.with_delta(d.min(0.7))?)?;
    let psi = psi_theta(&lspec);
    let (lo, hi) = (theta - lspec.delta(), PI - theta + lspec.delta());
    let psi_csv = csv(
        &["t", "psi", "strip"],
        line_points(0.0, PI, n, None).into_iter().map(|t| vec![t, psi(t), (t >= lo && t <= hi) as u8 as f64]),
    );

    let hex = FundamentalDomain::hexagon();
    let (_, tiling) = lattice_domain_projection(&hex, &Lattice::hexagonal(), 10, 0.4, &bell)?;
    let f1: std::collections::BTreeSet<&Vec<i64>> = tiling.f1.iter().collect();
    let cubes = csv(
        &["j1", "j2", "meets_domain", "representative"],
        tiling.scanned.iter().map(|(j, hit)| vec![j[0] as f64, j[1] as f64, *hit as u8 as f64, f1.contains(j) as u8 as f64]),
    );

    let mut r = report_for("dump-profiles", cli, a);
    let bell_err = max_abs(ts.iter().map(|&t| bell.sq(t) + bell.sq(-t) - 1.0));
    r.check("bell_polarity", bell_err, 1e-12);
    Ok((
        r,
        vec![
            ("bell.csv".into(), bell_csv),
            ("profile_1d.csv".into(), m_csv),
            ("mq_profile.csv".into(), mq_csv),
            ("psi_profile.csv".into(), psi_csv),
            ("hexagon_cubes.csv".into(), cubes),
        ],
    ))
}
