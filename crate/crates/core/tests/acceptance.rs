//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use geocalc::geodesic::ConstraintModel;
use geocalc::ops::*;
use geocalc::study::*;
use geocalc::zoo::rod::DEFAULT_DELTA;
use geocalc::zoo::*;
use geocalc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 10 · newton_tol
const STRUCT_TOL: f64 = 1e-9;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn chart_pair() -> (Coord, Coord) {
    (coord(&[0.5, 0.0]), coord(&[-0.5, 2.0]))
}

fn convergence_study() -> Check {
    let t = Instant::now();
    let cfg = StudyConfig::default();
    let rep = run_convergence_study(&cfg).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let dec = rep.decreases_over_two_doublings();
    let orders: Vec<f64> = rep.orders.as_array().iter().map(|o| o.unwrap_or(f64::NAN)).collect();
    let detail = format!(
        "K=2..1024, orders geo {:.3} log {:.3} exp {:.3} pt {:.3}, decreasing {:?}, {:.1} s",
        orders[0], orders[1], orders[2], orders[3], dec, secs
    );
    ensure(
        dec == [true; 4] && orders.iter().all(|o| (0.8..=2.2).contains(o)) && secs < 60.0,
        detail,
    )
}

fn energy_value() -> Check {
    let m = sphere_chart_energy();
    let (a, b) = chart_pair();
    let d = sphere_oracles().dist(&a, &b).map_err(|e| e.to_string())?;
    let dev = |k| -> std::result::Result<f64, String> {
        let g = solve_geodesic(&a, &b, k, &m, &SolverConfig::default())
            .and_then(GeodesicResult::into_converged)
            .map_err(|e| e.to_string())?;
        Ok((g.energy / (d * d) - 1.0).abs())
    };
    let (d64, d128) = (dev(64)?, dev(128)?);
    let ratio = d64 / d128;
    ensure(
        d64 <= 0.05 && (1.5..=3.0).contains(&ratio),
        format!("dist {d:.6}, |E/d²-1| = {d64:.3e} at K=64, {d128:.3e} at K=128 (ratio {ratio:.3})"),
    )
}

fn equidistribution() -> Check {
    let m = sphere_chart_energy();
    let o = sphere_oracles();
    let (a, b) = chart_pair();
    let ratio = |k| -> std::result::Result<f64, String> {
        let g = solve_geodesic(&a, &b, k, &m, &SolverConfig::default())
            .and_then(GeodesicResult::into_converged)
            .map_err(|e| e.to_string())?;
        let d = g
            .path
            .points()
            .windows(2)
            .map(|w| o.dist(&w[0], &w[1]))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| e.to_string())?;
        Ok(d.iter().cloned().fold(0.0, f64::max) / d.iter().cloned().fold(f64::MAX, f64::min))
    };
    let (r64, r128, r256) = (ratio(64)?, ratio(128)?, ratio(256)?);
    ensure(
        r64 <= 1.05 && r128 < r64 && r256 < r128,
        format!("max/min segment distance {r64:.5} (K=64), {r128:.5} (K=128), {r256:.5} (K=256)"),
    )
}

fn consistency_suite() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ModelName::ALL {
        let analytic = build_model(name, None).map_err(|e| e.to_string())?.energy().derivatives_analytic();
        let tol = if analytic { 1e-6 } else { 1e-4 };
        let rep = run_consistency_audit(name, None, 50, tol, DEFAULT_SEED).map_err(|e| e.to_string())?;
        ok &= rep.passed();
        parts.push(format!("{name} {}/50 (max {:.1e})", 50 - rep.failures, rep.max_residual));
    }
    ensure(ok, parts.join(", "))
}

fn flat_suite() -> Check {
    let m = flat_energy(2);
    let s = Space::new(&m);
    let cfg = OpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst: f64 = 0.0;
    let mut draw = |r: f64| coord(&[rng.random_range(-r..r), rng.random_range(-r..r)]);
    for _ in 0..20 {
        let (a, b, w, eta0, eta1) = (draw(3.0), draw(3.0), draw(1.0), draw(0.5), draw(0.5));
        let k = 8;
        let run = || -> Result<f64> {
            let mut e: f64 = 0.0;
            let g = s.geodesic(&a, &b, k, &SolverConfig::default())?.into_converged()?;
            for (i, p) in g.path.points().iter().enumerate() {
                e = e.max((p - (&a + (&b - &a) * (i as f64 / k as f64))).amax());
            }
            e = e.max((discrete_log(&s, &a, &b, k, &cfg)? * k as f64 - (&b - &a)).amax());
            e = e.max((discrete_exp(&s, &a, &(&w / k as f64), k, &cfg)? - (&a + &w)).amax());
            let (zk, _) = parallel_transport(&s, &g.path, &(&w / k as f64), &cfg)?;
            e = e.max((zk * k as f64 - &w).amax());
            let c = discrete_connection(&s, &a, &(&b - &a), &eta0, &eta1, &cfg)?;
            e = e.max((c - (&eta1 - &eta0)).amax());
            Ok(e)
        };
        worst = worst.max(run().map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-10, format!("20 draws, max deviation {worst:.2e}"))
}

/// Largest deviation among the four structural identities on a geodesic of order `k`.
fn structural(space: &Space<'_>, xa: &Coord, xb: &Coord, k: usize) -> Result<[f64; 4]> {
    let cfg = OpConfig::default();
    let g = space.geodesic(xa, xb, k, &cfg.inner)?.into_converged()?;
    let x = g.path.points();

    let v = discrete_log(space, xa, xb, k, &cfg)?;
    let shot = discrete_exp_path(space, xa, &v, k, &cfg)?;
    let round_trip = (shot.last().expect("k ≥ 1") - xb).amax();
    let shooting = shot.iter().zip(x).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max);

    let (_, trace) = parallel_transport(space, &g.path, &(&x[1] - &x[0]), &cfg)?;
    let mut transport: f64 = 0.0;
    for i in 1..k {
        transport = transport.max((&trace.steps[i - 1].zeta - (&x[i + 1] - &x[i])).amax());
    }

    let mut connection: f64 = 0.0;
    for i in 0..k - 1 {
        let (d0, d1) = (&x[i + 1] - &x[i], &x[i + 2] - &x[i + 1]);
        connection = connection.max(discrete_connection(space, &x[i], &d0, &d0, &d1, &cfg)?.amax());
    }
    Ok([round_trip, transport, connection, shooting])
}

fn structural_identities() -> Check {
    let chart = sphere_chart_energy();
    let (spring, sphere) = sdf_spring_model(SdfSurface::unit_sphere());
    let (a, b) = chart_pair();
    let s = 0.5f64.sqrt();
    let sa = coord(&[1.0, 0.0, 0.0]);
    let sb = sphere.project(&coord(&[0.0, s, s])).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, space, xa, xb) in [
        ("sphere-chart", Space::new(&chart), &a, &b),
        ("sdf-sphere", Space::constrained(&spring, &sphere), &sa, &sb),
    ] {
        let r = structural(&space, xa, xb, 16).map_err(|e| format!("{label}: {e}"))?;
        ok &= r.iter().all(|v| *v <= STRUCT_TOL);
        parts.push(format!(
            "{label}: exp∘log {:.1e}, transport {:.1e}, connection {:.1e}, shooting {:.1e}",
            r[0], r[1], r[2], r[3]
        ));
    }
    ensure(ok, format!("K=16, tol {STRUCT_TOL:e}; {}", parts.join("; ")))
}

fn rates(devs: &[f64]) -> Vec<f64> {
    devs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn local_laws() -> Check {
    let cfg = OpConfig::default();
    let eps: Vec<f64> = (0..6).map(|i| 1.0 / 16.0 / 2f64.powi(i)).collect();
    let mut all = Vec::new();

    let chart = sphere_chart_energy();
    let cs = Space::new(&chart);
    let x = coord(&[0.5, 0.0]);
    let dir = coord(&[-1.0, 2.0]);
    let run = || -> Result<(Vec<f64>, Vec<f64>)> {
        let mut e = Vec::new();
        let mut l = Vec::new();
        for &h in &eps {
            let z = &dir * h;
            e.push((exp2(&cs, &x, &z, &cfg)? - (&x + &z * 2.0)).norm());
            let x2 = &x + &dir * h;
            l.push((&x + log2(&cs, &x, &x2, &cfg)? - (&x + &x2) / 2.0).norm());
        }
        Ok((rates(&e), rates(&l)))
    };
    let (ce, cl) = run().map_err(|e| e.to_string())?;

    let (spring, sphere) = sdf_spring_model(SdfSurface::unit_sphere());
    let ss = Space::constrained(&spring, &sphere);
    let p = coord(&[0.0, 0.0, 1.0]);
    let tangent = coord(&[-1.0, 2.0, 0.0]);
    let run = || -> Result<(Vec<f64>, Vec<f64>)> {
        let mut e = Vec::new();
        let mut l = Vec::new();
        for &h in &eps {
            let z = sphere.project(&(&p + &tangent * h))? - &p;
            e.push((exp2(&ss, &p, &z, &cfg)? - (&p + &z * 2.0)).norm());
            let x2 = sphere.project(&(&p + &tangent * h))?;
            l.push((&p + log2(&ss, &p, &x2, &cfg)? - (&p + &x2) / 2.0).norm());
        }
        Ok((rates(&e), rates(&l)))
    };
    let (se, sl) = run().map_err(|e| e.to_string())?;

    let fmt = |r: &[f64]| r.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ");
    for r in [&ce, &cl, &se, &sl] {
        all.extend_from_slice(r);
    }
    ensure(
        all.iter().all(|r| (1.7..=2.3).contains(r)),
        format!(
            "exponents chart exp2 [{}] log2 [{}]; sdf-sphere exp2 [{}] log2 [{}]",
            fmt(&ce),
            fmt(&cl),
            fmt(&se),
            fmt(&sl)
        ),
    )
}

fn rod_suite() -> Check {
    let t = Instant::now();
    let n = rod::DEFAULT_NODES;
    let simplified = run_consistency_audit(ModelName::RodSimplified, None, 20, 1e-4, DEFAULT_SEED);
    let full = run_consistency_audit(ModelName::RodFull, Some(64), 10, 1e-4, DEFAULT_SEED);
    let (simplified, full) = (simplified.map_err(|e| e.to_string())?, full.map_err(|e| e.to_string())?);

    let cfg = SolverConfig::default();
    let morph = |a: &RodCurve, b: &RodCurve, k| {
        rod_morph(a, b, k, RodEnergyKind::Simplified, DEFAULT_DELTA, &cfg).map_err(|e| e.to_string())
    };
    let c1 = RodCurve::circle(n, 1.0).map_err(|e| e.to_string())?;
    let c2 = RodCurve::circle(n, 1.2).map_err(|e| e.to_string())?;
    let spread = morph(&c1, &c2, 8)?.segment_spread();

    let e = RodCurve::ellipse(n, 1.2, 0.8).map_err(|e| e.to_string())?;
    let mid = |k: usize| -> std::result::Result<Coord, String> { Ok(morph(&c1, &e, k)?.result.path.point(k / 2).clone()) };
    let reference = mid(64)?;
    let dist = |x: &Coord| {
        (0..n)
            .map(|i| (x[2 * i] - reference[2 * i]).hypot(x[2 * i + 1] - reference[2 * i + 1]))
            .fold(0.0, f64::max)
    };
    let (e8, e16) = (dist(&mid(8)?), dist(&mid(16)?));
    let ratio = e16 / e8;
    let secs = t.elapsed().as_secs_f64();
    ensure(
        simplified.passed() && full.passed() && spread <= 0.1 && ratio <= 0.7 && secs < 120.0,
        format!(
            "N={n}: audits simplified {} (max {:.1e}), full N=32 {} (max {:.1e}); circle morph spread {:.2e}; \
             midpoint self-convergence {e8:.3e} -> {e16:.3e} (ratio {ratio:.3}); {secs:.1} s",
            if simplified.passed() { "pass" } else { "fail" },
            simplified.max_residual,
            if full.passed() { "pass" } else { "fail" },
            full.max_residual,
            spread
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("sphere-chart convergence study", convergence_study),
        ("energy value", energy_value),
        ("equidistribution", equidistribution),
        ("consistency suite", consistency_suite),
        ("exact flat-space suite", flat_suite),
        ("structural identities", structural_identities),
        ("second-order local laws", local_laws),
        ("rod-space suite", rod_suite),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
