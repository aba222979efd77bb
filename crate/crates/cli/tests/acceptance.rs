//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest harness so the
//! lines are always printed; exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use geoclose::bounds::{a_theta, f_delta, injectivity_b, tprime_bounds, CurvatureBounds};
use geoclose::comparison::solve_side_constant;
use geoclose::hyp2::{
    busemann, distance, geodesic_flow, visibility_angle, BoundaryPoint, CurvatureScale, PointUHP,
    UnitTangent,
};
use geoclose_cli::config::{ExperimentConfig, ExperimentKind};
use geoclose_cli::experiments::{run, substream};
use geoclose_cli::report::Report;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn experiment(kind: ExperimentKind, f: impl FnOnce(&mut ExperimentConfig)) -> Report {
    let mut cfg = ExperimentConfig {
        kind,
        ..Default::default()
    };
    f(&mut cfg);
    run(&cfg).unwrap_or_else(|e| panic!("{} failed: {e}", kind.name()))
}

/// Rows failing any of `names`, plus the smallest margin seen over them.
fn tally(report: &Report, names: &[&str]) -> (usize, f64) {
    let mut failing = 0;
    let mut worst = f64::INFINITY;
    for row in &report.rows {
        let mut ok = true;
        for name in names {
            let c = row
                .find_check(name)
                .unwrap_or_else(|| panic!("missing check {name}"));
            ok &= c.passed();
            if let Some(m) = c.margin {
                worst = worst.min(m);
            }
        }
        failing += usize::from(!ok);
    }
    (failing, worst)
}

fn equality_suite() -> Outcome {
    let r = experiment(ExperimentKind::Triangles, |c| c.samples = 10_000);
    let names = [
        "cosine_kappa1_equality",
        "cosine_kappa2_equality",
        "sine_kappa1_equality",
        "sine_kappa2_equality",
    ];
    let worst = r
        .rows
        .iter()
        .flat_map(|row| names.iter().filter_map(|n| row.find_check(n)?.margin))
        .fold(0.0f64, |a, m| a.max(m.abs()));
    let right = r
        .rows
        .iter()
        .filter(|row| {
            row.find_check("sine_kappa1_equality")
                .unwrap()
                .margin
                .is_some()
        })
        .count();
    Outcome::new(
        worst <= 1e-9 && r.violations() == 0,
        format!(
            "{} triangles, {right} right-angled, max |equality margin| {worst:.2e}, {} violations",
            r.rows.len(),
            r.violations()
        ),
    )
}

fn variable_suite() -> Outcome {
    let r = experiment(ExperimentKind::SurfaceTriangles, |c| {
        c.kappa1 = 0.5;
        c.kappa2 = 1.0;
        c.samples = 1_000;
    });
    let worst = r
        .rows
        .iter()
        .flat_map(|row| row.checks.iter().filter_map(|c| c.margin))
        .fold(f64::INFINITY, f64::min);
    Outcome::new(
        r.violations() == 0,
        format!(
            "{} triangles, worst relative margin {worst:.2e}, {} violations",
            r.rows.len(),
            r.violations()
        ),
    )
}

fn partner_bound(r: &Report) -> Outcome {
    let (failing, worst) = tally(r, &["strictly_shorter", "length", "distance"]);
    Outcome::new(
        failing == 0 && r.rows.len() == 20,
        format!(
            "{} runs, worst margin {worst:.3e}, {failing} failing",
            r.rows.len()
        ),
    )
}

fn scaling() -> Outcome {
    let r = experiment(ExperimentKind::PartnerScaling, |_| {});
    let (failing, _) = tally(&r, &["taylor_lower"]);
    let slope = r
        .notes
        .iter()
        .find(|(k, _)| k == "slope")
        .map(|(_, v)| v.clone())
        .unwrap_or_default();
    let summary_ok = r.summary.iter().all(|c| c.passed()) && !r.summary.is_empty();
    Outcome::new(
        failing == 0 && summary_ok,
        format!("slope {slope}, {failing} runs below C1 eps^2"),
    )
}

fn bracket() -> Outcome {
    let cb = CurvatureBounds::constant(1.0).unwrap();
    let b = injectivity_b(cb.kappa2, 2.0 * 0.5);
    let (lo_eps, hi_eps) = (1e-3f64, 0.05f64);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for k in 0..1_000 {
        let mut rng = substream(5, k);
        let eps = (lo_eps.ln() + (hi_eps.ln() - lo_eps.ln()) * rng.gen::<f64>()).exp();
        // Shortest loop allowed by the injectivity-radius hypothesis at this angle.
        let t_min = (b / (1.0 - eps.cos()) + 1.0).acosh() / cb.kappa2;
        let t1 = t_min + rng.gen_range(0.0..10.0);
        let t2 = t_min + rng.gen_range(0.0..10.0);
        let t_hat = solve_side_constant(t1, t2, PI - eps, 1.0).unwrap();
        let (lower, upper) = tprime_bounds(t1, t2, eps, cb, b).unwrap();
        let gap = t1 + t2 - t_hat;
        let margin = (gap - lower).min(upper - gap);
        worst = worst.min(margin);
        violations += usize::from(margin < -1e-9);
    }
    Outcome::new(
        violations == 0,
        format!("1000 samples, b = {b:.4}, worst margin {worst:.3e}, {violations} violations"),
    )
}

fn closing() -> Outcome {
    let r = experiment(ExperimentKind::Closing, |c| c.samples = 100);
    let (failing, _) = tally(
        &r,
        &[
            "length",
            "shadow",
            "foot_shorter",
            "foot_length",
            "foot_shadow",
        ],
    );
    let foot = r
        .rows
        .iter()
        .filter(|row| row.find_check("foot_length").unwrap().margin.is_some())
        .count();
    Outcome::new(
        failing == 0 && foot > 0,
        format!("100 runs, {foot} foot-point cases, {failing} failing"),
    )
}

fn pseudo(r: &Report) -> Outcome {
    let (failing, worst) = tally(
        r,
        &[
            "loop1_length",
            "loop2_length",
            "loop1_distance",
            "loop2_distance",
            "endpoint_gap",
        ],
    );
    Outcome::new(
        failing == 0,
        format!(
            "{} runs, worst margin {worst:.3e}, {failing} failing",
            r.rows.len()
        ),
    )
}

fn scalar_functions() -> Outcome {
    let f_half = f_delta(0.5, 1.0).unwrap();
    let exact = f_half == PI;
    let n = 1_000;
    let f_ok = (1..=n).all(|k| {
        let d = 0.5 * k as f64 / n as f64;
        f_delta(d, 1.0).unwrap() <= 2.0 * PI * d
    });
    let mut a_ok = true;
    let mut monotone = true;
    for kappa1 in [0.5, 1.0, 2.0] {
        let mut prev = -1.0;
        for k in 0..n {
            let beta = (FRAC_PI_2 / kappa1) * k as f64 / n as f64;
            let a = a_theta(kappa1 * beta, kappa1).unwrap();
            a_ok &= beta <= a;
            monotone &= a > prev;
            prev = a;
        }
    }
    Outcome::new(
        exact && f_ok && a_ok && monotone,
        format!("f(1/2) - pi = {:e}, f <= 2 pi delta: {f_ok}, beta <= a: {a_ok}, a monotone: {monotone}", f_half - PI),
    )
}

fn boundary_point(rng: &mut impl Rng) -> BoundaryPoint {
    if rng.gen_bool(0.1) {
        BoundaryPoint::Infinity
    } else {
        BoundaryPoint::Finite(rng.gen_range(-5.0..5.0))
    }
}

fn point(rng: &mut impl Rng) -> PointUHP {
    PointUHP::new(
        rng.gen_range(-3.0..3.0),
        rng.gen_range(0.2f64.ln()..5f64.ln()).exp(),
    )
    .unwrap()
}

fn busemann_suite() -> Outcome {
    let kappa = CurvatureScale::new(1.0).unwrap();
    let mut residual = 0.0f64;
    for k in 0..1_000 {
        let mut rng = substream(9, k);
        let xi = boundary_point(&mut rng);
        let (p, q, r) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let cocycle =
            busemann(xi, q, p, kappa) - busemann(xi, q, r, kappa) - busemann(xi, r, p, kappa);
        let antisymmetry = busemann(xi, q, p, kappa) + busemann(xi, p, q, kappa);
        residual = residual.max(cocycle.abs()).max(antisymmetry.abs());
    }
    let mut ratio = 0.0f64;
    for k in 0..10_000 {
        let mut rng = substream(10, k);
        let xi = boundary_point(&mut rng);
        let eta = loop {
            let e = boundary_point(&mut rng);
            if e != xi {
                break e;
            }
        };
        let q1 = point(&mut rng);
        let step = rng.gen_range(1e-4..1e-2);
        let q2 = geodesic_flow(
            UnitTangent::new(q1, rng.gen_range(0.0..2.0 * PI)),
            step,
            kappa,
        )
        .base;
        let d = distance(q1, q2, kappa);
        let f1 = visibility_angle(q1, xi, eta, kappa).unwrap();
        let f2 = visibility_angle(q2, xi, eta, kappa).unwrap();
        ratio = ratio.max((f1 - f2).abs() / d);
    }
    let cocycle_ok = residual <= 1e-9;
    let lipschitz_ok = ratio <= 1.0 + 1e-6;
    Outcome::new(
        cocycle_ok && lipschitz_ok,
        format!(
            "cocycle/antisymmetry residual {residual:.2e} ({}), visibility Lipschitz ratio {ratio:.6} against kappa = 1 ({}; sharp constant is 2 kappa)",
            if cocycle_ok { "ok" } else { "violated" },
            if lipschitz_ok { "ok" } else { "violated" },
        ),
    )
}

fn cones() -> Outcome {
    let r = experiment(ExperimentKind::Cones, |c| {
        c.samples = 20;
        c.cone_samples = 1_000;
    });
    let (failing, worst) = tally(&r, &["witness", "forward_cone", "backward_cone"]);
    let t_min = r
        .rows
        .iter()
        .filter_map(|row| row.value("t"))
        .fold(f64::INFINITY, f64::min);
    Outcome::new(
        failing == 0 && t_min >= 5.0,
        format!(
            "20 elements, min t = {t_min:.3}, worst angle margin {worst:.3e}, {failing} failing"
        ),
    )
}

fn midpoint_chains(reports: &[&Report]) -> Outcome {
    let mut loops = 0;
    let mut failing = 0;
    let mut worst = f64::INFINITY;
    for r in reports {
        for row in &r.rows {
            for name in ["loop1_midpoint_chain", "loop2_midpoint_chain"] {
                let c = row.find_check(name).expect("chain check");
                loops += 1;
                failing += usize::from(!c.passed());
                worst = worst.min(c.margin.unwrap_or(f64::INFINITY));
            }
        }
    }
    Outcome::new(
        failing == 0,
        format!("{loops} loops, worst residual {worst:.3e}, {failing} failing"),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report =
        |id: usize, name: &str, (outcome, elapsed): (Outcome, Duration), limit: Duration| {
            let in_time = elapsed <= limit;
            let passed = outcome.passed && in_time;
            failures += usize::from(!passed);
            println!(
                "{} criterion {id:>2} {name}: {} [{:.2} s, limit {} s]",
                if passed { "PASS" } else { "FAIL" },
                outcome.detail,
                elapsed.as_secs_f64(),
                limit.as_secs()
            );
        };
    let secs = Duration::from_secs;

    report(
        1,
        "constant-curvature equalities",
        timed(equality_suite),
        secs(5),
    );
    report(
        2,
        "variable-curvature inequalities",
        timed(variable_suite),
        secs(180),
    );
    let (partner, t_partner) = timed(|| experiment(ExperimentKind::Partner, |_| {}));
    report(
        3,
        "partner orbit bounds",
        (partner_bound(&partner), t_partner),
        secs(10),
    );
    report(4, "partner scaling", timed(scaling), secs(10));
    report(5, "length bracket", timed(bracket), secs(2));
    report(6, "closing", timed(closing), secs(30));
    let (pseudo_runs, t_pseudo) = timed(|| experiment(ExperimentKind::Pseudo, |_| {}));
    report(
        7,
        "pseudo-partner bounds",
        (pseudo(&pseudo_runs), t_pseudo),
        secs(10),
    );
    report(8, "scalar functions", timed(scalar_functions), secs(1));
    report(
        9,
        "Busemann and visibility",
        timed(busemann_suite),
        secs(10),
    );
    report(10, "cone contraction", timed(cones), secs(30));
    report(
        11,
        "midpoint chains",
        timed(|| midpoint_chains(&[&partner, &pseudo_runs])),
        secs(10),
    );

    println!("{failures} of 11 criteria failed");
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
