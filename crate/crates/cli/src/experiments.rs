//! One runner per experiment kind. Every run is deterministic in the configured seed: sample
//! `k` draws from its own ChaCha8 stream, so results do not depend on thread scheduling.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use geoclose::bounds::{tprime_bounds, tprime_lower_taylor_coeff, BoundConstants};
use geoclose::comparison::{
    check_corollary_tri, check_perp_proj, check_triangle_laws, hinge_triangle, CheckSuite,
};
use geoclose::groups::{detect_crossings, enumerate_conjugacy, schottky_generators, GeneratorSet};
use geoclose::hyp2::{CurvatureScale, Isometry};
use geoclose::orbits::{
    check_cone_contraction, check_length_bracket, close_orbit, construct_partner,
    construct_pseudo_partner, crossed_loop_chains, gamma_theta_witness,
    synthesize_crossed_geodesic_oriented, synthesize_recurrent, CrossedGeodesic, CrossingMode,
    MidpointChain,
};
use geoclose::surface::{build_surface, CurvatureProfile, SamplingBox, TriangleKind};
use geoclose::tolerances::{
    ANGLE_TOL, CONSTANT_CURVATURE_EQUALITY, MIDPOINT_CHAIN_TOL, ODE_TOLERANCE, ORBIT_TOL,
    SLOPE_TOL, SUP_SAMPLING_STEP,
};
use geoclose::GeomError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::plot::{fit_loglog, Plot, Series, Style};
use crate::report::{Check, Report, ReportRow};
use crate::CliError;

/// Names reported by the triangle-law checker, in column order.
pub const TRIANGLE_LAWS: [&str; 9] = [
    "cosine_kappa1",
    "cosine_kappa2",
    "angle_bound_quadratic",
    "angle_bound",
    "sine_kappa1",
    "sine_kappa2",
    "cosh_bound",
    "sin_bound",
    "pythagoras_kappa1",
];

const NEAR_STRAIGHT_LAWS: [&str; 3] =
    ["distance_to_far_side", "far_side_length", "sin_small_angle"];
const PARTNER_CHECKS: [&str; 10] = [
    "strictly_shorter",
    "length",
    "distance",
    "split_distance",
    "t_prime_below_t_hat",
    "t_hat_below_t",
    "t_hat_deficit",
    "t_hat_gap",
    "surface_gap",
    "axis_to_third_side",
];
const FOOT_CHECKS: [&str; 3] = ["foot_shorter", "foot_length", "foot_shadow"];
const CONE_CHECKS: [&str; 8] = [
    "forward_cone",
    "backward_cone",
    "length_lower",
    "length_upper",
    "axis_distance",
    "foot_length_nonnegative",
    "foot_length",
    "foot_distance",
];

/// Side range of constant-curvature triangles.
const SIDE_RANGE: (f64, f64) = (0.1, 10.0);
/// Transition annulus of the variable-curvature surface.
const SURFACE_TRANSITION: (f64, f64) = (1.0, 2.0);
const OBTUSE_EPS: f64 = 0.5;
/// Fraction of the sides used as the radii `R₁`, `R₂` of the near-straight check.
const NEAR_STRAIGHT_RADIUS: f64 = 0.8;
const MAX_ATTEMPTS: usize = 1_000;

/// Independent stream `k` of the run seeded by `seed`.
pub fn substream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let constants = cfg.constants()?;
    let mut report = match cfg.kind {
        ExperimentKind::Triangles => triangles(cfg)?,
        ExperimentKind::SurfaceTriangles => surface_triangles(cfg)?,
        ExperimentKind::Partner => partner(cfg, &constants)?,
        ExperimentKind::PartnerScaling => partner_scaling(cfg, &constants)?,
        ExperimentKind::Pseudo => pseudo(cfg, &constants)?,
        ExperimentKind::Closing => closing(cfg, &constants)?,
        ExperimentKind::Cones => cones(cfg, &constants)?,
        ExperimentKind::Crossings => crossings(cfg, &constants)?,
        ExperimentKind::Constants => constants_table(cfg, &constants),
    };
    let mut meta = Report::new(cfg.kind);
    meta.meta("tool", concat!("geoclose ", env!("CARGO_PKG_VERSION")));
    meta.meta("kind", cfg.kind.name());
    meta.meta("seed", cfg.seed);
    meta.meta("samples", cfg.samples());
    meta.meta("tolerance", tolerance(cfg));
    meta.meta("sup_sampling_step", SUP_SAMPLING_STEP);
    meta.meta("richardson_step", SUP_SAMPLING_STEP / 2.0);
    let mut echoed = cfg.clone();
    echoed.out = None;
    echoed.plot = None;
    meta.meta(
        "config",
        serde_json::to_string(&echoed).map_err(|e| CliError::Config(e.to_string()))?,
    );
    for (name, value) in constants.table() {
        meta.meta(&format!("constant.{name}"), value);
    }
    meta.metadata.append(&mut report.metadata);
    report.metadata = meta.metadata;
    Ok(report)
}

/// Tolerance applied to the rows of an experiment.
pub fn tolerance(cfg: &ExperimentConfig) -> f64 {
    cfg.tolerance.unwrap_or(match cfg.kind {
        ExperimentKind::Triangles => CONSTANT_CURVATURE_EQUALITY,
        ExperimentKind::SurfaceTriangles => ODE_TOLERANCE,
        ExperimentKind::Cones => ANGLE_TOL,
        _ => ORBIT_TOL,
    })
}

fn kappa1(cfg: &ExperimentConfig) -> Result<CurvatureScale, CliError> {
    Ok(CurvatureScale::new(cfg.kappa1)?)
}

/// Worst margin of `name` in `suite`, or a skipped check when it saw no samples.
fn suite_check(suite: &CheckSuite, name: &str, tol: f64) -> Check {
    match suite.get(name) {
        Some(r) if r.samples > 0 => Check::margin(name, r.worst_margin, tol),
        _ => Check::skipped(name),
    }
}

fn chain_checks(row: ReportRow, chains: &[MidpointChain; 2]) -> ReportRow {
    chains.iter().enumerate().fold(row, |row, (k, c)| {
        row.num(&format!("loop{}_rho_mid", k + 1), c.rho_mid)
            .num(&format!("loop{}_closing_angle", k + 1), c.angle)
            .check(Check::margin(
                format!("loop{}_midpoint_chain", k + 1),
                c.margin,
                MIDPOINT_CHAIN_TOL,
            ))
    })
}

fn triangles(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let kappa = kappa1(cfg)?;
    let cb = cfg.bounds()?;
    let tol = tolerance(cfg);
    let (lo, hi) = SIDE_RANGE;
    let mut equalities = vec!["cosine_kappa1", "sine_kappa1", "pythagoras_kappa1"];
    if cfg.kappa1 == cfg.kappa2 {
        equalities.extend(["cosine_kappa2", "sine_kappa2"]);
    }
    let rows = (0..cfg.samples() as u64)
        .into_par_iter()
        .map(|k| -> Result<ReportRow, CliError> {
            let mut rng = substream(cfg.seed, k);
            let right = k % 4 == 0;
            let (t, attempts) = (1..=MAX_ATTEMPTS)
                .find_map(|attempt| {
                    let l1 = rng.gen_range(lo..hi);
                    let l2 = rng.gen_range(lo..hi);
                    let a3 = if right {
                        FRAC_PI_2
                    } else {
                        rng.gen_range(0.01..PI - 0.01)
                    };
                    let dir = rng.gen_range(0.0..TAU);
                    hinge_triangle(l1, l2, a3, dir, kappa)
                        .ok()
                        .filter(|(t, _)| (lo..=hi).contains(&t.l3))
                        .map(|(t, _)| (t, attempt))
                })
                .ok_or(GeomError::EmptyInput)?;
            let suite = check_triangle_laws(&t, cb, tol);
            let mut row = ReportRow::new(ExperimentKind::Triangles)
                .int("index", k as i64)
                .flag("right_angled", right)
                .num("l1", t.l1)
                .num("l2", t.l2)
                .num("l3", t.l3)
                .num("a1", t.a1)
                .num("a2", t.a2)
                .num("a3", t.a3)
                .int("attempts", attempts as i64);
            for name in TRIANGLE_LAWS {
                row = row.check(suite_check(&suite, name, tol));
            }
            // In the plane of curvature -κ₁² the κ₁ laws hold with equality.
            for name in &equalities {
                let check = match suite.get(name) {
                    Some(r) if r.samples > 0 => {
                        Check::upper(format!("{name}_equality"), r.max_abs_margin(), 0.0, tol)
                    }
                    _ => Check::skipped(format!("{name}_equality")),
                };
                row = row.check(check);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(ExperimentKind::Triangles);
    report.meta("side_range", format!("{lo}..{hi}"));
    report.rows = rows;
    Ok(report)
}

fn surface_triangles(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let tol = tolerance(cfg);
    let (r_lo, r_hi) = SURFACE_TRANSITION;
    let profile = CurvatureProfile::new(cfg.kappa1, cfg.kappa2, r_lo, r_hi)?;
    let step = 1e-3 * 1f64.min(1.0 / cfg.kappa2);
    let w = build_surface(profile, step)?;
    let cb = w.extracted_bounds()?;
    let region = SamplingBox::default();
    let rows = (0..cfg.samples() as u64)
        .into_par_iter()
        .map(|k| -> Result<ReportRow, CliError> {
            let mut rng = substream(cfg.seed, k);
            let kind = match k % 3 {
                0 => TriangleKind::General,
                1 => TriangleKind::Right,
                _ => TriangleKind::Obtuse { eps: OBTUSE_EPS },
            };
            let tri = w.sample_triangle_with(&mut rng, &region, kind)?;
            let t = &tri.sample;
            let mut suite = check_triangle_laws(t, cb, tol);
            if let TriangleKind::Obtuse { eps } = kind {
                let near = check_corollary_tri(
                    t,
                    &tri.vertices,
                    eps,
                    NEAR_STRAIGHT_RADIUS * t.l1,
                    NEAR_STRAIGHT_RADIUS * t.l2,
                    cb,
                    &w,
                    tol,
                )?;
                suite = suite.merge(near);
            }
            // Perpendicular offsets over the polar axis; pairs on opposite sides are redrawn.
            let mut perp = None;
            for _ in 0..MAX_ATTEMPTS {
                let (r1, r2) = (rng.gen_range(0.1..1.5), rng.gen_range(0.1..1.5));
                let (t1, t2) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                match check_perp_proj(r1, r2, t1, t2, cb.kappa2, &w, tol) {
                    Ok(s) => {
                        perp = Some(s);
                        break;
                    }
                    Err(GeomError::SideCrossing) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            if let Some(s) = perp {
                suite = suite.merge(s);
            }
            let kind_name = match kind {
                TriangleKind::General => "general",
                TriangleKind::Right => "right",
                TriangleKind::Obtuse { .. } => "near_straight",
            };
            let mut row = ReportRow::new(ExperimentKind::SurfaceTriangles)
                .int("index", k as i64)
                .text("triangle", kind_name)
                .num("l1", t.l1)
                .num("l2", t.l2)
                .num("l3", t.l3)
                .num("a1", t.a1)
                .num("a2", t.a2)
                .num("a3", t.a3);
            for name in TRIANGLE_LAWS
                .iter()
                .chain(&NEAR_STRAIGHT_LAWS)
                .chain(&["perpendicular_projection"])
            {
                row = row.check(suite_check(&suite, name, tol));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(ExperimentKind::SurfaceTriangles);
    report.meta("profile.r_lo", r_lo);
    report.meta("profile.r_hi", r_hi);
    report.meta("table_step", step);
    report.meta("extracted.kappa1", cb.kappa1);
    report.meta("extracted.kappa2", cb.kappa2);
    report.rows = rows;
    Ok(report)
}

fn orientation(cfg: &ExperimentConfig) -> f64 {
    if cfg.mirror {
        -1.0
    } else {
        1.0
    }
}

/// `(T₁, T₂, ε)` over the configured grids, in row order.
fn grid(cfg: &ExperimentConfig) -> Vec<(f64, f64, f64)> {
    let (t1s, t2s, epss) = (cfg.t1.values(), cfg.t2.values(), cfg.eps.values());
    t1s.iter()
        .flat_map(|&a| t2s.iter().map(move |&b| (a, b)))
        .flat_map(|(a, b)| epss.iter().map(move |&e| (a, b, e)))
        .collect()
}

fn partner_row(
    kind: ExperimentKind,
    cg: &CrossedGeodesic,
    constants: &BoundConstants,
    tol: f64,
) -> Result<ReportRow, CliError> {
    let r = construct_partner(cg, constants)?;
    let mut row = ReportRow::new(kind)
        .num("t1", cg.t1)
        .num("t2", cg.t2)
        .num("eps", cg.eps)
        .num("T", r.t)
        .num("T_hat", r.t_hat)
        .num("T_prime", r.t_prime)
        .num("T3", r.t3)
        .num("dist_sup", r.dist_sup)
        .num("dist_sup_fine", r.dist_sup_fine)
        .num("richardson_gap", (r.dist_sup - r.dist_sup_fine).abs())
        .num("split_sup", r.split_sup)
        .num("axis_to_third_side", r.axis_to_third_side)
        .num("composition_residual", cg.composition_residual())
        .flag("guaranteed_regime", r.guaranteed_regime);
    for name in PARTNER_CHECKS {
        row = row.check(
            r.checks
                .iter()
                .find(|c| c.name == name)
                .map_or_else(|| Check::skipped(name), |c| Check::from_bound(c, tol)),
        );
    }
    // Bracket for T − T̂ with b from the injectivity radius; skipped below the loop length bound.
    match tprime_bounds(cg.t1, cg.t2, cg.eps, constants.bounds(), constants.b_inj) {
        Ok((lower, upper)) => {
            let gap = r.t - r.t_hat;
            row = row
                .check(Check::upper("bracket_lower", lower, gap, tol))
                .check(Check::upper("bracket_upper", gap, upper, tol));
        }
        Err(GeomError::HypothesisViolated(_)) | Err(GeomError::DomainError(_)) => {
            row = row
                .check(Check::skipped("bracket_lower"))
                .check(Check::skipped("bracket_upper"));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(chain_checks(row, &crossed_loop_chains(cg)))
}

fn partner(cfg: &ExperimentConfig, constants: &BoundConstants) -> Result<Report, CliError> {
    let kappa = kappa1(cfg)?;
    let tol = tolerance(cfg);
    let rows = grid(cfg)
        .into_par_iter()
        .map(|(t1, t2, eps)| {
            let cg = synthesize_crossed_geodesic_oriented(
                t1,
                t2,
                eps,
                CrossingMode::Partner,
                kappa,
                orientation(cfg),
            )?;
            partner_row(ExperimentKind::Partner, &cg, constants, tol)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(ExperimentKind::Partner);
    report.rows = rows;
    Ok(report)
}

fn partner_scaling(cfg: &ExperimentConfig, constants: &BoundConstants) -> Result<Report, CliError> {
    let kappa = kappa1(cfg)?;
    let tol = tolerance(cfg);
    let (t1, t2) = (cfg.t1.min, cfg.t2.min);
    let runs = cfg
        .eps
        .values()
        .into_par_iter()
        .map(|eps| -> Result<_, CliError> {
            let cg = synthesize_crossed_geodesic_oriented(
                t1,
                t2,
                eps,
                CrossingMode::Partner,
                kappa,
                orientation(cfg),
            )?;
            let r = construct_partner(&cg, constants)?;
            Ok((eps, r, crossed_loop_chains(&cg)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    // Configured b: displacement at the loop midpoints, 2(cosh κ₂ρ − 1).
    let rho = runs
        .iter()
        .flat_map(|(_, _, chains)| chains.iter().map(|c| c.rho_mid))
        .fold(f64::INFINITY, f64::min);
    let b = cfg.b.unwrap_or(2.0 * ((cfg.kappa2 * rho).cosh() - 1.0));
    let c_lower = tprime_lower_taylor_coeff(constants.bounds(), b);
    let mut report = Report::new(ExperimentKind::PartnerScaling);
    report.meta("b", b);
    report.meta("rho_mid_min", rho);
    report.meta("taylor_lower_coeff", c_lower);
    for (eps, r, chains) in &runs {
        let gap = r.t - r.t_prime;
        let row = ReportRow::new(ExperimentKind::PartnerScaling)
            .num("t1", t1)
            .num("t2", t2)
            .num("eps", *eps)
            .num("T", r.t)
            .num("T_prime", r.t_prime)
            .num("gap", gap)
            .num("ratio", gap / (eps * eps))
            .check(Check::upper("taylor_lower", c_lower * eps * eps, gap, tol))
            .check(Check::from_bound(
                r.checks
                    .iter()
                    .find(|c| c.name == "length")
                    .ok_or(GeomError::EmptyInput)?,
                tol,
            ));
        report.rows.push(chain_checks(row, chains));
    }
    let points: Vec<(f64, f64)> = runs.iter().map(|(e, r, _)| (*e, r.t - r.t_prime)).collect();
    if let Some((slope, intercept)) = fit_loglog(&points) {
        report.note("slope", slope);
        report.note("intercept", intercept);
        report
            .summary
            .push(Check::upper("slope_high", slope, 2.0 + SLOPE_TOL, 0.0));
        report
            .summary
            .push(Check::upper("slope_low", 2.0 - SLOPE_TOL, slope, 0.0));
    }
    let ratios: Vec<f64> = points.iter().map(|(e, g)| g / (e * e)).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| {
            (a.min(r), b.max(r))
        });
    report.note("ratio_mean", mean);
    report.note("ratio_min", rmin);
    report.note("ratio_max", rmax);
    report.note("taylor_lower_coeff", c_lower);
    report
        .summary
        .push(Check::upper("ratio_max", rmax, 1.1 * mean, 0.0));
    report
        .summary
        .push(Check::upper("ratio_min", 0.9 * mean, rmin, 0.0));
    report
        .summary
        .push(Check::upper("ratio_positive", 0.0, rmin, 0.0));

    let c =
        (points.iter().map(|(e, g)| (g / (e * e)).ln()).sum::<f64>() / points.len() as f64).exp();
    report.plot = Some(Plot {
        title: format!("T - T' against eps (T1 = {t1}, T2 = {t2})"),
        x_label: "eps".into(),
        y_label: "T - T'".into(),
        series: vec![
            Series {
                label: "measured".into(),
                color: "black",
                style: Style::Markers,
                points: points.clone(),
            },
            Series {
                label: format!("{c:.4} eps^2"),
                color: "red",
                style: Style::Line,
                points: points.iter().map(|(e, _)| (*e, c * e * e)).collect(),
            },
        ],
    });
    Ok(report)
}

fn pseudo(cfg: &ExperimentConfig, constants: &BoundConstants) -> Result<Report, CliError> {
    let kappa = kappa1(cfg)?;
    let tol = tolerance(cfg);
    let rows = grid(cfg)
        .into_par_iter()
        .map(|(t1, t2, eps)| -> Result<ReportRow, CliError> {
            let cg = synthesize_crossed_geodesic_oriented(
                t1,
                t2,
                eps,
                CrossingMode::Pseudo,
                kappa,
                orientation(cfg),
            )?;
            let r = construct_pseudo_partner(&cg, constants)?;
            let mut row = ReportRow::new(ExperimentKind::Pseudo)
                .num("t1", t1)
                .num("t2", t2)
                .num("eps", eps)
                .num("T_hat1", r.that1)
                .num("T_hat2", r.that2)
                .num("dist_sup1", r.dist_sups[0])
                .num("dist_sup2", r.dist_sups[1])
                .num("endpoint_gap", r.endpoint_gap)
                .flag("guaranteed_regime", r.guaranteed_regime);
            for c in &r.checks {
                row = row.check(Check::from_bound(c, tol));
            }
            Ok(chain_checks(row, &crossed_loop_chains(&cg)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(ExperimentKind::Pseudo);
    report.rows = rows;
    Ok(report)
}

/// One admissible recurrence sample of the closing experiment.
struct ClosingSample {
    length: f64,
    offset: f64,
    tilt: f64,
    jitter: f64,
    attempts: usize,
    w: geoclose::hyp2::UnitTangent,
    t: f64,
    g: Isometry,
}

fn closing_sample(
    rng: &mut ChaCha8Rng,
    foot: bool,
    kappa: CurvatureScale,
    delta0: f64,
) -> Result<ClosingSample, CliError> {
    let k = kappa.get();
    for attempts in 1..=MAX_ATTEMPTS {
        let length = rng.gen_range(6.0..15.0);
        let h = Isometry::rotation_about_i(rng.gen_range(0.0..TAU)).compose(
            &Isometry::translation_imaginary_axis(k * rng.gen_range(-1.0..1.0)),
        );
        let g = Isometry::translation_imaginary_axis(k * length).conjugate_by(&h);
        let offset = rng.gen_range(0.0..0.02);
        let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        // Tilt magnitudes are log-uniform: a tilt is amplified by about e^{κT} along the orbit.
        let (tilt, jitter) = if foot {
            (0.0, 0.0)
        } else {
            let tilt = sign(rng) * 10f64.powf(rng.gen_range(-9.0..-2.0));
            (tilt, rng.gen_range(-0.005..0.005))
        };
        match synthesize_recurrent(&g, offset, tilt, jitter, kappa, delta0) {
            Ok(r) => {
                return Ok(ClosingSample {
                    length,
                    offset,
                    tilt,
                    jitter,
                    attempts,
                    w: r.w,
                    t: r.t,
                    g,
                })
            }
            Err(GeomError::DeltaTooLarge { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(CliError::Geom(GeomError::EmptyInput))
}

fn closing(cfg: &ExperimentConfig, constants: &BoundConstants) -> Result<Report, CliError> {
    let kappa = kappa1(cfg)?;
    let tol = tolerance(cfg);
    let runs = (0..cfg.samples() as u64)
        .into_par_iter()
        .map(|k| -> Result<_, CliError> {
            let mut rng = substream(cfg.seed, k);
            let s = closing_sample(&mut rng, k % 4 == 0, kappa, constants.delta0)?;
            let r = close_orbit(s.w, s.t, &s.g, constants, kappa)?;
            Ok((k, s, r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(ExperimentKind::Closing);
    for (k, s, r) in &runs {
        let mut row = ReportRow::new(ExperimentKind::Closing)
            .int("index", *k as i64)
            .num("axis_length", s.length)
            .num("offset", s.offset)
            .num("tilt", s.tilt)
            .num("jitter", s.jitter)
            .int("attempts", s.attempts as i64)
            .num("delta", r.delta)
            .num("T", r.t)
            .num("T_prime", r.t_prime)
            .num("shadow_sup", r.shadow_sup)
            .flag("foot_point", r.passed.foot_point);
        for name in ["length", "shadow"].iter().chain(&FOOT_CHECKS) {
            row = row.check(
                r.checks
                    .iter()
                    .find(|c| c.name == *name)
                    .map_or_else(|| Check::skipped(*name), |c| Check::from_bound(c, tol)),
            );
        }
        report.rows.push(row);
    }
    let mut deltas: Vec<f64> = runs.iter().map(|(_, _, r)| r.delta).collect();
    deltas.sort_by(f64::total_cmp);
    let line = |coeff: f64| -> Vec<(f64, f64)> {
        [deltas.first(), deltas.last()]
            .into_iter()
            .flatten()
            .map(|&d| (d, coeff * d))
            .collect()
    };
    let cm = constants.c_main;
    report.plot = Some(Plot {
        title: "closing: measured against bounds".into(),
        x_label: "delta".into(),
        y_label: "distance".into(),
        series: vec![
            Series {
                label: "|T - T'|".into(),
                color: "black",
                style: Style::Markers,
                points: runs
                    .iter()
                    .map(|(_, _, r)| (r.delta, (r.t - r.t_prime).abs()))
                    .collect(),
            },
            Series {
                label: "shadow sup".into(),
                color: "blue",
                style: Style::Markers,
                points: runs
                    .iter()
                    .map(|(_, _, r)| (r.delta, r.shadow_sup))
                    .collect(),
            },
            Series {
                label: "2 C delta".into(),
                color: "gray",
                style: Style::Line,
                points: line(2.0 * cm),
            },
            Series {
                label: "(5C + 1) delta".into(),
                color: "red",
                style: Style::Line,
                points: line(5.0 * cm + 1.0),
            },
        ],
    });
    Ok(report)
}

fn cones(cfg: &ExperimentConfig, constants: &BoundConstants) -> Result<Report, CliError> {
    let kappa = kappa1(cfg)?;
    let tol = tolerance(cfg);
    let eps_max = constants.theta0 / 2.0;
    let rows = (0..cfg.samples() as u64)
        .into_par_iter()
        .map(|k| -> Result<ReportRow, CliError> {
            let mut rng = substream(cfg.seed, k);
            let t1 = rng.gen_range(cfg.t0 + 1.0..cfg.t0 + 7.0);
            let t2 = rng.gen_range(cfg.t0 + 1.0..cfg.t0 + 7.0);
            let eps = rng.gen_range(1e-3..eps_max);
            let theta = 2.0 * eps;
            let cg = synthesize_crossed_geodesic_oriented(
                t1,
                t2,
                eps,
                CrossingMode::Partner,
                kappa,
                1.0,
            )?;
            let r = construct_partner(&cg, constants)?;
            let g = cg.g2.inverse().compose(&cg.g1);
            let row = ReportRow::new(ExperimentKind::Cones)
                .int("index", k as i64)
                .num("t1", t1)
                .num("t2", t2)
                .num("eps", eps)
                .num("theta", theta)
                .num("rho", constants.rho(theta))
                .num("t", r.t_hat)
                .num("T_prime", r.t_prime);
            let Some(v) = gamma_theta_witness(&g, cg.v0, theta, r.t_hat, kappa) else {
                let row = row.check(Check::margin("witness", -1.0, 0.0));
                return Ok(CONE_CHECKS
                    .iter()
                    .fold(row, |row, name| row.check(Check::skipped(*name))));
            };
            let suite = check_cone_contraction(
                &g,
                cg.v0,
                theta,
                r.t_hat,
                cfg.cone_samples,
                constants,
                kappa,
            )?
            .merge(check_length_bracket(
                &g, v, cg.v0, theta, r.t_hat, constants, kappa,
            )?);
            let row = row.check(Check::margin("witness", 0.0, 0.0));
            Ok(CONE_CHECKS
                .iter()
                .fold(row, |row, name| row.check(suite_check(&suite, name, tol))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(ExperimentKind::Cones);
    report.rows = rows;
    Ok(report)
}

/// Generator set of the crossings experiment: the JSON file if given, else the Schottky preset.
pub fn generator_set(cfg: &ExperimentConfig) -> Result<GeneratorSet, CliError> {
    let kappa = kappa1(cfg)?;
    match &cfg.schottky.generators {
        Some(path) => GeneratorSet::load(path).map_err(|e| match e {
            GeomError::DomainError(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            e => e.into(),
        }),
        None => Ok(schottky_generators(
            cfg.schottky.layout,
            cfg.schottky.separation,
            cfg.schottky.strength,
            kappa,
            false,
        )?),
    }
}

fn crossings(cfg: &ExperimentConfig, constants: &BoundConstants) -> Result<Report, CliError> {
    let kappa = kappa1(cfg)?;
    let tol = tolerance(cfg);
    let gs = generator_set(cfg)?;
    let classes = enumerate_conjugacy(&gs, cfg.word_length, kappa)?;
    let per_class = classes
        .par_iter()
        .map(|class| -> Result<Vec<ReportRow>, CliError> {
            let found = detect_crossings(&class.word, &gs, cfg.cut, kappa)?;
            found
                .iter()
                .map(|c| {
                    let admissible = c.eps <= constants.eps0 && c.t1 >= cfg.t0 && c.t2 >= cfg.t0;
                    let mut row = ReportRow::new(ExperimentKind::Crossings)
                        .text("word", class.word.to_string())
                        .int("word_length", class.word.len() as i64)
                        .num("T", class.length)
                        .num("s", c.s)
                        .num("t1", c.t1)
                        .num("t2", c.t2)
                        .num("angle", c.angle)
                        .num("eps", c.eps)
                        .text("eta", c.eta.to_string())
                        .flag("admissible", admissible);
                    if admissible {
                        let r = construct_partner(&c.to_crossed_geodesic(kappa), constants)?;
                        row = row.num("T_prime", r.t_prime);
                        for name in PARTNER_CHECKS {
                            row = row.check(r.checks.iter().find(|b| b.name == name).map_or_else(
                                || Check::skipped(name),
                                |b| Check::from_bound(b, tol),
                            ));
                        }
                    } else {
                        row = row.num("T_prime", f64::NAN);
                        for name in PARTNER_CHECKS {
                            row = row.check(Check::skipped(name));
                        }
                    }
                    Ok(row)
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(ExperimentKind::Crossings);
    report.meta("generators", gs.len());
    report.meta("discrete_certified", gs.is_certified());
    report.meta("classes", classes.len());
    report.meta("word_length", cfg.word_length);
    report.meta("cut", cfg.cut);
    report.rows = per_class.into_iter().flatten().collect();
    let admissible = report
        .rows
        .iter()
        .filter(|r| r.find_check("length").is_some_and(|c| c.margin.is_some()))
        .count();
    report.note("classes", classes.len());
    report.note("crossings", report.rows.len());
    report.note("admissible", admissible);
    if !gs.is_certified() {
        report.note("warning", "generator set not certified discrete");
    }
    Ok(report)
}

fn constants_table(cfg: &ExperimentConfig, constants: &BoundConstants) -> Report {
    let mut report = Report::new(cfg.kind);
    report.rows = constants
        .table()
        .into_iter()
        .map(|(name, value)| {
            ReportRow::new(ExperimentKind::Constants)
                .text("name", name)
                .num("value", value)
        })
        .collect();
    report
}
