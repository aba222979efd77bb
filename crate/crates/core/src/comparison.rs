//! Checkers for the comparison inequalities of pinched negative curvature.
//!
//! Every checker records signed relative margins (`margin >= 0` means the
//! inequality holds) into named [`CheckReport`]s, so equality cases show up
//! as margins near zero and violations as margins below `-tolerance`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{a_theta, f_delta, CurvatureBounds};
use crate::error::{GeomError, Result};
use crate::hyp2::{
    self, angle_between, d1_metric, direction_toward, endpoints, geodesic_flow, CurvatureScale,
    GeodesicSegment, PointUHP, UnitTangent,
};
use crate::tolerances::RIGHT_ANGLE_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TriangleSource {
    Constant { kappa: f64 },
    Variable { kappa1: f64, kappa2: f64 },
}

/// Side `li` is opposite the vertex with angle `ai`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleSample {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub source: TriangleSource,
}

impl TriangleSample {
    pub fn new(sides: [f64; 3], angles: [f64; 3], source: TriangleSource) -> Result<Self> {
        let [l1, l2, l3] = sides;
        let [a1, a2, a3] = angles;
        if sides.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(GeomError::InvalidTriangle(format!(
                "nonpositive side in {sides:?}"
            )));
        }
        // The third side may equal the sum of the others for a straight angle.
        let slack = 1e-9 * (l1 + l2 + l3);
        if l1 > l2 + l3 + slack || l2 > l1 + l3 + slack || l3 > l1 + l2 + slack {
            return Err(GeomError::InvalidTriangle(format!(
                "triangle inequality fails for {sides:?}"
            )));
        }
        if angles.iter().any(|&a| !(0.0..=PI).contains(&a)) {
            return Err(GeomError::InvalidTriangle(format!(
                "angle out of [0, pi] in {angles:?}"
            )));
        }
        if a1 + a2 + a3 > PI + 1e-9 {
            return Err(GeomError::InvalidTriangle(format!(
                "angle sum exceeds pi in {angles:?}"
            )));
        }
        Ok(Self {
            l1,
            l2,
            l3,
            a1,
            a2,
            a3,
            source,
        })
    }

    pub fn is_right_angled(&self) -> bool {
        (self.a3 - FRAC_PI_2).abs() <= RIGHT_ANGLE_TOL
    }

    pub fn angle_sum(&self) -> f64 {
        self.a1 + self.a2 + self.a3
    }
}

/// Outcome of one named inequality over a batch of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// Smallest margin seen; `+inf` when no sample was recorded.
    pub worst_margin: f64,
    /// Largest margin seen; `-inf` when no sample was recorded.
    pub max_margin: f64,
    pub tolerance: f64,
    /// Samples whose hypothesis did not apply.
    pub skipped: usize,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            samples: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            max_margin: f64::NEG_INFINITY,
            tolerance,
            skipped: 0,
        }
    }

    pub fn record(&mut self, margin: f64) {
        self.samples += 1;
        if !(margin >= -self.tolerance) {
            self.violations += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
        self.max_margin = self.max_margin.max(margin);
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn merge(&mut self, other: &CheckReport) {
        self.samples += other.samples;
        self.violations += other.violations;
        self.skipped += other.skipped;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        self.max_margin = self.max_margin.max(other.max_margin);
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Largest deviation from equality, for relations that are identities in constant curvature.
    pub fn max_abs_margin(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.worst_margin.abs().max(self.max_margin.abs())
        }
    }
}

/// Named reports in first-recorded order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSuite {
    pub reports: Vec<CheckReport>,
}

impl CheckSuite {
    pub fn entry(&mut self, name: &str, tolerance: f64) -> &mut CheckReport {
        let idx = match self.reports.iter().position(|r| r.name == name) {
            Some(i) => i,
            None => {
                self.reports.push(CheckReport::new(name, tolerance));
                self.reports.len() - 1
            }
        };
        &mut self.reports[idx]
    }

    pub fn record(&mut self, name: &str, tolerance: f64, margin: f64) {
        self.entry(name, tolerance).record(margin);
    }

    pub fn skip(&mut self, name: &str, tolerance: f64) {
        self.entry(name, tolerance).skip();
    }

    pub fn merge(mut self, other: CheckSuite) -> CheckSuite {
        for r in &other.reports {
            self.entry(&r.name, r.tolerance).merge(r);
        }
        self
    }

    pub fn get(&self, name: &str) -> Option<&CheckReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(CheckReport::passed)
    }

    pub fn total_violations(&self) -> usize {
        self.reports.iter().map(|r| r.violations).sum()
    }
}

/// Relative margin of `lhs <= rhs`.
pub fn leq_margin(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    (rhs - lhs) / scale
}

fn sinh_half_sq(x: f64) -> f64 {
    let s = (x / 2.0).sinh();
    s * s
}

/// `(cosh(κℓ₃) − 1)/2` for the hinge `(ℓ₁, ℓ₂, α₃)` in curvature `-κ²`, without cancellation.
fn hinge_cosh_excess(l1: f64, l2: f64, a3: f64, kappa: f64) -> f64 {
    let s = (a3 / 2.0).sin();
    sinh_half_sq(kappa * (l1 - l2)) + (kappa * l1).sinh() * (kappa * l2).sinh() * s * s
}

/// Third side of the constant-curvature hinge `(l1, l2, a3)`.
pub fn solve_side_constant(l1: f64, l2: f64, a3: f64, kappa: f64) -> Result<f64> {
    if !(l1 > 0.0 && l2 > 0.0 && kappa > 0.0 && (0.0..=PI).contains(&a3)) {
        return Err(GeomError::DomainError(format!(
            "invalid hinge ({l1}, {l2}, {a3}) at kappa {kappa}"
        )));
    }
    Ok(2.0 * hinge_cosh_excess(l1, l2, a3, kappa).sqrt().asinh() / kappa)
}

/// Evaluates the cosine laws, sine laws and the angle, cosh and sine bounds.
///
/// Right-angle-only relations are recorded as skipped when `a3` is not a right angle.
pub fn check_triangle_laws(t: &TriangleSample, cb: CurvatureBounds, tolerance: f64) -> CheckSuite {
    let mut suite = CheckSuite::default();
    let (k1, k2) = (cb.kappa1, cb.kappa2);
    let excess = |k: f64| sinh_half_sq(k * t.l3);

    suite.record(
        "cosine_kappa1",
        tolerance,
        leq_margin(hinge_cosh_excess(t.l1, t.l2, t.a3, k1), excess(k1)),
    );
    suite.record(
        "cosine_kappa2",
        tolerance,
        leq_margin(excess(k2), hinge_cosh_excess(t.l1, t.l2, t.a3, k2)),
    );

    let half = (t.a3 / 2.0).sin();
    let two_sin_sq = 2.0 * half * half;
    suite.record(
        "angle_bound_quadratic",
        tolerance,
        leq_margin(2.0 * t.a3 * t.a3 / (PI * PI), two_sin_sq),
    );
    let ratio = 2.0 * excess(k1) / ((k1 * t.l1).sinh() * (k1 * t.l2).sinh());
    suite.record("angle_bound", tolerance, leq_margin(two_sin_sq, ratio));

    const RIGHT_ONLY: [&str; 5] = [
        "sine_kappa1",
        "sine_kappa2",
        "cosh_bound",
        "sin_bound",
        "pythagoras_kappa1",
    ];
    if !t.is_right_angled() {
        for name in RIGHT_ONLY {
            suite.skip(name, tolerance);
        }
        return suite;
    }
    for (li, ai) in [(t.l1, t.a1), (t.l2, t.a2)] {
        suite.record(
            "sine_kappa1",
            tolerance,
            leq_margin(ai.sin(), (k1 * li).sinh() / (k1 * t.l3).sinh()),
        );
        suite.record(
            "sine_kappa2",
            tolerance,
            leq_margin((k2 * li).sinh() / (k2 * t.l3).sinh(), ai.sin()),
        );
    }
    for (li, aj) in [(t.l1, t.a2), (t.l2, t.a1)] {
        suite.record(
            "cosh_bound",
            tolerance,
            leq_margin((k1 * li).cosh(), 1.0 / aj.sin()),
        );
    }
    for (ai, aj) in [(t.a1, t.a2), (t.a2, t.a1)] {
        let rhs = 1.0 / aj.tan() / (k1 * t.l3).sinh();
        suite.record("sin_bound", tolerance, leq_margin(ai.sin(), rhs));
    }
    // Pythagoras in the lower comparison plane, cosh ℓ₃ ≥ cosh ℓ₁ cosh ℓ₂.
    let pyth = hinge_cosh_excess(t.l1, t.l2, FRAC_PI_2, k1);
    suite.record("pythagoras_kappa1", tolerance, leq_margin(pyth, excess(k1)));
    suite
}

/// Geometry that the vertex-level checkers need: distances, points on
/// segments, and a reference geodesic with perpendicular offsets.
pub trait ComparisonGeometry: Sync {
    type Point: Copy + Send + Sync;

    fn distance(&self, p: Self::Point, q: Self::Point) -> Result<f64>;

    /// Point at fraction `frac` of the way from `p` to `q` along the connecting geodesic.
    fn point_along(&self, p: Self::Point, q: Self::Point, frac: f64) -> Result<Self::Point>;

    /// Distance from `x` to the geodesic segment `[p, q]`.
    fn distance_to_segment(&self, x: Self::Point, p: Self::Point, q: Self::Point) -> Result<f64>;

    /// Points at perpendicular distances `r1`, `r2` over foot parameters `t1`, `t2` of a fixed
    /// reference geodesic, on one side of it.
    fn perpendicular_pair(
        &self,
        r1: f64,
        t1: f64,
        r2: f64,
        t2: f64,
    ) -> Result<(Self::Point, Self::Point)>;

    /// Whether the geodesic segment `[p, q]` meets the reference geodesic.
    fn crosses_reference(&self, p: Self::Point, q: Self::Point) -> Result<bool>;
}

/// The constant-curvature plane; the reference geodesic is the imaginary axis.
#[derive(Debug, Clone, Copy)]
pub struct HyperbolicPlane {
    pub kappa: CurvatureScale,
}

impl ComparisonGeometry for HyperbolicPlane {
    type Point = PointUHP;

    fn distance(&self, p: PointUHP, q: PointUHP) -> Result<f64> {
        Ok(hyp2::distance(p, q, self.kappa))
    }

    fn point_along(&self, p: PointUHP, q: PointUHP, frac: f64) -> Result<PointUHP> {
        if p == q {
            return Ok(p);
        }
        let seg = GeodesicSegment::between(p, q, self.kappa)?;
        Ok(seg.line.point_at(frac * seg.t_end, self.kappa))
    }

    fn distance_to_segment(&self, x: PointUHP, p: PointUHP, q: PointUHP) -> Result<f64> {
        if p == q {
            return Ok(hyp2::distance(x, p, self.kappa));
        }
        Ok(hyp2::distance_to_segment(
            x,
            &GeodesicSegment::between(p, q, self.kappa)?,
            self.kappa,
        ))
    }

    fn perpendicular_pair(
        &self,
        r1: f64,
        t1: f64,
        r2: f64,
        t2: f64,
    ) -> Result<(PointUHP, PointUHP)> {
        let offset = |r: f64, t: f64| {
            let foot = geodesic_flow(UnitTangent::i_up(), t, self.kappa);
            geodesic_flow(foot.rotated(-FRAC_PI_2), r, self.kappa).base
        };
        Ok((offset(r1, t1), offset(r2, t2)))
    }

    fn crosses_reference(&self, p: PointUHP, q: PointUHP) -> Result<bool> {
        // Half-planes bounded by a geodesic are convex.
        Ok(p.x * q.x < 0.0)
    }
}

#[allow(clippy::too_many_arguments)]
/// Checks the conclusions for a triangle with a nearly straight angle `a3 ∈ [π − ε, π]`.
///
/// `vertices[i]` is the vertex carrying angle `a(i+1)`.
pub fn check_corollary_tri<G: ComparisonGeometry>(
    t: &TriangleSample,
    vertices: &[G::Point; 3],
    eps: f64,
    r1: f64,
    r2: f64,
    cb: CurvatureBounds,
    geometry: &G,
    tolerance: f64,
) -> Result<CheckSuite> {
    if !(eps > 0.0 && eps < FRAC_PI_2) {
        return Err(GeomError::HypothesisViolated(format!(
            "eps = {eps} outside (0, pi/2)"
        )));
    }
    if t.a3 < PI - eps - 1e-9 {
        return Err(GeomError::HypothesisViolated(format!(
            "angle {} below pi - eps",
            t.a3
        )));
    }
    if t.l1 < r1 || t.l2 < r2 {
        return Err(GeomError::HypothesisViolated(format!(
            "sides ({}, {}) shorter than R",
            t.l1, t.l2
        )));
    }
    let [p1, p2, p3] = *vertices;
    let a_half = a_theta(eps / 2.0, cb.kappa1)?;
    let mut suite = CheckSuite::default();

    let mut probes = vec![p3];
    for frac in [0.25, 0.5] {
        probes.push(geometry.point_along(p3, p2, frac)?);
        probes.push(geometry.point_along(p3, p1, frac)?);
    }
    for q in probes {
        let d = geometry.distance_to_segment(q, p1, p2)?;
        suite.record("distance_to_far_side", tolerance, leq_margin(d, a_half));
    }
    suite.record(
        "far_side_length",
        tolerance,
        leq_margin(r1 + r2 - 2.0 * a_half, t.l3),
    );
    let k1 = cb.kappa1;
    suite.record(
        "sin_small_angle",
        tolerance,
        leq_margin(t.a1.sin(), eps.tan() / (k1 * r2).sinh()),
    );
    suite.record(
        "sin_small_angle",
        tolerance,
        leq_margin(t.a2.sin(), eps.tan() / (k1 * r1).sinh()),
    );
    Ok(suite)
}

/// Compares the distance between two points over a geodesic with the perpendicular-projection bound.
pub fn check_perp_proj<G: ComparisonGeometry>(
    r1: f64,
    r2: f64,
    t1: f64,
    t2: f64,
    kappa2: f64,
    geometry: &G,
    tolerance: f64,
) -> Result<CheckSuite> {
    let (x1, x2) = geometry.perpendicular_pair(r1, t1, r2, t2)?;
    if geometry.crosses_reference(x1, x2)? {
        return Err(GeomError::SideCrossing);
    }
    let d = geometry.distance(x1, x2)?;
    let lhs = sinh_half_sq(kappa2 * d);
    let rhs = (kappa2 * r1).cosh() * (kappa2 * r2).cosh() * sinh_half_sq(kappa2 * (t2 - t1).abs())
        + sinh_half_sq(kappa2 * (r2 - r1).abs());
    let mut suite = CheckSuite::default();
    // Both sides vanish when x1 = x2; the margin is then taken as exact.
    let margin = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        leq_margin(lhs, rhs)
    };
    suite.record("perpendicular_projection", tolerance, margin);
    Ok(suite)
}

/// Angles at `π w` between the forward and between the backward endpoints of `c_v` and `c_w`.
pub fn check_angles_at_infinity(
    v: UnitTangent,
    w: UnitTangent,
    delta: f64,
    cb: CurvatureBounds,
    tolerance: f64,
) -> Result<CheckSuite> {
    let kappa = CurvatureScale::new(cb.kappa1)?;
    let d1 = d1_metric(v, w, kappa);
    if d1 > delta * (1.0 + 1e-12) {
        return Err(GeomError::HypothesisViolated(format!(
            "d1(v, w) = {d1} exceeds delta = {delta}"
        )));
    }
    let bound = f_delta(delta, cb.kappa1)?;
    let p = w.base;
    let (vm, vp) = endpoints(v);
    let (wm, wp) = endpoints(w);
    let mut suite = CheckSuite::default();
    for (name, a, b) in [("angle_forward", vp, wp), ("angle_backward", vm, wm)] {
        let angle = angle_between(
            hyp2::direction_to_boundary(p, a),
            hyp2::direction_to_boundary(p, b),
        );
        suite.record(name, tolerance, leq_margin(angle, bound));
        suite.record(
            "relaxed_2pi_delta",
            tolerance,
            leq_margin(angle, 2.0 * PI * delta),
        );
    }
    Ok(suite)
}

/// Triangle with vertices `p1, p2, p3` in the constant-curvature plane.
pub fn triangle_from_vertices(
    vertices: [PointUHP; 3],
    kappa: CurvatureScale,
) -> Result<TriangleSample> {
    let [p1, p2, p3] = vertices;
    let angle_at = |p: PointUHP, q: PointUHP, r: PointUHP| -> Result<f64> {
        Ok(angle_between(
            direction_toward(p, q)?,
            direction_toward(p, r)?,
        ))
    };
    let d = |p, q| hyp2::distance(p, q, kappa);
    TriangleSample::new(
        [d(p2, p3), d(p1, p3), d(p1, p2)],
        [
            angle_at(p1, p2, p3)?,
            angle_at(p2, p1, p3)?,
            angle_at(p3, p1, p2)?,
        ],
        TriangleSource::Constant { kappa: kappa.get() },
    )
}

/// Builds the hinge at `p3 = i`: side `l1` toward `p2` along `direction`, side `l2` toward `p1`
/// at angle `a3` counterclockwise from it. Returns the measured triangle and `[p1, p2, p3]`.
pub fn hinge_triangle(
    l1: f64,
    l2: f64,
    a3: f64,
    direction: f64,
    kappa: CurvatureScale,
) -> Result<(TriangleSample, [PointUHP; 3])> {
    let p3 = PointUHP::i();
    let p2 = geodesic_flow(UnitTangent::new(p3, direction), l1, kappa).base;
    let p1 = geodesic_flow(UnitTangent::new(p3, direction + a3), l2, kappa).base;
    let mut t = triangle_from_vertices([p1, p2, p3], kappa)?;
    // The hinge angle is known exactly; measured sides and the other angles are kept.
    t.a3 = a3;
    Ok((t, [p1, p2, p3]))
}

/// Runs [`check_triangle_laws`] over a batch in parallel and merges the reports.
pub fn check_triangle_batch(
    samples: &[TriangleSample],
    cb: CurvatureBounds,
    tolerance: f64,
) -> CheckSuite {
    samples
        .par_iter()
        .map(|t| check_triangle_laws(t, cb, tolerance))
        .reduce(CheckSuite::default, CheckSuite::merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::CONSTANT_CURVATURE_EQUALITY;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    const K1: CurvatureScale = CurvatureScale::UNIT;

    fn unit() -> CurvatureBounds {
        CurvatureBounds::constant(1.0).unwrap()
    }

    #[test]
    fn solve_side_examples() {
        let v = solve_side_constant(1.0, 1.0, FRAC_PI_2, 1.0).unwrap();
        assert!((v - (1f64.cosh().powi(2)).acosh()).abs() < 1e-14);
        assert!((v - 1.513374006596504).abs() < 1e-12);
        assert!((solve_side_constant(2.0, 2.0, PI, 1.3).unwrap() - 4.0).abs() < 1e-14);
        assert!(solve_side_constant(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn solve_side_matches_constructed_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (l1, l2, a3) = (
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.01..3.1),
            );
            let k = CurvatureScale::new(rng.gen_range(0.5..2.0)).unwrap();
            let (t, _) = hinge_triangle(l1, l2, a3, rng.gen_range(0.0..TAU), k).unwrap();
            let s = solve_side_constant(l1, l2, a3, k.get()).unwrap();
            assert!((t.l3 - s).abs() <= 1e-10 * (1.0 + s), "{} vs {s}", t.l3);
        }
    }

    #[test]
    fn constant_curvature_laws_are_equalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut suite = CheckSuite::default();
        for k in 0..2000 {
            let a3 = if k % 4 == 0 {
                FRAC_PI_2
            } else {
                rng.gen_range(0.05..3.0)
            };
            let (t, _) = hinge_triangle(
                rng.gen_range(0.1..6.0),
                rng.gen_range(0.1..6.0),
                a3,
                0.3,
                K1,
            )
            .unwrap();
            suite = suite.merge(check_triangle_laws(&t, unit(), CONSTANT_CURVATURE_EQUALITY));
        }
        for name in [
            "cosine_kappa1",
            "cosine_kappa2",
            "sine_kappa1",
            "sine_kappa2",
            "pythagoras_kappa1",
        ] {
            let r = suite.get(name).unwrap();
            assert!(r.samples > 0 && r.max_abs_margin() <= 1e-9, "{name}: {r:?}");
        }
        assert!(suite.passed(), "{suite:?}");
    }

    #[test]
    fn right_only_checks_are_skipped() {
        let (t, _) = hinge_triangle(1.0, 2.0, 1.0, 0.0, K1).unwrap();
        let s = check_triangle_laws(&t, unit(), 1e-9);
        assert_eq!(s.get("sine_kappa1").unwrap().skipped, 1);
        assert_eq!(s.get("sine_kappa1").unwrap().samples, 0);
        assert!(s.passed());
    }

    #[test]
    fn straight_angle_keeps_angle_bound() {
        let (t, _) = hinge_triangle(1.0, 1.5, PI, 0.0, K1).unwrap();
        let s = check_triangle_laws(&t, unit(), 1e-9);
        assert!(s.get("angle_bound_quadratic").unwrap().passed());
        assert!(s.get("angle_bound").unwrap().passed());
    }

    #[test]
    fn degenerate_triangles_are_rejected() {
        let src = TriangleSource::Constant { kappa: 1.0 };
        assert!(TriangleSample::new([1.0, 1.0, 3.0], [0.1, 0.1, 0.1], src).is_err());
        assert!(TriangleSample::new([1.0, 1.0, 1.0], [1.2, 1.2, 1.2], src).is_err());
        assert!(TriangleSample::new([0.0, 1.0, 1.0], [0.1, 0.1, 0.1], src).is_err());
    }

    #[test]
    fn near_straight_example() {
        let geo = HyperbolicPlane { kappa: K1 };
        let (t, v) = hinge_triangle(3.0, 3.0, PI - 0.2, 0.0, K1).unwrap();
        let s = check_corollary_tri(&t, &v, 0.2, 3.0, 3.0, unit(), &geo, 1e-12).unwrap();
        assert!(s.passed(), "{s:?}");
        let (t, v) = hinge_triangle(2.0, 1.0, PI, 0.7, K1).unwrap();
        let s = check_corollary_tri(&t, &v, 0.3, 2.0, 1.0, unit(), &geo, 1e-12).unwrap();
        assert!(s.get("distance_to_far_side").unwrap().worst_margin > 0.99);
        assert!(check_corollary_tri(&t, &v, 0.3, 5.0, 1.0, unit(), &geo, 1e-12).is_err());
    }

    #[test]
    fn near_straight_far_side_random() {
        let geo = HyperbolicPlane { kappa: K1 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut suite = CheckSuite::default();
        for _ in 0..1000 {
            let eps = rng.gen_range(0.01..1.5);
            let (r1, r2) = (rng.gen_range(0.1..4.0), rng.gen_range(0.1..4.0));
            let (l1, l2) = (r1 + rng.gen_range(0.0..2.0), r2 + rng.gen_range(0.0..2.0));
            let a3 = PI - rng.gen_range(0.0..eps);
            let (t, v) = hinge_triangle(l1, l2, a3, rng.gen_range(0.0..TAU), K1).unwrap();
            let oracle = solve_side_constant(l1, l2, a3, 1.0).unwrap();
            let a = a_theta(eps / 2.0, 1.0).unwrap();
            assert!(oracle >= r1 + r2 - 2.0 * a - 1e-12);
            suite =
                suite.merge(check_corollary_tri(&t, &v, eps, r1, r2, unit(), &geo, 1e-10).unwrap());
        }
        assert!(suite.passed(), "{suite:?}");
    }

    #[test]
    fn perp_proj_examples() {
        let geo = HyperbolicPlane { kappa: K1 };
        let s = check_perp_proj(0.0, 0.0, 0.3, 1.7, 1.0, &geo, 1e-10).unwrap();
        assert!(s.get("perpendicular_projection").unwrap().max_abs_margin() <= 1e-10);
        let (r, sdist) = (0.8, 1.3);
        let (x1, x2) = geo.perpendicular_pair(r, 0.2, r, 0.2 + sdist).unwrap();
        let d = geo.distance(x1, x2).unwrap();
        let lhs = (d / 2.0).sinh().powi(2);
        let rhs = r.cosh().powi(2) * (sdist / 2.0).sinh().powi(2);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn angles_at_infinity_examples() {
        let v = UnitTangent::new(PointUHP::new(0.3, 1.2).unwrap(), 1.0);
        let s = check_angles_at_infinity(v, v, 0.1, unit(), 1e-9).unwrap();
        assert_eq!(s.get("angle_forward").unwrap().worst_margin, 1.0);
        let w = UnitTangent::new(PointUHP::new(0.05, 1.0).unwrap(), hyp2::UP);
        let d = d1_metric(UnitTangent::i_up(), w, K1);
        let s = check_angles_at_infinity(UnitTangent::i_up(), w, d, unit(), 1e-9).unwrap();
        assert!(s.passed(), "{s:?}");
        assert!(check_angles_at_infinity(UnitTangent::i_up(), w, d / 2.0, unit(), 1e-9).is_err());
    }

    #[test]
    fn report_merge_is_associative() {
        let mk = |ms: &[f64]| {
            let mut r = CheckReport::new("x", 0.1);
            ms.iter().for_each(|&m| r.record(m));
            r
        };
        let (a, b, c) = (mk(&[0.5, -0.2]), mk(&[1.0]), mk(&[-0.05, 0.3]));
        let mut left = a.clone();
        left.merge(&b);
        left.merge(&c);
        let mut bc = b.clone();
        bc.merge(&c);
        let mut right = a.clone();
        right.merge(&bc);
        assert_eq!(left, right);
        assert_eq!(left.violations, 1);
    }

    proptest! {
        #[test]
        fn cosine_laws_coincide_in_constant_curvature(
            l1 in 0.1..10.0f64, l2 in 0.1..10.0f64, a3 in 0.01..3.13f64, dir in 0.0..TAU
        ) {
            let (t, _) = hinge_triangle(l1, l2, a3, dir, K1).unwrap();
            let s = check_triangle_laws(&t, unit(), 1e-10);
            prop_assert!(s.get("cosine_kappa1").unwrap().max_abs_margin() <= 1e-10);
            prop_assert!(t.angle_sum() < PI);
        }

        #[test]
        fn right_triangle_sine_identity(l1 in 0.1..8.0f64, l2 in 0.1..8.0f64, dir in 0.0..TAU) {
            let (t, _) = hinge_triangle(l1, l2, FRAC_PI_2, dir, K1).unwrap();
            for (li, ai) in [(t.l1, t.a1), (t.l2, t.a2)] {
                let lhs = ai.sin() * t.l3.sinh();
                prop_assert!((lhs - li.sinh()).abs() <= 1e-9 * li.sinh());
            }
        }

        #[test]
        fn violations_imply_margin_below_tolerance(ms in proptest::collection::vec(-1.0..1.0f64, 1..50)) {
            let mut r = CheckReport::new("m", 0.1);
            ms.iter().for_each(|&m| r.record(m));
            if r.violations == 0 {
                prop_assert!(r.worst_margin >= -r.tolerance);
            }
        }

        #[test]
        fn perp_proj_is_equality_in_constant_curvature(
            r1 in 0.0..3.0f64, r2 in 0.0..3.0f64, t1 in -3.0..3.0f64, t2 in -3.0..3.0f64, k in 0.5..2.0f64
        ) {
            let geo = HyperbolicPlane { kappa: CurvatureScale::new(k).unwrap() };
            let s = check_perp_proj(r1, r2, t1, t2, k, &geo, 1e-10).unwrap();
            prop_assert!(s.get("perpendicular_projection").unwrap().max_abs_margin() <= 1e-10);
        }

        #[test]
        fn angles_at_infinity_random(
            x in -1.0..1.0f64, y in 0.3..3.0f64, dir in 0.0..TAU,
            dx in -0.2..0.2f64, dy in -0.2..0.2f64, ddir in -0.2..0.2f64
        ) {
            let w = UnitTangent::new(PointUHP::new(x, y).unwrap(), dir);
            let v = UnitTangent::new(PointUHP::new(x + dx * y, y * (1.0 + dy)).unwrap(), dir + ddir);
            let d = d1_metric(v, w, K1);
            prop_assume!(d > 0.0 && d <= 0.4);
            let s = check_angles_at_infinity(v, w, d, unit(), 1e-9).unwrap();
            prop_assert!(s.passed(), "{:?}", s);
        }
    }
}
