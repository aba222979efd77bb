//! Self-crossing closed geodesics in the constant-curvature plane and the
//! closed orbits built from them: partner orbits, pseudo-partner orbits and
//! orbits produced by the closing lemma. Also the cone sets `A_θ`, `F_θ`, `P_θ`
//! used to certify that an isometry has an axis near a given orbit.
//!
//! Everything happens in the universal cover; quotients are never formed.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::bounds::{a_theta, BoundConstants};
use crate::comparison::{leq_margin, CheckSuite};
use crate::error::{GeomError, Result};
use crate::hyp2::{
    angle_between, axis, d1_metric, direction_to_boundary, direction_toward, distance,
    distance_to_segment, endpoints, geodesic_flow, isometry_from_frames, translation_length,
    BoundaryPoint, CurvatureScale, GeodesicLine, GeodesicSegment, Isometry, PointUHP, UnitTangent,
};
use crate::tolerances::{ANGLE_TOL, FOOT_POINT_TOL, ORBIT_TOL, SUP_SAMPLING_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingMode {
    /// Incoming and outgoing directions nearly opposite: small-angle crossing.
    Partner,
    /// Loops close up nearly smoothly: the crossing angle is close to `π`.
    Pseudo,
}

/// Lift of a closed geodesic of length `T = T1 + T2` crossing itself at `p₀ = i` at time `T1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossedGeodesic {
    pub kappa: CurvatureScale,
    pub v0: UnitTangent,
    pub t1: f64,
    pub t2: f64,
    pub eps: f64,
    pub mode: CrossingMode,
    /// Deck element of the first loop, `γ₁ p₀ = c̃(T1)`.
    pub g1: Isometry,
    /// Closing element with axis `c̃`, `|γ| = T`.
    pub g: Isometry,
    /// `γ₂ = γ γ₁⁻¹`, deck element of the second loop.
    pub g2: Isometry,
    /// `+1` for the canonical rotation sign, `-1` for its mirror.
    pub orientation: f64,
}

impl CrossedGeodesic {
    pub fn total_length(&self) -> f64 {
        self.t1 + self.t2
    }

    /// Point `c̃(t)` of the straight lift.
    pub fn lift_point(&self, t: f64) -> PointUHP {
        geodesic_flow(self.v0, t, self.kappa).base
    }

    /// Angle at `c̃(T1)` between `(γ₁)_* v₀` and `−ċ̃(T1)` (partner) or `ċ̃(T1)` (pseudo).
    pub fn crossing_angle(&self) -> f64 {
        let arrival = geodesic_flow(self.v0, self.t1, self.kappa);
        let image = self.g1.apply_tangent(self.v0);
        let reference = match self.mode {
            CrossingMode::Partner => arrival.direction + PI,
            CrossingMode::Pseudo => arrival.direction,
        };
        angle_between(image.direction, reference)
    }

    /// Residual of `γ = γ₂ γ₁` in projective matrix norm.
    pub fn composition_residual(&self) -> f64 {
        let h = self.g2.compose(&self.g1);
        let diff = |s: f64| {
            (h.a - s * self.g.a)
                .abs()
                .max((h.b - s * self.g.b).abs())
                .max((h.c - s * self.g.c).abs())
                .max((h.d - s * self.g.d).abs())
        };
        let scale = self
            .g
            .a
            .abs()
            .max(self.g.b.abs())
            .max(self.g.c.abs())
            .max(self.g.d.abs());
        diff(1.0).min(diff(-1.0)) / scale
    }
}

pub fn synthesize_crossed_geodesic(
    t1: f64,
    t2: f64,
    eps: f64,
    mode: CrossingMode,
    kappa: CurvatureScale,
) -> Result<CrossedGeodesic> {
    synthesize_crossed_geodesic_oriented(t1, t2, eps, mode, kappa, 1.0)
}

/// As [`synthesize_crossed_geodesic`] with the rotation sign chosen by `orientation`.
pub fn synthesize_crossed_geodesic_oriented(
    t1: f64,
    t2: f64,
    eps: f64,
    mode: CrossingMode,
    kappa: CurvatureScale,
    orientation: f64,
) -> Result<CrossedGeodesic> {
    if !(t1 > 0.0 && t2 > 0.0 && t1.is_finite() && t2.is_finite()) {
        return Err(GeomError::HypothesisViolated(format!(
            "loop lengths ({t1}, {t2}) must be positive"
        )));
    }
    let eps_ok = match mode {
        CrossingMode::Partner => eps > 0.0 && eps < PI,
        CrossingMode::Pseudo => (0.0..PI).contains(&eps),
    };
    if !eps_ok {
        return Err(GeomError::HypothesisViolated(format!(
            "crossing angle {eps} not admissible for {mode:?}"
        )));
    }
    let v0 = UnitTangent::i_up();
    let alpha = orientation.signum()
        * match mode {
            CrossingMode::Partner => PI - eps,
            CrossingMode::Pseudo => eps,
        };
    let g = isometry_from_frames(v0, geodesic_flow(v0, t1 + t2, kappa));
    let g1 = isometry_from_frames(v0, geodesic_flow(v0, t1, kappa).rotated(alpha));
    let g2 = g.compose(&g1.inverse());
    Ok(CrossedGeodesic {
        kappa,
        v0,
        t1,
        t2,
        eps,
        mode,
        g1,
        g,
        g2,
        orientation: orientation.signum(),
    })
}

/// Displacement at the midpoint of a geodesic loop and its law-of-cosines bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidpointChain {
    /// `d(c̃(r/2), γ c̃(r/2))`.
    pub rho_mid: f64,
    /// Closing angle `∠(γ_* u, −φ^r u)`.
    pub angle: f64,
    /// Relative margin of `cosh(κρ_mid) ≤ 1 + (cosh(κr) − 1)(1 − cos angle)/2`.
    pub margin: f64,
}

/// Loop `t ↦ c_u(t)`, `t ∈ [0, r]`, closed up by `g` (`g π u = π φ^r u`).
pub fn loop_midpoint_chain(
    g: &Isometry,
    u: UnitTangent,
    r: f64,
    kappa: CurvatureScale,
) -> MidpointChain {
    let k = kappa.get();
    let mid = geodesic_flow(u, r / 2.0, kappa).base;
    let rho_mid = distance(mid, g.apply_point(mid), kappa);
    let angle = angle_between(
        g.apply_tangent(u).direction,
        geodesic_flow(u, r, kappa).direction + PI,
    );
    // Both sides minus one, halved: sinh²(κρ/2) against sinh²(κr/2) sin²(angle/2).
    let lhs = (k * rho_mid / 2.0).sinh();
    let rhs = (k * r / 2.0).sinh() * (angle / 2.0).sin();
    MidpointChain {
        rho_mid,
        angle,
        margin: leq_margin(lhs * lhs, rhs * rhs),
    }
}

/// Midpoint chains of both loops of a crossed geodesic.
pub fn crossed_loop_chains(cg: &CrossedGeodesic) -> [MidpointChain; 2] {
    let second = geodesic_flow(cg.v0, cg.t1, cg.kappa);
    [
        loop_midpoint_chain(&cg.g1, cg.v0, cg.t1, cg.kappa),
        loop_midpoint_chain(&cg.g2, second, cg.t2, cg.kappa),
    ]
}

/// Evenly spaced samples of `[0, len]` with spacing at most `step`.
fn grid(len: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = ((len / step).ceil() as usize).max(1);
    (0..=n).map(move |k| len * k as f64 / n as f64)
}

/// Axis of `g` parametrized from the foot point of `p`.
fn axis_from_foot(g: &Isometry, p: PointUHP, kappa: CurvatureScale) -> Result<GeodesicLine> {
    let line = axis(g, kappa)?;
    Ok(line.reparametrized_at(line.foot_parameter(p, kappa), kappa))
}

/// A measured quantity against its bound; `margin = bound − measured`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
    /// Whether equality counts as a violation.
    pub strict: bool,
}

impl BoundCheck {
    pub fn new(name: &'static str, measured: f64, bound: f64) -> Self {
        Self {
            name,
            measured,
            bound,
            strict: false,
        }
    }

    pub fn strict(name: &'static str, measured: f64, bound: f64) -> Self {
        Self {
            name,
            measured,
            bound,
            strict: true,
        }
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.measured
    }

    pub fn holds(&self, tolerance: f64) -> bool {
        if self.strict {
            self.margin() > 0.0
        } else {
            self.margin() >= -tolerance
        }
    }
}

fn check_holds(checks: &[BoundCheck], name: &str) -> bool {
    checks
        .iter()
        .filter(|c| c.name == name)
        .all(|c| c.holds(ORBIT_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartnerFlags {
    pub strictly_shorter: bool,
    pub length: bool,
    pub distance: bool,
    pub split_distance: bool,
    pub t_hat_bracket: bool,
    pub t_hat_gap: bool,
    pub surface_gap: bool,
    pub axis_to_third_side: bool,
}

impl PartnerFlags {
    pub fn all(&self) -> bool {
        self.strictly_shorter
            && self.length
            && self.distance
            && self.split_distance
            && self.t_hat_bracket
            && self.t_hat_gap
            && self.surface_gap
            && self.axis_to_third_side
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartnerResult {
    pub t: f64,
    pub t_hat: f64,
    pub t_prime: f64,
    /// Foot parameter of `p₁` on the third side `c̃₃`.
    pub t3: f64,
    pub eps: f64,
    /// Sampled sup over the axis of the distance to the nearer lifted loop.
    pub dist_sup: f64,
    /// The same supremum at half the sampling step.
    pub dist_sup_fine: f64,
    /// Sampled sup with the loop chosen by the split parameter `T3`.
    pub split_sup: f64,
    /// Sampled sup of `d(c(s), c̃₃(s))` over `[0, T̂]`.
    pub axis_to_third_side: f64,
    pub bound_len: f64,
    pub bound_dist: f64,
    /// `T1, T2 ≥ t₀`: inside the regime where the bounds are guaranteed.
    pub guaranteed_regime: bool,
    /// Every inequality in the form `measured ≤ bound`.
    pub checks: Vec<BoundCheck>,
    pub passed: PartnerFlags,
}

/// Builds the partner element `γ₂⁻¹γ₁` and measures its axis against the two loops.
pub fn construct_partner(
    cg: &CrossedGeodesic,
    constants: &BoundConstants,
) -> Result<PartnerResult> {
    if cg.mode != CrossingMode::Partner {
        return Err(GeomError::HypothesisViolated(
            "partner construction needs a partner-mode crossing".into(),
        ));
    }
    let kappa = cg.kappa;
    let (k1, k2) = (constants.kappa1, constants.kappa2);
    let q = k2 / k1;
    let eps = cg.eps;
    let t = cg.total_length();
    let partner = cg.g2.inverse().compose(&cg.g1);
    let t_prime = translation_length(&partner, kappa)?;
    let p0 = cg.v0.base;
    let p1 = cg.lift_point(cg.t1);
    let p2 = cg.g2.inverse().apply_point(p1);
    let t_hat = distance(p0, p2, kappa);
    let third = GeodesicSegment::between(p0, p2, kappa)?;
    let t3 = third.line.foot_parameter(p1, kappa).clamp(0.0, t_hat);

    // Lifted loops: c̃₁ = c̃[0, T1] and c̃₂ = γ₂⁻¹ c̃[T1, T], measured as d(γ₂ x, c̃[T1, T]).
    let lift = GeodesicLine::from_tangent(cg.v0);
    let loop1 = GeodesicSegment::new(lift, 0.0, cg.t1)?;
    let loop2 = GeodesicSegment::new(lift, cg.t1, t)?;
    let d1 = |x: PointUHP| distance_to_segment(x, &loop1, kappa);
    let d2 = |x: PointUHP| distance_to_segment(cg.g2.apply_point(x), &loop2, kappa);

    let c = axis_from_foot(&partner, p0, kappa)?;
    let sup_on = |step: f64| {
        grid(t_prime, step)
            .map(|s| {
                let x = c.point_at(s, kappa);
                d1(x).min(d2(x))
            })
            .fold(0.0, f64::max)
    };
    let dist_sup = sup_on(SUP_SAMPLING_STEP);
    let dist_sup_fine = sup_on(SUP_SAMPLING_STEP / 2.0);
    let split_sup = grid(t_prime, SUP_SAMPLING_STEP)
        .map(|s| {
            let x = c.point_at(s, kappa);
            if s <= t3 {
                d1(x)
            } else {
                d2(x)
            }
        })
        .fold(0.0, f64::max);
    let axis_to_third_side = grid(t_hat, SUP_SAMPLING_STEP)
        .map(|s| distance(c.point_at(s, kappa), third.line.point_at(s, kappa), kappa))
        .fold(0.0, f64::max);

    let (bound_len, bound_dist) = (constants.partner_len_coeff, constants.partner_dist_coeff);
    let two_a = 2.0 * a_theta(eps / 2.0, k1)?;
    let checks = vec![
        BoundCheck::strict("strictly_shorter", t_prime, t),
        BoundCheck::new("length", t - t_prime, bound_len * eps),
        BoundCheck::new("distance", dist_sup, bound_dist * eps),
        BoundCheck::new("split_distance", split_sup, bound_dist * eps),
        BoundCheck::new("t_prime_below_t_hat", t_prime, t_hat),
        BoundCheck::new("t_hat_below_t", t_hat, t),
        BoundCheck::new("t_hat_deficit", t - t_hat, two_a),
        BoundCheck::new("t_hat_gap", t_hat - t_prime, 16.0 / k1 * (q + 1.0) * eps),
        BoundCheck::new(
            "surface_gap",
            t_hat - t_prime,
            2.0 / k2 * (constants.d_num * eps * eps).ln_1p(),
        ),
        BoundCheck::new(
            "axis_to_third_side",
            axis_to_third_side,
            24.0 / k1 * (q + 1.0) * eps,
        ),
    ];
    let holds = |name| check_holds(&checks, name);
    let passed = PartnerFlags {
        strictly_shorter: holds("strictly_shorter"),
        length: holds("length"),
        distance: holds("distance"),
        split_distance: holds("split_distance"),
        t_hat_bracket: holds("t_prime_below_t_hat")
            && holds("t_hat_below_t")
            && holds("t_hat_deficit"),
        t_hat_gap: holds("t_hat_gap"),
        surface_gap: holds("surface_gap"),
        axis_to_third_side: holds("axis_to_third_side"),
    };
    Ok(PartnerResult {
        t,
        t_hat,
        t_prime,
        t3,
        eps,
        dist_sup,
        dist_sup_fine,
        split_sup,
        axis_to_third_side,
        bound_len,
        bound_dist,
        guaranteed_regime: cg.t1 >= constants.t0 && cg.t2 >= constants.t0,
        checks,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoPartnerFlags {
    pub lengths: bool,
    pub distances: bool,
    pub endpoint_gap: bool,
}

impl PseudoPartnerFlags {
    pub fn all(&self) -> bool {
        self.lengths && self.distances && self.endpoint_gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoPartnerResult {
    pub t1: f64,
    pub t2: f64,
    pub eps: f64,
    pub that1: f64,
    pub that2: f64,
    /// `T_i − T̂_i`.
    pub len_gaps: [f64; 2],
    /// Sampled `sup_s d(c_i(s), loop_i(s))`.
    pub dist_sups: [f64; 2],
    pub endpoint_gap: f64,
    pub bound_len: f64,
    pub bound_dist: f64,
    pub bound_gap: f64,
    pub guaranteed_regime: bool,
    pub checks: Vec<BoundCheck>,
    pub passed: PseudoPartnerFlags,
}

/// Axes of `γ₁` and `γ₂`, compared with the loops they close up.
pub fn construct_pseudo_partner(
    cg: &CrossedGeodesic,
    constants: &BoundConstants,
) -> Result<PseudoPartnerResult> {
    if cg.mode != CrossingMode::Pseudo {
        return Err(GeomError::HypothesisViolated(
            "pseudo-partner construction needs a pseudo-mode crossing".into(),
        ));
    }
    let kappa = cg.kappa;
    let p0 = cg.v0.base;
    let p1 = cg.lift_point(cg.t1);
    let (that1, that2) = (
        translation_length(&cg.g1, kappa)?,
        translation_length(&cg.g2, kappa)?,
    );
    let axis1 = axis_from_foot(&cg.g1, p0, kappa)?;
    let axis2 = axis_from_foot(&cg.g2, p1, kappa)?;
    let sup = |c: &GeodesicLine, offset: f64, len: f64| {
        grid(len, SUP_SAMPLING_STEP)
            .map(|s| distance(c.point_at(s, kappa), cg.lift_point(offset + s), kappa))
            .fold(0.0, f64::max)
    };
    let dist_sups = [sup(&axis1, 0.0, cg.t1), sup(&axis2, cg.t1, cg.t2)];
    let endpoint_gap = distance(
        axis1.point_at(that1, kappa),
        axis2.point_at(0.0, kappa),
        kappa,
    );
    let len_gaps = [cg.t1 - that1, cg.t2 - that2];
    let (bound_len, bound_dist, bound_gap) = (
        constants.pseudo_len_coeff,
        constants.pseudo_dist_coeff,
        constants.pseudo_gap_coeff,
    );
    let eps = cg.eps;
    let checks = vec![
        BoundCheck::new("loop1_not_shorter", that1, cg.t1),
        BoundCheck::new("loop2_not_shorter", that2, cg.t2),
        BoundCheck::new("loop1_length", len_gaps[0], bound_len * eps),
        BoundCheck::new("loop2_length", len_gaps[1], bound_len * eps),
        BoundCheck::new("loop1_distance", dist_sups[0], bound_dist * eps),
        BoundCheck::new("loop2_distance", dist_sups[1], bound_dist * eps),
        BoundCheck::new("endpoint_gap", endpoint_gap, bound_gap * eps),
    ];
    let holds = |names: &[&str]| names.iter().all(|n| check_holds(&checks, n));
    let passed = PseudoPartnerFlags {
        lengths: holds(&[
            "loop1_not_shorter",
            "loop2_not_shorter",
            "loop1_length",
            "loop2_length",
        ]),
        distances: holds(&["loop1_distance", "loop2_distance"]),
        endpoint_gap: holds(&["endpoint_gap"]),
    };
    Ok(PseudoPartnerResult {
        t1: cg.t1,
        t2: cg.t2,
        eps,
        that1,
        that2,
        len_gaps,
        dist_sups,
        endpoint_gap,
        bound_len,
        bound_dist,
        bound_gap,
        guaranteed_regime: cg.t1 >= constants.t0 && cg.t2 >= constants.t0,
        checks,
        passed,
    })
}

/// An approximately `g`-recurrent tangent vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recurrent {
    pub w: UnitTangent,
    /// Return time `T = d(πw, g πw) + jitter`.
    pub t: f64,
    /// `d₁(g_* w, φ^T w)`.
    pub delta: f64,
}

/// Tangent at perpendicular distance `offset` from the axis of `g`, aimed at its own image
/// `g πw` and then turned by `tilt`; the return time is the chord length plus `jitter`.
///
/// With `tilt = jitter = 0` the orbit returns exactly to `g πw`, the foot-point case.
pub fn synthesize_recurrent(
    g: &Isometry,
    offset: f64,
    tilt: f64,
    jitter: f64,
    kappa: CurvatureScale,
    delta0: f64,
) -> Result<Recurrent> {
    let line = axis(g, kappa)?;
    let q = geodesic_flow(line.base.rotated(FRAC_PI_2), offset, kappa).base;
    let gq = g.apply_point(q);
    let chord = distance(q, gq, kappa);
    let w = UnitTangent::new(q, direction_toward(q, gq)? + tilt);
    let t = chord + jitter;
    if t <= 0.0 {
        return Err(GeomError::DomainError(format!(
            "return time {t} is not positive"
        )));
    }
    let delta = d1_metric(g.apply_tangent(w), geodesic_flow(w, t, kappa), kappa);
    if delta > delta0 {
        return Err(GeomError::DeltaTooLarge { delta, delta0 });
    }
    Ok(Recurrent { w, t, delta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosingFlags {
    pub length: bool,
    pub shadow: bool,
    /// Whether the foot-point variant applies (`g πw = π φ^T w`).
    pub foot_point: bool,
    /// Foot-point bounds; vacuously true when the variant does not apply.
    pub foot_length: bool,
    pub foot_shadow: bool,
}

impl ClosingFlags {
    pub fn all(&self) -> bool {
        self.length && self.shadow && self.foot_length && self.foot_shadow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosingResult {
    pub delta: f64,
    pub t: f64,
    pub t_prime: f64,
    pub shadow_sup: f64,
    pub c_main: f64,
    pub c_tilde: f64,
    /// General bounds, followed by the foot-point bounds when that variant applies.
    pub checks: Vec<BoundCheck>,
    pub passed: ClosingFlags,
}

/// Closes the almost-periodic orbit of `w` to the axis of `g` and measures the shadowing.
pub fn close_orbit(
    w: UnitTangent,
    t: f64,
    g: &Isometry,
    constants: &BoundConstants,
    kappa: CurvatureScale,
) -> Result<ClosingResult> {
    let delta = d1_metric(g.apply_tangent(w), geodesic_flow(w, t, kappa), kappa);
    if delta > constants.delta0 {
        return Err(GeomError::HypothesisViolated(format!(
            "delta {delta} exceeds delta0 {}",
            constants.delta0
        )));
    }
    if t < constants.t0 {
        return Err(GeomError::HypothesisViolated(format!(
            "T = {t} below t0 = {}",
            constants.t0
        )));
    }
    let t_prime = translation_length(g, kappa)?;
    let c = axis_from_foot(g, w.base, kappa)?;
    let shadow_sup = grid(t, SUP_SAMPLING_STEP)
        .map(|s| d1_metric(geodesic_flow(w, s, kappa), c.tangent_at(s, kappa), kappa))
        .fold(0.0, f64::max);
    let (cm, ct) = (constants.c_main, constants.c_tilde);
    let foot_point = distance(
        g.apply_point(w.base),
        geodesic_flow(w, t, kappa).base,
        kappa,
    ) <= FOOT_POINT_TOL;
    let gap = t - t_prime;
    let mut checks = vec![
        BoundCheck::new("length", gap.abs(), 2.0 * cm * delta),
        BoundCheck::new("shadow", shadow_sup, (5.0 * cm + 1.0) * delta),
    ];
    if foot_point {
        // With no defect the orbit is already closed and `T = T′` is allowed.
        checks.push(if delta > 0.0 {
            BoundCheck::strict("foot_shorter", t_prime, t)
        } else {
            BoundCheck::new("foot_shorter", t_prime, t)
        });
        checks.push(BoundCheck::new("foot_length", gap, 4.0 * ct * delta));
        checks.push(BoundCheck::new(
            "foot_shadow",
            shadow_sup,
            (10.0 * ct + 1.0) * delta,
        ));
    }
    let holds = |name| check_holds(&checks, name);
    let passed = ClosingFlags {
        length: holds("length"),
        shadow: holds("shadow"),
        foot_point,
        foot_length: holds("foot_shorter") && holds("foot_length"),
        foot_shadow: holds("foot_shadow"),
    };
    Ok(ClosingResult {
        delta,
        t,
        t_prime,
        shadow_sup,
        c_main: cm,
        c_tilde: ct,
        checks,
        passed,
    })
}

/// Angle at `πv₀` between the ray toward `xi` and `v₀` (`forward`) or `−v₀`.
fn cone_angle(v0: UnitTangent, xi: BoundaryPoint, forward: bool) -> f64 {
    let reference = if forward {
        v0.direction
    } else {
        v0.direction + PI
    };
    angle_between(direction_to_boundary(v0.base, xi), reference)
}

/// Membership in `A_θ(v₀)`: endpoints in the cones `P_θ`, `F_θ` and foot point within `a(θ)`.
pub fn in_a_theta(v: UnitTangent, v0: UnitTangent, theta: f64, kappa: CurvatureScale) -> bool {
    let Ok(a) = a_theta(theta, kappa.get()) else {
        return false;
    };
    let (minus, plus) = endpoints(v);
    cone_angle(v0, minus, false) <= theta + ANGLE_TOL
        && cone_angle(v0, plus, true) <= theta + ANGLE_TOL
        && distance(v.base, v0.base, kappa) <= a + ANGLE_TOL
}

/// A vector `v ∈ A_θ(v₀)` with `g⁻¹_* φ^t v ∈ A_θ(v₀)`, certifying `g ∈ Γ_θ(v₀, t)`.
pub fn gamma_theta_witness(
    g: &Isometry,
    v0: UnitTangent,
    theta: f64,
    t: f64,
    kappa: CurvatureScale,
) -> Option<UnitTangent> {
    let p0 = v0.base;
    let mut candidates = vec![v0];
    if let Ok(dir) = direction_toward(p0, g.apply_point(p0)) {
        candidates.push(UnitTangent::new(p0, dir));
    }
    let ginv = g.inverse();
    candidates.into_iter().find(|&v| {
        in_a_theta(v, v0, theta, kappa)
            && in_a_theta(
                ginv.apply_tangent(geodesic_flow(v, t, kappa)),
                v0,
                theta,
                kappa,
            )
    })
}

/// Samples the cones `F_ρ(θ)` and `P_ρ(θ)` and checks `g F ⊆ F` and `g⁻¹ P ⊆ P`.
pub fn check_cone_contraction(
    g: &Isometry,
    v0: UnitTangent,
    theta: f64,
    t: f64,
    n_samples: usize,
    constants: &BoundConstants,
    kappa: CurvatureScale,
) -> Result<CheckSuite> {
    if gamma_theta_witness(g, v0, theta, t, kappa).is_none() {
        return Err(GeomError::NoWitness);
    }
    let rho = constants.rho(theta);
    let ginv = g.inverse();
    let mut suite = CheckSuite::default();
    let n = n_samples.max(1);
    for k in 0..n {
        let phi = if n == 1 {
            0.0
        } else {
            -rho + 2.0 * rho * k as f64 / (n - 1) as f64
        };
        let (_, eta_f) = endpoints(UnitTangent::new(v0.base, v0.direction + phi));
        let (eta_p, _) = endpoints(UnitTangent::new(v0.base, v0.direction + phi));
        let image_f = cone_angle(v0, g.apply_boundary(eta_f), true);
        let image_p = cone_angle(v0, ginv.apply_boundary(eta_p), false);
        // Absolute angle margins: cone apertures can be zero.
        suite.record("forward_cone", ANGLE_TOL, rho - image_f);
        suite.record("backward_cone", ANGLE_TOL, rho - image_p);
    }
    Ok(suite)
}

/// Length and distance brackets for an isometry certified by the witness `v`.
///
/// The foot-point variant is checked when `g πv = π φ^t v` and `πv = πv₀`.
pub fn check_length_bracket(
    g: &Isometry,
    v: UnitTangent,
    v0: UnitTangent,
    theta: f64,
    t: f64,
    constants: &BoundConstants,
    kappa: CurvatureScale,
) -> Result<CheckSuite> {
    let (k1, q) = (constants.kappa1, constants.kappa2 / constants.kappa1);
    let len = translation_length(g, kappa)?;
    let c = axis_from_foot(g, v0.base, kappa)?;
    let mut suite = CheckSuite::default();
    let tol = ORBIT_TOL;
    suite.record(
        "length_lower",
        tol,
        len - (t - 4.0 / k1 * (2.0 * q + 3.0) * theta),
    );
    suite.record("length_upper", tol, t + 4.0 / k1 * theta - len);
    let sup = grid(t, SUP_SAMPLING_STEP)
        .map(|s| distance(c.point_at(s, kappa), geodesic_flow(v, s, kappa).base, kappa))
        .fold(0.0, f64::max);
    suite.record(
        "axis_distance",
        tol,
        6.0 / k1 * (2.0 * q + 3.0) * theta - sup,
    );
    let returns = distance(
        g.apply_point(v.base),
        geodesic_flow(v, t, kappa).base,
        kappa,
    ) <= FOOT_POINT_TOL;
    let at_base = distance(v.base, v0.base, kappa) <= FOOT_POINT_TOL;
    if returns && at_base {
        suite.record("foot_length_nonnegative", tol, t - len);
        suite.record("foot_length", tol, 8.0 / k1 * (q + 1.0) * theta - (t - len));
        suite.record("foot_distance", tol, 12.0 / k1 * (q + 1.0) * theta - sup);
    } else {
        for name in ["foot_length_nonnegative", "foot_length", "foot_distance"] {
            suite.skip(name, tol);
        }
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{make_constants, CurvatureBounds};
    use crate::comparison::solve_side_constant;
    use proptest::prelude::*;

    const K1: CurvatureScale = CurvatureScale::UNIT;

    fn constants() -> BoundConstants {
        make_constants(CurvatureBounds::constant(1.0).unwrap(), 5.0, 0.5).unwrap()
    }

    #[test]
    fn synthesis_invariants() {
        let cg = synthesize_crossed_geodesic(6.0, 6.0, 0.05, CrossingMode::Partner, K1).unwrap();
        assert!((translation_length(&cg.g, K1).unwrap() - 12.0).abs() < 1e-9);
        assert!((cg.crossing_angle() - 0.05).abs() < 1e-9);
        assert!(cg.composition_residual() < 1e-10);
        let ps = synthesize_crossed_geodesic(6.0, 6.0, 0.05, CrossingMode::Pseudo, K1).unwrap();
        assert!((ps.crossing_angle() - 0.05).abs() < 1e-9);
        // Seen as a partner crossing, the pseudo angle is the complement.
        let arrival = geodesic_flow(ps.v0, 6.0, K1);
        let complement =
            angle_between(ps.g1.apply_tangent(ps.v0).direction, arrival.direction + PI);
        assert!((complement - (PI - 0.05)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_synthesis_is_rejected() {
        assert!(synthesize_crossed_geodesic(6.0, 6.0, 0.0, CrossingMode::Partner, K1).is_err());
        assert!(synthesize_crossed_geodesic(0.0, 6.0, 0.1, CrossingMode::Pseudo, K1).is_err());
    }

    #[test]
    fn partner_example() {
        let cg = synthesize_crossed_geodesic(10.0, 10.0, 0.05, CrossingMode::Partner, K1).unwrap();
        let r = construct_partner(&cg, &constants()).unwrap();
        assert_eq!(r.bound_len, 34.0);
        assert_eq!(r.bound_dist, 49.0);
        assert!(r.passed.all(), "{r:?}");
        assert!(r.t - r.t_prime <= 1.7 && r.dist_sup <= 2.45);
        assert!((r.dist_sup - r.dist_sup_fine).abs() < 1e-3);
    }

    #[test]
    fn partner_length_matches_trace() {
        let cg = synthesize_crossed_geodesic(7.0, 9.0, 0.03, CrossingMode::Partner, K1).unwrap();
        let r = construct_partner(&cg, &constants()).unwrap();
        let m = cg.g2.inverse().compose(&cg.g1);
        let oracle = 2.0 * (m.trace().abs() / 2.0).acosh();
        assert!((r.t_prime - oracle).abs() < 1e-12);
    }

    #[test]
    fn partner_t_hat_is_law_of_cosines_side() {
        let cg = synthesize_crossed_geodesic(7.0, 9.0, 0.03, CrossingMode::Partner, K1).unwrap();
        let r = construct_partner(&cg, &constants()).unwrap();
        let oracle = solve_side_constant(7.0, 9.0, PI - 0.03, 1.0).unwrap();
        assert!((r.t_hat - oracle).abs() < 1e-9, "{} vs {oracle}", r.t_hat);
    }

    #[test]
    fn partner_gap_shrinks_with_eps() {
        let gaps: Vec<f64> = [0.05, 0.02, 0.01, 0.005, 0.001]
            .iter()
            .map(|&e| {
                let cg =
                    synthesize_crossed_geodesic(10.0, 10.0, e, CrossingMode::Partner, K1).unwrap();
                let r = construct_partner(&cg, &constants()).unwrap();
                r.t - r.t_prime
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn pseudo_partner_example() {
        let cg = synthesize_crossed_geodesic(10.0, 10.0, 0.05, CrossingMode::Pseudo, K1).unwrap();
        let r = construct_pseudo_partner(&cg, &constants()).unwrap();
        assert_eq!((r.bound_len, r.bound_dist, r.bound_gap), (16.0, 24.0, 64.0));
        assert!(r.passed.all(), "{r:?}");
        assert!(r.len_gaps.iter().all(|&g| g <= 0.8));
    }

    #[test]
    fn pseudo_partner_without_crossing_angle_is_the_lift() {
        let cg = synthesize_crossed_geodesic(10.0, 8.0, 0.0, CrossingMode::Pseudo, K1).unwrap();
        let r = construct_pseudo_partner(&cg, &constants()).unwrap();
        assert!((r.that1 - 10.0).abs() < 1e-12 && (r.that2 - 8.0).abs() < 1e-12);
        assert!(r.dist_sups[0] < 1e-9 && r.endpoint_gap < 1e-9);
    }

    #[test]
    fn midpoint_chain_is_equality_in_constant_curvature() {
        for mode in [CrossingMode::Partner, CrossingMode::Pseudo] {
            for eps in [0.001, 0.01, 0.05] {
                let cg = synthesize_crossed_geodesic(10.0, 7.0, eps, mode, K1).unwrap();
                for chain in crossed_loop_chains(&cg) {
                    assert!(chain.margin.abs() < 1e-9, "{mode:?} {eps}: {chain:?}");
                }
            }
        }
    }

    #[test]
    fn recurrent_on_axis_has_zero_defect() {
        let g = Isometry::translation_imaginary_axis(10.0);
        let r = synthesize_recurrent(&g, 0.0, 0.0, 0.0, K1, 0.03).unwrap();
        assert!(r.delta < 1e-12 && (r.t - 10.0).abs() < 1e-12);
        let c = close_orbit(r.w, r.t, &g, &constants(), K1).unwrap();
        assert!(c.shadow_sup < 1e-9 && c.passed.all());
    }

    #[test]
    fn recurrence_defect_grows_with_offset() {
        let g = Isometry::translation_imaginary_axis(10.0);
        let deltas: Vec<f64> = [0.001, 0.005, 0.01]
            .iter()
            .map(|&o| {
                synthesize_recurrent(&g, o, 0.0, 0.0, K1, 1.0)
                    .unwrap()
                    .delta
            })
            .collect();
        assert!(
            deltas[0] > 0.0 && deltas.windows(2).all(|w| w[1] > w[0]),
            "{deltas:?}"
        );
    }

    #[test]
    fn recurrence_defect_is_reported() {
        let g = Isometry::translation_imaginary_axis(10.0);
        let err = synthesize_recurrent(&g, 0.5, 0.0, 0.0, K1, 0.03).unwrap_err();
        assert!(matches!(err, GeomError::DeltaTooLarge { .. }));
    }

    #[test]
    fn closing_example() {
        let g = Isometry::translation_imaginary_axis(10.0)
            .conjugate_by(&Isometry::rotation_about_i(0.7));
        let r = synthesize_recurrent(&g, 0.01, 0.0, 0.0, K1, constants().delta0).unwrap();
        let c = close_orbit(r.w, r.t, &g, &constants(), K1).unwrap();
        assert!(c.passed.foot_point && c.passed.all(), "{c:?}");
        assert!(c.t > c.t_prime);
    }

    #[test]
    fn a_theta_membership() {
        let v0 = UnitTangent::i_up();
        assert!(in_a_theta(v0, v0, 0.0, K1));
        let a = a_theta(0.3, 1.0).unwrap();
        assert!(in_a_theta(geodesic_flow(v0, 0.9 * a, K1), v0, 0.3, K1));
        assert!(!in_a_theta(geodesic_flow(v0, 1.1 * a, K1), v0, 0.3, K1));
        assert!(!in_a_theta(v0.rotated(0.5), v0, 0.3, K1));
    }

    #[test]
    fn axial_translation_contracts_cones() {
        let v0 = UnitTangent::i_up();
        let g = Isometry::translation_imaginary_axis(6.0);
        let s = check_cone_contraction(&g, v0, 0.1, 6.0, 1000, &constants(), K1).unwrap();
        assert!(s.passed(), "{s:?}");
        let s = check_cone_contraction(&g, v0, 0.0, 6.0, 11, &constants(), K1).unwrap();
        assert!(s.passed(), "{s:?}");
    }

    #[test]
    fn cone_check_needs_a_witness() {
        let g = Isometry::translation_imaginary_axis(6.0)
            .conjugate_by(&Isometry::rotation_about_i(1.0));
        let err = check_cone_contraction(&g, UnitTangent::i_up(), 0.05, 6.0, 10, &constants(), K1)
            .unwrap_err();
        assert_eq!(err, GeomError::NoWitness);
    }

    #[test]
    fn partner_element_contracts_cones() {
        let c = constants();
        for eps in [0.01, 0.05, 0.09] {
            let cg = synthesize_crossed_geodesic(6.0, 7.0, eps, CrossingMode::Partner, K1).unwrap();
            let r = construct_partner(&cg, &c).unwrap();
            let partner = cg.g2.inverse().compose(&cg.g1);
            let s =
                check_cone_contraction(&partner, cg.v0, 2.0 * eps, r.t_hat, 200, &c, K1).unwrap();
            assert!(s.passed(), "{eps}: {s:?}");
            let v = gamma_theta_witness(&partner, cg.v0, 2.0 * eps, r.t_hat, K1).unwrap();
            let b = check_length_bracket(&partner, v, cg.v0, 2.0 * eps, r.t_hat, &c, K1).unwrap();
            assert!(
                b.passed() && b.get("foot_length").unwrap().samples == 1,
                "{b:?}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partner_runs_are_shorter(t1 in 5.0..12.0f64, t2 in 5.0..12.0f64, eps in 0.001..0.098f64) {
            let cg = synthesize_crossed_geodesic(t1, t2, eps, CrossingMode::Partner, K1).unwrap();
            prop_assert!(cg.composition_residual() < 1e-10);
            let r = construct_partner(&cg, &constants()).unwrap();
            prop_assert!(r.t_prime < r.t && r.t_prime <= r.t_hat + 1e-9 && r.t_hat <= r.t + 1e-9);
            prop_assert!(r.passed.all(), "{:?}", r);
        }

        #[test]
        fn mirrored_crossing_gives_same_lengths(t1 in 5.0..12.0f64, t2 in 5.0..12.0f64, eps in 0.001..0.098f64) {
            let a = synthesize_crossed_geodesic_oriented(t1, t2, eps, CrossingMode::Partner, K1, 1.0).unwrap();
            let b = synthesize_crossed_geodesic_oriented(t1, t2, eps, CrossingMode::Partner, K1, -1.0).unwrap();
            let (ra, rb) = (construct_partner(&a, &constants()).unwrap(), construct_partner(&b, &constants()).unwrap());
            prop_assert!((ra.t_prime - rb.t_prime).abs() < 1e-9);
        }

        #[test]
        fn pseudo_lengths_do_not_exceed_loops(t1 in 5.0..12.0f64, t2 in 5.0..12.0f64, eps in 0.0..0.098f64) {
            let cg = synthesize_crossed_geodesic(t1, t2, eps, CrossingMode::Pseudo, K1).unwrap();
            let r = construct_pseudo_partner(&cg, &constants()).unwrap();
            prop_assert!(r.that1 <= t1 + 1e-9 && r.that2 <= t2 + 1e-9);
            prop_assert!(r.passed.all());
        }
    }
}
