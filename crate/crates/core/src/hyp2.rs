//! Upper half-plane model of the hyperbolic plane with curvature `-kappa^2`.
//!
//! All geometry is computed in the curvature `-1` model; distances and flow
//! times are rescaled by `1/kappa`. Isometries are `PSL(2, R)` matrices.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::tolerances::HYPERBOLIC_TRACE_TOL;

/// Direction angle of a tangent pointing straight up.
pub const UP: f64 = FRAC_PI_2;

/// Below this `|cos(direction)|` a tangent is treated as vertical when computing endpoints.
const VERTICAL_SNAP: f64 = 1e-14;

/// Positive scale `kappa`; the curvature is `-kappa^2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CurvatureScale(f64);

impl CurvatureScale {
    pub const UNIT: Self = Self(1.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if kappa.is_finite() && kappa > 0.0 {
            Ok(Self(kappa))
        } else {
            Err(GeomError::DomainError(format!(
                "kappa must be positive, got {kappa}"
            )))
        }
    }

    pub fn unit() -> Self {
        Self(1.0)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointUHP {
    pub x: f64,
    pub y: f64,
}

impl PointUHP {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() && y > 0.0 {
            Ok(Self { x, y })
        } else {
            Err(GeomError::DomainError(format!(
                "({x}, {y}) is not in the upper half-plane"
            )))
        }
    }

    /// The point `i`.
    pub fn i() -> Self {
        Self { x: 0.0, y: 1.0 }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    fn from_complex(z: Complex64) -> Self {
        Self { x: z.re, y: z.im }
    }
}

impl fmt::Display for PointUHP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}i", self.x, self.y)
    }
}

/// A point of the boundary circle `R ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Finite(f64),
    Infinity,
}

/// Footpoint plus direction angle in `[0, 2π)`, measured conformally in the chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent {
    pub base: PointUHP,
    pub direction: f64,
}

impl UnitTangent {
    pub fn new(base: PointUHP, direction: f64) -> Self {
        Self {
            base,
            direction: normalize_angle(direction),
        }
    }

    /// The tangent at `i` pointing up.
    pub fn i_up() -> Self {
        Self::new(PointUHP::i(), UP)
    }

    /// The opposite tangent `-v`.
    pub fn flip(self) -> Self {
        self.rotated(PI)
    }

    /// Rotates the direction counterclockwise by `alpha`.
    pub fn rotated(self, alpha: f64) -> Self {
        Self::new(self.base, self.direction + alpha)
    }

    /// Orientation-preserving isometry taking the frame `(i, up)` to this tangent.
    pub fn frame(self) -> Isometry {
        let s = self.base.y.sqrt();
        let translate = Isometry::raw(s, self.base.x / s, 0.0, 1.0 / s);
        translate.compose(&Isometry::rotation_about_i(self.direction - UP))
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Unsigned angle in `[0, π]` between two direction angles.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Orientation-preserving isometry, a unit-determinant matrix identified with its negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Conjugacy type of an isometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsometryKind {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl Isometry {
    /// Builds an isometry from a matrix with positive determinant, scaling it to determinant 1.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.is_finite() && det > 0.0) {
            return Err(GeomError::DomainError(format!(
                "matrix determinant {det} is not positive"
            )));
        }
        Ok(Self::raw(a, b, c, d).renormalized())
    }

    fn raw(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::raw(1.0, 0.0, 0.0, 1.0)
    }

    /// `z ↦ e^{s} z`, translation by `s` (curvature `-1` units) along the imaginary axis.
    pub fn translation_imaginary_axis(s: f64) -> Self {
        Self::raw((s / 2.0).exp(), 0.0, 0.0, (-s / 2.0).exp())
    }

    /// Rotation about `i` turning tangent directions at `i` counterclockwise by `phi`.
    pub fn rotation_about_i(phi: f64) -> Self {
        let (s, c) = (phi / 2.0).sin_cos();
        Self::raw(c, s, -s, c)
    }

    /// Determinant via Kahan's fused-multiply-add scheme, accurate even for large entries.
    pub fn det(&self) -> f64 {
        let w = self.b * self.c;
        let err = (-self.b).mul_add(self.c, w);
        self.a.mul_add(self.d, -w) + err
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Rescales to unit determinant when the drift exceeds the determinant's own rounding noise.
    ///
    /// For large entries the computed determinant is dominated by entry rounding; rescaling by it
    /// would corrupt the trace, so such matrices are left alone.
    fn renormalized(self) -> Self {
        let det = self.det();
        let noise =
            64.0 * f64::EPSILON * (self.a.abs() * self.d.abs() + self.b.abs() * self.c.abs());
        if (det - 1.0).abs() <= noise {
            return self;
        }
        let s = det.sqrt();
        Self::raw(self.a / s, self.b / s, self.c / s, self.d / s)
    }

    /// Matrix product `self · other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        Self::raw(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
        .renormalized()
    }

    pub fn inverse(&self) -> Isometry {
        Self::raw(self.d, -self.b, -self.c, self.a)
    }

    /// `self^n` for any integer `n`.
    pub fn pow(&self, n: i32) -> Isometry {
        let base = if n < 0 { self.inverse() } else { *self };
        (0..n.unsigned_abs()).fold(Isometry::identity(), |acc, _| acc.compose(&base))
    }

    pub fn conjugate_by(&self, h: &Isometry) -> Isometry {
        h.compose(self).compose(&h.inverse())
    }

    pub fn kind(&self) -> IsometryKind {
        let excess = self.trace().abs() - 2.0;
        if excess > HYPERBOLIC_TRACE_TOL {
            IsometryKind::Hyperbolic
        } else if excess < -HYPERBOLIC_TRACE_TOL {
            IsometryKind::Elliptic
        } else {
            IsometryKind::Parabolic
        }
    }

    /// Projective equality of the matrix classes.
    pub fn approx_eq(&self, other: &Isometry, tol: f64) -> bool {
        let diff = |s: f64| {
            (self.a - s * other.a)
                .abs()
                .max((self.b - s * other.b).abs())
                .max((self.c - s * other.c).abs())
                .max((self.d - s * other.d).abs())
        };
        diff(1.0) <= tol || diff(-1.0) <= tol
    }

    pub fn apply_point(&self, p: PointUHP) -> PointUHP {
        let z = p.to_complex();
        let w = (self.a * z + self.b) / (self.c * z + self.d);
        PointUHP::from_complex(w)
    }

    pub fn apply_tangent(&self, v: UnitTangent) -> UnitTangent {
        let z = v.base.to_complex();
        let denom = self.c * z + self.d;
        let w = (self.a * z + self.b) / denom;
        UnitTangent::new(PointUHP::from_complex(w), v.direction - 2.0 * denom.arg())
    }

    pub fn apply_boundary(&self, xi: BoundaryPoint) -> BoundaryPoint {
        match xi {
            BoundaryPoint::Infinity => {
                if self.c == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite(self.a / self.c)
                }
            }
            BoundaryPoint::Finite(x) => {
                let denom = self.c * x + self.d;
                if denom == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite((self.a * x + self.b) / denom)
                }
            }
        }
    }

    /// Repelling and attracting fixed points of a hyperbolic isometry.
    pub fn fixed_points(&self) -> Result<(BoundaryPoint, BoundaryPoint)> {
        if self.kind() != IsometryKind::Hyperbolic {
            return Err(GeomError::NotHyperbolic {
                trace: self.trace().abs(),
            });
        }
        let tr = self.trace();
        let sigma = tr.signum();
        let s = (tr * tr - 4.0).sqrt();
        let amd = self.a - self.d;
        // Roots of c z^2 + (d - a) z - b = 0, each via the cancellation-free formula.
        let plus = amd + sigma * s;
        let minus = amd - sigma * s;
        let ratio = |num: f64, den: f64| {
            if den == 0.0 {
                BoundaryPoint::Infinity
            } else {
                BoundaryPoint::Finite(num / den)
            }
        };
        let attracting = if plus.abs() >= minus.abs() {
            ratio(plus, 2.0 * self.c)
        } else {
            ratio(-2.0 * self.b, minus)
        };
        let repelling = if minus.abs() >= plus.abs() {
            ratio(minus, 2.0 * self.c)
        } else {
            ratio(-2.0 * self.b, plus)
        };
        Ok((repelling, attracting))
    }
}

/// Oriented complete geodesic with a chosen time-0 frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicLine {
    pub start: BoundaryPoint,
    pub end: BoundaryPoint,
    pub base: UnitTangent,
}

impl GeodesicLine {
    /// Line from `start` to `end`, parametrized from the foot point of `i`.
    pub fn through_endpoints(start: BoundaryPoint, end: BoundaryPoint) -> Result<Self> {
        let normalizer = match (start, end) {
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => {
                return Err(GeomError::CoincidentBoundaryPoints)
            }
            (BoundaryPoint::Finite(u), BoundaryPoint::Infinity) => Isometry::raw(1.0, u, 0.0, 1.0),
            (BoundaryPoint::Infinity, BoundaryPoint::Finite(w)) => Isometry::raw(w, -1.0, 1.0, 0.0),
            (BoundaryPoint::Finite(u), BoundaryPoint::Finite(w)) => {
                if u == w {
                    return Err(GeomError::CoincidentBoundaryPoints);
                }
                let s = (w - u).signum();
                Isometry::new(w * s, u, s, 1.0)?
            }
        };
        let z = normalizer.inverse().apply_point(PointUHP::i()).to_complex();
        let base = normalizer.apply_tangent(UnitTangent::new(
            PointUHP {
                x: 0.0,
                y: z.norm(),
            },
            UP,
        ));
        Ok(Self { start, end, base })
    }

    /// The geodesic through `v`, parametrized so that time 0 is `v`.
    pub fn from_tangent(v: UnitTangent) -> Self {
        let (start, end) = endpoints(v);
        Self {
            start,
            end,
            base: v,
        }
    }

    pub fn tangent_at(&self, t: f64, kappa: CurvatureScale) -> UnitTangent {
        geodesic_flow(self.base, t, kappa)
    }

    pub fn point_at(&self, t: f64, kappa: CurvatureScale) -> PointUHP {
        self.tangent_at(t, kappa).base
    }

    /// Parameter of the orthogonal projection of `q` onto the line.
    pub fn foot_parameter(&self, q: PointUHP, kappa: CurvatureScale) -> f64 {
        let z = self.base.frame().inverse().apply_point(q).to_complex();
        z.norm().ln() / kappa.get()
    }

    /// Same line, re-based so that the old time `t` becomes time 0.
    pub fn reparametrized_at(&self, t: f64, kappa: CurvatureScale) -> Self {
        Self {
            base: self.tangent_at(t, kappa),
            ..*self
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            start: self.end,
            end: self.start,
            base: self.base.flip(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSegment {
    pub line: GeodesicLine,
    pub t_start: f64,
    pub t_end: f64,
}

impl GeodesicSegment {
    pub fn new(line: GeodesicLine, t_start: f64, t_end: f64) -> Result<Self> {
        if t_start <= t_end {
            Ok(Self {
                line,
                t_start,
                t_end,
            })
        } else {
            Err(GeomError::DomainError(format!(
                "segment [{t_start}, {t_end}] is reversed"
            )))
        }
    }

    /// The segment from `p` to `q`, parametrized by arclength from `p`.
    pub fn between(p: PointUHP, q: PointUHP, kappa: CurvatureScale) -> Result<Self> {
        let dir = direction_toward(p, q)?;
        let line = GeodesicLine::from_tangent(UnitTangent::new(p, dir));
        Self::new(line, 0.0, distance(p, q, kappa))
    }
}

pub fn distance(p: PointUHP, q: PointUHP, kappa: CurvatureScale) -> f64 {
    let chord = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
    2.0 * (chord / (2.0 * (p.y * q.y).sqrt())).asinh() / kappa.get()
}

pub fn translation_length(g: &Isometry, kappa: CurvatureScale) -> Result<f64> {
    match g.kind() {
        IsometryKind::Hyperbolic => Ok(2.0 * (g.trace().abs() / 2.0).acosh() / kappa.get()),
        _ => Err(GeomError::NotHyperbolic {
            trace: g.trace().abs(),
        }),
    }
}

/// Axis of a hyperbolic isometry, oriented in its translation direction.
pub fn axis(g: &Isometry, _kappa: CurvatureScale) -> Result<GeodesicLine> {
    let (repelling, attracting) = g.fixed_points()?;
    GeodesicLine::through_endpoints(repelling, attracting)
}

pub fn geodesic_flow(v: UnitTangent, t: f64, kappa: CurvatureScale) -> UnitTangent {
    if t == 0.0 {
        return v;
    }
    let moved = UnitTangent::new(
        PointUHP {
            x: 0.0,
            y: (kappa.get() * t).exp(),
        },
        UP,
    );
    v.frame().apply_tangent(moved)
}

/// The unique isometry mapping `src` to `dst`.
pub fn isometry_from_frames(src: UnitTangent, dst: UnitTangent) -> Isometry {
    dst.frame().compose(&src.frame().inverse())
}

/// Backward and forward endpoints `(v⁻, v⁺)` of the geodesic through `v`.
pub fn endpoints(v: UnitTangent) -> (BoundaryPoint, BoundaryPoint) {
    let (s, c) = v.direction.sin_cos();
    let (x, y) = (v.base.x, v.base.y);
    if c.abs() < VERTICAL_SNAP {
        return if s > 0.0 {
            (BoundaryPoint::Finite(x), BoundaryPoint::Infinity)
        } else {
            (BoundaryPoint::Infinity, BoundaryPoint::Finite(x))
        };
    }
    // Endpoints are x + y(sin ± 1)/cos; pick the form without cancellation.
    let forward = if s >= 0.0 {
        x + y * (1.0 + s) / c
    } else {
        x + y * c / (1.0 - s)
    };
    let backward = if s >= 0.0 {
        x - y * c / (1.0 + s)
    } else {
        x + y * (s - 1.0) / c
    };
    (
        BoundaryPoint::Finite(backward),
        BoundaryPoint::Finite(forward),
    )
}

/// Direction at `q` of the geodesic ray toward `xi`.
pub fn direction_to_boundary(q: PointUHP, xi: BoundaryPoint) -> f64 {
    match xi {
        BoundaryPoint::Infinity => UP,
        BoundaryPoint::Finite(x) => normalize_angle(UP + 2.0 * Complex64::new(q.x - x, q.y).arg()),
    }
}

/// Direction at `p` of the geodesic segment toward `q`.
pub fn direction_toward(p: PointUHP, q: PointUHP) -> Result<f64> {
    if p == q {
        return Err(GeomError::DomainError(
            "direction between coincident points".into(),
        ));
    }
    let w = Complex64::new((q.x - p.x) / p.y, q.y / p.y);
    let i = Complex64::i();
    let zeta = (w - i) / (w + i);
    Ok(normalize_angle(zeta.arg() + UP))
}

/// Busemann function `b_ξ(q, p)`, normalized to vanish at `p`.
pub fn busemann(xi: BoundaryPoint, q: PointUHP, p: PointUHP, kappa: CurvatureScale) -> f64 {
    let log_height = |z: PointUHP| match xi {
        BoundaryPoint::Infinity => z.y.ln(),
        BoundaryPoint::Finite(x) => z.y.ln() - ((z.x - x).powi(2) + z.y * z.y).ln(),
    };
    (log_height(p) - log_height(q)) / kappa.get()
}

/// Angle at `q` between the rays toward `xi` and `eta`.
pub fn visibility_angle(
    q: PointUHP,
    xi: BoundaryPoint,
    eta: BoundaryPoint,
    _kappa: CurvatureScale,
) -> Result<f64> {
    if xi == eta {
        return Err(GeomError::CoincidentBoundaryPoints);
    }
    Ok(angle_between(
        direction_to_boundary(q, xi),
        direction_to_boundary(q, eta),
    ))
}

/// `max_{|t| ≤ 1} d(c_v(t), c_w(t))`, attained at `t = ±1` by convexity.
pub fn d1_metric(v: UnitTangent, w: UnitTangent, kappa: CurvatureScale) -> f64 {
    [-1.0, 1.0]
        .iter()
        .map(|&t| {
            distance(
                geodesic_flow(v, t, kappa).base,
                geodesic_flow(w, t, kappa).base,
                kappa,
            )
        })
        .fold(0.0, f64::max)
}

/// Hopf coordinates `(v⁻, v⁺, b_{v⁻}(πv, p0))`.
pub fn hopf(
    v: UnitTangent,
    p0: PointUHP,
    kappa: CurvatureScale,
) -> (BoundaryPoint, BoundaryPoint, f64) {
    let (minus, plus) = endpoints(v);
    (minus, plus, busemann(minus, v.base, p0, kappa))
}

pub fn distance_to_segment(q: PointUHP, seg: &GeodesicSegment, kappa: CurvatureScale) -> f64 {
    let t = seg
        .line
        .foot_parameter(q, kappa)
        .clamp(seg.t_start, seg.t_end);
    distance(q, seg.line.point_at(t, kappa), kappa)
}
