//! A rotationally symmetric Hadamard surface `dr² + f(r)² dθ²` with curvature
//! pinched in `[-κ₂², -κ₁²]`, and the geodesic machinery needed to build
//! genuinely variable-curvature triangles on it.
//!
//! Positions are compared in the chart `(r cos θ, r sin θ)`, the exponential
//! chart at the pole. Tangent directions are angles `ψ` measured from `∂r`
//! toward `∂θ`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::CurvatureBounds;
use crate::comparison::{ComparisonGeometry, TriangleSample, TriangleSource};
use crate::error::{GeomError, Result};
use crate::hyp2::angle_between;

/// Radius covered by [`build_surface`].
pub const DEFAULT_TABLE_RADIUS: f64 = 10.0;

/// Geodesic steps are this multiple of the table step.
const GEODESIC_STEP_FACTOR: f64 = 4.0;

/// Largest angular advance `h·θ'` allowed in one substep.
const MAX_ANGULAR_STEP: f64 = 0.0025;

/// Chart miss accepted by the shooting solver before it stops refining.
const SHOOT_RESIDUAL: f64 = 1e-12;

/// Endpoint error allowed for a converged shot, in surface distance.
const SHOOT_ENDPOINT_TOL: f64 = 1e-7;

const SHOOT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub kappa1: f64,
    pub kappa2: f64,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl CurvatureProfile {
    pub fn new(kappa1: f64, kappa2: f64, r_lo: f64, r_hi: f64) -> Result<Self> {
        CurvatureBounds::new(kappa1, kappa2)?;
        if !(r_lo >= 0.0 && r_hi > r_lo && r_hi.is_finite()) {
            return Err(GeomError::DomainError(format!(
                "transition radii ({r_lo}, {r_hi}) invalid"
            )));
        }
        Ok(Self {
            kappa1,
            kappa2,
            r_lo,
            r_hi,
        })
    }

    /// Quintic smoothstep from 0 below `r_lo` to 1 above `r_hi`.
    pub fn smoothstep(&self, r: f64) -> f64 {
        let x = ((r - self.r_lo) / (self.r_hi - self.r_lo)).clamp(0.0, 1.0);
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }

    pub fn curvature(&self, r: f64) -> f64 {
        let (a, b) = (self.kappa1 * self.kappa1, self.kappa2 * self.kappa2);
        -b + (b - a) * self.smoothstep(r)
    }
}

/// Warping function `f` with `f'' = -K f`, `f(0) = 0`, `f'(0) = 1`, tabulated on a uniform grid.
#[derive(Debug, Clone)]
pub struct WarpTable {
    profile: CurvatureProfile,
    step: f64,
    f: Vec<f64>,
    fp: Vec<f64>,
    fpp: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub r: f64,
    pub theta: f64,
}

impl SurfacePoint {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite() && theta.is_finite()) {
            return Err(GeomError::DomainError(format!(
                "invalid polar point ({r}, {theta})"
            )));
        }
        Ok(if r == 0.0 {
            Self::pole()
        } else {
            Self { r, theta }
        })
    }

    pub fn pole() -> Self {
        Self { r: 0.0, theta: 0.0 }
    }

    pub fn chart(self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.r * c, self.r * s]
    }
}

/// Unit tangent at `base`; at the pole `psi` is the absolute polar angle of the ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTangent {
    pub base: SurfacePoint,
    pub psi: f64,
}

impl SurfaceTangent {
    pub fn flip(self) -> Self {
        Self {
            base: self.base,
            psi: self.psi + PI,
        }
    }

    pub fn rotated(self, alpha: f64) -> Self {
        Self {
            base: self.base,
            psi: self.psi + alpha,
        }
    }
}

/// A geodesic segment found by shooting: starts at `start`, arrives as `end` after `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGeodesic {
    pub start: SurfaceTangent,
    pub end: SurfaceTangent,
    pub length: f64,
}

/// Phase-space state `(r, θ, p_r)` with the Clairaut constant `L = f sin ψ` kept aside.
#[derive(Debug, Clone, Copy)]
struct State {
    r: f64,
    theta: f64,
    pr: f64,
}

/// Nearest approach of a geodesic ray to a target point, measured in the chart.
#[derive(Debug, Clone, Copy)]
struct Approach {
    t: f64,
    miss: f64,
    /// `+1` when the target lies to the left of the ray at the approach point.
    side: f64,
    state: State,
}

impl Approach {
    fn signed_miss(&self) -> f64 {
        self.side * self.miss
    }
}

pub fn build_surface(profile: CurvatureProfile, step: f64) -> Result<WarpTable> {
    WarpTable::build(profile, step, DEFAULT_TABLE_RADIUS)
}

impl WarpTable {
    pub fn build(profile: CurvatureProfile, step: f64, r_max: f64) -> Result<Self> {
        let limit = 1e-3 * 1f64.min(1.0 / profile.kappa2);
        if !(step > 0.0 && step <= limit * (1.0 + 1e-12)) {
            return Err(GeomError::DomainError(format!(
                "step {step} exceeds {limit}"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(GeomError::DomainError(format!(
                "table radius {r_max} invalid"
            )));
        }
        let (lo, hi) = (-profile.kappa2.powi(2), -profile.kappa1.powi(2));
        let n = (r_max / step).ceil() as usize;
        let mut f = Vec::with_capacity(n + 1);
        let mut fp = Vec::with_capacity(n + 1);
        let mut fpp = Vec::with_capacity(n + 1);
        let (mut y, mut dy) = (0.0f64, 1.0f64);
        for k in 0..=n {
            let r = k as f64 * step;
            let curv = profile.curvature(r);
            if !(curv >= lo - 1e-15 && curv <= hi + 1e-15) {
                return Err(GeomError::ProfileOutOfRange { r });
            }
            f.push(y);
            fp.push(dy);
            fpp.push(-curv * y);
            // RK4 on (f, f')' = (f', -K f).
            let kk = |r: f64| -profile.curvature(r);
            let (k1y, k1d) = (dy, kk(r) * y);
            let (k2y, k2d) = (
                dy + 0.5 * step * k1d,
                kk(r + 0.5 * step) * (y + 0.5 * step * k1y),
            );
            let (k3y, k3d) = (
                dy + 0.5 * step * k2d,
                kk(r + 0.5 * step) * (y + 0.5 * step * k2y),
            );
            let (k4y, k4d) = (dy + step * k3d, kk(r + step) * (y + step * k3y));
            y += step / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            dy += step / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        }
        Ok(Self {
            profile,
            step,
            f,
            fp,
            fpp,
        })
    }

    pub fn profile(&self) -> CurvatureProfile {
        self.profile
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn r_max(&self) -> f64 {
        (self.f.len() - 1) as f64 * self.step
    }

    /// Geodesic integration step.
    pub fn geodesic_step(&self) -> f64 {
        GEODESIC_STEP_FACTOR * self.step
    }

    /// `(f(r), f'(r))` by quintic Hermite interpolation of the tabulated `f, f', f''`.
    pub fn warp(&self, r: f64) -> Result<(f64, f64)> {
        if !(r >= 0.0 && r <= self.r_max()) {
            return Err(GeomError::OutOfTable { r });
        }
        let k = ((r / self.step) as usize).min(self.f.len() - 2);
        let h = self.step;
        let t = r / h - k as f64;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let basis = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            0.5 * (t3 - 2.0 * t4 + t5),
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        ];
        let dbasis = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        ];
        let coeffs = [
            self.f[k],
            h * self.fp[k],
            h * h * self.fpp[k],
            h * h * self.fpp[k + 1],
            h * self.fp[k + 1],
            self.f[k + 1],
        ];
        let f = coeffs.iter().zip(basis).map(|(c, b)| c * b).sum();
        let fp = coeffs.iter().zip(dbasis).map(|(c, b)| c * b).sum::<f64>() / h;
        Ok((f, fp))
    }

    /// Curvature bounds read off the table as `K = -f''/f` at the grid nodes.
    pub fn extracted_bounds(&self) -> Result<CurvatureBounds> {
        let (mut kmin, mut kmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for (f, fpp) in self.f.iter().zip(&self.fpp).skip(1) {
            let k = -fpp / f;
            kmin = kmin.min(k);
            kmax = kmax.max(k);
        }
        CurvatureBounds::new((-kmax).sqrt(), (-kmin).sqrt())
    }

    /// Worst relative margin of `sinh(κ₁r)/κ₁ ≤ f(r) ≤ sinh(κ₂r)/κ₂` over the grid.
    pub fn jacobi_comparison_margin(&self) -> f64 {
        let (k1, k2) = (self.profile.kappa1, self.profile.kappa2);
        self.f
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &f)| {
                let r = k as f64 * self.step;
                let (lo, hi) = ((k1 * r).sinh() / k1, (k2 * r).sinh() / k2);
                ((f - lo) / lo).min((hi - f) / hi)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimum of `f'` over the grid; at least 1 since `f'' ≥ 0`.
    pub fn min_derivative(&self) -> f64 {
        self.fp.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn clairaut(&self, v: SurfaceTangent) -> Result<(State, f64)> {
        if v.base.r == 0.0 {
            return Ok((
                State {
                    r: 0.0,
                    theta: v.psi,
                    pr: 1.0,
                },
                0.0,
            ));
        }
        let (f, _) = self.warp(v.base.r)?;
        let (s, c) = v.psi.sin_cos();
        let l = if s.abs() < 1e-15 { 0.0 } else { f * s };
        Ok((
            State {
                r: v.base.r,
                theta: v.base.theta,
                pr: c,
            },
            l,
        ))
    }

    fn to_tangent(&self, s: State, l: f64) -> Result<SurfaceTangent> {
        if s.r == 0.0 {
            return Ok(SurfaceTangent {
                base: SurfacePoint::pole(),
                psi: s.theta,
            });
        }
        let (f, _) = self.warp(s.r)?;
        Ok(SurfaceTangent {
            base: SurfacePoint {
                r: s.r,
                theta: s.theta,
            },
            psi: (l / f).atan2(s.pr),
        })
    }

    fn rhs(&self, s: State, l: f64) -> Result<State> {
        let (f, fp) = self.warp(s.r)?;
        let w = l / (f * f);
        Ok(State {
            r: s.pr,
            theta: w,
            pr: l * w * fp / f,
        })
    }

    fn rk4(&self, s: State, l: f64, h: f64) -> Result<State> {
        let add = |a: State, k: State, c: f64| State {
            r: a.r + c * k.r,
            theta: a.theta + c * k.theta,
            pr: a.pr + c * k.pr,
        };
        let k1 = self.rhs(s, l)?;
        let k2 = self.rhs(add(s, k1, 0.5 * h), l)?;
        let k3 = self.rhs(add(s, k2, 0.5 * h), l)?;
        let k4 = self.rhs(add(s, k3, h), l)?;
        Ok(State {
            r: s.r + h / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
            theta: s.theta + h / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
            pr: s.pr + h / 6.0 * (k1.pr + 2.0 * k2.pr + 2.0 * k3.pr + k4.pr),
        })
    }

    /// Advances by `dt ≥ 0`: radial geodesics in closed form, others by RK4 with
    /// substeps that keep the angular advance small near the pole.
    fn propagate(&self, s: State, l: f64, dt: f64) -> Result<State> {
        if l == 0.0 {
            let r = s.r + s.pr * dt;
            let out = if r >= 0.0 {
                State { r, ..s }
            } else {
                State {
                    r: -r,
                    theta: s.theta + PI,
                    pr: -s.pr,
                }
            };
            if out.r > self.r_max() {
                return Err(GeomError::OutOfTable { r: out.r });
            }
            return Ok(out);
        }
        let (f, _) = self.warp(s.r)?;
        let n = ((dt * l.abs() / (f * f)) / MAX_ANGULAR_STEP)
            .ceil()
            .max(1.0) as usize;
        let h = dt / n as f64;
        let mut cur = s;
        for _ in 0..n {
            cur = self.rk4(cur, l, h)?;
            if cur.r <= 0.0 {
                return Err(GeomError::DomainError(
                    "non-radial geodesic reached the pole".into(),
                ));
            }
        }
        Ok(cur)
    }

    /// Image of `v` under the geodesic flow for time `t` (negative times run backward).
    pub fn geodesic_integrate(&self, v: SurfaceTangent, t: f64) -> Result<SurfaceTangent> {
        if t < 0.0 {
            return Ok(self.geodesic_integrate(v.flip(), -t)?.flip());
        }
        let (mut s, l) = self.clairaut(v)?;
        let h = self.geodesic_step();
        let n = (t / h).floor() as usize;
        for _ in 0..n {
            s = self.propagate(s, l, h)?;
        }
        s = self.propagate(s, l, t - n as f64 * h)?;
        self.to_tangent(s, l)
    }

    /// Speed `p_r² + L²/f²` after time `t`; equals 1 for an exact integrator.
    pub fn speed_after(&self, v: SurfaceTangent, t: f64) -> Result<f64> {
        let (mut s, l) = self.clairaut(v)?;
        let h = self.geodesic_step();
        let n = (t / h).floor() as usize;
        for _ in 0..n {
            s = self.propagate(s, l, h)?;
        }
        s = self.propagate(s, l, t - n as f64 * h)?;
        let (f, _) = self.warp(s.r)?;
        Ok(s.pr * s.pr + (l / f).powi(2))
    }

    fn chart_kinematics(&self, s: State, l: f64) -> Result<([f64; 2], [f64; 2])> {
        let (sin, cos) = s.theta.sin_cos();
        let w = if l == 0.0 {
            0.0
        } else {
            l / self.warp(s.r)?.0.powi(2)
        };
        let pos = [s.r * cos, s.r * sin];
        let vel = [s.pr * cos - s.r * sin * w, s.pr * sin + s.r * cos * w];
        Ok((pos, vel))
    }

    /// Closest chart approach of the ray along `v` to `target` over `[0, t_max]`.
    fn nearest_approach(
        &self,
        v: SurfaceTangent,
        t_max: f64,
        target: SurfacePoint,
    ) -> Result<Approach> {
        let (s0, l) = self.clairaut(v)?;
        let x = target.chart();
        let probe = |s: State| -> Result<(f64, f64, f64)> {
            let (p, u) = self.chart_kinematics(s, l)?;
            let d = [x[0] - p[0], x[1] - p[1]];
            Ok((
                d[0] * u[0] + d[1] * u[1],
                d[0].hypot(d[1]),
                u[0] * d[1] - u[1] * d[0],
            ))
        };
        let candidate = |t: f64, s: State| -> Result<Approach> {
            let (_, miss, cross) = probe(s)?;
            Ok(Approach {
                t,
                miss,
                side: if cross >= 0.0 { 1.0 } else { -1.0 },
                state: s,
            })
        };
        let mut best = candidate(0.0, s0)?;
        let h = self.geodesic_step();
        let n = (t_max / h).ceil() as usize;
        let mut s = s0;
        let (mut g, _, _) = probe(s)?;
        for k in 0..n {
            let next = self.propagate(s, l, h)?;
            let (g_next, _, _) = probe(next)?;
            if g > 0.0 && g_next <= 0.0 {
                // Illinois iteration on the substep length.
                let (mut a, mut b, mut ga, mut gb) = (0.0, h, g, g_next);
                let mut side = 0;
                let mut tau = b;
                for _ in 0..60 {
                    tau = (a * gb - b * ga) / (gb - ga);
                    let gt = probe(self.propagate(s, l, tau)?)?.0;
                    if gt == 0.0 || (b - a) < 1e-15 {
                        break;
                    }
                    if gt > 0.0 {
                        a = tau;
                        ga = gt;
                        if side == -1 {
                            gb *= 0.5;
                        }
                        side = -1;
                    } else {
                        b = tau;
                        gb = gt;
                        if side == 1 {
                            ga *= 0.5;
                        }
                        side = 1;
                    }
                }
                let c = candidate(k as f64 * h + tau, self.propagate(s, l, tau)?)?;
                if c.miss < best.miss {
                    best = c;
                }
            }
            s = next;
            g = g_next;
        }
        if g > 0.0 {
            let c = candidate(n as f64 * h, s)?;
            if c.miss < best.miss {
                best = c;
            }
        }
        Ok(best)
    }

    /// Surface length of the chart straight segment, an upper bound for the distance.
    pub fn chart_length_bound(&self, p: SurfacePoint, q: SurfacePoint) -> Result<f64> {
        let (a, b) = (p.chart(), q.chart());
        let d = [b[0] - a[0], b[1] - a[1]];
        let n = 64;
        let mut total = 0.0;
        for k in 0..=n {
            let u = k as f64 / n as f64;
            let x = [a[0] + u * d[0], a[1] + u * d[1]];
            let r = x[0].hypot(x[1]);
            let speed = if r < 1e-300 {
                d[0].hypot(d[1])
            } else {
                let radial = (x[0] * d[0] + x[1] * d[1]) / r;
                let angular = (x[0] * d[1] - x[1] * d[0]) / (r * r);
                let (f, _) = self.warp(r)?;
                radial.hypot(f * angular)
            };
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            total += w * speed;
        }
        Ok(total / (3.0 * n as f64))
    }

    /// Surface direction at `p` of the chart straight line toward `q`.
    fn chart_direction(&self, p: SurfacePoint, q: SurfacePoint) -> Result<f64> {
        let (a, b) = (p.chart(), q.chart());
        let d = [b[0] - a[0], b[1] - a[1]];
        if p.r == 0.0 {
            return Ok(d[1].atan2(d[0]));
        }
        let (s, c) = p.theta.sin_cos();
        let (f, _) = self.warp(p.r)?;
        Ok((f / p.r * (-s * d[0] + c * d[1])).atan2(c * d[0] + s * d[1]))
    }

    fn metric_scale(&self, p: SurfacePoint) -> Result<f64> {
        if p.r == 0.0 {
            return Ok(1.0);
        }
        Ok((self.warp(p.r)?.0 / p.r).max(1.0))
    }

    /// The geodesic segment from `p` to `q`.
    ///
    /// The initial angle is bracketed around the chart direction, then refined by
    /// Illinois regula falsi on the signed miss at the nearest approach.
    pub fn connect_by_shooting(&self, p: SurfacePoint, q: SurfacePoint) -> Result<SurfaceGeodesic> {
        if p == q {
            return Err(GeomError::DomainError(
                "shooting between coincident points".into(),
            ));
        }
        let t_max = 1.05 * self.chart_length_bound(p, q)? + 4.0 * self.geodesic_step();
        let shoot = |psi: f64| self.nearest_approach(SurfaceTangent { base: p, psi }, t_max, q);
        let psi0 = self.chart_direction(p, q)?;
        let a0 = shoot(psi0)?;
        let (mut a, mut fa, mut best) = (psi0, a0.signed_miss(), (psi0, a0));
        if a0.miss > SHOOT_RESIDUAL {
            // Rotating counterclockwise moves the ray toward a target on its left.
            let dir = a0.side;
            let mut width = 0.02;
            let (mut b, mut fb);
            loop {
                b = psi0 + dir * width;
                let ab = shoot(b)?;
                fb = ab.signed_miss();
                if ab.miss < best.1.miss {
                    best = (b, ab);
                }
                if fb.signum() != fa.signum() || ab.miss <= SHOOT_RESIDUAL {
                    break;
                }
                a = b;
                fa = fb;
                width *= 2.0;
                if width > PI {
                    return Err(GeomError::NoConvergence {
                        iterations: 0,
                        residual: best.1.miss,
                    });
                }
            }
            let mut last = 0;
            for _ in 0..SHOOT_MAX_ITER {
                if best.1.miss <= SHOOT_RESIDUAL || (a - b).abs() < 1e-15 {
                    break;
                }
                let mut c = (a * fb - b * fa) / (fb - fa);
                if !(c - a.min(b) > 0.0 && a.max(b) - c > 0.0) {
                    c = 0.5 * (a + b);
                }
                let ac = shoot(c)?;
                let fc = ac.signed_miss();
                if ac.miss < best.1.miss {
                    best = (c, ac);
                }
                if fc.signum() == fb.signum() {
                    b = c;
                    fb = fc;
                    if last == 1 {
                        fa *= 0.5;
                    }
                    last = 1;
                } else {
                    a = c;
                    fa = fc;
                    if last == -1 {
                        fb *= 0.5;
                    }
                    last = -1;
                }
            }
        }
        let (psi, hit) = best;
        let err = hit.miss * self.metric_scale(q)?;
        if err > SHOOT_ENDPOINT_TOL {
            return Err(GeomError::NoConvergence {
                iterations: SHOOT_MAX_ITER,
                residual: err,
            });
        }
        let start = SurfaceTangent { base: p, psi };
        let (_, l) = self.clairaut(start)?;
        let end = self.to_tangent(hit.state, l)?;
        Ok(SurfaceGeodesic {
            start,
            end: SurfaceTangent {
                base: q,
                psi: end.psi,
            },
            length: hit.t,
        })
    }

    pub fn distance(&self, p: SurfacePoint, q: SurfacePoint) -> Result<f64> {
        if p == q {
            return Ok(0.0);
        }
        Ok(self.connect_by_shooting(p, q)?.length)
    }

    /// Signed miss of `x` against the full geodesic line through `v`, oriented along `v`,
    /// and the distance along the line to the approach point.
    fn side_of_line(&self, v: SurfaceTangent, t_max: f64, x: SurfacePoint) -> Result<(f64, f64)> {
        let fwd = self.nearest_approach(v, t_max, x)?;
        let bwd = self.nearest_approach(v.flip(), t_max, x)?;
        Ok(if fwd.miss <= bwd.miss {
            (fwd.signed_miss(), fwd.t)
        } else {
            (-bwd.signed_miss(), bwd.t)
        })
    }

    /// Distance from `x` to the segment `seg`, locating the foot by sliding the
    /// perpendicular geodesic along the segment until it passes through `x`.
    pub fn distance_to_geodesic_segment(
        &self,
        x: SurfacePoint,
        seg: &SurfaceGeodesic,
    ) -> Result<f64> {
        let endpoint = self
            .distance(x, seg.start.base)?
            .min(self.distance(x, seg.end.base)?);
        if endpoint == 0.0 {
            return Ok(0.0);
        }
        let t_max = endpoint + 4.0 * self.geodesic_step();
        let normal_at = |s: f64| -> Result<SurfaceTangent> {
            Ok(self.geodesic_integrate(seg.start, s)?.rotated(FRAC_PI_2))
        };
        let residual =
            |s: f64| -> Result<(f64, f64)> { self.side_of_line(normal_at(s)?, t_max, x) };
        let (mut a, mut b) = (0.0, seg.length);
        let (mut fa, _) = residual(a)?;
        let (mut fb, _) = residual(b)?;
        if fa == 0.0 || fb == 0.0 || fa.signum() == fb.signum() {
            return Ok(endpoint);
        }
        let mut best = (f64::INFINITY, endpoint);
        let mut last = 0;
        for _ in 0..SHOOT_MAX_ITER {
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let (fc, t) = residual(c)?;
            if fc.abs() < best.0 {
                best = (fc.abs(), t);
            }
            if fc.abs() <= SHOOT_RESIDUAL || b - a < 1e-14 {
                break;
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if last == 1 {
                    fa *= 0.5;
                }
                last = 1;
            } else {
                a = c;
                fa = fc;
                if last == -1 {
                    fb *= 0.5;
                }
                last = -1;
            }
        }
        if best.0 * self.metric_scale(x)? > SHOOT_ENDPOINT_TOL {
            return Err(GeomError::NoConvergence {
                iterations: SHOOT_MAX_ITER,
                residual: best.0,
            });
        }
        Ok(best.1.min(endpoint))
    }

    /// Point at perpendicular distance `r` over parameter `t` of the reference geodesic,
    /// the polar axis `θ ∈ {0, π}` parametrized by signed distance from the pole.
    pub fn perpendicular_point(&self, r: f64, t: f64) -> Result<SurfacePoint> {
        let foot = if t > 0.0 {
            SurfaceTangent {
                base: SurfacePoint { r: t, theta: 0.0 },
                psi: FRAC_PI_2,
            }
        } else if t < 0.0 {
            SurfaceTangent {
                base: SurfacePoint { r: -t, theta: PI },
                psi: -FRAC_PI_2,
            }
        } else {
            SurfaceTangent {
                base: SurfacePoint::pole(),
                psi: FRAC_PI_2,
            }
        };
        Ok(self.geodesic_integrate(foot, r)?.base)
    }

    fn exp(&self, base: SurfacePoint, psi: f64, t: f64) -> Result<SurfaceTangent> {
        self.geodesic_integrate(SurfaceTangent { base, psi }, t)
    }

    /// Samples one triangle of the requested kind inside `region`, resampling on degenerate
    /// draws and solver failures.
    pub fn sample_triangle_with<R: Rng>(
        &self,
        rng: &mut R,
        region: &SamplingBox,
        kind: TriangleKind,
    ) -> Result<SurfaceTriangle> {
        const MAX_ATTEMPTS: usize = 200;
        let mut last_err = GeomError::EmptyInput;
        for _ in 0..MAX_ATTEMPTS {
            match self.try_triangle(rng, region, kind) {
                Ok(Some(t)) => return Ok(t),
                Ok(None) => {}
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    fn try_triangle<R: Rng>(
        &self,
        rng: &mut R,
        region: &SamplingBox,
        kind: TriangleKind,
    ) -> Result<Option<SurfaceTriangle>> {
        let cb = self.extracted_bounds()?;
        let source = TriangleSource::Variable {
            kappa1: cb.kappa1,
            kappa2: cb.kappa2,
        };
        let point = |rng: &mut R| SurfacePoint {
            r: rng.gen_range(region.r_min..region.r_max),
            theta: rng.gen_range(region.theta_min..region.theta_max),
        };
        let p3 = point(rng);
        let (p1, p2, dir31, dir32, a3, l1, l2) = match kind {
            TriangleKind::General => {
                let (p1, p2) = (point(rng), point(rng));
                let s31 = self.connect_by_shooting(p3, p1)?;
                let s32 = self.connect_by_shooting(p3, p2)?;
                let a3 = angle_between(s31.start.psi, s32.start.psi);
                (p1, p2, s31.end.psi, s32.end.psi, a3, s32.length, s31.length)
            }
            TriangleKind::Right | TriangleKind::Obtuse { .. } => {
                let a3 = match kind {
                    TriangleKind::Obtuse { eps } => PI - eps * rng.gen_range(0.05..1.0),
                    _ => FRAC_PI_2,
                };
                let psi = rng.gen_range(-PI..PI);
                let (l1, l2) = (
                    rng.gen_range(region.side_min..region.side_max),
                    rng.gen_range(region.side_min..region.side_max),
                );
                let to2 = self.exp(p3, psi, l1)?;
                let to1 = self.exp(p3, psi + a3, l2)?;
                (to1.base, to2.base, to1.psi, to2.psi, a3, l1, l2)
            }
        };
        if [p1, p2].iter().any(|p| p.r < 0.1 * region.r_min) {
            return Ok(None);
        }
        let s12 = self.connect_by_shooting(p1, p2)?;
        let l3 = s12.length;
        // Directions back toward p3 are the reversed arrivals of the p3 shots.
        let a1 = angle_between(s12.start.psi, dir31 + PI);
        let a2 = angle_between(s12.end.psi + PI, dir32 + PI);
        let min_angle = 1e-3;
        if [a1, a2].iter().any(|&a| a < min_angle)
            || matches!(kind, TriangleKind::General) && a3 < min_angle
        {
            return Ok(None);
        }
        if a3 >= PI {
            return Ok(None);
        }
        match TriangleSample::new([l1, l2, l3], [a1, a2, a3], source) {
            Ok(sample) => Ok(Some(SurfaceTriangle {
                sample,
                vertices: [p1, p2, p3],
            })),
            Err(_) => Ok(None),
        }
    }

    /// Deterministic triangle for `seed`.
    pub fn sample_triangle(
        &self,
        seed: u64,
        region: &SamplingBox,
        kind: TriangleKind,
    ) -> Result<TriangleSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_triangle_with(&mut rng, region, kind)?.sample)
    }
}

/// How the triangle's vertices are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TriangleKind {
    /// Three random vertices joined by shooting.
    General,
    /// Two sides from a right hinge at the third vertex.
    Right,
    /// Hinge angle in `[π − eps, π)`.
    Obtuse { eps: f64 },
}

/// Region of polar coordinates for vertices, and the side range for hinge constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub side_min: f64,
    pub side_max: f64,
}

impl Default for SamplingBox {
    /// Straddles the transition annulus of the default profile.
    fn default() -> Self {
        Self {
            r_min: 0.5,
            r_max: 3.0,
            theta_min: 0.0,
            theta_max: 1.2,
            side_min: 0.3,
            side_max: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTriangle {
    pub sample: TriangleSample,
    /// `vertices[i]` carries angle `a(i+1)`.
    pub vertices: [SurfacePoint; 3],
}

impl ComparisonGeometry for WarpTable {
    type Point = SurfacePoint;

    fn distance(&self, p: SurfacePoint, q: SurfacePoint) -> Result<f64> {
        WarpTable::distance(self, p, q)
    }

    fn point_along(&self, p: SurfacePoint, q: SurfacePoint, frac: f64) -> Result<SurfacePoint> {
        if p == q {
            return Ok(p);
        }
        let seg = self.connect_by_shooting(p, q)?;
        Ok(self.geodesic_integrate(seg.start, frac * seg.length)?.base)
    }

    fn distance_to_segment(
        &self,
        x: SurfacePoint,
        p: SurfacePoint,
        q: SurfacePoint,
    ) -> Result<f64> {
        if p == q {
            return WarpTable::distance(self, x, p);
        }
        self.distance_to_geodesic_segment(x, &self.connect_by_shooting(p, q)?)
    }

    fn perpendicular_pair(
        &self,
        r1: f64,
        t1: f64,
        r2: f64,
        t2: f64,
    ) -> Result<(SurfacePoint, SurfacePoint)> {
        Ok((
            self.perpendicular_point(r1, t1)?,
            self.perpendicular_point(r2, t2)?,
        ))
    }

    fn crosses_reference(&self, p: SurfacePoint, q: SurfacePoint) -> Result<bool> {
        // The reflection θ ↦ −θ fixes the polar axis, so its complementary half-planes are convex.
        Ok(p.theta.sin() * q.theta.sin() < 0.0)
    }
}
