//! Named constants and scalar bound functions for pinched curvature `-κ₂² ≤ K ≤ -κ₁²`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::tolerances::D_SAFETY_FACTOR;

/// Number of grid points used for the supremum defining `D`.
const D_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl CurvatureBounds {
    pub fn new(kappa1: f64, kappa2: f64) -> Result<Self> {
        if !(kappa1.is_finite() && kappa2.is_finite() && kappa1 > 0.0 && kappa1 <= kappa2) {
            return Err(GeomError::DomainError(format!(
                "need 0 < kappa1 <= kappa2, got ({kappa1}, {kappa2})"
            )));
        }
        Ok(Self { kappa1, kappa2 })
    }

    pub fn constant(kappa: f64) -> Result<Self> {
        Self::new(kappa, kappa)
    }

    /// `κ₂/κ₁`.
    pub fn ratio(&self) -> f64 {
        self.kappa2 / self.kappa1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub kappa1: f64,
    pub kappa2: f64,
    pub theta0: f64,
    /// `θ₀` as written in the proof of the cone contraction, `(π/8)κ₁/(κ₂+2κ₁)`.
    pub theta0_alt: f64,
    pub eps0: f64,
    pub delta0: f64,
    pub c_main: f64,
    pub c_intro: f64,
    pub c_tilde: f64,
    pub rho_coeff: f64,
    pub partner_len_coeff: f64,
    pub partner_dist_coeff: f64,
    pub pseudo_len_coeff: f64,
    pub pseudo_dist_coeff: f64,
    pub pseudo_gap_coeff: f64,
    pub t0: f64,
    pub inj_radius: f64,
    pub b_inj: f64,
    pub d_num: f64,
}

impl BoundConstants {
    pub fn bounds(&self) -> CurvatureBounds {
        CurvatureBounds {
            kappa1: self.kappa1,
            kappa2: self.kappa2,
        }
    }

    /// `ρ(θ) = 2(κ₂/κ₁ + 1)θ`.
    pub fn rho(&self, theta: f64) -> f64 {
        self.rho_coeff * theta
    }

    /// `(name, value)` pairs in a fixed order, for report headers.
    pub fn table(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("theta0", self.theta0),
            ("theta0_alt", self.theta0_alt),
            ("eps0", self.eps0),
            ("delta0", self.delta0),
            ("C_main", self.c_main),
            ("C_intro", self.c_intro),
            ("C_tilde", self.c_tilde),
            ("rho_coeff", self.rho_coeff),
            ("partner_len_coeff", self.partner_len_coeff),
            ("partner_dist_coeff", self.partner_dist_coeff),
            ("pseudo_len_coeff", self.pseudo_len_coeff),
            ("pseudo_dist_coeff", self.pseudo_dist_coeff),
            ("pseudo_gap_coeff", self.pseudo_gap_coeff),
            ("t0", self.t0),
            ("inj_radius", self.inj_radius),
            ("b_inj", self.b_inj),
            ("D_num", self.d_num),
        ]
    }
}

/// `a(θ) = (1/κ₁) arcosh(1/cos θ)`, evaluated as `asinh(tan θ)/κ₁`.
pub fn a_theta(theta: f64, kappa1: f64) -> Result<f64> {
    if !(0.0..FRAC_PI_2).contains(&theta) || kappa1 <= 0.0 {
        return Err(GeomError::DomainError(format!(
            "a(theta) needs 0 <= theta < pi/2, got {theta}"
        )));
    }
    Ok(theta.tan().asinh() / kappa1)
}

/// `f(δ) = 2 arcsin(sinh(κ₁δ)/sinh(κ₁(1−δ)))` on `(0, 1/2]`.
pub fn f_delta(delta: f64, kappa1: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 0.5) || kappa1 <= 0.0 {
        return Err(GeomError::DomainError(format!(
            "f(delta) needs 0 < delta <= 1/2, got {delta}"
        )));
    }
    let ratio = (kappa1 * delta).sinh() / (kappa1 * (1.0 - delta)).sinh();
    Ok(2.0 * ratio.min(1.0).asin())
}

/// `b = 2(cosh(κρ) − 1)`.
pub fn injectivity_b(kappa: f64, rho: f64) -> f64 {
    let s = (kappa * rho / 2.0).sinh();
    4.0 * s * s
}

/// Grid supremum of `(cosh(κ₂ a(ρ(2ε))) − 1)/ε²` over `ε ∈ (0, ε₀]`, without safety margin.
pub fn d_grid_sup(cb: CurvatureBounds) -> f64 {
    let eps0 = eps0(cb);
    let rho_coeff = 2.0 * (cb.ratio() + 1.0);
    (1..=D_GRID_POINTS)
        .map(|k| {
            let eps = eps0 * k as f64 / D_GRID_POINTS as f64;
            d_ratio(eps, rho_coeff, cb)
        })
        .fold(0.0, f64::max)
}

/// `(cosh(κ₂ a(ρ(2ε))) − 1)/ε²`.
pub fn d_ratio(eps: f64, rho_coeff: f64, cb: CurvatureBounds) -> f64 {
    let a = (rho_coeff * 2.0 * eps).tan().asinh() / cb.kappa1;
    let s = (cb.kappa2 * a / 2.0).sinh();
    2.0 * s * s / (eps * eps)
}

fn eps0(cb: CurvatureBounds) -> f64 {
    PI / 16.0 * cb.kappa1 / (cb.kappa1 + cb.kappa2)
}

pub fn make_constants(cb: CurvatureBounds, t0: f64, inj_radius: f64) -> Result<BoundConstants> {
    if !(t0 > 1.0 && t0.is_finite()) {
        return Err(GeomError::DomainError(format!(
            "t0 must exceed 1, got {t0}"
        )));
    }
    if !(inj_radius > 0.0 && inj_radius.is_finite()) {
        return Err(GeomError::DomainError(format!(
            "injectivity radius must be positive, got {inj_radius}"
        )));
    }
    let (k1, k2) = (cb.kappa1, cb.kappa2);
    let q = cb.ratio();
    let theta0 = PI / 8.0 * k1 / (k2 + k1);
    let big = (2.0 * PI).max(k1);
    Ok(BoundConstants {
        kappa1: k1,
        kappa2: k2,
        theta0,
        theta0_alt: PI / 8.0 * k1 / (k2 + 2.0 * k1),
        eps0: eps0(cb),
        delta0: (theta0 / big).min(PI / (2.0 * k1)).min(0.5 - 1e-9),
        c_main: 2.0 / k1 * (2.0 * q + 3.0) * big,
        c_intro: 2.0 / k1 * (2.0 * q + 3.0) * (2.0 * PI),
        c_tilde: 4.0 * PI / k1 * (q + 1.0),
        rho_coeff: 2.0 * (q + 1.0),
        partner_len_coeff: 18.0 / k1 + 16.0 * k2 / (k1 * k1),
        partner_dist_coeff: 25.0 / k1 + 24.0 * k2 / (k1 * k1),
        pseudo_len_coeff: 8.0 * (q + 1.0) / k1,
        pseudo_dist_coeff: 12.0 * (q + 1.0) / k1,
        pseudo_gap_coeff: 32.0 * (q + 1.0) / k1,
        t0,
        inj_radius,
        b_inj: injectivity_b(k2, 2.0 * inj_radius),
        d_num: D_SAFETY_FACTOR * d_grid_sup(cb),
    })
}

/// Shortest loop with closing angle at most `ε`: `(1/κ) arcosh(b/(1−cos ε) + 1)`.
pub fn loop_length_lower_bound(eps: f64, kappa: f64, rho: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < PI) {
        return Err(GeomError::DomainError(format!(
            "loop angle must lie in (0, pi), got {eps}"
        )));
    }
    let b = injectivity_b(kappa, rho);
    Ok((b / one_minus_cos(eps) + 1.0).acosh() / kappa)
}

fn one_minus_cos(x: f64) -> f64 {
    let s = (x / 2.0).sin();
    2.0 * s * s
}

/// Bracket `[lower, upper]` for `T − T′` with `T = T₁ + T₂`.
pub fn tprime_bounds(
    t1: f64,
    t2: f64,
    eps: f64,
    cb: CurvatureBounds,
    b: f64,
) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < PI) || b <= 0.0 {
        return Err(GeomError::DomainError(format!(
            "need eps in (0, pi) and b > 0, got ({eps}, {b})"
        )));
    }
    let needed = b / one_minus_cos(eps) + 1.0;
    for (name, t) in [("T1", t1), ("T2", t2)] {
        if (cb.kappa2 * t).cosh() < needed * (1.0 - 1e-12) {
            return Err(GeomError::HypothesisViolated(format!(
                "{name} = {t} is shorter than the loop lower bound {}",
                needed.acosh() / cb.kappa2
            )));
        }
    }
    let lower_arg = 1.0 - tprime_lower_coeff(b) * eps * eps;
    let upper_arg = 1.0 - eps * eps / 4.0 - (eps / (SQRT_2 * b)).powf(4.0 * cb.kappa1 / cb.kappa2);
    if lower_arg <= 0.0 || upper_arg <= 0.0 {
        return Err(GeomError::DomainError(format!(
            "log argument not positive (lower {lower_arg}, upper {upper_arg})"
        )));
    }
    Ok((-lower_arg.ln() / cb.kappa2, -upper_arg.ln() / cb.kappa1))
}

/// `(1/π²)(1 − 8(b+2)²/((b+2)⁴+16))`, the `ε²` coefficient inside the lower logarithm.
pub fn tprime_lower_coeff(b: f64) -> f64 {
    let s = (b + 2.0) * (b + 2.0);
    (1.0 - 8.0 * s / (s * s + 16.0)) / (PI * PI)
}

/// Leading Taylor coefficient `C₁` of the lower bound: `T − T′ ≳ C₁ε²`.
pub fn tprime_lower_taylor_coeff(cb: CurvatureBounds, b: f64) -> f64 {
    tprime_lower_coeff(b) / cb.kappa2
}
