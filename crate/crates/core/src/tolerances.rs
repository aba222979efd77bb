//! Numerical tolerances shared by the library, its tests and the acceptance suite.

/// `|trace| - 2` must exceed this for an isometry to count as hyperbolic.
pub const HYPERBOLIC_TRACE_TOL: f64 = 1e-10;

/// Determinant drift allowed before renormalization is considered broken.
pub const DET_TOL: f64 = 1e-12;

/// Equality margin for the constant-curvature laws of cosines and sines.
pub const CONSTANT_CURVATURE_EQUALITY: f64 = 1e-9;

/// Tolerance for inequalities checked on the variable-curvature surface.
pub const ODE_TOLERANCE: f64 = 1e-6;

/// Right-angle hypothesis tolerance for the sine laws.
pub const RIGHT_ANGLE_TOL: f64 = 1e-6;

/// Residual allowed in Busemann cocycle and antisymmetry checks.
pub const BUSEMANN_TOL: f64 = 1e-9;

/// Relative slack on the visibility-angle Lipschitz constant.
pub const LIPSCHITZ_SLACK: f64 = 1e-6;

/// Tolerance for angle-valued inequalities (cones, angles at infinity).
pub const ANGLE_TOL: f64 = 1e-9;

/// Tolerance for orbit bound flags (partner, pseudo-partner, closing).
pub const ORBIT_TOL: f64 = 1e-9;

/// Residual allowed in the loop midpoint chain.
pub const MIDPOINT_CHAIN_TOL: f64 = 1e-9;

/// Sampling step for distance suprema along axes.
pub const SUP_SAMPLING_STEP: f64 = 0.05;

/// Foot points closer than this count as equal for the foot-point closing variant.
pub const FOOT_POINT_TOL: f64 = 1e-9;

/// Slope tolerance for log-log scaling fits.
pub const SLOPE_TOL: f64 = 0.05;

/// Safety factor applied to the grid supremum defining `D`.
pub const D_SAFETY_FACTOR: f64 = 1.1;

/// Default `t0` when the configuration does not provide one.
pub const DEFAULT_T0: f64 = 5.0;
