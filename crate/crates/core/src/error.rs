use thiserror::Error;

/// Errors produced by gait construction, simulation, and analysis.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum WalkError {
    /// The switching-manifold quadratic has no real root at the requested ordinate.
    #[error("no real root on the switching manifold at Y = {y}: discriminant = {discriminant}")]
    NoRealRoot { y: f64, discriminant: f64 },

    /// Forward velocity too small to realize the required correction slope.
    #[error("degenerate height correction: |Xdot| = {xdot_abs} below threshold {threshold}")]
    DegenerateCorrection { xdot_abs: f64, threshold: f64 },

    /// A polynomial correction was requested on an empty or inverted interval.
    #[error("invalid interval for polynomial correction: start {start} not below end {end}")]
    InvalidInterval { start: f64, end: f64 },

    /// The periodic orbit meets the switching manifold tangentially.
    #[error("tangential exit: d/dt S_a = 0 at the periodic exit point")]
    TangentialExit,

    /// A denominator factor of the synchronization eigenvalue vanishes.
    #[error("degenerate gait: denominator factor of lambda_L vanishes (C = {c})")]
    DegenerateGait { c: f64 },

    /// Velocity sign conditions for the synchronization range are not met.
    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),

    /// The velocity-momentum constraint matrix is (near) singular.
    #[error("singular constraint matrix: |det M_XY| = {det_abs} at (X, Y) = ({x}, {y})")]
    SingularConstraint { det_abs: f64, x: f64, y: f64 },

    /// Integration reached the time horizon without crossing the manifold.
    #[error("no switching-manifold crossing reached before t_max = {t_max}")]
    NoSwitchReached { t_max: f64 },

    /// The integrator could not meet its error tolerance.
    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    /// Newton iteration on the periodicity conditions failed.
    #[error("boundary value solve did not converge: {iterations} iterations, residual {residual}")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The Newton Jacobian of the periodicity conditions is singular.
    #[error("singular Jacobian in the boundary value solve")]
    SingularJacobian,

    /// A multi-step simulation left the basin of the gait.
    #[error("walk diverged at step {step}: {cause}")]
    Diverged { step: usize, cause: String },
}

pub type Result<T> = std::result::Result<T, WalkError>;
