//! CoM-height virtual constraint `z = f(X, Y)`.
//!
//! The nominal surface is `z0 - a S_a(X, Y)`: flat for `a = 0` (the 3D LIP
//! limit), bulging upward inside the switching ellipse for `a > 0` so that
//! the mass descends into the support exchange. A per-step cubic correction
//! in `X` restores continuity of the vertical CoM velocity after the
//! transition; it is active on `[x_start, x_end)` and vanishes identically
//! past its end, so the constraint is C1 across `x_end` and untouched at
//! the exit.

use crate::error::{Result, WalkError};
use crate::linalg::solve_dense;
use crate::manifold::SwitchingManifold;
use serde::{Deserialize, Serialize};

/// Near-zero forward velocity guard for the correction slope.
pub const EPS_FORWARD_VELOCITY: f64 = 1e-6;

/// Cubic in `X`, active on `[x_start, x_end)`, identically zero elsewhere.
/// Value and slope vanish at `x_end`; the value vanishes at `x_start`
/// while the slope there realizes the velocity mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCorrection {
    pub coeffs: [f64; 4],
    pub x_start: f64,
    pub x_end: f64,
}

impl CubicCorrection {
    /// Fit the cubic with `z(x_start) = 0`, `z'(x_start) = slope`,
    /// `z(x_end) = 0`, `z'(x_end) = 0`.
    pub fn fit(x_start: f64, slope: f64, x_end: f64) -> Result<Self> {
        if x_start >= x_end || !x_start.is_finite() || !x_end.is_finite() {
            return Err(WalkError::InvalidInterval {
                start: x_start,
                end: x_end,
            });
        }
        let row_val = |x: f64| [1.0, x, x * x, x * x * x];
        let row_der = |x: f64| [0.0, 1.0, 2.0 * x, 3.0 * x * x];
        let mut a = Vec::with_capacity(16);
        a.extend_from_slice(&row_val(x_start));
        a.extend_from_slice(&row_der(x_start));
        a.extend_from_slice(&row_val(x_end));
        a.extend_from_slice(&row_der(x_end));
        let mut b = vec![0.0, slope, 0.0, 0.0];
        let c = solve_dense(&mut a, &mut b, 4)?;
        Ok(Self {
            coeffs: [c[0], c[1], c[2], c[3]],
            x_start,
            x_end,
        })
    }

    /// Value and first derivative at `x`; exactly `(0, 0)` outside the
    /// activation window.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if x >= self.x_end || x < self.x_start {
            return (0.0, 0.0);
        }
        let [c0, c1, c2, c3] = self.coeffs;
        let v = c0 + x * (c1 + x * (c2 + x * c3));
        let d = c1 + x * (2.0 * c2 + x * 3.0 * c3);
        (v, d)
    }

    /// Second derivative at `x`; zero outside the activation window.
    pub fn second_derivative(&self, x: f64) -> f64 {
        if x >= self.x_end || x < self.x_start {
            return 0.0;
        }
        2.0 * self.coeffs[2] + 6.0 * self.coeffs[3] * x
    }
}

/// The full CoM-height constraint for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComSurface {
    /// Nominal CoM height (m), > 0.
    pub z0: f64,
    /// Oscillation amplitude parameter (m), >= 0.
    pub a: f64,
    pub manifold: SwitchingManifold,
    pub correction: Option<CubicCorrection>,
}

impl ComSurface {
    pub fn new(z0: f64, a: f64, manifold: SwitchingManifold) -> Self {
        assert!(z0 > 0.0, "nominal CoM height must be positive, got {z0}");
        assert!(
            a >= 0.0,
            "oscillation amplitude must be nonnegative, got {a}"
        );
        Self {
            z0,
            a,
            manifold,
            correction: None,
        }
    }

    /// CoM height `z0 - a S_a(X, Y) + z_cor(X)`.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let zc = self.correction.map_or(0.0, |c| c.eval(x).0);
        self.z0 - self.a * self.manifold.sa(x, y) + zc
    }

    /// Exact partial derivatives `(df/dX, df/dY)`.
    pub fn partials(&self, x: f64, y: f64) -> (f64, f64) {
        let (gx, gy) = self.manifold.sa_gradient(x, y);
        let dz = self.correction.map_or(0.0, |c| c.eval(x).1);
        (-self.a * gx + dz, -self.a * gy)
    }

    /// Vertical CoM velocity implied by the constraint at the given state.
    pub fn vertical_velocity(&self, x: f64, y: f64, xdot: f64, ydot: f64) -> f64 {
        let (fx, fy) = self.partials(x, y);
        fx * xdot + fy * ydot
    }

    /// Exact second partials `(fxx, fxy, fyy)`; the quadratic field has a
    /// constant Hessian, the correction adds its own curvature in `X`.
    pub fn second_partials(&self, x: f64, _y: f64) -> (f64, f64, f64) {
        let zc2 = self.correction.map_or(0.0, |c| c.second_derivative(x));
        (-2.0 * self.a + zc2, 0.0, -2.0 * self.a * self.manifold.c)
    }

    /// Attach the per-step correction: the corrected surface's vertical
    /// velocity at the post-impact state `(x, y, xdot, ydot)` equals
    /// `zdot_carry`, and the correction fades out with zero value and slope
    /// at `x_end`.
    ///
    /// Fails with `DegenerateCorrection` when the forward velocity is too
    /// small to realize the slope, and `InvalidInterval` when the start
    /// abscissa is not below `x_end`.
    pub fn with_correction(
        &self,
        x: f64,
        y: f64,
        xdot: f64,
        ydot: f64,
        zdot_carry: f64,
        x_end: f64,
    ) -> Result<ComSurface> {
        if xdot.abs() <= EPS_FORWARD_VELOCITY {
            return Err(WalkError::DegenerateCorrection {
                xdot_abs: xdot.abs(),
                threshold: EPS_FORWARD_VELOCITY,
            });
        }
        let nominal = ComSurface {
            correction: None,
            ..self.clone()
        };
        let zdot_nominal = nominal.vertical_velocity(x, y, xdot, ydot);
        let slope = (zdot_carry - zdot_nominal) / xdot;
        let correction = CubicCorrection::fit(x, slope, x_end)?;
        Ok(ComSurface {
            correction: Some(correction),
            ..self.clone()
        })
    }
}
