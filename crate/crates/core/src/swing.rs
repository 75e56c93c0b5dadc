//! Swing-foot virtual constraints.
//!
//! Near the end of the step the Cartesian swing-foot position follows
//!
//! ```text
//! X_se = (1 - nu_X S_a)(-X0 + X)     Y_se = (1 - nu_Y S_a)(Y0 + Y)
//! Z_se = nu_z S_a
//! ```
//!
//! so that on the switching set (`S_a = 0`) the foot lands exactly at
//! `(-X0 + X, Y0 + Y, 0)`; combined with the support relabeling this makes
//! every step start at `(X0, Y0)` regardless of where the previous one
//! ended. At the beginning of the step, blend polynomials in `X` are added
//! so the composite position and velocity match the foot that was just in
//! support (position carried over, velocity zero).

use crate::error::{Result, WalkError};
use crate::linalg::solve_dense;
use crate::manifold::SwitchingManifold;
use serde::{Deserialize, Serialize};

/// Offset of the horizontal blend boundary past mid-step: `Xl = 0.4 + (X0+Xf)/2`.
pub const BLEND_BOUNDARY_OFFSET: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingParams {
    /// Horizontal shaping gains, chosen so the foot lands with zero
    /// horizontal velocity on the periodic gait.
    pub nu_x: f64,
    pub nu_y: f64,
    /// Height gain (m, negative); peak swing height is `-nu_z * min S_a`.
    pub nu_z: f64,
    /// Horizontal blend boundary `Xl = 0.4 + (X0 + Xf)/2`.
    pub x_blend: f64,
    pub manifold: SwitchingManifold,
}

impl SwingParams {
    pub fn new(nu_x: f64, nu_y: f64, nu_z: f64, manifold: SwitchingManifold) -> Self {
        assert!(nu_z < 0.0, "height gain nu_z must be negative, got {nu_z}");
        let x_blend = BLEND_BOUNDARY_OFFSET + (manifold.x0 + manifold.xf) / 2.0;
        Self {
            nu_x,
            nu_y,
            nu_z,
            x_blend,
            manifold,
        }
    }

    /// Mid-step abscissa `(X0 + Xf)/2`, the boundary of the height blend.
    pub fn x_mid(&self) -> f64 {
        (self.manifold.x0 + self.manifold.xf) / 2.0
    }

    /// End-of-step base constraint values.
    pub fn base_position(&self, x: f64, y: f64) -> [f64; 3] {
        let m = &self.manifold;
        let sa = m.sa(x, y);
        [
            (1.0 - self.nu_x * sa) * (-m.x0 + x),
            (1.0 - self.nu_y * sa) * (m.y0 + y),
            self.nu_z * sa,
        ]
    }

    /// Partial derivatives of the base constraint wrt `(X, Y)`, rows are
    /// `(Xs, Ys, zs)`.
    pub fn base_jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 3] {
        let m = &self.manifold;
        let sa = m.sa(x, y);
        let (gx, gy) = m.sa_gradient(x, y);
        let (ex, ey) = (-m.x0 + x, m.y0 + y);
        [
            [
                -self.nu_x * gx * ex + (1.0 - self.nu_x * sa),
                -self.nu_x * gy * ex,
            ],
            [
                -self.nu_y * gx * ey,
                -self.nu_y * gy * ey + (1.0 - self.nu_y * sa),
            ],
            [self.nu_z * gx, self.nu_z * gy],
        ]
    }

    /// Second partials `(hxx, hxy, hyy)` of each base component; `S_a` has
    /// the constant Hessian `diag(2, 2C)`.
    pub fn base_hessians(&self, x: f64, y: f64) -> [[f64; 3]; 3] {
        let m = &self.manifold;
        let (gx, gy) = m.sa_gradient(x, y);
        let (sxx, syy) = (2.0, 2.0 * m.c);
        let (ex, ey) = (-m.x0 + x, m.y0 + y);
        [
            [
                -self.nu_x * (sxx * ex + 2.0 * gx),
                -self.nu_x * gy,
                -self.nu_x * syy * ex,
            ],
            [
                -self.nu_y * sxx * ey,
                -self.nu_y * gx,
                -self.nu_y * (syy * ey + 2.0 * gy),
            ],
            [self.nu_z * sxx, 0.0, self.nu_z * syy],
        ]
    }
}

/// Solve the shaping gains from the periodic exit state: with
/// `Sdot = dS_a/dt` at the exit, `nu_X = Xdot_f / Sdot`, `nu_Y = Ydot_f / Sdot`
/// zero the horizontal foot velocity at touchdown.
pub fn solve_nu(manifold: &SwitchingManifold, xdot_f: f64, ydot_f: f64) -> Result<(f64, f64)> {
    let sdot = manifold.sa_dot(manifold.xf, manifold.yf, xdot_f, ydot_f);
    if sdot.abs() < 1e-12 {
        return Err(WalkError::TangentialExit);
    }
    Ok((xdot_f / sdot, ydot_f / sdot))
}

/// Beginning-of-step blend polynomials: quintics in `X` for the horizontal
/// components (value, slope and curvature all vanish at `x_blend`) and a
/// quartic for the height (value and slope vanish at mid-step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendPolynomials {
    pub px: [f64; 6],
    pub py: [f64; 6],
    pub pz: [f64; 5],
    pub x_start: f64,
    pub x_blend: f64,
    pub x_mid: f64,
}

fn vandermonde_row(x: f64, degree: usize, derivative: usize) -> Vec<f64> {
    let mut row = vec![0.0; degree + 1];
    for (k, slot) in row.iter_mut().enumerate() {
        if k < derivative {
            continue;
        }
        let mut coef = 1.0;
        for j in 0..derivative {
            coef *= (k - j) as f64;
        }
        *slot = coef * x.powi((k - derivative) as i32);
    }
    row
}

/// Fit a polynomial of the given degree with prescribed value and first
/// `conds.len() - 1` derivatives at two abscissae. `conds` lists
/// `(abscissa, derivative order, value)` rows.
fn fit_poly(degree: usize, conds: &[(f64, usize, f64)]) -> Result<Vec<f64>> {
    let n = degree + 1;
    debug_assert_eq!(conds.len(), n);
    let mut a = Vec::with_capacity(n * n);
    let mut b = Vec::with_capacity(n);
    for &(x, d, v) in conds {
        a.extend_from_slice(&vandermonde_row(x, degree, d));
        b.push(v);
    }
    solve_dense(&mut a, &mut b, n)
}

fn poly_eval(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in coeffs.iter().rev() {
        d = d * x + v;
        v = v * x + c;
    }
    (v, d)
}

impl BlendPolynomials {
    /// No blending: identically zero polynomials.
    pub fn none(params: &SwingParams) -> Self {
        Self {
            px: [0.0; 6],
            py: [0.0; 6],
            pz: [0.0; 5],
            x_start: params.manifold.x0,
            x_blend: params.x_blend,
            x_mid: params.x_mid(),
        }
    }

    /// Build the blends for a step starting at `(x, y)` with CoM velocities
    /// `(xdot, ydot)` and accelerations `(xddot, yddot)`, the previous
    /// stance foot sitting at `swing_start` (horizontal, normalized; its
    /// height, velocity and acceleration are zero since it was planted).
    #[allow(clippy::too_many_arguments)]
    pub fn for_step(
        params: &SwingParams,
        x: f64,
        y: f64,
        xdot: f64,
        ydot: f64,
        xddot: f64,
        yddot: f64,
        swing_start: (f64, f64),
    ) -> Result<Self> {
        if x >= params.x_blend || !x.is_finite() {
            return Err(WalkError::InvalidInterval {
                start: x,
                end: params.x_blend,
            });
        }
        let x_mid = params.x_mid();
        if x >= x_mid {
            return Err(WalkError::InvalidInterval {
                start: x,
                end: x_mid,
            });
        }
        if xdot.abs() < crate::surface::EPS_FORWARD_VELOCITY {
            return Err(WalkError::DegenerateCorrection {
                xdot_abs: xdot.abs(),
                threshold: crate::surface::EPS_FORWARD_VELOCITY,
            });
        }

        let base = params.base_position(x, y);
        let jac = params.base_jacobian(x, y);
        let hess = params.base_hessians(x, y);
        // composite velocity (d base/dt) + P'(X) Xdot and composite
        // acceleration must both vanish at the start: the foot comes out of
        // support at rest
        let mut slope = [0.0; 3];
        let mut curv = [0.0; 3];
        for i in 0..3 {
            let rate = jac[i][0] * xdot + jac[i][1] * ydot;
            let acc = hess[i][0] * xdot * xdot
                + 2.0 * hess[i][1] * xdot * ydot
                + hess[i][2] * ydot * ydot
                + jac[i][0] * xddot
                + jac[i][1] * yddot;
            slope[i] = -rate / xdot;
            curv[i] = -(acc + slope[i] * xddot) / (xdot * xdot);
        }

        let xb = params.x_blend;
        let px = fit_poly(
            5,
            &[
                (x, 0, swing_start.0 - base[0]),
                (x, 1, slope[0]),
                (x, 2, curv[0]),
                (xb, 0, 0.0),
                (xb, 1, 0.0),
                (xb, 2, 0.0),
            ],
        )?;
        let py = fit_poly(
            5,
            &[
                (x, 0, swing_start.1 - base[1]),
                (x, 1, slope[1]),
                (x, 2, curv[1]),
                (xb, 0, 0.0),
                (xb, 1, 0.0),
                (xb, 2, 0.0),
            ],
        )?;
        let pz = fit_poly(
            4,
            &[
                (x, 0, -base[2]),
                (x, 1, slope[2]),
                (x, 2, curv[2]),
                (x_mid, 0, 0.0),
                (x_mid, 1, 0.0),
            ],
        )?;

        Ok(Self {
            px: px.try_into().unwrap(),
            py: py.try_into().unwrap(),
            pz: pz.try_into().unwrap(),
            x_start: x,
            x_blend: xb,
            x_mid,
        })
    }

    fn horizontal(&self, x: f64) -> ([f64; 2], [f64; 2]) {
        if x >= self.x_blend {
            return ([0.0; 2], [0.0; 2]);
        }
        let (vx, dx) = poly_eval(&self.px, x);
        let (vy, dy) = poly_eval(&self.py, x);
        ([vx, vy], [dx, dy])
    }

    fn height(&self, x: f64) -> (f64, f64) {
        if x >= self.x_mid {
            return (0.0, 0.0);
        }
        poly_eval(&self.pz, x)
    }
}

/// Complete swing-foot constraint for one step: base terms plus blends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingConstraint {
    pub params: SwingParams,
    pub blends: BlendPolynomials,
}

impl SwingConstraint {
    pub fn new(params: SwingParams, blends: BlendPolynomials) -> Self {
        Self { params, blends }
    }

    /// Swing-foot Cartesian position `(Xs, Ys, zs)` at the free configuration.
    pub fn position(&self, x: f64, y: f64) -> [f64; 3] {
        let mut p = self.params.base_position(x, y);
        let (h, _) = self.blends.horizontal(x);
        let (z, _) = self.blends.height(x);
        p[0] += h[0];
        p[1] += h[1];
        p[2] += z;
        p
    }

    /// Swing-foot Cartesian velocity by the chain rule.
    pub fn velocity(&self, x: f64, y: f64, xdot: f64, ydot: f64) -> [f64; 3] {
        let jac = self.params.base_jacobian(x, y);
        let (_, hd) = self.blends.horizontal(x);
        let (_, zd) = self.blends.height(x);
        [
            (jac[0][0] + hd[0]) * xdot + jac[0][1] * ydot,
            (jac[1][0] + hd[1]) * xdot + jac[1][1] * ydot,
            (jac[2][0] + zd) * xdot + jac[2][1] * ydot,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lip::{periodic_velocities, LipParams};

    fn lip_setup() -> (SwingParams, f64, f64) {
        let m = SwitchingManifold::symmetric(1.2);
        let p = LipParams::standard(0.7);
        let (xd0, yd0) = periodic_velocities(0.6, &p);
        // exit velocities of the periodic gait
        let (nu_x, nu_y) = solve_nu(&m, xd0, -yd0).unwrap();
        (SwingParams::new(nu_x, nu_y, -0.18, m), xd0, yd0)
    }

    /// Flat-gait accelerations: `Xddot = omega^2 X`, `Yddot = omega^2 Y`.
    fn lip_acc(x: f64, y: f64) -> (f64, f64) {
        let w2 = LipParams::standard(0.7).omega_sq();
        (w2 * x, w2 * y)
    }

    fn blends_at_start(sp: &SwingParams, xd0: f64, yd0: f64) -> BlendPolynomials {
        let m = sp.manifold;
        let (ax, ay) = lip_acc(m.x0, m.y0);
        BlendPolynomials::for_step(sp, m.x0, m.y0, xd0, yd0, ax, ay, (-1.0, 1.0)).unwrap()
    }

    #[test]
    fn landing_values_on_manifold() {
        let (sp, _, _) = lip_setup();
        let c = SwingConstraint::new(sp, BlendPolynomials::none(&sp));
        let m = &sp.manifold;
        // past the blend boundary, on the switching set
        let y = 0.48;
        let x = m.x_on_manifold(y).unwrap();
        assert!(x > sp.x_blend);
        let p = c.position(x, y);
        assert!((p[0] - (-m.x0 + x)).abs() < 1e-14);
        assert!((p[1] - (m.y0 + y)).abs() < 1e-14);
        assert!(p[2].abs() < 1e-14);
    }

    #[test]
    fn start_position_with_blends() {
        let (sp, xd0, yd0) = lip_setup();
        let m = sp.manifold;
        let blends = blends_at_start(&sp, xd0, yd0);
        let c = SwingConstraint::new(sp, blends);
        let p = c.position(m.x0, m.y0);
        assert!((p[0] + 1.0).abs() < 1e-12, "Xs start {}", p[0]);
        assert!((p[1] - 1.0).abs() < 1e-12, "Ys start {}", p[1]);
        assert!(p[2].abs() < 1e-12, "zs start {}", p[2]);
    }

    #[test]
    fn start_velocity_is_zero() {
        let (sp, xd0, yd0) = lip_setup();
        let m = sp.manifold;
        let blends = blends_at_start(&sp, xd0, yd0);
        let c = SwingConstraint::new(sp, blends);
        let v = c.velocity(m.x0, m.y0, xd0, yd0);
        for (i, vi) in v.iter().enumerate() {
            assert!(vi.abs() < 1e-10, "component {i}: {vi}");
        }
    }

    #[test]
    fn exit_velocity_is_zero_horizontally() {
        // The defining property of nu_X, nu_Y at the periodic exit.
        let (sp, xd0, yd0) = lip_setup();
        let m = sp.manifold;
        let c = SwingConstraint::new(sp, BlendPolynomials::none(&sp));
        let v = c.velocity(m.xf, m.yf, xd0, -yd0);
        assert!(v[0].abs() < 1e-10, "Xs exit velocity {}", v[0]);
        assert!(v[1].abs() < 1e-10, "Ys exit velocity {}", v[1]);
        // vertical landing velocity is negative for a transversal exit
        assert!(v[2] < 0.0, "zs exit velocity {}", v[2]);
    }

    #[test]
    fn nu_scales_inversely_with_crossing_speed() {
        let m = SwitchingManifold::symmetric(1.2);
        let (nx1, ny1) = solve_nu(&m, 2.0, 1.4).unwrap();
        let (nx2, ny2) = solve_nu(&m, 4.0, 2.8).unwrap();
        // doubling the exit velocity doubles Sdot, halving... the ratio stays:
        // nu = v / Sdot(v) is homogeneous of degree 0 in v, so scale Sdot alone
        let sdot = m.sa_dot(m.xf, m.yf, 2.0, 1.4);
        assert!((nx1 - 2.0 / sdot).abs() < 1e-15);
        assert!((ny1 - 1.4 / sdot).abs() < 1e-15);
        assert!((nx2 - nx1).abs() < 1e-15, "degree-0 homogeneity");
        assert!((ny2 - ny1).abs() < 1e-15);
    }

    #[test]
    fn transversal_exit_for_unit_shape() {
        // the circle-shaped manifold of the T = 0.6 gait is crossed
        // transversally, so finite gains exist
        let m = SwitchingManifold::symmetric(1.0);
        let p = LipParams::standard(0.7);
        let (xd0, yd0) = periodic_velocities(0.6, &p);
        let (nu_x, nu_y) = solve_nu(&m, xd0, -yd0).unwrap();
        assert!(nu_x.is_finite() && nu_y.is_finite());
        assert!(m.sa_dot(m.xf, m.yf, xd0, -yd0) > 0.0);
    }

    #[test]
    fn tangential_exit_detected() {
        let m = SwitchingManifold::symmetric(1.0);
        // velocity along the exit tangent has Sdot = 0
        let (tx, ty) = m.exit_tangent();
        assert!(matches!(
            solve_nu(&m, tx, ty),
            Err(WalkError::TangentialExit)
        ));
    }

    #[test]
    fn blend_continuity_at_boundary() {
        let (sp, xd0, yd0) = lip_setup();
        let blends = blends_at_start(&sp, xd0, yd0);
        // quintic and its first two derivatives vanish at x_blend, so the
        // composite is C2 there against the identically-zero extension
        let poly_second = |c: &[f64], x: f64| {
            c.iter()
                .enumerate()
                .skip(2)
                .map(|(k, &ck)| (k * (k - 1)) as f64 * ck * x.powi(k as i32 - 2))
                .sum::<f64>()
        };
        let xb = sp.x_blend;
        for poly in [&blends.px[..], &blends.py[..]] {
            let (v, d) = poly_eval(poly, xb);
            assert!(v.abs() < 1e-11 && d.abs() < 1e-10, "value {v}, slope {d}");
            assert!(poly_second(poly, xb).abs() < 1e-9);
        }
        // height blend is C1 at mid-step
        let (vz, dz) = poly_eval(&blends.pz, blends.x_mid);
        assert!(vz.abs() < 1e-11 && dz.abs() < 1e-10);
    }

    #[test]
    fn homogeneous_conditions_give_zero_blend() {
        // When the base constraint already satisfies the start conditions the
        // fitted polynomials are identically zero.
        let p = fit_poly(
            5,
            &[
                (-0.5, 0, 0.0),
                (-0.5, 1, 0.0),
                (-0.5, 2, 0.0),
                (0.4, 0, 0.0),
                (0.4, 1, 0.0),
                (0.4, 2, 0.0),
            ],
        )
        .unwrap();
        for c in p {
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn start_past_blend_boundary_errors() {
        let (sp, xd0, yd0) = lip_setup();
        let err = BlendPolynomials::for_step(
            &sp,
            sp.x_blend + 0.01,
            0.5,
            xd0,
            yd0,
            0.0,
            0.0,
            (-1.0, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, WalkError::InvalidInterval { .. }));
    }
}
