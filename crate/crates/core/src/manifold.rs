//! Ellipse-shaped switching manifold in the normalized horizontal plane.
//!
//! The scalar field
//!
//! ```text
//! S_a(X, Y) = (X - Xa)^2 + C Y^2 - ((X0 - Xa)^2 + C Y0^2)
//! ```
//!
//! is negative strictly inside the ellipse and zero on the switching set,
//! where the support exchange is triggered. The center abscissa `Xa` is
//! chosen so that both the step start `(X0, Y0)` and the step end
//! `(Xf, Yf)` lie exactly on the zero level set.

use crate::error::{Result, WalkError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingManifold {
    /// Ellipse shape parameter (ratio of the axes), dimensionless, > 0.
    pub c: f64,
    /// Normalized start position of the CoM.
    pub x0: f64,
    pub y0: f64,
    /// Normalized end position of the CoM.
    pub xf: f64,
    pub yf: f64,
    /// Ellipse center abscissa, stored at construction so that the
    /// endpoint identities S_a(X0,Y0) = S_a(Xf,Yf) = 0 hold exactly.
    pub xa: f64,
}

impl SwitchingManifold {
    /// Build the manifold from the shape parameter and the CoM shifts
    /// `(D_X, D_Y)`. Start and end positions follow the normalization
    /// `Xf - X0 = 1`, `Y0 + Yf = 1`:
    /// `X0 = -1/2 + D_X`, `Y0 = 1/2 - D_Y`, `Xf = 1/2 + D_X`, `Yf = 1/2 + D_Y`.
    pub fn from_shifts(c: f64, dx: f64, dy: f64) -> Self {
        assert!(c > 0.0, "ellipse parameter C must be positive, got {c}");
        let (x0, y0) = (-0.5 + dx, 0.5 - dy);
        let (xf, yf) = (0.5 + dx, 0.5 + dy);
        let xa = ((xf + x0) + c * (yf - y0)) / 2.0;
        Self {
            c,
            x0,
            y0,
            xf,
            yf,
            xa,
        }
    }

    /// The symmetric gait case `D_X = D_Y = 0` with `X0 = -1/2`, `Y0 = 1/2`.
    pub fn symmetric(c: f64) -> Self {
        Self::from_shifts(c, 0.0, 0.0)
    }

    /// Squared "radius" of the ellipse: `(X0 - Xa)^2 + C Y0^2`.
    pub fn radius_sq(&self) -> f64 {
        (self.x0 - self.xa).powi(2) + self.c * self.y0 * self.y0
    }

    /// Evaluate `S_a(X, Y)`: negative inside, zero on the switching set.
    pub fn sa(&self, x: f64, y: f64) -> f64 {
        (x - self.xa).powi(2) + self.c * y * y - self.radius_sq()
    }

    /// Exact gradient `(dS_a/dX, dS_a/dY) = (2(X - Xa), 2CY)`.
    pub fn sa_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        (2.0 * (x - self.xa), 2.0 * self.c * y)
    }

    /// Time derivative of `S_a` along a state with the given velocities.
    pub fn sa_dot(&self, x: f64, y: f64, xdot: f64, ydot: f64) -> f64 {
        let (gx, gy) = self.sa_gradient(x, y);
        gx * xdot + gy * ydot
    }

    /// Unit tangent of the switching set at the exit point `(Xf, Yf)`,
    /// oriented with positive first component.
    pub fn exit_tangent(&self) -> (f64, f64) {
        let (gx, gy) = self.sa_gradient(self.xf, self.yf);
        let (tx, ty) = (gy, -gx);
        let norm = (tx * tx + ty * ty).sqrt();
        if tx >= 0.0 {
            (tx / norm, ty / norm)
        } else {
            (-tx / norm, -ty / norm)
        }
    }

    /// The abscissa of the exit branch of the switching set at ordinate `y`:
    /// the root of `S_a(X, y) = 0` with `X >= Xa`.
    pub fn x_on_manifold(&self, y: f64) -> Result<f64> {
        let disc = self.radius_sq() - self.c * y * y;
        if disc < 0.0 {
            return Err(WalkError::NoRealRoot {
                y,
                discriminant: disc,
            });
        }
        Ok(self.xa + disc.sqrt())
    }

    /// The positive-ordinate branch of the switching set at abscissa `x`.
    /// Used for the alternate Poincare section coordinates.
    pub fn y_on_manifold(&self, x: f64) -> Result<f64> {
        let disc = (self.radius_sq() - (x - self.xa).powi(2)) / self.c;
        if disc < 0.0 {
            return Err(WalkError::NoRealRoot {
                y: x,
                discriminant: disc,
            });
        }
        Ok(disc.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lip() -> SwitchingManifold {
        SwitchingManifold::symmetric(1.0)
    }

    #[test]
    fn endpoints_lie_on_manifold_exactly() {
        for &(c, dx, dy) in &[
            (1.0, 0.0, 0.0),
            (1.2, 0.015, 0.011),
            (0.95, 0.0, 0.0),
            (2.0, 0.03, 0.02),
        ] {
            let m = SwitchingManifold::from_shifts(c, dx, dy);
            assert_eq!(m.sa(m.x0, m.y0), 0.0);
            assert_eq!(m.sa(m.xf, m.yf), 0.0);
            assert!((m.xf - m.x0 - 1.0).abs() < 1e-15);
            assert!((m.y0 + m.yf - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lip_center_value() {
        // C=1, X0=-1/2, Y0=1/2 puts the center at the origin with S_a(0,0) = -1/2.
        let m = lip();
        assert_eq!(m.xa, 0.0);
        assert_eq!(m.sa(0.0, 0.0), -0.5);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = SwitchingManifold::from_shifts(1.3, 0.02, 0.01);
        let h = 1e-5;
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            // xorshift64*, plenty for sample points
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let x = -1.0 + 2.0 * next();
            let y = -1.0 + 2.0 * next();
            let (gx, gy) = m.sa_gradient(x, y);
            let fdx = (m.sa(x + h, y) - m.sa(x - h, y)) / (2.0 * h);
            let fdy = (m.sa(x, y + h) - m.sa(x, y - h)) / (2.0 * h);
            assert!((gx - fdx).abs() < 1e-8, "gx {gx} vs fd {fdx}");
            assert!((gy - fdy).abs() < 1e-8, "gy {gy} vs fd {fdy}");
        }
    }

    #[test]
    fn gradient_special_points() {
        let m = lip();
        assert_eq!(m.sa_gradient(m.xa, 0.0), (0.0, 0.0));
        assert_eq!(m.sa_gradient(0.5, 0.5), (1.0, 1.0));
    }

    #[test]
    fn exit_tangent_lip() {
        let (tx, ty) = lip().exit_tangent();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((tx - s).abs() < 1e-15);
        assert!((ty + s).abs() < 1e-15);
    }

    #[test]
    fn exit_tangent_orthogonal_to_gradient() {
        for &c in &[0.5, 0.95, 1.0, 1.2, 1.45, 2.0, 3.7] {
            let m = SwitchingManifold::from_shifts(c, 0.01, 0.005);
            let (tx, ty) = m.exit_tangent();
            let (gx, gy) = m.sa_gradient(m.xf, m.yf);
            assert!((tx * gx + ty * gy).abs() < 1e-14);
            assert!((tx * tx + ty * ty - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn opt_shape_aligns_tangent_with_initial_velocity() {
        // C = -Xdot0/Ydot0 makes the switching line co-linear with the
        // initial velocity of the periodic motion.
        let (xdot0, ydot0) = (2.3147, -1.5136);
        let c = -xdot0 / ydot0;
        let m = SwitchingManifold::symmetric(c);
        let (tx, ty) = m.exit_tangent();
        let cross = tx * ydot0 - ty * xdot0;
        assert!(cross.abs() < 1e-10, "cross product {cross}");
    }

    #[test]
    fn x_on_manifold_recovers_endpoints() {
        let m = SwitchingManifold::from_shifts(1.45, 0.012, 0.008);
        assert!((m.x_on_manifold(m.yf).unwrap() - m.xf).abs() < 1e-14);
        // At Y0 the exit branch returns the mirror root about the center.
        let mirror = 2.0 * m.xa - m.x0;
        assert!((m.x_on_manifold(m.y0).unwrap() - mirror).abs() < 1e-14);
    }

    #[test]
    fn x_on_manifold_defining_property() {
        let m = SwitchingManifold::from_shifts(1.2, 0.0, 0.0);
        let y_max = (m.radius_sq() / m.c).sqrt();
        for i in 0..50 {
            let y = -y_max + 2.0 * y_max * (i as f64 + 0.5) / 50.0;
            let x = m.x_on_manifold(y).unwrap();
            assert!(m.sa(x, y).abs() < 1e-12);
            assert!(x >= m.xa);
        }
    }

    #[test]
    fn x_on_manifold_no_real_root() {
        let m = lip();
        assert!(matches!(
            m.x_on_manifold(2.0),
            Err(WalkError::NoRealRoot { .. })
        ));
    }

    #[test]
    fn sa_is_exactly_quadratic() {
        // Second differences along any line are constant.
        let m = SwitchingManifold::from_shifts(1.7, 0.02, 0.01);
        let (px, py) = (-0.3, 0.2);
        let (dx, dy) = (0.7, -0.4);
        let h = 0.05;
        let f = |t: f64| m.sa(px + t * dx, py + t * dy);
        let second = |t: f64| f(t + h) - 2.0 * f(t) + f(t - h);
        let base = second(0.0);
        for i in 1..20 {
            let t = i as f64 * 0.11;
            assert!((second(t) - base).abs() < 1e-12);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn endpoints_always_on_manifold(
                c in 0.2f64..4.0,
                dx in 0.0f64..0.1,
                dy in 0.0f64..0.1,
            ) {
                let m = SwitchingManifold::from_shifts(c, dx, dy);
                prop_assert_eq!(m.sa(m.x0, m.y0), 0.0);
                // the stored center makes the far endpoint exact up to the
                // rounding of Xa itself (a few ulps of the O(1) terms)
                prop_assert!(m.sa(m.xf, m.yf).abs() < 1e-15);
            }

            #[test]
            fn exit_root_solves_quadratic(
                c in 0.2f64..4.0,
                dx in 0.0f64..0.1,
                dy in 0.0f64..0.1,
                frac in -0.99f64..0.99,
            ) {
                let m = SwitchingManifold::from_shifts(c, dx, dy);
                let y = frac * (m.radius_sq() / m.c).sqrt();
                let x = m.x_on_manifold(y).unwrap();
                prop_assert!(m.sa(x, y).abs() < 1e-12);
                prop_assert!(x >= m.xa);
            }

            #[test]
            fn interior_is_negative(
                c in 0.2f64..4.0,
                r in 0.0f64..0.999,
                ang in 0.0f64..std::f64::consts::TAU,
            ) {
                let m = SwitchingManifold::symmetric(c);
                // scale an interior point of the ellipse from its center
                let x = m.xa + r * (m.radius_sq()).sqrt() * ang.cos();
                let y = r * (m.radius_sq() / m.c).sqrt() * ang.sin();
                prop_assert!(m.sa(x, y) < 1e-12);
            }
        }
    }

    #[test]
    fn minimum_at_center() {
        let m = SwitchingManifold::from_shifts(1.3, 0.01, 0.02);
        let min = m.sa(m.xa, 0.0);
        for i in 0..30 {
            let ang = i as f64 * 0.21;
            let (x, y) = (m.xa + 0.1 * ang.cos(), 0.1 * ang.sin());
            assert!(m.sa(x, y) > min);
        }
    }
}
