//! Closed-form 3D linear inverted pendulum step dynamics.
//!
//! With constant CoM height the sagittal and frontal motions decouple into
//! `Xddot = (g/z0) X`, `Yddot = (g/z0) Y`, solvable in cosh/sinh. The
//! per-axis orbital energies and the synchronization measure
//! `L = Xdot Ydot - (g/z0) X Y` are conserved during a step; `L = 0` means
//! the frontal velocity vanishes exactly when the CoM crosses the stance
//! point sagittally.

use crate::error::{Result, WalkError};
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipParams {
    /// Pendulum frequency `sqrt(g / z0)` (1/s).
    pub omega: f64,
    pub z0: f64,
    pub g: f64,
}

impl LipParams {
    pub fn new(z0: f64, g: f64) -> Self {
        assert!(z0 > 0.0 && g > 0.0);
        Self {
            omega: (g / z0).sqrt(),
            z0,
            g,
        }
    }

    pub fn standard(z0: f64) -> Self {
        Self::new(z0, DEFAULT_GRAVITY)
    }

    pub fn omega_sq(&self) -> f64 {
        self.g / self.z0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipState {
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
}

impl LipState {
    pub fn new(x: f64, y: f64, xdot: f64, ydot: f64) -> Self {
        Self { x, y, xdot, ydot }
    }
}

/// Propagate the state for time `t >= 0`.
pub fn flow(s: &LipState, p: &LipParams, t: f64) -> LipState {
    let (c, sh) = ((p.omega * t).cosh(), (p.omega * t).sinh());
    LipState {
        x: s.x * c + s.xdot / p.omega * sh,
        y: s.y * c + s.ydot / p.omega * sh,
        xdot: s.x * p.omega * sh + s.xdot * c,
        ydot: s.y * p.omega * sh + s.ydot * c,
    }
}

/// Per-axis orbital energies `(Xdot^2 - (g/z0) X^2, Ydot^2 - (g/z0) Y^2)`.
pub fn orbital_energies(s: &LipState, p: &LipParams) -> (f64, f64) {
    let w2 = p.omega_sq();
    (
        s.xdot * s.xdot - w2 * s.x * s.x,
        s.ydot * s.ydot - w2 * s.y * s.y,
    )
}

/// Synchronization measure `L = Xdot Ydot - (g/z0) X Y`.
pub fn sync_measure(s: &LipState, p: &LipParams) -> f64 {
    s.xdot * s.ydot - p.omega_sq() * s.x * s.y
}

/// Initial velocities of the unique periodic gait of duration `T` with
/// `X0 = -1/2`, `Xf = Y0 = Yf = 1/2`:
/// `Xdot0 = (omega/2) coth(omega T / 2)`, `Ydot0 = -(omega/2) tanh(omega T / 2)`.
pub fn periodic_velocities(t_step: f64, p: &LipParams) -> (f64, f64) {
    assert!(t_step > 0.0, "step duration must be positive");
    let half = p.omega * t_step / 2.0;
    let th = half.tanh();
    ((p.omega / 2.0) / th, -(p.omega / 2.0) * th)
}

/// Step-to-step contraction factor of the synchronization measure for the
/// (X0, Y0)-invariant LIP with an ellipse switching manifold of shape `C`:
///
/// ```text
/// lambda_L = (Ydot0 - Xdot0)(C Ydot0 + Xdot0) / ((Xdot0 + Ydot0)(-C Ydot0 + Xdot0))
/// ```
pub fn lambda_sync(c: f64, xdot0: f64, ydot0: f64) -> Result<f64> {
    let den = (xdot0 + ydot0) * (-c * ydot0 + xdot0);
    if den == 0.0 || xdot0 + ydot0 == 0.0 || -c * ydot0 + xdot0 == 0.0 {
        return Err(WalkError::DegenerateGait { c });
    }
    Ok((ydot0 - xdot0) * (c * ydot0 + xdot0) / den)
}

/// The open interval of ellipse shapes `C` with `|lambda_L| < 1`:
/// `(1, (Xdot0 / Ydot0)^2)` under the periodic-gait sign conditions
/// `Xdot0 > 0`, `Ydot0 < 0`, `Xdot0 > -Ydot0`.
pub fn sync_range(xdot0: f64, ydot0: f64) -> Result<(f64, f64)> {
    if !(xdot0 > 0.0 && ydot0 < 0.0 && xdot0 > -ydot0) {
        return Err(WalkError::PreconditionViolated(
            "sync_range requires Xdot0 > 0, Ydot0 < 0, Xdot0 > -Ydot0",
        ));
    }
    Ok((1.0, (xdot0 / ydot0).powi(2)))
}

/// The manifold shape that synchronizes in a single step: `C = -Xdot0/Ydot0`,
/// the switching line co-linear with the initial velocity.
pub fn c_one_step(xdot0: f64, ydot0: f64) -> f64 {
    -xdot0 / ydot0
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z0: f64 = 0.7;

    fn params() -> LipParams {
        LipParams::standard(Z0)
    }

    /// Published rounded velocities of the T = 0.600 s gait, z0 = 0.7 m.
    const XD0: f64 = 2.3147;
    const YD0: f64 = -1.5136;

    #[test]
    fn omega_invariant() {
        let p = params();
        assert!((p.omega * p.omega - p.g / p.z0).abs() < 1e-13);
    }

    #[test]
    fn flow_identity_at_zero() {
        let p = params();
        let s = LipState::new(-0.5, 0.5, XD0, YD0);
        let f = flow(&s, &p, 0.0);
        assert_eq!(s, f);
    }

    #[test]
    fn flow_matches_rk4_oracle() {
        // Fixed-step classical RK4 on the linear field, independent of the
        // cosh/sinh closed form.
        let p = params();
        let w2 = p.omega_sq();
        let rhs = |s: &[f64; 4]| [s[2], s[3], w2 * s[0], w2 * s[1]];
        let mut y = [-0.5, 0.5, XD0, YD0];
        let n = 20_000;
        let h = 1.0 / n as f64;
        for _ in 0..n {
            let k1 = rhs(&y);
            let mut y2 = [0.0; 4];
            for (i, v) in y2.iter_mut().enumerate() {
                *v = y[i] + 0.5 * h * k1[i];
            }
            let k2 = rhs(&y2);
            for (i, v) in y2.iter_mut().enumerate() {
                *v = y[i] + 0.5 * h * k2[i];
            }
            let k3 = rhs(&y2);
            for (i, v) in y2.iter_mut().enumerate() {
                *v = y[i] + h * k3[i];
            }
            let k4 = rhs(&y2);
            for (i, v) in y.iter_mut().enumerate() {
                *v += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let f = flow(&LipState::new(-0.5, 0.5, XD0, YD0), &p, 1.0);
        assert!((f.x - y[0]).abs() < 1e-8);
        assert!((f.y - y[1]).abs() < 1e-8);
        assert!((f.xdot - y[2]).abs() < 1e-8);
        assert!((f.ydot - y[3]).abs() < 1e-8);
    }

    #[test]
    fn flow_reaches_symmetric_exit() {
        // From the printed initial state the gait reaches X = +1/2 at
        // t ~ 0.600 s with the frontal velocity mirrored.
        let p = params();
        let f = flow(&LipState::new(-0.5, 0.5, XD0, YD0), &p, 0.600);
        assert!((f.x - 0.5).abs() < 1e-3);
        assert!((f.y - 0.5).abs() < 1e-3);
        assert!((f.ydot - 1.5136).abs() < 1e-3);
    }

    #[test]
    fn energies_zero_at_rest() {
        let p = params();
        let s = LipState::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(orbital_energies(&s, &p), (0.0, 0.0));
    }

    #[test]
    fn conserved_quantities_along_flow() {
        let p = params();
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed ^= seed >> 12;
            seed ^= seed << 25;
            seed ^= seed >> 27;
            (seed.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let s = LipState::new(
                -1.0 + 2.0 * next(),
                -1.0 + 2.0 * next(),
                -3.0 + 6.0 * next(),
                -3.0 + 6.0 * next(),
            );
            let (ex0, ey0) = orbital_energies(&s, &p);
            let l0 = sync_measure(&s, &p);
            for &t in &[0.05, 0.2, 0.45, 0.6] {
                let f = flow(&s, &p, t);
                let (ex, ey) = orbital_energies(&f, &p);
                let l = sync_measure(&f, &p);
                assert!((ex - ex0).abs() < 1e-10, "Ex drift {}", ex - ex0);
                assert!((ey - ey0).abs() < 1e-10, "Ey drift {}", ey - ey0);
                assert!((l - l0).abs() < 1e-10, "L drift {}", l - l0);
            }
        }
    }

    #[test]
    fn periodic_energy_value() {
        // Ex = Xdot0^2 - (g/z0)/4 evaluated with the rounded reference velocities.
        let p = params();
        let s = LipState::new(-0.5, 0.5, XD0, YD0);
        let (ex, _) = orbital_energies(&s, &p);
        assert!((ex - 1.8543).abs() < 1e-4, "Ex = {ex}");
    }

    #[test]
    fn sync_measure_of_reference_state_is_small() {
        let p = params();
        let l = sync_measure(&LipState::new(-0.5, 0.5, XD0, YD0), &p);
        assert!(l.abs() < 2e-3, "L = {l}");
    }

    #[test]
    fn sync_measure_zero_cases() {
        let p = params();
        for &(xdot, y) in &[(1.3, 0.4), (-0.7, 0.0), (2.0, -1.0)] {
            let s = LipState::new(0.0, y, xdot, 0.0);
            assert_eq!(sync_measure(&s, &p), 0.0);
        }
    }

    #[test]
    fn periodic_velocities_match_reference() {
        let p = params();
        let (xd, yd) = periodic_velocities(0.600, &p);
        assert!((xd - XD0).abs() < 1e-4, "Xdot0 = {xd}");
        assert!((yd - YD0).abs() < 1e-4, "Ydot0 = {yd}");
    }

    #[test]
    fn periodic_velocity_orientation() {
        let p = params();
        for i in 1..30 {
            let t = 0.1 + 0.05 * i as f64;
            let (xd, yd) = periodic_velocities(t, &p);
            let ratio = -yd / xd;
            assert!(ratio > 0.0 && ratio < 1.0, "T = {t}: ratio {ratio}");
        }
    }

    #[test]
    fn periodic_state_is_synchronized() {
        let p = params();
        let (xd, yd) = periodic_velocities(0.7, &p);
        let s = LipState::new(-0.5, 0.5, xd, yd);
        assert!(sync_measure(&s, &p).abs() < 1e-12);
    }

    #[test]
    fn periodic_velocity_asymptotics() {
        let p = params();
        let (xd, yd) = periodic_velocities(20.0, &p);
        assert!((xd - p.omega / 2.0).abs() < 1e-9);
        assert!((yd + p.omega / 2.0).abs() < 1e-9);
    }

    #[test]
    fn lambda_frozen_values() {
        // Direct evaluation at the published rounded velocities.
        let cases = [
            (1.2, -0.5765308348633085),
            (1.45, -0.12714737621097702),
            (0.95, -1.1165425483104454),
        ];
        for (c, want) in cases {
            let got = lambda_sync(c, XD0, YD0).unwrap();
            assert!((got - want).abs() < 1e-12, "C={c}: {got} vs {want}");
        }
    }

    #[test]
    fn lambda_exact_boundary_values() {
        assert_eq!(lambda_sync(1.0, XD0, YD0).unwrap(), -1.0);
        let hi = (XD0 / YD0).powi(2);
        assert!((lambda_sync(hi, XD0, YD0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_at_one_step_shape() {
        let c = c_one_step(XD0, YD0);
        assert!(lambda_sync(c, XD0, YD0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn lambda_degenerate() {
        // Xdot0 = -Ydot0 kills the first denominator factor.
        assert!(matches!(
            lambda_sync(1.2, 1.5, -1.5),
            Err(WalkError::DegenerateGait { .. })
        ));
        // C Ydot0 = Xdot0 kills the second one.
        assert!(matches!(
            lambda_sync(2.0, 1.0, 0.5),
            Err(WalkError::DegenerateGait { .. })
        ));
    }

    #[test]
    fn sync_range_values() {
        let (lo, hi) = sync_range(XD0, YD0).unwrap();
        assert_eq!(lo, 1.0);
        assert!((hi - 2.3387).abs() < 1e-4, "hi = {hi}");
        let copt = c_one_step(XD0, YD0);
        assert!((copt - 1.5293).abs() < 1e-4);
        assert!(copt > lo && copt < hi);
    }

    #[test]
    fn sync_range_characterizes_contraction() {
        // |lambda_L| < 1 exactly for C strictly inside the open interval.
        let (lo, hi) = sync_range(XD0, YD0).unwrap();
        for i in 0..50 {
            let c = 0.5 + i as f64 * 0.06;
            let lam = lambda_sync(c, XD0, YD0).unwrap();
            let inside = c > lo && c < hi;
            assert_eq!(lam.abs() < 1.0, inside, "C = {c}, lambda = {lam}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn flow_conserves_invariants(
                x in -1.0f64..1.0,
                y in -1.0f64..1.0,
                xdot in -3.0f64..3.0,
                ydot in -3.0f64..3.0,
                t in 0.0f64..1.0,
            ) {
                let p = LipParams::standard(0.7);
                let s = LipState::new(x, y, xdot, ydot);
                let f = flow(&s, &p, t);
                let (ex0, ey0) = orbital_energies(&s, &p);
                let (ex, ey) = orbital_energies(&f, &p);
                prop_assert!((ex - ex0).abs() < 1e-9);
                prop_assert!((ey - ey0).abs() < 1e-9);
                prop_assert!((sync_measure(&f, &p) - sync_measure(&s, &p)).abs() < 1e-9);
            }

            #[test]
            fn contraction_iff_inside_range(
                t_step in 0.3f64..1.2,
                c in 0.05f64..6.0,
            ) {
                let p = LipParams::standard(0.7);
                let (xd, yd) = periodic_velocities(t_step, &p);
                let (lo, hi) = sync_range(xd, yd).unwrap();
                let lam = lambda_sync(c, xd, yd).unwrap();
                // stay away from the boundary where |lambda| = 1 exactly
                if c < lo - 1e-9 || c > hi + 1e-9 {
                    prop_assert!(lam.abs() >= 1.0);
                } else if c > lo + 1e-9 && c < hi - 1e-9 {
                    prop_assert!(lam.abs() < 1.0);
                }
            }
        }
    }

    #[test]
    fn sync_range_preconditions() {
        assert!(sync_range(-1.0, -0.5).is_err());
        assert!(sync_range(1.0, 0.5).is_err());
        assert!(sync_range(1.0, -1.5).is_err());
    }
}
