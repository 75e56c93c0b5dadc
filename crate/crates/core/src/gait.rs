//! Periodic gait synthesis.
//!
//! For the constant-height pendulum the periodic gait is closed form. With
//! vertical oscillations (`a > 0`) the CoM loses vertical momentum at the
//! support exchange, so the stance point must shift relative to the CoM:
//! the shifts `(D_X, D_Y)`, the initial velocities and the carried vertical
//! velocity are found by a damped Newton iteration on five periodicity
//! residuals, each evaluated by integrating the zero dynamics for exactly
//! the design step duration `T`.

use crate::dynamics::{
    integrate_fixed, integrate_until_switch, velocities_from_momenta, IntegrationOptions,
    ZeroDynState,
};
use crate::error::{Result, WalkError};
use crate::linalg::solve_dense;
use crate::lip::{periodic_velocities, LipParams, DEFAULT_GRAVITY};
use crate::manifold::SwitchingManifold;
use crate::surface::ComSurface;
use crate::swing::{solve_nu, SwingParams};
use serde::{Deserialize, Serialize};

/// Peak swing-foot height realized by the default height gain (m).
pub const SWING_PEAK_DEFAULT: f64 = 0.09;

/// Designer-chosen gait parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitConfig {
    /// Switching-ellipse shape parameter.
    pub c: f64,
    /// Vertical oscillation amplitude parameter (m).
    pub a: f64,
    /// Single-support duration (s).
    pub t_step: f64,
    /// Nominal CoM height (m).
    pub z0: f64,
    /// Swing height gain (m, negative). `None` resolves to the gain giving
    /// a peak swing height of [`SWING_PEAK_DEFAULT`] on the periodic orbit.
    pub nu_z: Option<f64>,
    /// Gravity (m/s^2).
    pub g: f64,
    /// Physical step length and width (m); recorded for de-normalization only.
    pub step_length: f64,
    pub step_width: f64,
}

impl GaitConfig {
    pub fn new(c: f64, a: f64, t_step: f64, z0: f64) -> Self {
        Self {
            c,
            a,
            t_step,
            z0,
            nu_z: None,
            g: DEFAULT_GRAVITY,
            step_length: 0.3,
            step_width: 0.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.c) {
            return Err(WalkError::PreconditionViolated("C must be positive"));
        }
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(WalkError::PreconditionViolated("a must be nonnegative"));
        }
        if !positive(self.t_step) {
            return Err(WalkError::PreconditionViolated("T must be positive"));
        }
        if !positive(self.z0) {
            return Err(WalkError::PreconditionViolated("z0 must be positive"));
        }
        if !positive(self.g) {
            return Err(WalkError::PreconditionViolated("g must be positive"));
        }
        if let Some(nu_z) = self.nu_z {
            if !(nu_z.is_finite() && nu_z < 0.0) {
                return Err(WalkError::PreconditionViolated("nu_z must be negative"));
            }
        }
        Ok(())
    }

    pub fn lip_params(&self) -> LipParams {
        LipParams::new(self.z0, self.g)
    }
}

/// A solved periodic gait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGait {
    pub config: GaitConfig,
    /// Stance-point shifts of the CoM start/end positions.
    pub dx: f64,
    pub dy: f64,
    /// Post-impact CoM velocities of the periodic step.
    pub xdot0: f64,
    pub ydot0: f64,
    /// Angular momenta at the exit of the periodic step.
    pub sigma_minus: [f64; 2],
    /// Vertical CoM velocity carried through the periodic support exchange.
    pub zdot_carry: f64,
    /// Swing-foot shaping gains.
    pub nu_x: f64,
    pub nu_y: f64,
    /// Resolved swing height gain (negative).
    pub nu_z: f64,
    pub manifold: SwitchingManifold,
}

impl PeriodicGait {
    pub fn is_lip(&self) -> bool {
        self.config.a == 0.0
    }

    /// The CoM surface without the per-step correction.
    pub fn nominal_surface(&self) -> ComSurface {
        ComSurface::new(self.config.z0, self.config.a, self.manifold)
    }

    /// The surface of the periodic step (correction built from the
    /// periodic carry).
    pub fn periodic_surface(&self) -> Result<ComSurface> {
        per_step_surface(
            &self.nominal_surface(),
            self.xdot0,
            self.ydot0,
            self.zdot_carry,
            self.dx,
        )
    }

    /// Post-impact fixed point of the periodic step on its surface.
    pub fn periodic_start(&self) -> Result<(ZeroDynState, ComSurface)> {
        let surface = self.periodic_surface()?;
        let state = ZeroDynState::from_velocities(
            &surface,
            self.manifold.x0,
            self.manifold.y0,
            self.xdot0,
            self.ydot0,
        );
        Ok((state, surface))
    }

    pub fn swing_params(&self) -> SwingParams {
        SwingParams::new(self.nu_x, self.nu_y, self.nu_z, self.manifold)
    }

    pub fn integration_options(&self) -> IntegrationOptions {
        IntegrationOptions {
            g: self.config.g,
            ..IntegrationOptions::for_step_duration(self.config.t_step)
        }
    }

    /// Serialize to the versioned gait-file document.
    pub fn to_json(&self) -> String {
        let file = GaitFile {
            schema_version: GAIT_SCHEMA_VERSION,
            gait: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("gait serialization cannot fail")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let file: GaitFile = serde_json::from_str(text)?;
        Ok(file.gait)
    }
}

pub const GAIT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GaitFile {
    schema_version: u32,
    #[serde(flatten)]
    gait: PeriodicGait,
}

/// Build the per-step surface: attach the cubic height correction unless the
/// start abscissa already lies past the correction window.
pub(crate) fn per_step_surface(
    nominal: &ComSurface,
    xdot: f64,
    ydot: f64,
    zdot_carry: f64,
    x_end: f64,
) -> Result<ComSurface> {
    let (x0, y0) = (nominal.manifold.x0, nominal.manifold.y0);
    if x0 >= x_end {
        // correction window is empty; leave the mismatch to the dynamics
        return Ok(nominal.clone());
    }
    nominal.with_correction(x0, y0, xdot, ydot, zdot_carry, x_end)
}

/// Closed-form periodic gait of the constant-height pendulum.
pub fn lip_periodic_gait(t_step: f64, z0: f64, c: f64, g: f64) -> Result<PeriodicGait> {
    let mut config = GaitConfig::new(c, 0.0, t_step, z0);
    config.g = g;
    config.validate()?;
    let params = config.lip_params();
    let (xdot0, ydot0) = periodic_velocities(t_step, &params);
    finalize_gait(config, 0.0, 0.0, xdot0, ydot0, 0.0)
}

/// Newton solve controls for the periodicity conditions.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest amplitude increment of the continuation from the flat gait.
    pub continuation_da: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            continuation_da: 0.005,
        }
    }
}

/// Periodic gait of the variable-height pendulum, found by continuation in
/// the oscillation amplitude from the flat closed-form gait (or from the
/// supplied seed gait).
pub fn vlip_periodic_gait(
    config: &GaitConfig,
    seed: Option<&PeriodicGait>,
) -> Result<PeriodicGait> {
    vlip_periodic_gait_with(config, seed, &SolveOptions::default())
}

pub fn vlip_periodic_gait_with(
    config: &GaitConfig,
    seed: Option<&PeriodicGait>,
    solver: &SolveOptions,
) -> Result<PeriodicGait> {
    config.validate()?;
    let params = config.lip_params();

    let (mut unknowns, a_from) = match seed {
        Some(g) => ([g.dx, g.dy, g.xdot0, g.ydot0, g.zdot_carry], g.config.a),
        None => {
            let (xd, yd) = periodic_velocities(config.t_step, &params);
            ([0.0, 0.0, xd, yd, 0.0], 0.0)
        }
    };

    let span = config.a - a_from;
    let n_stages = if span.abs() <= solver.continuation_da {
        1
    } else {
        (span.abs() / solver.continuation_da).ceil() as usize
    };
    for stage in 1..=n_stages {
        let a_stage = a_from + span * stage as f64 / n_stages as f64;
        let cfg_stage = GaitConfig {
            a: a_stage,
            ..config.clone()
        };
        let (u, _iters) = newton_periodicity(&cfg_stage, unknowns, solver)?;
        unknowns = u;
    }

    finalize_gait(
        config.clone(),
        unknowns[0],
        unknowns[1],
        unknowns[2],
        unknowns[3],
        unknowns[4],
    )
}

/// Periodicity residuals at fixed step duration. Unknowns are
/// `(D_X, D_Y, Xdot0, Ydot0, zdot_carry)`; residuals are the exit position
/// against `(Xf, Yf)`, the velocity periodicity `Xdot(T) = Xdot0`,
/// `Ydot(T) = -Ydot0`, and the self-consistency of the carried vertical
/// velocity.
pub fn periodicity_residual(config: &GaitConfig, u: &[f64; 5]) -> Result<[f64; 5]> {
    let [dx, dy, xdot0, ydot0, zdot_carry] = *u;
    let manifold = SwitchingManifold::from_shifts(config.c, dx, dy);
    let nominal = ComSurface::new(config.z0, config.a, manifold);
    let surface = per_step_surface(&nominal, xdot0, ydot0, zdot_carry, dx)?;
    let start = ZeroDynState::from_velocities(&surface, manifold.x0, manifold.y0, xdot0, ydot0);
    let opts = IntegrationOptions {
        g: config.g,
        ..IntegrationOptions::for_step_duration(config.t_step)
    };
    let end = integrate_fixed(&start, &surface, config.t_step, &opts)?;
    let (xdot_t, ydot_t) = velocities_from_momenta(&end, &surface)?;
    let zdot_t = surface.vertical_velocity(end.x, end.y, xdot_t, ydot_t);
    Ok([
        end.x - manifold.xf,
        end.y - manifold.yf,
        xdot_t - xdot0,
        ydot_t + ydot0,
        zdot_t - zdot_carry,
    ])
}

fn norm(r: &[f64; 5]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Newton iteration with a central finite-difference Jacobian.
/// Returns the solution and the number of iterations taken.
pub fn newton_periodicity(
    config: &GaitConfig,
    mut u: [f64; 5],
    solver: &SolveOptions,
) -> Result<([f64; 5], usize)> {
    let mut r = periodicity_residual(config, &u)?;
    for iter in 0..solver.max_iter {
        let max_r = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_r < solver.tol {
            return Ok((u, iter));
        }
        // central differences, relative step 1e-7
        let mut jac = vec![0.0; 25];
        for j in 0..5 {
            let h = 1e-7 * u[j].abs().max(1.0);
            let mut up = u;
            up[j] += h;
            let mut um = u;
            um[j] -= h;
            let rp = periodicity_residual(config, &up)?;
            let rm = periodicity_residual(config, &um)?;
            for i in 0..5 {
                jac[i * 5 + j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_dense(&mut jac, &mut rhs, 5)?;

        // halving line search on the residual norm
        let norm0 = norm(&r);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let mut trial = u;
            for i in 0..5 {
                trial[i] += lambda * delta[i];
            }
            match periodicity_residual(config, &trial) {
                Ok(rt) if norm(&rt) < norm0 => {
                    accepted = Some((trial, rt));
                    break;
                }
                _ => lambda *= 0.5,
            }
        }
        match accepted {
            Some((trial, rt)) => {
                u = trial;
                r = rt;
            }
            None => {
                return Err(WalkError::NoConvergence {
                    iterations: iter + 1,
                    residual: norm0,
                })
            }
        }
    }
    let max_r = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_r < solver.tol {
        Ok((u, solver.max_iter))
    } else {
        Err(WalkError::NoConvergence {
            iterations: solver.max_iter,
            residual: max_r,
        })
    }
}

/// Assemble the gait record: shaping gains from the exit state, height gain
/// from the requested peak swing height over the periodic orbit.
fn finalize_gait(
    config: GaitConfig,
    dx: f64,
    dy: f64,
    xdot0: f64,
    ydot0: f64,
    zdot_carry: f64,
) -> Result<PeriodicGait> {
    let manifold = SwitchingManifold::from_shifts(config.c, dx, dy);
    let nominal = ComSurface::new(config.z0, config.a, manifold);
    let surface = per_step_surface(&nominal, xdot0, ydot0, zdot_carry, dx)?;

    // exit velocities of the periodic step
    let (xdot_f, ydot_f) = (xdot0, -ydot0);
    let (nu_x, nu_y) = solve_nu(&manifold, xdot_f, ydot_f)?;
    let m_exit = crate::dynamics::constraint_matrix(&surface, manifold.xf, manifold.yf);
    let sigma_minus = [
        m_exit[0][0] * xdot_f + m_exit[0][1] * ydot_f,
        m_exit[1][0] * xdot_f + m_exit[1][1] * ydot_f,
    ];

    let nu_z = match config.nu_z {
        Some(v) => v,
        None => {
            // deepest interior point of the periodic orbit sets the scale
            let start =
                ZeroDynState::from_velocities(&surface, manifold.x0, manifold.y0, xdot0, ydot0);
            let opts = IntegrationOptions {
                g: config.g,
                ..IntegrationOptions::for_step_duration(config.t_step)
            };
            let crossing = integrate_until_switch(&start, &surface, &opts)?;
            let min_sa = crossing
                .samples
                .iter()
                .map(|s| manifold.sa(s.state.x, s.state.y))
                .fold(f64::INFINITY, f64::min);
            if min_sa >= -1e-12 {
                return Err(WalkError::PreconditionViolated(
                    "periodic orbit never enters the switching ellipse",
                ));
            }
            -SWING_PEAK_DEFAULT / (-min_sa)
        }
    };

    Ok(PeriodicGait {
        config,
        dx,
        dy,
        xdot0,
        ydot0,
        sigma_minus,
        zdot_carry,
        nu_x,
        nu_y,
        nu_z,
        manifold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lip_gait_matches_reference_velocities() {
        let gait = lip_periodic_gait(0.600, 0.7, 1.2, DEFAULT_GRAVITY).unwrap();
        assert!((gait.xdot0 - 2.3147).abs() < 1e-4);
        assert!((gait.ydot0 + 1.5136).abs() < 1e-4);
        assert_eq!(gait.dx, 0.0);
        assert_eq!(gait.dy, 0.0);
        assert_eq!(gait.zdot_carry, 0.0);
    }

    #[test]
    fn lip_gait_large_t_asymptotics() {
        let gait = lip_periodic_gait(20.0, 0.7, 1.1, DEFAULT_GRAVITY).unwrap();
        let w = gait.config.lip_params().omega;
        assert!((gait.xdot0 - w / 2.0).abs() < 1e-9);
        assert!((gait.ydot0 + w / 2.0).abs() < 1e-9);
    }

    #[test]
    fn vlip_reduces_to_lip_at_zero_amplitude() {
        let config = GaitConfig::new(1.1, 0.0, 0.7, 0.7);
        let gait = vlip_periodic_gait(&config, None).unwrap();
        let lip = lip_periodic_gait(0.7, 0.7, 1.1, DEFAULT_GRAVITY).unwrap();
        assert!(gait.dx.abs() < 1e-9);
        assert!(gait.dy.abs() < 1e-9);
        assert!((gait.xdot0 - lip.xdot0).abs() < 1e-9);
        assert!((gait.ydot0 - lip.ydot0).abs() < 1e-9);
        assert!(gait.zdot_carry.abs() < 1e-9);
    }

    #[test]
    fn vlip_residuals_below_tolerance() {
        let config = GaitConfig::new(1.1, 0.02, 0.7, 0.7);
        let gait = vlip_periodic_gait(&config, None).unwrap();
        let u = [gait.dx, gait.dy, gait.xdot0, gait.ydot0, gait.zdot_carry];
        let r = periodicity_residual(&config, &u).unwrap();
        for (i, ri) in r.iter().enumerate() {
            assert!(ri.abs() < 1e-9, "residual {i} = {ri}");
        }
        // vertical exit velocity is negative for a > 0
        assert!(gait.zdot_carry < 0.0);
        // stance shifts are nonnegative
        assert!(gait.dx >= 0.0 && gait.dy >= 0.0);
    }

    #[test]
    fn vlip_continuation_iteration_budget() {
        // stepping the amplitude by 0.005 from the flat gait converges in a
        // few Newton iterations at every stage
        let solver = SolveOptions::default();
        let mut u = {
            let p = LipParams::standard(0.7);
            let (xd, yd) = periodic_velocities(0.7, &p);
            [0.0, 0.0, xd, yd, 0.0]
        };
        for k in 1..=6 {
            let config = GaitConfig::new(1.1, 0.005 * k as f64, 0.7, 0.7);
            let (nu, iters) = newton_periodicity(&config, u, &solver).unwrap();
            assert!(iters <= 10, "a = {}: {iters} iterations", config.a);
            u = nu;
        }
    }

    #[test]
    fn vlip_seeded_solve_agrees_with_fresh() {
        let c1 = GaitConfig::new(1.1, 0.015, 0.7, 0.7);
        let fresh = vlip_periodic_gait(&c1, None).unwrap();
        let c2 = GaitConfig::new(1.1, 0.02, 0.7, 0.7);
        let seeded = vlip_periodic_gait(&c2, Some(&fresh)).unwrap();
        let direct = vlip_periodic_gait(&c2, None).unwrap();
        assert!((seeded.dx - direct.dx).abs() < 1e-8);
        assert!((seeded.xdot0 - direct.xdot0).abs() < 1e-8);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(lip_periodic_gait(0.6, -0.7, 1.2, DEFAULT_GRAVITY).is_err());
        let bad = GaitConfig::new(-1.0, 0.0, 0.6, 0.7);
        assert!(vlip_periodic_gait(&bad, None).is_err());
    }

    #[test]
    fn default_height_gain_realizes_peak() {
        let gait = lip_periodic_gait(0.6, 0.7, 1.2, DEFAULT_GRAVITY).unwrap();
        assert!(gait.nu_z < 0.0);
        // min S_a over the flat-gait orbit; the gain scales the peak to 0.09
        let (start, surface) = gait.periodic_start().unwrap();
        let crossing =
            integrate_until_switch(&start, &surface, &gait.integration_options()).unwrap();
        let min_sa = crossing
            .samples
            .iter()
            .map(|s| gait.manifold.sa(s.state.x, s.state.y))
            .fold(f64::INFINITY, f64::min);
        let peak = gait.nu_z * min_sa;
        assert!((peak - SWING_PEAK_DEFAULT).abs() < 1e-6, "peak {peak}");
    }

    #[test]
    fn gait_file_round_trip() {
        let gait = lip_periodic_gait(0.6, 0.7, 1.2, DEFAULT_GRAVITY).unwrap();
        let text = gait.to_json();
        assert!(text.contains("\"schema_version\": 1"));
        let back = PeriodicGait::from_json(&text).unwrap();
        assert_eq!(gait, back);
    }

    #[test]
    fn gait_file_schema_keys_are_stable() {
        // the exact field names are the interchange contract; renames must
        // break this test, not downstream readers
        let gait = lip_periodic_gait(0.6, 0.7, 1.2, DEFAULT_GRAVITY).unwrap();
        let value: serde_json::Value = serde_json::from_str(&gait.to_json()).unwrap();
        for key in [
            "schema_version",
            "config",
            "dx",
            "dy",
            "xdot0",
            "ydot0",
            "sigma_minus",
            "zdot_carry",
            "nu_x",
            "nu_y",
            "nu_z",
            "manifold",
        ] {
            assert!(value.get(key).is_some(), "missing top-level key {key}");
        }
        for key in ["c", "a", "t_step", "z0", "nu_z", "g", "step_length", "step_width"] {
            assert!(value["config"].get(key).is_some(), "missing config key {key}");
        }
        for key in ["c", "x0", "y0", "xf", "yf", "xa"] {
            assert!(value["manifold"].get(key).is_some(), "missing manifold key {key}");
        }
    }
}
