//! Zero dynamics of the variable-length inverted pendulum.
//!
//! The state is the free configuration and the mass-normalized angular
//! momenta `(X, Y, sigma_X, sigma_Y)`. Constrained to a CoM surface
//! `z = f(X, Y)`, the velocities follow from the momenta through
//!
//! ```text
//! M_XY = | fX Y        fY Y - f |        (Xdot, Ydot) = M_XY^-1 (sigma_X, sigma_Y)
//!        | -fX X + f   -fY X   |
//! ```
//!
//! and the momenta evolve under gravity alone: `sigma_X' = -g Y`,
//! `sigma_Y' = g X`. A step integrates this field from the post-impact
//! state until the switching manifold is crossed outward (`S_a = 0` with
//! `dS_a/dt > 0`); the crossing is located on the dense output of an
//! embedded Dormand-Prince 5(4) pair and refined by bisection.

use crate::error::{Result, WalkError};
use crate::lip::DEFAULT_GRAVITY;
use crate::surface::ComSurface;
use serde::{Deserialize, Serialize};

/// Determinant guard for the velocity-momentum constraint matrix.
pub const EPS_DET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroDynState {
    pub x: f64,
    pub y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl ZeroDynState {
    pub fn new(x: f64, y: f64, sigma_x: f64, sigma_y: f64) -> Self {
        Self {
            x,
            y,
            sigma_x,
            sigma_y,
        }
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.sigma_x, self.sigma_y]
    }

    /// Assemble a state from positions and velocities on the given surface.
    pub fn from_velocities(surface: &ComSurface, x: f64, y: f64, xdot: f64, ydot: f64) -> Self {
        let m = constraint_matrix(surface, x, y);
        Self::new(
            x,
            y,
            m[0][0] * xdot + m[0][1] * ydot,
            m[1][0] * xdot + m[1][1] * ydot,
        )
    }
}

/// The matrix mapping horizontal velocities to angular momenta.
pub fn constraint_matrix(surface: &ComSurface, x: f64, y: f64) -> [[f64; 2]; 2] {
    let f = surface.height(x, y);
    let (fx, fy) = surface.partials(x, y);
    [[fx * y, fy * y - f], [-fx * x + f, -fy * x]]
}

/// Recover `(Xdot, Ydot) = M_XY^-1 (sigma_X, sigma_Y)`.
pub fn velocities_from_momenta(s: &ZeroDynState, surface: &ComSurface) -> Result<(f64, f64)> {
    let m = constraint_matrix(surface, s.x, s.y);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < EPS_DET {
        return Err(WalkError::SingularConstraint {
            det_abs: det.abs(),
            x: s.x,
            y: s.y,
        });
    }
    Ok((
        (m[1][1] * s.sigma_x - m[0][1] * s.sigma_y) / det,
        (-m[1][0] * s.sigma_x + m[0][0] * s.sigma_y) / det,
    ))
}

/// Time derivative of the zero-dynamics state.
pub fn vector_field(s: &ZeroDynState, surface: &ComSurface, g: f64) -> Result<[f64; 4]> {
    let (xdot, ydot) = velocities_from_momenta(s, surface)?;
    Ok([xdot, ydot, -g * s.y, g * s.x])
}

/// Horizontal CoM accelerations along the constrained flow:
/// `(Xddot, Yddot) = M^-1 (sigma_dot - Mdot M^-1 sigma)`.
pub fn accelerations(s: &ZeroDynState, surface: &ComSurface, g: f64) -> Result<(f64, f64)> {
    let (xdot, ydot) = velocities_from_momenta(s, surface)?;
    let (fx, fy) = surface.partials(s.x, s.y);
    let (fxx, fxy, fyy) = surface.second_partials(s.x, s.y);
    let (x, y) = (s.x, s.y);
    // dM/dt = dM/dX Xdot + dM/dY Ydot for M = [[fx y, fy y - f], [-fx x + f, -fy x]]
    let m_x = [[fxx * y, fxy * y - fx], [-fxx * x, -fxy * x - fy]];
    let m_y = [[fxy * y + fx, fyy * y], [-fxy * x + fy, -fyy * x]];
    let mdot = [
        [
            m_x[0][0] * xdot + m_y[0][0] * ydot,
            m_x[0][1] * xdot + m_y[0][1] * ydot,
        ],
        [
            m_x[1][0] * xdot + m_y[1][0] * ydot,
            m_x[1][1] * xdot + m_y[1][1] * ydot,
        ],
    ];
    let rhs = [
        -g * y - (mdot[0][0] * xdot + mdot[0][1] * ydot),
        g * x - (mdot[1][0] * xdot + mdot[1][1] * ydot),
    ];
    let m = constraint_matrix(surface, x, y);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < EPS_DET {
        return Err(WalkError::SingularConstraint {
            det_abs: det.abs(),
            x,
            y,
        });
    }
    Ok((
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (-m[1][0] * rhs[0] + m[0][0] * rhs[1]) / det,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Horizon after which the step is declared to never reach the manifold.
    pub t_max: f64,
    /// Refinement tolerance on `|S_a|` at the located crossing.
    pub event_tol: f64,
    /// Upper bound on the spacing of recorded trace samples (s).
    pub max_sample_dt: f64,
    pub g: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            t_max: 5.0,
            event_tol: 1e-12,
            max_sample_dt: 0.005,
            g: DEFAULT_GRAVITY,
        }
    }
}

impl IntegrationOptions {
    /// Default options with the divergence horizon set to five nominal
    /// step durations.
    pub fn for_step_duration(t_step: f64) -> Self {
        Self {
            t_max: 5.0 * t_step,
            ..Self::default()
        }
    }
}

/// One recorded point of the continuous phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub t: f64,
    pub state: ZeroDynState,
    pub xdot: f64,
    pub ydot: f64,
    pub z: f64,
    pub zdot: f64,
}

/// Continuous phase terminated on the switching manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchCrossing {
    /// State on the manifold (position satisfies `|S_a| < event_tol`).
    pub state: ZeroDynState,
    /// Velocities recovered at the crossing.
    pub xdot: f64,
    pub ydot: f64,
    /// Duration of the single-support phase.
    pub t_step: f64,
    /// Dense samples of the phase, last one at the crossing.
    pub samples: Vec<RawSample>,
}

// Dormand-Prince 5(4) tableau (stage times omitted: the field is autonomous).
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights for the quartic interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Quartic Hermite-style interpolant over one accepted step.
struct DenseSegment {
    t0: f64,
    h: f64,
    rcont: [[f64; 4]; 5],
}

impl DenseSegment {
    fn build(t0: f64, h: f64, y0: &[f64; 4], y1: &[f64; 4], k: &[[f64; 4]; 7]) -> Self {
        let mut rcont = [[0.0; 4]; 5];
        for i in 0..4 {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k[0][i] - ydiff;
            rcont[0][i] = y0[i];
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - h * k[6][i] - bspl;
            rcont[4][i] = h
                * (D[0] * k[0][i]
                    + D[2] * k[2][i]
                    + D[3] * k[3][i]
                    + D[4] * k[4][i]
                    + D[5] * k[5][i]
                    + D[6] * k[6][i]);
        }
        Self { t0, h, rcont }
    }

    fn eval(&self, t: f64) -> [f64; 4] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let mut y = [0.0; 4];
        for (i, v) in y.iter_mut().enumerate() {
            *v = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + theta1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + theta1 * self.rcont[4][i])));
        }
        y
    }
}

struct Integrator<'a> {
    surface: &'a ComSurface,
    g: f64,
}

impl Integrator<'_> {
    fn rhs(&self, y: &[f64; 4]) -> Result<[f64; 4]> {
        vector_field(&ZeroDynState::from_array(*y), self.surface, self.g)
    }

    /// One embedded step attempt; returns the new state, the FSAL stage and
    /// the scaled error estimate.
    fn try_step(
        &self,
        y: &[f64; 4],
        k1: &[f64; 4],
        h: f64,
        rel: f64,
        abs: f64,
    ) -> Result<([f64; 4], [[f64; 4]; 7], f64)> {
        let mut k = [[0.0; 4]; 7];
        k[0] = *k1;
        for stage in 1..7 {
            let mut ys = *y;
            for (j, kj) in k.iter().enumerate().take(stage) {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..4 {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[stage] = self.rhs(&ys)?;
        }
        // stage 7 is evaluated at the 5th-order solution (FSAL)
        let mut y1 = *y;
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = A[6][j];
            if a != 0.0 {
                for i in 0..4 {
                    y1[i] += h * a * kj[i];
                }
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..4 {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let scale = abs + rel * y[i].abs().max(y1[i].abs());
            err = err.max((e / scale).abs());
        }
        Ok((y1, k, err))
    }
}

/// Integrate the zero dynamics from `start` until the first outward crossing
/// of the switching manifold carried by `surface`.
///
/// The start may lie on the manifold: moving inward (`dS_a/dt <= 0`) starts a
/// regular step, moving outward terminates immediately with `t_step = 0`.
pub fn integrate_until_switch(
    start: &ZeroDynState,
    surface: &ComSurface,
    opts: &IntegrationOptions,
) -> Result<SwitchCrossing> {
    let manifold = &surface.manifold;
    let integ = Integrator { surface, g: opts.g };

    let sample = |t: f64, y: &[f64; 4]| -> Result<RawSample> {
        let state = ZeroDynState::from_array(*y);
        let (xdot, ydot) = velocities_from_momenta(&state, surface)?;
        Ok(RawSample {
            t,
            state,
            xdot,
            ydot,
            z: surface.height(state.x, state.y),
            zdot: surface.vertical_velocity(state.x, state.y, xdot, ydot),
        })
    };

    let mut y = start.to_array();
    let mut t = 0.0;
    let mut samples = Vec::new();
    samples.push(sample(0.0, &y)?);

    // immediate exit when starting on the manifold moving outward
    let g0 = manifold.sa(y[0], y[1]);
    {
        let s0 = samples[0];
        let sdot0 = manifold.sa_dot(y[0], y[1], s0.xdot, s0.ydot);
        if g0.abs() <= opts.event_tol && sdot0 > 0.0 {
            return Ok(SwitchCrossing {
                state: *start,
                xdot: s0.xdot,
                ydot: s0.ydot,
                t_step: 0.0,
                samples,
            });
        }
    }

    let mut k1 = integ.rhs(&y)?;
    let mut h = 1e-4_f64.min(opts.t_max / 2.0);
    let mut g_prev = g0;
    let mut next_sample = opts.max_sample_dt;

    while t < opts.t_max {
        if t + h > opts.t_max {
            h = opts.t_max - t;
        }
        let (y1, k, err) = integ.try_step(&y, &k1, h, opts.rel_tol, opts.abs_tol)?;
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err > 1.0 {
            h *= factor;
            if h < 1e-14 {
                return Err(WalkError::StepSizeUnderflow { t });
            }
            continue;
        }

        let t1 = t + h;
        let seg = DenseSegment::build(t, h, &y, &y1, &k);

        // look for an outward crossing inside the accepted step: check the
        // endpoint plus a few interior dense points in case the step hops
        // over a narrow excursion
        let mut bracket: Option<(f64, f64)> = None;
        let mut t_lo = t;
        let mut g_lo = g_prev;
        const PROBES: usize = 4;
        for p in 1..=PROBES {
            let tp = t + h * p as f64 / PROBES as f64;
            let yp = if p == PROBES { y1 } else { seg.eval(tp) };
            let gp = manifold.sa(yp[0], yp[1]);
            if g_lo <= 0.0 && gp > 0.0 {
                bracket = Some((t_lo, tp));
                break;
            }
            t_lo = tp;
            g_lo = gp;
        }

        if let Some((mut lo, mut hi)) = bracket {
            // bisection on the dense interpolant down to |S_a| < event_tol
            let mut t_event = hi;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let ym = seg.eval(mid);
                let gm = manifold.sa(ym[0], ym[1]);
                if gm.abs() < opts.event_tol {
                    t_event = mid;
                    break;
                }
                if gm < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                t_event = hi;
                if hi - lo < 1e-16 * t1.max(1.0) {
                    break;
                }
            }
            // the interpolant is one order below the step solution; polish
            // the crossing with exact single steps from the segment start
            // and Newton on the crossing time
            let mut ye = seg.eval(t_event);
            for _ in 0..6 {
                let (y_exact, _, _) =
                    integ.try_step(&y, &k1, t_event - t, opts.rel_tol, opts.abs_tol)?;
                ye = y_exact;
                let g = manifold.sa(ye[0], ye[1]);
                if g.abs() < opts.event_tol {
                    break;
                }
                let st = ZeroDynState::from_array(ye);
                let (xd, yd) = velocities_from_momenta(&st, surface)?;
                let gdot = manifold.sa_dot(ye[0], ye[1], xd, yd);
                if gdot.abs() < 1e-12 {
                    break;
                }
                t_event = (t_event - g / gdot).clamp(t, t1);
            }
            let se = ZeroDynState::from_array(ye);
            let (xdot, ydot) = velocities_from_momenta(&se, surface)?;
            let sdot = manifold.sa_dot(ye[0], ye[1], xdot, ydot);
            if sdot > 0.0 {
                while next_sample < t_event {
                    samples.push(sample(next_sample, &seg.eval(next_sample))?);
                    next_sample += opts.max_sample_dt;
                }
                samples.push(sample(t_event, &ye)?);
                return Ok(SwitchCrossing {
                    state: se,
                    xdot,
                    ydot,
                    t_step: t_event,
                    samples,
                });
            }
            // inward or tangential touch: not a support exchange, fall through
        }

        while next_sample < t1 {
            samples.push(sample(next_sample, &seg.eval(next_sample))?);
            next_sample += opts.max_sample_dt;
        }

        t = t1;
        y = y1;
        k1 = k[6]; // FSAL
        g_prev = manifold.sa(y[0], y[1]);
        h *= factor;
    }

    Err(WalkError::NoSwitchReached { t_max: opts.t_max })
}

/// Integrate the zero dynamics for a fixed duration (no event handling).
/// Used by the periodicity conditions of the gait solver, which pin the
/// step duration rather than the crossing time.
pub fn integrate_fixed(
    start: &ZeroDynState,
    surface: &ComSurface,
    t_end: f64,
    opts: &IntegrationOptions,
) -> Result<ZeroDynState> {
    let integ = Integrator { surface, g: opts.g };
    let mut y = start.to_array();
    let mut t = 0.0;
    let mut k1 = integ.rhs(&y)?;
    let mut h = 1e-4_f64.min(t_end);
    if t_end == 0.0 {
        return Ok(*start);
    }
    while t < t_end {
        let clipped = t + h >= t_end;
        let h_eff = if clipped { t_end - t } else { h };
        let (y1, k, err) = integ.try_step(&y, &k1, h_eff, opts.rel_tol, opts.abs_tol)?;
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err > 1.0 {
            h = h_eff * factor;
            if h < 1e-14 {
                return Err(WalkError::StepSizeUnderflow { t });
            }
            continue;
        }
        t += h_eff;
        y = y1;
        k1 = k[6];
        if !clipped {
            h *= factor;
        }
    }
    Ok(ZeroDynState::from_array(y))
}
