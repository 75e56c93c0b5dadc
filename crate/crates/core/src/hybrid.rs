//! Hybrid walking: continuous single support terminated on the switching
//! manifold, followed by the instantaneous support exchange.
//!
//! The legs are massless, so the exchange relabels the frame without
//! velocity loss: the CoM position jumps to the step start enforced by the
//! swing-foot constraint, the sagittal velocity is kept, the frontal
//! velocity flips with the axis, and the vertical CoM velocity is carried
//! verbatim into the next step's height correction.

use crate::dynamics::{integrate_until_switch, IntegrationOptions, SwitchCrossing, ZeroDynState};
use crate::error::Result;
use crate::gait::{per_step_surface, PeriodicGait};
use crate::lip::{sync_measure, LipState};
use crate::surface::ComSurface;
use crate::swing::{BlendPolynomials, SwingConstraint};
use serde::{Deserialize, Serialize};

/// Divergence guard: velocities beyond this multiple of the periodic ones
/// end the walk.
pub const DIVERGENCE_FACTOR: f64 = 100.0;

/// One sampled point of a step, with the swing-foot constraint evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
    pub z: f64,
    pub zdot: f64,
    pub xs: f64,
    pub ys: f64,
    pub zs: f64,
}

/// Record of one support exchange.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactRecord {
    /// Vertical CoM velocity at the exchange, carried into the next step.
    pub zdot_carry: f64,
    pub post_state: ZeroDynState,
    pub post_xdot: f64,
    pub post_ydot: f64,
    /// Initial swing-foot horizontal position of the next step (the foot
    /// that was just in support, relabeled).
    pub swing_start: (f64, f64),
}

/// Time-sampled trajectory of one single-support phase plus its exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub samples: Vec<TraceSample>,
    pub duration: f64,
    pub exit: ZeroDynState,
    pub impact: ImpactRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub index: usize,
    /// Pre-impact exit values `(X, Y, Xdot, Ydot)`.
    pub pre_impact: [f64; 4],
    /// Post-impact CoM velocities.
    pub post_velocity: [f64; 2],
    pub duration: f64,
    /// Synchronization measure of the post-impact state (flat-gait mode).
    pub sync_measure: Option<f64>,
}

/// Everything needed to integrate one step.
#[derive(Debug, Clone)]
pub struct StepSetup {
    pub state: ZeroDynState,
    pub surface: ComSurface,
    pub swing: SwingConstraint,
}

impl StepSetup {
    /// The fixed point of the periodic gait.
    pub fn periodic(gait: &PeriodicGait) -> Result<Self> {
        let (state, surface) = gait.periodic_start()?;
        Self::assemble(gait, state, surface, (-1.0, 1.0))
    }

    /// A step from a caller-chosen post-impact state `(X0, Y0, xdot, ydot)`.
    /// The height correction is empty (no carried mismatch is known) and the
    /// swing foot starts from the nominal relabeled position `(-1, 1)`.
    pub fn from_velocities(gait: &PeriodicGait, xdot: f64, ydot: f64) -> Result<Self> {
        let nominal = gait.nominal_surface();
        let carry = nominal.vertical_velocity(gait.manifold.x0, gait.manifold.y0, xdot, ydot);
        let surface = per_step_surface(&nominal, xdot, ydot, carry, gait.dx)?;
        let state =
            ZeroDynState::from_velocities(&surface, gait.manifold.x0, gait.manifold.y0, xdot, ydot);
        Self::assemble(gait, state, surface, (-1.0, 1.0))
    }

    fn assemble(
        gait: &PeriodicGait,
        state: ZeroDynState,
        surface: ComSurface,
        swing_start: (f64, f64),
    ) -> Result<Self> {
        let params = gait.swing_params();
        let (xdot, ydot) = crate::dynamics::velocities_from_momenta(&state, &surface)?;
        let (xddot, yddot) = crate::dynamics::accelerations(&state, &surface, gait.config.g)?;
        let blends = BlendPolynomials::for_step(
            &params,
            state.x,
            state.y,
            xdot,
            ydot,
            xddot,
            yddot,
            swing_start,
        )?;
        Ok(Self {
            state,
            surface,
            swing: SwingConstraint::new(params, blends),
        })
    }
}

/// The support-exchange map. `exit_surface` is the surface the step was
/// integrated on (used to read the carried vertical velocity); the returned
/// setup carries the next step's corrected surface and swing blends.
pub fn impact(
    crossing: &SwitchCrossing,
    exit_surface: &ComSurface,
    gait: &PeriodicGait,
) -> Result<(ImpactRecord, StepSetup)> {
    let exit = &crossing.state;
    let zdot_carry = exit_surface.vertical_velocity(exit.x, exit.y, crossing.xdot, crossing.ydot);

    // relabeling: the landing constraint pins the new start to (X0, Y0)
    let m = &gait.manifold;
    let (post_xdot, post_ydot) = (crossing.xdot, -crossing.ydot);
    let swing_start = (m.x0 - exit.x, m.y0 + exit.y);

    let nominal = gait.nominal_surface();
    let surface = per_step_surface(&nominal, post_xdot, post_ydot, zdot_carry, gait.dx)?;
    let post_state = ZeroDynState::from_velocities(&surface, m.x0, m.y0, post_xdot, post_ydot);

    let record = ImpactRecord {
        zdot_carry,
        post_state,
        post_xdot,
        post_ydot,
        swing_start,
    };
    let params = gait.swing_params();
    let (xddot, yddot) = crate::dynamics::accelerations(&post_state, &surface, gait.config.g)?;
    let blends = BlendPolynomials::for_step(
        &params,
        m.x0,
        m.y0,
        post_xdot,
        post_ydot,
        xddot,
        yddot,
        swing_start,
    )?;
    let setup = StepSetup {
        state: post_state,
        surface,
        swing: SwingConstraint::new(params, blends),
    };
    Ok((record, setup))
}

/// Integrate one full step: continuous phase to the switching manifold,
/// then the support exchange. Returns the summary (index 0), the trace, and
/// the setup of the next step.
pub fn step(
    setup: &StepSetup,
    gait: &PeriodicGait,
    opts: &IntegrationOptions,
) -> Result<(StepSummary, StepTrace, StepSetup)> {
    let crossing = integrate_until_switch(&setup.state, &setup.surface, opts)?;
    let (record, next) = impact(&crossing, &setup.surface, gait)?;

    let samples = crossing
        .samples
        .iter()
        .map(|s| {
            let foot = setup.swing.position(s.state.x, s.state.y);
            TraceSample {
                t: s.t,
                x: s.state.x,
                y: s.state.y,
                xdot: s.xdot,
                ydot: s.ydot,
                z: s.z,
                zdot: s.zdot,
                xs: foot[0],
                ys: foot[1],
                zs: foot[2],
            }
        })
        .collect();

    let sync = if gait.is_lip() {
        let p = gait.config.lip_params();
        let post = LipState::new(
            record.post_state.x,
            record.post_state.y,
            record.post_xdot,
            record.post_ydot,
        );
        Some(sync_measure(&post, &p))
    } else {
        None
    };

    let summary = StepSummary {
        index: 0,
        pre_impact: [
            crossing.state.x,
            crossing.state.y,
            crossing.xdot,
            crossing.ydot,
        ],
        post_velocity: [record.post_xdot, record.post_ydot],
        duration: crossing.t_step,
        sync_measure: sync,
    };
    let trace = StepTrace {
        samples,
        duration: crossing.t_step,
        exit: crossing.state,
        impact: record,
    };
    Ok((summary, trace, next))
}

/// Result of a multi-step walk. A hard failure (no manifold crossing,
/// runaway velocities, degenerate constraint) ends the walk early and is
/// recorded rather than propagated, so partial results stay available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkOutcome {
    pub summaries: Vec<StepSummary>,
    #[serde(skip)]
    pub traces: Vec<StepTrace>,
    /// Step index and cause of a hard divergence, if any.
    pub diverged: Option<(usize, String)>,
}

impl WalkOutcome {
    /// Flat-gait synchronization verdict: true when the synchronization
    /// measure grew in magnitude across the walk instead of contracting.
    pub fn sync_diverged(&self) -> bool {
        let ls: Vec<f64> = self
            .summaries
            .iter()
            .filter_map(|s| s.sync_measure)
            .collect();
        match (ls.first(), ls.last()) {
            (Some(first), Some(last)) if ls.len() >= 2 => last.abs() > first.abs(),
            _ => false,
        }
    }

    /// Overall classification used by the batch exports.
    pub fn classification(&self) -> &'static str {
        if self.diverged.is_some() || self.sync_diverged() {
            "diverged"
        } else {
            "ok"
        }
    }
}

/// Walk `n_steps` steps from the given setup.
pub fn simulate(
    setup0: StepSetup,
    gait: &PeriodicGait,
    n_steps: usize,
    opts: &IntegrationOptions,
    keep_traces: bool,
) -> WalkOutcome {
    assert!(n_steps >= 1, "a walk needs at least one step");
    let mut outcome = WalkOutcome {
        summaries: Vec::new(),
        traces: Vec::new(),
        diverged: None,
    };
    let mut setup = setup0;
    let speed_limit = DIVERGENCE_FACTOR * gait.xdot0.abs().max(gait.ydot0.abs());
    for index in 0..n_steps {
        match step(&setup, gait, opts) {
            Ok((mut summary, trace, next)) => {
                summary.index = index;
                outcome.summaries.push(summary);
                if keep_traces {
                    outcome.traces.push(trace);
                }
                let [_, _, xd, yd] = summary.pre_impact;
                if xd.abs() > speed_limit || yd.abs() > speed_limit {
                    outcome.diverged = Some((index, "velocity runaway".into()));
                    break;
                }
                setup = next;
            }
            Err(err) => {
                outcome.diverged = Some((index, err.to_string()));
                break;
            }
        }
    }
    outcome
}
