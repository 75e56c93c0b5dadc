//! Browser bindings for the walking-gait toolkit.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript and no framework. Errors come back as
//! `{"error": "..."}` objects.

use hzd_walker::gait::{lip_periodic_gait, vlip_periodic_gait, GaitConfig, PeriodicGait};
use hzd_walker::hybrid::{simulate, StepSetup};
use hzd_walker::lip::{c_one_step, lambda_sync, sync_range, DEFAULT_GRAVITY};
use hzd_walker::stability::analyze;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

fn solve(c: f64, t_step: f64, z0: f64, a: f64) -> Result<PeriodicGait, String> {
    let config = GaitConfig::new(c, a, t_step, z0);
    vlip_periodic_gait(&config, None).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct WalkStep {
    /// World positions: stance point, CoM path, swing-foot path.
    stance: [f64; 2],
    com: Vec<[f64; 3]>,
    foot: Vec<[f64; 3]>,
    duration: f64,
    sync_measure: Option<f64>,
    post_velocity: [f64; 2],
}

#[derive(Serialize)]
struct WalkResult {
    steps: Vec<WalkStep>,
    classification: String,
    diverged_at: Option<usize>,
    xdot0: f64,
    ydot0: f64,
    step_length: f64,
    step_width: f64,
    lambda: Option<f64>,
}

/// Simulate a walk of `n_steps` from the periodic gait of `(C, T, z0, a)`
/// with the initial CoM velocities perturbed, and reconstruct the world
/// geometry (the per-step frames alternate their frontal axis and move with
/// the stance point).
#[wasm_bindgen]
pub fn walk_json(
    c: f64,
    t_step: f64,
    z0: f64,
    a: f64,
    perturb_xdot: f64,
    perturb_ydot: f64,
    n_steps: usize,
) -> String {
    let gait = match solve(c, t_step, z0, a) {
        Ok(g) => g,
        Err(e) => return err_json(e),
    };
    let setup = match StepSetup::from_velocities(
        &gait,
        gait.xdot0 + perturb_xdot,
        gait.ydot0 + perturb_ydot,
    ) {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let outcome = simulate(
        setup,
        &gait,
        n_steps.clamp(1, 60),
        &gait.integration_options(),
        true,
    );

    let (s, d) = (gait.config.step_length, gait.config.step_width);
    let mut stance = [0.0f64, 0.0];
    let mut side = 1.0f64;
    let mut steps = Vec::new();
    for (summary, trace) in outcome.summaries.iter().zip(&outcome.traces) {
        let com = trace
            .samples
            .iter()
            .map(|p| [stance[0] + p.x * s, stance[1] + side * p.y * d, p.z])
            .collect();
        let foot = trace
            .samples
            .iter()
            .map(|p| [stance[0] + p.xs * s, stance[1] + side * p.ys * d, p.zs])
            .collect();
        steps.push(WalkStep {
            stance,
            com,
            foot,
            duration: summary.duration,
            sync_measure: summary.sync_measure,
            post_velocity: summary.post_velocity,
        });
        // the next stance point is where the swing foot landed
        let exit = trace.samples.last().expect("trace has samples");
        stance = [stance[0] + exit.xs * s, stance[1] + side * exit.ys * d];
        side = -side;
    }

    let lambda = if gait.is_lip() {
        lambda_sync(c, gait.xdot0, gait.ydot0).ok()
    } else {
        None
    };
    let result = WalkResult {
        steps,
        classification: outcome.classification().to_string(),
        diverged_at: outcome.diverged.as_ref().map(|(i, _)| *i),
        xdot0: gait.xdot0,
        ydot0: gait.ydot0,
        step_length: s,
        step_width: d,
        lambda,
    };
    serde_json::to_string(&result).unwrap_or_else(err_json)
}

#[derive(Serialize)]
struct LambdaCurve {
    c: Vec<f64>,
    lambda: Vec<f64>,
    range: (f64, f64),
    c_opt: f64,
    xdot0: f64,
    ydot0: f64,
}

/// The synchronization eigenvalue of the flat gait of duration `T` as a
/// function of the manifold shape, with the contraction interval.
#[wasm_bindgen]
pub fn lambda_curve_json(t_step: f64, z0: f64, c_min: f64, c_max: f64, n: usize) -> String {
    let gait = match lip_periodic_gait(t_step, z0, 1.2, DEFAULT_GRAVITY) {
        Ok(g) => g,
        Err(e) => return err_json(e),
    };
    let range = match sync_range(gait.xdot0, gait.ydot0) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let n = n.clamp(2, 2000);
    let mut cs = Vec::with_capacity(n);
    let mut lams = Vec::with_capacity(n);
    for i in 0..n {
        let c = c_min + (c_max - c_min) * i as f64 / (n - 1) as f64;
        if let Ok(l) = lambda_sync(c, gait.xdot0, gait.ydot0) {
            cs.push(c);
            lams.push(l);
        }
    }
    let curve = LambdaCurve {
        c: cs,
        lambda: lams,
        range,
        c_opt: c_one_step(gait.xdot0, gait.ydot0),
        xdot0: gait.xdot0,
        ydot0: gait.ydot0,
    };
    serde_json::to_string(&curve).unwrap_or_else(err_json)
}

#[derive(Serialize)]
struct ScanPoint {
    a: f64,
    eigen_mags: [f64; 3],
    delta: f64,
    dx: f64,
    dy: f64,
}

#[derive(Serialize)]
struct StabilityScan {
    points: Vec<ScanPoint>,
    failed_at: Option<f64>,
}

/// Eigenvalue magnitudes of the return map as the oscillation amplitude
/// grows from zero (continuation-seeded), the interactive view of how
/// vertical CoM motion turns self-synchronization into self-stabilization.
#[wasm_bindgen]
pub fn stability_scan_json(c: f64, t_step: f64, z0: f64, a_max: f64, n: usize) -> String {
    let n = n.clamp(2, 25);
    let mut points = Vec::new();
    let mut failed_at = None;
    let mut seed: Option<PeriodicGait> = None;
    for i in 0..n {
        let a = a_max * i as f64 / (n - 1) as f64;
        let config = GaitConfig::new(c, a, t_step, z0);
        let gait = match vlip_periodic_gait(&config, seed.as_ref()) {
            Ok(g) => g,
            Err(_) => {
                failed_at = Some(a);
                break;
            }
        };
        match analyze(&gait, 1e-6, &gait.integration_options()) {
            Ok(report) => points.push(ScanPoint {
                a,
                eigen_mags: report.eigenvalue_magnitudes(),
                delta: report.delta,
                dx: gait.dx,
                dy: gait.dy,
            }),
            Err(_) => {
                failed_at = Some(a);
                break;
            }
        }
        seed = Some(gait);
    }
    serde_json::to_string(&StabilityScan { points, failed_at }).unwrap_or_else(err_json)
}
