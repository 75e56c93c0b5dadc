//! Poincare return-map analysis on the pre-impact section.
//!
//! The section is the switching manifold just before support exchange,
//! coordinatized by `(Y, Xdot, Ydot)` with the abscissa recovered from the
//! exit branch of the ellipse. The map applies the exchange and one
//! continuous phase; its Jacobian at the fixed point is formed by central
//! finite differences and its eigenvalues come from the characteristic
//! cubic. The largest eigenvalue magnitude is the stability criterion.

use crate::dynamics::{integrate_until_switch, IntegrationOptions, SwitchCrossing, ZeroDynState};
use crate::error::{Result, WalkError};
use crate::gait::PeriodicGait;
use crate::hybrid::{impact, simulate, StepSetup};
use crate::lip::{lambda_sync, sync_measure, LipState};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default relative perturbation for the return-map Jacobian.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Pre-impact section coordinates: the exit ordinate and velocities. The
/// abscissa is implicit through the exit branch of the switching set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareCoords {
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
}

impl PoincareCoords {
    pub fn new(y: f64, xdot: f64, ydot: f64) -> Self {
        Self { y, xdot, ydot }
    }

    /// The fixed point of a solved periodic gait.
    pub fn fixed_point(gait: &PeriodicGait) -> Self {
        Self::new(gait.manifold.yf, gait.xdot0, -gait.ydot0)
    }

    fn to_array(self) -> [f64; 3] {
        [self.y, self.xdot, self.ydot]
    }

    fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub jacobian: [[f64; 3]; 3],
    /// Eigenvalues as `(re, im)` pairs, sorted by descending magnitude.
    pub eigenvalues: [(f64, f64); 3],
    /// Stability criterion: the largest eigenvalue magnitude.
    pub delta: f64,
    /// Closed-form synchronization eigenvalue (flat-gait mode only).
    pub lambda_analytic: Option<f64>,
    pub fd_step: f64,
}

impl StabilityReport {
    pub fn eigenvalue_magnitudes(&self) -> [f64; 3] {
        let m = |p: (f64, f64)| Complex64::new(p.0, p.1).norm();
        [
            m(self.eigenvalues[0]),
            m(self.eigenvalues[1]),
            m(self.eigenvalues[2]),
        ]
    }
}

/// One application of the return map: reconstruct the pre-impact state,
/// exchange support, integrate the next single-support phase to its exit.
pub fn poincare_map(
    coords: &PoincareCoords,
    gait: &PeriodicGait,
    opts: &IntegrationOptions,
) -> Result<PoincareCoords> {
    let crossing = continue_from_section(coords, gait, opts)?;
    Ok(PoincareCoords::new(
        crossing.state.y,
        crossing.xdot,
        crossing.ydot,
    ))
}

fn continue_from_section(
    coords: &PoincareCoords,
    gait: &PeriodicGait,
    opts: &IntegrationOptions,
) -> Result<SwitchCrossing> {
    let manifold = &gait.manifold;
    let x = manifold.x_on_manifold(coords.y)?;
    let nominal = gait.nominal_surface();
    // the height correction of the finished step is identically zero on the
    // exit side, so the nominal surface carries the exchange
    let exit_state = ZeroDynState::from_velocities(&nominal, x, coords.y, coords.xdot, coords.ydot);
    let crossing = SwitchCrossing {
        state: exit_state,
        xdot: coords.xdot,
        ydot: coords.ydot,
        t_step: 0.0,
        samples: Vec::new(),
    };
    let (_, setup) = impact(&crossing, &nominal, gait)?;
    integrate_until_switch(&setup.state, &setup.surface, opts).map_err(|e| WalkError::Diverged {
        step: 0,
        cause: e.to_string(),
    })
}

/// Central finite-difference Jacobian of the return map at the gait's fixed
/// point. The perturbation of each coordinate is `fd_step` scaled by the
/// coordinate magnitude.
///
/// The entries inherit the integrator's global accuracy divided by the
/// perturbation; tighten `rel_tol`/`abs_tol` in `opts` (1e-12 instead of
/// the 1e-10 default) when eigenvalues are needed beyond ~1e-3.
pub fn jacobian(
    gait: &PeriodicGait,
    fd_step: f64,
    opts: &IntegrationOptions,
) -> Result<[[f64; 3]; 3]> {
    let fp = PoincareCoords::fixed_point(gait).to_array();
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let h = fd_step * fp[j].abs().max(1.0);
        let mut plus = fp;
        plus[j] += h;
        let mut minus = fp;
        minus[j] -= h;
        let fp_ = poincare_map(&PoincareCoords::from_array(plus), gait, opts)?.to_array();
        let fm = poincare_map(&PoincareCoords::from_array(minus), gait, opts)?.to_array();
        for i in 0..3 {
            jac[i][j] = (fp_[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Eigenvalues of a real 3x3 matrix through its characteristic cubic
/// (trigonometric and Cardano branches), one Newton polish per root,
/// sorted by descending magnitude.
pub fn eigen3(m: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);

    // p(x) = x^3 + a2 x^2 + a1 x + a0
    let (a2, a1, a0) = (-tr, minors, -det);
    // depressed cubic t^3 + p t + q with x = t - a2/3
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;

    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
    let mut roots: [Complex64; 3];
    if disc > 0.0 {
        // one real root, one conjugate pair
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        let real = u + v;
        let re = -real / 2.0;
        let im = (3.0f64.sqrt() / 2.0) * (u - v);
        roots = [
            Complex64::new(real - shift, 0.0),
            Complex64::new(re - shift, im),
            Complex64::new(re - shift, -im),
        ];
    } else {
        // three real roots (trigonometric form)
        let r = (-p / 3.0).sqrt();
        let arg = if r == 0.0 {
            0.0
        } else {
            (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0)
        };
        let theta = arg.acos();
        roots = [0, 1, 2].map(|k| {
            let t = 2.0 * r * ((theta - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
            Complex64::new(t - shift, 0.0)
        });
    }

    // one Newton step per root on the characteristic cubic
    let poly = |z: Complex64| ((z + a2) * z + a1) * z + a0;
    let dpoly = |z: Complex64| (3.0 * z + 2.0 * a2) * z + a1;
    for root in roots.iter_mut() {
        let d = dpoly(*root);
        if d.norm() > 1e-30 {
            let corrected = *root - poly(*root) / d;
            // keep conjugate symmetry: only accept a polish that stays on
            // the same side of the real axis
            if (corrected.im == 0.0) == (root.im == 0.0) || corrected.im * root.im > 0.0 {
                *root = corrected;
            }
        }
    }
    roots.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    roots
}

/// Full stability analysis of a solved gait.
pub fn analyze(
    gait: &PeriodicGait,
    fd_step: f64,
    opts: &IntegrationOptions,
) -> Result<StabilityReport> {
    let jac = jacobian(gait, fd_step, opts)?;
    let eig = eigen3(&jac);
    let lambda_analytic = if gait.is_lip() {
        lambda_sync(gait.config.c, gait.xdot0, gait.ydot0).ok()
    } else {
        None
    };
    Ok(StabilityReport {
        jacobian: jac,
        eigenvalues: [
            (eig[0].re, eig[0].im),
            (eig[1].re, eig[1].im),
            (eig[2].re, eig[2].im),
        ],
        delta: eig[0].norm(),
        lambda_analytic,
        fd_step,
    })
}

/// Ratios of consecutive synchronization measures of a perturbed flat-gait
/// walk (the empirical view of the synchronization eigenvalue). The
/// sequence truncates when the measure falls below 1e-14 in magnitude.
pub fn sync_ratio_empirical(
    gait: &PeriodicGait,
    velocity_perturbation: (f64, f64),
    n_steps: usize,
    opts: &IntegrationOptions,
) -> Result<Vec<f64>> {
    if !gait.is_lip() {
        return Err(WalkError::PreconditionViolated(
            "empirical synchronization ratios require the flat gait (a = 0)",
        ));
    }
    let p = gait.config.lip_params();
    let (xd, yd) = (
        gait.xdot0 + velocity_perturbation.0,
        gait.ydot0 + velocity_perturbation.1,
    );
    let setup = StepSetup::from_velocities(gait, xd, yd)?;
    let start = LipState::new(gait.manifold.x0, gait.manifold.y0, xd, yd);
    let mut measures = vec![sync_measure(&start, &p)];
    let outcome = simulate(setup, gait, n_steps, opts, false);
    for s in &outcome.summaries {
        if let Some(l) = s.sync_measure {
            measures.push(l);
        }
    }
    let mut ratios = Vec::new();
    for w in measures.windows(2) {
        if w[0].abs() < 1e-14 {
            break;
        }
        ratios.push(w[1] / w[0]);
    }
    Ok(ratios)
}
