//! Parameter sweeps over gait families with deterministic output.
//!
//! A sweep grid varies two gait parameters over ranges. Rows (the first
//! axis) are independent work units distributed over a bounded worker pool;
//! within a row, cells run in order and each gait solve is seeded from the
//! previous solved neighbor, so continuation follows the inner axis.
//! Results are assembled in row-major order and rendered with 17
//! significant digits, which makes the CSV byte-identical for any
//! parallelism degree.

use crate::error::{Result, WalkError};
use crate::gait::{vlip_periodic_gait, GaitConfig, PeriodicGait};
use crate::hybrid::{StepTrace, WalkOutcome};
use crate::lip::lambda_sync;
use crate::stability::{analyze, DEFAULT_FD_STEP};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Environment variable overriding the worker count.
pub const THREADS_ENV_VAR: &str = "HZD_WALKER_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    /// One of `C`, `T`, `a`, `z0` (case-insensitive).
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(name: &str, min: f64, max: f64, count: usize) -> Self {
        Self {
            name: name.to_string(),
            min,
            max,
            count,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(WalkError::PreconditionViolated("axis count must be >= 1"));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(WalkError::PreconditionViolated("axis range must be finite"));
        }
        parse_axis_name(&self.name).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy)]
enum AxisName {
    ShapeC,
    StepT,
    AmplitudeA,
    HeightZ0,
}

fn parse_axis_name(name: &str) -> Result<AxisName> {
    match name.to_ascii_lowercase().as_str() {
        "c" => Ok(AxisName::ShapeC),
        "t" => Ok(AxisName::StepT),
        "a" => Ok(AxisName::AmplitudeA),
        "z0" => Ok(AxisName::HeightZ0),
        _ => Err(WalkError::PreconditionViolated(
            "axis name must be one of C, T, a, z0",
        )),
    }
}

fn apply_axis(config: &mut GaitConfig, axis: AxisName, value: f64) {
    match axis {
        AxisName::ShapeC => config.c = value,
        AxisName::StepT => config.t_step = value,
        AxisName::AmplitudeA => config.a = value,
        AxisName::HeightZ0 => config.z0 = value,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    pub base: GaitConfig,
    /// Worker count; `None` defers to the environment variable or the
    /// available parallelism.
    #[serde(default)]
    pub parallelism: Option<usize>,
    /// Finite-difference step of the stability Jacobian.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

impl SweepSpec {
    pub fn new(axis1: AxisSpec, axis2: AxisSpec, base: GaitConfig) -> Self {
        Self {
            axis1,
            axis2,
            base,
            parallelism: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        self.axis2.validate()?;
        self.base.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Ok,
    NoGait,
    Diverged,
}

impl CellOutcome {
    fn label(&self) -> &'static str {
        match self {
            CellOutcome::Ok => "ok",
            CellOutcome::NoGait => "no_gait",
            CellOutcome::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis1: f64,
    pub axis2: f64,
    pub outcome: CellOutcome,
    pub delta: Option<f64>,
    pub eigen_mags: Option<[f64; 3]>,
    pub dx: Option<f64>,
    pub dy: Option<f64>,
    /// Closed-form synchronization eigenvalue (flat-gait cells only).
    pub lambda: Option<f64>,
}

/// Resolve the worker count: the environment variable overrides the spec
/// value, which overrides the machine's available parallelism.
pub fn resolve_parallelism(spec_value: Option<usize>) -> usize {
    if let Ok(v) = std::env::var(THREADS_ENV_VAR) {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    if let Some(n) = spec_value {
        return n.max(1);
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Run the sweep with the spec's own parallelism resolution.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    sweep_with_threads(spec, resolve_parallelism(spec.parallelism))
}

/// Run the sweep on a fixed worker count. The output is independent of the
/// worker count: rows are self-contained and assembled in order.
pub fn sweep_with_threads(spec: &SweepSpec, workers: usize) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    let axis1 = parse_axis_name(&spec.axis1.name)?;
    let axis2 = parse_axis_name(&spec.axis2.name)?;
    let rows = spec.axis1.values();
    let cols = spec.axis2.values();

    let slots: Vec<Mutex<Option<Vec<SweepCell>>>> = rows.iter().map(|_| Mutex::new(None)).collect();
    let next_row = AtomicUsize::new(0);
    let workers = workers.max(1).min(rows.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let r = next_row.fetch_add(1, Ordering::Relaxed);
                if r >= rows.len() {
                    break;
                }
                let row = compute_row(spec, axis1, axis2, rows[r], &cols);
                *slots[r].lock().unwrap() = Some(row);
            });
        }
    });

    let mut cells = Vec::with_capacity(rows.len() * cols.len());
    for slot in slots {
        cells.extend(slot.into_inner().unwrap().expect("row computed"));
    }
    Ok(cells)
}

fn compute_row(
    spec: &SweepSpec,
    axis1: AxisName,
    axis2: AxisName,
    v1: f64,
    cols: &[f64],
) -> Vec<SweepCell> {
    let mut row = Vec::with_capacity(cols.len());
    let mut seed: Option<PeriodicGait> = None;
    for &v2 in cols {
        let mut config = spec.base.clone();
        apply_axis(&mut config, axis1, v1);
        apply_axis(&mut config, axis2, v2);
        let (cell, gait) = compute_cell(&config, seed.as_ref(), spec.fd_step, v1, v2);
        if let Some(g) = gait {
            seed = Some(g);
        }
        row.push(cell);
    }
    row
}

fn compute_cell(
    config: &GaitConfig,
    seed: Option<&PeriodicGait>,
    fd_step: f64,
    v1: f64,
    v2: f64,
) -> (SweepCell, Option<PeriodicGait>) {
    let mut cell = SweepCell {
        axis1: v1,
        axis2: v2,
        outcome: CellOutcome::NoGait,
        delta: None,
        eigen_mags: None,
        dx: None,
        dy: None,
        lambda: None,
    };
    // neighbor seeding first; a fresh continuation from the flat gait is
    // the deterministic fallback when the parameter jump is too large
    let gait = match vlip_periodic_gait(config, seed)
        .or_else(|_| vlip_periodic_gait(config, None))
    {
        Ok(g) => g,
        Err(_) => return (cell, None),
    };
    cell.dx = Some(gait.dx);
    cell.dy = Some(gait.dy);
    if gait.is_lip() {
        cell.lambda = lambda_sync(gait.config.c, gait.xdot0, gait.ydot0).ok();
    }
    match analyze(&gait, fd_step, &gait.integration_options()) {
        Ok(report) => {
            cell.outcome = CellOutcome::Ok;
            cell.delta = Some(report.delta);
            cell.eigen_mags = Some(report.eigenvalue_magnitudes());
        }
        Err(_) => cell.outcome = CellOutcome::Diverged,
    }
    (cell, Some(gait))
}

/// Render a float with 17 significant digits (lossless round-trip).
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Grid CSV: `axis1,axis2,outcome,delta,e1,e2,e3,DX,DY,lambdaL`.
pub fn grid_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("axis1,axis2,outcome,delta,e1,e2,e3,DX,DY,lambdaL\n");
    for c in cells {
        let [e1, e2, e3] = match c.eigen_mags {
            Some(m) => [Some(m[0]), Some(m[1]), Some(m[2])],
            None => [None, None, None],
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            format_float(c.axis1),
            format_float(c.axis2),
            c.outcome.label(),
            format_opt(c.delta),
            format_opt(e1),
            format_opt(e2),
            format_opt(e3),
            format_opt(c.dx),
            format_opt(c.dy),
            format_opt(c.lambda),
        ));
    }
    out
}

/// Trace CSV: `t,X,Y,Xdot,Ydot,z,zdot,Xs,Ys,zs,step_index` with the time
/// column cumulative over the walk.
pub fn trace_csv(traces: &[StepTrace]) -> String {
    let mut out = String::from("t,X,Y,Xdot,Ydot,z,zdot,Xs,Ys,zs,step_index\n");
    let mut t_offset = 0.0;
    for (index, trace) in traces.iter().enumerate() {
        for s in &trace.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                format_float(t_offset + s.t),
                format_float(s.x),
                format_float(s.y),
                format_float(s.xdot),
                format_float(s.ydot),
                format_float(s.z),
                format_float(s.zdot),
                format_float(s.xs),
                format_float(s.ys),
                format_float(s.zs),
                index,
            ));
        }
        t_offset += trace.duration;
    }
    out
}

/// Step-summary CSV with the walk-level classification repeated per row.
pub fn summary_csv(outcome: &WalkOutcome) -> String {
    let mut out = String::from(
        "step,X_minus,Y_minus,Xdot_minus,Ydot_minus,Xdot_plus,Ydot_plus,duration,sync_L,outcome\n",
    );
    let label = outcome.classification();
    for s in &outcome.summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.index,
            format_float(s.pre_impact[0]),
            format_float(s.pre_impact[1]),
            format_float(s.pre_impact[2]),
            format_float(s.pre_impact[3]),
            format_float(s.post_velocity[0]),
            format_float(s.post_velocity[1]),
            format_float(s.duration),
            s.sync_measure.map(format_float).unwrap_or_default(),
            label,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lip::periodic_velocities;

    fn lip_spec(n1: usize, n2: usize) -> SweepSpec {
        SweepSpec::new(
            AxisSpec::new("C", 1.05, 1.45, n1),
            AxisSpec::new("T", 0.5, 0.7, n2),
            GaitConfig::new(1.0, 0.0, 0.6, 0.7),
        )
    }

    #[test]
    fn lip_grid_tabulates_lambda_exactly() {
        let spec = lip_spec(3, 3);
        let cells = sweep_with_threads(&spec, 2).unwrap();
        assert_eq!(cells.len(), 9);
        let p = spec.base.lip_params();
        for cell in &cells {
            assert_eq!(cell.outcome, CellOutcome::Ok);
            let (xd, yd) = periodic_velocities(cell.axis2, &p);
            let want = lambda_sync(cell.axis1, xd, yd).unwrap();
            let got = cell.lambda.unwrap();
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn single_cell_grid() {
        let spec = SweepSpec::new(
            AxisSpec::new("C", 1.2, 1.2, 1),
            AxisSpec::new("a", 0.01, 0.01, 1),
            GaitConfig::new(1.0, 0.0, 0.6, 0.7),
        );
        let cells = sweep_with_threads(&spec, 4).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].outcome, CellOutcome::Ok);
        assert!(cells[0].delta.unwrap() < 1.0);
    }

    #[test]
    fn row_major_order() {
        let spec = lip_spec(2, 3);
        let cells = sweep_with_threads(&spec, 3).unwrap();
        let a1: Vec<f64> = cells.iter().map(|c| c.axis1).collect();
        assert_eq!(a1, vec![1.05, 1.05, 1.05, 1.45, 1.45, 1.45]);
        let a2: Vec<f64> = cells[..3].iter().map(|c| c.axis2).collect();
        assert_eq!(a2, vec![0.5, 0.6, 0.7]);
    }

    #[test]
    fn parallel_output_identical() {
        let spec = SweepSpec::new(
            AxisSpec::new("C", 1.05, 1.3, 3),
            AxisSpec::new("a", 0.0, 0.01, 3),
            GaitConfig::new(1.0, 0.0, 0.65, 0.7),
        );
        let one = grid_csv(&sweep_with_threads(&spec, 1).unwrap());
        let many = grid_csv(&sweep_with_threads(&spec, 8).unwrap());
        assert_eq!(one, many);
    }

    #[test]
    fn grid_csv_shape() {
        let spec = lip_spec(3, 3);
        let cells = sweep_with_threads(&spec, 2).unwrap();
        let csv = grid_csv(&cells);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "axis1,axis2,outcome,delta,e1,e2,e3,DX,DY,lambdaL");
        for line in &lines[1..] {
            assert_eq!(line.matches(',').count(), 9);
        }
    }

    #[test]
    fn float_format_is_lossless() {
        for &v in &[
            2.3147466759358624,
            -1.5135874110953933,
            0.0,
            1e-300,
            -3.5035714285714286,
        ] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn bad_axis_name_rejected() {
        let spec = SweepSpec::new(
            AxisSpec::new("Q", 0.0, 1.0, 2),
            AxisSpec::new("T", 0.5, 0.7, 2),
            GaitConfig::new(1.0, 0.0, 0.6, 0.7),
        );
        assert!(sweep(&spec).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = lip_spec(4, 5);
        let text = spec.to_json();
        let back = SweepSpec::from_json(&text).unwrap();
        assert_eq!(spec, back);
    }
}
