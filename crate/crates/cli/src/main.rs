//! Command-line front end: gait synthesis, walking simulation, stability
//! analysis, synchronization checks, and parameter sweeps with
//! deterministic CSV output.
//!
//! Exit codes: 0 on success, 1 on a domain error (no gait, divergence at
//! setup, bad file contents), 2 on a usage error.

use clap::{Args, Parser, Subcommand};
use hzd_walker::gait::{vlip_periodic_gait, GaitConfig, PeriodicGait};
use hzd_walker::hybrid::{simulate, StepSetup};
use hzd_walker::lip::{c_one_step, lambda_sync, sync_range};
use hzd_walker::stability::{analyze, sync_ratio_empirical, DEFAULT_FD_STEP};
use hzd_walker::sweep::{
    grid_csv, resolve_parallelism, summary_csv, sweep_with_threads, trace_csv, SweepSpec,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hzd-walker",
    about = "3D inverted-pendulum walking gaits: synthesis, simulation, stability",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a periodic gait and write it to a gait file.
    FindGait(FindGaitArgs),
    /// Walk several steps from a gait file and export summaries and traces.
    Simulate(SimulateArgs),
    /// Eigenvalues of the return map of a solved gait.
    Stability(StabilityArgs),
    /// Run a two-axis parameter sweep from a spec file.
    Sweep(SweepArgs),
    /// Closed-form synchronization analysis of a flat gait, with an
    /// empirical cross-check.
    SyncCheck(SyncCheckArgs),
}

#[derive(Args)]
struct GaitParams {
    /// Switching-ellipse shape parameter.
    #[arg(long = "C", allow_negative_numbers = true)]
    c: f64,
    /// Single-support duration (s).
    #[arg(long = "T")]
    t_step: f64,
    /// Nominal CoM height (m).
    #[arg(long, default_value_t = 0.7)]
    z0: f64,
    /// Vertical oscillation amplitude (m); 0 is the flat gait.
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    /// Swing height gain (negative). Default scales the peak swing height
    /// to 0.09 m over the periodic orbit.
    #[arg(long = "nu-z", allow_negative_numbers = true)]
    nu_z: Option<f64>,
    /// Halve the swing peak (reduced-impact landing).
    #[arg(long, default_value_t = false)]
    reduced_impact: bool,
    /// Gravity (m/s^2).
    #[arg(long, default_value_t = 9.81)]
    g: f64,
    /// Physical step length (m), for de-normalization only.
    #[arg(long, default_value_t = 0.3)]
    step_length: f64,
    /// Physical step width (m), for de-normalization only.
    #[arg(long, default_value_t = 0.15)]
    step_width: f64,
}

impl GaitParams {
    fn config(&self) -> GaitConfig {
        GaitConfig {
            c: self.c,
            a: self.a,
            t_step: self.t_step,
            z0: self.z0,
            nu_z: self.nu_z,
            g: self.g,
            step_length: self.step_length,
            step_width: self.step_width,
        }
    }
}

#[derive(Args)]
struct FindGaitArgs {
    #[command(flatten)]
    params: GaitParams,
    /// Output gait file (JSON).
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Gait file produced by find-gait.
    #[arg(long)]
    gait: PathBuf,
    /// Number of steps to walk.
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Initial sagittal velocity (defaults to the gait's periodic value).
    #[arg(long, allow_negative_numbers = true)]
    xdot0: Option<f64>,
    /// Initial frontal velocity (defaults to the gait's periodic value).
    #[arg(long, allow_negative_numbers = true)]
    ydot0: Option<f64>,
    /// Added to the initial sagittal velocity.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    perturb_xdot: f64,
    /// Added to the initial frontal velocity.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    perturb_ydot: f64,
    /// Step-summary CSV path.
    #[arg(short, long)]
    out: PathBuf,
    /// Optional trajectory CSV path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    /// Gait file produced by find-gait.
    #[arg(long)]
    gait: PathBuf,
    /// Relative finite-difference step of the return-map Jacobian.
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    fd_step: f64,
    /// Optional JSON report path.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Grid CSV path.
    #[arg(short, long)]
    out: PathBuf,
    /// Worker count (overrides the spec and the environment).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SyncCheckArgs {
    /// Switching-ellipse shape parameter.
    #[arg(long = "C")]
    c: f64,
    /// Single-support duration (s).
    #[arg(long = "T")]
    t_step: f64,
    /// Nominal CoM height (m).
    #[arg(long, default_value_t = 0.7)]
    z0: f64,
    /// Gravity (m/s^2).
    #[arg(long, default_value_t = 9.81)]
    g: f64,
    /// Steps of the empirical ratio check.
    #[arg(long, default_value_t = 8)]
    steps: usize,
    /// Velocity perturbation of the empirical check.
    #[arg(long, default_value_t = 1e-4)]
    perturb: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::FindGait(args) => find_gait(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Stability(args) => run_stability(args),
        Command::Sweep(args) => run_sweep(args),
        Command::SyncCheck(args) => sync_check(args),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn load_gait(path: &Path) -> Result<PeriodicGait, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    PeriodicGait::from_json(&text).map_err(|e| format!("bad gait file {}: {e}", path.display()))
}

fn find_gait(args: FindGaitArgs) -> Result<(), String> {
    let mut config = args.params.config();
    if args.params.reduced_impact {
        if let Some(nu_z) = config.nu_z {
            config.nu_z = Some(nu_z / 2.0);
        }
    }
    let mut gait = vlip_periodic_gait(&config, None).map_err(|e| e.to_string())?;
    if args.params.reduced_impact && args.params.nu_z.is_none() {
        // default gain was scaled to the full peak; halve it
        gait.nu_z /= 2.0;
    }
    write_file(&args.out, &gait.to_json())?;
    println!(
        "gait: C={} T={} a={} -> DX={:.6e} DY={:.6e} Xdot0={:.6} Ydot0={:.6} zdot_carry={:.6e}",
        config.c,
        config.t_step,
        config.a,
        gait.dx,
        gait.dy,
        gait.xdot0,
        gait.ydot0,
        gait.zdot_carry,
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), String> {
    let gait = load_gait(&args.gait)?;
    if args.steps == 0 {
        return Err("need at least one step".into());
    }
    let xdot0 = args.xdot0.unwrap_or(gait.xdot0) + args.perturb_xdot;
    let ydot0 = args.ydot0.unwrap_or(gait.ydot0) + args.perturb_ydot;
    let setup = StepSetup::from_velocities(&gait, xdot0, ydot0).map_err(|e| e.to_string())?;
    let keep_traces = args.trace.is_some();
    let outcome = simulate(
        setup,
        &gait,
        args.steps,
        &gait.integration_options(),
        keep_traces,
    );
    write_file(&args.out, &summary_csv(&outcome))?;
    if let Some(trace_path) = &args.trace {
        write_file(trace_path, &trace_csv(&outcome.traces))?;
    }
    if let Some((step, cause)) = &outcome.diverged {
        println!("walk diverged at step {step}: {cause}");
    }
    println!(
        "{} steps walked, outcome {}; wrote {}",
        outcome.summaries.len(),
        outcome.classification(),
        args.out.display()
    );
    Ok(())
}

fn run_stability(args: StabilityArgs) -> Result<(), String> {
    let gait = load_gait(&args.gait)?;
    let report =
        analyze(&gait, args.fd_step, &gait.integration_options()).map_err(|e| e.to_string())?;
    println!("return-map Jacobian (fd_step {}):", report.fd_step);
    for row in &report.jacobian {
        println!("  [{:+.9e} {:+.9e} {:+.9e}]", row[0], row[1], row[2]);
    }
    for (k, (re, im)) in report.eigenvalues.iter().enumerate() {
        println!(
            "eigenvalue {}: {re:+.9e} {im:+.9e}i  |.| = {:.9}",
            k + 1,
            (re * re + im * im).sqrt()
        );
    }
    println!("stability criterion delta = {:.9}", report.delta);
    if let Some(lam) = report.lambda_analytic {
        println!("analytic lambda_L = {lam:.9}");
    }
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(path, &json)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), String> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| format!("cannot read {}: {e}", args.spec.display()))?;
    let spec = SweepSpec::from_json(&text)
        .map_err(|e| format!("bad sweep spec {}: {e}", args.spec.display()))?;
    let threads = match args.threads {
        Some(n) => n.max(1),
        None => resolve_parallelism(spec.parallelism),
    };
    let cells = sweep_with_threads(&spec, threads).map_err(|e| e.to_string())?;
    let ok = cells
        .iter()
        .filter(|c| matches!(c.outcome, hzd_walker::sweep::CellOutcome::Ok))
        .count();
    write_file(&args.out, &grid_csv(&cells))?;
    println!(
        "swept {} cells ({} ok) on {threads} threads; wrote {}",
        cells.len(),
        ok,
        args.out.display()
    );
    Ok(())
}

fn sync_check(args: SyncCheckArgs) -> Result<(), String> {
    let gait = hzd_walker::gait::lip_periodic_gait(args.t_step, args.z0, args.c, args.g)
        .map_err(|e| e.to_string())?;
    let lam = lambda_sync(args.c, gait.xdot0, gait.ydot0).map_err(|e| e.to_string())?;
    let (lo, hi) = sync_range(gait.xdot0, gait.ydot0).map_err(|e| e.to_string())?;
    println!(
        "periodic gait T={} s, z0={} m: Xdot0={:.4}, Ydot0={:.4}",
        args.t_step, args.z0, gait.xdot0, gait.ydot0
    );
    println!("lambda_L(C={}) = {lam:.4}", args.c);
    println!("synchronization range: ({lo:.4}, {hi:.4})");
    println!(
        "one-step shape C_opt = {:.4}",
        c_one_step(gait.xdot0, gait.ydot0)
    );
    println!(
        "self-synchronizing: {}",
        if args.c > lo && args.c < hi {
            "yes"
        } else {
            "no"
        }
    );
    let ratios = sync_ratio_empirical(
        &gait,
        (args.perturb, 0.0),
        args.steps,
        &gait.integration_options(),
    )
    .map_err(|e| e.to_string())?;
    let rendered: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    println!("empirical L ratios: {}", rendered.join(" "));
    Ok(())
}
