//! `vgka`: rate regions, limits and certificates for Gaussian source models.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use vgka::kkt::certify;
use vgka::mc::{build_joint, estimate_rates, sample};
use vgka::solver::{ascent_boundary_general, brute_force_grid, sweep_boundary, AscentConfig};
use vgka::{asymptotic_limit, rates_general, ConditionalCov, Error, Model, PointStatus, RegionBoundary};

#[derive(Parser)]
#[command(name = "vgka", version, about = "Secret-key rate regions of vector Gaussian sources")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "VGKA_THREADS")]
    threads: Option<usize>,
    /// Units of rates read from and written to the user.
    #[arg(long, global = true, value_enum, default_value_t = Units::Nats)]
    units: Units,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Units {
    Nats,
    Bits,
}

impl Units {
    /// Nats per unit.
    fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LN_2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    /// Sweep for single-output models, ascent otherwise.
    Auto,
    Sweep,
    Ascent,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Validate {
        model: PathBuf,
    },
    /// Boundary of the rate region on a uniform grid, as CSV `rp,rk`.
    Region {
        model: PathBuf,
        /// CSV destination; a JSON sidecar is written next to it. Stdout if absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Largest public rate, in the chosen units.
        #[arg(long, default_value_t = 20.0)]
        rp_max: f64,
        /// Number of grid points from 0 to rp-max.
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Sweep grid resolution per axis, or grid density for `--method grid`.
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    /// Key rate limit as the public rate grows without bound.
    Limit {
        model: PathBuf,
    },
    /// Solve one boundary point and print its optimality certificate.
    KktCheck {
        model: PathBuf,
        /// Public rate, in the chosen units.
        #[arg(long)]
        rp: f64,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// Certificate destination. Stdout if absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Enhanced (degraded) noise covariance at one boundary point.
    Enhance {
        model: PathBuf,
        #[arg(long)]
        rp: f64,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
    },
    /// Compare the solver against an exhaustive grid (two-dimensional sources).
    Oracle {
        model: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        rp_max: f64,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 60)]
        density: usize,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// Largest accepted difference, in the chosen units.
        #[arg(long, default_value_t = 1e-2)]
        tolerance: f64,
    },
    /// Monte-Carlo estimates of the rate pair for `q = q_scale * sigma_x`.
    Mc {
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        q_scale: f64,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. }
            | Error::MaxIterationsExceeded(_)
            | Error::NoValidMultiplier(_)
            | Error::NotDegraded
            | Error::MuZero
            | Error::SingularEmpiricalCov
            | Error::SolverFailure(_) => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn solver_failure(message: impl Into<String>) -> Failure {
    Failure { code: 3, message: message.into() }
}

type Outcome = std::result::Result<(), Failure>;

fn load(path: &Path) -> std::result::Result<Model, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Model::from_json(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn rp_grid(rp_max: f64, points: usize, units: Units) -> std::result::Result<Vec<f64>, Failure> {
    if !(rp_max > 0.0 && rp_max.is_finite()) {
        return Err(invalid("--rp-max must be positive"));
    }
    if points < 2 {
        return Err(invalid("--points must be at least 2"));
    }
    let top = rp_max * units.scale();
    Ok((0..points).map(|k| top * k as f64 / (points - 1) as f64).collect())
}

fn single_output(m: &Model) -> bool {
    let g = m.as_general();
    g.m_y() == 1 && g.m_z() == 1
}

fn solve(m: &Model, grid: &[f64], method: Method, resolution: usize) -> vgka::Result<RegionBoundary> {
    let g = m.as_general();
    match method {
        Method::Auto if single_output(m) => sweep_boundary(&g, grid, resolution),
        Method::Sweep => sweep_boundary(&g, grid, resolution),
        Method::Auto | Method::Ascent => ascent_boundary_general(&g, grid, &AscentConfig::default()),
        Method::Grid => brute_force_grid(&g, grid, resolution),
    }
}

fn region(
    m: &Model,
    output: Option<&Path>,
    grid: &[f64],
    method: Method,
    resolution: usize,
    units: Units,
) -> Outcome {
    let b = solve(m, grid, method, resolution)?;
    let mut csv = String::from("rp,rk\n");
    for p in &b.points {
        csv.push_str(&format!("{},{}\n", fmt(p.rp / units.scale()), fmt(p.rk / units.scale())));
    }
    write_out(output, &csv)?;
    if let Some(path) = output {
        let sidecar = json!({
            "units": units.name(),
            "method": method,
            "model_digest": b.model_digest,
            "asymptotic_limit": b.asymptotic_limit / units.scale(),
            "monotone": b.is_monotone(),
            "solver_meta": b.solver_meta,
            "failures": b.failures,
        });
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n";
        let side = path.with_extension("json");
        fs::write(&side, text).map_err(|e| invalid(format!("{}: {e}", side.display())))?;
    }
    if !b.failures.is_empty() {
        return Err(solver_failure(format!("{} grid points failed", b.failures.len())));
    }
    let unconverged = b.solver_meta.iter().filter(|m| m.status == PointStatus::Unconverged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} points did not converge; their rates are lower bounds");
    }
    Ok(())
}

/// Optimizer at one public rate (nats).
fn optimizer(m: &Model, rp: f64, resolution: usize) -> std::result::Result<(ConditionalCov, PointStatus), Failure> {
    if !(rp >= 0.0 && rp.is_finite()) {
        return Err(invalid("--rp must be finite and nonnegative"));
    }
    let b = solve(m, &[rp], Method::Auto, resolution)?;
    let meta = b.solver_meta.first().ok_or_else(|| solver_failure("no boundary point"))?;
    let q = ConditionalCov::new(m.sigma_x(), meta.sigma_star.clone())
        .map_err(|e| solver_failure(format!("optimizer is numerically singular ({e}); status {:?}", meta.status)))?;
    Ok((q, meta.status))
}

fn run(cli: Cli) -> Outcome {
    let units = cli.units;
    match cli.command {
        Command::Validate { model } => {
            let m = load(&model)?;
            let g = m.as_general();
            let kind = match m {
                Model::General(_) => "general",
                Model::Aligned(_) => "aligned",
            };
            println!("valid {kind} model: m_x = {}, m_y = {}, m_z = {}", g.m_x(), g.m_y(), g.m_z());
            println!("digest {}", m.digest());
            Ok(())
        }
        Command::Region { model, output, rp_max, points, resolution, method } => {
            let m = load(&model)?;
            let grid = rp_grid(rp_max, points, units)?;
            region(&m, output.as_deref(), &grid, method, resolution, units)
        }
        Command::Limit { model } => {
            let m = load(&model)?;
            let l = asymptotic_limit(&m.as_general());
            println!("{:.6} nats ({:.6} bits)", l, l / std::f64::consts::LN_2);
            Ok(())
        }
        Command::KktCheck { model, rp, resolution, output } => {
            let m = load(&model)?;
            let rp = rp * units.scale();
            let (q, status) = optimizer(&m, rp, resolution)?;
            if status == PointStatus::Saturated {
                eprintln!("note: point is saturated; multipliers are at the edge of resolution");
            }
            let cert = certify(&m, &q, rp)?;
            let mut value = serde_json::to_value(&cert).expect("certificate serializes");
            value["max_residual"] = json!(cert.residuals.max());
            value["status"] = json!(status);
            let text = serde_json::to_string_pretty(&value).expect("certificate serializes") + "\n";
            write_out(output.as_deref(), &text)?;
            if !cert.is_valid() {
                return Err(solver_failure(format!("largest residual {:.3e} exceeds 1e-6", cert.residuals.max())));
            }
            Ok(())
        }
        Command::Enhance { model, rp, resolution } => {
            let m = load(&model)?;
            let rp = rp * units.scale();
            let (q, _) = optimizer(&m, rp, resolution)?;
            let cert = certify(&m, &q, rp)?;
            let out = json!({
                "mu": cert.mu,
                "wy_tilde": cert.wy_tilde,
                "enhanced_precision": cert.enhanced_precision,
                "sigma_star": cert.sigma_star,
                "max_residual": cert.residuals.max(),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
            Ok(())
        }
        Command::Oracle { model, rp_max, points, density, resolution, tolerance } => {
            let m = load(&model)?;
            let grid = rp_grid(rp_max, points, units)?;
            let solved = solve(&m, &grid, Method::Auto, resolution)?;
            let reference = solve(&m, &grid, Method::Grid, density)?;
            let mut worst = 0.0_f64;
            println!("rp,solver,grid,diff ({})", units.name());
            for (a, b) in solved.points.iter().zip(&reference.points) {
                let d = (a.rk - b.rk).abs() / units.scale();
                worst = worst.max(d);
                println!(
                    "{:.6},{:.10},{:.10},{:.3e}",
                    a.rp / units.scale(),
                    a.rk / units.scale(),
                    b.rk / units.scale(),
                    d
                );
            }
            println!("max difference {worst:.3e} {}", units.name());
            if worst > tolerance {
                return Err(solver_failure(format!("solver and grid differ by {worst:.3e} > {tolerance:e}")));
            }
            Ok(())
        }
        Command::Mc { model, samples, seed, q_scale } => {
            let m = load(&model)?;
            let g = m.as_general();
            if !(q_scale > 0.0 && q_scale < 1.0) {
                return Err(invalid("--q-scale must lie in (0, 1)"));
            }
            let q = ConditionalCov::new(g.sigma_x(), g.sigma_x().scale(q_scale))?;
            let exact = rates_general(&g, &q)?;
            let batch = sample(&build_joint(&g, &q)?, samples, seed)?;
            let (rp, rk) = estimate_rates(&batch)?;
            let s = units.scale();
            let u = units.name();
            println!("samples {samples}, seed {seed}, q = {q_scale} sigma_x");
            println!(
                "I(U;X) - I(U;Y): estimate {:.6} +- {:.6} {u}, analytic {:.6} {u}",
                rp.value / s,
                rp.std_error / s,
                exact.rp / s
            );
            println!(
                "I(U;Y) - I(U;Z): estimate {:.6} +- {:.6} {u}, analytic {:.6} {u}",
                rk.value / s,
                rk.std_error / s,
                exact.rk / s
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
