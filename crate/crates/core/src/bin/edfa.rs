use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use edfa::assembly::TimeStep;
use edfa::driver::{
    run_steady, run_sweep, run_transient, write_steps_csv, write_sweep_csv, Problem, SimConfig, Summary,
};
use edfa::edfa::{build_stage1, build_stage2};
use edfa::grid::write_vtk;

#[derive(Parser)]
#[command(name = "edfa", version, about = "Mixed-hybrid Darcy flow solver with EDFA block preconditioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the steady-state system once.
    Steady(Common),
    /// Run the adaptive time loop.
    Transient(Common),
    /// Solve the first system once per preconditioner configuration.
    Sweep(Common),
    /// Write the assembled blocks in Matrix Market format.
    ExportSystem {
        #[command(flatten)]
        common: Common,
        /// Timestep in days; the steady system when omitted.
        #[arg(long)]
        dt: Option<f64>,
        /// Also write the preconditioner factors and patterns.
        #[arg(long)]
        preconditioner: bool,
    },
}

fn out_dir(common: &Common, cfg: &SimConfig) -> edfa::Result<PathBuf> {
    let dir = common.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("edfa-out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load(common: &Common) -> edfa::Result<(SimConfig, Problem, PathBuf)> {
    let cfg = SimConfig::load(&common.config)?;
    let problem = Problem::from_config(&cfg)?;
    let dir = out_dir(common, &cfg)?;
    log::info!("{} elements, {} faces, output in {}", problem.grid.n_elems(), problem.grid.n_faces(), dir.display());
    Ok((cfg, problem, dir))
}

fn write_pressure_vtk(problem: &Problem, p: &[f64], path: &Path) -> edfa::Result<()> {
    let kx: Vec<f64> = problem.field.tensors().iter().map(|k| k[(0, 0)]).collect();
    write_vtk(&problem.grid, &[("pressure", p), ("kxx", &kx), ("porosity", problem.props.porosities())], path)
}

fn run(cli: Cli) -> edfa::Result<()> {
    match cli.command {
        Command::Steady(common) => {
            let (cfg, problem, dir) = load(&common)?;
            let r = run_steady(&problem, &cfg)?;
            let summary = Summary::steady(&r);
            summary.write(dir.join("summary.json"))?;
            if cfg.output.history {
                r.solution.report.write_history_csv(dir.join("history.csv"))?;
            }
            if cfg.output.vtk {
                write_pressure_vtk(&problem, &r.solution.p, &dir.join("pressure.vtk"))?;
            }
            println!("steady: {} iterations, mu {:.3}, t_t {:.3e} s", summary.total_it, summary.mu, summary.total_t_t);
        }
        Command::Transient(common) => {
            let (cfg, problem, dir) = load(&common)?;
            let r = run_transient(&problem, &cfg)?;
            write_steps_csv(&r.steps, dir.join("steps.csv"))?;
            let summary = Summary::transient(&r);
            summary.write(dir.join("summary.json"))?;
            if cfg.output.history {
                for (k, rep) in r.reports.iter().enumerate() {
                    rep.write_history_csv(dir.join(format!("history_{:04}.csv", k + 1)))?;
                }
            }
            if cfg.output.vtk {
                for (step, p) in &r.snapshots {
                    write_pressure_vtk(&problem, p, &dir.join(format!("pressure_{step:04}.vtk")))?;
                }
                write_pressure_vtk(&problem, &r.p, &dir.join("pressure.vtk"))?;
            }
            println!(
                "transient: {} steps to t = {:.4} d, {} iterations, mean chi_inf {:.3e}",
                summary.n_steps,
                summary.final_time.unwrap_or(0.0),
                summary.total_it,
                summary.chi_mean.unwrap_or(0.0)
            );
        }
        Command::Sweep(common) => {
            let (cfg, problem, dir) = load(&common)?;
            let rows = run_sweep(&problem, &cfg)?;
            write_sweep_csv(&rows, dir.join("sweep.csv"))?;
            println!("sweep: {} configurations written to {}", rows.len(), dir.join("sweep.csv").display());
        }
        Command::ExportSystem { common, dt, preconditioner } => {
            let (cfg, problem, dir) = load(&common)?;
            let step = match dt {
                Some(v) => TimeStep::new(v)?,
                None => TimeStep::Steady,
            };
            let system = problem.assemble(step, &problem.p_init)?;
            system.export_matrix_market(&dir)?;
            if preconditioner {
                let stage1 = Arc::new(build_stage1(&system, &cfg.preconditioner)?);
                build_stage2(stage1, &system)?.export(dir.join("preconditioner"))?;
            }
            println!("exported {}x{} system to {}", system.dim(), system.dim(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
