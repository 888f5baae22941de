use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::cfl::{cfl, CflMean};
use super::config::{Problem, SimConfig};
use crate::assembly::{BlockSystem, TimeStep};
use crate::edfa::{build_stage1, build_stage2, EdfaConfig, EdfaPreconditioner, PatternChoice, Stage1, Stage1Stats};
use crate::krylov::{bicgstab, BicgstabOptions, SolveReport};
use crate::{Error, Result};

/// Solution of one linear system.
#[derive(Debug, Clone)]
pub struct Solution {
    pub p: Vec<f64>,
    /// Face pressures on every face, Dirichlet values included.
    pub pi_full: Vec<f64>,
    pub report: SolveReport,
}

/// Solves `system` with `pc`, failing with `NonConvergence` at `step` when
/// the tolerance is not met.
pub fn solve(system: &BlockSystem, pc: &EdfaPreconditioner, opts: &BicgstabOptions, step: usize) -> Result<Solution> {
    let (x, mut report) = bicgstab(system, pc, &system.rhs(), opts)?;
    report.t_p = pc.t_p();
    report.mu = pc.mu();
    if !report.converged {
        return Err(Error::NonConvergence {
            step,
            reason: format!(
                "{} iterations, relative residual {:.3e}, breakdown {:?}",
                report.n_it,
                report.final_relres(),
                report.breakdown
            ),
        });
    }
    let (pi_full, p) = system.split_solution(&x)?;
    Ok(Solution { p, pi_full, report })
}

#[derive(Debug, Clone)]
pub struct SteadyResult {
    pub solution: Solution,
    pub stage1: Stage1Stats,
    /// Largest relative element balance residual.
    pub max_balance: f64,
}

pub fn run_steady(problem: &Problem, cfg: &SimConfig) -> Result<SteadyResult> {
    let system = problem.assemble(TimeStep::Steady, &problem.p_init)?;
    let stage1 = Arc::new(build_stage1(&system, &cfg.preconditioner)?);
    let pc = build_stage2(Arc::clone(&stage1), &system)?;
    let mut solution = solve(&system, &pc, &cfg.solver, 0)?;
    solution.report.t_p0 = stage1.stats().t_p0;
    let max_balance = max_balance(&system, &solution)?;
    Ok(SteadyResult { solution, stage1: stage1.stats().clone(), max_balance })
}

fn max_balance(system: &BlockSystem, s: &Solution) -> Result<f64> {
    Ok(system.balance_residuals(&s.pi_full, &s.p)?.iter().map(|b| b.relative()).fold(0.0, f64::max))
}

/// Metrics of one transient step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    /// Time at the end of the step, in days.
    pub time: f64,
    pub dt: f64,
    pub n_it: usize,
    pub relres: f64,
    pub chi_inf: f64,
    pub dp_max: f64,
    pub t_p0: f64,
    pub t_p: f64,
    pub t_s: f64,
    pub t_t: f64,
    pub mu: f64,
    pub max_balance: f64,
}

#[derive(Debug, Clone)]
pub struct TransientResult {
    pub steps: Vec<StepRecord>,
    pub reports: Vec<SolveReport>,
    pub p: Vec<f64>,
    /// `(step, p)` pairs at the configured cadence.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub stage1: Arc<Stage1>,
    pub chi_mean: f64,
}

/// Time loop: stage 1 once, stage 2 and one solve per step, adaptive steps.
pub fn run_transient(problem: &Problem, cfg: &SimConfig) -> Result<TransientResult> {
    let ctrl = &cfg.timestep;
    ctrl.validate()?;
    let mut dt = ctrl.dt0;
    let mut p_prev = problem.p_init.clone();
    let mut system = problem.assemble(TimeStep::Dt(dt), &p_prev)?;
    let stage1 = Arc::new(build_stage1(&system, &cfg.preconditioner)?);
    let volumes = problem.grid.elem_volumes().to_vec();
    let mut out = TransientResult {
        steps: Vec::new(),
        reports: Vec::new(),
        p: p_prev.clone(),
        snapshots: Vec::new(),
        stage1: Arc::clone(&stage1),
        chi_mean: 0.0,
    };
    let mut mean = CflMean::default();
    let mut time = 0.0;
    for step in 1..=ctrl.n_steps {
        if let Some(t_end) = ctrl.t_end {
            if time >= t_end {
                break;
            }
            dt = dt.min(t_end - time);
        }
        if step > 1 {
            system = system.update_app_for_timestep(TimeStep::Dt(dt), &p_prev)?;
        }
        let pc = build_stage2(Arc::clone(&stage1), &system)?;
        let mut sol = solve(&system, &pc, &cfg.solver, step)?;
        if step == 1 {
            sol.report.t_p0 = stage1.stats().t_p0;
        }
        let fluxes = system.strong_fluxes(&sol.pi_full, &sol.p)?;
        let chi = cfl(&fluxes, &volumes, problem.props.porosities(), dt)?;
        mean.push(chi.chi_inf);
        let dp_max = sol.p.iter().zip(&p_prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        time += dt;
        let r = &sol.report;
        out.steps.push(StepRecord {
            step,
            time,
            dt,
            n_it: r.n_it,
            relres: r.final_relres(),
            chi_inf: chi.chi_inf,
            dp_max,
            t_p0: r.t_p0,
            t_p: r.t_p,
            t_s: r.t_s,
            t_t: r.t_t(),
            mu: r.mu,
            max_balance: max_balance(&system, &sol)?,
        });
        log::info!("step {step}: dt {dt:.4e} n_it {} chi_inf {:.3e}", r.n_it, chi.chi_inf);
        if cfg.output.snapshot_every > 0 && step % cfg.output.snapshot_every == 0 {
            out.snapshots.push((step, sol.p.clone()));
        }
        out.reports.push(sol.report);
        dt = ctrl.next(dt, dp_max);
        p_prev = sol.p;
    }
    out.p = p_prev;
    out.chi_mean = mean.mean();
    Ok(out)
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_add: Option<usize>,
    pub n_ent: Option<usize>,
    pub tau_filt: f64,
    pub n_it: usize,
    pub converged: bool,
    pub mu: f64,
    pub t_p0: f64,
    pub t_t: f64,
}

/// Preconditioner variants of a sweep, in output order.
pub fn sweep_configs(cfg: &SimConfig) -> Vec<(Option<(usize, usize)>, EdfaConfig)> {
    let base = cfg.preconditioner;
    let s = &cfg.sweep;
    let taus = if s.tau_filt.is_empty() { vec![base.tau_filt] } else { s.tau_filt.clone() };
    let mut pairs: Vec<Option<(usize, usize)>> = Vec::new();
    if s.n_add.is_empty() || s.n_ent.is_empty() {
        pairs.push(None);
    } else {
        for &a in &s.n_add {
            for &e in &s.n_ent {
                pairs.push(Some((a, e)));
            }
        }
    }
    let mut out = Vec::new();
    for pair in pairs {
        for &tau in &taus {
            let mut c = base;
            c.tau_filt = tau;
            if let Some((a, e)) = pair {
                c.pattern = PatternChoice::Dynamic;
                c.dynamic.n_add = a;
                c.dynamic.n_ent = e;
            }
            out.push((pair, c));
        }
    }
    out
}

/// Solves one system per configuration, concurrently; rows keep the order
/// of [`sweep_configs`]. Non-converged runs are reported, not raised.
pub fn run_sweep(problem: &Problem, cfg: &SimConfig) -> Result<Vec<SweepRow>> {
    let dt = if cfg.sweep.steady { TimeStep::Steady } else { TimeStep::Dt(cfg.timestep.dt0) };
    let system = problem.assemble(dt, &problem.p_init)?;
    let rhs = system.rhs();
    sweep_configs(cfg)
        .into_par_iter()
        .map(|(pair, pcfg)| {
            let stage1 = Arc::new(build_stage1(&system, &pcfg)?);
            let pc = build_stage2(Arc::clone(&stage1), &system)?;
            let (_, rep) = bicgstab(&system, &pc, &rhs, &cfg.solver)?;
            Ok(SweepRow {
                n_add: pair.map(|p| p.0),
                n_ent: pair.map(|p| p.1),
                tau_filt: pcfg.tau_filt,
                n_it: rep.n_it,
                converged: rep.converged,
                mu: pc.mu(),
                t_p0: stage1.stats().t_p0,
                t_t: pc.t_p() + rep.t_s,
            })
        })
        .collect()
}
