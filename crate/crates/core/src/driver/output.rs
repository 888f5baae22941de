use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::run::{SteadyResult, StepRecord, SweepRow, TransientResult};
use crate::Result;

/// Writes `step,dt,n_it,relres,chi_inf,t_p,t_s` plus the remaining step metrics.
pub fn write_steps_csv(steps: &[StepRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,time,dt,n_it,relres,chi_inf,t_p,t_s,t_t,t_p0,dp_max,mu,max_balance")?;
    for s in steps {
        writeln!(
            w,
            "{},{:.9e},{:.9e},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6},{:.3e}",
            s.step,
            s.time,
            s.dt,
            s.n_it,
            s.relres,
            s.chi_inf,
            s.t_p,
            s.t_s,
            s.t_t,
            s.t_p0,
            s.dp_max,
            s.mu,
            s.max_balance
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "n_add,n_ent,tau_filt,n_it,converged,mu,t_p0,t_t")?;
    let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{},{},{:.6},{:.6e},{:.6e}",
            opt(r.n_add),
            opt(r.n_ent),
            r.tau_filt,
            r.n_it,
            r.converged,
            r.mu,
            r.t_p0,
            r.t_t
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Run totals written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: &'static str,
    pub n_steps: usize,
    pub final_time: Option<f64>,
    pub total_it: usize,
    pub max_it: usize,
    pub t_p0: f64,
    pub total_t_p: f64,
    pub total_t_s: f64,
    pub total_t_t: f64,
    pub chi_mean: Option<f64>,
    pub mu: f64,
    pub max_balance: f64,
    pub pattern_entries: usize,
    pub nnz_h: usize,
}

impl Summary {
    pub fn steady(r: &SteadyResult) -> Self {
        let rep = &r.solution.report;
        Self {
            mode: "steady",
            n_steps: 1,
            final_time: None,
            total_it: rep.n_it,
            max_it: rep.n_it,
            t_p0: rep.t_p0,
            total_t_p: rep.t_p,
            total_t_s: rep.t_s,
            total_t_t: rep.t_t(),
            chi_mean: None,
            mu: rep.mu,
            max_balance: r.max_balance,
            pattern_entries: r.stage1.pattern_entries,
            nnz_h: r.stage1.nnz_h,
        }
    }

    pub fn transient(r: &TransientResult) -> Self {
        let s = &r.steps;
        let sum = |f: fn(&StepRecord) -> f64| s.iter().map(f).sum::<f64>();
        Self {
            mode: "transient",
            n_steps: s.len(),
            final_time: s.last().map(|x| x.time),
            total_it: s.iter().map(|x| x.n_it).sum(),
            max_it: s.iter().map(|x| x.n_it).max().unwrap_or(0),
            t_p0: r.stage1.stats().t_p0,
            total_t_p: sum(|x| x.t_p),
            total_t_s: sum(|x| x.t_s),
            total_t_t: sum(|x| x.t_t),
            chi_mean: Some(r.chi_mean),
            mu: s.last().map_or(0.0, |x| x.mu),
            max_balance: s.iter().map(|x| x.max_balance).fold(0.0, f64::max),
            pattern_entries: r.stage1.stats().pattern_entries,
            nnz_h: r.stage1.stats().nnz_h,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
