//! Right-preconditioned Bi-CGStab.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::BlockSystem;
use crate::sparse::{dot, norm2, CsrMatrix};
use crate::{Error, Result};

/// A square linear map `y = Op x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.spmv(x, y)
    }
}

impl LinearOperator for BlockSystem {
    fn dim(&self) -> usize {
        BlockSystem::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        BlockSystem::apply(self, x, y)
    }
}

/// The identity, for unpreconditioned runs.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.copy_from_slice(x);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BicgstabOptions {
    pub tol: f64,
    pub max_it: usize,
}

impl Default for BicgstabOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_it: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreakdownKind {
    /// `(r_hat, r)` vanished.
    Rho,
    /// `(r_hat, v)` vanished.
    Alpha,
    /// `omega` vanished or `t` was zero.
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakdown {
    pub iteration: usize,
    pub kind: BreakdownKind,
}

/// Outcome and metrics of one linear solve. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub n_it: usize,
    pub converged: bool,
    pub breakdown: Option<Breakdown>,
    /// `||r_k|| / ||r_0||`, starting with 1 at `k = 0`.
    pub relres_history: Vec<f64>,
    /// `||b - A x|| / ||b||` recomputed after the loop.
    pub true_relres: f64,
    pub t_p0: f64,
    pub t_p: f64,
    pub t_s: f64,
    pub mu: f64,
}

impl SolveReport {
    pub fn t_t(&self) -> f64 {
        self.t_p + self.t_s
    }

    pub fn final_relres(&self) -> f64 {
        *self.relres_history.last().expect("history is never empty")
    }

    /// Writes `iteration,relres` rows.
    pub fn write_history_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "iteration,relres")?;
        for (k, r) in self.relres_history.iter().enumerate() {
            writeln!(w, "{k},{r:.6e}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves `A x = b` from `x0 = 0` with right preconditioning `A M^{-1} u = b`,
/// stopping when `||r_k|| <= tol ||r_0||`. Breakdowns end the loop and are
/// reported, not raised.
pub fn bicgstab(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    opts: &BicgstabOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if b.len() != n || m.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "bicgstab: operator {n}, preconditioner {}, rhs {}",
            m.dim(),
            b.len()
        )));
    }
    if !(opts.tol > 0.0) || opts.max_it == 0 {
        return Err(Error::invalid(format!("bicgstab needs tol > 0 and max_it >= 1, got {opts:?}")));
    }
    let start = Instant::now();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = norm2(&r);
    let mut report = SolveReport {
        n_it: 0,
        converged: false,
        breakdown: None,
        relres_history: vec![1.0],
        true_relres: 0.0,
        t_p0: 0.0,
        t_p: 0.0,
        t_s: 0.0,
        mu: 0.0,
    };
    if r0 == 0.0 {
        report.converged = true;
        report.t_s = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let tiny = f64::EPSILON * f64::EPSILON;

    for it in 1..=opts.max_it {
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() <= tiny * r0 * norm2(&r) {
            report.breakdown = Some(Breakdown { iteration: it, kind: BreakdownKind::Rho });
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        m.apply(&p, &mut y)?;
        a.apply(&y, &mut v)?;
        let rv = dot(&rhat, &v);
        if rv.abs() <= tiny * r0 * norm2(&v) || !rv.is_finite() {
            report.breakdown = Some(Breakdown { iteration: it, kind: BreakdownKind::Alpha });
            break;
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        let snorm = norm2(&s) / r0;
        report.n_it = it;
        if snorm <= opts.tol {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            r.copy_from_slice(&s);
            report.relres_history.push(snorm);
            report.converged = true;
            break;
        }
        m.apply(&s, &mut z)?;
        a.apply(&z, &mut t)?;
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            report.breakdown = Some(Breakdown { iteration: it, kind: BreakdownKind::Omega });
            break;
        }
        omega = dot(&t, &s) / tt;
        for k in 0..n {
            x[k] += alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
        let rel = norm2(&r) / r0;
        report.relres_history.push(rel);
        if rel <= opts.tol {
            report.converged = true;
            break;
        }
        if omega == 0.0 {
            report.breakdown = Some(Breakdown { iteration: it, kind: BreakdownKind::Omega });
            break;
        }
    }
    let mut ax = vec![0.0; n];
    a.apply(&x, &mut ax)?;
    let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    report.true_relres = norm2(&res) / norm2(b);
    report.t_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}
