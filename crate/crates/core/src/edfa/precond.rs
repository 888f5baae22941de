use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::{base_pattern, full_pattern, static_patterns, PatternSet, Prototype, Provenance};
use super::restricted::{grow_pattern_dynamic, DynamicConfig, RestrictedSolver, SparseRhs};
use crate::assembly::BlockSystem;
use crate::krylov::LinearOperator;
use crate::sparse::{ic_factorize, ilu_factorize, mm, norm2, CsrMatrix, Fill, IndexSet, InnerFactorization};
use crate::{Error, Result};

/// Where small entries are removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filtration {
    #[default]
    None,
    /// On each approximate row of `G` and column of `F`.
    Pre,
    /// Row-wise on the approximate Schur complement.
    PostS,
    /// Row-wise on `H`.
    PostH,
}

/// How the index sets `Q^(m)` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PatternChoice {
    #[default]
    Base,
    Static {
        prototype: Prototype,
    },
    /// Grown from the base pattern.
    Dynamic,
    /// All face unknowns; for small problems and tests.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdfaConfig {
    pub pattern: PatternChoice,
    pub dynamic: DynamicConfig,
    pub filtration: Filtration,
    pub tau_filt: f64,
    /// Incomplete Cholesky of `-A_pipi`.
    pub a_fill: Fill,
    /// Incomplete LU of the approximate Schur complement.
    pub s_fill: Fill,
    /// Worker threads for the per-element solves; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for EdfaConfig {
    fn default() -> Self {
        Self {
            pattern: PatternChoice::Base,
            dynamic: DynamicConfig::default(),
            filtration: Filtration::None,
            tau_filt: 1e-3,
            a_fill: Fill::threshold(1e-4),
            s_fill: Fill::threshold(1e-4),
            threads: None,
        }
    }
}

impl EdfaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pattern == PatternChoice::Dynamic {
            self.dynamic.validate()?;
        }
        if !(self.tau_filt >= 0.0) || !self.tau_filt.is_finite() {
            return Err(Error::invalid(format!("tau_filt must be finite and >= 0, got {}", self.tau_filt)));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be >= 1"));
        }
        Ok(())
    }
}

/// Summary of the pattern stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stage1Stats {
    pub t_p0: f64,
    pub pattern_entries: usize,
    pub sweeps: usize,
    pub added: usize,
    pub nnz_g: usize,
    pub nnz_f: usize,
    pub nnz_h: usize,
}

/// Timestep-independent part: patterns, `G`, `F`, `H` and the inner factor of `-A_pipi`.
#[derive(Debug)]
pub struct Stage1 {
    config: EdfaConfig,
    a_pipi: Arc<CsrMatrix>,
    patterns: PatternSet,
    g: CsrMatrix,
    f: CsrMatrix,
    h: CsrMatrix,
    a_inv: InnerFactorization,
    stats: Stage1Stats,
}

struct ElementRows {
    q: IndexSet,
    g: Vec<(usize, f64)>,
    f: Vec<(usize, f64)>,
    sweeps: usize,
    added: usize,
}

fn pre_filter(q: &IndexSet, x: &[f64], tau: Option<f64>) -> Vec<(usize, f64)> {
    let cut = tau.map_or(0.0, |t| t * norm2(x));
    q.iter().zip(x.iter().copied()).filter(|&(_, v)| v != 0.0 && v.abs() >= cut).collect()
}

/// Keeps `|s_ij| >= tau ||s_i||_2` and the diagonal.
pub fn post_filter(s: &CsrMatrix, tau: f64) -> CsrMatrix {
    let norms = s.row_norms();
    s.filter(|r, c, v| r == c || v.abs() >= tau * norms[r])
}

impl Stage1 {
    pub fn config(&self) -> &EdfaConfig {
        &self.config
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn g(&self) -> &CsrMatrix {
        &self.g
    }

    pub fn f(&self) -> &CsrMatrix {
        &self.f
    }

    pub fn h(&self) -> &CsrMatrix {
        &self.h
    }

    pub fn a_inv(&self) -> &InnerFactorization {
        &self.a_inv
    }

    pub fn stats(&self) -> &Stage1Stats {
        &self.stats
    }
}

fn initial_patterns(system: &BlockSystem, choice: PatternChoice) -> PatternSet {
    match choice {
        PatternChoice::Base | PatternChoice::Dynamic => base_pattern(system.a_ppi()),
        PatternChoice::Static { prototype } => static_patterns(system, prototype),
        PatternChoice::Full => full_pattern(system.n_face_dofs(), system.n_elems()),
    }
}

fn element_rows(
    a: &CsrMatrix,
    a_ppi: &CsrMatrix,
    a_pip_t: &CsrMatrix,
    q0: &IndexSet,
    m: usize,
    cfg: &EdfaConfig,
) -> Result<ElementRows> {
    let g_rhs = SparseRhs::row(a_ppi, m);
    let f_rhs = SparseRhs::row(a_pip_t, m);
    let (solver, g, sweeps, added) = if cfg.pattern == PatternChoice::Dynamic {
        let grown = grow_pattern_dynamic(a, g_rhs, q0.clone(), &cfg.dynamic)?;
        (grown.solver, grown.x, grown.sweeps, grown.added)
    } else {
        let s = RestrictedSolver::new(a, q0.clone())?;
        let g = s.solve(g_rhs);
        (s, g, 0, 0)
    };
    let f = solver.solve(f_rhs);
    let tau = (cfg.filtration == Filtration::Pre).then_some(cfg.tau_filt);
    let q = solver.pattern().clone();
    Ok(ElementRows { g: pre_filter(&q, &g, tau), f: pre_filter(&q, &f, tau), q, sweeps, added })
}

/// Builds patterns, `G`, `F`, `H = G A_pipi F` and the inner factor of `-A_pipi`.
pub fn build_stage1(system: &BlockSystem, cfg: &EdfaConfig) -> Result<Stage1> {
    cfg.validate()?;
    let start = Instant::now();
    let [a_pipi, a_pip, a_ppi] = system.shared_blocks();
    let (n_pi, n_e) = (system.n_face_dofs(), system.n_elems());
    let a_pip_t = a_pip.transpose();
    let init = initial_patterns(system, cfg.pattern);
    let work = || -> Result<Vec<ElementRows>> {
        (0..n_e).into_par_iter().map(|m| element_rows(a_pipi, a_ppi, &a_pip_t, init.get(m), m, cfg)).collect()
    };
    let rows = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut g_t = Vec::new();
    let mut f_t = Vec::new();
    let mut sets = Vec::with_capacity(n_e);
    let mut stats = Stage1Stats::default();
    for (m, r) in rows.into_iter().enumerate() {
        g_t.extend(r.g.iter().map(|&(i, v)| (m, i, v)));
        f_t.extend(r.f.iter().map(|&(i, v)| (i, m, v)));
        stats.sweeps += r.sweeps;
        stats.added += r.added;
        sets.push(r.q);
    }
    let provenance = if cfg.pattern == PatternChoice::Dynamic { Provenance::Dynamic } else { init.provenance() };
    let patterns = PatternSet::new(sets, provenance);
    let g = CsrMatrix::from_triplets(n_e, n_pi, &g_t)?;
    let f = CsrMatrix::from_triplets(n_pi, n_e, &f_t)?;
    let mut h = g.matmul(&a_pipi.matmul(&f)?)?;
    if cfg.filtration == Filtration::PostH {
        h = post_filter(&h, cfg.tau_filt);
    }
    let a_inv = ic_factorize(&a_pipi.scaled(-1.0), cfg.a_fill)?;
    stats.pattern_entries = patterns.total_size();
    stats.nnz_g = g.nnz();
    stats.nnz_f = f.nnz();
    stats.nnz_h = h.nnz();
    stats.t_p0 = start.elapsed().as_secs_f64();
    log::debug!("edfa stage 1: {:?}", stats);
    Ok(Stage1 { config: *cfg, a_pipi: Arc::clone(a_pipi), patterns, g, f, h, a_inv, stats })
}

/// The complete block preconditioner for one timestep.
#[derive(Debug, Clone)]
pub struct EdfaPreconditioner {
    stage1: Arc<Stage1>,
    a_pip: Arc<CsrMatrix>,
    a_ppi: Arc<CsrMatrix>,
    s: CsrMatrix,
    s_inv: InnerFactorization,
    t_p: f64,
    mu: f64,
}

/// Forms `S = A_pp - H`, filters it if requested and factors it.
pub fn build_stage2(stage1: Arc<Stage1>, system: &BlockSystem) -> Result<EdfaPreconditioner> {
    let start = Instant::now();
    let [a_pipi, a_pip, a_ppi] = system.shared_blocks();
    if !Arc::ptr_eq(a_pipi, &stage1.a_pipi) {
        return Err(Error::State("stage 1 was built for a different system".into()));
    }
    let cfg = &stage1.config;
    let mut s = system.a_pp().add_scaled(-1.0, &stage1.h, true)?;
    if cfg.filtration == Filtration::PostS {
        s = post_filter(&s, cfg.tau_filt);
    }
    let s_inv = ilu_factorize(&s, cfg.s_fill)?;
    let mu = (stage1.a_inv.nnz() + a_pip.nnz() + a_ppi.nnz() + s_inv.nnz()) as f64 / system.nnz() as f64;
    Ok(EdfaPreconditioner {
        a_pip: Arc::clone(a_pip),
        a_ppi: Arc::clone(a_ppi),
        stage1,
        s,
        s_inv,
        t_p: start.elapsed().as_secs_f64(),
        mu,
    })
}

impl EdfaPreconditioner {
    /// Both stages at once.
    pub fn build(system: &BlockSystem, cfg: &EdfaConfig) -> Result<Self> {
        build_stage2(Arc::new(build_stage1(system, cfg)?), system)
    }

    /// Reuses stage 1 for a new timestep of the same system.
    pub fn rebuild(&self, system: &BlockSystem) -> Result<Self> {
        build_stage2(Arc::clone(&self.stage1), system)
    }

    pub fn stage1(&self) -> &Arc<Stage1> {
        &self.stage1
    }

    pub fn schur(&self) -> &CsrMatrix {
        &self.s
    }

    pub fn schur_factor(&self) -> &InnerFactorization {
        &self.s_inv
    }

    /// Stage 2 construction time in seconds.
    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    pub fn t_p0(&self) -> f64 {
        self.stage1.stats.t_p0
    }

    /// Preconditioner density relative to the system matrix.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Writes `G`, `F`, `H`, `S` in Matrix Market form and the pattern sets.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        mm::mm_write(&self.stage1.g, dir.join("G.mtx"))?;
        mm::mm_write(&self.stage1.f, dir.join("F.mtx"))?;
        mm::mm_write(&self.stage1.h, dir.join("H.mtx"))?;
        mm::mm_write(&self.s, dir.join("S.mtx"))?;
        self.stage1.patterns.write(dir.join("patterns.txt"))
    }
}

impl LinearOperator for EdfaPreconditioner {
    fn dim(&self) -> usize {
        self.a_pip.nrows() + self.a_ppi.nrows()
    }

    fn apply(&self, r: &[f64], y: &mut [f64]) -> Result<()> {
        let n_pi = self.a_pip.nrows();
        if r.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "preconditioner of size {} applied to {}",
                self.dim(),
                r.len()
            )));
        }
        let (r_pi, r_p) = r.split_at(n_pi);
        let (y_pi, y_p) = y.split_at_mut(n_pi);
        let a_inv = &self.stage1.a_inv;
        // the factor approximates -A_pipi
        a_inv.apply(r_pi, y_pi)?;
        y_pi.iter_mut().for_each(|v| *v = -*v);
        let mut t = r_p.to_vec();
        self.a_ppi.spmv_add_unchecked(-1.0, y_pi, &mut t);
        self.s_inv.apply(&t, y_p)?;
        let mut u = vec![0.0; n_pi];
        self.a_pip.spmv_unchecked(y_p, &mut u);
        let corr = a_inv.solve(&u)?;
        for (a, c) in y_pi.iter_mut().zip(corr) {
            *a += c;
        }
        Ok(())
    }
}
