use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::{
    element_matrix, interelement_flux_coefficients, local_flux_coefficients, ElementMatrix, FluxSide, LinearFlux,
};
use crate::grid::{BoundarySpec, ConductivityField, FaceCondition, FluidRockProps, HexGrid, NUM_LOCAL_FACES};
use crate::sparse::mm::{mm_write, mm_write_vector, mm_write_with, Symmetry};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Time discretization of the accumulation term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// No accumulation term.
    Steady,
    /// Backward Euler step in days.
    Dt(f64),
}

impl TimeStep {
    pub fn new(dt: f64) -> Result<Self> {
        if dt == f64::INFINITY {
            return Ok(Self::Steady);
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self::Dt(dt))
    }

    /// `1 / dt`, zero at steady state.
    pub fn inverse(self) -> f64 {
        match self {
            Self::Steady => 0.0,
            Self::Dt(dt) => 1.0 / dt,
        }
    }

    pub fn is_steady(self) -> bool {
        matches!(self, Self::Steady)
    }
}

/// Mapping between grid faces and face-pressure unknowns (Dirichlet faces removed).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDofMap {
    face_to_dof: Vec<Option<usize>>,
    dof_to_face: Vec<usize>,
}

impl FaceDofMap {
    fn new(conditions: &[FaceCondition]) -> Self {
        let mut face_to_dof = vec![None; conditions.len()];
        let mut dof_to_face = Vec::new();
        for (f, c) in conditions.iter().enumerate() {
            if !matches!(c, FaceCondition::Dirichlet(_)) {
                face_to_dof[f] = Some(dof_to_face.len());
                dof_to_face.push(f);
            }
        }
        Self { face_to_dof, dof_to_face }
    }

    pub fn dof(&self, face: usize) -> Option<usize> {
        self.face_to_dof[face]
    }

    pub fn face(&self, dof: usize) -> usize {
        self.dof_to_face[dof]
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_face.len()
    }

    pub fn n_faces(&self) -> usize {
        self.face_to_dof.len()
    }
}

/// Flux through one element face as used by the finite-volume balance.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceFlux {
    Linear(LinearFlux),
    /// Total outward flux in m^3/d.
    Prescribed(f64),
}

/// Per-element mass balance residual and the magnitude of its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceResidual {
    pub residual: f64,
    pub scale: f64,
}

impl BalanceResidual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual.abs() / self.scale
        } else {
            self.residual.abs()
        }
    }
}

/// The face/element pressure system
///
/// ```text
/// [ A_pipi  A_pip ] [ pi ]   [ f_pi ]
/// [ A_ppi   A_pp  ] [ p  ] = [ f_p  ]
/// ```
///
/// with Dirichlet faces eliminated. Everything except `A_pp` and `f_p` is
/// shared between time steps.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    grid: Arc<HexGrid>,
    conditions: Arc<Vec<FaceCondition>>,
    dofs: Arc<FaceDofMap>,
    elements: Arc<Vec<ElementMatrix>>,
    a_pipi: Arc<CsrMatrix>,
    a_pip: Arc<CsrMatrix>,
    a_ppi: Arc<CsrMatrix>,
    a_pp_steady: Arc<CsrMatrix>,
    f_pi: Arc<Vec<f64>>,
    f_p_static: Arc<Vec<f64>>,
    /// `Omega c` per element.
    storage: Arc<Vec<f64>>,
    /// `Omega s` per element.
    volume_source: Arc<Vec<f64>>,
    has_dirichlet: bool,
    a_pp: CsrMatrix,
    f_p: Vec<f64>,
    dt: TimeStep,
    p_prev: Vec<f64>,
}

/// Flux of element `e` through its local face `slot`: strong two-sided flux on
/// free interior faces, the local flux on Dirichlet faces and the prescribed
/// value on Neumann faces.
pub fn fv_face_flux(
    grid: &HexGrid,
    elements: &[ElementMatrix],
    conditions: &[FaceCondition],
    e: usize,
    slot: usize,
) -> Result<FaceFlux> {
    let f = grid.elem_faces(e)[slot];
    let side = FluxSide { elem: e, matrix: &elements[e], faces: grid.elem_faces(e), slot };
    match conditions[f] {
        FaceCondition::Neumann(v) => Ok(FaceFlux::Prescribed(v * grid.face_area(f))),
        FaceCondition::Dirichlet(_) => Ok(FaceFlux::Linear(local_flux_coefficients(side))),
        FaceCondition::Free => {
            let (n, nslot) =
                grid.neighbor(e, slot).ok_or_else(|| Error::Assembly(format!("boundary face {f} has no condition")))?;
            let other = FluxSide { elem: n, matrix: &elements[n], faces: grid.elem_faces(n), slot: nslot };
            Ok(FaceFlux::Linear(interelement_flux_coefficients(side, other)?))
        }
    }
}

fn dirichlet_value(c: FaceCondition) -> f64 {
    match c {
        FaceCondition::Dirichlet(v) => v,
        _ => unreachable!("face without dof must be Dirichlet"),
    }
}

/// Assembles the block system for one time step.
pub fn assemble(
    grid: &HexGrid,
    field: &ConductivityField,
    props: &FluidRockProps,
    bc: &BoundarySpec,
    dt: TimeStep,
    p_prev: &[f64],
) -> Result<BlockSystem> {
    let ne = grid.n_elems();
    if field.len() != ne || props.len() != ne {
        return Err(Error::DimensionMismatch(format!(
            "grid has {ne} elements, field {} and properties {}",
            field.len(),
            props.len()
        )));
    }
    let conditions = bc.resolve(grid)?;
    let dofs = FaceDofMap::new(&conditions);
    let elements: Vec<ElementMatrix> = (0..ne)
        .into_par_iter()
        .map(|e| element_matrix(grid, e, field.tensor(e), props.gamma))
        .collect::<Result<_>>()?;
    let nd = dofs.n_dofs();

    // flux continuity rows
    let mut t_pipi = Vec::with_capacity(36 * ne);
    let mut t_pip = Vec::with_capacity(6 * ne);
    let mut f_pi = vec![0.0; nd];
    for (e, em) in elements.iter().enumerate() {
        let faces = grid.elem_faces(e);
        for i in 0..6 {
            let Some(di) = dofs.dof(faces[i]) else { continue };
            t_pip.push((di, e, em.row_sum(i)));
            for j in 0..6 {
                match dofs.dof(faces[j]) {
                    Some(dj) => t_pipi.push((di, dj, -em.binv(i, j))),
                    None => f_pi[di] += em.binv(i, j) * dirichlet_value(conditions[faces[j]]),
                }
            }
        }
    }
    for (f, c) in conditions.iter().enumerate() {
        if let (FaceCondition::Neumann(v), Some(d)) = (c, dofs.dof(f)) {
            f_pi[d] += v * grid.face_area(f);
        }
    }

    // finite-volume balance rows, built per element in parallel and merged in order
    type Rows = (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>, f64);
    let rows: Vec<Rows> = (0..ne)
        .into_par_iter()
        .map(|e| -> Result<Rows> {
            let mut t_ppi = Vec::with_capacity(72);
            let mut t_pp = Vec::with_capacity(12);
            let mut rhs = grid.elem_volume(e) * props.source(e);
            for slot in 0..6 {
                match fv_face_flux(grid, &elements, &conditions, e, slot)? {
                    FaceFlux::Prescribed(q) => rhs -= q,
                    FaceFlux::Linear(lf) => {
                        for (el, c) in lf.elem {
                            t_pp.push((e, el, c));
                        }
                        for (f, c) in lf.faces {
                            match dofs.dof(f) {
                                Some(d) => t_ppi.push((e, d, c)),
                                None => rhs -= c * dirichlet_value(conditions[f]),
                            }
                        }
                    }
                }
            }
            Ok((t_ppi, t_pp, rhs))
        })
        .collect::<Result<_>>()?;
    let mut t_ppi = Vec::with_capacity(rows.iter().map(|r| r.0.len()).sum());
    let mut t_pp = Vec::with_capacity(rows.iter().map(|r| r.1.len()).sum());
    let mut f_p_static = Vec::with_capacity(ne);
    for (a, b, r) in rows {
        t_ppi.extend(a);
        t_pp.extend(b);
        f_p_static.push(r);
    }

    let a_pipi = CsrMatrix::from_triplets_keep_diag(nd, nd, &t_pipi)?;
    let a_pip = CsrMatrix::from_triplets(nd, ne, &t_pip)?;
    let a_ppi = CsrMatrix::from_triplets(ne, nd, &t_ppi)?;
    let a_pp_steady = CsrMatrix::from_triplets_keep_diag(ne, ne, &t_pp)?;
    let storage: Vec<f64> = (0..ne).map(|e| grid.elem_volume(e) * props.storage(e)).collect();
    let volume_source: Vec<f64> = (0..ne).map(|e| grid.elem_volume(e) * props.source(e)).collect();
    let has_dirichlet = conditions.iter().any(|c| matches!(c, FaceCondition::Dirichlet(_)));

    let base = BlockSystem {
        grid: Arc::new(grid.clone()),
        conditions: Arc::new(conditions),
        dofs: Arc::new(dofs),
        elements: Arc::new(elements),
        a_pipi: Arc::new(a_pipi),
        a_pip: Arc::new(a_pip),
        a_ppi: Arc::new(a_ppi),
        a_pp: a_pp_steady.clone(),
        a_pp_steady: Arc::new(a_pp_steady),
        f_pi: Arc::new(f_pi),
        f_p: f_p_static.clone(),
        f_p_static: Arc::new(f_p_static),
        storage: Arc::new(storage),
        volume_source: Arc::new(volume_source),
        has_dirichlet,
        dt: TimeStep::Steady,
        p_prev: vec![0.0; ne],
    };
    base.update_app_for_timestep(dt, p_prev)
}

impl BlockSystem {
    /// Same system with a new time step and previous pressure. Only `A_pp`
    /// and `f_p` change; all other blocks are shared.
    pub fn update_app_for_timestep(&self, dt: TimeStep, p_prev: &[f64]) -> Result<BlockSystem> {
        if let TimeStep::Dt(v) = dt {
            TimeStep::new(v)?;
        }
        let ne = self.n_elems();
        if p_prev.len() != ne {
            return Err(Error::DimensionMismatch(format!("p_prev has {} values for {ne} elements", p_prev.len())));
        }
        if dt.is_steady() && !self.has_dirichlet {
            return Err(Error::SingularSystem(
                "steady problem without prescribed pressure: constant pressure is in the null space".into(),
            ));
        }
        let acc = self.accumulation_diagonal_for(dt);
        let a_pp = if dt.is_steady() { (*self.a_pp_steady).clone() } else { self.a_pp_steady.add_diagonal(&acc)? };
        let f_p = self.f_p_static.iter().zip(&acc).zip(p_prev).map(|((f, a), p)| f + a * p).collect();
        Ok(BlockSystem { a_pp, f_p, dt, p_prev: p_prev.to_vec(), ..self.clone_shared() })
    }

    fn clone_shared(&self) -> BlockSystem {
        BlockSystem {
            grid: Arc::clone(&self.grid),
            conditions: Arc::clone(&self.conditions),
            dofs: Arc::clone(&self.dofs),
            elements: Arc::clone(&self.elements),
            a_pipi: Arc::clone(&self.a_pipi),
            a_pip: Arc::clone(&self.a_pip),
            a_ppi: Arc::clone(&self.a_ppi),
            a_pp_steady: Arc::clone(&self.a_pp_steady),
            f_pi: Arc::clone(&self.f_pi),
            f_p_static: Arc::clone(&self.f_p_static),
            storage: Arc::clone(&self.storage),
            volume_source: Arc::clone(&self.volume_source),
            has_dirichlet: self.has_dirichlet,
            a_pp: CsrMatrix::zeros(0, 0),
            f_p: Vec::new(),
            dt: self.dt,
            p_prev: Vec::new(),
        }
    }

    fn accumulation_diagonal_for(&self, dt: TimeStep) -> Vec<f64> {
        let inv = dt.inverse();
        self.storage.iter().map(|s| s * inv).collect()
    }

    /// The `Omega c / dt` entries added to the diagonal of `A_pp`.
    pub fn accumulation_diagonal(&self) -> Vec<f64> {
        self.accumulation_diagonal_for(self.dt)
    }

    pub fn grid(&self) -> &HexGrid {
        &self.grid
    }

    pub fn conditions(&self) -> &[FaceCondition] {
        &self.conditions
    }

    pub fn dofs(&self) -> &FaceDofMap {
        &self.dofs
    }

    pub fn elements(&self) -> &[ElementMatrix] {
        &self.elements
    }

    pub fn a_pipi(&self) -> &CsrMatrix {
        &self.a_pipi
    }

    pub fn a_pip(&self) -> &CsrMatrix {
        &self.a_pip
    }

    pub fn a_ppi(&self) -> &CsrMatrix {
        &self.a_ppi
    }

    pub fn a_pp(&self) -> &CsrMatrix {
        &self.a_pp
    }

    pub fn a_pp_steady(&self) -> &CsrMatrix {
        &self.a_pp_steady
    }

    /// Shared handles, for checking that blocks are reused across steps.
    pub fn shared_blocks(&self) -> [&Arc<CsrMatrix>; 3] {
        [&self.a_pipi, &self.a_pip, &self.a_ppi]
    }

    pub fn f_pi(&self) -> &[f64] {
        &self.f_pi
    }

    pub fn f_p(&self) -> &[f64] {
        &self.f_p
    }

    pub fn dt(&self) -> TimeStep {
        self.dt
    }

    pub fn p_prev(&self) -> &[f64] {
        &self.p_prev
    }

    pub fn storage(&self) -> &[f64] {
        &self.storage
    }

    pub fn n_face_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn n_elems(&self) -> usize {
        self.storage.len()
    }

    pub fn dim(&self) -> usize {
        self.n_face_dofs() + self.n_elems()
    }

    /// Right-hand side `[f_pi; f_p]`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.dim());
        b.extend_from_slice(&self.f_pi);
        b.extend_from_slice(&self.f_p);
        b
    }

    /// Total number of stored entries over the four blocks.
    pub fn nnz(&self) -> usize {
        self.a_pipi.nnz() + self.a_pip.nnz() + self.a_ppi.nnz() + self.a_pp.nnz()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n || y.len() != n {
            return Err(Error::DimensionMismatch(format!("apply: system dim {n}, x {}, y {}", x.len(), y.len())));
        }
        let nd = self.n_face_dofs();
        let (xpi, xp) = x.split_at(nd);
        let (ypi, yp) = y.split_at_mut(nd);
        self.a_pipi.spmv_unchecked(xpi, ypi);
        self.a_pip.spmv_add_unchecked(1.0, xp, ypi);
        self.a_ppi.spmv_unchecked(xpi, yp);
        self.a_pp.spmv_add_unchecked(1.0, xp, yp);
        Ok(())
    }

    /// The full matrix as one CSR, face unknowns first.
    pub fn to_csr(&self) -> CsrMatrix {
        let nd = self.n_face_dofs();
        let n = self.dim();
        let mut t = Vec::with_capacity(self.nnz());
        for (m, ro, co) in [(&*self.a_pipi, 0, 0), (&*self.a_pip, 0, nd), (&*self.a_ppi, nd, 0), (&self.a_pp, nd, nd)] {
            for r in 0..m.nrows() {
                for (c, v) in m.row_iter(r) {
                    t.push((r + ro, c + co, v));
                }
            }
        }
        CsrMatrix::from_triplets_keep_diag(n, n, &t).expect("block indices are in range")
    }

    /// Splits a solution vector into full face pressures (Dirichlet values
    /// filled in) and element pressures.
    pub fn split_solution(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("solution has {} entries, system {}", x.len(), self.dim())));
        }
        let (xpi, xp) = x.split_at(self.n_face_dofs());
        Ok((self.full_face_pressures(xpi), xp.to_vec()))
    }

    pub fn full_face_pressures(&self, pi_dofs: &[f64]) -> Vec<f64> {
        self.conditions
            .iter()
            .enumerate()
            .map(|(f, c)| match (c, self.dofs.dof(f)) {
                (FaceCondition::Dirichlet(v), _) => *v,
                (_, Some(d)) => pi_dofs[d],
                _ => unreachable!(),
            })
            .collect()
    }

    /// Local outward fluxes `q_i = L_i p - sum_j Binv_ij pi_j` per element.
    pub fn local_fluxes(&self, pi_full: &[f64], p: &[f64]) -> Vec<[f64; 6]> {
        (0..self.n_elems())
            .map(|e| {
                let faces = self.grid.elem_faces(e);
                let em = &self.elements[e];
                let mut q = [0.0; 6];
                for (i, qi) in q.iter_mut().enumerate() {
                    *qi = em.row_sum(i) * p[e] - (0..6).map(|j| em.binv(i, j) * pi_full[faces[j]]).sum::<f64>();
                }
                q
            })
            .collect()
    }

    /// Outward fluxes used by the finite-volume balance, per element.
    pub fn strong_fluxes(&self, pi_full: &[f64], p: &[f64]) -> Result<Vec<[f64; 6]>> {
        (0..self.n_elems())
            .map(|e| {
                let mut q = [0.0; 6];
                for (slot, qs) in q.iter_mut().enumerate() {
                    *qs = match fv_face_flux(&self.grid, &self.elements, &self.conditions, e, slot)? {
                        FaceFlux::Prescribed(v) => v,
                        FaceFlux::Linear(lf) => lf.eval(p, pi_full),
                    };
                }
                Ok(q)
            })
            .collect()
    }

    /// `Omega c (p - p_prev)/dt + sum_i q_i - Omega s` per element. The scale
    /// sums the magnitudes of every term before cancellation.
    pub fn balance_residuals(&self, pi_full: &[f64], p: &[f64]) -> Result<Vec<BalanceResidual>> {
        let inv = self.dt.inverse();
        (0..self.n_elems())
            .map(|e| {
                let c = self.storage[e] * inv;
                let src = self.volume_source[e];
                let mut residual = c * (p[e] - self.p_prev[e]) - src;
                let mut scale = (c * p[e]).abs() + (c * self.p_prev[e]).abs() + src.abs();
                for slot in 0..NUM_LOCAL_FACES {
                    match fv_face_flux(&self.grid, &self.elements, &self.conditions, e, slot)? {
                        FaceFlux::Prescribed(v) => {
                            residual += v;
                            scale += v.abs();
                        }
                        FaceFlux::Linear(lf) => {
                            residual += lf.eval(p, pi_full);
                            scale += lf.magnitude(p, pi_full);
                        }
                    }
                }
                Ok(BalanceResidual { residual, scale })
            })
            .collect()
    }

    /// Writes each block, the right-hand side and the full matrix in Matrix Market format.
    pub fn export_matrix_market(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        mm_write_with(&self.a_pipi, dir.join("A_pipi.mtx"), Symmetry::Symmetric)?;
        mm_write(&self.a_pip, dir.join("A_pip.mtx"))?;
        mm_write(&self.a_ppi, dir.join("A_ppi.mtx"))?;
        mm_write(&self.a_pp, dir.join("A_pp.mtx"))?;
        mm_write(&self.to_csr(), dir.join("A.mtx"))?;
        mm_write_vector(&self.f_pi, dir.join("f_pi.mtx"))?;
        mm_write_vector(&self.f_p, dir.join("f_p.mtx"))?;
        mm_write_vector(&self.rhs(), dir.join("b.mtx"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{synth_heterogeneous_field, Side, SynthMode};
    use crate::sparse::mm::mm_read;
    use nalgebra::{DMatrix, DVector};

    fn props(n: usize) -> FluidRockProps {
        FluidRockProps::uniform(n, 0.0981, 1e-5, 4.4e-5, 0.25).unwrap()
    }

    /// Dense system built by evaluating the block formulas entry by entry over
    /// global face indices, with no elimination bookkeeping.
    fn dense_oracle(
        grid: &HexGrid,
        field: &ConductivityField,
        pr: &FluidRockProps,
        dt: Option<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let ne = grid.n_elems();
        let nf = grid.n_faces();
        let em: Vec<ElementMatrix> =
            (0..ne).map(|e| element_matrix(grid, e, field.tensor(e), pr.gamma).unwrap()).collect();
        let binv = |e: usize, fi: usize, fj: usize| {
            let li = grid.local_slot(e, fi).unwrap();
            let lj = grid.local_slot(e, fj).unwrap();
            em[e].binv(li, lj)
        };
        let lsum = |e: usize, fi: usize| em[e].row_sum(grid.local_slot(e, fi).unwrap());
        let mut app = DMatrix::zeros(nf, nf);
        let mut apip = DMatrix::zeros(nf, ne);
        for i in 0..nf {
            for e in grid.face_elems(i) {
                apip[(i, e)] += lsum(e, i);
                for &j in grid.elem_faces(e) {
                    app[(i, j)] -= binv(e, i, j);
                }
            }
        }
        let mut appi = DMatrix::zeros(ne, nf);
        let mut a_pp = DMatrix::zeros(ne, ne);
        for e in 0..ne {
            for &i in grid.elem_faces(e) {
                let others: Vec<usize> = grid.face_elems(i).into_iter().filter(|&x| x != e).collect();
                if let Some(&e2) = others.first() {
                    let b = binv(e, i, i);
                    let b2 = binv(e2, i, i);
                    a_pp[(e, e)] += b2 / (b + b2) * lsum(e, i);
                    a_pp[(e, e2)] -= b / (b + b2) * lsum(e2, i);
                    for &j in grid.elem_faces(e).iter().filter(|&&j| j != i) {
                        appi[(e, j)] -= b2 / (b + b2) * binv(e, i, j);
                    }
                    for &j in grid.elem_faces(e2).iter().filter(|&&j| j != i) {
                        appi[(e, j)] += b / (b + b2) * binv(e2, i, j);
                    }
                }
            }
            if let Some(dt) = dt {
                a_pp[(e, e)] += grid.elem_volume(e) * pr.storage(e) / dt;
            }
        }
        (app, apip, appi, a_pp)
    }

    fn assert_dense_eq(a: &CsrMatrix, b: &DMatrix<f64>, tol: f64) {
        let d = a.to_dense();
        assert_eq!(d.shape(), b.shape());
        let scale = b.amax().max(1.0);
        assert!((d - b).amax() <= tol * scale, "max diff {}", (a.to_dense() - b).amax());
    }

    #[test]
    fn two_cells_nnz_of_face_block() {
        let g = HexGrid::build_structured(2, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let f = ConductivityField::homogeneous(2, 1.0).unwrap();
        let s = assemble(&g, &f, &props(2), &BoundarySpec::new(), TimeStep::Dt(1.0), &[0.0; 2]).unwrap();
        let (app, ..) = dense_oracle(&g, &f, &props(2), Some(1.0));
        let oracle_nnz = app.iter().filter(|v| **v != 0.0).count();
        assert_eq!(oracle_nnz, 23);
        assert_eq!(s.a_pipi().nnz(), oracle_nnz);
    }

    #[test]
    fn matches_dense_oracle_without_dirichlet() {
        let g = HexGrid::build_structured(3, 2, 2, 1.0, 2.0, 0.5).unwrap();
        let d = g.deform_dome(0.4, g.default_dome_radius()).unwrap();
        for grid in [g, d] {
            let f = synth_heterogeneous_field(&grid, 3, (0.01, 10.0), SynthMode::LogUniform, 0.3).unwrap();
            let pr = props(grid.n_elems());
            let s =
                assemble(&grid, &f, &pr, &BoundarySpec::new(), TimeStep::Dt(0.5), &vec![0.0; grid.n_elems()]).unwrap();
            let (app, apip, appi, a_pp) = dense_oracle(&grid, &f, &pr, Some(0.5));
            assert_eq!(s.n_face_dofs(), grid.n_faces());
            assert_dense_eq(s.a_pipi(), &app, 1e-13);
            assert_dense_eq(s.a_pip(), &apip, 1e-13);
            assert_dense_eq(s.a_ppi(), &appi, 1e-13);
            assert_dense_eq(s.a_pp(), &a_pp, 1e-13);
        }
    }

    #[test]
    fn dirichlet_elimination_matches_reduced_oracle() {
        // dirichlet faces on -x/+x sides; the solution of the reduced system must
        // satisfy the full oracle equations on every free row
        let g = HexGrid::build_structured(3, 2, 2, 1.0, 1.0, 1.0).unwrap();
        let f = synth_heterogeneous_field(&g, 5, (0.1, 10.0), SynthMode::LogUniform, 1.0).unwrap();
        let pr = props(g.n_elems());
        let bc = BoundarySpec::new().with_side_pressure(&g, Side::XMin, 2.0).with_side_pressure(&g, Side::XMax, 1.0);
        let s = assemble(&g, &f, &pr, &bc, TimeStep::Steady, &vec![0.0; g.n_elems()]).unwrap();
        let a = s.to_csr().to_dense();
        let x = a.clone().lu().solve(&DVector::from_vec(s.rhs())).unwrap();
        let (pi, p) = s.split_solution(x.as_slice()).unwrap();

        let (app, apip, ..) = dense_oracle(&g, &f, &pr, None);
        let pv = DVector::from_vec(p.clone());
        let piv = DVector::from_vec(pi.clone());
        let r = &app * &piv + &apip * &pv;
        for face in 0..g.n_faces() {
            if s.dofs().dof(face).is_some() {
                assert!(r[face].abs() < 1e-10, "face {face}: {}", r[face]);
            }
        }
        for b in s.balance_residuals(&pi, &p).unwrap() {
            assert!(b.relative() < 1e-10);
        }
        // pressures between the boundary values
        assert!(p.iter().all(|&v| (1.0..=2.0).contains(&v)));
    }

    #[test]
    fn block_properties() {
        let g = HexGrid::build_structured(3, 3, 2, 1.0, 1.0, 1.0).unwrap();
        let d = g.deform_dome(0.5, g.default_dome_radius()).unwrap();
        for grid in [g, d] {
            let f = synth_heterogeneous_field(&grid, 8, (1e-3, 1.0), SynthMode::LayeredLogNormal, 0.1).unwrap();
            let bc = BoundarySpec::five_spot(&grid, 100.0, 200.0);
            let s = assemble(&grid, &f, &props(grid.n_elems()), &bc, TimeStep::Dt(1.0), &vec![140.0; grid.n_elems()])
                .unwrap();
            assert!(s.a_pipi().is_symmetric());
            assert!(s.a_pipi().scaled(-1.0).to_dense().cholesky().is_some());
            assert!(s.a_pp().is_structurally_symmetric());
            assert!(s.a_pp().to_dense() != s.a_pp().to_dense().transpose());
            assert!(s.a_pip().to_dense() != s.a_ppi().to_dense().transpose());
            assert!(s.a_pip().to_dense() != -s.a_ppi().to_dense().transpose());
        }
    }

    #[test]
    fn pure_neumann_steady_is_singular() {
        let g = HexGrid::build_structured(1, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let f = ConductivityField::homogeneous(1, 1.0).unwrap();
        let r = assemble(&g, &f, &props(1), &BoundarySpec::new(), TimeStep::Steady, &[0.0]);
        assert!(matches!(r, Err(Error::SingularSystem(_))));
    }

    #[test]
    fn timestep_updates_only_touch_a_pp() {
        let g = HexGrid::build_structured(3, 3, 2, 1.0, 1.0, 1.0).unwrap();
        let f = ConductivityField::homogeneous(g.n_elems(), 0.5).unwrap();
        let bc = BoundarySpec::five_spot(&g, 100.0, 200.0);
        let p0 = vec![140.0; g.n_elems()];
        let s = assemble(&g, &f, &props(g.n_elems()), &bc, TimeStep::Dt(2.0), &p0).unwrap();

        let same = s.update_app_for_timestep(TimeStep::Dt(2.0), &p0).unwrap();
        assert_eq!(same.a_pp(), s.a_pp());
        assert_eq!(same.f_p(), s.f_p());

        let half = s.update_app_for_timestep(TimeStep::Dt(1.0), &p0).unwrap();
        for (a, b) in half.accumulation_diagonal().iter().zip(s.accumulation_diagonal()) {
            assert!((a - 2.0 * b).abs() <= 1e-14 * a.abs());
        }
        for (x, y) in s.shared_blocks().iter().zip(half.shared_blocks()) {
            assert!(Arc::ptr_eq(x, y));
        }
        let steady = s.update_app_for_timestep(TimeStep::Steady, &p0).unwrap();
        assert_eq!(steady.a_pp(), s.a_pp_steady());
        assert!(s.update_app_for_timestep(TimeStep::Dt(-1.0), &p0).is_err());
        assert!(TimeStep::new(0.0).is_err());
    }

    #[test]
    fn flux_continuity_and_linear_column() {
        let g = HexGrid::build_structured(1, 1, 6, 1.0, 1.0, 1.0).unwrap();
        let f = ConductivityField::homogeneous(6, 2.0).unwrap();
        let bc = BoundarySpec::new().with_side_pressure(&g, Side::ZMin, 10.0).with_side_pressure(&g, Side::ZMax, 4.0);
        let s = assemble(&g, &f, &props(6), &bc, TimeStep::Steady, &[0.0; 6]).unwrap();
        let x = s.to_csr().to_dense().lu().solve(&DVector::from_vec(s.rhs())).unwrap();
        let (pi, p) = s.split_solution(x.as_slice()).unwrap();
        for (e, pe) in p.iter().enumerate() {
            let exact = 10.0 - 6.0 * (e as f64 + 0.5) / 6.0;
            assert!((pe - exact).abs() < 1e-10);
        }
        let q = s.local_fluxes(&pi, &p);
        for face in 0..g.n_faces() {
            let owners = g.face_owners(face);
            if let [Some((a, sa)), Some((b, sb))] = owners {
                assert!((q[a][sa] + q[b][sb]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stagnant_cell_balance_is_scaled_by_its_terms() {
        let g = HexGrid::build_structured(1, 1, 1, 3.0, 2.0, 1.0).unwrap();
        let f = ConductivityField::from_diagonals(vec![[0.7, 0.2, 0.05]]).unwrap();
        let bc = [Side::XMin, Side::XMax, Side::YMin, Side::YMax, Side::ZMin, Side::ZMax]
            .into_iter()
            .fold(BoundarySpec::new(), |bc, side| bc.with_side_pressure(&g, side, 37.3));
        let s = assemble(&g, &f, &props(1), &bc, TimeStep::Steady, &[0.0]).unwrap();
        let x = s.to_csr().to_dense().lu().solve(&DVector::from_vec(s.rhs())).unwrap();
        let (pi, p) = s.split_solution(x.as_slice()).unwrap();
        let pi = s.full_face_pressures(&pi);
        let b = s.balance_residuals(&pi, &p).unwrap()[0];
        // every flux is roundoff, the scale is not
        assert!(b.scale > 1.0);
        assert!(b.relative() < 1e-14, "{b:?}");
    }

    #[test]
    fn matrix_market_export_round_trip() {
        let g = HexGrid::build_structured(2, 2, 1, 1.0, 1.0, 1.0).unwrap();
        let f = ConductivityField::homogeneous(4, 1.0).unwrap();
        let bc = BoundarySpec::new().with_side_pressure(&g, Side::XMin, 1.0);
        let s = assemble(&g, &f, &props(4), &bc, TimeStep::Dt(1.0), &[0.0; 4]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.export_matrix_market(dir.path()).unwrap();
        assert_eq!(&mm_read(dir.path().join("A_pipi.mtx")).unwrap(), s.a_pipi());
        assert_eq!(&mm_read(dir.path().join("A_ppi.mtx")).unwrap(), s.a_ppi());
        let full = mm_read(dir.path().join("A.mtx")).unwrap();
        assert_eq!(full.nrows(), s.dim());
    }

    #[test]
    fn apply_matches_monolithic() {
        let g = HexGrid::build_structured(3, 3, 2, 1.0, 1.0, 1.0).unwrap();
        let f = ConductivityField::homogeneous(18, 1.0).unwrap();
        let bc = BoundarySpec::five_spot(&g, 1.0, 2.0);
        let s = assemble(&g, &f, &props(18), &bc, TimeStep::Dt(1.0), &[0.0; 18]).unwrap();
        let x: Vec<f64> = (0..s.dim()).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; s.dim()];
        s.apply(&x, &mut y).unwrap();
        let z = s.to_csr().mul_vec(&x).unwrap();
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
