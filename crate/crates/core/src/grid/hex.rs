use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Coordinate axis of a face normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Local face slots, fixed order `-x, +x, -y, +y, -z, +z`.
pub const NUM_LOCAL_FACES: usize = 6;

/// Axis of a local face slot.
pub fn slot_axis(slot: usize) -> Axis {
    Axis::ALL[slot / 2]
}

/// `true` for the `+` side slots.
pub fn slot_is_upper(slot: usize) -> bool {
    slot % 2 == 1
}

/// Slot on the other side of the element along the same axis.
pub fn opposite_slot(slot: usize) -> usize {
    slot ^ 1
}

/// Two-point Gauss rule on `[0, 1]`.
pub(crate) const GAUSS_1D: [(f64, f64); 2] =
    [(0.5 - 0.288_675_134_594_812_9, 0.5), (0.5 + 0.288_675_134_594_812_9, 0.5)];

/// Hexahedral grid with a logical `nx x ny x nz` structure.
///
/// Elements are numbered x-fastest. Faces are numbered x-normal first, then
/// y-normal, then z-normal, each block x-fastest. Each face is oriented
/// outward from its lower-indexed owner.
#[derive(Debug, Clone, PartialEq)]
pub struct HexGrid {
    dims: [usize; 3],
    spacing: [f64; 3],
    nodes: Vec<[f64; 3]>,
    elem_faces: Vec<[usize; NUM_LOCAL_FACES]>,
    /// Owners as `(element, local slot)`; the first is the lower-indexed one.
    face_owners: Vec<[Option<(usize, usize)>; 2]>,
    face_area: Vec<f64>,
    elem_volume: Vec<f64>,
}

impl HexGrid {
    /// Regular box grid with `nx * ny * nz` cells of size `dx * dy * dz`.
    pub fn build_structured(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid(format!("grid dimensions must be >= 1, got {nx}x{ny}x{nz}")));
        }
        for (name, d) in [("dx", dx), ("dy", dy), ("dz", dz)] {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {d}")));
            }
        }
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push([i as f64 * dx, j as f64 * dy, k as f64 * dz]);
                }
            }
        }
        let n_e = nx * ny * nz;
        let n_xf = (nx + 1) * ny * nz;
        let n_yf = nx * (ny + 1) * nz;
        let n_zf = nx * ny * (nz + 1);
        let n_f = n_xf + n_yf + n_zf;

        let xf = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + ny * k);
        let yf = |i: usize, j: usize, k: usize| n_xf + i + nx * (j + (ny + 1) * k);
        let zf = |i: usize, j: usize, k: usize| n_xf + n_yf + i + nx * (j + ny * k);

        let mut elem_faces = Vec::with_capacity(n_e);
        let mut face_owners = vec![[None, None]; n_f];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let e = i + nx * (j + ny * k);
                    let faces =
                        [xf(i, j, k), xf(i + 1, j, k), yf(i, j, k), yf(i, j + 1, k), zf(i, j, k), zf(i, j, k + 1)];
                    for (slot, &f) in faces.iter().enumerate() {
                        // the lower-indexed owner sees the face on its + side
                        let pos = if slot_is_upper(slot) { 0 } else { 1 };
                        face_owners[f][pos] = Some((e, slot));
                    }
                    elem_faces.push(faces);
                }
            }
        }
        // boundary faces: move the single owner to position 0
        for owners in face_owners.iter_mut() {
            if owners[0].is_none() {
                owners.swap(0, 1);
            }
        }
        let mut grid = Self {
            dims: [nx, ny, nz],
            spacing: [dx, dy, dz],
            nodes,
            elem_faces,
            face_owners,
            face_area: Vec::new(),
            elem_volume: Vec::new(),
        };
        grid.update_geometry()?;
        Ok(grid)
    }

    /// Lifts node z-coordinates by `amplitude * cos^2(pi r / 2R)` for
    /// footprint distance `r <= R` from the grid center, equally for all
    /// layers. Topology is untouched.
    pub fn deform_dome(&self, amplitude: f64, radius: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid(format!("dome amplitude must be >= 0, got {amplitude}")));
        }
        if amplitude == 0.0 {
            return Ok(self.clone());
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("dome radius must be positive, got {radius}")));
        }
        let (cx, cy) = self.footprint_center();
        let mut out = self.clone();
        for p in out.nodes.iter_mut() {
            let r = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
            if r <= radius {
                p[2] += amplitude * (std::f64::consts::FRAC_PI_2 * r / radius).cos().powi(2);
            }
        }
        out.update_geometry()?;
        Ok(out)
    }

    /// Default dome radius: half the footprint diagonal.
    pub fn default_dome_radius(&self) -> f64 {
        let [nx, ny, _] = self.dims;
        let [dx, dy, _] = self.spacing;
        0.5 * ((nx as f64 * dx).powi(2) + (ny as f64 * dy).powi(2)).sqrt()
    }

    fn footprint_center(&self) -> (f64, f64) {
        let [nx, ny, _] = self.dims;
        let [dx, dy, _] = self.spacing;
        (0.5 * nx as f64 * dx, 0.5 * ny as f64 * dy)
    }

    fn update_geometry(&mut self) -> Result<()> {
        let mut vols = Vec::with_capacity(self.n_elems());
        for e in 0..self.n_elems() {
            let nodes = self.elem_nodes(e);
            let mut v = 0.0;
            for (xi, wx) in GAUSS_1D {
                for (eta, wy) in GAUSS_1D {
                    for (zeta, wz) in GAUSS_1D {
                        let det = trilinear_jacobian(&nodes, [xi, eta, zeta]).determinant();
                        if !(det > 0.0) {
                            return Err(Error::Geometry {
                                element: e,
                                reason: format!("non-positive Jacobian {det:e} at ({xi:.3}, {eta:.3}, {zeta:.3})"),
                            });
                        }
                        v += wx * wy * wz * det;
                    }
                }
            }
            vols.push(v);
        }
        self.elem_volume = vols;
        self.face_area = (0..self.n_faces()).map(|f| self.compute_face_area(f)).collect();
        Ok(())
    }

    fn compute_face_area(&self, f: usize) -> f64 {
        let q = self.face_nodes(f);
        let mut area = 0.0;
        for (u, wu) in GAUSS_1D {
            for (v, wv) in GAUSS_1D {
                let mut du = Vector3::zeros();
                let mut dv = Vector3::zeros();
                // bilinear quad with corners q[0]=(0,0), q[1]=(1,0), q[2]=(0,1), q[3]=(1,1)
                for (n, p) in q.iter().enumerate() {
                    let (a, b) = ((n & 1) as f64, ((n >> 1) & 1) as f64);
                    let p = Vector3::from(*p);
                    let nu = if a == 1.0 { 1.0 } else { -1.0 } * if b == 1.0 { v } else { 1.0 - v };
                    let nv = if b == 1.0 { 1.0 } else { -1.0 } * if a == 1.0 { u } else { 1.0 - u };
                    du += p * nu;
                    dv += p * nv;
                }
                area += wu * wv * du.cross(&dv).norm();
            }
        }
        area
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Nominal cell spacing of the undeformed box.
    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn n_elems(&self) -> usize {
        self.elem_faces.len()
    }

    pub fn n_faces(&self) -> usize {
        self.face_owners.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_coords(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.dims;
        i + (nx + 1) * (j + (ny + 1) * k)
    }

    /// Logical `(i, j, k)` of an element.
    pub fn elem_ijk(&self, e: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [e % nx, (e / nx) % ny, e / (nx * ny)]
    }

    /// Element at a logical position, `None` outside the grid.
    pub fn elem_at(&self, i: isize, j: isize, k: isize) -> Option<usize> {
        let [nx, ny, nz] = self.dims;
        if i < 0 || j < 0 || k < 0 || i as usize >= nx || j as usize >= ny || k as usize >= nz {
            return None;
        }
        Some(i as usize + nx * (j as usize + ny * k as usize))
    }

    /// The 8 corner nodes of an element, local index `a + 2b + 4c` for the
    /// reference corner `(a, b, c)`.
    pub fn elem_nodes(&self, e: usize) -> [[f64; 3]; 8] {
        let [i, j, k] = self.elem_ijk(e);
        let mut out = [[0.0; 3]; 8];
        for (n, slot) in out.iter_mut().enumerate() {
            let (a, b, c) = (n & 1, (n >> 1) & 1, (n >> 2) & 1);
            *slot = self.nodes[self.node_index(i + a, j + b, k + c)];
        }
        out
    }

    /// Corner nodes of a face as a bilinear patch `(0,0), (1,0), (0,1), (1,1)`.
    pub fn face_nodes(&self, f: usize) -> [[f64; 3]; 4] {
        let (e, slot) = self.face_owners[f][0].expect("every face has an owner");
        let nodes = self.elem_nodes(e);
        let axis = slot_axis(slot).index();
        let side = usize::from(slot_is_upper(slot));
        let (u_axis, v_axis) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut out = [[0.0; 3]; 4];
        for (n, p) in out.iter_mut().enumerate() {
            let mut bits = [0usize; 3];
            bits[axis] = side;
            bits[u_axis] = n & 1;
            bits[v_axis] = (n >> 1) & 1;
            *p = nodes[bits[0] + 2 * bits[1] + 4 * bits[2]];
        }
        out
    }

    pub fn face_centroid(&self, f: usize) -> [f64; 3] {
        let q = self.face_nodes(f);
        let mut c = [0.0; 3];
        for p in &q {
            for d in 0..3 {
                c[d] += 0.25 * p[d];
            }
        }
        c
    }

    pub fn elem_centroid(&self, e: usize) -> [f64; 3] {
        let q = self.elem_nodes(e);
        let mut c = [0.0; 3];
        for p in &q {
            for d in 0..3 {
                c[d] += 0.125 * p[d];
            }
        }
        c
    }

    pub fn face_axis(&self, f: usize) -> Axis {
        let (_, slot) = self.face_owners[f][0].expect("every face has an owner");
        slot_axis(slot)
    }

    /// The 6 face ids of an element in local slot order.
    pub fn elem_faces(&self, e: usize) -> &[usize; NUM_LOCAL_FACES] {
        &self.elem_faces[e]
    }

    /// `(element, local slot)` owners of a face; the second is `None` on the boundary.
    pub fn face_owners(&self, f: usize) -> [Option<(usize, usize)>; 2] {
        self.face_owners[f]
    }

    /// Owning elements of a face (1 or 2), lower-indexed first.
    pub fn face_elems(&self, f: usize) -> Vec<usize> {
        self.face_owners[f].iter().flatten().map(|o| o.0).collect()
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_owners[f][1].is_none()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_faces()).filter(|&f| self.is_boundary_face(f))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_area[f]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_area
    }

    pub fn elem_volume(&self, e: usize) -> f64 {
        self.elem_volume[e]
    }

    pub fn elem_volumes(&self) -> &[f64] {
        &self.elem_volume
    }

    /// Element across local face `slot` of `e`.
    pub fn neighbor(&self, e: usize, slot: usize) -> Option<(usize, usize)> {
        let f = self.elem_faces[e][slot];
        self.face_owners[f].iter().flatten().copied().find(|&(o, _)| o != e)
    }

    /// Face-adjacent elements (the set `S_E`).
    pub fn neighbors(&self, e: usize) -> Vec<usize> {
        (0..NUM_LOCAL_FACES).filter_map(|s| self.neighbor(e, s).map(|n| n.0)).collect()
    }

    /// Local slot of face `f` within element `e`.
    pub fn local_slot(&self, e: usize, f: usize) -> Option<usize> {
        self.elem_faces[e].iter().position(|&g| g == f)
    }

    /// Faces of the neighbors of `e` that are not faces of `e` (the set `R_E'`).
    pub fn outer_ring_faces(&self, e: usize) -> Vec<usize> {
        let own = &self.elem_faces[e];
        let mut out: Vec<usize> = self
            .neighbors(e)
            .into_iter()
            .flat_map(|n| self.elem_faces[n].iter().copied())
            .filter(|f| !own.contains(f))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Jacobian `dx/dxi` of the trilinear map at a reference point; column `d`
/// is the derivative along reference axis `d`. Written as a weighted sum of
/// edge differences, so edges parallel to a coordinate axis give exact zeros.
pub(crate) fn trilinear_jacobian(nodes: &[[f64; 3]; 8], xi: [f64; 3]) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    for d in 0..3 {
        let stride = 1 << d;
        let (a, b) = ((d + 1) % 3, (d + 2) % 3);
        for n in (0..8).filter(|n| n & stride == 0) {
            let wa = if n >> a & 1 == 1 { xi[a] } else { 1.0 - xi[a] };
            let wb = if n >> b & 1 == 1 { xi[b] } else { 1.0 - xi[b] };
            let (p0, p1) = (nodes[n], nodes[n | stride]);
            for r in 0..3 {
                j[(r, d)] += wa * wb * (p1[r] - p0[r]);
            }
        }
    }
    j
}
