//! Boundary measurement map: discrete Dirichlet-to-Neumann matrix for the
//! Navier problem, in Sobolev-weighted coordinates.
//!
//! Columns are driven by a finite family of boundary inputs: for each face,
//! each data slot (`f` or `g`), and each interior sine pair `(k, l)` up to a
//! cutoff, the input is that sine atom normalized to unit graph norm
//! (`||f||_{7/2} + ||g||_{3/2} = 1`; only one slot is nonzero, and the atoms
//! are orthonormal in weighted coordinates). Rows are the complete weighted
//! output coordinates of the Neumann pair per face: the normal derivative of
//! the solution at order 5/2 and of its Laplacian at order 1/2. With both
//! sides expressed in weighted coordinates, the spectral norm of a matrix
//! difference is the discrete operator norm used by the stability sweeps.
//!
//! Direction-restricted data keeps only the rows of shadowed faces
//! (`alpha . nu <= eps`), which is an exact row sub-selection because every
//! output coordinate belongs to exactly one face.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::{BoundaryField, FaceFieldSet, NavierData};
use crate::grid::{BoundaryPartition, Face, Grid};
use crate::hash::ContentHasher;
use crate::sobolev::{BoundaryBases, ORDER_DNU, ORDER_DNW, ORDER_F, ORDER_G};
use crate::solver::{neumann_traces, NavierSolver};

/// Default per-face sine cutoff.
pub const DEFAULT_KMAX: usize = 6;

/// Identity of one input basis column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputMode {
    /// Face carrying the data.
    pub face: Face,
    /// 0 drives the `f` slot, 1 drives the `g` slot.
    pub slot: usize,
    /// Sine index along the first tangent axis (1-based).
    pub k: usize,
    /// Sine index along the second tangent axis (1-based).
    pub l: usize,
}

/// Enumerate the input columns for a cutoff, in canonical order.
pub fn input_modes(kmax: usize) -> Vec<InputMode> {
    let mut out = Vec::with_capacity(12 * kmax * kmax);
    for face in Face::all() {
        for slot in 0..2 {
            for k in 1..=kmax {
                for l in 1..=kmax {
                    out.push(InputMode { face, slot, k, l });
                }
            }
        }
    }
    out
}

/// Normalization constant of an input mode: the graph norm of the raw sine
/// atom placed in its slot.
fn mode_normalization(bases: &BoundaryBases, mode: &InputMode) -> f64 {
    let fb = bases.of(mode.face);
    let order = if mode.slot == 0 { ORDER_F } else { ORDER_G };
    // Sine modes come first in the axis basis ordering: index k - 1.
    let a = mode.k - 1;
    let b = mode.l - 1;
    ((1.0 + fb.kappa_sq(a, b)).powf(order) * fb.atom_norm_sq(a, b)).sqrt()
}

/// Build the normalized boundary data of an input mode.
pub fn mode_data(grid: &Grid, bases: &BoundaryBases, mode: &InputMode) -> NavierData {
    let fb = bases.of(mode.face);
    let scale = 1.0 / mode_normalization(bases, mode);
    let v1 = &fb.b1.modes[mode.k - 1].values;
    let v2 = &fb.b2.modes[mode.l - 1].values;
    let mut field = BoundaryField::zeros(grid);
    let [m1, m2] = grid.face_dims(mode.face);
    for j2 in 0..m2 {
        for j1 in 0..m1 {
            let node = grid.idx(grid.face_node(mode.face, [j1, j2]));
            let bidx = grid.boundary_index[node].expect("face node is on the boundary");
            field.values[bidx] = Complex64::new(scale * v1[j1] * v2[j2], 0.0);
        }
    }
    let zero = BoundaryField::zeros(grid);
    if mode.slot == 0 {
        NavierData { f: field, g: zero }
    } else {
        NavierData { f: zero, g: field }
    }
}

/// Row layout: for each face (canonical order) one block of weighted
/// `du/dnu` coordinates at order 5/2, then for each face one block of
/// weighted `dw/dnu` coordinates at order 1/2.
fn row_count(grid: &Grid) -> usize {
    let per_face: usize = Face::all().iter().map(|&f| {
        let [m1, m2] = grid.face_dims(f);
        m1 * m2
    }).sum();
    2 * per_face
}

/// Map a complex face-wise Neumann pair to stacked weighted coordinates.
pub fn neumann_to_coords(
    grid: &Grid,
    bases: &BoundaryBases,
    dnu_u: &FaceFieldSet,
    dnu_w: &FaceFieldSet,
) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(row_count(grid));
    for face in Face::all() {
        let fb = bases.of(face);
        out.extend(fb.weighted_coords(&dnu_u.faces[face.index()], ORDER_DNU));
    }
    for face in Face::all() {
        let fb = bases.of(face);
        out.extend(fb.weighted_coords(&dnu_w.faces[face.index()], ORDER_DNW));
    }
    out
}

/// Invert [`neumann_to_coords`]: reconstruct face-wise values of the pair.
pub fn coords_to_neumann(
    grid: &Grid,
    bases: &BoundaryBases,
    coords: &[Complex64],
) -> (FaceFieldSet, FaceFieldSet) {
    let mut dnu_u = FaceFieldSet::zeros(grid);
    let mut dnu_w = FaceFieldSet::zeros(grid);
    let mut offset = 0;
    for (set, order) in [(&mut dnu_u, ORDER_DNU), (&mut dnu_w, ORDER_DNW)] {
        for face in Face::all() {
            let fb = bases.of(face);
            let n = fb.mode_count();
            let block = &coords[offset..offset + n];
            let n1 = fb.b1.modes.len();
            let mut coeffs = vec![Complex64::ZERO; n];
            for b in 0..fb.b2.modes.len() {
                for a in 0..n1 {
                    let scale =
                        (1.0 + fb.kappa_sq(a, b)).powf(0.5 * order) * fb.atom_norm_sq(a, b).sqrt();
                    coeffs[b * n1 + a] = block[b * n1 + a] / scale;
                }
            }
            set.faces[face.index()] = fb.synthesize(&coeffs);
            offset += n;
        }
    }
    (dnu_u, dnu_w)
}

/// Weighted input coordinates of arbitrary Navier data against the truncated
/// input basis (the orthogonal projection onto the basis span).
pub fn project_navier(
    grid: &Grid,
    bases: &BoundaryBases,
    kmax: usize,
    data: &NavierData,
) -> Vec<Complex64> {
    let modes = input_modes(kmax);
    let mut out = Vec::with_capacity(modes.len());
    // Face coefficients are computed once per (face, slot).
    let mut coeff_cache: Vec<Option<Vec<Complex64>>> = vec![None; 12];
    for mode in &modes {
        let slot_field = if mode.slot == 0 { &data.f } else { &data.g };
        let cache_id = 2 * mode.face.index() + mode.slot;
        if coeff_cache[cache_id].is_none() {
            let vals = crate::sobolev::face_values(grid, mode.face, slot_field);
            coeff_cache[cache_id] = Some(bases.of(mode.face).coefficients(&vals));
        }
        let coeffs = coeff_cache[cache_id].as_ref().expect("cache entry just filled");
        let fb = bases.of(mode.face);
        let n1 = fb.b1.modes.len();
        let c = coeffs[(mode.l - 1) * n1 + (mode.k - 1)];
        out.push(c * mode_normalization(bases, mode));
    }
    out
}

/// Dense measurement matrix in weighted coordinates.
#[derive(Debug, Clone)]
pub struct DtnMatrix {
    /// Row count (complete weighted output coordinates).
    pub rows: usize,
    /// Column count (`12 * kmax^2`).
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
    /// Face index of each row.
    pub row_faces: Vec<u8>,
    /// Sine cutoff the columns were built with.
    pub kmax: usize,
    /// Hash of the grid the matrix was assembled on.
    pub grid_hash: u64,
    /// Hash of the potential.
    pub q_hash: u64,
}

impl DtnMatrix {
    /// Assemble by driving every input column through the forward solver.
    pub fn assemble(solver: &NavierSolver, kmax: usize) -> Result<DtnMatrix> {
        let grid = solver.grid();
        let bases = BoundaryBases::new(grid);
        for face in Face::all() {
            let [m1, m2] = grid.face_dims(face);
            if kmax + 2 > m1.min(m2) {
                return Err(Error::invalid(format!(
                    "sine cutoff {kmax} too large for face with {} x {} nodes",
                    m1, m2
                )));
            }
        }
        let modes = input_modes(kmax);
        let rows = row_count(grid);
        let cols = modes.len();
        let mut data = vec![0.0; rows * cols];
        // Batched solve: all right-hand sides at once (chunked internally).
        let rhss: Vec<Vec<Complex64>> = modes
            .iter()
            .map(|m| solver.assemble_rhs(&mode_data(grid, &bases, m), None))
            .collect();
        let sols = solver.solve_linear_many(&rhss);
        for (j, (mode, sol)) in modes.iter().zip(&sols).enumerate() {
            let nav = mode_data(grid, &bases, mode);
            let (u, w) = solver.expand_solution(&nav, sol);
            let fs = neumann_traces(grid, &crate::solver::ForwardSolution {
                u,
                w,
                residual: 0.0,
            });
            let coords = neumann_to_coords(grid, &bases, &fs.dnu_u, &fs.dnu_w);
            for (i, c) in coords.iter().enumerate() {
                data[i * cols + j] = c.re;
            }
        }
        let mut row_faces = Vec::with_capacity(rows);
        for _block in 0..2 {
            for face in Face::all() {
                let [m1, m2] = grid.face_dims(face);
                row_faces.extend(std::iter::repeat(face.index() as u8).take(m1 * m2));
            }
        }
        Ok(DtnMatrix {
            rows,
            cols,
            data,
            row_faces,
            kmax,
            grid_hash: grid.content_hash(),
            q_hash: solver.potential().content_hash(),
        })
    }

    /// Entry accessor.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Difference of two matrices over the same grid and cutoff.
    pub fn difference(&self, other: &DtnMatrix) -> Result<DtnMatrix> {
        if self.rows != other.rows || self.cols != other.cols || self.kmax != other.kmax {
            return Err(Error::invalid("matrix shapes differ"));
        }
        if self.grid_hash != other.grid_hash {
            return Err(Error::invalid("matrices assembled on different grids"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DtnMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
            row_faces: self.row_faces.clone(),
            kmax: self.kmax,
            grid_hash: self.grid_hash,
            q_hash: self.q_hash ^ other.q_hash,
        })
    }

    /// Restriction to shadowed-face measurements: rows of illuminated faces
    /// are zeroed (an exact row sub-selection in weighted coordinates).
    pub fn restrict_to_shadowed(&self, partition: &BoundaryPartition) -> DtnMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            let face_idx = self.row_faces[i] as usize;
            let face = Face::all()[face_idx];
            if partition.is_plus(face) {
                for j in 0..self.cols {
                    out.data[i * self.cols + j] = 0.0;
                }
            }
        }
        out
    }

    /// Spectral norm (largest singular value) in the weighted coordinates.
    pub fn operator_norm(&self) -> f64 {
        crate::solver::ensure_deterministic_linalg();
        let mut m = faer::Mat::<f64>::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self.at(i, j);
            }
        }
        let sv = m.singular_values().expect("singular value computation failed");
        sv.first().copied().unwrap_or(0.0)
    }

    /// Apply to complex input coordinates.
    pub fn apply(&self, coords: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coords.len(), self.cols);
        let mut out = vec![Complex64::ZERO; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = Complex64::ZERO;
            for (a, c) in row.iter().zip(coords) {
                acc += a * c;
            }
            out[i] = acc;
        }
        out
    }

    /// Content hash of the entries (for determinism checks).
    pub fn content_hash(&self) -> u64 {
        let mut h = ContentHasher::new();
        h.update_u64(self.rows as u64);
        h.update_u64(self.cols as u64);
        h.update_f64_slice(&self.data);
        h.finish()
    }
}

/// Sidecar metadata of a cached matrix.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct CacheSidecar {
    format_version: u32,
    grid_hash: String,
    q_hash: String,
    kmax: usize,
    rows: usize,
    cols: usize,
}

/// Disk cache of assembled measurement matrices.
pub struct DtnCache {
    dir: PathBuf,
    hits: std::cell::Cell<usize>,
    misses: std::cell::Cell<usize>,
}

impl DtnCache {
    /// Open (and create) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<DtnCache> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(DtnCache { dir, hits: std::cell::Cell::new(0), misses: std::cell::Cell::new(0) })
    }

    /// Cache hits so far.
    pub fn hits(&self) -> usize {
        self.hits.get()
    }

    /// Cache misses so far.
    pub fn misses(&self) -> usize {
        self.misses.get()
    }

    fn key(grid_hash: u64, q_hash: u64, kmax: usize) -> String {
        let mut h = ContentHasher::new();
        h.update_str("dtn-cache-key");
        h.update_u64(grid_hash);
        h.update_u64(q_hash);
        h.update_u64(kmax as u64);
        h.finish_hex()
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("dtn_{key}.bin")), self.dir.join(format!("dtn_{key}.json")))
    }

    /// Load a matrix if present and consistent. Every unsuccessful lookup
    /// counts as a miss.
    pub fn load(&self, grid: &Grid, q_hash: u64, kmax: usize) -> Option<DtnMatrix> {
        match self.try_load(grid, q_hash, kmax) {
            Some(m) => {
                self.hits.set(self.hits.get() + 1);
                Some(m)
            }
            None => {
                self.misses.set(self.misses.get() + 1);
                None
            }
        }
    }

    fn try_load(&self, grid: &Grid, q_hash: u64, kmax: usize) -> Option<DtnMatrix> {
        let grid_hash = grid.content_hash();
        let key = Self::key(grid_hash, q_hash, kmax);
        let (bin_path, json_path) = self.paths(&key);
        let sidecar: CacheSidecar =
            serde_json::from_str(&std::fs::read_to_string(&json_path).ok()?).ok()?;
        let expect = CacheSidecar {
            format_version: 1,
            grid_hash: format!("{grid_hash:016x}"),
            q_hash: format!("{q_hash:016x}"),
            kmax,
            rows: row_count(grid),
            cols: 12 * kmax * kmax,
        };
        if sidecar != expect {
            return None;
        }
        let mut bytes = Vec::new();
        std::fs::File::open(&bin_path).ok()?.read_to_end(&mut bytes).ok()?;
        if bytes.len() != 8 * sidecar.rows * sidecar.cols {
            return None;
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk size is 8")))
            .collect();
        let mut row_faces = Vec::with_capacity(sidecar.rows);
        for _block in 0..2 {
            for face in Face::all() {
                let [m1, m2] = grid.face_dims(face);
                row_faces.extend(std::iter::repeat(face.index() as u8).take(m1 * m2));
            }
        }
        Some(DtnMatrix {
            rows: sidecar.rows,
            cols: sidecar.cols,
            data,
            row_faces,
            kmax,
            grid_hash,
            q_hash,
        })
    }

    /// Store a matrix.
    pub fn store(&self, matrix: &DtnMatrix) -> Result<()> {
        let key = Self::key(matrix.grid_hash, matrix.q_hash, matrix.kmax);
        let (bin_path, json_path) = self.paths(&key);
        let sidecar = CacheSidecar {
            format_version: 1,
            grid_hash: format!("{:016x}", matrix.grid_hash),
            q_hash: format!("{:016x}", matrix.q_hash),
            kmax: matrix.kmax,
            rows: matrix.rows,
            cols: matrix.cols,
        };
        let mut bytes = Vec::with_capacity(8 * matrix.data.len());
        for v in &matrix.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(&bin_path)
            .map_err(|e| Error::io(bin_path.display().to_string(), e))?;
        f.write_all(&bytes).map_err(|e| Error::io(bin_path.display().to_string(), e))?;
        std::fs::write(
            &json_path,
            serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Serde(e.to_string()))?,
        )
        .map_err(|e| Error::io(json_path.display().to_string(), e))?;
        Ok(())
    }

    /// Load or assemble-and-store.
    pub fn load_or_assemble(
        &self,
        solver: &NavierSolver,
        kmax: usize,
    ) -> Result<DtnMatrix> {
        let q_hash = solver.potential().content_hash();
        if let Some(m) = self.load(solver.grid(), q_hash, kmax) {
            return Ok(m);
        }
        let m = DtnMatrix::assemble(solver, kmax)?;
        self.store(&m)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::cube_spec;
    use crate::field::Potential;

    #[test]
    fn input_modes_count_and_order() {
        let modes = input_modes(6);
        assert_eq!(modes.len(), 432);
        assert_eq!(modes[0], InputMode { face: Face::all()[0], slot: 0, k: 1, l: 1 });
        assert_eq!(modes[1].l, 2);
    }

    #[test]
    fn mode_data_has_unit_graph_norm() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let bases = BoundaryBases::new(&grid);
        for mode in [
            InputMode { face: Face::all()[0], slot: 0, k: 1, l: 2 },
            InputMode { face: Face::all()[3], slot: 1, k: 3, l: 1 },
        ] {
            let data = mode_data(&grid, &bases, &mode);
            let norm = crate::sobolev::navier_norm(&grid, &bases, &data);
            assert!((norm - 1.0).abs() < 1e-10, "mode {mode:?} norm {norm}");
        }
    }

    #[test]
    fn projection_recovers_basis_coordinates() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let bases = BoundaryBases::new(&grid);
        let kmax = 3;
        let modes = input_modes(kmax);
        // Data = 2.5 * mode 7 - 1.25i * mode 20.
        let m1 = &modes[7];
        let m2 = &modes[20];
        let d1 = mode_data(&grid, &bases, m1);
        let d2 = mode_data(&grid, &bases, m2);
        let c1 = Complex64::new(2.5, 0.0);
        let c2 = Complex64::new(0.0, -1.25);
        let combined = NavierData {
            f: BoundaryField {
                values: d1.f.values.iter().zip(&d2.f.values).map(|(a, b)| c1 * a + c2 * b).collect(),
            },
            g: BoundaryField {
                values: d1.g.values.iter().zip(&d2.g.values).map(|(a, b)| c1 * a + c2 * b).collect(),
            },
        };
        let coords = project_navier(&grid, &bases, kmax, &combined);
        for (j, c) in coords.iter().enumerate() {
            let expect = if j == 7 {
                c1
            } else if j == 20 {
                c2
            } else {
                Complex64::ZERO
            };
            assert!((c - expect).norm() < 1e-10, "column {j}: {c}");
        }
    }

    #[test]
    fn coords_round_trip_through_neumann_values() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let bases = BoundaryBases::new(&grid);
        let mut dnu_u = FaceFieldSet::zeros(&grid);
        let mut dnu_w = FaceFieldSet::zeros(&grid);
        let mut state = 99u64;
        for set in [&mut dnu_u, &mut dnu_w] {
            for f in set.faces.iter_mut() {
                for v in f.iter_mut() {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    *v = Complex64::new(
                        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5,
                        ((state >> 17) as f64 / (1u64 << 47) as f64) - 0.5,
                    );
                }
            }
        }
        let coords = neumann_to_coords(&grid, &bases, &dnu_u, &dnu_w);
        let (back_u, back_w) = coords_to_neumann(&grid, &bases, &coords);
        for face in Face::all() {
            for (a, b) in dnu_u.faces[face.index()].iter().zip(&back_u.faces[face.index()]) {
                assert!((a - b).norm() < 1e-9);
            }
            for (a, b) in dnu_w.faces[face.index()].iter().zip(&back_w.faces[face.index()]) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn restriction_zeroes_illuminated_faces_only() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let q = Potential::zero(&grid, 1.0);
        let solver = NavierSolver::new(&grid, &q).unwrap();
        let m = DtnMatrix::assemble(&solver, 2).unwrap();
        let part = grid.partition([0.0, 0.0, 1.0], 0.0).unwrap();
        let r = m.restrict_to_shadowed(&part);
        let top = Face { axis: 2, side: crate::grid::Side::Hi };
        for i in 0..m.rows {
            for j in 0..m.cols {
                if m.row_faces[i] as usize == top.index() {
                    assert_eq!(r.at(i, j), 0.0);
                } else {
                    assert_eq!(r.at(i, j), m.at(i, j));
                }
            }
        }
        // Restriction is a contraction in the spectral norm.
        assert!(r.operator_norm() <= m.operator_norm() + 1e-12);
    }
}
