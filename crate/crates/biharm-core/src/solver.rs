//! Forward solver for the fourth-order problem with Navier boundary data.
//!
//! The equation `lap^2 u + q u = F` with boundary data `u = f`,
//! `lap u = g` splits into the coupled second-order system
//!
//! ```text
//! lap u - w     = 0        u = f on the boundary
//! lap w + q u   = F        w = g on the boundary
//! ```
//!
//! discretized by the seven-point Laplacian on interior nodes. Boundary
//! values enter the right-hand side through the stencil arms that touch the
//! boundary, so the unknowns are the interior values of `u` and `w` stacked
//! into one real sparse block system, factored once per potential (symbolic
//! analysis is shared across potentials on the same grid) and reused for
//! every right-hand side. A reciprocal-condition-number guard rejects
//! potentials for which zero is (numerically) an eigenvalue.

use faer::mat::Mat;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::field::{FaceFieldSet, FieldKind, GridField, NavierData, NeumannData, Potential};
use crate::grid::{Face, Grid, Side};

/// Reciprocal condition number below which the system is treated as singular.
pub const RCOND_GUARD: f64 = 1e-12;

/// Force single-threaded deterministic kernels in the dense/sparse backend.
pub(crate) fn ensure_deterministic_linalg() {
    static INIT: OnceLock<()> = OnceLock::new();
    INIT.get_or_init(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

fn symbolic_cache() -> &'static Mutex<HashMap<u64, SymbolicLu<usize>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, SymbolicLu<usize>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// A solved forward problem: full-grid fields and diagnostics.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    /// The solution on every node (boundary values from the data).
    pub u: GridField,
    /// Its Laplacian on every node (boundary values from the data).
    pub w: GridField,
    /// Relative algebraic residual of the linear solve.
    pub residual: f64,
}

/// Factored forward operator for one `(grid, potential)` pair.
pub struct NavierSolver {
    grid: Grid,
    q: Potential,
    n_int: usize,
    matrix: SparseColMat<usize, f64>,
    lu: Lu<usize, f64>,
    rcond: f64,
}

impl NavierSolver {
    /// Assemble and factor the block system.
    pub fn new(grid: &Grid, q: &Potential) -> Result<NavierSolver> {
        ensure_deterministic_linalg();
        let n_int = grid.interior_nodes.len();
        let dim = 2 * n_int;
        let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(18 * n_int);
        for (ip, &node) in grid.interior_nodes.iter().enumerate() {
            let i = grid.coords_of(node);
            let mut diag = 0.0;
            for a in 0..3 {
                let inv = 1.0 / (grid.steps[a] * grid.steps[a]);
                diag -= 2.0 * inv;
                for dir in [-1i64, 1i64] {
                    let mut j = i;
                    j[a] = (i[a] as i64 + dir) as usize;
                    let nb = grid.idx(j);
                    if let Some(jp) = grid.interior_index[nb] {
                        triplets.push(Triplet::new(ip, jp, inv));
                        triplets.push(Triplet::new(n_int + ip, n_int + jp, inv));
                    }
                }
            }
            triplets.push(Triplet::new(ip, ip, diag));
            triplets.push(Triplet::new(n_int + ip, n_int + ip, diag));
            // Coupling terms: -w in the first block row, q u in the second.
            // The q entry is always placed so the sparsity pattern (and hence
            // the symbolic factorization) is shared by every potential.
            triplets.push(Triplet::new(ip, n_int + ip, -1.0));
            triplets.push(Triplet::new(n_int + ip, ip, q.at(node)));
        }
        let matrix = SparseColMat::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| Error::Factorization(format!("assembly failed: {e:?}")))?;
        let symbolic = {
            let mut cache = symbolic_cache().lock().expect("symbolic cache poisoned");
            cache
                .entry(grid.content_hash())
                .or_insert_with(|| {
                    SymbolicLu::try_new(matrix.symbolic()).expect("symbolic analysis failed")
                })
                .clone()
        };
        let lu = Lu::try_new_with_symbolic(symbolic, matrix.as_ref())
            .map_err(|e| Error::Factorization(format!("numeric factorization failed: {e:?}")))?;
        let mut solver =
            NavierSolver { grid: grid.clone(), q: q.clone(), n_int, matrix, lu, rcond: 0.0 };
        solver.rcond = solver.estimate_rcond();
        if solver.rcond < RCOND_GUARD {
            return Err(Error::EigenvalueCollision { rcond: solver.rcond, threshold: RCOND_GUARD });
        }
        Ok(solver)
    }

    /// Grid the solver was built on.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Potential the solver was built with.
    pub fn potential(&self) -> &Potential {
        &self.q
    }

    /// Number of interior nodes per field.
    pub fn interior_count(&self) -> usize {
        self.n_int
    }

    /// Estimated reciprocal condition number of the block system.
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let m = self.matrix.as_ref();
        let col_ptr = m.col_ptr();
        let row_idx = m.row_idx();
        let val = m.val();
        for j in 0..m.ncols() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for t in col_ptr[j]..col_ptr[j + 1] {
                out[row_idx[t]] += val[t] * xj;
            }
        }
    }

    fn matvec_transpose(&self, x: &[f64], out: &mut [f64]) {
        let m = self.matrix.as_ref();
        let col_ptr = m.col_ptr();
        let row_idx = m.row_idx();
        let val = m.val();
        for j in 0..m.ncols() {
            let mut acc = 0.0;
            for t in col_ptr[j]..col_ptr[j + 1] {
                acc += val[t] * x[row_idx[t]];
            }
            out[j] = acc;
        }
    }

    /// Power-iteration estimate of `sigma_min / sigma_max`.
    fn estimate_rcond(&self) -> f64 {
        let dim = 2 * self.n_int;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let normalize = |v: &mut [f64]| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                for x in v.iter_mut() {
                    *x /= n;
                }
            }
            n
        };
        // sigma_max via power iteration on A^T A.
        let mut x: Vec<f64> = (0..dim).map(|_| rand()).collect();
        normalize(&mut x);
        let mut y = vec![0.0; dim];
        let mut sigma_max = 0.0;
        for _ in 0..20 {
            self.matvec(&x, &mut y);
            self.matvec_transpose(&y, &mut x);
            sigma_max = normalize(&mut x).sqrt();
        }
        // sigma_min via power iteration on (A^T A)^{-1} = A^{-1} A^{-T}.
        let mut x: Vec<f64> = (0..dim).map(|_| rand()).collect();
        normalize(&mut x);
        let mut inv_sq = 0.0;
        for _ in 0..20 {
            let mut rhs = Mat::<f64>::zeros(dim, 1);
            for (i, &v) in x.iter().enumerate() {
                rhs[(i, 0)] = v;
            }
            self.lu.solve_transpose_in_place(rhs.as_mut());
            self.lu.solve_in_place(rhs.as_mut());
            for (i, v) in x.iter_mut().enumerate() {
                *v = rhs[(i, 0)];
            }
            inv_sq = normalize(&mut x);
        }
        let sigma_min = if inv_sq > 0.0 { 1.0 / inv_sq.sqrt() } else { 0.0 };
        if sigma_max > 0.0 {
            sigma_min / sigma_max
        } else {
            0.0
        }
    }

    /// Right-hand side of the block system for Navier data and an optional
    /// interior source (the `F` in `lap^2 u + q u = F`).
    pub fn assemble_rhs(&self, data: &NavierData, source: Option<&[Complex64]>) -> Vec<Complex64> {
        let grid = &self.grid;
        let mut rhs = vec![Complex64::ZERO; 2 * self.n_int];
        for (ip, &node) in grid.interior_nodes.iter().enumerate() {
            let i = grid.coords_of(node);
            let mut b1 = Complex64::ZERO;
            let mut b2 = Complex64::ZERO;
            for a in 0..3 {
                let inv = 1.0 / (grid.steps[a] * grid.steps[a]);
                for dir in [-1i64, 1i64] {
                    let mut j = i;
                    j[a] = (i[a] as i64 + dir) as usize;
                    let nb = grid.idx(j);
                    if grid.boundary_index[nb].is_some() {
                        b1 -= inv * data.f.at_node(grid, nb);
                        b2 -= inv * data.g.at_node(grid, nb);
                    }
                }
            }
            if let Some(src) = source {
                b2 += src[node];
            }
            rhs[ip] = b1;
            rhs[self.n_int + ip] = b2;
        }
        rhs
    }

    /// Solve the block system for one complex right-hand side.
    pub fn solve_linear(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let dim = 2 * self.n_int;
        assert_eq!(rhs.len(), dim);
        let mut cols = Mat::<f64>::zeros(dim, 2);
        for (i, v) in rhs.iter().enumerate() {
            cols[(i, 0)] = v.re;
            cols[(i, 1)] = v.im;
        }
        self.lu.solve_in_place(cols.as_mut());
        (0..dim).map(|i| Complex64::new(cols[(i, 0)], cols[(i, 1)])).collect()
    }

    /// Solve the block system for many complex right-hand sides at once
    /// (chunked internally to bound memory).
    pub fn solve_linear_many(&self, rhss: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let dim = 2 * self.n_int;
        let mut out = Vec::with_capacity(rhss.len());
        for chunk in rhss.chunks(64) {
            let mut cols = Mat::<f64>::zeros(dim, 2 * chunk.len());
            for (c, rhs) in chunk.iter().enumerate() {
                assert_eq!(rhs.len(), dim);
                for (i, v) in rhs.iter().enumerate() {
                    cols[(i, 2 * c)] = v.re;
                    cols[(i, 2 * c + 1)] = v.im;
                }
            }
            self.lu.solve_in_place(cols.as_mut());
            for c in 0..chunk.len() {
                out.push(
                    (0..dim)
                        .map(|i| Complex64::new(cols[(i, 2 * c)], cols[(i, 2 * c + 1)]))
                        .collect(),
                );
            }
        }
        out
    }

    fn relative_residual(&self, rhs: &[Complex64], sol: &[Complex64]) -> f64 {
        let dim = 2 * self.n_int;
        let (mut xre, mut xim) = (vec![0.0; dim], vec![0.0; dim]);
        for (i, v) in sol.iter().enumerate() {
            xre[i] = v.re;
            xim[i] = v.im;
        }
        let (mut yre, mut yim) = (vec![0.0; dim], vec![0.0; dim]);
        self.matvec(&xre, &mut yre);
        self.matvec(&xim, &mut yim);
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..dim {
            let r = Complex64::new(yre[i], yim[i]) - rhs[i];
            err += r.norm_sqr();
            scale += rhs[i].norm_sqr();
        }
        if scale > 0.0 {
            (err / scale).sqrt()
        } else {
            err.sqrt()
        }
    }

    /// Expand a linear-system solution into full-grid fields.
    pub fn expand_solution(&self, data: &NavierData, sol: &[Complex64]) -> (GridField, GridField) {
        let grid = &self.grid;
        let mut u = GridField::zeros(grid);
        let mut w = GridField::zeros(grid);
        u.kind = FieldKind::Full;
        w.kind = FieldKind::Full;
        for (b, &node) in grid.boundary_nodes.iter().enumerate() {
            u.values[node] = data.f.values[b];
            w.values[node] = data.g.values[b];
        }
        for (ip, &node) in grid.interior_nodes.iter().enumerate() {
            u.values[node] = sol[ip];
            w.values[node] = sol[self.n_int + ip];
        }
        (u, w)
    }

    /// Solve with Navier boundary data.
    pub fn solve(&self, data: &NavierData) -> Result<ForwardSolution> {
        let rhs = self.assemble_rhs(data, None);
        let sol = self.solve_linear(&rhs);
        let residual = self.relative_residual(&rhs, &sol);
        let (u, w) = self.expand_solution(data, &sol);
        Ok(ForwardSolution { u, w, residual })
    }

    /// Solve with zero Navier data and an interior source `F`.
    pub fn solve_with_source(&self, source: &GridField) -> Result<ForwardSolution> {
        let data = NavierData::zeros(&self.grid);
        let rhs = self.assemble_rhs(&data, Some(&source.values));
        let sol = self.solve_linear(&rhs);
        let residual = self.relative_residual(&rhs, &sol);
        let (u, w) = self.expand_solution(&data, &sol);
        Ok(ForwardSolution { u, w, residual })
    }
}

/// Outward normal derivative of a full-grid field on one face node by the
/// second-order one-sided stencil `(3 v_b - 4 v_1 + v_2) / (2 s)` where
/// `v_1, v_2` are one and two nodes inward.
fn one_sided_normal(grid: &Grid, field: &GridField, face: Face, j: [usize; 2]) -> Complex64 {
    let i0 = grid.face_node(face, j);
    let inward: i64 = match face.side {
        Side::Lo => 1,
        Side::Hi => -1,
    };
    let mut i1 = i0;
    i1[face.axis] = (i0[face.axis] as i64 + inward) as usize;
    let mut i2 = i0;
    i2[face.axis] = (i0[face.axis] as i64 + 2 * inward) as usize;
    let s = grid.steps[face.axis];
    let vb = field.values[grid.idx(i0)];
    let v1 = field.values[grid.idx(i1)];
    let v2 = field.values[grid.idx(i2)];
    (3.0 * vb - 4.0 * v1 + v2) / (2.0 * s)
}

/// Face-wise Neumann traces `(du/dnu, dw/dnu)` of a forward solution.
pub fn neumann_traces(grid: &Grid, solution: &ForwardSolution) -> NeumannData {
    let mut dnu_u = FaceFieldSet::zeros(grid);
    let mut dnu_w = FaceFieldSet::zeros(grid);
    for face in Face::all() {
        let [m1, m2] = grid.face_dims(face);
        for j2 in 0..m2 {
            for j1 in 0..m1 {
                *dnu_u.at_mut(grid, face, [j1, j2]) =
                    one_sided_normal(grid, &solution.u, face, [j1, j2]);
                *dnu_w.at_mut(grid, face, [j1, j2]) =
                    one_sided_normal(grid, &solution.w, face, [j1, j2]);
            }
        }
    }
    NeumannData { dnu_u, dnu_w }
}

/// Seven-point Laplacian of a field at a node strictly inside the grid.
fn laplacian_at(grid: &Grid, field: &[Complex64], i: [usize; 3]) -> Complex64 {
    let mut acc = Complex64::ZERO;
    let center = field[grid.idx(i)];
    for a in 0..3 {
        let inv = 1.0 / (grid.steps[a] * grid.steps[a]);
        let mut lo = i;
        lo[a] -= 1;
        let mut hi = i;
        hi[a] += 1;
        acc += inv * (field[grid.idx(lo)] + field[grid.idx(hi)] - 2.0 * center);
    }
    acc
}

/// Residual of the surface-pairing identity
///
/// ```text
/// int (B_q u) conj(v) - u conj(B_q v)
///   = oint dnu(lap u) conj(v) + dnu(u) conj(lap v)
///     - lap(u) conj(dnu v) - u conj(dnu(lap v))
/// ```
///
/// evaluated on the box shrunk by two node layers, with centered stencils
/// throughout (Laplacians one layer out, normal derivatives centered across
/// the shrunk boundary) and tensor trapezoid quadrature. For smooth fields
/// the residual decays at second order in the step; for fields supported
/// away from the shrunk boundary it vanishes to rounding because the
/// discrete volume pairing is exactly symmetric.
pub fn greens_identity_residual(grid: &Grid, q: &Potential, u: &GridField, v: &GridField) -> f64 {
    let margin = 2usize;
    for a in 0..3 {
        assert!(grid.dims[a] > 2 * margin + 2, "grid too small for the shrunk-box identity");
    }
    let lo = [margin; 3];
    let hi = [grid.dims[0] - 1 - margin, grid.dims[1] - 1 - margin, grid.dims[2] - 1 - margin];

    // Laplacians on every node at depth >= 1.
    let mut wu = vec![Complex64::ZERO; grid.len()];
    let mut wv = vec![Complex64::ZERO; grid.len()];
    for idx in 0..grid.len() {
        let i = grid.coords_of(idx);
        if grid.depth(i) >= 1 {
            wu[idx] = laplacian_at(grid, &u.values, i);
            wv[idx] = laplacian_at(grid, &v.values, i);
        }
    }
    // Fourth-order operator applied on depth >= 2 nodes.
    let apply_b = |field: &[Complex64], lap: &[Complex64], i: [usize; 3]| -> Complex64 {
        laplacian_at(grid, lap, i) + q.at(grid.idx(i)) * field[grid.idx(i)]
    };

    // Trapezoid line weights restricted to the shrunk box.
    let sub_weight = |axis: usize, j: usize| -> f64 {
        let s = grid.steps[axis];
        if j == lo[axis] || j == hi[axis] {
            0.5 * s
        } else {
            s
        }
    };

    // Volume term over the shrunk box.
    let mut volume = Complex64::ZERO;
    for iz in lo[2]..=hi[2] {
        for iy in lo[1]..=hi[1] {
            for ix in lo[0]..=hi[0] {
                let i = [ix, iy, iz];
                let wq = sub_weight(0, ix) * sub_weight(1, iy) * sub_weight(2, iz);
                let idx = grid.idx(i);
                let bu = apply_b(&u.values, &wu, i);
                let bv = apply_b(&v.values, &wv, i);
                volume += wq * (bu * v.values[idx].conj() - u.values[idx] * bv.conj());
            }
        }
    }

    // Surface terms over the six faces of the shrunk box, with centered
    // normal derivatives across the shrunk boundary.
    let mut surface = Complex64::ZERO;
    for face in Face::all() {
        let t = face.tangent_axes();
        let axis = face.axis;
        let (plane, out_dir): (usize, i64) = match face.side {
            Side::Lo => (lo[axis], -1),
            Side::Hi => (hi[axis], 1),
        };
        let s = grid.steps[axis];
        for j2 in lo[t[1]]..=hi[t[1]] {
            for j1 in lo[t[0]]..=hi[t[0]] {
                let mut i = [0usize; 3];
                i[axis] = plane;
                i[t[0]] = j1;
                i[t[1]] = j2;
                let idx = grid.idx(i);
                let mut ip = i;
                ip[axis] = (plane as i64 + out_dir) as usize;
                let mut im = i;
                im[axis] = (plane as i64 - out_dir) as usize;
                let dnu = |field: &[Complex64]| -> Complex64 {
                    (field[grid.idx(ip)] - field[grid.idx(im)]) / (2.0 * s)
                };
                let wq = sub_weight(t[0], j1) * sub_weight(t[1], j2);
                let term = dnu(&wu) * v.values[idx].conj() + dnu(&u.values) * wv[idx].conj()
                    - wu[idx] * dnu(&v.values).conj()
                    - u.values[idx] * dnu(&wv).conj();
                surface += wq * term;
            }
        }
    }
    (volume - surface).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::cube_spec;

    #[test]
    fn quadratic_solution_is_exact() {
        // u = |x|^2 has lap u = 6 exactly for the discrete stencil, and
        // lap^2 u = 0, so with q = 0 the discrete solve is exact to rounding.
        let grid = cube_spec(0.5, 9).build().unwrap();
        let q = Potential::zero(&grid, 1.0);
        let solver = NavierSolver::new(&grid, &q).unwrap();
        let quad = |x: [f64; 3]| x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let data = NavierData {
            f: crate::field::BoundaryField::from_fn(&grid, |x| Complex64::new(quad(x), 0.0)),
            g: crate::field::BoundaryField::from_fn(&grid, |_| Complex64::new(6.0, 0.0)),
        };
        let sol = solver.solve(&data).unwrap();
        assert!(sol.residual < 1e-10, "residual {}", sol.residual);
        for idx in 0..grid.len() {
            let expect = quad(grid.position_of(idx));
            assert!(
                (sol.u.values[idx].re - expect).abs() < 1e-9,
                "node {idx}: {} vs {expect}",
                sol.u.values[idx].re
            );
            assert!(sol.u.values[idx].im.abs() < 1e-9);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let q = Potential::gaussian_bump(&grid, [0.0, 0.1, 0.0], 0.2, 5.0).unwrap();
        let solver = NavierSolver::new(&grid, &q).unwrap();
        let sol = solver.solve(&NavierData::zeros(&grid)).unwrap();
        assert!(sol.u.max_abs() < 1e-14);
        assert!(sol.w.max_abs() < 1e-14);
    }

    #[test]
    fn solve_is_linear_in_the_data() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let q = Potential::constant(&grid, 3.0).unwrap();
        let solver = NavierSolver::new(&grid, &q).unwrap();
        let d1 = NavierData {
            f: crate::field::BoundaryField::from_fn(&grid, |x| Complex64::new(x[0], x[1])),
            g: crate::field::BoundaryField::from_fn(&grid, |x| Complex64::new(x[2], 0.0)),
        };
        let d2 = NavierData {
            f: crate::field::BoundaryField::from_fn(&grid, |x| {
                Complex64::new(x[1] * x[2], -x[0])
            }),
            g: crate::field::BoundaryField::from_fn(&grid, |_| Complex64::new(0.5, 0.25)),
        };
        let c = Complex64::new(2.0, -1.5);
        let combined = NavierData {
            f: crate::field::BoundaryField {
                values: d1
                    .f
                    .values
                    .iter()
                    .zip(&d2.f.values)
                    .map(|(a, b)| a + c * b)
                    .collect(),
            },
            g: crate::field::BoundaryField {
                values: d1
                    .g
                    .values
                    .iter()
                    .zip(&d2.g.values)
                    .map(|(a, b)| a + c * b)
                    .collect(),
            },
        };
        let s1 = solver.solve(&d1).unwrap();
        let s2 = solver.solve(&d2).unwrap();
        let sc = solver.solve(&combined).unwrap();
        for idx in 0..grid.len() {
            let expect = s1.u.values[idx] + c * s2.u.values[idx];
            assert!((sc.u.values[idx] - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn source_solve_has_zero_traces() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let q = Potential::zero(&grid, 1.0);
        let solver = NavierSolver::new(&grid, &q).unwrap();
        let src = GridField::from_real_fn(&grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let sol = solver.solve_with_source(&src).unwrap();
        for &b in &grid.boundary_nodes {
            assert_eq!(sol.u.values[b], Complex64::ZERO);
            assert_eq!(sol.w.values[b], Complex64::ZERO);
        }
        assert!(sol.u.max_abs() > 0.0);
    }

    #[test]
    fn greens_residual_vanishes_for_compact_support() {
        let grid = cube_spec(0.5, 11).build().unwrap();
        let q = Potential::gaussian_bump(&grid, [0.05, 0.0, -0.05], 0.15, 5.0).unwrap();
        // Fields supported strictly inside the shrunk box (depth >= 4).
        let bump = |x: [f64; 3], c: [f64; 3]| {
            let d2: f64 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum();
            let r2 = 0.08;
            if d2 < r2 {
                ((1.0 - d2 / r2).powi(4)).max(0.0)
            } else {
                0.0
            }
        };
        let mut u = GridField::zeros(&grid);
        let mut v = GridField::zeros(&grid);
        for idx in 0..grid.len() {
            let i = grid.coords_of(idx);
            if grid.depth(i) >= 4 {
                let x = grid.position_of(idx);
                u.values[idx] = Complex64::new(bump(x, [0.0, 0.0, 0.0]), 0.0);
                v.values[idx] =
                    Complex64::new(bump(x, [0.03, 0.0, 0.0]), 0.3 * bump(x, [0.0, 0.03, 0.0]));
            }
        }
        let res = greens_identity_residual(&grid, &q, &u, &v);
        assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn rcond_guard_reports_estimate() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let q = Potential::zero(&grid, 1.0);
        let solver = NavierSolver::new(&grid, &q).unwrap();
        assert!(solver.rcond() > 1e-8, "rcond {}", solver.rcond());
    }
}
