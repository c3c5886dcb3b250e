//! Fourier-side machinery: periodic enclosing torus, 3-D FFTs, Sobolev norms
//! of potentials, and semiclassically scaled finite-difference norms.
//!
//! The negative-order norm of a potential is computed through its zero
//! extension to an enclosing torus whose side is the padded domain diameter
//! and whose nodes extend the domain lattice, so the nodal values embed
//! without interpolation and the discrete Parseval identity
//! `cell * sum |q|^2 = (1/vol) * sum |qhat_k|^2` holds exactly.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Potential;
use crate::grid::Grid;

/// Periodic box extending the domain lattice.
#[derive(Debug, Clone)]
pub struct TorusGrid {
    /// Node counts per axis.
    pub dims: [usize; 3],
    /// Grid steps per axis (equal to the domain steps).
    pub steps: [f64; 3],
    /// Side lengths `dims * steps`.
    pub sides: [f64; 3],
    /// Physical position of torus node (0,0,0): the low corner of the domain.
    pub origin: [f64; 3],
}

impl TorusGrid {
    /// Torus enclosing the domain: per-axis node count is the smallest number
    /// of domain-sized steps whose span reaches `2 * enclosing_radius *
    /// torus_padding`.
    pub fn enclosing(grid: &Grid) -> TorusGrid {
        let spec = &grid.spec;
        let target = 2.0 * spec.enclosing_radius * spec.torus_padding;
        let mut dims = [0usize; 3];
        let mut sides = [0.0; 3];
        let mut origin = [0.0; 3];
        for a in 0..3 {
            let s = grid.steps[a];
            let n = (target / s).ceil() as usize;
            // Never smaller than the domain itself.
            dims[a] = n.max(grid.dims[a]);
            sides[a] = dims[a] as f64 * s;
            origin[a] = spec.center[a] - spec.half_widths[a];
        }
        TorusGrid { dims, steps: grid.steps, sides, origin }
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Whether the torus has no nodes (never for a valid construction).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index of torus node `i`.
    pub fn idx(&self, i: [usize; 3]) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }

    /// Per-axis indices of a linear index.
    pub fn coords_of(&self, idx: usize) -> [usize; 3] {
        let ix = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [ix, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Physical position of a torus node (principal sheet, no wraparound).
    pub fn position(&self, i: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + self.steps[0] * i[0] as f64,
            self.origin[1] + self.steps[1] * i[1] as f64,
            self.origin[2] + self.steps[2] * i[2] as f64,
        ]
    }

    /// Signed integer frequency index for bin `k` (standard FFT convention).
    pub fn signed_index(&self, axis: usize, k: usize) -> i64 {
        let n = self.dims[axis] as i64;
        let k = k as i64;
        if 2 * k < n {
            k
        } else {
            k - n
        }
    }

    /// Angular frequency of bin `k` along an axis: `2 pi ktilde / side`.
    pub fn frequency(&self, axis: usize, k: usize) -> f64 {
        2.0 * PI * self.signed_index(axis, k) as f64 / self.sides[axis]
    }

    /// Zero-extend domain node values onto the torus (domain node `i` lands on
    /// torus node `i`).
    pub fn embed(&self, grid: &Grid, values: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; self.len()];
        for idx in 0..grid.len() {
            let i = grid.coords_of(idx);
            out[self.idx(i)] = Complex64::new(values[idx], 0.0);
        }
        out
    }

    /// Restrict torus node values to the domain nodes.
    pub fn restrict(&self, grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
        (0..grid.len()).map(|idx| values[self.idx(grid.coords_of(idx))]).collect()
    }
}

/// Planned 3-D FFT over a fixed shape, x-fastest storage.
pub struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    /// Plan transforms for a shape.
    pub fn new(dims: [usize; 3]) -> Fft3 {
        let mut planner = FftPlanner::<f64>::new();
        let forward = [
            planner.plan_fft_forward(dims[0]),
            planner.plan_fft_forward(dims[1]),
            planner.plan_fft_forward(dims[2]),
        ];
        let inverse = [
            planner.plan_fft_inverse(dims[0]),
            planner.plan_fft_inverse(dims[1]),
            planner.plan_fft_inverse(dims[2]),
        ];
        Fft3 { dims, forward, inverse }
    }

    fn apply_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let [nx, ny, nz] = self.dims;
        let n = self.dims[axis];
        let mut line = vec![Complex64::ZERO; n];
        match axis {
            0 => {
                for chunk in data.chunks_exact_mut(nx) {
                    fft.process(chunk);
                }
            }
            1 => {
                for iz in 0..nz {
                    for ix in 0..nx {
                        let base = ix + nx * ny * iz;
                        for iy in 0..ny {
                            line[iy] = data[base + nx * iy];
                        }
                        fft.process(&mut line);
                        for iy in 0..ny {
                            data[base + nx * iy] = line[iy];
                        }
                    }
                }
            }
            _ => {
                let plane = nx * ny;
                for iy in 0..ny {
                    for ix in 0..nx {
                        let base = ix + nx * iy;
                        for iz in 0..nz {
                            line[iz] = data[base + plane * iz];
                        }
                        fft.process(&mut line);
                        for iz in 0..nz {
                            data[base + plane * iz] = line[iz];
                        }
                    }
                }
            }
        }
    }

    /// In-place forward DFT (negative exponent), unnormalized.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.dims[0] * self.dims[1] * self.dims[2]);
        for axis in 0..3 {
            let fft = self.forward[axis].clone();
            self.apply_axis(data, axis, &fft);
        }
    }

    /// In-place inverse DFT, normalized by `1/len` so it inverts `forward`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.dims[0] * self.dims[1] * self.dims[2]);
        for axis in 0..3 {
            let fft = self.inverse[axis].clone();
            self.apply_axis(data, axis, &fft);
        }
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Plain-cell L^2 norm of complex node values over the domain:
/// `sqrt(cell * sum |v|^2)`.
pub fn l2_norm(grid: &Grid, values: &[Complex64]) -> f64 {
    let cell = grid.cell_volume();
    (cell * values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

/// Plain-cell L^2 norm of a potential.
pub fn potential_l2(grid: &Grid, q: &Potential) -> f64 {
    let cell = grid.cell_volume();
    (cell * q.values().iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Negative-order Sobolev norm of a potential through its zero extension to
/// the enclosing torus: `sqrt((1/vol) * sum_k |qhat_k|^2 / (1 + |xi_k|^2))`
/// with `qhat_k = cell * sum_j q_j exp(-i x_j . xi_k)`.
pub fn hminus1_norm(grid: &Grid, q: &Potential) -> f64 {
    let torus = TorusGrid::enclosing(grid);
    let mut data = torus.embed(grid, q.values());
    let fft = Fft3::new(torus.dims);
    fft.forward(&mut data);
    let cell = grid.cell_volume();
    let vol = torus.sides[0] * torus.sides[1] * torus.sides[2];
    let mut sum = 0.0;
    for iz in 0..torus.dims[2] {
        let xz = torus.frequency(2, iz);
        for iy in 0..torus.dims[1] {
            let xy = torus.frequency(1, iy);
            for ix in 0..torus.dims[0] {
                let xx = torus.frequency(0, ix);
                let w = 1.0 + xx * xx + xy * xy + xz * xz;
                let qhat = cell * data[torus.idx([ix, iy, iz])].norm();
                sum += qhat * qhat / w;
            }
        }
    }
    (sum / vol).sqrt()
}

/// Fourier coefficient of the zero-extended potential at an arbitrary
/// frequency, by direct quadrature with absolute phases:
/// `cell * sum_j q_j exp(-i x_j . xi)`.
pub fn fourier_coefficient(grid: &Grid, q: &Potential, xi: [f64; 3]) -> Complex64 {
    let cell = grid.cell_volume();
    let mut sum = Complex64::ZERO;
    for (idx, &v) in q.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let x = grid.position_of(idx);
        let phase = -(x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2]);
        sum += v * Complex64::new(phase.cos(), phase.sin());
    }
    cell * sum
}

/// Finite-difference weights of the `m`-th derivative at `z` on nodes `xs`
/// (Fornberg's recursion).
pub fn fd_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m, "need more nodes than the derivative order");
    // c[k][j]: weight of node j for the k-th derivative, built incrementally.
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = ((xs[i] - z) * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = (xs[i] - z) * c[0][j] / c3;
        }
        c1 = c2;
    }
    c[m].clone()
}

/// One-dimensional `m`-th derivative operator on a uniform line of `n` nodes:
/// centered stencils inside, second-order offset stencils near the ends.
#[derive(Debug, Clone)]
pub struct DerivativeOp1D {
    /// Node count.
    pub n: usize,
    /// Derivative order.
    pub m: usize,
    /// Per-node `(window start, weights)`.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl DerivativeOp1D {
    /// Build the operator for step `step`.
    pub fn new(n: usize, step: f64, m: usize) -> DerivativeOp1D {
        assert!(m >= 1 && m <= 4, "derivative order out of range");
        // Centered window keeps second-order accuracy; odd orders need one
        // extra node. Near the ends the window shifts and grows to m + 2 so
        // the offset stencil stays second order.
        let w_center = if m % 2 == 0 { m + 1 } else { m + 2 };
        let w_edge = m + 2;
        assert!(n >= w_edge, "line too short for derivative order {m}");
        let mut rows = Vec::with_capacity(n);
        for j in 0..n {
            let half = (w_center - 1) / 2;
            let (start, w) = if j >= half && j + half < n {
                (j - half, w_center)
            } else {
                let start = if j < w_edge / 2 { 0 } else { n - w_edge };
                (start, w_edge)
            };
            let xs: Vec<f64> = (0..w).map(|t| (start + t) as f64 * step).collect();
            let weights = fd_weights(j as f64 * step, &xs, m);
            rows.push((start, weights));
        }
        DerivativeOp1D { n, m, rows }
    }

    /// Apply to a 1-D complex vector.
    pub fn apply_line(&self, input: &[Complex64], out: &mut [Complex64]) {
        for (j, (start, weights)) in self.rows.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for (t, &w) in weights.iter().enumerate() {
                acc += w * input[start + t];
            }
            out[j] = acc;
        }
    }

    /// Dense matrix image (for small Gram assemblies).
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut mat = vec![vec![0.0; self.n]; self.n];
        for (j, (start, weights)) in self.rows.iter().enumerate() {
            for (t, &w) in weights.iter().enumerate() {
                mat[j][start + t] = w;
            }
        }
        mat
    }
}

/// Apply a 1-D derivative operator along one axis of an x-fastest 3-D array.
pub fn apply_axis_derivative(
    dims: [usize; 3],
    axis: usize,
    op: &DerivativeOp1D,
    data: &[Complex64],
) -> Vec<Complex64> {
    assert_eq!(dims[axis], op.n);
    let [nx, ny, nz] = dims;
    let mut out = vec![Complex64::ZERO; data.len()];
    let mut line_in = vec![Complex64::ZERO; dims[axis]];
    let mut line_out = vec![Complex64::ZERO; dims[axis]];
    match axis {
        0 => {
            for (src, dst) in data.chunks_exact(nx).zip(out.chunks_exact_mut(nx)) {
                op.apply_line(src, dst);
            }
        }
        1 => {
            for iz in 0..nz {
                for ix in 0..nx {
                    let base = ix + nx * ny * iz;
                    for iy in 0..ny {
                        line_in[iy] = data[base + nx * iy];
                    }
                    op.apply_line(&line_in, &mut line_out);
                    for iy in 0..ny {
                        out[base + nx * iy] = line_out[iy];
                    }
                }
            }
        }
        _ => {
            let plane = nx * ny;
            for iy in 0..ny {
                for ix in 0..nx {
                    let base = ix + nx * iy;
                    for iz in 0..nz {
                        line_in[iz] = data[base + plane * iz];
                    }
                    op.apply_line(&line_in, &mut line_out);
                    for iz in 0..nz {
                        out[base + plane * iz] = line_out[iz];
                    }
                }
            }
        }
    }
    out
}

/// All multi-indices `beta` in three variables with `|beta| <= order`.
pub fn multi_indices(order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=order {
        for b0 in 0..=total {
            for b1 in 0..=(total - b0) {
                out.push([b0, b1, total - b0 - b1]);
            }
        }
    }
    out
}

/// Semiclassically scaled Sobolev norm of order `order` on the domain grid:
/// `sqrt( sum_{|beta| <= order} h^{2|beta|} * ||D^beta u||_{L^2}^2 )` with
/// plain-cell quadrature and the second-order difference operators above.
pub fn semiclassical_norm(grid: &Grid, values: &[Complex64], h: f64, order: usize) -> f64 {
    assert_eq!(values.len(), grid.len());
    let cell = grid.cell_volume();
    let ops: Vec<Vec<DerivativeOp1D>> = (0..3)
        .map(|a| (1..=order).map(|m| DerivativeOp1D::new(grid.dims[a], grid.steps[a], m)).collect())
        .collect();
    let mut total = 0.0;
    for beta in multi_indices(order) {
        let weight = h.powi(2 * (beta[0] + beta[1] + beta[2]) as i32);
        let mut field = values.to_vec();
        for a in 0..3 {
            if beta[a] > 0 {
                field = apply_axis_derivative(grid.dims, a, &ops[a][beta[a] - 1], &field);
            }
        }
        let sq: f64 = field.iter().map(|v| v.norm_sqr()).sum();
        total += weight * cell * sq;
    }
    total.sqrt()
}

/// Fourth-order semiclassical norm (the scale used by the remainder bounds).
pub fn semiclassical_h4_norm(grid: &Grid, values: &[Complex64], h: f64) -> f64 {
    semiclassical_norm(grid, values, h, 4)
}

/// Largest torus frequency magnitude representable per axis (Nyquist).
pub fn nyquist(torus: &TorusGrid) -> [f64; 3] {
    let mut out = [0.0; 3];
    for a in 0..3 {
        out[a] = PI / torus.steps[a] * ((torus.dims[a] / 2) as f64 * 2.0 / torus.dims[a] as f64);
    }
    out
}

/// Guard that a frequency is resolvable on the torus lattice.
pub fn check_resolvable(torus: &TorusGrid, xi: [f64; 3]) -> Result<()> {
    let ny = nyquist(torus);
    for a in 0..3 {
        if xi[a].abs() > ny[a] {
            return Err(Error::invalid(format!(
                "frequency component {} = {:.6} exceeds the torus Nyquist {:.6}",
                a, xi[a], ny[a]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::cube_spec;

    #[test]
    fn fd_weights_match_classic_stencils() {
        let s = 0.25;
        let xs: Vec<f64> = (0..3).map(|i| i as f64 * s).collect();
        // Centered first derivative.
        let w = fd_weights(s, &xs, 1);
        let expect = [-0.5 / s, 0.0, 0.5 / s];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // Centered second derivative.
        let w = fd_weights(s, &xs, 2);
        let expect = [1.0, -2.0, 1.0].map(|c| c / (s * s));
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // One-sided first derivative at the left end.
        let w = fd_weights(0.0, &xs, 1);
        let expect = [-1.5 / s, 2.0 / s, -0.5 / s];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // Centered fourth derivative on five nodes.
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * s).collect();
        let w = fd_weights(2.0 * s, &xs, 4);
        let expect = [1.0, -4.0, 6.0, -4.0, 1.0].map(|c| c / s.powi(4));
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fft_round_trip() {
        let dims = [12, 10, 9];
        let fft = Fft3::new(dims);
        let n = dims[0] * dims[1] * dims[2];
        let mut data: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = data.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_single_mode() {
        // One pure periodic mode lands in exactly one bin.
        let dims = [8, 8, 8];
        let fft = Fft3::new(dims);
        let (kx, ky, kz) = (3usize, 1usize, 6usize);
        let mut data = vec![Complex64::ZERO; 512];
        for iz in 0..8 {
            for iy in 0..8 {
                for ix in 0..8 {
                    let phase = 2.0 * PI
                        * (kx * ix + ky * iy + kz * iz) as f64
                        / 8.0;
                    data[ix + 8 * (iy + 8 * iz)] = Complex64::new(phase.cos(), phase.sin());
                }
            }
        }
        fft.forward(&mut data);
        for iz in 0..8 {
            for iy in 0..8 {
                for ix in 0..8 {
                    let v = data[ix + 8 * (iy + 8 * iz)];
                    let expect = if (ix, iy, iz) == (kx, ky, kz) { 512.0 } else { 0.0 };
                    assert!((v - expect).norm() < 1e-9, "bin ({ix},{iy},{iz}) = {v}");
                }
            }
        }
    }

    #[test]
    fn parseval_is_exact_for_zero_extension() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let torus = TorusGrid::enclosing(&grid);
        // Deterministic pseudo-random interior values.
        let mut values = vec![0.0; grid.len()];
        let mut state = 0x12345678u64;
        for &n in &grid.interior_nodes {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            values[n] = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        }
        let q = Potential::new(&grid, values, 1.0).unwrap();
        let direct = potential_l2(&grid, &q);
        let mut data = torus.embed(&grid, q.values());
        let fft = Fft3::new(torus.dims);
        fft.forward(&mut data);
        let cell = grid.cell_volume();
        let vol = torus.sides.iter().product::<f64>();
        let spectral: f64 = data.iter().map(|v| (cell * v.norm()).powi(2)).sum::<f64>() / vol;
        assert!((spectral.sqrt() - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn norm_sandwich() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let q = Potential::gaussian_bump(&grid, [0.2, -0.1, 0.0], 0.35, 5.0).unwrap();
        let l2 = potential_l2(&grid, &q);
        let hm1 = hminus1_norm(&grid, &q);
        let vol = grid.domain_volume();
        assert!(hm1 <= l2 + 1e-12, "hminus1 {hm1} exceeds l2 {l2}");
        assert!(l2 <= vol.sqrt() * q.bound() + 1e-12);
    }

    #[test]
    fn direct_coefficient_matches_fft_bin() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let torus = TorusGrid::enclosing(&grid);
        let q = Potential::sine_product(&grid, [1, 1, 2], 3.0).unwrap();
        let mut data = torus.embed(&grid, q.values());
        let fft = Fft3::new(torus.dims);
        fft.forward(&mut data);
        let cell = grid.cell_volume();
        for probe in [[1usize, 2, 3], [0, 0, 1], [5, 0, 2]] {
            let xi = [
                torus.frequency(0, probe[0]),
                torus.frequency(1, probe[1]),
                torus.frequency(2, probe[2]),
            ];
            // The FFT phase is relative to the torus origin; re-anchor it.
            let bin = cell * data[torus.idx(probe)];
            let shift = torus.origin[0] * xi[0] + torus.origin[1] * xi[1] + torus.origin[2] * xi[2];
            let absolute = bin * Complex64::new((-shift).cos(), (-shift).sin());
            let direct = fourier_coefficient(&grid, &q, xi);
            assert!((absolute - direct).norm() < 1e-10 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn multi_index_count() {
        assert_eq!(multi_indices(4).len(), 35);
        assert_eq!(multi_indices(0).len(), 1);
    }

    #[test]
    fn semiclassical_norm_reduces_to_l2_at_order_zero() {
        let grid = cube_spec(1.0, 9).build().unwrap();
        let values: Vec<Complex64> =
            (0..grid.len()).map(|i| Complex64::new((i as f64 * 0.3).sin(), 0.0)).collect();
        let a = semiclassical_norm(&grid, &values, 0.1, 0);
        let b = l2_norm(&grid, &values);
        assert!((a - b).abs() < 1e-12);
    }
}
