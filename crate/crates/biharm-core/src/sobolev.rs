//! Fractional Sobolev norms of boundary data, face by face.
//!
//! Each face carries a complete orthogonal basis under its tensor trapezoid
//! inner product: per tangent axis the discrete sine modes `sin(k pi j/(m-1))`
//! for `k = 1..m-2` (zero at the endpoints) plus the two endpoint indicator
//! modes, tagged with the grid Nyquist frequency. A mode pair `(a, b)` carries
//! the symbol weight `(1 + kappa_a^2 + kappa_b^2)^s`, and the norm of order
//! `s` is the weighted coefficient sum. At `s = 0` this reproduces the
//! trapezoid L^2 norm of the face values exactly, because the basis is
//! complete and orthogonal.
//!
//! Norms of data pairs follow the sum convention: the graph norm of `(f, g)`
//! is `||f||_{7/2} + ||g||_{3/2}`, and of a Neumann pair
//! `||du||_{5/2} + ||dw||_{1/2}`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::field::{BoundaryField, FaceFieldSet, NavierData, NeumannData};
use crate::grid::{Face, Grid};

/// Sobolev order of the first Navier slot (the solution trace).
pub const ORDER_F: f64 = 3.5;
/// Sobolev order of the second Navier slot (the Laplacian trace).
pub const ORDER_G: f64 = 1.5;
/// Sobolev order of the normal derivative of the solution.
pub const ORDER_DNU: f64 = 2.5;
/// Sobolev order of the normal derivative of the Laplacian.
pub const ORDER_DNW: f64 = 0.5;

/// One 1-D boundary basis mode along a face axis.
#[derive(Debug, Clone)]
pub struct AxisMode {
    /// Nodal values (length = node count of the axis).
    pub values: Vec<f64>,
    /// Tagged frequency `kappa`.
    pub kappa: f64,
    /// Squared trapezoid norm of the mode.
    pub norm_sq: f64,
}

/// Complete orthogonal 1-D basis along one face axis.
#[derive(Debug, Clone)]
pub struct AxisBasis {
    /// Modes in order: sines `k = 1..m-2`, then the two endpoint indicators.
    pub modes: Vec<AxisMode>,
    /// Number of interior sine modes (`m - 2`).
    pub sine_count: usize,
}

impl AxisBasis {
    /// Build the basis for an axis with `m` nodes, physical length `len`,
    /// and step `step`.
    pub fn new(m: usize, len: f64, step: f64) -> AxisBasis {
        let mut modes = Vec::with_capacity(m);
        let denom = (m - 1) as f64;
        for k in 1..=(m - 2) {
            let values: Vec<f64> =
                (0..m).map(|j| (k as f64 * PI * j as f64 / denom).sin()).collect();
            modes.push(AxisMode {
                values,
                kappa: k as f64 * PI / len,
                norm_sq: step * denom / 2.0,
            });
        }
        for end in [0usize, m - 1] {
            let mut values = vec![0.0; m];
            values[end] = 1.0;
            modes.push(AxisMode { values, kappa: PI * denom / len, norm_sq: step / 2.0 });
        }
        AxisBasis { modes, sine_count: m - 2 }
    }
}

/// Face transform context: the two axis bases and trapezoid line weights.
#[derive(Debug, Clone)]
pub struct FaceBasis {
    /// Face this basis belongs to.
    pub face: Face,
    /// Basis along the first tangent axis.
    pub b1: AxisBasis,
    /// Basis along the second tangent axis.
    pub b2: AxisBasis,
    /// Trapezoid line weights along the first tangent axis.
    pub w1: Vec<f64>,
    /// Trapezoid line weights along the second tangent axis.
    pub w2: Vec<f64>,
}

impl FaceBasis {
    /// Build the transform context of a face.
    pub fn new(grid: &Grid, face: Face) -> FaceBasis {
        let t = face.tangent_axes();
        let [m1, m2] = grid.face_dims(face);
        let b1 = AxisBasis::new(m1, 2.0 * grid.spec.half_widths[t[0]], grid.steps[t[0]]);
        let b2 = AxisBasis::new(m2, 2.0 * grid.spec.half_widths[t[1]], grid.steps[t[1]]);
        let w1 = (0..m1).map(|j| grid.line_weight(t[0], j)).collect();
        let w2 = (0..m2).map(|j| grid.line_weight(t[1], j)).collect();
        FaceBasis { face, b1, b2, w1, w2 }
    }

    /// Number of modes (`m1 * m2`, a complete basis).
    pub fn mode_count(&self) -> usize {
        self.b1.modes.len() * self.b2.modes.len()
    }

    /// Squared frequency of mode pair `(a, b)`.
    pub fn kappa_sq(&self, a: usize, b: usize) -> f64 {
        let ka = self.b1.modes[a].kappa;
        let kb = self.b2.modes[b].kappa;
        ka * ka + kb * kb
    }

    /// Squared trapezoid norm of the tensor atom `(a, b)`.
    pub fn atom_norm_sq(&self, a: usize, b: usize) -> f64 {
        self.b1.modes[a].norm_sq * self.b2.modes[b].norm_sq
    }

    /// Expansion coefficients of face values (stored `j1`-fastest):
    /// `c[a + n1 * b] = <F, v_a x v_b>_trap / (|v_a|^2 |v_b|^2)`.
    pub fn coefficients(&self, values: &[Complex64]) -> Vec<Complex64> {
        let m1 = self.w1.len();
        let m2 = self.w2.len();
        assert_eq!(values.len(), m1 * m2);
        let n1 = self.b1.modes.len();
        let n2 = self.b2.modes.len();
        // Contract along axis 1 first: g[a][j2] = sum_j1 w1 v_a F.
        let mut g = vec![Complex64::ZERO; n1 * m2];
        for (a, mode) in self.b1.modes.iter().enumerate() {
            for j2 in 0..m2 {
                let mut acc = Complex64::ZERO;
                for j1 in 0..m1 {
                    acc += self.w1[j1] * mode.values[j1] * values[j2 * m1 + j1];
                }
                g[a * m2 + j2] = acc;
            }
        }
        let mut coeffs = vec![Complex64::ZERO; n1 * n2];
        for (b, mode) in self.b2.modes.iter().enumerate() {
            for a in 0..n1 {
                let mut acc = Complex64::ZERO;
                for j2 in 0..m2 {
                    acc += self.w2[j2] * mode.values[j2] * g[a * m2 + j2];
                }
                let scale = self.b1.modes[a].norm_sq * self.b2.modes[b].norm_sq;
                coeffs[b * n1 + a] = acc / scale;
            }
        }
        coeffs
    }

    /// Synthesize face values from expansion coefficients.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let m1 = self.w1.len();
        let m2 = self.w2.len();
        let n1 = self.b1.modes.len();
        let n2 = self.b2.modes.len();
        assert_eq!(coeffs.len(), n1 * n2);
        let mut out = vec![Complex64::ZERO; m1 * m2];
        for b in 0..n2 {
            for a in 0..n1 {
                let c = coeffs[b * n1 + a];
                if c == Complex64::ZERO {
                    continue;
                }
                for j2 in 0..m2 {
                    let vb = self.b2.modes[b].values[j2];
                    if vb == 0.0 {
                        continue;
                    }
                    for j1 in 0..m1 {
                        out[j2 * m1 + j1] += c * vb * self.b1.modes[a].values[j1];
                    }
                }
            }
        }
        out
    }

    /// Squared Sobolev norm of order `s` of face values.
    pub fn norm_sq(&self, values: &[Complex64], s: f64) -> f64 {
        let coeffs = self.coefficients(values);
        let n1 = self.b1.modes.len();
        let mut total = 0.0;
        for b in 0..self.b2.modes.len() {
            for a in 0..n1 {
                let weight = (1.0 + self.kappa_sq(a, b)).powf(s);
                total += weight * coeffs[b * n1 + a].norm_sqr() * self.atom_norm_sq(a, b);
            }
        }
        total
    }

    /// Weighted coordinates of order `s`: entries whose plain Euclidean norm
    /// equals the Sobolev norm of the face values.
    pub fn weighted_coords(&self, values: &[Complex64], s: f64) -> Vec<Complex64> {
        let coeffs = self.coefficients(values);
        let n1 = self.b1.modes.len();
        let mut out = vec![Complex64::ZERO; coeffs.len()];
        for b in 0..self.b2.modes.len() {
            for a in 0..n1 {
                let scale =
                    (1.0 + self.kappa_sq(a, b)).powf(0.5 * s) * self.atom_norm_sq(a, b).sqrt();
                out[b * n1 + a] = coeffs[b * n1 + a] * scale;
            }
        }
        out
    }
}

/// All six face bases of a grid.
#[derive(Debug, Clone)]
pub struct BoundaryBases {
    /// Per-face transform contexts, indexed by `Face::index()`.
    pub faces: Vec<FaceBasis>,
}

impl BoundaryBases {
    /// Build all six face bases.
    pub fn new(grid: &Grid) -> BoundaryBases {
        BoundaryBases { faces: Face::all().iter().map(|&f| FaceBasis::new(grid, f)).collect() }
    }

    /// Face basis by face.
    pub fn of(&self, face: Face) -> &FaceBasis {
        &self.faces[face.index()]
    }
}

/// Extract the values of a per-node boundary field on one face,
/// `j1`-fastest.
pub fn face_values(grid: &Grid, face: Face, field: &BoundaryField) -> Vec<Complex64> {
    let [m1, m2] = grid.face_dims(face);
    let mut out = Vec::with_capacity(m1 * m2);
    for j2 in 0..m2 {
        for j1 in 0..m1 {
            let node = grid.idx(grid.face_node(face, [j1, j2]));
            out.push(field.at_node(grid, node));
        }
    }
    out
}

/// Sobolev norm of order `s` of a per-node boundary field (sum over faces).
pub fn boundary_norm(grid: &Grid, bases: &BoundaryBases, field: &BoundaryField, s: f64) -> f64 {
    let mut total = 0.0;
    for face in Face::all() {
        let vals = face_values(grid, face, field);
        total += bases.of(face).norm_sq(&vals, s);
    }
    total.sqrt()
}

/// Sobolev norm of order `s` of a face-wise field set.
pub fn face_set_norm(grid: &Grid, bases: &BoundaryBases, set: &FaceFieldSet, s: f64) -> f64 {
    let _ = grid;
    let mut total = 0.0;
    for face in Face::all() {
        total += bases.of(face).norm_sq(&set.faces[face.index()], s);
    }
    total.sqrt()
}

/// Graph norm of a Navier data pair: `||f||_{7/2} + ||g||_{3/2}`.
pub fn navier_norm(grid: &Grid, bases: &BoundaryBases, data: &NavierData) -> f64 {
    boundary_norm(grid, bases, &data.f, ORDER_F) + boundary_norm(grid, bases, &data.g, ORDER_G)
}

/// Graph norm of a Neumann pair: `||du/dnu||_{5/2} + ||d(lap u)/dnu||_{1/2}`.
pub fn neumann_norm(grid: &Grid, bases: &BoundaryBases, data: &NeumannData) -> f64 {
    face_set_norm(grid, bases, &data.dnu_u, ORDER_DNU)
        + face_set_norm(grid, bases, &data.dnu_w, ORDER_DNW)
}
