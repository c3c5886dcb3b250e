//! Field containers: volume fields, boundary data, face-wise traces, and
//! bounded potentials.
//!
//! Potentials are real, carry an explicit sup-norm bound, and are stored with
//! zero values on boundary nodes (the discrete form of compact support in the
//! closed box: the zero extension to the enclosing torus is then exactly the
//! nodal field, and plain-cell Parseval identities hold without boundary
//! corrections). Family constructors clamp the boundary layer accordingly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Face, Grid};
use crate::hash::ContentHasher;

/// Whether a field is known to vanish on (a neighborhood of) the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Generic field with arbitrary boundary values.
    Full,
    /// Field vanishing on the boundary nodes.
    InteriorSupported,
}

/// Complex scalar field sampled on every grid node.
#[derive(Debug, Clone)]
pub struct GridField {
    /// Node values in linear-index order.
    pub values: Vec<Complex64>,
    /// Support classification.
    pub kind: FieldKind,
}

impl GridField {
    /// All-zero field.
    pub fn zeros(grid: &Grid) -> GridField {
        GridField { values: vec![Complex64::ZERO; grid.len()], kind: FieldKind::InteriorSupported }
    }

    /// Field from a closure of the physical position.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> Complex64) -> GridField {
        let values = (0..grid.len()).map(|i| f(grid.position_of(i))).collect();
        GridField { values, kind: FieldKind::Full }
    }

    /// Real-valued field from a closure of the physical position.
    pub fn from_real_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> f64) -> GridField {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Node count.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Whether the field has no nodes.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise sum with `other` scaled by `c`.
    pub fn axpy(&mut self, c: Complex64, other: &GridField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        if self.kind != other.kind {
            self.kind = FieldKind::Full;
        }
    }

    /// Largest absolute node value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Restrict to boundary node values.
    pub fn boundary_trace(&self, grid: &Grid) -> BoundaryField {
        BoundaryField {
            values: grid.boundary_nodes.iter().map(|&n| self.values[n]).collect(),
        }
    }
}

/// Complex data on the boundary nodes (continuous boundary functions such as
/// the Navier data slots).
#[derive(Debug, Clone)]
pub struct BoundaryField {
    /// Values in the grid's boundary-node order.
    pub values: Vec<Complex64>,
}

impl BoundaryField {
    /// All-zero boundary data.
    pub fn zeros(grid: &Grid) -> BoundaryField {
        BoundaryField { values: vec![Complex64::ZERO; grid.boundary_nodes.len()] }
    }

    /// Boundary data from a closure of the physical position.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> Complex64) -> BoundaryField {
        BoundaryField {
            values: grid.boundary_nodes.iter().map(|&n| f(grid.position_of(n))).collect(),
        }
    }

    /// Value at a grid node (must be a boundary node).
    pub fn at_node(&self, grid: &Grid, node: usize) -> Complex64 {
        let b = grid.boundary_index[node].expect("node is not on the boundary");
        self.values[b]
    }

    /// Largest absolute value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Pair of Navier data slots `(f, g) = (u, laplacian of u)` on the boundary.
#[derive(Debug, Clone)]
pub struct NavierData {
    /// Trace of the solution.
    pub f: BoundaryField,
    /// Trace of its Laplacian.
    pub g: BoundaryField,
}

impl NavierData {
    /// Zero Navier data.
    pub fn zeros(grid: &Grid) -> NavierData {
        NavierData { f: BoundaryField::zeros(grid), g: BoundaryField::zeros(grid) }
    }
}

/// One complex field per face, stored `j2`-major (`j1` fastest) along the
/// face's tangent axes. Face-wise storage keeps edge nodes distinct per face,
/// which is what one-sided normal derivatives require (an edge node has a
/// different normal derivative for each face containing it).
#[derive(Debug, Clone)]
pub struct FaceFieldSet {
    /// Values per face, indexed by `Face::index()`.
    pub faces: [Vec<Complex64>; 6],
}

impl FaceFieldSet {
    /// All-zero face data.
    pub fn zeros(grid: &Grid) -> FaceFieldSet {
        let faces = Face::all().map(|f| {
            let [m1, m2] = grid.face_dims(f);
            vec![Complex64::ZERO; m1 * m2]
        });
        FaceFieldSet { faces }
    }

    /// Value at in-face coordinates.
    pub fn at(&self, grid: &Grid, face: Face, j: [usize; 2]) -> Complex64 {
        let [m1, _] = grid.face_dims(face);
        self.faces[face.index()][j[1] * m1 + j[0]]
    }

    /// Mutable value at in-face coordinates.
    pub fn at_mut(&mut self, grid: &Grid, face: Face, j: [usize; 2]) -> &mut Complex64 {
        let [m1, _] = grid.face_dims(face);
        &mut self.faces[face.index()][j[1] * m1 + j[0]]
    }

    /// Largest absolute value across all faces.
    pub fn max_abs(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| f.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// Pair of outward normal derivatives `(du/dnu, d(lap u)/dnu)` on the
/// boundary, face by face.
#[derive(Debug, Clone)]
pub struct NeumannData {
    /// Normal derivative of the solution.
    pub dnu_u: FaceFieldSet,
    /// Normal derivative of its Laplacian.
    pub dnu_w: FaceFieldSet,
}

/// Real potential with an explicit sup-norm bound and zero boundary trace.
#[derive(Debug, Clone)]
pub struct Potential {
    values: Vec<f64>,
    bound: f64,
}

impl Potential {
    /// Wrap nodal values, checking length, boundary trace, and the bound.
    pub fn new(grid: &Grid, values: Vec<f64>, bound: f64) -> Result<Potential> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "potential has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::invalid(format!("potential bound must be positive, got {bound}")));
        }
        let mut sup = 0.0f64;
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("potential value at node {idx} is not finite")));
            }
            sup = sup.max(v.abs());
            if grid.boundary_index[idx].is_some() && v != 0.0 {
                return Err(Error::invalid(format!(
                    "potential must vanish on boundary nodes (node {idx} has value {v})"
                )));
            }
        }
        if sup > bound * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "potential sup-norm {sup} exceeds declared bound {bound}"
            )));
        }
        Ok(Potential { values, bound })
    }

    /// The zero potential with the given declared bound.
    pub fn zero(grid: &Grid, bound: f64) -> Potential {
        Potential { values: vec![0.0; grid.len()], bound }
    }

    /// Gaussian bump `amplitude * exp(-|x - center|^2 / (2 sigma^2))`,
    /// clamped to zero on the boundary layer.
    pub fn gaussian_bump(
        grid: &Grid,
        center: [f64; 3],
        sigma: f64,
        amplitude: f64,
    ) -> Result<Potential> {
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let mut values = vec![0.0; grid.len()];
        for (idx, v) in values.iter_mut().enumerate() {
            if grid.boundary_index[idx].is_some() {
                continue;
            }
            let x = grid.position_of(idx);
            let d2 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>();
            *v = amplitude * (-d2 / (2.0 * sigma * sigma)).exp();
        }
        Potential::new(grid, values, amplitude.abs().max(f64::MIN_POSITIVE))
    }

    /// Product of sines vanishing on the boundary:
    /// `amplitude * prod_a sin(k_a pi (x_a - lo_a) / (2 half_width_a))`.
    pub fn sine_product(grid: &Grid, k: [usize; 3], amplitude: f64) -> Result<Potential> {
        if k.iter().any(|&ka| ka == 0) {
            return Err(Error::invalid("sine_product wave numbers must be positive"));
        }
        let lo: Vec<f64> =
            (0..3).map(|a| grid.spec.center[a] - grid.spec.half_widths[a]).collect();
        let mut values = vec![0.0; grid.len()];
        for (idx, v) in values.iter_mut().enumerate() {
            if grid.boundary_index[idx].is_some() {
                continue;
            }
            let x = grid.position_of(idx);
            let mut p = amplitude;
            for a in 0..3 {
                let t = (x[a] - lo[a]) / (2.0 * grid.spec.half_widths[a]);
                p *= (k[a] as f64 * std::f64::consts::PI * t).sin();
            }
            *v = p;
        }
        Potential::new(grid, values, amplitude.abs().max(f64::MIN_POSITIVE))
    }

    /// Constant value on all interior nodes (zero boundary trace).
    pub fn constant(grid: &Grid, value: f64) -> Result<Potential> {
        let mut values = vec![0.0; grid.len()];
        for &n in &grid.interior_nodes {
            values[n] = value;
        }
        Potential::new(grid, values, value.abs().max(f64::MIN_POSITIVE))
    }

    /// Nodal values in linear-index order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a node.
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Declared sup-norm bound.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Actual sup-norm of the stored values.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise combination `self + c * other` under a declared bound.
    pub fn linear_combination(&self, grid: &Grid, c: f64, other: &Potential) -> Result<Potential> {
        let values: Vec<f64> =
            self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Potential::new(grid, values, sup.max(f64::MIN_POSITIVE))
    }

    /// Content hash of the nodal values and bound.
    pub fn content_hash(&self) -> u64 {
        let mut h = ContentHasher::new();
        h.update_str("potential");
        h.update_f64(self.bound);
        h.update_f64_slice(&self.values);
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::cube_spec;

    #[test]
    fn potential_rejects_boundary_support() {
        let g = cube_spec(1.0, 9).build().unwrap();
        let mut values = vec![0.0; g.len()];
        values[0] = 1.0; // corner node
        assert!(Potential::new(&g, values, 5.0).is_err());
    }

    #[test]
    fn potential_rejects_bound_violation() {
        let g = cube_spec(1.0, 9).build().unwrap();
        let mut values = vec![0.0; g.len()];
        values[g.interior_nodes[0]] = 7.0;
        assert!(Potential::new(&g, values, 5.0).is_err());
        assert!(Potential::new(&g, vec![0.0; g.len()], 5.0).is_ok());
    }

    #[test]
    fn families_respect_bound_and_trace() {
        let g = cube_spec(1.0, 9).build().unwrap();
        let q = Potential::gaussian_bump(&g, [0.1, 0.0, -0.2], 0.4, 5.0).unwrap();
        assert!(q.sup_norm() <= 5.0 + 1e-12);
        for &n in &g.boundary_nodes {
            assert_eq!(q.at(n), 0.0);
        }
        let q = Potential::sine_product(&g, [1, 2, 1], -3.0).unwrap();
        assert!(q.sup_norm() <= 3.0 + 1e-12);
        let q = Potential::constant(&g, 2.5).unwrap();
        assert_eq!(q.at(g.interior_nodes[17]), 2.5);
        assert_eq!(q.at(g.boundary_nodes[3]), 0.0);
    }

    #[test]
    fn hashes_distinguish_values() {
        let g = cube_spec(1.0, 9).build().unwrap();
        let a = Potential::constant(&g, 1.0).unwrap();
        let b = Potential::constant(&g, 1.0 + 1e-15).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), Potential::constant(&g, 1.0).unwrap().content_hash());
    }

    #[test]
    fn boundary_trace_reads_boundary_nodes() {
        let g = cube_spec(1.0, 9).build().unwrap();
        let field = GridField::from_fn(&g, |x| Complex64::new(x[0] + 2.0 * x[2], x[1]));
        let tr = field.boundary_trace(&g);
        for (b, &n) in g.boundary_nodes.iter().enumerate() {
            assert_eq!(tr.values[b], field.values[n]);
            assert_eq!(tr.at_node(&g, n), field.values[n]);
        }
    }
}
