//! Axis-aligned box domain, tensor grid, faces, and boundary partitions.
//!
//! The domain is a closed box `center ± half_widths` discretized by an odd
//! number of equispaced nodes per axis, so the center is itself a node and
//! one-sided boundary stencils always have room. The boundary consists of six
//! faces with constant outward normals; edge and corner nodes belong to every
//! face containing them and enter face-wise quadrature once per face with
//! that face's tensor trapezoid weight.
//!
//! For a unit direction `alpha` and threshold `eps >= 0`, the illuminated part
//! of the boundary is `{x : alpha . nu(x) > eps}` and the shadowed part is its
//! complement; on a box both are unions of whole faces, so the partition is
//! decided per face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::ContentHasher;

/// Low (`min` coordinate) or high (`max` coordinate) side of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Face at the minimum coordinate of its axis; outward normal `-e_axis`.
    Lo,
    /// Face at the maximum coordinate of its axis; outward normal `+e_axis`.
    Hi,
}

/// One of the six box faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    /// Axis the face is orthogonal to (0, 1, or 2).
    pub axis: usize,
    /// Which side of that axis.
    pub side: Side,
}

impl Face {
    /// All six faces in a fixed canonical order (axis-major, Lo before Hi).
    pub fn all() -> [Face; 6] {
        let mut faces = [Face { axis: 0, side: Side::Lo }; 6];
        let mut k = 0;
        for axis in 0..3 {
            for side in [Side::Lo, Side::Hi] {
                faces[k] = Face { axis, side };
                k += 1;
            }
        }
        faces
    }

    /// Canonical index of this face in [`Face::all`] order (0..6).
    pub fn index(&self) -> usize {
        2 * self.axis + match self.side {
            Side::Lo => 0,
            Side::Hi => 1,
        }
    }

    /// Outward unit normal.
    pub fn normal(&self) -> [f64; 3] {
        let mut nu = [0.0; 3];
        nu[self.axis] = match self.side {
            Side::Lo => -1.0,
            Side::Hi => 1.0,
        };
        nu
    }

    /// The two in-face axes in increasing order.
    pub fn tangent_axes(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }
}

/// Geometry and resolution of the computational box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Box center.
    pub center: [f64; 3],
    /// Half side lengths per axis (all positive).
    pub half_widths: [f64; 3],
    /// Node counts per axis (odd, at least 9).
    pub nodes_per_axis: [usize; 3],
    /// Radius of a ball about the origin containing the closed box.
    pub enclosing_radius: f64,
    /// Enlargement factor (at least 2) for the periodic enclosing box.
    pub torus_padding: f64,
}

impl DomainSpec {
    /// Distance from the origin to the farthest box corner.
    pub fn corner_distance(&self) -> f64 {
        let mut sum = 0.0;
        for a in 0..3 {
            let r = self.center[a].abs() + self.half_widths[a];
            sum += r * r;
        }
        sum.sqrt()
    }

    /// Grid step per axis: `2 * half_width / (nodes - 1)`.
    pub fn steps(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for a in 0..3 {
            s[a] = 2.0 * self.half_widths[a] / (self.nodes_per_axis[a] as f64 - 1.0);
        }
        s
    }

    /// Validate every constraint, returning all violations with key paths.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut v = Vec::new();
        for a in 0..3 {
            if !(self.half_widths[a] > 0.0) || !self.half_widths[a].is_finite() {
                v.push(format!("{prefix}.half_widths[{a}]: must be a positive finite number"));
            }
            if !self.center[a].is_finite() {
                v.push(format!("{prefix}.center[{a}]: must be finite"));
            }
            let n = self.nodes_per_axis[a];
            if n < 9 || n % 2 == 0 {
                v.push(format!(
                    "{prefix}.nodes_per_axis[{a}]: must be odd and at least 9, got {n}"
                ));
            }
        }
        if v.is_empty() {
            let need = self.corner_distance();
            if !(self.enclosing_radius >= need - 1e-12) || !self.enclosing_radius.is_finite() {
                v.push(format!(
                    "{prefix}.enclosing_radius: must cover the box (need >= {need:.12}, got {})",
                    self.enclosing_radius
                ));
            }
        }
        if !(self.torus_padding >= 2.0) || !self.torus_padding.is_finite() {
            v.push(format!(
                "{prefix}.torus_padding: must be at least 2, got {}",
                self.torus_padding
            ));
        }
        v
    }

    /// Validate and build the grid.
    pub fn build(&self) -> Result<Grid> {
        let violations = self.violations("domain");
        if !violations.is_empty() {
            return Err(Error::Config { violations });
        }
        Ok(Grid::new_unchecked(self.clone()))
    }
}

/// A boundary quadrature sample: one node seen from one face.
///
/// Edge and corner nodes yield one sample per face containing them; the face
/// trapezoid weights then add up so that face-wise surface integrals sum to
/// the integral over the whole boundary.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    /// Linear grid index of the node.
    pub node: usize,
    /// Face the sample lives on.
    pub face: Face,
    /// In-face node coordinates `(j1, j2)` along `face.tangent_axes()`.
    pub face_coords: [usize; 2],
    /// Tensor trapezoid weight of the sample within its face.
    pub weight: f64,
}

/// Split of the boundary faces by illumination for a direction and threshold.
#[derive(Debug, Clone)]
pub struct BoundaryPartition {
    /// Direction the partition is taken against (unit vector).
    pub alpha: [f64; 3],
    /// Threshold (`>= 0`).
    pub eps: f64,
    /// Faces with `alpha . nu > eps` (illuminated side).
    pub plus_faces: Vec<Face>,
    /// Complementary faces (`alpha . nu <= eps`).
    pub minus_faces: Vec<Face>,
}

impl BoundaryPartition {
    /// Whether a face belongs to the illuminated side.
    pub fn is_plus(&self, face: Face) -> bool {
        self.plus_faces.iter().any(|f| *f == face)
    }
}

/// Tensor-product grid over the box with boundary bookkeeping.
#[derive(Debug, Clone)]
pub struct Grid {
    /// Generating specification.
    pub spec: DomainSpec,
    /// Node counts per axis.
    pub dims: [usize; 3],
    /// Grid steps per axis.
    pub steps: [f64; 3],
    /// Linear indices of interior nodes, in linear-index order.
    pub interior_nodes: Vec<usize>,
    /// Full-grid -> interior compact index (None on the boundary).
    pub interior_index: Vec<Option<usize>>,
    /// Linear indices of boundary nodes, in linear-index order.
    pub boundary_nodes: Vec<usize>,
    /// Full-grid -> boundary compact index (None in the interior).
    pub boundary_index: Vec<Option<usize>>,
}

impl Grid {
    fn new_unchecked(spec: DomainSpec) -> Grid {
        let dims = spec.nodes_per_axis;
        let steps = spec.steps();
        let total = dims[0] * dims[1] * dims[2];
        let mut interior_nodes = Vec::new();
        let mut boundary_nodes = Vec::new();
        let mut interior_index = vec![None; total];
        let mut boundary_index = vec![None; total];
        for iz in 0..dims[2] {
            for iy in 0..dims[1] {
                for ix in 0..dims[0] {
                    let idx = ix + dims[0] * (iy + dims[1] * iz);
                    let on_boundary = ix == 0
                        || iy == 0
                        || iz == 0
                        || ix == dims[0] - 1
                        || iy == dims[1] - 1
                        || iz == dims[2] - 1;
                    if on_boundary {
                        boundary_index[idx] = Some(boundary_nodes.len());
                        boundary_nodes.push(idx);
                    } else {
                        interior_index[idx] = Some(interior_nodes.len());
                        interior_nodes.push(idx);
                    }
                }
            }
        }
        Grid { spec, dims, steps, interior_nodes, interior_index, boundary_nodes, boundary_index }
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Whether the grid is empty (never true for a valid spec).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index of the node with per-axis indices `i`.
    pub fn idx(&self, i: [usize; 3]) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }

    /// Per-axis indices of the node with linear index `idx`.
    pub fn coords_of(&self, idx: usize) -> [usize; 3] {
        let ix = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [ix, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Physical position of a node.
    pub fn position(&self, i: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = self.spec.center[a] - self.spec.half_widths[a] + self.steps[a] * i[a] as f64;
        }
        x
    }

    /// Physical position by linear index.
    pub fn position_of(&self, idx: usize) -> [f64; 3] {
        self.position(self.coords_of(idx))
    }

    /// Minimum number of grid layers between the node and the boundary
    /// (0 on the boundary, 1 one layer in, ...).
    pub fn depth(&self, i: [usize; 3]) -> usize {
        let mut d = usize::MAX;
        for a in 0..3 {
            d = d.min(i[a]).min(self.dims[a] - 1 - i[a]);
        }
        d
    }

    /// In-face node counts `(m1, m2)` along `face.tangent_axes()`.
    pub fn face_dims(&self, face: Face) -> [usize; 2] {
        let t = face.tangent_axes();
        [self.dims[t[0]], self.dims[t[1]]]
    }

    /// Grid node of an in-face coordinate pair.
    pub fn face_node(&self, face: Face, j: [usize; 2]) -> [usize; 3] {
        let t = face.tangent_axes();
        let mut i = [0usize; 3];
        i[face.axis] = match face.side {
            Side::Lo => 0,
            Side::Hi => self.dims[face.axis] - 1,
        };
        i[t[0]] = j[0];
        i[t[1]] = j[1];
        i
    }

    /// 1-D trapezoid weight along an axis (`s/2` at the ends, `s` inside).
    pub fn line_weight(&self, axis: usize, j: usize) -> f64 {
        let s = self.steps[axis];
        if j == 0 || j == self.dims[axis] - 1 {
            0.5 * s
        } else {
            s
        }
    }

    /// Tensor trapezoid weight of an in-face node.
    pub fn face_weight(&self, face: Face, j: [usize; 2]) -> f64 {
        let t = face.tangent_axes();
        self.line_weight(t[0], j[0]) * self.line_weight(t[1], j[1])
    }

    /// Boundary quadrature samples of one face, `j2`-major (`j1` fastest).
    pub fn face_samples(&self, face: Face) -> Vec<BoundarySample> {
        let [m1, m2] = self.face_dims(face);
        let mut out = Vec::with_capacity(m1 * m2);
        for j2 in 0..m2 {
            for j1 in 0..m1 {
                let i = self.face_node(face, [j1, j2]);
                out.push(BoundarySample {
                    node: self.idx(i),
                    face,
                    face_coords: [j1, j2],
                    weight: self.face_weight(face, [j1, j2]),
                });
            }
        }
        out
    }

    /// Boundary quadrature samples over the whole boundary (all six faces).
    pub fn boundary_samples(&self) -> Vec<BoundarySample> {
        let mut out = Vec::new();
        for face in Face::all() {
            out.extend(self.face_samples(face));
        }
        out
    }

    /// Partition the boundary faces by illumination against `alpha` at
    /// threshold `eps`. `alpha` must be a unit vector and `eps >= 0`.
    pub fn partition(&self, alpha: [f64; 3], eps: f64) -> Result<BoundaryPartition> {
        let norm = (alpha[0] * alpha[0] + alpha[1] * alpha[1] + alpha[2] * alpha[2]).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!(
                "partition direction must be a unit vector (|alpha| = {norm:.12})"
            )));
        }
        if !(eps >= 0.0) {
            return Err(Error::invalid(format!("partition threshold must be >= 0, got {eps}")));
        }
        let mut plus_faces = Vec::new();
        let mut minus_faces = Vec::new();
        for face in Face::all() {
            let nu = face.normal();
            let dot = alpha[0] * nu[0] + alpha[1] * nu[1] + alpha[2] * nu[2];
            if dot > eps {
                plus_faces.push(face);
            } else {
                minus_faces.push(face);
            }
        }
        Ok(BoundaryPartition { alpha, eps, plus_faces, minus_faces })
    }

    /// Volume trapezoid weight of a node (product of per-axis line weights).
    pub fn volume_weight(&self, i: [usize; 3]) -> f64 {
        self.line_weight(0, i[0]) * self.line_weight(1, i[1]) * self.line_weight(2, i[2])
    }

    /// Cell volume `s_x s_y s_z` (full-weight Riemann cell).
    pub fn cell_volume(&self) -> f64 {
        self.steps[0] * self.steps[1] * self.steps[2]
    }

    /// Box volume.
    pub fn domain_volume(&self) -> f64 {
        8.0 * self.spec.half_widths[0] * self.spec.half_widths[1] * self.spec.half_widths[2]
    }

    /// Content hash of the grid geometry (spec fields only; the rest is
    /// derived deterministically).
    pub fn content_hash(&self) -> u64 {
        let mut h = ContentHasher::new();
        h.update_str("grid");
        for a in 0..3 {
            h.update_f64(self.spec.center[a]);
            h.update_f64(self.spec.half_widths[a]);
            h.update_u64(self.spec.nodes_per_axis[a] as u64);
        }
        h.update_f64(self.spec.enclosing_radius);
        h.update_f64(self.spec.torus_padding);
        h.finish()
    }
}

/// Convenience constructor for a centered cube domain.
pub fn cube_spec(half_width: f64, nodes: usize) -> DomainSpec {
    DomainSpec {
        center: [0.0; 3],
        half_widths: [half_width; 3],
        nodes_per_axis: [nodes; 3],
        enclosing_radius: (3.0f64).sqrt() * half_width,
        torus_padding: 2.0,
    }
}
