//! Complex-geometric-optics probing solutions.
//!
//! A probing solution has the form `u = e^{i x . zeta / h} (1 + w)` with a
//! complex wavevector `zeta` satisfying `zeta . zeta = 0` (bilinear dot) and
//! `|Re zeta| = |Im zeta| = 1`. Conjugating the operator by the exponential
//! turns the equation into `P_h w = -q (1 + w)` with
//! `P_h = (Delta + (2i/h) zeta . grad)^2`, solved spectrally on an enclosing
//! torus: the dual lattice is shifted along the direction of `Im zeta` so the
//! conjugated symbol never vanishes, making the fixed-point map
//! `w <- -P_h^{-1} [q (1 + w)]` a contraction for small `h`. The correction
//! `w` decays as `O(h^2)` in `L^2`, which the diagnostics verify rather than
//! assume.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{BoundaryField, GridField, NavierData, Potential};
use crate::fourier::{l2_norm, semiclassical_norm, Fft3, TorusGrid};
use crate::grid::Grid;

/// Fixed-point update tolerance (absolute, `L^2` over the torus).
pub const FIXED_POINT_TOL: f64 = 1e-10;

/// Iteration budget of the fixed-point loop.
pub const MAX_SWEEPS: usize = 500;

/// Orthonormal probing frame: unit `alpha`, `beta` and a frequency `xi`
/// orthogonal to both, together with the scale parameter `h`.
#[derive(Debug, Clone, Copy)]
pub struct CgoDirections {
    /// Unit vector along `Im zeta_1` (the exponential-weight direction).
    pub alpha: [f64; 3],
    /// Unit vector carrying the leading real part of the wavevectors.
    pub beta: [f64; 3],
    /// Probed frequency, orthogonal to `alpha` and `beta`.
    pub xi: [f64; 3],
    /// Scale parameter in `(0, 2/|xi|)`.
    pub h: f64,
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

impl CgoDirections {
    /// Validated constructor: `alpha`, `beta` orthonormal, `xi` orthogonal to
    /// both (all to 1e-12), and `h |xi| < 2`.
    pub fn new(alpha: [f64; 3], beta: [f64; 3], xi: [f64; 3], h: f64) -> Result<CgoDirections> {
        let tol = 1e-12;
        let scale = norm3(xi).max(1.0);
        if (norm3(alpha) - 1.0).abs() > tol {
            return Err(Error::invalid("alpha must be a unit vector"));
        }
        if (norm3(beta) - 1.0).abs() > tol {
            return Err(Error::invalid("beta must be a unit vector"));
        }
        if dot3(alpha, beta).abs() > tol {
            return Err(Error::invalid("alpha and beta must be orthogonal"));
        }
        if dot3(alpha, xi).abs() > tol * scale || dot3(beta, xi).abs() > tol * scale {
            return Err(Error::invalid("xi must be orthogonal to alpha and beta"));
        }
        if !(h > 0.0) {
            return Err(Error::invalid(format!("scale parameter must be positive, got {h}")));
        }
        if h * norm3(xi) >= 2.0 {
            return Err(Error::invalid(format!(
                "scale times frequency magnitude must be below 2, got {}",
                h * norm3(xi)
            )));
        }
        Ok(CgoDirections { alpha, beta, xi, h })
    }

    /// Deterministic frame for a frequency: `alpha` is built from the
    /// coordinate axis least aligned with `xi` (axis-aligned exactly whenever
    /// `xi` has a zero component), `beta` completes the frame.
    pub fn auto_frame(xi: [f64; 3], h: f64) -> Result<CgoDirections> {
        let n = norm3(xi);
        if n == 0.0 {
            return CgoDirections::new([0.0, 0.0, 1.0], [0.0, 1.0, 0.0], xi, h);
        }
        // Axis with the smallest |xi| component; ties resolve to the lower
        // index so the frame is reproducible.
        let mut axis = 0;
        for a in 1..3 {
            if xi[a].abs() < xi[axis].abs() {
                axis = a;
            }
        }
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        // Remove the xi component, making alpha exactly orthogonal to xi.
        let proj = dot3(e, xi) / (n * n);
        let alpha = normalize3([e[0] - proj * xi[0], e[1] - proj * xi[1], e[2] - proj * xi[2]]);
        let beta = normalize3(cross3(xi, alpha));
        CgoDirections::new(alpha, beta, xi, h)
    }

    /// Frame with a prescribed weight direction; requires `alpha` unit and
    /// orthogonal to `xi`.
    pub fn for_alpha(alpha: [f64; 3], xi: [f64; 3], h: f64) -> Result<CgoDirections> {
        let n = norm3(xi);
        if n == 0.0 {
            // Any unit vector orthogonal to alpha completes the frame.
            let e = if alpha[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let beta = normalize3(cross3(alpha, e));
            return CgoDirections::new(alpha, beta, xi, h);
        }
        let beta = normalize3(cross3(xi, alpha));
        CgoDirections::new(alpha, beta, xi, h)
    }
}

/// The paired complex wavevectors of a probing family.
#[derive(Debug, Clone, Copy)]
pub struct WaveVectors {
    /// Wavevector of the adjoint-side solution (`Im zeta_1 = +alpha`).
    pub zeta1: [Complex64; 3],
    /// Wavevector of the probing solution (`Im zeta_2 = -alpha`).
    pub zeta2: [Complex64; 3],
}

/// Bilinear (unconjugated) dot product of complex 3-vectors.
pub fn bilinear_dot(a: [Complex64; 3], b: [Complex64; 3]) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Real and imaginary parts of a complex 3-vector.
pub fn split_vector(z: [Complex64; 3]) -> ([f64; 3], [f64; 3]) {
    ([z[0].re, z[1].re, z[2].re], [z[0].im, z[1].im, z[2].im])
}

/// Construct the wavevector pair
/// `zeta_1 = h xi / 2 + sqrt(1 - h^2 |xi|^2 / 4) beta + i alpha`,
/// `zeta_2 = -h xi / 2 + sqrt(1 - h^2 |xi|^2 / 4) beta - i alpha`,
/// so that `zeta_2 - conj(zeta_1) = -h xi`.
pub fn make_wavevectors(dirs: &CgoDirections) -> WaveVectors {
    let h = dirs.h;
    let xi = dirs.xi;
    let c = (1.0 - h * h * dot3(xi, xi) / 4.0).sqrt();
    let mut zeta1 = [Complex64::ZERO; 3];
    let mut zeta2 = [Complex64::ZERO; 3];
    for a in 0..3 {
        zeta1[a] = Complex64::new(h * xi[a] / 2.0 + c * dirs.beta[a], dirs.alpha[a]);
        zeta2[a] = Complex64::new(-h * xi[a] / 2.0 + c * dirs.beta[a], -dirs.alpha[a]);
    }
    WaveVectors { zeta1, zeta2 }
}

/// Dual-lattice shift along the weight direction, making the conjugated
/// symbol nonvanishing.
#[derive(Debug, Clone, Copy)]
pub struct TorusShift {
    /// Modulation frequency: solved spectra live on `lattice + c * alpha`.
    pub c: f64,
    /// Guaranteed lower bound for `|alpha . kappa|` over the checked ball of
    /// shifted lattice points.
    pub gap: f64,
    /// Whether the half-integer shift is exact (axis-aligned `alpha`).
    pub exact: bool,
}

fn axis_of(alpha: [f64; 3]) -> Option<usize> {
    for a in 0..3 {
        if (alpha[a].abs() - 1.0).abs() < 1e-12
            && alpha[(a + 1) % 3].abs() < 1e-12
            && alpha[(a + 2) % 3].abs() < 1e-12
        {
            return Some(a);
        }
    }
    None
}

/// Choose the shift for a weight direction. Axis-aligned directions get the
/// exact half-integer shift `pi / side`; tilted directions scan the
/// modulation frequency to maximize the smallest `|alpha . kappa|` over the
/// lattice ball `|kappa| <= 2.5 / h` (outside that ball the symbol's real
/// part dominates, so only the ball constrains invertibility).
pub fn select_shift(torus: &TorusGrid, alpha: [f64; 3], h: f64) -> TorusShift {
    if let Some(axis) = axis_of(alpha) {
        let c = std::f64::consts::PI / torus.sides[axis];
        return TorusShift { c, gap: c, exact: true };
    }
    let radius = 2.5 / h;
    // Collect the alpha-projections of lattice points in the ball.
    let base = 2.0 * std::f64::consts::PI;
    let mut projections = Vec::new();
    let nmax: Vec<i64> = (0..3)
        .map(|a| (radius * torus.sides[a] / base).ceil() as i64)
        .collect();
    for k0 in -nmax[0]..=nmax[0] {
        let f0 = base * k0 as f64 / torus.sides[0];
        for k1 in -nmax[1]..=nmax[1] {
            let f1 = base * k1 as f64 / torus.sides[1];
            let partial = f0 * f0 + f1 * f1;
            if partial > radius * radius {
                continue;
            }
            for k2 in -nmax[2]..=nmax[2] {
                let f2 = base * k2 as f64 / torus.sides[2];
                if partial + f2 * f2 <= radius * radius {
                    projections.push(alpha[0] * f0 + alpha[1] * f1 + alpha[2] * f2);
                }
            }
        }
    }
    // Scan c in (0, 2 pi / max side) for the widest margin; the projection
    // set is symmetric, so the sign of c does not matter.
    let tmax = base / torus.sides.iter().cloned().fold(f64::MAX, f64::min).max(1e-300);
    let span = base / torus.sides.iter().cloned().fold(0.0f64, f64::max);
    let _ = tmax;
    let steps = 4096;
    let mut best = (0.0, -1.0);
    for i in 1..steps {
        let c = span * i as f64 / steps as f64;
        let mut gap = f64::MAX;
        for &p in &projections {
            // The shifted projection is p + c |alpha|^2 = p + c.
            gap = gap.min((p + c).abs());
            if gap <= best.1 {
                break;
            }
        }
        if gap > best.1 {
            best = (c, gap);
        }
    }
    TorusShift { c: best.0, gap: best.1, exact: false }
}

/// Converged probing correction and its diagnostics.
#[derive(Debug, Clone)]
pub struct CgoSolution {
    /// Wavevector the solution was built for.
    pub zeta: [Complex64; 3],
    /// Scale parameter.
    pub h: f64,
    /// Lattice shift used by the spectral inverse.
    pub shift: TorusShift,
    /// Correction values on the torus (the solution is
    /// `phase * (1 + correction)`).
    pub torus_values: Vec<Complex64>,
    /// Fixed-point sweeps performed.
    pub iterations: usize,
    /// Exact sup of the inverse-symbol magnitude times the potential bound
    /// (the verified contraction factor).
    pub contraction: f64,
    /// Final fixed-point update norm.
    pub last_update: f64,
    /// `L^2` norm over the domain of the conjugated defect
    /// `P_h w + q (1 + w)` including the exponential envelope.
    pub residual_l2: f64,
    /// Envelope-weighted operator residual over the torus,
    /// `||B_q u|| / ||u||`, computed with overflow-safe shifted weights.
    pub residual_ratio: f64,
}

/// Spectral solver for probing corrections over a fixed grid/potential pair.
pub struct CgoSolver {
    grid: Grid,
    torus: TorusGrid,
    fft: Fft3,
    q_torus: Vec<Complex64>,
    q_bound: f64,
}

impl CgoSolver {
    /// Build the solver: embeds the potential into the enclosing torus.
    pub fn new(grid: &Grid, q: &Potential) -> CgoSolver {
        let torus = TorusGrid::enclosing(grid);
        let fft = Fft3::new(torus.dims);
        let q_torus = torus.embed(grid, q.values());
        CgoSolver {
            grid: grid.clone(),
            torus,
            fft,
            q_torus,
            q_bound: q.bound(),
        }
    }

    /// The torus the corrections live on.
    pub fn torus(&self) -> &TorusGrid {
        &self.torus
    }

    /// The domain grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Shifted frequency of lattice node `k`.
    fn shifted_frequency(&self, k: [usize; 3], shift: &TorusShift, alpha: [f64; 3]) -> [f64; 3] {
        [
            self.torus.frequency(0, k[0]) + shift.c * alpha[0],
            self.torus.frequency(1, k[1]) + shift.c * alpha[1],
            self.torus.frequency(2, k[2]) + shift.c * alpha[2],
        ]
    }

    /// Conjugated symbol `m(kappa) = -(|kappa|^2 + (2/h) Re(zeta) . kappa)
    /// - (2i/h) Im(zeta) . kappa`; the full operator symbol is `m^2`.
    fn symbol(zeta: [Complex64; 3], h: f64, kappa: [f64; 3]) -> Complex64 {
        let (zr, zi) = split_vector(zeta);
        let k2 = dot3(kappa, kappa);
        Complex64::new(-(k2 + 2.0 / h * dot3(zr, kappa)), -2.0 / h * dot3(zi, kappa))
    }

    /// Torus `L^2` norm (Riemann cells).
    fn torus_l2(&self, values: &[Complex64]) -> f64 {
        let cell = self.torus.steps[0] * self.torus.steps[1] * self.torus.steps[2];
        (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
    }

    /// Solve the conjugated fixed point for a wavevector.
    pub fn solve(&self, zeta: [Complex64; 3], h: f64) -> Result<CgoSolution> {
        let (_, zi) = split_vector(zeta);
        let zi_norm = norm3(zi);
        if (zi_norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "imaginary part of the wavevector must be unit, got |Im zeta| = {zi_norm}"
            )));
        }
        let alpha = normalize3(zi);
        let shift = select_shift(&self.torus, alpha, h);
        let n = self.torus.len();

        // Precompute the inverse full symbol and its sup to certify the
        // contraction before iterating.
        let mut inv_symbol = vec![Complex64::ZERO; n];
        let mut sup_inv = 0.0f64;
        for idx in 0..n {
            let k = self.torus.coords_of(idx);
            let kappa = self.shifted_frequency(k, &shift, alpha);
            let m = Self::symbol(zeta, h, kappa);
            let m2 = m * m;
            let mag = m2.norm();
            if mag == 0.0 {
                return Err(Error::Factorization(format!(
                    "conjugated symbol vanished at shifted frequency {kappa:?}"
                )));
            }
            sup_inv = sup_inv.max(1.0 / mag);
            inv_symbol[idx] = -Complex64::new(1.0, 0.0) / m2;
        }
        let contraction = self.q_bound * sup_inv;
        if contraction >= 1.0 {
            let t = self.torus.sides.iter().cloned().fold(0.0f64, f64::max);
            let h_max = 2.0 * std::f64::consts::PI / (t * self.q_bound.sqrt());
            return Err(Error::NonContraction { h, bound: contraction, h_max });
        }

        // Modulation phases tying the shifted spectrum to plain transforms.
        let modulate: Vec<Complex64> = (0..n)
            .map(|idx| {
                let x = self.torus.position(self.torus.coords_of(idx));
                Complex64::from_polar(1.0, -shift.c * dot3(alpha, x))
            })
            .collect();

        let mut w = vec![Complex64::ZERO; n];
        let mut scratch = vec![Complex64::ZERO; n];
        let mut iterations = 0;
        let mut last_update = f64::INFINITY;
        for sweep in 1..=MAX_SWEEPS {
            iterations = sweep;
            // scratch = modulated q (1 + w)
            for i in 0..n {
                scratch[i] = modulate[i] * self.q_torus[i] * (Complex64::ONE + w[i]);
            }
            self.fft.forward(&mut scratch);
            for i in 0..n {
                scratch[i] *= inv_symbol[i];
            }
            self.fft.inverse(&mut scratch);
            // scratch now holds the modulated update; demodulate in place and
            // measure the step.
            let mut diff_sq = 0.0;
            for i in 0..n {
                let next = scratch[i] * modulate[i].conj();
                diff_sq += (next - w[i]).norm_sqr();
                scratch[i] = next;
            }
            std::mem::swap(&mut w, &mut scratch);
            let cell = self.torus.steps[0] * self.torus.steps[1] * self.torus.steps[2];
            last_update = (diff_sq * cell).sqrt();
            if last_update < FIXED_POINT_TOL {
                break;
            }
        }
        if last_update >= FIXED_POINT_TOL {
            return Err(Error::NoConvergence {
                tol: FIXED_POINT_TOL,
                max_iter: MAX_SWEEPS,
                last_update,
            });
        }

        // Independent residual: apply the conjugated operator spectrally to
        // the converged correction and add the potential term.
        let mut applied: Vec<Complex64> = (0..n).map(|i| modulate[i] * w[i]).collect();
        self.fft.forward(&mut applied);
        for idx in 0..n {
            let k = self.torus.coords_of(idx);
            let kappa = self.shifted_frequency(k, &shift, alpha);
            let m = Self::symbol(zeta, h, kappa);
            applied[idx] *= m * m;
        }
        self.fft.inverse(&mut applied);
        let defect: Vec<Complex64> = (0..n)
            .map(|i| applied[i] * modulate[i].conj() + self.q_torus[i] * (Complex64::ONE + w[i]))
            .collect();

        // Envelope weights e^{-x . Im zeta / h}, shifted by the maximum
        // exponent so the ratio is overflow-safe.
        let mut tmax = f64::NEG_INFINITY;
        let exps: Vec<f64> = (0..n)
            .map(|idx| {
                let x = self.torus.position(self.torus.coords_of(idx));
                let t = -dot3(x, zi) / h;
                tmax = tmax.max(t);
                t
            })
            .collect();
        let mut num_sq = 0.0;
        let mut den_sq = 0.0;
        for i in 0..n {
            let env = (exps[i] - tmax).exp();
            num_sq += (env * env) * defect[i].norm_sqr();
            den_sq += (env * env) * (Complex64::ONE + w[i]).norm_sqr();
        }
        let residual_ratio = (num_sq / den_sq).sqrt();

        // Domain residual with the true envelope magnitude.
        let defect_domain = self.torus.restrict(&self.grid, &defect);
        let weighted: Vec<Complex64> = (0..self.grid.len())
            .map(|idx| {
                let x = self.grid.position_of(idx);
                defect_domain[idx] * (-dot3(x, zi) / h).exp()
            })
            .collect();
        let residual_l2 = l2_norm(&self.grid, &weighted);

        Ok(CgoSolution {
            zeta,
            h,
            shift,
            torus_values: w,
            iterations,
            contraction,
            last_update,
            residual_l2,
            residual_ratio,
        })
    }

    /// Correction restricted to the domain grid.
    pub fn remainder_on_domain(&self, sol: &CgoSolution) -> GridField {
        GridField {
            values: self.torus.restrict(&self.grid, &sol.torus_values),
            kind: crate::field::FieldKind::Full,
        }
    }

    /// Spectral evaluation of `Delta w + (2i/h) zeta . grad w` on the torus
    /// (the Laplacian of the solution is `phase` times this plus nothing:
    /// the pure phase is annihilated by `zeta . zeta = 0`).
    pub fn laplacian_factor(&self, sol: &CgoSolution) -> Vec<Complex64> {
        let (_, zi) = split_vector(sol.zeta);
        let alpha = normalize3(zi);
        let n = self.torus.len();
        let modulate: Vec<Complex64> = (0..n)
            .map(|idx| {
                let x = self.torus.position(self.torus.coords_of(idx));
                Complex64::from_polar(1.0, -sol.shift.c * dot3(alpha, x))
            })
            .collect();
        let mut hat: Vec<Complex64> =
            (0..n).map(|i| modulate[i] * sol.torus_values[i]).collect();
        self.fft.forward(&mut hat);
        for idx in 0..n {
            let k = self.torus.coords_of(idx);
            let kappa = self.shifted_frequency(k, &sol.shift, alpha);
            let k2 = dot3(kappa, kappa);
            // i kappa . zeta factor of the directional derivative.
            let zdotk = sol.zeta[0] * kappa[0] + sol.zeta[1] * kappa[1] + sol.zeta[2] * kappa[2];
            let factor = Complex64::new(-k2, 0.0)
                + Complex64::new(0.0, 2.0 / sol.h) * Complex64::new(0.0, 1.0) * zdotk;
            hat[idx] *= factor;
        }
        self.fft.inverse(&mut hat);
        for i in 0..n {
            hat[i] *= modulate[i].conj();
        }
        hat
    }

    /// Full solution values on the domain grid, including the phase.
    pub fn field_on_domain(&self, sol: &CgoSolution) -> GridField {
        let w = self.torus.restrict(&self.grid, &sol.torus_values);
        let values = (0..self.grid.len())
            .map(|idx| {
                let x = self.grid.position_of(idx);
                phase_at(x, sol.zeta, sol.h) * (Complex64::ONE + w[idx])
            })
            .collect();
        GridField { values, kind: crate::field::FieldKind::Full }
    }

    /// Boundary data of the solution: `f = u`, `g = Delta u` on the boundary
    /// nodes, with the Laplacian taken spectrally.
    pub fn boundary_data(&self, sol: &CgoSolution) -> NavierData {
        let lap = self.laplacian_factor(sol);
        let lap_domain = self.torus.restrict(&self.grid, &lap);
        let w_domain = self.torus.restrict(&self.grid, &sol.torus_values);
        let mut f = BoundaryField::zeros(&self.grid);
        let mut g = BoundaryField::zeros(&self.grid);
        for (node, slot) in self.grid.boundary_index.iter().enumerate() {
            if let Some(b) = slot {
                let x = self.grid.position_of(node);
                let phase = phase_at(x, sol.zeta, sol.h);
                f.values[*b] = phase * (Complex64::ONE + w_domain[node]);
                g.values[*b] = phase * lap_domain[node];
            }
        }
        NavierData { f, g }
    }
}

/// `e^{i x . zeta / h}` at a point.
pub fn phase_at(x: [f64; 3], zeta: [Complex64; 3], h: f64) -> Complex64 {
    let (zr, zi) = split_vector(zeta);
    let re = dot3(x, zr) / h;
    let decay = -dot3(x, zi) / h;
    Complex64::from_polar(decay.exp(), re)
}

/// Boundary data of the phase alone (`w = 0`): `f = e^{i x . zeta / h}` and
/// `g = 0` exactly, since `zeta . zeta = 0` annihilates the pure phase.
pub fn free_boundary_data(grid: &Grid, zeta: [Complex64; 3], h: f64) -> NavierData {
    let mut f = BoundaryField::zeros(grid);
    let g = BoundaryField::zeros(grid);
    for (node, slot) in grid.boundary_index.iter().enumerate() {
        if let Some(b) = slot {
            f.values[*b] = phase_at(grid.position_of(node), zeta, h);
        }
    }
    NavierData { f, g }
}

/// Diagnostic norms of a probing solution over the domain: plain Sobolev
/// norms of the solution, its Laplacian, and the Laplacian's first-order
/// energy, plus implied constants in two normalizations.
#[derive(Debug, Clone)]
pub struct FieldNormReport {
    /// Scale parameter.
    pub h: f64,
    /// `||Delta u||_{H^1}` over the domain.
    pub lap_h1: f64,
    /// `||Delta u||_{H^2}` over the domain.
    pub lap_h2: f64,
    /// `||u||_{H^4}` over the domain.
    pub u_h4: f64,
    /// Largest exponential-envelope magnitude over the domain.
    pub envelope_max: f64,
    /// Implied constants `norm * h^p * e^{-2R/h}` for p = 1, 1, 4.
    pub radius_constants: [f64; 3],
    /// Implied constants `norm * h^p / envelope_max` (growth measured
    /// against the attained envelope rather than the enclosing radius).
    pub envelope_constants: [f64; 3],
}

/// Measure the diagnostic norms of a solution.
pub fn field_norms(solver: &CgoSolver, sol: &CgoSolution, radius: f64) -> FieldNormReport {
    let grid = solver.grid();
    let u = solver.field_on_domain(sol);
    let lap_factor = solver.laplacian_factor(sol);
    let lap_domain = solver.torus().restrict(grid, &lap_factor);
    let (_, zi) = split_vector(sol.zeta);
    let lap_u: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            let x = grid.position_of(idx);
            phase_at(x, sol.zeta, sol.h) * lap_domain[idx]
        })
        .collect();
    let mut envelope_max = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.position_of(idx);
        envelope_max = envelope_max.max((-dot3(x, zi) / sol.h).exp());
    }
    let lap_h1 = semiclassical_norm(grid, &lap_u, 1.0, 1);
    let lap_h2 = semiclassical_norm(grid, &lap_u, 1.0, 2);
    let u_h4 = semiclassical_norm(grid, &u.values, 1.0, 4);
    let decay = (-2.0 * radius / sol.h).exp();
    let h = sol.h;
    FieldNormReport {
        h,
        lap_h1,
        lap_h2,
        u_h4,
        envelope_max,
        radius_constants: [lap_h1 * h * decay, lap_h2 * h * decay, u_h4 * h.powi(4) * decay],
        envelope_constants: [
            lap_h1 * h / envelope_max,
            lap_h2 * h / envelope_max,
            u_h4 * h.powi(4) / envelope_max,
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::cube_spec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_pair_invariants(wv: &WaveVectors, dirs: &CgoDirections) {
        for zeta in [wv.zeta1, wv.zeta2] {
            assert!(bilinear_dot(zeta, zeta).norm() < 1e-12);
            let (zr, zi) = split_vector(zeta);
            assert!((norm3(zr) - 1.0).abs() < 1e-12);
            assert!((norm3(zi) - 1.0).abs() < 1e-12);
        }
        for a in 0..3 {
            let diff = wv.zeta2[a] - wv.zeta1[a].conj();
            assert!((diff - Complex64::new(-dirs.h * dirs.xi[a], 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn frozen_wavevector_example() {
        let dirs =
            CgoDirections::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0], 0.1).unwrap();
        let wv = make_wavevectors(&dirs);
        let c = 0.99f64.sqrt();
        assert!((wv.zeta1[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((wv.zeta1[1] - Complex64::new(c, 0.0)).norm() < 1e-15);
        assert!((wv.zeta1[2] - Complex64::new(0.1, 0.0)).norm() < 1e-15);
        assert!((wv.zeta2[0] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((wv.zeta2[1] - Complex64::new(c, 0.0)).norm() < 1e-15);
        assert!((wv.zeta2[2] - Complex64::new(-0.1, 0.0)).norm() < 1e-15);
        // zeta1 . zeta1 = -1 + 0.99 + 0.01 = 0.
        assert!(bilinear_dot(wv.zeta1, wv.zeta1).norm() < 1e-15);
        assert_pair_invariants(&wv, &dirs);
    }

    #[test]
    fn small_scale_limit_is_beta_plus_i_alpha() {
        let dirs =
            CgoDirections::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0], 1e-9).unwrap();
        let wv = make_wavevectors(&dirs);
        assert!((wv.zeta1[0] - Complex64::new(0.0, 1.0)).norm() < 1e-8);
        assert!((wv.zeta1[1] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!(wv.zeta1[2].norm() < 1e-8);
    }

    #[test]
    fn invariants_hold_on_hundred_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..100 {
            let raw_xi = [
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ];
            let nxi = norm3(raw_xi).max(1e-3);
            let h = rng.random_range(0.01..(1.9 / nxi).min(0.5));
            let base = CgoDirections::auto_frame(raw_xi, h).unwrap();
            // Rotate alpha, beta by a random angle in their plane.
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let alpha = [
                t.cos() * base.alpha[0] + t.sin() * base.beta[0],
                t.cos() * base.alpha[1] + t.sin() * base.beta[1],
                t.cos() * base.alpha[2] + t.sin() * base.beta[2],
            ];
            let beta = [
                -t.sin() * base.alpha[0] + t.cos() * base.beta[0],
                -t.sin() * base.alpha[1] + t.cos() * base.beta[1],
                -t.sin() * base.alpha[2] + t.cos() * base.beta[2],
            ];
            let dirs = CgoDirections::new(alpha, beta, raw_xi, h).unwrap();
            let wv = make_wavevectors(&dirs);
            assert_pair_invariants(&wv, &dirs);
        }
    }

    #[test]
    fn exchange_symmetry_swaps_the_pair() {
        let dirs =
            CgoDirections::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0], 0.15).unwrap();
        let wv = make_wavevectors(&dirs);
        let flipped = CgoDirections::new(
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, -2.0],
            0.15,
        )
        .unwrap();
        let wf = make_wavevectors(&flipped);
        for a in 0..3 {
            assert!((wf.zeta1[a] - wv.zeta2[a]).norm() < 1e-15);
            assert!((wf.zeta2[a] - wv.zeta1[a]).norm() < 1e-15);
        }
    }

    #[test]
    fn oversized_frequency_rejected() {
        let err = CgoDirections::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 21.0], 0.1);
        assert!(err.is_err());
    }

    #[test]
    fn prescribed_alpha_must_be_orthogonal() {
        let err = CgoDirections::for_alpha([0.0, 0.0, 1.0], [0.0, 1.0, 1.0], 0.1);
        assert!(err.is_err());
        let ok = CgoDirections::for_alpha([0.0, 0.0, 1.0], [3.0, 1.0, 0.0], 0.1).unwrap();
        assert!(dot3(ok.alpha, ok.xi).abs() < 1e-12);
        assert!(dot3(ok.beta, ok.xi).abs() < 1e-12);
        assert!(dot3(ok.alpha, ok.beta).abs() < 1e-12);
    }

    #[test]
    fn axis_shift_is_exact_half_integer() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let torus = TorusGrid::enclosing(&grid);
        let shift = select_shift(&torus, [0.0, 0.0, 1.0], 0.1);
        assert!(shift.exact);
        let expect = std::f64::consts::PI / torus.sides[2];
        assert!((shift.c - expect).abs() < 1e-15);
        // Every shifted lattice projection stays at least the gap away from 0.
        for k in 0..torus.dims[2] {
            let proj = torus.frequency(2, k) + shift.c;
            assert!(proj.abs() >= shift.gap - 1e-12);
        }
    }

    #[test]
    fn tilted_shift_has_positive_gap() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let torus = TorusGrid::enclosing(&grid);
        let alpha = normalize3([1.0, 1.0, 1.0]);
        let shift = select_shift(&torus, alpha, 0.2);
        assert!(!shift.exact);
        assert!(shift.gap > 0.0, "gap {}", shift.gap);
    }

    #[test]
    fn zero_potential_gives_zero_correction() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let q = Potential::zero(&grid, 1.0);
        let solver = CgoSolver::new(&grid, &q);
        let dirs = CgoDirections::auto_frame([2.0, 1.0, 0.0], 0.3).unwrap();
        let wv = make_wavevectors(&dirs);
        let sol = solver.solve(wv.zeta2, 0.3).unwrap();
        assert!(sol.torus_values.iter().all(|v| v.norm() == 0.0));
        assert_eq!(sol.residual_l2, 0.0);
    }

    #[test]
    fn smoke_solve_converges_with_small_residual() {
        let grid = cube_spec(0.5, 17).build().unwrap();
        let q = Potential::gaussian_bump(&grid, [0.0, 0.0, 0.0], 0.2, 3.0).unwrap();
        let solver = CgoSolver::new(&grid, &q);
        let dirs = CgoDirections::auto_frame([2.0, 1.0, 0.0], 0.25).unwrap();
        let wv = make_wavevectors(&dirs);
        let sol = solver.solve(wv.zeta2, 0.25).unwrap();
        assert!(sol.iterations < 50);
        assert!(sol.contraction < 1.0);
        assert!(sol.last_update < FIXED_POINT_TOL);
        assert!(sol.residual_ratio <= 1e-6, "ratio {:.3e}", sol.residual_ratio);
        let w = solver.remainder_on_domain(&sol);
        assert!(l2_norm(&grid, &w.values) > 0.0);
    }

    #[test]
    fn non_contractive_scale_reports_admissible_scale() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let q = Potential::constant(&grid, 5.0).unwrap();
        let solver = CgoSolver::new(&grid, &q);
        let dirs = CgoDirections::auto_frame([0.1, 0.05, 0.0], 1.9).unwrap();
        let wv = make_wavevectors(&dirs);
        match solver.solve(wv.zeta2, 1.9) {
            Err(Error::NonContraction { h, bound, h_max }) => {
                assert_eq!(h, 1.9);
                assert!(bound >= 1.0);
                assert!(h_max > 0.0 && h_max < 1.9);
            }
            other => panic!("expected non-contraction, got {other:?}"),
        }
    }

    #[test]
    fn free_data_laplacian_slot_vanishes() {
        let grid = cube_spec(0.5, 9).build().unwrap();
        let dirs = CgoDirections::auto_frame([1.0, 0.0, 0.0], 0.2).unwrap();
        let wv = make_wavevectors(&dirs);
        let data = free_boundary_data(&grid, wv.zeta2, 0.2);
        assert_eq!(data.g.max_abs(), 0.0);
        assert!(data.f.max_abs() > 0.0);
    }
}
