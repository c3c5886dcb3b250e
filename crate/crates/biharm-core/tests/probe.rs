//! Development probes, run explicitly with `--ignored --nocapture`.

use biharm_core::field::{BoundaryField, NavierData, Potential};
use biharm_core::fourier::l2_norm;
use biharm_core::grid::cube_spec;
use biharm_core::solver::NavierSolver;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::time::Instant;

#[test]
#[ignore]
fn manufactured_convergence_probe() {
    let truth = |x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin();
    let mut errors = Vec::new();
    for nodes in [17usize, 25, 33] {
        let t0 = Instant::now();
        let grid = cube_spec(0.5, nodes).build().unwrap();
        let q = Potential::constant(&grid, -9.0 * PI.powi(4)).unwrap();
        let solver = NavierSolver::new(&grid, &q).unwrap();
        let t_factor = t0.elapsed();
        let data = NavierData {
            f: BoundaryField::from_fn(&grid, |x| Complex64::new(truth(x), 0.0)),
            g: BoundaryField::from_fn(&grid, |x| Complex64::new(-3.0 * PI * PI * truth(x), 0.0)),
        };
        let t1 = Instant::now();
        let sol = solver.solve(&data).unwrap();
        let t_solve = t1.elapsed();
        let diff: Vec<Complex64> = (0..grid.len())
            .map(|i| sol.u.values[i] - Complex64::new(truth(grid.position_of(i)), 0.0))
            .collect();
        let err = l2_norm(&grid, &diff);
        println!(
            "nodes {nodes}: err {err:.6e} rcond {:.3e} residual {:.3e} factor {:?} solve {:?}",
            solver.rcond(),
            sol.residual,
            t_factor,
            t_solve
        );
        errors.push(err);
    }
    for w in errors.windows(2) {
        println!("rate: {:.3}", (w[0] / w[1]).ln() / (25f64 / 17.0).ln());
    }
    let r1 = (errors[0] / errors[1]).ln() / ((25.0f64 - 1.0) / 16.0).ln();
    let r2 = (errors[1] / errors[2]).ln() / ((33.0f64 - 1.0) / 24.0).ln();
    println!("rates vs step: {r1:.3} {r2:.3}");
}
