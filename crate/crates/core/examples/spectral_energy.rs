//! Dirichlet energy, the spectral energy distribution it summarizes, and the
//! smoothing coefficients computed from feature columns.

use ndarray::{array, Array1};
use smoothgnn::analysis::{dirichlet_energy, spectral_energy};
use smoothgnn::graph::Graph;
use smoothgnn::model::smoothing_coefficients;

fn main() -> smoothgnn::Result<()> {
    let edges: Vec<(usize, usize)> = (0..7).map(|i| (i, i + 1)).collect();
    let g = Graph::from_edges(&edges, 8)?;

    let smooth: Array1<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let rough: Array1<f64> = (0..8)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    for (name, x) in [("smooth", &smooth), ("rough", &rough)] {
        let e = dirichlet_energy(&g, x.view())?;
        let s = spectral_energy(&g, x.view())?;
        println!(
            "{name}: xᵀLx = {e:.6}, ‖x‖² Σ λ·mass = {:.6}",
            s.mean_eigenvalue() * x.dot(x)
        );
        let mass: Vec<String> = s.mass.iter().map(|m| format!("{m:.3}")).collect();
        println!("  mass by ascending eigenvalue: [{}]", mass.join(", "));
    }

    let x = array![
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0]
    ];
    let sc = smoothing_coefficients(&g, x.view())?;
    println!(
        "column quotients {:.4}, coefficients {:.4}",
        sc.quotients, sc.alpha
    );
    println!("all-zero columns: {:?}", sc.zero_columns);
    Ok(())
}
