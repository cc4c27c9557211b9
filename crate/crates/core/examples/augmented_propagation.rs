//! Augmented propagation on a small graph: sparse `Bᵗ·M` against the dense
//! operator, the converged projector, and the hop bound from the spectral gap.

use ndarray::array;
use smoothgnn::analysis::{epsilon_smoothing_hop, second_eigenvalue, subspace_distance};
use smoothgnn::graph::{apply_augmented, dense_oracle, ConvergedProjector, Graph};

fn main() -> smoothgnn::Result<()> {
    let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4)], 5)?;
    let proj = ConvergedProjector::new(&g, 0.0);
    println!("phi = {:.4}", proj.phi());

    let m = array![[1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [0.0, -1.0], [3.0, 1.0]];
    for t in 0..=4 {
        let sparse = apply_augmented(&g, &proj, m.view(), t)?;
        let dense = dense_oracle(&g, t)?.dot(&m);
        let err = (&sparse - &dense)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let norm = sparse.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("t={t}  ‖BᵗM‖ = {norm:.6}  max |sparse - dense| = {err:.1e}");
    }

    let lam = second_eigenvalue(&g, &proj, 1e-12, 10_000)?;
    let d0 = subspace_distance(&proj, m.view())?;
    let bound = epsilon_smoothing_hop(1e-6, d0, 1.0, lam)?;
    println!(
        "second eigenvalue of P {lam:.6}, d0 {d0:.4}, hops to 1e-6: {}",
        bound.hops
    );
    Ok(())
}
