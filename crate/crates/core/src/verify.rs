//! Executable oracle suite: every operator and metric checked against an
//! independent dense or brute-force computation on random small graphs.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    dirichlet_energy, epsilon_smoothing_hop, laplacian_eigen, spectral_energy, SPECTRAL_CAP,
};
use crate::data::random_connected_graph;
use crate::error::Result;
use crate::eval::{auc, auc_pairwise};
use crate::graph::{apply_augmented, dense_oracle, ConvergedProjector, Graph};
use crate::model::{loss_and_gradient, model_forward, ModelConfig, ModelParams, Variant};
use crate::nn::{gradient_check, Mlp, Parameters};

/// Largest hop checked against the dense operator.
pub const ORACLE_MAX_HOP: usize = 6;
pub const AUGMENTED_TOL: f64 = 1e-8;
/// Residual at which a propagated signal counts as converged.
pub const CONVERGENCE_EPS: f64 = 1e-6;
pub const DIRICHLET_REL_TOL: f64 = 1e-8;
pub const GRADIENT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Random graphs per graph-based check; metric checks use twice as many.
    pub trials: usize,
    /// Largest random graph, at least 2.
    pub max_n: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 50,
            max_n: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    /// Largest observed error in the check's own units.
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub checks: Vec<CheckResult>,
    pub elapsed_secs: f64,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn random_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Result<Graph> {
    let n = rng.random_range(2..=max_n.max(2));
    let extra = rng.random_range(0.0..0.5);
    random_connected_graph(n, extra, rng)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sparse augmented propagation against dense `Pᵗ − P^∞`.
pub fn check_augmented(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xa1);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.trials {
        let g = random_graph(&mut rng, opts.max_n)?;
        let proj = ConvergedProjector::new(&g, 0.0);
        let m = random_matrix(&mut rng, g.n(), 3);
        for t in 0..=ORACLE_MAX_HOP {
            let sparse = apply_augmented(&g, &proj, m.view(), t)?;
            let dense = dense_oracle(&g, t)?.dot(&m);
            let err = (&sparse - &dense)
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(err);
        }
    }
    Ok(CheckResult {
        name: "augmented_propagation".into(),
        passed: worst < AUGMENTED_TOL,
        trials: opts.trials,
        max_error: worst,
        tolerance: AUGMENTED_TOL,
        detail: format!("max absolute entry error over hops 0..={ORACLE_MAX_HOP}"),
    })
}

/// The converged projector is a fixed point of propagation and is removed
/// by every augmented power.
pub fn check_stationarity(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xb2);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.trials {
        let g = random_graph(&mut rng, opts.max_n)?;
        let proj = ConvergedProjector::new(&g, 0.0);
        let phi = proj.phi().to_owned().insert_axis(ndarray::Axis(1));
        worst = worst.max(norm(&(g.apply_propagation(phi.view())? - &phi)));
        for t in 0..=ORACLE_MAX_HOP {
            worst = worst.max(norm(&apply_augmented(&g, &proj, phi.view(), t)?));
        }
        worst = worst.max((phi.iter().map(|v| v * v).sum::<f64>() - 1.0).abs());
    }
    Ok(CheckResult {
        name: "converged_projector_stationary".into(),
        passed: worst < 1e-12,
        trials: opts.trials,
        max_error: worst,
        tolerance: 1e-12,
        detail: "‖Pφ − φ‖, ‖Bᵗφ‖ and |‖φ‖² − 1|".into(),
    })
}

/// Repeated propagation reaches the converged signal within the hop bound,
/// with the contraction rate taken from a dense eigensolve. Returns the
/// convergence check and the bound-soundness check.
pub fn check_convergence_and_hop_bound(opts: &VerifyOptions) -> Result<(CheckResult, CheckResult)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xc3);
    let mut worst_residual: f64 = 0.0;
    let mut worst_slack = i64::MIN;
    let mut violations = 0;
    let mut largest_bound = 0;
    for _ in 0..opts.trials {
        let g = random_graph(&mut rng, opts.max_n)?;
        let proj = ConvergedProjector::new(&g, 0.0);
        let x = random_matrix(&mut rng, g.n(), 1);
        let target = proj.apply(x.view())?;
        let d0 = norm(&(&x - &target));
        let (vals, _) = laplacian_eigen(&g, SPECTRAL_CAP)?;
        let lam = 1.0 - vals[1] / 2.0;
        let bound = epsilon_smoothing_hop(CONVERGENCE_EPS, d0, 1.0, lam)?.hops;
        largest_bound = largest_bound.max(bound);

        let mut cur = x;
        let mut residual = d0;
        let mut reached = (residual <= CONVERGENCE_EPS).then_some(0);
        for t in 1..=bound {
            cur = g.apply_propagation(cur.view())?;
            residual = norm(&(&cur - &target));
            if reached.is_none() && residual <= CONVERGENCE_EPS {
                reached = Some(t);
            }
        }
        worst_residual = worst_residual.max(residual);
        match reached {
            Some(hop) => worst_slack = worst_slack.max(hop as i64 - bound as i64),
            None => violations += 1,
        }
    }
    let convergence = CheckResult {
        name: "propagation_converges".into(),
        passed: worst_residual < CONVERGENCE_EPS,
        trials: opts.trials,
        max_error: worst_residual,
        tolerance: CONVERGENCE_EPS,
        detail: format!("residual ‖Pᵗx − φφᵀx‖ at the hop bound (largest bound {largest_bound})"),
    };
    let soundness = CheckResult {
        name: "hop_bound_sound".into(),
        passed: violations == 0 && worst_slack <= 0,
        trials: opts.trials,
        max_error: if violations > 0 {
            f64::INFINITY
        } else {
            worst_slack as f64
        },
        tolerance: 0.0,
        detail: format!("max (measured hop − bound); {violations} trials never converged"),
    };
    Ok((convergence, soundness))
}

/// Dirichlet energy equals the eigenvalue-weighted spectral energy times
/// the squared norm.
pub fn check_dirichlet_identity(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xd4);
    let trials = 2 * opts.trials;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let g = random_graph(&mut rng, opts.max_n)?;
        let x: Array1<f64> = (0..g.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let energy = dirichlet_energy(&g, x.view())?;
        let spectral = spectral_energy(&g, x.view())?.mean_eigenvalue() * x.dot(&x);
        let rel = (energy - spectral).abs() / energy.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(if energy == 0.0 && spectral.abs() < 1e-14 {
            0.0
        } else {
            rel
        });
    }
    Ok(CheckResult {
        name: "dirichlet_spectral_identity".into(),
        passed: worst < DIRICHLET_REL_TOL,
        trials,
        max_error: worst,
        tolerance: DIRICHLET_REL_TOL,
        detail: "relative error of xᵀLx against ‖x‖² Σ λ_k mass_k".into(),
    })
}

/// Full-model and MLP analytic gradients against central differences.
pub fn check_gradients(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xe5);
    let g = random_connected_graph(6, 0.4, &mut rng)?;
    let proj = ConvergedProjector::new(&g, 0.0);
    let x = random_matrix(&mut rng, 6, 3);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (variant, sc) in [
        (Variant::Standard, true),
        (Variant::Standard, false),
        (Variant::appnp(0.3), true),
    ] {
        let config = ModelConfig {
            hops: 2,
            hidden: 4,
            init_std: 0.5,
            eps: 0.0,
            variant,
            sc_enabled: sc,
            ..ModelConfig::default()
        };
        let mut params = ModelParams::init(&config, 3, &mut rng);
        for row in &mut params.theta {
            row.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        }
        let (_, grads) = loss_and_gradient(&g, &proj, &params, x.view(), &config)?;
        let mut probe = params.clone();
        let mut failure = None;
        let report = gradient_check(
            |flat| {
                probe.set_flat(flat);
                match model_forward(&g, &proj, &probe, x.view(), &config) {
                    Ok(pass) => pass.loss.total,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            &params.to_flat(),
            &grads.to_flat(),
            1e-6,
            GRADIENT_TOL,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        worst = worst.max(report.max_rel_error);
        checked += report.checked;
    }

    let mlp = Mlp::gaussian(&[3, 5, 2], 0.7, &mut rng);
    let input = random_matrix(&mut rng, 4, 3);
    let (out, cache) = mlp.forward(input.view())?;
    let (grads, _) = mlp.backward(&cache, out.view())?;
    let mut probe = mlp.clone();
    let report = gradient_check(
        |flat| {
            probe.set_flat(flat);
            let (o, _) = probe.forward(input.view()).expect("shapes fixed");
            0.5 * o.iter().map(|v| v * v).sum::<f64>()
        },
        &mlp.to_flat(),
        &grads.to_flat(),
        1e-6,
        GRADIENT_TOL,
    );
    worst = worst.max(report.max_rel_error);
    checked += report.checked;

    Ok(CheckResult {
        name: "gradients".into(),
        passed: worst < GRADIENT_TOL,
        trials: 4,
        max_error: worst,
        tolerance: GRADIENT_TOL,
        detail: format!("max relative error over {checked} coordinates (6 nodes, 3 features, T=2)"),
    })
}

/// Rank AUC against pair counting, and invariance under increasing maps.
pub fn check_auc(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xf6);
    let trials = 2 * opts.trials;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(2..=200);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..40) as f64 / 8.0)
            .collect();
        let rank = auc(&labels, &scores)?;
        worst = worst.max((rank - auc_pairwise(&labels, &scores)?).abs());
        let logistic: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s - 2.0).collect();
        worst = worst.max((rank - auc(&labels, &logistic)?).abs());
        worst = worst.max((rank - auc(&labels, &affine)?).abs());
    }
    Ok(CheckResult {
        name: "auc_oracle".into(),
        passed: worst == 0.0,
        trials,
        max_error: worst,
        tolerance: 0.0,
        detail: "rank AUC vs pair counting and under logistic/affine maps".into(),
    })
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    let (convergence, soundness) = check_convergence_and_hop_bound(opts)?;
    let checks = vec![
        check_augmented(opts)?,
        check_stationarity(opts)?,
        convergence,
        soundness,
        check_dirichlet_identity(opts)?,
        check_gradients(opts)?,
        check_auc(opts)?,
    ];
    Ok(VerifyReport {
        options: *opts,
        checks,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_suite_passes_and_repeats() {
        let opts = VerifyOptions {
            trials: 5,
            max_n: 10,
            seed: 3,
        };
        let a = run_verify(&opts).unwrap();
        assert!(a.all_passed(), "{a:#?}");
        assert_eq!(a.checks.len(), 7);
        let b = run_verify(&opts).unwrap();
        for (x, y) in a.checks.iter().zip(&b.checks) {
            assert_eq!(x.max_error.to_bits(), y.max_error.to_bits());
        }
    }

    #[test]
    fn tiny_graphs_are_supported() {
        let opts = VerifyOptions {
            trials: 3,
            max_n: 2,
            seed: 0,
        };
        assert!(run_verify(&opts).unwrap().all_passed());
    }
}
