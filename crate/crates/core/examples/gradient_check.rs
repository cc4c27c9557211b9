//! Analytic gradients of the full detector against central differences.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothgnn::data::random_connected_graph;
use smoothgnn::graph::ConvergedProjector;
use smoothgnn::model::{loss_and_gradient, model_forward, ModelConfig, ModelParams, Variant};
use smoothgnn::nn::{gradient_check, Parameters};

fn main() -> smoothgnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_connected_graph(8, 0.3, &mut rng)?;
    let proj = ConvergedProjector::new(&g, 0.0);
    let x = Array2::from_shape_simple_fn((8, 3), || rng.random_range(-1.0..1.0));
    for (label, variant) in [
        ("augmented", Variant::Standard),
        ("appnp", Variant::appnp(0.2)),
    ] {
        let config = ModelConfig {
            hops: 3,
            hidden: 6,
            init_std: 0.4,
            variant,
            ..ModelConfig::default()
        };
        let params = ModelParams::init(&config, 3, &mut rng);
        let (pass, grads) = loss_and_gradient(&g, &proj, &params, x.view(), &config)?;
        let mut probe = params.clone();
        let report = gradient_check(
            |flat| {
                probe.set_flat(flat);
                model_forward(&g, &proj, &probe, x.view(), &config)
                    .expect("valid shapes")
                    .loss
                    .total
            },
            &params.to_flat(),
            &grads.to_flat(),
            1e-6,
            1e-4,
        );
        println!(
            "{label}: loss {:.5}, {} parameters, max relative error {:.2e}, passed {}",
            pass.loss.total, report.checked, report.max_rel_error, report.passed
        );
    }
    Ok(())
}
