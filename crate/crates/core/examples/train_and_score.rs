//! Generate a dataset directory, train on it, checkpoint the model, reload
//! it and score again.
//!
//! cargo run --release --example train_and_score -- [dir]

use smoothgnn::data::{
    generate_synthetic, read_dataset, write_dataset, write_scores, SyntheticConfig,
};
use smoothgnn::eval::evaluate;
use smoothgnn::model::ModelConfig;
use smoothgnn::trainer::{load_checkpoint, save_checkpoint, score, train};

fn main() -> smoothgnn::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "smoothgnn-example".into());
    let dir = std::path::Path::new(&dir);
    write_dataset(
        dir.join("data"),
        &generate_synthetic(&SyntheticConfig::new(500, 6.0, 16, 0.05, 1))?,
    )?;

    let bundle = read_dataset(dir.join("data"))?;
    let g = bundle.graph()?;
    let config = ModelConfig {
        epochs: 50,
        ..bundle.size_class().defaults()
    };
    let (params, report) = train(&g, &bundle, &config, 0)?;
    println!(
        "loss {:.4} -> {:.4} over {} epochs ({:.1}s)",
        report.initial_loss().total,
        report.final_loss.total,
        report.epochs.len(),
        report.wall_time_secs
    );

    let ckpt = dir.join("model.ckpt");
    save_checkpoint(&params, &config, &ckpt)?;
    let (loaded, loaded_config) = load_checkpoint(&ckpt)?;
    let scores = score(&g, &loaded, bundle.features.view(), &loaded_config)?;
    assert_eq!(scores.to_vec(), report.scores);
    write_scores(
        dir.join("scores.tsv"),
        &report.scores,
        bundle.labels.as_deref(),
    )?;

    if let Some(labels) = &bundle.labels {
        let m = evaluate(labels, &report.scores, None)?;
        println!(
            "AUC {:.4} (flipped {:.4}), precision@{} {:.4}",
            m.auc, m.auc_flipped, m.k, m.precision_at_k
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}
