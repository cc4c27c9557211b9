//! AUC and precision@k on a hand-made ranking.

use smoothgnn::eval::{auc, auc_pairwise, evaluate, precision_at_k};

fn main() -> smoothgnn::Result<()> {
    let labels = [1, 0, 1, 0, 0, 0, 1, 0];
    let scores = [0.91, 0.85, 0.70, 0.70, 0.40, 0.33, 0.20, 0.05];
    println!(
        "AUC {:.4} (pair count {:.4})",
        auc(&labels, &scores)?,
        auc_pairwise(&labels, &scores)?
    );
    for k in [1, 3, 5] {
        println!(
            "precision@{k} {:.4}",
            precision_at_k(&labels, &scores, Some(k))?
        );
    }
    println!("{:?}", evaluate(&labels, &scores, None)?);
    Ok(())
}
