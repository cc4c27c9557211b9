//! Ranking metrics: ROC AUC and precision@k.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(labels: &[u8], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::shape("scores", labels.len(), scores.len()));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score of node {i}")));
    }
    let mut pos = 0;
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 => {}
            1 => pos += 1,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "label of node {i} is {l}, expected 0 or 1"
                )))
            }
        }
    }
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok((pos, labels.len() - pos))
}

/// Probability that a random anomalous node outscores a random normal
/// one, ties counting one half. Computed from mid-ranks in `O(n log n)`.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum keeps tied mid-ranks integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        rank_sum2 += twice_mid * tied_pos;
        i = j + 1;
    }
    let (p, q) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Reference AUC by explicit comparison of every anomalous/normal pair.
pub fn auc_pairwise(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check(labels, scores)?;
    let positives = scores
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| l == 1)
        .map(|(s, _)| *s);
    let negatives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| l == 0)
        .map(|(s, _)| *s)
        .collect();
    let mut twice = 0u128;
    for si in positives {
        for &sj in &negatives {
            twice += match si.partial_cmp(&sj) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(twice as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Fraction of anomalies among the `k` highest-scored nodes; `k` defaults
/// to the number of anomalies. Equal scores rank the lower node id first.
pub fn precision_at_k(labels: &[u8], scores: &[f64], k: Option<usize>) -> Result<f64> {
    let (pos, _) = check(labels, scores)?;
    let k = k.unwrap_or(pos);
    if k == 0 || k > labels.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in [1, {}], got {k}",
            labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let hits = order[..k].iter().filter(|&&i| labels[i] == 1).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    /// AUC of the negated scores, for auditing score polarity.
    pub auc_flipped: f64,
    pub precision_at_k: f64,
    pub k: usize,
}

pub fn evaluate(labels: &[u8], scores: &[f64], k: Option<usize>) -> Result<Metrics> {
    let (pos, _) = check(labels, scores)?;
    let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
    Ok(Metrics {
        auc: auc(labels, scores)?,
        auc_flipped: auc(labels, &negated)?,
        precision_at_k: precision_at_k(labels, scores, k)?,
        k: k.unwrap_or(pos),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.1]).unwrap(), 0.75);
        assert_eq!(auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(auc(&[0, 1, 1, 0, 1], &[0.3; 5]).unwrap(), 0.5);
        assert_eq!(auc(&[0, 1], &[0.5, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn auc_errors() {
        assert!(matches!(auc(&[1, 1], &[0.1, 0.2]), Err(Error::SingleClass)));
        assert!(matches!(auc(&[0, 0], &[0.1, 0.2]), Err(Error::SingleClass)));
        assert!(auc(&[0, 1], &[0.1]).is_err());
        assert!(auc(&[0, 2], &[0.1, 0.2]).is_err());
        assert!(auc(&[0, 1], &[0.1, f64::NAN]).is_err());
    }

    #[test]
    fn precision_examples() {
        let labels = [1, 0, 1, 0];
        let scores = [0.9, 0.8, 0.7, 0.1];
        assert_eq!(precision_at_k(&labels, &scores, Some(2)).unwrap(), 0.5);
        assert_eq!(precision_at_k(&labels, &scores, Some(4)).unwrap(), 0.5);
        assert_eq!(
            precision_at_k(&[0, 1, 1], &[0.1, 0.5, 0.9], None).unwrap(),
            1.0
        );
        let inverted = [1, 1, 0, 0, 0, 0];
        let s = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(precision_at_k(&inverted, &s, None).unwrap(), 0.0);
        assert!(precision_at_k(&labels, &scores, Some(0)).is_err());
        assert!(precision_at_k(&labels, &scores, Some(5)).is_err());
    }

    #[test]
    fn precision_ties_prefer_low_ids() {
        assert_eq!(
            precision_at_k(&[1, 0, 0, 1], &[0.5; 4], Some(1)).unwrap(),
            1.0
        );
        assert_eq!(
            precision_at_k(&[0, 1, 0, 1], &[0.5; 4], Some(1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn metrics_bundle() {
        let m = evaluate(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.1], None).unwrap();
        assert_eq!(
            (m.auc, m.auc_flipped, m.precision_at_k, m.k),
            (0.75, 0.25, 0.5, 2)
        );
    }

    fn instance() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..2, n),
                // coarse grid so ties occur
                prop::collection::vec((-20i32..20).prop_map(|v| v as f64 / 4.0), n),
            )
        })
    }

    proptest! {
        #[test]
        fn rank_auc_equals_pair_count((mut labels, scores) in instance()) {
            labels[0] = 0;
            labels[1] = 1;
            prop_assert_eq!(auc(&labels, &scores).unwrap(), auc_pairwise(&labels, &scores).unwrap());
        }

        #[test]
        fn auc_ignores_increasing_transforms((mut labels, scores) in instance(), a in 0.01f64..10.0, b in -5.0f64..5.0) {
            labels[0] = 0;
            labels[1] = 1;
            let base = auc(&labels, &scores).unwrap();
            let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
            let logistic: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
            prop_assert_eq!(auc(&labels, &affine).unwrap(), base);
            prop_assert_eq!(auc(&labels, &logistic).unwrap(), base);
        }

        #[test]
        fn complement_identity(mut labels in prop::collection::vec(0u8..2, 2..100), seed in any::<u64>()) {
            labels[0] = 0;
            labels[1] = 1;
            // distinct scores
            let scores: Vec<f64> = (0..labels.len()).map(|i| ((i as u64).wrapping_mul(2654435761).wrapping_add(seed) % 1_000_003) as f64 + i as f64 / 1e4).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let sum = auc(&labels, &scores).unwrap() + auc(&labels, &neg).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
