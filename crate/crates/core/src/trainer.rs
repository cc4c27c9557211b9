//! Full-batch training, inference and checkpoints.
//!
//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SMGNNCKP"
//! version    u32
//! features   u64
//! config     u64 length + UTF-8 JSON
//! tensors    u64 count, then per tensor:
//!              rank u32, rank × u64 dims, product(dims) × f64
//! ```

use std::path::Path;
use std::time::Instant;

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::graph::{ConvergedProjector, Graph};
use crate::model::{
    loss_and_gradient, model_forward, LossParts, ModelConfig, ModelParams, ScoreVector,
};
use crate::nn::{Adam, Parameters};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SMGNNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss of the parameters entering each epoch's update.
    pub epochs: Vec<LossParts>,
    /// Loss of the returned parameters.
    pub final_loss: LossParts,
    pub wall_time_secs: f64,
    pub scores: Vec<f64>,
    pub config: ModelConfig,
    pub seed: u64,
}

impl TrainReport {
    /// Equal in everything but wall time.
    pub fn same_run(&self, other: &TrainReport) -> bool {
        TrainReport {
            wall_time_secs: other.wall_time_secs,
            ..self.clone()
        } == *other
    }

    pub fn initial_loss(&self) -> LossParts {
        self.epochs.first().copied().unwrap_or(self.final_loss)
    }
}

fn check_bundle(g: &Graph, bundle: &DatasetBundle) -> Result<()> {
    if bundle.n != g.n() || bundle.features.nrows() != g.n() {
        return Err(Error::shape(
            "dataset nodes",
            g.n(),
            bundle.features.nrows(),
        ));
    }
    if bundle.num_features() == 0 {
        return Err(Error::Dataset("features have no columns".into()));
    }
    Ok(())
}

/// Trains for exactly `config.epochs` Adam steps and returns the final
/// parameters with their scores.
pub fn train(
    g: &Graph,
    bundle: &DatasetBundle,
    config: &ModelConfig,
    seed: u64,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    check_bundle(g, bundle)?;
    let start = Instant::now();
    let x = bundle.features.view();
    let proj = ConvergedProjector::new(g, config.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::init(config, bundle.num_features(), &mut rng);
    let mut adam = Adam::new(config.lr, params.num_params());
    let mut epochs = Vec::with_capacity(config.epochs);
    let at_epoch = |epoch: usize| {
        move |e: Error| match e {
            Error::NonFinite(what) => Error::NonFinite(format!("{what} at epoch {epoch}")),
            other => other,
        }
    };
    for epoch in 0..config.epochs {
        let (pass, grads) =
            loss_and_gradient(g, &proj, &params, x, config).map_err(at_epoch(epoch))?;
        epochs.push(pass.loss);
        adam.step(&mut params, &grads).map_err(at_epoch(epoch))?;
    }
    let pass = model_forward(g, &proj, &params, x, config).map_err(at_epoch(config.epochs))?;
    let report = TrainReport {
        epochs,
        final_loss: pass.loss,
        wall_time_secs: start.elapsed().as_secs_f64(),
        scores: pass.scores.to_vec(),
        config: config.clone(),
        seed,
    };
    Ok((params, report))
}

/// Anomaly scores of every node under `params`.
pub fn score(
    g: &Graph,
    params: &ModelParams,
    x: ArrayView2<f64>,
    config: &ModelConfig,
) -> Result<ScoreVector> {
    let proj = ConvergedProjector::new(g, config.eps);
    Ok(model_forward(g, &proj, params, x, config)?.scores)
}

pub fn encode_checkpoint(params: &ModelParams, config: &ModelConfig) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.features() as u64).to_le_bytes());
    let json = serde_json::to_vec(config)?;
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let mut tensors = 0u64;
    params.visit_shaped(&mut |_, _| tensors += 1);
    out.extend_from_slice(&tensors.to_le_bytes());
    params.visit_shaped(&mut |shape, data| {
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    });
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::Checkpoint(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            ))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let v = self.u64(what)?;
        usize::try_from(v)
            .map_err(|_| Error::Checkpoint(format!("{what} {v} does not fit in memory")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParams, ModelConfig)> {
    if bytes.is_empty() {
        return Err(Error::Checkpoint("file is empty".into()));
    }
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(
            "not a checkpoint (bad magic bytes)".into(),
        ));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version} is not supported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let features = r.len("feature count")?;
    let json_len = r.len("config length")?;
    let config: ModelConfig = serde_json::from_slice(r.take(json_len, "config")?)?;
    config.validate()?;
    if features == 0 {
        return Err(Error::Checkpoint("feature count is zero".into()));
    }

    let mut params = ModelParams::zeros(&config, features);
    let mut expected = Vec::new();
    params.visit_shaped(&mut |shape, _| expected.push(shape.to_vec()));
    let count = r.len("tensor count")?;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, configuration needs {}",
            expected.len()
        )));
    }
    let mut flat = Vec::with_capacity(params.num_params());
    for (i, want) in expected.iter().enumerate() {
        let rank = r.u32("tensor rank")? as usize;
        let shape = (0..rank)
            .map(|_| r.len("tensor dimension"))
            .collect::<Result<Vec<_>>>()?;
        if &shape != want {
            return Err(Error::Checkpoint(format!(
                "tensor {i} has shape {shape:?}, expected {want:?}"
            )));
        }
        let len: usize = shape.iter().product();
        let data = r.take(len * 8, "tensor data")?;
        flat.extend(
            data.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))),
        );
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    params.set_flat(&flat);
    Ok((params, config))
}

pub fn save_checkpoint(
    params: &ModelParams,
    config: &ModelConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params, config)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, ModelConfig)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use rand::Rng;

    use super::*;
    use crate::data::{generate_synthetic, DatasetMeta, SyntheticConfig};
    use crate::model::Variant;

    fn small_config(epochs: usize) -> ModelConfig {
        ModelConfig {
            hops: 2,
            hidden: 8,
            lr: 5e-3,
            eps: 0.0,
            init_std: 0.1,
            epochs,
            variant: Variant::Standard,
            sc_enabled: true,
        }
    }

    fn bundle() -> DatasetBundle {
        generate_synthetic(&SyntheticConfig::new(60, 4.0, 5, 0.1, 3)).unwrap()
    }

    #[test]
    fn zero_epochs_scores_initial_parameters() {
        let b = bundle();
        let g = b.graph().unwrap();
        let config = small_config(0);
        let (params, report) = train(&g, &b, &config, 1).unwrap();
        assert!(report.epochs.is_empty());
        let fresh = ModelParams::init(&config, 5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(params, fresh);
        let expected = score(&g, &fresh, b.features.view(), &config).unwrap();
        assert_eq!(report.scores, expected.to_vec());
    }

    #[test]
    fn training_is_deterministic_and_lowers_loss() {
        let b = bundle();
        let g = b.graph().unwrap();
        let config = small_config(30);
        let (p1, r1) = train(&g, &b, &config, 9).unwrap();
        let (p2, r2) = train(&g, &b, &config, 9).unwrap();
        assert!(r1.same_run(&r2));
        assert_eq!(p1, p2);
        assert_eq!(r1.epochs.len(), 30);
        assert!(r1.final_loss.total < r1.initial_loss().total);
        assert!(r1.epochs.iter().all(|l| l.total.is_finite()));
        let (_, r3) = train(&g, &b, &config, 10).unwrap();
        assert_ne!(r1.scores, r3.scores);
    }

    #[test]
    fn scores_follow_node_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = crate::data::random_connected_graph(10, 0.3, &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((10, 3), || rng.random_range(-1.0..1.0));
        let config = small_config(0);
        let params = ModelParams::init(&config, 3, &mut rng);
        let perm = [3, 7, 0, 9, 1, 5, 2, 8, 6, 4];
        let gp = g.permuted(&perm).unwrap();
        let mut xp = Array2::zeros((10, 3));
        for (i, &p) in perm.iter().enumerate() {
            xp.row_mut(p).assign(&x.row(i));
        }
        let s = score(&g, &params, x.view(), &config).unwrap();
        let sp = score(&gp, &params, xp.view(), &config).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert!((s[i] - sp[p]).abs() < 1e-12);
        }
        assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_parameters_score_one_half() {
        let b = bundle();
        let g = b.graph().unwrap();
        let config = small_config(0);
        let s = score(
            &g,
            &ModelParams::zeros(&config, 5),
            b.features.view(),
            &config,
        )
        .unwrap();
        assert!(s.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let b = bundle();
        let g = b.graph().unwrap();
        let config = small_config(1);
        let params = ModelParams::zeros(&config, 4);
        assert!(matches!(
            score(&g, &params, b.features.view(), &config),
            Err(Error::ShapeMismatch { .. })
        ));
        let other = Graph::from_edges(&[(0, 1)], 2).unwrap();
        assert!(train(&other, &b, &config, 0).is_err());
        let mut bad = small_config(1);
        bad.hidden = 0;
        assert!(matches!(
            train(&g, &b, &bad, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn nan_features_abort_with_epoch() {
        let mut b = bundle();
        b.features[[0, 0]] = f64::NAN;
        let g = b.graph().unwrap();
        match train(&g, &b, &small_config(3), 0) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("epoch 0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let b = bundle();
        let g = b.graph().unwrap();
        let config = ModelConfig {
            variant: Variant::appnp(0.2),
            ..small_config(5)
        };
        let (params, report) = train(&g, &b, &config, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.ckpt");
        let second = dir.path().join("b.ckpt");
        save_checkpoint(&params, &config, &first).unwrap();
        let (loaded, loaded_config) = load_checkpoint(&first).unwrap();
        assert_eq!(loaded_config, config);
        save_checkpoint(&loaded, &loaded_config, &second).unwrap();
        assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&second).unwrap()
        );
        let after = score(&g, &loaded, b.features.view(), &loaded_config).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&report.scores), bits(after.as_slice().unwrap()));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let config = small_config(1);
        let params = ModelParams::zeros(&config, 3);
        let bytes = encode_checkpoint(&params, &config).unwrap();
        let err = |b: &[u8]| match decode_checkpoint(b) {
            Err(Error::Checkpoint(msg)) => msg,
            other => panic!("{other:?}"),
        };
        assert!(err(&[]).contains("empty"));
        assert!(err(&bytes[..bytes.len() - 3]).contains("truncated"));
        assert!(err(&bytes[..10]).contains("truncated"));
        let mut wrong = bytes.clone();
        wrong[8] = 7;
        assert!(err(&wrong).contains("version 7"));
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(err(&wrong).contains("magic"));
        let mut long = bytes.clone();
        long.push(0);
        assert!(err(&long).contains("trailing"));

        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.ckpt");
        std::fs::write(&empty, b"").unwrap();
        assert!(load_checkpoint(&empty)
            .unwrap_err()
            .to_string()
            .contains("empty.ckpt"));
        assert!(matches!(
            load_checkpoint(dir.path().join("none")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn report_serializes() {
        let b = DatasetBundle {
            n: 3,
            edges: vec![(0, 1), (1, 2)],
            features: ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            labels: None,
            meta: DatasetMeta::default(),
        };
        let g = b.graph().unwrap();
        let config = ModelConfig {
            hops: 1,
            ..small_config(2)
        };
        let (_, report) = train(&g, &b, &config, 0).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: TrainReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
