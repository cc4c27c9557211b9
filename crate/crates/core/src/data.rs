//! Dataset directories, score files, and synthetic anomaly-injected graphs.
//!
//! A dataset directory holds:
//!
//! * `edges.tsv`: one undirected edge per line, two tab-separated 0-based
//!   node indices;
//! * `features.csv`: one row of comma-separated decimals per node;
//! * `labels.txt` (optional): one `0`/`1` per line, `1` = anomalous;
//! * `meta.json` (optional): `name`, `anomaly_ratio`, `size_class`
//!   (`Small` | `Medium` | `Large`) and, for graphs with trailing isolated
//!   nodes, `num_nodes`.
//!
//! Blank lines and lines starting with `#` are skipped in the text files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::SizeClass;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.txt";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DatasetMeta {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_class: Option<SizeClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Array2<f64>,
    /// 1 = anomalous.
    pub labels: Option<Vec<u8>>,
    pub meta: DatasetMeta,
}

impl DatasetBundle {
    pub fn graph(&self) -> Result<Graph> {
        Graph::from_edges(&self.edges, self.n)
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Explicit `size_class` from the metadata, or one inferred from `n`.
    pub fn size_class(&self) -> SizeClass {
        self.meta
            .size_class
            .unwrap_or_else(|| SizeClass::for_node_count(self.n))
    }

    fn validate(&self) -> Result<()> {
        if self.features.nrows() != self.n {
            return Err(Error::Dataset(format!(
                "features have {} rows but the graph has {} nodes",
                self.features.nrows(),
                self.n
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.n {
                return Err(Error::Dataset(format!(
                    "labels have {} entries but the graph has {} nodes",
                    labels.len(),
                    self.n
                )));
            }
            if let Some(bad) = labels.iter().position(|&l| l > 1) {
                return Err(Error::Dataset(format!(
                    "label {} at node {bad} is not binary",
                    labels[bad]
                )));
            }
        }
        if let Some(&(u, v)) = self
            .edges
            .iter()
            .find(|&&(u, v)| u >= self.n || v >= self.n)
        {
            return Err(Error::NodeOutOfRange { u, v, n: self.n });
        }
        if let Some(((i, j), _)) = self.features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Dataset(format!("feature ({i}, {j}) is not finite")));
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (line, content) in content_lines(&text) {
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected 2 tab-separated indices, found {}", fields.len()),
            ));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, line, format!("invalid node index {s:?}")))
        };
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(edges)
}

fn parse_features(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (line, content) in content_lines(&text) {
        let before = values.len();
        for field in content.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid decimal {field:?}")))?;
            values.push(v);
        }
        let w = values.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(parse_err(
                    path,
                    line,
                    format!("row has {w} columns, expected {expected}"),
                ));
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, width), values).expect("row widths checked"))
}

fn parse_labels(path: &Path) -> Result<Vec<u8>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line, content)| match content {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(parse_err(
                path,
                line,
                format!("label must be 0 or 1, found {other:?}"),
            )),
        })
        .collect()
}

/// Reads and validates a dataset directory.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let edges = parse_edges(&dir.join(EDGES_FILE))?;
    let features = parse_features(&dir.join(FEATURES_FILE))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        Some(parse_labels(&labels_path)?)
    } else {
        None
    };
    let meta_path = dir.join(META_FILE);
    let meta: DatasetMeta = if meta_path.exists() {
        serde_json::from_str(&read_text(&meta_path)?)?
    } else {
        DatasetMeta::default()
    };

    let from_edges = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = match meta.num_nodes {
        Some(n) => n,
        None => {
            if from_edges != features.nrows() {
                return Err(Error::Dataset(format!(
                    "features.csv has {} rows but edges.tsv implies {} nodes",
                    features.nrows(),
                    from_edges
                )));
            }
            from_edges
        }
    };
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let bundle = DatasetBundle {
        n,
        edges,
        features,
        labels,
        meta,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Writes a bundle in the directory format read by [`read_dataset`].
pub fn write_dataset(dir: impl AsRef<Path>, bundle: &DatasetBundle) -> Result<()> {
    let dir = dir.as_ref();
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    write_with(&dir.join(EDGES_FILE), |w| {
        for &(u, v) in &bundle.edges {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    })?;
    write_with(&dir.join(FEATURES_FILE), |w| {
        for row in bundle.features.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    w.write_all(b",")?;
                }
                write!(w, "{v:?}")?;
                first = false;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    if let Some(labels) = &bundle.labels {
        write_with(&dir.join(LABELS_FILE), |w| {
            for l in labels {
                writeln!(w, "{l}")?;
            }
            Ok(())
        })?;
    }
    let meta = serde_json::to_string_pretty(&bundle.meta)?;
    fs::write(dir.join(META_FILE), meta + "\n").map_err(|e| Error::io(dir.join(META_FILE), e))
}

pub(crate) fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes `node<TAB>score` lines (17 significant digits), ordered by node
/// id, after a `# node\tscore` header. Labels, when given, add a third column.
pub fn write_scores(path: impl AsRef<Path>, scores: &[f64], labels: Option<&[u8]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(labels) = labels {
        if labels.len() != scores.len() {
            return Err(Error::shape("score labels", scores.len(), labels.len()));
        }
    }
    write_with(path, |w| {
        match labels {
            Some(labels) => {
                writeln!(w, "# node\tscore\tlabel")?;
                for (i, (s, l)) in scores.iter().zip(labels).enumerate() {
                    writeln!(w, "{i}\t{s:.16e}\t{l}")?;
                }
            }
            None => {
                writeln!(w, "# node\tscore")?;
                for (i, s) in scores.iter().enumerate() {
                    writeln!(w, "{i}\t{s:.16e}")?;
                }
            }
        }
        Ok(())
    })
}

/// Reads a score file written by [`write_scores`].
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut scores = Vec::new();
    for (line, content) in content_lines(&text) {
        let mut fields = content.split('\t');
        let id: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(path, line, "missing node id"))?;
        if id != scores.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected node {}, found {id}", scores.len()),
            ));
        }
        let score: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(path, line, "missing or invalid score"))?;
        scores.push(score);
    }
    Ok(scores)
}

/// Parameters of the synthetic anomaly-injected graph generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub avg_degree: f64,
    pub features: usize,
    pub anomaly_ratio: f64,
    pub seed: u64,
    pub communities: usize,
    /// Share of random edges placed inside a community.
    pub intra_fraction: f64,
    pub clique_size: usize,
    /// Contextual shift in population standard deviations.
    pub contextual_shift: f64,
}

impl SyntheticConfig {
    pub fn new(n: usize, avg_degree: f64, features: usize, anomaly_ratio: f64, seed: u64) -> Self {
        Self {
            n,
            avg_degree,
            features,
            anomaly_ratio,
            seed,
            communities: 5,
            intra_fraction: 0.8,
            clique_size: 8,
            contextual_shift: 3.0,
        }
    }
}

/// Generates a community graph with Gaussian features and injected anomalies.
///
/// Exactly `round(n · anomaly_ratio)` nodes are labeled. Half of them
/// (rounded down) become structural anomalies: they are split into cliques
/// of at most `clique_size` members and fully connected. The rest are
/// contextual anomalies whose feature rows are redrawn from
/// `N(μ_j + shift·σ_j, σ_j²)`, with `μ_j, σ_j` the population statistics of
/// column `j`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<DatasetBundle> {
    let n = cfg.n;
    if n < 20 {
        return Err(Error::InvalidArgument(format!(
            "synthetic graphs need n >= 20, got {n}"
        )));
    }
    if !(cfg.anomaly_ratio > 0.0 && cfg.anomaly_ratio < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "anomaly ratio must lie in (0, 0.5), got {}",
            cfg.anomaly_ratio
        )));
    }
    if cfg.features == 0 || cfg.communities == 0 || !(cfg.avg_degree > 0.0) {
        return Err(Error::InvalidArgument(
            "features, communities and average degree must be positive".into(),
        ));
    }
    if cfg.clique_size < 2 || cfg.clique_size > n {
        return Err(Error::InvalidArgument(format!(
            "clique size {} infeasible for {n} nodes",
            cfg.clique_size
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.communities.min(n);
    let community: Vec<usize> = (0..n).map(|i| i % k).collect();
    let members: Vec<Vec<usize>> = (0..k).map(|c| (c..n).step_by(k).collect()).collect();

    let mut edge_set = std::collections::BTreeSet::new();
    let add = |set: &mut std::collections::BTreeSet<(usize, usize)>, u: usize, v: usize| {
        if u != v {
            set.insert((u.min(v), u.max(v)))
        } else {
            false
        }
    };
    // random spanning tree, biased toward the node's own community
    for i in 1..n {
        let same: Vec<usize> = members[community[i]]
            .iter()
            .copied()
            .filter(|&j| j < i)
            .collect();
        let j = if !same.is_empty() && rng.random_bool(cfg.intra_fraction) {
            same[rng.random_range(0..same.len())]
        } else {
            rng.random_range(0..i)
        };
        add(&mut edge_set, i, j);
    }
    let target = ((n as f64 * cfg.avg_degree) / 2.0).round() as usize;
    let max_edges = n * (n - 1) / 2;
    let target = target.min(max_edges);
    while edge_set.len() < target {
        let u = rng.random_range(0..n);
        let v = if rng.random_bool(cfg.intra_fraction) {
            let pool = &members[community[u]];
            pool[rng.random_range(0..pool.len())]
        } else {
            rng.random_range(0..n)
        };
        add(&mut edge_set, u, v);
    }

    let f = cfg.features;
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..f)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut features = Array2::<f64>::zeros((n, f));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = centers[community[i]][j] + rng.sample::<f64, _>(StandardNormal);
        }
    }

    let count = (n as f64 * cfg.anomaly_ratio).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let chosen = &order[..count];
    let mut structural = count / 2;
    if structural == 1 {
        structural = 0;
    }
    let (struct_nodes, context_nodes) = chosen.split_at(structural);

    if !struct_nodes.is_empty() {
        let cliques = struct_nodes.len().div_ceil(cfg.clique_size);
        let base = struct_nodes.len() / cliques;
        let extra = struct_nodes.len() % cliques;
        let mut start = 0;
        for c in 0..cliques {
            let size = base + usize::from(c < extra);
            let group = &struct_nodes[start..start + size];
            for (a, &u) in group.iter().enumerate() {
                for &v in &group[a + 1..] {
                    add(&mut edge_set, u, v);
                }
            }
            start += size;
        }
    }

    let mean = features.mean_axis(ndarray::Axis(0)).expect("n > 0");
    let std = features.std_axis(ndarray::Axis(0), 0.0);
    for &i in context_nodes {
        for j in 0..f {
            let z: f64 = rng.sample(StandardNormal);
            features[[i, j]] = mean[j] + std[j] * (z + cfg.contextual_shift);
        }
    }

    let mut labels = vec![0u8; n];
    for &i in chosen {
        labels[i] = 1;
    }

    Ok(DatasetBundle {
        n,
        edges: edge_set.into_iter().collect(),
        features,
        labels: Some(labels),
        meta: DatasetMeta {
            name: format!("synthetic-n{n}-seed{}", cfg.seed),
            anomaly_ratio: Some(count as f64 / n as f64),
            size_class: Some(SizeClass::Medium),
            num_nodes: Some(n),
        },
    })
}

/// Random connected graph: a uniform random recursive tree plus each
/// remaining pair independently with probability `extra_prob`.
pub fn random_connected_graph<R: Rng + ?Sized>(
    n: usize,
    extra_prob: f64,
    rng: &mut R,
) -> Result<Graph> {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((i, rng.random_range(0..i)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(extra_prob) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(&edges, n)
}
