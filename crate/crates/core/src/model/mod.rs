//! The detector: a smoothing learning component (SLC) and a smoothing-aware
//! spectral GNN (SSGNN) sharing per-hop feature transforms, smoothing
//! coefficients (SC) that rescale both outputs, and the smoothness measure
//! used as anomaly score.
//!
//! For hops `t = 0..=T` and raw features `X` (`n × F`):
//!
//! ```text
//! X̃_t      = hop_mlp_t(X)                               n × H
//! SLC_t    = Bᵗ X̃_t            (or (Zᵗ − Z^∞) X̃_t)      n × H
//! GNN_t    = Σ_{k≤t} θ_{t,k} Lᵏ X̃_t                      n × H
//! H_slc    = slc_fusion([SLC_0 | … | SLC_T])            n × F
//! H_gnn    = ssgnn_fusion([GNN_0 | … | GNN_T])          n × F
//! α_j      = σ(x_jᵀ L x_j / x_jᵀ x_j)                   per column of X
//! score_i  = σ(mean_j H_slc[i, j] · α_j)
//! loss     = mean_i ‖H_gnn[i] ∘ α − x_i‖₂ + mean_i score_i
//! ```
//!
//! Each SLC block costs `t` sparse passes, so a forward pass performs
//! `T(T + 1)/2` propagations for the SLC and as many Laplacian passes for
//! the SSGNN; backward repeats both.

mod config;

pub use config::{ModelConfig, SizeClass, Variant};

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{appnp_converged, appnp_deviation, AppnpOptions};
use crate::error::{Error, Result};
use crate::graph::{apply_augmented, ConvergedProjector, Graph};
use crate::nn::{Mlp, MlpCache, Parameters};

/// Per-node anomaly scores in `(0, 1)`; higher means more anomalous.
pub type ScoreVector = Array1<f64>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// One transform per hop, `F → H → H`, shared by SLC and SSGNN.
    pub hop_mlps: Vec<Mlp>,
    /// `(T + 1)·H → H → F`.
    pub slc_fusion: Mlp,
    /// `(T + 1)·H → H → F`.
    pub ssgnn_fusion: Mlp,
    /// `theta[t][k]`, the coefficient of `Lᵏ` in hop `t`'s filter, `k ≤ t`.
    pub theta: Vec<Array1<f64>>,
}

fn initial_theta(hops: usize) -> Vec<Array1<f64>> {
    (0..=hops)
        .map(|t| Array1::from_elem(t + 1, 1.0 / (t + 1) as f64))
        .collect()
}

impl ModelParams {
    /// Gaussian weights with `config.init_std`, zero biases, and
    /// `θ_{t,k} = 1/(t + 1)`.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, features: usize, rng: &mut R) -> Self {
        let (t, h, f) = (config.hops, config.hidden, features);
        let std = config.init_std;
        Self {
            hop_mlps: (0..=t)
                .map(|_| Mlp::gaussian(&[f, h, h], std, rng))
                .collect(),
            slc_fusion: Mlp::gaussian(&[(t + 1) * h, h, f], std, rng),
            ssgnn_fusion: Mlp::gaussian(&[(t + 1) * h, h, f], std, rng),
            theta: initial_theta(t),
        }
    }

    /// All weights and biases zero; `θ` at its initial value.
    pub fn zeros(config: &ModelConfig, features: usize) -> Self {
        let (t, h, f) = (config.hops, config.hidden, features);
        Self {
            hop_mlps: (0..=t).map(|_| Mlp::zeros(&[f, h, h])).collect(),
            slc_fusion: Mlp::zeros(&[(t + 1) * h, h, f]),
            ssgnn_fusion: Mlp::zeros(&[(t + 1) * h, h, f]),
            theta: initial_theta(t),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            hop_mlps: self.hop_mlps.iter().map(Mlp::zeros_like).collect(),
            slc_fusion: self.slc_fusion.zeros_like(),
            ssgnn_fusion: self.ssgnn_fusion.zeros_like(),
            theta: self.theta.iter().map(|r| Array1::zeros(r.len())).collect(),
        }
    }

    /// `T`, the largest hop.
    pub fn hops(&self) -> usize {
        self.hop_mlps.len() - 1
    }

    pub fn hidden(&self) -> usize {
        self.hop_mlps[0].output_width()
    }

    pub fn features(&self) -> usize {
        self.hop_mlps[0].input_width()
    }

    /// Checks that these parameters fit `config` and `features` inputs.
    pub fn check(&self, config: &ModelConfig, features: usize) -> Result<()> {
        let expected = Self::zeros(config, features);
        let shapes = |p: &Self| {
            let mut out = Vec::new();
            p.visit_shaped(&mut |shape, _| out.push(shape.to_vec()));
            out
        };
        if shapes(self) != shapes(&expected) {
            return Err(Error::shape(
                "model parameters",
                format!("T={}, H={}, F={features}", config.hops, config.hidden),
                format!(
                    "T={}, H={}, F={}",
                    self.hops(),
                    self.hidden(),
                    self.features()
                ),
            ));
        }
        Ok(())
    }

    /// Visits every tensor with its shape, in the same order as
    /// [`Parameters::visit`].
    pub fn visit_shaped(&self, f: &mut dyn FnMut(&[usize], &[f64])) {
        let mut mlp = |m: &Mlp| {
            for l in m.layers() {
                f(
                    l.weight.shape(),
                    l.weight.as_slice().expect("standard layout"),
                );
                f(l.bias.shape(), l.bias.as_slice().expect("standard layout"));
            }
        };
        self.hop_mlps.iter().for_each(&mut mlp);
        mlp(&self.slc_fusion);
        mlp(&self.ssgnn_fusion);
        for row in &self.theta {
            f(row.shape(), row.as_slice().expect("standard layout"));
        }
    }
}

impl Parameters for ModelParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for m in &self.hop_mlps {
            m.visit(f);
        }
        self.slc_fusion.visit(f);
        self.ssgnn_fusion.visit(f);
        for row in &self.theta {
            f(row.as_slice().expect("standard layout"));
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for m in &mut self.hop_mlps {
            m.visit_mut(f);
        }
        self.slc_fusion.visit_mut(f);
        self.ssgnn_fusion.visit_mut(f);
        for row in &mut self.theta {
            f(row.as_slice_mut().expect("standard layout"));
        }
    }
}

/// Smoothing coefficients of the raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingCoefficients {
    /// Per-column Rayleigh quotient `x_jᵀLx_j / x_jᵀx_j`, in `[0, 2)`.
    pub quotients: Array1<f64>,
    /// `σ(quotient)`.
    pub alpha: Array1<f64>,
    /// All-zero columns; their quotient is taken as 0.
    pub zero_columns: Vec<usize>,
}

pub fn smoothing_coefficients(g: &Graph, x: ArrayView2<f64>) -> Result<SmoothingCoefficients> {
    let lx = g.apply_laplacian(x)?;
    let mut zero_columns = Vec::new();
    let quotients: Array1<f64> = (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let denom = col.dot(&col);
            if denom == 0.0 {
                zero_columns.push(j);
                0.0
            } else {
                col.dot(&lx.column(j)) / denom
            }
        })
        .collect();
    let alpha = quotients.mapv(sigmoid);
    Ok(SmoothingCoefficients {
        quotients,
        alpha,
        zero_columns,
    })
}

/// Scales column `j` of `h` by `alpha[j]`.
pub fn apply_sc(h: ArrayView2<f64>, alpha: ArrayView1<f64>) -> Result<Array2<f64>> {
    if h.ncols() != alpha.len() {
        return Err(Error::shape(
            "smoothing coefficients",
            h.ncols(),
            alpha.len(),
        ));
    }
    Ok(&h * &alpha)
}

/// `σ(mean of row i)` for every row.
pub fn smeasure(h: ArrayView2<f64>) -> ScoreVector {
    let width = h.ncols().max(1) as f64;
    h.rows()
        .into_iter()
        .map(|r| sigmoid(r.sum() / width))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    /// Mean Euclidean reconstruction error.
    pub con: f64,
    /// Mean smoothness measure.
    pub smooth: f64,
}

pub fn loss(
    h_scgnn: ArrayView2<f64>,
    h_scslc: ArrayView2<f64>,
    x: ArrayView2<f64>,
) -> Result<LossParts> {
    if h_scgnn.dim() != x.dim() {
        return Err(Error::shape(
            "reconstruction",
            format!("{:?}", x.dim()),
            format!("{:?}", h_scgnn.dim()),
        ));
    }
    if h_scslc.nrows() != x.nrows() {
        return Err(Error::shape(
            "smoothness measure rows",
            x.nrows(),
            h_scslc.nrows(),
        ));
    }
    let n = x.nrows() as f64;
    let con = (&h_scgnn - &x)
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .sum::<f64>()
        / n;
    let smooth = smeasure(h_scslc).sum() / n;
    Ok(LossParts {
        total: con + smooth,
        con,
        smooth,
    })
}

/// The process whose deviations from convergence feed the SLC.
enum Smoother<'a> {
    Augmented(&'a ConvergedProjector),
    Appnp(AppnpOptions),
}

impl Smoother<'_> {
    fn new<'a>(config: &ModelConfig, proj: &'a ConvergedProjector) -> Smoother<'a> {
        match config.appnp_options() {
            None => Smoother::Augmented(proj),
            Some(opts) => Smoother::Appnp(opts),
        }
    }

    /// Applies the hop-`t` deviation operator. Both operators are symmetric,
    /// so the same call maps gradients backward.
    fn apply(&self, g: &Graph, m: ArrayView2<f64>, t: usize) -> Result<Array2<f64>> {
        match self {
            Smoother::Augmented(proj) => apply_augmented(g, proj, m, t),
            Smoother::Appnp(o) => {
                let zinf = appnp_converged(g, m, o.alpha, o.tol, o.max_iter)?;
                appnp_deviation(g, m, o.alpha, t, zinf.view())
            }
        }
    }
}

/// Outputs of the shared per-hop transforms.
#[derive(Debug, Clone)]
pub struct HopFeatures {
    pub blocks: Vec<Array2<f64>>,
    caches: Vec<MlpCache>,
}

pub fn hop_features(params: &ModelParams, x: ArrayView2<f64>) -> Result<HopFeatures> {
    let mut blocks = Vec::with_capacity(params.hop_mlps.len());
    let mut caches = Vec::with_capacity(params.hop_mlps.len());
    for mlp in &params.hop_mlps {
        let (out, cache) = mlp.forward(x)?;
        blocks.push(out);
        caches.push(cache);
    }
    Ok(HopFeatures { blocks, caches })
}

fn ensure_finite(m: &Array2<f64>, what: impl FnOnce() -> String) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what()))
    }
}

/// SLC output before smoothing coefficients, with what backward needs.
#[derive(Debug, Clone)]
pub struct SlcOutput {
    pub h: Array2<f64>,
    fusion: MlpCache,
}

/// SSGNN output before smoothing coefficients, with what backward needs.
#[derive(Debug, Clone)]
pub struct SsgnnOutput {
    pub h: Array2<f64>,
    /// `powers[t][k] = Lᵏ X̃_t`.
    powers: Vec<Vec<Array2<f64>>>,
    fusion: MlpCache,
}

fn slc_from_hops(
    g: &Graph,
    smoother: &Smoother,
    params: &ModelParams,
    hops: &HopFeatures,
) -> Result<SlcOutput> {
    let mut blocks = Vec::with_capacity(hops.blocks.len());
    for (t, x_t) in hops.blocks.iter().enumerate() {
        let b = smoother.apply(g, x_t.view(), t)?;
        ensure_finite(&b, || format!("smoothing learning component, hop {t}"))?;
        blocks.push(b);
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let cat = concatenate(Axis(1), &views).expect("blocks share row count");
    let (h, fusion) = params.slc_fusion.forward(cat.view())?;
    Ok(SlcOutput { h, fusion })
}

fn ssgnn_from_hops(g: &Graph, params: &ModelParams, hops: &HopFeatures) -> Result<SsgnnOutput> {
    let mut filtered = Vec::with_capacity(hops.blocks.len());
    let mut powers = Vec::with_capacity(hops.blocks.len());
    for (t, x_t) in hops.blocks.iter().enumerate() {
        let theta = &params.theta[t];
        let mut pw = vec![x_t.clone()];
        let mut acc = x_t * theta[0];
        for k in 1..=t {
            let next = g.apply_laplacian(pw[k - 1].view())?;
            acc.scaled_add(theta[k], &next);
            pw.push(next);
        }
        ensure_finite(&acc, || format!("spectral GNN, hop {t}"))?;
        filtered.push(acc);
        powers.push(pw);
    }
    let views: Vec<_> = filtered.iter().map(|b| b.view()).collect();
    let cat = concatenate(Axis(1), &views).expect("blocks share row count");
    let (h, fusion) = params.ssgnn_fusion.forward(cat.view())?;
    Ok(SsgnnOutput { h, powers, fusion })
}

/// Smoothing learning component: fuse `BᵗX̃_t` over all hops.
pub fn slc_forward(
    g: &Graph,
    proj: &ConvergedProjector,
    params: &ModelParams,
    x: ArrayView2<f64>,
) -> Result<SlcOutput> {
    let hops = hop_features(params, x)?;
    slc_from_hops(g, &Smoother::Augmented(proj), params, &hops)
}

/// Smoothing-aware spectral GNN: fuse `Σ_k θ_{t,k} LᵏX̃_t` over all hops.
pub fn ssgnn_forward(g: &Graph, params: &ModelParams, x: ArrayView2<f64>) -> Result<SsgnnOutput> {
    let hops = hop_features(params, x)?;
    ssgnn_from_hops(g, params, &hops)
}

/// Everything produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub scores: ScoreVector,
    pub loss: LossParts,
    /// Coefficients actually applied (all ones when SC is disabled).
    pub alpha: Array1<f64>,
    pub h_scslc: Array2<f64>,
    pub h_scgnn: Array2<f64>,
    hops: HopFeatures,
    slc: SlcOutput,
    gnn: SsgnnOutput,
}

fn check_inputs(
    g: &Graph,
    params: &ModelParams,
    x: ArrayView2<f64>,
    config: &ModelConfig,
) -> Result<()> {
    config.validate()?;
    if x.nrows() != g.n() {
        return Err(Error::shape("feature rows", g.n(), x.nrows()));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("input features".into()));
    }
    params.check(config, x.ncols())
}

pub fn model_forward(
    g: &Graph,
    proj: &ConvergedProjector,
    params: &ModelParams,
    x: ArrayView2<f64>,
    config: &ModelConfig,
) -> Result<ForwardPass> {
    check_inputs(g, params, x, config)?;
    let alpha = if config.sc_enabled {
        smoothing_coefficients(g, x)?.alpha
    } else {
        Array1::ones(x.ncols())
    };
    let smoother = Smoother::new(config, proj);
    let hops = hop_features(params, x)?;
    let slc = slc_from_hops(g, &smoother, params, &hops)?;
    let gnn = ssgnn_from_hops(g, params, &hops)?;
    let h_scslc = apply_sc(slc.h.view(), alpha.view())?;
    let h_scgnn = apply_sc(gnn.h.view(), alpha.view())?;
    let scores = smeasure(h_scslc.view());
    let loss = loss(h_scgnn.view(), h_scslc.view(), x)?;
    if !loss.total.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(ForwardPass {
        scores,
        loss,
        alpha,
        h_scslc,
        h_scgnn,
        hops,
        slc,
        gnn,
    })
}

/// Gradient of `pass.loss.total` with respect to every parameter.
pub fn model_backward(
    g: &Graph,
    proj: &ConvergedProjector,
    params: &ModelParams,
    x: ArrayView2<f64>,
    config: &ModelConfig,
    pass: &ForwardPass,
) -> Result<ModelParams> {
    check_inputs(g, params, x, config)?;
    let (n, f) = x.dim();
    let nf = n as f64;
    let h = params.hidden();
    let smoother = Smoother::new(config, proj);

    // smoothness term: d/dh σ(mean(h)) = σ'(·) / F
    let mut d_slc = Array2::zeros((n, f));
    for (i, mut row) in d_slc.rows_mut().into_iter().enumerate() {
        let s = pass.scores[i];
        row.fill(s * (1.0 - s) / (nf * f as f64));
    }
    // reconstruction term: d/dh ‖h − x‖ = (h − x)/‖h − x‖
    let mut d_gnn = &pass.h_scgnn - &x;
    for mut row in d_gnn.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm * nf;
        }
    }
    d_slc *= &pass.alpha;
    d_gnn *= &pass.alpha;

    let mut grads = params.zeros_like();
    let (g_slc, d_cat_slc) = params.slc_fusion.backward(&pass.slc.fusion, d_slc.view())?;
    let (g_gnn, d_cat_gnn) = params
        .ssgnn_fusion
        .backward(&pass.gnn.fusion, d_gnn.view())?;
    grads.slc_fusion = g_slc;
    grads.ssgnn_fusion = g_gnn;

    for t in 0..=params.hops() {
        let cols = s![.., t * h..(t + 1) * h];
        let mut d_hop = smoother.apply(g, d_cat_slc.slice(cols), t)?;

        let d_filtered = d_cat_gnn.slice(cols);
        let theta = &params.theta[t];
        let powers = &pass.gnn.powers[t];
        let mut cur = d_filtered.to_owned();
        for k in 0..=t {
            if k > 0 {
                cur = g.apply_laplacian(cur.view())?;
            }
            grads.theta[t][k] = (&d_filtered * &powers[k]).sum();
            d_hop.scaled_add(theta[k], &cur);
        }

        let (g_hop, _) = params.hop_mlps[t].backward(&pass.hops.caches[t], d_hop.view())?;
        grads.hop_mlps[t] = g_hop;
    }
    Ok(grads)
}

/// Forward pass and full gradient.
pub fn loss_and_gradient(
    g: &Graph,
    proj: &ConvergedProjector,
    params: &ModelParams,
    x: ArrayView2<f64>,
    config: &ModelConfig,
) -> Result<(ForwardPass, ModelParams)> {
    let pass = model_forward(g, proj, params, x, config)?;
    let grads = model_backward(g, proj, params, x, config, &pass)?;
    Ok((pass, grads))
}
