//! Smoothing diagnostics: how node signals approach the converged state.
//!
//! These are the quantities the model is built around, exposed as
//! standalone tools: per-node distance-to-convergence curves, Dirichlet and
//! spectral energy, the ε-smoothing hop bound, the second eigenvalue of the
//! propagation operator, and the personalized-PageRank (APPNP) smoothing
//! process used by the alternative model variant.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dense_laplacian, ConvergedProjector, Graph};

/// Largest graph [`spectral_energy`] will eigendecompose densely.
pub const SPECTRAL_CAP: usize = 2048;

/// Floor on the initial distance used to normalize distance curves.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeans {
    pub anomalous: Array1<f64>,
    pub normal: Array1<f64>,
}

impl ClassMeans {
    /// Trapezoidal area between the anomalous and normal curves over hops
    /// (unit spacing), signed.
    pub fn area_gap(&self) -> f64 {
        let diff = &self.anomalous - &self.normal;
        let n = diff.len();
        if n < 2 {
            return 0.0;
        }
        diff.sum() - 0.5 * (diff[0] + diff[n - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCurves {
    /// `n × (T + 1)` normalized distances.
    pub per_node: Array2<f64>,
    /// Mean curve over all nodes.
    pub mean: Array1<f64>,
    /// Present when labels were supplied and both classes are non-empty.
    pub class_means: Option<ClassMeans>,
}

fn row_norms(m: &Array2<f64>) -> Array1<f64> {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

fn class_means(per_node: &Array2<f64>, labels: &[u8]) -> Option<ClassMeans> {
    let pick = |class: u8| {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            None
        } else {
            Some(
                per_node
                    .select(Axis(0), &rows)
                    .mean_axis(Axis(0))
                    .expect("non-empty"),
            )
        }
    };
    Some(ClassMeans {
        anomalous: pick(1)?,
        normal: pick(0)?,
    })
}

fn curves_from_distances(per_node: Array2<f64>, labels: Option<&[u8]>) -> DistanceCurves {
    let mean = per_node.mean_axis(Axis(0)).expect("n > 0");
    let class_means = labels.and_then(|l| class_means(&per_node, l));
    DistanceCurves {
        per_node,
        mean,
        class_means,
    }
}

fn normalize_rows(raw: &mut Array2<f64>) {
    for mut row in raw.rows_mut() {
        let scale = row[0].max(DISTANCE_FLOOR);
        row.mapv_inplace(|v| v / scale);
    }
}

fn check_labels(labels: Option<&[u8]>, n: usize) -> Result<()> {
    match labels {
        Some(l) if l.len() != n => Err(Error::shape("labels", n, l.len())),
        _ => Ok(()),
    }
}

/// Per-node distance from the converged representation across hops,
/// `‖(BᵗX)_i‖ / max(‖(B⁰X)_i‖, δ)` for `t = 0..=T`, with class-mean curves
/// when labels are given.
pub fn smoothing_distance_curves(
    g: &Graph,
    proj: &ConvergedProjector,
    x: ArrayView2<f64>,
    max_hop: usize,
    labels: Option<&[u8]>,
) -> Result<DistanceCurves> {
    if max_hop < 1 {
        return Err(Error::InvalidArgument(
            "distance curves need at least one hop".into(),
        ));
    }
    check_labels(labels, g.n())?;
    let converged = proj.apply(x)?;
    let mut raw = Array2::zeros((g.n(), max_hop + 1));
    let mut cur = x.to_owned();
    for t in 0..=max_hop {
        if t > 0 {
            cur = g.apply_propagation(cur.view())?;
        }
        raw.column_mut(t).assign(&row_norms(&(&cur - &converged)));
    }
    normalize_rows(&mut raw);
    Ok(curves_from_distances(raw, labels))
}

/// Same as [`smoothing_distance_curves`] for the APPNP process: distances
/// `‖(Zᵗ − Z^∞)_i‖`, normalized by the `t = 0` distance.
pub fn appnp_distance_curves(
    g: &Graph,
    x: ArrayView2<f64>,
    opts: &AppnpOptions,
    max_hop: usize,
    labels: Option<&[u8]>,
) -> Result<DistanceCurves> {
    if max_hop < 1 {
        return Err(Error::InvalidArgument(
            "distance curves need at least one hop".into(),
        ));
    }
    check_labels(labels, g.n())?;
    let zinf = appnp_converged(g, x, opts.alpha, opts.tol, opts.max_iter)?;
    let mut raw = Array2::zeros((g.n(), max_hop + 1));
    let mut z = x.to_owned();
    for t in 0..=max_hop {
        if t > 0 {
            z = appnp_step(g, z.view(), x, opts.alpha)?;
        }
        raw.column_mut(t).assign(&row_norms(&(&z - &zinf)));
    }
    normalize_rows(&mut raw);
    Ok(curves_from_distances(raw, labels))
}

/// Dirichlet energy `xᵀLx`.
pub fn dirichlet_energy(g: &Graph, x: ArrayView1<f64>) -> Result<f64> {
    if x.len() != g.n() {
        return Err(Error::shape("dirichlet energy signal", g.n(), x.len()));
    }
    Ok(x.dot(&g.apply_laplacian_vec(x)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    /// Ascending Laplacian eigenvalues.
    pub eigenvalues: Array1<f64>,
    /// Share of the signal's energy at each eigenvalue; sums to 1.
    pub mass: Array1<f64>,
}

impl EnergySpectrum {
    /// `Σ λ_k · mass_k`, the Rayleigh quotient of the signal.
    pub fn mean_eigenvalue(&self) -> f64 {
        self.eigenvalues.dot(&self.mass)
    }
}

/// Dense eigendecomposition of `L`: ascending eigenvalues and the matching
/// orthonormal eigenvectors as columns.
pub fn laplacian_eigen(g: &Graph, cap: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = g.n();
    if n > cap {
        return Err(Error::DenseCap { n, cap });
    }
    let l = dense_laplacian(g);
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (l[[i, j]] + l[[j, i]]));
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, c)| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}

/// Normalized spectral energy of `x` over the Laplacian eigenbasis.
pub fn spectral_energy(g: &Graph, x: ArrayView1<f64>) -> Result<EnergySpectrum> {
    if x.len() != g.n() {
        return Err(Error::shape("spectral energy signal", g.n(), x.len()));
    }
    let norm2 = x.dot(&x);
    if norm2 == 0.0 {
        return Err(Error::InvalidArgument(
            "spectral energy of a zero signal".into(),
        ));
    }
    let (eigenvalues, vectors) = laplacian_eigen(g, SPECTRAL_CAP)?;
    let coeffs = vectors.t().dot(&x);
    let energy = coeffs.mapv(|c| c * c);
    let total = energy.sum();
    Ok(EnergySpectrum {
        eigenvalues,
        mass: energy / total,
    })
}

/// Distance of `X` to the converged subspace, `‖X − φφᵀX‖_F`.
pub fn subspace_distance(proj: &ConvergedProjector, x: ArrayView2<f64>) -> Result<f64> {
    let diff = &x - &proj.apply(x)?;
    Ok(diff.iter().map(|v| v * v).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopBound {
    pub hops: usize,
    /// The signal was already within `eps` of the subspace (`eps ≥ d0`).
    pub already_smooth: bool,
}

/// Hop count after which a signal at subspace distance `d0`, contracted by
/// `tau · lam` per hop, is guaranteed within `eps`:
/// `⌈log(eps / d0) / log(tau · lam)⌉`.
pub fn epsilon_smoothing_hop(eps: f64, d0: f64, tau: f64, lam: f64) -> Result<HopBound> {
    if !(eps > 0.0) || !d0.is_finite() || d0 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need eps > 0 and d0 >= 0, got eps={eps}, d0={d0}"
        )));
    }
    let rate = tau * lam;
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "contraction rate tau*lambda = {rate} must lie in [0, 1)"
        )));
    }
    if eps >= d0 {
        return Ok(HopBound {
            hops: 0,
            already_smooth: true,
        });
    }
    if rate == 0.0 {
        return Ok(HopBound {
            hops: 1,
            already_smooth: false,
        });
    }
    let hops = ((eps / d0).ln() / rate.ln()).ceil() as usize;
    Ok(HopBound {
        hops,
        already_smooth: false,
    })
}

/// Second-largest eigenvalue of `P`, by power iteration on `B = P − φφᵀ`.
///
/// Expects an unthresholded projector (`eps = 0`) on a connected graph.
/// Iterates until successive Rayleigh quotients differ by less than `tol`.
pub fn second_eigenvalue(
    g: &Graph,
    proj: &ConvergedProjector,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = Array2::from_shape_simple_fn((n, 1), || rng.random_range(-1.0..1.0));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v /= norm;
    let mut estimate = f64::NAN;
    for _ in 0..max_iter {
        let y = g.apply_propagation(v.view())? - proj.apply(v.view())?;
        let rq = (&v * &y).sum();
        let y_norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        if y_norm == 0.0 {
            return Ok(0.0);
        }
        if (rq - estimate).abs() < tol {
            return Ok(rq);
        }
        estimate = rq;
        v = y / y_norm;
    }
    Err(Error::EigenNoConvergence {
        iterations: max_iter,
        estimate,
    })
}

/// Settings for the APPNP smoothing process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppnpOptions {
    /// Teleport probability in `(0, 1]`.
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl AppnpOptions {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            tol: 1e-8,
            max_iter: default_appnp_max_iter(alpha),
        }
    }
}

/// `50·⌈1/α⌉` iterations: enough for `(1 − α)^k` to fall below `1e-10`.
pub fn default_appnp_max_iter(alpha: f64) -> usize {
    if alpha > 0.0 {
        50 * (1.0 / alpha).ceil() as usize
    } else {
        0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "teleport probability must lie in (0, 1], got {alpha}"
        )))
    }
}

/// One update `Z ← (1 − α)ÂZ + αX`.
pub fn appnp_step(
    g: &Graph,
    z: ArrayView2<f64>,
    x: ArrayView2<f64>,
    alpha: f64,
) -> Result<Array2<f64>> {
    if z.dim() != x.dim() {
        return Err(Error::shape(
            "appnp step",
            format!("{:?}", x.dim()),
            format!("{:?}", z.dim()),
        ));
    }
    let mut next = g.apply_normalized_adjacency(z)?;
    next.zip_mut_with(&x, |o, &xi| *o = (1.0 - alpha) * *o + alpha * xi);
    Ok(next)
}

/// Fixed point `Z^∞ = α(I − (1 − α)Â)⁻¹X`, iterated from `Z⁰ = X` until
/// the Frobenius change drops below `tol`.
pub fn appnp_converged(
    g: &Graph,
    x: ArrayView2<f64>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Array2<f64>> {
    check_alpha(alpha)?;
    let mut z = x.to_owned();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = appnp_step(g, z.view(), x, alpha)?;
        residual = (&next - &z).iter().map(|v| v * v).sum::<f64>().sqrt();
        z = next;
        if residual < tol {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence {
        what: "APPNP fixed point",
        iterations: max_iter,
        residual,
    })
}

/// `Zᵗ − Z^∞` with `Z⁰ = X`.
pub fn appnp_deviation(
    g: &Graph,
    x: ArrayView2<f64>,
    alpha: f64,
    t: usize,
    zinf: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    check_alpha(alpha)?;
    if zinf.dim() != x.dim() {
        return Err(Error::shape(
            "appnp converged state",
            format!("{:?}", x.dim()),
            format!("{:?}", zinf.dim()),
        ));
    }
    let mut z = x.to_owned();
    for _ in 0..t {
        z = appnp_step(g, z.view(), x, alpha)?;
    }
    z -= &zinf;
    Ok(z)
}
