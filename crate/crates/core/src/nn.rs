//! Dense MLPs with hand-written backpropagation, Adam, and a
//! central-difference gradient checker.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gradients whose magnitude is below this are compared absolutely by
/// [`gradient_check`].
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Flat access to every trainable scalar, in a fixed order.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut count = 0;
        self.visit(&mut |s| count += s.len());
        count
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }

    fn set_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |s| {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        });
        assert_eq!(offset, values.len(), "flat parameter length mismatch");
    }
}

/// Affine map `y = xW + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    pub fn gaussian<R: Rng + ?Sized>(input: usize, output: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
        Self {
            weight: Array2::from_shape_simple_fn((input, output), || normal.sample(rng)),
            bias: Array1::zeros(output),
        }
    }
}

/// Multi-layer perceptron: rectifier between layers, identity on output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Linear>,
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each hidden layer.
    pre: Vec<Array2<f64>>,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

impl Mlp {
    /// Builds an MLP through `widths` (input, hidden..., output) with
    /// Gaussian weights of standard deviation `std` and zero biases.
    pub fn gaussian<R: Rng + ?Sized>(widths: &[usize], std: f64, rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .map(|w| Linear::gaussian(w[0], w[1], std, rng))
            .collect();
        Self { layers }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .map(|w| Linear::zeros(w[0], w[1]))
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Linear>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "an MLP needs at least one layer".into(),
            ));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.ncols() {
                return Err(Error::shape("mlp bias", l.weight.ncols(), l.bias.len()));
            }
            if i > 0 && layers[i - 1].weight.ncols() != l.weight.nrows() {
                return Err(Error::shape(
                    "mlp layer chain",
                    layers[i - 1].weight.ncols(),
                    l.weight.nrows(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.ncols()
    }

    /// Zeroed copy with the same shapes, used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Linear::zeros(l.weight.nrows(), l.weight.ncols()))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if x.ncols() != self.input_width() {
            return Err(Error::shape("mlp input", self.input_width(), x.ncols()));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut cur = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = cur.dot(&layer.weight);
            z += &layer.bias;
            inputs.push(cur);
            if i < last {
                cur = z.mapv(relu);
                pre.push(z);
            } else {
                cur = z;
            }
        }
        Ok((cur, MlpCache { inputs, pre }))
    }

    /// Reverse-mode gradients: returns parameter gradients (same shapes
    /// as `self`) and the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(Mlp, Array2<f64>)> {
        let rows = cache.inputs[0].nrows();
        if upstream.dim() != (rows, self.output_width()) {
            return Err(Error::shape(
                "mlp upstream gradient",
                format!("{rows}x{}", self.output_width()),
                format!("{}x{}", upstream.nrows(), upstream.ncols()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i < self.layers.len() - 1 {
                delta.zip_mut_with(&cache.pre[i], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            let weight = cache.inputs[i]
                .t()
                .dot(&delta)
                .as_standard_layout()
                .into_owned();
            let bias = delta.sum_axis(Axis(0));
            let next = delta.dot(&layer.weight.t());
            grads.push(Linear { weight, bias });
            delta = next;
        }
        grads.reverse();
        Ok((Mlp { layers: grads }, delta))
    }
}

impl Parameters for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for l in &self.layers {
            f(l.weight.as_slice().expect("standard layout"));
            f(l.bias.as_slice().expect("standard layout"));
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(l.weight.as_slice_mut().expect("standard layout"));
            f(l.bias.as_slice_mut().expect("standard layout"));
        }
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, num_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. Non-finite gradients abort without
    /// touching the parameters or the state.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = grads.to_flat();
        if g.len() != self.first.len() {
            return Err(Error::shape("adam gradients", self.first.len(), g.len()));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut p = params.to_flat();
        for (i, (p, &g)) in p.iter_mut().zip(&g).enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        params.set_flat(&p);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: usize,
    pub checked: usize,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `f` at `params`.
///
/// The relative error of coordinate `i` is
/// `|a_i − n_i| / max(|a_i|, |n_i|, GRAD_CHECK_FLOOR)`.
pub fn gradient_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    step: f64,
    tol: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut p = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        checked: params.len(),
        passed: true,
    };
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let plus = f(&p);
        p[i] = orig - step;
        let minus = f(&p);
        p[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        if !(rel <= report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        report.max_abs_error = report.max_abs_error.max(abs);
    }
    report.passed = report.max_rel_error < tol;
    report
}
