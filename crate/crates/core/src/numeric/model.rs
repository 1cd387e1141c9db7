use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::par::{Exec, CHUNK_ROWS};
use crate::rng;

/// Smooth hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Softplus,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => {
                if z > 30.0 {
                    z
                } else {
                    z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Softplus => 1.0 / (1.0 + (-z).exp()),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Softplus => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Softplus),
            _ => None,
        }
    }
}

/// Which way the input gradient points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradSign {
    /// Gradient of `L`; stepping against it lowers the loss.
    Descent,
    /// Gradient of `-L`.
    Ascent,
}

/// One gradient tensor per parameter tensor, in parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.tensors.iter().map(|t| t.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.tensors.iter().map(Tensor::data).collect()
    }
}

/// Fully connected classifier: `layer_dims = [d, h_1, ..., K]`, smooth
/// activation on hidden layers, raw logits out. Parameters are stored as
/// `[w_0, b_0, w_1, b_1, ...]` with `w_l` shaped `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    layer_dims: Vec<usize>,
    params: Vec<Tensor>,
    activation: Activation,
    seed: u64,
}

struct Trace {
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl Classifier {
    /// Seeded Xavier-normal weights, zero biases.
    pub fn new(layer_dims: Vec<usize>, activation: Activation, seed: u64) -> Result<Self> {
        check_dims(&layer_dims)?;
        let mut rng = rng::seeded(seed);
        let mut params = Vec::with_capacity(2 * (layer_dims.len() - 1));
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
            params.push(Tensor::new(vec![fan_out, fan_in], w)?);
            params.push(Tensor::zeros(vec![fan_out]));
        }
        Ok(Self { layer_dims, params, activation, seed })
    }

    /// `[input, hidden..., classes]` convenience constructor.
    pub fn mlp(input: usize, hidden: &[usize], classes: usize, activation: Activation, seed: u64) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(classes);
        Self::new(dims, activation, seed)
    }

    pub fn zeros(layer_dims: Vec<usize>, activation: Activation) -> Result<Self> {
        check_dims(&layer_dims)?;
        let params = layer_dims
            .windows(2)
            .flat_map(|p| [Tensor::zeros(vec![p[1], p[0]]), Tensor::zeros(vec![p[1]])])
            .collect();
        Ok(Self { layer_dims, params, activation, seed: 0 })
    }

    pub fn from_parameters(layer_dims: Vec<usize>, activation: Activation, seed: u64, params: Vec<Tensor>) -> Result<Self> {
        check_dims(&layer_dims)?;
        let expected: Vec<Vec<usize>> =
            layer_dims.windows(2).flat_map(|p| [vec![p[1], p[0]], vec![p[1]]]).collect();
        let got: Vec<Vec<usize>> = params.iter().map(|t| t.shape().to_vec()).collect();
        if expected != got {
            return Err(Error::Dimension(format!("parameter shapes {got:?}, expected {expected:?}")));
        }
        Ok(Self { layer_dims, params, activation, seed })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.params.iter_mut().map(Tensor::data_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        if batch.cols() != self.input_dim() || batch.shape().len() < 2 {
            return Err(Error::Dimension(format!(
                "batch shape {:?} does not match model input dim {}",
                batch.shape(),
                self.input_dim()
            )));
        }
        Ok(batch.rows())
    }

    fn check_labels(&self, n: usize, labels: &[usize]) -> Result<()> {
        if labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} rows", labels.len())));
        }
        let k = self.num_classes();
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::Domain(format!("label {bad} out of range for {k} classes")));
        }
        Ok(())
    }

    fn forward_rows(&self, x: &[f64], n: usize) -> Trace {
        let layers = self.layer_dims.len() - 1;
        let mut pre = Vec::with_capacity(layers);
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for l in 0..layers {
            let (din, dout) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = self.params[2 * l].data();
            let b = self.params[2 * l + 1].data();
            let a = &acts[l];
            let mut z = vec![0.0; n * dout];
            for i in 0..n {
                let xi = &a[i * din..(i + 1) * din];
                let zi = &mut z[i * dout..(i + 1) * dout];
                for o in 0..dout {
                    let wo = &w[o * din..(o + 1) * din];
                    zi[o] = b[o] + dot(wo, xi);
                }
            }
            let out = if l + 1 < layers { z.iter().map(|&v| self.activation.apply(v)).collect() } else { z.clone() };
            pre.push(z);
            acts.push(out);
        }
        Trace { pre, acts }
    }

    /// Backpropagates `delta` (gradient w.r.t. logits) through one chunk.
    fn backward_rows(
        &self,
        trace: &Trace,
        n: usize,
        mut delta: Vec<f64>,
        want_params: bool,
        want_input: bool,
    ) -> (Vec<Vec<f64>>, Option<Vec<f64>>) {
        let layers = self.layer_dims.len() - 1;
        let mut grads: Vec<Vec<f64>> = if want_params {
            self.params.iter().map(|t| vec![0.0; t.len()]).collect()
        } else {
            Vec::new()
        };
        let mut dx = None;
        for l in (0..layers).rev() {
            let (din, dout) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = self.params[2 * l].data();
            let a_prev = &trace.acts[l];
            if want_params {
                let (gw, rest) = grads.split_at_mut(2 * l + 1);
                let gw = &mut gw[2 * l];
                let gb = &mut rest[0];
                for i in 0..n {
                    let di = &delta[i * dout..(i + 1) * dout];
                    let ai = &a_prev[i * din..(i + 1) * din];
                    for o in 0..dout {
                        let d = di[o];
                        gb[o] += d;
                        if d != 0.0 {
                            let row = &mut gw[o * din..(o + 1) * din];
                            for (g, &av) in row.iter_mut().zip(ai) {
                                *g += d * av;
                            }
                        }
                    }
                }
            }
            if l == 0 && !want_input {
                break;
            }
            let mut da = vec![0.0; n * din];
            for i in 0..n {
                let di = &delta[i * dout..(i + 1) * dout];
                let dai = &mut da[i * din..(i + 1) * din];
                for o in 0..dout {
                    let d = di[o];
                    if d != 0.0 {
                        for (g, &wv) in dai.iter_mut().zip(&w[o * din..(o + 1) * din]) {
                            *g += d * wv;
                        }
                    }
                }
            }
            if l == 0 {
                dx = Some(da);
            } else {
                let z = &trace.pre[l - 1];
                for (g, &zv) in da.iter_mut().zip(z) {
                    *g *= self.activation.derivative(zv);
                }
                delta = da;
            }
        }
        (grads, dx)
    }

    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward_with(batch, Exec::default())
    }

    /// Logits `[n, K]`.
    pub fn forward_with(&self, batch: &Tensor, exec: Exec) -> Result<Tensor> {
        let n = self.check_batch(batch)?;
        let d = self.input_dim();
        let parts = exec.map_chunks(n, CHUNK_ROWS, |s, e| {
            let mut trace = self.forward_rows(&batch.data()[s * d..e * d], e - s);
            trace.acts.pop().unwrap()
        });
        Tensor::new(vec![n, self.num_classes()], parts.concat())
    }

    /// Argmax class per row, lowest index on ties.
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        let logits = self.forward(batch)?;
        Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
    }

    /// Mean softmax cross-entropy.
    pub fn loss(&self, batch: &Tensor, labels: &[usize]) -> Result<f64> {
        softmax_ce_loss(&self.forward(batch)?, labels)
    }

    /// Cross-entropy of each row against its label.
    pub fn per_sample_losses(&self, batch: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
        let logits = self.forward(batch)?;
        self.check_labels(logits.rows(), labels)?;
        Ok((0..logits.rows()).map(|i| -log_softmax(logits.row(i))[labels[i]]).collect())
    }

    pub fn grad_params(&self, batch: &Tensor, labels: &[usize]) -> Result<Gradients> {
        Ok(self.loss_and_grad_with(batch, labels, Exec::default())?.1)
    }

    /// Mean cross-entropy and its gradient w.r.t. every parameter.
    pub fn loss_and_grad_with(&self, batch: &Tensor, labels: &[usize], exec: Exec) -> Result<(f64, Gradients)> {
        let n = self.check_batch(batch)?;
        self.check_labels(n, labels)?;
        if n == 0 {
            return Err(Error::Dimension("empty batch".into()));
        }
        let d = self.input_dim();
        let k = self.num_classes();
        let scale = 1.0 / n as f64;
        let parts = exec.map_chunks(n, CHUNK_ROWS, |s, e| {
            let m = e - s;
            let trace = self.forward_rows(&batch.data()[s * d..e * d], m);
            let logits = trace.acts.last().unwrap();
            let mut loss = 0.0;
            let mut delta = vec![0.0; m * k];
            for i in 0..m {
                let (l, g) = ce_row(&logits[i * k..(i + 1) * k], labels[s + i]);
                loss += l;
                for (dst, gv) in delta[i * k..(i + 1) * k].iter_mut().zip(g) {
                    *dst = gv * scale;
                }
            }
            let (grads, _) = self.backward_rows(&trace, m, delta, true, false);
            (loss, grads)
        });
        let mut total = 0.0;
        let mut acc: Vec<Vec<f64>> = self.params.iter().map(|t| vec![0.0; t.len()]).collect();
        for (loss, grads) in parts {
            total += loss;
            for (a, g) in acc.iter_mut().zip(grads) {
                for (x, y) in a.iter_mut().zip(g) {
                    *x += y;
                }
            }
        }
        let tensors = acc
            .into_iter()
            .zip(&self.params)
            .map(|(g, p)| Tensor::new(p.shape().to_vec(), g))
            .collect::<Result<Vec<_>>>()?;
        Ok((total * scale, Gradients { tensors }))
    }

    pub fn grad_input(&self, input: &Tensor, labels: &[usize], sign: GradSign) -> Result<Tensor> {
        Ok(self.input_loss_and_grad_with(input, labels, sign, Exec::default())?.1)
    }

    /// Per-row cross-entropy and the gradient of each row's own loss with
    /// respect to that row of the input. Parameters are treated as
    /// constants. `Ascent` negates the gradient.
    pub fn input_loss_and_grad_with(
        &self,
        input: &Tensor,
        labels: &[usize],
        sign: GradSign,
        exec: Exec,
    ) -> Result<(Vec<f64>, Tensor)> {
        let n = self.check_batch(input)?;
        self.check_labels(n, labels)?;
        let d = self.input_dim();
        let k = self.num_classes();
        let factor = match sign {
            GradSign::Descent => 1.0,
            GradSign::Ascent => -1.0,
        };
        let parts = exec.map_chunks(n, CHUNK_ROWS, |s, e| {
            let m = e - s;
            let trace = self.forward_rows(&input.data()[s * d..e * d], m);
            let logits = trace.acts.last().unwrap();
            let mut losses = Vec::with_capacity(m);
            let mut delta = vec![0.0; m * k];
            for i in 0..m {
                let (l, g) = ce_row(&logits[i * k..(i + 1) * k], labels[s + i]);
                losses.push(l);
                delta[i * k..(i + 1) * k].copy_from_slice(&g);
            }
            let (_, dx) = self.backward_rows(&trace, m, delta, false, true);
            let mut dx = dx.unwrap();
            if factor < 0.0 {
                dx.iter_mut().for_each(|v| *v = -*v);
            }
            (losses, dx)
        });
        let mut losses = Vec::with_capacity(n);
        let mut grad = Vec::with_capacity(n * d);
        for (l, g) in parts {
            losses.extend(l);
            grad.extend(g);
        }
        Ok((losses, Tensor::new(input.shape().to_vec(), grad)?))
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::Dimension(format!("invalid layer dims {layer_dims:?}")));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Loss and `softmax - onehot` for a single row.
fn ce_row(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let ls = log_softmax(logits);
    let mut g: Vec<f64> = ls.iter().map(|v| v.exp()).collect();
    g[label] -= 1.0;
    (-ls[label], g)
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Mean of `-log softmax(logits_i)[y_i]`.
pub fn softmax_ce_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let n = logits.rows();
    let k = logits.cols();
    if labels.len() != n || n == 0 {
        return Err(Error::Dimension(format!("{} labels for {n} logit rows", labels.len())));
    }
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Domain(format!("label {y} out of range for {k} classes")));
        }
        total -= log_softmax(logits.row(i))[y];
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model(k: usize) -> Classifier {
        let mut w = vec![0.0; k * k];
        for i in 0..k {
            w[i * k + i] = 1.0;
        }
        Classifier::from_parameters(
            vec![k, k],
            Activation::Tanh,
            0,
            vec![Tensor::new(vec![k, k], w).unwrap(), Tensor::zeros(vec![k])],
        )
        .unwrap()
    }

    /// Straight-line forward pass, written independently of `forward_rows`.
    fn reference_forward(m: &Classifier, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let layers = m.layer_dims().len() - 1;
        for l in 0..layers {
            let w = &m.params()[2 * l];
            let b = &m.params()[2 * l + 1];
            let (out, inp) = (w.shape()[0], w.shape()[1]);
            let mut z = vec![0.0; out];
            for o in 0..out {
                let mut s = b.data()[o];
                for i in 0..inp {
                    s += w.data()[o * inp + i] * a[i];
                }
                z[o] = if l + 1 < layers { s.tanh() } else { s };
            }
            a = z;
        }
        a
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = Classifier::zeros(vec![5, 7, 3], Activation::Tanh).unwrap();
        let x = Tensor::new(vec![2, 5], vec![0.3, -1.0, 2.0, 4.0, 0.1, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(m.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_maps_basis_vectors() {
        let m = identity_model(4);
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            let out = m.forward(&Tensor::new(vec![1, 4], e.clone()).unwrap()).unwrap();
            assert_eq!(out.data(), &e[..]);
        }
    }

    #[test]
    fn forward_matches_reference() {
        let m = Classifier::new(vec![6, 9, 5, 4], Activation::Tanh, 11).unwrap();
        let x: Vec<f64> = (0..6 * 40).map(|i| ((i * 37 % 17) as f64 - 8.0) / 5.0).collect();
        let batch = Tensor::new(vec![40, 6], x.clone()).unwrap();
        let logits = m.forward(&batch).unwrap();
        for i in 0..40 {
            let r = reference_forward(&m, &x[i * 6..(i + 1) * 6]);
            for (a, b) in logits.row(i).iter().zip(&r) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = Classifier::new(vec![3, 4, 2], Activation::Tanh, 0).unwrap();
        assert!(matches!(m.forward(&Tensor::zeros(vec![2, 4])), Err(Error::Dimension(_))));
    }

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        let logits = Tensor::zeros(vec![3, 4]);
        let l = softmax_ce_loss(&logits, &[0, 1, 3]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_logits_loss_vanishes() {
        let logits = Tensor::new(vec![1, 3], vec![0.0, 60.0, 0.0]).unwrap();
        assert!(softmax_ce_loss(&logits, &[1]).unwrap() < 1e-20);
    }

    #[test]
    fn loss_matches_high_precision_value() {
        // ln(1 + e^-1 + e^-2), evaluated at 50 digits with mpmath.
        let expected = 0.407_605_964_444_380_3;
        let logits = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        assert!((softmax_ce_loss(&logits, &[2]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn loss_rejects_out_of_range_label() {
        let logits = Tensor::zeros(vec![1, 3]);
        assert!(matches!(softmax_ce_loss(&logits, &[3]), Err(Error::Domain(_))));
    }

    #[test]
    fn duplicated_sample_gradient_equals_single() {
        let m = Classifier::new(vec![4, 6, 3], Activation::Tanh, 3).unwrap();
        let x = vec![0.2, -0.4, 1.1, 0.7];
        let single = m.grad_params(&Tensor::new(vec![1, 4], x.clone()).unwrap(), &[2]).unwrap();
        let double = m.grad_params(&Tensor::new(vec![2, 4], [x.clone(), x].concat()).unwrap(), &[2, 2]).unwrap();
        for (a, b) in single.tensors.iter().zip(&double.tensors) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }
    }

    #[test]
    fn input_gradient_sign_symmetry() {
        let m = Classifier::new(vec![5, 8, 4], Activation::Softplus, 9).unwrap();
        let x = Tensor::new(vec![2, 5], (0..10).map(|i| i as f64 * 0.1 - 0.5).collect()).unwrap();
        let d = m.grad_input(&x, &[1, 3], GradSign::Descent).unwrap();
        let a = m.grad_input(&x, &[1, 3], GradSign::Ascent).unwrap();
        for (p, q) in d.data().iter().zip(a.data()) {
            assert_eq!(*p, -*q);
        }
    }

    #[test]
    fn linear_input_gradient_in_weight_row_space() {
        // dL/dx = W^T (p - e_y) for a single linear layer.
        let w = vec![1.0, 2.0, 0.0, -1.0, 0.5, 3.0];
        let m = Classifier::from_parameters(
            vec![3, 2],
            Activation::Tanh,
            0,
            vec![Tensor::new(vec![2, 3], w.clone()).unwrap(), Tensor::new(vec![2], vec![0.1, -0.2]).unwrap()],
        )
        .unwrap();
        let x = Tensor::new(vec![1, 3], vec![0.3, -0.7, 0.2]).unwrap();
        let g = m.grad_input(&x, &[0], GradSign::Descent).unwrap();
        let p = softmax(m.forward(&x).unwrap().row(0));
        let c = [p[0] - 1.0, p[1]];
        for j in 0..3 {
            let expected = c[0] * w[j] + c[1] * w[3 + j];
            assert!((g.data()[j] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn convex_minimum_has_zero_gradient() {
        // Single linear layer, zero weights, biases at log class frequencies:
        // the softmax equals the empirical label distribution and the input is
        // all zeros, so the bias gradient vanishes and weight gradients are 0.
        let freq = [0.5f64, 0.25, 0.25];
        let b: Vec<f64> = freq.iter().map(|f| f.ln()).collect();
        let m = Classifier::from_parameters(
            vec![2, 3],
            Activation::Tanh,
            0,
            vec![Tensor::zeros(vec![3, 2]), Tensor::new(vec![3], b).unwrap()],
        )
        .unwrap();
        let x = Tensor::zeros(vec![4, 2]);
        let g = m.grad_params(&x, &[0, 0, 1, 2]).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let m = Classifier::new(vec![8, 16, 16, 5], Activation::Tanh, 5).unwrap();
        let x = Tensor::new(vec![100, 8], (0..800).map(|i| ((i % 23) as f64 - 11.0) / 7.0).collect()).unwrap();
        let y: Vec<usize> = (0..100).map(|i| i % 5).collect();
        let (ls, gs) = m.loss_and_grad_with(&x, &y, Exec::Sequential).unwrap();
        let (lp, gp) = m.loss_and_grad_with(&x, &y, Exec::Parallel).unwrap();
        assert_eq!(ls.to_bits(), lp.to_bits());
        assert_eq!(gs, gp);
    }
}
