use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix};
use crate::error::{self, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Feed-forward network parameters.
///
/// `sizes[0]` is the input width and `sizes[L]` the output width; layer `l`
/// maps `sizes[l]` to `sizes[l + 1]` and applies `activations[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Gradient buffer aligned with an [`Mlp`]'s flat parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self { values: vec![0.0; net.param_count()] }
    }

    pub fn zero(&mut self) {
        self.values.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|g| *g *= s);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Intermediate values of a batched forward pass, kept for backprop and
/// forward-mode products.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `outputs[0]` is the input batch, `outputs[l + 1]` the output of layer `l`.
    outputs: Vec<Matrix>,
    /// Pre-activations per layer.
    pre: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("cache always holds the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.outputs[0]
    }
}

impl Mlp {
    /// Zero-initialized network.
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 {
            return error::config("an MLP needs at least an input and an output size");
        }
        if activations.len() != sizes.len() - 1 {
            return error::config(format!(
                "{} activations for {} layers",
                activations.len(),
                sizes.len() - 1
            ));
        }
        if sizes.iter().any(|&s| s == 0) {
            return error::config("layer sizes must be positive");
        }
        let count = Self::count_params(sizes);
        Ok(Self { sizes: sizes.to_vec(), activations: activations.to_vec(), params: vec![0.0; count] })
    }

    /// He-uniform initialization: weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`,
    /// biases zero. The last layer is additionally multiplied by `output_scale`.
    pub fn new(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_scale: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let layers = sizes.len().saturating_sub(1);
        let mut acts = vec![hidden; layers];
        if let Some(last) = acts.last_mut() {
            *last = output;
        }
        let mut net = Self::zeros(sizes, &acts)?;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let scale = if l + 1 == layers { output_scale } else { 1.0 };
            let (w, _) = net.layer_offsets(l);
            for p in &mut net.params[w..w + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit) * scale;
            }
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], activations: &[Activation], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        if params.len() != net.params.len() {
            return error::config(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            ));
        }
        net.params = params;
        Ok(net)
    }

    pub fn count_params(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated on construction")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return error::config("parameter length mismatch");
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes && self.activations == other.activations
    }

    /// Offsets of layer `l`'s weight block and bias block in the flat layout.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&x)?.into_data())
    }

    /// Batched forward pass over the rows of `x`.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut a = x.clone();
        for l in 0..self.num_layers() {
            let z = self.affine(l, &a);
            a = self.activate(l, &z);
        }
        debug_assert!(a.is_finite(), "non-finite network output");
        Ok(a)
    }

    pub fn forward_cached(&self, x: Matrix) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let mut outputs = Vec::with_capacity(self.num_layers() + 1);
        let mut pre = Vec::with_capacity(self.num_layers());
        outputs.push(x);
        for l in 0..self.num_layers() {
            let z = self.affine(l, outputs.last().unwrap());
            let a = self.activate(l, &z);
            pre.push(z);
            outputs.push(a);
        }
        debug_assert!(outputs.last().unwrap().is_finite(), "non-finite network output");
        Ok(ForwardCache { outputs, pre })
    }

    /// Reverse-mode pass. Accumulates `d loss / d params` (summed over the
    /// batch) into `grads` and returns `d loss / d input`.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Matrix, grads: &mut Gradients) -> Result<Matrix> {
        let batch = cache.input().rows();
        if output_grad.rows() != batch || output_grad.cols() != self.output_dim() {
            return error::config("output gradient shape does not match the forward batch");
        }
        if grads.values.len() != self.params.len() {
            return error::config("gradient buffer does not match the network");
        }
        let mut upstream = output_grad.clone();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let z = &cache.pre[l];
            let a = &cache.outputs[l + 1];
            let act = self.activations[l];
            let mut dz = upstream;
            if act != Activation::Identity {
                for ((d, &zv), &av) in dz.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                    *d *= act.derivative(zv, av);
                }
            }
            let (w_off, b_off) = self.layer_offsets(l);
            // dW (out x in) += dZ^T (out x batch) * A_prev (batch x in)
            gemm(
                n_out,
                batch,
                n_in,
                1.0,
                dz.data(),
                (1, n_out as isize),
                cache.outputs[l].data(),
                (n_in as isize, 1),
                1.0,
                &mut grads.values[w_off..w_off + n_in * n_out],
                (n_in as isize, 1),
            );
            let db = &mut grads.values[b_off..b_off + n_out];
            for r in 0..batch {
                for (g, d) in db.iter_mut().zip(dz.row(r)) {
                    *g += d;
                }
            }
            // dA_prev (batch x in) = dZ (batch x out) * W (out x in)
            let mut prev = Matrix::zeros(batch, n_in);
            gemm(
                batch,
                n_out,
                n_in,
                1.0,
                dz.data(),
                (n_out as isize, 1),
                &self.params[w_off..w_off + n_in * n_out],
                (n_in as isize, 1),
                0.0,
                prev.data_mut(),
                (n_in as isize, 1),
            );
            upstream = prev;
        }
        debug_assert!(grads.values.iter().all(|g| g.is_finite()), "non-finite gradient");
        Ok(upstream)
    }

    /// Forward-mode product: directional derivative of the batch outputs with
    /// respect to the parameters along `tangent`.
    pub fn jvp(&self, cache: &ForwardCache, tangent: &[f64]) -> Result<Matrix> {
        if tangent.len() != self.params.len() {
            return error::config("tangent length does not match the network");
        }
        let batch = cache.input().rows();
        let mut da = Matrix::zeros(batch, self.sizes[0]);
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let mut dz = Matrix::zeros(batch, n_out);
            for r in 0..batch {
                dz.row_mut(r).copy_from_slice(&tangent[b_off..b_off + n_out]);
            }
            // dZ += A_prev * dW^T
            gemm(
                batch,
                n_in,
                n_out,
                1.0,
                cache.outputs[l].data(),
                (n_in as isize, 1),
                &tangent[w_off..w_off + n_in * n_out],
                (1, n_in as isize),
                1.0,
                dz.data_mut(),
                (n_out as isize, 1),
            );
            if l > 0 {
                // dZ += dA_prev * W^T
                gemm(
                    batch,
                    n_in,
                    n_out,
                    1.0,
                    da.data(),
                    (n_in as isize, 1),
                    &self.params[w_off..w_off + n_in * n_out],
                    (1, n_in as isize),
                    1.0,
                    dz.data_mut(),
                    (n_out as isize, 1),
                );
            }
            let act = self.activations[l];
            if act != Activation::Identity {
                let z = &cache.pre[l];
                let a = &cache.outputs[l + 1];
                for ((d, &zv), &av) in dz.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                    *d *= act.derivative(zv, av);
                }
            }
            da = dz;
        }
        Ok(da)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.sizes[0] {
            return error::config(format!(
                "input width {} does not match network input {}",
                x.cols(),
                self.sizes[0]
            ));
        }
        Ok(())
    }

    fn affine(&self, l: usize, a: &Matrix) -> Matrix {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let (w_off, b_off) = self.layer_offsets(l);
        let batch = a.rows();
        let mut z = Matrix::zeros(batch, n_out);
        let bias = &self.params[b_off..b_off + n_out];
        for r in 0..batch {
            z.row_mut(r).copy_from_slice(bias);
        }
        gemm(
            batch,
            n_in,
            n_out,
            1.0,
            a.data(),
            (n_in as isize, 1),
            &self.params[w_off..w_off + n_in * n_out],
            (1, n_in as isize),
            1.0,
            z.data_mut(),
            (n_out as isize, 1),
        );
        z
    }

    fn activate(&self, l: usize, z: &Matrix) -> Matrix {
        let act = self.activations[l];
        let mut a = z.clone();
        if act != Activation::Identity {
            a.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn net(sizes: &[usize], seed: u64) -> Mlp {
        Mlp::new(sizes, Activation::Tanh, Activation::Identity, 1.0, &mut SeedTree::new(seed).rng()).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let m = Mlp::from_params(&[2, 2], &[Activation::Identity], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negative() {
        let m = Mlp::from_params(&[1, 1], &[Activation::Relu], vec![-1.0, 0.0]).unwrap();
        assert_eq!(m.forward(&[3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_matches_layer_by_layer_recomputation() {
        let m = net(&[3, 4, 2], 5);
        let x = [0.3, -1.2, 0.7];
        let p = m.params();
        let mut h = [0.0; 4];
        for (o, hv) in h.iter_mut().enumerate() {
            let z: f64 = (0..3).map(|i| p[o * 3 + i] * x[i]).sum::<f64>() + p[12 + o];
            *hv = z.tanh();
        }
        let expected: Vec<f64> = (0..2)
            .map(|o| (0..4).map(|i| p[16 + o * 4 + i] * h[i]).sum::<f64>() + p[24 + o])
            .collect();
        let got = m.forward(&x).unwrap();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_input_width_is_config_error() {
        let m = net(&[3, 2], 1);
        assert!(matches!(m.forward(&[1.0]), Err(crate::Error::Config(_))));
    }

    #[test]
    fn param_count_formula() {
        assert_eq!(Mlp::count_params(&[4, 500, 500, 3]), 4 * 500 + 500 + 500 * 500 + 500 + 500 * 3 + 3);
        assert_eq!(net(&[3, 5, 2], 0).param_count(), 3 * 5 + 5 + 5 * 2 + 2);
    }

    #[test]
    fn last_layer_bias_gradient_equals_output_grad_for_identity() {
        let m = net(&[3, 4, 2], 9);
        let cache = m.forward_cached(Matrix::from_vec(1, 3, vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        let mut g = Gradients::zeros_like(&m);
        let og = Matrix::from_vec(1, 2, vec![0.7, -1.3]).unwrap();
        m.backward(&cache, &og, &mut g).unwrap();
        let (_, b) = m.layer_offsets(1);
        assert_eq!(&g.values[b..b + 2], &[0.7, -1.3]);
    }

    #[test]
    fn jvp_matches_finite_difference() {
        let m = net(&[3, 6, 2], 2);
        let x = Matrix::from_rows(&[[0.5, -0.2, 1.0], [0.0, 0.3, -0.8]]).unwrap();
        let cache = m.forward_cached(x.clone()).unwrap();
        let mut rng = SeedTree::new(3).rng();
        let v: Vec<f64> = (0..m.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jv = m.jvp(&cache, &v).unwrap();
        let h = 1e-6;
        let shifted = |s: f64| {
            let p: Vec<f64> = m.params().iter().zip(&v).map(|(a, b)| a + s * b).collect();
            let mut n = m.clone();
            n.set_params(&p).unwrap();
            n.forward_batch(&x).unwrap()
        };
        let (plus, minus) = (shifted(h), shifted(-h));
        for i in 0..jv.data().len() {
            let fd = (plus.data()[i] - minus.data()[i]) / (2.0 * h);
            assert!((fd - jv.data()[i]).abs() < 1e-7, "{fd} vs {}", jv.data()[i]);
        }
    }
}
