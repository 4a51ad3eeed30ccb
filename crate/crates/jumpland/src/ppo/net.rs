//! Small dense networks in f32: an ELU multilayer perceptron with manual
//! backpropagation and an Adam optimizer. Single-threaded and deterministic
//! for a fixed seed.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn elu(z: f32) -> f32 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

fn elu_grad(z: f32) -> f32 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

/// One dense layer with gradient and Adam moment buffers.
#[derive(Debug, Clone)]
pub struct Linear {
    /// Weights, shape (out, in).
    pub w: Array2<f32>,
    pub b: Array1<f32>,
    pub gw: Array2<f32>,
    pub gb: Array1<f32>,
    mw: Array2<f32>,
    vw: Array2<f32>,
    mb: Array1<f32>,
    vb: Array1<f32>,
}

impl Linear {
    fn new(n_in: usize, n_out: usize, scale: f32, rng: &mut ChaCha8Rng) -> Self {
        // Kaiming-style uniform fan-in initialization.
        let bound = scale * (1.0 / n_in as f32).sqrt();
        let w = Array2::from_shape_fn((n_out, n_in), |_| rng.gen_range(-bound..bound));
        Self {
            w,
            b: Array1::zeros(n_out),
            gw: Array2::zeros((n_out, n_in)),
            gb: Array1::zeros(n_out),
            mw: Array2::zeros((n_out, n_in)),
            vw: Array2::zeros((n_out, n_in)),
            mb: Array1::zeros(n_out),
            vb: Array1::zeros(n_out),
        }
    }
}

/// Multilayer perceptron with ELU hidden activations and a linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub sizes: Vec<usize>,
}

/// Per-layer activations cached by a training forward pass.
pub struct MlpCache {
    /// Input to each layer, shape (batch, n_in).
    inputs: Vec<Array2<f32>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array2<f32>>,
}

impl Mlp {
    /// `output_scale` shrinks the last layer's initialization (useful for a
    /// near-zero initial policy mean).
    pub fn new(sizes: &[usize], output_scale: f32, rng: &mut ChaCha8Rng) -> Self {
        assert!(sizes.len() >= 2);
        let mut layers = Vec::new();
        for i in 0..sizes.len() - 1 {
            let scale = if i == sizes.len() - 2 { output_scale } else { 1.0 };
            layers.push(Linear::new(sizes[i], sizes[i + 1], scale, rng));
        }
        Self { layers, sizes: sizes.to_vec() }
    }

    /// Inference pass, batch rows in `x`.
    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w.t());
            z += &layer.b;
            if i < last {
                z.mapv_inplace(elu);
            }
            h = z;
        }
        h
    }

    /// Forward pass that caches activations for `backward`.
    pub fn forward_train(&self, x: &Array2<f32>) -> (Array2<f32>, MlpCache) {
        let mut cache = MlpCache { inputs: Vec::new(), pre: Vec::new() };
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            cache.inputs.push(h.clone());
            let mut z = h.dot(&layer.w.t());
            z += &layer.b;
            if i < last {
                cache.pre.push(z.clone());
                z.mapv_inplace(elu);
            }
            h = z;
        }
        (h, cache)
    }

    /// Accumulate parameter gradients for the batch output gradient `dy`.
    pub fn backward(&mut self, cache: &MlpCache, dy: &Array2<f32>) {
        let mut grad = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i < self.layers.len() - 1 {
                // Through the ELU of layer i.
                let mut gz = cache.pre[i].clone();
                gz.mapv_inplace(elu_grad);
                grad = &grad * &gz;
            }
            let input = &cache.inputs[i];
            self.layers[i].gw += &grad.t().dot(input);
            self.layers[i].gb += &grad.sum_axis(Axis(0));
            if i > 0 {
                grad = grad.dot(&self.layers[i].w);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            l.gw.fill(0.0);
            l.gb.fill(0.0);
        }
    }

    pub fn grad_sq_norm(&self) -> f32 {
        self.layers
            .iter()
            .map(|l| {
                l.gw.iter().map(|g| g * g).sum::<f32>() + l.gb.iter().map(|g| g * g).sum::<f32>()
            })
            .sum()
    }

    pub fn scale_grads(&mut self, s: f32) {
        for l in &mut self.layers {
            l.gw.mapv_inplace(|g| g * s);
            l.gb.mapv_inplace(|g| g * s);
        }
    }

    /// One Adam step on all layers; `t` is the 1-based update count.
    pub fn adam_step(&mut self, lr: f32, t: u64) {
        let (b1, b2, eps) = (0.9f32, 0.999f32, 1e-8f32);
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        for l in &mut self.layers {
            ndarray::Zip::from(&mut l.w)
                .and(&l.gw)
                .and(&mut l.mw)
                .and(&mut l.vw)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
            ndarray::Zip::from(&mut l.b)
                .and(&l.gb)
                .and(&mut l.mb)
                .and(&mut l.vb)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
        }
    }

    /// All parameters flattened (weights row-major, then biases, per layer).
    pub fn flatten(&self) -> Vec<f32> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Load parameters produced by `flatten`.
    pub fn load_flat(&mut self, data: &[f32]) -> Result<(), String> {
        if data.len() != self.param_count() {
            return Err(format!(
                "parameter count mismatch: expected {}, got {}",
                self.param_count(),
                data.len()
            ));
        }
        let mut off = 0;
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = data[off];
                off += 1;
            }
            for b in l.b.iter_mut() {
                *b = data[off];
                off += 1;
            }
        }
        Ok(())
    }
}
