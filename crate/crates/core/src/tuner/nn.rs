//! Small dense networks with hand-written backpropagation and Adam.
//!
//! Batches are row-major: one sample per row.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Tanh => z.mapv(f64::tanh),
            Activation::Identity => z.clone(),
        }
    }

    /// Multiplies `grad` in place by the derivative, given pre-activation
    /// `z` and activation `a`.
    fn backprop(self, grad: &mut Array2<f64>, z: &Array2<f64>, a: &Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(grad).and(z).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => Zip::from(grad).and(a).for_each(|g, &a| *g *= 1.0 - a * a),
            Activation::Identity => {}
        }
    }
}

/// Fully connected layer `y = x W^T + b`, `W` shaped `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

/// Intermediate values of a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of every layer, then the final output.
    acts: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("trace has an output")
    }
}

/// Parameter gradients, same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes` lists the width of every layer, input first. Hidden layers use
    /// fan-in scaled uniform initialisation; the output layer starts near
    /// zero.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = if i + 1 == n {
                    3e-3
                } else {
                    (1.0 / fan_in as f64).sqrt()
                };
                Dense {
                    w: Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound)),
                    b: Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Mlp {
            layers,
            hidden,
            output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Trace {
        let mut acts = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let z = acts.last().unwrap().dot(&l.w.t()) + &l.b;
            acts.push(self.activation(i).apply(&z));
            pre.push(z);
        }
        Trace { acts, pre }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let z = a.dot(&l.w.t()) + &l.b;
            a = self.activation(i).apply(&z);
        }
        a
    }

    /// Gradients of a scalar loss given `d loss / d output`; also returns
    /// `d loss / d input`.
    pub fn backward(&self, trace: &Trace, grad_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        let mut g = grad_out.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            self.activation(i)
                .backprop(&mut g, &trace.pre[i], &trace.acts[i + 1]);
            let w = g.t().dot(&trace.acts[i]);
            let b = g.sum_axis(Axis(0));
            g = g.dot(&self.layers[i].w);
            out.push(Dense { w, b });
        }
        out.reverse();
        (Grads { layers: out }, g)
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|p| *p = it.next().unwrap());
            l.b.iter_mut().for_each(|p| *p = it.next().unwrap());
        }
    }

    /// `self = tau * other + (1 - tau) * self`.
    pub fn blend_from(&mut self, other: &Mlp, tau: f64) {
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            Zip::from(&mut mine.w)
                .and(&theirs.w)
                .for_each(|a, &b| *a = tau * b + (1.0 - tau) * *a);
            Zip::from(&mut mine.b)
                .and(&theirs.b)
                .for_each(|a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
    }
}

impl Grads {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v
    }
}

/// Adam optimiser state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros: Vec<Dense> = net
            .layers
            .iter()
            .map(|l| Dense {
                w: Array2::zeros(l.w.raw_dim()),
                b: Array1::zeros(l.b.raw_dim()),
            })
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One descent step along `grads`.
    pub fn apply(&mut self, net: &mut Mlp, grads: &Grads) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let step = self.lr * c2.sqrt() / c1;
        let eps = self.eps;
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            Zip::from(&mut layer.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= step * *m / (v.sqrt() + eps);
                });
            Zip::from(&mut layer.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= step * *m / (v.sqrt() + eps);
                });
        }
    }
}
