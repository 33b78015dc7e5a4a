//! Minimal dense and 1-D convolution layers over flat `f64` parameter
//! vectors, with explicit reverse-mode gradients.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "slope")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    z
                } else {
                    a * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative from the pre-activation `z` and output `y`.
    #[inline]
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected stack. Parameters are laid out layer by layer as the
/// row-major weight matrix `(out x in)` followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

/// Pre- and post-activation values of one forward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("non-empty tape")
    }
}

impl Mlp {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Self {
        assert_eq!(sizes.len(), activations.len() + 1, "one activation per layer");
        Self { sizes, activations }
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Kaiming-normal weights (std `sqrt(2 / fan_in)`), zero biases.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for w in self.sizes.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                let z: f64 = StandardNormal.sample(rng);
                p.push(std * z);
            }
            p.extend(std::iter::repeat_n(0.0, w[1]));
        }
        p
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> MlpTape {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut pre = Vec::with_capacity(self.activations.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.activations.len() + 1);
        post.push(x.to_vec());
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (nin, nout) = (w[0], w[1]);
            let wm = &params[off..off + nin * nout];
            let b = &params[off + nin * nout..off + nin * nout + nout];
            off += nin * nout + nout;
            let a = &post[l];
            let z: Vec<f64> =
                (0..nout).map(|o| b[o] + wm[o * nin..(o + 1) * nin].iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>()).collect();
            let act = self.activations[l];
            let y = z.iter().map(|&zi| act.apply(zi)).collect();
            pre.push(z);
            post.push(y);
        }
        MlpTape { pre, post }
    }

    /// Back-propagate `dy` (gradient w.r.t. the output). Parameter gradients
    /// are accumulated into `dparams` when given; returns the input gradient.
    pub fn backward(&self, params: &[f64], tape: &MlpTape, dy: &[f64], mut dparams: Option<&mut [f64]>) -> Vec<f64> {
        let n_layers = self.activations.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta: Vec<f64> = dy.to_vec();
        for l in (0..n_layers).rev() {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activations[l];
            for o in 0..nout {
                delta[o] *= act.derivative(tape.pre[l][o], tape.post[l + 1][o]);
            }
            let off = offsets[l];
            let wm = &params[off..off + nin * nout];
            let a = &tape.post[l];
            if let Some(dp) = dparams.as_deref_mut() {
                for o in 0..nout {
                    let row = &mut dp[off + o * nin..off + (o + 1) * nin];
                    for i in 0..nin {
                        row[i] += delta[o] * a[i];
                    }
                    dp[off + nin * nout + o] += delta[o];
                }
            }
            let mut dx = vec![0.0; nin];
            for o in 0..nout {
                let row = &wm[o * nin..(o + 1) * nin];
                for i in 0..nin {
                    dx[i] += row[i] * delta[o];
                }
            }
            delta = dx;
        }
        delta
    }
}

/// One strided 1-D convolution layer. Windows that run past the end of the
/// input read zeros, so `out_len = ceil((len - kernel) / stride) + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Conv1d {
    pub fn n_params(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel + self.out_channels
    }

    pub fn out_len(&self, len: usize) -> usize {
        if len <= self.kernel {
            1
        } else {
            (len - self.kernel).div_ceil(self.stride) + 1
        }
    }

    #[inline]
    fn w_index(&self, o: usize, c: usize, k: usize) -> usize {
        (o * self.in_channels + c) * self.kernel + k
    }

    /// `x` is channel-major `(in_channels x len)`; returns `(out_channels x out_len)`.
    pub fn forward(&self, params: &[f64], x: &[f64], len: usize) -> Vec<f64> {
        let out_len = self.out_len(len);
        let bias_off = self.out_channels * self.in_channels * self.kernel;
        let mut y = vec![0.0; self.out_channels * out_len];
        for o in 0..self.out_channels {
            for p in 0..out_len {
                let mut acc = params[bias_off + o];
                for c in 0..self.in_channels {
                    for k in 0..self.kernel {
                        let idx = p * self.stride + k;
                        if idx < len {
                            acc += params[self.w_index(o, c, k)] * x[c * len + idx];
                        }
                    }
                }
                y[o * out_len + p] = acc;
            }
        }
        y
    }

    /// Accumulates parameter gradients (if requested) and returns `dx`.
    pub fn backward(&self, params: &[f64], x: &[f64], len: usize, dy: &[f64], dparams: Option<&mut [f64]>) -> Vec<f64> {
        let out_len = self.out_len(len);
        let bias_off = self.out_channels * self.in_channels * self.kernel;
        let mut dx = vec![0.0; self.in_channels * len];
        let mut dp = dparams;
        for o in 0..self.out_channels {
            for p in 0..out_len {
                let g = dy[o * out_len + p];
                if g == 0.0 {
                    continue;
                }
                if let Some(d) = dp.as_deref_mut() {
                    d[bias_off + o] += g;
                }
                for c in 0..self.in_channels {
                    for k in 0..self.kernel {
                        let idx = p * self.stride + k;
                        if idx < len {
                            let wi = self.w_index(o, c, k);
                            dx[c * len + idx] += params[wi] * g;
                            if let Some(d) = dp.as_deref_mut() {
                                d[wi] += x[c * len + idx] * g;
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let fan_in = (self.in_channels * self.kernel) as f64;
        let std = (2.0 / fan_in).sqrt();
        let mut p: Vec<f64> = (0..self.out_channels * self.in_channels * self.kernel)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            })
            .collect();
        p.extend(std::iter::repeat_n(0.0, self.out_channels));
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn fd_params<F: Fn(&[f64]) -> f64>(f: F, p: &[f64], eps: f64) -> Vec<f64> {
        (0..p.len())
            .map(|i| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[i] += eps;
                b[i] -= eps;
                (f(&a) - f(&b)) / (2.0 * eps)
            })
            .collect()
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for acts in [
            vec![Activation::LeakyRelu(0.01), Activation::LeakyRelu(0.01), Activation::Identity],
            vec![Activation::Relu, Activation::Tanh, Activation::Tanh],
        ] {
            let net = Mlp::new(vec![5, 7, 4, 2], acts);
            let p = net.init(&mut rng);
            let x: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.7).collect();
            let dy = [0.7, -1.3];
            let loss = |p: &[f64]| -> f64 { net.forward(p, &x).output().iter().zip(&dy).map(|(a, b)| a * b).sum() };
            let tape = net.forward(&p, &x);
            let mut dp = vec![0.0; p.len()];
            let dx = net.backward(&p, &tape, &dy, Some(&mut dp));
            for (a, b) in dp.iter().zip(fd_params(loss, &p, 1e-6)) {
                assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
            }
            let lx = |x: &[f64]| -> f64 { net.forward(&p, x).output().iter().zip(&dy).map(|(a, b)| a * b).sum() };
            for (a, b) in dx.iter().zip(fd_params(lx, &x, 1e-6)) {
                assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn conv_output_lengths() {
        let mk = |s| Conv1d { in_channels: 1, out_channels: 1, kernel: 4, stride: s };
        let mut len = 40;
        let mut lens = vec![];
        for s in [2, 2, 2, 1] {
            len = mk(s).out_len(len);
            lens.push(len);
        }
        assert_eq!(lens, vec![19, 9, 4, 1]);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let conv = Conv1d { in_channels: 3, out_channels: 2, kernel: 4, stride: 2 };
        let len = 9;
        let p = conv.init(&mut rng);
        let x: Vec<f64> = (0..3 * len).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
        let out_len = conv.out_len(len);
        let dy: Vec<f64> = (0..2 * out_len).map(|i| (i as f64 * 0.37).sin()).collect();
        let loss = |p: &[f64], x: &[f64]| -> f64 { conv.forward(p, x, len).iter().zip(&dy).map(|(a, b)| a * b).sum() };
        let mut dp = vec![0.0; p.len()];
        let dx = conv.backward(&p, &x, len, &dy, Some(&mut dp));
        for (a, b) in dp.iter().zip(fd_params(|q| loss(q, &x), &p, 1e-6)) {
            assert!((a - b).abs() < 1e-7);
        }
        for (a, b) in dx.iter().zip(fd_params(|q| loss(&p, q), &x, 1e-6)) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let net = Mlp::new(vec![10, 64, 64, 1], vec![Activation::LeakyRelu(0.01); 2].into_iter().chain([Activation::Identity]).collect());
        let p = vec![0.0; net.n_params()];
        assert_eq!(net.forward(&p, &[1.0; 10]).output(), &[0.0]);
    }
}
