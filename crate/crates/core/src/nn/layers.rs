//! Neural-network layers with hand-derived backward passes.
//!
//! There is no autodiff graph: each layer caches what its backward pass needs
//! during `forward_train` and the models compose layers in a fixed order.
//! `forward_eval` never mutates, so inference from a frozen model is pure.
//! Every backward implementation is validated against central finite
//! differences (see `gradcheck` and the crate's gradient tests).
//!
//! Shape mismatches are programming errors and panic; fallible validation
//! happens at the model boundary.

use super::rng::SeededRng;
use super::tensor::Tensor;

/// A trainable tensor paired with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Fully connected layer: `y = x W^T + b` with `W: [out, in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    cache_input: Option<Tensor>,
}

impl Linear {
    /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut w = Tensor::zeros(&[out_dim, in_dim]);
        for x in w.data_mut() {
            *x = rng.uniform_in(-bound, bound);
        }
        let mut b = Tensor::zeros(&[out_dim]);
        for x in b.data_mut() {
            *x = rng.uniform_in(-bound, bound);
        }
        Linear {
            weight: Param::new(w),
            bias: Param::new(b),
            cache_input: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let (batch, in_dim) = (x.shape()[0], x.shape()[1]);
        assert_eq!(in_dim, self.in_dim(), "linear input width");
        let out_dim = self.out_dim();
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let xs = x.data();
        let mut y = Tensor::zeros(&[batch, out_dim]);
        let ys = y.data_mut();
        for n in 0..batch {
            let xrow = &xs[n * in_dim..(n + 1) * in_dim];
            let yrow = &mut ys[n * out_dim..(n + 1) * out_dim];
            for o in 0..out_dim {
                let wrow = &w[o * in_dim..(o + 1) * in_dim];
                let mut acc = b[o];
                for i in 0..in_dim {
                    acc += wrow[i] * xrow[i];
                }
                yrow[o] = acc;
            }
        }
        y
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = self.forward_eval(x);
        self.cache_input = Some(x.clone());
        y
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self
            .cache_input
            .as_ref()
            .expect("linear backward without forward_train");
        let (batch, in_dim) = (x.shape()[0], x.shape()[1]);
        let out_dim = self.out_dim();
        assert_eq!(grad_out.shape(), &[batch, out_dim], "linear grad shape");

        let xs = x.data();
        let dys = grad_out.data();
        let w = self.weight.value.data();
        let mut dx = Tensor::zeros(&[batch, in_dim]);
        {
            let dxs = dx.data_mut();
            let dw = self.weight.grad.data_mut();
            let db = self.bias.grad.data_mut();
            for n in 0..batch {
                let xrow = &xs[n * in_dim..(n + 1) * in_dim];
                let dyrow = &dys[n * out_dim..(n + 1) * out_dim];
                let dxrow = &mut dxs[n * in_dim..(n + 1) * in_dim];
                for o in 0..out_dim {
                    let g = dyrow[o];
                    if g == 0.0 {
                        continue;
                    }
                    let wrow = &w[o * in_dim..(o + 1) * in_dim];
                    let dwrow = &mut dw[o * in_dim..(o + 1) * in_dim];
                    for i in 0..in_dim {
                        dxrow[i] += g * wrow[i];
                        dwrow[i] += g * xrow[i];
                    }
                    db[o] += g;
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// 2-D convolution over `[n, c, h, w]` with weight `[c_out, c_in, kh, kw]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub pad: usize,
    cache_input: Option<Tensor>,
}

impl Conv2d {
    /// Normal(0, 0.02) weights, zero bias.
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let mut w = Tensor::zeros(&[out_ch, in_ch, kernel.0, kernel.1]);
        for x in w.data_mut() {
            *x = 0.02 * rng.normal();
        }
        Conv2d {
            weight: Param::new(w),
            bias: Param::new(Tensor::zeros(&[out_ch])),
            stride,
            pad,
            cache_input: None,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let kh = self.weight.value.shape()[2];
        let kw = self.weight.value.shape()[3];
        (
            (h + 2 * self.pad - kh) / self.stride + 1,
            (w + 2 * self.pad - kw) / self.stride + 1,
        )
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let [n, ci, h, w] = x.shape() else {
            panic!("conv2d expects 4-d input, got {:?}", x.shape())
        };
        let (n, ci, h, w) = (*n, *ci, *h, *w);
        let [co, wci, kh, kw] = self.weight.value.shape() else {
            unreachable!()
        };
        let (co, wci, kh, kw) = (*co, *wci, *kh, *kw);
        assert_eq!(ci, wci, "conv2d channel mismatch");
        let (oh, ow) = self.output_hw(h, w);
        let (s, p) = (self.stride, self.pad as isize);

        let xs = x.data();
        let ws = self.weight.value.data();
        let bs = self.bias.value.data();
        let mut y = Tensor::zeros(&[n, co, oh, ow]);
        let ys = y.data_mut();
        for in_ in 0..n {
            for oc in 0..co {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bs[oc];
                        for ic in 0..ci {
                            for ky in 0..kh {
                                let iy = (oy * s) as isize + ky as isize - p;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let xbase = ((in_ * ci + ic) * h + iy as usize) * w;
                                let wbase = ((oc * ci + ic) * kh + ky) * kw;
                                for kx in 0..kw {
                                    let ix = (ox * s) as isize + kx as isize - p;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += ws[wbase + kx] * xs[xbase + ix as usize];
                                }
                            }
                        }
                        ys[((in_ * co + oc) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        y
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = self.forward_eval(x);
        self.cache_input = Some(x.clone());
        y
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self
            .cache_input
            .as_ref()
            .expect("conv2d backward without forward_train");
        let (n, ci, h, w) = (
            x.shape()[0],
            x.shape()[1],
            x.shape()[2],
            x.shape()[3],
        );
        let (co, kh, kw) = (
            self.weight.value.shape()[0],
            self.weight.value.shape()[2],
            self.weight.value.shape()[3],
        );
        let (oh, ow) = self.output_hw(h, w);
        assert_eq!(grad_out.shape(), &[n, co, oh, ow], "conv2d grad shape");
        let (s, p) = (self.stride, self.pad as isize);

        let xs = x.data();
        let dys = grad_out.data();
        let ws = self.weight.value.data();
        let mut dx = Tensor::zeros(&[n, ci, h, w]);
        {
            let dxs = dx.data_mut();
            let dws = self.weight.grad.data_mut();
            let dbs = self.bias.grad.data_mut();
            for in_ in 0..n {
                for oc in 0..co {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = dys[((in_ * co + oc) * oh + oy) * ow + ox];
                            if g == 0.0 {
                                continue;
                            }
                            dbs[oc] += g;
                            for ic in 0..ci {
                                for ky in 0..kh {
                                    let iy = (oy * s) as isize + ky as isize - p;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    let xbase = ((in_ * ci + ic) * h + iy as usize) * w;
                                    let wbase = ((oc * ci + ic) * kh + ky) * kw;
                                    for kx in 0..kw {
                                        let ix = (ox * s) as isize + kx as isize - p;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        dxs[xbase + ix as usize] += g * ws[wbase + kx];
                                        dws[wbase + kx] += g * xs[xbase + ix as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// 2-D transposed convolution over `[n, c, h, w]` with weight
/// `[c_in, c_out, kh, kw]`.
///
/// The forward pass is implemented as the exact adjoint of [`Conv2d`]'s
/// data path: with a shared weight tensor, `<conv(x), y> == <x, deconv(y)>`.
#[derive(Debug, Clone)]
pub struct Deconv2d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub pad: usize,
    cache_input: Option<Tensor>,
}

impl Deconv2d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let mut w = Tensor::zeros(&[in_ch, out_ch, kernel.0, kernel.1]);
        for x in w.data_mut() {
            *x = 0.02 * rng.normal();
        }
        Deconv2d {
            weight: Param::new(w),
            bias: Param::new(Tensor::zeros(&[out_ch])),
            stride,
            pad,
            cache_input: None,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let kh = self.weight.value.shape()[2];
        let kw = self.weight.value.shape()[3];
        (
            (h - 1) * self.stride + kh - 2 * self.pad,
            (w - 1) * self.stride + kw - 2 * self.pad,
        )
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let (n, ci, h, w) = (
            x.shape()[0],
            x.shape()[1],
            x.shape()[2],
            x.shape()[3],
        );
        let (wci, co, kh, kw) = (
            self.weight.value.shape()[0],
            self.weight.value.shape()[1],
            self.weight.value.shape()[2],
            self.weight.value.shape()[3],
        );
        assert_eq!(ci, wci, "deconv2d channel mismatch");
        let (oh, ow) = self.output_hw(h, w);
        let (s, p) = (self.stride, self.pad as isize);

        let xs = x.data();
        let ws = self.weight.value.data();
        let bs = self.bias.value.data();
        let mut y = Tensor::zeros(&[n, co, oh, ow]);
        {
            let ys = y.data_mut();
            for in_ in 0..n {
                for oc in 0..co {
                    let obase = (in_ * co + oc) * oh * ow;
                    for v in &mut ys[obase..obase + oh * ow] {
                        *v = bs[oc];
                    }
                }
                for ic in 0..ci {
                    for iy in 0..h {
                        for ix in 0..w {
                            let v = xs[((in_ * ci + ic) * h + iy) * w + ix];
                            if v == 0.0 {
                                continue;
                            }
                            for oc in 0..co {
                                let wbase = ((ic * co + oc) * kh) * kw;
                                let obase = (in_ * co + oc) * oh * ow;
                                for ky in 0..kh {
                                    let oy = (iy * s) as isize + ky as isize - p;
                                    if oy < 0 || oy >= oh as isize {
                                        continue;
                                    }
                                    let orow = obase + oy as usize * ow;
                                    for kx in 0..kw {
                                        let ox = (ix * s) as isize + kx as isize - p;
                                        if ox < 0 || ox >= ow as isize {
                                            continue;
                                        }
                                        ys[orow + ox as usize] +=
                                            ws[wbase + ky * kw + kx] * v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        y
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = self.forward_eval(x);
        self.cache_input = Some(x.clone());
        y
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self
            .cache_input
            .as_ref()
            .expect("deconv2d backward without forward_train");
        let (n, ci, h, w) = (
            x.shape()[0],
            x.shape()[1],
            x.shape()[2],
            x.shape()[3],
        );
        let (co, kh, kw) = (
            self.weight.value.shape()[1],
            self.weight.value.shape()[2],
            self.weight.value.shape()[3],
        );
        let (oh, ow) = self.output_hw(h, w);
        assert_eq!(grad_out.shape(), &[n, co, oh, ow], "deconv2d grad shape");
        let (s, p) = (self.stride, self.pad as isize);

        let xs = x.data();
        let dys = grad_out.data();
        let ws = self.weight.value.data();
        let mut dx = Tensor::zeros(&[n, ci, h, w]);
        {
            let dxs = dx.data_mut();
            let dws = self.weight.grad.data_mut();
            let dbs = self.bias.grad.data_mut();
            for in_ in 0..n {
                for oc in 0..co {
                    let obase = (in_ * co + oc) * oh * ow;
                    for v in &dys[obase..obase + oh * ow] {
                        dbs[oc] += v;
                    }
                }
                for ic in 0..ci {
                    for iy in 0..h {
                        for ix in 0..w {
                            let xv = xs[((in_ * ci + ic) * h + iy) * w + ix];
                            let mut acc = 0.0;
                            for oc in 0..co {
                                let wbase = ((ic * co + oc) * kh) * kw;
                                let obase = (in_ * co + oc) * oh * ow;
                                for ky in 0..kh {
                                    let oy = (iy * s) as isize + ky as isize - p;
                                    if oy < 0 || oy >= oh as isize {
                                        continue;
                                    }
                                    let orow = obase + oy as usize * ow;
                                    for kx in 0..kw {
                                        let ox = (ix * s) as isize + kx as isize - p;
                                        if ox < 0 || ox >= ow as isize {
                                            continue;
                                        }
                                        let g = dys[orow + ox as usize];
                                        acc += ws[wbase + ky * kw + kx] * g;
                                        dws[wbase + ky * kw + kx] += xv * g;
                                    }
                                }
                            }
                            dxs[((in_ * ci + ic) * h + iy) * w + ix] = acc;
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Per-channel batch normalization over `[n, c, h, w]`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Param::new(Tensor::full(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.value.shape()[0]
    }

    /// Training mode: normalize with batch statistics (biased variance) and
    /// update running statistics (unbiased variance, momentum 0.1).
    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let (n, c, h, w) = (
            x.shape()[0],
            x.shape()[1],
            x.shape()[2],
            x.shape()[3],
        );
        assert_eq!(c, self.channels(), "batchnorm channels");
        let m = (n * h * w) as f64;
        assert!(m > 1.0, "batchnorm needs more than one value per channel");

        let xs = x.data();
        let plane = h * w;
        let mut xhat = Tensor::zeros(x.shape());
        let mut inv_std = vec![0.0; c];
        let mut y = Tensor::zeros(x.shape());
        {
            let xh = xhat.data_mut();
            let ys = y.data_mut();
            let g = self.gamma.value.data();
            let b = self.beta.value.data();
            for ch in 0..c {
                let mut sum = 0.0;
                let mut sq = 0.0;
                for in_ in 0..n {
                    let base = (in_ * c + ch) * plane;
                    for &v in &xs[base..base + plane] {
                        sum += v;
                        sq += v * v;
                    }
                }
                let mean = sum / m;
                let var = (sq / m - mean * mean).max(0.0);
                let istd = 1.0 / (var + self.eps).sqrt();
                inv_std[ch] = istd;
                for in_ in 0..n {
                    let base = (in_ * c + ch) * plane;
                    for i in base..base + plane {
                        let xn = (xs[i] - mean) * istd;
                        xh[i] = xn;
                        ys[i] = g[ch] * xn + b[ch];
                    }
                }
                let unbiased = var * m / (m - 1.0);
                let rm = &mut self.running_mean.data_mut()[ch];
                *rm = (1.0 - self.momentum) * *rm + self.momentum * mean;
                let rv = &mut self.running_var.data_mut()[ch];
                *rv = (1.0 - self.momentum) * *rv + self.momentum * unbiased;
            }
        }
        self.cache = Some(BnCache { xhat, inv_std });
        y
    }

    /// Evaluation mode: normalize with running statistics.
    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let (n, c, h, w) = (
            x.shape()[0],
            x.shape()[1],
            x.shape()[2],
            x.shape()[3],
        );
        assert_eq!(c, self.channels(), "batchnorm channels");
        let plane = h * w;
        let xs = x.data();
        let mut y = Tensor::zeros(x.shape());
        {
            let ys = y.data_mut();
            let g = self.gamma.value.data();
            let b = self.beta.value.data();
            let rm = self.running_mean.data();
            let rv = self.running_var.data();
            for ch in 0..c {
                let istd = 1.0 / (rv[ch] + self.eps).sqrt();
                for in_ in 0..n {
                    let base = (in_ * c + ch) * plane;
                    for i in base..base + plane {
                        ys[i] = g[ch] * (xs[i] - rm[ch]) * istd + b[ch];
                    }
                }
            }
        }
        y
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let cache = self
            .cache
            .as_ref()
            .expect("batchnorm backward without forward_train");
        let (n, c, h, w) = (
            grad_out.shape()[0],
            grad_out.shape()[1],
            grad_out.shape()[2],
            grad_out.shape()[3],
        );
        let plane = h * w;
        let m = (n * plane) as f64;

        let dys = grad_out.data();
        let xh = cache.xhat.data();
        let mut dx = Tensor::zeros(grad_out.shape());
        {
            let dxs = dx.data_mut();
            let g = self.gamma.value.data();
            let dg = self.gamma.grad.data_mut();
            let db = self.beta.grad.data_mut();
            for ch in 0..c {
                let mut sum_dy = 0.0;
                let mut sum_dy_xhat = 0.0;
                for in_ in 0..n {
                    let base = (in_ * c + ch) * plane;
                    for i in base..base + plane {
                        sum_dy += dys[i];
                        sum_dy_xhat += dys[i] * xh[i];
                    }
                }
                dg[ch] += sum_dy_xhat;
                db[ch] += sum_dy;
                let scale = g[ch] * cache.inv_std[ch] / m;
                for in_ in 0..n {
                    let base = (in_ * c + ch) * plane;
                    for i in base..base + plane {
                        dxs[i] = scale * (m * dys[i] - sum_dy - xh[i] * sum_dy_xhat);
                    }
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

/// Elementwise activation kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

/// Stateless elementwise activation with cached forward values.
#[derive(Debug, Clone)]
pub struct ActivationLayer {
    pub kind: Activation,
    /// For Relu/LeakyRelu the cached input; for Sigmoid the cached output.
    cache: Option<Tensor>,
}

impl ActivationLayer {
    pub fn new(kind: Activation) -> Self {
        ActivationLayer { kind, cache: None }
    }

    pub fn apply_scalar(kind: Activation, x: f64) -> f64 {
        match kind {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        let kind = self.kind;
        for v in y.data_mut() {
            *v = Self::apply_scalar(kind, *v);
        }
        y
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = self.forward_eval(x);
        self.cache = Some(match self.kind {
            Activation::Sigmoid => y.clone(),
            _ => x.clone(),
        });
        y
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let cache = self
            .cache
            .as_ref()
            .expect("activation backward without forward_train");
        assert_eq!(cache.shape(), grad_out.shape(), "activation grad shape");
        let mut dx = grad_out.clone();
        match self.kind {
            Activation::Relu => {
                for (d, &x) in dx.data_mut().iter_mut().zip(cache.data()) {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            Activation::LeakyRelu(slope) => {
                for (d, &x) in dx.data_mut().iter_mut().zip(cache.data()) {
                    if x <= 0.0 {
                        *d *= slope;
                    }
                }
            }
            Activation::Sigmoid => {
                for (d, &y) in dx.data_mut().iter_mut().zip(cache.data()) {
                    *d *= y * (1.0 - y);
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> SeededRng {
        SeededRng::new(3)
    }

    #[test]
    fn linear_identity_passthrough() {
        let mut lin = Linear::new(3, 3, &mut rng());
        lin.weight.value.fill(0.0);
        for i in 0..3 {
            lin.weight.value.data_mut()[i * 3 + i] = 1.0;
        }
        lin.bias.value.fill(0.0);
        let x = Tensor::from_vec(&[1, 3], vec![0.5, -2.0, 7.25]);
        let y = lin.forward_eval(&x);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn activation_closed_forms() {
        assert_eq!(ActivationLayer::apply_scalar(Activation::Sigmoid, 0.0), 0.5);
        let leaky = ActivationLayer::apply_scalar(Activation::LeakyRelu(0.2), -1.0);
        assert!((leaky + 0.2).abs() < 1e-15);
        assert_eq!(ActivationLayer::apply_scalar(Activation::Relu, -3.0), 0.0);
    }

    #[test]
    fn conv_all_ones_sums_window() {
        let mut conv = Conv2d::new(1, 1, (3, 3), 1, 0, &mut rng());
        conv.weight.value.fill(1.0);
        conv.bias.value.fill(0.0);
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv.forward_eval(&x);
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert!((y.data()[0] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn deconv_is_adjoint_of_conv() {
        let mut r = rng();
        let mut conv = Conv2d::new(2, 3, (4, 4), 2, 1, &mut r);
        conv.bias.value.fill(0.0);
        // Same weight tensor reinterpreted in the transposed layout.
        let mut deconv = Deconv2d::new(3, 2, (4, 4), 2, 1, &mut r);
        deconv.bias.value.fill(0.0);
        let w = conv.weight.value.clone();
        // conv weight [co=3, ci=2, 4, 4] maps to deconv weight [ic=3, oc=2, 4, 4]
        // by swapping the leading axes.
        let mut dw = Tensor::zeros(&[3, 2, 4, 4]);
        for co in 0..3 {
            for ci in 0..2 {
                for k in 0..16 {
                    dw.data_mut()[(co * 2 + ci) * 16 + k] =
                        w.data()[(co * 2 + ci) * 16 + k];
                }
            }
        }
        deconv.weight.value = dw;

        let mut x = Tensor::zeros(&[1, 2, 8, 8]);
        r.fill_normal(x.data_mut());
        let mut y = Tensor::zeros(&[1, 3, 4, 4]);
        r.fill_normal(y.data_mut());

        let cx = conv.forward_eval(&x);
        let dy = deconv.forward_eval(&y);
        let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0),
            "adjoint mismatch {lhs} vs {rhs}"
        );
    }

    #[test]
    fn batchnorm_normalizes_in_training_mode() {
        let mut bn = BatchNorm2d::new(2);
        let mut x = Tensor::zeros(&[4, 2, 3, 3]);
        let mut r = rng();
        for v in x.data_mut() {
            *v = 5.0 + 2.0 * r.normal();
        }
        let y = bn.forward_train(&x);
        let plane = 9;
        for ch in 0..2 {
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut cnt = 0.0;
            for n in 0..4 {
                let base = (n * 2 + ch) * plane;
                for &v in &y.data()[base..base + plane] {
                    sum += v;
                    sq += v * v;
                    cnt += 1.0;
                }
            }
            let mean = sum / cnt;
            let var = sq / cnt - mean * mean;
            assert!(mean.abs() < 1e-10, "channel {ch} mean {mean}");
            assert!((var - 1.0).abs() < 1e-5, "channel {ch} var {var}");
        }
    }
}
