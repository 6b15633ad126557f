//! Convolutional GAN over one-channel bit canvases.
//!
//! Bit matrices are zero-padded onto a power-of-two canvas (default 32x32,
//! 64x32 for directive-bearing corpora). The generator upsamples a latent
//! vector through four transposed convolutions (batchnorm + ReLU on the
//! first three, sigmoid output); the discriminator mirrors it with four
//! convolutions (batchnorm + LeakyReLU 0.2, sigmoid output). Both losses are
//! the binary cross-entropy surrogate of the minimax objective, with the
//! non-saturating generator form, and separate Adam learning rates.
//!
//! Epoch trace entries record `loss` as d_loss + g_loss.

use serde::{Deserialize, Serialize};

use crate::codec::BitMatrix;
use crate::error::{Error, Result};
use crate::fidelity::{self, EpochTrace};
use crate::nn::{
    Activation, ActivationLayer, AdamState, BatchNorm2d, Conv2d, Deconv2d, Param, SeededRng,
    Tensor,
};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcganConfig {
    pub latent_dim: usize,
    pub feature_maps: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Padded (height, width); both divisible by 8.
    pub canvas: (usize, usize),
    /// Synthetic samples generated for each per-epoch evaluation.
    pub trace_samples: usize,
}

impl Default for DcganConfig {
    fn default() -> Self {
        DcganConfig {
            latent_dim: 100,
            feature_maps: 32,
            lr_generator: 7e-2,
            lr_discriminator: 1e-4,
            batch_size: 20,
            epochs: 150,
            seed: 0,
            canvas: (32, 32),
            trace_samples: 256,
        }
    }
}

impl DcganConfig {
    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be at least 1".into()));
        }
        if self.lr_generator <= 0.0 || self.lr_discriminator <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.feature_maps == 0 {
            return Err(Error::Config("feature_maps must be positive".into()));
        }
        let (h, w) = self.canvas;
        if h < 8 || w < 8 || h % 8 != 0 || w % 8 != 0 {
            return Err(Error::Config(format!(
                "canvas {h}x{w} must have both dimensions divisible by 8"
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch_size must be at least 2 for batch normalization".into(),
            ));
        }
        Ok(())
    }
}

/// Latent-to-canvas generator network.
#[derive(Debug, Clone)]
pub struct Generator {
    deconvs: Vec<Deconv2d>,
    bns: Vec<BatchNorm2d>,
    acts: Vec<ActivationLayer>,
    out_act: ActivationLayer,
    latent_dim: usize,
}

impl Generator {
    fn new(config: &DcganConfig, rng: &mut SeededRng) -> Self {
        let f = config.feature_maps;
        let (h, w) = config.canvas;
        let deconvs = vec![
            Deconv2d::new(config.latent_dim, 4 * f, (h / 8, w / 8), 1, 0, rng),
            Deconv2d::new(4 * f, 2 * f, (4, 4), 2, 1, rng),
            Deconv2d::new(2 * f, f, (4, 4), 2, 1, rng),
            Deconv2d::new(f, 1, (4, 4), 2, 1, rng),
        ];
        let bns = vec![
            BatchNorm2d::new(4 * f),
            BatchNorm2d::new(2 * f),
            BatchNorm2d::new(f),
        ];
        let acts = vec![
            ActivationLayer::new(Activation::Relu),
            ActivationLayer::new(Activation::Relu),
            ActivationLayer::new(Activation::Relu),
        ];
        Generator {
            deconvs,
            bns,
            acts,
            out_act: ActivationLayer::new(Activation::Sigmoid),
            latent_dim: config.latent_dim,
        }
    }

    fn latent_to_4d(&self, z: &Tensor) -> Tensor {
        let n = z.shape()[0];
        assert_eq!(z.shape()[1], self.latent_dim, "latent width");
        z.clone().reshape(&[n, self.latent_dim, 1, 1])
    }

    pub fn forward_train(&mut self, z: &Tensor) -> Tensor {
        let mut h = self.latent_to_4d(z);
        for i in 0..3 {
            h = self.deconvs[i].forward_train(&h);
            h = self.bns[i].forward_train(&h);
            h = self.acts[i].forward_train(&h);
        }
        h = self.deconvs[3].forward_train(&h);
        self.out_act.forward_train(&h)
    }

    /// Pure inference pass; batchnorm uses running statistics.
    pub fn forward_eval(&self, z: &Tensor) -> Tensor {
        let mut h = self.latent_to_4d(z);
        for i in 0..3 {
            h = self.deconvs[i].forward_eval(&h);
            h = self.bns[i].forward_eval(&h);
            h = self.acts[i].forward_eval(&h);
        }
        h = self.deconvs[3].forward_eval(&h);
        self.out_act.forward_eval(&h)
    }

    pub fn backward(&mut self, grad_out: &Tensor) {
        let mut g = self.out_act.backward(grad_out);
        g = self.deconvs[3].backward(&g);
        for i in (0..3).rev() {
            g = self.acts[i].backward(&g);
            g = self.bns[i].backward(&g);
            g = self.deconvs[i].backward(&g);
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut params = Vec::new();
        let mut bns = self.bns.iter_mut();
        for (i, d) in self.deconvs.iter_mut().enumerate() {
            params.extend(d.params_mut());
            if i < 3 {
                params.extend(bns.next().unwrap().params_mut());
            }
        }
        params
    }
}

/// Canvas-to-probability discriminator network.
#[derive(Debug, Clone)]
pub struct Discriminator {
    convs: Vec<Conv2d>,
    bns: Vec<BatchNorm2d>,
    acts: Vec<ActivationLayer>,
    out_act: ActivationLayer,
}

impl Discriminator {
    fn new(config: &DcganConfig, rng: &mut SeededRng) -> Self {
        let f = config.feature_maps;
        let (h, w) = config.canvas;
        let convs = vec![
            Conv2d::new(1, f, (4, 4), 2, 1, rng),
            Conv2d::new(f, 2 * f, (4, 4), 2, 1, rng),
            Conv2d::new(2 * f, 4 * f, (4, 4), 2, 1, rng),
            Conv2d::new(4 * f, 1, (h / 8, w / 8), 1, 0, rng),
        ];
        let bns = vec![
            BatchNorm2d::new(f),
            BatchNorm2d::new(2 * f),
            BatchNorm2d::new(4 * f),
        ];
        let acts = vec![
            ActivationLayer::new(Activation::LeakyRelu(0.2)),
            ActivationLayer::new(Activation::LeakyRelu(0.2)),
            ActivationLayer::new(Activation::LeakyRelu(0.2)),
        ];
        Discriminator {
            convs,
            bns,
            acts,
            out_act: ActivationLayer::new(Activation::Sigmoid),
        }
    }

    /// Returns per-sample probabilities of being real, shape [n].
    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let n = x.shape()[0];
        let mut h = x.clone();
        for i in 0..3 {
            h = self.convs[i].forward_train(&h);
            h = self.bns[i].forward_train(&h);
            h = self.acts[i].forward_train(&h);
        }
        h = self.convs[3].forward_train(&h);
        self.out_act.forward_train(&h).reshape(&[n])
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let n = x.shape()[0];
        let mut h = x.clone();
        for i in 0..3 {
            h = self.convs[i].forward_eval(&h);
            h = self.bns[i].forward_eval(&h);
            h = self.acts[i].forward_eval(&h);
        }
        h = self.convs[3].forward_eval(&h);
        self.out_act.forward_eval(&h).reshape(&[n])
    }

    /// Backward from per-sample probability gradients; returns the canvas
    /// gradient for chaining into the generator.
    pub fn backward(&mut self, dprob: &Tensor) -> Tensor {
        let n = dprob.shape()[0];
        let mut g = self
            .out_act
            .backward(&dprob.clone().reshape(&[n, 1, 1, 1]));
        g = self.convs[3].backward(&g);
        for i in (0..3).rev() {
            g = self.acts[i].backward(&g);
            g = self.bns[i].backward(&g);
            g = self.convs[i].backward(&g);
        }
        g
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut params = Vec::new();
        let mut bns = self.bns.iter_mut();
        for (i, c) in self.convs.iter_mut().enumerate() {
            params.extend(c.params_mut());
            if i < 3 {
                params.extend(bns.next().unwrap().params_mut());
            }
        }
        params
    }
}

/// Trained (or freshly initialized) adversarial pair.
#[derive(Debug, Clone)]
pub struct DcganModel {
    pub config: DcganConfig,
    pub rows: usize,
    pub cols: usize,
    pub row_labels: Vec<String>,
    pub generator: Generator,
    pub discriminator: Discriminator,
}

#[derive(Serialize, Deserialize)]
struct GanDescriptor {
    config: DcganConfig,
    rows: usize,
    cols: usize,
    row_labels: Vec<String>,
    schema: Option<crate::dataset::Schema>,
}

pub const GAN_CHECKPOINT_KIND: &str = "dcgan";

impl DcganModel {
    fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.generator.deconvs.len() {
            names.push(format!("gen.deconv{i}.weight"));
            names.push(format!("gen.deconv{i}.bias"));
        }
        for i in 0..self.generator.bns.len() {
            names.push(format!("gen.bn{i}.gamma"));
            names.push(format!("gen.bn{i}.beta"));
            names.push(format!("gen.bn{i}.running_mean"));
            names.push(format!("gen.bn{i}.running_var"));
        }
        for i in 0..self.discriminator.convs.len() {
            names.push(format!("disc.conv{i}.weight"));
            names.push(format!("disc.conv{i}.bias"));
        }
        for i in 0..self.discriminator.bns.len() {
            names.push(format!("disc.bn{i}.gamma"));
            names.push(format!("disc.bn{i}.beta"));
            names.push(format!("disc.bn{i}.running_mean"));
            names.push(format!("disc.bn{i}.running_var"));
        }
        names
    }

    fn tensor_values(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        for d in &self.generator.deconvs {
            out.push(&d.weight.value);
            out.push(&d.bias.value);
        }
        for bn in &self.generator.bns {
            out.push(&bn.gamma.value);
            out.push(&bn.beta.value);
            out.push(&bn.running_mean);
            out.push(&bn.running_var);
        }
        for c in &self.discriminator.convs {
            out.push(&c.weight.value);
            out.push(&c.bias.value);
        }
        for bn in &self.discriminator.bns {
            out.push(&bn.gamma.value);
            out.push(&bn.beta.value);
            out.push(&bn.running_mean);
            out.push(&bn.running_var);
        }
        out
    }

    fn tensor_slots(&mut self) -> Vec<&mut Tensor> {
        let mut slots: Vec<&mut Tensor> = Vec::new();
        for d in &mut self.generator.deconvs {
            slots.push(&mut d.weight.value);
            slots.push(&mut d.bias.value);
        }
        for bn in &mut self.generator.bns {
            slots.push(&mut bn.gamma.value);
            slots.push(&mut bn.beta.value);
            slots.push(&mut bn.running_mean);
            slots.push(&mut bn.running_var);
        }
        for c in &mut self.discriminator.convs {
            slots.push(&mut c.weight.value);
            slots.push(&mut c.bias.value);
        }
        for bn in &mut self.discriminator.bns {
            slots.push(&mut bn.gamma.value);
            slots.push(&mut bn.beta.value);
            slots.push(&mut bn.running_mean);
            slots.push(&mut bn.running_var);
        }
        slots
    }

    /// Serialize the adversarial pair (parameters and batchnorm running
    /// statistics) plus the optional value-space schema.
    pub fn to_checkpoint(&self, schema: Option<&crate::dataset::Schema>) -> crate::nn::Checkpoint {
        let descriptor = GanDescriptor {
            config: self.config.clone(),
            rows: self.rows,
            cols: self.cols,
            row_labels: self.row_labels.clone(),
            schema: schema.cloned(),
        };
        let tensors = self
            .tensor_names()
            .into_iter()
            .zip(self.tensor_values().into_iter().cloned())
            .collect();
        crate::nn::Checkpoint {
            kind: GAN_CHECKPOINT_KIND.into(),
            descriptor: serde_json::to_string(&descriptor).expect("descriptor serializes"),
            tensors,
        }
    }

    pub fn from_checkpoint(
        ckpt: &crate::nn::Checkpoint,
    ) -> Result<(Self, Option<crate::dataset::Schema>)> {
        if ckpt.kind != GAN_CHECKPOINT_KIND {
            return Err(Error::Format(format!(
                "checkpoint kind {:?} is not {GAN_CHECKPOINT_KIND:?}",
                ckpt.kind
            )));
        }
        let descriptor: GanDescriptor = serde_json::from_str(&ckpt.descriptor)
            .map_err(|e| Error::Format(format!("bad checkpoint descriptor: {e}")))?;
        descriptor.config.validate()?;
        let mut rng = SeededRng::new(descriptor.config.seed);
        let mut model = DcganModel {
            generator: Generator::new(&descriptor.config, &mut rng),
            discriminator: Discriminator::new(&descriptor.config, &mut rng),
            config: descriptor.config,
            rows: descriptor.rows,
            cols: descriptor.cols,
            row_labels: descriptor.row_labels,
        };
        let names = model.tensor_names();
        if names.len() != ckpt.tensors.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, model needs {}",
                ckpt.tensors.len(),
                names.len()
            )));
        }
        let slots = model.tensor_slots();
        for ((slot, expected_name), (name, tensor)) in
            slots.into_iter().zip(&names).zip(&ckpt.tensors)
        {
            if name != expected_name {
                return Err(Error::Format(format!(
                    "checkpoint tensor {name:?} where {expected_name:?} was expected"
                )));
            }
            if slot.shape() != tensor.shape() {
                return Err(Error::Format(format!(
                    "checkpoint tensor {name} shape {:?} does not match model shape {:?}",
                    tensor.shape(),
                    slot.shape()
                )));
            }
            *slot = tensor.clone();
        }
        Ok((model, descriptor.schema))
    }
}

const PROB_CLAMP: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy of probabilities against a constant target.
pub fn bce_mean(probs: &Tensor, target: f64) -> f64 {
    let n = probs.len() as f64;
    probs
        .data()
        .iter()
        .map(|&p| {
            let p = clamp_prob(p);
            -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

/// d(bce_mean)/d(prob) for each element.
pub fn bce_grad(probs: &Tensor, target: f64) -> Tensor {
    let n = probs.len() as f64;
    let mut g = Tensor::zeros(probs.shape());
    for (slot, &p) in g.data_mut().iter_mut().zip(probs.data()) {
        let p = clamp_prob(p);
        *slot = (p - target) / (p * (1.0 - p)) / n;
    }
    g
}

/// Discriminator and generator losses for a pair of batches:
/// `d_loss = BCE(D(real), 1) + BCE(D(fake), 0)`, `g_loss = BCE(D(fake), 1)`.
pub fn gan_losses(
    discriminator: &Discriminator,
    real: &Tensor,
    fake: &Tensor,
) -> Result<(f64, f64)> {
    if real.shape() != fake.shape() {
        return Err(Error::Shape(format!(
            "real {:?} and fake {:?} batches differ",
            real.shape(),
            fake.shape()
        )));
    }
    let p_real = discriminator.forward_eval(real);
    let p_fake = discriminator.forward_eval(fake);
    let d_loss = bce_mean(&p_real, 1.0) + bce_mean(&p_fake, 0.0);
    let g_loss = bce_mean(&p_fake, 1.0);
    if !d_loss.is_finite() || !g_loss.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite gan losses: d {d_loss}, g {g_loss}"
        )));
    }
    Ok((d_loss, g_loss))
}

/// Zero-pad equally shaped matrices onto the canvas as a [n, 1, H, W] batch.
fn batch_canvas(bits: &[BitMatrix], indices: &[usize], canvas: (usize, usize)) -> Tensor {
    let (h, w) = canvas;
    let mut out = Tensor::zeros(&[indices.len(), 1, h, w]);
    let data = out.data_mut();
    for (bi, &idx) in indices.iter().enumerate() {
        let m = &bits[idx];
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                data[(bi * h + r) * w + c] = m.get(r, c) as f64;
            }
        }
    }
    out
}

/// Crop a canvas batch back to rows x cols bit matrices, thresholding at 0.5.
fn crop_threshold(
    canvas_batch: &Tensor,
    rows: usize,
    cols: usize,
    labels: &[String],
) -> Vec<BitMatrix> {
    let n = canvas_batch.shape()[0];
    let (h, w) = (canvas_batch.shape()[2], canvas_batch.shape()[3]);
    let data = canvas_batch.data();
    (0..n)
        .map(|bi| {
            let mut bits = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    bits.push((data[(bi * h + r) * w + c] > 0.5) as u8);
                }
            }
            BitMatrix::from_bits(rows, cols, bits, labels.to_vec())
        })
        .collect()
}

/// Adversarial training: alternating one discriminator step and one
/// generator step per batch. Deterministic for a given config.
pub fn train_gan(
    bits: &[BitMatrix],
    config: &DcganConfig,
) -> Result<(DcganModel, Vec<EpochTrace>)> {
    config.validate()?;
    if bits.is_empty() {
        return Err(Error::Corpus("no training matrices".into()));
    }
    let rows = bits[0].rows();
    let cols = bits[0].cols();
    for m in bits {
        if m.rows() != rows || m.cols() != cols {
            return Err(Error::Shape("training matrices differ in shape".into()));
        }
    }
    let (h, w) = config.canvas;
    if rows > h {
        return Err(Error::Shape(format!(
            "{rows} rows exceed the {h}-row canvas; configure a taller canvas \
             such as ({}, {w})",
            h * 2
        )));
    }
    if cols != w {
        return Err(Error::Shape(format!(
            "matrix width {cols} must equal the canvas width {w}"
        )));
    }
    if bits.len() < 2 * config.batch_size {
        return Err(Error::Corpus(format!(
            "need at least {} samples for batch size {}, got {}",
            2 * config.batch_size,
            config.batch_size,
            bits.len()
        )));
    }

    let mut master = SeededRng::new(config.seed ^ 0x0b5e_16d5_a1f0_93c4);
    let mut init_rng = master.split();
    let mut shuffle_rng = master.split();
    let mut z_rng = master.split();
    let mut trace_rng = master.split();

    let mut model = DcganModel {
        config: config.clone(),
        rows,
        cols,
        row_labels: bits[0].row_labels().to_vec(),
        generator: Generator::new(config, &mut init_rng),
        discriminator: Discriminator::new(config, &mut init_rng),
    };
    let mut adam_g = AdamState::new();
    let mut adam_d = AdamState::new();

    let mut trace = Vec::with_capacity(config.epochs);
    let mut indices: Vec<usize> = (0..bits.len()).collect();
    let batches = bits.len() / config.batch_size;
    let bs = config.batch_size;
    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut indices);
        let mut d_loss_sum = 0.0;
        let mut g_loss_sum = 0.0;
        for b in 0..batches {
            let real = batch_canvas(bits, &indices[b * bs..(b + 1) * bs], config.canvas);
            let mut z = Tensor::zeros(&[bs, config.latent_dim]);
            z_rng.fill_normal(z.data_mut());
            let fake = model.generator.forward_train(&z);

            // discriminator step
            for p in model.discriminator.params_mut() {
                p.zero_grad();
            }
            let p_real = model.discriminator.forward_train(&real);
            let loss_real = bce_mean(&p_real, 1.0);
            model.discriminator.backward(&bce_grad(&p_real, 1.0));
            let p_fake = model.discriminator.forward_train(&fake);
            let loss_fake = bce_mean(&p_fake, 0.0);
            model.discriminator.backward(&bce_grad(&p_fake, 0.0));
            adam_d.step(
                config.lr_discriminator,
                &mut model.discriminator.params_mut(),
            )?;
            let d_loss = loss_real + loss_fake;

            // generator step (non-saturating loss through the updated D)
            for p in model.generator.params_mut() {
                p.zero_grad();
            }
            for p in model.discriminator.params_mut() {
                p.zero_grad();
            }
            let p_fake2 = model.discriminator.forward_train(&fake);
            let g_loss = bce_mean(&p_fake2, 1.0);
            let dcanvas = model.discriminator.backward(&bce_grad(&p_fake2, 1.0));
            model.generator.backward(&dcanvas);
            adam_g.step(config.lr_generator, &mut model.generator.params_mut())?;

            if !d_loss.is_finite() || !g_loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "epoch {epoch}: non-finite losses d {d_loss}, g {g_loss}"
                )));
            }
            d_loss_sum += d_loss;
            g_loss_sum += g_loss;
        }

        let synth = generate_gan(&model, config.trace_samples, &mut trace_rng)?;
        let metrics = fidelity::score_sets(bits, &synth, &mut trace_rng)?;
        trace.push(EpochTrace {
            epoch: epoch + 1,
            loss: (d_loss_sum + g_loss_sum) / batches as f64,
            metrics,
        });
    }
    Ok((model, trace))
}

/// Draw `n` synthetic matrices: decode latent draws, crop the canvas to the
/// trained rows x cols shape, threshold at 0.5.
pub fn generate_gan(model: &DcganModel, n: usize, rng: &mut SeededRng) -> Result<Vec<BitMatrix>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut z = Tensor::zeros(&[n, model.config.latent_dim]);
    rng.fill_normal(z.data_mut());
    let canvas = model.generator.forward_eval(&z);
    if !canvas.all_finite() {
        return Err(Error::Divergence("generator produced non-finite values".into()));
    }
    Ok(crop_threshold(
        &canvas,
        model.rows,
        model.cols,
        &model.row_labels,
    ))
}

/// Mean discriminator outputs on real and generated batches; a balance
/// diagnostic (both near 0.5 at equilibrium).
pub fn discriminator_balance(
    model: &DcganModel,
    bits: &[BitMatrix],
    sample: usize,
    rng: &mut SeededRng,
) -> Result<(f64, f64)> {
    let take = sample.min(bits.len());
    let indices: Vec<usize> = (0..take).collect();
    let real = batch_canvas(bits, &indices, model.config.canvas);
    let p_real = model.discriminator.forward_eval(&real);
    let mut z = Tensor::zeros(&[take, model.config.latent_dim]);
    rng.fill_normal(z.data_mut());
    let fake = model.generator.forward_eval(&z);
    let p_fake = model.discriminator.forward_eval(&fake);
    let mean = |t: &Tensor| t.data().iter().sum::<f64>() / t.len() as f64;
    Ok((mean(&p_real), mean(&p_fake)))
}
