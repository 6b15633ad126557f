//! MLP variational autoencoder over flattened bit matrices.
//!
//! Encoder: input -> hidden layers (ReLU) -> mu / log-variance heads sharing
//! the last hidden layer. Decoder: latent -> hidden layers reversed (ReLU)
//! -> sigmoid output over all bits. Training minimizes MSB-weighted binary
//! cross-entropy reconstruction plus the KL divergence from the standard
//! normal prior, with Adam.
//!
//! The column weight ramps linearly from 1 at the least significant bit to
//! 1 + gamma at the most significant bit of each row, so a flipped high bit
//! costs more than a flipped low bit, matching the value-space damage of
//! fixed-point encoding.

use serde::{Deserialize, Serialize};

use crate::codec::BitMatrix;
use crate::error::{Error, Result};
use crate::fidelity::{self, EpochTrace};
use crate::nn::{Activation, ActivationLayer, AdamState, Linear, Param, SeededRng, Tensor};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpVaeConfig {
    /// Flattened input width: rows x 32.
    pub input_bits: usize,
    pub hidden_sizes: Vec<usize>,
    pub latent_dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub msb_weight_gamma: f64,
    pub seed: u64,
    /// Synthetic samples generated for each per-epoch evaluation.
    pub trace_samples: usize,
}

impl Default for MlpVaeConfig {
    fn default() -> Self {
        MlpVaeConfig {
            input_bits: 640,
            hidden_sizes: vec![512, 128],
            latent_dim: 16,
            lr: 1e-4,
            batch_size: 20,
            epochs: 150,
            msb_weight_gamma: 3.0,
            seed: 0,
            trace_samples: 256,
        }
    }
}

impl MlpVaeConfig {
    pub fn for_input_bits(input_bits: usize) -> Self {
        MlpVaeConfig {
            input_bits,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be at least 1".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if self.input_bits == 0 {
            return Err(Error::Config("input_bits must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-column reconstruction weights, column 0 = MSB.
#[derive(Debug, Clone, PartialEq)]
pub struct BitLossWeights {
    weights: Vec<f64>,
}

impl BitLossWeights {
    /// Linear ramp: w_j = 1 + gamma * (cols-1-j) / (cols-1).
    pub fn ramp(cols: usize, gamma: f64) -> Self {
        assert!(cols > 1, "need at least two columns");
        let weights = (0..cols)
            .map(|j| 1.0 + gamma * (cols - 1 - j) as f64 / (cols - 1) as f64)
            .collect();
        BitLossWeights { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, col: usize) -> f64 {
        self.weights[col]
    }
}

const PROB_CLAMP: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Column-weighted binary cross-entropy, summed over all bits of one
/// flattened sample whose rows are `cols` wide.
pub fn weighted_bce(x: &[f64], probs: &[f64], weights: &BitLossWeights, cols: usize) -> f64 {
    assert_eq!(x.len(), probs.len());
    let mut total = 0.0;
    for (i, (&t, &p)) in x.iter().zip(probs).enumerate() {
        let p = clamp_prob(p);
        let w = weights.get(i % cols);
        total -= w * (t * p.ln() + (1.0 - t) * (1.0 - p).ln());
    }
    total
}

/// Loss components for one batch: `loss = recon + kl`, each a batch mean of
/// per-sample sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboParts {
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
}

/// z = mu + sigma * eps with eps drawn from the seeded rng.
pub fn reparameterize(mu: &Tensor, logvar: &Tensor, rng: &mut SeededRng) -> Tensor {
    let mut eps = Tensor::zeros(mu.shape());
    rng.fill_normal(eps.data_mut());
    combine_eps(mu, logvar, &eps)
}

fn combine_eps(mu: &Tensor, logvar: &Tensor, eps: &Tensor) -> Tensor {
    assert_eq!(mu.shape(), logvar.shape());
    assert_eq!(mu.shape(), eps.shape());
    let mut z = mu.clone();
    for ((zv, &lv), &e) in z.data_mut().iter_mut().zip(logvar.data()).zip(eps.data()) {
        *zv += (0.5 * lv).exp() * e;
    }
    z
}

/// Trained (or freshly initialized) model.
#[derive(Debug, Clone)]
pub struct MlpVaeModel {
    pub config: MlpVaeConfig,
    pub rows: usize,
    pub cols: usize,
    pub row_labels: Vec<String>,
    weights: BitLossWeights,
    encoder: Vec<Linear>,
    encoder_acts: Vec<ActivationLayer>,
    mu_head: Linear,
    logvar_head: Linear,
    decoder: Vec<Linear>,
    decoder_acts: Vec<ActivationLayer>,
    output: Linear,
    output_act: ActivationLayer,
}

/// Forward state kept for the backward pass.
pub struct ElboForward {
    pub parts: ElboParts,
    probs: Tensor,
    mu: Tensor,
    logvar: Tensor,
    eps: Tensor,
}

impl MlpVaeModel {
    /// Initialize with seeded weights; `rows`/`cols` fix the generated
    /// matrix shape and `row_labels` carry over to generated matrices.
    pub fn new(
        config: MlpVaeConfig,
        rows: usize,
        cols: usize,
        row_labels: Vec<String>,
    ) -> Result<Self> {
        config.validate()?;
        if rows * cols != config.input_bits {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix does not match input_bits {}",
                config.input_bits
            )));
        }
        let mut rng = SeededRng::new(config.seed);
        let mut encoder = Vec::new();
        let mut encoder_acts = Vec::new();
        let mut dim = config.input_bits;
        for &h in &config.hidden_sizes {
            encoder.push(Linear::new(dim, h, &mut rng));
            encoder_acts.push(ActivationLayer::new(Activation::Relu));
            dim = h;
        }
        let mu_head = Linear::new(dim, config.latent_dim, &mut rng);
        let logvar_head = Linear::new(dim, config.latent_dim, &mut rng);
        let mut decoder = Vec::new();
        let mut decoder_acts = Vec::new();
        dim = config.latent_dim;
        for &h in config.hidden_sizes.iter().rev() {
            decoder.push(Linear::new(dim, h, &mut rng));
            decoder_acts.push(ActivationLayer::new(Activation::Relu));
            dim = h;
        }
        let output = Linear::new(dim, config.input_bits, &mut rng);
        let weights = BitLossWeights::ramp(cols, config.msb_weight_gamma);
        Ok(MlpVaeModel {
            config,
            rows,
            cols,
            row_labels,
            weights,
            encoder,
            encoder_acts,
            mu_head,
            logvar_head,
            decoder,
            decoder_acts,
            output,
            output_act: ActivationLayer::new(Activation::Sigmoid),
        })
    }

    pub fn bit_weights(&self) -> &BitLossWeights {
        &self.weights
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut params = Vec::new();
        for layer in &mut self.encoder {
            params.extend(layer.params_mut());
        }
        params.extend(self.mu_head.params_mut());
        params.extend(self.logvar_head.params_mut());
        for layer in &mut self.decoder {
            params.extend(layer.params_mut());
        }
        params.extend(self.output.params_mut());
        params
    }

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn encode_train(&mut self, x: &Tensor) -> (Tensor, Tensor) {
        let mut h = x.clone();
        for (lin, act) in self.encoder.iter_mut().zip(&mut self.encoder_acts) {
            h = act.forward_train(&lin.forward_train(&h));
        }
        (
            self.mu_head.forward_train(&h),
            self.logvar_head.forward_train(&h),
        )
    }

    fn decode_train(&mut self, z: &Tensor) -> Tensor {
        let mut h = z.clone();
        for (lin, act) in self.decoder.iter_mut().zip(&mut self.decoder_acts) {
            h = act.forward_train(&lin.forward_train(&h));
        }
        self.output_act.forward_train(&self.output.forward_train(&h))
    }

    /// Pure decoder pass used for generation.
    pub fn decode_eval(&self, z: &Tensor) -> Tensor {
        let mut h = z.clone();
        for (lin, act) in self.decoder.iter().zip(&self.decoder_acts) {
            h = act.forward_eval(&lin.forward_eval(&h));
        }
        self.output_act.forward_eval(&self.output.forward_eval(&h))
    }

    /// Forward pass with explicit noise, so losses are deterministic given
    /// `eps` (finite differences rely on this).
    pub fn elbo_forward(&mut self, x: &Tensor, eps: &Tensor) -> Result<ElboForward> {
        let batch = x.shape()[0];
        if x.shape()[1] != self.config.input_bits {
            return Err(Error::Shape(format!(
                "input width {} does not match model input_bits {}",
                x.shape()[1],
                self.config.input_bits
            )));
        }
        let (mu, logvar) = self.encode_train(x);
        let z = combine_eps(&mu, &logvar, eps);
        let probs = self.decode_train(&z);

        let mut recon = 0.0;
        for (row_x, row_p) in x
            .data()
            .chunks(self.config.input_bits)
            .zip(probs.data().chunks(self.config.input_bits))
        {
            recon += weighted_bce(row_x, row_p, &self.weights, self.cols);
        }
        recon /= batch as f64;

        let mut kl = 0.0;
        for (&m, &lv) in mu.data().iter().zip(logvar.data()) {
            kl += 0.5 * (m * m + lv.exp() - 1.0 - lv);
        }
        kl /= batch as f64;

        let loss = recon + kl;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite elbo loss: recon {recon}, kl {kl}"
            )));
        }
        Ok(ElboForward {
            parts: ElboParts { loss, recon, kl },
            probs,
            mu,
            logvar,
            eps: eps.clone(),
        })
    }

    /// Accumulate parameter gradients for a completed forward pass.
    pub fn elbo_backward(&mut self, x: &Tensor, fwd: &ElboForward) {
        let batch = x.shape()[0] as f64;
        let bits = self.config.input_bits;

        // d(recon)/d(prob), clamped like the loss; the column for the weight
        // lookup comes from the position within each flattened sample
        let mut dprob = Tensor::zeros(fwd.probs.shape());
        for (i, ((&p, &t), dp)) in fwd
            .probs
            .data()
            .iter()
            .zip(x.data())
            .zip(dprob.data_mut().iter_mut())
            .enumerate()
        {
            let col = (i % bits) % self.cols;
            let pc = clamp_prob(p);
            let w = self.weights.get(col);
            *dp = w * (pc - t) / (pc * (1.0 - pc)) / batch;
        }

        // decoder chain
        let mut grad = self.output_act.backward(&dprob);
        grad = self.output.backward(&grad);
        for (lin, act) in self
            .decoder
            .iter_mut()
            .zip(&mut self.decoder_acts)
            .rev()
        {
            grad = act.backward(&grad);
            grad = lin.backward(&grad);
        }
        let dz = grad;

        // reparameterization: z = mu + exp(logvar/2) * eps
        let mut dmu = dz.clone();
        let mut dlogvar = Tensor::zeros(dz.shape());
        for ((dlv, &g), (&lv, &e)) in dlogvar
            .data_mut()
            .iter_mut()
            .zip(dz.data())
            .zip(fwd.logvar.data().iter().zip(fwd.eps.data()))
        {
            *dlv = g * 0.5 * (0.5 * lv).exp() * e;
        }
        // KL term gradients
        for (dm, &m) in dmu.data_mut().iter_mut().zip(fwd.mu.data()) {
            *dm += m / batch;
        }
        for (dlv, &lv) in dlogvar.data_mut().iter_mut().zip(fwd.logvar.data()) {
            *dlv += 0.5 * (lv.exp() - 1.0) / batch;
        }

        let mut dh = self.mu_head.backward(&dmu);
        dh.add_scaled(&self.logvar_head.backward(&dlogvar), 1.0);
        let mut grad = dh;
        for (lin, act) in self
            .encoder
            .iter_mut()
            .zip(&mut self.encoder_acts)
            .rev()
        {
            grad = act.backward(&grad);
            grad = lin.backward(&grad);
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VaeDescriptor {
    config: MlpVaeConfig,
    rows: usize,
    cols: usize,
    row_labels: Vec<String>,
    schema: Option<crate::dataset::Schema>,
}

pub const VAE_CHECKPOINT_KIND: &str = "mlpvae";

impl MlpVaeModel {
    fn tensor_list(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (i, l) in self.encoder.iter().enumerate() {
            out.push((format!("enc{i}.weight"), &l.weight.value));
            out.push((format!("enc{i}.bias"), &l.bias.value));
        }
        out.push(("mu.weight".into(), &self.mu_head.weight.value));
        out.push(("mu.bias".into(), &self.mu_head.bias.value));
        out.push(("logvar.weight".into(), &self.logvar_head.weight.value));
        out.push(("logvar.bias".into(), &self.logvar_head.bias.value));
        for (i, l) in self.decoder.iter().enumerate() {
            out.push((format!("dec{i}.weight"), &l.weight.value));
            out.push((format!("dec{i}.bias"), &l.bias.value));
        }
        out.push(("out.weight".into(), &self.output.weight.value));
        out.push(("out.bias".into(), &self.output.bias.value));
        out
    }

    /// Serialize the model (and optionally the value-space schema needed to
    /// decode generated matrices) into a checkpoint.
    pub fn to_checkpoint(&self, schema: Option<&crate::dataset::Schema>) -> crate::nn::Checkpoint {
        let descriptor = VaeDescriptor {
            config: self.config.clone(),
            rows: self.rows,
            cols: self.cols,
            row_labels: self.row_labels.clone(),
            schema: schema.cloned(),
        };
        crate::nn::Checkpoint {
            kind: VAE_CHECKPOINT_KIND.into(),
            descriptor: serde_json::to_string(&descriptor).expect("descriptor serializes"),
            tensors: self
                .tensor_list()
                .into_iter()
                .map(|(name, t)| (name, t.clone()))
                .collect(),
        }
    }

    pub fn from_checkpoint(
        ckpt: &crate::nn::Checkpoint,
    ) -> Result<(Self, Option<crate::dataset::Schema>)> {
        if ckpt.kind != VAE_CHECKPOINT_KIND {
            return Err(Error::Format(format!(
                "checkpoint kind {:?} is not {VAE_CHECKPOINT_KIND:?}",
                ckpt.kind
            )));
        }
        let descriptor: VaeDescriptor = serde_json::from_str(&ckpt.descriptor)
            .map_err(|e| Error::Format(format!("bad checkpoint descriptor: {e}")))?;
        let mut model = MlpVaeModel::new(
            descriptor.config,
            descriptor.rows,
            descriptor.cols,
            descriptor.row_labels,
        )?;
        let expected: Vec<String> = model.tensor_list().into_iter().map(|(n, _)| n).collect();
        if expected.len() != ckpt.tensors.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, model needs {}",
                ckpt.tensors.len(),
                expected.len()
            )));
        }
        for ((name, _), expected_name) in ckpt.tensors.iter().zip(&expected) {
            if name != expected_name {
                return Err(Error::Format(format!(
                    "checkpoint tensor {name:?} where {expected_name:?} was expected"
                )));
            }
        }
        // parameters appear in the same declared order as the tensor list
        let mut params = model.params_mut();
        for (param, (name, tensor)) in params.iter_mut().zip(&ckpt.tensors) {
            if param.value.shape() != tensor.shape() {
                return Err(Error::Format(format!(
                    "checkpoint tensor {name} shape {:?} does not match model shape {:?}",
                    tensor.shape(),
                    param.value.shape()
                )));
            }
            param.value = tensor.clone();
        }
        drop(params);
        Ok((model, descriptor.schema))
    }
}

/// Loss components of one batch without touching gradients.
pub fn elbo_loss(
    model: &mut MlpVaeModel,
    x: &Tensor,
    rng: &mut SeededRng,
) -> Result<ElboParts> {
    let mut eps = Tensor::zeros(&[x.shape()[0], model.config.latent_dim]);
    rng.fill_normal(eps.data_mut());
    Ok(model.elbo_forward(x, &eps)?.parts)
}

fn batch_tensor(bits: &[BitMatrix], indices: &[usize]) -> Tensor {
    let width = bits[0].rows() * bits[0].cols();
    let mut data = Vec::with_capacity(indices.len() * width);
    for &i in indices {
        data.extend(bits[i].bits().iter().map(|&b| b as f64));
    }
    Tensor::from_vec(&[indices.len(), width], data)
}

/// Train on a set of equally shaped bit matrices. Returns the model and the
/// per-epoch evaluation trace. Deterministic for a given config.
pub fn train_vae(
    bits: &[BitMatrix],
    config: &MlpVaeConfig,
) -> Result<(MlpVaeModel, Vec<EpochTrace>)> {
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
    if rows * cols != config.input_bits {
        return Err(Error::Shape(format!(
            "matrices are {rows}x{cols} but config.input_bits is {}",
            config.input_bits
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

    let mut model = MlpVaeModel::new(
        config.clone(),
        rows,
        cols,
        bits[0].row_labels().to_vec(),
    )?;
    let mut master = SeededRng::new(config.seed ^ 0x5851_f42d_4c95_7f2d);
    let mut shuffle_rng = master.split();
    let mut eps_rng = master.split();
    let mut trace_rng = master.split();
    let mut adam = AdamState::new();

    let mut trace = Vec::with_capacity(config.epochs);
    let mut indices: Vec<usize> = (0..bits.len()).collect();
    let batches = bits.len() / config.batch_size;
    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut indices);
        let mut epoch_loss = 0.0;
        for b in 0..batches {
            let batch_idx = &indices[b * config.batch_size..(b + 1) * config.batch_size];
            let x = batch_tensor(bits, batch_idx);
            let mut eps = Tensor::zeros(&[config.batch_size, config.latent_dim]);
            eps_rng.fill_normal(eps.data_mut());

            model.zero_grads();
            let fwd = model.elbo_forward(&x, &eps)?;
            model.elbo_backward(&x, &fwd);
            adam.step(config.lr, &mut model.params_mut())?;
            epoch_loss += fwd.parts.loss;
        }
        epoch_loss /= batches as f64;

        let synth = generate_vae(&model, config.trace_samples, &mut trace_rng);
        let metrics = fidelity::score_sets(bits, &synth, &mut trace_rng)?;
        trace.push(EpochTrace {
            epoch: epoch + 1,
            loss: epoch_loss,
            metrics,
        });
    }
    Ok((model, trace))
}

/// How decoder probabilities become bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitSampling {
    /// bit = probability > 0.5
    #[default]
    Threshold,
    /// bit ~ Bernoulli(probability)
    Bernoulli,
}

/// Draw `n` synthetic bit matrices from the latent prior (threshold mode).
pub fn generate_vae(model: &MlpVaeModel, n: usize, rng: &mut SeededRng) -> Vec<BitMatrix> {
    generate_vae_with(model, n, rng, BitSampling::Threshold)
}

/// Generation with an explicit bit-sampling mode.
pub fn generate_vae_with(
    model: &MlpVaeModel,
    n: usize,
    rng: &mut SeededRng,
    mode: BitSampling,
) -> Vec<BitMatrix> {
    if n == 0 {
        return Vec::new();
    }
    let mut z = Tensor::zeros(&[n, model.config.latent_dim]);
    rng.fill_normal(z.data_mut());
    let probs = model.decode_eval(&z);
    let width = model.config.input_bits;
    probs
        .data()
        .chunks(width)
        .map(|chunk| {
            let bits: Vec<u8> = chunk
                .iter()
                .map(|&p| match mode {
                    BitSampling::Threshold => (p > 0.5) as u8,
                    BitSampling::Bernoulli => (rng.uniform() < p) as u8,
                })
                .collect();
            BitMatrix::from_bits(model.rows, model.cols, bits, model.row_labels.clone())
        })
        .collect()
}
