//! Finite-difference verification of every backward pass and of both
//! composite training losses, over randomized small shapes.

use hlsforge::gan::{bce_grad, bce_mean, train_gan, DcganConfig};
use hlsforge::nn::gradcheck::{max_rel_error, DEFAULT_STEP};
use hlsforge::nn::{
    Activation, ActivationLayer, BatchNorm2d, Conv2d, Deconv2d, Linear, SeededRng, Tensor,
};
use hlsforge::vae::{MlpVaeConfig, MlpVaeModel};

const TOL: f64 = 1e-4;

fn random_tensor(shape: &[usize], rng: &mut SeededRng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    rng.fill_normal(t.data_mut());
    t
}

/// Random cotangent so the scalar loss exercises every output element.
fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn tensor_with(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::from_vec(shape, data.to_vec())
}

/// Check input, weight, and bias gradients of a layer against central
/// differences. `forward` must run the layer in training mode.
macro_rules! check_layer {
    ($layer:expr, $x:expr, $cot:expr, $rng:expr, $label:expr) => {{
        let mut layer = $layer;
        let x = $x;
        let cot = $cot;

        // analytic gradients
        let y = layer.forward_train(&x);
        assert_eq!(y.shape(), cot.shape(), "{}: cotangent shape", $label);
        let dx = layer.backward(&cot);

        // input gradient
        let err = max_rel_error(
            |v: &[f64]| {
                let mut l = layer.clone();
                dot(&l.forward_train(&tensor_with(x.shape(), v)), &cot)
            },
            x.data(),
            dx.data(),
            DEFAULT_STEP,
        );
        assert!(err < TOL, "{}: input gradient error {err}", $label);

        // parameter gradients
        let names_and_grads: Vec<(usize, Vec<f64>)> = layer
            .params_mut()
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.grad.data().to_vec()))
            .collect();
        for (pi, analytic) in names_and_grads {
            let base = layer.params_mut()[pi].value.data().to_vec();
            let err = max_rel_error(
                |v: &[f64]| {
                    let mut l = layer.clone();
                    l.params_mut()[pi].value.data_mut().copy_from_slice(v);
                    dot(&l.forward_train(&x), &cot)
                },
                &base,
                &analytic,
                DEFAULT_STEP,
            );
            assert!(err < TOL, "{}: param {pi} gradient error {err}", $label);
        }
    }};
}

#[test]
fn linear_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(101);
    for (batch, input, output) in [(1, 4, 3), (3, 5, 4), (2, 7, 2), (4, 2, 6), (2, 3, 3)] {
        let layer = Linear::new(input, output, &mut rng);
        let x = random_tensor(&[batch, input], &mut rng);
        let cot = random_tensor(&[batch, output], &mut rng);
        check_layer!(layer, x, cot, rng, format!("linear {batch}x{input}->{output}"));
    }
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(102);
    let cases = [
        (1, 1, 2, 5, 5, 3, 1, 1),
        (2, 2, 3, 6, 6, 4, 2, 1),
        (1, 3, 1, 4, 4, 4, 1, 0),
        (2, 1, 2, 8, 4, 4, 2, 1),
    ];
    for (batch, ci, co, h, w, k, s, p) in cases {
        let mut conv = Conv2d::new(ci, co, (k, k), s, p, &mut rng);
        // larger-than-default weights make relative errors meaningful
        for v in conv.weight.value.data_mut() {
            *v = rng.normal() * 0.5;
        }
        let (oh, ow) = conv.output_hw(h, w);
        let x = random_tensor(&[batch, ci, h, w], &mut rng);
        let cot = random_tensor(&[batch, co, oh, ow], &mut rng);
        check_layer!(conv, x, cot, rng, format!("conv {ci}->{co} k{k} s{s} p{p}"));
    }
}

#[test]
fn deconv2d_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(103);
    let cases = [
        (1, 2, 1, 3, 3, 4, 2, 1),
        (2, 1, 2, 2, 2, 4, 2, 1),
        (1, 3, 2, 1, 1, 4, 1, 0),
        (2, 2, 2, 4, 2, 3, 1, 1),
    ];
    for (batch, ci, co, h, w, k, s, p) in cases {
        let mut deconv = Deconv2d::new(ci, co, (k, k), s, p, &mut rng);
        for v in deconv.weight.value.data_mut() {
            *v = rng.normal() * 0.5;
        }
        let (oh, ow) = deconv.output_hw(h, w);
        let x = random_tensor(&[batch, ci, h, w], &mut rng);
        let cot = random_tensor(&[batch, co, oh, ow], &mut rng);
        check_layer!(deconv, x, cot, rng, format!("deconv {ci}->{co} k{k} s{s} p{p}"));
    }
}

#[test]
fn batchnorm_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(104);
    for (batch, c, h, w) in [(2, 1, 3, 3), (3, 2, 2, 2), (2, 3, 4, 1)] {
        let mut bn = BatchNorm2d::new(c);
        // non-trivial gamma/beta
        for v in bn.gamma.value.data_mut() {
            *v = 1.0 + 0.3 * rng.normal();
        }
        for v in bn.beta.value.data_mut() {
            *v = 0.2 * rng.normal();
        }
        let x = random_tensor(&[batch, c, h, w], &mut rng);
        let cot = random_tensor(&[batch, c, h, w], &mut rng);
        check_layer!(bn, x, cot, rng, format!("batchnorm {batch}x{c}x{h}x{w}"));
    }
}

#[test]
fn activation_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(105);
    for kind in [
        Activation::Relu,
        Activation::LeakyRelu(0.2),
        Activation::Sigmoid,
    ] {
        for shape in [[2usize, 6], [3, 4]] {
            let layer = ActivationLayer::new(kind);
            let mut x = random_tensor(&shape, &mut rng);
            // probe away from the piecewise kink at zero
            for v in x.data_mut() {
                if v.abs() < 0.05 {
                    *v += 0.1_f64.copysign(*v);
                }
            }
            let cot = random_tensor(&shape, &mut rng);
            let mut l = layer.clone();
            let y = l.forward_train(&x);
            assert_eq!(y.shape(), cot.shape());
            let dx = l.backward(&cot);
            let err = max_rel_error(
                |v: &[f64]| {
                    let mut probe = layer.clone();
                    dot(&probe.forward_train(&tensor_with(x.shape(), v)), &cot)
                },
                x.data(),
                dx.data(),
                DEFAULT_STEP,
            );
            assert!(err < TOL, "activation {kind:?}: error {err}");
        }
    }
}

#[test]
fn sigmoid_bce_composite_matches_finite_differences() {
    // d/dz of BCE(sigmoid(z), target) over a batch of logits
    let mut rng = SeededRng::new(106);
    let z = random_tensor(&[6], &mut rng);
    for target in [0.0, 1.0] {
        let act = ActivationLayer::new(Activation::Sigmoid);
        let mut a = act.clone();
        let p = a.forward_train(&z);
        let dz = a.backward(&bce_grad(&p, target));
        let err = max_rel_error(
            |v: &[f64]| {
                let mut probe = act.clone();
                bce_mean(&probe.forward_train(&tensor_with(z.shape(), v)), target)
            },
            z.data(),
            dz.data(),
            DEFAULT_STEP,
        );
        assert!(err < TOL, "sigmoid+bce target {target}: error {err}");
    }
}

fn snapshot_params(model: &mut MlpVaeModel) -> Vec<f64> {
    model
        .params_mut()
        .iter()
        .flat_map(|p| p.value.data().to_vec())
        .collect()
}

fn restore_params(model: &mut MlpVaeModel, flat: &[f64]) {
    let mut offset = 0;
    for p in model.params_mut() {
        let len = p.value.len();
        p.value.data_mut().copy_from_slice(&flat[offset..offset + len]);
        offset += len;
    }
}

#[test]
fn elbo_loss_gradient_matches_finite_differences() {
    let config = MlpVaeConfig {
        input_bits: 16,
        hidden_sizes: vec![8, 6],
        latent_dim: 3,
        lr: 1e-3,
        batch_size: 2,
        epochs: 0,
        msb_weight_gamma: 3.0,
        seed: 21,
        trace_samples: 4,
    };
    let mut model = MlpVaeModel::new(config, 2, 8, vec!["a".into(), "b".into()]).unwrap();
    let mut rng = SeededRng::new(7);
    let mut x = Tensor::zeros(&[2, 16]);
    for v in x.data_mut() {
        *v = (rng.uniform() < 0.5) as u8 as f64;
    }
    let mut eps = Tensor::zeros(&[2, 3]);
    rng.fill_normal(eps.data_mut());

    for p in model.params_mut() {
        p.zero_grad();
    }
    let fwd = model.elbo_forward(&x, &eps).unwrap();
    model.elbo_backward(&x, &fwd);
    let analytic: Vec<f64> = model
        .params_mut()
        .iter()
        .flat_map(|p| p.grad.data().to_vec())
        .collect();
    let base = snapshot_params(&mut model);

    let err = max_rel_error(
        |flat: &[f64]| {
            let mut probe = model.clone();
            restore_params(&mut probe, flat);
            probe.elbo_forward(&x, &eps).unwrap().parts.loss
        },
        &base,
        &analytic,
        COMPOSITE_STEP,
    );
    assert!(err < TOL, "elbo parameter gradient error {err}");
}

/// Step for the deep composite checks: small enough that a perturbation
/// almost never crosses an activation kink, while central-difference noise
/// stays orders of magnitude below the tolerance.
const COMPOSITE_STEP: f64 = 1e-6;

#[test]
fn gan_losses_gradients_match_finite_differences() {
    // small adversarial pair via a zero-epoch training call
    let mut rng = SeededRng::new(31);
    let bits: Vec<hlsforge::codec::BitMatrix> = (0..8)
        .map(|_| {
            let raw: Vec<u8> = (0..6 * 8).map(|_| (rng.uniform() < 0.5) as u8).collect();
            hlsforge::codec::BitMatrix::from_bits(6, 8, raw, vec!["r".into(); 6])
        })
        .collect();
    let config = DcganConfig {
        latent_dim: 4,
        feature_maps: 2,
        lr_generator: 1e-3,
        lr_discriminator: 1e-3,
        batch_size: 2,
        epochs: 0,
        seed: 5,
        canvas: (8, 8),
        trace_samples: 4,
    };
    let (model, _) = train_gan(&bits, &config).unwrap();

    let z = random_tensor(&[2, 4], &mut rng);
    let real = {
        let mut t = Tensor::zeros(&[2, 1, 8, 8]);
        for v in t.data_mut() {
            *v = (rng.uniform() < 0.5) as u8 as f64;
        }
        t
    };

    // generator loss gradient through the discriminator, wrt generator params
    {
        let mut m = model.clone();
        for p in m.generator.params_mut() {
            p.zero_grad();
        }
        let fake = m.generator.forward_train(&z);
        let p_fake = m.discriminator.forward_train(&fake);
        let dcanvas = m.discriminator.backward(&bce_grad(&p_fake, 1.0));
        m.generator.backward(&dcanvas);
        let analytic: Vec<f64> = m
            .generator
            .params_mut()
            .iter()
            .flat_map(|p| p.grad.data().to_vec())
            .collect();
        let base: Vec<f64> = m
            .generator
            .params_mut()
            .iter()
            .flat_map(|p| p.value.data().to_vec())
            .collect();
        let err = max_rel_error(
            |flat: &[f64]| {
                let mut probe = model.clone();
                let mut offset = 0;
                for p in probe.generator.params_mut() {
                    let len = p.value.len();
                    p.value.data_mut().copy_from_slice(&flat[offset..offset + len]);
                    offset += len;
                }
                let fake = probe.generator.forward_train(&z);
                bce_mean(&probe.discriminator.forward_train(&fake), 1.0)
            },
            &base,
            &analytic,
            COMPOSITE_STEP,
        );
        assert!(err < TOL, "generator loss gradient error {err}");
    }

    // discriminator loss gradient wrt discriminator params
    {
        let mut m = model.clone();
        let fake = m.generator.forward_train(&z);
        for p in m.discriminator.params_mut() {
            p.zero_grad();
        }
        let p_real = m.discriminator.forward_train(&real);
        m.discriminator.backward(&bce_grad(&p_real, 1.0));
        let p_fake = m.discriminator.forward_train(&fake);
        m.discriminator.backward(&bce_grad(&p_fake, 0.0));
        let analytic: Vec<f64> = m
            .discriminator
            .params_mut()
            .iter()
            .flat_map(|p| p.grad.data().to_vec())
            .collect();
        let base: Vec<f64> = m
            .discriminator
            .params_mut()
            .iter()
            .flat_map(|p| p.value.data().to_vec())
            .collect();
        let err = max_rel_error(
            |flat: &[f64]| {
                let mut probe = model.clone();
                let fake = probe.generator.forward_train(&z);
                let mut offset = 0;
                for p in probe.discriminator.params_mut() {
                    let len = p.value.len();
                    p.value.data_mut().copy_from_slice(&flat[offset..offset + len]);
                    offset += len;
                }
                let lr = bce_mean(&probe.discriminator.forward_train(&real), 1.0);
                let lf = bce_mean(&probe.discriminator.forward_train(&fake), 0.0);
                lr + lf
            },
            &base,
            &analytic,
            COMPOSITE_STEP,
        );
        assert!(err < TOL, "discriminator loss gradient error {err}");
    }
}
