//! Training loops for the classifier/encoder, denoising autoencoders and the
//! generator/discriminator pair.

use std::collections::BTreeMap;

use crate::autodiff::Tape;
use crate::data::{Dataset, IMAGE_PIXELS, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::nets::losses::{gan_balance, gan_losses, GanBalanceState};
use crate::nets::model::{as_batch, mlp, Activation, LayerSpec, ModelBundle, ParamMode};
use crate::nets::optim::{adam_step, AdamConfig, AdamState};
use crate::rng::{rng_normal, streams, RngStream};
use crate::tensor::Tensor;

pub const TAP_H1: &str = "h1";
pub const TAP_H: &str = "h";

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Stops early after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// When set, the learning rate follows a cosine from `adam.lr` down to
    /// this value over the planned run.
    pub final_lr: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, batch_size: 64, adam: AdamConfig::default(), seed: 0, max_steps: None, final_lr: None }
    }
}

impl TrainConfig {
    /// Learning rate for optimizer step `step` of a run over `n` examples.
    pub fn lr_at(&self, step: usize, n: usize) -> f64 {
        let Some(end) = self.final_lr else { return self.adam.lr };
        let mut planned = self.epochs * n.div_ceil(self.batch_size.max(1));
        if let Some(m) = self.max_steps {
            planned = planned.min(m);
        }
        let frac = (step as f64 / planned.max(1) as f64).min(1.0);
        end + 0.5 * (self.adam.lr - end) * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}

/// Shuffled minibatch index lists for one epoch.
fn epoch_batches(n: usize, batch: usize, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx.chunks(batch.max(1)).map(|c| c.to_vec()).collect()
}

fn gather_rows(data: &Tensor, rows: &[usize]) -> Tensor {
    let d = data.as_matrix_dims().1;
    let mut out = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        out.extend_from_slice(&data.data()[r * d..(r + 1) * d]);
    }
    Tensor::from_parts(vec![rows.len(), d], out)
}

// ---------------------------------------------------------------- classifier

/// 784 -> 256 (h1) -> 64 (h) -> 10.
pub fn default_classifier_layers() -> Vec<LayerSpec> {
    mlp(&[IMAGE_PIXELS, 256, 64, NUM_CLASSES], Activation::Relu, Activation::Linear)
}

/// Classifier with `h1` on the first hidden layer and `h` on the penultimate one.
pub fn classifier_model(layers: Vec<LayerSpec>, rng: &mut RngStream) -> Result<ModelBundle> {
    if layers.len() < 3 {
        return Err(Error::Model { model: "classifier".into(), reason: "needs at least 3 layers for h1 and h taps".into() });
    }
    let penultimate = layers.len() - 2;
    ModelBundle::init("classifier", layers, rng)?.with_tap(TAP_H1, 0)?.with_tap(TAP_H, penultimate)
}

#[derive(Clone, Debug)]
pub struct ClassifierReport {
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub epoch_losses: Vec<f64>,
}

pub fn accuracy(model: &ModelBundle, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0;
    for start in (0..ds.len()).step_by(1024) {
        let idx: Vec<usize> = (start..(start + 1024).min(ds.len())).collect();
        let (x, labels) = ds.gather(&idx);
        let logits = model.predict(&x)?;
        for (r, &l) in labels.iter().enumerate() {
            if logits.row(r).argmax() == l {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// Cross-entropy training. The result serves as both condition network and encoder.
pub fn train_classifier(
    train: &Dataset,
    test: Option<&Dataset>,
    layers: Vec<LayerSpec>,
    cfg: &TrainConfig,
) -> Result<(ModelBundle, ClassifierReport)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = RngStream::new(cfg.seed, streams::CLASSIFIER);
    let mut model = classifier_model(layers, &mut rng)?;
    if model.input_dim() != train.dim() || model.output_dim() < train.num_classes {
        return Err(Error::Model { model: model.name.clone(), reason: "layer dims do not match the dataset".into() });
    }
    let mut adam = AdamState::new(cfg.adam);
    let mut epoch_losses = Vec::new();
    let mut steps = 0;
    'outer: for _ in 0..cfg.epochs {
        let mut total = 0.0;
        let mut count = 0;
        for batch in epoch_batches(train.len(), cfg.batch_size, &mut rng) {
            let (x, labels) = train.gather(&batch);
            let mut tape = Tape::new();
            let input = tape.constant(x);
            let (out, bound) = model.forward(&mut tape, input, ParamMode::Trainable)?;
            let targets = tape.constant(Dataset::one_hot(&labels, model.output_dim()));
            let loss = tape.cross_entropy(out.output, targets)?;
            total += tape.value(loss).item();
            count += 1;
            let mut grads = tape.backward(loss)?;
            let g = model.collect_grads(&bound, &mut grads);
            adam.config.lr = cfg.lr_at(steps, train.len());
            adam_step(&mut model.params, &g, &mut adam)?;
            steps += 1;
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                epoch_losses.push(total / count as f64);
                break 'outer;
            }
        }
        epoch_losses.push(total / count as f64);
    }
    let train_accuracy = accuracy(&model, train)?;
    let test_accuracy = test.map(|t| accuracy(&model, t)).transpose()?;
    Ok((model, ClassifierReport { train_accuracy, test_accuracy, epoch_losses }))
}

// ---------------------------------------------------------------------- DAE

/// Bottlenecked h-space DAE: dim -> 48 -> 32 -> 16 -> 32 -> 48 -> dim for dim = 64.
pub fn default_h_dae_layers(dim: usize) -> Vec<LayerSpec> {
    let s = |f: f64| ((dim as f64 * f).round() as usize).max(1);
    mlp(&[dim, s(0.75), s(0.5), s(0.25), s(0.5), s(0.75), dim], Activation::Relu, Activation::Linear)
}

/// Image-space DAE with a sigmoid output in `[0, 1]`.
pub fn default_x_dae_layers() -> Vec<LayerSpec> {
    mlp(&[IMAGE_PIXELS, 512, 256, 512, IMAGE_PIXELS], Activation::Relu, Activation::Sigmoid)
}

/// Trains `R` to minimize `||R(x + n) - x||^2` with `n ~ N(0, sigma^2)`.
/// `data` is `[n, dim]`. The noise level is stored on the returned model.
pub fn train_dae(data: &Tensor, layers: Vec<LayerSpec>, sigma: f64, cfg: &TrainConfig) -> Result<(ModelBundle, Vec<f64>)> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("DAE noise sigma must be >= 0, got {sigma}")));
    }
    let (n, dim) = data.as_matrix_dims();
    if data.rank() != 2 || n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = RngStream::new(cfg.seed, streams::DAE);
    let mut model = ModelBundle::init("dae", layers, &mut rng)?;
    if model.input_dim() != dim || model.output_dim() != dim {
        return Err(Error::Model { model: "dae".into(), reason: format!("layers must map {dim} -> {dim}") });
    }
    model.noise_sigma = Some(sigma);
    let mut adam = AdamState::new(cfg.adam);
    let mut epoch_losses = Vec::new();
    let mut steps = 0;
    'outer: for _ in 0..cfg.epochs {
        let mut total = 0.0;
        let mut count = 0;
        for batch in epoch_batches(n, cfg.batch_size, &mut rng) {
            let clean = gather_rows(data, &batch);
            let noise = rng_normal(clean.shape(), 0.0, sigma, &mut rng)?;
            let mut tape = Tape::new();
            let input = tape.constant(clean.add(&noise)?);
            let target = tape.constant(clean);
            let (out, bound) = model.forward(&mut tape, input, ParamMode::Trainable)?;
            let loss = tape.mse(out.output, target)?;
            total += tape.value(loss).item();
            count += 1;
            let mut grads = tape.backward(loss)?;
            let g = model.collect_grads(&bound, &mut grads);
            adam.config.lr = cfg.lr_at(steps, n);
            adam_step(&mut model.params, &g, &mut adam)?;
            steps += 1;
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                epoch_losses.push(total / count as f64);
                break 'outer;
            }
        }
        epoch_losses.push(total / count as f64);
    }
    Ok((model, epoch_losses))
}

/// `(R(x) - x) / sigma^2`, the DAE estimate of the gradient of `log p(x)`.
pub fn dae_score(dae: &ModelBundle, x: &Tensor) -> Result<Tensor> {
    let sigma = match dae.noise_sigma {
        Some(s) if s > 0.0 => s,
        other => {
            return Err(Error::Model {
                model: dae.name.clone(),
                reason: format!("score undefined for DAE noise sigma {other:?}"),
            })
        }
    };
    let r = dae.predict(x)?.reshape(x.shape().to_vec())?;
    r.sub(x)?.scale(1.0 / (sigma * sigma))
}

// ---------------------------------------------------------------- generator

/// 64 -> 256 -> 512 -> 784 with a sigmoid image output.
pub fn default_generator_layers(h_dim: usize) -> Vec<LayerSpec> {
    mlp(&[h_dim, 256, 512, IMAGE_PIXELS], Activation::Relu, Activation::Sigmoid)
}

/// 784 -> 256 -> 64 -> 2 (real, fake).
pub fn default_discriminator_layers() -> Vec<LayerSpec> {
    mlp(&[IMAGE_PIXELS, 256, 64, 2], Activation::Relu, Activation::Linear)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorMode {
    /// `L_img + L_h1 + L_GAN`, no training noise.
    Noiseless,
    /// Adds `L_h` and trains with noise on x, h1 and h.
    Joint,
}

impl std::str::FromStr for GeneratorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noiseless" | "noiseless_3loss" => Ok(GeneratorMode::Noiseless),
            "joint" | "joint_4loss" => Ok(GeneratorMode::Joint),
            _ => Err(Error::InvalidArgument(format!("unknown generator mode '{s}'"))),
        }
    }
}

/// Noise stddevs for the three interleaved autoencoders.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSigmas {
    pub x: f64,
    pub h1: f64,
    pub h: f64,
}

pub const EXTRA_TRAIN_NOISE: &str = "train_noise";

impl NoiseSigmas {
    pub fn to_tensor(self) -> Tensor {
        Tensor::from_parts(vec![3], vec![self.x, self.h1, self.h])
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.data() {
            &[x, h1, h] if x >= 0.0 && h1 >= 0.0 && h >= 0.0 => Ok(NoiseSigmas { x, h1, h }),
            _ => Err(Error::InvalidArgument(format!("noise sigmas need 3 values >= 0, got {:?}", t.shape()))),
        }
    }

    /// Sigmas stored on a generator trained in joint mode.
    pub fn from_generator(generator: &ModelBundle) -> Result<Option<Self>> {
        generator.extras.get(EXTRA_TRAIN_NOISE).map(NoiseSigmas::from_tensor).transpose()
    }

    /// 1% of the mean pixel value, 10% of the mean h1 and h activations.
    pub fn from_data(encoder: &ModelBundle, images: &Tensor) -> Result<Self> {
        let (_, taps) = encoder.predict_taps(images)?;
        let tap_mean = |name: &str| -> Result<f64> {
            taps.get(name)
                .map(|t| t.mean())
                .ok_or_else(|| Error::Model { model: encoder.name.clone(), reason: format!("no tap '{name}'") })
        };
        Ok(NoiseSigmas { x: 0.01 * images.mean(), h1: 0.1 * tap_mean(TAP_H1)?, h: 0.1 * tap_mean(TAP_H)? })
    }
}

/// Feature space(s) for the feature-matching loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureMatch {
    #[default]
    H1,
    H,
    Both,
}

#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub train: TrainConfig,
    pub mode: GeneratorMode,
    pub sigmas: Option<NoiseSigmas>,
    pub feature_match: FeatureMatch,
    pub generator_layers: Option<Vec<LayerSpec>>,
    pub discriminator_layers: Option<Vec<LayerSpec>>,
}

impl GeneratorConfig {
    pub fn new(mode: GeneratorMode, train: TrainConfig) -> Self {
        GeneratorConfig {
            train,
            mode,
            sigmas: None,
            feature_match: FeatureMatch::H1,
            generator_layers: None,
            discriminator_layers: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GeneratorEpoch {
    pub img: f64,
    pub feat: f64,
    pub h: f64,
    pub gan: f64,
    pub d: f64,
    pub d_paused: usize,
    pub g_paused: usize,
}

/// Per-sample squared L2 distance averaged over the batch.
fn sq_l2(tape: &mut Tape, a: crate::autodiff::Var, b: crate::autodiff::Var) -> Result<crate::autodiff::Var> {
    let (_, width) = tape.value(a).as_matrix_dims();
    let m = tape.mse(a, b)?;
    tape.scale(m, width as f64)
}

/// Trains a generator to invert the frozen `encoder`'s `h` code, together with a
/// discriminator. Returns `(G, D, per-epoch stats)`.
pub fn train_generator(
    encoder: &ModelBundle,
    images: &Tensor,
    cfg: &GeneratorConfig,
) -> Result<(ModelBundle, ModelBundle, Vec<GeneratorEpoch>)> {
    let (n, dim) = images.as_matrix_dims();
    if images.rank() != 2 || n == 0 {
        return Err(Error::EmptyDataset);
    }
    if dim != encoder.input_dim() {
        return Err(Error::Model { model: encoder.name.clone(), reason: format!("encoder expects {} inputs", encoder.input_dim()) });
    }
    let h_dim = encoder.tap_width(TAP_H)?;
    encoder.tap_width(TAP_H1)?;
    let sigmas = match (cfg.mode, cfg.sigmas) {
        (GeneratorMode::Joint, None) => {
            return Err(Error::InvalidArgument("joint mode requires noise sigmas for x, h1 and h".into()))
        }
        (GeneratorMode::Joint, Some(s)) => Some(s),
        (GeneratorMode::Noiseless, _) => None,
    };

    let mut rng = RngStream::new(cfg.train.seed, streams::GENERATOR);
    let g_layers = cfg.generator_layers.clone().unwrap_or_else(|| default_generator_layers(h_dim));
    let d_layers = cfg.discriminator_layers.clone().unwrap_or_else(default_discriminator_layers);
    let mut gen = ModelBundle::init("generator", g_layers, &mut rng)?;
    if let Some(s) = sigmas {
        gen.extras.insert(EXTRA_TRAIN_NOISE.to_string(), s.to_tensor());
    }
    let mut disc = ModelBundle::init("discriminator", d_layers, &mut rng)?;
    if gen.input_dim() != h_dim || gen.output_dim() != dim {
        return Err(Error::Model { model: gen.name.clone(), reason: format!("generator must map {h_dim} -> {dim}") });
    }
    if disc.input_dim() != dim || disc.output_dim() != 2 {
        return Err(Error::Model { model: disc.name.clone(), reason: "discriminator must map images to 2 outputs".into() });
    }
    let mut adam_g = AdamState::new(cfg.train.adam);
    let mut adam_d = AdamState::new(cfg.train.adam);
    let mut balance = GanBalanceState { train_d: true, train_g: true, r: 1.0 };
    let mut history = Vec::new();
    let mut steps = 0;

    'outer: for _ in 0..cfg.train.epochs {
        let mut stats = GeneratorEpoch::default();
        let mut count = 0.0;
        for batch in epoch_batches(n, cfg.train.batch_size, &mut rng) {
            let x = gather_rows(images, &batch);
            let rows = batch.len();

            // Clean targets from the frozen encoder.
            let (_, clean_taps) = encoder.predict_taps(&x)?;
            let h1_target = clean_taps[TAP_H1].clone();
            let h_target = clean_taps[TAP_H].clone();

            // Generator input code, noised at x, h1 and h in joint mode.
            let code = match sigmas {
                None => h_target.clone(),
                Some(s) => {
                    let x_noisy = x.add(&rng_normal(x.shape(), 0.0, s.x, &mut rng)?)?;
                    let mut tap_noise = BTreeMap::new();
                    tap_noise.insert(TAP_H1.to_string(), rng_normal(h1_target.shape(), 0.0, s.h1, &mut rng)?);
                    let mut tape = Tape::new();
                    let input = tape.constant(x_noisy);
                    let bound = encoder.bind(&mut tape, ParamMode::Frozen);
                    let out = encoder.forward_noisy(&mut tape, &bound, input, &tap_noise)?;
                    let h = tape.value(out.tap(TAP_H)?).clone();
                    h.add(&rng_normal(h.shape(), 0.0, s.h, &mut rng)?)?
                }
            };

            // Generator step.
            let mut tape = Tape::new();
            let code_var = tape.constant(code);
            let (g_out, g_bound) = gen.forward(&mut tape, code_var, ParamMode::Trainable)?;
            let x_hat = g_out.output;
            let x_var = tape.constant(x.clone());
            let l_img = sq_l2(&mut tape, x_hat, x_var)?;
            let (e_out, _) = encoder.forward(&mut tape, x_hat, ParamMode::Frozen)?;
            let h1_t = tape.constant(h1_target);
            let h_t = tape.constant(h_target);
            let h1_hat = e_out.tap(TAP_H1)?;
            let h_hat = e_out.tap(TAP_H)?;
            let l_feat = match cfg.feature_match {
                FeatureMatch::H1 => sq_l2(&mut tape, h1_hat, h1_t)?,
                FeatureMatch::H => sq_l2(&mut tape, h_hat, h_t)?,
                FeatureMatch::Both => {
                    let a = sq_l2(&mut tape, h1_hat, h1_t)?;
                    let b = sq_l2(&mut tape, h_hat, h_t)?;
                    tape.add(a, b)?
                }
            };
            let (d_fake, _) = disc.forward(&mut tape, x_hat, ParamMode::Frozen)?;
            let real_in = tape.constant(x.clone());
            let (d_real, _) = disc.forward(&mut tape, real_in, ParamMode::Frozen)?;
            let gl = gan_losses(&mut tape, d_real.output, d_fake.output)?;
            let mut total = tape.add(l_img, l_feat)?;
            let mut l_h_value = 0.0;
            if cfg.mode == GeneratorMode::Joint {
                let l_h = sq_l2(&mut tape, h_hat, h_t)?;
                l_h_value = tape.value(l_h).item();
                total = tape.add(total, l_h)?;
            }
            let total = tape.add(total, gl.g_loss)?;
            let loss_g = tape.value(gl.g_loss).item();
            let loss_d = tape.value(gl.d_loss).item();
            stats.img += tape.value(l_img).item();
            stats.feat += tape.value(l_feat).item();
            stats.h += l_h_value;
            stats.gan += loss_g;
            stats.d += loss_d;
            count += 1.0;

            let x_hat_value = tape.value(x_hat).clone();
            if balance.train_g {
                let mut grads = tape.backward(total)?;
                let g = gen.collect_grads(&g_bound, &mut grads);
                adam_g.config.lr = cfg.train.lr_at(steps, n);
                adam_step(&mut gen.params, &g, &mut adam_g)?;
            } else {
                stats.g_paused += 1;
            }
            drop(tape);

            // Discriminator step on the generator output before its update.
            if balance.train_d {
                let mut tape = Tape::new();
                let d_bound = disc.bind(&mut tape, ParamMode::Trainable);
                let real = tape.constant(x);
                let fake = tape.constant(x_hat_value);
                let dr = disc.forward_bound(&mut tape, &d_bound, real)?;
                let df = disc.forward_bound(&mut tape, &d_bound, fake)?;
                let gl = gan_losses(&mut tape, dr.output, df.output)?;
                let mut grads = tape.backward(gl.d_loss)?;
                let g = disc.collect_grads(&d_bound, &mut grads);
                adam_d.config.lr = cfg.train.lr_at(steps, n);
                adam_step(&mut disc.params, &g, &mut adam_d)?;
            } else {
                stats.d_paused += 1;
            }
            debug_assert!(rows > 0);

            balance = gan_balance(loss_d, loss_g);
            steps += 1;
            if cfg.train.max_steps.is_some_and(|m| steps >= m) {
                history.push(finish_epoch(stats, count));
                break 'outer;
            }
        }
        history.push(finish_epoch(stats, count));
    }
    Ok((gen, disc, history))
}

fn finish_epoch(mut s: GeneratorEpoch, count: f64) -> GeneratorEpoch {
    if count > 0.0 {
        s.img /= count;
        s.feat /= count;
        s.h /= count;
        s.gan /= count;
        s.d /= count;
    }
    s
}

/// Per-pixel RMSE of `G(E(x))` against `x`, averaged over rows.
pub fn reconstruction_rmse(encoder: &ModelBundle, generator: &ModelBundle, images: &Tensor) -> Result<f64> {
    let (_, taps) = encoder.predict_taps(images)?;
    let recon = generator.predict(&taps[TAP_H])?;
    let x = as_batch(images)?;
    let mse = recon.sub(&x)?.data().iter().map(|v| v * v).sum::<f64>() / x.numel() as f64;
    Ok(mse.sqrt())
}
