//! The PPGN sampler variants, inpainting, and hidden-unit conditioning.
//!
//! Every variant is a decoupled three-term chain. Pixel-space chains (PPGN-x)
//! walk images directly; the others walk the generator's input code `h` and
//! record `G(h)` as the sample.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nets::losses::{class_objective, softmax_row, ClassGradient};
use crate::nets::model::{as_batch, ModelBundle, ParamMode};
use crate::nets::train::{NoiseSigmas, TAP_H, TAP_H1};
use crate::rng::{rng_normal, RngStream};
use crate::samplers::{decoupled_step_terms, run_chain, ChainRecord, Observation, SamplerConfig, StepOutcome};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariantKind {
    PpgnX,
    DgnAm,
    PpgnH,
    JointPpgnH,
    NoiselessJoint,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] =
        [VariantKind::PpgnX, VariantKind::DgnAm, VariantKind::PpgnH, VariantKind::JointPpgnH, VariantKind::NoiselessJoint];

    /// Default `(eps1, eps2, eps3)`. For DGN-AM `eps1` is the decay `lambda`.
    pub fn default_eps(self) -> (f64, f64, f64) {
        match self {
            // Noise 25.6 on a 0..255 pixel scale.
            VariantKind::PpgnX => (1.0, 1e5, 25.6 / 255.0),
            VariantKind::DgnAm => (0.0, 1.0, 1e-17),
            VariantKind::PpgnH | VariantKind::JointPpgnH => (1e-5, 1.0, 1e-5),
            VariantKind::NoiselessJoint => (1e-5, 1.0, 1e-17),
        }
    }

    pub fn default_config(self, steps: usize, seed: u64) -> SamplerConfig {
        let (eps1, eps2, eps3) = self.default_eps();
        SamplerConfig { eps1, eps2, eps3, steps, seed }
    }

    pub fn is_code_space(self) -> bool {
        self != VariantKind::PpgnX
    }

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::PpgnX => "ppgn_x",
            VariantKind::DgnAm => "dgn_am",
            VariantKind::PpgnH => "ppgn_h",
            VariantKind::JointPpgnH => "joint_ppgn_h",
            VariantKind::NoiselessJoint => "noiseless_joint",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant '{s}'")))
    }
}

/// The networks a variant may draw on.
#[derive(Clone, Copy, Debug, Default)]
pub struct Models<'a> {
    pub generator: Option<&'a ModelBundle>,
    pub encoder: Option<&'a ModelBundle>,
    pub h_dae: Option<&'a ModelBundle>,
    pub x_dae: Option<&'a ModelBundle>,
    /// Training noise for the joint variant's internal noise.
    pub noise: Option<NoiseSigmas>,
}

fn require<'a>(m: Option<&'a ModelBundle>, what: &str, kind: VariantKind) -> Result<&'a ModelBundle> {
    m.ok_or_else(|| Error::InvalidArgument(format!("variant {kind} requires a {what}")))
}

/// Where a code-space step adds its `eps3` noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoisePlacement {
    /// After the prior and condition terms.
    #[default]
    After,
    /// To the code before it is reconstructed; the whole step then starts
    /// from the perturbed code.
    Before,
}

impl FromStr for NoisePlacement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "after" => Ok(NoisePlacement::After),
            "before" => Ok(NoisePlacement::Before),
            _ => Err(Error::InvalidArgument(format!("unknown noise placement '{s}' (after or before)"))),
        }
    }
}

/// A variant plus its sampler settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariantSpec {
    pub kind: VariantKind,
    pub config: SamplerConfig,
    /// Gaussian-prior decay for DGN-AM.
    pub lambda_decay: f64,
    /// Ignored by PPGN-x.
    pub noise_placement: NoisePlacement,
}

impl VariantSpec {
    pub fn with_defaults(kind: VariantKind, steps: usize, seed: u64) -> Self {
        let config = kind.default_config(steps, seed);
        let lambda_decay = if kind == VariantKind::DgnAm { config.eps1 } else { 0.0 };
        VariantSpec { kind, config, lambda_decay, noise_placement: NoisePlacement::After }
    }

    /// Checks that the models the variant needs are present and fit together.
    pub fn check_models(&self, models: &Models, condition: &Condition) -> Result<()> {
        self.config.validate()?;
        if !(self.lambda_decay >= 0.0) || !self.lambda_decay.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda_decay must be >= 0, got {}", self.lambda_decay)));
        }
        let kind = self.kind;
        if kind == VariantKind::PpgnX {
            let r = require(models.x_dae, "pixel-space DAE", kind)?;
            if r.input_dim() != condition.model.input_dim() || r.output_dim() != r.input_dim() {
                return Err(Error::Model { model: r.name.clone(), reason: "DAE and condition image sizes differ".into() });
            }
            return Ok(());
        }
        let g = require(models.generator, "generator", kind)?;
        if g.output_dim() != condition.model.input_dim() {
            return Err(Error::Model { model: g.name.clone(), reason: "generator output does not fit the condition network".into() });
        }
        match kind {
            VariantKind::PpgnH => {
                let r = require(models.h_dae, "code-space DAE", kind)?;
                if r.input_dim() != g.input_dim() || r.output_dim() != g.input_dim() {
                    return Err(Error::Model { model: r.name.clone(), reason: "DAE width differs from the generator code".into() });
                }
            }
            VariantKind::JointPpgnH | VariantKind::NoiselessJoint => {
                let e = require(models.encoder, "encoder", kind)?;
                if e.tap_width(TAP_H)? != g.input_dim() || e.input_dim() != g.output_dim() {
                    return Err(Error::Model { model: e.name.clone(), reason: "encoder and generator are not inverse shapes".into() });
                }
                if kind == VariantKind::JointPpgnH && models.noise.is_none() {
                    return Err(Error::InvalidArgument("joint_ppgn_h requires noise sigmas for x, h1 and h".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

// ----------------------------------------------------------------- condition

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConditionKind {
    OutputClass,
    /// A unit of the named tap, scored by a softmax over the whole layer.
    HiddenUnit { tap: String },
}

#[derive(Clone, Debug)]
pub struct Condition<'a> {
    pub model: &'a ModelBundle,
    pub kind: ConditionKind,
    pub unit: usize,
    pub variant: ClassGradient,
}

impl<'a> Condition<'a> {
    pub fn output_class(model: &'a ModelBundle, class: usize) -> Result<Self> {
        if class >= model.output_dim() {
            return Err(Error::InvalidArgument(format!("class {class} out of range for {} outputs", model.output_dim())));
        }
        Ok(Condition { model, kind: ConditionKind::OutputClass, unit: class, variant: ClassGradient::LogSoftmax })
    }

    pub fn hidden_unit(model: &'a ModelBundle, tap: &str, unit: usize) -> Result<Self> {
        let width = model.tap_width(tap)?;
        if unit >= width {
            return Err(Error::InvalidArgument(format!("unit {unit} out of range for tap '{tap}' of width {width}")));
        }
        Ok(Condition { model, kind: ConditionKind::HiddenUnit { tap: tap.to_string() }, unit, variant: ClassGradient::LogSoftmax })
    }

    /// Records the conditioning objective of a `[1, d]` image on `tape`.
    fn record(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (out, _) = self.model.forward(tape, x, ParamMode::Frozen)?;
        let scores = match &self.kind {
            ConditionKind::OutputClass => out.output,
            ConditionKind::HiddenUnit { tap } => out.tap(tap)?,
        };
        class_objective(tape, scores, self.unit, self.variant)
    }

    /// Probability of the conditioned unit under a softmax over its layer.
    pub fn confidence(&self, x: &Tensor) -> Result<f64> {
        let (out, taps) = self.model.predict_taps(x)?;
        let scores = match &self.kind {
            ConditionKind::OutputClass => out,
            ConditionKind::HiddenUnit { tap } => taps
                .get(tap)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("unknown tap '{tap}'")))?,
        };
        Ok(softmax_row(&scores.data()[..scores.as_matrix_dims().1])[self.unit].clamp(0.0, 1.0))
    }
}

/// Gradient of the condition's log-probability with respect to the image.
pub fn condition_grad(condition: &Condition, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let input = tape.leaf(as_batch(x)?);
    let objective = condition.record(&mut tape, input)?;
    tape.backward(objective)?.get(input).reshape(x.shape().to_vec())
}

// -------------------------------------------------------------- reconstruct

/// A code-space denoiser `R_h`.
pub trait Reconstructor {
    fn reconstruct(&self, h: &Tensor, rng: &mut RngStream) -> Result<Tensor>;
}

/// A trained DAE.
impl Reconstructor for ModelBundle {
    fn reconstruct(&self, h: &Tensor, _rng: &mut RngStream) -> Result<Tensor> {
        self.predict(h)?.reshape(h.shape().to_vec())
    }
}

/// `R_h(h) = E(G(h))`, optionally with training noise injected on `x` and `h1`.
#[derive(Clone, Copy, Debug)]
pub struct EncoderGenerator<'a> {
    pub encoder: &'a ModelBundle,
    pub generator: &'a ModelBundle,
    pub noise: Option<NoiseSigmas>,
}

impl Reconstructor for EncoderGenerator<'_> {
    fn reconstruct(&self, h: &Tensor, rng: &mut RngStream) -> Result<Tensor> {
        let x = self.generator.predict(h)?;
        let code = match self.noise {
            None => self.encoder.predict_taps(&x)?.1.remove(TAP_H),
            Some(s) => {
                let x = x.add(&rng_normal(x.shape(), 0.0, s.x, rng)?)?;
                let h1_width = self.encoder.tap_width(TAP_H1)?;
                let tap_noise = [(TAP_H1.to_string(), rng_normal(&[1, h1_width], 0.0, s.h1, rng)?)].into();
                let mut tape = Tape::new();
                let input = tape.constant(x);
                let bound = self.encoder.bind(&mut tape, ParamMode::Frozen);
                let out = self.encoder.forward_noisy(&mut tape, &bound, input, &tap_noise)?;
                Some(tape.value(out.tap(TAP_H)?).clone())
            }
        };
        code.ok_or_else(|| Error::Model { model: self.encoder.name.clone(), reason: format!("no tap '{TAP_H}'") })?
            .reshape(h.shape().to_vec())
    }
}

// ---------------------------------------------------------------- inpainting

#[derive(Clone, Debug)]
pub struct MaskedImage {
    pub x_real: Tensor,
    /// 1 marks pixels to synthesize, 0 marks observed pixels.
    pub mask: Tensor,
}

impl MaskedImage {
    pub fn new(x_real: Tensor, mask: Tensor) -> Result<Self> {
        if x_real.shape() != mask.shape() {
            return Err(Error::shape("MaskedImage", &[x_real.shape(), mask.shape()]));
        }
        if mask.data().iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::InvalidArgument("mask must be binary".into()));
        }
        if x_real.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("x_real pixels must lie in [0, 1]".into()));
        }
        Ok(MaskedImage { x_real, mask })
    }

    /// Masks the `w x h` rectangle at column `x`, row `y` of a square image.
    pub fn rectangle(x_real: Tensor, side: usize, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x_real.numel() != side * side || x + w > side || y + h > side {
            return Err(Error::InvalidArgument(format!("mask rectangle ({x},{y},{w},{h}) outside {side}x{side} image")));
        }
        let mut m = vec![0.0; side * side];
        for r in y..y + h {
            for c in x..x + w {
                m[r * side + c] = 1.0;
            }
        }
        let mask = Tensor::new(x_real.shape().to_vec(), m)?;
        MaskedImage::new(x_real, mask)
    }

    /// `M * x + (1 - M) * x_real`.
    pub fn clamp(&self, x: &Tensor) -> Result<Tensor> {
        let x = x.reshape(self.x_real.shape().to_vec())?;
        let data = x
            .data()
            .iter()
            .zip(self.mask.data())
            .zip(self.x_real.data())
            .map(|((&v, &m), &r)| m * v + (1.0 - m) * r)
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    fn complement(&self) -> Tensor {
        Tensor::from_parts(self.mask.shape().to_vec(), self.mask.data().iter().map(|m| 1.0 - m).collect())
    }
}

struct Inpainting<'m> {
    masked: &'m MaskedImage,
    context_weight: f64,
}

// ------------------------------------------------------------- code space

/// Decoding and conditioning through the generator.
struct CodeSpace<'a, 'c> {
    generator: &'a ModelBundle,
    condition: &'c Condition<'c>,
    inpaint: Option<Inpainting<'c>>,
}

impl CodeSpace<'_, '_> {
    fn decode(&self, h: &Tensor) -> Result<Tensor> {
        let x = self.generator.predict(h)?;
        match &self.inpaint {
            None => x.reshape(vec![x.numel()]),
            Some(p) => p.masked.clamp(&x)?.reshape(vec![x.numel()]),
        }
    }

    fn observe(&self, h: &Tensor) -> Result<Observation> {
        let sample = self.decode(h)?;
        let confidence = self.condition.confidence(&sample)?;
        Ok(Observation { sample, confidence })
    }

    /// d/dh of the condition objective on the (clamped) decoded image, minus
    /// the weighted context mismatch when inpainting.
    fn cond_grad(&self, h: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let code = tape.leaf(as_batch(h)?);
        let (g_out, _) = self.generator.forward(&mut tape, code, ParamMode::Frozen)?;
        let x = g_out.output;
        let objective = match &self.inpaint {
            None => self.condition.record(&mut tape, x)?,
            Some(p) => {
                let width = p.masked.mask.numel();
                let mask = tape.constant(p.masked.mask.reshape(vec![1, width])?);
                let keep = tape.constant(p.masked.complement().reshape(vec![1, width])?);
                let real = tape.constant(p.masked.x_real.reshape(vec![1, width])?);
                let free = tape.mul(x, mask)?;
                let observed = tape.mul(real, keep)?;
                let clamped = tape.add(free, observed)?;
                let objective = self.condition.record(&mut tape, clamped)?;
                if p.context_weight > 0.0 {
                    let diff = tape.sub(real, x)?;
                    let diff = tape.mul(diff, keep)?;
                    let sq = tape.mul(diff, diff)?;
                    let mismatch = tape.sum(sq)?;
                    let penalty = tape.scale(mismatch, -p.context_weight)?;
                    tape.add(objective, penalty)?
                } else {
                    objective
                }
            }
        };
        tape.backward(objective)?.get(code).reshape(h.shape().to_vec())
    }
}

/// The prior term of a code-space chain.
enum CodePrior<'r> {
    /// `-h`: the Gaussian prior of DGN-AM.
    Decay,
    /// `R_h(h) - h`.
    Denoiser(&'r dyn Reconstructor),
}

fn code_chain(
    space: &CodeSpace,
    prior: CodePrior,
    h0: &Tensor,
    cfg: &SamplerConfig,
    placement: NoisePlacement,
    chain: usize,
) -> Result<ChainRecord> {
    cfg.validate()?;
    if h0.numel() != space.generator.input_dim() {
        return Err(Error::Model {
            model: space.generator.name.clone(),
            reason: format!("initial code has {} values, generator expects {}", h0.numel(), space.generator.input_dim()),
        });
    }
    let h0 = h0.reshape(vec![h0.numel()])?;
    let mut rng = RngStream::for_chain(cfg.seed, chain);
    let noiseless = SamplerConfig { eps3: 0.0, ..*cfg };
    let step = |h: &Tensor, rng: &mut RngStream| -> Result<StepOutcome> {
        let (h, cfg) = match placement {
            NoisePlacement::After => (h.clone(), cfg),
            NoisePlacement::Before => (h.add(&rng_normal(h.shape(), 0.0, cfg.eps3, rng)?)?, &noiseless),
        };
        let h = &h;
        let prior_term = if cfg.eps1 != 0.0 {
            Some(match &prior {
                CodePrior::Decay => h.scale(-1.0)?,
                CodePrior::Denoiser(r) => r.reconstruct(h, rng)?.sub(h)?,
            })
        } else {
            None
        };
        let prior_fn = |_: &Tensor| prior_term.clone().ok_or_else(|| Error::InvalidArgument("prior not evaluated".into()));
        decoupled_step_terms(prior_fn, |h: &Tensor| space.cond_grad(h), h, cfg, rng)
    };
    run_chain(step, h0, cfg, &mut rng, 1, |h: &Tensor| space.observe(h))
}

/// DGN-AM: `h' = (1 - lambda) h + eps2 * grad + noise`. `cfg.eps1` is ignored.
pub fn sample_dgn_am(
    generator: &ModelBundle,
    condition: &Condition,
    h0: &Tensor,
    cfg: &SamplerConfig,
    lambda_decay: f64,
    chain: usize,
) -> Result<ChainRecord> {
    let cfg = SamplerConfig { eps1: lambda_decay, ..*cfg };
    let space = CodeSpace { generator, condition, inpaint: None };
    code_chain(&space, CodePrior::Decay, h0, &cfg, NoisePlacement::After, chain)
}

/// PPGN-h with any code-space denoiser.
pub fn sample_ppgn_h(
    generator: &ModelBundle,
    r_h: &dyn Reconstructor,
    condition: &Condition,
    h0: &Tensor,
    cfg: &SamplerConfig,
    chain: usize,
) -> Result<ChainRecord> {
    let space = CodeSpace { generator, condition, inpaint: None };
    code_chain(&space, CodePrior::Denoiser(r_h), h0, cfg, NoisePlacement::After, chain)
}

/// Joint PPGN-h (`noise` given) or its noiseless form (`noise = None`), with
/// `R_h = E o G`.
pub fn sample_joint(
    generator: &ModelBundle,
    encoder: &ModelBundle,
    condition: &Condition,
    h0: &Tensor,
    cfg: &SamplerConfig,
    noise: Option<NoiseSigmas>,
    chain: usize,
) -> Result<ChainRecord> {
    let r = EncoderGenerator { encoder, generator, noise };
    sample_ppgn_h(generator, &r, condition, h0, cfg, chain)
}

/// PPGN-x: `x' = x + eps1 (R_x(x) - x) + eps2 grad + noise`, pixels clamped to
/// `[0, 1]` after each step. Without a DAE the prior term must be switched off,
/// which gives plain pixel-space activation maximization.
pub fn sample_ppgn_x(
    x_dae: Option<&ModelBundle>,
    condition: &Condition,
    x0: &Tensor,
    cfg: &SamplerConfig,
    chain: usize,
) -> Result<ChainRecord> {
    cfg.validate()?;
    if cfg.eps1 != 0.0 && x_dae.is_none() {
        return Err(Error::InvalidArgument("ppgn_x with eps1 > 0 requires a pixel-space DAE".into()));
    }
    if x0.numel() != condition.model.input_dim() {
        return Err(Error::Model { model: condition.model.name.clone(), reason: "initial image has the wrong size".into() });
    }
    let x0 = x0.reshape(vec![x0.numel()])?;
    let mut rng = RngStream::for_chain(cfg.seed, chain);
    let step = |x: &Tensor, rng: &mut RngStream| -> Result<StepOutcome> {
        let prior = |x: &Tensor| match x_dae {
            Some(r) => r.predict(x)?.reshape(x.shape().to_vec())?.sub(x),
            None => Err(Error::InvalidArgument("no pixel-space DAE".into())),
        };
        let mut out = decoupled_step_terms(prior, |x: &Tensor| condition_grad(condition, x), x, cfg, rng)?;
        out.state = out.state.clamp(0.0, 1.0);
        Ok(out)
    };
    let observe = |x: &Tensor| Ok(Observation { sample: x.clone(), confidence: condition.confidence(x)? });
    run_chain(step, x0, cfg, &mut rng, 1, observe)
}

/// Runs any variant from `init` (an image for PPGN-x, a code otherwise).
pub fn sample_variant(spec: &VariantSpec, models: &Models, condition: &Condition, init: &Tensor, chain: usize) -> Result<ChainRecord> {
    spec.check_models(models, condition)?;
    let cfg = &spec.config;
    if spec.kind == VariantKind::PpgnX {
        return sample_ppgn_x(models.x_dae, condition, init, cfg, chain);
    }
    let generator = require(models.generator, "generator", spec.kind)?;
    let space = CodeSpace { generator, condition, inpaint: None };
    code_space_variant(spec, models, &space, init, chain)
}

/// Picks the prior for a code-space variant and runs its chain.
fn code_space_variant(spec: &VariantSpec, models: &Models, space: &CodeSpace, h0: &Tensor, chain: usize) -> Result<ChainRecord> {
    let generator = space.generator;
    let eg;
    let (prior, cfg) = match spec.kind {
        VariantKind::DgnAm => (CodePrior::Decay, SamplerConfig { eps1: spec.lambda_decay, ..spec.config }),
        VariantKind::PpgnH => (CodePrior::Denoiser(require(models.h_dae, "code-space DAE", spec.kind)?), spec.config),
        VariantKind::JointPpgnH | VariantKind::NoiselessJoint => {
            let noise = if spec.kind == VariantKind::JointPpgnH { models.noise } else { None };
            eg = EncoderGenerator { encoder: require(models.encoder, "encoder", spec.kind)?, generator, noise };
            (CodePrior::Denoiser(&eg), spec.config)
        }
        VariantKind::PpgnX => return Err(Error::InvalidArgument("ppgn_x does not sample a code".into())),
    };
    code_chain(space, prior, h0, &cfg, spec.noise_placement, chain)
}

/// Code-space sampling with the observed pixels clamped to `masked.x_real`.
/// With `context_weight > 0` the condition term also pulls the unclamped
/// generator output toward the observed context.
pub fn inpaint(
    spec: &VariantSpec,
    models: &Models,
    masked: &MaskedImage,
    condition: &Condition,
    h0: &Tensor,
    context_weight: f64,
    chain: usize,
) -> Result<ChainRecord> {
    if !spec.kind.is_code_space() {
        return Err(Error::InvalidArgument("inpainting needs a code-space variant".into()));
    }
    if !(context_weight >= 0.0) || !context_weight.is_finite() {
        return Err(Error::InvalidArgument(format!("context_weight must be >= 0, got {context_weight}")));
    }
    spec.check_models(models, condition)?;
    let generator = require(models.generator, "generator", spec.kind)?;
    if masked.mask.numel() != generator.output_dim() {
        return Err(Error::shape("inpaint", &[masked.mask.shape(), &[generator.output_dim()]]));
    }
    let space = CodeSpace { generator, condition, inpaint: Some(Inpainting { masked, context_weight }) };
    code_space_variant(spec, models, &space, h0, chain)
}

/// Starting code `E_h(x)` for a chain seeded from an image.
pub fn encode(encoder: &ModelBundle, x: &Tensor) -> Result<Tensor> {
    let (_, taps) = encoder.predict_taps(x)?;
    let h = taps
        .get(TAP_H)
        .ok_or_else(|| Error::Model { model: encoder.name.clone(), reason: format!("no tap '{TAP_H}'") })?;
    h.reshape(vec![h.numel()])
}

// -------------------------------------------------------------------- sweeps

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Eps1,
    Eps3,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps1" => Ok(SweepAxis::Eps1),
            "eps3" => Ok(SweepAxis::Eps3),
            _ => Err(Error::InvalidArgument(format!("unknown sweep axis '{s}' (eps1 or eps3)"))),
        }
    }
}

pub const EPS1_GRID: [f64; 6] = [1e-1, 1e-3, 1e-5, 1e-7, 1e-11, 0.0];
pub const EPS3_GRID: [f64; 5] = [1e-1, 1e-5, 1e-9, 1e-13, 1e-17];

/// `base` with one multiplier replaced by each grid value.
pub fn sweep(axis: SweepAxis, base: &SamplerConfig) -> Vec<SamplerConfig> {
    match axis {
        SweepAxis::Eps1 => EPS1_GRID.iter().map(|&eps1| SamplerConfig { eps1, ..*base }).collect(),
        SweepAxis::Eps3 => EPS3_GRID.iter().map(|&eps3| SamplerConfig { eps3, ..*base }).collect(),
    }
}
