//! Class-gradient variants, adversarial losses and the GAN balance rule.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nets::model::{as_batch, ModelBundle, ParamMode};
use crate::tensor::Tensor;

/// Which scalar of the classifier output the class gradient differentiates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClassGradient {
    /// Raw logit `l_i`.
    Logit,
    /// Softmax probability `s_i`.
    Softmax,
    /// `log s_i = log p(y = i | x)`, the term the sampler needs.
    #[default]
    LogSoftmax,
}

impl std::str::FromStr for ClassGradient {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(ClassGradient::Logit),
            "softmax" => Ok(ClassGradient::Softmax),
            "log_softmax" => Ok(ClassGradient::LogSoftmax),
            _ => Err(Error::InvalidArgument(format!("unknown class gradient variant '{s}'"))),
        }
    }
}

/// Records the chosen class objective, summed over batch rows.
pub fn class_objective(tape: &mut Tape, logits: Var, target: usize, variant: ClassGradient) -> Result<Var> {
    let width = tape.value(logits).as_matrix_dims().1;
    if target >= width {
        return Err(Error::InvalidArgument(format!("target unit {target} out of range for {width} outputs")));
    }
    let scores = match variant {
        ClassGradient::Logit => logits,
        ClassGradient::Softmax => tape.softmax(logits)?,
        ClassGradient::LogSoftmax => tape.log_softmax(logits)?,
    };
    let picked = tape.slice(scores, target, target + 1)?;
    tape.sum(picked)
}

/// Gradient of the chosen class score of `classifier` with respect to its input.
pub fn class_gradient(classifier: &ModelBundle, x: &Tensor, target: usize, variant: ClassGradient) -> Result<Tensor> {
    if target >= classifier.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "target unit {target} out of range for {} outputs",
            classifier.output_dim()
        )));
    }
    let mut tape = Tape::new();
    let input = tape.leaf(as_batch(x)?);
    let (out, _) = classifier.forward(&mut tape, input, ParamMode::Frozen)?;
    let objective = class_objective(&mut tape, out.output, target, variant)?;
    let g = tape.backward(objective)?.get(input);
    g.reshape(x.shape().to_vec())
}

/// Softmax probability of `target` for every row of `x`.
pub fn class_probabilities(classifier: &ModelBundle, x: &Tensor, target: usize) -> Result<Vec<f64>> {
    let logits = classifier.predict(x)?;
    let (rows, cols) = logits.as_matrix_dims();
    if target >= cols {
        return Err(Error::InvalidArgument(format!("target {target} out of range for {cols} outputs")));
    }
    Ok((0..rows).map(|r| softmax_row(&logits.data()[r * cols..(r + 1) * cols])[target]).collect())
}

pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Discriminator output column holding the "real" class.
pub const REAL: usize = 0;
/// Discriminator output column holding the "fake" class.
pub const FAKE: usize = 1;

#[derive(Clone, Copy, Debug)]
pub struct GanLosses {
    /// `-mean[log D(x) + log(1 - D(G(h)))]`
    pub d_loss: Var,
    /// `-mean log D(G(h))`
    pub g_loss: Var,
}

/// Adversarial losses for a two-output discriminator, with probabilities taken
/// by softmax over the real/fake logits. Losses are averaged over the batch.
pub fn gan_losses(tape: &mut Tape, real_logits: Var, fake_logits: Var) -> Result<GanLosses> {
    for v in [real_logits, fake_logits] {
        let w = tape.value(v).as_matrix_dims().1;
        if w != 2 {
            return Err(Error::InvalidArgument(format!("discriminator must have 2 outputs, got {w}")));
        }
    }
    let rows_real = tape.value(real_logits).as_matrix_dims().0 as f64;
    let rows_fake = tape.value(fake_logits).as_matrix_dims().0 as f64;

    let lr = tape.log_softmax(real_logits)?;
    let lf = tape.log_softmax(fake_logits)?;
    let real_as_real = tape.slice(lr, REAL, REAL + 1)?;
    let fake_as_fake = tape.slice(lf, FAKE, FAKE + 1)?;
    let fake_as_real = tape.slice(lf, REAL, REAL + 1)?;

    let a = tape.sum(real_as_real)?;
    let a = tape.scale(a, -1.0 / rows_real)?;
    let b = tape.sum(fake_as_fake)?;
    let b = tape.scale(b, -1.0 / rows_fake)?;
    let d_loss = tape.add(a, b)?;
    let g = tape.sum(fake_as_real)?;
    let g_loss = tape.scale(g, -1.0 / rows_fake)?;
    Ok(GanLosses { d_loss, g_loss })
}

/// Which adversary trains on the next step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanBalanceState {
    pub train_d: bool,
    pub train_g: bool,
    pub r: f64,
}

/// Pause D when `loss_d / loss_g < 0.1`, pause G when it exceeds 10.
pub fn gan_balance(loss_d: f64, loss_g: f64) -> GanBalanceState {
    let r = if loss_g == 0.0 { f64::INFINITY } else { loss_d / loss_g };
    GanBalanceState { train_d: !(r < 0.1), train_g: !(r > 10.0), r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::model::{bias_name, weight_name, Activation, LayerSpec};
    use crate::rng::RngStream;

    #[test]
    fn log_softmax_gradient_at_boundary() {
        let mut c = ModelBundle::init("c", vec![LayerSpec::new(3, 2, Activation::Linear)], &mut RngStream::new(0, 0)).unwrap();
        // Columns are the class weight vectors w0, w1; bias zero and x orthogonal
        // to (w0 - w1) gives s = (0.5, 0.5).
        let w = Tensor::matrix(3, 2, vec![1.0, 1.0, 2.0, -1.0, 0.5, 3.0]).unwrap();
        c.params.insert(weight_name(0), w);
        c.params.insert(bias_name(0), Tensor::zeros(&[2]));
        let x = Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap();
        let g = class_gradient(&c, &x, 0, ClassGradient::LogSoftmax).unwrap();
        let expected = [0.5 * (1.0 - 1.0), 0.5 * (2.0 + 1.0), 0.5 * (0.5 - 3.0)];
        for (a, b) in g.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_target_rejected() {
        let c = ModelBundle::init("c", vec![LayerSpec::new(3, 2, Activation::Linear)], &mut RngStream::new(0, 0)).unwrap();
        assert!(class_gradient(&c, &Tensor::zeros(&[3]), 2, ClassGradient::Logit).is_err());
        assert!("bogus".parse::<ClassGradient>().is_err());
    }

    #[test]
    fn uniform_discriminator_loss() {
        let mut tape = Tape::new();
        let real = tape.constant(Tensor::zeros(&[4, 2]));
        let fake = tape.constant(Tensor::zeros(&[4, 2]));
        let l = gan_losses(&mut tape, real, fake).unwrap();
        assert!((tape.value(l.d_loss).item() - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((tape.value(l.g_loss).item() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_discriminator_real_term_vanishes() {
        let mut tape = Tape::new();
        let real = tape.constant(Tensor::matrix(1, 2, vec![40.0, -40.0]).unwrap());
        let fake = tape.constant(Tensor::matrix(1, 2, vec![-40.0, 40.0]).unwrap());
        let l = gan_losses(&mut tape, real, fake).unwrap();
        assert!(tape.value(l.d_loss).item() < 1e-30);
    }

    #[test]
    fn balance_rule() {
        assert_eq!(gan_balance(1.0, 1.0), GanBalanceState { train_d: true, train_g: true, r: 1.0 });
        let s = gan_balance(0.05, 1.0);
        assert!(!s.train_d && s.train_g);
        let s = gan_balance(0.1, 1.0);
        assert!(s.train_d && s.train_g);
        let s = gan_balance(11.0, 1.0);
        assert!(s.train_d && !s.train_g);
        let s = gan_balance(1.0, 0.0);
        assert!(s.train_d && !s.train_g && s.r.is_infinite());
    }

    #[test]
    fn discriminator_width_checked() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[1, 3]));
        assert!(gan_losses(&mut tape, a, a).is_err());
    }
}
