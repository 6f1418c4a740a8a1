//! Model-agnostic MCMC transitions: Metropolis-Hastings, MALA, the
//! rejection-free MALA-approx step and the decoupled three-term update.
//!
//! Evaluators are plain closures so the same steps drive toy 1-D targets in
//! tests and network-backed chains in [`crate::ppgn`].

use crate::error::{Error, Result};
use crate::rng::{rng_normal, RngStream};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Prior multiplier.
    pub eps1: f64,
    /// Condition multiplier.
    pub eps2: f64,
    /// Noise standard deviation.
    pub eps3: f64,
    pub steps: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(eps1: f64, eps2: f64, eps3: f64, steps: usize, seed: u64) -> Result<Self> {
        let cfg = SamplerConfig { eps1, eps2, eps3, steps, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2), ("eps3", self.eps3)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// What a chain looked like at each recorded step. Index 0 holds the initial
/// state; all lists share one length.
#[derive(Clone, Debug, Default)]
pub struct ChainRecord {
    pub step_index: Vec<usize>,
    /// Chain state (an image, or a latent code).
    pub states: Vec<Tensor>,
    /// What the state looks like as an image. Equal to `states` for
    /// pixel-space chains.
    pub samples: Vec<Tensor>,
    /// Target-class probability of each sample.
    pub confidences: Vec<f64>,
    pub accepted: Vec<bool>,
    /// Norms of the scaled prior and condition terms of the step.
    pub energy_terms: Vec<(f64, f64)>,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_sample(&self) -> &Tensor {
        self.samples.last().expect("chain records hold the initial state")
    }

    pub fn final_confidence(&self) -> f64 {
        *self.confidences.last().expect("chain records hold the initial state")
    }

    /// Fraction of accepted transitions, excluding the initial entry.
    pub fn acceptance_rate(&self) -> f64 {
        let moves = &self.accepted[1.min(self.accepted.len())..];
        if moves.is_empty() {
            return 1.0;
        }
        moves.iter().filter(|&&a| a).count() as f64 / moves.len() as f64
    }
}

/// Result of one transition.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: Tensor,
    pub accepted: bool,
    pub terms: (f64, f64),
}

impl StepOutcome {
    pub fn moved(state: Tensor) -> Self {
        StepOutcome { state, accepted: true, terms: (0.0, 0.0) }
    }
}

/// What an observer extracts from a state.
#[derive(Clone, Debug)]
pub struct Observation {
    pub sample: Tensor,
    pub confidence: f64,
}

fn check_term(t: &Tensor, term: &'static str) -> Result<()> {
    if t.data().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteTerm { step: 0, term })
    }
}

fn check_shape(op: &'static str, x: &Tensor, t: &Tensor) -> Result<()> {
    if x.shape() != t.shape() {
        return Err(Error::shape(op, &[x.shape(), t.shape()]));
    }
    Ok(())
}

/// Random-walk Metropolis with an isotropic Gaussian proposal.
pub fn mh_step<L>(mut log_p: L, x: &Tensor, sigma: f64, rng: &mut RngStream) -> Result<(Tensor, bool)>
where
    L: FnMut(&Tensor) -> Result<f64>,
{
    let current = log_p(x)?;
    if !current.is_finite() {
        return Err(Error::NonFiniteTerm { step: 0, term: "log_p" });
    }
    let proposal = x.add(&rng_normal(x.shape(), 0.0, sigma, rng)?)?;
    let proposed = log_p(&proposal)?;
    Ok(accept_or_reject(proposed - current, x, proposal, rng))
}

fn accept_or_reject(log_alpha: f64, x: &Tensor, proposal: Tensor, rng: &mut RngStream) -> (Tensor, bool) {
    // NaN fails the comparison and rejects.
    if log_alpha >= 0.0 || rng.uniform().ln() < log_alpha {
        (proposal, true)
    } else {
        (x.clone(), false)
    }
}

/// Metropolis-adjusted Langevin step with drift `sigma^2 / 2 * score(x)` and the
/// full Hastings correction for the asymmetric proposal.
pub fn mala_step<L, S>(mut log_p: L, mut score: S, x: &Tensor, sigma: f64, rng: &mut RngStream) -> Result<(Tensor, bool)>
where
    L: FnMut(&Tensor) -> Result<f64>,
    S: FnMut(&Tensor) -> Result<Tensor>,
{
    let current = log_p(x)?;
    if !current.is_finite() {
        return Err(Error::NonFiniteTerm { step: 0, term: "log_p" });
    }
    let half = 0.5 * sigma * sigma;
    let s = score(x)?;
    check_shape("mala_step", x, &s)?;
    check_term(&s, "score")?;
    let mean_fwd = x.add(&s.scale(half)?)?;
    let proposal = mean_fwd.add(&rng_normal(x.shape(), 0.0, sigma, rng)?)?;
    if sigma == 0.0 {
        return Ok((proposal, true));
    }
    let proposed = log_p(&proposal)?;
    let s_back = score(&proposal)?;
    if !proposed.is_finite() || !s_back.data().iter().all(|v| v.is_finite()) {
        return Ok((x.clone(), false));
    }
    let mean_back = proposal.add(&s_back.scale(half)?)?;
    let log_q = |to: &Tensor, mean: &Tensor| -> f64 {
        let d = to.sub(mean).map(|t| t.norm()).unwrap_or(f64::INFINITY);
        -d * d / (2.0 * sigma * sigma)
    };
    let log_alpha = proposed - current + log_q(x, &mean_back) - log_q(&proposal, &mean_fwd);
    Ok(accept_or_reject(log_alpha, x, proposal, rng))
}

/// `x + eps12 * score(x) + N(0, eps3^2)`, never rejected.
pub fn mala_approx_step<S>(score: S, x: &Tensor, eps12: f64, eps3: f64, rng: &mut RngStream) -> Result<Tensor>
where
    S: FnMut(&Tensor) -> Result<Tensor>,
{
    let cfg = SamplerConfig { eps1: eps12, eps2: 0.0, eps3, steps: 1, seed: 0 };
    decoupled_step(score, |_: &Tensor| -> Result<Tensor> { unreachable!("eps2 = 0 skips the condition") }, x, &cfg, rng)
}

/// `x + eps1 * prior_score(x) + eps2 * cond_grad(x) + N(0, eps3^2)`.
pub fn decoupled_step<P, C>(prior_score: P, cond_grad: C, x: &Tensor, cfg: &SamplerConfig, rng: &mut RngStream) -> Result<Tensor>
where
    P: FnMut(&Tensor) -> Result<Tensor>,
    C: FnMut(&Tensor) -> Result<Tensor>,
{
    decoupled_step_terms(prior_score, cond_grad, x, cfg, rng).map(|o| o.state)
}

/// [`decoupled_step`] that also reports the scaled term norms. A multiplier of
/// exactly zero removes its term without evaluating it, so variants that differ
/// only by a zeroed term produce bit-identical chains.
pub fn decoupled_step_terms<P, C>(
    mut prior_score: P,
    mut cond_grad: C,
    x: &Tensor,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<StepOutcome>
where
    P: FnMut(&Tensor) -> Result<Tensor>,
    C: FnMut(&Tensor) -> Result<Tensor>,
{
    let mut next = x.clone();
    let mut terms = (0.0, 0.0);
    if cfg.eps1 != 0.0 {
        let p = prior_score(x)?;
        check_shape("decoupled_step", x, &p)?;
        check_term(&p, "prior")?;
        let p = p.scale(cfg.eps1).map_err(|_| Error::NonFiniteTerm { step: 0, term: "prior" })?;
        terms.0 = p.norm();
        next = next.add(&p).map_err(|_| Error::NonFiniteTerm { step: 0, term: "prior" })?;
    }
    if cfg.eps2 != 0.0 {
        let c = cond_grad(x)?;
        check_shape("decoupled_step", x, &c)?;
        check_term(&c, "condition")?;
        let c = c.scale(cfg.eps2).map_err(|_| Error::NonFiniteTerm { step: 0, term: "condition" })?;
        terms.1 = c.norm();
        next = next.add(&c).map_err(|_| Error::NonFiniteTerm { step: 0, term: "condition" })?;
    }
    let noise = rng_normal(x.shape(), 0.0, cfg.eps3, rng)?;
    let state = next.add(&noise).map_err(|_| Error::NonFiniteTerm { step: 0, term: "noise" })?;
    Ok(StepOutcome { state, accepted: true, terms })
}

/// Applies `step` `cfg.steps` times from `x0`. Every `stride`-th state (and the
/// final one) is observed and recorded.
pub fn run_chain<S, O>(
    mut step: S,
    x0: Tensor,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
    stride: usize,
    mut observe: O,
) -> Result<ChainRecord>
where
    S: FnMut(&Tensor, &mut RngStream) -> Result<StepOutcome>,
    O: FnMut(&Tensor) -> Result<Observation>,
{
    cfg.validate()?;
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    let mut record = ChainRecord::default();
    let mut push = |record: &mut ChainRecord, t: usize, outcome: StepOutcome| -> Result<()> {
        let obs = observe(&outcome.state)?;
        if !(0.0..=1.0).contains(&obs.confidence) {
            return Err(Error::InvalidArgument(format!("observer confidence {} outside [0, 1]", obs.confidence)));
        }
        record.step_index.push(t);
        record.states.push(outcome.state);
        record.samples.push(obs.sample);
        record.confidences.push(obs.confidence);
        record.accepted.push(outcome.accepted);
        record.energy_terms.push(outcome.terms);
        Ok(())
    };
    push(&mut record, 0, StepOutcome::moved(x0.clone()))?;
    let mut x = x0;
    for t in 1..=cfg.steps {
        let outcome = step(&x, rng).map_err(|e| match e {
            Error::NonFiniteTerm { term, .. } => Error::NonFiniteTerm { step: t, term },
            other => other,
        })?;
        x = outcome.state.clone();
        if t % stride == 0 || t == cfg.steps {
            push(&mut record, t, outcome)?;
        }
    }
    Ok(record)
}
