//! Sample evaluation: confidence filtering, diversity (pairwise L2 and SSIM),
//! held-out classifier accuracy, and chain mixing diagnostics.

use crate::error::{Error, Result};
use crate::nets::losses::class_probabilities;
use crate::nets::model::ModelBundle;
use crate::samplers::ChainRecord;
use crate::tensor::Tensor;

pub const DEFAULT_CONFIDENCE: f64 = 0.97;
pub const SSIM_WINDOW: usize = 7;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Indices of samples whose probability of `target` under `classifier` is at
/// least `threshold`, in input order.
pub fn confidence_filter_indices(samples: &[Tensor], classifier: &ModelBundle, target: usize, threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let batch = Tensor::stack_rows(&flat(samples)?)?;
    let probs = class_probabilities(classifier, &batch, target)?;
    Ok(probs.iter().enumerate().filter(|(_, &p)| p >= threshold).map(|(i, _)| i).collect())
}

pub fn confidence_filter(samples: &[Tensor], classifier: &ModelBundle, target: usize, threshold: f64) -> Result<Vec<Tensor>> {
    let keep = confidence_filter_indices(samples, classifier, target, threshold)?;
    Ok(keep.into_iter().map(|i| samples[i].clone()).collect())
}

fn flat(samples: &[Tensor]) -> Result<Vec<Tensor>> {
    samples.iter().map(|s| s.reshape(vec![s.numel()])).collect()
}

/// Mean pairwise distances within a sample set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diversity {
    pub mean_l2: f64,
    pub mean_ssim: f64,
}

/// Side length of a square image with `n` pixels.
fn square_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n || side < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs square images of side >= {SSIM_WINDOW}, got {n} pixels"
        )));
    }
    Ok(side)
}

/// Single-scale SSIM on `[0, 1]` images: a 7x7 uniform window at every fully
/// interior position, sample (co)variances, `C1 = (0.01)^2`, `C2 = (0.03)^2`.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.numel() != b.numel() {
        return Err(Error::shape("ssim", &[a.shape(), b.shape()]));
    }
    let side = square_side(a.numel())?;
    let (x, y) = (a.data(), b.data());
    let np = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let cov_norm = np / (np - 1.0);
    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let positions = side - SSIM_WINDOW + 1;
    let mut total = 0.0;
    for r0 in 0..positions {
        for c0 in 0..positions {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r0..r0 + SSIM_WINDOW {
                for c in c0..c0 + SSIM_WINDOW {
                    let (u, v) = (x[r * side + c], y[r * side + c]);
                    sx += u;
                    sy += v;
                    sxx += u * u;
                    syy += v * v;
                    sxy += u * v;
                }
            }
            let (ux, uy) = (sx / np, sy / np);
            let vx = cov_norm * (sxx / np - ux * ux);
            let vy = cov_norm * (syy / np - uy * uy);
            let vxy = cov_norm * (sxy / np - ux * uy);
            total += ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (positions * positions) as f64)
}

/// Mean pairwise L2 distance and SSIM over all unordered pairs.
pub fn diversity(samples: &[Tensor]) -> Result<Diversity> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!("diversity needs at least 2 samples, got {}", samples.len())));
    }
    let (mut l2, mut s, mut pairs) = (0.0, 0.0, 0usize);
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            if samples[i].numel() != samples[j].numel() {
                return Err(Error::shape("diversity", &[samples[i].shape(), samples[j].shape()]));
            }
            l2 += samples[i].data().iter().zip(samples[j].data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            s += ssim(&samples[i], &samples[j])?;
            pairs += 1;
        }
    }
    Ok(Diversity { mean_l2: l2 / pairs as f64, mean_ssim: s / pairs as f64 })
}

/// Fraction of samples that `heldout` assigns to `target`.
pub fn quality(samples: &[Tensor], heldout: &ModelBundle, target: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("quality of an empty sample set".into()));
    }
    let batch = Tensor::stack_rows(&flat(samples)?)?;
    let logits = heldout.predict(&batch)?;
    let hits = (0..samples.len()).filter(|&r| logits.row(r).argmax() == target).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Share of classes whose mean SSIM is below `reference_max_ssim`, the SSIM of
/// the least diverse class of real data.
pub fn percent_classes_more_diverse(class_ssim: &[f64], reference_max_ssim: f64) -> f64 {
    if class_ssim.is_empty() {
        return 0.0;
    }
    class_ssim.iter().filter(|&&s| s < reference_max_ssim).count() as f64 / class_ssim.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mixing {
    /// `(lag, autocorrelation averaged over state coordinates)`.
    pub autocorrelation: Vec<(usize, f64)>,
    /// Mean `||s_{t+1} - s_t||` between consecutive recorded states.
    pub mean_displacement: f64,
}

/// Lag-k autocorrelation of the chain state, averaged over coordinates. A
/// coordinate that never changes counts as perfectly correlated.
pub fn mixing(chain: &ChainRecord, lags: &[usize]) -> Result<Mixing> {
    let n = chain.states.len();
    if let Some(&bad) = lags.iter().find(|&&l| l >= n) {
        return Err(Error::InvalidArgument(format!("lag {bad} needs a chain longer than {n} states")));
    }
    let dim = chain.states.first().map_or(0, Tensor::numel);
    let series: Vec<Vec<f64>> = (0..dim).map(|d| chain.states.iter().map(|s| s.data()[d]).collect()).collect();
    let autocorrelation = lags
        .iter()
        .map(|&lag| {
            let mean = series.iter().map(|xs| autocorr(xs, lag)).sum::<f64>() / dim.max(1) as f64;
            (lag, mean)
        })
        .collect();
    let mean_displacement = if n < 2 {
        0.0
    } else {
        chain.states.windows(2).map(|w| w[1].sub(&w[0]).map(|d| d.norm()).unwrap_or(f64::NAN)).sum::<f64>() / (n - 1) as f64
    };
    Ok(Mixing { autocorrelation, mean_displacement })
}

fn autocorr(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let cov = (0..n - lag).map(|i| (xs[i] - mean) * (xs[i + lag] - mean)).sum::<f64>() / (n - lag) as f64;
    cov / var
}

/// Everything reported about one sampling run. Absent measurements are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n_total: usize,
    pub n_kept: usize,
    pub quality: f64,
    pub mean_l2: f64,
    pub mean_ssim: f64,
    pub autocorrelation: Vec<(usize, f64)>,
    pub mean_displacement: f64,
    pub percent_classes: f64,
    /// Run-specific extras such as the per-class keep rate.
    pub extra: Vec<(String, f64)>,
}

impl Default for EvalReport {
    fn default() -> Self {
        EvalReport {
            n_total: 0,
            n_kept: 0,
            quality: f64::NAN,
            mean_l2: f64::NAN,
            mean_ssim: f64::NAN,
            autocorrelation: Vec::new(),
            mean_displacement: f64::NAN,
            percent_classes: f64::NAN,
            extra: Vec::new(),
        }
    }
}

/// A report value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(usize),
    Real(f64),
}

impl EvalReport {
    /// Flat key/value view; keys are unique but unsorted.
    pub fn entries(&self) -> Vec<(String, Value)> {
        let mut out = vec![
            ("n_total".to_string(), Value::Int(self.n_total)),
            ("n_kept".to_string(), Value::Int(self.n_kept)),
            ("quality".to_string(), Value::Real(self.quality)),
            ("diversity_l2".to_string(), Value::Real(self.mean_l2)),
            ("diversity_ssim".to_string(), Value::Real(self.mean_ssim)),
            ("mixing_displacement".to_string(), Value::Real(self.mean_displacement)),
            ("percent_classes".to_string(), Value::Real(self.percent_classes)),
        ];
        out.extend(self.autocorrelation.iter().map(|&(lag, v)| (format!("autocorr_lag{lag:03}"), Value::Real(v))));
        out.extend(self.extra.iter().map(|(k, v)| (k.clone(), Value::Real(*v))));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::model::{bias_name, weight_name, LayerSpec, Activation};
    use crate::rng::RngStream;
    use crate::samplers::ChainRecord;

    fn pattern(f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::new(vec![784], (0..784).map(|i| f(i as f64)).collect()).unwrap()
    }

    // Reference values from scikit-image 0.2x `structural_similarity(a, b,
    // data_range=1.0, win_size=7)` on the same closed-form images.
    #[test]
    fn ssim_matches_reference_implementation() {
        let a = pattern(|i| (i * 0.37).sin() * 0.5 + 0.5);
        let b = pattern(|i| (i * 0.11 + 1.0).cos() * 0.25 + 0.5);
        let c = pattern(|i| ((i * 0.37).sin() * 0.5 + 0.5) * 0.9 + 0.05 * (i * 1.3).sin()).clamp(0.0, 1.0);
        let inv = a.map("inv", |v| 1.0 - v).unwrap();
        for (x, y, want) in [(&a, &b, 0.005907927476314308), (&a, &c, 0.9834928469543934), (&a, &inv, -0.9789927854176343)] {
            let got = ssim(x, y).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn ssim_identity_and_noise_ordering() {
        let a = pattern(|i| (i * 0.21).sin() * 0.5 + 0.5);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let mut rng = RngStream::new(1, 0);
        let mut noise = || Tensor::new(vec![784], (0..784).map(|_| rng.uniform()).collect()).unwrap();
        let (n1, n2) = (noise(), noise());
        let near = a.add(&pattern(|i| 0.01 * (i * 2.9).cos())).unwrap().clamp(0.0, 1.0);
        assert!(ssim(&n1, &n2).unwrap() < ssim(&a, &near).unwrap());
        assert!(ssim(&Tensor::zeros(&[10]), &Tensor::zeros(&[10])).is_err());
    }

    #[test]
    fn diversity_of_identical_samples() {
        let a = pattern(|i| (i * 0.5).sin().abs());
        let d = diversity(&[a.clone(), a.clone(), a]).unwrap();
        assert_eq!(d, Diversity { mean_l2: 0.0, mean_ssim: 1.0 });
        assert!(diversity(&[Tensor::zeros(&[784])]).is_err());
    }

    #[test]
    fn diversity_is_permutation_invariant() {
        let xs: Vec<Tensor> = (0..4).map(|k| pattern(move |i| ((i + k as f64) * 0.3).sin() * 0.5 + 0.5)).collect();
        let mut ys = xs.clone();
        ys.reverse();
        let (a, b) = (diversity(&xs).unwrap(), diversity(&ys).unwrap());
        assert!((a.mean_l2 - b.mean_l2).abs() < 1e-12 && (a.mean_ssim - b.mean_ssim).abs() < 1e-12);
    }

    /// Linear two-class model scoring `x[0]` against zero.
    fn threshold_model() -> ModelBundle {
        let mut m = ModelBundle::init("t", vec![LayerSpec::new(2, 2, Activation::Linear)], &mut RngStream::new(0, 0)).unwrap();
        m.params.insert(weight_name(0), Tensor::matrix(2, 2, vec![10.0, 0.0, 0.0, 0.0]).unwrap());
        m.params.insert(bias_name(0), Tensor::zeros(&[2]));
        m
    }

    #[test]
    fn filter_and_quality() {
        let m = threshold_model();
        let xs: Vec<Tensor> = [1.0, -1.0, 0.5, 0.0].iter().map(|&v| Tensor::vector(vec![v, 0.0]).unwrap()).collect();
        assert_eq!(confidence_filter_indices(&xs, &m, 0, 0.97).unwrap(), vec![0, 2]);
        assert_eq!(confidence_filter(&xs, &m, 0, 0.0).unwrap().len(), 4);
        assert!(confidence_filter(&[], &m, 0, 0.97).unwrap().is_empty());
        let kept = confidence_filter(&xs, &m, 0, 0.97).unwrap();
        assert_eq!(confidence_filter(&kept, &m, 0, 0.97).unwrap(), kept);
        // The tie at x = 0 goes to the first class.
        assert_eq!(quality(&xs, &m, 0).unwrap(), 0.75);
        assert!(quality(&[], &m, 0).is_err());
        assert!(confidence_filter(&xs, &m, 0, 1.5).is_err());
    }

    fn chain_of(states: Vec<Tensor>) -> ChainRecord {
        ChainRecord { states, ..Default::default() }
    }

    #[test]
    fn mixing_of_constant_chain() {
        let c = chain_of(vec![Tensor::full(&[3], 0.4).unwrap(); 10]);
        let m = mixing(&c, &[1, 5]).unwrap();
        assert_eq!(m.autocorrelation, vec![(1, 1.0), (5, 1.0)]);
        assert_eq!(m.mean_displacement, 0.0);
        assert!(mixing(&c, &[10]).is_err());
    }

    #[test]
    fn mixing_of_white_noise() {
        let mut rng = RngStream::new(3, 0);
        let states = (0..5000).map(|_| crate::rng::rng_normal(&[8], 0.0, 1.0, &mut rng).unwrap()).collect();
        let m = mixing(&chain_of(states), &[1, 10]).unwrap();
        for (_, r) in m.autocorrelation {
            // Standard error of the 8-coordinate average is about 0.005.
            assert!(r.abs() < 0.03, "{r}");
        }
    }

    #[test]
    fn percent_of_classes() {
        assert_eq!(percent_classes_more_diverse(&[0.1, 0.2, 0.5, 0.3], 0.3), 0.5);
        assert_eq!(percent_classes_more_diverse(&[], 0.3), 0.0);
    }

    #[test]
    fn empty_report_has_counts() {
        let keys: Vec<String> = EvalReport::default().entries().into_iter().map(|(k, _)| k).collect();
        assert!(keys.contains(&"n_total".to_string()) && keys.contains(&"quality".to_string()));
    }
}
