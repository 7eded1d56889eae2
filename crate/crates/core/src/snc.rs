//! Sample-and-communicate: draw `Ŷ ~ softmax(λ · logits(x))` and convey the sample.
//!
//! The rate of the scheme is `I(X; Ŷ) = H(Ŷ) - H(Ŷ | X)` and its task distortion is
//! `1 - E[p(Ŷ = Y | X)]`. Both are estimated from a labelled logits dataset using the
//! exact per-record posteriors, so no sampling of `Ŷ` is involved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::classify::ConfusionMatrix;
use crate::curve::{check_lambda_grid, RdCurve, RdPoint};
use crate::error::{Error, Result};
use crate::prob::{entropy_of, Pmf};

/// Logit used for a class with zero probability in generated data.
pub const LOG_ZERO: f64 = -1e30;

/// Labelled logit vectors of a `classes`-way classifier. Labels are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsDataset {
    classes: usize,
    labels: Vec<usize>,
    logits: Vec<f64>,
}

impl LogitsDataset {
    /// `logits` is row-major, one row of `classes` values per label.
    pub fn new(classes: usize, labels: Vec<usize>, logits: Vec<f64>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        if labels.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 records, got {}",
                labels.len()
            )));
        }
        if logits.len() != labels.len() * classes {
            return Err(Error::DimensionMismatch {
                what: "logit values vs records x classes",
                expected: labels.len() * classes,
                found: logits.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y >= classes) {
            return Err(Error::InvalidDataset(format!(
                "record {i}: label {} outside 0..{classes}",
                labels[i]
            )));
        }
        if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "record {}: logit {} is {}",
                i / classes,
                i % classes,
                logits[i]
            )));
        }
        Ok(Self {
            classes,
            labels,
            logits,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn logits(&self, record: usize) -> &[f64] {
        &self.logits[record * self.classes..(record + 1) * self.classes]
    }

    /// Hard decision per record (smallest index on ties).
    pub fn argmax(&self, record: usize) -> usize {
        let l = self.logits(record);
        let mut best = 0;
        for (j, &v) in l.iter().enumerate() {
            if v > l[best] {
                best = j;
            }
        }
        best
    }

    /// Error rate of the argmax decision.
    pub fn argmax_error(&self) -> f64 {
        let wrong = (0..self.len())
            .filter(|&i| self.argmax(i) != self.labels[i])
            .count();
        wrong as f64 / self.len() as f64
    }

    /// Empirical distribution of the argmax decision.
    pub fn argmax_marginal(&self) -> Pmf {
        let mut counts = vec![0.0; self.classes];
        for i in 0..self.len() {
            counts[self.argmax(i)] += 1.0;
        }
        Pmf::from_weights(counts).expect("dataset is nonempty")
    }

    /// Empirical argmax confusion counts, `counts[y][ỹ]`, without smoothing.
    pub fn confusion_counts(&self) -> Vec<Vec<f64>> {
        let mut counts = vec![vec![0.0; self.classes]; self.classes];
        for i in 0..self.len() {
            counts[self.labels[i]][self.argmax(i)] += 1.0;
        }
        counts
    }

    /// Confusion matrix of the argmax classifier with the label frequencies as prior.
    pub fn induced_confusion(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_counts(&self.confusion_counts())
    }
}

/// One S&C operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SncPoint {
    pub lambda: f64,
    /// Estimated `I(X; Ŷ)` in bits.
    pub rate: f64,
    pub distortion: f64,
}

/// `softmax(λ · logits)` computed with max-subtraction.
pub fn tempered_posterior(logits: &[f64], lambda: f64) -> Result<Pmf> {
    check_lambda(lambda)?;
    if logits.is_empty() {
        return Err(Error::InvalidDataset("empty logit vector".into()));
    }
    if let Some(v) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset(format!("non-finite logit {v}")));
    }
    let mut out = vec![0.0; logits.len()];
    tempered_into(logits, lambda, &mut out);
    Ok(Pmf::from_weights(out).expect("softmax output is a distribution"))
}

/// Writes `softmax(λ · logits)` into `out` and returns its entropy in bits.
fn tempered_into(logits: &[f64], lambda: f64, out: &mut [f64]) -> f64 {
    let hi = logits
        .iter()
        .map(|&v| lambda * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(logits) {
        *o = (lambda * v - hi).exp();
        total += *o;
    }
    let log_total = total.ln();
    // H = -Σ p (s - log Σ), with s the shifted scores.
    let mut h_nats = 0.0;
    for (o, &v) in out.iter_mut().zip(logits) {
        *o /= total;
        if *o > 0.0 {
            h_nats -= *o * (lambda * v - hi - log_total);
        }
    }
    (h_nats / std::f64::consts::LN_2).max(0.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "inverse temperature must be > 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Estimates rate and task distortion of S&C at inverse temperature `lambda`.
pub fn snc_point(ds: &LogitsDataset, lambda: f64) -> Result<SncPoint> {
    check_lambda(lambda)?;
    let k = ds.classes();
    let n = ds.len() as f64;
    let mut marginal = vec![0.0; k];
    let mut post = vec![0.0; k];
    let mut cond_entropy = 0.0;
    let mut hit = 0.0;
    for i in 0..ds.len() {
        cond_entropy += tempered_into(ds.logits(i), lambda, &mut post);
        hit += post[ds.labels[i]];
        for (m, &p) in marginal.iter_mut().zip(&post) {
            *m += p;
        }
    }
    marginal.iter_mut().for_each(|m| *m /= n);
    let rate = (entropy_of(&marginal) - cond_entropy / n).clamp(0.0, (k as f64).log2());
    let distortion = (1.0 - hit / n).clamp(0.0, 1.0);
    Ok(SncPoint {
        lambda,
        rate,
        distortion,
    })
}

/// One [`snc_point`] per inverse temperature, as an empirical curve labelled `snc`.
pub fn snc_sweep(ds: &LogitsDataset, lambdas: &[f64]) -> Result<RdCurve> {
    check_lambda_grid(lambdas)?;
    let points = lambdas
        .par_iter()
        .map(|&l| {
            let p = snc_point(ds, l)?;
            Ok(RdPoint::new(Some(p.lambda), p.rate, p.distortion))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curve = RdCurve::from_points("snc", points);
    curve.empirical = true;
    Ok(curve)
}

/// Generator for synthetic logits datasets.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    /// Binary Gaussian mixture `X = mean(Y) + N(0, σ²)`, `P(Y = 1) = q`; logits are the
    /// exact log-posteriors `log p(y | x)` multiplied by `scale`.
    Gmm {
        q: f64,
        means: [f64; 2],
        noise_variance: f64,
        scale: f64,
    },
    /// Class `y ~ prior`; posterior `~ Dirichlet(alpha + concentration · e_y)`; logits are
    /// the log-posterior entries. An infinite concentration yields one-hot posteriors.
    Dirichlet {
        prior: Pmf,
        alpha: f64,
        concentration: f64,
    },
}

impl SynthKind {
    pub fn gmm_default() -> Self {
        SynthKind::Gmm {
            q: 0.5,
            means: [-1.0, 1.0],
            noise_variance: 1.0,
            scale: 1.0,
        }
    }
}

/// Draws `n` records deterministically from `seed`.
pub fn synth_logits(kind: &SynthKind, n: usize, seed: u64) -> Result<LogitsDataset> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SynthKind::Gmm {
            q,
            means,
            noise_variance,
            scale,
        } => {
            if !(*q > 0.0 && *q < 1.0) {
                return Err(Error::Domain(format!("q must lie in (0, 1), got {q}")));
            }
            if !(*noise_variance > 0.0) || !noise_variance.is_finite() {
                return Err(Error::Domain(format!(
                    "noise variance must be > 0, got {noise_variance}"
                )));
            }
            if !(*scale > 0.0) || !scale.is_finite() {
                return Err(Error::Domain(format!("logit scale must be > 0, got {scale}")));
            }
            let sigma = noise_variance.sqrt();
            let log_prior = [(1.0 - q).ln(), q.ln()];
            let mut labels = Vec::with_capacity(n);
            let mut logits = Vec::with_capacity(2 * n);
            for _ in 0..n {
                let y = usize::from(rng.random::<f64>() < *q);
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = means[y] + sigma * z;
                let s = [0, 1].map(|c| {
                    let u = (x - means[c]) / sigma;
                    log_prior[c] - 0.5 * u * u
                });
                let hi = s[0].max(s[1]);
                let lse = hi + ((s[0] - hi).exp() + (s[1] - hi).exp()).ln();
                labels.push(y);
                logits.extend(s.iter().map(|v| scale * (v - lse)));
            }
            LogitsDataset::new(2, labels, logits)
        }
        SynthKind::Dirichlet {
            prior,
            alpha,
            concentration,
        } => {
            let k = prior.len();
            if !(*alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
            }
            if !(*concentration >= 0.0) {
                return Err(Error::Domain(format!(
                    "concentration must be >= 0, got {concentration}"
                )));
            }
            let base = Gamma::new(*alpha, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
            let peak = if concentration.is_finite() {
                Some(
                    Gamma::new(alpha + concentration, 1.0)
                        .map_err(|e| Error::Domain(e.to_string()))?,
                )
            } else {
                None
            };
            let cdf: Vec<f64> = prior
                .probs()
                .iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect();
            let mut labels = Vec::with_capacity(n);
            let mut logits = Vec::with_capacity(k * n);
            let mut draw = vec![0.0; k];
            for _ in 0..n {
                let u: f64 = rng.random();
                let y = cdf.iter().position(|&c| u < c).unwrap_or(k - 1);
                labels.push(y);
                match &peak {
                    None => logits.extend((0..k).map(|j| if j == y { 0.0 } else { LOG_ZERO })),
                    Some(peak) => {
                        for (j, v) in draw.iter_mut().enumerate() {
                            *v = if j == y {
                                peak.sample(&mut rng)
                            } else {
                                base.sample(&mut rng)
                            };
                        }
                        let total: f64 = draw.iter().sum();
                        logits.extend(draw.iter().map(|&v| {
                            if v > 0.0 {
                                (v / total).ln()
                            } else {
                                LOG_ZERO
                            }
                        }));
                    }
                }
            }
            LogitsDataset::new(k, labels, logits)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::entropy_bits;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tempered_examples() {
        let p = tempered_posterior(&[0.0, 0.0], 3.0).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
        let p = tempered_posterior(&[10.0, 0.0], 1e3).unwrap();
        assert_abs_diff_eq!(p.probs()[0], 1.0, epsilon = 1e-12);
        let p = tempered_posterior(&[10.0, 0.0], 1e-6).unwrap();
        assert_abs_diff_eq!(p.probs()[0], 0.5, epsilon = 1e-5);
        assert!(tempered_posterior(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(tempered_posterior(&[1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn tempered_entropy_matches_direct() {
        let logits = [1.3, -0.2, 0.7, -4.0];
        let mut out = [0.0; 4];
        let h = tempered_into(&logits, 1.7, &mut out);
        assert_abs_diff_eq!(h, entropy_of(&out), epsilon = 1e-12);
    }

    #[test]
    fn dataset_validation() {
        assert!(LogitsDataset::new(2, vec![0], vec![0.0, 1.0]).is_err());
        assert!(LogitsDataset::new(2, vec![0, 2], vec![0.0; 4]).is_err());
        assert!(LogitsDataset::new(2, vec![0, 1], vec![0.0; 3]).is_err());
        assert!(LogitsDataset::new(2, vec![0, 1], vec![0.0, 1.0, f64::INFINITY, 0.0]).is_err());
        assert!(LogitsDataset::new(1, vec![0, 0], vec![0.0, 0.0]).is_err());
        assert!(LogitsDataset::new(2, vec![0, 1], vec![0.0, 1.0, 2.0, 0.0]).is_ok());
    }

    #[test]
    fn point_bounds_and_limits() {
        let ds = LogitsDataset::new(
            3,
            vec![0, 1, 2, 0],
            vec![
                2.0, 0.0, -1.0, //
                0.5, 1.5, 0.0, //
                0.0, 0.2, 0.1, //
                -1.0, 3.0, 0.0,
            ],
        )
        .unwrap();
        let lo = snc_point(&ds, 1e-6).unwrap();
        assert!(lo.rate <= 1e-2);
        assert_abs_diff_eq!(lo.distortion, 2.0 / 3.0, epsilon = 1e-5);
        let hi = snc_point(&ds, 1e4).unwrap();
        assert_abs_diff_eq!(hi.distortion, ds.argmax_error(), epsilon = 1e-9);
        assert_abs_diff_eq!(hi.rate, entropy_bits(&ds.argmax_marginal()), epsilon = 1e-9);
        for l in [1e-3, 0.1, 1.0, 10.0] {
            let p = snc_point(&ds, l).unwrap();
            assert!(p.rate >= 0.0 && p.rate <= 3f64.log2());
            assert!((0.0..=1.0).contains(&p.distortion));
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_logits(&SynthKind::gmm_default(), 500, 7).unwrap();
        let b = synth_logits(&SynthKind::gmm_default(), 500, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_logits(&SynthKind::gmm_default(), 500, 8).unwrap();
        assert_ne!(a, c);
        let kind = SynthKind::Dirichlet {
            prior: Pmf::uniform(5).unwrap(),
            alpha: 0.5,
            concentration: 3.0,
        };
        assert_eq!(synth_logits(&kind, 100, 1).unwrap(), synth_logits(&kind, 100, 1).unwrap());
        assert!(synth_logits(&kind, 1, 1).is_err());
    }

    #[test]
    fn infinite_concentration_is_one_hot() {
        let prior = Pmf::new(vec![0.5, 0.3, 0.2]).unwrap();
        let kind = SynthKind::Dirichlet {
            prior: prior.clone(),
            alpha: 1.0,
            concentration: f64::INFINITY,
        };
        let ds = synth_logits(&kind, 20_000, 3).unwrap();
        let empirical = {
            let mut c = vec![0.0; 3];
            ds.labels().iter().for_each(|&y| c[y] += 1.0);
            Pmf::from_weights(c).unwrap()
        };
        for l in [1e-4, 1.0, 1e3] {
            let p = snc_point(&ds, l).unwrap();
            assert_eq!(p.distortion, 0.0);
            assert_abs_diff_eq!(p.rate, entropy_bits(&empirical), epsilon = 1e-12);
        }
    }

    #[test]
    fn induced_confusion_counts_argmax() {
        let ds = LogitsDataset::new(2, vec![0, 0, 1, 1], vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
            .unwrap();
        assert_eq!(ds.confusion_counts(), vec![vec![1.0, 1.0], vec![0.0, 2.0]]);
        let cm = ds.induced_confusion().unwrap();
        assert_eq!(cm.prior().probs(), &[0.5, 0.5]);
        assert_abs_diff_eq!(crate::classify::stats(&cm).d_tm, ds.argmax_error(), epsilon = 1e-15);
    }
}
