//! Bounds derived from a classifier's confusion matrix.
//!
//! The classifier is the channel `p(ỹ | y)` from the true class to its estimate. Every
//! bound here compresses the estimate `Ỹ` and is scored by the task distortion
//! `D_Y = P(Ŷ != Y)`:
//!
//! - [`ec_curve`]: compress `Ỹ` against Hamming distortion on `Ỹ`, then score on `Y`;
//! - [`iec_curve`]: compress `Ỹ` against the effective distortion
//!   `d̂(ỹ, ŷ) = 1 - P(Y = ŷ | Ỹ = ỹ)`, whose expectation is exactly `D_Y`;
//! - [`ts_bound`]: the chord between the zero-rate and lossless-estimate points;
//! - [`merge_k_baseline`]: an operational codebook-merging scheme;
//! - [`ord_curve`]: the rate-distortion function of `Y` itself, a lower bound for all.

use log::warn;

use crate::ba::{ba_point, ba_sweep_results, BaConfig};
use crate::curve::{RdCurve, RdPoint};
use crate::error::{Error, Result};
use crate::prob::{entropy_bits, entropy_of, rd_uniform_classes, Channel, DistortionMatrix, Pmf};

/// Row-stochastic `p(ỹ | y)` together with the class prior `p(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    channel: Channel,
    prior: Pmf,
}

impl ConfusionMatrix {
    pub fn new(channel: Channel, prior: Pmf) -> Result<Self> {
        if channel.rows() != channel.cols() {
            return Err(Error::InvalidConfusion(format!(
                "matrix must be square, got {}x{}",
                channel.rows(),
                channel.cols()
            )));
        }
        if prior.len() != channel.rows() {
            return Err(Error::DimensionMismatch {
                what: "prior length vs confusion rows",
                expected: channel.rows(),
                found: prior.len(),
            });
        }
        Ok(Self { channel, prior })
    }

    /// Normalizes each row of a nonnegative table; the prior is supplied separately.
    pub fn from_rows(rows: &[Vec<f64>], prior: Pmf) -> Result<Self> {
        let k = rows.len();
        let mut probs = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidConfusion(format!(
                    "matrix must be square: row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            let pmf = Pmf::from_weights(row.clone())
                .map_err(|e| Error::InvalidConfusion(format!("row {i}: {e}")))?;
            probs.extend_from_slice(pmf.probs());
        }
        if k == 0 {
            return Err(Error::InvalidConfusion("empty matrix".into()));
        }
        Self::new(Channel::new(k, k, probs)?, prior)
    }

    /// Count table: rows are normalized and the prior is the row-mass proportion.
    pub fn from_counts(rows: &[Vec<f64>]) -> Result<Self> {
        let mass: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
        let prior = Pmf::from_weights(mass)
            .map_err(|e| Error::InvalidConfusion(format!("row masses: {e}")))?;
        Self::from_rows(rows, prior)
    }

    /// Perfect classifier under a uniform prior.
    pub fn identity(k: usize) -> Result<Self> {
        Self::new(Channel::identity(k), Pmf::uniform(k)?)
    }

    /// Binary symmetric classifier with crossover `eps` under a uniform prior.
    pub fn binary_symmetric(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Domain(format!("crossover must lie in [0, 1], got {eps}")));
        }
        let ch = Channel::new(2, 2, vec![1.0 - eps, eps, eps, 1.0 - eps])?;
        Self::new(ch, Pmf::uniform(2)?)
    }

    pub fn classes(&self) -> usize {
        self.prior.len()
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn prior(&self) -> &Pmf {
        &self.prior
    }

    /// Joint `p(y, ỹ)` row-major with rows indexed by `y`.
    pub fn joint(&self) -> Vec<f64> {
        let k = self.classes();
        let mut out = Vec::with_capacity(k * k);
        for (y, &py) in self.prior.probs().iter().enumerate() {
            out.extend(self.channel.row(y).iter().map(|&c| c * py));
        }
        out
    }
}

/// Summary statistics of a task model.
#[derive(Debug, Clone)]
pub struct TaskModelStats {
    /// Error probability of the estimate, `P(Ỹ != Y)`.
    pub d_tm: f64,
    /// `p(ỹ)`.
    pub estimate_marginal: Pmf,
    /// `p(y | ỹ)`, one row per estimate symbol `ỹ`.
    pub posterior: Channel,
    /// Zero-rate distortion `1 - max_y p(y)`.
    pub d_zero: f64,
    /// `H(Ỹ)` in bits.
    pub estimate_entropy: f64,
    /// Estimate symbols with `p(ỹ) = 0`; their posterior rows hold the prior.
    pub unpredicted: Vec<usize>,
}

pub fn stats(cm: &ConfusionMatrix) -> TaskModelStats {
    let k = cm.classes();
    let prior = cm.prior.probs();
    let d_tm: f64 = (0..k).map(|y| prior[y] * (1.0 - cm.channel.get(y, y))).sum();
    let marginal = cm.channel.output_weights(prior);

    let mut posterior = vec![0.0; k * k];
    let mut unpredicted = Vec::new();
    for t in 0..k {
        let row = &mut posterior[t * k..(t + 1) * k];
        if marginal[t] > 0.0 {
            for y in 0..k {
                row[y] = cm.channel.get(y, t) * prior[y] / marginal[t];
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.copy_from_slice(prior);
            unpredicted.push(t);
        }
    }
    if !unpredicted.is_empty() {
        warn!(
            "classes never predicted: {:?}; their posterior is set to the prior",
            unpredicted
        );
    }
    let estimate_marginal = Pmf::from_weights(marginal).expect("marginal of a valid channel");
    let estimate_entropy = entropy_bits(&estimate_marginal);
    TaskModelStats {
        d_tm: d_tm.max(0.0),
        estimate_marginal,
        posterior: Channel::from_raw(k, k, posterior),
        d_zero: 1.0 - cm.prior.max(),
        estimate_entropy,
        unpredicted,
    }
}

/// `D_Y = Σ_y p(y) (1 - p(ŷ = y | y))` for an end-to-end channel `p(ŷ | y)`.
pub fn task_distortion(prior: &Pmf, end_to_end: &Channel) -> f64 {
    prior
        .probs()
        .iter()
        .enumerate()
        .map(|(y, &py)| py * (1.0 - end_to_end.get(y, y)))
        .sum::<f64>()
        .max(0.0)
}

/// `d̂(ỹ, ŷ) = 1 - P(Y = ŷ | Ỹ = ỹ)`.
pub fn effective_distortion(s: &TaskModelStats) -> DistortionMatrix {
    let k = s.posterior.rows();
    let costs = s
        .posterior
        .as_slice()
        .iter()
        .map(|&p| (1.0 - p).max(0.0))
        .collect();
    DistortionMatrix::new(k, k, costs).expect("posterior entries lie in [0, 1]")
}

/// Estimate-and-compress: Blahut–Arimoto on `p(ỹ)` with Hamming distortion, each point
/// re-scored by the task distortion of the composed channel `p(ŷ | y)`.
pub fn ec_curve(cm: &ConfusionMatrix, lambdas: &[f64], cfg: &BaConfig) -> Result<RdCurve> {
    let s = stats(cm);
    let hamming = DistortionMatrix::hamming(cm.classes())?;
    let results = ba_sweep_results(&s.estimate_marginal, &hamming, lambdas, cfg)?;
    let mut points = Vec::with_capacity(results.len());
    for r in &results {
        let end_to_end = cm.channel.then(&r.channel)?;
        let mut p = r.to_point();
        p.distortion = task_distortion(&cm.prior, &end_to_end);
        points.push(p);
    }
    Ok(RdCurve::from_points("ec", points))
}

/// Indirect estimate-and-compress: Blahut–Arimoto on `p(ỹ)` with the effective
/// distortion; the solver's distortion is the task distortion.
pub fn iec_curve(cm: &ConfusionMatrix, lambdas: &[f64], cfg: &BaConfig) -> Result<RdCurve> {
    let s = stats(cm);
    let d = effective_distortion(&s);
    let results = ba_sweep_results(&s.estimate_marginal, &d, lambdas, cfg)?;
    Ok(RdCurve::from_points(
        "iec",
        results.iter().map(|r| r.to_point()).collect(),
    ))
}

/// Time-sharing rate `(D0 - d) / (D0 - D_TM) · H(Ỹ)` for `D_TM <= d <= D0`.
///
/// When `D0 == D_TM` the chord is degenerate; the rate is reported as 0 with a warning.
pub fn ts_bound(s: &TaskModelStats, d: f64) -> Result<f64> {
    const EDGE: f64 = 1e-12;
    if !(d >= s.d_tm - EDGE && d <= s.d_zero + EDGE) {
        return Err(Error::Domain(format!(
            "time-sharing bound defined on [{}, {}], got {d}",
            s.d_tm, s.d_zero
        )));
    }
    let span = s.d_zero - s.d_tm;
    if span <= EDGE {
        warn!("time-sharing bound is degenerate: D0 == D_TM = {}", s.d_tm);
        return Ok(0.0);
    }
    let t = ((s.d_zero - d) / span).clamp(0.0, 1.0);
    Ok(t * s.estimate_entropy)
}

/// `points` evenly spaced samples of [`ts_bound`] over `[D_TM, D0]`.
pub fn ts_curve(s: &TaskModelStats, points: usize) -> Result<RdCurve> {
    let pts = crate::curve::linspace(s.d_tm, s.d_zero.max(s.d_tm), points.max(2))
        .into_iter()
        .map(|d| Ok(RdPoint::new(None, ts_bound(s, d)?, d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve::from_points("ts", pts))
}

/// Outcome of the merge-k scheme for one `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergePoint {
    pub k: usize,
    /// Entropy of the merged codebook in bits.
    pub rate: f64,
    pub distortion: f64,
    /// `mapping[ỹ]` is the transmitted symbol for estimate `ỹ`.
    pub mapping: Vec<usize>,
}

/// Merges the `k` least probable estimate symbols into the most probable one and
/// entropy-codes the result.
///
/// The merge target is the most probable symbol (smallest index on ties); the `k`
/// merged symbols are the least probable among the rest (smallest index first on ties).
pub fn merge_k_baseline(cm: &ConfusionMatrix, k: usize) -> Result<MergePoint> {
    let n = cm.classes();
    if k >= n {
        return Err(Error::Domain(format!("k must lie in 0..={}, got {k}", n - 1)));
    }
    let s = stats(cm);
    let marginal = s.estimate_marginal.probs();
    let target = s.estimate_marginal.argmax();
    let mut order: Vec<usize> = (0..n).filter(|&c| c != target).collect();
    order.sort_by(|&a, &b| marginal[a].total_cmp(&marginal[b]).then(a.cmp(&b)));

    let mut mapping: Vec<usize> = (0..n).collect();
    for &c in &order[..k] {
        mapping[c] = target;
    }

    let mut merged = vec![0.0; n];
    for (t, &p) in marginal.iter().enumerate() {
        merged[mapping[t]] += p;
    }
    let prior = cm.prior.probs();
    let mut correct = 0.0;
    for (y, &py) in prior.iter().enumerate() {
        let hit: f64 = (0..n)
            .filter(|&t| mapping[t] == y)
            .map(|t| cm.channel.get(y, t))
            .sum();
        correct += py * hit;
    }
    let rate = if k == 0 {
        s.estimate_entropy
    } else {
        entropy_of(&merged)
    };
    let distortion = if k == 0 { s.d_tm } else { (1.0 - correct).max(0.0) };
    Ok(MergePoint {
        k,
        rate,
        distortion,
        mapping,
    })
}

/// The merge-k scheme for every `k = 0..|Y|-1` as one curve.
pub fn merge_k_curve(cm: &ConfusionMatrix) -> Result<RdCurve> {
    let points = (0..cm.classes())
        .map(|k| {
            let m = merge_k_baseline(cm, k)?;
            let mut p = RdPoint::new(None, m.rate, m.distortion);
            p.note = Some(format!("k={k}"));
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve::from_points("merge", points))
}

/// Rate-distortion function of the class variable itself under Hamming distortion,
/// sampled at each distortion of `d_grid`.
///
/// Uniform priors use the closed form; any other prior is solved with Blahut–Arimoto,
/// bisecting on the multiplier until the solver lands on the requested distortion.
pub fn ord_curve(prior: &Pmf, d_grid: &[f64], cfg: &BaConfig) -> Result<RdCurve> {
    let k = prior.len();
    if k < 2 {
        return Err(Error::Domain("oracle curve needs at least two classes".into()));
    }
    if let Some(d) = d_grid.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
        return Err(Error::Domain(format!("distortion must be >= 0, got {d}")));
    }
    let uniform = prior.is_uniform(1e-12);
    let hamming = DistortionMatrix::hamming(k)?;
    let mut points = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let point = if uniform {
            let kf = k as f64;
            let lambda = (d > 0.0 && d < 1.0 - 1.0 / kf)
                .then(|| ((kf - 1.0) * (1.0 - d) / d).ln());
            RdPoint::new(lambda, rd_uniform_classes(k, d)?, d)
        } else {
            hamming_rd_at(prior, &hamming, d, cfg)?
        };
        points.push(point);
    }
    Ok(RdCurve::from_points("ord", points))
}

fn hamming_rd_at(prior: &Pmf, hamming: &DistortionMatrix, d: f64, cfg: &BaConfig) -> Result<RdPoint> {
    let d_zero = 1.0 - prior.max();
    if d >= d_zero {
        return Ok(RdPoint::new(None, 0.0, d));
    }
    if d == 0.0 {
        return Ok(RdPoint::new(None, entropy_bits(prior), 0.0));
    }
    let solve = |lambda: f64| ba_point(prior, hamming, &cfg.with_lambda(lambda));

    // Distortion decreases in λ; it equals D0 below the critical slope.
    let mut lo = (1e-8f64, solve(1e-8)?);
    let mut hi_lambda = 1.0;
    let mut hi = solve(hi_lambda)?;
    while hi.distortion > d {
        if hi_lambda > 1e6 {
            return Ok(RdPoint::new(None, entropy_bits(prior), d));
        }
        lo = (hi_lambda, hi);
        hi_lambda *= 4.0;
        hi = solve(hi_lambda)?;
    }
    let mut hi = (hi_lambda, hi);
    for _ in 0..200 {
        if lo.1.distortion - hi.1.distortion < 1e-12 {
            break;
        }
        let mid = (lo.0 * hi.0).sqrt();
        let r = solve(mid)?;
        if r.distortion > d {
            lo = (mid, r);
        } else {
            hi = (mid, r);
        }
    }
    // Both brackets are achievable; time-share between them to hit d exactly.
    let (a, b) = (&lo.1, &hi.1);
    let span = a.distortion - b.distortion;
    let t = if span > 0.0 { (a.distortion - d) / span } else { 1.0 };
    let mut p = RdPoint::new(
        Some(if t < 0.5 { lo.0 } else { hi.0 }),
        a.rate + t * (b.rate - a.rate),
        d,
    );
    p.converged = a.converged && b.converged;
    Ok(p)
}
