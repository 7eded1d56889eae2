//! Binary Gaussian-mixture example: `Y ~ Bernoulli(q)`, `X = mean(Y) + Z`, `Z ~ N(0, σ²)`.
//!
//! The observation is discretized on a uniform grid (midpoint rule, per-class
//! renormalization) and four curves are computed on it:
//!
//! - `ord`: the Hamming RD function of `Y` (perfect identifiability);
//! - `ird`: the indirect RD function of `Y` from `X`, via the effective distortion
//!   `d̂(x, ŷ) = 1 - p(ŷ | x)`;
//! - `ec`: estimate `Ỹ = 1{X >= 0}`, then compress `Ỹ`;
//! - `ce`: compress `X` under squared error on the grid, then MAP-estimate `Y` from `X̂`.

use rayon::prelude::*;

use crate::ba::{ba_point, ba_sweep_results, BaConfig};
use crate::classify::{ec_curve, ConfusionMatrix};
use crate::curve::{check_lambda_grid, linspace, RdCurve, RdPoint};
use crate::error::{Error, Result};
use crate::prob::{rd_binary, Channel, DistortionMatrix, Pmf};

#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    /// `P(Y = 1)`.
    pub q: f64,
    /// Component means for `Y = 0` and `Y = 1`.
    pub means: [f64; 2],
    pub noise_variance: f64,
    /// Grid covers `[-half_width, half_width]`.
    pub half_width: f64,
    /// Number of cell centers; odd so that 0 is a grid point.
    pub bins: usize,
}

impl Default for GmmSpec {
    fn default() -> Self {
        Self {
            q: 0.5,
            means: [-1.0, 1.0],
            noise_variance: 1.0,
            half_width: 6.0,
            bins: 1201,
        }
    }
}

impl GmmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Domain(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::Domain(format!(
                "grid half-width must be > 0, got {}",
                self.half_width
            )));
        }
        if self.bins < 3 || self.bins % 2 == 0 {
            return Err(Error::Domain(format!(
                "grid bins must be odd and >= 3, got {}",
                self.bins
            )));
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::Domain(format!(
                "noise variance must be > 0, got {}",
                self.noise_variance
            )));
        }
        if !self.means.iter().all(|m| m.is_finite()) {
            return Err(Error::Domain("class means must be finite".into()));
        }
        Ok(())
    }
}

/// The mixture on a finite grid.
#[derive(Debug, Clone)]
pub struct DiscretizedGmm {
    pub spec: GmmSpec,
    /// Cell centers, ascending.
    pub grid: Vec<f64>,
    pub width: f64,
    /// `p(y)` for `y = 0, 1`.
    pub prior: Pmf,
    pub p_x: Pmf,
    /// `p(x | y)` for `y = 0, 1`.
    pub p_x_given_y: [Pmf; 2],
    /// `p(y | x)` per cell.
    pub p_y_given_x: Vec<[f64; 2]>,
}

pub fn discretize(spec: &GmmSpec) -> Result<DiscretizedGmm> {
    spec.validate()?;
    let n = spec.bins;
    let grid = linspace(-spec.half_width, spec.half_width, n);
    let width = 2.0 * spec.half_width / (n - 1) as f64;
    let sigma = spec.noise_variance.sqrt();
    let class_pmf = |mean: f64| -> Result<Pmf> {
        let dens = grid
            .iter()
            .map(|&x| {
                let z = (x - mean) / sigma;
                (-0.5 * z * z).exp() * width
            })
            .collect();
        Pmf::from_weights(dens)
    };
    let p0 = class_pmf(spec.means[0])?;
    let p1 = class_pmf(spec.means[1])?;
    let prior = Pmf::new(vec![1.0 - spec.q, spec.q])?;
    let (w0, w1) = (1.0 - spec.q, spec.q);
    let joint: Vec<[f64; 2]> = p0
        .probs()
        .iter()
        .zip(p1.probs())
        .map(|(&a, &b)| [w0 * a, w1 * b])
        .collect();
    let p_x = Pmf::from_weights(joint.iter().map(|j| j[0] + j[1]).collect())?;
    let p_y_given_x = joint
        .iter()
        .map(|&[a, b]| {
            let s = a + b;
            if s > 0.0 {
                [a / s, b / s]
            } else {
                [w0, w1]
            }
        })
        .collect();
    Ok(DiscretizedGmm {
        spec: spec.clone(),
        grid,
        width,
        prior,
        p_x,
        p_x_given_y: [p0, p1],
        p_y_given_x,
    })
}

/// Confusion matrix of the estimator `Ỹ = 1{X >= 0}`.
pub fn sign_confusion(g: &DiscretizedGmm) -> Result<ConfusionMatrix> {
    let mut probs = Vec::with_capacity(4);
    for class in &g.p_x_given_y {
        let mut mass = [0.0f64; 2];
        for (&x, &p) in g.grid.iter().zip(class.probs()) {
            mass[usize::from(x >= 0.0)] += p;
        }
        let total = mass[0] + mass[1];
        probs.extend_from_slice(&[mass[0] / total, mass[1] / total]);
    }
    ConfusionMatrix::new(Channel::new(2, 2, probs)?, g.prior.clone())
}

/// Error probability of `Ỹ = 1{X >= 0}` on the grid.
pub fn d_tm_gmm(g: &DiscretizedGmm) -> f64 {
    let prior = g.prior.probs();
    g.grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x >= 0.0 {
                prior[0] * g.p_x_given_y[0].probs()[i]
            } else {
                prior[1] * g.p_x_given_y[1].probs()[i]
            }
        })
        .sum()
}

/// Closed-form Hamming RD function of `Y`, sampled at `points` distortions in `[0, D0]`.
pub fn gmm_ord_curve(g: &DiscretizedGmm, points: usize) -> Result<RdCurve> {
    let q = g.spec.q;
    let pts = linspace(0.0, q.min(1.0 - q), points.max(2))
        .into_iter()
        .map(|d| Ok(RdPoint::new(None, rd_binary(q, d)?, d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve::from_points("ord", pts))
}

/// Indirect RD function of `Y` observed through `X`.
pub fn gmm_ird_curve(g: &DiscretizedGmm, lambdas: &[f64], cfg: &BaConfig) -> Result<RdCurve> {
    let costs = g
        .p_y_given_x
        .iter()
        .flat_map(|post| [1.0 - post[0], 1.0 - post[1]])
        .map(|c| c.max(0.0))
        .collect();
    let d = DistortionMatrix::new(g.grid.len(), 2, costs)?;
    let results = ba_sweep_results(&g.p_x, &d, lambdas, cfg)?;
    Ok(RdCurve::from_points(
        "ird",
        results.iter().map(|r| r.to_point()).collect(),
    ))
}

/// Estimate-and-compress with the sign estimator.
pub fn gmm_ec_curve(g: &DiscretizedGmm, lambdas: &[f64], cfg: &BaConfig) -> Result<RdCurve> {
    ec_curve(&sign_confusion(g)?, lambdas, cfg)
}

/// Compress-and-estimate: squared-error RD on the grid, then MAP on the reconstruction.
///
/// `D_Y = Σ_x̂ p(x̂) [1 - max_y p(y | x̂)] = 1 - Σ_x̂ max_y p(y, x̂)`.
pub fn gmm_ce_curve(g: &DiscretizedGmm, lambdas: &[f64], cfg: &BaConfig) -> Result<RdCurve> {
    check_lambda_grid(lambdas)?;
    let d = DistortionMatrix::squared_error(&g.grid, &g.grid)?;
    let prior = g.prior.probs();
    let points = lambdas
        .par_iter()
        .map(|&l| {
            let r = ba_point(&g.p_x, &d, &cfg.with_lambda(l))?;
            let mut joint = vec![[0.0f64; 2]; g.grid.len()];
            for (x, row) in (0..g.grid.len()).map(|x| (x, r.channel.row(x))) {
                let py = [
                    prior[0] * g.p_x_given_y[0].probs()[x],
                    prior[1] * g.p_x_given_y[1].probs()[x],
                ];
                for (j, &w) in joint.iter_mut().zip(row) {
                    if w > 0.0 {
                        j[0] += w * py[0];
                        j[1] += w * py[1];
                    }
                }
            }
            let correct: f64 = joint.iter().map(|j| j[0].max(j[1])).sum();
            let mut p = r.to_point();
            p.distortion = (1.0 - correct).max(0.0);
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve::from_points("ce", points))
}

/// All four curves: `ord`, `ird`, `ec`, `ce`.
pub fn gmm_curves(
    g: &DiscretizedGmm,
    lambdas: &[f64],
    cfg: &BaConfig,
    ord_points: usize,
) -> Result<Vec<RdCurve>> {
    Ok(vec![
        gmm_ord_curve(g, ord_points)?,
        gmm_ird_curve(g, lambdas, cfg)?,
        gmm_ec_curve(g, lambdas, cfg)?,
        gmm_ce_curve(g, lambdas, cfg)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_validation() {
        let bad = [
            GmmSpec { q: 0.0, ..GmmSpec::default() },
            GmmSpec { q: 1.0, ..GmmSpec::default() },
            GmmSpec { bins: 1200, ..GmmSpec::default() },
            GmmSpec { bins: 1, ..GmmSpec::default() },
            GmmSpec { half_width: 0.0, ..GmmSpec::default() },
            GmmSpec { noise_variance: 0.0, ..GmmSpec::default() },
        ];
        for s in bad {
            assert!(discretize(&s).is_err(), "{s:?}");
        }
    }

    #[test]
    fn discretization_invariants() {
        let g = discretize(&GmmSpec::default()).unwrap();
        assert_eq!(g.grid.len(), 1201);
        assert_abs_diff_eq!(g.width, 0.01, epsilon = 1e-15);
        assert_eq!(g.grid[600], 0.0);
        let n = g.grid.len();
        for i in 0..n {
            let mix = 0.5 * g.p_x_given_y[0].probs()[i] + 0.5 * g.p_x_given_y[1].probs()[i];
            assert_abs_diff_eq!(mix, g.p_x.probs()[i], epsilon = 1e-12);
            assert_abs_diff_eq!(g.p_y_given_x[i][0] + g.p_y_given_x[i][1], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g.p_x.probs()[i], g.p_x.probs()[n - 1 - i], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(g.p_y_given_x[600][0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn sign_estimator_error() {
        let g = discretize(&GmmSpec::default()).unwrap();
        // 1 - Φ(1)
        assert_abs_diff_eq!(d_tm_gmm(&g), 0.15865525393, epsilon = 2e-4);
        let cm = sign_confusion(&g).unwrap();
        assert_abs_diff_eq!(crate::classify::stats(&cm).d_tm, d_tm_gmm(&g), epsilon = 1e-12);
    }

    #[test]
    fn sign_estimator_error_for_skewed_prior() {
        let spec = GmmSpec { q: 0.99, ..GmmSpec::default() };
        let g = discretize(&spec).unwrap();
        let neg: f64 = (0..g.grid.len())
            .filter(|&i| g.grid[i] < 0.0)
            .map(|i| g.p_x_given_y[1].probs()[i])
            .sum();
        let nonneg: f64 = (0..g.grid.len())
            .filter(|&i| g.grid[i] >= 0.0)
            .map(|i| g.p_x_given_y[0].probs()[i])
            .sum();
        assert_abs_diff_eq!(d_tm_gmm(&g), 0.99 * neg + 0.01 * nonneg, epsilon = 1e-15);
    }

    #[test]
    fn ird_floor_and_zero_rate() {
        let g = discretize(&GmmSpec::default()).unwrap();
        let lambdas = crate::curve::LambdaGrid::log(1e-3, 1e4, 30).values().unwrap();
        let c = gmm_ird_curve(&g, &lambdas, &BaConfig::default()).unwrap();
        assert_abs_diff_eq!(c.min_distortion().unwrap(), d_tm_gmm(&g), epsilon = 2e-4);
        let last = c.points.last().unwrap();
        assert_abs_diff_eq!(last.distortion, 0.5, epsilon = 1e-3);
        assert!(last.rate < 1e-3);
    }
}
