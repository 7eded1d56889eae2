//! Blahut–Arimoto iteration for the rate-distortion function of a finite-alphabet source.
//!
//! For a multiplier `λ > 0` the iteration alternates
//!
//! ```text
//! w(j | i) = q(j) exp(-λ d(i, j)) / Z(i)
//! q(j)     = Σ_i p(i) w(j | i)
//! ```
//!
//! until the output marginal `q` moves less than the configured tolerance in sup-norm.
//! Multipliers are in nats per unit distortion; reported rates are in bits.
//!
//! Before iterating, the solver checks whether the single-letter reconstruction that
//! minimises expected distortion already satisfies the optimality conditions at `λ`.
//! Below the critical slope that is the exact answer, and the plain iteration only
//! reaches it at a rate proportional to `λ`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::curve::{check_lambda_grid, RdCurve, RdPoint};
use crate::error::{Error, Result};
use crate::prob::{Channel, DistortionMatrix, Pmf};

/// Row partition functions below this are recomputed in the log domain.
const TINY_PARTITION: f64 = 1e-250;
/// Output-marginal entries below this are set to zero during the iteration.
const NEGLIGIBLE_MASS: f64 = 1e-200;

#[derive(Debug, Clone, PartialEq)]
pub struct BaConfig {
    pub lambda: f64,
    pub max_iterations: usize,
    /// Sup-norm threshold on the change of the output marginal between iterations.
    pub tolerance: f64,
    /// Optional second stopping rule, in bits: stop once the gap between the upper and
    /// lower bounds on the rate at the current slope falls below this value. Useful for
    /// large alphabets where the output marginal converges slowly onto a sparse support
    /// long after the rate has settled.
    pub gap_tolerance: Option<f64>,
    /// Starting output marginal; uniform when `None`.
    pub initial_marginal: Option<Pmf>,
}

impl Default for BaConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iterations: 10_000,
            tolerance: 1e-10,
            gap_tolerance: None,
            initial_marginal: None,
        }
    }
}

impl BaConfig {
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain(format!(
                "convergence tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if let Some(g) = self.gap_tolerance {
            if !(g > 0.0) {
                return Err(Error::Domain(format!("gap tolerance must be > 0, got {g}")));
            }
        }
        Ok(())
    }
}

/// Operating point returned by [`ba_point`].
#[derive(Debug, Clone)]
pub struct BaResult {
    pub lambda: f64,
    /// Mutual information of `channel` under the source, in bits.
    pub rate: f64,
    pub distortion: f64,
    /// Test channel `p(reconstruction | source)`, one row per source symbol.
    pub channel: Channel,
    pub output_marginal: Pmf,
    pub iterations: usize,
    pub converged: bool,
    /// Width in bits of the rate bracket at the final iterate; the true rate at this
    /// slope is bracketed within `rate_gap` of `rate`. Infinite if it was not evaluated.
    pub rate_gap: f64,
}

impl BaResult {
    pub fn to_point(&self) -> RdPoint {
        RdPoint {
            lambda: Some(self.lambda),
            rate: self.rate,
            distortion: self.distortion,
            converged: self.converged,
            note: None,
        }
    }
}

/// Computes one rate-distortion point at multiplier `cfg.lambda`.
pub fn ba_point(source: &Pmf, d: &DistortionMatrix, cfg: &BaConfig) -> Result<BaResult> {
    cfg.validate()?;
    if source.len() != d.rows() {
        return Err(Error::DimensionMismatch {
            what: "source alphabet vs distortion rows",
            expected: d.rows(),
            found: source.len(),
        });
    }
    if let Some(init) = &cfg.initial_marginal {
        if init.len() != d.cols() {
            return Err(Error::DimensionMismatch {
                what: "initial marginal vs distortion columns",
                expected: d.cols(),
                found: init.len(),
            });
        }
    }

    let p = source.probs();
    let lambda = cfg.lambda;
    let active: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();

    if let Some(j) = zero_rate_symbol(p, &active, d, lambda) {
        return Ok(constant_solution(p, d, lambda, j));
    }

    let m = d.cols();
    let shift = ShiftKernel::detect(d, lambda);
    let mut kernel = Kernel::new(d, lambda, shift.is_none());
    let mut q = match &cfg.initial_marginal {
        Some(init) => init.probs().to_vec(),
        None => vec![1.0 / m as f64; m],
    };
    let mut scale = vec![0.0; m];
    let mut direct = vec![0.0; m];
    let mut next = vec![0.0; m];
    let mut weights = vec![0.0; d.rows()];
    let mut iterations = 0;
    let mut converged = false;
    let mut rate_gap = f64::INFINITY;

    while iterations < cfg.max_iterations {
        iterations += 1;
        direct.fill(0.0);
        match &shift {
            Some(conv) => {
                let z = conv.apply(&q, false);
                let trusted = conv.trust_floor(&z);
                weights.fill(0.0);
                for &i in &active {
                    if z[i] > trusted && z[i].is_finite() {
                        weights[i] = p[i] / z[i];
                    } else {
                        kernel.add_log_domain_row(i, p[i], &q, &mut direct);
                    }
                }
                scale = conv.apply(&weights, true);
            }
            None => {
                scale.fill(0.0);
                for &i in &active {
                    let k = kernel.row(i);
                    let z = dot(&q, k);
                    if z > TINY_PARTITION && z.is_finite() {
                        let s = p[i] / z;
                        for (c, &kv) in scale.iter_mut().zip(k) {
                            *c += s * kv;
                        }
                    } else {
                        kernel.add_log_domain_row(i, p[i], &q, &mut direct);
                    }
                }
            }
        }
        let mut total = 0.0;
        for j in 0..m {
            next[j] = q[j] * scale[j].max(0.0) + direct[j];
            total += next[j];
        }
        rate_gap = bound_gap(&q, &next);
        let mut diff: f64 = 0.0;
        for j in 0..m {
            next[j] /= total;
            if next[j] < NEGLIGIBLE_MASS {
                // Keeps dying reconstruction points out of subnormal arithmetic.
                next[j] = 0.0;
            }
            diff = diff.max((next[j] - q[j]).abs());
        }
        std::mem::swap(&mut q, &mut next);
        if diff < cfg.tolerance || cfg.gap_tolerance.is_some_and(|g| rate_gap < g) {
            converged = true;
            break;
        }
    }
    if shift.is_some() {
        kernel = Kernel::new(d, lambda, true);
    }

    // Channel rows for every source symbol, including zero-probability ones.
    let n = d.rows();
    let mut channel = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut channel[i * m..(i + 1) * m];
        let k = kernel.row(i);
        let z = dot(&q, k);
        if z > TINY_PARTITION && z.is_finite() {
            for ((w, &qj), &kv) in row.iter_mut().zip(&q).zip(k) {
                *w = qj * kv / z;
            }
        } else {
            let log_z = kernel.log_partition(i, &q);
            for (j, w) in row.iter_mut().enumerate() {
                *w = kernel.log_weight(i, j, &q, log_z).exp();
            }
        }
    }
    let channel = Channel::from_raw(n, m, channel);
    let mut result = finish(p, d, lambda, channel, iterations, converged);
    result.rate_gap = rate_gap;
    Ok(result)
}

/// One [`ba_point`] per multiplier, in grid order.
pub fn ba_sweep_results(
    source: &Pmf,
    d: &DistortionMatrix,
    lambdas: &[f64],
    template: &BaConfig,
) -> Result<Vec<BaResult>> {
    check_lambda_grid(lambdas)?;
    lambdas
        .par_iter()
        .map(|&l| ba_point(source, d, &template.with_lambda(l)))
        .collect()
}

/// Traces the rate-distortion curve over a strictly increasing multiplier grid.
pub fn ba_sweep(
    source: &Pmf,
    d: &DistortionMatrix,
    lambdas: &[f64],
    template: &BaConfig,
) -> Result<RdCurve> {
    let results = ba_sweep_results(source, d, lambdas, template)?;
    Ok(RdCurve::from_points(
        "ba",
        results.iter().map(BaResult::to_point).collect(),
    ))
}

/// `exp(-λ (d(i, j) - min_j d(i, j)))`, row-major. The table is optional; the
/// log-domain helpers work without it.
struct Kernel<'a> {
    d: &'a DistortionMatrix,
    lambda: f64,
    row_min: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(d: &'a DistortionMatrix, lambda: f64, with_table: bool) -> Self {
        let m = d.cols();
        let row_min: Vec<f64> = (0..d.rows())
            .map(|i| d.row(i).iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let mut values = Vec::new();
        if with_table {
            values = vec![0.0; d.rows() * m];
            for (i, &lo) in row_min.iter().enumerate() {
                for (v, &c) in values[i * m..(i + 1) * m].iter_mut().zip(d.row(i)) {
                    *v = (-lambda * (c - lo)).exp();
                }
            }
        }
        Self {
            d,
            lambda,
            row_min,
            values,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let m = self.d.cols();
        &self.values[i * m..(i + 1) * m]
    }

    fn log_term(&self, i: usize, j: usize, q: &[f64]) -> f64 {
        if q[j] > 0.0 {
            q[j].ln() - self.lambda * (self.d.get(i, j) - self.row_min[i])
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_partition(&self, i: usize, q: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..q.len()).map(|j| self.log_term(i, j, q)).collect();
        let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln()
    }

    fn log_weight(&self, i: usize, j: usize, q: &[f64], log_z: f64) -> f64 {
        self.log_term(i, j, q) - log_z
    }

    /// Adds `mass · w(· | i)` to `out`, evaluating the row in the log domain.
    fn add_log_domain_row(&self, i: usize, mass: f64, q: &[f64], out: &mut [f64]) {
        let log_z = self.log_partition(i, q);
        for (j, o) in out.iter_mut().enumerate() {
            *o += mass * self.log_weight(i, j, q, log_z).exp();
        }
    }
}

/// Kernel of a square distortion matrix that depends only on `i - j` (for example
/// squared error on a uniform grid). Products with the kernel and its transpose are
/// then convolutions and are evaluated by FFT in `O(n log n)`.
struct ShiftKernel {
    n: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ShiftKernel {
    /// Below this size the dense product is as fast and exact.
    const MIN_SIZE: usize = 128;
    /// Relative deviation from shift invariance that is still treated as exact.
    const SHIFT_TOL: f64 = 1e-12;
    /// Convolution outputs below this fraction of the largest one are recomputed exactly.
    const TRUST_RATIO: f64 = 1e-10;

    fn detect(d: &DistortionMatrix, lambda: f64) -> Option<Self> {
        let n = d.rows();
        if n != d.cols() || n < Self::MIN_SIZE {
            return None;
        }
        // profile[k + n - 1] = d(i, j) for i - j = k
        let mut profile = vec![0.0; 2 * n - 1];
        for k in 0..n {
            profile[n - 1 + k] = d.get(k, 0);
            profile[n - 1 - k] = d.get(0, k);
        }
        let span = profile.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let tol = Self::SHIFT_TOL * span.max(1.0);
        for i in 0..n {
            for (j, &v) in d.row(i).iter().enumerate() {
                if (v - profile[n - 1 + i - j]).abs() > tol {
                    return None;
                }
            }
        }
        let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
        let len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectrum = vec![Complex::new(0.0, 0.0); len];
        for (idx, &t) in profile.iter().enumerate() {
            let k = idx as isize - (n as isize - 1);
            spectrum[k.rem_euclid(len as isize) as usize] =
                Complex::new((-lambda * (t - lo)).exp() / len as f64, 0.0);
        }
        forward.process(&mut spectrum);
        Some(Self {
            n,
            spectrum,
            forward,
            inverse,
        })
    }

    /// `K v` (or `Kᵀ v` when `transpose`), with `K(i, j) = exp(-λ (d(i, j) - min d))`.
    fn apply(&self, v: &[f64], transpose: bool) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.spectrum.len()];
        for (b, &x) in buf.iter_mut().zip(v) {
            b.re = x;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= if transpose { s.conj() } else { *s };
        }
        self.inverse.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re).collect()
    }

    fn trust_floor(&self, z: &[f64]) -> f64 {
        let hi = z.iter().copied().fold(0.0f64, f64::max);
        (hi * Self::TRUST_RATIO).max(TINY_PARTITION)
    }
}

/// Difference in bits between the upper and lower rate bounds at the current iterate,
/// given the marginal `q` before and the unnormalised marginal `next` after an update.
fn bound_gap(q: &[f64], next: &[f64]) -> f64 {
    let mut max_log = f64::NEG_INFINITY;
    let mut mean_log = 0.0;
    for (&qj, &nj) in q.iter().zip(next) {
        if qj > 0.0 && nj > 0.0 {
            let log_c = (nj / qj).ln();
            max_log = max_log.max(log_c);
            mean_log += nj * log_c;
        }
    }
    ((max_log - mean_log) / std::f64::consts::LN_2).max(0.0)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The reconstruction symbol that minimises expected distortion, if the channel that
/// always emits it satisfies the optimality conditions at `lambda`:
/// `Σ_i p(i) exp(λ (d(i, j*) - d(i, j))) <= 1` for every `j`.
fn zero_rate_symbol(
    p: &[f64],
    active: &[usize],
    d: &DistortionMatrix,
    lambda: f64,
) -> Option<usize> {
    let m = d.cols();
    let expected: Vec<f64> = (0..m)
        .map(|j| active.iter().map(|&i| p[i] * d.get(i, j)).sum())
        .collect();
    let mut best = 0;
    for j in 1..m {
        if expected[j] < expected[best] {
            best = j;
        }
    }
    let optimal = (0..m).filter(|&j| j != best).all(|j| {
        let c: f64 = active
            .iter()
            .map(|&i| p[i] * (lambda * (d.get(i, best) - d.get(i, j))).exp())
            .sum();
        c <= 1.0
    });
    optimal.then_some(best)
}

fn constant_solution(p: &[f64], d: &DistortionMatrix, lambda: f64, j: usize) -> BaResult {
    let (n, m) = (d.rows(), d.cols());
    let mut channel = vec![0.0; n * m];
    for i in 0..n {
        channel[i * m + j] = 1.0;
    }
    let distortion = p.iter().enumerate().map(|(i, &pi)| pi * d.get(i, j)).sum();
    BaResult {
        lambda,
        rate: 0.0,
        distortion,
        channel: Channel::from_raw(n, m, channel),
        output_marginal: Pmf::degenerate(m, j).expect("index in range"),
        iterations: 0,
        converged: true,
        rate_gap: 0.0,
    }
}

fn finish(
    p: &[f64],
    d: &DistortionMatrix,
    lambda: f64,
    channel: Channel,
    iterations: usize,
    converged: bool,
) -> BaResult {
    let r = channel.output_weights(p);
    let mut rate = 0.0;
    let mut distortion = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (j, &w) in channel.row(i).iter().enumerate() {
            let joint = pi * w;
            if joint > 0.0 {
                rate += joint * (w / r[j]).log2();
                distortion += joint * d.get(i, j);
            }
        }
    }
    BaResult {
        lambda,
        rate: rate.max(0.0),
        distortion,
        channel,
        output_marginal: Pmf::from_weights(r).expect("channel output is a distribution"),
        iterations,
        converged,
        rate_gap: f64::INFINITY,
    }
}
