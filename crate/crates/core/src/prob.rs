//! Finite-alphabet probability primitives and closed-form rate-distortion functions.
//!
//! All entropies and rates are in bits. The convention `0 log 0 = 0` is applied by an
//! explicit branch so that degenerate distributions never produce NaN.

use crate::error::{Error, Result};

/// Tolerance on `|sum - 1|` accepted by [`Pmf::new`]. Inputs within it are renormalized.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    /// Validates `probs` as a point of the simplex and renormalizes away rounding drift.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&probs)?;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidPmf(format!(
                "entries sum to {sum}, expected 1 within {SIMPLEX_TOL:e}"
            )));
        }
        Ok(Self::normalize(probs, sum))
    }

    /// Normalizes arbitrary nonnegative weights (e.g. counts) into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&weights)?;
        if sum <= 0.0 {
            return Err(Error::InvalidPmf("weights sum to zero".into()));
        }
        Ok(Self::normalize(weights, sum))
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        Ok(Pmf(vec![1.0 / len as f64; len]))
    }

    /// Point mass on `index`.
    pub fn degenerate(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::InvalidPmf(format!(
                "index {index} outside alphabet of size {len}"
            )));
        }
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Ok(Pmf(probs))
    }

    fn normalize(mut probs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Pmf(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// True when every entry equals `1/len` within `tol`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let u = 1.0 / self.len() as f64;
        self.0.iter().all(|&p| (p - u).abs() <= tol)
    }

    /// Index of the largest entry; ties go to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }
}

fn check_weights(w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::InvalidPmf("empty alphabet".into()));
    }
    for (i, &p) in w.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidPmf(format!("entry {i} is {p}")));
        }
    }
    Ok(w.iter().sum())
}

/// `-p log2 p` with `0 log 0 = 0`.
#[inline]
pub(crate) fn neg_plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits.
pub fn entropy_bits(p: &Pmf) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| neg_plogp(p)).sum::<f64>().max(0.0)
}

/// Binary entropy `h(u)` in bits.
pub fn binary_entropy(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("binary entropy needs 0 <= u <= 1, got {u}")));
    }
    Ok(neg_plogp(u) + neg_plogp(1.0 - u))
}

/// Rate-distortion function of a Bernoulli(q) source under Hamming distortion.
pub fn rd_binary(q: f64, d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("q must lie in [0, 1], got {q}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distortion must be >= 0, got {d}")));
    }
    if d >= q.min(1.0 - q) {
        return Ok(0.0);
    }
    Ok((binary_entropy(q)? - binary_entropy(d)?).max(0.0))
}

/// Rate-distortion function of a uniform source over `k` classes under Hamming distortion.
pub fn rd_uniform_classes(k: usize, d: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!("class count must be >= 2, got {k}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distortion must be >= 0, got {d}")));
    }
    let kf = k as f64;
    if d >= 1.0 - 1.0 / kf {
        return Ok(0.0);
    }
    Ok((kf.log2() - binary_entropy(d)? - d * (kf - 1.0).log2()).max(0.0))
}

/// Nonnegative cost table, rows indexed by source symbol, columns by reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
}

impl DistortionMatrix {
    /// Builds a matrix from row-major `costs`.
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDistortion(format!("shape {rows}x{cols}")));
        }
        if costs.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "distortion entries",
                expected: rows * cols,
                found: costs.len(),
            });
        }
        if let Some(i) = costs.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidDistortion(format!(
                "entry ({}, {}) is {}",
                i / cols,
                i % cols,
                costs[i]
            )));
        }
        Ok(Self { rows, cols, costs })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                what: "distortion row length",
                expected: m,
                found: bad.len(),
            });
        }
        Self::new(n, m, rows.into_iter().flatten().collect())
    }

    /// `d(a, b) = 1{a != b}` over `k` symbols.
    pub fn hamming(k: usize) -> Result<Self> {
        let costs = (0..k * k)
            .map(|i| if i / k == i % k { 0.0 } else { 1.0 })
            .collect();
        Self::new(k, k, costs)
    }

    /// `d(x, x̂) = (x - x̂)^2`.
    pub fn squared_error(source: &[f64], recon: &[f64]) -> Result<Self> {
        let costs = source
            .iter()
            .flat_map(|&x| recon.iter().map(move |&y| (x - y) * (x - y)))
            .collect();
        Self::new(source.len(), recon.len(), costs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.costs[i * self.cols..(i + 1) * self.cols]
    }
}

/// Row-stochastic matrix `p(col | row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl Channel {
    /// Validates each row as a pmf (within [`SIMPLEX_TOL`]) and renormalizes it.
    pub fn new(rows: usize, cols: usize, mut probs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidPmf(format!("channel shape {rows}x{cols}")));
        }
        if probs.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "channel entries",
                expected: rows * cols,
                found: probs.len(),
            });
        }
        for (i, row) in probs.chunks_mut(cols).enumerate() {
            let normalized = Pmf::new(row.to_vec())
                .map_err(|e| Error::InvalidPmf(format!("channel row {i}: {e}")))?;
            row.copy_from_slice(normalized.probs());
        }
        Ok(Self { rows, cols, probs })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), rows * cols);
        Self { rows, cols, probs }
    }

    pub fn identity(k: usize) -> Self {
        let probs = (0..k * k)
            .map(|i| if i / k == i % k { 1.0 } else { 0.0 })
            .collect();
        Self::from_raw(k, k, probs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Cascade `self` then `next`: `p(z | x) = sum_y p(y | x) p(z | y)`.
    pub fn then(&self, next: &Channel) -> Result<Channel> {
        if self.cols != next.rows {
            return Err(Error::DimensionMismatch {
                what: "channel cascade",
                expected: self.cols,
                found: next.rows,
            });
        }
        let mut out = vec![0.0; self.rows * next.cols];
        for i in 0..self.rows {
            let dst = &mut out[i * next.cols..(i + 1) * next.cols];
            for (y, &pyx) in self.row(i).iter().enumerate() {
                if pyx == 0.0 {
                    continue;
                }
                for (o, &pz) in dst.iter_mut().zip(next.row(y)) {
                    *o += pyx * pz;
                }
            }
        }
        Ok(Channel::from_raw(self.rows, next.cols, out))
    }

    /// Output distribution when the input is drawn from `input`.
    pub fn output_weights(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &p) in input.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += p * w;
            }
        }
        out
    }
}
