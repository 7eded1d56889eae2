//! Rate-distortion curves, multiplier grids and curve interpolation.

use crate::error::{Error, Result};

/// Two distortions closer than this are the same operating point.
pub const DISTORTION_DEDUP_TOL: f64 = 1e-9;

/// One operating point of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    /// Lagrange multiplier (or inverse temperature) that produced the point, if any.
    pub lambda: Option<f64>,
    /// Rate in bits.
    pub rate: f64,
    pub distortion: f64,
    /// False when the iterative solver stopped on its iteration budget.
    pub converged: bool,
    /// Free-form annotation written to the `flags` column (e.g. `k=3`).
    pub note: Option<String>,
}

impl RdPoint {
    pub fn new(lambda: Option<f64>, rate: f64, distortion: f64) -> Self {
        Self {
            lambda,
            rate,
            distortion,
            converged: true,
            note: None,
        }
    }
}

/// Ordered operating points of one coding method.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    pub method: String,
    pub points: Vec<RdPoint>,
    /// Points are sample estimates rather than exact solver output.
    pub empirical: bool,
}

impl RdCurve {
    /// Sorts by distortion and merges points whose distortions agree within
    /// [`DISTORTION_DEDUP_TOL`], keeping the smaller rate.
    pub fn from_points(method: impl Into<String>, mut points: Vec<RdPoint>) -> Self {
        points.sort_by(|a, b| a.distortion.total_cmp(&b.distortion));
        let mut out: Vec<RdPoint> = Vec::with_capacity(points.len());
        for p in points {
            match out.last_mut() {
                Some(last) if (p.distortion - last.distortion).abs() <= DISTORTION_DEDUP_TOL => {
                    if p.rate < last.rate {
                        *last = p;
                    }
                }
                _ => out.push(p),
            }
        }
        Self {
            method: method.into(),
            points: out,
            empirical: false,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_distortion(&self) -> Option<f64> {
        self.points.first().map(|p| p.distortion)
    }

    pub fn max_distortion(&self) -> Option<f64> {
        self.points.last().map(|p| p.distortion)
    }

    /// Piecewise-linear rate at distortion `d` after replacing each rate by the smallest
    /// rate reachable at no larger distortion. `None` outside the covered distortion range.
    pub fn rate_at(&self, d: f64) -> Option<f64> {
        let pts = &self.points;
        let (first, last) = (pts.first()?, pts.last()?);
        if d < first.distortion - DISTORTION_DEDUP_TOL || d > last.distortion + DISTORTION_DEDUP_TOL
        {
            return None;
        }
        let mut env = Vec::with_capacity(pts.len());
        let mut running = f64::INFINITY;
        for p in pts {
            running = running.min(p.rate);
            env.push(running);
        }
        let hi = pts.partition_point(|p| p.distortion < d);
        if hi == 0 {
            return Some(env[0]);
        }
        if hi == pts.len() {
            return Some(env[pts.len() - 1]);
        }
        let (d0, d1) = (pts[hi - 1].distortion, pts[hi].distortion);
        let t = if d1 > d0 { (d - d0) / (d1 - d0) } else { 1.0 };
        Some(env[hi - 1] + t * (env[hi] - env[hi - 1]))
    }
}

/// Spacing of a multiplier grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridScale {
    Log,
    Linear,
}

/// A multiplier grid given by its range, size and spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: GridScale,
}

impl LambdaGrid {
    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            scale: GridScale::Log,
        }
    }

    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            scale: GridScale::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0) || !self.max.is_finite() || !(self.min < self.max) {
            return Err(Error::Domain(format!(
                "lambda range needs 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.points == 0 {
            return Err(Error::Domain("lambda grid needs at least one point".into()));
        }
        Ok(())
    }

    /// Strictly increasing multiplier values; a one-point grid is `[min]`.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let n = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                let t = i as f64 / n;
                match self.scale {
                    GridScale::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                    GridScale::Linear => self.min + t * (self.max - self.min),
                }
            })
            .collect())
    }
}

/// Checks that `grid` is nonempty, positive, finite and strictly increasing.
pub fn check_lambda_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty lambda grid".into()));
    }
    if let Some(l) = grid.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive and finite, got {l}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("lambda grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` evenly spaced values covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
