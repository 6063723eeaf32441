//! Geometric `h` grids and log-log least-squares rate fits.

use crate::error::{Error, Result};

/// Values with modulus below this are treated as exact zeros and left out
/// of rate fits; fitting them would only measure rounding noise.
pub const ZERO_FLOOR: f64 = 1e-13;

/// Minimum number of usable points for a reported fit.
pub const MIN_FIT_POINTS: usize = 4;

/// `h_k = start * ratio^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl HGrid {
    pub fn new(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(start > 0.0 && start < 1.0) {
            return Err(Error::invalid("grid start", format!("must lie in (0, 1), got {start}")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid("grid ratio", format!("must lie in (0, 1), got {ratio}")));
        }
        if count == 0 {
            return Err(Error::invalid("grid count", "must be positive"));
        }
        Ok(Self {
            start,
            ratio,
            count,
        })
    }

    /// `h = 2^{-k}` for `k` in `first..=last`.
    pub fn dyadic(first: u32, last: u32) -> Self {
        assert!(first >= 1 && last >= first, "dyadic grid needs 1 <= first <= last");
        Self {
            start: 0.5f64.powi(first as i32),
            ratio: 0.5,
            count: (last - first + 1) as usize,
        }
    }

    /// `h = 2^{-3}, ..., 2^{-10}`.
    pub fn default_sweep() -> Self {
        Self::dyadic(3, 10)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.start * self.ratio.powi(k as i32))
            .collect()
    }

    pub fn require_fit_size(&self) -> Result<()> {
        if self.count < MIN_FIT_POINTS {
            return Err(Error::TooFewPoints {
                used: self.count,
                needed: MIN_FIT_POINTS,
            });
        }
        Ok(())
    }
}

/// Least-squares line through `(ln h, ln |q|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Fits `ln|q| = slope * ln h + intercept`, skipping `|q| < ZERO_FLOOR`.
pub fn fit_loglog(hs: &[f64], values: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(values)
        .filter(|(_, q)| q.abs() >= ZERO_FLOOR && q.is_finite())
        .map(|(h, q)| (h.ln(), q.abs().ln()))
        .collect();
    fit_line(&pts)
}

/// Fits a line through `(ln h, ln|q|)` pairs given directly in log form.
/// Non-finite logarithms (exact zeros) are skipped.
pub fn fit_log_values(ln_h: &[f64], ln_q: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = ln_h
        .iter()
        .zip(ln_q)
        .filter(|(_, q)| q.is_finite())
        .map(|(h, q)| (*h, *q))
        .collect();
    fit_line(&pts)
}

fn fit_line(pts: &[(f64, f64)]) -> Result<RateFit> {
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            used: pts.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit", "all h values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points_used: pts.len(),
    })
}

/// True when the last `tail` values never increase (ties allowed).
pub fn decreasing_tail(values: &[f64], tail: usize) -> bool {
    let start = values.len().saturating_sub(tail);
    values[start..].windows(2).all(|w| w[1] <= w[0])
}
