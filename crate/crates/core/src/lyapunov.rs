//! Phase-averaged finite-length Lyapunov exponents.

use rayon::prelude::*;

use crate::cocycle::{transfer, TransferRequest};
use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::potential::PotentialSpec;

pub const DEFAULT_LENGTH: f64 = 200.0;
pub const DEFAULT_PHASES: usize = 8;
pub const DEFAULT_H: f64 = 1e-3;

/// Reporting floor for `L̂`; true exponents are non-negative.
pub const L_FLOOR: f64 = -1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    pub length: f64,
    pub n_phases: usize,
    pub h: f64,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams {
            length: DEFAULT_LENGTH,
            n_phases: DEFAULT_PHASES,
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub energy: f64,
    pub l_hat: f64,
    pub length: f64,
    pub n_phases: usize,
    /// Standard error of the phase mean.
    pub stderr: f64,
    pub per_phase: Vec<f64>,
}

/// Mean over phases `x₀ = j/n` of `ln‖T(E, x₀, x₀ + length)‖ / length`.
pub fn lyapunov(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    length: f64,
    n_phases: usize,
    h: f64,
) -> Result<LyapunovEstimate> {
    if !(length >= 10.0) {
        return Err(Error::Precondition(format!("length must be >= 10, got {length}")));
    }
    if n_phases == 0 {
        return Err(Error::Precondition("n_phases must be >= 1".into()));
    }
    let per_phase = (0..n_phases)
        .into_par_iter()
        .map(|j| {
            let x0 = j as f64 / n_phases as f64;
            let req = TransferRequest::new(energy, x0, x0 + length).with_step(h);
            Ok(transfer(spec, freq, &req)?.log_norm()? / length)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = per_phase.len() as f64;
    let mean = per_phase.iter().sum::<f64>() / n;
    let stderr = if per_phase.len() > 1 {
        let var = per_phase.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(LyapunovEstimate {
        energy,
        l_hat: mean.max(L_FLOOR),
        length,
        n_phases,
        stderr,
        per_phase,
    })
}

pub fn lyapunov_with(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    params: &LyapunovParams,
) -> Result<LyapunovEstimate> {
    lyapunov(spec, freq, energy, params.length, params.n_phases, params.h)
}

/// One estimate per grid point, in grid order.
pub fn lyapunov_scan(
    spec: &PotentialSpec,
    freq: &Frequency,
    grid: &[f64],
    params: &LyapunovParams,
) -> Result<Vec<LyapunovEstimate>> {
    if grid.is_empty() {
        return Err(Error::Precondition("energy grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition("energy grid must be sorted".into()));
    }
    grid.par_iter()
        .map(|&e| lyapunov_with(spec, freq, e, params))
        .collect()
}

/// Least-squares fit of `ln‖T(E, 0, x)‖` against `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    pub lengths: Vec<f64>,
    pub log_norms: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl GrowthFit {
    /// `slope ≤ L̂ + 3·stderr + 0.02`.
    pub fn consistent_with(&self, est: &LyapunovEstimate) -> bool {
        self.slope <= est.l_hat + 3.0 * est.stderr + 0.02
    }
}

pub fn growth_bound_check(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    lengths: &[f64],
    h: f64,
) -> Result<GrowthFit> {
    if lengths.len() < 3 || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("need at least 3 increasing lengths".into()));
    }
    let log_norms = lengths
        .par_iter()
        .map(|&x| transfer(spec, freq, &TransferRequest::new(energy, 0.0, x).with_step(h))?.log_norm())
        .collect::<Result<Vec<f64>>>()?;
    let (slope, intercept) = least_squares(lengths, &log_norms);
    let residuals = lengths
        .iter()
        .zip(&log_norms)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(GrowthFit {
        slope,
        intercept,
        lengths: lengths.to_vec(),
        log_norms,
        residuals,
    })
}

/// Ordinary least squares `y ≈ a + b x`, returned as `(b, a)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
