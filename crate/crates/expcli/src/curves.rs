//! Per-trial log-residual curves and their aggregates.

use serde::Serialize;

/// Residuals below `FLOOR_REL * ||y||` are plotted at that floor.
pub const FLOOR_REL: f64 = 1e-16;

/// `ln ||r_k||` for one trial, clipped at `ln(FLOOR_REL * ||y||)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCurve {
    pub values: Vec<f64>,
    pub clipped: usize,
}

impl LogCurve {
    pub fn from_norms(norms: &[f64], y_l2: f64) -> Self {
        let floor = (FLOOR_REL * y_l2).ln();
        let mut clipped = 0;
        let values = norms
            .iter()
            .map(|&r| {
                let v = r.ln();
                if v < floor {
                    clipped += 1;
                    floor
                } else {
                    v
                }
            })
            .collect();
        Self { values, clipped }
    }

    /// Value at `k`, holding the last value once the solver has stopped.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k.min(self.values.len() - 1)]
    }
}

/// `ln ||y|| + (k/2) ln(1 - theta)`.
pub fn bound_line(y_l2: f64, theta: f64, len: usize) -> Vec<f64> {
    let a = y_l2.ln();
    let slope = 0.5 * (1.0 - theta).ln();
    (0..len).map(|k| a + k as f64 * slope).collect()
}

/// Mean, maximum and bound of `ln ||r_k||` across trials, one entry per iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateCurve {
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
    pub bound: Vec<f64>,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Length of the longest curve.
pub fn span(curves: &[LogCurve]) -> usize {
    curves.iter().map(|c| c.values.len()).max().unwrap_or(0)
}

/// Pointwise mean, summed in trial order.
pub fn mean_curve(curves: &[LogCurve], len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| curves.iter().fold(0.0, |acc, c| acc + c.at(k)) / curves.len() as f64)
        .collect()
}

pub fn max_curve(curves: &[LogCurve], len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            curves
                .iter()
                .map(|c| c.at(k))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

pub fn pointwise_max(lines: &[Vec<f64>]) -> Vec<f64> {
    let len = lines.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|k| lines.iter().map(|l| l[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

pub fn pointwise_mean(lines: &[Vec<f64>]) -> Vec<f64> {
    let len = lines.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|k| lines.iter().fold(0.0, |acc, l| acc + l[k]) / lines.len() as f64)
        .collect()
}

/// Least-squares slope of `values[k]` against `k` over `range`.
pub fn fitted_slope(values: &[f64], range: std::ops::Range<usize>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = range.map(|k| (k as f64, values[k])).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
