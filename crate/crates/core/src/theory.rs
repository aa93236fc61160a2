//! Recovery and convergence-rate bounds for Frank-Wolfe on the l1 ball,
//! and a validator that checks a solver trace against them.
//!
//! With `mu1` the Babel function, `m` the sparsity of `y = Phi x*` and
//! `m < (1/mu + 1) / 2`:
//!
//! * every selected atom lies in the support of `x*`;
//! * if `||x*||_1 < beta`, from some iteration `K` on
//!   `||r_{k+1}||^2 <= (1 - theta) ||r_k||^2` with
//!   `theta = (1/16) ((1 - mu1(m-1)) / m) (1 - ||x*||_1 / beta)^2`;
//! * every iterate satisfies `||x_k||_1 <= 2 ||y|| sqrt(m / (1 - mu1(m-1)))`;
//! * if `beta` exceeds that same quantity, the contraction holds from
//!   `k = 0` with `theta' = ((1 - mu1(m-1)) / (4m)) (1 - tau)^2`, where
//!   `tau = (2 ||y|| / beta) sqrt(m / (1 - mu1(m-1)))`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dictionary::DictionaryMetrics;
use crate::error::{Error, Result};
use crate::pursuit::{Algorithm, SolverTrace};
use crate::synth::SparseInstance;

/// Slack on squared-residual ratios.
pub const RATIO_TOL: f64 = 1e-12;

/// Ratios whose denominator `||r_k||` is below `FLOOR_REL * ||y||` are skipped.
pub const FLOOR_REL: f64 = 1e-13;

fn check_mu1(mu1: f64) -> Result<()> {
    if !(0.0..1.0).contains(&mu1) {
        return Err(Error::ConditionViolated(format!(
            "mu1(m-1) = {mu1} must lie in [0, 1)"
        )));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::ConditionViolated("sparsity m must be >= 1".into()));
    }
    Ok(())
}

/// Contraction constant beyond `K`.
pub fn theta(mu1_m_minus_1: f64, m: usize, x_star_l1: f64, beta: f64) -> Result<f64> {
    check_mu1(mu1_m_minus_1)?;
    check_m(m)?;
    if !(beta > 0.0) || x_star_l1 < 0.0 || x_star_l1 > beta {
        return Err(Error::ConditionViolated(format!(
            "need 0 <= ||x*||_1 = {x_star_l1} <= beta = {beta}"
        )));
    }
    let gap = 1.0 - x_star_l1 / beta;
    Ok((1.0 / 16.0) * ((1.0 - mu1_m_minus_1) / m as f64) * gap * gap)
}

/// Radius above which contraction holds from the first iteration.
pub fn beta_threshold(y_l2: f64, m: usize, mu1_m_minus_1: f64) -> Result<f64> {
    check_mu1(mu1_m_minus_1)?;
    check_m(m)?;
    Ok(2.0 * y_l2 * (m as f64 / (1.0 - mu1_m_minus_1)).sqrt())
}

/// Uniform bound on `||x_k||_1` over all iterations.
///
/// Numerically identical to [`beta_threshold`].
pub fn iterate_l1_bound(y_l2: f64, m: usize, mu1_m_minus_1: f64) -> Result<f64> {
    beta_threshold(y_l2, m, mu1_m_minus_1)
}

/// `tau = (2 ||y|| / beta) sqrt(m / (1 - mu1(m-1)))`; below 1 exactly when
/// `beta` exceeds [`beta_threshold`].
pub fn tau(y_l2: f64, beta: f64, m: usize, mu1_m_minus_1: f64) -> Result<f64> {
    check_mu1(mu1_m_minus_1)?;
    check_m(m)?;
    if !(beta > 0.0) {
        return Err(Error::ConditionViolated(format!(
            "beta = {beta} must be > 0"
        )));
    }
    Ok((2.0 * y_l2 / beta) * (m as f64 / (1.0 - mu1_m_minus_1)).sqrt())
}

/// First-iteration contraction constant `theta'`.
///
/// `tau = 1` is the boundary and gives 0; larger `tau` is rejected.
pub fn first_iter_rate(mu1_m_minus_1: f64, m: usize, tau: f64) -> Result<f64> {
    check_mu1(mu1_m_minus_1)?;
    check_m(m)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::ConditionViolated(format!(
            "tau = {tau} must lie in [0, 1] (beta below threshold)"
        )));
    }
    let gap = 1.0 - tau;
    Ok(((1.0 - mu1_m_minus_1) / (4.0 * m as f64)) * gap * gap)
}

/// Everything the validator computed, with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub algorithm: Algorithm,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub coherence: Option<f64>,
    pub mu1_m_minus_1: Option<f64>,
    pub x_star_l1: f64,
    pub y_l2: f64,
    pub iterations: usize,

    /// `m < (1/mu + 1) / 2`.
    pub recovery_ok: bool,
    pub off_support_selections: usize,
    pub support_confined: bool,

    pub theta: Option<f64>,
    /// Start of the final run of iterations whose squared-residual ratio is
    /// at most `1 - theta` (up to [`RATIO_TOL`]); `None` when the last
    /// checked ratio violates it or `theta` is undefined.
    pub k_detected: Option<usize>,
    /// From `k_detected` on, `log ||r_k||` stays under the line
    /// `log ||r_K|| + (k - K) log(1 - theta) / 2`.
    pub bound_line_ok: Option<bool>,

    pub beta_threshold: Option<f64>,
    pub tau: Option<f64>,
    pub theta_first_iter: Option<f64>,
    /// Contraction by `1 - theta'` at every iteration; `None` unless `beta`
    /// exceeds the threshold.
    pub first_iter_ok: Option<bool>,
    pub first_iter_violations: usize,

    pub iterate_l1_bound: Option<f64>,
    pub max_iterate_l1: f64,
    pub iterate_bound_violations: usize,

    /// `(beta - ||x*||_1) / 2`.
    pub epsilon: f64,
    /// First `k` with `||x_k - x*||_1 <= epsilon`.
    pub epsilon_reached_at: Option<usize>,
    /// Smallest `K` with `||x_k - x*||_1 <= epsilon` for every recorded `k >= K`.
    pub epsilon_stable_from: Option<usize>,
    /// Ratios above `1 - theta` at or after `epsilon_stable_from`.
    pub rate_violations_after_epsilon: Option<usize>,
}

/// Squared-residual ratios `||r_{k+1}||^2 / ||r_k||^2`, `None` where
/// `||r_k||` sits below the numerical floor.
pub fn squared_ratios(trace: &SolverTrace, y_l2: f64) -> Vec<Option<f64>> {
    let norms = trace.residual_norms();
    norms
        .windows(2)
        .map(|w| {
            if w[0] < FLOOR_REL * y_l2 || w[0] == 0.0 {
                None
            } else {
                Some((w[1] / w[0]).powi(2))
            }
        })
        .collect()
}

/// Backward scan: start of the final run of ratios within `limit`.
fn detect_k(ratios: &[Option<f64>], limit: f64) -> Option<usize> {
    let mut k_start = ratios.len();
    for (k, q) in ratios.iter().enumerate().rev() {
        match q {
            Some(q) if *q > limit => break,
            _ => k_start = k,
        }
    }
    if ratios.is_empty() {
        Some(0)
    } else if k_start == ratios.len() {
        None
    } else {
        Some(k_start)
    }
}

fn l1_distance(x: &[(usize, f64)], target: &DVector<f64>) -> f64 {
    let mut diff = target.clone();
    for &(i, v) in x {
        diff[i] -= v;
    }
    diff.lp_norm(1)
}

/// Checks `trace` against every bound that applies to `instance` on a
/// dictionary with `metrics`, for ball radius `beta`.
pub fn validate_trace(
    trace: &SolverTrace,
    instance: &SparseInstance,
    metrics: &DictionaryMetrics,
    beta: f64,
) -> Result<TheoryReport> {
    let n = instance.n();
    if trace.final_x.len() != n || metrics.n() != n {
        return Err(Error::MismatchedTrace(format!(
            "atom counts differ: trace {}, instance {}, dictionary {}",
            trace.final_x.len(),
            n,
            metrics.n()
        )));
    }
    if let Some(b) = trace.beta {
        if (b - beta).abs() > 1e-12 * beta.abs() {
            return Err(Error::MismatchedTrace(format!(
                "trace ran with beta = {b}, validating against {beta}"
            )));
        }
    }
    let y_l2 = instance.l2_signal_norm;
    if let Some(first) = trace.records.first() {
        if (first.residual_norm - y_l2).abs() > 1e-8 * y_l2.max(f64::MIN_POSITIVE) {
            return Err(Error::MismatchedTrace(format!(
                "initial residual {} does not match ||y|| = {}",
                first.residual_norm, y_l2
            )));
        }
    }
    if let Some(r) = trace.records.iter().find(|r| r.atom >= n) {
        return Err(Error::MismatchedTrace(format!(
            "atom {} out of range",
            r.atom
        )));
    }

    let m = instance.m();
    let x_star_l1 = instance.l1_coeff_norm;
    let coherence = metrics.coherence().ok();
    let recovery_ok = metrics.recovery_condition(m);
    let mu1 = if m >= 1 {
        Some(metrics.babel_at(m - 1)?)
    } else {
        None
    };

    let off_support_selections = trace
        .selected_atoms()
        .filter(|&a| !instance.support.contains(a))
        .count();

    let ratios = squared_ratios(trace, y_l2);

    let theta_val = match mu1 {
        Some(mu1) if recovery_ok && x_star_l1 < beta => theta(mu1, m, x_star_l1, beta).ok(),
        _ => None,
    };
    let k_detected = theta_val.and_then(|t| detect_k(&ratios, 1.0 - t + RATIO_TOL));
    let bound_line_ok = match (theta_val, k_detected) {
        (Some(t), Some(k0)) => {
            let norms = trace.residual_norms();
            let slope = 0.5 * (1.0 - t).ln();
            let base = norms[k0].ln();
            Some(
                norms
                    .iter()
                    .enumerate()
                    .skip(k0)
                    .filter(|(_, r)| **r >= FLOOR_REL * y_l2 && **r > 0.0)
                    .all(|(k, r)| {
                        let steps = (k - k0) as f64;
                        r.ln() <= base + steps * slope + RATIO_TOL * (steps + 1.0)
                    }),
            )
        }
        _ => None,
    };

    let bounds_apply = recovery_ok && mu1.is_some_and(|v| v < 1.0);
    let (threshold, tau_val, theta1) = match mu1 {
        Some(mu1) if bounds_apply => {
            let thr = beta_threshold(y_l2, m, mu1)?;
            let t = tau(y_l2, beta, m, mu1)?;
            let rate = if t < 1.0 {
                first_iter_rate(mu1, m, t).ok()
            } else {
                None
            };
            (Some(thr), Some(t), rate)
        }
        _ => (None, None, None),
    };
    let first_iter_violations = theta1.map_or(0, |t1| {
        ratios
            .iter()
            .flatten()
            .filter(|&&q| q > 1.0 - t1 + RATIO_TOL)
            .count()
    });
    let first_iter_ok = theta1.map(|_| first_iter_violations == 0);

    let iterate_norms: Vec<f64> = trace
        .records
        .iter()
        .map(|r| r.iterate_l1)
        .chain(std::iter::once(trace.final_x.lp_norm(1)))
        .collect();
    let max_iterate_l1 = iterate_norms.iter().cloned().fold(0.0, f64::max);
    let iterate_bound = match mu1 {
        Some(mu1) if bounds_apply => Some(iterate_l1_bound(y_l2, m, mu1)?),
        _ => None,
    };
    let iterate_bound_violations = iterate_bound.map_or(0, |b| {
        iterate_norms
            .iter()
            .filter(|&&v| v > b * (1.0 + RATIO_TOL))
            .count()
    });

    let epsilon = (beta - x_star_l1) / 2.0;
    let distances: Option<Vec<f64>> = (0..=trace.iterations())
        .map(|k| {
            trace
                .iterate(k)
                .map(|x| l1_distance(&x, &instance.coefficients))
        })
        .collect();
    let (epsilon_reached_at, epsilon_stable_from) = match (&distances, epsilon > 0.0) {
        (Some(ds), true) => {
            let first = ds.iter().position(|&v| v <= epsilon);
            let stable = ds
                .iter()
                .rposition(|&v| v > epsilon)
                .map_or(Some(0), |last| (last + 1 < ds.len()).then_some(last + 1));
            (first, stable)
        }
        _ => (None, None),
    };
    let rate_violations_after_epsilon = match (theta_val, epsilon_stable_from) {
        (Some(t), Some(k0)) => Some(
            ratios
                .iter()
                .skip(k0)
                .flatten()
                .filter(|&&q| q > 1.0 - t + RATIO_TOL)
                .count(),
        ),
        _ => None,
    };

    Ok(TheoryReport {
        algorithm: trace.algorithm,
        d: instance.d(),
        n,
        m,
        beta,
        coherence,
        mu1_m_minus_1: mu1,
        x_star_l1,
        y_l2,
        iterations: trace.iterations(),
        recovery_ok,
        off_support_selections,
        support_confined: off_support_selections == 0,
        theta: theta_val,
        k_detected,
        bound_line_ok,
        beta_threshold: threshold,
        tau: tau_val,
        theta_first_iter: theta1,
        first_iter_ok,
        first_iter_violations,
        iterate_l1_bound: iterate_bound,
        max_iterate_l1,
        iterate_bound_violations,
        epsilon,
        epsilon_reached_at,
        epsilon_stable_from,
        rate_violations_after_epsilon,
    })
}
