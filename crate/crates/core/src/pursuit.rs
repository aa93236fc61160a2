//! Frank-Wolfe on the l1 ball, Matching Pursuit and Orthogonal Matching
//! Pursuit.
//!
//! All three share [`select_atom`]: the atom most correlated (in absolute
//! value) with the current residual. For Frank-Wolfe on
//! `min 0.5 ||y - Phi x||^2 s.t. ||x||_1 <= beta` the linear minimization
//! over the ball reduces to that same choice, with vertex
//! `s_k = sign(<phi_i, r_k>) beta e_i`.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, Support, RANK_TOL};
use crate::error::{Error, Result};

/// Default stopping tolerance, relative to `||y||_2`.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Residuals below this are numerically zero.
pub const ZERO_RESIDUAL: f64 = 1e-14;

/// `||Phi (s - x)||_2` below this makes the line search undefined.
pub const DEGENERATE_DIRECTION: f64 = 1e-14;

/// Iterations between full recomputations of `Phi x` from the iterate.
pub const REFRESH_INTERVAL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "FW")]
    FrankWolfe,
    #[serde(rename = "MP")]
    MatchingPursuit,
    #[serde(rename = "OMP")]
    OrthogonalMatchingPursuit,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::FrankWolfe => "FW",
            Algorithm::MatchingPursuit => "MP",
            Algorithm::OrthogonalMatchingPursuit => "OMP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// `||r_k||_2` fell to the residual tolerance.
    ResidualTol,
    /// The iteration budget ran out.
    MaxIters,
    /// Exact line search returned `gamma = 0`: the iterate is optimal on the ball.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    /// l1-ball radius.
    pub beta: f64,
    pub max_iters: usize,
    /// Absolute stopping tolerance on `||r_k||_2`; `None` means
    /// `DEFAULT_REL_TOL * ||y||_2`.
    pub residual_tol: Option<f64>,
    /// Record the good-atom ratio at every iteration (needs the true support).
    pub record_rho: bool,
    /// Store the sparse iterate `x_k` in every record.
    pub record_iterates: bool,
}

impl FwConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            max_iters: 1000,
            residual_tol: None,
            record_rho: false,
            record_iterates: true,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        validate_common(self.max_iters, self.residual_tol)
    }
}

/// Configuration shared by MP and OMP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub max_iters: usize,
    pub residual_tol: Option<f64>,
    pub record_rho: bool,
    pub record_iterates: bool,
}

impl GreedyConfig {
    pub fn new(max_iters: usize) -> Self {
        Self {
            max_iters,
            residual_tol: None,
            record_rho: false,
            record_iterates: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(self.max_iters, self.residual_tol)
    }
}

fn validate_common(max_iters: usize, tol: Option<f64>) -> Result<()> {
    if max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
    }
    if let Some(t) = tol {
        if !(t >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "residual_tol must be nonnegative, got {t}"
            )));
        }
    }
    Ok(())
}

/// One executed iteration. Norms are taken before the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub atom: usize,
    /// Sign of `<phi_atom, r_k>`, +1 or -1.
    pub sign: i8,
    /// Step size in [0, 1]. MP and OMP take full steps and record 1.
    pub gamma: f64,
    pub residual_norm: f64,
    pub iterate_l1: f64,
    pub rho: Option<f64>,
    /// Nonzero entries of `x_k`, increasing index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterate: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub algorithm: Algorithm,
    /// Ball radius for Frank-Wolfe traces.
    pub beta: Option<f64>,
    pub records: Vec<IterationRecord>,
    pub final_x: DVector<f64>,
    pub final_residual_norm: f64,
    pub converged: bool,
    pub stop: StopReason,
    /// Absolute residual tolerance in force.
    pub residual_tol: f64,
    /// Whether records carry their iterates.
    pub iterates_recorded: bool,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// `[||r_0||, ..., ||r_K||]`: the recorded norms followed by the final one.
    pub fn residual_norms(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.residual_norm)
            .chain(std::iter::once(self.final_residual_norm))
            .collect()
    }

    /// Sparse `x_k` for `k` in `0..=iterations()`, if iterates were recorded.
    pub fn iterate(&self, k: usize) -> Option<Vec<(usize, f64)>> {
        if k == self.records.len() {
            return Some(nonzeros(&self.final_x));
        }
        if !self.iterates_recorded {
            return None;
        }
        self.records.get(k).map(|r| r.iterate.clone())
    }

    pub fn selected_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.atom)
    }
}

fn nonzeros(x: &DVector<f64>) -> Vec<(usize, f64)> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i, *v))
        .collect()
}

/// Index of the largest `|c_i|`, lowest index on ties.
fn argmax_abs(c: &DVector<f64>) -> (usize, f64) {
    let mut best = 0;
    let mut best_abs = c[0].abs();
    for (i, v) in c.iter().enumerate().skip(1) {
        if v.abs() > best_abs {
            best = i;
            best_abs = v.abs();
        }
    }
    (best, c[best])
}

fn sign_of(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// Atom maximizing `|<phi_i, r>|` and the sign of that inner product.
pub fn select_atom(dict: &Dictionary, residual: &DVector<f64>) -> Result<(usize, i8)> {
    check_len(dict.d(), residual.len())?;
    let norm = residual.norm();
    if !norm.is_finite() {
        return Err(Error::InvalidConfig("residual is not finite".into()));
    }
    if norm < ZERO_RESIDUAL {
        return Err(Error::ZeroResidual { norm });
    }
    let (i, c) = argmax_abs(&dict.correlations(residual));
    Ok((i, sign_of(c)))
}

/// A Frank-Wolfe vertex `value * e_atom` (with `|value| = beta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub atom: usize,
    pub value: f64,
}

/// Exact line-search step for the segment from `x_k` towards `s_k`.
///
/// Minimizing `||r_k - gamma v||^2` with `v = Phi (s_k - x_k)` over the
/// real line gives `gamma* = <v, r_k> / ||v||^2`; the result is clamped
/// into [0, 1].
pub fn fw_step_size(
    dict: &Dictionary,
    x_k: &DVector<f64>,
    s_k: Vertex,
    r_k: &DVector<f64>,
) -> Result<f64> {
    check_len(dict.n(), x_k.len())?;
    check_len(dict.d(), r_k.len())?;
    let phi_x = dict.apply_sparse(nonzeros(x_k));
    let v = direction(dict, &phi_x, s_k);
    step_along(&v, r_k)
}

fn direction(dict: &Dictionary, phi_x: &DVector<f64>, s: Vertex) -> DVector<f64> {
    let mut v = -phi_x;
    v.axpy(s.value, &dict.atom(s.atom), 1.0);
    v
}

fn step_along(v: &DVector<f64>, r: &DVector<f64>) -> Result<f64> {
    let vv = v.norm_squared();
    let norm = vv.sqrt();
    if norm < DEGENERATE_DIRECTION {
        return Err(Error::DegenerateDirection { norm });
    }
    Ok((v.dot(r) / vv).clamp(0.0, 1.0))
}

/// Good-atom ratio `||Phi_off^t r||_inf / ||Phi_S^t r||_inf`.
///
/// Below 1 the next selection is guaranteed to land in `support`.
pub fn rho(dict: &Dictionary, support: &Support, residual: &DVector<f64>) -> Result<f64> {
    check_len(dict.d(), residual.len())?;
    rho_from_correlations(&dict.correlations(residual), support)
}

fn rho_from_correlations(corr: &DVector<f64>, support: &Support) -> Result<f64> {
    let mut on: f64 = 0.0;
    let mut off: f64 = 0.0;
    for (i, c) in corr.iter().enumerate() {
        if support.contains(i) {
            on = on.max(c.abs());
        } else {
            off = off.max(c.abs());
        }
    }
    if on <= ZERO_RESIDUAL {
        return Err(Error::UndefinedRatio { denominator: on });
    }
    Ok(off / on)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn resolve_tol(tol: Option<f64>, y: &DVector<f64>) -> f64 {
    tol.unwrap_or(DEFAULT_REL_TOL * y.norm())
}

/// Frank-Wolfe with exact line search, started at `x_0 = 0`.
///
/// `support` is only used to record the good-atom ratio when
/// `cfg.record_rho` is set.
pub fn fw_solve(
    dict: &Dictionary,
    y: &DVector<f64>,
    cfg: &FwConfig,
    support: Option<&Support>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    check_len(dict.d(), y.len())?;
    let n = dict.n();
    let tol = resolve_tol(cfg.residual_tol, y);

    let mut x = DVector::zeros(n);
    let mut active: BTreeSet<usize> = BTreeSet::new();
    let mut phi_x = DVector::zeros(dict.d());
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;

    for k in 0..cfg.max_iters {
        if k > 0 && k % REFRESH_INTERVAL == 0 {
            phi_x = dict.apply_sparse(active.iter().map(|&i| (i, x[i])));
        }
        let r = y - &phi_x;
        let r_norm = r.norm();
        if r_norm <= tol || r_norm < ZERO_RESIDUAL {
            stop = StopReason::ResidualTol;
            break;
        }
        let corr = dict.correlations(&r);
        let (atom, c) = argmax_abs(&corr);
        let sign = sign_of(c);
        let rho = match (cfg.record_rho, support) {
            (true, Some(s)) => rho_from_correlations(&corr, s).ok(),
            _ => None,
        };
        let vertex = Vertex {
            atom,
            value: f64::from(sign) * cfg.beta,
        };
        let v = direction(dict, &phi_x, vertex);
        // s_k == x_k: the duality gap <r, Phi(s - x)> is zero, so x_k is optimal
        let gamma = step_along(&v, &r).unwrap_or(0.0);
        records.push(IterationRecord {
            k,
            atom,
            sign,
            gamma,
            residual_norm: r_norm,
            iterate_l1: active.iter().fold(0.0, |acc, &i| acc + x[i].abs()),
            rho,
            iterate: if cfg.record_iterates {
                active.iter().map(|&i| (i, x[i])).collect()
            } else {
                Vec::new()
            },
        });
        if gamma == 0.0 {
            stop = StopReason::Stationary;
            break;
        }

        let keep = 1.0 - gamma;
        for &i in &active {
            x[i] *= keep;
        }
        x[atom] += gamma * vertex.value;
        active.insert(atom);
        active.retain(|&i| x[i] != 0.0);
        phi_x *= keep;
        phi_x.axpy(gamma * vertex.value, &dict.atom(atom), 1.0);
    }

    finish(
        Algorithm::FrankWolfe,
        Some(cfg.beta),
        dict,
        y,
        x,
        records,
        stop,
        tol,
        cfg.record_iterates,
    )
}

/// Matching Pursuit: add `<phi_i, r_k>` to coefficient `i`.
pub fn mp_solve(
    dict: &Dictionary,
    y: &DVector<f64>,
    cfg: &GreedyConfig,
    support: Option<&Support>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    check_len(dict.d(), y.len())?;
    let tol = resolve_tol(cfg.residual_tol, y);
    let mut x = DVector::zeros(dict.n());
    let mut r = y.clone();
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;

    for k in 0..cfg.max_iters {
        if k > 0 && k % REFRESH_INTERVAL == 0 {
            r = y - dict.apply_sparse(nonzeros(&x));
        }
        let r_norm = r.norm();
        if r_norm <= tol || r_norm < ZERO_RESIDUAL {
            stop = StopReason::ResidualTol;
            break;
        }
        let corr = dict.correlations(&r);
        let (atom, c) = argmax_abs(&corr);
        records.push(greedy_record(k, atom, c, r_norm, &x, &corr, cfg, support));
        x[atom] += c;
        r.axpy(-c, &dict.atom(atom), 1.0);
    }

    finish(
        Algorithm::MatchingPursuit,
        None,
        dict,
        y,
        x,
        records,
        stop,
        tol,
        cfg.record_iterates,
    )
}

/// Orthogonal Matching Pursuit: refit all selected coefficients by least
/// squares (Householder QR of the selected columns) after each selection.
pub fn omp_solve(
    dict: &Dictionary,
    y: &DVector<f64>,
    cfg: &GreedyConfig,
    support: Option<&Support>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    check_len(dict.d(), y.len())?;
    let tol = resolve_tol(cfg.residual_tol, y);
    let n = dict.n();
    let mut x = DVector::zeros(n);
    let mut r = y.clone();
    let mut selected: Vec<usize> = Vec::new();
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;

    for k in 0..cfg.max_iters {
        let r_norm = r.norm();
        if r_norm <= tol || r_norm < ZERO_RESIDUAL {
            stop = StopReason::ResidualTol;
            break;
        }
        let corr = dict.correlations(&r);
        let (atom, c) = argmax_abs(&corr);
        records.push(greedy_record(k, atom, c, r_norm, &x, &corr, cfg, support));
        if selected.contains(&atom) || selected.len() >= dict.d() {
            return Err(Error::RankDeficientSelection { sigma_min: 0.0 });
        }
        selected.push(atom);

        let sub = dict.atoms().select_columns(&selected);
        let sigma_min = sub.clone().singular_values().min();
        if sigma_min <= RANK_TOL {
            return Err(Error::RankDeficientSelection { sigma_min });
        }
        let qr = sub.clone().qr();
        let qty = qr.q().tr_mul(y);
        let coeffs = qr
            .r()
            .solve_upper_triangular(&qty)
            .ok_or(Error::RankDeficientSelection { sigma_min })?;
        x.fill(0.0);
        for (slot, &i) in selected.iter().enumerate() {
            x[i] = coeffs[slot];
        }
        r = y - sub * coeffs;
    }

    finish(
        Algorithm::OrthogonalMatchingPursuit,
        None,
        dict,
        y,
        x,
        records,
        stop,
        tol,
        cfg.record_iterates,
    )
}

#[allow(clippy::too_many_arguments)]
fn greedy_record(
    k: usize,
    atom: usize,
    c: f64,
    r_norm: f64,
    x: &DVector<f64>,
    corr: &DVector<f64>,
    cfg: &GreedyConfig,
    support: Option<&Support>,
) -> IterationRecord {
    IterationRecord {
        k,
        atom,
        sign: sign_of(c),
        gamma: 1.0,
        residual_norm: r_norm,
        iterate_l1: x.lp_norm(1),
        rho: match (cfg.record_rho, support) {
            (true, Some(s)) => rho_from_correlations(corr, s).ok(),
            _ => None,
        },
        iterate: if cfg.record_iterates {
            nonzeros(x)
        } else {
            Vec::new()
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    algorithm: Algorithm,
    beta: Option<f64>,
    dict: &Dictionary,
    y: &DVector<f64>,
    final_x: DVector<f64>,
    records: Vec<IterationRecord>,
    stop: StopReason,
    tol: f64,
    iterates_recorded: bool,
) -> Result<SolverTrace> {
    let final_residual_norm = (y - dict.apply_sparse(nonzeros(&final_x))).norm();
    let converged = stop != StopReason::MaxIters || final_residual_norm <= tol;
    Ok(SolverTrace {
        algorithm,
        beta,
        records,
        final_x,
        final_residual_norm,
        converged,
        stop,
        residual_tol: tol,
        iterates_recorded,
    })
}

/// Runs `algorithm` with a shared budget; `beta` is only used by Frank-Wolfe.
pub fn solve(
    algorithm: Algorithm,
    dict: &Dictionary,
    y: &DVector<f64>,
    beta: f64,
    max_iters: usize,
    support: Option<&Support>,
) -> Result<SolverTrace> {
    match algorithm {
        Algorithm::FrankWolfe => {
            let mut cfg = FwConfig::new(beta).with_max_iters(max_iters);
            cfg.record_rho = support.is_some();
            fw_solve(dict, y, &cfg, support)
        }
        Algorithm::MatchingPursuit => {
            let mut cfg = GreedyConfig::new(max_iters);
            cfg.record_rho = support.is_some();
            mp_solve(dict, y, &cfg, support)
        }
        Algorithm::OrthogonalMatchingPursuit => {
            let mut cfg = GreedyConfig::new(max_iters);
            cfg.record_rho = support.is_some();
            omp_solve(dict, y, &cfg, support)
        }
    }
}
