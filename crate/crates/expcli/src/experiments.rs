//! The three convergence experiments, the recovery audit and dictionary analysis.
//!
//! All logarithms are natural. Trials are independent: trial `t` uses
//! dictionary seed `derive_seed(base, TAG_DICT, t)` and signal seed
//! `derive_seed(base, tag, t)` with a per-experiment tag, so results do
//! not depend on the worker count. Solvers use their default stopping
//! rule; a trial that stops early keeps its final residual for the
//! remaining iterations of the aggregate curves.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fwsparse::dictionary::{Dictionary, DictionaryMetrics};
use fwsparse::io::{load_dictionary, load_dictionary_csv};
use fwsparse::pursuit::{fw_solve, mp_solve, omp_solve, FwConfig, GreedyConfig, SolverTrace};
use fwsparse::rng::derive_seed;
use fwsparse::synth::{gen_dictionary, gen_instance, SparseInstance, SynthConfig};
use fwsparse::theory::theta;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DictKind, ExperimentConfig, MRule};
use crate::curves::{
    bound_line, fitted_slope, max_curve, mean_curve, pointwise_max, pointwise_mean, span,
    AggregateCurve, LogCurve, FLOOR_REL,
};
use crate::plot::{LinePlot, Series, Stroke};
use crate::{ExpError, Result};

pub const TAG_DICT: u64 = 0;
pub const TAG_SIGNAL: u64 = 1;
/// exp2 multiplier `j` uses tag `TAG_SWEEP + j`.
pub const TAG_SWEEP: u64 = 100;

/// Babel values tabulated per trial dictionary.
pub const BABEL_DEPTH: usize = 256;

/// OMP is judged converged below this residual, relative to `||y||`.
pub const OMP_EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DictInfo {
    pub trial: usize,
    pub dict_seed: u64,
    pub coherence: Option<f64>,
    pub m_star: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skip {
    pub multiplier: f64,
    pub reason: String,
}

/// Written next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub dictionaries: Vec<DictInfo>,
    pub log_floor_rel: f64,
    /// Number of `ln ||r_k||` values raised to the floor.
    pub clipped_values: usize,
    pub skipped: Vec<Skip>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub summary: serde_json::Value,
}

impl Metadata {
    fn new(experiment: &str, cfg: &ExperimentConfig, dictionaries: Vec<DictInfo>) -> Self {
        Self {
            experiment: experiment.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            dictionaries,
            log_floor_rel: FLOOR_REL,
            clipped_values: 0,
            skipped: Vec::new(),
            warnings: Vec::new(),
            notes: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub metadata: PathBuf,
}

struct Setup {
    dict: Dictionary,
    metrics: DictionaryMetrics,
    info: DictInfo,
}

fn make_setup(cfg: &ExperimentConfig, trial: usize) -> Result<Setup> {
    let dict_seed = derive_seed(cfg.base_seed, TAG_DICT, trial as u64);
    let dict = match cfg.dictionary {
        DictKind::Gaussian => gen_dictionary(&SynthConfig {
            d: cfg.d,
            n: cfg.n,
            m: 0,
            dict_seed,
            signal_seed: 0,
        })?,
        DictKind::Orthonormal => Dictionary::identity(cfg.d)?,
    };
    let metrics = DictionaryMetrics::with_babel_depth(&dict, (dict.n() - 1).min(BABEL_DEPTH))?;
    let info = DictInfo {
        trial,
        dict_seed,
        coherence: metrics.coherence().ok(),
        m_star: metrics.m_star(),
    };
    Ok(Setup {
        dict,
        metrics,
        info,
    })
}

fn make_instance(
    cfg: &ExperimentConfig,
    setup: &Setup,
    m: usize,
    tag: u64,
    trial: usize,
) -> Result<SparseInstance> {
    let sc = SynthConfig {
        d: cfg.d,
        n: cfg.n,
        m,
        dict_seed: setup.info.dict_seed,
        signal_seed: derive_seed(cfg.base_seed, tag, trial as u64),
    };
    Ok(gen_instance(&setup.dict, &sc)?)
}

fn run_trials<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| ExpError::Config(format!("worker pool: {e}")))?;
    pool.install(|| (0..cfg.trials).into_par_iter().map(&f).collect())
}

fn fw(setup: &Setup, inst: &SparseInstance, beta: f64, max_iters: usize) -> Result<SolverTrace> {
    let mut c = FwConfig::new(beta).with_max_iters(max_iters);
    c.record_iterates = false;
    Ok(fw_solve(&setup.dict, &inst.signal, &c, None)?)
}

/// Contraction constant for the instance, when its hypotheses hold.
fn instance_theta(setup: &Setup, inst: &SparseInstance, beta: f64) -> Option<f64> {
    let m = inst.m();
    if m == 0 || !setup.metrics.recovery_condition(m) {
        return None;
    }
    let mu1 = setup.metrics.babel_at(m - 1).ok()?;
    theta(mu1, m, inst.l1_coeff_norm, beta)
        .ok()
        .filter(|t| *t > 0.0)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn fmt_mult(c: f64) -> String {
    format!("{c}")
}

/// Writes `comment`, a header row and one row per `k`.
fn write_csv(path: &Path, comment: &str, headers: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# {comment}")?;
    let mut w = csv::Writer::from_writer(f);
    let err = |e: csv::Error| ExpError::Io(std::io::Error::other(e));
    let mut head = vec!["k".to_string()];
    head.extend(headers.iter().cloned());
    w.write_record(&head).map_err(err)?;
    let len = columns.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..len {
        let mut row = vec![k.to_string()];
        for c in columns {
            row.push(c.get(k).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| ExpError::Io(e.into()))?;
    writeln!(f)?;
    Ok(())
}

fn write_svg(path: &Path, plot: &LinePlot) -> Result<()> {
    fs::write(path, plot.render())?;
    Ok(())
}

// ---- exp1 ----

pub struct Exp1Output {
    pub curve: AggregateCurve,
    pub metadata: Metadata,
    pub artifacts: Artifacts,
}

struct CurveTrial {
    curve: LogCurve,
    y_l2: f64,
    theta: Option<f64>,
}

impl CurveTrial {
    fn run(setup: &Setup, inst: &SparseInstance, beta: f64, max_iters: usize) -> Result<Self> {
        let trace = fw(setup, inst, beta, max_iters)?;
        Ok(Self {
            curve: LogCurve::from_norms(&trace.residual_norms(), inst.l2_signal_norm),
            y_l2: inst.l2_signal_norm,
            theta: instance_theta(setup, inst, beta),
        })
    }

    fn line(&self, len: usize) -> Option<Vec<f64>> {
        self.theta.map(|th| bound_line(self.y_l2, th, len))
    }
}

fn logs<'a>(trials: impl Iterator<Item = &'a CurveTrial>) -> Vec<LogCurve> {
    trials.map(|t| t.curve.clone()).collect()
}

/// Mean and maximum `ln ||r_k||` over `trials` Frank-Wolfe runs, against
/// the bound `ln ||y|| + (k/2) ln(1 - theta)`.
///
/// Each trial has its own `theta`, so there is one bound line per trial.
/// The plotted bound is their pointwise maximum; trials whose sparsity
/// breaks the recovery condition contribute no line.
pub fn exp1_convergence(cfg: &ExperimentConfig) -> Result<Exp1Output> {
    cfg.validate()?;
    let results = run_trials(cfg, |t| {
        let setup = make_setup(cfg, t)?;
        let m = cfg.m_rule.resolve(setup.info.m_star);
        let inst = make_instance(cfg, &setup, m, TAG_SIGNAL, t)?;
        let beta = cfg.beta_rule.resolve(inst.l1_coeff_norm);
        Ok((
            setup.info.clone(),
            CurveTrial::run(&setup, &inst, beta, cfg.max_iters)?,
        ))
    })?;

    let curves = logs(results.iter().map(|r| &r.1));
    let len = span(&curves);
    let lines: Vec<Vec<f64>> = results.iter().filter_map(|r| r.1.line(len)).collect();
    let bound = if lines.is_empty() {
        vec![f64::NAN; len]
    } else {
        pointwise_max(&lines)
    };
    let curve = AggregateCurve {
        mean: mean_curve(&curves, len),
        max: max_curve(&curves, len),
        bound,
    };

    let mut meta = Metadata::new("exp1", cfg, results.iter().map(|r| r.0.clone()).collect());
    meta.clipped_values = curves.iter().map(|c| c.clipped).sum();
    meta.notes.push(
        "bound_log_r is the pointwise maximum over trials of ln||y|| + (k/2) ln(1 - theta)".into(),
    );
    if lines.len() < results.len() {
        meta.warnings.push(format!(
            "{} of {} trials violate the recovery condition and have no bound line",
            results.len() - lines.len(),
            results.len()
        ));
    }
    let margin = (1..len)
        .map(|k| curve.max[k] - curve.bound[k])
        .fold(f64::NEG_INFINITY, f64::max);
    meta.summary = serde_json::json!({
        "iterations": len.saturating_sub(1),
        "trials_with_bound": lines.len(),
        "max_minus_bound_after_k0": margin.is_finite().then_some(margin),
        "thetas": results.iter().map(|r| r.1.theta).collect::<Vec<_>>(),
    });

    ensure_dir(&cfg.out_dir)?;
    let artifacts = Artifacts {
        csv: cfg.out_dir.join("curves.csv"),
        svg: cfg.out_dir.join("fig1.svg"),
        metadata: cfg.out_dir.join("exp1_metadata.json"),
    };
    write_csv(
        &artifacts.csv,
        "fwsparse exp1 curves v1 (natural log; bound = pointwise max of per-trial bound lines)",
        &[
            "mean_log_r".into(),
            "max_log_r".into(),
            "bound_log_r".into(),
        ],
        &[curve.mean.clone(), curve.max.clone(), curve.bound.clone()],
    )?;
    write_svg(
        &artifacts.svg,
        &LinePlot {
            title: format!(
                "Frank-Wolfe residuals, {} trials, d={}, n={}",
                cfg.trials, cfg.d, cfg.n
            ),
            x_label: "iteration k".into(),
            y_label: "ln ||r_k||".into(),
            series: vec![
                series("mean", &curve.mean, Stroke::Solid, 0),
                series("max", &curve.max, Stroke::Solid, 1),
                series("bound", &curve.bound, Stroke::Dashed, 2),
            ],
        },
    )?;
    write_json(&artifacts.metadata, &meta)?;
    Ok(Exp1Output {
        curve,
        metadata: meta,
        artifacts,
    })
}

fn series(label: &str, values: &[f64], stroke: Stroke, color: usize) -> Series {
    Series {
        label: label.into(),
        values: values.to_vec(),
        stroke,
        color,
    }
}

// ---- exp2 ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCurve {
    pub multiplier: f64,
    pub max: Vec<f64>,
    /// Present only when `m <= m*` for every trial.
    pub bound: Option<Vec<f64>>,
    /// Least-squares slope of `max` over the second half of its own span.
    pub late_slope: Option<f64>,
}

pub struct Exp2Output {
    pub curves: Vec<SweepCurve>,
    pub metadata: Metadata,
    pub artifacts: Artifacts,
}

/// Maximum `ln ||r_k||` for `m = c m*` over each multiplier `c`.
///
/// Every multiplier reuses the trial's dictionary with a fresh signal. A
/// multiplier is skipped, with a warning in the metadata, when `c m*`
/// exceeds `n` for any trial.
pub fn exp2_sparsity_sweep(cfg: &ExperimentConfig) -> Result<Exp2Output> {
    cfg.validate()?;
    if cfg.m_multipliers.is_empty() {
        return Err(ExpError::Config(
            "exp2 needs at least one m multiplier".into(),
        ));
    }
    let results = run_trials(cfg, |t| {
        let setup = make_setup(cfg, t)?;
        let mut per = Vec::with_capacity(cfg.m_multipliers.len());
        for (j, &c) in cfg.m_multipliers.iter().enumerate() {
            let m = MRule::Multiple(c).resolve(setup.info.m_star);
            if m > cfg.n {
                per.push(None);
                continue;
            }
            let inst = make_instance(cfg, &setup, m, TAG_SWEEP + j as u64, t)?;
            let beta = cfg.beta_rule.resolve(inst.l1_coeff_norm);
            per.push(Some(CurveTrial::run(&setup, &inst, beta, cfg.max_iters)?));
        }
        Ok((setup.info, per))
    })?;

    let mut meta = Metadata::new("exp2", cfg, results.iter().map(|r| r.0.clone()).collect());
    let mut kept: Vec<(f64, Vec<&CurveTrial>)> = Vec::new();
    for (j, &c) in cfg.m_multipliers.iter().enumerate() {
        match results
            .iter()
            .map(|r| r.1[j].as_ref())
            .collect::<Option<Vec<_>>>()
        {
            Some(ts) => kept.push((c, ts)),
            None => {
                let reason = format!("m = {c} m* exceeds n = {} for some trial", cfg.n);
                meta.warnings.push(format!("{reason}; skipped"));
                meta.skipped.push(Skip {
                    multiplier: c,
                    reason,
                });
            }
        }
    }
    let len = kept
        .iter()
        .map(|(_, ts)| ts.iter().map(|t| t.curve.values.len()).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    let mut curves = Vec::new();
    for (c, ts) in &kept {
        let l = logs(ts.iter().copied());
        meta.clipped_values += l.iter().map(|x| x.clipped).sum::<usize>();
        let own = span(&l);
        let max = max_curve(&l, len);
        let late_slope = fitted_slope(&max, own / 2..own);
        let in_regime = results
            .iter()
            .all(|r| MRule::Multiple(*c).resolve(r.0.m_star) <= r.0.m_star);
        let lines: Option<Vec<Vec<f64>>> = ts.iter().map(|t| t.line(len)).collect();
        let bound = lines.filter(|_| in_regime).map(|ls| pointwise_max(&ls));
        curves.push(SweepCurve {
            multiplier: *c,
            max,
            bound,
            late_slope,
        });
    }
    meta.notes.push(
        "max_log_r_m<c> is the pointwise maximum over trials for m = c m*; bounds only where m <= m*"
            .into(),
    );
    meta.summary = serde_json::json!({
        "iterations": len.saturating_sub(1),
        "late_slopes": curves
            .iter()
            .map(|c| (fmt_mult(c.multiplier), c.late_slope))
            .collect::<BTreeMap<_, _>>(),
    });

    ensure_dir(&cfg.out_dir)?;
    let artifacts = Artifacts {
        csv: cfg.out_dir.join("exp2_curves.csv"),
        svg: cfg.out_dir.join("fig2.svg"),
        metadata: cfg.out_dir.join("exp2_metadata.json"),
    };
    let mut headers = Vec::new();
    let mut columns = Vec::new();
    let mut plot = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        headers.push(format!("max_log_r_m{}", fmt_mult(c.multiplier)));
        columns.push(c.max.clone());
        plot.push(series(
            &format!("m = {} m*", fmt_mult(c.multiplier)),
            &c.max,
            Stroke::Solid,
            i,
        ));
    }
    for (i, c) in curves.iter().enumerate() {
        if let Some(b) = &c.bound {
            headers.push(format!("bound_log_r_m{}", fmt_mult(c.multiplier)));
            columns.push(b.clone());
            plot.push(series(
                &format!("bound, m = {} m*", fmt_mult(c.multiplier)),
                b,
                Stroke::Dashed,
                i,
            ));
        }
    }
    write_csv(
        &artifacts.csv,
        "fwsparse exp2 sparsity sweep v1 (natural log; max over trials per multiple of m*)",
        &headers,
        &columns,
    )?;
    write_svg(
        &artifacts.svg,
        &LinePlot {
            title: format!("Maximum residual by sparsity, d={}, n={}", cfg.d, cfg.n),
            x_label: "iteration k".into(),
            y_label: "max ln ||r_k||".into(),
            series: plot,
        },
    )?;
    write_json(&artifacts.metadata, &meta)?;
    Ok(Exp2Output {
        curves,
        metadata: meta,
        artifacts,
    })
}

// ---- exp3 ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaCurve {
    pub beta_mult: f64,
    pub mean: Vec<f64>,
    /// Log-domain mean of the per-trial bound lines.
    pub bound: Vec<f64>,
    /// Least-squares slope of `mean` over its own span.
    pub slope: Option<f64>,
    pub bound_slope: Option<f64>,
}

pub struct Exp3Output {
    pub low: BetaCurve,
    pub high: BetaCurve,
    pub metadata: Metadata,
    pub artifacts: Artifacts,
}

/// Mean `ln ||r_k||` for `beta = beta_low_mult ||x*||_1` and for the
/// configured radius rule, on the same instances.
pub fn exp3_beta_effect(cfg: &ExperimentConfig) -> Result<Exp3Output> {
    cfg.validate()?;
    let results = run_trials(cfg, |t| {
        let setup = make_setup(cfg, t)?;
        let m = cfg.m_rule.resolve(setup.info.m_star);
        let inst = make_instance(cfg, &setup, m, TAG_SIGNAL, t)?;
        let b1 = cfg.beta_low_mult * inst.l1_coeff_norm;
        let b2 = cfg.beta_rule.resolve(inst.l1_coeff_norm);
        let low = CurveTrial::run(&setup, &inst, b1, cfg.max_iters)?;
        let high = CurveTrial::run(&setup, &inst, b2, cfg.max_iters)?;
        Ok((setup.info.clone(), low, high))
    })?;

    let low_logs = logs(results.iter().map(|r| &r.1));
    let high_logs = logs(results.iter().map(|r| &r.2));
    let len = span(&low_logs).max(span(&high_logs));
    let mut meta = Metadata::new("exp3", cfg, results.iter().map(|r| r.0.clone()).collect());
    meta.clipped_values = low_logs.iter().chain(&high_logs).map(|c| c.clipped).sum();

    let mut build = |which: &[LogCurve], trials: Vec<&CurveTrial>, beta_mult: f64, name: &str| {
        let own = span(which);
        let mean = mean_curve(which, len);
        let slope = fitted_slope(&mean, 0..own);
        let lines: Vec<Vec<f64>> = trials.iter().filter_map(|t| t.line(len)).collect();
        if lines.len() < trials.len() {
            meta.warnings.push(format!(
                "{name}: {} trials have no bound line",
                trials.len() - lines.len()
            ));
        }
        let bound = if lines.is_empty() {
            vec![f64::NAN; len]
        } else {
            pointwise_mean(&lines)
        };
        let bound_slope = fitted_slope(&bound, 0..own).filter(|s| s.is_finite());
        BetaCurve {
            beta_mult,
            mean,
            bound,
            slope,
            bound_slope,
        }
    };
    let high_mult = match cfg.beta_rule {
        crate::config::BetaRule::Multiplier(c) => c,
        crate::config::BetaRule::Absolute(_) => f64::NAN,
    };
    let low = build(
        &low_logs,
        results.iter().map(|r| &r.1).collect(),
        cfg.beta_low_mult,
        "beta1",
    );
    let high = build(
        &high_logs,
        results.iter().map(|r| &r.2).collect(),
        high_mult,
        "beta2",
    );
    meta.notes.push(
        "bound_log_r_b* is the mean over trials of ln||y|| + (k/2) ln(1 - theta); slopes are least-squares fits over each curve's span"
            .into(),
    );
    meta.summary = serde_json::json!({
        "iterations": len.saturating_sub(1),
        "slope_beta1": low.slope,
        "slope_beta2": high.slope,
        "bound_slope_beta1": low.bound_slope,
        "bound_slope_beta2": high.bound_slope,
    });

    ensure_dir(&cfg.out_dir)?;
    let artifacts = Artifacts {
        csv: cfg.out_dir.join("exp3_curves.csv"),
        svg: cfg.out_dir.join("fig3.svg"),
        metadata: cfg.out_dir.join("exp3_metadata.json"),
    };
    write_csv(
        &artifacts.csv,
        "fwsparse exp3 radius effect v1 (natural log; mean over trials)",
        &[
            "mean_log_r_b1".into(),
            "mean_log_r_b2".into(),
            "bound_log_r_b1".into(),
            "bound_log_r_b2".into(),
        ],
        &[
            low.mean.clone(),
            high.mean.clone(),
            low.bound.clone(),
            high.bound.clone(),
        ],
    )?;
    write_svg(
        &artifacts.svg,
        &LinePlot {
            title: format!("Effect of the radius, d={}, n={}", cfg.d, cfg.n),
            x_label: "iteration k".into(),
            y_label: "mean ln ||r_k||".into(),
            series: vec![
                series(
                    &format!("beta = {} ||x*||", fmt_mult(low.beta_mult)),
                    &low.mean,
                    Stroke::Solid,
                    0,
                ),
                series(
                    &format!("beta = {} ||x*||", fmt_mult(high.beta_mult)),
                    &high.mean,
                    Stroke::Solid,
                    1,
                ),
                series("bound, beta1", &low.bound, Stroke::Dashed, 0),
                series("bound, beta2", &high.bound, Stroke::Dashed, 1),
            ],
        },
    )?;
    write_json(&artifacts.metadata, &meta)?;
    Ok(Exp3Output {
        low,
        high,
        metadata: meta,
        artifacts,
    })
}

// ---- audit ----

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverAudit {
    pub off_support_selections: usize,
    pub trials_with_off_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSummary {
    pub trials: usize,
    pub m_rule: MRule,
    /// Trials whose sparsity satisfies `m <= m*`.
    pub trials_in_regime: usize,
    pub fw: SolverAudit,
    pub mp: SolverAudit,
    pub omp: SolverAudit,
    /// OMP iteration count -> number of trials.
    pub omp_iterations: BTreeMap<usize, usize>,
    pub omp_exact_in_m: usize,
    pub omp_errors: usize,
    pub dictionaries: Vec<DictInfo>,
    /// Failures on trials in the recovery regime.
    pub violations: Vec<String>,
}

impl AuditSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct AuditTrial {
    info: DictInfo,
    m: usize,
    off: [usize; 3],
    omp: std::result::Result<(usize, bool), String>,
}

/// Runs FW, MP and OMP on every trial and counts selections outside the
/// true support. Writes `audit.json` to the output directory.
///
/// Violations are only recorded for trials with `m <= m*`; larger
/// sparsities are reported without failing.
pub fn run_recovery_audit(cfg: &ExperimentConfig) -> Result<AuditSummary> {
    cfg.validate()?;
    let results = run_trials(cfg, |t| {
        let setup = make_setup(cfg, t)?;
        let m = cfg.m_rule.resolve(setup.info.m_star).min(cfg.n);
        let inst = make_instance(cfg, &setup, m, TAG_SIGNAL, t)?;
        let beta = cfg.beta_rule.resolve(inst.l1_coeff_norm);
        let y = &inst.signal;
        let off = |tr: &SolverTrace| {
            tr.selected_atoms()
                .filter(|&i| !inst.support.contains(i))
                .count()
        };
        let fw_tr = fw(&setup, &inst, beta, cfg.max_iters)?;
        let mp_tr = mp_solve(&setup.dict, y, &GreedyConfig::new(cfg.max_iters), None)?;
        let omp_cfg = GreedyConfig::new(cfg.max_iters.max(m).min(cfg.d));
        let (omp_off, omp) = match omp_solve(&setup.dict, y, &omp_cfg, None) {
            Ok(tr) => {
                let exact = tr.iterations() == m
                    && tr.final_residual_norm <= OMP_EXACT_TOL * inst.l2_signal_norm;
                (off(&tr), Ok((tr.iterations(), exact)))
            }
            Err(e) => (0, Err(e.to_string())),
        };
        Ok(AuditTrial {
            info: setup.info,
            m,
            off: [off(&fw_tr), off(&mp_tr), omp_off],
            omp,
        })
    })?;

    let mut s = AuditSummary {
        trials: results.len(),
        m_rule: cfg.m_rule,
        trials_in_regime: 0,
        fw: SolverAudit::default(),
        mp: SolverAudit::default(),
        omp: SolverAudit::default(),
        omp_iterations: BTreeMap::new(),
        omp_exact_in_m: 0,
        omp_errors: 0,
        dictionaries: Vec::with_capacity(results.len()),
        violations: Vec::new(),
    };
    for r in &results {
        let in_regime = r.m <= r.info.m_star;
        s.trials_in_regime += usize::from(in_regime);
        for (name, count, agg) in [
            ("FW", r.off[0], &mut s.fw),
            ("MP", r.off[1], &mut s.mp),
            ("OMP", r.off[2], &mut s.omp),
        ] {
            agg.off_support_selections += count;
            agg.trials_with_off_support += usize::from(count > 0);
            if in_regime && count > 0 {
                s.violations.push(format!(
                    "trial {}: {name} selected {count} atoms off the support (m = {}, m* = {})",
                    r.info.trial, r.m, r.info.m_star
                ));
            }
        }
        match &r.omp {
            Ok((iters, exact)) => {
                *s.omp_iterations.entry(*iters).or_default() += 1;
                s.omp_exact_in_m += usize::from(*exact);
                if in_regime && !exact {
                    s.violations.push(format!(
                        "trial {}: OMP took {iters} iterations for m = {} without exact recovery",
                        r.info.trial, r.m
                    ));
                }
            }
            Err(e) => {
                s.omp_errors += 1;
                if in_regime {
                    s.violations
                        .push(format!("trial {}: OMP failed: {e}", r.info.trial));
                }
            }
        }
        s.dictionaries.push(r.info.clone());
    }
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("audit.json"), &s)?;
    Ok(s)
}

// ---- analyze ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub d: usize,
    pub n: usize,
    pub coherence: Option<f64>,
    pub m_star: usize,
    /// `mu1(0..=min(m* + 1, n - 1))`.
    pub babel: Vec<f64>,
    /// `sqrt(1 - mu1(m* - 1))`.
    pub lambda_min_lower_bound: Option<f64>,
}

/// Metrics of a dictionary file: the binary format, or `.csv` with one
/// atom per column.
pub fn analyze(path: &Path, normalize: bool) -> Result<AnalyzeReport> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let dict = if is_csv {
        load_dictionary_csv(path, normalize)?
    } else {
        load_dictionary(path, normalize)?
    };
    let first = DictionaryMetrics::with_babel_depth(&dict, 0)?;
    let depth = (first.m_star() + 1).min(dict.n() - 1);
    let metrics = DictionaryMetrics::with_babel_depth(&dict, depth)?;
    let m_star = metrics.m_star();
    Ok(AnalyzeReport {
        d: dict.d(),
        n: dict.n(),
        coherence: metrics.coherence().ok(),
        m_star,
        babel: metrics.babel(depth)?.to_vec(),
        lambda_min_lower_bound: metrics.lambda_min_lower_bound(m_star.max(1)).ok(),
    })
}
