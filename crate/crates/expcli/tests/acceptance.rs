//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! to stderr; the test fails if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::time::Instant;

use common::{babel_exhaustive, golden_gamma, half_sq_residual, pgd_solve, trial, Trial};
use fwsparse::dictionary::DictionaryMetrics;
use fwsparse::pursuit::{
    fw_solve, fw_step_size, omp_solve, FwConfig, GreedyConfig, SolverTrace, StopReason, Vertex,
};
use fwsparse::rng::{derive_seed, CounterRng};
use fwsparse::synth::{gen_dictionary, SynthConfig};
use fwsparse::theory::{
    beta_threshold, first_iter_rate, iterate_l1_bound, tau, validate_trace, FLOOR_REL, RATIO_TOL,
};
use fwsparse::Dictionary;
use fwsparse_expcli::{exp1_convergence, exp3_beta_effect, ExperimentConfig};
use nalgebra::DVector;

const BASE: u64 = 0x5EED_2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dense(n: usize, entries: &[(usize, f64)]) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for &(i, v) in entries {
        x[i] = v;
    }
    x
}

/// The 100 shared instances of criteria 1, 2, 5 and 6.
fn recovery_trials() -> Vec<Trial> {
    (0..100).map(|i| trial(200, 400, None, BASE, i)).collect()
}

fn fw_run(t: &Trial, beta: f64, max_iters: usize) -> SolverTrace {
    fw_solve(
        &t.dict,
        &t.inst.signal,
        &FwConfig::new(beta).with_max_iters(max_iters),
        None,
    )
    .unwrap()
}

/// Squared ratios `||r_{k+1}||^2 / ||r_k||^2` whose denominator is above the floor.
fn ratios(tr: &SolverTrace, y_l2: f64) -> Vec<(usize, f64)> {
    tr.residual_norms()
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > FLOOR_REL * y_l2)
        .map(|(k, w)| (k, (w[1] / w[0]).powi(2)))
        .collect()
}

fn c1_support(trials: &[Trial], traces: &[SolverTrace], secs: f64) -> Outcome {
    let mut off = 0usize;
    let mut iters = 0usize;
    for (t, tr) in trials.iter().zip(traces) {
        iters += tr.iterations();
        off += tr
            .selected_atoms()
            .filter(|&a| !t.inst.support.contains(a))
            .count();
    }
    outcome(
        off == 0 && secs < 30.0,
        format!("{off} off-support selections in {iters} iterations, 100 trials, {secs:.1} s"),
    )
}

fn c2_rate_beyond_k(trials: &[Trial], traces: &[SolverTrace]) -> Outcome {
    let mut missing_k = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (t, tr) in trials.iter().zip(traces) {
        let beta = 8.0 * t.inst.l1_coeff_norm;
        let rep = validate_trace(tr, &t.inst, &t.metrics, beta).unwrap();
        let (Some(k0), Some(theta)) = (rep.k_detected, rep.theta) else {
            missing_k += 1;
            continue;
        };
        for (k, q) in ratios(tr, t.inst.l2_signal_norm) {
            if k >= k0 {
                worst = worst.max(q - (1.0 - theta));
                if q > 1.0 - theta + RATIO_TOL {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        missing_k == 0 && violations == 0,
        format!(
            "{missing_k} trials without K, {violations} ratio violations, max excess {worst:.3e}"
        ),
    )
}

fn c3_first_iter(trials: &[Trial]) -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for t in trials {
        let m = t.inst.m();
        let mu1 = t.metrics.babel_at(m - 1).unwrap();
        let y = t.inst.l2_signal_norm;
        let beta = 1.01 * beta_threshold(y, m, mu1).unwrap();
        let theta1 = first_iter_rate(mu1, m, tau(y, beta, m, mu1).unwrap()).unwrap();
        let mut cfg = FwConfig::new(beta).with_max_iters(1000);
        cfg.record_iterates = false;
        let tr = fw_solve(&t.dict, &t.inst.signal, &cfg, None).unwrap();
        for (_, q) in ratios(&tr, y) {
            checked += 1;
            if q > 1.0 - theta1 + RATIO_TOL {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0 && checked > 0,
        format!("{violations} violations in {checked} ratios from k = 0, beta = 1.01 threshold"),
    )
}

fn c4_line_search() -> Outcome {
    let mut states = 0;
    let mut worst = 0.0f64;
    let mut i = 0;
    while states < 1000 {
        let t = trial(8, 16, Some(2), BASE ^ 4, i);
        i += 1;
        let beta = 4.0 * t.inst.l1_coeff_norm;
        let tr = fw_run(&t, beta, 60);
        for (k, rec) in tr.records.iter().enumerate() {
            if states == 1000 {
                break;
            }
            let x = dense(16, &tr.iterate(k).unwrap());
            let r = &t.inst.signal - t.dict.apply(&x);
            let s = Vertex {
                atom: rec.atom,
                value: f64::from(rec.sign) * beta,
            };
            let closed = fw_step_size(&t.dict, &x, s, &r).unwrap();
            let oracle = golden_gamma(&t.dict, &t.inst.signal, &x, s);
            worst = worst.max((closed - oracle).abs());
            states += 1;
        }
    }
    outcome(
        worst <= 1e-10,
        format!("{states} states from {i} runs, max |gamma - golden| = {worst:.3e}"),
    )
}

fn c5_iterate_bound(trials: &[Trial], traces: &[SolverTrace]) -> Outcome {
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for (t, tr) in trials.iter().zip(traces) {
        let m = t.inst.m();
        let mu1 = t.metrics.babel_at(m - 1).unwrap();
        let bound = iterate_l1_bound(t.inst.l2_signal_norm, m, mu1).unwrap();
        for k in 0..=tr.iterations() {
            let l1: f64 = tr.iterate(k).unwrap().iter().map(|(_, v)| v.abs()).sum();
            worst_ratio = worst_ratio.max(l1 / bound);
            if l1 > bound {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations, max ||x_k||_1 / bound = {worst_ratio:.4}"),
    )
}

fn c6_omp(trials: &[Trial]) -> Outcome {
    let exact = trials
        .iter()
        .filter(|t| {
            let tr = omp_solve(&t.dict, &t.inst.signal, &GreedyConfig::new(200), None).unwrap();
            tr.iterations() == t.inst.m() && tr.final_residual_norm <= 1e-10 * t.inst.l2_signal_norm
        })
        .count();
    outcome(
        exact == trials.len(),
        format!("{exact}/{} exact in m iterations", trials.len()),
    )
}

fn c7_babel() -> Outcome {
    let mut mismatches = 0;
    let mut compared = 0;
    let mut coherence_bits = true;
    let mut rng = CounterRng::new(BASE ^ 7);
    for i in 0..20 {
        let n = 4 + rng.next_below(9);
        let d = 2 + rng.next_below(n - 1);
        let dict = gen_dictionary(&SynthConfig {
            d,
            n,
            m: 0,
            dict_seed: derive_seed(BASE, 7, i),
            signal_seed: 0,
        })
        .unwrap();
        let metrics = DictionaryMetrics::new(&dict);
        let babel = metrics.babel(n - 1).unwrap();
        for m in 1..n {
            compared += 1;
            if babel[m].to_bits() != babel_exhaustive(metrics.gram(), m).to_bits() {
                mismatches += 1;
            }
        }
        coherence_bits &= babel[1].to_bits() == metrics.coherence().unwrap().to_bits();
    }
    outcome(
        mismatches == 0 && coherence_bits,
        format!("{mismatches}/{compared} babel mismatches, babel[1] == coherence bitwise: {coherence_bits}"),
    )
}

fn c8_pgd() -> Outcome {
    let mut worst = 0.0f64;
    let mut stalled = 0;
    for i in 0..25 {
        let t = trial(8, 16, Some(2), BASE ^ 8, i);
        let beta = 4.0 * t.inst.l1_coeff_norm;
        let mut cfg = FwConfig::new(beta).with_max_iters(1000);
        cfg.record_iterates = false;
        let tr = fw_solve(&t.dict, &t.inst.signal, &cfg, None).unwrap();
        let (x_pg, gap) = pgd_solve(&t.dict, &t.inst.signal, beta, 1e-10, 2_000_000);
        if gap > 1e-10 {
            stalled += 1;
        }
        let f_fw = half_sq_residual(&t.dict, &t.inst.signal, &tr.final_x);
        let f_pg = half_sq_residual(&t.dict, &t.inst.signal, &x_pg);
        worst = worst.max((f_fw - f_pg).abs());
    }
    outcome(
        worst <= 1e-8 && stalled == 0,
        format!("max |f_fw - f_pg| = {worst:.3e} over 25 instances, {stalled} oracle runs short of 1e-10"),
    )
}

/// One FW step on an orthonormal basis reaches `c e_i` to 1e-14. The
/// residual is `c - (c/beta) beta`, which is exactly zero whenever that
/// product rounds back to `c` (always for dyadic ratios) and at most one
/// ulp of `c` otherwise, below the solver's zero-residual cutoff.
fn c9_orthonormal() -> Outcome {
    let dict = Dictionary::identity(16).unwrap();
    let mut rng = CounterRng::new(BASE ^ 9);
    let mut cases: Vec<(f64, f64)> = vec![(0.75, 3.0), (-2.0, 2.0), (1.0, 4.0), (-0.5, 8.0)];
    for _ in 0..200 {
        let c = (rng.next_open01() * 4.0 - 2.0).max(1e-3);
        cases.push((c, c.abs() * (1.0 + 9.0 * rng.next_open01())));
    }
    let mut bad = 0;
    let mut exact_zero = 0;
    let mut dyadic_exact = true;
    for (j, &(c, beta)) in cases.iter().enumerate() {
        let atom = j % 16;
        let mut y = DVector::zeros(16);
        y[atom] = c;
        let tr = fw_solve(&dict, &y, &FwConfig::new(beta), None).unwrap();
        let x = &tr.final_x;
        let off = (0..16).filter(|&i| i != atom).all(|i| x[i] == 0.0);
        let ok = tr.iterations() == 1
            && tr.stop == StopReason::ResidualTol
            && tr.final_residual_norm < 1e-14
            && (x[atom] - c).abs() <= 1e-14
            && off;
        bad += usize::from(!ok);
        exact_zero += usize::from(tr.final_residual_norm == 0.0);
        if j < 4 {
            dyadic_exact &= tr.final_residual_norm == 0.0 && x[atom] == c;
        }
    }
    outcome(
        bad == 0 && dyadic_exact,
        format!(
            "{} cases: one step, |x_1 - c| <= 1e-14; residual exactly 0 in {exact_zero}, below 1e-14 in all; dyadic cases exact: {dyadic_exact}",
            cases.len()
        ),
    )
}

fn c10_figures() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let e1 = exp1_convergence(&cfg).unwrap();
    let c = &e1.curve;
    // r_0 = y, so the maximum and the bound coincide at k = 0
    let start_ok = c.max[0] <= c.bound[0];
    let strict = (1..c.len()).all(|k| c.max[k] < c.bound[k]);
    let margin = (1..c.len())
        .map(|k| c.bound[k] - c.max[k])
        .fold(f64::INFINITY, f64::min);
    let e3 = exp3_beta_effect(&cfg).unwrap();
    let (s1, s2) = (e3.low.slope.unwrap(), e3.high.slope.unwrap());
    outcome(
        start_ok && strict && s2 < s1,
        format!(
            "exp1: max < bound for k = 1..{} (min gap {margin:.3}), equal at k = 0; exp3 slopes {s1:.4} (1.1) vs {s2:.4} (8)",
            c.len() - 1
        ),
    )
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let start = Instant::now();
    let trials = recovery_trials();
    let traces: Vec<SolverTrace> = trials
        .iter()
        .map(|t| fw_run(t, 8.0 * t.inst.l1_coeff_norm, 1000))
        .collect();
    let secs = start.elapsed().as_secs_f64();

    results.push(("support recovery", c1_support(&trials, &traces, secs)));
    results.push(("rate beyond K", c2_rate_beyond_k(&trials, &traces)));
    results.push(("first-iteration rate", c3_first_iter(&trials)));
    results.push(("line search vs golden section", c4_line_search()));
    results.push(("iterate l1 bound", c5_iterate_bound(&trials, &traces)));
    results.push(("OMP exact in m steps", c6_omp(&trials)));
    results.push(("babel vs enumeration", c7_babel()));
    results.push(("FW vs projected gradient", c8_pgd()));
    results.push(("orthonormal one-step recovery", c9_orthonormal()));
    results.push(("figure shape", c10_figures()));

    let mut err = std::io::stderr().lock();
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        writeln!(err, "{tag} criterion {:>2} {name}: {}", i + 1, o.detail).unwrap();
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| !o.pass)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
