mod common;

use common::trial;
use fwsparse::io::{read_theory_report, write_theory_report};
use fwsparse::pursuit::{fw_solve, FwConfig};
use fwsparse::theory::{beta_threshold, first_iter_rate, iterate_l1_bound, tau, validate_trace};

#[test]
fn threshold_dominates_coefficient_norm() {
    for i in 0..100 {
        let t = trial(200, 400, None, 31, i);
        let m = t.inst.m();
        let mu1 = t.metrics.babel_at(m - 1).unwrap();
        let thr = beta_threshold(t.inst.l2_signal_norm, m, mu1).unwrap();
        assert!(
            thr >= t.inst.l1_coeff_norm,
            "trial {i}: {thr} < {}",
            t.inst.l1_coeff_norm
        );
        let b = iterate_l1_bound(t.inst.l2_signal_norm, m, mu1).unwrap();
        assert_eq!(thr.to_bits(), b.to_bits());
    }
}

#[test]
fn rate_beyond_k_and_iterate_bound() {
    for i in 0..20 {
        let t = trial(200, 400, None, 32, i);
        let beta = 8.0 * t.inst.l1_coeff_norm;
        let tr = fw_solve(
            &t.dict,
            &t.inst.signal,
            &FwConfig::new(beta).with_max_iters(2000),
            None,
        )
        .unwrap();
        let rep = validate_trace(&tr, &t.inst, &t.metrics, beta).unwrap();
        assert!(rep.recovery_ok && rep.support_confined);
        let theta = rep.theta.unwrap();
        assert!(theta > 0.0 && theta <= 1.0);
        assert!(rep.k_detected.is_some(), "trial {i}: no K");
        assert_eq!(rep.bound_line_ok, Some(true));
        assert_eq!(rep.iterate_bound_violations, 0);
        assert!(rep.max_iterate_l1 <= rep.iterate_l1_bound.unwrap());
        assert!(rep.epsilon > 0.0);
        assert!(rep.epsilon_stable_from.is_some());
        assert_eq!(rep.rate_violations_after_epsilon, Some(0));
    }
}

#[test]
fn first_iteration_rate_above_threshold() {
    for i in 0..20 {
        let t = trial(200, 400, None, 33, i);
        let m = t.inst.m();
        let mu1 = t.metrics.babel_at(m - 1).unwrap();
        let y = t.inst.l2_signal_norm;
        let beta = 1.01 * beta_threshold(y, m, mu1).unwrap();
        let tr = fw_solve(
            &t.dict,
            &t.inst.signal,
            &FwConfig::new(beta).with_max_iters(3000),
            None,
        )
        .unwrap();
        let rep = validate_trace(&tr, &t.inst, &t.metrics, beta).unwrap();
        let expected = first_iter_rate(mu1, m, tau(y, beta, m, mu1).unwrap()).unwrap();
        assert_eq!(rep.theta_first_iter, Some(expected));
        assert_eq!(
            rep.first_iter_ok,
            Some(true),
            "trial {i}: {} violations",
            rep.first_iter_violations
        );
    }
}

#[test]
fn epsilon_sign_matches_radius() {
    let t = trial(50, 100, None, 34, 0);
    for (mult, positive) in [(1.0, false), (1.5, true), (8.0, true)] {
        let beta = mult * t.inst.l1_coeff_norm;
        let tr = fw_solve(
            &t.dict,
            &t.inst.signal,
            &FwConfig::new(beta).with_max_iters(50),
            None,
        )
        .unwrap();
        let rep = validate_trace(&tr, &t.inst, &t.metrics, beta).unwrap();
        assert_eq!(rep.epsilon > 0.0, positive);
    }
}

#[test]
fn report_json_round_trip() {
    let t = trial(50, 100, None, 35, 0);
    let beta = 8.0 * t.inst.l1_coeff_norm;
    let tr = fw_solve(&t.dict, &t.inst.signal, &FwConfig::new(beta), None).unwrap();
    let rep = validate_trace(&tr, &t.inst, &t.metrics, beta).unwrap();
    let mut buf = Vec::new();
    write_theory_report(&rep, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    for key in [
        "\"beta\"",
        "\"x_star_l1\"",
        "\"y_l2\"",
        "\"mu1_m_minus_1\"",
        "\"k_detected\"",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    assert_eq!(read_theory_report(&buf[..]).unwrap(), rep);
}

#[test]
fn small_instances_reach_ground_truth_when_confined() {
    // m = 2 exceeds m* = 1 at this size, so x* is not the only zero-residual point
    let mut confined = 0;
    for i in 0..25 {
        let t = trial(8, 16, Some(2), 36, i);
        let beta = 4.0 * t.inst.l1_coeff_norm;
        let tr = fw_solve(
            &t.dict,
            &t.inst.signal,
            &FwConfig::new(beta).with_max_iters(500),
            None,
        )
        .unwrap();
        let on_support = tr.selected_atoms().all(|a| t.inst.support.contains(a));
        if on_support && tr.converged {
            confined += 1;
            let err = (&tr.final_x - &t.inst.coefficients).norm();
            assert!(err <= 1e-6, "trial {i}: {err:e}");
        }
    }
    assert!(confined >= 15, "only {confined} confined trials");
}
