use std::time::Instant;

use lagpack_core::params::*;
use proptest::prelude::*;

/// Direct substitution into I1–I15; `ideal` drops the finite-η
/// corrections of the extreme slopes.
fn oracle_slacks(p: &ParamSet, ideal: bool) -> Vec<f64> {
    let eta = if ideal { 0.0 } else { p.eta };
    let a = (1.0 + p.delta) * (1.0 / p.ell + 1.0 / p.w);
    let b = (1.0 + p.delta) / p.w;
    let c = (1.0 + p.delta) / p.ell;
    let extreme = |plateau: f64, slope: f64| -slope * (plateau + eta) / (1.0 - plateau - eta);
    let m_g = extreme(a, p.cg);
    let big_m_h = extreme(b, -(1.0 - p.ch));
    let m_f = extreme(c, p.cf);
    vec![
        (p.ell - 2.0).min(2.0 + p.eps - p.ell),
        2.0 - p.w,
        1.0 - 1.0 / p.ell - 1.0 / p.w,
        2.0 + p.eps - p.ell - p.sigma,
        2.0 - p.w - p.sigma,
        1.0 - a,
        1.0 + m_g,
        p.eps - p.cg,
        p.ch.min(p.sigma - p.ch),
        1.0 / big_m_h - p.tau,
        2.0 + p.cg - (1.0 - p.tau) * (1.0 - p.ch) - (p.w + p.sigma),
        p.cg - (p.w * (1.0 - 1.0 / (1.0 + p.delta)) + p.sigma - p.ch),
        p.cf - (p.ell + p.sigma - 2.0),
        2.0 + m_f - (1.0 + p.cg),
        2.0 + p.eps - (1.0 + big_m_h),
    ]
}

#[test]
fn ex1_slacks_match_substitution() {
    let p = ParamSet::ex1();
    let ours = check_inequalities(&p);
    assert_eq!(ours.len(), 18);
    let oracle = oracle_slacks(&p, false);
    for (c, o) in ours.iter().zip(&oracle) {
        assert!((c.slack - o).abs() < 1e-12, "{}: {} vs {}", c.id, c.slack, o);
    }
    assert!(ours.iter().all(|c| c.holds()));
    // I10 binds at 5.36e-4; I11 sits at 7.9e-4
    let b = binding(&p);
    assert_eq!(b.id, ConstraintId::I10);
    assert!((b.slack - 5.363e-4).abs() < 1e-6);
    assert!((ours[10].slack - 7.9e-4).abs() < 1e-9);
    assert!((1.0 / p.derived().big_m_h - 0.938536).abs() < 1e-6);
}

#[test]
fn ex1_boundary_and_violation() {
    let p = ParamSet::ex1().with("w", 2.0);
    let s = check_inequalities(&p);
    assert_eq!(s[1].slack, 0.0);
    assert!(!s[1].holds());
    assert!(matches!(p.require_feasible(), Err(ParamsError::Infeasible(_))));

    let p = ParamSet::ex1().with("tau", 0.95);
    match p.require_feasible() {
        Err(ParamsError::Infeasible(v)) => assert!(v.iter().any(|c| c.id == ConstraintId::I10)),
        other => panic!("expected I10 failure, got {other:?}"),
    }

    let p = ParamSet::ex1().with("ch", 0.05);
    match p.require_feasible() {
        Err(ParamsError::Infeasible(v)) => assert!(v.iter().any(|c| c.id == ConstraintId::I9)),
        other => panic!("expected I9 failure, got {other:?}"),
    }
}

#[test]
fn finite_eta_is_conservative() {
    for p in [ParamSet::ex1(), solve(0.25, 60_000).unwrap()] {
        let ideal = oracle_slacks(&p, true);
        let ours = check_inequalities(&p);
        for (i, (c, o)) in ours.iter().zip(&ideal).enumerate() {
            // I7, I10, I14 and I15 carry the η-corrected extremes
            if [6, 9, 13, 14].contains(&i) {
                assert!(c.slack < *o, "{}", c.id);
            } else {
                assert!((c.slack - o).abs() < 1e-12, "{}", c.id);
            }
        }
    }
}

#[test]
fn solver_meets_the_grid() {
    for eps in [0.5, 0.25, 0.1] {
        let t = Instant::now();
        let p = solve(eps, 60_000).unwrap();
        assert!(t.elapsed().as_secs_f64() < 10.0);
        assert!(check_inequalities(&p).iter().all(|c| c.holds()), "eps {eps}");
        assert_eq!(p.eps, eps);
        if eps == 0.5 {
            assert!(min_slack(&p) >= min_slack(&ParamSet::ex1()));
            assert!(min_slack(&p) >= 5e-4);
        }
    }
}

#[test]
fn solver_is_deterministic() {
    assert_eq!(solve(0.25, 20_000).unwrap(), solve(0.25, 20_000).unwrap());
}

#[test]
fn solver_rejects_bad_input() {
    assert!(solve(-1.0, 1000).is_err());
    assert!(solve(0.5, 0).is_err());
    assert!(solve(f64::NAN, 1000).is_err());
}

#[test]
fn json_round_trip() {
    let p = solve(0.1, 60_000).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    let back: ParamSet = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn larger_eta_never_loosens_i10_or_i14(e1 in 1e-5f64..4e-3, e2 in 1e-5f64..4e-3) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let a = check_inequalities(&ParamSet::ex1().with("eta", lo));
        let b = check_inequalities(&ParamSet::ex1().with("eta", hi));
        prop_assert!(b[9].slack <= a[9].slack);
        prop_assert!(b[13].slack <= a[13].slack);
    }

    #[test]
    fn tau_in_window_satisfies_i10_and_i11(s in 0.01f64..0.99) {
        let p = ParamSet::ex1();
        let (lo, hi) = tau_window(&p);
        let q = p.with("tau", lo + s * (hi - lo));
        let c = check_inequalities(&q);
        prop_assert!(c[9].holds() && c[10].holds());
    }
}
