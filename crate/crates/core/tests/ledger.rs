use lagpack_core::ledger::*;
use num_rational::Rational64;
use proptest::prelude::*;

#[path = "support/ledger_oracle.rs"]
mod ledger_oracle;
use ledger_oracle::{eps, oracle, q};

#[test]
fn tables_match_the_closed_forms() {
    for d in [2usize, 3, 5] {
        for k in 0..=d {
            for l in 0..=d {
                let got = surgery_tables(d, k, l, eps()).unwrap();
                let want = oracle(d as i64, k as i64, l as i64, eps());
                assert_eq!(got.len(), want.len());
                for (t, (id, cells)) in got.iter().zip(want) {
                    assert_eq!(t.id, id);
                    assert_eq!(t.cells, cells, "d={d} k={k} l={l} {id}");
                }
            }
        }
    }
}

#[test]
fn other_capacities_also_match() {
    for e in [Rational64::new(1, 3), Rational64::new(1, 7), Rational64::new(1, 100)] {
        let got = surgery_tables(3, 1, 2, e).unwrap();
        for (t, (_, cells)) in got.iter().zip(oracle(3, 1, 2, e)) {
            assert_eq!(t.cells, cells);
        }
    }
}

#[test]
fn final_areas_ignore_k_and_l() {
    for d in [2usize, 3, 5] {
        let base: Vec<Rational64> = run_surgery(d, 0, 0, eps()).unwrap()[4].entries.iter().map(|e| e.area).collect();
        for k in 0..=d {
            for l in 0..=d {
                let s = &run_surgery(d, k, l, eps()).unwrap()[4];
                let areas: Vec<Rational64> = s.entries.iter().map(|e| e.area).collect();
                assert_eq!(areas, base);
            }
        }
    }
}

#[test]
fn final_lattice_has_rank_two() {
    for d in [1usize, 2, 3, 5, 8] {
        let states = run_surgery(d, 0, d, eps()).unwrap();
        assert_eq!(states[0].lattice_rank(), 2);
        assert_eq!(states[1].lattice_rank(), 2 + 2 * d);
        assert_eq!(states[4].lattice_rank(), 2);
        assert_eq!(states[4].sphere_span_rank(), 2);
        assert!(states.iter().all(|s| s.lattice_consistent()));
    }
}

#[test]
fn monotone_ratios() {
    for d in [2usize, 3, 5] {
        let s = &run_surgery(d, 1, 1, eps()).unwrap()[4];
        let r = monotone_ratio_check(s).unwrap();
        assert!(r.holds);
        let di = d as i64;
        for name in [Name::E, Name::E11] {
            assert_eq!(s.area(name).unwrap(), q((di + 1) * (di + 1)));
            assert_eq!(s.maslov(name).unwrap(), 2 * di + 2);
        }
        assert_eq!(s.area(Name::DInf).unwrap(), q(di + 1));
        assert_eq!(s.maslov(Name::DInf).unwrap(), 2);
        for label in ["E^X", "E11^X", "Dinf"] {
            assert!(r.entries.iter().any(|e| e.name == label && e.holds));
        }
    }
    let s3 = &run_surgery(3, 0, 0, eps()).unwrap()[4];
    assert_eq!((s3.area(Name::E).unwrap(), s3.maslov(Name::E).unwrap()), (q(16), 8));
    let s2 = &run_surgery(2, 0, 0, eps()).unwrap()[4];
    assert_eq!((s2.area(Name::E).unwrap(), s2.maslov(Name::E).unwrap()), (q(9), 6));
    let early = &run_surgery(2, 0, 0, eps()).unwrap()[3];
    assert!(matches!(monotone_ratio_check(early), Err(LedgerError::StepOrder { .. })));
}

#[test]
fn step_examples() {
    let d = 3;
    let [_, s1, s2, s3, s4] = run_surgery(d, 2, 1, eps()).unwrap();
    assert_eq!(s1.dot(Name::F, Name::G).unwrap(), Some(0));
    assert_eq!(s1.area(Name::Leaf(4)).unwrap(), q(2) - eps());
    let total: i64 = (0..6).map(|i| s1.dot(Name::Leaf(i), Name::E).unwrap().unwrap()).sum();
    assert_eq!(total, 3);
    assert_eq!(s2.area(Name::E).unwrap(), q(10));
    assert_eq!(s2.area(Name::H).unwrap(), q(8));
    assert_eq!(s3.area(Name::Exc(0)).unwrap(), q(6));
    assert_eq!(s3.area(Name::F).unwrap(), q(8));
    assert_eq!(s3.area(Name::E), s2.area(Name::E));
    // exceptional spheres become fibre-class spheres
    let h = s4.entry(Name::H).unwrap().class.clone();
    for i in 0..6 {
        assert_eq!(s4.entry(Name::Exc(i)).unwrap().class, h);
        assert_eq!(s4.area(Name::Exc(i)).unwrap(), q(8));
    }
    assert_eq!(s4.area(Name::E).unwrap(), q(16));
    assert!(s4.index(Name::Leaf(0)).is_none());
}

#[test]
fn inflation_keeps_intersections() {
    let [_, s1, s2, s3, _] = run_surgery(3, 1, 3, eps()).unwrap();
    assert_eq!(s1.pairing, s2.pairing);
    assert_eq!(s2.pairing, s3.pairing);
    let zero = inflate(&s1, Name::G, q(0)).unwrap();
    assert_eq!(zero.entries, s1.entries);
}

#[test]
fn blow_down_by_hand_at_d2() {
    // d = 2: leaves 0, 1 meet 𝔼 and leaves 2, 3 meet E₁,₁.
    let [_, _, _, s3, s4] = run_surgery(2, 1, 0, eps()).unwrap();
    // C' • D' = C • D + Σ (C • Ĥᵢ)(D • Ĥᵢ)
    for (a, b, want) in [
        (Name::E, Name::Exc(0), 1),
        (Name::E, Name::Exc(2), 0),
        (Name::E11, Name::Exc(3), 1),
        (Name::F, Name::Exc(1), 1),
        (Name::Exc(0), Name::Exc(0), 0),
        (Name::Exc(0), Name::Exc(1), 0),
        (Name::E, Name::E11, 0),
        (Name::F, Name::G, 0),
        (Name::E, Name::F, 1),
    ] {
        assert_eq!(s4.dot(a, b).unwrap(), Some(want), "{a:?}·{b:?}");
    }
    assert_eq!(s4.dot(Name::E, Name::H).unwrap(), None);
    assert_eq!(s4.dot(Name::E, Name::E).unwrap(), None);
    // area and Maslov move by the same linear rule
    assert_eq!(s4.area(Name::E).unwrap(), s3.area(Name::E).unwrap() + q(2) * s3.area(Name::Leaf(0)).unwrap());
    assert_eq!(s4.maslov(Name::E).unwrap(), 2 + 2 * 2);
    assert_eq!(s4.maslov(Name::Exc(0)).unwrap(), 4);
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(init_state(0, 0, 0, eps()).is_err());
    assert!(init_state(2, 3, 0, eps()).is_err());
    assert!(init_state(2, 0, 0, q(0)).is_err());
    let s0 = init_state(2, 0, 0, eps()).unwrap();
    assert!(matches!(blow_up(&s0, &[Target::E; 4]), Err(LedgerError::BadAssignment { .. })));
    let [_, s1, s2, mut s3, _] = run_surgery(2, 0, 0, eps()).unwrap();
    assert!(matches!(negative_inflate(&s1, Name::Exc(0), eps()), Err(LedgerError::StepOrder { .. })));
    assert!(matches!(negative_inflate(&s2, Name::F, eps()), Err(LedgerError::SelfIntersection { .. })));
    // a leaf whose self-intersection is not −1 cannot be blown down
    let i = s3.index(Name::Leaf(1)).unwrap();
    s3.pairing[i][i] = Some(0);
    assert!(matches!(blow_down(&s3), Err(LedgerError::SelfIntersection { .. })));
}

#[test]
fn fixtures_match_byte_for_byte() {
    for d in [2usize, 3, 5] {
        let path = format!("{}/../cli/fixtures/tables_d{d}.csv", env!("CARGO_MANIFEST_DIR"));
        let want = std::fs::read_to_string(path).unwrap();
        assert_eq!(tables_csv(&surgery_tables(d, 0, 0, eps()).unwrap()), want);
    }
}

proptest! {
    #[test]
    fn assignment_order_does_not_matter(seed in any::<u64>(), d in 1usize..6) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut a = default_assignment(d);
        a.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let s0 = init_state(d, 0, d, eps()).unwrap();
        let s1 = blow_up(&s0, &a).unwrap();
        let dd = q(d as i64);
        let s2 = inflate(&inflate(&s1, Name::F, dd).unwrap(), Name::G, dd).unwrap();
        let s3 = (0..2 * d).fold(s2, |s, i| negative_inflate(&s, Name::Exc(i), eps()).unwrap());
        let s4 = blow_down(&s3).unwrap();
        let reference = &run_surgery(d, 0, d, eps()).unwrap()[4];
        let areas = |s: &SurgeryState| s.entries.iter().map(|e| e.area).collect::<Vec<_>>();
        prop_assert_eq!(areas(&s4), areas(reference));
        prop_assert!(monotone_ratio_check(&s4).unwrap().holds);
    }

    #[test]
    fn basis_adjust_lands_on_area_two_or_monotone(mu in -10i64..10, om in -20i64..20) {
        let mu = 2 * mu;
        let r = monotone_basis_adjust(2, q(1), mu, q(om)).unwrap();
        prop_assert_eq!(r.mu_c_hat, 2);
        match r.verdict {
            BasisVerdict::Monotone => prop_assert_eq!(r.om_c_hat, q(1)),
            _ => prop_assert!(r.om_c_hat >= q(2)),
        }
    }
}
