use lagpack_core::geometry::{liouville_integral_of, symplectic_defect, PolarPoint, ProductTorus};
use lagpack_core::moves::*;
use lagpack_core::params::{solve, ParamSet};
use lagpack_core::profiles::SlopeProfile;
use proptest::prelude::*;

fn profile() -> impl Strategy<Value = SlopeProfile> {
    (0.1f64..0.9, -0.4f64..0.4, 0.01f64..0.4)
        .prop_filter_map("room", |(a, c, t)| SlopeProfile::new(a, c, t * (1.0 - a) / 1.01).ok())
        .prop_filter("keeps R positive", |p| p.max_abs_slope() < 0.9)
}

type Flow = fn(&SlopeProfile, f64, &PolarPoint) -> Result<PolarPoint, MovesError>;
const FLOWS: [Flow; 3] = [diagonal_flow, vertical_flow, horizontal_flow];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flows_keep_generator_integrals(p in profile(), which in 0usize..3, t in 0.0f64..1.0,
                                      k in 1u32..3, l in 1u32..3, base in 0.0f64..1.0) {
        let torus = ProductTorus::new(k as f64, l as f64).unwrap();
        let flow = FLOWS[which];
        let a = liouville_integral_of(4096, |s| flow(&p, t, &torus.point(s, base)).unwrap()).unwrap();
        let b = liouville_integral_of(4096, |s| flow(&p, t, &torus.point(base, s)).unwrap()).unwrap();
        prop_assert!((a.value - k as f64).abs() < 1e-9);
        prop_assert!((b.value - l as f64).abs() < 1e-9);
    }

    #[test]
    fn flows_are_symplectic_and_keep_angles(p in profile(), which in 0usize..3, t in -1.0f64..1.0,
                                            th1 in 0.0f64..1.0, th2 in 0.0f64..1.0,
                                            r1 in 1.0f64..2.5, r2 in 1.0f64..2.5) {
        let flow = FLOWS[which];
        let x = PolarPoint { theta1: th1, r1, theta2: th2, r2 };
        let y = flow(&p, t, &x).unwrap();
        prop_assert_eq!((y.theta1, y.theta2), (x.theta1, x.theta2));
        let d = symplectic_defect(|q: &PolarPoint| flow(&p, t, q), &x, 1e-5).unwrap();
        prop_assert!(d < 1e-6, "defect {}", d);
    }
}

#[test]
fn flows_reject_leaving_the_chart() {
    let g = SlopeProfile::new(0.5, 1.0, 0.1).unwrap();
    let x = PolarPoint { theta1: 0.3, r1: 0.2, theta2: 0.5, r2: 0.2 };
    // θ1+θ2 = 0.8 lies on the off-plateau where g' = −1.5
    assert!(matches!(diagonal_flow(&g, 1.0, &x), Err(MovesError::LeavesChart { .. })));
}

fn grid_max_gap(a: &TorusGraph, b: &TorusGraph, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
            let (x, y) = (a.eval(u, v), b.eval(u, v));
            worst = worst.max((x.0 - y.0).abs()).max((x.1 - y.1).abs());
        }
    }
    worst
}

#[test]
fn sweep_endpoints_match_the_schedule() {
    for p in [ParamSet::ex1(), solve(0.1, 60_000).unwrap()] {
        let cfg = compose_schedule(&p).unwrap();
        let tau = p.tau;
        let l11 = TorusGraph::product("L11", 1.0, 1.0);
        let l12 = TorusGraph::product("L12", 1.0, 2.0);
        let l21 = TorusGraph::product("L21", 2.0, 1.0);
        let checks: [(&str, f64, &TorusGraph); 10] = [
            ("G(L12)", 0.0, &l12),
            ("G(L12)", 1.0, &cfg.phi_g_l12),
            ("H(L11)", 0.0, &l11),
            ("H(L11)", tau, &cfg.phi_h_l11),
            ("H(pair:L11)", tau, &cfg.phi_h_l11),
            ("H(pair:L11)", 1.0, &cfg.images[0]),
            ("H(pair:L12)", tau, &cfg.phi_g_l12),
            ("H(pair:L12)", 1.0, &cfg.images[1]),
            ("F(L21)", 0.0, &l21),
            ("F(L21)", 1.0, &cfg.images[2]),
        ];
        for (name, t, want) in checks {
            let got = cfg.sweep(name).at(t);
            assert!(grid_max_gap(&got, want, 128) < 1e-12, "{name} at {t}");
        }
    }
}

#[test]
fn stage_maps_reproduce_the_images() {
    // each image is the tracked torus pushed through the stages that move it
    let cfg = compose_schedule(&ParamSet::ex1()).unwrap();
    for i in 0..50 {
        let (u, v) = ((i as f64 * 0.137) % 1.0, (i as f64 * 0.311) % 1.0);
        let x11 = PolarPoint { theta1: u, r1: 1.0, theta2: v, r2: 1.0 };
        let y = cfg.stage_map(2, &cfg.stage_map(1, &x11).unwrap()).unwrap();
        let want = cfg.images[0].point(u, v);
        assert!((y.r1 - want.r1).abs() < 1e-13 && (y.r2 - want.r2).abs() < 1e-13);
        let x12 = PolarPoint { r2: 2.0, ..x11 };
        let y = cfg.stage_map(2, &cfg.stage_map(0, &x12).unwrap()).unwrap();
        let want = cfg.images[1].point(u, v);
        assert!((y.r1 - want.r1).abs() < 1e-13 && (y.r2 - want.r2).abs() < 1e-13);
        let x21 = PolarPoint { r1: 2.0, ..x11 };
        let y = cfg.stage_map(3, &x21).unwrap();
        let want = cfg.images[2].point(u, v);
        assert!((y.r1 - want.r1).abs() < 1e-13 && (y.r2 - want.r2).abs() < 1e-13);
    }
}

#[test]
fn psi_l12_over_the_window_plateau() {
    let p = ParamSet::ex1();
    let cfg = compose_schedule(&p).unwrap();
    // θ in the window: both θ1+θ2 and θ2 on their plateaus
    let (r1, r2) = cfg.images[1].eval(0.2, 0.3);
    assert!((r1 - (1.0 + p.cg)).abs() < 1e-15);
    let want = 2.0 + p.cg - (1.0 - p.tau) * (1.0 - p.ch);
    assert!((r2 - want).abs() < 1e-15);
    assert!((r2 - 1.95079).abs() < 1e-5 && r2 > p.w + p.sigma);
    assert_eq!(cfg.images[3].eval(0.4, 0.9), (2.0, 2.0));
}

#[test]
fn image_generators_are_integral() {
    for p in [ParamSet::ex1(), solve(0.5, 60_000).unwrap()] {
        let cfg = compose_schedule(&p).unwrap();
        let want = [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)];
        for (g, (k, l)) in cfg.images.iter().zip(want) {
            for base in [0.0, 0.37, 0.981] {
                let a = liouville_integral_of(100_000, g.theta1_generator(base)).unwrap().value;
                let b = liouville_integral_of(100_000, g.theta2_generator(base)).unwrap().value;
                assert!((a - k).abs() < 1e-6 && (b - l).abs() < 1e-6, "{}: {a} {b}", g.name);
            }
        }
    }
}

#[test]
fn lipschitz_bounds_survive_an_audit() {
    let cfg = compose_schedule(&ParamSet::ex1()).unwrap();
    for g in cfg.images.iter().chain([&cfg.phi_g_l12, &cfg.phi_h_l11]) {
        let bound = g.lipschitz();
        let seen = g.audit_lipschitz(20_000, 7);
        assert!(seen[0] <= bound[0] * (1.0 + 1e-9) && seen[1] <= bound[1] * (1.0 + 1e-9), "{}", g.name);
    }
}

#[test]
fn infeasible_schedule_is_rejected() {
    let p = ParamSet::ex1().with("tau", 0.95);
    match compose_schedule(&p) {
        Err(MovesError::Infeasible(v)) => assert!(v.iter().any(|c| c.id.to_string() == "I10")),
        other => panic!("expected rejection, got {:?}", other.map(|c| c.params)),
    }
    assert!(compose_schedule_unchecked(&p).is_ok());
}
