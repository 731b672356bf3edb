#![allow(dead_code)]

use num_rational::Rational64;

pub fn q(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

pub fn eps() -> Rational64 {
    Rational64::new(1, 10)
}

pub type Cells = Vec<Vec<Option<Rational64>>>;

fn ints(rows: &[&[Option<i64>]]) -> Cells {
    rows.iter().map(|r| r.iter().map(|v| v.map(q)).collect()).collect()
}

fn col(vals: &[Rational64]) -> Cells {
    vals.iter().map(|&v| vec![Some(v)]).collect()
}

/// The printed tables as closed forms in d, k, l, ε.
pub fn oracle(d: i64, k: i64, l: i64, e: Rational64) -> Vec<(&'static str, Cells)> {
    let s = None;
    let x = Some;
    let shrunk = q(2 + 2 * d) - q(2 * d) * e;
    vec![
        ("initial_intersections", ints(&[&[x(2 * d)], &[x(2 * d), x(2 * d)], &[x(k), x(d - k), s], &[x(l), x(d - l), x(0), s], &[x(1), x(1), s, s, x(0)]])),
        ("initial_areas", col(&[q(2 + 2 * d), q(2 + 2 * d), q(1), q(1), q(2)])),
        (
            "step1_intersections",
            ints(&[
                &[x(0)],
                &[x(0), x(0)],
                &[x(k), x(d - k), s],
                &[x(l), x(d - l), x(0), s],
                &[x(1), x(1), s, s, x(0)],
                &[x(2 * d), x(2 * d), x(0), x(0), x(0), x(-1)],
                &[x(0), x(0), x(d), x(d), x(0), x(1), x(-1)],
            ]),
        ),
        ("step1_areas", col(&[shrunk, shrunk, q(1), q(1), q(2), e, q(2) - e])),
        ("step2_areas", col(&[shrunk, shrunk, q(1 + d * d), q(1 + d * d), q(2 + 2 * d), e + q(2 * d), q(2) - e])),
        ("step3_areas", col(&[q(2 + 2 * d), q(2 + 2 * d), q(1 + d * d), q(1 + d * d), q(2 + 2 * d), q(2 * d), q(2)])),
        (
            "step4_intersections",
            ints(&[
                &[x(0)],
                &[x(0), x(0)],
                &[x(k), x(d - k), s],
                &[x(l), x(d - l), x(0), s],
                &[x(1), x(1), s, s, x(0)],
                &[x(2 * d), x(2 * d), x(d), x(d), x(0), x(0)],
            ]),
        ),
        ("step4_areas", col(&[q(2 + 2 * d), q(2 + 2 * d), q(1 + d * d + 2 * d), q(1 + d * d + 2 * d), q(2 + 2 * d), q(2 + 2 * d)])),
    ]
}
