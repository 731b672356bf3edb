//! Periodic slope profiles.
//!
//! A [`SlopeProfile`] describes the derivative `p'` of a smooth function on
//! the circle `R/Z`. The derivative is piecewise:
//!
//! ```text
//!   c                       on [0, A]
//!   c + (m - c) e((s-A)/η)  on [A, A+η]
//!   m                       on [A+η, 1-η]
//!   m + (c - m) e((s-1+η)/η) on [1-η, 1]
//! ```
//!
//! where `e` is the exponential smoothstep `E(x) / (E(x) + E(1-x))` with
//! `E(x) = exp(-1/x)`. Because `e(x) + e(1-x) = 1`, each transition
//! integrates to exactly `η (c + m) / 2` and the zero-mean condition fixes
//! `m = -c (A + η) / (1 - A - η)` in closed form.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("no room for off-plateau: A + 2*eta = {0} >= 1")]
    NoRoom(f64),
    #[error("plateau end must be positive, got {0}")]
    PlateauEnd(f64),
    #[error("transition width must be positive, got {0}")]
    Width(f64),
    #[error("non-finite profile input")]
    NonFinite,
}

/// Exponential smoothstep on `[0, 1]`, clamped outside.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let z = 1.0 / x - 1.0 / (1.0 - x);
        1.0 / (1.0 + z.exp())
    }
}

/// Derivative of [`smoothstep`].
pub fn smoothstep_slope(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let e = smoothstep(x);
    let y = 1.0 - x;
    e * (1.0 - e) * (1.0 / (x * x) + 1.0 / (y * y))
}

fn smoothstep_curvature(x: f64) -> f64 {
    // second derivative via the identity e' = e(1-e) q, q = 1/x^2 + 1/(1-x)^2
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let e = smoothstep(x);
    let y = 1.0 - x;
    let q = 1.0 / (x * x) + 1.0 / (y * y);
    let dq = -2.0 / (x * x * x) + 2.0 / (y * y * y);
    let de = e * (1.0 - e) * q;
    (1.0 - 2.0 * e) * de * q + e * (1.0 - e) * dq
}

/// Upper bound for `sup |e'|` on `[0, 1]`.
///
/// Dense sample maximum plus the worst-case gap allowed by the sampled
/// curvature bound (doubled) over one sample spacing. Computed once.
pub fn smoothstep_slope_sup() -> f64 {
    static SUP: OnceLock<f64> = OnceLock::new();
    *SUP.get_or_init(|| {
        let n = 200_000;
        let h = 1.0 / n as f64;
        let mut peak: f64 = 0.0;
        let mut curv: f64 = 0.0;
        for i in 0..=n {
            let x = i as f64 * h;
            peak = peak.max(smoothstep_slope(x));
            curv = curv.max(smoothstep_curvature(x).abs());
        }
        peak + 2.0 * curv * h
    })
}

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

/// `∫_0^x e(y) dy` for `x ∈ [0, 1]`, composite Gauss-Legendre.
pub fn smoothstep_integral(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 0.5;
    }
    let panels = 32;
    let h = x / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            acc += weight * (smoothstep(mid - half * node) + smoothstep(mid + half * node));
        }
    }
    acc * 0.5 * h
}

fn reduce(s: f64) -> f64 {
    let r = s - s.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Derivative profile of a smooth circle function with one plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    #[serde(rename = "A")]
    plateau_end: f64,
    c: f64,
    eta: f64,
    m: f64,
    orientation: i8,
}

impl SlopeProfile {
    /// Builds the profile with plateau `[0, plateau_end]` of slope `c` and
    /// transitions of width `eta`.
    pub fn new(plateau_end: f64, c: f64, eta: f64) -> Result<Self, ProfileError> {
        if !(plateau_end.is_finite() && c.is_finite() && eta.is_finite()) {
            return Err(ProfileError::NonFinite);
        }
        if plateau_end <= 0.0 {
            return Err(ProfileError::PlateauEnd(plateau_end));
        }
        if eta <= 0.0 {
            return Err(ProfileError::Width(eta));
        }
        if plateau_end + 2.0 * eta >= 1.0 {
            return Err(ProfileError::NoRoom(plateau_end + 2.0 * eta));
        }
        let m = off_slope(plateau_end, c, eta);
        let orientation = if c < 0.0 { -1 } else { 1 };
        Ok(Self { plateau_end, c, eta, m, orientation })
    }

    pub fn plateau_end(&self) -> f64 {
        self.plateau_end
    }

    pub fn plateau_slope(&self) -> f64 {
        self.c
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn off_slope(&self) -> f64 {
        self.m
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    /// `p'(s)`; exact on both constant pieces.
    pub fn eval_slope(&self, s: f64) -> f64 {
        let s = reduce(s);
        let a = self.plateau_end;
        if s <= a {
            self.c
        } else if s < a + self.eta {
            self.c + (self.m - self.c) * smoothstep((s - a) / self.eta)
        } else if s <= 1.0 - self.eta {
            self.m
        } else {
            self.m + (self.c - self.m) * smoothstep((s - (1.0 - self.eta)) / self.eta)
        }
    }

    /// `p''(s)`.
    pub fn eval_curvature(&self, s: f64) -> f64 {
        let s = reduce(s);
        let a = self.plateau_end;
        if s > a && s < a + self.eta {
            (self.m - self.c) * smoothstep_slope((s - a) / self.eta) / self.eta
        } else if s > 1.0 - self.eta {
            (self.c - self.m) * smoothstep_slope((s - (1.0 - self.eta)) / self.eta) / self.eta
        } else {
            0.0
        }
    }

    /// `p(s) = ∫_0^s p'`, with `p(0) = 0`. Periodic.
    pub fn eval(&self, s: f64) -> f64 {
        let s = reduce(s);
        let a = self.plateau_end;
        let eta = self.eta;
        let (c, m) = (self.c, self.m);
        if s <= a {
            return c * s;
        }
        let mut acc = c * a;
        if s < a + eta {
            let x = (s - a) / eta;
            return acc + c * (s - a) + (m - c) * eta * smoothstep_integral(x);
        }
        acc += eta * (c + m) / 2.0;
        if s <= 1.0 - eta {
            return acc + m * (s - a - eta);
        }
        acc += m * (1.0 - 2.0 * eta - a);
        let x = (s - (1.0 - eta)) / eta;
        acc + m * (s - (1.0 - eta)) + (c - m) * eta * smoothstep_integral(x)
    }

    /// Exact `(min p', max p')`.
    pub fn slope_range(&self) -> (f64, f64) {
        (self.c.min(self.m), self.c.max(self.m))
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.c.abs().max(self.m.abs())
    }

    /// Global bound on `|p''|`.
    pub fn curvature_bound(&self) -> f64 {
        (self.c - self.m).abs() * smoothstep_slope_sup() / self.eta
    }

    /// Bound on `|p''|` over the closed interval `[lo, hi]` of the line,
    /// read modulo 1. Zero when the interval stays inside a constant piece
    /// (touching a transition endpoint is fine: `p''` vanishes there).
    pub fn curvature_bound_on(&self, lo: f64, hi: f64) -> f64 {
        if self.c == self.m {
            return 0.0;
        }
        if hi - lo >= 1.0 {
            return self.curvature_bound();
        }
        let shift = lo.floor();
        let (lo, hi) = (lo - shift, hi - shift);
        let a = self.plateau_end;
        let eta = self.eta;
        let windows = [
            (a, a + eta),
            (1.0 - eta, 1.0),
            (1.0 + a, 1.0 + a + eta),
            (2.0 - eta, 2.0),
        ];
        let touches = windows.iter().any(|&(w0, w1)| lo < w1 && hi > w0);
        if touches {
            self.curvature_bound()
        } else {
            0.0
        }
    }
}

/// Off-plateau slope forced by periodicity.
pub fn off_slope(plateau_end: f64, c: f64, eta: f64) -> f64 {
    -c * (plateau_end + eta) / (1.0 - plateau_end - eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid_mean(p: &SlopeProfile, n: usize) -> f64 {
        (0..n).map(|i| p.eval_slope(i as f64 / n as f64)).sum::<f64>() / n as f64
    }

    #[test]
    fn smoothstep_is_symmetric() {
        for i in 1..100 {
            let x = i as f64 / 100.0;
            assert!((smoothstep(x) + smoothstep(1.0 - x) - 1.0).abs() < 1e-15);
        }
        assert!((smoothstep_integral(1.0) - 0.5).abs() < 1e-15);
        // integral of the symmetric step over the full interval via quadrature
        let q = smoothstep_integral(1.0 - 1e-12);
        assert!((q - 0.5).abs() < 1e-11);
    }

    #[test]
    fn smoothstep_slope_sup_is_about_two() {
        let sup = smoothstep_slope_sup();
        assert!((2.0..2.01).contains(&sup), "{sup}");
    }

    #[test]
    fn half_plateau_example() {
        let p = SlopeProfile::new(0.5, 1.0, 0.1).unwrap();
        assert!((p.off_slope() + 1.5).abs() < 1e-15);
        assert!(trapezoid_mean(&p, 100_000).abs() < 1e-10);
    }

    #[test]
    fn zero_slope_is_flat() {
        let p = SlopeProfile::new(0.3, 0.0, 0.05).unwrap();
        assert_eq!(p.off_slope(), 0.0);
        assert_eq!(p.slope_range(), (0.0, 0.0));
        for i in 0..50 {
            assert_eq!(p.eval(i as f64 / 50.0), 0.0);
        }
    }

    #[test]
    fn rejects_no_room() {
        assert!(matches!(
            SlopeProfile::new(0.9, 1.0, 0.05),
            Err(ProfileError::NoRoom(_))
        ));
        assert!(SlopeProfile::new(0.5, 1.0, 0.0).is_err());
        assert!(SlopeProfile::new(0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn plateau_and_transition_values() {
        let p = SlopeProfile::new(0.4, 0.7, 0.1).unwrap();
        assert_eq!(p.eval_slope(0.2), 0.7);
        assert_eq!(p.eval_slope(0.4), 0.7);
        let mid = p.eval_slope(0.45);
        assert!(mid < 0.7 && mid > p.off_slope());
        assert_eq!(p.eval_slope(0.6), p.off_slope());
        assert_eq!(p.eval_slope(1.2), 0.7);
    }

    #[test]
    fn eval_is_periodic() {
        let p = SlopeProfile::new(0.55, -0.8, 0.02).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert!(p.eval(1.0 - 1e-13).abs() < 1e-10);
        // eval against a fine trapezoid of eval_slope
        let s = 0.57;
        let n = 200_000;
        let h = s / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let a = p.eval_slope(i as f64 * h);
            let b = p.eval_slope((i + 1) as f64 * h);
            acc += 0.5 * (a + b) * h;
        }
        assert!((acc - p.eval(s)).abs() < 1e-8);
    }

    #[test]
    fn curvature_bound_on_plateau_is_zero() {
        let p = SlopeProfile::new(0.5, 1.0, 0.1).unwrap();
        assert_eq!(p.curvature_bound_on(0.1, 0.5), 0.0);
        assert_eq!(p.curvature_bound_on(0.6, 0.9), 0.0);
        assert_eq!(p.curvature_bound_on(-0.2, -0.15), 0.0);
        assert!(p.curvature_bound_on(0.45, 0.55) > 0.0);
        assert!(p.curvature_bound_on(0.95, 1.05) > 0.0);
        assert!(p.curvature_bound_on(-0.02, 0.01) > 0.0);
    }

    #[test]
    fn curvature_matches_finite_difference() {
        let p = SlopeProfile::new(0.5, 1.0, 0.1).unwrap();
        for &s in &[0.52, 0.55, 0.58, 0.93, 0.97] {
            let h = 1e-6;
            let fd = (p.eval_slope(s + h) - p.eval_slope(s - h)) / (2.0 * h);
            assert!((fd - p.eval_curvature(s)).abs() < 1e-5, "{s}");
            assert!(p.eval_curvature(s).abs() <= p.curvature_bound());
        }
    }
}
