//! Rescaled polar coordinates on R^4, product tori, polydisks, the window
//! `S x T`, Liouville line integrals and a finite-difference symplecticity
//! check.
//!
//! Coordinates are `(θ1, R1, θ2, R2)` with `θi ∈ R/Z` and `Ri = π|zi|^2`.
//! The symplectic form is `Σ dRi ∧ dθi` and the Liouville primitive used
//! throughout is `λ = R1 dθ1 + R2 dθ2`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("negative action coordinate r{index} = {value}")]
    NegativeAction { index: usize, value: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("loop is not closed (gap {0:e})")]
    NotClosed(f64),
    #[error("loop has fewer than {0} samples")]
    TooFewSamples(usize),
    #[error("angle jump of {jump} between samples {index} and {next}; refine sampling")]
    UnwrapAmbiguous { index: usize, next: usize, jump: f64 },
    #[error("point within step {h} of the r{index} = 0 locus (coordinate degeneracy)")]
    Degenerate { index: usize, h: f64 },
    #[error("finite-difference step must be positive")]
    BadStep,
    #[error("map failed near the base point: {0}")]
    MapFailed(String),
    #[error("malformed loop csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Reduces an angle into `[0, 1)`.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta - theta.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed difference `b - a` of two angles, lifted into `[-1/2, 1/2)`.
pub fn angle_delta(a: f64, b: f64) -> f64 {
    let d = b - a;
    d - (d + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub theta1: f64,
    pub r1: f64,
    pub theta2: f64,
    pub r2: f64,
}

impl PolarPoint {
    pub fn new(theta1: f64, r1: f64, theta2: f64, r2: f64) -> Result<Self, GeometryError> {
        if !(theta1.is_finite() && r1.is_finite() && theta2.is_finite() && r2.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if r1 < 0.0 {
            return Err(GeometryError::NegativeAction { index: 1, value: r1 });
        }
        if r2 < 0.0 {
            return Err(GeometryError::NegativeAction { index: 2, value: r2 });
        }
        Ok(Self { theta1: reduce_angle(theta1), r1, theta2: reduce_angle(theta2), r2 })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta1, self.r1, self.theta2, self.r2]
    }

    fn from_raw(c: [f64; 4]) -> Self {
        Self { theta1: c[0], r1: c[1], theta2: c[2], r2: c[3] }
    }
}

/// The product torus `L_{k,l} = {R1 = k, R2 = l}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductTorus {
    pub k: f64,
    pub l: f64,
}

impl ProductTorus {
    pub fn new(k: f64, l: f64) -> Result<Self, GeometryError> {
        if !(k > 0.0) {
            return Err(GeometryError::NonPositive("k", k));
        }
        if !(l > 0.0) {
            return Err(GeometryError::NonPositive("l", l));
        }
        Ok(Self { k, l })
    }

    pub fn point(&self, theta1: f64, theta2: f64) -> PolarPoint {
        PolarPoint { theta1: reduce_angle(theta1), r1: self.k, theta2: reduce_angle(theta2), r2: self.l }
    }
}

/// `P(a, b) = {R1 < a, R2 < b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polydisk {
    pub a: f64,
    pub b: f64,
}

impl Polydisk {
    pub fn new(a: f64, b: f64) -> Result<Self, GeometryError> {
        if !(a > 0.0) {
            return Err(GeometryError::NonPositive("a", a));
        }
        if !(b > 0.0) {
            return Err(GeometryError::NonPositive("b", b));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, p: &PolarPoint) -> bool {
        p.r1 < self.a && p.r2 < self.b
    }
}

/// The window `S x T`:
/// `S = {σ < R1 < ℓ + σ, σ < R2 < w + σ}`,
/// `T = {0 < θ1 < (1+δ)/ℓ, 0 < θ2 < (1+δ)/w}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub sigma: f64,
    pub ell: f64,
    pub w: f64,
    pub tlen1: f64,
    pub tlen2: f64,
}

impl Window {
    pub fn new(sigma: f64, ell: f64, w: f64, delta: f64) -> Result<Self, GeometryError> {
        for (name, v) in [("sigma", sigma), ("ell", ell), ("w", w), ("delta", delta)] {
            if !(v > 0.0) {
                return Err(GeometryError::NonPositive(name, v));
            }
        }
        let tlen1 = (1.0 + delta) / ell;
        let tlen2 = (1.0 + delta) / w;
        if tlen1 + tlen2 >= 1.0 {
            return Err(GeometryError::NonPositive("1 - tlen1 - tlen2", 1.0 - tlen1 - tlen2));
        }
        Ok(Self { sigma, ell, w, tlen1, tlen2 })
    }

    /// Action rectangle `S` as `([lo1, hi1], [lo2, hi2])`.
    pub fn action_box(&self) -> ([f64; 2], [f64; 2]) {
        ([self.sigma, self.ell + self.sigma], [self.sigma, self.w + self.sigma])
    }

    /// Angle rectangle `T`.
    pub fn angle_box(&self) -> ([f64; 2], [f64; 2]) {
        ([0.0, self.tlen1], [0.0, self.tlen2])
    }
}

fn interval_signed(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        x - lo
    } else if x > hi {
        hi - x
    } else {
        (x - lo).min(hi - x)
    }
}

fn angle_interval_signed(theta: f64, len: f64) -> f64 {
    let t = reduce_angle(theta);
    if t <= len {
        t.min(len - t)
    } else {
        -((t - len).min(1.0 - t))
    }
}

/// Signed L∞ margin of `p` relative to the open box `S x T`: positive
/// inside (distance to the boundary), negative outside (minus the
/// distance to the closure), zero on the boundary. Angles use the flat
/// circle metric.
pub fn window_membership(p: &PolarPoint, win: &Window) -> f64 {
    let (s1, s2) = win.action_box();
    let d = [
        angle_interval_signed(p.theta1, win.tlen1),
        interval_signed(p.r1, s1[0], s1[1]),
        angle_interval_signed(p.theta2, win.tlen2),
        interval_signed(p.r2, s2[0], s2[1]),
    ];
    if d.iter().all(|&x| x > 0.0) {
        d.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        -d.iter().filter(|&&x| x < 0.0).map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Closed curve `s ∈ [0, 1] ↦ PolarPoint`, stored as samples with the
/// closing sample repeated (equal to the first modulo angle wrap).
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    samples: Vec<PolarPoint>,
}

const CLOSURE_TOL: f64 = 1e-9;

impl Loop {
    pub fn from_samples(samples: Vec<PolarPoint>) -> Result<Self, GeometryError> {
        if samples.len() < 3 {
            return Err(GeometryError::TooFewSamples(3));
        }
        let first = samples[0];
        let last = samples[samples.len() - 1];
        let gap = [
            angle_delta(first.theta1, last.theta1).abs(),
            (first.r1 - last.r1).abs(),
            angle_delta(first.theta2, last.theta2).abs(),
            (first.r2 - last.r2).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if gap > CLOSURE_TOL {
            return Err(GeometryError::NotClosed(gap));
        }
        Ok(Self { samples })
    }

    /// Samples `eval` at `s = i / n`, `i = 0..=n`.
    pub fn sample<F>(n: usize, eval: F) -> Result<Self, GeometryError>
    where
        F: Fn(f64) -> PolarPoint,
    {
        let samples = (0..=n).map(|i| eval(i as f64 / n as f64)).collect();
        Self::from_samples(samples)
    }

    pub fn samples(&self) -> &[PolarPoint] {
        &self.samples
    }

    /// Number of segments.
    pub fn segments(&self) -> usize {
        self.samples.len() - 1
    }

    /// CSV rows `s,theta1,r1,theta2,r2` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.segments();
        let mut out = String::from("s,theta1,r1,theta2,r2\n");
        for (i, p) in self.samples.iter().enumerate() {
            let s = i as f64 / n as f64;
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s, p.theta1, p.r1, p.theta2, p.r2
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, GeometryError> {
        let mut samples = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('s') {
                continue;
            }
            let fields: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let fields = fields.map_err(|e| GeometryError::Csv { line: line_no + 1, reason: e.to_string() })?;
            if fields.len() != 5 {
                return Err(GeometryError::Csv {
                    line: line_no + 1,
                    reason: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            samples.push(PolarPoint { theta1: fields[1], r1: fields[2], theta2: fields[3], r2: fields[4] });
        }
        Self::from_samples(samples)
    }
}

/// Result of a Liouville line integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineIntegral {
    pub value: f64,
    /// Richardson estimate `|I_n - I_{n/2}| / 3` (zero when the loop has
    /// an odd segment count).
    pub error_estimate: f64,
}

fn trapezoid_liouville(samples: &[PolarPoint], stride: usize) -> Result<f64, GeometryError> {
    let mut acc = 0.0;
    let mut i = 0;
    while i + stride < samples.len() {
        let a = &samples[i];
        let b = &samples[i + stride];
        let d1 = angle_delta(a.theta1, b.theta1);
        let d2 = angle_delta(a.theta2, b.theta2);
        let jump = d1.abs().max(d2.abs());
        // nearest-lift is ambiguous at exactly half a turn
        if jump >= 0.5 - 1e-12 {
            return Err(GeometryError::UnwrapAmbiguous { index: i, next: i + stride, jump });
        }
        acc += 0.5 * (a.r1 + b.r1) * d1 + 0.5 * (a.r2 + b.r2) * d2;
        i += stride;
    }
    Ok(acc)
}

/// `∮ R1 dθ1 + R2 dθ2` along the sampled loop, by the trapezoid rule with
/// nearest-lift angle unwrapping.
pub fn liouville_integral(lp: &Loop, quadrature_n: usize) -> Result<LineIntegral, GeometryError> {
    if quadrature_n < 16 || lp.segments() < 16 {
        return Err(GeometryError::TooFewSamples(16));
    }
    let samples = lp.samples();
    let value = trapezoid_liouville(samples, 1)?;
    let error_estimate = if lp.segments().is_multiple_of(2) {
        let coarse = trapezoid_liouville(samples, 2)?;
        (value - coarse).abs() / 3.0
    } else {
        0.0
    };
    Ok(LineIntegral { value, error_estimate })
}

/// Resamples an analytic loop at `quadrature_n` segments and integrates.
pub fn liouville_integral_of<F>(quadrature_n: usize, eval: F) -> Result<LineIntegral, GeometryError>
where
    F: Fn(f64) -> PolarPoint,
{
    let lp = Loop::sample(quadrature_n, eval)?;
    liouville_integral(&lp, quadrature_n)
}

/// Max-abs entry of `DᵀΩD − Ω`, with `D` the central finite-difference
/// Jacobian of `map` at `p` in coordinates `(θ1, R1, θ2, R2)` and `Ω` the
/// matrix of `Σ dRi ∧ dθi`.
pub fn symplectic_defect<F, E>(map: F, p: &PolarPoint, h: f64) -> Result<f64, GeometryError>
where
    F: Fn(&PolarPoint) -> Result<PolarPoint, E>,
    E: std::fmt::Display,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(GeometryError::BadStep);
    }
    if p.r1 <= h {
        return Err(GeometryError::Degenerate { index: 1, h });
    }
    if p.r2 <= h {
        return Err(GeometryError::Degenerate { index: 2, h });
    }
    let base = p.as_array();
    let mut jac = [[0.0f64; 4]; 4];
    for col in 0..4 {
        let mut plus = base;
        let mut minus = base;
        plus[col] += h;
        minus[col] -= h;
        let fp = map(&PolarPoint::from_raw(plus)).map_err(|e| GeometryError::MapFailed(e.to_string()))?;
        let fm = map(&PolarPoint::from_raw(minus)).map_err(|e| GeometryError::MapFailed(e.to_string()))?;
        let (a, b) = (fp.as_array(), fm.as_array());
        for row in 0..4 {
            let diff = if row % 2 == 0 { angle_delta(b[row], a[row]) } else { a[row] - b[row] };
            jac[row][col] = diff / (2.0 * h);
        }
    }
    let omega = omega_matrix();
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    acc += jac[a][i] * omega[a][b] * jac[b][j];
                }
            }
            worst = worst.max((acc - omega[i][j]).abs());
        }
    }
    Ok(worst)
}

/// `Ω[a][b] = ω(e_a, e_b)` in the order `(θ1, R1, θ2, R2)`.
fn omega_matrix() -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    // ω = dR1∧dθ1 + dR2∧dθ2, so ω(∂R, ∂θ) = 1.
    m[1][0] = 1.0;
    m[0][1] = -1.0;
    m[3][2] = 1.0;
    m[2][3] = -1.0;
    m
}
