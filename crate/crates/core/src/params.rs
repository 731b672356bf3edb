//! Parameter vector of the construction, its named inequality system, and
//! a max-min-slack solver.
//!
//! Slack convention: `slack = satisfied side − threshold`, so a constraint
//! holds iff its slack is strictly positive. Undefined quantities (for
//! example an off-slope with a vanishing denominator) produce NaN, which
//! counts as violated.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{off_slope, ProfileError, SlopeProfile};

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("parameter {0} must be positive and finite, got {1}")]
    NonPositive(&'static str, f64),
    #[error("eps must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("budget must be at least 1")]
    BadBudget,
    #[error("infeasible parameters; binding constraints: {}", format_trace(.0))]
    Infeasible(Vec<ConstraintSlack>),
    #[error("no feasible point found (best min slack {best:e}); binding constraints: {}", format_trace(.trace))]
    SolveFailed { best: f64, trace: Vec<ConstraintSlack> },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn format_trace(trace: &[ConstraintSlack]) -> String {
    trace.iter().map(|c| format!("{}={:.3e}", c.id, c.slack)).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    I1,
    I2,
    I3,
    I4,
    I5,
    I6,
    I7,
    I8,
    I9,
    I10,
    I11,
    I12,
    I13,
    I14,
    I15,
    I16,
    I17,
    I18,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 18] = [
        Self::I1,
        Self::I2,
        Self::I3,
        Self::I4,
        Self::I5,
        Self::I6,
        Self::I7,
        Self::I8,
        Self::I9,
        Self::I10,
        Self::I11,
        Self::I12,
        Self::I13,
        Self::I14,
        Self::I15,
        Self::I16,
        Self::I17,
        Self::I18,
    ];

    pub fn description(self) -> &'static str {
        match self {
            Self::I1 => "2 < ell < 2 + eps",
            Self::I2 => "w < 2",
            Self::I3 => "1/ell + 1/w < 1",
            Self::I4 => "ell + sigma < 2 + eps",
            Self::I5 => "w + sigma < 2",
            Self::I6 => "A = (1+delta)(1/ell + 1/w) < 1",
            Self::I7 => "1 + m_g > 0",
            Self::I8 => "c_g < eps",
            Self::I9 => "0 < c_h < sigma",
            Self::I10 => "tau < 1/M_h",
            Self::I11 => "2 + c_g - (1-tau)(1-c_h) > w + sigma",
            Self::I12 => "c_g > w(1 - 1/(1+delta)) + sigma - c_h",
            Self::I13 => "c_f > ell + sigma - 2",
            Self::I14 => "2 + m_f > 1 + c_g",
            Self::I15 => "1 + M_h < 2 + eps",
            Self::I16 => "c_g + (1-tau) M_h < eps",
            Self::I17 => "c_f < eps",
            Self::I18 => "A + 2 eta < 1",
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSlack {
    pub id: ConstraintId,
    pub slack: f64,
}

impl ConstraintSlack {
    pub fn holds(&self) -> bool {
        self.slack > 0.0
    }
}

/// The primary parameter vector. Derived quantities are recomputed on
/// demand and never read back from input files.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ParamSet {
    pub eps: f64,
    pub ell: f64,
    pub w: f64,
    pub sigma: f64,
    pub delta: f64,
    pub eta: f64,
    pub cg: f64,
    pub ch: f64,
    pub cf: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub m_g: f64,
    #[serde(rename = "M_h")]
    pub big_m_h: f64,
    pub m_f: f64,
}

impl Serialize for ParamSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ParamSet", 11)?;
        st.serialize_field("eps", &self.eps)?;
        st.serialize_field("ell", &self.ell)?;
        st.serialize_field("w", &self.w)?;
        st.serialize_field("sigma", &self.sigma)?;
        st.serialize_field("delta", &self.delta)?;
        st.serialize_field("eta", &self.eta)?;
        st.serialize_field("cg", &self.cg)?;
        st.serialize_field("ch", &self.ch)?;
        st.serialize_field("cf", &self.cf)?;
        st.serialize_field("tau", &self.tau)?;
        st.serialize_field("derived", &self.derived())?;
        st.end()
    }
}

/// The three profiles built from one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profiles {
    pub g: SlopeProfile,
    pub h: SlopeProfile,
    pub f: SlopeProfile,
}

impl ParamSet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        eps: f64,
        ell: f64,
        w: f64,
        sigma: f64,
        delta: f64,
        eta: f64,
        cg: f64,
        ch: f64,
        cf: f64,
        tau: f64,
    ) -> Result<Self, ParamsError> {
        let p = Self { eps, ell, w, sigma, delta, eta, cg, ch, cf, tau };
        p.validate()?;
        Ok(p)
    }

    /// Positivity and finiteness of every field.
    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, v) in self.fields() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamsError::NonPositive(name, v));
            }
        }
        Ok(())
    }

    pub fn fields(&self) -> [(&'static str, f64); 10] {
        [
            ("eps", self.eps),
            ("ell", self.ell),
            ("w", self.w),
            ("sigma", self.sigma),
            ("delta", self.delta),
            ("eta", self.eta),
            ("cg", self.cg),
            ("ch", self.ch),
            ("cf", self.cf),
            ("tau", self.tau),
        ]
    }

    /// Angle window side along θ2; also the plateau end of `h`.
    pub fn b(&self) -> f64 {
        (1.0 + self.delta) / self.w
    }

    /// Angle window side along θ1; also the plateau end of `f`.
    pub fn c(&self) -> f64 {
        (1.0 + self.delta) / self.ell
    }

    /// Plateau end of `g`. Defined as `B + C` so that `θ ∈ T̄` lands
    /// exactly on the plateau in floating point.
    pub fn a(&self) -> f64 {
        self.b() + self.c()
    }

    pub fn derived(&self) -> Derived {
        let (a, b, c) = (self.a(), self.b(), self.c());
        Derived {
            a,
            b,
            c,
            m_g: off_slope(a, self.cg, self.eta),
            big_m_h: off_slope(b, -(1.0 - self.ch), self.eta),
            m_f: off_slope(c, self.cf, self.eta),
        }
    }

    pub fn profiles(&self) -> Result<Profiles, ParamsError> {
        Ok(Profiles {
            g: SlopeProfile::new(self.a(), self.cg, self.eta)?,
            h: SlopeProfile::new(self.b(), -(1.0 - self.ch), self.eta)?,
            f: SlopeProfile::new(self.c(), self.cf, self.eta)?,
        })
    }

    pub fn with(&self, name: &str, value: f64) -> Self {
        let mut p = *self;
        match name {
            "eps" => p.eps = value,
            "ell" => p.ell = value,
            "w" => p.w = value,
            "sigma" => p.sigma = value,
            "delta" => p.delta = value,
            "eta" => p.eta = value,
            "cg" => p.cg = value,
            "ch" => p.ch = value,
            "cf" => p.cf = value,
            "tau" => p.tau = value,
            other => panic!("unknown parameter {other}"),
        }
        p
    }

    /// Errors with the violated constraints unless every slack is positive.
    pub fn require_feasible(&self) -> Result<(), ParamsError> {
        self.validate()?;
        let failing: Vec<_> = check_inequalities(self).into_iter().filter(|c| !c.holds()).collect();
        if failing.is_empty() {
            Ok(())
        } else {
            Err(ParamsError::Infeasible(failing))
        }
    }

    /// The hand-checked witness for `eps = 0.5`.
    pub fn ex1() -> Self {
        Self {
            eps: 0.5,
            ell: 2.2,
            w: 1.9,
            sigma: 0.05,
            delta: 0.001,
            eta: 0.0005,
            cg: 0.01,
            ch: 0.045,
            cf: 0.26,
            tau: 0.938,
        }
    }
}

fn slack_values(p: &ParamSet) -> [f64; 18] {
    let ParamSet { eps, ell, w, sigma, delta, eta, cg, ch, cf, tau } = *p;
    let d = p.derived();
    [
        (ell - 2.0).min(2.0 + eps - ell),
        2.0 - w,
        1.0 - 1.0 / ell - 1.0 / w,
        2.0 + eps - ell - sigma,
        2.0 - w - sigma,
        1.0 - d.a,
        1.0 + d.m_g,
        eps - cg,
        ch.min(sigma - ch),
        1.0 / d.big_m_h - tau,
        2.0 + cg - (1.0 - tau) * (1.0 - ch) - (w + sigma),
        cg - (w * (1.0 - 1.0 / (1.0 + delta)) + sigma - ch),
        cf - (ell + sigma - 2.0),
        2.0 + d.m_f - (1.0 + cg),
        2.0 + eps - (1.0 + d.big_m_h),
        eps - cg - (1.0 - tau) * d.big_m_h,
        eps - cf,
        1.0 - d.a - 2.0 * eta,
    ]
}

/// One record per constraint, in id order.
pub fn check_inequalities(p: &ParamSet) -> Vec<ConstraintSlack> {
    ConstraintId::ALL
        .iter()
        .zip(slack_values(p))
        .map(|(&id, slack)| ConstraintSlack { id, slack })
        .collect()
}

/// Smallest slack, NaN-propagating (NaN counts as `-inf`).
pub fn min_slack(p: &ParamSet) -> f64 {
    slack_values(p).into_iter().fold(f64::INFINITY, |acc, s| if s.is_nan() { f64::NEG_INFINITY } else { acc.min(s) })
}

/// The binding (smallest-slack) constraint.
pub fn binding(p: &ParamSet) -> ConstraintSlack {
    let mut all = check_inequalities(p);
    all.sort_by(|a, b| a.slack.partial_cmp(&b.slack).unwrap_or(std::cmp::Ordering::Less));
    all[0]
}

/// Feasible window for `tau` given everything else: `(lo, hi)` from
/// I11 and I16 below, I10 and `tau < 1` above.
pub fn tau_window(p: &ParamSet) -> (f64, f64) {
    let m_h = p.derived().big_m_h;
    let from_i11 = 1.0 - (2.0 + p.cg - p.w - p.sigma) / (1.0 - p.ch);
    let from_i16 = 1.0 - (p.eps - p.cg) / m_h;
    let lo = from_i11.max(from_i16).max(0.0);
    let hi = (1.0 / m_h).min(1.0);
    (lo, hi)
}

/// Feasible window for `c_f`: I13 below, I14 and I17 above.
pub fn cf_window(p: &ParamSet) -> (f64, f64) {
    let c = p.c();
    let lo = (p.ell + p.sigma - 2.0).max(0.0);
    let from_i14 = (1.0 - p.cg) * (1.0 - c - p.eta) / (c + p.eta);
    (lo, from_i14.min(p.eps))
}

/// Solver settings.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Maximum objective evaluations per start.
    pub budget: usize,
    pub delta_floor: f64,
    pub eta_floor: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { budget: 60_000, delta_floor: 1e-4, eta_floor: 1e-4, seed: 0x5eed }
    }
}

const NVARS: usize = 7;

struct Box7 {
    lo: [f64; NVARS],
    hi: [f64; NVARS],
}

impl Box7 {
    fn for_eps(eps: f64, opts: &SolveOptions) -> Self {
        // order: ell, w, sigma, delta, eta, ch, cg
        Box7 {
            lo: [2.0, 1.0, 0.0, opts.delta_floor, opts.eta_floor, 0.0, 0.0],
            hi: [2.0 + eps, 2.0, eps.min(1.0), 0.5, 0.05, 0.5, eps],
        }
    }

    fn point(&self, eps: f64, u: &[f64; NVARS]) -> ParamSet {
        let x: Vec<f64> = (0..NVARS).map(|i| self.lo[i] + u[i].clamp(0.0, 1.0) * (self.hi[i] - self.lo[i])).collect();
        let mut p = ParamSet {
            eps,
            ell: x[0],
            w: x[1],
            sigma: x[2],
            delta: x[3],
            eta: x[4],
            cg: x[6],
            ch: x[5],
            cf: 0.0,
            tau: 0.0,
        };
        let (tl, th) = tau_window(&p);
        p.tau = 0.5 * (tl + th);
        let (fl, fh) = cf_window(&p);
        p.cf = 0.5 * (fl + fh);
        p
    }
}

fn objective(b: &Box7, eps: f64, u: &[f64; NVARS]) -> f64 {
    let p = b.point(eps, u);
    let s = min_slack(&p);
    if p.validate().is_err() {
        s.min(-1.0)
    } else {
        s
    }
}

fn pattern_search(b: &Box7, eps: f64, start: [f64; NVARS], budget: usize, rng: &mut ChaCha8Rng) -> ([f64; NVARS], f64) {
    let mut u = start;
    let mut best = objective(b, eps, &u);
    let mut evals = 1;
    let mut step = 0.125;
    let mut dirs: Vec<[f64; NVARS]> = Vec::new();
    for i in 0..NVARS {
        for s in [1.0, -1.0] {
            let mut d = [0.0; NVARS];
            d[i] = s;
            dirs.push(d);
        }
    }
    for i in 0..NVARS {
        for j in i + 1..NVARS {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut d = [0.0; NVARS];
                d[i] = si;
                d[j] = sj;
                dirs.push(d);
            }
        }
    }
    while step > 1e-12 && evals < budget {
        let mut improved = false;
        for d in &dirs {
            let mut cand = u;
            for k in 0..NVARS {
                cand[k] = (cand[k] + step * d[k]).clamp(0.0, 1.0);
            }
            let v = objective(b, eps, &cand);
            evals += 1;
            if v > best {
                best = v;
                u = cand;
                improved = true;
            }
        }
        if !improved {
            // random directions escape kinks that axis and pair moves miss
            for _ in 0..2 * NVARS {
                let mut cand = u;
                for c in cand.iter_mut() {
                    *c = (*c + step * rng.gen_range(-1.0..=1.0)).clamp(0.0, 1.0);
                }
                let v = objective(b, eps, &cand);
                evals += 1;
                if v > best {
                    best = v;
                    u = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (u, best)
}

/// Searches for a parameter set maximizing the minimum slack for the given
/// `eps`. Deterministic in `(eps, opts)`.
pub fn solve_with(eps: f64, opts: &SolveOptions) -> Result<ParamSet, ParamsError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(ParamsError::BadEps(eps));
    }
    if opts.budget == 0 {
        return Err(ParamsError::BadBudget);
    }
    let b = Box7::for_eps(eps, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: [[f64; NVARS]; 4] = [
        [0.5, 0.9, 0.05, 0.01, 0.05, 0.05, 0.02],
        [0.3, 0.95, 0.02, 0.0, 0.0, 0.03, 0.01],
        [0.6, 0.85, 0.1, 0.02, 0.1, 0.1, 0.1],
        [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
    ];
    let mut best_u = starts[0];
    let mut best = f64::NEG_INFINITY;
    for s in starts {
        let (u, v) = pattern_search(&b, eps, s, opts.budget, &mut rng);
        if v > best {
            best = v;
            best_u = u;
        }
    }
    let p = b.point(eps, &best_u);
    if best > 0.0 && p.require_feasible().is_ok() {
        Ok(p)
    } else {
        let mut trace = check_inequalities(&p);
        trace.sort_by(|a, b| a.slack.partial_cmp(&b.slack).unwrap_or(std::cmp::Ordering::Less));
        trace.truncate(4);
        Err(ParamsError::SolveFailed { best, trace })
    }
}

pub fn solve(eps: f64, budget: usize) -> Result<ParamSet, ParamsError> {
    solve_with(eps, &SolveOptions { budget, ..SolveOptions::default() })
}
