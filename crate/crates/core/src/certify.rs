//! Disjointness, containment and sweep-clearance certificates.
//!
//! Every claim is a statement `μ(θ) > 0` for all `θ` in a domain of the
//! angle torus, where `μ` is built from the graph fields:
//!
//! * disjointness of two graphs: `max(|ΔR1|, |ΔR2|)`;
//! * a sweep `base + t·rate` against a graph: the minimum over
//!   `t ∈ [t0, t1]` of the same quantity (computed exactly: the function of
//!   `t` is convex and piecewise linear);
//! * avoiding or staying inside an action box: signed L∞ distance.
//!
//! Two certificates are produced per claim. The uniform rule compares the
//! minimum over an `N × N` grid with `L · s · √2 / 2` for a global
//! Lipschitz bound `L`. The adaptive cover splits cells until, on each
//! cell, the value at one corner exceeds `Lu·du + Lv·dv`, with `Lu`, `Lv`
//! local bounds that vanish wherever the relevant profiles are constant.
//! Either success proves the claim; the adaptive cover is what makes small
//! transition widths tractable.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{liouville_integral_of, symplectic_defect, PolarPoint};
use crate::lplus::LPlus;
use crate::moves::{Form, PackedConfiguration, ProfileTag, StageSweep, TorusGraph};
use crate::params::ParamSet;
use crate::profiles::SlopeProfile;

pub const SCHEMA: &str = "lagpack.certificate/1";
const GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, sequential
    /// otherwise.
    #[default]
    Parallel,
}

fn map_indices<R, F>(n: usize, exec: Exec, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Group {
    D1,
    D2,
    D3,
    D4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Chart {
    /// `(u, v) = (θ1, θ2)`.
    Theta,
    /// `(u, v) = (θ1 + θ2, θ2)`.
    Diagonal,
}

impl Chart {
    pub fn to_theta(self, u: f64, v: f64) -> (f64, f64) {
        match self {
            Chart::Theta => (u, v),
            Chart::Diagonal => (u - v, v),
        }
    }

    /// Profile argument `a1 θ1 + a2 θ2` in chart coordinates.
    fn coeffs(self, tag: ProfileTag) -> (i64, i64) {
        let (a1, a2) = tag.argument();
        match self {
            Chart::Theta => (a1 as i64, a2 as i64),
            Chart::Diagonal => (a1 as i64, (a2 - a1) as i64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub chart: Chart,
    pub u: [f64; 2],
    pub v: [f64; 2],
    /// Full angle torus (grid excludes the repeated end node).
    pub periodic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimeMode {
    /// Minimum over `t` computed from the breakpoints of the convex
    /// piecewise-linear function of `t`.
    Exact,
    /// `M + 1` equally spaced times, minus the time-Lipschitz slack.
    Sampled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Test {
    Disjoint,
    /// Graph must avoid the closed box `[lo, hi]` of actions.
    Outside { lo: [f64; 2], hi: [f64; 2] },
    /// Fields must stay strictly inside the open box.
    Inside { lo: [f64; 2], hi: [f64; 2] },
}

/// One profile term of a claim in chart coordinates, contributing
/// `(ca + t·cb) · p'(cu·u + cv·v)` to field component `comp`.
#[derive(Debug, Clone, Copy)]
struct ChartTerm {
    profile: SlopeProfile,
    cu: i64,
    cv: i64,
    comp: usize,
    ca: f64,
    cb: f64,
}

/// One `μ > 0` statement over a domain.
#[derive(Debug, Clone)]
pub struct Claim {
    pub id: String,
    pub group: Group,
    /// Base fields (minus the obstacle for disjointness tests).
    pub a: [Form; 2],
    pub b: [Form; 2],
    pub t: [f64; 2],
    pub test: Test,
    pub domain: Domain,
    terms: Vec<ChartTerm>,
}

fn zero2() -> [Form; 2] {
    [Form::constant(0.0), Form::constant(0.0)]
}

fn chart_terms(chart: Chart, a: &[Form; 2], b: &[Form; 2]) -> Vec<ChartTerm> {
    let mut out: Vec<ChartTerm> = Vec::new();
    for (rate, forms) in [(false, a), (true, b)] {
        for (comp, f) in forms.iter().enumerate() {
            for t in &f.terms {
                if t.coef == 0.0 || t.profile.plateau_slope() == 0.0 {
                    continue;
                }
                let (cu, cv) = chart.coeffs(t.tag);
                let (ca, cb) = if rate { (0.0, t.coef) } else { (t.coef, 0.0) };
                // merge repeated profiles so cancelling coefficients are seen
                match out.iter_mut().find(|o| o.comp == comp && o.cu == cu && o.cv == cv && o.profile == t.profile) {
                    Some(o) => {
                        o.ca += ca;
                        o.cb += cb;
                    }
                    None => out.push(ChartTerm { profile: t.profile, cu, cv, comp, ca, cb }),
                }
            }
        }
    }
    out.retain(|t| t.ca != 0.0 || t.cb != 0.0);
    out
}

fn incidence(chart: Chart, a: &[Form; 2], b: &[Form; 2]) -> usize {
    chart_terms(chart, a, b).iter().map(|t| (t.cu != 0) as usize + (t.cv != 0) as usize).sum()
}

impl Claim {
    fn build(id: String, group: Group, a: [Form; 2], b: [Form; 2], t: [f64; 2], test: Test, domain: Option<Domain>) -> Self {
        let domain = domain.unwrap_or_else(|| {
            let chart = if incidence(Chart::Diagonal, &a, &b) < incidence(Chart::Theta, &a, &b) {
                Chart::Diagonal
            } else {
                Chart::Theta
            };
            Domain { chart, u: [0.0, 1.0], v: [0.0, 1.0], periodic: true }
        });
        let terms = chart_terms(domain.chart, &a, &b);
        Self { id, group, a, b, t, test, domain, terms }
    }

    /// Two graphs are disjoint.
    pub fn graphs(group: Group, x: &TorusGraph, y: &TorusGraph) -> Self {
        let a = [x.r1.clone().minus(&y.r1), x.r2.clone().minus(&y.r2)];
        Self::build(format!("{group:?}:{}|{}", x.name, y.name), group, a, zero2(), [0.0, 0.0], Test::Disjoint, None)
    }

    /// A sweep never meets a graph.
    pub fn sweep_vs(group: Group, sw: &StageSweep, obstacle: &TorusGraph) -> Self {
        let a = [sw.base.r1.clone().minus(&obstacle.r1), sw.base.r2.clone().minus(&obstacle.r2)];
        Self::build(
            format!("{group:?}:{}|{}", sw.name, obstacle.name),
            group,
            a,
            sw.rate.clone(),
            [sw.t0, sw.t1],
            Test::Disjoint,
            None,
        )
    }

    /// Over the closed angle window `T̄`, the graph avoids `closure(S)`.
    pub fn window(p: &ParamSet, g: &TorusGraph) -> Self {
        let test = Test::Outside { lo: [p.sigma, p.sigma], hi: [p.ell + p.sigma, p.w + p.sigma] };
        let domain = Domain { chart: Chart::Theta, u: [0.0, p.c()], v: [0.0, p.b()], periodic: false };
        Self::build(
            format!("D1:{}|SxT", g.name),
            Group::D1,
            [g.r1.clone(), g.r2.clone()],
            zero2(),
            [0.0, 0.0],
            test,
            Some(domain),
        )
    }

    /// Over the angle box of `L⁺`, the graph avoids its action box.
    pub fn lplus_vs(lp: &LPlus, g: &TorusGraph) -> Self {
        let rb = lp.r_box();
        let tb = lp.theta_box();
        let test = Test::Outside { lo: [rb[0][0], rb[1][0]], hi: [rb[0][1], rb[1][1]] };
        let domain = Domain { chart: Chart::Theta, u: tb[0], v: tb[1], periodic: false };
        Self::build(
            format!("D2:L+|{}", g.name),
            Group::D2,
            [g.r1.clone(), g.r2.clone()],
            zero2(),
            [0.0, 0.0],
            test,
            Some(domain),
        )
    }

    /// Graph or sweep stays inside `{0 < Ri < cap}`.
    pub fn contained(name: &str, base: &TorusGraph, rate: Option<(&[Form; 2], [f64; 2])>, cap: f64) -> Self {
        let (b, t) = match rate {
            Some((r, t)) => (r.clone(), t),
            None => (zero2(), [0.0, 0.0]),
        };
        Self::build(
            format!("D3:{name}"),
            Group::D3,
            [base.r1.clone(), base.r2.clone()],
            b,
            t,
            Test::Inside { lo: [0.0, 0.0], hi: [cap, cap] },
            None,
        )
    }

    fn depends(&self) -> (bool, bool) {
        (self.terms.iter().any(|t| t.cu != 0), self.terms.iter().any(|t| t.cv != 0))
    }

    fn constants(&self) -> ([f64; 2], [f64; 2]) {
        ([self.a[0].constant, self.a[1].constant], [self.b[0].constant, self.b[1].constant])
    }

    /// Field values at chart point `(u, v)`.
    fn fields(&self, u: f64, v: f64) -> ([f64; 2], [f64; 2]) {
        let (mut a, mut b) = self.constants();
        for t in &self.terms {
            let val = t.profile.eval_slope(t.cu as f64 * u + t.cv as f64 * v);
            a[t.comp] += t.ca * val;
            b[t.comp] += t.cb * val;
        }
        (a, b)
    }

    /// `(μ, t*)` from field values.
    fn margin_from(&self, a: [f64; 2], b: [f64; 2], mode: TimeMode) -> (f64, f64) {
        match self.test {
            Test::Disjoint => match mode {
                TimeMode::Exact => min_over_time(a, b, self.t),
                TimeMode::Sampled(m) => {
                    if self.t[0] == self.t[1] || (b[0] == 0.0 && b[1] == 0.0) {
                        return min_over_time(a, b, self.t);
                    }
                    let dt = (self.t[1] - self.t[0]) / m as f64;
                    let mut best = (f64::INFINITY, self.t[0]);
                    for k in 0..=m {
                        let t = self.t[0] + k as f64 * dt;
                        let v = (a[0] + t * b[0]).abs().max((a[1] + t * b[1]).abs());
                        if v < best.0 {
                            best = (v, t);
                        }
                    }
                    (best.0 - b[0].abs().max(b[1].abs()) * dt / 2.0, best.1)
                }
            },
            Test::Outside { lo, hi } => {
                let d = |x: f64, lo: f64, hi: f64| {
                    if x < lo {
                        lo - x
                    } else if x > hi {
                        x - hi
                    } else {
                        -(x - lo).min(hi - x)
                    }
                };
                (d(a[0], lo[0], hi[0]).max(d(a[1], lo[1], hi[1])), self.t[0])
            }
            Test::Inside { lo, hi } => {
                let mut best = (f64::INFINITY, self.t[0]);
                for t in self.t {
                    for i in 0..2 {
                        let r = a[i] + t * b[i];
                        let v = (r - lo[i]).min(hi[i] - r);
                        if v < best.0 {
                            best = (v, t);
                        }
                    }
                }
                best
            }
        }
    }

    /// `(μ, t*)` at chart point `(u, v)`.
    pub fn margin_at(&self, u: f64, v: f64, mode: TimeMode) -> (f64, f64) {
        let (a, b) = self.fields(u, v);
        self.margin_from(a, b, mode)
    }

    fn sampled_extra(&self, mode: TimeMode) -> f64 {
        match (mode, self.test) {
            (TimeMode::Sampled(m), Test::Disjoint) if self.t[1] > self.t[0] => (self.t[1] - self.t[0]) / m as f64 / 2.0,
            _ => 0.0,
        }
    }

    /// Combines per-term weights `w` into a bound on `μ`'s variation.
    ///
    /// At fixed `t` the field components are Lipschitz with constant
    /// `Σ |ca + t cb| w`, which is convex in `t`, so the endpoint maximum
    /// bounds every time; `μ` is 1-Lipschitz in the fields for the L∞
    /// norm. The sampled-time slack adds `dt/2 · Σ |cb| w`.
    fn combine(&self, w: impl Fn(&ChartTerm) -> f64, mode: TimeMode) -> f64 {
        let extra = self.sampled_extra(mode);
        let mut best: f64 = 0.0;
        for comp in 0..2 {
            for t in self.t {
                let l: f64 = self.terms.iter().filter(|x| x.comp == comp).map(|x| (x.ca + t * x.cb).abs() * w(x)).sum();
                best = best.max(l);
            }
        }
        let rate: f64 = (0..2)
            .map(|comp| self.terms.iter().filter(|x| x.comp == comp).map(|x| x.cb.abs() * w(x)).sum::<f64>())
            .fold(0.0, f64::max);
        best + extra * rate
    }

    /// Per-axis Lipschitz bounds of `μ` on a chart cell.
    fn cell_lipschitz(&self, u0: f64, du: f64, v0: f64, dv: f64, mode: TimeMode) -> (f64, f64) {
        let k: Vec<f64> = self
            .terms
            .iter()
            .map(|t| {
                let (cu, cv) = (t.cu as f64, t.cv as f64);
                let x0 = cu * u0 + cv * v0;
                let x1 = cu * (u0 + du) + cv * v0;
                let x2 = cu * u0 + cv * (v0 + dv);
                let x3 = cu * (u0 + du) + cv * (v0 + dv);
                let lo = x0.min(x1).min(x2).min(x3);
                let hi = x0.max(x1).max(x2).max(x3);
                t.profile.curvature_bound_on(lo, hi)
            })
            .collect();
        if k.iter().all(|&x| x == 0.0) {
            return (0.0, 0.0);
        }
        let idx = |x: &ChartTerm| self.terms.iter().position(|y| std::ptr::eq(x, y)).unwrap();
        (
            self.combine(|x| k[idx(x)] * (x.cu as f64).abs(), mode),
            self.combine(|x| k[idx(x)] * (x.cv as f64).abs(), mode),
        )
    }

    /// Global Lipschitz bound of `μ` in chart coordinates (Euclidean).
    pub fn lipschitz_bound(&self, mode: TimeMode) -> f64 {
        self.combine(|x| ((x.cu * x.cu + x.cv * x.cv) as f64).sqrt() * x.profile.curvature_bound(), mode)
    }
}

/// `min_{t ∈ [t0, t1]} max(|a1 + t b1|, |a2 + t b2|)` and a minimizer.
pub fn min_over_time(a: [f64; 2], b: [f64; 2], t: [f64; 2]) -> (f64, f64) {
    let f = |s: f64| (a[0] + s * b[0]).abs().max((a[1] + s * b[1]).abs());
    let mut best = (f(t[0]), t[0]);
    if t[1] == t[0] {
        return best;
    }
    let mut consider = |s: f64| {
        if s > t[0] && s <= t[1] {
            let v = f(s);
            if v < best.0 {
                best = (v, s);
            }
        }
    };
    consider(t[1]);
    for i in 0..2 {
        if b[i] != 0.0 {
            consider(-a[i] / b[i]);
        }
    }
    if b[0] != b[1] {
        consider((a[1] - a[0]) / (b[0] - b[1]));
    }
    if b[0] != -b[1] {
        consider(-(a[0] + a[1]) / (b[0] + b[1]));
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Policy {
    /// Uniform-grid rule only.
    UniformOnly,
    /// Adaptive cover starting from `base_cells` per axis; `cell_budget`
    /// caps the cells spent inside any one starting cell.
    Adaptive { base_cells: usize, max_depth: u32, cell_budget: u64 },
}

impl Default for Policy {
    fn default() -> Self {
        Policy::Adaptive { base_cells: 64, max_depth: 80, cell_budget: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertifyOptions {
    pub grid_n: usize,
    pub quadrature_n: usize,
    pub time_mode: TimeMode,
    pub policy: Policy,
    pub symplectic_points: usize,
    pub fd_step: f64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            grid_n: 4096,
            quadrature_n: 100_000,
            time_mode: TimeMode::Exact,
            policy: Policy::default(),
            symplectic_points: 1000,
            fd_step: 1e-5,
            seed: 2024,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstPoint {
    pub theta1: f64,
    pub theta2: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub claim: String,
    pub group: Group,
    pub method: &'static str,
    pub chart: Chart,
    pub grid_n: usize,
    pub lipschitz_bound: f64,
    /// Minimum of `μ` over the grid nodes.
    pub min_margin: f64,
    /// `L · s · √2 / 2`.
    pub uniform_slack: f64,
    pub uniform_rule_certified: bool,
    /// Proven lower bound for `μ` on the whole domain (meaningful only
    /// when certified).
    pub margin_lower_bound: f64,
    pub certified: bool,
    pub worst_point: WorstPoint,
    pub cells_evaluated: u64,
    pub depth: u32,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct GridMin {
    margin: f64,
    i: usize,
    j: usize,
    t: f64,
}

fn better(a: GridMin, b: GridMin) -> GridMin {
    let ka = (a.margin, a.i, a.j);
    let kb = (b.margin, b.i, b.j);
    if kb.0 < ka.0 || (kb.0 == ka.0 && (kb.1, kb.2) < (ka.1, ka.2)) {
        b
    } else {
        a
    }
}

fn grid_min(claim: &Claim, n: usize, mode: TimeMode, exec: Exec) -> GridMin {
    let (dep_u, dep_v) = claim.depends();
    let d = &claim.domain;
    let count = |dep: bool| if !dep { 1 } else if d.periodic { n } else { n + 1 };
    let (nu, nv) = (count(dep_u), count(dep_v));
    let du = (d.u[1] - d.u[0]) / n as f64;
    let dv = (d.v[1] - d.v[0]) / n as f64;
    let periodic_unit = d.periodic && d.u == [0.0, 1.0] && d.v == [0.0, 1.0];
    // slope tables on the lattice k / n for the periodic unit torus
    let tables: Vec<Vec<f64>> = if periodic_unit {
        claim.terms.iter().map(|t| (0..n).map(|k| t.profile.eval_slope(k as f64 / n as f64)).collect()).collect()
    } else {
        Vec::new()
    };
    let (ca, cb) = claim.constants();
    let rows = map_indices(nu, exec, |i| {
        let mut best = GridMin { margin: f64::INFINITY, i: usize::MAX, j: usize::MAX, t: 0.0 };
        for j in 0..nv {
            let (a, b) = if periodic_unit {
                let (mut a, mut b) = (ca, cb);
                for (t, tab) in claim.terms.iter().zip(&tables) {
                    let val = tab[(t.cu * i as i64 + t.cv * j as i64).rem_euclid(n as i64) as usize];
                    a[t.comp] += t.ca * val;
                    b[t.comp] += t.cb * val;
                }
                (a, b)
            } else {
                claim.fields(d.u[0] + i as f64 * du, d.v[0] + j as f64 * dv)
            };
            let (m, t) = claim.margin_from(a, b, mode);
            best = better(best, GridMin { margin: m, i, j, t });
        }
        best
    });
    rows.into_iter().fold(GridMin { margin: f64::INFINITY, i: usize::MAX, j: usize::MAX, t: 0.0 }, better)
}

#[derive(Debug, Clone)]
struct CoverOutcome {
    lower: f64,
    cells: u64,
    depth: u32,
    failure: Option<(String, f64, f64)>,
}

fn cover_cell(claim: &Claim, start: (f64, f64, f64, f64), mode: TimeMode, max_depth: u32, budget: u64) -> CoverOutcome {
    let mut out = CoverOutcome { lower: f64::INFINITY, cells: 0, depth: 0, failure: None };
    let mut stack = vec![(start.0, start.1, start.2, start.3, 0u32)];
    while let Some((u, v, du, dv, depth)) = stack.pop() {
        out.cells += 1;
        out.depth = out.depth.max(depth);
        let (mu, _) = claim.margin_at(u, v, mode);
        if !(mu > 0.0) {
            out.failure = Some((format!("counterexample: margin {mu:e}"), u, v));
            return out;
        }
        let (lu, lv) = claim.cell_lipschitz(u, du, v, dv, mode);
        let bound = mu - (lu * du + lv * dv);
        if bound > GUARD {
            out.lower = out.lower.min(bound);
            continue;
        }
        if depth >= max_depth || out.cells >= budget {
            let why = if depth >= max_depth { "max depth" } else { "cell budget" };
            out.failure = Some((format!("unresolved at {why}: margin {mu:e}, slack {:e}", lu * du + lv * dv), u, v));
            return out;
        }
        if lu * du >= lv * dv {
            let h = du / 2.0;
            stack.push((u + h, v, h, dv, depth + 1));
            stack.push((u, v, h, dv, depth + 1));
        } else {
            let h = dv / 2.0;
            stack.push((u, v + h, du, h, depth + 1));
            stack.push((u, v, du, h, depth + 1));
        }
    }
    out
}

fn cover(claim: &Claim, base_cells: usize, mode: TimeMode, max_depth: u32, budget: u64, exec: Exec) -> CoverOutcome {
    let (dep_u, dep_v) = claim.depends();
    let d = &claim.domain;
    let ku = if dep_u { base_cells.max(1) } else { 1 };
    let kv = if dep_v { base_cells.max(1) } else { 1 };
    let du = (d.u[1] - d.u[0]) / ku as f64;
    let dv = (d.v[1] - d.v[0]) / kv as f64;
    let parts = map_indices(ku * kv, exec, |idx| {
        let (i, j) = (idx / kv, idx % kv);
        let u = d.u[0] + i as f64 * du;
        let v = d.v[0] + j as f64 * dv;
        // last cells end exactly on the domain edge
        let wu = if i + 1 == ku { d.u[1] - u } else { du };
        let wv = if j + 1 == kv { d.v[1] - v } else { dv };
        cover_cell(claim, (u, v, wu, wv), mode, max_depth, budget)
    });
    let mut total = CoverOutcome { lower: f64::INFINITY, cells: 0, depth: 0, failure: None };
    for p in parts {
        total.lower = total.lower.min(p.lower);
        total.cells += p.cells;
        total.depth = total.depth.max(p.depth);
        if total.failure.is_none() {
            total.failure = p.failure;
        }
    }
    total
}

/// Certifies one claim.
pub fn certify_claim(claim: &Claim, opts: &CertifyOptions) -> Certificate {
    let n = opts.grid_n.max(1);
    let mode = opts.time_mode;
    let gm = grid_min(claim, n, mode, opts.exec);
    let d = &claim.domain;
    let (dep_u, dep_v) = claim.depends();
    let step = |dep: bool, w: f64| if dep { w / n as f64 } else { 0.0 };
    let s = step(dep_u, d.u[1] - d.u[0]).max(step(dep_v, d.v[1] - d.v[0]));
    let lip = claim.lipschitz_bound(mode);
    let uniform_slack = lip * s * std::f64::consts::SQRT_2 / 2.0;
    let uniform_ok = gm.margin - uniform_slack > GUARD;
    let (u_w, v_w) = (
        if gm.i == usize::MAX { 0.0 } else { d.u[0] + gm.i as f64 * (d.u[1] - d.u[0]) / n as f64 },
        if gm.j == usize::MAX { 0.0 } else { d.v[0] + gm.j as f64 * (d.v[1] - d.v[0]) / n as f64 },
    );
    let (t1, t2) = d.chart.to_theta(u_w, v_w);
    let worst_point = WorstPoint { theta1: t1.rem_euclid(1.0), theta2: t2.rem_euclid(1.0), t: gm.t };

    let mut cert = Certificate {
        claim: claim.id.clone(),
        group: claim.group,
        method: "uniform",
        chart: d.chart,
        grid_n: n,
        lipschitz_bound: lip,
        min_margin: gm.margin,
        uniform_slack,
        uniform_rule_certified: uniform_ok,
        margin_lower_bound: if uniform_ok { gm.margin - uniform_slack } else { f64::NEG_INFINITY },
        certified: uniform_ok,
        worst_point,
        cells_evaluated: 0,
        depth: 0,
        failure: None,
    };
    if !(gm.margin > 0.0) {
        cert.failure = Some(format!("grid counterexample: margin {:e}", gm.margin));
        cert.certified = false;
        return cert;
    }
    match opts.policy {
        Policy::UniformOnly => {
            if !uniform_ok {
                cert.failure = Some(format!("uniform rule: margin {:e} <= slack {:e}", gm.margin, uniform_slack));
            }
        }
        Policy::Adaptive { base_cells, max_depth, cell_budget } => {
            let out = cover(claim, base_cells, mode, max_depth, cell_budget, opts.exec);
            cert.method = "adaptive";
            cert.cells_evaluated = out.cells;
            cert.depth = out.depth;
            match out.failure {
                None => {
                    cert.certified = true;
                    cert.margin_lower_bound = cert.margin_lower_bound.max(out.lower);
                }
                Some((why, u, v)) => {
                    if !uniform_ok {
                        let (a, b) = d.chart.to_theta(u, v);
                        cert.certified = false;
                        cert.failure = Some(format!("{why} near theta=({:.6}, {:.6})", a.rem_euclid(1.0), b.rem_euclid(1.0)));
                    }
                }
            }
        }
    }
    cert
}

fn exact_certificate(id: &str, group: Group, margin: f64) -> Certificate {
    Certificate {
        claim: id.to_string(),
        group,
        method: "exact",
        chart: Chart::Theta,
        grid_n: 0,
        lipschitz_bound: 0.0,
        min_margin: margin,
        uniform_slack: 0.0,
        uniform_rule_certified: margin > 0.0,
        margin_lower_bound: margin,
        certified: margin > 0.0,
        worst_point: WorstPoint { theta1: 0.0, theta2: 0.0, t: 0.0 },
        cells_evaluated: 1,
        depth: 0,
        failure: if margin > 0.0 { None } else { Some(format!("margin {margin:e}")) },
    }
}

/// The full claim inventory for one configuration.
pub fn build_claims(cfg: &PackedConfiguration, lp: &LPlus) -> Vec<Claim> {
    let p = &cfg.params;
    let cap = 2.0 + p.eps;
    let im = &cfg.images;
    let l11 = TorusGraph::product("L11", 1.0, 1.0);
    let l21 = TorusGraph::product("L21", 2.0, 1.0);
    let l22 = TorusGraph::product("L22", 2.0, 2.0);
    let mut claims = Vec::new();
    for g in im {
        claims.push(Claim::window(p, g));
    }
    for i in 0..4 {
        for j in i + 1..4 {
            claims.push(Claim::graphs(Group::D2, &im[i], &im[j]));
        }
    }
    for g in im {
        claims.push(Claim::lplus_vs(lp, g));
    }
    for g in im {
        claims.push(Claim::contained(&g.name, g, None, cap));
    }
    for sw in &cfg.sweeps {
        claims.push(Claim::contained(&format!("sweep:{}", sw.name), &sw.base, Some((&sw.rate, [sw.t0, sw.t1])), cap));
    }
    let sweep = |n: &str| cfg.sweep(n);
    for obs in [&l11, &l21, &l22] {
        claims.push(Claim::sweep_vs(Group::D4, sweep("G(L12)"), obs));
    }
    for obs in [&cfg.phi_g_l12, &l21, &l22] {
        claims.push(Claim::sweep_vs(Group::D4, sweep("H(L11)"), obs));
    }
    for track in ["H(pair:L11)", "H(pair:L12)"] {
        for obs in [&l21, &l22] {
            claims.push(Claim::sweep_vs(Group::D4, sweep(track), obs));
        }
    }
    for obs in [&im[0], &im[1], &l22] {
        claims.push(Claim::sweep_vs(Group::D4, sweep("F(L21)"), obs));
    }
    claims
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralityRecord {
    pub torus: String,
    pub expected: [f64; 2],
    pub measured: [f64; 2],
    pub max_abs_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymplecticRecord {
    pub stage: String,
    pub points: usize,
    pub max_defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LPlusSummary {
    pub margin: f64,
    pub window_margin: f64,
    pub exponents: [f64; 2],
    pub areas: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct PackingCertificate {
    pub schema: &'static str,
    pub params: ParamSet,
    pub options: CertifyOptions,
    pub lplus: LPlusSummary,
    pub counts: BTreeMap<Group, usize>,
    pub claims: Vec<Certificate>,
    pub integrality: Vec<IntegralityRecord>,
    pub symplecticity: Vec<SymplecticRecord>,
    /// Both tracks of the third stage share one rate, so their relative
    /// position is constant in time.
    pub intra_pair_rigid: bool,
    pub global_min_margin: f64,
    pub global_margin_lower_bound: f64,
    pub failing: Vec<String>,
    pub theorem_verified: bool,
}

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const SYMPLECTIC_TOL: f64 = 1e-6;

/// Generator integrals of each image and of `L⁺`.
pub fn integrality_summaries(cfg: &PackedConfiguration, lp: &LPlus, quadrature_n: usize) -> Vec<IntegralityRecord> {
    let mut out = Vec::new();
    let expected = [[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [2.0, 2.0]];
    for (g, e) in cfg.images.iter().zip(expected) {
        let mut measured = [0.0; 2];
        let mut err: f64 = 0.0;
        for base in [0.0, 0.613] {
            let a = liouville_integral_of(quadrature_n, g.theta1_generator(base)).map(|x| x.value).unwrap_or(f64::NAN);
            let b = liouville_integral_of(quadrature_n, g.theta2_generator(base)).map(|x| x.value).unwrap_or(f64::NAN);
            measured = [a, b];
            err = err.max((a - e[0]).abs()).max((b - e[1]).abs());
            if err.is_nan() {
                err = f64::INFINITY;
            }
        }
        out.push(IntegralityRecord { torus: g.name.clone(), expected: e, measured, max_abs_error: err, pass: err < INTEGRALITY_TOL });
    }
    let m = lp.generator_integrals(quadrature_n).unwrap_or([f64::NAN; 2]);
    let err = (m[0] - 1.0).abs().max((m[1] - 1.0).abs());
    let err = if err.is_nan() { f64::INFINITY } else { err };
    out.push(IntegralityRecord { torus: "L+".into(), expected: [1.0, 1.0], measured: m, max_abs_error: err, pass: err < INTEGRALITY_TOL });
    out
}

/// Finite-difference symplecticity of every stage map and of their
/// composition at random points.
pub fn symplectic_summaries(cfg: &PackedConfiguration, points: usize, h: f64, seed: u64) -> Vec<SymplecticRecord> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<PolarPoint> = (0..points)
        .map(|_| PolarPoint {
            theta1: rng.gen(),
            r1: rng.gen_range(1.2..2.4),
            theta2: rng.gen(),
            r2: rng.gen_range(1.2..2.4),
        })
        .collect();
    let names = ["G", "H1", "H2", "F"];
    let mut out: Vec<SymplecticRecord> = names
        .iter()
        .enumerate()
        .map(|(idx, name)| {
            let worst = pts
                .iter()
                .map(|p| symplectic_defect(|q: &PolarPoint| cfg.stage_map(idx, q), p, h).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            SymplecticRecord { stage: name.to_string(), points, max_defect: worst, pass: worst < SYMPLECTIC_TOL }
        })
        .collect();
    // the composition leaves the chart from part of the sampling box, so
    // it is checked on points where every stage is defined
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for _ in 0..100 * points {
        if used == points {
            break;
        }
        let p = PolarPoint { theta1: rng.gen(), r1: rng.gen_range(1.2..2.4), theta2: rng.gen(), r2: rng.gen_range(1.2..2.4) };
        if let Ok(d) = symplectic_defect(|q: &PolarPoint| cfg.composed_map(q), &p, h) {
            worst = worst.max(d);
            used += 1;
        }
    }
    let pass = used == points && worst < SYMPLECTIC_TOL;
    out.push(SymplecticRecord { stage: "composition".into(), points: used, max_defect: worst, pass });
    out
}

/// Runs every claim and summary.
pub fn certify_all(cfg: &PackedConfiguration, lp: &LPlus, opts: &CertifyOptions) -> PackingCertificate {
    let p = &cfg.params;
    let claims = build_claims(cfg, lp);
    let mut certs: Vec<Certificate> = claims.iter().map(|c| certify_claim(c, opts)).collect();
    let rb = lp.r_box();
    let cap = 2.0 + p.eps;
    let lplus_contain = rb[0][0].min(rb[1][0]).min(cap - rb[0][1]).min(cap - rb[1][1]);
    let pos = certs.iter().position(|c| c.group == Group::D4).unwrap_or(certs.len());
    certs.insert(pos, exact_certificate("D3:L+", Group::D3, lplus_contain));

    let mut counts = BTreeMap::new();
    for c in &certs {
        *counts.entry(c.group).or_insert(0) += 1;
    }
    let integrality = integrality_summaries(cfg, lp, opts.quadrature_n);
    let symplecticity = symplectic_summaries(cfg, opts.symplectic_points, opts.fd_step, opts.seed);
    let t1 = cfg.sweep("H(pair:L11)");
    let t2 = cfg.sweep("H(pair:L12)");
    let intra_pair_rigid = t1.rate == t2.rate && t1.t0 == t2.t0 && t1.t1 == t2.t1;

    let mut failing: Vec<String> = certs.iter().filter(|c| !c.certified).map(|c| c.claim.clone()).collect();
    failing.extend(integrality.iter().filter(|r| !r.pass).map(|r| format!("integrality:{}", r.torus)));
    failing.extend(symplecticity.iter().filter(|r| !r.pass).map(|r| format!("symplecticity:{}", r.stage)));
    if !intra_pair_rigid {
        failing.push("intra-pair".into());
    }
    let global_min_margin = certs.iter().map(|c| c.min_margin).fold(f64::INFINITY, f64::min);
    let global_margin_lower_bound = certs.iter().map(|c| c.margin_lower_bound).fold(f64::INFINITY, f64::min);
    let theorem_verified = failing.is_empty();
    PackingCertificate {
        schema: SCHEMA,
        params: *p,
        options: *opts,
        lplus: LPlusSummary {
            margin: lp.margin,
            window_margin: lp.window_margin(p),
            exponents: [lp.loops[0].p, lp.loops[1].p],
            areas: [lp.loops[0].area(), lp.loops[1].area()],
        },
        counts,
        claims: certs,
        integrality,
        symplecticity,
        intra_pair_rigid,
        global_min_margin,
        global_margin_lower_bound,
        failing,
        theorem_verified,
    }
}

/// Plain-text table of a packing certificate.
pub fn summary_table(pc: &PackingCertificate) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "{:<34} {:>12} {:>12} {:>11} {:>10}  status", "claim", "min margin", "lower bound", "L", "cells");
    for c in &pc.claims {
        let _ = writeln!(
            s,
            "{:<34} {:>12.4e} {:>12.4e} {:>11.3e} {:>10}  {}",
            c.claim,
            c.min_margin,
            c.margin_lower_bound,
            c.lipschitz_bound,
            c.cells_evaluated,
            if c.certified { "ok" } else { "FAIL" }
        );
    }
    for r in &pc.integrality {
        let _ = writeln!(s, "integrality {:<22} error {:.2e}  {}", r.torus, r.max_abs_error, if r.pass { "ok" } else { "FAIL" });
    }
    for r in &pc.symplecticity {
        let _ = writeln!(s, "symplectic  {:<22} defect {:.2e} {}", r.stage, r.max_defect, if r.pass { "ok" } else { "FAIL" });
    }
    let _ = writeln!(
        s,
        "global min margin {:.4e}, proven lower bound {:.4e}; theorem verified: {}",
        pc.global_min_margin, pc.global_margin_lower_bound, pc.theorem_verified
    );
    s
}
