//! Exact bookkeeping of second homology classes, areas and Maslov data
//! through blow-up, inflation, negative inflation and blow-down of
//! `S² × S²` along the `2d` intersection points of two degree-`d` spheres.
//!
//! Closed spheres carry a lattice class in the basis `(S₀, T₀, e₁..e₂d)`.
//! Disks with boundary on the Lagrangians have no such class; only their
//! intersection numbers are tracked, with unknown entries kept as `None`.

use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("degree must be at least 1")]
    BadDegree,
    #[error("k = {k}, l = {l} must lie in 0..={d}")]
    BadCounts { d: usize, k: usize, l: usize },
    #[error("blow-up capacity must be positive, got {0}")]
    BadEps(Rational64),
    #[error("{op} needs stage {expected}, state is at stage {found}")]
    StepOrder { op: &'static str, expected: &'static str, found: usize },
    #[error("assignment must send exactly {d} of {n} points to each disk")]
    BadAssignment { d: usize, n: usize },
    #[error("no class named {0} at this stage")]
    NoSuchClass(String),
    #[error("{name} has self-intersection {value}, expected {expected}")]
    SelfIntersection { name: String, value: String, expected: i64 },
    #[error("area of {0} would become nonpositive")]
    NegativeArea(String),
    #[error("intersection {0} • {1} is not determined")]
    Unknown(String, String),
    #[error("family {0} is not uniform")]
    NonUniformFamily(String),
    #[error("Maslov index {0} is odd")]
    OddMaslov(i64),
    #[error("e1 must have Maslov index 2 and area 1, got ({0}, {1})")]
    BadE1(i64, Rational64),
}

/// Integer class `s·S₀ + t·T₀ + Σ eᵢ·Eᵢ`; the pairing is
/// `s_x t_y + s_y t_x − Σ eᵢx eᵢy`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HClass {
    pub coeffs: Vec<i64>,
}

impl HClass {
    pub fn zero(d: usize) -> Self {
        Self { coeffs: vec![0; 2 + 2 * d] }
    }

    pub fn s0(d: usize) -> Self {
        let mut c = Self::zero(d);
        c.coeffs[0] = 1;
        c
    }

    pub fn t0(d: usize) -> Self {
        let mut c = Self::zero(d);
        c.coeffs[1] = 1;
        c
    }

    /// Exceptional class `Eᵢ`, `i` counted from zero.
    pub fn exceptional(d: usize, i: usize) -> Self {
        let mut c = Self::zero(d);
        c.coeffs[2 + i] = 1;
        c
    }

    pub fn dot(&self, other: &Self) -> i64 {
        let (x, y) = (&self.coeffs, &other.coeffs);
        x[0] * y[1] + x[1] * y[0] - x[2..].iter().zip(&y[2..]).map(|(a, b)| a * b).sum::<i64>()
    }

    pub fn add_scaled(&self, k: i64, other: &Self) -> Self {
        Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + k * b).collect() }
    }

    /// The pairing as a linear functional on coefficient vectors.
    fn functional(&self) -> Vec<i64> {
        let x = &self.coeffs;
        let mut f: Vec<i64> = x.iter().map(|v| -v).collect();
        f[0] = x[1];
        f[1] = x[0];
        f
    }
}

/// Named object of the construction. `Exc(i)` is the exceptional sphere
/// over the i-th point (renamed after blow-down, where it becomes a
/// fibre-class sphere); `Leaf(i)` is the foliation sphere through it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Name {
    F,
    G,
    E,
    E11,
    H,
    DInf,
    Exc(usize),
    Leaf(usize),
}

/// Which disk the leaf through a given point meets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Target {
    E,
    E11,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub name: Name,
    /// `None` for disks.
    pub class: Option<HClass>,
    pub area: Rational64,
    pub maslov: i64,
}

/// Immutable snapshot; every operation returns a new state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurgeryState {
    pub d: usize,
    pub k: usize,
    pub l: usize,
    pub eps: Rational64,
    pub step: usize,
    pub entries: Vec<Entry>,
    /// Symmetric intersection matrix indexed like `entries`.
    pub pairing: Vec<Vec<Option<i64>>>,
    /// Classes blown down so far.
    pub blown_down: Vec<HClass>,
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn step_err(op: &'static str, expected: &'static str, found: usize) -> LedgerError {
    LedgerError::StepOrder { op, expected, found }
}

impl SurgeryState {
    pub fn index(&self, n: Name) -> Option<usize> {
        self.entries.iter().position(|e| e.name == n)
    }

    pub fn entry(&self, n: Name) -> Result<&Entry, LedgerError> {
        self.index(n).map(|i| &self.entries[i]).ok_or_else(|| LedgerError::NoSuchClass(self.label(n)))
    }

    pub fn dot(&self, a: Name, b: Name) -> Result<Option<i64>, LedgerError> {
        let i = self.index(a).ok_or_else(|| LedgerError::NoSuchClass(self.label(a)))?;
        let j = self.index(b).ok_or_else(|| LedgerError::NoSuchClass(self.label(b)))?;
        Ok(self.pairing[i][j])
    }

    fn known(&self, i: usize, j: usize) -> Result<i64, LedgerError> {
        self.pairing[i][j]
            .ok_or_else(|| LedgerError::Unknown(self.label(self.entries[i].name), self.label(self.entries[j].name)))
    }

    pub fn area(&self, n: Name) -> Result<Rational64, LedgerError> {
        Ok(self.entry(n)?.area)
    }

    pub fn maslov(&self, n: Name) -> Result<i64, LedgerError> {
        Ok(self.entry(n)?.maslov)
    }

    /// Display label of a class at the current stage.
    pub fn label(&self, n: Name) -> String {
        let hat = self.step >= 1;
        let x = self.step >= 4;
        match n {
            Name::F => if hat { "Fhat" } else { "F" }.into(),
            Name::G => if hat { "Ghat" } else { "G" }.into(),
            Name::E => if x { "E^X" } else { "E" }.into(),
            Name::E11 => if x { "E11^X" } else { "E11" }.into(),
            Name::H => if hat { "Hhat" } else { "H" }.into(),
            Name::DInf => "Dinf".into(),
            Name::Exc(i) => format!("{}_{}", if x { "calH" } else { "calE" }, i + 1),
            Name::Leaf(i) => format!("{}_{}", if hat { "Hhat" } else { "H" }, i + 1),
        }
    }

    /// Checks every sphere–sphere entry against the lattice pairing.
    pub fn lattice_consistent(&self) -> bool {
        self.entries.iter().enumerate().all(|(i, a)| {
            self.entries.iter().enumerate().all(|(j, b)| match (&a.class, &b.class) {
                (Some(x), Some(y)) => self.pairing[i][j] == Some(x.dot(y)),
                _ => true,
            })
        })
    }

    /// Rank of the current second homology lattice: the ambient rank less
    /// the rank of the classes already blown down.
    pub fn lattice_rank(&self) -> usize {
        let ambient = if self.step >= 1 { 2 + 2 * self.d } else { 2 };
        let rows: Vec<Vec<i64>> = self.blown_down.iter().map(HClass::functional).collect();
        ambient - rank(&rows)
    }

    /// Rank of the span of the named sphere classes.
    pub fn sphere_span_rank(&self) -> usize {
        let rows: Vec<Vec<i64>> = self.entries.iter().filter_map(|e| e.class.as_ref().map(|c| c.coeffs.clone())).collect();
        rank(&rows)
    }
}

/// Rank over ℚ by fraction-free elimination.
fn rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rk = 0;
    for col in 0..ncols {
        let Some(p) = (rk..m.len()).find(|&i| m[i][col] != 0) else { continue };
        m.swap(rk, p);
        for i in rk + 1..m.len() {
            let (a, b) = (m[rk][col], m[i][col]);
            if b != 0 {
                let pivot = m[rk].clone();
                for (x, y) in m[i].iter_mut().zip(&pivot) {
                    *x = *x * a - y * b;
                }
                let g = m[i].iter().fold(0i128, |g, &v| gcd(g, v.abs()));
                if g > 1 {
                    m[i].iter_mut().for_each(|v| *v /= g);
                }
            }
        }
        rk += 1;
    }
    rk
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// The configuration before any surgery: the spheres `F`, `G` of class
/// `S₀ + d T₀`, the disks `𝔼`, `E₁,₁`, `D∞`, and a generic leaf `H`.
pub fn init_state(d: usize, k: usize, l: usize, eps: Rational64) -> Result<SurgeryState, LedgerError> {
    if d == 0 {
        return Err(LedgerError::BadDegree);
    }
    if k > d || l > d {
        return Err(LedgerError::BadCounts { d, k, l });
    }
    if eps <= Rational64::zero() {
        return Err(LedgerError::BadEps(eps));
    }
    let di = d as i64;
    let fg = HClass::s0(d).add_scaled(di, &HClass::t0(d));
    let sphere = |name, class: HClass, area, maslov| Entry { name, class: Some(class), area, maslov };
    let disk = |name, area| Entry { name, class: None, area, maslov: 2 };
    let entries = vec![
        sphere(Name::F, fg.clone(), r(2 + 2 * di), 4 + 4 * di),
        sphere(Name::G, fg, r(2 + 2 * di), 4 + 4 * di),
        disk(Name::E, r(1)),
        disk(Name::E11, r(1)),
        sphere(Name::H, HClass::t0(d), r(2), 4),
        disk(Name::DInf, r(1)),
    ];
    let (ki, li) = (k as i64, l as i64);
    // F, G, E, E11, H, D∞
    let u = None;
    let pairing = vec![
        vec![Some(2 * di), Some(2 * di), Some(ki), Some(li), Some(1), Some(1)],
        vec![Some(2 * di), Some(2 * di), Some(di - ki), Some(di - li), Some(1), Some(0)],
        vec![Some(ki), Some(di - ki), u, Some(0), u, u],
        vec![Some(li), Some(di - li), Some(0), u, u, u],
        vec![Some(1), Some(1), u, u, Some(0), u],
        vec![Some(1), Some(0), u, u, u, u],
    ];
    Ok(SurgeryState { d, k, l, eps, step: 0, entries, pairing, blown_down: Vec::new() })
}

/// Default assignment: the first `d` points lie on leaves meeting `𝔼`.
pub fn default_assignment(d: usize) -> Vec<Target> {
    (0..2 * d).map(|i| if i < d { Target::E } else { Target::E11 }).collect()
}

/// Blows up balls of capacity `eps` at the `2d` points of `F ∩ G`. The
/// leaf `Hᵢ` through point `i` meets the disk `assignment[i]` once.
pub fn blow_up(st: &SurgeryState, assignment: &[Target]) -> Result<SurgeryState, LedgerError> {
    if st.step != 0 {
        return Err(step_err("blow_up", "0", st.step));
    }
    let d = st.d;
    let n = 2 * d;
    if assignment.len() != n || assignment.iter().filter(|&&t| t == Target::E).count() != d {
        return Err(LedgerError::BadAssignment { d, n });
    }
    // the leaves Hᵢ, as classes before blowing up
    let base = st.entries.len();
    let mut entries = st.entries.clone();
    entries.extend((0..n).map(|i| Entry { name: Name::Leaf(i), class: Some(HClass::t0(d)), area: r(2), maslov: 4 }));
    let leaf_dot = |e: &Entry, t: Target| match e.name {
        Name::F | Name::G => Some(1),
        Name::E => Some((t == Target::E) as i64),
        Name::E11 => Some((t == Target::E11) as i64),
        _ => Some(0),
    };
    let pairing: Vec<Vec<Option<i64>>> = (0..base + n)
        .map(|a| {
            (0..base + n)
                .map(|b| match (a < base, b < base) {
                    (true, true) => st.pairing[a][b],
                    (true, false) => leaf_dot(&entries[a], assignment[b - base]),
                    (false, true) => leaf_dot(&entries[b], assignment[a - base]),
                    (false, false) => Some(0),
                })
                .collect()
        })
        .collect();
    // multiplicity of each object at point j
    let mult = |e: &Entry, j: usize| -> i64 {
        match e.name {
            Name::F | Name::G => 1,
            Name::Leaf(i) => (i == j) as i64,
            _ => 0,
        }
    };
    let eps = st.eps;
    let m = entries.len();
    let mut out_pairing = vec![vec![None; m + n]; m + n];
    for a in 0..m {
        for b in 0..m {
            let c: i64 = (0..n).map(|j| mult(&entries[a], j) * mult(&entries[b], j)).sum();
            out_pairing[a][b] = pairing[a][b].map(|v| v - c);
        }
        for j in 0..n {
            let v = Some(mult(&entries[a], j));
            out_pairing[a][m + j] = v;
            out_pairing[m + j][a] = v;
        }
    }
    for j in 0..n {
        for i in 0..n {
            out_pairing[m + j][m + i] = Some(if i == j { -1 } else { 0 });
        }
    }
    let mut out_entries: Vec<Entry> = entries
        .iter()
        .map(|e| {
            let total: i64 = (0..n).map(|j| mult(e, j)).sum();
            let class = e.class.as_ref().map(|c| {
                (0..n).fold(c.clone(), |acc, j| acc.add_scaled(-mult(e, j), &HClass::exceptional(d, j)))
            });
            Entry { name: e.name, class, area: e.area - eps * r(total), maslov: e.maslov - 2 * total }
        })
        .collect();
    for j in 0..n {
        out_entries.push(Entry { name: Name::Exc(j), class: Some(HClass::exceptional(d, j)), area: eps, maslov: 2 });
    }
    // order: originals, Eᵢ, Ĥᵢ
    let mut order: Vec<usize> = (0..base).collect();
    order.extend(m..m + n);
    order.extend(base..m);
    let entries = order.iter().map(|&i| out_entries[i].clone()).collect::<Vec<_>>();
    let pairing = order.iter().map(|&i| order.iter().map(|&j| out_pairing[i][j]).collect()).collect();
    for e in &entries {
        if e.area <= Rational64::zero() {
            return Err(LedgerError::NegativeArea(st.label(e.name)));
        }
    }
    Ok(SurgeryState { entries, pairing, step: 1, ..st.clone() })
}

fn shift_areas(st: &SurgeryState, along: Name, amount: Rational64) -> Result<SurgeryState, LedgerError> {
    let a = st.index(along).ok_or_else(|| LedgerError::NoSuchClass(st.label(along)))?;
    let mut out = st.clone();
    for (i, e) in out.entries.iter_mut().enumerate() {
        let x = st.known(i, a)?;
        e.area += amount * r(x);
        if e.area <= Rational64::zero() {
            return Err(LedgerError::NegativeArea(st.label(e.name)));
        }
    }
    Ok(out)
}

/// Inflation along a square-zero sphere: `area(C) += capacity · (C • along)`.
pub fn inflate(st: &SurgeryState, along: Name, capacity: Rational64) -> Result<SurgeryState, LedgerError> {
    if !(1..=2).contains(&st.step) {
        return Err(step_err("inflate", "1 or 2", st.step));
    }
    let self_int = st.dot(along, along)?;
    if self_int != Some(0) {
        return Err(LedgerError::SelfIntersection { name: st.label(along), value: fmt_opt(self_int), expected: 0 });
    }
    let mut out = shift_areas(st, along, capacity)?;
    out.step = 2;
    Ok(out)
}

/// Negative inflation along an exceptional sphere:
/// `area(C) += size · (C • along)`.
pub fn negative_inflate(st: &SurgeryState, along: Name, size: Rational64) -> Result<SurgeryState, LedgerError> {
    if !(2..=3).contains(&st.step) {
        return Err(step_err("negative_inflate", "2 or 3", st.step));
    }
    let self_int = st.dot(along, along)?;
    if self_int != Some(-1) {
        return Err(LedgerError::SelfIntersection { name: st.label(along), value: fmt_opt(self_int), expected: -1 });
    }
    let mut out = shift_areas(st, along, size)?;
    out.step = 3;
    Ok(out)
}

/// Blows down every `Ĥᵢ`: `C ↦ C + Σ (C • Ĥᵢ) Ĥᵢ`, with area and Maslov
/// index shifted by the same linear rule.
pub fn blow_down(st: &SurgeryState) -> Result<SurgeryState, LedgerError> {
    if st.step != 3 {
        return Err(step_err("blow_down", "3", st.step));
    }
    let hs: Vec<usize> = (0..st.entries.len()).filter(|&i| matches!(st.entries[i].name, Name::Leaf(_))).collect();
    for &h in &hs {
        let e = &st.entries[h];
        if st.pairing[h][h] != Some(-1) {
            return Err(LedgerError::SelfIntersection { name: st.label(e.name), value: fmt_opt(st.pairing[h][h]), expected: -1 });
        }
        if e.area <= Rational64::zero() {
            return Err(LedgerError::NegativeArea(st.label(e.name)));
        }
        if hs.iter().any(|&g| g != h && st.pairing[h][g] != Some(0)) {
            return Err(LedgerError::NonUniformFamily(st.label(e.name)));
        }
    }
    let keep: Vec<usize> = (0..st.entries.len()).filter(|i| !hs.contains(i)).collect();
    let mut entries = Vec::with_capacity(keep.len());
    for &a in &keep {
        let e = &st.entries[a];
        let mut next = e.clone();
        for &h in &hs {
            let x = st.known(a, h)?;
            next.area += r(x) * st.entries[h].area;
            next.maslov += x * st.entries[h].maslov;
            if let (Some(c), Some(hc)) = (&next.class, &st.entries[h].class) {
                next.class = Some(c.add_scaled(x, hc));
            }
        }
        entries.push(next);
    }
    let pairing = keep
        .iter()
        .map(|&a| {
            keep.iter()
                .map(|&b| {
                    let mut v = st.pairing[a][b]?;
                    for &h in &hs {
                        v += st.known(a, h).ok()? * st.known(b, h).ok()?;
                    }
                    Some(v)
                })
                .collect()
        })
        .collect();
    let mut blown_down = st.blown_down.clone();
    blown_down.extend(hs.iter().filter_map(|&h| st.entries[h].class.clone()));
    Ok(SurgeryState { entries, pairing, blown_down, step: 4, ..st.clone() })
}

fn fmt_opt(v: Option<i64>) -> String {
    v.map_or("*".into(), |x| x.to_string())
}

/// Runs the whole construction with the default assignment; returns the
/// initial state and the state after each of the four steps.
pub fn run_surgery(d: usize, k: usize, l: usize, eps: Rational64) -> Result<[SurgeryState; 5], LedgerError> {
    let s0 = init_state(d, k, l, eps)?;
    let s1 = blow_up(&s0, &default_assignment(d))?;
    let dd = r(d as i64);
    let s2 = inflate(&inflate(&s1, Name::F, dd)?, Name::G, dd)?;
    let s3 = (0..2 * d).try_fold(s2.clone(), |s, i| negative_inflate(&s, Name::Exc(i), eps))?;
    let s4 = blow_down(&s3)?;
    Ok([s0, s1, s2, s3, s4])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneEntry {
    pub name: String,
    pub area: Rational64,
    pub maslov: i64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub d: usize,
    /// `2·area = (d+1)·μ` for each named class.
    pub entries: Vec<MonotoneEntry>,
    pub holds: bool,
}

/// Checks `2·area = (d+1)·μ` for `𝔼^X`, `E₁,₁^X` and `D∞`, and for the
/// remaining spheres of the final manifold.
pub fn monotone_ratio_check(st: &SurgeryState) -> Result<MonotoneReport, LedgerError> {
    if st.step != 4 {
        return Err(step_err("monotone_ratio_check", "4", st.step));
    }
    let di = st.d as i64;
    let entries: Vec<MonotoneEntry> = st
        .entries
        .iter()
        .map(|e| MonotoneEntry {
            name: st.label(e.name),
            area: e.area,
            maslov: e.maslov,
            holds: r(2) * e.area == r((di + 1) * e.maslov),
        })
        .collect();
    let holds = entries.iter().all(|e| e.holds);
    Ok(MonotoneReport { d: st.d, entries, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisVerdict {
    /// `ω(c) = 1` after normalizing `μ(c) = 2`: the basis is monotone.
    Monotone,
    /// `ω(c) > 1`: keep `ĉ = c`.
    Kept,
    /// `ω(c) < 1`: `ĉ = c + 2(e₁ − c)`.
    Reflected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisDecision {
    pub verdict: BasisVerdict,
    /// Multiple of `e₁` added to bring `μ(c)` to 2.
    pub shift: i64,
    pub mu_e1: i64,
    pub om_e1: Rational64,
    pub mu_c_hat: i64,
    pub om_c_hat: Rational64,
}

/// Normalizes a second basis vector against `e₁ = (μ 2, ω 1)`.
pub fn monotone_basis_adjust(
    mu_e1: i64,
    om_e1: Rational64,
    mu_c: i64,
    om_c: Rational64,
) -> Result<BasisDecision, LedgerError> {
    for m in [mu_e1, mu_c] {
        if m % 2 != 0 {
            return Err(LedgerError::OddMaslov(m));
        }
    }
    if mu_e1 != 2 || om_e1 != r(1) {
        return Err(LedgerError::BadE1(mu_e1, om_e1));
    }
    let shift = (2 - mu_c) / 2;
    let (mu, om) = (mu_c + shift * mu_e1, om_c + r(shift) * om_e1);
    let (verdict, mu_c_hat, om_c_hat) = if om == om_e1 {
        (BasisVerdict::Monotone, mu, om)
    } else if om > om_e1 {
        (BasisVerdict::Kept, mu, om)
    } else {
        (BasisVerdict::Reflected, 2 * mu_e1 - mu, r(2) * om_e1 - om)
    };
    Ok(BasisDecision { verdict, shift, mu_e1, om_e1, mu_c_hat, om_c_hat })
}

// ---------------------------------------------------------------- tables

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableKind {
    Intersection,
    Area,
}

/// Row or column of a printed table: a single class, or an indexed
/// family shown as one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    One(Name),
    Exc,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub id: String,
    pub kind: TableKind,
    pub rows: Vec<String>,
    /// Lower-triangular for intersections (`cells[i].len() == i + 1`),
    /// one column for areas. `None` is an undetermined entry.
    pub cells: Vec<Vec<Option<Rational64>>>,
}

fn members(st: &SurgeryState, s: Slot) -> Vec<usize> {
    (0..st.entries.len())
        .filter(|&i| match (s, st.entries[i].name) {
            (Slot::One(n), m) => n == m,
            (Slot::Exc, Name::Exc(_)) | (Slot::Leaf, Name::Leaf(_)) => true,
            _ => false,
        })
        .collect()
}

fn slot_label(st: &SurgeryState, s: Slot) -> String {
    match s {
        Slot::One(n) => st.label(n),
        Slot::Exc => format!("{{{}}}", st.label(Name::Exc(0)).trim_end_matches("_1").to_string() + "_i"),
        Slot::Leaf => format!("{{{}}}", st.label(Name::Leaf(0)).trim_end_matches("_1").to_string() + "_i"),
    }
}

/// Family × class sums over the family; family × family gives the common
/// per-index value and requires off-index entries to vanish.
fn slot_pair(st: &SurgeryState, a: Slot, b: Slot) -> Result<Option<Rational64>, LedgerError> {
    let (ia, ib) = (members(st, a), members(st, b));
    if ia.is_empty() || ib.is_empty() {
        return Err(LedgerError::NoSuchClass(format!("{}/{}", slot_label(st, a), slot_label(st, b))));
    }
    let fam = |s| !matches!(s, Slot::One(_));
    if fam(a) && fam(b) {
        if ia.len() != ib.len() {
            return Err(LedgerError::NonUniformFamily(slot_label(st, a)));
        }
        let diag = st.pairing[ia[0]][ib[0]];
        for (x, &i) in ia.iter().enumerate() {
            for (y, &j) in ib.iter().enumerate() {
                let want = if x == y { diag } else { Some(0) };
                if st.pairing[i][j] != want {
                    return Err(LedgerError::NonUniformFamily(slot_label(st, a)));
                }
            }
        }
        return Ok(diag.map(r));
    }
    let mut total = 0;
    for &i in &ia {
        for &j in &ib {
            match st.pairing[i][j] {
                Some(v) => total += v,
                None => return Ok(None),
            }
        }
    }
    Ok(Some(r(total)))
}

fn slot_area(st: &SurgeryState, s: Slot) -> Result<Rational64, LedgerError> {
    let ids = members(st, s);
    let a = st.entries[ids[0]].area;
    if ids.iter().any(|&i| st.entries[i].area != a) {
        return Err(LedgerError::NonUniformFamily(slot_label(st, s)));
    }
    Ok(a)
}

fn build_table(st: &SurgeryState, id: &str, kind: TableKind, slots: &[Slot]) -> Result<Table, LedgerError> {
    let rows = slots.iter().map(|&s| slot_label(st, s)).collect();
    let cells = match kind {
        TableKind::Intersection => slots
            .iter()
            .enumerate()
            .map(|(i, &a)| slots[..=i].iter().map(|&b| slot_pair(st, a, b)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?,
        TableKind::Area => slots.iter().map(|&s| slot_area(st, s).map(|a| vec![Some(a)])).collect::<Result<Vec<_>, _>>()?,
    };
    Ok(Table { id: id.into(), kind, rows, cells })
}

/// All printed tables of the construction for the given data.
pub fn surgery_tables(d: usize, k: usize, l: usize, eps: Rational64) -> Result<Vec<Table>, LedgerError> {
    let [s0, s1, s2, s3, s4] = run_surgery(d, k, l, eps)?;
    use Slot::*;
    let initial = [One(Name::F), One(Name::G), One(Name::E), One(Name::E11), One(Name::H)];
    let mid = [One(Name::F), One(Name::G), One(Name::E), One(Name::E11), One(Name::H), Exc, Leaf];
    let last = [One(Name::F), One(Name::G), One(Name::E), One(Name::E11), One(Name::H), Exc];
    Ok(vec![
        build_table(&s0, "initial_intersections", TableKind::Intersection, &initial)?,
        build_table(&s0, "initial_areas", TableKind::Area, &initial)?,
        build_table(&s1, "step1_intersections", TableKind::Intersection, &mid)?,
        build_table(&s1, "step1_areas", TableKind::Area, &mid)?,
        build_table(&s2, "step2_areas", TableKind::Area, &mid)?,
        build_table(&s3, "step3_areas", TableKind::Area, &mid)?,
        build_table(&s4, "step4_intersections", TableKind::Intersection, &last)?,
        build_table(&s4, "step4_areas", TableKind::Area, &last)?,
    ])
}

/// `a/b` in lowest terms, plain integer when `b = 1`, `*` when unknown.
pub fn fmt_cell(v: Option<Rational64>) -> String {
    match v {
        None => "*".into(),
        Some(x) if x.is_integer() => x.to_integer().to_string(),
        Some(x) => format!("{}/{}", x.numer(), x.denom()),
    }
}

impl Table {
    fn col_labels(&self) -> Vec<String> {
        match self.kind {
            TableKind::Intersection => self.rows.clone(),
            TableKind::Area => vec!["area".into()],
        }
    }
}

/// Long-form CSV, one line per printed cell:
/// `table,row,col,value`.
pub fn tables_csv(tables: &[Table]) -> String {
    let mut s = String::from("table,row,col,value\n");
    for t in tables {
        let cols = t.col_labels();
        for (i, row) in t.cells.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                s += &format!("{},{},{},{}\n", t.id, t.rows[i], cols[j], fmt_cell(*v));
            }
        }
    }
    s
}

pub fn tables_markdown(tables: &[Table]) -> String {
    let mut s = String::new();
    for t in tables {
        let cols = t.col_labels();
        s += &format!("### {}\n\n|   | {} |\n|---|{}\n", t.id, cols.join(" | "), "---|".repeat(cols.len()));
        for (i, row) in t.cells.iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| fmt_cell(*v)).collect();
            cells.resize(cols.len(), String::new());
            s += &format!("| {} | {} |\n", t.rows[i], cells.join(" | "));
        }
        s += "\n";
    }
    s
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&tables_markdown(std::slice::from_ref(self)))
    }
}
