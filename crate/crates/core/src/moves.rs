//! The three shear flows and the four-stage schedule.
//!
//! Every flow here has the form `R ↦ R + t ∇K(θ)` with angles fixed, so the
//! image of a product torus under any stage is a graph over the angle
//! torus. Fields of those graphs are kept symbolically as [`Form`]s: a
//! constant plus a sum of `coef · p'(a1 θ1 + a2 θ2)` terms, which is what
//! the certifier needs to bound Lipschitz constants locally.

use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{reduce_angle, PolarPoint};
use crate::params::{ConstraintSlack, ParamSet, ParamsError, Profiles};
use crate::profiles::SlopeProfile;

#[derive(Debug, Error, PartialEq)]
pub enum MovesError {
    #[error("flow leaves coordinate chart: r{index} = {value} <= 0")]
    LeavesChart { index: usize, value: f64 },
    #[error("infeasible parameters: {}", .0.iter().map(|c| c.id.to_string()).collect::<Vec<_>>().join(", "))]
    Infeasible(Vec<ConstraintSlack>),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

fn checked(p: PolarPoint) -> Result<PolarPoint, MovesError> {
    if !(p.r1 > 0.0) {
        return Err(MovesError::LeavesChart { index: 1, value: p.r1 });
    }
    if !(p.r2 > 0.0) {
        return Err(MovesError::LeavesChart { index: 2, value: p.r2 });
    }
    Ok(p)
}

/// `φ^t_G`: both actions move by `t g'(θ1 + θ2)`.
pub fn diagonal_flow(g: &SlopeProfile, t: f64, p: &PolarPoint) -> Result<PolarPoint, MovesError> {
    let k = t * g.eval_slope(p.theta1 + p.theta2);
    checked(PolarPoint { r1: p.r1 + k, r2: p.r2 + k, ..*p })
}

/// `φ^t_H`: `R2` moves by `t h'(θ2)`.
pub fn vertical_flow(h: &SlopeProfile, t: f64, p: &PolarPoint) -> Result<PolarPoint, MovesError> {
    checked(PolarPoint { r2: p.r2 + t * h.eval_slope(p.theta2), ..*p })
}

/// `φ^t_F`: `R1` moves by `t f'(θ1)`.
pub fn horizontal_flow(f: &SlopeProfile, t: f64, p: &PolarPoint) -> Result<PolarPoint, MovesError> {
    checked(PolarPoint { r1: p.r1 + t * f.eval_slope(p.theta1), ..*p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProfileTag {
    G,
    H,
    F,
}

impl ProfileTag {
    /// Integer coefficients `(a1, a2)` of the profile argument `a1 θ1 + a2 θ2`.
    pub fn argument(self) -> (i32, i32) {
        match self {
            ProfileTag::G => (1, 1),
            ProfileTag::H => (0, 1),
            ProfileTag::F => (1, 0),
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            ProfileTag::G => "g'(θ1+θ2)",
            ProfileTag::H => "h'(θ2)",
            ProfileTag::F => "f'(θ1)",
        }
    }
}

/// `coef · p'(a1 θ1 + a2 θ2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub tag: ProfileTag,
    pub profile: SlopeProfile,
}

impl Term {
    pub fn argument(&self, theta1: f64, theta2: f64) -> f64 {
        let (a1, a2) = self.tag.argument();
        a1 as f64 * theta1 + a2 as f64 * theta2
    }

    pub fn eval(&self, theta1: f64, theta2: f64) -> f64 {
        self.coef * self.profile.eval_slope(self.argument(theta1, theta2))
    }
}

/// A scalar field on the angle torus: constant plus profile terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Form {
    pub constant: f64,
    pub terms: Vec<Term>,
}

impl Form {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn term(coef: f64, tag: ProfileTag, profile: SlopeProfile) -> Self {
        Self { constant: 0.0, terms: vec![Term { coef, tag, profile }] }
    }

    pub fn plus(mut self, other: &Form) -> Self {
        self.constant += other.constant;
        self.terms.extend(other.terms.iter().copied());
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            terms: self.terms.iter().map(|t| Term { coef: t.coef * s, ..*t }).collect(),
        }
    }

    pub fn minus(self, other: &Form) -> Self {
        self.plus(&other.scaled(-1.0))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    pub fn eval(&self, theta1: f64, theta2: f64) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| acc + t.eval(theta1, theta2))
    }

    /// Enclosure of the field's values from exact slope ranges.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for t in &self.terms {
            let (a, b) = t.profile.slope_range();
            let (x, y) = (t.coef * a, t.coef * b);
            lo += x.min(y);
            hi += x.max(y);
        }
        (lo, hi)
    }

    /// Global bound on the Euclidean gradient norm in `(θ1, θ2)`.
    pub fn lipschitz(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let (a1, a2) = t.tag.argument();
                t.coef.abs() * t.profile.curvature_bound() * ((a1 * a1 + a2 * a2) as f64).sqrt()
            })
            .sum()
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constant)?;
        for t in &self.terms {
            if t.coef == 1.0 {
                write!(f, " + {}", t.tag.symbol())?;
            } else if t.coef < 0.0 {
                write!(f, " - {}·{}", -t.coef, t.tag.symbol())?;
            } else {
                write!(f, " + {}·{}", t.coef, t.tag.symbol())?;
            }
        }
        Ok(())
    }
}

/// A torus given as the graph `θ ↦ (R1(θ), R2(θ))` over the angle torus.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGraph {
    pub name: String,
    pub r1: Form,
    pub r2: Form,
}

impl TorusGraph {
    pub fn product(name: &str, k: f64, l: f64) -> Self {
        Self { name: name.to_string(), r1: Form::constant(k), r2: Form::constant(l) }
    }

    pub fn eval(&self, theta1: f64, theta2: f64) -> (f64, f64) {
        (self.r1.eval(theta1, theta2), self.r2.eval(theta1, theta2))
    }

    pub fn point(&self, theta1: f64, theta2: f64) -> PolarPoint {
        let (r1, r2) = self.eval(theta1, theta2);
        PolarPoint { theta1: reduce_angle(theta1), r1, theta2: reduce_angle(theta2), r2 }
    }

    /// Euclidean Lipschitz bounds of the two fields.
    pub fn lipschitz(&self) -> [f64; 2] {
        [self.r1.lipschitz(), self.r2.lipschitz()]
    }

    /// Largest observed difference quotient over `n` random nearby
    /// pairs, for checking [`TorusGraph::lipschitz`].
    pub fn audit_lipschitz(&self, n: usize, seed: u64) -> [f64; 2] {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst = [0.0f64; 2];
        for _ in 0..n {
            let t1: f64 = rng.gen();
            let t2: f64 = rng.gen();
            let scale = 10f64.powf(rng.gen_range(-7.0..-1.0));
            let d1 = scale * rng.gen_range(-1.0..1.0);
            let d2 = scale * rng.gen_range(-1.0..1.0);
            let dist = (d1 * d1 + d2 * d2).sqrt();
            if dist == 0.0 {
                continue;
            }
            let a = self.eval(t1, t2);
            let b = self.eval(t1 + d1, t2 + d2);
            worst[0] = worst[0].max((a.0 - b.0).abs() / dist);
            worst[1] = worst[1].max((a.1 - b.1).abs() / dist);
        }
        worst
    }

    /// Sampled graph as CSV `theta1,theta2,r1,r2` on an `n × n` grid.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("theta1,theta2,r1,r2\n");
        for i in 0..n {
            for j in 0..n {
                let t1 = i as f64 / n as f64;
                let t2 = j as f64 / n as f64;
                let (r1, r2) = self.eval(t1, t2);
                let _ = writeln!(out, "{t1:.16e},{t2:.16e},{r1:.16e},{r2:.16e}");
            }
        }
        out
    }

    /// Closed loop `s ↦ (θ1 = s, θ2 = θ2⁰)` on the graph.
    pub fn theta1_generator(&self, theta2: f64) -> impl Fn(f64) -> PolarPoint + '_ {
        move |s| self.point(s, theta2)
    }

    /// Closed loop `s ↦ (θ1 = θ1⁰, θ2 = s)` on the graph.
    pub fn theta2_generator(&self, theta1: f64) -> impl Fn(f64) -> PolarPoint + '_ {
        move |s| self.point(theta1, s)
    }
}

/// `t ↦ base + t · rate` for `t ∈ [t0, t1]`: the tracked set's path under
/// one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSweep {
    pub name: String,
    pub t0: f64,
    pub t1: f64,
    pub base: TorusGraph,
    pub rate: [Form; 2],
}

impl StageSweep {
    pub fn at(&self, t: f64) -> TorusGraph {
        TorusGraph {
            name: format!("{}@{t}", self.name),
            r1: self.base.r1.clone().plus(&self.rate[0].scaled(t)),
            r2: self.base.r2.clone().plus(&self.rate[1].scaled(t)),
        }
    }

    /// Bound on `|∂R/∂t|` over the sweep.
    pub fn time_lipschitz(&self) -> f64 {
        self.rate.iter().map(|f| f.range().0.abs().max(f.range().1.abs())).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub hamiltonian: ProfileTag,
    pub duration: f64,
    pub tracked: Vec<String>,
}

/// Everything the certifier needs, built from one parameter set.
#[derive(Debug, Clone)]
pub struct PackedConfiguration {
    pub params: ParamSet,
    pub profiles: Profiles,
    /// `Ψ(L11), Ψ(L12), Ψ(L21), Ψ(L22)`.
    pub images: [TorusGraph; 4],
    /// `φ¹_G(L12)`, the input of the third stage.
    pub phi_g_l12: TorusGraph,
    /// `φ^τ_H(L11)`.
    pub phi_h_l11: TorusGraph,
    /// G on L12 over [0,1]; H on L11 over [0,τ]; the pair under H over
    /// [τ,1] (two tracks); F on L21 over [0,1].
    pub sweeps: Vec<StageSweep>,
    pub stages: Vec<Stage>,
}

pub const IMAGE_NAMES: [&str; 4] = ["Psi(L11)", "Psi(L12)", "Psi(L21)", "Psi(L22)"];

impl PackedConfiguration {
    pub fn sweep(&self, name: &str) -> &StageSweep {
        self.sweeps.iter().find(|s| s.name == name).unwrap_or_else(|| panic!("no sweep {name}"))
    }

    /// The uncut flow of stage `index` applied to a point.
    pub fn stage_map(&self, index: usize, p: &PolarPoint) -> Result<PolarPoint, MovesError> {
        let pr = &self.profiles;
        let tau = self.params.tau;
        match index {
            0 => diagonal_flow(&pr.g, 1.0, p),
            1 => vertical_flow(&pr.h, tau, p),
            2 => vertical_flow(&pr.h, 1.0 - tau, p),
            3 => horizontal_flow(&pr.f, 1.0, p),
            _ => panic!("stage index {index} out of range"),
        }
    }

    /// All four uncut stage maps in order.
    pub fn composed_map(&self, p: &PolarPoint) -> Result<PolarPoint, MovesError> {
        (0..4).try_fold(*p, |q, i| self.stage_map(i, &q))
    }

    /// Schedule metadata as pretty JSON.
    pub fn metadata_json(&self) -> serde_json::Value {
        let graph = |g: &TorusGraph| serde_json::json!({"name": g.name, "r1": g.r1.to_string(), "r2": g.r2.to_string()});
        serde_json::json!({
            "params": self.params,
            "profiles": {"g": self.profiles.g, "h": self.profiles.h, "f": self.profiles.f},
            "stages": self.stages,
            "images": self.images.iter().map(graph).collect::<Vec<_>>(),
            "sweeps": self.sweeps.iter().map(|s| serde_json::json!({
                "name": s.name, "t0": s.t0, "t1": s.t1,
                "base": graph(&s.base),
                "rate": [s.rate[0].to_string(), s.rate[1].to_string()],
            })).collect::<Vec<_>>(),
        })
    }
}

/// Builds the schedule; rejects parameter sets violating any constraint.
pub fn compose_schedule(p: &ParamSet) -> Result<PackedConfiguration, MovesError> {
    p.validate()?;
    if let Err(ParamsError::Infeasible(v)) = p.require_feasible() {
        return Err(MovesError::Infeasible(v));
    }
    compose_schedule_unchecked(p)
}

/// Builds the schedule without the feasibility gate, for negative
/// controls. Profiles must still be constructible.
pub fn compose_schedule_unchecked(p: &ParamSet) -> Result<PackedConfiguration, MovesError> {
    let profiles = p.profiles()?;
    let tau = p.tau;
    let gp = |c: f64| Form::term(c, ProfileTag::G, profiles.g);
    let hp = |c: f64| Form::term(c, ProfileTag::H, profiles.h);
    let fp = |c: f64| Form::term(c, ProfileTag::F, profiles.f);
    let k = Form::constant;

    let l11 = TorusGraph::product("L11", 1.0, 1.0);
    let l12 = TorusGraph::product("L12", 1.0, 2.0);
    let l21 = TorusGraph::product("L21", 2.0, 1.0);

    let phi_g_l12 = TorusGraph { name: "phiG(L12)".into(), r1: k(1.0).plus(&gp(1.0)), r2: k(2.0).plus(&gp(1.0)) };
    let phi_h_l11 = TorusGraph { name: "phiH_tau(L11)".into(), r1: k(1.0), r2: k(1.0).plus(&hp(tau)) };

    let psi11 = TorusGraph { name: IMAGE_NAMES[0].into(), r1: k(1.0), r2: k(1.0).plus(&hp(1.0)) };
    let psi12 = TorusGraph {
        name: IMAGE_NAMES[1].into(),
        r1: k(1.0).plus(&gp(1.0)),
        r2: k(2.0).plus(&gp(1.0)).plus(&hp(1.0 - tau)),
    };
    let psi21 = TorusGraph { name: IMAGE_NAMES[2].into(), r1: k(2.0).plus(&fp(1.0)), r2: k(1.0) };
    let psi22 = TorusGraph::product(IMAGE_NAMES[3], 2.0, 2.0);

    let sweeps = vec![
        StageSweep { name: "G(L12)".into(), t0: 0.0, t1: 1.0, base: l12.clone(), rate: [gp(1.0), gp(1.0)] },
        StageSweep { name: "H(L11)".into(), t0: 0.0, t1: tau, base: l11.clone(), rate: [k(0.0), hp(1.0)] },
        StageSweep { name: "H(pair:L11)".into(), t0: tau, t1: 1.0, base: l11.clone(), rate: [k(0.0), hp(1.0)] },
        StageSweep {
            name: "H(pair:L12)".into(),
            t0: tau,
            t1: 1.0,
            base: TorusGraph {
                name: "phiG(L12)-tau*h'".into(),
                r1: phi_g_l12.r1.clone(),
                r2: phi_g_l12.r2.clone().plus(&hp(-tau)),
            },
            rate: [k(0.0), hp(1.0)],
        },
        StageSweep { name: "F(L21)".into(), t0: 0.0, t1: 1.0, base: l21.clone(), rate: [fp(1.0), k(0.0)] },
    ];

    let stages = vec![
        Stage { name: "G".into(), hamiltonian: ProfileTag::G, duration: 1.0, tracked: vec!["L12".into()] },
        Stage { name: "H1".into(), hamiltonian: ProfileTag::H, duration: tau, tracked: vec!["L11".into()] },
        Stage {
            name: "H2".into(),
            hamiltonian: ProfileTag::H,
            duration: 1.0 - tau,
            tracked: vec!["phiH_tau(L11)".into(), "phiG(L12)".into()],
        },
        Stage { name: "F".into(), hamiltonian: ProfileTag::F, duration: 1.0, tracked: vec!["L21".into()] },
    ];

    Ok(PackedConfiguration {
        params: *p,
        profiles,
        images: [psi11, psi12, psi21, psi22],
        phi_g_l12,
        phi_h_l11,
        sweeps,
        stages,
    })
}
