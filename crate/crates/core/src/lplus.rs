//! The fifth torus: a product of two area-one superellipse loops, one in
//! each `(θi, Ri)` factor of the window.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::geometry::{liouville_integral_of, GeometryError, PolarPoint};
use crate::params::ParamSet;

#[derive(Debug, Error, PartialEq)]
pub enum LPlusError {
    #[error("factor {factor} rectangle shrunk by margin {margin:e} has area {inner_area} <= 1")]
    NoRoom { factor: usize, margin: f64, inner_area: f64 },
    #[error("margin must be nonnegative and finite, got {0}")]
    BadMargin(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `κ(p) = Γ(1+1/p)² / Γ(1+2/p)`: area of the unit superellipse
/// `|x|^p + |y|^p ≤ 1` divided by 4.
pub fn superellipse_kappa(p: f64) -> f64 {
    (2.0 * ln_gamma(1.0 + 1.0 / p) - ln_gamma(1.0 + 2.0 / p)).exp()
}

/// Closed curve `|x/aθ|^p + |y/aR|^p = 1` around `center`, traversed
/// clockwise in the `(θ, R)` plane so that `∮ R dθ` is the enclosed area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperellipseLoop {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub p: f64,
    pub kappa: f64,
}

impl SuperellipseLoop {
    /// Fits an area-one loop inside the rectangle with the given center
    /// and half-sides: the exponent is raised until the area reaches 1, or
    /// an ellipse is shrunk when even `p = 2` is too large.
    pub fn fit(center: [f64; 2], half_sides: [f64; 2], factor: usize, margin: f64) -> Result<Self, LPlusError> {
        let box_area = 4.0 * half_sides[0] * half_sides[1];
        if !(box_area > 1.0) {
            return Err(LPlusError::NoRoom { factor, margin, inner_area: box_area });
        }
        let target = 1.0 / box_area;
        let k2 = superellipse_kappa(2.0);
        if k2 >= target {
            let s = (1.0 / (k2 * box_area)).sqrt();
            return Ok(Self { center, semi_axes: [half_sides[0] * s, half_sides[1] * s], p: 2.0, kappa: k2 });
        }
        // κ is increasing in p; bisect on log p
        let (mut lo, mut hi) = (2f64.ln(), 2f64.ln());
        while superellipse_kappa(hi.exp()) < target {
            hi += 1.0;
            if hi > 60.0 {
                return Err(LPlusError::NoRoom { factor, margin, inner_area: box_area });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if superellipse_kappa(mid.exp()) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let p = hi.exp();
        let kappa = superellipse_kappa(p);
        // absorb the residual of the bisection into the axes
        let s = (1.0 / (kappa * box_area)).sqrt();
        Ok(Self { center, semi_axes: [half_sides[0] * s, half_sides[1] * s], p, kappa })
    }

    pub fn area(&self) -> f64 {
        4.0 * self.kappa * self.semi_axes[0] * self.semi_axes[1]
    }

    /// `(θ, R)` at parameter `s ∈ [0, 1]`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let phi = -std::f64::consts::TAU * s;
        let (sn, cs) = phi.sin_cos();
        let r = (cs.abs().powf(self.p) + sn.abs().powf(self.p)).powf(-1.0 / self.p);
        (self.center[0] + self.semi_axes[0] * r * cs, self.center[1] + self.semi_axes[1] * r * sn)
    }

    /// `([θlo, θhi], [Rlo, Rhi])`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let [c0, c1] = self.center;
        let [a0, a1] = self.semi_axes;
        ([c0 - a0, c0 + a0], [c1 - a1, c1 + a1])
    }

    /// Strict monotonicity of the normalized polar angle over `n` samples;
    /// a star-shaped loop with monotone angle is embedded.
    pub fn is_embedded(&self, n: usize) -> bool {
        let angle = |s: f64| {
            let (x, y) = self.eval(s);
            ((y - self.center[1]) / self.semi_axes[1]).atan2((x - self.center[0]) / self.semi_axes[0])
        };
        let mut prev = angle(0.0);
        let mut total = 0.0;
        for i in 1..=n {
            let a = angle(i as f64 / n as f64);
            let mut d = a - prev;
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            } else if d < -std::f64::consts::PI {
                d += std::f64::consts::TAU;
            }
            if !(d < 0.0) {
                return false;
            }
            total += d;
            prev = a;
        }
        (total + std::f64::consts::TAU).abs() < 1e-9
    }
}

/// The product torus `γ1 × γ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LPlus {
    pub loops: [SuperellipseLoop; 2],
    pub margin: f64,
}

impl LPlus {
    pub fn point(&self, s1: f64, s2: f64) -> PolarPoint {
        let (t1, r1) = self.loops[0].eval(s1);
        let (t2, r2) = self.loops[1].eval(s2);
        PolarPoint { theta1: t1, r1, theta2: t2, r2 }
    }

    /// Angle box `[θ1 range, θ2 range]` containing the torus.
    pub fn theta_box(&self) -> [[f64; 2]; 2] {
        [self.loops[0].bounding_box().0, self.loops[1].bounding_box().0]
    }

    /// Action box `[R1 range, R2 range]` containing the torus.
    pub fn r_box(&self) -> [[f64; 2]; 2] {
        [self.loops[0].bounding_box().1, self.loops[1].bounding_box().1]
    }

    /// Smallest distance from the bounding boxes to the boundary of the
    /// window `S × T` built from `p`; positive means strictly inside.
    pub fn window_margin(&self, p: &ParamSet) -> f64 {
        let tb = self.theta_box();
        let rb = self.r_box();
        let sides = [
            tb[0][0],
            p.c() - tb[0][1],
            tb[1][0],
            p.b() - tb[1][1],
            rb[0][0] - p.sigma,
            p.ell + p.sigma - rb[0][1],
            rb[1][0] - p.sigma,
            p.w + p.sigma - rb[1][1],
        ];
        sides.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Signed L∞ distance from an action pair to the action box: positive
    /// outside, nonpositive inside.
    pub fn r_box_distance(&self, r1: f64, r2: f64) -> f64 {
        let rb = self.r_box();
        let d = |x: f64, lo: f64, hi: f64| if x < lo { lo - x } else if x > hi { x - hi } else { -(x - lo).min(hi - x) };
        d(r1, rb[0][0], rb[0][1]).max(d(r2, rb[1][0], rb[1][1]))
    }

    /// Liouville integrals of the two generator loops.
    pub fn generator_integrals(&self, quadrature_n: usize) -> Result<[f64; 2], GeometryError> {
        let a = liouville_integral_of(quadrature_n, |s| self.point(s, 0.0))?;
        let b = liouville_integral_of(quadrature_n, |s| self.point(0.0, s))?;
        Ok([a.value, b.value])
    }
}

/// Largest margin for which both shrunk factor rectangles still have area
/// above 1.
pub fn max_feasible_margin(p: &ParamSet) -> f64 {
    let root = |a: f64, b: f64| {
        // (a - 2μ)(b - 2μ) = 1, smaller root
        let s = a + b;
        (s - (s * s - 4.0 * (a * b - 1.0)).sqrt()) / 4.0
    };
    root(p.c(), p.ell).min(root(p.b(), p.w)).max(0.0)
}

/// Default margin: a quarter of the largest feasible one.
pub fn default_margin(p: &ParamSet) -> f64 {
    0.25 * max_feasible_margin(p)
}

/// Builds `L⁺` inside the window with the requested margin on every side.
pub fn build_lplus(p: &ParamSet, margin: f64) -> Result<LPlus, LPlusError> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(LPlusError::BadMargin(margin));
    }
    let sides = [[p.c(), p.ell], [p.b(), p.w]];
    let mut loops = Vec::with_capacity(2);
    for (i, [t_side, r_side]) in sides.into_iter().enumerate() {
        let half = [t_side / 2.0 - margin, r_side / 2.0 - margin];
        if !(half[0] > 0.0 && half[1] > 0.0) {
            return Err(LPlusError::NoRoom { factor: i + 1, margin, inner_area: 0.0 });
        }
        let center = [t_side / 2.0, p.sigma + r_side / 2.0];
        loops.push(SuperellipseLoop::fit(center, half, i + 1, margin)?);
    }
    Ok(LPlus { loops: [loops[0], loops[1]], margin })
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorReport {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub p: f64,
    pub kappa: f64,
    pub area: f64,
    pub liouville: f64,
    pub liouville_error_estimate: f64,
    pub embedded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LPlusReport {
    pub margin: f64,
    pub max_feasible_margin: f64,
    pub window_margin: f64,
    pub quadrature_n: usize,
    pub factors: Vec<FactorReport>,
}

pub fn lplus_report(p: &ParamSet, lp: &LPlus, quadrature_n: usize) -> Result<LPlusReport, GeometryError> {
    let mut factors = Vec::new();
    for lo in &lp.loops {
        let li = liouville_integral_of(quadrature_n, |s| {
            let (t, r) = lo.eval(s);
            PolarPoint { theta1: t, r1: r, theta2: 0.0, r2: 1.0 }
        })?;
        factors.push(FactorReport {
            center: lo.center,
            semi_axes: lo.semi_axes,
            p: lo.p,
            kappa: lo.kappa,
            area: lo.area(),
            liouville: li.value,
            liouville_error_estimate: li.error_estimate,
            embedded: lo.is_embedded(quadrature_n.min(100_000)),
        });
    }
    Ok(LPlusReport {
        margin: lp.margin,
        max_feasible_margin: max_feasible_margin(p),
        window_margin: lp.window_margin(p),
        quadrature_n,
        factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kappa_limits() {
        assert_relative_eq!(superellipse_kappa(2.0), std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        assert_relative_eq!(superellipse_kappa(1.0), 0.5, epsilon = 1e-14);
        assert!(1.0 - superellipse_kappa(1e6) < 1e-10);
        let mut prev = 0.0;
        for k in 0..40 {
            let v = superellipse_kappa(2.0 * 1.3f64.powi(k));
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn ellipse_branch_scales_axes() {
        let lo = SuperellipseLoop::fit([0.0, 0.0], [1.0, 1.0], 1, 0.0).unwrap();
        assert_eq!(lo.p, 2.0);
        assert_relative_eq!(lo.area(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ex1_factors_enclose_unit_area() {
        let p = ParamSet::ex1();
        let lp = build_lplus(&p, default_margin(&p)).unwrap();
        for lo in &lp.loops {
            assert_relative_eq!(lo.area(), 1.0, epsilon = 1e-12);
            assert!(lo.p > 20.0, "{}", lo.p);
            assert!(lo.is_embedded(10_000));
        }
        assert!(lp.window_margin(&p) >= lp.margin - 1e-15, "{} {}", lp.window_margin(&p), lp.margin);
    }

    #[test]
    fn too_large_margin_names_factor() {
        let p = ParamSet::ex1();
        let m = max_feasible_margin(&p) * 1.01;
        match build_lplus(&p, m) {
            Err(LPlusError::NoRoom { factor, .. }) => assert!(factor == 1 || factor == 2),
            other => panic!("{other:?}"),
        }
        assert!(build_lplus(&p, -1.0).is_err());
    }

    #[test]
    fn loop_is_clockwise() {
        let lo = SuperellipseLoop::fit([0.5, 2.0], [0.3, 1.0], 1, 0.0).unwrap();
        let (_, r0) = lo.eval(0.0);
        let (_, r1) = lo.eval(0.01);
        // starts at the rightmost point and moves downward
        assert!(r1 < r0);
    }

    #[test]
    fn r_box_distance_sign() {
        let p = ParamSet::ex1();
        let lp = build_lplus(&p, default_margin(&p)).unwrap();
        let c = [lp.loops[0].center[1], lp.loops[1].center[1]];
        assert!(lp.r_box_distance(c[0], c[1]) < 0.0);
        let d = lp.r_box_distance(2.0, 2.0);
        assert_relative_eq!(d, 2.0 - lp.r_box()[1][1], epsilon = 1e-15);
        assert!(d > 0.0);
    }
}
