//! Strictly convex compact control sets in the plane.
//!
//! Every built-in set is star-shaped about a reference centre (the origin of
//! the unshifted set), which gives an exact radial gauge and a boundary
//! parametrization `θ ↦ u(θ)` traversed counter-clockwise. The support
//! function, its unique maximizer, ray/boundary intersections and the
//! Fenchel extremality residual are all computed from those two primitives.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::plane::Vec2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvexError {
    #[error("costate is zero: maximizer is not unique")]
    ZeroCostate,
    #[error("ray misses the set (degenerate touch: {degenerate_touch})")]
    RayMisses { degenerate_touch: bool },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("set is not strictly convex (min curvature indicator {min_delta})")]
    NotStrictlyConvex { min_delta: f64 },
}

/// Radial profile `θ ↦ (V, V′, V″)` of a polar boundary curve.
pub type PolarProfileFn<T> = Arc<dyn Fn(T) -> [T; 3] + Send + Sync>;

#[derive(Clone)]
pub enum PolarProfile<T> {
    /// `V(θ) = v₀(1 + e·cos θ)`.
    Egg { v0: T, e: T },
    Custom(PolarProfileFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for PolarProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolarProfile::Egg { v0, e } => f.debug_struct("Egg").field("v0", v0).field("e", e).finish(),
            PolarProfile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Boundary given in polar form `u(θ) = V(θ)(cos θ, sin θ)`.
#[derive(Debug, Clone)]
pub struct PolarCurve<T> {
    profile: PolarProfile<T>,
}

impl<T: Scalar> PolarCurve<T> {
    pub fn egg(v0: T, e: T) -> Self {
        Self { profile: PolarProfile::Egg { v0, e } }
    }

    /// Arbitrary profile; `f(θ)` must return `[V(θ), V′(θ), V″(θ)]`.
    pub fn custom(f: impl Fn(T) -> [T; 3] + Send + Sync + 'static) -> Self {
        Self { profile: PolarProfile::Custom(Arc::new(f)) }
    }

    pub fn profile(&self) -> &PolarProfile<T> {
        &self.profile
    }

    /// `[V, V′, V″]` at `θ`.
    #[inline]
    pub fn radius(&self, theta: T) -> [T; 3] {
        match &self.profile {
            PolarProfile::Egg { v0, e } => {
                let (s, c) = theta.sin_cos();
                [*v0 * (T::one() + *e * c), -*v0 * *e * s, -*v0 * *e * c]
            }
            PolarProfile::Custom(f) => f(theta),
        }
    }

    /// `δ(θ) = V² + 2V′² − V·V″`.
    pub fn delta(&self, theta: T) -> T {
        let [v, dv, ddv] = self.radius(theta);
        v * v + T::two() * dv * dv - v * ddv
    }
}

/// Where a point sits relative to a control set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryChart<T> {
    pub theta: T,
    pub point: Vec2<T>,
    pub u_theta: Vec2<T>,
    pub u_thetatheta: Vec2<T>,
    /// Curvature indicator `⟨u_θ⊥, u_θθ⟩`; equals `V² + 2V′² − VV″` for polar curves.
    pub delta: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport<T> {
    pub min_abs_delta: T,
    pub min_delta: T,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub enum ControlSet<T> {
    /// `|u| ≤ radius`.
    Disk { radius: T },
    /// `(u₁/r1)² + (u₂/r2)² ≤ 1`, parametrized as `(r1 cos θ, r2 sin θ)`.
    Ellipse { r1: T, r2: T },
    Polar(PolarCurve<T>),
    /// `base + offset`, evaluated lazily.
    Shifted { base: Box<ControlSet<T>>, offset: Vec2<T> },
}

fn positive<T: Scalar>(x: T, what: &'static str) -> Result<T, ConvexError> {
    if x.is_finite() && x > T::zero() {
        Ok(x)
    } else {
        Err(ConvexError::InvalidParameter(what))
    }
}

impl<T: Scalar> ControlSet<T> {
    pub fn disk(radius: T) -> Result<Self, ConvexError> {
        Ok(Self::Disk { radius: positive(radius, "disk radius must be positive")? })
    }

    pub fn ellipse(r1: T, r2: T) -> Result<Self, ConvexError> {
        Ok(Self::Ellipse {
            r1: positive(r1, "ellipse r1 must be positive")?,
            r2: positive(r2, "ellipse r2 must be positive")?,
        })
    }

    /// The set `u₁² + a²u₂² ≤ 1`.
    pub fn elliptic(a: T) -> Result<Self, ConvexError> {
        let a = positive(a, "ellipse aspect a must be positive")?;
        Self::ellipse(T::one(), T::one() / a)
    }

    /// Egg family `V(θ) = v₀(1 + e cos θ)`, checked for strict convexity.
    pub fn egg(v0: T, e: T) -> Result<Self, ConvexError> {
        let v0 = positive(v0, "egg v0 must be positive")?;
        if !(e >= T::zero() && e <= T::half()) {
            return Err(ConvexError::InvalidParameter("egg eccentricity must lie in [0, 0.5]"));
        }
        let set = Self::Polar(PolarCurve::egg(v0, e));
        let report = set.verify_strict_convexity(256)?;
        if !report.ok {
            return Err(ConvexError::NotStrictlyConvex {
                min_delta: report.min_delta.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(set)
    }

    /// Polar boundary with no convexity check; see [`ControlSet::verify_strict_convexity`].
    pub fn polar(curve: PolarCurve<T>) -> Self {
        Self::Polar(curve)
    }

    pub fn shifted(self, offset: Vec2<T>) -> Self {
        Self::Shifted { base: Box::new(self), offset }
    }

    /// Total translation applied to the innermost base set.
    pub fn offset(&self) -> Vec2<T> {
        match self {
            Self::Shifted { base, offset } => base.offset() + *offset,
            _ => Vec2::zero(),
        }
    }

    fn innermost(&self) -> &Self {
        match self {
            Self::Shifted { base, .. } => base.innermost(),
            other => other,
        }
    }

    /// `σ(p) = sup_{u∈U} ⟨p, u⟩`.
    pub fn support(&self, p: Vec2<T>) -> T {
        match self {
            Self::Disk { radius } => *radius * p.norm(),
            Self::Ellipse { r1, r2 } => (p.x1 * *r1).hypot(p.x2 * *r2),
            Self::Polar(curve) => {
                if p.norm_sq() == T::zero() {
                    return T::zero();
                }
                let theta = polar_argmax(curve, p);
                p.dot(polar_point(curve, theta))
            }
            Self::Shifted { base, offset } => base.support(p) + p.dot(*offset),
        }
    }

    /// Unique boundary point attaining the support function.
    pub fn maximizer(&self, p: Vec2<T>) -> Result<Vec2<T>, ConvexError> {
        if p.norm_sq() == T::zero() || !p.is_finite() {
            return Err(ConvexError::ZeroCostate);
        }
        Ok(match self {
            Self::Disk { radius } => p * (*radius / p.norm()),
            Self::Ellipse { r1, r2 } => {
                let sigma = (p.x1 * *r1).hypot(p.x2 * *r2);
                Vec2::new(*r1 * *r1 * p.x1, *r2 * *r2 * p.x2) / sigma
            }
            Self::Polar(curve) => polar_point(curve, polar_argmax(curve, p)),
            Self::Shifted { base, offset } => base.maximizer(p)? + *offset,
        })
    }

    /// Radial gauge about the set's reference centre: `< 1` inside, `1` on the boundary.
    pub fn gauge(&self, u: Vec2<T>) -> T {
        match self {
            Self::Disk { radius } => u.norm() / *radius,
            Self::Ellipse { r1, r2 } => (u.x1 / *r1).hypot(u.x2 / *r2),
            Self::Polar(curve) => {
                let r = u.norm();
                if r == T::zero() {
                    T::zero()
                } else {
                    r / curve.radius(u.angle())[0]
                }
            }
            Self::Shifted { base, offset } => base.gauge(u - *offset),
        }
    }

    pub fn contains(&self, u: Vec2<T>, tol: T) -> Membership {
        let g = self.gauge(u);
        if g < T::one() - tol {
            Membership::Inside
        } else if g <= T::one() + tol {
            Membership::Boundary
        } else {
            Membership::Outside
        }
    }

    /// Largest `λ ≥ 0` with `λd` in the set, for a unit direction `d`.
    pub fn gauge_along(&self, d: Vec2<T>) -> Result<T, ConvexError> {
        if !d.is_finite() || (d.norm() - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(8.0)) {
            return Err(ConvexError::InvalidParameter("direction must be a unit vector"));
        }
        if !matches!(self, Self::Shifted { .. }) {
            // gauges of the unshifted sets are positively homogeneous about the origin
            return Ok(T::one() / self.gauge(d));
        }
        if let Some((r1, r2)) = match self.innermost() {
            Self::Disk { radius } => Some((*radius, *radius)),
            Self::Ellipse { r1, r2 } => Some((*r1, *r2)),
            _ => None,
        } {
            return quadric_ray(d, self.offset(), r1, r2);
        }
        let r_max = self.bounding_radius();
        let inside = |lam: T| self.gauge(d * lam) <= T::one();
        let mut lo = T::zero();
        if !(self.gauge(Vec2::zero()) < T::one()) {
            // gauge along the ray is convex in λ; locate its minimum
            let (lam_min, g_min) = golden_min(|lam| self.gauge(d * lam), T::zero(), r_max);
            if g_min > T::one() + T::lit(1e-9) {
                return Err(ConvexError::RayMisses { degenerate_touch: false });
            }
            if g_min > T::one() - T::lit(1e-9) {
                return Err(ConvexError::RayMisses { degenerate_touch: true });
            }
            lo = lam_min;
        }
        let mut hi = r_max;
        for _ in 0..200 {
            let mid = T::half() * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(T::half() * (lo + hi))
    }

    /// Boundary parametrization and its derivatives at `θ`.
    pub fn polar_data(&self, theta: T) -> BoundaryChart<T> {
        let (s, c) = theta.sin_cos();
        match self {
            Self::Disk { radius } => {
                let v = *radius;
                BoundaryChart {
                    theta,
                    point: Vec2::new(v * c, v * s),
                    u_theta: Vec2::new(-v * s, v * c),
                    u_thetatheta: Vec2::new(-v * c, -v * s),
                    delta: v * v,
                }
            }
            Self::Ellipse { r1, r2 } => BoundaryChart {
                theta,
                point: Vec2::new(*r1 * c, *r2 * s),
                u_theta: Vec2::new(-*r1 * s, *r2 * c),
                u_thetatheta: Vec2::new(-*r1 * c, -*r2 * s),
                delta: *r1 * *r2,
            },
            Self::Polar(curve) => {
                let [v, dv, ddv] = curve.radius(theta);
                let radial = Vec2::new(c, s);
                let tangential = Vec2::new(-s, c);
                BoundaryChart {
                    theta,
                    point: radial * v,
                    u_theta: radial * dv + tangential * v,
                    u_thetatheta: radial * (ddv - v) + tangential * (T::two() * dv),
                    delta: v * v + T::two() * dv * dv - v * ddv,
                }
            }
            Self::Shifted { base, offset } => {
                let mut chart = base.polar_data(theta);
                chart.point += *offset;
                chart
            }
        }
    }

    /// Chart parameter of a boundary point (inverse of `polar_data(θ).point`).
    pub fn boundary_angle(&self, u: Vec2<T>) -> T {
        match self {
            Self::Disk { .. } | Self::Polar(_) => u.angle(),
            Self::Ellipse { r1, r2 } => (u.x2 / *r2).atan2(u.x1 / *r1),
            Self::Shifted { base, offset } => base.boundary_angle(u - *offset),
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, u: Vec2<T>) -> Vec2<T> {
        match self {
            Self::Disk { .. } => u.normalized().unwrap_or_else(|| Vec2::new(T::one(), T::zero())),
            Self::Ellipse { r1, r2 } => Vec2::new(u.x1 / (*r1 * *r1), u.x2 / (*r2 * *r2))
                .normalized()
                .unwrap_or_else(|| Vec2::new(T::one(), T::zero())),
            Self::Polar(_) => {
                let chart = self.polar_data(u.angle());
                let n = -chart.u_theta.perp();
                n.normalized().unwrap_or_else(|| Vec2::new(T::one(), T::zero()))
            }
            Self::Shifted { base, offset } => base.outward_normal(u - *offset),
        }
    }

    /// Samples the curvature indicator on a uniform grid of `n_samples ≥ 64` angles.
    pub fn verify_strict_convexity(&self, n_samples: usize) -> Result<ConvexityReport<T>, ConvexError> {
        if n_samples < 64 {
            return Err(ConvexError::InvalidParameter("need at least 64 samples"));
        }
        let base = self.innermost();
        let mut min_abs = T::infinity();
        let mut min_delta = T::infinity();
        let mut max_v = T::zero();
        for k in 0..n_samples {
            let theta = T::TAU() * T::lit(k as f64) / T::lit(n_samples as f64);
            let chart = base.polar_data(theta);
            min_abs = min_abs.min(chart.delta.abs());
            min_delta = min_delta.min(chart.delta);
            max_v = max_v.max(chart.point.norm());
        }
        let threshold = T::lit(1e-9) * max_v * max_v;
        Ok(ConvexityReport { min_abs_delta: min_abs, min_delta, ok: min_delta > threshold })
    }

    /// `σ(p) − ⟨p, u⟩`; zero exactly when `p` is normal to the set at `u`.
    pub fn fenchel_residual(&self, u: Vec2<T>, p: Vec2<T>) -> T {
        self.support(p) - p.dot(u)
    }

    /// Largest boundary distance from the reference centre, from 64 samples.
    pub fn max_boundary_radius(&self) -> T {
        let base = self.innermost();
        (0..64)
            .map(|k| base.polar_data(T::TAU() * T::lit(k as f64) / T::lit(64.0)).point.norm())
            .fold(T::zero(), T::max)
    }

    /// Upper bound on `|u|` over the set, padded by one.
    fn bounding_radius(&self) -> T {
        self.max_boundary_radius() + self.offset().norm() + T::one()
    }
}

/// Largest `λ` with `|diag(1/r1, 1/r2)(λd − c)| ≤ 1`, solved exactly.
fn quadric_ray<T: Scalar>(d: Vec2<T>, c: Vec2<T>, r1: T, r2: T) -> Result<T, ConvexError> {
    let md = Vec2::new(d.x1 / r1, d.x2 / r2);
    let mc = Vec2::new(c.x1 / r1, c.x2 / r2);
    let alpha = md.norm_sq();
    let beta = md.dot(mc);
    let gamma = mc.norm_sq() - T::one();
    let disc = beta * beta - alpha * gamma;
    let touch = T::lit(1e-9) * alpha.max(beta * beta);
    if gamma >= T::zero() {
        // origin outside or on the boundary: the ray must cross the set ahead
        if disc < -touch || beta <= T::zero() {
            return Err(ConvexError::RayMisses { degenerate_touch: false });
        }
        if disc <= touch {
            return Err(ConvexError::RayMisses { degenerate_touch: true });
        }
    }
    let root = disc.max(T::zero()).sqrt();
    // the larger root, written to avoid cancellation
    if beta >= T::zero() {
        Ok((beta + root) / alpha)
    } else {
        Ok(gamma / (beta - root))
    }
}

#[inline]
fn polar_point<T: Scalar>(curve: &PolarCurve<T>, theta: T) -> Vec2<T> {
    Vec2::from_angle(theta) * curve.radius(theta)[0]
}

/// `θ ↦ (⟨p, u⟩, ⟨p, u_θ⟩, ⟨p, u_θθ⟩)` along a polar boundary.
#[inline]
fn polar_projection<T: Scalar>(curve: &PolarCurve<T>, p: Vec2<T>, theta: T) -> (T, T, T) {
    let [v, dv, ddv] = curve.radius(theta);
    let (s, c) = theta.sin_cos();
    let pr = p.x1 * c + p.x2 * s;
    let pt = -p.x1 * s + p.x2 * c;
    (v * pr, dv * pr + v * pt, (ddv - v) * pr + T::two() * dv * pt)
}

/// Newton on `⟨p, u_θ(θ)⟩ = 0` from `atan2(p)`, golden-section fallback on the
/// half-circle of directions with positive projection.
fn polar_argmax<T: Scalar>(curve: &PolarCurve<T>, p: Vec2<T>) -> T {
    let theta0 = p.angle();
    let arc = T::FRAC_PI_2();
    let step_tol = T::lit(4.0) * T::epsilon();
    if let Some(theta) = newton_stationary(curve, p, theta0, theta0, arc, 50, step_tol) {
        return theta;
    }
    let (theta_g, _) = golden_min(|th| -polar_projection(curve, p, th).0, theta0 - arc, theta0 + arc);
    newton_stationary(curve, p, theta_g, theta0, arc, 10, step_tol).unwrap_or(theta_g)
}

fn newton_stationary<T: Scalar>(
    curve: &PolarCurve<T>,
    p: Vec2<T>,
    start: T,
    centre: T,
    arc: T,
    max_iter: usize,
    step_tol: T,
) -> Option<T> {
    let mut theta = start;
    for _ in 0..max_iter {
        let (_, g, gp) = polar_projection(curve, p, theta);
        if g == T::zero() {
            return Some(theta);
        }
        if !(gp < T::zero()) {
            return None;
        }
        let step = g / gp;
        theta = theta - step;
        if (theta - centre).abs() > arc || !theta.is_finite() {
            return None;
        }
        if step.abs() <= step_tol * (T::one() + theta.abs()) {
            return Some(theta);
        }
    }
    None
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub(crate) fn golden_min<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (a, b);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let tol = T::epsilon().sqrt() * (T::one() + a.abs().max(b.abs()));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;

    type V = Vec2<f64>;

    fn ellipse() -> ControlSet<f64> {
        ControlSet::elliptic(2.0).unwrap()
    }

    fn close(a: V, b: V, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn support_examples() {
        assert_eq!(ControlSet::disk(1.0).unwrap().support(V::new(3.0, 4.0)), 5.0);
        assert_eq!(ellipse().support(V::new(0.0, 1.0)), 0.5);
        let unit = ControlSet::polar(PolarCurve::custom(|_| [1.0, 0.0, 0.0]));
        assert!((unit.support(V::new(1.0, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maximizer_examples() {
        assert_eq!(ControlSet::disk(2.0).unwrap().maximizer(V::new(0.0, 3.0)).unwrap(), V::new(0.0, 2.0));
        assert!(close(ellipse().maximizer(V::new(0.0, 1.0)).unwrap(), V::new(0.0, 0.5), 1e-15));
        assert!(close(ellipse().maximizer(V::new(1.0, 0.0)).unwrap(), V::new(1.0, 0.0), 1e-15));
        assert_eq!(ellipse().maximizer(V::zero()), Err(ConvexError::ZeroCostate));
    }

    #[test]
    fn maximizer_attains_support_on_egg() {
        let egg = ControlSet::egg(1.0, 0.3).unwrap();
        for k in 0..100 {
            let p = V::from_angle(0.0628 * k as f64) * (0.5 + k as f64 / 50.0);
            let u = egg.maximizer(p).unwrap();
            assert!((egg.support(p) - p.dot(u)).abs() <= 1e-10 * (1.0 + p.norm()));
            assert_eq!(egg.contains(u, 1e-8), Membership::Boundary);
        }
    }

    #[test]
    fn contains_examples() {
        let disk = ControlSet::disk(1.0).unwrap();
        assert_eq!(disk.contains(V::new(0.5, 0.0), 1e-9), Membership::Inside);
        assert_eq!(disk.contains(V::new(1.0, 0.0), 1e-9), Membership::Boundary);
        assert_eq!(ellipse().contains(V::new(0.0, 0.6), 1e-9), Membership::Outside);
    }

    #[test]
    fn gauge_along_examples() {
        let e1 = V::new(1.0, 0.0);
        assert!((ControlSet::disk(2.0).unwrap().gauge_along(e1).unwrap() - 2.0).abs() < 1e-11);
        let shifted_disk = ControlSet::disk(1.0).unwrap().shifted(V::new(-0.5, 0.0));
        assert!((shifted_disk.gauge_along(e1).unwrap() - 0.5).abs() < 1e-11);
        // (λ + 0.5)² = 1 on the major axis
        let shifted_ellipse = ellipse().shifted(V::new(-0.5, 0.0));
        assert!((shifted_ellipse.gauge_along(e1).unwrap() - 0.5).abs() < 1e-11);
    }

    #[test]
    fn gauge_along_with_origin_outside() {
        // disk of radius 1 centred at (3, 0): ray along e₁ exits at λ = 4
        let far = ControlSet::disk(1.0).unwrap().shifted(V::new(3.0, 0.0));
        assert!((far.gauge_along(V::new(1.0, 0.0)).unwrap() - 4.0).abs() < 1e-10);
        assert_eq!(
            far.gauge_along(V::new(0.0, 1.0)),
            Err(ConvexError::RayMisses { degenerate_touch: false })
        );
        assert_eq!(
            far.gauge_along(V::new(-1.0, 0.0)),
            Err(ConvexError::RayMisses { degenerate_touch: false })
        );
        let tangent = ControlSet::disk(1.0).unwrap().shifted(V::new(3.0, 1.0));
        assert_eq!(
            tangent.gauge_along(V::new(1.0, 0.0)),
            Err(ConvexError::RayMisses { degenerate_touch: true })
        );
        assert!(far.gauge_along(V::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn polar_data_examples() {
        let chart = ControlSet::disk(3.0).unwrap().polar_data(0.0);
        assert_eq!(chart.point, V::new(3.0, 0.0));
        assert_eq!(chart.u_theta, V::new(0.0, 3.0));
        assert_eq!(chart.u_thetatheta, V::new(-3.0, 0.0));
        assert_eq!(chart.delta, 9.0);

        let chart = ControlSet::ellipse(1.0, 0.5).unwrap().polar_data(FRAC_PI_2);
        assert!(close(chart.point, V::new(0.0, 0.5), 1e-15));
        assert!(close(chart.u_theta, V::new(-1.0, 0.0), 1e-15));
        assert!(close(chart.u_thetatheta, V::new(0.0, -0.5), 1e-15));
    }

    #[test]
    fn egg_delta_matches_finite_differences() {
        let curve = PolarCurve::<f64>::egg(1.0, 0.3);
        let set = ControlSet::polar(curve.clone());
        assert!((set.polar_data(0.0).delta - 2.08).abs() < 1e-14);
        let v = |t: f64| 1.0 + 0.3 * t.cos();
        let h = 1e-4;
        let dv = (v(h) - v(-h)) / (2.0 * h);
        let ddv = (v(h) - 2.0 * v(0.0) + v(-h)) / (h * h);
        let fd = v(0.0).powi(2) + 2.0 * dv * dv - v(0.0) * ddv;
        assert!((fd - 2.08).abs() < 1e-6);
        // the chart's cross product agrees with the polar formula everywhere
        for k in 0..64 {
            let th = k as f64 * 0.1;
            let c = set.polar_data(th);
            assert!((c.u_theta.cross(c.u_thetatheta) - curve.delta(th)).abs() < 1e-13);
        }
    }

    #[test]
    fn strict_convexity_reports() {
        let r = ControlSet::disk(1.0).unwrap().verify_strict_convexity(256).unwrap();
        assert!(r.ok);
        assert_eq!(r.min_abs_delta, 1.0);

        let egg = ControlSet::polar(PolarCurve::egg(1.0, 0.3));
        assert!(egg.verify_strict_convexity(256).unwrap().ok);

        // δ = 2.62 + 2.7 cos θ changes sign near θ = π
        let dented = ControlSet::polar(PolarCurve::egg(1.0, 0.9));
        let grid_min = (0..256)
            .map(|k| 2.62 + 2.7 * (2.0 * PI * k as f64 / 256.0).cos())
            .fold(f64::INFINITY, f64::min);
        assert!(grid_min < 0.0);
        let r = dented.verify_strict_convexity(256).unwrap();
        assert!(!r.ok);
        assert!((r.min_delta - grid_min).abs() < 1e-12);

        assert!(ControlSet::disk(1.0).unwrap().verify_strict_convexity(10).is_err());
    }

    #[test]
    fn egg_constructor_validates() {
        assert!(ControlSet::egg(1.0, 0.3).is_ok());
        assert!(matches!(ControlSet::egg(1.0, 0.5), Err(ConvexError::NotStrictlyConvex { .. })));
        assert!(ControlSet::egg(1.0, 0.9).is_err());
        assert!(ControlSet::egg(-1.0, 0.1).is_err());
    }

    #[test]
    fn fenchel_residual_examples() {
        let disk = ControlSet::disk(1.0).unwrap();
        assert_eq!(disk.fenchel_residual(V::new(1.0, 0.0), V::new(2.0, 0.0)), 0.0);
        assert_eq!(disk.fenchel_residual(V::new(1.0, 0.0), V::new(0.0, 1.0)), 1.0);
        assert_eq!(ellipse().fenchel_residual(V::new(0.0, 0.5), V::new(0.0, 3.0)), 0.0);
    }

    #[test]
    fn shifted_set_is_lazy_translation() {
        let s = V::new(-0.3, 0.2);
        let set = ellipse().shifted(s);
        let p = V::new(0.4, -1.1);
        assert!((set.support(p) - (ellipse().support(p) + p.dot(s))).abs() < 1e-15);
        assert!(close(set.maximizer(p).unwrap(), ellipse().maximizer(p).unwrap() + s, 1e-15));
        assert_eq!(set.contains(set.maximizer(p).unwrap(), 1e-9), Membership::Boundary);
    }

    #[test]
    fn outward_normal_is_maximizing_direction() {
        let sets = [ControlSet::disk(1.5).unwrap(), ellipse(), ControlSet::egg(1.0, 0.4).unwrap()];
        for set in &sets {
            for k in 0..32 {
                let p = V::from_angle(0.2 * k as f64 + 0.05);
                let u = set.maximizer(p).unwrap();
                assert!(close(set.outward_normal(u), p, 1e-9), "{set:?} k={k}");
                let th = set.boundary_angle(u);
                assert!(close(set.polar_data(th).point, u, 1e-12));
            }
        }
    }

    #[test]
    fn polar_maximizer_in_single_precision() {
        let egg = ControlSet::<f32>::egg(1.0, 0.3).unwrap();
        let p = Vec2::<f32>::new(0.3, 0.8);
        let u = egg.maximizer(p).unwrap();
        assert!((egg.support(p) - p.dot(u)).abs() < 1e-6);
    }
}
