//! Current fields `s(x)`, their Jacobians, and the weak-current and
//! permanence diagnostics.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::convex::{ControlSet, ConvexError, Membership};
use crate::plane::{Mat2, Vec2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurrentError {
    #[error("origin is not interior to the control set")]
    OriginOutside,
    #[error("invalid region: lower corner must be below upper corner")]
    InvalidRegion,
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// Axis-aligned navigation area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBox<T> {
    pub lower: Vec2<T>,
    pub upper: Vec2<T>,
}

impl<T: Scalar> RegionBox<T> {
    pub fn new(lower: Vec2<T>, upper: Vec2<T>) -> Result<Self, CurrentError> {
        if lower.x1 < upper.x1 && lower.x2 < upper.x2 {
            Ok(Self { lower, upper })
        } else {
            Err(CurrentError::InvalidRegion)
        }
    }

    pub fn contains(&self, x: Vec2<T>) -> bool {
        x.x1 >= self.lower.x1 && x.x1 <= self.upper.x1 && x.x2 >= self.lower.x2 && x.x2 <= self.upper.x2
    }

    pub fn corners(&self) -> [Vec2<T>; 4] {
        [
            self.lower,
            Vec2::new(self.upper.x1, self.lower.x2),
            self.upper,
            Vec2::new(self.lower.x1, self.upper.x2),
        ]
    }

    /// Tensor grid of `m × m` points including the corners.
    pub fn grid(&self, m: usize) -> impl Iterator<Item = Vec2<T>> + '_ {
        let m = m.max(2);
        let step = move |lo: T, hi: T, k: usize| lo + (hi - lo) * T::lit(k as f64) / T::lit((m - 1) as f64);
        (0..m).flat_map(move |i| {
            (0..m).map(move |j| {
                Vec2::new(
                    step(self.lower.x1, self.upper.x1, i),
                    step(self.lower.x2, self.upper.x2, j),
                )
            })
        })
    }
}

pub type FieldFn<T> = Arc<dyn Fn(Vec2<T>) -> Vec2<T> + Send + Sync>;
pub type JacobianFn<T> = Arc<dyn Fn(Vec2<T>) -> Mat2<T> + Send + Sync>;

/// A smooth user-supplied field together with the box it is trusted on.
#[derive(Clone)]
pub struct AnalyticField<T> {
    field: FieldFn<T>,
    jacobian: Option<JacobianFn<T>>,
    pub region: RegionBox<T>,
}

impl<T: fmt::Debug> fmt::Debug for AnalyticField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("region", &self.region)
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl<T: Scalar> AnalyticField<T> {
    pub fn new(field: impl Fn(Vec2<T>) -> Vec2<T> + Send + Sync + 'static, region: RegionBox<T>) -> Self {
        Self { field: Arc::new(field), jacobian: None, region }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(Vec2<T>) -> Mat2<T> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Sampled Lipschitz estimate `max |s(x) − s(y)| / |x − y|` over neighbouring grid points.
    pub fn lipschitz_estimate(&self, m: usize) -> T {
        let pts: Vec<_> = self.region.grid(m).collect();
        let m = m.max(2);
        let mut lip = T::zero();
        for i in 0..m {
            for j in 0..m {
                let a = pts[i * m + j];
                let fa = (self.field)(a);
                for (di, dj) in [(1, 0), (0, 1)] {
                    if i + di < m && j + dj < m {
                        let b = pts[(i + di) * m + j + dj];
                        let ratio = ((self.field)(b) - fa).norm() / (b - a).norm();
                        lip = lip.max(ratio);
                    }
                }
            }
        }
        lip
    }
}

#[derive(Debug, Clone)]
pub enum CurrentField<T> {
    Constant { b: Vec2<T> },
    /// `s(x) = Dx + b`.
    Affine { d: Mat2<T>, b: Vec2<T> },
    Analytic(AnalyticField<T>),
}

impl<T: Scalar> CurrentField<T> {
    pub fn zero() -> Self {
        Self::Constant { b: Vec2::zero() }
    }

    pub fn constant(b: Vec2<T>) -> Self {
        Self::Constant { b }
    }

    pub fn affine(d: Mat2<T>, b: Vec2<T>) -> Self {
        Self::Affine { d, b }
    }

    pub fn eval(&self, x: Vec2<T>) -> Vec2<T> {
        match self {
            Self::Constant { b } => *b,
            Self::Affine { d, b } => *d * x + *b,
            Self::Analytic(f) => (f.field)(x),
        }
    }

    /// `∇s(x)`, entry `(i, j) = ∂sᵢ/∂xⱼ`.
    pub fn jacobian(&self, x: Vec2<T>) -> Mat2<T> {
        match self {
            Self::Constant { .. } => Mat2::zero(),
            Self::Affine { d, .. } => *d,
            Self::Analytic(f) => match &f.jacobian {
                Some(jac) => jac(x),
                None => central_difference_jacobian(|y| (f.field)(y), x),
            },
        }
    }

    /// True when the Jacobian does not depend on position.
    pub fn is_affine(&self) -> bool {
        !matches!(self, Self::Analytic(_))
    }

    /// Largest `|s(x)|` over sample points of the box; exact at the corners
    /// for constant and affine fields, where `|s|` is convex.
    fn max_speed_on(&self, region: &RegionBox<T>, n: usize) -> T {
        let m = (n as f64).sqrt().ceil() as usize;
        let corners = region.corners().into_iter();
        corners
            .chain(region.grid(m))
            .map(|x| self.eval(x).norm())
            .fold(T::zero(), T::max)
    }
}

/// Central differences with step `h = 1e-6 (1 + |x|)`.
pub fn central_difference_jacobian<T: Scalar>(f: impl Fn(Vec2<T>) -> Vec2<T>, x: Vec2<T>) -> Mat2<T> {
    let h = T::lit(1e-6) * (T::one() + x.norm());
    let e1 = Vec2::new(h, T::zero());
    let e2 = Vec2::new(T::zero(), h);
    let c1 = (f(x + e1) - f(x - e1)) / (T::two() * h);
    let c2 = (f(x + e2) - f(x - e2)) / (T::two() * h);
    Mat2::new(c1.x1, c2.x1, c1.x2, c2.x2)
}

pub fn eval_current<T: Scalar>(field: &CurrentField<T>, x: Vec2<T>) -> Vec2<T> {
    field.eval(x)
}

pub fn grad_current<T: Scalar>(field: &CurrentField<T>, x: Vec2<T>) -> Mat2<T> {
    field.jacobian(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakCurrentReport<T> {
    /// Inradius of the control set about the origin.
    pub epsilon: T,
    /// Largest sampled current speed over the region.
    pub delta: T,
    pub ok: bool,
}

impl<T: Scalar> WeakCurrentReport<T> {
    pub fn margin(&self) -> T {
        self.epsilon - self.delta
    }
}

/// Checks `B(0, ε) ⊆ U` and `|s(x)| < δ < ε` on the box. Connectivity of the
/// navigation area is assumed, not verified.
pub fn weak_current_check<T: Scalar>(
    field: &CurrentField<T>,
    set: &ControlSet<T>,
    region: &RegionBox<T>,
    n: usize,
) -> Result<WeakCurrentReport<T>, CurrentError> {
    if n < 100 {
        return Err(CurrentError::TooFewSamples(100));
    }
    if set.contains(Vec2::zero(), T::lit(1e-12)) != Membership::Inside {
        return Err(CurrentError::OriginOutside);
    }
    let mut epsilon = T::infinity();
    for k in 0..n {
        let d = Vec2::from_angle(T::TAU() * T::lit(k as f64) / T::lit(n as f64));
        epsilon = epsilon.min(set.gauge_along(d)?);
    }
    let delta = field.max_speed_on(region, n);
    Ok(WeakCurrentReport { epsilon, delta, ok: epsilon > delta })
}

/// For point targets the tangent cone is `{0}`, so permanence reduces to `−s(x) ∈ U`.
pub fn permanence_check<T: Scalar>(field: &CurrentField<T>, set: &ControlSet<T>, targets: &[Vec2<T>]) -> bool {
    targets
        .iter()
        .all(|&x| set.contains(-field.eval(x), T::lit(1e-9)) != Membership::Outside)
}
