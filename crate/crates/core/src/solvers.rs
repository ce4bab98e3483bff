//! Solution strategies: costate shooting, constant-current routing, the
//! closed-form affine/elliptic examples, and a grid value-iteration oracle.

use std::f64::consts::{PI, TAU};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convex::{ConvexError, Membership};
use crate::dynamics::{
    diagnostics, integrate_pmp_from, pmp_closest_approach, ClosestApproach, Diagnostics, DynamicsError, Leg,
    PmpSample, PmpTrajectory, Terminal,
};
use crate::{ControlSet, CurrentField, Mat2, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("no costate angle reaches the target (best miss {best_miss:.3e})")]
    NoHit { best_miss: f64 },
    #[error("target unreachable: the current dominates along the chord")]
    Unreachable,
    #[error("no admissible root: {0}")]
    NoRoot(&'static str),
    #[error("target unreachable for these parameters")]
    TargetUnreachable,
    #[error("value iteration did not converge in {sweeps} sweeps")]
    NotConverged { sweeps: usize },
    #[error("start lies outside the grid")]
    StartOutsideGrid,
    #[error("grid too coarse: dt·max speed = {step:.3e} must be below the cell size {cell:.3e}")]
    GridTooCoarse { step: f64, cell: f64 },
    #[error("unsupported scenario: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// A start or target locus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    Point(Vec2),
    Segment(Vec2, Vec2),
}

impl Locus {
    pub fn at(&self, tau: f64) -> Vec2 {
        match *self {
            Self::Point(p) => p,
            Self::Segment(a, b) => a + (b - a) * tau,
        }
    }

    /// Defining points: the point itself or both segment ends.
    pub fn points(&self) -> Vec<Vec2> {
        match *self {
            Self::Point(p) => vec![p],
            Self::Segment(a, b) => vec![a, b],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub point: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub scan_angles: usize,
    pub angle_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { scan_angles: 720, angle_tol: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub start: Locus,
    pub target: Target,
    pub set: ControlSet,
    pub field: CurrentField,
    pub horizon: f64,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn new(name: &str, start: Locus, target: Target, set: ControlSet, field: CurrentField, horizon: f64) -> Self {
        Self { name: name.to_owned(), start, target, set, field, horizon, tolerances: Tolerances::default() }
    }

    fn start_point(&self) -> Result<Vec2, SolverError> {
        match self.start {
            Locus::Point(p) => Ok(p),
            Locus::Segment(..) => Err(SolverError::Unsupported("this solver needs a point start")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverId {
    Shoot,
    Constant,
    AnalyticExample,
    BruteForce,
}

impl SolverId {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Shoot => "shoot",
            Self::Constant => "constant",
            Self::AnalyticExample => "analytic_example",
            Self::BruteForce => "brute_force",
        }
    }
}

/// One audited candidate: a costate angle, start parameter, or root `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub parameter: f64,
    pub t_f: Option<f64>,
    pub miss: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solver: SolverId,
    pub t_f: f64,
    pub x0: Vec2,
    pub trajectory: PmpTrajectory,
    pub diagnostics: Diagnostics,
    pub candidates: Vec<Candidate>,
    pub transversality: f64,
}

impl SolveResult {
    /// Largest distance of a sample from the straight chord `x0 → x(t_f)`.
    pub fn chord_deviation(&self) -> f64 {
        let a = self.trajectory.samples[0].x;
        let b = self.trajectory.end().x;
        let Some(dir) = (b - a).normalized() else { return 0.0 };
        self.trajectory.samples.iter().map(|s| dir.cross(s.x - a).abs()).fold(0.0, f64::max)
    }

    pub fn path_length(&self) -> f64 {
        self.trajectory.samples.windows(2).map(|w| w[0].x.distance(w[1].x)).sum()
    }

    /// Largest deviation of `u(t)` from `u(0)`.
    pub fn control_variation(&self) -> f64 {
        let u0 = self.trajectory.samples[0].u;
        self.trajectory.samples.iter().map(|s| (s.u - u0).norm()).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// helpers

/// Bisection on a sign change of `f` over `[a, b]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
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
    0.5 * (a + b)
}

/// Maps `f` over `items` on all cores, preserving order.
fn par_map<I: Sync, O: Send>(items: &[I], f: impl Fn(&I) -> O + Sync) -> Vec<O> {
    let workers = thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn finish(
    solver: SolverId,
    scenario: &Scenario,
    mut trajectory: PmpTrajectory,
    t_f: f64,
    candidates: Vec<Candidate>,
    transversality: f64,
) -> SolveResult {
    trajectory.classify(&scenario.field);
    let diagnostics = diagnostics(&trajectory.samples, &scenario.set, &scenario.field);
    let x0 = trajectory.samples[0].x;
    SolveResult { solver, t_f, x0, trajectory, diagnostics, candidates, transversality }
}

// ---------------------------------------------------------------------------
// shooting

/// Scans initial costate angles, bisects sign changes of the signed miss and
/// keeps the fastest angle whose trajectory enters the target ball.
pub fn shoot(scenario: &Scenario) -> Result<SolveResult, SolverError> {
    let x0 = scenario.start_point()?;
    let set = &scenario.set;
    let field = &scenario.field;
    let radius = scenario.target.radius;
    let scan_leg = Leg::new(x0, scenario.horizon, scenario.target.point, 0.0);
    let miss = |phi: f64| -> f64 {
        match pmp_closest_approach(set, field, &scan_leg, Vec2::from_angle(phi)) {
            Ok((ClosestApproach { signed_miss, .. }, _)) => signed_miss,
            Err(_) => f64::NAN,
        }
    };

    // convexity is a precondition of every integration; check once up front
    let report = set.verify_strict_convexity(256)?;
    if !report.ok {
        return Err(DynamicsError::StrictConvexityViolated { min_delta: report.min_delta }.into());
    }

    let n = scenario.tolerances.scan_angles.max(8);
    let angles: Vec<f64> = (0..n).map(|k| -PI + TAU * k as f64 / n as f64).collect();
    let misses = par_map(&angles, |&phi| miss(phi));

    let mut brackets = Vec::new();
    for k in 0..n {
        let (m0, m1) = (misses[k], misses[(k + 1) % n]);
        if !(m0.is_finite() && m1.is_finite()) {
            continue;
        }
        let a = angles[k];
        let b = if k + 1 == n { PI } else { angles[k + 1] };
        if m0 == 0.0 {
            brackets.push((a, a));
        } else if m0 * m1 < 0.0 {
            brackets.push((a, b));
        }
    }

    let tol = scenario.tolerances.angle_tol;
    let refined = par_map(&brackets, |&(a, b)| {
        let phi = if a == b { a } else { bisect(miss, a, b, tol) };
        let leg = Leg::new(x0, scenario.horizon, scenario.target.point, radius);
        let closest = pmp_closest_approach(set, field, &scan_leg, Vec2::from_angle(phi)).map(|c| c.0.distance);
        let hit = integrate_pmp_from(set, field, &leg, Vec2::from_angle(phi));
        (phi, closest.unwrap_or(f64::INFINITY), hit)
    });

    let mut candidates = Vec::new();
    let mut best: Option<(f64, PmpTrajectory)> = None;
    let mut best_miss = misses.iter().filter(|m| m.is_finite()).fold(f64::INFINITY, |b, m| b.min(m.abs()));
    for (phi, distance, hit) in refined {
        best_miss = best_miss.min(distance);
        let t_f = hit.as_ref().ok().and_then(|t| t.terminal.hit_time());
        let accepted = distance <= radius && t_f.is_some();
        candidates.push(Candidate { parameter: phi, t_f, miss: distance, accepted });
        if let (true, Some(t), Ok(traj)) = (accepted, t_f, hit) {
            if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                best = Some((t, traj));
            }
        }
    }
    let (t_f, traj) = best.ok_or(SolverError::NoHit { best_miss })?;
    Ok(finish(SolverId::Shoot, scenario, traj, t_f, candidates, 0.0))
}

// ---------------------------------------------------------------------------
// constant current

/// Straight route for a constant current; segment starts are optimized over
/// the segment and certified by transversality.
pub fn constant_current_route(scenario: &Scenario) -> Result<SolveResult, SolverError> {
    let CurrentField::Constant { b: s } = scenario.field else {
        return Err(SolverError::Unsupported("constant_current_route needs a constant current"));
    };
    let set = &scenario.set;
    let shifted = set.clone().shifted(s);
    let target = scenario.target;

    let time_from = |x0: Vec2| -> Result<(f64, Vec2), SolverError> {
        let chord = target.point - x0;
        let dist = chord.norm();
        let d = chord.normalized().ok_or(SolverError::Unsupported("start coincides with target"))?;
        let lambda = match shifted.gauge_along(d) {
            Ok(l) => l,
            Err(ConvexError::RayMisses { .. }) => return Err(SolverError::Unreachable),
            Err(e) => return Err(e.into()),
        };
        if !(lambda > 0.0) {
            return Err(SolverError::Unreachable);
        }
        Ok(((dist - target.radius).max(0.0) / lambda, d * lambda - s))
    };

    let mut candidates = Vec::new();
    let (x0, t_f, u) = match scenario.start {
        Locus::Point(x0) => {
            let (t, u) = time_from(x0)?;
            (x0, t, u)
        }
        Locus::Segment(a, b) => {
            let cost = |tau: f64| time_from(a + (b - a) * tau).map(|r| r.0).unwrap_or(f64::INFINITY);
            let m = 64;
            let scan: Vec<f64> = (0..=m).map(|k| cost(k as f64 / m as f64)).collect();
            for (k, t) in scan.iter().enumerate() {
                candidates.push(Candidate {
                    parameter: k as f64 / m as f64,
                    t_f: t.is_finite().then_some(*t),
                    miss: 0.0,
                    accepted: false,
                });
            }
            let k_best = (0..=m).fold(0, |best, k| if scan[k] < scan[best] { k } else { best });
            if !scan[k_best].is_finite() {
                return Err(SolverError::Unreachable);
            }
            let lo = k_best.saturating_sub(1) as f64 / m as f64;
            let hi = (k_best + 1).min(m) as f64 / m as f64;
            let mut tau = golden_min(cost, lo, hi, 1e-12);

            // sharpen the interior optimum on the tangential costate component
            let tangent = (b - a).normalized().ok_or(SolverError::Unsupported("degenerate segment"))?;
            let tangential = |tau: f64| {
                time_from(a + (b - a) * tau)
                    .map(|(_, u)| set.outward_normal(u).dot(tangent))
                    .unwrap_or(f64::NAN)
            };
            let (ga, gb) = (tangential(lo), tangential(hi));
            if ga.is_finite() && gb.is_finite() && ga * gb < 0.0 {
                let polished = bisect(tangential, lo, hi, 1e-15);
                if cost(polished) <= cost(tau) + 1e-12 {
                    tau = polished;
                }
            }
            for (t, tau_c) in [(cost(0.0), 0.0), (cost(1.0), 1.0)] {
                if t < cost(tau) {
                    tau = tau_c;
                }
            }
            let x0 = a + (b - a) * tau;
            let (t, u) = time_from(x0)?;
            candidates.push(Candidate { parameter: tau, t_f: Some(t), miss: 0.0, accepted: true });
            (x0, t, u)
        }
    };

    let p = set.outward_normal(u);
    let v = u + s;
    let xf = x0 + v * t_f;
    let leg = Leg::new(x0, t_f.max(f64::MIN_POSITIVE), target.point, 0.0);
    let dt = leg.sample_spacing();
    let steps = (t_f / dt).floor() as usize;
    let mut samples: Vec<PmpSample> =
        (0..=steps).map(|k| k as f64 * dt).map(|t| PmpSample { t, x: x0 + v * t, p, u }).collect();
    if t_f - samples.last().map(|s| s.t).unwrap_or(0.0) < 0.5 * dt && samples.len() > 1 {
        samples.pop();
    }
    samples.push(PmpSample { t: t_f, x: xf, p, u });
    let closest = ClosestApproach { t: t_f, distance: xf.distance(target.point), signed_miss: 0.0 };
    let traj = PmpTrajectory { samples, terminal: Terminal::TargetHit { t_f }, closest, p0: None };
    let transversality = transversality_residual(p, &scenario.start, &Locus::Point(target.point), x0, xf);
    Ok(finish(SolverId::Constant, scenario, traj, t_f, candidates, transversality))
}

/// Angular distance of `p` from `N_A(x0)` plus that of `−p` from `N_B(xf)`.
pub fn transversality_residual(p: Vec2, start: &Locus, end: &Locus, x0: Vec2, xf: Vec2) -> f64 {
    cone_deviation(p, start, x0) + cone_deviation(-p, end, xf)
}

fn cone_deviation(p: Vec2, locus: &Locus, x: Vec2) -> f64 {
    let Locus::Segment(a, b) = *locus else { return 0.0 };
    let (Some(pn), Some(tangent)) = (p.normalized(), (b - a).normalized()) else { return 0.0 };
    let len = (b - a).norm();
    let tau = (x - a).dot(tangent) / len;
    let edge = 1e-9;
    if tau <= edge {
        // half-plane {⟨p, a − b⟩ ≥ 0}
        (-pn.dot(-tangent)).clamp(0.0, 1.0).asin()
    } else if tau >= 1.0 - edge {
        (-pn.dot(tangent)).clamp(0.0, 1.0).asin()
    } else {
        pn.dot(tangent).abs().min(1.0).asin()
    }
}

// ---------------------------------------------------------------------------
// affine current on the elliptic set

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    /// `s(x) = (−εx₁, 0)`.
    Upstream,
    /// `s(x) = (εx₁, 0)`.
    Downstream,
}

impl Drift {
    fn sign(self) -> f64 {
        match self {
            Self::Upstream => 1.0,
            Self::Downstream => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootInfo {
    pub c: f64,
    pub e: f64,
    /// Hitting time when the root is admissible.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub eps: f64,
    pub a: f64,
    pub drift: Drift,
    pub target: Vec2,
    pub t_const: Option<f64>,
    pub u_const: Option<Vec2>,
    pub roots: Vec<RootInfo>,
    pub t_opt: f64,
    /// `None` when the constant control is the fastest candidate.
    pub c_opt: Option<f64>,
    pub feedback_samples: Vec<(f64, Vec2)>,
}

impl ExampleResult {
    pub fn roots_c(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.c).collect()
    }

    pub fn e_values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.e).collect()
    }

    fn ae(&self) -> f64 {
        self.a * self.eps
    }

    /// Closed-form `(x, u, p)` on the extremal with constant `c`;
    /// `p = (e^{±εt}, aC)` with `+` upstream.
    pub fn extremal_state(&self, c: f64, t: f64) -> (Vec2, Vec2, Vec2) {
        let (eps, a) = (self.eps, self.a);
        let sq = (1.0 + c * c).sqrt();
        let sg = self.drift.sign();
        // w = e^{∓εt}
        let w = (-sg * eps * t).exp();
        let cw = c * w;
        let root_w = (1.0 + cw * cw).sqrt();
        let x1 = match self.drift {
            Drift::Upstream => (root_w - w * sq) / eps,
            Drift::Downstream => (w * sq - root_w) / eps,
        };
        let x2 = sg * (c.asinh() - cw.asinh()) / self.ae();
        let u = Vec2::new(1.0, cw / a) / root_w;
        let p = Vec2::new(1.0 / w, a * c);
        (Vec2::new(x1, x2), u, p)
    }

    /// Constant-control state at `t`.
    pub fn constant_state(&self, t: f64) -> Option<Vec2> {
        let u = self.u_const?;
        let eps = self.eps;
        let grow = match self.drift {
            Drift::Upstream => -(-eps * t).exp_m1(),
            Drift::Downstream => (eps * t).exp_m1(),
        };
        Some(Vec2::new(u.x1 * grow / eps, u.x2 * t))
    }

    /// Feedback control `u(x₂) = (1, h/a)/√(1 + h²)` with
    /// `h = C cosh(aεx₂) ∓ √(1+C²) sinh(aεx₂)`.
    pub fn feedback(&self, c: f64, x2: f64) -> Vec2 {
        let z = self.ae() * x2;
        let h = c * z.cosh() - self.drift.sign() * (1.0 + c * c).sqrt() * z.sinh();
        Vec2::new(1.0, h / self.a) / (1.0 + h * h).sqrt()
    }

    /// Samples of the optimal extremal at spacing `min(1e-2 t_opt, 1e-3)`.
    pub fn optimal_samples(&self) -> Vec<PmpSample> {
        let dt = (1e-2 * self.t_opt).min(1e-3);
        let n = (self.t_opt / dt).floor() as usize;
        let mut ts: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        if self.t_opt - ts[ts.len() - 1] < 0.5 * dt && ts.len() > 1 {
            ts.pop();
        }
        ts.push(self.t_opt);
        ts.into_iter()
            .map(|t| match (self.c_opt, self.u_const) {
                (Some(c), _) => {
                    let (x, u, p) = self.extremal_state(c, t);
                    PmpSample { t, x, p, u }
                }
                (None, Some(u)) => {
                    let x = self.constant_state(t).unwrap_or_default();
                    let p = Vec2::new(u.x1, self.a * self.a * u.x2);
                    PmpSample { t, x, p, u }
                }
                (None, None) => unreachable!("t_opt always comes from some candidate"),
            })
            .collect()
    }
}

/// The closed-form examples for `U = {u₁² + a²u₂² ≤ 1}` and `s = (∓εx₁, 0)`,
/// starting at the origin.
pub fn affine_elliptic_example(eps: f64, a: f64, drift: Drift, target: Vec2) -> Result<ExampleResult, SolverError> {
    if !(eps > 0.0 && eps < 1.0) || !(a > 0.0) || !a.is_finite() {
        return Err(SolverError::NoRoot("need 0 < ε < 1 and a > 0"));
    }
    let (b1, b2) = (target.x1, target.x2);
    if !(b1 > 0.0 && b2 > 0.0) || !target.is_finite() {
        return Err(SolverError::TargetUnreachable);
    }
    let sg = drift.sign();

    // (i) constant control
    let grow = |t: f64| match drift {
        Drift::Upstream => -(-eps * t).exp_m1(),
        Drift::Downstream => (eps * t).exp_m1(),
    };
    let residual = |t: f64| {
        let g = eps * b1 / grow(t);
        g * g + (a * b2 / t).powi(2) - 1.0
    };
    let (lo, hi) = (1e-6, 1e3);
    let t_const = if residual(lo) > 0.0 && residual(hi) < 0.0 {
        let f = |t: f64| residual(t);
        Some(bisect(f, lo, hi, 1e-13))
    } else {
        None
    };
    let u_const = t_const.map(|t| Vec2::new(eps * b1 / grow(t), b2 / t));

    // (ii) non-constant extremals: roots of F(C) = G² ± 2εb₁CG√(1+C²) + (ε²b₁² − 1)C²
    let z = a * eps * b2;
    let (ch, sh) = (z.cosh(), z.sinh());
    let g_of = |c: f64| c * ch - sg * (1.0 + c * c).sqrt() * sh;
    let f_of = |c: f64| {
        let g = g_of(c);
        g * g + sg * 2.0 * eps * b1 * c * g * (1.0 + c * c).sqrt() + (eps * eps * b1 * b1 - 1.0) * c * c
    };
    let n = 4096;
    let (l0, l1) = (1e-6f64.ln(), 1e3f64.ln());
    let mags: Vec<f64> = (0..n).map(|k| (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp()).collect();
    let mut roots = Vec::new();
    for side in [-1.0, 1.0] {
        let cs: Vec<f64> = mags.iter().map(|m| side * m).collect();
        let fs: Vec<f64> = cs.iter().map(|&c| f_of(c)).collect();
        for k in 0..n - 1 {
            if fs[k] == 0.0 || fs[k] * fs[k + 1] < 0.0 {
                let c = if fs[k] == 0.0 { cs[k] } else { bisect(f_of, cs[k], cs[k + 1], 1e-12) };
                let e = g_of(c) / c;
                let sq = (1.0 + c * c).sqrt();
                // the squared x₁ condition must hold unsquared as well
                let t = match drift {
                    Drift::Upstream if e > 0.0 && e < 1.0 => Some(-e.ln() / eps),
                    Drift::Downstream if e > 1.0 && e * sq - eps * b1 >= 0.0 => Some(e.ln() / eps),
                    _ => None,
                };
                roots.push(RootInfo { c, e, t });
            }
        }
    }
    roots.sort_by(|x, y| x.c.total_cmp(&y.c));

    // (iii) fastest admissible candidate
    let mut t_opt = t_const.unwrap_or(f64::INFINITY);
    let mut c_opt = None;
    for r in &roots {
        if let Some(t) = r.t {
            if t < t_opt {
                t_opt = t;
                c_opt = Some(r.c);
            }
        }
    }
    if !t_opt.is_finite() {
        return Err(SolverError::TargetUnreachable);
    }
    let mut result = ExampleResult {
        eps,
        a,
        drift,
        target,
        t_const,
        u_const,
        roots,
        t_opt,
        c_opt,
        feedback_samples: Vec::new(),
    };
    if let Some(c) = c_opt {
        result.feedback_samples = (0..=64).map(|k| b2 * k as f64 / 64.0).map(|x2| (x2, result.feedback(c, x2))).collect();
    }
    Ok(result)
}

/// Recognizes the elliptic/affine family in a scenario.
pub fn affine_elliptic_parameters(scenario: &Scenario) -> Option<(f64, f64, Drift)> {
    let ControlSet::Ellipse { r1, r2 } = scenario.set else { return None };
    let CurrentField::Affine { d, b } = scenario.field else { return None };
    let Locus::Point(x0) = scenario.start else { return None };
    if r1 != 1.0 || b != Vec2::zero() || x0 != Vec2::zero() || d.m12 != 0.0 || d.m21 != 0.0 || d.m22 != 0.0 {
        return None;
    }
    let flow = if d.m11 < 0.0 { Drift::Upstream } else { Drift::Downstream };
    Some((d.m11.abs(), 1.0 / r2, flow))
}

/// Solves a scenario of the elliptic/affine family in closed form.
pub fn solve_affine_elliptic(scenario: &Scenario) -> Result<(SolveResult, ExampleResult), SolverError> {
    let (eps, a, drift) = affine_elliptic_parameters(scenario)
        .ok_or(SolverError::Unsupported("analytic example needs U = {u₁² + a²u₂² ≤ 1}, s = (∓εx₁, 0), x₀ = 0"))?;
    let ex = affine_elliptic_example(eps, a, drift, scenario.target.point)?;
    let samples = ex.optimal_samples();
    let xf = samples[samples.len() - 1].x;
    let closest = ClosestApproach { t: ex.t_opt, distance: xf.distance(scenario.target.point), signed_miss: 0.0 };
    let traj = PmpTrajectory { samples, terminal: Terminal::TargetHit { t_f: ex.t_opt }, closest, p0: None };
    let mut candidates: Vec<Candidate> = ex
        .roots
        .iter()
        .map(|r| Candidate { parameter: r.c, t_f: r.t, miss: 0.0, accepted: r.t.is_some() })
        .collect();
    if let Some(t) = ex.t_const {
        candidates.push(Candidate { parameter: f64::INFINITY, t_f: Some(t), miss: 0.0, accepted: true });
    }
    let result = finish(SolverId::AnalyticExample, scenario, traj, ex.t_opt, candidates, 0.0);
    Ok((result, ex))
}

// ---------------------------------------------------------------------------
// value-iteration oracle

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub n_controls: usize,
    pub dt: f64,
    /// Lower and upper corners; derived from the scenario when absent.
    pub bounds: Option<(Vec2, Vec2)>,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, n_controls: usize, dt: f64) -> Self {
        Self { nx, ny, n_controls, dt, bounds: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub sweeps: usize,
}

impl BruteForceEstimate {
    pub fn contains(&self, t: f64) -> bool {
        self.lower <= t && t <= self.upper
    }
}

/// Square box around start and target with a 50 % margin on each side.
pub fn default_bounds(scenario: &Scenario) -> (Vec2, Vec2) {
    let mut pts = scenario.start.points();
    pts.push(scenario.target.point);
    let lo = pts[1..].iter().fold(pts[0], |m, p| Vec2::new(m.x1.min(p.x1), m.x2.min(p.x2)));
    let hi = pts[1..].iter().fold(pts[0], |m, p| Vec2::new(m.x1.max(p.x1), m.x2.max(p.x2)));
    let centre = (lo + hi) * 0.5;
    let half = (hi.x1 - lo.x1).max(hi.x2 - lo.x2).max(1e-3);
    (centre - Vec2::new(half, half), centre + Vec2::new(half, half))
}

struct Grid {
    lo: Vec2,
    hx: f64,
    hy: f64,
    nx: usize,
    ny: usize,
}

impl Grid {
    fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.lo.x1 + self.hx * i as f64, self.lo.x2 + self.hy * j as f64)
    }

    /// Bilinear stencil `(index, weight)` for `x`, or `None` outside the grid.
    fn stencil(&self, x: Vec2) -> Option<[(usize, f64); 4]> {
        let fx = (x.x1 - self.lo.x1) / self.hx;
        let fy = (x.x2 - self.lo.x2) / self.hy;
        let slack = 1e-12;
        if !(fx >= -slack && fy >= -slack && fx <= (self.nx - 1) as f64 + slack && fy <= (self.ny - 1) as f64 + slack) {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 2);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 2);
        let (ax, ay) = ((fx - i as f64).clamp(0.0, 1.0), (fy - j as f64).clamp(0.0, 1.0));
        let id = |i: usize, j: usize| j * self.nx + i;
        Some([
            (id(i, j), (1.0 - ax) * (1.0 - ay)),
            (id(i + 1, j), ax * (1.0 - ay)),
            (id(i, j + 1), (1.0 - ax) * ay),
            (id(i + 1, j + 1), ax * ay),
        ])
    }

    fn interp(&self, values: &[f64], x: Vec2) -> Option<f64> {
        let st = self.stencil(x)?;
        let mut acc = 0.0;
        for (idx, w) in st {
            acc += w * values[idx];
        }
        Some(acc)
    }
}

/// Semi-Lagrangian value iteration for the minimum-time function with
/// boundary controls only.
pub fn brute_force_min_time(scenario: &Scenario, spec: &GridSpec) -> Result<BruteForceEstimate, SolverError> {
    if spec.nx < 3 || spec.ny < 3 || spec.n_controls < 8 || !(spec.dt > 0.0) {
        return Err(SolverError::Unsupported("grid needs nx, ny ≥ 3, ≥ 8 controls and dt > 0"));
    }
    let (lo, hi) = spec.bounds.unwrap_or_else(|| default_bounds(scenario));
    let grid = Grid {
        lo,
        hx: (hi.x1 - lo.x1) / (spec.nx - 1) as f64,
        hy: (hi.x2 - lo.x2) / (spec.ny - 1) as f64,
        nx: spec.nx,
        ny: spec.ny,
    };
    let inside = |x: Vec2| x.x1 >= lo.x1 && x.x1 <= hi.x1 && x.x2 >= lo.x2 && x.x2 <= hi.x2;
    if !scenario.start.points().into_iter().all(inside) {
        return Err(SolverError::StartOutsideGrid);
    }

    let set = &scenario.set;
    let controls: Vec<Vec2> = (0..spec.n_controls)
        .map(|k| set.maximizer(Vec2::from_angle(TAU * k as f64 / spec.n_controls as f64)))
        .collect::<Result<_, _>>()?;
    let n_nodes = spec.nx * spec.ny;
    let nodes: Vec<Vec2> = (0..n_nodes).map(|id| grid.node(id % spec.nx, id / spec.nx)).collect();
    let currents: Vec<Vec2> = nodes.iter().map(|&x| scenario.field.eval(x)).collect();

    let cell = grid.hx.min(grid.hy);
    let max_speed = currents
        .iter()
        .flat_map(|s| controls.iter().map(move |u| (*u + *s).norm()))
        .fold(0.0, f64::max);
    if spec.dt * max_speed >= cell {
        return Err(SolverError::GridTooCoarse { step: spec.dt * max_speed, cell });
    }

    // a full diagonal seeds every corner of the cell holding the target, so
    // feet landing in that cell see a finite stencil
    let capture = scenario.target.radius.max(grid.hx.hypot(grid.hy));
    // Unreached nodes hold a finite cap instead of ∞ so that feet near the
    // reached front still see a usable stencil; iteration descends from above.
    let cap = 4.0 * scenario.horizon.max(spec.dt);
    let is_target: Vec<bool> = nodes.iter().map(|x| x.distance(scenario.target.point) <= capture).collect();
    let mut value: Vec<f64> = is_target.iter().map(|&t| if t { 0.0 } else { cap }).collect();

    let orders: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];
    let max_sweeps = 100_000;
    let mut sweeps = 0;
    loop {
        let mut change: f64 = 0.0;
        let (rev_i, rev_j) = orders[sweeps % 4];
        for jj in 0..spec.ny {
            let j = if rev_j { spec.ny - 1 - jj } else { jj };
            for ii in 0..spec.nx {
                let i = if rev_i { spec.nx - 1 - ii } else { ii };
                let id = j * spec.nx + i;
                if is_target[id] {
                    continue;
                }
                let mut best = cap;
                for u in &controls {
                    let foot = nodes[id] + (*u + currents[id]) * spec.dt;
                    let Some(st) = grid.stencil(foot) else { continue };
                    let mut acc = spec.dt;
                    let mut w_self = 0.0;
                    for (idx, w) in st {
                        if idx == id {
                            w_self += w;
                        } else {
                            acc += w * value[idx];
                        }
                    }
                    if w_self < 1.0 {
                        best = best.min(acc / (1.0 - w_self));
                    }
                }
                change = change.max((best - value[id]).abs());
                value[id] = best;
            }
        }
        sweeps += 1;
        if change < 1e-6 {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(SolverError::NotConverged { sweeps });
        }
    }

    let estimate = match scenario.start {
        Locus::Point(x0) => grid.interp(&value, x0).unwrap_or(cap),
        Locus::Segment(..) => (0..=1000)
            .filter_map(|k| grid.interp(&value, scenario.start.at(k as f64 / 1000.0)))
            .fold(cap, f64::min),
    };
    if estimate >= 0.5 * cap {
        return Err(SolverError::Unreachable);
    }

    // slowest net speed over a sub-grid of nodes and a fan of directions
    let stride = 4;
    let mut min_speed = f64::INFINITY;
    for j in (0..spec.ny).step_by(stride).chain([spec.ny - 1]) {
        for i in (0..spec.nx).step_by(stride).chain([spec.nx - 1]) {
            let id = j * spec.nx + i;
            let shifted = set.clone().shifted(currents[id]);
            if shifted.contains(Vec2::zero(), 1e-12) != Membership::Inside {
                min_speed = 0.0;
                continue;
            }
            for k in 0..spec.n_controls {
                let d = Vec2::from_angle(TAU * k as f64 / spec.n_controls as f64);
                min_speed = min_speed.min(shifted.gauge_along(d).unwrap_or(0.0));
            }
        }
    }
    let err = spec.dt + 2.0 * grid.hx.hypot(grid.hy) / min_speed;
    Ok(BruteForceEstimate { estimate, lower: estimate - err, upper: estimate + err, sweeps })
}

// ---------------------------------------------------------------------------
// bundled scenarios

/// Scenarios reproducing the worked examples; the CLI ships the same ones as JSON.
pub mod bundled {
    use super::*;

    pub const SHOOT_RADIUS: f64 = 1e-9;

    fn point_target(x: f64, y: f64) -> Target {
        Target { point: Vec2::new(x, y), radius: SHOOT_RADIUS }
    }

    pub fn upstream_ellipse() -> Scenario {
        Scenario::new(
            "upstream_ellipse",
            Locus::Point(Vec2::zero()),
            point_target(1.0, 1.0),
            ControlSet::elliptic(2.0).expect("valid"),
            CurrentField::affine(Mat2::diag(-0.5, 0.0), Vec2::zero()),
            4.0,
        )
    }

    pub fn downstream_ellipse() -> Scenario {
        Scenario::new(
            "downstream_ellipse",
            Locus::Point(Vec2::zero()),
            point_target(1.0, 1.0),
            ControlSet::elliptic(2.0).expect("valid"),
            CurrentField::affine(Mat2::diag(0.5, 0.0), Vec2::zero()),
            4.0,
        )
    }

    pub fn no_current_disk() -> Scenario {
        Scenario::new(
            "no_current_disk",
            Locus::Point(Vec2::zero()),
            point_target(1.0, 0.0),
            ControlSet::disk(1.0).expect("valid"),
            CurrentField::zero(),
            2.0,
        )
    }

    pub fn constant_current_disk() -> Scenario {
        Scenario::new(
            "constant_current_disk",
            Locus::Point(Vec2::zero()),
            point_target(0.0, 4.0),
            ControlSet::disk(2.0).expect("valid"),
            CurrentField::constant(Vec2::new(-1.0, 0.0)),
            4.0,
        )
    }

    pub fn egg_start_line() -> Scenario {
        Scenario::new(
            "egg_start_line",
            Locus::Segment(Vec2::new(-4.0, 0.0), Vec2::new(4.0, 0.0)),
            point_target(0.0, 4.0),
            ControlSet::egg(1.0, 0.3).expect("valid"),
            CurrentField::constant(Vec2::new(-0.4, 0.0)),
            12.0,
        )
    }

    pub fn isotropic_affine() -> Scenario {
        Scenario::new(
            "isotropic_affine",
            Locus::Point(Vec2::zero()),
            point_target(1.0, 1.0),
            ControlSet::disk(1.0).expect("valid"),
            CurrentField::affine(Mat2::diag(0.2, 0.2), Vec2::zero()),
            3.0,
        )
    }

    pub fn all() -> Vec<Scenario> {
        vec![
            upstream_ellipse(),
            downstream_ellipse(),
            no_current_disk(),
            constant_current_disk(),
            egg_start_line(),
            isotropic_affine(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_shot_on_unit_disk() {
        let r = shoot(&bundled::no_current_disk()).unwrap();
        assert!((r.t_f - 1.0).abs() < 1e-9, "{}", r.t_f);
        assert!(r.control_variation() < 1e-12);
    }

    #[test]
    fn constant_route_examples() {
        let disk1 = ControlSet::disk(1.0).unwrap();
        let target = |x, y| Target { point: Vec2::new(x, y), radius: 0.0 };
        let sc = Scenario::new("a", Locus::Point(Vec2::zero()), target(3.0, 4.0), disk1.clone(), CurrentField::zero(), 9.0);
        let r = constant_current_route(&sc).unwrap();
        assert!((r.t_f - 5.0).abs() < 1e-12);
        assert!((r.trajectory.samples[0].u - Vec2::new(0.6, 0.8)).norm() < 1e-12);

        let sc = Scenario::new(
            "b",
            Locus::Point(Vec2::zero()),
            target(1.0, 0.0),
            disk1.clone(),
            CurrentField::constant(Vec2::new(-0.5, 0.0)),
            9.0,
        );
        let r = constant_current_route(&sc).unwrap();
        assert!((r.t_f - 2.0).abs() < 1e-10);
        assert!((r.trajectory.samples[0].u - Vec2::new(1.0, 0.0)).norm() < 1e-10);

        let sc = Scenario::new(
            "c",
            Locus::Point(Vec2::zero()),
            target(1.0, 0.0),
            disk1,
            CurrentField::constant(Vec2::new(-2.0, 0.0)),
            9.0,
        );
        assert_eq!(constant_current_route(&sc).unwrap_err(), SolverError::Unreachable);
    }

    #[test]
    fn transversality_examples() {
        let seg = Locus::Segment(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
        let pt = Locus::Point(Vec2::new(0.0, 5.0));
        let xf = Vec2::new(0.0, 5.0);
        assert!(transversality_residual(Vec2::new(0.0, 1.0), &seg, &pt, Vec2::new(0.2, 0.0), xf) < 1e-15);
        let diag = Vec2::new(1.0, 1.0) / 2f64.sqrt();
        let r = transversality_residual(diag, &seg, &pt, Vec2::new(0.2, 0.0), xf);
        assert!((r - PI / 4.0).abs() < 1e-12);
        assert_eq!(transversality_residual(diag, &seg, &pt, Vec2::new(1.0, 0.0), xf), 0.0);
        assert!(transversality_residual(-diag, &seg, &pt, Vec2::new(1.0, 0.0), xf) > 0.7);
        assert_eq!(transversality_residual(diag, &pt, &pt, xf, xf), 0.0);
    }

    #[test]
    fn vanishing_current_recovers_disk_distance() {
        let ex = affine_elliptic_example(1e-6, 1.0, Drift::Upstream, Vec2::new(1.0, 1.0)).unwrap();
        assert!((ex.t_opt - 2f64.sqrt()).abs() < 1e-3, "{}", ex.t_opt);
    }

    #[test]
    fn closed_form_extremal_hits_target() {
        for flow in [Drift::Upstream, Drift::Downstream] {
            let ex = affine_elliptic_example(0.5, 2.0, flow, Vec2::new(1.0, 1.0)).unwrap();
            let c = ex.c_opt.unwrap();
            let (x, _, _) = ex.extremal_state(c, ex.t_opt);
            assert!(x.distance(Vec2::new(1.0, 1.0)) < 1e-8, "{flow:?} {x:?}");
            assert!(ex.t_opt <= ex.t_const.unwrap() + 1e-12);
            let xc = ex.constant_state(ex.t_const.unwrap()).unwrap();
            assert!(xc.distance(Vec2::new(1.0, 1.0)) < 1e-8);
        }
    }

    #[test]
    fn elliptic_parameters_are_recognized() {
        assert_eq!(affine_elliptic_parameters(&bundled::upstream_ellipse()), Some((0.5, 2.0, Drift::Upstream)));
        assert_eq!(affine_elliptic_parameters(&bundled::downstream_ellipse()), Some((0.5, 2.0, Drift::Downstream)));
        assert_eq!(affine_elliptic_parameters(&bundled::no_current_disk()), None);
    }

    #[test]
    fn brute_force_on_coarse_disk_grid() {
        let est = brute_force_min_time(&bundled::no_current_disk(), &GridSpec::new(51, 51, 32, 0.02)).unwrap();
        assert!(est.contains(1.0), "{est:?}");
        assert!((est.estimate - 1.0).abs() < 0.1);
    }

    #[test]
    fn brute_force_reaches_target_on_a_grid_node() {
        // (0, 4) is a node of the default 101 × 101 grid; the bracket must hold 4/√3
        let est = brute_force_min_time(&bundled::constant_current_disk(), &GridSpec::new(101, 101, 32, 0.01)).unwrap();
        assert!(est.contains(4.0 / 3f64.sqrt()), "{est:?}");
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
