//! PMP state/adjoint integration, the boundary θ-equation, and the residual
//! diagnostics used to audit extremals.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convex::ConvexError;
use crate::ode::{DenseStep, Dopri5, Flow, IntegrateError};
use crate::{ControlSet, CurrentField, Mat2, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("control set is not strictly convex (min δ = {min_delta})")]
    StrictConvexityViolated { min_delta: f64 },
    #[error("integration produced a non-finite state near t = {t}")]
    NonFiniteState { t: f64 },
    #[error("boundary curvature vanishes at θ = {theta}")]
    DegenerateCurvature { theta: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error("integrator gave up: {0}")]
    Integrator(String),
}

fn lift(e: IntegrateError<DynamicsError>) -> DynamicsError {
    match e {
        IntegrateError::Rhs(inner) => inner,
        IntegrateError::NonFinite { t } => DynamicsError::NonFiniteState { t },
        other => DynamicsError::Integrator(other.to_string()),
    }
}

/// Where a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terminal {
    TargetHit { t_f: f64 },
    HorizonExpired,
}

impl Terminal {
    pub fn hit_time(&self) -> Option<f64> {
        match self {
            Self::TargetHit { t_f } => Some(*t_f),
            Self::HorizonExpired => None,
        }
    }
}

/// Closest approach to the target over a run. The sign of `signed_miss`
/// tells on which side of the velocity the target was passed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestApproach {
    pub t: f64,
    pub distance: f64,
    pub signed_miss: f64,
}

/// Shared run parameters: start, horizon and target ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub x0: Vec2,
    pub horizon: f64,
    pub target: Vec2,
    pub target_radius: f64,
}

impl Leg {
    pub fn new(x0: Vec2, horizon: f64, target: Vec2, target_radius: f64) -> Self {
        Self { x0, horizon, target, target_radius }
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(DynamicsError::InvalidInput("horizon must be positive"));
        }
        if !(self.target_radius >= 0.0) {
            return Err(DynamicsError::InvalidInput("target radius must be non-negative"));
        }
        if !self.x0.is_finite() || !self.target.is_finite() {
            return Err(DynamicsError::InvalidInput("start and target must be finite"));
        }
        if self.target_radius > 0.0 && self.x0.distance(self.target) <= self.target_radius {
            return Err(DynamicsError::InvalidInput("start lies inside the target ball"));
        }
        Ok(())
    }

    /// Output spacing `min(1e-2·horizon, 1e-3)`.
    pub fn sample_spacing(&self) -> f64 {
        (1e-2 * self.horizon).min(1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmpSample {
    pub t: f64,
    pub x: Vec2,
    pub p: Vec2,
    pub u: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmpTrajectory {
    pub samples: Vec<PmpSample>,
    pub terminal: Terminal,
    pub closest: ClosestApproach,
    /// `Some(−1)` normal, `Some(0)` abnormal, `None` until classified or when mixed.
    pub p0: Option<f64>,
}

impl PmpTrajectory {
    pub fn end(&self) -> &PmpSample {
        self.samples.last().expect("trajectories are never empty")
    }

    /// Runs the abnormality detector and records `p0`.
    pub fn classify(&mut self, field: &CurrentField) -> Normality {
        let n = abnormality_detector(&self.samples, field);
        self.p0 = match n {
            Normality::Normal => Some(-1.0),
            Normality::Abnormal => Some(0.0),
            Normality::Mixed => None,
        };
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZneSample {
    pub t: f64,
    pub x: Vec2,
    pub theta: f64,
    pub u: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZneTrajectory {
    pub samples: Vec<ZneSample>,
    pub terminal: Terminal,
    pub closest: ClosestApproach,
}

/// The two readings of the boundary navigation equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZneSign {
    /// Component expansion; reduces to the classical equation on disks.
    #[default]
    Component,
    /// Inner-product form taken literally, which flips the sign.
    InnerProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normality {
    Normal,
    Abnormal,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_hamiltonian_residual: f64,
    pub max_orthogonality_residual: f64,
    pub max_boundary_residual: f64,
    pub max_zne_residual: f64,
    pub min_abs_det_a: f64,
    pub abnormal: bool,
    pub normality: Normality,
}

// ---------------------------------------------------------------------------
// integration engine

struct RawRun<const N: usize> {
    samples: Vec<(f64, [f64; N])>,
    terminal: Terminal,
    closest: ClosestApproach,
}

const SUBSAMPLES: usize = 16;

fn position<const N: usize>(y: &[f64; N]) -> Vec2 {
    Vec2::new(y[0], y[1])
}

fn golden_on_step<const N: usize>(step: &DenseStep<f64, N>, target: Vec2, a: f64, b: f64) -> (f64, f64) {
    let dist = |t: f64| position(&step.eval(t)).distance(target);
    let inv_phi = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (dist(x1), dist(x2));
    for _ in 0..80 {
        if b - a <= 1e-15 * (1.0 + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = dist(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = dist(x2);
        }
    }
    // compare with the bracket ends so a monotone stretch returns its end
    let mid = 0.5 * (a + b);
    [(mid, dist(mid)), (a, dist(a)), (b, dist(b))]
        .into_iter()
        .fold((mid, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

fn run<const N: usize>(
    rhs: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], DynamicsError>,
    y0: [f64; N],
    leg: &Leg,
    record: bool,
) -> Result<RawRun<N>, DynamicsError> {
    leg.validate()?;
    let dt = leg.sample_spacing();
    let target = leg.target;
    let radius = leg.target_radius;
    let event_tol = 1e-10 * leg.horizon;

    let d0 = position(&y0).distance(target);
    let mut closest = ClosestApproach { t: 0.0, distance: d0, signed_miss: d0 };
    let mut samples: Vec<(f64, [f64; N])> = Vec::new();
    if record {
        samples.push((0.0, y0));
    }
    let mut next_k: usize = 1;
    let mut hit: Option<f64> = None;

    let summary = Dopri5::default()
        .integrate(rhs, 0.0, y0, leg.horizon, |step| {
            let t0 = step.t0;
            let t1 = step.t1();
            let sub: Vec<(f64, f64)> = (0..=SUBSAMPLES)
                .map(|j| {
                    let t = if j == SUBSAMPLES { t1 } else { t0 + step.h * j as f64 / SUBSAMPLES as f64 };
                    (t, position(&step.eval(t)).distance(target))
                })
                .collect();
            let j_min = (0..=SUBSAMPLES).fold(0, |m, j| if sub[j].1 < sub[m].1 { j } else { m });
            let lo = sub[j_min.saturating_sub(1)].0;
            let hi = sub[(j_min + 1).min(SUBSAMPLES)].0;
            let (t_star, d_star) = golden_on_step(step, target, lo, hi);

            let mut stop_at = None;
            if radius > 0.0 {
                let first_in = (1..=SUBSAMPLES).find(|&j| sub[j].1 <= radius);
                let bracket = match first_in {
                    Some(j) => Some((sub[j - 1].0, sub[j].0)),
                    None if d_star <= radius => Some((lo.min(t_star), t_star)),
                    None => None,
                };
                if let Some((mut a, mut b)) = bracket {
                    while b - a > event_tol {
                        let m = 0.5 * (a + b);
                        if position(&step.eval(m)).distance(target) <= radius {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                    stop_at = Some(b);
                }
            }

            let (tc, dc) = match stop_at {
                Some(tf) => (tf, position(&step.eval(tf)).distance(target)),
                None => (t_star, d_star),
            };
            if dc < closest.distance {
                let v = position(&step.derivative(tc));
                let rel = target - position(&step.eval(tc));
                let side = v.cross(rel);
                let sign = if side > 0.0 {
                    1.0
                } else if side < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                closest = ClosestApproach { t: tc, distance: dc, signed_miss: sign * dc };
            }

            let t_last = stop_at.unwrap_or(t1);
            if record {
                loop {
                    let tk = next_k as f64 * dt;
                    if tk > t_last || tk > leg.horizon {
                        break;
                    }
                    samples.push((tk, step.eval(tk)));
                    next_k += 1;
                }
            }
            match stop_at {
                Some(tf) => {
                    hit = Some(tf);
                    if record {
                        push_final(&mut samples, tf, step.eval(tf), dt);
                    }
                    Flow::Stop
                }
                None => {
                    if record && t1 >= leg.horizon {
                        push_final(&mut samples, t1, step.y1, dt);
                    }
                    Flow::Continue
                }
            }
        })
        .map_err(lift)?;
    let _ = summary;

    let terminal = match hit {
        Some(t_f) => Terminal::TargetHit { t_f },
        None => Terminal::HorizonExpired,
    };
    Ok(RawRun { samples, terminal, closest })
}

/// Appends the terminal sample, dropping a grid sample closer than `dt/2`
/// so that centred differences never see a vanishing gap.
fn push_final<const N: usize>(samples: &mut Vec<(f64, [f64; N])>, t: f64, y: [f64; N], dt: f64) {
    let gap = |s: &Vec<(f64, [f64; N])>| t - s.last().map(|l| l.0).unwrap_or(f64::NEG_INFINITY);
    if samples.len() > 1 && gap(samples) < 0.5 * dt {
        samples.pop();
    }
    if gap(samples) > 0.0 {
        samples.push((t, y));
    }
}

fn check_set(set: &ControlSet) -> Result<(), DynamicsError> {
    let report = set.verify_strict_convexity(256)?;
    if !report.ok {
        return Err(DynamicsError::StrictConvexityViolated { min_delta: report.min_delta });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// PMP system

fn pmp_rhs<'a>(
    set: &'a ControlSet,
    field: &'a CurrentField,
) -> impl FnMut(f64, &[f64; 4]) -> Result<[f64; 4], DynamicsError> + 'a {
    move |_, y| {
        let x = Vec2::new(y[0], y[1]);
        let p = Vec2::new(y[2], y[3]);
        let u = set.maximizer(p)?;
        let v = u + field.eval(x);
        let dp = -(field.jacobian(x).transpose() * p);
        Ok([v.x1, v.x2, dp.x1, dp.x2])
    }
}

fn pmp_samples(set: &ControlSet, raw: Vec<(f64, [f64; 4])>) -> Result<Vec<PmpSample>, DynamicsError> {
    raw.into_iter()
        .map(|(t, y)| {
            let p = Vec2::new(y[2], y[3]);
            Ok(PmpSample { t, x: Vec2::new(y[0], y[1]), p, u: set.maximizer(p)? })
        })
        .collect()
}

/// Integrates `x′ = v(p) + s(x)`, `p′ = −(∇s)ᵀp` from `p(0) = (cos φ, sin φ)`.
pub fn integrate_pmp(
    set: &ControlSet,
    field: &CurrentField,
    x0: Vec2,
    costate_angle: f64,
    horizon: f64,
    target: Vec2,
    target_radius: f64,
) -> Result<PmpTrajectory, DynamicsError> {
    let leg = Leg::new(x0, horizon, target, target_radius);
    integrate_pmp_from(set, field, &leg, Vec2::from_angle(costate_angle))
}

/// As [`integrate_pmp`] with an explicit, not necessarily unit, initial costate.
pub fn integrate_pmp_from(
    set: &ControlSet,
    field: &CurrentField,
    leg: &Leg,
    p_init: Vec2,
) -> Result<PmpTrajectory, DynamicsError> {
    check_set(set)?;
    if !(p_init.norm() > 0.0) || !p_init.is_finite() {
        return Err(DynamicsError::Convex(ConvexError::ZeroCostate));
    }
    let y0 = [leg.x0.x1, leg.x0.x2, p_init.x1, p_init.x2];
    let raw = run(pmp_rhs(set, field), y0, leg, true)?;
    Ok(PmpTrajectory {
        samples: pmp_samples(set, raw.samples)?,
        terminal: raw.terminal,
        closest: raw.closest,
        p0: None,
    })
}

/// Closest approach of a PMP run without recording samples; used by scans.
pub fn pmp_closest_approach(
    set: &ControlSet,
    field: &CurrentField,
    leg: &Leg,
    p_init: Vec2,
) -> Result<(ClosestApproach, Terminal), DynamicsError> {
    let y0 = [leg.x0.x1, leg.x0.x2, p_init.x1, p_init.x2];
    let raw = run(pmp_rhs(set, field), y0, leg, false)?;
    Ok((raw.closest, raw.terminal))
}

// ---------------------------------------------------------------------------
// residuals

/// Three-point derivative weights on a non-uniform grid.
fn centred_weights(h1: f64, h2: f64) -> ([f64; 3], [f64; 3]) {
    let d1 = [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))];
    let d2 = [2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2))];
    (d1, d2)
}

/// `(t, u′, u″)` at every interior sample.
fn control_derivatives(ts: &[f64], us: &[Vec2]) -> Vec<(usize, Vec2, Vec2)> {
    (1..ts.len().saturating_sub(1))
        .map(|k| {
            let (d1, d2) = centred_weights(ts[k] - ts[k - 1], ts[k + 1] - ts[k]);
            let first = us[k - 1] * d1[0] + us[k] * d1[1] + us[k + 1] * d1[2];
            let second = us[k - 1] * d2[0] + us[k] * d2[1] + us[k + 1] * d2[2];
            (k, first, second)
        })
        .collect()
}

/// Below this `|u′|` the control is treated as constant.
fn rate_guard(ts: &[f64], us: &[Vec2]) -> f64 {
    let duration = (ts[ts.len() - 1] - ts[0]).max(f64::MIN_POSITIVE);
    let u_scale = us.iter().map(|u| u.norm()).fold(0.0, f64::max);
    1e-9 * u_scale / duration
}

fn mean_trapezoid(ts: &[f64], vals: &[f64]) -> f64 {
    if ts.len() < 2 {
        return vals.first().copied().unwrap_or(0.0);
    }
    let mut acc = 0.0;
    for k in 1..ts.len() {
        acc += 0.5 * (vals[k] + vals[k - 1]) * (ts[k] - ts[k - 1]);
    }
    acc / (ts[ts.len() - 1] - ts[0])
}

/// `max |p₀ + ⟨p, u + s⟩|` after normalization. When the time-averaged
/// `⟨p, u + s⟩` is non-negligible `p` is rescaled so that average is 1 and
/// `p₀ = −1`; otherwise `p` stays unscaled and `p₀ = 0`.
pub fn hamiltonian_residual(samples: &[PmpSample], field: &CurrentField) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let h: Vec<f64> = samples.iter().map(|s| s.p.dot(s.u + field.eval(s.x))).collect();
    let scale = samples
        .iter()
        .map(|s| s.p.norm() * (s.u + field.eval(s.x)).norm())
        .fold(0.0, f64::max);
    let mean = mean_trapezoid(&ts, &h);
    if mean.abs() > 1e-8 * scale {
        h.iter().map(|&hk| (hk / mean - 1.0).abs()).fold(0.0, f64::max)
    } else {
        h.iter().map(|hk| hk.abs()).fold(0.0, f64::max)
    }
}

/// `max |⟨p, u′⟩| / (|p||u′| + 1e-30)` over interior samples.
pub fn orthogonality_residual(samples: &[PmpSample]) -> f64 {
    if samples.len() < 3 {
        return 0.0;
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let us: Vec<Vec2> = samples.iter().map(|s| s.u).collect();
    let guard = rate_guard(&ts, &us);
    control_derivatives(&ts, &us)
        .into_iter()
        .filter(|(_, du, _)| du.norm() > guard)
        .map(|(k, du, _)| {
            let p = samples[k].p;
            p.dot(du).abs() / (p.norm() * du.norm() + 1e-30)
        })
        .fold(0.0, f64::max)
}

/// `max σ(p) − ⟨p, u⟩` relative to `1 + |p|`.
pub fn boundary_residual(samples: &[PmpSample], set: &ControlSet) -> f64 {
    samples
        .iter()
        .map(|s| set.fenchel_residual(s.u, s.p).abs() / (1.0 + s.p.norm()))
        .fold(0.0, f64::max)
}

/// `det A(t) = −⟨u′^⊥, u + s⟩` at interior samples.
pub fn det_a_profile(ts: &[f64], xs: &[Vec2], us: &[Vec2], field: &CurrentField) -> Vec<(f64, f64)> {
    if ts.len() < 3 {
        return Vec::new();
    }
    let guard = rate_guard(ts, us);
    control_derivatives(ts, us)
        .into_iter()
        .map(|(k, du, _)| {
            let du = if du.norm() > guard { du } else { Vec2::zero() };
            (ts[k], -du.perp().dot(us[k] + field.eval(xs[k])))
        })
        .collect()
}

fn det_a_tolerance(ts: &[f64], xs: &[Vec2], us: &[Vec2], field: &CurrentField) -> f64 {
    let duration = (ts[ts.len() - 1] - ts[0]).max(f64::MIN_POSITIVE);
    let u_max = us.iter().map(|u| u.norm()).fold(0.0, f64::max);
    let v_max = us.iter().zip(xs).map(|(u, x)| (*u + field.eval(*x)).norm()).fold(0.0, f64::max);
    1e-8 * u_max * v_max / duration
}

fn classify_det_a(profile: &[(f64, f64)], tol: f64) -> (Normality, f64) {
    let max_abs = profile.iter().map(|d| d.1.abs()).fold(0.0, f64::max);
    let min_abs = profile.iter().map(|d| d.1.abs()).fold(f64::INFINITY, f64::min);
    let normality = if max_abs < tol {
        Normality::Abnormal
    } else if min_abs > tol {
        Normality::Normal
    } else {
        Normality::Mixed
    };
    (normality, min_abs)
}

/// Abnormal when `det A` vanishes along the whole run, normal when it never does.
pub fn abnormality_detector(samples: &[PmpSample], field: &CurrentField) -> Normality {
    if samples.len() < 3 {
        return Normality::Mixed;
    }
    let (ts, xs, us) = columns(samples);
    let profile = det_a_profile(&ts, &xs, &us, field);
    classify_det_a(&profile, det_a_tolerance(&ts, &xs, &us, field)).0
}

fn columns(samples: &[PmpSample]) -> (Vec<f64>, Vec<Vec2>, Vec<Vec2>) {
    (
        samples.iter().map(|s| s.t).collect(),
        samples.iter().map(|s| s.x).collect(),
        samples.iter().map(|s| s.u).collect(),
    )
}

/// Component-form navigation residual
/// `u₁″u₂′ − u₁′u₂″ + u₁′²s₂₁ − u₁′u₂′(s₁₁−s₂₂) − u₂′²s₁₂`, normalized by the
/// largest single term seen along the run.
pub fn zne_residual_raw(ts: &[f64], xs: &[Vec2], us: &[Vec2], field: &CurrentField) -> f64 {
    if ts.len() < 5 {
        return 0.0;
    }
    let guard = rate_guard(ts, us);
    let mut worst: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for (k, d1, d2) in control_derivatives(ts, us) {
        if d1.norm() <= guard {
            continue;
        }
        let j = field.jacobian(xs[k]);
        let terms = [
            d2.x1 * d1.x2,
            -d1.x1 * d2.x2,
            d1.x1 * d1.x1 * j.m21,
            -d1.x1 * d1.x2 * (j.m11 - j.m22),
            -d1.x2 * d1.x2 * j.m12,
        ];
        worst = worst.max(terms.iter().sum::<f64>().abs());
        largest = largest.max(terms.iter().fold(0.0, |m, t| m.max(t.abs())));
    }
    if largest > 0.0 {
        worst / largest
    } else {
        0.0
    }
}

pub fn zne_residual(traj: &ZneTrajectory, field: &CurrentField) -> f64 {
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let xs: Vec<Vec2> = traj.samples.iter().map(|s| s.x).collect();
    let us: Vec<Vec2> = traj.samples.iter().map(|s| s.u).collect();
    zne_residual_raw(&ts, &xs, &us, field)
}

pub fn diagnostics(samples: &[PmpSample], set: &ControlSet, field: &CurrentField) -> Diagnostics {
    let (ts, xs, us) = columns(samples);
    let (normality, min_abs) = if samples.len() >= 3 {
        let profile = det_a_profile(&ts, &xs, &us, field);
        classify_det_a(&profile, det_a_tolerance(&ts, &xs, &us, field))
    } else {
        (Normality::Mixed, f64::NAN)
    };
    Diagnostics {
        max_hamiltonian_residual: hamiltonian_residual(samples, field),
        max_orthogonality_residual: orthogonality_residual(samples),
        max_boundary_residual: boundary_residual(samples, set),
        max_zne_residual: zne_residual_raw(&ts, &xs, &us, field),
        min_abs_det_a: min_abs,
        abnormal: normality == Normality::Abnormal,
        normality,
    }
}

// ---------------------------------------------------------------------------
// navigation equation

/// `θ′ = s₂₁ sin²θ + (s₁₁ − s₂₂) sinθ cosθ − s₁₂ cos²θ`.
pub fn classical_zne_rhs(theta: f64, j: Mat2) -> f64 {
    let (s, c) = theta.sin_cos();
    j.m21 * s * s + (j.m11 - j.m22) * s * c - j.m12 * c * c
}

/// `θ′ = ⟨u_θ^⊥, J u_θ⟩ / ⟨u_θ^⊥, u_θθ⟩` on the set's boundary chart.
pub fn generic_zne_theta_rhs(set: &ControlSet, theta: f64, j: Mat2) -> Result<f64, DynamicsError> {
    generic_zne_theta_rhs_signed(set, theta, j, ZneSign::Component)
}

pub fn generic_zne_theta_rhs_signed(
    set: &ControlSet,
    theta: f64,
    j: Mat2,
    sign: ZneSign,
) -> Result<f64, DynamicsError> {
    let chart = set.polar_data(theta);
    let ut = chart.u_theta;
    let curv = ut.perp().dot(chart.u_thetatheta);
    if !(curv.abs() >= 1e-12 * ut.norm_sq()) {
        return Err(DynamicsError::DegenerateCurvature { theta });
    }
    let rate = ut.perp().dot(j * ut) / curv;
    Ok(match sign {
        ZneSign::Component => rate,
        ZneSign::InnerProduct => -rate,
    })
}

pub fn integrate_zne(
    set: &ControlSet,
    field: &CurrentField,
    x0: Vec2,
    theta0: f64,
    horizon: f64,
    target: Vec2,
    target_radius: f64,
) -> Result<ZneTrajectory, DynamicsError> {
    let leg = Leg::new(x0, horizon, target, target_radius);
    integrate_zne_signed(set, field, &leg, theta0, ZneSign::Component)
}

/// θ is carried as an unwrapped real, so nearest-branch continuity holds by construction.
pub fn integrate_zne_signed(
    set: &ControlSet,
    field: &CurrentField,
    leg: &Leg,
    theta0: f64,
    sign: ZneSign,
) -> Result<ZneTrajectory, DynamicsError> {
    check_set(set)?;
    if !theta0.is_finite() {
        return Err(DynamicsError::InvalidInput("initial heading must be finite"));
    }
    let rhs = |_: f64, y: &[f64; 3]| {
        let x = Vec2::new(y[0], y[1]);
        let dtheta = generic_zne_theta_rhs_signed(set, y[2], field.jacobian(x), sign)?;
        let v = set.polar_data(y[2]).point + field.eval(x);
        Ok([v.x1, v.x2, dtheta])
    };
    let raw = run(rhs, [leg.x0.x1, leg.x0.x2, theta0], leg, true)?;
    let samples = raw
        .samples
        .into_iter()
        .map(|(t, y)| ZneSample { t, x: Vec2::new(y[0], y[1]), theta: y[2], u: set.polar_data(y[2]).point })
        .collect();
    Ok(ZneTrajectory { samples, terminal: raw.terminal, closest: raw.closest })
}

// ---------------------------------------------------------------------------
// reversibility

/// Cubic Hermite interpolation of recorded controls with finite-difference slopes.
fn control_at(ts: &[f64], us: &[Vec2], t: f64) -> Vec2 {
    let n = ts.len();
    if n == 1 || t <= ts[0] {
        return us[0];
    }
    if t >= ts[n - 1] {
        return us[n - 1];
    }
    let k = ts.partition_point(|&tk| tk <= t).clamp(1, n - 1) - 1;
    let slope = |i: usize| {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        (us[b] - us[a]) / (ts[b] - ts[a])
    };
    let h = ts[k + 1] - ts[k];
    let s = (t - ts[k]) / h;
    let (s2, s3) = (s * s, s * s * s);
    us[k] * (2.0 * s3 - 3.0 * s2 + 1.0)
        + slope(k) * (h * (s3 - 2.0 * s2 + s))
        + us[k + 1] * (-2.0 * s3 + 3.0 * s2)
        + slope(k + 1) * (h * (s3 - s2))
}

/// Integrates the state backwards from the final sample with the recorded
/// control and returns `|x̂(0) − x(0)|`.
pub fn reversibility_error(ts: &[f64], xs: &[Vec2], us: &[Vec2], field: &CurrentField) -> Result<f64, DynamicsError> {
    if ts.len() < 2 {
        return Err(DynamicsError::InvalidInput("need at least two samples"));
    }
    let t_f = ts[ts.len() - 1];
    let xf = xs[xs.len() - 1];
    let rhs = |tau: f64, y: &[f64; 2]| {
        let x = Vec2::new(y[0], y[1]);
        let v = control_at(ts, us, t_f - tau) + field.eval(x);
        Ok::<_, DynamicsError>([-v.x1, -v.x2])
    };
    let summary = Dopri5::default()
        .integrate(rhs, 0.0, [xf.x1, xf.x2], t_f - ts[0], |_| Flow::Continue)
        .map_err(lift)?;
    Ok(Vec2::new(summary.y[0], summary.y[1]).distance(xs[0]))
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

pub const PMP_HEADER: [&str; 7] = ["t", "x1", "x2", "p1", "p2", "u1", "u2"];
pub const ZNE_HEADER: [&str; 6] = ["t", "x1", "x2", "theta", "u1", "u2"];

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<W: io::Write, const M: usize>(
    writer: W,
    header: [&str; M],
    rows: impl Iterator<Item = [f64; M]>,
) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.map(fmt17))?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: io::Read, const M: usize>(reader: R, header: [&str; M]) -> Result<Vec<[f64; M]>, CsvError> {
    let mut r = csv::Reader::from_reader(reader);
    let got: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if got != header {
        return Err(CsvError::Header(got));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != M {
            return Err(CsvError::Row { row: i + 1, msg: format!("expected {M} fields, got {}", rec.len()) });
        }
        let mut row = [0.0; M];
        for (slot, field) in row.iter_mut().zip(rec.iter()) {
            *slot = field.trim().parse().map_err(|e| CsvError::Row { row: i + 1, msg: format!("{e}") })?;
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_pmp_csv<W: io::Write>(samples: &[PmpSample], writer: W) -> Result<(), CsvError> {
    write_rows(
        writer,
        PMP_HEADER,
        samples.iter().map(|s| [s.t, s.x.x1, s.x.x2, s.p.x1, s.p.x2, s.u.x1, s.u.x2]),
    )
}

pub fn read_pmp_csv<R: io::Read>(reader: R) -> Result<Vec<PmpSample>, CsvError> {
    Ok(read_rows(reader, PMP_HEADER)?
        .into_iter()
        .map(|r| PmpSample {
            t: r[0],
            x: Vec2::new(r[1], r[2]),
            p: Vec2::new(r[3], r[4]),
            u: Vec2::new(r[5], r[6]),
        })
        .collect())
}

pub fn write_zne_csv<W: io::Write>(samples: &[ZneSample], writer: W) -> Result<(), CsvError> {
    write_rows(
        writer,
        ZNE_HEADER,
        samples.iter().map(|s| [s.t, s.x.x1, s.x.x2, s.theta, s.u.x1, s.u.x2]),
    )
}

pub fn read_zne_csv<R: io::Read>(reader: R) -> Result<Vec<ZneSample>, CsvError> {
    Ok(read_rows(reader, ZNE_HEADER)?
        .into_iter()
        .map(|r| ZneSample { t: r[0], x: Vec2::new(r[1], r[2]), theta: r[3], u: Vec2::new(r[4], r[5]) })
        .collect())
}
