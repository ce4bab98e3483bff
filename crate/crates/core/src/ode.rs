//! Adaptive Dormand–Prince 5(4) integrator with Hairer's continuous extension.
//!
//! The integrator does not record anything itself: every accepted step is
//! handed to an observer as a [`DenseStep`], which can be evaluated anywhere
//! on the step and may stop the integration (event location is done by the
//! caller on the dense interpolant).

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError<E> {
    #[error("right-hand side failed: {0}")]
    Rhs(E),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
}

/// Observer verdict after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// One accepted step with its 4th-order dense output.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<T, const N: usize> {
    pub t0: T,
    pub h: T,
    pub y0: [T; N],
    pub y1: [T; N],
    cont: [[T; N]; 4],
}

impl<T: Scalar, const N: usize> DenseStep<T, N> {
    #[inline]
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    /// Interpolated state at `t ∈ [t0, t0 + h]`.
    pub fn eval(&self, t: T) -> [T; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let mut y = [T::zero(); N];
        for i in 0..N {
            let [r2, r3, r4, r5] = [self.cont[0][i], self.cont[1][i], self.cont[2][i], self.cont[3][i]];
            y[i] = self.y0[i] + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
        }
        y
    }

    /// Time derivative of the interpolant at `t`.
    pub fn derivative(&self, t: T) -> [T; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let mut dy = [T::zero(); N];
        for i in 0..N {
            let [r2, r3, r4, r5] = [self.cont[0][i], self.cont[1][i], self.cont[2][i], self.cont[3][i]];
            let q = r4 + theta1 * r5;
            let r = r3 + theta * q;
            let dr = q - theta * r5;
            let s = r2 + theta1 * r;
            let ds = theta1 * dr - r;
            dy[i] = (s + theta * ds) / self.h;
        }
        dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Scalar> Default for Dopri5<T> {
    fn default() -> Self {
        Self { rtol: T::lit(1e-9), atol: T::lit(1e-12), max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<T, const N: usize> {
    pub t: T,
    pub y: [T; N],
    pub accepted: usize,
    pub rejected: usize,
    pub stopped: bool,
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// error weights b − b̂
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn combine<T: Scalar, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for (c, k) in terms {
        let c = T::lit(*c) * h;
        for i in 0..N {
            out[i] = out[i] + c * k[i];
        }
    }
    out
}

impl<T: Scalar> Dopri5<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    fn error_norm<const N: usize>(&self, err: &[T; N], y0: &[T; N], y1: &[T; N]) -> T {
        let mut acc = T::zero();
        for i in 0..N {
            let sk = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
            let r = err[i] / sk;
            acc = acc + r * r;
        }
        (acc / T::lit(N as f64)).sqrt()
    }

    fn initial_step<const N: usize, E>(
        &self,
        f: &mut impl FnMut(T, &[T; N]) -> Result<[T; N], E>,
        t0: T,
        y0: &[T; N],
        f0: &[T; N],
        span: T,
    ) -> Result<T, E> {
        let scaled = |v: &[T; N]| {
            let mut acc = T::zero();
            for i in 0..N {
                let sk = self.atol + self.rtol * y0[i].abs();
                acc = acc + (v[i] / sk) * (v[i] / sk);
            }
            (acc / T::lit(N as f64)).sqrt()
        };
        let d0 = scaled(y0);
        let d1 = scaled(f0);
        let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
        h0 = h0.min(span);
        let y1 = combine(y0, h0, &[(1.0, f0)]);
        let f1 = f(t0 + h0, &y1)?;
        let mut diff = [T::zero(); N];
        for i in 0..N {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = scaled(&diff) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= T::lit(1e-15) {
            (h0 * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / dmax).powf(T::lit(0.2))
        };
        Ok((T::lit(100.0) * h0).min(h1).min(span))
    }

    /// Integrates `y′ = f(t, y)` from `t0` to `t_end > t0`, passing every accepted
    /// step to `observer`.
    pub fn integrate<const N: usize, E>(
        &self,
        mut f: impl FnMut(T, &[T; N]) -> Result<[T; N], E>,
        t0: T,
        y0: [T; N],
        t_end: T,
        mut observer: impl FnMut(&DenseStep<T, N>) -> Flow,
    ) -> Result<Summary<T, N>, IntegrateError<E>> {
        let to_f64 = |t: T| t.to_f64().unwrap_or(f64::NAN);
        let span = t_end - t0;
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y).map_err(IntegrateError::Rhs)?;
        if span <= T::zero() {
            return Ok(Summary { t, y, accepted: 0, rejected: 0, stopped: false });
        }
        let mut h = self.initial_step(&mut f, t, &y, &k1, span).map_err(IntegrateError::Rhs)?;
        let mut accepted = 0;
        let mut rejected = 0;
        let mut last_rejected = false;
        loop {
            if accepted + rejected >= self.max_steps {
                return Err(IntegrateError::TooManySteps(self.max_steps));
            }
            let remaining = t_end - t;
            let last = h >= remaining * (T::one() - T::lit(1e-12));
            if last {
                h = remaining;
            }
            if h <= T::lit(16.0) * T::epsilon() * t.abs().max(T::one()) {
                return Err(IntegrateError::StepSizeUnderflow { t: to_f64(t) });
            }
            let y2 = combine(&y, h, &[(A21, &k1)]);
            let k2 = f(t + T::lit(C2) * h, &y2).map_err(IntegrateError::Rhs)?;
            let y3 = combine(&y, h, &[(A31, &k1), (A32, &k2)]);
            let k3 = f(t + T::lit(C3) * h, &y3).map_err(IntegrateError::Rhs)?;
            let y4 = combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            let k4 = f(t + T::lit(C4) * h, &y4).map_err(IntegrateError::Rhs)?;
            let y5 = combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            let k5 = f(t + T::lit(C5) * h, &y5).map_err(IntegrateError::Rhs)?;
            let y6 = combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let k6 = f(t + h, &y6).map_err(IntegrateError::Rhs)?;
            let y_new = combine(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::NonFinite { t: to_f64(t + h) });
            }
            let k7 = f(t + h, &y_new).map_err(IntegrateError::Rhs)?;

            let zero = [T::zero(); N];
            let err_vec = combine(
                &zero,
                h,
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            );
            let err = self.error_norm(&err_vec, &y, &y_new);
            if !err.is_finite() {
                return Err(IntegrateError::NonFinite { t: to_f64(t + h) });
            }

            if err <= T::one() {
                let mut cont = [[T::zero(); N]; 4];
                let d = combine(&zero, h, &[(D1, &k1), (D3, &k3), (D4, &k4), (D5, &k5), (D6, &k6), (D7, &k7)]);
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    cont[0][i] = ydiff;
                    cont[1][i] = bspl;
                    cont[2][i] = ydiff - h * k7[i] - bspl;
                    cont[3][i] = d[i];
                }
                let step = DenseStep { t0: t, h, y0: y, y1: y_new, cont };
                accepted += 1;
                t = if last { t_end } else { t + h };
                y = y_new;
                k1 = k7;
                if observer(&step) == Flow::Stop {
                    return Ok(Summary { t, y, accepted, rejected, stopped: true });
                }
                if last {
                    return Ok(Summary { t, y, accepted, rejected, stopped: false });
                }
                let mut fac = T::lit(0.9) * err.max(T::lit(1e-10)).powf(T::lit(-0.2));
                fac = fac.min(T::lit(10.0)).max(T::lit(0.2));
                if last_rejected {
                    fac = fac.min(T::one());
                }
                h = h * fac;
                last_rejected = false;
            } else {
                rejected += 1;
                last_rejected = true;
                let fac = (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2));
                h = h * fac;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::convert::Infallible;

    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let solver = Dopri5::<f64>::default();
        let s = solver
            .integrate(|_, y: &[f64; 1]| Ok::<_, Infallible>([-y[0]]), 0.0, [1.0], 5.0, |_| Flow::Continue)
            .unwrap();
        assert_eq!(s.t, 5.0);
        assert!((s.y[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_tracks_harmonic_oscillator() {
        let solver = Dopri5::<f64>::default();
        let mut worst = 0.0f64;
        let mut worst_rate = 0.0f64;
        let mut steps = 0;
        solver
            .integrate(
                |_, y: &[f64; 2]| Ok::<_, Infallible>([y[1], -y[0]]),
                0.0,
                [1.0, 0.0],
                10.0,
                |step| {
                    steps += 1;
                    for k in 0..=8 {
                        let t = step.t0 + step.h * k as f64 / 8.0;
                        let y = step.eval(t);
                        worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
                        let dy = step.derivative(t);
                        worst_rate = worst_rate.max((dy[0] + t.sin()).abs()).max((dy[1] + t.cos()).abs());
                    }
                    Flow::Continue
                },
            )
            .unwrap();
        assert!(steps > 10);
        assert!(worst < 5e-8, "dense error {worst}");
        assert!(worst_rate < 1e-6, "dense derivative error {worst_rate}");
    }

    #[test]
    fn observer_can_stop() {
        let solver = Dopri5::<f64>::default();
        let s = solver
            .integrate(
                |_, _: &[f64; 1]| Ok::<_, Infallible>([1.0]),
                0.0,
                [0.0],
                100.0,
                |step| if step.t1() > 1.0 { Flow::Stop } else { Flow::Continue },
            )
            .unwrap();
        assert!(s.stopped);
        assert!(s.t > 1.0 && s.t < 100.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let solver = Dopri5::<f64>::default();
        let r = solver.integrate(|_, y: &[f64; 1]| Ok::<_, Infallible>([y[0] * y[0]]), 0.0, [1.0], 2.0, |_| {
            Flow::Continue
        });
        assert!(matches!(
            r,
            Err(IntegrateError::StepSizeUnderflow { .. }) | Err(IntegrateError::NonFinite { .. }) | Err(IntegrateError::TooManySteps(_))
        ));
    }

    #[test]
    fn rhs_errors_propagate() {
        let solver = Dopri5::<f64>::default();
        let r = solver.integrate(
            |t, _: &[f64; 1]| if t > 0.5 { Err("bad") } else { Ok([1.0]) },
            0.0,
            [0.0],
            1.0,
            |_| Flow::Continue,
        );
        assert_eq!(r.unwrap_err(), IntegrateError::Rhs("bad"));
    }
}
