//! Embedded Runge-Kutta 5(4) pair with fourth-order dense output, for
//! two-dimensional first-order systems.
//!
//! The flux-form radial equations and the log-radius phase-plane equation are
//! all non-stiff 2-state systems, so the solver is specialized to `[f64; 2]`
//! and kept allocation-free per step.

pub type State = [f64; 2];

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

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

// Difference between the fifth and the embedded fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step together with its dense interpolant.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub t0: f64,
    pub h: f64,
    pub y0: State,
    pub y1: State,
    /// Derivative at the right endpoint (the FSAL stage).
    pub f1: State,
    rcont: [State; 5],
}

impl Step {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Evaluates the interpolant at `t0 + theta * h`, `theta` in [0, 1].
    pub fn dense(&self, theta: f64) -> State {
        let th1 = 1.0 - theta;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + th1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + th1 * self.rcont[4][i])));
        }
        out
    }
}

/// Why the integration loop finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    ReachedHorizon,
    StoppedByObserver,
    BudgetExhausted,
}

/// Whether to keep integrating after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on the step size. Profiles are sampled at accepted steps, so
    /// this also bounds the output grid spacing.
    pub max_dt: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    /// Integrates forward from `(t0, y0)` to `t_end`, invoking the observer
    /// on every accepted step. The observer may stop the run (after locating
    /// an event, for instance).
    pub fn integrate<F, O>(&self, f: F, t0: f64, y0: State, t_end: f64, mut observer: O) -> End
    where
        F: Fn(f64, State) -> State,
        O: FnMut(&Step) -> Control,
    {
        assert!(t_end > t0, "integration runs forward in t");
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, y);
        let mut h = self.max_dt.min((t_end - t0) / 16.0).max(1e-12);
        let mut just_rejected = false;

        for _ in 0..self.max_steps {
            if t >= t_end {
                return End::ReachedHorizon;
            }
            h = h.min(self.max_dt).min(t_end - t);

            let (k2, k3, k4, k5, k6, k7, y1, err);
            {
                let ax = |c: &[(f64, State)]| {
                    let mut out = y;
                    for i in 0..2 {
                        for (a, k) in c {
                            out[i] += h * a * k[i];
                        }
                    }
                    out
                };
                k2 = f(t + C2 * h, ax(&[(A21, k1)]));
                k3 = f(t + C3 * h, ax(&[(A31, k1), (A32, k2)]));
                k4 = f(t + C4 * h, ax(&[(A41, k1), (A42, k2), (A43, k3)]));
                k5 = f(t + C5 * h, ax(&[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]));
                k6 = f(
                    t + h,
                    ax(&[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]),
                );
                y1 = ax(&[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
                k7 = f(t + h, y1);

                let mut acc = 0.0;
                for i in 0..2 {
                    let e = h
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                            + E7 * k7[i]);
                    let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                    acc += (e / sc) * (e / sc);
                }
                err = (acc / 2.0).sqrt();
            }

            if err <= 1.0 {
                let mut rcont = [[0.0; 2]; 5];
                for i in 0..2 {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let step = Step { t0: t, h, y0: y, y1, f1: k7, rcont };
                t += h;
                y = y1;
                k1 = k7;

                if observer(&step) == Control::Stop {
                    return End::StoppedByObserver;
                }
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, if just_rejected { 1.0 } else { 5.0 });
                h *= fac;
                just_rejected = false;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0).min(0.9);
                just_rejected = true;
            }
        }
        End::BudgetExhausted
    }
}

/// Locates a root of `component` of the dense interpolant inside a step that
/// brackets a sign change. Returns `(t_root, state_at_root)`.
pub fn locate_zero(step: &Step, component: usize) -> (f64, State) {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let flo = step.y0[component];
    debug_assert!(flo >= 0.0 && step.y1[component] <= 0.0);
    let _ = flo;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let v = step.dense(mid)[component];
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    (step.t0 + theta * step.h, step.dense(theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_accuracy() {
        let solver = Dopri5 { rtol: 1e-10, atol: 1e-12, max_dt: 0.05, max_steps: 100_000 };
        let mut last = (0.0, [1.0, 0.0]);
        let end = solver.integrate(
            |_t, y| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            |s| {
                last = (s.t1(), s.y1);
                Control::Continue
            },
        );
        assert_eq!(end, End::ReachedHorizon);
        assert!((last.0 - 10.0).abs() < 1e-12);
        assert!((last.1[0] - 10.0f64.cos()).abs() < 1e-9);
        assert!((last.1[1] + 10.0f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_matches_exponential() {
        let solver = Dopri5 { rtol: 1e-11, atol: 1e-13, max_dt: 0.1, max_steps: 10_000 };
        let mut worst = 0.0f64;
        solver.integrate(
            |_t, y| [y[0], -y[1]],
            0.0,
            [1.0, 1.0],
            2.0,
            |s| {
                for k in 0..=10 {
                    let theta = k as f64 / 10.0;
                    let t = s.t0 + theta * s.h;
                    let v = s.dense(theta);
                    worst = worst.max((v[0] - t.exp()).abs() / t.exp());
                    worst = worst.max((v[1] - (-t).exp()).abs());
                }
                Control::Continue
            },
        );
        assert!(worst < 1e-9, "dense output error {worst}");
    }

    #[test]
    fn zero_location_on_cosine() {
        // y0 = cos(t) crosses zero at pi/2.
        let solver = Dopri5 { rtol: 1e-12, atol: 1e-14, max_dt: 0.02, max_steps: 100_000 };
        let mut root = None;
        solver.integrate(
            |_t, y| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            3.0,
            |s| {
                if s.y0[0] > 0.0 && s.y1[0] <= 0.0 {
                    let (t, _) = locate_zero(s, 0);
                    root = Some(t);
                    return Control::Stop;
                }
                Control::Continue
            },
        );
        let t = root.expect("crossing found");
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-11, "root {t}");
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let solver = Dopri5 { rtol: 1e-10, atol: 1e-12, max_dt: 1e-3, max_steps: 10 };
        let end = solver.integrate(|_t, _y| [1.0, 0.0], 0.0, [0.0, 0.0], 1.0, |_s| Control::Continue);
        assert_eq!(end, End::BudgetExhausted);
    }
}
