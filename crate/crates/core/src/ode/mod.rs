//! Singularity-aware integration of the radial equations.
//!
//! Both the punctured-ball equation and the exterior equation are integrated
//! in the flux variables `(w, F)` with `F = r^(N'-1) w'`, stepping in
//! `t = ln r`. The divergence form makes `F` monotone along positive
//! trajectories and removes the `1/r` amplification near the origin; the
//! log-radius step keeps zero crossings at bounded cost even when they occur
//! at exponentially large radii. The phase-plane form
//! `v_tt = ((N'-2)^2/4) v - e^(p_* t) v^p` is integrated directly in `t`.

mod dopri5;

pub use dopri5::{locate_zero, Control, Dopri5, End, Step};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DerivedParams, CLASSIFY_EPS};

/// Which side of the unit sphere a radial profile lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Punctured-ball profile; solves the equation with the dual weight gap.
    Interior,
    /// Exterior profile; solves the equation with the primal weight gap.
    Exterior,
}

/// A radial function on a strictly increasing grid, with first derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub side: Side,
    pub params: DerivedParams,
}

impl RadialProfile {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<f64>,
        derivs: Vec<f64>,
        side: Side,
        params: DerivedParams,
    ) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() || grid.len() != derivs.len() {
            return Err(Error::InvalidParameter(
                "profile arrays must be nonempty and of equal length".into(),
            ));
        }
        if grid[0] <= 0.0 {
            return Err(Error::InvalidParameter("profile radii must be positive".into()));
        }
        for i in 0..grid.len() {
            if !(grid[i].is_finite() && values[i].is_finite() && derivs[i].is_finite()) {
                return Err(Error::InvalidParameter("profile entries must be finite".into()));
            }
            if i > 0 && grid[i] <= grid[i - 1] {
                return Err(Error::InvalidParameter(
                    "profile grid must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { grid, values, derivs, side, params })
    }

    /// Samples an analytic pair `r -> (value, derivative)` on a given grid.
    pub fn from_fn<F: Fn(f64) -> (f64, f64)>(
        grid: Vec<f64>,
        side: Side,
        params: DerivedParams,
        f: F,
    ) -> Result<Self> {
        let (values, derivs): (Vec<f64>, Vec<f64>) = grid.iter().map(|&r| f(r)).unzip();
        Self::new(grid, values, derivs, side, params)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    fn segment_of(&self, r: f64) -> Result<usize> {
        if r < self.r_min() || r > self.r_max() {
            return Err(Error::RangeOutsideProfile { lo: r, hi: r });
        }
        let idx = self.grid.partition_point(|&g| g <= r);
        Ok(idx.clamp(1, self.len() - 1) - 1)
    }

    /// Cubic Hermite evaluation of the profile at radius `r`.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        let i = self.segment_of(r)?;
        let h = self.grid[i + 1] - self.grid[i];
        let s = (r - self.grid[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i], self.derivs[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * m1)
    }

    /// Derivative of the Hermite interpolant at radius `r`.
    pub fn deriv_at(&self, r: f64) -> Result<f64> {
        let i = self.segment_of(r)?;
        let h = self.grid[i + 1] - self.grid[i];
        let s = (r - self.grid[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i], self.derivs[i + 1]);
        let s2 = s * s;
        Ok((6.0 * s2 - 6.0 * s) * (y0 - y1) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (3.0 * s2 - 2.0 * s) * m1)
    }

    /// Largest absolute difference against another profile sampled at the
    /// given radii.
    pub fn max_abs_diff_on(&self, other: &RadialProfile, radii: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &r in radii {
            worst = worst.max((self.value_at(r)? - other.value_at(r)?).abs());
        }
        Ok(worst)
    }
}

/// Controls for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Relative local error tolerance.
    pub rtol: f64,
    /// Absolute local error tolerance.
    pub atol: f64,
    /// Series-start radius for interior runs.
    pub r0: f64,
    /// Integration horizon in radius; the log-radius horizon is `ln(r_max)`.
    pub r_max: f64,
    /// Step budget per trajectory.
    pub max_steps: usize,
    /// Event-detection tolerance on the function value. Trajectories of
    /// sublinear powers are truncated once the value drops below this.
    pub zero_tol: f64,
    /// Cap on the log-radius step. Output grids inherit this spacing, which
    /// bounds the discretization error of downstream finite-difference
    /// verification.
    pub max_dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            r0: 1e-6,
            r_max: 1e6,
            max_steps: 2_000_000,
            zero_tol: 1e-12,
            max_dt: 5e-5,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.r0 > 0.0
            && self.r0 < 1.0
            && self.r_max > 1.0
            && self.max_steps > 0
            && self.zero_tol > 0.0
            && self.max_dt > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid integrator config: {self:?}")))
        }
    }

    pub fn t_max(&self) -> f64 {
        self.r_max.ln()
    }

    fn stepper(&self) -> Dopri5 {
        Dopri5 { rtol: self.rtol, atol: self.atol, max_dt: self.max_dt, max_steps: self.max_steps }
    }
}

/// Result kind of one shooting trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShootKind {
    /// The value crossed zero; `radius` locates the first zero.
    CrossedZero { radius: f64 },
    /// The value stayed positive up to the horizon.
    PositiveToHorizon { decay_slope: f64 },
    /// The step budget ran out before a zero or the horizon.
    StepBudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct ShootOutcome {
    pub kind: ShootKind,
    pub trajectory: RadialProfile,
}

/// Log-radius phase-plane trajectory `v(t) = r^((N'-2)/2) u(r)`, `t = ln r`.
#[derive(Debug, Clone)]
pub struct EFTrajectory {
    pub t_grid: Vec<f64>,
    pub v: Vec<f64>,
    pub v_t: Vec<f64>,
    pub p_star: f64,
    /// First-integral samples, recorded in the autonomous case p_* = 0 only.
    pub energy: Option<Vec<f64>>,
    /// First return of v to zero, when one occurred before the horizon.
    pub first_zero_t: Option<f64>,
    pub params: DerivedParams,
}

/// `E = v_t^2/2 + v^(p+1)/(p+1) - ((N'-2)^2/8) v^2`, conserved when p_* = 0.
pub fn ef_energy(v: f64, v_t: f64, n_prime: f64, p: f64) -> f64 {
    let c = n_prime - 2.0;
    0.5 * v_t * v_t + pospow(v, p + 1.0) / (p + 1.0) - c * c / 8.0 * v * v
}

/// `u^p` for positive part only: the existence theory concerns positivity and
/// sublinear powers lose Lipschitz continuity at zero.
#[inline]
pub fn pospow(u: f64, p: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        u.powf(p)
    }
}

/// Two-term expansion of the punctured-ball trajectory near the origin:
///
///   v(r) = alpha - alpha^p r^(tau'+2) / ((tau'+2)(N'+tau')) + O(r^(2(tau'+2)))
///
/// together with its derivative. The flux `r^(N'-1) v'` vanishes at the
/// origin, which is exactly what this start enforces.
pub fn origin_series(alpha: f64, derived: &DerivedParams, r0: f64) -> Result<(f64, f64)> {
    let tp = derived.tau_prime;
    let np = derived.n_prime;
    if tp <= -2.0 {
        return Err(Error::InvalidParameter(format!(
            "origin series needs an integrable dual weight (tau' > -2), got tau' = {tp}"
        )));
    }
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be nonnegative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidParameter(format!("series radius r0 = {r0} outside (0, 1)")));
    }
    let correction = alpha.powf(derived.p) * r0.powf(tp + 2.0) / ((tp + 2.0) * (np + tp));
    if correction >= 1e-3 * alpha {
        return Err(Error::InvalidParameter(format!(
            "r0 = {r0} too large for the two-term origin expansion (correction {correction:.3e})"
        )));
    }
    let v = alpha - correction;
    let dv = -alpha.powf(derived.p) * r0.powf(tp + 1.0) / (np + tp);
    Ok((v, dv))
}

/// Largest admissible series-start radius for amplitude `alpha`, with the
/// relative size of the first correction capped at `budget`.
pub fn series_start_bound(alpha: f64, derived: &DerivedParams, budget: f64) -> f64 {
    let tp = derived.tau_prime;
    let np = derived.n_prime;
    let cap = budget * alpha * (tp + 2.0) * (np + tp) / alpha.powf(derived.p);
    cap.powf(1.0 / (tp + 2.0)).min(0.5)
}

struct FluxRecorder {
    n_prime: f64,
    grid: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl FluxRecorder {
    fn new(n_prime: f64, capacity: usize) -> Self {
        Self {
            n_prime,
            grid: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            derivs: Vec::with_capacity(capacity),
        }
    }

    fn push(&mut self, t: f64, w: f64, flux: f64) {
        let r = t.exp();
        self.grid.push(r);
        self.values.push(w);
        // w' = F r^(1-N')
        self.derivs.push(flux * ((1.0 - self.n_prime) * t).exp());
    }

    fn into_profile(self, side: Side, params: DerivedParams) -> Result<RadialProfile> {
        RadialProfile::new(self.grid, self.values, self.derivs, side, params)
    }
}

struct FluxDrive<'a> {
    derived: &'a DerivedParams,
    config: &'a IntegratorConfig,
    side: Side,
    /// Weight gap of the equation being integrated: tau' interior, tau exterior.
    weight_gap: f64,
}

impl FluxDrive<'_> {
    /// Integrates the flux system from `(t_start, w, F)`. Returns the outcome
    /// and the recorded trajectory.
    fn run(&self, t_start: f64, y_start: [f64; 2]) -> Result<ShootOutcome> {
        self.config.validate()?;
        let np = self.derived.n_prime;
        let p = self.derived.p;
        let growth = np + self.weight_gap;
        let decay = 2.0 - np;
        let rhs = move |t: f64, y: [f64; 2]| {
            [y[1] * (decay * t).exp(), -(growth * t).exp() * pospow(y[0], p)]
        };

        let t_end = self.config.t_max();
        let zero_tol = self.config.zero_tol;
        let sublinear = p < 1.0 - CLASSIFY_EPS;
        let capacity = (((t_end - t_start) / self.config.max_dt) as usize).min(4_000_000) + 8;
        let mut rec = FluxRecorder::new(np, capacity);
        rec.push(t_start, y_start[0], y_start[1]);

        let mut armed = y_start[0] > zero_tol;
        let mut crossing: Option<f64> = None;
        let mut flux_violation: Option<f64> = None;

        let end = self.config.stepper().integrate(rhs, t_start, y_start, t_end, |step| {
            let [w0, f0] = step.y0;
            let [w1, f1] = step.y1;
            // The divergence form forces the flux down along positive arcs.
            if w0 > zero_tol && w1 > zero_tol {
                let slack = self.config.atol + 1e-13 * f0.abs();
                if f1 > f0 + slack {
                    flux_violation = Some(step.t1().exp());
                    return Control::Stop;
                }
            }
            if armed {
                if w1 <= 0.0 {
                    let (t_zero, y_zero) = locate_zero(step, 0);
                    rec.push(t_zero, y_zero[0], y_zero[1]);
                    crossing = Some(t_zero.exp());
                    return Control::Stop;
                }
                if sublinear && w1 < zero_tol {
                    rec.push(step.t1(), w1, f1);
                    crossing = Some(step.t1().exp());
                    return Control::Stop;
                }
            } else if w1 > zero_tol {
                armed = true;
            }
            rec.push(step.t1(), w1, f1);
            Control::Continue
        });

        if let Some(r) = flux_violation {
            return Err(Error::FluxMonotonicity(r));
        }
        let trajectory = rec.into_profile(self.side, *self.derived)?;
        let kind = match (crossing, end) {
            (Some(radius), _) => ShootKind::CrossedZero { radius },
            (None, End::ReachedHorizon) => {
                let slope = decay_slope(&trajectory).unwrap_or(f64::NAN);
                ShootKind::PositiveToHorizon { decay_slope: slope }
            }
            (None, End::BudgetExhausted) => ShootKind::StepBudgetExhausted,
            (None, End::StoppedByObserver) => unreachable!("observer stops imply an event"),
        };
        Ok(ShootOutcome { kind, trajectory })
    }
}

/// Shoots the punctured-ball equation outward from a series start at the
/// origin with central amplitude `alpha`. The equation uses the dual weight
/// gap tau' carried by `derived`; this is the inversion image of the
/// exterior problem.
pub fn integrate_interior(
    alpha: f64,
    derived: &DerivedParams,
    config: &IntegratorConfig,
) -> Result<ShootOutcome> {
    if derived.n_prime <= 2.0 + CLASSIFY_EPS {
        return Err(Error::InvalidParameter("interior shooting needs N' > 2".into()));
    }
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let (v, dv) = origin_series(alpha, derived, config.r0)?;
    let flux = config.r0.powf(derived.n_prime - 1.0) * dv;
    let drive =
        FluxDrive { derived, config, side: Side::Interior, weight_gap: derived.tau_prime };
    drive.run(config.r0.ln(), [v, flux])
}

/// Shoots the exterior equation outward from the boundary sphere with slope
/// `u'(1) = beta`, `u(1) = 0`.
pub fn integrate_exterior(
    beta: f64,
    derived: &DerivedParams,
    config: &IntegratorConfig,
) -> Result<ShootOutcome> {
    if derived.n_prime <= 2.0 + CLASSIFY_EPS {
        return Err(Error::InvalidParameter("exterior shooting needs N' > 2".into()));
    }
    if derived.tau <= -2.0 {
        return Err(Error::InvalidParameter("exterior shooting needs tau > -2".into()));
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    if beta == 0.0 {
        let trajectory = RadialProfile::new(
            vec![1.0],
            vec![0.0],
            vec![0.0],
            Side::Exterior,
            *derived,
        )?;
        return Ok(ShootOutcome { kind: ShootKind::CrossedZero { radius: 1.0 }, trajectory });
    }
    let drive = FluxDrive { derived, config, side: Side::Exterior, weight_gap: derived.tau };
    drive.run(0.0, [0.0, beta])
}

/// Integrates the log-radius phase-plane form with initial data
/// `v(0) = 0, v_t(0) = beta`, up to the horizon or the first return of `v`
/// to zero. In the critical case `p_* = 0` the first integral is recorded at
/// every node.
pub fn integrate_emden_fowler(
    beta: f64,
    derived: &DerivedParams,
    config: &IntegratorConfig,
) -> Result<EFTrajectory> {
    config.validate()?;
    if derived.n_prime <= 2.0 + CLASSIFY_EPS {
        return Err(Error::InvalidParameter("phase-plane form needs N' > 2".into()));
    }
    if derived.tau <= -2.0 {
        return Err(Error::InvalidParameter("phase-plane form needs tau > -2".into()));
    }
    if derived.p <= 1.0 + CLASSIFY_EPS {
        return Err(Error::InvalidParameter("phase-plane form needs p > 1".into()));
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    let np = derived.n_prime;
    let p = derived.p;
    let p_star = derived.p_star;
    let critical = p_star.abs() <= CLASSIFY_EPS;

    let mut t_grid = Vec::new();
    let mut v = Vec::new();
    let mut v_t = Vec::new();
    let mut energy = critical.then(Vec::new);
    let mut push = |t: f64, y: [f64; 2], energy: &mut Option<Vec<f64>>| {
        t_grid.push(t);
        v.push(y[0]);
        v_t.push(y[1]);
        if let Some(e) = energy.as_mut() {
            e.push(ef_energy(y[0], y[1], np, p));
        }
    };
    push(0.0, [0.0, beta], &mut energy);

    if beta == 0.0 {
        return Ok(EFTrajectory {
            t_grid,
            v,
            v_t,
            p_star,
            energy,
            first_zero_t: Some(0.0),
            params: *derived,
        });
    }

    let quart = (np - 2.0) * (np - 2.0) / 4.0;
    let rhs = move |t: f64, y: [f64; 2]| {
        [y[1], quart * y[0] - (p_star * t).exp() * pospow(y[0], p)]
    };

    let zero_tol = config.zero_tol;
    let mut armed = false;
    let mut first_zero_t = None;
    let end = config.stepper().integrate(rhs, 0.0, [0.0, beta], config.t_max(), |step| {
        if armed && step.y1[0] <= 0.0 {
            let (t_zero, y_zero) = locate_zero(step, 0);
            push(t_zero, y_zero, &mut energy);
            first_zero_t = Some(t_zero);
            return Control::Stop;
        }
        if !armed && step.y1[0] > zero_tol {
            armed = true;
        }
        push(step.t1(), step.y1, &mut energy);
        Control::Continue
    });
    if end == End::BudgetExhausted {
        return Err(Error::StepBudgetExhausted(config.max_steps));
    }
    Ok(EFTrajectory { t_grid, v, v_t, p_star, energy, first_zero_t, params: *derived })
}

/// Fraction of the largest pointwise term scale below which a grid point is
/// excluded from residual maxima. Where every term of the equation is this
/// far below the trajectory's own scale, a finite difference of stored
/// values cannot resolve the balance in double precision.
pub const RESIDUAL_QUALIFICATION: f64 = 1e-2;

/// Maximum pointwise relative residual of the flux-form equation
/// `(r^(N'-1) w')' + r^(N'+tau-1) w^p = 0` on interior grid points, with the
/// dual gap tau' substituted for interior profiles.
///
/// Each point is normalized by the larger of the two terms; points whose
/// terms fall below [`RESIDUAL_QUALIFICATION`] times the profile-wide term
/// scale are excluded from the maximum.
pub fn residual(profile: &RadialProfile) -> Result<f64> {
    if profile.len() < 5 {
        return Err(Error::InvalidParameter("residual needs at least 5 grid points".into()));
    }
    let d = &profile.params;
    let gap = match profile.side {
        Side::Interior => d.tau_prime,
        Side::Exterior => d.tau,
    };
    let np = d.n_prime;
    let n = profile.len();
    let flux: Vec<f64> =
        (0..n).map(|i| profile.grid[i].powf(np - 1.0) * profile.derivs[i]).collect();

    let mut dfs = Vec::with_capacity(n - 2);
    let mut srcs = Vec::with_capacity(n - 2);
    let mut scale = 0.0f64;
    for i in 1..n - 1 {
        let df = (flux[i + 1] - flux[i - 1]) / (profile.grid[i + 1] - profile.grid[i - 1]);
        let src = profile.grid[i].powf(np + gap - 1.0) * pospow(profile.values[i], d.p);
        scale = scale.max(df.abs().max(src.abs()));
        dfs.push(df);
        srcs.push(src);
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let floor = RESIDUAL_QUALIFICATION * scale;
    let mut worst = 0.0f64;
    for (df, src) in dfs.iter().zip(&srcs) {
        let den = df.abs().max(src.abs());
        if den >= floor {
            worst = worst.max((df + src).abs() / den);
        }
    }
    Ok(worst)
}

/// Least-squares slope of `ln u` against `ln r` over the final decade of the
/// grid. Fails if the tail contains non-positive values.
pub fn decay_slope(profile: &RadialProfile) -> Result<f64> {
    let r_hi = profile.r_max();
    let r_lo = r_hi / 10.0;
    let mut start = profile.grid.partition_point(|&g| g < r_lo);
    // Always keep at least two points.
    start = start.min(profile.len().saturating_sub(2));
    let rs = &profile.grid[start..];
    let us = &profile.values[start..];
    if rs.len() < 2 {
        return Err(Error::InvalidParameter("decay slope needs at least 2 tail points".into()));
    }
    if us.iter().any(|&u| u <= 0.0) {
        return Err(Error::InvalidParameter(
            "decay slope needs a positive tail; profile has non-positive values".into(),
        ));
    }
    let n = rs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&r, &u) in rs.iter().zip(us) {
        let x = r.ln();
        let y = u.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return Err(Error::InvalidParameter("degenerate tail grid".into()));
    }
    Ok((n * sxy - sx * sy) / denom)
}

/// Log-uniform grid with `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests;
