//! Theorem-level constructions on top of the radial integrators.
//!
//! The supercritical radial solution is built along the inversion route: a
//! punctured-ball shoot from the origin is guaranteed to cross zero (the
//! inverted problem is subcritical by duality), the crossing is rescaled to
//! radius one by the scaling symmetry, and the inversion maps the result back
//! to the exterior. Shooting on the exterior slope directly has no comparable
//! monotone structure, so it is only used for nonexistence witnesses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{
    decay_slope, ef_energy, integrate_emden_fowler, integrate_exterior, integrate_interior,
    log_grid, pospow, residual, series_start_bound, EFTrajectory, IntegratorConfig, RadialProfile,
    ShootKind, Side, RESIDUAL_QUALIFICATION,
};
use crate::params::{classify, derive, DerivedParams, ProblemParams, Regime, CLASSIFY_EPS};
use crate::quad::adaptive_simpson;

/// The constructed supercritical radial solution and its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Exterior profile with `grid[0] = 1`, `values[0] = 0`.
    #[serde(skip)]
    pub profile: RadialProfile,
    /// Boundary slope u'(1) of the constructed solution.
    pub beta_star: f64,
    /// Scaling factor applied to move the interior zero to radius one.
    pub lambda: f64,
    /// First zero of the interior shoot.
    pub interior_zero: f64,
    /// Central value of the interior trajectory at its series start.
    pub interior_limit: f64,
    /// Log-log slope of the far tail; the fast decay rate is 2 - N'.
    pub decay_slope: f64,
    /// Maximum qualified relative residual of the exterior equation.
    pub residual: f64,
}

/// Constructs the unique positive radial solution for tau > -2, p > p_s.
pub fn solve_supercritical(
    params: &ProblemParams,
    config: &IntegratorConfig,
) -> Result<SolveReport> {
    solve_supercritical_with_amplitude(params, config, 1.0)
}

/// Same construction from an arbitrary interior shooting amplitude. The
/// scaling symmetry collapses every amplitude onto the same exterior profile;
/// exposing the knob lets verification exercise that invariance directly.
pub fn solve_supercritical_with_amplitude(
    params: &ProblemParams,
    config: &IntegratorConfig,
    alpha: f64,
) -> Result<SolveReport> {
    let class = classify(params)?;
    if class.regime != Regime::ExistsUniqueRadial {
        return Err(Error::Regime {
            found: class.regime,
            detail: "the unique radial solution exists only for tau > -2, p > p_s".into(),
        });
    }
    let derived = derive(params)?;

    // Keep the series start inside its validity region for this amplitude.
    let r0 = config.r0.min(series_start_bound(alpha, &derived, 1e-4));
    let config_interior = IntegratorConfig { r0, ..*config };

    let shot = integrate_interior(alpha, &derived, &config_interior)?;
    let interior_limit = shot.trajectory.values[0];
    let interior_zero = match shot.kind {
        ShootKind::CrossedZero { radius } => radius,
        ShootKind::PositiveToHorizon { .. } => {
            return Err(Error::NoCrossing { horizon: config.r_max })
        }
        ShootKind::StepBudgetExhausted => {
            return Err(Error::StepBudgetExhausted(config.max_steps))
        }
    };

    let rescaled = rescale(&shot.trajectory, interior_zero)?;
    let mut profile = kelvin_map(&rescaled)?;

    // The rescaled zero sits at radius one by construction; pin the boundary
    // data exactly.
    if profile.values[0].abs() <= 1e3 * config.zero_tol {
        profile.grid[0] = 1.0;
        profile.values[0] = 0.0;
    }
    let beta_star = profile.derivs[0];
    let slope = decay_slope(&profile)?;
    let res = residual(&profile)?;

    Ok(SolveReport {
        beta_star,
        lambda: interior_zero,
        interior_zero,
        interior_limit,
        decay_slope: slope,
        residual: res,
        profile,
    })
}

/// Applies the scaling symmetry `w(r) = lambda^e v(lambda r)` with
/// `e = (2 + gap)/(p - 1)`, where the gap is the one matching the profile's
/// side (dual gap for interior profiles). The image solves the same equation.
pub fn rescale(profile: &RadialProfile, lambda: f64) -> Result<RadialProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scaling factor must be positive and finite, got {lambda}"
        )));
    }
    let d = &profile.params;
    if d.p <= 1.0 + CLASSIFY_EPS {
        return Err(Error::InvalidParameter("scaling symmetry needs p > 1".into()));
    }
    let gap = match profile.side {
        Side::Interior => d.tau_prime,
        Side::Exterior => d.tau,
    };
    let e = (2.0 + gap) / (d.p - 1.0);
    let amp = lambda.powf(e);
    let damp = lambda.powf(e + 1.0);
    let grid: Vec<f64> = profile.grid.iter().map(|r| r / lambda).collect();
    let values: Vec<f64> = profile.values.iter().map(|v| amp * v).collect();
    let derivs: Vec<f64> = profile.derivs.iter().map(|v| damp * v).collect();
    RadialProfile::new(grid, values, derivs, profile.side, *d)
}

/// Inversion about the unit sphere: `g(s) = r^(N'-2) h(r)` with `s = 1/r`.
/// Involutive; exchanges interior and exterior profiles and maps solutions of
/// one equation onto solutions of the dual one.
pub fn kelvin_map(profile: &RadialProfile) -> Result<RadialProfile> {
    let np = profile.params.n_prime;
    let n = profile.len();
    let mut grid = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let r = profile.grid[i];
        let h = profile.values[i];
        let dh = profile.derivs[i];
        grid.push(1.0 / r);
        values.push(r.powf(np - 2.0) * h);
        derivs.push(-(np - 2.0) * r.powf(np - 1.0) * h - r.powf(np) * dh);
    }
    let side = match profile.side {
        Side::Interior => Side::Exterior,
        Side::Exterior => Side::Interior,
    };
    RadialProfile::new(grid, values, derivs, side, profile.params)
}

/// How a nonexistence witness trajectory was integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessMethod {
    /// Flux-form exterior shoot (p <= 1).
    Exterior,
    /// Log-radius phase plane (p > 1); at the critical exponent the positive
    /// conserved energy forces the return to zero at bounded t even though
    /// the radius may be astronomically large.
    PhasePlane,
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaOutcome {
    pub beta: f64,
    pub method: WitnessMethod,
    pub crossed: bool,
    /// Radius of the first zero when one was found.
    pub first_zero_radius: Option<f64>,
    /// Relative drift of the phase-plane first integral (critical case only).
    pub energy_drift: Option<f64>,
}

/// Numerical witness of nonexistence: every shot below or at the critical
/// exponent must cross zero.
#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceReport {
    pub betas: Vec<f64>,
    pub outcomes: Vec<BetaOutcome>,
    pub all_crossed: bool,
    /// Slopes whose trajectories failed to cross; nonempty means the witness
    /// failed and must never be treated as a pass.
    pub surviving_betas: Vec<f64>,
}

/// Runs one independent trajectory per slope in `betas` (concurrently) and
/// reports first-zero locations. `all_crossed` is the numerical nonexistence
/// witness; any surviving trajectory is flagged.
pub fn verify_nonexistence(
    params: &ProblemParams,
    betas: &[f64],
    config: &IntegratorConfig,
) -> Result<NonexistenceReport> {
    let derived = derive(params)?;
    if derived.n_prime <= 2.0 + CLASSIFY_EPS || derived.tau <= -2.0 {
        return Err(Error::InvalidParameter(
            "nonexistence verification needs N' > 2 and tau > -2".into(),
        ));
    }
    match derived.p_s {
        Some(ps) if derived.p <= ps + CLASSIFY_EPS * ps.abs().max(1.0) => {}
        _ => {
            return Err(Error::InvalidParameter(
                "nonexistence verification applies to 0 < p <= p_s".into(),
            ))
        }
    }
    if betas.is_empty() {
        return Err(Error::InvalidParameter("no slopes to verify".into()));
    }

    let outcomes: Vec<BetaOutcome> = betas
        .par_iter()
        .map(|&beta| witness_one(beta, &derived, config))
        .collect::<Result<_>>()?;
    let surviving: Vec<f64> = outcomes.iter().filter(|o| !o.crossed).map(|o| o.beta).collect();
    Ok(NonexistenceReport {
        betas: betas.to_vec(),
        all_crossed: surviving.is_empty(),
        surviving_betas: surviving,
        outcomes,
    })
}

fn witness_one(
    beta: f64,
    derived: &DerivedParams,
    config: &IntegratorConfig,
) -> Result<BetaOutcome> {
    if derived.p > 1.0 + CLASSIFY_EPS {
        let traj = integrate_emden_fowler(beta, derived, config)?;
        let drift = traj.energy.as_ref().map(|energy| {
            let e0 = energy[0].abs().max(f64::MIN_POSITIVE);
            energy.iter().map(|e| (e - energy[0]).abs()).fold(0.0f64, f64::max) / e0
        });
        Ok(BetaOutcome {
            beta,
            method: WitnessMethod::PhasePlane,
            crossed: traj.first_zero_t.is_some(),
            first_zero_radius: traj.first_zero_t.map(f64::exp),
            energy_drift: drift,
        })
    } else {
        let out = integrate_exterior(beta, derived, config)?;
        let first_zero = match out.kind {
            ShootKind::CrossedZero { radius } => Some(radius),
            _ => None,
        };
        Ok(BetaOutcome {
            beta,
            method: WitnessMethod::Exterior,
            crossed: first_zero.is_some(),
            first_zero_radius: first_zero,
            energy_drift: None,
        })
    }
}

/// Pointwise diagnostic `phi(r) = r u'(r) + m u(r)` with `m = (2+tau)/(p-1)`.
/// Vanishes identically on the exact power-law solution; equals the boundary
/// slope at r = 1 for every exterior shoot; negative on fast-decay tails.
pub fn phi_diagnostic(profile: &RadialProfile) -> Result<RadialProfile> {
    let d = &profile.params;
    if d.p <= 1.0 + CLASSIFY_EPS {
        return Err(Error::InvalidParameter("phi diagnostic needs p > 1".into()));
    }
    let m = d.m.expect("p > 1 implies m is present");
    let gap = match profile.side {
        Side::Interior => d.tau_prime,
        Side::Exterior => d.tau,
    };
    let np = d.n_prime;
    let n = profile.len();
    let mut values = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    for i in 0..n {
        let r = profile.grid[i];
        let u = profile.values[i];
        let du = profile.derivs[i];
        values.push(r * du + m * u);
        // phi' through the equation's second derivative; exact on solutions.
        let ddu = -(np - 1.0) * du / r - r.powf(gap) * pospow(u, d.p);
        derivs.push((1.0 + m) * du + r * ddu);
    }
    RadialProfile::new(profile.grid.clone(), values, derivs, profile.side, *d)
}

/// Input to the energy integral: a computed profile or a pure power law
/// `u = amplitude * r^exponent`.
#[derive(Debug, Clone, Copy)]
pub enum EnergyInput<'a> {
    Profile(&'a RadialProfile),
    PowerLaw { amplitude: f64, exponent: f64 },
}

/// Radial reduction of the stability energy over `2 <= r <= R`: the gradient
/// term `int r^(N'-1) u'^2 dr` and the source term
/// `int r^(N'+tau-1) u^(p+1) dr`. The constant angular surface measure is
/// omitted; only convergence and growth rates carry information.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    pub gradient_term: f64,
    pub source_term: f64,
    pub total: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
    /// The surface measure of the unit sphere is folded out as a constant.
    pub angular_measure_omitted: bool,
}

pub fn energy_integral(
    input: EnergyInput<'_>,
    derived: &DerivedParams,
    r_upper: f64,
) -> Result<EnergyBreakdown> {
    const R_LOWER: f64 = 2.0;
    if !(r_upper > R_LOWER) {
        return Err(Error::InvalidParameter(format!("upper radius must exceed {R_LOWER}")));
    }
    if let EnergyInput::Profile(p) = input {
        if p.r_min() > R_LOWER || p.r_max() < r_upper {
            return Err(Error::RangeOutsideProfile { lo: R_LOWER, hi: r_upper });
        }
    }
    let eval = |r: f64| -> (f64, f64) {
        match input {
            EnergyInput::Profile(p) => {
                (p.value_at(r).unwrap_or(f64::NAN), p.deriv_at(r).unwrap_or(f64::NAN))
            }
            EnergyInput::PowerLaw { amplitude, exponent } => {
                (amplitude * r.powf(exponent), amplitude * exponent * r.powf(exponent - 1.0))
            }
        }
    };
    let np = derived.n_prime;
    let tau = derived.tau;
    let p = derived.p;
    // Integrate in t = ln r; the extra factor r is the Jacobian.
    let gradient_term = adaptive_simpson(
        |t| {
            let r = t.exp();
            let (_, du) = eval(r);
            r.powf(np - 1.0) * du * du * r
        },
        R_LOWER.ln(),
        r_upper.ln(),
        1e-10,
        1e-300,
    );
    let source_term = adaptive_simpson(
        |t| {
            let r = t.exp();
            let (u, _) = eval(r);
            r.powf(np + tau - 1.0) * pospow(u, p + 1.0) * r
        },
        R_LOWER.ln(),
        r_upper.ln(),
        1e-10,
        1e-300,
    );
    Ok(EnergyBreakdown {
        gradient_term,
        source_term,
        total: gradient_term + source_term,
        lower_limit: R_LOWER,
        upper_limit: r_upper,
        angular_measure_omitted: true,
    })
}

/// Log-radius phase-plane image of an exterior profile, with the residual of
/// the transformed equation and a monotonicity report for
/// `v(t) = r^((N'-2)/2) u(r)`.
#[derive(Debug, Clone)]
pub struct EmdenReport {
    pub trajectory: EFTrajectory,
    /// Maximum qualified relative residual of
    /// `v_tt + e^(p_* t) v^p - ((N'-2)^2/4) v = 0` on the transformed grid.
    pub residual: f64,
    /// Fraction of grid nodes with v_t > 0. Reported, never asserted: the
    /// monotone regime concerns a solution class that is provably empty, and
    /// partial trajectories carry no guarantee.
    pub increasing_fraction: f64,
}

pub fn emden_transform(profile: &RadialProfile) -> Result<EmdenReport> {
    if profile.side != Side::Exterior {
        return Err(Error::InvalidParameter(
            "phase-plane transform expects an exterior profile".into(),
        ));
    }
    let d = profile.params;
    let np = d.n_prime;
    let half = (np - 2.0) / 2.0;
    let n = profile.len();
    let mut t_grid = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut v_t = Vec::with_capacity(n);
    for i in 0..n {
        let r = profile.grid[i];
        let u = profile.values[i];
        let du = profile.derivs[i];
        t_grid.push(r.ln());
        v.push(r.powf(half) * u);
        v_t.push(half * r.powf(half) * u + r.powf(half + 1.0) * du);
    }
    let critical = d.p_star.abs() <= CLASSIFY_EPS;
    let energy =
        critical.then(|| v.iter().zip(&v_t).map(|(&a, &b)| ef_energy(a, b, np, d.p)).collect());

    // Central-difference residual of the phase-plane equation, with the same
    // relative qualification rule as the flux-form residual.
    let quart = (np - 2.0) * (np - 2.0) / 4.0;
    let mut sums = Vec::with_capacity(n.saturating_sub(2));
    let mut dens = Vec::with_capacity(n.saturating_sub(2));
    let mut scale = 0.0f64;
    for i in 1..n - 1 {
        let v_tt = (v_t[i + 1] - v_t[i - 1]) / (t_grid[i + 1] - t_grid[i - 1]);
        let force = (d.p_star * t_grid[i]).exp() * pospow(v[i], d.p);
        let linear = quart * v[i];
        let den = v_tt.abs().max(force).max(linear.abs());
        scale = scale.max(den);
        sums.push(v_tt + force - linear);
        dens.push(den);
    }
    let mut worst = 0.0f64;
    if scale > 0.0 {
        let floor = RESIDUAL_QUALIFICATION * scale;
        for (s, den) in sums.iter().zip(&dens) {
            if *den >= floor {
                worst = worst.max(s.abs() / den);
            }
        }
    }
    let increasing = v_t.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;

    Ok(EmdenReport {
        trajectory: EFTrajectory {
            t_grid,
            v,
            v_t,
            p_star: d.p_star,
            energy,
            first_zero_t: None,
            params: d,
        },
        residual: worst,
        increasing_fraction: increasing,
    })
}

/// Log-spaced comparison radii spanning `[lo, hi]`, for sup-norm checks
/// between independently constructed profiles.
pub fn comparison_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    log_grid(lo, hi, n)
}
