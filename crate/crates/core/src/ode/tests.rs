use super::*;
use crate::params::DerivedParams;

fn axes(n_prime: f64, tau: f64, p: f64) -> DerivedParams {
    DerivedParams::from_axes(n_prime, tau, p).unwrap()
}

fn test_config(max_dt: f64, r_max: f64) -> IntegratorConfig {
    IntegratorConfig { max_dt, r_max, ..IntegratorConfig::default() }
}

// ---- independent fixed-step reference integrator -------------------------
//
// Classical RK4 with fixed steps in t = ln r, written from scratch so that
// the adaptive path is checked against a genuinely separate code path.

fn rk4_step<F: Fn(f64, [f64; 2]) -> [f64; 2]>(f: &F, t: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = f(t + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn rk4_to<F: Fn(f64, [f64; 2]) -> [f64; 2]>(
    f: &F,
    t0: f64,
    y0: [f64; 2],
    t_end: f64,
    n: usize,
) -> [f64; 2] {
    let mut y = y0;
    let mut t = t0;
    let h = (t_end - t0) / n as f64;
    for _ in 0..n {
        y = rk4_step(f, t, y, h);
        t += h;
    }
    y
}

/// First zero of the value component, located by stepping plus bisection on
/// re-integrations from the bracketing node.
fn rk4_first_zero<F: Fn(f64, [f64; 2]) -> [f64; 2]>(
    f: &F,
    t0: f64,
    y0: [f64; 2],
    h: f64,
    t_cap: f64,
) -> Option<f64> {
    let mut t = t0;
    let mut y = y0;
    let mut armed = y[0] > 0.0;
    while t < t_cap {
        let y1 = rk4_step(f, t, y, h);
        if armed && y1[0] <= 0.0 {
            let (mut lo, mut hi) = (t, t + h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if rk4_to(f, t, y, mid, 32)[0] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        if !armed && y1[0] > 0.0 {
            armed = true;
        }
        y = y1;
        t += h;
    }
    None
}

fn flux_rhs(n_prime: f64, gap: f64, p: f64) -> impl Fn(f64, [f64; 2]) -> [f64; 2] {
    move |t, y| {
        let w = if y[0] <= 0.0 { 0.0 } else { y[0].powf(p) };
        [y[1] * ((2.0 - n_prime) * t).exp(), -((n_prime + gap) * t).exp() * w]
    }
}

// ---- origin series --------------------------------------------------------

#[test]
fn series_two_term_values() {
    let d = axes(3.0, 0.0, 6.0); // tau' = 1
    let r0 = 1e-3;
    let (v, dv) = origin_series(1.0, &d, r0).unwrap();
    assert!((v - (1.0 - r0.powi(3) / 12.0)).abs() < 1e-18);
    assert!((dv + r0 * r0 / 4.0).abs() < 1e-18);

    let (v, dv) = origin_series(0.0, &d, r0).unwrap();
    assert_eq!((v, dv), (0.0, 0.0));
}

#[test]
fn series_rejects_bad_starts() {
    let d = axes(3.0, 0.0, 6.0);
    assert!(origin_series(1.0, &d, 0.9).is_err()); // correction too large
    assert!(origin_series(1.0, &d, -1.0).is_err());
    // Non-integrable dual weight.
    let mut bad = d;
    bad.tau_prime = -2.5;
    assert!(origin_series(1.0, &bad, 1e-3).is_err());
}

/// One further fixed-point iteration of the integral form
/// `v(r) = alpha - int_0^r t^(1-N') int_0^t s^(N'+tau'-1) v(s)^p ds dt`
/// starting from the two-term series. With an integer power the iterate is
/// an exact polynomial, which pins the truncation order of the series.
#[test]
fn series_truncation_order_vs_picard_iterate() {
    let d = axes(3.0, 0.0, 6.0); // N' = 3, tau' = 1, p = 6, q = tau' + 2 = 3
    let c: f64 = 1.0 / 12.0;
    let binom6 = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
    let picard = |r: f64| {
        let mut acc = 1.0;
        for (k, bk) in binom6.iter().enumerate() {
            let kq = 3.0 * k as f64;
            let term = bk * (-c).powi(k as i32) * r.powf(3.0 + kq)
                / ((4.0 + kq) * (3.0 + kq));
            acc -= term;
        }
        acc
    };
    let disc = |r0: f64| {
        let (v, _) = origin_series(1.0, &d, r0).unwrap();
        (v - picard(r0)).abs()
    };
    let d1 = disc(0.2);
    let d2 = disc(0.1);
    // Expected next-order scaling r^(2(tau'+2)) = r^6, so halving gains 64x;
    // anything above 2^(tau'+3) = 16 confirms the order.
    assert!(d1 > 1e-9, "discrepancy too small to resolve: {d1}");
    assert!(d1 / d2 >= 16.0, "observed ratio {}", d1 / d2);
    assert!(d1 / d2 <= 80.0, "observed ratio {}", d1 / d2);
}

// ---- interior shooting -----------------------------------------------------

#[test]
fn interior_critical_matches_closed_form() {
    // N' = 3, tau = 0, p = 5 is self-dual; the interior trajectory with
    // alpha = 1 is exactly v(r) = (1 + r^2/3)^(-1/2).
    let d = axes(3.0, 0.0, 5.0);
    let config = test_config(1e-3, 1e4);
    let out = integrate_interior(1.0, &d, &config).unwrap();
    match out.kind {
        ShootKind::PositiveToHorizon { decay_slope } => {
            assert!((decay_slope + 1.0).abs() < 0.02, "slope {decay_slope}");
        }
        other => panic!("expected positive-to-horizon, got {other:?}"),
    }
    let exact = |r: f64| (1.0 + r * r / 3.0).powf(-0.5);
    for &r in &[1e-4, 1e-2, 0.5, 1.0, 3.0, 10.0, 100.0, 5000.0] {
        let v = out.trajectory.value_at(r).unwrap();
        let e = exact(r);
        assert!((v - e).abs() < 1e-8 * e.max(1e-6), "r={r} v={v} exact={e}");
    }
}

#[test]
fn interior_supercritical_dual_crosses_and_matches_reference() {
    let d = axes(3.0, 0.0, 6.0); // interior equation has gap tau' = 1
    let config = test_config(1e-3, 1e4);
    let out = integrate_interior(1.0, &d, &config).unwrap();
    let radius = match out.kind {
        ShootKind::CrossedZero { radius } => radius,
        other => panic!("expected a crossing, got {other:?}"),
    };

    // Reference: independent RK4 run from its own series start.
    let rhs = flux_rhs(3.0, 1.0, 6.0);
    let r0 = 1e-5f64;
    let v0 = 1.0 - r0.powi(3) / 12.0;
    let f0 = -r0.powi(2) * r0.powi(2) / 4.0; // r^(N'-1) v' = -r0^2 * r0^2/4
    let t_zero = rk4_first_zero(&rhs, r0.ln(), [v0, f0], 1e-3, 10.0).expect("reference crossing");
    let r_ref = t_zero.exp();
    assert!(
        (radius - r_ref).abs() <= 1e-6 * r_ref,
        "radius {radius} vs reference {r_ref}"
    );
    // Last grid point sits on the located zero.
    let last = *out.trajectory.values.last().unwrap();
    assert!(last.abs() < 1e-9);
}

#[test]
fn interior_small_amplitude_is_nearly_linear() {
    let d = axes(3.0, 0.0, 6.0);
    let config = test_config(2e-3, 10.0);
    let alpha = 1e-2;
    let out = integrate_interior(alpha, &d, &config).unwrap();
    let worst = out
        .trajectory
        .values
        .iter()
        .map(|v| (v - alpha).abs())
        .fold(0.0f64, f64::max);
    // Forcing scales like alpha^p, so the deviation from a constant is tiny.
    assert!(worst < 1e-3 * alpha, "worst deviation {worst}");
}

#[test]
fn interior_rejects_bad_input() {
    let d = axes(3.0, 0.0, 6.0);
    let config = IntegratorConfig::default();
    assert!(integrate_interior(0.0, &d, &config).is_err());
    assert!(integrate_interior(-1.0, &d, &config).is_err());
    let d2 = axes(2.0, 0.0, 3.0);
    assert!(integrate_interior(1.0, &d2, &config).is_err());
}

#[test]
fn interior_budget_exhaustion_reported_as_outcome() {
    let d = axes(3.0, 0.0, 6.0);
    let config = IntegratorConfig { max_steps: 50, ..test_config(1e-3, 1e4) };
    let out = integrate_interior(1.0, &d, &config).unwrap();
    assert_eq!(out.kind, ShootKind::StepBudgetExhausted);
}

// ---- exterior shooting -----------------------------------------------------

#[test]
fn exterior_crossing_matches_reference() {
    let d = axes(3.0, 0.0, 4.0);
    let config = test_config(1e-3, 1e6);
    let out = integrate_exterior(1.0, &d, &config).unwrap();
    let radius = match out.kind {
        ShootKind::CrossedZero { radius } => radius,
        other => panic!("expected a crossing, got {other:?}"),
    };
    let rhs = flux_rhs(3.0, 0.0, 4.0);
    let t_zero = rk4_first_zero(&rhs, 0.0, [0.0, 1.0], 1e-3, 30.0).expect("reference crossing");
    let r_ref = t_zero.exp();
    assert!((radius - r_ref).abs() <= 1e-6 * r_ref, "{radius} vs {r_ref}");
}

#[test]
fn exterior_zero_slope_is_trivial() {
    let d = axes(3.0, 0.0, 4.0);
    let out = integrate_exterior(0.0, &d, &IntegratorConfig::default()).unwrap();
    assert_eq!(out.kind, ShootKind::CrossedZero { radius: 1.0 });
}

#[test]
fn exterior_respects_flux_bound() {
    // u(r) <= beta (1 - r^(2-N'))/(N'-2) follows from flux monotonicity.
    for &(np, tau, p, beta) in &[(3.5, 0.5, 3.0, 0.5), (3.0, 0.0, 2.0, 2.0), (4.0, 1.0, 6.0, 1.0)]
    {
        let d = axes(np, tau, p);
        let config = test_config(2e-3, 1e4);
        let out = integrate_exterior(beta, &d, &config).unwrap();
        for (r, u) in out.trajectory.grid.iter().zip(&out.trajectory.values) {
            let bound = beta * (1.0 - r.powf(2.0 - np)) / (np - 2.0) + config.zero_tol;
            assert!(*u <= bound + 1e-12, "u({r}) = {u} exceeds {bound}");
        }
    }
}

#[test]
fn exterior_flux_is_monotone_on_recorded_grid() {
    let d = axes(3.0, 0.0, 4.0);
    let out = integrate_exterior(1.0, &d, &test_config(1e-3, 1e4)).unwrap();
    let t = &out.trajectory;
    let mut prev = f64::INFINITY;
    for i in 0..t.len() {
        if t.values[i] > 0.0 {
            let flux = t.grid[i].powf(d.n_prime - 1.0) * t.derivs[i];
            assert!(flux <= prev + 1e-10, "flux rose at r = {}", t.grid[i]);
            prev = flux;
        }
    }
}

#[test]
fn exterior_sublinear_truncates_at_zero_tol() {
    let d = axes(3.0, 0.0, 0.5);
    let config = test_config(2e-3, 1e6);
    let out = integrate_exterior(0.3, &d, &config).unwrap();
    match out.kind {
        ShootKind::CrossedZero { radius } => assert!(radius > 1.0),
        other => panic!("sublinear trajectory must terminate, got {other:?}"),
    }
    let last = *out.trajectory.values.last().unwrap();
    assert!(last.abs() <= 10.0 * config.zero_tol, "terminal value {last}");
}

#[test]
fn exterior_tolerance_halving_barely_moves_the_zero() {
    let d = axes(3.0, 0.0, 4.0);
    let base = test_config(1e-3, 1e6);
    let tight = IntegratorConfig { rtol: base.rtol / 2.0, atol: base.atol / 2.0, ..base };
    let r1 = match integrate_exterior(1.0, &d, &base).unwrap().kind {
        ShootKind::CrossedZero { radius } => radius,
        _ => unreachable!(),
    };
    let r2 = match integrate_exterior(1.0, &d, &tight).unwrap().kind {
        ShootKind::CrossedZero { radius } => radius,
        _ => unreachable!(),
    };
    assert!((r1 - r2).abs() <= 1e-7 * r1, "zeros {r1} vs {r2}");
}

// ---- phase-plane form ------------------------------------------------------

#[test]
fn ef_critical_energy_is_conserved() {
    let d = axes(3.0, 0.0, 5.0); // p_* = 0
    let config = test_config(5e-4, 1e6);
    let traj = integrate_emden_fowler(1.0, &d, &config).unwrap();
    assert_eq!(traj.p_star, 0.0);
    let energy = traj.energy.as_ref().expect("critical case records energy");
    let e0 = 0.5;
    for (t, e) in traj.t_grid.iter().zip(energy) {
        assert!((e - e0).abs() <= 1e-8 * e0, "energy {e} at t = {t}");
    }
    // Positive energy forces a return to zero at bounded t.
    assert!(traj.first_zero_t.is_some());
}

#[test]
fn ef_first_zero_matches_radial_crossing() {
    let d = axes(3.0, 0.0, 4.0);
    let config = test_config(5e-4, 1e6);
    let traj = integrate_emden_fowler(1.0, &d, &config).unwrap();
    let t1 = traj.first_zero_t.expect("subcritical trajectory returns to zero");
    let out = integrate_exterior(1.0, &d, &config).unwrap();
    let radius = match out.kind {
        ShootKind::CrossedZero { radius } => radius,
        other => panic!("{other:?}"),
    };
    assert!((t1.exp() - radius).abs() <= 1e-6 * radius, "{} vs {radius}", t1.exp());
}

#[test]
fn ef_zero_slope_is_trivial() {
    let d = axes(3.0, 0.0, 5.0);
    let traj = integrate_emden_fowler(0.0, &d, &IntegratorConfig::default()).unwrap();
    assert_eq!(traj.v, vec![0.0]);
    assert_eq!(traj.first_zero_t, Some(0.0));
}

#[test]
fn ef_rejects_sublinear_powers() {
    let d = axes(3.0, 0.0, 0.5);
    assert!(integrate_emden_fowler(1.0, &d, &IntegratorConfig::default()).is_err());
}

// ---- residual and decay diagnostics ----------------------------------------

#[test]
fn residual_of_exact_power_law_solution() {
    // C r^(-m) solves the exterior equation on the punctured space.
    let d = axes(3.0, 0.0, 6.0);
    let c = crate::params::singular_constant(&d).unwrap();
    let m = d.m.unwrap();
    let grid = log_grid(0.5, 5.0, 120_000);
    let profile = RadialProfile::from_fn(grid, Side::Exterior, d, |r| {
        (c * r.powf(-m), -m * c * r.powf(-m - 1.0))
    })
    .unwrap();
    let res = residual(&profile).unwrap();
    assert!(res < 1e-8, "residual {res}");
}

#[test]
fn residual_of_zero_profile_is_zero() {
    let d = axes(3.0, 0.0, 6.0);
    let grid = log_grid(1.0, 10.0, 64);
    let profile = RadialProfile::from_fn(grid, Side::Exterior, d, |_| (0.0, 0.0)).unwrap();
    assert_eq!(residual(&profile).unwrap(), 0.0);
}

#[test]
fn residual_needs_enough_points() {
    let d = axes(3.0, 0.0, 6.0);
    let grid = log_grid(1.0, 2.0, 4);
    let profile = RadialProfile::from_fn(grid, Side::Exterior, d, |_| (1.0, 0.0)).unwrap();
    assert!(residual(&profile).is_err());
}

#[test]
fn decay_slope_on_power_laws() {
    let d = axes(3.0, 0.0, 6.0);
    let grid = log_grid(1.0, 1e4, 4000);
    let inv = RadialProfile::from_fn(grid.clone(), Side::Exterior, d, |r| {
        (1.0 / r, -1.0 / (r * r))
    })
    .unwrap();
    assert!((decay_slope(&inv).unwrap() + 1.0).abs() < 1e-10);

    let flat = RadialProfile::from_fn(grid.clone(), Side::Exterior, d, |_| (2.0, 0.0)).unwrap();
    assert!(decay_slope(&flat).unwrap().abs() < 1e-12);

    let negative =
        RadialProfile::from_fn(grid, Side::Exterior, d, |r| (1.0 - r / 1e4, -1.0 / 1e4)).unwrap();
    assert!(decay_slope(&negative).is_err());
}

// ---- profile plumbing -------------------------------------------------------

#[test]
fn profile_hermite_interpolation_is_accurate() {
    let d = axes(3.0, 0.0, 4.0);
    let grid = log_grid(1.0, 100.0, 2000);
    let profile = RadialProfile::from_fn(grid, Side::Exterior, d, |r| {
        ((1.0 + r).recip(), -(1.0 + r).powi(-2))
    })
    .unwrap();
    for &r in &[1.0, 1.37, 9.4, 42.0, 99.9] {
        let v = profile.value_at(r).unwrap();
        let dv = profile.deriv_at(r).unwrap();
        assert!((v - (1.0 + r).recip()).abs() < 1e-10);
        assert!((dv + (1.0 + r).powi(-2)).abs() < 1e-8);
    }
    assert!(profile.value_at(0.5).is_err());
    assert!(profile.value_at(101.0).is_err());
}

#[test]
fn profile_constructor_validates() {
    let d = axes(3.0, 0.0, 4.0);
    assert!(RadialProfile::new(vec![], vec![], vec![], Side::Exterior, d).is_err());
    assert!(RadialProfile::new(vec![1.0, 1.0], vec![0.0; 2], vec![0.0; 2], Side::Exterior, d)
        .is_err());
    assert!(RadialProfile::new(vec![-1.0, 1.0], vec![0.0; 2], vec![0.0; 2], Side::Exterior, d)
        .is_err());
    assert!(RadialProfile::new(vec![1.0, 2.0], vec![0.0, f64::NAN], vec![0.0; 2], Side::Exterior, d)
        .is_err());
}
