use super::*;
use crate::ode::log_grid;
use crate::params::{classify, ProblemParams, Regime};

fn axes(n_prime: f64, tau: f64, p: f64) -> DerivedParams {
    DerivedParams::from_axes(n_prime, tau, p).unwrap()
}

#[test]
fn power_closed_form_examples() {
    let d = axes(3.0, 0.0, 4.0); // gamma = 4
    assert_eq!(d.gamma, Some(4.0));

    let v = criterion_power(3.0, &d, 1.0).unwrap();
    assert_eq!(v.convergence, Convergence::Diverges);
    assert!(v.estimate.is_none());

    let v = criterion_power(4.0, &d, 1.0).unwrap();
    assert_eq!(v.convergence, Convergence::Converges);
    assert_eq!(v.estimate, Some(1.0));

    // Exactly the logarithmic endpoint.
    let v = criterion_power(3.0 + 0.0, &d, 0.7).unwrap();
    assert_eq!(v.convergence, Convergence::Diverges);

    // tau <= -2 and N' = 2 are outside this criterion.
    assert!(criterion_power(3.0, &axes(3.0, -2.5, 2.0), 1.0).is_err());
    assert!(criterion_power(3.0, &axes(2.0, 0.0, 2.0), 1.0).is_err());
}

#[test]
fn quadrature_agrees_with_closed_form_for_powers() {
    let d = axes(3.0, 0.0, 4.0); // gamma = 4
    for p in [3.1, 3.5, 5.0] {
        let exact = criterion_power(p, &d, 1.0).unwrap();
        let num = criterion_quadrature(&Nonlinearity::Power(p), &d, 1.0, None).unwrap();
        assert_eq!(num.convergence, Convergence::Converges);
        assert_eq!(num.method, CriterionMethod::Quadrature, "fallback engaged at p = {p}");
        let (a, b) = (num.estimate.unwrap(), exact.estimate.unwrap());
        assert!((a - b).abs() <= 1e-6 * b, "p = {p}: {a} vs {b}");
    }
}

#[test]
fn quadrature_flags_divergence() {
    let d = axes(3.0, 0.0, 4.0);
    // Logarithmic divergence: increments are exactly constant.
    let v = criterion_quadrature(&Nonlinearity::Power(3.0), &d, 1.0, None).unwrap();
    assert_eq!(v.convergence, Convergence::Diverges);
    assert_eq!(v.method, CriterionMethod::Quadrature);
    // Power divergence: increments grow geometrically.
    let v = criterion_quadrature(&Nonlinearity::Power(2.5), &d, 1.0, None).unwrap();
    assert_eq!(v.convergence, Convergence::Diverges);
    assert_eq!(v.method, CriterionMethod::Quadrature);
}

#[test]
fn quadrature_classifies_log_corrected_borderline() {
    // f(t) = t^(gamma-1) (-ln t)^(-2) converges with value 1/ln 2 at
    // delta = 1/2 (substitute s = -ln t).
    let d = axes(3.0, 0.0, 4.0);
    let f = |t: f64| t.powi(3) * (-t.ln()).powi(-2);
    let v = criterion_quadrature(&Nonlinearity::Callable(&f), &d, 0.5, None).unwrap();
    assert_eq!(v.convergence, Convergence::Converges);
    let exact = 1.0 / std::f64::consts::LN_2;
    let est = v.estimate.unwrap();
    assert!((est - exact).abs() <= 1e-4 * exact, "estimate {est} vs {exact}");
    assert!(!v.table.is_empty());
}

#[test]
fn quadrature_reports_evaluation_failures() {
    let d = axes(3.0, 0.0, 4.0);
    let f = |t: f64| if t < 1e-4 { f64::NAN } else { t * t * t * t };
    match criterion_quadrature(&Nonlinearity::Callable(&f), &d, 1.0, None) {
        Err(Error::EvalFailure(t)) => assert!(t < 1e-4),
        other => panic!("expected evaluation failure, got {other:?}"),
    }
}

#[test]
fn quadrature_respects_custom_cutoffs() {
    let d = axes(3.0, 0.0, 4.0);
    let cutoffs: Vec<f64> = (1..=30).map(|k| 3.0f64.powi(-k)).collect();
    let v = criterion_quadrature(&Nonlinearity::Power(4.0), &d, 1.0, Some(&cutoffs)).unwrap();
    assert_eq!(v.convergence, Convergence::Converges);
    assert!((v.estimate.unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v.table.len(), 30);

    let bad = [0.5, 0.6];
    assert!(criterion_quadrature(&Nonlinearity::Power(4.0), &d, 1.0, Some(&bad)).is_err());
}

#[test]
fn divergence_implies_nonexistence_classification() {
    // The criterion covers p <= (N' + tau)/(N' - 2), a subset of p <= p_s;
    // divergence must therefore coincide with the nonexistence verdict.
    for &(np, tau) in &[(3.0, 0.0), (4.0, 1.0), (5.0, -1.0)] {
        let mut p = 0.3;
        while p < 9.0 {
            let d = axes(np, tau, p);
            let v = criterion_power(p, &d, 1.0).unwrap();
            if v.convergence == Convergence::Diverges {
                let c = classify(&ProblemParams::from_axes(np, tau, p).unwrap()).unwrap();
                assert_eq!(c.regime, Regime::NoPositiveSolution, "N'={np} tau={tau} p={p}");
            }
            p += 0.17;
        }
    }
}

#[test]
fn gamma_exceeds_two_in_criterion_regime() {
    for &(np, tau) in &[(2.1, -1.9), (3.0, 0.0), (6.0, 4.0), (2.5, -1.0)] {
        let d = axes(np, tau, 2.0);
        assert!(d.gamma.unwrap() > 2.0, "gamma = {:?}", d.gamma);
    }
}

#[test]
fn planar_criterion_examples() {
    // Powers never admit an exponential weight.
    let v = criterion_planar(&Nonlinearity::Power(2.0), &[0.5, 1.0], 1.0).unwrap();
    assert_eq!(v.convergence, Convergence::Diverges);
    assert!(v.admissible_a.is_none());

    // f = e^(-2t): a = 1 works.
    let f = |t: f64| (-2.0 * t).exp();
    let v = criterion_planar(&Nonlinearity::Callable(&f), &[1.0], 1.0).unwrap();
    assert_eq!(v.convergence, Convergence::Converges);
    assert_eq!(v.admissible_a, Some(1.0));
    // int_1^inf e^(-t) dt = 1/e.
    let exact = (-1.0f64).exp();
    assert!((v.estimate.unwrap() - exact).abs() < 1e-8 * exact);

    // f = e^(-t): a = 1/2 works.
    let g = |t: f64| (-t).exp();
    let v = criterion_planar(&Nonlinearity::Callable(&g), &[0.5], 1.0).unwrap();
    assert_eq!(v.convergence, Convergence::Converges);
    assert_eq!(v.admissible_a, Some(0.5));

    // f = 1/t decays too slowly for every a > 0.
    let h = |t: f64| 1.0 / t;
    let v = criterion_planar(&Nonlinearity::Callable(&h), &[0.25, 1.0, 4.0], 1.0).unwrap();
    assert_eq!(v.convergence, Convergence::Diverges);

    assert!(criterion_planar(&Nonlinearity::Power(2.0), &[], 1.0).is_err());
    assert!(criterion_planar(&Nonlinearity::Power(2.0), &[-1.0], 1.0).is_err());
}

#[test]
fn w_transform_constant_profile_identity() {
    // Constant u has no curvature: the normalized residual is exactly the
    // sourced term over itself.
    let d = axes(3.0, 0.0, 4.0);
    let grid = log_grid(1.0, 100.0, 200);
    let profile =
        crate::ode::RadialProfile::from_fn(grid, Side::Exterior, d, |_| (2.0, 0.0)).unwrap();
    let w = w_transform(&profile).unwrap();
    assert_eq!(w.gamma, 4.0);
    assert!((w.a - 1.0).abs() < 1e-15);
    assert_eq!(w.residual(), 1.0);
    // s-grid is increasing and w inherits the values.
    assert!(w.s_grid.windows(2).all(|p| p[1] > p[0]));
    assert!(w.w.iter().all(|&x| x == 2.0));
}

#[test]
fn w_transform_fast_decay_is_linear_in_s() {
    // u = r^(2-N') becomes w(s) = s: no curvature, slope one.
    let np = 4.0;
    let d = axes(np, 0.5, 4.0);
    let grid = log_grid(1.0, 50.0, 300);
    let profile = crate::ode::RadialProfile::from_fn(grid, Side::Exterior, d, |r| {
        (r.powf(2.0 - np), (2.0 - np) * r.powf(1.0 - np))
    })
    .unwrap();
    let w = w_transform(&profile).unwrap();
    for (s, val) in w.s_grid.iter().zip(&w.w) {
        assert!((val - s).abs() <= 1e-13);
    }
    for dw in &w.w_deriv {
        assert!((dw - 1.0).abs() <= 1e-12);
    }
}
