//! Parameter calculus for the weighted exterior problem
//!
//!   -div(|x|^theta grad u) = |x|^ell u^p   outside the unit ball,  u = 0 on the boundary.
//!
//! All radial computations are driven by two reduced quantities: the
//! effective dimension `N' = N + theta` and the weight gap `tau = ell - theta`.
//! This module computes the derived exponent family (critical exponent,
//! inversion duals, criterion exponent, decay rates), classifies the
//! existence regime over `{N' >= 2, p > 0}`, produces the exact power-law
//! solution when it exists, and analyses the characteristic roots that decide
//! the borderline linear case.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for comparisons against regime boundaries (p vs p_s, tau vs -2,
/// N' vs 2 and 4). Boundary hits resolve to the inclusive side of the
/// corresponding existence statement.
pub const CLASSIFY_EPS: f64 = 1e-12;

/// Raw problem data: dimension, the two weight exponents and the power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Ambient integer dimension N >= 1.
    pub n_dim: u32,
    /// Exponent of the diffusion weight |x|^theta.
    pub theta: f64,
    /// Exponent of the source weight |x|^ell.
    pub ell: f64,
    /// Nonlinearity power p > 0.
    pub p: f64,
}

impl ProblemParams {
    pub fn new(n_dim: u32, theta: f64, ell: f64, p: f64) -> Result<Self> {
        if n_dim == 0 {
            return Err(Error::InvalidParameter("dimension N must be >= 1".into()));
        }
        if !(theta.is_finite() && ell.is_finite() && p.is_finite()) {
            return Err(Error::InvalidParameter("theta, ell, p must be finite".into()));
        }
        if p <= 0.0 {
            return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
        }
        Ok(Self { n_dim, theta, ell, p })
    }

    /// Builds params from the reduced axes (N', tau, p). The split into
    /// (N, theta) is cosmetic: every radial quantity depends on N' only.
    pub fn from_axes(n_prime: f64, tau: f64, p: f64) -> Result<Self> {
        if !n_prime.is_finite() || n_prime < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "effective dimension N' must be finite and >= 1, got {n_prime}"
            )));
        }
        let n_dim = (n_prime.round().max(1.0)) as u32;
        let theta = n_prime - n_dim as f64;
        Self::new(n_dim, theta, tau + theta, p)
    }

    /// Effective dimension N' = N + theta.
    pub fn n_prime(&self) -> f64 {
        self.n_dim as f64 + self.theta
    }

    /// Weight gap tau = ell - theta.
    pub fn tau(&self) -> f64 {
        self.ell - self.theta
    }
}

/// The full derived exponent family.
///
/// Fields that require division by N' - 2 are absent when N' = 2, and `m`
/// is absent when p = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub n_dim: u32,
    pub theta: f64,
    pub ell: f64,
    pub p: f64,
    /// N' = N + theta.
    pub n_prime: f64,
    /// tau = ell - theta.
    pub tau: f64,
    /// Critical exponent p_s = (N' + 2 + 2 tau) / (N' - 2).
    pub p_s: Option<f64>,
    /// sigma = (N' - 2)(p - 1) - (4 + tau - theta), the source exponent of
    /// the inverted (punctured-ball) problem.
    pub sigma: f64,
    /// tau' = sigma - theta, the weight gap of the inverted problem.
    pub tau_prime: f64,
    /// Dual critical exponent p_s' = (N' + 2 + 2 tau') / (N' - 2).
    pub p_s_prime: Option<f64>,
    /// Criterion exponent gamma = (2(N' - 1) + tau) / (N' - 2).
    pub gamma: Option<f64>,
    /// p_* = ((N' + 2 + 2 tau) - (N' - 2) p) / 2; nonnegative exactly when
    /// p <= p_s.
    pub p_star: f64,
    /// Power-law decay rate m = (2 + tau) / (p - 1); absent for p = 1.
    pub m: Option<f64>,
    /// Whether p lies strictly above the critical exponent. Only recorded
    /// when p > 1 and N' > 2; by inversion duality this is equivalent to
    /// p < p_s'.
    pub supercritical: Option<bool>,
}

impl DerivedParams {
    pub fn from_axes(n_prime: f64, tau: f64, p: f64) -> Result<Self> {
        derive(&ProblemParams::from_axes(n_prime, tau, p)?)
    }

    /// Interior decay rate m' = (2 + tau') / (p - 1) of the inverted problem.
    pub fn m_prime(&self) -> Option<f64> {
        if (self.p - 1.0).abs() <= CLASSIFY_EPS {
            None
        } else {
            Some((2.0 + self.tau_prime) / (self.p - 1.0))
        }
    }
}

/// Computes every derived exponent from the raw parameters.
///
/// When p falls within [`CLASSIFY_EPS`] of the critical exponent the dual
/// quantities are snapped to their exact self-dual values (tau' = tau,
/// p_s' = p_s, p_* = 0) so that criticality is preserved bit-for-bit.
pub fn derive(params: &ProblemParams) -> Result<DerivedParams> {
    let p = params.p;
    if p <= 0.0 {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    let n_prime = params.n_prime();
    let tau = params.tau();
    if n_prime < 2.0 - CLASSIFY_EPS {
        return Err(Error::InvalidParameter(format!(
            "effective dimension N' = {n_prime} is below 2; no theory applies"
        )));
    }
    let denom_ok = n_prime > 2.0 + CLASSIFY_EPS;

    let mut sigma = (n_prime - 2.0) * (p - 1.0) - (4.0 + tau - params.theta);
    let mut tau_prime = sigma - params.theta;
    let p_s = denom_ok.then(|| (n_prime + 2.0 + 2.0 * tau) / (n_prime - 2.0));
    let mut p_star = ((n_prime + 2.0 + 2.0 * tau) - (n_prime - 2.0) * p) / 2.0;

    // Snap the critical case: the inversion is then an exact reflection.
    if let Some(ps) = p_s {
        if (p - ps).abs() <= CLASSIFY_EPS * ps.abs().max(1.0) {
            tau_prime = tau;
            sigma = tau + params.theta;
            p_star = 0.0;
        }
    }

    let p_s_prime = denom_ok.then(|| (n_prime + 2.0 + 2.0 * tau_prime) / (n_prime - 2.0));
    let gamma = denom_ok.then(|| (2.0 * (n_prime - 1.0) + tau) / (n_prime - 2.0));
    let m = ((p - 1.0).abs() > CLASSIFY_EPS).then(|| (2.0 + tau) / (p - 1.0));
    let supercritical = match p_s {
        Some(ps) if p > 1.0 + CLASSIFY_EPS => {
            Some(p > ps + CLASSIFY_EPS * ps.abs().max(1.0))
        }
        _ => None,
    };

    Ok(DerivedParams {
        n_dim: params.n_dim,
        theta: params.theta,
        ell: params.ell,
        p,
        n_prime,
        tau,
        p_s,
        sigma,
        tau_prime,
        p_s_prime,
        gamma,
        p_star,
        m,
        supercritical,
    })
}

/// Existence verdict for positive solutions of the exterior problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Only the trivial nonnegative solution exists.
    NoPositiveSolution,
    /// A unique positive radial solution exists (tau > -2, p > p_s).
    ExistsUniqueRadial,
    /// Positive solutions exist.
    ExistsPositive,
    /// Existence is equivalent to a principal-eigenvalue condition
    /// (tau < -2, p = 1); see the spectral module.
    ConditionalEigenvalue,
}

/// Which branch of the existence theory produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    /// N' = 2: no power nonlinearity admits a positive solution.
    PlanarEffectiveDimension,
    /// tau > -2, p <= p_s.
    CriticalOrSubcritical,
    /// tau > -2, p > p_s.
    Supercritical,
    /// tau < -2, p != 1.
    StrongSingularWeight,
    /// tau < -2, p = 1: verdict depends on the principal eigenvalue.
    EigenvalueCondition,
    /// tau = -2, p > 1.
    BorderlineSuperlinear,
    /// tau = -2, p = 1, N' >= 4.
    BorderlineLinearHighDimension,
    /// tau = -2, p = 1, N' < 4.
    BorderlineLinearLowDimension,
    /// tau = -2, p < 1.
    BorderlineSublinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    pub reason: Reason,
}

/// Total classification over {N' >= 2, p > 0}, with the single documented
/// exception N' = 2, tau <= -2 where no verdict is available.
pub fn classify(params: &ProblemParams) -> Result<Classification> {
    let d = derive(params)?;
    let (n_prime, tau, p) = (d.n_prime, d.tau, d.p);
    let eps = CLASSIFY_EPS;

    let verdict = |regime, reason| Ok(Classification { regime, reason });

    if (n_prime - 2.0).abs() <= eps {
        return if tau > -2.0 + eps {
            verdict(Regime::NoPositiveSolution, Reason::PlanarEffectiveDimension)
        } else {
            Err(Error::InvalidParameter(format!(
                "no classification available for N' = 2 with tau = {tau} <= -2"
            )))
        };
    }

    if (tau + 2.0).abs() <= eps {
        // Borderline weight gap.
        return if p > 1.0 + eps {
            verdict(Regime::ExistsPositive, Reason::BorderlineSuperlinear)
        } else if (p - 1.0).abs() <= eps {
            if n_prime >= 4.0 - eps {
                verdict(Regime::ExistsPositive, Reason::BorderlineLinearHighDimension)
            } else {
                verdict(Regime::NoPositiveSolution, Reason::BorderlineLinearLowDimension)
            }
        } else {
            verdict(Regime::NoPositiveSolution, Reason::BorderlineSublinear)
        };
    }

    if tau > -2.0 {
        let p_s = d.p_s.expect("N' > 2 here");
        if p > p_s + eps * p_s.abs().max(1.0) {
            verdict(Regime::ExistsUniqueRadial, Reason::Supercritical)
        } else {
            verdict(Regime::NoPositiveSolution, Reason::CriticalOrSubcritical)
        }
    } else {
        // tau < -2
        if (p - 1.0).abs() <= eps {
            verdict(Regime::ConditionalEigenvalue, Reason::EigenvalueCondition)
        } else {
            verdict(Regime::ExistsPositive, Reason::StrongSingularWeight)
        }
    }
}

/// Amplitude of the exact power-law solution `C r^(-m)`, `m = (2+tau)/(p-1)`,
/// which solves the equation on the punctured space whenever `0 < m < N'-2`
/// (equivalently p > (N' + tau)/(N' - 2)). Returns `None` otherwise.
///
/// Plugging `C r^(-m)` into the radial divergence form gives
/// `C^(p-1) = m (N' - 2 - m)`, which must be positive.
pub fn singular_constant(derived: &DerivedParams) -> Option<f64> {
    if derived.p <= 1.0 + CLASSIFY_EPS || derived.n_prime <= 2.0 + CLASSIFY_EPS {
        return None;
    }
    let m = derived.m?;
    let c_pow = m * (derived.n_prime - 2.0 - m);
    if m <= 0.0 || c_pow <= 0.0 {
        return None;
    }
    Some(c_pow.powf(1.0 / (derived.p - 1.0)))
}

/// Roots of `lambda^2 + (N'-2) lambda + 1 = 0` and whether both are real and
/// negative, which happens exactly when N' >= 4. This decides existence for
/// the borderline linear case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicRoots {
    pub roots: [Complex64; 2],
    /// True iff both roots are real and negative, i.e. N' >= 4.
    pub exists: bool,
}

pub fn characteristic_roots(n_prime: f64) -> Result<CharacteristicRoots> {
    if !(n_prime > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "characteristic roots need N' > 2, got {n_prime}"
        )));
    }
    let b = n_prime - 2.0;
    let disc = b * b - 4.0;
    let roots = if disc >= 0.0 {
        let sq = disc.sqrt();
        // Evaluate the well-conditioned root first, recover the other from
        // the product lambda1 * lambda2 = 1.
        let r1 = (-b - sq) / 2.0;
        let r2 = 1.0 / r1;
        [Complex64::new(r2, 0.0), Complex64::new(r1, 0.0)]
    } else {
        let sq = (-disc).sqrt() / 2.0;
        [Complex64::new(-b / 2.0, sq), Complex64::new(-b / 2.0, -sq)]
    };
    let exists = disc >= 0.0 && roots[0].re < 0.0 && roots[1].re < 0.0;
    Ok(CharacteristicRoots { roots, exists })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes(n_prime: f64, tau: f64, p: f64) -> DerivedParams {
        DerivedParams::from_axes(n_prime, tau, p).unwrap()
    }

    #[test]
    fn derive_supercritical_reference_point() {
        let d = derive(&ProblemParams::new(3, 0.0, 0.0, 6.0).unwrap()).unwrap();
        assert_eq!(d.n_prime, 3.0);
        assert_eq!(d.tau, 0.0);
        assert_eq!(d.p_s, Some(5.0));
        assert_eq!(d.sigma, 1.0);
        assert_eq!(d.tau_prime, 1.0);
        assert_eq!(d.p_s_prime, Some(7.0));
        assert_eq!(d.gamma, Some(4.0));
        assert_eq!(d.p_star, -0.5);
        assert_eq!(d.m, Some(0.4));
        assert_eq!(d.supercritical, Some(true));
    }

    #[test]
    fn derive_critical_point_is_self_dual() {
        let d = derive(&ProblemParams::new(3, 0.0, 0.0, 5.0).unwrap()).unwrap();
        assert_eq!(d.p_star, 0.0);
        assert_eq!(d.sigma, 0.0);
        assert_eq!(d.tau_prime, 0.0);
        assert_eq!(d.p_s_prime, Some(5.0));
        assert_eq!(d.supercritical, Some(false));
    }

    #[test]
    fn derive_borderline_weight_gap() {
        let d = derive(&ProblemParams::new(5, -1.0, -3.0, 2.0).unwrap()).unwrap();
        assert_eq!(d.n_prime, 4.0);
        assert_eq!(d.tau, -2.0);
        assert_eq!(d.p_s, Some(1.0));
        assert_eq!(d.gamma, Some(2.0));
    }

    #[test]
    fn derive_rejects_bad_inputs() {
        assert!(ProblemParams::new(3, 0.0, 0.0, -1.0).is_err());
        assert!(ProblemParams::new(0, 0.0, 0.0, 2.0).is_err());
        // N' < 2 rejected, N' = 2 accepted with absent ratio fields.
        assert!(DerivedParams::from_axes(1.5, 0.0, 2.0).is_err());
        let d = axes(2.0, 0.0, 2.0);
        assert!(d.p_s.is_none() && d.p_s_prime.is_none() && d.gamma.is_none());
        assert!(d.m.is_some());
    }

    #[test]
    fn derive_drops_m_at_linear_power() {
        let d = axes(3.0, 0.0, 1.0);
        assert!(d.m.is_none());
        assert!(d.m_prime().is_none());
        assert!(d.supercritical.is_none());
    }

    #[test]
    fn classify_decision_table_pins() {
        let class = |np, tau, p| classify(&ProblemParams::from_axes(np, tau, p).unwrap()).unwrap();
        assert_eq!(class(3.0, 0.0, 6.0).regime, Regime::ExistsUniqueRadial);
        assert_eq!(class(3.0, 0.0, 5.0).regime, Regime::NoPositiveSolution);
        assert_eq!(class(5.0, -3.0, 0.5).regime, Regime::ExistsPositive);
        assert_eq!(class(5.0, -3.0, 1.0).regime, Regime::ConditionalEigenvalue);
        assert_eq!(class(4.0, -2.0, 1.0).regime, Regime::ExistsPositive);
        assert_eq!(class(3.0, -2.0, 1.0).regime, Regime::NoPositiveSolution);
        assert_eq!(class(3.0, -2.0, 0.5).regime, Regime::NoPositiveSolution);
        assert_eq!(class(3.0, -2.0, 2.0).regime, Regime::ExistsPositive);
        // N' = 2 only classifies tau > -2.
        assert_eq!(class(2.0, 0.0, 3.0).regime, Regime::NoPositiveSolution);
        assert!(classify(&ProblemParams::from_axes(2.0, -3.0, 2.0).unwrap()).is_err());
        // p = 1 with tau > -2 is subcritical since p_s > 1 there.
        assert_eq!(class(3.0, 0.0, 1.0).regime, Regime::NoPositiveSolution);
    }

    #[test]
    fn classify_matches_p_star_sign() {
        // p <= p_s iff p_* >= 0, and classification follows the same split.
        let mut n_prime = 2.1;
        while n_prime < 8.0 {
            let mut p = 0.25;
            while p < 12.0 {
                let d = axes(n_prime, 0.5, p);
                let c = classify(&ProblemParams::from_axes(n_prime, 0.5, p).unwrap()).unwrap();
                let nonexistence = c.regime == Regime::NoPositiveSolution;
                assert_eq!(nonexistence, d.p_star >= 0.0, "N'={n_prime} p={p}");
                p += 0.37;
            }
            n_prime += 0.23;
        }
    }

    #[test]
    fn singular_constant_examples() {
        // m = 1, C = 1: u = 1/r solves the unweighted case N' = 4, p = 3.
        let c = singular_constant(&axes(4.0, 0.0, 3.0)).unwrap();
        assert_eq!(c, 1.0);

        let d = axes(3.0, 0.0, 6.0);
        let c = singular_constant(&d).unwrap();
        assert!((c - 0.24f64.powf(0.2)).abs() < 1e-15);
        assert!((c - 0.7516960157530126).abs() < 1e-12);
        // Analytic identities hold to machine precision.
        let m = d.m.unwrap();
        assert!((m * (d.p - 1.0) - (2.0 + d.tau)).abs() < 1e-15);
        assert!((c.powf(d.p - 1.0) - m * (d.n_prime - 2.0 - m)).abs() < 1e-15);

        // m = 2 >= N' - 2 = 1: no positive amplitude.
        assert!(singular_constant(&axes(3.0, 0.0, 2.0)).is_none());
        // Sublinear powers are excluded.
        assert!(singular_constant(&axes(4.0, 0.0, 0.5)).is_none());
    }

    #[test]
    fn characteristic_roots_examples() {
        let r = characteristic_roots(4.0).unwrap();
        assert!(r.exists);
        assert_eq!(r.roots[0], Complex64::new(-1.0, 0.0));
        assert_eq!(r.roots[1], Complex64::new(-1.0, 0.0));

        let r = characteristic_roots(3.0).unwrap();
        assert!(!r.exists);
        assert!((r.roots[0].re + 0.5).abs() < 1e-15);
        assert!((r.roots[0].im - 0.75f64.sqrt()).abs() < 1e-15);

        let r = characteristic_roots(6.0).unwrap();
        assert!(r.exists);
        let (a, b) = (r.roots[0].re, r.roots[1].re);
        assert!((a - (-2.0 + 3.0f64.sqrt())).abs() < 1e-14);
        assert!((b - (-2.0 - 3.0f64.sqrt())).abs() < 1e-14);
        assert!((a * b - 1.0).abs() < 1e-14);
        assert!((a + b + 4.0).abs() < 1e-14);

        assert!(characteristic_roots(2.0).is_err());
    }

    #[test]
    fn inversion_duality_randomized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..20_000 {
            let n_prime: f64 = rng.gen_range(2.05..9.0);
            let tau: f64 = rng.gen_range(-1.95..4.0);
            let p: f64 = rng.gen_range(1.01..14.0);
            // Skip samples within the snap band of the critical exponent.
            let p_s = (n_prime + 2.0 + 2.0 * tau) / (n_prime - 2.0);
            if (p - p_s).abs() < 1e-9 {
                continue;
            }
            let d = axes(n_prime, tau, p);
            // tau' > -2 exactly when p > (N' + tau)/(N' - 2).
            if p > (n_prime + tau) / (n_prime - 2.0) + 1e-9 {
                assert!(d.tau_prime > -2.0, "N'={n_prime} tau={tau} p={p}");
            }
            // Duality: p > p_s iff p < p_s'.
            let ps = d.p_s.unwrap();
            let psp = d.p_s_prime.unwrap();
            assert_eq!(p > ps, p < psp, "N'={n_prime} tau={tau} p={p}");
            assert_eq!(p > ps, d.supercritical.unwrap());
        }
    }

    #[test]
    fn critical_self_duality_randomized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xc1a5);
        for _ in 0..20_000 {
            let n_prime: f64 = rng.gen_range(2.05..9.0);
            let tau: f64 = rng.gen_range(-1.95..4.0);
            let p_s = (n_prime + 2.0 + 2.0 * tau) / (n_prime - 2.0);
            if p_s <= 0.0 {
                continue;
            }
            let d = axes(n_prime, tau, p_s);
            // Self-duality is a statement about the derived family itself:
            // the dual fields collapse onto the primal ones bit-for-bit.
            assert_eq!(d.tau_prime, d.tau);
            assert_eq!(d.p_s_prime, d.p_s);
            assert_eq!(d.p_star, 0.0);
            assert!((d.tau - tau).abs() < 1e-14);
        }
    }
}
