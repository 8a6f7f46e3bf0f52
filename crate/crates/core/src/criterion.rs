//! Integral existence criterion for general nonlinearities.
//!
//! For N' > 2 and tau > -2, a positive supersolution-type solution exists in
//! some exterior region if and only if `int_0^delta f(t) t^(-gamma) dt` is
//! finite, with `gamma = (2(N'-1) + tau)/(N'-2) > 2`. Powers are decided in
//! closed form; black-box nonlinearities are classified from a dyadic cutoff
//! sequence with tail extrapolation. For N' = 2 the criterion moves to
//! infinity: existence is equivalent to `e^(a t) f(t)` being integrable at
//! +infinity for some a > 0, which no power nonlinearity satisfies.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{pospow, RadialProfile, Side, RESIDUAL_QUALIFICATION};
use crate::params::{DerivedParams, CLASSIFY_EPS};
use crate::quad::adaptive_simpson;

/// Relative increment threshold below which the cutoff sequence is declared
/// Cauchy-convergent.
pub const TOL_CONV: f64 = 1e-8;

/// Nonlinearity input: an exact power or a positive continuous black box.
pub enum Nonlinearity<'a> {
    Power(f64),
    Callable(&'a dyn Fn(f64) -> f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convergence {
    Converges,
    Diverges,
    /// The cutoff data fit neither a convergent nor a divergent model; a
    /// black-box integral test cannot always be decisive.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionMethod {
    ClosedForm,
    Quadrature,
}

/// One row of the audit table: integral over `[cutoff, delta]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CutoffSample {
    pub cutoff: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionVerdict {
    pub convergence: Convergence,
    /// Value of the integral when convergent.
    pub estimate: Option<f64>,
    pub method: CriterionMethod,
    /// Upper limit of the criterion integral (lower horizon for N' = 2).
    pub delta: f64,
    /// Criterion exponent; absent for the N' = 2 variant.
    pub gamma: Option<f64>,
    /// Cutoff/value table for auditability.
    pub table: Vec<CutoffSample>,
    /// Exponential weight found admissible by the N' = 2 criterion.
    pub admissible_a: Option<f64>,
}

fn require_criterion_regime(derived: &DerivedParams) -> Result<f64> {
    if derived.tau <= -2.0 {
        return Err(Error::InvalidParameter("criterion needs tau > -2".into()));
    }
    derived
        .gamma
        .ok_or_else(|| Error::InvalidParameter("criterion exponent needs N' > 2".into()))
}

/// Closed-form criterion for `f(t) = t^p`: the integral converges exactly
/// when `p > gamma - 1 = (N' + tau)/(N' - 2)`, with value
/// `delta^(p-gamma+1)/(p-gamma+1)`. The endpoint `p = gamma - 1` is the
/// logarithmic borderline and diverges.
pub fn criterion_power(p: f64, derived: &DerivedParams, delta: f64) -> Result<CriterionVerdict> {
    let gamma = require_criterion_regime(derived)?;
    if !(p > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter("criterion_power needs p > 0 and delta > 0".into()));
    }
    let q = p - gamma + 1.0;
    let converges = q > CLASSIFY_EPS;
    Ok(CriterionVerdict {
        convergence: if converges { Convergence::Converges } else { Convergence::Diverges },
        estimate: converges.then(|| delta.powf(q) / q),
        method: CriterionMethod::ClosedForm,
        delta,
        gamma: Some(gamma),
        table: Vec::new(),
        admissible_a: None,
    })
}

/// Classification of a positive increment sequence over dyadic cutoffs.
struct IncrementFit {
    /// Last ratio d_{k+1}/d_k.
    rho_last: f64,
    /// Relative drift of the last ratios around their mean.
    drift: f64,
    /// Least-squares slope of ln d against ln k (polynomial decay order -s).
    poly_order: f64,
    poly_fit_r2: f64,
    /// Least-squares slope of ln d against k and its fit quality.
    geo_slope: f64,
    geo_fit_r2: f64,
    ln_d_spread: f64,
}

fn fit_increments(d: &[f64]) -> Option<IncrementFit> {
    let n = d.len();
    if n < 6 || d.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let tail = &d[n - 5..];
    let ratios: Vec<f64> = (n - 5..n - 1).map(|k| d[k + 1] / d[k]).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let drift =
        ratios.iter().map(|r| (r - mean).abs()).fold(0.0f64, f64::max) / mean.max(1e-300);

    let ln_d: Vec<f64> = tail.iter().map(|x| x.ln()).collect();
    let spread = ln_d.iter().cloned().fold(f64::MIN, f64::max)
        - ln_d.iter().cloned().fold(f64::MAX, f64::min);

    let regress = |xs: &[f64]| -> (f64, f64) {
        let m = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ln_d.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ln_d).map(|(x, y)| x * y).sum();
        let denom = m * sxx - sx * sx;
        let slope = (m * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / m;
        let ss_tot: f64 = ln_d.iter().map(|y| (y - sy / m) * (y - sy / m)).sum();
        let ss_res: f64 = xs
            .iter()
            .zip(&ln_d)
            .map(|(x, y)| {
                let e = y - (intercept + slope * x);
                e * e
            })
            .sum();
        let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        (slope, r2)
    };

    let ks: Vec<f64> = (n - 4..=n).map(|k| k as f64).collect();
    let ln_ks: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let (geo_slope, geo_fit_r2) = regress(&ks);
    let (poly_slope, poly_fit_r2) = regress(&ln_ks);

    Some(IncrementFit {
        rho_last: ratios[ratios.len() - 1],
        drift,
        poly_order: -poly_slope,
        poly_fit_r2,
        geo_slope,
        geo_fit_r2,
        ln_d_spread: spread,
    })
}

/// Polynomial extrapolation of `(x_i, y_i)` to x = 0.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut q = ys.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            q[i] += (q[i] - q[i - 1]) * (-xs[i]) / (xs[i] - xs[i - j]);
        }
    }
    q[n - 1]
}

/// Evaluates `int_eps^delta f(t) t^(-gamma) dt` over a decreasing cutoff
/// sequence and classifies the endpoint behavior:
///
/// * increments Cauchy-small -> convergent, estimate is the last partial sum;
/// * increments geometric (constant ratio < 1) -> convergent, with the exact
///   geometric tail added;
/// * increments polynomially decaying of order > 1 -> convergent, partial
///   sums extrapolated in 1/ln(delta/eps);
/// * increments constant or growing -> divergent;
/// * anything else -> inconclusive (for an exact power input the closed form
///   is substituted, so `Power` never returns inconclusive).
pub fn criterion_quadrature(
    f: &Nonlinearity<'_>,
    derived: &DerivedParams,
    delta: f64,
    inner_cutoffs: Option<&[f64]>,
) -> Result<CriterionVerdict> {
    let gamma = require_criterion_regime(derived)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let default_cutoffs: Vec<f64>;
    let cutoffs: &[f64] = match inner_cutoffs {
        Some(c) => c,
        None => {
            default_cutoffs = (1..=40).map(|k| delta * 2.0f64.powi(-k)).collect();
            &default_cutoffs
        }
    };
    if cutoffs.len() < 8 {
        return Err(Error::InvalidParameter("need at least 8 inner cutoffs".into()));
    }
    for w in cutoffs.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter("cutoffs must be strictly decreasing".into()));
        }
    }
    if !(cutoffs[0] < delta && cutoffs[cutoffs.len() - 1] > 0.0) {
        return Err(Error::InvalidParameter("cutoffs must lie in (0, delta)".into()));
    }

    let bad_t = Cell::new(None::<f64>);
    let eval = |t: f64| -> f64 {
        let v = match f {
            Nonlinearity::Power(p) => t.powf(*p),
            Nonlinearity::Callable(g) => g(t),
        };
        if !(v.is_finite() && v >= 0.0) {
            bad_t.set(Some(t));
            return 0.0;
        }
        v * t.powf(-gamma)
    };

    // Pieces between consecutive cutoffs, then cumulative partial sums.
    let mut increments = Vec::with_capacity(cutoffs.len());
    let mut table = Vec::with_capacity(cutoffs.len());
    let mut acc = 0.0;
    let mut hi = delta;
    for &lo in cutoffs {
        let piece = adaptive_simpson(&eval, lo, hi, 5e-13, 1e-305);
        if let Some(t) = bad_t.get() {
            return Err(Error::EvalFailure(t));
        }
        acc += piece;
        increments.push(piece);
        table.push(CutoffSample { cutoff: lo, value: acc });
        hi = lo;
    }
    let last_value = acc;
    let k_last = increments.len();

    let verdict = |convergence, estimate| CriterionVerdict {
        convergence,
        estimate,
        method: CriterionMethod::Quadrature,
        delta,
        gamma: Some(gamma),
        table: table.clone(),
        admissible_a: None,
    };

    // Cauchy-small increments: the integral has already converged.
    let scale = last_value.abs().max(1e-300);
    if increments[k_last - 3..].iter().all(|d| d.abs() <= TOL_CONV * scale) {
        return Ok(verdict(Convergence::Converges, Some(last_value)));
    }

    let classified = fit_increments(&increments).map(|fit| {
        if fit.rho_last >= 1.0 - 1e-3 && (fit.geo_slope >= -1e-3) {
            // Constant or growing increments: power or logarithmic
            // divergence. A flat tail has no variance to fit, so treat a
            // tiny spread as a perfect fit.
            if fit.ln_d_spread < 1e-6 || fit.geo_fit_r2 > 0.99 {
                return verdict(Convergence::Diverges, None);
            }
            return verdict(Convergence::Inconclusive, None);
        }
        if fit.drift < 1e-4 && fit.rho_last < 0.999 {
            // Geometric decay: the tail sum is exact for a constant ratio.
            let tail = increments[k_last - 1] * fit.rho_last / (1.0 - fit.rho_last);
            return verdict(Convergence::Converges, Some(last_value + tail));
        }
        if fit.poly_order >= 1.3 {
            // Polynomial decay of integrable order: extrapolate the partial
            // sums in x = 1/ln(delta/eps), the natural variable for
            // log-type endpoint corrections.
            let pts = 5.min(table.len());
            let xs: Vec<f64> = table[table.len() - pts..]
                .iter()
                .map(|s| 1.0 / (delta / s.cutoff).ln())
                .collect();
            let ys: Vec<f64> =
                table[table.len() - pts..].iter().map(|s| s.value).collect();
            return verdict(Convergence::Converges, Some(neville_at_zero(&xs, &ys)));
        }
        if fit.poly_order <= 0.9 && fit.poly_fit_r2 > 0.99 {
            // Decaying increments whose sum still diverges (order <= 1).
            return verdict(Convergence::Diverges, None);
        }
        verdict(Convergence::Inconclusive, None)
    });
    let numeric = classified.unwrap_or_else(|| verdict(Convergence::Inconclusive, None));

    // An exact power is decidable in closed form; never leave it
    // inconclusive or misclassified near the borderline.
    if let Nonlinearity::Power(p) = f {
        let exact = criterion_power(*p, derived, delta)?;
        if numeric.convergence != exact.convergence {
            return Ok(CriterionVerdict { table, ..exact });
        }
    }
    Ok(numeric)
}

/// Existence criterion for the planar effective dimension N' = 2: positive
/// solutions exist iff `e^(a t) f(t)` is integrable at +infinity for some
/// a > 0. Powers fail for every a; black boxes are tested over `a_grid` by
/// horizon doubling on `[t_start, infinity)`.
pub fn criterion_planar(
    f: &Nonlinearity<'_>,
    a_grid: &[f64],
    t_start: f64,
) -> Result<CriterionVerdict> {
    if a_grid.is_empty() || a_grid.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidParameter("a_grid must be positive and nonempty".into()));
    }
    if !(t_start > 0.0) {
        return Err(Error::InvalidParameter("t_start must be positive".into()));
    }
    if let Nonlinearity::Power(_) = f {
        // e^(a t) t^p always blows up; no a is admissible.
        return Ok(CriterionVerdict {
            convergence: Convergence::Diverges,
            estimate: None,
            method: CriterionMethod::ClosedForm,
            delta: t_start,
            gamma: None,
            table: Vec::new(),
            admissible_a: None,
        });
    }
    let g = match f {
        Nonlinearity::Callable(g) => g,
        Nonlinearity::Power(_) => unreachable!(),
    };

    for &a in a_grid {
        let bad_t = Cell::new(None::<f64>);
        let overflow = Cell::new(false);
        let eval = |t: f64| -> f64 {
            let v = g(t);
            if !(v.is_finite() && v >= 0.0) {
                bad_t.set(Some(t));
                return 0.0;
            }
            let weighted = (a * t).exp() * v;
            if !weighted.is_finite() {
                // The weighted integrand left the representable range; it is
                // certainly not integrable for this a.
                overflow.set(true);
                return 0.0;
            }
            weighted
        };
        let step = 4.0;
        let mut acc = 0.0;
        let mut table = Vec::new();
        let mut lo = t_start;
        let mut admissible = false;
        let mut prev_piece = f64::INFINITY;
        for _ in 0..64 {
            let hi = lo + step;
            let piece = adaptive_simpson(&eval, lo, hi, 1e-12, 1e-305);
            if let Some(t) = bad_t.get() {
                return Err(Error::EvalFailure(t));
            }
            if overflow.get() {
                break;
            }
            acc += piece;
            table.push(CutoffSample { cutoff: hi, value: acc });
            if piece.abs() <= TOL_CONV * acc.abs().max(1e-300) && table.len() >= 4 {
                admissible = true;
                break;
            }
            if table.len() >= 3 && piece >= prev_piece {
                break; // non-decaying increments, hopeless for this a
            }
            prev_piece = piece;
            lo = hi;
        }
        if admissible {
            return Ok(CriterionVerdict {
                convergence: Convergence::Converges,
                estimate: Some(acc),
                method: CriterionMethod::Quadrature,
                delta: t_start,
                gamma: None,
                table,
                admissible_a: Some(a),
            });
        }
    }
    Ok(CriterionVerdict {
        convergence: Convergence::Diverges,
        estimate: None,
        method: CriterionMethod::Quadrature,
        delta: t_start,
        gamma: None,
        table: Vec::new(),
        admissible_a: None,
    })
}

/// Exterior profile in the flattening variable `s = r^(2-N')`, where the
/// equation collapses to `-w''(s) = a s^(-gamma) f(w)` with
/// `a = (N'-2)^(-2)`. Positive profiles become concave in s.
#[derive(Debug, Clone)]
pub struct WProfile {
    pub s_grid: Vec<f64>,
    pub w: Vec<f64>,
    pub w_deriv: Vec<f64>,
    pub a: f64,
    pub s0: f64,
    pub gamma: f64,
    pub params: DerivedParams,
}

pub fn w_transform(profile: &RadialProfile) -> Result<WProfile> {
    if profile.side != Side::Exterior {
        return Err(Error::InvalidParameter("w-transform expects an exterior profile".into()));
    }
    let d = profile.params;
    let gamma = require_criterion_regime(&d)?;
    let np = d.n_prime;
    let n = profile.len();
    let mut s_grid = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut w_deriv = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let r = profile.grid[i];
        s_grid.push(r.powf(2.0 - np));
        w.push(profile.values[i]);
        // dw/ds = u'(r) dr/ds = u'(r) r^(N'-1) / (2 - N')
        w_deriv.push(profile.derivs[i] * r.powf(np - 1.0) / (2.0 - np));
    }
    Ok(WProfile {
        s0: *s_grid.last().unwrap(),
        s_grid,
        w,
        w_deriv,
        a: (np - 2.0).powi(-2),
        gamma,
        params: d,
    })
}

impl WProfile {
    /// Maximum qualified relative residual of `w'' + a s^(-gamma) w^p = 0`,
    /// normalized pointwise by the larger of the two terms. For a profile
    /// with identically vanishing curvature this equals one: the sourced
    /// term is then the whole residual.
    pub fn residual(&self) -> f64 {
        let n = self.s_grid.len();
        if n < 3 {
            return 0.0;
        }
        let mut sums = Vec::with_capacity(n - 2);
        let mut dens = Vec::with_capacity(n - 2);
        let mut scale = 0.0f64;
        for i in 1..n - 1 {
            let wpp =
                (self.w_deriv[i + 1] - self.w_deriv[i - 1]) / (self.s_grid[i + 1] - self.s_grid[i - 1]);
            let src = self.a * self.s_grid[i].powf(-self.gamma) * pospow(self.w[i], self.params.p);
            let den = wpp.abs().max(src);
            scale = scale.max(den);
            sums.push(wpp + src);
            dens.push(den);
        }
        if scale == 0.0 {
            return 0.0;
        }
        let floor = RESIDUAL_QUALIFICATION * scale;
        let mut worst = 0.0f64;
        for (s, den) in sums.iter().zip(&dens) {
            if *den >= floor {
                worst = worst.max(s.abs() / den);
            }
        }
        worst
    }

    /// Largest positive discrete curvature relative to the local source
    /// scale; nonpositive curvature (concavity) gives zero.
    pub fn max_convexity(&self) -> f64 {
        let n = self.s_grid.len();
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let wpp =
                (self.w_deriv[i + 1] - self.w_deriv[i - 1]) / (self.s_grid[i + 1] - self.s_grid[i - 1]);
            let src = self.a * self.s_grid[i].powf(-self.gamma) * pospow(self.w[i], self.params.p);
            if wpp > 0.0 && src > 0.0 {
                worst = worst.max(wpp / src);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests;
