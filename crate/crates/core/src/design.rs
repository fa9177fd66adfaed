//! Lyapunov decay-rate formulas and the safe amplifier intervals.
//!
//! For amplifiers `(xi1, xi2)` and a Young-inequality weight `epsilon > 0`
//! the perturbed energy `E + delta F` decays at rate
//! `sigma(delta) = delta (1 - delta L eta)` whenever
//! `delta < min(1/eta, f1(xi1), f2(xi2)) / L`. The maximal rate
//! `sigma_max = 1/(4 eta L)` is attained at `delta = 1/(2 eta L)`, which is
//! admissible exactly when both `f1` and `f2` exceed `1/(2 eta)`. Solving
//! those two quadratic inequalities gives the open intervals
//! `(c1-, c1+)` and `(c2-, c2+)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{DerivedConstants, MaterialParams};

/// Relative size under which a negative discriminant is treated as zero.
const DISCRIMINANT_SLACK: f64 = 1e-12;

/// Default Young-inequality weight.
pub const DEFAULT_EPSILON: f64 = 1.0;

/// Open interval `(lo, hi)`; endpoints are excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// A complete amplifier design for one value of `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackDesign {
    pub epsilon: f64,
    pub c1_lo: f64,
    pub c1_hi: f64,
    pub c2_lo: f64,
    pub c2_hi: f64,
    /// `rho / (2 eta)`, maximizer of `f1` and `h1`.
    pub xi1_star: f64,
    /// `mu / (2 eta)`, maximizer of `f2` and minimizer of `h2`.
    pub xi2_star: f64,
    /// Guaranteed decay exponent (equals `sigma_max`).
    pub sigma: f64,
    /// Overshoot constant of the envelope `E(t) <= M E(0) exp(-sigma t)`.
    pub big_m: f64,
    /// Perturbation weight realizing `sigma`.
    pub delta: f64,
}

impl FeedbackDesign {
    pub fn c1(&self) -> Interval {
        Interval { lo: self.c1_lo, hi: self.c1_hi }
    }

    pub fn c2(&self) -> Interval {
        Interval { lo: self.c2_lo, hi: self.c2_hi }
    }

    /// Whether `(xi1, xi2)` lies in the open design box.
    pub fn admits(&self, xi1: f64, xi2: f64) -> bool {
        self.c1().contains(xi1) && self.c2().contains(xi2)
    }
}

/// Bound functions at given amplifiers and the resulting admissible `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBudget {
    pub f1_val: f64,
    pub f2_val: f64,
    /// `(1/L) min(1/eta, f1, f2)`; any `delta` strictly below it is admissible.
    pub delta_max: f64,
}

/// `f1(xi1, eps) = 2 xi1 alpha1 / (rho alpha1 + (1 + eps) xi1^2)`.
pub fn f1(xi1: f64, eps: f64, d: &DerivedConstants, p: &MaterialParams) -> f64 {
    let a1 = d.alpha1;
    2.0 * xi1 * a1 / (p.rho * a1 + (1.0 + eps) * xi1 * xi1)
}

/// `f2(xi2, eps) = 2 xi2 eps alpha1 beta / (eps mu alpha1 beta + (eps alpha + gamma^2 beta) xi2^2)`.
pub fn f2(xi2: f64, eps: f64, d: &DerivedConstants, p: &MaterialParams) -> f64 {
    let a1b = d.alpha1 * p.beta;
    let lead = eps * p.alpha + p.gamma * p.gamma * p.beta;
    2.0 * xi2 * eps * a1b / (eps * p.mu * a1b + lead * xi2 * xi2)
}

/// Upper-bound curve for `epsilon`: `f1(xi1, eps) > 1/(2 eta)` iff `eps < h1(xi1)`.
pub fn h1(xi1: f64, d: &DerivedConstants, p: &MaterialParams) -> Result<f64> {
    if !(xi1 > 0.0) {
        return Err(Error::InvalidArgument(format!("h1 requires xi1 > 0, got {xi1:e}")));
    }
    let a1 = d.alpha1;
    Ok((4.0 * a1 * xi1 * d.eta - p.rho * a1 - xi1 * xi1) / (xi1 * xi1))
}

/// Lower-bound curve for `epsilon`: `f2(xi2, eps) > 1/(2 eta)` iff `eps > h2(xi2)`,
/// defined between the asymptotes `a2-` and `a2+`.
pub fn h2(xi2: f64, d: &DerivedConstants, p: &MaterialParams) -> Result<f64> {
    let a1b = d.alpha1 * p.beta;
    let denom = 4.0 * a1b * xi2 * d.eta - p.mu * a1b - p.alpha * xi2 * xi2;
    if !(denom > 0.0) {
        let (lo, hi) = h2_asymptotes(d, p);
        return Err(Error::InvalidArgument(format!(
            "h2 requires xi2 in ({lo:e}, {hi:e}) where its denominator is positive, got {xi2:e}"
        )));
    }
    Ok(p.beta * p.gamma * p.gamma * xi2 * xi2 / denom)
}

/// Roots `a1-`, `a1+` of `h1`: `2 alpha1 eta -+ sqrt(4 alpha1^2 eta^2 - rho alpha1)`.
pub fn h1_roots(d: &DerivedConstants, p: &MaterialParams) -> (f64, f64) {
    let a1 = d.alpha1;
    quadratic_roots(1.0, 2.0 * a1 * d.eta, p.rho * a1).expect("4 alpha1 eta^2 >= rho by construction")
}

/// Vertical asymptotes `a2-`, `a2+` of `h2`.
pub fn h2_asymptotes(d: &DerivedConstants, p: &MaterialParams) -> (f64, f64) {
    let a1b = d.alpha1 * p.beta;
    quadratic_roots(p.alpha, 2.0 * a1b * d.eta, p.mu * a1b)
        .expect("4 alpha1 beta eta^2 > alpha mu by construction")
}

/// Admissible open range `(eps_lo, eps_hi)` for the Young weight.
pub fn epsilon_bounds(d: &DerivedConstants, p: &MaterialParams) -> (f64, f64) {
    let a1 = d.alpha1;
    let eta2 = d.eta * d.eta;
    let lo = p.beta * p.gamma * p.gamma * p.mu / (4.0 * a1 * p.beta * eta2 - p.alpha * p.mu);
    let hi = (4.0 * a1 * eta2 - p.rho) / p.rho;
    (lo, hi)
}

/// Interval of `xi1` where `f1(xi1, eps) > 1/(2 eta)`; `None` when empty.
pub fn c1_interval(eps: f64, d: &DerivedConstants, p: &MaterialParams) -> Option<Interval> {
    let a1 = d.alpha1;
    // (1+eps) xi^2 - 4 alpha1 eta xi + rho alpha1 < 0
    quadratic_roots(1.0 + eps, 2.0 * a1 * d.eta, p.rho * a1)
        .filter(|(lo, hi)| lo < hi)
        .map(|(lo, hi)| Interval { lo, hi })
}

/// Interval of `xi2` where `f2(xi2, eps) > 1/(2 eta)`; `None` when empty.
pub fn c2_interval(eps: f64, d: &DerivedConstants, p: &MaterialParams) -> Option<Interval> {
    let a1b = d.alpha1 * p.beta;
    let lead = eps * p.alpha + p.beta * p.gamma * p.gamma;
    quadratic_roots(lead, 2.0 * eps * a1b * d.eta, eps * p.mu * a1b)
        .filter(|(lo, hi)| lo < hi)
        .map(|(lo, hi)| Interval { lo, hi })
}

/// Roots of `a x^2 - 2 b x + c` with `a, b, c > 0`, smaller root first.
/// The small root comes from the product of roots to avoid cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - a * c;
    let disc = if disc < 0.0 {
        if -disc <= DISCRIMINANT_SLACK * b * b {
            0.0
        } else {
            return None;
        }
    } else {
        disc
    };
    let hi = (b + disc.sqrt()) / a;
    let lo = c / (a * hi);
    Some((lo, hi))
}

/// Amplifier intervals and the guaranteed `(sigma, M)` for a given `epsilon`.
pub fn amplifier_intervals(eps: f64, d: &DerivedConstants, p: &MaterialParams) -> Result<FeedbackDesign> {
    let (lo, hi) = epsilon_bounds(d, p);
    if !(eps > lo && eps < hi) {
        return Err(Error::EpsilonOutOfBounds { eps, lo, hi });
    }
    let out_of_bounds = || Error::EpsilonOutOfBounds { eps, lo, hi };
    let c1 = c1_interval(eps, d, p).ok_or_else(out_of_bounds)?;
    let c2 = c2_interval(eps, d, p).ok_or_else(out_of_bounds)?;
    let delta = d.optimal_delta();
    let (sigma, big_m) = lyapunov_rate(delta, d)?;
    Ok(FeedbackDesign {
        epsilon: eps,
        c1_lo: c1.lo,
        c1_hi: c1.hi,
        c2_lo: c2.lo,
        c2_hi: c2.hi,
        xi1_star: p.rho / (2.0 * d.eta),
        xi2_star: p.mu / (2.0 * d.eta),
        sigma,
        big_m,
        delta,
    })
}

/// `sigma(delta) = delta (1 - delta L eta)` and `M(delta) = (1 + delta L eta)/(1 - delta L eta)`.
pub fn lyapunov_rate(delta: f64, d: &DerivedConstants) -> Result<(f64, f64)> {
    let max = 1.0 / (d.eta * d.length);
    if !(delta > 0.0 && delta < max) {
        return Err(Error::DeltaOutOfRange { delta, max });
    }
    let k = delta * d.length * d.eta;
    Ok((delta * (1.0 - k), (1.0 + k) / (1.0 - k)))
}

pub fn delta_budget(
    xi1: f64,
    xi2: f64,
    eps: f64,
    d: &DerivedConstants,
    p: &MaterialParams,
) -> Result<DeltaBudget> {
    if !(xi1 >= 0.0 && xi2 >= 0.0 && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta budget needs xi1, xi2 >= 0 and epsilon > 0 (got {xi1:e}, {xi2:e}, {eps:e})"
        )));
    }
    let f1_val = f1(xi1, eps, d, p);
    let f2_val = f2(xi2, eps, d, p);
    let delta_max = (1.0 / d.eta).min(f1_val).min(f2_val) / d.length;
    Ok(DeltaBudget { f1_val, f2_val, delta_max })
}

/// Outcome of checking a concrete amplifier pair against the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCheck {
    pub xi1: f64,
    pub xi2: f64,
    pub epsilon: f64,
    pub epsilon_bounds: (f64, f64),
    pub epsilon_ok: bool,
    /// `f1(xi1) > 1/(2 eta)`.
    pub f1_ok: bool,
    /// `f2(xi2) > 1/(2 eta)`.
    pub f2_ok: bool,
    pub c1: Option<Interval>,
    pub c2: Option<Interval>,
    pub xi1_in_interval: bool,
    pub xi2_in_interval: bool,
    pub budget: DeltaBudget,
    /// Rate guaranteed by the largest admissible `delta` (capped at `sigma_max`).
    pub guaranteed_sigma: f64,
    /// Human-readable reasons for every failed check.
    pub violations: Vec<String>,
}

impl DesignCheck {
    /// All checks pass: `sigma_max` is guaranteed for these amplifiers.
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// The interval verdicts agree with the inequality verdicts.
    pub fn consistent(&self) -> bool {
        self.f1_ok == self.xi1_in_interval && self.f2_ok == self.xi2_in_interval
    }
}

pub fn verify_design(
    xi1: f64,
    xi2: f64,
    eps: f64,
    d: &DerivedConstants,
    p: &MaterialParams,
) -> Result<DesignCheck> {
    let budget = delta_budget(xi1, xi2, eps, d, p)?;
    let level = d.half_inv_eta();
    let bounds = epsilon_bounds(d, p);
    let epsilon_ok = eps > bounds.0 && eps < bounds.1;
    let c1 = c1_interval(eps, d, p);
    let c2 = c2_interval(eps, d, p);
    let f1_ok = budget.f1_val > level;
    let f2_ok = budget.f2_val > level;
    let xi1_in_interval = c1.is_some_and(|c| c.contains(xi1));
    let xi2_in_interval = c2.is_some_and(|c| c.contains(xi2));

    let mut violations = Vec::new();
    if xi1 == 0.0 && xi2 == 0.0 {
        violations.push("both amplifiers are zero: the boundary is undamped".to_string());
    }
    if !epsilon_ok {
        violations.push(format!(
            "epsilon = {eps:e} outside ({:e}, {:e})",
            bounds.0, bounds.1
        ));
    }
    let describe = |c: Option<Interval>| match c {
        Some(c) => format!("({:.6e}, {:.6e})", c.lo, c.hi),
        None => "(empty)".to_string(),
    };
    if !xi1_in_interval {
        violations.push(format!(
            "xi1 = {xi1:e} outside (c1-, c1+) = {}; f1 = {:e} <= 1/(2 eta) = {level:e}",
            describe(c1),
            budget.f1_val
        ));
    }
    if !xi2_in_interval {
        violations.push(format!(
            "xi2 = {xi2:e} outside (c2-, c2+) = {}; f2 = {:e} <= 1/(2 eta) = {level:e}",
            describe(c2),
            budget.f2_val
        ));
    }

    let delta = budget.delta_max.min(d.optimal_delta());
    let guaranteed_sigma = if delta > 0.0 {
        let k = delta * d.length * d.eta;
        delta * (1.0 - k)
    } else {
        0.0
    };

    Ok(DesignCheck {
        xi1,
        xi2,
        epsilon: eps,
        epsilon_bounds: bounds,
        epsilon_ok,
        f1_ok,
        f2_ok,
        c1,
        c2,
        xi1_in_interval,
        xi2_in_interval,
        budget,
        guaranteed_sigma,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::derive_constants;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table1() -> (DerivedConstants, MaterialParams) {
        let p = MaterialParams::TABLE1;
        (derive_constants(&p).unwrap(), p)
    }

    #[test]
    fn bound_functions_vanish_at_zero() {
        let (d, p) = table1();
        assert_eq!(f1(0.0, 1.0, &d, &p), 0.0);
        assert_eq!(f2(0.0, 1.0, &d, &p), 0.0);
        assert!(f1(1e30, 1.0, &d, &p) < 1e-15);
    }

    #[test]
    fn critical_points_exceed_level() {
        let (d, p) = table1();
        let des = amplifier_intervals(1.0, &d, &p).unwrap();
        assert!(f1(des.xi1_star, 1.0, &d, &p) > d.half_inv_eta());
        assert!(f2(des.xi2_star, 1.0, &d, &p) > d.half_inv_eta());
        assert!(des.c1().contains(des.xi1_star));
        assert!(des.c2().contains(des.xi2_star));
    }

    #[test]
    fn endpoints_hit_level() {
        let (d, p) = table1();
        let des = amplifier_intervals(1.0, &d, &p).unwrap();
        let level = d.half_inv_eta();
        for v in [
            f1(des.c1_lo, 1.0, &d, &p),
            f1(des.c1_hi, 1.0, &d, &p),
            f2(des.c2_lo, 1.0, &d, &p),
            f2(des.c2_hi, 1.0, &d, &p),
        ] {
            assert_relative_eq!(v, level, max_relative = 1e-9);
        }
    }

    #[test]
    fn h_curves_at_critical_points() {
        let (d, p) = table1();
        let (a1m, a1p) = h1_roots(&d, &p);
        assert!(h1(a1m, &d, &p).unwrap().abs() < 1e-6);
        assert!(h1(a1p, &d, &p).unwrap().abs() < 1e-6);
        let (lo, hi) = epsilon_bounds(&d, &p);
        assert_relative_eq!(h1(p.rho / (2.0 * d.eta), &d, &p).unwrap(), hi, max_relative = 1e-12);
        assert_relative_eq!(h2(p.mu / (2.0 * d.eta), &d, &p).unwrap(), lo, max_relative = 1e-9);
        assert_relative_eq!(hi, 3.0, max_relative = 1e-6);
        assert!(lo > 4.0e-17 && lo < 4.4e-17, "{lo:e}");
        let (a2m, a2p) = h2_asymptotes(&d, &p);
        assert!(h2(a2m * 0.5, &d, &p).is_err());
        assert!(h2(a2p * 2.0, &d, &p).is_err());
        assert!(h1(0.0, &d, &p).is_err());
    }

    #[test]
    fn table1_intervals() {
        let (d, p) = table1();
        let des = amplifier_intervals(1.0, &d, &p).unwrap();
        assert_relative_eq!(des.c1_lo, 7.17e5, max_relative = 1e-2);
        assert_relative_eq!(des.c1_hi, 4.18e6, max_relative = 1e-2);
        assert_relative_eq!(des.c2_lo, 1.02e-4, max_relative = 1e-2);
        assert_relative_eq!(des.c2_hi, 9.78e9, max_relative = 1e-2);
        assert_eq!(des.big_m, 3.0);
        assert_relative_eq!(des.sigma, d.sigma_max, max_relative = 1e-15);
        assert!(des.delta * d.length * d.eta < 1.0);
    }

    #[test]
    fn epsilon_outside_bounds_is_rejected() {
        let (d, p) = table1();
        let (lo, hi) = epsilon_bounds(&d, &p);
        assert!(matches!(
            amplifier_intervals(hi * 1.01, &d, &p),
            Err(Error::EpsilonOutOfBounds { .. })
        ));
        assert!(amplifier_intervals(lo * 0.5, &d, &p).is_err());
        assert!(amplifier_intervals(hi, &d, &p).is_err());
        assert!(amplifier_intervals(0.0, &d, &p).is_err());
    }

    #[test]
    fn lyapunov_rate_limits() {
        let (d, _) = table1();
        let (s, m) = lyapunov_rate(d.optimal_delta(), &d).unwrap();
        assert_relative_eq!(s, d.sigma_max, max_relative = 1e-15);
        assert_eq!(m, 3.0);
        let (s, m) = lyapunov_rate(1e-12, &d).unwrap();
        assert!(s < 1.1e-12 && (m - 1.0).abs() < 1e-12);
        assert!(lyapunov_rate(0.0, &d).is_err());
        assert!(lyapunov_rate(1.0 / (d.eta * d.length), &d).is_err());
    }

    #[test]
    fn delta_budget_examples() {
        let (d, p) = table1();
        let b = delta_budget(1e6, 1e9, 1.0, &d, &p).unwrap();
        assert!(b.delta_max > d.optimal_delta());
        let b = delta_budget(1e-300, 1e9, 1.0, &d, &p).unwrap();
        assert!(b.delta_max < 1e-290);
        let des = amplifier_intervals(1.0, &d, &p).unwrap();
        let b = delta_budget(des.c1_hi, des.xi2_star, 1.0, &d, &p).unwrap();
        assert_relative_eq!(b.delta_max, d.optimal_delta(), max_relative = 1e-9);
    }

    #[test]
    fn verify_examples() {
        let (d, p) = table1();
        let ok = verify_design(1e6, 1e9, 1.0, &d, &p).unwrap();
        assert!(ok.passed() && ok.consistent(), "{:?}", ok.violations);
        assert_relative_eq!(ok.guaranteed_sigma, d.sigma_max, max_relative = 1e-12);
        let bad = verify_design(1e4, 1e9, 1.0, &d, &p).unwrap();
        assert!(!bad.xi1_in_interval && !bad.f1_ok && bad.f2_ok);
        assert!(bad.violations.iter().any(|v| v.starts_with("xi1")));
        let zero = verify_design(0.0, 0.0, 1.0, &d, &p).unwrap();
        assert!(!zero.passed());
        assert!(zero.violations[0].contains("zero"));
        assert_eq!(zero.guaranteed_sigma, 0.0);
    }

    #[test]
    fn endpoint_membership_is_failure() {
        let (d, p) = table1();
        let des = amplifier_intervals(1.0, &d, &p).unwrap();
        assert!(!des.admits(des.c1_lo, des.xi2_star));
        assert!(!des.admits(des.xi1_star, des.c2_hi));
    }

    #[test]
    fn h_extrema_by_grid_search() {
        let (d, p) = table1();
        let star1 = p.rho / (2.0 * d.eta);
        let star2 = p.mu / (2.0 * d.eta);
        let h1_star = h1(star1, &d, &p).unwrap();
        let h2_star = h2(star2, &d, &p).unwrap();
        // f1 itself peaks at sqrt(rho alpha1 / (1 + eps)), not at star1
        let f1_peak = f1((p.rho * d.alpha1 / 2.0).sqrt(), 1.0, &d, &p);
        assert!(f1(star1, 1.0, &d, &p) < f1_peak);
        let (a1m, a1p) = h1_roots(&d, &p);
        let (a2m, a2p) = h2_asymptotes(&d, &p);
        for i in 1..2000 {
            let t = i as f64 / 2000.0;
            let x1 = a1m * (a1p / a1m).powf(t);
            assert!(h1(x1, &d, &p).unwrap() <= h1_star * (1.0 + 1e-12));
            assert!(f1(x1, 1.0, &d, &p) <= f1_peak * (1.0 + 1e-12));
            let x2 = a2m * (a2p / a2m).powf(t);
            if let Ok(v) = h2(x2, &d, &p) {
                assert!(v >= h2_star * (1.0 - 1e-9));
            }
        }
    }

    proptest! {
        #[test]
        fn intervals_deform_monotonically(log_eps in -10.0f64..0.0) {
            let (d, p) = table1();
            let eps = 10f64.powf(log_eps);
            let a = amplifier_intervals(eps, &d, &p).unwrap();
            let b = amplifier_intervals(2.0 * eps, &d, &p).unwrap();
            // endpoints that barely move with eps are compared with rounding slack
            let within = |outer: Interval, inner: Interval| {
                outer.lo <= inner.lo * (1.0 + 1e-12) && inner.hi <= outer.hi * (1.0 + 1e-12)
            };
            prop_assert!(within(a.c1(), b.c1()));
            prop_assert!(within(b.c2(), a.c2()));
        }

        #[test]
        fn sigma_is_concave(u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let (d, _) = table1();
            let max = 1.0 / (d.eta * d.length);
            let (d1, d2) = ((u * 0.999 + 1e-4) * max, (v * 0.999 + 1e-4) * max);
            let (s1, _) = lyapunov_rate(d1, &d).unwrap();
            let (s2, _) = lyapunov_rate(d2, &d).unwrap();
            let (sm, _) = lyapunov_rate(0.5 * (d1 + d2), &d).unwrap();
            prop_assert!(s1 + s2 <= 2.0 * sm * (1.0 + 1e-12));
            prop_assert!(s1 <= d.sigma_max * (1.0 + 1e-12));
        }

        #[test]
        fn membership_matches_inequality(log_xi in -8.0f64..12.0, log_eps in -3.0f64..0.4) {
            let (d, p) = table1();
            let (xi, eps) = (10f64.powf(log_xi), 10f64.powf(log_eps));
            let c = verify_design(xi, xi, eps, &d, &p).unwrap();
            prop_assert!(c.consistent());
        }
    }
}
