//! Privacy budgets and per-query noise planning.
//!
//! All logarithms are natural.

use crate::error::{Error, Result};
use crate::samplers::NoiseScale;

/// Target `(ε*, δ)` approximate-DP guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        check_delta(delta)?;
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )))
    }
}

/// ρ-zCDP budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdpBudget(f64);

impl CdpBudget {
    pub fn new(rho: f64) -> Result<Self> {
        if rho >= 0.0 && rho.is_finite() {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidParameter(format!(
                "rho must be nonnegative, got {rho}"
            )))
        }
    }

    pub fn rho(&self) -> f64 {
        self.0
    }
}

/// `ε = ρ + √(4ρ ln(1/δ))`.
pub fn cdp_to_approx_dp(rho: CdpBudget, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let rho = rho.rho();
    Ok(rho + (4.0 * rho * (1.0 / delta).ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    Gaussian,
    Laplace,
    RandomizedResponse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerQuery {
    Noise(NoiseScale),
    /// Budget handed to each user's local randomizer before it is split over
    /// that user's responses.
    ResponseEpsilon(f64),
}

/// How a budget is spread over `k` queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePlan {
    pub mechanism: MechanismKind,
    pub k: usize,
    pub per_query: PerQuery,
}

impl NoisePlan {
    pub fn noise_scale(&self) -> Option<NoiseScale> {
        match self.per_query {
            PerQuery::Noise(s) => Some(s),
            PerQuery::ResponseEpsilon(_) => None,
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter("query count must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Total discrete-Gaussian budget `ε₀ = ε*/√(2 ln(1/δ))`, i.e. `½ε₀²`-zCDP.
pub fn gaussian_total_epsilon(budget: PrivacyBudget) -> f64 {
    budget.epsilon() / (2.0 * (1.0 / budget.delta()).ln()).sqrt()
}

/// Splits `½ε₀²`-zCDP evenly over `k` sensitivity-1 queries: each query gets
/// `ε_q = ε₀/√k` and noise `N_Z(0, 1/ε_q²)`.
pub fn gaussian_plan(budget: PrivacyBudget, k: usize) -> Result<NoisePlan> {
    check_k(k)?;
    let per_query = gaussian_total_epsilon(budget) / (k as f64).sqrt();
    Ok(NoisePlan {
        mechanism: MechanismKind::Gaussian,
        k,
        per_query: PerQuery::Noise(NoiseScale::gaussian(1.0 / per_query)?),
    })
}

/// Basic composition: each of `k` sensitivity-1 queries gets `ε*/k`,
/// i.e. discrete Laplace scale `t = k/ε*`.
pub fn laplace_plan(budget: PrivacyBudget, k: usize) -> Result<NoisePlan> {
    check_k(k)?;
    let per_query = budget.epsilon() / k as f64;
    Ok(NoisePlan {
        mechanism: MechanismKind::Laplace,
        k,
        per_query: PerQuery::Noise(NoiseScale::laplace(1.0 / per_query)?),
    })
}

/// Central `ε` guaranteed by shuffling `n` reports from `ε₀`-DP local
/// randomizers (Feldman, McMillan and Talwar, 2022, Theorem III.1, including
/// the `8e^{ε₀}/n` term).
pub fn shuffle_amplified_epsilon(epsilon0: f64, delta: f64, n: usize) -> f64 {
    let n = n as f64;
    let e0 = epsilon0.exp();
    let sqrt_term = 8.0 * (e0 * (4.0 / delta).ln()).sqrt() / n.sqrt();
    let linear_term = 8.0 * e0 / n;
    ((e0 - 1.0) / (e0 + 1.0) * (sqrt_term + linear_term)).ln_1p()
}

/// Largest local budget the amplification bound accepts for `n` users.
pub fn shuffle_epsilon_cap(delta: f64, n: usize) -> f64 {
    (n as f64 / (16.0 * (2.0 / delta).ln())).ln()
}

const BISECTION_WIDTH: f64 = 1e-8;

/// Local budget `ε₀` such that shuffling `n` randomized reports meets the
/// central budget, found by bisection on `[~0, cap]`.
///
/// Falls back to `ε*` itself when `n` is too small for amplification to apply.
pub fn shuffle_effective_epsilon(budget: PrivacyBudget, n: usize) -> f64 {
    let target = budget.epsilon();
    let delta = budget.delta();
    let eps = |e0: f64| shuffle_amplified_epsilon(e0, delta, n);

    let mut upper = shuffle_epsilon_cap(delta, n);
    if n == 0 || upper < 0.0 {
        return target;
    }
    let mut lower = 1e-5;
    while eps(lower) > target {
        lower /= 2.0;
    }
    if upper <= lower {
        return upper;
    }
    while upper - lower > BISECTION_WIDTH {
        let mid = 0.5 * (upper + lower);
        if eps(mid) < target {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    // `lower` always satisfies the target
    lower
}

/// Per-response budget for a user with `response_count` observed answers, or
/// `None` when the user answered nothing and needs no randomization.
pub fn rr_per_response_epsilon(epsilon_user: f64, response_count: usize) -> Option<f64> {
    (response_count > 0).then(|| epsilon_user / response_count as f64)
}

/// Plan for randomized response: `k` is the largest per-user response count.
pub fn randomized_response_plan(epsilon_user: f64, k: usize) -> Result<NoisePlan> {
    check_k(k)?;
    Ok(NoisePlan {
        mechanism: MechanismKind::RandomizedResponse,
        k,
        per_query: PerQuery::ResponseEpsilon(epsilon_user / k as f64),
    })
}

/// Edge probability presets for the sampling graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum P0Preset {
    /// Complete graph.
    #[default]
    Dense,
    /// `min(1, ln m / m)` over the `m` items.
    LogM,
    /// `min(1, ln n / n)` over the `n` users.
    LogN,
}

impl P0Preset {
    pub fn resolve(self, m: usize, n: usize) -> f64 {
        let f = |x: usize| {
            let x = x as f64;
            if x <= 1.0 {
                1.0
            } else {
                (x.ln() / x).min(1.0)
            }
        };
        match self {
            P0Preset::Dense => 1.0,
            P0Preset::LogM => f(m),
            P0Preset::LogN => f(n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            P0Preset::Dense => "dense",
            P0Preset::LogM => "logm",
            P0Preset::LogN => "logn",
        }
    }
}

impl std::str::FromStr for P0Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(P0Preset::Dense),
            "logm" => Ok(P0Preset::LogM),
            "logn" => Ok(P0Preset::LogN),
            other => Err(Error::InvalidParameter(format!("unknown p0 preset {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(eps: f64, delta: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps, delta).unwrap()
    }

    #[test]
    fn cdp_conversion_examples() {
        assert_eq!(cdp_to_approx_dp(CdpBudget::new(0.0).unwrap(), 0.1).unwrap(), 0.0);
        let e = cdp_to_approx_dp(CdpBudget::new(1.0).unwrap(), (-1.0f64).exp()).unwrap();
        assert!((e - 3.0).abs() < 1e-12);
        assert!(cdp_to_approx_dp(CdpBudget::new(1.0).unwrap(), 1.0).is_err());
        assert!(cdp_to_approx_dp(CdpBudget::new(1.0).unwrap(), 0.0).is_err());
        assert!(CdpBudget::new(-1.0).is_err());
    }

    #[test]
    fn cdp_conversion_at_approximate_rho() {
        let (eps, delta) = (0.7f64, 1e-4f64);
        let l = (1.0 / delta).ln();
        let rho = eps * eps / (4.0 * l);
        let got = cdp_to_approx_dp(CdpBudget::new(rho).unwrap(), delta).unwrap();
        assert!((got - (eps + eps * eps / (4.0 * l))).abs() < 1e-14);
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(0.0, 1e-4).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(f64::NAN, 0.5).is_err());
    }

    fn sigma(plan: &NoisePlan) -> f64 {
        plan.noise_scale().unwrap().value()
    }

    #[test]
    fn gaussian_plan_values() {
        let p = gaussian_plan(b(1.0, 1e-4), 1).unwrap();
        let e0 = gaussian_total_epsilon(b(1.0, 1e-4));
        // 1/√(2 ln 10⁴) = 0.232997…, σ = 4.29193…
        assert!((e0 - 0.23300).abs() < 1e-5);
        assert!((sigma(&p) - 4.2919).abs() < 1e-4);
        let dense = gaussian_plan(b(1.0, 1e-4), 9900).unwrap();
        assert!((sigma(&dense) - 427.0).abs() < 0.05);
        let q = gaussian_plan(b(1.0, 1e-4), 4).unwrap();
        assert_eq!(sigma(&q), 2.0 * sigma(&p));
        assert!(gaussian_plan(b(1.0, 1e-4), 0).is_err());
    }

    #[test]
    fn laplace_plan_values() {
        let t = |eps, k| laplace_plan(b(eps, 1e-4), k).unwrap().noise_scale().unwrap().value();
        assert_eq!(t(1.0, 1), 1.0);
        assert_eq!(t(2.0, 90), 45.0);
        assert!((1..50).all(|k| t(1.0, k) < t(1.0, k + 1)));
    }

    #[test]
    fn shuffle_fallback_when_cap_negative() {
        assert!(shuffle_epsilon_cap(1e-4, 10) < 0.0);
        assert_eq!(shuffle_effective_epsilon(b(1.0, 1e-4), 10), 1.0);
    }

    #[test]
    fn shuffle_binding_cap_returns_cap() {
        // at n = 1000 the bound stays below 1 up to the cap
        let cap = shuffle_epsilon_cap(1e-4, 1000);
        assert!(shuffle_amplified_epsilon(cap, 1e-4, 1000) < 1.0);
        let e0 = shuffle_effective_epsilon(b(1.0, 1e-4), 1000);
        assert!((e0 - cap).abs() < 1e-7);
        assert!(shuffle_amplified_epsilon(e0, 1e-4, 1000) <= 1.0);
    }

    #[test]
    fn shuffle_residual_when_cap_free() {
        let e0 = shuffle_effective_epsilon(b(0.5, 1e-4), 1000);
        assert!(e0 < shuffle_epsilon_cap(1e-4, 1000));
        assert!((shuffle_amplified_epsilon(e0, 1e-4, 1000) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn shuffle_monotone_in_n() {
        for eps in [0.1, 0.5, 1.0, 3.0] {
            let mut prev = 0.0;
            for n in [200, 500, 1000, 5000, 20_000, 100_000, 1_000_000] {
                let e0 = shuffle_effective_epsilon(b(eps, 1e-4), n);
                assert!(e0 >= prev, "eps {eps}, n {n}");
                prev = e0;
            }
        }
    }

    #[test]
    fn per_response_split() {
        assert_eq!(rr_per_response_epsilon(1.0, 4), Some(0.25));
        assert_eq!(rr_per_response_epsilon(2.0, 1), Some(2.0));
        assert_eq!(rr_per_response_epsilon(1.0, 0), None);
    }

    #[test]
    fn presets() {
        assert_eq!(P0Preset::Dense.resolve(100, 200), 1.0);
        assert!((P0Preset::LogM.resolve(100, 200) - 100f64.ln() / 100.0).abs() < 1e-15);
        assert!((P0Preset::LogN.resolve(100, 200) - 200f64.ln() / 200.0).abs() < 1e-15);
        assert_eq!(P0Preset::LogM.resolve(2, 1), 2f64.ln() / 2.0);
        assert_eq!("logn".parse::<P0Preset>().unwrap(), P0Preset::LogN);
        assert!("sparse".parse::<P0Preset>().is_err());
    }
}
