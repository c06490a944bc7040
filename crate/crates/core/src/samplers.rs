//! Integer noise samplers.
//!
//! `bernoulli_exp` and `sample_discrete_gaussian` follow the rejection
//! construction of Canonne, Kamath and Steinke (2020). Thresholds such as
//! `γ / K` and `U / t` are evaluated in double precision, so each Bernoulli
//! decision carries a bias of at most about 2⁻⁵⁰; the samplers are exact up to
//! that rounding and are not hardened against timing side channels.

use rand::distr::Distribution;
use rand_distr::Geometric;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Upper bound on rejection-loop attempts before giving up.
pub const MAX_ATTEMPTS: usize = 1_000_000;

fn bernoulli_exp_unit(gamma: f64, rng: &mut RngStream) -> bool {
    debug_assert!((0.0..=1.0).contains(&gamma));
    let mut k = 1u64;
    while rng.uniform() < gamma / k as f64 {
        k += 1;
    }
    k % 2 == 1
}

/// Returns `true` with probability `e^{-gamma}`.
pub fn bernoulli_exp(gamma: f64, rng: &mut RngStream) -> Result<bool> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bernoulli_exp needs gamma >= 0, got {gamma}"
        )));
    }
    if gamma.is_infinite() {
        return Ok(false);
    }
    let whole = gamma.floor();
    let mut remaining = whole as u64;
    while remaining > 0 {
        if !bernoulli_exp_unit(1.0, rng) {
            return Ok(false);
        }
        remaining -= 1;
    }
    Ok(bernoulli_exp_unit(gamma - whole, rng))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Draws from the discrete Laplace distribution with scale `t`,
/// `Pr[X = x] ∝ e^{-|x|/t}` on the integers.
pub fn sample_discrete_laplace(t: f64, rng: &mut RngStream) -> Result<i64> {
    check_positive("laplace scale", t)?;
    // α = e^{-1/t};  Pr[0] = (1 − α)/(1 + α) = tanh(1/(2t))
    if rng.uniform() < (0.5 / t).tanh() {
        return Ok(0);
    }
    let success = -(-1.0 / t).exp_m1();
    let geometric = Geometric::new(success)
        .map_err(|e| Error::InvalidParameter(format!("geometric({success}): {e}")))?;
    let magnitude = geometric.sample(rng) as i64 + 1;
    Ok(if rng.fair_coin() { -magnitude } else { magnitude })
}

/// Draws from the discrete Gaussian, `Pr[X = x] ∝ e^{-x²/(2σ²)}` on the integers.
pub fn sample_discrete_gaussian(sigma: f64, rng: &mut RngStream) -> Result<i64> {
    discrete_gaussian_with_attempts(sigma, rng).map(|(z, _)| z)
}

/// Returns the sample together with the number of rejection-loop rounds used.
pub(crate) fn discrete_gaussian_with_attempts(
    sigma: f64,
    rng: &mut RngStream,
) -> Result<(i64, usize)> {
    check_positive("gaussian sigma", sigma)?;
    let t = sigma.floor() as u64 + 1;
    let tf = t as f64;
    let sigma2 = sigma * sigma;
    for attempt in 1..=MAX_ATTEMPTS {
        let u = rng.below(t);
        if !bernoulli_exp(u as f64 / tf, rng)? {
            continue;
        }
        let mut v = 0u64;
        while bernoulli_exp(1.0, rng)? {
            v += 1;
        }
        let negative = rng.fair_coin();
        if negative && u == 0 && v == 0 {
            continue;
        }
        let magnitude = (u + t * v) as i64;
        let gamma = (magnitude as f64 - sigma2 / tf).powi(2) / (2.0 * sigma2);
        if bernoulli_exp(gamma, rng)? {
            let z = if negative { -magnitude } else { magnitude };
            return Ok((z, attempt));
        }
    }
    Err(Error::SamplerExhausted(MAX_ATTEMPTS))
}

/// Per-query noise distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseScale {
    Laplace { t: f64 },
    Gaussian { sigma: f64 },
}

impl NoiseScale {
    pub fn laplace(t: f64) -> Result<Self> {
        check_positive("laplace scale", t)?;
        Ok(NoiseScale::Laplace { t })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        check_positive("gaussian sigma", sigma)?;
        Ok(NoiseScale::Gaussian { sigma })
    }

    /// `t` or `σ`.
    pub fn value(&self) -> f64 {
        match *self {
            NoiseScale::Laplace { t } => t,
            NoiseScale::Gaussian { sigma } => sigma,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<i64> {
        match *self {
            NoiseScale::Laplace { t } => sample_discrete_laplace(t, rng),
            NoiseScale::Gaussian { sigma } => sample_discrete_gaussian(sigma, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_zero_is_certain() {
        let mut rng = RngStream::new(1);
        assert!((0..1000).all(|_| bernoulli_exp(0.0, &mut rng).unwrap()));
    }

    #[test]
    fn negative_or_nan_gamma_rejected() {
        let mut rng = RngStream::new(1);
        assert!(bernoulli_exp(-0.1, &mut rng).is_err());
        assert!(bernoulli_exp(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn bernoulli_exp_ln2_is_fair() {
        let mut rng = RngStream::new(5);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| bernoulli_exp(2f64.ln(), &mut rng).unwrap())
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.003);
    }

    #[test]
    fn bernoulli_exp_above_one() {
        let mut rng = RngStream::new(9);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| bernoulli_exp(2.5, &mut rng).unwrap())
            .count();
        assert!((hits as f64 / n as f64 - (-2.5f64).exp()).abs() < 0.002);
    }

    #[test]
    fn nonpositive_scales_rejected() {
        let mut rng = RngStream::new(1);
        assert!(sample_discrete_laplace(0.0, &mut rng).is_err());
        assert!(sample_discrete_laplace(-1.0, &mut rng).is_err());
        assert!(sample_discrete_gaussian(0.0, &mut rng).is_err());
        assert!(NoiseScale::gaussian(-2.0).is_err());
        assert!(NoiseScale::laplace(f64::INFINITY).is_err());
    }

    #[test]
    fn laplace_zero_atom_and_ratio() {
        let mut rng = RngStream::new(21);
        let n = 1_000_000;
        let (mut zero, mut one, mut sum) = (0usize, 0usize, 0i64);
        for _ in 0..n {
            let x = sample_discrete_laplace(1.0, &mut rng).unwrap();
            sum += x;
            match x.abs() {
                0 => zero += 1,
                1 => one += 1,
                _ => {}
            }
        }
        let e = std::f64::consts::E;
        let p0 = zero as f64 / n as f64;
        assert!((p0 - (e - 1.0) / (e + 1.0)).abs() < 0.005);
        assert!((one as f64 / zero as f64 - 2.0 / e).abs() < 0.01);
        // variance of Lap_Z(1) is 2α/(1−α)² ≈ 1.84
        let std = (2.0 * (-1.0f64).exp() / (1.0 - (-1.0f64).exp()).powi(2)).sqrt();
        assert!((sum as f64 / n as f64).abs() < 4.0 * std / (n as f64).sqrt());
    }

    #[test]
    fn gaussian_zero_atom_and_ratio() {
        let mut rng = RngStream::new(22);
        let n = 1_000_000;
        let (mut zero, mut one, mut sum) = (0usize, 0usize, 0i64);
        for _ in 0..n {
            let x = sample_discrete_gaussian(1.0, &mut rng).unwrap();
            sum += x;
            match x {
                0 => zero += 1,
                1 => one += 1,
                _ => {}
            }
        }
        let norm: f64 = (-20i32..=20).map(|x| (-(x * x) as f64 / 2.0).exp()).sum();
        assert!((norm - 2.5066).abs() < 1e-4);
        assert!((zero as f64 / n as f64 - 1.0 / norm).abs() < 0.005);
        assert!((one as f64 / zero as f64 - (-0.5f64).exp()).abs() < 0.01);
        assert!((sum as f64 / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn gaussian_rejection_loop_is_short() {
        for sigma in [0.5f64, 1.0, 3.0, 40.0] {
            let mut rng = RngStream::new(sigma.to_bits());
            let draws = 100_000;
            let total: usize = (0..draws)
                .map(|_| discrete_gaussian_with_attempts(sigma, &mut rng).unwrap().1)
                .sum();
            let mean = total as f64 / draws as f64;
            assert!(mean < 100.0, "sigma {sigma}: mean attempts {mean}");
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let draw = |seed| {
            let mut rng = RngStream::new(seed);
            (0..200)
                .map(|i| {
                    if i % 2 == 0 {
                        sample_discrete_gaussian(2.5, &mut rng).unwrap()
                    } else {
                        sample_discrete_laplace(1.5, &mut rng).unwrap()
                    }
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }
}
