//! Rating rule of the synthetic stub model used for hermetic runs.

use alloc::string::String;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::hash::ContentHasher;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StubParams {
    pub weight: f64,
    pub center: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for StubParams {
    fn default() -> Self {
        Self { weight: 1.0, center: 0.0, noise_sigma: 0.0, seed: 0 }
    }
}

/// Standard normal draw that depends only on `(seed, key)`.
pub fn keyed_normal(seed: u64, key: &str) -> f64 {
    let bytes = ContentHasher::new().field(&seed.to_le_bytes()).str(key).finish_bytes();
    let mut rng = ChaCha8Rng::from_seed(bytes);
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / ((1u64 << 53) as f64 + 1.0));
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// `9.9 * sigmoid(weight * (signal - center) + sigma * noise)`, in `[0, 9.9]`.
pub fn stub_rating(params: &StubParams, signal: f64, key: &str) -> f64 {
    let noise = if params.noise_sigma == 0.0 { 0.0 } else { params.noise_sigma * keyed_normal(params.seed, key) };
    let z = params.weight * (signal - params.center) + noise;
    (9.9 / (1.0 + libm::exp(-z))).clamp(0.0, 9.9)
}

/// Answer text in the requested format with one decimal.
pub fn answer_text(rating: f64) -> String {
    alloc::format!("My answer is {:.1}.", rating.clamp(0.0, 9.9))
}

/// First-digit distribution whose expected value is `min(rating, 9)`:
/// mass splits between the two digits bracketing the rating.
pub fn first_digit_distribution(rating: f64) -> [f64; 10] {
    let r = rating.clamp(0.0, 9.0);
    let lo = libm::floor(r) as usize;
    let frac = r - lo as f64;
    let mut p = [0.0; 10];
    p[lo] = 1.0 - frac;
    if frac > 0.0 {
        p[lo + 1] = frac;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_keyed() {
        assert_eq!(keyed_normal(1, "a"), keyed_normal(1, "a"));
        assert_ne!(keyed_normal(1, "a"), keyed_normal(1, "b"));
        assert_ne!(keyed_normal(1, "a"), keyed_normal(2, "a"));
    }

    #[test]
    fn noise_moments() {
        let n = 20_000;
        let draws: alloc::vec::Vec<f64> = (0..n).map(|i| keyed_normal(7, &alloc::format!("{i}"))).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn rating_is_monotone_without_noise() {
        let p = StubParams { weight: 2.0, center: 0.5, noise_sigma: 0.0, seed: 0 };
        assert!((stub_rating(&p, 0.5, "x") - 4.95).abs() < 1e-12);
        assert!(stub_rating(&p, 0.1, "x") < stub_rating(&p, 0.2, "x"));
        assert_eq!(answer_text(9.87), "My answer is 9.9.");
        assert_eq!(answer_text(0.04), "My answer is 0.0.");
    }

    #[test]
    fn digit_distribution_expectation() {
        for r in [0.0, 0.3, 4.25, 8.999, 9.0, 9.7] {
            let p = first_digit_distribution(r);
            let ev: f64 = p.iter().enumerate().map(|(d, q)| d as f64 * q).sum();
            assert!((ev - r.min(9.0)).abs() < 1e-12, "{r}");
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
