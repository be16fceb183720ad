use rand::Rng;

use crate::error::{Error, Result};
use crate::prob::{sample_beta, sample_gamma};

/// Mixture weights `pi_k = beta_k * prod_{l<k} (1 - beta_l)`; the last fraction must be 1.
pub fn stick_breaking(betas: &[f64]) -> Result<Vec<f64>> {
    let Some(&last) = betas.last() else {
        return Err(Error::invalid("stick-breaking needs at least one fraction"));
    };
    if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::invalid(format!("stick fraction {b} outside [0, 1]")));
    }
    if last != 1.0 {
        return Err(Error::invalid(format!("last stick fraction is {last}, must be 1")));
    }
    let mut pi = Vec::with_capacity(betas.len());
    let mut remaining = 1.0;
    for &b in betas {
        pi.push(b * remaining);
        remaining *= 1.0 - b;
    }
    Ok(pi)
}

/// Clamp applied to stick fractions before taking `ln(1 - beta)`.
pub const STICK_CLAMP: f64 = 1.0 - 1e-12;

/// Conjugate update of the truncated stick fractions and DP concentration given
/// per-component occupancy counts.
///
/// Fractions: `beta_k ~ Beta(1 + n_k, alpha + sum_{l>k} n_l)` for `k < K`, `beta_K = 1`.
/// Concentration: `alpha ~ Gamma(a + K - 1, b - sum_{k<K} ln(1 - beta_k))`.
/// Returns `(beta, pi, alpha)`.
pub(crate) fn update_sticks<R: Rng + ?Sized>(
    rng: &mut R,
    occupancy: &[usize],
    alpha: f64,
    a_alpha: f64,
    b_alpha: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let k = occupancy.len();
    let mut beta = vec![1.0; k];
    let mut tail: usize = occupancy.iter().sum();
    for c in 0..k.saturating_sub(1) {
        tail -= occupancy[c];
        beta[c] = sample_beta(rng, 1.0 + occupancy[c] as f64, alpha + tail as f64);
    }
    let pi = stick_breaking(&beta).expect("fractions in [0, 1] with last = 1");
    let log_remaining: f64 = beta[..k.saturating_sub(1)]
        .iter()
        .map(|&b| (1.0 - b.min(STICK_CLAMP)).ln())
        .sum();
    let alpha = sample_gamma(rng, a_alpha + (k as f64) - 1.0, b_alpha - log_remaining)
        .max(f64::MIN_POSITIVE);
    (beta, pi, alpha)
}

/// Draws stick fractions from their Beta(1, alpha) prior, last fixed at 1.
pub(crate) fn prior_sticks<R: Rng + ?Sized>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    let mut beta: Vec<f64> = (0..k).map(|_| sample_beta(rng, 1.0, alpha)).collect();
    beta[k - 1] = 1.0;
    beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_stick() {
        assert_eq!(stick_breaking(&[1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn halves() {
        assert_eq!(stick_breaking(&[0.5, 0.5, 1.0]).unwrap(), vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn all_mass_in_last() {
        let pi = stick_breaking(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(pi, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_invalid() {
        assert!(stick_breaking(&[0.5, 0.9]).is_err());
        assert!(stick_breaking(&[1.5, 1.0]).is_err());
        assert!(stick_breaking(&[-0.1, 1.0]).is_err());
        assert!(stick_breaking(&[]).is_err());
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(mut betas in proptest::collection::vec(0.0f64..=1.0, 0..60)) {
            betas.push(1.0);
            let pi = stick_breaking(&betas).unwrap();
            prop_assert!(pi.iter().all(|&p| p >= 0.0));
            prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
