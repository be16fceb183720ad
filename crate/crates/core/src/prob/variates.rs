use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal, Poisson};

use crate::error::{Error, Result};

/// Gamma draw with shape/rate parameterisation.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters must be positive and finite")
        .sample(rng)
}

/// Natural log of a Gamma(shape, 1) draw, accurate for very small shapes.
pub fn sample_ln_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        sample_gamma(rng, shape, 1.0).ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        sample_gamma(rng, shape + 1.0, 1.0).ln() + u.ln() / shape
    }
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b)
        .expect("beta parameters must be positive and finite")
        .sample(rng)
}

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd)
        .expect("normal sd must be finite and non-negative")
        .sample(rng)
}

pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("poisson rate must be finite").sample(rng) as u64
}

/// Dirichlet draw computed in log space, renormalised to sum to one.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::invalid("dirichlet needs at least one concentration"));
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::invalid(format!(
            "dirichlet concentrations must be positive, got {a}"
        )));
    }
    let logs: Vec<f64> = alpha.iter().map(|&a| sample_ln_gamma(rng, a)).collect();
    Ok(normalize_log_weights(&logs))
}

/// exp-normalises log weights into a simplex.
pub fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out
}

/// Index `k` with probability `weights[k] / sum(weights)`.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Result<usize> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!(
            "categorical weights must be finite and non-negative, got {w}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("categorical weights sum to zero"));
    }
    Ok(categorical_with_total(rng, weights, total))
}

/// Unchecked categorical draw for hot loops; `total` must be the positive weight sum.
pub(crate) fn categorical_with_total<R: Rng + ?Sized>(
    rng: &mut R,
    weights: &[f64],
    total: f64,
) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if target < acc {
                return k;
            }
        }
    }
    // rounding left target at or above the accumulated sum
    last_positive
}

/// Categorical draw from unnormalised log weights; overwrites `logs` with scratch values.
pub(crate) fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, logs: &mut [f64]) -> usize {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    categorical_with_total(rng, logs, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::RngStream;

    const DRAWS: usize = 100_000;

    fn moments(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (mean, var, m4)
    }

    fn check_moments(xs: &[f64], mean: f64, var: f64) {
        let n = xs.len() as f64;
        let (m, v, m4) = moments(xs);
        let se_mean = (v / n).sqrt();
        let se_var = ((m4 - v * v) / n).sqrt();
        assert!((m - mean).abs() < 4.0 * se_mean, "mean {m} vs {mean}");
        assert!((v - var).abs() < 4.0 * se_var, "var {v} vs {var}");
    }

    #[test]
    fn gamma_moments() {
        let mut rng = RngStream::new(1, 0);
        let (shape, rate) = (2.5, 4.0);
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_gamma(&mut rng, shape, rate)).collect();
        check_moments(&xs, shape / rate, shape / (rate * rate));
    }

    #[test]
    fn beta_moments() {
        let mut rng = RngStream::new(2, 0);
        let (a, b) = (2.0, 5.0);
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_beta(&mut rng, a, b)).collect();
        let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        check_moments(&xs, a / (a + b), var);
    }

    #[test]
    fn normal_moments() {
        let mut rng = RngStream::new(3, 0);
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_normal(&mut rng, -1.5, 2.0)).collect();
        check_moments(&xs, -1.5, 4.0);
    }

    #[test]
    fn poisson_moments() {
        let mut rng = RngStream::new(4, 0);
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_poisson(&mut rng, 3.7) as f64).collect();
        check_moments(&xs, 3.7, 3.7);
    }

    #[test]
    fn small_shape_log_gamma_matches_mean() {
        // E[G] = shape for Gamma(shape, 1)
        let mut rng = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_ln_gamma(&mut rng, 0.3).exp()).collect();
        check_moments(&xs, 0.3, 0.3);
    }

    #[test]
    fn dirichlet_concentration_limit() {
        let mut rng = RngStream::new(6, 0);
        let x = sample_dirichlet(&mut rng, &[1e9, 1e9]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-4 && (x[1] - 0.5).abs() < 1e-4);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_flat_mean() {
        let mut rng = RngStream::new(7, 0);
        let mut sums = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..DRAWS {
            let x = sample_dirichlet(&mut rng, &[1.0, 1.0, 1.0]).unwrap();
            for k in 0..3 {
                sums[k] += x[k];
                sq[k] += x[k] * x[k];
            }
        }
        // Var of Dirichlet(1,1,1) component: (1/3)(2/3)/4
        let se = ((1.0 / 3.0) * (2.0 / 3.0) / 4.0 / DRAWS as f64).sqrt();
        for s in sums {
            assert!((s / DRAWS as f64 - 1.0 / 3.0).abs() < 3.0 * se);
        }
    }

    #[test]
    fn dirichlet_two_one_mean() {
        let mut rng = RngStream::new(8, 0);
        let mean = (0..DRAWS)
            .map(|_| sample_dirichlet(&mut rng, &[2.0, 1.0]).unwrap()[0])
            .sum::<f64>()
            / DRAWS as f64;
        // Beta(2,1): var = 2/(9*4)
        let se = (2.0 / 36.0 / DRAWS as f64).sqrt();
        assert!((mean - 2.0 / 3.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn dirichlet_rejects_nonpositive() {
        let mut rng = RngStream::new(9, 0);
        assert!(sample_dirichlet(&mut rng, &[1.0, 0.0]).is_err());
        assert!(sample_dirichlet(&mut rng, &[-1.0]).is_err());
        assert!(sample_dirichlet(&mut rng, &[]).is_err());
    }

    #[test]
    fn tiny_concentrations_still_give_a_simplex() {
        let mut rng = RngStream::new(10, 0);
        for _ in 0..1000 {
            let x = sample_dirichlet(&mut rng, &[1e-3; 20]).unwrap();
            assert!(x.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn categorical_degenerate() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&mut rng, &[0.0, 5.0, 0.0]).unwrap(), 1);
        }
    }

    #[test]
    fn categorical_uniform_chi_square() {
        let mut rng = RngStream::new(12, 0);
        let mut counts = [0usize; 4];
        for _ in 0..DRAWS {
            counts[sample_categorical(&mut rng, &[1.0; 4]).unwrap()] += 1;
        }
        let expected = DRAWS as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square(3) upper 0.001 quantile
        assert!(chi2 < 16.266, "chi2 = {chi2}");
    }

    #[test]
    fn categorical_three_to_one() {
        let mut rng = RngStream::new(13, 0);
        let hits = (0..DRAWS)
            .filter(|_| sample_categorical(&mut rng, &[3.0, 1.0]).unwrap() == 0)
            .count();
        let freq = hits as f64 / DRAWS as f64;
        let se = (0.75 * 0.25 / DRAWS as f64).sqrt();
        assert!((freq - 0.75).abs() < 3.0 * se);
    }

    #[test]
    fn categorical_rejects_bad_weights() {
        let mut rng = RngStream::new(14, 0);
        assert!(sample_categorical(&mut rng, &[0.0, 0.0]).is_err());
        assert!(sample_categorical(&mut rng, &[1.0, -0.5]).is_err());
        assert!(sample_categorical(&mut rng, &[f64::NAN]).is_err());
    }

    #[test]
    fn log_categorical_survives_underflow() {
        let mut rng = RngStream::new(15, 0);
        let mut logs = vec![-2000.0, -1000.0, -2000.0];
        assert_eq!(sample_log_categorical(&mut rng, &mut logs), 1);
    }
}
