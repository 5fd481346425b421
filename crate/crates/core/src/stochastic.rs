//! Seeded Monte Carlo estimates of the slice load `R = sum A_i`.
//!
//! Allocations follow a single-common-factor Gaussian model
//!
//! ```text
//! A_i = a' + sqrt(c) X_0 + sqrt(sigma^2 - c) X_i
//! ```
//!
//! which has mean `a'`, variance `sigma^2` and pairwise covariance `c` exactly.
//! Replication `r` draws from ChaCha stream `r` of the caller's seed, so any
//! parallel schedule produces the same samples; reductions run in
//! replication order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error(
        "pairwise covariance {cov_a} exceeds variance {sigma_a_sq}; no single-factor model exists"
    )]
    Unrealizable { cov_a: f64, sigma_a_sq: f64 },
    #[error("invalid model field {field}: {reason}")]
    InvalidModel {
        field: &'static str,
        reason: &'static str,
    },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorModel {
    pub a_prime: f64,
    pub sigma_a_sq: f64,
    pub cov_a: f64,
    pub u: usize,
}

impl FactorModel {
    pub fn validate(&self) -> Result<(), StochasticError> {
        if !(self.a_prime >= 0.0 && self.a_prime.is_finite()) {
            return Err(StochasticError::InvalidModel {
                field: "a_prime",
                reason: "must be finite and non-negative",
            });
        }
        if !(self.sigma_a_sq >= 0.0 && self.sigma_a_sq.is_finite()) {
            return Err(StochasticError::InvalidModel {
                field: "sigma_a_sq",
                reason: "must be finite and non-negative",
            });
        }
        if !(self.cov_a >= 0.0) {
            return Err(StochasticError::InvalidModel {
                field: "cov_a",
                reason: "must be non-negative",
            });
        }
        if self.cov_a > self.sigma_a_sq {
            return Err(StochasticError::Unrealizable {
                cov_a: self.cov_a,
                sigma_a_sq: self.sigma_a_sq,
            });
        }
        if self.u == 0 {
            return Err(StochasticError::InvalidModel {
                field: "u",
                reason: "service count must be positive",
            });
        }
        Ok(())
    }

    /// Exact variance of `R` under the model: `u sigma^2 + u (u - 1) c`.
    pub fn load_variance(&self) -> f64 {
        let u = self.u as f64;
        u * self.sigma_a_sq + u * (u - 1.0) * self.cov_a
    }

    pub fn mean_load(&self) -> f64 {
        self.u as f64 * self.a_prime
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Draws one set of `u` correlated relative allocations.
pub fn sample_allocations<R: Rng + ?Sized>(
    model: &FactorModel,
    rng: &mut R,
) -> Result<Vec<f64>, StochasticError> {
    model.validate()?;
    Ok(draw(model, rng))
}

fn draw<R: Rng + ?Sized>(model: &FactorModel, rng: &mut R) -> Vec<f64> {
    let common_scale = model.cov_a.sqrt();
    let own_scale = (model.sigma_a_sq - model.cov_a).sqrt();
    let common: f64 = rng.sample(StandardNormal);
    (0..model.u)
        .map(|_| {
            let own: f64 = rng.sample(StandardNormal);
            model.a_prime + common_scale * common + own_scale * own
        })
        .collect()
}

/// Generator for replication `replication` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Loads `R` for `n_samples` independent replications, in replication order.
pub fn sample_loads(
    model: &FactorModel,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>, StochasticError> {
    model.validate()?;
    Ok((0..n_samples as u64)
        .into_par_iter()
        .map(|r| draw(model, &mut replication_rng(seed, r)).iter().sum())
        .collect())
}

/// Sample variance of the load with the standard error of that variance.
pub fn mc_variance_of_load(
    model: &FactorModel,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, StochasticError> {
    if n_samples < 2 {
        return Err(StochasticError::TooFewSamples {
            min: 2,
            got: n_samples,
        });
    }
    let loads = sample_loads(model, n_samples, seed)?;
    let n = n_samples as f64;
    let mean = loads.iter().sum::<f64>() / n;
    let (m2, m4) = loads.iter().fold((0.0, 0.0), |(m2, m4), &x| {
        let d = x - mean;
        let d2 = d * d;
        (m2 + d2, m4 + d2 * d2)
    });
    let variance = m2 / (n - 1.0);
    let central4 = m4 / n;
    let central2 = m2 / n;
    // Large-sample standard error of the sample variance.
    let std_error = ((central4 - central2 * central2).max(0.0) / n).sqrt();
    Ok(McEstimate {
        mean,
        variance,
        std_error,
        n_samples,
        seed,
    })
}

/// Fraction of replications whose load stays within budget (`R <= 1`).
pub fn mc_sla_probability(
    model: &FactorModel,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, StochasticError> {
    if n_samples < 1 {
        return Err(StochasticError::TooFewSamples {
            min: 1,
            got: n_samples,
        });
    }
    let loads = sample_loads(model, n_samples, seed)?;
    let hits = loads.iter().filter(|&&r| r <= 1.0).count();
    let n = n_samples as f64;
    let p = hits as f64 / n;
    let variance = p * (1.0 - p);
    Ok(McEstimate {
        mean: p,
        variance,
        std_error: (variance / n).sqrt(),
        n_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(u: usize, a_prime: f64, sigma_a_sq: f64, cov_a: f64) -> FactorModel {
        FactorModel {
            a_prime,
            sigma_a_sq,
            cov_a,
            u,
        }
    }

    #[test]
    fn degenerate_model_returns_the_mean() {
        let mut rng = replication_rng(7, 0);
        let values = sample_allocations(&model(5, 0.3, 0.0, 0.0), &mut rng).unwrap();
        assert_eq!(values, vec![0.3; 5]);
    }

    #[test]
    fn unrealizable_covariance_is_rejected() {
        let mut rng = replication_rng(7, 0);
        assert_eq!(
            sample_allocations(&model(4, 0.2, 0.01, 0.02), &mut rng),
            Err(StochasticError::Unrealizable {
                cov_a: 0.02,
                sigma_a_sq: 0.01
            })
        );
    }

    #[test]
    fn variance_of_load_matches_closed_form() {
        let m = model(4, 0.2, 0.01, 0.005);
        assert!((m.load_variance() - 0.1).abs() < 1e-15);
        let est = mc_variance_of_load(&m, 100_000, 11).unwrap();
        assert!((est.variance - 0.1).abs() <= 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn degenerate_variance_is_exactly_zero() {
        let est = mc_variance_of_load(&model(3, 0.25, 0.0, 0.0), 1_000, 1).unwrap();
        assert_eq!(est.variance, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn estimates_are_deterministic_per_seed() {
        let m = model(6, 0.1, 0.02, 0.004);
        let a = mc_variance_of_load(&m, 5_000, 42).unwrap();
        let b = mc_variance_of_load(&m, 5_000, 42).unwrap();
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        let c = mc_variance_of_load(&m, 5_000, 43).unwrap();
        assert_ne!(a.variance.to_bits(), c.variance.to_bits());
    }

    #[test]
    fn sample_count_guards() {
        let m = model(2, 0.1, 0.0, 0.0);
        assert_eq!(
            mc_variance_of_load(&m, 1, 0),
            Err(StochasticError::TooFewSamples { min: 2, got: 1 })
        );
        assert_eq!(
            mc_sla_probability(&m, 0, 0),
            Err(StochasticError::TooFewSamples { min: 1, got: 0 })
        );
    }

    #[test]
    fn sla_probability_deterministic_loads() {
        let under = mc_sla_probability(&model(2, 0.1, 0.0, 0.0), 1_000, 3).unwrap();
        assert_eq!(under.mean, 1.0);
        let over = mc_sla_probability(&model(3, 0.5, 0.0, 0.0), 1_000, 3).unwrap();
        assert_eq!(over.mean, 0.0);
        assert_eq!(over.std_error, 0.0);
    }

    #[test]
    fn sla_probability_respects_cantelli_bound() {
        let m = model(4, 0.2, 0.01, 0.005);
        let est = mc_sla_probability(&m, 100_000, 5).unwrap();
        let bound = crate::capacity::cantelli_lower_bound(m.load_variance(), m.mean_load());
        assert!(
            est.mean >= bound - 3.0 * est.std_error,
            "{est:?} vs {bound}"
        );
    }

    #[test]
    fn moments_match_model() {
        let m = model(3, 0.15, 0.02, 0.008);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n as u64)
            .map(|r| sample_allocations(&m, &mut replication_rng(99, r)).unwrap())
            .collect();
        let nf = n as f64;
        for i in 0..m.u {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / nf;
            let se = (m.sigma_a_sq / nf).sqrt();
            assert!(
                (mean - m.a_prime).abs() <= 4.0 * se,
                "mean of A_{i}: {mean}"
            );
        }
        let mean0 = draws.iter().map(|d| d[0]).sum::<f64>() / nf;
        let mean1 = draws.iter().map(|d| d[1]).sum::<f64>() / nf;
        let products: Vec<f64> = draws
            .iter()
            .map(|d| (d[0] - mean0) * (d[1] - mean1))
            .collect();
        let cov = products.iter().sum::<f64>() / (nf - 1.0);
        let spread = products.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (nf - 1.0);
        let se = (spread / nf).sqrt();
        assert!((cov - m.cov_a).abs() <= 4.0 * se, "cov {cov} se {se}");
    }
}
