//! Prior densities and the birth/death/within move probabilities.

use std::f64::consts::{LN_2, PI};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hyper::Hyperparams;

/// Poisson(lambda) conditioned on `min <= z <= max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPoisson {
    pub lambda: f64,
    pub min: usize,
    pub max: usize,
    log_mass: Vec<f64>,
}

impl TruncatedPoisson {
    pub fn new(lambda: f64, min: usize, max: usize) -> Self {
        assert!(min <= max, "empty truncation range");
        let raw: Vec<f64> = (min..=max)
            .map(|z| z as f64 * lambda.ln() - lambda - ln_gamma(z as f64 + 1.0))
            .collect();
        let peak = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = peak + raw.iter().map(|v| (v - peak).exp()).sum::<f64>().ln();
        Self {
            lambda,
            min,
            max,
            log_mass: raw.into_iter().map(|v| v - log_norm).collect(),
        }
    }

    pub fn contains(&self, z: usize) -> bool {
        (self.min..=self.max).contains(&z)
    }

    pub fn log_pmf(&self, z: usize) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::CountOutOfRange {
                value: z,
                min: self.min,
                max: self.max,
            });
        }
        Ok(self.log_mass[z - self.min])
    }

    pub fn pmf(&self, z: usize) -> Result<f64> {
        self.log_pmf(z).map(f64::exp)
    }

    /// Probabilities of proposing a birth, a death, or a within-model move
    /// from `z`.
    pub fn move_probabilities(&self, z: usize, c: f64) -> Result<MoveProbabilities> {
        if !(c > 0.0 && c <= 0.5) {
            return Err(Error::InvalidHyperparams(format!(
                "c must lie in (0, 0.5], got {c}"
            )));
        }
        let here = self.log_pmf(z)?;
        let birth = if z < self.max {
            c * (self.log_pmf(z + 1)? - here).exp().min(1.0)
        } else {
            0.0
        };
        let death = if z > self.min {
            c * (self.log_pmf(z - 1)? - here).exp().min(1.0)
        } else {
            0.0
        };
        Ok(MoveProbabilities {
            birth,
            death,
            within: 1.0 - birth - death,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbabilities {
    pub birth: f64,
    pub death: f64,
    pub within: f64,
}

/// Which move a uniform draw selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveChoice {
    Birth,
    Death,
    Within,
}

impl MoveProbabilities {
    pub fn choose(&self, u: f64) -> MoveChoice {
        if u < self.birth {
            MoveChoice::Birth
        } else if u < self.birth + self.death {
            MoveChoice::Death
        } else {
            MoveChoice::Within
        }
    }
}

/// The two dimension priors: change-point count on `0..=k_max` and
/// per-segment frequency count on `1..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionPriors {
    pub k: TruncatedPoisson,
    pub m: TruncatedPoisson,
}

impl DimensionPriors {
    pub fn new(hyper: &Hyperparams) -> Self {
        Self {
            k: TruncatedPoisson::new(hyper.lambda_s, 0, hyper.k_max),
            m: TruncatedPoisson::new(hyper.lambda_omega, 1, hyper.m_max),
        }
    }
}

/// Log truncated-Poisson mass of a dimension count.
pub fn log_prior_count(z: usize, lambda: f64, z_min: usize, z_max: usize) -> Result<f64> {
    TruncatedPoisson::new(lambda, z_min, z_max).log_pmf(z)
}

pub fn move_probabilities(
    z: usize,
    lambda: f64,
    z_min: usize,
    z_max: usize,
    c: f64,
) -> Result<MoveProbabilities> {
    TruncatedPoisson::new(lambda, z_min, z_max).move_probabilities(z, c)
}

/// Log density of change-point locations given their count: the even order
/// statistics of `2k + 1` uniforms on `(1, n)`.
pub fn log_prior_changepoints(s: &[f64], n: usize) -> f64 {
    let k = s.len();
    let span = n as f64 - 1.0;
    let mut prev = 1.0;
    let mut log_gaps = 0.0;
    for &x in s.iter().chain(std::iter::once(&(n as f64))) {
        let gap = x - prev;
        if !(gap > 0.0) {
            return f64::NEG_INFINITY;
        }
        log_gaps += gap.ln();
        prev = x;
    }
    let odd = (2 * k + 1) as f64;
    ln_gamma(odd + 1.0) - odd * span.ln() + log_gaps
}

/// Log density of independent Uniform(0, 0.5) frequencies.
pub fn log_prior_omega(omega: &[f64]) -> f64 {
    if omega.iter().all(|&w| w > 0.0 && w < 0.5) {
        omega.len() as f64 * LN_2
    } else {
        f64::NEG_INFINITY
    }
}

/// Log density of the sorted frequency vector: the order statistics of the
/// uniform prior, which carries an extra `m!`.
pub fn log_prior_omega_sorted(omega: &[f64]) -> f64 {
    log_prior_omega(omega) + ln_gamma(omega.len() as f64 + 1.0)
}

/// Log density of `N(0, sigma2_beta I)`.
pub fn log_prior_beta(beta: &[f64], sigma2_beta: f64) -> f64 {
    let d = beta.len() as f64;
    let ss: f64 = beta.iter().map(|b| b * b).sum();
    -0.5 * d * (2.0 * PI * sigma2_beta).ln() - ss / (2.0 * sigma2_beta)
}

/// Log Inverse-Gamma density with the given shape and scale.
pub fn log_inverse_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Log Inverse-Gamma(nu0 / 2, gamma0 / 2) density.
pub fn log_prior_sigma2(sigma2: f64, nu0: f64, gamma0: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    Ok(log_inverse_gamma(sigma2, nu0 / 2.0, gamma0 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_mass_ratio_and_normalization() {
        let p = TruncatedPoisson::new(2.0, 0, 15);
        let ratio = (p.log_pmf(0).unwrap() - p.log_pmf(2).unwrap()).exp();
        assert!((ratio - 0.5).abs() < 1e-12);
        let q = TruncatedPoisson::new(2.0, 1, 10);
        let total: f64 = (1..=10).map(|m| q.pmf(m).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(q.log_pmf(0).is_err());
        assert!(q.log_pmf(11).is_err());
    }

    #[test]
    fn count_mass_matches_enumeration() {
        // lambda = 2 on 1..=10, enumerated directly.
        let mut fact = 1.0;
        let mut raw = Vec::new();
        for m in 1..=10u32 {
            fact *= m as f64;
            raw.push((-2.0f64).exp() * 2f64.powi(m as i32) / fact);
        }
        let norm: f64 = raw.iter().sum();
        let expect = (raw[2] / norm).ln();
        assert!((log_prior_count(3, 2.0, 1, 10).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn move_probability_examples() {
        let mp = move_probabilities(1, 2.0, 0, 15, 0.4).unwrap();
        assert!((mp.birth - 0.4).abs() < 1e-12);
        assert!((mp.death - 0.2).abs() < 1e-12);
        assert!((mp.within - 0.4).abs() < 1e-12);
        let top = move_probabilities(15, 2.0, 0, 15, 0.4).unwrap();
        assert_eq!(top.birth, 0.0);
        let bottom = move_probabilities(1, 2.0, 1, 10, 0.4).unwrap();
        assert_eq!(bottom.death, 0.0);
        assert!(move_probabilities(1, 2.0, 0, 15, 0.6).is_err());
    }

    #[test]
    fn move_choice_partitions_unit_interval() {
        let mp = MoveProbabilities {
            birth: 0.2,
            death: 0.3,
            within: 0.5,
        };
        assert_eq!(mp.choose(0.1), MoveChoice::Birth);
        assert_eq!(mp.choose(0.45), MoveChoice::Death);
        assert_eq!(mp.choose(0.9), MoveChoice::Within);
    }

    #[test]
    fn changepoint_prior_examples() {
        assert!(log_prior_changepoints(&[], 57).abs() < 1e-12);
        assert!((log_prior_changepoints(&[2.0], 3) - 0.75f64.ln()).abs() < 1e-12);
        assert_eq!(log_prior_changepoints(&[5.0, 4.0], 10), f64::NEG_INFINITY);
        assert_eq!(log_prior_changepoints(&[11.0], 10), f64::NEG_INFINITY);
    }

    #[test]
    fn omega_and_beta_priors() {
        assert!((log_prior_omega(&[0.1]) - LN_2).abs() < 1e-15);
        assert!((log_prior_omega(&[0.1, 0.2]) - 2.0 * LN_2).abs() < 1e-15);
        assert_eq!(log_prior_omega(&[0.6]), f64::NEG_INFINITY);
        assert!((log_prior_omega_sorted(&[0.1, 0.2, 0.3]) - 3.0 * LN_2 - 6f64.ln()).abs() < 1e-12);
        assert!((log_prior_beta(&[0.0, 0.0], 1.0) + (2.0 * PI).ln()).abs() < 1e-12);
        let d = 6;
        let zero = vec![0.0; d];
        let diff = log_prior_beta(&zero, 4.0) - log_prior_beta(&zero, 1.0);
        assert!((diff + 0.5 * d as f64 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sigma2_prior() {
        assert!((log_prior_sigma2(1.0, 2.0, 2.0).unwrap() + 1.0).abs() < 1e-12);
        assert!(log_prior_sigma2(0.0, 2.0, 2.0).is_err());
        // mode at scale / (shape + 1)
        let (shape, scale) = (3.0, 2.0);
        let mode = scale / (shape + 1.0);
        let f = |x: f64| log_inverse_gamma(x, shape, scale);
        assert!(f(mode) > f(mode * 1.01) && f(mode) > f(mode * 0.99));
    }
}
