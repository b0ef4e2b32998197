use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which likelihood the sampler targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Likelihood {
    /// Gaussian segment likelihood.
    #[default]
    Gaussian,
    /// Likelihood fixed at a constant, so the chain samples the prior. Used to
    /// validate the trans-dimensional moves.
    Constant,
}

/// Bookkeeping used for the frequency blocks in change-point birth/death.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitAccounting {
    /// The copied child's `(m, omega)` prior is matched by the reverse move's
    /// choice of survivor, so neither enters the ratio. Recovers the
    /// change-point prior exactly when the likelihood is constant.
    #[default]
    Balanced,
    /// Include every child's `(m, omega)` prior plus the `1/2` survivor
    /// choice, term for term.
    Literal,
}

/// Prior and proposal constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Poisson mean for the number of change-points.
    pub lambda_s: f64,
    /// Poisson mean for the number of frequencies per segment.
    pub lambda_omega: f64,
    pub k_max: usize,
    pub m_max: usize,
    /// Prior variance of every linear coefficient.
    pub sigma2_beta: f64,
    /// Inverse-Gamma(nu0 / 2, gamma0 / 2) prior on residual variances.
    pub nu0: f64,
    pub gamma0: f64,
    /// Minimum spacing between change-points, in samples.
    pub psi_s: f64,
    /// Minimum spacing between frequencies, in cycles per sample.
    pub psi_omega: f64,
    /// Upper bound of the frequency birth proposal.
    pub phi_omega: f64,
    /// Scale of the birth/death move probabilities.
    pub c: f64,
    /// Weight of the periodogram proposal in the frequency within-move.
    pub delta_omega: f64,
    /// Random-walk variance for frequencies. `None` uses `(1 / (50 n_j))^2`
    /// with `n_j` the segment length.
    pub sigma2_omega: Option<f64>,
    /// Weight of the uniform proposal in the change-point within-move.
    pub delta_s: f64,
    /// Random-walk variance for change-point relocation.
    pub sigma2_s: f64,
    /// Enforce `psi_omega` separation on within-move frequency proposals.
    pub separate_within: bool,
    pub likelihood: Likelihood,
    pub split_accounting: SplitAccounting,
}

impl Hyperparams {
    /// Defaults for a series of length `n`.
    pub fn for_length(n: usize) -> Self {
        let sigma_s = (n as f64 / 200.0).max(5.0);
        Self {
            lambda_s: 2.0,
            lambda_omega: 2.0,
            k_max: 15,
            m_max: 10,
            sigma2_beta: 1e4,
            nu0: 0.01,
            gamma0: 0.01,
            psi_s: 20.0,
            psi_omega: 2.0 / n as f64,
            phi_omega: 0.25,
            c: 0.4,
            delta_omega: 0.2,
            sigma2_omega: None,
            delta_s: 0.2,
            sigma2_s: sigma_s * sigma_s,
            separate_within: true,
            likelihood: Likelihood::Gaussian,
            split_accounting: SplitAccounting::Balanced,
        }
    }

    /// Random-walk variance for a segment of `len` observations.
    pub fn rw_omega_variance(&self, len: usize) -> f64 {
        self.sigma2_omega.unwrap_or_else(|| {
            let step = 1.0 / (50.0 * len as f64);
            step * step
        })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparams(msg));
        let positive = [
            ("lambda_s", self.lambda_s),
            ("lambda_omega", self.lambda_omega),
            ("sigma2_beta", self.sigma2_beta),
            ("nu0", self.nu0),
            ("gamma0", self.gamma0),
            ("sigma2_s", self.sigma2_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if let Some(v) = self.sigma2_omega {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("sigma2_omega must be positive, got {v}"));
            }
        }
        if !(self.c > 0.0 && self.c <= 0.5) {
            return bad(format!("c must lie in (0, 0.5], got {}", self.c));
        }
        if self.m_max < 1 {
            return bad("m_max must be at least 1".into());
        }
        if !(self.psi_omega > 1.0 / n as f64 && self.psi_omega < 0.5) {
            return bad(format!(
                "psi_omega must exceed 1/n = {} and stay below 0.5, got {}",
                1.0 / n as f64,
                self.psi_omega
            ));
        }
        if !(self.phi_omega > 0.0 && self.phi_omega <= 0.5) {
            return bad(format!("phi_omega must lie in (0, 0.5], got {}", self.phi_omega));
        }
        if !(self.psi_s.is_finite() && self.psi_s >= 0.0) {
            return bad(format!("psi_s must be non-negative, got {}", self.psi_s));
        }
        for (name, v) in [("delta_omega", self.delta_omega), ("delta_s", self.delta_s)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let h = Hyperparams::for_length(900);
        h.validate(900).unwrap();
        assert_eq!(h.sigma2_s, 25.0);
        assert_eq!(Hyperparams::for_length(4000).sigma2_s, 400.0);
        assert!((h.rw_omega_variance(300) - (1.0 / 15000.0f64).powi(2)).abs() < 1e-20);
    }

    #[test]
    fn rejects_invalid_constants() {
        let mut h = Hyperparams::for_length(100);
        h.c = 0.6;
        assert!(h.validate(100).is_err());
        let mut h = Hyperparams::for_length(100);
        h.psi_omega = 0.005;
        assert!(h.validate(100).is_err());
        let mut h = Hyperparams::for_length(100);
        h.delta_s = 1.5;
        assert!(h.validate(100).is_err());
    }
}
