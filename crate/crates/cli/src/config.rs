//! Run configuration: a TOML file merged with command-line overrides.

use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use cyclepoint::chain::ChainConfig;
use cyclepoint::hyper::{Hyperparams, Likelihood, SplitAccounting};
use serde::Deserialize;

/// Prior and proposal settings. Unset values keep the defaults shown.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperArgs {
    /// Poisson mean of the change-point count [default: 2]
    #[arg(long)]
    pub lambda_s: Option<f64>,
    /// Poisson mean of the frequency count per segment [default: 2]
    #[arg(long)]
    pub lambda_omega: Option<f64>,
    /// Largest number of change-points [default: 15]
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Largest number of frequencies per segment [default: 10]
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Prior variance of the linear coefficients [default: 10000]
    #[arg(long)]
    pub sigma2_beta: Option<f64>,
    /// Inverse-Gamma prior shape parameter nu0 [default: 0.01]
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Inverse-Gamma prior scale parameter gamma0 [default: 0.01]
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Minimum change-point spacing in samples [default: 20]
    #[arg(long)]
    pub psi_s: Option<f64>,
    /// Minimum frequency spacing [default: 2/n]
    #[arg(long)]
    pub psi_omega: Option<f64>,
    /// Upper bound of new frequencies [default: 0.25]
    #[arg(long)]
    pub phi_omega: Option<f64>,
    /// Birth/death probability scale c [default: 0.4]
    #[arg(long)]
    pub c: Option<f64>,
    /// Probability of the periodogram frequency proposal [default: 0.2]
    #[arg(long)]
    pub delta_omega: Option<f64>,
    /// Frequency random-walk variance [default: (1/(50 n_j))^2 per segment]
    #[arg(long)]
    pub sigma2_omega: Option<f64>,
    /// Probability of the uniform change-point relocation [default: 0.2]
    #[arg(long)]
    pub delta_s: Option<f64>,
    /// Change-point random-walk variance [default: max(n/200, 5)^2]
    #[arg(long)]
    pub sigma2_s: Option<f64>,
    /// Enforce frequency spacing in within moves [default: true]
    #[arg(long)]
    pub separate_within: Option<bool>,
    /// `gaussian`, or `constant` to sample the prior [default: gaussian]
    #[arg(long, value_parser = parse_likelihood)]
    pub likelihood: Option<Likelihood>,
    /// Split move accounting, `balanced` or `literal` [default: balanced]
    #[arg(long, value_parser = parse_accounting)]
    pub split_accounting: Option<SplitAccounting>,
}

fn parse_likelihood(s: &str) -> Result<Likelihood, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn parse_accounting(s: &str) -> Result<SplitAccounting, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

/// Chain length, thinning, seed and initialization.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainArgs {
    /// Total iterations [default: 20000]
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Iterations discarded before storing [default: 5000]
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every thin-th post-burn-in state [default: 1]
    #[arg(long)]
    pub thin: Option<usize>,
    /// Random seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run segment moves in parallel (output is identical) [default: false]
    #[arg(long)]
    pub parallel_segments: Option<bool>,
    /// Initial number of evenly spaced change-points [default: 0]
    #[arg(long)]
    pub init_k: Option<usize>,
}

/// Layout of the config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub hyper: HyperArgs,
    pub chain: ChainArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

macro_rules! overlay {
    ($target:expr, $flags:expr, $file:expr, [$($field:ident),* $(,)?]) => {
        $(
            if let Some(v) = $flags.$field.clone().or($file.$field.clone()) {
                $target.$field = v;
            }
        )*
    };
}

/// Defaults for length `n`, then the file, then flags.
pub fn resolve_hyper(n: usize, flags: &HyperArgs, file: &HyperArgs) -> Hyperparams {
    let mut h = Hyperparams::for_length(n);
    overlay!(h, flags, file, [
        lambda_s, lambda_omega, k_max, m_max, sigma2_beta, nu0, gamma0, psi_s,
        psi_omega, phi_omega, c, delta_omega, delta_s, sigma2_s, separate_within,
        likelihood, split_accounting,
    ]);
    if let Some(v) = flags.sigma2_omega.or(file.sigma2_omega) {
        h.sigma2_omega = Some(v);
    }
    h
}

pub fn resolve_chain(flags: &ChainArgs, file: &ChainArgs) -> ChainConfig {
    let mut c = ChainConfig::default();
    overlay!(c, flags, file, [iterations, burn_in, thin, seed, parallel_segments, init_k]);
    c
}
