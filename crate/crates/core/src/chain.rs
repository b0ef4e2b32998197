//! The sampler driver: each iteration runs one move on every segment, then
//! one change-point move.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::changepoint_move;
use crate::error::{Error, Result};
use crate::hyper::Hyperparams;
use crate::model::{
    changepoints_admissible, min_segment_len, segment_bounds, total_loglik, ModelState,
    SegmentParams, TimeSeries,
};
use crate::priors::DimensionPriors;
use crate::segment::{
    beta_conditional_for, segment_move, sigma2_conditional_for, MoveKind, MoveOutcome, SegmentData,
};
use crate::spectral::{q1_sample, PeriodogramCache};

/// Stream ordinal reserved for the change-point move.
const CHANGEPOINT_STREAM: u64 = 0xFFFF;

/// Run length, thinning, seed and initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Run the segment moves of an iteration on the rayon pool.
    pub parallel_segments: bool,
    /// Initial number of change-points, placed evenly unless
    /// `init_changepoints` is given.
    pub init_k: usize,
    pub init_changepoints: Option<Vec<f64>>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 1,
            seed: 1,
            parallel_segments: false,
            init_k: 0,
            init_changepoints: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.burn_in > self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn_in {} exceeds iterations {}",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }

    /// Number of stored samples, `floor((iterations - burn_in) / thin)`.
    pub fn sample_count(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Attempts and acceptances of one move kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCount {
    pub attempts: u64,
    pub accepted: u64,
}

impl MoveCount {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

/// Acceptance counters per move kind. Gibbs steps are not counted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceCounts {
    counts: [MoveCount; 8],
}

impl AcceptanceCounts {
    fn slot(kind: MoveKind) -> usize {
        MoveKind::ALL
            .iter()
            .position(|&k| k == kind)
            .expect("every kind is listed")
    }

    pub fn record(&mut self, outcome: &MoveOutcome) {
        let c = &mut self.counts[Self::slot(outcome.kind)];
        c.attempts += 1;
        c.accepted += outcome.accepted as u64;
    }

    pub fn add(&mut self, kind: MoveKind, attempts: u64, accepted: u64) {
        let c = &mut self.counts[Self::slot(kind)];
        c.attempts += attempts;
        c.accepted += accepted;
    }

    pub fn get(&self, kind: MoveKind) -> MoveCount {
        self.counts[Self::slot(kind)]
    }

    fn pooled(&self, pred: impl Fn(MoveKind) -> bool) -> MoveCount {
        MoveKind::ALL
            .iter()
            .filter(|&&k| pred(k))
            .fold(MoveCount::default(), |acc, &k| {
                let c = self.get(k);
                MoveCount {
                    attempts: acc.attempts + c.attempts,
                    accepted: acc.accepted + c.accepted,
                }
            })
    }

    /// Pooled frequency steps of the segment within move.
    pub fn segment_within(&self) -> MoveCount {
        self.pooled(MoveKind::is_segment_within)
    }

    /// As [`segment_within`](Self::segment_within) plus the coefficient step.
    pub fn segment_within_with_beta(&self) -> MoveCount {
        self.pooled(MoveKind::is_segment_within_with_beta)
    }

    /// Every Metropolis-Hastings step of every kind.
    pub fn overall(&self) -> MoveCount {
        self.pooled(|_| true)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    /// Stored states after burn-in and thinning.
    pub samples: Vec<ModelState>,
    /// Zero-based iteration of each stored state.
    pub sample_iterations: Vec<usize>,
    /// Log-likelihood of the state at the end of every iteration.
    pub loglik: Vec<f64>,
    pub acceptance: AcceptanceCounts,
}

/// Deterministic generator for a `(iteration, ordinal)` pair. ChaCha streams
/// under one key are independent, so results do not depend on how work is
/// scheduled.
pub fn substream(seed: u64, iteration: u64, ordinal: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 16) | (ordinal & 0xFFFF));
    rng
}

/// Initial state: `k` change-points and one frequency per segment drawn from
/// its periodogram, then coefficients and variance from their conditionals.
pub fn init_state(
    ts: &TimeSeries,
    hyper: &Hyperparams,
    config: &ChainConfig,
) -> Result<ModelState> {
    let n = ts.len();
    let s = match &config.init_changepoints {
        Some(s) => s.clone(),
        None => {
            let k = config.init_k;
            (1..=k)
                .map(|j| 1.0 + j as f64 * (n as f64 - 1.0) / (k + 1) as f64)
                .collect()
        }
    };
    if s.len() > hyper.k_max || !changepoints_admissible(&s, n, hyper.psi_s) {
        return Err(Error::InfeasibleInit(format!(
            "change-points {s:?} with psi_s = {} on a series of length {n}",
            hyper.psi_s
        )));
    }
    let mut segments = Vec::with_capacity(s.len() + 1);
    let mut cache = PeriodogramCache::new();
    for (j, b) in segment_bounds(&s, n).into_iter().enumerate() {
        if b.len() < min_segment_len(1) {
            return Err(Error::InfeasibleInit(format!(
                "segment {j} has {} observations",
                b.len()
            )));
        }
        let mut rng = substream(config.seed, 0, j as u64);
        let data = SegmentData::from_bounds(ts, b);
        let pg = cache.get_or_compute(b, data.y);
        let omega = match q1_sample(&pg, &mut rng) {
            Ok(w) => w,
            Err(Error::DegeneratePeriodogram) => loop {
                let w = rng.random::<f64>() * 0.5;
                if w > 0.0 {
                    break w;
                }
            },
            Err(e) => return Err(e),
        };
        let mean = data.y.iter().sum::<f64>() / data.len() as f64;
        let var = data.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / data.len() as f64;
        let start_var = if var > 0.0 { var } else { 1.0 };
        let omega = vec![omega];
        let beta = beta_conditional_for(&data, &omega, start_var, hyper)?.sample(&mut rng);
        let sigma2 = sigma2_conditional_for(&data, &omega, &beta, hyper).sample(&mut rng);
        segments.push(SegmentParams::new(omega, beta, sigma2)?);
    }
    let state = ModelState {
        changepoints: s,
        segments,
    };
    state.validate(n, hyper.psi_s, hyper.psi_omega)?;
    Ok(state)
}

fn check_invariants(
    state: &ModelState,
    n: usize,
    hyper: &Hyperparams,
    iteration: usize,
) -> Result<()> {
    let psi = if hyper.separate_within {
        hyper.psi_omega
    } else {
        0.0
    };
    state.validate(n, hyper.psi_s, psi).map_err(|e| Error::InvariantViolation {
        iteration,
        reason: e.to_string(),
        state: serde_json::to_string(state).unwrap_or_else(|_| format!("{state:?}")),
    })
}

/// Runs the sampler from [`init_state`].
pub fn run_chain(ts: &TimeSeries, hyper: &Hyperparams, config: &ChainConfig) -> Result<ChainOutput> {
    let init = init_state(ts, hyper, config)?;
    run_chain_from(ts, hyper, config, init)
}

/// Runs the sampler from a given state.
pub fn run_chain_from(
    ts: &TimeSeries,
    hyper: &Hyperparams,
    config: &ChainConfig,
    init: ModelState,
) -> Result<ChainOutput> {
    hyper.validate(ts.len())?;
    config.validate()?;
    let n = ts.len();
    check_invariants(&init, n, hyper, 0)?;
    let priors = DimensionPriors::new(hyper);
    let mut state = init;
    let mut cache = PeriodogramCache::new();
    let mut out = ChainOutput {
        samples: Vec::with_capacity(config.sample_count()),
        sample_iterations: Vec::with_capacity(config.sample_count()),
        loglik: Vec::with_capacity(config.iterations),
        acceptance: AcceptanceCounts::default(),
    };

    for it in 0..config.iterations {
        let bounds = state.bounds(n);
        cache.retain(&bounds);
        let pgs: Vec<_> = bounds
            .iter()
            .map(|&b| cache.get_or_compute(b, ts.slice(b)))
            .collect();
        let step = |j: usize| {
            let mut rng = substream(config.seed, it as u64 + 1, j as u64);
            let data = SegmentData::from_bounds(ts, bounds[j]);
            segment_move(&state.segments[j], &data, &pgs[j], hyper, &priors, &mut rng)
        };
        let results: Vec<Result<(SegmentParams, Vec<MoveOutcome>)>> = if config.parallel_segments {
            (0..bounds.len()).into_par_iter().map(step).collect()
        } else {
            (0..bounds.len()).map(step).collect()
        };
        for (j, r) in results.into_iter().enumerate() {
            let (seg, outcomes) = r?;
            for o in &outcomes {
                out.acceptance.record(o);
            }
            state.segments[j] = seg;
        }

        let mut rng = substream(config.seed, it as u64 + 1, CHANGEPOINT_STREAM);
        let (next, outcome) = changepoint_move(&state, ts, hyper, &priors, &mut rng)?;
        if let Some(o) = outcome {
            out.acceptance.record(&o);
        }
        state = next;

        check_invariants(&state, n, hyper, it)?;
        out.loglik.push(total_loglik(&state, ts)?);
        if it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0 {
            out.samples.push(state.clone());
            out.sample_iterations.push(it);
        }
    }
    Ok(out)
}
