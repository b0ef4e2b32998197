//! Moves on one segment's `(m, omega, beta, sigma2)` with its boundaries
//! held fixed.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conjugate::{
    beta_conditional_from, sigma2_conditional_from_rss, CrossProducts, GaussianConditional,
    InverseGamma,
};
use crate::error::{Error, Result};
use crate::hyper::{Hyperparams, Likelihood};
use crate::model::{
    mean_at, min_segment_len, residual_sum_squares, segment_loglik, SegmentBounds, SegmentParams,
    TimeSeries,
};
use crate::priors::{
    log_prior_beta, log_prior_omega_sorted, log_prior_sigma2, DimensionPriors, MoveChoice,
};
use crate::spectral::{q1_log_density, q1_sample, Periodogram};

/// Every Metropolis-Hastings step the sampler records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    FreqPeriodogram,
    FreqRandomWalk,
    Beta,
    SegmentBirth,
    SegmentDeath,
    ChangepointWithin,
    ChangepointBirth,
    ChangepointDeath,
}

impl MoveKind {
    pub const ALL: [MoveKind; 8] = [
        MoveKind::FreqPeriodogram,
        MoveKind::FreqRandomWalk,
        MoveKind::Beta,
        MoveKind::SegmentBirth,
        MoveKind::SegmentDeath,
        MoveKind::ChangepointWithin,
        MoveKind::ChangepointBirth,
        MoveKind::ChangepointDeath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::FreqPeriodogram => "within-freq-q1",
            MoveKind::FreqRandomWalk => "within-freq-rw",
            MoveKind::Beta => "within-beta",
            MoveKind::SegmentBirth | MoveKind::ChangepointBirth => "birth",
            MoveKind::SegmentDeath | MoveKind::ChangepointDeath => "death",
            MoveKind::ChangepointWithin => "within",
        }
    }

    pub fn family(self) -> &'static str {
        match self {
            MoveKind::ChangepointWithin | MoveKind::ChangepointBirth | MoveKind::ChangepointDeath => {
                "changepoint"
            }
            _ => "segment",
        }
    }

    /// Frequency Metropolis-Hastings steps of the segment within move.
    pub fn is_segment_within(self) -> bool {
        matches!(self, MoveKind::FreqPeriodogram | MoveKind::FreqRandomWalk)
    }

    /// Every step of the segment within move, including the coefficient
    /// update, which always accepts.
    pub fn is_segment_within_with_beta(self) -> bool {
        self.is_segment_within() || self == MoveKind::Beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
    pub log_ratio: f64,
}

impl MoveOutcome {
    pub fn rejected(kind: MoveKind) -> Self {
        Self {
            kind,
            accepted: false,
            log_ratio: f64::NEG_INFINITY,
        }
    }
}

/// Metropolis-Hastings decision. A NaN ratio counts as a rejection.
pub(crate) fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Observations of one segment, the first at global index `t_start`.
#[derive(Debug, Clone, Copy)]
pub struct SegmentData<'a> {
    pub y: &'a [f64],
    pub t_start: usize,
}

impl<'a> SegmentData<'a> {
    pub fn new(y: &'a [f64], t_start: usize) -> Self {
        Self { y, t_start }
    }

    pub fn from_bounds(ts: &'a TimeSeries, bounds: SegmentBounds) -> Self {
        Self::new(ts.slice(bounds), bounds.start)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Conditional of the coefficients given frequencies and variance. Under
/// [`Likelihood::Constant`] this is the prior.
pub fn beta_conditional_for(
    data: &SegmentData,
    omega: &[f64],
    sigma2: f64,
    hyper: &Hyperparams,
) -> Result<GaussianConditional> {
    match hyper.likelihood {
        Likelihood::Gaussian => {
            let cp = CrossProducts::for_segment(data.y, data.t_start, omega)?;
            beta_conditional_from(&cp, sigma2, hyper.sigma2_beta)
        }
        Likelihood::Constant => Ok(GaussianConditional::isotropic(
            2 * omega.len() + 2,
            hyper.sigma2_beta,
        )),
    }
}

/// Conditional of the variance given frequencies and coefficients.
pub fn sigma2_conditional_for(
    data: &SegmentData,
    omega: &[f64],
    beta: &[f64],
    hyper: &Hyperparams,
) -> InverseGamma {
    match hyper.likelihood {
        Likelihood::Gaussian => {
            let rss = residual_sum_squares(data.y, data.t_start, omega, beta);
            sigma2_conditional_from_rss(data.len(), rss, hyper.nu0, hyper.gamma0)
        }
        Likelihood::Constant => InverseGamma {
            shape: hyper.nu0 / 2.0,
            scale: hyper.gamma0 / 2.0,
        },
    }
}

pub fn loglik_for(data: &SegmentData, seg: &SegmentParams, hyper: &Hyperparams) -> f64 {
    match hyper.likelihood {
        Likelihood::Gaussian => segment_loglik(data.y, data.t_start, seg),
        Likelihood::Constant => 0.0,
    }
}

/// Unnormalized log posterior of one segment: likelihood plus the priors on
/// `m`, the sorted frequencies, the coefficients and the variance.
pub fn segment_log_posterior(
    seg: &SegmentParams,
    data: &SegmentData,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
) -> Result<f64> {
    Ok(loglik_for(data, seg, hyper)
        + priors.m.log_pmf(seg.m())?
        + log_prior_omega_sorted(&seg.omega)
        + log_prior_beta(&seg.beta, hyper.sigma2_beta)
        + log_prior_sigma2(seg.sigma2, hyper.nu0, hyper.gamma0)?)
}

/// Where a new frequency may be born: `(0, phi)` with a `psi`-neighbourhood
/// of every existing frequency removed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGaps {
    intervals: Vec<(f64, f64)>,
    total: f64,
}

impl FrequencyGaps {
    pub fn new(omega: &[f64], psi: f64, phi: f64) -> Self {
        let mut intervals = Vec::with_capacity(omega.len() + 1);
        let mut lo: f64 = 0.0;
        for &w in omega {
            let hi = (w - psi).min(phi);
            if hi > lo {
                intervals.push((lo, hi));
            }
            lo = lo.max(w + psi);
        }
        if phi > lo {
            intervals.push((lo, phi));
        }
        let total = intervals.iter().map(|(a, b)| b - a).sum();
        Self { intervals, total }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn contains(&self, w: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| w > a && w < b)
    }

    pub fn log_density(&self, w: f64) -> f64 {
        if self.contains(w) {
            -self.total.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Uniform draw on the union. Requires a positive total length.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let mut u = rng.random::<f64>() * self.total;
            for &(a, b) in &self.intervals {
                let len = b - a;
                if u < len {
                    let w = a + u;
                    if w > a {
                        return w;
                    }
                    break;
                }
                u -= len;
            }
        }
    }
}

/// Contribution `b1 cos(2 pi w t) + b2 sin(2 pi w t)` of one component.
#[inline]
fn component(w: f64, b1: f64, b2: f64, t: f64) -> f64 {
    let (s, c) = (TAU * w * t).sin_cos();
    b1 * c + b2 * s
}

/// Within-model update: each frequency in turn by a periodogram or
/// random-walk Metropolis-Hastings step, then the coefficients by an
/// independence step from their exact conditional, then the variance by
/// Gibbs.
pub fn within_move<R: Rng + ?Sized>(
    seg: &SegmentParams,
    data: &SegmentData,
    pg: &Periodogram,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<(SegmentParams, Vec<MoveOutcome>)> {
    let gaussian = hyper.likelihood == Likelihood::Gaussian;
    let sigma2 = seg.sigma2;
    let mut omega = seg.omega.clone();
    let beta = &seg.beta;
    let mut resid: Vec<f64> = if gaussian {
        data.y
            .iter()
            .enumerate()
            .map(|(i, &v)| v - mean_at(data.t_start + i, &omega, beta))
            .collect()
    } else {
        Vec::new()
    };
    let mut rss: f64 = resid.iter().map(|r| r * r).sum();
    let mut trial = vec![0.0; resid.len()];
    let rw_sd = hyper.rw_omega_variance(data.len()).sqrt();
    let mut outcomes = Vec::with_capacity(omega.len() + 1);

    for l in 0..omega.len() {
        let current = omega[l];
        let (kind, proposal, log_q) = if rng.random::<f64>() < hyper.delta_omega {
            match q1_sample(pg, rng) {
                Ok(w) => (
                    MoveKind::FreqPeriodogram,
                    w,
                    q1_log_density(current, pg)? - q1_log_density(w, pg)?,
                ),
                Err(Error::DegeneratePeriodogram) => {
                    outcomes.push(MoveOutcome::rejected(MoveKind::FreqPeriodogram));
                    continue;
                }
                Err(e) => return Err(e),
            }
        } else {
            let step: f64 = rng.sample(StandardNormal);
            (MoveKind::FreqRandomWalk, current + rw_sd * step, 0.0)
        };
        let separated = !hyper.separate_within
            || omega
                .iter()
                .enumerate()
                .all(|(i, &w)| i == l || (w - proposal).abs() >= hyper.psi_omega);
        if !(proposal > 0.0 && proposal < 0.5 && separated) {
            outcomes.push(MoveOutcome::rejected(kind));
            continue;
        }
        let mut rss_new = 0.0;
        let log_lik = if gaussian {
            let (b1, b2) = (beta[2 + 2 * l], beta[3 + 2 * l]);
            for (i, (r, out)) in resid.iter().zip(trial.iter_mut()).enumerate() {
                let t = (data.t_start + i) as f64;
                let v = r + component(current, b1, b2, t) - component(proposal, b1, b2, t);
                *out = v;
                rss_new += v * v;
            }
            (rss - rss_new) / (2.0 * sigma2)
        } else {
            0.0
        };
        let log_ratio = log_lik + log_q;
        let accepted = accept(log_ratio, rng);
        if accepted {
            omega[l] = proposal;
            if gaussian {
                std::mem::swap(&mut resid, &mut trial);
                rss = rss_new;
            }
        }
        outcomes.push(MoveOutcome {
            kind,
            accepted,
            log_ratio,
        });
    }

    let mut next = SegmentParams {
        omega,
        beta: beta.clone(),
        sigma2,
    };
    next.sort_components();

    let cond = beta_conditional_for(data, &next.omega, sigma2, hyper)?;
    let proposal = cond.sample(rng);
    let log_target = |b: &[f64]| {
        let lik = if gaussian {
            let r = residual_sum_squares(data.y, data.t_start, &next.omega, b);
            -r / (2.0 * sigma2)
        } else {
            0.0
        };
        lik + log_prior_beta(b, hyper.sigma2_beta)
    };
    let log_ratio = log_target(&proposal) - log_target(&next.beta) + cond.log_density(&next.beta)
        - cond.log_density(&proposal);
    let accepted = accept(log_ratio, rng);
    if accepted {
        next.beta = proposal;
    }
    outcomes.push(MoveOutcome {
        kind: MoveKind::Beta,
        accepted,
        log_ratio,
    });

    next.sigma2 = sigma2_conditional_for(data, &next.omega, &next.beta, hyper).sample(rng);
    Ok((next, outcomes))
}

/// Log acceptance ratio for moving from `small` to `big`, where `big` holds
/// one extra frequency at position `new_index` and its coefficients and
/// variance were drawn from their conditionals. The matching death ratio is
/// the negative of this value.
pub fn birth_log_ratio(
    small: &SegmentParams,
    big: &SegmentParams,
    new_index: usize,
    data: &SegmentData,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
) -> Result<f64> {
    let m = small.m();
    if big.m() != m + 1 || new_index > m {
        return Err(Error::StateMismatch(format!(
            "birth from m = {m} to m = {} at index {new_index}",
            big.m()
        )));
    }
    let born = big.omega[new_index];
    let gaps = FrequencyGaps::new(&small.omega, hyper.psi_omega, hyper.phi_omega);
    let log_q_new = gaps.log_density(born);
    if log_q_new == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let b_small = priors.m.move_probabilities(m, hyper.c)?.birth;
    let d_big = priors.m.move_probabilities(m + 1, hyper.c)?.death;

    let fwd_beta =
        beta_conditional_for(data, &big.omega, small.sigma2, hyper)?.log_density(&big.beta);
    let fwd_sigma2 = sigma2_conditional_for(data, &big.omega, &big.beta, hyper).log_density(big.sigma2);
    let rev_beta =
        beta_conditional_for(data, &small.omega, big.sigma2, hyper)?.log_density(&small.beta);
    let rev_sigma2 =
        sigma2_conditional_for(data, &small.omega, &small.beta, hyper).log_density(small.sigma2);

    let target = segment_log_posterior(big, data, hyper, priors)?
        - segment_log_posterior(small, data, hyper, priors)?;
    let reverse = d_big.ln() - ((m + 1) as f64).ln() + rev_beta + rev_sigma2;
    let forward = b_small.ln() + log_q_new + fwd_beta + fwd_sigma2;
    Ok(target + reverse - forward)
}

/// Log acceptance ratio for removing frequency `removed` from `current`,
/// leaving `proposed`.
pub fn death_log_ratio(
    current: &SegmentParams,
    proposed: &SegmentParams,
    removed: usize,
    data: &SegmentData,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
) -> Result<f64> {
    let r = -birth_log_ratio(proposed, current, removed, data, hyper, priors)?;
    Ok(if r.is_nan() { f64::NEG_INFINITY } else { r })
}

/// Adds a frequency drawn uniformly from the admissible gaps.
pub fn birth_move<R: Rng + ?Sized>(
    seg: &SegmentParams,
    data: &SegmentData,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
    rng: &mut R,
) -> Result<(SegmentParams, MoveOutcome)> {
    let m = seg.m();
    let gaps = FrequencyGaps::new(&seg.omega, hyper.psi_omega, hyper.phi_omega);
    if m >= hyper.m_max || data.len() < min_segment_len(m + 1) || gaps.total() <= 0.0 {
        return Ok((seg.clone(), MoveOutcome::rejected(MoveKind::SegmentBirth)));
    }
    let born = gaps.sample(rng);
    let mut omega = seg.omega.clone();
    let idx = omega.partition_point(|&w| w < born);
    omega.insert(idx, born);
    let beta = beta_conditional_for(data, &omega, seg.sigma2, hyper)?.sample(rng);
    let sigma2 = sigma2_conditional_for(data, &omega, &beta, hyper).sample(rng);
    let big = SegmentParams {
        omega,
        beta,
        sigma2,
    };
    let log_ratio = birth_log_ratio(seg, &big, idx, data, hyper, priors)?;
    let accepted = accept(log_ratio, rng);
    let outcome = MoveOutcome {
        kind: MoveKind::SegmentBirth,
        accepted,
        log_ratio,
    };
    Ok((if accepted { big } else { seg.clone() }, outcome))
}

/// Removes a uniformly chosen frequency.
pub fn death_move<R: Rng + ?Sized>(
    seg: &SegmentParams,
    data: &SegmentData,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
    rng: &mut R,
) -> Result<(SegmentParams, MoveOutcome)> {
    let m = seg.m();
    if m <= 1 {
        return Ok((seg.clone(), MoveOutcome::rejected(MoveKind::SegmentDeath)));
    }
    let removed = rng.random_range(0..m);
    let mut omega = seg.omega.clone();
    omega.remove(removed);
    let beta = beta_conditional_for(data, &omega, seg.sigma2, hyper)?.sample(rng);
    let sigma2 = sigma2_conditional_for(data, &omega, &beta, hyper).sample(rng);
    let small = SegmentParams {
        omega,
        beta,
        sigma2,
    };
    let log_ratio = death_log_ratio(seg, &small, removed, data, hyper, priors)?;
    let accepted = accept(log_ratio, rng);
    let outcome = MoveOutcome {
        kind: MoveKind::SegmentDeath,
        accepted,
        log_ratio,
    };
    Ok((if accepted { small } else { seg.clone() }, outcome))
}

/// One segment-model move: birth, death or within, chosen with the
/// dimension move probabilities at the current `m`.
pub fn segment_move<R: Rng + ?Sized>(
    seg: &SegmentParams,
    data: &SegmentData,
    pg: &Periodogram,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
    rng: &mut R,
) -> Result<(SegmentParams, Vec<MoveOutcome>)> {
    let probs = priors.m.move_probabilities(seg.m(), hyper.c)?;
    match probs.choose(rng.random()) {
        MoveChoice::Birth => {
            birth_move(seg, data, hyper, priors, rng).map(|(s, o)| (s, vec![o]))
        }
        MoveChoice::Death => {
            death_move(seg, data, hyper, priors, rng).map(|(s, o)| (s, vec![o]))
        }
        MoveChoice::Within => within_move(seg, data, pg, hyper, rng),
    }
}
