//! Relocation, split and merge of change-points.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::hyper::{Hyperparams, SplitAccounting};
use crate::model::{min_segment_len, segment_bounds, ModelState, SegmentParams, TimeSeries};
use crate::priors::{
    log_prior_beta, log_prior_changepoints, log_prior_omega_sorted, log_prior_sigma2,
    DimensionPriors, MoveChoice,
};
use crate::segment::{
    accept, beta_conditional_for, loglik_for, sigma2_conditional_for, MoveKind, MoveOutcome,
    SegmentData,
};

/// Closed intervals where a new change-point may be placed.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportIntervals {
    intervals: Vec<(f64, f64)>,
    total: f64,
    closed_form: f64,
}

/// `[1 + psi, s_1 - psi] U [s_1 + psi, s_2 - psi] U ... U [s_k + psi, n - psi]`,
/// empty pieces dropped.
pub fn support_intervals(s: &[f64], psi_s: f64, n: usize) -> SupportIntervals {
    let mut intervals = Vec::with_capacity(s.len() + 1);
    let mut prev = 1.0;
    for &x in s.iter().chain(std::iter::once(&(n as f64))) {
        let (lo, hi) = (prev + psi_s, x - psi_s);
        if hi > lo {
            intervals.push((lo, hi));
        }
        prev = x;
    }
    let total = intervals.iter().map(|(a, b)| b - a).sum();
    let closed_form = n as f64 - 2.0 * psi_s * (s.len() + 1) as f64 - 1.0;
    SupportIntervals {
        intervals,
        total,
        closed_form,
    }
}

impl SupportIntervals {
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `n - 2 psi (k + 1) - 1`, the support length when no piece is empty.
    pub fn closed_form(&self) -> f64 {
        self.closed_form
    }

    /// True when every piece is non-empty, so the closed form is the length.
    pub fn is_regular(&self) -> bool {
        self.closed_form > 0.0 && (self.total - self.closed_form).abs() <= 1e-9 * self.closed_form
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| x >= a && x <= b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u = rng.random::<f64>() * self.total;
        for &(a, b) in &self.intervals {
            if u < b - a {
                return a + u;
            }
            u -= b - a;
        }
        self.intervals.last().map_or(f64::NAN, |iv| iv.1)
    }
}

/// Splits a variance by `u`: `(u / (1 - u) sigma2, (1 - u) / u sigma2)`.
pub fn split_variance(sigma2: f64, u: f64) -> (f64, f64) {
    (u / (1.0 - u) * sigma2, (1.0 - u) / u * sigma2)
}

/// Inverse of [`split_variance`]: the geometric mean and the recovered `u`.
pub fn merge_variance(left: f64, right: f64) -> (f64, f64) {
    let (a, b) = (left.sqrt(), right.sqrt());
    ((left * right).sqrt(), a / (a + b))
}

/// Absolute Jacobian of `(sigma2, u) -> (left, right)`, written in terms of
/// the children as `2 (sqrt(left) + sqrt(right))^2`.
pub fn split_jacobian(left: f64, right: f64) -> f64 {
    let s = left.sqrt() + right.sqrt();
    2.0 * s * s
}

fn segment_data<'a>(ts: &'a TimeSeries, state_s: &[f64], j: usize) -> SegmentData<'a> {
    let b = segment_bounds(state_s, ts.len())[j];
    SegmentData::from_bounds(ts, b)
}

/// Log acceptance ratio for splitting segment `j` of `parent` into segments
/// `j` and `j + 1` of `child`. The merge ratio is the negative of this value.
pub fn split_log_ratio(
    parent: &ModelState,
    child: &ModelState,
    j: usize,
    ts: &TimeSeries,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
) -> Result<f64> {
    let n = ts.len();
    let k = parent.k();
    let p = &parent.segments[j];
    let (l, r) = (&child.segments[j], &child.segments[j + 1]);
    let pd = segment_data(ts, &parent.changepoints, j);
    let ld = segment_data(ts, &child.changepoints, j);
    let rd = segment_data(ts, &child.changepoints, j + 1);

    let support = support_intervals(&parent.changepoints, hyper.psi_s, n);
    let s_new = child.changepoints[j];
    if !support.is_regular() || !support.contains(s_new) {
        return Ok(f64::INFINITY);
    }

    let d_lik = loglik_for(&ld, l, hyper) + loglik_for(&rd, r, hyper) - loglik_for(&pd, p, hyper);
    let d_k = priors.k.log_pmf(k + 1)? - priors.k.log_pmf(k)?;
    let d_s = log_prior_changepoints(&child.changepoints, n)
        - log_prior_changepoints(&parent.changepoints, n);
    let d_beta = log_prior_beta(&l.beta, hyper.sigma2_beta) + log_prior_beta(&r.beta, hyper.sigma2_beta)
        - log_prior_beta(&p.beta, hyper.sigma2_beta);
    let d_sigma2 = log_prior_sigma2(l.sigma2, hyper.nu0, hyper.gamma0)?
        + log_prior_sigma2(r.sigma2, hyper.nu0, hyper.gamma0)?
        - log_prior_sigma2(p.sigma2, hyper.nu0, hyper.gamma0)?;
    let mut target = d_lik + d_k + d_s + d_beta + d_sigma2;

    let b_k = priors.k.move_probabilities(k, hyper.c)?.birth;
    let d_k1 = priors.k.move_probabilities(k + 1, hyper.c)?.death;
    let mut reverse = d_k1.ln() - ((k + 1) as f64).ln()
        + beta_conditional_for(&pd, &p.omega, p.sigma2, hyper)?.log_density(&p.beta);
    let forward = b_k.ln() - support.closed_form().ln()
        + beta_conditional_for(&ld, &l.omega, l.sigma2, hyper)?.log_density(&l.beta)
        + beta_conditional_for(&rd, &r.omega, r.sigma2, hyper)?.log_density(&r.beta);

    if hyper.split_accounting == SplitAccounting::Literal {
        let freq = |s: &SegmentParams| -> Result<f64> {
            Ok(priors.m.log_pmf(s.m())? + log_prior_omega_sorted(&s.omega))
        };
        target += freq(l)? + freq(r)? - freq(p)?;
        reverse += 0.5f64.ln();
    }

    Ok(target + reverse - forward + split_jacobian(l.sigma2, r.sigma2).ln())
}

/// Relocates one change-point and redraws the coefficients of its two
/// neighbouring segments.
pub fn cp_within<R: Rng + ?Sized>(
    state: &ModelState,
    ts: &TimeSeries,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<(ModelState, MoveOutcome)> {
    let kind = MoveKind::ChangepointWithin;
    let k = state.k();
    let n = ts.len();
    if k == 0 {
        return Ok((state.clone(), MoveOutcome::rejected(kind)));
    }
    let j = rng.random_range(0..k);
    let s = &state.changepoints;
    let left_nb = if j == 0 { 1.0 } else { s[j - 1] };
    let right_nb = if j + 1 == k { n as f64 } else { s[j + 1] };
    let (lo, hi) = (left_nb + hyper.psi_s, right_nb - hyper.psi_s);
    let proposal = if rng.random::<f64>() < hyper.delta_s {
        lo + rng.random::<f64>() * (hi - lo)
    } else {
        let z: f64 = rng.sample(StandardNormal);
        s[j] + hyper.sigma2_s.sqrt() * z
    };
    if !(proposal >= lo && proposal <= hi) {
        return Ok((state.clone(), MoveOutcome::rejected(kind)));
    }
    let mut s_new = s.clone();
    s_new[j] = proposal;
    let (l, r) = (&state.segments[j], &state.segments[j + 1]);
    let new_bounds = segment_bounds(&s_new, n);
    if new_bounds[j].len() < min_segment_len(l.m()) || new_bounds[j + 1].len() < min_segment_len(r.m())
    {
        return Ok((state.clone(), MoveOutcome::rejected(kind)));
    }
    let old_bounds = state.bounds(n);

    let mut log_ratio = log_prior_changepoints(&s_new, n) - log_prior_changepoints(s, n);
    let mut proposed = Vec::with_capacity(2);
    for (idx, seg) in [(j, l), (j + 1, r)] {
        let old = SegmentData::from_bounds(ts, old_bounds[idx]);
        let new = SegmentData::from_bounds(ts, new_bounds[idx]);
        let cond_new = beta_conditional_for(&new, &seg.omega, seg.sigma2, hyper)?;
        let cond_old = beta_conditional_for(&old, &seg.omega, seg.sigma2, hyper)?;
        let beta = cond_new.sample(rng);
        let next = SegmentParams {
            omega: seg.omega.clone(),
            beta,
            sigma2: seg.sigma2,
        };
        log_ratio += loglik_for(&new, &next, hyper) - loglik_for(&old, seg, hyper)
            + log_prior_beta(&next.beta, hyper.sigma2_beta)
            - log_prior_beta(&seg.beta, hyper.sigma2_beta)
            + cond_old.log_density(&seg.beta)
            - cond_new.log_density(&next.beta);
        proposed.push((new, next));
    }
    let accepted = accept(log_ratio, rng);
    let outcome = MoveOutcome {
        kind,
        accepted,
        log_ratio,
    };
    if !accepted {
        return Ok((state.clone(), outcome));
    }
    let mut next = state.clone();
    next.changepoints = s_new;
    for (offset, (data, mut seg)) in proposed.into_iter().enumerate() {
        seg.sigma2 = sigma2_conditional_for(&data, &seg.omega, &seg.beta, hyper).sample(rng);
        next.segments[j + offset] = seg;
    }
    Ok((next, outcome))
}

/// Draws a split of `state`: the new change-point, the two children with
/// copied frequencies, a `u`-split variance and fresh coefficients. Returns
/// the child state and the index of the split segment, or `None` when the
/// proposal is infeasible.
pub fn propose_split<R: Rng + ?Sized>(
    state: &ModelState,
    ts: &TimeSeries,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<Option<(ModelState, usize)>> {
    let n = ts.len();
    let support = support_intervals(&state.changepoints, hyper.psi_s, n);
    if state.k() >= hyper.k_max || !support.is_regular() {
        return Ok(None);
    }
    let s_new = support.sample(rng);
    let j = state.changepoints.partition_point(|&x| x < s_new);
    let parent = &state.segments[j];
    let mut child = state.clone();
    child.changepoints.insert(j, s_new);
    let bounds = child.bounds(n);
    let need = min_segment_len(parent.m());
    if bounds[j].len() < need || bounds[j + 1].len() < need {
        return Ok(None);
    }
    let u: f64 = rng.random();
    let (var_l, var_r) = split_variance(parent.sigma2, u);
    if !(var_l > 0.0 && var_r > 0.0 && var_l.is_finite() && var_r.is_finite()) {
        return Ok(None);
    }
    let mut kids = Vec::with_capacity(2);
    for (b, var) in [(bounds[j], var_l), (bounds[j + 1], var_r)] {
        let data = SegmentData::from_bounds(ts, b);
        let beta = beta_conditional_for(&data, &parent.omega, var, hyper)?.sample(rng);
        kids.push(SegmentParams {
            omega: parent.omega.clone(),
            beta,
            sigma2: var,
        });
    }
    let right = kids.pop().expect("two children");
    child.segments[j] = kids.pop().expect("two children");
    child.segments.insert(j + 1, right);
    Ok(Some((child, j)))
}

/// Places a new change-point uniformly on the support and splits the
/// segment containing it.
pub fn cp_birth<R: Rng + ?Sized>(
    state: &ModelState,
    ts: &TimeSeries,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
    rng: &mut R,
) -> Result<(ModelState, MoveOutcome)> {
    let kind = MoveKind::ChangepointBirth;
    let Some((child, j)) = propose_split(state, ts, hyper, rng)? else {
        return Ok((state.clone(), MoveOutcome::rejected(kind)));
    };
    let log_ratio = split_log_ratio(state, &child, j, ts, hyper, priors)?;
    let accepted = accept(log_ratio, rng);
    let outcome = MoveOutcome {
        kind,
        accepted,
        log_ratio,
    };
    Ok((if accepted { child } else { state.clone() }, outcome))
}

/// Merges segments `j` and `j + 1` of `state`, keeping the frequencies of
/// segment `survivor` (`j` or `j + 1`) and the geometric-mean variance.
/// `beta` overrides the merged coefficients; `None` draws them from their
/// conditional. Returns `None` when the reverse split could not occur.
pub fn propose_merge<R: Rng + ?Sized>(
    state: &ModelState,
    j: usize,
    survivor: usize,
    beta: Option<Vec<f64>>,
    ts: &TimeSeries,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<Option<ModelState>> {
    let n = ts.len();
    let keep = &state.segments[survivor];
    let (l, r) = (&state.segments[j], &state.segments[j + 1]);
    let mut merged = state.clone();
    merged.changepoints.remove(j);
    if !support_intervals(&merged.changepoints, hyper.psi_s, n).is_regular() {
        return Ok(None);
    }
    // The reverse split copies the survivor's frequencies to both children.
    let bounds = state.bounds(n);
    let need = min_segment_len(keep.m());
    if bounds[j].len() < need || bounds[j + 1].len() < need {
        return Ok(None);
    }
    let (sigma2, _) = merge_variance(l.sigma2, r.sigma2);
    let beta = match beta {
        Some(b) => b,
        None => {
            let data = SegmentData::from_bounds(ts, merged.bounds(n)[j]);
            beta_conditional_for(&data, &keep.omega, sigma2, hyper)?.sample(rng)
        }
    };
    let seg = SegmentParams {
        omega: keep.omega.clone(),
        beta,
        sigma2,
    };
    merged.segments.remove(j + 1);
    merged.segments[j] = seg;
    Ok(Some(merged))
}

/// Removes a uniformly chosen change-point, merging its two segments.
pub fn cp_death<R: Rng + ?Sized>(
    state: &ModelState,
    ts: &TimeSeries,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
    rng: &mut R,
) -> Result<(ModelState, MoveOutcome)> {
    let kind = MoveKind::ChangepointDeath;
    let k = state.k();
    if k == 0 {
        return Ok((state.clone(), MoveOutcome::rejected(kind)));
    }
    let j = rng.random_range(0..k);
    let survivor = if rng.random::<bool>() { j } else { j + 1 };
    let Some(merged) = propose_merge(state, j, survivor, None, ts, hyper, rng)? else {
        return Ok((state.clone(), MoveOutcome::rejected(kind)));
    };
    let r = -split_log_ratio(&merged, state, j, ts, hyper, priors)?;
    let log_ratio = if r.is_nan() { f64::NEG_INFINITY } else { r };
    let accepted = accept(log_ratio, rng);
    let outcome = MoveOutcome {
        kind,
        accepted,
        log_ratio,
    };
    Ok((if accepted { merged } else { state.clone() }, outcome))
}

/// One change-point move chosen with the dimension move probabilities at the
/// current `k`. Returns `None` when a within move is drawn with `k = 0`.
pub fn changepoint_move<R: Rng + ?Sized>(
    state: &ModelState,
    ts: &TimeSeries,
    hyper: &Hyperparams,
    priors: &DimensionPriors,
    rng: &mut R,
) -> Result<(ModelState, Option<MoveOutcome>)> {
    let probs = priors.k.move_probabilities(state.k(), hyper.c)?;
    let (next, out) = match probs.choose(rng.random()) {
        MoveChoice::Birth => cp_birth(state, ts, hyper, priors, rng)?,
        MoveChoice::Death => cp_death(state, ts, hyper, priors, rng)?,
        MoveChoice::Within if state.k() == 0 => return Ok((state.clone(), None)),
        MoveChoice::Within => cp_within(state, ts, hyper, rng)?,
    };
    Ok((next, Some(out)))
}
