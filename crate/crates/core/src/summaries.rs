//! Posterior summaries computed from stored samples.
//!
//! Segments are identified across samples by their left-to-right position and
//! frequencies by their ascending order within a segment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::AcceptanceCounts;
use crate::error::{Error, Result};
use crate::model::{phase, power, ModelState};
use crate::segment::MoveKind;

/// Mass table over a count.
pub type Mass = BTreeMap<usize, f64>;

fn mass_from_counts<I: IntoIterator<Item = usize>>(items: I) -> Mass {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for v in items {
        *counts.entry(v).or_default() += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect()
}

/// Posterior of the number of change-points.
pub fn posterior_k(samples: &[ModelState]) -> Result<Mass> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(mass_from_counts(samples.iter().map(ModelState::k)))
}

/// The most probable `k`; ties go to the smaller value.
pub fn modal_k(samples: &[ModelState]) -> Result<usize> {
    let mass = posterior_k(samples)?;
    Ok(mode_of(&mass))
}

fn mode_of(mass: &Mass) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (&k, &p) in mass {
        if p > best.1 {
            best = (k, p);
        }
    }
    best.0
}

fn with_k(samples: &[ModelState], k: usize) -> Result<Vec<&ModelState>> {
    let hits: Vec<&ModelState> = samples.iter().filter(|s| s.k() == k).collect();
    if hits.is_empty() {
        return Err(Error::NoSamplesForK(k));
    }
    Ok(hits)
}

/// Per-segment posterior of `m_j` among samples with `k` change-points.
pub fn posterior_m_given_k(samples: &[ModelState], k: usize) -> Result<Vec<Mass>> {
    let hits = with_k(samples, k)?;
    Ok((0..=k)
        .map(|j| mass_from_counts(hits.iter().map(|s| s.segments[j].m())))
        .collect())
}

/// Per-segment modes of [`posterior_m_given_k`].
pub fn modal_m_marginal(samples: &[ModelState], k: usize) -> Result<Vec<usize>> {
    Ok(posterior_m_given_k(samples, k)?.iter().map(mode_of).collect())
}

/// Most frequent joint vector `(m_1, ..., m_{k+1})` among samples with `k`
/// change-points; ties go to the lexicographically smallest.
pub fn modal_m_joint(samples: &[ModelState], k: usize) -> Result<Vec<usize>> {
    let hits = with_k(samples, k)?;
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for s in hits {
        *counts.entry(s.m()).or_default() += 1;
    }
    let mut best: Option<(&Vec<usize>, usize)> = None;
    for (m, &c) in &counts {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((m, c));
        }
    }
    Ok(best.map(|(m, _)| m.clone()).unwrap_or_default())
}

/// Sample values of one scalar with their mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl ScalarSummary {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            values,
            mean,
            sd: var.sqrt(),
        }
    }

    /// Counts in bins `[lo + i w, lo + (i + 1) w)` with `lo` the value floor'd
    /// to a multiple of `w`.
    pub fn histogram(&self, width: f64) -> Vec<(f64, usize)> {
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for v in &self.values {
            *bins.entry((v / width).floor() as i64).or_default() += 1;
        }
        bins.into_iter()
            .map(|(b, c)| (b as f64 * width, c))
            .collect()
    }
}

/// Location posterior of each change-point among samples with `k` of them.
pub fn changepoint_posterior(samples: &[ModelState], k: usize) -> Result<Vec<ScalarSummary>> {
    let hits = with_k(samples, k)?;
    Ok((0..k)
        .map(|i| ScalarSummary::new(hits.iter().map(|s| s.changepoints[i]).collect()))
        .collect())
}

fn matching<'a>(samples: &'a [ModelState], k: usize, m: &[usize]) -> Result<Vec<&'a ModelState>> {
    if m.len() != k + 1 {
        return Err(Error::StateMismatch(format!(
            "{} frequency counts for {} segments",
            m.len(),
            k + 1
        )));
    }
    let hits: Vec<&ModelState> = samples
        .iter()
        .filter(|s| s.k() == k && s.m() == m)
        .collect();
    if hits.is_empty() {
        return Err(Error::NoMatchingSamples);
    }
    Ok(hits)
}

/// Frequencies of every segment and ordinal among samples with `k`
/// change-points and frequency counts `m`.
pub fn frequency_posterior(
    samples: &[ModelState],
    k: usize,
    m: &[usize],
) -> Result<Vec<Vec<ScalarSummary>>> {
    let hits = matching(samples, k, m)?;
    Ok(m.iter()
        .enumerate()
        .map(|(j, &mj)| {
            (0..mj)
                .map(|l| ScalarSummary::new(hits.iter().map(|s| s.segments[j].omega[l]).collect()))
                .collect()
        })
        .collect())
}

/// One row of the power/phase table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPhase {
    pub segment: usize,
    pub ordinal: usize,
    pub frequency: f64,
    pub power: f64,
    /// Mean phase over samples where it is defined; `None` if never.
    pub phase: Option<f64>,
}

pub fn power_phase_table(samples: &[ModelState], k: usize, m: &[usize]) -> Result<Vec<PowerPhase>> {
    let hits = matching(samples, k, m)?;
    let mut rows = Vec::new();
    for (j, &mj) in m.iter().enumerate() {
        for l in 0..mj {
            let mut f = 0.0;
            let mut pw = 0.0;
            let (mut ph, mut ph_n) = (0.0, 0usize);
            for s in &hits {
                let seg = &s.segments[j];
                f += seg.omega[l];
                pw += power(seg.pair(l));
                if let Ok(t) = phase(seg.pair(l)) {
                    ph += t;
                    ph_n += 1;
                }
            }
            let n = hits.len() as f64;
            rows.push(PowerPhase {
                segment: j,
                ordinal: l,
                frequency: f / n,
                power: pw / n,
                phase: (ph_n > 0).then(|| ph / ph_n as f64),
            });
        }
    }
    Ok(rows)
}

/// Empirical percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Model-averaged signal with a pointwise 95% band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEstimate {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Averages each sample's fitted mean at every `t = 1..=n`, across all
/// values of `k` and `m`.
pub fn estimated_signal(samples: &[ModelState], n: usize) -> Result<SignalEstimate> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut est = SignalEstimate {
        mean: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
    };
    let mut vals = vec![0.0; samples.len()];
    for t in 1..=n {
        for (v, s) in vals.iter_mut().zip(samples) {
            *v = s.signal_at(t);
        }
        est.mean.push(vals.iter().sum::<f64>() / vals.len() as f64);
        vals.sort_by(f64::total_cmp);
        est.lower.push(percentile(&vals, 0.025));
        est.upper.push(percentile(&vals, 0.975));
    }
    Ok(est)
}

/// Frequency of greatest power in the segment holding each `t`, averaged
/// over samples. Ties go to the lowest frequency.
pub fn time_varying_peak(samples: &[ModelState], n: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut acc = vec![0.0; n];
    for s in samples {
        for (seg, b) in s.segments.iter().zip(s.bounds(n)) {
            let mut best = (f64::NAN, f64::NEG_INFINITY);
            for (l, &w) in seg.omega.iter().enumerate() {
                let p = power(seg.pair(l));
                if p > best.1 {
                    best = (w, p);
                }
            }
            for t in b.start..b.end {
                acc[t - 1] += best.0;
            }
        }
    }
    let count = samples.len() as f64;
    Ok(acc.into_iter().map(|v| v / count).collect())
}

/// Residual sum of squares between two curves.
pub fn rss(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Mean squared error between two curves.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    rss(a, b) / a.len() as f64
}

/// One line of the acceptance report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRow {
    pub family: String,
    pub kind: String,
    pub attempts: u64,
    pub accepted: u64,
    pub rate: f64,
}

/// Per-kind rates, two pooled segment within-move rates (frequency steps
/// only, and with the coefficient step), and the rate over every step.
pub fn acceptance_report(counts: &AcceptanceCounts) -> Vec<AcceptanceRow> {
    let row = |family: &str, kind: &str, c: crate::chain::MoveCount| AcceptanceRow {
        family: family.to_string(),
        kind: kind.to_string(),
        attempts: c.attempts,
        accepted: c.accepted,
        rate: c.rate(),
    };
    let mut rows: Vec<AcceptanceRow> = MoveKind::ALL
        .iter()
        .map(|&k| row(k.family(), k.name(), counts.get(k)))
        .collect();
    rows.push(row("segment", "within", counts.segment_within()));
    rows.push(row("segment", "within-with-beta", counts.segment_within_with_beta()));
    rows.push(row("all", "overall", counts.overall()));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{signal_at, SegmentParams};

    fn seg(omega: Vec<f64>, pairs: &[(f64, f64)]) -> SegmentParams {
        let mut beta = vec![1.0, 0.0];
        for &(a, b) in pairs {
            beta.extend([a, b]);
        }
        SegmentParams::new(omega, beta, 1.0).unwrap()
    }

    fn state(s: Vec<f64>, segs: Vec<SegmentParams>) -> ModelState {
        ModelState {
            changepoints: s,
            segments: segs,
        }
    }

    fn four_samples() -> Vec<ModelState> {
        vec![
            state(vec![], vec![seg(vec![0.1], &[(1.0, 0.0)])]),
            state(
                vec![40.0],
                vec![seg(vec![0.1], &[(1.0, 0.0)]), seg(vec![0.2, 0.3], &[(1.0, 1.0), (3.0, 0.0)])],
            ),
            state(
                vec![44.0],
                vec![seg(vec![0.12], &[(0.0, 2.0)]), seg(vec![0.22, 0.3], &[(1.0, 1.0), (0.0, 1.0)])],
            ),
            state(
                vec![50.0],
                vec![seg(vec![0.1, 0.2], &[(1.0, 0.0), (1.0, 0.0)]), seg(vec![0.2], &[(1.0, 0.0)])],
            ),
        ]
    }

    #[test]
    fn dimension_posteriors_by_counting() {
        let s = four_samples();
        let k = posterior_k(&s).unwrap();
        assert_eq!(k[&0], 0.25);
        assert_eq!(k[&1], 0.75);
        assert!((k.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(modal_k(&s).unwrap(), 1);
        let m = posterior_m_given_k(&s, 1).unwrap();
        assert!((m[0][&1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m[1][&2] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(modal_m_marginal(&s, 1).unwrap(), vec![1, 2]);
        assert_eq!(modal_m_joint(&s, 1).unwrap(), vec![1, 2]);
        assert!(matches!(posterior_m_given_k(&s, 3), Err(Error::NoSamplesForK(3))));
    }

    #[test]
    fn conditional_location_and_frequency() {
        let s = four_samples();
        let cp = changepoint_posterior(&s, 1).unwrap();
        assert!((cp[0].mean - 134.0 / 3.0).abs() < 1e-12);
        assert_eq!(cp[0].histogram(10.0), vec![(40.0, 2), (50.0, 1)]);
        let f = frequency_posterior(&s, 1, &[1, 2]).unwrap();
        assert!((f[0][0].mean - 0.11).abs() < 1e-15);
        assert!((f[1][0].mean - 0.21).abs() < 1e-15);
        assert_eq!(f[1][1].sd, 0.0);
        assert!(frequency_posterior(&s, 1, &[3, 3]).is_err());
        // filtering first gives the same answer
        let pre: Vec<ModelState> = s.iter().filter(|x| x.k() == 1).cloned().collect();
        assert_eq!(changepoint_posterior(&pre, 1).unwrap(), cp);
    }

    #[test]
    fn power_phase_rows() {
        let s = four_samples();
        let rows = power_phase_table(&s, 1, &[1, 2]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].power - 2.5).abs() < 1e-12);
        assert!((rows[0].phase.unwrap() - (0.0 - std::f64::consts::FRAC_PI_2) / 2.0).abs() < 1e-12);
        assert!((rows[2].power - 5.0).abs() < 1e-12);
    }

    #[test]
    fn signal_is_pointwise_mean() {
        let s = four_samples();
        let one = estimated_signal(&s[1..2], 60).unwrap();
        for t in 1..=60 {
            assert_eq!(one.mean[t - 1], s[1].signal_at(t));
            assert_eq!(one.lower[t - 1], one.upper[t - 1]);
        }
        let two = estimated_signal(&s[..2], 60).unwrap();
        let want = 0.5 * (signal_at(45, &s[0].segments[0]) + signal_at(45, &s[1].segments[1]));
        assert!((two.mean[44] - want).abs() < 1e-12);
        assert!(estimated_signal(&[], 5).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.025), 1.1);
        assert_eq!(percentile(&[7.0], 0.975), 7.0);
    }

    #[test]
    fn peak_curve() {
        let s = four_samples();
        let single = time_varying_peak(&s[..1], 10).unwrap();
        assert!(single.iter().all(|&w| w == 0.1));
        // power tie between 0.1 and 0.2 resolves to 0.1
        let tie = time_varying_peak(&s[3..], 60).unwrap();
        assert_eq!(tie[0], 0.1);
        assert_eq!(tie[59], 0.2);
        let mixed = time_varying_peak(&s[1..3], 60).unwrap();
        assert!((mixed[41] - (0.3 + 0.12) / 2.0).abs() < 1e-15);
        assert_eq!(rss(&single, &single), 0.0);
    }

    #[test]
    fn acceptance_rows() {
        let mut c = AcceptanceCounts::default();
        let empty = acceptance_report(&c);
        assert!(empty.iter().all(|r| r.rate == 0.0));
        c.add(MoveKind::Beta, 10, 10);
        c.add(MoveKind::FreqRandomWalk, 10, 2);
        c.add(MoveKind::ChangepointBirth, 80, 0);
        let rows = acceptance_report(&c);
        let within = rows.iter().find(|r| r.kind == "within" && r.family == "segment").unwrap();
        assert!((within.rate - 0.2).abs() < 1e-15);
        let with_beta = rows.iter().find(|r| r.kind == "within-with-beta").unwrap();
        assert!((with_beta.rate - 0.6).abs() < 1e-15);
        let overall = rows.last().unwrap();
        assert_eq!(overall.attempts, 100);
        assert!((overall.rate - 0.12).abs() < 1e-15);
    }
}
