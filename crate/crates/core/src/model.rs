//! The piecewise sinusoidal regression model.
//!
//! Observations are indexed by a global, 1-based time index `t`. A state with
//! `k` change-points `s_1 < ... < s_k` splits `1..=n` into `k + 1` segments
//! `[s_{j-1}, s_j)` with `s_0 = 1` and `s_{k+1} = n`, the final segment closed
//! at `n`. Inside segment `j` the mean is
//!
//! ```text
//! f(t) = alpha + mu * t + sum_l ( b1_l * cos(2 pi w_l t) + b2_l * sin(2 pi w_l t) )
//! ```
//!
//! with Gaussian noise of segment-specific variance.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed series `y_1, ..., y_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at t = {}",
                i + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Observations with global indices `start..end` (1-based, end exclusive).
    pub fn slice(&self, bounds: SegmentBounds) -> &[f64] {
        &self.values[bounds.start - 1..bounds.end - 1]
    }
}

/// Parameters of one segment: sorted frequencies, linear coefficients
/// `(alpha, mu, b1_1, b2_1, ..., b1_m, b2_m)` and residual variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub omega: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

impl SegmentParams {
    pub fn new(omega: Vec<f64>, beta: Vec<f64>, sigma2: f64) -> Result<Self> {
        let seg = Self {
            omega,
            beta,
            sigma2,
        };
        seg.check_shape()?;
        Ok(seg)
    }

    /// Number of sinusoidal components.
    pub fn m(&self) -> usize {
        self.omega.len()
    }

    /// Coefficient pair `(b1, b2)` of component `l` (0-based).
    pub fn pair(&self, l: usize) -> (f64, f64) {
        (self.beta[2 + 2 * l], self.beta[3 + 2 * l])
    }

    fn check_shape(&self) -> Result<()> {
        if self.beta.len() != 2 * self.omega.len() + 2 {
            return Err(Error::StateMismatch(format!(
                "beta has length {}, expected {}",
                self.beta.len(),
                2 * self.omega.len() + 2
            )));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::NonPositiveVariance(self.sigma2));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("beta"));
        }
        Ok(())
    }

    /// Checks every structural invariant: shape, positive variance, and
    /// strictly increasing frequencies in `(0, 0.5)` separated by `psi_omega`.
    pub fn validate(&self, psi_omega: f64) -> Result<()> {
        self.check_shape()?;
        if !omega_admissible(&self.omega, psi_omega) {
            return Err(Error::StateMismatch(format!(
                "frequencies {:?} are not sorted, in (0, 0.5) and separated by {psi_omega}",
                self.omega
            )));
        }
        Ok(())
    }

    /// Reorders components so that frequencies are ascending, carrying the
    /// coefficient pairs along.
    pub fn sort_components(&mut self) {
        let m = self.m();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| self.omega[a].total_cmp(&self.omega[b]));
        if idx.iter().enumerate().all(|(i, &j)| i == j) {
            return;
        }
        let omega: Vec<f64> = idx.iter().map(|&i| self.omega[i]).collect();
        let mut beta = Vec::with_capacity(self.beta.len());
        beta.extend_from_slice(&self.beta[..2]);
        for &i in &idx {
            beta.push(self.beta[2 + 2 * i]);
            beta.push(self.beta[3 + 2 * i]);
        }
        self.omega = omega;
        self.beta = beta;
    }
}

/// True when `omega` is strictly increasing inside `(0, 0.5)` with
/// consecutive gaps of at least `psi_omega`.
pub fn omega_admissible(omega: &[f64], psi_omega: f64) -> bool {
    omega.iter().all(|&w| w > 0.0 && w < 0.5)
        && omega.windows(2).all(|p| p[1] - p[0] >= psi_omega)
}

/// Minimum number of observations a segment with `m` frequencies must hold.
pub fn min_segment_len(m: usize) -> usize {
    2 * m + 2
}

/// Half-open range of global time indices `start..end` covered by a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SegmentBounds {
    pub start: usize,
    pub end: usize,
}

impl SegmentBounds {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.start && t < self.end
    }
}

/// The full sampler state: change-point locations and per-segment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub changepoints: Vec<f64>,
    pub segments: Vec<SegmentParams>,
}

impl ModelState {
    pub fn single(segment: SegmentParams) -> Self {
        Self {
            changepoints: Vec::new(),
            segments: vec![segment],
        }
    }

    /// Number of change-points.
    pub fn k(&self) -> usize {
        self.changepoints.len()
    }

    /// Frequency counts per segment.
    pub fn m(&self) -> Vec<usize> {
        self.segments.iter().map(SegmentParams::m).collect()
    }

    /// Integer segment layout for a series of length `n`.
    pub fn bounds(&self, n: usize) -> Vec<SegmentBounds> {
        segment_bounds(&self.changepoints, n)
    }

    /// Index of the segment containing time `t`.
    pub fn segment_of(&self, t: usize) -> usize {
        self.changepoints.partition_point(|&s| s <= t as f64)
    }

    /// Model mean at time `t`.
    pub fn signal_at(&self, t: usize) -> f64 {
        signal_at(t, &self.segments[self.segment_of(t)])
    }

    /// Checks every invariant of a state for a series of length `n`.
    pub fn validate(&self, n: usize, psi_s: f64, psi_omega: f64) -> Result<()> {
        if self.segments.len() != self.changepoints.len() + 1 {
            return Err(Error::StateMismatch(format!(
                "{} change-points but {} segments",
                self.changepoints.len(),
                self.segments.len()
            )));
        }
        if !changepoints_admissible(&self.changepoints, n, psi_s) {
            return Err(Error::StateMismatch(format!(
                "change-points {:?} violate spacing {psi_s} on 1..{n}",
                self.changepoints
            )));
        }
        for (seg, b) in self.segments.iter().zip(self.bounds(n)) {
            seg.validate(psi_omega)?;
            if b.len() < min_segment_len(seg.m()) {
                return Err(Error::SegmentTooShort {
                    len: b.len(),
                    m: seg.m(),
                    needed: min_segment_len(seg.m()),
                });
            }
        }
        Ok(())
    }
}

/// True when `1 + psi_s <= s_1`, `s_k <= n - psi_s` and consecutive
/// change-points are at least `psi_s` apart.
pub fn changepoints_admissible(s: &[f64], n: usize, psi_s: f64) -> bool {
    let Some(&last) = s.last() else {
        return true;
    };
    let mut prev = 1.0;
    for &x in s {
        if !x.is_finite() || x - prev < psi_s {
            return false;
        }
        prev = x;
    }
    n as f64 - last >= psi_s
}

/// Integer layout of the segments induced by continuous change-points.
/// Segment `j` holds the integers `t` with `s_j <= t < s_{j+1}`; the last one
/// also holds `n`.
pub fn segment_bounds(s: &[f64], n: usize) -> Vec<SegmentBounds> {
    let mut out = Vec::with_capacity(s.len() + 1);
    let mut start = 1usize;
    for &x in s {
        let end = (x.ceil() as usize).clamp(start, n + 1);
        out.push(SegmentBounds { start, end });
        start = end;
    }
    out.push(SegmentBounds { start, end: n + 1 });
    out
}

/// Basis vector `(1, t, cos(2 pi w_1 t), sin(2 pi w_1 t), ...)`.
pub fn basis_vector(t: usize, omega: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * omega.len() + 2);
    fill_basis(t, omega, &mut x);
    x
}

pub(crate) fn fill_basis(t: usize, omega: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let tf = t as f64;
    out.push(1.0);
    out.push(tf);
    for &w in omega {
        let (s, c) = (TAU * w * tf).sin_cos();
        out.push(c);
        out.push(s);
    }
}

/// Mean of the segment model at time `t`.
pub fn signal_at(t: usize, seg: &SegmentParams) -> f64 {
    mean_at(t, &seg.omega, &seg.beta)
}

pub(crate) fn mean_at(t: usize, omega: &[f64], beta: &[f64]) -> f64 {
    let tf = t as f64;
    let mut f = beta[0] + beta[1] * tf;
    for (l, &w) in omega.iter().enumerate() {
        let (s, c) = (TAU * w * tf).sin_cos();
        f += beta[2 + 2 * l] * c + beta[3 + 2 * l] * s;
    }
    f
}

/// Residual sum of squares of `y` (first element at global index `t_start`).
pub fn residual_sum_squares(y: &[f64], t_start: usize, omega: &[f64], beta: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            let r = v - mean_at(t_start + i, omega, beta);
            r * r
        })
        .sum()
}

/// Gaussian log-likelihood of one segment given its RSS.
pub fn loglik_from_rss(n: usize, rss: f64, sigma2: f64) -> f64 {
    -0.5 * n as f64 * (2.0 * PI * sigma2).ln() - rss / (2.0 * sigma2)
}

/// Gaussian log-likelihood of segment data `y` whose first element sits at
/// global index `t_start`.
pub fn segment_loglik(y: &[f64], t_start: usize, seg: &SegmentParams) -> f64 {
    let rss = residual_sum_squares(y, t_start, &seg.omega, &seg.beta);
    loglik_from_rss(y.len(), rss, seg.sigma2)
}

/// Log-likelihood of the whole series: the sum of segment log-likelihoods
/// taken left to right.
pub fn total_loglik(state: &ModelState, ts: &TimeSeries) -> Result<f64> {
    if state.segments.len() != state.changepoints.len() + 1 {
        return Err(Error::StateMismatch(format!(
            "{} change-points but {} segments",
            state.k(),
            state.segments.len()
        )));
    }
    if state
        .changepoints
        .iter()
        .any(|&s| !(s > 1.0 && s < ts.len() as f64))
    {
        return Err(Error::StateMismatch(format!(
            "change-points {:?} outside (1, {})",
            state.changepoints,
            ts.len()
        )));
    }
    let mut total = 0.0;
    for (seg, b) in state.segments.iter().zip(state.bounds(ts.len())) {
        total += segment_loglik(ts.slice(b), b.start, seg);
    }
    Ok(total)
}

/// Power `b1^2 + b2^2` of a sinusoid pair.
pub fn power(pair: (f64, f64)) -> f64 {
    pair.0 * pair.0 + pair.1 * pair.1
}

/// Phase `tau` in `[-pi, pi]` such that
/// `b1 cos(x) + b2 sin(x) = sqrt(power) * cos(x + tau)`.
pub fn phase(pair: (f64, f64)) -> Result<f64> {
    let (b1, b2) = pair;
    if b1 == 0.0 && b2 == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    // atan2(-0.0, negative) would give -pi; report +pi on the branch cut.
    Ok((-b2 + 0.0).atan2(b1))
}
