//! Data generators for the simulation studies.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{segment_bounds, signal_at, SegmentParams, TimeSeries};

/// Noise added to a piecewise sinusoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Noise {
    /// `N(0, sigma2_j)` in segment `j`.
    Gaussian,
    /// Student-t with `df[j]` degrees of freedom in segment `j`, multiplied by
    /// `sqrt(sigma2_j)` only when `scale_by_sigma` is set.
    StudentT { df: Vec<f64>, scale_by_sigma: bool },
}

/// A piecewise sinusoid with known parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidTruth {
    pub n: usize,
    pub changepoints: Vec<f64>,
    pub segments: Vec<SegmentParams>,
    pub noise: Noise,
}

impl SinusoidTruth {
    /// Noise-free mean at `t`.
    pub fn signal(&self) -> Vec<f64> {
        let bounds = segment_bounds(&self.changepoints, self.n);
        let mut out = Vec::with_capacity(self.n);
        for (seg, b) in self.segments.iter().zip(bounds) {
            out.extend((b.start..b.end).map(|t| signal_at(t, seg)));
        }
        out
    }
}

/// Three segments, `n = 900`, change-points at 300 and 650 with 3, 1 and 2
/// frequencies.
pub fn illustrative_truth() -> SinusoidTruth {
    let seg = |omega: Vec<f64>, mu: f64, pairs: &[(f64, f64)], sd: f64| {
        let mut beta = vec![0.0, mu];
        for &(a, b) in pairs {
            beta.push(a);
            beta.push(b);
        }
        SegmentParams {
            omega,
            beta,
            sigma2: sd * sd,
        }
    };
    SinusoidTruth {
        n: 900,
        changepoints: vec![300.0, 650.0],
        segments: vec![
            seg(
                vec![1.0 / 24.0, 1.0 / 15.0, 1.0 / 7.0],
                0.010,
                &[(2.0, 3.0), (4.0, 5.0), (1.0, 2.5)],
                4.0,
            ),
            seg(vec![1.0 / 12.0], 0.0, &[(4.0, 3.0)], 3.5),
            seg(
                vec![1.0 / 22.0, 1.0 / 15.0],
                -0.005,
                &[(2.5, 4.0), (4.0, 2.0)],
                2.8,
            ),
        ],
        noise: Noise::Gaussian,
    }
}

/// The illustrative design with Student-t errors of 2, 3 and 2 degrees of
/// freedom.
pub fn t_error_truth(scale_by_sigma: bool) -> SinusoidTruth {
    SinusoidTruth {
        noise: Noise::StudentT {
            df: vec![2.0, 3.0, 2.0],
            scale_by_sigma,
        },
        ..illustrative_truth()
    }
}

pub fn gen_piecewise_sinusoid<R: Rng + ?Sized>(
    truth: &SinusoidTruth,
    rng: &mut R,
) -> Result<TimeSeries> {
    if truth.segments.len() != truth.changepoints.len() + 1 {
        return Err(Error::StateMismatch(format!(
            "{} change-points but {} segments",
            truth.changepoints.len(),
            truth.segments.len()
        )));
    }
    let bounds = segment_bounds(&truth.changepoints, truth.n);
    let mut y = Vec::with_capacity(truth.n);
    for (j, (seg, b)) in truth.segments.iter().zip(bounds).enumerate() {
        let sd = seg.sigma2.sqrt();
        let t_dist = match &truth.noise {
            Noise::Gaussian => None,
            Noise::StudentT { df, scale_by_sigma } => {
                let v = *df.get(j).ok_or_else(|| {
                    Error::StateMismatch(format!("no degrees of freedom for segment {j}"))
                })?;
                let dist = StudentT::new(v)
                    .map_err(|e| Error::InvalidHyperparams(format!("df {v}: {e}")))?;
                Some((dist, if *scale_by_sigma { sd } else { 1.0 }))
            }
        };
        for t in b.start..b.end {
            let eps = match &t_dist {
                None => sd * rng.sample::<f64, _>(StandardNormal),
                Some((dist, scale)) => scale * dist.sample(rng),
            };
            y.push(signal_at(t, seg) + eps);
        }
    }
    TimeSeries::new(y)
}

/// One autoregressive regime `y_t = sum_i a_i y_{t-i} + e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArRegime {
    pub coeffs: Vec<f64>,
    pub noise_var: f64,
    pub len: usize,
}

/// The three regimes of the piecewise AR study: lengths 250, 150 and 150.
pub fn piecewise_ar_regimes() -> Vec<ArRegime> {
    vec![
        ArRegime {
            coeffs: vec![1.9, -0.975],
            noise_var: 0.25,
            len: 250,
        },
        ArRegime {
            coeffs: vec![1.9, -0.991],
            noise_var: 1.0,
            len: 150,
        },
        ArRegime {
            coeffs: vec![-1.35, -0.37, 0.36],
            noise_var: 1.0,
            len: 150,
        },
    ]
}

/// Runs the regimes back to back from zero initial values. `burn_in` extra
/// steps of the first regime are generated and discarded.
pub fn gen_piecewise_ar<R: Rng + ?Sized>(
    regimes: &[ArRegime],
    burn_in: usize,
    rng: &mut R,
) -> Result<TimeSeries> {
    let total: usize = regimes.iter().map(|r| r.len).sum();
    let mut y: Vec<f64> = Vec::with_capacity(total + burn_in);
    let steps = regimes
        .first()
        .into_iter()
        .map(|r| (r, burn_in))
        .chain(regimes.iter().map(|r| (r, r.len)));
    for (regime, len) in steps {
        let noise = Normal::new(0.0, regime.noise_var.sqrt())
            .map_err(|e| Error::InvalidHyperparams(format!("noise variance: {e}")))?;
        for _ in 0..len {
            let ar: f64 = regime
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, a)| a * y.len().checked_sub(i + 1).map_or(0.0, |p| y[p]))
                .sum();
            y.push(ar + noise.sample(rng));
        }
    }
    TimeSeries::new(y.split_off(burn_in))
}

/// Time-varying first coefficient `0.8 (1 - 0.5 cos(pi t / n))`.
pub fn slowly_varying_coefficient(t: usize, n: usize) -> f64 {
    0.8 * (1.0 - 0.5 * (PI * t as f64 / n as f64).cos())
}

pub const SLOWLY_VARYING_LEN: usize = 1031;
pub const SLOWLY_VARYING_A2: f64 = -0.81;

/// `y_t = a_t y_{t-1} - 0.81 y_{t-2} + e_t`, `t = 1..=1031`, unit noise.
pub fn gen_slowly_varying_ar<R: Rng + ?Sized>(rng: &mut R) -> Result<TimeSeries> {
    let n = SLOWLY_VARYING_LEN;
    let mut y: Vec<f64> = Vec::with_capacity(n);
    for t in 1..=n {
        let y1 = y.last().copied().unwrap_or(0.0);
        let y2 = if y.len() >= 2 { y[y.len() - 2] } else { 0.0 };
        let e: f64 = rng.sample(StandardNormal);
        y.push(slowly_varying_coefficient(t, n) * y1 + SLOWLY_VARYING_A2 * y2 + e);
    }
    TimeSeries::new(y)
}

/// Denominator `|1 - sum_i a_i exp(-i 2 pi w i)|^2` of an AR spectral density.
pub fn ar_spectrum_denominator(coeffs: &[f64], w: f64) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for (i, a) in coeffs.iter().enumerate() {
        let x = TAU * w * (i + 1) as f64;
        re -= a * x.cos();
        im += a * x.sin();
    }
    re * re + im * im
}

/// Frequency maximizing an AR(2) spectral density in closed form: the
/// interior stationary point `cos(2 pi w) = -a1 (1 - a2) / (4 a2)` when it
/// exists, else the better endpoint.
pub fn ar2_peak(a1: f64, a2: f64) -> f64 {
    if a2 < 0.0 {
        let c = -a1 * (1.0 - a2) / (4.0 * a2);
        if c.abs() <= 1.0 {
            return c.acos() / TAU;
        }
    }
    let coeffs = [a1, a2];
    if ar_spectrum_denominator(&coeffs, 0.0) <= ar_spectrum_denominator(&coeffs, 0.5) {
        0.0
    } else {
        0.5
    }
}

/// Peak frequency of the slowly varying AR at every `t = 1..=1031`.
pub fn slowly_varying_peak_curve() -> Vec<f64> {
    let n = SLOWLY_VARYING_LEN;
    (1..=n)
        .map(|t| ar2_peak(slowly_varying_coefficient(t, n), SLOWLY_VARYING_A2))
        .collect()
}

/// Spectral peak of an AR(p) on a uniform grid of `grid + 1` points over
/// `[0, 0.5]`, refined by golden-section search around the best point.
pub fn ar_peak_numeric(coeffs: &[f64], grid: usize) -> f64 {
    let f = |w: f64| ar_spectrum_denominator(coeffs, w);
    let step = 0.5 / grid as f64;
    let best = (0..=grid)
        .min_by(|&a, &b| f(a as f64 * step).total_cmp(&f(b as f64 * step)))
        .unwrap_or(0);
    let (mut lo, mut hi) = (
        (best as f64 - 1.0).max(0.0) * step,
        ((best + 1) as f64 * step).min(0.5),
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(x1) < f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

/// What a generator produced, for `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Truth {
    Sinusoid(SinusoidTruth),
    PiecewiseAr {
        regimes: Vec<ArRegime>,
        changepoints: Vec<f64>,
        burn_in: usize,
        peaks: Vec<f64>,
    },
    SlowlyVaryingAr {
        n: usize,
        peak_curve: Vec<f64>,
    },
}

/// True change-points of the piecewise AR at the first index of each new
/// regime.
pub fn piecewise_ar_changepoints(regimes: &[ArRegime]) -> Vec<f64> {
    let mut acc = 1usize;
    regimes[..regimes.len().saturating_sub(1)]
        .iter()
        .map(|r| {
            acc += r.len;
            acc as f64
        })
        .collect()
}

/// Named generators of the simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Illustrative,
    TErrors,
    PiecewiseAr,
    SlowlyVaryingAr,
}

impl Generator {
    pub const ALL: [Generator; 4] = [
        Generator::Illustrative,
        Generator::TErrors,
        Generator::PiecewiseAr,
        Generator::SlowlyVaryingAr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Illustrative => "illustrative",
            Generator::TErrors => "t-errors",
            Generator::PiecewiseAr => "piecewise-ar",
            Generator::SlowlyVaryingAr => "slowly-varying-ar",
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGenerator(s.to_string()))
    }
}

/// Options shared by the named generators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorOptions {
    /// Multiply t errors by the segment standard deviation.
    pub scale_t_errors: bool,
    /// Discarded warm-up steps for the piecewise AR.
    pub ar_burn_in: usize,
}

/// Draws one realization of `generator` and describes its truth.
pub fn generate<R: Rng + ?Sized>(
    generator: Generator,
    options: GeneratorOptions,
    rng: &mut R,
) -> Result<(TimeSeries, Truth)> {
    match generator {
        Generator::Illustrative | Generator::TErrors => {
            let truth = if generator == Generator::Illustrative {
                illustrative_truth()
            } else {
                t_error_truth(options.scale_t_errors)
            };
            let ts = gen_piecewise_sinusoid(&truth, rng)?;
            Ok((ts, Truth::Sinusoid(truth)))
        }
        Generator::PiecewiseAr => {
            let regimes = piecewise_ar_regimes();
            let ts = gen_piecewise_ar(&regimes, options.ar_burn_in, rng)?;
            let peaks = regimes
                .iter()
                .map(|r| ar_peak_numeric(&r.coeffs, 20_000))
                .collect();
            let changepoints = piecewise_ar_changepoints(&regimes);
            Ok((
                ts,
                Truth::PiecewiseAr {
                    regimes,
                    changepoints,
                    burn_in: options.ar_burn_in,
                    peaks,
                },
            ))
        }
        Generator::SlowlyVaryingAr => {
            let ts = gen_slowly_varying_ar(rng)?;
            Ok((
                ts,
                Truth::SlowlyVaryingAr {
                    n: SLOWLY_VARYING_LEN,
                    peak_curve: slowly_varying_peak_curve(),
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_reproduces_signal() {
        let mut truth = illustrative_truth();
        truth.noise = Noise::StudentT {
            df: vec![2.0; 3],
            scale_by_sigma: true,
        };
        for s in &mut truth.segments {
            s.sigma2 = 1e-300;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = gen_piecewise_sinusoid(&truth, &mut rng).unwrap();
        let f = truth.signal();
        assert_eq!(y.len(), 900);
        for (a, b) in y.values().iter().zip(&f) {
            assert!((a - b).abs() < 1e-100);
        }
        assert!((f[0] - signal_at(1, &truth.segments[0])).abs() == 0.0);
        assert!((f[899] - signal_at(900, &truth.segments[2])).abs() == 0.0);
    }

    #[test]
    fn noise_variance() {
        let truth = SinusoidTruth {
            n: 10_000,
            changepoints: vec![],
            segments: vec![SegmentParams {
                omega: vec![0.1],
                beta: vec![0.0; 4],
                sigma2: 6.25,
            }],
            noise: Noise::Gaussian,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = gen_piecewise_sinusoid(&truth, &mut rng).unwrap();
        let mean = y.values().iter().sum::<f64>() / 1e4;
        let var = y.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1e4;
        assert!((var / 6.25 - 1.0).abs() < 0.1);
    }

    #[test]
    fn same_seed_same_series() {
        let a = gen_slowly_varying_ar(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = gen_slowly_varying_ar(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1031);
    }

    #[test]
    fn ar_recursion_by_hand() {
        let regimes = vec![ArRegime {
            coeffs: vec![1.9, -0.975],
            noise_var: 1e-300,
            len: 10,
        }];
        // zero start and zero noise stays at zero
        let y = gen_piecewise_ar(&regimes, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(y.values().iter().all(|v| v.abs() < 1e-100));
        let regimes = piecewise_ar_regimes();
        assert_eq!(piecewise_ar_changepoints(&regimes), vec![251.0, 401.0]);
        let y = gen_piecewise_ar(&regimes, 0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(y.len(), 550);
    }

    #[test]
    fn ar_recursion_matches_manual_steps() {
        // Replay the generator's noise draws and apply the recursion by hand.
        let regimes = vec![ArRegime {
            coeffs: vec![0.5, -0.25],
            noise_var: 1.0,
            len: 10,
        }];
        let got = gen_piecewise_ar(&regimes, 0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let e: Vec<f64> = (0..10).map(|_| noise.sample(&mut rng)).collect();
        let mut y = vec![e[0], 0.5 * e[0] + e[1]];
        for t in 2..10 {
            y.push(0.5 * y[t - 1] - 0.25 * y[t - 2] + e[t]);
        }
        for (a, b) in got.values().iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn slowly_varying_endpoints() {
        let a1 = slowly_varying_coefficient(1, 1031);
        let an = slowly_varying_coefficient(1031, 1031);
        assert!((a1 - 0.4).abs() < 1e-5);
        assert!((an - 1.2).abs() < 1e-12);
    }

    #[test]
    fn closed_form_peak_matches_grid_oracle() {
        for &(a1, a2) in &[(1.9, -0.975), (1.9, -0.991), (0.4, -0.81), (1.2, -0.81), (0.8, -0.5)] {
            let closed = ar2_peak(a1, a2);
            let numeric = ar_peak_numeric(&[a1, a2], 20_000);
            assert!((closed - numeric).abs() < 1e-6, "{a1} {a2}: {closed} vs {numeric}");
        }
        let curve = slowly_varying_peak_curve();
        assert_eq!(curve.len(), 1031);
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        // AR(3) regime: high-frequency peak
        let p3 = ar_peak_numeric(&[-1.35, -0.37, 0.36], 20_000);
        assert!(p3 > 0.35 && p3 < 0.5);
    }

    #[test]
    fn named_generators() {
        use rand::SeedableRng;
        let lens = [900, 900, 550, 1031];
        for (g, len) in Generator::ALL.into_iter().zip(lens) {
            assert_eq!(g.name().parse::<Generator>().unwrap(), g);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
            let (ts, _) = generate(g, GeneratorOptions::default(), &mut rng).unwrap();
            assert_eq!(ts.len(), len, "{}", g.name());
        }
        assert!(matches!("ar".parse::<Generator>(), Err(Error::UnknownGenerator(_))));
    }
}
