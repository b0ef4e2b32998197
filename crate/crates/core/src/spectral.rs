//! Periodograms and the periodogram-shaped frequency proposal.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::SegmentBounds;

/// Segments shorter than this use the direct DFT.
const DIRECT_DFT_MAX: usize = 64;

/// Squared DFT magnitudes `I_h` at frequencies `h / n`, `h = 0..floor(n/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    values: Vec<f64>,
    n: usize,
    cumulative: Vec<f64>,
}

impl Periodogram {
    fn from_values(values: Vec<f64>, n: usize) -> Self {
        let mut acc = 0.0;
        let cumulative = values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Self {
            values,
            n,
            cumulative,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Length of the segment the periodogram was computed from.
    pub fn segment_len(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Periodogram of a segment, indexing its observations locally from 0.
pub fn periodogram(y: &[f64]) -> Periodogram {
    let n = y.len();
    let half = n / 2;
    let values = if n <= DIRECT_DFT_MAX {
        direct_dft_power(y, half)
    } else {
        let mut buf: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
        fft.process(&mut buf);
        buf[..half].iter().map(|c| c.norm_sqr()).collect()
    };
    Periodogram::from_values(values, n)
}

fn direct_dft_power(y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    let twiddle: Vec<(f64, f64)> = (0..n)
        .map(|r| (TAU * r as f64 / n as f64).sin_cos())
        .collect();
    (0..half)
        .map(|h| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in y.iter().enumerate() {
                let (s, c) = twiddle[(h * j) % n];
                re += v * c;
                im -= v * s;
            }
            re * re + im * im
        })
        .collect()
}

/// Draws a frequency from the periodogram-shaped density: bin `h` with
/// probability `I_h / sum(I)`, then uniformly within `[h/n, (h+1)/n)`.
pub fn q1_sample<R: Rng + ?Sized>(pg: &Periodogram, rng: &mut R) -> Result<f64> {
    let total = pg.total();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegeneratePeriodogram);
    }
    let n = pg.n as f64;
    loop {
        let target = rng.random::<f64>() * total;
        let h = pg
            .cumulative
            .partition_point(|&c| c <= target)
            .min(pg.values.len() - 1);
        if pg.values[h] <= 0.0 {
            continue;
        }
        let w = (h as f64 + rng.random::<f64>()) / n;
        if w > 0.0 && w < 0.5 {
            return Ok(w);
        }
    }
}

/// Log density of [`q1_sample`] at `freq`.
pub fn q1_log_density(freq: f64, pg: &Periodogram) -> Result<f64> {
    if !(freq > 0.0 && freq < 0.5) {
        return Err(Error::FrequencyOutOfRange(freq));
    }
    let total = pg.total();
    if !(total > 0.0) {
        return Err(Error::DegeneratePeriodogram);
    }
    let h = (freq * pg.n as f64).floor() as usize;
    match pg.values.get(h) {
        Some(&v) if v > 0.0 => Ok((v / total * pg.n as f64).ln()),
        _ => Ok(f64::NEG_INFINITY),
    }
}

/// Periodograms of the current segments, keyed by their bounds.
#[derive(Debug, Default, Clone)]
pub struct PeriodogramCache {
    entries: HashMap<SegmentBounds, Arc<Periodogram>>,
}

impl PeriodogramCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&mut self, bounds: SegmentBounds, y: &[f64]) -> Arc<Periodogram> {
        self.entries
            .entry(bounds)
            .or_insert_with(|| Arc::new(periodogram(y)))
            .clone()
    }

    /// Drops entries whose bounds are not in `keep`.
    pub fn retain(&mut self, keep: &[SegmentBounds]) {
        self.entries.retain(|b, _| keep.contains(b));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) DFT written straight from the definition.
    fn naive(y: &[f64]) -> Vec<f64> {
        let n = y.len();
        (0..n / 2)
            .map(|h| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &v) in y.iter().enumerate() {
                    let a = -TAU * h as f64 * j as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn constant_series() {
        let pg = periodogram(&[1.5; 8]);
        assert_eq!(pg.values().len(), 4);
        assert!((pg.values()[0] - 144.0).abs() < 1e-9);
        assert!(pg.values()[1..].iter().all(|&v| v < 1e-20));
    }

    #[test]
    fn cosine_at_bin_two() {
        let y: Vec<f64> = (0..16).map(|t| (TAU * 2.0 * t as f64 / 16.0).cos()).collect();
        let pg = periodogram(&y);
        assert!((pg.values()[2] - 64.0).abs() < 1e-9);
        for (h, &v) in pg.values().iter().enumerate() {
            if h != 2 {
                assert!(v < 1e-18, "bin {h} = {v}");
            }
        }
    }

    #[test]
    fn both_routes_match_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &n in &[2usize, 7, 32, 63, 64, 65, 128, 301, 900] {
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let got = periodogram(&y);
            let want = naive(&y);
            let scale = want.iter().copied().fold(1.0, f64::max);
            for (a, b) in got.values().iter().zip(&want) {
                assert!((a - b).abs() <= 1e-8 * scale, "n = {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn single_bin_samples_inside_it() {
        let mut v = vec![0.0; 8];
        v[3] = 5.0;
        let pg = Periodogram::from_values(v, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let w = q1_sample(&pg, &mut rng).unwrap();
            assert!((3.0 / 16.0..4.0 / 16.0).contains(&w));
        }
    }

    #[test]
    fn degenerate_periodogram_is_reported() {
        let pg = Periodogram::from_values(vec![0.0; 4], 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(q1_sample(&pg, &mut rng), Err(Error::DegeneratePeriodogram)));
    }

    #[test]
    fn density_examples() {
        let flat = Periodogram::from_values(vec![1.0; 8], 16);
        for &w in &[0.01, 0.2, 0.49] {
            assert!((q1_log_density(w, &flat).unwrap() - 2f64.ln()).abs() < 1e-12);
        }
        let mut v = vec![1.0; 8];
        v[5] = 0.0;
        let holey = Periodogram::from_values(v, 16);
        assert_eq!(q1_log_density(5.5 / 16.0, &holey).unwrap(), f64::NEG_INFINITY);
        assert!(q1_log_density(0.6, &flat).is_err());
        // Riemann sum over bins.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let pg = Periodogram::from_values(vals, 25);
        let integral: f64 = (0..12)
            .map(|h| q1_log_density((h as f64 + 0.5) / 25.0, &pg).unwrap().exp() / 25.0)
            .sum();
        assert!((integral - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cache_reuses_and_prunes() {
        let mut cache = PeriodogramCache::new();
        let a = SegmentBounds { start: 1, end: 9 };
        let b = SegmentBounds { start: 9, end: 17 };
        let y = [1.0; 8];
        let p1 = cache.get_or_compute(a, &y);
        let p2 = cache.get_or_compute(a, &y);
        assert!(Arc::ptr_eq(&p1, &p2));
        cache.get_or_compute(b, &y);
        cache.retain(&[b]);
        assert_eq!(cache.len(), 1);
    }
}
