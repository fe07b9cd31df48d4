//! Sample summaries, Kolmogorov-Smirnov distances and histograms.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of the mean.
    pub sem: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, variance: f64::NAN, sem: f64::NAN };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { n, mean, variance, sem: (variance / n as f64).sqrt() }
    }
}

/// `sup |F_n - F|` for the samples against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Piecewise-linear CDF tabulated from a density.
#[derive(Clone, Debug)]
pub struct TabulatedCdf {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl TabulatedCdf {
    /// Cumulative trapezoid of `density` on `points` nodes over `[lo, hi]`,
    /// rescaled to end at 1.
    pub fn from_density(density: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Self {
        let step = (hi - lo) / (points - 1) as f64;
        let f: Vec<f64> = (0..points).map(|k| density(lo + k as f64 * step)).collect();
        let mut values = Vec::with_capacity(points);
        let mut acc = 0.0;
        values.push(0.0);
        for w in f.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            values.push(acc);
        }
        for v in &mut values {
            *v /= acc;
        }
        Self { lo, step, values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let k = pos.floor() as usize;
        if k + 1 >= self.values.len() {
            return 1.0;
        }
        let frac = pos - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

/// Fixed-width histogram that remembers records lacking the binned event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    /// Records that contributed no sample.
    pub skipped: usize,
}

impl Histogram {
    /// Bins covering `[lo, lo + width * bins)`; samples outside are clamped
    /// into the edge bins.
    pub fn fixed(samples: &[f64], lo: f64, width: f64, bins: usize, skipped: usize) -> Self {
        let mut counts = vec![0u64; bins.max(1)];
        let last = counts.len() - 1;
        for &x in samples {
            let k = ((x - lo) / width).floor();
            let k = if k < 0.0 { 0 } else { (k as usize).min(last) };
            counts[k] += 1;
        }
        Self { lo, width, counts, skipped }
    }

    /// `bins` equal bins spanning the sample range.
    pub fn spanning(samples: &[f64], bins: usize, skipped: usize) -> Self {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return Self::fixed(&[], 0.0, 1.0, bins, skipped);
        }
        let span = (hi - lo).max(f64::EPSILON * lo.abs().max(1.0));
        let width = span / bins as f64 * (1.0 + 1e-12);
        Self::fixed(samples, lo, width, bins, skipped)
    }

    /// Unit-width bins centred on the integers `0..=max`.
    pub fn integers(samples: &[usize], skipped: usize) -> Self {
        let max = samples.iter().copied().max().unwrap_or(0);
        let values: Vec<f64> = samples.iter().map(|&k| k as f64).collect();
        Self::fixed(&values, -0.5, 1.0, max + 1, skipped)
    }

    pub fn sampled(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Total number of records, binned or skipped.
    pub fn records(&self) -> usize {
        self.sampled() as usize + self.skipped
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|k| self.lo + (k as f64 + 0.5) * self.width)
            .collect()
    }

    /// Count per unit width per record, so the mass equals the binned fraction.
    pub fn density(&self) -> Vec<f64> {
        let scale = 1.0 / (self.records().max(1) as f64 * self.width);
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }

    pub fn mass(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.width
    }
}
