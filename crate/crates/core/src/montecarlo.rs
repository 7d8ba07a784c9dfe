//! Deterministic stream-partitioned Monte Carlo with batch-means errors.
//!
//! Sample `k` always draws from stream `k` of the run seed, so estimates do
//! not depend on the worker count.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BATCHES: usize = 32;

/// Word offset inside a sample's stream where the secondary (path) draws start.
/// The regularization draws use the head of the stream and never reach it.
pub const SECONDARY_WORD_POS: u128 = 1 << 40;

/// RNG for sample `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Same stream as [`stream_rng`], positioned past the primary draws.
pub fn secondary_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(SECONDARY_WORD_POS);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: Complex64, samples: usize) -> Self {
        Self {
            mean: value,
            stderr_re: 0.0,
            stderr_im: 0.0,
            samples,
        }
    }

    /// Combined standard error of the complex mean.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }

    /// True when `|mean - target|` is within `k` combined standard errors,
    /// with `abs_floor` absorbing round-off for zero-variance estimators.
    pub fn agrees_with(&self, target: Complex64, k: f64, abs_floor: f64) -> bool {
        (self.mean - target).norm() <= k * self.stderr() + abs_floor
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let (sr, si) = (self.stderr_re, self.stderr_im);
        Self {
            mean: self.mean * c,
            stderr_re: (c.re * sr).hypot(c.im * si),
            stderr_im: (c.im * sr).hypot(c.re * si),
            samples: self.samples,
        }
    }
}

fn check_counts(samples: usize, batches: usize) -> Result<usize> {
    if samples == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    if batches == 0 {
        return Err(Error::InvalidConfig("batch count must be positive".into()));
    }
    Ok(batches.min(samples))
}

/// Estimate `width` expectations at once from shared samples.
///
/// `f(k)` returns the `width` sample values for sample index `k`. Batches
/// run in parallel; batch `b` owns indices `[b*N/B, (b+1)*N/B)` and the
/// reduction order is fixed.
pub fn estimate_vec<F>(samples: usize, batches: usize, width: usize, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(u64) -> Result<Vec<Complex64>> + Sync,
{
    let batches = check_counts(samples, batches)?;
    let bounds = |b: usize| (b * samples / batches, (b + 1) * samples / batches);
    let sums: Vec<Vec<Complex64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = bounds(b);
            let mut acc = vec![Complex64::new(0.0, 0.0); width];
            for k in lo..hi {
                let vals = f(k as u64)?;
                if vals.len() != width {
                    return Err(Error::DimensionMismatch {
                        expected: width,
                        actual: vals.len(),
                    });
                }
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a += v;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(width);
    for w in 0..width {
        let total: Complex64 = sums.iter().map(|s| s[w]).sum();
        let mean = total / samples as f64;
        let (mut vr, mut vi) = (0.0, 0.0);
        for (b, s) in sums.iter().enumerate() {
            let (lo, hi) = bounds(b);
            let bm = s[w] / (hi - lo) as f64;
            vr += (bm.re - mean.re).powi(2);
            vi += (bm.im - mean.im).powi(2);
        }
        let (stderr_re, stderr_im) = if batches > 1 {
            let d = (batches * (batches - 1)) as f64;
            ((vr / d).sqrt(), (vi / d).sqrt())
        } else {
            (0.0, 0.0)
        };
        out.push(Estimate {
            mean,
            stderr_re,
            stderr_im,
            samples,
        });
    }
    Ok(out)
}

pub fn estimate<F>(samples: usize, batches: usize, f: F) -> Result<Estimate>
where
    F: Fn(u64) -> Result<Complex64> + Sync,
{
    let mut v = estimate_vec(samples, batches, 1, |k| f(k).map(|z| vec![z]))?;
    Ok(v.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: u64 = stream_rng(7, 3).random();
        let b: u64 = stream_rng(7, 3).random();
        let c: u64 = stream_rng(7, 4).random();
        let d: u64 = secondary_rng(7, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn constant_integrand_has_zero_error() {
        let e = estimate(1000, 32, |_| Ok(Complex64::new(2.0, -1.0))).unwrap();
        assert!((e.mean - Complex64::new(2.0, -1.0)).norm() < 1e-14);
        assert!(e.stderr() < 1e-14);
    }

    #[test]
    fn uniform_mean_and_error() {
        let e = estimate(100_000, 32, |k| {
            let u: f64 = stream_rng(1, k).random();
            Ok(Complex64::new(u, 0.0))
        })
        .unwrap();
        assert!(e.agrees_with(Complex64::new(0.5, 0.0), 4.0, 0.0));
        let expected = (1.0f64 / 12.0 / 100_000.0).sqrt();
        assert!((e.stderr_re / expected - 1.0).abs() < 0.5);
    }

    #[test]
    fn independent_of_thread_count() {
        let f = |k: u64| {
            let u: f64 = stream_rng(5, k).random();
            Ok(Complex64::new(u.ln(), u))
        };
        let a = estimate(5000, 32, f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| estimate(5000, 32, f)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_zero_samples() {
        assert!(estimate(0, 32, |_| Ok(Complex64::new(0.0, 0.0))).is_err());
    }

    #[test]
    fn fewer_samples_than_batches() {
        let e = estimate(5, 32, |k| Ok(Complex64::new(k as f64, 0.0))).unwrap();
        assert!((e.mean.re - 2.0).abs() < 1e-14);
        assert!(e.stderr_re > 0.0);
    }
}
