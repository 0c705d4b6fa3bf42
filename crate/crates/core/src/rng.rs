//! Reproducible parallel randomness: one ChaCha stream per chunk, chunk
//! results combined in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Split `total` items into `streams` contiguous chunks as (start, len).
pub fn chunk_ranges(total: u64, streams: u32) -> Vec<(u64, u64)> {
    let s = u64::from(streams.max(1));
    (0..s)
        .map(|i| {
            let a = total * i / s;
            let b = total * (i + 1) / s;
            (a, b - a)
        })
        .collect()
}

/// Run `work(rng, chunk_index, start, len)` on every chunk in parallel and
/// return the results in chunk order.
pub fn map_chunks<T, F>(seed: u64, total: u64, streams: u32, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, usize, u64, u64) -> T + Sync,
{
    chunk_ranges(total, streams)
        .into_par_iter()
        .enumerate()
        .map(|(i, (start, len))| {
            let mut rng = stream_rng(seed, i as u64);
            work(&mut rng, i, start, len)
        })
        .collect()
}

/// Running mean and variance, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn merge(self, other: MeanVar) -> MeanVar {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        MeanVar {
            count: self.count + other.count,
            mean: self.mean + delta * other.count as f64 / n,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * other.count as f64 / n,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn combine(parts: impl IntoIterator<Item = MeanVar>) -> MeanVar {
        parts.into_iter().fold(MeanVar::default(), MeanVar::merge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunks_cover_everything() {
        let c = chunk_ranges(10, 3);
        assert_eq!(c, vec![(0, 3), (3, 3), (6, 4)]);
        assert_eq!(chunk_ranges(5, 0), vec![(0, 5)]);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = stream_rng(7, 0).gen();
        let b: f64 = stream_rng(7, 0).gen();
        let c: f64 = stream_rng(7, 1).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn meanvar_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let mut whole = MeanVar::default();
        xs.iter().for_each(|&v| whole.push(v));
        let mut a = MeanVar::default();
        let mut b = MeanVar::default();
        xs[..37].iter().for_each(|&v| a.push(v));
        xs[37..].iter().for_each(|&v| b.push(v));
        let m = a.merge(b);
        assert!((m.mean - whole.mean).abs() < 1e-14);
        assert!((m.variance() - whole.variance()).abs() < 1e-13);
    }
}
