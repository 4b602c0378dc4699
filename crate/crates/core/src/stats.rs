//! Running moments, seeded random streams and the batched parallel driver
//! shared by every Monte Carlo routine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Replicates per batch. Each batch owns one random stream, so results do
/// not depend on how batches are scheduled across threads.
pub const BATCH_SIZE: u64 = 4096;

/// The random stream for replicate batch `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A fresh seed from the operating system.
pub fn entropy_seed() -> u64 {
    rand::random()
}

/// Welford accumulator for count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two accumulators (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let weight = other.count as f64 / n as f64;
        self.mean += delta * weight;
        self.m2 += other.m2 + delta * delta * self.count as f64 * weight;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Runs `samples` replicates in fixed-size batches and folds the per-batch
/// results in batch order.
///
/// `run_batch(rng, first, len)` must produce replicates `first..first+len`
/// from the stream it is handed.
pub fn run_batched<T, F, M>(seed: u64, samples: u64, run_batch: F, mut merge: M, init: T) -> T
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64, u64) -> T + Sync,
    M: FnMut(T, T) -> T,
{
    let batches = samples.div_ceil(BATCH_SIZE);
    let partials: Vec<T> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let first = b * BATCH_SIZE;
            let len = BATCH_SIZE.min(samples - first);
            let mut rng = stream_rng(seed, b);
            run_batch(&mut rng, first, len)
        })
        .collect();
    let mut acc = init;
    for p in partials {
        acc = merge(acc, p);
    }
    acc
}

/// Batched Welford estimate of the mean of `draw`.
pub fn estimate_mean<F>(seed: u64, samples: u64, draw: F) -> Welford
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    run_batched(
        seed,
        samples,
        |rng, _, len| {
            let mut w = Welford::new();
            for _ in 0..len {
                w.push(draw(rng));
            }
            w
        },
        |mut a, b| {
            a.merge(&b);
            a
        },
        Welford::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25, 0.0];
        let mut w = Welford::new();
        xs.iter().for_each(|&x| w.push(x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((w.mean() - mean).abs() < 1e-14);
        assert!((w.variance() - var).abs() < 1e-12);
        assert!((w.std_error() - (var / 6.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream_rng(7, 0).random();
        let b: u64 = stream_rng(7, 1).random();
        let c: u64 = stream_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn batched_estimate_independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_mean(11, 3 * BATCH_SIZE + 17, |rng| rng.random::<f64>()))
        };
        let one = run(1);
        let three = run(3);
        assert_eq!(one, three);
        assert_eq!(one.count(), 3 * BATCH_SIZE + 17);
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in prop::collection::vec(-1e3f64..1e3, 0..40), split in 0usize..40) {
            let split = split.min(xs.len());
            let mut whole = Welford::new();
            xs.iter().for_each(|&x| whole.push(x));
            let mut left = Welford::new();
            let mut right = Welford::new();
            xs[..split].iter().for_each(|&x| left.push(x));
            xs[split..].iter().for_each(|&x| right.push(x));
            left.merge(&right);
            prop_assert_eq!(left.count(), whole.count());
            prop_assert!((left.mean() - whole.mean()).abs() <= 1e-9 * (1.0 + whole.mean().abs()));
            prop_assert!((left.variance() - whole.variance()).abs() <= 1e-7 * (1.0 + whole.variance()));
        }
    }
}
