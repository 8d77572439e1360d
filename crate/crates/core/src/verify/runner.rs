//! Deterministic fan-out of replicas over a worker pool.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::rng::StreamFactory;
use crate::verify::estimate::SeedProvenance;

/// Runs replica `i` of stream `name` on its own RNG stream `i`; results come
/// back in index order, so they do not depend on the worker count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplicaRunner {
    pub master_seed: u64,
    /// 0 means one worker per available core.
    pub workers: usize,
}

impl ReplicaRunner {
    pub fn new(master_seed: u64, workers: usize) -> Self {
        Self { master_seed, workers }
    }

    pub fn stream(&self, name: &str) -> StreamFactory {
        StreamFactory::new(self.master_seed, name)
    }

    pub fn provenance(&self, name: &str, n: u64) -> SeedProvenance {
        SeedProvenance { master_seed: self.master_seed, stream: name.to_owned(), first_replica: 0, end_replica: n }
    }

    pub fn map<T, F>(&self, name: &str, n: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        self.map_stream(&self.stream(name), n, f)
    }

    pub fn map_stream<T, F>(&self, streams: &StreamFactory, n: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.workers).build()?;
        pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = streams.replica(i);
                    f(i, &mut rng)
                })
                .collect()
        })
    }
}
