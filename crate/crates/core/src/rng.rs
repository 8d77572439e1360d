//! Reproducible random streams.
//!
//! A stream is keyed by a master seed and a name; replica `i` of a stream is
//! the ChaCha8 word stream `i` under that key. Replicas therefore never depend
//! on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamFactory {
    master_seed: u64,
    name: String,
    key: [u8; 32],
}

impl StreamFactory {
    pub fn new(master_seed: u64, name: &str) -> Self {
        let mut h = Sha256::new();
        h.update(master_seed.to_le_bytes());
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        Self { master_seed, name: name.to_owned(), key: h.finalize().into() }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn replica(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }

    /// Sub-stream with a derived name, e.g. for a reference sample.
    pub fn child(&self, suffix: &str) -> Self {
        Self::new(self.master_seed, &format!("{}/{}", self.name, suffix))
    }
}
