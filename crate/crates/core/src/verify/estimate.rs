//! Monte Carlo accumulators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which replicas of which stream fed an estimate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub master_seed: u64,
    pub stream: String,
    pub first_replica: u64,
    pub end_replica: u64,
}

/// Running mean and centred second moment (Welford), mergeable with the
/// pairwise update of Chan, Golub and LeVeque.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<SeedProvenance>,
}

impl PathEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let mut e = Self::new();
        samples.into_iter().for_each(|x| e.push(x));
        e
    }

    pub fn with_seed(mut self, seed: SeedProvenance) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            let seed = self.seed.take();
            *self = other.clone();
            self.seed = seed.or_else(|| other.seed.clone());
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.n += other.n;
        if let (Some(a), Some(b)) = (self.seed.as_mut(), other.seed.as_ref()) {
            if a.stream == b.stream && a.master_seed == b.master_seed {
                a.first_replica = a.first_replica.min(b.first_replica);
                a.end_replica = a.end_replica.max(b.end_replica);
            }
        }
    }

    /// Unbiased sample variance; 0 below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// `√(m2 / (n(n-1)))`.
    pub fn se(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n as f64 * (self.n - 1) as f64)).sqrt()
        }
    }
}

/// Independent accumulators for the real and imaginary parts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub re: PathEstimate,
    pub im: PathEstimate,
}

impl ComplexEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples<I: IntoIterator<Item = Complex64>>(samples: I) -> Self {
        let mut e = Self::new();
        samples.into_iter().for_each(|z| e.push(z));
        e
    }

    pub fn push(&mut self, z: Complex64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn merge(&mut self, other: &Self) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn n(&self) -> u64 {
        self.re.n
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re.mean, self.im.mean)
    }

    pub fn se(&self) -> Complex64 {
        Complex64::new(self.re.se(), self.im.se())
    }

    /// `|mean| ≤ k·se` for both parts.
    pub fn within(&self, target: Complex64, k: f64) -> bool {
        let d = self.mean() - target;
        d.re.abs() <= k * self.re.se() && d.im.abs() <= k * self.im.se()
    }
}
