//! Statistical checks of the identities satisfied by the Trotter process and
//! the harmonic measure.
//!
//! Every stochastic check compares against a `4·SE` band or a KS threshold at
//! significance 0.01, and draws its randomness from a named stream so that
//! reports are reproducible from `(master seed, parameters)`.

pub mod checks;
pub mod estimate;
pub mod gof;
pub mod quadrant_suite;
pub mod quadrature;
pub mod runner;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use checks::*;
pub use estimate::{ComplexEstimate, PathEstimate, SeedProvenance};
pub use gof::{ks_against_cdf, ks_two_sample, GofReport, HarmonicLaw};
pub use runner::ReplicaRunner;

/// Width of every mean-type acceptance band, in standard errors.
pub const SE_BAND: f64 = 4.0;

/// Uniform JSON record emitted by every check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub test: String,
    pub params: Value,
    pub estimate: Value,
    pub se_or_statistic: Value,
    pub threshold: Value,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

pub(crate) fn cjson(z: Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

/// Result of a named group of checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub reports: Vec<Report>,
}

impl SuiteReport {
    pub fn new(suite: &str, reports: Vec<Report>) -> Self {
        let pass = reports.iter().all(|r| r.pass);
        Self { suite: suite.to_owned(), pass, reports }
    }
}
