//! Experiment documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, SiteValue, TestFunction};
use crate::migration::{build_beta, MatrixSpec, MigrationMatrix, WeightVector, DEFAULT_FLOW_TOL};
use crate::trotter::{on_grid, TrotterParams, DEFAULT_QUAD_SUBSTEPS};
use crate::verify::quadrant_suite::QuadrantSettings;
use crate::verify::InterfaceSettings;

/// Named group of checks run by `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Martingale,
    Marginal,
    Correlation,
    Interface,
    Refinement,
    Doob,
    Quadrant,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Quadrant,
        Suite::Martingale,
        Suite::Marginal,
        Suite::Correlation,
        Suite::Doob,
        Suite::Refinement,
        Suite::Interface,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Martingale => "martingale",
            Suite::Marginal => "marginal",
            Suite::Correlation => "correlation",
            Suite::Interface => "interface",
            Suite::Refinement => "refinement",
            Suite::Doob => "doob",
            Suite::Quadrant => "quadrant",
        }
    }

    /// Whether the suite needs the system described by a document.
    pub fn needs_system(self) -> bool {
        !matches!(self, Suite::Interface | Suite::Quadrant)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteWeight {
    pub site: i64,
    pub weight: f64,
}

fn default_level() -> f64 {
    10.0
}

fn one() -> f64 {
    1.0
}

/// Parameters of the `verify` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    /// Empty means every suite.
    #[serde(default)]
    pub suites: Vec<Suite>,
    /// Defaults to the document's replica count.
    #[serde(default)]
    pub replicas: Option<u64>,
    /// Site for the marginal and correlation checks; defaults to the first site.
    #[serde(default)]
    pub site: Option<i64>,
    /// Grid time for the marginal checks; defaults to the horizon.
    #[serde(default)]
    pub time: Option<f64>,
    /// Time for the correlation check; defaults to `time`.
    #[serde(default)]
    pub correlation_time: Option<f64>,
    /// Aggregation weights; unlisted sites get weight 0, empty means all 1.
    #[serde(default)]
    pub weights: Vec<SiteWeight>,
    #[serde(default = "default_level")]
    pub doob_level: f64,
    #[serde(default)]
    pub doob_growth_override: Option<f64>,
    /// Scales the drift in the martingale check; 1 is the genuine functional.
    #[serde(default = "one")]
    pub drift_scale: f64,
    #[serde(default)]
    pub interface: InterfaceSettings,
    #[serde(default)]
    pub quadrant: QuadrantSettings,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            suites: Vec::new(),
            replicas: None,
            site: None,
            time: None,
            correlation_time: None,
            weights: Vec::new(),
            doob_level: default_level(),
            doob_growth_override: None,
            drift_scale: 1.0,
            interface: InterfaceSettings::default(),
            quadrant: QuadrantSettings::default(),
        }
    }
}

fn default_replicas() -> u64 {
    1000
}

fn default_flow_tol() -> f64 {
    DEFAULT_FLOW_TOL
}

fn default_quad_substeps() -> usize {
    DEFAULT_QUAD_SUBSTEPS
}

fn yes() -> bool {
    true
}

/// JSON experiment description.
///
/// ```json
/// {
///   "matrix": {"kind": "ssrw_z", "radius": 1, "topology": "torus"},
///   "initial": [{"site": -1, "type1": 1, "type2": 0}, {"site": 0, "type1": 0, "type2": 2}],
///   "epsilons": [0.05],
///   "horizon": 1.0,
///   "test_functions": [[{"site": -1, "type1": 0, "type2": 1}]],
///   "replicas": 1000,
///   "seed": 7
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDoc {
    pub matrix: MatrixSpec,
    /// Defaults to 1 for explicit matrices and ½ for lattice windows.
    #[serde(default)]
    pub beta_decay: Option<f64>,
    pub initial: Vec<SiteValue>,
    pub epsilons: Vec<f64>,
    pub horizon: f64,
    /// Empty means `[horizon]`.
    #[serde(default)]
    pub record_times: Vec<f64>,
    #[serde(default)]
    pub test_functions: Vec<Vec<SiteValue>>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_flow_tol")]
    pub flow_tol: f64,
    #[serde(default = "default_quad_substeps")]
    pub quad_substeps: usize,
    /// Write one CSV row per record time per replica.
    #[serde(default = "yes")]
    pub write_paths: bool,
    #[serde(default)]
    pub verify: VerifySettings,
}

/// A validated document with its matrix, weights and literals built.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub doc: ExperimentDoc,
    pub matrix: MigrationMatrix,
    pub beta: WeightVector,
    pub x0: Configuration,
    pub tests: Vec<TestFunction>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

impl ExperimentDoc {
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn params(&self, epsilon: f64) -> TrotterParams {
        TrotterParams {
            epsilon,
            horizon: self.horizon,
            flow_tol: self.flow_tol,
            quad_substeps: self.quad_substeps,
            record_times: if self.record_times.is_empty() { vec![self.horizon] } else { self.record_times.clone() },
        }
    }

    pub fn verify_replicas(&self) -> u64 {
        self.verify.replicas.unwrap_or(self.replicas)
    }

    /// Checks every field and builds the runtime objects.
    pub fn resolve(&self) -> Result<Experiment> {
        let matrix = self.matrix.build()?;
        let beta = build_beta(&matrix, self.beta_decay.unwrap_or_else(|| self.matrix.default_decay()))?;
        let x0 = Configuration::from_values(&matrix, &self.initial)?;
        let tests = self.test_functions.iter().map(|y| TestFunction::new(&matrix, y)).collect::<Result<Vec<_>>>()?;
        if self.epsilons.is_empty() {
            return Err(invalid("epsilons must be nonempty"));
        }
        if self.replicas == 0 || self.verify.replicas == Some(0) {
            return Err(invalid("replica counts must be positive"));
        }
        for &eps in &self.epsilons {
            self.params(eps).validate()?;
        }
        let v = &self.verify;
        if let Some(site) = v.site {
            matrix.index_of(site)?;
        }
        for w in &v.weights {
            matrix.index_of(w.site)?;
            if !(w.weight >= 0.0 && w.weight.is_finite()) {
                return Err(invalid(format!("weight at site {} must be finite and nonnegative", w.site)));
            }
        }
        for t in [v.time, v.correlation_time].into_iter().flatten() {
            if !(0.0..=self.horizon).contains(&t) {
                return Err(invalid(format!("verification time {t} outside [0, {}]", self.horizon)));
            }
        }
        if !(v.doob_level > 0.0) {
            return Err(invalid("doob_level must be positive"));
        }
        Ok(Experiment { doc: self.clone(), matrix, beta, x0, tests })
    }
}

impl Experiment {
    pub fn from_path(path: &Path) -> Result<Self> {
        ExperimentDoc::from_path(path)?.resolve()
    }

    /// Checks that the selected suites can run on this document.
    pub fn check_suites(&self, suites: &[Suite]) -> Result<()> {
        if suites.contains(&Suite::Marginal) {
            let t = self.verify_time();
            if let Some(eps) = self.doc.epsilons.iter().find(|&&e| !on_grid(t, e)) {
                return Err(Error::OffGrid { t, epsilon: *eps });
            }
        }
        if suites.iter().any(|s| matches!(s, Suite::Martingale | Suite::Refinement)) && self.tests.is_empty() {
            return Err(invalid("martingale and refinement suites need at least one test function"));
        }
        Ok(())
    }

    pub fn verify_site(&self) -> i64 {
        self.doc.verify.site.unwrap_or(self.matrix.sites()[0])
    }

    pub fn verify_time(&self) -> f64 {
        self.doc.verify.time.unwrap_or(self.doc.horizon)
    }

    /// Dense aggregation weights in matrix order.
    pub fn weights(&self) -> Vec<f64> {
        if self.doc.verify.weights.is_empty() {
            return vec![1.0; self.matrix.len()];
        }
        let mut w = vec![0.0; self.matrix.len()];
        for sw in &self.doc.verify.weights {
            w[self.matrix.index_of(sw.site).expect("validated")] += sw.weight;
        }
        w
    }
}
