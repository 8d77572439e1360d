//! The Trotter process `X^ε`.
//!
//! On `[nε, (n+1)ε)` both types follow the migration flow; at `(n+1)ε` every
//! site is replaced by an independent draw from the harmonic measure at its
//! pre-jump value. Paths are right-continuous: the state recorded at a grid
//! time is the post-jump state.
//!
//! Alongside the state the simulator accumulates, for each test function `y`,
//!
//! ```text
//! M_t = H(X_t, y) - H(x₀, y) - ∫₀ᵗ ⟨⟨A X_s, y⟩⟩ H(X_s, y) ds,
//! ```
//!
//! integrating each flow interval by composite Simpson.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{h_value, is_boundary_state, pairing_fields, Configuration, TestFunction};
use crate::migration::{apply_flow, norm_beta, FlowOperator, MigrationMatrix, Topology, WeightVector, DEFAULT_FLOW_TOL};
use crate::quadrant::{sample, QuadrantPoint};

pub const DEFAULT_QUAD_SUBSTEPS: usize = 8;

/// Relative slack when snapping a time onto the `ε`-grid.
const GRID_SNAP: f64 = 1e-9;

fn default_flow_tol() -> f64 {
    DEFAULT_FLOW_TOL
}

fn default_quad_substeps() -> usize {
    DEFAULT_QUAD_SUBSTEPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterParams {
    pub epsilon: f64,
    pub horizon: f64,
    #[serde(default = "default_flow_tol")]
    pub flow_tol: f64,
    #[serde(default = "default_quad_substeps")]
    pub quad_substeps: usize,
    /// Empty means `[horizon]`.
    #[serde(default)]
    pub record_times: Vec<f64>,
}

impl TrotterParams {
    pub fn new(epsilon: f64, horizon: f64) -> Self {
        Self {
            epsilon,
            horizon,
            flow_tol: DEFAULT_FLOW_TOL,
            quad_substeps: DEFAULT_QUAD_SUBSTEPS,
            record_times: vec![horizon],
        }
    }

    pub fn with_record_times(mut self, times: Vec<f64>) -> Self {
        self.record_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !self.horizon.is_finite() {
            return Err(Error::NonFinite("horizon"));
        }
        if self.horizon < 0.0 {
            return Err(Error::NegativeTime(self.horizon));
        }
        if !(self.flow_tol > 0.0 && self.flow_tol < 1.0) {
            return Err(Error::InvalidParams(format!("flow_tol must lie in (0, 1), got {}", self.flow_tol)));
        }
        if self.quad_substeps == 0 {
            return Err(Error::InvalidParams("quad_substeps must be at least 1".into()));
        }
        let mut prev = 0.0;
        for &t in &self.record_times {
            if !(t >= prev && t <= self.horizon) {
                return Err(Error::InvalidParams(format!(
                    "record times must be sorted within [0, {}], got {t}",
                    self.horizon
                )));
            }
            prev = t;
        }
        Ok(())
    }

    /// Simpson needs an even node count; odd requests are rounded up.
    pub fn simpson_intervals(&self) -> usize {
        let q = self.quad_substeps.max(2);
        q + q % 2
    }

    /// Number of jumps in `[0, horizon]`.
    pub fn jump_count(&self) -> usize {
        grid_position(self.horizon, self.epsilon).0
    }

    fn effective_record_times(&self) -> Vec<f64> {
        if self.record_times.is_empty() {
            vec![self.horizon]
        } else {
            self.record_times.clone()
        }
    }
}

/// `(n, δ)` with `t = nε + δ` and `0 ≤ δ < ε`; times within a relative
/// `1e-9` of a grid point snap onto it.
pub fn grid_position(t: f64, epsilon: f64) -> (usize, f64) {
    let q = t / epsilon;
    let n = q.round();
    if (q - n).abs() <= GRID_SNAP * q.max(1.0) {
        (n as usize, 0.0)
    } else {
        let n = q.floor();
        (n as usize, (t - n * epsilon).max(0.0))
    }
}

/// Whether `t` is a grid time `nε`.
pub fn on_grid(t: f64, epsilon: f64) -> bool {
    grid_position(t, epsilon).1 == 0.0
}

/// Interface positions on a window of `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub b1: i64,
    pub b2: i64,
}

/// `b1` when no site carries type 1.
pub const NO_TYPE1: i64 = i64::MIN;
/// `b2` when no site carries type 2.
pub const NO_TYPE2: i64 = i64::MAX;

/// `b1 = 1 + max{k : x₁(k) > 0}`, `b2 = min{k : x₂(k) > 0}`.
pub fn interface_positions(x: &Configuration) -> Interface {
    let sites = x.sites();
    let b1 = x.type1().iter().rposition(|&m| m > 0.0).map_or(NO_TYPE1, |k| sites[k] + 1);
    let b2 = x.type2().iter().position(|&m| m > 0.0).map_or(NO_TYPE2, |k| sites[k]);
    Interface { b1, b2 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub states: Vec<Configuration>,
    /// Indexed `[test function][record time]`.
    pub martingale_values: Vec<Vec<Complex64>>,
    /// Present for window topologies.
    pub interface: Option<Vec<Interface>>,
    /// Largest `‖X₁ + X₂‖_β` seen at time 0, before and after every jump and
    /// at every record time; `NaN` without a weight vector.
    pub sup_total_norm: f64,
}

/// Flow over one interval of length `δ`, with its Simpson substep.
#[derive(Clone, Debug)]
struct Segment {
    length: f64,
    full: FlowOperator,
    sub: Option<FlowOperator>,
}

#[derive(Clone, Copy, Debug)]
struct RecordSlot {
    time: f64,
    grid: usize,
    segment: Option<usize>,
}

/// Simulator for one `(matrix, params, test functions)` triple; reusable
/// across replicas.
#[derive(Clone, Debug)]
pub struct Simulator<'a> {
    matrix: &'a MigrationMatrix,
    beta: Option<&'a WeightVector>,
    params: TrotterParams,
    tests: Vec<TestFunction>,
    drift_scale: f64,
    jumps: usize,
    q: usize,
    step: Segment,
    partial: Vec<Segment>,
    records: Vec<RecordSlot>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        matrix: &'a MigrationMatrix,
        beta: Option<&'a WeightVector>,
        params: TrotterParams,
        tests: Vec<TestFunction>,
    ) -> Result<Self> {
        params.validate()?;
        if let Some(b) = beta {
            if b.values().len() != matrix.len() {
                return Err(Error::SiteMismatch { expected: matrix.len(), got: b.values().len() });
            }
        }
        let q = params.simpson_intervals();
        let with_sub = !tests.is_empty();
        let make = |length: f64| -> Result<Segment> {
            Ok(Segment {
                length,
                full: FlowOperator::new(matrix, length, params.flow_tol)?,
                sub: if with_sub { Some(FlowOperator::new(matrix, length / q as f64, params.flow_tol)?) } else { None },
            })
        };
        let jumps = params.jump_count();
        if jumps == 0 && params.horizon > 0.0 {
            log::warn!(
                "epsilon {} exceeds horizon {}: the path is a single flow segment without jumps",
                params.epsilon,
                params.horizon
            );
        }
        let step = make(params.epsilon)?;
        let mut partial: Vec<Segment> = Vec::new();
        let mut records = Vec::new();
        for time in params.effective_record_times() {
            let (grid, offset) = grid_position(time, params.epsilon);
            let segment = if offset == 0.0 {
                None
            } else if let Some(i) = partial.iter().position(|s| s.length == offset) {
                Some(i)
            } else {
                partial.push(make(offset)?);
                Some(partial.len() - 1)
            };
            records.push(RecordSlot { time, grid, segment });
        }
        Ok(Self { matrix, beta, params, tests, drift_scale: 1.0, jumps, q, step, partial, records })
    }

    /// Multiplies the drift integrand; anything but 1 breaks the martingale
    /// property and serves as a negative control.
    pub fn with_drift_scale(mut self, scale: f64) -> Self {
        self.drift_scale = scale;
        self
    }

    pub fn params(&self) -> &TrotterParams {
        &self.params
    }

    pub fn matrix(&self) -> &MigrationMatrix {
        self.matrix
    }

    pub fn test_functions(&self) -> &[TestFunction] {
        &self.tests
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    /// One replica. The RNG is consumed once per interior site per jump, in
    /// site order.
    pub fn run<R: Rng + ?Sized>(&self, x0: &Configuration, rng: &mut R) -> Result<PathRecord> {
        if x0.len() != self.matrix.len() {
            return Err(Error::SiteMismatch { expected: self.matrix.len(), got: x0.len() });
        }
        let n = x0.len();
        let ny = self.tests.len();
        let track_interface = self.matrix.topology() != Topology::General;
        let h0: Vec<Complex64> = self.tests.iter().map(|y| h_value(x0, y)).collect();

        let mut cur = x0.clone();
        let mut next = x0.clone();
        let mut scratch = Scratch::new(n, ny);
        let mut integral = vec![Complex64::new(0.0, 0.0); ny];
        let mut partial_integral = vec![Complex64::new(0.0, 0.0); ny];
        let mut sup = self.total_norm(&cur);

        let mut out = PathRecord {
            times: Vec::with_capacity(self.records.len()),
            states: Vec::with_capacity(self.records.len()),
            martingale_values: vec![Vec::with_capacity(self.records.len()); ny],
            interface: track_interface.then(Vec::new),
            sup_total_norm: 0.0,
        };
        let mut slot = 0;
        for grid in 0..=self.jumps {
            if grid > 0 {
                self.flow_segment(&self.step, &cur, &mut next, &mut integral, &mut scratch);
                sup = sup.max(self.total_norm(&next));
                resample_into(&next, &mut cur, rng);
                sup = sup.max(self.total_norm(&cur));
            }
            while slot < self.records.len() && self.records[slot].grid == grid {
                let rec = self.records[slot];
                let state = match rec.segment {
                    None => {
                        partial_integral.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                        cur.clone()
                    }
                    Some(i) => {
                        partial_integral.copy_from_slice(&integral);
                        self.flow_segment(&self.partial[i], &cur, &mut next, &mut partial_integral, &mut scratch);
                        partial_integral.iter_mut().zip(&integral).for_each(|(p, full)| *p -= full);
                        next.clone()
                    }
                };
                sup = sup.max(self.total_norm(&state));
                for (j, y) in self.tests.iter().enumerate() {
                    let m = h_value(&state, y) - h0[j] - integral[j] - partial_integral[j];
                    out.martingale_values[j].push(m);
                }
                if let Some(iface) = out.interface.as_mut() {
                    iface.push(interface_positions(&state));
                }
                out.times.push(rec.time);
                out.states.push(state);
                slot += 1;
            }
        }
        out.sup_total_norm = sup;
        Ok(out)
    }

    fn total_norm(&self, x: &Configuration) -> f64 {
        match self.beta {
            Some(beta) => norm_beta(x.type1(), beta) + norm_beta(x.type2(), beta),
            None => f64::NAN,
        }
    }

    /// Flows `from` over `seg` into `to`, adding the drift integral over the
    /// interval to `integral`.
    fn flow_segment(
        &self,
        seg: &Segment,
        from: &Configuration,
        to: &mut Configuration,
        integral: &mut [Complex64],
        s: &mut Scratch,
    ) {
        let Some(sub) = seg.sub.as_ref() else {
            let (t1, t2) = to.fields_mut();
            seg.full.apply(from.type1(), t1);
            seg.full.apply(from.type2(), t2);
            return;
        };
        let h = seg.length / self.q as f64;
        s.acc.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        s.z1.copy_from_slice(from.type1());
        s.z2.copy_from_slice(from.type2());
        for node in 0..=self.q {
            if node > 0 {
                sub.apply(&s.z1, &mut s.w1);
                sub.apply(&s.z2, &mut s.w2);
                std::mem::swap(&mut s.z1, &mut s.w1);
                std::mem::swap(&mut s.z2, &mut s.w2);
            }
            let weight = if node == 0 || node == self.q {
                1.0
            } else if node % 2 == 1 {
                4.0
            } else {
                2.0
            };
            self.matrix.apply(&s.z1, &mut s.a1);
            self.matrix.apply(&s.z2, &mut s.a2);
            for (j, y) in self.tests.iter().enumerate() {
                let drift = pairing_fields(&s.a1, &s.a2, y);
                let hv = pairing_fields(&s.z1, &s.z2, y).exp();
                s.acc[j] += weight * drift * hv;
            }
        }
        let scale = self.drift_scale * h / 3.0;
        for (total, a) in integral.iter_mut().zip(&s.acc) {
            *total += scale * a;
        }
        let (t1, t2) = to.fields_mut();
        t1.copy_from_slice(&s.z1);
        t2.copy_from_slice(&s.z2);
    }
}

struct Scratch {
    z1: Vec<f64>,
    z2: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    acc: Vec<Complex64>,
}

impl Scratch {
    fn new(n: usize, ny: usize) -> Self {
        Self {
            z1: vec![0.0; n],
            z2: vec![0.0; n],
            w1: vec![0.0; n],
            w2: vec![0.0; n],
            a1: vec![0.0; n],
            a2: vec![0.0; n],
            acc: vec![Complex64::new(0.0, 0.0); ny],
        }
    }
}

/// Replaces every site of `from` by an independent draw from its harmonic
/// measure, writing into `to`.
fn resample_into<R: Rng + ?Sized>(from: &Configuration, to: &mut Configuration, rng: &mut R) {
    let (t1, t2) = to.fields_mut();
    for (k, (a, b)) in from.type1().iter().zip(from.type2()).enumerate() {
        let p = sample(QuadrantPoint { u: *a, v: *b }, rng).to_point();
        t1[k] = p.u;
        t2[k] = p.v;
    }
}

/// Resamples every site in place.
pub fn resample_in_place<R: Rng + ?Sized>(x: &mut Configuration, rng: &mut R) {
    let from = x.clone();
    resample_into(&from, x, rng);
}

/// One `ε`-step: flow for `ε`, then resample every site.
pub fn step<R: Rng + ?Sized>(
    x: &Configuration,
    matrix: &MigrationMatrix,
    params: &TrotterParams,
    rng: &mut R,
) -> Result<Configuration> {
    params.validate()?;
    let mut y = apply_flow(x, params.epsilon, matrix, params.flow_tol)?;
    resample_in_place(&mut y, rng);
    Ok(y)
}

/// Single path with its own simulator; warns on an interior initial state.
pub fn simulate<R: Rng + ?Sized>(
    x0: &Configuration,
    matrix: &MigrationMatrix,
    beta: Option<&WeightVector>,
    params: &TrotterParams,
    tests: &[TestFunction],
    rng: &mut R,
) -> Result<PathRecord> {
    if !is_boundary_state(x0) {
        log::warn!("initial state has sites carrying both types; they are resampled at the first jump");
    }
    Simulator::new(matrix, beta, params.clone(), tests.to_vec())?.run(x0, rng)
}
