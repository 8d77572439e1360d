//! Migration matrix `A`, weight vector `β`, weighted norms and the flow
//! semigroup `S_t = exp(tA)` on a finite site set.
//!
//! `A` may be any bounded matrix with nonnegative off-diagonal entries; it
//! need not be a q-matrix. The flow is evaluated with the shifted series
//!
//! ```text
//! exp(tA) = exp(-ct) · Σ_n tⁿ (A + cI)ⁿ / n!,   c = max_k |A(k,k)|,
//! ```
//!
//! whose terms are entrywise nonnegative. Truncation is controlled by a
//! Poisson tail bound, so the result is nonnegative and the neglected mass is
//! bounded a posteriori.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::lattice::Configuration;

/// Default series truncation tolerance for the flow.
pub const DEFAULT_FLOW_TOL: f64 = 1e-12;

/// Largest Poisson mean handled in one series evaluation; longer flows are
/// split into equal substeps.
const MAX_SERIES_MEAN: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    General,
    ZWindowAbsorbing,
    ZTorus,
}

/// Boundary rule for a finite window `{-L, ..., L}` of `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowBoundary {
    /// Walk leaving the window is killed; rows at the edge are substochastic.
    Absorbing,
    /// Sites are identified modulo `2L + 1`; mass is conserved.
    Torus,
}

/// JSON description of a migration matrix.
///
/// ```json
/// {"kind": "explicit", "sites": [0, 1], "entries": [[0, 1, 0.5], [0, 0, -0.5]]}
/// {"kind": "ssrw_z", "radius": 50, "topology": "absorbing"}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    Explicit {
        sites: Vec<i64>,
        entries: Vec<(i64, i64, f64)>,
    },
    SsrwZ {
        radius: usize,
        topology: WindowBoundary,
    },
}

impl MatrixSpec {
    pub fn build(&self) -> Result<MigrationMatrix> {
        match self {
            MatrixSpec::Explicit { sites, entries } => {
                MigrationMatrix::from_entries(sites.clone(), entries.iter().copied())
            }
            MatrixSpec::SsrwZ { radius, topology } => Ok(MigrationMatrix::ssrw_z(*radius, *topology)),
        }
    }

    /// Default decay of the geometric weight for this kind of site set.
    pub fn default_decay(&self) -> f64 {
        match self {
            MatrixSpec::Explicit { .. } => 1.0,
            MatrixSpec::SsrwZ { .. } => 0.5,
        }
    }
}

/// Sparse migration matrix in compressed row storage.
///
/// Sites are kept sorted by label; all per-site arrays in the crate use this
/// order.
#[derive(Clone, Debug)]
pub struct MigrationMatrix {
    sites: Arc<[i64]>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    norm_a: f64,
    lambda: f64,
    shift: f64,
    max_shifted_row_sum: f64,
    topology: Topology,
}

impl MigrationMatrix {
    /// Builds a matrix from `(k, l, A(k, l))` triples over the given site labels.
    /// Missing entries are zero.
    pub fn from_entries<I>(sites: Vec<i64>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, i64, f64)>,
    {
        Self::build(sites, entries, Topology::General)
    }

    fn build<I>(mut sites: Vec<i64>, entries: I, topology: Topology) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, i64, f64)>,
    {
        if sites.is_empty() {
            return Err(Error::EmptySiteSet);
        }
        sites.sort_unstable();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSite(w[0]));
        }
        let index = |s: i64| sites.binary_search(&s).map_err(|_| Error::UnknownSite(s));

        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (k, l, value) in entries {
            if !value.is_finite() {
                return Err(Error::NonFinite("matrix entry"));
            }
            if k != l && value < 0.0 {
                return Err(Error::NegativeOffDiagonal { k, l, value });
            }
            let key = (index(k)?, index(l)?);
            if map.insert(key, value).is_some() {
                return Err(Error::DuplicateEntry { k, l });
            }
        }

        let n = sites.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(map.len());
        let mut vals = Vec::with_capacity(map.len());
        let mut diag = vec![0.0; n];
        let mut row_abs = vec![0.0; n];
        let mut col_abs = vec![0.0; n];
        let mut row_sum = vec![0.0; n];
        row_ptr.push(0);
        let mut row = 0;
        for (&(k, l), &value) in &map {
            while row < k {
                row_ptr.push(cols.len());
                row += 1;
            }
            if value == 0.0 {
                continue;
            }
            cols.push(l);
            vals.push(value);
            if k == l {
                diag[k] = value;
            }
            row_abs[k] += value.abs();
            col_abs[l] += value.abs();
            row_sum[k] += value;
        }
        while row < n {
            row_ptr.push(cols.len());
            row += 1;
        }

        let norm_a = (0..n).map(|k| row_abs[k] + col_abs[k]).fold(0.0, f64::max);
        let lambda = diag.iter().map(|d| -d).fold(f64::NEG_INFINITY, f64::max);
        let shift = diag.iter().map(|d| d.abs()).fold(0.0, f64::max);
        let max_shifted_row_sum = row_sum.iter().map(|s| s + shift).fold(0.0, f64::max);

        Ok(Self {
            sites: sites.into(),
            row_ptr,
            cols,
            vals,
            diag,
            norm_a,
            lambda,
            shift,
            max_shifted_row_sum,
            topology,
        })
    }

    /// Generator of continuous-time rate-1 simple random walk on `{-L, ..., L}`:
    /// `Af(k) = ½f(k+1) + ½f(k-1) - f(k)`, with the given boundary rule.
    pub fn ssrw_z(radius: usize, boundary: WindowBoundary) -> Self {
        let r = radius as i64;
        let n = 2 * r + 1;
        let mut acc: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for k in -r..=r {
            *acc.entry((k, k)).or_default() -= 1.0;
            for step in [-1, 1] {
                let target = k + step;
                let target = match boundary {
                    WindowBoundary::Torus => (target + r).rem_euclid(n) - r,
                    WindowBoundary::Absorbing if target.abs() > r => continue,
                    WindowBoundary::Absorbing => target,
                };
                *acc.entry((k, target)).or_default() += 0.5;
            }
        }
        let topology = match boundary {
            WindowBoundary::Torus => Topology::ZTorus,
            WindowBoundary::Absorbing => Topology::ZWindowAbsorbing,
        };
        Self::build((-r..=r).collect(), acc.into_iter().map(|((k, l), v)| (k, l, v)), topology)
            .expect("random walk generator is valid by construction")
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub(crate) fn shared_sites(&self) -> Arc<[i64]> {
        self.sites.clone()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn index_of(&self, site: i64) -> Result<usize> {
        self.sites.binary_search(&site).map_err(|_| Error::UnknownSite(site))
    }

    /// `‖A‖ = max_k Σ_l |A(k,l)| + |A(l,k)|`.
    pub fn norm(&self) -> f64 {
        self.norm_a
    }

    /// `λ = max_k -A(k,k)`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Diagonal shift `c` making `A + cI` entrywise nonnegative.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn diagonal(&self, k: usize) -> f64 {
        self.diag[k]
    }

    /// Nonzero entries `(l, A(k, l))` of row `k` (by index).
    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    /// All nonzero entries `(k, l, A(k, l))` by index.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |k| self.row(k).map(move |(l, v)| (k, l, v)))
    }

    /// `(Af)(k)` for a single row.
    pub fn apply_row(&self, k: usize, f: &[f64]) -> f64 {
        self.row(k).map(|(l, a)| a * f[l]).sum()
    }

    /// `out = A f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.apply_row(k, f);
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut dense = vec![vec![0.0; n]; n];
        for (k, l, v) in self.entries() {
            dense[k][l] = v;
        }
        dense
    }

    /// Number of substeps and series terms per substep needed for `exp(tA)`
    /// at tolerance `tol`.
    fn series_plan(&self, t: f64, tol: f64) -> (usize, usize) {
        let rate = self.max_shifted_row_sum;
        let mean = rate * t;
        if mean == 0.0 {
            return (1, 0);
        }
        let substeps = (mean / MAX_SERIES_MEAN).ceil().max(1.0) as usize;
        let h = t / substeps as f64;
        let mu = rate * h;
        // ‖tail‖_∞ ≤ exp((r - c)h) · P[Poisson(rh) > N] · ‖f‖_∞
        let growth = ((rate - self.shift) * h).exp();
        let tol = tol.max(f64::EPSILON) / substeps as f64;
        let mut pmf = (-mu).exp();
        let mut n = 0usize;
        loop {
            let next = pmf * mu / (n + 1) as f64;
            let ratio = mu / (n + 2) as f64;
            if ratio < 1.0 && growth * next / (1.0 - ratio) < tol {
                return (substeps, n);
            }
            pmf = next;
            n += 1;
        }
    }

    fn series_step(&self, f: &[f64], h: f64, terms: usize, out: &mut [f64], scratch: &mut [f64]) {
        let c = self.shift;
        out.copy_from_slice(f);
        scratch.copy_from_slice(f);
        let mut next = vec![0.0; f.len()];
        for n in 1..=terms {
            let scale = h / n as f64;
            for (k, nk) in next.iter_mut().enumerate() {
                *nk = scale * (self.apply_row(k, scratch) + c * scratch[k]);
            }
            scratch.copy_from_slice(&next);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s;
            }
        }
        let damp = (-c * h).exp();
        out.iter_mut().for_each(|o| *o *= damp);
    }

    /// `S_t f` for a real field `f` (one mass type).
    pub fn flow(&self, f: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        if f.len() != self.len() {
            return Err(Error::SiteMismatch { expected: self.len(), got: f.len() });
        }
        let mut out = f.to_vec();
        if t == 0.0 {
            return Ok(out);
        }
        let (substeps, terms) = self.series_plan(t, tol);
        let h = t / substeps as f64;
        let mut input = f.to_vec();
        let mut scratch = vec![0.0; f.len()];
        for _ in 0..substeps {
            self.series_step(&input, h, terms, &mut out, &mut scratch);
            input.copy_from_slice(&out);
        }
        Ok(out)
    }
}

/// Precomputed flow kernel `exp(tA)` for a fixed `t`, stored sparsely by row.
///
/// Used in the Monte Carlo loop where the same step is applied many times.
/// Entries are built column by column from the same truncated series as
/// [`MigrationMatrix::flow`], so both routes agree to rounding.
#[derive(Clone, Debug)]
pub struct FlowOperator {
    t: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl FlowOperator {
    pub fn new(matrix: &MigrationMatrix, t: f64, tol: f64) -> Result<Self> {
        let n = matrix.len();
        let mut columns = Vec::with_capacity(n);
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            columns.push(matrix.flow(&unit, t, tol)?);
            unit[j] = 0.0;
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for k in 0..n {
            for (j, col) in columns.iter().enumerate() {
                if col[k] != 0.0 {
                    cols.push(j);
                    vals.push(col[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { t, row_ptr, cols, vals })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Kernel entry `a_t(k, l)`.
    pub fn entry(&self, k: usize, l: usize) -> f64 {
        let range = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[range.clone()]
            .iter()
            .position(|&c| c == l)
            .map_or(0.0, |p| self.vals[range.start + p])
    }

    /// `out = exp(tA) f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let range = self.row_ptr[k]..self.row_ptr[k + 1];
            *o = self.cols[range.clone()]
                .iter()
                .zip(&self.vals[range])
                .map(|(&l, &a)| a * f[l])
                .sum();
        }
    }
}

/// Applies `S_t` coordinate-wise to both mass types of a configuration.
pub fn apply_flow(x: &Configuration, t: f64, matrix: &MigrationMatrix, tol: f64) -> Result<Configuration> {
    if x.len() != matrix.len() {
        return Err(Error::SiteMismatch { expected: matrix.len(), got: x.len() });
    }
    let type1 = matrix.flow(x.type1(), t, tol)?;
    let type2 = matrix.flow(x.type2(), t, tol)?;
    Ok(Configuration::from_parts(matrix.shared_sites(), type1, type2))
}

/// Weight vector `β` with the constant `M` bounding `A` in `‖·‖_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    beta: Vec<f64>,
    m_const: f64,
    total: f64,
}

impl WeightVector {
    pub fn values(&self) -> &[f64] {
        &self.beta
    }

    pub fn m_const(&self) -> f64 {
        self.m_const
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Geometric weight `β(k) = decay^|k|` with the smallest admissible `M ≥ 1`.
pub fn build_beta(matrix: &MigrationMatrix, decay: f64) -> Result<WeightVector> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::InvalidDecay(decay));
    }
    let beta: Vec<f64> = matrix.sites().iter().map(|&k| decay.powi(k.unsigned_abs() as i32)).collect();
    let mut load = vec![0.0; beta.len()];
    for (k, l, a) in matrix.entries() {
        load[k] += beta[l] * a.abs();
        load[l] += beta[k] * a.abs();
    }
    let m_const = load.iter().zip(&beta).map(|(s, b)| s / b).fold(1.0, f64::max);
    let total = beta.iter().sum();
    Ok(WeightVector { beta, m_const, total })
}

/// `‖u‖_β = Σ_k |u(k)| β(k)`.
pub fn norm_beta(u: &[f64], beta: &WeightVector) -> f64 {
    u.iter().zip(&beta.beta).map(|(x, b)| x.abs() * b).sum()
}

/// Transition probability `a_t(0, l) = e^{-t} I_|l|(t)` of continuous-time
/// rate-1 simple random walk on `Z`.
///
/// The Bessel series `Σ_m (t/2)^{2m+n} / (m!(m+n)!)` is summed by term
/// ratios, which keeps the relative error near `1e-15` for moderate `t`.
/// When its terms would leave the floating-point range it is summed in log
/// space instead.
pub fn srw_kernel(t: f64, l: i64) -> f64 {
    let n = l.unsigned_abs();
    if t == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * t;
    let mut first = 1.0;
    for k in 1..=n {
        first *= half / k as f64;
    }
    if t <= LINEAR_SERIES_MAX_T && first > 1e-280 {
        let nf = n as f64;
        let q = half * half;
        let (mut term, mut sum, mut m) = (first, first, 0.0);
        loop {
            m += 1.0;
            term *= q / (m * (m + nf));
            sum += term;
            if term < 1e-17 * sum && q < m * (m + nf) {
                break;
            }
        }
        return (-t).exp() * sum;
    }
    srw_kernel_log(t, n)
}

/// Largest `t` whose Bessel series stays below the overflow threshold.
const LINEAR_SERIES_MAX_T: f64 = 600.0;

fn srw_kernel_log(t: f64, n: u64) -> f64 {
    let ln_half = (0.5 * t).ln();
    let nf = n as f64;
    let mut ln_term = -t + nf * ln_half - ln_factorial(n);
    let mut max = ln_term;
    let mut scaled = 1.0;
    let mut m = 0.0;
    loop {
        ln_term += 2.0 * ln_half - ((m + 1.0) * (m + nf + 1.0)).ln();
        m += 1.0;
        if ln_term > max {
            scaled = scaled * (max - ln_term).exp() + 1.0;
            max = ln_term;
        } else {
            let rel = (ln_term - max).exp();
            scaled += rel;
            let past_peak = 0.25 * t * t < (m + 1.0) * (m + nf + 1.0);
            if past_peak && rel < 1e-17 * scaled {
                break;
            }
        }
    }
    max.exp() * scaled
}

/// `Σ_{l ≥ m} a_t(0, l)`.
///
/// Small `t` sums the kernel directly. Large `t` runs the Bessel recurrence
/// `I_{n-1} = (2n/t) I_n + I_{n+1}` downward from a start index where the
/// terms are negligible, which is stable, and normalizes by `a_t(0, m)`.
pub fn srw_upper_tail(t: f64, m: i64) -> f64 {
    if m <= 0 {
        // Σ_{l ≥ m} = 1 - Σ_{l ≤ m-1} = 1 - Σ_{l ≥ 1-m}
        return 1.0 - srw_upper_tail(t, 1 - m);
    }
    if t <= DIRECT_TAIL_MAX_T {
        return direct_upper_tail(t, m);
    }
    let anchor = srw_kernel(t, m);
    if anchor == 0.0 {
        return 0.0;
    }
    let top = m + 40 + (12.0 * t.sqrt()).ceil() as i64;
    let (mut next, mut cur, mut sum) = (0.0, 1.0, 1.0);
    for n in (m + 1..=top).rev() {
        let prev = 2.0 * n as f64 / t * cur + next;
        sum += prev;
        next = cur;
        cur = prev;
        if cur > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            sum *= 1e-250;
        }
    }
    anchor * sum / cur
}

const DIRECT_TAIL_MAX_T: f64 = 50.0;

fn direct_upper_tail(t: f64, m: i64) -> f64 {
    let mut sum = 0.0;
    let mut l = m;
    loop {
        let a = srw_kernel(t, l);
        sum += a;
        if a == 0.0 || ((l as f64) > t && a < 1e-18 * sum.max(f64::MIN_POSITIVE)) {
            return sum;
        }
        l += 1;
    }
}
