//! Monte Carlo checks of the Trotter process.

use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use super::estimate::{ComplexEstimate, PathEstimate};
use super::gof::{ks_against_law, ks_two_sample, GofReport, HarmonicLaw};
use super::runner::ReplicaRunner;
use super::{cjson, Report, SE_BAND};
use crate::error::{Error, Result};
use crate::lattice::{h_value, Configuration, SiteValue, TestFunction};
use crate::migration::{apply_flow, norm_beta, srw_upper_tail, MigrationMatrix, WeightVector, WindowBoundary};
use crate::quadrant::{sample, BoundaryPoint, QuadrantPoint};
use crate::trotter::{on_grid, Simulator, TrotterParams};

/// Extra absolute slack, relative to `1 + |target|`, for raw coordinate means.
pub const MEAN_FLOW_SLACK: f64 = 0.01;
/// Largest admissible kernel mass escaping the interface window.
pub const MAX_WINDOW_LEAK: f64 = 1e-6;

/// The system under test.
#[derive(Clone, Copy, Debug)]
pub struct System<'a> {
    pub matrix: &'a MigrationMatrix,
    pub beta: &'a WeightVector,
    pub x0: &'a Configuration,
}

fn up_to(params: &TrotterParams, t: f64) -> TrotterParams {
    let mut p = params.clone();
    p.horizon = t;
    p.record_times = vec![t];
    p
}

fn require_grid(t: f64, epsilon: f64) -> Result<()> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if on_grid(t, epsilon) {
        Ok(())
    } else {
        Err(Error::OffGrid { t, epsilon })
    }
}

fn final_state<R: rand::Rng + ?Sized>(sim: &Simulator<'_>, x0: &Configuration, rng: &mut R) -> Result<Configuration> {
    let mut rec = sim.run(x0, rng)?;
    Ok(rec.states.pop().expect("one record time"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub epsilon: f64,
    pub horizon: f64,
    pub drift_scale: f64,
    pub test_function: Vec<SiteValue>,
    pub estimate: ComplexEstimate,
    pub pass: bool,
}

impl MartingaleReport {
    pub fn report(&self) -> Report {
        Report {
            test: "martingale".into(),
            params: json!({
                "epsilon": self.epsilon,
                "horizon": self.horizon,
                "drift_scale": self.drift_scale,
                "replicas": self.estimate.n(),
                "y": self.test_function,
            }),
            estimate: cjson(self.estimate.mean()),
            se_or_statistic: cjson(self.estimate.se()),
            threshold: json!({"se_band": SE_BAND}),
            pass: self.pass,
            details: serde_json::Value::Null,
        }
    }
}

/// Mean of `M_T` over `n` replicas; passes iff both parts lie within `4·SE`
/// of zero. `drift_scale ≠ 1` corrupts the drift integral.
pub fn martingale_mean_test(
    sys: &System<'_>,
    params: &TrotterParams,
    y: &TestFunction,
    n: u64,
    runner: &ReplicaRunner,
    drift_scale: f64,
) -> Result<MartingaleReport> {
    let p = up_to(params, params.horizon);
    let sim = Simulator::new(sys.matrix, Some(sys.beta), p, vec![y.clone()])?.with_drift_scale(drift_scale);
    let name = format!("martingale/eps={}/drift={}", params.epsilon, drift_scale);
    let values = runner.map(&name, n, |_, rng| Ok(sim.run(sys.x0, rng)?.martingale_values[0][0]))?;
    let mut estimate = ComplexEstimate::from_samples(values);
    estimate.re.seed = Some(runner.provenance(&name, n));
    estimate.im.seed = estimate.re.seed.clone();
    let pass = estimate.within(num_complex::Complex64::new(0.0, 0.0), SE_BAND);
    Ok(MartingaleReport {
        epsilon: params.epsilon,
        horizon: params.horizon,
        drift_scale,
        test_function: y.to_site_values(),
        estimate,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalReport {
    pub site: i64,
    pub time: f64,
    pub epsilon: f64,
    pub reference: QuadrantPoint,
    pub gof: GofReport,
}

impl MarginalReport {
    pub fn report(&self) -> Report {
        Report {
            test: "marginal".into(),
            params: json!({"site": self.site, "time": self.time, "epsilon": self.epsilon, "replicas": self.gof.n}),
            estimate: json!({"reference": self.reference}),
            se_or_statistic: json!(self.gof.statistic),
            threshold: json!(self.gof.threshold),
            pass: self.gof.pass,
            details: serde_json::Value::Null,
        }
    }
}

/// KS test of `X_t(k)` against `Q_{S_t x₀(k)}` at a grid time `t`.
pub fn marginal_law_test(
    sys: &System<'_>,
    params: &TrotterParams,
    site: i64,
    t: f64,
    n: u64,
    runner: &ReplicaRunner,
) -> Result<MarginalReport> {
    require_grid(t, params.epsilon)?;
    let k = sys.matrix.index_of(site)?;
    let sim = Simulator::new(sys.matrix, None, up_to(params, t), Vec::new())?;
    let name = format!("marginal/eps={}/site={site}/t={t}", params.epsilon);
    let signed = runner.map(&name, n, |_, rng| {
        let x = final_state(&sim, sys.x0, rng)?.point(k);
        BoundaryPoint::from_point(x).map(|b| b.signed()).ok_or(Error::NotOnBoundary { site, type1: x.u, type2: x.v })
    })?;
    let reference = apply_flow(sys.x0, t, sys.matrix, params.flow_tol)?.point(k);
    let gof = ks_against_law(signed, &HarmonicLaw::new(reference))?;
    Ok(MarginalReport { site, time: t, epsilon: params.epsilon, reference, gof })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFlowRow {
    pub site: i64,
    pub exact: QuadrantPoint,
    pub type1: PathEstimate,
    pub type2: PathEstimate,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFlowReport {
    pub time: f64,
    pub epsilon: f64,
    pub rows: Vec<MeanFlowRow>,
    pub pass: bool,
}

impl MeanFlowReport {
    pub fn report(&self) -> Report {
        let worst = self
            .rows
            .iter()
            .flat_map(|r| [(r.type1.mean - r.exact.u).abs(), (r.type2.mean - r.exact.v).abs()])
            .fold(0.0, f64::max);
        Report {
            test: "mean_flow".into(),
            params: json!({"time": self.time, "epsilon": self.epsilon}),
            estimate: json!({"max_abs_deviation": worst}),
            se_or_statistic: json!(self.rows.iter().flat_map(|r| [r.type1.se(), r.type2.se()]).fold(0.0, f64::max)),
            threshold: json!({"se_band": SE_BAND, "slack": MEAN_FLOW_SLACK}),
            pass: self.pass,
            details: json!(self.rows),
        }
    }
}

fn mean_matches(e: &PathEstimate, target: f64) -> bool {
    (e.mean - target).abs() <= SE_BAND * e.se() + MEAN_FLOW_SLACK * (1.0 + target.abs())
}

/// `E[X_{i,t}(k)] = (S_t x_i)(k)` at every site, for any `t`.
pub fn mean_flow_test(sys: &System<'_>, params: &TrotterParams, t: f64, n: u64, runner: &ReplicaRunner) -> Result<MeanFlowReport> {
    let sim = Simulator::new(sys.matrix, None, up_to(params, t), Vec::new())?;
    let name = format!("mean_flow/eps={}/t={t}", params.epsilon);
    let states = runner.map(&name, n, |_, rng| final_state(&sim, sys.x0, rng))?;
    let exact = apply_flow(sys.x0, t, sys.matrix, params.flow_tol)?;
    let rows: Vec<MeanFlowRow> = (0..sys.matrix.len())
        .map(|k| {
            let type1 = PathEstimate::from_samples(states.iter().map(|s| s.type1()[k]));
            let type2 = PathEstimate::from_samples(states.iter().map(|s| s.type2()[k]));
            let target = exact.point(k);
            let pass = mean_matches(&type1, target.u) && mean_matches(&type2, target.v);
            MeanFlowRow { site: sys.matrix.sites()[k], exact: target, type1, type2, pass }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(MeanFlowReport { time: t, epsilon: params.epsilon, rows, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregatedReport {
    pub time: f64,
    pub epsilon: f64,
    pub weights: Vec<f64>,
    pub reference: QuadrantPoint,
    pub gof: GofReport,
}

impl AggregatedReport {
    pub fn report(&self) -> Report {
        Report {
            test: "aggregated_marginal".into(),
            params: json!({"time": self.time, "epsilon": self.epsilon, "weights": self.weights}),
            estimate: json!({"reference": self.reference}),
            se_or_statistic: json!(self.gof.statistic),
            threshold: json!(self.gof.threshold),
            pass: self.gof.pass,
            details: serde_json::Value::Null,
        }
    }
}

/// Two-sample KS test of `Z ~ Q_{⟨X_t, w⟩}` (drawn given the path) against
/// exact draws from `Q_{⟨S_t x₀, w⟩}`.
pub fn aggregated_marginal_test(
    sys: &System<'_>,
    params: &TrotterParams,
    weights: &[f64],
    t: f64,
    n: u64,
    runner: &ReplicaRunner,
) -> Result<AggregatedReport> {
    if weights.len() != sys.matrix.len() {
        return Err(Error::SiteMismatch { expected: sys.matrix.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParams("aggregation weights must be finite and nonnegative".into()));
    }
    let sim = Simulator::new(sys.matrix, None, up_to(params, t), Vec::new())?;
    let name = format!("aggregated/eps={}/t={t}", params.epsilon);
    let streams = runner.stream(&name);
    let simulated = runner.map_stream(&streams, n, |_, rng| {
        let xi = final_state(&sim, sys.x0, rng)?.weighted_sum(weights);
        Ok(sample(xi, rng).signed())
    })?;
    let reference = apply_flow(sys.x0, t, sys.matrix, params.flow_tol)?.weighted_sum(weights);
    let exact = runner.map_stream(&streams.child("reference"), n, |_, rng| Ok(sample(reference, rng).signed()))?;
    let gof = ks_two_sample(simulated, exact)?;
    Ok(AggregatedReport { time: t, epsilon: params.epsilon, weights: weights.to_vec(), reference, gof })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub site: i64,
    pub time: f64,
    pub epsilon: f64,
    pub covariance: f64,
    pub covariance_se: f64,
    /// `E[X₁(k) X₂(k)]` against `(S_t x₁)(k)(S_t x₂)(k)`.
    pub product: PathEstimate,
    pub product_bound: f64,
    pub pass: bool,
}

impl CorrelationReport {
    pub fn report(&self) -> Report {
        Report {
            test: "correlation".into(),
            params: json!({"site": self.site, "time": self.time, "epsilon": self.epsilon, "replicas": self.product.n}),
            estimate: json!({"covariance": self.covariance, "product_mean": self.product.mean}),
            se_or_statistic: json!({"covariance": self.covariance_se, "product_mean": self.product.se()}),
            threshold: json!({"covariance": 0.0, "product_mean": self.product_bound, "se_band": SE_BAND}),
            pass: self.pass,
            details: serde_json::Value::Null,
        }
    }
}

/// Empirical `Cov(X₁,t(k), X₂,t(k)) ≤ 4·SE` and
/// `E[X₁,t(k) X₂,t(k)] ≤ (S_t x₁)(k)(S_t x₂)(k) + 4·SE`. At grid times the
/// product vanishes identically; off the grid the second bound is the
/// informative one.
pub fn correlation_test(
    sys: &System<'_>,
    params: &TrotterParams,
    site: i64,
    t: f64,
    n: u64,
    runner: &ReplicaRunner,
) -> Result<CorrelationReport> {
    let k = sys.matrix.index_of(site)?;
    let sim = Simulator::new(sys.matrix, None, up_to(params, t), Vec::new())?;
    let name = format!("correlation/eps={}/site={site}/t={t}", params.epsilon);
    let pairs = runner.map(&name, n, |_, rng| Ok(final_state(&sim, sys.x0, rng)?.point(k)))?;
    let nf = pairs.len() as f64;
    let (ma, mb) = (pairs.iter().map(|p| p.u).sum::<f64>() / nf, pairs.iter().map(|p| p.v).sum::<f64>() / nf);
    let centred = PathEstimate::from_samples(pairs.iter().map(|p| (p.u - ma) * (p.v - mb)));
    let covariance = centred.mean * nf / (nf - 1.0).max(1.0);
    let covariance_se = centred.se();
    let product = PathEstimate::from_samples(pairs.iter().map(|p| p.u * p.v));
    let exact = apply_flow(sys.x0, t, sys.matrix, params.flow_tol)?.point(k);
    let product_bound = exact.u * exact.v;
    let pass = covariance <= SE_BAND * covariance_se && product.mean <= product_bound + SE_BAND * product.se();
    Ok(CorrelationReport { site, time: t, epsilon: params.epsilon, covariance, covariance_se, product, product_bound, pass })
}

fn default_interface_sites() -> Vec<i64> {
    (-3..=3).collect()
}

fn default_flow_tol() -> f64 {
    crate::migration::DEFAULT_FLOW_TOL
}

/// Step initial condition `(u, 0)` left of the origin, `(0, v)` from the
/// origin on, on an absorbing window of radius `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceSettings {
    pub u: f64,
    pub v: f64,
    pub radius: usize,
    pub time: f64,
    pub epsilon: f64,
    pub replicas: u64,
    #[serde(default = "default_interface_sites")]
    pub sites: Vec<i64>,
    #[serde(default = "default_flow_tol")]
    pub flow_tol: f64,
}

impl Default for InterfaceSettings {
    fn default() -> Self {
        Self {
            u: 1.0,
            v: 1.0,
            radius: 50,
            time: 4.0,
            epsilon: 0.1,
            replicas: 100_000,
            sites: default_interface_sites(),
            flow_tol: default_flow_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterfaceRow {
    pub site: i64,
    pub empirical: f64,
    /// Closed form on all of `Z`.
    pub formula: f64,
    /// Same quantity from the window flow.
    pub window_value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterfaceReport {
    pub settings: InterfaceSettings,
    pub leak: f64,
    pub rows: Vec<InterfaceRow>,
    /// Fraction of replicas with `b1 = b2`; measured only.
    pub equal_frequency: f64,
    pub median_b2: f64,
    /// `Φ⁻¹(u/(u+v))·√t`.
    pub median_reference: f64,
    pub pass: bool,
}

impl InterfaceReport {
    pub fn report(&self) -> Report {
        let worst = self.rows.iter().map(|r| (r.empirical - r.formula).abs() / r.tolerance.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        Report {
            test: "interface".into(),
            params: json!(self.settings),
            estimate: json!({
                "equal_frequency": self.equal_frequency,
                "median_b2": self.median_b2,
                "median_reference": self.median_reference,
            }),
            se_or_statistic: json!({"max_deviation_in_tolerances": worst, "leak": self.leak}),
            threshold: json!({"se_band": SE_BAND, "max_leak": MAX_WINDOW_LEAK}),
            pass: self.pass,
            details: json!(self.rows),
        }
    }
}

/// `P[X₂,t(k) > 0]` for the step initial condition on `Z`:
/// the vertical-axis mass of `Q_{(u_t(k), v_t(k))}` with
/// `u_t(k) = u Σ_{l>k} a_t(0,l)` and `v_t(k) = v Σ_{l≥-k} a_t(0,l)`.
pub fn interface_formula(u: f64, v: f64, t: f64, k: i64) -> f64 {
    let ut = u * srw_upper_tail(t, k + 1);
    let vt = v * srw_upper_tail(t, -k);
    vertical_mass(ut, vt)
}

/// `½ + arctan((v²-u²)/(2uv))/π`, extended to the axes.
fn vertical_mass(u: f64, v: f64) -> f64 {
    (2.0 * u * v).atan2((u - v) * (u + v)) / std::f64::consts::PI
}

/// Upper bound on the walk mass that leaves the window before time `t`
/// when started within `max_site` of the origin.
pub fn window_leak(radius: usize, t: f64, max_site: i64) -> f64 {
    let gap = radius as i64 - max_site.abs();
    if gap < 0 {
        return 1.0;
    }
    (4.0 * srw_upper_tail(t, gap + 1)).min(1.0)
}

pub fn interface_law_test(s: &InterfaceSettings, runner: &ReplicaRunner) -> Result<InterfaceReport> {
    if !(s.u > 0.0 && s.v > 0.0 && s.u.is_finite() && s.v.is_finite()) {
        return Err(Error::NotInterior { u: s.u, v: s.v });
    }
    require_grid(s.time, s.epsilon)?;
    let max_site = s.sites.iter().map(|k| k.abs()).max().unwrap_or(0);
    let leak = window_leak(s.radius, s.time, max_site);
    if leak >= MAX_WINDOW_LEAK {
        return Err(Error::WindowTooSmall { radius: s.radius, t: s.time, leak });
    }
    let matrix = MigrationMatrix::ssrw_z(s.radius, WindowBoundary::Absorbing);
    let idx: Vec<usize> = s.sites.iter().map(|&k| matrix.index_of(k)).collect::<Result<_>>()?;
    let init: Vec<SiteValue> = matrix
        .sites()
        .iter()
        .map(|&k| if k < 0 { SiteValue { site: k, type1: s.u, type2: 0.0 } } else { SiteValue { site: k, type1: 0.0, type2: s.v } })
        .collect();
    let x0 = Configuration::from_values(&matrix, &init)?;
    let mut params = TrotterParams::new(s.epsilon, s.time);
    params.flow_tol = s.flow_tol;
    let sim = Simulator::new(&matrix, None, params, Vec::new())?;
    let name = format!("interface/u={}/v={}/L={}/t={}/eps={}", s.u, s.v, s.radius, s.time, s.epsilon);
    let outcomes = runner.map(&name, s.replicas, |_, rng| {
        let rec = sim.run(&x0, rng)?;
        let state = &rec.states[0];
        let hits: Vec<bool> = idx.iter().map(|&k| state.type2()[k] > 0.0).collect();
        let iface = rec.interface.as_ref().expect("window topology")[0];
        Ok((hits, iface))
    })?;
    let n = outcomes.len() as f64;
    let window = apply_flow(&x0, s.time, &matrix, s.flow_tol)?;
    let rows: Vec<InterfaceRow> = s
        .sites
        .iter()
        .enumerate()
        .map(|(j, &site)| {
            let empirical = outcomes.iter().filter(|o| o.0[j]).count() as f64 / n;
            let formula = interface_formula(s.u, s.v, s.time, site);
            let w = window.point(idx[j]);
            let window_value = vertical_mass(w.u, w.v);
            let tolerance = SE_BAND * (formula * (1.0 - formula) / n).sqrt();
            InterfaceRow { site, empirical, formula, window_value, tolerance, pass: (empirical - formula).abs() <= tolerance }
        })
        .collect();
    let equal_frequency = outcomes.iter().filter(|o| o.1.b1 == o.1.b2).count() as f64 / n;
    let mut b2: Vec<i64> = outcomes.iter().map(|o| o.1.b2).collect();
    b2.sort_unstable();
    let median_b2 = b2.get((b2.len().max(1) - 1) / 2).map_or(f64::NAN, |&b| b as f64);
    let alpha = Normal::standard().inverse_cdf(s.u / (s.u + s.v));
    let pass = rows.iter().all(|r| r.pass);
    Ok(InterfaceReport {
        settings: s.clone(),
        leak,
        rows,
        equal_frequency,
        median_b2,
        median_reference: alpha * s.time.sqrt(),
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementRow {
    pub epsilon: f64,
    pub estimate: ComplexEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementGap {
    pub coarse: f64,
    pub fine: f64,
    pub gap_re: f64,
    pub gap_im: f64,
    pub se_re: f64,
    pub se_im: f64,
    pub pass: bool,
}

impl RefinementGap {
    fn magnitude(&self) -> f64 {
        self.gap_re.hypot(self.gap_im)
    }

    fn se(&self) -> f64 {
        self.se_re.hypot(self.se_im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementReport {
    pub horizon: f64,
    pub test_function: Vec<SiteValue>,
    pub rows: Vec<RefinementRow>,
    pub gaps: Vec<RefinementGap>,
    /// Last gap magnitude at most the first plus `4·SE` of their difference.
    pub trend_ok: bool,
    pub pass: bool,
}

impl RefinementReport {
    pub fn report(&self) -> Report {
        let estimate: Vec<_> = self.rows.iter().map(|r| json!({"epsilon": r.epsilon, "mean": cjson(r.estimate.mean())})).collect();
        let se: Vec<_> = self.rows.iter().map(|r| cjson(r.estimate.se())).collect();
        Report {
            test: "refinement".into(),
            params: json!({
                "horizon": self.horizon,
                "epsilons": self.rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(),
                "y": self.test_function,
            }),
            estimate: json!(estimate),
            se_or_statistic: json!(se),
            threshold: json!({"se_band": SE_BAND}),
            pass: self.pass,
            details: json!({"gaps": self.gaps, "trend_ok": self.trend_ok}),
        }
    }
}

/// `Ê[H(X^ε_T, y)]` for each `ε`, with consecutive gaps checked against the
/// combined `4·SE` band.
pub fn refinement_study(
    sys: &System<'_>,
    base: &TrotterParams,
    y: &TestFunction,
    epsilons: &[f64],
    n: u64,
    runner: &ReplicaRunner,
) -> Result<RefinementReport> {
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let mut p = up_to(base, base.horizon);
        p.epsilon = epsilon;
        let sim = Simulator::new(sys.matrix, None, p, Vec::new())?;
        let name = format!("refinement/eps={epsilon}");
        let values = runner.map(&name, n, |_, rng| Ok(h_value(&final_state(&sim, sys.x0, rng)?, y)))?;
        let mut estimate = ComplexEstimate::from_samples(values);
        estimate.re.seed = Some(runner.provenance(&name, n));
        estimate.im.seed = estimate.re.seed.clone();
        rows.push(RefinementRow { epsilon, estimate });
    }
    let gaps: Vec<RefinementGap> = rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].estimate, &w[1].estimate);
            let gap = b.mean() - a.mean();
            let se_re = a.re.se().hypot(b.re.se());
            let se_im = a.im.se().hypot(b.im.se());
            let pass = gap.re.abs() <= SE_BAND * se_re && gap.im.abs() <= SE_BAND * se_im;
            RefinementGap { coarse: w[0].epsilon, fine: w[1].epsilon, gap_re: gap.re, gap_im: gap.im, se_re, se_im, pass }
        })
        .collect();
    let trend_ok = match (gaps.first(), gaps.last()) {
        (Some(first), Some(last)) if gaps.len() > 1 => {
            last.magnitude() <= first.magnitude() + SE_BAND * first.se().hypot(last.se())
        }
        _ => true,
    };
    let pass = trend_ok && gaps.iter().all(|g| g.pass);
    Ok(RefinementReport { horizon: base.horizon, test_function: y.to_site_values(), rows, gaps, trend_ok, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoobReport {
    pub level: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub exceedance: PathEstimate,
    /// `K⁻¹ e^{λ⁺T} ‖S_T(x₁+x₂)‖_β`.
    pub flow_bound: f64,
    /// `K⁻¹ e^{gT} ‖x₁+x₂‖_β` with `g = λ + M` unless overridden.
    pub growth_bound: f64,
    pub growth_rate: f64,
    pub pass: bool,
}

impl DoobReport {
    pub fn report(&self) -> Report {
        Report {
            test: "doob".into(),
            params: json!({
                "level": self.level,
                "horizon": self.horizon,
                "epsilon": self.epsilon,
                "growth_rate": self.growth_rate,
                "replicas": self.exceedance.n,
            }),
            estimate: json!(self.exceedance.mean),
            se_or_statistic: json!(self.exceedance.se()),
            threshold: json!({"flow_bound": self.flow_bound, "growth_bound": self.growth_bound, "se_band": SE_BAND}),
            pass: self.pass,
            details: serde_json::Value::Null,
        }
    }
}

/// Frequency of `sup_{t≤T} ‖X₁,t + X₂,t‖_β ≥ K` over the jump and record
/// times, against both maximal-inequality bounds.
pub fn submartingale_doob_test(
    sys: &System<'_>,
    params: &TrotterParams,
    level: f64,
    n: u64,
    runner: &ReplicaRunner,
    growth_override: Option<f64>,
) -> Result<DoobReport> {
    if !(level > 0.0) {
        return Err(Error::InvalidParams(format!("Doob level must be positive, got {level}")));
    }
    let t = params.horizon;
    let sim = Simulator::new(sys.matrix, Some(sys.beta), up_to(params, t), Vec::new())?;
    let name = format!("doob/eps={}/K={level}", params.epsilon);
    let hits = runner.map(&name, n, |_, rng| Ok(f64::from(u8::from(sim.run(sys.x0, rng)?.sup_total_norm >= level))))?;
    let exceedance = PathEstimate::from_samples(hits).with_seed(runner.provenance(&name, n));
    let total0 = sys.x0.total_field();
    let flowed = apply_flow(sys.x0, t, sys.matrix, params.flow_tol)?.total_field();
    let lambda = sys.matrix.lambda();
    let flow_bound = (lambda.max(0.0) * t).exp() * norm_beta(&flowed, sys.beta) / level;
    let growth_rate = growth_override.unwrap_or(lambda + sys.beta.m_const());
    let growth_bound = (growth_rate * t).exp() * norm_beta(&total0, sys.beta) / level;
    let band = SE_BAND * exceedance.se();
    let pass = exceedance.mean <= flow_bound + band && exceedance.mean <= growth_bound + band;
    Ok(DoobReport { level, horizon: t, epsilon: params.epsilon, exceedance, flow_bound, growth_bound, growth_rate, pass })
}
