//! Checks of the harmonic-measure primitives.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::estimate::{ComplexEstimate, PathEstimate};
use super::gof::{ks_against_cdf, GofReport};
use super::runner::ReplicaRunner;
use super::{cjson, quadrature, Report, SE_BAND};
use crate::error::{Error, Result};
use crate::quadrant::{
    centered_moment_bound, f_value, moment_p, sample, sample_bm_oracle, vertical_tail, BoundaryPoint, MassType,
    QuadrantPoint,
};

/// Draws per replica stream in the sampling checks.
pub const CHUNK: u64 = 10_000;
pub const AXIS_MASS_TOL: f64 = 1e-12;
pub const MEAN_TOL: f64 = 0.01;
pub const QUADRATURE_TOL: f64 = 1e-6;
pub const ORACLE_KS_MAX: f64 = 0.03;
pub const ORACLE_DT: f64 = 1e-4;

fn default_points() -> Vec<[f64; 2]> {
    vec![[1.0, 2.0], [1.0, 1.0], [3.0, 0.5], [0.1, 10.0]]
}

fn default_moment_grid() -> Vec<[f64; 2]> {
    let axis = [0.5, 1.0, 2.0];
    axis.iter().flat_map(|&u| axis.iter().map(move |&v| [u, v])).collect()
}

fn default_p_values() -> Vec<f64> {
    vec![1.25, 1.5, 1.75]
}

fn default_test_points() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0], [1.0, 0.0], [0.0, 0.3], [2.0, 0.0], [0.0, 2.5]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadrantSettings {
    /// Start points for the sampler KS and mean checks.
    pub points: Vec<[f64; 2]>,
    pub samples: u64,
    /// Start points for the moment checks.
    pub moment_grid: Vec<[f64; 2]>,
    pub p_values: Vec<f64>,
    pub moment_samples: u64,
    pub oracle_point: [f64; 2],
    pub oracle_samples: u64,
    pub oracle_dt: f64,
    /// Second arguments of `F` in the invariance check, in units of `1/|x|`
    /// so that `x ◊ y` stays of order one.
    pub test_points: Vec<[f64; 2]>,
    pub f_samples: u64,
}

impl Default for QuadrantSettings {
    fn default() -> Self {
        Self {
            points: default_points(),
            samples: 1_000_000,
            moment_grid: default_moment_grid(),
            p_values: default_p_values(),
            moment_samples: 200_000,
            oracle_point: [1.0, 1.0],
            oracle_samples: 10_000,
            oracle_dt: ORACLE_DT,
            test_points: default_test_points(),
            f_samples: 100_000,
        }
    }
}

fn point(p: [f64; 2]) -> Result<QuadrantPoint> {
    QuadrantPoint::new(p[0], p[1])
}

/// `n` draws of `draw`, split into streams of [`CHUNK`] draws each.
pub fn chunked<T, F>(runner: &ReplicaRunner, name: &str, n: u64, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = runner.map(name, chunks, |i, rng| {
        let len = CHUNK.min(n - i * CHUNK);
        Ok((0..len).map(|_| draw(rng)).collect::<Vec<T>>())
    })?;
    Ok(parts.into_iter().flatten().collect())
}

pub fn exact_draws(runner: &ReplicaRunner, name: &str, x: QuadrantPoint, n: u64) -> Result<Vec<BoundaryPoint>> {
    chunked(runner, name, n, |rng| sample(x, rng))
}

fn gof_report(test: &str, params: serde_json::Value, gof: &GofReport) -> Report {
    Report {
        test: test.into(),
        params,
        estimate: json!(gof.statistic),
        se_or_statistic: json!(gof.statistic),
        threshold: json!(gof.threshold),
        pass: gof.pass,
        details: serde_json::Value::Null,
    }
}

/// Runs every quadrant check; one report each.
pub fn quadrant_suite(s: &QuadrantSettings, runner: &ReplicaRunner) -> Result<Vec<Report>> {
    let mut out = Vec::new();
    for &p in &s.points {
        let x = point(p)?;
        let draws = exact_draws(runner, &format!("quadrant/sampler/{}/{}", p[0], p[1]), x, s.samples)?;
        out.push(sampler_gof(x, &draws)?);
        out.push(mean_preservation(x, &draws));
        if x.is_interior() {
            for &pv in &s.p_values {
                out.push(moment_formula(x, pv, &draws)?);
            }
        }
    }
    out.push(axis_mass());
    out.push(unit_moment_is_mean(&s.moment_grid)?);
    for &p in &s.moment_grid {
        let x = point(p)?;
        let draws = exact_draws(runner, &format!("quadrant/moments/{}/{}", p[0], p[1]), x, s.moment_samples)?;
        for &pv in &s.p_values {
            out.push(moment_bounds(x, pv, &draws)?);
        }
    }
    out.push(oracle_equivalence(point(s.oracle_point)?, s.oracle_samples, s.oracle_dt, runner)?);
    for &p in &s.points {
        let x = point(p)?;
        let r = x.u.hypot(x.v);
        for &yp in &s.test_points {
            out.push(f_invariance(x, [yp[0] / r, yp[1] / r], s.f_samples, runner)?);
        }
    }
    for &p in &s.points {
        for &q in &s.points {
            if p < q {
                out.push(self_duality(point(p)?, point(q)?, s.f_samples, runner)?);
            }
        }
    }
    Ok(out)
}

/// One-sample KS of exact draws against the closed-form CDF.
pub fn sampler_gof(x: QuadrantPoint, draws: &[BoundaryPoint]) -> Result<Report> {
    let gof = ks_against_cdf(draws, x)?;
    Ok(gof_report("sampler_gof", json!({"x": x, "samples": draws.len()}), &gof))
}

/// `Q_{(1,√3)}` puts mass `2/3` on the vertical axis.
pub fn axis_mass() -> Report {
    let x = QuadrantPoint { u: 1.0, v: 3f64.sqrt() };
    let value = vertical_tail(x, 0.0).expect("interior point");
    let err = (value - 2.0 / 3.0).abs();
    Report {
        test: "axis_mass".into(),
        params: json!({"x": x, "expected": 2.0 / 3.0}),
        estimate: json!(value),
        se_or_statistic: json!(err),
        threshold: json!(AXIS_MASS_TOL),
        pass: err <= AXIS_MASS_TOL,
        details: serde_json::Value::Null,
    }
}

fn coordinates(draws: &[BoundaryPoint]) -> (PathEstimate, PathEstimate) {
    let mut a = PathEstimate::new();
    let mut b = PathEstimate::new();
    for d in draws {
        let p = d.to_point();
        a.push(p.u);
        b.push(p.v);
    }
    (a, b)
}

/// Mean preservation. The gate is the truncated mean `E[y_i; y_i ≤ W]`
/// against `x_i` minus the analytic tail, within `4·SE`; the raw sample
/// mean has infinite variance and its distance to `x` is reported against
/// [`MEAN_TOL`] without gating.
pub fn mean_preservation(x: QuadrantPoint, draws: &[BoundaryPoint]) -> Report {
    let (a, b) = coordinates(draws);
    let dev = (a.mean - x.u).abs().max((b.mean - x.v).abs());
    let cut = quadrature::MOMENT_CUT * x.u.hypot(x.v);
    let mut rows = Vec::new();
    let mut pass = true;
    for (i, name) in [(MassType::One, "type1"), (MassType::Two, "type2")] {
        let target = x.coord(i) - quadrature::moment_tail(x, i, 1.0, cut);
        let est = PathEstimate::from_samples(draws.iter().map(|d| {
            let y = d.to_point().coord(i);
            if y <= cut { y } else { 0.0 }
        }));
        let ok = (est.mean - target).abs() <= SE_BAND * est.se();
        pass &= ok;
        rows.push(json!({
            "coordinate": name, "cut": cut, "truncated_target": target,
            "truncated_mean": est.mean, "truncated_se": est.se(), "pass": ok,
        }));
    }
    Report {
        test: "mean_preservation".into(),
        params: json!({"x": x, "samples": draws.len()}),
        estimate: json!([a.mean, b.mean]),
        se_or_statistic: json!(dev),
        threshold: json!({"raw": MEAN_TOL, "se_band": SE_BAND}),
        pass,
        details: json!({"raw_within_tol": dev <= MEAN_TOL, "truncated": rows}),
    }
}

/// Closed-form `p`-moment against quadrature of the density and against
/// the sample, for both coordinates.
///
/// `y_i^p` has infinite variance for `p ≥ 1`, so the gated sample check uses
/// the truncated moment `E[y_i^p; y_i ≤ W]`, whose target is the closed form
/// minus the analytic tail beyond `W`. The raw comparison is reported only.
pub fn moment_formula(x: QuadrantPoint, p: f64, draws: &[BoundaryPoint]) -> Result<Report> {
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst_quad: f64 = 0.0;
    let cut = quadrature::MOMENT_CUT * x.u.hypot(x.v);
    for (i, name) in [(MassType::One, "type1"), (MassType::Two, "type2")] {
        let closed = moment_p(x, i, p)?;
        let quad = quadrature::moment(x, i, p);
        let coord = |d: &BoundaryPoint| d.to_point().coord(i);
        let raw = PathEstimate::from_samples(draws.iter().map(|d| coord(d).powf(p)));
        let truncated = PathEstimate::from_samples(draws.iter().map(|d| {
            let y = coord(d);
            if y <= cut { y.powf(p) } else { 0.0 }
        }));
        let truncated_target = closed - quadrature::moment_tail(x, i, p, cut);
        let quad_err = (closed - quad).abs();
        let raw_ok = (raw.mean - closed).abs() <= SE_BAND * raw.se();
        let ok = quad_err <= QUADRATURE_TOL && (truncated.mean - truncated_target).abs() <= SE_BAND * truncated.se();
        worst_quad = worst_quad.max(quad_err);
        pass &= ok;
        rows.push(json!({
            "coordinate": name, "closed_form": closed, "quadrature": quad,
            "mc_mean": raw.mean, "mc_se": raw.se(), "mc_within_band": raw_ok,
            "cut": cut, "truncated_target": truncated_target,
            "truncated_mean": truncated.mean, "truncated_se": truncated.se(), "pass": ok,
        }));
    }
    Ok(Report {
        test: "moment_formula".into(),
        params: json!({"x": x, "p": p, "samples": draws.len()}),
        estimate: json!(rows.iter().map(|r| r["closed_form"].clone()).collect::<Vec<_>>()),
        se_or_statistic: json!(worst_quad),
        threshold: json!({"quadrature": QUADRATURE_TOL, "se_band": SE_BAND}),
        pass,
        details: json!(rows),
    })
}

/// The `p = 1` moment is the coordinate itself on every grid point.
pub fn unit_moment_is_mean(grid: &[[f64; 2]]) -> Result<Report> {
    let mut worst: f64 = 0.0;
    for &g in grid {
        let x = point(g)?;
        if !x.is_interior() {
            continue;
        }
        worst = worst.max((moment_p(x, MassType::One, 1.0)? - x.u).abs() / x.u);
        worst = worst.max((moment_p(x, MassType::Two, 1.0)? - x.v).abs() / x.v);
    }
    Ok(Report {
        test: "unit_moment".into(),
        params: json!({"grid": grid}),
        estimate: json!(worst),
        se_or_statistic: json!(worst),
        threshold: json!(1e-12),
        pass: worst <= 1e-12,
        details: serde_json::Value::Null,
    })
}

/// Jensen lower bound on `∫ y_i^p` and the centred upper bound on
/// `∫ |y_i - x_i|^p`, both with a `4·SE` band.
pub fn moment_bounds(x: QuadrantPoint, p: f64, draws: &[BoundaryPoint]) -> Result<Report> {
    let bound = centered_moment_bound(x, p)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for (i, name) in [(MassType::One, "type1"), (MassType::Two, "type2")] {
        let xi = x.coord(i);
        let raw = PathEstimate::from_samples(draws.iter().map(|d| d.to_point().coord(i).powf(p)));
        let centred = PathEstimate::from_samples(draws.iter().map(|d| (d.to_point().coord(i) - xi).abs().powf(p)));
        let lower = xi.powf(p);
        let ok = raw.mean >= lower - SE_BAND * raw.se() && centred.mean <= bound + SE_BAND * centred.se();
        pass &= ok;
        rows.push(json!({
            "coordinate": name, "raw_mean": raw.mean, "raw_se": raw.se(), "jensen_lower": lower,
            "centred_mean": centred.mean, "centred_se": centred.se(), "centred_bound": bound, "pass": ok,
        }));
    }
    Ok(Report {
        test: "moment_bounds".into(),
        params: json!({"x": x, "p": p, "samples": draws.len()}),
        estimate: json!(rows.iter().map(|r| [r["raw_mean"].clone(), r["centred_mean"].clone()]).collect::<Vec<_>>()),
        se_or_statistic: json!(rows.iter().map(|r| [r["raw_se"].clone(), r["centred_se"].clone()]).collect::<Vec<_>>()),
        threshold: json!({"centred_bound": bound, "se_band": SE_BAND}),
        pass,
        details: json!(rows),
    })
}

/// KS distance between Brownian-walk oracle draws and the exact CDF.
pub fn oracle_equivalence(x: QuadrantPoint, n: u64, dt: f64, runner: &ReplicaRunner) -> Result<Report> {
    let draws = chunked(runner, "quadrant/oracle", n, |rng| sample_bm_oracle(x, dt, rng))?;
    let gof = ks_against_cdf(&draws, x)?;
    Ok(Report {
        test: "oracle_equivalence".into(),
        params: json!({"x": x, "samples": n, "dt": dt}),
        estimate: json!(gof.statistic),
        se_or_statistic: json!(gof.statistic),
        threshold: json!(ORACLE_KS_MAX),
        pass: gof.statistic <= ORACLE_KS_MAX,
        details: json!({"ks_threshold_at_0_01": gof.threshold}),
    })
}

fn f_mean<G>(runner: &ReplicaRunner, name: &str, n: u64, g: G) -> Result<ComplexEstimate>
where
    G: Fn(&mut rand_chacha::ChaCha8Rng) -> Complex64 + Sync,
{
    Ok(ComplexEstimate::from_samples(chunked(runner, name, n, g)?))
}

/// `E[F(Z, y)] = F(x, y)` for `Z ~ Q_x` and `y ∈ E`; `F(·, y)` is not
/// harmonic for interior `y`.
pub fn f_invariance(x: QuadrantPoint, y: [f64; 2], n: u64, runner: &ReplicaRunner) -> Result<Report> {
    if !point(y)?.is_boundary() {
        return Err(Error::InvalidParams(format!("test point ({}, {}) must lie on an axis", y[0], y[1])));
    }
    f_invariance_unchecked(x, y, n, runner)
}

fn f_invariance_unchecked(x: QuadrantPoint, y: [f64; 2], n: u64, runner: &ReplicaRunner) -> Result<Report> {
    let name = format!("quadrant/f/{}/{}/{}/{}", x.u, x.v, y[0], y[1]);
    let est = f_mean(runner, &name, n, |rng| f_value(sample(x, rng).to_point().to_array(), y))?;
    let exact = f_value(x.to_array(), y);
    Ok(Report {
        test: "f_invariance".into(),
        params: json!({"x": x, "y": y, "samples": n}),
        estimate: cjson(est.mean()),
        se_or_statistic: cjson(est.se()),
        threshold: json!({"target": cjson(exact), "se_band": SE_BAND}),
        pass: est.within(exact, SE_BAND),
        details: serde_json::Value::Null,
    })
}

/// `E[F(Z, y)] = E[F(x, Z')]` for `Z ~ Q_x`, `Z' ~ Q_y`.
pub fn self_duality(x: QuadrantPoint, y: QuadrantPoint, n: u64, runner: &ReplicaRunner) -> Result<Report> {
    let name = format!("quadrant/dual/{}/{}/{}/{}", x.u, x.v, y.u, y.v);
    let left = f_mean(runner, &format!("{name}/left"), n, |rng| f_value(sample(x, rng).to_point().to_array(), y.to_array()))?;
    let right = f_mean(runner, &format!("{name}/right"), n, |rng| f_value(x.to_array(), sample(y, rng).to_point().to_array()))?;
    let d = left.mean() - right.mean();
    let se = Complex64::new(left.re.se().hypot(right.re.se()), left.im.se().hypot(right.im.se()));
    Ok(Report {
        test: "self_duality".into(),
        params: json!({"x": x, "y": y, "samples": n}),
        estimate: cjson(d),
        se_or_statistic: cjson(se),
        threshold: json!({"se_band": SE_BAND}),
        pass: d.re.abs() <= SE_BAND * se.re && d.im.abs() <= SE_BAND * se.im,
        details: serde_json::Value::Null,
    })
}

/// Fraction of draws landing on the vertical axis; used by the CLI summary.
pub fn vertical_fraction<R: Rng + ?Sized>(x: QuadrantPoint, n: u64, rng: &mut R) -> f64 {
    (0..n).filter(|_| sample(x, rng).axis() == crate::quadrant::Axis::Vertical).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_test_point_breaks_invariance() {
        let runner = ReplicaRunner::new(11, 1);
        let x = QuadrantPoint { u: 1.0, v: 1.0 };
        assert!(f_invariance(x, [0.7, 0.4], 1000, &runner).is_err());
        let r = f_invariance_unchecked(x, [0.7, 0.4], 100_000, &runner).unwrap();
        assert!(!r.pass);
        assert!(f_invariance(x, [0.0, 0.7], 100_000, &runner).unwrap().pass);
    }

    #[test]
    fn truncated_moment_check_catches_wrong_law() {
        let runner = ReplicaRunner::new(12, 1);
        let x = QuadrantPoint { u: 1.0, v: 2.0 };
        let good = exact_draws(&runner, "good", x, 200_000).unwrap();
        assert!(moment_formula(x, 1.75, &good).unwrap().pass);
        let wrong = exact_draws(&runner, "bad", QuadrantPoint { u: 1.1, v: 2.0 }, 200_000).unwrap();
        assert!(!moment_formula(x, 1.5, &wrong).unwrap().pass);
    }
}
