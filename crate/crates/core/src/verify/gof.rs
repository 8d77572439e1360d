//! Kolmogorov–Smirnov goodness of fit on the signed boundary coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrant::{degenerate, horizontal_tail, vertical_tail, BoundaryPoint, QuadrantPoint};

/// Asymptotic KS critical value at significance 0.01.
pub const KS_COEFF_01: f64 = 1.63;
pub const MIN_KS_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic: f64,
    pub n: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl GofReport {
    fn new(statistic: f64, n: usize, threshold: f64) -> Self {
        Self { statistic, n, threshold, pass: statistic <= threshold }
    }
}

/// Law of the signed coordinate of a draw from `Q_x`: vertical hits map to
/// `-value`, horizontal hits to `+value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicLaw {
    x: QuadrantPoint,
    atom: Option<f64>,
}

impl HarmonicLaw {
    pub fn new(x: QuadrantPoint) -> Self {
        Self { x, atom: degenerate(x).map(|b| b.signed()) }
    }

    pub fn point(&self) -> QuadrantPoint {
        self.x
    }

    pub fn cdf(&self, s: f64) -> f64 {
        match self.atom {
            Some(a) => f64::from(u8::from(s >= a)),
            None if s < 0.0 => vertical_tail(self.x, -s).unwrap_or(0.0),
            None => 1.0 - horizontal_tail(self.x, s).unwrap_or(0.0),
        }
    }

    pub fn cdf_left(&self, s: f64) -> f64 {
        match self.atom {
            Some(a) => f64::from(u8::from(s > a)),
            None => self.cdf(s),
        }
    }

    pub fn atoms(&self) -> Vec<f64> {
        self.atom.into_iter().collect()
    }
}

/// `sup_s |F_n(s) - F(s)|` including left limits, for sorted `samples`.
pub fn ks_statistic<F, G>(sorted: &[f64], cdf: F, cdf_left: G, atoms: &[f64]) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == s {
            j += 1;
        }
        d = d.max((cdf(s) - j as f64 / n).abs()).max((cdf_left(s) - i as f64 / n).abs());
        i = j;
    }
    for &a in atoms {
        let below = sorted.partition_point(|&s| s < a) as f64;
        let upto = sorted.partition_point(|&s| s <= a) as f64;
        d = d.max((cdf(a) - upto / n).abs()).max((cdf_left(a) - below / n).abs());
    }
    d
}

/// One-sample KS test of boundary draws against `Q_x`, threshold `1.63/√N`.
pub fn ks_against_cdf(samples: &[BoundaryPoint], x: QuadrantPoint) -> Result<GofReport> {
    let signed: Vec<f64> = samples.iter().map(BoundaryPoint::signed).collect();
    ks_against_law(signed, &HarmonicLaw::new(x))
}

pub fn ks_against_law(mut signed: Vec<f64>, law: &HarmonicLaw) -> Result<GofReport> {
    let n = signed.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples { n, min: MIN_KS_SAMPLES });
    }
    signed.sort_by(f64::total_cmp);
    let d = ks_statistic(&signed, |s| law.cdf(s), |s| law.cdf_left(s), &law.atoms());
    Ok(GofReport::new(d, n, KS_COEFF_01 / (n as f64).sqrt()))
}

/// Two-sample KS test, threshold `1.63·√((n+m)/(nm))`.
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<GofReport> {
    let (n, m) = (a.len(), b.len());
    if n.min(m) < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples { n: n.min(m), min: MIN_KS_SAMPLES });
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n || j < m {
        let s = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < n && a[i] == s {
            i += 1;
        }
        while j < m && b[j] == s {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(GofReport::new(d, n + m, KS_COEFF_01 * ((nf + mf) / (nf * mf)).sqrt()))
}
