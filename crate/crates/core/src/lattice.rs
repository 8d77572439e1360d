//! Configurations, finitely supported test functions, the pairing
//! `⟨⟨x, y⟩⟩ = Σ_k x(k) ◊ y(k)` and the functional `H(x, y) = exp⟨⟨x, y⟩⟩`.
//!
//! On a finite site set the weighted spaces `L^β_∞` coincide with the plain
//! ones, so configurations are just dense nonnegative arrays.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::migration::{MigrationMatrix, WeightVector};
use crate::quadrant::{lozenge, BoundaryPoint, QuadrantPoint};

/// JSON literal for one site of a configuration or test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteValue {
    pub site: i64,
    pub type1: f64,
    pub type2: f64,
}

/// Two-type mass field over the sites of a migration matrix, stored as one
/// dense array per type in the matrix's site order.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    sites: Arc<[i64]>,
    type1: Vec<f64>,
    type2: Vec<f64>,
}

impl Configuration {
    pub fn zeros(matrix: &MigrationMatrix) -> Self {
        let n = matrix.len();
        Self::from_parts(matrix.shared_sites(), vec![0.0; n], vec![0.0; n])
    }

    pub(crate) fn from_parts(sites: Arc<[i64]>, type1: Vec<f64>, type2: Vec<f64>) -> Self {
        debug_assert_eq!(sites.len(), type1.len());
        debug_assert_eq!(sites.len(), type2.len());
        Self { sites, type1, type2 }
    }

    /// Sites not listed are empty.
    pub fn from_values(matrix: &MigrationMatrix, values: &[SiteValue]) -> Result<Self> {
        let mut x = Self::zeros(matrix);
        let mut seen = vec![false; matrix.len()];
        for sv in values {
            let k = matrix.index_of(sv.site)?;
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::DuplicateSite(sv.site));
            }
            x.set_point(k, QuadrantPoint::new(sv.type1, sv.type2)?);
        }
        Ok(x)
    }

    /// One point per site, in matrix order.
    pub fn from_points(matrix: &MigrationMatrix, points: &[QuadrantPoint]) -> Result<Self> {
        if points.len() != matrix.len() {
            return Err(Error::SiteMismatch { expected: matrix.len(), got: points.len() });
        }
        let mut x = Self::zeros(matrix);
        for (k, p) in points.iter().enumerate() {
            x.set_point(k, QuadrantPoint::new(p.u, p.v)?);
        }
        Ok(x)
    }

    pub fn len(&self) -> usize {
        self.type1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.type1.is_empty()
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn type1(&self) -> &[f64] {
        &self.type1
    }

    pub fn type2(&self) -> &[f64] {
        &self.type2
    }

    pub fn fields_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.type1, &mut self.type2)
    }

    pub fn point(&self, k: usize) -> QuadrantPoint {
        QuadrantPoint { u: self.type1[k], v: self.type2[k] }
    }

    pub fn set_point(&mut self, k: usize, p: QuadrantPoint) {
        self.type1[k] = p.u;
        self.type2[k] = p.v;
    }

    pub fn points(&self) -> impl Iterator<Item = QuadrantPoint> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    pub fn to_site_values(&self) -> Vec<SiteValue> {
        self.sites
            .iter()
            .zip(self.points())
            .map(|(&site, p)| SiteValue { site, type1: p.u, type2: p.v })
            .collect()
    }

    /// `⟨x, ζ⟩ = Σ_k ζ(k) x(k)` for nonnegative weights `ζ`.
    pub fn weighted_sum(&self, weights: &[f64]) -> QuadrantPoint {
        let mut acc = QuadrantPoint::default();
        for (k, &w) in weights.iter().enumerate() {
            acc.u += w * self.type1[k];
            acc.v += w * self.type2[k];
        }
        acc
    }

    /// `x₁ + x₂` site by site.
    pub fn total_field(&self) -> Vec<f64> {
        self.type1.iter().zip(&self.type2).map(|(a, b)| a + b).collect()
    }
}

/// Finitely supported test function with values in `E`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TestFunction {
    support: Vec<usize>,
    sites: Vec<i64>,
    values: Vec<BoundaryPoint>,
}

impl TestFunction {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every value must have at least one zero coordinate. Zero values are
    /// dropped from the support.
    pub fn new(matrix: &MigrationMatrix, values: &[SiteValue]) -> Result<Self> {
        let mut entries = Vec::with_capacity(values.len());
        for sv in values {
            let k = matrix.index_of(sv.site)?;
            let p = QuadrantPoint::new(sv.type1, sv.type2)?;
            let b = BoundaryPoint::from_point(p).ok_or(Error::NotOnBoundary {
                site: sv.site,
                type1: sv.type1,
                type2: sv.type2,
            })?;
            if b.value() != 0.0 {
                entries.push((k, sv.site, b));
            }
        }
        entries.sort_by_key(|e| e.0);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateSite(w[0].1));
        }
        Ok(Self {
            support: entries.iter().map(|e| e.0).collect(),
            sites: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Site indices of the support, in matrix order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[BoundaryPoint] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
        self.support.iter().copied().zip(self.values.iter().map(|b| b.to_point().to_array()))
    }

    pub fn to_site_values(&self) -> Vec<SiteValue> {
        self.sites
            .iter()
            .zip(&self.values)
            .map(|(&site, b)| {
                let p = b.to_point();
                SiteValue { site, type1: p.u, type2: p.v }
            })
            .collect()
    }
}

/// `⟨⟨f, y⟩⟩` for arbitrary real two-type fields (e.g. `Ax`, which may be negative).
pub fn pairing_fields(f1: &[f64], f2: &[f64], y: &TestFunction) -> Complex64 {
    y.iter().map(|(k, yk)| lozenge([f1[k], f2[k]], yk)).sum()
}

/// `⟨⟨x, y⟩⟩ = Σ_k x(k) ◊ y(k)` over the support of `y`.
pub fn pairing(x: &Configuration, y: &TestFunction) -> Complex64 {
    pairing_fields(&x.type1, &x.type2, y)
}

/// `H(x, y) = exp⟨⟨x, y⟩⟩`.
pub fn h_value(x: &Configuration, y: &TestFunction) -> Complex64 {
    pairing(x, y).exp()
}

/// Whether every site has at least one empty type, i.e. `x ∈ E^S`.
pub fn is_boundary_state(x: &Configuration) -> bool {
    x.type1.iter().zip(&x.type2).all(|(&a, &b)| a == 0.0 || b == 0.0)
}

/// `Σ_k min(x₁(k), x₂(k)) β(k)`; zero iff `x` is a boundary state.
pub fn interior_mass(x: &Configuration, beta: &WeightVector) -> f64 {
    x.type1
        .iter()
        .zip(&x.type2)
        .zip(beta.values())
        .map(|((a, b), w)| a.min(*b) * w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::migration::{build_beta, WindowBoundary};
    use crate::quadrant::f_value;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sv(site: i64, type1: f64, type2: f64) -> SiteValue {
        SiteValue { site, type1, type2 }
    }

    fn window() -> MigrationMatrix {
        MigrationMatrix::ssrw_z(2, WindowBoundary::Absorbing)
    }

    #[test]
    fn empty_test_function() {
        let m = window();
        let x = Configuration::from_values(&m, &[sv(0, 1.0, 0.0)]).unwrap();
        let y = TestFunction::empty();
        assert_eq!(pairing(&x, &y), Complex64::new(0.0, 0.0));
        assert_eq!(h_value(&x, &y), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn single_site_pairing() {
        let m = window();
        let x = Configuration::from_values(&m, &[sv(0, 1.0, 0.0)]).unwrap();
        let y = TestFunction::new(&m, &[sv(0, 0.0, 1.0)]).unwrap();
        assert_eq!(pairing(&x, &y), Complex64::new(-1.0, -1.0));
    }

    #[test]
    fn rejects_interior_test_values_and_unknown_sites() {
        let m = window();
        assert!(matches!(TestFunction::new(&m, &[sv(0, 1.0, 1.0)]), Err(Error::NotOnBoundary { .. })));
        assert!(matches!(TestFunction::new(&m, &[sv(9, 1.0, 0.0)]), Err(Error::UnknownSite(9))));
        assert!(matches!(Configuration::from_values(&m, &[sv(0, -1.0, 0.0)]), Err(Error::InvalidPoint { .. })));
        assert!(matches!(
            Configuration::from_values(&m, &[sv(0, 1.0, 0.0), sv(0, 2.0, 0.0)]),
            Err(Error::DuplicateSite(0))
        ));
    }

    #[test]
    fn boundary_diagnostics() {
        let m = window();
        let beta = build_beta(&m, 0.5).unwrap();
        let zero = Configuration::zeros(&m);
        assert!(is_boundary_state(&zero));
        assert_eq!(interior_mass(&zero, &beta), 0.0);
        let mixed = Configuration::from_values(&m, &[sv(-1, 1.0, 0.0), sv(1, 0.5, 2.0)]).unwrap();
        assert!(!is_boundary_state(&mixed));
        assert_relative_eq!(interior_mass(&mixed, &beta), 0.25);
    }

    fn arb_boundary_point() -> impl Strategy<Value = [f64; 2]> {
        (0.0..5.0f64, any::<bool>()).prop_map(|(w, vertical)| if vertical { [0.0, w] } else { [w, 0.0] })
    }

    proptest! {
        #[test]
        fn h_is_bounded_and_multiplicative(
            xs in proptest::collection::vec((0.0..4.0f64, 0.0..4.0f64), 5),
            ys in proptest::collection::vec(arb_boundary_point(), 5),
        ) {
            let m = window();
            let values: Vec<_> = m.sites().iter().zip(&xs).map(|(&s, &(a, b))| sv(s, a, b)).collect();
            let x = Configuration::from_values(&m, &values).unwrap();
            let yv: Vec<_> = m.sites().iter().zip(&ys).map(|(&s, y)| sv(s, y[0], y[1])).collect();
            let y = TestFunction::new(&m, &yv).unwrap();
            let h = h_value(&x, &y);
            prop_assert!(h.norm() <= 1.0 + 1e-15);

            // Product over sites and additivity over a split of the support.
            let prod: Complex64 = (0..5).map(|k| f_value(x.point(k).to_array(), ys[k])).product();
            prop_assert!((h - prod).norm() <= 1e-12);
            let left = TestFunction::new(&m, &yv[..2]).unwrap();
            let right = TestFunction::new(&m, &yv[2..]).unwrap();
            prop_assert!((pairing(&x, &left) + pairing(&x, &right) - pairing(&x, &y)).norm() <= 1e-12);
            prop_assert!((h_value(&x, &left) * h_value(&x, &right) - h).norm() <= 1e-12);

            // Site-wise symmetry of the lozenge product.
            for k in 0..5 {
                let a = x.point(k).to_array();
                prop_assert_eq!(lozenge(a, ys[k]), lozenge(ys[k], a));
            }
        }
    }
}
