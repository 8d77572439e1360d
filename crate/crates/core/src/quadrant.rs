//! Harmonic measure `Q_x` of planar Brownian motion started at `x` and
//! stopped on leaving the open quadrant `(0,∞)²`.
//!
//! `Q_x` lives on `E = [0,∞)² \ (0,∞)²`, the union of the two half-axes. For
//! boundary starting points it is the point mass at `x`. For interior points
//! the map `z ↦ z²` sends the quadrant onto the upper half-plane, where the
//! exit law from `u² - v² + 2iuv` is Cauchy with location `u² - v²` and scale
//! `2uv`. A draw `W` from that law is pulled back to `(√W, 0)` when `W ≥ 0`
//! and to `(0, √-W)` otherwise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates below this are treated as zero by the sampler.
pub const DEGENERATE_COORDINATE: f64 = 1e-300;

/// Complex value of a lozenge product `x ◊ y`.
pub type LozengeValue = Complex64;

/// A point `(u, v)` of `[0,∞)²`; `u` is the type-1 mass, `v` the type-2 mass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadrantPoint {
    pub u: f64,
    pub v: f64,
}

/// Which of the two mass types a coordinate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassType {
    One,
    Two,
}

impl QuadrantPoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if u.is_finite() && v.is_finite() && u >= 0.0 && v >= 0.0 {
            Ok(Self { u, v })
        } else {
            Err(Error::InvalidPoint { u, v })
        }
    }

    pub fn is_boundary(&self) -> bool {
        self.u == 0.0 || self.v == 0.0
    }

    pub fn is_interior(&self) -> bool {
        self.u > 0.0 && self.v > 0.0
    }

    pub fn swapped(&self) -> Self {
        Self { u: self.v, v: self.u }
    }

    pub fn coord(&self, i: MassType) -> f64 {
        match i {
            MassType::One => self.u,
            MassType::Two => self.v,
        }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.u, self.v]
    }

    fn require_interior(&self) -> Result<()> {
        if self.is_interior() && self.u.is_finite() && self.v.is_finite() {
            Ok(())
        } else {
            Err(Error::NotInterior { u: self.u, v: self.v })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Points `(w, 0)`: only type 1 present.
    Horizontal,
    /// Points `(0, w)`: only type 2 present.
    Vertical,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Horizontal => "horizontal",
            Axis::Vertical => "vertical",
        }
    }
}

/// A point of `E`. The origin is always stored on the horizontal axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    axis: Axis,
    value: f64,
}

impl BoundaryPoint {
    pub fn horizontal(value: f64) -> Self {
        Self { axis: Axis::Horizontal, value }
    }

    pub fn vertical(value: f64) -> Self {
        if value == 0.0 {
            Self::horizontal(0.0)
        } else {
            Self { axis: Axis::Vertical, value }
        }
    }

    pub fn new(axis: Axis, value: f64) -> Self {
        match axis {
            Axis::Horizontal => Self::horizontal(value),
            Axis::Vertical => Self::vertical(value),
        }
    }

    /// `Some` iff `x` has at least one zero coordinate.
    pub fn from_point(x: QuadrantPoint) -> Option<Self> {
        if x.v == 0.0 {
            Some(Self::horizontal(x.u))
        } else if x.u == 0.0 {
            Some(Self::vertical(x.v))
        } else {
            None
        }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn to_point(self) -> QuadrantPoint {
        match self.axis {
            Axis::Horizontal => QuadrantPoint { u: self.value, v: 0.0 },
            Axis::Vertical => QuadrantPoint { u: 0.0, v: self.value },
        }
    }

    /// Order-preserving coordinate on `R`: vertical points map to `-value`,
    /// horizontal points to `+value`.
    pub fn signed(&self) -> f64 {
        match self.axis {
            Axis::Horizontal => self.value,
            Axis::Vertical => -self.value,
        }
    }

    pub fn from_signed(s: f64) -> Self {
        if s < 0.0 {
            Self::vertical(-s)
        } else {
            Self::horizontal(s)
        }
    }
}

/// One-dimensional Lebesgue density of `Q_x` at the boundary point `b`.
pub fn density(x: QuadrantPoint, b: BoundaryPoint) -> Result<f64> {
    x.require_interior()?;
    let (u, v) = match b.axis() {
        Axis::Horizontal => (x.u, x.v),
        Axis::Vertical => (x.v, x.u),
    };
    let w = b.value();
    let spread = w * w + v * v - u * u;
    Ok(4.0 / PI * u * v * w / (4.0 * u * u * v * v + spread * spread))
}

/// `Q_{(u,v)}({0} × [c, ∞))`, the mass of the vertical half-axis above `c`.
pub fn vertical_tail(x: QuadrantPoint, c: f64) -> Result<f64> {
    x.require_interior()?;
    if !(c >= 0.0) {
        return Err(Error::InvalidParams(format!("tail level must be >= 0, got {c}")));
    }
    // ½ + arctan(a/b)/π = atan2(b, -a)/π for b > 0; stays accurate in the far tail.
    let a = x.v * x.v - x.u * x.u - c * c;
    Ok((2.0 * x.u * x.v).atan2(-a) / PI)
}

/// `Q_{(u,v)}([c, ∞) × {0})`, the horizontal mirror of [`vertical_tail`].
pub fn horizontal_tail(x: QuadrantPoint, c: f64) -> Result<f64> {
    vertical_tail(x.swapped(), c)
}

/// Exact draw from `Q_x`.
pub fn sample<R: Rng + ?Sized>(x: QuadrantPoint, rng: &mut R) -> BoundaryPoint {
    if let Some(b) = degenerate(x) {
        return b;
    }
    let r = x.u.max(x.v);
    let (a, b) = (x.u / r, x.v / r);
    let location = (a - b) * (a + b);
    let scale = 2.0 * a * b;
    let uniform: f64 = rng.random();
    let w = location + scale * (PI * (uniform - 0.5)).tan();
    if w >= 0.0 {
        BoundaryPoint::horizontal(r * w.sqrt())
    } else {
        BoundaryPoint::vertical(r * (-w).sqrt())
    }
}

pub(crate) fn degenerate(x: QuadrantPoint) -> Option<BoundaryPoint> {
    if x.v < DEGENERATE_COORDINATE && x.v <= x.u {
        Some(BoundaryPoint::horizontal(x.u))
    } else if x.u < DEGENERATE_COORDINATE {
        Some(BoundaryPoint::vertical(x.v))
    } else {
        None
    }
}

/// Default time step for [`sample_bm_oracle`].
pub fn default_oracle_dt(x: QuadrantPoint) -> f64 {
    1e-4 * (x.u * x.v).max(1.0)
}

/// Slow reference sampler: runs a Gaussian-increment walk until one
/// coordinate changes sign and projects the exit point onto `E`.
///
/// Near the boundary the walk uses steps of variance `dt`, which gives a
/// discretisation bias of order `√dt`. At distance `d` from both axes the
/// variance is raised to `(d/6)²`, where the chance of stepping across an
/// axis unnoticed is below `1e-8`.
pub fn sample_bm_oracle<R: Rng + ?Sized>(x: QuadrantPoint, dt: f64, rng: &mut R) -> BoundaryPoint {
    if let Some(b) = BoundaryPoint::from_point(x) {
        return b;
    }
    let (mut b1, mut b2) = (x.u, x.v);
    loop {
        let d = b1.min(b2) / 6.0;
        let sd = dt.max(d * d).sqrt();
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        b1 += sd * n1;
        b2 += sd * n2;
        if b1 <= 0.0 || b2 <= 0.0 {
            return if b1 <= b2 {
                BoundaryPoint::vertical(b2.max(0.0))
            } else {
                BoundaryPoint::horizontal(b1.max(0.0))
            };
        }
    }
}

/// `∫ y_i^p Q_x(dy)` for `p ∈ (0, 2)`.
///
/// The inverse tangent with range `[0, π]` is taken as a two-argument
/// arctangent of `(2uv, v² - u²)`, which is continuous through `u = v`.
pub fn moment_p(x: QuadrantPoint, i: MassType, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::MomentOrder(p));
    }
    x.require_interior()?;
    let (u, v) = match i {
        MassType::One => (x.u, x.v),
        MassType::Two => (x.v, x.u),
    };
    let angle = (2.0 * u * v).atan2((v - u) * (v + u));
    Ok((u * u + v * v).powf(0.5 * p) * (0.5 * p * angle).sin() / (0.5 * PI * p).sin())
}

/// `C_p = (4p)^{p+1} / ((p-1)(2-p)(2π)^{p/2})` for `p ∈ (1, 2)`.
pub fn centered_moment_constant(p: f64) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::MomentOrder(p));
    }
    Ok((4.0 * p).powf(p + 1.0) / ((p - 1.0) * (2.0 - p) * (2.0 * PI).powf(0.5 * p)))
}

/// Upper bound `C_p · min(u^{p-1} v, u v^{p-1})` on `∫ |y_i - x_i|^p Q_x(dy)`.
pub fn centered_moment_bound(x: QuadrantPoint, p: f64) -> Result<f64> {
    let c = centered_moment_constant(p)?;
    let (u, v) = (x.u, x.v);
    Ok(c * (u.powf(p - 1.0) * v).min(u * v.powf(p - 1.0)))
}

/// `x ◊ y = -(x₁+x₂)(y₁+y₂) + i(x₁-x₂)(y₁-y₂)`.
pub fn lozenge(x: [f64; 2], y: [f64; 2]) -> LozengeValue {
    Complex64::new(-(x[0] + x[1]) * (y[0] + y[1]), (x[0] - x[1]) * (y[0] - y[1]))
}

/// `F(x, y) = exp(x ◊ y)`.
pub fn f_value(x: [f64; 2], y: [f64; 2]) -> Complex64 {
    lozenge(x, y).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::quadrature;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(u: f64, v: f64) -> QuadrantPoint {
        QuadrantPoint::new(u, v).unwrap()
    }

    #[test]
    fn density_example_and_symmetry() {
        let d = density(pt(1.0, 1.0), BoundaryPoint::vertical(1.0)).unwrap();
        assert_relative_eq!(d, 4.0 / (5.0 * PI), max_relative = 1e-15);
        for (u, v, w) in [(1.0, 2.0, 0.3), (0.2, 5.0, 3.0), (3.0, 0.5, 1.7)] {
            let a = density(pt(u, v), BoundaryPoint::horizontal(w)).unwrap();
            let b = density(pt(v, u), BoundaryPoint::vertical(w)).unwrap();
            assert_eq!(a, b);
        }
        assert!(matches!(
            density(pt(0.0, 1.0), BoundaryPoint::vertical(1.0)),
            Err(Error::NotInterior { .. })
        ));
    }

    #[test]
    fn density_integrates_to_one() {
        for (u, v) in [(1.0, 1.0), (1.0, 2.0), (3.0, 0.5), (0.1, 10.0), (2.0, 7.0)] {
            let x = pt(u, v);
            let total = quadrature::axis_mass(x, Axis::Horizontal, 0.0)
                + quadrature::axis_mass(x, Axis::Vertical, 0.0);
            assert_relative_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn vertical_tail_examples() {
        assert_relative_eq!(vertical_tail(pt(2.0, 2.0), 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(vertical_tail(pt(1.0, 3f64.sqrt()), 0.0).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        let expected = 0.5 + (0.5f64).atan() / PI;
        assert_relative_eq!(vertical_tail(pt(1.0, 2.0), 1.0).unwrap(), expected, epsilon = 1e-15);
        let mut prev = 1.0;
        for i in 0..200 {
            let c = i as f64 * 0.25;
            let q = vertical_tail(pt(1.0, 2.0), c).unwrap();
            assert!(q <= prev);
            prev = q;
        }
        assert!(vertical_tail(pt(1.0, 2.0), 1e8).unwrap() < 1e-15);
    }

    #[test]
    fn tails_match_density_quadrature() {
        for (u, v) in [(1.0, 2.0), (3.0, 0.5), (0.7, 0.7)] {
            let x = pt(u, v);
            for c in [0.0, 0.5, 2.0, 9.0] {
                let qv = quadrature::axis_mass(x, Axis::Vertical, c);
                let qh = quadrature::axis_mass(x, Axis::Horizontal, c);
                assert_relative_eq!(vertical_tail(x, c).unwrap(), qv, epsilon = 1e-9);
                assert_relative_eq!(horizontal_tail(x, c).unwrap(), qh, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn tail_derivative_is_density() {
        let h = 1e-4;
        for (u, v) in [(1.0, 2.0), (0.5, 0.5), (2.0, 0.3)] {
            let x = pt(u, v);
            for c in [0.2, 1.0, 3.0] {
                let fd = -(vertical_tail(x, c + h).unwrap() - vertical_tail(x, c - h).unwrap()) / (2.0 * h);
                let d = density(x, BoundaryPoint::vertical(c)).unwrap();
                assert!((fd - d).abs() < 1e-6, "{fd} vs {d}");
            }
        }
    }

    #[test]
    fn tail_is_lipschitz_on_compact_grid() {
        // Finite-difference slopes in x stay bounded on [0.5, 3]² for c ∈ [0, 3].
        let h = 1e-3;
        let mut worst: f64 = 0.0;
        for i in 0..=10 {
            for j in 0..=10 {
                let (u, v) = (0.5 + 0.25 * i as f64, 0.5 + 0.25 * j as f64);
                for c in [0.0, 1.0, 3.0] {
                    let base = vertical_tail(pt(u, v), c).unwrap();
                    let du = (vertical_tail(pt(u + h, v), c).unwrap() - base).abs() / h;
                    let dv = (vertical_tail(pt(u, v + h), c).unwrap() - base).abs() / h;
                    worst = worst.max(du).max(dv);
                }
            }
        }
        assert!(worst < 2.0, "Lipschitz estimate {worst}");
    }

    #[test]
    fn boundary_start_is_absorbing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample(pt(0.0, 3.0), &mut rng), BoundaryPoint::vertical(3.0));
            assert_eq!(sample(pt(2.0, 0.0), &mut rng), BoundaryPoint::horizontal(2.0));
            assert_eq!(sample(pt(0.0, 0.0), &mut rng), BoundaryPoint::horizontal(0.0));
            assert_eq!(sample_bm_oracle(pt(0.0, 3.0), 1e-4, &mut rng), BoundaryPoint::vertical(3.0));
        }
        assert_eq!(sample(pt(1e-320, 2.0), &mut rng), BoundaryPoint::vertical(2.0));
    }

    #[test]
    fn symmetric_start_hits_each_axis_half_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| sample(pt(1.0, 1.0), &mut rng).axis() == Axis::Vertical).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn sampler_tail_frequency_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let x = pt(1.0, 2.0);
        let p = vertical_tail(x, 1.0).unwrap();
        assert_relative_eq!(p, 0.647_583_617_650_433_3, epsilon = 1e-12);
        let hits = (0..n)
            .filter(|_| {
                let b = sample(x, &mut rng);
                b.axis() == Axis::Vertical && b.value() >= 1.0
            })
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn scaled_points_sample_scaled_values() {
        // Q_{λx} is the image of Q_x under y ↦ λy; with a shared stream the
        // normalised sampler returns exactly scaled draws.
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = sample(pt(1.0, 2.0), &mut a);
            let t = sample(pt(1e-200, 2e-200), &mut b);
            assert_eq!(s.axis(), t.axis());
            assert_relative_eq!(s.value() * 1e-200, t.value(), max_relative = 1e-14);
        }
    }

    #[test]
    fn oracle_symmetric_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| sample_bm_oracle(pt(1.0, 1.0), 1e-4, &mut rng).axis() == Axis::Vertical)
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.03);
    }

    #[test]
    fn moment_p_examples() {
        assert_relative_eq!(moment_p(pt(1.0, 1.0), MassType::One, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(moment_p(pt(1.0, 2.0), MassType::One, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(moment_p(pt(1.0, 2.0), MassType::Two, 1.0).unwrap(), 2.0, epsilon = 1e-14);
        let closed = moment_p(pt(1.0, 1.0), MassType::One, 1.5).unwrap();
        assert_relative_eq!(closed, 2f64.powf(0.75) * (0.375 * PI).sin() / (0.75 * PI).sin(), epsilon = 1e-14);
        let quad = quadrature::moment(pt(1.0, 1.0), MassType::One, 1.5);
        assert_relative_eq!(closed, quad, epsilon = 1e-8);
        assert!(matches!(moment_p(pt(1.0, 1.0), MassType::One, 2.0), Err(Error::MomentOrder(_))));
        assert!(matches!(moment_p(pt(1.0, 1.0), MassType::One, 0.0), Err(Error::MomentOrder(_))));
    }

    #[test]
    fn moment_p_matches_quadrature_on_grid() {
        for (u, v) in [(0.5, 0.5), (1.0, 3.0), (3.0, 1.0), (0.2, 4.0)] {
            for p in [0.5, 1.0, 1.25, 1.75] {
                let x = pt(u, v);
                for i in [MassType::One, MassType::Two] {
                    let closed = moment_p(x, i, p).unwrap();
                    let quad = quadrature::moment(x, i, p);
                    assert_relative_eq!(closed, quad, max_relative = 1e-7);
                }
            }
        }
    }

    #[test]
    fn centered_constant_value() {
        let p: f64 = 1.5;
        let expected = 6f64.powf(2.5) / (0.5 * 0.5 * (2.0 * PI).powf(0.75));
        assert_relative_eq!(centered_moment_constant(p).unwrap(), expected, epsilon = 1e-12);
        assert!(centered_moment_constant(1.0).is_err());
        let x = pt(1.0, 4.0);
        let bound = centered_moment_bound(x, p).unwrap();
        assert!(bound <= centered_moment_constant(p).unwrap() * (x.u * x.v).powf(0.75) + 1e-12);
    }

    #[test]
    fn lozenge_examples() {
        assert_eq!(lozenge([1.0, 0.0], [0.0, 1.0]), Complex64::new(-1.0, -1.0));
        assert_eq!(lozenge([1.0, 2.0], [0.0, 0.0]), Complex64::new(0.0, 0.0));
        assert_eq!(f_value([3.0, 2.0], [0.0, 0.0]), Complex64::new(1.0, 0.0));
        let f = f_value([3.0, 2.0], [1.0, 4.0]);
        assert_relative_eq!(f.norm(), (-25.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn f_value_is_harmonic_under_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = pt(0.8, 1.3);
        for y in [[0.0, 1.0], [0.7, 0.0], [0.0, 0.2]] {
            let n = 200_000;
            let (mut sr, mut si, mut qr, mut qi) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let z = sample(x, &mut rng).to_point().to_array();
                let f = f_value(z, y);
                sr += f.re;
                si += f.im;
                qr += f.re * f.re;
                qi += f.im * f.im;
            }
            let nf = n as f64;
            let (mr, mi) = (sr / nf, si / nf);
            let ser = ((qr / nf - mr * mr) / nf).sqrt();
            let sei = ((qi / nf - mi * mi) / nf).sqrt();
            let exact = f_value(x.to_array(), y);
            assert!((mr - exact.re).abs() <= 4.0 * ser, "re {mr} vs {}", exact.re);
            assert!((mi - exact.im).abs() <= 4.0 * sei, "im {mi} vs {}", exact.im);
        }
    }

    #[test]
    fn signed_coordinate_round_trip() {
        for b in [BoundaryPoint::horizontal(2.0), BoundaryPoint::vertical(0.5), BoundaryPoint::vertical(0.0)] {
            assert_eq!(BoundaryPoint::from_signed(b.signed()), b);
        }
        assert_eq!(BoundaryPoint::vertical(0.0).axis(), Axis::Horizontal);
        assert!(BoundaryPoint::from_point(pt(1.0, 1.0)).is_none());
    }
}
