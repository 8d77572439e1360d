//! Numerical integration of the harmonic-measure density.
//!
//! Used as an independent check of the closed-form tail and moment formulas.
//! Finite pieces only evaluate [`density`] pointwise; the far tail of a
//! moment integral uses the large-`w` expansion of the same density.

use quadrature::double_exponential;

use crate::quadrant::{density, Axis, BoundaryPoint, MassType, QuadrantPoint};

const PIECE_TOL: f64 = 1e-14;

/// `∫_c^∞ f(w) dw`, split at the given breakpoints. The last piece uses
/// `w = b + s·tan θ` to map the half-line onto `[0, π/2)`.
pub fn half_line<F: Fn(f64) -> f64>(f: F, c: f64, scale: f64, breakpoints: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > c && b.is_finite()).collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut total = 0.0;
    let mut left = c;
    for &b in &cuts {
        total += double_exponential::integrate(&f, left, b, PIECE_TOL).integral;
        left = b;
    }
    let s = scale.max(left);
    let tail = |theta: f64| {
        let (sin, cos) = theta.sin_cos();
        let w = left + s * sin / cos;
        f(w) * s / (cos * cos)
    };
    total + double_exponential::integrate(tail, 0.0, std::f64::consts::FRAC_PI_2, PIECE_TOL).integral
}

fn breakpoints(x: QuadrantPoint, axis: Axis) -> Vec<f64> {
    let (u, v) = match axis {
        Axis::Horizontal => (x.u, x.v),
        Axis::Vertical => (x.v, x.u),
    };
    let r = u.hypot(v);
    let mut cuts = vec![0.1 * r, r, 10.0 * r];
    // The density on this axis peaks near w² = u² - v² when that is positive.
    let d = (u - v) * (u + v);
    if d > 0.0 {
        let peak = d.sqrt();
        let width = (u * v / peak).max(1e-300);
        for k in [-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0] {
            let b = peak + k * width;
            if b > 0.0 {
                cuts.push(b);
            }
        }
    }
    cuts
}

/// Mass of `Q_x` on the given half-axis above level `c`, by quadrature.
pub fn axis_mass(x: QuadrantPoint, axis: Axis, c: f64) -> f64 {
    let f = |w: f64| density(x, BoundaryPoint::new(axis, w)).unwrap_or(0.0);
    half_line(f, c, x.u.hypot(x.v), &breakpoints(x, axis))
}

/// Terms kept in the tail expansion; each shrinks the remainder by at
/// least a factor 30 beyond the cut.
const TAIL_TERMS: usize = 12;

/// Where [`moment`] switches from quadrature to the tail expansion, in
/// units of `|x|`.
pub const MOMENT_CUT: f64 = 10.0;

fn axis_frame(x: QuadrantPoint, i: MassType) -> (Axis, f64, f64) {
    match i {
        MassType::One => (Axis::Horizontal, x.u, x.v),
        MassType::Two => (Axis::Vertical, x.v, x.u),
    }
}

/// `∫ y_i^p Q_x(dy)` by quadrature; coordinate `i` is nonzero only on its own axis.
///
/// Beyond `W = 10·|x|` the integrand `(4/π) uv w^{p+1} / (w⁴ + 2dw² + |x|⁴)`,
/// `d = v² - u²`, is expanded in powers of `w⁻²` and integrated exactly.
pub fn moment(x: QuadrantPoint, i: MassType, p: f64) -> f64 {
    let (axis, u, v) = axis_frame(x, i);
    let f = |w: f64| w.powf(p) * density(x, BoundaryPoint::new(axis, w)).unwrap_or(0.0);
    let cut = MOMENT_CUT * u.hypot(v);
    let mut cuts: Vec<f64> = breakpoints(x, axis).into_iter().filter(|&b| b > 0.0 && b < cut).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(cut);
    let mut body = 0.0;
    let mut left = 0.0;
    for &b in &cuts {
        body += double_exponential::integrate(f, left, b, PIECE_TOL).integral;
        left = b;
    }
    body + moment_tail(x, i, p, cut)
}

/// `∫ y_i^p 1{y_i > c} Q_x(dy)` from the large-`w` expansion; accurate for
/// `c ≥ 10·|x|`.
pub fn moment_tail(x: QuadrantPoint, i: MassType, p: f64, c: f64) -> f64 {
    let (_, u, v) = axis_frame(x, i);
    let r2 = u * u + v * v;
    // 1/(1 + 2dq + R q²) = Σ c_j q^j with q = w⁻², R = |x|⁴.
    let d = (v - u) * (v + u);
    let big_r = r2 * r2;
    let (mut c_prev, mut cj) = (0.0, 1.0);
    let mut tail = 0.0;
    for j in 0..TAIL_TERMS {
        let e = p - 2.0 - 2.0 * j as f64;
        tail += cj * c.powf(e) / -e;
        let next = -2.0 * d * cj - big_r * c_prev;
        c_prev = cj;
        cj = next;
    }
    4.0 / std::f64::consts::PI * u * v * tail
}
