//! Discrete differential geometry on conformal grid charts.
//!
//! A field `u` on a chart stands for the metric `e^{2u}` times the flat
//! background of the chart. Curvature comes from the flat Laplacian,
//! distances from shortest paths on the node graph, and areas and lengths
//! from a marching-squares reconstruction of domain boundaries.

mod distance;
mod domain;
mod measure;

pub use distance::{geodesic_distance, DistanceField, Stencil};
pub use domain::{geodesic_ball, geodesic_ball_with, Domain};
pub use measure::{area, boundary_length};

use crate::field::ScalarField;

/// Flat Laplacian `∂²/∂x² + ∂²/∂y²` of the chart.
///
/// Interior nodes use the 5-point stencil; nodes on non-periodic edges use
/// the one-sided second-order formula `(2u₀ − 5u₁ + 4u₂ − u₃)/h²` along the
/// offending axis.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let c = *u.chart();
    let mut out = Vec::with_capacity(c.len());
    for j in 0..c.ny() {
        for i in 0..c.nx() {
            out.push(laplacian_at(u, i, j));
        }
    }
    ScalarField::from_raw(c, out)
}

#[inline]
pub(crate) fn laplacian_at(u: &ScalarField, i: usize, j: usize) -> f64 {
    let c = u.chart();
    let ux = |k: usize| u.at(k, j);
    let uy = |k: usize| u.at(i, k);
    let d2x = second_difference(i, c.nx(), c.periodic_x(), ux) / (c.hx() * c.hx());
    let d2y = second_difference(j, c.ny(), c.periodic_y(), uy) / (c.hy() * c.hy());
    d2x + d2y
}

#[inline]
fn second_difference(k: usize, n: usize, periodic: bool, f: impl Fn(usize) -> f64) -> f64 {
    if periodic {
        let prev = if k == 0 { n - 1 } else { k - 1 };
        let next = if k + 1 == n { 0 } else { k + 1 };
        f(prev) - 2.0 * f(k) + f(next)
    } else if k == 0 {
        2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)
    } else if k + 1 == n {
        2.0 * f(n - 1) - 5.0 * f(n - 2) + 4.0 * f(n - 3) - f(n - 4)
    } else {
        f(k - 1) - 2.0 * f(k) + f(k + 1)
    }
}

/// Gaussian curvature `K = −e^{−2u} Δu`.
pub fn gauss_curvature(u: &ScalarField) -> ScalarField {
    let lap = laplacian(u);
    let vals = u.values().iter().zip(lap.values()).map(|(&w, &l)| -(-2.0 * w).exp() * l).collect();
    ScalarField::from_raw(*u.chart(), vals)
}

/// Laplace–Beltrami operator `e^{−2u} Δ f` of the metric `e^{2u}`.
pub fn metric_laplacian(f: &ScalarField, u: &ScalarField) -> ScalarField {
    let lap = laplacian(f);
    let vals = u.values().iter().zip(lap.values()).map(|(&w, &l)| (-2.0 * w).exp() * l).collect();
    ScalarField::from_raw(*u.chart(), vals)
}
