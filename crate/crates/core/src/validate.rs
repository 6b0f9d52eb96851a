//! Closed-form identity suite for the exact solutions.
//!
//! Each identity compares a library function against a textbook evaluation
//! (or checks a stated bound) on seeded samples. Equalities report the
//! largest relative deviation; bounds report the largest violation.

use std::f64::consts::{LN_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    cigar_ball_area, cigar_curvature, cigar_dist_from_tip, cigar_sublevel_area, cigar_timed_ball_area,
    cigar_timed_dist, cigar_u, cigar_u_cyl, sphere_lifespan, CigarModel, CylCoord, SphereModel,
};

/// Samples per identity at density 1.
pub const BASE_SAMPLES: usize = 1000;
/// Largest accepted deviation.
pub const TOLERANCE: f64 = 1e-12;
/// Size of the perturbation applied by fault injection.
pub const FAULT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub samples: usize,
    pub max_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidateOptions {
    /// Multiplies the number of samples per identity.
    pub sample_density: usize,
    /// Perturb the named identity's library value by [`FAULT`].
    pub inject_fault: Option<String>,
    pub seed: u64,
}

type Identity = (&'static str, fn(&mut ChaCha8Rng, f64) -> f64);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn below(value: f64, bound: f64) -> f64 {
    (value - bound).max(0.0) / bound.abs().max(1.0)
}

/// Each entry returns the deviation at one random sample, with `fault`
/// added to the library value under test.
const IDENTITIES: &[Identity] = &[
    ("dist_from_tip", |rng, fault| {
        let ell: f64 = rng.random_range(-20.0..30.0);
        let d = cigar_dist_from_tip(ell) + fault;
        let bounds = if ell >= 0.0 { below(ell + LN_2, d).max(below(d, ell + 1.0)) } else { 0.0 };
        rel(d, ell.exp().asinh()).max(bounds)
    }),
    ("sublevel_area", |rng, fault| {
        let ell: f64 = rng.random_range(-10.0..30.0);
        let a = cigar_sublevel_area(ell) + fault;
        let bound = if ell >= 0.0 { below(TAU * ell, a) } else { 0.0 };
        rel(a, TAU * ell.exp().asinh().cosh().ln()).max(bound)
    }),
    ("ball_area", |rng, fault| {
        let r: f64 = rng.random_range(0.0..30.0);
        let a = cigar_ball_area(r).expect("r ≥ 0") + fault;
        // the ball of radius r is the sublevel set ℓ < ln sinh r
        let as_sublevel = if r > 1e-3 { rel(a, cigar_sublevel_area(r.sinh().ln())) } else { 0.0 };
        rel(a, TAU * r.cosh().ln()).max(as_sublevel).max(below(TAU * (r - LN_2), a))
    }),
    ("metric_pinch", |rng, fault| {
        let r: f64 = rng.random_range(0.05..20.0);
        let edge = r.sinh().ln();
        let ell = edge + rng.random_range(0.0..10.0);
        let factor = |x: f64| (2.0 * cigar_u_cyl(0.0, CylCoord::new(x, 0.0))).exp();
        let at_edge = factor(edge) + fault;
        let e2u = factor(ell);
        let t2 = r.tanh().powi(2);
        rel(at_edge, t2).max(below(t2, e2u)).max(below(e2u, 1.0)).max(below(1.0 - 1.0 / (r * r), t2))
    }),
    ("curvature_tail", |rng, fault| {
        let r: f64 = rng.random_range(0.05..20.0);
        let m = CigarModel::unit(1.0);
        let edge = m.curvature_cyl(0.0, r.sinh().ln()) + fault;
        let inside = m.curvature_cyl(0.0, r.sinh().ln() + rng.random_range(0.0..10.0));
        rel(edge, 2.0 / r.cosh().powi(2)).max(below(edge, 2.0 / (r * r))).max(below(inside, edge))
    }),
    ("translation_law", |rng, fault| {
        let t: f64 = rng.random_range(0.0..10.0);
        let ell: f64 = rng.random_range(-10.0..10.0);
        let a = cigar_u_cyl(t, CylCoord::new(ell, 0.0)) + fault;
        let b = cigar_u_cyl(0.0, CylCoord::new(ell - 2.0 * t, 0.0));
        (a - b).abs().max(rel(a, -0.5 * ((4.0 * t - 2.0 * ell).exp() + 1.0).ln()))
    }),
    ("timed_distance", |rng, fault| {
        let r: f64 = rng.random_range(0.05..20.0);
        let t: f64 = rng.random_range(0.0..5.0);
        let d = cigar_timed_dist(r, t) + fault;
        rel(d, (r.sinh() * (-2.0 * t).exp()).asinh()).max(below(r - 2.0 * t, d))
    }),
    ("timed_ball_area", |rng, fault| {
        let r: f64 = rng.random_range(0.05..20.0);
        let t: f64 = rng.random_range(0.0..5.0);
        let a = cigar_timed_ball_area(r, t) + fault;
        let naive = TAU * (r.sinh() * (-2.0 * t).exp()).asinh().cosh().ln();
        rel(a, naive).max(below(TAU * (r - 2.0 * t - LN_2), a))
    }),
    ("chart_consistency", |rng, fault| {
        let t: f64 = rng.random_range(0.0..3.0);
        let ell: f64 = rng.random_range(-10.0..10.0);
        let th: f64 = rng.random_range(0.0..TAU);
        let m = CigarModel::unit(1.0);
        let z = CylCoord::new(ell, th).to_planar();
        rel(cigar_u(&m, t, z) + ell + fault, cigar_u_cyl(t, CylCoord::new(ell, th)))
    }),
    ("planar_solution", |rng, fault| {
        let t: f64 = rng.random_range(-2.0..2.0);
        let z = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let m = CigarModel::unit(1.0);
        let rho2 = z[0] * z[0] + z[1] * z[1];
        let u = cigar_u(&m, t, z) + fault;
        // K = 2 e^{4t} e^{2u} for u = −½ ln(e^{4t} + |z|²)
        rel(u, -0.5 * ((4.0 * t).exp() + rho2).ln())
            .max(rel(cigar_curvature(&m, t, z), 2.0 * (4.0 * t + 2.0 * u).exp()))
    }),
    ("scaling", |rng, fault| {
        let a: f64 = rng.random_range(0.1..3.0);
        let t: f64 = rng.random_range(0.0..2.0);
        let z = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let m = CigarModel::new(a, 1.0).expect("positive");
        let unit = CigarModel::unit(1.0);
        let u = cigar_u(&m, t, z) + fault;
        rel(u, a.ln() + cigar_u(&unit, t / (a * a), z))
            .max(rel(a * a * cigar_curvature(&m, t, z), cigar_curvature(&unit, t / (a * a), z)))
    }),
    ("sphere_lifespan", |rng, fault| {
        let r: f64 = rng.random_range(0.1..5.0);
        let round = sphere_lifespan(&SphereModel::round(r).expect("positive")) + fault;
        let capped = sphere_lifespan(&SphereModel::capped(r).expect("positive"));
        rel(round, 0.5 * r * r).max(rel(capped, 0.5 * (r + r * r))).max(rel(4.0 * PI * r * r / (8.0 * PI), 0.5 * r * r))
    }),
];

pub fn identity_names() -> Vec<&'static str> {
    IDENTITIES.iter().map(|(n, _)| *n).collect()
}

/// Evaluate every identity; fails only on a bad fault name.
pub fn run_identity_suite(opts: &ValidateOptions) -> Result<Vec<IdentityCheck>> {
    if let Some(f) = &opts.inject_fault {
        if !IDENTITIES.iter().any(|(n, _)| n == f) {
            return Err(Error::InvalidArgument(format!("unknown identity '{f}'")));
        }
    }
    let samples = BASE_SAMPLES * opts.sample_density.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    Ok(IDENTITIES
        .iter()
        .map(|(name, check)| {
            let fault = if opts.inject_fault.as_deref() == Some(*name) { FAULT } else { 0.0 };
            let dev = (0..samples).map(|_| check(&mut rng, fault)).fold(0.0, f64::max);
            IdentityCheck { name, samples, max_deviation: dev, pass: dev <= TOLERANCE }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_identities_hold() {
        let res = run_identity_suite(&ValidateOptions::default()).unwrap();
        assert_eq!(res.len(), 12);
        for c in &res {
            assert!(c.pass, "{c:?}");
            assert_eq!(c.samples, BASE_SAMPLES);
        }
    }

    #[test]
    fn density_scales_samples() {
        let res = run_identity_suite(&ValidateOptions { sample_density: 2, ..Default::default() }).unwrap();
        assert!(res.iter().all(|c| c.pass && c.samples == 2 * BASE_SAMPLES));
    }

    #[test]
    fn injected_fault_is_caught_and_named() {
        for name in identity_names() {
            let opts = ValidateOptions { inject_fault: Some(name.to_string()), ..Default::default() };
            let res = run_identity_suite(&opts).unwrap();
            let failing: Vec<_> = res.iter().filter(|c| !c.pass).map(|c| c.name).collect();
            assert_eq!(failing, vec![name]);
        }
        let bad = ValidateOptions { inject_fault: Some("nope".into()), ..Default::default() };
        assert!(run_identity_suite(&bad).is_err());
    }
}
