//! Closed-form reference solutions: the cigar soliton at arbitrary scale, its
//! distance/area/curvature identities, and round or capped spheres.
//!
//! Everything here is a pure function of its inputs. Logarithms of hyperbolic
//! functions are evaluated through `ln_1p`/`exp_m1` so that arguments far
//! beyond 30 neither overflow nor lose the leading term.

use std::f64::consts::{LN_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// `ln sinh x` for `x > 0`.
pub fn log_sinh(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    x + (-(-2.0 * x).exp_m1()).ln() - LN_2
}

/// `arsinh(e^x)`.
pub fn asinh_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (1.0 + (1.0 + (-2.0 * x).exp()).sqrt()).ln()
    } else {
        let y = x.exp();
        (y + y * y / (1.0 + (1.0 + y * y).sqrt())).ln_1p()
    }
}

/// A cigar soliton `alpha^2 g_Σ` with its tip at `tip` in the planar chart,
/// truncated at geodesic length `length` from the tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CigarModel {
    pub alpha: f64,
    pub length: f64,
    #[serde(default)]
    pub tip: [f64; 2],
}

impl CigarModel {
    pub fn new(alpha: f64, length: f64) -> Result<Self> {
        Self::with_tip(alpha, length, [0.0, 0.0])
    }

    pub fn with_tip(alpha: f64, length: f64, tip: [f64; 2]) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("cigar scale must be positive, got {alpha}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("cigar length must be positive, got {length}")));
        }
        Ok(Self { alpha, length, tip })
    }

    /// Unit-scale cigar of the given length.
    pub fn unit(length: f64) -> Self {
        Self { alpha: 1.0, length, tip: [0.0, 0.0] }
    }

    /// Time on the unit-scale soliton that corresponds to `t` at this scale.
    pub fn unit_time(&self, t: f64) -> f64 {
        t / (self.alpha * self.alpha)
    }

    pub fn u(&self, t: f64, z: [f64; 2]) -> f64 {
        let s = self.unit_time(t);
        let dx = z[0] - self.tip[0];
        let dy = z[1] - self.tip[1];
        let rho2 = dx * dx + dy * dy;
        self.alpha.ln() - 0.5 * log_add_exp(4.0 * s, rho2.ln())
    }

    pub fn curvature(&self, t: f64, z: [f64; 2]) -> f64 {
        let s = self.unit_time(t);
        let dx = z[0] - self.tip[0];
        let dy = z[1] - self.tip[1];
        let rho2 = dx * dx + dy * dy;
        2.0 / (self.alpha * self.alpha * (1.0 + rho2 * (-4.0 * s).exp()))
    }

    /// Conformal factor in cylindrical coordinates `z = tip + e^{ℓ + iθ}`.
    pub fn u_cyl(&self, t: f64, ell: f64) -> f64 {
        self.alpha.ln() - 0.5 * softplus(4.0 * self.unit_time(t) - 2.0 * ell)
    }

    pub fn curvature_cyl(&self, t: f64, ell: f64) -> f64 {
        let s = self.unit_time(t);
        2.0 / (self.alpha * self.alpha * (1.0 + (2.0 * ell - 4.0 * s).exp()))
    }

    /// Largest curvature of the solution, attained at the tip for every `t`.
    pub fn max_curvature(&self) -> f64 {
        2.0 / (self.alpha * self.alpha)
    }

    /// Cylindrical coordinate of the boundary circle of the geodesic ball of
    /// radius `r` about the tip, measured in the initial metric.
    pub fn ell_at_distance(&self, r: f64) -> f64 {
        log_sinh(r / self.alpha)
    }

    /// Cylindrical coordinate of the edge of the truncated cigar.
    pub fn ell_edge(&self) -> f64 {
        self.ell_at_distance(self.length)
    }

    /// Area at time `t` of the part of the cigar with `ℓ < ell`.
    pub fn sublevel_area(&self, t: f64, ell: f64) -> f64 {
        self.alpha * self.alpha * PI * softplus(2.0 * (ell - 2.0 * self.unit_time(t)))
    }

    /// Distance at time `t` from the tip to the circle `ℓ = ell`.
    pub fn dist_to_circle(&self, t: f64, ell: f64) -> f64 {
        self.alpha * asinh_exp(ell - 2.0 * self.unit_time(t))
    }
}

/// Cylindrical coordinates on the punctured plane, `z = e^{ℓ + iθ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylCoord {
    pub ell: f64,
    pub theta: f64,
}

impl CylCoord {
    pub fn new(ell: f64, theta: f64) -> Self {
        let mut theta = theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        Self { ell, theta }
    }

    pub fn to_planar(self) -> [f64; 2] {
        let r = self.ell.exp();
        [r * self.theta.cos(), r * self.theta.sin()]
    }
}

pub fn cigar_u(model: &CigarModel, t: f64, z: [f64; 2]) -> f64 {
    model.u(t, z)
}

pub fn cigar_curvature(model: &CigarModel, t: f64, z: [f64; 2]) -> f64 {
    model.curvature(t, z)
}

/// Distance on the unit cigar from the tip to the circle at `ell`.
pub fn cigar_dist_from_tip(ell: f64) -> f64 {
    asinh_exp(ell)
}

/// Area of the unit-cigar region `ℓ' < ell`, i.e. `2π ln cosh arsinh e^ℓ`.
pub fn cigar_sublevel_area(ell: f64) -> f64 {
    PI * softplus(2.0 * ell)
}

/// Area of the unit-cigar geodesic ball of radius `r` about the tip.
pub fn cigar_ball_area(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be non-negative, got {r}")));
    }
    Ok(TAU * log_cosh(r))
}

/// Area at time `t` of the initial geodesic ball of radius `r` about the tip.
pub fn cigar_timed_ball_area(r: f64, t: f64) -> f64 {
    PI * softplus(2.0 * (log_sinh(r) - 2.0 * t))
}

/// Distance at time `t` from the tip to the boundary of the initial ball of radius `r`.
pub fn cigar_timed_dist(r: f64, t: f64) -> f64 {
    asinh_exp(log_sinh(r) - 2.0 * t)
}

/// Unit-cigar conformal factor against the flat cylinder `dℓ² + dθ²`.
pub fn cigar_u_cyl(t: f64, c: CylCoord) -> f64 {
    -0.5 * softplus(4.0 * t - 2.0 * c.ell)
}

/// Half-width in `ℓ` of the blend that smooths each hemisphere/cylinder join.
pub const CAP_BLEND_HALF_WIDTH: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SphereKind {
    /// Round sphere of the given radius.
    Round { radius: f64 },
    /// Cylinder `S¹_r × [-1, 1]` closed by two hemispheres of radius `r`.
    Capped { radius: f64 },
}

/// A rotationally symmetric sphere, stored through its profile `v(ℓ)` on the
/// cylinder `z = e^{ℓ + iθ}` of the stereographic chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereModel {
    kind: SphereKind,
    /// Additive shift of the capped profile that restores the exact area after blending.
    shift: f64,
}

impl SphereModel {
    pub fn round(radius: f64) -> Result<Self> {
        Self::new(SphereKind::Round { radius })
    }

    pub fn capped(radius: f64) -> Result<Self> {
        Self::new(SphereKind::Capped { radius })
    }

    pub fn new(kind: SphereKind) -> Result<Self> {
        let radius = match kind {
            SphereKind::Round { radius } | SphereKind::Capped { radius } => radius,
        };
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("sphere radius must be positive, got {radius}")));
        }
        let shift = match kind {
            SphereKind::Round { .. } => 0.0,
            SphereKind::Capped { radius } => capped_area_shift(radius),
        };
        Ok(Self { kind, shift })
    }

    pub fn kind(&self) -> SphereKind {
        self.kind
    }

    /// Total area of the unsmoothed initial metric.
    pub fn area(&self) -> f64 {
        match self.kind {
            SphereKind::Round { radius } => 4.0 * PI * radius * radius,
            SphereKind::Capped { radius } => 4.0 * PI * radius + 4.0 * PI * radius * radius,
        }
    }

    /// Extinction time of the flow, `Vol / 8π`.
    pub fn lifespan(&self) -> f64 {
        self.area() / (8.0 * PI)
    }

    /// Profile `v(ℓ)` with metric `e^{2v}(dℓ² + dθ²)`.
    pub fn profile(&self, ell: f64) -> f64 {
        match self.kind {
            SphereKind::Round { radius } => radius.ln() - log_cosh(ell),
            SphereKind::Capped { radius } => radius.ln() + self.shift - log_cosh(smooth_ramp(ell.abs() - 1.0 / radius)),
        }
    }

    /// Conformal factor in the stereographic chart, `v(ln|z|) - ln|z|`.
    pub fn u(&self, z: [f64; 2]) -> f64 {
        let rho2 = z[0] * z[0] + z[1] * z[1];
        match self.kind {
            SphereKind::Round { radius } => (2.0 * radius).ln() - rho2.ln_1p(),
            SphereKind::Capped { radius } => {
                let ell = 0.5 * rho2.ln();
                if ell < -1.0 / radius - CAP_BLEND_HALF_WIDTH {
                    // pure cap: closed form stays finite at z = 0
                    (2.0 * radius).ln() + self.shift + 1.0 / radius - (rho2 * (2.0 / radius).exp()).ln_1p()
                } else {
                    self.profile(ell) - ell
                }
            }
        }
    }
}

pub fn sphere_u(model: &SphereModel, z: [f64; 2]) -> f64 {
    model.u(z)
}

pub fn sphere_lifespan(model: &SphereModel) -> f64 {
    model.lifespan()
}

/// Round sphere of initial radius `rho` shrinking under the flow.
pub fn round_sphere_u(rho: f64, t: f64, z: [f64; 2]) -> f64 {
    let r2 = rho * rho - 2.0 * t;
    0.5 * r2.ln() + LN_2 - (z[0] * z[0] + z[1] * z[1]).ln_1p()
}

pub fn round_sphere_curvature(rho: f64, t: f64) -> f64 {
    1.0 / (rho * rho - 2.0 * t)
}

/// C³ replacement for `max(x, 0)`: zero below `-w`, identity above `w`,
/// with a quintic-smoothstep derivative in between.
pub fn smooth_ramp(x: f64) -> f64 {
    let w = CAP_BLEND_HALF_WIDTH;
    if x <= -w {
        0.0
    } else if x >= w {
        x
    } else {
        let y = (x + w) / (2.0 * w);
        2.0 * w * y.powi(4) * (y * y - 3.0 * y + 2.5)
    }
}

fn capped_area_shift(radius: f64) -> f64 {
    let exact = 4.0 * PI * radius + 4.0 * PI * radius * radius;
    // the blend only alters the profile on |x| < w around each join
    let w = CAP_BLEND_HALF_WIDTH;
    let n = 4000;
    let h = 2.0 * w / n as f64;
    let integrand = |x: f64| {
        let sech2 = |y: f64| {
            let c = y.cosh();
            1.0 / (c * c)
        };
        sech2(smooth_ramp(x)) - sech2(x.max(0.0))
    };
    let mut acc = integrand(-w) + integrand(w);
    for k in 1..n {
        let x = -w + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * integrand(x);
    }
    let delta = 2.0 * TAU * radius * radius * acc * h / 3.0;
    0.5 * (exact / (exact + delta)).ln()
}
