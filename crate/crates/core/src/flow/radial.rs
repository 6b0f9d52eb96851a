//! Rotationally symmetric flows on the sphere.
//!
//! The conformal factor depends only on `s = |z|`. Two stereographic charts
//! (north and south) each carry nodes `s = 0, h, …, s_max` with `s = 1` a
//! node; nodes past `s = 1` are overlap nodes refilled from the other chart
//! through `u_N(s) = u_S(1/s) − 2 ln s`. The flat Laplacian is
//! `u'' + u'/s`, replaced by `4(u₁ − u₀)/h²` at the pole.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use super::{RunStatus, Scheme, StepControl};
use crate::error::{Error, Result};
use crate::exact::SphereModel;

/// Overlap extent past the equator.
pub const OVERLAP: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct RadialFlow {
    t: f64,
    h: f64,
    /// Index of `s = 1`.
    n1: usize,
    north: Vec<f64>,
    south: Vec<f64>,
}

/// Summary of one observed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialSample {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub area: f64,
    pub min_k: f64,
    pub max_k: f64,
    /// Largest disagreement between the two charts on the overlap.
    pub chart_mismatch: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RadialObservation<'a> {
    pub step: usize,
    pub dt: f64,
    pub flow: &'a RadialFlow,
}

impl RadialObservation<'_> {
    pub fn sample(&self) -> RadialSample {
        let f = self.flow;
        let (kn, ks) = f.curvature();
        let (min_k, max_k) =
            kn.iter().chain(&ks).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &k| (a.min(k), b.max(k)));
        let live = f.north[..=f.n1].iter().chain(&f.south[..=f.n1]);
        let (min_u, max_u) = live.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &u| (a.min(u), b.max(u)));
        RadialSample {
            step: self.step,
            t: f.t,
            dt: self.dt,
            min_u,
            max_u,
            area: f.area(),
            min_k,
            max_k,
            chart_mismatch: f.chart_mismatch(),
        }
    }
}

#[derive(Debug)]
pub struct RadialOutcome {
    pub flow: RadialFlow,
    pub steps: usize,
    pub status: RunStatus,
}

impl RadialFlow {
    /// Samples `model` with `n1` intervals between the pole and the equator.
    pub fn new(model: &SphereModel, n1: usize) -> Result<Self> {
        Self::from_fn(n1, |s| model.u([s, 0.0]), |s| model.u([s, 0.0]))
    }

    pub fn from_fn(n1: usize, north: impl Fn(f64) -> f64, south: impl Fn(f64) -> f64) -> Result<Self> {
        if n1 < 8 || n1 % 2 != 0 {
            return Err(Error::InvalidArgument(format!("radial grid needs an even n1 ≥ 8, got {n1}")));
        }
        let h = 1.0 / n1 as f64;
        let n = n1 + (OVERLAP * n1 as f64).ceil() as usize + 1;
        let north: Vec<f64> = (0..n).map(|k| north(k as f64 * h)).collect();
        let south: Vec<f64> = (0..n).map(|k| south(k as f64 * h)).collect();
        if let Some(k) = north.iter().chain(&south).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i: k % n, j: k / n });
        }
        let mut f = Self { t: 0.0, h, n1, north, south };
        f.refill_overlap();
        Ok(f)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn north(&self) -> &[f64] {
        &self.north
    }

    pub fn south(&self) -> &[f64] {
        &self.south
    }

    pub fn s(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Total area: each chart contributes its disc `s ≤ 1`.
    pub fn area(&self) -> f64 {
        self.disc_area(&self.north) + self.disc_area(&self.south)
    }

    fn disc_area(&self, u: &[f64]) -> f64 {
        let f = |k: usize| (2.0 * u[k]).exp() * self.s(k);
        let mut acc = f(0) + f(self.n1);
        for k in 1..self.n1 {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        TAU * acc * self.h / 3.0
    }

    /// Smallest `e^{2u}` over both charts.
    pub fn min_conformal(&self) -> f64 {
        let m = self.north[..=self.n1].iter().chain(&self.south[..=self.n1]).fold(f64::INFINITY, |a, &b| a.min(b));
        (2.0 * m).exp()
    }

    pub fn stable_dt(&self) -> f64 {
        0.2 * self.h * self.h * self.min_conformal()
    }

    fn lap(&self, u: &[f64], k: usize) -> f64 {
        let h2 = self.h * self.h;
        if k == 0 {
            4.0 * (u[1] - u[0]) / h2
        } else {
            (u[k + 1] - 2.0 * u[k] + u[k - 1]) / h2 + (u[k + 1] - u[k - 1]) / (2.0 * k as f64 * h2)
        }
    }

    /// Curvature at the nodes `s ≤ 1` of each chart.
    pub fn curvature(&self) -> (Vec<f64>, Vec<f64>) {
        let k = |u: &[f64]| (0..=self.n1).map(|k| -(-2.0 * u[k]).exp() * self.lap(u, k)).collect();
        (k(&self.north), k(&self.south))
    }

    /// Cubic interpolation of a chart on `[0, 1]`.
    fn interp(&self, u: &[f64], s: f64) -> f64 {
        let x = s / self.h;
        let base = (x.floor() as isize - 1).clamp(0, self.n1 as isize - 3) as usize;
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - (base + b) as f64) / (a as f64 - b as f64);
                }
            }
            acc += w * u[base + a];
        }
        acc
    }

    fn refill_overlap(&mut self) {
        for k in self.n1 + 1..self.north.len() {
            let s = self.s(k);
            let n = self.interp(&self.south, 1.0 / s) - 2.0 * s.ln();
            let m = self.interp(&self.north, 1.0 / s) - 2.0 * s.ln();
            self.north[k] = n;
            self.south[k] = m;
        }
    }

    /// Disagreement of the two charts at the equator `s = 1`, a node that
    /// both charts advance independently.
    pub fn chart_mismatch(&self) -> f64 {
        (self.north[self.n1] - self.south[self.n1]).abs()
    }

    /// Cylindrical profile `v(ℓ)` with metric `e^{2v}(dℓ² + dθ²)`, `z = e^{ℓ+iθ}`.
    pub fn profile(&self, ell: f64) -> f64 {
        if ell <= 0.0 {
            self.interp(&self.north, ell.exp()) + ell
        } else {
            self.interp(&self.south, (-ell).exp()) - ell
        }
    }

    pub fn step(&mut self, ctl: &StepControl) -> Result<f64> {
        let dt = match ctl.dt {
            super::Dt::Fixed(dt) => dt,
            super::Dt::Auto => self.stable_dt(),
        };
        self.step_by(ctl, dt)?;
        Ok(dt)
    }

    pub fn step_by(&mut self, ctl: &StepControl, dt: f64) -> Result<()> {
        let t_new = self.t + dt;
        let (n, s) = match ctl.scheme {
            Scheme::ExplicitEuler => {
                let bound = self.stable_dt();
                if dt > bound * (1.0 + 1e-12) {
                    return Err(Error::UnstableStep { dt, bound });
                }
                (self.explicit(&self.north, dt), self.explicit(&self.south, dt))
            }
            Scheme::ImplicitEuler => {
                (self.implicit(&self.north, dt, ctl, t_new)?, self.implicit(&self.south, dt, ctl, t_new)?)
            }
        };
        if n.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::StepBlowUp { t: t_new });
        }
        self.north = n;
        self.south = s;
        self.t = t_new;
        self.refill_overlap();
        Ok(())
    }

    fn explicit(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let mut out = u.to_vec();
        for k in 0..=self.n1 {
            out[k] = u[k] + dt * (-2.0 * u[k]).exp() * self.lap(u, k);
        }
        out
    }

    /// Backward Euler on `s ≤ 1` with the overlap values lagged.
    fn implicit(&self, u: &[f64], dt: f64, ctl: &StepControl, t_new: f64) -> Result<Vec<f64>> {
        let n = self.n1 + 1;
        let h2 = self.h * self.h;
        let mut w = u.to_vec();
        let resid = |w: &[f64]| -> Vec<f64> {
            (0..n).map(|k| w[k] - u[k] - dt * (-2.0 * w[k]).exp() * self.lap(w, k)).collect()
        };
        let norm = |f: &[f64]| f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut f = resid(&w);
        for _ in 0..ctl.max_newton {
            let r = norm(&f);
            if r < ctl.newton_tol {
                return Ok(w);
            }
            // tridiagonal Jacobian of e^{2w}(w − u) − dt L w
            let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for k in 0..n {
                di[k] = (2.0 * w[k]).exp() * (1.0 + 2.0 * (w[k] - u[k]));
                if k == 0 {
                    di[0] += dt * 4.0 / h2;
                    up[0] = -dt * 4.0 / h2;
                } else {
                    let c = 1.0 / (2.0 * k as f64);
                    lo[k] = -dt * (1.0 - c) / h2;
                    di[k] += dt * 2.0 / h2;
                    up[k] = -dt * (1.0 + c) / h2;
                }
            }
            let rhs: Vec<f64> = (0..n).map(|k| -(2.0 * w[k]).exp() * f[k]).collect();
            let delta = thomas(&lo, &di, &up, &rhs).ok_or(Error::SingularSystem)?;
            let mut lambda = 1.0;
            loop {
                let mut trial = w.clone();
                for k in 0..n {
                    trial[k] += lambda * delta[k];
                }
                let ft = resid(&trial);
                let nt = norm(&ft);
                if nt.is_finite() && (nt < (1.0 - 1e-4 * lambda) * r || lambda < 1e-3) {
                    w = trial;
                    f = ft;
                    break;
                }
                lambda *= 0.5;
            }
        }
        let r = norm(&f);
        if r < ctl.newton_tol {
            Ok(w)
        } else {
            Err(Error::NewtonFailure { t: t_new, residual: r, iterations: ctl.max_newton })
        }
    }

    /// Integrate until `t_end` or until `min e^{2u}` drops below
    /// `extinction_threshold`, observing at every multiple of `cadence`.
    pub fn run(
        mut self,
        ctl: &StepControl,
        t_end: f64,
        cadence: f64,
        extinction_threshold: f64,
        mut observe: impl FnMut(&RadialObservation<'_>) -> Result<()>,
    ) -> Result<RadialOutcome> {
        ctl.validate()?;
        if !(t_end > self.t && cadence > 0.0) {
            return Err(Error::InvalidArgument("need t_end > t and a positive cadence".into()));
        }
        let t0 = self.t;
        let mut steps = 0;
        let mut k = 1;
        observe(&RadialObservation { step: 0, dt: 0.0, flow: &self })?;
        loop {
            let target = (t0 + k as f64 * cadence).min(t_end);
            let mut dt = match ctl.dt {
                super::Dt::Fixed(dt) => dt,
                super::Dt::Auto => self.stable_dt(),
            };
            let (hit, clamped) = super::clamp_to_target(self.t, dt, target);
            dt = clamped;
            let backup = (self.north.clone(), self.south.clone(), self.t);
            if let Err(e) = self.step_by(ctl, dt) {
                (self.north, self.south, self.t) = backup;
                return Ok(RadialOutcome { flow: self, steps, status: RunStatus::Failed(e) });
            }
            steps += 1;
            if hit {
                self.t = target;
            }
            let extinct = self.min_conformal() < extinction_threshold;
            if hit || extinct {
                observe(&RadialObservation { step: steps, dt, flow: &self })
                    .map_err(|e| Error::Observer { t: self.t, message: e.to_string() })?;
            }
            if extinct {
                let t = self.t;
                return Ok(RadialOutcome { flow: self, steps, status: RunStatus::Extinct { t } });
            }
            if hit {
                if target >= t_end {
                    return Ok(RadialOutcome { flow: self, steps, status: RunStatus::Completed });
                }
                k += 1;
            }
        }
    }
}

fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = di[0];
    if beta == 0.0 {
        return None;
    }
    c[0] = up[0] / beta;
    d[0] = rhs[0] / beta;
    for k in 1..n {
        beta = di[k] - lo[k] * c[k - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        c[k] = up[k] / beta;
        d[k] = (rhs[k] - lo[k] * d[k - 1]) / beta;
    }
    for k in (0..n - 1).rev() {
        d[k] -= c[k] * d[k + 1];
    }
    Some(d)
}

/// Least-squares slope of `area` against `t` over samples with
/// `t ∈ [t_lo, t_hi]`.
pub fn area_slope(samples: &[RadialSample], t_lo: f64, t_hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|s| s.t >= t_lo && s.t <= t_hi).map(|s| (s.t, s.area)).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ma = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ma)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Gauss–Bonnet rate of area loss for a sphere: `−8π`.
pub const SPHERE_AREA_RATE: f64 = -8.0 * PI;
