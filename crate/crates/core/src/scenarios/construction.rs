//! Cigars of scales `1/k` glued into a base metric, truncated at `k_max`.
//!
//! Patch `k` is a cigar of scale `α_k = 1/k` and length `R_k = A k(k+1)`,
//! mapped into the base chart by `z = c_k + w/λ_k`, where `w` is the cigar's
//! own coordinate. Its truncation circle `ℓ = ℓ_V` bounds the inner region
//! `V_k`; the conformal factor is blended into the base over
//! `ℓ ∈ [ℓ_V, ℓ_V + width]`, whose outer circle `|z − c_k| = ρ` bounds the
//! support `U_k`.
//!
//! The cigars are far too long to resolve on the base grid, so each patch
//! also gets a cylindrical sub-chart in its own coordinate, on which areas
//! are integrated and the flow is run.

use std::f64::consts::{LN_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::{quintic, ScenarioResult, SeriesPoint};
use crate::chart::ConformalChart;
use crate::diagnostics::{chen_bound, chen_tolerance, DiagnosticReport};
use crate::error::{Error, Result};
use crate::exact::{softplus, CigarModel};
use crate::field::ScalarField;
use crate::flow::{
    self, BoundaryCondition, BoundaryKind, Dt, ExactReference, FlowState, RunLog, RunOptions, Scheme, StepControl,
};
use crate::geometry::{self, Domain};

pub(super) const CHECKS: &[&str] =
    &["initial_curvature", "monotone_in_k", "area_series", "chen", "curvature_persistence"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub k: usize,
    /// Cigar with its tip at the patch centre in the base chart.
    pub model: CigarModel,
    /// Base-chart radius of the support `U_k`.
    pub rho: f64,
}

impl Patch {
    pub fn center(&self) -> [f64; 2] {
        self.model.tip
    }

    /// `λ` in `z = c + w/λ`.
    pub fn lambda(&self, width: f64) -> f64 {
        (self.model.ell_edge() + width).exp() / self.rho
    }
}

/// Sub-chart resolution for the per-patch cylinders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub ell_min: f64,
    pub cells_per_unit: usize,
    pub n_theta: usize,
    /// Extent in `ℓ` of base metric kept beyond `U_k`.
    pub flat_extension: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionSpec {
    pub k_max: usize,
    /// Base metric on a planar chart.
    pub base_metric: ScalarField,
    pub patches: Vec<Patch>,
    /// Width in `ℓ` of the blend collar.
    pub cutoff_width: f64,
    pub a_cfg: f64,
    pub grid: PatchGrid,
}

impl ConstructionSpec {
    /// Patches `k = 1..=k_max` of support radius `rho`, spaced along the
    /// real axis of a flat base chart with `density` nodes per unit length.
    pub fn flat(
        k_max: usize,
        a_cfg: f64,
        cutoff_width: f64,
        rho: f64,
        density: usize,
        grid: PatchGrid,
    ) -> Result<Self> {
        if k_max == 0 || !(a_cfg > 0.0 && cutoff_width > 0.0 && rho > 0.0) || density == 0 {
            return Err(Error::InvalidArgument("construction needs k_max ≥ 1 and positive sizes".into()));
        }
        let spacing = 2.2 * rho * grid.flat_extension.exp();
        let half_w = 0.5 * spacing * k_max as f64;
        let half_h = 0.5 * spacing;
        let n = |len: f64| ((len * density as f64).round() as usize + 1).max(crate::chart::MIN_NODES);
        let chart = ConformalChart::planar([-half_w, half_w], [-half_h, half_h], n(2.0 * half_w), n(2.0 * half_h))?;
        let patches = (1..=k_max)
            .map(|k| {
                let x = spacing * (k as f64 - 0.5 * (k_max as f64 + 1.0));
                let kf = k as f64;
                Ok(Patch { k, model: CigarModel::with_tip(1.0 / kf, a_cfg * kf * (kf + 1.0), [x, 0.0])?, rho })
            })
            .collect::<Result<_>>()?;
        let spec = Self { k_max, base_metric: ScalarField::constant(chart, 0.0)?, patches, cutoff_width, a_cfg, grid };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patches.len() != self.k_max {
            return Err(Error::InvalidArgument(format!("expected {} patches, got {}", self.k_max, self.patches.len())));
        }
        for w in self.patches.windows(2) {
            if !(w[1].model.length > w[0].model.length) {
                return Err(Error::InvalidArgument("patch lengths must increase with k".into()));
            }
        }
        for (a, p) in self.patches.iter().enumerate() {
            for q in &self.patches[a + 1..] {
                let [dx, dy] = [p.center()[0] - q.center()[0], p.center()[1] - q.center()[1]];
                if dx.hypot(dy) < p.rho + q.rho {
                    return Err(Error::PatchOverlap { first: p.k, second: q.k });
                }
            }
            let reach = p.rho * self.grid.flat_extension.exp();
            let [x0, x1, y0, y1] = self.base_metric.chart().bounds();
            let [cx, cy] = p.center();
            if cx - reach < x0 || cx + reach > x1 || cy - reach < y0 || cy + reach > y1 {
                return Err(Error::InvalidArgument(format!("patch {} does not fit in the base chart", p.k)));
            }
        }
        Ok(())
    }

    /// Blend weight of the cigar at cylindrical coordinate `ell`.
    fn weight(&self, p: &Patch, ell: f64) -> f64 {
        1.0 - quintic((ell - p.model.ell_edge()) / self.cutoff_width)
    }

    /// Sub-chart of patch `p`: from `ell_min` to past the support.
    pub fn patch_chart(&self, p: &Patch) -> Result<ConformalChart> {
        let g = &self.grid;
        let hi = p.model.ell_edge() + self.cutoff_width + g.flat_extension;
        let n = ((hi - g.ell_min) * g.cells_per_unit as f64).round() as usize + 1;
        ConformalChart::cylindrical([g.ell_min, hi], n, g.n_theta)
    }
}

/// The patched metric on the base chart, and each patch on its sub-chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchedMetric {
    pub planar: ScalarField,
    pub patches: Vec<ScalarField>,
}

/// Glue the scaled cigars into the base metric, blending the conformal
/// factor: `u = f u_cigar + (1 − f) u_base`.
pub fn build_patched_metric(spec: &ConstructionSpec) -> Result<PatchedMetric> {
    spec.validate()?;
    let base = &spec.base_metric;
    let chart = *base.chart();
    let w = spec.cutoff_width;
    let mut planar = base.values().to_vec();
    for p in &spec.patches {
        let (a, lam) = (p.model.alpha, p.lambda(w));
        let [cx, cy] = p.center();
        for (k, u) in planar.iter_mut().enumerate() {
            let (i, j) = chart.node(k);
            let [x, y] = chart.coord(i, j);
            let ell = lam.ln() + 0.5 * ((x - cx).powi(2) + (y - cy).powi(2)).ln();
            let f = spec.weight(p, ell);
            if f > 0.0 {
                let cigar = lam.ln() + a.ln() - 0.5 * softplus(2.0 * ell);
                *u = f * cigar + (1.0 - f) * *u;
            }
        }
    }
    let planar = ScalarField::new(chart, planar)?;

    let patches = spec
        .patches
        .iter()
        .map(|p| {
            let c = spec.patch_chart(p)?;
            let lam = p.lambda(w);
            let [cx, cy] = p.center();
            let mut err = None;
            let f = ScalarField::from_fn(c, |ell, th| {
                let r = (ell - lam.ln()).exp();
                let ub = base.interpolate([cx + r * th.cos(), cy + r * th.sin()]).unwrap_or_else(|| {
                    err = Some(p.k);
                    0.0
                });
                let f = spec.weight(p, ell);
                f * p.model.u_cyl(0.0, ell) + (1.0 - f) * (ub + ell - lam.ln())
            })?;
            match err {
                Some(k) => Err(Error::InvalidArgument(format!("patch {k} leaves the base chart"))),
                None => Ok(f),
            }
        })
        .collect::<Result<_>>()?;
    Ok(PatchedMetric { planar, patches })
}

/// Area of `V_k` on the patch sub-chart plus the closed-form tip stub.
fn inner_area(spec: &ConstructionSpec, p: &Patch, v: &ScalarField) -> Result<f64> {
    let edge = p.model.ell_edge();
    let dom = Domain::from_fn(*v.chart(), |x, _| x - edge)?;
    Ok(geometry::area(v, &dom) + p.model.sublevel_area(0.0, spec.grid.ell_min))
}

/// Largest curvature over interior nodes of `V_k` (`ℓ ≤ ℓ_V`); the blend
/// collar carries curvature of its own that belongs to neither metric.
fn max_inner_k(u: &ScalarField, edge: f64) -> f64 {
    let c = u.chart();
    let k = geometry::gauss_curvature(u);
    (0..c.len())
        .map(|n| c.node(n))
        .filter(|&(i, j)| c.is_interior(i, j, 1) && c.x(i) <= edge)
        .map(|(i, j)| k.at(i, j))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Serialize)]
struct PatchRecord {
    k: usize,
    alpha: f64,
    length: f64,
    horizon: f64,
    lambda: f64,
    area_v: f64,
    area_v_closed_form: f64,
    area_lower_bound: f64,
    /// `[t, max K]` at each check time with `k > t`.
    max_k: Vec<[f64; 2]>,
    /// `[t, α_k² max K]`.
    eps_hat: Vec<[f64; 2]>,
}

/// Flow every patch on its own sub-chart (exact tip edge, frozen outer
/// edge) and record patch curvature maxima at the check times `t < k`.
pub fn run_construction_suite(
    spec: &ConstructionSpec,
    t_checks: &[f64],
    step: Option<&StepControl>,
) -> Result<ScenarioResult> {
    let mut checks: Vec<f64> = t_checks.to_vec();
    if checks.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Config("t_checks must be finite and non-negative".into()));
    }
    checks.sort_by(f64::total_cmp);
    checks.dedup();
    let metric = build_patched_metric(spec)?;
    let mut res = ScenarioResult::new("construction", 0);
    res.snapshots.push((0.0, metric.planar.clone()));
    let mut log = RunLog::new();
    let mut chen = Vec::new();
    let mut records = Vec::new();

    for (p, v0) in spec.patches.iter().zip(&metric.patches) {
        let a = p.model.alpha;
        let area_v = inner_area(spec, p, v0)?;
        let mut rec = PatchRecord {
            k: p.k,
            alpha: a,
            length: p.model.length,
            horizon: p.k as f64,
            lambda: p.lambda(spec.cutoff_width),
            area_v,
            area_v_closed_form: p.model.sublevel_area(0.0, p.model.ell_edge()),
            area_lower_bound: TAU * a * (p.model.length - a),
            max_k: Vec::new(),
            eps_hat: Vec::new(),
        };
        let times: Vec<f64> = checks.iter().copied().filter(|&t| t < p.k as f64).collect();
        let tip = BoundaryKind::DirichletExact { reference: ExactReference::Cigar(p.model) };
        let mut state =
            FlowState::new(0.0, v0.clone(), BoundaryCondition::split_x(tip, BoundaryKind::DirichletFrozen))?;
        let h = state.chart().h_min();
        let mut ctl = step.copied().unwrap_or(StepControl::implicit(0.5 * h * h * a * a));
        if ctl.scheme == Scheme::ImplicitEuler && ctl.dt == Dt::Auto {
            ctl.dt = Dt::Fixed(0.5 * h * h * a * a);
        }
        for &t in &times {
            if t > state.t() {
                let mut seg = RunLog::new();
                let out = flow::run(state, &ctl, &RunOptions::until(t), &mut [&mut seg])?.into_result()?;
                for row in seg.rows().iter().skip(1) {
                    log.push(*row);
                }
                state = out.state;
            } else {
                log.push(flow::LogRow::from_state(0, 0.0, &state));
            }
            let kmax = max_inner_k(state.u(), p.model.ell_edge());
            rec.max_k.push([t, kmax]);
            rec.eps_hat.push([t, a * a * kmax]);
            if t > 0.0 {
                chen.push(chen_bound(&state, chen_tolerance(&state))?);
            }
        }
        if state.t() > 0.0 {
            res.snapshots.push((state.t(), state.u().clone()));
        }
        records.push(rec);
    }
    res.log = log;
    res.push_worst("chen", chen);

    let k_at = |r: &PatchRecord, t: f64| r.max_k.iter().find(|q| q[0] == t).map(|q| q[1]);
    let dev0 = records
        .iter()
        .filter_map(|r| k_at(r, 0.0).map(|kk| (kk / (2.0 * (r.k * r.k) as f64) - 1.0).abs()))
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    res.reports.push(
        match dev0 {
            Some(d) => DiagnosticReport::new("initial_curvature", 0.0, 0.05 - d, 0.0).with_value(d, 0.05),
            None => DiagnosticReport::new("initial_curvature", 0.0, 0.0, 0.0).with_detail("t = 0 not checked"),
        }
        .soft(),
    );

    let mut mono = Vec::new();
    for &t in &checks {
        let ks: Vec<f64> = records.iter().filter(|r| (r.k as f64) > t).filter_map(|r| k_at(r, t)).collect();
        if ks.len() >= 2 {
            let gap = ks.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            mono.push(DiagnosticReport::new("monotone_in_k", t, gap, 0.0).with_value(gap, 0.0));
        }
    }
    if mono.is_empty() {
        res.reports.push(
            DiagnosticReport::new("monotone_in_k", 0.0, 0.0, 0.0)
                .with_detail("vacuous: fewer than two patches with k > t"),
        );
    } else {
        // a tie counts as a failure: growth must be strict
        for r in &mut mono {
            r.pass = r.margin > 0.0;
        }
        res.push_worst("monotone_in_k", mono);
    }

    let (mut s, mut b) = (0.0, 0.0);
    let mut sums = Vec::new();
    let mut area_margin = f64::INFINITY;
    for r in &records {
        s += r.area_v;
        b += r.area_lower_bound;
        let excess = s / b - 1.0;
        area_margin = area_margin.min(excess.min(0.10 - excess));
        sums.push([r.k as f64, s, b]);
    }
    res.reports.push(
        DiagnosticReport::new("area_series", 0.0, area_margin, 0.0)
            .with_value(s, b)
            .with_detail("partial sums of inner areas against the series lower bound")
            .soft(),
    );

    let eps: Vec<(f64, f64)> =
        records.iter().flat_map(|r| r.eps_hat.iter().filter(|q| q[0] > 0.0).map(|q| (q[0], q[1]))).collect();
    let (t_min, e_min) = eps.iter().copied().fold((0.0, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
    res.reports.push(if eps.is_empty() {
        DiagnosticReport::new("curvature_persistence", 0.0, 0.0, 0.0).with_detail("no check time t > 0").soft()
    } else {
        DiagnosticReport::new("curvature_persistence", t_min, e_min, 0.0).with_value(e_min, 0.0).soft()
    });
    res.series.insert(
        "curvature_persistence".into(),
        eps.iter().map(|&(t, e)| SeriesPoint { t, value: e, bound: 0.0, margin: e, tolerance: 0.0 }).collect(),
    );

    res.measure("k_max", spec.k_max);
    res.measure("a_cfg", spec.a_cfg);
    res.measure("t_checks", &checks);
    res.measure("area_partial_sums", &sums);
    res.measure("eps_hat_min", (!eps.is_empty()).then_some(e_min));
    res.measure("patches", &records);
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionScenario {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_a_cfg")]
    pub a_cfg: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff_width: f64,
    /// Base-chart radius of each support.
    #[serde(default = "one")]
    pub rho: f64,
    /// Base-chart nodes per unit length.
    #[serde(default = "default_density")]
    pub density: usize,
    #[serde(default = "default_ell_min")]
    pub ell_min: f64,
    #[serde(default = "default_cells")]
    pub cells_per_unit: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default = "default_extension")]
    pub flat_extension: f64,
    #[serde(default = "default_checks")]
    pub t_checks: Vec<f64>,
}

fn default_k_max() -> usize {
    3
}
fn default_a_cfg() -> f64 {
    4.0
}
fn default_cutoff() -> f64 {
    LN_2
}
fn one() -> f64 {
    1.0
}
fn default_density() -> usize {
    16
}
fn default_ell_min() -> f64 {
    -4.0
}
fn default_cells() -> usize {
    8
}
fn default_n_theta() -> usize {
    8
}
fn default_extension() -> f64 {
    0.5
}
fn default_checks() -> Vec<f64> {
    vec![0.0, 0.5]
}

impl Default for ConstructionScenario {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ConstructionScenario {
    pub fn spec(&self) -> Result<ConstructionSpec> {
        if self.cells_per_unit == 0 || self.n_theta < crate::chart::MIN_NODES || !(self.flat_extension >= 0.0) {
            return Err(Error::Config("scenario: patch grid too coarse".into()));
        }
        let grid = PatchGrid {
            ell_min: self.ell_min,
            cells_per_unit: self.cells_per_unit,
            n_theta: self.n_theta,
            flat_extension: self.flat_extension,
        };
        ConstructionSpec::flat(self.k_max, self.a_cfg, self.cutoff_width, self.rho, self.density, grid)
            .map_err(|e| Error::Config(format!("scenario: {e}")))
    }
}

/// Closed-form area of `V_k`: `π α² softplus(2 ℓ_V)`, about
/// `2π α (R − α ln 2)` for long cigars.
pub fn inner_area_closed_form(model: &CigarModel) -> f64 {
    PI * model.alpha * model.alpha * softplus(2.0 * model.ell_edge())
}
