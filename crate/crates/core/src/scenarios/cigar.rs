//! Truncated cigar on a cylindrical chart around its tip.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{quintic, ScenarioResult};
use crate::chart::ConformalChart;
use crate::diagnostics::{
    self, barrier_sandwich, beta_star, bol_residual, chen_bound, chen_tolerance, curvature_persistence,
    node_at_distance, patch_radius, BarrierConfig,
};
use crate::error::{Error, Result};
use crate::exact::CigarModel;
use crate::field::ScalarField;
use crate::flow::{
    self, BoundaryCondition, BoundaryKind, Dt, ExactReference, FlowState, History, RunLog, RunOptions, Scheme,
    StepControl,
};
use crate::geometry::geodesic_ball;

pub(super) const CHECKS: &[&str] = &[
    "chen",
    "bol",
    "barrier_sandwich",
    "curvature_persistence",
    "pseudolocality_precheck",
    "pseudolocality_conclusion",
];

/// Treatment of the outer end of the cigar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CigarBoundary {
    /// Chart ends at the truncation circle, driven by the exact soliton.
    #[default]
    Exact,
    /// The cigar is blended into a flat plane over a collar, and the far
    /// edge of the flat part is held fixed.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CigarScenario {
    #[serde(default = "one")]
    pub alpha: f64,
    /// Geodesic length `R` of the cigar from its tip.
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub boundary: CigarBoundary,
    /// Inner end of the chart; the tip itself sits at `ℓ = −∞`.
    #[serde(default = "default_ell_min")]
    pub ell_min: f64,
    /// Grid nodes per unit of `ℓ`.
    #[serde(default = "default_cells")]
    pub cells_per_unit: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    /// Observation spacing; a tenth of the horizon when absent.
    #[serde(default)]
    pub cadence: Option<f64>,
    /// Width in `ℓ` of the blend into the flat plane (frozen runs).
    #[serde(default = "default_cutoff")]
    pub cutoff_width: f64,
    /// Extent in `ℓ` of flat plane kept beyond the blend (frozen runs).
    #[serde(default = "one")]
    pub flat_extension: f64,
    /// Required `R ≥ a_cfg (T + 1) / α`.
    #[serde(default = "default_a_cfg")]
    pub a_cfg: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    #[serde(default = "default_resolution")]
    pub beta_resolution: f64,
    #[serde(default)]
    pub eps_target: f64,
}

fn one() -> f64 {
    1.0
}
fn default_length() -> f64 {
    20.0
}
fn default_ell_min() -> f64 {
    -4.0
}
fn default_cells() -> usize {
    8
}
fn default_n_theta() -> usize {
    16
}
fn default_cutoff() -> f64 {
    LN_2
}
fn default_a_cfg() -> f64 {
    4.0
}
fn default_beta() -> f64 {
    1.1
}
fn default_beta_max() -> f64 {
    3.0
}
fn default_resolution() -> f64 {
    1e-2
}

impl Default for CigarScenario {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl CigarScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scenario: {m}")));
        if !(self.alpha > 0.0 && self.length > 0.0 && self.horizon > 0.0) {
            return bad("alpha, length and horizon must be positive".into());
        }
        let need = self.a_cfg * (self.horizon + 1.0) / self.alpha;
        if self.length < need {
            return bad(format!(
                "length {} is below a_cfg (T + 1) / alpha = {need} for horizon {}",
                self.length, self.horizon
            ));
        }
        if self.cells_per_unit == 0 || self.n_theta < crate::chart::MIN_NODES {
            return bad("grid too coarse".into());
        }
        if !(self.ell_min < self.model()?.ell_edge() - 1.0) {
            return bad("ell_min must lie well below the truncation circle".into());
        }
        if !(self.cutoff_width > 0.0 && self.flat_extension >= 0.0) {
            return bad("cutoff_width must be positive and flat_extension non-negative".into());
        }
        if !(self.beta > 1.0 && self.beta_max > 1.0 && self.beta_resolution > 0.0) {
            return bad("barrier scales must exceed 1".into());
        }
        if self.cadence.is_some_and(|c| !(c > 0.0)) {
            return bad("cadence must be positive".into());
        }
        Ok(())
    }

    pub fn model(&self) -> Result<CigarModel> {
        CigarModel::new(self.alpha, self.length)
    }

    /// Blend scale `λ` that makes the flat part match the cylinder radius
    /// at the outer end of the blend.
    fn lambda(&self, model: &CigarModel) -> f64 {
        (model.ell_edge() + self.cutoff_width).exp() / self.alpha
    }

    pub fn chart(&self) -> Result<ConformalChart> {
        let model = self.model()?;
        let hi = match self.boundary {
            CigarBoundary::Exact => model.ell_edge(),
            CigarBoundary::Frozen => model.ell_edge() + self.cutoff_width + self.flat_extension,
        };
        let n = ((hi - self.ell_min) * self.cells_per_unit as f64).round() as usize + 1;
        ConformalChart::cylindrical([self.ell_min, hi], n.max(crate::chart::MIN_NODES), self.n_theta)
    }

    pub fn initial_state(&self) -> Result<FlowState> {
        let model = self.model()?;
        let chart = self.chart()?;
        let tip = BoundaryKind::DirichletExact { reference: ExactReference::Cigar(model) };
        match self.boundary {
            CigarBoundary::Exact => {
                let r = ExactReference::Cigar(model);
                FlowState::new(0.0, r.field(chart, 0.0)?, BoundaryCondition::exact(r))
            }
            CigarBoundary::Frozen => {
                let lambda = self.lambda(&model);
                let cut = self.cutoff_width;
                let u = ScalarField::from_fn(chart, |x, _| collar_profile(&model, lambda, cut, x))?;
                FlowState::new(0.0, u, BoundaryCondition::split_x(tip, BoundaryKind::DirichletFrozen))
            }
        }
    }

    /// `step` with an automatic implicit step resolved to `0.5 h² α²`.
    pub fn step_control(&self, step: Option<&StepControl>) -> Result<StepControl> {
        let h = self.chart()?.h_min();
        let mut ctl = step.copied().unwrap_or(StepControl::implicit(0.5 * h * h * self.alpha * self.alpha));
        if ctl.scheme == Scheme::ImplicitEuler && ctl.dt == Dt::Auto {
            ctl.dt = Dt::Fixed(0.5 * h * h * self.alpha * self.alpha);
        }
        Ok(ctl)
    }
}

/// Cylindrical profile of a cigar blended into the flat plane `ℓ − ln λ`:
/// the cigar up to its truncation circle `ℓ_V`, the plane beyond
/// `ℓ_V + width`, and a quintic blend of the conformal factor in between.
pub fn collar_profile(model: &CigarModel, lambda: f64, width: f64, ell: f64) -> f64 {
    let f = quintic((ell - model.ell_edge()) / width);
    (1.0 - f) * model.u_cyl(0.0, ell) + f * (ell - lambda.ln())
}

/// Flow a truncated cigar to its horizon and attach every diagnostic.
pub fn run_truncated_cigar(s: &CigarScenario, step: Option<&StepControl>, seed: u64) -> Result<ScenarioResult> {
    s.validate()?;
    let model = s.model()?;
    let ctl = s.step_control(step)?;
    let state = s.initial_state()?;
    let chart = *state.chart();
    let cadence = s.cadence.unwrap_or(s.horizon / 10.0);

    let mut log = RunLog::new();
    let mut hist = History::default();
    flow::run(state, &ctl, &RunOptions::until(s.horizon).every(cadence), &mut [&mut log, &mut hist])?.into_result()?;
    let history = hist.states;

    let mut res = ScenarioResult::new("truncated_cigar", seed);
    res.log = log;
    res.snapshots = history.iter().map(|st| (st.t(), st.u().clone())).collect();

    let chen: Vec<_> =
        history.iter().filter(|st| st.t() > 0.0).map(|st| chen_bound(st, chen_tolerance(st))).collect::<Result<_>>()?;
    res.push_worst("chen", chen);

    let p = node_at_distance(&chart, &model, patch_radius(&model));
    let bol: Vec<_> = history
        .iter()
        .map(|st| {
            let dom = geodesic_ball(st.u(), p, s.alpha)?;
            Ok(bol_residual(st.u(), &dom)?.at_time(st.t()))
        })
        .collect::<Result<_>>()?;
    res.push_worst("bol", bol);

    let cfg = BarrierConfig::new(s.beta, s.horizon, model)?;
    let sandwich: Vec<_> = history.iter().map(|st| Ok(barrier_sandwich(st, &cfg)?.soft())).collect::<Result<_>>()?;
    res.push_worst("barrier_sandwich", sandwich);
    let bstar = beta_star(&history, &cfg, s.beta_resolution, s.beta_max)?;
    res.measure("beta_star", bstar);
    res.measure("beta", s.beta);

    let pers = curvature_persistence(&history, &model, s.beta, s.eps_target)?;
    res.measure("eps_hat", pers.series.iter().map(|q| [q.t, q.eps_hat]).collect::<Vec<_>>());
    res.measure("eps_hat_min", pers.report.value);
    res.measure("bol_chain_bound", pers.bol_chain_bound);
    res.measure("persistence", &pers.series);
    res.series.insert(
        "curvature_persistence".into(),
        pers.series
            .iter()
            .map(|q| super::SeriesPoint {
                t: q.t,
                value: q.eps_hat,
                bound: s.eps_target,
                margin: q.eps_hat - s.eps_target,
                tolerance: 0.0,
            })
            .collect(),
    );
    res.reports.push(pers.report);

    let pre = diagnostics::pseudolocality_precheck(&history, p, &cfg)?;
    res.measure("tau", pre.value);
    res.reports.push(pre);
    let post = diagnostics::pseudolocality_conclusion(&history, p, cfg.r0)?;
    res.measure("c_hat", post.value);
    res.measure("r0", cfg.r0);
    res.reports.push(post);

    res.measure("alpha", s.alpha);
    res.measure("length", s.length);
    res.measure("horizon", s.horizon);
    res.measure("boundary", s.boundary);
    res.measure("grid", [chart.nx(), chart.ny()]);
    res.measure("dt", ctl.resolve_dt(&history[0]));
    Ok(res)
}
