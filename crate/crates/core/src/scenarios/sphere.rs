//! Round and capped spheres flowed to extinction with the radial solver.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ScenarioResult;
use crate::chart::ConformalChart;
use crate::diagnostics::{bol_residual, DiagnosticReport};
use crate::error::{Error, Result};
use crate::exact::SphereModel;
use crate::field::ScalarField;
use crate::flow::radial::{area_slope, SPHERE_AREA_RATE};
use crate::flow::{LogRow, RadialFlow, RadialSample, RunLog, RunStatus, StepControl};
use crate::geometry::{self, geodesic_ball};

pub(super) const CHECKS: &[&str] = &["chen", "bol", "lifespan", "area_rate", "chart_consistency", "sucked_out_disc"];

/// Thresholds for the collapse of the unit ball about a mid-cylinder point.
pub const DISC_AREA_THRESHOLD: f64 = 0.05;
pub const DISC_SUP_U_THRESHOLD: f64 = -3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereScenario {
    #[serde(default = "one")]
    pub radius: f64,
    /// Radial intervals between pole and equator.
    #[serde(default = "default_n1")]
    pub n1: usize,
    /// Observation spacing; a hundredth of the predicted lifespan when absent.
    #[serde(default)]
    pub cadence: Option<f64>,
    /// Fraction of the predicted lifespan after which observations are
    /// a hundred times denser.
    #[serde(default = "default_fine")]
    pub fine_after: f64,
    #[serde(default = "default_extinction")]
    pub extinction_threshold: f64,
    /// Give up at this multiple of the predicted lifespan.
    #[serde(default = "default_t_max")]
    pub t_max_factor: f64,
    /// Radius of the tracked ball about the mid-cylinder point.
    #[serde(default = "one")]
    pub disc_radius: f64,
    /// Grid nodes per unit length of the view chart, in flat cylinder units.
    #[serde(default = "default_view_density")]
    pub view_density: usize,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn one() -> f64 {
    1.0
}
fn default_n1() -> usize {
    100
}
fn default_fine() -> f64 {
    0.95
}
fn default_extinction() -> f64 {
    1e-8
}
fn default_t_max() -> f64 {
    3.0
}
fn default_view_density() -> usize {
    16
}
fn default_snapshots() -> usize {
    10
}

impl Default for SphereScenario {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl SphereScenario {
    pub fn model(&self, capped: bool) -> Result<SphereModel> {
        if capped {
            SphereModel::capped(self.radius)
        } else {
            SphereModel::round(self.radius)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scenario: {m}")));
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius must be positive");
        }
        if self.n1 < 8 || self.n1 % 2 != 0 {
            return bad("n1 must be even and at least 8");
        }
        if self.cadence.is_some_and(|c| !(c > 0.0)) || !(self.fine_after > 0.0 && self.fine_after < 1.0) {
            return bad("cadence must be positive and fine_after in (0, 1)");
        }
        if !(self.extinction_threshold > 0.0 && self.t_max_factor > 1.0) {
            return bad("extinction_threshold must be positive and t_max_factor above 1");
        }
        if !(self.disc_radius > 0.0) || self.view_density < 2 || self.snapshots == 0 {
            return bad("disc_radius, view_density and snapshots must be positive");
        }
        Ok(())
    }

    /// Cylindrical chart around the equator on which the profile is viewed:
    /// it holds the tracked ball with a margin of one unit of `ℓ`.
    fn view_chart(&self) -> Result<ConformalChart> {
        let half = self.disc_radius / self.radius + 1.0;
        let per_ell = self.view_density as f64 * self.radius;
        let n_ell = (2.0 * half * per_ell).round() as usize + 1;
        let n_theta = ((2.0 * PI * per_ell).round() as usize).max(crate::chart::MIN_NODES);
        ConformalChart::cylindrical([-half, half], n_ell, n_theta)
    }
}

fn view_field(chart: ConformalChart, flow: &RadialFlow) -> Result<ScalarField> {
    ScalarField::from_fn(chart, |x, _| flow.profile(x))
}

struct Record {
    sample: RadialSample,
    disc_area: f64,
    disc_sup_u: f64,
    snapshot: Option<ScalarField>,
}

/// Flow a round (`capped = false`) or capped sphere to its extinction proxy.
pub fn run_sphere(s: &SphereScenario, capped: bool, step: Option<&StepControl>, seed: u64) -> Result<ScenarioResult> {
    s.validate()?;
    let model = s.model(capped)?;
    let flow = RadialFlow::new(&model, s.n1)?;
    let ctl = step.copied().unwrap_or_else(StepControl::explicit);
    let t_pred = model.lifespan();
    let cadence = s.cadence.unwrap_or(t_pred / 100.0);
    let t_fine = s.fine_after * t_pred;

    let chart = s.view_chart()?;
    let v0 = view_field(chart, &flow)?;
    let center = chart.nearest_node([0.0, PI]);
    let disc = geodesic_ball(&v0, center, s.disc_radius)?;
    let mask: Vec<usize> = (0..chart.len()).filter(|&k| disc.mask()[k]).collect();
    let ln_r = s.radius.ln();
    let snap_every = (t_pred / s.snapshots as f64).max(cadence);

    let mut records: Vec<Record> = Vec::new();
    let mut next_snap = 0.0;
    let mut observe = |obs: &crate::flow::RadialObservation<'_>| -> Result<()> {
        let v = view_field(chart, obs.flow)?;
        let sample = obs.sample();
        let disc_area = geometry::area(&v, &disc);
        let disc_sup_u = mask.iter().map(|&k| v.values()[k] - ln_r).fold(f64::NEG_INFINITY, f64::max);
        let snapshot = if sample.t >= next_snap - 1e-9 * snap_every {
            next_snap += snap_every;
            Some(v)
        } else {
            None
        };
        records.push(Record { sample, disc_area, disc_sup_u, snapshot });
        Ok(())
    };

    let first = flow.run(&ctl, t_fine, cadence, s.extinction_threshold, &mut observe)?;
    let (outcome, steps) = match first.status {
        RunStatus::Completed => {
            let steps = first.steps;
            let mut skip_first = true;
            let second = first.flow.run(
                &ctl,
                s.t_max_factor * t_pred,
                cadence / 100.0,
                s.extinction_threshold,
                |o: &crate::flow::RadialObservation<'_>| {
                    if std::mem::take(&mut skip_first) {
                        return Ok(());
                    }
                    observe(o)
                },
            )?;
            let total = steps + second.steps;
            (second, total)
        }
        _ => {
            let steps = first.steps;
            (first, steps)
        }
    };
    let extinction = match outcome.status {
        RunStatus::Failed(e) => return Err(e),
        RunStatus::Extinct { t } => Some(t),
        RunStatus::Completed => None,
    };

    let name = if capped { "capped_sphere" } else { "round_sphere" };
    let mut res = ScenarioResult::new(name, seed);
    let mut log = RunLog::new();
    for r in &records {
        let q = &r.sample;
        log.push(LogRow {
            step: q.step,
            t: q.t,
            dt: q.dt,
            min_u: q.min_u,
            max_u: q.max_u,
            area: q.area,
            min_k: q.min_k,
            max_k: q.max_k,
        });
    }
    res.log = log;
    let last = records.len() - 1;
    res.snapshots = records
        .iter_mut()
        .enumerate()
        .filter_map(|(k, r)| match r.snapshot.take() {
            Some(f) => Some((r.sample.t, f)),
            None if k == last => Some((r.sample.t, view_field(chart, &outcome.flow).ok()?)),
            None => None,
        })
        .collect();

    let h = 1.0 / s.n1 as f64;
    let chen: Vec<_> = records
        .iter()
        .map(|r| &r.sample)
        .filter(|q| q.t > 0.0)
        .map(|q| {
            let bound = -1.0 / (2.0 * q.t);
            let kabs = q.max_k.abs().max(q.min_k.abs());
            DiagnosticReport::new("chen", q.t, q.min_k - bound, 1e-2 / (2.0 * q.t) + h * h * kabs)
                .with_value(q.min_k, bound)
        })
        .collect();
    res.push_worst("chen", chen);

    let bol: Vec<_> =
        res.snapshots.iter().map(|(t, v)| Ok(bol_residual(v, &disc)?.at_time(*t))).collect::<Result<_>>()?;
    res.push_worst("bol", bol);

    let t_ext = extinction.unwrap_or(f64::NAN);
    let lifespan = match extinction {
        Some(t) => DiagnosticReport::new("lifespan", t, 0.02 * t_pred - (t - t_pred).abs(), 0.0),
        None => DiagnosticReport::new("lifespan", outcome.flow.t(), f64::NEG_INFINITY, 0.0)
            .with_detail("extinction proxy never fired"),
    };
    res.reports.push(lifespan.with_value(t_ext, t_pred).soft());

    let samples: Vec<RadialSample> = records.iter().map(|r| r.sample).collect();
    let end = extinction.unwrap_or(outcome.flow.t());
    let slope = area_slope(&samples, 0.25 * end, 0.75 * end);
    let ratio = slope.map(|m| m / SPHERE_AREA_RATE);
    res.reports.push(
        DiagnosticReport::new("area_rate", 0.5 * end, 0.01 - ratio.map_or(f64::INFINITY, |q| (q - 1.0).abs()), 0.0)
            .with_value(slope.unwrap_or(f64::NAN), SPHERE_AREA_RATE)
            .soft(),
    );

    let mismatch =
        samples.iter().map(|q| (q.t, q.chart_mismatch)).fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    res.reports.push(
        DiagnosticReport::new("chart_consistency", mismatch.0, 1e-3 - mismatch.1, 0.0)
            .with_value(mismatch.1, 1e-3)
            .soft(),
    );

    let disc_margin = |r: &Record| (DISC_AREA_THRESHOLD - r.disc_area).min(DISC_SUP_U_THRESHOLD - r.disc_sup_u);
    let best = records.iter().max_by(|a, b| disc_margin(a).total_cmp(&disc_margin(b))).expect("observed");
    let first_hit = records.iter().find(|r| disc_margin(r) > 0.0);
    let shown = first_hit.unwrap_or(best);
    res.reports.push(
        DiagnosticReport::new("sucked_out_disc", shown.sample.t, disc_margin(shown), 0.0)
            .with_value(shown.disc_area, DISC_AREA_THRESHOLD)
            .with_detail(format!("sup_u={:.6e} threshold={DISC_SUP_U_THRESHOLD}", shown.disc_sup_u))
            .soft(),
    );
    res.series.insert(
        "sucked_out_disc".into(),
        records
            .iter()
            .map(|r| super::SeriesPoint {
                t: r.sample.t,
                value: r.disc_area,
                bound: DISC_AREA_THRESHOLD,
                margin: disc_margin(r),
                tolerance: 0.0,
            })
            .collect(),
    );

    res.measure("radius", s.radius);
    res.measure("predicted_lifespan", t_pred);
    res.measure("extinction_time", extinction);
    res.measure("area_slope", slope);
    res.measure("area_rate_ratio", ratio);
    res.measure("sup_u", samples.iter().map(|q| [q.t, q.max_u]).collect::<Vec<_>>());
    res.measure("chart_mismatch_max", mismatch.1);
    res.measure("disc_initial_area", records[0].disc_area);
    res.measure("disc_first_collapse_time", first_hit.map(|r| r.sample.t));
    res.measure("disc", records.iter().map(|r| [r.sample.t, r.disc_area, r.disc_sup_u]).collect::<Vec<_>>());
    res.measure("steps", steps);
    res.measure("n1", s.n1);
    Ok(res)
}
