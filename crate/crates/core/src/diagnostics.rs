//! Margin reports for the curvature and isoperimetric inequalities, the
//! cigar barrier sandwich, pseudolocality and curvature persistence.
//!
//! Every check reduces to a signed margin (`≥ 0` means the inequality holds)
//! and a tolerance; a report passes when `margin ≥ −tolerance`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartKind, ConformalChart};
use crate::error::{Error, Result};
use crate::exact::{log_sinh, CigarModel};
use crate::field::ScalarField;
use crate::flow::FlowState;
use crate::geometry::{self, geodesic_ball, DistanceField, Domain, Stencil};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub name: String,
    pub t: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Chart coordinate of the worst case, when the check is pointwise.
    pub worst_node: Option<[f64; 2]>,
    /// Measured quantity (for plotting against `bound`).
    pub value: Option<f64>,
    pub bound: Option<f64>,
    /// Hard checks fail a run; soft checks only report.
    pub hard: bool,
    #[serde(default)]
    pub detail: String,
}

impl DiagnosticReport {
    pub fn new(name: &str, t: f64, margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            t,
            margin,
            tolerance,
            pass: margin >= -tolerance,
            worst_node: None,
            value: None,
            bound: None,
            hard: true,
            detail: String::new(),
        }
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_worst(mut self, node: [f64; 2]) -> Self {
        self.worst_node = Some(node);
        self
    }

    pub fn with_value(mut self, value: f64, bound: f64) -> Self {
        self.value = Some(value);
        self.bound = Some(bound);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

fn interior_nodes(c: &ConformalChart) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..c.len()).map(|k| c.node(k)).filter(|&(i, j)| c.is_interior(i, j, 1))
}

/// Discretisation allowance for the curvature lower bound: `1% · 1/(2t)`
/// plus `h² max|K|` over interior nodes.
pub fn chen_tolerance(state: &FlowState) -> f64 {
    let k = geometry::gauss_curvature(state.u());
    let c = state.chart();
    let kmax = interior_nodes(c).map(|(i, j)| k.at(i, j).abs()).fold(0.0, f64::max);
    let h = c.h_min();
    1e-2 / (2.0 * state.t()) + h * h * kmax
}

/// `K ≥ −1/(2t)`: margin `min (K + 1/(2t))` over interior nodes.
pub fn chen_bound(state: &FlowState, tol: f64) -> Result<DiagnosticReport> {
    let t = state.t();
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("the curvature lower bound needs t > 0".into()));
    }
    let c = state.chart();
    let k = geometry::gauss_curvature(state.u());
    let (mut min_k, mut worst) = (f64::INFINITY, (0, 0));
    for (i, j) in interior_nodes(c) {
        if k.at(i, j) < min_k {
            min_k = k.at(i, j);
            worst = (i, j);
        }
    }
    let bound = -1.0 / (2.0 * t);
    Ok(DiagnosticReport::new("chen", t, min_k - bound, tol)
        .with_worst(c.coord(worst.0, worst.1))
        .with_value(min_k, bound))
}

/// `L² ≥ 4πA − A² sup K` on a simply connected domain.
pub fn bol_residual(u: &ScalarField, dom: &Domain) -> Result<DiagnosticReport> {
    if !dom.is_simply_connected() {
        return Err(Error::InvalidDomain("isoperimetric check needs a simply connected domain".into()));
    }
    if dom.is_truncated() {
        return Err(Error::InvalidDomain("domain reaches the chart edge".into()));
    }
    let a = geometry::area(u, dom);
    let l = geometry::boundary_length(u, dom);
    let k = geometry::gauss_curvature(u);
    let sup_k = dom
        .dilated_mask()
        .iter()
        .zip(k.values())
        .filter(|(m, _)| **m)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = l * l - 4.0 * PI * a + a * a * sup_k;
    Ok(DiagnosticReport::new("bol", 0.0, margin, 0.03 * l * l)
        .with_value(l * l, 4.0 * PI * a - a * a * sup_k)
        .with_detail(format!("area={a:.6e} length={l:.6e} sup_K={sup_k:.6e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierConfig {
    /// Barrier scale `β > 1`.
    pub beta: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// The contained cigar; the barriers live on the ball of half its length.
    pub patch: CigarModel,
    /// Pseudolocality radius.
    pub r0: f64,
    /// Non-collapsing constant in `(0, π]`.
    pub v0: f64,
    #[serde(default)]
    pub tolerance: f64,
}

impl BarrierConfig {
    pub fn new(beta: f64, horizon: f64, patch: CigarModel) -> Result<Self> {
        let r0 = patch_radius(&patch) / 8.0;
        let cfg = Self { beta, horizon, patch, r0, v0: 0.75 * PI, tolerance: 0.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) {
            return Err(Error::InvalidArgument(format!("barrier scale must exceed 1, got {}", self.beta)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::InvalidArgument("r0 must be positive".into()));
        }
        if !(self.v0 > 0.0 && self.v0 <= PI) {
            return Err(Error::InvalidArgument(format!("v0 must lie in (0, π], got {}", self.v0)));
        }
        Ok(())
    }
}

/// Radius of the ball around the tip on which the barriers are compared:
/// half the length of the contained cigar.
pub fn patch_radius(patch: &CigarModel) -> f64 {
    0.5 * patch.length
}

/// Nodes of the initial-metric ball of radius `r` around the cigar tip.
pub fn patch_mask(chart: &ConformalChart, patch: &CigarModel, r: f64) -> Vec<bool> {
    let edge = patch.ell_at_distance(r);
    (0..chart.len())
        .map(|k| {
            let (i, j) = chart.node(k);
            let [x, y] = chart.coord(i, j);
            match chart.kind() {
                ChartKind::Cylindrical => x <= edge,
                _ => {
                    let rho2 = (x - patch.tip[0]).powi(2) + (y - patch.tip[1]).powi(2);
                    0.5 * rho2.ln() <= edge
                }
            }
        })
        .collect()
}

fn barrier_u(patch: &CigarModel, chart: &ConformalChart, i: usize, j: usize, t: f64) -> f64 {
    let [x, y] = chart.coord(i, j);
    match chart.kind() {
        ChartKind::Cylindrical => patch.u_cyl(t, x),
        _ => patch.u(t, [x, y]),
    }
}

/// `g₋ ≤ g ≤ g₊` on the patch, with
/// `u₋ = u_Σ(β²t) − ln β` and `u₊ = u_Σ(β⁻²(t − T)) + ln β` at the patch scale.
pub fn barrier_sandwich(state: &FlowState, cfg: &BarrierConfig) -> Result<DiagnosticReport> {
    cfg.validate()?;
    let c = state.chart();
    let mask = patch_mask(c, &cfg.patch, patch_radius(&cfg.patch));
    if !mask.iter().any(|&m| m) {
        return Err(Error::InvalidDomain("chart does not meet the barrier patch".into()));
    }
    let (t, b2, lb) = (state.t(), cfg.beta * cfg.beta, cfg.beta.ln());
    let mut margin = f64::INFINITY;
    let mut worst = [0.0; 2];
    let mut side = "";
    for (k, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let (i, j) = c.node(k);
        let u = state.u().values()[k];
        let lower = u - (barrier_u(&cfg.patch, c, i, j, b2 * t) - lb);
        let upper = barrier_u(&cfg.patch, c, i, j, (t - cfg.horizon) / b2) + lb - u;
        for (gap, name) in [(lower, "lower"), (upper, "upper")] {
            if gap < margin {
                margin = gap;
                worst = c.coord(i, j);
                side = name;
            }
        }
    }
    Ok(DiagnosticReport::new("barrier_sandwich", t, margin, cfg.tolerance)
        .with_worst(worst)
        .with_value(margin, 0.0)
        .with_detail(format!("beta={} tightest={side}", cfg.beta)))
}

/// Smallest `β` for which the sandwich holds at every stored state, to
/// within `resolution`. Passing is not monotone in `β` (the upper barrier
/// both rises with `ln β` and starts later), so a uniform scan locates the
/// first passing value and bisection refines it against the last failure.
pub fn beta_star(history: &[FlowState], cfg: &BarrierConfig, resolution: f64, beta_max: f64) -> Result<Option<f64>> {
    let passes = |beta: f64| -> Result<bool> {
        let c = BarrierConfig { beta, ..*cfg };
        for s in history {
            if !barrier_sandwich(s, &c)?.pass {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let steps = ((beta_max - 1.0) / resolution).ceil() as usize;
    let mut prev_fail = 1.0;
    for k in 1..=steps {
        let beta = 1.0 + k as f64 * resolution;
        if passes(beta)? {
            let (mut lo, mut hi) = (prev_fail, beta);
            while hi - lo > 1e-3 * resolution {
                let mid = 0.5 * (lo + hi);
                if mid > 1.0 && passes(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        prev_fail = beta;
    }
    Ok(None)
}

fn edge_distance(d: &DistanceField) -> f64 {
    let c = d.chart();
    (0..c.len())
        .filter(|&k| {
            let (i, j) = c.node(k);
            c.is_edge(i, j)
        })
        .map(|k| d.values()[k])
        .fold(f64::INFINITY, f64::min)
}

/// Conditions of the pseudolocality theorem at `p`:
/// (i) the ball `B_{g(t)}(p; r₀)` stays clear of the chart edge at every
/// stored time, (ii) `|K| ≤ r₀⁻²` on the initial ball, (iii) the initial
/// ball has area `≥ v₀ r₀²`. The margin is the smallest of the three
/// normalised slacks; `value` holds the first stored time at which (i)
/// fails (or the last stored time).
pub fn pseudolocality_precheck(
    history: &[FlowState],
    p: (usize, usize),
    cfg: &BarrierConfig,
) -> Result<DiagnosticReport> {
    let first = history.first().ok_or_else(|| Error::InvalidArgument("empty history".into()))?;
    let r0 = cfg.r0;
    let mut slack_i = f64::INFINITY;
    let mut tau = history.last().map(|s| s.t()).unwrap_or(0.0);
    let mut exited = false;
    for s in history {
        let d = DistanceField::from_node(s.u(), p, Stencil::default());
        let sl = (edge_distance(&d) - r0) / r0;
        if sl < 0.0 && !exited {
            exited = true;
            tau = s.t();
        }
        slack_i = slack_i.min(sl);
    }
    let u0 = first.u();
    let ball = geodesic_ball(u0, p, r0)?;
    let k0 = geometry::gauss_curvature(u0);
    let kmax = ball.mask().iter().zip(k0.values()).filter(|(m, _)| **m).map(|(_, &v)| v.abs()).fold(0.0, f64::max);
    let slack_ii = 1.0 - r0 * r0 * kmax;
    let vol = geometry::area(u0, &ball);
    let slack_iii = vol / (cfg.v0 * r0 * r0) - 1.0;
    let margin = slack_i.min(slack_ii).min(slack_iii);
    Ok(DiagnosticReport::new("pseudolocality_precheck", first.t(), margin, 0.0)
        .with_worst(first.chart().coord(p.0, p.1))
        .with_value(tau, history.last().map(|s| s.t()).unwrap_or(0.0))
        .with_detail(format!(
            "r0={r0} slack_inside={slack_i:.4e} slack_curvature={slack_ii:.4e} slack_volume={slack_iii:.4e} tau={tau}"
        ))
        .soft())
}

/// `|K| ≤ 2r₀⁻²` on `B_{g(t)}(p; r₀/2)` over the history. `value` is the
/// measured constant `Ĉ = r₀² / t_window`, where `t_window` is the last
/// stored time before the first failure.
pub fn pseudolocality_conclusion(history: &[FlowState], p: (usize, usize), r0: f64) -> Result<DiagnosticReport> {
    let first = history.first().ok_or_else(|| Error::InvalidArgument("empty history".into()))?;
    let bound = 2.0 / (r0 * r0);
    let mut margin = f64::INFINITY;
    let mut worst_t = first.t();
    let mut first_failure = None;
    let mut window = first.t();
    for s in history {
        let ball = geodesic_ball(s.u(), p, 0.5 * r0)?;
        let k = geometry::gauss_curvature(s.u());
        let kmax = ball.mask().iter().zip(k.values()).filter(|(m, _)| **m).map(|(_, &v)| v.abs()).fold(0.0, f64::max);
        let m = bound - kmax;
        if m < margin {
            margin = m;
            worst_t = s.t();
        }
        if m < 0.0 && first_failure.is_none() {
            first_failure = Some(s.t());
        }
        if first_failure.is_none() {
            window = s.t();
        }
    }
    let c_hat = if window > 0.0 { r0 * r0 / window } else { f64::INFINITY };
    let failure = first_failure.map_or("none".to_string(), |t| t.to_string());
    Ok(DiagnosticReport::new("pseudolocality_conclusion", worst_t, margin, 0.0)
        .with_worst(first.chart().coord(p.0, p.1))
        .with_value(c_hat, r0 * r0)
        .with_detail(format!("r0={r0} first_failure={failure} window={window}"))
        .soft())
}

/// Persistence measurements at one stored time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePoint {
    pub t: f64,
    /// `α² max K` over the patch.
    pub eps_hat: f64,
    /// Chart coordinate of the curvature maximum.
    pub argmax: [f64; 2],
    /// Largest initial-metric radius about the tip whose ball has area `≤ 2πβ²α²`.
    pub rho: Option<f64>,
    pub ball_area: Option<f64>,
    pub ball_boundary: Option<f64>,
    /// `4π/A − L²/A²` for that ball, scaled by `α²`.
    pub bol_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub report: DiagnosticReport,
    pub series: Vec<PersistencePoint>,
    /// `β⁻²`, the lower bound obtained from the isoperimetric chain with a
    /// ball of area `2πβ²` and boundary `2πβ`.
    pub bol_chain_bound: f64,
}

/// `sup K ≥ ε α⁻²`: records `ε̂(t) = α² max_patch K` and the objects of the
/// area/isoperimetric argument. Margin is `min_t ε̂ − eps_target`.
pub fn curvature_persistence(
    history: &[FlowState],
    patch: &CigarModel,
    beta: f64,
    eps_target: f64,
) -> Result<PersistenceReport> {
    if history.is_empty() {
        return Err(Error::InvalidArgument("empty history".into()));
    }
    let a2 = patch.alpha * patch.alpha;
    let mut series = Vec::with_capacity(history.len());
    for s in history {
        let c = s.chart();
        let mask = patch_mask(c, patch, patch_radius(patch));
        let k = geometry::gauss_curvature(s.u());
        let (mut kmax, mut arg) = (f64::NEG_INFINITY, [0.0; 2]);
        for (idx, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
            let (i, j) = c.node(idx);
            if c.is_interior(i, j, 1) && k.values()[idx] > kmax {
                kmax = k.values()[idx];
                arg = c.coord(i, j);
            }
        }
        let mut point = PersistencePoint {
            t: s.t(),
            eps_hat: a2 * kmax,
            argmax: arg,
            rho: None,
            ball_area: None,
            ball_boundary: None,
            bol_lower: None,
        };
        if c.kind() == ChartKind::Cylindrical {
            if let Some((rho, area, len)) = area_radius(s, patch, TAU * beta * beta * a2)? {
                point.rho = Some(rho);
                point.ball_area = Some(area);
                point.ball_boundary = Some(len);
                point.bol_lower = Some(a2 * (4.0 * PI / area - len * len / (area * area)));
            }
        }
        series.push(point);
    }
    let (worst, min_eps) =
        series.iter().map(|p| (p.t, p.eps_hat)).fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let report = DiagnosticReport::new("curvature_persistence", worst, min_eps - eps_target, 0.0)
        .with_value(min_eps, eps_target)
        .with_detail(format!("alpha={} beta={beta}", patch.alpha))
        .soft();
    Ok(PersistenceReport { report, series, bol_chain_bound: 1.0 / (beta * beta) })
}

/// Area at the state's time of `{ℓ ≤ ell}`, the chart part plus the
/// closed-form stub below the chart.
fn sublevel(state: &FlowState, patch: &CigarModel, ell: f64) -> Result<(f64, f64)> {
    let c = state.chart();
    let dom = Domain::from_fn(*c, |x, _| x - ell)?;
    let stub = patch.sublevel_area(state.t(), c.bounds()[0]);
    Ok((geometry::area(state.u(), &dom) + stub, geometry::boundary_length(state.u(), &dom)))
}

/// `ρ = max{r : Vol B_r ≤ target}` for initial-metric balls about the tip
/// of a cylindrical chart, with the area and boundary length of `B_ρ`.
fn area_radius(state: &FlowState, patch: &CigarModel, target: f64) -> Result<Option<(f64, f64, f64)>> {
    let c = state.chart();
    let h = c.hx();
    let (mut lo, mut hi) = (c.bounds()[0] + h, c.bounds()[1] - h);
    if sublevel(state, patch, lo)?.0 > target || sublevel(state, patch, hi)?.0 < target {
        return Ok(None);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sublevel(state, patch, mid)?.0 <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (area, len) = sublevel(state, patch, lo)?;
    Ok(Some((patch.dist_to_circle(0.0, lo), area, len)))
}

/// Seeded random simply connected, untruncated domains: geodesic balls
/// about random nodes and star-shaped regions with a few Fourier modes.
pub fn sample_domains(u: &ScalarField, count: usize, seed: u64) -> Result<Vec<Domain>> {
    let c = *u.chart();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [x0, x1, y0, y1] = c.bounds();
    let (w, h) = (x1 - x0, y1 - y0);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 50 * count + 100 {
            return Err(Error::InvalidDomain(format!("could only place {} of {count} random domains", out.len())));
        }
        let cx = x0 + w * rng.random_range(0.2..0.8);
        let cy = y0 + h * rng.random_range(0.2..0.8);
        let dom = if rng.random_bool(0.5) {
            let node = c.nearest_node([cx, cy]);
            let d = DistanceField::from_node(u, node, Stencil::default());
            let reach = edge_distance(&d);
            let r = reach * rng.random_range(0.2..0.8);
            if !(r > 0.0) {
                continue;
            }
            geodesic_ball(u, node, r)
        } else {
            let r0 = 0.5 * w.min(h) * rng.random_range(0.1..0.3);
            let modes: Vec<(f64, f64)> =
                (2..=4).map(|_| (rng.random_range(-0.15..0.15), rng.random_range(0.0..TAU))).collect();
            Domain::from_fn(c, |x, y| {
                let (dx, dy) = (x - cx, y - cy);
                let th = dy.atan2(dx);
                let rad = r0
                    * (1.0
                        + modes
                            .iter()
                            .enumerate()
                            .map(|(m, (a, ph))| a * ((m as f64 + 2.0) * th + ph).cos())
                            .sum::<f64>());
                dx.hypot(dy) - rad
            })
        };
        let Ok(dom) = dom else { continue };
        if dom.is_simply_connected() && !dom.is_truncated() && dom.node_count() >= 9 {
            out.push(dom);
        }
    }
    Ok(out)
}

/// Nearest node to the point at distance `r` from the tip, at angle `θ = 0`
/// (cylindrical) or on the positive real axis (planar).
pub fn node_at_distance(chart: &ConformalChart, patch: &CigarModel, r: f64) -> (usize, usize) {
    let ell = log_sinh(r / patch.alpha);
    match chart.kind() {
        ChartKind::Cylindrical => chart.nearest_node([ell, chart.bounds()[2]]),
        _ => chart.nearest_node([patch.tip[0] + ell.exp(), patch.tip[1]]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{round_sphere_u, CigarModel};
    use crate::flow::{BoundaryCondition, ExactReference};

    fn cigar_state(t: f64, n: usize) -> FlowState {
        let c = ConformalChart::cylindrical([-4.0, 8.0], n, 32).unwrap();
        let r = ExactReference::Cigar(CigarModel::unit(20.0));
        FlowState::new(t, r.field(c, t).unwrap(), BoundaryCondition::exact(r)).unwrap()
    }

    #[test]
    fn chen_on_exact_cigar() {
        let s = cigar_state(0.5, 97);
        let r = chen_bound(&s, 0.0).unwrap();
        assert!(r.pass);
        assert!(r.margin >= 1.0 - 1e-9);
        assert!(chen_bound(&cigar_state(0.0, 49), 0.0).is_err());
    }

    #[test]
    fn chen_on_shrinking_sphere() {
        let c = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], 81, 81).unwrap();
        let t = 0.25;
        let u = ScalarField::from_fn(c, |x, y| round_sphere_u(1.0, t, [x, y])).unwrap();
        let s = FlowState::new(t, u, BoundaryCondition::frozen()).unwrap();
        let r = chen_bound(&s, 1e-2).unwrap();
        assert!((r.margin - 4.0).abs() < 1e-2, "{}", r.margin);
    }

    #[test]
    fn chen_fails_on_negative_curvature() {
        let c = ConformalChart::planar([-1.0, 1.0], [-1.0, 1.0], 41, 41).unwrap();
        // K = -e^{-2u} Δu with u = x²: K = -2e^{-2x²} < -1 near 0
        let u = ScalarField::from_fn(c, |x, _| 2.0 * x * x).unwrap();
        let s = FlowState::new(1.0, u, BoundaryCondition::frozen()).unwrap();
        assert!(!chen_bound(&s, 0.0).unwrap().pass);
    }

    #[test]
    fn bol_flat_disc_equality() {
        let c = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], 161, 161).unwrap();
        let u = ScalarField::constant(c, 0.0).unwrap();
        let d = Domain::from_fn(c, |x, y| x.hypot(y) - 1.0).unwrap();
        let r = bol_residual(&u, &d).unwrap();
        let l2 = 4.0 * PI * PI;
        assert!(r.margin.abs() <= 0.03 * l2, "{}", r.margin);
    }

    #[test]
    fn bol_hemisphere_equality() {
        let c = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], 161, 161).unwrap();
        let u = ScalarField::from_fn(c, |x, y| round_sphere_u(1.0, 0.0, [x, y])).unwrap();
        let d = Domain::from_fn(c, |x, y| x.hypot(y) - 1.0).unwrap();
        let r = bol_residual(&u, &d).unwrap();
        assert!(r.margin.abs() <= 0.03 * 4.0 * PI * PI, "{}", r.margin);
    }

    #[test]
    fn bol_rejects_annulus() {
        let c = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], 41, 41).unwrap();
        let u = ScalarField::constant(c, 0.0).unwrap();
        let d = Domain::from_fn(c, |x, y| (x.hypot(y) - 1.0).abs() - 0.3).unwrap();
        assert!(matches!(bol_residual(&u, &d), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn bol_cigar_ball_has_slack() {
        let c = ConformalChart::planar([-5.0, 5.0], [-5.0, 5.0], 161, 161).unwrap();
        let m = CigarModel::unit(4.0);
        let u = ScalarField::from_fn(c, |x, y| m.u(0.0, [x, y])).unwrap();
        let d = geodesic_ball(&u, c.tip_node().unwrap(), 2.0).unwrap();
        let r = bol_residual(&u, &d).unwrap();
        assert!(r.margin > 0.0, "{}", r.margin);
    }

    #[test]
    fn sandwich_on_exact_cigar() {
        let m = CigarModel::unit(40.0);
        let c = ConformalChart::cylindrical([-4.0, 20.5], 99, 16).unwrap();
        let r = ExactReference::Cigar(m);
        for t in [0.0, 0.5, 1.0] {
            let s = FlowState::new(t, r.field(c, t).unwrap(), BoundaryCondition::exact(r)).unwrap();
            let cfg = BarrierConfig::new(1.1, 1.0, m).unwrap();
            let rep = barrier_sandwich(&s, &cfg).unwrap();
            assert!(rep.pass && rep.margin >= 1.1f64.ln() - 1e-12);
        }
        assert!(BarrierConfig::new(1.0, 1.0, m).is_err());
    }

    #[test]
    fn sandwich_fails_on_perturbed_field() {
        let m = CigarModel::unit(40.0);
        let c = ConformalChart::cylindrical([-4.0, 20.5], 99, 16).unwrap();
        let u =
            ScalarField::from_fn(c, |x, _| m.u_cyl(0.5, x) - if (8.0..10.0).contains(&x) { 0.2 } else { 0.0 }).unwrap();
        let s = FlowState::new(0.5, u, BoundaryCondition::frozen()).unwrap();
        let cfg = BarrierConfig::new(1.1, 1.0, m).unwrap();
        assert!(!barrier_sandwich(&s, &cfg).unwrap().pass);
        let star = beta_star(&[s], &cfg, 0.01, 3.0).unwrap().unwrap();
        assert!((star - 0.2f64.exp()).abs() < 1e-3, "{star}");
    }

    #[test]
    fn precheck_on_flat_chart() {
        let c = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], 81, 81).unwrap();
        let u = ScalarField::constant(c, 0.0).unwrap();
        let s = FlowState::new(0.0, u, BoundaryCondition::frozen()).unwrap();
        let mut cfg = BarrierConfig::new(1.1, 1.0, CigarModel::unit(8.0)).unwrap();
        cfg.r0 = 1.0;
        cfg.v0 = PI * 0.9;
        let p = c.nearest_node([0.3, -0.2]);
        let rep = pseudolocality_precheck(&[s.clone()], p, &cfg).unwrap();
        assert!(rep.pass, "{}", rep.detail);
        cfg.r0 = 3.0;
        assert!(!pseudolocality_precheck(&[s], p, &cfg).unwrap().pass);
    }

    #[test]
    fn conclusion_on_flat_chart() {
        let c = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], 41, 41).unwrap();
        let u = ScalarField::constant(c, 0.0).unwrap();
        let s = FlowState::new(0.0, u, BoundaryCondition::frozen()).unwrap();
        let rep = pseudolocality_conclusion(&[s], (20, 20), 1.0).unwrap();
        assert!((rep.margin - 2.0).abs() < 1e-12);
    }

    #[test]
    fn persistence_on_exact_cigar() {
        let m = CigarModel::unit(20.0);
        let hist: Vec<FlowState> = [0.0, 0.5, 1.0].iter().map(|&t| cigar_state(t, 193)).collect();
        let rep = curvature_persistence(&hist, &m, 2.0, 0.0).unwrap();
        assert!((rep.bol_chain_bound - 0.25).abs() < 1e-15);
        for p in &rep.series {
            // the curvature maximum sits on the first interior node above the tip edge
            assert!((p.eps_hat - m.curvature_cyl(p.t, -4.0 + 12.0 / 192.0)).abs() < 1e-2, "{}", p.eps_hat);
            let area = p.ball_area.unwrap();
            assert!((area - TAU * 4.0).abs() < 1e-6 * area);
            assert!(p.bol_lower.unwrap() > 0.0);
        }
    }

    #[test]
    fn random_domains_are_valid_and_seeded() {
        let c = ConformalChart::planar([-3.0, 3.0], [-3.0, 3.0], 61, 61).unwrap();
        let m = CigarModel::unit(4.0);
        let u = ScalarField::from_fn(c, |x, y| m.u(0.0, [x, y])).unwrap();
        let a = sample_domains(&u, 10, 7).unwrap();
        let b = sample_domains(&u, 10, 7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mask(), y.mask());
            assert!(x.is_simply_connected() && !x.is_truncated());
        }
    }
}
