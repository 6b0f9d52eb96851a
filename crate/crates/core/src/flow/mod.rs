//! Time integration of `∂u/∂t = e^{−2u} Δu` on a chart.
//!
//! Nodes on non-periodic chart edges are Dirichlet nodes: either resampled
//! from an exact reference solution at every step or held at their initial
//! values. Everything else is advanced by explicit or backward Euler.

mod implicit;
pub mod radial;

use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::chart::{ChartKind, ConformalChart};
use crate::error::{Error, Result};
use crate::exact::{round_sphere_u, CigarModel};
use crate::field::{fmt17, ScalarField};
use crate::geometry::{self, Domain};

pub use radial::{area_slope, RadialFlow, RadialObservation, RadialOutcome, RadialSample};

/// Closed-form solution used to drive Dirichlet-exact edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExactReference {
    /// Scaled cigar; evaluated in cylindrical form on cylindrical charts.
    Cigar(CigarModel),
    /// Shrinking round sphere in the stereographic chart.
    RoundSphere {
        rho: f64,
    },
    Constant {
        value: f64,
    },
}

impl ExactReference {
    pub fn eval(&self, chart: &ConformalChart, i: usize, j: usize, t: f64) -> f64 {
        let [x, y] = chart.coord(i, j);
        let cyl = chart.kind() == ChartKind::Cylindrical;
        match *self {
            ExactReference::Cigar(m) if cyl => m.u_cyl(t, x),
            ExactReference::Cigar(m) => m.u(t, [x, y]),
            ExactReference::RoundSphere { rho } if cyl => round_sphere_u(rho, t, chart.planar_position(i, j)) + x,
            ExactReference::RoundSphere { rho } => round_sphere_u(rho, t, [x, y]),
            ExactReference::Constant { value } => value,
        }
    }

    /// The reference sampled on every node of the chart.
    pub fn field(&self, chart: ConformalChart, t: f64) -> Result<ScalarField> {
        let mut v = Vec::with_capacity(chart.len());
        for j in 0..chart.ny() {
            for i in 0..chart.nx() {
                v.push(self.eval(&chart, i, j, t));
            }
        }
        ScalarField::new(chart, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    DirichletExact {
        reference: ExactReference,
    },
    /// Held at the initial values.
    DirichletFrozen,
    /// Only valid on periodic axes.
    PeriodicOnly,
}

/// Boundary behaviour per chart edge. Edges of periodic axes are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub x_lo: BoundaryKind,
    pub x_hi: BoundaryKind,
    pub y_lo: BoundaryKind,
    pub y_hi: BoundaryKind,
}

impl BoundaryCondition {
    pub fn uniform(kind: BoundaryKind) -> Self {
        Self { x_lo: kind, x_hi: kind, y_lo: kind, y_hi: kind }
    }

    pub fn exact(reference: ExactReference) -> Self {
        Self::uniform(BoundaryKind::DirichletExact { reference })
    }

    pub fn frozen() -> Self {
        Self::uniform(BoundaryKind::DirichletFrozen)
    }

    pub fn periodic_only() -> Self {
        Self::uniform(BoundaryKind::PeriodicOnly)
    }

    /// Different kinds on the two `x` edges (the `ℓ` ends of a cylinder).
    pub fn split_x(lo: BoundaryKind, hi: BoundaryKind) -> Self {
        Self { x_lo: lo, x_hi: hi, y_lo: lo, y_hi: hi }
    }

    pub fn validate(&self, chart: &ConformalChart) -> Result<()> {
        let edges = [
            (self.x_lo, chart.periodic_x(), "x_lo"),
            (self.x_hi, chart.periodic_x(), "x_hi"),
            (self.y_lo, chart.periodic_y(), "y_lo"),
            (self.y_hi, chart.periodic_y(), "y_hi"),
        ];
        for (kind, periodic, name) in edges {
            if kind == BoundaryKind::PeriodicOnly && !periodic {
                return Err(Error::InvalidArgument(format!(
                    "edge {name} is not periodic on a {} chart",
                    chart.kind().as_str()
                )));
            }
        }
        Ok(())
    }

    /// Role of node `(i, j)`. Exact edges win at corners.
    pub(crate) fn role(&self, chart: &ConformalChart, i: usize, j: usize) -> Role {
        let mut hits = [None, None];
        if !chart.periodic_x() {
            if i == 0 {
                hits[0] = Some(self.x_lo);
            } else if i + 1 == chart.nx() {
                hits[0] = Some(self.x_hi);
            }
        }
        if !chart.periodic_y() {
            if j == 0 {
                hits[1] = Some(self.y_lo);
            } else if j + 1 == chart.ny() {
                hits[1] = Some(self.y_hi);
            }
        }
        let mut role = Role::Free;
        for kind in hits.into_iter().flatten() {
            match kind {
                BoundaryKind::DirichletExact { reference } => return Role::Exact(reference),
                _ => role = Role::Frozen,
            }
        }
        role
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Role {
    Free,
    Frozen,
    Exact(ExactReference),
}

/// Time, conformal factor and boundary behaviour of a flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    t: f64,
    u: ScalarField,
    bc: BoundaryCondition,
}

impl FlowState {
    pub fn new(t: f64, u: ScalarField, bc: BoundaryCondition) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("flow time must be non-negative, got {t}")));
        }
        bc.validate(u.chart())?;
        Ok(Self { t, u, bc })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn chart(&self) -> &ConformalChart {
        self.u.chart()
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn into_field(self) -> ScalarField {
        self.u
    }

    pub(crate) fn roles(&self) -> Vec<Role> {
        let c = self.chart();
        (0..c.len())
            .map(|k| {
                let (i, j) = c.node(k);
                self.bc.role(c, i, j)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEuler,
    ImplicitEuler,
}

/// Time-step size: fixed, or chosen from the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dt {
    Auto,
    Fixed(f64),
}

impl Serialize for Dt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Dt::Auto => s.serialize_str("auto"),
            Dt::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Dt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Dt::Fixed(v)),
            Raw::Str(s) if s == "auto" => Ok(Dt::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("dt must be a number or \"auto\", got \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    pub scheme: Scheme,
    pub dt: Dt,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
}

fn default_newton_tol() -> f64 {
    1e-10
}

fn default_max_newton() -> usize {
    25
}

impl StepControl {
    pub fn explicit() -> Self {
        Self {
            scheme: Scheme::ExplicitEuler,
            dt: Dt::Auto,
            newton_tol: default_newton_tol(),
            max_newton: default_max_newton(),
        }
    }

    pub fn implicit(dt: f64) -> Self {
        Self { scheme: Scheme::ImplicitEuler, dt: Dt::Fixed(dt), ..Self::explicit() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Dt::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidArgument("newton_tol must be positive".into()));
        }
        if self.max_newton == 0 {
            return Err(Error::InvalidArgument("max_newton must be at least 1".into()));
        }
        Ok(())
    }

    /// Step size this control would take from `state`.
    pub fn resolve_dt(&self, state: &FlowState) -> f64 {
        match (self.dt, self.scheme) {
            (Dt::Fixed(dt), _) => dt,
            (Dt::Auto, Scheme::ExplicitEuler) => stable_dt(state),
            (Dt::Auto, Scheme::ImplicitEuler) => {
                let h = state.chart().h_min();
                0.5 * h * h
            }
        }
    }
}

/// Largest explicit step: `0.2 h² min e^{2u}`.
pub fn stable_dt(state: &FlowState) -> f64 {
    let h = state.chart().h_min();
    0.2 * h * h * (2.0 * state.u.min()).exp()
}

/// One step with the step size chosen by `ctl`.
pub fn step(state: &FlowState, ctl: &StepControl) -> Result<FlowState> {
    step_by(state, ctl, ctl.resolve_dt(state))
}

/// One step of size `dt`.
pub fn step_by(state: &FlowState, ctl: &StepControl, dt: f64) -> Result<FlowState> {
    ctl.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let t_new = state.t + dt;
    let roles = state.roles();
    let values = match ctl.scheme {
        Scheme::ExplicitEuler => {
            let bound = stable_dt(state);
            if dt > bound * (1.0 + 1e-12) {
                return Err(Error::UnstableStep { dt, bound });
            }
            explicit_update(state, dt, &roles)
        }
        Scheme::ImplicitEuler => implicit::backward_euler(state, dt, &roles, ctl)?,
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepBlowUp { t: t_new });
    }
    let u = ScalarField::new(*state.chart(), values).map_err(|_| Error::StepBlowUp { t: t_new })?;
    Ok(FlowState { t: t_new, u, bc: state.bc })
}

fn explicit_update(state: &FlowState, dt: f64, roles: &[Role]) -> Vec<f64> {
    let c = state.chart();
    let u = &state.u;
    let t_new = state.t + dt;
    let mut out = u.values().to_vec();
    for (k, role) in roles.iter().enumerate() {
        let (i, j) = c.node(k);
        match role {
            Role::Free => {
                let w = u.values()[k];
                out[k] = w + dt * (-2.0 * w).exp() * geometry::laplacian_at(u, i, j);
            }
            Role::Frozen => {}
            Role::Exact(r) => out[k] = r.eval(c, i, j, t_new),
        }
    }
    out
}

/// Read-only view handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub step: usize,
    /// Size of the step that produced this state (0 for the initial state).
    pub dt: f64,
    pub state: &'a FlowState,
}

pub trait Observer {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()>;
}

impl<F: FnMut(&Observation<'_>) -> Result<()>> Observer for F {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        self(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    /// Observation spacing; `None` observes only the first and last state.
    pub cadence: Option<f64>,
    /// Stop once `min e^{2u}` drops below this value.
    pub extinction_threshold: Option<f64>,
}

impl RunOptions {
    pub fn until(t_end: f64) -> Self {
        Self { t_end, cadence: None, extinction_threshold: None }
    }

    pub fn every(mut self, cadence: f64) -> Self {
        self.cadence = Some(cadence);
        self
    }

    pub fn extinction(mut self, threshold: f64) -> Self {
        self.extinction_threshold = Some(threshold);
        self
    }
}

#[derive(Debug)]
pub enum RunStatus {
    Completed,
    /// The extinction proxy fired at `t`.
    Extinct {
        t: f64,
    },
    /// A step failed; the outcome carries the last good state.
    Failed(Error),
}

#[derive(Debug)]
pub struct RunOutcome {
    pub state: FlowState,
    pub steps: usize,
    pub observations: usize,
    pub status: RunStatus,
}

impl RunOutcome {
    pub fn is_completed(&self) -> bool {
        matches!(self.status, RunStatus::Completed)
    }

    /// Turn a failed status into an error.
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            RunStatus::Failed(e) => Err(e),
            _ => Ok(self),
        }
    }
}

/// Integrate to `opts.t_end`, landing exactly on every observation time.
pub fn run(
    state: FlowState,
    ctl: &StepControl,
    opts: &RunOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutcome> {
    ctl.validate()?;
    let t0 = state.t;
    if !(opts.t_end > t0) {
        return Err(Error::InvalidArgument(format!("t_end {} must exceed the start time {t0}", opts.t_end)));
    }
    if let Some(c) = opts.cadence {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!("cadence must be positive, got {c}")));
        }
    }
    let notify = |observers: &mut [&mut dyn Observer], step: usize, dt: f64, s: &FlowState| -> Result<()> {
        let obs = Observation { step, dt, state: s };
        for o in observers.iter_mut() {
            o.observe(&obs).map_err(|e| match e {
                Error::Observer { .. } => e,
                other => Error::Observer { t: s.t, message: other.to_string() },
            })?;
        }
        Ok(())
    };

    let next_obs = |k: usize| -> f64 {
        match opts.cadence {
            Some(c) => (t0 + k as f64 * c).min(opts.t_end),
            None => opts.t_end,
        }
    };
    let mut state = state;
    let mut steps = 0;
    let mut observations = 1;
    let mut k = 1;
    notify(observers, 0, 0.0, &state)?;
    loop {
        let target = next_obs(k);
        let (hit, dt) = clamp_to_target(state.t, ctl.resolve_dt(&state), target);
        let mut next = match step_by(&state, ctl, dt) {
            Ok(s) => s,
            Err(e) => return Ok(RunOutcome { state, steps, observations, status: RunStatus::Failed(e) }),
        };
        steps += 1;
        if hit {
            next.t = target;
        }
        state = next;
        let extinct = opts.extinction_threshold.is_some_and(|thr| (2.0 * state.u.min()).exp() < thr);
        if hit || extinct {
            notify(observers, steps, dt, &state)?;
            observations += 1;
        }
        if extinct {
            let t = state.t;
            return Ok(RunOutcome { state, steps, observations, status: RunStatus::Extinct { t } });
        }
        if hit {
            if target >= opts.t_end {
                return Ok(RunOutcome { state, steps, observations, status: RunStatus::Completed });
            }
            k += 1;
        }
    }
}

/// Whether a step of `dt` from `t` reaches `target`, and the step to take.
/// Steps that land within rounding of the target keep their size.
pub(crate) fn clamp_to_target(t: f64, dt: f64, target: f64) -> (bool, f64) {
    let gap = target - t;
    let tol = 1e-12 * target.abs().max(1.0);
    if dt < gap - tol {
        (false, dt)
    } else if dt > gap + tol {
        (true, gap)
    } else {
        (true, dt)
    }
}

/// One row of the run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub area: f64,
    pub min_k: f64,
    pub max_k: f64,
}

impl LogRow {
    pub fn from_state(step: usize, dt: f64, state: &FlowState) -> Self {
        let u = state.u();
        let c = u.chart();
        let area = geometry::area(u, &Domain::whole(*c));
        let k = geometry::gauss_curvature(u);
        let (mut min_k, mut max_k) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..c.ny() {
            for i in 0..c.nx() {
                if c.is_interior(i, j, 1) {
                    min_k = min_k.min(k.at(i, j));
                    max_k = max_k.max(k.at(i, j));
                }
            }
        }
        Self { step, t: state.t(), dt, min_u: u.min(), max_u: u.max(), area, min_k, max_k }
    }
}

/// Observer that records [`LogRow`]s and writes them as CSV.
#[derive(Debug, Clone, Default)]
pub struct RunLog {
    rows: Vec<LogRow>,
}

impl RunLog {
    pub const HEADER: &'static str = "step,t,dt,min_u,max_u,area,min_K,max_K";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.step,
                fmt17(r.t),
                fmt17(r.dt),
                fmt17(r.min_u),
                fmt17(r.max_u),
                fmt17(r.area),
                fmt17(r.min_k),
                fmt17(r.max_k)
            )?;
        }
        Ok(())
    }
}

impl Observer for RunLog {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        self.rows.push(LogRow::from_state(obs.step, obs.dt, obs.state));
        Ok(())
    }
}

/// Observer keeping a copy of every observed state.
#[derive(Debug, Clone, Default)]
pub struct History {
    pub states: Vec<FlowState>,
}

impl Observer for History {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        self.states.push(obs.state.clone());
        Ok(())
    }
}
