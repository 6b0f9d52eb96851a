//! End-to-end experiments: truncated cigars, the patched multi-cigar metric
//! at finite depth, and shrinking spheres.
//!
//! A scenario is described by a TOML document:
//!
//! ```toml
//! seed = 7
//! checks = ["chen", "bol", "barrier_sandwich"]
//!
//! [scenario]
//! kind = "truncated_cigar"
//! alpha = 1.0
//! length = 20.0
//! horizon = 1.0
//! boundary = "frozen"
//!
//! [step]
//! scheme = "implicit_euler"
//! dt = "auto"
//! ```
//!
//! Results carry one report per check, time series for plotting and a bag
//! of measured constants, and can be written to a run directory.

mod cigar;
mod construction;
mod sphere;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticReport;
use crate::error::{Error, Result};
use crate::field::{fmt17, ScalarField};
use crate::flow::{RunLog, StepControl};

pub use cigar::{collar_profile, run_truncated_cigar, CigarBoundary, CigarScenario};
pub use construction::{
    build_patched_metric, inner_area_closed_form, run_construction_suite, ConstructionScenario, ConstructionSpec,
    Patch, PatchGrid, PatchedMetric,
};
pub use sphere::{run_sphere, SphereScenario};

/// Top-level scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Step control; each scenario kind has its own default.
    #[serde(default)]
    pub step: Option<StepControl>,
    /// Checks to report; every check the scenario knows when absent.
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    /// Seed for randomized sampling; recorded in the outputs.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    TruncatedCigar(CigarScenario),
    RoundSphere(SphereScenario),
    CappedSphere(SphereScenario),
    Construction(ConstructionScenario),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::TruncatedCigar(_) => "truncated_cigar",
            Scenario::RoundSphere(_) => "round_sphere",
            Scenario::CappedSphere(_) => "capped_sphere",
            Scenario::Construction(_) => "construction",
        }
    }

    /// Names of the checks this scenario reports.
    pub fn available_checks(&self) -> &'static [&'static str] {
        match self {
            Scenario::TruncatedCigar(_) => cigar::CHECKS,
            Scenario::RoundSphere(_) | Scenario::CappedSphere(_) => sphere::CHECKS,
            Scenario::Construction(_) => construction::CHECKS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Parse a TOML document, applying `key.path=value` overrides first.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: Self = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            for o in overrides {
                apply_override(&mut doc, o)?;
            }
            let merged = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
            toml::from_str(&merged).map_err(|e| Error::Config(format!("after overrides: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(step) = &self.step {
            step.validate().map_err(|e| Error::Config(format!("step: {e}")))?;
        }
        if let Some(checks) = &self.checks {
            let known = self.scenario.available_checks();
            for c in checks {
                if !known.contains(&c.as_str()) {
                    return Err(Error::Config(format!(
                        "checks: unknown check '{c}' for {} (known: {})",
                        self.scenario.name(),
                        known.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    fn wants(&self, check: &str) -> bool {
        self.checks.as_ref().is_none_or(|c| c.iter().any(|x| x == check))
    }
}

/// Set `a.b.c` in `doc` to `value`, parsed as a TOML value when possible
/// and as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override '{assignment}' has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for p in parents {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| Error::Config(format!("override '{key}': '{p}' is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// One point of a plot-ready diagnostic series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    pub tolerance: f64,
}

impl SeriesPoint {
    pub fn of(r: &DiagnosticReport) -> Self {
        Self {
            t: r.t,
            value: r.value.unwrap_or(r.margin),
            bound: r.bound.unwrap_or(0.0),
            margin: r.margin,
            tolerance: r.tolerance,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioResult {
    pub name: String,
    pub seed: u64,
    pub log: RunLog,
    pub snapshots: Vec<(f64, ScalarField)>,
    /// One report per configured check.
    pub reports: Vec<DiagnosticReport>,
    pub series: BTreeMap<String, Vec<SeriesPoint>>,
    pub measured: serde_json::Map<String, serde_json::Value>,
}

impl ScenarioResult {
    fn new(name: &str, seed: u64) -> Self {
        Self { name: name.to_string(), seed, ..Self::default() }
    }

    /// True when every hard check passed.
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass || !r.hard)
    }

    pub fn report(&self, name: &str) -> Option<&DiagnosticReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn measure(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.measured.insert(key.to_string(), v);
    }

    /// Record a per-time series of reports under `name` and keep the worst
    /// one (smallest `margin + tolerance`) as the check's report.
    fn push_worst(&mut self, name: &str, reports: Vec<DiagnosticReport>) {
        if reports.is_empty() {
            return;
        }
        self.series.insert(name.to_string(), reports.iter().map(SeriesPoint::of).collect());
        let failures = reports.iter().filter(|r| !r.pass).count();
        let n = reports.len();
        let mut worst = reports
            .into_iter()
            .min_by(|a, b| (a.margin + a.tolerance).total_cmp(&(b.margin + b.tolerance)))
            .expect("non-empty");
        let note = format!("worst of {n} samples, {failures} failing");
        worst.detail = if worst.detail.is_empty() { note } else { format!("{}; {note}", worst.detail) };
        worst.name = name.to_string();
        self.reports.push(worst);
    }

    /// The document written to `reports.json`.
    pub fn reports_json(&self) -> serde_json::Value {
        serde_json::json!({
            "scenario": self.name,
            "seed": self.seed,
            "reports": self.reports,
            "measured_constants": self.measured,
            "series": self.series,
        })
    }

    /// Write `run.csv`, `snapshots/`, `reports.json` and `summary.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let snaps = dir.join("snapshots");
        fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
        write_file(&dir.join("run.csv"), |w| self.log.write_csv(w))?;
        for (k, (t, f)) in self.snapshots.iter().enumerate() {
            write_file(&snaps.join(format!("snap_{k:04}.txt")), |w| f.write_snapshot(*t, w))?;
        }
        write_file(&dir.join("reports.json"), |mut w| {
            serde_json::to_writer_pretty(&mut w, &self.reports_json())?;
            writeln!(w)
        })?;
        write_file(&dir.join("summary.csv"), |w| {
            writeln!(w, "name,t,margin,tolerance,pass,hard")?;
            for r in &self.reports {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.name,
                    fmt17(r.t),
                    fmt17(r.margin),
                    fmt17(r.tolerance),
                    r.pass,
                    r.hard
                )?;
            }
            Ok(())
        })
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Run the configured scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let mut result = match &cfg.scenario {
        Scenario::TruncatedCigar(s) => run_truncated_cigar(s, cfg.step.as_ref(), cfg.seed)?,
        Scenario::RoundSphere(s) => run_sphere(s, false, cfg.step.as_ref(), cfg.seed)?,
        Scenario::CappedSphere(s) => run_sphere(s, true, cfg.step.as_ref(), cfg.seed)?,
        Scenario::Construction(s) => run_construction_suite(&s.spec()?, &s.t_checks, cfg.step.as_ref())?,
    };
    result.seed = cfg.seed;
    result.reports.retain(|r| cfg.wants(&r.name));
    result.series.retain(|k, _| cfg.wants(k));
    Ok(result)
}

/// Quintic step: 0 below 0, 1 above 1, `C²` in between.
pub(crate) fn quintic(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}
