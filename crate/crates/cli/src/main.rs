//! `ricci2d` command-line runner.
//!
//! Exit codes: 0 success, 1 a hard check or identity failed, 2 bad input
//! (config, arguments, missing or unwritable files), 3 solver failure.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use ricci2d::diagnostics::{bol_residual, chen_bound, chen_tolerance, sample_domains};
use ricci2d::field::fmt17;
use ricci2d::scenarios::{build_patched_metric, run_construction_suite, Scenario, SeriesPoint};
use ricci2d::validate::{run_identity_suite, ValidateOptions};
use ricci2d::{
    run_scenario, BoundaryCondition, DiagnosticReport, Error, FlowState, ScalarField, ScenarioConfig, ScenarioResult,
};

const EXIT_CHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "ricci2d", version, about = "Conformal Ricci flow laboratory")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Check the closed-form identities of the exact solutions.
    Validate {
        /// Multiply the number of samples per identity.
        #[arg(long, default_value_t = 1)]
        sample_density: usize,
        /// Perturb one identity's library value (self-test of the suite).
        #[arg(long, value_name = "IDENTITY")]
        inject_fault: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one or more scenario configs.
    Simulate {
        /// Scenario config (TOML); repeat to run several.
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate the curvature bound and isoperimetric checks on a snapshot.
    Diagnose {
        #[arg(long)]
        snapshot: PathBuf,
        /// Number of seeded random domains for the isoperimetric check.
        #[arg(long, default_value_t = 20)]
        domains: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the patched metric of a construction config and check it at t = 0.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Summarise a finished run directory and write plot-ready CSVs.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Output directory; created if absent.
    #[arg(long)]
    out: PathBuf,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Override a config value, e.g. `--set scenario.alpha=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    fn check(message: impl Into<String>) -> Self {
        Self { code: EXIT_CHECK, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_INPUT };
        let message = if code == EXIT_SOLVER { format!("solver failure: {e}") } else { e.to_string() };
        Self { code, message }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.verb {
        Verb::Validate { sample_density, inject_fault, seed } => validate(sample_density, inject_fault, seed),
        Verb::Simulate { config, out, jobs } => simulate(&config, &out, jobs),
        Verb::Diagnose { snapshot, domains, seed } => diagnose(&snapshot, domains, seed),
        Verb::Construct { config, out } => construct(&config, &out),
        Verb::Report { run } => report(&run),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn validate(sample_density: usize, inject_fault: Option<String>, seed: u64) -> Outcome {
    let opts = ValidateOptions { sample_density, inject_fault, seed };
    let checks = run_identity_suite(&opts)?;
    println!("{:<22} {:>8} {:>12}  verdict", "identity", "samples", "max_dev");
    for c in &checks {
        let verdict = if c.pass { "ok" } else { "FAIL" };
        println!("{:<22} {:>8} {:>12.3e}  {verdict}", c.name, c.samples, c.max_deviation);
    }
    match checks.iter().find(|c| !c.pass) {
        Some(c) => Err(Failure::check(format!("identity '{}' deviates by {:e}", c.name, c.max_deviation))),
        None => Ok(()),
    }
}

/// Create `dir`, refusing a non-empty one unless `force`.
fn prepare_dir(dir: &Path, force: bool) -> Outcome {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
        if entries.next().is_some() && !force {
            return Err(Failure::input(format!("{} is not empty; pass --force to overwrite", dir.display())));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))
}

fn simulate(configs: &[PathBuf], out: &OutArgs, jobs: usize) -> Outcome {
    let parsed = configs
        .iter()
        .map(|p| ScenarioConfig::from_file(p, &out.overrides).map(|c| (p, c)))
        .collect::<Result<Vec<_>, _>>()?;
    // a single config writes straight into --out, several into --out/<stem>
    let targets: Vec<(PathBuf, ScenarioConfig)> = if parsed.len() == 1 {
        parsed.into_iter().map(|(_, c)| (out.out.clone(), c)).collect()
    } else {
        let mut seen = std::collections::BTreeSet::new();
        let mut v = Vec::new();
        for (p, c) in parsed {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            if !seen.insert(stem.clone()) {
                return Err(Failure::input(format!("two configs share the output name '{stem}'")));
            }
            v.push((out.out.join(stem), c));
        }
        v
    };
    for (dir, _) in &targets {
        prepare_dir(dir, out.force)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::input(format!("thread pool: {e}")))?;
    let results: Vec<(PathBuf, Outcome, String)> = pool.install(|| {
        targets
            .par_iter()
            .map(|(dir, cfg)| {
                let mut text = Vec::new();
                let res = run_one(cfg, dir, &mut text);
                (dir.clone(), res, String::from_utf8_lossy(&text).into_owned())
            })
            .collect()
    });
    let mut worst: Option<Failure> = None;
    for (dir, res, text) in results {
        println!("== {}", dir.display());
        print!("{text}");
        if let Err(f) = res {
            eprintln!("error: {}: {}", dir.display(), f.message);
            if worst.as_ref().is_none_or(|w| f.code > w.code) {
                worst = Some(f);
            }
        }
    }
    match worst {
        Some(f) => Err(Failure { code: f.code, message: "one or more runs failed".into() }),
        None => Ok(()),
    }
}

fn run_one(cfg: &ScenarioConfig, dir: &Path, text: &mut Vec<u8>) -> Outcome {
    let result = run_scenario(cfg)?;
    result.write_dir(dir)?;
    summarise(&result, text);
    finish(&result.reports)
}

fn finish(reports: &[DiagnosticReport]) -> Outcome {
    match reports.iter().find(|r| r.hard && !r.pass) {
        Some(r) => Err(Failure::check(format!("check '{}' failed at t = {} (margin {:e})", r.name, r.t, r.margin))),
        None => Ok(()),
    }
}

fn summarise(result: &ScenarioResult, w: &mut Vec<u8>) {
    let _ = writeln!(w, "scenario {} (seed {})", result.name, result.seed);
    print_table(&result.reports, w);
    for (k, v) in &result.measured {
        if v.is_number() || v.is_string() || v.is_boolean() {
            let _ = writeln!(w, "  {k} = {v}");
        }
    }
}

fn print_table(reports: &[DiagnosticReport], w: &mut impl Write) {
    let _ = writeln!(w, "{:<26} {:>10} {:>13} {:>11}  {:<4} verdict", "check", "t", "margin", "tolerance", "kind");
    for r in reports {
        let kind = if r.hard { "hard" } else { "soft" };
        let verdict = if r.pass { "ok" } else { "FAIL" };
        let _ =
            writeln!(w, "{:<26} {:>10.4} {:>13.5e} {:>11.3e}  {kind} {verdict}", r.name, r.t, r.margin, r.tolerance);
    }
}

fn diagnose(path: &Path, domains: usize, seed: u64) -> Outcome {
    let file = fs::File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let (u, t) = ScalarField::read_snapshot(BufReader::new(file))?;
    let mut reports = Vec::new();
    if t > 0.0 {
        let state = FlowState::new(t, u.clone(), BoundaryCondition::frozen())?;
        reports.push(chen_bound(&state, chen_tolerance(&state))?);
    } else {
        println!("snapshot at t = 0: curvature lower bound skipped");
    }
    if domains > 0 {
        let doms = sample_domains(&u, domains, seed)?;
        let bol = doms.iter().map(|d| bol_residual(&u, d)).collect::<Result<Vec<_>, _>>()?;
        let n = bol.len();
        let worst = bol
            .into_iter()
            .min_by(|a, b| (a.margin + a.tolerance).total_cmp(&(b.margin + b.tolerance)))
            .expect("at least one domain");
        reports.push(worst.at_time(t).with_detail(format!("worst of {n} domains, seed {seed}")));
    }
    print_table(&reports, &mut std::io::stdout());
    finish(&reports)
}

fn construct(path: &Path, out: &OutArgs) -> Outcome {
    let cfg = ScenarioConfig::from_file(path, &out.overrides)?;
    let Scenario::Construction(s) = &cfg.scenario else {
        return Err(Failure::input(format!("{}: construct needs kind = \"construction\"", path.display())));
    };
    let spec = s.spec()?;
    let metric = build_patched_metric(&spec)?;
    prepare_dir(&out.out, out.force)?;
    let metric_dir = out.out.join("metric");
    fs::create_dir_all(&metric_dir).map_err(|e| Failure::input(format!("{}: {e}", metric_dir.display())))?;
    write_snapshot(&metric_dir.join("base.txt"), &metric.planar)?;
    for (k, f) in metric.patches.iter().enumerate() {
        write_snapshot(&metric_dir.join(format!("patch_{}.txt", k + 1)), f)?;
    }
    let mut result = run_construction_suite(&spec, &[0.0], cfg.step.as_ref())?;
    result.seed = cfg.seed;
    result.write_dir(&out.out)?;
    let mut text = Vec::new();
    summarise(&result, &mut text);
    print!("{}", String::from_utf8_lossy(&text));
    finish(&result.reports)
}

fn write_snapshot(path: &Path, f: &ScalarField) -> Outcome {
    let file = fs::File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    f.write_snapshot(0.0, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Column name for a series' measured value.
fn value_column(series: &str) -> &'static str {
    match series {
        "chen" => "min_K",
        "bol" => "length_sq",
        "initial_curvature" | "curvature_persistence" => "max_K",
        "area_series" => "area_sum",
        _ => "value",
    }
}

fn report(run: &Path) -> Outcome {
    let path = run.join("reports.json");
    let text = fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let reports: Vec<DiagnosticReport> = serde_json::from_value(doc["reports"].clone())
        .map_err(|e| Failure::input(format!("{}: reports: {e}", path.display())))?;
    let series: std::collections::BTreeMap<String, Vec<SeriesPoint>> =
        serde_json::from_value(doc.get("series").cloned().unwrap_or_default()).unwrap_or_default();

    println!("scenario {} (seed {})", doc["scenario"].as_str().unwrap_or("?"), doc["seed"]);
    print_table(&reports, &mut std::io::stdout());
    let plots = run.join("plots");
    fs::create_dir_all(&plots).map_err(|e| Failure::input(format!("{}: {e}", plots.display())))?;
    for (name, points) in &series {
        let p = plots.join(format!("{name}.csv"));
        let mut body = format!("t,{},bound,margin,tolerance\n", value_column(name));
        for s in points {
            body.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt17(s.t),
                fmt17(s.value),
                fmt17(s.bound),
                fmt17(s.margin),
                fmt17(s.tolerance)
            ));
        }
        fs::write(&p, body).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
        println!("wrote {}", p.display());
    }
    finish(&reports)
}
