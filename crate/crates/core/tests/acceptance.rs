//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Runs with its own harness so the lines are always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ricci2d::diagnostics::{bol_residual, sample_domains};
use ricci2d::exact::{round_sphere_u, CigarModel};
use ricci2d::flow::{self, BoundaryCondition, ExactReference, FlowState, Observation, RunOptions, StepControl};
use ricci2d::geometry::Domain;
use ricci2d::scenarios::{
    run_construction_suite, run_sphere, run_truncated_cigar, CigarBoundary, CigarScenario, ConstructionScenario,
    ScenarioResult, SphereScenario,
};
use ricci2d::validate::{run_identity_suite, ValidateOptions};
use ricci2d::{ConformalChart, ScalarField};

const IDENTITY_TOL: f64 = 1e-12;
const IDENTITY_MIN_SAMPLES: usize = 1000;
const IDENTITY_MAX_RUNTIME: Duration = Duration::from_secs(1);
const MIN_ORDER: f64 = 1.8;
const CONVERGENCE_MAX_RUNTIME: Duration = Duration::from_secs(300);
const TRANSLATION_TOL: f64 = 5e-3;
const LIFESPAN_REL: f64 = 0.02;
const AREA_RATE_REL: f64 = 0.01;
const BOL_REL: f64 = 0.03;
const BOL_DOMAINS: usize = 100;
const SANDWICH_BETA: f64 = 1.1;
const BETA_RESOLUTION: f64 = 1e-2;
const SCALING_REL: f64 = 0.03;
const PATCH_K2_REL: f64 = 0.05;
const AREA_SERIES_REL: f64 = 0.10;
const DISC_AREA: f64 = 0.05;
const DISC_SUP_U: f64 = -3.0;

struct Verdicts(Vec<(String, bool)>);

impl Verdicts {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push((id.to_string(), pass));
    }
}

fn measured(r: &ScenarioResult, key: &str) -> f64 {
    r.measured[key].as_f64().unwrap_or(f64::NAN)
}

fn series(r: &ScenarioResult, key: &str) -> Vec<[f64; 2]> {
    serde_json::from_value(r.measured[key].clone()).unwrap_or_default()
}

fn csv(r: &ScenarioResult) -> Vec<u8> {
    let mut buf = Vec::new();
    r.log.write_csv(&mut buf).unwrap();
    buf
}

/// Dirichlet-exact cigar on ℓ ∈ [−4, 8] refined in ℓ only; returns the
/// profiles at t = 0, 0.5 and 1.
fn cigar_oracle_run(cells_per_unit: usize) -> (ConformalChart, Vec<ScalarField>) {
    let n_ell = 12 * cells_per_unit + 1;
    let chart = ConformalChart::cylindrical([-4.0, 8.0], n_ell, 8).unwrap();
    let r = ExactReference::Cigar(CigarModel::unit(8.0));
    let s = FlowState::new(0.0, r.field(chart, 0.0).unwrap(), BoundaryCondition::exact(r)).unwrap();
    let h = chart.hx();
    let mut snaps = Vec::new();
    let mut obs = |o: &Observation<'_>| {
        snaps.push(o.state.u().clone());
        Ok(())
    };
    let out =
        flow::run(s, &StepControl::implicit(0.5 * h * h), &RunOptions::until(1.0).every(0.5), &mut [&mut obs]).unwrap();
    assert!(out.is_completed());
    (chart, snaps)
}

fn interior_error(u: &ScalarField, t: f64) -> f64 {
    let c = u.chart();
    let m = CigarModel::unit(8.0);
    (0..c.len())
        .map(|k| c.node(k))
        .filter(|&(i, j)| c.is_interior(i, j, 1))
        .map(|(i, j)| (u.at(i, j) - m.u_cyl(t, c.x(i))).abs())
        .fold(0.0, f64::max)
}

fn main() -> ExitCode {
    let mut v = Verdicts(Vec::new());

    // 1. closed-form identities
    let start = Instant::now();
    let ids = run_identity_suite(&ValidateOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let worst = ids.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
    let samples = ids.iter().map(|c| c.samples).min().unwrap_or(0);
    v.record(
        "AC1 identity suite",
        worst <= IDENTITY_TOL && samples >= IDENTITY_MIN_SAMPLES && elapsed < IDENTITY_MAX_RUNTIME,
        format!("{} identities, {samples} samples each, max deviation {worst:.2e}, {elapsed:.2?}", ids.len()),
    );

    // 2. and 3. solver against the cigar on three grids
    let start = Instant::now();
    let runs: Vec<_> = [4, 8, 16].into_iter().map(cigar_oracle_run).collect();
    let elapsed = start.elapsed();
    let errs: Vec<f64> = runs.iter().map(|(_, s)| interior_error(&s[2], 1.0)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    v.record(
        "AC2 convergence order",
        errs.windows(2).all(|w| w[1] < w[0])
            && orders.iter().all(|&p| p >= MIN_ORDER)
            && elapsed < CONVERGENCE_MAX_RUNTIME,
        format!(
            "errors {}, orders {orders:.3?}, {elapsed:.2?}",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" > ")
        ),
    );
    let (chart, snaps) = &runs[2];
    let (u0, u_half) = (&snaps[0], &snaps[1]);
    let shift = (0..chart.len())
        .map(|k| chart.node(k))
        .filter(|&(i, j)| chart.is_interior(i, j, 1) && chart.x(i) - 1.0 >= -4.0)
        .map(|(i, j)| (u_half.at(i, j) - u0.interpolate([chart.x(i) - 1.0, chart.y(j)]).unwrap()).abs())
        .fold(0.0, f64::max);
    v.record(
        "AC3 translation law",
        shift <= TRANSLATION_TOL,
        format!("L∞ gap between t = 0.5 and the shifted t = 0 profile {shift:.3e}"),
    );

    // scenario runs shared by the remaining criteria
    let sphere = SphereScenario::default();
    let round = run_sphere(&sphere, false, None, 0).unwrap();
    let capped = run_sphere(&sphere, true, None, 0).unwrap();
    let exact = run_truncated_cigar(
        &CigarScenario { length: 40.0, horizon: 1.0, beta: SANDWICH_BETA, ..Default::default() },
        None,
        0,
    )
    .unwrap();
    let frozen = run_truncated_cigar(
        &CigarScenario {
            length: 40.0,
            horizon: 1.0,
            boundary: CigarBoundary::Frozen,
            beta_resolution: BETA_RESOLUTION,
            ..Default::default()
        },
        None,
        0,
    )
    .unwrap();
    let big =
        run_truncated_cigar(&CigarScenario { alpha: 1.0, length: 32.0, horizon: 4.0, ..Default::default() }, None, 0)
            .unwrap();
    let small =
        run_truncated_cigar(&CigarScenario { alpha: 0.5, length: 16.0, horizon: 1.0, ..Default::default() }, None, 0)
            .unwrap();
    let cons = ConstructionScenario::default();
    let construction = run_construction_suite(&cons.spec().unwrap(), &cons.t_checks, None).unwrap();

    // 4. lifespans and area rate
    let lifespan_ok = |r: &ScenarioResult, expect: f64| {
        let t = measured(r, "extinction_time");
        let rate = measured(r, "area_rate_ratio");
        ((t - expect).abs() <= LIFESPAN_REL * expect && (rate - 1.0).abs() <= AREA_RATE_REL, t, rate)
    };
    let (ok_r, t_r, q_r) = lifespan_ok(&round, 0.5);
    let (ok_c, t_c, q_c) = lifespan_ok(&capped, 1.0);
    v.record(
        "AC4 lifespans",
        ok_r && ok_c,
        format!("round {t_r:.5} (0.5), capped {t_c:.5} (1.0); dA/dt over -8π: {q_r:.5}, {q_c:.5}"),
    );

    // 5. curvature lower bound at every snapshot of every scenario
    let all = [
        ("round", &round),
        ("capped", &capped),
        ("cigar", &exact),
        ("frozen", &frozen),
        ("alpha1", &big),
        ("alpha1/2", &small),
        ("construction", &construction),
    ];
    let chen: Vec<String> = all
        .iter()
        .map(|(n, r)| match r.report("chen") {
            Some(c) => format!("{n} {:+.2e}{}", c.margin, if c.pass { "" } else { " (fail)" }),
            None => format!("{n} missing"),
        })
        .collect();
    v.record(
        "AC5 curvature lower bound",
        all.iter().all(|(_, r)| r.report("chen").is_some_and(|c| c.pass)),
        format!("worst margins: {}", chen.join(", ")),
    );

    // 6. isoperimetric residual on random domains and equality cases
    let plane = ConformalChart::planar([-4.0, 4.0], [-4.0, 4.0], 161, 161).unwrap();
    let cigar_u = ScalarField::from_fn(plane, |x, y| CigarModel::unit(8.0).u(0.0, [x, y])).unwrap();
    let sphere_u = ScalarField::from_fn(plane, |x, y| round_sphere_u(1.0, 0.0, [x, y])).unwrap();
    let mut worst_rel = f64::INFINITY;
    let mut count = 0;
    for (u, seed) in [(&cigar_u, 11), (&sphere_u, 12)] {
        for d in sample_domains(u, BOL_DOMAINS / 2, seed).unwrap() {
            let r = bol_residual(u, &d).unwrap();
            let l2 = r.value.unwrap();
            worst_rel = worst_rel.min(r.margin / l2);
            count += 1;
        }
    }
    let eq_chart = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], 161, 161).unwrap();
    let disc = Domain::from_fn(eq_chart, |x, y| x.hypot(y) - 1.0).unwrap();
    let flat = ScalarField::constant(eq_chart, 0.0).unwrap();
    let hemi = ScalarField::from_fn(eq_chart, |x, y| round_sphere_u(1.0, 0.0, [x, y])).unwrap();
    let eq: Vec<f64> = [&flat, &hemi]
        .iter()
        .map(|u| {
            let r = bol_residual(u, &disc).unwrap();
            r.margin.abs() / r.value.unwrap()
        })
        .collect();
    v.record(
        "AC6 isoperimetric residual",
        count == BOL_DOMAINS && worst_rel >= -BOL_REL && eq.iter().all(|&e| e <= BOL_REL),
        format!(
            "{count} domains, min margin/L² {worst_rel:+.3e}; flat disc |margin|/L² {:.3e}, hemisphere {:.3e}",
            eq[0], eq[1]
        ),
    );

    // 7. barrier sandwich
    let sandwich = exact.report("barrier_sandwich");
    let beta_star = measured(&frozen, "beta_star");
    v.record(
        "AC7 barrier sandwich",
        sandwich.is_some_and(|r| r.margin >= 0.0) && beta_star.is_finite() && beta_star > 1.0,
        format!(
            "exact run at β = {SANDWICH_BETA}: margin {:+.4e}; frozen β* = {beta_star:.4} (resolution {BETA_RESOLUTION})",
            sandwich.map_or(f64::NAN, |r| r.margin)
        ),
    );

    // 8. scale covariance of α² max K
    let (ea, eb) = (series(&big, "eps_hat"), series(&small, "eps_hat"));
    let mut worst_gap: f64 = 0.0;
    let mut matched = 0;
    for [t, e] in &eb {
        if let Some([_, e_big]) = ea.iter().find(|q| (q[0] - 4.0 * t).abs() < 1e-9) {
            worst_gap = worst_gap.max((e - e_big).abs() / e_big.abs());
            matched += 1;
        }
    }
    let (min_a, min_b) = (measured(&big, "eps_hat_min"), measured(&small, "eps_hat_min"));
    v.record(
        "AC8 scaling covariance",
        matched == eb.len() && matched > 1 && worst_gap <= SCALING_REL && min_a > 0.0 && min_b > 0.0,
        format!("{matched} matched times, max relative gap {worst_gap:.3e}; min ε̂ {min_a:.4}, {min_b:.4}"),
    );

    // 9. construction suite
    let patches = construction.measured["patches"].as_array().cloned().unwrap_or_default();
    let initial: Vec<f64> = patches
        .iter()
        .map(|p| {
            let k = p["k"].as_f64().unwrap();
            let k0 = p["max_k"].as_array().unwrap().iter().find(|q| q[0] == 0.0).unwrap()[1].as_f64().unwrap();
            (k0 / (2.0 * k * k) - 1.0).abs()
        })
        .collect();
    let at_half: Vec<f64> = patches
        .iter()
        .filter_map(|p| p["max_k"].as_array().unwrap().iter().find(|q| q[0] == 0.5).map(|q| q[1].as_f64().unwrap()))
        .collect();
    let monotone = at_half.len() == 3 && at_half.windows(2).all(|w| w[1] > w[0]);
    let sums: Vec<[f64; 3]> = serde_json::from_value(construction.measured["area_partial_sums"].clone()).unwrap();
    let area_gap = sums.iter().map(|s| (s[1] / s[2] - 1.0).abs()).fold(0.0, f64::max);
    let area_ok = sums.iter().all(|s| s[1] >= s[2]) && area_gap <= AREA_SERIES_REL;
    v.record(
        "AC9 construction suite",
        patches.len() == 3 && initial.iter().all(|&d| d <= PATCH_K2_REL) && monotone && area_ok,
        format!(
            "initial |max K/2k² - 1| {initial:.4?}; maxima at t = 0.5 {at_half:.4?}; area sums exceed the series bound by at most {area_gap:.4}"
        ),
    );

    // 10. disc about the mid-cylinder point
    let collapse = measured(&capped, "disc_first_collapse_time");
    let extinct = measured(&capped, "extinction_time");
    let disc_ok = capped.report("sucked_out_disc").is_some_and(|r| r.pass) && collapse < extinct;
    v.record(
        "AC10 sucked-out disc",
        disc_ok,
        format!(
            "area < {DISC_AREA} and sup u < {DISC_SUP_U} first at t = {collapse:.4}, extinction at {extinct:.4} (initial disc area {:.4})",
            measured(&capped, "disc_initial_area")
        ),
    );

    // 11. determinism
    let again_cigar = run_truncated_cigar(
        &CigarScenario { length: 40.0, horizon: 1.0, beta: SANDWICH_BETA, ..Default::default() },
        None,
        0,
    )
    .unwrap();
    let again_round = run_sphere(&sphere, false, None, 0).unwrap();
    let again_cons = run_construction_suite(&cons.spec().unwrap(), &cons.t_checks, None).unwrap();
    let same =
        csv(&exact) == csv(&again_cigar) && csv(&round) == csv(&again_round) && csv(&construction) == csv(&again_cons);
    v.record(
        "AC11 determinism",
        same && !csv(&exact).is_empty(),
        format!("run.csv bit-identical across repeated cigar, sphere and construction runs: {same}"),
    );

    let failed: Vec<&str> = v.0.iter().filter(|(_, p)| !p).map(|(n, _)| n.as_str()).collect();
    println!("{} of {} criteria passed", v.0.len() - failed.len(), v.0.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
