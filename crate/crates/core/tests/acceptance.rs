//! Acceptance criteria 1-11, one PASS/FAIL line each.
//!
//! Scenario-backed criteria run the shipped presets in `configs/`. The run
//! exits nonzero on a FAIL only when `ACCEPTANCE_STRICT=1`; otherwise the
//! verdicts are reported and the process exits cleanly.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use carleson_core::carleson::hardy_check;
use carleson_core::coefficients::{smooth_step_profile, CoefficientField, SmoothDkp, SmoothDkpParams};
use carleson_core::experiments::{run, Report, Scenario, ScenarioConfig};
use carleson_core::functionals::{affine_defect, box_functionals, BETA_SLACK};
use carleson_core::geometry::{BoxKind, HalfSpaceGrid};
use carleson_core::oracles::counterexample::{dkp_constant_estimate, strip_kappa, CounterexampleFamily, DkpConstant};
use carleson_core::oracles::sinh::{green_boundary_data, SinhTestSolution};
use carleson_core::solver::{solve_dirichlet, BoundaryData, DiscreteSolution, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// β values seen by any criterion, checked by criterion 4.
#[derive(Default)]
struct Seen {
    betas: Vec<f64>,
}

impl Seen {
    fn collect(&mut self, report: &Report) {
        self.betas.extend(report.samples.iter().filter_map(|s| s.beta));
    }
}

fn preset(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.conf"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let scenario = text
        .lines()
        .find_map(|l| l.trim().strip_prefix("scenario").and_then(|r| r.trim().strip_prefix('=')))
        .map(|s| Scenario::parse(s.trim()).unwrap())
        .unwrap_or_else(|| panic!("{name}: no scenario key"));
    ScenarioConfig::parse(scenario, &text).unwrap()
}

fn run_preset(name: &str, seen: &mut Seen) -> Result<Report, String> {
    let report = run(&preset(name)).map_err(|e| format!("{name}: {e}"))?;
    seen.collect(&report);
    Ok(report)
}

fn failed(report: &Report) -> String {
    let names: Vec<String> = report
        .failed_checks()
        .iter()
        .map(|c| format!("{} (value {:.4e}, bound {:.4e})", c.name, c.value, c.bound))
        .collect();
    names.join("; ")
}

fn checks_outcome(report: &Report, summary: String) -> Outcome {
    if report.passed() {
        Outcome::new(true, summary)
    } else {
        Outcome::new(false, format!("{summary}; failed: {}", failed(report)))
    }
}

fn within(elapsed: Duration, limit_s: u64, mut o: Outcome) -> Outcome {
    o.detail.push_str(&format!(" [{:.1}s, limit {limit_s}s]", elapsed.as_secs_f64()));
    if elapsed.as_secs_f64() > limit_s as f64 {
        o.pass = false;
    }
    o
}

fn counterexample_blowup(seen: &mut Seen) -> Outcome {
    let start = Instant::now();
    let report = match run_preset("counterexample", seen) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e),
    };
    let bounds: Vec<_> = report.checks.iter().filter(|c| c.name.starts_with("beta_norm_")).collect();
    let pass = bounds.iter().all(|c| c.pass) && bounds.len() == 9;
    let slope = report.fitted_constants["beta_norm_slope"];
    let r2 = report.headline["beta_norm_fit_r2"];
    within(
        start.elapsed(),
        10,
        Outcome::new(pass, format!("norm(n=8) {:.4}, slope {slope:.4}, R² {r2:.6}", report.carleson_norm.unwrap())),
    )
}

fn dkp_growth() -> Outcome {
    let start = Instant::now();
    let c0 = 1.0 / 32.0;
    let kappa = strip_kappa();
    let mut ns = Vec::new();
    let mut values = Vec::new();
    let mut in_band = true;
    for n in 2..=8u32 {
        let v = dkp_constant_estimate(&CounterexampleFamily::new(n, c0).unwrap()).unwrap().value();
        let reference = kappa * (2.0 * n as f64 + 100.0) / c0;
        in_band &= (0.25..=4.0).contains(&(v / reference));
        ns.push(n as f64);
        values.push(v);
    }
    let (slope, r2) = fit(&ns, &values);
    let sentinel = dkp_constant_estimate(&CounterexampleFamily::new(4, 0.0).unwrap()).unwrap() == DkpConstant::Infinite;
    let pass = in_band && slope > 0.0 && r2 > 0.98 && sentinel;
    within(
        start.elapsed(),
        5,
        Outcome::new(pass, format!("slope {slope:.4}, R² {r2:.6}, in band {in_band}, c0=0 infinite {sentinel}")),
    )
}

fn fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (sxy / sxx, if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) })
}

fn green_convergence(seen: &mut Seen) -> Outcome {
    let start = Instant::now();
    match run_preset("convergence", seen) {
        Ok(r) => within(
            start.elapsed(),
            180,
            checks_outcome(&r, format!("min order {:.4}", r.fitted_constants["min_order"])),
        ),
        Err(e) => Outcome::new(false, e),
    }
}

fn orthogonality(seen: &mut Seen) -> Outcome {
    let settings = SolverSettings::default();
    let mut solutions: Vec<DiscreteSolution> = Vec::new();
    let g1 = HalfSpaceGrid::with_resolution(1, 1.0, 64).unwrap();
    solutions.push(SinhTestSolution::new(0.05, 2.0, 1.0).unwrap().sample(&g1).unwrap());
    for seed in [11, 12] {
        let field = CoefficientField::smooth_dkp(SmoothDkp::new(SmoothDkpParams::new(1, seed)).unwrap());
        solutions.push(solve_dirichlet(&field, &g1, &BoundaryData::linear(1.0), &settings).unwrap());
    }
    let profile = smooth_step_profile(1.0, 2.0, 0.0625, 0.25).unwrap();
    let diag = CoefficientField::diagonal_profile(1, profile.clone(), 2.0).unwrap();
    solutions.push(solve_dirichlet(&diag, &g1, &green_boundary_data(&profile, 1.0), &settings).unwrap());
    let g2 = HalfSpaceGrid::with_resolution(2, 1.0, 16).unwrap();
    let field = CoefficientField::smooth_dkp(SmoothDkp::new(SmoothDkpParams::new(2, 13)).unwrap());
    solutions.push(solve_dirichlet(&field, &g2, &BoundaryData::linear(1.0), &settings).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut triples = 0;
    while triples < 100 {
        let u = &solutions[rng.gen_range(0..solutions.len())];
        let d = u.grid().d();
        let kind = if rng.gen_bool(0.5) { BoxKind::HalfBall } else { BoxKind::Pencil };
        let r = rng.gen_range(0.2..0.6);
        let mut x = [0.0; 2];
        for xi in x.iter_mut().take(d) {
            *xi = rng.gen_range(-0.4..0.4);
        }
        let region = kind.region(x, r);
        if !u.grid().contains(&region) {
            continue;
        }
        let lambda = rng.gen_range(-3.0..3.0);
        let f = box_functionals(u, &region).unwrap();
        let lhs = affine_defect(u, &region, lambda).unwrap();
        let rhs = (lambda - f.lambda).powi(2) + f.nonaffine;
        worst = worst.max((lhs - rhs).abs() / lhs);
        seen.betas.push(f.beta);
        triples += 1;
    }
    let max_beta = seen.betas.iter().copied().fold(0.0, f64::max);
    let pass = worst < 1e-10 && max_beta <= 1.0 + BETA_SLACK;
    Outcome::new(
        pass,
        format!(
            "worst relative residual {worst:.2e} over {triples} triples; max β {max_beta:.6} over {} samples",
            seen.betas.len()
        ),
    )
}

fn comparison(seen: &mut Seen) -> Outcome {
    let start = Instant::now();
    match run_preset("comparison", seen) {
        Ok(r) => {
            let worst = r.headline.iter().filter(|(k, _)| k.starts_with("lhs_over")).map(|(_, v)| *v).fold(0.0, f64::max);
            within(start.elapsed(), 300, checks_outcome(&r, format!("max lhs/min(rhs) {worst:.4e}")))
        }
        Err(e) => Outcome::new(false, e),
    }
}

fn gamma_vs_alpha(seen: &mut Seen) -> Outcome {
    match run_preset("gamma-vs-alpha", seen) {
        Ok(r) => checks_outcome(
            &r,
            format!("ratio max {:.4}, min {:.4}", r.headline["ratio_max"], r.headline["ratio_min"]),
        ),
        Err(e) => Outcome::new(false, e),
    }
}

fn decay(seen: &mut Seen) -> Outcome {
    match run_preset("decay", seen) {
        Ok(r) => {
            let cs: Vec<String> =
                r.fitted_constants.iter().map(|(tau, c)| format!("C({tau}) {c:.3e}")).collect();
            checks_outcome(&r, format!("max over seeds {}", cs.join(", ")))
        }
        Err(e) => Outcome::new(false, e),
    }
}

fn theorem1(seen: &mut Seen) -> Outcome {
    match run_preset("theorem1", seen) {
        Ok(r) => checks_outcome(
            &r,
            format!(
                "β norm {:.4e} -> {:.4e}, change {:.3}",
                r.carleson_norm.unwrap(),
                r.headline["beta_norm_refined"],
                r.headline["relative_change"]
            ),
        ),
        Err(e) => Outcome::new(false, e),
    }
}

fn theorem2(seen: &mut Seen) -> Outcome {
    match run_preset("theorem2-tau", seen) {
        Ok(r) => checks_outcome(&r, format!("exponent a {:.4}", r.fitted_constants["exponent_a"])),
        Err(e) => Outcome::new(false, e),
    }
}

fn corollary(seen: &mut Seen) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["corollary2", "corollary2-dkp"] {
        match run_preset(name, seen) {
            Ok(r) => {
                let o = checks_outcome(&r, format!("{name}: change {:.4}", r.headline["relative_change"]));
                pass &= o.pass;
                parts.push(o.detail);
            }
            Err(e) => {
                pass = false;
                parts.push(e);
            }
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn hardy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..200);
        let a: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
        let (lhs, rhs) = hardy_check(&a, 2.0).unwrap();
        worst = worst.max(lhs / rhs);
    }
    let mut a = vec![0.0; 10_000];
    a[0] = 1.0;
    let (lhs, rhs) = hardy_check(&a, 2.0).unwrap();
    let basel: f64 = (1..=10_000).map(|m| 1.0 / (m as f64).powi(2)).sum();
    let pass = worst <= 1.0 && lhs <= rhs && rhs == 4.0 && (lhs - basel).abs() < 1e-12;
    Outcome::new(pass, format!("worst lhs/rhs {worst:.4} on random sequences; witness {lhs:.6} <= {rhs}"))
}

fn main() {
    let mut seen = Seen::default();
    let order: [(u32, &str); 11] = [
        (1, "counterexample blow-up"),
        (2, "DKP-constant growth"),
        (3, "solver convergence to the Green profile"),
        (5, "comparison with constant coefficients"),
        (6, "γ² dominated by α₂²"),
        (7, "decay contraction"),
        (8, "β Carleson stability under refinement"),
        (9, "localized β norm decays in τ"),
        (10, "second-derivative density"),
        (11, "Hardy inequality"),
        (4, "orthogonality identity and β <= 1"),
    ];
    let mut results = Vec::new();
    for (id, label) in order {
        let start = Instant::now();
        let outcome = match id {
            1 => counterexample_blowup(&mut seen),
            2 => dkp_growth(),
            3 => green_convergence(&mut seen),
            4 => orthogonality(&mut seen),
            5 => comparison(&mut seen),
            6 => gamma_vs_alpha(&mut seen),
            7 => decay(&mut seen),
            8 => theorem1(&mut seen),
            9 => theorem2(&mut seen),
            10 => corollary(&mut seen),
            11 => hardy(),
            _ => unreachable!(),
        };
        eprintln!("criterion {id} done in {:.1}s", start.elapsed().as_secs_f64());
        results.push((id, label, outcome));
    }
    results.sort_by_key(|(id, _, _)| *id);
    let mut passed = 0;
    for (id, label, o) in &results {
        println!("criterion {id:>2} {}: {label}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        passed += o.pass as usize;
    }
    println!("{passed}/{} criteria passed", results.len());
    if passed < results.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
