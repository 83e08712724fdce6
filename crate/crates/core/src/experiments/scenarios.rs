use std::f64::consts::LN_2;
use std::sync::Arc;

use super::config::ScenarioConfig;
use super::report::{Report, SampleRow, Series};
use super::Scenario;
use crate::carleson::{carleson_norm, carleson_norm_within, Density, MultiscaleSample};
use crate::coefficients::{
    mean_matrix, oscillation_carleson_norm, oscillation_profile, CoefficientField, FieldSpec, Oscillation,
    SampledField,
};
use crate::error::{Error, Result};
use crate::functionals::{beta_field, decay_contraction_scan, second_deriv_density};
use crate::geometry::{surface_ball_measure, DyadicNet, HalfSpaceGrid, Region};
use crate::oracles::counterexample::{
    avg_b, avg_b_displayed, beta_closed, counterexample_carleson_lower, counterexample_profile,
    dkp_constant_estimate, strip_kappa, CounterexampleFamily, DkpConstant,
};
use crate::oracles::sinh::{green_boundary_data, SinhTestSolution};
use crate::solver::{assemble_sampled, diagnostics, solve, BoundaryData, DiscreteSolution, SolverSettings};

/// Least-squares line `y = a x + b` and its `R²`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / a.abs().max(b.abs())
    }
}

/// Spread `max / min` of nonnegative values; 1 when all vanish.
fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        1.0
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn net_params(cfg: &ScenarioConfig, default_radius_factor: f64) -> Result<(Region, f64)> {
    let r = cfg.half_width()?;
    let r0 = cfg.f64_or("net.delta0_radius", default_radius_factor * r)?;
    let r_min = cfg.f64_or("net.r_min", r0 / 8.0)?;
    if !(r0 > 0.0 && r_min > 0.0) {
        return Err(Error::Config(format!("net.delta0_radius = {r0}, net.r_min = {r_min} must be positive")));
    }
    Ok((Region::surface_ball([0.0, 0.0], r0), r_min))
}

fn make_net(d: usize, base: Region, r_min: f64, grid: &HalfSpaceGrid) -> Result<Arc<DyadicNet>> {
    let net = DyadicNet::new(d, base, r_min)?;
    net.check_resolved(grid)?;
    Ok(Arc::new(net))
}

fn boundary(cfg: &ScenarioConfig, spec: &FieldSpec, default_kind: &str, box_height: f64) -> Result<BoundaryData> {
    match cfg.str_or("data.kind", default_kind).as_str() {
        "linear" => Ok(BoundaryData::linear(box_height)),
        "sinh" => sinh_data(cfg, box_height),
        "green" => match spec {
            FieldSpec::Diagonal { profile, .. } => Ok(green_boundary_data(profile, box_height)),
            _ => Err(Error::Config("data.kind = green needs field.variant = diagonal".into())),
        },
        other => Err(Error::Config(format!("data.kind: unknown '{other}'"))),
    }
}

fn sinh_data(cfg: &ScenarioConfig, box_height: f64) -> Result<BoundaryData> {
    let s = SinhTestSolution::new(cfg.f64_or("data.eps", 0.05)?, cfg.f64_or("data.k", 2.0)?, box_height)?;
    Ok(s.boundary_data())
}

fn solve_on(field: &CoefficientField, grid: &HalfSpaceGrid, bc: &BoundaryData, settings: &SolverSettings) -> Result<(SampledField, DiscreteSolution)> {
    let sampled = field.sample_with(grid, settings.face_average.cell_sampling())?;
    let (op, rhs) = assemble_sampled(&sampled, bc, settings.face_average)?;
    let u = solve(&op, &rhs, settings)?;
    Ok((sampled, u))
}

fn record_grid(report: &mut Report, grid: &HalfSpaceGrid, settings: Option<&SolverSettings>) {
    report.provenance("grid", format!("d={} R={} h={}", grid.d(), grid.half_width(), grid.h()));
    if let Some(s) = settings {
        report.provenance("solver", format!("tol={} max_iter={} face_average={}", s.tol, s.max_iter, s.face_average.name()));
    }
}

fn rows(net: &DyadicNet, columns: &[(&MultiscaleSample, Density)]) -> Vec<SampleRow> {
    net.samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = SampleRow { x: s.center, r: s.radius, weight: s.weight, ..Default::default() };
            for (sample, label) in columns {
                let v = Some(sample.values()[i]);
                match label {
                    Density::Beta => row.beta = v,
                    Density::GammaSq => row.gamma2 = v,
                    Density::Alpha2Sq => row.alpha2_sq = v,
                    Density::TildeAlphaSq => row.tilde_alpha_sq = v,
                    _ => {}
                }
            }
            row
        })
        .collect()
}

fn build_field(spec: &FieldSpec, d: usize, grid: &HalfSpaceGrid, base: &Region, r_min: f64) -> Result<CoefficientField> {
    spec.build(d, Some((grid, base, r_min)))
}

pub(super) fn theorem1(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let spec = cfg.field_spec("smooth_dkp", cfg.seed()?)?;
    let grid = cfg.grid(128, 1.0)?;
    let fine_grid = cfg.grid(128, 0.5)?;
    let (base, r_min) = net_params(cfg, 0.5)?;
    let kind = cfg.box_kind()?;
    let settings = cfg.solver()?;
    let bc = boundary(cfg, &spec, "linear", grid.half_width())?;
    let refine = cfg.bool_or("theorem1.refine", true)?;
    let tolerance = cfg.f64_or("theorem1.tolerance", 0.15)?;
    let field = build_field(&spec, d, &grid, &base, r_min)?;

    let mut report = Report::new(Scenario::Theorem1.name(), d);
    record_grid(&mut report, &grid, Some(&settings));
    let net = make_net(d, base, r_min, &grid)?;
    let (sampled, u) = solve_on(&field, &grid, &bc, &settings)?;
    let beta = beta_field(&u, net.clone(), kind)?;
    let norm = carleson_norm(&beta)?;
    report.set_norm(&norm, d);
    report.headline("beta_norm", norm.norm);
    report.headline("solver_iterations", u.iterations() as f64);
    report.check("beta_norm_finite", norm.norm, f64::INFINITY, norm.norm.is_finite());
    report.check("beta_at_most_one", beta.max_value(), 1.0, beta.max_value() <= 1.0);

    let alpha = oscillation_profile(&field, &sampled, net.clone(), Oscillation::Alpha2Sq)?;
    let gamma = oscillation_profile(&field, &sampled, net.clone(), Oscillation::GammaSq(kind))?;
    let alpha_norm = carleson_norm(&alpha)?.norm;
    report.headline("alpha2_sq_norm", alpha_norm);
    report.headline("gamma2_norm", carleson_norm(&gamma)?.norm);
    report.headline("beta_over_one_plus_alpha", norm.norm / (1.0 + alpha_norm));
    let mut columns = vec![(&beta, Density::Beta), (&gamma, Density::GammaSq), (&alpha, Density::Alpha2Sq)];
    let tilde = match oscillation_profile(&field, &sampled, net.clone(), Oscillation::TildeAlphaSq) {
        Ok(t) => Some(t),
        Err(Error::GradientUnavailable(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(t) = &tilde {
        report.headline("tilde_alpha_sq_norm", carleson_norm(t)?.norm);
        columns.push((t, Density::TildeAlphaSq));
    }
    report.samples = rows(&net, &columns);

    if u.maximum_principle_holds().is_some() {
        let r = 0.5 * base.radius;
        let diag = diagnostics(&u, base.center, r, kind)?;
        report.headline("corkscrew_ratio", diag.corkscrew);
        report.headline("harnack_ratio", diag.harnack);
        report.headline("caccioppoli_ratio", diag.caccioppoli);
    }

    if refine {
        let fine_net = make_net(d, base, 0.5 * r_min, &fine_grid)?;
        let (_, fine_u) = solve_on(&field, &fine_grid, &bc, &settings)?;
        let fine_norm = carleson_norm(&beta_field(&fine_u, fine_net, kind)?)?.norm;
        let change = relative_change(norm.norm, fine_norm);
        report.headline("beta_norm_refined", fine_norm);
        report.headline("relative_change", change);
        report.check("refinement_stability", change, tolerance, change < tolerance);
        let mut s = Series::new("theorem1_refinement", &["h", "r_min", "beta_norm"]);
        s.push(vec![grid.h(), r_min, norm.norm]);
        s.push(vec![fine_grid.h(), 0.5 * r_min, fine_norm]);
        report.series.push(s);
    }
    Ok(report)
}

pub(super) fn theorem2_tau(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let spec = cfg.field_spec("constant", cfg.seed()?)?;
    let grid = cfg.grid(512, 1.0)?;
    let r = grid.half_width();
    let (base, r_min) = {
        let r0 = cfg.f64_or("net.delta0_radius", 0.5 * r)?;
        (Region::surface_ball([0.0, 0.0], r0), cfg.f64_or("net.r_min", r0 / 32.0)?)
    };
    let kind = cfg.box_kind()?;
    let settings = cfg.solver()?;
    let bc = boundary(cfg, &spec, "sinh", r)?;
    let taus = cfg.f64_list_or("theorem2.taus", &[0.5, 0.25, 0.125, 0.0625])?;
    let field = build_field(&spec, d, &grid, &base, r_min)?;

    let mut report = Report::new(Scenario::Theorem2Tau.name(), d);
    record_grid(&mut report, &grid, Some(&settings));
    let net = make_net(d, base, r_min, &grid)?;
    let (_, u) = solve_on(&field, &grid, &bc, &settings)?;
    let beta = beta_field(&u, net.clone(), kind)?;
    let full = carleson_norm(&beta)?;
    report.set_norm(&full, d);
    report.samples = rows(&net, &[(&beta, Density::Beta)]);

    let mut series = Series::new("theorem2_tau", &["tau", "beta_norm"]);
    let mut norms = Vec::new();
    for &tau in &taus {
        let radius = tau * base.radius;
        if !(tau > 0.0 && tau <= 1.0) || radius < net.finest_radius() * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "τ = {tau}: ball radius {radius} is below the finest net radius {}",
                net.finest_radius()
            )));
        }
        let n = carleson_norm_within(&beta, &Region::surface_ball(base.center, radius))?.norm;
        report.headline(format!("beta_norm_tau_{tau}"), n);
        series.push(vec![tau, n]);
        norms.push(n);
    }
    report.series.push(series);
    let decreasing = norms.windows(2).all(|w| w[1] < w[0]);
    let worst = norms.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    report.check("norm_decreases_with_tau", worst, 1.0, decreasing);
    let positive: Vec<(f64, f64)> = taus.iter().zip(&norms).filter(|(_, n)| **n > 0.0).map(|(t, n)| (t.ln(), n.ln())).collect();
    if positive.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        let (a, _, r2) = linear_fit(&x, &y);
        report.fitted_constants.insert("exponent_a".into(), a);
        report.headline("loglog_r2", r2);
        report.check("decay_exponent_positive", a, 0.0, a > 0.0);
    } else {
        report.check("decay_exponent_positive", f64::NAN, 0.0, false);
    }
    Ok(report)
}

pub(super) fn decay(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let grid = cfg.grid(256, 1.0)?;
    let r = grid.half_width();
    let (base, r_min) = net_params(cfg, 0.5)?;
    let kind = cfg.box_kind()?;
    let settings = cfg.solver()?;
    let taus = cfg.f64_list_or("decay.taus", &[0.25, 0.125, 0.0625])?;
    let seeds = cfg.u64_list_or("decay.seeds", &[1, 2, 3, 4, 5])?;
    let r_floor = cfg.f64_or("decay.r_floor_cells", 32.0)? * grid.h();
    let max_spread = cfg.f64_or("decay.spread", 2.0)?;
    let net = DyadicNet::new(d, base, r_min)?;
    net.check_resolved(&grid)?;

    let mut report = Report::new(Scenario::Decay.name(), d);
    record_grid(&mut report, &grid, Some(&settings));
    report.truncation.r_min = Some(net.finest_radius());
    report.provenance("r_floor", r_floor);

    // Constant coefficients with sinh data: C must vanish.
    let identity = CoefficientField::identity(d);
    let (sampled, u) = solve_on(&identity, &grid, &sinh_data(cfg, r)?, &settings)?;
    let fits = decay_contraction_scan(&u, &sampled, &net, &taus, kind, r_floor)?;
    let mut series = Series::new("decay_fits", &["seed", "tau", "fitted_c", "max_residual"]);
    for f in &fits {
        report.headline(format!("constant_c_tau_{}", f.tau), f.fitted_c);
        report.headline(format!("constant_max_residual_tau_{}", f.tau), f.max_residual);
        series.push(vec![-1.0, f.tau, f.fitted_c, f.max_residual]);
        if f.tau == 0.25 {
            report.check("constant_coefficients_c_zero_tau_0.25", f.fitted_c, 0.0, f.fitted_c == 0.0);
        }
    }
    report.headline("admissible_samples", fits[0].admissible as f64);

    let mut per_tau: Vec<Vec<f64>> = vec![Vec::new(); taus.len()];
    for &seed in &seeds {
        let spec = cfg.field_spec("smooth_dkp", Some(seed))?;
        let field = build_field(&spec, d, &grid, &base, r_min)?;
        let bc = boundary(cfg, &spec, "linear", r)?;
        let (sampled, u) = solve_on(&field, &grid, &bc, &settings)?;
        let fits = decay_contraction_scan(&u, &sampled, &net, &taus, kind, r_floor)?;
        for (i, f) in fits.iter().enumerate() {
            per_tau[i].push(f.fitted_c);
            report.headline(format!("seed_{seed}_c_tau_{}", f.tau), f.fitted_c);
            series.push(vec![seed as f64, f.tau, f.fitted_c, f.max_residual]);
        }
    }
    for (tau, cs) in taus.iter().zip(&per_tau) {
        let max = cs.iter().copied().fold(0.0, f64::max);
        report.fitted_constants.insert(tau.to_string(), max);
        let finite = cs.iter().all(|c| c.is_finite());
        let s = spread(cs);
        report.check(format!("fitted_c_finite_tau_{tau}"), max, f64::INFINITY, finite);
        report.check(format!("fitted_c_spread_tau_{tau}"), s, max_spread, s <= max_spread);
    }
    report.series.push(series);
    Ok(report)
}

pub(super) fn gamma_vs_alpha(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let grid = cfg.grid(512, 1.0)?;
    let (base, r_min) = net_params(cfg, 0.2)?;
    let big = base.scaled(3.0);
    let kind = cfg.box_kind()?;
    let seeds = cfg.u64_list_or("gamma.seeds", &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10])?;
    let targets = cfg.f64_list_or("gamma.targets", &[0.01, 0.1, 1.0])?;
    let max_spread = cfg.f64_or("gamma.spread", 20.0)?;
    let face = cfg.solver()?.face_average;
    make_net(d, base, r_min, &grid)?;
    make_net(d, big, r_min, &grid)?;

    let mut report = Report::new(Scenario::GammaVsAlpha.name(), d);
    record_grid(&mut report, &grid, None);
    report.truncation.r_min = Some(r_min);
    let mut series = Series::new("gamma_vs_alpha", &["seed", "target_n2", "gamma_norm", "alpha_norm_3delta0", "ratio"]);
    let mut ratios = Vec::new();
    let mut best: Option<(f64, crate::carleson::CarlesonNorm)> = None;
    for &seed in &seeds {
        for &target in &targets {
            let spec = match cfg.field_spec("smooth_dkp", Some(seed))? {
                FieldSpec::SmoothDkp { params, .. } => FieldSpec::SmoothDkp { params, target_n2: Some(target) },
                _ => return Err(Error::Config("gamma-vs-alpha needs field.variant = smooth_dkp".into())),
            };
            let field = spec.build(d, Some((&grid, &big, r_min)))?;
            let sampled = field.sample_with(&grid, face.cell_sampling())?;
            let alpha = oscillation_carleson_norm(&field, &sampled, &big, Oscillation::Alpha2Sq, r_min)?;
            let gamma = oscillation_carleson_norm(&field, &sampled, &base, Oscillation::GammaSq(kind), r_min)?;
            let ratio = gamma.norm / alpha.norm;
            series.push(vec![seed as f64, target, gamma.norm, alpha.norm, ratio]);
            ratios.push(ratio);
            if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
                best = Some((ratio, gamma));
            }
        }
    }
    let (max_ratio, gamma) = best.expect("nonempty sweep");
    report.set_norm(&gamma, d);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    report.fitted_constants.insert("gamma_over_alpha".into(), max_ratio);
    report.headline("ratio_max", max_ratio);
    report.headline("ratio_min", min_ratio);
    let s = spread(&ratios);
    report.check("ratio_finite", max_ratio, f64::INFINITY, max_ratio.is_finite());
    report.check("ratio_spread", s, max_spread, s <= max_spread);
    report.series.push(series);
    Ok(report)
}

pub(super) fn counterexample(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let ns: Vec<u32> = cfg
        .f64_list_or("counterexample.n", &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])?
        .into_iter()
        .map(|n| if n >= 1.0 && n.fract() == 0.0 { Ok(n as u32) } else { Err(Error::Config(format!("counterexample.n: {n}"))) })
        .collect::<Result<_>>()?;
    let n_max = *ns.iter().max().unwrap();
    let c0 = cfg.f64_or("counterexample.c0", 0.0)?;
    let r0 = cfg.f64_or("counterexample.R0", 1.0)?;
    let r_min = cfg.f64_or("counterexample.r_min", r0 * 4f64.powi(-(n_max as i32)))?;
    let dkp_c0 = cfg.f64_or("counterexample.dkp_c0", 1.0 / 32.0)?;
    let min_r2 = cfg.f64_or("counterexample.min_r2", 0.98)?;

    let mut report = Report::new(Scenario::Counterexample.name(), d);
    report.provenance("density", "exact pencil-box β_n(r), x-independent");
    let base = Region::surface_ball([0.0, 0.0], r0);
    let net = Arc::new(DyadicNet::new(d, base, r_min)?);
    report.truncation.r_min = Some(net.finest_radius());

    let mut series = Series::new("counterexample_norms", &["n", "beta_norm", "lower_bound", "witness", "dkp", "dkp_reference"]);
    let mut norms = Vec::new();
    let mut dkps = Vec::new();
    let kappa = strip_kappa();
    report.headline("kappa", kappa);
    for &n in &ns {
        let fam = CounterexampleFamily::new(n, c0)?;
        let profile = counterexample_profile(&fam)?;
        let level_beta: Vec<f64> = net.levels().iter().map(|l| beta_closed(&profile, l.radius)).collect();
        let values = net.samples().iter().map(|s| level_beta[s.level - 1]).collect();
        let sample = MultiscaleSample::new(net.clone(), values, Density::Beta)?;
        let norm = carleson_norm(&sample)?;
        let lower = fam.beta_floor() * ((2.0 * n as f64 - 2.0) * LN_2 + r0.ln());
        report.check(format!("beta_norm_lower_bound_n_{n}"), norm.norm, lower, norm.norm >= lower);
        report.headline(format!("beta_norm_n_{n}"), norm.norm);
        let witness = if r_min <= fam.lower_bound_start() {
            counterexample_carleson_lower(&fam, &profile, d, r0, r_min)? / surface_ball_measure(d, 1.0)
        } else {
            f64::NAN
        };
        report.headline(format!("witness_n_{n}"), witness);

        let dkp_fam = CounterexampleFamily::new(n, dkp_c0)?;
        let dkp = dkp_constant_estimate(&dkp_fam)?.value();
        let reference = kappa * (2.0 * n as f64 + 100.0) / dkp_c0;
        let ratio = dkp / reference;
        report.check(format!("dkp_band_n_{n}"), ratio, 4.0, (0.25..=4.0).contains(&ratio));
        report.headline(format!("dkp_n_{n}"), dkp);
        series.push(vec![n as f64, norm.norm, lower, witness, dkp, reference]);
        norms.push(norm.norm);
        dkps.push(dkp);
        if n == n_max {
            report.set_norm(&norm, d);
            report.headline("avg_b_r1", avg_b(&profile, 1.0));
            report.headline("avg_b_displayed_r1", avg_b_displayed(&fam, 1.0));
            let mut beta_series = Series::new("counterexample_beta", &["r", "beta"]);
            for (level, b) in net.levels().iter().zip(&level_beta) {
                beta_series.push(vec![level.radius, *b]);
                let total: f64 = net.level_samples(level).iter().map(|s| s.weight).sum();
                report.samples.push(SampleRow { r: level.radius, beta: Some(*b), weight: total, ..Default::default() });
            }
            report.series.push(beta_series);
        }
    }
    report.series.push(series);

    if ns.len() >= 2 {
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let (slope, _, r2) = linear_fit(&x, &norms);
        report.fitted_constants.insert("beta_norm_slope".into(), slope);
        report.headline("beta_norm_fit_r2", r2);
        report.check("beta_norm_slope_positive", slope, 0.0, slope > 0.0);
        report.check("beta_norm_fit_r2", r2, min_r2, r2 > min_r2);
        let (dslope, _, dr2) = linear_fit(&x, &dkps);
        report.fitted_constants.insert("dkp_slope".into(), dslope);
        report.headline("dkp_fit_r2", dr2);
        report.check("dkp_slope_positive", dslope, 0.0, dslope > 0.0);
        report.check("dkp_affine_r2", dr2, min_r2, dr2 > min_r2);
    }
    let sentinel = dkp_constant_estimate(&CounterexampleFamily::new(n_max, 0.0)?)?;
    report.check("dkp_infinite_without_smoothing", sentinel.value(), f64::INFINITY, sentinel == DkpConstant::Infinite);
    Ok(report)
}

pub(super) fn corollary2(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let spec = cfg.field_spec("diagonal", cfg.seed()?)?;
    let default_data = if matches!(spec, FieldSpec::Diagonal { .. }) { "green" } else { "linear" };
    let grid = cfg.grid(128, 1.0)?;
    let fine_grid = cfg.grid(128, 0.5)?;
    let (base, r_min) = net_params(cfg, 0.5)?;
    let settings = cfg.solver()?;
    let bc = boundary(cfg, &spec, default_data, grid.half_width())?;
    let tolerance = cfg.f64_or("corollary.tolerance", 0.2)?;
    let field = build_field(&spec, d, &grid, &base, r_min)?;

    let mut report = Report::new(Scenario::Corollary2.name(), d);
    record_grid(&mut report, &grid, Some(&settings));
    let net = make_net(d, base, r_min, &grid)?;

    let linear = DiscreteSolution::from_fn(grid.clone(), |p| p.t)?;
    let zero = carleson_norm(&second_deriv_density(&linear)?.to_multiscale(net.clone())?)?.norm;
    report.check("linear_solution_density_zero", zero, 0.0, zero == 0.0);

    let (_, u) = solve_on(&field, &grid, &bc, &settings)?;
    let coarse = carleson_norm(&second_deriv_density(&u)?.to_multiscale(net.clone())?)?;
    let (_, fine_u) = solve_on(&field, &fine_grid, &bc, &settings)?;
    let fine = carleson_norm(&second_deriv_density(&fine_u)?.to_multiscale(net.clone())?)?;
    report.set_norm(&coarse, d);
    report.headline("density_norm", coarse.norm);
    report.headline("density_norm_refined", fine.norm);
    let change = relative_change(coarse.norm, fine.norm);
    report.headline("relative_change", change);
    report.check("density_norm_finite", coarse.norm, f64::INFINITY, coarse.norm.is_finite() && fine.norm.is_finite());
    report.check("refinement_stability", change, tolerance, change < tolerance);
    let mut s = Series::new("corollary2_refinement", &["h", "density_norm"]);
    s.push(vec![grid.h(), coarse.norm]);
    s.push(vec![fine_grid.h(), fine.norm]);
    report.series.push(s);
    Ok(report)
}

pub(super) fn convergence(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let r = cfg.half_width()?;
    let spec = cfg.field_spec("diagonal", cfg.seed()?)?;
    let FieldSpec::Diagonal { profile, .. } = &spec else {
        return Err(Error::Config("convergence needs field.variant = diagonal".into()));
    };
    let cells = cfg.f64_list_or("convergence.cells", &[64.0, 128.0, 256.0])?;
    let min_order = cfg.f64_or("convergence.min_order", 1.8)?;
    let settings = cfg.solver()?;
    let field = spec.build(d, None)?;
    let bc = green_boundary_data(profile, r);
    let scale = 1.0 / profile.g(r);

    let mut report = Report::new(Scenario::Convergence.name(), d);
    report.provenance("solver", format!("tol={} face_average={}", settings.tol, settings.face_average.name()));
    let mut series = Series::new("convergence", &["h", "linf_error", "iterations"]);
    let mut errors = Vec::new();
    let mut hs = Vec::new();
    for &n in &cells {
        let grid = HalfSpaceGrid::new(d, r, r / n).map_err(|e| Error::Config(e.to_string()))?;
        let (_, u) = solve_on(&field, &grid, &bc, &settings)?;
        let p = profile.clone();
        let exact = DiscreteSolution::from_fn(grid.clone(), move |x| p.g(x.t) * scale)?;
        let err = u.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        report.headline(format!("linf_error_h_{}", grid.h()), err);
        series.push(vec![grid.h(), err, u.iterations() as f64]);
        errors.push(err);
        hs.push(grid.h());
    }
    report.series.push(series);
    let orders: Vec<f64> = errors.windows(2).zip(hs.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect();
    for (i, o) in orders.iter().enumerate() {
        report.headline(format!("order_{i}"), *o);
    }
    let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
    report.fitted_constants.insert("min_order".into(), worst);
    report.check("observed_order", worst, min_order, worst >= min_order);
    Ok(report)
}

pub(super) fn comparison(cfg: &ScenarioConfig) -> Result<Report> {
    let d = cfg.d()?;
    let grid = cfg.grid(256, 1.0)?;
    let r = grid.half_width();
    let seeds = cfg.u64_list_or("comparison.seeds", &[1, 2, 3, 4, 5])?;
    let slack = cfg.f64_or("comparison.slack", 1.5)?;
    let settings = cfg.solver()?;
    let whole = Region::pencil_box([0.0, 0.0], r);
    let (base, r_min) = net_params(cfg, 0.5)?;

    let mut report = Report::new(Scenario::Comparison.name(), d);
    record_grid(&mut report, &grid, Some(&settings));
    report.provenance("box", whole.to_string());
    let mut series =
        Series::new("comparison", &["seed", "lhs", "rhs_u", "rhs_u0", "bound", "energy_ratio"]);
    let vol = grid.cell_volume();
    let dim = d + 1;
    for &seed in &seeds {
        let spec = cfg.field_spec("smooth_dkp", Some(seed))?;
        let field = build_field(&spec, d, &grid, &base, r_min)?;
        let mu0 = field.mu0();
        let bc = boundary(cfg, &spec, "linear", r)?;
        let (sampled, u) = solve_on(&field, &grid, &bc, &settings)?;
        let a0 = mean_matrix(&sampled, &whole)?;
        let flat = sampled.constant_like(a0);
        let (op, rhs) = assemble_sampled(&flat, &bc, settings.face_average)?;
        let u0 = solve(&op, &rhs, &settings)?;
        let (mut lhs, mut rhs_u, mut rhs_0, mut e_u, mut e_0) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, (g, g0)) in u.gradients().iter().zip(u0.gradients()).enumerate() {
            let dist = sampled.cells()[k].dist_sq(&a0);
            let (mut n, mut n0, mut diff) = (0.0, 0.0, 0.0);
            for a in 0..dim {
                n += g[a] * g[a];
                n0 += g0[a] * g0[a];
                diff += (g[a] - g0[a]).powi(2);
            }
            lhs += diff;
            rhs_u += dist * n;
            rhs_0 += dist * n0;
            e_u += n;
            e_0 += n0;
        }
        let (lhs, rhs_u, rhs_0) = (lhs * vol, rhs_u * vol, rhs_0 * vol);
        let bound = slack * mu0 * mu0 * rhs_u.min(rhs_0);
        let ratio = e_u / e_0;
        report.check(format!("comparison_seed_{seed}"), lhs, bound, lhs <= bound);
        let (lo, hi) = (mu0.powi(-4), mu0.powi(4));
        report.check(format!("energy_ratio_seed_{seed}"), ratio, hi, ratio >= lo && ratio <= hi);
        report.headline(format!("lhs_over_min_rhs_seed_{seed}"), lhs / rhs_u.min(rhs_0));
        series.push(vec![seed as f64, lhs, rhs_u, rhs_0, bound, ratio]);
    }
    report.series.push(series);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let (a, b, r2) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((a - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spread_handles_zeros() {
        assert_eq!(spread(&[0.0, 0.0]), 1.0);
        assert_eq!(spread(&[0.0, 1.0]), f64::INFINITY);
        assert_eq!(spread(&[1.0, 3.0]), 3.0);
    }
}
