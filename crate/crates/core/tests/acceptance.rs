use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use kondra::domains::{make_domain, Domain2D, DomainSpec, TrigPoly, Weight};
use kondra::fem::{apply_bc, assemble, manufactured_problem, solve, BoundaryData, FESpace, SolverKind};
use kondra::hardy::{hardy_trichotomy, Classification, TrichotomyConfig};
use kondra::lab::{self, ExperimentConfig, ExperimentKind, Fit, Report, Status};
use kondra::mesh::{grade_mesh, refine, Grading, Mesh};
use kondra::metric::{
    admissibility_probe, completeness_probe, conformal_symbol_check, random_samples, sample_grid, CoefficientField,
    ConformalMetric,
};
use kondra::wnorm::{relation_check, Field};
use kondra::{Point, Result};

/// Writes straight to stdout so the verdict line survives output capture.
fn verdict(n: usize, pass: bool, detail: &str) {
    let line = format!("criterion {n:>2}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn sector(omega: f64) -> Domain2D {
    make_domain(&DomainSpec::sector(omega)).unwrap()
}

fn run(text: &str, kind: ExperimentKind) -> Report {
    let cfg = ExperimentConfig::parse(text, kind).unwrap();
    let report = lab::execute(&cfg);
    assert_eq!(report.status, Status::Ok, "{:?}", report.error);
    report
}

const ORIGIN: Point = Point::ORIGIN;

#[test]
fn c01_conformal_symbol_invariance() {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let d = sector(3.0 * PI / 2.0);
    let samples = random_samples(&d, 1000, 1e-6, 11);
    let weights = [
        Weight::radial_power(1.0),
        Weight::radial_power(1.5),
        Weight::mollified(ORIGIN, 0.5),
    ];
    let fields = CoefficientField::catalog();
    assert_eq!(fields.len(), 5);
    let mut worst = 0.0f64;
    for (_, a) in &fields {
        for w in &weights {
            worst = worst.max(conformal_symbol_check(a, w, &samples).unwrap());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= TOL && elapsed < Duration::from_secs(1);
    verdict(
        1,
        pass,
        &format!("max deviation {worst:e} (tol {TOL:e}), {elapsed:?} (limit 1 s)"),
    );
    assert!(pass);
}

#[test]
fn c02_kondratiev_conformal_sobolev_relation() {
    const TOL0: f64 = 1e-12;
    const SPREAD1: f64 = 1.2;
    let start = Instant::now();
    let quarter = sector(PI / 2.0);
    let corner = sector(3.0 * PI / 2.0);
    let cusp = make_domain(&DomainSpec::cusp(2.0, -1.0, 1.0).with_lambda(2.0)).unwrap();
    let osc = make_domain(&DomainSpec::oscillating(
        TrigPoly::parse("0.3 + 0.2*sin(t)").unwrap(),
        TrigPoly::parse("1.2 + 0.2*cos(t)").unwrap(),
        4.0,
    ))
    .unwrap();
    let graded = Grading::new(0.2, 0.5);
    let r = Weight::radial_power;
    let cases: Vec<(&Domain2D, &str, Weight, Weight, f64)> = vec![
        (&quarter, "smooth", r(1.0), r(1.0), 2.0),
        (&quarter, "smooth", r(0.5), Weight::one(), 2.0),
        (&quarter, "quadratic", r(1.5), r(1.0), 3.0),
        (&quarter, "affine", r(1.0), r(0.5), 1.5),
        (&corner, "corner", r(1.0), r(1.0), 2.0),
        (&corner, "corner", r(0.5), r(0.25), 2.0),
        (&quarter, "smooth", Weight::mollified(ORIGIN, 1.0), Weight::one(), 4.0),
        (&quarter, "quadratic", r(2.0), r(2.0), 2.0),
        (&cusp, "cusp-chart", r(2.0), r(1.5), 2.0),
        (&osc, "smooth", r(1.0), r(1.0), 2.0),
    ];
    let opts = Default::default();
    let mut worst0 = 0.0f64;
    for (d, id, rho, f, p) in &cases {
        let mesh = grade_mesh(d, &graded).unwrap();
        let u = manufactured_problem(Some(d), id).unwrap();
        let rr = relation_check(&Field::Exact(&u), rho, f, 0, *p, Some(&mesh), &opts).unwrap();
        worst0 = worst0.max((rr.ratio() - 1.0).abs());
    }
    let mut worst1 = 1.0f64;
    for (d, id, rho, f) in [
        (&quarter, "smooth", r(1.0), r(1.0)),
        (&corner, "corner", r(1.0), r(1.0)),
        (&quarter, "quadratic", r(0.5), Weight::one()),
    ] {
        let mut mesh = grade_mesh(d, &graded).unwrap();
        let u = manufactured_problem(Some(d), id).unwrap();
        let mut ratios = Vec::new();
        for level in 0..4 {
            if level > 0 {
                mesh = refine(&mesh).unwrap();
            }
            let rr = relation_check(&Field::Exact(&u), &rho, &f, 1, 2.0, Some(&mesh), &opts).unwrap();
            ratios.push(rr.ratio());
        }
        let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
        let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
        worst1 = worst1.max(hi / lo);
    }
    let elapsed = start.elapsed();
    let pass = worst0 <= TOL0 && worst1 <= SPREAD1 && elapsed < Duration::from_secs(10);
    verdict(
        2,
        pass,
        &format!(
            "ell=0 max |ratio-1| {worst0:e} (tol {TOL0:e}) over {} cases, ell=1 max/min {worst1:.6} (limit {SPREAD1}), {elapsed:?} (limit 10 s)",
            cases.len()
        ),
    );
    assert!(pass);
}

#[test]
fn c03_admissibility_closed_forms() {
    const EXP_VALUE: f64 = 0.353553;
    const EXP_TOL: f64 = 1e-6;
    const UNIT_TOL: f64 = 1e-10;
    let eps = 0.5;
    let samples = sample_grid(&sector(PI / 2.0), 64, 32, 1e-6);
    let f = Weight::exponential_cusp(ORIGIN, eps).unwrap();
    let g = ConformalMetric::new(Weight::radial_power(1.0 + eps));
    let sup_exp = admissibility_probe(&f, &g, &samples, 1).unwrap()[0];
    let r = Weight::radial_power(1.0);
    let sup_r = admissibility_probe(&r, &ConformalMetric::new(r.clone()), &samples, 1).unwrap()[0];
    let pass = (sup_exp - EXP_VALUE).abs() <= EXP_TOL && (sup_r - 1.0).abs() <= UNIT_TOL;
    verdict(
        3,
        pass,
        &format!("sup {sup_exp:.9} (expect {EXP_VALUE} +- {EXP_TOL:e}), f = rho = r sup {sup_r:.15} (expect 1 +- {UNIT_TOL:e})"),
    );
    assert!(pass);
}

#[test]
fn c04_completeness_trichotomy() {
    const TOL: f64 = 1e-6;
    let d = sector(PI / 2.0);
    let l1 = completeness_probe(&d, &Weight::radial_power(1.0), &[(-3.0f64).exp()]).unwrap()[0];
    let eps: Vec<f64> = (1..=10).map(|k| (-(k as f64)).exp()).collect();
    let half = completeness_probe(&d, &Weight::radial_power(0.5), &eps).unwrap();
    let inc: Vec<f64> = half.windows(2).map(|w| w[1] - w[0]).collect();
    let shrinking = inc.windows(2).all(|w| w[1] < w[0]) && inc[inc.len() - 1] < 0.02 * inc[0];
    let two = completeness_probe(&d, &Weight::radial_power(2.0), &eps).unwrap();
    let worst2 = eps
        .iter()
        .zip(&two)
        .map(|(e, l)| (l - (1.0 / e - 1.0)).abs())
        .fold(0.0, f64::max);
    let pass = (l1 - 3.0).abs() <= TOL && shrinking && worst2 <= TOL;
    verdict(
        4,
        pass,
        &format!(
            "L(e^-3) = {l1:.12} (expect 3 +- {TOL:e}); lambda=0.5 increments {:.3e} -> {:.3e}; lambda=2 max |L - (1/eps - 1)| {worst2:e}",
            inc[0],
            inc[inc.len() - 1]
        ),
    );
    assert!(pass);
}

fn quarter_trichotomy() -> TrichotomyConfig {
    TrichotomyConfig::new(DomainSpec::sector(PI / 2.0), vec![0.5, 1.0, 1.5], 6)
}

#[test]
fn c05_hardy_trichotomy() {
    const DECAY: (f64, f64) = (0.35, 0.75);
    const SEPARATION: f64 = 4.0;
    let start = Instant::now();
    let series = hardy_trichotomy(&quarter_trichotomy()).unwrap();
    let elapsed = start.elapsed();
    let by = |l: f64| series.iter().find(|s| s.lambda == l).unwrap();
    let half = by(0.5);
    let one = by(1.0);
    let steep = by(1.5);
    let values: Vec<f64> = one.rows.iter().map(|r| r.lambda_min).collect();
    let one_ok = values.iter().all(|&v| v >= SEPARATION) && values.windows(2).all(|w| w[1] <= w[0]);
    let decay_ok = steep.ratios.iter().all(|r| (DECAY.0..=DECAY.1).contains(r));
    let residual_ok = series.iter().flat_map(|s| &s.rows).all(|r| r.residual <= 1e-8);
    let pass = half.classification == Classification::Holds
        && steep.classification == Classification::Fails
        && decay_ok
        && one_ok
        && residual_ok
        && elapsed < Duration::from_secs(120);
    verdict(
        5,
        pass,
        &format!(
            "lambda=0.5 {}, lambda=1.5 {} ratios {:?} (band {DECAY:?}), lambda=1 values {:?} (>= {SEPARATION}, non-increasing), {elapsed:?} (limit 120 s)",
            half.classification,
            steep.classification,
            steep.ratios.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>(),
            values.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn c06_cusp_hardy_holds() {
    let alpha = 2.0;
    let mut cfg = TrichotomyConfig::new(DomainSpec::cusp(alpha, -1.0, 1.0), vec![alpha], 5);
    cfg.domain = cfg.domain.with_lambda(alpha);
    let series = hardy_trichotomy(&cfg).unwrap();
    let s = &series[0];
    let values: Vec<f64> = s.rows.iter().map(|r| r.lambda_min).collect();
    let pass = s.classification == Classification::Holds && s.rows.len() == 5;
    verdict(
        6,
        pass,
        &format!(
            "cusp alpha=2, weight r^-4: {} with lambda_min {:?}",
            s.classification, values
        ),
    );
    assert!(pass);
}

const L_SHAPE: &str = "domain.template = sector
domain.omega = 3*pi/2
fem.problem = corner
mesh.h = 0.25
mesh.levels = 5
";

fn energy_fit(report: &Report) -> &Fit {
    report.fits.iter().find(|f| f.name == "energy").unwrap()
}

#[test]
fn c07_graded_meshes_restore_the_rate() {
    const SLOPE_TOL: f64 = 0.10;
    const MIN_R2: f64 = 0.98;
    const MAX_DOF: f64 = 2e5;
    let start = Instant::now();
    let uniform = run(&format!("{L_SHAPE}mesh.kappa = 1\n"), ExperimentKind::Converge);
    let graded = run(&format!("{L_SHAPE}mesh.kappa = 0.5\n"), ExperimentKind::Converge);
    let elapsed = start.elapsed();
    let (fu, fg) = (energy_fit(&uniform), energy_fit(&graded));
    let max_dof = [&uniform, &graded]
        .iter()
        .flat_map(|r| r.table("converge").unwrap().numbers("dof"))
        .fold(0.0, f64::max);
    let pass = (fu.slope - 0.67).abs() <= SLOPE_TOL
        && (fg.slope - 1.0).abs() <= SLOPE_TOL
        && fu.r2 >= MIN_R2
        && fg.r2 >= MIN_R2
        && max_dof <= MAX_DOF
        && elapsed < Duration::from_secs(180);
    verdict(
        7,
        pass,
        &format!(
            "quasi-uniform slope {:.4} R2 {:.5}, graded slope {:.4} R2 {:.5} (targets 0.67/1.00 +- {SLOPE_TOL}, R2 >= {MIN_R2}), max dof {max_dof}, {elapsed:?}",
            fu.slope, fu.r2, fg.slope, fg.r2
        ),
    );
    assert!(pass);
}

fn stability_spread(report: &Report) -> Vec<(f64, f64)> {
    let t = report.table("stability").unwrap();
    let (s, ratio) = (t.numbers("s"), t.numbers("ratio"));
    let mut out = Vec::new();
    for sv in [-0.1, 0.0, 0.1] {
        let r: Vec<f64> = s
            .iter()
            .zip(&ratio)
            .filter(|(a, _)| **a == sv)
            .map(|(_, r)| *r)
            .collect();
        assert_eq!(r.len(), 5);
        let last = &r[2..];
        let hi = last.iter().copied().fold(f64::MIN, f64::max);
        let lo = last.iter().copied().fold(f64::MAX, f64::min);
        out.push((sv, hi / lo));
    }
    out
}

#[test]
fn c08_weighted_stability() {
    const SPREAD: f64 = 2.0;
    let quarter = run(
        "domain.template = sector\ndomain.omega = pi/2\nweight.lambda = 1\nweight.s = -0.1, 0, 0.1\nmesh.levels = 5\n",
        ExperimentKind::Stability,
    );
    let osc = run(
        "domain.template = oscillating\ndomain.f0 = 0.3 + 0.2*sin(t)\ndomain.f1 = 1.2 + 0.2*cos(t)\ndomain.t_max = 4\nweight.s = -0.1, 0, 0.1\nmesh.levels = 5\n",
        ExperimentKind::Stability,
    );
    let a = stability_spread(&quarter);
    let b = stability_spread(&osc);
    let verdicts_hold = quarter
        .classifications
        .iter()
        .chain(&osc.classifications)
        .all(|v| v.value == "HOLDS");
    let pass = a.iter().chain(&b).all(|&(_, m)| m <= SPREAD) && verdicts_hold;
    verdict(
        8,
        pass,
        &format!("max/min over last 3 levels: sector {a:?}, oscillating cone {b:?} (limit {SPREAD})"),
    );
    assert!(pass);
}

fn max_error(report: &Report) -> f64 {
    let t = report.table("solve").unwrap();
    t.numbers("l2_error")
        .into_iter()
        .chain(t.numbers("energy_error"))
        .fold(0.0, f64::max)
}

fn solver_agreement() -> Result<f64> {
    let d = sector(PI / 2.0);
    let mesh: Mesh = refine(&grade_mesh(&d, &Grading::new(0.2, 0.5))?)?;
    let space = FESpace::new(Arc::new(mesh), 2)?;
    let u = manufactured_problem(Some(&d), "smooth")?;
    let a = CoefficientField::diag(2.0, 1.0);
    let load = u.rhs(&a)?;
    let sys = assemble(&space, &a, None, Some(&load), &[], &Default::default())?;
    let g = |x: Point| u.value(x);
    let cs = apply_bc(
        &sys,
        BoundaryData {
            dirichlet: Some(&g),
            ..Default::default()
        },
    )?;
    let (x1, _) = solve(&space, &cs, SolverKind::Cg, 1e-12)?;
    let (x2, _) = solve(&space, &cs, SolverKind::Cholesky, 1e-12)?;
    let scale = x2.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(x1
        .coeffs
        .iter()
        .zip(&x2.coeffs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale)
}

#[test]
fn c09_fem_sanity() {
    const EXACT_TOL: f64 = 1e-10;
    const SOLVER_TOL: f64 = 1e-8;
    const SLOPE: (f64, f64) = (2.0, 0.15);
    let quarter = "domain.template = sector\ndomain.omega = pi/2\nfem.solver = cholesky\nmesh.levels = 2\n";
    let affine1 = max_error(&run(&format!("{quarter}fem.problem = affine\n"), ExperimentKind::Solve));
    let affine2 = max_error(&run(
        &format!("{quarter}fem.problem = affine\nfem.degree = 2\n"),
        ExperimentKind::Solve,
    ));
    let quad2 = max_error(&run(
        &format!("{quarter}fem.problem = quadratic\nfem.degree = 2\nfem.coefficient = diag(2,1)\n"),
        ExperimentKind::Solve,
    ));
    let agree = solver_agreement().unwrap();
    let smooth = run(
        "domain.template = sector\ndomain.omega = pi/2\nfem.problem = smooth\nmesh.h = 0.2\nmesh.levels = 4\n",
        ExperimentKind::Converge,
    );
    let t = smooth.table("converge").unwrap();
    let x: Vec<f64> = t.numbers("dof").iter().map(|n| n.powf(-0.5).ln()).collect();
    let y: Vec<f64> = t.numbers("l2_error").iter().map(|e| e.ln()).collect();
    let fit = Fit::least_squares("l2", "x", "y", &x[1..], &y[1..]).unwrap();
    let pass =
        affine1.max(affine2).max(quad2) <= EXACT_TOL && agree <= SOLVER_TOL && (fit.slope - SLOPE.0).abs() <= SLOPE.1;
    verdict(
        9,
        pass,
        &format!(
            "affine P1 {affine1:e}, affine P2 {affine2:e}, quadratic P2 {quad2:e} (tol {EXACT_TOL:e}); cg vs cholesky {agree:e} (tol {SOLVER_TOL:e}); smooth P1 L2 slope {:.4} ({} +- {})",
            fit.slope, SLOPE.0, SLOPE.1
        ),
    );
    assert!(pass);
}

fn csv_bytes(text: &str, kind: ExperimentKind) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{text}output.dir = {}\noutput.svg = false\n", dir.path().display());
    let cfg = ExperimentConfig::parse(&text, kind).unwrap();
    let report = lab::run_experiment(&cfg);
    assert_eq!(report.status, Status::Ok);
    let mut out: Vec<(String, Vec<u8>)> = report
        .artifacts
        .iter()
        .filter(|a| a.ends_with(".csv"))
        .map(|a| (a.clone(), std::fs::read(dir.path().join(a)).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn c10_csv_output_is_deterministic() {
    let hardy = "domain.template = sector\ndomain.omega = pi/2\nweight.lambdas = 0.5, 1, 1.5\nmesh.levels = 6\n";
    let configs = [
        (hardy.to_string(), ExperimentKind::Hardy),
        (format!("{L_SHAPE}mesh.kappa = 1\n"), ExperimentKind::Converge),
        (format!("{L_SHAPE}mesh.kappa = 0.5\n"), ExperimentKind::Converge),
    ];
    let mut checked = 0;
    let mut pass = true;
    for (text, kind) in &configs {
        let a = csv_bytes(&format!("{text}fem.workers = 1\n"), *kind);
        let b = csv_bytes(&format!("{text}fem.workers = 1\n"), *kind);
        let c = csv_bytes(&format!("{text}fem.workers = 4\n"), *kind);
        pass &= a == b && a == c;
        checked += a.len();
    }
    verdict(
        10,
        pass,
        &format!("{checked} CSV files identical across repeated runs and 1 vs 4 workers"),
    );
    assert!(pass);
}
