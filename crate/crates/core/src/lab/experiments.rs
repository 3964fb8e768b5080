use std::sync::Arc;

use rayon::prelude::*;

use super::config::{coefficient_by_name, ExperimentConfig};
use super::report::{Fit, Plot, Report, Series, Table};
use crate::domains::{Domain2D, Weight};
use crate::error::Result;
use crate::fem::{
    apply_bc, assemble, energy_error, l2_error, manufactured_problem, solve, BoundaryData, FEFunction, FESpace,
    Manufactured, SolveReport,
};
use crate::geometry::Point;
use crate::hardy::{hardy_trichotomy, Classification, LevelRule, TrichotomyConfig};
use crate::mesh::{deepen, grade_mesh, refine, Mesh};
use crate::metric::{
    admissibility_probe, boundary_curvature_profile, completeness_probe, conformal_symbol_check,
    graded_boundary_samples, random_samples, ConformalMetric,
};
use crate::wnorm::{kondratiev_norm, relation_check, Field, WeightedNormSpec};

/// Meshes for every level, built lazily so that a failure keeps earlier levels.
fn next_mesh(cfg: &ExperimentConfig, d: &Domain2D, prev: Option<&Mesh>) -> Result<Mesh> {
    match prev {
        None => grade_mesh(d, &cfg.mesh.grading),
        Some(m) => match cfg.mesh.rule {
            LevelRule::Refine => refine(m),
            LevelRule::Deepen => deepen(m),
        },
    }
}

fn for_each_level(
    cfg: &ExperimentConfig,
    d: &Domain2D,
    mut f: impl FnMut(usize, &Arc<Mesh>) -> Result<()>,
) -> Result<()> {
    let mut mesh: Option<Arc<Mesh>> = None;
    for level in 0..cfg.mesh.levels {
        let m = Arc::new(next_mesh(cfg, d, mesh.as_deref())?);
        f(level, &m)?;
        mesh = Some(m);
    }
    Ok(())
}

struct Solved {
    uh: FEFunction,
    report: SolveReport,
    warnings: Vec<String>,
}

/// Galerkin solution of the manufactured problem with its own Dirichlet and flux data.
fn solve_manufactured(cfg: &ExperimentConfig, space: &Arc<FESpace>, exact: &Manufactured) -> Result<Solved> {
    let a = coefficient_by_name(&cfg.fem.coefficient)?;
    let load = exact.rhs(&a)?;
    let sys = assemble(space, &a, None, Some(&load), &exact.singular, &cfg.fem.assembly)?;
    let dirichlet = |x: Point| exact.value(x);
    let flux = exact.flux(&a);
    let cs = apply_bc(
        &sys,
        BoundaryData {
            dirichlet: Some(&dirichlet),
            neumann: Some(&flux),
            fixed: None,
        },
    )?;
    let (uh, report) = solve(space, &cs, cfg.fem.solver, cfg.fem.tol)?;
    Ok(Solved {
        uh,
        report,
        warnings: cs.warnings,
    })
}

fn tail(v: &[f64], n: usize) -> &[f64] {
    &v[v.len().saturating_sub(n)..]
}

pub fn mesh(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let d = cfg.domain2d()?;
    let rho = d.rho(true);
    let mut table = Table::new(
        "mesh",
        &[
            "level",
            "dof",
            "vertices",
            "elements",
            "min_angle_deg",
            "max_aspect",
            "min_diameter",
            "max_diameter",
            "min_g_diameter",
            "max_g_diameter",
        ],
    );
    let out = cfg.output.dir.clone();
    let mut files = Vec::new();
    let res = for_each_level(cfg, &d, |level, m| {
        let space = FESpace::new(Arc::clone(m), cfg.fem.degree)?;
        let q = m.quality(Some(&rho))?;
        table.push(vec![
            level.into(),
            space.ndof().into(),
            m.vertices.len().into(),
            q.elements.into(),
            q.min_angle_deg.into(),
            q.max_aspect.into(),
            q.min_diameter.into(),
            q.max_diameter.into(),
            q.min_g_diameter.into(),
            q.max_g_diameter.into(),
        ]);
        let name = format!("mesh_level{level}.txt");
        std::fs::create_dir_all(&out)?;
        m.save(&out.join(&name))?;
        files.push(name);
        Ok(())
    });
    report.tables.push(table);
    report.artifacts.extend(files);
    res
}

pub fn solve_once(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let d = cfg.domain2d()?;
    let exact = manufactured_problem(Some(&d), &cfg.fem.problem)?;
    let a = coefficient_by_name(&cfg.fem.coefficient)?;
    let mut table = Table::new(
        "solve",
        &["level", "dof", "iterations", "residual", "l2_error", "energy_error"],
    );
    let mut last = None;
    let res = for_each_level(cfg, &d, |level, m| {
        let space = FESpace::new(Arc::clone(m), cfg.fem.degree)?;
        let s = solve_manufactured(cfg, &space, &exact)?;
        let l2 = l2_error(&s.uh, &exact, &cfg.fem.assembly)?;
        let energy = energy_error(&s.uh, &exact, &a, &cfg.fem.assembly)?;
        table.push(vec![
            level.into(),
            space.ndof().into(),
            s.report.iterations.into(),
            s.report.residual.into(),
            l2.into(),
            energy.into(),
        ]);
        report
            .warnings
            .extend(s.warnings.iter().map(|w| format!("level {level}: {w}")));
        last = Some(s.uh);
        Ok(())
    });
    report.tables.push(table);
    if let Some(uh) = last {
        let mut t = Table::new("solution", &["level", "dof", "index", "x", "y", "value"]);
        let level = report.tables[report.tables.len() - 1].rows.len() - 1;
        let n = uh.space.ndof();
        for (i, p) in uh.space.dof_points.iter().enumerate() {
            t.push(vec![
                level.into(),
                n.into(),
                i.into(),
                p.x.into(),
                p.y.into(),
                uh.coeffs[i].into(),
            ]);
        }
        report.tables.push(t);
    }
    res
}

pub fn converge(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let d = cfg.domain2d()?;
    let exact = manufactured_problem(Some(&d), &cfg.fem.problem)?;
    let a = coefficient_by_name(&cfg.fem.coefficient)?;
    let rho = d.rho(true);
    let k0 = WeightedNormSpec::new(0, rho.clone(), Weight::one());
    let k1 = WeightedNormSpec::new(1, rho, Weight::one());
    let mut table = Table::new(
        "converge",
        &[
            "level",
            "dof",
            "iterations",
            "residual",
            "l2_error",
            "energy_error",
            "k0_error",
            "k1_error",
        ],
    );
    let res = for_each_level(cfg, &d, |level, m| {
        let space = FESpace::new(Arc::clone(m), cfg.fem.degree)?;
        let s = solve_manufactured(cfg, &space, &exact)?;
        let opts = &cfg.fem.assembly;
        let err = Field::Error(&exact, &s.uh);
        table.push(vec![
            level.into(),
            space.ndof().into(),
            s.report.iterations.into(),
            s.report.residual.into(),
            l2_error(&s.uh, &exact, opts)?.into(),
            energy_error(&s.uh, &exact, &a, opts)?.into(),
            kondratiev_norm(&err, &k0, None, opts)?.into(),
            kondratiev_norm(&err, &k1, None, opts)?.into(),
        ]);
        report
            .warnings
            .extend(s.warnings.iter().map(|w| format!("level {level}: {w}")));
        Ok(())
    });
    let h: Vec<f64> = table.numbers("dof").iter().map(|n| n.powf(-0.5)).collect();
    let mut series = Vec::new();
    if res.is_ok() {
        let x: Vec<f64> = tail(&h, cfg.experiment.fit_points).iter().map(|v| v.ln()).collect();
        for (col, name) in [("energy_error", "energy"), ("k0_error", "K0"), ("k1_error", "K1")] {
            let errs = table.numbers(col);
            let y: Vec<f64> = tail(&errs, cfg.experiment.fit_points).iter().map(|v| v.ln()).collect();
            let fit = Fit::least_squares(name, "log(dof^-1/2)", &format!("log({col})"), &x, &y)?;
            series.push(Series {
                name: format!("{name}: slope {:.3}", fit.slope),
                points: h.iter().copied().zip(errs).collect(),
                line: Some((fit.slope, fit.intercept / std::f64::consts::LN_10)),
            });
            report.fits.push(fit);
        }
        report.plots.push(Plot {
            name: "converge".into(),
            title: format!("{} on {}, P{}", exact.id, d.template().name(), cfg.fem.degree),
            x_label: "dof^-1/2".into(),
            y_label: "error".into(),
            log_x: true,
            series,
        });
    }
    report.tables.push(table);
    res
}

pub fn hardy(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let tc = TrichotomyConfig {
        domain: cfg.domain.clone(),
        lambdas: cfg.weight.lambdas.clone(),
        levels: cfg.mesh.levels,
        grading: cfg.mesh.grading.clone(),
        rule: cfg.mesh.rule,
        degree: cfg.fem.degree,
        tol: cfg.experiment.eig_tol,
        thresholds: cfg.experiment.thresholds,
        assembly: cfg.fem.assembly.clone(),
    };
    let all = hardy_trichotomy(&tc)?;
    let mut table = Table::new(
        "hardy",
        &["template", "lambda", "level", "dof", "lambda_min", "classification"],
    );
    let mut series = Vec::new();
    for s in &all {
        for r in &s.rows {
            table.push(vec![
                r.template.clone().into(),
                r.lambda.into(),
                r.level.into(),
                r.dof.into(),
                r.lambda_min.into(),
                s.classification.to_string().into(),
            ]);
        }
        let values: Vec<f64> = s.rows.iter().map(|r| r.lambda_min).collect();
        let monotone = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
        let ratios: Vec<String> = s.ratios.iter().map(|r| format!("{r:.4}")).collect();
        report.classify(
            format!("lambda={}", s.lambda),
            s.classification,
            format!(
                "lambda_min ratios [{}]; {}",
                ratios.join(", "),
                if monotone {
                    "monotone non-increasing"
                } else {
                    "not monotone"
                }
            ),
        );
        let worst = s.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
        if worst > tc.tol {
            report.warnings.push(format!(
                "lambda={}: eigenresidual {worst:e} above {:e}",
                s.lambda, tc.tol
            ));
        }
        series.push(Series {
            name: format!("lambda = {} ({})", s.lambda, s.classification),
            points: s.rows.iter().map(|r| (r.level as f64, r.lambda_min)).collect(),
            line: None,
        });
    }
    report.tables.push(table);
    report.plots.push(Plot {
        name: "hardy".into(),
        title: format!(
            "Hardy constants on {}",
            all.first().map_or("", |s| s.rows[0].template.as_str())
        ),
        x_label: "level".into(),
        y_label: "lambda_min".into(),
        log_x: false,
        series,
    });
    Ok(())
}

/// Smooth load concentrated in `log r` around the first singular point.
fn bump(d: &Domain2D, center: f64, width: f64) -> impl Fn(Point) -> f64 + Send + Sync {
    let c = d.singular_points.first().map_or(Point::ORIGIN, |s| s.position);
    move |x: Point| {
        let r = x.dist(c);
        if r == 0.0 {
            return 0.0;
        }
        (-((r.ln() - center) / width).powi(2)).exp()
    }
}

pub fn stability(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let d = cfg.domain2d()?;
    let a = coefficient_by_name(&cfg.fem.coefficient)?;
    let rho = d.rho(true);
    let f = d.f_weight(true);
    let load = bump(&d, cfg.experiment.bump_center, cfg.experiment.bump_width);
    let opts = &cfg.fem.assembly;
    let svals = &cfg.weight.s;
    let mut rows: Vec<Vec<(usize, usize, f64, f64)>> = vec![Vec::new(); svals.len()];
    let res = for_each_level(cfg, &d, |level, m| {
        let space = FESpace::new(Arc::clone(m), cfg.fem.degree)?;
        let sys = assemble(&space, &a, None, Some(&load), &[], opts)?;
        let zero = |_: Point| 0.0;
        let cs = apply_bc(
            &sys,
            BoundaryData {
                dirichlet: Some(&zero),
                ..Default::default()
            },
        )?;
        let (uh, _) = solve(&space, &cs, cfg.fem.solver, cfg.fem.tol)?;
        report
            .warnings
            .extend(cs.warnings.iter().map(|w| format!("level {level}: {w}")));
        let norms: Vec<(f64, f64)> = svals
            .par_iter()
            .map(|&s| {
                let fs = f.pow(s);
                // solution in rho f^s K^1, data in rho^-1 f^s K^0
                let sol = WeightedNormSpec::new(1, rho.clone(), rho.clone().times(&fs));
                let data = WeightedNormSpec::new(0, rho.clone(), rho.pow(-1.0).times(&fs));
                let field = Field::Closure {
                    value: &load,
                    gradient: None,
                };
                Ok((
                    kondratiev_norm(&Field::Fe(&uh), &sol, None, opts)?,
                    kondratiev_norm(&field, &data, Some(m), opts)?,
                ))
            })
            .collect::<Result<_>>()?;
        for (k, (sol, data)) in norms.into_iter().enumerate() {
            rows[k].push((level, space.ndof(), sol, data));
        }
        Ok(())
    });
    let mut table = Table::new(
        "stability",
        &["s", "level", "dof", "solution_norm", "data_norm", "ratio"],
    );
    let mut series = Vec::new();
    for (k, &s) in svals.iter().enumerate() {
        for &(level, dof, sol, data) in &rows[k] {
            table.push(vec![
                s.into(),
                level.into(),
                dof.into(),
                sol.into(),
                data.into(),
                (sol / data).into(),
            ]);
        }
        let ratios: Vec<f64> = rows[k].iter().map(|r| r.2 / r.3).collect();
        if res.is_ok() {
            let last = tail(&ratios, cfg.experiment.fit_points);
            let hi = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = last.iter().copied().fold(f64::INFINITY, f64::min);
            let spread = hi / lo;
            let verdict = if last.len() >= 3 && spread <= 2.0 {
                Classification::Holds
            } else {
                Classification::Inconclusive
            };
            report.classify(
                format!("s={s}"),
                verdict,
                format!("max/min ratio over the last {} levels = {spread:.4}", last.len()),
            );
        }
        series.push(Series {
            name: format!("s = {s}"),
            points: rows[k].iter().map(|r| (r.0 as f64, r.2 / r.3)).collect(),
            line: None,
        });
    }
    report.tables.push(table);
    report.plots.push(Plot {
        name: "stability".into(),
        title: format!("Solution/data norm ratios on {}", d.template().name()),
        x_label: "level".into(),
        y_label: "ratio".into(),
        log_x: false,
        series,
    });
    res
}

/// `pass` when extending the samples towards the singular set does not raise the supremum.
fn bounded_flag(shallow: f64, deep: f64) -> &'static str {
    if deep.is_finite() && deep - shallow <= 1e-2 * shallow.abs() + 1e-10 {
        "pass"
    } else {
        "inconclusive"
    }
}

pub fn geometry_check(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let d = cfg.domain2d()?;
    let rho = d.rho(true);
    let f = d.f_weight(true);
    let g = ConformalMetric::new(rho.clone());
    let ex = &cfg.experiment;
    let shallow = random_samples(&d, ex.samples, ex.r_min, ex.seed);
    let mut deep = shallow.clone();
    deep.extend(random_samples(&d, ex.samples, ex.r_min * ex.r_min, ex.seed));

    let mut adm = Table::new("admissibility", &["level", "dof", "weight", "order", "r_min", "sup"]);
    for (name, w) in [("rho", &rho), ("f", &f)] {
        let a = admissibility_probe(w, &g, &shallow, 2)?;
        let b = admissibility_probe(w, &g, &deep, 2)?;
        for order in 0..2 {
            adm.push(vec![
                0usize.into(),
                0usize.into(),
                name.into(),
                (order + 1).into(),
                ex.r_min.into(),
                a[order].into(),
            ]);
            adm.push(vec![
                0usize.into(),
                0usize.into(),
                name.into(),
                (order + 1).into(),
                (ex.r_min * ex.r_min).into(),
                b[order].into(),
            ]);
            report.classify(
                format!("admissibility {name} order {}", order + 1),
                bounded_flag(a[order], b[order]),
                format!(
                    "sup {:.6e} at r_min {:e}, {:.6e} at {:e}",
                    a[order],
                    ex.r_min,
                    b[order],
                    ex.r_min * ex.r_min
                ),
            );
        }
    }
    report.tables.push(adm);

    let mut curv = Table::new(
        "curvature",
        &["level", "dof", "curve", "x", "y", "kappa_euclidean", "kappa_geodesic"],
    );
    let per_curve = (ex.samples / d.boundary.len().max(1)).clamp(8, 256);
    let mut sups = Vec::new();
    for (c, curve) in d.boundary.iter().enumerate() {
        let mut samples = Vec::new();
        for (p_min, towards) in [(ex.r_min, true), (ex.r_min, false)] {
            samples.extend(
                graded_boundary_samples(c, per_curve, p_min, towards)
                    .into_iter()
                    .map(|mut s| {
                        s.param = s.param.clamp(ex.r_min, 1.0 - ex.r_min);
                        s
                    }),
            );
        }
        let prof = boundary_curvature_profile(&d, &rho, &samples)?;
        for k in 0..prof.points.len() {
            curv.push(vec![
                0usize.into(),
                0usize.into(),
                curve.name.clone().into(),
                prof.points[k].x.into(),
                prof.points[k].y.into(),
                prof.euclidean[k].into(),
                prof.geodesic[k].into(),
            ]);
        }
        let inner: Vec<_> = samples
            .iter()
            .filter(|s| s.param.min(1.0 - s.param) >= ex.r_min.sqrt())
            .copied()
            .collect();
        let coarse = if inner.is_empty() {
            prof.sup
        } else {
            boundary_curvature_profile(&d, &rho, &inner)?.sup
        };
        sups.push((curve.name.clone(), coarse, prof.sup));
    }
    report.tables.push(curv);
    let coarse = sups.iter().map(|s| s.1).fold(0.0, f64::max);
    let fine = sups.iter().map(|s| s.2).fold(0.0, f64::max);
    let detail: Vec<String> = sups.iter().map(|(n, _, s)| format!("{n}: {s:.6e}")).collect();
    report.classify(
        "geodesic curvature",
        bounded_flag(coarse, fine),
        format!("sup |kappa_g| {}", detail.join(", ")),
    );

    let lengths = completeness_probe(&d, &rho, &ex.epsilons)?;
    let mut comp = Table::new("completeness", &["level", "dof", "epsilon", "length"]);
    for (&e, &l) in ex.epsilons.iter().zip(&lengths) {
        comp.push(vec![0usize.into(), 0usize.into(), e.into(), l.into()]);
    }
    report.tables.push(comp);
    let inc: Vec<f64> = lengths.windows(2).map(|w| w[1] - w[0]).collect();
    let (value, detail) = match (inc.first(), inc.last()) {
        (Some(&a), Some(&b)) if a > 0.0 => {
            let q = b / a;
            let v = if q < 0.1 {
                "not bounded geometry (incomplete)"
            } else if q >= 0.9 {
                "pass"
            } else {
                "inconclusive"
            };
            (
                v,
                format!(
                    "last/first length increment {q:.4}; L = {:.6e} at eps = {:.4e}",
                    lengths[lengths.len() - 1],
                    ex.epsilons[ex.epsilons.len() - 1]
                ),
            )
        }
        _ => (
            "inconclusive",
            "fewer than 3 cutoffs or non-increasing lengths".to_string(),
        ),
    };
    report.classify("completeness", value, detail);

    let a = coefficient_by_name(&cfg.fem.coefficient)?;
    let dev = conformal_symbol_check(&a, &rho, &shallow)?;
    let mut sym = Table::new("symbol", &["level", "dof", "coefficient", "samples", "max_deviation"]);
    sym.push(vec![
        0usize.into(),
        0usize.into(),
        cfg.fem.coefficient.clone().into(),
        shallow.len().into(),
        dev.into(),
    ]);
    report.tables.push(sym);
    report.classify(
        "conformal symbol",
        if dev <= 1e-12 { "pass" } else { "inconclusive" },
        format!("max eigenvalue deviation {dev:e}"),
    );
    Ok(())
}

pub fn norms_check(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let d = cfg.domain2d()?;
    let exact = manufactured_problem(Some(&d), &cfg.fem.problem)?;
    let rho = d.rho(true);
    let f = d.f_weight(true);
    let opts = &cfg.fem.assembly;
    let u = Field::Exact(&exact);
    let mut rel = Table::new(
        "relation",
        &["level", "dof", "ell", "p", "kondratiev", "sobolev", "ratio"],
    );
    let mut norms = Table::new("norms", &["level", "dof", "ell", "p", "s", "norm"]);
    let res = for_each_level(cfg, &d, |level, m| {
        let dof = FESpace::new(Arc::clone(m), cfg.fem.degree)?.ndof();
        for ell in 0..=1 {
            let r = relation_check(&u, &rho, &f, ell, 2.0, Some(m), opts)?;
            rel.push(vec![
                level.into(),
                dof.into(),
                ell.into(),
                2.0.into(),
                r.kondratiev.into(),
                r.sobolev.into(),
                r.ratio().into(),
            ]);
        }
        for ell in 0..=2 {
            for &s in &cfg.weight.s {
                let spec = WeightedNormSpec::new(ell, rho.clone(), f.clone()).with_s(s);
                let n = kondratiev_norm(&u, &spec, Some(m), opts)?;
                norms.push(vec![
                    level.into(),
                    dof.into(),
                    ell.into(),
                    2.0.into(),
                    s.into(),
                    n.into(),
                ]);
            }
        }
        Ok(())
    });
    if res.is_ok() {
        let ell = rel.numbers("ell");
        let ratio = rel.numbers("ratio");
        let pick = |e: f64| -> Vec<f64> {
            ell.iter()
                .zip(&ratio)
                .filter(|(l, _)| **l == e)
                .map(|(_, r)| *r)
                .collect()
        };
        let r0 = pick(0.0);
        let dev = r0.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        report.classify(
            "relation ell=0",
            if dev <= 1e-12 {
                Classification::Holds
            } else {
                Classification::Inconclusive
            },
            format!("max |ratio - 1| = {dev:e}"),
        );
        let r1 = pick(1.0);
        let hi = r1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = r1.iter().copied().fold(f64::INFINITY, f64::min);
        report.classify(
            "relation ell=1",
            if hi / lo <= 1.2 {
                Classification::Holds
            } else {
                Classification::Inconclusive
            },
            format!("ratios in [{lo:.6}, {hi:.6}], max/min {:.6}", hi / lo),
        );
    }
    report.tables.push(rel);
    report.tables.push(norms);
    res
}

pub(crate) fn dispatch(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    use super::config::ExperimentKind as K;
    let run = match cfg.kind {
        K::Mesh => mesh,
        K::Solve => solve_once,
        K::Converge => converge,
        K::Hardy => hardy,
        K::Stability => stability,
        K::GeometryCheck => geometry_check,
        K::NormsCheck => norms_check,
    };
    report.timed(cfg.kind.name(), |r| run(cfg, r))
}
